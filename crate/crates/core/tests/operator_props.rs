mod common;

use common::{random_operator, random_sparse_diagonals, rng};
use nashmoser::operator::{diagonal_form_product, tame_bound_check, tame_chain_margins, OperatorSnapshot};
use nashmoser::{Complex64, LatticeBox, LatticeOperator, NormPolicy, TameConstants};
use proptest::prelude::*;

fn brute_product(a: &LatticeOperator, b: &LatticeOperator) -> Vec<Complex64> {
    let n = a.dim();
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            for m in 0..n {
                out[i * n + j] += a.get(i, m) * b.get(m, j);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smoothing_bounds(seed in any::<u64>(), s in 0.0f64..4.0, gap in 0.0f64..3.0, theta in 1.0f64..20.0) {
        let b = LatticeBox::new(1, 10, 5).unwrap();
        let x = random_operator(&mut rng(seed), &b, 1.5, 1.0);
        let lo = s;
        let hi = s + gap;
        let r = theta.powf(hi - lo);
        prop_assert!(x.smooth(theta).sobolev_norm(hi) <= r * x.sobolev_norm(lo) * (1.0 + 1e-12));
        prop_assert!(x.smooth_complement(theta).sobolev_norm(lo) <= theta.powf(lo - hi) * x.sobolev_norm(hi) * (1.0 + 1e-12));
    }

    #[test]
    fn norms_increase_with_index(seed in any::<u64>(), s in 0.0f64..5.0, ds in 0.0f64..2.0) {
        let b = LatticeBox::new(2, 3, 1).unwrap();
        let x = random_operator(&mut rng(seed), &b, 2.0, 1.0);
        prop_assert!(x.sobolev_norm(s) <= x.sobolev_norm(s + ds));
    }

    #[test]
    fn product_matches_brute_force(seed in any::<u64>()) {
        let b = LatticeBox::new(1, 4, 2).unwrap();
        let mut r = rng(seed);
        let x = random_operator(&mut r, &b, 1.0, 1.0);
        let y = random_operator(&mut r, &b, 1.0, 1.0).add(&random_operator(&mut r, &b, 1.0, 1.0).scale(Complex64::new(0.0, 1.0))).unwrap();
        let fast = x.mul(&y).unwrap();
        let slow = brute_product(&x, &y);
        let scale = slow.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i in 0..b.len() {
            for j in 0..b.len() {
                prop_assert!((fast.get(i, j) - slow[i * b.len() + j]).norm() <= 1e-12 * scale);
            }
        }
        let diag_form = diagonal_form_product(&x, &y).unwrap();
        prop_assert!(diag_form.sub(&fast).unwrap().max_abs() <= 1e-12 * scale);
    }

    #[test]
    fn snapshot_round_trip_is_exact(seed in any::<u64>()) {
        let b = LatticeBox::new(2, 2, 1).unwrap();
        let x = random_operator(&mut rng(seed), &b, 1.0, 3.0);
        let snap = OperatorSnapshot::from_operator(&x);
        let back = OperatorSnapshot::from_bytes(&snap.to_bytes()).unwrap().to_operator(NormPolicy::Sup).unwrap();
        prop_assert_eq!(back, x);
    }
}

#[test]
fn sparse_diagonal_pairs_satisfy_tame_estimate() {
    let b = LatticeBox::new(1, 16, 8).unwrap();
    let tc = TameConstants::new(1, 0.6).unwrap();
    let mut r = rng(7);
    for _ in 0..100 {
        let x = random_sparse_diagonals(&mut r, &b, 3);
        let y = random_sparse_diagonals(&mut r, &b, 3);
        for s in [0.6, 1.0, 2.5, 4.0] {
            assert!(tame_bound_check(&x, &y, s, &tc).unwrap() >= 0.0);
        }
    }
}

#[test]
fn chain_bounds_up_to_four_factors() {
    let b = LatticeBox::new(1, 8, 4).unwrap();
    let tc = TameConstants::new(1, 0.6).unwrap();
    let mut r = rng(11);
    for n in 2..=4 {
        for _ in 0..20 {
            let ops: Vec<_> = (0..n).map(|_| random_operator(&mut r, &b, 2.0, 1.0)).collect();
            let m = tame_chain_margins(&ops, 2.0, &tc).unwrap();
            assert!(m.low >= 0.0 && m.high >= 0.0, "{m:?}");
        }
    }
}

#[test]
fn power_law_hopping_norm_at_s0_minus_half_minus_delta() {
    let b = LatticeBox::new(1, 32, 16).unwrap();
    let s0 = 4.0;
    let s = s0 - 0.5 - 0.05;
    let t = nashmoser::models::build_hopping(&nashmoser::models::HoppingSpec::power_law(s0, 1.0), &b, NormPolicy::Sup).unwrap();
    // sqrt of the sum over nonzero offsets |k| <= 64 of <k>^{2s} |k|^{-2 s0}, both signs
    let oracle: f64 = (1..=64).map(|k| 2.0 * (k as f64).powf(2.0 * (s - s0))).sum::<f64>().sqrt();
    assert!((t.sobolev_norm(s) - oracle).abs() <= 1e-12 * oracle);
}

#[test]
fn hopping_norm_grows_towards_the_critical_index() {
    let b = LatticeBox::new(1, 32, 16).unwrap();
    let t = nashmoser::models::build_hopping(&nashmoser::models::HoppingSpec::power_law(4.0, 1.0), &b, NormPolicy::Sup).unwrap();
    let grid: Vec<f64> = (0..8).map(|i| i as f64 * 0.5).collect();
    let norms = t.sobolev_norms(&grid);
    assert!(norms.windows(2).all(|w| w[0] < w[1]));
    assert!(norms.iter().all(|x| x.is_finite()));
}
