mod common;

use common::{maryland, random_operator, rng};
use nashmoser::homological::{invert_near_identity, neumann_invert, solve_diagonal_correction, solve_generator, SolveMethod};
use nashmoser::{Complex64, DiagonalOperator, Error, LatticeBox, LatticeOperator, TameConstants};
use rand::Rng;

/// `min_{i != j} |d_i - d_j| |i - j|^tau` over the whole box.
fn box_gamma(d: &DiagonalOperator, tau: f64) -> f64 {
    let l = d.lattice();
    let v = d.values();
    let mut g = f64::INFINITY;
    for i in 0..l.len() {
        for j in 0..l.len() {
            if i != j {
                let k: Vec<i64> = l.site(i).iter().zip(l.site(j)).map(|(a, b)| a - b).collect();
                g = g.min((v[i] - v[j]).norm() * nashmoser::bracket(&k).powf(tau));
            }
        }
    }
    g
}

#[test]
fn generator_is_exact_and_bounded() {
    let b = LatticeBox::new(1, 16, 8).unwrap();
    let d = maryland(&b);
    let tau = 1.0;
    let gamma = box_gamma(&d, tau);
    let s_list = [0.6, 3.25, 6.55 - tau];
    let mut r = rng(3);
    for _ in 0..100 {
        let theta = r.random_range(1.0..32.0);
        let g = random_operator(&mut r, &b, 2.0, 1.0).offdiagonal_part();
        let sol = solve_generator(&d, &g, theta, tau, gamma, &s_list).unwrap();
        let w = &sol.w;
        for i in 0..b.len() {
            assert_eq!(w.get(i, i), Complex64::new(0.0, 0.0));
        }
        let check = w.commutator_with_diagonal(&d).unwrap().add(&g.smooth(theta)).unwrap();
        assert!(check.max_offdiag_within(theta) <= 1e-12);
        assert!(sol.residual_offdiag <= 1e-12);
        assert!(w.smooth_complement(theta).max_abs() == 0.0);
        for (s, m) in &sol.bound_margins {
            let direct = g.smooth(theta).sobolev_norm(s + tau) / gamma - w.sobolev_norm(*s);
            assert!((m - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
            assert!(*m >= 0.0, "s = {s}, margin {m}");
        }
    }
}

#[test]
fn generator_rejects_uncorrected_diagonal() {
    let b = LatticeBox::new(1, 4, 2).unwrap();
    let d = maryland(&b);
    let g = LatticeOperator::identity(&b, nashmoser::NormPolicy::Sup);
    assert!(matches!(solve_generator(&d, &g, 4.0, 1.0, 0.1, &[]), Err(Error::UnreducedDiagonal { .. })));
}

fn near_identity(r: &mut rand_chacha::ChaCha8Rng, b: &LatticeBox, size: f64) -> (LatticeOperator, LatticeOperator) {
    let id = LatticeOperator::identity(b, nashmoser::NormPolicy::Sup);
    let q = id.add(&random_operator(r, b, 3.0, size)).unwrap();
    let qinv = q.inverse().unwrap();
    (q, qinv)
}

#[test]
fn fixed_point_agrees_with_direct_solve() {
    let b = LatticeBox::new(1, 2, 1).unwrap();
    let tc = TameConstants::new(1, 0.6).unwrap();
    let mut r = rng(5);
    let mut contracted = 0;
    for _ in 0..100 {
        let (q, qinv) = near_identity(&mut r, &b, 1e-3);
        let p = random_operator(&mut r, &b, 1.0, 1.0);
        let pp = random_operator(&mut r, &b, 1.0, 1.0);
        let sol = solve_diagonal_correction(&q, &qinv, &p, &pp, &tc, 1e-13, 500).unwrap();
        let resid = qinv.mul(&p.add(&sol.x.to_operator()).unwrap().mul(&q).unwrap()).unwrap().add(&pp).unwrap();
        let worst = (0..b.len()).map(|i| resid.get(i, i).norm()).fold(0.0, f64::max);
        assert!(worst <= 1e-10);
        if sol.contraction_holds {
            contracted += 1;
            assert_eq!(sol.method, SolveMethod::FixedPoint);
            assert!(sol.direct_agreement <= 1e-10, "{}", sol.direct_agreement);
            assert!(sol.bound_margin >= 0.0);
        }
    }
    assert_eq!(contracted, 100);
}

#[test]
fn fixed_point_falls_back_outside_contraction() {
    let b = LatticeBox::new(1, 2, 1).unwrap();
    let tc = TameConstants::new(1, 0.6).unwrap();
    let mut r = rng(9);
    let (q, qinv) = near_identity(&mut r, &b, 0.3);
    let p = random_operator(&mut r, &b, 1.0, 1.0);
    let sol = solve_diagonal_correction(&q, &qinv, &p, &p, &tc, 1e-13, 500).unwrap();
    assert!(!sol.contraction_holds);
    assert_eq!(sol.method, SolveMethod::Direct);
}

fn scaled_to(w: LatticeOperator, target: f64, alpha0: f64) -> LatticeOperator {
    let n = w.sobolev_norm(alpha0);
    w.scale(Complex64::new(target / n, 0.0))
}

#[test]
fn neumann_series_under_smallness() {
    let b = LatticeBox::new(1, 16, 8).unwrap();
    let tc = TameConstants::new(1, 0.6).unwrap();
    let limit = 0.5 / (4.0 * tc.c0 * tc.c0);
    let s_list = [0.6, 2.0, 4.0];
    let mut r = rng(13);
    for _ in 0..30 {
        let size = r.random_range(0.01..1.0) * limit;
        let w = scaled_to(random_operator(&mut r, &b, 3.0, 1.0), size, tc.alpha0);
        let inv = neumann_invert(&w, &tc, &s_list).unwrap();
        assert_eq!(inv.method, SolveMethod::Neumann);
        assert!(inv.residual <= 1e-12);
        assert!(inv.low_margin >= 0.0);
        for (s, m) in &inv.bound_margins {
            assert!(*m >= 0.0, "s = {s}");
        }
    }
}

#[test]
fn neumann_outside_smallness() {
    let b = LatticeBox::new(1, 16, 8).unwrap();
    let tc = TameConstants::new(1, 0.6).unwrap();
    let w = scaled_to(random_operator(&mut rng(17), &b, 3.0, 1.0), 0.01, tc.alpha0);
    assert!(matches!(neumann_invert(&w, &tc, &[]), Err(Error::NeumannSmallness { .. })));
    let inv = invert_near_identity(&w, &tc, &[], true).unwrap();
    assert_eq!(inv.method, SolveMethod::Direct);
    assert!(inv.residual <= 1e-12);
    assert!(inv.condition_number.unwrap() >= 1.0);
}
