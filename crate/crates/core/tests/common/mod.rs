#![allow(dead_code)]

use nashmoser::iteration::{Mode, SchemeParams};
use nashmoser::models::{build_hopping, build_potential, golden_mean, HoppingSpec, PotentialKind, PotentialSpec};
use nashmoser::{bracket, distal_margin, Complex64, DiagonalOperator, LatticeBox, LatticeOperator, NormPolicy};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense operator with `|A_ij| <= <i-j>^{-decay}` and random signs.
pub fn random_operator(rng: &mut ChaCha8Rng, lattice: &LatticeBox, decay: f64, scale: f64) -> LatticeOperator {
    LatticeOperator::from_fn(lattice, NormPolicy::Sup, |i, j| {
        let k: Vec<i64> = lattice.site(i).iter().zip(lattice.site(j)).map(|(a, b)| a - b).collect();
        Complex64::new(scale * rng.random_range(-1.0..1.0) * bracket(&k).powf(-decay), 0.0)
    })
}

/// Operator supported on a handful of random diagonals.
pub fn random_sparse_diagonals(rng: &mut ChaCha8Rng, lattice: &LatticeBox, count: usize) -> LatticeOperator {
    let max = lattice.max_offset() as i64;
    let d = lattice.dimension();
    let mut out = LatticeOperator::zeros(lattice, NormPolicy::Sup);
    for _ in 0..count {
        let k: Vec<i64> = (0..d).map(|_| rng.random_range(-max..=max)).collect();
        let c = rng.random_range(-1.0..1.0);
        out = out.add(&LatticeOperator::single_diagonal(lattice, NormPolicy::Sup, &k, Complex64::new(c, 0.0))).unwrap();
    }
    out
}

pub fn maryland(lattice: &LatticeBox) -> DiagonalOperator {
    let spec = PotentialSpec::new(PotentialKind::Maryland, vec![golden_mean()]);
    build_potential(&spec, lattice, NormPolicy::Sup).unwrap()
}

/// A standard desk-scale scenario on `d = 1`.
pub struct Scenario {
    pub lattice: LatticeBox,
    pub t: LatticeOperator,
    pub d: DiagonalOperator,
    pub params: SchemeParams,
}

pub const S_HOPPING: f64 = 4.0;
pub const TAU: f64 = 1.0;
pub const DELTA: f64 = 0.05;
pub const ALPHA0: f64 = 0.6;

pub fn scenario(kind: PotentialKind, radius: usize, epsilon: f64, mode: Mode) -> Scenario {
    scenario_with(kind, radius, epsilon, mode, TAU, None)
}

/// `gamma = None` measures the distal constant on the box (capped at 1).
pub fn scenario_with(kind: PotentialKind, radius: usize, epsilon: f64, mode: Mode, tau: f64, gamma: Option<f64>) -> Scenario {
    let lattice = LatticeBox::new(1, radius, radius / 2).unwrap();
    let spec = PotentialSpec::new(kind, vec![golden_mean()]);
    let d = build_potential(&spec, &lattice, NormPolicy::Sup).unwrap();
    let gamma = gamma.unwrap_or_else(|| {
        distal_margin(d.sequence(), tau, 1e-12, lattice.max_offset())
            .unwrap()
            .largest_gamma
            .min(1.0)
    });
    let t = build_hopping(&HoppingSpec::power_law(S_HOPPING, epsilon), &lattice, NormPolicy::Sup).unwrap();
    let mut params = SchemeParams::for_power_law(1, S_HOPPING, tau, gamma, DELTA, ALPHA0);
    params.mode = mode;
    Scenario { lattice, t, d, params }
}
