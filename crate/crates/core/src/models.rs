//! Concrete potentials and long-range hopping operators.
//!
//! Quasi-periodic potentials are formula-backed, so translated copies used
//! by the distal check are exact off the storage box.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{nonzero_offsets, sup_abs, LatticeBox, NormPolicy, Sequence, SiteFn};
use crate::error::{Error, Result};
use crate::operator::{DiagonalOperator, LatticeOperator};

/// Distance to a pole below which the Maryland potential is rejected.
pub const POLE_TOLERANCE: f64 = 1e-8;

/// Number of dyadic levels summed for the limit-periodic potentials; later
/// terms are below double precision.
const LIMIT_PERIODIC_LEVELS: u32 = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    /// `tan(pi (i.omega + phase))`
    Maryland,
    /// `exp(2 pi sqrt(-1) (i.omega + phase))`
    Sarnak,
    /// `(i.omega + phase) mod 1`
    CraigMod1,
    /// Binary limit-periodic sequence, dense in `[0, 1]`.
    LimitPeriodicBinary,
    /// Ternary limit-periodic sequence, dense in the Cantor set.
    LimitPeriodicTernary,
    /// Explicit values in site order.
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    #[serde(default)]
    pub omega: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
    /// Real parts for [`PotentialKind::Custom`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_values: Option<Vec<f64>>,
    /// Optional imaginary parts for [`PotentialKind::Custom`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_imag: Option<Vec<f64>>,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, omega: Vec<f64>) -> Self {
        Self {
            kind,
            omega,
            phase: 0.0,
            custom_values: None,
            custom_imag: None,
        }
    }

    pub fn custom(values: Vec<f64>) -> Self {
        Self {
            custom_values: Some(values),
            ..Self::new(PotentialKind::Custom, Vec::new())
        }
    }

    pub fn is_quasi_periodic(&self) -> bool {
        matches!(self.kind, PotentialKind::Maryland | PotentialKind::Sarnak | PotentialKind::CraigMod1)
    }
}

/// Golden mean `(sqrt 5 - 1) / 2`.
pub fn golden_mean() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

fn dot(site: &[i64], omega: &[f64]) -> f64 {
    site.iter().zip(omega).map(|(&i, &w)| i as f64 * w).sum()
}

fn in_level(i: i64, v: u32) -> bool {
    let period = 1i128 << v;
    let half = 1i128 << (v - 1);
    let r = (i as i128).rem_euclid(period);
    if v.is_multiple_of(2) {
        r < half
    } else {
        r >= half
    }
}

/// `sum_v sum_u chi_{A_v}(i_u) base^{-(v-1)d-u}`.
fn limit_periodic(site: &[i64], base: f64) -> f64 {
    let d = site.len() as i32;
    let mut acc = 0.0;
    for v in (1..=LIMIT_PERIODIC_LEVELS).rev() {
        for (u, &i) in site.iter().enumerate().rev() {
            if in_level(i, v) {
                acc += base.powi(-((v as i32 - 1) * d + u as i32 + 1));
            }
        }
    }
    acc
}

/// Formula of a non-custom potential.
pub fn potential_formula(spec: &PotentialSpec) -> Option<SiteFn> {
    let omega = spec.omega.clone();
    let phase = spec.phase;
    let f: SiteFn = match spec.kind {
        PotentialKind::Maryland => Arc::new(move |i| Complex64::new((PI * (dot(i, &omega) + phase)).tan(), 0.0)),
        PotentialKind::Sarnak => Arc::new(move |i| Complex64::from_polar(1.0, 2.0 * PI * (dot(i, &omega) + phase))),
        PotentialKind::CraigMod1 => Arc::new(move |i| Complex64::new((dot(i, &omega) + phase).rem_euclid(1.0), 0.0)),
        PotentialKind::LimitPeriodicBinary => Arc::new(|i| Complex64::new(limit_periodic(i, 2.0), 0.0)),
        PotentialKind::LimitPeriodicTernary => Arc::new(|i| Complex64::new(2.0 * limit_periodic(i, 3.0), 0.0)),
        PotentialKind::Custom => return None,
    };
    Some(f)
}

/// Diagonal potential `D = diag(d_i)` on the box.
pub fn build_potential(spec: &PotentialSpec, lattice: &LatticeBox, policy: NormPolicy) -> Result<DiagonalOperator> {
    let d = lattice.dimension();
    if spec.is_quasi_periodic() && spec.omega.len() != d {
        return Err(Error::InvalidParameter(format!(
            "frequency has {} components, box dimension is {d}",
            spec.omega.len()
        )));
    }
    if spec.kind == PotentialKind::Maryland {
        for site in lattice.sites() {
            let x = dot(site, &spec.omega) + spec.phase - 0.5;
            let distance = (x - x.round()).abs();
            if distance < POLE_TOLERANCE {
                return Err(Error::PoleProximity {
                    site: site.to_vec(),
                    distance,
                });
            }
        }
    }
    match potential_formula(spec) {
        Some(f) => Ok(DiagonalOperator::from_sequence(Sequence::from_fn(lattice, f, policy))),
        None => {
            let re = spec
                .custom_values
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("custom potential needs custom_values".into()))?;
            let im = spec.custom_imag.clone().unwrap_or_else(|| vec![0.0; re.len()]);
            if re.len() != lattice.len() || im.len() != lattice.len() {
                return Err(Error::BoxMismatch(format!(
                    "custom potential has {} values for {} sites",
                    re.len(),
                    lattice.len()
                )));
            }
            let values = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
            DiagonalOperator::from_values(lattice, policy, values)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum HoppingProfile {
    /// `phi_k = |k|^{-s}`.
    PowerLaw,
    /// `phi_k = coefficients[|k|_inf - 1]`, zero beyond the list.
    Custom { coefficients: Vec<f64> },
}

/// Long-range hopping `T_{ij} = epsilon phi_{i-j}` with `phi_0 = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoppingSpec {
    pub s_exponent: f64,
    pub epsilon: f64,
    #[serde(default = "default_profile")]
    pub profile: HoppingProfile,
}

fn default_profile() -> HoppingProfile {
    HoppingProfile::PowerLaw
}

impl HoppingSpec {
    pub fn power_law(s_exponent: f64, epsilon: f64) -> Self {
        Self {
            s_exponent,
            epsilon,
            profile: HoppingProfile::PowerLaw,
        }
    }

    /// `phi_k` as a function of `|k|_inf`.
    pub fn coefficient(&self, m: i64) -> f64 {
        if m == 0 {
            return 0.0;
        }
        match &self.profile {
            HoppingProfile::PowerLaw => (m as f64).powf(-self.s_exponent),
            HoppingProfile::Custom { coefficients } => coefficients.get(m as usize - 1).copied().unwrap_or(0.0),
        }
    }
}

/// `epsilon T_phi` on the box; real symmetric and Toeplitz.
pub fn build_hopping(spec: &HoppingSpec, lattice: &LatticeBox, policy: NormPolicy) -> Result<LatticeOperator> {
    if !(spec.s_exponent > 0.0) {
        return Err(Error::InvalidParameter(format!("hopping exponent {} must be positive", spec.s_exponent)));
    }
    if !(spec.epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("coupling {} must be nonnegative", spec.epsilon)));
    }
    if let HoppingProfile::Custom { coefficients } = &spec.profile {
        for (idx, &c) in coefficients.iter().enumerate() {
            let m = idx as f64 + 1.0;
            if c.abs() > m.powf(-spec.s_exponent) * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!(
                    "custom coefficient phi_{} = {c} exceeds |k|^-s",
                    idx + 1
                )));
            }
        }
    }
    let max = lattice.max_offset() as i64;
    let table: Vec<f64> = (0..=max).map(|m| spec.epsilon * spec.coefficient(m)).collect();
    let n = lattice.len();
    let re = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let k: Vec<i64> = lattice.site(i).iter().zip(lattice.site(j)).map(|(a, b)| a - b).collect();
        table[sup_abs(&k) as usize]
    });
    LatticeOperator::from_real(lattice, policy, re)
}

/// Outcome of [`check_diophantine`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiophantineReport {
    pub tau: f64,
    /// `min_{0 < |k| <= max_k} ||k.omega||_{R/Z} |k|^tau`.
    pub gamma_best: f64,
    pub worst_k: Vec<i64>,
}

/// Largest `gamma` with `||k.omega|| >= gamma |k|^{-tau}` on the window
/// `0 < |k|_inf <= max_k`.
pub fn check_diophantine(omega: &[f64], tau: f64, max_k: usize) -> Result<DiophantineReport> {
    if max_k == 0 || omega.is_empty() {
        return Err(Error::InvalidParameter("need max_k >= 1 and a nonempty frequency".into()));
    }
    let mut best = f64::INFINITY;
    let mut worst = Vec::new();
    for k in nonzero_offsets(omega.len(), max_k) {
        let x = dot(&k, omega);
        let dist = (x - x.round()).abs();
        if dist <= 1e-12 * (1.0 + x.abs()) {
            return Err(Error::RationalFrequency { k });
        }
        let g = dist * (sup_abs(&k) as f64).powf(tau);
        if g < best {
            best = g;
            worst = k;
        }
    }
    Ok(DiophantineReport {
        tau,
        gamma_best: best,
        worst_k: worst,
    })
}
