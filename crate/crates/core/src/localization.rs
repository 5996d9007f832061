//! Eigenfunctions, decay certification, completeness and spectrum of a
//! converged run.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::bracket;
use crate::error::{Error, Result};
use crate::iteration::{Mode, SchemeResult};

/// Tolerance added to the spectral distance to absorb eigensolver error.
pub const EIGENSOLVER_TOLERANCE: f64 = 1e-10;

/// `e_k = Q+ delta_k` and its certificates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenReport {
    pub center: Vec<i64>,
    pub eigenvalue: Complex64,
    /// `min_i 2<i-k>^{-p} - |(e_k)_i|`.
    pub decay_envelope_margin: f64,
    /// Smallest `C` with `|(e_k)_i| <= C<i-k>^{-p}` on the box.
    pub envelope_constant: f64,
    /// `|H' e_k - lambda e_k|_2 / |e_k|_2`.
    pub eigen_residual: f64,
    /// `|Q+|_op |R delta_k|_2 / |e_k|_2`.
    pub residual_bound: f64,
    /// Rounding error of forming `H' e_k`, `4 sqrt(n) eps |H'|_op`.
    pub rounding_floor: f64,
    pub interior: bool,
}

impl EigenReport {
    /// `eigen_residual <= residual_bound + rounding_floor`.
    pub fn residual_certified(&self) -> bool {
        self.eigen_residual <= self.residual_bound + self.rounding_floor
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Completeness {
    pub min_singular_value: f64,
    /// `max_{i != j} |(U^t U)_ij|` for real symmetric runs.
    pub gram_offdiag: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumComparison {
    /// `max_{k interior} dist(lambda_k, spec H')`.
    pub hausdorff_interior: f64,
    pub eigenvalue_count: usize,
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Reports for every box site; `interior` marks the ones that count.
/// The envelope exponent is `s - tau - d/2 - 12 delta` from the run's
/// parameters.
pub fn eigenfunctions(result: &SchemeResult) -> Vec<EigenReport> {
    let lattice = result.q_plus.lattice();
    let p = result.params.envelope_exponent(lattice.dimension());
    let h = result.hamiltonian();
    let lambda = result.eigenvalues();
    let q_op = result.q_plus.operator_norm();
    let floor = 4.0 * (lattice.len() as f64).sqrt() * f64::EPSILON * h.operator_norm();
    (0..lattice.len())
        .map(|k| {
            let e = result.q_plus.column(k);
            let he = h.apply(&e);
            let diff: Vec<Complex64> = he.iter().zip(&e).map(|(a, b)| a - lambda[k] * b).collect();
            let e_norm = norm2(&e);
            let rk = result.final_residual.column(k);
            let center = lattice.site(k);
            let mut margin = f64::INFINITY;
            let mut constant = 0.0f64;
            for (i, z) in e.iter().enumerate() {
                let offset: Vec<i64> = lattice.site(i).iter().zip(center).map(|(a, b)| a - b).collect();
                let w = bracket(&offset).powf(p);
                margin = margin.min(2.0 / w - z.norm());
                constant = constant.max(z.norm() * w);
            }
            EigenReport {
                center: center.to_vec(),
                eigenvalue: lambda[k],
                decay_envelope_margin: margin,
                envelope_constant: constant,
                eigen_residual: norm2(&diff) / e_norm,
                residual_bound: q_op * norm2(&rk) / e_norm,
                rounding_floor: floor,
                interior: lattice.is_interior(k),
            }
        })
        .collect()
}

pub fn completeness_check(result: &SchemeResult) -> Completeness {
    Completeness {
        min_singular_value: result.q_plus.min_singular_value(),
        gram_offdiag: result.unitary.as_ref().map(|u| {
            let g = u.u.transpose().mul(&u.u).expect("same box");
            g.max_offdiag_abs()
        }),
    }
}

/// Dense eigenvalues of the real symmetric `H'`, ascending.
pub fn symmetric_spectrum(result: &SchemeResult) -> Result<Vec<f64>> {
    let h = result.hamiltonian();
    if !h.is_real() {
        return Err(Error::NotSymmetric("Hamiltonian has an imaginary part".into()));
    }
    if !h.is_symmetric() {
        return Err(Error::NotSymmetric("Hamiltonian is not symmetric".into()));
    }
    let m: DMatrix<f64> = h.re().clone();
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// One-sided Hausdorff distance from the interior eigenvalue predictions to
/// the spectrum of the truncated `H'`.
pub fn spectrum_compare(result: &SchemeResult) -> Result<SpectrumComparison> {
    let ev = symmetric_spectrum(result)?;
    let lattice = result.q_plus.lattice();
    let lambda = result.eigenvalues();
    let mut dist = 0.0f64;
    for k in lattice.interior_indices() {
        if lambda[k].im != 0.0 {
            return Err(Error::NotSymmetric("complex predicted eigenvalue".into()));
        }
        let x = lambda[k].re;
        let pos = ev.partition_point(|&v| v < x);
        let mut best = f64::INFINITY;
        if pos < ev.len() {
            best = best.min(ev[pos] - x);
        }
        if pos > 0 {
            best = best.min(x - ev[pos - 1]);
        }
        dist = dist.max(best);
    }
    Ok(SpectrumComparison {
        hausdorff_interior: dist,
        eigenvalue_count: ev.len(),
    })
}

/// Localization section of a run report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalizationReport {
    pub mode: Mode,
    pub envelope_exponent: f64,
    pub eigenreports: Vec<EigenReport>,
    pub completeness: Completeness,
    /// `None` for non-symmetric runs.
    pub spectrum: Option<SpectrumComparison>,
    pub max_interior_residual: f64,
    pub min_interior_envelope_margin: f64,
}

pub fn localize(result: &SchemeResult) -> LocalizationReport {
    let eigenreports = eigenfunctions(result);
    let interior = || eigenreports.iter().filter(|r| r.interior);
    let max_interior_residual = interior().map(|r| r.eigen_residual).fold(0.0, f64::max);
    let min_interior_envelope_margin = interior().map(|r| r.decay_envelope_margin).fold(f64::INFINITY, f64::min);
    let spectrum = match spectrum_compare(result) {
        Ok(s) => Some(s),
        Err(e) => {
            log::info!("spectrum comparison skipped: {e}");
            None
        }
    };
    LocalizationReport {
        mode: result.mode,
        envelope_exponent: result.params.envelope_exponent(result.q_plus.lattice().dimension()),
        completeness: completeness_check(result),
        spectrum,
        max_interior_residual,
        min_interior_envelope_margin,
        eigenreports,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{LatticeBox, NormPolicy};
    use crate::iteration::{run, SchemeParams};
    use crate::operator::{DiagonalOperator, LatticeOperator};

    #[test]
    fn free_operator_is_its_own_eigenbasis() {
        let b = LatticeBox::new(1, 4, 2).unwrap();
        let vals: Vec<f64> = (0..b.len()).map(|i| (i as f64 * 0.618).fract()).collect();
        let d = DiagonalOperator::from_real(&b, NormPolicy::Sup, &vals).unwrap();
        let t = LatticeOperator::zeros(&b, NormPolicy::Sup);
        let p = SchemeParams::for_power_law(1, 4.0, 1.0, 0.1, 0.05, 0.6);
        let r = run(&t, &d, &p).unwrap();
        let rep = localize(&r);
        for e in &rep.eigenreports {
            assert_eq!(e.eigen_residual, 0.0);
            assert!(e.decay_envelope_margin > 0.0);
            assert_eq!(e.envelope_constant, 1.0);
        }
        assert_eq!(rep.completeness.min_singular_value, 1.0);
        assert_eq!(rep.spectrum.unwrap().hausdorff_interior, 0.0);
    }
}
