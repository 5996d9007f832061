use num_complex::Complex64;

use super::SchemeResult;
use crate::error::{Error, Result};
use crate::operator::{DiagonalOperator, LatticeOperator};

/// Largest admissible off-diagonal entry of `Q+^t Q+`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;
/// Largest admissible `|U^t U - I|_0`.
pub const UNITARITY_TOLERANCE: f64 = 1e-9;

/// Orthogonal conjugation recovered from a real symmetric run.
#[derive(Clone, Debug)]
pub struct Unitarization {
    pub u: LatticeOperator,
    /// `max_{i != j} |(Q+^t Q+)_ij|`.
    pub gram_offdiag: f64,
    /// `|U^t U - I|_0`.
    pub unitarity_defect: f64,
    /// `|U^t H' U - Lambda - R|_0` with `Lambda` the conjugated diagonal.
    pub replay_defect: f64,
}

/// `U = Q+ diag(P_ii^{-1/2})` with `P = Q+^t Q+`, valid when the Hamiltonian
/// is real symmetric so that the columns of `Q+` are nearly orthogonal.
pub fn unitarize(result: &SchemeResult) -> Result<Unitarization> {
    let q = &result.q_plus;
    if !q.is_real() {
        return Err(Error::NotSymmetric("conjugation has an imaginary part".into()));
    }
    let h = result.hamiltonian();
    if !h.is_real() || !h.is_symmetric() {
        return Err(Error::NotSymmetric("Hamiltonian is not real symmetric".into()));
    }
    let p = q.transpose().mul(q)?;
    let gram_offdiag = p.max_offdiag_abs();
    if gram_offdiag > SYMMETRY_TOLERANCE {
        return Err(Error::SymmetryDefect {
            offdiag: gram_offdiag,
            tol: SYMMETRY_TOLERANCE,
        });
    }
    let scale: Vec<f64> = (0..p.dim()).map(|i| p.get(i, i).re).collect();
    if let Some(i) = scale.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::Singular(format!("column {i} of Q+ has vanishing norm")));
    }
    let norm = DiagonalOperator::from_real(q.lattice(), q.policy().clone(), &scale.iter().map(|x| x.powf(-0.5)).collect::<Vec<_>>())?;
    let u = q.right_diagonal_mul(&norm);
    let id = LatticeOperator::identity(q.lattice(), q.policy().clone());
    let unitarity_defect = u.transpose().mul(&u)?.sub(&id)?.sobolev_norm(0.0);
    if unitarity_defect > UNITARITY_TOLERANCE {
        return Err(Error::SymmetryDefect {
            offdiag: unitarity_defect,
            tol: UNITARITY_TOLERANCE,
        });
    }
    let lambda = DiagonalOperator::from_values(q.lattice(), q.policy().clone(), result.eigenvalues())?;
    let replay = u.transpose().mul(&h.mul(&u)?)?.sub(&lambda.to_operator())?;
    let replay_defect = replay.sub(&rescaled_residual(result, &scale)?)?.sobolev_norm(0.0);
    Ok(Unitarization {
        u,
        gram_offdiag,
        unitarity_defect,
        replay_defect,
    })
}

/// `diag(p)^{1/2} R diag(p)^{-1/2}`, the remainder seen through `U`.
fn rescaled_residual(result: &SchemeResult, p: &[f64]) -> Result<LatticeOperator> {
    let r = &result.final_residual;
    let lat = r.lattice();
    let up = DiagonalOperator::from_real(lat, r.policy().clone(), &p.iter().map(|x| x.sqrt()).collect::<Vec<_>>())?;
    let down = DiagonalOperator::from_values(lat, r.policy().clone(), p.iter().map(|x| Complex64::new(x.powf(-0.5), 0.0)).collect())?;
    Ok(r.left_diagonal_mul(&up).right_diagonal_mul(&down))
}
