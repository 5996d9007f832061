//! Homological equations of one conjugation step.
//!
//! - [`solve_generator`]: `[D, W] + S_theta G = 0` off the diagonal, solved by
//!   divided differences `W_{ij} = (S_theta G)_{ij} / (d_j - d_i)`.
//! - [`solve_diagonal_correction`]: the diagonal `X` with
//!   `diag(Q^{-1} (X + P) Q + P') = 0`, by Banach iteration of the affine map
//!   `X -> X - diag(Q^{-1}(X + P)Q + P')` with a direct linear solve as oracle.
//! - [`neumann_invert`]: `(I + W)^{-1}` by Neumann series.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{algebra_norm, Sequence};
use crate::error::{Error, Result};
use crate::operator::{DiagonalOperator, LatticeOperator, TameConstants};

/// Smallest admissible divisor `|d_i - d_j|` in [`solve_generator`].
pub const DEFAULT_DIVISOR_FLOOR: f64 = 1e-14;

/// Output of [`solve_generator`].
#[derive(Clone, Debug)]
pub struct HomologicalSolution {
    /// Generator with exactly zero diagonal.
    pub w: LatticeOperator,
    /// `max |([D,W] + S_theta G)_{ij}|` over `i != j`, `|i - j| <= theta`.
    pub residual_offdiag: f64,
    pub smoothing_theta: f64,
    /// `(s, gamma^{-1} |S_theta G|_{s+tau} - |W|_s)` for each requested `s`.
    pub bound_margins: Vec<(f64, f64)>,
}

/// Solves `[D, W] + S_theta G = 0` off the diagonal.
///
/// `G` must have vanishing diagonal up to `1e-8 (1 + max|G|)`.
pub fn solve_generator(
    d: &DiagonalOperator,
    g: &LatticeOperator,
    theta: f64,
    tau: f64,
    gamma: f64,
    s_list: &[f64],
) -> Result<HomologicalSolution> {
    solve_generator_with_floor(d, g, theta, tau, gamma, s_list, DEFAULT_DIVISOR_FLOOR)
}

pub fn solve_generator_with_floor(
    d: &DiagonalOperator,
    g: &LatticeOperator,
    theta: f64,
    tau: f64,
    gamma: f64,
    s_list: &[f64],
    divisor_floor: f64,
) -> Result<HomologicalSolution> {
    let lattice = g.lattice();
    lattice.check_same(d.lattice())?;
    let n = g.dim();
    let scale = 1.0 + g.max_abs();
    let max_diag = (0..n).map(|i| g.get(i, i).norm()).fold(0.0, f64::max);
    let diag_tol = 1e-8 * scale;
    if max_diag > diag_tol {
        return Err(Error::UnreducedDiagonal { max_diag, tol: diag_tol });
    }
    let sg = g.smooth(theta).offdiagonal_part();
    let dv = d.values();
    let mut violation = None;
    let band = band_pairs(g, theta);
    for &(i, j) in &band {
        let div = dv[j] - dv[i];
        if div.norm() < divisor_floor {
            violation = Some((i, j, div.norm()));
            break;
        }
    }
    if let Some((i, j, div)) = violation {
        let offset = lattice.site(i).iter().zip(lattice.site(j)).map(|(a, b)| a - b).collect();
        return Err(Error::DistalViolation {
            site: lattice.site(i).to_vec(),
            offset,
            divisor: div,
        });
    }
    let real = d.is_real() && sg.is_real();
    let w = if real {
        let mut re = DMatrix::zeros(n, n);
        for &(i, j) in &band {
            re[(i, j)] = sg.re()[(i, j)] / (dv[j].re - dv[i].re);
        }
        LatticeOperator::from_real(lattice, g.policy().clone(), re)?
    } else {
        let mut w = LatticeOperator::zeros(lattice, g.policy().clone());
        for &(i, j) in &band {
            w.set(i, j, sg.get(i, j) / (dv[j] - dv[i]));
        }
        w
    };
    let residual_offdiag = band
        .iter()
        .map(|&(i, j)| ((dv[i] - dv[j]) * w.get(i, j) + sg.get(i, j)).norm())
        .fold(0.0, f64::max);
    let shifted: Vec<f64> = s_list.iter().map(|s| s + tau).collect();
    let sg_norms = sg.sobolev_norms(&shifted);
    let w_norms = w.sobolev_norms(s_list);
    let bound_margins = s_list
        .iter()
        .zip(sg_norms.iter().zip(&w_norms))
        .map(|(&s, (a, b))| (s, a / gamma - b))
        .collect();
    Ok(HomologicalSolution {
        w,
        residual_offdiag,
        smoothing_theta: theta,
        bound_margins,
    })
}

/// Off-diagonal index pairs with `|i - j|_inf <= theta`.
fn band_pairs(g: &LatticeOperator, theta: f64) -> Vec<(usize, usize)> {
    let lattice = g.lattice();
    let n = g.dim();
    let mut out = Vec::new();
    for i in 0..n {
        let si = lattice.site(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let m = si.iter().zip(lattice.site(j)).map(|(a, b)| (a - b).abs()).max().unwrap_or(0);
            if (m as f64) <= theta {
                out.push((i, j));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    FixedPoint,
    Direct,
    Neumann,
}

/// Output of [`solve_diagonal_correction`].
#[derive(Clone, Debug)]
pub struct FixedPointSolution {
    pub x: DiagonalOperator,
    pub iterations: usize,
    /// Algebra norm of `diag(Q^{-1}(X + P)Q + P')` at the returned `X`.
    pub final_defect: f64,
    pub method: SolveMethod,
    /// Whether `C0 |Q - I|_{a0} <= 1/10` and `C0 |Q^{-1} - I|_{a0} <= 1/10`.
    pub contraction_holds: bool,
    /// `max |X_fp - X_direct|`.
    pub direct_agreement: f64,
    /// `2(|Q^{-1} P Q|_{a0} + |P'|_{a0}) - |X|_{a0}`.
    pub bound_margin: f64,
    /// `Q^{-1} P Q`, reused by the caller.
    pub conjugated_p: LatticeOperator,
}

/// Diagonal `X` with `diag(Q^{-1}(X + P)Q + P') = 0`.
///
/// The map is affine in `X`: `diag(Q^{-1} X Q)_i = sum_m Q^{-1}_{im} Q_{mi} x_m`.
/// When the contraction condition holds the Banach iteration is run (stopping
/// once the defect is below `tol * max(1, |c|)`, `c` the constant term) and
/// checked against the direct solve; otherwise the direct solve is returned
/// with a warning.
pub fn solve_diagonal_correction(
    q: &LatticeOperator,
    qinv: &LatticeOperator,
    p: &LatticeOperator,
    pprime: &LatticeOperator,
    tc: &TameConstants,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointSolution> {
    let lattice = q.lattice().clone();
    let policy = q.policy().clone();
    let n = q.dim();
    let id = LatticeOperator::identity(&lattice, policy.clone());
    let q_dev = q.sub(&id)?.sobolev_norm(tc.alpha0);
    let qinv_dev = qinv.sub(&id)?.sobolev_norm(tc.alpha0);
    let contraction_holds = tc.c0 * q_dev <= 0.1 && tc.c0 * qinv_dev <= 0.1;

    let conjugated_p = qinv.mul(&p.mul(q)?)?;
    let c: Vec<Complex64> = (0..n).map(|i| conjugated_p.get(i, i) + pprime.get(i, i)).collect();
    let m = |i: usize, k: usize| qinv.get(i, k) * q.get(k, i);
    let real = q.is_real() && qinv.is_real() && c.iter().all(|z| z.im == 0.0);

    let defect_of = |x: &[Complex64]| -> Vec<Complex64> {
        (0..n)
            .map(|i| (0..n).map(|k| m(i, k) * x[k]).sum::<Complex64>() + c[i])
            .collect()
    };
    let seq_norm = |v: Vec<Complex64>| -> Result<f64> {
        algebra_norm(&Sequence::from_values(&lattice, v, policy.clone())?)
    };

    let direct = {
        let solved = if real {
            let a = DMatrix::from_fn(n, n, |i, k| m(i, k).re);
            let rhs = DVector::from_iterator(n, c.iter().map(|z| -z.re));
            a.lu().solve(&rhs).map(|x| x.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>())
        } else {
            let a = DMatrix::from_fn(n, n, m);
            let rhs = DVector::from_iterator(n, c.iter().map(|z| -z));
            a.lu().solve(&rhs).map(|x| x.iter().copied().collect::<Vec<_>>())
        };
        solved.ok_or_else(|| Error::Singular("diagonal correction system".into()))?
    };

    let c_norm = seq_norm(c.clone())?;
    let threshold = tol * c_norm.max(1.0);
    let (x, iterations, method) = if contraction_holds {
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        let mut iterations = 0;
        loop {
            let defect = defect_of(&x);
            let dn = seq_norm(defect.clone())?;
            if dn <= threshold {
                break;
            }
            if iterations == max_iter {
                return Err(Error::FixedPointStalled { iterations, defect: dn });
            }
            for (xi, di) in x.iter_mut().zip(&defect) {
                *xi -= di;
            }
            iterations += 1;
        }
        (x, iterations, SolveMethod::FixedPoint)
    } else {
        log::warn!(
            "contraction condition fails (C0|Q-I| = {:.3e}, C0|Q^-1-I| = {:.3e}); using direct solve",
            tc.c0 * q_dev,
            tc.c0 * qinv_dev
        );
        (direct.clone(), 0, SolveMethod::Direct)
    };
    let direct_agreement = x.iter().zip(&direct).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let final_defect = seq_norm(defect_of(&x))?;
    let xd = DiagonalOperator::from_values(&lattice, policy.clone(), x)?;
    let bound = 2.0 * (conjugated_p.sobolev_norm(tc.alpha0) + pprime.sobolev_norm(tc.alpha0));
    Ok(FixedPointSolution {
        bound_margin: bound - xd.norm(),
        x: xd,
        iterations,
        final_defect,
        method,
        contraction_holds,
        direct_agreement,
        conjugated_p,
    })
}

/// Output of [`neumann_invert`].
#[derive(Clone, Debug)]
pub struct NeumannInverse {
    pub vinv: LatticeOperator,
    pub method: SolveMethod,
    /// Number of series terms summed (0 for the direct route).
    pub terms: usize,
    /// `4 C0^2 |W|_{a0}`.
    pub smallness: f64,
    /// `|(I + W) V^{-1} - I|_0`.
    pub residual: f64,
    /// `max |V^{-1}_series - V^{-1}_direct|`.
    pub direct_agreement: f64,
    /// One-norm condition number of `I + W`, reported for the direct route.
    pub condition_number: Option<f64>,
    /// `(s, 2 K1(s) |W|_s - |V^{-1} - I|_s)`.
    pub bound_margins: Vec<(f64, f64)>,
    /// `2 - |V^{-1}|_{a0}`.
    pub low_margin: f64,
}

/// `(I + W)^{-1}` by Neumann series; requires `4 C0^2 |W|_{a0} <= 1/2`.
pub fn neumann_invert(w: &LatticeOperator, tc: &TameConstants, s_list: &[f64]) -> Result<NeumannInverse> {
    invert_near_identity(w, tc, s_list, false)
}

/// Like [`neumann_invert`], but when the smallness condition fails and
/// `fallback` is set, inverts `I + W` directly and reports its condition number.
pub fn invert_near_identity(w: &LatticeOperator, tc: &TameConstants, s_list: &[f64], fallback: bool) -> Result<NeumannInverse> {
    let lattice = w.lattice();
    let id = LatticeOperator::identity(lattice, w.policy().clone());
    let smallness = 4.0 * tc.c0 * tc.c0 * w.sobolev_norm(tc.alpha0);
    let v = id.add(w)?;
    let direct = v.inverse()?;
    let (vinv, method, terms, condition_number) = if smallness <= 0.5 {
        let mut sum = id.clone();
        let mut term = id.clone();
        let neg_w = w.scale(Complex64::new(-1.0, 0.0));
        let mut terms = 0;
        while terms < 500 {
            term = term.mul(&neg_w)?;
            terms += 1;
            sum = sum.add(&term)?;
            if term.sobolev_norm(0.0) < 1e-14 {
                break;
            }
        }
        (sum, SolveMethod::Neumann, terms, None)
    } else if fallback {
        let cond = v.condition_number_1(&direct);
        log::warn!("Neumann smallness fails ({smallness:.3e}); direct inverse, condition number {cond:.3e}");
        (direct.clone(), SolveMethod::Direct, 0, Some(cond))
    } else {
        return Err(Error::NeumannSmallness { value: smallness });
    };
    let residual = v.mul(&vinv)?.sub(&id)?.sobolev_norm(0.0);
    let direct_agreement = vinv.sub(&direct)?.max_abs();
    let dev = vinv.sub(&id)?;
    let dev_norms = dev.sobolev_norms(s_list);
    let w_norms = w.sobolev_norms(s_list);
    let bound_margins = s_list
        .iter()
        .zip(dev_norms.iter().zip(&w_norms))
        .map(|(&s, (dv, wn))| (s, 2.0 * tc.k1(s) * wn - dv))
        .collect();
    let low_margin = 2.0 - vinv.sobolev_norm(tc.alpha0);
    Ok(NeumannInverse {
        vinv,
        method,
        terms,
        smallness,
        residual,
        direct_agreement,
        condition_number,
        bound_margins,
        low_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{LatticeBox, NormPolicy};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn three_site_generator() {
        let b = LatticeBox::new(1, 1, 1).unwrap();
        let d = DiagonalOperator::from_real(&b, NormPolicy::Sup, &[0.0, 1.0, 3.0]).unwrap();
        let g = LatticeOperator::from_fn(&b, NormPolicy::Sup, |i, j| c(if i == j { 0.0 } else { 1.0 }));
        let sol = solve_generator(&d, &g, 4.0, 1.0, 1.0, &[0.0]).unwrap();
        // sites -1, 0, 1 carry d = 0, 1, 3
        assert_eq!(sol.w.get(1, 0), c(-1.0));
        assert_eq!(sol.w.get(2, 1), c(-0.5));
        assert_eq!(sol.w.get(0, 1), c(1.0));
        for i in 0..3 {
            assert_eq!(sol.w.get(i, i), c(0.0));
        }
        assert_eq!(sol.residual_offdiag, 0.0);
    }

    #[test]
    fn zero_g_gives_zero_w() {
        let b = LatticeBox::new(1, 3, 3).unwrap();
        let d = DiagonalOperator::from_real(&b, NormPolicy::Sup, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let g = LatticeOperator::zeros(&b, NormPolicy::Sup);
        let sol = solve_generator(&d, &g, 2.0, 1.0, 1.0, &[1.0]).unwrap();
        assert_eq!(sol.w.max_abs(), 0.0);
    }

    #[test]
    fn coincident_divisors_rejected() {
        let b = LatticeBox::new(1, 1, 1).unwrap();
        let d = DiagonalOperator::from_real(&b, NormPolicy::Sup, &[0.0, 1.0, 1.0]).unwrap();
        let g = LatticeOperator::from_fn(&b, NormPolicy::Sup, |i, j| c(if i == j { 0.0 } else { 1.0 }));
        assert!(matches!(
            solve_generator(&d, &g, 2.0, 1.0, 1.0, &[]),
            Err(Error::DistalViolation { .. })
        ));
        let g2 = LatticeOperator::identity(&b, NormPolicy::Sup);
        let d2 = DiagonalOperator::from_real(&b, NormPolicy::Sup, &[0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            solve_generator(&d2, &g2, 2.0, 1.0, 1.0, &[]),
            Err(Error::UnreducedDiagonal { .. })
        ));
    }

    #[test]
    fn identity_conjugation_fixed_point() {
        let b = LatticeBox::new(1, 2, 2).unwrap();
        let tc = TameConstants::new(1, 0.6).unwrap();
        let id = LatticeOperator::identity(&b, NormPolicy::Sup);
        let p = LatticeOperator::from_fn(&b, NormPolicy::Sup, |i, j| c((i + 2 * j) as f64 * 0.01));
        let pp = LatticeOperator::from_fn(&b, NormPolicy::Sup, |i, j| c(i as f64 * 0.02 - j as f64 * 0.001));
        let sol = solve_diagonal_correction(&id, &id, &p, &pp, &tc, 1e-12, 200).unwrap();
        assert_eq!(sol.method, SolveMethod::FixedPoint);
        for i in 0..b.len() {
            let expected = -p.get(i, i) - pp.get(i, i);
            assert!((sol.x.values()[i] - expected).norm() < 1e-15);
        }
        let zero = LatticeOperator::zeros(&b, NormPolicy::Sup);
        let sol0 = solve_diagonal_correction(&id, &id, &zero, &zero, &tc, 1e-12, 200).unwrap();
        assert_eq!(sol0.x.norm(), 0.0);
    }

    #[test]
    fn nilpotent_neumann() {
        let b = LatticeBox::new(1, 2, 2).unwrap();
        let tc = TameConstants::new(1, 0.6).unwrap();
        let mut w = LatticeOperator::zeros(&b, NormPolicy::Sup);
        w.set(0, 3, c(1e-5));
        let inv = neumann_invert(&w, &tc, &[0.6, 2.0]).unwrap();
        let expected = LatticeOperator::identity(&b, NormPolicy::Sup).sub(&w).unwrap();
        assert_eq!(inv.vinv, expected);
        assert!(inv.bound_margins.iter().all(|(_, m)| *m >= 0.0));
        let zero = LatticeOperator::zeros(&b, NormPolicy::Sup);
        let inv0 = neumann_invert(&zero, &tc, &[]).unwrap();
        assert_eq!(inv0.vinv, LatticeOperator::identity(&b, NormPolicy::Sup));
        let big = LatticeOperator::single_diagonal(&b, NormPolicy::Sup, &[1], c(0.3));
        assert!(matches!(neumann_invert(&big, &tc, &[]), Err(Error::NeumannSmallness { .. })));
        let fb = invert_near_identity(&big, &tc, &[], true).unwrap();
        assert_eq!(fb.method, SolveMethod::Direct);
        assert!(fb.residual < 1e-14);
    }
}
