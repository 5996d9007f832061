use serde::Serialize;

use super::LatticeOperator;
use crate::error::{Error, Result};
use crate::zeta::lattice_sum;

/// Constants of the tame product estimate
/// `|XY|_s <= K0 |X|_{a0} |Y|_s + K1(s) |X|_s |Y|_{a0}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TameConstants {
    pub dimension: usize,
    pub alpha0: f64,
    /// `sum_{k in Z^d} <k>^{-2 alpha0}`, evaluated through zeta values.
    pub lattice_sum: f64,
    /// `sqrt(20 * lattice_sum)`.
    pub k0: f64,
    /// `K0 + K1(alpha0)`.
    pub c0: f64,
}

impl TameConstants {
    pub fn new(dimension: usize, alpha0: f64) -> Result<Self> {
        let sum = lattice_sum(dimension, alpha0)?;
        let k0 = (20.0 * sum).sqrt();
        let mut tc = Self {
            dimension,
            alpha0,
            lattice_sum: sum,
            k0,
            c0: 0.0,
        };
        tc.c0 = k0 + tc.k1(alpha0);
        Ok(tc)
    }

    /// `K1(s) = (1 - 10^{-1/(2s)})^{-s} sqrt(2 * lattice_sum)`.
    pub fn k1(&self, s: f64) -> f64 {
        (1.0 - 10f64.powf(-0.5 / s)).powf(-s) * (2.0 * self.lattice_sum).sqrt()
    }
}

/// `K0 |X|_{a0} |Y|_s + K1(s) |X|_s |Y|_{a0} - |XY|_s`; nonnegative when the
/// tame estimate holds.
pub fn tame_bound_check(x: &LatticeOperator, y: &LatticeOperator, s: f64, tc: &TameConstants) -> Result<f64> {
    if s < tc.alpha0 {
        return Err(Error::TameRange { s, alpha0: tc.alpha0 });
    }
    let xy = x.mul(y)?;
    let xs = x.sobolev_norms(&[tc.alpha0, s]);
    let ys = y.sobolev_norms(&[tc.alpha0, s]);
    let bound = tc.k0 * xs[0] * ys[1] + tc.k1(s) * xs[1] * ys[0];
    Ok(bound - xy.sobolev_norm(s))
}

/// Margins of the product-chain bounds for `X_1 ... X_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainMargins {
    /// `C0^{n-1} prod |X_i|_{a0} - |prod X_i|_{a0}`.
    pub low: f64,
    /// `n C0^n K1(s) sum_i (prod_{j != i} |X_j|_{a0}) |X_i|_s - |prod X_i|_s`.
    pub high: f64,
}

pub fn tame_chain_margins(ops: &[LatticeOperator], s: f64, tc: &TameConstants) -> Result<ChainMargins> {
    if s < tc.alpha0 {
        return Err(Error::TameRange { s, alpha0: tc.alpha0 });
    }
    let (first, rest) = ops
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("empty product chain".into()))?;
    let mut prod = first.clone();
    for op in rest {
        prod = prod.mul(op)?;
    }
    let n = ops.len();
    let norms: Vec<Vec<f64>> = ops.iter().map(|x| x.sobolev_norms(&[tc.alpha0, s])).collect();
    let p = prod.sobolev_norms(&[tc.alpha0, s]);
    let low_bound = tc.c0.powi(n as i32 - 1) * norms.iter().map(|v| v[0]).product::<f64>();
    let mixed: f64 = (0..n)
        .map(|i| {
            let others: f64 = (0..n).filter(|&j| j != i).map(|j| norms[j][0]).product();
            others * norms[i][1]
        })
        .sum();
    let high_bound = n as f64 * tc.c0.powi(n as i32) * tc.k1(s) * mixed;
    Ok(ChainMargins {
        low: low_bound - p[0],
        high: high_bound - p[1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{LatticeBox, NormPolicy};

    #[test]
    fn constants_for_alpha_point_six() {
        let tc = TameConstants::new(1, 0.6).unwrap();
        assert!((tc.lattice_sum - (1.0 + 2.0 * 5.591_582_441_177_75)).abs() < 1e-12);
        assert!((tc.k0 - (20.0 * tc.lattice_sum).sqrt()).abs() < 1e-12);
        assert!((tc.c0 - tc.k0 - tc.k1(0.6)).abs() < 1e-12);
    }

    #[test]
    fn identity_margin() {
        let b = LatticeBox::new(1, 4, 4).unwrap();
        let tc = TameConstants::new(1, 0.6).unwrap();
        let id = LatticeOperator::identity(&b, NormPolicy::Sup);
        let m = tame_bound_check(&id, &id, 2.0, &tc).unwrap();
        assert!((m - (tc.k0 + tc.k1(2.0) - 1.0)).abs() < 1e-12);
        assert!(matches!(tame_bound_check(&id, &id, 0.5, &tc), Err(Error::TameRange { .. })));
    }
}
