//! Dense lattice operators viewed through their diagonals.
//!
//! For an operator `A` over a box, the `k`-diagonal is the sequence
//! `A_k(i) = A_{i,i-k}`, defined where `i - k` lies in the box. The Sobolev
//! norm is
//!
//! ```text
//! |A|_s = sqrt( sum_k |A_k|^2 <k>^{2s} ),   <k> = max(1, |k|_inf)
//! ```
//!
//! with `|A_k|` the algebra norm of the diagonal over its valid entries.
//!
//! Storage is a real matrix plus an optional imaginary part, so that real
//! symmetric problems run entirely on the real fast path.

mod snapshot;
mod tame;

pub use snapshot::{OperatorSnapshot, SNAPSHOT_MAGIC};
pub use tame::{tame_bound_check, tame_chain_margins, ChainMargins, TameConstants};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{LatticeBox, NormPolicy, Sequence};
use crate::error::{Error, Result};

/// Dense complex operator over a lattice box.
#[derive(Clone, Debug)]
pub struct LatticeOperator {
    lattice: LatticeBox,
    policy: NormPolicy,
    re: DMatrix<f64>,
    im: Option<DMatrix<f64>>,
}

impl PartialEq for LatticeOperator {
    fn eq(&self, other: &Self) -> bool {
        self.lattice == other.lattice
            && self.re == other.re
            && match (&self.im, &other.im) {
                (None, None) => true,
                (Some(a), None) | (None, Some(a)) => a.iter().all(|&x| x == 0.0),
                (Some(a), Some(b)) => a == b,
            }
    }
}

impl LatticeOperator {
    pub fn zeros(lattice: &LatticeBox, policy: NormPolicy) -> Self {
        let n = lattice.len();
        Self {
            lattice: lattice.clone(),
            policy,
            re: DMatrix::zeros(n, n),
            im: None,
        }
    }

    pub fn identity(lattice: &LatticeBox, policy: NormPolicy) -> Self {
        let n = lattice.len();
        Self {
            lattice: lattice.clone(),
            policy,
            re: DMatrix::identity(n, n),
            im: None,
        }
    }

    pub fn from_real(lattice: &LatticeBox, policy: NormPolicy, re: DMatrix<f64>) -> Result<Self> {
        let n = lattice.len();
        if re.shape() != (n, n) {
            return Err(Error::BoxMismatch(format!("matrix {:?} for {n} sites", re.shape())));
        }
        Ok(Self {
            lattice: lattice.clone(),
            policy,
            re,
            im: None,
        })
    }

    pub fn from_parts(lattice: &LatticeBox, policy: NormPolicy, re: DMatrix<f64>, im: Option<DMatrix<f64>>) -> Result<Self> {
        let mut op = Self::from_real(lattice, policy, re)?;
        if let Some(im) = im {
            if im.shape() != op.re.shape() {
                return Err(Error::BoxMismatch("imaginary part shape".into()));
            }
            op.im = Some(im);
            op.compact();
        }
        Ok(op)
    }

    pub fn from_complex(lattice: &LatticeBox, policy: NormPolicy, m: &DMatrix<Complex64>) -> Result<Self> {
        Self::from_parts(lattice, policy, m.map(|z| z.re), Some(m.map(|z| z.im)))
    }

    /// Entries `A_{i,j} = f(i, j)` by site index.
    pub fn from_fn(lattice: &LatticeBox, policy: NormPolicy, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let n = lattice.len();
        let mut re = DMatrix::zeros(n, n);
        let mut im = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                let z = f(i, j);
                re[(i, j)] = z.re;
                im[(i, j)] = z.im;
            }
        }
        let mut op = Self {
            lattice: lattice.clone(),
            policy,
            re,
            im: Some(im),
        };
        op.compact();
        op
    }

    /// Operator whose only nonzero diagonal is `k`, filled with `value`.
    pub fn single_diagonal(lattice: &LatticeBox, policy: NormPolicy, k: &[i64], value: Complex64) -> Self {
        let mut op = Self::zeros(lattice, policy);
        for i in 0..lattice.len() {
            if let Some(j) = lattice.shifted(i, k) {
                op.set(i, j, value);
            }
        }
        op
    }

    /// Shift `(S u)_i = u_{i-k}` truncated to the box.
    pub fn shift(lattice: &LatticeBox, policy: NormPolicy, k: &[i64]) -> Self {
        Self::single_diagonal(lattice, policy, k, Complex64::new(1.0, 0.0))
    }

    fn compact(&mut self) {
        if self.im.as_ref().is_some_and(|m| m.iter().all(|&x| x == 0.0)) {
            self.im = None;
        }
    }

    pub fn lattice(&self) -> &LatticeBox {
        &self.lattice
    }

    pub fn policy(&self) -> &NormPolicy {
        &self.policy
    }

    pub fn with_policy(mut self, policy: NormPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn dim(&self) -> usize {
        self.re.nrows()
    }

    /// True when no imaginary part is stored.
    pub fn is_real(&self) -> bool {
        self.im.is_none()
    }

    pub fn re(&self) -> &DMatrix<f64> {
        &self.re
    }

    pub fn im(&self) -> Option<&DMatrix<f64>> {
        self.im.as_ref()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[(i, j)], self.im.as_ref().map_or(0.0, |m| m[(i, j)]))
    }

    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.re[(i, j)] = z.re;
        if z.im != 0.0 || self.im.is_some() {
            let n = self.dim();
            self.im.get_or_insert_with(|| DMatrix::zeros(n, n))[(i, j)] = z.im;
        }
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        match &self.im {
            None => self.re.map(|x| Complex64::new(x, 0.0)),
            Some(im) => self.re.zip_map(im, Complex64::new),
        }
    }

    fn same_box(&self, other: &Self) -> Result<()> {
        self.lattice.check_same(&other.lattice)
    }

    fn zip_im(a: &Option<DMatrix<f64>>, b: &Option<DMatrix<f64>>, sign: f64) -> Option<DMatrix<f64>> {
        match (a, b) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b * sign),
            (Some(a), Some(b)) => Some(a + b * sign),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_box(other)?;
        let mut out = Self {
            lattice: self.lattice.clone(),
            policy: self.policy.clone(),
            re: &self.re + &other.re,
            im: Self::zip_im(&self.im, &other.im, 1.0),
        };
        out.compact();
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_box(other)?;
        let mut out = Self {
            lattice: self.lattice.clone(),
            policy: self.policy.clone(),
            re: &self.re - &other.re,
            im: Self::zip_im(&self.im, &other.im, -1.0),
        };
        out.compact();
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let (re, im) = match &self.im {
            None if c.im == 0.0 => (&self.re * c.re, None),
            None => (&self.re * c.re, Some(&self.re * c.im)),
            Some(im) => (&self.re * c.re - im * c.im, Some(&self.re * c.im + im * c.re)),
        };
        let mut out = Self {
            lattice: self.lattice.clone(),
            policy: self.policy.clone(),
            re,
            im,
        };
        out.compact();
        out
    }

    /// Box-truncated matrix product `self * other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_box(other)?;
        let (re, im) = match (&self.im, &other.im) {
            (None, None) => (&self.re * &other.re, None),
            (Some(a), None) => (&self.re * &other.re, Some(a * &other.re)),
            (None, Some(b)) => (&self.re * &other.re, Some(&self.re * b)),
            (Some(a), Some(b)) => {
                let mut re = &self.re * &other.re;
                re -= a * b;
                let mut im = &self.re * b;
                im += a * &other.re;
                (re, Some(im))
            }
        };
        let mut out = Self {
            lattice: self.lattice.clone(),
            policy: self.policy.clone(),
            re,
            im,
        };
        out.compact();
        Ok(out)
    }

    /// Plain (not conjugate) transpose.
    pub fn transpose(&self) -> Self {
        Self {
            lattice: self.lattice.clone(),
            policy: self.policy.clone(),
            re: self.re.transpose(),
            im: self.im.as_ref().map(|m| m.transpose()),
        }
    }

    pub fn diagonal_part(&self) -> DiagonalOperator {
        let values = (0..self.dim()).map(|i| self.get(i, i)).collect();
        DiagonalOperator::from_values(&self.lattice, self.policy.clone(), values)
            .expect("diagonal length matches box")
    }

    /// `A - diag(A)`.
    pub fn offdiagonal_part(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim() {
            out.re[(i, i)] = 0.0;
            if let Some(im) = out.im.as_mut() {
                im[(i, i)] = 0.0;
            }
        }
        out.compact();
        out
    }

    /// The `k`-diagonal `A_k(i) = A_{i,i-k}`; entries with `i - k` off the box
    /// are absent.
    pub fn diagonal(&self, k: &[i64]) -> Sequence {
        let values = (0..self.dim())
            .map(|i| self.lattice.shifted(i, k).map(|j| self.get(i, j)))
            .collect();
        Sequence::from_partial(&self.lattice, values, self.policy.clone())
    }

    /// Smoothing `S_theta`: keeps entries with `|i - j|_inf <= theta`.
    pub fn smooth(&self, theta: f64) -> Self {
        self.band(|m| (m as f64) <= theta)
    }

    /// `(I - S_theta) A`.
    pub fn smooth_complement(&self, theta: f64) -> Self {
        self.band(|m| (m as f64) > theta)
    }

    /// Keeps entries whose offset sup-norm satisfies `keep`.
    pub fn band(&self, keep: impl Fn(u32) -> bool) -> Self {
        let table = self.lattice.offset_table();
        let n = self.dim();
        let mut out = self.clone();
        for j in 0..n {
            for i in 0..n {
                let o = table.pair_offset[i * n + j] as usize;
                if !keep(table.offset_abs[o]) {
                    out.re[(i, j)] = 0.0;
                    if let Some(im) = out.im.as_mut() {
                        im[(i, j)] = 0.0;
                    }
                }
            }
        }
        out.compact();
        out
    }

    /// `[D, A] = D A - A D`, entrywise `(d_i - d_j) A_{i,j}`.
    pub fn commutator_with_diagonal(&self, d: &DiagonalOperator) -> Result<Self> {
        self.same_box(&d.to_operator())?;
        let dv = d.values();
        Ok(Self::from_fn(&self.lattice, self.policy.clone(), |i, j| (dv[i] - dv[j]) * self.get(i, j)))
    }

    /// `D A` for diagonal `D`.
    pub fn left_diagonal_mul(&self, d: &DiagonalOperator) -> Self {
        let dv = d.values();
        Self::from_fn(&self.lattice, self.policy.clone(), |i, j| dv[i] * self.get(i, j))
    }

    /// `A D` for diagonal `D`.
    pub fn right_diagonal_mul(&self, d: &DiagonalOperator) -> Self {
        let dv = d.values();
        Self::from_fn(&self.lattice, self.policy.clone(), |i, j| self.get(i, j) * dv[j])
    }

    /// Sobolev norm `|A|_s`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.sobolev_norms(&[s])[0]
    }

    /// Sobolev norms at several indices from a single pass over the entries.
    pub fn sobolev_norms(&self, s_list: &[f64]) -> Vec<f64> {
        let terms = self.diagonal_norms();
        s_list
            .iter()
            .map(|&s| {
                terms
                    .iter()
                    .map(|&(m, a)| a * a * (m.max(1) as f64).powf(2.0 * s))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// `(|k|_inf, |A_k|)` for every offset with at least one valid entry, in
    /// offset-index order.
    pub fn diagonal_norms(&self) -> Vec<(u32, f64)> {
        let table = self.lattice.offset_table();
        let n = self.dim();
        match self.policy.phase_order(&self.lattice) {
            None => {
                let mut sup = vec![-1.0f64; table.count];
                for i in 0..n {
                    let row = &table.pair_offset[i * n..(i + 1) * n];
                    for (j, &o) in row.iter().enumerate() {
                        let v = self.get(i, j).norm();
                        let slot = &mut sup[o as usize];
                        if v > *slot {
                            *slot = v;
                        }
                    }
                }
                sup.into_iter()
                    .enumerate()
                    .filter(|(_, v)| *v >= 0.0)
                    .map(|(o, v)| (table.offset_abs[o], v))
                    .collect()
            }
            Some(order) => {
                // per offset: sup, tv, first, prev
                let mut acc: Vec<Option<(f64, f64, Complex64, Complex64)>> = vec![None; table.count];
                for &i in &order {
                    let row = &table.pair_offset[i * n..(i + 1) * n];
                    for (j, &o) in row.iter().enumerate() {
                        let z = self.get(i, j);
                        acc[o as usize] = Some(match acc[o as usize] {
                            None => (z.norm(), 0.0, z, z),
                            Some((sup, tv, first, prev)) => (sup.max(z.norm()), tv + (z - prev).norm(), first, z),
                        });
                    }
                }
                acc.into_iter()
                    .enumerate()
                    .filter_map(|(o, a)| a.map(|(sup, tv, first, prev)| (table.offset_abs[o], sup + tv + (first - prev).norm())))
                    .collect()
            }
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        let r = self.re.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        match &self.im {
            None => r,
            Some(im) => self.re.iter().zip(im.iter()).fold(r, |m, (a, b)| m.max(a.hypot(*b))),
        }
    }

    /// Largest off-diagonal entry modulus.
    pub fn max_offdiag_abs(&self) -> f64 {
        self.offdiagonal_part().max_abs()
    }

    /// Largest modulus among off-diagonal entries with `|i - j|_inf <= theta`.
    pub fn max_offdiag_within(&self, theta: f64) -> f64 {
        self.offdiagonal_part().smooth(theta).max_abs()
    }

    /// Spectral norm (largest singular value).
    pub fn operator_norm(&self) -> f64 {
        match &self.im {
            None => self.re.clone().singular_values().max(),
            Some(_) => self.to_complex().singular_values().max(),
        }
    }

    /// Smallest singular value.
    pub fn min_singular_value(&self) -> f64 {
        match &self.im {
            None => self.re.clone().singular_values().min(),
            Some(_) => self.to_complex().singular_values().min(),
        }
    }

    /// Matrix inverse by LU factorisation.
    pub fn inverse(&self) -> Result<Self> {
        let singular = || Error::Singular("LU factorisation found a zero pivot".into());
        match &self.im {
            None => {
                let inv = self.re.clone().try_inverse().ok_or_else(singular)?;
                Self::from_real(&self.lattice, self.policy.clone(), inv)
            }
            Some(_) => {
                let inv = self.to_complex().try_inverse().ok_or_else(singular)?;
                Self::from_complex(&self.lattice, self.policy.clone(), &inv)
            }
        }
    }

    /// One-norm condition number estimate `|A|_1 |A^{-1}|_1`.
    pub fn condition_number_1(&self, inverse: &Self) -> f64 {
        fn one_norm(a: &LatticeOperator) -> f64 {
            (0..a.dim())
                .map(|j| (0..a.dim()).map(|i| a.get(i, j).norm()).sum::<f64>())
                .fold(0.0, f64::max)
        }
        one_norm(self) * one_norm(inverse)
    }

    /// Apply to a vector.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.get(i, j)).collect()
    }

    /// True if `A = A^t` exactly.
    pub fn is_symmetric(&self) -> bool {
        self.re == self.re.transpose() && self.im.as_ref().is_none_or(|m| *m == m.transpose())
    }
}

/// Main-diagonal-only operator.
#[derive(Clone, Debug)]
pub struct DiagonalOperator {
    diag: Sequence,
    dense: Vec<Complex64>,
}

impl DiagonalOperator {
    pub fn from_sequence(diag: Sequence) -> Self {
        let dense = diag.to_dense();
        Self { diag, dense }
    }

    pub fn from_values(lattice: &LatticeBox, policy: NormPolicy, values: Vec<Complex64>) -> Result<Self> {
        Ok(Self::from_sequence(Sequence::from_values(lattice, values, policy)?))
    }

    pub fn from_real(lattice: &LatticeBox, policy: NormPolicy, values: &[f64]) -> Result<Self> {
        Self::from_values(lattice, policy, values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zeros(lattice: &LatticeBox, policy: NormPolicy) -> Self {
        Self::from_values(lattice, policy, vec![Complex64::new(0.0, 0.0); lattice.len()]).expect("length")
    }

    pub fn identity(lattice: &LatticeBox, policy: NormPolicy) -> Self {
        Self::from_values(lattice, policy, vec![Complex64::new(1.0, 0.0); lattice.len()]).expect("length")
    }

    pub fn lattice(&self) -> &LatticeBox {
        self.diag.lattice()
    }

    pub fn policy(&self) -> &NormPolicy {
        self.diag.policy()
    }

    pub fn sequence(&self) -> &Sequence {
        &self.diag
    }

    pub fn values(&self) -> &[Complex64] {
        &self.dense
    }

    pub fn is_real(&self) -> bool {
        self.dense.iter().all(|z| z.im == 0.0)
    }

    pub fn to_operator(&self) -> LatticeOperator {
        let n = self.dense.len();
        let re = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, self.dense.iter().map(|z| z.re)));
        let im = if self.is_real() {
            None
        } else {
            Some(DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, self.dense.iter().map(|z| z.im))))
        };
        LatticeOperator::from_parts(self.lattice(), self.policy().clone(), re, im).expect("shape")
    }

    /// Algebra norm of the diagonal; equals `|D|_s` for every `s`.
    pub fn norm(&self) -> f64 {
        crate::algebra::algebra_norm(&self.diag).unwrap_or(0.0)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self::from_sequence(self.diag.add(&other.diag)?))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self::from_sequence(self.diag.sub(&other.diag)?))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let values = self.dense.iter().map(|z| z * c).collect();
        Self::from_values(self.lattice(), self.policy().clone(), values).expect("length")
    }
}

/// Product computed diagonal by diagonal:
/// `Z_k(i) = sum_j X_j(i) (sigma_j Y_{k-j})(i)`.
///
/// Cubic in the number of sites; an independent route to [`LatticeOperator::mul`].
pub fn diagonal_form_product(x: &LatticeOperator, y: &LatticeOperator) -> Result<LatticeOperator> {
    x.same_box(y)?;
    let lattice = x.lattice().clone();
    let n = lattice.len();
    let offsets = lattice.nonzero_offsets(lattice.max_offset());
    let mut all = vec![vec![0i64; lattice.dimension()]];
    all.extend(offsets);
    let mut z = LatticeOperator::zeros(&lattice, x.policy().clone());
    for i in 0..n {
        for k in &all {
            let Some(col) = lattice.shifted(i, k) else { continue };
            let mut acc = Complex64::new(0.0, 0.0);
            for j in &all {
                // X_j(i) = X_{i,i-j};  (sigma_j Y_{k-j})(i) = Y_{k-j}(i-j) = Y_{i-j, i-k}
                let Some(mid) = lattice.shifted(i, j) else { continue };
                acc += x.get(i, mid) * y.get(mid, col);
            }
            z.set(i, col, acc);
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn b1(n: usize) -> LatticeBox {
        LatticeBox::new(1, n, n).unwrap()
    }

    #[test]
    fn identity_has_unit_norm_everywhere() {
        let b = b1(5);
        let id = LatticeOperator::identity(&b, NormPolicy::Sup);
        for s in [0.0, 0.6, 3.0] {
            assert_eq!(id.sobolev_norm(s), 1.0);
        }
    }

    #[test]
    fn single_diagonal_norm() {
        let b = b1(6);
        let a = LatticeOperator::single_diagonal(&b, NormPolicy::Sup, &[3], c(-0.5));
        assert!((a.sobolev_norm(2.0) - 0.5 * 9.0).abs() < 1e-15);
        let b2 = LatticeBox::new(2, 3, 3).unwrap();
        let a2 = LatticeOperator::single_diagonal(&b2, NormPolicy::Sup, &[-2, 1], c(2.0));
        assert!((a2.sobolev_norm(1.5) - 2.0 * 2f64.powf(1.5)).abs() < 1e-14);
    }

    #[test]
    fn smoothing_examples() {
        let b = b1(4);
        let mut a = LatticeOperator::identity(&b, NormPolicy::Sup);
        a = a.add(&LatticeOperator::shift(&b, NormPolicy::Sup, &[1])).unwrap();
        a = a.add(&LatticeOperator::shift(&b, NormPolicy::Sup, &[3])).unwrap();
        let s = a.smooth(2.0);
        assert_eq!(s.diagonal(&[3]).sup(), Some(0.0));
        assert_eq!(s.diagonal(&[1]).sup(), Some(1.0));
        assert_eq!(a.smooth(8.0), a);
        assert_eq!(a.smooth(0.5), LatticeOperator::identity(&b, NormPolicy::Sup));
    }

    #[test]
    fn shift_products_and_transpose() {
        let b = b1(5);
        let s1 = LatticeOperator::shift(&b, NormPolicy::Sup, &[1]);
        let s2 = LatticeOperator::shift(&b, NormPolicy::Sup, &[2]);
        assert_eq!(s1.mul(&s1).unwrap(), s2);
        assert_eq!(s1.transpose(), LatticeOperator::shift(&b, NormPolicy::Sup, &[-1]));
        let id = LatticeOperator::identity(&b, NormPolicy::Sup);
        assert_eq!(s1.mul(&id).unwrap(), s1);
    }

    #[test]
    fn diagonal_parts() {
        let b = b1(3);
        let id = LatticeOperator::identity(&b, NormPolicy::Sup);
        assert_eq!(id.diagonal_part().to_operator(), id);
        let s = LatticeOperator::shift(&b, NormPolicy::Sup, &[1]);
        assert_eq!(s.diagonal_part().norm(), 0.0);
    }

    #[test]
    fn complex_product_matches_dense() {
        let b = b1(2);
        let x = LatticeOperator::from_fn(&b, NormPolicy::Sup, |i, j| Complex64::new(i as f64 - j as f64, (i * j) as f64 * 0.3));
        let y = LatticeOperator::from_fn(&b, NormPolicy::Sup, |i, j| Complex64::new((i + 2 * j) as f64, -(j as f64)));
        let z = x.mul(&y).unwrap().to_complex();
        let reference = x.to_complex() * y.to_complex();
        assert!((z - reference).iter().all(|e| e.norm() < 1e-12));
    }

    #[test]
    fn commutator_matches_products() {
        let b = b1(3);
        let d = DiagonalOperator::from_real(&b, NormPolicy::Sup, &[0.0, 1.0, 3.0, -2.0, 0.5, 7.0, 1.5]).unwrap();
        let a = LatticeOperator::from_fn(&b, NormPolicy::Sup, |i, j| c((i * 7 + j) as f64));
        let lhs = a.commutator_with_diagonal(&d).unwrap();
        let dop = d.to_operator();
        let rhs = dop.mul(&a).unwrap().sub(&a.mul(&dop).unwrap()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn bv_norm_of_constant_diagonal_is_sup() {
        let b = b1(6);
        let p = NormPolicy::sampled_bv(vec![0.618_033_988_749_895]);
        let a = LatticeOperator::single_diagonal(&b, p, &[2], c(0.25));
        assert!((a.sobolev_norm(1.0) - 0.5).abs() < 1e-15);
    }
}
