//! Finite lattice boxes, coefficient sequences and their translation-invariant
//! algebra norms.
//!
//! A [`LatticeBox`] is the cube `{i in Z^d : |i|_inf <= N}` together with an
//! interior window `|i|_inf <= M` used for boundary-insensitive measurements.
//! A [`Sequence`] assigns a complex value to each site of a box. Entries can be
//! *absent*: translating a stored sequence moves some preimages off the box,
//! and those entries are excluded from every norm instead of being zero-filled.
//! Formula-backed sequences never have absent entries because translation
//! re-evaluates the generating formula.
//!
//! Two norm policies are provided:
//!
//! - [`NormPolicy::Sup`]: `sup_i |a_i|`, a translation invariant Banach algebra
//!   norm with `|1| = 1`.
//! - [`NormPolicy::SampledBv`]: `sup_i |a_i|` plus the total variation of the
//!   generating function `f(i . omega) = a_i` sampled at the phases
//!   `i . omega mod 1` of the present sites, taken around the circle.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Formula evaluated at an arbitrary lattice site.
pub type SiteFn = Arc<dyn Fn(&[i64]) -> Complex64 + Send + Sync>;

#[derive(Debug)]
struct Geometry {
    dimension: usize,
    radius: i64,
    interior_radius: i64,
    /// Site coordinates, flattened `len * dimension`.
    coords: Vec<i64>,
    offsets: OnceLock<OffsetTable>,
}

/// Offset bookkeeping for the dense operator layer: for every ordered pair of
/// sites `(i, j)` the index of the offset `k = i - j` in the cube of radius
/// `2N`, and the sup-norm `|k|` of each offset.
#[derive(Debug)]
pub(crate) struct OffsetTable {
    pub(crate) pair_offset: Vec<u32>,
    pub(crate) offset_abs: Vec<u32>,
    pub(crate) count: usize,
}

/// Finite truncation of `Z^d`: all sites with `|i|_inf <= radius`, enumerated in
/// lexicographic order (last coordinate fastest).
#[derive(Clone)]
pub struct LatticeBox {
    geom: Arc<Geometry>,
}

impl fmt::Debug for LatticeBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeBox")
            .field("dimension", &self.geom.dimension)
            .field("radius", &self.geom.radius)
            .field("interior_radius", &self.geom.interior_radius)
            .finish()
    }
}

impl PartialEq for LatticeBox {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.geom, &other.geom)
            || (self.geom.dimension == other.geom.dimension
                && self.geom.radius == other.geom.radius
                && self.geom.interior_radius == other.geom.interior_radius)
    }
}

impl LatticeBox {
    pub fn new(dimension: usize, radius: usize, interior_radius: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidBox("dimension must be positive".into()));
        }
        if radius == 0 {
            return Err(Error::InvalidBox("radius must be positive".into()));
        }
        if interior_radius == 0 || interior_radius > radius {
            return Err(Error::InvalidBox(format!(
                "interior radius {interior_radius} must lie in 1..={radius}"
            )));
        }
        let side = 2 * radius + 1;
        let len = side
            .checked_pow(dimension as u32)
            .filter(|&n| n <= 1 << 24)
            .ok_or_else(|| Error::InvalidBox("box too large for dense storage".into()))?;
        let r = radius as i64;
        let mut coords = Vec::with_capacity(len * dimension);
        let mut cur = vec![-r; dimension];
        for _ in 0..len {
            coords.extend_from_slice(&cur);
            for u in (0..dimension).rev() {
                if cur[u] < r {
                    cur[u] += 1;
                    break;
                }
                cur[u] = -r;
            }
        }
        Ok(Self {
            geom: Arc::new(Geometry {
                dimension,
                radius: r,
                interior_radius: interior_radius as i64,
                coords,
                offsets: OnceLock::new(),
            }),
        })
    }

    pub fn dimension(&self) -> usize {
        self.geom.dimension
    }

    pub fn radius(&self) -> usize {
        self.geom.radius as usize
    }

    pub fn interior_radius(&self) -> usize {
        self.geom.interior_radius as usize
    }

    /// Number of sites.
    pub fn len(&self) -> usize {
        self.geom.coords.len() / self.geom.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest offset `|i - j|` realised inside the box, `2N`.
    pub fn max_offset(&self) -> usize {
        2 * self.radius()
    }

    pub fn site(&self, idx: usize) -> &[i64] {
        let d = self.geom.dimension;
        &self.geom.coords[idx * d..(idx + 1) * d]
    }

    pub fn sites(&self) -> impl Iterator<Item = &[i64]> + '_ {
        self.geom.coords.chunks_exact(self.geom.dimension)
    }

    pub fn index_of(&self, site: &[i64]) -> Option<usize> {
        if site.len() != self.geom.dimension {
            return None;
        }
        let r = self.geom.radius;
        let side = 2 * r + 1;
        let mut idx = 0i64;
        for &c in site {
            if c.abs() > r {
                return None;
            }
            idx = idx * side + (c + r);
        }
        Some(idx as usize)
    }

    /// Index of `site(idx) - shift`, if that site is in the box.
    pub fn shifted(&self, idx: usize, shift: &[i64]) -> Option<usize> {
        let r = self.geom.radius;
        let side = 2 * r + 1;
        let mut out = 0i64;
        for (&c, &s) in self.site(idx).iter().zip(shift) {
            let v = c - s;
            if v.abs() > r {
                return None;
            }
            out = out * side + (v + r);
        }
        Some(out as usize)
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        sup_abs(self.site(idx)) <= self.geom.interior_radius
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_interior(i)).collect()
    }

    /// All offsets `k` with `0 < |k|_inf <= max`, lexicographically ordered.
    pub fn nonzero_offsets(&self, max: usize) -> Vec<Vec<i64>> {
        nonzero_offsets(self.geom.dimension, max)
    }

    pub(crate) fn offset_table(&self) -> &OffsetTable {
        self.geom.offsets.get_or_init(|| {
            let n = self.len();
            let d = self.geom.dimension;
            let two_r = 2 * self.geom.radius;
            let oside = 2 * two_r + 1;
            let count = (oside as usize).pow(d as u32);
            let mut offset_abs = vec![0u32; count];
            for (o, slot) in offset_abs.iter_mut().enumerate() {
                let mut rem = o as i64;
                let mut m = 0i64;
                for _ in 0..d {
                    let c = rem % oside - two_r;
                    rem /= oside;
                    m = m.max(c.abs());
                }
                *slot = m as u32;
            }
            let mut pair_offset = vec![0u32; n * n];
            for i in 0..n {
                let si = self.site(i);
                for j in 0..n {
                    let sj = self.site(j);
                    let mut o = 0i64;
                    for u in 0..d {
                        o = o * oside + (si[u] - sj[u] + two_r);
                    }
                    pair_offset[i * n + j] = o as u32;
                }
            }
            OffsetTable {
                pair_offset,
                offset_abs,
                count,
            }
        })
    }

    pub(crate) fn check_same(&self, other: &LatticeBox) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::BoxMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// All `k in Z^d` with `0 < |k|_inf <= max`, lexicographically ordered.
pub fn nonzero_offsets(dimension: usize, max: usize) -> Vec<Vec<i64>> {
    let m = max as i64;
    let mut out = Vec::new();
    let mut cur = vec![-m; dimension];
    loop {
        if cur.iter().any(|&c| c != 0) {
            out.push(cur.clone());
        }
        let mut u = dimension;
        loop {
            if u == 0 {
                return out;
            }
            u -= 1;
            if cur[u] < m {
                cur[u] += 1;
                break;
            }
            cur[u] = -m;
        }
    }
}

/// `|k|_inf`.
pub fn sup_abs(k: &[i64]) -> i64 {
    k.iter().map(|c| c.abs()).max().unwrap_or(0)
}

/// `<k> = max(1, |k|_inf)`.
pub fn bracket(k: &[i64]) -> f64 {
    sup_abs(k).max(1) as f64
}

/// Which algebra norm measures a coefficient sequence.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum NormPolicy {
    #[default]
    Sup,
    /// Sup-norm plus circular total variation of the generating function
    /// sampled at the site phases `i . omega mod 1`.
    SampledBv { omega: Vec<f64> },
}

impl NormPolicy {
    pub fn sampled_bv(omega: Vec<f64>) -> Self {
        NormPolicy::SampledBv { omega }
    }

    /// Site indices sorted by phase; `None` for the sup policy.
    pub(crate) fn phase_order(&self, lattice: &LatticeBox) -> Option<Vec<usize>> {
        match self {
            NormPolicy::Sup => None,
            NormPolicy::SampledBv { omega } => {
                let mut keyed: Vec<(f64, usize)> = (0..lattice.len())
                    .map(|i| (phase(lattice.site(i), omega), i))
                    .collect();
                keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                Some(keyed.into_iter().map(|(_, i)| i).collect())
            }
        }
    }

    /// Norm of the present entries, visited in `order` (phase order for the
    /// BV policy, any order for the sup policy).
    pub(crate) fn measure<I>(&self, entries: I) -> Option<f64>
    where
        I: IntoIterator<Item = Complex64>,
    {
        let mut sup = 0.0f64;
        let mut tv = 0.0f64;
        let mut first: Option<Complex64> = None;
        let mut prev: Option<Complex64> = None;
        for v in entries {
            sup = sup.max(v.norm());
            if let Some(p) = prev {
                tv += (v - p).norm();
            } else {
                first = Some(v);
            }
            prev = Some(v);
        }
        let first = first?;
        match self {
            NormPolicy::Sup => Some(sup),
            NormPolicy::SampledBv { .. } => {
                // close the circle
                tv += (first - prev.unwrap_or(first)).norm();
                Some(sup + tv)
            }
        }
    }
}

/// Fractional part of `site . omega`.
pub fn phase(site: &[i64], omega: &[f64]) -> f64 {
    let x: f64 = site.iter().zip(omega).map(|(&i, &w)| i as f64 * w).sum();
    x.rem_euclid(1.0)
}

/// Complex coefficient sequence over a lattice box.
#[derive(Clone)]
pub struct Sequence {
    lattice: LatticeBox,
    values: Vec<Option<Complex64>>,
    policy: NormPolicy,
    generator: Option<SiteFn>,
}

impl fmt::Debug for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Sequence")
            .field("lattice", &self.lattice)
            .field("policy", &self.policy)
            .field("formula_backed", &self.generator.is_some())
            .field("values", &self.values)
            .finish()
    }
}

impl Sequence {
    pub fn from_values(lattice: &LatticeBox, values: Vec<Complex64>, policy: NormPolicy) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::BoxMismatch(format!(
                "{} values for a box of {} sites",
                values.len(),
                lattice.len()
            )));
        }
        Ok(Self {
            lattice: lattice.clone(),
            values: values.into_iter().map(Some).collect(),
            policy,
            generator: None,
        })
    }

    pub(crate) fn from_partial(lattice: &LatticeBox, values: Vec<Option<Complex64>>, policy: NormPolicy) -> Self {
        debug_assert_eq!(values.len(), lattice.len());
        Self {
            lattice: lattice.clone(),
            values,
            policy,
            generator: None,
        }
    }

    /// Formula-backed sequence; translations re-evaluate `f`.
    pub fn from_fn(lattice: &LatticeBox, f: SiteFn, policy: NormPolicy) -> Self {
        let values = lattice.sites().map(|s| Some(f(s))).collect();
        Self {
            lattice: lattice.clone(),
            values,
            policy,
            generator: Some(f),
        }
    }

    pub fn constant(lattice: &LatticeBox, c: Complex64, policy: NormPolicy) -> Self {
        Self::from_fn(lattice, Arc::new(move |_| c), policy)
    }

    /// Kronecker delta at `site`.
    pub fn delta(lattice: &LatticeBox, site: &[i64], policy: NormPolicy) -> Self {
        let at = site.to_vec();
        Self::from_fn(
            lattice,
            Arc::new(move |i| if i == at.as_slice() { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }),
            policy,
        )
    }

    pub fn lattice(&self) -> &LatticeBox {
        &self.lattice
    }

    pub fn policy(&self) -> &NormPolicy {
        &self.policy
    }

    pub fn is_formula_backed(&self) -> bool {
        self.generator.is_some()
    }

    pub fn values(&self) -> &[Option<Complex64>] {
        &self.values
    }

    pub fn get(&self, idx: usize) -> Option<Complex64> {
        self.values[idx]
    }

    /// Value at an arbitrary site: evaluated by formula when available,
    /// otherwise looked up in the box.
    pub fn at(&self, site: &[i64]) -> Option<Complex64> {
        match &self.generator {
            Some(f) => Some(f(site)),
            None => self.lattice.index_of(site).and_then(|i| self.values[i]),
        }
    }

    /// Values with absent entries replaced by zero.
    pub fn to_dense(&self) -> Vec<Complex64> {
        self.values.iter().map(|v| v.unwrap_or_default()).collect()
    }

    /// `(sigma_j a)_i = a_{i-j}`.
    pub fn translate(&self, shift: &[i64]) -> Sequence {
        match &self.generator {
            Some(f) => {
                let f = f.clone();
                let j = shift.to_vec();
                let g: SiteFn = Arc::new(move |i: &[i64]| {
                    let s: Vec<i64> = i.iter().zip(&j).map(|(a, b)| a - b).collect();
                    f(&s)
                });
                Sequence::from_fn(&self.lattice, g, self.policy.clone())
            }
            None => {
                let values = (0..self.lattice.len())
                    .map(|i| self.lattice.shifted(i, shift).and_then(|p| self.values[p]))
                    .collect();
                Sequence::from_partial(&self.lattice, values, self.policy.clone())
            }
        }
    }

    fn zip_with(&self, other: &Sequence, op: impl Fn(Complex64, Complex64) -> Complex64 + Send + Sync + Copy + 'static) -> Result<Sequence> {
        self.lattice.check_same(&other.lattice)?;
        if let (Some(f), Some(g)) = (&self.generator, &other.generator) {
            let (f, g) = (f.clone(), g.clone());
            return Ok(Sequence::from_fn(
                &self.lattice,
                Arc::new(move |i| op(f(i), g(i))),
                self.policy.clone(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some(op(*a, *b)),
                _ => None,
            })
            .collect();
        Ok(Sequence::from_partial(&self.lattice, values, self.policy.clone()))
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Sequence) -> Result<Sequence> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn sub(&self, other: &Sequence) -> Result<Sequence> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Sequence) -> Result<Sequence> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Pointwise reciprocal. Exact zeros make the result undefined; callers
    /// that care (the distal check) test for them first.
    pub fn recip(&self) -> Sequence {
        match &self.generator {
            Some(f) => {
                let f = f.clone();
                Sequence::from_fn(&self.lattice, Arc::new(move |i| f(i).inv()), self.policy.clone())
            }
            None => Sequence::from_partial(
                &self.lattice,
                self.values.iter().map(|v| v.map(|z| z.inv())).collect(),
                self.policy.clone(),
            ),
        }
    }

    /// Same values with all sites outside `|i| <= radius` marked absent.
    pub fn restrict(&self, radius: usize) -> Sequence {
        let r = radius as i64;
        let values = (0..self.lattice.len())
            .map(|i| {
                if sup_abs(self.lattice.site(i)) <= r {
                    self.values[i]
                } else {
                    None
                }
            })
            .collect();
        Sequence::from_partial(&self.lattice, values, self.policy.clone())
    }

    pub fn sup(&self) -> Option<f64> {
        self.values.iter().flatten().map(|v| v.norm()).reduce(f64::max)
    }
}

/// Algebra norm of `a` over its present entries.
pub fn algebra_norm(a: &Sequence) -> Result<f64> {
    let norm = match a.policy.phase_order(&a.lattice) {
        None => a.policy.measure(a.values.iter().flatten().copied()),
        Some(order) => a.policy.measure(order.into_iter().filter_map(|i| a.values[i])),
    };
    norm.ok_or(Error::DegenerateSequence)
}

/// `sigma_j a`.
pub fn translate(a: &Sequence, shift: &[i64]) -> Sequence {
    a.translate(shift)
}

/// Outcome of the empirical `(tau, gamma)`-distal check.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct DistalReport {
    pub tau: f64,
    pub gamma: f64,
    /// Offset achieving the smallest margin.
    pub worst_offset: Vec<i64>,
    /// `min_k gamma^{-1}|k|^tau - |(p - sigma_k p)^{-1}|`.
    pub empirical_margin: f64,
    /// Largest `gamma` for which every tested offset passes at this `tau`.
    pub largest_gamma: f64,
    pub offsets_tested: usize,
}

impl DistalReport {
    pub fn passed(&self) -> bool {
        self.empirical_margin >= 0.0
    }
}

/// Checks `|(p - sigma_k p)^{-1}| <= gamma^{-1} |k|^tau` for every
/// `0 < |k| <= max_offset`, measuring over the interior window of the box.
pub fn distal_margin(p: &Sequence, tau: f64, gamma: f64, max_offset: usize) -> Result<DistalReport> {
    if !(tau > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau}, gamma = {gamma} must be positive")));
    }
    let lattice = p.lattice();
    if max_offset == 0 || max_offset > lattice.max_offset() {
        return Err(Error::InvalidParameter(format!(
            "max_offset {max_offset} outside 1..={}",
            lattice.max_offset()
        )));
    }
    let window = lattice.interior_radius();
    let mut worst: Option<(f64, Vec<i64>)> = None;
    let mut largest_gamma = f64::INFINITY;
    let mut tested = 0usize;
    for k in lattice.nonzero_offsets(max_offset) {
        let diff = p.sub(&p.translate(&k))?.restrict(window);
        if diff.values().iter().all(Option::is_none) {
            continue;
        }
        if let Some((idx, _)) = diff
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| matches!(v, Some(z) if *z == Complex64::new(0.0, 0.0)))
        {
            return Err(Error::DistalViolation {
                site: lattice.site(idx).to_vec(),
                offset: k,
                divisor: 0.0,
            });
        }
        let norm = algebra_norm(&diff.recip())?;
        let weight = (sup_abs(&k) as f64).powf(tau);
        let margin = weight / gamma - norm;
        largest_gamma = largest_gamma.min(weight / norm);
        tested += 1;
        if worst.as_ref().is_none_or(|(m, _)| margin < *m) {
            worst = Some((margin, k));
        }
    }
    let (empirical_margin, worst_offset) = worst.ok_or(Error::DegenerateSequence)?;
    Ok(DistalReport {
        tau,
        gamma,
        worst_offset,
        empirical_margin,
        largest_gamma,
        offsets_tested: tested,
    })
}
