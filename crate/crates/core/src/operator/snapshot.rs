use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::LatticeOperator;
use crate::algebra::{LatticeBox, NormPolicy};
use crate::error::{Error, Result};

/// Leading bytes of the binary snapshot format.
pub const SNAPSHOT_MAGIC: &[u8; 8] = b"NMOPv001";

/// Serializable form of an operator: box geometry plus row-major
/// `[re, im]` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSnapshot {
    pub dimension: usize,
    pub radius: usize,
    pub interior_radius: usize,
    pub entries: Vec<[f64; 2]>,
}

impl OperatorSnapshot {
    pub fn from_operator(op: &LatticeOperator) -> Self {
        let b = op.lattice();
        let n = op.dim();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = op.get(i, j);
                entries.push([z.re, z.im]);
            }
        }
        Self {
            dimension: b.dimension(),
            radius: b.radius(),
            interior_radius: b.interior_radius(),
            entries,
        }
    }

    pub fn to_operator(&self, policy: NormPolicy) -> Result<LatticeOperator> {
        let lattice = LatticeBox::new(self.dimension, self.radius, self.interior_radius)?;
        let n = lattice.len();
        if self.entries.len() != n * n {
            return Err(Error::Snapshot(format!("{} entries for {n} sites", self.entries.len())));
        }
        let re = DMatrix::from_fn(n, n, |i, j| self.entries[i * n + j][0]);
        let im = DMatrix::from_fn(n, n, |i, j| self.entries[i * n + j][1]);
        LatticeOperator::from_parts(&lattice, policy, re, Some(im))
    }

    /// Little-endian binary: magic, three `u64` geometry fields, then the
    /// entries as `f64` pairs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 16 * self.entries.len());
        out.extend_from_slice(SNAPSHOT_MAGIC);
        for v in [self.dimension, self.radius, self.interior_radius] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for [re, im] in &self.entries {
            out.extend_from_slice(&re.to_le_bytes());
            out.extend_from_slice(&im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Snapshot(m.to_string());
        if bytes.len() < 32 || &bytes[..8] != SNAPSHOT_MAGIC {
            return Err(bad("missing header"));
        }
        let word = |k: usize| u64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().unwrap()) as usize;
        let (dimension, radius, interior_radius) = (word(0), word(1), word(2));
        let body = &bytes[32..];
        if !body.len().is_multiple_of(16) {
            return Err(bad("truncated entry data"));
        }
        let entries = body
            .chunks_exact(16)
            .map(|c| {
                [
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                ]
            })
            .collect();
        Ok(Self {
            dimension,
            radius,
            interior_radius,
            entries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn round_trips() {
        let b = LatticeBox::new(2, 1, 1).unwrap();
        let op = LatticeOperator::from_fn(&b, NormPolicy::Sup, |i, j| Complex64::new(i as f64 / 3.0, j as f64 * 1e-300));
        let snap = OperatorSnapshot::from_operator(&op);
        let back = OperatorSnapshot::from_bytes(&snap.to_bytes()).unwrap();
        assert_eq!(back, snap);
        assert_eq!(back.to_operator(NormPolicy::Sup).unwrap(), op);
        let json = serde_json::to_string(&snap).unwrap();
        let again: OperatorSnapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(again, snap);
        assert!(OperatorSnapshot::from_bytes(b"garbage").is_err());
    }
}
