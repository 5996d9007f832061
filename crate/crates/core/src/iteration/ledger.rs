use std::fmt::Write as _;

use serde::Serialize;

/// One measured norm of a step, with the bound claimed for it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub label: String,
    /// Sobolev index, `None` for scalar diagnostics.
    pub s: Option<f64>,
    pub norm: f64,
    pub bound: Option<f64>,
    /// Formula of the bound, e.g. `theta_{k-1}^{s-alpha+tau+4delta}`.
    pub tag: String,
}

impl LedgerEntry {
    pub fn margin(&self) -> Option<f64> {
        self.bound.map(|b| b - self.norm)
    }

    pub fn column(&self) -> String {
        match self.s {
            Some(s) => format!("{}@{}", self.label, s),
            None => self.label.clone(),
        }
    }
}

/// Per-step record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LedgerRow {
    pub k: usize,
    pub theta_k: f64,
    pub entries: Vec<LedgerEntry>,
}

impl LedgerRow {
    pub fn new(k: usize, theta_k: f64) -> Self {
        Self {
            k,
            theta_k,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, label: &str, s: Option<f64>, norm: f64, bound: Option<f64>, tag: &str) {
        self.entries.push(LedgerEntry {
            label: label.to_string(),
            s,
            norm,
            bound,
            tag: tag.to_string(),
        });
    }

    pub fn get(&self, label: &str, s: Option<f64>) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| e.label == label && e.s == s)
    }

    /// Norm of `label` at `s`; panics if absent.
    pub fn norm(&self, label: &str, s: Option<f64>) -> f64 {
        self.get(label, s)
            .unwrap_or_else(|| panic!("ledger has no entry {label}@{s:?}"))
            .norm
    }

    /// Entries whose bound is violated.
    pub fn violations(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.iter().filter(|e| e.margin().is_some_and(|m| m < 0.0))
    }
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV export: `k,theta_k,<label@s>...,<margin:label@s>...`, floats with 17
/// significant digits. The column set is taken from the first row.
pub fn ledger_csv(rows: &[LedgerRow]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else {
        out.push_str("k,theta_k\n");
        return out;
    };
    let columns: Vec<(String, Option<f64>)> = first.entries.iter().map(|e| (e.label.clone(), e.s)).collect();
    let bounded: Vec<(String, Option<f64>)> = first
        .entries
        .iter()
        .filter(|e| e.bound.is_some())
        .map(|e| (e.label.clone(), e.s))
        .collect();
    out.push_str("k,theta_k");
    for e in first.entries.iter() {
        write!(out, ",{}", e.column()).unwrap();
    }
    for e in first.entries.iter().filter(|e| e.bound.is_some()) {
        write!(out, ",margin:{}", e.column()).unwrap();
    }
    out.push('\n');
    for row in rows {
        write!(out, "{},{}", row.k, fmt_float(row.theta_k)).unwrap();
        for (label, s) in &columns {
            out.push(',');
            if let Some(e) = row.get(label, *s) {
                out.push_str(&fmt_float(e.norm));
            }
        }
        for (label, s) in &bounded {
            out.push(',');
            if let Some(m) = row.get(label, *s).and_then(LedgerEntry::margin) {
                out.push_str(&fmt_float(m));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut r = LedgerRow::new(1, 2.0);
        r.push("W", Some(0.6), 0.125, Some(1.0), "theta");
        r.push("conj_residual", None, 0.0, None, "");
        let csv = ledger_csv(&[r]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "k,theta_k,W@0.6,conj_residual,margin:W@0.6");
        assert_eq!(
            lines.next().unwrap(),
            "1,2.0000000000000000e0,1.2500000000000000e-1,0.0000000000000000e0,8.7500000000000000e-1"
        );
    }
}
