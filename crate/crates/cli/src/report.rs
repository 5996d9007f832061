use nashmoser::iteration::{check_theory_conditions, LedgerEntry, SchemeResult, StepInfo, TheoryCondition, TheoryInput};
use nashmoser::localization::{localize, LocalizationReport, EIGENSOLVER_TOLERANCE};
use serde::Serialize;
use serde_json::Value;

#[derive(Serialize)]
pub struct StepReport<'a> {
    pub k: usize,
    pub theta_k: f64,
    pub ledger: &'a [LedgerEntry],
    pub solver: &'a StepInfo,
}

#[derive(Serialize)]
pub struct NormAt {
    pub s: f64,
    pub norm: f64,
}

#[derive(Serialize)]
pub struct QplusNorms {
    /// `|Q+ - I|_s` on the ledger grid.
    pub deviation: Vec<NormAt>,
    pub operator_norm: f64,
    pub inverse_operator_norm: f64,
    pub diagnostic: nashmoser::iteration::QplusDiagnostic,
    pub master_defect: f64,
    pub telescoping_defect: f64,
}

#[derive(Serialize)]
pub struct Report<'a> {
    pub config_echo: &'a Value,
    pub converged: bool,
    pub steps: Vec<StepReport<'a>>,
    pub final_residual_norms: Vec<NormAt>,
    pub qplus_norms: QplusNorms,
    pub dplus_norm: f64,
    pub localization: LocalizationReport,
    pub theory_conditions: Vec<TheoryCondition>,
}

/// One asserted property of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Invariant {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn theory_conditions(result: &SchemeResult) -> nashmoser::Result<Vec<TheoryCondition>> {
    let p = &result.params;
    let t_high = result.t.sobolev_norm(p.alpha + 4.0 * p.delta);
    let t_low = result.t.sobolev_norm(p.alpha + 3.0 * p.delta);
    check_theory_conditions(&TheoryInput::from_params(p, result.t.lattice().dimension(), t_high, t_low))
}

pub fn build<'a>(echo: &'a Value, result: &'a SchemeResult) -> nashmoser::Result<Report<'a>> {
    let grid = result.params.s_grid();
    let mut s_all = vec![0.0];
    s_all.extend(grid.iter().copied());
    let residual = result.final_residual.sobolev_norms(&s_all);
    let id = nashmoser::LatticeOperator::identity(result.q_plus.lattice(), result.q_plus.policy().clone());
    let dev = result.q_plus.sub(&id)?.sobolev_norms(&grid);
    Ok(Report {
        config_echo: echo,
        converged: result.converged,
        steps: result
            .ledger
            .iter()
            .zip(&result.steps)
            .map(|(row, info)| StepReport {
                k: row.k,
                theta_k: row.theta_k,
                ledger: &row.entries,
                solver: info,
            })
            .collect(),
        final_residual_norms: s_all.iter().zip(residual).map(|(&s, norm)| NormAt { s, norm }).collect(),
        qplus_norms: QplusNorms {
            deviation: grid.iter().zip(dev).map(|(&s, norm)| NormAt { s, norm }).collect(),
            operator_norm: result.q_plus.operator_norm(),
            inverse_operator_norm: result.q_plus_inv.operator_norm(),
            diagnostic: result.qplus.clone(),
            master_defect: result.master_defect,
            telescoping_defect: result.telescoping_defect,
        },
        dplus_norm: result.d_plus.norm(),
        localization: localize(result),
        theory_conditions: theory_conditions(result)?,
    })
}

/// Properties a run must satisfy for a zero exit code.
pub fn invariants(result: &SchemeResult, loc: &LocalizationReport) -> Vec<Invariant> {
    let conj = result
        .ledger
        .iter()
        .find(|row| row.get("conj_residual", None).and_then(LedgerEntry::margin).is_some_and(|m| m < 0.0));
    let decomposition = result.ledger.iter().map(|row| row.norm("decomposition", None)).fold(0.0, f64::max);
    let interior: Vec<_> = loc.eigenreports.iter().filter(|e| e.interior).collect();
    let uncertified = interior.iter().filter(|e| !e.residual_certified()).count();
    let mut out = vec![
        Invariant {
            name: "converged",
            passed: result.converged,
            detail: format!("{} steps, slices absorbed: {}", result.steps_taken(), result.slices_absorbed),
        },
        Invariant {
            name: "exact_conjugation",
            passed: conj.is_none(),
            detail: conj.map_or("every step within 1e-9 (1 + |H|_0)".into(), |row| format!("step {} exceeds tolerance", row.k)),
        },
        Invariant {
            name: "remainder_decomposition",
            passed: decomposition <= nashmoser::iteration::DECOMPOSITION_TOLERANCE,
            detail: format!("max defect {decomposition:e}"),
        },
        Invariant {
            name: "telescoping",
            passed: !result.slices_absorbed || result.telescoping_defect == 0.0,
            detail: format!("max |sum T_l - T| = {:e}", result.telescoping_defect),
        },
        Invariant {
            name: "eigen_residual",
            passed: uncertified == 0,
            detail: format!("{uncertified} of {} interior residuals above |Q+||R delta_k| + rounding", interior.len()),
        },
        Invariant {
            name: "decay_envelope",
            passed: loc.min_interior_envelope_margin >= 0.0,
            detail: format!("min interior margin {:e} (p = {})", loc.min_interior_envelope_margin, loc.envelope_exponent),
        },
    ];
    if let Some(s) = &loc.spectrum {
        out.push(Invariant {
            name: "spectrum",
            passed: s.hausdorff_interior <= loc.max_interior_residual + EIGENSOLVER_TOLERANCE,
            detail: format!("one-sided Hausdorff distance {:e}", s.hausdorff_interior),
        });
    }
    out
}
