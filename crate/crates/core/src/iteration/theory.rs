//! Sufficient conditions of the convergence theorem, evaluated in log10 space
//! so that astronomically large smoothing radii and tiny couplings can be
//! represented.

use serde::{Deserialize, Serialize};

use super::SchemeParams;
use crate::error::Result;
use crate::operator::TameConstants;

/// Scales entering the conditions, all as base-10 logarithms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryInput {
    pub dimension: usize,
    pub tau: f64,
    pub gamma: f64,
    pub delta: f64,
    pub alpha0: f64,
    pub alpha: f64,
    pub alpha1: f64,
    pub log10_theta0: f64,
    pub log10_big_theta: f64,
    /// `log10 |T|_{alpha+4delta}`.
    pub log10_t_high: f64,
    /// `log10 |T|_{alpha+3delta}`.
    pub log10_t_low: f64,
}

impl TheoryInput {
    pub fn from_params(params: &SchemeParams, dimension: usize, t_high: f64, t_low: f64) -> Self {
        Self {
            dimension,
            tau: params.tau,
            gamma: params.gamma,
            delta: params.delta,
            alpha0: params.alpha0,
            alpha: params.alpha,
            alpha1: params.alpha1,
            log10_theta0: params.theta0.log10(),
            log10_big_theta: params.big_theta.log10(),
            log10_t_high: t_high.log10(),
            log10_t_low: t_low.log10(),
        }
    }
}

/// One displayed inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryCondition {
    pub name: String,
    pub statement: String,
    pub holds: bool,
    /// Slack of the inequality; exponents compare linearly, scales in log10.
    pub margin: f64,
    /// False when the inequality involves an unspecified constant, which is
    /// then taken to be 1.
    pub effective: bool,
}

/// Lower bound on the growth factor and the term that attains it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThetaRequirement {
    pub log10_required: f64,
    pub binding: String,
}

/// `max{8^{2/delta} C0^{4/delta}, 10^{1/delta}, 10^{1/alpha0}}`.
pub fn theta_requirement(delta: f64, alpha0: f64, c0: f64) -> ThetaRequirement {
    let candidates = [
        ("8^{2/delta} C0^{4/delta}", 2.0 / delta * 8f64.log10() + 4.0 / delta * c0.log10()),
        ("10^{1/delta}", 1.0 / delta),
        ("10^{1/alpha0}", 1.0 / alpha0),
    ];
    let (binding, log10_required) = candidates
        .iter()
        .fold(candidates[0], |best, c| if c.1 > best.1 { *c } else { best });
    ThetaRequirement {
        log10_required,
        binding: binding.to_string(),
    }
}

fn cond(name: &str, statement: &str, margin: f64, strict: bool, effective: bool) -> TheoryCondition {
    TheoryCondition {
        name: name.to_string(),
        statement: statement.to_string(),
        holds: if strict { margin > 0.0 } else { margin >= 0.0 },
        margin,
        effective,
    }
}

/// Evaluates every sufficient condition of the scheme.
pub fn check_theory_conditions(input: &TheoryInput) -> Result<Vec<TheoryCondition>> {
    let tc = TameConstants::new(input.dimension, input.alpha0)?;
    let TheoryInput {
        tau,
        gamma,
        delta,
        alpha0,
        alpha,
        alpha1,
        log10_theta0: lt0,
        log10_big_theta: lbt,
        log10_t_high,
        log10_t_low,
        ..
    } = *input;
    let c0 = tc.c0;
    let kappa1 = alpha0 - alpha + tau + 7.0 * delta;
    let req = theta_requirement(delta, alpha0, c0);
    let out = vec![
        cond("Theta1", "Theta^{delta/2} >= 8 C0^2", delta / 2.0 * lbt - (8.0 * c0 * c0).log10(), false, true),
        cond("alpha1", "alpha > alpha0 + tau + 5 delta", alpha - (alpha0 + tau + 5.0 * delta), true, true),
        cond(
            "Theta2",
            "|T|_{alpha+4delta} <= 1 and theta0 >= Theta^{(alpha+4delta-alpha0)/delta}",
            (-log10_t_high).min(lt0 - (alpha + 4.0 * delta - alpha0) / delta * lbt),
            false,
            true,
        ),
        cond("alpha2", "kappa = -alpha + alpha0 + tau + 6 delta < 0", alpha - (alpha0 + tau + 6.0 * delta), true, true),
        cond("T1", "|T|_{alpha+4delta} <= 1", -log10_t_high, false, true),
        cond(
            "Theta3",
            "theta0^delta >= Theta^{alpha+4delta-alpha0}",
            delta * lt0 - (alpha + 4.0 * delta - alpha0) * lbt,
            false,
            true,
        ),
        cond("alpha3", "kappa1 = alpha0 - alpha + tau + 7 delta < 0", alpha - (alpha0 + tau + 7.0 * delta), true, true),
        cond(
            "Theta4",
            "theta0^delta >= 3 gamma^{-1} Theta^tau",
            delta * lt0 - ((3.0 / gamma).log10() + tau * lbt),
            false,
            true,
        ),
        cond("alpha11", "alpha1 >= 2 alpha + delta", alpha1 - (2.0 * alpha + delta), false, true),
        cond(
            "Theta5",
            "max(Theta^{-alpha0}, Theta^{-delta}) <= 1/10",
            alpha0.min(delta) * lbt - 1.0,
            false,
            true,
        ),
        cond(
            "Theta6",
            "theta0^{-kappa1} >= C Theta^{alpha-alpha0-kappa1} (C = 1)",
            -kappa1 * lt0 - (alpha - alpha0 - kappa1) * lbt,
            false,
            false,
        ),
        cond("alpha0", "-alpha + alpha0 + tau + 3 delta < 0", alpha - (alpha0 + tau + 3.0 * delta), true, true),
        cond(
            "T2",
            "|T|_{alpha+3delta} <= theta0^{alpha0-alpha} <= 1",
            ((alpha0 - alpha) * lt0 - log10_t_low).min(-(alpha0 - alpha) * lt0),
            false,
            true,
        ),
        cond(
            "Theta0",
            "theta0^delta >= C Theta^{alpha-alpha0+delta} (C = 1)",
            delta * lt0 - (alpha - alpha0 + delta) * lbt,
            false,
            false,
        ),
        cond(
            "Theta",
            &format!("Theta >= max{{8^{{2/delta}} C0^{{4/delta}}, 10^{{1/delta}}, 10^{{1/alpha0}}}} (binding: {})", req.binding),
            lbt - req.log10_required,
            false,
            true,
        ),
        cond(
            "T",
            "|T|_{alpha+4delta} <= theta0^{alpha0-alpha} <= 1",
            ((alpha0 - alpha) * lt0 - log10_t_high).min(-(alpha0 - alpha) * lt0),
            false,
            true,
        ),
    ];
    Ok(out)
}
