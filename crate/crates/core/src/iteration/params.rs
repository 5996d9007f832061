use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which conjugation problem is solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Find `D+` with `Q+^{-1}(T + D + D+)Q+ = D`.
    #[default]
    Inverse,
    /// Find `D+` with `Q+^{-1}(T + D)Q+ = D + D+`.
    Direct,
}

/// Parameters of the scheme. The coupling lives in the hopping spec; the
/// operator handed to [`run`](super::run) is already scaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeParams {
    pub tau: f64,
    pub gamma: f64,
    pub delta: f64,
    pub alpha0: f64,
    pub alpha: f64,
    pub alpha1: f64,
    pub theta0: f64,
    /// Growth factor of the smoothing radii, `theta_k = theta0 * big_theta^k`.
    pub big_theta: f64,
    /// Decay exponent of the hopping, used for the localization envelope.
    pub s_hopping: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub theory_checks: bool,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_fp_tol")]
    pub fixed_point_tol: f64,
    #[serde(default = "default_fp_iter")]
    pub fixed_point_max_iter: usize,
    /// Sobolev indices recorded in the ledger; defaults to `[alpha0, alpha, alpha1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Vec<f64>>,
}

fn default_stop_tol() -> f64 {
    1e-10
}

fn default_max_steps() -> usize {
    40
}

fn default_fp_tol() -> f64 {
    1e-12
}

fn default_fp_iter() -> usize {
    200
}

impl SchemeParams {
    /// Parameters for power-law hopping `|phi_k| <= |k|^{-s}`:
    /// `alpha = s - d/2 - 5 delta`, `alpha1 = 2 alpha + delta`, empirical
    /// smoothing `theta0 = 2`, `big_theta = 2`.
    pub fn for_power_law(dimension: usize, s_hopping: f64, tau: f64, gamma: f64, delta: f64, alpha0: f64) -> Self {
        let alpha = s_hopping - dimension as f64 / 2.0 - 5.0 * delta;
        Self {
            tau,
            gamma,
            delta,
            alpha0,
            alpha,
            alpha1: 2.0 * alpha + delta,
            theta0: 2.0,
            big_theta: 2.0,
            s_hopping,
            mode: Mode::Inverse,
            theory_checks: false,
            stop_tol: default_stop_tol(),
            max_steps: default_max_steps(),
            fixed_point_tol: default_fp_tol(),
            fixed_point_max_iter: default_fp_iter(),
            s_grid: None,
        }
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("theta0", self.theta0),
            ("stop_tol", self.stop_tol),
            ("fixed_point_tol", self.fixed_point_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive and finite")));
            }
        }
        if !(self.big_theta > 1.0) {
            return Err(Error::InvalidParameter(format!("big_theta = {} must exceed 1", self.big_theta)));
        }
        if !(self.alpha0 > dimension as f64 / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha0 = {} must exceed d/2 = {}",
                self.alpha0,
                dimension as f64 / 2.0
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// `theta_k = theta0 * big_theta^k`.
    pub fn theta(&self, k: usize) -> f64 {
        self.theta0 * self.big_theta.powi(k as i32)
    }

    pub fn s_grid(&self) -> Vec<f64> {
        self.s_grid.clone().unwrap_or_else(|| vec![self.alpha0, self.alpha, self.alpha1])
    }

    /// Exponent of the eigenvector envelope, `s - tau - d/2 - 12 delta`.
    pub fn envelope_exponent(&self, dimension: usize) -> f64 {
        self.s_hopping - self.tau - dimension as f64 / 2.0 - 12.0 * self.delta
    }
}
