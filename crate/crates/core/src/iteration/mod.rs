//! The conjugation scheme.
//!
//! The hopping `T` is cut into slices `T_0 = S_{theta_0} T`,
//! `T_k = (S_{theta_k} - S_{theta_{k-1}}) T`. Step `k` absorbs `T_k` and
//! conjugates by `V_{k+1} = I + W_{k+1}`, keeping the identity
//! `Q_k^{-1} H_k Q_k = D + R_k` (inverse mode) or
//! `Q_k^{-1} H_k Q_k = D + D+_k + R_k` (direct mode) exact at every step:
//! the remainder `R_k` is always computed by multiplication, and the
//! closed-form remainder expressions are cross-checked against it.

mod ledger;
mod params;
mod theory;
mod unitary;

pub use ledger::{ledger_csv, LedgerEntry, LedgerRow};
pub use params::{Mode, SchemeParams};
pub use theory::{check_theory_conditions, theta_requirement, TheoryCondition, TheoryInput, ThetaRequirement};
pub use unitary::{unitarize, Unitarization, SYMMETRY_TOLERANCE, UNITARITY_TOLERANCE};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::homological::{invert_near_identity, solve_diagonal_correction, solve_generator, SolveMethod};
use crate::operator::{DiagonalOperator, LatticeOperator, TameConstants};

/// Tolerance factor of the exact-conjugation check, `1e-9 (1 + |H|_0)`.
pub const CONJUGATION_TOLERANCE: f64 = 1e-9;
/// Tolerance of the remainder decomposition check.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-9;

/// `T_0 = S_{theta_0} T`, `T_k = (S_{theta_k} - S_{theta_{k-1}}) T`.
pub fn hopping_slice(t: &LatticeOperator, k: usize, params: &SchemeParams) -> LatticeOperator {
    let hi = params.theta(k);
    if k == 0 {
        return t.smooth(hi);
    }
    let lo = params.theta(k - 1);
    t.band(|m| (m as f64) > lo && (m as f64) <= hi)
}

/// Running state after step `k`.
#[derive(Clone, Debug)]
pub struct IterationState {
    pub k: usize,
    pub theta_k: f64,
    pub q: LatticeOperator,
    pub qinv: LatticeOperator,
    /// `H_k - D`.
    pub hpert: LatticeOperator,
    pub r: LatticeOperator,
    /// `sum_{l<k} D_l`.
    pub dplus: DiagonalOperator,
    /// Accumulated bound on `|Q_k - I|_s` over the s-grid.
    q_bound: Vec<f64>,
}

/// Solver diagnostics of one step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepInfo {
    pub k: usize,
    pub fixed_point_method: Option<SolveMethod>,
    pub fixed_point_iterations: usize,
    pub fixed_point_defect: f64,
    pub fixed_point_direct_agreement: f64,
    pub fixed_point_bound_margin: Option<f64>,
    pub inverse_method: SolveMethod,
    pub neumann_terms: usize,
    pub neumann_smallness: f64,
    pub neumann_residual: f64,
    pub condition_number: Option<f64>,
    pub generator_residual: f64,
    /// `(s, margin)` of `|W|_s <= gamma^{-1}|S_theta G|_{s+tau}`.
    pub generator_bound_margins: Vec<(f64, f64)>,
}

/// Outcome of the initial step.
#[derive(Clone, Debug)]
pub struct InitialStep {
    pub w1: LatticeOperator,
    pub v1: LatticeOperator,
    pub v1inv: LatticeOperator,
    pub r1: LatticeOperator,
    /// `|R_1 - V_1^{-1} T_0 W_1|_0`.
    pub closed_form_defect: f64,
    pub row: LedgerRow,
    pub info: StepInfo,
}

/// Bound on `|Q_+ - I|_{alpha-tau-7delta}` scaled by the coupling.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QplusDiagnostic {
    pub s: f64,
    pub qplus_deviation: f64,
    /// `|T|_{alpha+4delta}^{delta/(alpha-alpha0)}`.
    pub coupling_scale: f64,
    /// Ratio of the two; an empirical value for the unspecified constant.
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct SchemeResult {
    pub mode: Mode,
    pub params: SchemeParams,
    pub t: LatticeOperator,
    pub d: DiagonalOperator,
    pub q_plus: LatticeOperator,
    pub q_plus_inv: LatticeOperator,
    pub d_plus: DiagonalOperator,
    pub final_residual: LatticeOperator,
    pub ledger: Vec<LedgerRow>,
    pub steps: Vec<StepInfo>,
    pub converged: bool,
    /// True once every hopping slice has been absorbed.
    pub slices_absorbed: bool,
    /// `max |sum_l T_l - T|` over the absorbed slices.
    pub telescoping_defect: f64,
    /// `|Q+^{-1} H' Q+ - D - (D+ in direct mode) - R_final|_0` with the
    /// product evaluated from scratch.
    pub master_defect: f64,
    pub qplus: QplusDiagnostic,
    pub unitary: Option<Unitarization>,
}

impl SchemeResult {
    /// `T + D + D+` (inverse) or `T + D` (direct).
    pub fn hamiltonian(&self) -> LatticeOperator {
        let base = self.t.add(&self.d.to_operator()).expect("same box");
        match self.mode {
            Mode::Inverse => base.add(&self.d_plus.to_operator()).expect("same box"),
            Mode::Direct => base,
        }
    }

    /// Diagonal that `Q+` conjugates the Hamiltonian to: `D` or `D + D+`.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        match self.mode {
            Mode::Inverse => self.d.values().to_vec(),
            Mode::Direct => self.d.values().iter().zip(self.d_plus.values()).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.ledger.len()
    }
}

struct Context<'a> {
    t: &'a LatticeOperator,
    d: &'a DiagonalOperator,
    d_op: LatticeOperator,
    params: &'a SchemeParams,
    tc: TameConstants,
    grid: Vec<f64>,
    id: LatticeOperator,
}

impl Context<'_> {
    /// `Q^{-1}(H_pert Q + [D, Q]) - shift`, the exact defect.
    fn defect(&self, q: &LatticeOperator, qinv: &LatticeOperator, hpert: &LatticeOperator, shift: &DiagonalOperator) -> Result<LatticeOperator> {
        let inner = hpert.mul(q)?.add(&q.commutator_with_diagonal(self.d)?)?;
        let r = qinv.mul(&inner)?;
        match self.params.mode {
            Mode::Inverse => Ok(r),
            Mode::Direct => r.sub(&shift.to_operator()),
        }
    }

    /// `|H Q - Q (D + shift + R)|_0`.
    fn conj_residual(&self, q: &LatticeOperator, hpert: &LatticeOperator, r: &LatticeOperator, shift: &DiagonalOperator) -> Result<(f64, f64)> {
        let inner = hpert.mul(q)?.add(&q.commutator_with_diagonal(self.d)?)?;
        let rhs = match self.params.mode {
            Mode::Inverse => q.mul(r)?,
            Mode::Direct => q.mul(&r.add(&shift.to_operator())?)?,
        };
        let h_norm = self.d_op.add(hpert)?.sobolev_norm(0.0);
        Ok((inner.sub(&rhs)?.sobolev_norm(0.0), h_norm))
    }

    fn theory_guard(&self, row: &LedgerRow) -> Result<()> {
        if !self.params.theory_checks {
            return Ok(());
        }
        if let Some(e) = row.violations().next() {
            return Err(Error::TheoryViolation(format!(
                "step {}: |{}| = {:e} exceeds {} = {:e}",
                row.k,
                e.column(),
                e.norm,
                e.tag,
                e.bound.unwrap_or(f64::NAN)
            )));
        }
        Ok(())
    }
}

fn pow(theta: f64, e: f64) -> f64 {
    theta.powf(e)
}

/// Initial step: `[D, W_1] + T_0 = 0`, `V_1 = I + W_1`,
/// `R_1 = V_1^{-1}(T_0 + D)V_1 - D`.
pub fn initial_step(t0: &LatticeOperator, d: &DiagonalOperator, params: &SchemeParams) -> Result<InitialStep> {
    let tc = TameConstants::new(d.lattice().dimension(), params.alpha0)?;
    let ctx = context(t0, d, params, tc)?;
    Ok(initial(&ctx, t0)?.1)
}

/// Initial step on the full hopping `t`, returning the state that
/// [`iterate_step`] continues from.
pub fn start(t: &LatticeOperator, d: &DiagonalOperator, params: &SchemeParams) -> Result<(IterationState, InitialStep)> {
    let tc = TameConstants::new(d.lattice().dimension(), params.alpha0)?;
    let ctx = context(t, d, params, tc)?;
    initial(&ctx, &hopping_slice(t, 0, params))
}

fn context<'a>(t: &'a LatticeOperator, d: &'a DiagonalOperator, params: &'a SchemeParams, tc: TameConstants) -> Result<Context<'a>> {
    t.lattice().check_same(d.lattice())?;
    params.validate(t.lattice().dimension())?;
    Ok(Context {
        t,
        d,
        d_op: d.to_operator(),
        params,
        tc,
        grid: params.s_grid(),
        id: LatticeOperator::identity(t.lattice(), t.policy().clone()),
    })
}

fn initial(ctx: &Context<'_>, t0: &LatticeOperator) -> Result<(IterationState, InitialStep)> {
    let p = ctx.params;
    let grid = &ctx.grid;
    let theta0 = p.theta(0);
    let gen = solve_generator(ctx.d, t0, theta0, p.tau, p.gamma, grid)?;
    let w1 = gen.w.clone();
    let v1 = ctx.id.add(&w1)?;
    let inv = invert_near_identity(&w1, &ctx.tc, grid, !p.theory_checks)?;
    let v1inv = inv.vinv.clone();
    let dplus = DiagonalOperator::zeros(t0.lattice(), t0.policy().clone());
    let hpert = t0.clone();
    let r1 = ctx.defect(&v1, &v1inv, &hpert, &dplus)?;
    let closed = v1inv.mul(&t0.mul(&w1)?)?;
    let closed_form_defect = r1.sub(&closed)?.sobolev_norm(0.0);
    let (conj, h_norm) = ctx.conj_residual(&v1, &hpert, &r1, &dplus)?;

    let mut row = LedgerRow::new(1, p.theta(1));
    let w_norms = w1.sobolev_norms(grid);
    let vi_norms = v1inv.sub(&ctx.id)?.sobolev_norms(grid);
    let mut r_grid = vec![0.0];
    r_grid.extend(grid.iter().copied());
    let r_norms = r1.sobolev_norms(&r_grid);
    let t0_norms = t0.sobolev_norms(grid);
    let q_bound: Vec<f64> = grid.iter().map(|s| pow(theta0, s - p.alpha + p.tau + 6.0 * p.delta)).collect();
    for (i, &s) in grid.iter().enumerate() {
        row.push("W", Some(s), w_norms[i], Some(pow(theta0, s - p.alpha + p.tau + p.delta)), "theta_0^{s-alpha+tau+delta}");
    }
    for (i, &s) in grid.iter().enumerate() {
        row.push("Vinv-I", Some(s), vi_norms[i], Some(pow(theta0, s - p.alpha + p.tau + 2.0 * p.delta)), "theta_0^{s-alpha+tau+2delta}");
    }
    row.push("R", Some(0.0), r_norms[0], None, "");
    for (i, &s) in grid.iter().enumerate() {
        row.push("R", Some(s), r_norms[i + 1], Some(pow(p.theta(1), s - p.alpha)), "theta_k^{s-alpha}");
    }
    row.push("D", Some(0.0), 0.0, Some(3.0 * pow(theta0, p.alpha0 - p.alpha)), "3 theta_{k-1}^{alpha0-alpha}");
    for (i, &s) in grid.iter().enumerate() {
        row.push("Q-I", Some(s), w_norms[i], Some(q_bound[i]), "sum_{l<=k} theta_{l-1}^{s-alpha+tau+6delta}");
    }
    for (i, &s) in grid.iter().enumerate() {
        row.push("QinvTQ", Some(s), t0_norms[i], Some(pow(theta0, s - p.alpha)), "theta_{k-1}^{s-alpha}");
    }
    for &s in grid.iter() {
        row.push("QinvDQ", Some(s), 0.0, Some(qdq_bound(p, theta0, s)), qdq_tag(p, s));
    }
    row.push("conj_residual", None, conj, Some(CONJUGATION_TOLERANCE * (1.0 + h_norm)), "1e-9 (1 + |H_k|_0)");
    row.push("decomposition", None, closed_form_defect, Some(DECOMPOSITION_TOLERANCE), "1e-9");
    let health = v1.mul(&v1inv)?.sub(&ctx.id)?.sobolev_norm(0.0);
    row.push("QQinv-I", None, health, None, "");
    ctx.theory_guard(&row)?;

    let info = StepInfo {
        k: 1,
        fixed_point_method: None,
        fixed_point_iterations: 0,
        fixed_point_defect: 0.0,
        fixed_point_direct_agreement: 0.0,
        fixed_point_bound_margin: None,
        inverse_method: inv.method,
        neumann_terms: inv.terms,
        neumann_smallness: inv.smallness,
        neumann_residual: inv.residual,
        condition_number: inv.condition_number,
        generator_residual: gen.residual_offdiag,
        generator_bound_margins: gen.bound_margins.clone(),
    };
    let state = IterationState {
        k: 1,
        theta_k: p.theta(1),
        q: v1.clone(),
        qinv: v1inv.clone(),
        hpert,
        r: r1.clone(),
        dplus,
        q_bound,
    };
    Ok((
        state,
        InitialStep {
            w1,
            v1,
            v1inv,
            r1,
            closed_form_defect,
            row,
            info,
        },
    ))
}

fn qdq_bound(p: &SchemeParams, theta: f64, s: f64) -> f64 {
    if s < p.alpha - p.tau - 4.0 * p.delta {
        pow(theta, p.alpha0 - p.alpha + 3.0 * p.delta)
    } else {
        pow(theta, s - p.alpha)
    }
}

fn qdq_tag(p: &SchemeParams, s: f64) -> &'static str {
    if s < p.alpha - p.tau - 4.0 * p.delta {
        "theta_{k-1}^{alpha0-alpha+3delta}"
    } else {
        "theta_{k-1}^{s-alpha}"
    }
}

/// One conjugation step, `k -> k + 1`.
pub fn iterate_step(state: &IterationState, t: &LatticeOperator, d: &DiagonalOperator, params: &SchemeParams) -> Result<(IterationState, LedgerRow, StepInfo)> {
    let tc = TameConstants::new(d.lattice().dimension(), params.alpha0)?;
    let ctx = context(t, d, params, tc)?;
    step(&ctx, state)
}

fn step(ctx: &Context<'_>, state: &IterationState) -> Result<(IterationState, LedgerRow, StepInfo)> {
    let p = ctx.params;
    let grid = &ctx.grid;
    let k = state.k;
    let theta_k = p.theta(k);
    let theta_next = p.theta(k + 1);
    let tk = hopping_slice(ctx.t, k, p);
    let q = &state.q;
    let qinv = &state.qinv;
    let rk = &state.r;

    let (dk, xt, xd, g, fp) = match p.mode {
        Mode::Inverse => {
            let fp = solve_diagonal_correction(q, qinv, &tk, rk, &ctx.tc, p.fixed_point_tol, p.fixed_point_max_iter)?;
            let dk = fp.x.clone();
            let xt = fp.conjugated_p.clone();
            let xd = qinv.mul(&q.left_diagonal_mul(&dk))?;
            let g = xt.add(&xd)?.add(rk)?;
            (dk, xt, xd, g, Some(fp))
        }
        Mode::Direct => {
            let xt = qinv.mul(&tk.mul(q)?)?;
            let full = xt.add(rk)?;
            let dk = full.diagonal_part();
            let g = full.offdiagonal_part();
            let xd = LatticeOperator::zeros(q.lattice(), q.policy().clone());
            (dk, xt, xd, g, None)
        }
    };
    let divisor = match p.mode {
        Mode::Inverse => ctx.d.clone(),
        Mode::Direct => ctx.d.add(&state.dplus)?,
    };
    let gen = solve_generator(&divisor, &g, theta_next, p.tau, p.gamma, grid)?;
    let w = &gen.w;
    let inv = invert_near_identity(w, &ctx.tc, grid, !p.theory_checks)?;
    let vinv = &inv.vinv;
    let v = ctx.id.add(w)?;
    let q_next = q.mul(&v)?;
    let qinv_next = vinv.mul(qinv)?;
    let dplus_next = state.dplus.add(&dk)?;
    let hpert_next = match p.mode {
        Mode::Inverse => state.hpert.add(&tk)?.add(&dk.to_operator())?,
        Mode::Direct => state.hpert.add(&tk)?,
    };
    let r_next = ctx.defect(&q_next, &qinv_next, &hpert_next, &dplus_next)?;
    let (conj, h_norm) = ctx.conj_residual(&q_next, &hpert_next, &r_next, &dplus_next)?;

    // closed-form split R' + R'' of the new remainder
    let vm = vinv.sub(&ctx.id)?;
    let r_prime = g.smooth_complement(theta_next);
    let r_double = match p.mode {
        Mode::Inverse => {
            let dw = w.commutator_with_diagonal(ctx.d)?;
            let rkw = rk.mul(w)?;
            let r1 = vm.mul(&dw)?.add(&vm.mul(&rkw)?)?.add(&vm.mul(rk)?)?.add(&rkw)?;
            let y = xt.add(&xd)?;
            let yw = y.mul(w)?;
            let r2 = vm.mul(&yw)?.add(&vm.mul(&y)?)?.add(&yw)?;
            r1.add(&r2)?
        }
        Mode::Direct => {
            let full_g = g.add(&dk.to_operator())?;
            vm.mul(&r_prime)?.add(&vinv.mul(&full_g.mul(w)?)?)?.add(&vm.mul(&dk.to_operator())?)?
        }
    };
    let decomposition = r_next.sub(&r_prime)?.sub(&r_double)?.sobolev_norm(0.0);

    let mut row = LedgerRow::new(k + 1, theta_next);
    let w_norms = w.sobolev_norms(grid);
    let vi_norms = vm.sobolev_norms(grid);
    let mut r_grid = vec![0.0];
    r_grid.extend(grid.iter().copied());
    let r_norms = r_next.sobolev_norms(&r_grid);
    let q_dev = q_next.sub(&ctx.id)?.sobolev_norms(grid);
    let xt_norms = xt.sobolev_norms(grid);
    let xd_norms = xd.sobolev_norms(grid);
    let q_bound: Vec<f64> = grid
        .iter()
        .zip(&state.q_bound)
        .map(|(s, b)| b + pow(theta_k, s - p.alpha + p.tau + 6.0 * p.delta))
        .collect();
    for (i, &s) in grid.iter().enumerate() {
        row.push("W", Some(s), w_norms[i], Some(pow(theta_k, s - p.alpha + p.tau + 4.0 * p.delta)), "theta_{k-1}^{s-alpha+tau+4delta}");
    }
    for (i, &s) in grid.iter().enumerate() {
        row.push(
            "Vinv-I",
            Some(s),
            vi_norms[i],
            Some(2.0 * ctx.tc.k1(s) * pow(theta_k, s - p.alpha + p.tau + 4.0 * p.delta)),
            "2 K1(s) theta_{k-1}^{s-alpha+tau+4delta}",
        );
    }
    row.push("R", Some(0.0), r_norms[0], None, "");
    for (i, &s) in grid.iter().enumerate() {
        row.push("R", Some(s), r_norms[i + 1], Some(pow(theta_next, s - p.alpha)), "theta_k^{s-alpha}");
    }
    row.push("D", Some(0.0), dk.norm(), Some(3.0 * pow(theta_k, p.alpha0 - p.alpha)), "3 theta_{k-1}^{alpha0-alpha}");
    for (i, &s) in grid.iter().enumerate() {
        row.push("Q-I", Some(s), q_dev[i], Some(q_bound[i]), "sum_{l<=k} theta_{l-1}^{s-alpha+tau+6delta}");
    }
    for (i, &s) in grid.iter().enumerate() {
        row.push("QinvTQ", Some(s), xt_norms[i], Some(pow(theta_k, s - p.alpha)), "theta_{k-1}^{s-alpha}");
    }
    for (i, &s) in grid.iter().enumerate() {
        row.push("QinvDQ", Some(s), xd_norms[i], Some(qdq_bound(p, theta_k, s)), qdq_tag(p, s));
    }
    row.push("conj_residual", None, conj, Some(CONJUGATION_TOLERANCE * (1.0 + h_norm)), "1e-9 (1 + |H_k|_0)");
    row.push("decomposition", None, decomposition, Some(DECOMPOSITION_TOLERANCE), "1e-9");
    let health = q_next.mul(&qinv_next)?.sub(&ctx.id)?.sobolev_norm(0.0);
    row.push("QQinv-I", None, health, None, "");
    ctx.theory_guard(&row)?;

    let info = StepInfo {
        k: k + 1,
        fixed_point_method: fp.as_ref().map(|f| f.method),
        fixed_point_iterations: fp.as_ref().map_or(0, |f| f.iterations),
        fixed_point_defect: fp.as_ref().map_or(0.0, |f| f.final_defect),
        fixed_point_direct_agreement: fp.as_ref().map_or(0.0, |f| f.direct_agreement),
        fixed_point_bound_margin: fp.as_ref().map(|f| f.bound_margin),
        inverse_method: inv.method,
        neumann_terms: inv.terms,
        neumann_smallness: inv.smallness,
        neumann_residual: inv.residual,
        condition_number: inv.condition_number,
        generator_residual: gen.residual_offdiag,
        generator_bound_margins: gen.bound_margins.clone(),
    };
    let next = IterationState {
        k: k + 1,
        theta_k: theta_next,
        q: q_next,
        qinv: qinv_next,
        hpert: hpert_next,
        r: r_next,
        dplus: dplus_next,
        q_bound,
    };
    Ok((next, row, info))
}

/// Runs the scheme to convergence; see [`run_with_observer`].
pub fn run(t: &LatticeOperator, d: &DiagonalOperator, params: &SchemeParams) -> Result<SchemeResult> {
    run_with_observer(t, d, params, |_, _| Ok(()))
}

/// Runs until every slice is absorbed (`theta_{k-1} >= 2N`) and
/// `|R_k|_0 <= stop_tol`, or `max_steps` is reached. `observe` sees the
/// state and ledger row after every step.
///
/// The distal property of `D` is the caller's responsibility; coincident
/// divisors surface as [`Error::DistalViolation`].
pub fn run_with_observer<F>(t: &LatticeOperator, d: &DiagonalOperator, params: &SchemeParams, mut observe: F) -> Result<SchemeResult>
where
    F: FnMut(&IterationState, &LedgerRow) -> Result<()>,
{
    let lattice = t.lattice().clone();
    let dim = lattice.dimension();
    let tc = TameConstants::new(dim, params.alpha0)?;
    let ctx = context(t, d, params, tc)?;
    let t_high = t.sobolev_norm(params.alpha + 4.0 * params.delta);
    if params.theory_checks {
        let t_low = t.sobolev_norm(params.alpha + 3.0 * params.delta);
        let input = TheoryInput::from_params(params, dim, t_high, t_low);
        if let Some(c) = check_theory_conditions(&input)?.into_iter().find(|c| c.effective && !c.holds) {
            return Err(Error::TheoryViolation(format!("{}: {} (margin {:e})", c.name, c.statement, c.margin)));
        }
    }
    let t0 = hopping_slice(t, 0, params);
    let (mut state, init) = initial(&ctx, &t0)?;
    observe(&state, &init.row)?;
    let mut ledger = vec![init.row];
    let mut steps = vec![init.info];
    let max_offset = lattice.max_offset() as f64;
    let converged = loop {
        let absorbed = params.theta(state.k - 1) >= max_offset;
        let r0 = ledger.last().expect("row").norm("R", Some(0.0));
        if absorbed && r0 <= params.stop_tol {
            break true;
        }
        if state.k >= params.max_steps {
            break false;
        }
        let (next, row, info) = step(&ctx, &state)?;
        log::debug!("step {}: |R|_0 = {:e}", row.k, row.norm("R", Some(0.0)));
        observe(&next, &row)?;
        ledger.push(row);
        steps.push(info);
        state = next;
    };
    let slices_absorbed = params.theta(state.k - 1) >= max_offset;
    let mut sum = LatticeOperator::zeros(&lattice, t.policy().clone());
    for l in 0..state.k {
        sum = sum.add(&hopping_slice(t, l, params))?;
    }
    let telescoping_defect = sum.sub(t)?.max_abs();

    let IterationState { q, qinv, r, dplus, .. } = state;
    let base = t.add(&ctx.d_op)?;
    let h = match params.mode {
        Mode::Inverse => base.add(&dplus.to_operator())?,
        Mode::Direct => base,
    };
    let target = match params.mode {
        Mode::Inverse => ctx.d_op.clone(),
        Mode::Direct => ctx.d_op.add(&dplus.to_operator())?,
    };
    let master_defect = qinv.mul(&h.mul(&q)?)?.sub(&target)?.sub(&r)?.sobolev_norm(0.0);

    let s_diag = (params.alpha - params.tau - 7.0 * params.delta).max(0.0);
    let qplus_deviation = q.sub(&ctx.id)?.sobolev_norm(s_diag);
    let coupling_scale = t_high.powf(params.delta / (params.alpha - params.alpha0));
    let qplus = QplusDiagnostic {
        s: s_diag,
        qplus_deviation,
        coupling_scale,
        ratio: if coupling_scale > 0.0 { qplus_deviation / coupling_scale } else { 0.0 },
    };

    let mut result = SchemeResult {
        mode: params.mode,
        params: params.clone(),
        t: t.clone(),
        d: d.clone(),
        q_plus: q,
        q_plus_inv: qinv,
        d_plus: dplus,
        final_residual: r,
        ledger,
        steps,
        converged,
        slices_absorbed,
        telescoping_defect,
        master_defect,
        qplus,
        unitary: None,
    };
    if converged && t.is_symmetric() && t.is_real() && d.is_real() {
        match unitarize(&result) {
            Ok(u) => result.unitary = Some(u),
            Err(e) => log::warn!("unitarization skipped: {e}"),
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{LatticeBox, NormPolicy};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn slices_follow_the_radii() {
        let b = LatticeBox::new(1, 8, 8).unwrap();
        let t = LatticeOperator::from_fn(&b, NormPolicy::Sup, |i, j| c(if i == j { 0.0 } else { 1.0 }));
        let p = SchemeParams::for_power_law(1, 4.0, 1.0, 0.3, 0.05, 0.6);
        let t1 = hopping_slice(&t, 1, &p);
        let present: Vec<i64> = (1..=16).filter(|&m| t1.diagonal(&[m]).sup().unwrap_or(0.0) > 0.0).collect();
        assert_eq!(present, vec![3, 4]);
        let mut sum = LatticeOperator::zeros(&b, NormPolicy::Sup);
        for l in 0..=3 {
            sum = sum.add(&hopping_slice(&t, l, &p)).unwrap();
        }
        assert_eq!(sum, t.smooth(p.theta(3)));
        sum = sum.add(&hopping_slice(&t, 4, &p)).unwrap();
        assert_eq!(sum, t);
    }

    #[test]
    fn single_entry_initial_step() {
        let b = LatticeBox::new(1, 2, 2).unwrap();
        let d = DiagonalOperator::from_real(&b, NormPolicy::Sup, &[0.0, 1.0, 3.0, 7.0, 15.0]).unwrap();
        let mut t0 = LatticeOperator::zeros(&b, NormPolicy::Sup);
        t0.set(1, 2, c(0.01));
        let p = SchemeParams::for_power_law(1, 4.0, 1.0, 0.3, 0.05, 0.6);
        let init = initial_step(&t0, &d, &p).unwrap();
        assert_eq!(init.w1.get(1, 2), c(0.01 / (3.0 - 1.0)));
        assert!(init.closed_form_defect < 1e-16);
    }
}
