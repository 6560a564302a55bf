//! Row-action iteration driver.
//!
//! Six methods share one loop:
//!
//! | method     | rows per step            | update                         |
//! |------------|--------------------------|--------------------------------|
//! | `Kaczmarz` | cyclic `k mod m`         | single-row projection          |
//! | `Eta`      | Gaussian sketch of all   | block step along `A^* eta`     |
//! | `Mwrk`     | argmax weighted loss     | single-row projection          |
//! | `Mmwrk`    | argmax weighted loss     | single-row + heavy-ball term   |
//! | `Fdbk`     | relaxed greedy set       | block step along `A^* r_U`     |
//! | `Mfdbk`    | relaxed greedy set       | block step + heavy-ball term   |
//!
//! The residual `r = b - A x` is carried along by recurrence instead of being
//! recomputed: a single-row step moves it by `A A_i^*` and a block step by
//! `A (A^* eta)`. `A A^*` is never formed. Every `refresh_period` steps, and
//! once more before convergence is declared, the residual is recomputed from
//! scratch to wipe out accumulated rounding drift.
//!
//! The momentum term is skipped entirely when `beta == 0`, so `Mmwrk` and
//! `Mfdbk` at `(alpha, beta) = (1, 0)` execute exactly the same floating-point
//! operations as `Mwrk` and `Fdbk`.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greedy::{build_eta, greedy_set, row_losses, Eta, IndexSet, LossVector};
use crate::matrix::{residual, RowMatrix};
use crate::rng::RngState;
use crate::scalar::{dist_sq, norm_sq, Scalar};
use crate::theory::beta_upper_bound;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    Kaczmarz,
    Eta,
    Mwrk,
    Mmwrk,
    Fdbk,
    Mfdbk,
}

impl SolverMethod {
    pub const ALL: [SolverMethod; 6] = [
        SolverMethod::Kaczmarz,
        SolverMethod::Eta,
        SolverMethod::Mwrk,
        SolverMethod::Mmwrk,
        SolverMethod::Fdbk,
        SolverMethod::Mfdbk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverMethod::Kaczmarz => "kaczmarz",
            SolverMethod::Eta => "eta",
            SolverMethod::Mwrk => "mwrk",
            SolverMethod::Mmwrk => "mmwrk",
            SolverMethod::Fdbk => "fdbk",
            SolverMethod::Mfdbk => "mfdbk",
        }
    }

    pub fn has_momentum(self) -> bool {
        matches!(self, SolverMethod::Mmwrk | SolverMethod::Mfdbk)
    }

    pub fn is_block(self) -> bool {
        matches!(
            self,
            SolverMethod::Eta | SolverMethod::Fdbk | SolverMethod::Mfdbk
        )
    }

    /// `(alpha, beta)` used when the caller does not override them.
    pub fn default_alpha_beta(self) -> (f64, f64) {
        match self {
            SolverMethod::Mmwrk => (0.75, 0.5),
            SolverMethod::Mfdbk => (0.5, 0.5),
            _ => (1.0, 0.0),
        }
    }

    /// The momentum-free method with the same selection rule.
    pub fn baseline(self) -> SolverMethod {
        match self {
            SolverMethod::Mmwrk => SolverMethod::Mwrk,
            SolverMethod::Mfdbk => SolverMethod::Fdbk,
            other => other,
        }
    }
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Step size in (0, 2).
    pub alpha: f64,
    /// Heavy-ball weight; must be zero for the momentum-free methods.
    pub beta: f64,
    /// Relaxation of the greedy set, in [0, 1]. Block methods only.
    pub theta: f64,
    /// Threshold on the squared relative error.
    pub rse_tol: f64,
    pub max_iters: usize,
    pub refresh_period: usize,
    pub record_history: bool,
    /// Seed for the Gaussian sketch of `Eta`.
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(method: SolverMethod) -> Self {
        let (alpha, beta) = method.default_alpha_beta();
        SolverConfig {
            method,
            alpha,
            beta,
            theta: 0.5,
            rse_tol: 1e-12,
            max_iters: 100_000,
            refresh_period: 5000,
            record_history: false,
            seed: 0,
        }
    }

    pub fn with_alpha_beta(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 2), got {}", self.alpha)));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::invalid(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if self.beta != 0.0 && !self.method.has_momentum() {
            return Err(Error::invalid(format!(
                "method {} has no momentum term; use mmwrk or mfdbk for beta = {}",
                self.method, self.beta
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::invalid(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        if !(self.rse_tol >= 0.0) {
            return Err(Error::invalid("rse_tol must be >= 0"));
        }
        if self.refresh_period == 0 {
            return Err(Error::invalid("refresh_period must be >= 1"));
        }
        Ok(())
    }
}

/// Current and previous iterate with their maintained residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState<T> {
    pub x: Vec<T>,
    pub x_prev: Vec<T>,
    pub r: Vec<T>,
    pub r_prev: Vec<T>,
    /// Accepted steps so far.
    pub k: usize,
}

impl<T: Scalar> IterateState<T> {
    /// `x = x_prev = 0`, `r = r_prev = b`.
    pub fn zero(n: usize, b: &[T]) -> Self {
        IterateState {
            x: vec![T::zero(); n],
            x_prev: vec![T::zero(); n],
            r: b.to_vec(),
            r_prev: b.to_vec(),
            k: 0,
        }
    }

    /// Starts from `x = x_prev = x0`.
    pub fn from_initial(a: &RowMatrix<T>, b: &[T], x0: &[T]) -> Result<Self> {
        let r = residual(a, b, x0)?;
        Ok(IterateState {
            x: x0.to_vec(),
            x_prev: x0.to_vec(),
            r_prev: r.clone(),
            r,
            k: 0,
        })
    }

    fn check(&self, a: &RowMatrix<T>) -> Result<()> {
        let (m, n) = (a.nrows(), a.ncols());
        for (what, expected, got) in [
            ("iterate", n, self.x.len()),
            ("previous iterate", n, self.x_prev.len()),
            ("residual", m, self.r.len()),
            ("previous residual", m, self.r_prev.len()),
        ] {
            if expected != got {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }
}

/// `r <- b - A x`, `r_prev <- b - A x_prev`.
pub fn refresh_residual<T: Scalar>(
    state: &mut IterateState<T>,
    a: &RowMatrix<T>,
    b: &[T],
) -> Result<()> {
    state.check(a)?;
    state.r = residual(a, b, &state.x)?;
    state.r_prev = residual(a, b, &state.x_prev)?;
    Ok(())
}

/// Scratch vectors reused across steps.
#[derive(Debug, Clone)]
struct Workspace<T> {
    dir_n: Vec<T>,
    dir_m: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    fn new(m: usize, n: usize) -> Self {
        Workspace {
            dir_n: vec![T::zero(); n],
            dir_m: vec![T::zero(); m],
        }
    }
}

/// `v <- v + step + beta (v - v_prev)` and `v_prev <- old v`.
#[inline]
fn heavy_ball_update<T: Scalar>(v: &mut [T], v_prev: &mut [T], step: &[T], sign: f64, coef: T, beta: f64) {
    if beta == 0.0 {
        for ((x, xp), &d) in v.iter_mut().zip(v_prev.iter_mut()).zip(step) {
            *xp = *x;
            *x += (coef * d).scale(sign);
        }
    } else {
        for ((x, xp), &d) in v.iter_mut().zip(v_prev.iter_mut()).zip(step) {
            let old = *x;
            *x = old + (coef * d).scale(sign) + (old - *xp).scale(beta);
            *xp = old;
        }
    }
}

fn single_row_step_ws<T: Scalar>(
    state: &mut IterateState<T>,
    a: &RowMatrix<T>,
    i: usize,
    alpha: f64,
    beta: f64,
    ws: &mut Workspace<T>,
) {
    // h = r_i / ||A_i||^2; direction A_i^* in x, A A_i^* in r.
    let h = state.r[i].scale(1.0 / a.row_sq_norms()[i]);
    let coef = h.scale(alpha);
    ws.dir_n.iter_mut().for_each(|v| *v = T::zero());
    a.add_conj_row(i, T::from_real(1.0), &mut ws.dir_n);
    a.matvec_into(&ws.dir_n, &mut ws.dir_m);
    heavy_ball_update(&mut state.x, &mut state.x_prev, &ws.dir_n, 1.0, coef, beta);
    heavy_ball_update(&mut state.r, &mut state.r_prev, &ws.dir_m, -1.0, coef, beta);
    state.k += 1;
}

/// One relaxed single-row step with heavy-ball momentum:
/// `x+ = x + alpha r_i / ||A_i||^2 A_i^* + beta (x - x_prev)`.
pub fn single_row_step<T: Scalar>(
    state: &mut IterateState<T>,
    a: &RowMatrix<T>,
    i: usize,
    alpha: f64,
    beta: f64,
) -> Result<()> {
    state.check(a)?;
    if i >= a.nrows() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: a.nrows(),
        });
    }
    let mut ws = Workspace::new(a.nrows(), a.ncols());
    single_row_step_ws(state, a, i, alpha, beta, &mut ws);
    Ok(())
}

/// Quantities of one block step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockStepInfo<T> {
    /// `eta^* r` before the step.
    pub eta_dot_r: T,
    /// `||A^* eta||^2`.
    pub sketch_norm_sq: f64,
}

fn eta_block_step_ws<T: Scalar>(
    state: &mut IterateState<T>,
    a: &RowMatrix<T>,
    eta: &Eta<T>,
    alpha: f64,
    beta: f64,
    ws: &mut Workspace<T>,
) -> Result<BlockStepInfo<T>> {
    ws.dir_n.iter_mut().for_each(|v| *v = T::zero());
    for (&i, &e) in eta.support.as_slice().iter().zip(&eta.values) {
        a.add_conj_row(i, e, &mut ws.dir_n);
    }
    let sketch_norm_sq = norm_sq(&ws.dir_n);
    if sketch_norm_sq == 0.0 {
        return Err(Error::DegenerateSketch);
    }
    let eta_dot_r = eta.dot_conj(&state.r);
    // eta^* r / ||A^* eta||^2 replaces the r_U^T (A A^*)_{U,U} r_U quotient.
    let coef = eta_dot_r.scale(alpha / sketch_norm_sq);
    a.matvec_into(&ws.dir_n, &mut ws.dir_m);
    heavy_ball_update(&mut state.x, &mut state.x_prev, &ws.dir_n, 1.0, coef, beta);
    heavy_ball_update(&mut state.r, &mut state.r_prev, &ws.dir_m, -1.0, coef, beta);
    state.k += 1;
    Ok(BlockStepInfo {
        eta_dot_r,
        sketch_norm_sq,
    })
}

/// One block step along `g = A^* eta`:
/// `x+ = x + alpha (eta^* r / ||g||^2) g + beta (x - x_prev)`.
pub fn eta_block_step<T: Scalar>(
    state: &mut IterateState<T>,
    a: &RowMatrix<T>,
    eta: &Eta<T>,
    alpha: f64,
    beta: f64,
) -> Result<BlockStepInfo<T>> {
    state.check(a)?;
    if eta.len != a.nrows() {
        return Err(Error::DimensionMismatch {
            what: "eta",
            expected: a.nrows(),
            got: eta.len,
        });
    }
    let mut ws = Workspace::new(a.nrows(), a.ncols());
    eta_block_step_ws(state, a, eta, alpha, beta, &mut ws)
}

/// What one iteration of [`RowActionSolver::step`] did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<T> {
    /// Iteration index `k` of the pre-step iterate.
    pub k: usize,
    /// Losses of the pre-step residual.
    pub loss: LossVector,
    /// Rows that defined the step: the single row, or the support of eta.
    pub selected: IndexSet,
    /// Block methods only.
    pub block: Option<BlockStepInfo<T>>,
    /// `||eta||^2` (block methods only).
    pub eta_norm_sq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome<T> {
    Stepped(StepRecord<T>),
    /// The maintained residual is exactly zero; no row can be selected.
    ZeroResidual,
    /// `A^* eta` vanished; the block step is undefined.
    Stalled,
}

/// Stateful solver over a borrowed system, advanced one step at a time.
#[derive(Debug, Clone)]
pub struct RowActionSolver<'a, T> {
    a: &'a RowMatrix<T>,
    b: &'a [T],
    config: SolverConfig,
    state: IterateState<T>,
    ws: Workspace<T>,
    rng: RngState,
}

impl<'a, T: Scalar> RowActionSolver<'a, T> {
    /// Starts from `x = x_prev = 0`.
    pub fn new(a: &'a RowMatrix<T>, b: &'a [T], config: SolverConfig) -> Result<Self> {
        config.validate()?;
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                what: "right-hand side",
                expected: a.nrows(),
                got: b.len(),
            });
        }
        Ok(RowActionSolver {
            a,
            b,
            state: IterateState::zero(a.ncols(), b),
            ws: Workspace::new(a.nrows(), a.ncols()),
            rng: RngState::new(config.seed),
            config,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn state(&self) -> &IterateState<T> {
        &self.state
    }

    pub fn x(&self) -> &[T] {
        &self.state.x
    }

    pub fn into_state(self) -> IterateState<T> {
        self.state
    }

    pub fn refresh(&mut self) {
        // Shapes were checked at construction.
        refresh_residual(&mut self.state, self.a, self.b).expect("consistent shapes");
    }

    pub fn step(&mut self) -> Result<StepOutcome<T>> {
        let k = self.state.k;
        let loss = row_losses(self.a, &self.state.r)?;
        if loss.is_zero() && self.config.method != SolverMethod::Eta {
            return Ok(StepOutcome::ZeroResidual);
        }
        let (alpha, beta) = (self.config.alpha, self.config.beta);
        let record = match self.config.method {
            SolverMethod::Kaczmarz | SolverMethod::Mwrk | SolverMethod::Mmwrk => {
                let i = if self.config.method == SolverMethod::Kaczmarz {
                    k % self.a.nrows()
                } else {
                    loss.max_idx
                };
                single_row_step_ws(&mut self.state, self.a, i, alpha, beta, &mut self.ws);
                StepRecord {
                    k,
                    loss,
                    selected: IndexSet::singleton(i),
                    block: None,
                    eta_norm_sq: None,
                }
            }
            SolverMethod::Fdbk | SolverMethod::Mfdbk => {
                let set = greedy_set(&loss, self.config.theta)?;
                let eta = build_eta(&self.state.r, &set)?;
                let eta_norm_sq = eta.norm_sq();
                match eta_block_step_ws(&mut self.state, self.a, &eta, alpha, beta, &mut self.ws) {
                    Ok(info) => StepRecord {
                        k,
                        loss,
                        selected: set,
                        block: Some(info),
                        eta_norm_sq: Some(eta_norm_sq),
                    },
                    Err(Error::DegenerateSketch) => return Ok(StepOutcome::Stalled),
                    Err(e) => return Err(e),
                }
            }
            SolverMethod::Eta => {
                let m = self.a.nrows();
                let eta = Eta {
                    len: m,
                    support: IndexSet::all(m),
                    values: (0..m).map(|_| T::from_real(self.rng.normal())).collect(),
                };
                let eta_norm_sq = eta.norm_sq();
                match eta_block_step_ws(&mut self.state, self.a, &eta, alpha, beta, &mut self.ws) {
                    Ok(info) => StepRecord {
                        k,
                        loss,
                        selected: eta.support,
                        block: Some(info),
                        eta_norm_sq: Some(eta_norm_sq),
                    },
                    Err(Error::DegenerateSketch) => return Ok(StepOutcome::Stalled),
                    Err(e) => return Err(e),
                }
            }
        };
        if self.state.k.is_multiple_of(self.config.refresh_period) {
            self.refresh();
        }
        Ok(StepOutcome::Stepped(record))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    ZeroResidual,
    Stalled,
    /// The error measure overflowed or became NaN.
    Diverged,
}

/// Which quantity the stopping rule measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCriterion {
    /// `||x - x*||^2 / ||x*||^2`.
    SolutionError,
    /// `||b - A x||^2 / ||b||^2`, used when no reference solution is given.
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub k: usize,
    pub rse: f64,
    /// Rows used by the step that produced iterate `k` (0 for the start).
    pub set_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: SolverMethod,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_rse: f64,
    pub rse_tol: f64,
    pub criterion: StopCriterion,
    pub stop_reason: StopReason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<HistoryEntry>>,
    #[serde(skip)]
    pub wall_time: Duration,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome<T> {
    pub x: Vec<T>,
    pub report: SolveReport,
}

/// Stopping quantity for the current iterate.
pub(crate) struct ErrorMeter<'a, T> {
    x_star: Option<&'a [T]>,
    denom: f64,
}

impl<'a, T: Scalar> ErrorMeter<'a, T> {
    pub(crate) fn new(x_star: Option<&'a [T]>, b: &[T]) -> Self {
        let raw = match x_star {
            Some(xs) => norm_sq(xs),
            None => norm_sq(b),
        };
        ErrorMeter {
            x_star,
            denom: if raw > 0.0 { raw } else { 1.0 },
        }
    }

    pub(crate) fn criterion(&self) -> StopCriterion {
        match self.x_star {
            Some(_) => StopCriterion::SolutionError,
            None => StopCriterion::Residual,
        }
    }

    pub(crate) fn measure(&self, state: &IterateState<T>) -> f64 {
        match self.x_star {
            Some(xs) => dist_sq(&state.x, xs) / self.denom,
            None => norm_sq(&state.r) / self.denom,
        }
    }
}

fn momentum_warnings(config: &SolverConfig) -> Vec<String> {
    if !config.method.has_momentum() || config.beta == 0.0 {
        return Vec::new();
    }
    // The admissible bound grows with rho, so rho = 1 bounds it for every matrix.
    match beta_upper_bound(config.alpha, 1.0) {
        Ok(bound) if config.beta >= bound => vec![format!(
            "beta = {} is at or above {:.6}, the largest momentum weight covered by the \
             two-term contraction bound for alpha = {}; convergence is empirical only",
            config.beta, bound, config.alpha
        )],
        _ => Vec::new(),
    }
}

/// Runs `config.method` from zero until the stopping rule fires.
///
/// With `x_star` the rule is `||x - x*||^2 / ||x*||^2 <= rse_tol`; without it
/// the residual ratio `||r||^2 / ||b||^2` is used instead.
pub fn solve<T: Scalar>(
    a: &RowMatrix<T>,
    b: &[T],
    x_star: Option<&[T]>,
    config: &SolverConfig,
) -> Result<SolveOutcome<T>> {
    solve_observed(a, b, x_star, config, |_, _| {})
}

/// Like [`solve`], calling `observer(state_after_step, record)` after every step.
pub fn solve_observed<T: Scalar>(
    a: &RowMatrix<T>,
    b: &[T],
    x_star: Option<&[T]>,
    config: &SolverConfig,
    mut observer: impl FnMut(&IterateState<T>, &StepRecord<T>),
) -> Result<SolveOutcome<T>> {
    if let Some(xs) = x_star {
        if xs.len() != a.ncols() {
            return Err(Error::DimensionMismatch {
                what: "reference solution",
                expected: a.ncols(),
                got: xs.len(),
            });
        }
    }
    let started = Instant::now();
    let mut solver = RowActionSolver::new(a, b, config.clone())?;
    let meter = ErrorMeter::new(x_star, b);
    let mut history = config.record_history.then(Vec::new);
    let mut rse = meter.measure(solver.state());
    if let Some(h) = history.as_mut() {
        h.push(HistoryEntry {
            k: 0,
            rse,
            set_size: 0,
        });
    }

    let stop_reason = loop {
        if rse <= config.rse_tol {
            solver.refresh();
            rse = meter.measure(solver.state());
            if rse <= config.rse_tol {
                break StopReason::Converged;
            }
        }
        if solver.state().k >= config.max_iters {
            break StopReason::MaxIterations;
        }
        match solver.step()? {
            StepOutcome::Stepped(rec) => {
                rse = meter.measure(solver.state());
                if let Some(h) = history.as_mut() {
                    h.push(HistoryEntry {
                        k: solver.state().k,
                        rse,
                        set_size: rec.selected.len(),
                    });
                }
                observer(solver.state(), &rec);
                if !rse.is_finite() {
                    break StopReason::Diverged;
                }
            }
            StepOutcome::ZeroResidual => break StopReason::ZeroResidual,
            StepOutcome::Stalled => break StopReason::Stalled,
        }
    };

    let iterations = solver.state().k;
    let report = SolveReport {
        method: config.method,
        alpha: config.alpha,
        beta: config.beta,
        iterations,
        converged: rse <= config.rse_tol,
        final_rse: rse,
        rse_tol: config.rse_tol,
        criterion: meter.criterion(),
        stop_reason,
        history,
        wall_time: started.elapsed(),
        warnings: momentum_warnings(config),
    };
    Ok(SolveOutcome {
        x: solver.into_state().x,
        report,
    })
}
