//! Proximal ADMM for the box-constrained `l0`-fidelity TV model, and the
//! convex `l1`-fidelity baseline built on the same skeleton.
//!
//! The `l0` solver works on the lifted problem
//!
//! ```text
//! min  <1, 1 - v> + lambda ||x||_{p,1}
//! s.t. grad u = x,  K u - b = y,  o . v . |y| = 0,  0 <= u, v <= 1
//! ```
//!
//! with multipliers `xi`, `zeta`, `pi` for the three equality constraints.
//! Each iteration updates `(u, v)` with proximal terms `D = L I - beta
//! (grad^T grad + K^T K)` and `E = mu I`, then `(x, y)`, then the
//! multipliers with step `gamma * beta`. The penalty grows by `sqrt(10)`
//! every 30 iterations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{clip01, ImageGrid};
use crate::noise::OutlierMask;
use crate::operators::{grad_adjoint_into, grad_into, LinearOp, GRAD_SQ_NORM_BOUND};
use crate::prox::{
    shrink_x, sign, update_u, update_v, update_y, update_y_l1, ShrinkageParams, TvNorm, UBlock,
};

/// Which primal iterates feed the multiplier ascent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiplierUpdate {
    /// Residuals of the iterates just computed (standard ADMM).
    Newest,
    /// Residuals of the iterates from the start of the iteration.
    Lagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda: f64,
    pub norm: TvNorm,
    pub gamma: f64,
    pub mu: f64,
    pub beta0: f64,
    pub beta_period: usize,
    pub beta_factor: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Bound on `||grad||^2` used in `L`; 8 is tight, 16 is the loose
    /// triangle-inequality bound.
    pub grad_sq_bound: f64,
    pub multiplier_update: MultiplierUpdate,
    /// Magnitudes at or below this count as zero in the reported `l0` term.
    pub count_eps: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.1,
            norm: TvNorm::Anisotropic,
            gamma: 1.618,
            mu: 0.01,
            beta0: 1.0,
            beta_period: 30,
            beta_factor: 10f64.sqrt(),
            max_iters: 300,
            tol: 1.0 / 255.0,
            grad_sq_bound: GRAD_SQ_NORM_BOUND,
            multiplier_update: MultiplierUpdate::Newest,
            count_eps: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.gamma > 0.0 && self.gamma < 2.0) {
            return bad(format!("gamma must lie in (0, 2), got {}", self.gamma));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return bad(format!("beta0 must be positive, got {}", self.beta0));
        }
        if !(self.beta_factor >= 1.0 && self.beta_factor.is_finite()) {
            return bad(format!("beta_factor must be >= 1, got {}", self.beta_factor));
        }
        if self.beta_period == 0 {
            return bad("beta_period must be positive".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.grad_sq_bound >= GRAD_SQ_NORM_BOUND) {
            return bad(format!(
                "grad_sq_bound {} is below the certified bound {GRAD_SQ_NORM_BOUND}",
                self.grad_sq_bound
            ));
        }
        if !(self.count_eps >= 0.0) {
            return bad(format!("count_eps must be nonnegative, got {}", self.count_eps));
        }
        Ok(())
    }

    /// Penalty after `k` completed iterations:
    /// `beta0 * beta_factor^floor(k / beta_period)`.
    ///
    /// The power is formed by repeated multiplication because `powi` may
    /// round differently between builds.
    pub fn beta_at(&self, k: usize) -> f64 {
        let mut growth = 1.0;
        for _ in 0..k / self.beta_period {
            growth *= self.beta_factor;
        }
        self.beta0 * growth
    }

    /// `L = mu + beta ||grad||^2 + beta ||K||^2` with certified bounds.
    pub fn lipschitz(&self, beta: f64, op: &LinearOp) -> f64 {
        self.mu + beta * self.grad_sq_bound + beta * op.sq_norm_bound()
    }
}

/// Observation, operator and prior shared by every iteration.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub b: &'a ImageGrid,
    pub op: &'a LinearOp,
    pub mask: &'a OutlierMask,
}

impl<'a> Problem<'a> {
    pub fn new(b: &'a ImageGrid, op: &'a LinearOp, mask: &'a OutlierMask) -> Result<Self> {
        if mask.len() != b.len() {
            return Err(Error::ShapeMismatch {
                expected_rows: b.len(),
                expected_cols: 1,
                rows: mask.len(),
                cols: 1,
            });
        }
        b.ensure_unit_range()?;
        op.check_fits(b.rows(), b.cols())?;
        Ok(Self { b, op, mask })
    }

    fn rows(&self) -> usize {
        self.b.rows()
    }

    fn cols(&self) -> usize {
        self.b.cols()
    }

    fn n(&self) -> usize {
        self.b.len()
    }

    fn grad(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 2 * self.n()];
        grad_into(u, self.rows(), self.cols(), &mut out);
        out
    }

    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.op.apply_into(u, self.rows(), self.cols(), &mut out);
        out
    }

    fn apply_adjoint(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.op.apply_adjoint_into(w, self.rows(), self.cols(), &mut out);
        out
    }

    fn grad_adjoint(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        grad_adjoint_into(f, self.rows(), self.cols(), &mut out);
        out
    }
}

/// Every primal and dual variable of the lifted problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Length `2n`, stacked like the gradient.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub pi: Vec<f64>,
    pub beta: f64,
    pub k: usize,
}

impl SolverState {
    /// Warm start: `u` is the 3x3 median of `b`, `v = 1`, `x = grad u`,
    /// `y = K u - b`, multipliers zero.
    pub fn initial(problem: &Problem<'_>, cfg: &SolverConfig) -> Self {
        let u = clip01(&problem.b.median3x3()).into_data();
        let x = problem.grad(&u);
        let y: Vec<f64> = problem
            .apply(&u)
            .iter()
            .zip(problem.b.data())
            .map(|(k, b)| k - b)
            .collect();
        let n = problem.n();
        Self {
            u,
            v: vec![1.0; n],
            x,
            y,
            xi: vec![0.0; 2 * n],
            zeta: vec![0.0; n],
            pi: vec![0.0; n],
            beta: cfg.beta_at(0),
            k: 0,
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.u, &self.v, &self.x, &self.y, &self.xi, &self.zeta, &self.pi]
            .iter()
            .all(|vec| vec.iter().all(|v| v.is_finite()))
            && self.beta.is_finite()
    }

    /// `||(xi, zeta, pi)||_2`.
    pub fn multiplier_norm(&self) -> f64 {
        self.xi
            .iter()
            .chain(&self.zeta)
            .chain(&self.pi)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Distances of the KKT inclusions from zero, one per stationarity line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stat_u: f64,
    pub stat_v: f64,
    pub stat_x: f64,
    pub stat_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `||grad u - x||_2`
    pub r_grad: f64,
    /// `||K u - b - y||_2`
    pub r_fid: f64,
    /// `||o . v . |y| ||_2`
    pub r_comp: f64,
    pub kkt: KktResiduals,
}

impl Residuals {
    pub fn max_equality(&self) -> f64 {
        self.r_grad.max(self.r_fid).max(self.r_comp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    /// Count of `|o . (K u - b)| > eps` (or `||K u - b||_1` for the `l1` model).
    pub fidelity: f64,
    pub tv: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub l0_term: f64,
    pub tv_term: f64,
    pub r_grad: f64,
    pub r_fid: f64,
    pub r_comp: f64,
    pub beta: f64,
    pub multiplier_norm: f64,
}

pub const TRACE_CSV_HEADER: &str = "iter,objective,l0_term,tv_term,r_grad,r_fid,r_comp,beta";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// CSV with columns `iter,objective,l0_term,tv_term,r_grad,r_fid,r_comp,beta`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n",
                r.iter, r.objective, r.l0_term, r.tv_term, r.r_grad, r.r_fid, r.r_comp, r.beta
            ));
        }
        s
    }

    /// True when the multiplier norm over the final penalty stage grew by
    /// more than `factor`, a sign the bounded-multiplier assumption fails.
    pub fn multipliers_growing(&self, period: usize, factor: f64) -> bool {
        let n = self.rows.len();
        if n <= period {
            return false;
        }
        let start = self.rows[n - 1 - period].multiplier_norm.max(1.0);
        self.rows[n - 1].multiplier_norm > factor * start
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    /// The final iterate when converged, otherwise the iterate with the
    /// smallest largest equality residual.
    pub u: ImageGrid,
    /// Iteration that produced `u`.
    pub best_iter: usize,
    pub state: SolverState,
    pub trace: Trace,
    /// All equality residuals fell below `tol` before `max_iters`.
    pub converged: bool,
}

impl SolveOutput {
    pub fn iterations(&self) -> usize {
        self.state.k
    }
}

fn norm2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// `||grad u||_{p,1}` for a stacked gradient.
pub fn tv_of_gradient(g: &[f64], norm: TvNorm) -> f64 {
    let n = g.len() / 2;
    match norm {
        TvNorm::Anisotropic => g.iter().map(|v| v.abs()).sum(),
        TvNorm::Isotropic => (0..n).map(|i| g[i].hypot(g[i + n])).sum(),
    }
}

pub fn tv_norm(u: &ImageGrid, norm: TvNorm) -> f64 {
    let mut g = vec![0.0; 2 * u.len()];
    grad_into(u.data(), u.rows(), u.cols(), &mut g);
    tv_of_gradient(&g, norm)
}

fn l0_count(ku: &[f64], b: &[f64], o: &[f64], eps: f64) -> f64 {
    ku.iter()
        .zip(b)
        .zip(o)
        .filter(|((k, b), o)| (*o * (*k - *b)).abs() > eps)
        .count() as f64
}

/// `||o . (K u - b)||_0 + lambda ||grad u||_{p,1}`, counting entries with
/// magnitude above `eps` (0 gives the exact count).
pub fn objective_l0tv(
    u: &ImageGrid,
    b: &ImageGrid,
    op: &LinearOp,
    mask: &OutlierMask,
    lambda: f64,
    norm: TvNorm,
    eps: f64,
) -> Result<ObjectiveTerms> {
    u.same_shape(b)?;
    let ku = op.apply(u)?;
    let fidelity = l0_count(&ku, b.data(), mask.values(), eps);
    let tv = tv_norm(u, norm);
    Ok(ObjectiveTerms {
        fidelity,
        tv,
        total: fidelity + lambda * tv,
    })
}

/// `||K u - b||_1 + lambda ||grad u||_{p,1}`.
pub fn objective_l1tv(
    u: &ImageGrid,
    b: &ImageGrid,
    op: &LinearOp,
    lambda: f64,
    norm: TvNorm,
) -> Result<ObjectiveTerms> {
    u.same_shape(b)?;
    let ku = op.apply(u)?;
    let fidelity: f64 = ku.iter().zip(b.data()).map(|(k, b)| (k - b).abs()).sum();
    let tv = tv_norm(u, norm);
    Ok(ObjectiveTerms {
        fidelity,
        tv,
        total: fidelity + lambda * tv,
    })
}

/// Equality residuals plus the distance of each stationarity inclusion
/// from zero. Box normal cones are handled by the projected-gradient
/// residual `||z - clip(z - g)||`.
pub fn kkt_residuals(
    state: &SolverState,
    problem: &Problem<'_>,
    cfg: &SolverConfig,
) -> Residuals {
    let o = problem.mask.values();
    let b = problem.b.data();
    let gu = problem.grad(&state.u);
    let ku = problem.apply(&state.u);

    let r_grad = norm2(gu.iter().zip(&state.x).map(|(g, x)| g - x));
    let r_fid = norm2(ku.iter().zip(b).zip(&state.y).map(|((k, b), y)| k - b - y));
    let r_comp = norm2(
        o.iter()
            .zip(&state.v)
            .zip(&state.y)
            .map(|((o, v), y)| o * v * y.abs()),
    );

    // 0 in grad^T xi + K^T zeta + N(u)
    let g_u: Vec<f64> = problem
        .grad_adjoint(&state.xi)
        .iter()
        .zip(problem.apply_adjoint(&state.zeta))
        .map(|(a, b)| a + b)
        .collect();
    let stat_u = norm2(
        state
            .u
            .iter()
            .zip(&g_u)
            .map(|(u, g)| u - (u - g).clamp(0.0, 1.0)),
    );

    // 0 in pi . o . |y| - 1 + N(v)
    let stat_v = norm2(state.v.iter().zip(&state.pi).zip(o).zip(&state.y).map(
        |(((v, pi), o), y)| {
            let g = pi * o * y.abs() - 1.0;
            v - (v - g).clamp(0.0, 1.0)
        },
    ));

    // 0 in lambda d||x||_{p,1} - xi
    let lambda = cfg.lambda;
    let n = problem.n();
    let stat_x = match cfg.norm {
        TvNorm::Anisotropic => norm2(state.x.iter().zip(&state.xi).map(|(&x, &xi)| {
            if x != 0.0 {
                xi - lambda * sign(x)
            } else {
                (xi.abs() - lambda).max(0.0)
            }
        })),
        TvNorm::Isotropic => norm2((0..n).map(|i| {
            let (x1, x2) = (state.x[i], state.x[i + n]);
            let (p1, p2) = (state.xi[i], state.xi[i + n]);
            let nx = x1.hypot(x2);
            if nx != 0.0 {
                (p1 - lambda * x1 / nx).hypot(p2 - lambda * x2 / nx)
            } else {
                (p1.hypot(p2) - lambda).max(0.0)
            }
        })),
    };

    // 0 in pi . v . o . d|y| - zeta
    let stat_y = norm2((0..n).map(|i| {
        let a = state.pi[i] * state.v[i] * o[i];
        let (y, z) = (state.y[i], state.zeta[i]);
        if y != 0.0 {
            a * sign(y) - z
        } else {
            (z.abs() - a.abs()).max(0.0)
        }
    }));

    Residuals {
        r_grad,
        r_fid,
        r_comp,
        kkt: KktResiduals {
            stat_u,
            stat_v,
            stat_x,
            stat_y,
        },
    }
}

fn check_inputs(b: &ImageGrid, op: &LinearOp, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    b.ensure_unit_range()?;
    op.check_fits(b.rows(), b.cols())
}

/// Runs the `l0` proximal ADMM until all three equality residuals are at
/// most `tol` or `max_iters` is reached.
pub fn solve_l0tv(
    b: &ImageGrid,
    op: &LinearOp,
    mask: &OutlierMask,
    cfg: &SolverConfig,
) -> Result<SolveOutput> {
    solve_l0tv_with(b, op, mask, cfg, |_, _| {})
}

/// Like [`solve_l0tv`], calling `observer` after every iteration.
pub fn solve_l0tv_with<F>(
    b: &ImageGrid,
    op: &LinearOp,
    mask: &OutlierMask,
    cfg: &SolverConfig,
    observer: F,
) -> Result<SolveOutput>
where
    F: FnMut(&SolverState, &TraceRow),
{
    check_inputs(b, op, cfg)?;
    let problem = Problem::new(b, op, mask)?;
    let state = SolverState::initial(&problem, cfg);
    run_l0tv(&problem, cfg, state, observer)
}

/// Continues the `l0` iteration from an explicit state.
pub fn run_l0tv<F>(
    problem: &Problem<'_>,
    cfg: &SolverConfig,
    state: SolverState,
    mut observer: F,
) -> Result<SolveOutput>
where
    F: FnMut(&SolverState, &TraceRow),
{
    cfg.validate()?;
    drive(problem, cfg, state, l0tv_step, &mut observer)
}

fn feasibility(row: &TraceRow) -> f64 {
    row.r_grad.max(row.r_fid).max(row.r_comp)
}

/// Shared iteration loop: stops on the triple-tolerance rule, aborts on
/// non-finite values and remembers the most feasible iterate.
fn drive<S, F>(
    problem: &Problem<'_>,
    cfg: &SolverConfig,
    mut state: SolverState,
    step: S,
    observer: &mut F,
) -> Result<SolveOutput>
where
    S: Fn(&Problem<'_>, &SolverConfig, &mut SolverState) -> TraceRow,
    F: FnMut(&SolverState, &TraceRow),
{
    let mut trace = Trace::default();
    let mut converged = false;
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    while state.k < cfg.max_iters {
        let row = step(problem, cfg, &mut state);
        if !state.is_finite() || !row.objective.is_finite() {
            return Err(Error::NumericalBlowUp { iteration: state.k });
        }
        observer(&state, &row);
        trace.rows.push(row);
        if feasibility(&row) <= cfg.tol {
            converged = true;
            break;
        }
        if best.as_ref().is_none_or(|(f, _, _)| feasibility(&row) < *f) {
            best = Some((feasibility(&row), state.k, state.u.clone()));
        }
    }
    let (best_iter, u) = match best {
        Some((_, k, u)) if !converged => (k, u),
        _ => (state.k, state.u.clone()),
    };
    Ok(SolveOutput {
        u: problem.b.with_data(u)?,
        best_iter,
        state,
        trace,
        converged,
    })
}

/// One full iteration; returns the trace row of the new iterate.
pub fn l0tv_step(problem: &Problem<'_>, cfg: &SolverConfig, state: &mut SolverState) -> TraceRow {
    let (rows, cols) = (problem.rows(), problem.cols());
    let b = problem.b.data();
    let o = problem.mask.values();
    let beta = state.beta;
    let lagged = cfg.multiplier_update == MultiplierUpdate::Lagged;

    // residuals of the incoming iterate, only needed for the lagged ascent
    let old = lagged.then(|| {
        let gu = problem.grad(&state.u);
        let ku = problem.apply(&state.u);
        (gu, ku, state.x.clone(), state.y.clone(), state.v.clone())
    });

    let u = update_u(&UBlock {
        rows,
        cols,
        u: &state.u,
        x: &state.x,
        y: &state.y,
        xi: &state.xi,
        zeta: &state.zeta,
        b,
        op: problem.op,
        beta,
        lipschitz: cfg.lipschitz(beta, problem.op),
    });
    let v = update_v(&state.v, &state.y, &state.pi, o, beta, cfg.mu);

    let gu = problem.grad(&u);
    let h: Vec<f64> = gu.iter().zip(&state.xi).map(|(g, xi)| g + xi / beta).collect();
    let shrink = ShrinkageParams::from_penalty(cfg.lambda, beta).expect("lambda, beta > 0");
    let x = shrink_x(&h, shrink, cfg.norm);

    let ku = problem.apply(&u);
    let q: Vec<f64> = ku
        .iter()
        .zip(b)
        .zip(&state.zeta)
        .map(|((k, b), z)| k - b + z / beta)
        .collect();
    let w: Vec<f64> = o.iter().zip(&v).map(|(o, v)| o * v).collect();
    let y = update_y(&q, &w, &state.pi, beta);

    let step = cfg.gamma * beta;
    {
        let (gu_a, ku_a, x_a, y_a, v_a) = match &old {
            Some((g, k, x, y, v)) => (g, k, x, y, v),
            None => (&gu, &ku, &x, &y, &v),
        };
        for ((xi, g), x) in state.xi.iter_mut().zip(gu_a).zip(x_a) {
            *xi += step * (g - x);
        }
        for (((z, k), b), y) in state.zeta.iter_mut().zip(ku_a).zip(b).zip(y_a) {
            *z += step * (k - b - y);
        }
        for (((p, o), v), y) in state.pi.iter_mut().zip(o).zip(v_a).zip(y_a) {
            *p += step * (o * v * y.abs());
        }
    }

    let r_grad = norm2(gu.iter().zip(&x).map(|(g, x)| g - x));
    let r_fid = norm2(ku.iter().zip(b).zip(&y).map(|((k, b), y)| k - b - y));
    let r_comp = norm2(o.iter().zip(&v).zip(&y).map(|((o, v), y)| o * v * y.abs()));
    let l0_term = l0_count(&ku, b, o, cfg.count_eps);
    let tv_term = tv_of_gradient(&gu, cfg.norm);

    state.u = u;
    state.v = v;
    state.x = x;
    state.y = y;
    state.k += 1;
    state.beta = cfg.beta_at(state.k);

    TraceRow {
        iter: state.k,
        objective: l0_term + cfg.lambda * tv_term,
        l0_term,
        tv_term,
        r_grad,
        r_fid,
        r_comp,
        beta,
        multiplier_norm: state.multiplier_norm(),
    }
}

/// ADMM for `min ||K u - b||_1 + lambda ||grad u||_{p,1}` over `[0,1]^n`,
/// sharing the `u` and `x` blocks with the `l0` solver. The `y` block is a
/// soft threshold at `1 / beta`; `v` stays at one and `pi` at zero.
/// Trace `l0_term` holds `||K u - b||_1`.
pub fn solve_l1tv(b: &ImageGrid, op: &LinearOp, cfg: &SolverConfig) -> Result<SolveOutput> {
    solve_l1tv_with(b, op, cfg, |_, _| {})
}

pub fn solve_l1tv_with<F>(
    b: &ImageGrid,
    op: &LinearOp,
    cfg: &SolverConfig,
    mut observer: F,
) -> Result<SolveOutput>
where
    F: FnMut(&SolverState, &TraceRow),
{
    check_inputs(b, op, cfg)?;
    let mask = OutlierMask::ones(b.len());
    let problem = Problem::new(b, op, &mask)?;
    let state = SolverState::initial(&problem, cfg);
    drive(&problem, cfg, state, l1tv_step, &mut observer)
}

pub fn l1tv_step(problem: &Problem<'_>, cfg: &SolverConfig, state: &mut SolverState) -> TraceRow {
    let (rows, cols) = (problem.rows(), problem.cols());
    let b = problem.b.data();
    let beta = state.beta;

    let u = update_u(&UBlock {
        rows,
        cols,
        u: &state.u,
        x: &state.x,
        y: &state.y,
        xi: &state.xi,
        zeta: &state.zeta,
        b,
        op: problem.op,
        beta,
        lipschitz: cfg.lipschitz(beta, problem.op),
    });
    let gu = problem.grad(&u);
    let h: Vec<f64> = gu.iter().zip(&state.xi).map(|(g, xi)| g + xi / beta).collect();
    let shrink = ShrinkageParams::from_penalty(cfg.lambda, beta).expect("lambda, beta > 0");
    let x = shrink_x(&h, shrink, cfg.norm);
    let ku = problem.apply(&u);
    let q: Vec<f64> = ku
        .iter()
        .zip(b)
        .zip(&state.zeta)
        .map(|((k, b), z)| k - b + z / beta)
        .collect();
    let y = update_y_l1(&q, beta);

    let step = cfg.gamma * beta;
    for ((xi, g), x) in state.xi.iter_mut().zip(&gu).zip(&x) {
        *xi += step * (g - x);
    }
    for (((z, k), b), y) in state.zeta.iter_mut().zip(&ku).zip(b).zip(&y) {
        *z += step * (k - b - y);
    }

    let r_grad = norm2(gu.iter().zip(&x).map(|(g, x)| g - x));
    let r_fid = norm2(ku.iter().zip(b).zip(&y).map(|((k, b), y)| k - b - y));
    let l1_term: f64 = ku.iter().zip(b).map(|(k, b)| (k - b).abs()).sum();
    let tv_term = tv_of_gradient(&gu, cfg.norm);

    state.u = u;
    state.x = x;
    state.y = y;
    state.k += 1;
    state.beta = cfg.beta_at(state.k);

    TraceRow {
        iter: state.k,
        objective: l1_term + cfg.lambda * tv_term,
        l0_term: l1_term,
        tv_term,
        r_grad,
        r_fid,
        r_comp: 0.0,
        beta,
        multiplier_norm: state.multiplier_norm(),
    }
}
