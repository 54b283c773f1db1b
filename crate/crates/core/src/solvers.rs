//! Penalized least squares and logistic regression.
//!
//! The smooth loss is a sum over rows: `sum (y - Xw - b)^2` or
//! `sum log(1 + e^eta) - y eta` with `eta = Xw + b`. Two algorithms are
//! available:
//!
//! * `cgd`: proximal gradient on the convexified split
//!   `[L(w) - mu/2 |w|^2] + [P(w) + mu/2 |w|^2]`, with backtracking on the
//!   first bracket and the exact scalar prox on the second.
//! * `dca`: difference-of-convex iteration. With `P = s (g - h)`, each outer
//!   step linearizes `h` and solves the convex weighted-l1 subproblem by
//!   ISTA, warm started.
//!
//! For least squares, each run ends with exact coordinate-minimization
//! sweeps ("polish"). A sweep can leave a poor basin that a proximal
//! gradient step cannot, for example a local minimum at zero. The main
//! algorithm restarts from the polished point while that keeps lowering the
//! objective.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::penalty::{FamilyKind, PenaltySpec};
use crate::prox::prox_argmin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Cgd,
    Dca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Ls,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Fixed step; `None` means backtracking from `1 / L_smooth`.
    pub step_size: Option<f64>,
    pub max_iters: usize,
    /// Relative objective change that ends the run.
    pub tol: f64,
    pub inner_max_iters: usize,
    /// Fit an unpenalized intercept.
    pub intercept: bool,
    /// `|w_j| <= zero_tol` counts as zero.
    pub zero_tol: f64,
    /// Coordinate sweeps after the main algorithm (least squares only).
    pub polish: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            algorithm: Algorithm::Cgd,
            step_size: None,
            max_iters: 10_000,
            tol: 1e-12,
            inner_max_iters: 1000,
            intercept: false,
            zero_tol: 1e-8,
            polish: true,
        }
    }
}

impl SolverConfig {
    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 || self.inner_max_iters == 0 {
            return Err(Error::Config("max_iters and inner_max_iters must be at least 1".into()));
        }
        if let Some(eta) = self.step_size {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::Config(format!("step_size must be positive, got {eta}")));
            }
        }
        if !(self.zero_tol >= 0.0) {
            return Err(Error::Config("zero_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Objective at the start point, then after every accepted step.
    pub objective_trace: Vec<f64>,
    pub n_nonzero: usize,
    pub converged: bool,
    pub iterations: usize,
    pub algorithm: Algorithm,
    pub loss: Loss,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the start value")
    }
}

const INNER_TOL: f64 = 1e-8;
const POWER_ITERS: usize = 50;
const MAX_ROUNDS: usize = 10;
const MAX_SWEEPS: usize = 1000;

trait Smooth {
    fn value(&self, w: &DVector<f64>, b: f64) -> f64;
    /// Writes the weight gradient into `g`; returns `(value, d/db)`.
    fn value_grad(&self, w: &DVector<f64>, b: f64, g: &mut DVector<f64>) -> (f64, f64);
    /// Bound on the Hessian's largest eigenvalue.
    fn lipschitz(&self, intercept: bool) -> f64;
}

/// Least squares in Gram form; every evaluation is `O(p^2)`.
struct LsGram {
    g: DMatrix<f64>,
    c: DVector<f64>,
    s: DVector<f64>,
    yy: f64,
    sy: f64,
    n: f64,
}

impl LsGram {
    fn new(data: &Dataset) -> Self {
        let x = &data.x;
        LsGram {
            g: x.tr_mul(x),
            c: x.tr_mul(&data.y),
            s: DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum())),
            yy: data.y.norm_squared(),
            sy: data.y.sum(),
            n: x.nrows() as f64,
        }
    }
}

impl Smooth for LsGram {
    fn value(&self, w: &DVector<f64>, b: f64) -> f64 {
        let gw = &self.g * w;
        w.dot(&gw) - 2.0 * self.c.dot(w) + self.yy + 2.0 * b * self.s.dot(w) - 2.0 * b * self.sy + self.n * b * b
    }

    fn value_grad(&self, w: &DVector<f64>, b: f64, g: &mut DVector<f64>) -> (f64, f64) {
        g.gemv(1.0, &self.g, w, 0.0);
        let sw = self.s.dot(w);
        let value = w.dot(g) - 2.0 * self.c.dot(w) + self.yy + 2.0 * b * sw - 2.0 * b * self.sy + self.n * b * b;
        *g -= &self.c;
        g.axpy(b, &self.s, 1.0);
        *g *= 2.0;
        (value, 2.0 * (sw - self.sy + self.n * b))
    }

    fn lipschitz(&self, intercept: bool) -> f64 {
        2.0 * largest_eigenvalue(&augmented_gram(&self.g, &self.s, self.n, intercept))
    }
}

struct LogisticLoss<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
}

#[inline]
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

impl Smooth for LogisticLoss<'_> {
    fn value(&self, w: &DVector<f64>, b: f64) -> f64 {
        let eta = self.x * w;
        eta.iter().zip(self.y.iter()).map(|(&e, &y)| softplus(e + b) - y * (e + b)).sum()
    }

    fn value_grad(&self, w: &DVector<f64>, b: f64, g: &mut DVector<f64>) -> (f64, f64) {
        let mut eta = self.x * w;
        let mut value = 0.0;
        let mut gb = 0.0;
        for (e, &y) in eta.iter_mut().zip(self.y.iter()) {
            let z = *e + b;
            value += softplus(z) - y * z;
            *e = sigmoid(z) - y;
            gb += *e;
        }
        g.gemv_tr(1.0, self.x, &eta, 0.0);
        (value, gb)
    }

    fn lipschitz(&self, intercept: bool) -> f64 {
        let gram = self.x.tr_mul(self.x);
        let s = DVector::from_iterator(self.x.ncols(), self.x.column_iter().map(|c| c.sum()));
        0.25 * largest_eigenvalue(&augmented_gram(&gram, &s, self.x.nrows() as f64, intercept))
    }
}

fn augmented_gram(g: &DMatrix<f64>, s: &DVector<f64>, n: f64, intercept: bool) -> DMatrix<f64> {
    if !intercept {
        return g.clone();
    }
    let p = g.nrows();
    let mut a = DMatrix::zeros(p + 1, p + 1);
    a.view_mut((0, 0), (p, p)).copy_from(g);
    for j in 0..p {
        a[(j, p)] = s[j];
        a[(p, j)] = s[j];
    }
    a[(p, p)] = n;
    a
}

/// Power iteration from the all-ones vector.
fn largest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut v = DVector::from_element(m.nrows(), 1.0 / (m.nrows() as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERS {
        let mv = m * &v;
        let norm = mv.norm();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = v.dot(&mv);
        v = mv / norm;
    }
    // the Rayleigh quotient can trail the true value; the final norm bounds it from above
    lambda.max((m * &v).norm())
}

struct State {
    w: DVector<f64>,
    b: f64,
    trace: Vec<f64>,
    eta: f64,
    iterations: usize,
}

struct RunOutcome {
    converged: bool,
}

fn check_finite(value: f64, iteration: usize, trace: &[f64]) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence { iteration, trace: trace.to_vec() })
    }
}

fn stopped(prev: f64, next: f64, step: f64, scale: f64, tol: f64) -> bool {
    (prev - next).abs() <= tol * next.abs().max(1.0) && step <= tol.sqrt() * (1.0 + scale)
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

fn cgd<S: Smooth>(sm: &S, spec: &PenaltySpec, cfg: &SolverConfig, st: &mut State) -> Result<RunOutcome> {
    let mu = if spec.lambda() == 0.0 { 0.0 } else { spec.weak_convexity_mu().unwrap_or(0.0) };
    let p = st.w.len();
    let mut g = DVector::zeros(p);
    let mut u = DVector::zeros(p);
    let mut f_prev = *st.trace.last().unwrap();
    for _ in 0..cfg.max_iters {
        st.iterations += 1;
        let (lw, gb) = sm.value_grad(&st.w, st.b, &mut g);
        check_finite(lw, st.iterations, &st.trace)?;
        let half_norm = 0.5 * st.w.norm_squared();
        let f_w = lw - mu * half_norm;
        // gradient of L - mu/2 |w|^2
        g.axpy(-mu, &st.w, 1.0);
        let mut bu;
        loop {
            let eta = st.eta;
            let s = 1.0 / eta + mu;
            for j in 0..p {
                let v = st.w[j] - eta * g[j];
                u[j] = prox_argmin(spec, v / (eta * s), 2.0 / s);
            }
            bu = if cfg.intercept { st.b - eta * gb } else { 0.0 };
            if cfg.step_size.is_some() {
                break;
            }
            let f_u = sm.value(&u, bu) - 0.5 * mu * u.norm_squared();
            let d = &u - &st.w;
            let db = bu - st.b;
            let model = f_w + g.dot(&d) + gb * db + (d.norm_squared() + db * db) / (2.0 * eta);
            if f_u <= model + 1e-14 * f_w.abs().max(1.0) || eta < 1e-300 {
                break;
            }
            st.eta *= 0.5;
        }
        let f_new = sm.value(&u, bu) + spec.sum(u.as_slice());
        check_finite(f_new, st.iterations, &st.trace)?;
        let step = (&u - &st.w).amax().max((bu - st.b).abs());
        std::mem::swap(&mut st.w, &mut u);
        st.b = bu;
        st.trace.push(f_new);
        if stopped(f_prev, f_new, step, inf_norm(&st.w), cfg.tol) {
            return Ok(RunOutcome { converged: true });
        }
        f_prev = f_new;
    }
    Ok(RunOutcome { converged: false })
}

#[inline]
fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn dca<S: Smooth>(sm: &S, spec: &PenaltySpec, cfg: &SolverConfig, st: &mut State) -> Result<RunOutcome> {
    let trivial = spec.lambda() == 0.0 || spec.kind() == FamilyKind::None;
    let (beta, scale) = if trivial {
        (0.0, 0.0)
    } else {
        let parts = spec.dc_components(0.0)?;
        (parts.scale * parts.g_slope, parts.scale)
    };
    let p = st.w.len();
    let mut a = DVector::zeros(p);
    let mut g = DVector::zeros(p);
    let mut v = DVector::zeros(p);
    let mut f_prev = *st.trace.last().unwrap();
    for _ in 0..cfg.max_iters {
        st.iterations += 1;
        if !trivial {
            for j in 0..p {
                a[j] = scale * spec.dc_components(st.w[j])?.h_deriv;
            }
        }
        let w_outer = st.w.clone();
        let mut u = st.w.clone();
        let mut bu = st.b;
        let mut m_prev = f64::INFINITY;
        for _ in 0..cfg.inner_max_iters {
            let (lu, gb) = sm.value_grad(&u, bu, &mut g);
            check_finite(lu, st.iterations, &st.trace)?;
            let s_u = lu - a.dot(&u);
            g -= &a;
            let mut bv;
            loop {
                let eta = st.eta;
                for j in 0..p {
                    v[j] = soft(u[j] - eta * g[j], eta * beta);
                }
                bv = if cfg.intercept { bu - eta * gb } else { 0.0 };
                if cfg.step_size.is_some() {
                    break;
                }
                let s_v = sm.value(&v, bv) - a.dot(&v);
                let d = &v - &u;
                let db = bv - bu;
                let model = s_u + g.dot(&d) + gb * db + (d.norm_squared() + db * db) / (2.0 * eta);
                if s_v <= model + 1e-14 * s_u.abs().max(1.0) || eta < 1e-300 {
                    break;
                }
                st.eta *= 0.5;
            }
            std::mem::swap(&mut u, &mut v);
            bu = bv;
            let m_new = sm.value(&u, bu) - a.dot(&u) + beta * u.lp_norm(1);
            let done = (m_prev - m_new).abs() <= INNER_TOL * m_new.abs().max(1.0);
            m_prev = m_new;
            if done {
                break;
            }
        }
        let f_new = sm.value(&u, bu) + spec.sum(u.as_slice());
        check_finite(f_new, st.iterations, &st.trace)?;
        let step = (&u - &w_outer).amax().max((bu - st.b).abs());
        st.w = u;
        st.b = bu;
        st.trace.push(f_new);
        if stopped(f_prev, f_new, step, inf_norm(&st.w), cfg.tol) {
            return Ok(RunOutcome { converged: true });
        }
        f_prev = f_new;
    }
    Ok(RunOutcome { converged: false })
}

/// Exact coordinate minimization sweeps for least squares. Returns whether
/// the sweeps reached a fixed point.
fn polish(ls: &LsGram, spec: &PenaltySpec, cfg: &SolverConfig, st: &mut State) -> bool {
    let p = st.w.len();
    let mut gw = &ls.g * &st.w;
    for _ in 0..MAX_SWEEPS {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let gjj = ls.g[(j, j)];
            if gjj <= 0.0 {
                continue;
            }
            let r = ls.c[j] - (gw[j] - gjj * st.w[j]) - st.b * ls.s[j];
            let new = prox_argmin(spec, r / gjj, 1.0 / gjj);
            let delta = new - st.w[j];
            if delta != 0.0 {
                gw.axpy(delta, &ls.g.column(j), 1.0);
                st.w[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if cfg.intercept {
            let nb = (ls.sy - ls.s.dot(&st.w)) / ls.n;
            max_change = max_change.max((nb - st.b).abs());
            st.b = nb;
        }
        let f = ls.value(&st.w, st.b) + spec.sum(st.w.as_slice());
        let last = *st.trace.last().unwrap();
        // rounding can make an exact coordinate minimum look a hair worse
        st.trace.push(f.min(last));
        if max_change <= 1e-13 * (1.0 + inf_norm(&st.w)) {
            return true;
        }
    }
    false
}

fn run_main<S: Smooth>(sm: &S, spec: &PenaltySpec, cfg: &SolverConfig, st: &mut State) -> Result<RunOutcome> {
    match cfg.algorithm {
        Algorithm::Cgd => cgd(sm, spec, cfg, st),
        Algorithm::Dca => dca(sm, spec, cfg, st),
    }
}

fn initial_state<S: Smooth>(sm: &S, spec: &PenaltySpec, cfg: &SolverConfig, p: usize) -> State {
    let w = DVector::zeros(p);
    let f0 = sm.value(&w, 0.0) + spec.sum(w.as_slice());
    let eta = cfg.step_size.unwrap_or_else(|| 1.0 / sm.lipschitz(cfg.intercept).max(1e-300));
    State { w, b: 0.0, trace: vec![f0], eta, iterations: 0 }
}

fn finish(st: State, converged: bool, cfg: &SolverConfig, loss: Loss) -> FitResult {
    let n_nonzero = st.w.iter().filter(|v| v.abs() > cfg.zero_tol).count();
    FitResult {
        weights: st.w.as_slice().to_vec(),
        intercept: st.b,
        objective_trace: st.trace,
        n_nonzero,
        converged,
        iterations: st.iterations,
        algorithm: cfg.algorithm,
        loss,
    }
}

fn check_dca_support(spec: &PenaltySpec, cfg: &SolverConfig) -> Result<()> {
    if cfg.algorithm == Algorithm::Dca && spec.lambda() > 0.0 && spec.kind() != FamilyKind::None {
        spec.dc_components(0.0)?;
    }
    Ok(())
}

/// Penalized least squares from `w = 0`.
pub fn fit_penalized_ls(data: &Dataset, spec: &PenaltySpec, config: &SolverConfig) -> Result<FitResult> {
    config.validate()?;
    check_dca_support(spec, config)?;
    let ls = LsGram::new(data);
    let mut st = initial_state(&ls, spec, config, data.p());
    let mut out = run_main(&ls, spec, config, &mut st)?;
    let mut converged = out.converged;
    if config.polish {
        for _ in 0..MAX_ROUNDS {
            let before = *st.trace.last().unwrap();
            let fixed = polish(&ls, spec, config, &mut st);
            let after = *st.trace.last().unwrap();
            converged = converged || fixed;
            if before - after <= config.tol * after.abs().max(1.0) {
                break;
            }
            out = run_main(&ls, spec, config, &mut st)?;
            converged = out.converged || fixed;
        }
    }
    Ok(finish(st, converged, config, Loss::Ls))
}

/// Penalized logistic regression from `w = 0`; labels must be 0/1.
pub fn fit_penalized_logistic(data: &Dataset, spec: &PenaltySpec, config: &SolverConfig) -> Result<FitResult> {
    config.validate()?;
    data.require_binary()?;
    check_dca_support(spec, config)?;
    let sm = LogisticLoss { x: &data.x, y: &data.y };
    let mut st = initial_state(&sm, spec, config, data.p());
    let out = run_main(&sm, spec, config, &mut st)?;
    Ok(finish(st, out.converged, config, Loss::Logistic))
}

pub fn fit_penalized(data: &Dataset, spec: &PenaltySpec, config: &SolverConfig, loss: Loss) -> Result<FitResult> {
    match loss {
        Loss::Ls => fit_penalized_ls(data, spec, config),
        Loss::Logistic => fit_penalized_logistic(data, spec, config),
    }
}

/// Least-squares solution through the SVD; errors on rank deficiency.
pub fn ols_solution(data: &Dataset) -> Result<DVector<f64>> {
    let (n, p) = data.x.shape();
    let svd = data.x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * f64::EPSILON * n.max(p) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank < p {
        return Err(Error::RankDeficient { rank, cols: p });
    }
    svd.solve(&data.y, cutoff).map_err(|e| Error::Data(e.to_string()))
}

fn check_dims(data: &Dataset, w: &[f64]) -> Result<()> {
    if w.len() != data.p() {
        return Err(Error::Dimension(format!("{} weights for {} columns", w.len(), data.p())));
    }
    Ok(())
}

/// Loss, weight gradient and intercept derivative at `(w, b)`, computed
/// row by row.
pub fn smooth_value_grad(data: &Dataset, w: &[f64], b: f64, loss: Loss) -> Result<(f64, Vec<f64>, f64)> {
    check_dims(data, w)?;
    let w = DVector::from_column_slice(w);
    let eta = &data.x * &w;
    let mut resid = DVector::zeros(data.n());
    let mut value = 0.0;
    for i in 0..data.n() {
        let z = eta[i] + b;
        let y = data.y[i];
        match loss {
            Loss::Ls => {
                value += (y - z) * (y - z);
                resid[i] = 2.0 * (z - y);
            }
            Loss::Logistic => {
                value += softplus(z) - y * z;
                resid[i] = sigmoid(z) - y;
            }
        }
    }
    let g = data.x.tr_mul(&resid);
    Ok((value, g.as_slice().to_vec(), resid.sum()))
}

/// Smooth loss plus the penalty sum, no intercept.
pub fn penalized_objective(data: &Dataset, w: &[f64], spec: &PenaltySpec, loss: Loss) -> Result<f64> {
    let (value, _, _) = smooth_value_grad(data, w, 0.0, loss)?;
    Ok(value + spec.sum(w))
}

/// Largest violation of the first-order condition: `|dL/dw_j + p'(w_j)|`
/// off zero, `(|dL/dw_j| - lambda L)+` at zero, and `|dL/db|` with an
/// intercept.
pub fn stationarity_residual(data: &Dataset, fit: &FitResult, spec: &PenaltySpec) -> Result<f64> {
    let (_, g, gb) = smooth_value_grad(data, &fit.weights, fit.intercept, fit.loss)?;
    let bound = spec.subgradient_interval().map_or(f64::INFINITY, |(_, hi)| hi);
    let mut worst: f64 = if fit.intercept != 0.0 { gb.abs() } else { 0.0 };
    for (j, &w) in fit.weights.iter().enumerate() {
        let r = if w == 0.0 { (g[j].abs() - bound).max(0.0) } else { (g[j] + spec.eval_deriv(w)).abs() };
        worst = worst.max(r);
    }
    Ok(worst)
}
