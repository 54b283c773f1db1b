//! Scalar penalized quadratics `-2 w_hat w + w^2 + k p(|w|)`: exact solver,
//! brute-force oracle, global-minimum lambda threshold and objective tables.
//!
//! With `k = 1` this is the orthonormal-design problem; other weights come
//! from coordinate and proximal-gradient steps in the solvers.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::bisect;
use crate::penalty::{Family, FamilyKind, PenaltySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxMethod {
    ClosedForm,
    FixedPoint,
    GridRefine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalMin {
    pub w: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProxResult {
    pub global_min: f64,
    pub objective_at_min: f64,
    /// Every local minimizer found, sorted by `w`.
    pub local_minima: Vec<LocalMin>,
    pub method: ProxMethod,
}

const FP_DAMPING: f64 = 0.5;
const FP_MAX_ITERS: usize = 200;
const FP_SECOND_SEED: f64 = 0.1;

/// `-2 w_hat w + w^2 + weight * p(w)`.
#[inline]
pub fn scalar_objective(spec: &PenaltySpec, w_hat: f64, weight: f64, w: f64) -> f64 {
    w * w - 2.0 * w_hat * w + weight * spec.eval(w)
}

/// Minimizer of `-2 w_hat w + w^2 + p(w)`.
pub fn prox_scalar(spec: &PenaltySpec, w_hat: f64) -> Result<ProxResult> {
    prox_weighted(spec, w_hat, 1.0)
}

/// Minimizer of `-2 w_hat w + w^2 + weight * p(w)`, i.e. of
/// `(w - w_hat)^2 + weight * p(w)`.
pub fn prox_weighted(spec: &PenaltySpec, w_hat: f64, weight: f64) -> Result<ProxResult> {
    if !w_hat.is_finite() {
        return Err(Error::NonFinite(w_hat));
    }
    if !weight.is_finite() || weight < 0.0 {
        return Err(Error::Config(format!("prox weight must be finite and >= 0, got {weight}")));
    }
    let z = w_hat.abs();
    let sign = if w_hat < 0.0 { -1.0 } else { 1.0 };
    let (minima, method) = solve_nonneg(spec, z, weight);
    let mut local_minima: Vec<LocalMin> = minima
        .into_iter()
        .map(|w| {
            let w = sign * w;
            LocalMin { w, objective: scalar_objective(spec, w_hat, weight, w) }
        })
        .collect();
    local_minima.sort_by(|a, b| a.w.total_cmp(&b.w));
    let best = local_minima
        .iter()
        .copied()
        // ties go to the point nearer zero
        .min_by(|a, b| a.objective.total_cmp(&b.objective).then(a.w.abs().total_cmp(&b.w.abs())))
        .expect("zero or the unpenalized point is always a candidate");
    Ok(ProxResult {
        global_min: best.w,
        objective_at_min: best.objective,
        local_minima,
        method,
    })
}

/// Cheaper entry for hot loops: only the global minimizer.
pub fn prox_argmin(spec: &PenaltySpec, w_hat: f64, weight: f64) -> f64 {
    let z = w_hat.abs();
    let (minima, _) = solve_nonneg(spec, z, weight);
    let mut best = 0.0;
    let mut best_obj = 0.0;
    for w in minima {
        let obj = w * w - 2.0 * z * w + weight * spec.eval(w);
        if obj < best_obj || (obj == best_obj && w < best) {
            best = w;
            best_obj = obj;
        }
    }
    if w_hat < 0.0 {
        -best
    } else {
        best
    }
}

/// Local minimizers of `psi(w) = w^2 - 2 z w + k p(w)` on `w >= 0`, `z >= 0`.
/// Every minimizer lies in `[0, z]` because `p` is even and nondecreasing.
fn solve_nonneg(spec: &PenaltySpec, z: f64, k: f64) -> (Vec<f64>, ProxMethod) {
    let lambda = spec.lambda();
    if z == 0.0 {
        return (vec![0.0], ProxMethod::ClosedForm);
    }
    if lambda == 0.0 || k == 0.0 || spec.kind() == FamilyKind::None {
        return (vec![z], ProxMethod::ClosedForm);
    }
    let kl = k * lambda;
    match spec.family() {
        Family::L1 => (vec![(z - kl / 2.0).max(0.0)], ProxMethod::ClosedForm),
        Family::Bridge { kappa } if kappa == 1.0 => {
            (vec![(z - kl / 2.0).max(0.0)], ProxMethod::ClosedForm)
        }
        Family::L2 => (vec![z / (1.0 + kl)], ProxMethod::ClosedForm),
        Family::Bridge { kappa } if kappa > 1.0 => {
            (scan(spec, z, k, &[], false), ProxMethod::GridRefine)
        }
        Family::Bridge { kappa } => {
            let w0 = (kl * kappa * (1.0 - kappa) / 2.0).powf(1.0 / (2.0 - kappa));
            (scan(spec, z, k, &[w0], false), ProxMethod::GridRefine)
        }
        Family::Scad { a } => (scan(spec, z, k, &[lambda, a * lambda], true), ProxMethod::ClosedForm),
        Family::Mcp { b } => (scan(spec, z, k, &[b * lambda], true), ProxMethod::ClosedForm),
        Family::CappedL1 { c } => (scan(spec, z, k, &[c], true), ProxMethod::ClosedForm),
        Family::GemanMcclure { sigma } => {
            let w0 = (kl * sigma).cbrt() - sigma;
            (scan(spec, z, k, &[w0], false), ProxMethod::GridRefine)
        }
        Family::Log { sigma } => {
            let w0 = (kl / 2.0).sqrt() - sigma;
            (scan(spec, z, k, &[w0], false), ProxMethod::GridRefine)
        }
        Family::Laplace { .. } | Family::Arctan { .. } => fixed_point_solve(spec, z, k),
        Family::None => unreachable!(),
    }
}

#[inline]
fn dpsi(spec: &PenaltySpec, z: f64, k: f64, w: f64) -> f64 {
    2.0 * w - 2.0 * z + k * spec.eval_deriv(w)
}

/// Inflection points of `psi` (zeros of `psi''`) for Laplace and arctan.
fn inflections(spec: &PenaltySpec, k: f64) -> Vec<f64> {
    let lambda = spec.lambda();
    match spec.family() {
        Family::Laplace { epsilon } => {
            let l = -epsilon.ln();
            vec![(k * lambda * l * l / 2.0).ln() / l]
        }
        Family::Arctan { gamma } => {
            // psi'' = 2 - c q(u), u = gamma w, q(u) = u / (1 + u^2)^2
            let c = k * lambda * 4.0 * gamma * gamma / PI;
            let q = |u: f64| u / ((1.0 + u * u) * (1.0 + u * u));
            let u_peak = 1.0 / 3f64.sqrt();
            if c * q(u_peak) <= 2.0 {
                return Vec::new();
            }
            let g = |u: f64| c * q(u) - 2.0;
            let u1 = bisect(g, 0.0, u_peak, 200);
            let mut hi = 2.0 * u_peak;
            while g(hi) > 0.0 {
                hi *= 2.0;
            }
            let u2 = bisect(g, u_peak, hi, 200);
            vec![u1 / gamma, u2 / gamma]
        }
        _ => Vec::new(),
    }
}

/// Local minima of `psi` on `[0, z]` given breakpoints that cut `[0, z]`
/// into pieces on which `psi'` is monotone (`linear` = affine on each piece).
fn scan(spec: &PenaltySpec, z: f64, k: f64, breaks: &[f64], linear: bool) -> Vec<f64> {
    let mut pts = Vec::with_capacity(breaks.len() + 2);
    pts.push(0.0);
    pts.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < z));
    pts.push(z);
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    // one-sided limits of psi' at each piece end
    let limits: Vec<(f64, f64)> = pts
        .windows(2)
        .map(|seg| {
            let (lo, hi) = (seg[0], seg[1]);
            if linear {
                let m1 = lo + 0.25 * (hi - lo);
                let m2 = lo + 0.75 * (hi - lo);
                let d1 = dpsi(spec, z, k, m1);
                let d2 = dpsi(spec, z, k, m2);
                let slope = (d2 - d1) / (m2 - m1);
                (d1 + slope * (lo - m1), d1 + slope * (hi - m1))
            } else {
                (dpsi(spec, z, k, lo.max(f64::MIN_POSITIVE)), dpsi(spec, z, k, hi))
            }
        })
        .collect();

    let mut minima = Vec::new();
    if limits[0].0 >= 0.0 {
        minima.push(0.0);
    }
    for (i, seg) in pts.windows(2).enumerate() {
        let (lo, hi) = (seg[0], seg[1]);
        let (dl, dh) = limits[i];
        if dl < 0.0 && dh > 0.0 {
            let root = if linear {
                (lo - dl * (hi - lo) / (dh - dl)).clamp(lo, hi)
            } else {
                bisect(|w| dpsi(spec, z, k, w), lo, hi, 200)
            };
            minima.push(root);
        }
        // a piece end where psi' turns from <= 0 to >= 0
        let right = limits.get(i + 1).map_or(f64::INFINITY, |l| l.0);
        if dh <= 0.0 && right >= 0.0 && !(dl >= 0.0 && dh == 0.0) {
            minima.push(hi);
        }
    }
    minima.dedup();
    if minima.is_empty() {
        // psi' was never seen turning upward inside [0, z]; the endpoints bound the search
        minima.push(0.0);
        minima.push(z);
    }
    minima
}

/// Damped iteration of `w = z - (k/2) p'(w)` from two seeds, checked against
/// the piecewise-monotone scan unless `psi` is convex.
fn fixed_point_solve(spec: &PenaltySpec, z: f64, k: f64) -> (Vec<f64>, ProxMethod) {
    let tol = 1e-14 * z.max(1.0);
    let iterate = |seed: f64| -> Option<f64> {
        let mut w = seed;
        for _ in 0..FP_MAX_ITERS {
            let t = z - 0.5 * k * spec.eval_deriv(w);
            if (t - w).abs() <= tol {
                return (t > 0.0).then_some(t);
            }
            w = (1.0 - FP_DAMPING) * w + FP_DAMPING * t;
            if w <= 0.0 {
                return None;
            }
        }
        None
    };
    let roots: Vec<f64> = [z, FP_SECOND_SEED.min(z)]
        .into_iter()
        .filter_map(iterate)
        .collect();
    let zero_is_min = dpsi(spec, z, k, f64::MIN_POSITIVE) >= 0.0;

    let mu = spec.weak_convexity_mu().unwrap_or(f64::INFINITY);
    if k * mu < 2.0 {
        // strictly convex: a single stationary point
        if zero_is_min {
            return (vec![0.0], ProxMethod::FixedPoint);
        }
        if let Some(&r) = roots.first() {
            return (vec![r], ProxMethod::FixedPoint);
        }
        return (scan(spec, z, k, &[], false), ProxMethod::GridRefine);
    }

    let scanned = scan(spec, z, k, &inflections(spec, k), false);
    let psi = |w: f64| w * w - 2.0 * z * w + k * spec.eval(w);
    let best_scanned = scanned
        .iter()
        .copied()
        .min_by(|a, b| psi(*a).total_cmp(&psi(*b)))
        .unwrap();
    let mut candidates = roots.clone();
    if zero_is_min {
        candidates.push(0.0);
    }
    let fp_best = candidates.iter().copied().min_by(|a, b| psi(*a).total_cmp(&psi(*b)));
    let agrees = fp_best.is_some_and(|w| {
        (w - best_scanned).abs() <= 1e-9 * z.max(1.0) || psi(w) <= psi(best_scanned)
    });
    let method = if agrees { ProxMethod::FixedPoint } else { ProxMethod::GridRefine };
    let mut all = scanned;
    for r in roots {
        if all.iter().all(|m| (m - r).abs() > 1e-9 * z.max(1.0)) {
            all.push(r);
        }
    }
    (all, method)
}

/// Result of the brute-force grid search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleMin {
    pub w: f64,
    pub objective: f64,
    /// Grid step of the last refinement round.
    pub resolution: f64,
}

pub const ORACLE_POINTS: usize = 100_001;
const ORACLE_ROUNDS: usize = 3;
const ORACLE_SHRINK: f64 = 10.0;

pub fn default_half_width(w_hat: f64) -> f64 {
    (2.0 * w_hat.abs()).max(10.0)
}

/// Grid minimizer of the unit-weight objective over
/// `[-half_width, half_width] ∪ {0, w_hat}`, followed by three rounds of a
/// ten-times narrower grid around the incumbent.
pub fn prox_oracle(spec: &PenaltySpec, w_hat: f64, half_width: f64, points: usize) -> Result<OracleMin> {
    if points < 1001 {
        return Err(Error::Config(format!("oracle needs at least 1001 points, got {points}")));
    }
    if !w_hat.is_finite() {
        return Err(Error::NonFinite(w_hat));
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::Config(format!("oracle half width must be positive, got {half_width}")));
    }
    let f = |w: f64| w * w - 2.0 * w_hat * w + spec.eval(w);
    let mut best_w = 0.0;
    let mut best_f = f(0.0);
    let consider = |w: f64, best_w: &mut f64, best_f: &mut f64| {
        let v = f(w);
        if v < *best_f {
            *best_w = w;
            *best_f = v;
        }
    };
    consider(w_hat, &mut best_w, &mut best_f);
    let mut center = 0.0;
    let mut hw = half_width;
    let mut step = 2.0 * hw / (points - 1) as f64;
    for round in 0..=ORACLE_ROUNDS {
        if round > 0 {
            center = best_w;
            hw /= ORACLE_SHRINK;
            step = 2.0 * hw / (points - 1) as f64;
        }
        let start = center - hw;
        for i in 0..points {
            consider(start + i as f64 * step, &mut best_w, &mut best_f);
        }
        consider(0.0, &mut best_w, &mut best_f);
        consider(w_hat, &mut best_w, &mut best_f);
    }
    Ok(OracleMin { w: best_w, objective: best_f, resolution: step })
}

pub fn prox_oracle_default(spec: &PenaltySpec, w_hat: f64) -> Result<OracleMin> {
    prox_oracle(spec, w_hat, default_half_width(w_hat), ORACLE_POINTS)
}

pub const THRESHOLD_BRACKET: (f64, f64) = (1e-4, 1e4);
const THRESHOLD_ITERS: usize = 60;
const THRESHOLD_PROBE: f64 = 1e-3;

/// The lambda at which the global minimizer of the unit-weight problem jumps
/// to zero, by bisection on the oracle. The `lambda` stored in `spec` is
/// ignored.
pub fn global_min_threshold(spec: &PenaltySpec, w_hat: f64) -> Result<f64> {
    match spec.kind() {
        FamilyKind::L1 | FamilyKind::Laplace | FamilyKind::Arctan | FamilyKind::Scad | FamilyKind::Mcp => {}
        _ => {
            return Err(Error::Unsupported {
                op: "global-minimum threshold",
                family: spec.kind().name(),
                reason: "only l1, laplace, arctan, scad and mcp are supported",
            })
        }
    }
    if !w_hat.is_finite() {
        return Err(Error::NonFinite(w_hat));
    }
    let is_zero = |lambda: f64| -> Result<bool> {
        let o = prox_oracle_default(&spec.with_lambda(lambda)?, w_hat)?;
        Ok(o.w.abs() <= 2.0 * o.resolution)
    };
    let (mut lo, mut hi) = THRESHOLD_BRACKET;
    if w_hat == 0.0 || is_zero(lo)? || !is_zero(hi)? {
        return Err(Error::NoThreshold { lo, hi });
    }
    for _ in 0..THRESHOLD_ITERS {
        let mid = 0.5 * (lo + hi);
        if is_zero(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let star = 0.5 * (lo + hi);
    let below = (star - THRESHOLD_PROBE).max(THRESHOLD_BRACKET.0);
    if is_zero(below)? || !is_zero(star + THRESHOLD_PROBE)? {
        return Err(Error::NonMonotoneThreshold { lambda: star });
    }
    Ok(star)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub w: f64,
    pub lambda: f64,
    pub objective: f64,
}

/// Objective values over a `lambda x w` grid, lambda-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveCurve {
    pub w_hat: f64,
    pub rows: Vec<CurveRow>,
}

impl ObjectiveCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["w", "lambda", "objective"])?;
        for r in &self.rows {
            wtr.write_record([r.w.to_string(), r.lambda.to_string(), r.objective.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn objective_curve(
    spec: &PenaltySpec,
    w_hat: f64,
    lambda_grid: &[f64],
    w_grid: &[f64],
) -> Result<ObjectiveCurve> {
    if lambda_grid.is_empty() || w_grid.is_empty() {
        return Err(Error::Config("objective curve grids must be non-empty".into()));
    }
    let mut rows = Vec::with_capacity(lambda_grid.len() * w_grid.len());
    for &lambda in lambda_grid {
        let s = spec.with_lambda(lambda)?;
        for &w in w_grid {
            rows.push(CurveRow { w, lambda, objective: scalar_objective(&s, w_hat, 1.0, w) });
        }
    }
    Ok(ObjectiveCurve { w_hat, rows })
}

/// Lambda values of the animation grids: 0.1, then 1 through 15.
pub fn animation_lambda_grid() -> Vec<f64> {
    std::iter::once(0.1).chain((1..=15).map(f64::from)).collect()
}

/// `w` from -1 to 5 in steps of 0.005.
pub fn animation_w_grid() -> Vec<f64> {
    (0..=1200).map(|i| -1.0 + i as f64 * 0.005).collect()
}
