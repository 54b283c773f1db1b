//! Grid-based verification of the structural properties P1-P9 of a penalty.
//!
//! Every check samples a fixed grid (4001 points on `[-10, 10]`, logarithmic
//! tails out to `1e6`, plus the family's breakpoints) and records the worst
//! point it saw. P7 and P8 concern `f(t) = t + p'(t)`, whose minimum decides
//! whether the orthonormal-design estimator thresholds (P7) and whether it is
//! continuous (P8).

use std::f64::consts::{E, PI};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{bisect, golden_section, second_diff};
use crate::penalty::{Family, FamilyKind, PenaltySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Property {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    #[serde(rename = "P6'")]
    P6Prime,
    P7,
    P8,
    P9,
}

impl Property {
    pub const ALL: [Property; 10] = [
        Property::P1,
        Property::P2,
        Property::P3,
        Property::P4,
        Property::P5,
        Property::P6,
        Property::P6Prime,
        Property::P7,
        Property::P8,
        Property::P9,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Property::P1 => "P1",
            Property::P2 => "P2",
            Property::P3 => "P3",
            Property::P4 => "P4",
            Property::P5 => "P5",
            Property::P6 => "P6",
            Property::P6Prime => "P6'",
            Property::P7 => "P7",
            Property::P8 => "P8",
            Property::P9 => "P9",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Property::P1 => "p(0) = 0 and p is even",
            Property::P2 => "p is nondecreasing on [0, inf)",
            Property::P3 => "p(t)/t is nonincreasing on (0, inf)",
            Property::P4 => "differentiable off 0 with p'(0+) = lambda L",
            Property::P5 => "p + mu t^2 / 2 is convex",
            Property::P6 => "p' vanishes beyond a finite radius",
            Property::P6Prime => "p'(t) -> 0 as |t| -> inf",
            Property::P7 => "min of t + p'(t) is positive (thresholding)",
            Property::P8 => "min of t + p'(t) over t >= 0 is at 0 (continuity)",
            Property::P9 => "curvature vanishes as lambda -> 0",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    NotApplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::NotApplicable => "not_applicable",
        })
    }
}

/// Worst point seen by a check and the size of its residual there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub t: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub property: Property,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub spec: PenaltySpec,
    pub checks: Vec<PropertyCheck>,
    /// Lambda interval on which P7 and P8 hold together (Laplace, arctan).
    pub region: Option<(f64, f64)>,
}

impl PropertyReport {
    pub fn check(&self, p: Property) -> &PropertyCheck {
        self.checks.iter().find(|c| c.property == p).expect("every property is checked")
    }

    pub fn verdict(&self, p: Property) -> Verdict {
        self.check(p).verdict
    }

    /// Plain-text table, one row per property.
    pub fn render_table(&self) -> String {
        let mut out = format!("{}\n", self.spec);
        out.push_str(&format!("{:<5} {:<15} {:>14} {:>12}  {}\n", "prop", "verdict", "t", "residual", "detail"));
        for c in &self.checks {
            let (t, r) = match c.witness {
                Some(w) => (format!("{:.6e}", w.t), format!("{:.3e}", w.residual)),
                None => ("-".into(), "-".into()),
            };
            out.push_str(&format!("{:<5} {:<15} {:>14} {:>12}  {}\n", c.property.to_string(), c.verdict.to_string(), t, r, c.detail));
        }
        if let Some((lo, hi)) = self.region {
            out.push_str(&format!("P7 and P8 together for lambda in ({lo:.6}, {hi:.6})\n"));
        }
        out
    }
}

const CORE_POINTS: usize = 4001;
const TAIL_POINTS: usize = 200;
const ID_TOL: f64 = 1e-8;
const FD_TOL: f64 = 1e-5;
const P6_PRIME_TOL: f64 = 1e-6;
const P6_PRIME_PROBES: [f64; 4] = [10.0, 1e2, 1e3, 1e4];
const P7_TOL: f64 = 1e-12;
const P8_TOL: f64 = 1e-8;
const P9_POINTS: [f64; 4] = [0.5, 1.0, 2.0, 5.0];
const P9_SHRINK: f64 = 1e-2;

/// Nonnegative half of the check grid (0 included), sorted.
pub fn check_grid_nonneg(spec: &PenaltySpec) -> Vec<f64> {
    let half = (CORE_POINTS - 1) / 2;
    let mut g: Vec<f64> = (0..=half).map(|i| 10.0 * i as f64 / half as f64).collect();
    g.extend((1..=TAIL_POINTS).map(|i| 10f64.powf(1.0 + 5.0 * i as f64 / TAIL_POINTS as f64)));
    let lambda = spec.lambda();
    let breaks: Vec<f64> = match spec.family() {
        Family::Scad { a } => vec![lambda, a * lambda],
        Family::Mcp { b } => vec![b * lambda],
        Family::CappedL1 { c } => vec![c],
        _ => vec![],
    };
    g.extend(breaks.into_iter().filter(|b| *b > 0.0 && b.is_finite()));
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

fn fd_step(t: f64) -> f64 {
    1e-3 * t.abs().max(1.0)
}

fn holds_if(ok: bool) -> Verdict {
    if ok {
        Verdict::Holds
    } else {
        Verdict::Fails
    }
}

fn check(property: Property, ok: bool, t: f64, residual: f64, detail: impl Into<String>) -> PropertyCheck {
    PropertyCheck {
        property,
        verdict: holds_if(ok),
        witness: Some(Witness { t, residual }),
        detail: detail.into(),
    }
}

fn not_applicable(property: Property, detail: &str) -> PropertyCheck {
    PropertyCheck { property, verdict: Verdict::NotApplicable, witness: None, detail: detail.into() }
}

/// Runs every property check on `spec`.
pub fn check_properties(spec: &PenaltySpec) -> PropertyReport {
    let grid = check_grid_nonneg(spec);
    let scale = grid.iter().map(|&t| spec.eval(t).abs()).fold(0.0, f64::max);
    let checks = vec![
        check_p1(spec, &grid, scale),
        check_p2(spec, &grid, scale),
        check_p3(spec, &grid),
        check_p4(spec, &grid),
        check_p5(spec, &grid),
        check_p6(spec, &grid),
        check_p6_prime(spec),
        check_p7(spec),
        check_p8(spec),
        check_p9(spec),
    ];
    PropertyReport { spec: *spec, checks, region: sparsity_continuity_region(spec).ok() }
}

fn check_p1(spec: &PenaltySpec, grid: &[f64], scale: f64) -> PropertyCheck {
    let mut worst = (0.0, spec.eval(0.0).abs());
    for &t in grid {
        let r = (spec.eval(t) - spec.eval(-t)).abs();
        if r > worst.1 {
            worst = (t, r);
        }
    }
    check(Property::P1, worst.1 <= ID_TOL * scale, worst.0, worst.1, "max |p(t) - p(-t)|, |p(0)|")
}

fn check_p2(spec: &PenaltySpec, grid: &[f64], scale: f64) -> PropertyCheck {
    let mut worst = (0.0, 0.0);
    for pair in grid.windows(2) {
        let drop = spec.eval(pair[0]) - spec.eval(pair[1]);
        if drop > worst.1 {
            worst = (pair[0], drop);
        }
    }
    check(Property::P2, worst.1 <= ID_TOL * scale, worst.0, worst.1, "largest decrease between grid neighbours")
}

fn check_p3(spec: &PenaltySpec, grid: &[f64]) -> PropertyCheck {
    let ratios: Vec<(f64, f64)> = grid.iter().filter(|&&t| t > 0.0).map(|&t| (t, spec.eval(t) / t)).collect();
    let top = ratios.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
    let mut worst = (ratios[0].0, 0.0);
    for pair in ratios.windows(2) {
        let rise = pair[1].1 - pair[0].1;
        if rise > worst.1 {
            worst = (pair[0].0, rise);
        }
    }
    check(Property::P3, worst.1 <= ID_TOL * top, worst.0, worst.1, "largest increase of p(t)/t")
}

fn check_p4(spec: &PenaltySpec, grid: &[f64]) -> PropertyCheck {
    let lambda = spec.lambda();
    match spec.family() {
        Family::Bridge { kappa } if kappa < 1.0 && lambda > 0.0 => {
            let t: f64 = 1e-12;
            let slope = lambda * kappa * t.powf(kappa - 1.0);
            return check(Property::P4, false, t, slope, "derivative is unbounded at 0+");
        }
        Family::CappedL1 { c } if lambda > 0.0 => {
            return check(Property::P4, false, c, lambda / c, "derivative jumps at t = c");
        }
        _ => {}
    }
    let target = spec.lipschitz_bound().unwrap_or(0.0);
    let limit = spec.eval_deriv(1e-12);
    let norm = target.max(f64::MIN_POSITIVE);
    let mut worst = (1e-12, (limit - target).abs() / norm);
    let bounded = spec.lipschitz_bound().is_ok();
    for &t in grid.iter().filter(|&&t| t > 0.0) {
        let d = spec.eval_deriv(t);
        let h = 1e-6 * t.max(1.0);
        let fd = (spec.eval(t + h) - spec.eval(t - h)) / (2.0 * h);
        let local = d.abs().max(norm);
        let mut r = (fd - d).abs() / local;
        if bounded && d.abs() > target * (1.0 + 1e-12) {
            r = r.max((d.abs() - target) / norm);
        }
        if r > worst.1 {
            worst = (t, r);
        }
    }
    check(
        Property::P4,
        worst.1 <= FD_TOL,
        worst.0,
        worst.1,
        format!("p'(0+) vs lambda L = {target:.6e}; derivative vs finite difference"),
    )
}

fn check_p5(spec: &PenaltySpec, grid: &[f64]) -> PropertyCheck {
    let mu_res = spec.weak_convexity_mu();
    let mu = *mu_res.as_ref().unwrap_or(&0.0);
    let q = |t: f64| spec.eval(t) + 0.5 * mu * t * t;
    let mut worst = (0.0, f64::NEG_INFINITY);
    let mut ok = true;
    for &t in grid {
        let h = fd_step(t);
        let d2 = second_diff(q, t, h);
        let roundoff = 16.0 * f64::EPSILON * (q(t).abs() + q(t + h).abs()) / (h * h);
        let tol = FD_TOL * mu + roundoff;
        let r = -d2;
        if r > tol {
            ok = false;
        }
        if r > worst.1 {
            worst = (t, r);
        }
    }
    match mu_res {
        Ok(mu) => check(Property::P5, ok, worst.0, worst.1.max(0.0), format!("mu = {mu:.6e}; most negative second difference")),
        Err(e) => check(Property::P5, false, worst.0, worst.1, e.to_string()),
    }
}

fn check_p6(spec: &PenaltySpec, grid: &[f64]) -> PropertyCheck {
    match spec.flat_radius() {
        Some(r) => {
            let mut worst = (r, 0.0);
            for &t in grid.iter().filter(|&&t| t > r) {
                let d = spec.eval_deriv(t).abs();
                if d > worst.1 {
                    worst = (t, d);
                }
            }
            check(Property::P6, worst.1 == 0.0, worst.0, worst.1, format!("p' checked for t > {r:.6e}"))
        }
        None => {
            let (t, d) = grid
                .iter()
                .rev()
                .map(|&t| (t, spec.eval_deriv(t).abs()))
                .find(|&(_, d)| d > 0.0)
                .unwrap_or((0.0, 0.0));
            check(Property::P6, false, t, d, "no finite radius: p' is still nonzero at t")
        }
    }
}

fn check_p6_prime(spec: &PenaltySpec) -> PropertyCheck {
    let d: Vec<f64> = P6_PRIME_PROBES.iter().map(|&t| spec.eval_deriv(t).abs()).collect();
    let last = *d.last().unwrap();
    let decreasing = d.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0));
    let mut worst = (P6_PRIME_PROBES[3], last);
    if !decreasing {
        let i = d.windows(2).position(|w| !(w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0))).unwrap();
        worst = (P6_PRIME_PROBES[i + 1], d[i + 1]);
    }
    check(
        Property::P6Prime,
        last < P6_PRIME_TOL && decreasing,
        worst.0,
        worst.1,
        format!("|p'| at t = 10..1e4: {}", d.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ")),
    )
}

/// `f(t) = t + p'(t)` for `t >= 0`, with the right-hand limit at 0.
fn fan_li(spec: &PenaltySpec, t: f64) -> f64 {
    t + spec.eval_deriv(t.max(f64::MIN_POSITIVE))
}

/// Right end of the search window for min of `f` on `t >= 0`.
fn fan_li_window(spec: &PenaltySpec) -> f64 {
    match spec.family() {
        Family::Arctan { gamma } => 100.0 / gamma,
        Family::Laplace { epsilon } => 100.0 / -epsilon.ln(),
        _ => spec.flat_radius().map_or(10.0, |r| (2.0 * r).max(10.0)),
    }
}

/// Minimum of `f(t) = t + p'(t)` over `t >= 0` by dense grid and golden
/// refinement; returns `(argmin, min)`.
pub fn fan_li_min_nonneg(spec: &PenaltySpec) -> (f64, f64) {
    let hi = fan_li_window(spec);
    let n = 20_000;
    let step = hi / n as f64;
    let mut best = (0.0, fan_li(spec, 0.0));
    let mut best_i: usize = 0;
    for i in 1..=n {
        let t = i as f64 * step;
        let v = fan_li(spec, t);
        if v < best.1 {
            best = (t, v);
            best_i = i;
        }
    }
    let lo = (best_i.saturating_sub(1)) as f64 * step;
    let top = ((best_i + 1).min(n)) as f64 * step;
    let refined = golden_section(|t| fan_li(spec, t), lo, top, 1e-14 * hi.max(1.0));
    if refined.1 < best.1 {
        best = refined;
    }
    best
}

/// Unconstrained minimum of the Laplace `f(t) = t + lambda L e^{-L t}` by
/// bracketing the root of `f'`.
fn laplace_fan_li_min(lambda: f64, epsilon: f64) -> (f64, f64) {
    let l = -epsilon.ln();
    let f = |t: f64| t + lambda * l * (-l * t).exp();
    let fp = |t: f64| 1.0 - lambda * l * l * (-l * t).exp();
    let mut lo = -1.0 / l;
    let mut hi = 1.0 / l;
    while fp(lo) >= 0.0 {
        lo *= 2.0;
    }
    while fp(hi) <= 0.0 {
        hi *= 2.0;
    }
    let t = bisect(fp, lo, hi, 200);
    (t, f(t))
}

fn check_p7(spec: &PenaltySpec) -> PropertyCheck {
    if spec.lambda() == 0.0 || spec.kind() == FamilyKind::None {
        return not_applicable(Property::P7, "penalty is identically zero");
    }
    let (t, m, detail) = match spec.family() {
        Family::Laplace { epsilon } => {
            let (t, m) = laplace_fan_li_min(spec.lambda(), epsilon);
            (t, m, "min over all real t of t + lambda L eps^t")
        }
        _ => {
            let (t, m) = fan_li_min_nonneg(spec);
            (t, m, "min over t >= 0 of t + p'(t)")
        }
    };
    check(Property::P7, m > P7_TOL, t, m, detail)
}

fn check_p8(spec: &PenaltySpec) -> PropertyCheck {
    if spec.lambda() == 0.0 || spec.kind() == FamilyKind::None {
        return not_applicable(Property::P8, "penalty is identically zero");
    }
    let f0 = fan_li(spec, 0.0);
    let (t, m) = fan_li_min_nonneg(spec);
    let gap = f0 - m;
    check(Property::P8, gap <= P8_TOL, t, gap, "f(0) - min over t >= 0 of f")
}

fn check_p9(spec: &PenaltySpec) -> PropertyCheck {
    let lambda = spec.lambda();
    if lambda == 0.0 || spec.kind() == FamilyKind::None {
        return check(Property::P9, true, P9_POINTS[0], 0.0, "penalty is identically zero");
    }
    let curvature = |l: f64| -> (f64, f64) {
        let s = spec.with_lambda(l).expect("a positive scaling keeps lambda valid");
        P9_POINTS
            .iter()
            .map(|&t| (t, second_diff(|x| s.eval(x), t, fd_step(t)).abs()))
            .fold((P9_POINTS[0], 0.0), |a, b| if b.1 > a.1 { b } else { a })
    };
    let levels: Vec<(f64, f64)> = [1.0, 1e-1, 1e-2, 1e-3].iter().map(|&f| curvature(lambda * f)).collect();
    let first = levels[0];
    let last = levels[3].1;
    let ok = last == 0.0 || last <= P9_SHRINK * first.1;
    let ratio = if first.1 > 0.0 { last / first.1 } else { 0.0 };
    check(
        Property::P9,
        ok,
        first.0,
        ratio,
        format!("max |p''(t_s)| at lambda, ..., lambda/1000: {:.3e} -> {:.3e}", first.1, last),
    )
}

/// Lambda interval where P7 and P8 hold together, in closed form.
pub fn sparsity_continuity_region(spec: &PenaltySpec) -> Result<(f64, f64)> {
    match spec.family() {
        Family::Laplace { epsilon } => {
            let l2 = epsilon.ln().powi(2);
            Ok((1.0 / (E * l2), 1.0 / l2))
        }
        Family::Arctan { gamma } => Ok((0.0, PI / (gamma * gamma))),
        _ => Err(Error::Unsupported {
            op: "sparsity/continuity region",
            family: spec.kind().name(),
            reason: "defined for laplace and arctan only",
        }),
    }
}

/// Closed-form minimizer and minimum of `f(t) = t - lambda log(eps) eps^t`.
pub fn laplace_threshold_min(lambda: f64, epsilon: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidSpec(format!("lambda must be positive, got {lambda}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidSpec(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let l = -epsilon.ln();
    let log_arg = (lambda * l * l).ln();
    Ok((log_arg / l, (log_arg + 1.0) / l))
}
