//! Monte-Carlo consistency and sqrt(n)-bias experiments, bias factors,
//! approximation errors of the indicator function, and the
//! penalty-difference bound used in the growing-p argument.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::adaptive_simpson;
use crate::penalty::{Family, FamilyKind, PenaltySpec};
use crate::solvers::{fit_penalized_ls, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LambdaRule {
    Zero,
    /// `c * n^exponent`; `o(n)` when `exponent < 1`.
    #[serde(alias = "o_of_n")]
    Power { c: f64, exponent: f64 },
    #[serde(rename = "sqrt_n_times_lambda0")]
    SqrtN { lambda0: f64 },
    /// `c * (n / k)^(exponent / 2)` with `k` the number of nonzero true
    /// weights, so `lambda_n (k/n)^(1/2) -> 0` when `exponent < 1`.
    HhmScaled { c: f64, exponent: f64 },
}

impl LambdaRule {
    pub fn lambda(&self, n: usize, k: usize) -> f64 {
        let n = n as f64;
        match *self {
            LambdaRule::Zero => 0.0,
            LambdaRule::Power { c, exponent } => c * n.powf(exponent),
            LambdaRule::SqrtN { lambda0 } => lambda0 * n.sqrt(),
            LambdaRule::HhmScaled { c, exponent } => c * (n / k.max(1) as f64).powf(0.5 * exponent),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            LambdaRule::Zero => "zero".into(),
            LambdaRule::Power { c, exponent } => format!("{c}*n^{exponent}"),
            LambdaRule::SqrtN { lambda0 } => format!("{lambda0}*sqrt(n)"),
            LambdaRule::HhmScaled { c, exponent } => format!("{c}*(n/k)^({exponent}/2)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    pub true_w: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub sigma: f64,
    pub lambda_rule: LambdaRule,
    pub trials: usize,
    pub seed: u64,
    /// Append `floor(sqrt(n))` zero weights (capped so `p <= n/4`).
    #[serde(default)]
    pub growing_p: bool,
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if self.true_w.is_empty() || self.true_w.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("true_w must be a non-empty finite vector".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Config("n_grid must be non-empty and strictly increasing".into()));
        }
        if self.n_grid[0] < self.true_w.len() {
            return Err(Error::Config("every n must be at least p".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config("sigma must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(())
    }

    fn nonzero(&self) -> usize {
        self.true_w.iter().filter(|&&w| w != 0.0).count()
    }

    fn weights_for(&self, n: usize) -> Vec<f64> {
        let mut w = self.true_w.clone();
        if self.growing_p {
            let extra = (n as f64).sqrt() as usize;
            let cap = (n / 4).max(w.len());
            w.resize((w.len() + extra).min(cap), 0.0);
        }
        w
    }
}

/// Stream for `(seed, n index, trial)`; identical in serial and parallel runs.
fn trial_rng(seed: u64, n_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n_index as u64) << 32) | trial as u64);
    rng
}

fn gaussian_regression(rng: &mut ChaCha8Rng, n: usize, w: &[f64], sigma: f64) -> Result<Dataset> {
    let p = w.len();
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let noise = DVector::from_fn(n, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
    let y = &x * DVector::from_column_slice(w) + noise;
    Dataset::new(x, y)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub p: usize,
    pub lambda: f64,
    /// `None` when every trial failed.
    pub mean_error: Option<f64>,
    pub sd_error: Option<f64>,
    pub trials: usize,
    pub failed: usize,
    pub lambda_rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyTable {
    pub spec: String,
    pub seed: u64,
    pub trials: usize,
    pub rows: Vec<ConsistencyRow>,
}

impl ConsistencyTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["n", "p", "lambda", "mean_error", "sd_error", "trials", "failed", "lambda_rule", "seed"])?;
        let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for r in &self.rows {
            wtr.write_record([
                r.n.to_string(),
                r.p.to_string(),
                r.lambda.to_string(),
                cell(r.mean_error),
                cell(r.sd_error),
                r.trials.to_string(),
                r.failed.to_string(),
                r.lambda_rule.clone(),
                self.seed.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Fraction of adjacent `n` pairs whose mean error drops.
    pub fn decreasing_fraction(&self) -> f64 {
        let means: Vec<f64> = self.rows.iter().filter_map(|r| r.mean_error).collect();
        if means.len() < 2 {
            return 0.0;
        }
        let down = means.windows(2).filter(|p| p[1] < p[0]).count();
        down as f64 / (means.len() - 1) as f64
    }
}

/// Mean and sd of `||w_hat - w_0||` over trials, for each `n`.
pub fn simulate_consistency(scenario: &SimScenario, spec: &PenaltySpec) -> Result<ConsistencyTable> {
    scenario.validate()?;
    let config = SolverConfig::default();
    let k = scenario.nonzero();
    let mut rows = Vec::with_capacity(scenario.n_grid.len());
    for (ni, &n) in scenario.n_grid.iter().enumerate() {
        let w0 = scenario.weights_for(n);
        let lambda = scenario.lambda_rule.lambda(n, k);
        let spec_n = spec.with_lambda(lambda)?;
        let errors: Vec<Option<f64>> = (0..scenario.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(scenario.seed, ni, t);
                let data = gaussian_regression(&mut rng, n, &w0, scenario.sigma).ok()?;
                let fit = fit_penalized_ls(&data, &spec_n, &config).ok()?;
                let err = fit.weights.iter().zip(&w0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                err.is_finite().then_some(err)
            })
            .collect();
        let ok: Vec<f64> = errors.iter().flatten().copied().collect();
        let (mean, sd) = if ok.is_empty() { (None, None) } else {
            let (m, s) = mean_sd(&ok);
            (Some(m), Some(s))
        };
        rows.push(ConsistencyRow {
            n,
            p: w0.len(),
            lambda,
            mean_error: mean,
            sd_error: sd,
            trials: scenario.trials,
            failed: scenario.trials - ok.len(),
            lambda_rule: scenario.lambda_rule.label(),
        });
    }
    Ok(ConsistencyTable { spec: spec.to_string(), seed: scenario.seed, trials: scenario.trials, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasFactorResult {
    pub family: FamilyKind,
    pub w: f64,
    pub factor: f64,
}

/// Multiplier on the Lasso's asymptotic bias for a nonzero weight `w`:
/// `(-log eps) eps^|w|` (Laplace), `2 gamma / (pi (1 + gamma^2 w^2))`
/// (arctan), and 1 for the Lasso itself.
pub fn bias_factor(spec: &PenaltySpec, w: f64) -> Result<BiasFactorResult> {
    if !w.is_finite() {
        return Err(Error::NonFinite(w));
    }
    if w == 0.0 {
        return Err(Error::AtZero);
    }
    let factor = match spec.family() {
        Family::Laplace { epsilon } => -epsilon.ln() * epsilon.powf(w.abs()),
        Family::Arctan { gamma } => 2.0 * gamma / (PI * (1.0 + gamma * gamma * w * w)),
        Family::L1 => 1.0,
        _ => {
            return Err(Error::Unsupported {
                op: "bias factor",
                family: spec.kind().name(),
                reason: "defined for laplace, arctan and l1",
            })
        }
    };
    Ok(BiasFactorResult { family: spec.kind(), w, factor })
}

/// `w^2` below which the arctan bias factor exceeds 1.
pub fn arctan_unit_factor_boundary(gamma: f64) -> f64 {
    (2.0 * gamma - PI) / (gamma * gamma * PI)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasRow {
    pub family: FamilyKind,
    pub n: usize,
    pub coordinate: usize,
    pub w: f64,
    pub lambda0: f64,
    /// `None` for zero weights.
    pub theoretical_factor: Option<f64>,
    pub theoretical_bias: Option<f64>,
    /// Mean of `sqrt(n) (w_hat - w)`.
    pub empirical_bias_raw: f64,
    /// Mean of `sqrt(n) (w_hat - w_ols)`; same expectation, less noise.
    pub empirical_bias: f64,
    pub empirical_ratio: Option<f64>,
    pub zero_fraction: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasTable {
    pub spec: String,
    pub seed: u64,
    pub trials: usize,
    pub rows: Vec<BiasRow>,
}

impl BiasTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "family",
            "n",
            "coordinate",
            "w",
            "lambda0",
            "theoretical_factor",
            "theoretical_bias",
            "empirical_bias",
            "empirical_bias_raw",
            "empirical_ratio",
            "zero_fraction",
            "trials",
            "seed",
        ])?;
        let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for r in &self.rows {
            wtr.write_record([
                r.family.name().to_string(),
                r.n.to_string(),
                r.coordinate.to_string(),
                r.w.to_string(),
                r.lambda0.to_string(),
                cell(r.theoretical_factor),
                cell(r.theoretical_bias),
                r.empirical_bias.to_string(),
                r.empirical_bias_raw.to_string(),
                cell(r.empirical_ratio),
                r.zero_fraction.to_string(),
                r.trials.to_string(),
                self.seed.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Orthonormal design with `X^T X = n I` and `lambda_n = lambda0 sqrt(n)`.
///
/// The least-squares objective depends on the data only through `X^T y`,
/// which is exactly `n (w + sigma z / sqrt(n))` with `z` standard normal.
/// Each trial therefore fits the equivalent `p x p` problem
/// `X = sqrt(n) I`, `y = sqrt(n) w_ols`.
pub fn simulate_sqrtn_bias(scenario: &SimScenario, spec: &PenaltySpec) -> Result<BiasTable> {
    scenario.validate()?;
    let LambdaRule::SqrtN { lambda0 } = scenario.lambda_rule else {
        return Err(Error::Config("the sqrt(n) bias experiment needs lambda_rule sqrt_n_times_lambda0".into()));
    };
    let config = SolverConfig::default();
    let p = scenario.true_w.len();
    let mut rows = Vec::new();
    for (ni, &n) in scenario.n_grid.iter().enumerate() {
        let spec_n = spec.with_lambda(scenario.lambda_rule.lambda(n, 0))?;
        let root_n = (n as f64).sqrt();
        let trials: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..scenario.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(scenario.seed, ni, t);
                let w_ols: Vec<f64> = scenario
                    .true_w
                    .iter()
                    .map(|&w| w + scenario.sigma * rng.sample::<f64, _>(StandardNormal) / root_n)
                    .collect();
                let x = DMatrix::from_diagonal_element(p, p, root_n);
                let y = DVector::from_iterator(p, w_ols.iter().map(|&w| root_n * w));
                let fit = fit_penalized_ls(&Dataset::new(x, y)?, &spec_n, &config)?;
                Ok((fit.weights, w_ols))
            })
            .collect();
        let trials: Vec<(Vec<f64>, Vec<f64>)> = trials.into_iter().collect::<Result<_>>()?;
        let count = trials.len() as f64;
        for (j, &w) in scenario.true_w.iter().enumerate() {
            let raw = trials.iter().map(|(f, _)| root_n * (f[j] - w)).sum::<f64>() / count;
            let cv = trials.iter().map(|(f, o)| root_n * (f[j] - o[j])).sum::<f64>() / count;
            let zeros = trials.iter().filter(|(f, _)| f[j] == 0.0).count() as f64 / count;
            let factor = if w == 0.0 { None } else { Some(bias_factor(spec, w)?.factor) };
            let lasso_bias = -0.5 * lambda0 * w.signum();
            rows.push(BiasRow {
                family: spec.kind(),
                n,
                coordinate: j,
                w,
                lambda0,
                theoretical_factor: factor,
                theoretical_bias: factor.map(|f| f * lasso_bias),
                empirical_bias_raw: raw,
                empirical_bias: cv,
                empirical_ratio: (w != 0.0 && lambda0 != 0.0).then(|| cv / lasso_bias),
                zero_fraction: zeros,
                trials: scenario.trials,
            });
        }
    }
    Ok(BiasTable { spec: spec.to_string(), seed: scenario.seed, trials: scenario.trials, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxKind {
    Bridge,
    Laplace,
    Arctan,
}

/// Error of approximating the indicator on `[a, a + 1]`. Returns
/// `(quadrature error, leading-order estimate)`; `param` is `eps` for all
/// three kinds, with `gamma = 1 / eps` for arctan.
pub fn approximation_error(kind: ApproxKind, param: f64, a: f64) -> Result<(f64, f64)> {
    if !(param > 0.0 && param < 1.0) {
        return Err(Error::Config(format!("param must lie in (0, 1), got {param}")));
    }
    if !(a > 1.0 && a.is_finite()) {
        return Err(Error::Config(format!("a must exceed 1, got {a}")));
    }
    let eps = param;
    let gamma = 1.0 / eps;
    // integrate approx - 1 directly so tiny errors keep their precision
    let gap = |x: f64| match kind {
        ApproxKind::Bridge => x.powf(eps) - 1.0,
        ApproxKind::Laplace => -eps.powf(x),
        ApproxKind::Arctan => (2.0 / PI) * (gamma * x).atan() - 1.0,
    };
    let tol = 1e-12 * match kind {
        ApproxKind::Bridge => 1.0,
        // scale the absolute tolerance to the integrand so tiny errors are resolved
        _ => gap(a).abs().max(1e-300),
    };
    let numeric = adaptive_simpson(gap, a, a + 1.0, tol).abs();
    let estimate = match kind {
        ApproxKind::Bridge => a.powf(eps) - 1.0,
        ApproxKind::Laplace => eps.powf(a),
        ApproxKind::Arctan => (1.0 - (2.0 / PI) * (gamma * a).atan()).abs(),
    };
    Ok((numeric, estimate))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prop3Bound {
    /// `|sum_j p(w_j) - p(w0_j)|` over the support of `w0`.
    pub lhs: f64,
    /// `lambda L sqrt(k) ||w_S - w0_S||`.
    pub bound: f64,
}

impl Prop3Bound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.bound + 1e-12 * self.bound.max(self.lhs).max(1e-300)
    }
}

/// Penalty-difference bound on the support `S` of `w0`, for Laplace
/// (`L = -log eps`) and arctan (`L = 2 gamma / pi`).
pub fn prop3_penalty_bound(spec: &PenaltySpec, w: &[f64], w0: &[f64]) -> Result<Prop3Bound> {
    if !matches!(spec.kind(), FamilyKind::Laplace | FamilyKind::Arctan) {
        return Err(Error::Unsupported {
            op: "penalty-difference bound",
            family: spec.kind().name(),
            reason: "stated for laplace and arctan",
        });
    }
    if w.len() != w0.len() {
        return Err(Error::Dimension(format!("{} vs {} weights", w.len(), w0.len())));
    }
    let mut diff = 0.0;
    let mut dist2 = 0.0;
    let mut k = 0usize;
    for (&a, &b) in w.iter().zip(w0) {
        if b != 0.0 {
            k += 1;
            diff += spec.value(a)? - spec.value(b)?;
            dist2 += (a - b) * (a - b);
        }
    }
    let bound = spec.lipschitz_bound()? * (k as f64).sqrt() * dist2.sqrt();
    Ok(Prop3Bound { lhs: diff.abs(), bound })
}

pub fn prop3_penalty_bound_check(spec: &PenaltySpec, w: &[f64], w0: &[f64]) -> Result<bool> {
    Ok(prop3_penalty_bound(spec, w, w0)?.holds())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bias_factor_examples() {
        let lap = PenaltySpec::laplace(1.0, 1e-4).unwrap();
        let f242 = bias_factor(&lap, 0.242).unwrap().factor;
        let f241 = bias_factor(&lap, 0.241).unwrap().factor;
        assert!(f242 < 1.0 && f241 > 1.0);
        assert!((f242 - 0.992).abs() < 1e-3 && (f241 - 1.001).abs() < 1e-3);

        let at = |g: f64| PenaltySpec::arctan(1.0, g).unwrap();
        assert_relative_eq!(bias_factor(&at(1.0), 0.5).unwrap().factor, 2.0 / (1.25 * PI), epsilon = 1e-15);
        assert!((bias_factor(&at(1.0), 0.5).unwrap().factor - 0.509).abs() < 1e-3);
        assert!((bias_factor(&at(100.0), 0.5).unwrap().factor - 0.0255).abs() < 1e-3);

        // the boundary peaks at gamma = pi, where w^2 = 1/pi^2 gives factor 1
        let b = arctan_unit_factor_boundary(PI);
        assert_relative_eq!(b, 1.0 / (PI * PI), epsilon = 1e-15);
        assert_relative_eq!(bias_factor(&at(PI), b.sqrt()).unwrap().factor, 1.0, epsilon = 1e-14);
        for g in [2.0, 3.0, 3.1, 3.2, 4.0, 10.0] {
            assert!(arctan_unit_factor_boundary(g) <= b);
        }

        assert!(matches!(bias_factor(&lap, 0.0), Err(Error::AtZero)));
        assert!(bias_factor(&PenaltySpec::scad(1.0, 3.7).unwrap(), 1.0).is_err());
        assert_eq!(bias_factor(&PenaltySpec::l1(2.0).unwrap(), -3.0).unwrap().factor, 1.0);
    }

    #[test]
    fn bias_factor_monotone_and_vanishing() {
        for spec in [PenaltySpec::laplace(1.0, 0.01).unwrap(), PenaltySpec::arctan(1.0, 10.0).unwrap()] {
            let mut prev = f64::INFINITY;
            for i in 1..200 {
                let w = 0.05 * i as f64;
                let f = bias_factor(&spec, w).unwrap().factor;
                assert!(f > 0.0 && f < prev);
                assert_eq!(f, bias_factor(&spec, -w).unwrap().factor);
                prev = f;
            }
            assert!(bias_factor(&spec, 1e6).unwrap().factor < 1e-9);
            // limit at 0+ is the slope constant per unit lambda
            let l = spec.lipschitz_bound().unwrap();
            assert_relative_eq!(bias_factor(&spec, 1e-12).unwrap().factor, l, max_relative = 1e-9);
        }
    }

    #[test]
    fn arctan_boundary_iff() {
        for &g in &[0.5, 1.0, 2.0, PI, 5.0, 20.0] {
            let b = arctan_unit_factor_boundary(g);
            let spec = PenaltySpec::arctan(1.0, g).unwrap();
            for i in 1..100 {
                let w = 0.02 * i as f64;
                if (w * w - b).abs() < 1e-9 {
                    continue;
                }
                let f = bias_factor(&spec, w).unwrap().factor;
                assert_eq!(f < 1.0, w * w > b, "gamma={g} w={w}");
            }
        }
    }

    #[test]
    fn approximation_error_examples() {
        // closed forms of the integrals
        let bridge_exact = |e: f64, a: f64| (((a + 1.0f64).powf(e + 1.0) - a.powf(e + 1.0)) / (e + 1.0) - 1.0).abs();
        let lap_exact = |e: f64, a: f64| e.powf(a) * (1.0 - e) / -e.ln();
        let (num, est) = approximation_error(ApproxKind::Bridge, 0.1, 10.0).unwrap();
        assert_relative_eq!(num, bridge_exact(0.1, 10.0), max_relative = 1e-10);
        assert!((est - 0.2589).abs() < 1e-4);
        assert!((num - est).abs() <= 0.1 * est);
        let (num, est) = approximation_error(ApproxKind::Laplace, 0.1, 10.0).unwrap();
        assert_relative_eq!(est, 1e-10, max_relative = 1e-12);
        assert!(num <= 1e-9);
        assert_relative_eq!(num, lap_exact(0.1, 10.0), max_relative = 1e-8);
        for a in [2.0, 5.0, 10.0, 50.0] {
            let b = approximation_error(ApproxKind::Bridge, 0.1, a).unwrap().0;
            let l = approximation_error(ApproxKind::Laplace, 0.1, a).unwrap().0;
            let t = approximation_error(ApproxKind::Arctan, 0.1, a).unwrap().0;
            assert!(b > l && b > t, "a={a}");
        }
        assert!(approximation_error(ApproxKind::Bridge, 0.1, 0.5).is_err());
        assert!(approximation_error(ApproxKind::Laplace, 1.5, 3.0).is_err());
    }

    #[test]
    fn prop3_examples() {
        let lap = PenaltySpec::laplace(2.0, 0.01).unwrap();
        let w0 = [1.0, 0.0, -0.5];
        let b = prop3_penalty_bound(&lap, &w0, &w0).unwrap();
        assert_eq!((b.lhs, b.bound), (0.0, 0.0));
        assert!(b.holds());
        // zero coordinates of w0 do not enter
        let b = prop3_penalty_bound(&lap, &[1.0, 9.0, -0.5], &w0).unwrap();
        assert_eq!(b.lhs, 0.0);
        assert!(prop3_penalty_bound(&PenaltySpec::l1(1.0).unwrap(), &w0, &w0).is_err());
        assert!(prop3_penalty_bound(&lap, &[1.0], &w0).is_err());
    }

    #[test]
    fn lambda_rules() {
        assert_eq!(LambdaRule::Zero.lambda(100, 3), 0.0);
        assert_relative_eq!(LambdaRule::Power { c: 1.0, exponent: 0.4 }.lambda(6400, 3), 6400f64.powf(0.4));
        assert_eq!(LambdaRule::Power { c: 5.0, exponent: 1.0 }.lambda(100, 3), 500.0);
        assert_eq!(LambdaRule::SqrtN { lambda0: 2.0 }.lambda(100, 0), 20.0);
        assert_relative_eq!(LambdaRule::HhmScaled { c: 1.0, exponent: 0.5 }.lambda(400, 4), 10f64.sqrt());
        let r: LambdaRule = serde_json::from_str(r#"{"rule": "o_of_n", "c": 1, "exponent": 0.4}"#).unwrap();
        assert_eq!(r, LambdaRule::Power { c: 1.0, exponent: 0.4 });
        let r: LambdaRule = serde_json::from_str(r#"{"rule": "sqrt_n_times_lambda0", "lambda0": 1}"#).unwrap();
        assert_eq!(r, LambdaRule::SqrtN { lambda0: 1.0 });
    }

    fn scenario(rule: LambdaRule, trials: usize) -> SimScenario {
        SimScenario {
            true_w: vec![3.0, 1.5, 0.0, 2.0],
            n_grid: vec![100, 400, 1600],
            sigma: 1.0,
            lambda_rule: rule,
            trials,
            seed: 1,
            growing_p: false,
        }
    }

    #[test]
    fn consistency_is_reproducible_and_shrinks() {
        let s = scenario(LambdaRule::Zero, 40);
        let spec = PenaltySpec::laplace(1.0, 0.01).unwrap();
        let a = simulate_consistency(&s, &spec).unwrap();
        let b = simulate_consistency(&s, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.decreasing_fraction(), 1.0);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("n,p,lambda,mean_error,sd_error,trials,failed,lambda_rule,seed"));
        assert_eq!(text.lines().count(), 4);

        let mut g = s.clone();
        g.growing_p = true;
        let t = simulate_consistency(&g, &spec).unwrap();
        assert_eq!(t.rows.iter().map(|r| r.p).collect::<Vec<_>>(), vec![14, 24, 44]);

        let mut bad = s.clone();
        bad.n_grid = vec![400, 100];
        assert!(simulate_consistency(&bad, &spec).is_err());
    }

    #[test]
    fn sqrtn_bias_small() {
        let s = SimScenario {
            true_w: vec![3.0, 0.0],
            n_grid: vec![10_000],
            sigma: 1.0,
            lambda_rule: LambdaRule::SqrtN { lambda0: 1.0 },
            trials: 100,
            seed: 1,
            growing_p: false,
        };
        let t = simulate_sqrtn_bias(&s, &PenaltySpec::l1(1.0).unwrap()).unwrap();
        // soft thresholding shifts a large weight by exactly lambda / (2n)
        assert_relative_eq!(t.rows[0].empirical_bias, -0.5, max_relative = 1e-9);
        assert_relative_eq!(t.rows[0].empirical_ratio.unwrap(), 1.0, max_relative = 1e-9);
        assert!(t.rows[1].theoretical_factor.is_none());
        assert!(simulate_sqrtn_bias(&scenario(LambdaRule::Zero, 2), &PenaltySpec::l1(1.0).unwrap()).is_err());
    }
}
