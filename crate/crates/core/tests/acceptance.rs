//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::f64::consts::{E, PI};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use ncreg::asymptotics::{
    approximation_error, arctan_unit_factor_boundary, bias_factor, prop3_penalty_bound, simulate_consistency,
    ApproxKind, LambdaRule, SimScenario,
};
use ncreg::nn::{default_log10_grid, baseline_median, gradient_check, lambda_sweep, overfit_task, MlpConfig, OverfitTask, TrainConfig};
use ncreg::penalty::{arctan_sum_square_slack, laplace_linear_slack, laplace_sum_square_slack};
use ncreg::properties::{check_properties, sparsity_continuity_region};
use ncreg::prox::{default_half_width, global_min_threshold, prox_oracle, prox_scalar};
use ncreg::solvers::{fit_penalized_ls, Algorithm, SolverConfig};
use ncreg::{Dataset, Property, PenaltySpec, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn c1_properties() -> Outcome {
    let start = Instant::now();
    let bounded = [
        PenaltySpec::laplace(0.03, 0.01).unwrap(),
        PenaltySpec::laplace(0.002, 1e-7).unwrap(),
        PenaltySpec::arctan(1.0, 1.0).unwrap(),
        PenaltySpec::arctan(1e-4, 100.0).unwrap(),
    ];
    let mut failures = Vec::new();
    for spec in &bounded {
        let report = check_properties(spec);
        for p in Property::ALL {
            if p == Property::P6 {
                continue;
            }
            if report.verdict(p) != Verdict::Holds {
                failures.push(format!("{spec} {}", p.label()));
            }
        }
    }
    let flat = [
        PenaltySpec::scad(1.0, 3.7).unwrap(),
        PenaltySpec::mcp(1.0, 1.5).unwrap(),
        PenaltySpec::mcp(1.0, 5.0).unwrap(),
        PenaltySpec::mcp(1.0, 20.0).unwrap(),
    ];
    for spec in &flat {
        let report = check_properties(spec);
        for p in [Property::P1, Property::P2, Property::P3, Property::P4, Property::P5, Property::P6] {
            if report.verdict(p) != Verdict::Holds {
                failures.push(format!("{spec} {}", p.label()));
            }
        }
    }
    let t = start.elapsed();
    outcome(failures.is_empty() && within(t, 10.0), format!("failures {failures:?}, {t:.2?}"))
}

fn c2_region() -> Outcome {
    let eps: f64 = 0.01;
    let l2 = eps.ln().powi(2);
    let (lo, hi) = sparsity_continuity_region(&PenaltySpec::laplace(1.0, eps).unwrap()).unwrap();
    let (elo, ehi) = (1.0 / (E * l2), 1.0 / l2);
    let pass = (lo - elo).abs() <= 1e-3 && (hi - ehi).abs() <= 1e-3 && (lo - 0.017).abs() < 1e-3 && (hi - 0.047).abs() < 1e-3;
    outcome(pass, format!("region ({lo:.5}, {hi:.5}) vs ({elo:.5}, {ehi:.5})"))
}

fn c3_thresholds() -> Outcome {
    let start = Instant::now();
    let l1 = global_min_threshold(&PenaltySpec::l1(1.0).unwrap(), 3.0).unwrap();
    let lap = global_min_threshold(&PenaltySpec::laplace(1.0, 0.01).unwrap(), 3.0).unwrap();
    let t = start.elapsed();
    let pass = (l1 - 6.0).abs() <= 1e-4 && (lap - 9.0).abs() <= 0.5 && within(t, 5.0);
    outcome(pass, format!("l1 {l1:.6}, laplace {lap:.4}, {t:.2?}"))
}

fn c4_bias_factors() -> Outcome {
    let lap = PenaltySpec::laplace(1.0, 1e-4).unwrap();
    let at = |g: f64| PenaltySpec::arctan(1.0, g).unwrap();
    let f242 = bias_factor(&lap, 0.242).unwrap().factor;
    let f241 = bias_factor(&lap, 0.241).unwrap().factor;
    let crossing = f242 < 1.0 && f241 > 1.0;
    // closed forms
    let lap_ok = (f242 - 9.2103404 * 1e-4f64.powf(0.242)).abs() < 1e-6 && (f242 - 0.992).abs() < 1e-3 && (f241 - 1.001).abs() < 1e-3;
    let g1 = bias_factor(&at(1.0), 0.5).unwrap().factor;
    let g100 = bias_factor(&at(100.0), 0.5).unwrap().factor;
    let g_ok = (g1 - 2.0 / (1.25 * PI)).abs() < 1e-12 && (g1 - 0.509).abs() < 1e-3 && (g100 - 0.0255).abs() < 1e-3;
    // the boundary (2 gamma - pi) / (gamma^2 pi), maximized numerically over gamma
    let (mut best_g, mut best_b) = (0.0, f64::NEG_INFINITY);
    for i in 1..=200_000 {
        let g = 1e-4 * i as f64;
        let b = arctan_unit_factor_boundary(g);
        if b > best_b {
            best_g = g;
            best_b = b;
        }
    }
    let closed = 1.0 / (PI * PI);
    let boundary_ok = (best_g - PI).abs() < 1e-3 && (best_b - closed).abs() < 1e-3;
    let unit = bias_factor(&at(PI), best_b.sqrt()).unwrap().factor;
    let pass = crossing && lap_ok && g_ok && boundary_ok && (unit - 1.0).abs() < 1e-3;
    outcome(
        pass,
        format!(
            "laplace {f241:.4}/{f242:.4} at 0.241/0.242; arctan {g1:.4} (g=1), {g100:.4} (g=100); \
             boundary max {best_b:.4} at gamma {best_g:.4} = 1/pi^2 (the quoted 2/pi^2 = {:.4} gives factor {:.4})",
            2.0 / (PI * PI),
            bias_factor(&at(PI), (2.0 / (PI * PI)).sqrt()).unwrap().factor
        ),
    )
}

fn c5_prox_oracle() -> Outcome {
    let start = Instant::now();
    let families: Vec<(&str, fn(f64) -> PenaltySpec)> = vec![
        ("l1", |l| PenaltySpec::l1(l).unwrap()),
        ("l2", |l| PenaltySpec::l2(l).unwrap()),
        ("bridge 0.5", |l| PenaltySpec::bridge(l, 0.5).unwrap()),
        ("bridge 1.5", |l| PenaltySpec::bridge(l, 1.5).unwrap()),
        ("scad", |l| PenaltySpec::scad(l, 3.7).unwrap()),
        ("mcp", |l| PenaltySpec::mcp(l, 1.5).unwrap()),
        ("laplace", |l| PenaltySpec::laplace(l, 0.01).unwrap()),
        ("laplace 1e-7", |l| PenaltySpec::laplace(l, 1e-7).unwrap()),
        ("arctan", |l| PenaltySpec::arctan(l, 1.0).unwrap()),
        ("arctan 100", |l| PenaltySpec::arctan(l, 100.0).unwrap()),
        ("geman_mcclure", |l| PenaltySpec::geman_mcclure(l, 0.5).unwrap()),
        ("log", |l| PenaltySpec::log(l, 0.5).unwrap()),
        ("capped_l1", |l| PenaltySpec::capped_l1(l, 1.0).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = Vec::new();
    let mut ties = 0;
    for (name, make) in &families {
        for _ in 0..1000 {
            let lambda = 10f64.powf(rng.random_range(-2.0..1.3));
            let w_hat: f64 = rng.random_range(-10.0..10.0);
            let spec = make(lambda);
            let r = prox_scalar(&spec, w_hat).unwrap();
            let o = prox_oracle(&spec, w_hat, default_half_width(w_hat), 10_001).unwrap();
            if (r.global_min - o.w).abs() <= 2.0 * o.resolution {
                continue;
            }
            // two global minima with equal objective: either is correct
            if r.objective_at_min <= o.objective + 1e-12 * o.objective.abs().max(1.0) {
                ties += 1;
                continue;
            }
            violations.push(format!("{name} lambda={lambda} w_hat={w_hat}"));
        }
    }
    let t = start.elapsed();
    outcome(
        violations.is_empty() && within(t, 60.0),
        format!("{} problems, {} violations {violations:?}, {ties} exact ties, {t:.2?}", 1000 * families.len(), violations.len()),
    )
}

fn c6_orthonormal() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(60, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = a.qr().q();
        let y = DVector::from_fn(60, |_, _| 3.0 * rng.sample::<f64, _>(StandardNormal));
        let d = Dataset::new(q, y).unwrap();
        let w_hat = d.x.tr_mul(&d.y);
        for lambda in [0.5, 2.0, 6.0] {
            for spec in [
                PenaltySpec::l1(lambda).unwrap(),
                PenaltySpec::laplace(lambda, 0.01).unwrap(),
                PenaltySpec::arctan(lambda, 1.0).unwrap(),
                PenaltySpec::scad(lambda, 3.7).unwrap(),
                PenaltySpec::mcp(lambda, 1.5).unwrap(),
            ] {
                for alg in [Algorithm::Cgd, Algorithm::Dca] {
                    let fit = fit_penalized_ls(&d, &spec, &SolverConfig::default().with_algorithm(alg)).unwrap();
                    for j in 0..8 {
                        let expect = prox_scalar(&spec, w_hat[j]).unwrap().global_min;
                        worst = worst.max((fit.weights[j] - expect).abs());
                    }
                }
            }
        }
    }
    let t = start.elapsed();
    outcome(worst <= 1e-6 && within(t, 30.0), format!("max |w - prox| = {worst:.2e}, {t:.2?}"))
}

fn c7_dca_descent() -> Outcome {
    let families = [
        PenaltySpec::l1(4.0).unwrap(),
        PenaltySpec::laplace(4.0, 0.01).unwrap(),
        PenaltySpec::laplace(4.0, 1e-7).unwrap(),
        PenaltySpec::arctan(4.0, 1.0).unwrap(),
        PenaltySpec::arctan(4.0, 100.0).unwrap(),
        PenaltySpec::scad(4.0, 3.7).unwrap(),
        PenaltySpec::mcp(4.0, 1.5).unwrap(),
    ];
    let mut worst = f64::NEG_INFINITY;
    let mut steps = 0;
    for seed in 0..100u64 {
        let spec = &families[seed as usize % families.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(30, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = DVector::from_vec(vec![1.5, 0.0, -2.0, 0.0, 0.4]);
        let e = DVector::from_fn(30, |_, _| rng.sample::<f64, _>(StandardNormal));
        let d = Dataset::new(x.clone(), &x * w + e).unwrap();
        let cfg = SolverConfig { polish: false, ..SolverConfig::default().with_algorithm(Algorithm::Dca) };
        let fit = fit_penalized_ls(&d, spec, &cfg).unwrap();
        for pair in fit.objective_trace.windows(2) {
            worst = worst.max(pair[1] - pair[0]);
            steps += 1;
        }
    }
    outcome(worst <= 1e-10, format!("100 fits, {steps} steps, largest increase {worst:.2e}"))
}

fn c8_dc_lipschitz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_ratio: f64 = 0.0;
    let cases: Vec<(PenaltySpec, f64)> = [0.5, 0.01, 1e-7]
        .iter()
        .map(|&e: &f64| (PenaltySpec::laplace(1.0, e).unwrap(), e.ln().powi(2)))
        .chain([1.0, 10.0, 100.0].iter().map(|&g| (PenaltySpec::arctan(1.0, g).unwrap(), g * g)))
        .collect();
    for (spec, bound) in &cases {
        let scale = bound.sqrt();
        for i in 0..10_000 {
            // half the pairs within a few curvature lengths of zero
            let range = if i % 2 == 0 { 5.0 / scale } else { 5.0 };
            let s: f64 = rng.random_range(-range..range);
            let t: f64 = rng.random_range(-range..range);
            if s == t {
                continue;
            }
            let hs = spec.dc_components(s).unwrap().h_deriv;
            let ht = spec.dc_components(t).unwrap().h_deriv;
            let slope = (hs - ht).abs() / (s - t).abs();
            worst_ratio = worst_ratio.max(slope / bound);
        }
    }
    outcome(worst_ratio <= 1.0 + 1e-6, format!("max slope / bound = {worst_ratio:.8} over 60000 pairs"))
}

fn c9_approximation() -> Outcome {
    let mut ordered = true;
    for a in [2.0, 5.0, 10.0, 50.0] {
        let b = approximation_error(ApproxKind::Bridge, 0.1, a).unwrap().0;
        let l = approximation_error(ApproxKind::Laplace, 0.1, a).unwrap().0;
        let t = approximation_error(ApproxKind::Arctan, 0.1, a).unwrap().0;
        ordered &= b > l && b > t;
    }
    let (lap10, _) = approximation_error(ApproxKind::Laplace, 0.1, 10.0).unwrap();
    let (br10, est) = approximation_error(ApproxKind::Bridge, 0.1, 10.0).unwrap();
    let pass = ordered && lap10 <= 1e-9 && (br10 - 0.2589).abs() <= 0.1 * 0.2589 && (est - 0.2589).abs() < 1e-4;
    outcome(pass, format!("ordering {ordered}; laplace(a=10) {lap10:.3e}; bridge(a=10) {br10:.4} vs 0.2589"))
}

fn c10_inequalities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut violations = 0;
    for _ in 0..10_000 {
        let eps: f64 = 10f64.powf(rng.random_range(-8.0..-0.01));
        let gamma: f64 = 10f64.powf(rng.random_range(-1.0..2.5));
        let t = rng.random_range(1..30);
        let beta: Vec<f64> = (0..t).map(|_| rng.random::<f64>() * 10f64.powf(rng.random_range(-3.0..1.0))).collect();
        let sq: f64 = beta.iter().map(|b| b * b).sum::<f64>() * t as f64;
        if laplace_sum_square_slack(eps, &beta) < -1e-12 * eps.ln().powi(2) * sq {
            violations += 1;
        }
        if arctan_sum_square_slack(gamma, &beta) < -1e-12 * gamma * gamma * sq {
            violations += 1;
        }
        if laplace_linear_slack(eps, beta[0]) < -1e-15 {
            violations += 1;
        }
    }
    let specs: Vec<PenaltySpec> = [0.5, 0.01, 1e-7]
        .iter()
        .map(|&e| PenaltySpec::laplace(2.0, e).unwrap())
        .chain([1.0, 10.0, 100.0].iter().map(|&g| PenaltySpec::arctan(2.0, g).unwrap()))
        .collect();
    let mut prop3_cases = 0;
    for spec in &specs {
        for _ in 0..10_000 {
            let p = rng.random_range(1..10);
            let w0: Vec<f64> = (0..p).map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random_range(-4.0..4.0) }).collect();
            let w: Vec<f64> = w0.iter().map(|v| v + rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-4.0..0.5))).collect();
            if !prop3_penalty_bound(spec, &w, &w0).unwrap().holds() {
                violations += 1;
            }
            prop3_cases += 1;
        }
    }
    outcome(violations == 0, format!("30000 vector/scalar cases + {prop3_cases} bound cases, {violations} violations"))
}

fn c11_gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = DMatrix::from_fn(20, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(20, |i, _| (i % 3) as f64);
    let data = Dataset::new(x, y).unwrap();
    let mlp = MlpConfig::new(vec![5, 8, 3], 4);
    let specs = [
        PenaltySpec::none(),
        PenaltySpec::l1(0.1).unwrap(),
        PenaltySpec::l2(0.1).unwrap(),
        PenaltySpec::bridge(0.1, 1.5).unwrap(),
        PenaltySpec::scad(0.1, 3.7).unwrap(),
        PenaltySpec::mcp(0.1, 1.5).unwrap(),
        PenaltySpec::laplace(0.1, 0.01).unwrap(),
        PenaltySpec::laplace(0.1, 1e-7).unwrap(),
        PenaltySpec::arctan(0.1, 1.0).unwrap(),
        PenaltySpec::arctan(0.1, 100.0).unwrap(),
        PenaltySpec::geman_mcclure(0.1, 0.5).unwrap(),
        PenaltySpec::log(0.1, 0.5).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    let mut worst_spec = String::new();
    for spec in &specs {
        let e = gradient_check(&mlp, &data, spec).unwrap();
        if e > worst {
            worst = e;
            worst_spec = spec.to_string();
        }
    }
    outcome(worst <= 1e-5, format!("{} penalties, max relative error {worst:.2e} ({worst_spec})", specs.len()))
}

fn c12_training_direction() -> Outcome {
    let start = Instant::now();
    let task = OverfitTask::default();
    let data = overfit_task(&task).unwrap();
    let mlp = MlpConfig::new(vec![task.features, 128, 128, task.classes], 1);
    let train = TrainConfig::default();
    let seeds = [1, 2, 3];
    let (base, _) = baseline_median(&data, &mlp, &train, &seeds).unwrap();
    let grid = default_log10_grid();
    let mut parts = vec![format!("synthetic fallback {}, baseline median {base:.4}", data.source)];
    let mut pass = true;
    for spec in [PenaltySpec::laplace(1.0, 1e-7).unwrap(), PenaltySpec::arctan(1.0, 1.0).unwrap()] {
        let rep = lambda_sweep(&data, &mlp, &train, &spec, &grid, &seeds).unwrap();
        let best = rep.best_median().unwrap_or(f64::INFINITY);
        pass &= rep.rows.len() == 16 && best <= base;
        parts.push(format!("{} best median {best:.4}", spec.kind()));
    }
    let t = start.elapsed();
    pass &= within(t, 1800.0);
    parts.push(format!("{t:.1?}"));
    outcome(pass, parts.join("; "))
}

fn c13_consistency() -> Outcome {
    let start = Instant::now();
    let scenario = SimScenario {
        true_w: vec![3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0],
        n_grid: vec![100, 400, 1600, 6400],
        sigma: 1.0,
        lambda_rule: LambdaRule::Power { c: 1.0, exponent: 0.4 },
        trials: 500,
        seed: 1,
        growing_p: false,
    };
    let mut parts = Vec::new();
    let mut down = 0;
    let mut pairs = 0;
    for spec in [PenaltySpec::laplace(1.0, 0.01).unwrap(), PenaltySpec::arctan(1.0, 1.0).unwrap()] {
        let t = simulate_consistency(&scenario, &spec).unwrap();
        let means: Vec<f64> = t.rows.iter().map(|r| r.mean_error.unwrap_or(f64::NAN)).collect();
        down += means.windows(2).filter(|p| p[1] < p[0]).count();
        pairs += means.len() - 1;
        parts.push(format!("{}: {:?}", spec.kind(), means.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>()));
    }
    let t = start.elapsed();
    let frac = down as f64 / pairs as f64;
    parts.push(format!("{down}/{pairs} decreasing, {t:.1?}"));
    outcome(frac >= 0.9 && within(t, 300.0), parts.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("property suite", c1_properties),
        ("region reproduction", c2_region),
        ("threshold reproduction", c3_thresholds),
        ("bias-factor arithmetic", c4_bias_factors),
        ("prox oracle equivalence", c5_prox_oracle),
        ("orthonormal-design equivalence", c6_orthonormal),
        ("DCA monotone descent", c7_dca_descent),
        ("DC Lipschitz bounds", c8_dc_lipschitz),
        ("approximation-error ordering", c9_approximation),
        ("penalty inequalities and bounds", c10_inequalities),
        ("MLP gradient check", c11_gradient_check),
        ("desk-scale training direction", c12_training_direction),
        ("consistency simulation", c13_consistency),
    ];
    // "cargo test -- <filter>" passes extra args; run only matching criteria
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || (i + 1).to_string() == *f) {
            continue;
        }
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {:>2} {:<32} {}  {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
