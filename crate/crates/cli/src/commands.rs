use std::io::Write;
use std::path::Path;

use ncreg::asymptotics::{approximation_error, bias_factor, simulate_consistency, simulate_sqrtn_bias};
use ncreg::nn::{baseline_median, lambda_sweep, train_mlp};
use ncreg::properties::check_properties;
use ncreg::prox::{animation_lambda_grid, animation_w_grid, global_min_threshold, objective_curve, prox_oracle_default, prox_scalar};
use ncreg::solvers::{fit_penalized, penalized_objective, stationarity_residual};
use ncreg::{Algorithm, Dataset, Loss, SolverConfig};
use serde::Serialize;
use serde_json::json;

use crate::config::*;
use crate::error::{CliError, CliResult};
use crate::manifest::{manifest_path, InputFile, RunClock};
use crate::{AlgorithmArg, Cli, Command, LossArg};

struct Run<'a> {
    cli: &'a Cli,
    subcommand: &'static str,
    clock: RunClock,
}

impl Run<'_> {
    fn write_manifest(&self, out: &Path, config: &impl Serialize, seeds: Vec<u64>, inputs: Vec<InputFile>) -> CliResult<()> {
        let mpath = manifest_path(out);
        let outputs = vec![out.display().to_string(), mpath.display().to_string()];
        let m = self.clock.manifest(self.subcommand, serde_json::to_value(config)?, seeds, inputs, outputs);
        std::fs::write(&mpath, serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(())
    }

    /// CSV to `--out` (plus manifest) or to stdout.
    fn csv(&self, config: &impl Serialize, seeds: Vec<u64>, inputs: Vec<InputFile>, body: Vec<u8>, summary: &str) -> CliResult<()> {
        match &self.cli.out {
            None => std::io::stdout().write_all(&body)?,
            Some(out) => {
                std::fs::write(out, &body)?;
                self.write_manifest(out, config, seeds, inputs)?;
                println!("{summary}");
                println!("wrote {}", out.display());
            }
        }
        Ok(())
    }

    /// Summary to stdout; with `--out`, the JSON report and manifest.
    fn json(&self, config: &impl Serialize, seeds: Vec<u64>, inputs: Vec<InputFile>, report: serde_json::Value, summary: &str) -> CliResult<()> {
        print!("{summary}");
        if !summary.ends_with('\n') {
            println!();
        }
        if let Some(out) = &self.cli.out {
            let mname = manifest_path(out).file_name().map(|n| n.to_string_lossy().into_owned());
            let doc = json!({"manifest": mname, "report": report});
            std::fs::write(out, serde_json::to_string_pretty(&doc)? + "\n")?;
            self.write_manifest(out, config, seeds, inputs)?;
        }
        Ok(())
    }
}

/// Config from `--config`, or from flags when none is given.
fn resolve<T: serde::de::DeserializeOwned>(
    config: &Option<std::path::PathBuf>,
    subcommand: &str,
    flags_given: bool,
    from_flags: impl FnOnce() -> CliResult<T>,
) -> CliResult<T> {
    match config {
        Some(path) if flags_given => Err(CliError::flag("--config", format!("--config {} cannot be combined with other {subcommand} flags", path.display()))),
        Some(path) => load_config(path, subcommand),
        None => from_flags(),
    }
}

fn need<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::flag(flag, format!("missing {flag}")))
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let name = match &cli.command {
        Command::Penalty(_) => "penalty",
        Command::Prox(_) => "prox",
        Command::Threshold(_) => "threshold",
        Command::Properties(_) => "properties",
        Command::Fit(_) => "fit",
        Command::Asym(_) => "asym",
        Command::Train(_) => "train",
        Command::Sweep(_) => "sweep",
    };
    let run = Run { cli, subcommand: name, clock: RunClock::start() };
    match &cli.command {
        Command::Penalty(a) => {
            let cfg: PenaltyCmd = resolve(&a.config, name, a.penalty.any() || a.grid.is_some(), || {
                Ok(PenaltyCmd { penalty: a.penalty.spec()?, grid: Grid::parse(&need(a.grid.clone(), "--grid")?)? })
            })?;
            cfg.grid.validate()?;
            cmd_penalty(&run, &cfg)
        }
        Command::Prox(a) => {
            let cfg: ProxCmd = resolve(&a.config, name, a.penalty.any() || a.w_hat.is_some() || a.oracle || a.animate_data, || {
                Ok(ProxCmd {
                    penalty: a.penalty.spec()?,
                    w_hat: need(a.w_hat, "--w-hat")?,
                    oracle: a.oracle,
                    animate_data: a.animate_data,
                })
            })?;
            cmd_prox(&run, &cfg)
        }
        Command::Threshold(a) => {
            let cfg: ThresholdCmd = resolve(&a.config, name, a.penalty.any() || a.w_hat.is_some(), || {
                let mut raw = a.penalty.raw()?;
                raw.lambda.get_or_insert(1.0);
                Ok(ThresholdCmd { penalty: raw.build().map_err(CliError::from_spec_error)?, w_hat: need(a.w_hat, "--w-hat")? })
            })?;
            cmd_threshold(&run, &cfg)
        }
        Command::Properties(a) => {
            let cfg: PropertiesCmd = resolve(&a.config, name, a.penalty.any(), || Ok(PropertiesCmd { penalty: a.penalty.spec()? }))?;
            cmd_properties(&run, &cfg)
        }
        Command::Fit(a) => {
            let cfg: FitCmd = resolve(&a.config, name, a.any_flag(), || {
                let defaults = SolverConfig::default();
                let solver = SolverConfig {
                    algorithm: match a.algorithm {
                        Some(AlgorithmArg::Dca) => Algorithm::Dca,
                        _ => Algorithm::Cgd,
                    },
                    step_size: a.step_size,
                    max_iters: a.max_iters.unwrap_or(defaults.max_iters),
                    tol: a.tol.unwrap_or(defaults.tol),
                    intercept: a.intercept,
                    polish: !a.no_polish,
                    ..defaults
                };
                Ok(FitCmd {
                    data: need(a.data.clone(), "--data")?,
                    penalty: a.penalty.spec()?,
                    loss: match a.loss {
                        Some(LossArg::Logistic) => Loss::Logistic,
                        _ => Loss::Ls,
                    },
                    standardize: a.standardize,
                    solver,
                })
            })?;
            cfg.solver.validate().map_err(CliError::from_spec_error)?;
            cmd_fit(&run, &cfg)
        }
        Command::Asym(a) => {
            let mut cfg: AsymCmd = load_config(&a.config, name)?;
            if let Some(seed) = cli.seed {
                cfg.set_seed(seed);
            }
            cmd_asym(&run, &cfg)
        }
        Command::Train(a) => {
            let mut cfg: TrainCmd = load_config(&a.config, name)?;
            if let Some(seed) = cli.seed {
                cfg.mlp.seed = seed;
                cfg.train.seed = seed;
            }
            cfg.mlp.validate().map_err(CliError::from_spec_error)?;
            cfg.train.validate().map_err(CliError::from_spec_error)?;
            cmd_train(&run, &cfg)
        }
        Command::Sweep(a) => {
            let mut cfg: SweepCmd = load_config(&a.config, name)?;
            if let Some(seed) = cli.seed {
                cfg.seeds = vec![seed];
            }
            cmd_sweep(&run, &cfg.resolve()?)
        }
    }
}

fn cmd_penalty(run: &Run, cfg: &PenaltyCmd) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Runtime(e.into());
    wtr.write_record(["t", "value", "derivative"]).map_err(io)?;
    let points = cfg.grid.points();
    for &t in &points {
        let d = cfg.penalty.deriv(t).map_or(String::new(), |d| d.to_string());
        wtr.write_record([t.to_string(), cfg.penalty.value(t)?.to_string(), d]).map_err(io)?;
    }
    let body = wtr.into_inner().map_err(|e| CliError::Runtime(e.into_error().into()))?;
    run.csv(cfg, vec![], vec![], body, &format!("{} rows for {}", points.len(), cfg.penalty))
}

fn cmd_prox(run: &Run, cfg: &ProxCmd) -> CliResult<()> {
    if cfg.animate_data {
        let curve = objective_curve(&cfg.penalty, cfg.w_hat, &animation_lambda_grid(), &animation_w_grid())?;
        let mut body = Vec::new();
        curve.write_csv(&mut body)?;
        return run.csv(cfg, vec![], vec![], body, &format!("{} objective values", curve.rows.len()));
    }
    let r = prox_scalar(&cfg.penalty, cfg.w_hat)?;
    let mut summary = format!("{} w_hat={}\nglobal minimizer {} (objective {})\n", cfg.penalty, cfg.w_hat, r.global_min, r.objective_at_min);
    for m in &r.local_minima {
        summary.push_str(&format!("  local minimum at {} (objective {})\n", m.w, m.objective));
    }
    let mut report = json!({"spec": cfg.penalty, "w_hat": cfg.w_hat, "prox": r});
    if cfg.oracle {
        let o = prox_oracle_default(&cfg.penalty, cfg.w_hat)?;
        summary.push_str(&format!("oracle {} (objective {}, resolution {:e})\n", o.w, o.objective, o.resolution));
        report["oracle"] = json!({"w": o.w, "objective": o.objective, "resolution": o.resolution});
    }
    run.json(cfg, vec![], vec![], report, &summary)
}

fn cmd_threshold(run: &Run, cfg: &ThresholdCmd) -> CliResult<()> {
    let star = global_min_threshold(&cfg.penalty, cfg.w_hat)?;
    let report = json!({"family": cfg.penalty.kind(), "spec": cfg.penalty, "w_hat": cfg.w_hat, "lambda_threshold": star});
    run.json(cfg, vec![], vec![], report, &format!("lambda* = {star:.6}"))
}

fn cmd_properties(run: &Run, cfg: &PropertiesCmd) -> CliResult<()> {
    let report = check_properties(&cfg.penalty);
    run.json(cfg, vec![], vec![], serde_json::to_value(&report)?, &report.render_table())
}

fn cmd_fit(run: &Run, cfg: &FitCmd) -> CliResult<()> {
    let mut data = Dataset::load_csv(&cfg.data)?;
    let inputs = vec![input_file(&cfg.data)?];
    let standardization = cfg.standardize.then(|| data.standardize());
    let fit = fit_penalized(&data, &cfg.penalty, &cfg.solver, cfg.loss)?;
    let objective = penalized_objective(&data, &fit.weights, &cfg.penalty, cfg.loss)?;
    let residual = match cfg.loss {
        Loss::Ls => Some(stationarity_residual(&data, &fit, &cfg.penalty)?),
        Loss::Logistic => None,
    };
    let mut summary = format!(
        "{} on {} ({} x {}): {} iterations, converged {}, objective {}, {} nonzero\n",
        cfg.penalty,
        cfg.data.display(),
        data.n(),
        data.p(),
        fit.iterations,
        fit.converged,
        fit.objective(),
        fit.n_nonzero
    );
    for (j, w) in fit.weights.iter().enumerate() {
        summary.push_str(&format!("w{} = {w}\n", j + 1));
    }
    if cfg.solver.intercept {
        summary.push_str(&format!("intercept = {}\n", fit.intercept));
    }
    let report = json!({
        "fit": fit,
        "penalized_objective_weights_only": objective,
        "stationarity_residual": residual,
        "standardization": standardization.map(|(m, s)| json!({"means": m, "sds": s})),
    });
    run.json(cfg, vec![], inputs, report, &summary)
}

fn cmd_asym(run: &Run, cfg: &AsymCmd) -> CliResult<()> {
    let mut body = Vec::new();
    let summary = match cfg {
        AsymCmd::Consistency { scenario, penalty } => {
            let t = simulate_consistency(scenario, penalty)?;
            t.write_csv(&mut body)?;
            format!("{} rows; error decreases on {:.0}% of adjacent n pairs", t.rows.len(), 100.0 * t.decreasing_fraction())
        }
        AsymCmd::SqrtnBias { scenario, penalty } => {
            let t = simulate_sqrtn_bias(scenario, penalty)?;
            t.write_csv(&mut body)?;
            format!("{} rows", t.rows.len())
        }
        AsymCmd::BiasFactor { penalty, w } => {
            let mut wtr = csv::Writer::from_writer(&mut body);
            wtr.write_record(["family", "w", "factor"]).map_err(|e| CliError::Runtime(e.into()))?;
            for &x in w {
                let r = bias_factor(penalty, x)?;
                wtr.write_record([r.family.to_string(), r.w.to_string(), r.factor.to_string()]).map_err(|e| CliError::Runtime(e.into()))?;
            }
            wtr.flush()?;
            drop(wtr);
            format!("{} bias factors", w.len())
        }
        AsymCmd::Approximation { kind, param, a } => {
            let mut wtr = csv::Writer::from_writer(&mut body);
            wtr.write_record(["kind", "param", "a", "numeric_error", "estimate"]).map_err(|e| CliError::Runtime(e.into()))?;
            let kname = serde_json::to_value(kind)?.as_str().unwrap_or_default().to_string();
            for &x in a {
                let (num, est) = approximation_error(*kind, *param, x)?;
                wtr.write_record([kname.clone(), param.to_string(), x.to_string(), num.to_string(), est.to_string()])
                    .map_err(|e| CliError::Runtime(e.into()))?;
            }
            wtr.flush()?;
            drop(wtr);
            format!("{} approximation errors", a.len())
        }
    };
    run.csv(cfg, cfg.seeds(), vec![], body, &summary)
}

fn cmd_train(run: &Run, cfg: &TrainCmd) -> CliResult<()> {
    let (data, inputs) = cfg.data.load()?;
    let r = train_mlp(&data, &cfg.mlp, &cfg.train, &cfg.penalty)?;
    let summary = format!(
        "{} on {}: test error {:.4}, best epoch {} of {}, validation loss {:.4}, sparsity {:.4}, mean |w| {:.4}",
        cfg.penalty, data.source, r.test_error_rate, r.best_epoch, r.epochs_run, r.best_validation_loss, r.sparsity_fraction, r.mean_abs_weight
    );
    let seeds = vec![cfg.mlp.seed, cfg.train.seed];
    run.json(cfg, seeds, inputs, serde_json::to_value(&r)?, &summary)
}

fn cmd_sweep(run: &Run, cfg: &SweepCmd) -> CliResult<()> {
    let (data, inputs) = cfg.data.load()?;
    let spec = cfg.penalty.build().map_err(CliError::from_spec_error)?;
    let report = lambda_sweep(&data, &cfg.mlp, &cfg.train, &spec, &cfg.grid, &cfg.seeds)?;
    let mut body = Vec::new();
    report.write_csv(&mut body)?;
    let mut summary = format!("{} rows; best median test error {}", report.rows.len(), report.best_median().map_or("-".into(), |m| format!("{m:.4}")));
    if cfg.baseline {
        let (median, _) = baseline_median(&data, &cfg.mlp, &cfg.train, &cfg.seeds)?;
        summary.push_str(&format!("; unpenalized median {median:.4}"));
    }
    for r in &report.rows {
        for f in &r.failures {
            eprintln!("warning: log10(lambda) = {:.1}: {f}", r.log10_lambda);
        }
    }
    run.csv(cfg, cfg.seeds.clone(), inputs, body, &summary)
}
