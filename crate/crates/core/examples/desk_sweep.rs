//! Lambda sweep on the synthetic overfit task, against the unregularized
//! baseline. Prints one CSV per penalty.

use std::time::Instant;

use ncreg::nn::{default_log10_grid, baseline_median, lambda_sweep, overfit_task, MlpConfig, OverfitTask, TrainConfig};
use ncreg::PenaltySpec;

fn main() -> ncreg::Result<()> {
    let task = OverfitTask::default();
    let data = overfit_task(&task)?;
    let mlp = MlpConfig::new(vec![task.features, 128, 128, task.classes], 1);
    let train = TrainConfig::default();
    let seeds = [1, 2, 3];
    let start = Instant::now();
    let (base, per_seed) = baseline_median(&data, &mlp, &train, &seeds)?;
    println!("baseline median {base:.4} {per_seed:?} ({:.1?})", start.elapsed());
    for spec in [PenaltySpec::laplace(1.0, 1e-7)?, PenaltySpec::arctan(1.0, 1.0)?] {
        let rep = lambda_sweep(&data, &mlp, &train, &spec, &default_log10_grid(), &seeds)?;
        rep.write_csv(std::io::stdout())?;
        println!("{spec}: best median {:?} ({:.1?})", rep.best_median(), start.elapsed());
    }
    Ok(())
}
