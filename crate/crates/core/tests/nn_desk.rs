use ncreg::nn::{baseline_median, blobs, lambda_sweep, overfit_task, train_mlp, MlpConfig, OverfitTask, TrainConfig};
use ncreg::PenaltySpec;

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn penalty_pressure_shrinks_weights() {
    let task = OverfitTask::default();
    let data = overfit_task(&task).unwrap();
    let mlp = MlpConfig::new(vec![task.features, 32, 32, task.classes], 1);
    let train = TrainConfig::default();
    let grid: Vec<f64> = (0..8).map(|i| -4.0 + 0.4 * i as f64).collect();
    for spec in [PenaltySpec::l1(1.0).unwrap(), PenaltySpec::laplace(1.0, 1e-7).unwrap(), PenaltySpec::arctan(1.0, 1.0).unwrap()] {
        let rep = lambda_sweep(&data, &mlp, &train, &spec, &grid, &[1]).unwrap();
        let mean_abs: Vec<f64> = rep.rows.iter().map(|r| r.per_seed_mean_abs_weight[0].unwrap()).collect();
        let rho = spearman(&grid, &mean_abs);
        println!("{spec}: spearman(lambda, mean |w|) = {rho:.3}");
        assert!(rho <= 0.0);
    }
}

#[test]
fn zero_lambda_row_is_the_baseline() {
    let data = blobs(200, 3, 2).unwrap();
    let mlp = MlpConfig::new(vec![3, 16, 2], 1);
    let train = TrainConfig { max_epochs: 30, ..Default::default() };
    let (base, per_seed) = baseline_median(&data, &mlp, &train, &[1, 2, 3]).unwrap();
    // 10^-400 underflows to an exact zero lambda
    let rep = lambda_sweep(&data, &mlp, &train, &PenaltySpec::laplace(1.0, 0.01).unwrap(), &[-400.0], &[1, 2, 3]).unwrap();
    assert_eq!(rep.rows[0].lambda, 0.0);
    assert_eq!(rep.rows[0].median_test_error, Some(base));
    let errs: Vec<f64> = rep.rows[0].per_seed_errors.iter().map(|e| e.unwrap()).collect();
    assert_eq!(errs, per_seed);
}

#[test]
fn default_seeds_give_three_runs() {
    let data = blobs(200, 4, 9).unwrap();
    let mlp = MlpConfig::new(vec![4, 16, 2], 1);
    let train = TrainConfig { max_epochs: 20, ..Default::default() };
    let rep = lambda_sweep(&data, &mlp, &train, &PenaltySpec::arctan(1.0, 1.0).unwrap(), &[-4.0], &[1, 2, 3]).unwrap();
    let runs: Vec<f64> = rep.rows[0].per_seed_errors.iter().flatten().copied().collect();
    assert_eq!(runs.len(), 3);
    let r = train_mlp(&data, &MlpConfig::new(vec![4, 16, 2], 2), &TrainConfig { seed: 2, ..train }, &PenaltySpec::arctan(1e-4, 1.0).unwrap())
        .unwrap();
    assert_eq!(Some(r.test_error_rate), rep.rows[0].per_seed_errors[1]);
}
