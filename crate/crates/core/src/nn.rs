//! Penalized multilayer perceptron training: ReLU hidden layers, softmax
//! output, mean cross-entropy, minibatch gradient descent with a triangular
//! learning rate and early stopping on validation loss.
//!
//! The penalty acts on connection weights only. Each step moves a weight
//! along the cross-entropy gradient, then along `-p'` evaluated at the moved
//! point (`p'(0) = 0`). A weight that the penalty step would push across
//! zero is set to exactly zero, so zeros stay put under a strong penalty.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Role};
use crate::error::{Error, Result};
use crate::penalty::PenaltySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    /// Input, hidden..., output (= number of classes).
    pub layer_sizes: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_activation() -> Activation {
    Activation::Relu
}

fn default_seed() -> u64 {
    1
}

impl MlpConfig {
    pub fn new(layer_sizes: Vec<usize>, seed: u64) -> Self {
        MlpConfig { layer_sizes, activation: Activation::Relu, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 3 {
            return Err(Error::Config("need input, at least one hidden layer, and output sizes".into()));
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if *self.layer_sizes.last().unwrap() < 2 {
            return Err(Error::Config("the output layer needs at least two classes".into()));
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Triangular,
    /// Always `lr_max`.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub lr_min: f64,
    pub lr_max: f64,
    pub lr_schedule: LrSchedule,
    /// Seeds the per-epoch batch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            max_epochs: 250,
            patience: 20,
            lr_min: 0.01,
            lr_max: 0.25,
            lr_schedule: LrSchedule::Triangular,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("batch_size, max_epochs and patience must be at least 1".into()));
        }
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr_max && self.lr_max.is_finite()) {
            return Err(Error::Config(format!("need 0 < lr_min <= lr_max, got {} and {}", self.lr_min, self.lr_max)));
        }
        Ok(())
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Triangular => triangular_lr(epoch, self.max_epochs, self.lr_min, self.lr_max),
            LrSchedule::Constant => self.lr_max,
        }
    }
}

/// One triangle over `total` epochs: `lr_min` at 0, `lr_max` at `total / 2`.
pub fn triangular_lr(epoch: usize, total: usize, lr_min: f64, lr_max: f64) -> f64 {
    let half = total as f64 / 2.0;
    if half == 0.0 {
        return lr_min;
    }
    let frac = (1.0 - (epoch as f64 - half).abs() / half).clamp(0.0, 1.0);
    lr_min + (lr_max - lr_min) * frac
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    /// `weights[l]` maps layer `l` to `l + 1`; shape `(n_l, n_{l+1})`.
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<RowDVector<f64>>,
}

/// Normal(0, 4 / (n_in + n_out)) weights, zero biases.
pub fn init_weights(config: &MlpConfig) -> Result<Mlp> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sizes = config.layer_sizes.clone();
    let mut weights = Vec::with_capacity(sizes.len() - 1);
    let mut biases = Vec::with_capacity(sizes.len() - 1);
    for pair in sizes.windows(2) {
        let (n_in, n_out) = (pair[0], pair[1]);
        let dist = Normal::new(0.0, (4.0 / (n_in + n_out) as f64).sqrt()).expect("positive sd");
        weights.push(DMatrix::from_fn(n_in, n_out, |_, _| dist.sample(&mut rng)));
        biases.push(RowDVector::zeros(n_out));
    }
    Ok(Mlp { sizes, weights, biases })
}

impl Mlp {
    pub fn n_weights(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum()
    }

    pub fn flat_weights(&self) -> Vec<f64> {
        self.weights.iter().flat_map(|w| w.iter().copied()).collect()
    }

    /// Post-activation outputs of every layer; the last entry is the logits.
    fn forward(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let layers = self.weights.len();
        let mut outs: Vec<DMatrix<f64>> = Vec::with_capacity(layers);
        for l in 0..layers {
            let input = if l == 0 { x } else { &outs[l - 1] };
            let mut z = input * &self.weights[l];
            for mut row in z.row_iter_mut() {
                row += &self.biases[l];
            }
            if l + 1 < layers {
                z.apply(|v| *v = v.max(0.0));
            }
            outs.push(z);
        }
        outs
    }

    pub fn logits(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward(x).pop().unwrap()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<usize> {
        let logits = self.logits(x);
        logits.row_iter().map(|r| r.transpose().argmax().0).collect()
    }

    /// Mean cross-entropy and its gradients.
    fn loss_grad(&self, x: &DMatrix<f64>, labels: &[usize]) -> (f64, Vec<DMatrix<f64>>, Vec<RowDVector<f64>>) {
        let outs = self.forward(x);
        let layers = self.weights.len();
        let batch = x.nrows() as f64;
        let (loss, mut delta) = softmax_ce(&outs[layers - 1], labels);
        delta /= batch;
        let mut gw = vec![DMatrix::zeros(0, 0); layers];
        let mut gb = vec![RowDVector::zeros(0); layers];
        for l in (0..layers).rev() {
            let input = if l == 0 { x } else { &outs[l - 1] };
            gw[l] = input.tr_mul(&delta);
            gb[l] = delta.row_sum();
            if l > 0 {
                let mut back = &delta * self.weights[l].transpose();
                back.zip_apply(&outs[l - 1], |d, a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = back;
            }
        }
        (loss / batch, gw, gb)
    }

    pub fn mean_cross_entropy(&self, x: &DMatrix<f64>, labels: &[usize]) -> f64 {
        softmax_ce(&self.logits(x), labels).0 / x.nrows() as f64
    }

    pub fn penalty(&self, spec: &PenaltySpec) -> f64 {
        self.weights.iter().map(|w| spec.sum(w.as_slice())).sum()
    }
}

/// Summed cross-entropy and `softmax - onehot`, row by row.
fn softmax_ce(logits: &DMatrix<f64>, labels: &[usize]) -> (f64, DMatrix<f64>) {
    let mut probs = logits.clone();
    let mut loss = 0.0;
    for (i, mut row) in probs.row_iter_mut().enumerate() {
        let m = row.max();
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        loss += s.ln() - (logits[(i, labels[i])] - m);
        row /= s;
        row[labels[i]] -= 1.0;
    }
    (loss, probs)
}

fn labels_of(data: &Dataset, classes: usize) -> Result<Vec<usize>> {
    data.y
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v >= 0.0 && v.fract() == 0.0 && (v as usize) < classes {
                Ok(v as usize)
            } else {
                Err(Error::Data(format!("row {i}: label {v} is not a class index below {classes}")))
            }
        })
        .collect()
}

struct Split {
    x: DMatrix<f64>,
    labels: Vec<usize>,
}

fn split(data: &Dataset, role: Role, classes: usize) -> Result<Split> {
    let part = data.subset(role)?;
    let labels = labels_of(&part, classes)?;
    Ok(Split { x: part.x, labels })
}

fn error_rate(net: &Mlp, s: &Split) -> f64 {
    let wrong = net.predict(&s.x).iter().zip(&s.labels).filter(|(a, b)| a != b).count();
    wrong as f64 / s.labels.len() as f64
}

const ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainResult {
    /// From the best-validation snapshot.
    pub test_error_rate: f64,
    pub best_validation_loss: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub weight_snapshot: Vec<f64>,
    pub sparsity_fraction: f64,
    pub mean_abs_weight: f64,
    pub validation_trace: Vec<f64>,
}

fn apply_step(param: &mut [f64], grad: &[f64], lr: f64, spec: Option<&PenaltySpec>) {
    for (w, &g) in param.iter_mut().zip(grad) {
        let moved = *w - lr * g;
        *w = match spec {
            None => moved,
            Some(spec) => {
                let pen = lr * spec.eval_deriv(moved);
                let next = moved - pen;
                if pen != 0.0 && next * moved < 0.0 {
                    0.0
                } else {
                    next
                }
            }
        };
    }
}

/// Trains from `init_weights(mlp)`; the dataset needs train, validation and
/// test rows with class-index labels.
pub fn train_mlp(data: &Dataset, mlp: &MlpConfig, train: &TrainConfig, spec: &PenaltySpec) -> Result<TrainResult> {
    train.validate()?;
    let mut net = init_weights(mlp)?;
    if data.p() != mlp.layer_sizes[0] {
        return Err(Error::Dimension(format!("{} features but input layer has {}", data.p(), mlp.layer_sizes[0])));
    }
    let classes = mlp.classes();
    let tr = split(data, Role::Train, classes)?;
    let va = split(data, Role::Validation, classes)?;
    let te = split(data, Role::Test, classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    let mut order: Vec<usize> = (0..tr.labels.len()).collect();
    let active = (spec.lambda() > 0.0).then_some(spec);

    let mut best = (f64::INFINITY, 0usize, net.clone());
    let mut trace = Vec::new();
    let mut epochs_run = 0;
    for epoch in 0..train.max_epochs {
        let lr = train.learning_rate(epoch);
        order.shuffle(&mut rng);
        for chunk in order.chunks(train.batch_size) {
            let xb = tr.x.select_rows(chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| tr.labels[i]).collect();
            let (loss, gw, gb) = net.loss_grad(&xb, &yb);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            for l in 0..net.weights.len() {
                apply_step(net.weights[l].as_mut_slice(), gw[l].as_slice(), lr, active);
                apply_step(net.biases[l].as_mut_slice(), gb[l].as_slice(), lr, None);
            }
        }
        epochs_run = epoch + 1;
        let val = net.mean_cross_entropy(&va.x, &va.labels);
        if !val.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        trace.push(val);
        if val < best.0 {
            best = (val, epoch, net.clone());
        } else if epoch - best.1 >= train.patience {
            break;
        }
    }
    let (best_loss, best_epoch, snapshot) = best;
    let flat = snapshot.flat_weights();
    let zeros = flat.iter().filter(|w| w.abs() <= ZERO_TOL).count();
    Ok(TrainResult {
        test_error_rate: error_rate(&snapshot, &te),
        best_validation_loss: best_loss,
        best_epoch,
        epochs_run,
        sparsity_fraction: zeros as f64 / flat.len() as f64,
        mean_abs_weight: flat.iter().map(|w| w.abs()).sum::<f64>() / flat.len() as f64,
        weight_snapshot: flat,
        validation_trace: trace,
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub log10_lambda: f64,
    pub lambda: f64,
    /// One entry per seed; `None` where the run failed.
    pub per_seed_errors: Vec<Option<f64>>,
    pub per_seed_mean_abs_weight: Vec<Option<f64>>,
    pub median_test_error: Option<f64>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub spec: String,
    pub dataset: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// `log10_lambda,seed<s>...,median`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["log10_lambda".to_string()];
        header.extend(self.seeds.iter().map(|s| format!("seed{s}")));
        header.push("median".into());
        wtr.write_record(&header)?;
        let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for r in &self.rows {
            let mut rec = vec![format!("{:.1}", r.log10_lambda)];
            rec.extend(r.per_seed_errors.iter().map(|&e| cell(e)));
            rec.push(cell(r.median_test_error));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn best_median(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.median_test_error).min_by(f64::total_cmp)
    }
}

/// `log10(lambda)` from -4.0 down to -7.0 in steps of 0.2.
pub fn default_log10_grid() -> Vec<f64> {
    (0..16).map(|i| -4.0 - 0.2 * i as f64).collect()
}

fn seeded(mlp: &MlpConfig, train: &TrainConfig, seed: u64) -> (MlpConfig, TrainConfig) {
    let mut m = mlp.clone();
    m.seed = seed;
    let mut t = train.clone();
    t.seed = seed;
    (m, t)
}

/// One run per `(lambda, seed)`, in parallel; `spec` supplies the family.
pub fn lambda_sweep(
    data: &Dataset,
    mlp: &MlpConfig,
    train: &TrainConfig,
    spec: &PenaltySpec,
    grid: &[f64],
    seeds: &[u64],
) -> Result<SweepReport> {
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::Config("the sweep needs a non-empty grid and seed list".into()));
    }
    mlp.validate()?;
    train.validate()?;
    let cells: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..seeds.len()).map(move |s| (g, s))).collect();
    let results: Vec<Result<TrainResult>> = cells
        .par_iter()
        .map(|&(g, s)| {
            let spec = spec.with_lambda(10f64.powf(grid[g]))?;
            let (m, t) = seeded(mlp, train, seeds[s]);
            train_mlp(data, &m, &t, &spec)
        })
        .collect();
    let mut rows: Vec<SweepRow> = grid
        .iter()
        .map(|&g| SweepRow {
            log10_lambda: g,
            lambda: 10f64.powf(g),
            per_seed_errors: vec![None; seeds.len()],
            per_seed_mean_abs_weight: vec![None; seeds.len()],
            median_test_error: None,
            failures: Vec::new(),
        })
        .collect();
    for (&(g, s), res) in cells.iter().zip(results) {
        match res {
            Ok(r) => {
                rows[g].per_seed_errors[s] = Some(r.test_error_rate);
                rows[g].per_seed_mean_abs_weight[s] = Some(r.mean_abs_weight);
            }
            Err(e) => rows[g].failures.push(format!("seed {}: {e}", seeds[s])),
        }
    }
    for row in &mut rows {
        let ok: Vec<f64> = row.per_seed_errors.iter().flatten().copied().collect();
        row.median_test_error = median(&ok);
    }
    Ok(SweepReport { spec: spec.to_string(), dataset: data.source.clone(), seeds: seeds.to_vec(), rows })
}

/// Median test error of unregularized runs over `seeds`.
pub fn baseline_median(data: &Dataset, mlp: &MlpConfig, train: &TrainConfig, seeds: &[u64]) -> Result<(f64, Vec<f64>)> {
    let errors: Vec<Result<f64>> = seeds
        .par_iter()
        .map(|&s| {
            let (m, t) = seeded(mlp, train, s);
            Ok(train_mlp(data, &m, &t, &PenaltySpec::none())?.test_error_rate)
        })
        .collect();
    let errors: Vec<f64> = errors.into_iter().collect::<Result<_>>()?;
    Ok((median(&errors).unwrap(), errors))
}

/// Largest relative gap between backprop and central differences for the
/// mean cross-entropy plus weight penalty. Weights are first moved at least
/// 0.05 away from zero and biases get small random values. Relative errors
/// use `max(|a|, |b|, 1e-4)` as the denominator.
pub fn gradient_check(mlp: &MlpConfig, data: &Dataset, spec: &PenaltySpec) -> Result<f64> {
    let mut net = init_weights(mlp)?;
    if net.n_weights() > 1000 {
        return Err(Error::Config("gradient checks are limited to 1000 weights".into()));
    }
    if data.p() != mlp.layer_sizes[0] {
        return Err(Error::Dimension(format!("{} features but input layer has {}", data.p(), mlp.layer_sizes[0])));
    }
    let labels = labels_of(data, mlp.classes())?;
    let mut rng = ChaCha8Rng::seed_from_u64(mlp.seed.wrapping_add(1));
    for w in net.weights.iter_mut() {
        w.apply(|v| *v = if v.abs() < 0.05 { 0.05f64.copysign(*v) } else { *v });
    }
    for b in net.biases.iter_mut() {
        b.apply(|v| *v = 0.1 * rng.sample::<f64, _>(StandardNormal));
    }
    let objective = |n: &Mlp| n.mean_cross_entropy(&data.x, &labels) + n.penalty(spec);
    let (_, mut gw, gb) = net.loss_grad(&data.x, &labels);
    for (g, w) in gw.iter_mut().zip(&net.weights) {
        g.zip_apply(w, |g, w| *g += spec.eval_deriv(w));
    }
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-4);
    for l in 0..net.weights.len() {
        for i in 0..net.weights[l].len() {
            let orig = net.weights[l].as_slice()[i];
            net.weights[l].as_mut_slice()[i] = orig + h;
            let up = objective(&net);
            net.weights[l].as_mut_slice()[i] = orig - h;
            let down = objective(&net);
            net.weights[l].as_mut_slice()[i] = orig;
            worst = worst.max(rel(gw[l].as_slice()[i], (up - down) / (2.0 * h)));
        }
        for i in 0..net.biases[l].len() {
            let orig = net.biases[l][i];
            net.biases[l][i] = orig + h;
            let up = objective(&net);
            net.biases[l][i] = orig - h;
            let down = objective(&net);
            net.biases[l][i] = orig;
            worst = worst.max(rel(gb[l][i], (up - down) / (2.0 * h)));
        }
    }
    Ok(worst)
}

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format { offset: offset as u64, message: "truncated header".into() })
}

/// `(count, rows, cols, pixels)` from an IDX image file, keeping at most
/// `limit` images.
pub fn parse_idx_images(bytes: &[u8], limit: Option<usize>) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format { offset: 0, message: format!("expected image magic 0x00000803, found {magic:#010x}") });
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let keep = limit.map_or(count, |k| k.min(count));
    let need = 16 + keep * rows * cols;
    if bytes.len() < need {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("image data truncated: need {need} bytes for {keep} images"),
        });
    }
    Ok((keep, rows, cols, bytes[16..need].to_vec()))
}

/// Labels from an IDX label file, keeping at most `limit`.
pub fn parse_idx_labels(bytes: &[u8], limit: Option<usize>) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format { offset: 0, message: format!("expected label magic 0x00000801, found {magic:#010x}") });
    }
    let count = read_u32(bytes, 4)? as usize;
    let keep = limit.map_or(count, |k| k.min(count));
    let need = 8 + keep;
    if bytes.len() < need {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("label data truncated: need {need} bytes for {keep} labels"),
        });
    }
    Ok(bytes[8..need].to_vec())
}

pub fn idx_from_bytes(images: &[u8], labels: &[u8], limit: Option<usize>) -> Result<Dataset> {
    let (count, rows, cols, pixels) = parse_idx_images(images, limit)?;
    let labels = parse_idx_labels(labels, limit)?;
    if labels.len() != count {
        return Err(Error::Format {
            offset: 4,
            message: format!("{count} images but {} labels", labels.len()),
        });
    }
    let x = DMatrix::from_row_iterator(count, rows * cols, pixels.iter().map(|&b| b as f64 / 255.0));
    let y = DVector::from_iterator(count, labels.iter().map(|&l| l as f64));
    Dataset::new(x, y)
}

/// MNIST-style IDX image and label files; pixels scaled to `[0, 1]`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>, limit: Option<usize>) -> Result<Dataset> {
    let images = std::fs::read(images_path.as_ref())?;
    let labels = std::fs::read(labels_path.as_ref())?;
    Ok(idx_from_bytes(&images, &labels, limit)?.with_source(images_path.as_ref().display().to_string()))
}

/// Tags the first `train` rows train, the next `validation` rows validation
/// and the next `test` rows test; later rows are dropped.
pub fn assign_roles(data: &Dataset, train: usize, validation: usize, test: usize) -> Result<Dataset> {
    let total = train + validation + test;
    if total > data.n() || train == 0 || validation == 0 || test == 0 {
        return Err(Error::Data(format!("cannot split {} rows into {train}/{validation}/{test}", data.n())));
    }
    let idx: Vec<usize> = (0..total).collect();
    let mut out = data.rows(&idx);
    for (i, r) in out.roles.iter_mut().enumerate() {
        *r = if i < train {
            Role::Train
        } else if i < train + validation {
            Role::Validation
        } else {
            Role::Test
        };
    }
    Ok(out)
}

/// Two Gaussian clouds centered at `+-2` in every coordinate, unit
/// variance; 60/20/20 split.
pub fn blobs(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let class = rng.random_range(0..2usize);
        let center = if class == 1 { 2.0 } else { -2.0 };
        for j in 0..p {
            x[(i, j)] = center + rng.sample::<f64, _>(StandardNormal);
        }
        y[i] = class as f64;
    }
    let train = n * 3 / 5;
    let val = n / 5;
    let data = Dataset::new(x, y)?.with_source(format!("blobs(n={n}, p={p}, seed={seed})"));
    assign_roles(&data, train, val, n - train - val)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverfitTask {
    pub features: usize,
    pub informative: usize,
    pub classes: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    /// Label noise: scale of the logit perturbation.
    pub noise: f64,
    pub seed: u64,
}

impl Default for OverfitTask {
    fn default() -> Self {
        OverfitTask { features: 50, informative: 4, classes: 3, train: 150, validation: 150, test: 1500, noise: 0.5, seed: 7 }
    }
}

/// Few informative features among many noise features, with a small
/// training split: an unregularized wide network overfits it.
pub fn overfit_task(task: &OverfitTask) -> Result<Dataset> {
    if task.informative == 0 || task.informative > task.features || task.classes < 2 {
        return Err(Error::Config("need 1 <= informative <= features and at least 2 classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
    let k = task.classes;
    let proto = DMatrix::from_fn(task.informative, k, |_, _| 1.5 * rng.sample::<f64, _>(StandardNormal));
    let n = task.train + task.validation + task.test;
    let x = DMatrix::from_fn(n, task.features, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let xi = x.view((i, 0), (1, task.informative));
        let scores = xi * &proto;
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for c in 0..k {
            let v = scores[c] + task.noise * rng.sample::<f64, _>(StandardNormal);
            if v > best_v {
                best_v = v;
                best = c;
            }
        }
        y[i] = best as f64;
    }
    let data = Dataset::new(x, y)?.with_source(format!(
        "overfit(features={}, informative={}, classes={}, seed={})",
        task.features, task.informative, task.classes, task.seed
    ));
    assign_roles(&data, task.train, task.validation, task.test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn init_variance_and_determinism() {
        let cfg = MlpConfig::new(vec![784, 1024, 10], 1);
        let net = init_weights(&cfg).unwrap();
        let w = &net.weights[0];
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let target = 4.0 / 1808.0;
        assert!((var - target).abs() <= 0.05 * target, "{var} vs {target}");
        assert!(net.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
        let small = MlpConfig::new(vec![5, 7, 3], 4);
        assert_eq!(init_weights(&small).unwrap(), init_weights(&small).unwrap());
        let other = init_weights(&MlpConfig::new(vec![5, 7, 3], 5)).unwrap();
        let diff = (&other.weights[0] - &init_weights(&small).unwrap().weights[0]).amax();
        assert!(diff > 0.0);
        assert!(init_weights(&MlpConfig::new(vec![5, 3], 1)).is_err());
    }

    #[test]
    fn triangular_schedule() {
        assert_eq!(triangular_lr(0, 250, 0.01, 0.25), 0.01);
        assert_relative_eq!(triangular_lr(125, 250, 0.01, 0.25), 0.25);
        let step = 0.24 / 125.0;
        assert!((triangular_lr(249, 250, 0.01, 0.25) - 0.01).abs() <= step + 1e-15);
        assert!(triangular_lr(60, 250, 0.01, 0.25) < triangular_lr(61, 250, 0.01, 0.25));
        assert_relative_eq!(triangular_lr(100, 250, 0.01, 0.25), triangular_lr(150, 250, 0.01, 0.25));
        assert!(TrainConfig { lr_min: 0.5, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { patience: 0, ..Default::default() }.validate().is_err());
    }

    fn tiny_data(seed: u64, p: usize, classes: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(20, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(20, |i, _| (i % classes) as f64);
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn gradient_checks() {
        let cfg = MlpConfig::new(vec![4, 6, 3], 3);
        let data = tiny_data(1, 4, 3);
        for spec in [
            PenaltySpec::none(),
            PenaltySpec::l1(0.0).unwrap(),
            PenaltySpec::laplace(0.1, 0.01).unwrap(),
            PenaltySpec::laplace(0.1, 1e-7).unwrap(),
            PenaltySpec::arctan(0.1, 100.0).unwrap(),
            PenaltySpec::l1(0.1).unwrap(),
        ] {
            let err = gradient_check(&cfg, &data, &spec).unwrap();
            assert!(err <= 1e-5, "{spec}: {err}");
        }
        let deep = MlpConfig::new(vec![4, 5, 5, 2], 9);
        assert!(gradient_check(&deep, &tiny_data(2, 4, 2), &PenaltySpec::arctan(0.1, 1.0).unwrap()).unwrap() <= 1e-5);
    }

    #[test]
    fn idx_parsing() {
        let mut images = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
        images.extend([0, 255, 51, 102, 255, 0, 0, 0]);
        let mut labels = vec![0, 0, 8, 1, 0, 0, 0, 2];
        labels.extend([7, 3]);
        let d = idx_from_bytes(&images, &labels, None).unwrap();
        assert_eq!((d.n(), d.p()), (2, 4));
        assert_eq!(d.x[(0, 1)], 1.0);
        assert_relative_eq!(d.x[(0, 2)], 0.2);
        assert_eq!(d.y.as_slice(), &[7.0, 3.0]);
        assert_eq!(idx_from_bytes(&images, &labels, Some(1)).unwrap().n(), 1);

        let mut ten = vec![0, 0, 8, 1, 0, 0, 0, 10];
        ten.extend(0..10u8);
        assert_eq!(parse_idx_labels(&ten, None).unwrap().len(), 10);

        assert!(matches!(idx_from_bytes(&labels, &labels, None), Err(Error::Format { offset: 0, .. })));
        assert!(matches!(idx_from_bytes(&images[..18], &labels, None), Err(Error::Format { offset: 18, .. })));
        assert!(matches!(idx_from_bytes(&images, &ten, None), Err(Error::Format { .. })));
        assert!(matches!(parse_idx_labels(&[0, 0, 8], None), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn separable_blobs_are_learned() {
        let data = blobs(500, 4, 3).unwrap();
        let cfg = MlpConfig::new(vec![4, 16, 2], 1);
        let train = TrainConfig { max_epochs: 60, ..Default::default() };
        let r = train_mlp(&data, &cfg, &train, &PenaltySpec::none()).unwrap();
        assert!(r.test_error_rate <= 0.05, "{}", r.test_error_rate);
        assert!(r.epochs_run <= 60);
        assert!(r.epochs_run - 1 - r.best_epoch <= train.patience);
        let best = r.validation_trace.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(best, r.best_validation_loss);
        assert_eq!(r, train_mlp(&data, &cfg, &train, &PenaltySpec::none()).unwrap());
    }

    #[test]
    fn heavy_penalty_collapses_weights() {
        // wide layers start near zero, where the bounded penalty is steep
        let data = blobs(300, 4, 5).unwrap();
        let cfg = MlpConfig::new(vec![4, 256, 2], 2);
        let train = TrainConfig { max_epochs: 40, ..Default::default() };
        let r = train_mlp(&data, &cfg, &train, &PenaltySpec::laplace(10.0, 1e-7).unwrap()).unwrap();
        assert!(r.sparsity_fraction >= 0.9, "{}", r.sparsity_fraction);
        assert!((r.test_error_rate - 0.5).abs() <= 0.15, "{}", r.test_error_rate);
    }

    #[test]
    fn sweep_shape_and_csv() {
        let data = blobs(120, 3, 1).unwrap();
        let cfg = MlpConfig::new(vec![3, 8, 2], 1);
        let train = TrainConfig { max_epochs: 5, ..Default::default() };
        let grid = default_log10_grid();
        assert_eq!(grid.len(), 16);
        assert_relative_eq!(grid[15], -7.0, epsilon = 1e-12);
        let rep = lambda_sweep(&data, &cfg, &train, &PenaltySpec::arctan(1.0, 1.0).unwrap(), &grid[..3], &[1, 2, 3]).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert!(rep.rows.iter().all(|r| r.per_seed_errors.iter().all(Option::is_some)));
        let mut out = Vec::new();
        rep.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("log10_lambda,seed1,seed2,seed3,median\n-4.0,"));
        assert!(lambda_sweep(&data, &cfg, &train, &PenaltySpec::l1(1.0).unwrap(), &[], &[1]).is_err());
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0]), Some(2.5));
    }

    #[test]
    fn bad_training_inputs() {
        let data = blobs(50, 3, 1).unwrap();
        let train = TrainConfig { max_epochs: 2, ..Default::default() };
        assert!(matches!(
            train_mlp(&data, &MlpConfig::new(vec![4, 8, 2], 1), &train, &PenaltySpec::none()),
            Err(Error::Dimension(_))
        ));
        let mut odd = data.clone();
        odd.y[0] = 5.0;
        assert!(train_mlp(&odd, &MlpConfig::new(vec![3, 8, 2], 1), &train, &PenaltySpec::none()).is_err());
        let no_roles = Dataset::new(data.x.clone(), data.y.clone()).unwrap();
        assert!(train_mlp(&no_roles, &MlpConfig::new(vec![3, 8, 2], 1), &train, &PenaltySpec::none()).is_err());
    }
}
