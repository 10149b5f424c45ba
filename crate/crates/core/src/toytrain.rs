//! A small softmax-regression trainer over synthetic class-conditional
//! Gaussians, with a translated evaluation split standing in for
//! distribution shift.
//!
//! Training without smoothing on the in-distribution split inflates
//! confidence on the shifted split without accuracy gains; smoothing keeps
//! predictive entropy up and calibration error down. The trainer is plain
//! full-batch gradient descent — enough for convergence on a convex loss,
//! no schedule.
//!
//! Everything is a pure function of `(spec, betas, seeds, optimizer)`: data
//! generation flows through the documented SplitMix64 substreams of
//! [`crate::rng`], training starts from zeros, and runs execute in a fixed
//! order, so results are bit-exact whether batches run parallel or
//! sequential.

use serde::Serialize;

use crate::calibration::{self, MetricConfig};
use crate::error::{Error, Result};
use crate::records::{GroupKey, PredictionRecord, RecordSet, SmoothingRate};
use crate::rng::SplitMix64;
use crate::smoothing::SmoothingConfig;

/// Spread of the class-mean positions around the origin.
const MEAN_SPREAD: f64 = 2.0;

/// Synthetic data specification. Generation is deterministic given `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftSpec {
    /// Feature dimension.
    pub d: usize,
    /// Class count.
    pub k: usize,
    pub n_train: usize,
    pub n_eval: usize,
    /// Mean translation applied to the shifted eval split.
    pub shift_magnitude: f64,
    /// Fraction of training labels resampled to a different class.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        Self {
            d: 2,
            k: 4,
            n_train: 2000,
            n_eval: 2000,
            shift_magnitude: 2.0,
            label_noise: 0.0,
            seed: 7,
        }
    }
}

impl ShiftSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidArgument(format!("need k >= 2 classes, got {}", self.k)));
        }
        if self.d == 0 {
            return Err(Error::InvalidArgument("feature dimension d must be >= 1".into()));
        }
        if self.n_train < self.k || self.n_eval < self.k {
            return Err(Error::InvalidArgument(format!(
                "need n_train and n_eval >= k = {}, got {} and {}",
                self.k, self.n_train, self.n_eval
            )));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(Error::InvalidArgument(format!(
                "label_noise {} outside [0,1)",
                self.label_noise
            )));
        }
        if !self.shift_magnitude.is_finite() || self.shift_magnitude < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "shift_magnitude {} must be finite and >= 0",
                self.shift_magnitude
            )));
        }
        Ok(())
    }

    /// Copy with a different seed (used to fan one spec over many seeds).
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

/// A labeled feature matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub d: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn example(&self, i: usize) -> (&[f64], usize) {
        (&self.features[i * self.d..(i + 1) * self.d], self.labels[i])
    }

    /// FNV-1a over the little-endian feature bits and labels; pins the
    /// generator output exactly.
    pub fn checksum(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x1_0000_01b3);
            }
        };
        for f in &self.features {
            eat(&f.to_le_bytes());
        }
        for &l in &self.labels {
            eat(&(l as u64).to_le_bytes());
        }
        h
    }
}

/// The three splits produced by [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub train: LabeledSet,
    pub eval_id: LabeledSet,
    pub eval_shifted: LabeledSet,
}

/// Generates class-conditional Gaussian clusters (unit variance, means
/// spread around the origin), plus a shifted eval split whose means are
/// translated by `shift_magnitude` along one fixed random direction.
///
/// Substreams of `spec.seed`: 0 = class means, 1 = shift direction,
/// 2 = train draws, 3 = in-distribution eval draws, 4 = shifted eval draws.
pub fn generate(spec: &ShiftSpec) -> Result<GeneratedData> {
    spec.validate()?;
    let master = SplitMix64::new(spec.seed);
    let mut means_rng = master.substream(0);
    let means: Vec<Vec<f64>> = (0..spec.k)
        .map(|_| (0..spec.d).map(|_| MEAN_SPREAD * means_rng.next_normal()).collect())
        .collect();
    let mut dir_rng = master.substream(1);
    let mut direction: Vec<f64> = (0..spec.d).map(|_| dir_rng.next_normal()).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut direction {
        *v /= norm;
    }

    let draw = |rng: &mut SplitMix64, n: usize, shift: f64, noise: f64| -> LabeledSet {
        let mut features = Vec::with_capacity(n * spec.d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let class = rng.next_index(spec.k);
            for j in 0..spec.d {
                features.push(means[class][j] + shift * direction[j] + rng.next_normal());
            }
            let label = if noise > 0.0 && rng.next_f64() < noise {
                (class + 1 + rng.next_index(spec.k - 1)) % spec.k
            } else {
                class
            };
            labels.push(label);
        }
        LabeledSet { d: spec.d, features, labels }
    };

    let train = draw(&mut master.substream(2), spec.n_train, 0.0, spec.label_noise);
    let eval_id = draw(&mut master.substream(3), spec.n_eval, 0.0, 0.0);
    let eval_shifted = draw(&mut master.substream(4), spec.n_eval, spec.shift_magnitude, 0.0);
    Ok(GeneratedData { train, eval_id, eval_shifted })
}

/// A linear softmax classifier: logits = x W + b.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyClassifier {
    pub d: usize,
    pub k: usize,
    /// Row-major `d x k` weight matrix.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ToyClassifier {
    fn zeros(d: usize, k: usize) -> Self {
        Self { d, k, weights: vec![0.0; d * k], bias: vec![0.0; k] }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (j, &xj) in x.iter().enumerate() {
            let row = &self.weights[j * self.k..(j + 1) * self.k];
            for (c, &w) in row.iter().enumerate() {
                out[c] += xj * w;
            }
        }
        out
    }

    pub fn probs(&self, x: &[f64]) -> Vec<f64> {
        let logits = self.logits(x);
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / total).collect()
    }
}

/// Full-batch gradient-descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerSpec {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self { learning_rate: 0.1, epochs: 500 }
    }
}

/// Mean smoothed loss over a set and its gradient.
///
/// Identical math to averaging [`crate::smoothing::ls_loss`] over the set
/// (the unit tests hold the two routes together); inlined so the training
/// loop does not allocate per example.
pub fn batch_loss_and_grad(
    model: &ToyClassifier,
    data: &LabeledSet,
    cfg: &SmoothingConfig,
) -> (f64, Vec<f64>, Vec<f64>) {
    let n = data.len() as f64;
    let k = model.k;
    let uniform = cfg.beta / k as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; model.d * k];
    let mut grad_b = vec![0.0; k];
    for i in 0..data.len() {
        let (x, label) = data.example(i);
        let logits = model.logits(x);
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in &logits {
            total += (l - max).exp();
        }
        let lse = max + total.ln();
        let mut weighted = 0.0;
        for (c, &l) in logits.iter().enumerate() {
            let target = uniform + if c == label { 1.0 - cfg.beta } else { 0.0 };
            weighted += target * l;
        }
        loss += lse - weighted;
        for (c, &l) in logits.iter().enumerate() {
            let p = (l - max).exp() / total;
            let target = uniform + if c == label { 1.0 - cfg.beta } else { 0.0 };
            let g = (p - target) / n;
            grad_b[c] += g;
            for (j, &xj) in x.iter().enumerate() {
                grad_w[j * k + c] += xj * g;
            }
        }
    }
    (loss / n, grad_w, grad_b)
}

/// A trained classifier with its loss trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ToyClassifier,
    /// Mean training loss after the final update, in nats.
    pub final_loss: f64,
    /// Mean loss before each update (length `epochs`).
    pub epoch_losses: Vec<f64>,
}

/// Trains a softmax classifier from zero weights by full-batch gradient
/// descent on the mean smoothed loss. Errors if the loss ever goes
/// non-finite.
pub fn train(data: &LabeledSet, cfg: &SmoothingConfig, opt: &OptimizerSpec) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if data.labels.iter().any(|&l| l >= cfg.k) {
        return Err(Error::InvalidArgument("training label out of range".into()));
    }
    let mut model = ToyClassifier::zeros(data.d, cfg.k);
    let mut epoch_losses = Vec::with_capacity(opt.epochs);
    for epoch in 0..opt.epochs {
        let (loss, grad_w, grad_b) = batch_loss_and_grad(&model, data, cfg);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        epoch_losses.push(loss);
        for (w, g) in model.weights.iter_mut().zip(&grad_w) {
            *w -= opt.learning_rate * g;
        }
        for (b, g) in model.bias.iter_mut().zip(&grad_b) {
            *b -= opt.learning_rate * g;
        }
    }
    let (final_loss, _, _) = batch_loss_and_grad(&model, data, cfg);
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: opt.epochs });
    }
    Ok(TrainOutcome { model, final_loss, epoch_losses })
}

/// Turns a model's predictions on a split into prediction records.
pub fn predictions_to_records(
    model: &ToyClassifier,
    data: &LabeledSet,
    beta: f64,
    split: &str,
) -> Result<RecordSet> {
    let group = GroupKey {
        model: "toy-softmax".into(),
        sft_dataset: "synthetic".into(),
        language: split.into(),
        smoothing: Some(SmoothingRate::from_f64(beta)?),
        extra: Default::default(),
    };
    let mut records = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let (x, label) = data.example(i);
        let (record, _) = PredictionRecord::new(
            format!("{split}-{i}"),
            model.probs(x),
            label,
            group.clone(),
            false,
        )?;
        records.push(record);
    }
    Ok(RecordSet::new(records))
}

/// The calibration metrics tracked per split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitMetrics {
    pub accuracy: f64,
    pub mean_entropy_bits: f64,
    pub ece: f64,
    pub rmsce: f64,
}

fn split_metrics(rs: &RecordSet, cfg: &MetricConfig) -> Result<SplitMetrics> {
    Ok(SplitMetrics {
        accuracy: calibration::accuracy(rs)?,
        mean_entropy_bits: calibration::mean_entropy_bits(rs)?,
        ece: calibration::ece(rs, cfg.bins)?,
        rmsce: calibration::rmsce(rs, cfg.ranges)?,
    })
}

/// One (beta, seed) training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToyRunResult {
    pub beta: f64,
    pub seed: u64,
    pub final_train_loss: f64,
    pub in_distribution: SplitMetrics,
    pub shifted: SplitMetrics,
}

/// Medians over seeds for one beta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaSummary {
    pub beta: f64,
    pub seeds: usize,
    pub median_final_train_loss: f64,
    pub in_distribution: SplitMetrics,
    pub shifted: SplitMetrics,
}

/// All runs plus per-beta medians, and pooled eval records per
/// `(beta, split)` for reliability diagrams.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Sorted by (beta position in the input list, seed position).
    pub runs: Vec<ToyRunResult>,
    pub summary: Vec<BetaSummary>,
    /// `(beta, split name, pooled records)` in run order; empty unless
    /// requested.
    pub pooled: Vec<(f64, String, RecordSet)>,
}

/// Median with the even-count convention of averaging the middle two.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs the full grid: for each seed, generate data once; for each beta,
/// train on the train split and evaluate both eval splits with the
/// calibration module.
///
/// Seeds run data-parallel under the `parallel` feature; the output is
/// bit-identical to the sequential build.
pub fn experiment(
    spec: &ShiftSpec,
    betas: &[f64],
    seeds: &[u64],
    opt: &OptimizerSpec,
    metric_cfg: &MetricConfig,
    collect_records: bool,
) -> Result<ExperimentResult> {
    spec.validate()?;
    if betas.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("need at least one beta and one seed".into()));
    }
    for &b in betas {
        SmoothingConfig::new(b, spec.k)?;
    }

    struct SeedRuns {
        per_beta: Vec<(ToyRunResult, Option<(RecordSet, RecordSet)>)>,
    }

    let spec = *spec;
    let opt = *opt;
    let metric_cfg = *metric_cfg;
    let betas_owned: Vec<f64> = betas.to_vec();
    let per_seed: Vec<Result<SeedRuns>> =
        crate::par::map_items(seeds.to_vec(), move |seed| -> Result<SeedRuns> {
            let data = generate(&spec.with_seed(seed))?;
            let mut per_beta = Vec::with_capacity(betas_owned.len());
            for &beta in &betas_owned {
                let cfg = SmoothingConfig::new(beta, spec.k)?;
                let outcome = train(&data.train, &cfg, &opt)?;
                let id_records =
                    predictions_to_records(&outcome.model, &data.eval_id, beta, "in-distribution")?;
                let sh_records =
                    predictions_to_records(&outcome.model, &data.eval_shifted, beta, "shifted")?;
                let run = ToyRunResult {
                    beta,
                    seed,
                    final_train_loss: outcome.final_loss,
                    in_distribution: split_metrics(&id_records, &metric_cfg)?,
                    shifted: split_metrics(&sh_records, &metric_cfg)?,
                };
                let pooled = collect_records.then_some((id_records, sh_records));
                per_beta.push((run, pooled));
            }
            Ok(SeedRuns { per_beta })
        });

    let mut by_seed = Vec::with_capacity(per_seed.len());
    for r in per_seed {
        by_seed.push(r?);
    }

    let mut runs = Vec::with_capacity(betas.len() * seeds.len());
    let mut pooled: Vec<(f64, String, RecordSet)> = Vec::new();
    for (bi, &beta) in betas.iter().enumerate() {
        let mut pooled_id: Vec<PredictionRecord> = Vec::new();
        let mut pooled_sh: Vec<PredictionRecord> = Vec::new();
        for seed_runs in &by_seed {
            let (run, records) = &seed_runs.per_beta[bi];
            runs.push(*run);
            if let Some((id, sh)) = records {
                pooled_id.extend(id.records.iter().cloned());
                pooled_sh.extend(sh.records.iter().cloned());
            }
        }
        if collect_records {
            pooled.push((beta, "in-distribution".into(), RecordSet::new(pooled_id)));
            pooled.push((beta, "shifted".into(), RecordSet::new(pooled_sh)));
        }
    }

    let summary = betas
        .iter()
        .map(|&beta| {
            let of = |f: &dyn Fn(&ToyRunResult) -> f64| -> f64 {
                let vals: Vec<f64> =
                    runs.iter().filter(|r| r.beta == beta).map(|r| f(r)).collect();
                median(&vals)
            };
            BetaSummary {
                beta,
                seeds: seeds.len(),
                median_final_train_loss: of(&|r| r.final_train_loss),
                in_distribution: SplitMetrics {
                    accuracy: of(&|r| r.in_distribution.accuracy),
                    mean_entropy_bits: of(&|r| r.in_distribution.mean_entropy_bits),
                    ece: of(&|r| r.in_distribution.ece),
                    rmsce: of(&|r| r.in_distribution.rmsce),
                },
                shifted: SplitMetrics {
                    accuracy: of(&|r| r.shifted.accuracy),
                    mean_entropy_bits: of(&|r| r.shifted.mean_entropy_bits),
                    ece: of(&|r| r.shifted.ece),
                    rmsce: of(&|r| r.shifted.rmsce),
                },
            }
        })
        .collect();

    Ok(ExperimentResult { runs, summary, pooled })
}
