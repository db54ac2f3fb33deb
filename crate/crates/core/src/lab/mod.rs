//! Desk-scale training lab.
//!
//! Gaussian-cluster vectors stand in for images and a small perceptron for
//! the encoder. The pipeline is: optional classifier pretraining of the
//! whole network, then a fresh feature head trained on a restriction
//! objective (trunk optionally frozen), then statistics on a held-out
//! batch. Optimization is plain gradient descent; every stage is a pure
//! function of its config and seed.

mod data;
mod mlp;

pub use data::{
    cluster_centers, gen_clusters, nearest_centroid_accuracy, ClusterParams, SyntheticDataset,
    CENTER_SEPARATION,
};
pub use mlp::{Dense, DenseGrad, EncoderGrad, Forward, MlpEncoder};

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{gaussian_reference, hist_kl, soft_hist, HistogramSpec, SoftHistogram};
use crate::numeric::{column_stats, corr_mat, stream_rng, ColumnStats, CorrMatrix, FeatureBatch, Matrix, Stream};
use crate::restriction::feature_objective;
use crate::translation::LossWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    ConventionalKl,
    Proposed,
}

impl Condition {
    pub fn weights(self) -> LossWeights {
        match self {
            Condition::ConventionalKl => LossWeights::conventional_kl(),
            Condition::Proposed => LossWeights::proposed(),
        }
    }

    /// Step size tuned for each condition's loss scale (λ_KL = 0.1 against
    /// λ_corr_enc = λ_hist = 100).
    pub fn default_step_size(self) -> f64 {
        match self {
            Condition::ConventionalKl => 2.0,
            Condition::Proposed => 0.002,
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conventional_kl" | "conventional-kl" | "conventional" => Ok(Condition::ConventionalKl),
            "proposed" => Ok(Condition::Proposed),
            other => Err(Error::invalid(format!("unknown condition {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub condition: Condition,
    pub weights: LossWeights,
    pub steps: usize,
    pub step_size: f64,
    pub batch: usize,
    pub seed: u64,
}

pub const DEFAULT_RESTRICTION_STEPS: usize = 2000;
pub const DEFAULT_BATCH: usize = 128;

impl TrainConfig {
    pub fn new(condition: Condition, seed: u64) -> Self {
        Self {
            condition,
            weights: condition.weights(),
            steps: DEFAULT_RESTRICTION_STEPS,
            step_size: condition.default_step_size(),
            batch: DEFAULT_BATCH,
            seed,
        }
    }

    /// Defaults for the classifier-pretraining stage. `condition` and
    /// `weights` are carried along but unused there.
    pub fn pretraining(seed: u64) -> Self {
        Self {
            condition: Condition::Proposed,
            weights: LossWeights::zeros(),
            steps: 500,
            step_size: 0.5,
            batch: DEFAULT_BATCH,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("steps must be >= 1"));
        }
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid(format!("step size must be >= 0, got {}", self.step_size)));
        }
        if self.batch < 2 {
            return Err(Error::invalid("batch must be >= 2"));
        }
        self.weights.validate()
    }
}

fn sample_batch(rng: &mut ChaCha8Rng, n: usize, batch: usize) -> Vec<usize> {
    if batch >= n {
        (0..n).collect()
    } else {
        let mut idx = index::sample(rng, n, batch).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// Mean softmax cross-entropy and its gradient with respect to the logits.
fn softmax_xent(logits: &Matrix, labels: &[usize]) -> (f64, Matrix) {
    let n = logits.rows();
    let mut grad = Matrix::zeros(n, logits.cols());
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        loss += z.ln() + max - row[y];
        let g = grad.row_mut(i);
        for (k, e) in exps.iter().enumerate() {
            g[k] = e / z / n as f64;
        }
        g[y] -= 1.0 / n as f64;
    }
    (loss / n as f64, grad)
}

fn argmax_accuracy(logits: &Matrix, labels: &[usize]) -> f64 {
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| {
            let row = logits.row(i);
            let best = (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            best == y
        })
        .count();
    hits as f64 / labels.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainOutcome {
    pub accuracy: f64,
    pub loss_trace: Vec<f64>,
}

/// Trains the whole network as a classifier (the head must have one output
/// per class) and reports accuracy on `held_out`.
pub fn pretrain_classifier(
    data: &SyntheticDataset,
    held_out: &SyntheticDataset,
    enc: MlpEncoder,
    cfg: &TrainConfig,
) -> Result<(MlpEncoder, PretrainOutcome)> {
    cfg.validate()?;
    if enc.outputs() != data.classes() {
        return Err(Error::Shape(format!(
            "classifier head has {} outputs for {} classes",
            enc.outputs(),
            data.classes()
        )));
    }
    let mut enc = enc;
    let mut rng = stream_rng(cfg.seed, Stream::ClassifierBatches);
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let idx = sample_batch(&mut rng, data.len(), cfg.batch);
        let (x, y) = data.select(&idx);
        let fwd = enc.forward(&x);
        let (loss, dlogits) = softmax_xent(&fwd.out, &y);
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        trace.push(loss);
        if cfg.step_size != 0.0 {
            let g = enc.backward(&x, &fwd, &dlogits, false);
            enc.apply(&g, cfg.step_size, false);
        }
    }
    let accuracy = argmax_accuracy(&enc.encode(&held_out.inputs), &held_out.labels);
    Ok((
        enc,
        PretrainOutcome {
            accuracy,
            loss_trace: trace,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub condition: Condition,
    pub seed: u64,
    pub with_pretraining: bool,
    pub freeze_trunk: bool,
    /// How loss values are normalized: means over the batch.
    pub loss_normalization: String,
    pub eval_samples: usize,
    pub stats: ColumnStats,
    pub corr: CorrMatrix,
    pub corr_mean_abs_off_identity: f64,
    pub hist_kl: Vec<f64>,
    pub hist_kl_mean: f64,
    pub histograms: Vec<SoftHistogram>,
    pub loss_trace: Vec<f64>,
    pub classifier_accuracy: Option<f64>,
    pub class_retention_accuracy: Option<f64>,
    pub trunk_checksum_before: String,
    pub trunk_checksum_after: String,
}

impl ExperimentReport {
    pub fn max_std(&self) -> f64 {
        self.stats.std.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_std(&self) -> f64 {
        self.stats.std.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn dims(&self) -> usize {
        self.stats.std.len()
    }
}

/// Statistics of encoded features on an evaluation batch.
pub struct FeatureSummary {
    pub stats: ColumnStats,
    pub corr: CorrMatrix,
    pub hist_kl: Vec<f64>,
    pub histograms: Vec<SoftHistogram>,
}

pub fn summarize_features(features: &FeatureBatch, spec: &HistogramSpec) -> Result<FeatureSummary> {
    let stats = column_stats(features)?;
    let corr = corr_mat(features)?;
    let reference = gaussian_reference(spec);
    let mut hist_kl_v = Vec::with_capacity(features.d());
    let mut histograms = Vec::with_capacity(features.d());
    for j in 0..features.d() {
        let h = soft_hist(&features.column(j), spec)?;
        hist_kl_v.push(hist_kl(&h, &reference)?);
        histograms.push(h);
    }
    Ok(FeatureSummary {
        stats,
        corr,
        hist_kl: hist_kl_v,
        histograms,
    })
}

/// Result of the restriction stage before it is folded into a report.
pub struct RestrictionOutcome {
    pub loss_trace: Vec<f64>,
    pub trunk_checksum_before: String,
    pub trunk_checksum_after: String,
}

/// Gradient descent on the condition's feature objective, back-propagated
/// through the encoder. The caller is expected to have attached a fresh
/// feature head.
pub fn train_restriction_head(
    data: &SyntheticDataset,
    enc: MlpEncoder,
    cfg: &TrainConfig,
    spec: &HistogramSpec,
    freeze_trunk: bool,
) -> Result<(MlpEncoder, RestrictionOutcome)> {
    cfg.validate()?;
    let mut enc = enc;
    let before = enc.trunk_checksum();
    let mut rng = stream_rng(cfg.seed, Stream::RestrictionBatches);
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let idx = sample_batch(&mut rng, data.len(), cfg.batch);
        let (x, _) = data.select(&idx);
        let fwd = enc.forward(&x);
        let feats = FeatureBatch::from_matrix(fwd.out.clone())
            .map_err(|_| Error::Diverged { step, loss: f64::NAN })?;
        let eval = feature_objective(&feats, &cfg.weights, spec)?;
        if !eval.value.is_finite() || !eval.grad.is_finite() {
            return Err(Error::Diverged {
                step,
                loss: eval.value,
            });
        }
        trace.push(eval.value);
        let g = enc.backward(&x, &fwd, &eval.grad, freeze_trunk);
        enc.apply(&g, cfg.step_size, freeze_trunk);
        if !enc.is_finite() {
            return Err(Error::Diverged {
                step,
                loss: eval.value,
            });
        }
    }
    let after = enc.trunk_checksum();
    Ok((
        enc,
        RestrictionOutcome {
            loss_trace: trace,
            trunk_checksum_before: before,
            trunk_checksum_after: after,
        },
    ))
}

/// Everything needed to reproduce one lab run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: ClusterParams,
    pub hidden: usize,
    pub features: usize,
    pub eval_samples: usize,
    pub spec: HistogramSpec,
    pub pretrain: TrainConfig,
    pub restriction: TrainConfig,
    /// Freeze the trunk during restriction training when it was pretrained.
    pub freeze_pretrained_trunk: bool,
}

impl ExperimentConfig {
    pub fn new(condition: Condition, seed: u64) -> Self {
        Self {
            data: ClusterParams::default(),
            hidden: 32,
            features: 8,
            eval_samples: 1024,
            spec: HistogramSpec::default(),
            pretrain: TrainConfig::pretraining(seed),
            restriction: TrainConfig::new(condition, seed),
            freeze_pretrained_trunk: true,
        }
    }

    pub fn seed(&self) -> u64 {
        self.restriction.seed
    }

    fn held_out_params(&self) -> ClusterParams {
        ClusterParams {
            n_per_class: self.eval_samples.div_ceil(self.data.classes),
            ..self.data
        }
    }
}

/// Data generation, optional pretraining, restriction training and
/// held-out evaluation.
pub fn run_experiment(cfg: &ExperimentConfig, with_pretraining: bool) -> Result<ExperimentReport> {
    let seed = cfg.seed();
    let train = data::gen_clusters_on(cfg.data, seed, Stream::TrainData)?;
    let held_out = data::gen_clusters_on(cfg.held_out_params(), seed, Stream::HeldOutData)?;
    let spec = &cfg.spec;

    let (mut enc, classifier_accuracy) = if with_pretraining {
        let enc = MlpEncoder::new(
            cfg.data.p,
            cfg.hidden,
            cfg.data.classes,
            seed,
            Stream::ClassifierHeadInit,
        );
        let (enc, out) = pretrain_classifier(&train, &held_out, enc, &cfg.pretrain)?;
        (enc, Some(out.accuracy))
    } else {
        let enc = MlpEncoder::new(cfg.data.p, cfg.hidden, cfg.features, seed, Stream::RestrictionHeadInit);
        (enc, None)
    };
    enc.replace_head(cfg.features, seed, Stream::RestrictionHeadInit);
    let freeze = with_pretraining && cfg.freeze_pretrained_trunk;
    let (enc, outcome) = train_restriction_head(&train, enc, &cfg.restriction, spec, freeze)?;

    let eval_feats = FeatureBatch::from_matrix(enc.encode(&held_out.inputs))?;
    let summary = summarize_features(&eval_feats, spec)?;
    let class_retention_accuracy = with_pretraining.then(|| {
        nearest_centroid_accuracy(
            &enc.encode(&train.inputs),
            &train.labels,
            eval_feats.as_matrix(),
            &held_out.labels,
            cfg.data.classes,
        )
    });
    let hist_kl_mean = summary.hist_kl.iter().sum::<f64>() / summary.hist_kl.len() as f64;
    Ok(ExperimentReport {
        condition: cfg.restriction.condition,
        seed,
        with_pretraining,
        freeze_trunk: freeze,
        loss_normalization: "per-batch mean".into(),
        eval_samples: eval_feats.n(),
        corr_mean_abs_off_identity: summary.corr.mean_abs_off_identity(),
        stats: summary.stats,
        corr: summary.corr,
        hist_kl: summary.hist_kl,
        hist_kl_mean,
        histograms: summary.histograms,
        loss_trace: outcome.loss_trace,
        classifier_accuracy,
        class_retention_accuracy,
        trunk_checksum_before: outcome.trunk_checksum_before,
        trunk_checksum_after: outcome.trunk_checksum_after,
    })
}
