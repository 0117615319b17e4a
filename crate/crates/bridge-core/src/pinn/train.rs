//! Window extraction, feature scaling, Adam training, and scoring.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::model::{forward_on_tape, InferenceMode, PinnHyper, PinnModel, TapeParams};
use super::tensor::Tape;
use super::{forward, PinnError};
use crate::itb::AnomalyWindow;
use crate::trace::SeriesFrame;
use crate::math;
use crate::DeterministicRng;

/// Per-feature min-max scaling fitted on training data and reused verbatim at
/// inference time.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scaling {
    pub tags: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaling {
    /// Scale one raw value into [0, 1]; constant features map to 0.5.
    /// Returns the scaled value and whether clamping was needed.
    pub fn apply(&self, feature: usize, value: f64) -> (f64, bool) {
        let lo = self.min[feature];
        let hi = self.max[feature];
        let range = hi - lo;
        if range <= 1e-12 {
            return (0.5, false);
        }
        let scaled = (value - lo) / range;
        if !(0.0..=1.0).contains(&scaled) {
            (scaled.clamp(0.0, 1.0), true)
        } else {
            (scaled, false)
        }
    }

    pub fn features(&self) -> usize {
        self.tags.len()
    }
}

/// Fit min-max scaling for the given tags over a series.
pub fn fit_scaling(series: &[SeriesFrame], tags: &[String]) -> Result<Scaling, PinnError> {
    if series.is_empty() {
        return Err(PinnError::EmptySeries);
    }
    let mut min = vec![f64::INFINITY; tags.len()];
    let mut max = vec![f64::NEG_INFINITY; tags.len()];
    for frame in series {
        for (i, tag) in tags.iter().enumerate() {
            let v = frame.get(tag).ok_or_else(|| PinnError::UnknownTag { tag: tag.clone() })?;
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    Ok(Scaling { tags: tags.to_vec(), min, max })
}

/// Scaled sliding windows of a series, stride 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceBatch {
    /// Row-major [t][feature] windows, each seq_len × features long.
    pub windows: Vec<Vec<f64>>,
    /// Series timestamp of each window's first frame.
    pub starts: Vec<f64>,
    pub seq_len: usize,
    pub features: usize,
    /// Seconds between consecutive frames.
    pub dt: f64,
    /// Values clamped into [0,1] while scaling (nonzero only when the
    /// scaling was fitted elsewhere).
    pub clamped: usize,
}

/// Cut a series into scaled windows of length `seq_len` (the ITB), stride 1.
pub fn make_sequences(
    series: &[SeriesFrame],
    seq_len: usize,
    scaling: &Scaling,
) -> Result<SequenceBatch, PinnError> {
    if seq_len < 2 {
        return Err(PinnError::SeqTooShort { have: seq_len, need: 2 });
    }
    if series.len() < seq_len {
        return Err(PinnError::NotEnoughData { have: series.len(), need: seq_len });
    }
    let features = scaling.features();
    let dt = if series.len() >= 2 { series[1].ts - series[0].ts } else { 1.0 };
    let mut windows = Vec::with_capacity(series.len() - seq_len + 1);
    let mut starts = Vec::with_capacity(windows.capacity());
    let mut clamped = 0usize;

    for start in 0..=series.len() - seq_len {
        let mut data = Vec::with_capacity(seq_len * features);
        for frame in &series[start..start + seq_len] {
            for (i, tag) in scaling.tags.iter().enumerate() {
                let v =
                    frame.get(tag).ok_or_else(|| PinnError::UnknownTag { tag: tag.clone() })?;
                let (scaled, was_clamped) = scaling.apply(i, v);
                if was_clamped {
                    clamped += 1;
                }
                data.push(scaled);
            }
        }
        windows.push(data);
        starts.push(series[start].ts);
    }

    Ok(SequenceBatch { windows, starts, seq_len, features, dt, clamped })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochLosses {
    pub total: f64,
    pub mse: f64,
    pub kl: f64,
    pub pde: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochLosses>,
    /// Number of windows used for training / for threshold calibration.
    pub train_windows: usize,
    pub holdout_windows: usize,
    /// Set when the holdout split was empty and the threshold fell back to
    /// training windows.
    pub theta_from_train: bool,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
    lr: f64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(model: &PinnModel, lr: f64) -> Self {
        Self {
            m: model.params.iter().map(|p| vec![0.0; p.data.len()]).collect(),
            v: model.params.iter().map(|p| vec![0.0; p.data.len()]).collect(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, model: &mut PinnModel, grads: &[Vec<f64>]) {
        self.t += 1;
        let bc1 = 1.0 - math::pow(ADAM_BETA1, self.t as f64);
        let bc2 = 1.0 - math::pow(ADAM_BETA2, self.t as f64);
        for (p, (grad, (m, v))) in model
            .params
            .iter_mut()
            .zip(grads.iter().zip(self.m.iter_mut().zip(self.v.iter_mut())))
        {
            for i in 0..p.data.len() {
                let g = grad[i];
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p.data[i] -= self.lr * m_hat / (math::sqrt(v_hat) + ADAM_EPS);
            }
        }
    }
}

/// Composite loss of one window on the tape; returns (total, mse, kl, pde)
/// scalar node ids.
fn window_loss(
    tape: &mut Tape,
    params: &TapeParams,
    hyper: &PinnHyper,
    window: &[f64],
    noise: Option<&[f64]>,
) -> (super::TensorId, f64, f64, f64) {
    let x = tape.constant(hyper.seq_len, hyper.features, window.to_vec());
    let out = forward_on_tape(tape, params, hyper, x, noise);

    let diff = tape.sub(out.recon, x);
    let sq = tape.mul(diff, diff);
    let mse = tape.mean_all(sq);

    // KL via the clamp-aware std node so exp cannot overflow.
    let one_plus_lv = tape.add_scalar(out.logvar, 1.0);
    let mu_sq = tape.mul(out.mu, out.mu);
    let std = tape.std_from_logvar(out.logvar);
    let var = tape.mul(std, std);
    let t = tape.sub(one_plus_lv, mu_sq);
    let inner = tape.sub(t, var);
    let ksum = tape.sum_all(inner);
    let kl = tape.scale(ksum, -0.5);

    let d2r = tape.second_diff_rows(out.recon, hyper.dt);
    let sin_r = tape.sin(d2r);
    let term1 = tape.scale(sin_r, hyper.omega);
    let d2x = tape.second_diff_rows(x, hyper.dt);
    let term2 = tape.cos(d2x);
    let residual = tape.sub(term1, term2);
    let r_sq = tape.mul(residual, residual);
    let pde = tape.mean_all(r_sq);

    let a = tape.scale(mse, hyper.alpha);
    let b = tape.scale(kl, hyper.beta);
    let c = tape.scale(pde, hyper.gamma);
    let ab = tape.add(a, b);
    let total = tape.add(ab, c);

    (total, tape.scalar(mse), tape.scalar(kl), tape.scalar(pde))
}

/// Train a model on benign windows. The trailing `holdout` fraction of the
/// windows is excluded from gradient steps and used to calibrate the anomaly
/// threshold θ as the 75th percentile of held-out reconstruction errors.
pub fn train(batch: &SequenceBatch, hyper: &PinnHyper) -> Result<(PinnModel, TrainReport), PinnError> {
    if batch.windows.is_empty() {
        return Err(PinnError::NotEnoughData { have: 0, need: 1 });
    }
    if batch.seq_len != hyper.seq_len || batch.features != hyper.features {
        return Err(PinnError::ShapeMismatch { context: "train batch vs hyper" });
    }

    let scaling_placeholder = Scaling {
        tags: (0..hyper.features).map(|i| alloc::format!("f{i}")).collect(),
        min: vec![0.0; hyper.features],
        max: vec![1.0; hyper.features],
    };
    let mut model = PinnModel::init(hyper.clone(), scaling_placeholder);

    let n = batch.windows.len();
    let holdout_len = ((n as f64) * hyper.holdout) as usize;
    let train_len = n - holdout_len;
    let train_idx: Vec<usize> = (0..train_len).collect();
    if train_idx.is_empty() {
        return Err(PinnError::NotEnoughData { have: n, need: 2 });
    }

    let mut adam = Adam::new(&model, hyper.learning_rate);
    let mut order = train_idx.clone();
    let mut shuffle_rng = DeterministicRng::seed_from_u64(hyper.seed).fork(0x0bd7);
    let mut noise_rng = DeterministicRng::seed_from_u64(hyper.seed).fork(0x401e);
    let mut report = TrainReport {
        epochs: Vec::with_capacity(hyper.epochs),
        train_windows: train_len,
        holdout_windows: holdout_len,
        theta_from_train: holdout_len == 0,
    };

    for epoch in 0..hyper.epochs {
        // Fisher-Yates with the dedicated stream.
        for i in (1..order.len()).rev() {
            let j = (shuffle_rng.next_u64() % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }

        let mut sums = EpochLosses::default();
        let mut seen = 0usize;
        for chunk in order.chunks(hyper.batch.max(1)) {
            let mut tape = Tape::new();
            let params = TapeParams::register(&mut tape, &model);
            let mut chunk_total: Option<super::TensorId> = None;
            for &w in chunk {
                let noise: Vec<f64> =
                    (0..hyper.latent).map(|_| noise_rng.standard_normal()).collect();
                let (total, mse, kl, pde) =
                    window_loss(&mut tape, &params, hyper, &batch.windows[w], Some(&noise));
                sums.mse += mse;
                sums.kl += kl;
                sums.pde += pde;
                sums.total += tape.scalar(total);
                seen += 1;
                chunk_total = Some(match chunk_total {
                    Some(acc) => tape.add(acc, total),
                    None => total,
                });
            }
            let chunk_total = chunk_total.expect("non-empty chunk");
            let objective = tape.scale(chunk_total, 1.0 / chunk.len() as f64);
            if !tape.scalar(objective).is_finite() {
                return Err(PinnError::NonFinite { epoch });
            }
            tape.backward(objective);
            let grads: Vec<Vec<f64>> =
                params.ids.iter().map(|&id| tape.grad(id).to_vec()).collect();
            adam.step(&mut model, &grads);
        }

        let denom = seen.max(1) as f64;
        report.epochs.push(EpochLosses {
            total: sums.total / denom,
            mse: sums.mse / denom,
            kl: sums.kl / denom,
            pde: sums.pde / denom,
        });
    }

    // Threshold: 75th percentile (nearest-rank) of mean-path reconstruction
    // errors on the held-out benign windows.
    let theta_windows: &[Vec<f64>] = if holdout_len > 0 {
        &batch.windows[train_len..]
    } else {
        &batch.windows[..]
    };
    let mut errors: Vec<f64> =
        theta_windows.iter().map(|w| reconstruction_error(&model, w)).collect();
    errors.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
    let rank = ((errors.len() as f64) * 0.75).ceil() as usize;
    model.theta = errors[rank.saturating_sub(1).min(errors.len() - 1)];

    Ok((model, report))
}

/// Composite-loss terms of one window under the model's own weights.
/// `noise` selects the sampling path; `None` evaluates the mean path.
pub fn window_loss_terms(model: &PinnModel, window: &[f64], noise: Option<&[f64]>) -> EpochLosses {
    let mut tape = Tape::new();
    let params = TapeParams::register(&mut tape, model);
    let (total, mse, kl, pde) = window_loss(&mut tape, &params, &model.hyper, window, noise);
    EpochLosses { total: tape.scalar(total), mse, kl, pde }
}

/// Total loss of one window plus its gradient with respect to every
/// parameter tensor, in `model.params` order.
pub fn window_loss_gradients(
    model: &PinnModel,
    window: &[f64],
    noise: Option<&[f64]>,
) -> (f64, Vec<Vec<f64>>) {
    let mut tape = Tape::new();
    let params = TapeParams::register(&mut tape, model);
    let (total, _, _, _) = window_loss(&mut tape, &params, &model.hyper, window, noise);
    let value = tape.scalar(total);
    tape.backward(total);
    let grads = params.ids.iter().map(|&id| tape.grad(id).to_vec()).collect();
    (value, grads)
}

/// Mean-path reconstruction MSE of one scaled window.
pub fn reconstruction_error(model: &PinnModel, window: &[f64]) -> f64 {
    let (recon, _, _) = forward(model, window, InferenceMode::Mean);
    let n = window.len() as f64;
    window.iter().zip(&recon).map(|(x, r)| (x - r) * (x - r)).sum::<f64>() / n
}

/// Score one scaled window: reconstruction error and the threshold verdict.
pub fn score(model: &PinnModel, window: &[f64]) -> (f64, bool) {
    let error = reconstruction_error(model, window);
    (error, error > model.theta)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreReport {
    pub windows: Vec<AnomalyWindow>,
    /// Raw values outside the fitted scaling range (clamped with a warning).
    pub clamped_values: usize,
}

/// Score every window of a series against a trained model, reusing the
/// model's fitted scaling. Values outside the fitted range are clamped and
/// counted.
pub fn score_series(model: &PinnModel, series: &[SeriesFrame]) -> Result<ScoreReport, PinnError> {
    let batch = make_sequences(series, model.hyper.seq_len, &model.scaling)?;
    let mut windows = Vec::with_capacity(batch.windows.len());
    for (data, &start) in batch.windows.iter().zip(&batch.starts) {
        let (error, anomalous) = score(model, data);
        windows.push(AnomalyWindow {
            start_s: start,
            end_s: start + (model.hyper.seq_len as f64 - 1.0) * batch.dt,
            score: error,
            anomalous,
        });
    }
    Ok(ScoreReport { windows, clamped_values: batch.clamped })
}
