//! Model parameters and the autodiff forward pass.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::tensor::{Tape, TensorId};
use super::train::Scaling;
use super::LAYER_NORM_EPS;
use crate::math;
use crate::DeterministicRng;

/// Architecture and training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PinnHyper {
    /// Window length; equals the inertia time block.
    pub seq_len: usize,
    pub features: usize,
    /// Attention heads per layer; defaults to the sequence size.
    pub heads: usize,
    /// Encoder/decoder stack depth; defaults to the sequence size.
    pub layers: usize,
    pub d_k: usize,
    pub d_v: usize,
    pub ff_dim: usize,
    pub latent: usize,
    /// Inertia scalar ω of the PDE term, in seconds.
    pub omega: f64,
    /// Seconds between window steps.
    pub dt: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Trailing fraction of windows held out for threshold calibration.
    pub holdout: f64,
}

impl PinnHyper {
    /// Defaults for a given window size and feature count: heads and stack
    /// depth follow the inertia-informed sequence size, d_k = d_v =
    /// max(features, 4), latent = max(2, features/2).
    pub fn for_window(seq_len: usize, features: usize, omega: f64) -> Self {
        Self {
            seq_len,
            features,
            heads: seq_len,
            layers: seq_len,
            d_k: features.max(4),
            d_v: features.max(4),
            ff_dim: 4 * features,
            latent: (features / 2).max(2),
            omega,
            dt: 1.0,
            alpha: 1.0,
            beta: 0.001,
            gamma: 0.02,
            learning_rate: 3e-3,
            epochs: 20,
            batch: 32,
            seed: 1,
            holdout: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// The trained model: parameters, anomaly threshold, and the feature scaling
/// fitted on training data.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PinnModel {
    pub hyper: PinnHyper,
    pub params: Vec<NamedTensor>,
    /// Reconstruction-error threshold (75th percentile on held-out benign
    /// windows); set by training, 0 until calibrated.
    pub theta: f64,
    pub scaling: Scaling,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InferenceMode {
    /// Deterministic: the latent mean is decoded.
    Mean,
    /// Training path: latent sample mean + std ⊙ ε.
    Sample,
}

impl PinnModel {
    /// Fresh model with seeded uniform ±1/√fan_in weight init; layer-norm
    /// scales start at 1, all biases and shifts at 0.
    pub fn init(hyper: PinnHyper, scaling: Scaling) -> Self {
        let mut rng = DeterministicRng::seed_from_u64(hyper.seed).fork(0x5eed);
        let mut params = Vec::new();

        let mut weight = |name: String, rows: usize, cols: usize, rng: &mut DeterministicRng| {
            let bound = 1.0 / math::sqrt(rows as f64);
            let data = (0..rows * cols).map(|_| rng.uniform_in(-bound, bound)).collect();
            NamedTensor { name, rows, cols, data }
        };
        let fill = |name: String, rows: usize, cols: usize, value: f64| NamedTensor {
            name,
            rows,
            cols,
            data: alloc::vec![value; rows * cols],
        };

        let f = hyper.features;
        for stack in ["enc", "dec"] {
            for layer in 0..hyper.layers {
                for head in 0..hyper.heads {
                    for proj in ["wq", "wk", "wv"] {
                        let dim = if proj == "wv" { hyper.d_v } else { hyper.d_k };
                        params.push(weight(
                            format!("{stack}{layer}.h{head}.{proj}"),
                            f,
                            dim,
                            &mut rng,
                        ));
                    }
                }
                params.push(weight(
                    format!("{stack}{layer}.attn.wo"),
                    hyper.heads * hyper.d_v,
                    f,
                    &mut rng,
                ));
                params.push(fill(format!("{stack}{layer}.attn.bo"), 1, f, 0.0));
                params.push(fill(format!("{stack}{layer}.ln1.g"), 1, f, 1.0));
                params.push(fill(format!("{stack}{layer}.ln1.b"), 1, f, 0.0));
                params.push(weight(format!("{stack}{layer}.ff.w1"), f, hyper.ff_dim, &mut rng));
                params.push(fill(format!("{stack}{layer}.ff.b1"), 1, hyper.ff_dim, 0.0));
                params.push(weight(format!("{stack}{layer}.ff.w2"), hyper.ff_dim, f, &mut rng));
                params.push(fill(format!("{stack}{layer}.ff.b2"), 1, f, 0.0));
                params.push(fill(format!("{stack}{layer}.ln2.g"), 1, f, 1.0));
                params.push(fill(format!("{stack}{layer}.ln2.b"), 1, f, 0.0));
            }
        }
        let flat = hyper.seq_len * f;
        params.push(weight(String::from("lat.w_mu"), flat, hyper.latent, &mut rng));
        params.push(fill(String::from("lat.b_mu"), 1, hyper.latent, 0.0));
        params.push(weight(String::from("lat.w_lv"), flat, hyper.latent, &mut rng));
        // Start with a small posterior variance (std ≈ e^-2) so early epochs
        // are not drowned in reparameterization noise.
        params.push(fill(String::from("lat.b_lv"), 1, hyper.latent, -4.0));
        params.push(weight(String::from("lat.w_up"), hyper.latent, flat, &mut rng));
        params.push(fill(String::from("lat.b_up"), 1, flat, 0.0));
        // Final linear layer mapping the decoder stack back to output values.
        params.push(weight(String::from("out.w"), f, f, &mut rng));
        params.push(fill(String::from("out.b"), 1, f, 0.0));

        Self { hyper, params, theta: 0.0, scaling }
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }
}

/// Parameter tensors registered on a tape for one training step.
pub(crate) struct TapeParams {
    pub ids: Vec<TensorId>,
    index: BTreeMap<String, TensorId>,
}

impl TapeParams {
    pub(crate) fn register(tape: &mut Tape, model: &PinnModel) -> Self {
        let mut ids = Vec::with_capacity(model.params.len());
        let mut index = BTreeMap::new();
        for p in &model.params {
            let id = tape.param(p.rows, p.cols, p.data.clone());
            ids.push(id);
            index.insert(p.name.clone(), id);
        }
        Self { ids, index }
    }

    fn get(&self, name: &str) -> TensorId {
        *self.index.get(name).unwrap_or_else(|| panic!("missing parameter {name}"))
    }
}

pub(crate) struct ForwardIds {
    pub recon: TensorId,
    pub mu: TensorId,
    pub logvar: TensorId,
}

/// One encoder/decoder stack level: multi-head self-attention sublayer, then
/// a feed-forward sublayer, each wrapped in LayerNorm(x + Sublayer(x)).
fn stack_layer(
    tape: &mut Tape,
    params: &TapeParams,
    hyper: &PinnHyper,
    prefix: &str,
    layer: usize,
    input: TensorId,
) -> TensorId {
    let scale = 1.0 / math::sqrt(hyper.d_k as f64);
    let mut heads = Vec::with_capacity(hyper.heads);
    for head in 0..hyper.heads {
        let wq = params.get(&format!("{prefix}{layer}.h{head}.wq"));
        let wk = params.get(&format!("{prefix}{layer}.h{head}.wk"));
        let wv = params.get(&format!("{prefix}{layer}.h{head}.wv"));
        let q = tape.matmul(input, wq);
        let k = tape.matmul(input, wk);
        let v = tape.matmul(input, wv);
        let kt = tape.transpose(k);
        let scores = tape.matmul(q, kt);
        let scaled = tape.scale(scores, scale);
        let filter = tape.softmax(scaled);
        heads.push(tape.matmul(filter, v));
    }
    let cat = tape.concat_cols(&heads);
    let wo = params.get(&format!("{prefix}{layer}.attn.wo"));
    let bo = params.get(&format!("{prefix}{layer}.attn.bo"));
    let proj = tape.matmul(cat, wo);
    let proj = tape.add_row(proj, bo);

    let sum1 = tape.add(input, proj);
    let norm1 = tape.row_norm(sum1, LAYER_NORM_EPS);
    let g1 = params.get(&format!("{prefix}{layer}.ln1.g"));
    let b1 = params.get(&format!("{prefix}{layer}.ln1.b"));
    let scaled1 = tape.mul_row(norm1, g1);
    let out1 = tape.add_row(scaled1, b1);

    let w1 = params.get(&format!("{prefix}{layer}.ff.w1"));
    let fb1 = params.get(&format!("{prefix}{layer}.ff.b1"));
    let w2 = params.get(&format!("{prefix}{layer}.ff.w2"));
    let fb2 = params.get(&format!("{prefix}{layer}.ff.b2"));
    let h1 = tape.matmul(out1, w1);
    let h1 = tape.add_row(h1, fb1);
    let h1 = tape.relu(h1);
    let h2 = tape.matmul(h1, w2);
    let h2 = tape.add_row(h2, fb2);

    let sum2 = tape.add(out1, h2);
    let norm2 = tape.row_norm(sum2, LAYER_NORM_EPS);
    let g2 = params.get(&format!("{prefix}{layer}.ln2.g"));
    let b2 = params.get(&format!("{prefix}{layer}.ln2.b"));
    let scaled2 = tape.mul_row(norm2, g2);
    tape.add_row(scaled2, b2)
}

/// Full forward pass on the tape: encoder stack, variational bottleneck,
/// mirrored decoder stack. `noise` supplies the reparameterization draw for
/// the sampling path; the mean path decodes μ directly.
pub(crate) fn forward_on_tape(
    tape: &mut Tape,
    params: &TapeParams,
    hyper: &PinnHyper,
    x: TensorId,
    noise: Option<&[f64]>,
) -> ForwardIds {
    let mut h = x;
    for layer in 0..hyper.layers {
        h = stack_layer(tape, params, hyper, "enc", layer, h);
    }
    let flat = tape.reshape(h, 1, hyper.seq_len * hyper.features);

    let w_mu = params.get("lat.w_mu");
    let b_mu = params.get("lat.b_mu");
    let mu_lin = tape.matmul(flat, w_mu);
    let mu = tape.add_row(mu_lin, b_mu);

    let w_lv = params.get("lat.w_lv");
    let b_lv = params.get("lat.b_lv");
    let lv_lin = tape.matmul(flat, w_lv);
    let logvar = tape.add_row(lv_lin, b_lv);

    let z = match noise {
        Some(eps) => {
            debug_assert_eq!(eps.len(), hyper.latent);
            let std = tape.std_from_logvar(logvar);
            let eps = tape.constant(1, hyper.latent, eps.to_vec());
            let scaled = tape.mul(std, eps);
            tape.add(mu, scaled)
        }
        None => mu,
    };

    let w_up = params.get("lat.w_up");
    let b_up = params.get("lat.b_up");
    let up = tape.matmul(z, w_up);
    let up = tape.add_row(up, b_up);
    let mut d = tape.reshape(up, hyper.seq_len, hyper.features);
    for layer in 0..hyper.layers {
        d = stack_layer(tape, params, hyper, "dec", layer, d);
    }
    let w_out = params.get("out.w");
    let b_out = params.get("out.b");
    let projected = tape.matmul(d, w_out);
    let recon = tape.add_row(projected, b_out);

    ForwardIds { recon, mu, logvar }
}

/// Inference-facing forward pass: reconstruction, latent mean, and latent
/// logvar for one scaled window (seq_len × features, row-major).
pub fn forward(
    model: &PinnModel,
    window: &[f64],
    mode: InferenceMode,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    assert_eq!(window.len(), model.hyper.seq_len * model.hyper.features);
    let mut tape = Tape::new();
    let params = TapeParams::register(&mut tape, model);
    let x = tape.constant(model.hyper.seq_len, model.hyper.features, window.to_vec());
    let noise_data;
    let noise = match mode {
        InferenceMode::Mean => None,
        InferenceMode::Sample => {
            let mut rng = DeterministicRng::seed_from_u64(model.hyper.seed).fork(0xeb5);
            noise_data =
                (0..model.hyper.latent).map(|_| rng.standard_normal()).collect::<Vec<f64>>();
            Some(noise_data.as_slice())
        }
    };
    let out = forward_on_tape(&mut tape, &params, &model.hyper, x, noise);
    (
        tape.data(out.recon).to_vec(),
        tape.data(out.mu).to_vec(),
        tape.data(out.logvar).to_vec(),
    )
}
