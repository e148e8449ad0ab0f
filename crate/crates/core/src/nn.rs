//! Small feed-forward critics and generators with the bookkeeping the
//! training loops need: fan-in scaled initialization, Adam, element-wise
//! weight clipping, EMA of parameters, and layerwise Lipschitz bounds
//! (spectral norms by power iteration times activation constants).

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{sigmoid_scalar, NodeId, Tape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub enum NnError {
    ZeroWidthLayer { index: usize },
    TooFewLayers,
    BadLeakySlope { alpha: f64 },
    BadClipBound { c: f64 },
    BadEmaDecay { decay: f64 },
    NanGradient { tensor_index: usize },
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    Snapshot(String),
}

impl fmt::Display for NnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NnError::ZeroWidthLayer { index } => write!(f, "layer width at index {index} is zero"),
            NnError::TooFewLayers => write!(f, "config needs at least one layer (two widths)"),
            NnError::BadLeakySlope { alpha } => {
                write!(f, "leaky-relu slope {alpha} outside (0, 1]")
            }
            NnError::BadClipBound { c } => write!(f, "clip bound {c} must be positive"),
            NnError::BadEmaDecay { decay } => write!(f, "EMA decay {decay} outside [0, 1)"),
            NnError::NanGradient { tensor_index } => {
                write!(f, "NaN gradient for parameter tensor {tensor_index}")
            }
            NnError::ShapeMismatch { expected, got } => {
                write!(f, "parameter shape mismatch: expected {expected:?}, got {got:?}")
            }
            NnError::Snapshot(msg) => write!(f, "snapshot: {msg}"),
        }
    }
}

impl std::error::Error for NnError {}

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
}

impl Activation {
    /// Global Lipschitz constant of the elementwise map.
    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Relu | Activation::Tanh => 1.0,
            Activation::LeakyRelu(alpha) => alpha.max(1.0),
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => {
                if v > 0.0 {
                    v
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(alpha) => {
                if v >= 0.0 {
                    v
                } else {
                    alpha * v
                }
            }
            Activation::Tanh => v.tanh(),
        }
    }
}

/// Output head. `BoundedSigmoid` keeps the raw score available; the bounded
/// score is `σ(raw) ∈ (0,1)`, and the `[-1,0]` convention is `-σ(raw)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Head {
    Raw,
    BoundedSigmoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    /// Widths from input to output, e.g. `[1, 64, 64, 1]`.
    pub layer_widths: Vec<usize>,
    pub hidden: Activation,
    pub head: Head,
}

impl MlpConfig {
    /// Desk-scale critic: input → 64 → 64 → 1, leaky-relu(0.2), sigmoid head.
    pub fn critic_default(input_dim: usize) -> Self {
        MlpConfig {
            layer_widths: vec![input_dim, 64, 64, 1],
            hidden: Activation::LeakyRelu(0.2),
            head: Head::BoundedSigmoid,
        }
    }

    /// Desk-scale generator: latent → 64 → 64 → data dim, relu, raw output.
    pub fn generator_default(latent_dim: usize, data_dim: usize) -> Self {
        MlpConfig {
            layer_widths: vec![latent_dim, 64, 64, data_dim],
            hidden: Activation::Relu,
            head: Head::Raw,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.layer_widths.len() < 2 {
            return Err(NnError::TooFewLayers);
        }
        for (i, &w) in self.layer_widths.iter().enumerate() {
            if w == 0 {
                return Err(NnError::ZeroWidthLayer { index: i });
            }
        }
        if let Activation::LeakyRelu(alpha) = self.hidden {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(NnError::BadLeakySlope { alpha });
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }
}

/// One affine layer: `x·w + b` with `w: [in, out]`, `b: [out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    /// Parameter tensors in declaration order: w0, b0, w1, b1, …
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w, &mut l.b])
            .collect()
    }

    /// Registers every parameter tensor on `tape`; differentiable leaves
    /// when `trainable`, constants otherwise. Node order matches
    /// [`MlpParams::tensors`].
    pub fn on_tape(&self, tape: &mut Tape, trainable: bool) -> Vec<NodeId> {
        self.tensors()
            .into_iter()
            .map(|t| {
                if trainable {
                    tape.leaf(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect()
    }

    /// Overwrites parameters from tensors in declaration order.
    pub fn assign(&mut self, tensors: &[Tensor]) -> Result<(), NnError> {
        let mut slots = self.tensors_mut();
        assert_eq!(slots.len(), tensors.len(), "parameter count mismatch");
        for (slot, t) in slots.iter_mut().zip(tensors) {
            if slot.shape() != t.shape() {
                return Err(NnError::ShapeMismatch {
                    expected: slot.shape().to_vec(),
                    got: t.shape().to_vec(),
                });
            }
            **slot = t.clone();
        }
        Ok(())
    }
}

/// Zero-mean uniform fan-in/fan-out scaled initialization with bound
/// `√(6/(fan_in+fan_out))`; biases start at zero. Deterministic per seed.
pub fn init_params(config: &MlpConfig, seed: u64) -> Result<MlpParams, NnError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(config.num_layers());
    for l in 0..config.num_layers() {
        let fan_in = config.layer_widths[l];
        let fan_out = config.layer_widths[l + 1];
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| bound * (2.0 * rng.gen::<f64>() - 1.0))
            .collect();
        layers.push(Layer {
            w: Tensor::new(vec![fan_in, fan_out], data),
            b: Tensor::zeros(&[fan_out]),
        });
    }
    Ok(MlpParams { layers })
}

/// Raw (pre-head) forward pass for a batch laid out as an `[m, in]` matrix.
pub fn forward_raw_batch(params: &MlpParams, config: &MlpConfig, x: &Tensor) -> Tensor {
    let (m, d) = x.dims2();
    assert_eq!(d, config.input_dim(), "input width {d} != config {}", config.input_dim());
    let mut cur = x.data().to_vec();
    for (l, layer) in params.layers.iter().enumerate() {
        let (k, n) = layer.w.dims2();
        let ws = layer.w.data();
        let bs = layer.b.data();
        let mut next = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut next[i * n..(i + 1) * n];
            orow.copy_from_slice(bs);
            for t in 0..k {
                let v = cur[i * k + t];
                if v == 0.0 {
                    continue;
                }
                let wrow = &ws[t * n..(t + 1) * n];
                for (o, &ww) in orow.iter_mut().zip(wrow) {
                    *o += v * ww;
                }
            }
        }
        if l + 1 < params.layers.len() {
            for v in next.iter_mut() {
                *v = config.hidden.apply(*v);
            }
        }
        cur = next;
    }
    Tensor::new(vec![m, config.output_dim()], cur)
}

/// Raw + bounded critic scores for one input point.
///
/// The bounded score is `σ(raw) ∈ (0,1)`; its `[-1,0]`-convention companion
/// is `-σ(raw)`.
pub fn critic_forward(params: &MlpParams, config: &MlpConfig, x: &[f64]) -> (f64, f64) {
    assert_eq!(config.output_dim(), 1, "critic must have output width 1");
    let xt = Tensor::new(vec![1, x.len()], x.to_vec());
    let raw = forward_raw_batch(params, config, &xt).data()[0];
    (raw, sigmoid_scalar(raw))
}

/// Raw critic scores for many points.
pub fn critic_raw_scores(params: &MlpParams, config: &MlpConfig, xs: &[Vec<f64>]) -> Vec<f64> {
    assert_eq!(config.output_dim(), 1, "critic must have output width 1");
    if xs.is_empty() {
        return Vec::new();
    }
    let d = xs[0].len();
    let mut flat = Vec::with_capacity(xs.len() * d);
    for x in xs {
        flat.extend_from_slice(x);
    }
    let xt = Tensor::new(vec![xs.len(), d], flat);
    forward_raw_batch(params, config, &xt).data().to_vec()
}

/// Generator forward: raw MLP output for one latent point.
pub fn generator_forward(params: &MlpParams, config: &MlpConfig, z: &[f64]) -> Vec<f64> {
    let zt = Tensor::new(vec![1, z.len()], z.to_vec());
    forward_raw_batch(params, config, &zt).data().to_vec()
}

/// Generator forward for a latent batch, returning an `[m, data_dim]` tensor.
pub fn generator_forward_batch(params: &MlpParams, config: &MlpConfig, zs: &Tensor) -> Tensor {
    forward_raw_batch(params, config, zs)
}

/// Raw forward pass on a tape; returns the `[m, out]` raw output node.
/// Parameter nodes come from [`MlpParams::on_tape`].
pub fn forward_raw_on_tape(
    tape: &mut Tape,
    param_nodes: &[NodeId],
    config: &MlpConfig,
    x: NodeId,
) -> NodeId {
    assert_eq!(param_nodes.len(), 2 * config.num_layers(), "parameter node count");
    let mut cur = x;
    for l in 0..config.num_layers() {
        let w = param_nodes[2 * l];
        let b = param_nodes[2 * l + 1];
        cur = tape.affine(cur, w, b);
        if l + 1 < config.num_layers() {
            cur = match config.hidden {
                Activation::Relu => tape.relu(cur),
                Activation::LeakyRelu(alpha) => tape.leaky_relu(alpha, cur),
                Activation::Tanh => tape.tanh(cur),
            };
        }
    }
    cur
}

/// Adam optimizer state over a flat list of parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &MlpParams, lr: f64, beta1: f64, beta2: f64) -> Self {
        let shapes: Vec<Tensor> = params
            .tensors()
            .into_iter()
            .map(|t| Tensor::zeros(t.shape()))
            .collect();
        AdamState {
            lr,
            beta1,
            beta2,
            epsilon: 1e-8,
            step: 0,
            m: shapes.clone(),
            v: shapes,
        }
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.m
    }
}

/// One Adam update with bias correction. `grads` must match the declaration
/// order of [`MlpParams::tensors`]. NaN gradients abort with an error — the
/// caller treats that as a training-divergence signal.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &[Tensor],
    state: &mut AdamState,
) -> Result<(), NnError> {
    {
        let slots = params.tensors();
        assert_eq!(slots.len(), grads.len(), "gradient count mismatch");
        for (i, g) in grads.iter().enumerate() {
            if g.has_nan() {
                return Err(NnError::NanGradient { tensor_index: i });
            }
            if slots[i].shape() != g.shape() {
                return Err(NnError::ShapeMismatch {
                    expected: slots[i].shape().to_vec(),
                    got: g.shape().to_vec(),
                });
            }
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let mut slots = params.tensors_mut();
    for (i, g) in grads.iter().enumerate() {
        let new_m = state.m[i].zip(g, |mm, gg| state.beta1 * mm + (1.0 - state.beta1) * gg);
        let new_v = state.v[i].zip(g, |vv, gg| state.beta2 * vv + (1.0 - state.beta2) * gg * gg);
        let update = new_m.zip(&new_v, |mm, vv| {
            let mhat = mm / bc1;
            let vhat = vv / bc2;
            state.lr * mhat / (vhat.sqrt() + state.epsilon)
        });
        *slots[i] = slots[i].zip(&update, |p, u| p - u);
        state.m[i] = new_m;
        state.v[i] = new_v;
    }
    Ok(())
}

/// Clamps every parameter entry into `[-c, c]`.
pub fn weight_clip(params: &mut MlpParams, c: f64) -> Result<(), NnError> {
    if !(c > 0.0) {
        return Err(NnError::BadClipBound { c });
    }
    for slot in params.tensors_mut() {
        *slot = slot.map(|v| v.clamp(-c, c));
    }
    Ok(())
}

/// `avg ← decay·avg + (1−decay)·params`, element-wise.
pub fn ema_update(avg: &mut MlpParams, params: &MlpParams, decay: f64) -> Result<(), NnError> {
    if !(0.0..1.0).contains(&decay) {
        return Err(NnError::BadEmaDecay { decay });
    }
    let cur = params.tensors();
    let mut slots = avg.tensors_mut();
    assert_eq!(slots.len(), cur.len(), "parameter count mismatch");
    for (slot, p) in slots.iter_mut().zip(cur) {
        **slot = slot.zip(p, |a, b| decay * a + (1.0 - decay) * b);
    }
    Ok(())
}

/// Largest singular value by power iteration.
///
/// Runs at most `max_iters` rounds with convergence tolerance `tol` on the
/// estimate; returns `(sigma, converged)`. The estimate is a Rayleigh
/// quotient and so never exceeds the true spectral norm.
pub fn spectral_norm(w: &Tensor, max_iters: usize, tol: f64) -> (f64, bool) {
    let (rows, cols) = w.dims2();
    let ws = w.data();
    if ws.iter().all(|&v| v == 0.0) {
        return (0.0, true);
    }
    // Deterministic start with unequal components so it is not orthogonal
    // to the top singular vector of any diagonal matrix.
    let mut x: Vec<f64> = (0..cols).map(|i| 1.0 + 1e-3 * i as f64).collect();
    normalize(&mut x);
    let mut sigma = 0.0;
    let mut y = vec![0.0; rows];
    for _ in 0..max_iters {
        // y = W x
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = ws[i * cols..(i + 1) * cols]
                .iter()
                .zip(&x)
                .map(|(&a, &b)| a * b)
                .sum();
        }
        let ny = normalize(&mut y);
        if ny == 0.0 {
            return (0.0, true);
        }
        // x = Wᵀ y
        for xi in x.iter_mut() {
            *xi = 0.0;
        }
        for (i, &yi) in y.iter().enumerate() {
            for (j, xj) in x.iter_mut().enumerate() {
                *xj += ws[i * cols + j] * yi;
            }
        }
        let new_sigma = normalize(&mut x);
        if (new_sigma - sigma).abs() <= tol * new_sigma.max(1.0) {
            return (new_sigma, true);
        }
        sigma = new_sigma;
    }
    (sigma, false)
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Upper bound on the Lipschitz constant of a network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzBound {
    pub value: f64,
    /// Set when power iteration hit the iteration cap before converging;
    /// the value is then the current (under-)estimate.
    pub approximate: bool,
}

/// Product over layers of spectral norms times activation constants.
///
/// Hidden activations contribute their Lipschitz constant per hidden layer;
/// a sigmoid head contributes 1/4. Use [`lipschitz_upper_bound_raw`] for a
/// bound on the raw (pre-head) score.
pub fn lipschitz_upper_bound(params: &MlpParams, config: &MlpConfig) -> LipschitzBound {
    let mut bound = lipschitz_upper_bound_raw(params, config);
    if config.head == Head::BoundedSigmoid {
        bound.value *= 0.25;
    }
    bound
}

/// Lipschitz bound of the raw score (no head constant).
pub fn lipschitz_upper_bound_raw(params: &MlpParams, config: &MlpConfig) -> LipschitzBound {
    let mut value = 1.0;
    let mut approximate = false;
    let hidden_lip = config.hidden.lipschitz();
    for (l, layer) in params.layers.iter().enumerate() {
        let (sigma, converged) = spectral_norm(&layer.w, 100, 1e-10);
        value *= sigma;
        if l + 1 < params.layers.len() {
            value *= hidden_lip;
        }
        approximate |= !converged;
    }
    LipschitzBound { value, approximate }
}

// ---- parameter snapshots ---------------------------------------------------

const SNAPSHOT_MAGIC: &[u8; 4] = b"BOLT";
const SNAPSHOT_VERSION: u8 = 1;

/// Flat binary snapshot: magic `BOLT`, a version byte, then every parameter
/// entry as little-endian f64 in declaration order.
pub fn save_params(params: &MlpParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.push(SNAPSHOT_VERSION);
    for t in params.tensors() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Reads a snapshot produced by [`save_params`] into the shapes dictated by
/// `config`.
pub fn load_params(bytes: &[u8], config: &MlpConfig) -> Result<MlpParams, NnError> {
    config.validate()?;
    if bytes.len() < 5 || &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(NnError::Snapshot("missing BOLT magic".into()));
    }
    if bytes[4] != SNAPSHOT_VERSION {
        return Err(NnError::Snapshot(format!(
            "unsupported version {} (expected {SNAPSHOT_VERSION})",
            bytes[4]
        )));
    }
    let payload = &bytes[5..];
    if !payload.len().is_multiple_of(8) {
        return Err(NnError::Snapshot("truncated f64 stream".into()));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut layers = Vec::with_capacity(config.num_layers());
    for l in 0..config.num_layers() {
        let fan_in = config.layer_widths[l];
        let fan_out = config.layer_widths[l + 1];
        let mut take = |n: usize| -> Result<Vec<f64>, NnError> {
            let got: Vec<f64> = values.by_ref().take(n).collect();
            if got.len() != n {
                return Err(NnError::Snapshot("f64 stream too short for config".into()));
            }
            Ok(got)
        };
        let w = Tensor::new(vec![fan_in, fan_out], take(fan_in * fan_out)?);
        let b = Tensor::vector(take(fan_out)?);
        layers.push(Layer { w, b });
    }
    if values.next().is_some() {
        return Err(NnError::Snapshot("trailing bytes after parameters".into()));
    }
    Ok(MlpParams { layers })
}
