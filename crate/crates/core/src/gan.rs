//! Adversarial training at desk scale: the prior-weighted bounded
//! objective with gradient penalty, the raw-score (Wasserstein) baseline,
//! penalty variants (one-sided, R1/R2, weight clipping), a deterministic
//! training loop over 1-D targets, and training-health diagnostics.
//!
//! Gradient penalties differentiate through `‖∇_x h̃(x)‖₂`, which is why
//! the autodiff tape supports a second backward pass. Penalties always act
//! on the raw critic score; the bounded score `σ(h̃)` only ever appears
//! inside the objective.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{AdError, NodeId, Tape, Tensor};
use crate::divergences::{
    frechet_gaussian, gaussian_fit_samples, tv_histogram, w1_samples_1d, DivError,
};
use crate::nn::{
    adam_step, ema_update, forward_raw_on_tape, generator_forward_batch, init_params, weight_clip,
    AdamState, MlpConfig, MlpParams, NnError,
};
use crate::problems::Dist;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub enum GanError {
    BadConfig(String),
    NegativeLambda { lambda: f64 },
    Diverged { step: usize },
    UnsupportedDimension { dim: usize },
    Nn(NnError),
    Ad(AdError),
    Div(DivError),
}

impl fmt::Display for GanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GanError::BadConfig(msg) => write!(f, "invalid config: {msg}"),
            GanError::NegativeLambda { lambda } => {
                write!(f, "penalty coefficient {lambda} must be nonnegative")
            }
            GanError::Diverged { step } => write!(f, "training diverged at step {step}"),
            GanError::UnsupportedDimension { dim } => {
                write!(f, "training targets must be 1-D (got dimension {dim})")
            }
            GanError::Nn(e) => write!(f, "{e}"),
            GanError::Ad(e) => write!(f, "{e}"),
            GanError::Div(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for GanError {}

impl From<NnError> for GanError {
    fn from(e: NnError) -> Self {
        GanError::Nn(e)
    }
}

impl From<AdError> for GanError {
    fn from(e: AdError) -> Self {
        GanError::Ad(e)
    }
}

impl From<DivError> for GanError {
    fn from(e: DivError) -> Self {
        GanError::Div(e)
    }
}

/// Lipschitz-control regularizer applied to the critic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    /// `(‖∇h̃(x̃)‖ − 1)²` on real/fake interpolants.
    TwoSidedGp,
    /// `max(0, ‖∇h̃(x̃)‖ − 1)²` on interpolants.
    OneSidedGp,
    /// `‖∇h̃(x)‖²` on real samples.
    R1,
    /// `‖∇h̃(x̂)‖²` on generated samples.
    R2,
    None,
}

/// Which min-max objective the pair optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Prior-weighted bounded objective on `σ(h̃)`.
    Bolt,
    /// Raw-score mean gap (the Wasserstein baseline).
    Wgan,
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct GanConfig {
    pub pi: f64,
    pub lambda_gp: f64,
    pub penalty: PenaltyKind,
    pub clip_c: Option<f64>,
    /// Critic updates per generator update.
    pub n_critic: usize,
    pub batch: usize,
    pub eta_d: f64,
    pub eta_g: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Generator steps.
    pub steps: usize,
    pub seed: u64,
    pub ema_decay: Option<f64>,
    /// Apply the penalty every k critic steps, scaling λ by k.
    pub lazy_interval: usize,
    pub objective: Objective,
    /// Evaluate and record metrics every this many generator steps.
    pub log_interval: usize,
    pub latent_dim: usize,
    pub critic_cfg: MlpConfig,
    pub generator_cfg: MlpConfig,
}

impl GanConfig {
    /// Defaults for a 1-D target: π = 0.5, two-sided GP with λ = 10,
    /// 5 critic steps, batch 64, Adam(2e-4, 0.5, 0.999).
    pub fn default_1d(steps: usize, seed: u64) -> Self {
        GanConfig {
            pi: 0.5,
            lambda_gp: 10.0,
            penalty: PenaltyKind::TwoSidedGp,
            clip_c: None,
            n_critic: 5,
            batch: 64,
            eta_d: 2e-4,
            eta_g: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            steps,
            seed,
            ema_decay: None,
            lazy_interval: 1,
            objective: Objective::Bolt,
            log_interval: 100,
            latent_dim: 2,
            critic_cfg: MlpConfig::critic_default(1),
            generator_cfg: MlpConfig::generator_default(2, 1),
        }
    }

    /// Validates invariants; returns human-readable warnings for legal but
    /// suspicious settings (e.g. π = 1 zeroes the generator loss).
    pub fn validate(&self) -> Result<Vec<String>, GanError> {
        let mut warnings = Vec::new();
        if !(self.pi > 0.0 && self.pi <= 1.0) {
            return Err(GanError::BadConfig(format!("pi {} outside (0, 1]", self.pi)));
        }
        if self.lambda_gp < 0.0 {
            return Err(GanError::NegativeLambda { lambda: self.lambda_gp });
        }
        if self.batch < 2 {
            return Err(GanError::BadConfig("batch must be ≥ 2 (interpolation needs pairs)".into()));
        }
        if self.n_critic < 1 {
            return Err(GanError::BadConfig("n_critic must be ≥ 1".into()));
        }
        if self.lazy_interval < 1 {
            return Err(GanError::BadConfig("lazy_interval must be ≥ 1".into()));
        }
        if let Some(c) = self.clip_c {
            if !(c > 0.0) {
                return Err(GanError::BadConfig(format!("clip_c {c} must be positive")));
            }
        }
        if let Some(d) = self.ema_decay {
            if !(0.0..1.0).contains(&d) {
                return Err(GanError::BadConfig(format!("ema_decay {d} outside [0, 1)")));
            }
        }
        if self.log_interval < 1 {
            return Err(GanError::BadConfig("log_interval must be ≥ 1".into()));
        }
        self.critic_cfg.validate().map_err(GanError::Nn)?;
        self.generator_cfg.validate().map_err(GanError::Nn)?;
        if self.critic_cfg.output_dim() != 1 {
            return Err(GanError::BadConfig("critic output width must be 1".into()));
        }
        if self.generator_cfg.input_dim() != self.latent_dim {
            return Err(GanError::BadConfig("generator input width must equal latent_dim".into()));
        }
        if self.critic_cfg.input_dim() != self.generator_cfg.output_dim() {
            return Err(GanError::BadConfig("critic input width must match generator output".into()));
        }
        if self.pi == 1.0 {
            warnings.push("pi = 1 makes the generator loss identically zero".into());
        }
        if self.penalty == PenaltyKind::None && self.clip_c.is_none() {
            warnings.push("no Lipschitz control configured; training may be unstable".into());
        }
        Ok(warnings)
    }
}

// ---- objective and penalty nodes --------------------------------------------------

/// Batch estimator of the prior-weighted bounded objective:
/// `π·mean(σ(h̃(real))) − (1−π)·mean(σ(h̃(fake)))`. Value lies in `[π−1, π]`.
pub fn l_bolt_minibatch(
    tape: &mut Tape,
    critic_nodes: &[NodeId],
    critic_cfg: &MlpConfig,
    real: NodeId,
    fake: NodeId,
    pi: f64,
) -> NodeId {
    let raw_real = forward_raw_on_tape(tape, critic_nodes, critic_cfg, real);
    let raw_fake = forward_raw_on_tape(tape, critic_nodes, critic_cfg, fake);
    let h_real = tape.sigmoid(raw_real);
    let h_fake = tape.sigmoid(raw_fake);
    let mean_real = tape.mean(h_real);
    let mean_fake = tape.mean(h_fake);
    let a = tape.scalar_mul(pi, mean_real);
    let b = tape.scalar_mul(1.0 - pi, mean_fake);
    tape.sub(a, b)
}

/// Raw-score mean gap `mean(h̃(real)) − mean(h̃(fake))`.
pub fn wgan_objective(
    tape: &mut Tape,
    critic_nodes: &[NodeId],
    critic_cfg: &MlpConfig,
    real: NodeId,
    fake: NodeId,
) -> NodeId {
    let raw_real = forward_raw_on_tape(tape, critic_nodes, critic_cfg, real);
    let raw_fake = forward_raw_on_tape(tape, critic_nodes, critic_cfg, fake);
    let mean_real = tape.mean(raw_real);
    let mean_fake = tape.mean(raw_fake);
    tape.sub(mean_real, mean_fake)
}

/// Per-sample raw-score input gradient as a differentiable node, plus its
/// Euclidean norm node. The input row becomes a leaf so the gradient with
/// respect to it exists on the tape.
fn input_grad_norm(
    tape: &mut Tape,
    critic_nodes: &[NodeId],
    critic_cfg: &MlpConfig,
    row: &[f64],
) -> Result<(NodeId, NodeId), GanError> {
    let x = tape.leaf(Tensor::new(vec![1, row.len()], row.to_vec()));
    let raw = forward_raw_on_tape(tape, critic_nodes, critic_cfg, x);
    let score = tape.mean(raw); // [1,1] → scalar
    let grad = tape.backward_graph(score, &[x])?[0];
    let norm = tape.euclidean_norm(grad);
    Ok((grad, norm))
}

/// Interpolation gradient penalty on the raw score:
/// `(λ/B)·Σ_j (‖∇_{x̃_j} h̃(x̃_j)‖₂ − 1)²` with `x̃ = αx + (1−α)x̂`,
/// `α ~ U(0,1)` i.i.d. per pair. `one_sided` replaces the square's argument
/// by `max(0, ‖∇‖ − 1)`.
///
/// Returns the penalty node and the measured gradient norms.
#[allow(clippy::too_many_arguments)]
pub fn gradient_penalty(
    tape: &mut Tape,
    critic_nodes: &[NodeId],
    critic_cfg: &MlpConfig,
    real: &Tensor,
    fake: &Tensor,
    lambda: f64,
    one_sided: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(NodeId, Vec<f64>), GanError> {
    if lambda < 0.0 {
        return Err(GanError::NegativeLambda { lambda });
    }
    let (b, d) = real.dims2();
    assert_eq!(real.shape(), fake.shape(), "real/fake batch shapes differ");
    assert!(b >= 1, "empty batch");
    let one = tape.constant(Tensor::scalar(1.0));
    let mut acc: Option<NodeId> = None;
    let mut norms = Vec::with_capacity(b);
    for j in 0..b {
        let alpha: f64 = rng.gen();
        let row: Vec<f64> = (0..d)
            .map(|k| alpha * real.data()[j * d + k] + (1.0 - alpha) * fake.data()[j * d + k])
            .collect();
        let (_, norm) = input_grad_norm(tape, critic_nodes, critic_cfg, &row)?;
        norms.push(tape.value(norm).item());
        let mut gap = tape.sub(norm, one);
        if one_sided {
            gap = tape.relu(gap);
        }
        let sq = tape.square(gap);
        acc = Some(match acc {
            Some(a) => tape.add(a, sq),
            None => sq,
        });
    }
    let total = acc.expect("batch is non-empty");
    let penalty = tape.scalar_mul(lambda / b as f64, total);
    Ok((penalty, norms))
}

/// One-sided interpolation penalty: only gradient norms above 1 are
/// penalized, so it never exceeds the two-sided form.
#[allow(clippy::too_many_arguments)]
pub fn one_sided_penalty(
    tape: &mut Tape,
    critic_nodes: &[NodeId],
    critic_cfg: &MlpConfig,
    real: &Tensor,
    fake: &Tensor,
    lambda: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(NodeId, Vec<f64>), GanError> {
    gradient_penalty(tape, critic_nodes, critic_cfg, real, fake, lambda, true, rng)
}

/// R1: zero-centered gradient penalty on real samples.
pub fn r1_penalty(
    tape: &mut Tape,
    critic_nodes: &[NodeId],
    critic_cfg: &MlpConfig,
    real: &Tensor,
    lambda: f64,
) -> Result<(NodeId, Vec<f64>), GanError> {
    zero_centered_penalty(tape, critic_nodes, critic_cfg, real, lambda)
}

/// R2: zero-centered gradient penalty on generated samples.
pub fn r2_penalty(
    tape: &mut Tape,
    critic_nodes: &[NodeId],
    critic_cfg: &MlpConfig,
    fake: &Tensor,
    lambda: f64,
) -> Result<(NodeId, Vec<f64>), GanError> {
    zero_centered_penalty(tape, critic_nodes, critic_cfg, fake, lambda)
}

/// Zero-centered penalty `λ·mean_j ‖∇_x h̃(x_j)‖²` over the given batch
/// (R1 on real samples, R2 on generated ones).
pub fn zero_centered_penalty(
    tape: &mut Tape,
    critic_nodes: &[NodeId],
    critic_cfg: &MlpConfig,
    batch: &Tensor,
    lambda: f64,
) -> Result<(NodeId, Vec<f64>), GanError> {
    if lambda < 0.0 {
        return Err(GanError::NegativeLambda { lambda });
    }
    let (b, d) = batch.dims2();
    assert!(b >= 1, "empty batch");
    let mut acc: Option<NodeId> = None;
    let mut sq_norms = Vec::with_capacity(b);
    for j in 0..b {
        let row = batch.data()[j * d..(j + 1) * d].to_vec();
        let (grad, norm) = input_grad_norm(tape, critic_nodes, critic_cfg, &row)?;
        sq_norms.push(tape.value(norm).item());
        let sq = tape.square(grad);
        let ssq = tape.sum(sq);
        acc = Some(match acc {
            Some(a) => tape.add(a, ssq),
            None => ssq,
        });
    }
    let total = acc.expect("batch is non-empty");
    let penalty = tape.scalar_mul(lambda / b as f64, total);
    Ok((penalty, sq_norms))
}

// ---- per-step log records -----------------------------------------------------------

/// Per-logged-step metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub step: usize,
    pub critic_loss: f64,
    pub l_bolt: f64,
    pub penalty: f64,
    /// Unscaled penalty mean over |objective|, the training-health ratio.
    pub ratio: f64,
    pub gn_p10: f64,
    pub gn_p50: f64,
    pub gn_p90: f64,
    pub w1: f64,
    pub tv_hist: f64,
    pub frechet: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<TrainRecord>,
    pub diverged: bool,
    pub diverged_at: Option<usize>,
}

impl TrainHistory {
    pub const CSV_HEADER: &'static str =
        "step,critic_loss,l_bolt,penalty,ratio,gn_p10,gn_p50,gn_p90,w1,tv_hist,frechet";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                r.step,
                r.critic_loss,
                r.l_bolt,
                r.penalty,
                r.ratio,
                r.gn_p10,
                r.gn_p50,
                r.gn_p90,
                r.w1,
                r.tv_hist,
                r.frechet
            ));
        }
        out
    }

    pub fn final_w1(&self) -> Option<f64> {
        self.records.last().map(|r| r.w1)
    }

    pub fn initial_w1(&self) -> Option<f64> {
        self.records.first().map(|r| r.w1)
    }
}

/// Everything `train` returns: the metric log plus final parameters.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: TrainHistory,
    pub critic: MlpParams,
    pub generator: MlpParams,
    pub ema_generator: Option<MlpParams>,
    pub warnings: Vec<String>,
}

// ---- trainer ---------------------------------------------------------------------------

/// Mutable training state threaded through critic and generator steps.
pub struct TrainerState {
    pub critic: MlpParams,
    pub generator: MlpParams,
    critic_adam: AdamState,
    gen_adam: AdamState,
    rng: ChaCha8Rng,
    critic_steps_done: usize,
    /// Interpolant gradient norms measured in the most recent critic step.
    pub last_grad_norms: Vec<f64>,
    ema: Option<MlpParams>,
}

/// Scalar log of one critic update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticStepLog {
    pub critic_loss: f64,
    pub objective: f64,
    pub penalty: f64,
    pub ratio: f64,
}

impl TrainerState {
    pub fn new(config: &GanConfig) -> Result<Self, GanError> {
        let critic = init_params(&config.critic_cfg, derive_seed(config.seed, "critic-init", 0))?;
        let generator =
            init_params(&config.generator_cfg, derive_seed(config.seed, "generator-init", 0))?;
        let critic_adam = AdamState::new(&critic, config.eta_d, config.beta1, config.beta2);
        let gen_adam = AdamState::new(&generator, config.eta_g, config.beta1, config.beta2);
        let ema = config.ema_decay.map(|_| generator.clone());
        Ok(TrainerState {
            critic,
            generator,
            critic_adam,
            gen_adam,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "train-stream", 0)),
            critic_steps_done: 0,
            last_grad_norms: Vec::new(),
            ema,
        })
    }

    /// Generator used for evaluation (the EMA copy when configured).
    pub fn eval_generator(&self) -> &MlpParams {
        self.ema.as_ref().unwrap_or(&self.generator)
    }

    fn sample_data_batch(&mut self, target: &Dist, b: usize) -> Tensor {
        let d = target.dim();
        let mut flat = Vec::with_capacity(b * d);
        for _ in 0..b {
            flat.extend_from_slice(&target.sample_one(&mut self.rng));
        }
        Tensor::new(vec![b, d], flat)
    }

    fn sample_latent_batch(&mut self, config: &GanConfig, b: usize) -> Tensor {
        let mut flat = Vec::with_capacity(b * config.latent_dim);
        for _ in 0..b * config.latent_dim {
            flat.push(self.rng.sample(StandardNormal));
        }
        Tensor::new(vec![b, config.latent_dim], flat)
    }

    /// One critic update on fresh batches: maximizes the objective by
    /// minimizing `−objective + penalty`, then applies weight clipping when
    /// configured. The generator is treated as fixed data.
    pub fn critic_step(
        &mut self,
        config: &GanConfig,
        target: &Dist,
        step: usize,
    ) -> Result<CriticStepLog, GanError> {
        let b = config.batch;
        let real = self.sample_data_batch(target, b);
        let latents = self.sample_latent_batch(config, b);
        let fake = generator_forward_batch(&self.generator, &config.generator_cfg, &latents);

        let mut tape = Tape::new();
        let critic_nodes = self.critic.on_tape(&mut tape, true);
        let real_node = tape.constant(real.clone());
        let fake_node = tape.constant(fake.clone());
        let objective = match config.objective {
            Objective::Bolt => l_bolt_minibatch(
                &mut tape,
                &critic_nodes,
                &config.critic_cfg,
                real_node,
                fake_node,
                config.pi,
            ),
            Objective::Wgan => wgan_objective(
                &mut tape,
                &critic_nodes,
                &config.critic_cfg,
                real_node,
                fake_node,
            ),
        };

        // Lazy regularization applies the penalty every k-th critic step
        // with λ scaled by k.
        let due = self.critic_steps_done.is_multiple_of(config.lazy_interval);
        let lambda_eff = config.lambda_gp * config.lazy_interval as f64;
        let mut penalty_value = 0.0;
        let mut ratio = 0.0;
        let mut loss = tape.scalar_mul(-1.0, objective);
        if due && config.penalty != PenaltyKind::None {
            let (penalty, measured) = match config.penalty {
                PenaltyKind::TwoSidedGp | PenaltyKind::OneSidedGp => gradient_penalty(
                    &mut tape,
                    &critic_nodes,
                    &config.critic_cfg,
                    &real,
                    &fake,
                    lambda_eff,
                    config.penalty == PenaltyKind::OneSidedGp,
                    &mut self.rng,
                )?,
                PenaltyKind::R1 => zero_centered_penalty(
                    &mut tape,
                    &critic_nodes,
                    &config.critic_cfg,
                    &real,
                    lambda_eff,
                )?,
                PenaltyKind::R2 => zero_centered_penalty(
                    &mut tape,
                    &critic_nodes,
                    &config.critic_cfg,
                    &fake,
                    lambda_eff,
                )?,
                PenaltyKind::None => unreachable!(),
            };
            penalty_value = tape.value(penalty).item();
            let objective_value = tape.value(objective).item();
            let mean_gap: f64 = match config.penalty {
                PenaltyKind::TwoSidedGp => {
                    measured.iter().map(|n| (n - 1.0) * (n - 1.0)).sum::<f64>()
                        / measured.len() as f64
                }
                PenaltyKind::OneSidedGp => {
                    measured
                        .iter()
                        .map(|n| (n - 1.0).max(0.0).powi(2))
                        .sum::<f64>()
                        / measured.len() as f64
                }
                // R1/R2 measure plain norms; their health ratio uses ‖∇‖²
                _ => measured.iter().map(|n| n * n).sum::<f64>() / measured.len() as f64,
            };
            ratio = mean_gap / objective_value.abs().max(1e-12);
            self.last_grad_norms = measured;
            loss = tape.add(loss, penalty);
        }

        let loss_value = tape.value(loss).item();
        let objective_value = tape.value(objective).item();
        if !loss_value.is_finite() {
            return Err(GanError::Diverged { step });
        }
        let grads = tape
            .backward(loss, &critic_nodes)
            .map_err(|_| GanError::Diverged { step })?;
        adam_step(&mut self.critic, &grads, &mut self.critic_adam)
            .map_err(|_| GanError::Diverged { step })?;
        if let Some(c) = config.clip_c {
            weight_clip(&mut self.critic, c)?;
        }
        self.critic_steps_done += 1;
        Ok(CriticStepLog {
            critic_loss: loss_value,
            objective: objective_value,
            penalty: penalty_value,
            ratio,
        })
    }

    /// One generator update on a fresh latent batch; the critic is frozen.
    /// The generator loss keeps only the fake term, `−(1−π)·mean(σ(h̃))`
    /// (the real term is constant in the generator parameters).
    pub fn generator_step(&mut self, config: &GanConfig, step: usize) -> Result<f64, GanError> {
        let latents = self.sample_latent_batch(config, config.batch);
        let mut tape = Tape::new();
        let gen_nodes = self.generator.on_tape(&mut tape, true);
        let critic_nodes = self.critic.on_tape(&mut tape, false);
        let z = tape.constant(latents);
        let fake = forward_raw_on_tape(&mut tape, &gen_nodes, &config.generator_cfg, z);
        let raw = forward_raw_on_tape(&mut tape, &critic_nodes, &config.critic_cfg, fake);
        let loss = match config.objective {
            Objective::Bolt => {
                let h = tape.sigmoid(raw);
                let mean = tape.mean(h);
                tape.scalar_mul(-(1.0 - config.pi), mean)
            }
            Objective::Wgan => {
                let mean = tape.mean(raw);
                tape.scalar_mul(-1.0, mean)
            }
        };
        let loss_value = tape.value(loss).item();
        if !loss_value.is_finite() {
            return Err(GanError::Diverged { step });
        }
        let grads = tape
            .backward(loss, &gen_nodes)
            .map_err(|_| GanError::Diverged { step })?;
        adam_step(&mut self.generator, &grads, &mut self.gen_adam)
            .map_err(|_| GanError::Diverged { step })?;
        if let Some(decay) = config.ema_decay {
            let ema = self.ema.as_mut().expect("ema initialized with decay");
            ema_update(ema, &self.generator, decay)?;
        }
        Ok(loss_value)
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// The full training loop: `steps` generator updates, each preceded by
/// `n_critic` critic updates, evaluating W1 / histogram-TV / the Fréchet
/// proxy against held-out data every `log_interval` steps. Deterministic
/// per seed. Divergence stops the run and flags the history.
pub fn train(target: &Dist, config: &GanConfig) -> Result<TrainOutcome, GanError> {
    let warnings = config.validate()?;
    if target.dim() != 1 {
        return Err(GanError::UnsupportedDimension { dim: target.dim() });
    }
    if config.critic_cfg.input_dim() != 1 {
        return Err(GanError::BadConfig("critic input width must be 1 for 1-D targets".into()));
    }

    const EVAL_SAMPLES: usize = 4096;
    let held_out: Vec<f64> = {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "eval-data", 0));
        (0..EVAL_SAMPLES).map(|_| target.sample_one(&mut rng)[0]).collect()
    };
    let eval_latents: Tensor = {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "eval-latents", 0));
        let flat: Vec<f64> = (0..EVAL_SAMPLES * config.latent_dim)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        Tensor::new(vec![EVAL_SAMPLES, config.latent_dim], flat)
    };

    let mut state = TrainerState::new(config)?;
    let mut history = TrainHistory::default();

    let evaluate = |state: &TrainerState| -> Result<(f64, f64, f64), GanError> {
        let gen = generator_forward_batch(state.eval_generator(), &config.generator_cfg, &eval_latents);
        let samples: Vec<f64> = gen.data().to_vec();
        let w1 = w1_samples_1d(&samples, &held_out)?;
        let tv = tv_histogram(&samples, &held_out, 64)?;
        let fitted = samples.iter().map(|&v| vec![v]).collect::<Vec<_>>();
        let held_vecs = held_out.iter().map(|&v| vec![v]).collect::<Vec<_>>();
        let (m1, c1) = gaussian_fit_samples(&fitted)?;
        let (m2, c2) = gaussian_fit_samples(&held_vecs)?;
        let frechet = frechet_gaussian(&m1, &c1, &m2, &c2)?;
        Ok((w1, tv, frechet))
    };

    // initial evaluation before any update
    let (w1, tv, fr) = evaluate(&state)?;
    history.records.push(TrainRecord {
        step: 0,
        critic_loss: 0.0,
        l_bolt: 0.0,
        penalty: 0.0,
        ratio: 0.0,
        gn_p10: 0.0,
        gn_p50: 0.0,
        gn_p90: 0.0,
        w1,
        tv_hist: tv,
        frechet: fr,
    });

    for step in 1..=config.steps {
        let mut last_log = None;
        let mut failed = None;
        for _ in 0..config.n_critic {
            match state.critic_step(config, target, step) {
                Ok(log) => last_log = Some(log),
                Err(GanError::Diverged { step }) => {
                    failed = Some(step);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if failed.is_none() {
            if let Err(e) = state.generator_step(config, step) {
                match e {
                    GanError::Diverged { step } => failed = Some(step),
                    other => return Err(other),
                }
            }
        }
        if let Some(at) = failed {
            history.diverged = true;
            history.diverged_at = Some(at);
            break;
        }

        if step % config.log_interval == 0 || step == config.steps {
            let log = last_log.expect("n_critic ≥ 1");
            let mut norms = state.last_grad_norms.clone();
            norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let (w1, tv, fr) = evaluate(&state)?;
            history.records.push(TrainRecord {
                step,
                critic_loss: log.critic_loss,
                l_bolt: log.objective,
                penalty: log.penalty,
                ratio: log.ratio,
                gn_p10: quantile(&norms, 0.1),
                gn_p50: quantile(&norms, 0.5),
                gn_p90: quantile(&norms, 0.9),
                w1,
                tv_hist: tv,
                frechet: fr,
            });
        }
    }

    Ok(TrainOutcome {
        history,
        critic: state.critic.clone(),
        generator: state.generator.clone(),
        ema_generator: state.ema.clone(),
        warnings,
    })
}

// ---- diagnostics --------------------------------------------------------------------

/// Verdict on the penalty/critic ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioFlag {
    /// Mean ratio below 1e-2: the penalty barely binds.
    Ineffective,
    Healthy,
    /// Mean ratio above 10: the penalty dominates the objective.
    CapacityStrangling,
    /// No penalty configured or no records.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsSummary {
    pub records: usize,
    pub median_grad_norm: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub ratio_flag: RatioFlag,
    pub diverged: bool,
    pub diverged_at: Option<usize>,
    pub final_w1: Option<f64>,
}

/// Summarizes a history: distribution of interpolant gradient norms
/// (healthy runs concentrate near 1), the penalty/critic ratio with flag
/// thresholds at 1e-2 and 10, and divergence status.
pub fn diagnostics(history: &TrainHistory) -> DiagnosticsSummary {
    // step-0 records carry no critic measurements
    let measured: Vec<&TrainRecord> = history.records.iter().filter(|r| r.step > 0).collect();
    if measured.is_empty() {
        return DiagnosticsSummary {
            records: history.records.len(),
            median_grad_norm: None,
            mean_ratio: None,
            ratio_flag: RatioFlag::NotApplicable,
            diverged: history.diverged,
            diverged_at: history.diverged_at,
            final_w1: history.final_w1(),
        };
    }
    let mut medians: Vec<f64> = measured.iter().map(|r| r.gn_p50).collect();
    medians.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_grad_norm = quantile(&medians, 0.5);
    // a run that never produced a penalty term has no meaningful ratio
    let penalty_active = measured.iter().any(|r| r.penalty != 0.0);
    let (mean_ratio, ratio_flag) = if penalty_active {
        let mean = measured.iter().map(|r| r.ratio).sum::<f64>() / measured.len() as f64;
        let flag = if mean < 1e-2 {
            RatioFlag::Ineffective
        } else if mean > 10.0 {
            RatioFlag::CapacityStrangling
        } else {
            RatioFlag::Healthy
        };
        (Some(mean), flag)
    } else {
        (None, RatioFlag::NotApplicable)
    };
    DiagnosticsSummary {
        records: history.records.len(),
        median_grad_norm: Some(median_grad_norm),
        mean_ratio,
        ratio_flag,
        diverged: history.diverged,
        diverged_at: history.diverged_at,
        final_w1: history.final_w1(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Head, Layer};
    use crate::problems::GaussianMixture;

    /// Single affine layer critic with fixed weights and zero bias.
    fn linear_critic(weights: &[f64]) -> (MlpParams, MlpConfig) {
        let d = weights.len();
        let cfg = MlpConfig {
            layer_widths: vec![d, 1],
            hidden: Activation::LeakyRelu(0.2),
            head: Head::BoundedSigmoid,
        };
        let params = MlpParams {
            layers: vec![Layer {
                w: Tensor::new(vec![d, 1], weights.to_vec()),
                b: Tensor::zeros(&[1]),
            }],
        };
        (params, cfg)
    }

    fn batch(rows: &[&[f64]]) -> Tensor {
        let d = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Tensor::new(vec![rows.len(), d], flat)
    }

    #[test]
    fn l_bolt_constant_half_critic() {
        // zero critic scores 0.5 everywhere → objective is π − 0.5
        let (params, cfg) = linear_critic(&[0.0]);
        for pi in [0.2, 0.5, 0.8] {
            let mut tape = Tape::new();
            let nodes = params.on_tape(&mut tape, true);
            let real = tape.constant(batch(&[&[0.3], &[1.0]]));
            let fake = tape.constant(batch(&[&[-0.7], &[2.0]]));
            let v = l_bolt_minibatch(&mut tape, &nodes, &cfg, real, fake, pi);
            assert!((tape.value(v).item() - (pi - 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn l_bolt_identical_batches_balanced_prior_is_zero() {
        let params = init_params(&MlpConfig::critic_default(1), 3).unwrap();
        let cfg = MlpConfig::critic_default(1);
        let mut tape = Tape::new();
        let nodes = params.on_tape(&mut tape, true);
        let same = batch(&[&[0.1], &[-0.4], &[1.7]]);
        let real = tape.constant(same.clone());
        let fake = tape.constant(same);
        let v = l_bolt_minibatch(&mut tape, &nodes, &cfg, real, fake, 0.5);
        assert!(tape.value(v).item().abs() < 1e-15);
    }

    #[test]
    fn l_bolt_separated_batches_approach_pi() {
        // steep critic: σ ≈ 1 on real, ≈ 0 on fake → objective → π
        let (params, cfg) = linear_critic(&[1000.0]);
        let mut tape = Tape::new();
        let nodes = params.on_tape(&mut tape, true);
        let real = tape.constant(batch(&[&[10.0], &[12.0]]));
        let fake = tape.constant(batch(&[&[-10.0], &[-11.0]]));
        for pi in [0.3, 0.5] {
            let v = l_bolt_minibatch(&mut tape, &nodes, &cfg, real, fake, pi);
            assert!((tape.value(v).item() - pi).abs() < 1e-12);
        }
    }

    #[test]
    fn l_bolt_stays_in_bounds() {
        let cfg = MlpConfig::critic_default(1);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for seed in 0..20 {
            let params = init_params(&cfg, seed).unwrap();
            let pi: f64 = rng.gen_range(0.05..0.95);
            let rows: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.gen_range(-3.0..3.0)]).collect();
            let rows2: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.gen_range(-3.0..3.0)]).collect();
            let mut tape = Tape::new();
            let nodes = params.on_tape(&mut tape, true);
            let real = tape.constant(batch(&rows.iter().map(|r| r.as_slice()).collect::<Vec<_>>()));
            let fake = tape.constant(batch(&rows2.iter().map(|r| r.as_slice()).collect::<Vec<_>>()));
            let v = l_bolt_minibatch(&mut tape, &nodes, &cfg, real, fake, pi);
            let value = tape.value(v).item();
            assert!(value >= pi - 1.0 - 1e-12 && value <= pi + 1e-12);
        }
    }

    #[test]
    fn gp_linear_critic_constant_gradient() {
        // raw score w·x with w = (3,4): ‖∇h̃‖ = 5 at every interpolant,
        // penalty = λ(5−1)² = 160 for λ = 10
        let (params, cfg) = linear_critic(&[3.0, 4.0]);
        let mut tape = Tape::new();
        let nodes = params.on_tape(&mut tape, true);
        let real = batch(&[&[0.0, 0.0], &[1.0, 1.0]]);
        let fake = batch(&[&[2.0, -1.0], &[0.5, 0.5]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (p, norms) =
            gradient_penalty(&mut tape, &nodes, &cfg, &real, &fake, 10.0, false, &mut rng).unwrap();
        assert!((tape.value(p).item() - 160.0).abs() < 1e-9);
        assert!(norms.iter().all(|n| (n - 5.0).abs() < 1e-12));
    }

    #[test]
    fn gp_unit_gradient_critic_has_zero_penalty() {
        let (params, cfg) = linear_critic(&[1.0]);
        let mut tape = Tape::new();
        let nodes = params.on_tape(&mut tape, true);
        let real = batch(&[&[0.0], &[1.0]]);
        let fake = batch(&[&[2.0], &[3.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (p, _) =
            gradient_penalty(&mut tape, &nodes, &cfg, &real, &fake, 10.0, false, &mut rng).unwrap();
        assert!(tape.value(p).item().abs() < 1e-18);
    }

    #[test]
    fn gp_rejects_negative_lambda() {
        let (params, cfg) = linear_critic(&[1.0]);
        let mut tape = Tape::new();
        let nodes = params.on_tape(&mut tape, true);
        let real = batch(&[&[0.0]]);
        let fake = batch(&[&[1.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            gradient_penalty(&mut tape, &nodes, &cfg, &real, &fake, -1.0, false, &mut rng),
            Err(GanError::NegativeLambda { .. })
        ));
    }

    /// Penalty value for given parameters with a fixed interpolation seed.
    fn penalty_value(
        params: &MlpParams,
        cfg: &MlpConfig,
        real: &Tensor,
        fake: &Tensor,
        lambda: f64,
        one_sided: bool,
    ) -> f64 {
        let mut tape = Tape::new();
        let nodes = params.on_tape(&mut tape, true);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (p, _) =
            gradient_penalty(&mut tape, &nodes, cfg, real, fake, lambda, one_sided, &mut rng)
                .unwrap();
        tape.value(p).item()
    }

    #[test]
    fn gp_parameter_gradient_matches_finite_differences() {
        // smooth (tanh) 1→4→1 critic so central differences are valid
        let cfg = MlpConfig {
            layer_widths: vec![1, 4, 1],
            hidden: Activation::Tanh,
            head: Head::BoundedSigmoid,
        };
        let params = init_params(&cfg, 9).unwrap();
        let real = batch(&[&[0.4], &[-1.0], &[0.9]]);
        let fake = batch(&[&[1.3], &[0.2], &[-0.5]]);
        let lambda = 10.0;

        let mut tape = Tape::new();
        let nodes = params.on_tape(&mut tape, true);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (p, _) =
            gradient_penalty(&mut tape, &nodes, &cfg, &real, &fake, lambda, false, &mut rng)
                .unwrap();
        let grads = tape.backward(p, &nodes).unwrap();

        let h = 1e-5;
        for (ti, tensor) in params.tensors().iter().enumerate() {
            for k in 0..tensor.len() {
                let mut plus = params.clone();
                let mut minus = params.clone();
                bump(&mut plus, ti, k, h);
                bump(&mut minus, ti, k, -h);
                let fd = (penalty_value(&plus, &cfg, &real, &fake, lambda, false)
                    - penalty_value(&minus, &cfg, &real, &fake, lambda, false))
                    / (2.0 * h);
                let got = grads[ti].data()[k];
                let denom = fd.abs().max(1e-4);
                assert!(
                    (got - fd).abs() / denom < 1e-4,
                    "tensor {ti} entry {k}: analytic {got} vs fd {fd}"
                );
            }
        }
    }

    fn bump(params: &mut MlpParams, tensor_index: usize, entry: usize, delta: f64) {
        let tensors = params.tensors();
        let mut data: Vec<Vec<f64>> = tensors.iter().map(|t| t.data().to_vec()).collect();
        let shapes: Vec<Vec<usize>> = tensors.iter().map(|t| t.shape().to_vec()).collect();
        data[tensor_index][entry] += delta;
        let rebuilt: Vec<Tensor> = data
            .into_iter()
            .zip(shapes)
            .map(|(d, s)| Tensor::new(s, d))
            .collect();
        params.assign(&rebuilt).unwrap();
    }

    #[test]
    fn one_sided_penalty_examples() {
        // ‖∇‖ = 0.5 → one-sided 0, two-sided λ(0.5−1)²
        let (p_half, cfg) = linear_critic(&[0.3, 0.4]);
        let real = batch(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let fake = batch(&[&[0.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(penalty_value(&p_half, &cfg, &real, &fake, 10.0, true), 0.0);
        assert!(
            (penalty_value(&p_half, &cfg, &real, &fake, 10.0, false) - 10.0 * 0.25).abs() < 1e-12
        );

        // ‖∇‖ = 5 → both sides agree at λ(5−1)² = 160
        let (p_five, cfg5) = linear_critic(&[3.0, 4.0]);
        assert!((penalty_value(&p_five, &cfg5, &real, &fake, 10.0, true) - 160.0).abs() < 1e-9);

        // one-sided never exceeds two-sided
        for seed in 0..10 {
            let cfg = MlpConfig::critic_default(2);
            let params = init_params(&cfg, seed).unwrap();
            let one = penalty_value(&params, &cfg, &real, &fake, 10.0, true);
            let two = penalty_value(&params, &cfg, &real, &fake, 10.0, false);
            assert!(one <= two + 1e-15, "seed {seed}: one-sided {one} > two-sided {two}");
        }
    }

    #[test]
    fn zero_centered_penalty_examples() {
        // constant critic (zero weights): zero gradient, zero penalty
        let (pz, cfg) = linear_critic(&[0.0, 0.0]);
        let data = batch(&[&[0.2, -1.0], &[1.5, 0.5]]);
        let mut tape = Tape::new();
        let nodes = pz.on_tape(&mut tape, true);
        let (p, _) = zero_centered_penalty(&mut tape, &nodes, &cfg, &data, 1.0).unwrap();
        assert_eq!(tape.value(p).item(), 0.0);

        // linear w = (3,4), λ = 1 → ‖∇‖² = 25
        let (plin, cfg2) = linear_critic(&[3.0, 4.0]);
        let mut tape = Tape::new();
        let nodes = plin.on_tape(&mut tape, true);
        let (p, _) = zero_centered_penalty(&mut tape, &nodes, &cfg2, &data, 1.0).unwrap();
        assert!((tape.value(p).item() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn zero_centered_gradient_matches_finite_differences() {
        let cfg = MlpConfig {
            layer_widths: vec![1, 4, 1],
            hidden: Activation::Tanh,
            head: Head::BoundedSigmoid,
        };
        let params = init_params(&cfg, 13).unwrap();
        let data = batch(&[&[0.3], &[-0.8]]);
        let value = |p: &MlpParams| {
            let mut tape = Tape::new();
            let nodes = p.on_tape(&mut tape, true);
            let (pen, _) = zero_centered_penalty(&mut tape, &nodes, &cfg, &data, 2.5).unwrap();
            tape.value(pen).item()
        };
        let mut tape = Tape::new();
        let nodes = params.on_tape(&mut tape, true);
        let (pen, _) = zero_centered_penalty(&mut tape, &nodes, &cfg, &data, 2.5).unwrap();
        let grads = tape.backward(pen, &nodes).unwrap();
        let h = 1e-5;
        for (ti, tensor) in params.tensors().iter().enumerate() {
            for k in 0..tensor.len() {
                let mut plus = params.clone();
                let mut minus = params.clone();
                bump(&mut plus, ti, k, h);
                bump(&mut minus, ti, k, -h);
                let fd = (value(&plus) - value(&minus)) / (2.0 * h);
                let got = grads[ti].data()[k];
                assert!(
                    (got - fd).abs() / fd.abs().max(1e-4) < 1e-4,
                    "tensor {ti} entry {k}: analytic {got} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn penalty_targets_raw_head_not_sigmoid() {
        // replacing h̃ by σ(h̃) inside the penalty must change its value
        let cfg = MlpConfig::critic_default(1);
        let params = init_params(&cfg, 21).unwrap();
        let real = batch(&[&[0.5], &[-0.2]]);
        let fake = batch(&[&[1.1], &[0.3]]);
        let raw_penalty = penalty_value(&params, &cfg, &real, &fake, 10.0, false);

        // same construction but differentiating the bounded score
        let mut tape = Tape::new();
        let nodes = params.on_tape(&mut tape, true);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let one = tape.constant(Tensor::scalar(1.0));
        let mut acc: Option<NodeId> = None;
        for j in 0..2 {
            let alpha: f64 = rng.gen();
            let row: Vec<f64> = (0..1)
                .map(|k| alpha * real.data()[j + k] + (1.0 - alpha) * fake.data()[j + k])
                .collect();
            let x = tape.leaf(Tensor::new(vec![1, 1], row));
            let raw = forward_raw_on_tape(&mut tape, &nodes, &cfg, x);
            let bounded = tape.sigmoid(raw);
            let score = tape.mean(bounded);
            let grad = tape.backward_graph(score, &[x]).unwrap()[0];
            let norm = tape.euclidean_norm(grad);
            let gap = tape.sub(norm, one);
            let sq = tape.square(gap);
            acc = Some(match acc {
                Some(a) => tape.add(a, sq),
                None => sq,
            });
        }
        let total = acc.unwrap();
        let scaled = tape.scalar_mul(10.0 / 2.0, total);
        let sigmoid_penalty = tape.value(scaled).item();
        assert!(
            (raw_penalty - sigmoid_penalty).abs() > 1e-6,
            "raw {raw_penalty} vs sigmoid-shrunk {sigmoid_penalty}"
        );
    }

    #[test]
    fn wgan_objective_examples() {
        let (params, cfg) = linear_critic(&[1.0]);
        let mut tape = Tape::new();
        let nodes = params.on_tape(&mut tape, true);
        let same = batch(&[&[0.5], &[1.5]]);
        let r = tape.constant(same.clone());
        let f = tape.constant(same);
        let v = wgan_objective(&mut tape, &nodes, &cfg, r, f);
        assert_eq!(tape.value(v).item(), 0.0);

        // identity critic in 1-D: value = mean(real) − mean(fake)
        let r2 = tape.constant(batch(&[&[0.0], &[2.0]]));
        let f2 = tape.constant(batch(&[&[0.0], &[0.0]]));
        let v2 = wgan_objective(&mut tape, &nodes, &cfg, r2, f2);
        assert!((tape.value(v2).item() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wgan_batch_estimate_is_unbiased() {
        // fixed nonlinear critic, exact expectations under two mixtures
        let cfg = MlpConfig::critic_default(1);
        let params = init_params(&cfg, 31).unwrap();
        let p = GaussianMixture::normal_1d(0.5, 1.0).unwrap();
        let q = GaussianMixture::normal_1d(-0.5, 0.8).unwrap();

        let raw = |x: f64| crate::nn::critic_forward(&params, &cfg, &[x]).0;
        let exact_p = crate::problems::adaptive_simpson(
            &|x: f64| raw(x) * p.density(&[x]),
            -12.5,
            12.5,
            1e-10,
        );
        let exact_q = crate::problems::adaptive_simpson(
            &|x: f64| raw(x) * q.density(&[x]),
            -12.0,
            12.0,
            1e-10,
        );
        let exact = exact_p - exact_q;

        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let batches = 10_000;
        let bsize = 8;
        let mut total = 0.0;
        for _ in 0..batches {
            let mut est = 0.0;
            for _ in 0..bsize {
                est += raw(p.sample_one(&mut rng)[0]) / bsize as f64;
                est -= raw(q.sample_one(&mut rng)[0]) / bsize as f64;
            }
            total += est;
        }
        let mc = total / batches as f64;
        assert!(
            (mc - exact).abs() < 0.01,
            "Monte Carlo {mc} vs exact {exact}"
        );
    }

    #[test]
    fn generator_gets_zero_gradient_from_constant_critic() {
        let mut config = GanConfig::default_1d(1, 5);
        // zero out the critic's first layer: output is constant in x
        let mut state = TrainerState::new(&config).unwrap();
        state.critic.layers[0].w = Tensor::zeros(state.critic.layers[0].w.shape());
        state.critic.layers[0].b = Tensor::zeros(state.critic.layers[0].b.shape());
        let before = state.generator.clone();
        config.ema_decay = None;
        state.generator_step(&config, 1).unwrap();
        assert_eq!(state.generator, before);
    }

    #[test]
    fn generator_gradient_flows_only_through_fake_term() {
        // ∇_φ of the full objective equals ∇_φ of −(1−π)·mean(σ(h̃(fake))):
        // the real term does not involve the generator
        let config = GanConfig::default_1d(1, 15);
        let critic = init_params(&config.critic_cfg, 1).unwrap();
        let generator = init_params(&config.generator_cfg, 2).unwrap();
        let latents = Tensor::new(vec![4, 2], vec![0.3, -0.5, 1.1, 0.2, -0.9, 0.4, 0.0, 1.5]);
        let real = batch(&[&[0.1], &[0.7], &[-0.3], &[1.9]]);
        let pi = 0.37;

        let grads_full = {
            let mut tape = Tape::new();
            let gen_nodes = generator.on_tape(&mut tape, true);
            let critic_nodes = critic.on_tape(&mut tape, false);
            let z = tape.constant(latents.clone());
            let fake = forward_raw_on_tape(&mut tape, &gen_nodes, &config.generator_cfg, z);
            let real_node = tape.constant(real.clone());
            let obj = l_bolt_minibatch(
                &mut tape,
                &critic_nodes,
                &config.critic_cfg,
                real_node,
                fake,
                pi,
            );
            tape.backward(obj, &gen_nodes).unwrap()
        };
        let grads_fake_only = {
            let mut tape = Tape::new();
            let gen_nodes = generator.on_tape(&mut tape, true);
            let critic_nodes = critic.on_tape(&mut tape, false);
            let z = tape.constant(latents);
            let fake = forward_raw_on_tape(&mut tape, &gen_nodes, &config.generator_cfg, z);
            let raw = forward_raw_on_tape(&mut tape, &critic_nodes, &config.critic_cfg, fake);
            let h = tape.sigmoid(raw);
            let mean = tape.mean(h);
            let obj = tape.scalar_mul(-(1.0 - pi), mean);
            tape.backward(obj, &gen_nodes).unwrap()
        };
        for (a, b) in grads_full.iter().zip(&grads_fake_only) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 1e-15, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn generator_step_gradient_matches_finite_differences() {
        let mut config = GanConfig::default_1d(1, 23);
        config.generator_cfg = MlpConfig {
            layer_widths: vec![2, 4, 1],
            hidden: Activation::Tanh,
            head: Head::Raw,
        };
        config.critic_cfg = MlpConfig {
            layer_widths: vec![1, 4, 1],
            hidden: Activation::Tanh,
            head: Head::BoundedSigmoid,
        };
        let critic = init_params(&config.critic_cfg, 3).unwrap();
        let generator = init_params(&config.generator_cfg, 4).unwrap();
        let latents = Tensor::new(vec![3, 2], vec![0.2, -0.4, 0.9, 0.1, -0.6, 0.8]);
        let pi = 0.5;

        let loss_of = |gen: &MlpParams| {
            let mut tape = Tape::new();
            let gen_nodes = gen.on_tape(&mut tape, true);
            let critic_nodes = critic.on_tape(&mut tape, false);
            let z = tape.constant(latents.clone());
            let fake = forward_raw_on_tape(&mut tape, &gen_nodes, &config.generator_cfg, z);
            let raw = forward_raw_on_tape(&mut tape, &critic_nodes, &config.critic_cfg, fake);
            let h = tape.sigmoid(raw);
            let mean = tape.mean(h);
            let loss = tape.scalar_mul(-(1.0 - pi), mean);
            (tape, gen_nodes, loss)
        };
        let (mut tape, gen_nodes, loss) = loss_of(&generator);
        let grads = tape.backward(loss, &gen_nodes).unwrap();
        let h = 1e-5;
        for (ti, tensor) in generator.tensors().iter().enumerate() {
            for k in 0..tensor.len() {
                let mut plus = generator.clone();
                let mut minus = generator.clone();
                bump(&mut plus, ti, k, h);
                bump(&mut minus, ti, k, -h);
                let (tp, _, lp) = loss_of(&plus);
                let (tm, _, lm) = loss_of(&minus);
                let fd = (tp.value(lp).item() - tm.value(lm).item()) / (2.0 * h);
                let got = grads[ti].data()[k];
                assert!(
                    (got - fd).abs() / fd.abs().max(1e-5) < 1e-4,
                    "tensor {ti} entry {k}: analytic {got} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn config_validation_and_warnings() {
        let mut c = GanConfig::default_1d(10, 0);
        assert!(c.validate().unwrap().is_empty());
        c.pi = 1.0;
        assert_eq!(c.validate().unwrap().len(), 1);
        c.pi = 0.0;
        assert!(c.validate().is_err());
        c.pi = 0.5;
        c.batch = 1;
        assert!(c.validate().is_err());
        c.batch = 64;
        c.lambda_gp = -2.0;
        assert!(matches!(c.validate(), Err(GanError::NegativeLambda { .. })));
        c.lambda_gp = 10.0;
        c.penalty = PenaltyKind::None;
        assert!(!c.validate().unwrap().is_empty()); // no Lipschitz control warning
    }

    #[test]
    fn critic_step_clips_when_configured() {
        let mut config = GanConfig::default_1d(1, 2);
        config.clip_c = Some(0.01);
        let target = Dist::Mixture(GaussianMixture::normal_1d(0.0, 1.0).unwrap());
        let mut state = TrainerState::new(&config).unwrap();
        state.critic_step(&config, &target, 1).unwrap();
        for t in state.critic.tensors() {
            assert!(t.data().iter().all(|v| v.abs() <= 0.01 + 1e-15));
        }
    }

    #[test]
    fn critic_step_flags_divergence_on_overflow() {
        let config = GanConfig::default_1d(1, 2);
        let target = Dist::Mixture(GaussianMixture::normal_1d(0.0, 1.0).unwrap());
        let mut state = TrainerState::new(&config).unwrap();
        // blow up the critic so the penalty overflows to infinity
        for layer in state.critic.layers.iter_mut() {
            layer.w = Tensor::full(layer.w.shape(), 1e200);
        }
        match state.critic_step(&config, &target, 7) {
            Err(GanError::Diverged { step }) => assert_eq!(step, 7),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn train_zero_steps_yields_initial_evaluation_only() {
        let config = GanConfig::default_1d(0, 11);
        let target = Dist::Mixture(GaussianMixture::mixture_1d(&[(-2.0, 0.25), (2.0, 0.25)]).unwrap());
        let out = train(&target, &config).unwrap();
        assert_eq!(out.history.records.len(), 1);
        assert_eq!(out.history.records[0].step, 0);
        assert!(!out.history.diverged);
        assert!(out.history.records[0].w1 > 0.0);
    }

    #[test]
    fn train_rejects_2d_targets() {
        use crate::problems::{Covariance, GaussianComponent};
        let config = GanConfig::default_1d(1, 0);
        let target = Dist::Mixture(
            GaussianMixture::new(vec![GaussianComponent {
                weight: 1.0,
                mean: vec![0.0, 0.0],
                cov: Covariance::Diagonal(vec![1.0, 1.0]),
            }])
            .unwrap(),
        );
        assert!(matches!(
            train(&target, &config),
            Err(GanError::UnsupportedDimension { dim: 2 })
        ));
    }

    #[test]
    fn train_history_is_deterministic_and_in_bounds() {
        let mut config = GanConfig::default_1d(12, 99);
        config.log_interval = 4;
        let target = Dist::Mixture(GaussianMixture::mixture_1d(&[(-2.0, 0.25), (2.0, 0.25)]).unwrap());
        let a = train(&target, &config).unwrap();
        let b = train(&target, &config).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.to_csv(), b.history.to_csv());
        assert_eq!(a.generator, b.generator);
        // logged at steps 0, 4, 8, 12
        assert_eq!(
            a.history.records.iter().map(|r| r.step).collect::<Vec<_>>(),
            vec![0, 4, 8, 12]
        );
        for r in &a.history.records {
            if r.step > 0 {
                assert!(r.l_bolt >= config.pi - 1.0 - 1e-12 && r.l_bolt <= config.pi + 1e-12);
                assert!(r.penalty >= 0.0);
            }
            for v in [r.critic_loss, r.l_bolt, r.penalty, r.ratio, r.w1, r.tv_hist, r.frechet] {
                assert!(v.is_finite());
            }
        }
        let csv = a.history.to_csv();
        assert!(csv.starts_with(TrainHistory::CSV_HEADER));
    }

    #[test]
    fn ema_generator_tracks_training_when_enabled() {
        let mut config = GanConfig::default_1d(5, 3);
        config.ema_decay = Some(0.5);
        config.log_interval = 5;
        let target = Dist::Mixture(GaussianMixture::normal_1d(0.0, 1.0).unwrap());
        let out = train(&target, &config).unwrap();
        let ema = out.ema_generator.expect("ema configured");
        assert_ne!(ema, out.generator); // lags behind the live parameters
    }

    #[test]
    fn diagnostics_summaries() {
        let empty = TrainHistory::default();
        let d = diagnostics(&empty);
        assert_eq!(d.records, 0);
        assert_eq!(d.ratio_flag, RatioFlag::NotApplicable);
        assert!(d.median_grad_norm.is_none());

        let mut config = GanConfig::default_1d(10, 17);
        config.log_interval = 2;
        let target = Dist::Mixture(GaussianMixture::mixture_1d(&[(-2.0, 0.25), (2.0, 0.25)]).unwrap());
        let out = train(&target, &config).unwrap();
        let d = diagnostics(&out.history);
        assert!(!d.diverged);
        assert!(d.median_grad_norm.is_some());
        assert!(d.final_w1.is_some());

        // λ = 0 leaves the penalty identically zero → no meaningful ratio
        let mut no_pen = GanConfig::default_1d(4, 17);
        no_pen.lambda_gp = 0.0;
        no_pen.log_interval = 2;
        let out = train(&target, &no_pen).unwrap();
        let d = diagnostics(&out.history);
        assert_eq!(d.ratio_flag, RatioFlag::NotApplicable);
        assert!(d.mean_ratio.is_none());
    }

    #[test]
    fn diagnostics_grad_norms_settle_near_one() {
        // after a few hundred steps of two-sided GP the interpolant
        // gradient norms concentrate near 1
        let mut config = GanConfig::default_1d(300, 19);
        config.log_interval = 100;
        let target = Dist::Mixture(GaussianMixture::mixture_1d(&[(-2.0, 0.25), (2.0, 0.25)]).unwrap());
        let out = train(&target, &config).unwrap();
        let d = diagnostics(&out.history);
        let med = d.median_grad_norm.unwrap();
        assert!((0.5..=1.5).contains(&med), "median grad norm {med}");
    }
}
