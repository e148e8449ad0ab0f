//! The BOLT loss and the machinery built on it: the Bayes-error upper
//! bound, the optimal bounding function `h*`, plug-in MAP classification in
//! both output conventions, the hinge plug-in Bayes-error estimator, a
//! trained scorer, and the bias/variance experiment for the estimator.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Tensor};
use crate::nn::{
    adam_step, critic_forward, forward_raw_on_tape, init_params, AdamState, MlpConfig, MlpParams,
    NnError,
};
use crate::problems::{
    adaptive_simpson, bayes_error_exact, likelihood_ratio, sample_labeled, tensor_grid_2d,
    BinaryProblem, Dist, Labeled, ProblemError,
};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub enum BoltError {
    ScoreOutOfRange { z: f64 },
    BadLabel { label: u8 },
    EmptyDataset,
    NoClass2Samples,
    NanLoss { step: usize },
    BadGrid(String),
    Problem(ProblemError),
    Nn(NnError),
}

impl fmt::Display for BoltError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoltError::ScoreOutOfRange { z } => {
                write!(f, "score {z} outside [-1, 0] beyond tolerance")
            }
            BoltError::BadLabel { label } => write!(f, "label {label} not in {{1, 2}}"),
            BoltError::EmptyDataset => write!(f, "empty dataset has no empirical risk"),
            BoltError::NoClass2Samples => write!(f, "plug-in estimate needs class-2 samples"),
            BoltError::NanLoss { step } => write!(f, "NaN loss at training step {step}"),
            BoltError::BadGrid(msg) => write!(f, "bad experiment grid: {msg}"),
            BoltError::Problem(e) => write!(f, "{e}"),
            BoltError::Nn(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for BoltError {}

impl From<ProblemError> for BoltError {
    fn from(e: ProblemError) -> Self {
        BoltError::Problem(e)
    }
}

impl From<NnError> for BoltError {
    fn from(e: NnError) -> Self {
        BoltError::Nn(e)
    }
}

/// Per-example BOLT loss `(−1)^λ z` for a score `z ∈ [-1, 0]`.
///
/// Scores outside the interval by at most 1e-9 are clamped; anything
/// further out is an error.
pub fn bolt_loss(z: f64, label: u8) -> Result<f64, BoltError> {
    const SLACK: f64 = 1e-9;
    if !(-1.0 - SLACK..=SLACK).contains(&z) {
        return Err(BoltError::ScoreOutOfRange { z });
    }
    let z = z.clamp(-1.0, 0.0);
    match label {
        1 => Ok(-z),
        2 => Ok(z),
        label => Err(BoltError::BadLabel { label }),
    }
}

/// Mean BOLT loss of a `[-1,0]`-valued scorer over a labeled dataset.
pub fn empirical_risk(
    h: impl Fn(&[f64]) -> f64,
    dataset: &[Labeled],
) -> Result<f64, BoltError> {
    if dataset.is_empty() {
        return Err(BoltError::EmptyDataset);
    }
    let mut total = 0.0;
    for (x, label) in dataset {
        total += bolt_loss(h(x), *label)?;
    }
    Ok(total / dataset.len() as f64)
}

/// Expectation of a scorer under one distribution (exact on discrete
/// supports, quadrature on mixtures).
fn expectation(h: &dyn Fn(&[f64]) -> f64, dist: &Dist) -> Result<f64, BoltError> {
    match dist {
        Dist::Discrete(d) => Ok(d
            .support()
            .iter()
            .zip(d.pmf())
            .map(|(x, &p)| p * h(x))
            .sum()),
        Dist::Mixture(m) => match m.dim() {
            1 => {
                let (lo, hi) = m.bracket(12.0)[0];
                let f = |x: f64| h(&[x]) * m.density(&[x]);
                Ok(adaptive_simpson(&f, lo, hi, 1e-10))
            }
            2 => {
                let b = m.bracket(12.0);
                let f = |x: f64, y: f64| h(&[x, y]) * m.density(&[x, y]);
                Ok(tensor_grid_2d(&f, b[0], b[1], 1e-6))
            }
            dim => Err(BoltError::Problem(ProblemError::UnsupportedDimension { dim })),
        },
    }
}

/// Bayes-error upper bound `q2 + q2·E_{P2}[h] − q1·E_{P1}[h]` for any
/// `[-1,0]`-valued scorer.
pub fn bolt_bound(
    h: impl Fn(&[f64]) -> f64,
    problem: &BinaryProblem,
) -> Result<f64, BoltError> {
    let e1 = expectation(&h, &problem.p1)?;
    let e2 = expectation(&h, &problem.p2)?;
    Ok(problem.q2 + problem.q2 * e2 - problem.q1 * e1)
}

/// Optimal bounding function: `-1` where `U(x) < τ`, `0` where `U(x) ≥ τ`.
pub fn hstar(problem: &BinaryProblem, x: &[f64]) -> f64 {
    if likelihood_ratio(problem, x) < problem.tau() {
        -1.0
    } else {
        0.0
    }
}

/// Which output range a scorer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// Scores in `[-1, 0]`; plug-in threshold at −0.5.
    NegativeUnit,
    /// Scores in `[0, 1]`; plug-in threshold at +0.5.
    Unit,
}

/// Plug-in MAP decision from a bounded score; the threshold is inclusive
/// toward class 1 in both conventions.
pub fn plugin_classifier(h_value: f64, convention: Convention) -> u8 {
    let threshold = match convention {
        Convention::NegativeUnit => -0.5,
        Convention::Unit => 0.5,
    };
    if h_value >= threshold {
        1
    } else {
        2
    }
}

/// Hinge map `t0(u) = [q2 − q1·u]_+` turning likelihood ratios into
/// Bayes-error mass.
pub fn hinge_t0(u: f64, q1: f64, q2: f64) -> f64 {
    (q2 - q1 * u).max(0.0)
}

/// Plug-in Bayes-error estimate from class-2 samples:
/// `q̂2 − mean_i [q̂2 − q̂1·Û(x_i)]_+` with empirical priors
/// `q̂1 = M1/(M1+M2)`, `q̂2 = M2/(M1+M2)` and `M2 = class2_samples.len()`.
pub fn bolt_plugin_estimate(
    u_hat: impl Fn(&[f64]) -> f64,
    class2_samples: &[Vec<f64>],
    m1: usize,
) -> Result<f64, BoltError> {
    let m2 = class2_samples.len();
    if m2 == 0 {
        return Err(BoltError::NoClass2Samples);
    }
    let total = (m1 + m2) as f64;
    let q1_hat = m1 as f64 / total;
    let q2_hat = m2 as f64 / total;
    let mean_hinge: f64 = class2_samples
        .iter()
        .map(|x| hinge_t0(u_hat(x), q1_hat, q2_hat))
        .sum::<f64>()
        / m2 as f64;
    Ok(q2_hat - mean_hinge)
}

/// A scorer trained by minimizing empirical BOLT risk, `h(x) = -σ(s_θ(x))`.
#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub params: MlpParams,
    pub config: MlpConfig,
    /// BOLT risk of the final minibatch.
    pub final_risk: f64,
}

impl TrainedClassifier {
    /// Bounded score in `[-1, 0]`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let (_, bounded) = critic_forward(&self.params, &self.config, x);
        -bounded
    }

    /// Plug-in MAP decision at the −0.5 threshold.
    pub fn classify(&self, x: &[f64]) -> u8 {
        plugin_classifier(self.score(x), Convention::NegativeUnit)
    }

    /// Misclassification rate over a labeled set.
    pub fn error_rate(&self, data: &[Labeled]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let wrong = data.iter().filter(|(x, y)| self.classify(x) != *y).count();
        wrong as f64 / data.len() as f64
    }
}

/// Minimizes empirical BOLT risk with Adam over minibatches sampled from
/// the problem. Deterministic per seed. NaN loss aborts with the step index.
pub fn train_bolt_classifier(
    problem: &BinaryProblem,
    config: &MlpConfig,
    steps: usize,
    batch: usize,
    lr: f64,
    seed: u64,
) -> Result<TrainedClassifier, BoltError> {
    assert!(batch > 0, "batch size must be positive");
    assert_eq!(config.output_dim(), 1, "classifier config needs output width 1");
    let mut params = init_params(config, derive_seed(seed, "bolt-init", 0))?;
    let mut adam = AdamState::new(&params, lr, 0.9, 0.999);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "bolt-batches", 0));
    let dim = problem.dim();
    let mut final_risk = 0.0;

    for step in 0..steps.max(1) {
        // labeled minibatch
        let mut flat = Vec::with_capacity(batch * dim);
        let mut signs = Vec::with_capacity(batch);
        for _ in 0..batch {
            let (x, label) = if rng.gen::<f64>() < problem.q1 {
                (problem.p1.sample_one(&mut rng), 1u8)
            } else {
                (problem.p2.sample_one(&mut rng), 2u8)
            };
            flat.extend_from_slice(&x);
            // ℓ = (−1)^λ·(−σ(s)): +σ(s) for class 1, −σ(s) for class 2
            signs.push(if label == 1 { 1.0 } else { -1.0 });
        }

        let mut tape = Tape::new();
        let param_nodes = params.on_tape(&mut tape, true);
        let x = tape.constant(Tensor::new(vec![batch, dim], flat));
        let raw = forward_raw_on_tape(&mut tape, &param_nodes, config, x);
        let bounded = tape.sigmoid(raw);
        let sign = tape.constant(Tensor::new(vec![batch, 1], signs));
        let contrib = tape.elem_mul(sign, bounded);
        let loss = tape.mean(contrib);
        let loss_value = tape.value(loss).item();
        if loss_value.is_nan() {
            return Err(BoltError::NanLoss { step });
        }
        final_risk = loss_value;
        if steps == 0 {
            break;
        }
        let grads = tape
            .backward(loss, &param_nodes)
            .map_err(|_| BoltError::NanLoss { step })?;
        adam_step(&mut params, &grads, &mut adam)?;
    }

    Ok(TrainedClassifier {
        params,
        config: config.clone(),
        final_risk,
    })
}

/// How the likelihood-ratio estimate `Û` is formed for the bias/variance
/// experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UhatMode {
    /// Oracle mode: `Û = U` exactly.
    Exact,
    /// Worst-case bounded perturbation `Û = max(U − ε₀, 0)`.
    PerturbedDown(f64),
    /// Worst-case bounded perturbation `Û = U + ε₀`.
    PerturbedUp(f64),
}

impl UhatMode {
    fn apply(self, u: f64) -> f64 {
        match self {
            UhatMode::Exact => u,
            UhatMode::PerturbedDown(e0) => (u - e0).max(0.0),
            UhatMode::PerturbedUp(e0) => u + e0,
        }
    }
}

/// One sample-size row of the bias/variance experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasVarianceRow {
    pub m: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    pub variance: f64,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasVarianceReport {
    pub rows: Vec<BiasVarianceRow>,
    /// Least-squares slope of log variance against log M.
    pub variance_slope: f64,
    pub oracle_bayes_error: f64,
}

impl BiasVarianceReport {
    /// CSV with the fixed header `M,mean,bias,variance,repeats`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("M,mean,bias,variance,repeats\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{}\n",
                r.m, r.mean_estimate, r.bias, r.variance, r.repeats
            ));
        }
        out
    }
}

/// Repeated plug-in estimation across a grid of sample counts, against the
/// exact Bayes-error oracle. Repeats use derived seeds and are summed in a
/// fixed order, so the result is reproducible.
pub fn bias_variance_experiment(
    problem: &BinaryProblem,
    mode: UhatMode,
    m_grid: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<BiasVarianceReport, BoltError> {
    if m_grid.is_empty() {
        return Err(BoltError::BadGrid("empty M grid".into()));
    }
    if repeats < 2 {
        return Err(BoltError::BadGrid("need at least 2 repeats".into()));
    }
    let oracle = bayes_error_exact(problem)?;
    let mut rows = Vec::with_capacity(m_grid.len());
    for (gi, &m) in m_grid.iter().enumerate() {
        if m == 0 {
            return Err(BoltError::BadGrid("M must be positive".into()));
        }
        let mut estimates = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let rep_seed = derive_seed(seed, "bias-variance", (gi * repeats + r) as u64);
            estimates.push(plugin_estimate_once(problem, mode, m, rep_seed)?);
        }
        let mean = estimates.iter().sum::<f64>() / repeats as f64;
        let variance = estimates
            .iter()
            .map(|e| (e - mean) * (e - mean))
            .sum::<f64>()
            / (repeats - 1) as f64;
        rows.push(BiasVarianceRow {
            m,
            mean_estimate: mean,
            bias: mean - oracle,
            variance,
            repeats,
        });
    }

    let variance_slope = log_log_slope(
        &rows.iter().map(|r| r.m as f64).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.variance.max(1e-300)).collect::<Vec<_>>(),
    );
    Ok(BiasVarianceReport {
        rows,
        variance_slope,
        oracle_bayes_error: oracle,
    })
}

fn plugin_estimate_once(
    problem: &BinaryProblem,
    mode: UhatMode,
    m: usize,
    seed: u64,
) -> Result<f64, BoltError> {
    // Redraw (deterministically) in the unlikely event a tiny sample has no
    // class-2 points: the estimator is undefined without them.
    for attempt in 0..64 {
        let data = sample_labeled(problem, m, derive_seed(seed, "plugin-draw", attempt));
        let m1 = data.iter().filter(|(_, y)| *y == 1).count();
        let class2: Vec<Vec<f64>> = data
            .into_iter()
            .filter(|(_, y)| *y == 2)
            .map(|(x, _)| x)
            .collect();
        if class2.is_empty() {
            continue;
        }
        let u_hat = |x: &[f64]| mode.apply(likelihood_ratio(problem, x));
        return bolt_plugin_estimate(u_hat, &class2, m1);
    }
    Err(BoltError::NoClass2Samples)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{DiscreteDist, GaussianMixture};

    fn discrete_problem(q1: f64, p: &[(f64, f64)], q: &[(f64, f64)]) -> BinaryProblem {
        BinaryProblem::new(
            q1,
            Dist::Discrete(DiscreteDist::from_scalar_pairs(p).unwrap()),
            Dist::Discrete(DiscreteDist::from_scalar_pairs(q).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn loss_examples() {
        assert_eq!(bolt_loss(-0.3, 1).unwrap(), 0.3);
        assert_eq!(bolt_loss(-0.3, 2).unwrap(), -0.3);
        assert_eq!(bolt_loss(0.0, 1).unwrap(), 0.0);
        assert_eq!(bolt_loss(0.0, 2).unwrap(), 0.0);
        // clamped within tolerance, rejected beyond
        assert_eq!(bolt_loss(5e-10, 1).unwrap(), 0.0);
        assert!(bolt_loss(1e-6, 1).is_err());
        assert!(bolt_loss(-1.1, 1).is_err());
        assert!(bolt_loss(-0.5, 3).is_err());
    }

    #[test]
    fn empirical_risk_examples() {
        assert_eq!(empirical_risk(|_| 0.0, &[]).unwrap_err(), BoltError::EmptyDataset);
        let data: Vec<Labeled> = vec![
            (vec![0.0], 1),
            (vec![1.0], 2),
            (vec![2.0], 1),
            (vec![3.0], 2),
        ];
        assert_eq!(empirical_risk(|_| 0.0, &data).unwrap(), 0.0);
        // h ≡ −1 on half class-1 / half class-2 labels → 0.5·1 + 0.5·(−1) = 0
        assert_eq!(empirical_risk(|_| -1.0, &data).unwrap(), 0.0);
    }

    #[test]
    fn bound_constant_scorers() {
        let p = discrete_problem(0.3, &[(0.0, 1.0)], &[(1.0, 1.0)]);
        assert!((bolt_bound(|_| 0.0, &p).unwrap() - p.q2).abs() < 1e-15);
        assert!((bolt_bound(|_| -1.0, &p).unwrap() - p.q1).abs() < 1e-15);
    }

    #[test]
    fn bound_at_hstar_is_bayes_error() {
        let p = discrete_problem(
            0.35,
            &[(0.0, 0.5), (1.0, 0.3), (2.0, 0.2)],
            &[(0.0, 0.1), (1.0, 0.6), (3.0, 0.3)],
        );
        let eps = bayes_error_exact(&p).unwrap();
        let bound = bolt_bound(|x| hstar(&p, x), &p).unwrap();
        assert!((bound - eps).abs() <= 1e-12, "bound {bound} vs ε {eps}");
    }

    #[test]
    fn hstar_threshold_branches() {
        // equal priors → τ = 1
        let p = BinaryProblem::standard_gaussian_pair();
        assert_eq!(p.tau(), 1.0);
        // U(x) = exp(−2x): U < 1 for x > 0, U > 1 for x < 0
        assert_eq!(hstar(&p, &[1.0]), -1.0);
        assert_eq!(hstar(&p, &[-1.0]), 0.0);
        assert_eq!(hstar(&p, &[0.0]), 0.0); // U = τ sits on the 0 branch
    }

    #[test]
    fn plugin_classifier_conventions() {
        assert_eq!(plugin_classifier(-0.2, Convention::NegativeUnit), 1);
        assert_eq!(plugin_classifier(-0.8, Convention::NegativeUnit), 2);
        assert_eq!(plugin_classifier(-0.5, Convention::NegativeUnit), 1);
        assert_eq!(plugin_classifier(0.5, Convention::Unit), 1);
        assert_eq!(plugin_classifier(0.2, Convention::Unit), 2);
        assert_eq!(plugin_classifier(0.9, Convention::Unit), 1);
    }

    #[test]
    fn hinge_examples() {
        assert!((hinge_t0(0.6, 0.5, 0.5) - 0.2).abs() < 1e-15);
        assert_eq!(hinge_t0(2.0, 0.5, 0.5), 0.0);
        assert_eq!(hinge_t0(0.0, 0.3, 0.7), 0.7);
        assert_eq!(hinge_t0(f64::INFINITY, 0.5, 0.5), 0.0);
    }

    #[test]
    fn hinge_is_q1_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100_000 {
            let q1: f64 = rng.gen_range(0.01..0.99);
            let q2 = 1.0 - q1;
            let u: f64 = rng.gen_range(0.0..5.0);
            let v: f64 = rng.gen_range(0.0..5.0);
            // exact up to one rounding of each side
            let lhs = (hinge_t0(u, q1, q2) - hinge_t0(v, q1, q2)).abs();
            let rhs = q1 * (u - v).abs();
            assert!(lhs <= rhs + 1e-15, "t0 gap {lhs} vs q1·|u−v| {rhs}");
        }
    }

    #[test]
    fn conditional_risk_argmin_is_endpoint() {
        // (1−2η)z over z ∈ {−1, 0}: minimized at 0 when η > ½, at −1 when η < ½.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let eta: f64 = rng.gen();
            let risk = |z: f64| (1.0 - 2.0 * eta) * z;
            let argmin = if risk(0.0) <= risk(-1.0) { 0.0 } else { -1.0 };
            if eta > 0.5 {
                assert_eq!(argmin, 0.0);
            } else if eta < 0.5 {
                assert_eq!(argmin, -1.0);
            }
        }
    }

    #[test]
    fn plugin_estimate_edge_cases() {
        // Û ≡ 0: hinge is q̂2 everywhere → estimate 0
        let samples: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let est = bolt_plugin_estimate(|_| 0.0, &samples, 50).unwrap();
        assert!(est.abs() < 1e-15);

        // exact Û on disjoint point masses, balanced: estimate 0 = ε
        let p = discrete_problem(0.5, &[(0.0, 1.0)], &[(1.0, 1.0)]);
        let class2 = vec![vec![1.0]; 64];
        let est = bolt_plugin_estimate(|x| likelihood_ratio(&p, x), &class2, 64).unwrap();
        assert_eq!(est, 0.0);

        assert_eq!(
            bolt_plugin_estimate(|_| 1.0, &[], 10).unwrap_err(),
            BoltError::NoClass2Samples
        );
    }

    #[test]
    fn plugin_estimate_gaussian_pair_near_oracle() {
        let p = BinaryProblem::standard_gaussian_pair();
        let data = sample_labeled(&p, 100_000, 12);
        let m1 = data.iter().filter(|(_, y)| *y == 1).count();
        let class2: Vec<Vec<f64>> = data
            .into_iter()
            .filter(|(_, y)| *y == 2)
            .map(|(x, _)| x)
            .collect();
        let est = bolt_plugin_estimate(|x| likelihood_ratio(&p, x), &class2, m1).unwrap();
        let oracle = bayes_error_exact(&p).unwrap();
        assert!((est - oracle).abs() < 0.01, "estimate {est} vs {oracle}");
    }

    #[test]
    fn training_is_deterministic() {
        let p = BinaryProblem::standard_gaussian_pair();
        let cfg = MlpConfig::critic_default(1);
        let a = train_bolt_classifier(&p, &cfg, 20, 16, 1e-3, 5).unwrap();
        let b = train_bolt_classifier(&p, &cfg, 20, 16, 1e-3, 5).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.final_risk, b.final_risk);
    }

    #[test]
    fn training_solves_separable_problem() {
        // far-apart narrow Gaussians: ε_Bayes ≈ 0
        let p = BinaryProblem::new(
            0.5,
            Dist::Mixture(GaussianMixture::normal_1d(-3.0, 0.01).unwrap()),
            Dist::Mixture(GaussianMixture::normal_1d(3.0, 0.01).unwrap()),
        )
        .unwrap();
        let cfg = MlpConfig::critic_default(1);
        let clf = train_bolt_classifier(&p, &cfg, 2000, 64, 1e-3, 7).unwrap();
        let test = sample_labeled(&p, 20_000, 1234);
        let err = clf.error_rate(&test);
        assert!(err <= 0.01, "test error {err}");
    }

    #[test]
    fn training_on_identical_conditionals_matches_prior_guessing() {
        let p = BinaryProblem::new(
            0.6,
            Dist::Mixture(GaussianMixture::normal_1d(0.0, 1.0).unwrap()),
            Dist::Mixture(GaussianMixture::normal_1d(0.0, 1.0).unwrap()),
        )
        .unwrap();
        let cfg = MlpConfig::critic_default(1);
        let clf = train_bolt_classifier(&p, &cfg, 1500, 64, 1e-3, 11).unwrap();
        let test = sample_labeled(&p, 50_000, 77);
        let err = clf.error_rate(&test);
        let oracle = p.q1.min(p.q2);
        assert!((err - oracle).abs() <= 0.02, "error {err} vs min prior {oracle}");
    }

    #[test]
    fn bias_variance_oracle_mode_slopes_and_bias() {
        let p = BinaryProblem::standard_gaussian_pair();
        let report = bias_variance_experiment(
            &p,
            UhatMode::Exact,
            &[100, 1000, 10_000],
            60,
            33,
        )
        .unwrap();
        // variance decays like 1/M
        assert!(
            (report.variance_slope + 1.0).abs() < 0.3,
            "slope {}",
            report.variance_slope
        );
        // bias shrinks with M
        let first = report.rows.first().unwrap().bias.abs();
        let last = report.rows.last().unwrap().bias.abs();
        assert!(last <= first + 5e-3, "bias did not shrink: {first} → {last}");
        let csv = report.to_csv();
        assert!(csv.starts_with("M,mean,bias,variance,repeats\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn bias_variance_perturbed_mode_obeys_bias_bound() {
        let p = BinaryProblem::standard_gaussian_pair();
        let e0 = 0.1;
        for mode in [UhatMode::PerturbedDown(e0), UhatMode::PerturbedUp(e0)] {
            let report =
                bias_variance_experiment(&p, mode, &[100, 1000, 10_000], 50, 44).unwrap();
            for row in &report.rows {
                let bound = p.q1 * e0 + 3.0 / (row.m as f64).sqrt();
                assert!(
                    row.bias.abs() <= bound,
                    "{mode:?} M={} bias {} over bound {bound}",
                    row.m,
                    row.bias
                );
            }
        }
    }

    #[test]
    fn bias_variance_rejects_bad_grids() {
        let p = BinaryProblem::standard_gaussian_pair();
        assert!(bias_variance_experiment(&p, UhatMode::Exact, &[], 10, 0).is_err());
        assert!(bias_variance_experiment(&p, UhatMode::Exact, &[100], 1, 0).is_err());
        assert!(bias_variance_experiment(&p, UhatMode::Exact, &[0], 10, 0).is_err());
    }
}
