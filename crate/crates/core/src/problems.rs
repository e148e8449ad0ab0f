//! Synthetic binary classification problems with exact density access:
//! finite discrete distributions and Gaussian mixtures in one or two
//! dimensions, likelihood ratios, posteriors, a MAP classifier, and an
//! exact Bayes-error oracle (closed sums on discrete supports, adaptive
//! quadrature on mixtures).

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemError {
    BadPmf(String),
    DuplicateSupportPoint { index: usize },
    BadWeights(String),
    NotPositiveDefinite { component: usize },
    BadPriors { q1: f64, q2: f64 },
    MixedKinds,
    DimensionMismatch { d1: usize, d2: usize },
    UnsupportedDimension { dim: usize },
    EmptyDistribution,
}

impl fmt::Display for ProblemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemError::BadPmf(msg) => write!(f, "invalid pmf: {msg}"),
            ProblemError::DuplicateSupportPoint { index } => {
                write!(f, "duplicate support point at index {index}")
            }
            ProblemError::BadWeights(msg) => write!(f, "invalid mixture weights: {msg}"),
            ProblemError::NotPositiveDefinite { component } => {
                write!(f, "covariance of component {component} is not positive definite")
            }
            ProblemError::BadPriors { q1, q2 } => {
                write!(f, "priors must be in (0,1) and sum to 1, got ({q1}, {q2})")
            }
            ProblemError::MixedKinds => write!(f, "P1 and P2 must be the same kind"),
            ProblemError::DimensionMismatch { d1, d2 } => {
                write!(f, "dimension mismatch: {d1} vs {d2}")
            }
            ProblemError::UnsupportedDimension { dim } => {
                write!(f, "unsupported dimension {dim} (only 1 and 2)")
            }
            ProblemError::EmptyDistribution => write!(f, "distribution has no mass"),
        }
    }
}

impl std::error::Error for ProblemError {}

// ---- discrete distributions --------------------------------------------------

/// Finite distribution over distinct points in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    support: Vec<Vec<f64>>,
    pmf: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(support: Vec<Vec<f64>>, pmf: Vec<f64>) -> Result<Self, ProblemError> {
        if support.is_empty() {
            return Err(ProblemError::EmptyDistribution);
        }
        if support.len() != pmf.len() {
            return Err(ProblemError::BadPmf(format!(
                "{} support points but {} probabilities",
                support.len(),
                pmf.len()
            )));
        }
        if pmf.iter().any(|&p| !(p >= 0.0)) {
            return Err(ProblemError::BadPmf("negative or NaN entry".into()));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ProblemError::BadPmf(format!("sums to {total}, not 1")));
        }
        let d = support[0].len();
        for (i, p) in support.iter().enumerate() {
            if p.len() != d {
                return Err(ProblemError::DimensionMismatch { d1: d, d2: p.len() });
            }
            for q in support.iter().take(i) {
                if p == q {
                    return Err(ProblemError::DuplicateSupportPoint { index: i });
                }
            }
        }
        let mut cumulative = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p;
            cumulative.push(acc);
        }
        Ok(DiscreteDist { support, pmf, cumulative })
    }

    /// Point mass at `a`.
    pub fn point_mass(a: Vec<f64>) -> Self {
        DiscreteDist {
            support: vec![a],
            pmf: vec![1.0],
            cumulative: vec![1.0],
        }
    }

    /// 1-D distribution from `(point, probability)` pairs.
    pub fn from_scalar_pairs(pairs: &[(f64, f64)]) -> Result<Self, ProblemError> {
        let support = pairs.iter().map(|&(x, _)| vec![x]).collect();
        let pmf = pairs.iter().map(|&(_, p)| p).collect();
        DiscreteDist::new(support, pmf)
    }

    pub fn dim(&self) -> usize {
        self.support[0].len()
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Probability mass at `x` (0 off support).
    pub fn mass_at(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .position(|p| p.as_slice() == x)
            .map_or(0.0, |i| self.pmf[i])
    }

    pub fn sample_one(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let u: f64 = rng.gen();
        let idx = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.support.len() - 1);
        self.support[idx].clone()
    }
}

// ---- Gaussian mixtures --------------------------------------------------------

/// Diagonal covariance for any dimension; full (symmetric) form for 2-D.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    Full2([[f64; 2]; 2]),
}

impl Covariance {
    fn dim(&self) -> usize {
        match self {
            Covariance::Diagonal(v) => v.len(),
            Covariance::Full2(_) => 2,
        }
    }

    /// Lower-triangular Cholesky factor; `None` when not positive definite.
    fn cholesky(&self) -> Option<Vec<Vec<f64>>> {
        match self {
            Covariance::Diagonal(v) => {
                if v.iter().any(|&x| !(x > 0.0)) {
                    return None;
                }
                let d = v.len();
                let mut l = vec![vec![0.0; d]; d];
                for i in 0..d {
                    l[i][i] = v[i].sqrt();
                }
                Some(l)
            }
            Covariance::Full2(m) => {
                let (a, b, c) = (m[0][0], m[0][1], m[1][1]);
                if (m[1][0] - b).abs() > 1e-12 || !(a > 0.0) {
                    return None;
                }
                let l11 = a.sqrt();
                let l21 = b / l11;
                let rest = c - l21 * l21;
                if !(rest > 0.0) {
                    return None;
                }
                Some(vec![vec![l11, 0.0], vec![l21, rest.sqrt()]])
            }
        }
    }

    fn determinant(&self) -> f64 {
        match self {
            Covariance::Diagonal(v) => v.iter().product(),
            Covariance::Full2(m) => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        }
    }

    /// Quadratic form `(x-μ)ᵀ Σ⁻¹ (x-μ)`.
    fn mahalanobis_sq(&self, diff: &[f64]) -> f64 {
        match self {
            Covariance::Diagonal(v) => diff.iter().zip(v).map(|(&d, &s)| d * d / s).sum(),
            Covariance::Full2(m) => {
                let det = self.determinant();
                let (a, b, c) = (m[0][0], m[0][1], m[1][1]);
                let (x, y) = (diff[0], diff[1]);
                (c * x * x - 2.0 * b * x * y + a * y * y) / det
            }
        }
    }

    /// Largest marginal standard deviation, for quadrature brackets.
    fn max_marginal_stddev(&self) -> f64 {
        match self {
            Covariance::Diagonal(v) => v.iter().fold(0.0f64, |m, &x| m.max(x)).sqrt(),
            Covariance::Full2(m) => m[0][0].max(m[1][1]).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Covariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
    cumulative: Vec<f64>,
    chol: Vec<Vec<Vec<f64>>>,
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self, ProblemError> {
        if components.is_empty() {
            return Err(ProblemError::EmptyDistribution);
        }
        let d = components[0].mean.len();
        if components.iter().any(|c| !(c.weight >= 0.0)) {
            return Err(ProblemError::BadWeights("negative or NaN weight".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ProblemError::BadWeights(format!("sum to {total}, not 1")));
        }
        let mut chol = Vec::with_capacity(components.len());
        for (i, c) in components.iter().enumerate() {
            if c.mean.len() != d || c.cov.dim() != d {
                return Err(ProblemError::DimensionMismatch { d1: d, d2: c.mean.len() });
            }
            match c.cov.cholesky() {
                Some(l) => chol.push(l),
                None => return Err(ProblemError::NotPositiveDefinite { component: i }),
            }
        }
        let mut cumulative = Vec::with_capacity(components.len());
        let mut acc = 0.0;
        for c in &components {
            acc += c.weight;
            cumulative.push(acc);
        }
        Ok(GaussianMixture { components, cumulative, chol })
    }

    /// Single 1-D Gaussian.
    pub fn normal_1d(mean: f64, variance: f64) -> Result<Self, ProblemError> {
        GaussianMixture::new(vec![GaussianComponent {
            weight: 1.0,
            mean: vec![mean],
            cov: Covariance::Diagonal(vec![variance]),
        }])
    }

    /// Equal-weight 1-D mixture from `(mean, variance)` pairs.
    pub fn mixture_1d(parts: &[(f64, f64)]) -> Result<Self, ProblemError> {
        let w = 1.0 / parts.len() as f64;
        GaussianMixture::new(
            parts
                .iter()
                .map(|&(m, v)| GaussianComponent {
                    weight: w,
                    mean: vec![m],
                    cov: Covariance::Diagonal(vec![v]),
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        let norm_pow = (2.0 * std::f64::consts::PI).powf(d as f64 / 2.0);
        let mut total = 0.0;
        let mut diff = vec![0.0; d];
        for c in &self.components {
            if c.weight == 0.0 {
                continue;
            }
            for i in 0..d {
                diff[i] = x[i] - c.mean[i];
            }
            let m2 = c.cov.mahalanobis_sq(&diff);
            let det = c.cov.determinant();
            total += c.weight * (-0.5 * m2).exp() / (norm_pow * det.sqrt());
        }
        total
    }

    pub fn sample_one(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let u: f64 = rng.gen();
        let idx = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.components.len() - 1);
        let comp = &self.components[idx];
        let l = &self.chol[idx];
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = comp.mean.clone();
        for i in 0..d {
            for j in 0..=i {
                x[i] += l[i][j] * z[j];
            }
        }
        x
    }

    /// Per-axis bracket `[lo, hi]` covering means ± `k`·(max component σ).
    pub fn bracket(&self, k: f64) -> Vec<(f64, f64)> {
        let d = self.dim();
        let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
        for c in &self.components {
            let s = c.cov.max_marginal_stddev();
            for (slot, &mean) in out.iter_mut().zip(&c.mean) {
                slot.0 = slot.0.min(mean - k * s);
                slot.1 = slot.1.max(mean + k * s);
            }
        }
        out
    }

    /// Exact CDF along the only axis of a 1-D mixture.
    pub fn cdf_1d(&self, x: f64) -> f64 {
        assert_eq!(self.dim(), 1, "cdf_1d needs a 1-D mixture");
        self.components
            .iter()
            .map(|c| {
                let sigma = match &c.cov {
                    Covariance::Diagonal(v) => v[0].sqrt(),
                    Covariance::Full2(_) => unreachable!(),
                };
                c.weight * normal_cdf((x - c.mean[0]) / sigma)
            })
            .sum()
    }
}

/// Standard normal CDF, accurate to close to machine precision.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Error function via the regularized incomplete gamma function
/// `erf(x) = sgn(x)·P(1/2, x²)`; relative error near machine epsilon.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        -erf(-x)
    } else if x * x < 1.5 {
        gamma_p_half(x * x)
    } else {
        1.0 - gamma_q_half(x * x)
    }
}

/// Complementary error function without cancellation for large arguments.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        2.0 - erfc(-x)
    } else if x * x < 1.5 {
        1.0 - gamma_p_half(x * x)
    } else {
        gamma_q_half(x * x)
    }
}

const LN_GAMMA_HALF: f64 = 0.5723649429247001; // ln Γ(1/2) = ln √π

/// Series for the regularized lower incomplete gamma P(1/2, x), x ≲ 1.5.
fn gamma_p_half(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let a = 0.5;
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..200 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (-x + a * x.ln() - LN_GAMMA_HALF).exp()
}

/// Continued fraction (modified Lentz) for the regularized upper
/// incomplete gamma Q(1/2, x), x ≳ 1.5.
fn gamma_q_half(x: f64) -> f64 {
    let a = 0.5;
    const FPMIN: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..200 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x + a * x.ln() - LN_GAMMA_HALF).exp() * h
}

// ---- distribution wrapper ------------------------------------------------------

/// Either kind of target/class-conditional distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Dist {
    Discrete(DiscreteDist),
    Mixture(GaussianMixture),
}

impl Dist {
    pub fn dim(&self) -> usize {
        match self {
            Dist::Discrete(d) => d.dim(),
            Dist::Mixture(m) => m.dim(),
        }
    }

    /// Density w.r.t. the natural base measure (counting measure for
    /// discrete supports, Lebesgue for mixtures).
    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            Dist::Discrete(d) => d.mass_at(x),
            Dist::Mixture(m) => m.density(x),
        }
    }

    pub fn sample_one(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Dist::Discrete(d) => d.sample_one(rng),
            Dist::Mixture(m) => m.sample_one(rng),
        }
    }
}

/// `n` i.i.d. samples, deterministic in the seed.
pub fn sample(dist: &Dist, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| dist.sample_one(&mut rng)).collect()
}

// ---- binary problems -------------------------------------------------------------

/// Binary classification problem: priors plus class-conditionals of the
/// same kind and dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryProblem {
    pub q1: f64,
    pub q2: f64,
    pub p1: Dist,
    pub p2: Dist,
}

impl BinaryProblem {
    pub fn new(q1: f64, p1: Dist, p2: Dist) -> Result<Self, ProblemError> {
        let q2 = 1.0 - q1;
        if !(q1 > 0.0 && q1 < 1.0) {
            return Err(ProblemError::BadPriors { q1, q2 });
        }
        match (&p1, &p2) {
            (Dist::Discrete(_), Dist::Discrete(_)) | (Dist::Mixture(_), Dist::Mixture(_)) => {}
            _ => return Err(ProblemError::MixedKinds),
        }
        if p1.dim() != p2.dim() {
            return Err(ProblemError::DimensionMismatch { d1: p1.dim(), d2: p2.dim() });
        }
        Ok(BinaryProblem { q1, q2, p1, p2 })
    }

    pub fn dim(&self) -> usize {
        self.p1.dim()
    }

    /// Prior threshold `τ = q2/q1` for the likelihood-ratio rule.
    pub fn tau(&self) -> f64 {
        self.q2 / self.q1
    }

    /// Equal-prior pair of unit-variance Gaussians at ∓1 (the standard
    /// 1-D benchmark problem).
    pub fn standard_gaussian_pair() -> Self {
        BinaryProblem::new(
            0.5,
            Dist::Mixture(GaussianMixture::normal_1d(-1.0, 1.0).unwrap()),
            Dist::Mixture(GaussianMixture::normal_1d(1.0, 1.0).unwrap()),
        )
        .unwrap()
    }
}

/// Likelihood ratio `U(x) = p1(x)/p2(x)`, with `+∞` when only `p2` vanishes
/// and 1 on the (irrelevant, measure-zero) set where both vanish.
pub fn likelihood_ratio(problem: &BinaryProblem, x: &[f64]) -> f64 {
    let p1 = problem.p1.density(x);
    let p2 = problem.p2.density(x);
    if p2 > 0.0 {
        p1 / p2
    } else if p1 > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Posterior `η(x) = Pr{Y=1 | X=x}`; the 0/0 convention returns `q1`.
pub fn posterior(problem: &BinaryProblem, x: &[f64]) -> f64 {
    let a = problem.q1 * problem.p1.density(x);
    let b = problem.q2 * problem.p2.density(x);
    if a + b > 0.0 {
        a / (a + b)
    } else {
        problem.q1
    }
}

/// MAP decision: the class maximizing `q_λ p_λ(x)`; ties go to class 1.
pub fn map_classify(problem: &BinaryProblem, x: &[f64]) -> u8 {
    let a = problem.q1 * problem.p1.density(x);
    let b = problem.q2 * problem.p2.density(x);
    if a >= b {
        1
    } else {
        2
    }
}

/// Labeled sample `(x, λ)` with `λ ∈ {1, 2}`.
pub type Labeled = (Vec<f64>, u8);

/// `n` labeled draws: `λ ~ Bernoulli(q1)`, then `x ~ P_λ`.
pub fn sample_labeled(problem: &BinaryProblem, n: usize, seed: u64) -> Vec<Labeled> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            if rng.gen::<f64>() < problem.q1 {
                (problem.p1.sample_one(&mut rng), 1)
            } else {
                (problem.p2.sample_one(&mut rng), 2)
            }
        })
        .collect()
}

/// Exact Bayes error `ε = ∫ min(q1 p1, q2 p2)`.
///
/// Closed sum on discrete supports; adaptive quadrature (tolerance 1e-10,
/// brackets at ±12σ beyond extreme means) for 1-D mixtures; tensor-grid
/// quadrature (tolerance 1e-6) for 2-D mixtures.
pub fn bayes_error_exact(problem: &BinaryProblem) -> Result<f64, ProblemError> {
    let (q1, q2) = (problem.q1, problem.q2);
    let eps = match (&problem.p1, &problem.p2) {
        (Dist::Discrete(d1), Dist::Discrete(d2)) => {
            let mut total = 0.0;
            for (p, &m1) in d1.support().iter().zip(d1.pmf()) {
                let m2 = d2.mass_at(p);
                total += (q1 * m1).min(q2 * m2);
            }
            // points only in d2's support contribute min(0, q2 m2) = 0
            total
        }
        (Dist::Mixture(m1), Dist::Mixture(m2)) => match problem.dim() {
            1 => {
                let b1 = m1.bracket(12.0)[0];
                let b2 = m2.bracket(12.0)[0];
                let (lo, hi) = (b1.0.min(b2.0), b1.1.max(b2.1));
                let f = |x: f64| (q1 * m1.density(&[x])).min(q2 * m2.density(&[x]));
                adaptive_simpson(&f, lo, hi, 1e-10)
            }
            2 => {
                let b1 = m1.bracket(12.0);
                let b2 = m2.bracket(12.0);
                let bx = (b1[0].0.min(b2[0].0), b1[0].1.max(b2[0].1));
                let by = (b1[1].0.min(b2[1].0), b1[1].1.max(b2[1].1));
                let f = |x: f64, y: f64| {
                    (q1 * m1.density(&[x, y])).min(q2 * m2.density(&[x, y]))
                };
                tensor_grid_2d(&f, bx, by, 1e-6)
            }
            dim => return Err(ProblemError::UnsupportedDimension { dim }),
        },
        _ => return Err(ProblemError::MixedKinds),
    };
    Ok(eps.clamp(0.0, q1.min(q2)))
}

// ---- quadrature -----------------------------------------------------------------

/// Adaptive Simpson quadrature with absolute tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    // Seed the recursion on a few panels so narrow features are not missed
    // by the first midpoint probe.
    let panels = 16;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * h;
        let hi = lo + h;
        let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = simpson(fa, fm, fb, lo, hi);
        total += recurse(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 48);
    }
    total
}

/// Tensor-grid quadrature over a box: composite Gauss-Legendre panels,
/// refined until successive grids agree within `tol`.
pub fn tensor_grid_2d(
    f: &dyn Fn(f64, f64) -> f64,
    bx: (f64, f64),
    by: (f64, f64),
    tol: f64,
) -> f64 {
    // 8-point Gauss-Legendre nodes/weights on [-1, 1].
    const NODES: [f64; 8] = [
        -0.9602898564975363,
        -0.7966664774136267,
        -0.5255324099163290,
        -0.1834346424956498,
        0.1834346424956498,
        0.5255324099163290,
        0.7966664774136267,
        0.9602898564975363,
    ];
    const WEIGHTS: [f64; 8] = [
        0.1012285362903763,
        0.2223810344533745,
        0.3137066458778873,
        0.3626837833783620,
        0.3626837833783620,
        0.3137066458778873,
        0.2223810344533745,
        0.1012285362903763,
    ];
    let eval = |cells: usize| -> f64 {
        let hx = (bx.1 - bx.0) / cells as f64;
        let hy = (by.1 - by.0) / cells as f64;
        let mut total = 0.0;
        for ci in 0..cells {
            let x0 = bx.0 + ci as f64 * hx;
            for cj in 0..cells {
                let y0 = by.0 + cj as f64 * hy;
                let mut cell = 0.0;
                for (ni, &nx) in NODES.iter().enumerate() {
                    let x = x0 + 0.5 * hx * (nx + 1.0);
                    let mut row = 0.0;
                    for (nj, &ny) in NODES.iter().enumerate() {
                        let y = y0 + 0.5 * hy * (ny + 1.0);
                        row += WEIGHTS[nj] * f(x, y);
                    }
                    cell += WEIGHTS[ni] * row;
                }
                total += cell * 0.25 * hx * hy;
            }
        }
        total
    };
    let mut cells = 4;
    let mut prev = eval(cells);
    loop {
        cells *= 2;
        let cur = eval(cells);
        if (cur - prev).abs() <= tol || cells >= 128 {
            return cur;
        }
        prev = cur;
    }
}
