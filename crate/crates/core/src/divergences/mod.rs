//! Exact divergence oracles: total variation, Wasserstein-1 (both the 1-D
//! CDF route and the coupling LP), the prior-weighted gaps `D^{(π)}`,
//! `D^{(π)}_Lip`, `Σ_Lip` over bounded / bounded-Lipschitz critic classes,
//! the learning objective they maximize, and a Fréchet-Gaussian proxy
//! metric. The bounded-Lipschitz quantities are computed as linear programs
//! on finite supports.

mod lp;

pub use lp::{lp_solve, Cmp, LpError, LpProblem, LpSolution};

use std::fmt;

use crate::problems::{adaptive_simpson, DiscreteDist, Dist, GaussianMixture};

#[derive(Debug, Clone, PartialEq)]
pub enum DivError {
    Lp(LpError),
    SupportNotInSpace { which: &'static str, index: usize },
    BadSpace(String),
    BadPi { pi: f64 },
    UnsupportedDimension { dim: usize },
    BadGaussian(String),
    EmptySample,
}

impl fmt::Display for DivError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DivError::Lp(e) => write!(f, "{e}"),
            DivError::SupportNotInSpace { which, index } => {
                write!(f, "support point {index} of {which} is not a point of the metric space")
            }
            DivError::BadSpace(msg) => write!(f, "invalid metric space: {msg}"),
            DivError::BadPi { pi } => write!(f, "prior {pi} outside (0, 1)"),
            DivError::UnsupportedDimension { dim } => {
                write!(f, "unsupported dimension {dim} for this oracle")
            }
            DivError::BadGaussian(msg) => write!(f, "invalid Gaussian moments: {msg}"),
            DivError::EmptySample => write!(f, "empty sample"),
        }
    }
}

impl std::error::Error for DivError {}

impl From<LpError> for DivError {
    fn from(e: LpError) -> Self {
        DivError::Lp(e)
    }
}

// ---- finite metric spaces ---------------------------------------------------

/// Finitely many points with a pairwise distance matrix (Euclidean unless
/// supplied explicitly).
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    points: Vec<Vec<f64>>,
    dist: Vec<Vec<f64>>,
}

impl FiniteMetricSpace {
    /// Euclidean space over distinct points.
    pub fn euclidean(points: Vec<Vec<f64>>) -> Result<Self, DivError> {
        let n = points.len();
        if n == 0 {
            return Err(DivError::BadSpace("no points".into()));
        }
        let mut dist = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let d = euclidean(&points[i], &points[j]);
                if d == 0.0 {
                    return Err(DivError::BadSpace(format!("points {i} and {j} coincide")));
                }
                dist[i][j] = d;
                dist[j][i] = d;
            }
        }
        Ok(FiniteMetricSpace { points, dist })
    }

    /// Space with an explicit distance matrix; checks symmetry, the zero
    /// diagonal, and the triangle inequality to 1e-12.
    pub fn with_distances(points: Vec<Vec<f64>>, dist: Vec<Vec<f64>>) -> Result<Self, DivError> {
        let n = points.len();
        if dist.len() != n || dist.iter().any(|r| r.len() != n) {
            return Err(DivError::BadSpace("distance matrix shape".into()));
        }
        for (i, row) in dist.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(DivError::BadSpace(format!("nonzero diagonal at {i}")));
            }
            for (j, &d) in row.iter().enumerate() {
                if (d - dist[j][i]).abs() > 1e-12 {
                    return Err(DivError::BadSpace(format!("asymmetry at ({i}, {j})")));
                }
                if i != j && !(d > 0.0) {
                    return Err(DivError::BadSpace(format!("non-positive distance at ({i}, {j})")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if dist[i][j] > dist[i][k] + dist[k][j] + 1e-12 {
                        return Err(DivError::BadSpace(format!(
                            "triangle inequality fails for ({i}, {j}, {k})"
                        )));
                    }
                }
            }
        }
        Ok(FiniteMetricSpace { points, dist })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist[i][j]
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for row in &self.dist {
            for &v in row {
                d = d.max(v);
            }
        }
        d
    }

    fn index_of(&self, p: &[f64]) -> Option<usize> {
        self.points.iter().position(|q| q.as_slice() == p)
    }

    /// pmf aligned to this space's point order; errors if some support
    /// point is missing from the space.
    pub fn align(&self, dist: &DiscreteDist, which: &'static str) -> Result<Vec<f64>, DivError> {
        let mut out = vec![0.0; self.len()];
        for (k, (pt, &mass)) in dist.support().iter().zip(dist.pmf()).enumerate() {
            match self.index_of(pt) {
                Some(i) => out[i] += mass,
                None => return Err(DivError::SupportNotInSpace { which, index: k }),
            }
        }
        Ok(out)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Union of two discrete supports with zero-padded masses, in a
/// deterministic order (first distribution's order, then new points).
pub fn union_support(p: &DiscreteDist, q: &DiscreteDist) -> Vec<(Vec<f64>, f64, f64)> {
    let mut out: Vec<(Vec<f64>, f64, f64)> = p
        .support()
        .iter()
        .zip(p.pmf())
        .map(|(pt, &m)| (pt.clone(), m, 0.0))
        .collect();
    for (pt, &m) in q.support().iter().zip(q.pmf()) {
        match out.iter_mut().find(|(o, _, _)| o == pt) {
            Some(entry) => entry.2 += m,
            None => out.push((pt.clone(), 0.0, m)),
        }
    }
    out
}

// ---- total variation ----------------------------------------------------------

/// `TV(P, Q) = ½ Σ |p_i − q_i|` over the unioned support.
pub fn tv_discrete(p: &DiscreteDist, q: &DiscreteDist) -> f64 {
    0.5 * union_support(p, q)
        .iter()
        .map(|(_, a, b)| (a - b).abs())
        .sum::<f64>()
}

/// `TV` between 1-D mixtures by adaptive quadrature of `½|p − q|`.
pub fn tv_quadrature(p: &GaussianMixture, q: &GaussianMixture) -> Result<f64, DivError> {
    if p.dim() != 1 || q.dim() != 1 {
        return Err(DivError::UnsupportedDimension { dim: p.dim().max(q.dim()) });
    }
    let bp = p.bracket(12.0)[0];
    let bq = q.bracket(12.0)[0];
    let (lo, hi) = (bp.0.min(bq.0), bp.1.max(bq.1));
    let f = |x: f64| 0.5 * (p.density(&[x]) - q.density(&[x])).abs();
    Ok(adaptive_simpson(&f, lo, hi, 1e-8).clamp(0.0, 1.0))
}

/// Histogram TV estimate between two 1-D samples on a shared equal-width
/// binning (the training-loop diagnostic).
pub fn tv_histogram(a: &[f64], b: &[f64], bins: usize) -> Result<f64, DivError> {
    if a.is_empty() || b.is_empty() {
        return Err(DivError::EmptySample);
    }
    assert!(bins >= 1, "need at least one bin");
    let lo = a.iter().chain(b).cloned().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Ok(0.0); // all mass in one bin for both samples
    }
    let width = (hi - lo) / bins as f64;
    let index = |v: f64| (((v - lo) / width) as usize).min(bins - 1);
    let mut ca = vec![0.0; bins];
    let mut cb = vec![0.0; bins];
    for &v in a {
        ca[index(v)] += 1.0 / a.len() as f64;
    }
    for &v in b {
        cb[index(v)] += 1.0 / b.len() as f64;
    }
    Ok(0.5 * ca.iter().zip(&cb).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

// ---- Wasserstein-1 -------------------------------------------------------------

/// `W1` between 1-D distributions via `∫ |F − G|`: exact piecewise sums on
/// discrete supports, quadrature (tolerance 1e-8) on mixtures.
pub fn w1_1d(p: &Dist, q: &Dist) -> Result<f64, DivError> {
    if p.dim() != 1 || q.dim() != 1 {
        return Err(DivError::UnsupportedDimension { dim: p.dim().max(q.dim()) });
    }
    match (p, q) {
        (Dist::Discrete(dp), Dist::Discrete(dq)) => {
            let atoms_p: Vec<(f64, f64)> = dp
                .support()
                .iter()
                .zip(dp.pmf())
                .map(|(x, &m)| (x[0], m))
                .collect();
            let atoms_q: Vec<(f64, f64)> = dq
                .support()
                .iter()
                .zip(dq.pmf())
                .map(|(x, &m)| (x[0], m))
                .collect();
            Ok(w1_atoms_1d(&atoms_p, &atoms_q))
        }
        (Dist::Mixture(mp), Dist::Mixture(mq)) => {
            let bp = mp.bracket(12.0)[0];
            let bq = mq.bracket(12.0)[0];
            let (lo, hi) = (bp.0.min(bq.0), bp.1.max(bq.1));
            let f = |x: f64| (mp.cdf_1d(x) - mq.cdf_1d(x)).abs();
            Ok(adaptive_simpson(&f, lo, hi, 1e-8).max(0.0))
        }
        _ => Err(DivError::BadSpace("w1_1d needs two distributions of the same kind".into())),
    }
}

/// Exact `∫|F − G|` for two finite 1-D atom lists (duplicates allowed).
fn w1_atoms_1d(p: &[(f64, f64)], q: &[(f64, f64)]) -> f64 {
    let mut events: Vec<(f64, f64, f64)> = Vec::with_capacity(p.len() + q.len());
    for &(x, m) in p {
        events.push((x, m, 0.0));
    }
    for &(x, m) in q {
        events.push((x, 0.0, m));
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut total = 0.0f64;
    let mut fa = 0.0f64;
    let mut fb = 0.0f64;
    let mut prev: Option<f64> = None;
    for (x, ma, mb) in events {
        if let Some(px) = prev {
            if x > px {
                total += (fa - fb).abs() * (x - px);
            }
        }
        fa += ma;
        fb += mb;
        prev = Some(x);
    }
    total
}

/// Empirical `W1` between two equal-weight 1-D samples.
pub fn w1_samples_1d(a: &[f64], b: &[f64]) -> Result<f64, DivError> {
    if a.is_empty() || b.is_empty() {
        return Err(DivError::EmptySample);
    }
    let atoms_a: Vec<(f64, f64)> = a.iter().map(|&x| (x, 1.0 / a.len() as f64)).collect();
    let atoms_b: Vec<(f64, f64)> = b.iter().map(|&x| (x, 1.0 / b.len() as f64)).collect();
    Ok(w1_atoms_1d(&atoms_a, &atoms_b))
}

/// Exact optimal-transport `W1` on a finite metric space, solved as the
/// coupling LP with marginal equality constraints.
pub fn w1_discrete_exact(
    p: &DiscreteDist,
    q: &DiscreteDist,
    space: &FiniteMetricSpace,
) -> Result<f64, DivError> {
    let pa = space.align(p, "P")?;
    let qa = space.align(q, "Q")?;
    let n = space.len();
    let nv = n * n;
    let mut objective = vec![0.0; nv];
    for i in 0..n {
        for j in 0..n {
            objective[i * n + j] = -space.distance(i, j);
        }
    }
    let mut constraints = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut row = vec![0.0; nv];
        for j in 0..n {
            row[i * n + j] = 1.0;
        }
        constraints.push((row, Cmp::Eq, pa[i]));
    }
    for j in 0..n {
        let mut row = vec![0.0; nv];
        for i in 0..n {
            row[i * n + j] = 1.0;
        }
        constraints.push((row, Cmp::Eq, qa[j]));
    }
    let problem = LpProblem {
        objective,
        constraints,
        bounds: vec![(0.0, f64::INFINITY); nv],
    };
    let solution = lp_solve(&problem)?;
    Ok((-solution.value).max(0.0))
}

// ---- prior-weighted gaps ---------------------------------------------------------

/// Closed form of the maximized bounded gap:
/// `D^{(π)} = Σ_i [π p_i − (1−π) q_i]_+`.
pub fn d_pi_closed_form(p: &DiscreteDist, q: &DiscreteDist, pi: f64) -> Result<f64, DivError> {
    if !(0.0..=1.0).contains(&pi) {
        return Err(DivError::BadPi { pi });
    }
    Ok(union_support(p, q)
        .iter()
        .map(|(_, a, b)| (pi * a - (1.0 - pi) * b).max(0.0))
        .sum())
}

/// Shared LP: maximize `Σ w_i h_i` over `0 ≤ h_i ≤ hi` with
/// `|h_i − h_j| ≤ d_ij` for every pair.
fn bounded_lipschitz_max(
    space: &FiniteMetricSpace,
    weights: &[f64],
    hi: f64,
) -> Result<f64, DivError> {
    let n = space.len();
    let mut constraints = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in i + 1..n {
            let d = space.distance(i, j);
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            row[j] = -1.0;
            constraints.push((row.clone(), Cmp::Le, d));
            let mut row2 = vec![0.0; n];
            row2[i] = -1.0;
            row2[j] = 1.0;
            constraints.push((row2, Cmp::Le, d));
        }
    }
    let problem = LpProblem {
        objective: weights.to_vec(),
        constraints,
        bounds: vec![(0.0, hi); n],
    };
    Ok(lp_solve(&problem)?.value)
}

/// `D^{(π)}_Lip`: maximum of `π·E_P[h] − (1−π)·E_Q[h]` over critics
/// `h: space → [0,1]` that are 1-Lipschitz for the space's metric.
pub fn d_pi_lip_lp(
    p: &DiscreteDist,
    q: &DiscreteDist,
    pi: f64,
    space: &FiniteMetricSpace,
) -> Result<f64, DivError> {
    if !(0.0..=1.0).contains(&pi) {
        return Err(DivError::BadPi { pi });
    }
    let pa = space.align(p, "P")?;
    let qa = space.align(q, "Q")?;
    let weights: Vec<f64> = pa
        .iter()
        .zip(&qa)
        .map(|(a, b)| pi * a - (1.0 - pi) * b)
        .collect();
    bounded_lipschitz_max(space, &weights, 1.0)
}

/// `Σ_Lip`: maximum of `E_P[h] − E_Q[h]` over the same `[0,1]`-bounded
/// 1-Lipschitz class.
pub fn sigma_lip_lp(
    p: &DiscreteDist,
    q: &DiscreteDist,
    space: &FiniteMetricSpace,
) -> Result<f64, DivError> {
    let pa = space.align(p, "P")?;
    let qa = space.align(q, "Q")?;
    let weights: Vec<f64> = pa.iter().zip(&qa).map(|(a, b)| a - b).collect();
    bounded_lipschitz_max(space, &weights, 1.0)
}

/// `Σ_Lip` with the range box widened to `[0, hi]`. With `hi ≥ diameter`
/// the range constraint is inactive and the value collapses to the
/// Kantorovich-Rubinstein dual of `W1`.
pub fn sigma_lip_lp_with_range(
    p: &DiscreteDist,
    q: &DiscreteDist,
    space: &FiniteMetricSpace,
    hi: f64,
) -> Result<f64, DivError> {
    let pa = space.align(p, "P")?;
    let qa = space.align(q, "Q")?;
    let weights: Vec<f64> = pa.iter().zip(&qa).map(|(a, b)| a - b).collect();
    bounded_lipschitz_max(space, &weights, hi)
}

/// The learning objective `L^{(π)} = π·E_P[h] − (1−π)·E_Q[h]` for an
/// explicit critic, exact on finite supports.
pub fn l_bg(
    pi: f64,
    h: impl Fn(&[f64]) -> f64,
    p: &DiscreteDist,
    q: &DiscreteDist,
) -> Result<f64, DivError> {
    if !(0.0..=1.0).contains(&pi) {
        return Err(DivError::BadPi { pi });
    }
    Ok(union_support(p, q)
        .iter()
        .map(|(x, a, b)| (pi * a - (1.0 - pi) * b) * h(x))
        .sum())
}

// ---- Fréchet-Gaussian proxy --------------------------------------------------------

/// Squared Fréchet distance between Gaussians fitted to raw coordinates
/// (dimension 1 or 2):
/// `‖m1−m2‖² + tr(C1 + C2 − 2(C1^{1/2} C2 C1^{1/2})^{1/2})`.
pub fn frechet_gaussian(
    m1: &[f64],
    c1: &[Vec<f64>],
    m2: &[f64],
    c2: &[Vec<f64>],
) -> Result<f64, DivError> {
    let d = m1.len();
    if d == 0 || d > 2 {
        return Err(DivError::UnsupportedDimension { dim: d });
    }
    if m2.len() != d || c1.len() != d || c2.len() != d {
        return Err(DivError::BadGaussian("dimension mismatch".into()));
    }
    for c in [c1, c2] {
        for row in c {
            if row.len() != d {
                return Err(DivError::BadGaussian("covariance shape".into()));
            }
        }
        if d == 2 && (c[0][1] - c[1][0]).abs() > 1e-9 {
            return Err(DivError::BadGaussian("covariance not symmetric".into()));
        }
    }
    let mean_term: f64 = m1
        .iter()
        .zip(m2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let trace_term = if d == 1 {
        let (a, b) = (c1[0][0].max(0.0), c2[0][0].max(0.0));
        (a.sqrt() - b.sqrt()).powi(2)
    } else {
        let s1 = sym2_sqrt([[c1[0][0], c1[0][1]], [c1[1][0], c1[1][1]]])?;
        let c2m = [[c2[0][0], c2[0][1]], [c2[1][0], c2[1][1]]];
        let inner = mat2_mul(mat2_mul(s1, c2m), s1);
        let cross = sym2_sqrt(inner)?;
        c1[0][0] + c1[1][1] + c2[0][0] + c2[1][1] - 2.0 * (cross[0][0] + cross[1][1])
    };
    Ok((mean_term + trace_term).max(0.0))
}

/// Empirical mean and covariance (unbiased, denominator n−1) of samples.
pub fn gaussian_fit_samples(samples: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>), DivError> {
    if samples.is_empty() {
        return Err(DivError::EmptySample);
    }
    let n = samples.len();
    let d = samples[0].len();
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, &v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0; d]; d];
    if n > 1 {
        for s in samples {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += (s[i] - mean[i]) * (s[j] - mean[j]);
                }
            }
        }
        for row in cov.iter_mut() {
            for v in row.iter_mut() {
                *v /= (n - 1) as f64;
            }
        }
    }
    Ok((mean, cov))
}

/// Mean and covariance of a weighted finite distribution.
pub fn gaussian_fit_weighted(d: &DiscreteDist) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dim = d.dim();
    let mut mean = vec![0.0; dim];
    for (pt, &w) in d.support().iter().zip(d.pmf()) {
        for (m, &v) in mean.iter_mut().zip(pt) {
            *m += w * v;
        }
    }
    let mut cov = vec![vec![0.0; dim]; dim];
    for (pt, &w) in d.support().iter().zip(d.pmf()) {
        for i in 0..dim {
            for j in 0..dim {
                cov[i][j] += w * (pt[i] - mean[i]) * (pt[j] - mean[j]);
            }
        }
    }
    (mean, cov)
}

fn mat2_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Principal square root of a symmetric PSD 2×2 matrix by closed-form
/// eigendecomposition; slightly negative eigenvalues (rounding) clamp to 0.
fn sym2_sqrt(m: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2], DivError> {
    let (a, b, c) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
    let half_tr = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;
    if l1 < -1e-9 || l2 < -1e-9 {
        return Err(DivError::BadGaussian(format!(
            "matrix not positive semidefinite (eigenvalues {l1}, {l2})"
        )));
    }
    let (s1, s2) = (l1.max(0.0).sqrt(), l2.max(0.0).sqrt());
    // eigenvector for l1
    let (vx, vy) = if b.abs() > 1e-300 {
        (l1 - c, b)
    } else if a >= c {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let norm = (vx * vx + vy * vy).sqrt();
    let (ux, uy) = (vx / norm, vy / norm);
    // orthogonal complement carries l2
    let (wx, wy) = (-uy, ux);
    Ok([
        [
            s1 * ux * ux + s2 * wx * wx,
            s1 * ux * uy + s2 * wx * wy,
        ],
        [
            s1 * uy * ux + s2 * wy * wx,
            s1 * uy * uy + s2 * wy * wy,
        ],
    ])
}

// ---- reports -------------------------------------------------------------------------

/// One evaluation of every divergence oracle on a pair of finite
/// distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub tv: f64,
    pub w1: f64,
    pub d_pi: f64,
    pub d_one_minus_pi: f64,
    pub d_pi_lip: f64,
    pub sigma_lip: f64,
    pub frechet: f64,
    pub pi: f64,
    pub seed: u64,
}

impl DivergenceReport {
    pub const CSV_HEADER: &'static str = "tv,w1,d_pi,d_1mpi,d_pi_lip,sigma_lip,frechet,pi,seed";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            self.tv,
            self.w1,
            self.d_pi,
            self.d_one_minus_pi,
            self.d_pi_lip,
            self.sigma_lip,
            self.frechet,
            self.pi,
            self.seed
        )
    }
}

/// Runs every oracle on a discrete pair over the Euclidean space of their
/// unioned supports.
pub fn evaluate_discrete_pair(
    p: &DiscreteDist,
    q: &DiscreteDist,
    pi: f64,
    seed: u64,
) -> Result<DivergenceReport, DivError> {
    let union = union_support(p, q);
    let space = FiniteMetricSpace::euclidean(union.iter().map(|(pt, _, _)| pt.clone()).collect())?;
    let (m1, c1) = gaussian_fit_weighted(p);
    let (m2, c2) = gaussian_fit_weighted(q);
    Ok(DivergenceReport {
        tv: tv_discrete(p, q),
        w1: w1_discrete_exact(p, q, &space)?,
        d_pi: d_pi_closed_form(p, q, pi)?,
        d_one_minus_pi: d_pi_closed_form(p, q, 1.0 - pi)?,
        d_pi_lip: d_pi_lip_lp(p, q, pi, &space)?,
        sigma_lip: sigma_lip_lp(p, q, &space)?,
        frechet: frechet_gaussian(&m1, &c1, &m2, &c2)?,
        pi,
        seed,
    })
}
