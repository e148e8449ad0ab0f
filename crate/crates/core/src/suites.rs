//! Executable property suites: every bound, identity, and inequality the
//! library claims is checked here against exact oracles on randomized
//! instances with fixed seeds. The CLI `verify` command runs these; the
//! acceptance tests reuse them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Tensor};
use crate::bolt::{
    bolt_bound, bolt_plugin_estimate, hinge_t0, hstar, plugin_classifier, Convention,
};
use crate::divergences::{
    d_pi_closed_form, d_pi_lip_lp, sigma_lip_lp, sigma_lip_lp_with_range, tv_discrete, w1_1d,
    w1_discrete_exact, FiniteMetricSpace,
};
use crate::nn::{
    critic_raw_scores, init_params, lipschitz_upper_bound_raw, spectral_norm, weight_clip,
    MlpConfig, MlpParams,
};
use crate::problems::{
    bayes_error_exact, likelihood_ratio, posterior, map_classify, sample_labeled, BinaryProblem,
    DiscreteDist, Dist,
};
use crate::seed::derive_seed;

/// Outcome of one suite.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub millis: u128,
}

const MASTER_SEED: u64 = 20_240_817;

type SuiteFn = fn() -> (bool, String);

const SUITES: &[(&str, SuiteFn)] = &[
    ("theorem1-bound", suite_theorem1),
    ("theorem2-plugin", suite_theorem2),
    ("theorem3-tv", suite_theorem3),
    ("theorem4-w1", suite_theorem4),
    ("lemma-s3-hinge", suite_hinge),
    ("lemma-s4-bounds", suite_gap_bounds),
    ("lemma-s5-lipschitz", suite_lipschitz),
    ("autodiff-gradcheck", suite_autodiff),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|(n, _)| *n).collect()
}

/// Runs suites whose name contains `filter` (all when `None`); errors with
/// the available names when the filter matches nothing.
pub fn run_suites(filter: Option<&str>) -> Result<Vec<SuiteResult>, String> {
    let selected: Vec<&(&str, SuiteFn)> = SUITES
        .iter()
        .filter(|(name, _)| filter.is_none_or(|f| name.contains(f)))
        .collect();
    if selected.is_empty() {
        return Err(format!(
            "no suite matches `{}`; available: {}",
            filter.unwrap_or(""),
            suite_names().join(", ")
        ));
    }
    Ok(selected
        .into_iter()
        .map(|(name, f)| {
            let t0 = std::time::Instant::now();
            let (passed, detail) = f();
            SuiteResult {
                name,
                passed,
                detail,
                millis: t0.elapsed().as_millis(),
            }
        })
        .collect())
}

// ---- random instance helpers ----------------------------------------------------

/// Random simplex weights whose float sum is exactly 1.
fn random_pmf(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(rng.gen::<f64>().max(1e-12)).ln()).collect();
    let total: f64 = raw.iter().sum();
    let mut pmf: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = pmf[..n - 1].iter().sum();
    pmf[n - 1] = 1.0 - head;
    pmf
}

fn random_points_1d(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut pts: Vec<f64> = Vec::with_capacity(n);
    while pts.len() < n {
        let x: f64 = rng.gen_range(-4.0..4.0);
        if pts.iter().all(|&p| (p - x).abs() > 1e-6) {
            pts.push(x);
        }
    }
    pts.into_iter().map(|x| vec![x]).collect()
}

fn random_points_2d(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        if pts
            .iter()
            .all(|q| (q[0] - p[0]).abs() + (q[1] - p[1]).abs() > 1e-6)
        {
            pts.push(p);
        }
    }
    pts
}

fn random_discrete_problem(rng: &mut ChaCha8Rng) -> BinaryProblem {
    let n = rng.gen_range(2..=8);
    let pts = random_points_1d(rng, n);
    let p1 = DiscreteDist::new(pts.clone(), random_pmf(rng, n)).unwrap();
    let p2 = DiscreteDist::new(pts, random_pmf(rng, n)).unwrap();
    let q1 = rng.gen_range(0.05..0.95);
    BinaryProblem::new(q1, Dist::Discrete(p1), Dist::Discrete(p2)).unwrap()
}

// ---- suites ----------------------------------------------------------------------

/// Upper-bound validity for random scorers and exactness at `h*`.
fn suite_theorem1() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(MASTER_SEED, "theorem1", 0));
    let mut worst_slack = f64::NEG_INFINITY;
    let mut worst_tight = 0.0f64;
    let mut prior_cap_ok = true;
    for _ in 0..500 {
        let problem = random_discrete_problem(&mut rng);
        let eps = bayes_error_exact(&problem).unwrap();
        prior_cap_ok &= eps <= problem.q1.min(problem.q2);

        // tightness at the optimal bounding function
        let tight = bolt_bound(|x| hstar(&problem, x), &problem).unwrap();
        worst_tight = worst_tight.max((tight - eps).abs());

        // validity for a random [-1,0]-valued scorer on the support
        let support: Vec<Vec<f64>> = match (&problem.p1, &problem.p2) {
            (Dist::Discrete(a), _) => a.support().to_vec(),
            _ => unreachable!(),
        };
        let values: Vec<f64> = (0..support.len()).map(|_| -rng.gen::<f64>()).collect();
        let h = |x: &[f64]| {
            support
                .iter()
                .position(|p| p.as_slice() == x)
                .map_or(0.0, |i| values[i])
        };
        let bound = bolt_bound(h, &problem).unwrap();
        worst_slack = worst_slack.max(eps - bound);
    }
    let passed = worst_tight <= 1e-12 && worst_slack <= 1e-9 && prior_cap_ok;
    (
        passed,
        format!(
            "500 problems: max |bound(h*) − ε| = {worst_tight:.2e} (≤ 1e-12), max ε − bound(h) = {worst_slack:.2e} (≤ 1e-9), ε ≤ min(q): {prior_cap_ok}"
        ),
    )
}

/// Plug-in classification: endpoint argmin of the conditional risk, MAP
/// agreement of the thresholded `h*`, and the hinge plug-in estimator
/// against the exact oracle.
fn suite_theorem2() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(MASTER_SEED, "theorem2", 0));
    let mut ok = true;
    let mut notes = Vec::new();

    // endpoint optimality of the conditional risk (1−2η)·z over {−1, 0}
    let mut argmin_ok = true;
    for _ in 0..100_000 {
        let eta: f64 = rng.gen();
        let risk = |z: f64| (1.0 - 2.0 * eta) * z;
        let best = if risk(0.0) <= risk(-1.0) { 0.0 } else { -1.0 };
        if eta > 0.5 && best != 0.0 {
            argmin_ok = false;
        }
        if eta < 0.5 && best != -1.0 {
            argmin_ok = false;
        }
    }
    ok &= argmin_ok;
    notes.push(format!("conditional-risk argmin: {}", if argmin_ok { "ok" } else { "FAIL" }));

    // thresholded h* agrees with the MAP rule everywhere
    let mut map_ok = true;
    for _ in 0..200 {
        let problem = random_discrete_problem(&mut rng);
        let support: Vec<Vec<f64>> = match &problem.p1 {
            Dist::Discrete(a) => a.support().to_vec(),
            _ => unreachable!(),
        };
        for x in &support {
            let via_plugin = plugin_classifier(hstar(&problem, x), Convention::NegativeUnit);
            if via_plugin != map_classify(&problem, x) {
                map_ok = false;
            }
        }
    }
    ok &= map_ok;
    notes.push(format!("plug-in vs MAP agreement: {}", if map_ok { "ok" } else { "FAIL" }));

    // plug-in estimate on the Gaussian pair tracks the oracle
    let problem = BinaryProblem::standard_gaussian_pair();
    let oracle = bayes_error_exact(&problem).unwrap();
    let data = sample_labeled(&problem, 40_000, derive_seed(MASTER_SEED, "theorem2", 1));
    let m1 = data.iter().filter(|(_, y)| *y == 1).count();
    let class2: Vec<Vec<f64>> = data
        .into_iter()
        .filter(|(_, y)| *y == 2)
        .map(|(x, _)| x)
        .collect();
    let est = bolt_plugin_estimate(|x| likelihood_ratio(&problem, x), &class2, m1).unwrap();
    let est_ok = (est - oracle).abs() < 0.02;
    ok &= est_ok;
    notes.push(format!("plug-in estimate {est:.4} vs oracle {oracle:.4}"));

    (ok, notes.join("; "))
}

/// The TV identity at π = ½ plus the complementary-sum inequality and the
/// half-TV corollary on a π grid.
fn suite_theorem3() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(MASTER_SEED, "theorem3", 0));
    let mut worst_eq = 0.0f64;
    let mut worst_ineq = f64::NEG_INFINITY;
    let mut worst_half = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=32);
        let pts = random_points_1d(&mut rng, n);
        let p = DiscreteDist::new(pts.clone(), random_pmf(&mut rng, n)).unwrap();
        let q = DiscreteDist::new(pts, random_pmf(&mut rng, n)).unwrap();
        let tv = tv_discrete(&p, &q);

        let d_half = d_pi_closed_form(&p, &q, 0.5).unwrap();
        worst_eq = worst_eq.max((d_half + d_half - tv).abs());

        for k in 1..=9 {
            let pi = k as f64 / 10.0;
            let a = d_pi_closed_form(&p, &q, pi).unwrap();
            let b = d_pi_closed_form(&p, &q, 1.0 - pi).unwrap();
            worst_ineq = worst_ineq.max(tv - (a + b));
            worst_half = worst_half.max(tv - 2.0 * a.max(b));
        }
    }
    let passed = worst_eq <= 1e-10 && worst_ineq <= 1e-10 && worst_half <= 1e-10;
    (
        passed,
        format!(
            "1000 pairs: |2·D^(½) − TV| ≤ {worst_eq:.2e}, TV − (D^(π)+D^(1−π)) ≤ {worst_ineq:.2e}, TV − 2·max ≤ {worst_half:.2e} (all ≤ 1e-10)"
        ),
    )
}

/// The bounded-Lipschitz gap never exceeds exact optimal transport, and is
/// dominated by the balanced gap for π ≤ ½.
fn suite_theorem4() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(MASTER_SEED, "theorem4", 0));
    let mut worst_w1 = f64::NEG_INFINITY;
    let mut worst_dom = f64::NEG_INFINITY;
    let mut worst_sigma = f64::NEG_INFINITY;
    for _ in 0..200 {
        let n = rng.gen_range(3..=12);
        let pts = random_points_2d(&mut rng, n);
        let space = FiniteMetricSpace::euclidean(pts.clone()).unwrap();
        let p = DiscreteDist::new(pts.clone(), random_pmf(&mut rng, n)).unwrap();
        let q = DiscreteDist::new(pts, random_pmf(&mut rng, n)).unwrap();
        let w1 = w1_discrete_exact(&p, &q, &space).unwrap();
        let sigma = sigma_lip_lp(&p, &q, &space).unwrap();
        let tv = tv_discrete(&p, &q);
        worst_sigma = worst_sigma.max(sigma - tv.min(w1));
        for k in 1..=5 {
            let pi = k as f64 / 10.0;
            let d = d_pi_lip_lp(&p, &q, pi, &space).unwrap();
            worst_w1 = worst_w1.max(d - w1);
            worst_dom = worst_dom.max(d - sigma);
        }
    }
    let passed = worst_w1 <= 1e-8 && worst_dom <= 1e-9 && worst_sigma <= 1e-9;
    (
        passed,
        format!(
            "200 spaces × 5 priors: max D_Lip − W1 = {worst_w1:.2e} (≤ 1e-8), max D_Lip − Σ_Lip = {worst_dom:.2e} (≤ 1e-9), max Σ_Lip − min(TV, W1) = {worst_sigma:.2e} (≤ 1e-9)"
        ),
    )
}

/// Hinge identity against the exact Bayes error, the hinge's q1-Lipschitz
/// property, and posterior/likelihood-ratio consistency.
fn suite_hinge() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(MASTER_SEED, "hinge", 0));
    let mut ok = true;
    let mut notes = Vec::new();

    // hinge identity on discrete problems: q2 − E_{P2}[t0(U)] = ε exactly
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let problem = random_discrete_problem(&mut rng);
        let eps = bayes_error_exact(&problem).unwrap();
        let p2 = match &problem.p2 {
            Dist::Discrete(d) => d,
            _ => unreachable!(),
        };
        let e_hinge: f64 = p2
            .support()
            .iter()
            .zip(p2.pmf())
            .map(|(x, &m)| m * hinge_t0(likelihood_ratio(&problem, x), problem.q1, problem.q2))
            .sum();
        worst = worst.max((problem.q2 - e_hinge - eps).abs());
    }
    ok &= worst <= 1e-12;
    notes.push(format!("discrete hinge identity ≤ {worst:.2e} (≤ 1e-12)"));

    // hinge identity on the 1-D Gaussian pair via quadrature
    let problem = BinaryProblem::standard_gaussian_pair();
    let eps = bayes_error_exact(&problem).unwrap();
    let m2 = match &problem.p2 {
        Dist::Mixture(m) => m.clone(),
        _ => unreachable!(),
    };
    let integrand = |x: f64| {
        m2.density(&[x]) * hinge_t0(likelihood_ratio(&problem, &[x]), problem.q1, problem.q2)
    };
    let e_hinge = crate::problems::adaptive_simpson(&integrand, -13.0, 13.0, 1e-11);
    let gauss_gap = (problem.q2 - e_hinge - eps).abs();
    ok &= gauss_gap <= 1e-9;
    notes.push(format!("Gaussian hinge identity gap {gauss_gap:.2e} (≤ 1e-9)"));

    // |t0(u) − t0(v)| ≤ q1|u − v| (exact up to one rounding per side)
    let mut lip_ok = true;
    for _ in 0..100_000 {
        let q1: f64 = rng.gen_range(0.01..0.99);
        let (u, v): (f64, f64) = (rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0));
        let lhs = (hinge_t0(u, q1, 1.0 - q1) - hinge_t0(v, q1, 1.0 - q1)).abs();
        if lhs > q1 * (u - v).abs() + 1e-15 {
            lip_ok = false;
        }
    }
    ok &= lip_ok;
    notes.push(format!("hinge Lipschitz: {}", if lip_ok { "ok" } else { "FAIL" }));

    // η = q1·U/(q1·U + q2) wherever p2 > 0
    let mut post_ok = true;
    for _ in 0..200 {
        let problem = random_discrete_problem(&mut rng);
        let support: Vec<Vec<f64>> = match &problem.p2 {
            Dist::Discrete(d) => d.support().to_vec(),
            _ => unreachable!(),
        };
        for x in &support {
            if problem.p2.density(x) > 0.0 {
                let u = likelihood_ratio(&problem, x);
                let eta = posterior(&problem, x);
                let expect = if u.is_infinite() {
                    1.0
                } else {
                    problem.q1 * u / (problem.q1 * u + problem.q2)
                };
                if (eta - expect).abs() > 1e-12 {
                    post_ok = false;
                }
            }
        }
    }
    ok &= post_ok;
    notes.push(format!("posterior/likelihood-ratio: {}", if post_ok { "ok" } else { "FAIL" }));

    (ok, notes.join("; "))
}

/// Scalar and functional bounds on the prior-weighted gap: pointwise
/// dominance, monotonicity in π, range bounds, and disjoint-support
/// tightness.
fn suite_gap_bounds() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(MASTER_SEED, "gap-bounds", 0));
    let mut ok = true;
    let mut notes = Vec::new();

    // max{a−b, b−a} ≥ πa − (1−π)b for a, b ∈ [0,1], π ≤ ½
    let mut pointwise_ok = true;
    for _ in 0..100_000 {
        let a: f64 = rng.gen();
        let b: f64 = rng.gen();
        let pi: f64 = rng.gen_range(0.0..=0.5);
        if (a - b).max(b - a) < pi * a - (1.0 - pi) * b - 1e-15 {
            pointwise_ok = false;
        }
    }
    ok &= pointwise_ok;
    notes.push(format!("pointwise dominance: {}", if pointwise_ok { "ok" } else { "FAIL" }));

    // D^(π) nondecreasing along the π grid; disjoint supports give exactly π
    let mut mono_ok = true;
    let mut disjoint_ok = true;
    for _ in 0..300 {
        let n = rng.gen_range(2..=16);
        let pts = random_points_1d(&mut rng, n);
        let p = DiscreteDist::new(pts.clone(), random_pmf(&mut rng, n)).unwrap();
        let q = DiscreteDist::new(pts, random_pmf(&mut rng, n)).unwrap();
        let mut prev = -1.0;
        for k in 0..=10 {
            let pi = k as f64 / 10.0;
            let d = d_pi_closed_form(&p, &q, pi).unwrap();
            if d < prev - 1e-12 {
                mono_ok = false;
            }
            prev = d;
        }

        let m = rng.gen_range(2..=6);
        let pts_a = random_points_1d(&mut rng, m);
        let pts_b: Vec<Vec<f64>> = pts_a.iter().map(|p| vec![p[0] + 100.0]).collect();
        let pa = DiscreteDist::new(pts_a, random_pmf(&mut rng, m)).unwrap();
        let pb = DiscreteDist::new(pts_b, random_pmf(&mut rng, m)).unwrap();
        for k in 1..=9 {
            let pi = k as f64 / 10.0;
            if (d_pi_closed_form(&pa, &pb, pi).unwrap() - pi).abs() > 1e-12 {
                disjoint_ok = false;
            }
        }
    }
    ok &= mono_ok && disjoint_ok;
    notes.push(format!("monotone in π: {}", if mono_ok { "ok" } else { "FAIL" }));
    notes.push(format!("disjoint tightness = π: {}", if disjoint_ok { "ok" } else { "FAIL" }));

    (ok, notes.join("; "))
}

/// Network Lipschitz bookkeeping: empirical ratios never beat the layer
/// bound, clipping bounds spectral norms, KR duality on a line, and the
/// diameter bound `W1 ≤ diam·TV`.
fn suite_lipschitz() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(MASTER_SEED, "lipschitz", 0));
    let mut ok = true;
    let mut notes = Vec::new();

    // empirical Lipschitz ratio vs layerwise bound, 100 nets × 1000 pairs
    let mut worst_excess = f64::NEG_INFINITY;
    for i in 0..100 {
        let dim = if i % 2 == 0 { 1 } else { 2 };
        let cfg = MlpConfig::critic_default(dim);
        let params = init_params(&cfg, derive_seed(MASTER_SEED, "lip-net", i)).unwrap();
        let bound = lipschitz_upper_bound_raw(&params, &cfg).value;
        let xs: Vec<Vec<f64>> = (0..1000)
            .map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let ys: Vec<Vec<f64>> = (0..1000)
            .map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let sx = critic_raw_scores(&params, &cfg, &xs);
        let sy = critic_raw_scores(&params, &cfg, &ys);
        for ((x, y), (a, b)) in xs.iter().zip(&ys).zip(sx.iter().zip(&sy)) {
            let dist: f64 = x
                .iter()
                .zip(y)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            if dist > 1e-9 {
                worst_excess = worst_excess.max((a - b).abs() / dist - bound);
            }
        }
    }
    ok &= worst_excess <= 1e-8;
    notes.push(format!("empirical ratio − bound ≤ {worst_excess:.2e} (≤ 1e-8)"));

    // clipped layers: measured spectral norm ≤ √(mn)·c
    let mut clip_ok = true;
    for _ in 0..100 {
        let m = rng.gen_range(1..10);
        let n = rng.gen_range(1..10);
        let c = rng.gen_range(0.01..1.5);
        let data: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let mut params = MlpParams {
            layers: vec![crate::nn::Layer {
                w: Tensor::new(vec![m, n], data),
                b: Tensor::zeros(&[n]),
            }],
        };
        weight_clip(&mut params, c).unwrap();
        let (sigma, _) = spectral_norm(&params.layers[0].w, 100, 1e-10);
        if sigma > ((m * n) as f64).sqrt() * c + 1e-12 {
            clip_ok = false;
        }
    }
    ok &= clip_ok;
    notes.push(format!("clip bound: {}", if clip_ok { "ok" } else { "FAIL" }));

    // KR duality: widening the range box to the diameter recovers W1
    let mut worst_kr = 0.0f64;
    for _ in 0..40 {
        let n = rng.gen_range(3..=10);
        let pts = random_points_1d(&mut rng, n);
        let space = FiniteMetricSpace::euclidean(pts.clone()).unwrap();
        if space.diameter() < 1.0 {
            continue;
        }
        let p = DiscreteDist::new(pts.clone(), random_pmf(&mut rng, n)).unwrap();
        let q = DiscreteDist::new(pts, random_pmf(&mut rng, n)).unwrap();
        let dual = sigma_lip_lp_with_range(&p, &q, &space, space.diameter()).unwrap();
        let primal = w1_1d(&Dist::Discrete(p), &Dist::Discrete(q)).unwrap();
        worst_kr = worst_kr.max((dual - primal).abs());
    }
    ok &= worst_kr <= 1e-6;
    notes.push(format!("KR duality gap ≤ {worst_kr:.2e} (≤ 1e-6)"));

    // W1 ≤ diameter · TV on bounded spaces
    let mut worst_diam = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = rng.gen_range(2..=10);
        let pts = random_points_2d(&mut rng, n);
        let space = FiniteMetricSpace::euclidean(pts.clone()).unwrap();
        let p = DiscreteDist::new(pts.clone(), random_pmf(&mut rng, n)).unwrap();
        let q = DiscreteDist::new(pts, random_pmf(&mut rng, n)).unwrap();
        let w1 = w1_discrete_exact(&p, &q, &space).unwrap();
        let tv = tv_discrete(&p, &q);
        worst_diam = worst_diam.max(w1 - space.diameter() * tv);
    }
    ok &= worst_diam <= 1e-9;
    notes.push(format!("W1 − diam·TV ≤ {worst_diam:.2e} (≤ 1e-9)"));

    (ok, notes.join("; "))
}

// ---- random differentiable graphs for gradient checking ------------------------

#[derive(Debug, Clone)]
enum GraphOp {
    Add(usize, usize),
    Sub(usize, usize),
    ElemMul(usize, usize),
    ScalarMul(f64, usize),
    Sigmoid(usize),
    Tanh(usize),
    Relu(usize),
    LeakyRelu(f64, usize),
    Square(usize),
    /// `sqrt(square(x) + ½)`: keeps sqrt away from zero.
    SafeSqrt(usize),
    Norm(usize),
    MatMul(usize, usize),
}

/// A replayable random computation: fixed ops over leaf tensors, reduced
/// to a scalar by a final mean.
#[derive(Debug, Clone)]
pub struct RandomGraph {
    ops: Vec<GraphOp>,
}

impl RandomGraph {
    /// Evaluates on fresh leaves; returns the tape, leaf ids and scalar root.
    pub fn build(&self, leaves: &[Tensor]) -> (Tape, Vec<crate::autodiff::NodeId>, crate::autodiff::NodeId) {
        let (tape, leaf_ids, _, root) = self.build_full(leaves);
        (tape, leaf_ids, root)
    }

    fn build_full(
        &self,
        leaves: &[Tensor],
    ) -> (
        Tape,
        Vec<crate::autodiff::NodeId>,
        Vec<crate::autodiff::NodeId>,
        crate::autodiff::NodeId,
    ) {
        let mut tape = Tape::new();
        let leaf_ids: Vec<_> = leaves.iter().map(|t| tape.leaf(t.clone())).collect();
        let mut nodes = leaf_ids.clone();
        for op in &self.ops {
            let id = match *op {
                GraphOp::Add(a, b) => tape.add(nodes[a], nodes[b]),
                GraphOp::Sub(a, b) => tape.sub(nodes[a], nodes[b]),
                GraphOp::ElemMul(a, b) => tape.elem_mul(nodes[a], nodes[b]),
                GraphOp::ScalarMul(c, a) => tape.scalar_mul(c, nodes[a]),
                GraphOp::Sigmoid(a) => tape.sigmoid(nodes[a]),
                GraphOp::Tanh(a) => tape.tanh(nodes[a]),
                GraphOp::Relu(a) => tape.relu(nodes[a]),
                GraphOp::LeakyRelu(alpha, a) => tape.leaky_relu(alpha, nodes[a]),
                GraphOp::Square(a) => tape.square(nodes[a]),
                GraphOp::SafeSqrt(a) => {
                    let sq = tape.square(nodes[a]);
                    let half = tape.constant(Tensor::full(tape.value(sq).shape(), 0.5));
                    let sum = tape.add(sq, half);
                    tape.sqrt(sum)
                }
                GraphOp::Norm(a) => tape.euclidean_norm(nodes[a]),
                GraphOp::MatMul(a, b) => tape.matmul(nodes[a], nodes[b]),
            };
            nodes.push(id);
        }
        let last = *nodes.last().unwrap();
        let root = if tape.value(last).is_scalar() {
            last
        } else {
            tape.mean(last)
        };
        (tape, leaf_ids, nodes, root)
    }

    pub fn value(&self, leaves: &[Tensor]) -> f64 {
        let (tape, _, root) = self.build(leaves);
        tape.value(root).item()
    }
}

/// Random graph of at most `max_ops` operations over 2 leaves. Kinked ops
/// (relu family) are only emitted when every input entry is well away from
/// the kink, so central differences stay valid.
pub fn random_graph(rng: &mut ChaCha8Rng, max_ops: usize) -> (RandomGraph, Vec<Tensor>) {
    let shape: Vec<usize> = match rng.gen_range(0..4) {
        0 => vec![],
        1 => vec![rng.gen_range(2..4)],
        2 => {
            let n = rng.gen_range(2..4);
            vec![n, n]
        }
        _ => vec![rng.gen_range(2..3), rng.gen_range(2..4)],
    };
    let rand_tensor = |rng: &mut ChaCha8Rng, shape: &[usize]| {
        let len: usize = shape.iter().product::<usize>().max(1);
        Tensor::new(
            shape.to_vec(),
            (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        )
    };
    let leaves = vec![rand_tensor(rng, &shape), rand_tensor(rng, &shape)];

    // track values to veto kink-adjacent unary ops
    let mut values: Vec<Tensor> = leaves.clone();
    let mut shapes: Vec<Vec<usize>> = values.iter().map(|t| t.shape().to_vec()).collect();
    let mut ops = Vec::new();
    let n_ops = rng.gen_range(1..=max_ops);
    for _ in 0..n_ops {
        let a = rng.gen_range(0..values.len());
        let choice = rng.gen_range(0..9);
        let op = match choice {
            0 | 1 => {
                // binary op with a same-shape partner
                let partners: Vec<usize> = (0..values.len())
                    .filter(|&i| shapes[i] == shapes[a])
                    .collect();
                let b = partners[rng.gen_range(0..partners.len())];
                match rng.gen_range(0..3) {
                    0 => GraphOp::Add(a, b),
                    1 => GraphOp::Sub(a, b),
                    _ => GraphOp::ElemMul(a, b),
                }
            }
            2 => GraphOp::ScalarMul(rng.gen_range(-1.5..1.5), a),
            3 => GraphOp::Sigmoid(a),
            4 => GraphOp::Tanh(a),
            5 => {
                let safe = values[a].data().iter().all(|v| v.abs() > 1e-3);
                if safe && rng.gen_bool(0.5) {
                    GraphOp::Relu(a)
                } else if safe {
                    GraphOp::LeakyRelu(0.2, a)
                } else {
                    GraphOp::Tanh(a)
                }
            }
            6 => {
                if rng.gen_bool(0.5) {
                    GraphOp::Square(a)
                } else {
                    GraphOp::SafeSqrt(a)
                }
            }
            7 => {
                let norm_ok = values[a].data().iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-2;
                if norm_ok {
                    GraphOp::Norm(a)
                } else {
                    GraphOp::Square(a)
                }
            }
            _ => {
                // matmul needs square matrices of matching size here
                let squares: Vec<usize> = (0..values.len())
                    .filter(|&i| shapes[i].len() == 2 && shapes[i][0] == shapes[i][1])
                    .collect();
                if squares.len() >= 2 {
                    let x = squares[rng.gen_range(0..squares.len())];
                    let y = squares[rng.gen_range(0..squares.len())];
                    if shapes[x] == shapes[y] {
                        GraphOp::MatMul(x, y)
                    } else {
                        GraphOp::Tanh(a)
                    }
                } else {
                    GraphOp::Tanh(a)
                }
            }
        };
        // evaluate the op to keep the value ledger in sync
        let g = RandomGraph {
            ops: {
                let mut all = ops.clone();
                all.push(op.clone());
                all
            },
        };
        let (tape, _, op_nodes, _) = g.build_full(&leaves);
        let new_value = tape.value(*op_nodes.last().unwrap()).clone();
        // reject ops that produced huge values (keeps FD well-conditioned)
        if new_value.data().iter().any(|v| !v.is_finite() || v.abs() > 1e3) {
            continue;
        }
        shapes.push(new_value.shape().to_vec());
        values.push(new_value);
        ops.push(op);
    }
    if ops.is_empty() {
        ops.push(GraphOp::Sigmoid(0));
    }
    (RandomGraph { ops }, leaves)
}

/// First-order finite-difference checks on random graphs, the second-order
/// check through a gradient norm, linearity, and bit determinism.
fn suite_autodiff() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(MASTER_SEED, "autodiff", 0));
    let mut ok = true;
    let mut notes = Vec::new();

    // 200 random graphs vs central differences
    let mut worst_rel = 0.0f64;
    let mut graphs_checked = 0;
    while graphs_checked < 200 {
        let (graph, leaves) = random_graph(&mut rng, 6);
        let (mut tape, leaf_ids, root) = graph.build(&leaves);
        let grads = match tape.backward(root, &leaf_ids) {
            Ok(g) => g,
            Err(_) => continue,
        };
        graphs_checked += 1;
        let h = 1e-5;
        for (li, leaf) in leaves.iter().enumerate() {
            for k in 0..leaf.len() {
                let mut plus = leaves.clone();
                let mut minus = leaves.clone();
                let bump = |ts: &mut Vec<Tensor>, delta: f64| {
                    let mut data = ts[li].data().to_vec();
                    data[k] += delta;
                    ts[li] = Tensor::new(ts[li].shape().to_vec(), data);
                };
                bump(&mut plus, h);
                bump(&mut minus, -h);
                let fd = (graph.value(&plus) - graph.value(&minus)) / (2.0 * h);
                let got = grads[li].data()[k];
                let err = if fd.abs() < 1e-6 {
                    (got - fd).abs() // absolute near zero
                } else {
                    (got - fd).abs() / fd.abs()
                };
                if fd.abs() < 1e-6 {
                    if err > 1e-9 {
                        ok = false;
                    }
                } else {
                    worst_rel = worst_rel.max(err);
                }
            }
        }
    }
    ok &= worst_rel <= 1e-6;
    notes.push(format!("200 graphs: max rel FD error {worst_rel:.2e} (≤ 1e-6)"));

    // second order: ∇_θ ‖∇_x f_θ(x)‖ against finite differences of the
    // analytic first gradient
    let cfg = MlpConfig {
        layer_widths: vec![2, 4, 1],
        hidden: crate::nn::Activation::Tanh,
        head: crate::nn::Head::Raw,
    };
    let params = init_params(&cfg, derive_seed(MASTER_SEED, "autodiff", 1)).unwrap();
    let x = vec![0.35, -0.8];
    let grad_norm_value = |p: &MlpParams| -> f64 {
        let mut tape = Tape::new();
        let nodes = p.on_tape(&mut tape, true);
        let xn = tape.leaf(Tensor::new(vec![1, 2], x.clone()));
        let raw = crate::nn::forward_raw_on_tape(&mut tape, &nodes, &cfg, xn);
        let score = tape.mean(raw);
        let g = tape.backward_graph(score, &[xn]).unwrap()[0];
        let norm = tape.euclidean_norm(g);
        tape.value(norm).item()
    };
    let analytic = {
        let mut tape = Tape::new();
        let nodes = params.on_tape(&mut tape, true);
        let xn = tape.leaf(Tensor::new(vec![1, 2], x.clone()));
        let raw = crate::nn::forward_raw_on_tape(&mut tape, &nodes, &cfg, xn);
        let score = tape.mean(raw);
        let g = tape.backward_graph(score, &[xn]).unwrap()[0];
        let norm = tape.euclidean_norm(g);
        tape.backward(norm, &nodes).unwrap()
    };
    let mut worst2 = 0.0f64;
    let h = 1e-5;
    for (ti, tensor) in params.tensors().iter().enumerate() {
        for k in 0..tensor.len() {
            let perturb = |delta: f64| -> MlpParams {
                let mut p = params.clone();
                let tensors: Vec<Tensor> = p
                    .tensors()
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        let mut d = t.data().to_vec();
                        if i == ti {
                            d[k] += delta;
                        }
                        Tensor::new(t.shape().to_vec(), d)
                    })
                    .collect();
                p.assign(&tensors).unwrap();
                p
            };
            let fd = (grad_norm_value(&perturb(h)) - grad_norm_value(&perturb(-h))) / (2.0 * h);
            let got = analytic[ti].data()[k];
            let rel = (got - fd).abs() / fd.abs().max(1e-6);
            worst2 = worst2.max(rel);
        }
    }
    ok &= worst2 <= 1e-4;
    notes.push(format!("second-order rel error {worst2:.2e} (≤ 1e-4)"));

    // linearity of the derivative, to float association
    let mut lin_worst = 0.0f64;
    for _ in 0..50 {
        let (graph, leaves) = random_graph(&mut rng, 4);
        let (mut tape, leaf_ids, root) = graph.build(&leaves);
        let (mut tape2, leaf_ids2, root2) = graph.build(&leaves);
        let doubled = tape2.scalar_mul(2.0, root2);
        let g1 = match tape.backward(root, &leaf_ids) {
            Ok(g) => g,
            Err(_) => continue,
        };
        let g2 = tape2.backward(doubled, &leaf_ids2).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            for (x, y) in a.data().iter().zip(b.data()) {
                lin_worst = lin_worst.max((2.0 * x - y).abs());
            }
        }
    }
    ok &= lin_worst <= 1e-12;
    notes.push(format!("linearity gap ≤ {lin_worst:.2e} (≤ 1e-12)"));

    // bit-identical replay
    let (graph, leaves) = random_graph(&mut rng, 6);
    let run = || {
        let (mut tape, leaf_ids, root) = graph.build(&leaves);
        let grads = tape.backward(root, &leaf_ids).unwrap();
        (
            tape.value(root).item().to_bits(),
            grads
                .iter()
                .flat_map(|g| g.data().iter().map(|v| v.to_bits()))
                .collect::<Vec<u64>>(),
        )
    };
    let det_ok = run() == run();
    ok &= det_ok;
    notes.push(format!("deterministic replay: {}", if det_ok { "ok" } else { "FAIL" }));

    (ok, notes.join("; "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters_select_suites() {
        let names = suite_names();
        assert!(names.contains(&"theorem3-tv"));
        let selected = run_suites(Some("theorem3")).unwrap();
        assert_eq!(selected.len(), 1);
        assert_eq!(selected[0].name, "theorem3-tv");
        assert!(run_suites(Some("nonsense")).is_err());
    }

    #[test]
    fn fast_suites_pass() {
        for name in ["theorem3", "lemma-s4"] {
            let results = run_suites(Some(name)).unwrap();
            for r in &results {
                assert!(r.passed, "{}: {}", r.name, r.detail);
            }
        }
    }
}
