//! Command implementations for the `bolt` binary: property verification,
//! Bayes-error estimation, adversarial training, and λ/seed sweeps. Each
//! command takes a flat JSON config plus `--key=value` overrides, writes
//! CSV/SVG/manifest artifacts into an output directory, and is
//! deterministic per seed.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{Map, Value};

use bolt_core::bolt::{bias_variance_experiment, UhatMode};
use bolt_core::gan::{
    diagnostics, train, GanConfig, Objective, PenaltyKind, TrainHistory, TrainOutcome,
};
use bolt_core::nn::{Activation, Head, MlpConfig};
use bolt_core::problems::{BinaryProblem, DiscreteDist, Dist, GaussianMixture};
use bolt_core::suites::run_suites;

// ---- flat config ------------------------------------------------------------------

/// Flat JSON configuration: a single object of scalar/array values, merged
/// with `--key=value` overrides. Every key must be consumed by the command
/// that receives it; leftovers are rejected.
pub struct FlatConfig {
    map: Map<String, Value>,
}

impl FlatConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut map = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                match serde_json::from_str::<Value>(&text)? {
                    Value::Object(m) => m,
                    other => bail!("config must be a JSON object, got {other}"),
                }
            }
            None => Map::new(),
        };
        for item in overrides {
            let stripped = item.strip_prefix("--").unwrap_or(item);
            let (key, value) = stripped
                .split_once('=')
                .ok_or_else(|| anyhow!("override `{item}` is not of the form --key=value"))?;
            if key.is_empty() {
                bail!("override `{item}` has an empty key");
            }
            // numbers, booleans and arrays parse as JSON; anything else is a string
            let parsed = serde_json::from_str::<Value>(value)
                .unwrap_or_else(|_| Value::String(value.to_string()));
            map.insert(key.to_string(), parsed);
        }
        Ok(FlatConfig { map })
    }

    pub fn from_map(map: Map<String, Value>) -> Self {
        FlatConfig { map }
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.map.remove(key)
    }

    fn take_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| anyhow!("key `{key}` must be a number, got {v}")),
        }
    }

    fn take_opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| anyhow!("key `{key}` must be a number, got {v}")),
        }
    }

    fn take_usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| anyhow!("key `{key}` must be a nonnegative integer, got {v}")),
        }
    }

    fn take_u64(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .ok_or_else(|| anyhow!("key `{key}` must be a nonnegative integer, got {v}")),
        }
    }

    fn take_string(&mut self, key: &str, default: &str) -> Result<String> {
        match self.take(key) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s),
            Some(v) => bail!("key `{key}` must be a string, got {v}"),
        }
    }

    fn take_vec_f64(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.take(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| anyhow!("key `{key}` must hold numbers, got {v}"))
                })
                .collect(),
            Some(v) => bail!("key `{key}` must be an array, got {v}"),
        }
    }

    fn take_vec_usize(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        Ok(self
            .take_vec_f64(
                key,
                &default.iter().map(|&v| v as f64).collect::<Vec<f64>>(),
            )?
            .into_iter()
            .map(|v| v as usize)
            .collect())
    }

    /// Errors when unconsumed (unknown) keys remain.
    fn finish(self) -> Result<()> {
        if self.map.is_empty() {
            Ok(())
        } else {
            let keys: Vec<&String> = self.map.keys().collect();
            bail!("unknown config keys: {keys:?}")
        }
    }
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

// ---- verify ------------------------------------------------------------------------

/// Runs the property suites (optionally filtered by substring), printing a
/// pass/fail line per suite. Returns the process exit code.
pub fn cmd_verify(filter: Option<&str>) -> Result<i32> {
    let results = run_suites(filter).map_err(|e| anyhow!(e))?;
    let mut all_ok = true;
    for r in &results {
        println!(
            "[{}] {} ({} ms): {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.millis,
            r.detail
        );
        all_ok &= r.passed;
    }
    Ok(if all_ok { 0 } else { 1 })
}

// ---- problem / target parsing --------------------------------------------------------

fn parse_problem(cfg: &mut FlatConfig) -> Result<BinaryProblem> {
    let kind = match cfg.take("problem") {
        Some(Value::String(s)) => s,
        Some(v) => bail!("key `problem` must be a string, got {v}"),
        None => bail!("missing required key `problem` (gaussian-pair | gaussian-mixture | discrete)"),
    };
    let q1 = cfg.take_f64("q1", 0.5)?;
    match kind.as_str() {
        "gaussian-pair" => {
            let mean1 = cfg.take_f64("mean1", -1.0)?;
            let mean2 = cfg.take_f64("mean2", 1.0)?;
            let var1 = cfg.take_f64("var1", 1.0)?;
            let var2 = cfg.take_f64("var2", 1.0)?;
            Ok(BinaryProblem::new(
                q1,
                Dist::Mixture(GaussianMixture::normal_1d(mean1, var1).map_err(|e| anyhow!(e))?),
                Dist::Mixture(GaussianMixture::normal_1d(mean2, var2).map_err(|e| anyhow!(e))?),
            )
            .map_err(|e| anyhow!(e))?)
        }
        "gaussian-mixture" => {
            let p1 = parse_mixture(cfg, "p1")?;
            let p2 = parse_mixture(cfg, "p2")?;
            Ok(BinaryProblem::new(q1, Dist::Mixture(p1), Dist::Mixture(p2))
                .map_err(|e| anyhow!(e))?)
        }
        "discrete" => {
            let support = cfg.take_vec_f64("support", &[])?;
            if support.is_empty() {
                bail!("discrete problems need a `support` array");
            }
            let uniform = vec![1.0 / support.len() as f64; support.len()];
            let pmf1 = cfg.take_vec_f64("p1_pmf", &uniform)?;
            let pmf2 = cfg.take_vec_f64("p2_pmf", &uniform)?;
            let points: Vec<Vec<f64>> = support.iter().map(|&x| vec![x]).collect();
            Ok(BinaryProblem::new(
                q1,
                Dist::Discrete(DiscreteDist::new(points.clone(), pmf1).map_err(|e| anyhow!(e))?),
                Dist::Discrete(DiscreteDist::new(points, pmf2).map_err(|e| anyhow!(e))?),
            )
            .map_err(|e| anyhow!(e))?)
        }
        other => bail!("unknown problem kind `{other}` (gaussian-pair | gaussian-mixture | discrete)"),
    }
}

fn parse_mixture(cfg: &mut FlatConfig, prefix: &str) -> Result<GaussianMixture> {
    let means = cfg.take_vec_f64(&format!("{prefix}_means"), &[0.0])?;
    let vars = cfg.take_vec_f64(&format!("{prefix}_vars"), &vec![1.0; means.len()])?;
    if means.len() != vars.len() {
        bail!("{prefix}_means and {prefix}_vars must have equal length");
    }
    let default_w = vec![1.0 / means.len() as f64; means.len()];
    let weights = cfg.take_vec_f64(&format!("{prefix}_weights"), &default_w)?;
    if weights.len() != means.len() {
        bail!("{prefix}_weights length mismatch");
    }
    let parts: Vec<(f64, f64)> = means.iter().cloned().zip(vars.iter().cloned()).collect();
    if weights == default_w {
        GaussianMixture::mixture_1d(&parts).map_err(|e| anyhow!(e))
    } else {
        use bolt_core::problems::{Covariance, GaussianComponent};
        GaussianMixture::new(
            parts
                .iter()
                .zip(&weights)
                .map(|(&(m, v), &w)| GaussianComponent {
                    weight: w,
                    mean: vec![m],
                    cov: Covariance::Diagonal(vec![v]),
                })
                .collect(),
        )
        .map_err(|e| anyhow!(e))
    }
}

fn parse_target(cfg: &mut FlatConfig) -> Result<Dist> {
    let kind = cfg.take_string("target", "mixture")?;
    match kind.as_str() {
        "mixture" => {
            let means = cfg.take_vec_f64("target_means", &[-2.0, 2.0])?;
            let vars = cfg.take_vec_f64("target_vars", &vec![0.25; means.len()])?;
            if means.len() != vars.len() {
                bail!("target_means and target_vars must have equal length");
            }
            let parts: Vec<(f64, f64)> = means.into_iter().zip(vars).collect();
            Ok(Dist::Mixture(
                GaussianMixture::mixture_1d(&parts).map_err(|e| anyhow!(e))?,
            ))
        }
        "discrete" => {
            let support = cfg.take_vec_f64("target_support", &[])?;
            if support.is_empty() {
                bail!("discrete targets need `target_support`");
            }
            let uniform = vec![1.0 / support.len() as f64; support.len()];
            let pmf = cfg.take_vec_f64("target_pmf", &uniform)?;
            let points: Vec<Vec<f64>> = support.iter().map(|&x| vec![x]).collect();
            Ok(Dist::Discrete(
                DiscreteDist::new(points, pmf).map_err(|e| anyhow!(e))?,
            ))
        }
        other => bail!("unknown target kind `{other}` (mixture | discrete)"),
    }
}

// ---- estimate-bayes --------------------------------------------------------------------

#[derive(Debug)]
pub struct EstimateOutcome {
    pub csv_path: PathBuf,
    pub oracle: f64,
    pub estimate_at_largest_m: f64,
    pub variance_slope: f64,
}

/// Runs the plug-in estimator across the sample-size grid and writes the
/// bias/variance CSV. Prints a summary with the exact oracle.
pub fn cmd_estimate_bayes(mut cfg: FlatConfig) -> Result<EstimateOutcome> {
    let problem = parse_problem(&mut cfg)?;
    let m_grid = cfg.take_vec_usize("m_grid", &[100, 1_000, 10_000, 100_000])?;
    let repeats = cfg.take_usize("repeats", 100)?;
    let seed = cfg.take_u64("seed", 0)?;
    let out = PathBuf::from(cfg.take_string("out", "runs/estimate-bayes")?);
    let uhat = cfg.take_string("uhat", "exact")?;
    cfg.finish()?;

    let mode = parse_uhat(&uhat)?;
    let report = bias_variance_experiment(&problem, mode, &m_grid, repeats, seed)
        .map_err(|e| anyhow!(e))?;
    let csv_path = write_artifact(&out, "bias_variance.csv", &report.to_csv())?;

    let last = report.rows.last().expect("non-empty grid");
    println!(
        "oracle Bayes error: {:.6}; estimate at M={}: {:.6} (bias {:+.2e}); variance slope {:.3}",
        report.oracle_bayes_error, last.m, last.mean_estimate, last.bias, report.variance_slope
    );
    println!("wrote {}", csv_path.display());
    Ok(EstimateOutcome {
        csv_path,
        oracle: report.oracle_bayes_error,
        estimate_at_largest_m: last.mean_estimate,
        variance_slope: report.variance_slope,
    })
}

fn parse_uhat(spec: &str) -> Result<UhatMode> {
    if spec == "exact" {
        return Ok(UhatMode::Exact);
    }
    if let Some(eps) = spec.strip_prefix("perturbed-down:") {
        return Ok(UhatMode::PerturbedDown(eps.parse()?));
    }
    if let Some(eps) = spec.strip_prefix("perturbed-up:") {
        return Ok(UhatMode::PerturbedUp(eps.parse()?));
    }
    bail!("unknown uhat mode `{spec}` (exact | perturbed-down:ε | perturbed-up:ε)")
}

// ---- train -------------------------------------------------------------------------------

#[derive(Debug)]
pub struct TrainArtifacts {
    pub csv_path: PathBuf,
    pub svg_path: PathBuf,
    pub manifest_path: PathBuf,
    pub outcome: TrainOutcome,
}

/// Parses GAN settings from a flat config, leaving shared keys in place.
fn parse_gan_config(cfg: &mut FlatConfig) -> Result<GanConfig> {
    let seed = cfg.take_u64("seed", 0)?;
    let steps = cfg.take_usize("steps", 2000)?;
    let mut gan = GanConfig::default_1d(steps, seed);
    gan.pi = cfg.take_f64("pi", gan.pi)?;
    gan.lambda_gp = cfg.take_f64("lambda_gp", gan.lambda_gp)?;
    gan.penalty = match cfg.take_string("penalty", "two-sided-gp")?.as_str() {
        "two-sided-gp" => PenaltyKind::TwoSidedGp,
        "one-sided-gp" => PenaltyKind::OneSidedGp,
        "r1" => PenaltyKind::R1,
        "r2" => PenaltyKind::R2,
        "none" => PenaltyKind::None,
        other => bail!("unknown penalty `{other}`"),
    };
    gan.clip_c = cfg.take_opt_f64("clip_c")?;
    gan.n_critic = cfg.take_usize("n_critic", gan.n_critic)?;
    gan.batch = cfg.take_usize("batch", gan.batch)?;
    gan.eta_d = cfg.take_f64("eta_d", gan.eta_d)?;
    gan.eta_g = cfg.take_f64("eta_g", gan.eta_g)?;
    gan.beta1 = cfg.take_f64("beta1", gan.beta1)?;
    gan.beta2 = cfg.take_f64("beta2", gan.beta2)?;
    gan.ema_decay = cfg.take_opt_f64("ema_decay")?;
    gan.lazy_interval = cfg.take_usize("lazy_interval", gan.lazy_interval)?;
    gan.objective = match cfg.take_string("objective", "bolt")?.as_str() {
        "bolt" => Objective::Bolt,
        "wgan" => Objective::Wgan,
        other => bail!("unknown objective `{other}`"),
    };
    gan.log_interval = cfg.take_usize("log_interval", gan.log_interval)?;
    gan.latent_dim = cfg.take_usize("latent_dim", gan.latent_dim)?;

    let critic_hidden = cfg.take_vec_usize("critic_hidden", &[64, 64])?;
    let generator_hidden = cfg.take_vec_usize("generator_hidden", &[64, 64])?;
    let mut cw = vec![1];
    cw.extend(critic_hidden);
    cw.push(1);
    gan.critic_cfg = MlpConfig {
        layer_widths: cw,
        hidden: Activation::LeakyRelu(0.2),
        head: Head::BoundedSigmoid,
    };
    let mut gw = vec![gan.latent_dim];
    gw.extend(generator_hidden);
    gw.push(1);
    gan.generator_cfg = MlpConfig {
        layer_widths: gw,
        hidden: Activation::Relu,
        head: Head::Raw,
    };
    Ok(gan)
}

fn manifest_json(gan: &GanConfig, target_desc: &Value, command: &str) -> Value {
    let mut m = Map::new();
    m.insert("command".into(), Value::String(command.into()));
    m.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    m.insert("seed".into(), Value::from(gan.seed));
    m.insert("target".into(), target_desc.clone());
    m.insert("pi".into(), Value::from(gan.pi));
    m.insert("lambda_gp".into(), Value::from(gan.lambda_gp));
    m.insert("penalty".into(), Value::String(format!("{:?}", gan.penalty)));
    m.insert(
        "clip_c".into(),
        gan.clip_c.map_or(Value::Null, Value::from),
    );
    m.insert("n_critic".into(), Value::from(gan.n_critic as u64));
    m.insert("batch".into(), Value::from(gan.batch as u64));
    m.insert("eta_d".into(), Value::from(gan.eta_d));
    m.insert("eta_g".into(), Value::from(gan.eta_g));
    m.insert("beta1".into(), Value::from(gan.beta1));
    m.insert("beta2".into(), Value::from(gan.beta2));
    m.insert("steps".into(), Value::from(gan.steps as u64));
    m.insert(
        "ema_decay".into(),
        gan.ema_decay.map_or(Value::Null, Value::from),
    );
    m.insert("lazy_interval".into(), Value::from(gan.lazy_interval as u64));
    m.insert("objective".into(), Value::String(format!("{:?}", gan.objective)));
    m.insert("log_interval".into(), Value::from(gan.log_interval as u64));
    m.insert("latent_dim".into(), Value::from(gan.latent_dim as u64));
    m.insert(
        "critic_widths".into(),
        Value::Array(gan.critic_cfg.layer_widths.iter().map(|&w| Value::from(w as u64)).collect()),
    );
    m.insert(
        "generator_widths".into(),
        Value::Array(
            gan.generator_cfg
                .layer_widths
                .iter()
                .map(|&w| Value::from(w as u64))
                .collect(),
        ),
    );
    Value::Object(m)
}

fn target_description(target: &Dist) -> Value {
    match target {
        Dist::Mixture(m) => {
            let mut obj = Map::new();
            obj.insert("kind".into(), Value::String("mixture".into()));
            obj.insert(
                "components".into(),
                Value::Array(
                    m.components()
                        .iter()
                        .map(|c| {
                            let mut comp = Map::new();
                            comp.insert("weight".into(), Value::from(c.weight));
                            comp.insert(
                                "mean".into(),
                                Value::Array(c.mean.iter().map(|&v| Value::from(v)).collect()),
                            );
                            Value::Object(comp)
                        })
                        .collect(),
                ),
            );
            Value::Object(obj)
        }
        Dist::Discrete(d) => {
            let mut obj = Map::new();
            obj.insert("kind".into(), Value::String("discrete".into()));
            obj.insert("points".into(), Value::from(d.support().len() as u64));
            Value::Object(obj)
        }
    }
}

/// Trains one run and writes `history.csv`, `history.svg`, and
/// `manifest.json` into the output directory.
pub fn cmd_train(mut cfg: FlatConfig) -> Result<TrainArtifacts> {
    let target = parse_target(&mut cfg)?;
    let gan = parse_gan_config(&mut cfg)?;
    let out = PathBuf::from(cfg.take_string("out", "runs/train")?);
    cfg.finish()?;

    let outcome = train(&target, &gan).map_err(|e| anyhow!(e))?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let csv_path = write_artifact(&out, "history.csv", &outcome.history.to_csv())?;
    let svg_path = write_artifact(&out, "history.svg", &history_svg(&outcome.history))?;
    let manifest = manifest_json(&gan, &target_description(&target), "train");
    let manifest_path = write_artifact(
        &out,
        "manifest.json",
        &serde_json::to_string_pretty(&manifest)?,
    )?;

    let d = diagnostics(&outcome.history);
    println!(
        "steps {}: W1 {} → {}; diverged: {}; median interpolant ‖∇‖: {}",
        gan.steps,
        fmt_opt(outcome.history.initial_w1()),
        fmt_opt(outcome.history.final_w1()),
        outcome.history.diverged,
        fmt_opt(d.median_grad_norm),
    );
    println!("wrote {}", csv_path.display());
    Ok(TrainArtifacts {
        csv_path,
        svg_path,
        manifest_path,
        outcome,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.4}"))
}

// ---- SVG rendering -----------------------------------------------------------------------

/// Hand-emitted line chart of W1 / histogram-TV / Fréchet proxy against the
/// step axis. Self-contained XML with no external references.
pub fn history_svg(history: &TrainHistory) -> String {
    const W: f64 = 800.0;
    const H: f64 = 480.0;
    const ML: f64 = 60.0; // margins
    const MR: f64 = 20.0;
    const MT: f64 = 30.0;
    const MB: f64 = 50.0;

    let records = &history.records;
    let max_step = records.iter().map(|r| r.step).max().unwrap_or(1).max(1) as f64;
    let series: [(&str, &str, Vec<f64>); 3] = [
        ("w1", "#d62728", records.iter().map(|r| r.w1).collect()),
        ("tv_hist", "#1f77b4", records.iter().map(|r| r.tv_hist).collect()),
        ("frechet", "#2ca02c", records.iter().map(|r| r.frechet).collect()),
    ];
    let y_max = series
        .iter()
        .flat_map(|(_, _, v)| v.iter())
        .cloned()
        .fold(1e-937_f64, f64::max)
        .max(1e-9);

    let x_of = |step: f64| ML + (W - ML - MR) * step / max_step;
    let y_of = |v: f64| H - MB - (H - MT - MB) * (v / y_max);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR,
        H - MB
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB
    ));
    // axis labels and ticks
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">step</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0
    ));
    for k in 0..=4 {
        let frac = k as f64 / 4.0;
        let x = ML + (W - ML - MR) * frac;
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            H - MB + 18.0,
            (max_step * frac).round() as usize
        ));
        let y = H - MB - (H - MT - MB) * frac;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{:.3}</text>\n",
            ML - 6.0,
            y + 4.0,
            y_max * frac
        ));
    }
    // polylines
    for (name, color, values) in &series {
        if records.is_empty() {
            continue;
        }
        let points: Vec<String> = records
            .iter()
            .zip(values)
            .map(|(r, &v)| format!("{:.2},{:.2}", x_of(r.step as f64), y_of(v)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        let _ = name;
    }
    // legend
    for (i, (name, color, _)) in series.iter().enumerate() {
        let y = MT + 16.0 * i as f64;
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"4\" fill=\"{color}\"/>\n",
            W - MR - 120.0,
            y
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">{name}</text>\n",
            W - MR - 102.0,
            y + 6.0
        ));
    }
    if history.diverged {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"14\" fill=\"#d62728\">diverged at step {}</text>\n",
            ML + 10.0,
            MT + 10.0,
            history.diverged_at.unwrap_or(0)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

// ---- sweep --------------------------------------------------------------------------------

#[derive(Debug)]
pub struct SweepOutcome {
    pub csv_path: PathBuf,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub lambda: f64,
    pub seed: u64,
    pub final_w1: f64,
    pub final_tv: f64,
    pub final_frechet: f64,
    pub diverged: bool,
}

pub const SWEEP_CSV_HEADER: &str =
    "kind,lambda,seed,final_w1,final_tv,final_frechet,diverged,w1_mean,w1_std";

/// Trains every (λ, seed) combination as independent jobs (two at a time),
/// then writes one CSV with a row per run plus one aggregate row per λ.
pub fn cmd_sweep(mut cfg: FlatConfig) -> Result<SweepOutcome> {
    let target = parse_target(&mut cfg)?;
    let lambdas = cfg.take_vec_f64("lambdas", &[1.0, 5.0, 10.0, 20.0])?;
    let seeds: Vec<u64> = cfg
        .take_vec_f64("seeds", &[0.0, 1.0, 2.0])?
        .into_iter()
        .map(|v| v as u64)
        .collect();
    let base = parse_gan_config(&mut cfg)?;
    let out = PathBuf::from(cfg.take_string("out", "runs/sweep")?);
    cfg.finish()?;

    let mut jobs: Vec<(f64, u64)> = Vec::new();
    for &l in &lambdas {
        for &s in &seeds {
            jobs.push((l, s));
        }
    }

    // independent jobs, at most two in flight
    let mut rows: Vec<SweepRow> = Vec::with_capacity(jobs.len());
    for chunk in jobs.chunks(2) {
        let outputs: Vec<Result<SweepRow>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&(lambda, seed)| {
                    let mut gan = base.clone();
                    gan.lambda_gp = lambda;
                    gan.seed = seed;
                    let target = target.clone();
                    scope.spawn(move || -> Result<SweepRow> {
                        let outcome = train(&target, &gan).map_err(|e| anyhow!(e))?;
                        let last = outcome
                            .history
                            .records
                            .last()
                            .ok_or_else(|| anyhow!("empty history"))?;
                        Ok(SweepRow {
                            lambda,
                            seed,
                            final_w1: last.w1,
                            final_tv: last.tv_hist,
                            final_frechet: last.frechet,
                            diverged: outcome.history.diverged,
                        })
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sweep job panicked"))
                .collect()
        });
        for o in outputs {
            rows.push(o?);
        }
    }

    // deterministic order: by (λ, seed)
    rows.sort_by(|a, b| {
        a.lambda
            .partial_cmp(&b.lambda)
            .unwrap()
            .then(a.seed.cmp(&b.seed))
    });

    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&format!(
            "run,{},{},{:e},{:e},{:e},{},,\n",
            r.lambda, r.seed, r.final_w1, r.final_tv, r.final_frechet, r.diverged
        ));
    }
    for &l in &lambdas {
        let members: Vec<&SweepRow> = rows.iter().filter(|r| r.lambda == l).collect();
        let n = members.len() as f64;
        let mean = members.iter().map(|r| r.final_w1).sum::<f64>() / n;
        let std = if members.len() > 1 {
            (members
                .iter()
                .map(|r| (r.final_w1 - mean) * (r.final_w1 - mean))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt()
        } else {
            0.0
        };
        let diverged = members.iter().filter(|r| r.diverged).count();
        csv.push_str(&format!("aggregate,{l},,,,,{diverged},{mean:e},{std:e}\n"));
    }
    let csv_path = write_artifact(&out, "sweep.csv", &csv)?;
    println!("wrote {} ({} runs + {} aggregates)", csv_path.display(), rows.len(), lambdas.len());
    Ok(SweepOutcome { csv_path, rows })
}
