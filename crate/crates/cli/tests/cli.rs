//! Command-level behavior: deterministic artifacts, exact CSV schemas,
//! well-formed self-contained SVG output, config validation, and sweep
//! aggregation.

use serde_json::{json, Value};
use tempfile::TempDir;

use bolt_cli::{
    cmd_estimate_bayes, cmd_sweep, cmd_train, cmd_verify, FlatConfig, SWEEP_CSV_HEADER,
};
use bolt_core::gan::TrainHistory;

fn config_from(value: Value) -> FlatConfig {
    match value {
        Value::Object(map) => FlatConfig::from_map(map),
        _ => panic!("test config must be an object"),
    }
}

fn train_config(out: &std::path::Path, seed: u64, steps: usize) -> FlatConfig {
    config_from(json!({
        "steps": steps,
        "seed": seed,
        "log_interval": 4,
        "out": out.to_str().unwrap(),
    }))
}

#[test]
fn train_twice_same_seed_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = cmd_train(train_config(&dir.path().join("a"), 7, 8)).unwrap();
    let b = cmd_train(train_config(&dir.path().join("b"), 7, 8)).unwrap();
    let bytes_a = std::fs::read(&a.csv_path).unwrap();
    let bytes_b = std::fs::read(&b.csv_path).unwrap();
    assert_eq!(bytes_a, bytes_b);
    // manifests and plots agree too
    assert_eq!(
        std::fs::read(&a.svg_path).unwrap(),
        std::fs::read(&b.svg_path).unwrap()
    );
    assert_eq!(
        std::fs::read(&a.manifest_path).unwrap(),
        std::fs::read(&b.manifest_path).unwrap()
    );

    let c = cmd_train(train_config(&dir.path().join("c"), 8, 8)).unwrap();
    assert_ne!(bytes_a, std::fs::read(&c.csv_path).unwrap());
}

#[test]
fn train_csv_header_matches_schema() {
    let dir = TempDir::new().unwrap();
    let a = cmd_train(train_config(dir.path(), 1, 4)).unwrap();
    let text = std::fs::read_to_string(&a.csv_path).unwrap();
    assert_eq!(text.lines().next().unwrap(), TrainHistory::CSV_HEADER);
    // zero steps → header + single initial-evaluation row
    let dir2 = TempDir::new().unwrap();
    let z = cmd_train(train_config(dir2.path(), 1, 0)).unwrap();
    let text = std::fs::read_to_string(&z.csv_path).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("0,"));
}

/// Minimal XML well-formedness check: balanced tags, quoted attributes.
fn assert_well_formed_xml(text: &str) {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('<') {
        let end = rest[start..].find('>').expect("unclosed tag") + start;
        let tag = &rest[start + 1..end];
        if let Some(name) = tag.strip_prefix('/') {
            let open = stack.pop().unwrap_or_else(|| panic!("stray closing tag {name}"));
            assert_eq!(open, name.trim(), "mismatched closing tag");
        } else if !tag.ends_with('/') && !tag.starts_with('?') && !tag.starts_with('!') {
            let name = tag.split_whitespace().next().unwrap().to_string();
            stack.push(name);
        }
        // attribute quotes must balance within the tag
        assert_eq!(tag.matches('"').count() % 2, 0, "unbalanced quotes in <{tag}>");
        rest = &rest[end + 1..];
    }
    assert!(stack.is_empty(), "unclosed tags: {stack:?}");
}

#[test]
fn svg_is_well_formed_and_self_contained() {
    let dir = TempDir::new().unwrap();
    let a = cmd_train(train_config(dir.path(), 3, 8)).unwrap();
    let svg = std::fs::read_to_string(&a.svg_path).unwrap();
    assert_well_formed_xml(&svg);
    assert!(svg.starts_with("<svg"));
    // no external loads
    assert!(!svg.contains("<image"));
    assert!(!svg.contains("<script"));
    assert!(!svg.contains("href"));
}

#[test]
fn estimate_bayes_gaussian_pair_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = config_from(json!({
        "problem": "gaussian-pair",
        "m_grid": [200, 2000],
        "repeats": 20,
        "seed": 5,
        "out": dir.path().to_str().unwrap(),
    }));
    let outcome = cmd_estimate_bayes(cfg).unwrap();
    assert!((outcome.oracle - 0.15865525393145707).abs() < 1e-9);
    assert!((outcome.estimate_at_largest_m - outcome.oracle).abs() < 0.05);
    let text = std::fs::read_to_string(&outcome.csv_path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "M,mean,bias,variance,repeats");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn estimate_bayes_disjoint_discrete_is_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = config_from(json!({
        "problem": "discrete",
        "support": [0.0, 1.0],
        "p1_pmf": [1.0, 0.0],
        "p2_pmf": [0.0, 1.0],
        "m_grid": [500],
        "repeats": 5,
        "seed": 1,
        "out": dir.path().to_str().unwrap(),
    }));
    let outcome = cmd_estimate_bayes(cfg).unwrap();
    assert_eq!(outcome.oracle, 0.0);
    assert!(outcome.estimate_at_largest_m.abs() <= 1e-12);
}

#[test]
fn estimate_bayes_requires_problem_key() {
    let cfg = config_from(json!({ "m_grid": [100], "repeats": 5 }));
    let err = cmd_estimate_bayes(cfg).unwrap_err().to_string();
    assert!(err.contains("problem"), "unexpected error: {err}");
}

#[test]
fn unknown_keys_are_rejected_before_running() {
    let cfg = config_from(json!({ "steps": 1, "definitely_not_a_key": 1 }));
    let err = cmd_train(cfg).unwrap_err().to_string();
    assert!(err.contains("definitely_not_a_key"), "unexpected error: {err}");

    let negative = config_from(json!({ "steps": 1, "lambda_gp": -3.0 }));
    assert!(cmd_train(negative).is_err());
}

#[test]
fn overrides_parse_key_value_pairs() {
    let cfg = FlatConfig::load(None, &["--steps=3".into(), "seed=9".into()]).unwrap();
    // a config with only known keys passes validation inside cmd_train
    let dir = TempDir::new().unwrap();
    let mut map = match serde_json::to_value(serde_json::Map::new()).unwrap() {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    map.insert("out".into(), json!(dir.path().to_str().unwrap()));
    map.insert("log_interval".into(), json!(2));
    drop(cfg);
    let cfg = FlatConfig::load(
        None,
        &[
            "--steps=3".into(),
            "seed=9".into(),
            format!("out={}", dir.path().display()),
            "log_interval=2".into(),
        ],
    )
    .unwrap();
    let artifacts = cmd_train(cfg).unwrap();
    let text = std::fs::read_to_string(&artifacts.csv_path).unwrap();
    // steps=3 with log interval 2 → records at 0, 2, 3
    assert_eq!(text.lines().count(), 4);

    assert!(FlatConfig::load(None, &["badpair".into()]).is_err());
}

#[test]
fn sweep_counts_rows_and_aggregates() {
    let dir = TempDir::new().unwrap();
    let cfg = config_from(json!({
        "lambdas": [1.0, 5.0, 10.0, 20.0],
        "seeds": [0, 1, 2],
        "steps": 4,
        "log_interval": 4,
        "out": dir.path().to_str().unwrap(),
    }));
    let outcome = cmd_sweep(cfg).unwrap();
    assert_eq!(outcome.rows.len(), 12);
    let text = std::fs::read_to_string(&outcome.csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], SWEEP_CSV_HEADER);
    assert_eq!(lines.iter().filter(|l| l.starts_with("run,")).count(), 12);
    assert_eq!(lines.iter().filter(|l| l.starts_with("aggregate,")).count(), 4);

    // aggregate mean equals the arithmetic mean of member rows
    for lambda in [1.0, 5.0, 10.0, 20.0] {
        let members: Vec<f64> = outcome
            .rows
            .iter()
            .filter(|r| r.lambda == lambda)
            .map(|r| r.final_w1)
            .collect();
        let mean = members.iter().sum::<f64>() / members.len() as f64;
        let agg_line = lines
            .iter()
            .find(|l| l.starts_with(&format!("aggregate,{lambda}")))
            .unwrap();
        let mean_field: f64 = agg_line.split(',').nth(7).unwrap().parse().unwrap();
        assert!((mean_field - mean).abs() < 1e-12);
    }
}

#[test]
fn sweep_single_cell_matches_train() {
    let dir = TempDir::new().unwrap();
    let sweep_cfg = config_from(json!({
        "lambdas": [10.0],
        "seeds": [4],
        "steps": 6,
        "log_interval": 3,
        "out": dir.path().join("sweep").to_str().unwrap(),
    }));
    let sweep = cmd_sweep(sweep_cfg).unwrap();
    let train_cfg = config_from(json!({
        "lambda_gp": 10.0,
        "seed": 4,
        "steps": 6,
        "log_interval": 3,
        "out": dir.path().join("train").to_str().unwrap(),
    }));
    let train = cmd_train(train_cfg).unwrap();
    let last = train.outcome.history.records.last().unwrap();
    let row = &sweep.rows[0];
    assert_eq!(row.final_w1, last.w1);
    assert_eq!(row.final_tv, last.tv_hist);
    assert_eq!(row.final_frechet, last.frechet);
}

#[test]
fn verify_filter_and_exit_codes() {
    assert_eq!(cmd_verify(Some("theorem3")).unwrap(), 0);
    let err = cmd_verify(Some("not-a-suite")).unwrap_err().to_string();
    assert!(err.contains("available"), "unexpected error: {err}");
}
