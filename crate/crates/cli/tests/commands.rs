mod common;

use std::process::Command;

use common::Workspace;
use toponet::ingest::read_bar_cache;
use toponet::network::{build_network, Network};
use toponet_cli::artifact::read_enveloped;
use toponet_cli::commands::latest_chart;
use toponet_cli::DataStore;

fn toponet(ws: &Workspace, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_toponet"))
        .arg("--config")
        .arg(ws.config_path())
        .args(args)
        .env_remove("TOPONET_DATA")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn single_path(out: &std::process::Output) -> std::path::PathBuf {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "{text}");
    lines[0].into()
}

#[test]
fn unknown_command_exits_nonzero() {
    let ws = Workspace::new();
    let out = toponet(&ws, &["frobnicate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("frobnicate"));
}

#[test]
fn missing_data_is_reported() {
    let ws = Workspace::new();
    let out = toponet(&ws, &["qualify", "NOPE", "--subtype", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NOPE"));
    let out = toponet(&ws, &["qualify", "GOOG", "--subtype", "4"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("TN4"));
}

#[test]
fn build_reloads_bit_identically() {
    let ws = Workspace::new();
    let path = single_path(&toponet(&ws, &["build", "GOOG", "--subtype", "2"]));
    let config = ws.config();
    let (hash, payload) = read_enveloped(&path).unwrap();
    assert_eq!(hash, config.hash());
    let loaded = Network::read_binary(payload.as_slice()).unwrap();

    let series = DataStore::new(&config).bars("GOOG", 1440, None).unwrap();
    let direct = build_network(&series, &config.chart.schedule(2).unwrap()).unwrap();
    assert_eq!(loaded, direct);
    let mut again = Vec::new();
    loaded.write_binary(&mut again).unwrap();
    assert_eq!(again, payload);
}

#[test]
fn qualify_matches_direct_call() {
    let ws = Workspace::new();
    let path = single_path(&toponet(&ws, &["qualify", "GOOG", "--subtype", "2"]));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let config = ws.config();
    assert_eq!(doc["kind"], "qualify");
    assert_eq!(doc["config_hash"], config.hash());
    assert_eq!(serde_json::from_value::<toponet_cli::RunConfig>(doc["config"].clone()).unwrap(), config);

    let series = DataStore::new(&config).bars("GOOG", 1440, None).unwrap();
    let (_, chart) = latest_chart("GOOG", 1440, &series, 2, &config.chart).unwrap();
    assert_eq!(doc["result"], serde_json::to_value(&chart).unwrap());

    // the same verdict from the individual interaction steps
    let view = &series.bars[chart.label.window.from..chart.label.window.to];
    let range = toponet::interact::price_range(view);
    let extrema = toponet::interact::detect_extrema(view, config.chart.prominence, config.chart.min_separation).unwrap();
    let scored = toponet::interact::score_interactions(&extrema, &chart.figures, config.chart.tau, range);
    let verdict = toponet::interact::qualify_chart(&scored, config.chart.qualification_threshold, config.chart.min_extrema);
    assert_eq!(serde_json::to_value(verdict).unwrap(), doc["result"]["qualification"]);
}

#[test]
fn reruns_are_byte_identical() {
    let ws = Workspace::new();
    for args in [
        &["qualify", "GOOG", "--subtype", "2"][..],
        &["figures", "GOOG", "--subtype", "2"],
        &["shift-test", "GOOG", "--subtype", "2", "--deltas", "0,0.01,-0.01"],
        &["render", "GOOG", "--subtype", "2"],
        &["render", "GOOG", "--subtype", "2", "--svg"],
        &["bars", "GOOG"],
    ] {
        let path = single_path(&toponet(&ws, args));
        let first = std::fs::read(&path).unwrap();
        let second = std::fs::read(single_path(&toponet(&ws, args))).unwrap();
        assert_eq!(first, second, "{args:?}");
        let hash = ws.config().hash();
        let embedded = first.windows(hash.len()).any(|w| w == hash.as_bytes())
            || read_enveloped(&path).map(|(h, _)| h == hash).unwrap_or(false);
        assert!(embedded, "{args:?} lacks the config hash");
    }
}

#[test]
fn bars_artifact_holds_daily_series() {
    let ws = Workspace::new();
    let path = single_path(&toponet(&ws, &["bars", "GOOG"]));
    let (_, payload) = read_enveloped(&path).unwrap();
    let series = read_bar_cache(payload.as_slice()).unwrap();
    assert_eq!(series.len(), 1047);
    let nvb = single_path(&toponet(&ws, &["bars", "GOOG", "--nvb", "50000000"]));
    assert!(nvb.file_name().unwrap().to_str().unwrap().contains("nvb"));
}

#[test]
fn flag_changes_the_hash() {
    let ws = Workspace::new();
    let a = single_path(&toponet(&ws, &["qualify", "GOOG", "--subtype", "2"]));
    let a: serde_json::Value = serde_json::from_slice(&std::fs::read(a).unwrap()).unwrap();
    let b = single_path(&toponet(&ws, &["--tau", "0.03", "qualify", "GOOG", "--subtype", "2"]));
    let b: serde_json::Value = serde_json::from_slice(&std::fs::read(b).unwrap()).unwrap();
    assert_ne!(a["config_hash"], b["config_hash"]);
    assert_eq!(b["config"]["chart"]["tau"], 0.03);
}

#[test]
fn protocol_reports_are_written() {
    let ws = Workspace::new();
    std::fs::copy(common::fixture_csv(), ws.path().join("data/GOOG2.csv")).unwrap();
    let out = toponet(&ws, &["protocol", "simultaneity"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let paths: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(paths.len(), 2);
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&paths[0]).unwrap()).unwrap();
    assert_eq!(doc["result"]["protocol"], "simultaneity");
    assert_eq!(doc["result"]["charts"].as_array().unwrap().len(), 2);
    let text = std::fs::read_to_string(&paths[1]).unwrap();
    assert!(text.starts_with(&format!("config sha256 {}", ws.config().hash())));

    let out = toponet(&ws, &["protocol", "consecutiveness", "GOOG", "--subtype", "2", "--windows", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = toponet(&ws, &["protocol", "totality", "GOOG"]);
    assert_eq!(out.status.code(), Some(1), "daily ticks cannot make minute bars");
}
