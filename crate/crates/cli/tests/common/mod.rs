#![allow(dead_code)]

use std::path::{Path, PathBuf};

use toponet_cli::RunConfig;

pub const FIXTURE_CONFIG: &str = r#"
resolution_minutes = 1440
seed = 3

[chart]
view_bars = 400

[[chart.schedules]]
order = 2
count = 200
first = 6
last = 600
spacing = 1.0

[render]
width = 480
height = 270
"#;

pub fn fixture_csv() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/goog_daily_ticks.csv")
}

/// A data root with `GOOG.csv` and a config file pointing at it.
pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("data")).unwrap();
        std::fs::copy(fixture_csv(), dir.path().join("data/GOOG.csv")).unwrap();
        let toml = format!(
            "data_root = {:?}\noutput_dir = {:?}\n{FIXTURE_CONFIG}",
            dir.path().join("data"),
            dir.path().join("out")
        );
        std::fs::write(dir.path().join("run.toml"), toml).unwrap();
        Self { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn config_path(&self) -> PathBuf {
        self.path().join("run.toml")
    }

    pub fn config(&self) -> RunConfig {
        RunConfig::from_toml(&std::fs::read_to_string(self.config_path()).unwrap()).unwrap()
    }
}
