//! Run configuration. Every field has a default, so an empty TOML file (or
//! none at all) is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use toponet::ingest::{CsvFormat, SurrogateMethod};
use toponet::render::RenderStyle;
use toponet::validate::{ChartConfig, MIN_SURROGATE_SEEDS};

use crate::ShellError;

/// Environment variable naming the tick data directory.
pub const DATA_ENV: &str = "TOPONET_DATA";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory of `<SYMBOL>.csv` tick files.
    pub data_root: PathBuf,
    pub output_dir: PathBuf,
    pub csv: CsvFormat,
    /// Bar period for single-resolution commands.
    pub resolution_minutes: i64,
    /// Last tick timestamp (epoch ms) considered; `None` uses all data.
    pub date: Option<i64>,
    pub seed: u64,
    pub chart: ChartConfig,
    pub shift_deltas: Vec<f64>,
    pub protocol: ProtocolParams,
    pub surrogate: SurrogateParams,
    pub extrapolation: ExtrapolationParams,
    pub render: RenderStyle,
    pub server: ServerParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_root: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            csv: CsvFormat::default(),
            resolution_minutes: 1440,
            date: None,
            seed: 0,
            chart: ChartConfig::default(),
            shift_deltas: vec![0.0, 0.01, -0.01, 0.02, -0.02, 0.05, -0.05],
            protocol: ProtocolParams::default(),
            surrogate: SurrogateParams::default(),
            extrapolation: ExtrapolationParams::default(),
            render: RenderStyle::default(),
            server: ServerParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// Simultaneity universe; empty means every instrument under the data root.
    pub universe: Vec<String>,
    /// Subtype of consecutiveness runs.
    pub subtype: usize,
    /// Adjacent windows `W` of consecutiveness runs.
    pub windows: usize,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            universe: Vec::new(),
            subtype: 3,
            windows: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateParams {
    pub methods: Vec<SurrogateMethod>,
    /// Seeds per method, counted up from the run seed.
    pub seeds: usize,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            methods: vec![SurrogateMethod::ShuffledReturns, SurrogateMethod::PhaseRandomized],
            seeds: MIN_SURROGATE_SEEDS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtrapolationParams {
    /// Bars projected past a figure's last column.
    pub horizon: usize,
    /// Polynomial order, 1 or 2.
    pub order: usize,
}

impl Default for ExtrapolationParams {
    fn default() -> Self {
        Self { horizon: 20, order: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerParams {
    pub addr: String,
    /// Vertices per curve in `/network` responses.
    pub max_points: usize,
    /// Seconds between checks for changed tick files.
    pub refresh_seconds: u64,
}

impl Default for ServerParams {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:8750".to_string(),
            max_points: 600,
            refresh_seconds: 10,
        }
    }
}

impl RunConfig {
    /// Reads `path` if given, then applies [`DATA_ENV`].
    pub fn load(path: Option<&Path>) -> Result<Self, ShellError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ShellError::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        if let Some(root) = std::env::var_os(DATA_ENV) {
            config.data_root = PathBuf::from(root);
        }
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self, ShellError> {
        toml::from_str(text).map_err(|e| ShellError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, ShellError> {
        toml::to_string_pretty(self).map_err(|e| ShellError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ShellError> {
        self.chart.validate()?;
        self.render.validate()?;
        if self.resolution_minutes <= 0 {
            return Err(ShellError::Config("resolution_minutes must be positive".into()));
        }
        if !(1..=2).contains(&self.extrapolation.order) {
            return Err(ShellError::Config("extrapolation order must be 1 or 2".into()));
        }
        if self.protocol.windows == 0 {
            return Err(ShellError::Config("protocol windows must be positive".into()));
        }
        if self.surrogate.methods.is_empty() {
            return Err(ShellError::Config("no surrogate methods".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding of the effective configuration.
    pub fn hash_bytes(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).into()
    }

    pub fn hash(&self) -> String {
        hex(&self.hash_bytes())
    }

    pub fn surrogate_seeds(&self) -> Vec<u64> {
        (0..self.surrogate.seeds as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.seed = 99;
        c.chart.tau = 0.03;
        c.date = Some(1_200_000_000_000);
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn partial_toml_overrides() {
        let c = RunConfig::from_toml("seed = 7\n[chart]\ntau = 0.05\n[server]\nmax_points = 10\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.chart.tau, 0.05);
        assert_eq!(c.chart.view_bars, ChartConfig::default().view_bars);
        assert_eq!(c.server.max_points, 10);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::from_toml("sede = 7"), Err(ShellError::Config(_))));
    }

    #[test]
    fn hash_tracks_every_field() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.render.curve_alpha += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn invalid_values_rejected() {
        let mut c = RunConfig::default();
        c.extrapolation.order = 3;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.chart.tau = -1.0;
        assert!(c.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
