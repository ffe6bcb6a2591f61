use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, DATA_ENV};
use crate::ShellError;

#[derive(Debug, Parser)]
#[command(name = "toponet", version, about = "Regression-network charts, figures and falsification runs")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags that override the TOML configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory of `<SYMBOL>.csv` tick files.
    #[arg(long, global = true, env = DATA_ENV)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Bar period in minutes.
    #[arg(long, global = true)]
    pub res: Option<i64>,
    /// Last tick timestamp considered, epoch ms.
    #[arg(long, global = true)]
    pub date: Option<i64>,
    /// Interaction tolerance, fraction of the view price range.
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true)]
    pub view_bars: Option<usize>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig, ShellError> {
        let mut config = RunConfig::load(self.config.as_deref())?;
        if let Some(d) = &self.data {
            config.data_root = d.clone();
        }
        if let Some(o) = &self.out {
            config.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(r) = self.res {
            config.resolution_minutes = r;
        }
        if self.date.is_some() {
            config.date = self.date;
        }
        if let Some(t) = self.tau {
            config.chart.tau = t;
        }
        if let Some(v) = self.view_bars {
            config.chart.view_bars = v;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Aggregate ticks into time bars, or volume bars with `--nvb`.
    Bars {
        symbol: String,
        /// Volume quota per bar.
        #[arg(long)]
        nvb: Option<f64>,
    },
    /// Build the network over every bar and write its binary export.
    Build {
        symbol: String,
        #[arg(long, default_value_t = 3)]
        subtype: usize,
    },
    /// Render the latest chart to PNG (or SVG).
    Render {
        symbol: String,
        #[arg(long, default_value_t = 3)]
        subtype: usize,
        #[arg(long)]
        svg: bool,
    },
    /// Detected figures with extrapolations.
    Figures {
        symbol: String,
        #[arg(long, default_value_t = 3)]
        subtype: usize,
    },
    /// Extrema, interactions and the chart verdict.
    Qualify {
        symbol: String,
        #[arg(long, default_value_t = 3)]
        subtype: usize,
    },
    /// Interaction counts with prices displaced vertically.
    ShiftTest {
        symbol: String,
        #[arg(long, default_value_t = 3)]
        subtype: usize,
        /// Comma-separated shifts, fractions of the view range.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        deltas: Option<Vec<f64>>,
    },
    /// Batch qualification protocols.
    #[command(subcommand)]
    Protocol(ProtocolCommand),
    /// Real versus surrogate qualification through the same pipeline.
    Surrogate {
        symbol: String,
        #[arg(long, default_value_t = 3)]
        subtype: usize,
    },
    /// HTTP JSON service.
    Serve {
        #[arg(long)]
        addr: Option<String>,
    },
}

#[derive(Debug, Clone, Subcommand)]
pub enum ProtocolCommand {
    /// One chart per instrument at the same date, random subtypes.
    Simultaneity {
        /// Instruments; defaults to the configured universe or all data.
        symbols: Vec<String>,
    },
    /// Every configured subtype at 1, 10, 60 and 360 minute bars.
    Totality { symbol: String },
    /// Adjacent windows of one network.
    Consecutiveness {
        symbol: String,
        #[arg(long)]
        subtype: Option<usize>,
        #[arg(long)]
        windows: Option<usize>,
    },
}
