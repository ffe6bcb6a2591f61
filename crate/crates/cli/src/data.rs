//! Tick files under the data root and the on-disk bar cache.
//!
//! Each instrument is one `<SYMBOL>.csv`. Time bars are cached next to the
//! outputs and rebuilt whenever the source file is newer than the cache.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use toponet::ingest::{read_bar_cache, write_bar_cache, BarSeries, CsvFormat, Tick};
use toponet::validate::{chart_bars, Instrument};

use crate::config::{hex, RunConfig};
use crate::ShellError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentInfo {
    pub symbol: String,
    pub bytes: u64,
    /// Source modification time, epoch ms.
    pub modified_ms: i64,
}

#[derive(Debug, Clone)]
pub struct DataStore {
    root: PathBuf,
    cache_dir: PathBuf,
    csv: CsvFormat,
}

fn valid_symbol(symbol: &str) -> bool {
    !symbol.is_empty()
        && !symbol.starts_with('.')
        && symbol.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

fn epoch_ms(t: SystemTime) -> i64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_millis() as i64).unwrap_or(0)
}

impl DataStore {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            root: config.data_root.clone(),
            cache_dir: config.output_dir.join("cache"),
            csv: config.csv.clone(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn source_path(&self, symbol: &str) -> Result<PathBuf, ShellError> {
        if !valid_symbol(symbol) {
            return Err(ShellError::Data(format!("invalid symbol `{symbol}`")));
        }
        let path = self.root.join(format!("{symbol}.csv"));
        if !path.is_file() {
            return Err(ShellError::NotFound(format!("no data for `{symbol}` under {}", self.root.display())));
        }
        Ok(path)
    }

    pub fn source_modified(&self, symbol: &str) -> Result<SystemTime, ShellError> {
        Ok(std::fs::metadata(self.source_path(symbol)?)?.modified()?)
    }

    /// Instruments under the data root, sorted by symbol.
    pub fn instruments(&self) -> Result<Vec<InstrumentInfo>, ShellError> {
        let entries = std::fs::read_dir(&self.root)
            .map_err(|e| ShellError::Data(format!("cannot list {}: {e}", self.root.display())))?;
        let mut out = Vec::new();
        for entry in entries {
            let entry = entry?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("csv") {
                continue;
            }
            let Some(symbol) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            if !valid_symbol(symbol) {
                continue;
            }
            let meta = entry.metadata()?;
            out.push(InstrumentInfo {
                symbol: symbol.to_string(),
                bytes: meta.len(),
                modified_ms: epoch_ms(meta.modified()?),
            });
        }
        out.sort_by(|a, b| a.symbol.cmp(&b.symbol));
        Ok(out)
    }

    pub fn ticks(&self, symbol: &str) -> Result<Vec<Tick>, ShellError> {
        let file = std::fs::File::open(self.source_path(symbol)?)?;
        toponet::ingest::load_ticks(std::io::BufReader::new(file), &self.csv)
            .map_err(|e| ShellError::Data(format!("{symbol}: {e}")))
    }

    pub fn instrument(&self, symbol: &str) -> Result<Instrument, ShellError> {
        Ok(Instrument {
            symbol: symbol.to_string(),
            ticks: self.ticks(symbol)?,
        })
    }

    fn cache_path(&self, symbol: &str, resolution_minutes: i64) -> PathBuf {
        let format = serde_json::to_vec(&self.csv).expect("csv format serializes");
        let tag = hex(&Sha256::digest(&format)[..4]);
        self.cache_dir.join(format!("{symbol}_{resolution_minutes}m_{tag}.bars"))
    }

    /// Time bars up to `date`. Full-history requests go through the cache.
    pub fn bars(&self, symbol: &str, resolution_minutes: i64, date: Option<i64>) -> Result<BarSeries, ShellError> {
        let source_time = self.source_modified(symbol)?;
        let cache = self.cache_path(symbol, resolution_minutes);
        if date.is_none() {
            let fresh = std::fs::metadata(&cache)
                .and_then(|m| m.modified())
                .map(|t| t >= source_time)
                .unwrap_or(false);
            if fresh {
                if let Ok(series) = std::fs::File::open(&cache)
                    .map_err(ShellError::from)
                    .and_then(|f| read_bar_cache(std::io::BufReader::new(f)).map_err(ShellError::from))
                {
                    return Ok(series);
                }
            }
        }
        let series = chart_bars(symbol, &self.ticks(symbol)?, resolution_minutes, date)?;
        if date.is_none() {
            self.store_cache(&cache, &series)?;
        }
        Ok(series)
    }

    fn store_cache(&self, path: &Path, series: &BarSeries) -> Result<(), ShellError> {
        std::fs::create_dir_all(&self.cache_dir)?;
        let tmp = path.with_extension(format!("partial{}", std::process::id()));
        {
            let file = std::fs::File::create(&tmp)?;
            write_bar_cache(series, std::io::BufWriter::new(file))?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}
