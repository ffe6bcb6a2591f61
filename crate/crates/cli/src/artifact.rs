//! Output files. Each one carries the hash of the configuration that
//! produced it: JSON and text reports in their body, PNG in a `tEXt` chunk,
//! SVG in `<metadata>`, and binary files behind a small envelope.
//!
//! Envelope layout: 16-byte magic, 32-byte SHA-256 config hash, payload.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use toponet::render::Raster;

use crate::config::{hex, RunConfig};
use crate::ShellError;

pub const ENVELOPE_MAGIC: &[u8; 16] = b"TOPONET\0ARTIFACT";
pub const PNG_HASH_KEYWORD: &str = "toponet-config-sha256";

#[derive(Serialize)]
struct JsonArtifact<'a, T: Serialize> {
    kind: &'a str,
    config_hash: String,
    config: &'a RunConfig,
    result: &'a T,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ShellError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("partial");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// `{kind, config_hash, config, result}` as pretty JSON.
pub fn json_bytes<T: Serialize>(kind: &str, config: &RunConfig, result: &T) -> Result<Vec<u8>, ShellError> {
    let doc = JsonArtifact {
        kind,
        config_hash: config.hash(),
        config,
        result,
    };
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize>(path: &Path, kind: &str, config: &RunConfig, result: &T) -> Result<PathBuf, ShellError> {
    write_atomic(path, &json_bytes(kind, config, result)?)?;
    Ok(path.to_path_buf())
}

pub fn write_text(path: &Path, config: &RunConfig, body: &str) -> Result<PathBuf, ShellError> {
    let text = format!("config sha256 {}\n{body}", config.hash());
    write_atomic(path, text.as_bytes())?;
    Ok(path.to_path_buf())
}

pub fn write_enveloped(path: &Path, config: &RunConfig, payload: &[u8]) -> Result<PathBuf, ShellError> {
    let mut bytes = Vec::with_capacity(48 + payload.len());
    bytes.extend_from_slice(ENVELOPE_MAGIC);
    bytes.extend_from_slice(&config.hash_bytes());
    bytes.extend_from_slice(payload);
    write_atomic(path, &bytes)?;
    Ok(path.to_path_buf())
}

/// Splits an enveloped file into its hex config hash and payload.
pub fn read_enveloped(path: &Path) -> Result<(String, Vec<u8>), ShellError> {
    let mut bytes = std::fs::read(path)?;
    if bytes.len() < 48 || &bytes[..16] != ENVELOPE_MAGIC {
        return Err(ShellError::Data(format!("{} is not a toponet artifact", path.display())));
    }
    let hash = hex(&bytes[16..48]);
    bytes.drain(..48);
    Ok((hash, bytes))
}

pub fn png_bytes(raster: &Raster, config: &RunConfig) -> Result<Vec<u8>, ShellError> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, raster.width, raster.height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        encoder
            .add_text_chunk(PNG_HASH_KEYWORD.to_string(), config.hash())
            .map_err(|e| ShellError::Data(e.to_string()))?;
        let mut writer = encoder.write_header().map_err(|e| ShellError::Data(e.to_string()))?;
        writer
            .write_image_data(&raster.pixels)
            .map_err(|e| ShellError::Data(e.to_string()))?;
    }
    Ok(out)
}

pub fn write_png(path: &Path, raster: &Raster, config: &RunConfig) -> Result<PathBuf, ShellError> {
    write_atomic(path, &png_bytes(raster, config)?)?;
    Ok(path.to_path_buf())
}

pub fn write_svg(path: &Path, svg: &str, config: &RunConfig) -> Result<PathBuf, ShellError> {
    let meta = format!("<metadata>config-sha256 {}</metadata>\n", config.hash());
    let doc = match svg.find('>') {
        Some(i) => format!("{}\n{meta}{}", &svg[..=i], svg[i + 1..].trim_start_matches('\n')),
        None => return Err(ShellError::Data("renderer produced no svg element".into())),
    };
    write_atomic(path, doc.as_bytes())?;
    Ok(path.to_path_buf())
}
