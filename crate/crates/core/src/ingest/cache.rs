//! Columnar binary bar cache.
//!
//! Layout (little-endian): 16-byte magic, version byte, granularity tag byte,
//! 8-byte granularity payload, `u64` bar count, then one contiguous column
//! each for `t_start`, `t_end` (`i64`) and `M`, `d`, `volume` (`f64`).
//! Bar indices are implicit.

use std::io::{Read, Write};

use super::{Bar, BarSeries, Granularity, IngestError};

pub const BAR_CACHE_MAGIC: &[u8; 16] = b"TOPONET\0BARCACHE";
pub const BAR_CACHE_VERSION: u8 = 1;

pub fn write_bar_cache<W: Write>(series: &BarSeries, mut out: W) -> Result<(), IngestError> {
    out.write_all(BAR_CACHE_MAGIC)?;
    out.write_all(&[BAR_CACHE_VERSION])?;
    let (tag, payload) = match series.granularity {
        Granularity::Time { period_ms } => (0u8, period_ms.to_le_bytes()),
        Granularity::Volume { quota } => (1u8, quota.to_bits().to_le_bytes()),
        Granularity::Raw => (2u8, [0u8; 8]),
    };
    out.write_all(&[tag])?;
    out.write_all(&payload)?;
    out.write_all(&(series.bars.len() as u64).to_le_bytes())?;

    let mut buf = Vec::with_capacity(series.bars.len() * 8);
    let mut column = |f: &dyn Fn(&Bar) -> [u8; 8], out: &mut W| -> std::io::Result<()> {
        buf.clear();
        for b in &series.bars {
            buf.extend_from_slice(&f(b));
        }
        out.write_all(&buf)
    };
    column(&|b| b.t_start.to_le_bytes(), &mut out)?;
    column(&|b| b.t_end.to_le_bytes(), &mut out)?;
    column(&|b| b.m.to_bits().to_le_bytes(), &mut out)?;
    column(&|b| b.d.to_bits().to_le_bytes(), &mut out)?;
    column(&|b| b.volume.to_bits().to_le_bytes(), &mut out)?;
    Ok(())
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64, IngestError> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_bar_cache<R: Read>(mut input: R) -> Result<BarSeries, IngestError> {
    let mut magic = [0u8; 16];
    input.read_exact(&mut magic)?;
    if &magic != BAR_CACHE_MAGIC {
        return Err(IngestError::Cache("bad magic".into()));
    }
    let mut head = [0u8; 2];
    input.read_exact(&mut head)?;
    if head[0] != BAR_CACHE_VERSION {
        return Err(IngestError::Cache(format!("unsupported version {}", head[0])));
    }
    let payload = read_u64(&mut input)?;
    let granularity = match head[1] {
        0 => Granularity::Time {
            period_ms: payload as i64,
        },
        1 => Granularity::Volume {
            quota: f64::from_bits(payload),
        },
        2 => Granularity::Raw,
        t => return Err(IngestError::Cache(format!("unknown granularity tag {t}"))),
    };
    let n = read_u64(&mut input)? as usize;
    let mut columns = Vec::with_capacity(5);
    for _ in 0..5 {
        let mut col = Vec::with_capacity(n);
        for _ in 0..n {
            col.push(read_u64(&mut input)?);
        }
        columns.push(col);
    }
    let bars = (0..n)
        .map(|i| Bar {
            index: i,
            t_start: columns[0][i] as i64,
            t_end: columns[1][i] as i64,
            m: f64::from_bits(columns[2][i]),
            d: f64::from_bits(columns[3][i]),
            volume: f64::from_bits(columns[4][i]),
        })
        .collect();
    Ok(BarSeries { bars, granularity })
}
