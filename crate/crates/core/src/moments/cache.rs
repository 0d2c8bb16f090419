use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{fingerprint, Backend, McMeta, McTailStats, MomentMatrix};
use crate::cheb::ChebGrid;
use crate::error::{Error, Result};
use crate::models::ModelSpec;

const MAGIC: &[u8; 8] = b"DCHEBGAM";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    fingerprint: String,
    model: ModelSpec,
    lower: f64,
    upper: f64,
    degree: usize,
    dt: f64,
    backend: Backend,
    mc: Option<McMeta>,
    mc_tail: bool,
    strikes: Vec<f64>,
}

/// Writes the matrix, MC tail statistics and stored tail vectors.
///
/// Layout: magic, `u32` version, `u64` header length, JSON header, then
/// little-endian `f64` Γ (row-major), optional MC tail statistics, and one
/// tail vector per strike in header order.
pub fn save_cache(matrix: &MomentMatrix, path: impl AsRef<Path>) -> Result<()> {
    let header = Header {
        version: VERSION,
        fingerprint: matrix.fingerprint.clone(),
        model: matrix.model,
        lower: matrix.grid.domain().lower()[0],
        upper: matrix.grid.domain().upper()[0],
        degree: matrix.grid.degree(0),
        dt: matrix.dt,
        backend: matrix.backend,
        mc: matrix.mc,
        mc_tail: matrix.mc_tail.is_some(),
        strikes: matrix.tails.iter().map(|(k, _)| *k).collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::CacheFormat(e.to_string()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    write_f64s(&mut w, &matrix.gamma)?;
    if let Some(stats) = &matrix.mc_tail {
        w.write_all(&(stats.samples as u64).to_le_bytes())?;
        for c in &stats.below_count {
            w.write_all(&c.to_le_bytes())?;
        }
        write_f64s(&mut w, &stats.below_exp_sum)?;
    }
    for (_, v) in &matrix.tails {
        write_f64s(&mut w, v)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a cache file, refusing it unless its fingerprint equals `expected`.
pub fn load_cache(path: impl AsRef<Path>, expected: &str) -> Result<MomentMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::CacheFormat("not a moment cache file".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::CacheFormat(format!("unsupported cache version {version}")));
    }
    let len = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| Error::CacheFormat(e.to_string()))?;
    if header.fingerprint != expected {
        return Err(Error::FingerprintMismatch {
            expected: expected.to_string(),
            found: header.fingerprint,
        });
    }
    let grid = Arc::new(ChebGrid::interval(header.lower, header.upper, header.degree)?);
    let recomputed = fingerprint(&header.model, &grid, header.dt);
    if recomputed != header.fingerprint {
        return Err(Error::CacheFormat("header fields do not match the stored fingerprint".into()));
    }
    let n = grid.len();
    let gamma = read_f64s(&mut r, n * n)?;
    let mc_tail = if header.mc_tail {
        let samples = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let below_count = (0..n)
            .map(|_| read_array(&mut r).map(u64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        let below_exp_sum = read_f64s(&mut r, n)?;
        Some(McTailStats {
            samples,
            below_count,
            below_exp_sum,
        })
    } else {
        None
    };
    let tails = header
        .strikes
        .iter()
        .map(|&k| read_f64s(&mut r, n).map(|v| (k, v)))
        .collect::<Result<Vec<_>>>()?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::CacheFormat("unexpected trailing bytes".into()));
    }
    Ok(MomentMatrix {
        model: header.model,
        grid,
        dt: header.dt,
        gamma,
        backend: header.backend,
        fingerprint: header.fingerprint,
        mc: header.mc,
        mc_tail,
        tails,
        build_seconds: 0.0,
    })
}

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<R: Read, const L: usize>(r: &mut R) -> Result<[u8; L]> {
    let mut buf = [0u8; L];
    r.read_exact(&mut buf).map_err(truncated)?;
    Ok(buf)
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    (0..count)
        .map(|_| read_array(r).map(f64::from_le_bytes))
        .collect()
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::CacheFormat("file is truncated".into())
    } else {
        Error::Io(e)
    }
}
