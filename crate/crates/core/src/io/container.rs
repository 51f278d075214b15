//! Single-file BLAST factor container.
//!
//! Layout: the byte length of a JSON manifest as ASCII decimal terminated by
//! `\n`, the manifest itself, then three NPY arrays in order `U` with shape
//! `(b, p, r)`, `V` with shape `(b, q, r)` and `S` with shape `(b, b, r)`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::npy::{read_array, write_array, NpyArray, NpyElement};
use crate::blast::{BlastMatrix, BlastShape};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const FORMAT_TAG: &str = "blast";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub format_version: u32,
    pub m: usize,
    pub n: usize,
    pub b: usize,
    pub r: usize,
    pub dtype: String,
}

pub fn write_blast_to<T: NpyElement, W: Write>(w: &mut W, a: &BlastMatrix<T>) -> Result<()> {
    let shape = a.shape();
    let manifest = Manifest {
        format: FORMAT_TAG.into(),
        format_version: FORMAT_VERSION,
        m: shape.m(),
        n: shape.n(),
        b: shape.b(),
        r: shape.r(),
        dtype: T::DTYPE.name().into(),
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    writeln!(w, "{}", json.len())?;
    w.write_all(&json)?;
    let (b, p, q, r) = (shape.b(), shape.p(), shape.q(), shape.r());
    write_array(w, &[b, p, r], a.u_data())?;
    write_array(w, &[b, q, r], a.v_data())?;
    write_array(w, &[b, b, r], a.s_data())?;
    Ok(())
}

pub fn write_blast<T: NpyElement>(path: impl AsRef<Path>, a: &BlastMatrix<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_blast_to(&mut w, a)?;
    w.flush()?;
    Ok(())
}

pub fn read_manifest<R: BufRead>(r: &mut R) -> Result<Manifest> {
    let mut line = Vec::new();
    r.by_ref().take(21).read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::CorruptHeader("missing manifest length line".into()));
    }
    let len: usize = std::str::from_utf8(&line[..line.len() - 1])
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::CorruptHeader("manifest length is not a number".into()))?;
    if len > 1 << 20 {
        return Err(Error::CorruptHeader(format!("implausible manifest length {len}")));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)
        .map_err(|_| Error::CorruptHeader("truncated manifest".into()))?;
    let manifest: Manifest = serde_json::from_slice(&json)
        .map_err(|e| Error::CorruptHeader(format!("manifest: {e}")))?;
    if manifest.format != FORMAT_TAG {
        return Err(Error::CorruptHeader(format!("not a BLAST container (format {:?})", manifest.format)));
    }
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: manifest.format_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(manifest)
}

fn expect_shape(name: &str, arr: &NpyArray, want: [usize; 3]) -> Result<()> {
    if arr.shape != want {
        return Err(Error::ShapeMismatch(format!(
            "{name} has shape {:?}, manifest implies {want:?}",
            arr.shape
        )));
    }
    Ok(())
}

/// Reads a container, widening `float32` payloads to `f64`.
pub fn read_blast_from<R: BufRead>(r: &mut R) -> Result<BlastMatrix<f64>> {
    let manifest = read_manifest(r)?;
    let shape = BlastShape::new(manifest.m, manifest.n, manifest.b, manifest.r)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let (b, p, q, rank) = (shape.b(), shape.p(), shape.q(), shape.r());
    let u = read_array(r)?;
    expect_shape("U", &u, [b, p, rank])?;
    let v = read_array(r)?;
    expect_shape("V", &v, [b, q, rank])?;
    let s = read_array(r)?;
    expect_shape("S", &s, [b, b, rank])?;
    BlastMatrix::from_parts(shape, u.data, v.data, s.data)
}

pub fn read_blast(path: impl AsRef<Path>) -> Result<BlastMatrix<f64>> {
    read_blast_from(&mut BufReader::new(File::open(path)?))
}
