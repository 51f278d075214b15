//! NumPy `.npy` arrays (format 1.0 on write; 1.0 and 2.0 on read).
//!
//! Only little-endian `f4`/`f8`, C-ordered arrays are supported.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 6] = b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn descr(&self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Dtype::F32 => "float32",
            Dtype::F64 => "float64",
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn from_descr(descr: &str) -> Result<Self> {
        match descr {
            "<f4" => Ok(Dtype::F32),
            "<f8" => Ok(Dtype::F64),
            other => Err(Error::UnsupportedDtype(other.to_string())),
        }
    }
}

/// Element types that can be written to `.npy` without conversion.
pub trait NpyElement: Scalar {
    const DTYPE: Dtype;
    fn write_le<W: Write>(self, w: &mut W) -> std::io::Result<()>;
}

impl NpyElement for f32 {
    const DTYPE: Dtype = Dtype::F32;
    fn write_le<W: Write>(self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&self.to_le_bytes())
    }
}

impl NpyElement for f64 {
    const DTYPE: Dtype = Dtype::F64;
    fn write_le<W: Write>(self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&self.to_le_bytes())
    }
}

/// An n-dimensional array widened to `f64`, plus its on-disk dtype.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub dtype: Dtype,
    pub data: Vec<f64>,
}

fn header_text(dtype: Dtype, shape: &[usize]) -> Vec<u8> {
    let dims = match shape {
        [d] => format!("({d},)"),
        _ => format!(
            "({})",
            shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut text = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        dtype.descr(),
        dims
    );
    // Magic (6) + version (2) + length (2) + text + '\n' must be a multiple of 64.
    let unpadded = 10 + text.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    text.extend(std::iter::repeat(' ').take(pad));
    text.push('\n');
    text.into_bytes()
}

/// Writes a C-ordered array with the given shape.
pub fn write_array<T: NpyElement, W: Write>(w: &mut W, shape: &[usize], data: &[T]) -> Result<()> {
    let count: usize = shape.iter().product();
    if count != data.len() {
        return Err(Error::dims(format!(
            "shape {shape:?} holds {count} elements, got {}",
            data.len()
        )));
    }
    let header = header_text(T::DTYPE, shape);
    w.write_all(MAGIC)?;
    w.write_all(&[1, 0])?;
    w.write_all(&(header.len() as u16).to_le_bytes())?;
    w.write_all(&header)?;
    for &x in data {
        x.write_le(w)?;
    }
    Ok(())
}

/// Reads one array from the current position of `r`.
pub fn read_array<R: Read>(r: &mut R) -> Result<NpyArray> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::CorruptHeader("file is shorter than the NPY preamble".into()))?;
    if &magic[..6] != MAGIC {
        return Err(Error::CorruptHeader("missing NPY magic string".into()));
    }
    let header_len = match magic[6] {
        1 => {
            let mut len = [0u8; 2];
            r.read_exact(&mut len)?;
            u16::from_le_bytes(len) as usize
        }
        2 | 3 => {
            let mut len = [0u8; 4];
            r.read_exact(&mut len)?;
            u32::from_le_bytes(len) as usize
        }
        v => return Err(Error::CorruptHeader(format!("unsupported NPY version {v}.{}", magic[7]))),
    };
    let mut header = vec![0u8; header_len];
    r.read_exact(&mut header)
        .map_err(|_| Error::CorruptHeader("truncated header".into()))?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| Error::CorruptHeader("header is not valid text".into()))?;
    let parsed = parse_header(header)?;
    if parsed.fortran_order {
        return Err(Error::UnsupportedLayout("Fortran-ordered arrays are not supported".into()));
    }
    let dtype = Dtype::from_descr(&parsed.descr)?;
    let count: usize = parsed.shape.iter().product();
    let mut bytes = vec![0u8; count * dtype.size()];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::CorruptHeader(format!("payload shorter than {count} elements")))?;
    let data = match dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Dtype::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    Ok(NpyArray {
        shape: parsed.shape,
        dtype,
        data,
    })
}

struct Header {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Parses the Python dict literal of an NPY header.
fn parse_header(text: &str) -> Result<Header> {
    let corrupt = |msg: &str| Error::CorruptHeader(format!("{msg} in header {:?}", text.trim_end()));
    let body = text
        .trim()
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| corrupt("expected a dict literal"))?;

    let value_of = |key: &str| -> Result<&str> {
        let tag = format!("'{key}'");
        let at = body.find(&tag).ok_or_else(|| corrupt(&format!("missing key {key}")))?;
        let rest = body[at + tag.len()..].trim_start();
        rest.strip_prefix(':')
            .map(str::trim_start)
            .ok_or_else(|| corrupt("expected ':'"))
    };

    let descr_raw = value_of("descr")?;
    let quote = descr_raw.chars().next().filter(|c| *c == '\'' || *c == '"');
    let descr = match quote {
        Some(q) => {
            let inner = &descr_raw[1..];
            let end = inner.find(q).ok_or_else(|| corrupt("unterminated descr"))?;
            inner[..end].to_string()
        }
        None => return Err(corrupt("descr is not a string")),
    };

    let fo = value_of("fortran_order")?;
    let fortran_order = if fo.starts_with("True") {
        true
    } else if fo.starts_with("False") {
        false
    } else {
        return Err(corrupt("fortran_order is not a boolean"));
    };

    let shape_raw = value_of("shape")?;
    let shape_raw = shape_raw
        .strip_prefix('(')
        .and_then(|s| s.find(')').map(|end| &s[..end]))
        .ok_or_else(|| corrupt("shape is not a tuple"))?;
    let shape = shape_raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| corrupt("bad shape entry")))
        .collect::<Result<Vec<_>>>()?;

    Ok(Header {
        descr,
        fortran_order,
        shape,
    })
}

impl NpyArray {
    pub fn into_dense(self) -> Result<DenseMatrix<f64>> {
        match self.shape[..] {
            [rows, cols] => DenseMatrix::new(rows, cols, self.data),
            _ => Err(Error::NotTwoDimensional(self.shape)),
        }
    }
}

/// Reads a 2-D array, widening `float32` to `f64`, and reports the stored dtype.
pub fn read_dense_with_dtype(path: impl AsRef<Path>) -> Result<(DenseMatrix<f64>, Dtype)> {
    let mut r = BufReader::new(File::open(path)?);
    let arr = read_array(&mut r)?;
    let dtype = arr.dtype;
    Ok((arr.into_dense()?, dtype))
}

pub fn read_dense(path: impl AsRef<Path>) -> Result<DenseMatrix<f64>> {
    read_dense_with_dtype(path).map(|(m, _)| m)
}

pub fn write_dense<T: NpyElement>(path: impl AsRef<Path>, d: &DenseMatrix<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_array(&mut w, &[d.rows(), d.cols()], d.as_slice())?;
    w.flush()?;
    Ok(())
}
