//! EMB1 binary matrix files.
//!
//! Layout: magic `EMB1`, little-endian `u32` rows, `u32` cols, a `u8` dtype
//! tag (1 = f32, 2 = f64), 7 zero bytes, then the row-major payload in
//! little-endian.

use std::fs;
use std::io::Read;
use std::path::Path;

use embinv_core::tensor::DenseMatrix;

use crate::error::{PipelineError, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Dtype {
    F32 = 1,
    F64 = 2,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// A matrix as stored, without widening.
#[derive(Debug, Clone, PartialEq)]
pub enum Emb1Matrix {
    F32(DenseMatrix<f32>),
    F64(DenseMatrix<f64>),
}

impl Emb1Matrix {
    pub fn dtype(&self) -> Dtype {
        match self {
            Emb1Matrix::F32(_) => Dtype::F32,
            Emb1Matrix::F64(_) => Dtype::F64,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Emb1Matrix::F32(m) => m.shape(),
            Emb1Matrix::F64(m) => m.shape(),
        }
    }

    /// Widens f32 payloads; f64 payloads are returned as is.
    pub fn into_f64(self) -> DenseMatrix<f64> {
        match self {
            Emb1Matrix::F32(m) => m.cast(),
            Emb1Matrix::F64(m) => m,
        }
    }
}

fn header(rows: usize, cols: usize, dtype: Dtype) -> Result<Vec<u8>> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| PipelineError::Format(format!("{what} {v} exceeds u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&to_u32(rows, "rows")?.to_le_bytes());
    out.extend_from_slice(&to_u32(cols, "cols")?.to_le_bytes());
    out.push(dtype as u8);
    out.extend_from_slice(&[0u8; 7]);
    Ok(out)
}

pub fn encode_f32(m: &DenseMatrix<f32>) -> Result<Vec<u8>> {
    let mut out = header(m.rows(), m.cols(), Dtype::F32)?;
    out.reserve(m.as_slice().len() * 4);
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn encode_f64(m: &DenseMatrix<f64>) -> Result<Vec<u8>> {
    let mut out = header(m.rows(), m.cols(), Dtype::F64)?;
    out.reserve(m.as_slice().len() * 8);
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn encode(m: &Emb1Matrix) -> Result<Vec<u8>> {
    match m {
        Emb1Matrix::F32(m) => encode_f32(m),
        Emb1Matrix::F64(m) => encode_f64(m),
    }
}

/// Decodes one matrix from the front of `bytes`, returning it with the number
/// of bytes consumed. Trailing data is left for the caller.
pub fn decode_prefix(bytes: &[u8]) -> Result<(Emb1Matrix, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(PipelineError::Format(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(PipelineError::Format("bad magic".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dtype = match bytes[12] {
        1 => Dtype::F32,
        2 => Dtype::F64,
        t => return Err(PipelineError::Format(format!("unknown dtype tag {t}"))),
    };
    if bytes[13..HEADER_LEN].iter().any(|&b| b != 0) {
        return Err(PipelineError::Format("reserved bytes are not zero".into()));
    }
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| PipelineError::Format("rows × cols overflows".into()))?;
    let end = n
        .checked_mul(dtype.width())
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| PipelineError::Format("payload size overflows".into()))?;
    if bytes.len() < end {
        return Err(PipelineError::Format(format!(
            "payload truncated: need {end} bytes, have {}",
            bytes.len()
        )));
    }
    let payload = &bytes[HEADER_LEN..end];
    let m = match dtype {
        Dtype::F32 => {
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Emb1Matrix::F32(DenseMatrix::from_vec(rows, cols, data)?)
        }
        Dtype::F64 => {
            let data = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Emb1Matrix::F64(DenseMatrix::from_vec(rows, cols, data)?)
        }
    };
    Ok((m, end))
}

/// Decodes a whole buffer; trailing bytes are an error.
pub fn decode(bytes: &[u8]) -> Result<Emb1Matrix> {
    let (m, used) = decode_prefix(bytes)?;
    if used != bytes.len() {
        return Err(PipelineError::Format(format!(
            "{} trailing bytes after payload",
            bytes.len() - used
        )));
    }
    Ok(m)
}

pub fn read(path: &Path) -> Result<Emb1Matrix> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| PipelineError::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        PipelineError::Format(msg) => PipelineError::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Reads any dtype and widens to f64.
pub fn read_f64(path: &Path) -> Result<DenseMatrix<f64>> {
    read(path).map(Emb1Matrix::into_f64)
}

pub fn write(path: &Path, m: &Emb1Matrix) -> Result<()> {
    let bytes = encode(m)?;
    fs::write(path, bytes).map_err(|e| PipelineError::io(path, e))
}

pub fn write_f32(path: &Path, m: &DenseMatrix<f32>) -> Result<()> {
    fs::write(path, encode_f32(m)?).map_err(|e| PipelineError::io(path, e))
}

pub fn write_f64(path: &Path, m: &DenseMatrix<f64>) -> Result<()> {
    fs::write(path, encode_f64(m)?).map_err(|e| PipelineError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let m = DenseMatrix::from_rows(&[[1.0f32, 2.0, 3.0]]).unwrap();
        let b = encode_f32(&m).unwrap();
        assert_eq!(&b[..4], b"EMB1");
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!(&b[8..12], &[3, 0, 0, 0]);
        assert_eq!(b[12], 1);
        assert_eq!(&b[13..20], &[0; 7]);
        assert_eq!(&b[20..24], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 20 + 12);
    }

    #[test]
    fn rejects_bad_input() {
        let m = DenseMatrix::from_rows(&[[1.0f32]]).unwrap();
        let good = encode_f32(&m).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = good.clone();
        bad[12] = 9;
        assert!(decode(&bad).is_err());
        let mut bad = good.clone();
        bad[15] = 1;
        assert!(decode(&bad).is_err());
        assert!(decode(&good[..good.len() - 1]).is_err());
        let mut long = good.clone();
        long.push(0);
        assert!(decode(&long).is_err());
    }

    #[test]
    fn empty_matrix() {
        let m = DenseMatrix::<f32>::zeros(0, 0);
        assert_eq!(decode(&encode_f32(&m).unwrap()).unwrap(), Emb1Matrix::F32(m));
    }
}
