//! Precomputed per-example embedding tensors.
//!
//! Layout (little-endian): magic `EMBT`, `u32` version, `u32` width `d`,
//! then records of `u32` id length, id bytes (UTF-8), `u32` row count `T`
//! and `T * d` `f32` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const TENSOR_MAGIC: [u8; 4] = *b"EMBT";
pub const TENSOR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub id: String,
    pub rows: usize,
    pub values: Vec<f32>,
}

pub fn write_tensor_file(path: impl AsRef<Path>, dim: usize, records: &[TensorRecord]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    out.write_all(&TENSOR_MAGIC).map_err(io)?;
    out.write_all(&TENSOR_VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&(dim as u32).to_le_bytes()).map_err(io)?;
    for r in records {
        if r.values.len() != r.rows * dim {
            return Err(Error::DimensionMismatch {
                expected: r.rows * dim,
                actual: r.values.len(),
            });
        }
        out.write_all(&(r.id.len() as u32).to_le_bytes()).map_err(io)?;
        out.write_all(r.id.as_bytes()).map_err(io)?;
        out.write_all(&(r.rows as u32).to_le_bytes()).map_err(io)?;
        for v in &r.values {
            out.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

fn read_u32(r: &mut impl Read) -> std::io::Result<Option<u32>> {
    let mut buf = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            return if filled == 0 {
                Ok(None)
            } else {
                Err(std::io::ErrorKind::UnexpectedEof.into())
            };
        }
        filled += n;
    }
    Ok(Some(u32::from_le_bytes(buf)))
}

/// Returns the row width and every record in file order.
pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<(usize, Vec<TensorRecord>)> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if magic != TENSOR_MAGIC {
        return Err(Error::Malformed(format!("{} is not an embedding tensor file", path.display())));
    }
    let version = read_u32(&mut r).map_err(io)?.ok_or_else(|| Error::Truncated("missing version".into()))?;
    if version != TENSOR_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: TENSOR_VERSION,
        });
    }
    let dim = read_u32(&mut r).map_err(io)?.ok_or_else(|| Error::Truncated("missing width".into()))? as usize;
    let mut records = Vec::new();
    while let Some(id_len) = read_u32(&mut r).map_err(io)? {
        let mut id = vec![0u8; id_len as usize];
        r.read_exact(&mut id).map_err(io)?;
        let id = String::from_utf8(id).map_err(|_| Error::Malformed("non UTF-8 record id".into()))?;
        let rows = read_u32(&mut r).map_err(io)?.ok_or_else(|| Error::Truncated(format!("record '{id}'")))? as usize;
        let mut bytes = vec![0u8; rows * dim * 4];
        r.read_exact(&mut bytes).map_err(io)?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        records.push(TensorRecord { id, rows, values });
    }
    Ok((dim, records))
}
