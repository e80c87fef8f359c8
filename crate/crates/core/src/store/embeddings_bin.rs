//! `embeddings.bin`: a 20-byte little-endian header followed by row-major
//! float32 values.
//!
//! ```text
//! offset 0   b"TOSE"
//! offset 4   u32 version (1)
//! offset 8   u32 dim
//! offset 12  u64 count
//! offset 20  count * dim f32
//! ```

use std::io::{self, Read, Write};

pub const MAGIC: &[u8; 4] = b"TOSE";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub version: u32,
    pub dim: u32,
    pub count: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("expected {expected} bytes of vector data, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("row {row} has length {len}, expected {dim}")]
    RaggedRow { row: usize, len: usize, dim: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Rows must all have length `dim`.
pub fn write<W: Write>(mut w: W, dim: usize, rows: &[Vec<f32>]) -> Result<(), FormatError> {
    for (row, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(FormatError::RaggedRow { row, len: r.len(), dim });
        }
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + rows.len() * dim * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    buf.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    for value in rows.iter().flatten() {
        buf.extend_from_slice(&value.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_header(bytes: &[u8]) -> Result<Header, FormatError> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated { expected: HEADER_LEN as u64, found: bytes.len() as u64 });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    let count = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    Ok(Header { version, dim, count })
}

pub fn read<R: Read>(mut r: R) -> Result<(Header, Vec<Vec<f32>>), FormatError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let header = read_header(&bytes)?;
    let dim = header.dim as usize;
    let expected = header.count * header.dim as u64 * 4;
    let found = (bytes.len() - HEADER_LEN) as u64;
    if found != expected {
        return Err(FormatError::Truncated { expected, found });
    }
    let rows = if dim == 0 {
        vec![Vec::new(); header.count as usize]
    } else {
        bytes[HEADER_LEN..]
            .chunks_exact(dim * 4)
            .map(|row| row.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect())
            .collect()
    };
    Ok((header, rows))
}
