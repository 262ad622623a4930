//! IDX container parsing (the MNIST file format).
//!
//! Supported magics: 0x00000803 (3-D u8 image tensors) and 0x00000801
//! (1-D u8 label vectors). Header integers are big-endian.

use crate::error::{Error, Result};
use std::path::Path;

pub const MAGIC_IMAGES: u32 = 0x0000_0803;
pub const MAGIC_LABELS: u32 = 0x0000_0801;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdxKind {
    Images,
    Labels,
}

impl IdxKind {
    fn magic(self) -> u32 {
        match self {
            IdxKind::Images => MAGIC_IMAGES,
            IdxKind::Labels => MAGIC_LABELS,
        }
    }

    fn ndims(self) -> usize {
        match self {
            IdxKind::Images => 3,
            IdxKind::Labels => 1,
        }
    }
}

/// Parse an IDX byte stream into its declared shape and u8 payload.
pub fn parse_idx(bytes: &[u8]) -> Result<(Vec<usize>, Vec<u8>)> {
    if bytes.len() < 4 {
        return Err(Error::Format("IDX header shorter than 4 bytes".into()));
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let ndims = match magic {
        MAGIC_IMAGES => 3,
        MAGIC_LABELS => 1,
        other => return Err(Error::UnsupportedMagic(other)),
    };
    let header_len = 4 + 4 * ndims;
    if bytes.len() < header_len {
        return Err(Error::Format("IDX header truncated".into()));
    }
    let mut shape = Vec::with_capacity(ndims);
    for i in 0..ndims {
        let off = 4 + 4 * i;
        let dim = u32::from_be_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]]);
        shape.push(dim as usize);
    }
    let expected = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or(Error::DimensionOverflow)?;
    let payload = &bytes[header_len..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload { expected, got: payload.len() });
    }
    if payload.len() > expected {
        return Err(Error::Format(format!(
            "IDX payload has {} trailing bytes",
            payload.len() - expected
        )));
    }
    Ok((shape, payload.to_vec()))
}

/// Serialize an IDX stream; inverse of [`parse_idx`] for supported kinds.
pub fn write_idx(kind: IdxKind, shape: &[usize], data: &[u8]) -> Result<Vec<u8>> {
    if shape.len() != kind.ndims() {
        return Err(Error::InvalidParameter(format!(
            "IDX {:?} wants {} dims, got {}",
            kind,
            kind.ndims(),
            shape.len()
        )));
    }
    let expected = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or(Error::DimensionOverflow)?;
    if expected != data.len() {
        return Err(Error::InvalidParameter(format!(
            "IDX payload length {} does not match shape product {}",
            data.len(),
            expected
        )));
    }
    let mut out = Vec::with_capacity(4 + 4 * shape.len() + data.len());
    out.extend_from_slice(&kind.magic().to_be_bytes());
    for &d in shape {
        let d32 = u32::try_from(d).map_err(|_| Error::DimensionOverflow)?;
        out.extend_from_slice(&d32.to_be_bytes());
    }
    out.extend_from_slice(data);
    Ok(out)
}

/// A parsed image file: `count` images of `rows`×`cols` u8 pixels.
#[derive(Clone, Debug)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (shape, pixels) = parse_idx(bytes)?;
        if shape.len() != 3 {
            return Err(Error::Format("expected a 3-D IDX image file".into()));
        }
        Ok(IdxImages { count: shape[0], rows: shape[1], cols: shape[2], pixels })
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let px = self.rows * self.cols;
        &self.pixels[i * px..(i + 1) * px]
    }
}

/// Read either kind of IDX file from disk.
pub fn load_idx_file(path: &Path) -> Result<(Vec<usize>, Vec<u8>)> {
    let bytes = std::fs::read(path)?;
    parse_idx(&bytes)
}
