//! Dense embedding channels and the `SWEMB1` sidecar format.
//!
//! Layout (little-endian): magic `SWEMB1`, `u8` channel tag, `u32` dim,
//! `u64` row count, then `rows * dim` `f32` values in row-major order.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"SWEMB1";
const HEADER_LEN: u64 = 6 + 1 + 4 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "emb_a")]
    EmbA,
    #[serde(rename = "emb_b")]
    EmbB,
    #[serde(rename = "sent")]
    Sent,
}

impl Channel {
    pub fn tag(self) -> u8 {
        match self {
            Channel::EmbA => 0,
            Channel::EmbB => 1,
            Channel::Sent => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Channel::EmbA),
            1 => Some(Channel::EmbB),
            2 => Some(Channel::Sent),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::EmbA => "emb_a",
            Channel::EmbB => "emb_b",
            Channel::Sent => "sent",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Row store of L2-normalized vectors, so cosine similarity is a dot product.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    channel: Channel,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingStore {
    /// Validates and normalizes `rows`. Every row must have length `dim`,
    /// be finite and be non-zero.
    pub fn from_rows<R: AsRef<[f32]>>(channel: Channel, dim: usize, rows: &[R]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid(format!("channel {channel}: dim must be positive")));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::Invalid(format!(
                    "channel {channel}: row {i} has length {} (dim {dim})",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(channel, dim, data)
            .map_err(|(row, msg)| Error::Invalid(format!("channel {channel}: row {row}: {msg}")))
    }

    fn from_flat(channel: Channel, dim: usize, mut data: Vec<f32>) -> std::result::Result<Self, (usize, &'static str)> {
        for (i, row) in data.chunks_exact_mut(dim).enumerate() {
            if row.iter().any(|x| !x.is_finite()) {
                return Err((i, "non-finite value"));
            }
            let norm = row.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err((i, "zero vector"));
            }
            for x in row.iter_mut() {
                *x = (f64::from(*x) / norm) as f32;
            }
        }
        Ok(Self { channel, dim, data })
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Cosine between two stored rows.
    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        dot(self.row(i), self.row(j))
    }

    pub fn read(path: &Path, expected: Channel) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let fmt_err = |offset: u64, message: String| Error::EmbeddingFormat {
            path: path.to_path_buf(),
            offset,
            message,
        };

        let mut header = [0u8; HEADER_LEN as usize];
        reader
            .read_exact(&mut header)
            .map_err(|_| fmt_err(0, "truncated header".into()))?;
        if &header[..6] != MAGIC {
            return Err(fmt_err(0, "bad magic (expected SWEMB1)".into()));
        }
        let channel =
            Channel::from_tag(header[6]).ok_or_else(|| fmt_err(6, format!("unknown channel tag {}", header[6])))?;
        if channel != expected {
            return Err(fmt_err(6, format!("file holds channel {channel}, expected {expected}")));
        }
        let dim = u32::from_le_bytes(header[7..11].try_into().unwrap()) as usize;
        if dim == 0 {
            return Err(fmt_err(7, "dim must be positive".into()));
        }
        let rows = u64::from_le_bytes(header[11..19].try_into().unwrap()) as usize;

        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        let expected_len = rows * dim * 4;
        if bytes.len() != expected_len {
            return Err(fmt_err(
                HEADER_LEN + bytes.len().min(expected_len) as u64,
                format!(
                    "payload is {} bytes but {rows} rows of dim {dim} need {expected_len}",
                    bytes.len()
                ),
            ));
        }
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_flat(channel, dim, data)
            .map_err(|(row, msg)| fmt_err(HEADER_LEN + (row * dim * 4) as u64, format!("row {row}: {msg}")))
    }
}

pub fn write_embeddings<R: AsRef<[f32]>>(path: &Path, channel: Channel, dim: usize, rows: &[R]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(MAGIC)?;
    put(&[channel.tag()])?;
    put(&(dim as u32).to_le_bytes())?;
    put(&(rows.len() as u64).to_le_bytes())?;
    for row in rows {
        let row = row.as_ref();
        if row.len() != dim {
            return Err(Error::DimensionMismatch(row.len(), dim));
        }
        for x in row {
            put(&x.to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum()
}

/// Cosine similarity of two arbitrary (not necessarily normalized) vectors.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(u.len(), v.len()));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Invalid("cosine of a zero vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}
