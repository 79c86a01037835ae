//! Versioned on-disk snapshot of a gazetteer and its name index.
//!
//! Layout: 8-byte magic, little-endian u32 version, u64 payload length,
//! SHA-256 of the payload, then the bincode payload.

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gazetteer::Gazetteer;
use crate::index::NameIndex;

const MAGIC: &[u8; 8] = b"TPSVIDX\0";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 32;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not a snapshot file (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {0} (expected {SNAPSHOT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("snapshot truncated")]
    Truncated,
    #[error("snapshot checksum mismatch")]
    ChecksumMismatch,
    #[error("snapshot payload: {0}")]
    Decode(String),
}

pub fn encode(g: &Gazetteer, idx: &NameIndex) -> crate::Result<Vec<u8>> {
    let payload = bincode::serialize(&(g, idx)).map_err(|e| SnapshotError::Decode(e.to_string()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> crate::Result<(Gazetteer, NameIndex)> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(SnapshotError::BadMagic.into());
    }
    if bytes.len() < HEADER_LEN {
        return Err(SnapshotError::Truncated.into());
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != SNAPSHOT_VERSION {
        return Err(SnapshotError::UnsupportedVersion(version).into());
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != len {
        return Err(SnapshotError::Truncated.into());
    }
    if Sha256::digest(payload).as_slice() != &bytes[20..52] {
        return Err(SnapshotError::ChecksumMismatch.into());
    }
    bincode::deserialize(payload).map_err(|e| SnapshotError::Decode(e.to_string()).into())
}

pub fn save(path: impl AsRef<Path>, g: &Gazetteer, idx: &NameIndex) -> crate::Result<()> {
    let bytes = encode(g, idx)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> crate::Result<(Gazetteer, NameIndex)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
