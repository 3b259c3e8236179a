//! `repos.bin`: the binary hand-off between ingest and later stages.
//!
//! ```text
//! "RPBN" | version u32 | count u64 | count × (len u64 | bincode RepoRecord)
//! ```
//!
//! Integers are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::event::RepoRecord;

pub const STORE_MAGIC: &[u8; 4] = b"RPBN";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not a repos.bin file")]
    BadMagic,
    #[error("repos.bin version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("repos.bin is truncated or corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_repos<W: Write>(records: &[RepoRecord], mut w: W) -> Result<(), StoreError> {
    w.write_all(STORE_MAGIC)?;
    w.write_all(&STORE_VERSION.to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for r in records {
        let bytes = bincode::serialize(r).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        w.write_all(&(bytes.len() as u64).to_le_bytes())?;
        w.write_all(&bytes)?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or_corrupt<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), StoreError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => StoreError::Corrupt("unexpected end of file".into()),
        _ => StoreError::Io(e),
    })
}

pub fn read_repos<R: Read>(mut r: R) -> Result<Vec<RepoRecord>, StoreError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| StoreError::BadMagic)?;
    if &magic != STORE_MAGIC {
        return Err(StoreError::BadMagic);
    }
    let mut b4 = [0u8; 4];
    read_exact_or_corrupt(&mut r, &mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != STORE_VERSION {
        return Err(StoreError::VersionMismatch {
            found: version,
            expected: STORE_VERSION,
        });
    }
    let mut b8 = [0u8; 8];
    read_exact_or_corrupt(&mut r, &mut b8)?;
    let count = u64::from_le_bytes(b8);
    let mut out = Vec::new();
    for _ in 0..count {
        read_exact_or_corrupt(&mut r, &mut b8)?;
        let len = u64::from_le_bytes(b8) as usize;
        let mut buf = vec![0u8; len];
        read_exact_or_corrupt(&mut r, &mut buf)?;
        out.push(bincode::deserialize(&buf).map_err(|e| StoreError::Corrupt(e.to_string()))?);
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(StoreError::Corrupt("trailing bytes".into()));
    }
    Ok(out)
}

pub fn save_repos(records: &[RepoRecord], path: &Path) -> Result<(), StoreError> {
    write_repos(records, BufWriter::new(File::create(path)?))
}

pub fn load_repos(path: &Path) -> Result<Vec<RepoRecord>, StoreError> {
    read_repos(BufReader::new(File::open(path)?))
}
