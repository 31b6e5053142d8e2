//! Binary persistence for dictionaries.
//!
//! Archive layout, all integers little-endian:
//!
//! | field       | encoding                              |
//! |-------------|---------------------------------------|
//! | magic       | `b"RLUD"`                             |
//! | version     | `u16`                                 |
//! | scheme      | `u8` scheme code                      |
//! | label       | `u16` byte length, then UTF-8         |
//! | m, k        | `u64` each                            |
//! | train seed  | `u64`                                 |
//! | atoms       | `m·k` `f64`, row-major                |
//! | checksum    | `u64` FNV-1a of every preceding byte  |
//!
//! A bundle is a `u32` archive count followed by the archives.
//!
//! Loading rebuilds the projector from the stored atoms with the same code
//! path as training, so distances from a loaded dictionary match the
//! in-memory one bit for bit.

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::dictionary::{Dictionary, DictionaryError, DictionarySet};
use crate::features::FeatureScheme;
use crate::linalg::DenseMatrix;
use crate::seed::fnv1a64;

pub const MAGIC: [u8; 4] = *b"RLUD";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported archive version {0}")]
    UnsupportedVersion(u16),
    #[error("checksum mismatch for {label:?}: stored {stored:#018x}, computed {computed:#018x}")]
    Checksum {
        label: String,
        stored: u64,
        computed: u64,
    },
    #[error("archive is truncated")]
    Truncated,
    #[error("malformed archive: {0}")]
    Malformed(String),
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
}

/// Serializes one dictionary.
pub fn encode_dictionary(d: &Dictionary) -> Result<Vec<u8>, ArchiveError> {
    let label = d.label().as_bytes();
    let label_len = u16::try_from(label.len())
        .map_err(|_| ArchiveError::Malformed(format!("label of {} bytes", label.len())))?;
    let (m, k) = d.atoms().shape();
    let mut out = Vec::with_capacity(4 + 2 + 1 + 2 + label.len() + 24 + 8 * m * k + 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(d.scheme().code());
    out.extend_from_slice(&label_len.to_le_bytes());
    out.extend_from_slice(label);
    out.extend_from_slice(&(m as u64).to_le_bytes());
    out.extend_from_slice(&(k as u64).to_le_bytes());
    out.extend_from_slice(&d.train_seed().to_le_bytes());
    let atoms = d.atoms();
    for i in 0..m {
        for j in 0..k {
            out.extend_from_slice(&atoms[(i, j)].to_le_bytes());
        }
    }
    let sum = fnv1a64(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    Ok(out)
}

/// Checksum stored at the tail of an encoded archive.
pub fn archive_checksum(encoded: &[u8]) -> Option<u64> {
    let tail = encoded.len().checked_sub(8)?;
    Some(u64::from_le_bytes(encoded[tail..].try_into().ok()?))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArchiveError> {
        let end = self.pos.checked_add(n).ok_or(ArchiveError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(ArchiveError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], ArchiveError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16, ArchiveError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, ArchiveError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, ArchiveError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn usize(&mut self) -> Result<usize, ArchiveError> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| ArchiveError::Malformed(format!("size {v} overflows")))
    }
}

fn decode_one(c: &mut Cursor<'_>) -> Result<Dictionary, ArchiveError> {
    let start = c.pos;
    let magic = c.array::<4>()?;
    if magic != MAGIC {
        return Err(ArchiveError::BadMagic(magic));
    }
    let version = c.u16()?;
    if version != FORMAT_VERSION {
        return Err(ArchiveError::UnsupportedVersion(version));
    }
    let code = c.array::<1>()?[0];
    let scheme = FeatureScheme::from_code(code)
        .map_err(|_| ArchiveError::Malformed(format!("unknown scheme code {code}")))?;
    let label_len = c.u16()? as usize;
    let label = std::str::from_utf8(c.take(label_len)?)
        .map_err(|_| ArchiveError::Malformed("label is not UTF-8".into()))?
        .to_string();
    let m = c.usize()?;
    let k = c.usize()?;
    let train_seed = c.u64()?;
    if m == 0 || k == 0 {
        return Err(ArchiveError::Malformed(format!("empty atom matrix {m}x{k}")));
    }
    let count = m
        .checked_mul(k)
        .filter(|n| n.checked_mul(8).is_some_and(|b| b <= c.buf.len()))
        .ok_or(ArchiveError::Truncated)?;
    let raw = c.take(count * 8)?;
    let computed = fnv1a64(&c.buf[start..c.pos]);
    let stored = c.u64()?;
    if stored != computed {
        return Err(ArchiveError::Checksum {
            label,
            stored,
            computed,
        });
    }
    let mut data = vec![0.0; count];
    for (idx, chunk) in raw.chunks_exact(8).enumerate() {
        let (i, j) = (idx / k, idx % k);
        data[j * m + i] = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
    }
    let atoms = DenseMatrix::new(m, k, data).map_err(|e| ArchiveError::Malformed(format!("atoms: {e}")))?;
    Ok(Dictionary::from_atoms(label, atoms, train_seed, scheme)?)
}

/// Parses a single archive; trailing bytes are rejected.
pub fn decode_dictionary(bytes: &[u8]) -> Result<Dictionary, ArchiveError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    let d = decode_one(&mut c)?;
    if c.pos != bytes.len() {
        return Err(ArchiveError::Malformed("trailing bytes after archive".into()));
    }
    Ok(d)
}

pub fn encode_bundle(set: &DictionarySet) -> Result<Vec<u8>, ArchiveError> {
    let count =
        u32::try_from(set.len()).map_err(|_| ArchiveError::Malformed("too many dictionaries".into()))?;
    let mut out = count.to_le_bytes().to_vec();
    for d in set.iter() {
        out.extend(encode_dictionary(d)?);
    }
    Ok(out)
}

pub fn decode_bundle(bytes: &[u8]) -> Result<DictionarySet, ArchiveError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    let count = c.u32()?;
    let mut set = DictionarySet::new();
    for _ in 0..count {
        set.insert(decode_one(&mut c)?)?;
    }
    if c.pos != bytes.len() {
        return Err(ArchiveError::Malformed("trailing bytes after bundle".into()));
    }
    Ok(set)
}

/// Per-dictionary checksums of a bundle, in label order.
pub fn bundle_checksums(set: &DictionarySet) -> Result<Vec<(String, u64)>, ArchiveError> {
    set.iter()
        .map(|d| {
            let enc = encode_dictionary(d)?;
            Ok((d.label().to_string(), archive_checksum(&enc).expect("nonempty")))
        })
        .collect()
}

pub fn write_bundle<W: Write>(set: &DictionarySet, mut w: W) -> Result<(), ArchiveError> {
    w.write_all(&encode_bundle(set)?)?;
    Ok(w.flush()?)
}

pub fn read_bundle<R: Read>(mut r: R) -> Result<DictionarySet, ArchiveError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode_bundle(&buf)
}

pub fn save_bundle(set: &DictionarySet, path: impl AsRef<Path>) -> Result<(), ArchiveError> {
    Ok(std::fs::write(path, encode_bundle(set)?)?)
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<DictionarySet, ArchiveError> {
    decode_bundle(&std::fs::read(path)?)
}
