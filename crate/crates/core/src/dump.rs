//! Feature dump records: a binary stream for reloading and a sparse text
//! form for inspection.
//!
//! Binary record (little-endian): `u8` scheme code, `u32` path length, path
//! bytes, `u64` fragment offset, `u32` dimension, then `dimension` `f64`s.
//! Text record: `scheme<TAB>path<TAB>offset` followed by tab-separated
//! `index:value` pairs for the nonzero entries.

use std::io::{self, BufRead, Read, Write};

use crate::features::FeatureScheme;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRecord {
    pub scheme: FeatureScheme,
    pub path: String,
    pub offset: u64,
    pub values: Vec<f64>,
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn write_binary<W: Write>(w: &mut W, r: &FeatureRecord) -> io::Result<()> {
    let path = r.path.as_bytes();
    let plen = u32::try_from(path.len()).map_err(|_| invalid("path too long"))?;
    let dim = u32::try_from(r.values.len()).map_err(|_| invalid("vector too long"))?;
    w.write_all(&[r.scheme.code()])?;
    w.write_all(&plen.to_le_bytes())?;
    w.write_all(path)?;
    w.write_all(&r.offset.to_le_bytes())?;
    w.write_all(&dim.to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * r.values.len());
    for v in &r.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

/// Reads the next record, or `None` at a clean end of stream.
pub fn read_binary<R: Read>(r: &mut R) -> io::Result<Option<FeatureRecord>> {
    let mut code = [0u8; 1];
    match r.read_exact(&mut code) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let scheme = FeatureScheme::from_code(code[0]).map_err(|e| invalid(e.to_string()))?;
    let mut u32b = [0u8; 4];
    r.read_exact(&mut u32b)?;
    let mut path = vec![0u8; u32::from_le_bytes(u32b) as usize];
    r.read_exact(&mut path)?;
    let path = String::from_utf8(path).map_err(|_| invalid("path is not UTF-8"))?;
    let mut u64b = [0u8; 8];
    r.read_exact(&mut u64b)?;
    let offset = u64::from_le_bytes(u64b);
    r.read_exact(&mut u32b)?;
    let dim = u32::from_le_bytes(u32b) as usize;
    let mut raw = vec![0u8; dim * 8];
    r.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Some(FeatureRecord {
        scheme,
        path,
        offset,
        values,
    }))
}

pub fn read_all_binary<R: Read>(mut r: R) -> io::Result<Vec<FeatureRecord>> {
    let mut out = Vec::new();
    while let Some(rec) = read_binary(&mut r)? {
        out.push(rec);
    }
    Ok(out)
}

/// One text line (without the trailing newline). Values use Rust's
/// shortest round-trip formatting.
pub fn to_text(r: &FeatureRecord) -> String {
    let mut s = format!("{}\t{}\t{}", r.scheme.tag(), r.path, r.offset);
    for (i, v) in r.values.iter().enumerate() {
        if *v != 0.0 {
            s.push_str(&format!("\t{i}:{v}"));
        }
    }
    s
}

/// Parses a text line. The dimension comes from the scheme.
pub fn from_text(line: &str) -> io::Result<FeatureRecord> {
    let mut parts = line.split('\t');
    let scheme: FeatureScheme = parts
        .next()
        .ok_or_else(|| invalid("missing scheme"))?
        .parse()
        .map_err(|e: crate::features::FeatureError| invalid(e.to_string()))?;
    let path = parts.next().ok_or_else(|| invalid("missing path"))?.to_string();
    let offset = parts
        .next()
        .ok_or_else(|| invalid("missing offset"))?
        .parse()
        .map_err(|_| invalid("bad offset"))?;
    let mut values = vec![0.0; scheme.dimension()];
    for p in parts {
        let (i, v) = p
            .split_once(':')
            .ok_or_else(|| invalid(format!("bad pair {p:?}")))?;
        let i: usize = i.parse().map_err(|_| invalid(format!("bad index {i:?}")))?;
        let v: f64 = v.parse().map_err(|_| invalid(format!("bad value {v:?}")))?;
        *values
            .get_mut(i)
            .ok_or_else(|| invalid(format!("index {i} out of range")))? = v;
    }
    Ok(FeatureRecord {
        scheme,
        path,
        offset,
        values,
    })
}

pub fn write_text<W: Write>(w: &mut W, r: &FeatureRecord) -> io::Result<()> {
    writeln!(w, "{}", to_text(r))
}

pub fn read_all_text<R: BufRead>(r: R) -> io::Result<Vec<FeatureRecord>> {
    r.lines()
        .filter(|l| !matches!(l, Ok(s) if s.is_empty()))
        .map(|l| from_text(&l?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> FeatureRecord {
        let v = FeatureScheme::BfdCdd.extract(b"hello, world").unwrap();
        FeatureRecord {
            scheme: v.scheme,
            path: "dir/a file.bin".into(),
            offset: 4096,
            values: v.values,
        }
    }

    #[test]
    fn binary_round_trip() {
        let r = record();
        let mut buf = Vec::new();
        write_binary(&mut buf, &r).unwrap();
        write_binary(&mut buf, &r).unwrap();
        assert_eq!(buf.len(), 2 * (1 + 4 + 14 + 8 + 4 + 512 * 8));
        assert_eq!(read_all_binary(buf.as_slice()).unwrap(), vec![r.clone(), r]);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let r = record();
        let line = to_text(&r);
        assert!(line.starts_with("bfd-cdd\tdir/a file.bin\t4096\t"));
        assert_eq!(from_text(&line).unwrap(), r);
        let mut buf = Vec::new();
        write_text(&mut buf, &r).unwrap();
        assert_eq!(read_all_text(buf.as_slice()).unwrap(), vec![r]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(from_text("nope\tp\t0").is_err());
        assert!(from_text("mw\tp\t0\t99999:1").is_err());
        assert!(read_binary(&mut [9u8, 0, 0].as_slice()).is_err());
    }
}
