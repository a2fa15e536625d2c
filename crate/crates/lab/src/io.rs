//! Output files. CSV files start with a `# {json}` provenance line, use `.`
//! decimals and LF line endings.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(command: impl Into<String>, config_hash: Option<String>, seed: Option<u64>) -> Self {
        Self { tool: "gneiting", version: env!("CARGO_PKG_VERSION"), command: command.into(), config_hash, seed }
    }
}

/// Shortest round-trip representation.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_csv_to<W: Write>(mut w: W, prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    writeln!(w, "# {}", serde_json::to_string(prov).expect("provenance serialises"))?;
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    w.flush()
}

pub fn write_csv(path: &Path, prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_csv_to(create(path)?, prov, header, rows).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with the provenance under `"provenance"`.
pub fn write_json<T: Serialize>(path: &Path, prov: &Provenance, body: &T) -> Result<()> {
    let mut v = serde_json::to_value(body)?;
    if let serde_json::Value::Object(m) = &mut v {
        m.insert("provenance".into(), serde_json::to_value(prov)?);
    }
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &v)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawHeader<'a> {
    pub node_counts: &'a [usize],
    pub h: f64,
    pub t: f64,
    pub seed: u64,
    pub method: &'a str,
    pub provenance: &'a Provenance,
}

/// JSON header line followed by little-endian `f64` values, row-major.
pub fn write_raw(path: &Path, header: &RawHeader<'_>, values: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    let res = (|| {
        writeln!(w, "{}", serde_json::to_string(header).expect("header serialises"))?;
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_raw`]: header JSON and values.
pub fn read_raw(path: &Path) -> Result<(serde_json::Value, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let nl = bytes.iter().position(|b| *b == b'\n').ok_or_else(|| Error::Config("raw dump without header".into()))?;
    let header = serde_json::from_slice(&bytes[..nl])?;
    let body = &bytes[nl + 1..];
    if body.len() % 8 != 0 {
        return Err(Error::Config("raw dump length is not a multiple of 8".into()));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((header, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn csv_layout() {
        let mut out = Vec::new();
        let p = Provenance::new("test", None, Some(3));
        write_csv_to(&mut out, &p, &["a", "b"], &[vec![num(0.1), num(2.0)]]).unwrap();
        let s = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = s.split('\n').collect();
        assert!(lines[0].starts_with("# {\"tool\":\"gneiting\""));
        assert_eq!(lines[1], "a,b");
        assert_eq!(lines[2], "0.1,2.0");
        assert!(!s.contains('\r'));
    }

    #[test]
    fn raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let p = Provenance::new("simulate", None, Some(1));
        let h = RawHeader { node_counts: &[2, 2], h: 1.0, t: 2.0, seed: 1, method: "circulant", provenance: &p };
        write_raw(&path, &h, &[1.0, -2.5, 3.25, 0.0]).unwrap();
        let (hdr, v) = read_raw(&path).unwrap();
        assert_eq!(v, vec![1.0, -2.5, 3.25, 0.0]);
        assert_eq!(hdr["node_counts"], serde_json::json!([2, 2]));
    }
}
