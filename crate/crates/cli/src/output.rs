//! Output files: CSV tables and line-delimited JSON records, each opened
//! by a header with toolkit version, config hash and model parameters.

use crate::error::{CliError, Result};
use num_complex::Complex64;
use serde_json::{json, Map, Value};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug)]
pub struct Header {
    pub command: String,
    pub config_hash: String,
    pub model: String,
    pub params: String,
    pub seed: u64,
}

impl Header {
    fn fields(&self) -> [(&'static str, String); 6] {
        [
            ("toolkit", format!("grauert {VERSION}")),
            ("command", self.command.clone()),
            ("config_sha256", self.config_hash.clone()),
            ("model", self.model.clone()),
            ("params", self.params.clone()),
            ("seed", self.seed.to_string()),
        ]
    }

    fn json(&self) -> Value {
        let mut m = Map::new();
        m.insert("record".into(), json!("header"));
        for (k, v) in self.fields() {
            m.insert(k.into(), json!(v));
        }
        Value::Object(m)
    }
}

/// Shortest round-trip text, in exponent form outside [1e-4, 1e15).
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn push_complex(row: &mut Vec<String>, z: Complex64) {
    row.push(num(z.re));
    row.push(num(z.im));
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, fs::File)> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    let f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    Ok((path, f))
}

/// `#`-prefixed header lines, then an RFC 4180 table.
pub fn write_csv(dir: &Path, name: &str, header: &Header, columns: &[String], rows: &[Vec<String>]) -> Result<PathBuf> {
    let (path, mut f) = create(dir, name)?;
    let io = |e: std::io::Error| CliError::io(dir.join(name), e);
    for (k, v) in header.fields() {
        writeln!(f, "# {k}: {v}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(f);
    let to_io = |e: csv::Error| CliError::io(dir.join(name), e.into());
    w.write_record(columns).map_err(to_io)?;
    for r in rows {
        w.write_record(r).map_err(to_io)?;
    }
    w.flush().map_err(io)?;
    Ok(path)
}

/// Header record, then one JSON object per line.
pub fn write_jsonl(dir: &Path, name: &str, header: &Header, records: &[Value]) -> Result<PathBuf> {
    let (path, mut f) = create(dir, name)?;
    let io = |e: std::io::Error| CliError::io(dir.join(name), e);
    writeln!(f, "{}", header.json()).map_err(io)?;
    for r in records {
        writeln!(f, "{r}").map_err(io)?;
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(-1e-12), "-1e-12");
        assert_eq!(num(1.5e20), "1.5e20");
        assert_eq!(num(f64::INFINITY), "inf");
    }
}
