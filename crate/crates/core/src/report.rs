//! Structured-text report format shared by every artifact: a `key = value`
//! header, a blank line, then an optional CSV body. All numbers use
//! shortest round-trip decimal so reports replay exactly; bodies carry no
//! timestamps, so byte-identical reruns are the determinism check.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct Report {
    /// Insertion-ordered header entries.
    header: Vec<(String, String)>,
    pub csv_header: Option<String>,
    pub csv_rows: Vec<String>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.header.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::ConfigError(format!("report is missing key `{key}`")))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.require(key)?
            .parse()
            .map_err(|_| Error::ConfigError(format!("report key `{key}` is not a number")))
    }

    pub fn require_usize(&self, key: &str) -> Result<usize> {
        self.require(key)?
            .parse()
            .map_err(|_| Error::ConfigError(format!("report key `{key}` is not an integer")))
    }

    pub fn header_entries(&self) -> &[(String, String)] {
        &self.header
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "{k} = {v}");
        }
        if let Some(h) = &self.csv_header {
            out.push('\n');
            let _ = writeln!(out, "{h}");
            for row in &self.csv_rows {
                let _ = writeln!(out, "{row}");
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::data::atomic_write(path, self.render().as_bytes())
    }

    pub fn parse(text: &str) -> Result<Report> {
        let mut report = Report::new();
        let mut lines = text.lines();
        for line in lines.by_ref() {
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::ConfigError(format!("bad header line `{line}`: expected `key = value`"))
            })?;
            report.push(k.trim(), v.trim());
        }
        let rest: Vec<&str> = lines.collect();
        if !rest.is_empty() {
            report.csv_header = Some(rest[0].to_string());
            report.csv_rows = rest[1..]
                .iter()
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.to_string())
                .collect();
        }
        Ok(report)
    }

    pub fn load(path: &Path) -> Result<Report> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Report::parse(&text)
    }
}

/// Stable hex hash of canonicalized `key = value` pairs; embedded in every
/// report so outputs can be traced back to their exact configuration.
pub fn config_hash(entries: &BTreeMap<String, String>) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    for (k, v) in entries {
        hasher.update(k.as_bytes());
        hasher.update([0x1e]);
        hasher.update(v.as_bytes());
        hasher.update([0x1f]);
    }
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Space-separated shortest round-trip encoding of a float vector.
pub fn encode_vec(v: &ndarray::Array1<f64>) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn decode_vec(s: &str) -> Result<ndarray::Array1<f64>> {
    let vals: std::result::Result<Vec<f64>, _> =
        s.split_whitespace().map(|f| f.parse::<f64>()).collect();
    vals.map(ndarray::Array1::from)
        .map_err(|_| Error::ConfigError(format!("bad float vector `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip() {
        let mut r = Report::new();
        r.push("kind", "demo");
        r.push("value", 0.1f64);
        r.csv_header = Some("a,b".into());
        r.csv_rows.push("1,2".into());
        r.csv_rows.push("3,4".into());
        let text = r.render();
        let back = Report::parse(&text).unwrap();
        assert_eq!(back.get("kind"), Some("demo"));
        assert_eq!(back.require_f64("value").unwrap(), 0.1);
        assert_eq!(back.csv_rows.len(), 2);
        assert_eq!(back.render(), text);
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let mut a = BTreeMap::new();
        a.insert("n".to_string(), "50".to_string());
        a.insert("eta".to_string(), "0.1".to_string());
        let h1 = config_hash(&a);
        let h2 = config_hash(&a);
        assert_eq!(h1, h2);
        a.insert("eta".to_string(), "0.2".to_string());
        assert_ne!(h1, config_hash(&a));
    }

    #[test]
    fn vector_codec_is_bit_exact() {
        let v = ndarray::Array1::from(vec![0.1, -2.5e-17, 3.0, f64::MIN_POSITIVE]);
        let s = encode_vec(&v);
        let back = decode_vec(&s).unwrap();
        assert_eq!(v, back);
    }
}
