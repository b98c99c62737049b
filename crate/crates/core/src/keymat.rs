//! Plain-text key/matrix documents used for models and gain sets.
//!
//! ```text
//! # comment
//! A 2 2
//! 0 1
//! 0 0
//! leader: chua
//! ```
//!
//! A matrix block is a `name rows cols` header followed by `rows·cols`
//! row-major values, which may span any number of lines. `key: value`
//! lines carry scalar attributes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyMatrixDoc {
    entries: Vec<(String, DenseMatrix)>,
    attrs: Vec<(String, String)>,
}

impl KeyMatrixDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, m: DenseMatrix) {
        self.entries.retain(|(k, _)| k != name);
        self.entries.push((name.to_string(), m));
    }

    pub fn set_attr(&mut self, key: &str, value: impl ToString) {
        self.attrs.retain(|(k, _)| k != key);
        self.attrs.push((key.to_string(), value.to_string()));
    }

    pub fn matrix(&self, name: &str) -> Option<&DenseMatrix> {
        self.entries.iter().find(|(k, _)| k == name).map(|(_, m)| m)
    }

    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn attr_f64(&self, key: &str) -> Result<Option<f64>> {
        self.attr(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("attribute `{key}`: `{v}` is not a number")))
            })
            .transpose()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut doc = Self::new();
        // (name, rows, cols, values so far, header line)
        let mut pending: Option<(String, usize, usize, Vec<f64>, usize)> = None;
        for (k, raw) in text.lines().enumerate() {
            let lineno = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some((name, r, c, mut vals, at)) = pending.take() {
                for tok in line.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| err(lineno, format!("`{tok}` is not a number")))?;
                    vals.push(v);
                }
                if vals.len() > r * c {
                    return Err(err(
                        lineno,
                        format!("matrix `{name}` has more than {} values", r * c),
                    ));
                }
                if vals.len() == r * c {
                    let m = DenseMatrix::from_row_major(r, c, vals)
                        .map_err(|e| err(at, e.to_string()))?;
                    doc.insert(&name, m);
                } else {
                    pending = Some((name, r, c, vals, at));
                }
                continue;
            }
            if let Some((key, value)) = line.split_once(':') {
                doc.set_attr(key.trim(), value.trim());
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() != 3 {
                return Err(err(lineno, "expected `name rows cols` or `key: value`".into()));
            }
            let r: usize = tok[1]
                .parse()
                .map_err(|_| err(lineno, format!("bad row count `{}`", tok[1])))?;
            let c: usize = tok[2]
                .parse()
                .map_err(|_| err(lineno, format!("bad column count `{}`", tok[2])))?;
            if r * c == 0 {
                doc.insert(tok[0], DenseMatrix::zeros(r, c));
            } else {
                pending = Some((tok[0].to_string(), r, c, Vec::with_capacity(r * c), lineno));
            }
        }
        if let Some((name, r, c, vals, at)) = pending {
            return Err(err(
                at,
                format!("matrix `{name}` ends after {} of {} values", vals.len(), r * c),
            ));
        }
        Ok(doc)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Serialize with 17 significant digits, which round-trips every `f64`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.attrs {
            let _ = writeln!(s, "{k}: {v}");
        }
        for (name, m) in &self.entries {
            let _ = writeln!(s, "{name} {} {}", m.rows(), m.cols());
            for i in 0..m.rows() {
                let row: Vec<String> = m.row_slice(i).iter().map(|v| fmt17(*v)).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// A float at 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
