//! Text container for named tensors.
//!
//! ```text
//! langtrack-checkpoint 1
//! meta <key> <value...>
//! tensor <name> <rows> <cols>
//! <cols space-separated values>      (repeated `rows` times)
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! save/load cycle reproduces every tensor bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{NumericError, Result};
use crate::tensor::Tensor2D;

const MAGIC: &str = "langtrack-checkpoint";
const VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<(String, Tensor2D)>,
}

impl Checkpoint {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor2D> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, t) in &self.tensors {
            let _ = writeln!(out, "tensor {name} {} {}", t.rows(), t.cols());
            for r in 0..t.rows() {
                let line: Vec<String> = t.row(r).iter().map(|v| v.to_string()).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| NumericError::Checkpoint { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let mut head = header.split_whitespace();
        if head.next() != Some(MAGIC) {
            return Err(err(1, format!("missing `{MAGIC}` header")));
        }
        match head.next().and_then(|v| v.parse::<u32>().ok()) {
            Some(VERSION) => {}
            other => return Err(err(1, format!("unsupported version {other:?}"))),
        }
        let mut ckpt = Checkpoint::default();
        while let Some((no, line)) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            let (kind, rest) = line
                .split_once(' ')
                .ok_or_else(|| err(no, "truncated record".into()))?;
            match kind {
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    ckpt.meta.push((k.to_string(), v.to_string()));
                }
                "tensor" => {
                    let fields: Vec<&str> = rest.split_whitespace().collect();
                    if fields.len() != 3 {
                        return Err(err(no, "tensor header needs name, rows, cols".into()));
                    }
                    let rows: usize = fields[1]
                        .parse()
                        .map_err(|_| err(no, "bad row count".into()))?;
                    let cols: usize = fields[2]
                        .parse()
                        .map_err(|_| err(no, "bad column count".into()))?;
                    let mut data = Vec::with_capacity(rows * cols);
                    for _ in 0..rows {
                        let (rno, row) = lines
                            .next()
                            .ok_or_else(|| err(no, "missing tensor rows".into()))?;
                        let before = data.len();
                        for tok in row.split_whitespace() {
                            data.push(
                                tok.parse::<f64>()
                                    .map_err(|_| err(rno, format!("bad value `{tok}`")))?,
                            );
                        }
                        if data.len() - before != cols {
                            return Err(err(rno, format!("expected {cols} values")));
                        }
                    }
                    let t =
                        Tensor2D::from_vec(rows, cols, data).map_err(|e| err(no, e.to_string()))?;
                    ckpt.tensors.push((fields[0].to_string(), t));
                }
                other => return Err(err(no, format!("unknown record `{other}`"))),
            }
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
