//! Embedding fixtures: JSON lines. The first line is a header
//! `{"format":"langtrack-embeddings","version":1,"dim":D}`, every further
//! line a record `{"description":"...","vector":[...]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, write_text};
use crate::error::{Error, Result};
use crate::guidance::LanguageEmbeddingStore;

pub const FIXTURE_FORMAT: &str = "langtrack-embeddings";
pub const FIXTURE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    description: String,
    vector: Vec<f64>,
}

pub fn read_embedding_fixture(path: impl AsRef<Path>) -> Result<LanguageEmbeddingStore> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let parse_err = |line: usize, e: serde_json::Error| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((i, first)) = lines.next() else {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "missing fixture header".into(),
        });
    };
    let header: Header = serde_json::from_str(first).map_err(|e| parse_err(i + 1, e))?;
    if header.format != FIXTURE_FORMAT || header.version != FIXTURE_VERSION {
        return Err(Error::Validation(format!(
            "{}: unsupported fixture {} version {}",
            path.display(),
            header.format,
            header.version
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let rec: Record = serde_json::from_str(line).map_err(|e| parse_err(i + 1, e))?;
        records.push((rec.description, rec.vector));
    }
    LanguageEmbeddingStore::from_records(header.dim, records)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

pub fn write_embedding_fixture(
    path: impl AsRef<Path>,
    store: &LanguageEmbeddingStore,
) -> Result<()> {
    let header = Header {
        format: FIXTURE_FORMAT.to_string(),
        version: FIXTURE_VERSION,
        dim: store.dim(),
    };
    let mut out = serde_json::to_string(&header).expect("header serialises");
    out.push('\n');
    for (description, vector) in store.iter() {
        let rec = Record {
            description: description.to_string(),
            vector: vector.to_vec(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serialises"));
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}
