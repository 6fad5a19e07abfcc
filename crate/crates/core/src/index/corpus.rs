use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of a corpus or query JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
}

/// Blank lines are skipped; errors carry 1-based line numbers.
pub fn read_corpus(reader: impl BufRead) -> Result<Vec<CorpusRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
