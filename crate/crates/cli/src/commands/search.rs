use std::path::Path;

use anyhow::{bail, Result};
use rankreason::eval::RunFile;
use rankreason::index::load_index;
use rankreason::protocol::{encode_query, QueryPromptTemplate};
use rankreason::{Embedding, Index64};
use serde::Deserialize;

use super::{read_jsonl, sink};
use crate::config::Config;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryRecord {
    id: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    embedding: Option<Vec<f64>>,
}

pub fn run(config: &Config, queries: &Path, k: usize, out: Option<&Path>, tag: &str) -> Result<()> {
    let index: Index64 = load_index(config.index_path(None)?)?;
    let queries = read_jsonl::<QueryRecord>(queries)?;
    let mut backend = None;
    let template = QueryPromptTemplate::for_stage(config.query_stage);
    let mut run = RunFile::new();
    for (line, q) in queries {
        let embedding = match (q.text, q.embedding) {
            (None, Some(v)) => Embedding::new(v)?,
            (Some(text), None) => {
                if backend.is_none() {
                    backend = Some(config.backend.connect()?);
                }
                let b = backend.as_deref().expect("just connected");
                match encode_query::<f64>(b, &text, &template)?.embedding {
                    Some(e) => e,
                    None => bail!(
                        "line {line}: backend produced no embedding token for query `{}`",
                        q.id
                    ),
                }
            }
            _ => bail!("line {line}: give exactly one of `text` or `embedding`"),
        };
        run.insert(q.id, index.search(&embedding, k)?)?;
    }
    let mut w = sink(out)?;
    w.write_all(run.to_trec(tag).as_bytes())?;
    w.flush()?;
    Ok(())
}
