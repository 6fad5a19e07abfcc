use std::path::Path;

use anyhow::{bail, Result};
use rankreason::index::{read_corpus, save_index, IndexEntry};
use rankreason::protocol::{encode_doc, DocPromptTemplate};
use rankreason::{Embedding, Index64};

use super::encode::EmbeddingRecord;
use super::{open, read_jsonl};
use crate::config::Config;

pub fn run(config: &Config, corpus: Option<&Path>, embeddings: Option<&Path>) -> Result<()> {
    let path = config.index_path(None)?;
    let entries = match (corpus, embeddings) {
        (Some(corpus), None) => {
            let backend = config.backend.connect()?;
            let template = DocPromptTemplate::default();
            let mut entries = Vec::new();
            for rec in read_corpus(open(corpus)?)? {
                let resp = encode_doc::<f64>(backend.as_ref(), &rec.text, &template)?;
                match resp.embedding {
                    Some(e) => entries.push(IndexEntry::new(rec.id, e)),
                    None => bail!(
                        "backend produced no embedding token for document `{}`",
                        rec.id
                    ),
                }
            }
            entries
        }
        (None, Some(embeddings)) => read_jsonl::<EmbeddingRecord>(embeddings)?
            .into_iter()
            .map(|(line, rec)| match rec.embedding {
                Some(v) => Ok(IndexEntry::new(rec.id, Embedding::new(v)?)),
                None => bail!("line {line}: record `{}` has no embedding", rec.id),
            })
            .collect::<Result<_>>()?,
        _ => bail!("pass exactly one of --corpus or --embeddings"),
    };
    let index = Index64::build(entries)?;
    save_index(&index, &path)?;
    eprintln!(
        "indexed {} documents (dim {}) into {}",
        index.len(),
        index.dim(),
        path.display()
    );
    Ok(())
}
