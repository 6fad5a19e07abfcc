use std::io::Write;
use std::path::Path;

use anyhow::Result;
use rankreason::index::read_corpus;
use rankreason::protocol::{
    encode_doc, encode_query, DocPromptTemplate, EncodeResponse, QueryPromptTemplate,
};
use serde::{Deserialize, Serialize};

use super::{open, sink};
use crate::config::Config;
use crate::Side;

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub side: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_text: Option<String>,
    pub token_found: bool,
    #[serde(default)]
    pub generated_len: usize,
    pub embedding: Option<Vec<f64>>,
}

impl EmbeddingRecord {
    fn new(id: String, side: Side, resp: EncodeResponse<f64>) -> Self {
        Self {
            id,
            side: match side {
                Side::Query => "query".into(),
                Side::Doc => "doc".into(),
            },
            reasoning_text: (side == Side::Query).then_some(resp.reasoning_text),
            token_found: resp.token_found,
            generated_len: resp.generated_len,
            embedding: resp.embedding.map(|e| e.into_values()),
        }
    }
}

pub fn run(config: &Config, input: &Path, side: Side, out: Option<&Path>) -> Result<()> {
    let records = read_corpus(open(input)?)?;
    let backend = config.backend.connect()?;
    let query_template = QueryPromptTemplate::for_stage(config.query_stage);
    let doc_template = DocPromptTemplate::default();
    let mut w = sink(out)?;
    let mut first_error = None;
    let mut failures = 0usize;
    for rec in records {
        let resp = match side {
            Side::Query => encode_query::<f64>(backend.as_ref(), &rec.text, &query_template),
            Side::Doc => encode_doc::<f64>(backend.as_ref(), &rec.text, &doc_template),
        };
        match resp {
            Ok(resp) => {
                serde_json::to_writer(&mut w, &EmbeddingRecord::new(rec.id, side, resp))?;
                writeln!(w)?;
            }
            Err(e) => {
                eprintln!("{}: {e}", rec.id);
                failures += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    w.flush()?;
    match first_error {
        Some(e) => {
            Err(anyhow::Error::new(e).context(format!("{failures} record(s) failed to encode")))
        }
        None => Ok(()),
    }
}
