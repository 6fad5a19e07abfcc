//! Asymmetric encoding protocol.
//!
//! Queries are rendered through a chat template, the encoder decodes a
//! bounded reasoning sequence and then emits [`EMB_TOKEN`]; the hidden state
//! at that position is the query vector. Documents skip generation: the
//! instruction, the text and the token are encoded in one forward pass.

mod backend;
mod format;
mod templates;

pub use backend::{
    BackendDescriptor, BackendRequest, BackendResponse, EncodeMode, EncoderBackend, MockBackend,
    RemoteBackend, DEFAULT_MAX_REASONING_TOKENS, DEFAULT_MOCK_DIM, ENDPOINT_ENV,
};
pub use format::{validate_output_format, FormatVerdict, FormatViolation};
pub use templates::{
    assemble_doc_prompt, assemble_generation_prompt, assemble_query_prompt,
    assemble_trajectory_prompt, DocPromptTemplate, QueryPromptTemplate, DOC_INSTRUCTION,
    DOC_SEPARATOR, EMB_TOKEN, IM_END, IM_START, STAGE1_INSTRUCT_PREFIX, STAGE1_SUFFIX,
    STAGE1_SYSTEM, STAGE2_QUERY_INSTRUCTION, TRAJECTORY_PROMPT,
};

use serde::Serialize;

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodeResponse<T> {
    /// Decoded reasoning; always empty on the document side.
    pub reasoning_text: String,
    /// Present iff `token_found`.
    pub embedding: Option<Embedding<T>>,
    pub token_found: bool,
    /// Whitespace-delimited reasoning length.
    pub generated_len: usize,
}

fn into_response<T: Real>(resp: BackendResponse) -> Result<EncodeResponse<T>> {
    let generated_len = resp.reasoning.split_whitespace().count();
    let embedding = if resp.token_found {
        if resp.embedding.is_empty() {
            return Err(Error::BackendProtocol(
                "token reported but no embedding returned".into(),
            ));
        }
        Some(Embedding::new(
            resp.embedding.into_iter().map(T::lit).collect(),
        )?)
    } else {
        None
    };
    Ok(EncodeResponse {
        reasoning_text: resp.reasoning,
        embedding,
        token_found: resp.token_found,
        generated_len,
    })
}

pub fn encode_query<T: Real>(
    backend: &dyn EncoderBackend,
    query: &str,
    template: &QueryPromptTemplate,
) -> Result<EncodeResponse<T>> {
    let prompt = assemble_generation_prompt(query, template)?;
    let limit = backend.max_reasoning_tokens();
    let resp = backend.complete(&BackendRequest {
        prompt,
        mode: EncodeMode::GenerateEmbed,
        max_tokens: limit,
    })?;
    let out = into_response(resp)?;
    if out.generated_len > limit {
        return Err(Error::BackendProtocol(format!(
            "reasoning has {} tokens, limit is {limit}",
            out.generated_len
        )));
    }
    Ok(out)
}

pub fn encode_doc<T: Real>(
    backend: &dyn EncoderBackend,
    doc: &str,
    template: &DocPromptTemplate,
) -> Result<EncodeResponse<T>> {
    let prompt = assemble_doc_prompt(doc, template)?;
    let resp = backend.complete(&BackendRequest {
        prompt,
        mode: EncodeMode::EmbedOnly,
        max_tokens: 0,
    })?;
    if !resp.reasoning.is_empty() {
        return Err(Error::BackendProtocol(
            "document side must not generate reasoning".into(),
        ));
    }
    into_response(resp)
}
