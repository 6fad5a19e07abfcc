//! Encoder backends: the wire contract, a deterministic mock, and a remote client.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::templates::{EMB_TOKEN, IM_END, IM_START};
use crate::embedding::seeded_unit_vector;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_REASONING_TOKENS: usize = 512;
pub const DEFAULT_MOCK_DIM: usize = 256;
/// Environment variable consulted for the remote endpoint.
pub const ENDPOINT_ENV: &str = "T1_BACKEND_ENDPOINT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodeMode {
    /// Query side: decode reasoning, then read the token state.
    GenerateEmbed,
    /// Document side: one forward pass, no decoding.
    EmbedOnly,
}

/// One request line on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub prompt: String,
    pub mode: EncodeMode,
    pub max_tokens: usize,
}

/// One response line on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResponse {
    #[serde(default)]
    pub reasoning: String,
    #[serde(default)]
    pub embedding: Vec<f64>,
    pub token_found: bool,
}

pub trait EncoderBackend: Send + Sync {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse>;

    fn max_reasoning_tokens(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendDescriptor {
    DeterministicMock {
        seed: u64,
        dim: usize,
        max_reasoning_tokens: usize,
    },
    RemoteService {
        endpoint: String,
        max_reasoning_tokens: usize,
    },
}

impl Default for BackendDescriptor {
    fn default() -> Self {
        BackendDescriptor::DeterministicMock {
            seed: 0,
            dim: DEFAULT_MOCK_DIM,
            max_reasoning_tokens: DEFAULT_MAX_REASONING_TOKENS,
        }
    }
}

impl BackendDescriptor {
    pub fn max_reasoning_tokens(&self) -> usize {
        match self {
            BackendDescriptor::DeterministicMock {
                max_reasoning_tokens,
                ..
            }
            | BackendDescriptor::RemoteService {
                max_reasoning_tokens,
                ..
            } => *max_reasoning_tokens,
        }
    }

    pub fn connect(&self) -> Result<Box<dyn EncoderBackend>> {
        if self.max_reasoning_tokens() == 0 {
            return Err(Error::invalid("max_reasoning_tokens must be positive"));
        }
        match self {
            BackendDescriptor::DeterministicMock {
                seed,
                dim,
                max_reasoning_tokens,
            } => Ok(Box::new(MockBackend::new(
                *seed,
                *dim,
                *max_reasoning_tokens,
            )?)),
            BackendDescriptor::RemoteService {
                endpoint,
                max_reasoning_tokens,
            } => Ok(Box::new(RemoteBackend::new(
                endpoint.clone(),
                *max_reasoning_tokens,
            )?)),
        }
    }
}

/// Stateless stand-in encoder.
///
/// The embedding is a seeded hash of the full prompt expanded to `dim` unit
/// normals; query-side reasoning is a canned three-step analysis of the user
/// turn, truncated to the token budget.
#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
    dim: usize,
    max_reasoning_tokens: usize,
}

impl MockBackend {
    pub fn new(seed: u64, dim: usize, max_reasoning_tokens: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("mock dimension must be positive"));
        }
        Ok(Self {
            seed,
            dim,
            max_reasoning_tokens,
        })
    }

    fn canned_reasoning(prompt: &str, budget: usize) -> String {
        let user = prompt
            .rsplit_once(&format!("{IM_START}user\n"))
            .map(|(_, rest)| rest.split(IM_END).next().unwrap_or(rest))
            .unwrap_or(prompt);
        let text = format!(
            "1. Core concepts: {user}. 2. Related terms and context for {user}. \
             3. The ideal document explains {user}."
        );
        text.split_whitespace()
            .take(budget)
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl EncoderBackend for MockBackend {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse> {
        let embedding = seeded_unit_vector::<f64>(self.seed, request.prompt.as_bytes(), self.dim)?
            .into_values();
        let reasoning = match request.mode {
            EncodeMode::GenerateEmbed => Self::canned_reasoning(
                &request.prompt,
                request.max_tokens.min(self.max_reasoning_tokens),
            ),
            EncodeMode::EmbedOnly => String::new(),
        };
        let token_found = match request.mode {
            EncodeMode::GenerateEmbed => true,
            EncodeMode::EmbedOnly => request.prompt.ends_with(EMB_TOKEN),
        };
        Ok(BackendResponse {
            reasoning,
            embedding: if token_found { embedding } else { Vec::new() },
            token_found,
        })
    }

    fn max_reasoning_tokens(&self) -> usize {
        self.max_reasoning_tokens
    }
}

/// Newline-delimited JSON over TCP: one request line, one response line.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    endpoint: String,
    max_reasoning_tokens: usize,
    timeout: Duration,
}

impl RemoteBackend {
    pub fn new(endpoint: String, max_reasoning_tokens: usize) -> Result<Self> {
        if endpoint.trim().is_empty() {
            return Err(Error::invalid("remote backend requires an endpoint"));
        }
        Ok(Self {
            endpoint,
            max_reasoning_tokens,
            timeout: Duration::from_secs(60),
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl EncoderBackend for RemoteBackend {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse> {
        let transport = |e: std::io::Error| Error::Transport(format!("{}: {e}", self.endpoint));
        let mut stream = TcpStream::connect(&self.endpoint).map_err(transport)?;
        stream
            .set_read_timeout(Some(self.timeout))
            .map_err(transport)?;
        stream
            .set_write_timeout(Some(self.timeout))
            .map_err(transport)?;

        let mut line =
            serde_json::to_vec(request).map_err(|e| Error::BackendProtocol(e.to_string()))?;
        line.push(b'\n');
        stream.write_all(&line).map_err(transport)?;
        stream.flush().map_err(transport)?;

        let mut reply = String::new();
        BufReader::new(stream)
            .read_line(&mut reply)
            .map_err(transport)?;
        if reply.trim().is_empty() {
            return Err(Error::Transport(format!(
                "{}: empty response",
                self.endpoint
            )));
        }
        serde_json::from_str(&reply).map_err(|e| Error::BackendProtocol(e.to_string()))
    }

    fn max_reasoning_tokens(&self) -> usize {
        self.max_reasoning_tokens
    }
}
