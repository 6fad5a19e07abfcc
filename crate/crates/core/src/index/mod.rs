//! Exact dense index: brute-force cosine top-k over normalized embeddings.

mod corpus;
mod persist;

pub use corpus::{read_corpus, CorpusRecord};
pub use persist::{decode_index, encode_index, load_index, save_index, INDEX_MAGIC, INDEX_VERSION};

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::Serialize;

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry<T> {
    pub doc_id: String,
    pub embedding: Embedding<T>,
}

impl<T: Real> IndexEntry<T> {
    pub fn new(doc_id: impl Into<String>, embedding: Embedding<T>) -> Self {
        Self {
            doc_id: doc_id.into(),
            embedding,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit<T> {
    pub doc_id: String,
    pub score: T,
}

/// Score descending, then doc id ascending.
pub fn hit_order<T: Real>(a: &SearchHit<T>, b: &SearchHit<T>) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Immutable after construction; every stored vector is unit-norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Index<T> {
    dim: usize,
    entries: Vec<IndexEntry<T>>,
}

impl<T: Real> Index<T> {
    pub fn build(entries: Vec<IndexEntry<T>>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Error::invalid("index needs at least one entry"));
        };
        let dim = first.embedding.dim();
        let mut seen = HashSet::with_capacity(entries.len());
        let mut normalized = Vec::with_capacity(entries.len());
        for entry in entries {
            if entry.embedding.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: entry.embedding.dim(),
                });
            }
            if !seen.insert(entry.doc_id.clone()) {
                return Err(Error::DuplicateId(entry.doc_id));
            }
            normalized.push(IndexEntry {
                doc_id: entry.doc_id,
                embedding: entry.embedding.into_normalized()?,
            });
        }
        Ok(Self {
            dim,
            entries: normalized,
        })
    }

    pub(crate) fn from_loaded(dim: usize, entries: Vec<IndexEntry<T>>) -> Self {
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry<T>] {
        &self.entries
    }

    fn check_query(&self, query: &Embedding<T>) -> Result<Embedding<T>> {
        if query.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: query.dim(),
            });
        }
        query.clone().into_normalized()
    }

    /// Cosine score of the query against every entry, in storage order.
    pub fn score_all(&self, query: &Embedding<T>) -> Result<Vec<SearchHit<T>>> {
        let q = self.check_query(query)?;
        self.entries
            .iter()
            .map(|e| {
                Ok(SearchHit {
                    doc_id: e.doc_id.clone(),
                    score: q.dot(&e.embedding)?,
                })
            })
            .collect()
    }

    pub fn score_of(&self, query: &Embedding<T>, doc_id: &str) -> Result<Option<T>> {
        let q = self.check_query(query)?;
        self.entries
            .iter()
            .find(|e| e.doc_id == doc_id)
            .map(|e| q.dot(&e.embedding))
            .transpose()
    }

    /// Exactly `min(k, len)` hits in [`hit_order`].
    pub fn search(&self, query: &Embedding<T>, k: usize) -> Result<Vec<SearchHit<T>>> {
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        let mut hits = self.score_all(query)?;
        let k = k.min(hits.len());
        if k < hits.len() {
            hits.select_nth_unstable_by(k - 1, hit_order);
            hits.truncate(k);
        }
        hits.sort_by(hit_order);
        Ok(hits)
    }
}

pub fn build_index<T: Real>(entries: Vec<IndexEntry<T>>) -> Result<Index<T>> {
    Index::build(entries)
}

pub fn search_topk<T: Real>(
    index: &Index<T>,
    query: &Embedding<T>,
    k: usize,
) -> Result<Vec<SearchHit<T>>> {
    index.search(query, k)
}
