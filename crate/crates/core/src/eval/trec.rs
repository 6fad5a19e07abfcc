//! TREC run and qrels files.
//!
//! Run lines: `query_id Q0 doc_id rank score tag` (whitespace separated).
//! Qrels lines: `query_id 0 doc_id grade`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::{hit_order, SearchHit};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFile<T> {
    /// Per query, sorted by score descending then doc id ascending.
    queries: BTreeMap<String, Vec<SearchHit<T>>>,
}

impl<T: Real> Default for RunFile<T> {
    fn default() -> Self {
        Self {
            queries: BTreeMap::new(),
        }
    }
}

impl<T: Real> RunFile<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces a query's ranking. Scores must be finite, ids unique.
    pub fn insert(
        &mut self,
        query_id: impl Into<String>,
        mut hits: Vec<SearchHit<T>>,
    ) -> Result<()> {
        let query_id = query_id.into();
        let mut seen = HashSet::with_capacity(hits.len());
        for h in &hits {
            if !h.score.is_finite() {
                return Err(Error::NonFinite("run score"));
            }
            if !seen.insert(h.doc_id.as_str()) {
                return Err(Error::DuplicateId(format!("{query_id}/{}", h.doc_id)));
            }
        }
        hits.sort_by(hit_order);
        self.queries.insert(query_id, hits);
        Ok(())
    }

    pub fn get(&self, query_id: &str) -> Option<&[SearchHit<T>]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }

    pub fn queries(&self) -> impl Iterator<Item = (&str, &[SearchHit<T>])> {
        self.queries.iter().map(|(q, h)| (q.as_str(), h.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn to_trec(&self, tag: &str) -> String {
        let mut out = String::new();
        for (q, hits) in &self.queries {
            for (i, h) in hits.iter().enumerate() {
                let _ = writeln!(out, "{q} Q0 {} {} {} {tag}", h.doc_id, i + 1, h.score);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        query_id: impl Into<String>,
        doc_id: impl Into<String>,
        grade: u32,
    ) -> Result<()> {
        let (q, d) = (query_id.into(), doc_id.into());
        let docs = self.judgments.entry(q.clone()).or_default();
        if docs.insert(d.clone(), grade).is_some() {
            return Err(Error::DuplicateId(format!("{q}/{d}")));
        }
        Ok(())
    }

    pub fn get(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.get(query_id)
            .and_then(|d| d.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn to_trec(&self) -> String {
        let mut out = String::new();
        for (q, docs) in &self.judgments {
            for (d, g) in docs {
                let _ = writeln!(out, "{q} 0 {d} {g}");
            }
        }
        out
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_run<T: Real>(reader: impl BufRead) -> Result<RunFile<T>> {
    let mut staged: BTreeMap<String, Vec<SearchHit<T>>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(parse_err(
                n,
                format!("expected 6 columns, found {}", cols.len()),
            ));
        }
        cols[3]
            .parse::<u64>()
            .map_err(|_| parse_err(n, format!("bad rank `{}`", cols[3])))?;
        let score: T = cols[4]
            .parse()
            .map_err(|_| parse_err(n, format!("bad score `{}`", cols[4])))?;
        if !score.is_finite() {
            return Err(parse_err(n, "non-finite score"));
        }
        if !seen.insert((cols[0].to_owned(), cols[2].to_owned())) {
            return Err(parse_err(
                n,
                format!("duplicate doc `{}` for query `{}`", cols[2], cols[0]),
            ));
        }
        staged
            .entry(cols[0].to_owned())
            .or_default()
            .push(SearchHit {
                doc_id: cols[2].to_owned(),
                score,
            });
    }
    let mut run = RunFile::new();
    for (q, hits) in staged {
        run.insert(q, hits)?;
    }
    Ok(run)
}

pub fn parse_qrels(reader: impl BufRead) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(parse_err(
                n,
                format!("expected 4 columns, found {}", cols.len()),
            ));
        }
        let grade: u32 = cols[3].parse().map_err(|_| {
            parse_err(
                n,
                format!("bad grade `{}` (non-negative integer expected)", cols[3]),
            )
        })?;
        qrels.insert(cols[0], cols[2], grade).map_err(|_| {
            parse_err(
                n,
                format!("duplicate judgment for `{}` `{}`", cols[0], cols[2]),
            )
        })?;
    }
    Ok(qrels)
}

pub fn load_run<T: Real>(path: impl AsRef<Path>) -> Result<RunFile<T>> {
    parse_run(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn load_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    parse_qrels(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_run<T: Real>(run: &RunFile<T>, path: impl AsRef<Path>, tag: &str) -> Result<()> {
    std::fs::write(path, run.to_trec(tag))?;
    Ok(())
}
