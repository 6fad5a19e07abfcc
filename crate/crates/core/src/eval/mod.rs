//! nDCG@k with exponential gain and per-task macro averaging.
//!
//! `DCG@k = Σ_{i ≤ k} (2^grade_i − 1) / log2(i + 1)`, normalized by the DCG of
//! the ideal ordering of all judged documents.

mod report;
mod trec;

pub use report::{aggregate, MetricReport, BRIGHT_TASKS};
pub use trec::{load_qrels, load_run, parse_qrels, parse_run, save_run, Qrels, RunFile};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_K: usize = 10;

fn gain<T: Real>(grade: u32) -> T {
    T::lit(2.0).powi(grade as i32) - T::one()
}

fn discount<T: Real>(rank: usize) -> T {
    T::lit((rank + 1) as f64).log2()
}

fn dcg<T: Real>(grades: impl Iterator<Item = u32>, k: usize) -> T {
    grades.take(k).enumerate().fold(T::zero(), |acc, (i, g)| {
        acc + gain::<T>(g) / discount::<T>(i + 1)
    })
}

/// Per-query nDCG@k for every query in the run.
///
/// A run query absent from the qrels, or judged with no positive grade, is
/// an error rather than a silent zero. Judged queries missing from the run
/// are not evaluated.
pub fn ndcg_at_k<T: Real>(
    run: &RunFile<T>,
    qrels: &Qrels,
    k: usize,
) -> Result<BTreeMap<String, T>> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let mut out = BTreeMap::new();
    for (qid, hits) in run.queries() {
        let judged = qrels.get(qid).ok_or_else(|| {
            Error::Evaluation(format!("query `{qid}` has no relevance judgments"))
        })?;
        let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
        if ideal.is_empty() {
            return Err(Error::Evaluation(format!(
                "query `{qid}` has no positive judgment"
            )));
        }
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        let idcg: T = dcg(ideal.into_iter(), k);
        let got: T = dcg(
            hits.iter()
                .map(|h| judged.get(&h.doc_id).copied().unwrap_or(0)),
            k,
        );
        out.insert(qid.to_owned(), got / idcg);
    }
    Ok(out)
}
