use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Column order of the standard reasoning-retrieval benchmark report.
pub const BRIGHT_TASKS: [&str; 12] = [
    "biology",
    "earth_science",
    "economics",
    "psychology",
    "robotics",
    "stackoverflow",
    "sustainable_living",
    "pony",
    "leetcode",
    "aops",
    "theoremqa_questions",
    "theoremqa_theorems",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport<T> {
    pub per_query: BTreeMap<String, T>,
    pub per_task: BTreeMap<String, T>,
    /// Unweighted mean over tasks.
    pub average: T,
}

/// Mean per task, then an unweighted mean across tasks.
pub fn aggregate<T: Real>(
    per_query: &BTreeMap<String, T>,
    task_of: impl Fn(&str) -> String,
) -> Result<MetricReport<T>> {
    if per_query.is_empty() {
        return Err(Error::invalid("nothing to aggregate"));
    }
    let mut buckets: BTreeMap<String, (T, usize)> = BTreeMap::new();
    for (q, &v) in per_query {
        let slot = buckets.entry(task_of(q)).or_insert((T::zero(), 0));
        slot.0 = slot.0 + v;
        slot.1 += 1;
    }
    let per_task: BTreeMap<String, T> = buckets
        .into_iter()
        .map(|(t, (sum, n))| (t, sum / T::lit(n as f64)))
        .collect();
    let average = per_task.values().copied().sum::<T>() / T::lit(per_task.len() as f64);
    Ok(MetricReport {
        per_query: per_query.clone(),
        per_task,
        average,
    })
}

impl<T: Real + Serialize> MetricReport<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl<T: Real> MetricReport<T> {
    /// Aligned two-column table: tasks, then the average.
    pub fn to_table(&self, metric: &str) -> String {
        let width = self
            .per_task
            .keys()
            .map(String::len)
            .chain(["average".len(), "task".len()])
            .max()
            .unwrap_or(7);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {metric:>10}", "task");
        for (t, v) in &self.per_task {
            let _ = writeln!(out, "{t:<width$}  {:>10.4}", v.to_f64_lossy());
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>10.4}",
            "average",
            self.average.to_f64_lossy()
        );
        out
    }
}
