use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Result};
use rankreason::eval::{aggregate, load_qrels, load_run, ndcg_at_k};
use rankreason::RunFile64;

use super::{open, sink};
use crate::ReportFormat;

fn read_task_map(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let cols: Vec<&str> = line.split_whitespace().collect();
        match cols.as_slice() {
            [] => continue,
            [q, t] => {
                if map.insert(q.to_string(), t.to_string()).is_some() {
                    bail!("{} line {}: duplicate query `{q}`", path.display(), i + 1);
                }
            }
            _ => bail!(
                "{} line {}: expected `query_id task`",
                path.display(),
                i + 1
            ),
        }
    }
    Ok(map)
}

pub fn run(
    run: &Path,
    qrels: &Path,
    k: usize,
    task_map: Option<&Path>,
    format: ReportFormat,
    json_out: Option<&Path>,
) -> Result<()> {
    let run: RunFile64 = load_run(run)?;
    let qrels = load_qrels(qrels)?;
    let per_query = ndcg_at_k(&run, &qrels, k)?;
    let tasks = task_map.map(read_task_map).transpose()?;
    if let Some(map) = &tasks {
        if let Some(q) = per_query.keys().find(|q| !map.contains_key(*q)) {
            return Err(anyhow!("query `{q}` missing from the task map"));
        }
    }
    let report = aggregate(&per_query, |q| match &tasks {
        Some(map) => map[q].clone(),
        None => "all".to_string(),
    })?;
    let metric = format!("ndcg@{k}");
    let mut w = sink(None)?;
    match format {
        ReportFormat::Table => w.write_all(report.to_table(&metric).as_bytes())?,
        ReportFormat::Json => writeln!(w, "{}", report.to_json())?,
    }
    w.flush()?;
    if let Some(path) = json_out {
        std::fs::write(path, report.to_json() + "\n")?;
    }
    Ok(())
}
