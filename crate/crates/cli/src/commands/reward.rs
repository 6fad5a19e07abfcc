use std::io::Write;
use std::path::Path;

use anyhow::Result;
use rankreason::protocol::{validate_output_format, FormatVerdict};
use rankreason::reward::{format_reward, total_reward, ScoreSet};
use rankreason::TrainingStage;
use serde::Deserialize;

use super::{read_jsonl, sink};
use crate::config::Config;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardRecord {
    positives: Vec<f64>,
    #[serde(default)]
    negatives: Vec<f64>,
    #[serde(default)]
    tau: Option<f64>,
    /// Generated text; when absent the output counts as well formed.
    #[serde(default)]
    output: Option<String>,
}

pub fn run(config: &Config, input: &Path, out: Option<&Path>) -> Result<()> {
    let mut w = sink(out)?;
    for (line, rec) in read_jsonl::<RewardRecord>(input)? {
        let verdict = match &rec.output {
            Some(text) => validate_output_format(text, TrainingStage::Stage3),
            None => FormatVerdict::VALID,
        };
        let scores = ScoreSet::new(rec.positives, rec.negatives, rec.tau.unwrap_or(config.tau))
            .map_err(|e| anyhow::Error::new(e).context(format!("line {line}")))?;
        let breakdown = total_reward(
            Some(&scores),
            format_reward(&verdict, &config.format_policy),
        )?;
        serde_json::to_writer(&mut w, &breakdown)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
