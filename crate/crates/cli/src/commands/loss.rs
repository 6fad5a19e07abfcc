use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rankreason::losses::{
    combine_stage, info_nce, kl_reg, sft_nll, triplet, ContrastiveBatch, LossComponents,
    TokenLogProbs,
};
use rankreason::Embedding;
use serde::{Deserialize, Serialize};

use super::{read_jsonl, sink};
use crate::config::Config;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LossRecord {
    query: Vec<f64>,
    positive: Vec<f64>,
    negatives: Vec<Vec<f64>>,
    #[serde(default)]
    policy_logp: Vec<f64>,
    #[serde(default)]
    reference_logp: Option<Vec<f64>>,
    #[serde(default)]
    response_mask: Vec<bool>,
}

#[derive(Debug, Serialize)]
struct LossOutput {
    sft: f64,
    nce: f64,
    tri: f64,
    kl: f64,
    total: f64,
}

/// The triplet term averages the hinge over every negative.
fn score(config: &Config, rec: LossRecord) -> Result<LossOutput> {
    let w = &config.stage_weights;
    let batch = ContrastiveBatch::new(
        Embedding::new(rec.query)?,
        Embedding::new(rec.positive)?,
        rec.negatives
            .into_iter()
            .map(Embedding::new)
            .collect::<Result<_, _>>()?,
        config.temperature,
    )?;
    let nce = info_nce(&batch)?.value;
    let mut tri = 0.0;
    for n in &batch.negatives {
        tri += triplet(&batch.query, &batch.positive, n, config.margin)?.value;
    }
    tri /= batch.negatives.len() as f64;

    let tokens = if rec.policy_logp.is_empty() {
        None
    } else {
        Some(TokenLogProbs::new(
            rec.policy_logp,
            rec.reference_logp,
            rec.response_mask,
        )?)
    };
    let sft = match &tokens {
        Some(t) => sft_nll(t)?,
        None if w.sft == 0.0 => 0.0,
        None => bail!("sft weight is {} but the record has no policy_logp", w.sft),
    };
    let kl = match &tokens {
        Some(t) if t.reference_logp.is_some() => kl_reg(t)?,
        _ if w.kl == 0.0 => 0.0,
        _ => bail!("kl weight is {} but the record has no reference_logp", w.kl),
    };
    let components = LossComponents { sft, nce, tri, kl };
    Ok(LossOutput {
        sft,
        nce,
        tri,
        kl,
        total: combine_stage(w, &components)?,
    })
}

pub fn run(config: &Config, input: &Path, out: Option<&Path>) -> Result<()> {
    let mut w = sink(out)?;
    for (line, rec) in read_jsonl::<LossRecord>(input)? {
        let scored = score(config, rec).with_context(|| format!("line {line}"))?;
        serde_json::to_writer(&mut w, &scored)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
