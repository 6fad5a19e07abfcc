use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use rankreason::grpo::train as grpo_train;
use rankreason::index::{save_index, Index, IndexEntry};
use rankreason::ToyEnvironment64;
use serde_json::json;

use super::sink;
use crate::config::Config;

fn environment(config: &Config) -> Result<ToyEnvironment64> {
    Ok(ToyEnvironment64::generate(
        config.grpo.seed,
        config.tasks,
        Default::default(),
        config.tau,
        config.format_policy,
    )?)
}

pub fn train(config: &Config, out: Option<&Path>) -> Result<()> {
    let env = environment(config)?;
    let initial = env.uniform_policy();
    let baseline = env.expected_r_rank(&initial)?;
    let run = grpo_train(&env, initial, &config.grpo)?;
    let mut w = sink(out)?;
    writeln!(w, "iteration,mean_reward,mean_r_rank,format_violation_rate")?;
    for h in &run.history {
        writeln!(
            w,
            "{},{},{},{}",
            h.iteration, h.mean_reward, h.mean_r_rank, h.format_violation_rate
        )?;
    }
    w.flush()?;
    eprintln!(
        "expected r_rank {:.4} -> {:.4}; bridge is argmax on {:.1}% of tasks",
        baseline,
        env.expected_r_rank(&run.policy)?,
        env.bridge_argmax_rate(&run.policy)? * 100.0
    );
    Ok(())
}

/// Writes `index.t1ix`, `queries_bridge.jsonl`, `queries_plain.jsonl`,
/// `qrels.txt` and `corpus.jsonl` for the configured environment.
pub fn export(config: &Config, dir: &Path) -> Result<()> {
    let env = environment(config)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut entries = Vec::new();
    let mut corpus = String::new();
    let mut bridge = String::new();
    let mut plain = String::new();
    let mut qrels = String::new();
    for (i, task) in env.tasks().iter().enumerate() {
        for e in task.corpus() {
            entries.push(IndexEntry::new(e.doc_id.clone(), e.embedding.clone()));
        }
        for (id, tokens) in &task.doc_tokens {
            corpus += &format!(
                "{}\n",
                json!({"id": id, "text": rankreason::toy_env::token_text(tokens)})
            );
        }
        bridge += &format!(
            "{}\n",
            json!({"id": task.id, "embedding": env.query_embedding(i, task.bridge)?.values()})
        );
        plain += &format!(
            "{}\n",
            json!({"id": task.id, "embedding": env.query_only_embedding(i)?.values()})
        );
        qrels += &format!("{} 0 {} 1\n", task.id, task.positive_id);
    }
    save_index(&Index::build(entries)?, dir.join("index.t1ix"))?;
    fs::write(dir.join("corpus.jsonl"), corpus)?;
    fs::write(dir.join("queries_bridge.jsonl"), bridge)?;
    fs::write(dir.join("queries_plain.jsonl"), plain)?;
    fs::write(dir.join("qrels.txt"), qrels)?;
    eprintln!("exported {} tasks to {}", env.tasks().len(), dir.display());
    Ok(())
}
