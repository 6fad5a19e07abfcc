//! Generated reference pages.
//!
//! Every numeric table in the docs comes from here, so a change to a default
//! or a preset shows up as a diff against the checked-in pages.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::grpo::{train, GrpoConfig};
use crate::index::{INDEX_MAGIC, INDEX_VERSION};
use crate::losses::{
    combine_stage, LossComponents, StageLossWeights, DEFAULT_NCE_TEMPERATURE,
    DEFAULT_TRIPLET_MARGIN,
};
use crate::protocol::{
    validate_output_format, BackendRequest, BackendResponse, EncodeMode, FormatVerdict,
    DEFAULT_MAX_REASONING_TOKENS, ENDPOINT_ENV,
};
use crate::reward::{format_reward, total_reward, FormatPolicy, DEFAULT_TAU};
use crate::stage::TrainingStage;
use crate::toy_env::{ToyEnvironment, ToyParams};

/// Seed and size of the worked example.
pub const DOCS_SEED: u64 = 7;
pub const DOCS_TASKS: usize = crate::toy_env::DEFAULT_TASKS;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocFile {
    pub name: &'static str,
    pub contents: String,
}

pub fn regenerate_docs_fixtures(seed: u64) -> Result<Vec<DocFile>> {
    Ok(vec![
        DocFile {
            name: "stage-weights.md",
            contents: stage_weights_page()?,
        },
        DocFile {
            name: "reward-reference.md",
            contents: reward_page()?,
        },
        DocFile {
            name: "file-formats.md",
            contents: formats_page(),
        },
        DocFile {
            name: "worked-example.md",
            contents: worked_example(seed)?,
        },
    ])
}

pub fn write_docs(dir: &Path, seed: u64) -> Result<()> {
    fs::create_dir_all(dir)?;
    for f in regenerate_docs_fixtures(seed)? {
        fs::write(dir.join(f.name), f.contents)?;
    }
    Ok(())
}

/// Names of pages whose checked-in copy differs from a fresh render.
pub fn check_docs(dir: &Path, seed: u64) -> Result<Vec<&'static str>> {
    let mut drift = Vec::new();
    for f in regenerate_docs_fixtures(seed)? {
        match fs::read_to_string(dir.join(f.name)) {
            Ok(existing) if existing == f.contents => {}
            _ => drift.push(f.name),
        }
    }
    Ok(drift)
}

fn stage_weights_page() -> Result<String> {
    let mut s = String::from("# Stage loss weights\n\n");
    s.push_str("Generated from `StageLossWeights` presets.\n\n");
    s.push_str("| stage | sft | nce | tri | kl | sum of weights |\n|---|---|---|---|---|---|\n");
    for w in [
        StageLossWeights::<f64>::stage1(),
        StageLossWeights::stage2(),
    ] {
        let total = combine_stage(&w, &LossComponents::splat(1.0))?;
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            w.stage, w.sft, w.nce, w.tri, w.kl, total
        );
    }
    let _ = write!(
        s,
        "\nKernel defaults: InfoNCE temperature {DEFAULT_NCE_TEMPERATURE}, triplet margin {DEFAULT_TRIPLET_MARGIN}, \
         in-batch negatives off. The reward stage uses no loss weights.\n"
    );
    Ok(s)
}

fn reward_page() -> Result<String> {
    let policy = FormatPolicy::<f64>::default();
    let mut s = String::from("# Reward reference\n\n");
    s.push_str("```text\nRank(p)  = 1 + Σ_n σ((s(q,n) − s(q,p)) / τ)\n");
    s.push_str(
        "R_rank   = 1 − mean_p ln Rank(p) / ln(|N| + 1)      (R_rank = 1 when N is empty)\n",
    );
    s.push_str("R_total  = R_rank + R_format                          (R_format alone when gated)\n```\n\n");
    s.push_str("## Defaults\n\n| parameter | value |\n|---|---|\n");
    let _ = writeln!(s, "| tau | {DEFAULT_TAU} |");
    let _ = writeln!(s, "| penalty_valid | {} |", policy.penalty_valid);
    let _ = writeln!(s, "| penalty_invalid | {} |", policy.penalty_invalid);
    let _ = writeln!(s, "| gating | {} |", policy.gating);

    s.push_str("\n## Format policy\n\n| output | verdict | r_format | gated | r_total (r_rank = 0.5) |\n|---|---|---|---|---|\n");
    let scores = crate::reward::ScoreSet::new(vec![0.9], vec![0.95, 0.5, 0.3], 1e-4)?;
    let cases = [
        "core concepts and related terms <emb_token>",
        "analysis <emb_token> trailing text",
        "<emb_token>",
        "no terminal token",
    ];
    for case in cases {
        let verdict = validate_output_format(case, TrainingStage::Stage3);
        let fr = format_reward(&verdict, &policy);
        let b = total_reward(Some(&scores), fr)?;
        let _ = writeln!(
            s,
            "| `{case}` | {} | {} | {} | {:.4} |",
            verdict_label(&verdict),
            fr.r_format,
            fr.gated,
            b.r_total
        );
    }
    Ok(s)
}

fn verdict_label(v: &FormatVerdict) -> String {
    match v.reason {
        None => "valid".into(),
        Some(r) => r.to_string(),
    }
}

fn formats_page() -> String {
    let req = BackendRequest {
        prompt: "<assembled prompt>".into(),
        mode: EncodeMode::GenerateEmbed,
        max_tokens: DEFAULT_MAX_REASONING_TOKENS,
    };
    let resp = BackendResponse {
        reasoning: "1. Core concepts ...".into(),
        embedding: vec![0.12, -0.03],
        token_found: true,
    };
    let mut s = String::from("# File formats\n\n## Index file\n\n");
    let _ = writeln!(
        s,
        "Magic `{}`, version {INDEX_VERSION}. All fields little-endian.\n",
        String::from_utf8_lossy(INDEX_MAGIC)
    );
    s.push_str("| field | type |\n|---|---|\n| magic | 4 bytes |\n| version | u16 |\n| dim | u32 |\n| count | u64 |\n");
    s.push_str("| per entry: id length | u16 |\n| per entry: id | UTF-8 bytes |\n| per entry: values | dim × f32 |\n| checksum | CRC-32 of all preceding bytes, u32 |\n\n");
    s.push_str("## Corpus and query JSONL\n\nOne object per line: `{\"id\": \"...\", \"text\": \"...\"}`.\n\n");
    s.push_str("## TREC files\n\nRun: `query_id Q0 doc_id rank score tag`. Qrels: `query_id 0 doc_id grade`.\n\n");
    s.push_str("## Remote encoder wire format\n\nOne JSON line each way over TCP.\n\n```json\n");
    let _ = writeln!(s, "{}", serde_json::to_string(&req).expect("serializable"));
    let _ = writeln!(s, "{}", serde_json::to_string(&resp).expect("serializable"));
    let _ = writeln!(s, "```\n\nDocument-side requests use mode `embed_only` and max_tokens 0. The endpoint is read from `--backend-endpoint` or `{ENDPOINT_ENV}`.");
    s
}

fn worked_example(seed: u64) -> Result<String> {
    let params = ToyParams::default();
    let config = GrpoConfig::<f64> {
        seed,
        ..Default::default()
    };
    let env = ToyEnvironment::generate(
        seed,
        DOCS_TASKS,
        params,
        DEFAULT_TAU,
        FormatPolicy::default(),
    )?;
    let initial = env.uniform_policy();
    let baseline = env.expected_r_rank(&initial)?;
    let run = train(&env, initial, &config)?;
    let trained = env.expected_r_rank(&run.policy)?;
    let argmax = env.bridge_argmax_rate(&run.policy)?;

    let mut s = String::from("# Worked example: GRPO on the synthetic environment\n\n");
    s.push_str("Regenerate with `rankreason docs --out docs`.\n\n## Configuration\n\n| key | value |\n|---|---|\n");
    let _ = writeln!(s, "| seed | {seed} |\n| tasks | {DOCS_TASKS} |\n| vocab_size | {} |\n| dim | {} |\n| expansions | {} |\n| distractors | {} |",
        params.vocab_size, params.dim, params.n_expansions, params.n_distractors);
    let _ = writeln!(
        s,
        "| group_size | {} |\n| lr | {} |\n| iterations | {} |\n| tau | {DEFAULT_TAU} |",
        config.group_size, config.learning_rate, config.iterations
    );
    s.push_str("\n## Learning curve (sampled groups)\n\n| iteration | mean_reward | mean_r_rank | format_violation_rate |\n|---|---|---|---|\n");
    for h in run
        .history
        .iter()
        .filter(|h| h.iteration % 20 == 0 || h.iteration + 1 == config.iterations)
    {
        let _ = writeln!(
            s,
            "| {} | {:.6} | {:.6} | {:.6} |",
            h.iteration, h.mean_reward, h.mean_r_rank, h.format_violation_rate
        );
    }
    s.push_str(
        "\n## Summary (exact expectations under the policy)\n\n| quantity | value |\n|---|---|\n",
    );
    let _ = writeln!(s, "| uniform-policy r_rank | {baseline:.6} |\n| trained-policy r_rank | {trained:.6} |\n| improvement | {:.6} |\n| bridge is argmax | {:.1}% |",
        trained - baseline, argmax * 100.0);
    Ok(s)
}
