//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::Rng;

use common::*;
use rankreason::eval::{aggregate, ndcg_at_k, Qrels, RunFile, BRIGHT_TASKS};
use rankreason::grpo::{
    group_advantages, policy_gradient_step, train, ActionRef, GroupSample, GrpoConfig,
};
use rankreason::index::{
    decode_index, encode_index, load_index, save_index, Index, IndexEntry, SearchHit,
};
use rankreason::losses::{
    combine_stage, info_nce, info_nce_scores, triplet, ContrastiveBatch, LossComponents,
    StageLossWeights,
};
use rankreason::protocol::{
    assemble_doc_prompt, assemble_query_prompt, validate_output_format, DocPromptTemplate,
    FormatViolation, QueryPromptTemplate,
};
use rankreason::reward::{
    rank_reward, rank_reward_grad, soft_rank, FormatPolicy, RewardBreakdown, ScoreSet,
};
use rankreason::toy_env::{ToyEnvironment, ToyParams, ToyPolicy, DEFAULT_TASKS};
use rankreason::{Embedding, Error, TrainingStage};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn random_scores(
    rng: &mut rand_chacha::ChaCha8Rng,
    len: std::ops::RangeInclusive<usize>,
) -> Vec<f64> {
    let n = rng.random_range(len);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn soft_rank_limit() -> Outcome {
    let mut rng = rng(1);
    let mut worst: f64 = 0.0;
    let mut sets = 0;
    while sets < 1000 {
        let p: f64 = rng.random_range(-1.0..1.0);
        let negs = random_scores(&mut rng, 0..=50);
        if negs.iter().any(|n| (n - p).abs() < 1e-4) {
            continue;
        }
        let soft = ok(soft_rank(p, &negs, 1e-6))?;
        worst = worst.max((soft - hard_rank(p, &negs)).abs());
        sets += 1;
    }
    ensure!(worst < 1e-4, "max |soft - hard| = {worst:e}");
    Ok(format!("1000 sets, max |soft - hard| = {worst:e}"))
}

fn bounds_and_monotonicity() -> Outcome {
    const STEP: f64 = 1e-3;
    const SLACK: f64 = 1e-12;
    let mut rng = rng(2);
    let mut checks = 0usize;
    for _ in 0..10_000 {
        let pos = random_scores(&mut rng, 1..=5);
        let negs = random_scores(&mut rng, 0..=30);
        let tau = rng.random_range(0.005..1.0);
        let set = ok(ScoreSet::new(pos.clone(), negs.clone(), tau))?;
        let r = ok(rank_reward(&set))?;
        ensure!(
            (0.0..=1.0).contains(&r),
            "reward {r} out of [0,1] for {set:?}"
        );
        for i in 0..pos.len() {
            let mut s = set.clone();
            s.positive_scores[i] += STEP;
            let r2 = ok(rank_reward(&s))?;
            ensure!(
                r2 >= r - SLACK,
                "raising positive {i} lowered reward {r} -> {r2}"
            );
            checks += 1;
        }
        for j in 0..negs.len() {
            let mut s = set.clone();
            s.negative_scores[j] += STEP;
            let r2 = ok(rank_reward(&s))?;
            ensure!(
                r2 <= r + SLACK,
                "raising negative {j} raised reward {r} -> {r2}"
            );
            checks += 1;
        }
    }
    Ok(format!(
        "10000 sets in [0,1], {checks} directional perturbations monotone"
    ))
}

fn gradient_checks() -> Outcome {
    const H: f64 = 1e-6;
    let mut rng = rng(3);
    let (mut w_rank, mut w_nce, mut w_tri) = (0.0f64, 0.0f64, 0.0f64);

    for _ in 0..100 {
        let pos = random_scores(&mut rng, 5..=5);
        let negs = random_scores(&mut rng, 20..=20);
        let set = ok(ScoreSet::new(pos.clone(), negs.clone(), 0.05))?;
        let analytic = ok(rank_reward_grad(&set))?;
        let x: Vec<f64> = pos.iter().chain(&negs).copied().collect();
        let numeric = central_diff(&x, H, |v| {
            rank_reward(&ScoreSet::new(v[..5].to_vec(), v[5..].to_vec(), 0.05).unwrap()).unwrap()
        });
        w_rank = w_rank.max(rel_err(&analytic, &numeric));
    }

    for _ in 0..100 {
        let dim = 16;
        let q = random_unit(&mut rng, dim);
        let p = random_unit(&mut rng, dim);
        let negs: Vec<Vec<f64>> = (0..7).map(|_| random_unit(&mut rng, dim)).collect();
        let batch = ok(ContrastiveBatch::new(
            ok(Embedding::new(q.clone()))?,
            ok(Embedding::new(p))?,
            negs.into_iter()
                .map(|n| Embedding::new(n).unwrap())
                .collect(),
            0.05,
        ))?;
        let analytic = ok(info_nce(&batch))?.grad_query;
        let x = batch.query.values().to_vec();
        let numeric = central_diff(&x, H, |v| {
            let mut b = batch.clone();
            b.query = Embedding::new(v.to_vec()).unwrap();
            info_nce(&b).unwrap().value
        });
        w_nce = w_nce.max(rel_err(&analytic, &numeric));
    }

    let mut done = 0;
    while done < 100 {
        let dim = 16;
        let q = ok(Embedding::new(random_unit(&mut rng, dim)))?;
        let p = ok(Embedding::new(random_unit(&mut rng, dim)))?;
        let n = ok(Embedding::new(random_unit(&mut rng, dim)))?;
        let margin = 0.2;
        let raw = margin - dotp(q.values(), p.values()) + dotp(q.values(), n.values());
        if raw.abs() < 1e-3 {
            continue;
        }
        let analytic = ok(triplet(&q, &p, &n, margin))?.grad_query;
        let numeric = central_diff(q.values(), H, |v| {
            triplet(&Embedding::new(v.to_vec()).unwrap(), &p, &n, margin)
                .unwrap()
                .value
        });
        w_tri = w_tri.max(rel_err(&analytic, &numeric));
        done += 1;
    }

    let worst = w_rank.max(w_nce).max(w_tri);
    ensure!(
        worst < 1e-5,
        "relative errors rank {w_rank:e}, nce {w_nce:e}, triplet {w_tri:e}"
    );
    Ok(format!(
        "max relative error rank {w_rank:.1e}, nce {w_nce:.1e}, triplet {w_tri:.1e}"
    ))
}

fn closed_forms() -> Outcome {
    let r: f64 = ok(rank_reward(&ok(ScoreSet::new(
        vec![0.9],
        vec![0.95, 0.5, 0.3],
        1e-4,
    ))?))?;
    ensure!((r - 0.5).abs() < 1e-3, "rank_reward fixture {r}");
    let (v, _) = ok(info_nce_scores(0.3, &[0.3], 0.05))?;
    ensure!(
        (v - std::f64::consts::LN_2).abs() < 1e-9,
        "info_nce equal scores {v}"
    );
    let s1 = ok(combine_stage(
        &StageLossWeights::<f64>::stage1(),
        &LossComponents::splat(1.0),
    ))?;
    let s2 = ok(combine_stage(
        &StageLossWeights::<f64>::stage2(),
        &LossComponents::splat(1.0),
    ))?;
    ensure!(s1 == 16.82, "stage1 sum {s1}");
    ensure!(s2 == 10.3, "stage2 sum {s2}");
    Ok(format!(
        "rank_reward {r:.6}, info_nce {v:.12}, stage sums {s1} / {s2}"
    ))
}

fn invariances() -> Outcome {
    let mut rng = rng(5);
    let (mut shift, mut scale, mut base, mut nce) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let pos = random_scores(&mut rng, 1..=4);
        let negs = random_scores(&mut rng, 1..=20);
        let tau = rng.random_range(0.01..0.5);
        let r = ok(rank_reward(&ok(ScoreSet::new(
            pos.clone(),
            negs.clone(),
            tau,
        ))?))?;

        let c: f64 = rng.random_range(-2.0..2.0);
        let add = |v: &[f64]| v.iter().map(|x| x + c).collect::<Vec<_>>();
        let rs = ok(rank_reward(&ok(ScoreSet::new(add(&pos), add(&negs), tau))?))?;
        shift = shift.max((rs - r).abs());

        let pow2 = 2f64.powi(rng.random_range(-4..=4));
        let mul = |v: &[f64], k: f64| v.iter().map(|x| x * k).collect::<Vec<_>>();
        let r_pow2 = ok(rank_reward(&ok(ScoreSet::new(
            mul(&pos, pow2),
            mul(&negs, pow2),
            tau * pow2,
        ))?))?;
        ensure!(
            r_pow2 == r,
            "power-of-two scale {pow2} changed reward {r} -> {r_pow2}"
        );
        let k = rng.random_range(0.1..10.0);
        let r_k = ok(rank_reward(&ok(ScoreSet::new(
            mul(&pos, k),
            mul(&negs, k),
            tau * k,
        ))?))?;
        scale = scale.max((r_k - r).abs());

        let r2 = rank_reward_with_log(&pos, &negs, tau, f64::log2);
        let r10 = rank_reward_with_log(&pos, &negs, tau, f64::log10);
        base = base.max((r2 - r).abs()).max((r10 - r).abs());

        let (v, _) = ok(info_nce_scores(pos[0], &negs, tau))?;
        let (vs, _) = ok(info_nce_scores(pos[0] + c, &add(&negs), tau))?;
        nce = nce.max((vs - v).abs());
    }
    ensure!(shift <= 1e-12, "translation drift {shift:e}");
    ensure!(scale <= 1e-12, "scale/tau drift {scale:e}");
    ensure!(base <= 1e-12, "log-base drift {base:e}");
    ensure!(nce <= 1e-12, "InfoNCE shift drift {nce:e}");
    Ok(format!("drift shift {shift:.1e}, scale/tau {scale:.1e} (exact for 2^k), log base {base:.1e}, softmax shift {nce:.1e}"))
}

fn grpo_learning() -> Outcome {
    let params = ToyParams::default();
    let config = GrpoConfig::<f64> {
        seed: 7,
        ..Default::default()
    };
    let run = || -> Result<(f64, f64, f64, Vec<f64>), Error> {
        let env =
            ToyEnvironment::generate(7, DEFAULT_TASKS, params, 0.05, FormatPolicy::default())?;
        let initial = env.uniform_policy();
        let baseline = env.expected_r_rank(&initial)?;
        let trained = train(&env, initial, &config)?;
        let after = env.expected_r_rank(&trained.policy)?;
        let argmax = env.bridge_argmax_rate(&trained.policy)?;
        let flat = trained.policy.logits().iter().flatten().copied().collect();
        Ok((baseline, after, argmax, flat))
    };
    let (baseline, after, argmax, logits) = ok(run())?;
    let (_, _, _, again) = ok(run())?;
    let identical = logits
        .iter()
        .zip(&again)
        .all(|(a, b)| a.to_bits() == b.to_bits());
    ensure!(identical, "two runs with the same seed diverged");
    let gain = after - baseline;
    ensure!(
        gain >= 0.2 && argmax >= 0.9,
        "r_rank {baseline:.4} -> {after:.4} (gain {gain:.4}), bridge argmax {:.0}%",
        argmax * 100.0
    );
    Ok(format!(
        "{DEFAULT_TASKS} tasks: r_rank {baseline:.4} -> {after:.4} (+{gain:.4}), bridge argmax {:.0}%, deterministic",
        argmax * 100.0
    ))
}

fn grpo_algebra() -> Outcome {
    let mut rng = rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=16);
        let rewards = random_scores(&mut rng, n..=n);
        let a = ok(group_advantages(&rewards, 1e-8))?;
        worst = worst.max(a.iter().sum::<f64>().abs());
    }
    ensure!(worst < 1e-9, "advantage sum {worst:e}");

    let policy = ok(ToyPolicy::from_logits(vec![vec![0.3, -0.2, 1.1]], 1.0))?;
    let sample = |a| GroupSample {
        query_id: "q".into(),
        trajectory_id: 0,
        action: ActionRef { row: 0, action: a },
        logprob: -1.0,
        reward: RewardBreakdown {
            r_rank: Some(0.4),
            r_format: 0.0,
            r_total: 0.4,
            gated: false,
        },
    };
    let samples = vec![sample(0), sample(2), sample(2)];
    let adv = ok(group_advantages(&[0.4, 0.4, 0.4], 1e-8))?;
    let updated = ok(policy_gradient_step(&policy, &samples, &adv, 0.1))?;
    ensure!(updated == policy, "equal rewards changed the policy");

    let a = ok(group_advantages(&[1.0, 0.0, 0.0, 0.0], 1e-8))?;
    let expect: [f64; 4] = [1.7321, -0.5774, -0.5774, -0.5774];
    ensure!(
        a.iter().zip(expect).all(|(x, e)| (*x - e).abs() < 1e-4),
        "fixture gave {a:?}"
    );
    Ok(format!(
        "max |sum| {worst:.1e}, zero update exact, fixture {a:.4?}"
    ))
}

fn ndcg_oracle_equivalence() -> Outcome {
    let round = |x: f64| (x * 1e12).round();
    let mut rng = rng(8);
    for case in 0..10_000 {
        let n_docs = rng.random_range(1..=20);
        let k = rng.random_range(1..=15);
        let docs: Vec<(String, f64)> = (0..n_docs)
            .map(|d| (format!("d{d:02}"), rng.random_range(0..8) as f64 / 4.0))
            .collect();
        let mut grades = BTreeMap::new();
        for (d, _) in &docs {
            if rng.random_bool(0.4) {
                grades.insert(d.clone(), rng.random_range(0..=3u32));
            }
        }
        if rng.random_bool(0.3) {
            grades.insert("unretrieved".to_string(), rng.random_range(1..=3u32));
        }
        if !grades.values().any(|&g| g > 0) {
            grades.insert(docs[0].0.clone(), 1);
        }
        let mut run = RunFile::new();
        ok(run.insert(
            "q",
            docs.iter()
                .map(|(d, s)| SearchHit {
                    doc_id: d.clone(),
                    score: *s,
                })
                .collect(),
        ))?;
        let mut qrels = Qrels::new();
        for (d, g) in &grades {
            ok(qrels.insert("q", d.clone(), *g))?;
        }
        let got = ok(ndcg_at_k(&run, &qrels, k))?["q"];
        let want = ndcg_oracle(&docs, &grades, k);
        ensure!(
            round(got) == round(want),
            "case {case}: {got} vs oracle {want}"
        );
    }
    let mut run = RunFile::new();
    ok(run.insert(
        "q",
        vec![
            SearchHit {
                doc_id: "a".into(),
                score: 2.0,
            },
            SearchHit {
                doc_id: "b".into(),
                score: 1.0,
            },
        ],
    ))?;
    let mut qrels = Qrels::new();
    ok(qrels.insert("q", "b", 1))?;
    let v: f64 = ok(ndcg_at_k(&run, &qrels, 10))?["q"];
    ensure!((v - 0.6309).abs() < 1e-4, "rank-2 fixture {v}");
    Ok(format!(
        "10000 instances match oracle, rank-2 fixture {v:.6}"
    ))
}

fn reported_averages() -> Outcome {
    let mut got = Vec::new();
    for (name, row, avg) in REPORTED_ROWS {
        let per_query: BTreeMap<String, f64> = BRIGHT_TASKS
            .iter()
            .zip(row)
            .map(|(t, v)| (t.to_string(), v))
            .collect();
        let report = ok(aggregate(&per_query, |q| q.to_string()))?;
        let rounded = (report.average * 10.0).round() / 10.0;
        ensure!(
            rounded == avg,
            "{name}: {} rounds to {rounded}, table says {avg}",
            report.average
        );
        got.push(format!("{name} {rounded}"));
    }
    Ok(got.join(", "))
}

fn protocol_goldens() -> Outcome {
    let stage1 = ok(assemble_query_prompt(
        "where is whitemarsh island",
        &QueryPromptTemplate::stage1(),
    ))?;
    ensure!(
        stage1 == fixture("stage1_query_prompt.txt"),
        "stage1 prompt differs:\n{stage1}"
    );
    ensure!(
        QueryPromptTemplate::stage2().system_text == fixture("stage2_instruction.txt"),
        "stage2 instruction differs"
    );
    let doc = ok(assemble_doc_prompt(
        "photosynthesis converts light energy into chemical energy stored in glucose.",
        &DocPromptTemplate::default(),
    ))?;
    ensure!(
        doc == fixture("doc_prompt.txt"),
        "doc prompt differs:\n{doc}"
    );

    let valid = validate_output_format(
        "core concepts and related terms <emb_token>",
        TrainingStage::Stage2,
    );
    ensure!(valid.valid, "canonical valid output rejected: {valid:?}");
    let trailing =
        validate_output_format("analysis <emb_token> trailing text", TrainingStage::Stage2);
    ensure!(
        trailing.reason == Some(FormatViolation::TokenNotTerminal),
        "trailing text: {trailing:?}"
    );
    let bare = validate_output_format("<emb_token>", TrainingStage::Stage2);
    ensure!(
        bare.reason == Some(FormatViolation::EmptyReasoning),
        "bare token: {bare:?}"
    );
    Ok("stage1 prompt, stage2 instruction, doc prompt byte-exact; validator cases ok".into())
}

fn index_correctness() -> Outcome {
    let mut rng = rng(11);
    for case in 0..1000 {
        let dim = rng.random_range(2..=12);
        let palette: Vec<Vec<f64>> = (0..rng.random_range(2..=10))
            .map(|_| random_unit(&mut rng, dim))
            .collect();
        let n = rng.random_range(1..=50);
        let docs: Vec<(String, Vec<f64>)> = (0..n)
            .map(|i| {
                (
                    format!("doc{i:03}"),
                    palette[rng.random_range(0..palette.len())].clone(),
                )
            })
            .collect();
        let index = ok(Index::build(
            docs.iter()
                .map(|(id, v)| IndexEntry::new(id.clone(), Embedding::new(v.clone()).unwrap()))
                .collect(),
        ))?;
        let q = random_unit(&mut rng, dim);
        let k = rng.random_range(1..=60);
        let hits = ok(index.search(&ok(Embedding::new(q.clone()))?, k))?;
        let scored: Vec<(String, f64)> = docs
            .iter()
            .map(|(id, v)| (id.clone(), dotp(&q, v)))
            .collect();
        let want = topk_oracle(&scored, k);
        let got: Vec<String> = hits.iter().map(|h| h.doc_id.clone()).collect();
        ensure!(
            got == want,
            "case {case}: top-{k} {got:?} vs oracle {want:?}"
        );
    }

    let entries: Vec<IndexEntry<f32>> = (0..20)
        .map(|i| {
            let v: Vec<f32> = random_unit(&mut rng, 32)
                .into_iter()
                .map(|x| x as f32)
                .collect();
            IndexEntry::new(format!("d{i}"), Embedding::new(v).unwrap())
        })
        .collect();
    let index = ok(Index::build(entries))?;
    let dir = ok(tempfile::tempdir())?;
    let path = dir.path().join("x.t1ix");
    ok(save_index(&index, &path))?;
    let loaded: Index<f32> = ok(load_index(&path))?;
    let exact = index.entries().iter().zip(loaded.entries()).all(|(a, b)| {
        a.doc_id == b.doc_id
            && a.embedding
                .values()
                .iter()
                .zip(b.embedding.values())
                .all(|(x, y)| x.to_bits() == y.to_bits())
    });
    ensure!(
        exact && loaded.len() == index.len(),
        "round trip not bit-exact"
    );

    let bytes = ok(encode_index(&index))?;
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    ensure!(
        matches!(decode_index::<f32>(&bad_magic), Err(Error::BadMagic)),
        "bad magic accepted"
    );
    let truncated = &bytes[..bytes.len() / 2];
    ensure!(
        matches!(decode_index::<f32>(truncated), Err(Error::Truncated(_))),
        "truncation accepted"
    );
    let mut flipped = bytes.clone();
    let mid = bytes.len() - 40;
    flipped[mid] ^= 0x01;
    ensure!(
        matches!(
            decode_index::<f32>(&flipped),
            Err(Error::ChecksumMismatch { .. })
        ),
        "payload corruption accepted"
    );
    let mut version = bytes.clone();
    version[4] = 9;
    ensure!(
        matches!(
            decode_index::<f32>(&version),
            Err(Error::UnsupportedVersion(9))
        ),
        "unknown version accepted"
    );
    Ok("1000 top-k instances match oracle; round trip bit-exact; corruption rejected".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("soft-rank limit", Duration::from_secs(5), soft_rank_limit),
        (
            "reward bounds and monotonicity",
            Duration::from_secs(30),
            bounds_and_monotonicity,
        ),
        ("gradient checks", Duration::from_secs(10), gradient_checks),
        ("closed-form fixtures", Duration::MAX, closed_forms),
        ("invariance identities", Duration::MAX, invariances),
        ("GRPO learning", Duration::from_secs(60), grpo_learning),
        ("GRPO algebra", Duration::MAX, grpo_algebra),
        (
            "nDCG oracle equivalence",
            Duration::MAX,
            ndcg_oracle_equivalence,
        ),
        ("table averages", Duration::MAX, reported_averages),
        ("protocol goldens", Duration::MAX, protocol_goldens),
        (
            "index correctness and persistence",
            Duration::MAX,
            index_correctness,
        ),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if outcome.is_ok() && elapsed > *budget {
            outcome = Err(format!("took {elapsed:.2?}, budget {budget:?}"));
        }
        match outcome {
            Ok(detail) => println!("[PASS] {:>2}. {name}: {detail} ({elapsed:.2?})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {:>2}. {name}: {detail} ({elapsed:.2?})", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
