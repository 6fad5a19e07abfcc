mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use common::{ndcg_oracle, rank_reward_with_log};
use rankreason::eval::{ndcg_at_k, parse_run, Qrels, RunFile};
use rankreason::grpo::group_advantages;
use rankreason::index::{decode_index, encode_index, Index, IndexEntry, SearchHit};
use rankreason::losses::info_nce_scores;
use rankreason::protocol::{
    assemble_doc_prompt, validate_output_format, DocPromptTemplate, EMB_TOKEN,
};
use rankreason::reward::{rank_reward, ScoreSet};
use rankreason::toy_env::embed_bag;
use rankreason::{Embedding, TrainingStage};

fn scores(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,8}"
}

fn run_of(docs: &[(String, f64)]) -> RunFile<f64> {
    let mut r = RunFile::new();
    r.insert(
        "q",
        docs.iter()
            .map(|(d, s)| SearchHit {
                doc_id: d.clone(),
                score: *s,
            })
            .collect(),
    )
    .unwrap();
    r
}

fn qrels_of(grades: &[(String, u32)]) -> Qrels {
    let mut q = Qrels::new();
    for (d, g) in grades {
        q.insert("q", d.clone(), *g).unwrap();
    }
    q
}

/// Distinct docs with grades 0..=3, at least one positive.
fn judged_docs() -> impl Strategy<Value = Vec<(String, u32)>> {
    prop::collection::vec(0u32..=3, 1..15).prop_map(|mut g| {
        if g.iter().all(|&x| x == 0) {
            g[0] = 1;
        }
        g.into_iter()
            .enumerate()
            .map(|(i, x)| (format!("d{i:02}"), x))
            .collect()
    })
}

proptest! {
    #[test]
    fn rank_reward_translation_and_log_base(
        pos in scores(1..4), negs in scores(1..20), tau in 0.01f64..1.0, c in -3.0f64..3.0
    ) {
        let r = rank_reward(&ScoreSet::new(pos.clone(), negs.clone(), tau).unwrap()).unwrap();
        let shift = |v: &[f64]| v.iter().map(|x| x + c).collect::<Vec<_>>();
        let rs = rank_reward(&ScoreSet::new(shift(&pos), shift(&negs), tau).unwrap()).unwrap();
        prop_assert!((r - rs).abs() <= 1e-12);
        prop_assert!((rank_reward_with_log(&pos, &negs, tau, f64::log2) - r).abs() <= 1e-12);
    }

    #[test]
    fn info_nce_shift_invariant_and_nonnegative(
        p in -1.0f64..1.0, negs in scores(1..10), t in 0.02f64..2.0, c in -3.0f64..3.0
    ) {
        let (v, grad) = info_nce_scores(p, &negs, t).unwrap();
        let shifted: Vec<f64> = negs.iter().map(|n| n + c).collect();
        let (vs, _) = info_nce_scores(p + c, &shifted, t).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert!((v - vs).abs() <= 1e-9 * v.abs().max(1.0));
        prop_assert!(grad.iter().sum::<f64>().abs() < 1e-9 / t);
    }

    #[test]
    fn advantages_shift_and_scale_invariant(
        rewards in prop::collection::vec(-1.0f64..1.0, 2..12), c in -5.0f64..5.0, k in 0.1f64..10.0
    ) {
        let spread = rewards.iter().cloned().fold(f64::MIN, f64::max) - rewards.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(spread > 1e-3);
        let a = group_advantages(&rewards, 1e-8).unwrap();
        let shifted: Vec<f64> = rewards.iter().map(|r| r + c).collect();
        let scaled: Vec<f64> = rewards.iter().map(|r| r * k).collect();
        for (x, y) in a.iter().zip(group_advantages(&shifted, 1e-8).unwrap()) {
            prop_assert!((x - y).abs() < 1e-6);
        }
        for (x, y) in a.iter().zip(group_advantages(&scaled, 1e-8).unwrap()) {
            prop_assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn ndcg_ignores_qrels_order(grades in judged_docs(), seed in any::<u64>(), k in 1usize..12) {
        let docs: Vec<(String, f64)> = grades.iter().enumerate()
            .map(|(i, (d, _))| (d.clone(), ((i as u64 * 7 + seed) % 5) as f64)).collect();
        let mut reversed = grades.clone();
        reversed.reverse();
        let a = ndcg_at_k(&run_of(&docs), &qrels_of(&grades), k).unwrap()["q"];
        let b = ndcg_at_k(&run_of(&docs), &qrels_of(&reversed), k).unwrap()["q"];
        prop_assert_eq!(a, b);
        let map: BTreeMap<String, u32> = grades.iter().cloned().collect();
        prop_assert!((a - ndcg_oracle(&docs, &map, k)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn ndcg_is_one_for_grade_sorted_runs(grades in judged_docs(), k in 1usize..12) {
        let docs: Vec<(String, f64)> = grades.iter().map(|(d, g)| (d.clone(), *g as f64)).collect();
        let v = ndcg_at_k(&run_of(&docs), &qrels_of(&grades), k).unwrap()["q"];
        prop_assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn promoting_a_lower_grade_never_helps(grades in judged_docs(), a in 0usize..15, b in 0usize..15, extra in 0usize..4) {
        let n = grades.len();
        let (i, j) = ((a % n).min(b % n), (a % n).max(b % n));
        prop_assume!(i != j);
        let k = j + 1 + extra;
        let base: Vec<(String, f64)> = grades.iter().enumerate()
            .map(|(r, (d, _))| (d.clone(), (n - r) as f64)).collect();
        let mut swapped = base.clone();
        let (si, sj) = (swapped[i].1, swapped[j].1);
        swapped[i].1 = sj;
        swapped[j].1 = si;
        let (high_first, low_first) = if grades[i].1 >= grades[j].1 { (base, swapped) } else { (swapped, base) };
        let q = qrels_of(&grades);
        let good = ndcg_at_k(&run_of(&high_first), &q, k).unwrap()["q"];
        let bad = ndcg_at_k(&run_of(&low_first), &q, k).unwrap()["q"];
        prop_assert!(bad <= good);
    }

    #[test]
    fn run_file_round_trip(docs in prop::collection::btree_map(word(), -10.0f64..10.0, 1..20)) {
        let docs: Vec<(String, f64)> = docs.into_iter().collect();
        let run = run_of(&docs);
        let parsed: RunFile<f64> = parse_run(run.to_trec("tag").as_bytes()).unwrap();
        prop_assert_eq!(parsed, run);
    }

    #[test]
    fn index_bytes_round_trip(vectors in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 6), 1..20)) {
        prop_assume!(vectors.iter().all(|v| v.iter().any(|x| x.abs() > 1e-3)));
        let entries = vectors.into_iter().enumerate()
            .map(|(i, v)| IndexEntry::new(format!("doc-{i}"), Embedding::new(v).unwrap())).collect();
        let index: Index<f32> = Index::build(entries).unwrap();
        let bytes = encode_index(&index).unwrap();
        let loaded: Index<f32> = decode_index(&bytes).unwrap();
        prop_assert_eq!(encode_index(&loaded).unwrap(), bytes);
    }

    #[test]
    fn bag_embedding_ignores_order(mut tokens in prop::collection::vec(0u32..1000, 1..10)) {
        let a = embed_bag::<f64>(&tokens, 32).unwrap();
        tokens.reverse();
        prop_assert_eq!(a, embed_bag::<f64>(&tokens, 32).unwrap());
    }

    #[test]
    fn doc_prompt_ends_with_single_token(doc in "[a-zA-Z0-9 .,]{1,80}") {
        prop_assume!(!doc.trim().is_empty());
        let p = assemble_doc_prompt(&doc, &DocPromptTemplate::default()).unwrap();
        prop_assert!(p.ends_with(EMB_TOKEN));
        prop_assert_eq!(p.matches(EMB_TOKEN).count(), 1);
    }

    #[test]
    fn reasoning_then_token_is_valid(words in prop::collection::vec(word(), 1..20)) {
        let text = format!("{} {EMB_TOKEN}", words.join(" "));
        prop_assert!(validate_output_format(&text, TrainingStage::Stage3).valid);
        let trailing = format!("{text} {}", words[0]);
        prop_assert!(!validate_output_format(&trailing, TrainingStage::Stage3).valid);
    }
}
