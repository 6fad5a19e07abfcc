//! Test-only oracles. Written from the defining formulas, without calling
//! into the library code they check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 1 + #{n > p} + 0.5 #{n == p}
pub fn hard_rank(p: f64, negatives: &[f64]) -> f64 {
    let mut r = 1.0;
    for &n in negatives {
        if n > p {
            r += 1.0;
        } else if n == p {
            r += 0.5;
        }
    }
    r
}

/// R_rank written out with an arbitrary logarithm.
pub fn rank_reward_with_log(
    positives: &[f64],
    negatives: &[f64],
    tau: f64,
    log: impl Fn(f64) -> f64,
) -> f64 {
    if negatives.is_empty() {
        return 1.0;
    }
    let mut acc = 0.0;
    for &p in positives {
        let rank = 1.0
            + negatives
                .iter()
                .map(|&n| 1.0 / (1.0 + (-(n - p) / tau).exp()))
                .sum::<f64>();
        acc += log(rank);
    }
    1.0 - (acc / positives.len() as f64) / log(negatives.len() as f64 + 1.0)
}

/// Central differences of `f` at `x`.
pub fn central_diff(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut buf = x.to_vec();
    (0..x.len())
        .map(|i| {
            buf[i] = x[i] + h;
            let up = f(&buf);
            buf[i] = x[i] - h;
            let down = f(&buf);
            buf[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// ‖a − b‖ / max(‖a‖, ‖b‖), zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// nDCG@k by full sort: score descending, doc id ascending.
pub fn ndcg_oracle(run: &[(String, f64)], qrels: &BTreeMap<String, u32>, k: usize) -> f64 {
    let mut ranked = run.to_vec();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    let mut dcg = 0.0;
    for (i, (doc, _)) in ranked.iter().take(k).enumerate() {
        let g = *qrels.get(doc).unwrap_or(&0);
        dcg += (2f64.powi(g as i32) - 1.0) / ((i + 2) as f64).log2();
    }
    let mut grades: Vec<u32> = qrels.values().copied().collect();
    grades.sort_by(|a, b| b.cmp(a));
    let mut ideal = 0.0;
    for (i, g) in grades.into_iter().take(k).enumerate() {
        ideal += (2f64.powi(g as i32) - 1.0) / ((i + 2) as f64).log2();
    }
    dcg / ideal
}

/// Ids of the k best by full sort of every score.
pub fn topk_oracle(scores: &[(String, f64)], k: usize) -> Vec<String> {
    let mut all = scores.to_vec();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    all.into_iter().take(k).map(|(d, _)| d).collect()
}

pub const FIXTURE_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{FIXTURE_DIR}/{name}")).expect("fixture present")
}

/// Per-task nDCG@10 rows of a three-stage report and their printed averages.
pub const REPORTED_ROWS: [(&str, [f64; 12], f64); 3] = [
    (
        "stage1",
        [
            23.8, 39.2, 18.4, 30.0, 21.3, 23.5, 19.8, 33.2, 6.7, 12.1, 27.5, 20.5,
        ],
        23.0,
    ),
    (
        "stage2",
        [
            53.8, 53.6, 29.5, 44.5, 31.8, 34.5, 34.8, 36.6, 12.7, 11.1, 40.7, 45.1,
        ],
        35.7,
    ),
    (
        "stage3",
        [
            57.4, 54.8, 30.6, 48.2, 33.1, 36.4, 35.6, 31.9, 14.9, 11.9, 41.6, 48.5,
        ],
        37.1,
    ),
];
