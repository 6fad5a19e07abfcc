//! Reward for the reinforcement stage.
//!
//! The discrete rank of a positive document is relaxed into
//!
//! ```text
//! Rank(p) = 1 + Σ_n σ((s(q,n) - s(q,p)) / τ)
//! ```
//!
//! which is normalized into a bounded ranking reward
//!
//! ```text
//! R_rank = 1 - mean_p ln Rank(p) / ln(|N| + 1)      ∈ [0, 1]
//! ```
//!
//! and combined with a format term, `R_total = R_rank + R_format`. When the
//! output shape is invalid and gating is on, the ranking term is dropped and
//! only the penalty remains.
//!
//! | case                          | r_format          | gated  | r_total             |
//! |-------------------------------|-------------------|--------|---------------------|
//! | valid output                  | `penalty_valid`   | false  | r_rank + r_format   |
//! | invalid output, gating on     | `penalty_invalid` | true   | r_format            |
//! | invalid output, gating off    | `penalty_invalid` | false  | r_rank + r_format   |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::FormatVerdict;
use crate::scalar::{sigmoid, Real};

pub const DEFAULT_TAU: f64 = 0.05;
pub const DEFAULT_PENALTY_INVALID: f64 = -1.0;
pub const DEFAULT_PENALTY_VALID: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet<T> {
    pub positive_scores: Vec<T>,
    pub negative_scores: Vec<T>,
    pub tau: T,
}

impl<T: Real> ScoreSet<T> {
    pub fn new(positive_scores: Vec<T>, negative_scores: Vec<T>, tau: T) -> Result<Self> {
        let s = Self {
            positive_scores,
            negative_scores,
            tau,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.positive_scores.is_empty() {
            return Err(Error::invalid("score set needs at least one positive"));
        }
        check_tau(self.tau)?;
        if self
            .positive_scores
            .iter()
            .chain(&self.negative_scores)
            .any(|s| !s.is_finite())
        {
            return Err(Error::NonFinite("score"));
        }
        Ok(())
    }
}

fn check_tau<T: Real>(tau: T) -> Result<()> {
    if !(tau > T::zero()) || !tau.is_finite() {
        return Err(Error::invalid("tau must be positive and finite"));
    }
    Ok(())
}

/// Sigmoid-relaxed rank of one positive among the negatives, in `[1, |N| + 1]`.
pub fn soft_rank<T: Real>(positive: T, negatives: &[T], tau: T) -> Result<T> {
    check_tau(tau)?;
    if !positive.is_finite() || negatives.iter().any(|n| !n.is_finite()) {
        return Err(Error::NonFinite("score"));
    }
    Ok(soft_rank_unchecked(positive, negatives, tau))
}

fn soft_rank_unchecked<T: Real>(positive: T, negatives: &[T], tau: T) -> T {
    T::one()
        + negatives
            .iter()
            .map(|&n| sigmoid((n - positive) / tau))
            .sum::<T>()
}

/// `1 + #{n > p} + ½·#{n = p}`: the `τ → 0` limit of [`soft_rank`].
pub fn hard_rank_oracle<T: Real>(positive: T, negatives: &[T]) -> T {
    let half = T::lit(0.5);
    negatives.iter().fold(T::one(), |acc, &n| {
        if n > positive {
            acc + T::one()
        } else if n == positive {
            acc + half
        } else {
            acc
        }
    })
}

/// Normalized ranking reward; uniform mean over positives.
///
/// With no negatives the ratio is `0/0`; the positive is trivially first and
/// the reward is 1.
pub fn rank_reward<T: Real>(scores: &ScoreSet<T>) -> Result<T> {
    scores.validate()?;
    if scores.negative_scores.is_empty() {
        return Ok(T::one());
    }
    let mean_log_rank = mean_log_rank(scores);
    let norm = T::lit((scores.negative_scores.len() + 1) as f64).ln();
    Ok(T::one() - mean_log_rank / norm)
}

fn mean_log_rank<T: Real>(scores: &ScoreSet<T>) -> T {
    let total: T = scores
        .positive_scores
        .iter()
        .map(|&p| soft_rank_unchecked(p, &scores.negative_scores, scores.tau).ln())
        .sum();
    total / T::lit(scores.positive_scores.len() as f64)
}

/// Gradient of [`rank_reward`] with respect to every score, positives first
/// then negatives, in input order.
pub fn rank_reward_grad<T: Real>(scores: &ScoreSet<T>) -> Result<Vec<T>> {
    scores.validate()?;
    let np = scores.positive_scores.len();
    let nn = scores.negative_scores.len();
    let mut grad = vec![T::zero(); np + nn];
    if nn == 0 {
        return Ok(grad);
    }
    let tau = scores.tau;
    // dR/dRank(p) = -1 / (|P| ln(|N|+1) Rank(p)); dσ(x)/dx = σ(1-σ)
    let scale = T::one() / (T::lit(np as f64) * T::lit((nn + 1) as f64).ln() * tau);
    for (i, &p) in scores.positive_scores.iter().enumerate() {
        let rank = soft_rank_unchecked(p, &scores.negative_scores, tau);
        let coef = scale / rank;
        for (j, &n) in scores.negative_scores.iter().enumerate() {
            let s = sigmoid((n - p) / tau);
            let d = coef * s * (T::one() - s);
            grad[i] = grad[i] + d;
            grad[np + j] = grad[np + j] - d;
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormatPolicy<T> {
    pub penalty_invalid: T,
    pub penalty_valid: T,
    pub gating: bool,
}

impl<T: Real> Default for FormatPolicy<T> {
    fn default() -> Self {
        Self {
            penalty_invalid: T::lit(DEFAULT_PENALTY_INVALID),
            penalty_valid: T::lit(DEFAULT_PENALTY_VALID),
            gating: true,
        }
    }
}

impl<T: Real> FormatPolicy<T> {
    pub fn new(penalty_invalid: T, penalty_valid: T, gating: bool) -> Result<Self> {
        let p = Self {
            penalty_invalid,
            penalty_valid,
            gating,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.penalty_invalid <= self.penalty_valid && self.penalty_valid <= T::zero()) {
            return Err(Error::invalid(
                "format penalties must satisfy penalty_invalid <= penalty_valid <= 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormatReward<T> {
    pub r_format: T,
    pub gated: bool,
}

pub fn format_reward<T: Real>(
    verdict: &FormatVerdict,
    policy: &FormatPolicy<T>,
) -> FormatReward<T> {
    if verdict.valid {
        FormatReward {
            r_format: policy.penalty_valid,
            gated: false,
        }
    } else {
        FormatReward {
            r_format: policy.penalty_invalid,
            gated: policy.gating,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown<T> {
    /// Absent when gated.
    pub r_rank: Option<T>,
    pub r_format: T,
    pub r_total: T,
    pub gated: bool,
}

impl<T: Real> RewardBreakdown<T> {
    /// Ranking term, counting a gated sample as zero.
    pub fn rank_or_zero(&self) -> T {
        self.r_rank.unwrap_or_else(T::zero)
    }
}

/// Scores may be omitted only when the sample is gated.
pub fn total_reward<T: Real>(
    scores: Option<&ScoreSet<T>>,
    format: FormatReward<T>,
) -> Result<RewardBreakdown<T>> {
    if format.gated {
        return Ok(RewardBreakdown {
            r_rank: None,
            r_format: format.r_format,
            r_total: format.r_format,
            gated: true,
        });
    }
    let scores = scores.ok_or_else(|| Error::invalid("scores required for an ungated sample"))?;
    let r_rank = rank_reward(scores)?;
    Ok(RewardBreakdown {
        r_rank: Some(r_rank),
        r_format: format.r_format,
        r_total: r_rank + format.r_format,
        gated: false,
    })
}
