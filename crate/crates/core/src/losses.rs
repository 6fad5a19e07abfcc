//! Training objectives for the supervised stages and their stage weighting.
//!
//! Gradients stop at the query embedding (or the raw scores); that is enough
//! to check every kernel against finite differences.

use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stage::TrainingStage;

pub const DEFAULT_NCE_TEMPERATURE: f64 = 0.05;
pub const DEFAULT_TRIPLET_MARGIN: f64 = 0.2;

/// Per-stage coefficients of `sft`, `nce`, `tri` and `kl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageLossWeights<T> {
    pub sft: T,
    pub nce: T,
    pub tri: T,
    pub kl: T,
    pub stage: TrainingStage,
}

impl<T: Real> StageLossWeights<T> {
    /// Cold start: format consolidation with a weak KL anchor.
    pub fn stage1() -> Self {
        Self {
            sft: T::lit(0.8),
            nce: T::lit(1.0),
            tri: T::lit(15.0),
            kl: T::lit(0.02),
            stage: TrainingStage::Stage1,
        }
    }

    /// Reasoning alignment: heavier SFT, lighter triplet, no KL.
    pub fn stage2() -> Self {
        Self {
            sft: T::lit(2.4),
            nce: T::lit(1.0),
            tri: T::lit(6.9),
            kl: T::zero(),
            stage: TrainingStage::Stage2,
        }
    }

    /// The reward stage has no loss weights.
    pub fn preset(stage: TrainingStage) -> Result<Self> {
        match stage {
            TrainingStage::Stage1 => Ok(Self::stage1()),
            TrainingStage::Stage2 => Ok(Self::stage2()),
            TrainingStage::Stage3 => Err(Error::invalid(
                "stage3 is optimized with rewards, not weighted losses",
            )),
        }
    }

    pub fn new(sft: T, nce: T, tri: T, kl: T, stage: TrainingStage) -> Result<Self> {
        let w = Self {
            sft,
            nce,
            tri,
            kl,
            stage,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sft", self.sft),
            ("nce", self.nce),
            ("tri", self.tri),
            ("kl", self.kl),
        ] {
            if !v.is_finite() || v < T::zero() {
                return Err(Error::invalid(format!(
                    "weight {name} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossComponents<T> {
    pub sft: T,
    pub nce: T,
    pub tri: T,
    pub kl: T,
}

impl<T: Real> LossComponents<T> {
    pub fn splat(v: T) -> Self {
        Self {
            sft: v,
            nce: v,
            tri: v,
            kl: v,
        }
    }
}

/// Weighted sum, accumulated in the order sft, nce, tri, kl.
pub fn combine_stage<T: Real>(weights: &StageLossWeights<T>, c: &LossComponents<T>) -> Result<T> {
    if [c.sft, c.nce, c.tri, c.kl].iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("loss component"));
    }
    Ok(weights.sft * c.sft + weights.nce * c.nce + weights.tri * c.tri + weights.kl * c.kl)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<T> {
    pub value: T,
    pub grad_query: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch<T> {
    pub query: Embedding<T>,
    pub positive: Embedding<T>,
    pub negatives: Vec<Embedding<T>>,
    pub temperature: T,
}

impl<T: Real> ContrastiveBatch<T> {
    /// Normalizes every embedding, matching the index scoring.
    pub fn new(
        query: Embedding<T>,
        positive: Embedding<T>,
        negatives: Vec<Embedding<T>>,
        temperature: T,
    ) -> Result<Self> {
        let batch = Self {
            query: query.into_normalized()?,
            positive: positive.into_normalized()?,
            negatives: negatives
                .into_iter()
                .map(Embedding::into_normalized)
                .collect::<Result<_>>()?,
            temperature,
        };
        batch.validate()?;
        Ok(batch)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > T::zero()) || !self.temperature.is_finite() {
            return Err(Error::invalid("temperature must be positive"));
        }
        if self.negatives.is_empty() {
            return Err(Error::invalid("InfoNCE needs at least one negative"));
        }
        let dim = self.query.dim();
        for e in std::iter::once(&self.positive).chain(&self.negatives) {
            if e.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: e.dim(),
                });
            }
        }
        Ok(())
    }
}

/// InfoNCE on raw scores. Returns the loss and its gradient with respect to
/// `[positive, negatives...]`.
pub fn info_nce_scores<T: Real>(
    positive: T,
    negatives: &[T],
    temperature: T,
) -> Result<(T, Vec<T>)> {
    if !(temperature > T::zero()) {
        return Err(Error::invalid("temperature must be positive"));
    }
    if negatives.is_empty() {
        return Err(Error::invalid("InfoNCE needs at least one negative"));
    }
    let logits: Vec<T> = std::iter::once(positive)
        .chain(negatives.iter().copied())
        .map(|s| s / temperature)
        .collect();
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("similarity score"));
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    let value = (max + total.ln() - logits[0]).max(T::zero());
    let grad = exps
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let target = if i == 0 { T::one() } else { T::zero() };
            (e / total - target) / temperature
        })
        .collect();
    Ok((value, grad))
}

pub fn info_nce<T: Real>(batch: &ContrastiveBatch<T>) -> Result<LossGrad<T>> {
    batch.validate()?;
    let q = &batch.query;
    let pos = q.dot(&batch.positive)?;
    let negs = batch
        .negatives
        .iter()
        .map(|n| q.dot(n))
        .collect::<Result<Vec<_>>>()?;
    let (value, score_grad) = info_nce_scores(pos, &negs, batch.temperature)?;
    let mut grad_query = vec![T::zero(); q.dim()];
    for (g, doc) in score_grad
        .iter()
        .zip(std::iter::once(&batch.positive).chain(&batch.negatives))
    {
        for (acc, &d) in grad_query.iter_mut().zip(doc.values()) {
            *acc = *acc + *g * d;
        }
    }
    Ok(LossGrad { value, grad_query })
}

/// Mean InfoNCE over several queries. With `in_batch_negatives`, every other
/// query's positive is added to each query's negative set.
pub fn info_nce_batch<T: Real>(
    batches: &[ContrastiveBatch<T>],
    in_batch_negatives: bool,
) -> Result<T> {
    if batches.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut total = T::zero();
    for (i, b) in batches.iter().enumerate() {
        let value = if in_batch_negatives {
            let mut extended = b.clone();
            extended.negatives.extend(
                batches
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, other)| other.positive.clone()),
            );
            info_nce(&extended)?.value
        } else {
            info_nce(b)?.value
        };
        total = total + value;
    }
    Ok(total / T::lit(batches.len() as f64))
}

/// Hinge `max(0, margin - s(q,p) + s(q,n))`; the subgradient at the hinge is zero.
pub fn triplet<T: Real>(
    query: &Embedding<T>,
    positive: &Embedding<T>,
    negative: &Embedding<T>,
    margin: T,
) -> Result<LossGrad<T>> {
    if !(margin >= T::zero()) {
        return Err(Error::invalid("margin must be >= 0"));
    }
    let sp = query.dot(positive)?;
    let sn = query.dot(negative)?;
    let raw = margin - sp + sn;
    if raw > T::zero() {
        let grad_query = negative
            .values()
            .iter()
            .zip(positive.values())
            .map(|(&n, &p)| n - p)
            .collect();
        Ok(LossGrad {
            value: raw,
            grad_query,
        })
    } else {
        Ok(LossGrad {
            value: T::zero(),
            grad_query: vec![T::zero(); query.dim()],
        })
    }
}

/// Per-token log-probabilities of a sampled response.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenLogProbs<T> {
    pub policy_logp: Vec<T>,
    pub reference_logp: Option<Vec<T>>,
    pub response_mask: Vec<bool>,
}

impl<T: Real> TokenLogProbs<T> {
    pub fn new(
        policy_logp: Vec<T>,
        reference_logp: Option<Vec<T>>,
        response_mask: Vec<bool>,
    ) -> Result<Self> {
        let t = Self {
            policy_logp,
            reference_logp,
            response_mask,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.policy_logp.len();
        if self.response_mask.len() != n {
            return Err(Error::DimMismatch {
                expected: n,
                actual: self.response_mask.len(),
            });
        }
        let check = |xs: &[T]| -> Result<()> {
            if xs.iter().any(|x| !x.is_finite() || *x > T::zero()) {
                return Err(Error::invalid("log-probabilities must be finite and <= 0"));
            }
            Ok(())
        };
        check(&self.policy_logp)?;
        if let Some(r) = &self.reference_logp {
            if r.len() != n {
                return Err(Error::DimMismatch {
                    expected: n,
                    actual: r.len(),
                });
            }
            check(r)?;
        }
        Ok(())
    }

    fn response_count(&self) -> Result<usize> {
        match self.response_mask.iter().filter(|&&m| m).count() {
            0 => Err(Error::invalid("no response tokens in mask")),
            n => Ok(n),
        }
    }
}

/// Negative mean log-likelihood over response tokens.
pub fn sft_nll<T: Real>(tokens: &TokenLogProbs<T>) -> Result<T> {
    tokens.validate()?;
    let n = tokens.response_count()?;
    let sum: T = tokens
        .policy_logp
        .iter()
        .zip(&tokens.response_mask)
        .filter(|(_, &m)| m)
        .map(|(&lp, _)| lp)
        .sum();
    Ok(-sum / T::lit(n as f64))
}

/// Sample-based KL estimate: mean of `log pi - log pi_ref` over response tokens.
pub fn kl_reg<T: Real>(tokens: &TokenLogProbs<T>) -> Result<T> {
    tokens.validate()?;
    let reference = tokens
        .reference_logp
        .as_ref()
        .ok_or_else(|| Error::invalid("KL term needs reference log-probabilities"))?;
    let n = tokens.response_count()?;
    let sum: T = tokens
        .policy_logp
        .iter()
        .zip(reference)
        .zip(&tokens.response_mask)
        .filter(|(_, &m)| m)
        .map(|((&p, &r), _)| p - r)
        .sum();
    Ok(sum / T::lit(n as f64))
}
