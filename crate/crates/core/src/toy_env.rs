//! Synthetic vocabulary-mismatch retrieval environment.
//!
//! Each task has a short query, a relevant document that shares no token
//! with it, and a menu of candidate "reasoning expansions". Exactly one
//! expansion (the bridge) carries tokens that also occur in the relevant
//! document; every decoy expansion instead matches a distractor. A query is
//! encoded as the bag of its tokens plus the chosen expansion, so the only
//! way to retrieve the relevant document is to pick the bridge.
//!
//! Document layout per task (tokens drawn without replacement from the
//! vocabulary; query and expansion tokens are reserved):
//!
//! * positive: all bridge tokens + filler
//! * one distractor per decoy: that decoy's tokens + filler
//! * up to two lexical distractors: half of the query tokens + filler
//! * the rest: filler only

use std::collections::BTreeSet;
use std::sync::OnceLock;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{seeded_unit_vector, Embedding};
use crate::error::{Error, Result};
use crate::grpo::{ActionRef, GroupSample};
use crate::index::{hit_order, Index, IndexEntry, SearchHit};
use crate::protocol::{validate_output_format, EMB_TOKEN};
use crate::reward::{format_reward, total_reward, FormatPolicy, RewardBreakdown, ScoreSet};
use crate::scalar::Real;
use crate::stage::TrainingStage;

pub type Token = u32;

pub const DEFAULT_TASKS: usize = 20;

/// Salt for the per-token direction table.
const TOKEN_SEED: u64 = 0x746f_6b65_6e73;
const MAX_GENERATION_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyParams {
    pub vocab_size: usize,
    pub n_expansions: usize,
    pub n_distractors: usize,
    pub dim: usize,
    pub query_len: usize,
    pub expansion_len: usize,
    pub doc_len: usize,
    /// Extra actions whose rendered output omits the embedding token.
    pub malformed_expansions: usize,
}

impl Default for ToyParams {
    fn default() -> Self {
        Self {
            vocab_size: 1000,
            n_expansions: 8,
            n_distractors: 50,
            dim: 256,
            query_len: 4,
            expansion_len: 4,
            doc_len: 8,
            malformed_expansions: 0,
        }
    }
}

impl ToyParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_expansions < 2 || self.vocab_size <= self.n_expansions {
            return Err(Error::invalid("need vocab_size > n_expansions >= 2"));
        }
        if self.n_distractors == 0 {
            return Err(Error::invalid("need at least one distractor"));
        }
        if self.dim == 0 || self.query_len == 0 || self.expansion_len == 0 {
            return Err(Error::invalid(
                "dim, query_len and expansion_len must be positive",
            ));
        }
        if self.doc_len <= self.expansion_len {
            return Err(Error::invalid("doc_len must exceed expansion_len"));
        }
        let reserved = self.query_len + self.n_expansions * self.expansion_len;
        if self.vocab_size < reserved + self.doc_len {
            return Err(Error::invalid(format!(
                "vocab_size {} too small: {} reserved tokens plus {} filler needed",
                self.vocab_size, reserved, self.doc_len
            )));
        }
        Ok(())
    }

    pub fn n_actions(&self) -> usize {
        self.n_expansions + self.malformed_expansions
    }
}

/// Fixed unit direction for a token, shared by every task.
pub fn token_vector<T: Real>(token: Token, dim: usize) -> Result<Embedding<T>> {
    seeded_unit_vector(TOKEN_SEED, &token.to_le_bytes(), dim)
}

/// L2-normalized sum of token directions. Tokens are summed in sorted order,
/// so any permutation of the input gives a bit-identical result.
pub fn embed_bag<T: Real>(tokens: &[Token], dim: usize) -> Result<Embedding<T>> {
    embed_bag_with(tokens, dim, |t| token_vector(t, dim))
}

fn embed_bag_with<T: Real>(
    tokens: &[Token],
    dim: usize,
    mut lookup: impl FnMut(Token) -> Result<Embedding<T>>,
) -> Result<Embedding<T>> {
    if tokens.is_empty() {
        return Err(Error::invalid("empty token bag"));
    }
    let mut sorted = tokens.to_vec();
    sorted.sort_unstable();
    let mut acc = vec![T::zero(); dim];
    for t in sorted {
        let v = lookup(t)?;
        for (a, &x) in acc.iter_mut().zip(v.values()) {
            *a = *a + x;
        }
    }
    Embedding::unit(acc)
}

/// Lazily filled cache of token directions for one dimension.
#[derive(Debug)]
pub struct TokenTable<T> {
    dim: usize,
    slots: Vec<OnceLock<Embedding<T>>>,
}

impl<T: Real> TokenTable<T> {
    pub fn new(vocab_size: usize, dim: usize) -> Self {
        Self {
            dim,
            slots: (0..vocab_size).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn vector(&self, token: Token) -> Result<Embedding<T>> {
        let slot = self
            .slots
            .get(token as usize)
            .ok_or_else(|| Error::invalid(format!("token {token} outside vocabulary")))?;
        if let Some(v) = slot.get() {
            return Ok(v.clone());
        }
        let v = token_vector(token, self.dim)?;
        Ok(slot.get_or_init(|| v).clone())
    }

    pub fn embed_bag(&self, tokens: &[Token]) -> Result<Embedding<T>> {
        embed_bag_with(tokens, self.dim, |t| self.vector(t))
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTask<T> {
    pub id: String,
    pub query_tokens: Vec<Token>,
    /// One entry per action; malformed actions come last.
    pub expansions: Vec<Vec<Token>>,
    pub bridge: usize,
    pub n_wellformed: usize,
    pub doc_tokens: Vec<(String, Vec<Token>)>,
    pub positive_id: String,
    pub index: Index<T>,
}

impl<T: Real> SyntheticTask<T> {
    pub fn corpus(&self) -> &[IndexEntry<T>] {
        self.index.entries()
    }

    pub fn is_wellformed(&self, action: usize) -> bool {
        action < self.n_wellformed
    }

    /// Reasoning text a policy would emit for `action`.
    pub fn render_output(&self, action: usize) -> String {
        let words: Vec<String> = self.expansions[action]
            .iter()
            .map(|t| format!("w{t}"))
            .collect();
        if self.is_wellformed(action) {
            format!("{} {EMB_TOKEN}", words.join(" "))
        } else {
            words.join(" ")
        }
    }

    pub fn expanded_tokens(&self, action: usize) -> Vec<Token> {
        let mut t = self.query_tokens.clone();
        t.extend_from_slice(&self.expansions[action]);
        t
    }
}

pub fn token_text(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| format!("w{t}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn draw(pool: &mut Vec<Token>, n: usize) -> Vec<Token> {
    pool.split_off(pool.len() - n)
}

/// Deterministic under `seed`. Tasks that fail the bridge-dominance check
/// are redrawn from the same stream.
pub fn generate_task<T: Real>(id: &str, seed: u64, params: &ToyParams) -> Result<SyntheticTask<T>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = TokenTable::<T>::new(params.vocab_size, params.dim);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let task = draw_task(id, &mut rng, params)?;
        if bridge_dominates(&task, &table, T::lit(crate::reward::DEFAULT_TAU))? {
            return Ok(task);
        }
    }
    Err(Error::invalid(format!(
        "could not draw a task satisfying the bridge invariant in {MAX_GENERATION_ATTEMPTS} attempts"
    )))
}

fn draw_task<T: Real>(id: &str, rng: &mut ChaCha8Rng, p: &ToyParams) -> Result<SyntheticTask<T>> {
    let mut vocab: Vec<Token> = (0..p.vocab_size as Token).collect();
    vocab.shuffle(rng);
    let query_tokens = draw(&mut vocab, p.query_len);
    let mut expansions: Vec<Vec<Token>> = (0..p.n_expansions)
        .map(|_| draw(&mut vocab, p.expansion_len))
        .collect();
    // remaining tokens are filler; reserved ones never appear as filler
    let filler = vocab;
    let filler_pick = |n: usize, rng: &mut ChaCha8Rng| -> Vec<Token> {
        filler.choose_multiple(rng, n).copied().collect()
    };

    let bridge = rng.random_range(0..p.n_expansions);
    let fill = p.doc_len - p.expansion_len;

    let mut docs: Vec<Vec<Token>> = Vec::with_capacity(p.n_distractors + 1);
    let mut positive = expansions[bridge].clone();
    positive.extend(filler_pick(fill, rng));
    docs.push(positive);

    let decoys: Vec<usize> = (0..p.n_expansions).filter(|&e| e != bridge).collect();
    for &e in decoys.iter().take(p.n_distractors) {
        let mut d = expansions[e].clone();
        d.extend(filler_pick(fill, rng));
        docs.push(d);
    }
    let lexical = (p.query_len / 2).max(1);
    while docs.len() < p.n_distractors + 1 && docs.len() < decoys.len() + 3 {
        let mut d: Vec<Token> = query_tokens
            .choose_multiple(rng, lexical)
            .copied()
            .collect();
        d.extend(filler_pick(p.doc_len - lexical, rng));
        docs.push(d);
    }
    while docs.len() < p.n_distractors + 1 {
        docs.push(filler_pick(p.doc_len, rng));
    }

    for _ in 0..p.malformed_expansions {
        expansions.push(filler_pick(p.expansion_len, rng));
    }

    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(rng);
    let ids: Vec<String> = order
        .iter()
        .map(|&slot| format!("{id}-d{slot:03}"))
        .collect();
    let positive_id = ids[0].clone();

    let table = TokenTable::<T>::new(p.vocab_size, p.dim);
    let mut entries = Vec::with_capacity(docs.len());
    let mut doc_tokens = Vec::with_capacity(docs.len());
    for (doc, doc_id) in docs.into_iter().zip(ids) {
        entries.push(IndexEntry::new(doc_id.clone(), table.embed_bag(&doc)?));
        doc_tokens.push((doc_id, doc));
    }
    Ok(SyntheticTask {
        id: id.to_owned(),
        query_tokens,
        expansions,
        bridge,
        n_wellformed: p.n_expansions,
        doc_tokens,
        positive_id,
        index: Index::build(entries)?,
    })
}

fn rank_reward_for<T: Real>(task: &SyntheticTask<T>, query: &Embedding<T>, tau: T) -> Result<T> {
    let scores = score_set(task, query, tau)?;
    crate::reward::rank_reward(&scores)
}

fn score_set<T: Real>(
    task: &SyntheticTask<T>,
    query: &Embedding<T>,
    tau: T,
) -> Result<ScoreSet<T>> {
    let hits = task.index.score_all(query)?;
    let mut positive = None;
    let mut negatives = Vec::with_capacity(hits.len());
    for SearchHit { doc_id, score } in hits {
        if doc_id == task.positive_id {
            positive = Some(score);
        } else {
            negatives.push(score);
        }
    }
    let positive =
        positive.ok_or_else(|| Error::Invariant("positive missing from corpus".into()))?;
    ScoreSet::new(vec![positive], negatives, tau)
}

fn bridge_dominates<T: Real>(
    task: &SyntheticTask<T>,
    table: &TokenTable<T>,
    tau: T,
) -> Result<bool> {
    let bridge = rank_reward_for(
        task,
        &table.embed_bag(&task.expanded_tokens(task.bridge))?,
        tau,
    )?;
    let hits = task
        .index
        .search(&table.embed_bag(&task.expanded_tokens(task.bridge))?, 1)?;
    if hits[0].doc_id != task.positive_id {
        return Ok(false);
    }
    for e in (0..task.n_wellformed).filter(|&e| e != task.bridge) {
        let decoy = rank_reward_for(task, &table.embed_bag(&task.expanded_tokens(e))?, tau)?;
        if decoy >= bridge {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Softmax policy over expansions, one logit row per query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy<T> {
    logits: Vec<Vec<T>>,
    temperature: T,
}

impl<T: Real> ToyPolicy<T> {
    pub fn from_logits(logits: Vec<Vec<T>>, temperature: T) -> Result<Self> {
        if !(temperature > T::zero()) || !temperature.is_finite() {
            return Err(Error::invalid("policy temperature must be positive"));
        }
        if logits.is_empty() || logits.iter().any(|r| r.is_empty()) {
            return Err(Error::invalid(
                "policy needs at least one row and one action",
            ));
        }
        if logits.iter().flatten().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("policy logit"));
        }
        Ok(Self {
            logits,
            temperature,
        })
    }

    pub fn uniform(rows: usize, actions: usize, temperature: T) -> Result<Self> {
        Self::from_logits(vec![vec![T::zero(); actions]; rows], temperature)
    }

    pub fn logits(&self) -> &[Vec<T>] {
        &self.logits
    }

    pub fn temperature(&self) -> T {
        self.temperature
    }

    pub fn check_action(&self, row: usize, action: usize) -> Result<()> {
        match self.logits.get(row) {
            Some(r) if action < r.len() => Ok(()),
            _ => Err(Error::UnknownAction { row, action }),
        }
    }

    pub(crate) fn add_to_row(&mut self, row: usize, delta: &[T]) -> Result<()> {
        let r = self
            .logits
            .get_mut(row)
            .ok_or(Error::UnknownAction { row, action: 0 })?;
        for (l, &d) in r.iter_mut().zip(delta) {
            *l = *l + d;
        }
        if r.iter().any(|l| !l.is_finite()) {
            return Err(Error::Invariant("policy logits diverged".into()));
        }
        Ok(())
    }

    pub fn probs(&self, row: usize) -> Result<Vec<T>> {
        let r = self
            .logits
            .get(row)
            .ok_or(Error::UnknownAction { row, action: 0 })?;
        let scaled: Vec<T> = r.iter().map(|&l| l / self.temperature).collect();
        let max = scaled.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = scaled.iter().map(|&z| (z - max).exp()).collect();
        let total: T = exps.iter().copied().sum();
        Ok(exps.into_iter().map(|e| e / total).collect())
    }

    pub fn log_prob(&self, row: usize, action: usize) -> Result<T> {
        self.check_action(row, action)?;
        let r = &self.logits[row];
        let scaled: Vec<T> = r.iter().map(|&l| l / self.temperature).collect();
        let max = scaled.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + scaled.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
        Ok((scaled[action] - lse).min(T::zero()))
    }

    pub fn sample(&self, row: usize, rng: &mut impl Rng) -> Result<usize> {
        let probs = self.probs(row)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p.to_f64_lossy();
            if u < acc {
                return Ok(i);
            }
        }
        Ok(probs.len() - 1)
    }

    /// Highest logit; ties resolve to the lowest index.
    pub fn argmax(&self, row: usize) -> Result<usize> {
        let r = self
            .logits
            .get(row)
            .ok_or(Error::UnknownAction { row, action: 0 })?;
        Ok(r.iter()
            .enumerate()
            .fold(
                (0, r[0]),
                |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
            )
            .0)
    }
}

/// A fixed set of tasks sharing one token table and reward configuration.
#[derive(Debug)]
pub struct ToyEnvironment<T> {
    params: ToyParams,
    tasks: Vec<SyntheticTask<T>>,
    table: TokenTable<T>,
    tau: T,
    format_policy: FormatPolicy<T>,
    rewards: Vec<Vec<RewardBreakdown<T>>>,
}

impl<T: Real> ToyEnvironment<T> {
    pub fn generate(
        seed: u64,
        n_tasks: usize,
        params: ToyParams,
        tau: T,
        format_policy: FormatPolicy<T>,
    ) -> Result<Self> {
        if n_tasks == 0 {
            return Err(Error::invalid("need at least one task"));
        }
        if !(tau > T::zero()) {
            return Err(Error::invalid("tau must be positive"));
        }
        format_policy.validate()?;
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let tasks = (0..n_tasks)
            .map(|i| generate_task(&format!("t{i:03}"), master.random(), &params))
            .collect::<Result<Vec<_>>>()?;
        let mut env = Self {
            table: TokenTable::new(params.vocab_size, params.dim),
            params,
            tasks,
            tau,
            format_policy,
            rewards: Vec::new(),
        };
        env.rewards = (0..n_tasks)
            .map(|task| {
                (0..params.n_actions())
                    .map(|action| env.compute_reward(task, action))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(env)
    }

    pub fn params(&self) -> &ToyParams {
        &self.params
    }

    pub fn tasks(&self) -> &[SyntheticTask<T>] {
        &self.tasks
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn uniform_policy(&self) -> ToyPolicy<T> {
        ToyPolicy::uniform(self.tasks.len(), self.params.n_actions(), T::one())
            .expect("environment has tasks and actions")
    }

    pub fn check_policy(&self, policy: &ToyPolicy<T>) -> Result<()> {
        if policy.logits().len() != self.tasks.len() {
            return Err(Error::DimMismatch {
                expected: self.tasks.len(),
                actual: policy.logits().len(),
            });
        }
        for row in policy.logits() {
            if row.len() != self.params.n_actions() {
                return Err(Error::DimMismatch {
                    expected: self.params.n_actions(),
                    actual: row.len(),
                });
            }
        }
        Ok(())
    }

    /// Query embedding after expanding with `action`.
    pub fn query_embedding(&self, task: usize, action: usize) -> Result<Embedding<T>> {
        let t = self.task(task)?;
        self.table.embed_bag(&t.expanded_tokens(action))
    }

    pub fn query_only_embedding(&self, task: usize) -> Result<Embedding<T>> {
        self.table.embed_bag(&self.task(task)?.query_tokens)
    }

    fn task(&self, task: usize) -> Result<&SyntheticTask<T>> {
        self.tasks
            .get(task)
            .ok_or_else(|| Error::invalid(format!("task {task} out of range")))
    }

    /// Ranked corpus for the expanded query.
    pub fn ranking(&self, task: usize, action: usize) -> Result<Vec<SearchHit<T>>> {
        let mut hits = self
            .task(task)?
            .index
            .score_all(&self.query_embedding(task, action)?)?;
        hits.sort_by(hit_order);
        Ok(hits)
    }

    /// Full reward for emitting `action` on `task`.
    pub fn action_reward(&self, task: usize, action: usize) -> Result<RewardBreakdown<T>> {
        self.task(task)?;
        self.rewards[task]
            .get(action)
            .copied()
            .ok_or(Error::UnknownAction { row: task, action })
    }

    fn compute_reward(&self, task: usize, action: usize) -> Result<RewardBreakdown<T>> {
        let t = self.task(task)?;
        if action >= t.expansions.len() {
            return Err(Error::UnknownAction { row: task, action });
        }
        let verdict = validate_output_format(&t.render_output(action), TrainingStage::Stage3);
        let format = format_reward(&verdict, &self.format_policy);
        if format.gated {
            return total_reward(None, format);
        }
        let scores = score_set(t, &self.query_embedding(task, action)?, self.tau)?;
        total_reward(Some(&scores), format)
    }

    /// Draws `group_size` expansions from the policy row for `task` and scores each.
    pub fn rollout(
        &self,
        policy: &ToyPolicy<T>,
        task: usize,
        group_size: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<GroupSample<T>>> {
        self.check_policy(policy)?;
        let t = self.task(task)?;
        (0..group_size)
            .map(|trajectory_id| {
                let action = policy.sample(task, rng)?;
                let reward = self.action_reward(task, action)?;
                Ok(GroupSample {
                    query_id: t.id.clone(),
                    trajectory_id,
                    action: ActionRef { row: task, action },
                    logprob: policy.log_prob(task, action)?,
                    reward,
                })
            })
            .collect()
    }

    /// Exact expectation of `f(reward)` under the policy, averaged over tasks.
    pub fn expected<F>(&self, policy: &ToyPolicy<T>, f: F) -> Result<T>
    where
        F: Fn(&RewardBreakdown<T>) -> T,
    {
        self.check_policy(policy)?;
        let mut total = T::zero();
        for task in 0..self.tasks.len() {
            let probs = policy.probs(task)?;
            for (action, p) in probs.into_iter().enumerate() {
                total = total + p * f(&self.action_reward(task, action)?);
            }
        }
        Ok(total / T::lit(self.tasks.len() as f64))
    }

    pub fn expected_r_rank(&self, policy: &ToyPolicy<T>) -> Result<T> {
        self.expected(policy, RewardBreakdown::rank_or_zero)
    }

    /// Fraction of tasks whose most likely action is the bridge.
    pub fn bridge_argmax_rate(&self, policy: &ToyPolicy<T>) -> Result<f64> {
        self.check_policy(policy)?;
        let mut hits = 0usize;
        for (i, t) in self.tasks.iter().enumerate() {
            if policy.argmax(i)? == t.bridge {
                hits += 1;
            }
        }
        Ok(hits as f64 / self.tasks.len() as f64)
    }
}

/// Tokens shared between two bags.
pub fn overlap(a: &[Token], b: &[Token]) -> usize {
    let a: BTreeSet<_> = a.iter().collect();
    b.iter().collect::<BTreeSet<_>>().intersection(&a).count()
}
