//! Reasoning-then-embed dense retrieval toolkit.
//!
//! * [`protocol`]: prompt assembly for both encoder sides, output-format
//!   validation and the encoder backend contract.
//! * [`index`]: exact cosine top-k search and the binary index file.
//! * [`losses`]: InfoNCE, triplet, SFT and KL terms with stage weighting.
//! * [`reward`]: sigmoid soft rank, normalized ranking reward, format gating.
//! * [`grpo`]: group-relative advantages and REINFORCE updates.
//! * [`toy_env`]: a vocabulary-mismatch environment where only the right
//!   reasoning expansion retrieves the relevant document.
//! * [`eval`]: nDCG@k, TREC I/O and per-task reporting.
//!
//! Numeric code is generic over [`Real`]; the aliases below fix the common
//! precisions.

pub mod docsite;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod grpo;
pub mod index;
pub mod losses;
pub mod protocol;
pub mod reward;
pub mod scalar;
pub mod stage;
pub mod toy_env;

pub use embedding::Embedding;
pub use error::{Error, Result};
pub use scalar::Real;
pub use stage::TrainingStage;

pub type Embedding32 = embedding::Embedding<f32>;
pub type Embedding64 = embedding::Embedding<f64>;
/// Precision of the on-disk index.
pub type Index32 = index::Index<f32>;
pub type Index64 = index::Index<f64>;
pub type ScoreSet64 = reward::ScoreSet<f64>;
pub type RewardBreakdown64 = reward::RewardBreakdown<f64>;
pub type FormatPolicy64 = reward::FormatPolicy<f64>;
pub type StageLossWeights64 = losses::StageLossWeights<f64>;
pub type GrpoConfig64 = grpo::GrpoConfig<f64>;
pub type ToyPolicy64 = toy_env::ToyPolicy<f64>;
pub type ToyEnvironment64 = toy_env::ToyEnvironment<f64>;
pub type RunFile64 = eval::RunFile<f64>;
pub type MetricReport64 = eval::MetricReport<f64>;
