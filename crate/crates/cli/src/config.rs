//! Layered configuration: flags, then a `key = value` file, then `T1_*`
//! environment variables, then built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use rankreason::grpo::{GrpoConfig, DEFAULT_ADVANTAGE_EPSILON};
use rankreason::losses::{StageLossWeights, DEFAULT_NCE_TEMPERATURE, DEFAULT_TRIPLET_MARGIN};
use rankreason::protocol::{BackendDescriptor, DEFAULT_MAX_REASONING_TOKENS, DEFAULT_MOCK_DIM};
use rankreason::reward::{
    FormatPolicy, DEFAULT_PENALTY_INVALID, DEFAULT_PENALTY_VALID, DEFAULT_TAU,
};
use rankreason::toy_env::DEFAULT_TASKS;
use rankreason::TrainingStage;

/// Every configuration key. Each has a same-named `--flag` and a
/// `T1_<KEY>` environment variable (upper case, `-` as `_`).
pub const KEYS: [&str; 24] = [
    "backend",
    "backend-endpoint",
    "backend-seed",
    "backend-dim",
    "max-reasoning-tokens",
    "query-stage",
    "index-path",
    "tau",
    "loss-stage",
    "weight-sft",
    "weight-nce",
    "weight-tri",
    "weight-kl",
    "temperature",
    "margin",
    "group-size",
    "lr",
    "advantage-epsilon",
    "iterations",
    "seed",
    "tasks",
    "penalty-invalid",
    "penalty-valid",
    "gating",
];

fn default_value(key: &str) -> Option<String> {
    let w = StageLossWeights::<f64>::stage1();
    let g = GrpoConfig::<f64>::default();
    Some(match key {
        "backend" => "mock".into(),
        "backend-endpoint" | "index-path" => return None,
        "backend-seed" => "0".into(),
        "backend-dim" => DEFAULT_MOCK_DIM.to_string(),
        "max-reasoning-tokens" => DEFAULT_MAX_REASONING_TOKENS.to_string(),
        "query-stage" => TrainingStage::Stage2.to_string(),
        "tau" => DEFAULT_TAU.to_string(),
        "loss-stage" => w.stage.to_string(),
        "weight-sft" => w.sft.to_string(),
        "weight-nce" => w.nce.to_string(),
        "weight-tri" => w.tri.to_string(),
        "weight-kl" => w.kl.to_string(),
        "temperature" => DEFAULT_NCE_TEMPERATURE.to_string(),
        "margin" => DEFAULT_TRIPLET_MARGIN.to_string(),
        "group-size" => g.group_size.to_string(),
        "lr" => g.learning_rate.to_string(),
        "advantage-epsilon" => DEFAULT_ADVANTAGE_EPSILON.to_string(),
        "iterations" => g.iterations.to_string(),
        "seed" => g.seed.to_string(),
        "tasks" => DEFAULT_TASKS.to_string(),
        "penalty-invalid" => DEFAULT_PENALTY_INVALID.to_string(),
        "penalty-valid" => DEFAULT_PENALTY_VALID.to_string(),
        "gating" => "true".into(),
        _ => unreachable!("unknown key {key}"),
    })
}

pub fn env_name(key: &str) -> String {
    format!("T1_{}", key.to_uppercase().replace('-', "_"))
}

/// Configuration flags, accepted before or after the subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// `key = value` configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Encoder backend: mock or remote [default: mock]
    #[arg(long, global = true, value_name = "KIND")]
    pub backend: Option<String>,
    /// host:port of the remote encoder
    #[arg(long, global = true, value_name = "ADDR")]
    pub backend_endpoint: Option<String>,
    /// Mock backend seed [default: 0]
    #[arg(long, global = true, value_name = "N")]
    pub backend_seed: Option<String>,
    /// Mock backend embedding dimension [default: 256]
    #[arg(long, global = true, value_name = "N")]
    pub backend_dim: Option<String>,
    /// Reasoning token budget per query [default: 512]
    #[arg(long, global = true, value_name = "N")]
    pub max_reasoning_tokens: Option<String>,
    /// Query template: stage1, stage2 or stage3 [default: stage2]
    #[arg(long, global = true, value_name = "STAGE")]
    pub query_stage: Option<String>,
    /// Index file used by `search` and written by `index`
    #[arg(long, global = true, value_name = "PATH")]
    pub index_path: Option<String>,
    /// Soft-rank temperature [default: 0.05]
    #[arg(long, global = true, value_name = "X")]
    pub tau: Option<String>,
    /// Loss weight preset: stage1 or stage2 [default: stage1]
    #[arg(long, global = true, value_name = "STAGE")]
    pub loss_stage: Option<String>,
    /// SFT weight [default: from loss-stage]
    #[arg(long, global = true, value_name = "X")]
    pub weight_sft: Option<String>,
    /// InfoNCE weight [default: from loss-stage]
    #[arg(long, global = true, value_name = "X")]
    pub weight_nce: Option<String>,
    /// Triplet weight [default: from loss-stage]
    #[arg(long, global = true, value_name = "X")]
    pub weight_tri: Option<String>,
    /// KL weight [default: from loss-stage]
    #[arg(long, global = true, value_name = "X")]
    pub weight_kl: Option<String>,
    /// InfoNCE temperature [default: 0.05]
    #[arg(long, global = true, value_name = "X")]
    pub temperature: Option<String>,
    /// Triplet margin [default: 0.2]
    #[arg(long, global = true, value_name = "X")]
    pub margin: Option<String>,
    /// Trajectories per query group [default: 8]
    #[arg(long, global = true, value_name = "N")]
    pub group_size: Option<String>,
    /// Policy learning rate [default: 0.1]
    #[arg(long, global = true, value_name = "X")]
    pub lr: Option<String>,
    /// Advantage denominator guard [default: 1e-8]
    #[arg(long, global = true, value_name = "X")]
    pub advantage_epsilon: Option<String>,
    /// Training iterations [default: 200]
    #[arg(long, global = true, value_name = "N")]
    pub iterations: Option<String>,
    /// Toy environment and rollout seed [default: 0]
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<String>,
    /// Number of toy tasks [default: 20]
    #[arg(long, global = true, value_name = "N")]
    pub tasks: Option<String>,
    /// Format reward for a malformed output [default: -1]
    #[arg(long, global = true, value_name = "X", allow_hyphen_values = true)]
    pub penalty_invalid: Option<String>,
    /// Format reward for a well-formed output [default: 0]
    #[arg(long, global = true, value_name = "X", allow_hyphen_values = true)]
    pub penalty_valid: Option<String>,
    /// Drop the rank reward for malformed outputs: true or false [default: true]
    #[arg(long, global = true, value_name = "BOOL")]
    pub gating: Option<String>,
}

impl ConfigFlags {
    fn get(&self, key: &str) -> Option<&String> {
        match key {
            "backend" => self.backend.as_ref(),
            "backend-endpoint" => self.backend_endpoint.as_ref(),
            "backend-seed" => self.backend_seed.as_ref(),
            "backend-dim" => self.backend_dim.as_ref(),
            "max-reasoning-tokens" => self.max_reasoning_tokens.as_ref(),
            "query-stage" => self.query_stage.as_ref(),
            "index-path" => self.index_path.as_ref(),
            "tau" => self.tau.as_ref(),
            "loss-stage" => self.loss_stage.as_ref(),
            "weight-sft" => self.weight_sft.as_ref(),
            "weight-nce" => self.weight_nce.as_ref(),
            "weight-tri" => self.weight_tri.as_ref(),
            "weight-kl" => self.weight_kl.as_ref(),
            "temperature" => self.temperature.as_ref(),
            "margin" => self.margin.as_ref(),
            "group-size" => self.group_size.as_ref(),
            "lr" => self.lr.as_ref(),
            "advantage-epsilon" => self.advantage_epsilon.as_ref(),
            "iterations" => self.iterations.as_ref(),
            "seed" => self.seed.as_ref(),
            "tasks" => self.tasks.as_ref(),
            "penalty-invalid" => self.penalty_invalid.as_ref(),
            "penalty-valid" => self.penalty_valid.as_ref(),
            "gating" => self.gating.as_ref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    Env,
    File,
    Flag,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Default => "default",
            Source::Env => "env",
            Source::File => "config",
            Source::Flag => "flag",
        })
    }
}

pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key = value", i + 1))?;
        let key = k.trim();
        if !KEYS.contains(&key) {
            bail!("config line {}: unknown key `{key}`", i + 1);
        }
        if out.insert(key.to_owned(), v.trim().to_owned()).is_some() {
            bail!("config line {}: duplicate key `{key}`", i + 1);
        }
    }
    Ok(out)
}

/// Raw string values with their origin.
#[derive(Debug, Clone)]
pub struct Layers {
    values: BTreeMap<&'static str, (String, Source)>,
}

impl Layers {
    pub fn resolve(
        flags: &ConfigFlags,
        file: &BTreeMap<String, String>,
        env: impl Fn(&str) -> Option<String>,
    ) -> Self {
        let mut values = BTreeMap::new();
        for key in KEYS {
            let picked = flags
                .get(key)
                .map(|v| (v.clone(), Source::Flag))
                .or_else(|| file.get(key).map(|v| (v.clone(), Source::File)))
                .or_else(|| env(&env_name(key)).map(|v| (v, Source::Env)))
                .or_else(|| default_value(key).map(|v| (v, Source::Default)));
            if let Some(v) = picked {
                values.insert(key, v);
            }
        }
        Self { values }
    }

    pub fn load(flags: &ConfigFlags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => parse_config_file(
                &std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?,
            )
            .with_context(|| format!("in {}", path.display()))?,
            None => BTreeMap::new(),
        };
        Ok(Self::resolve(flags, &file, |name| std::env::var(name).ok()))
    }

    pub fn raw(&self, key: &str) -> Option<&(String, Source)> {
        self.values.get(key)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let (v, src) = self.raw(key).ok_or_else(|| anyhow!("`{key}` is not set"))?;
        v.parse()
            .map_err(|e| anyhow!("invalid value `{v}` for `{key}` (from {src}): {e}"))
    }

    fn optional(&self, key: &str) -> Option<String> {
        self.raw(key)
            .map(|(v, _)| v.clone())
            .filter(|v| !v.is_empty())
    }

    /// `key = value  # source` lines, loadable as a config file.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            match self.raw(key) {
                Some((v, src)) => s.push_str(&format!("{key} = {v}  # {src}\n")),
                None => s.push_str(&format!("# {key} is unset\n")),
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub backend: BackendDescriptor,
    pub query_stage: TrainingStage,
    pub index_path: Option<PathBuf>,
    pub tau: f64,
    pub stage_weights: StageLossWeights<f64>,
    pub temperature: f64,
    pub margin: f64,
    pub grpo: GrpoConfig<f64>,
    pub tasks: usize,
    pub format_policy: FormatPolicy<f64>,
}

impl Config {
    pub fn from_layers(l: &Layers) -> Result<Self> {
        let max_reasoning_tokens = l.parse("max-reasoning-tokens")?;
        let backend = match l.parse::<String>("backend")?.as_str() {
            "mock" => BackendDescriptor::DeterministicMock {
                seed: l.parse("backend-seed")?,
                dim: l.parse("backend-dim")?,
                max_reasoning_tokens,
            },
            "remote" => BackendDescriptor::RemoteService {
                endpoint: l.optional("backend-endpoint").ok_or_else(|| {
                    anyhow!("remote backend needs --backend-endpoint or T1_BACKEND_ENDPOINT")
                })?,
                max_reasoning_tokens,
            },
            other => bail!("invalid value `{other}` for `backend`: expected mock or remote"),
        };

        let loss_stage: TrainingStage = l.parse("loss-stage")?;
        let preset = StageLossWeights::preset(loss_stage)?;
        let weight = |key: &str, preset_value: f64| -> Result<f64> {
            match l.raw(key) {
                Some((_, Source::Default)) | None => Ok(preset_value),
                Some(_) => l.parse(key),
            }
        };
        let stage_weights = StageLossWeights::new(
            weight("weight-sft", preset.sft)?,
            weight("weight-nce", preset.nce)?,
            weight("weight-tri", preset.tri)?,
            weight("weight-kl", preset.kl)?,
            loss_stage,
        )?;

        let tau: f64 = l.parse("tau")?;
        if !(tau > 0.0) || !tau.is_finite() {
            bail!("`tau` must be positive");
        }
        let temperature: f64 = l.parse("temperature")?;
        if !(temperature > 0.0) || !temperature.is_finite() {
            bail!("`temperature` must be positive");
        }
        let margin: f64 = l.parse("margin")?;
        if !(margin >= 0.0) || !margin.is_finite() {
            bail!("`margin` must be >= 0");
        }
        let grpo = GrpoConfig {
            group_size: l.parse("group-size")?,
            learning_rate: l.parse("lr")?,
            advantage_epsilon: l.parse("advantage-epsilon")?,
            iterations: l.parse("iterations")?,
            seed: l.parse("seed")?,
        };
        grpo.validate()?;
        let tasks: usize = l.parse("tasks")?;
        if tasks == 0 {
            bail!("`tasks` must be positive");
        }
        let format_policy = FormatPolicy::new(
            l.parse("penalty-invalid")?,
            l.parse("penalty-valid")?,
            l.parse("gating")?,
        )?;

        Ok(Self {
            backend,
            query_stage: l.parse("query-stage")?,
            index_path: l.optional("index-path").map(PathBuf::from),
            tau,
            stage_weights,
            temperature,
            margin,
            grpo,
            tasks,
            format_policy,
        })
    }

    pub fn index_path(&self, explicit: Option<&Path>) -> Result<PathBuf> {
        explicit
            .map(Path::to_path_buf)
            .or_else(|| self.index_path.clone())
            .ok_or_else(|| anyhow!("no index path: pass --index-path or set index-path"))
    }
}
