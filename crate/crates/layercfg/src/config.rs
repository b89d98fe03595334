//! Experiment configuration: a plain `key = value` file with `[section]`
//! headers. Every field has a default matching the reference protocol
//! (100 nodes, lr 0.001, 70 episodes of 30 steps, depth cap 15, init 5).

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::data::TargetColumn;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::fmodel::FModelConfig;
use crate::rl::RLConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitLayerPolicy {
    Fixed(u32),
    FModel,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset_path: PathBuf,
    pub target_column: TargetColumn,
    pub has_header: bool,
    /// 0 means use every row.
    pub top_rows: usize,
    /// Z-score the task dataset's features before training the target net.
    pub normalize_features: bool,
    pub env: EnvConfig,
    pub rl: RLConfig,
    pub fmodel: FModelConfig,
    /// F-model gradient steps after each episode.
    pub fmodel_update_steps: usize,
    pub pretrain_targets: Vec<i64>,
    pub pretrain_epochs: usize,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub init_layer: InitLayerPolicy,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset_path: PathBuf::from("data/boston.csv"),
            target_column: TargetColumn::Name("MEDV".to_string()),
            has_header: true,
            top_rows: 100,
            normalize_features: true,
            env: EnvConfig::default(),
            rl: RLConfig::default(),
            fmodel: FModelConfig::default(),
            fmodel_update_steps: 50,
            pretrain_targets: vec![3, 10, 50, 60, 100],
            pretrain_epochs: 4000,
            episodes: 70,
            steps_per_episode: 30,
            init_layer: InitLayerPolicy::Fixed(5),
            master_seed: 42,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_lowercase();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().to_lowercase();
            let value = value.trim();
            cfg.apply(&section, &key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, e)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::parse(&text)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("unknown key [{section}] {key}"));
        match (section, key) {
            ("dataset", "path") => self.dataset_path = PathBuf::from(value),
            ("dataset", "target") => {
                self.target_column = match value.parse::<usize>() {
                    Ok(i) => TargetColumn::Index(i),
                    Err(_) => TargetColumn::Name(value.to_string()),
                }
            }
            ("dataset", "has_header") => self.has_header = parse_bool(value)?,
            ("dataset", "top_rows") => self.top_rows = parse_num(value)?,
            ("dataset", "normalize") => self.normalize_features = parse_bool(value)?,
            ("env", "nodes_per_layer") => self.env.nodes_per_layer = parse_num(value)?,
            ("env", "train_iters") => self.env.train_iters = parse_num(value)?,
            ("env", "lr") => self.env.lr = parse_float(value)?,
            ("env", "layer_max") => self.env.layer_max = parse_num(value)? as u32,
            ("rl", "gamma") => self.rl.gamma = parse_float(value)?,
            ("rl", "epsilon") => self.rl.epsilon = parse_float(value)?,
            ("rl", "buffer_capacity") => self.rl.buffer_capacity = parse_num(value)?,
            ("rl", "batch_size") => self.rl.batch_size = parse_num(value)?,
            ("rl", "actor_lr") => self.rl.actor_lr = parse_float(value)?,
            ("rl", "critic_lr") => self.rl.critic_lr = parse_float(value)?,
            ("rl", "hidden_dim") => self.rl.hidden_dim = parse_num(value)?,
            ("rl", "actor_warmup_steps") => self.rl.actor_warmup_steps = parse_num(value)?,
            ("rl", "state_scale") => {
                self.rl.state_scale = match value.eq_ignore_ascii_case("auto") {
                    true => None,
                    false => Some(parse_float(value)?),
                }
            }
            ("rl", "critic_reset_period") => {
                self.rl.critic_reset_period = match value.eq_ignore_ascii_case("none") {
                    true => None,
                    false => Some(parse_num(value)?),
                }
            }
            ("fmodel", "lr") => self.fmodel.lr = parse_float(value)?,
            ("fmodel", "update_steps") => self.fmodel_update_steps = parse_num(value)?,
            ("fmodel", "pretrain_epochs") => self.pretrain_epochs = parse_num(value)?,
            ("fmodel", "targets") => {
                self.pretrain_targets = value
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<i64>()
                            .map_err(|e| Error::Config(e.to_string()))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            ("run", "episodes") => self.episodes = parse_num(value)?,
            ("run", "steps_per_episode") => self.steps_per_episode = parse_num(value)?,
            ("run", "init_layer") => {
                self.init_layer = if value.eq_ignore_ascii_case("fmodel") {
                    InitLayerPolicy::FModel
                } else {
                    InitLayerPolicy::Fixed(
                        value
                            .parse::<u32>()
                            .map_err(|e| Error::Config(e.to_string()))?,
                    )
                }
            }
            ("run", "seed") => {
                self.master_seed = value
                    .parse::<u64>()
                    .map_err(|e| Error::Config(e.to_string()))?
            }
            _ => return Err(bad()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes < 1 {
            return Err(Error::Config("episodes must be >= 1".into()));
        }
        if self.env.layer_max < 1 {
            return Err(Error::Config("layer_max must be >= 1".into()));
        }
        if let InitLayerPolicy::Fixed(v) = self.init_layer {
            if v < 1 || v > self.env.layer_max {
                return Err(Error::Config(format!(
                    "init_layer {} outside [1, {}]",
                    v, self.env.layer_max
                )));
            }
        }
        if !(self.rl.gamma >= 0.0 && self.rl.gamma < 1.0) {
            return Err(Error::Config("gamma must be in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.rl.epsilon) {
            return Err(Error::Config("epsilon must be in [0, 1]".into()));
        }
        if self.rl.batch_size < 1 || self.rl.buffer_capacity < 1 {
            return Err(Error::Config("batch_size and buffer_capacity must be >= 1".into()));
        }
        Ok(())
    }

    /// Re-parseable snapshot of every setting.
    pub fn snapshot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[dataset]");
        let _ = writeln!(s, "path = {}", self.dataset_path.display());
        match &self.target_column {
            TargetColumn::Name(n) => {
                let _ = writeln!(s, "target = {n}");
            }
            TargetColumn::Index(i) => {
                let _ = writeln!(s, "target = {i}");
            }
        }
        let _ = writeln!(s, "has_header = {}", self.has_header);
        let _ = writeln!(s, "top_rows = {}", self.top_rows);
        let _ = writeln!(s, "normalize = {}", self.normalize_features);
        let _ = writeln!(s, "\n[env]");
        let _ = writeln!(s, "nodes_per_layer = {}", self.env.nodes_per_layer);
        let _ = writeln!(s, "train_iters = {}", self.env.train_iters);
        let _ = writeln!(s, "lr = {}", self.env.lr);
        let _ = writeln!(s, "layer_max = {}", self.env.layer_max);
        let _ = writeln!(s, "\n[rl]");
        let _ = writeln!(s, "gamma = {}", self.rl.gamma);
        let _ = writeln!(s, "epsilon = {}", self.rl.epsilon);
        let _ = writeln!(s, "buffer_capacity = {}", self.rl.buffer_capacity);
        let _ = writeln!(s, "batch_size = {}", self.rl.batch_size);
        let _ = writeln!(s, "actor_lr = {}", self.rl.actor_lr);
        let _ = writeln!(s, "critic_lr = {}", self.rl.critic_lr);
        let _ = writeln!(s, "hidden_dim = {}", self.rl.hidden_dim);
        let _ = writeln!(s, "actor_warmup_steps = {}", self.rl.actor_warmup_steps);
        match self.rl.state_scale {
            Some(v) => {
                let _ = writeln!(s, "state_scale = {v}");
            }
            None => {
                let _ = writeln!(s, "state_scale = auto");
            }
        }
        match self.rl.critic_reset_period {
            Some(v) => {
                let _ = writeln!(s, "critic_reset_period = {v}");
            }
            None => {
                let _ = writeln!(s, "critic_reset_period = none");
            }
        }
        let _ = writeln!(s, "\n[fmodel]");
        let _ = writeln!(s, "lr = {}", self.fmodel.lr);
        let _ = writeln!(s, "update_steps = {}", self.fmodel_update_steps);
        let _ = writeln!(s, "pretrain_epochs = {}", self.pretrain_epochs);
        let targets: Vec<String> = self.pretrain_targets.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(s, "targets = {}", targets.join(","));
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "episodes = {}", self.episodes);
        let _ = writeln!(s, "steps_per_episode = {}", self.steps_per_episode);
        match self.init_layer {
            InitLayerPolicy::Fixed(v) => {
                let _ = writeln!(s, "init_layer = {v}");
            }
            InitLayerPolicy::FModel => {
                let _ = writeln!(s, "init_layer = fmodel");
            }
        }
        let _ = writeln!(s, "seed = {}", self.master_seed);
        s
    }
}

fn parse_bool(v: &str) -> Result<bool> {
    match v.to_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("expected boolean, got {v:?}"))),
    }
}

fn parse_num(v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|e| Error::Config(format!("{v:?}: {e}")))
}

fn parse_float(v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|e| Error::Config(format!("{v:?}: {e}")))
}
