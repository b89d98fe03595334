//! Experiment orchestration: full two-stage training, frozen validation,
//! surrogate oracle runs, and F-model pretraining, all logged as CSV into a
//! per-run output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, InitLayerPolicy};
use crate::data::{self, SupervisedDataset};
use crate::env::{LayerCount, TargetEnv};
use crate::error::Result;
use crate::fmodel::{self, FModel, PretrainReport};
use crate::rl::{Controller, EpisodeLog, RLConfig};
use crate::seeding;
use crate::surrogate::SurrogateEnv;

pub const ACTOR_WEIGHTS: &str = "actor.weights";
pub const CRITIC_WEIGHTS: &str = "critic.weights";
pub const FMODEL_WEIGHTS: &str = "fmodel.weights";

/// Loads, trims, and optionally normalizes the task dataset named by the
/// config.
pub fn load_task_dataset(cfg: &ExperimentConfig) -> Result<SupervisedDataset> {
    let mut ds = data::load_csv(&cfg.dataset_path, &cfg.target_column, cfg.has_header)?;
    if cfg.top_rows > 0 && cfg.top_rows < ds.rows() {
        ds = data::take_top(&ds, cfg.top_rows)?;
    }
    if cfg.normalize_features {
        ds = data::normalize(&ds).0;
    }
    Ok(ds)
}

struct LogWriters {
    episodes: BufWriter<File>,
    updates: BufWriter<File>,
    summary: BufWriter<File>,
    update_index: usize,
}

impl LogWriters {
    fn create(dir: &Path) -> Result<LogWriters> {
        let episodes = BufWriter::new(File::create(dir.join("episodes.csv"))?);
        let updates = BufWriter::new(File::create(dir.join("updates.csv"))?);
        let summary = BufWriter::new(File::create(dir.join("summary.csv"))?);
        let mut w = LogWriters {
            episodes,
            updates,
            summary,
            update_index: 0,
        };
        writeln!(
            w.episodes,
            "episode,t,layer,loss,reward,action,epsilon,actor_loss,critic_loss,fault"
        )?;
        writeln!(w.updates, "update_index,episode,t,actor_loss,critic_loss")?;
        writeln!(
            w.summary,
            "episode,init_layer,best_layer,final_layer,discounted_return,fmodel_update_loss"
        )?;
        Ok(w)
    }

    fn append_episode(&mut self, log: &EpisodeLog, fmodel_loss: Option<f64>) -> Result<()> {
        writeln!(
            self.episodes,
            "{},0,{},{},,,,,,{}",
            log.episode,
            log.init_layer,
            log.initial_loss,
            log.initial_fault as u8
        )?;
        for s in &log.steps {
            writeln!(
                self.episodes,
                "{},{},{},{},{},{},{},{},{},{}",
                log.episode,
                s.t,
                s.layer,
                s.loss,
                s.reward,
                s.action.delta(),
                s.epsilon,
                s.actor_loss.map(|v| v.to_string()).unwrap_or_default(),
                s.critic_loss.map(|v| v.to_string()).unwrap_or_default(),
                s.fault as u8
            )?;
            if let (Some(a), Some(c)) = (s.actor_loss, s.critic_loss) {
                writeln!(
                    self.updates,
                    "{},{},{},{},{}",
                    self.update_index, log.episode, s.t, a, c
                )?;
                self.update_index += 1;
            }
        }
        let final_layer = log.steps.last().map(|s| s.layer).unwrap_or(log.init_layer);
        writeln!(
            self.summary,
            "{},{},{},{},{},{}",
            log.episode,
            log.init_layer,
            log.best_layer,
            final_layer,
            log.discounted_return,
            fmodel_loss.map(|v| v.to_string()).unwrap_or_default()
        )?;
        self.flush()
    }

    fn flush(&mut self) -> Result<()> {
        self.episodes.flush()?;
        self.updates.flush()?;
        self.summary.flush()?;
        Ok(())
    }
}

fn prepare_out_dir(out_dir: &Path, kind: &str, cfg_snapshot: &str, seed: u64) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("config_snapshot.txt"), cfg_snapshot)?;
    fs::write(out_dir.join("meta.txt"), format!("kind={kind}\nseed={seed}\n"))?;
    Ok(())
}

pub struct TrainOutcome {
    pub episode_logs: Vec<EpisodeLog>,
    pub out_dir: PathBuf,
}

/// The full two-stage training loop: per episode, reset the depth to the
/// init policy's value, run the controller with learning on, then pull the
/// F model toward the episode's best depth. Fully deterministic in the
/// master seed.
pub fn run_training(cfg: &ExperimentConfig, out_dir: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    prepare_out_dir(out_dir, "train", &cfg.snapshot(), cfg.master_seed)?;

    let dataset = load_task_dataset(cfg)?;
    let encoded = fmodel::encode_dataset(&dataset)?;

    let mut env = TargetEnv {
        cfg: crate::env::EnvConfig {
            seed: seeding::derive_seed(cfg.master_seed, "env"),
            ..cfg.env.clone()
        },
        dataset,
    };
    let mut controller = Controller::new(
        cfg.rl.clone(),
        seeding::derive_seed(cfg.master_seed, "controller"),
    )?;
    let mut fmodel = FModel::new(&cfg.fmodel, seeding::derive_seed(cfg.master_seed, "fmodel"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive_seed(cfg.master_seed, "rng"));
    let episode_seed = seeding::derive_seed(cfg.master_seed, "episode");

    let mut writers = LogWriters::create(out_dir)?;
    let mut episode_logs = Vec::with_capacity(cfg.episodes);
    for m in 0..cfg.episodes {
        let init_layer = match cfg.init_layer {
            InitLayerPolicy::Fixed(v) => LayerCount::new(v, cfg.env.layer_max)?,
            InitLayerPolicy::FModel => fmodel.init_layer(&encoded, cfg.env.layer_max)?,
        };
        let nonce = seeding::combine(episode_seed, &[m as u64]);
        let log = controller.run_episode(
            &mut env,
            init_layer,
            cfg.steps_per_episode,
            true,
            m,
            nonce,
            &mut rng,
        )?;
        let best = LayerCount::new(log.best_layer, cfg.env.layer_max)?;
        let fmodel_loss = if cfg.fmodel_update_steps > 0 {
            Some(fmodel.update(&encoded, best, cfg.fmodel_update_steps)?)
        } else {
            None
        };
        writers.append_episode(&log, fmodel_loss)?;
        episode_logs.push(log);
    }

    controller.actor.net.save(&out_dir.join(ACTOR_WEIGHTS))?;
    controller.critic.net.save(&out_dir.join(CRITIC_WEIGHTS))?;
    fmodel.save(&out_dir.join(FMODEL_WEIGHTS))?;
    Ok(TrainOutcome {
        episode_logs,
        out_dir: out_dir.to_path_buf(),
    })
}

pub struct ValidationOutcome {
    pub episode_logs: Vec<EpisodeLog>,
    pub init_layer: u32,
    pub controller: Controller,
    pub fmodel: FModel,
}

pub const VALIDATION_EPISODES: usize = 3;

/// Three frozen episodes: the F model picks the starting depth, epsilon is
/// forced to zero, and no parameter is updated.
pub fn run_validation(
    cfg: &ExperimentConfig,
    weights_dir: &Path,
    out_dir: &Path,
) -> Result<ValidationOutcome> {
    cfg.validate()?;
    prepare_out_dir(out_dir, "validate", &cfg.snapshot(), cfg.master_seed)?;

    let dataset = load_task_dataset(cfg)?;
    let encoded = fmodel::encode_dataset(&dataset)?;

    let actor_net = crate::nn::Network::load(&weights_dir.join(ACTOR_WEIGHTS))?;
    let critic_net = crate::nn::Network::load(&weights_dir.join(CRITIC_WEIGHTS))?;
    let mut fm = FModel::load(&weights_dir.join(FMODEL_WEIGHTS))?;

    let rl = RLConfig {
        epsilon: 0.0,
        ..cfg.rl.clone()
    };
    let mut controller = Controller::new(rl, seeding::derive_seed(cfg.master_seed, "controller"))?;
    controller.actor.net = actor_net;
    controller.critic.net = critic_net;

    let mut env = TargetEnv {
        cfg: crate::env::EnvConfig {
            seed: seeding::derive_seed(cfg.master_seed, "env"),
            ..cfg.env.clone()
        },
        dataset,
    };
    let init_layer = fm.init_layer(&encoded, cfg.env.layer_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive_seed(cfg.master_seed, "validate-rng"));
    let episode_seed = seeding::derive_seed(cfg.master_seed, "validate-episode");

    let mut writers = LogWriters::create(out_dir)?;
    let mut episode_logs = Vec::new();
    for m in 0..VALIDATION_EPISODES {
        let nonce = seeding::combine(episode_seed, &[m as u64]);
        let log = controller.run_episode(
            &mut env,
            init_layer,
            cfg.steps_per_episode,
            false,
            m,
            nonce,
            &mut rng,
        )?;
        writers.append_episode(&log, None)?;
        episode_logs.push(log);
    }
    Ok(ValidationOutcome {
        episode_logs,
        init_layer: init_layer.get(),
        controller,
        fmodel: fm,
    })
}

#[derive(Debug, Clone)]
pub struct SurrogateRunConfig {
    pub env: SurrogateEnv,
    pub rl: RLConfig,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub init_layer: u32,
    /// Fixed depth for training-episode starts; `None` draws a fresh
    /// uniform depth each episode.
    pub train_init: Option<u32>,
    /// Training-episode length; `None` reuses `steps_per_episode`.
    pub train_steps: Option<usize>,
    pub seeds: Vec<u64>,
    /// Extra greedy rollouts from these inits after training (per seed).
    pub init_sweep: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct SurrogateSeedResult {
    pub seed: u64,
    pub terminal_layer: u32,
    pub argmin: u32,
    pub success: bool,
    /// Greedy trajectory per sweep init: (init, layers over time).
    pub sweep: Vec<(u32, Vec<u32>)>,
}

#[derive(Debug, Clone)]
pub struct SurrogateSummary {
    pub results: Vec<SurrogateSeedResult>,
}

impl SurrogateSummary {
    pub fn successes(&self) -> usize {
        self.results.iter().filter(|r| r.success).count()
    }
}

/// Trains one controller per seed against the analytic surrogate, then runs
/// a greedy rollout; success means the terminal greedy depth hits the
/// brute-force argmin.
pub fn run_surrogate(scfg: &SurrogateRunConfig, out_dir: &Path) -> Result<SurrogateSummary> {
    scfg.env.validate()?;
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("meta.txt"),
        format!("kind=surrogate\nseeds={}\n", scfg.seeds.len()),
    )?;
    let mut summary_file = BufWriter::new(File::create(out_dir.join("surrogate_summary.csv"))?);
    writeln!(summary_file, "seed,terminal_layer,argmin,success")?;

    let mut results = Vec::with_capacity(scfg.seeds.len());
    for &seed in &scfg.seeds {
        let seed_dir = out_dir.join(format!("seed_{seed}"));
        fs::create_dir_all(&seed_dir)?;
        fs::write(
            seed_dir.join("meta.txt"),
            format!("kind=train\nseed={seed}\n"),
        )?;
        let mut writers = LogWriters::create(&seed_dir)?;

        let mut env = scfg.env.clone();
        let mut controller = Controller::new(scfg.rl.clone(), seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive_seed(seed, "rng"));
        let episode_seed = seeding::derive_seed(seed, "episode");
        let layer_max = env.layer_max;

        for m in 0..scfg.episodes {
            // random training inits expose both sides of any interior
            // optimum; a fixed init keeps the state scale consistent
            let init_val = match scfg.train_init {
                Some(v) => v,
                None => 1 + rng.gen_range(0..layer_max),
            };
            let init = LayerCount::new(init_val, layer_max)?;
            let nonce = seeding::combine(episode_seed, &[m as u64]);
            let log = controller.run_episode(
                &mut env,
                init,
                scfg.train_steps.unwrap_or(scfg.steps_per_episode),
                true,
                m,
                nonce,
                &mut rng,
            )?;
            writers.append_episode(&log, None)?;
        }

        // greedy evaluation rollout
        let frozen_eps = controller.cfg.epsilon;
        controller.cfg.epsilon = 0.0;
        let init = LayerCount::new(scfg.init_layer, layer_max)?;
        let eval_nonce = seeding::combine(episode_seed, &[u64::MAX]);
        let greedy = controller.run_episode(
            &mut env,
            init,
            scfg.steps_per_episode,
            false,
            scfg.episodes,
            eval_nonce,
            &mut rng,
        )?;
        let terminal = greedy
            .steps
            .last()
            .map(|s| s.layer)
            .unwrap_or(greedy.init_layer);
        write_greedy_csv(&seed_dir.join("greedy.csv"), &[(scfg.init_layer, &greedy)])?;

        let mut sweep = Vec::new();
        if !scfg.init_sweep.is_empty() {
            let mut logs = Vec::new();
            for &iv in &scfg.init_sweep {
                let init = LayerCount::new(iv, layer_max)?;
                let log = controller.run_episode(
                    &mut env,
                    init,
                    scfg.steps_per_episode,
                    false,
                    scfg.episodes,
                    eval_nonce,
                    &mut rng,
                )?;
                sweep.push((iv, log.steps.iter().map(|s| s.layer).collect()));
                logs.push((iv, log));
            }
            let refs: Vec<(u32, &EpisodeLog)> = logs.iter().map(|(i, l)| (*i, l)).collect();
            write_greedy_csv(&seed_dir.join("sweep.csv"), &refs)?;
        }
        controller.cfg.epsilon = frozen_eps;

        let argmin = scfg.env.argmin(eval_nonce);
        let success = terminal == argmin;
        writeln!(
            summary_file,
            "{seed},{terminal},{argmin},{}",
            success as u8
        )?;
        results.push(SurrogateSeedResult {
            seed,
            terminal_layer: terminal,
            argmin,
            success,
            sweep,
        });
    }
    summary_file.flush()?;
    Ok(SurrogateSummary { results })
}

fn write_greedy_csv(path: &Path, logs: &[(u32, &EpisodeLog)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "init,t,layer,loss")?;
    for (init, log) in logs {
        writeln!(w, "{init},0,{},{}", log.init_layer, log.initial_loss)?;
        for s in &log.steps {
            writeln!(w, "{init},{},{},{}", s.t, s.layer, s.loss)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Runs the pretraining experiment over the given datasets and writes the
/// report CSV (one row per target and dataset) plus the trained weights.
pub fn run_fmodel_pretrain(
    cfg: &ExperimentConfig,
    datasets: &[(String, SupervisedDataset)],
    out_dir: &Path,
) -> Result<PretrainReport> {
    cfg.validate()?;
    prepare_out_dir(out_dir, "fmodel-pretrain", &cfg.snapshot(), cfg.master_seed)?;
    let mut fm = FModel::new(&cfg.fmodel, seeding::derive_seed(cfg.master_seed, "fmodel"))?;
    let report = fmodel::pretrain_experiment(
        &mut fm,
        datasets,
        &cfg.pretrain_targets,
        cfg.pretrain_epochs,
        seeding::derive_seed(cfg.master_seed, "split"),
    )?;
    let mut w = BufWriter::new(File::create(out_dir.join("pretrain_report.csv"))?);
    writeln!(
        w,
        "dataset,true_layer,random_initialized,train_layer,test_layer"
    )?;
    for row in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            row.dataset, row.target, row.initial, row.train_pred, row.test_pred
        )?;
    }
    w.flush()?;
    fm.save(&out_dir.join(FMODEL_WEIGHTS))?;
    Ok(report)
}

/// Helper for the pretraining CLI path: loads the primary dataset (with
/// `top_rows` applied) and any extra datasets given as `(path, target)`.
pub fn load_pretrain_datasets(
    cfg: &ExperimentConfig,
    extra: &[(PathBuf, data::TargetColumn)],
) -> Result<Vec<(String, SupervisedDataset)>> {
    let mut out = Vec::new();
    let mut primary = data::load_csv(&cfg.dataset_path, &cfg.target_column, cfg.has_header)?;
    if cfg.top_rows > 0 && cfg.top_rows < primary.rows() {
        primary = data::take_top(&primary, cfg.top_rows)?;
    }
    out.push((stem_name(&cfg.dataset_path), primary));
    for (path, target) in extra {
        let ds = data::load_csv(path, target, true)?;
        out.push((stem_name(path), ds));
    }
    Ok(out)
}

fn stem_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::SurrogateEnv;

    fn small_surrogate_cfg(seeds: Vec<u64>) -> SurrogateRunConfig {
        SurrogateRunConfig {
            env: SurrogateEnv::monotone(1.0, 15),
            rl: RLConfig::default(),
            episodes: 6,
            steps_per_episode: 15,
            init_layer: 5,
            train_init: None,
            train_steps: None,
            seeds,
            init_sweep: vec![],
        }
    }

    #[test]
    fn surrogate_run_writes_summary() {
        let dir = tempfile::tempdir().unwrap();
        let summary = run_surrogate(&small_surrogate_cfg(vec![1, 2]), dir.path()).unwrap();
        assert_eq!(summary.results.len(), 2);
        let text = fs::read_to_string(dir.path().join("surrogate_summary.csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(dir.path().join("seed_1/episodes.csv").exists());
        assert!(dir.path().join("seed_2/greedy.csv").exists());
    }

    #[test]
    fn surrogate_run_is_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run_surrogate(&small_surrogate_cfg(vec![3]), d1.path()).unwrap();
        run_surrogate(&small_surrogate_cfg(vec![3]), d2.path()).unwrap();
        let a = fs::read(d1.path().join("seed_3/episodes.csv")).unwrap();
        let b = fs::read(d2.path().join("seed_3/episodes.csv")).unwrap();
        assert_eq!(a, b);
    }
}
