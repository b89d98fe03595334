use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use layercfg::config::ExperimentConfig;
use layercfg::data::TargetColumn;
use layercfg::harness::{self, SurrogateRunConfig};
use layercfg::report;
use layercfg::rl::RLConfig;
use layercfg::surrogate::SurrogateEnv;

/// Two-stage layer-count configurator: depth prediction from raw data plus
/// an actor-critic refinement loop over the target network's depth.
#[derive(Parser)]
#[command(name = "layercfg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file (key = value sections); defaults apply if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for logs and weights.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Task dataset CSV override.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

impl CommonArgs {
    fn experiment_config(&self) -> layercfg::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(ds) = &self.dataset {
            cfg.dataset_path = ds.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Monotone,
    Unimodal,
    NoisyUnimodal,
}

#[derive(Subcommand)]
enum Command {
    /// Full training run: controller episodes plus per-episode depth-model updates.
    Train(CommonArgs),
    /// Frozen greedy validation episodes using saved weights.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory holding actor/critic/depth-model weight files.
        #[arg(long)]
        weights: PathBuf,
    },
    /// Sequential depth-regression pretraining with a per-target report.
    FmodelPretrain {
        #[command(flatten)]
        common: CommonArgs,
        /// Extra dataset CSVs to include (paired with --extra-target).
        #[arg(long = "extra-dataset")]
        extra_datasets: Vec<PathBuf>,
        /// Target column name for each extra dataset, in the same order.
        #[arg(long = "extra-target")]
        extra_targets: Vec<String>,
    },
    /// Controller runs against an analytic surrogate with a known optimum.
    Surrogate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "monotone")]
        family: Family,
        /// Number of independent controller seeds.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// First seed value; seeds are consecutive from here.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Explicit comma-separated seed list; overrides --seed/--seeds.
        #[arg(long, value_delimiter = ',')]
        seed_list: Vec<u64>,
        #[arg(long, default_value_t = 40)]
        episodes: usize,
        #[arg(long, default_value_t = 30)]
        steps: usize,
        #[arg(long, default_value_t = 5)]
        init_layer: u32,
        /// Fixed training-episode init depth; omitted means random per episode.
        #[arg(long)]
        train_init: Option<u32>,
        /// Training-episode length; omitted reuses --steps.
        #[arg(long)]
        train_steps: Option<usize>,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 0.001)]
        actor_lr: f64,
        #[arg(long, default_value_t = 0.001)]
        critic_lr: f64,
        /// Critic-only learning steps before actor updates start.
        #[arg(long, default_value_t = 0)]
        warmup: usize,
        /// Re-initialize the critic every this many learning steps.
        #[arg(long)]
        critic_reset: Option<usize>,
        #[arg(long, default_value_t = 15)]
        layer_max: u32,
        /// Interior optimum for the unimodal families.
        #[arg(long, default_value_t = 7.0)]
        l_star: f64,
        /// Scale of the monotone family's loss.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Loss floor for the unimodal families.
        #[arg(long, default_value_t = 0.1)]
        b: f64,
        /// Noise amplitude for the noisy family.
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
        #[arg(long, default_value_t = 0.3)]
        epsilon: f64,
        /// Extra greedy rollouts from these comma-separated inits.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<u32>,
    },
    /// Produce figure CSVs and SVG plots from a finished run directory.
    Report {
        /// The run directory written by train/validate/surrogate.
        #[arg(long)]
        run: PathBuf,
        /// Where to put the figures (default: <run>/report).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> layercfg::Result<()> {
    match cli.command {
        Command::Train(common) => {
            let cfg = common.experiment_config()?;
            let outcome = harness::run_training(&cfg, &common.out)?;
            println!(
                "trained {} episodes; logs and weights in {}",
                outcome.episode_logs.len(),
                common.out.display()
            );
        }
        Command::Validate { common, weights } => {
            let cfg = common.experiment_config()?;
            let outcome = harness::run_validation(&cfg, &weights, &common.out)?;
            println!(
                "validated {} episodes from init layer {}; logs in {}",
                outcome.episode_logs.len(),
                outcome.init_layer,
                common.out.display()
            );
        }
        Command::FmodelPretrain {
            common,
            extra_datasets,
            extra_targets,
        } => {
            if extra_datasets.len() != extra_targets.len() {
                return Err(layercfg::Error::InvalidArgument(
                    "each --extra-dataset needs a matching --extra-target".into(),
                ));
            }
            let cfg = common.experiment_config()?;
            let extra: Vec<(PathBuf, TargetColumn)> = extra_datasets
                .into_iter()
                .zip(extra_targets)
                .map(|(p, t)| (p, TargetColumn::Name(t)))
                .collect();
            let datasets = harness::load_pretrain_datasets(&cfg, &extra)?;
            let report = harness::run_fmodel_pretrain(&cfg, &datasets, &common.out)?;
            for row in &report.rows {
                println!(
                    "{}: true {} init {:.3} train {:.3} test {:.3}",
                    row.dataset, row.target, row.initial, row.train_pred, row.test_pred
                );
            }
        }
        Command::Surrogate {
            out,
            family,
            seeds,
            seed,
            seed_list,
            episodes,
            steps,
            init_layer,
            train_init,
            train_steps,
            gamma,
            actor_lr,
            critic_lr,
            warmup,
            critic_reset,
            layer_max,
            l_star,
            c,
            b,
            eta,
            epsilon,
            sweep,
        } => {
            let env = match family {
                Family::Monotone => SurrogateEnv::monotone(c, layer_max),
                Family::Unimodal => SurrogateEnv::unimodal(l_star, b, layer_max),
                Family::NoisyUnimodal => {
                    SurrogateEnv::noisy_unimodal(l_star, b, eta, seed, layer_max)
                }
            };
            let scfg = SurrogateRunConfig {
                env,
                rl: RLConfig {
                    epsilon,
                    gamma,
                    actor_lr,
                    critic_lr,
                    actor_warmup_steps: warmup,
                    critic_reset_period: critic_reset,
                    ..RLConfig::default()
                },
                episodes,
                steps_per_episode: steps,
                init_layer,
                train_init,
                train_steps,
                seeds: if seed_list.is_empty() {
                    (seed..seed + seeds as u64).collect()
                } else {
                    seed_list
                },
                init_sweep: sweep,
            };
            let summary = harness::run_surrogate(&scfg, &out)?;
            println!(
                "surrogate: {}/{} seeds reached the argmin; summary in {}",
                summary.successes(),
                summary.results.len(),
                out.display()
            );
        }
        Command::Report { run, out } => {
            let out = out.unwrap_or_else(|| run.join("report"));
            let written = report::emit_report(&run, &out)?;
            println!("wrote {} figure files to {}", written.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
