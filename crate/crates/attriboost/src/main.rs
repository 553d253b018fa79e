use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use attriboost::backend::WorldFile;
use attriboost::commands::{self, default_cache_path};
use attriboost::config::{resolve, RunConfig};
use attriboost::core::synth::SynthWorld;
use attriboost::core::AttrId;
use attriboost::experiment::run_experiment;
use attriboost::journal::JournalCache;
use attriboost::manifest::{load_manifest, load_unlabeled};
use attriboost::model_io::load_model;
use attriboost::{AppError, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Adaptive attribute discovery: boosted yes/no questions answered by an oracle.
///
/// Exit codes: 0 success, 2 configuration error, 3 oracle failure, 4 data error.
#[derive(Parser)]
#[command(name = "attriboost", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Http,
    Scripted,
    Replay,
}

#[derive(Args)]
struct RunOpts {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set k=5` or `--set oracle.temperature=0`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    oracle: Option<OracleKind>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Replay journal: written by http runs, read by replay runs.
    #[arg(long)]
    journal: Option<PathBuf>,
    /// Synthetic world file for the scripted oracle.
    #[arg(long)]
    world: Option<PathBuf>,
}

impl RunOpts {
    /// Resolves the configuration; commands that consume the seed report a drawn one.
    fn resolve(&self, uses_seed: bool) -> Result<RunConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(o) = self.oracle {
            let name = match o {
                OracleKind::Http => "http",
                OracleKind::Scripted => "scripted",
                OracleKind::Replay => "replay",
            };
            overrides.push(format!("oracle.backend={name}"));
        }
        if let Some(p) = self.parallelism {
            overrides.push(format!("oracle.parallelism={p}"));
        }
        for (key, path) in [("journal", &self.journal), ("world", &self.world)] {
            if let Some(p) = path {
                overrides.push(format!("oracle.{key}=\"{}\"", p.display().to_string().replace('\\', "\\\\").replace('"', "\\\"")));
            }
        }
        let r = resolve(self.config.as_deref(), &overrides, self.seed)?;
        if r.seed_drawn && uses_seed {
            eprintln!("attriboost: no seed given, using seed {}", r.config.train.seed);
        }
        Ok(r.config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes model.json, trace.json, ledger.json and cache.jsonl.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Predict labels for a manifest (labels optional).
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Label cache; defaults to cache.jsonl beside the model.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Accuracy, confusion counts and margins on a labeled manifest.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[command(flatten)]
        run: RunOpts,
    },
    /// List the model's stump attributes by descending alpha.
    Attrs {
        #[arg(long)]
        model: PathBuf,
    },
    /// Synthetic worlds and repeated experiments.
    Synth {
        #[command(subcommand)]
        action: SynthAction,
    },
    /// Inspect or compact a label cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Args)]
struct WorldOpts {
    /// Hidden binary dims per instance.
    #[arg(long, default_value_t = 8)]
    dims: usize,
    /// Comma-separated dims of the label rule.
    #[arg(long, default_value = "0,1,2", value_delimiter = ',')]
    rule: Vec<usize>,
    /// Label is +1 when at least this many rule dims are set.
    #[arg(long, default_value_t = 2)]
    threshold: usize,
    /// Answer flip-noise rate in [0, 0.5).
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long = "world-seed", default_value_t = 0)]
    world_seed: u64,
    #[arg(long = "n-train", default_value_t = 200)]
    n_train: usize,
    #[arg(long = "n-test", default_value_t = 200)]
    n_test: usize,
}

impl WorldOpts {
    fn world(&self) -> Result<SynthWorld> {
        SynthWorld::new(self.dims, self.rule.clone(), self.threshold, self.eta, self.world_seed)
            .map_err(|e| AppError::Config(e.to_string()))
    }
}

#[derive(Subcommand)]
enum SynthAction {
    /// Write world.json, train.jsonl and test.jsonl.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        world: WorldOpts,
    },
    /// Run repeated train/test trials and print a report.
    Run {
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        world: WorldOpts,
        #[command(flatten)]
        run: RunOpts,
    },
}

#[derive(Subcommand)]
enum CacheAction {
    Stats {
        #[arg(long)]
        cache: PathBuf,
    },
    /// Rewrite the journal with one line per key.
    Compact {
        #[arg(long)]
        cache: PathBuf,
    },
    Get {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        instance: String,
        #[arg(long)]
        attr: String,
    },
}

fn emit<T: Serialize>(value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(AppError::io(Path::new("<stdout>"), e)),
        _ => Ok(()),
    }
}

fn cache_for(model: &Path, explicit: &Option<PathBuf>) -> PathBuf {
    explicit.clone().unwrap_or_else(|| default_cache_path(model))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { manifest, out, run } => {
            let cfg = run.resolve(true)?;
            let data = load_manifest(&manifest)?;
            emit(&commands::train_run(&data, &cfg, &out)?)
        }
        Command::Predict { model, manifest, cache, run } => {
            let cfg = run.resolve(false)?;
            let m = load_model(&model)?;
            let data = load_unlabeled(&manifest)?;
            emit(&commands::predict_run(&m, &data, &cfg.oracle, &cache_for(&model, &cache))?)
        }
        Command::Eval { model, manifest, cache, run } => {
            let cfg = run.resolve(false)?;
            let m = load_model(&model)?;
            let data = load_manifest(&manifest)?;
            emit(&commands::eval_run(&m, &data, &cfg.oracle, &cache_for(&model, &cache))?)
        }
        Command::Attrs { model } => {
            let m = load_model(&model)?;
            let trace = commands::trace_beside(&model)?;
            emit(&commands::attrs_listing(&m, trace.as_ref()))
        }
        Command::Synth { action: SynthAction::Generate { out, world } } => {
            let wf = WorldFile {
                world: world.world()?,
                sizes: vec![world.n_train, world.n_test],
            };
            emit(&commands::synth_generate(&wf, &out)?)
        }
        Command::Synth { action: SynthAction::Run { trials, out, world, run } } => {
            let cfg = run.resolve(true)?;
            let report = run_experiment(&world.world()?, world.n_train, world.n_test, &cfg.train, trials, cfg.oracle.parallelism)?;
            if let Some(p) = out {
                attriboost::model_io::write_json(&p, &report)?;
            }
            emit(&report)
        }
        Command::Cache { action: CacheAction::Stats { cache } | CacheAction::Compact { cache } } => {
            emit(&commands::cache_stats(&cache)?)
        }
        Command::Cache { action: CacheAction::Get { cache, instance, attr } } => {
            let attr = AttrId::parse(&attr).map_err(|e| AppError::Config(e.to_string()))?;
            emit(&JournalCache::open(&cache)?.entry(&instance, &attr))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("attriboost: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
