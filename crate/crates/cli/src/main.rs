use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use zsltl_cli::commands::{self, CompileArgs, ControllerKind, TraceArgs};
use zsltl_cli::config::RunConfig;
use zsltl_cli::CliError;

/// Compile LTL specifications, train a subgoal-conditioned policy and run it
/// on unseen specifications.
///
/// Exit codes: 0 ok, 2 specification error, 3 non-finite training value,
/// 4 config error, 1 anything else. The root seed comes from the config,
/// then GENZ_SEED, then --seed.
#[derive(Parser, Debug)]
#[command(name = "zsltl", version)]
struct Cli {
    /// JSON run config (env, trainer, eval, paths, seed).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel rollout workers (train) or specification workers (eval).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ControllerArg {
    Agent,
    Greedy,
}

impl From<ControllerArg> for ControllerKind {
    fn from(c: ControllerArg) -> Self {
        match c {
            ControllerArg::Agent => ControllerKind::Agent,
            ControllerArg::Greedy => ControllerKind::Greedy,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Compile a specification to a Büchi automaton.
    Compile {
        /// Formula, or a file containing one.
        spec: String,
        /// Alphabet to compile over when the config has no environment.
        #[arg(long, value_delimiter = ',')]
        props: Vec<String>,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// List reach-avoid subgoals for a set of automaton states.
    InspectSubgoals {
        spec: String,
        #[arg(long, value_delimiter = ',')]
        props: Vec<String>,
        /// Tracked states (default: the initial state).
        #[arg(long, value_delimiter = ',')]
        states: Option<Vec<usize>>,
        /// Treat each state on its own instead of as one tracked set.
        #[arg(long)]
        each: bool,
    },
    /// Train the policy, value and multiplier networks.
    Train {
        /// Total environment interactions.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Training log (JSONL).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluate specifications and write a metrics report.
    Eval {
        /// Formula or file; repeatable, replaces the config's list.
        #[arg(long)]
        spec: Vec<String>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Episodes per seed.
        #[arg(long)]
        n: Option<usize>,
        /// Number of evaluation seeds.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        horizon_mult: Option<usize>,
        #[arg(long)]
        eps_scale: Option<f64>,
        #[arg(long)]
        no_switching: bool,
        #[arg(long, value_enum, default_value = "agent")]
        controller: ControllerArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Record per-step trajectories, optionally rendered as SVG.
    Trace {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        #[arg(long)]
        horizon_mult: Option<usize>,
        #[arg(long)]
        no_switching: bool,
        #[arg(long, value_enum, default_value = "agent")]
        controller: ControllerArg,
        /// Trajectory log (JSONL).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let workers = cli.workers.unwrap_or(1);
    if workers == 0 {
        return Err(CliError::Config("--workers must be positive".into()));
    }
    match cli.cmd {
        Cmd::Compile { spec, props, dot, json } => commands::cmd_compile(&cfg, &CompileArgs { spec, props, dot, json }),
        Cmd::InspectSubgoals { spec, props, states, each } => commands::cmd_inspect_subgoals(&cfg, &spec, &props, states.as_deref(), each),
        Cmd::Train {
            steps,
            checkpoint,
            log,
            quiet,
        } => {
            if let Some(s) = steps {
                cfg.trainer.total_interactions = s;
            }
            if let Some(w) = cli.workers {
                cfg.trainer.workers = w;
            }
            if let Some(p) = checkpoint {
                cfg.paths.checkpoint = p;
            }
            if let Some(p) = log {
                cfg.paths.train_log = p;
            }
            commands::cmd_train(&cfg, quiet)
        }
        Cmd::Eval {
            spec,
            checkpoint,
            n,
            seeds,
            horizon_mult,
            eps_scale,
            no_switching,
            controller,
            out,
        } => {
            if !spec.is_empty() {
                cfg.eval.specs = spec;
            }
            if let Some(p) = checkpoint {
                cfg.paths.checkpoint = p;
            }
            if let Some(n) = n {
                cfg.eval.episodes = n;
            }
            if let Some(s) = seeds {
                cfg.eval.seeds = s;
            }
            if let Some(h) = horizon_mult {
                cfg.eval.horizon_multiplier = h;
            }
            if let Some(e) = eps_scale {
                cfg.eval.eps_scale = e;
            }
            if no_switching {
                cfg.eval.switching = false;
            }
            if let Some(p) = out {
                cfg.paths.report = p;
            }
            commands::cmd_eval(&cfg, controller.into(), workers)
        }
        Cmd::Trace {
            spec,
            checkpoint,
            episodes,
            horizon_mult,
            no_switching,
            controller,
            out,
            svg,
        } => {
            if let Some(p) = checkpoint {
                cfg.paths.checkpoint = p;
            }
            if let Some(h) = horizon_mult {
                cfg.eval.horizon_multiplier = h;
            }
            if no_switching {
                cfg.eval.switching = false;
            }
            if let Some(p) = out {
                cfg.paths.trace = p;
            }
            commands::cmd_trace(&cfg, controller.into(), &TraceArgs { spec, episodes, svg })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("zsltl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
