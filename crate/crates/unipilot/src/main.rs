//! Command-line front end: train, eval and scenario subcommands.

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use unipilot::agent::DdpgAgent;
use unipilot::config::RunConfig;
use unipilot::env::ProblemVariant;
use unipilot::error::Error;
use unipilot::eval::{
    evaluate, run_scenario, write_details_csv, write_scenario_spline_csv, write_trace_csv, Scenario,
};

/// Training scalar type.
type F = f32;

/// RNG stream ids carved out of one seed.
const STREAM_TASKS: u64 = 1;
const STREAM_EVAL: u64 = 2;

#[derive(Parser)]
#[command(
    name = "unipilot",
    about = "Deep-RL motion planner for unicycle robots: train agents, evaluate them, run multi-goal scenarios",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write its checkpoint and training log.
    Train(TrainArgs),
    /// Evaluate a checkpoint on sampled tasks and write a report.
    Eval(EvalArgs),
    /// Replay a checkpoint through a multi-goal scenario file.
    Scenario(ScenarioArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config file).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Goal dimensions to train: 2d, 3da, 3db, 4d or 'all' (parallel workers).
    #[arg(long)]
    variant: Option<String>,
    /// Episode count (overrides the config file).
    #[arg(long)]
    episodes: Option<u32>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Agent checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Expected variant; fails if the checkpoint was trained differently.
    #[arg(long)]
    variant: Option<String>,
    /// Number of evaluation episodes.
    #[arg(long, default_value_t = 1000)]
    episodes: u32,
}

#[derive(Args)]
struct ScenarioArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Agent checkpoint to drive the robot.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Scenario file (start line plus ordered goal lines).
    scenario: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Scenario(args) => cmd_scenario(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out_dir) = &common.out_dir {
        config.out_dir = out_dir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn parse_variant(text: &str) -> Result<ProblemVariant, Error> {
    text.parse().map_err(Error::Config)
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let mut config = load_config(&args.common)?;
    if let Some(episodes) = args.episodes {
        if episodes < 1 {
            return Err(Error::Config("--episodes must be >= 1".into()));
        }
        config.agent.episodes = episodes;
    }
    let variants: Vec<ProblemVariant> = match args.variant.as_deref() {
        None => vec![config.variant],
        Some("all") => ProblemVariant::ALL.to_vec(),
        Some(v) => vec![parse_variant(v)?],
    };
    if variants.len() == 1 {
        config.variant = variants[0];
        return train_one(&config);
    }
    // independent workers, one per variant, same seed and task stream
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for &variant in &variants {
            let mut worker_config = config.clone();
            worker_config.variant = variant;
            handles.push((variant, scope.spawn(move || train_one(&worker_config))));
        }
        for (variant, handle) in handles {
            handle
                .join()
                .map_err(|_| Error::Invalid(format!("training worker for {variant} panicked")))??;
        }
        Ok(())
    })
}

fn train_one(config: &RunConfig) -> Result<(), Error> {
    let out_dir = config.out_dir.join(config.variant.as_str());
    ensure_dir(&out_dir)?;
    let episode = config.episode_config();
    let mut agent: DdpgAgent<F> = DdpgAgent::new(config.agent, config.seed);
    let mut task_rng = ChaCha8Rng::seed_from_u64(config.seed);
    task_rng.set_stream(STREAM_TASKS);
    log::info!(
        "training {} for {} episodes (seed {})",
        config.variant,
        config.agent.episodes,
        config.seed
    );
    let started = std::time::Instant::now();
    let log = agent.train(&episode, &mut task_rng);
    let elapsed = started.elapsed();
    let checkpoint = out_dir.join("checkpoint.json");
    agent.save_checkpoint(&checkpoint, &episode)?;
    log.write_csv(&out_dir.join("training_log.csv"))?;
    let tail = &log.records[log.records.len().saturating_sub(100)..];
    let tail_success = tail.iter().filter(|r| r.success).count();
    log::info!(
        "{}: trained in {:.0?}, last-100 success {}/{}, checkpoint {}",
        config.variant,
        elapsed,
        tail_success,
        tail.len(),
        checkpoint.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let config = load_config(&args.common)?;
    if args.episodes < 1 {
        return Err(Error::Config("--episodes must be >= 1".into()));
    }
    let (mut agent, episode) = DdpgAgent::<F>::load_checkpoint(&args.checkpoint, config.seed)?;
    if let Some(requested) = args.variant.as_deref() {
        let requested = parse_variant(requested)?;
        if requested != episode.variant {
            return Err(Error::Checkpoint(format!(
                "checkpoint was trained for {}, not {requested}",
                episode.variant
            )));
        }
    }
    let out_dir = config.out_dir.join(episode.variant.as_str());
    ensure_dir(&out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(STREAM_EVAL);
    let (report, details) = evaluate(&mut agent, &episode, args.episodes as usize, &mut rng);
    report.write_csv(&out_dir.join("eval_report.csv"))?;
    write_details_csv(&out_dir.join("eval_episodes.csv"), &details)?;
    print!("{report}");
    Ok(())
}

fn cmd_scenario(args: ScenarioArgs) -> Result<(), Error> {
    let config = load_config(&args.common)?;
    let (mut agent, episode) = DdpgAgent::<F>::load_checkpoint(&args.checkpoint, config.seed)?;
    let scenario = Scenario::read(&args.scenario)?;
    let out_dir = config.out_dir.join(episode.variant.as_str());
    ensure_dir(&out_dir)?;
    let run = run_scenario(&mut agent, &episode, &scenario);
    write_trace_csv(&out_dir.join("scenario_trace.csv"), &run)?;
    write_scenario_spline_csv(&out_dir.join("scenario_spline.csv"), &scenario, &episode.limits)?;
    for leg in &run.legs {
        println!(
            "leg {}: {} in {} steps (final error {:.3})",
            leg.goal_index,
            if leg.reached { "reached" } else { "missed" },
            leg.steps,
            leg.final_error
        );
    }
    println!(
        "scenario {}: trace {} points -> {}",
        if run.completed() { "completed" } else { "incomplete" },
        run.trace.len(),
        out_dir.join("scenario_trace.csv").display()
    );
    Ok(())
}
