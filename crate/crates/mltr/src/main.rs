use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mltr::config::{Arm, ExperimentConfig};
use mltr::error::exit;
use mltr::experiment::{self, SweepReport};
use mltr::{data, report, AppError, Result};
use mltr_core::dataset::corpus_stats;

#[derive(Parser)]
#[command(name = "mltr", version, about = "Meta learning-to-rank experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured arms and write checkpoints.
    Train(RunArgs),
    /// Fine-tune and evaluate checkpoints written by `train`.
    Evaluate(RunArgs),
    /// Train and evaluate the full train x tuning profile grid.
    Sweep(RunArgs),
    /// Print corpus statistics.
    InspectData(InspectArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a single seed (overrides `seeds`).
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated arms (overrides `arms`).
    #[arg(long, value_delimiter = ',')]
    arms: Option<Vec<Arm>>,
}

#[derive(Args)]
struct InspectArgs {
    /// LETOR file or directory.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    data: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    expected_dims: Option<usize>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(arms) = &args.arms {
        cfg.arms = arms.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(format!("creating {}", dir.display()), e))
}

fn write_report(cfg: &ExperimentConfig, r: &SweepReport) -> Result<()> {
    let dir = &cfg.output.dir;
    report::emit_results(&r.rows, dir)?;
    report::emit_significance(&r.significance, dir)?;
    report::emit_relative(&r.relative, dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(|e| AppError::io("writing config.toml", e))?;
    for row in &r.rows {
        println!(
            "{:<17} {:<6} {:<6} seed {:<4} NDCG@1 {:.4}  @5 {:.4}  @10 {:.4}  skipped {}",
            row.arm, row.train_profile, row.tuning_profile, row.seed, row.ndcg1, row.ndcg5, row.ndcg10, row.skipped
        );
    }
    for s in &r.significance {
        println!(
            "{} vs {} on {}/{}: mean diff {:+.4}, p = {:.3e}{}",
            s.arm,
            s.baseline,
            s.train_profile,
            s.tuning_profile,
            s.mean_difference,
            s.p_value,
            if s.significant { " (significant at 0.01)" } else { "" }
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = load_config(&args)?;
            let corpus = data::load_corpus(&cfg)?;
            let (train_profiles, _) = cfg.grid();
            let models = experiment::train_all(&cfg, &corpus, &train_profiles)?;
            prepare_out(&cfg.output.dir)?;
            experiment::save_models(&models, &cfg.output.dir.join("checkpoints"))?;
            println!("wrote {} checkpoints to {}", models.len(), cfg.output.dir.join("checkpoints").display());
        }
        Command::Evaluate(args) => {
            let cfg = load_config(&args)?;
            let corpus = data::load_corpus(&cfg)?;
            let (train_profiles, tuning_profiles) = cfg.grid();
            let models = experiment::load_models(&cfg, &cfg.output.dir.join("checkpoints"), &train_profiles)?;
            let r = experiment::evaluate_all(&cfg, &corpus, &models, &train_profiles, &tuning_profiles)?;
            write_report(&cfg, &r)?;
        }
        Command::Sweep(args) => {
            let cfg = load_config(&args)?;
            let corpus = data::load_corpus(&cfg)?;
            let (models, r) = experiment::run_sweep(&cfg, &corpus)?;
            prepare_out(&cfg.output.dir)?;
            if cfg.output.checkpoints {
                experiment::save_models(&models, &cfg.output.dir.join("checkpoints"))?;
            }
            write_report(&cfg, &r)?;
        }
        Command::InspectData(args) => {
            let ds = match (&args.data, &args.config) {
                (Some(p), _) => data::read_corpus(p, args.expected_dims)?,
                (None, Some(c)) => {
                    let mut cfg = ExperimentConfig::load(c)?;
                    cfg.data.normalize = false;
                    data::load_corpus(&cfg)?
                }
                (None, None) => unreachable!("clap requires one of --data / --config"),
            };
            let s = corpus_stats(&ds);
            if args.json {
                let v = serde_json::json!({
                    "name": ds.name,
                    "queries": s.queries,
                    "items": s.items,
                    "pairs": s.pairs,
                    "positives": s.positives,
                    "positive_rate": s.positive_rate(),
                    "features": s.feature_dims,
                    "min_grade": s.min_grade,
                    "max_grade": s.max_grade,
                });
                println!("{v}");
            } else {
                println!("dataset        {}", ds.name);
                println!("queries        {}", s.queries);
                match s.items {
                    Some(n) => println!("items          {n}"),
                    None => println!("items          unknown (documents lack ids)"),
                }
                println!("query-doc      {}", s.pairs);
                println!("positives      {} ({:.2}%)", s.positives, 100.0 * s.positive_rate());
                println!("features       {}", s.feature_dims);
                println!("ratings        {}-{}", s.min_grade, s.max_grade);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
