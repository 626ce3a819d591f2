use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use auxsel_cli::config::RunConfig;
use auxsel_cli::pipeline::Pipeline;
use auxsel_cli::report;

/// Auxiliary-task subset selection: transfer estimation, candidate search,
/// and multi-bandit best-arm identification.
#[derive(Parser)]
#[command(name = "auxsel", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's stage-1 worker count (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the base-case scenarios and build the transfer graphs.
    Stage1(CommonArgs),
    /// Generate candidate auxiliary sets from previously built graphs.
    Stage2(CommonArgs),
    /// Play the multi-bandit over previously generated candidates.
    Stage3(CommonArgs),
    /// Compute exact ground truth (synthetic and table environments only).
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        /// Candidate file for candidate-list mode; omitting it enumerates
        /// the full power set (small instances only).
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Recommendations file to score (emits a regret summary).
        #[arg(long)]
        recommendations: Option<PathBuf>,
        /// Also enumerate the power-set best subset per task.
        #[arg(long)]
        power_set: bool,
    },
    /// Run every stage in sequence.
    RunAll(CommonArgs),
}

fn pipeline_for(common: &CommonArgs) -> Result<Pipeline> {
    let (mut config, base_dir) = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    if let Some(workers) = common.workers {
        config.workers = workers;
    }
    Pipeline::new(config, base_dir)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Stage1(common) => {
            let p = pipeline_for(common)?;
            let env = p.build_env()?;
            let (samples, _graphs) = p.stage1(&env)?;
            println!(
                "stage1: {} base-case sets x {} splits -> 12 graphs in {}",
                samples.sets().len(),
                samples.n_splits(),
                report::graphs_dir(&p.out_dir).display()
            );
        }
        Command::Stage2(common) => {
            let p = pipeline_for(common)?;
            let graphs = p.load_graphs()?;
            let outcome = p.stage2(&graphs)?;
            println!(
                "stage2: {} raw generations -> {} unique candidates",
                outcome.raw_generated,
                outcome.candidates.len()
            );
        }
        Command::Stage3(common) => {
            let p = pipeline_for(common)?;
            let env = p.build_env()?;
            let outcome = p.load_candidates()?;
            p.stage3(&env, &outcome)?;
            println!(
                "stage3: finished {} rounds; recommendations in {}",
                p.config.budget,
                p.out_dir.join(report::RECOMMENDATIONS_JSON).display()
            );
        }
        Command::Oracle {
            common,
            candidates,
            recommendations,
            power_set,
        } => {
            let p = pipeline_for(common)?;
            let env = p.build_env()?;
            let outcome = match candidates {
                Some(path) => Some(report::read_json(path)?),
                None => None,
            };
            let report_out = p.oracle(
                &env,
                outcome.as_ref(),
                recommendations.as_deref(),
                *power_set,
            )?;
            println!(
                "oracle: best arms for {} bandits in {}",
                report_out.bandits.len(),
                p.out_dir.join(report::ORACLE_FILE).display()
            );
        }
        Command::RunAll(common) => {
            let p = pipeline_for(common)?;
            p.run_all()?;
            println!("run-all: artifacts in {}", p.out_dir.display());
        }
    }
    Ok(())
}
