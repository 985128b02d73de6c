use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use genforge_core::campaign::{self, *};
use genforge_core::dataset::FEATURE_NAMES;

/// Generative inverse design with a conditional VAE, compared against a surrogate-based
/// optimization baseline.
#[derive(Debug, Parser)]
#[command(name = "genforge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Campaign configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Master seed; overrides the config file.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Artifact directory; overrides the config file.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the dataset and fit the standardizer, bounds and target condition.
    Ingest(Common),
    /// Train the MLP performance oracle.
    TrainSurrogate(Common),
    /// Run the linear-surrogate optimization baseline.
    Sbo(Common),
    /// Train the conditional VAE.
    TrainCvae(Common),
    /// Generate the design portfolio at the target condition.
    Generate(Common),
    /// Check validity and score designs with the oracle.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Evaluate this design table instead of the generated portfolio.
        #[arg(long, value_name = "PATH")]
        designs: Option<PathBuf>,
    },
    /// Assemble the campaign report from the stage artifacts.
    Report {
        #[command(flatten)]
        common: Common,
        /// Recompute every summary from the per-design table and fail on mismatch.
        #[arg(long)]
        verify: bool,
    },
    /// Append the oracle's predicted level to each row of a design table.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        designs: PathBuf,
    },
    /// Run every stage in order.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        verify: bool,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Stage(anyhow::Error),
}

impl From<CampaignError> for Failure {
    fn from(e: CampaignError) -> Self {
        match e {
            CampaignError::Config(_) => Failure::Usage(e.into()),
            _ => Failure::Stage(e.into()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(common: &Common) -> Result<(CampaignConfig, ArtifactStore), Failure> {
    let mut config = CampaignConfig::from_file(&common.config)
        .map_err(|e| Failure::Usage(anyhow::Error::new(e)))?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    config
        .validate()
        .map_err(|e| Failure::Usage(anyhow::Error::new(e).context("invalid configuration")))?;
    let store = ArtifactStore::new(&config.out_dir);
    Ok((config, store))
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ingest(c) => {
            let (config, store) = load_config(&c)?;
            let (_, ing) = campaign::ingest(&config)?;
            store.save_ingest(&ing)?;
            println!(
                "ingested {} records; target condition {:.3} dB (percentile {})",
                ing.dataset.records, ing.target_condition_db, ing.target_percentile
            );
        }
        Command::TrainSurrogate(c) => {
            let (config, store) = load_config(&c)?;
            let stage = Stage::TrainSurrogate;
            let ing = store.load_ingest(stage)?;
            let ds = reload_dataset(&config, &ing, stage)?;
            let oracle = train_surrogate(&config, &ds, &ing)?;
            store.save_oracle(&oracle)?;
            println!(
                "oracle trained: R2 {:.4}, RMSE {:.3} dB",
                oracle.oracle.fit.r2, oracle.oracle.fit.rmse
            );
        }
        Command::Sbo(c) => {
            let (config, store) = load_config(&c)?;
            let stage = Stage::Sbo;
            let ing = store.load_ingest(stage)?;
            let oracle = store.load_oracle(stage)?;
            let ds = reload_dataset(&config, &ing, stage)?;
            let result = sbo(&config, &ds, &ing, &oracle)?;
            store.save_sbo(&result)?;
            let r = &result.result;
            println!(
                "sbo: best row {} true {:.3} dB, predicted {:.3} dB after {} evaluations",
                r.best_index,
                r.best_true_value,
                result.predicted_score,
                r.evaluation_trace.len()
            );
        }
        Command::TrainCvae(c) => {
            let (config, store) = load_config(&c)?;
            let stage = Stage::TrainCvae;
            let ing = store.load_ingest(stage)?;
            let ds = reload_dataset(&config, &ing, stage)?;
            let ckpt = train_cvae(&config, &ds, &ing)?;
            store.save_cvae(&ckpt)?;
            if let Some(last) = ckpt.loss_trace.last() {
                println!(
                    "cvae trained: final loss {:.4} (reconstruction {:.4}, KL {:.4})",
                    last.total, last.reconstruction, last.kl_divergence
                );
            }
        }
        Command::Generate(c) => {
            let (config, store) = load_config(&c)?;
            let stage = Stage::Generate;
            let ckpt = store.load_cvae(stage)?;
            let ing = store.load_ingest(stage)?;
            let portfolio = generate(&config, &ing, &ckpt)?;
            store.save_portfolio(&portfolio)?;
            println!(
                "generated {} designs at {:.3} dB -> {}",
                portfolio.designs.len(),
                portfolio.condition_db,
                store.path(ArtifactStore::PORTFOLIO).display()
            );
        }
        Command::Evaluate { common, designs } => {
            let (_, store) = load_config(&common)?;
            let stage = Stage::Evaluate;
            let ing = store.load_ingest(stage)?;
            let oracle = store.load_oracle(stage)?;
            let rows = match &designs {
                Some(path) => {
                    let (designs, _) = read_design_table(path)
                        .with_context(|| format!("reading {}", path.display()))
                        .map_err(Failure::Stage)?;
                    evaluate(&ing.bounds, &oracle, &designs)?
                }
                None => {
                    let portfolio = store.load_portfolio(stage)?;
                    let rows = evaluate(&ing.bounds, &oracle, &portfolio.designs)?;
                    store.save_evaluation(&rows)?;
                    rows
                }
            };
            print_rows(&rows).map_err(|e| Failure::Stage(e.into()))?;
        }
        Command::Report { common, verify } => {
            let (config, store) = load_config(&common)?;
            let stage = Stage::Report;
            let ing = store.load_ingest(stage)?;
            let oracle = store.load_oracle(stage)?;
            let baseline = store.load_sbo(stage)?;
            let rows = store.load_evaluation(stage, &ing.bounds)?;
            let report = build_report(&config, &ing, &oracle, &baseline, rows)?;
            finish_report(&store, &report, verify)?;
        }
        Command::Score { common, designs } => {
            let (_, store) = load_config(&common)?;
            let oracle = store.load_oracle(Stage::Evaluate)?;
            score(&oracle, &designs).map_err(Failure::Stage)?;
        }
        Command::Run { common, verify } => {
            let (config, store) = load_config(&common)?;
            let report = run_campaign_with_store(&config, &store)?;
            finish_report(&store, &report, verify)?;
        }
    }
    Ok(())
}

fn finish_report(
    store: &ArtifactStore,
    report: &CampaignReport,
    verify: bool,
) -> Result<(), Failure> {
    store.save_report(report)?;
    if verify {
        report
            .verify()
            .map_err(|m| Failure::Stage(anyhow::anyhow!("report verification failed: {m}")))?;
    }
    print!("{}", report.summary());
    if verify {
        println!("report verified");
    }
    Ok(())
}

fn print_rows(rows: &[DesignRow]) -> io::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "# {}\tvalid\tviolations\tpredicted_db",
        FEATURE_NAMES.join("\t")
    )?;
    for r in rows {
        let x: Vec<String> = r.x.iter().map(f64::to_string).collect();
        let violations = if r.violations.is_empty() {
            "-".to_string()
        } else {
            let names: Vec<&str> = r.violations.iter().map(|&j| FEATURE_NAMES[j]).collect();
            names.join(",")
        };
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            x.join("\t"),
            u8::from(r.valid),
            violations,
            r.predicted_db
        )?;
    }
    Ok(())
}

fn score(oracle: &OracleArtifact, path: &Path) -> anyhow::Result<()> {
    check_oracle(oracle, Stage::Evaluate)?;
    let (designs, conditions) =
        read_design_table(path).with_context(|| format!("reading {}", path.display()))?;
    let predicted = oracle.oracle.predict(&designs)?;
    let mut out = io::stdout().lock();
    for ((x, c), p) in designs.iter().zip(conditions).zip(predicted) {
        let mut cells: Vec<String> = x.iter().map(f64::to_string).collect();
        cells.extend(c.map(|c| c.to_string()));
        cells.push(p.to_string());
        writeln!(out, "{}", cells.join("\t"))?;
    }
    Ok(())
}
