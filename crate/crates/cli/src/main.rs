use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flowrl::harness;
use flowrl::{Error, Variant};

#[derive(Parser)]
#[command(name = "flowrl", version, about = "Pretrain and RL fine-tune toy rectified-flow generators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Flow-matching pretraining; writes pretrain_loss.csv and pretrained.ckpt.
    Pretrain { config: PathBuf },
    /// RL fine-tuning from the pretrained checkpoint.
    Train {
        config: PathBuf,
        /// flow_grpo, flow_spo, spo_fr or superflow (default: the config's).
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Run every (variant, seed) cell from one shared pretrained model.
    Compare {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        variants: Vec<Variant>,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
    },
    /// Recompute summaries from the CSV logs below a directory.
    Report { dir: PathBuf },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Pretrain { config } => {
            let a = harness::cmd_pretrain(&config)?;
            println!("checkpoint: {}", a.checkpoint.display());
        }
        Command::Train { config, variant } => {
            let a = harness::cmd_train(&config, variant)?;
            if let Some(s) = &a.summary {
                println!(
                    "{} seed {}: eval {:.4} -> {:.4}, rollouts to {}: {}, late drawdown {:.3}",
                    s.variant,
                    s.seed,
                    s.baseline_eval,
                    s.final_eval,
                    s.reward_threshold,
                    s.rollouts_to_threshold.map(|r| r.to_string()).unwrap_or_else(|| "never".into()),
                    s.max_late_drawdown
                );
            }
            println!("logs: {}", a.dir.display());
        }
        Command::Compare { config, variants, seeds } => {
            let report = harness::cmd_compare(&config, &variants, &seeds)?;
            for c in &report.cells {
                match &c.outcome {
                    Ok(s) => println!("{} seed {}: final eval {:.4}", c.variant, c.seed, s.final_eval),
                    Err(e) => println!("{} seed {}: FAILED {e}", c.variant, c.seed),
                }
            }
            println!("compare outputs: {}", report.dir.display());
        }
        Command::Report { dir } => {
            println!("run,variant,seed,final_eval,rollouts_to_threshold,max_late_drawdown,summary_check");
            for e in harness::report(&dir)? {
                let s = &e.recomputed;
                let check = match e.matches_stored {
                    Some(true) => "match",
                    Some(false) => "MISMATCH",
                    None => "no-summary",
                };
                println!(
                    "{},{},{},{},{},{},{}",
                    e.run_dir.display(),
                    s.variant,
                    s.seed,
                    s.final_eval,
                    s.rollouts_to_threshold.map(|r| r.to_string()).unwrap_or_default(),
                    s.max_late_drawdown,
                    check
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
