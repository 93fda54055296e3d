use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use cardattack_cli::commands::{cmd_attack, cmd_axioms, cmd_baseline, cmd_verify_pools};
use cardattack_cli::config::ExperimentConfig;
use cardattack_cli::output::RunRecord;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cardattack", version, about = "Adaptive attacks on cardinality sketches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the adaptive attack for `trials` independent sessions.
    Attack(Common),
    /// Run the determining-pool and termination checks.
    VerifyPools(Common),
    /// Run the same responder on non-adaptive queries.
    Baseline(Common),
    /// Exhaustively check the composable-map axioms on small universes.
    Axioms {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_max: Option<u32>,
        /// Include the broken-compose fixture, which must fail.
        #[arg(long)]
        mutation: bool,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<u32>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        cfg.check()?;
        Ok(cfg)
    }
}

fn print_run(record: &RunRecord) {
    for t in &record.trials {
        let eta = t.eta.map(|e| format!(" eta={e:.4}")).unwrap_or_default();
        println!(
            "trial {}: rounds={} errors={} fraction={:.4} mask={} pool={}{eta} ({:.1}s)",
            t.trial, t.rounds, t.errors, t.error_fraction, t.final_mask_size, t.pool_size, t.runtime_secs
        );
    }
    for (t, msg) in &record.failures {
        println!("trial {t}: FAILED {msg}");
    }
    let a = &record.aggregate;
    println!(
        "{} {}: median error fraction {:.4} over {} trials, config {}",
        record.command,
        record.scenario,
        a.median_error_fraction,
        a.trials,
        &record.config_hash[..12]
    );
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Attack(c) => {
            let cfg = c.load()?;
            let (record, ok) = cmd_attack(&cfg, Some(&cfg.output.dir))?;
            print_run(&record);
            Ok(ok)
        }
        Command::Baseline(c) => {
            let cfg = c.load()?;
            let (record, ok) = cmd_baseline(&cfg, Some(&cfg.output.dir))?;
            print_run(&record);
            Ok(ok)
        }
        Command::VerifyPools(c) => {
            let cfg = c.load()?;
            let (report, ok) = cmd_verify_pools(&cfg, Some(&cfg.output.dir))?;
            println!(
                "pool: {} keys (cap {}{})",
                report.pool_size,
                report.size_cap,
                if report.size_ok { "" } else { ", EXCEEDED" }
            );
            for c in &report.cells {
                println!(
                    "|M|={:<4} q={:.3} failure={:.4} limit={:.4} {}",
                    c.mask_size,
                    c.q,
                    c.rate,
                    c.limit,
                    if c.pass { "ok" } else { "VIOLATION" }
                );
            }
            for t in &report.termination {
                println!(
                    "termination ell={} q={:.3} open={:.4} limit={:.4} {}",
                    t.ell,
                    t.q,
                    t.rate,
                    t.limit,
                    if t.pass { "ok" } else { "VIOLATION" }
                );
            }
            Ok(ok)
        }
        Command::Axioms { common, n_max, mutation } => {
            let mut cfg = common.load()?;
            if let Some(n) = n_max {
                cfg.axioms.n_max = n;
            }
            cfg.axioms.include_mutation |= mutation;
            let (lines, ok) = cmd_axioms(&cfg, Some(&cfg.output.dir))?;
            for l in &lines {
                match &l.failure {
                    None => println!("{:<24} n={} sketches={} ok", l.family, l.n, l.distinct_sketches),
                    Some(f) => println!("{:<24} n={} FAILED {f}", l.family, l.n),
                }
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
