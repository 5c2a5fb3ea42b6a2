use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tvvar::io::{RunConfig, WindowSpec};
use tvvar::Result;
use tvvar_cli::{
    cmd_evaluate, cmd_fit, cmd_simulate, cmd_summarize, mean_defined, replicate_study, Overrides,
};

#[derive(Parser)]
#[command(name = "tvvar", version, about = "Time-varying tensor VAR: simulate, fit, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset with its generating truth.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Study design (1 or 2).
        #[arg(long)]
        study: Option<u8>,
    },
    /// Run the Gibbs sampler and write a fit archive.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score a fit archive against truth files.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fit: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Window-averaged coefficient matrices and their differences.
    Summarize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fit: Option<PathBuf>,
        /// Inclusive 1-based window `start:end`; repeat for several.
        #[arg(long = "window", required = true)]
        windows: Vec<WindowSpec>,
    },
    /// Replicated simulation study 1.
    ReplicateStudy1 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Replicated simulation study 2.
    ReplicateStudy2 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicates: Option<usize>,
    },
}

fn load(common: &Common, extra: Overrides) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Overrides {
        seed: common.seed,
        out: common.out.clone(),
        chains: common.chains,
        threads: common.threads,
        ..extra
    }
    .apply(&mut cfg);
    Ok(cfg)
}

fn replicate(common: &Common, replicates: Option<usize>, study: u8) -> Result<()> {
    let mut cfg = load(common, Overrides::default())?;
    if let Some(r) = replicates {
        cfg.simulate.replicates = r;
    }
    let reps = replicate_study(&cfg, study)?;
    let n = reps.len() as f64;
    let err = reps.iter().map(|r| r.report.err_a).sum::<f64>() / n;
    let (acc, _) = mean_defined(reps.iter().map(|r| r.report.gamma.accuracy));
    println!(
        "{} replicates: mean coefficient error {err:.4}, mean gamma accuracy {}",
        reps.len(),
        acc.map_or("NA".into(), |a| format!("{a:.4}"))
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, study } => {
            let mut cfg = load(&common, Overrides::default())?;
            if let Some(s) = study {
                cfg.simulate.study = s;
            }
            let out = cmd_simulate(&cfg)?;
            println!("wrote {}", out.display());
        }
        Command::Fit { common, data } => {
            let cfg = load(&common, Overrides { data, ..Default::default() })?;
            let fit = cmd_fit(&cfg)?;
            println!("stored {} draws", fit.draws.len());
        }
        Command::Evaluate { common, fit, truth } => {
            let cfg = load(&common, Overrides { fit, truth, ..Default::default() })?;
            let r = cmd_evaluate(&cfg)?;
            println!("coefficient error {:.6}", r.err_a);
        }
        Command::Summarize { common, fit, windows } => {
            let cfg = load(&common, Overrides { fit, ..Default::default() })?;
            cmd_summarize(&cfg, &windows)?;
        }
        Command::ReplicateStudy1 { common, replicates } => replicate(&common, replicates, 1)?,
        Command::ReplicateStudy2 { common, replicates } => replicate(&common, replicates, 2)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
