use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use fdzf::{load_config, write_results, ResultTable, SimError, SimulationConfig};

#[derive(Parser)]
#[command(name = "fdzf", version, about = "ZF precoding and Neumann-series experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for the CSV file.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Error-magnitude CDFs of the series inverse over antenna counts.
    NsAccuracy,
    /// Expected per-UE SNR against operating SNR.
    SnrSweep,
    /// Ergodic sum spectral efficiency against operating SNR.
    SeSweep,
    /// Monte-Carlo check of the moment identities.
    Oracle,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::NsAccuracy => "ns_accuracy",
            Command::SnrSweep => "snr_sweep",
            Command::SeSweep => "se_sweep",
            Command::Oracle => "oracle",
        }
    }
}

fn summarize(command: Command, table: &ResultTable) {
    match command {
        Command::NsAccuracy => {
            for (i, col) in table.columns().iter().enumerate().skip(1) {
                if col.starts_with("abs_alpha") {
                    let rows = table.rows();
                    let median = rows[rows.len() / 2][i].as_f64().unwrap_or(f64::NAN);
                    println!("  {col}: median {median:.4e}");
                }
            }
        }
        Command::SnrSweep | Command::SeSweep => {
            let gap = if matches!(command, Command::SnrSweep) { "gap_db" } else { "rel_gap" };
            let worst = table.column_f64(gap).unwrap_or_default().into_iter().map(f64::abs).fold(0.0, f64::max);
            println!("  {} rows, largest |{gap}| {worst:.4}", table.rows().len());
        }
        Command::Oracle => {
            let z = table.column_f64("z_score").unwrap_or_default();
            let names: Vec<&str> = table.column("quantity").map(|c| c.filter_map(|v| v.as_str()).collect()).unwrap_or_default();
            for q in ["mean_gram", "fourth_moment", "norm_fourth", "trace_cancellation"] {
                let worst = names.iter().zip(&z).filter(|(n, _)| **n == q).map(|(_, z)| z.abs()).fold(0.0, f64::max);
                println!("  {q}: max |z| {worst:.2}");
            }
            if let Some(g) = table.meta("laplace_relative_gap") {
                println!("  trace-inverse relative gap {g}");
            }
        }
    }
}

fn run(cli: &Cli) -> Result<PathBuf, SimError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => SimulationConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .expect("thread pool");
    println!("{}: seed {}, config {}", cli.command.name(), cfg.seed, &cfg.hash()[..12]);
    let start = Instant::now();
    let table = pool.install(|| match cli.command {
        Command::NsAccuracy => fdzf::run_ns_accuracy(&cfg),
        Command::SnrSweep => fdzf::run_snr_sweep(&cfg),
        Command::SeSweep => fdzf::run_se_sweep(&cfg),
        Command::Oracle => fdzf::run_oracle(&cfg),
    })?;
    summarize(cli.command, &table);
    std::fs::create_dir_all(&cli.out).map_err(|source| fdzf::TableError::Io {
        path: cli.out.clone(),
        source,
    })?;
    let path = cli.out.join(format!("{}.csv", cli.command.name()));
    write_results(&table, &path)?;
    println!("  done in {:.1} s", start.elapsed().as_secs_f64());
    Ok(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(path) => {
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
