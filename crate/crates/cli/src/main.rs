use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "stir-orbits", version, about = "Inverted orbits of random stirring processes")]
struct Cli {
    /// Overrides the seed of the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to STIR_ORBITS_WORKERS, then all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory for results.csv and summary.txt instead of stdout/stderr.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs every experiment of a config file.
    Run { config: PathBuf },
    /// Trivial cases and oracle smoke checks.
    Selftest {
        /// Corrupts the ring store's randomness; the run must fail.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Greedy matching decomposition of an edge list.
    Decompose { edgelist: PathBuf },
}

fn workers(flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    if let Some(w) = flag {
        return Ok(Some(w));
    }
    match std::env::var("STIR_ORBITS_WORKERS") {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("STIR_ORBITS_WORKERS={v} is not a count"))?)),
        Err(_) => Ok(None),
    }
}

fn emit(out: &Option<PathBuf>, csv_name: &str, csv: &str, summary: &str) -> anyhow::Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            std::fs::write(dir.join(csv_name), csv)?;
            std::fs::write(dir.join("summary.txt"), summary)?;
            eprint!("{summary}");
        }
        None => {
            print!("{csv}");
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<stir_orbits::RunError>().map_or(2, |r| r.exit_code());
            ExitCode::from(code as u8)
        }
    }
}

fn real_main(cli: Cli) -> anyhow::Result<i32> {
    if let Some(w) = workers(cli.workers)? {
        rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global()?;
    }
    match cli.command {
        Command::Run { config } => {
            let outcome = stir_orbits::load_and_run(&config, cli.seed)?;
            emit(&cli.out, "results.csv", &outcome.csv, &outcome.summary)?;
            Ok(outcome.exit_code())
        }
        Command::Selftest { inject_fault } => {
            let mut failed = None;
            let mut report = String::new();
            for c in stir_orbits::selftest::run(inject_fault) {
                match &c.result {
                    Ok(()) => report.push_str(&format!("ok    {}\n", c.name)),
                    Err(msg) => {
                        report.push_str(&format!("FAIL  {}: {msg}\n", c.name));
                        failed.get_or_insert(c.name);
                    }
                }
            }
            print!("{report}");
            if let Some(name) = failed {
                eprintln!("selftest failed: {name}");
                return Ok(1);
            }
            Ok(0)
        }
        Command::Decompose { edgelist } => {
            let text = std::fs::read_to_string(&edgelist).map_err(|e| stir_orbits::RunError::Io(format!("{}: {e}", edgelist.display())))?;
            let (csv, lines) = stir_orbits::decompose_csv(&text)?;
            emit(&cli.out, "decomposition.csv", &csv, &(lines.join("\n") + "\n"))?;
            Ok(0)
        }
    }
}
