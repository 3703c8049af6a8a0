mod settings;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use poolal_core::harness::{compare_strategies, export_curve, CurveFormat, Experiment};
use poolal_service::SessionStore;

use settings::Settings;

#[derive(Parser)]
#[command(name = "poolal", version, about = "Pool-based active learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its learning curve
    Run {
        #[command(flatten)]
        settings: Settings,
        /// Write the curve here (`.json` for JSON, otherwise CSV)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write each round's per-candidate scores to DIR/round_<t>.csv
        #[arg(long, value_name = "DIR")]
        scores_dir: Option<PathBuf>,
        /// Save the final classifier as a JSON checkpoint
        #[arg(long, value_name = "FILE")]
        save_model: Option<PathBuf>,
    },
    /// Run several strategies over several seeds and summarize
    Compare {
        #[command(flatten)]
        settings: Settings,
        /// Comma-separated strategy names, or `all`
        /// [default: random,least_confidence,margin,entropy]
        #[arg(long)]
        strategies: Option<String>,
        /// Seeds such as `0-9` or `1,5,7` [default: 0-9]
        #[arg(long)]
        seeds: Option<String>,
        /// Write the per-round summary as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the labeling HTTP API
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Save sessions here at round boundaries and reload them on start
        #[arg(long, value_name = "DIR")]
        snapshot_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            settings,
            out,
            scores_dir,
            save_model,
        } => {
            let settings = settings.resolve()?;
            run(
                &settings,
                out.or(settings.out.clone()),
                scores_dir.or(settings.scores_dir.clone()),
                save_model,
            )
        }
        Command::Compare {
            settings,
            strategies,
            seeds,
            out,
        } => {
            let mut settings = settings.resolve()?;
            settings.strategies = strategies.or(settings.strategies);
            settings.seeds = seeds.or(settings.seeds);
            compare(&settings, out.or(settings.out.clone()))
        }
        Command::Serve {
            host,
            port,
            snapshot_dir,
        } => serve(SocketAddr::new(host, port), snapshot_dir),
    }
}

fn run(
    settings: &Settings,
    out: Option<PathBuf>,
    scores_dir: Option<PathBuf>,
    save_model: Option<PathBuf>,
) -> Result<()> {
    let config = settings.experiment()?;
    if let Some(dir) = &scores_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut exp = Experiment::start(config)?;
    println!("round  n_labeled  accuracy");
    print_last(&exp);
    while !exp.is_done() {
        let query = exp.query()?;
        if let Some(dir) = &scores_dir {
            let path = dir.join(format!("round_{}.csv", exp.round() + 1));
            query.write_diagnostics_csv(&path)?;
        }
        exp.complete_round(query.selected, None)?;
        print_last(&exp);
    }
    if let Some(path) = &out {
        export_curve(exp.records(), path, CurveFormat::from_path(path))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(path) = &save_model {
        exp.classifier()
            .save(path)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn print_last(exp: &Experiment) {
    let r = exp.records().last().expect("round 0 is always recorded");
    println!("{:>5}  {:>9}  {:.6}", r.round, r.n_labeled, r.accuracy);
}

fn compare(settings: &Settings, out: Option<PathBuf>) -> Result<()> {
    let config = settings.experiment()?;
    let table = compare_strategies(&config, &settings.strategy_list()?, &settings.seed_list()?)?;
    print!("{table}");
    if let Some(path) = &out {
        std::fs::write(path, table.to_csv()).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn serve(addr: SocketAddr, snapshot_dir: Option<PathBuf>) -> Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let store = match snapshot_dir {
        Some(dir) => SessionStore::with_snapshots(dir)?,
        None => SessionStore::new(),
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime
        .block_on(poolal_service::serve(addr, store))
        .with_context(|| format!("cannot serve on {addr}"))
}
