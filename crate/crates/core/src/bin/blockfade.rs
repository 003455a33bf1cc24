use clap::{Parser, Subcommand};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use blockfade::infotheory::{Decoder, GridSpec, ProfileStore, DEFAULT_QUAD_ORDER};
use blockfade::scenario::{dump_tables, run_scenario, Scenario};
use blockfade::Error;

#[derive(Parser)]
#[command(
    name = "blockfade",
    version,
    about = "Outage simulations for power allocation over block-fading channels"
)]
struct Cli {
    /// More output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Directory for cached MI profiles (defaults to $BLOCKFADE_CACHE_DIR).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,

    /// Gauss-Hermite nodes per dimension (run: overrides the config).
    #[arg(long, global = true)]
    quad_order: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its curves.
    Run {
        config: PathBuf,
        /// Output directory, overriding the config.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Worker threads; results do not depend on it.
        #[arg(short, long)]
        workers: Option<usize>,
        /// Seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the MI/MMSE table of a constellation with bound columns.
    DumpTables {
        constellation: String,
        #[arg(long, default_value = "cm")]
        decoder: String,
        /// Truncation level (linear) for the bound columns.
        #[arg(long, default_value_t = 10.0)]
        beta: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> ExitCode {
    match e {
        Error::Config(_) | Error::UnknownName(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn run(cli: Cli) -> blockfade::Result<()> {
    let cache = cli
        .cache_dir
        .or_else(|| std::env::var_os("BLOCKFADE_CACHE_DIR").map(PathBuf::from));
    let store_for = |order: usize| {
        let grid = GridSpec {
            quad_order: order,
            ..GridSpec::default()
        };
        ProfileStore::with_grid(cache.clone(), grid)
    };
    match cli.command {
        Command::Run {
            config,
            output,
            workers,
            seed,
        } => {
            let mut sc = Scenario::load(&config).map_err(|e| match e {
                Error::Io(io) => Error::Config(format!("{}: {io}", config.display())),
                other => other,
            })?;
            if let Some(s) = seed {
                sc.mc.seed = s;
            }
            if let Some(q) = cli.quad_order {
                sc.quad_order = q;
            }
            let store = store_for(sc.quad_order);
            let out = output.unwrap_or_else(|| sc.output.clone());
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(w) = workers {
                builder = builder.num_threads(w);
            }
            let pool = builder
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            let report = pool.install(|| run_scenario(&sc, &store, &out))?;
            let infeasible = report.results.iter().filter(|r| r.curve.infeasible.is_some()).count();
            log::info!(
                "{}: {} curves written to {} ({infeasible} infeasible)",
                sc.name,
                report.results.len(),
                out.display()
            );
            Ok(())
        }
        Command::DumpTables {
            constellation,
            decoder,
            beta,
            output,
        } => {
            let dec: Decoder = decoder.parse()?;
            let store = store_for(cli.quad_order.unwrap_or(DEFAULT_QUAD_ORDER));
            let profile = store.get(&constellation, dec)?;
            let mut out: Box<dyn Write> = match output {
                Some(p) => Box::new(BufWriter::new(File::create(p)?)),
                None => Box::new(BufWriter::new(io::stdout().lock())),
            };
            dump_tables(&profile, beta, &mut out)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
