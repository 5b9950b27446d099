use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{debug, info};

use nclayer::config::RunConfigFile;
use nclayer::node::RelayMode;
use nclayer::sim::{self, ChainConfig, Mode, Selection, SweepRow};
use nclayer::spt::{self, Method, StrategyTable};
use nclayer::{selftest, Error};

/// Layered media over lossy relay chains with triangular network coding.
#[derive(Parser, Debug)]
#[command(name = "nclayer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a strategy performance table and write it to a file.
    SptBuild {
        #[command(flatten)]
        common: Common,
    },
    /// Run one chain simulation and append a CSV row.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run every mode at every PDR grid point and write a CSV file.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Link PDRs, comma separated. Defaults to the 20 table bins.
        #[arg(long, value_delimiter = ',')]
        pdr_grid: Vec<f64>,
        /// Modes such as NC1, NoNC1, NC2-E2E, NC2-HBH, NC3-HBH1, heuristic-2, spt.
        #[arg(long, value_delimiter = ',', default_value = "NC1,NoNC1")]
        modes: Vec<String>,
        /// Repetitions per (PDR, mode) pair.
        #[arg(long, default_value_t = 1)]
        reps: u32,
    },
    /// Run the built-in oracle, codec and GF(2^8) checks.
    Selftest {
        /// Corrupt the GF(2^8) tables first; the run must then fail.
        #[arg(long)]
        inject_gf_fault: bool,
    },
}

/// Options shared by the table and simulation commands. Flags override
/// values from the config file.
#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Concurrent runs (or table workers). Output never depends on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    budget: Option<u32>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    packets: Option<usize>,
    #[arg(long)]
    gran: Option<u32>,
    /// exact, monte-carlo or brute-force
    #[arg(long)]
    method: Option<Method>,
}

/// `println!` that ignores a closed stdout instead of panicking.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(io::stdout(), $($arg)*);
    }};
}

enum Failure {
    Validation(Error),
    SelfTest,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Validation(e)
    }
}

fn io_err(path: &Path, e: io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn load(common: &Common) -> Result<RunConfigFile, Error> {
    let mut file = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            RunConfigFile::parse(&text).map_err(|e| match e {
                Error::ConfigLine { line, msg } => Error::Config(format!("{}:{line}: {msg}", path.display())),
                other => other,
            })?
        }
        None => RunConfigFile::parse("")?,
    };
    let c = &mut file.chain;
    if let Some(v) = common.seed {
        c.seed = v;
    }
    if let Some(v) = common.budget {
        c.budget = v;
    }
    if let Some(v) = common.layers {
        c.layers = v;
    }
    if let Some(v) = common.packets {
        c.packets_per_layer = v;
    }
    if let Some(v) = common.gran {
        c.granularity = v;
    }
    if let Some(v) = common.method {
        c.method = v;
    }
    if let Some(v) = &common.out {
        file.outputs.csv = Some(v.clone());
        file.outputs.table = Some(v.clone());
    }
    c.validate()?;
    Ok(file)
}

fn spt_build(common: &Common) -> Result<(), Failure> {
    let file = load(common)?;
    let c = &file.chain;
    let out = file.outputs.table.clone().unwrap_or_else(|| PathBuf::from("spt.table"));
    let jobs = common.jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    info!("building table with {jobs} jobs");
    let start = Instant::now();
    let table: StrategyTable = pool.install(|| c.build_table())?;
    let elapsed = start.elapsed();
    fs::write(&out, table.to_text()).map_err(|e| io_err(&out, e))?;

    say!(
        "table: B={} L={} P={} g={} method={} strategies={}",
        c.budget,
        c.layers,
        c.packets_per_layer,
        c.granularity,
        c.method,
        table.strategies().len()
    );
    say!("build duration: {:.3} s", elapsed.as_secs_f64());
    say!("{:>6}  {:>10}  best strategy", "pdr", "E[layers]");
    for b in 0..spt::BIN_COUNT {
        let s = &table.strategies()[table.best_index(b)];
        say!("{:>6.2}  {:>10.4}  {s}", spt::bin_pdr(b), table.best_value(b));
    }
    say!("wrote {}", out.display());
    Ok(())
}

/// Short name for a chain, matching sweep mode names where one applies.
fn describe(c: &ChainConfig) -> String {
    let hops = c.hop_count();
    match &c.selection {
        Selection::NoNc => Mode::NoNc { hops }.to_string(),
        Selection::Heuristic(p) => match p.set_id() {
            Some(s) => format!("heuristic-{s}"),
            None => "heuristic-custom".into(),
        },
        Selection::Spt => {
            let k = c.nc_relay_count();
            if c.relays.iter().take(k).all(|m| *m == RelayMode::Nc) {
                Mode::Nc { hops, nc_relays: k }.to_string()
            } else {
                let pattern: String = c
                    .relays
                    .iter()
                    .map(|m| if *m == RelayMode::Nc { 'N' } else { 'F' })
                    .collect();
                format!("NC{hops}-{pattern}")
            }
        }
    }
}

fn simulate(common: &Common) -> Result<(), Failure> {
    let file = load(common)?;
    let c = &file.chain;
    let m = sim::run(c)?;
    let name = describe(c);
    let row = SweepRow::new(&name, c, c.links[0].pdr, &m);

    let rows: Vec<(&str, String)> = vec![
        ("mode", name.clone()),
        ("hops", c.hop_count().to_string()),
        ("nc relays", c.nc_relay_count().to_string()),
        ("scheme", c.scheme.to_string()),
        ("gops", c.gop_count.to_string()),
        ("link pdr", format!("{:.4}", c.links[0].pdr)),
        ("measured pdr", format!("{:.4}", m.pdr)),
        ("npr", m.npr.to_string()),
        ("packets sent", m.sent_total.to_string()),
        ("audl", format!("{:.4}", m.audl)),
        ("audl std error", format!("{:.4}", m.audl_std_error())),
        ("mean delay (s)", format!("{:.4}", m.mean_delay)),
        ("total delay (s)", format!("{:.4}", m.total_delay)),
        (
            "table build duration (s)",
            format!("{:.3}", m.spt_build_time.as_secs_f64()),
        ),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in &rows {
        say!("{k:<width$}  {v}");
    }
    if c.verify_payloads {
        say!("{:<width$}  {}", "payload mismatches", m.verify_mismatches);
    }

    if let Some(path) = &file.outputs.csv {
        let fresh = fs::metadata(path).map_or(true, |md| md.len() == 0);
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| io_err(path, e))?;
        sim::write_csv(std::slice::from_ref(&row), f, fresh)?;
        debug!("appended row to {}", path.display());
    }
    Ok(())
}

fn sweep(common: &Common, pdr_grid: &[f64], modes: &[String], reps: u32) -> Result<(), Failure> {
    let file = load(common)?;
    let grid: Vec<f64> = if pdr_grid.is_empty() {
        (0..spt::BIN_COUNT).map(spt::bin_pdr).collect()
    } else {
        pdr_grid.to_vec()
    };
    let modes = modes.iter().map(|m| m.parse()).collect::<Result<Vec<Mode>, _>>()?;
    if reps == 0 {
        return Err(Error::Config("--reps must be at least 1".into()).into());
    }
    let rows = sim::sweep(&file.chain, &grid, &modes, reps, common.jobs)?;
    match &file.outputs.csv {
        Some(path) => {
            let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
            sim::write_csv(&rows, f, true)?;
            say!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => sim::write_csv(&rows, io::stdout().lock(), true)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NCLAYER_LOG", "warn")).init();
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
    let result = match &cli.command {
        Command::SptBuild { common } => spt_build(common),
        Command::Simulate { common } => simulate(common),
        Command::Sweep {
            common,
            pdr_grid,
            modes,
            reps,
        } => sweep(common, pdr_grid, modes, *reps),
        Command::Selftest { inject_gf_fault } => {
            let report = selftest::run(&selftest::Options {
                corrupt_gf: *inject_gf_fault,
            });
            say!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::SelfTest)
            }
        }
    };
    let _ = io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::SelfTest) => ExitCode::from(2),
    }
}
