use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use specshare::figures::{self, RevenuePreset};
use specshare::io::{self as sio, SummaryRow, TraceWriter};
use specshare::sim::{self, Engine};
use specshare::traffic::counter_rng;
use specshare::verifier::{count_profitable, verify_scenario};
use specshare::{Error, Freq, Result};

#[derive(Parser)]
#[command(name = "specshare", version, about = "Spectrum sharing among strategic operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario; writes trace.csv (first replication) and summary.csv.
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Check every one-shot deviation; exits 1 if any is profitable.
    Verify {
        scenario: PathBuf,
        /// Directory for findings.csv; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Market size n* against investment cost.
    Fig2 {
        #[arg(long, default_value = figures::FIG2_DEFAULT_GRID)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Total revenue of full, static and dynamic sharing against P in dB.
    Fig3 {
        #[arg(long, default_value = figures::FIG3_DEFAULT_GRID)]
        grid: String,
        #[arg(long, default_value_t = 50.0)]
        balance_cap: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dynamic over full-spectrum improvement against the balance cap.
    Fig4 {
        /// Balance caps in MHz; defaults to 1..10 trade quanta.
        #[arg(long)]
        grid: Option<String>,
        /// Trade quantum in MHz; defaults to the best certified one at a 50 MHz cap.
        #[arg(long)]
        trade: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn sink(out: Option<&Path>, name: &str) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(dir) => Box::new(create(dir, name)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn simulate(path: &Path, out: &Path, seed: Option<u64>, replications: Option<usize>) -> Result<()> {
    let mut scenario = sio::load_scenario(path)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    if let Some(r) = replications {
        scenario.replications = r;
    }
    scenario.validate()?;
    let engine = Engine::new(&scenario, &[])?;
    let mut trace = TraceWriter::new(create(out, "trace.csv")?);
    let mut failure = None;
    let first = engine.run_seed(counter_rng::replication_seed(scenario.seed, 0), &mut |r| {
        if failure.is_none() {
            failure = trace.write(r).err();
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    trace.finish()?;
    let (mean, std_err) = if scenario.replications == 1 {
        (first.revenues.clone(), vec![0.0; first.revenues.len()])
    } else {
        let s = sim::replicate(&scenario, &[])?;
        (s.mean, s.std_err)
    };
    let rows: Vec<SummaryRow> = mean
        .iter()
        .zip(&std_err)
        .enumerate()
        .map(|(i, (&m, &e))| SummaryRow {
            operator: i + 1,
            scheme: scenario.scheme.label().to_string(),
            mean_revenue: m,
            std_err: e,
        })
        .collect();
    sio::write_summary(create(out, "summary.csv")?, &rows)?;
    eprintln!(
        "{} scheme, {} slots x {} replications, tail bound {:.3e}",
        scenario.scheme.label(),
        scenario.horizon,
        scenario.replications,
        first.tail_bound
    );
    Ok(())
}

fn verify(path: &Path, out: Option<&Path>) -> Result<usize> {
    let scenario = sio::load_scenario(path)?;
    let findings = verify_scenario(&scenario)?;
    sio::write_findings(sink(out, "findings.csv")?, &findings)?;
    let bad = count_profitable(&findings);
    eprintln!("{} findings, {bad} profitable", findings.len());
    Ok(bad)
}

fn run(cli: Cli) -> Result<usize> {
    match cli.command {
        Command::Simulate {
            scenario,
            out,
            seed,
            replications,
        } => simulate(&scenario, &out, seed, replications).map(|_| 0),
        Command::Verify { scenario, out } => verify(&scenario, out.as_deref()),
        Command::Fig2 { grid, out } => {
            let rows: Vec<Vec<f64>> = figures::fig2(&figures::parse_grid(&grid)?)?
                .into_iter()
                .map(|(c, n)| vec![c, n as f64])
                .collect();
            sio::write_table(sink(out.as_deref(), "fig2.csv")?, &figures::FIG2_HEADER, &rows)?;
            Ok(0)
        }
        Command::Fig3 { grid, balance_cap, out } => {
            let preset = RevenuePreset {
                balance_cap_mhz: balance_cap,
                ..RevenuePreset::default()
            };
            let rows = figures::fig3(&figures::parse_grid(&grid)?, &preset)?;
            for r in rows.iter().filter(|r| r.dynamic.is_nan()) {
                eprintln!("P = {} dB: no certified trade quantum", r.p_db);
            }
            let cells: Vec<Vec<f64>> = rows.iter().map(|r| r.cells()).collect();
            sio::write_table(sink(out.as_deref(), "fig3.csv")?, &figures::FIG3_HEADER, &cells)?;
            Ok(0)
        }
        Command::Fig4 { grid, trade, out } => {
            let caps = grid.as_deref().map(figures::parse_grid).transpose()?;
            let result = figures::fig4(caps.as_deref(), trade.map(Freq::from_mhz), &RevenuePreset::default())?;
            eprintln!("trade quantum {} MHz", result.trade);
            for r in &result.rows {
                eprintln!(
                    "cap {} MHz (k = {}): {}",
                    r.balance_cap_mhz,
                    r.cap_steps,
                    if r.certified { "certified" } else { "not certified" }
                );
            }
            let cells: Vec<Vec<f64>> = result.rows.iter().map(|r| r.cells()).collect();
            sio::write_table(sink(out.as_deref(), "fig4.csv")?, &figures::FIG4_HEADER, &cells)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
