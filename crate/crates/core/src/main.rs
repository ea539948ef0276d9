use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nosas::bench::{
    dump_spectrum, parse_config_with_overrides, reproduce_table, run_experiment, write_atomic, write_spectrum_csv,
    build_problem, ConfigOverrides, ExperimentConfig, SpectrumSelector, TableOptions,
};
use nosas::islands::island_check;
use nosas::{Error, Result};

/// Spectral coarse spaces for non-overlapping additive Schwarz.
#[derive(Parser)]
#[command(name = "nosas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and report iterations and conditioning.
    Run {
        #[command(flatten)]
        setup: Setup,
    },
    /// Dump per-subdomain generalized spectra as CSV.
    Spectrum {
        #[command(flatten)]
        setup: Setup,
        /// Only this subdomain (default: one corner, edge and floating).
        #[arg(long, conflicts_with = "all")]
        subdomain: Option<usize>,
        #[arg(long)]
        all: bool,
    },
    /// Reproduce a published table (T1 to T7).
    Table {
        id: String,
        #[arg(long)]
        max_subdomains: Option<usize>,
        #[arg(long)]
        max_cells: Option<usize>,
        /// Coefficient raster for T7.
        #[arg(long)]
        raster: Option<PathBuf>,
        /// Subdomains per side for T7.
        #[arg(long)]
        raster_subdomains: Option<usize>,
        /// Write the table as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count high-coefficient islands and compare with the small eigenvalues.
    Islands {
        #[command(flatten)]
        setup: Setup,
        #[arg(long)]
        subdomain: Option<usize>,
        /// Elements with a coefficient at or above this value are high.
        #[arg(long)]
        high_cut: Option<f64>,
    },
}

#[derive(Args)]
struct Setup {
    /// Config file, JSON or `key = value`; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    subdomains: Option<usize>,
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long)]
    value: Option<f64>,
    #[arg(long)]
    high: Option<f64>,
    #[arg(long)]
    low: Option<f64>,
    #[arg(long)]
    extra: Option<f64>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    offset: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    raster: Option<String>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    spectra: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Setup {
    fn config(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                parse_config_with_overrides(&text)?.0
            }
            None => ExperimentConfig::default(),
        };
        let flags = ConfigOverrides {
            subdomains: self.subdomains,
            cells: self.cells,
            pattern: self.pattern.clone(),
            value: self.value,
            high: self.high,
            low: self.low,
            extra: self.extra,
            channels: self.channels,
            offset: self.offset,
            width: self.width,
            raster: self.raster.clone(),
            kind: self.kind.clone(),
            c: self.c,
            rtol: self.rtol,
            max_iter: self.max_iter,
            verify: self.verify.then_some(true),
            include_spectra: self.spectra.then_some(true),
            output: None,
        };
        flags.apply(base)
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("NOSAS_THREADS") {
        let n: usize = v.parse().map_err(|_| Error::Config(format!("NOSAS_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Run { setup } => {
            let mut cfg = setup.config()?;
            cfg.output = setup.out.clone();
            let rep = run_experiment(&cfg)?;
            if setup.out.is_some() {
                println!(
                    "iterations {} cond {:.4} N_E {}{}",
                    rep.iterations,
                    rep.cond_estimate,
                    rep.n_e,
                    rep.verify.as_ref().map_or(String::new(), |v| format!(" verified cond {:.4}", v.cond))
                );
            } else {
                println!("{}", serde_json::to_string_pretty(&rep)?);
            }
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            if !rep.converged {
                return Err(Error::Divergence {
                    iteration: rep.iterations,
                    msg: format!("relative residual {:.3e} above rtol {:e} at max_iter", rep.final_residual, cfg.rtol),
                });
            }
        }
        Command::Spectrum { setup, subdomain, all } => {
            let cfg = setup.config()?;
            let selector = match (subdomain, all) {
                (Some(i), _) => SpectrumSelector::Subdomain(i),
                (None, true) => SpectrumSelector::All,
                (None, false) => SpectrumSelector::Classes,
            };
            let rows = dump_spectrum(&cfg, selector)?;
            let mut buf = Vec::new();
            write_spectrum_csv(&rows, &mut buf)?;
            match &setup.out {
                Some(p) => write_atomic(p, &buf)?,
                None => print!("{}", String::from_utf8_lossy(&buf)),
            }
        }
        Command::Table { id, max_subdomains, max_cells, raster, raster_subdomains, out } => {
            let opts = TableOptions {
                max_subdomains_per_side: max_subdomains,
                max_cells_per_subdomain_side: max_cells,
                raster,
                raster_subdomains,
            };
            let rep = reproduce_table(&id, &opts)?;
            print!("{}", rep.format());
            if let Some(p) = &out {
                write_atomic(p, serde_json::to_string_pretty(&rep)?.as_bytes())?;
            }
        }
        Command::Islands { setup, subdomain, high_cut } => {
            let cfg = setup.config()?;
            let p = build_problem(&cfg)?;
            let n = p.mesh.subdomain_count();
            let chosen: Vec<usize> = match subdomain {
                Some(i) if i >= n => return Err(Error::InvalidParameter(format!("subdomain {i} out of range (mesh has {n})"))),
                Some(i) => vec![i],
                None => (0..n).collect(),
            };
            let reports = chosen
                .into_iter()
                .map(|i| island_check(&p.mesh, &p.coeffs, &p.partition, i, high_cut))
                .collect::<Result<Vec<_>>>()?;
            emit(&setup.out, &serde_json::to_string_pretty(&reports)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
