use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nfbcs::basis::{build_basis, load_basis, save_basis, OvercompleteBasis};
use nfbcs::error::Error;
use nfbcs::pipeline::{
    export_results, load_scenario, run_experiment, sweep_eta0, sweep_snr, sweep_truncation,
    write_table, OneOrMany, Scenario, Snr,
};

#[derive(Parser)]
#[command(
    name = "nfbcs",
    version,
    about = "Sparse near-field reconstruction of clustered planar arrays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    scenario: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Noise-variance guess; comma-separated for sweeps.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    eta0: Vec<f64>,
    /// SNR in dB or `inf`; comma-separated for sweeps.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Vec<Snr>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario once (first SNR and eta0) and export the results.
    Run(Common),
    /// Ξ of the BCS estimate over an eta0 × SNR grid.
    #[command(name = "sweep-eta0")]
    SweepEta0(Common),
    /// Paired BCS/OMP comparison over SNR values, one row per trial.
    #[command(name = "sweep-snr")]
    SweepSnr(Common),
    /// Shrink the probe aperture with the prediction grid fixed.
    #[command(name = "sweep-truncation")]
    SweepTruncation {
        #[command(flatten)]
        common: Common,
        /// Aperture sides in wavelengths.
        #[arg(long, value_delimiter = ',', default_values_t = [20.0, 12.0, 8.0])]
        sides: Vec<f64>,
    },
    /// Build, save or inspect an over-complete basis.
    #[command(subcommand)]
    Basis(BasisCommand),
}

#[derive(Subcommand)]
enum BasisCommand {
    /// Build the basis of a scenario and print a summary; `--out` also saves it.
    Build {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the basis of a scenario and save it.
    Save {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load a saved basis and print a summary.
    Load { path: PathBuf },
}

impl Common {
    fn scenario(&self) -> Result<Scenario, Error> {
        let mut s = load_scenario(&self.scenario)?;
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(trials) = self.trials {
            s.trials = trials;
        }
        if !self.eta0.is_empty() {
            s.eta0 = OneOrMany::Many(self.eta0.clone());
        }
        if !self.snr.is_empty() {
            s.snr_db = OneOrMany::Many(self.snr.clone());
        }
        s.validate()?;
        Ok(s)
    }

    fn out_file(&self, name: &str) -> Result<PathBuf, Error> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        Ok(dir.join(name))
    }
}

fn summarize_basis(basis: &OvercompleteBasis) {
    let grid = basis.grid();
    println!(
        "basis: {} samples x {} columns (grid side {}, height {}, step {})",
        grid.len(),
        basis.len(),
        grid.side(),
        grid.height(),
        grid.step()
    );
    println!("b,factor,q,sigma");
    for (b, p) in basis.provenance().iter().enumerate() {
        println!(
            "{},{},{},{}",
            b + 1,
            p.factor,
            p.singular_index,
            p.singular_value
        );
    }
}

fn scenario_basis(path: &Path) -> Result<OvercompleteBasis, Error> {
    let s = load_scenario(path)?;
    let geom = s.geometry()?;
    build_basis(
        &geom,
        &s.nominal_excitation(&geom)?,
        &s.descriptor_list()?,
        &s.prediction_grid()?,
        s.truncation,
    )
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(common) => {
            let s = common.scenario()?;
            let result = run_experiment(&s)?;
            println!(
                "scenario {} at SNR {} dB, eta0 {}",
                if s.name.is_empty() { "-" } else { &s.name },
                result.snr_db,
                result.eta0
            );
            println!("trial,xi_bcs_db,xi_omp_db,l0_bcs,l0_omp,factors_bcs");
            for t in &result.trials {
                println!(
                    "{},{:.2},{:.2},{},{},{:?}",
                    t.trial,
                    t.bcs.report.xi_db,
                    t.omp.report.xi_db,
                    t.bcs.report.sparsity_l0,
                    t.omp.report.sparsity_l0,
                    t.bcs.report.identified_factors
                );
            }
            let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            export_results(&result, &dir)?;
            println!("results written to {}", dir.display());
        }
        Command::SweepEta0(common) => {
            let s = common.scenario()?;
            let rows = sweep_eta0(&s, &s.eta0.values(), &s.snr_db.values())?;
            for r in rows.iter().filter(|r| r.is_argmin) {
                println!(
                    "SNR {} dB: best eta0 {} (xi {:.2} dB)",
                    r.snr_db, r.eta0, r.xi_db
                );
            }
            let path = common.out_file("sweep_eta0.csv")?;
            write_table(&rows, &path)?;
            println!("table written to {}", path.display());
        }
        Command::SweepSnr(common) => {
            let s = common.scenario()?;
            let rows = sweep_snr(&s, &s.snr_db.values())?;
            for r in &rows {
                println!(
                    "SNR {} dB trial {}: xi bcs {:.2} dB, omp {:.2} dB",
                    r.snr_db, r.trial, r.xi_bcs_db, r.xi_omp_db
                );
            }
            let path = common.out_file("sweep_snr.csv")?;
            write_table(&rows, &path)?;
            println!("table written to {}", path.display());
        }
        Command::SweepTruncation { common, sides } => {
            let s = common.scenario()?;
            let rows = sweep_truncation(&s, &sides)?;
            for r in &rows {
                println!(
                    "side {}: xi bcs {:.2} dB, omp {:.2} dB",
                    r.side, r.xi_bcs_db, r.xi_omp_db
                );
            }
            let path = common.out_file("sweep_truncation.csv")?;
            write_table(&rows, &path)?;
            for &side in &sides {
                let result = run_experiment(&s.with_measurement_side(side))?;
                let dir = common
                    .out
                    .clone()
                    .unwrap_or_else(|| PathBuf::from("."))
                    .join(format!("side_{side}"));
                export_results(&result, &dir)?;
            }
            println!("table written to {}", path.display());
        }
        Command::Basis(BasisCommand::Build { scenario, out }) => {
            let basis = scenario_basis(&scenario)?;
            summarize_basis(&basis);
            if let Some(out) = out {
                save_basis(&basis, &out)?;
                println!("basis written to {}", out.display());
            }
        }
        Command::Basis(BasisCommand::Save { scenario, out }) => {
            let basis = scenario_basis(&scenario)?;
            save_basis(&basis, &out)?;
            println!("basis written to {}", out.display());
        }
        Command::Basis(BasisCommand::Load { path }) => summarize_basis(&load_basis(&path)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
