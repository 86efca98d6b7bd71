use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use permimpact::estimation::{fit_two_stage, write_fit_csv};
use permimpact::io::{read_metaorders, write_metaorders};
use permimpact::model::{cumulative_cost, expected_terminal_cash};
use permimpact::{
    generate_dataset, residual_diagnostics, rng, run_ensemble, search_arbitrage, simulate_path, verify_covariance,
    Observable,
};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Version of the output directory layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Arbitrage,
    Generate,
    Estimate,
    VerifyCovariance,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Arbitrage => "arbitrage",
            Command::Generate => "generate",
            Command::Estimate => "estimate",
            Command::VerifyCovariance => "verify-covariance",
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    toolkit: &'static str,
    version: &'static str,
    command: &'a str,
    files: &'a [String],
}

struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    {
        let path = self.root.join(name);
        let file =
            File::create(&path).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    fn finish(mut self, command: Command) -> Result<(), CliError> {
        let files = self.files.clone();
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            toolkit: "permimpact",
            version: env!("CARGO_PKG_VERSION"),
            command: command.name(),
            files: &files,
        };
        self.write_text(
            "manifest.toml",
            &toml::to_string(&manifest).expect("manifest serializes"),
        )
    }
}

/// Validates `config` for `command` and runs it, writing into `out`.
/// `base_dir` resolves relative input paths.
pub fn run(command: Command, config: &ExperimentConfig, base_dir: &Path, out: &Path) -> Result<(), CliError> {
    match command {
        Command::Simulate => simulate(config, out),
        Command::Arbitrage => arbitrage(config, out),
        Command::Generate => generate(config, out),
        Command::Estimate => estimate(config, base_dir, out),
        Command::VerifyCovariance => covariance(config, out),
    }
}

fn begin(config: &ExperimentConfig, out: &Path) -> Result<OutputDir, CliError> {
    let mut dir = OutputDir::create(out)?;
    dir.write_text("config.toml", &config.to_toml())?;
    Ok(dir)
}

fn simulate(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let m = config.model()?;
    let traj = config.trajectory()?;
    let grid = config.grid()?;
    let ens = config.ensemble()?;

    let stats = run_ensemble(&m, &traj, &grid, ens.n_paths, ens.seed, &Observable::ALL)?;
    let shift = -m.permanent.cumulative(traj.q0() - traj.q_end());
    let cash = expected_terminal_cash(&m, &traj)? - m.x0;
    let cost = cumulative_cost(&m.instantaneous, &traj);

    let mut dir = begin(config, out)?;
    dir.write("ensemble.csv", |w| Ok(stats.write_csv(w)?))?;
    let mut expected = String::from("quantity,value\n");
    for (name, v) in [("cash_change", cash), ("price_shift", shift), ("cost", cost)] {
        writeln!(expected, "{name},{v}").unwrap();
    }
    dir.write_text("expected.csv", &expected)?;
    for i in 0..ens.dump_paths {
        let path = simulate_path(&m, &traj, &grid, rng::split(ens.seed, i as u64))?;
        dir.write(&format!("path_{i:04}.csv"), |w| Ok(path.write_csv(w)?))?;
    }
    dir.finish(Command::Simulate)
}

fn arbitrage(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let (regime, search) = config.arbitrage()?;
    let result = search_arbitrage(&regime, &search)?;
    let mut dir = begin(config, out)?;
    dir.write("search.csv", |w| Ok(result.write_csv(w)?))?;
    dir.write_text("summary.txt", &format!("{}\n", result.summary()))?;
    dir.finish(Command::Arbitrage)
}

fn generate(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let m = config.model()?;
    let (design, seed) = config.dataset()?;
    let records = generate_dataset(&m, &design, seed)?;
    let mut dir = begin(config, out)?;
    dir.write("metaorders.csv", |w| Ok(write_metaorders(w, &records)?))?;
    dir.finish(Command::Generate)
}

fn estimate(config: &ExperimentConfig, base_dir: &Path, out: &Path) -> Result<(), CliError> {
    let section = config.estimate()?;
    let input = base_dir.join(&section.input);
    let file = File::open(&input).map_err(|e| CliError::Input(format!("cannot open {}: {e}", input.display())))?;
    let records = read_metaorders(std::io::BufReader::new(file)).map_err(|e| match e {
        permimpact::Error::Csv { line, message } => {
            CliError::Input(format!("{}: line {line}: {message}", input.display()))
        }
        other => other.into(),
    })?;
    let (perm, inst, alpha) = fit_two_stage(&records, section.force_alpha)?;
    let diag = residual_diagnostics(&records, &perm, &inst, alpha)?;

    let mut dir = begin(config, out)?;
    dir.write("fit.csv", |w| {
        Ok(write_fit_csv(w, &[("permanent", &perm), ("instantaneous", &inst)])?)
    })?;
    dir.write("residuals.csv", |w| Ok(diag.write_csv(w)?))?;
    dir.write("diagnostics.csv", |w| Ok(diag.write_summary_csv(w)?))?;
    let mut s = String::new();
    writeln!(s, "records: {}", records.len()).unwrap();
    writeln!(
        s,
        "permanent: k = {} (se {}), alpha = {} (se {})",
        perm.scale, perm.scale_stderr, perm.exponent, perm.exponent_stderr
    )
    .unwrap();
    if let Some(a) = section.force_alpha {
        writeln!(s, "second stage uses forced alpha = {a}").unwrap();
    }
    writeln!(
        s,
        "instantaneous: eta = {} (se {}), beta = {} (se {})",
        inst.scale, inst.scale_stderr, inst.exponent, inst.exponent_stderr
    )
    .unwrap();
    writeln!(
        s,
        "standardized residual variances: {} (price), {} (cost)",
        diag.var_z1, diag.var_z2
    )
    .unwrap();
    writeln!(
        s,
        "residual correlation: {} (model {})",
        diag.empirical_correlation, diag.theoretical_correlation
    )
    .unwrap();
    writeln!(
        s,
        "cost residual vs size^alpha correlation: {} (band {}){}",
        diag.misspecification_correlation,
        diag.band,
        if diag.misspecified() { ", outside band" } else { "" }
    )
    .unwrap();
    dir.write_text("summary.txt", &s)?;
    dir.finish(Command::Estimate)
}

fn covariance(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let m = config.model()?;
    let traj = config.trajectory()?;
    let grid = config.grid()?;
    let ens = config.ensemble()?;
    if !m.permanent.is_power_law() {
        return Err(CliError::Config("verify-covariance requires model.offset = 0".into()));
    }
    if !traj.is_liquidation() {
        return Err(CliError::Config(
            "verify-covariance requires a trajectory ending at zero inventory".into(),
        ));
    }
    let report = verify_covariance(&m, &traj, &grid, ens.n_paths, ens.seed)?;
    let mut dir = begin(config, out)?;
    dir.write("covariance.csv", |w| Ok(report.write_csv(w)?))?;
    dir.finish(Command::VerifyCovariance)
}
