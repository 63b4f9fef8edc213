//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiment::{self, Experiment, ExperimentConfig, SweepParam};
use crate::generator::write_generator_dump;

const DEFAULTS_HELP: &str = "\
Config file: JSON object, every field optional.
  model              {\"kind\":\"transverse_field_ising\",\"j\":1,\"h\":1}
                     or {\"kind\":\"heisenberg_xxz\",\"j\":..,\"delta\":..,\"h\":..}
  n_sites            1        (1..=6)
  target             {\"kind\":\"gibbs\",\"beta\":1}
                     or {\"kind\":\"window\",\"b\":..,\"c\":..,\"delta\":..,\"eta\":..}
                     or {\"kind\":\"constant\"}
  k                  2        smoothness order, 2..=8
  margin             1.2      S = margin * max(1, max|E|); > 1 for Gibbs targets
  c_override         null     filter constant C (default L^2 S^2 / 32)
  epsilon            0.01
  jumps              \"all_pauli\" | \"x_only\" | \"z_only\"
  max_m              32       truncation orders above this are clamped
  m_override         null     fixes M = M'
  block_encoding_m   8
  norm_grid          512
  cptp_times         [0.1, 1, 10]
  trials             20
  times              [0, 0.5, 1, 2, 5, 10, 20, 50]
  initial_states     [\"mixed\", \"zero\"]   (also \"top\")
  observables        [\"H\"]   (H, I or Pauli strings such as Z1Z2)
  prepare_threshold  null
  seed               0
  negative_control   false
  tolerances         {kms_jump:1e-9, kms_adjoint:1e-8, stationarity:1e-9, choi:1e-9,
                      trace_preservation:1e-10, block_encoding:1e-9, bound_slack:1e-6}
  out                \"out\"

Exit status: 0 when all checks pass, 1 when a check fails, 2 on errors.";

#[derive(Debug, Parser)]
#[command(name = "kms-stationary", version, about = "Detailed-balance Lindbladians with prescribed fixed points", after_help = DEFAULTS_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// JSON config; defaults are used when omitted
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// output directory (overrides `out` in the config)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// overrides `seed` in the config
    #[arg(long)]
    pub seed: Option<u64>,
    /// replace the jump weighting by one that violates detailed balance
    #[arg(long)]
    pub negative_control: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build exact and truncated generators and run every check
    Verify(Common),
    /// Evolve initial states and write trajectory CSVs
    Prepare(Common),
    /// Repeat the verification over a list of parameter values
    Sweep {
        #[command(flatten)]
        common: Common,
        /// M, delta, eta or beta
        #[arg(long)]
        param: String,
        /// comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Check the block encoding of each truncated jump
    EncodeCheck(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Verify(c) | Command::Prepare(c) | Command::EncodeCheck(c) => c,
            Command::Sweep { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Verify(_) => "verify",
            Command::Prepare(_) => "prepare",
            Command::Sweep { .. } => "sweep",
            Command::EncodeCheck(_) => "encode-check",
        }
    }
}

/// Load the config and apply command-line overrides.
pub fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.negative_control {
        cfg.negative_control = true;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn write_table(dir: &Path, name: &str, table: &crate::fourier::FourierTable, manifest: &str) -> Result<()> {
    let mut buf = Vec::new();
    table.write_csv(&mut buf, Some(manifest))?;
    fs::write(dir.join(name), buf)?;
    Ok(())
}

/// Run a parsed command; returns whether every check passed.
pub fn run(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli.command.common())?;
    let manifest = cfg.manifest(cli.command.name());
    let dir = out_dir(&cfg)?;
    match &cli.command {
        Command::Verify(_) => {
            let ex = Experiment::build(&cfg)?;
            let report = ex.verify(&manifest)?;
            write(&dir, "report.txt", &report.to_text())?;
            write(&dir, "report.csv", &report.to_csv())?;
            write_table(&dir, "fourier_g.csv", &ex.g_table, &manifest)?;
            write_table(&dir, "fourier_w.csv", &ex.w_table, &manifest)?;
            write_generator_dump(&ex.exact, &dir.join("generator_exact"), &manifest, &[])?;
            write_generator_dump(&ex.truncated, &dir.join("generator_truncated"), &manifest, &[])?;
            for c in report.checks().iter().filter(|c| !c.pass) {
                eprintln!("FAIL {} = {:e} (limit {:e})", c.name, c.value, c.limit);
            }
            Ok(report.pass())
        }
        Command::Prepare(_) => {
            let ex = Experiment::build(&cfg)?;
            let trajectories = ex.trajectories()?;
            let mut ok = true;
            let mut summary = format!("# {manifest}\nname,final_distance,monotone,max_drift\n");
            for (name, traj) in &trajectories {
                write(&dir, &format!("trajectory_{name}.csv"), &traj.to_csv(&manifest))?;
                let monotone = traj.is_monotone(1e-9);
                summary.push_str(&format!(
                    "{name},{:e},{monotone},{:e}\n",
                    traj.final_distance(),
                    traj.max_drift
                ));
                if name.starts_with("exact_") {
                    ok &= monotone;
                    if let Some(th) = cfg.prepare_threshold {
                        ok &= traj.final_distance() <= th;
                    }
                }
            }
            write(&dir, "trajectories.csv", &summary)?;
            Ok(ok)
        }
        Command::Sweep { param, values, .. } => {
            let p = SweepParam::parse(param)?;
            let rows = experiment::sweep(&cfg, p, values)?;
            write(&dir, "sweep.csv", &experiment::sweep_csv(&rows, p, &manifest))?;
            Ok(rows.iter().all(|r| r.max_jump_error <= r.jump_bound * (1.0 + cfg.tolerances.bound_slack)))
        }
        Command::EncodeCheck(_) => {
            let ex = Experiment::build(&cfg)?;
            let checks = ex.block_encoding()?;
            write(&dir, "encode_check.csv", &experiment::block_encoding_csv(&ex, &checks, &manifest))?;
            let tol = cfg.tolerances.block_encoding;
            Ok(checks.iter().all(|c| c.deviation <= tol && c.prep_unitarity_residual <= tol))
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Config { .. } = e {
                eprintln!("no computation was run");
            }
            2
        }
    }
}
