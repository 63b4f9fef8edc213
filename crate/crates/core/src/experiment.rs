//! Experiment configuration and the pipeline shared by the command-line tool and the FFI.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolve::{self, Observable, SpectrumDiagnostics, Trajectory};
use crate::filter::{g_hat, w_hat, FilterParams, Weighting};
use crate::fourier::{self, FourierTable, MAX_TRUNCATION};
use crate::generator::{
    assemble_superoperator, build_exact, build_exact_weighted, build_truncated, LindbladGenerator,
    Superoperator, MAX_SUPEROPERATOR_DIM,
};
use crate::linalg::{self, CMat};
use crate::spectral::{
    build_chain_hamiltonian, diagonalize, selected_jump_set, ChainModel, HamiltonianSpectrum,
    JumpProposalSet, JumpSelector,
};
use crate::statefn::{
    constant_phi, derivative_l1_norms, gibbs_phi, window_phi, DerivativeNorms, TargetFunction,
    WindowSpec, MAX_SMOOTHSTEP_ORDER,
};
use crate::verify::{
    self, jump_ancilla_qubits, BlockEncodingCheck, CheckOutcome, Tolerances, TruncatedChecks,
    TruncationBounds, VerificationReport,
};

/// Largest order accepted for `max_m` and `m_override`.
pub const MAX_CONFIG_ORDER: usize = 256;
/// Largest order accepted for the block-encoding check.
pub const MAX_BLOCK_ENCODING_ORDER: usize = 16;

/// Target stationary state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    Gibbs { beta: f64 },
    Window { b: f64, c: f64, delta: f64, eta: f64 },
    Constant,
}

/// One experiment, read from JSON. Missing fields take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// default: transverse-field Ising with `j = 1`, `h = 1`
    pub model: ChainModel,
    /// default 1
    pub n_sites: usize,
    /// default: Gibbs with `beta = 1`
    pub target: TargetConfig,
    /// smoothness order, default 2
    pub k: usize,
    /// `S = margin · max(1, max|E|)`, default 1.2
    pub margin: f64,
    /// replaces the default filter constant `L²S²/32`
    pub c_override: Option<f64>,
    /// generator accuracy, default 1e-2
    pub epsilon: f64,
    /// default: all single-site Paulis
    pub jumps: JumpSelector,
    /// largest truncation order used; larger certified orders are clamped, default 32
    pub max_m: usize,
    /// fixes both truncation orders
    pub m_override: Option<usize>,
    /// order of the block-encoding check, default 8
    pub block_encoding_m: usize,
    /// grid for the derivative-norm estimates, default 512
    pub norm_grid: usize,
    /// times of the CPTP checks, default `[0.1, 1, 10]`
    pub cptp_times: Vec<f64>,
    /// random Hermitian pairs in the adjointness check, default 20
    pub trials: usize,
    /// trajectory sample times, default `[0, 0.5, 1, 2, 5, 10, 20, 50]`
    pub times: Vec<f64>,
    /// `mixed`, `zero` or `top`; default `["mixed", "zero"]`
    pub initial_states: Vec<String>,
    /// default `["H"]`
    pub observables: Vec<String>,
    /// largest accepted final distance in `prepare`
    pub prepare_threshold: Option<f64>,
    /// default 0
    pub seed: u64,
    /// use the square-root weighting, which breaks detailed balance
    pub negative_control: bool,
    pub tolerances: Tolerances,
    /// not part of the config hash
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ChainModel::TransverseFieldIsing { j: 1.0, h: 1.0 },
            n_sites: 1,
            target: TargetConfig::Gibbs { beta: 1.0 },
            k: 2,
            margin: 1.2,
            c_override: None,
            epsilon: 1e-2,
            jumps: JumpSelector::AllPauli,
            max_m: 32,
            m_override: None,
            block_encoding_m: 8,
            norm_grid: 512,
            cptp_times: vec![0.1, 1.0, 10.0],
            trials: 20,
            times: vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
            initial_states: vec!["mixed".into(), "zero".into()],
            observables: vec!["H".into()],
            prepare_threshold: None,
            seed: 0,
            negative_control: false,
            tolerances: Tolerances::default(),
            out: None,
        }
    }
}

fn field_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn finite_positive(field: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(field_err(field, format!("must be finite and > 0, got {x}")))
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    /// Check every field against the preconditions of the modules it feeds.
    pub fn validate(&self) -> Result<()> {
        let max_sites = MAX_SUPEROPERATOR_DIM.trailing_zeros() as usize;
        if !(1..=max_sites).contains(&self.n_sites) {
            return Err(field_err("n_sites", format!("must be in 1..={max_sites}, got {}", self.n_sites)));
        }
        let couplings: &[(&str, f64)] = match &self.model {
            ChainModel::TransverseFieldIsing { j, h } => &[("model.j", *j), ("model.h", *h)],
            ChainModel::HeisenbergXxz { j, delta, h } => {
                &[("model.j", *j), ("model.delta", *delta), ("model.h", *h)]
            }
        };
        for &(name, v) in couplings {
            if !v.is_finite() {
                return Err(field_err(name, "must be finite"));
            }
        }
        if !(2..=MAX_SMOOTHSTEP_ORDER).contains(&self.k) {
            return Err(field_err("k", format!("must be in 2..={MAX_SMOOTHSTEP_ORDER}, got {}", self.k)));
        }
        if !(self.margin.is_finite() && self.margin >= 1.0) {
            return Err(field_err("margin", format!("must be >= 1, got {}", self.margin)));
        }
        match self.target {
            TargetConfig::Gibbs { beta } => {
                if !(beta.is_finite() && beta >= 0.0) {
                    return Err(field_err("target.beta", format!("must be >= 0, got {beta}")));
                }
                if self.margin <= 1.0 {
                    return Err(field_err("margin", "must exceed 1 for a Gibbs target"));
                }
            }
            TargetConfig::Window { b, c, delta, eta } => {
                WindowSpec { b, c, delta, eta }
                    .validate()
                    .map_err(|e| field_err("target", e.to_string()))?;
            }
            TargetConfig::Constant => {}
        }
        if let Some(c) = self.c_override {
            if !(c.is_finite() && c >= 0.0) {
                return Err(field_err("c_override", format!("must be >= 0, got {c}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(field_err("epsilon", format!("must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(1..=MAX_CONFIG_ORDER).contains(&self.max_m) {
            return Err(field_err("max_m", format!("must be in 1..={MAX_CONFIG_ORDER}, got {}", self.max_m)));
        }
        if let Some(m) = self.m_override {
            if !(1..=MAX_CONFIG_ORDER).contains(&m) {
                return Err(field_err("m_override", format!("must be in 1..={MAX_CONFIG_ORDER}, got {m}")));
            }
        }
        if !(1..=MAX_BLOCK_ENCODING_ORDER).contains(&self.block_encoding_m) {
            return Err(field_err(
                "block_encoding_m",
                format!("must be in 1..={MAX_BLOCK_ENCODING_ORDER}, got {}", self.block_encoding_m),
            ));
        }
        if !(self.norm_grid.is_power_of_two() && (64..=4096).contains(&self.norm_grid)) {
            return Err(field_err("norm_grid", format!("must be a power of two in 64..=4096, got {}", self.norm_grid)));
        }
        if self.trials < 10 {
            return Err(field_err("trials", format!("must be >= 10, got {}", self.trials)));
        }
        for (name, times) in [("cptp_times", &self.cptp_times), ("times", &self.times)] {
            if times.is_empty() {
                return Err(field_err(name, "must not be empty"));
            }
            if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return Err(field_err(name, "entries must be finite and >= 0"));
            }
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(field_err("times", "must be strictly increasing"));
        }
        if self.initial_states.is_empty() {
            return Err(field_err("initial_states", "must not be empty"));
        }
        for s in &self.initial_states {
            if !matches!(s.as_str(), "mixed" | "zero" | "top") {
                return Err(field_err("initial_states", format!("unknown state `{s}` (mixed, zero, top)")));
            }
        }
        let d = 1usize << self.n_sites;
        let dummy = CMat::zeros(d, d);
        for o in &self.observables {
            Observable::parse(o, self.n_sites, &dummy).map_err(|e| field_err("observables", e.to_string()))?;
        }
        if let Some(th) = self.prepare_threshold {
            finite_positive("prepare_threshold", th)?;
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.kms_jump", t.kms_jump),
            ("tolerances.kms_adjoint", t.kms_adjoint),
            ("tolerances.stationarity", t.stationarity),
            ("tolerances.choi", t.choi),
            ("tolerances.trace_preservation", t.trace_preservation),
            ("tolerances.block_encoding", t.block_encoding),
            ("tolerances.bound_slack", t.bound_slack),
        ] {
            finite_positive(name, v)?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// First line written to every output file.
    pub fn manifest(&self, command: &str) -> String {
        format!(
            "manifest config_hash={} command={command} version={}",
            self.hash(),
            env!("CARGO_PKG_VERSION")
        )
    }

    pub fn window_spec(&self) -> Option<WindowSpec> {
        match self.target {
            TargetConfig::Window { b, c, delta, eta } => Some(WindowSpec { b, c, delta, eta }),
            _ => None,
        }
    }
}

/// Truncation orders actually used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationChoice {
    pub m: usize,
    pub m_prime: usize,
    /// whether the orders meet the `ε` criterion
    pub epsilon_certified: bool,
    /// orders requested by the `ε` criterion, if below the search cap
    pub certified_m: Option<(usize, usize)>,
    pub jump_tail_bound: f64,
    pub coherent_tail_bound: f64,
    pub z_g_bound: f64,
    pub z_w_bound: f64,
}

/// Everything built from one config.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub spectrum: HamiltonianSpectrum,
    pub target: TargetFunction,
    pub filter: FilterParams,
    pub proposals: JumpProposalSet,
    pub norms_g: DerivativeNorms,
    pub norms_w: DerivativeNorms,
    pub truncation: TruncationChoice,
    pub g_table: FourierTable,
    pub w_table: FourierTable,
    pub exact: LindbladGenerator,
    pub truncated: LindbladGenerator,
}

fn build_target(cfg: &ExperimentConfig, spec: &HamiltonianSpectrum) -> Result<TargetFunction> {
    let s = spec.energy_bound();
    match cfg.target {
        TargetConfig::Gibbs { beta } => gibbs_phi(beta, spec.max_abs_energy(), s, cfg.k),
        TargetConfig::Window { b, c, delta, eta } => {
            let w = WindowSpec { b, c, delta, eta };
            window_phi(w, s.max(w.min_half_period()), cfg.k)
        }
        TargetConfig::Constant => constant_phi(s, cfg.k),
    }
}

impl Experiment {
    pub fn build(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let cfg = config.clone();
        let h = build_chain_hamiltonian(&cfg.model, cfg.n_sites)?;
        let spec0 = diagonalize(&h, cfg.margin)?;
        let target = build_target(&cfg, &spec0)?;
        let s = target.half_period();
        let spectrum = spec0.with_energy_bound(s)?;
        let filter = FilterParams::for_target_with(&target, cfg.c_override)?;
        let proposals = selected_jump_set(cfg.n_sites, cfg.jumps)?;
        let exact = if cfg.negative_control {
            build_exact_weighted(&spectrum, &target, &filter, Weighting::SquareRoot, &proposals)?
        } else {
            build_exact(&spectrum, &target, &filter, &proposals)?
        };

        let g = |a: f64, b: f64| linalg::real(g_hat(&target, &filter, a, b));
        let w = |a: f64, b: f64| w_hat(&target, a, b);
        let norms_g = derivative_l1_norms(g, s, cfg.k, cfg.norm_grid)?;
        let norms_w = derivative_l1_norms(w, s, cfg.k, cfg.norm_grid)?;
        let plan = fourier::select_truncation(cfg.epsilon, cfg.k, s, &norms_g, &norms_w, proposals.len());
        let certified_m = match &plan {
            Ok(p) => Some((p.m, p.m_prime)),
            Err(Error::Capacity(_)) => None,
            Err(e) => return Err(Error::Internal(format!("truncation planning failed: {e}"))),
        };
        let (m, m_prime) = match (cfg.m_override, certified_m) {
            (Some(m), _) => (m, m),
            (None, Some((m, mp))) => (m.min(cfg.max_m), mp.min(cfg.max_m)),
            (None, None) => (cfg.max_m, cfg.max_m),
        };
        let epsilon_certified = certified_m.is_some_and(|(cm, cmp)| cm <= m && cmp <= m_prime);
        let truncation = TruncationChoice {
            m,
            m_prime,
            epsilon_certified,
            certified_m,
            jump_tail_bound: fourier::tail_bound(s, cfg.k, m, &norms_g)?,
            coherent_tail_bound: fourier::tail_bound(s, cfg.k, m_prime, &norms_w)?,
            z_g_bound: fourier::l1_bound(s, cfg.k, &norms_g)?,
            z_w_bound: fourier::l1_bound(s, cfg.k, &norms_w)?,
        };
        debug_assert!(m.max(m_prime) < MAX_TRUNCATION);
        let g_table = fourier::fourier_coefficients(g, s, m, fourier::default_grid(m))?;
        let w_table = fourier::fourier_coefficients(w, s, m_prime, fourier::default_grid(m_prime))?;
        let mut truncated = build_truncated(&spectrum, &target, &proposals, &g_table, &w_table)?;
        truncated.record_jump_errors(&exact)?;
        Ok(Self {
            config: cfg,
            spectrum,
            target,
            filter,
            proposals,
            norms_g,
            norms_w,
            truncation,
            g_table,
            w_table,
            exact,
            truncated,
        })
    }

    pub fn superoperators(&self) -> Result<(Superoperator, Superoperator)> {
        Ok((assemble_superoperator(&self.exact)?, assemble_superoperator(&self.truncated)?))
    }

    /// Block-encoding check of every jump at order `block_encoding_m`.
    pub fn block_encoding(&self) -> Result<Vec<BlockEncodingCheck>> {
        let m = self.config.block_encoding_m;
        let s = self.target.half_period();
        let g = |a: f64, b: f64| linalg::real(g_hat(&self.target, &self.filter, a, b));
        let table = fourier::fourier_coefficients(g, s, m, fourier::default_grid(m))?;
        let w = table.reconstruct_matrix(self.spectrum.eigenvalues());
        self.proposals
            .proposals()
            .par_iter()
            .map(|a| {
                let ab = self.spectrum.to_eigenbasis(a);
                let l_bar = self.spectrum.from_eigenbasis(&ab.component_mul(&w));
                verify::verify_block_encoding(&table, &self.spectrum, a, &l_bar)
            })
            .collect()
    }

    fn info(&self) -> Vec<(String, String)> {
        let cfg = &self.config;
        let t = &self.truncation;
        let e = self.spectrum.eigenvalues();
        let mut info = vec![
            ("model".to_string(), format!("{:?}", cfg.model)),
            ("n_sites".into(), cfg.n_sites.to_string()),
            ("target".into(), self.target.label().to_string()),
            ("k".into(), cfg.k.to_string()),
            ("S".into(), format!("{:e}", self.target.half_period())),
            ("lipschitz".into(), format!("{:e}", self.target.lipschitz())),
            ("filter_C".into(), format!("{:e}", self.filter.c)),
            ("filter_zeta".into(), format!("{:e}", self.filter.zeta)),
            ("spectrum_min".into(), format!("{:e}", e[0])),
            ("spectrum_max".into(), format!("{:e}", e[e.len() - 1])),
            ("jump_labels".into(), self.proposals.labels().join(";")),
            ("negative_control".into(), cfg.negative_control.to_string()),
            ("epsilon".into(), format!("{:e}", cfg.epsilon)),
            ("M".into(), t.m.to_string()),
            ("M_prime".into(), t.m_prime.to_string()),
            ("epsilon_certified".into(), t.epsilon_certified.to_string()),
            (
                "certified_orders".into(),
                t.certified_m.map_or("above search cap".into(), |(a, b)| format!("{a};{b}")),
            ),
            ("Z_g".into(), format!("{:e}", self.g_table.z())),
            ("Z_w".into(), format!("{:e}", self.w_table.z())),
            ("Z_g_bound".into(), format!("{:e}", t.z_g_bound)),
            ("Z_w_bound".into(), format!("{:e}", t.z_w_bound)),
            ("jump_tail_bound".into(), format!("{:e}", t.jump_tail_bound)),
            ("coherent_tail_bound".into(), format!("{:e}", t.coherent_tail_bound)),
            (
                "jump_ancilla_qubits".into(),
                jump_ancilla_qubits(t.m, self.proposals.len()).to_string(),
            ),
            ("block_encoding_M".into(), cfg.block_encoding_m.to_string()),
            ("seed".into(), cfg.seed.to_string()),
        ];
        for (name, n) in [("norms_g", &self.norms_g), ("norms_w", &self.norms_w)] {
            info.push((
                name.into(),
                format!("d1={:e};d2={:e};mixed={:e};value={:e}", n.d1, n.d2, n.mixed, n.value),
            ));
        }
        info
    }

    /// Run every check on both generators.
    pub fn verify(&self, manifest: &str) -> Result<VerificationReport> {
        let cfg = &self.config;
        let (sup_exact, sup_trunc) = self.superoperators()?;
        let (kms, adjoint, stat, cptp) =
            verify::verify_exact(&self.exact, &sup_exact, &cfg.cptp_times, cfg.trials, cfg.seed)?;
        let trunc_cptp = cfg
            .cptp_times
            .iter()
            .map(|&t| verify::check_cptp(&sup_trunc, t))
            .collect::<Result<Vec<_>>>()?;
        let bounds = TruncationBounds {
            jump_tail: self.truncation.jump_tail_bound,
            coherent_tail: self.truncation.coherent_tail_bound,
        };
        let bound_check = verify::check_truncation_bounds(&self.exact, &self.truncated, &bounds, cfg.tolerances.bound_slack)?;
        let residual = self
            .truncated
            .truncation()
            .map_or(0.0, |t| t.coherent_hermiticity_residual);
        let be = self.block_encoding()?;
        let diag_exact = evolve::lindbladian_spectrum_diagnostics(&sup_exact)?;
        let diag_trunc = evolve::lindbladian_spectrum_diagnostics(&sup_trunc)?;

        let mut info = self.info();
        info.push((
            "block_encoding_alpha".into(),
            be.first().map_or(String::new(), |b| format!("{:e}", b.alpha)),
        ));
        if let Some(b) = be.first() {
            info.push(("block_encoding_index_qubits".into(), b.index_qubits.to_string()));
        }
        push_diagnostics(&mut info, "exact", &diag_exact);
        push_diagnostics(&mut info, "truncated", &diag_trunc);
        info.push(("coherent_hermiticity_residual".into(), format!("{residual:e}")));

        let mut extra = Vec::new();
        for (name, d) in [("exact", &diag_exact), ("truncated", &diag_trunc)] {
            extra.push(CheckOutcome::at_most(format!("max_real_part[{name}]"), d.max_real_part, 1e-9));
        }
        let prep = be.iter().map(|b| b.prep_unitarity_residual).fold(0.0, f64::max);
        extra.push(CheckOutcome::at_most("preparation_unitarity", prep, cfg.tolerances.block_encoding));
        let g_max = max_g_hat_on_grid(&self.target, &self.filter, 512);
        extra.push(CheckOutcome::at_most("max_g_hat", g_max, 1.0 + 1e-12));

        Ok(VerificationReport {
            manifest: manifest.into(),
            info,
            tolerances: cfg.tolerances,
            kms_jump_residuals: kms,
            kms_adjoint_residual: adjoint,
            stationarity_residual: stat,
            cptp,
            block_encoding_deviation: Some(be.iter().map(|b| b.deviation).collect()),
            truncated: Some(TruncatedChecks {
                cptp: trunc_cptp,
                coherent_hermiticity_residual: residual,
                bounds: bound_check,
            }),
            extra,
        })
    }

    fn initial_state(&self, label: &str) -> Result<CMat> {
        let d = self.spectrum.dim();
        match label {
            "mixed" => Ok(linalg::identity(d) / linalg::real(d as f64)),
            "zero" => {
                let mut m = CMat::zeros(d, d);
                m[(0, 0)] = linalg::ONE;
                Ok(m)
            }
            "top" => Ok(self.spectrum.projector(d - 1)),
            other => Err(field_err("initial_states", format!("unknown state `{other}`"))),
        }
    }

    /// Trajectories for every initial state under both generators, exact first.
    pub fn trajectories(&self) -> Result<Vec<(String, Trajectory)>> {
        let cfg = &self.config;
        let (sup_exact, sup_trunc) = self.superoperators()?;
        let kernel = evolve::kernel_state(&sup_trunc)?;
        let h = self.spectrum.hamiltonian();
        let observables = cfg
            .observables
            .iter()
            .map(|o| Observable::parse(o, cfg.n_sites, &h))
            .collect::<Result<Vec<_>>>()?;
        let sigma = self.exact.sigma();
        let jobs: Vec<(&str, &String)> = ["exact", "truncated"]
            .iter()
            .flat_map(|m| cfg.initial_states.iter().map(move |s| (*m, s)))
            .collect();
        jobs.par_iter()
            .map(|&(mode, state)| {
                let rho0 = self.initial_state(state)?;
                let (sup, k) = if mode == "exact" {
                    (&sup_exact, None)
                } else {
                    (&sup_trunc, Some(&kernel))
                };
                let traj = evolve::simulate(sup, &rho0, state, &cfg.times, &sigma, k, &observables)?;
                Ok((format!("{mode}_{state}"), traj))
            })
            .collect()
    }
}

fn push_diagnostics(info: &mut Vec<(String, String)>, name: &str, d: &SpectrumDiagnostics) {
    info.push((format!("kernel_dim[{name}]"), d.kernel_dim.to_string()));
    info.push((format!("spectral_gap[{name}]"), format!("{:e}", d.spectral_gap)));
}

/// Largest `ĝ` over an `n × n` grid of `[-S, S)²`.
pub fn max_g_hat_on_grid(target: &TargetFunction, filter: &FilterParams, n: usize) -> f64 {
    let s = target.half_period();
    let x = |i: usize| -s + 2.0 * s * i as f64 / n as f64;
    (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| g_hat(target, filter, x(i), x(j))).fold(0.0, f64::max))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    M,
    Delta,
    Eta,
    Beta,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "M" | "m" => Ok(Self::M),
            "delta" => Ok(Self::Delta),
            "eta" => Ok(Self::Eta),
            "beta" => Ok(Self::Beta),
            _ => Err(Error::Parse(format!("unknown sweep parameter `{s}` (M, delta, eta, beta)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::M => "M",
            Self::Delta => "delta",
            Self::Eta => "eta",
            Self::Beta => "beta",
        }
    }

    /// Copy of `cfg` with this parameter set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut out = cfg.clone();
        match (self, &mut out.target) {
            (Self::M, _) => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(field_err("M", format!("sweep values must be positive integers, got {value}")));
                }
                out.m_override = Some(value as usize);
            }
            (Self::Delta, TargetConfig::Window { delta, .. }) => *delta = value,
            (Self::Eta, TargetConfig::Window { eta, .. }) => *eta = value,
            (Self::Beta, TargetConfig::Gibbs { beta }) => *beta = value,
            (p, _) => {
                return Err(field_err("target", format!("sweep over {} needs a matching target", p.name())));
            }
        }
        out.validate()?;
        Ok(out)
    }
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub m: usize,
    pub m_prime: usize,
    pub epsilon_certified: bool,
    pub max_jump_error: f64,
    pub jump_bound: f64,
    pub coherent_error: f64,
    pub coherent_bound: f64,
    pub z_g: f64,
    pub z_w: f64,
    pub d1_g: f64,
    pub d2_g: f64,
    pub mixed_g: f64,
    pub max_kms_residual: f64,
    pub stationarity: f64,
    pub spectral_gap: f64,
}

pub fn sweep_point(cfg: &ExperimentConfig, param: SweepParam, value: f64) -> Result<SweepRow> {
    let ex = Experiment::build(&param.apply(cfg, value)?)?;
    let sup = assemble_superoperator(&ex.exact)?;
    let bounds = TruncationBounds {
        jump_tail: ex.truncation.jump_tail_bound,
        coherent_tail: ex.truncation.coherent_tail_bound,
    };
    let check = verify::check_truncation_bounds(&ex.exact, &ex.truncated, &bounds, ex.config.tolerances.bound_slack)?;
    let kms = ex
        .exact
        .jumps()
        .iter()
        .map(|l| verify::check_kms_condition(l, ex.exact.state()))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepRow {
        value,
        m: ex.truncation.m,
        m_prime: ex.truncation.m_prime,
        epsilon_certified: ex.truncation.epsilon_certified,
        max_jump_error: check.jumps.iter().map(|j| j.0).fold(0.0, f64::max),
        jump_bound: ex.truncation.jump_tail_bound,
        coherent_error: check.coherent.0,
        coherent_bound: check.coherent.1,
        z_g: ex.g_table.z(),
        z_w: ex.w_table.z(),
        d1_g: ex.norms_g.d1,
        d2_g: ex.norms_g.d2,
        mixed_g: ex.norms_g.mixed,
        max_kms_residual: kms.into_iter().fold(0.0, f64::max),
        stationarity: verify::stationarity_residual(&sup, &ex.exact.sigma()),
        spectral_gap: evolve::lindbladian_spectrum_diagnostics(&sup)?.spectral_gap,
    })
}

/// Evaluate all points in parallel; rows come back sorted by value.
pub fn sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Parameter("sweep needs at least one value".into()));
    }
    let mut rows = values
        .par_iter()
        .map(|&v| sweep_point(cfg, param, v))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow], param: SweepParam, manifest: &str) -> String {
    let mut s = format!("# {manifest}\n");
    let _ = writeln!(
        s,
        "{},M,M_prime,epsilon_certified,max_jump_error,jump_bound,coherent_error,coherent_bound,\
         Z_g,Z_w,d1_g,d2_g,mixed_g,max_kms_residual,stationarity,spectral_gap",
        param.name()
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.value,
            r.m,
            r.m_prime,
            r.epsilon_certified,
            r.max_jump_error,
            r.jump_bound,
            r.coherent_error,
            r.coherent_bound,
            r.z_g,
            r.z_w,
            r.d1_g,
            r.d2_g,
            r.mixed_g,
            r.max_kms_residual,
            r.stationarity,
            r.spectral_gap
        );
    }
    s
}

/// `check,value,limit,pass` rows for the block-encoding check alone.
pub fn block_encoding_csv(ex: &Experiment, checks: &[BlockEncodingCheck], manifest: &str) -> String {
    let mut s = format!("# {manifest}\n");
    let _ = writeln!(s, "# M = {}", ex.config.block_encoding_m);
    s.push_str("jump,deviation,alpha,index_qubits,prep_unitarity_residual,pass\n");
    let tol = ex.config.tolerances.block_encoding;
    for (label, c) in ex.proposals.labels().iter().zip(checks) {
        let _ = writeln!(
            s,
            "{label},{:e},{:e},{},{:e},{}",
            c.deviation,
            c.alpha,
            c.index_qubits,
            c.prep_unitarity_residual,
            c.deviation <= tol && c.prep_unitarity_residual <= tol
        );
    }
    s
}
