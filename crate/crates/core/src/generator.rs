//! Exact and Fourier-truncated Lindbladians with stationary state `f(H)/Tr f(H)`.
//!
//! Operators are assembled in the Hamiltonian eigenbasis as Hadamard products with
//! scalar weight matrices and rotated back once.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{FilterParams, Kernel, Weighting};
use crate::fourier::FourierTable;
use crate::linalg::{self, CMat, CVec, I};
use crate::spectral::{HamiltonianSpectrum, JumpProposalSet};
use crate::statefn::TargetFunction;

/// Largest Hilbert-space dimension for which superoperators are assembled.
pub const MAX_SUPEROPERATOR_DIM: usize = 64;

/// Diagonal state `Σ p_k |ψ_k⟩⟨ψ_k|` kept in spectral form.
#[derive(Debug, Clone)]
pub struct StationaryState {
    log_probs: Vec<f64>,
    basis: CMat,
}

impl StationaryState {
    /// Normalize `exp(log_weights)` with log-sum-exp.
    pub fn from_log_weights(log_weights: &[f64], basis: CMat) -> Result<Self> {
        if log_weights.len() != basis.ncols() || !basis.is_square() {
            return Err(Error::Size("weights and basis disagree in size".into()));
        }
        if log_weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Validation("state weights must be positive and finite".into()));
        }
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + log_weights.iter().map(|w| (w - max).exp()).sum::<f64>().ln();
        Ok(Self {
            log_probs: log_weights.iter().map(|w| w - log_z).collect(),
            basis,
        })
    }

    /// `f(H)/Tr f(H)` for the target `Φ`.
    pub fn for_target(spec: &HamiltonianSpectrum, target: &TargetFunction) -> Result<Self> {
        let phis: Vec<f64> = spec.eigenvalues().iter().map(|&e| target.phi(e)).collect();
        Self::from_log_weights(&phis, spec.eigenbasis().clone())
    }

    /// Spectral form of a positive-definite matrix.
    pub fn from_matrix(sigma: &CMat) -> Result<Self> {
        if !sigma.is_square() {
            return Err(Error::Size("state must be square".into()));
        }
        let (values, vectors) = linalg::eigh(sigma);
        if values.iter().any(|&v| v.is_nan() || v <= 0.0) {
            return Err(Error::Validation(format!(
                "state is not positive definite (min eigenvalue {:e})",
                values.first().copied().unwrap_or(0.0)
            )));
        }
        let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        Self::from_log_weights(&logs, vectors)
    }

    pub fn dim(&self) -> usize {
        self.log_probs.len()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn log_probabilities(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    /// `σ^p`
    pub fn power(&self, p: f64) -> CMat {
        let diag = CVec::from_iterator(self.dim(), self.log_probs.iter().map(|l| linalg::real((p * l).exp())));
        &self.basis * CMat::from_diagonal(&diag) * self.basis.adjoint()
    }

    pub fn matrix(&self) -> CMat {
        self.power(1.0)
    }

    /// `σ / max_k p_k`
    pub fn peak_normalized(&self) -> CMat {
        let max = self.log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let diag = CVec::from_iterator(self.dim(), self.log_probs.iter().map(|l| linalg::real((l - max).exp())));
        &self.basis * CMat::from_diagonal(&diag) * self.basis.adjoint()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Truncated,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Truncated => "truncated",
        }
    }
}

/// Truncation data carried by a truncated generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationInfo {
    pub m: usize,
    pub m_prime: usize,
    /// measured `Z_g` of the jump table
    pub z_g: f64,
    /// measured `Z_w` of the coherent table
    pub z_w: f64,
    /// `max |Ḡ - Ḡ†|` before Hermitization
    pub coherent_hermiticity_residual: f64,
    /// `‖L_a - L̄_a‖`, filled in by [`LindbladGenerator::record_jump_errors`]
    pub jump_errors: Option<Vec<f64>>,
}

/// Jumps `L_a`, coherent term `G`, and the stationary state.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    labels: Vec<String>,
    jumps: Vec<CMat>,
    coherent: CMat,
    sigma_unnormalized: CMat,
    state: StationaryState,
    mode: Mode,
    truncation: Option<TruncationInfo>,
}

impl LindbladGenerator {
    /// Generator from explicit parts; the stationary state is only recorded, not checked.
    pub fn from_parts(
        labels: Vec<String>,
        jumps: Vec<CMat>,
        coherent: CMat,
        state: StationaryState,
        mode: Mode,
    ) -> Result<Self> {
        let d = state.dim();
        if labels.len() != jumps.len() {
            return Err(Error::Size("one label per jump is required".into()));
        }
        if jumps.iter().chain(std::iter::once(&coherent)).any(|m| m.shape() != (d, d)) {
            return Err(Error::Size(format!("all operators must be {d}x{d}")));
        }
        let sigma_unnormalized = state.peak_normalized();
        Ok(Self {
            labels,
            jumps,
            coherent,
            sigma_unnormalized,
            state,
            mode,
            truncation: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn jumps(&self) -> &[CMat] {
        &self.jumps
    }

    pub fn coherent(&self) -> &CMat {
        &self.coherent
    }

    /// `f(H)` with the largest weight scaled to 1.
    pub fn sigma_unnormalized(&self) -> &CMat {
        &self.sigma_unnormalized
    }

    pub fn sigma(&self) -> CMat {
        self.state.matrix()
    }

    pub fn state(&self) -> &StationaryState {
        &self.state
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn truncation(&self) -> Option<&TruncationInfo> {
        self.truncation.as_ref()
    }

    /// Replace the coherent term (used for negative controls).
    pub fn with_coherent(mut self, coherent: CMat) -> Result<Self> {
        if coherent.shape() != (self.dim(), self.dim()) {
            return Err(Error::Size("coherent term has the wrong shape".into()));
        }
        self.coherent = coherent;
        Ok(self)
    }

    /// Store `‖L_a - L̄_a‖` measured against `exact`.
    pub fn record_jump_errors(&mut self, exact: &LindbladGenerator) -> Result<Vec<f64>> {
        if exact.jumps.len() != self.jumps.len() || exact.dim() != self.dim() {
            return Err(Error::Validation("generators describe different instances".into()));
        }
        let errors: Vec<f64> = exact
            .jumps
            .iter()
            .zip(&self.jumps)
            .map(|(a, b)| linalg::op_norm(&(a - b)))
            .collect();
        if let Some(info) = self.truncation.as_mut() {
            info.jump_errors = Some(errors.clone());
        }
        Ok(errors)
    }

    /// `-i[G, ρ] + Σ_a (L_a ρ L_a† - ½{L_a†L_a, ρ})`
    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut out = (&self.coherent * rho - rho * &self.coherent) * (-I);
        for l in &self.jumps {
            let ldl = l.adjoint() * l;
            out += l * rho * l.adjoint() - (&ldl * rho + rho * &ldl) * linalg::real(0.5);
        }
        out
    }

    /// `V = -½ Σ_a L_a†L_a`
    pub fn dissipative_part(&self) -> CMat {
        dissipative_part(&self.jumps, self.dim())
    }
}

fn dissipative_part(jumps: &[CMat], d: usize) -> CMat {
    let mut v = CMat::zeros(d, d);
    for l in jumps {
        v += l.adjoint() * l;
    }
    v * linalg::real(-0.5)
}

/// `W[k, l] = ĝ(E_k, E_l)` for an arbitrary kernel and weighting.
pub fn jump_weight_matrix<K: Kernel + ?Sized>(
    spec: &HamiltonianSpectrum,
    target: &TargetFunction,
    kernel: &K,
    weighting: Weighting,
) -> CMat {
    let e = spec.eigenvalues();
    let d = e.len();
    CMat::from_fn(d, d, |k, l| {
        linalg::real(crate::filter::g_hat_with(target, kernel, weighting, e[k], e[l]))
    })
}

/// `(L_a)_{kl} = ĝ(E_k, E_l) (U†AU)_{kl}` in the eigenbasis.
pub fn exact_jump(
    spec: &HamiltonianSpectrum,
    target: &TargetFunction,
    filter: &FilterParams,
    a: &CMat,
) -> Result<CMat> {
    exact_jump_weighted(spec, target, filter, Weighting::QuarticRoot, a)
}

pub fn exact_jump_weighted<K: Kernel + ?Sized>(
    spec: &HamiltonianSpectrum,
    target: &TargetFunction,
    kernel: &K,
    weighting: Weighting,
    a: &CMat,
) -> Result<CMat> {
    check_shape(spec, a)?;
    let w = jump_weight_matrix(spec, target, kernel, weighting);
    Ok(weighted_in_eigenbasis(spec, &w, a))
}

fn check_shape(spec: &HamiltonianSpectrum, a: &CMat) -> Result<()> {
    let d = spec.dim();
    if a.shape() != (d, d) {
        return Err(Error::Size(format!(
            "operator is {}x{}, spectrum has dimension {d}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn weighted_in_eigenbasis(spec: &HamiltonianSpectrum, weights: &CMat, a: &CMat) -> CMat {
    spec.from_eigenbasis(&linalg::hadamard(weights, &spec.to_eigenbasis(a)))
}

/// `G_{kl} = i tanh((Φ(E_k) - Φ(E_l))/4) (U†VU)_{kl}` with `V = -½ Σ L_a†L_a`.
pub fn exact_coherent(spec: &HamiltonianSpectrum, target: &TargetFunction, jumps: &[CMat]) -> Result<CMat> {
    for l in jumps {
        check_shape(spec, l)?;
    }
    let e = spec.eigenvalues();
    let d = e.len();
    let phis: Vec<f64> = e.iter().map(|&x| target.phi(x)).collect();
    let w = CMat::from_fn(d, d, |k, l| Complex64::new(0.0, ((phis[k] - phis[l]) / 4.0).tanh()));
    Ok(weighted_in_eigenbasis(spec, &w, &dissipative_part(jumps, d)))
}

/// `L̄_a = Σ_{|n|≤M} g_n e^{i n1 τ H} A e^{i n2 τ H}`, evaluated through the partial sum
/// at eigenvalue pairs.
pub fn truncated_jump(spec: &HamiltonianSpectrum, g_table: &FourierTable, a: &CMat) -> Result<CMat> {
    check_shape(spec, a)?;
    check_table(spec, g_table)?;
    let w = g_table.reconstruct_matrix(spec.eigenvalues());
    Ok(weighted_in_eigenbasis(spec, &w, a))
}

fn check_table(spec: &HamiltonianSpectrum, table: &FourierTable) -> Result<()> {
    let s = spec.energy_bound();
    if (table.half_period() - s).abs() > 1e-9 * s {
        return Err(Error::Validation(format!(
            "table half-period {} differs from spectrum bound {s}",
            table.half_period()
        )));
    }
    Ok(())
}

/// `e^{i n τ H}` for `n = -m..=m`, from powers of one dense exponential.
pub fn phase_unitaries(spec: &HamiltonianSpectrum, tau: f64, m: usize) -> Result<Vec<CMat>> {
    let h = spec.hamiltonian();
    let step = linalg::expm(&(h * Complex64::new(0.0, tau)))?;
    let back = step.adjoint();
    let d = spec.dim();
    let mut pos = vec![linalg::identity(d)];
    let mut neg = vec![linalg::identity(d)];
    for n in 1..=m {
        pos.push(&pos[n - 1] * &step);
        neg.push(&neg[n - 1] * &back);
    }
    let mut out: Vec<CMat> = neg.into_iter().skip(1).rev().collect();
    out.extend(pos);
    Ok(out)
}

/// [`truncated_jump`] as the literal sum of phase-conjugated products.
pub fn truncated_jump_literal(spec: &HamiltonianSpectrum, g_table: &FourierTable, a: &CMat) -> Result<CMat> {
    check_shape(spec, a)?;
    check_table(spec, g_table)?;
    let m = g_table.m();
    let u = phase_unitaries(spec, g_table.tau(), m)?;
    let mut out = CMat::zeros(spec.dim(), spec.dim());
    for (n1, n2, c) in g_table.iter() {
        let (i1, i2) = ((n1 + m as i64) as usize, (n2 + m as i64) as usize);
        out += &u[i1] * a * &u[i2] * c;
    }
    Ok(out)
}

/// `Ḡ = Σ_{|n|≤M'} w_n e^{i n1 τ H} V̄ e^{i n2 τ H}` with `V̄ = -½ Σ L̄_a†L̄_a`.
///
/// Returns the Hermitized operator and the Hermiticity residual measured before.
pub fn truncated_coherent(
    spec: &HamiltonianSpectrum,
    w_table: &FourierTable,
    truncated_jumps: &[CMat],
) -> Result<(CMat, f64)> {
    check_table(spec, w_table)?;
    for l in truncated_jumps {
        check_shape(spec, l)?;
    }
    let w = w_table.reconstruct_matrix(spec.eigenvalues());
    let g = weighted_in_eigenbasis(spec, &w, &dissipative_part(truncated_jumps, spec.dim()));
    let residual = linalg::hermiticity_defect(&g);
    Ok((linalg::hermitize(&g), residual))
}

/// Exact generator with the detailed-balance weighting.
pub fn build_exact(
    spec: &HamiltonianSpectrum,
    target: &TargetFunction,
    filter: &FilterParams,
    proposals: &JumpProposalSet,
) -> Result<LindbladGenerator> {
    build_exact_weighted(spec, target, filter, Weighting::QuarticRoot, proposals)
}

pub fn build_exact_weighted<K: Kernel + ?Sized>(
    spec: &HamiltonianSpectrum,
    target: &TargetFunction,
    kernel: &K,
    weighting: Weighting,
    proposals: &JumpProposalSet,
) -> Result<LindbladGenerator> {
    let w = jump_weight_matrix(spec, target, kernel, weighting);
    for a in proposals.proposals() {
        check_shape(spec, a)?;
    }
    let jumps: Vec<CMat> = proposals
        .proposals()
        .par_iter()
        .map(|a| weighted_in_eigenbasis(spec, &w, a))
        .collect();
    let coherent = linalg::hermitize(&exact_coherent(spec, target, &jumps)?);
    let state = StationaryState::for_target(spec, target)?;
    LindbladGenerator::from_parts(proposals.labels().to_vec(), jumps, coherent, state, Mode::Exact)
}

/// Truncated generator from the jump table (`M`) and coherent table (`M'`).
pub fn build_truncated(
    spec: &HamiltonianSpectrum,
    target: &TargetFunction,
    proposals: &JumpProposalSet,
    g_table: &FourierTable,
    w_table: &FourierTable,
) -> Result<LindbladGenerator> {
    check_table(spec, g_table)?;
    check_table(spec, w_table)?;
    let w = g_table.reconstruct_matrix(spec.eigenvalues());
    for a in proposals.proposals() {
        check_shape(spec, a)?;
    }
    let jumps: Vec<CMat> = proposals
        .proposals()
        .par_iter()
        .map(|a| weighted_in_eigenbasis(spec, &w, a))
        .collect();
    let (coherent, residual) = truncated_coherent(spec, w_table, &jumps)?;
    let state = StationaryState::for_target(spec, target)?;
    let mut gen = LindbladGenerator::from_parts(
        proposals.labels().to_vec(),
        jumps,
        coherent,
        state,
        Mode::Truncated,
    )?;
    gen.truncation = Some(TruncationInfo {
        m: g_table.m(),
        m_prime: w_table.m(),
        z_g: g_table.z(),
        z_w: w_table.z(),
        coherent_hermiticity_residual: residual,
        jump_errors: None,
    });
    Ok(gen)
}

/// Matrix of the Lindbladian acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Superoperator {
    matrix: CMat,
    dim: usize,
}

impl Superoperator {
    pub fn from_matrix(matrix: CMat) -> Result<Self> {
        let n = matrix.nrows();
        let dim = (n as f64).sqrt().round() as usize;
        if !matrix.is_square() || dim * dim != n {
            return Err(Error::Size("superoperator must be d²×d²".into()));
        }
        Ok(Self { matrix, dim })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            matrix: CMat::zeros(dim * dim, dim * dim),
            dim,
        }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        linalg::unvectorize(&(&self.matrix * linalg::vectorize(rho)), self.dim)
    }

    /// Heisenberg-picture map `L†`, the Hilbert–Schmidt adjoint.
    pub fn apply_adjoint(&self, x: &CMat) -> CMat {
        linalg::unvectorize(&(self.matrix.adjoint() * linalg::vectorize(x)), self.dim)
    }

    /// `max_j |(vec(I)† L)_j|`
    pub fn trace_preservation_residual(&self) -> f64 {
        let id = linalg::vectorize(&linalg::identity(self.dim));
        let row = id.adjoint() * &self.matrix;
        row.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }
}

/// Build the `d²×d²` matrix and check it against the direct formula on random states.
pub fn assemble_superoperator(gen: &LindbladGenerator) -> Result<Superoperator> {
    let d = gen.dim();
    if d > MAX_SUPEROPERATOR_DIM {
        return Err(Error::Size(format!(
            "superoperators are limited to dimension {MAX_SUPEROPERATOR_DIM}, got {d}"
        )));
    }
    let id = linalg::identity(d);
    let g = gen.coherent();
    let mut m = (id.kronecker(g) - g.transpose().kronecker(&id)) * (-I);
    for l in gen.jumps() {
        let ldl = l.adjoint() * l;
        m += l.conjugate().kronecker(l);
        m -= (id.kronecker(&ldl) + ldl.transpose().kronecker(&id)) * linalg::real(0.5);
    }
    let sup = Superoperator { matrix: m, dim: d };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let scale = 1.0 + linalg::frobenius(&sup.matrix);
    for _ in 0..20 {
        let rho = linalg::random_hermitian(&mut rng, d);
        let direct = gen.apply(&rho);
        let via = sup.apply(&rho);
        let err = linalg::max_abs(&(direct - via));
        if err > 1e-10 * scale * (1.0 + linalg::max_abs(&rho)) {
            return Err(Error::Internal(format!(
                "superoperator disagrees with the direct action ({err:e})"
            )));
        }
    }
    Ok(sup)
}

/// Write `i,j,re,im` rows for every entry.
pub fn matrix_to_csv(m: &CMat, comment: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(c) = comment {
        let _ = writeln!(s, "# {c}");
    }
    s.push_str("i,j,re,im\n");
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            let _ = writeln!(s, "{i},{j},{:e},{:e}", z.re, z.im);
        }
    }
    s
}

/// Dump a generator as a directory of matrix CSVs plus `manifest.txt`.
pub fn write_generator_dump(
    gen: &LindbladGenerator,
    dir: &Path,
    header: &str,
    extra: &[(&str, String)],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = format!("# {header}\n");
    let _ = writeln!(manifest, "mode = {}", gen.mode().as_str());
    let _ = writeln!(manifest, "dim = {}", gen.dim());
    let _ = writeln!(manifest, "vec_convention = column_stacking");
    if let Some(t) = gen.truncation() {
        let _ = writeln!(manifest, "M = {}", t.m);
        let _ = writeln!(manifest, "M_prime = {}", t.m_prime);
    }
    for (k, v) in extra {
        let _ = writeln!(manifest, "{k} = {v}");
    }
    for (idx, (label, l)) in gen.labels().iter().zip(gen.jumps()).enumerate() {
        let _ = writeln!(manifest, "jump_{idx} = {label}");
        fs::write(dir.join(format!("jump_{idx}.csv")), matrix_to_csv(l, Some(header)))?;
    }
    fs::write(dir.join("coherent.csv"), matrix_to_csv(gen.coherent(), Some(header)))?;
    fs::write(dir.join("sigma.csv"), matrix_to_csv(&gen.sigma(), Some(header)))?;
    fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

/// The `I` operator scaled, used as a trivial jump in tests and examples.
pub fn scaled_identity(d: usize, s: f64) -> CMat {
    linalg::identity(d) * linalg::real(s)
}
