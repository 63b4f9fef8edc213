//! Falsifiable checks on generators and the report that collects them.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::FourierTable;
use crate::generator::{phase_unitaries, LindbladGenerator, Mode, StationaryState, Superoperator};
use crate::linalg::{self, CMat};
use crate::spectral::HamiltonianSpectrum;

/// Thresholds used to turn residuals into pass/fail flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub kms_jump: f64,
    pub kms_adjoint: f64,
    /// relative to `‖L‖_F`
    pub stationarity: f64,
    pub choi: f64,
    pub trace_preservation: f64,
    pub block_encoding: f64,
    /// relative slack on measured-versus-bound comparisons
    pub bound_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            kms_jump: 1e-9,
            kms_adjoint: 1e-8,
            stationarity: 1e-9,
            choi: 1e-9,
            trace_preservation: 1e-10,
            block_encoding: 1e-9,
            bound_slack: 1e-6,
        }
    }
}

/// `‖σ^{-1/2} L σ^{1/2} - L†‖ / max(1, ‖L‖)` in operator norm.
pub fn check_kms_condition(l: &CMat, sigma: &StationaryState) -> Result<f64> {
    if l.shape() != (sigma.dim(), sigma.dim()) {
        return Err(Error::Size("jump and state dimensions differ".into()));
    }
    let lhs = sigma.power(-0.5) * l * sigma.power(0.5);
    Ok(linalg::op_norm(&(lhs - l.adjoint())) / linalg::op_norm(l).max(1.0))
}

/// [`check_kms_condition`] for a state given as a matrix.
pub fn check_kms_condition_matrix(l: &CMat, sigma: &CMat) -> Result<f64> {
    check_kms_condition(l, &StationaryState::from_matrix(sigma)?)
}

/// `max |⟨X, L†Y⟩ - ⟨L†X, Y⟩|` in the KMS inner product `Tr[X† σ^{1/2} Y σ^{1/2}]`,
/// over random Hermitian pairs, normalized by `max(1, ‖L‖_F) ‖X‖_F ‖Y‖_F`.
pub fn check_kms_self_adjoint(
    superop: &Superoperator,
    sigma: &StationaryState,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials < 10 {
        return Err(Error::Parameter(format!("at least 10 trials are required, got {trials}")));
    }
    let d = superop.dim();
    if sigma.dim() != d {
        return Err(Error::Size("state and superoperator dimensions differ".into()));
    }
    let root = sigma.power(0.5);
    let inner = |x: &CMat, y: &CMat| -> Complex64 { linalg::trace(&(x.adjoint() * &root * y * &root)) };
    let scale = linalg::frobenius(superop.matrix()).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x = linalg::random_hermitian(&mut rng, d);
        let y = linalg::random_hermitian(&mut rng, d);
        let lhs = inner(&x, &superop.apply_adjoint(&y));
        let rhs = inner(&superop.apply_adjoint(&x), &y);
        let norm = scale * linalg::frobenius(&x) * linalg::frobenius(&y);
        worst = worst.max((lhs - rhs).norm() / norm);
    }
    Ok(worst)
}

/// `‖L(σ)‖_F / ‖L‖_F`
pub fn stationarity_residual(superop: &Superoperator, sigma: &CMat) -> f64 {
    let scale = linalg::frobenius(superop.matrix());
    if scale == 0.0 {
        return 0.0;
    }
    linalg::frobenius(&superop.apply(sigma)) / scale
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CptpCheck {
    pub t: f64,
    pub min_choi_eigenvalue: f64,
    pub trace_residual: f64,
}

/// Choi matrix of `e^{tL}` with `J = Σ_{ij} |i⟩⟨j| ⊗ e^{tL}(|i⟩⟨j|)`.
pub fn choi_matrix(superop: &Superoperator, t: f64) -> Result<CMat> {
    let e = linalg::expm(&(superop.matrix() * linalg::real(t)))?;
    Ok(choi_of_channel(&e, superop.dim()))
}

fn choi_of_channel(e: &CMat, d: usize) -> CMat {
    CMat::from_fn(d * d, d * d, |r, s| {
        let (i, a) = (r / d, r % d);
        let (j, b) = (s / d, s % d);
        e[(a + b * d, i + j * d)]
    })
}

/// Minimum Choi eigenvalue and `max |vec(I)† e^{tL} - vec(I)†|`.
pub fn check_cptp(superop: &Superoperator, t: f64) -> Result<CptpCheck> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Parameter(format!("time must be >= 0, got {t}")));
    }
    let d = superop.dim();
    let e = linalg::expm(&(superop.matrix() * linalg::real(t)))?;
    let choi = choi_of_channel(&e, d);
    let min_choi_eigenvalue = linalg::eigvalsh(&choi).first().copied().unwrap_or(0.0);
    let id = linalg::vectorize(&linalg::identity(d));
    let row = id.adjoint() * &e - id.adjoint();
    let trace_residual = row.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    Ok(CptpCheck {
        t,
        min_choi_eigenvalue,
        trace_residual,
    })
}

/// Result of the matrix-level LCU check for one jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockEncodingCheck {
    /// `‖block - L̄/α‖`
    pub deviation: f64,
    /// normalization `α_L = Z_g`
    pub alpha: f64,
    /// qubits of the `(n1, n2)` index register
    pub index_qubits: usize,
    /// max deviation of either preparation matrix from unitarity
    pub prep_unitarity_residual: f64,
}

pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Ancilla count `2⌈log₂(2M+1)⌉ + ⌈log₂|𝔄|⌉` for the jump block encoding.
pub fn jump_ancilla_qubits(m: usize, n_jumps: usize) -> usize {
    2 * ceil_log2(2 * m + 1) + ceil_log2(n_jumps)
}

/// Unitary whose first column is the unit vector `p` (Householder reflection times a phase).
pub fn preparation_unitary(p: &[Complex64]) -> Result<CMat> {
    let n = p.len();
    let norm: f64 = p.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n == 0 || (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!("preparation vector must be unit norm, got {norm}")));
    }
    let phase = if p[0].norm() > 0.0 { p[0] / p[0].norm() } else { linalg::ONE };
    let mut w = linalg::CVec::from_column_slice(p);
    w[0] -= phase;
    let wn = w.norm_squared();
    let id = linalg::identity(n);
    if wn < 1e-30 {
        return Ok(id * phase);
    }
    let q = id - (&w * w.adjoint()) * linalg::real(2.0 / wn);
    Ok(q * phase)
}

/// Gram-matrix defect of the leading columns against the full matrix.
fn unitarity_residual(u: &CMat) -> f64 {
    let cols = u.ncols().min(16);
    let gram = u.adjoint() * u.columns(0, cols);
    let id = CMat::identity(u.ncols(), cols);
    linalg::max_abs(&(gram - id))
}

/// Check that `(Prep_L† ⊗ I) SELECT (Prep_R ⊗ I)` has top-left block `L̄ / Z_g`.
///
/// The left preparation carries amplitudes `conj(√c)/√Z`, the right one `√c/√Z`, so the
/// block reproduces `c` itself rather than `|c|`.
pub fn verify_block_encoding(
    g_table: &FourierTable,
    spec: &HamiltonianSpectrum,
    a: &CMat,
    l_bar: &CMat,
) -> Result<BlockEncodingCheck> {
    let z = g_table.z();
    if z.is_nan() || z <= 0.0 {
        return Err(Error::Validation("table has zero l1 norm".into()));
    }
    let d = spec.dim();
    if a.shape() != (d, d) || l_bar.shape() != (d, d) {
        return Err(Error::Size("operator dimensions differ from the spectrum".into()));
    }
    let m = g_table.m();
    let side = 2 * m + 1;
    let q = ceil_log2(side);
    let width = 1usize << q;
    let k = width * width;
    let sqrt_z = z.sqrt();
    let mut left = vec![linalg::ZERO; k];
    let mut right = vec![linalg::ZERO; k];
    for (n1, n2, c) in g_table.iter() {
        let idx = (n1 + m as i64) as usize * width + (n2 + m as i64) as usize;
        let root = c.sqrt();
        left[idx] = root.conj() / sqrt_z;
        right[idx] = root / sqrt_z;
    }
    let prep_l = preparation_unitary(&left)?;
    let prep_r = preparation_unitary(&right)?;
    let prep_unitarity_residual = unitarity_residual(&prep_l).max(unitarity_residual(&prep_r));

    let phases = phase_unitaries(spec, g_table.tau(), m)?;
    // top-left block: Σ_n conj(Prep_L[n,0]) Prep_R[n,0] U_n
    let mut block = CMat::zeros(d, d);
    for i1 in 0..side {
        for i2 in 0..side {
            let idx = i1 * width + i2;
            let amp = prep_l[(idx, 0)].conj() * prep_r[(idx, 0)];
            if amp == linalg::ZERO {
                continue;
            }
            block += &phases[i1] * a * &phases[i2] * amp;
        }
    }
    let deviation = linalg::op_norm(&(block - l_bar * linalg::real(1.0 / z)));
    Ok(BlockEncodingCheck {
        deviation,
        alpha: z,
        index_qubits: 2 * q,
        prep_unitarity_residual,
    })
}

/// Analytic inputs for [`check_truncation_bounds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationBounds {
    /// tail bound for the jump table at `M`
    pub jump_tail: f64,
    /// tail bound for the coherent table at `M'`
    pub coherent_tail: f64,
}

/// Measured errors paired with their bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationCheck {
    /// `(‖L_a - L̄_a‖, bound)` per jump
    pub jumps: Vec<(f64, f64)>,
    /// `(‖G - Ḡ‖, bound)`
    pub coherent: (f64, f64),
    pub violation: bool,
}

/// Compare a truncated generator with the exact one.
///
/// The coherent bound is `‖V‖ tail_w + Z_w · ½ Σ_a (‖L_a‖ + ‖L̄_a‖) ‖L_a - L̄_a‖`
/// evaluated with measured norms.
pub fn check_truncation_bounds(
    exact: &LindbladGenerator,
    truncated: &LindbladGenerator,
    bounds: &TruncationBounds,
    slack: f64,
) -> Result<TruncationCheck> {
    if exact.mode() != Mode::Exact || truncated.mode() != Mode::Truncated {
        return Err(Error::Validation("expected an exact and a truncated generator".into()));
    }
    if exact.dim() != truncated.dim() || exact.labels() != truncated.labels() {
        return Err(Error::Validation("generators describe different instances".into()));
    }
    let info = truncated
        .truncation()
        .ok_or_else(|| Error::Validation("truncated generator lacks truncation data".into()))?;
    let mut jumps = Vec::with_capacity(exact.jumps().len());
    let mut propagated = 0.0;
    for (l, lb) in exact.jumps().iter().zip(truncated.jumps()) {
        let err = linalg::op_norm(&(l - lb));
        jumps.push((err, bounds.jump_tail));
        propagated += 0.5 * (linalg::op_norm(l) + linalg::op_norm(lb)) * err;
    }
    let v_norm = linalg::op_norm(&exact.dissipative_part());
    let coherent_bound = v_norm * bounds.coherent_tail + info.z_w * propagated;
    let coherent_err = linalg::op_norm(&(exact.coherent() - truncated.coherent()));
    let exceeds = |(m, b): (f64, f64)| m > b * (1.0 + slack);
    let violation = jumps.iter().copied().any(exceeds) || exceeds((coherent_err, coherent_bound));
    Ok(TruncationCheck {
        jumps,
        coherent: (coherent_err, coherent_bound),
        violation,
    })
}

/// One pass/fail line of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl CheckOutcome {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            pass: value <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            pass: value >= limit,
        }
    }
}

/// Checks recorded for the truncated generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedChecks {
    pub cptp: Vec<CptpCheck>,
    pub coherent_hermiticity_residual: f64,
    pub bounds: TruncationCheck,
}

/// Residuals of every check plus descriptive metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub manifest: String,
    pub info: Vec<(String, String)>,
    pub tolerances: Tolerances,
    pub kms_jump_residuals: Vec<f64>,
    pub kms_adjoint_residual: f64,
    pub stationarity_residual: f64,
    pub cptp: Vec<CptpCheck>,
    pub block_encoding_deviation: Option<Vec<f64>>,
    pub truncated: Option<TruncatedChecks>,
    /// further checks appended as-is
    pub extra: Vec<CheckOutcome>,
}

impl VerificationReport {
    pub fn cptp_min_choi_eigenvalue(&self) -> f64 {
        self.cptp.iter().map(|c| c.min_choi_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    pub fn trace_preservation_residual(&self) -> f64 {
        self.cptp.iter().map(|c| c.trace_residual).fold(0.0, f64::max)
    }

    pub fn checks(&self) -> Vec<CheckOutcome> {
        let t = &self.tolerances;
        let mut out = Vec::new();
        for (label, r) in self.labels().iter().zip(&self.kms_jump_residuals) {
            out.push(CheckOutcome::at_most(format!("kms_jump[{label}]"), *r, t.kms_jump));
        }
        out.push(CheckOutcome::at_most("kms_adjoint", self.kms_adjoint_residual, t.kms_adjoint));
        out.push(CheckOutcome::at_most("stationarity", self.stationarity_residual, t.stationarity));
        for c in &self.cptp {
            out.push(CheckOutcome::at_least(format!("choi_min_eig[t={}]", c.t), c.min_choi_eigenvalue, -t.choi));
            out.push(CheckOutcome::at_most(format!("trace_preservation[t={}]", c.t), c.trace_residual, t.trace_preservation));
        }
        if let Some(devs) = &self.block_encoding_deviation {
            for (label, d) in self.labels().iter().zip(devs) {
                out.push(CheckOutcome::at_most(format!("block_encoding[{label}]"), *d, t.block_encoding));
            }
        }
        if let Some(tr) = &self.truncated {
            for c in &tr.cptp {
                out.push(CheckOutcome::at_least(
                    format!("truncated_choi_min_eig[t={}]", c.t),
                    c.min_choi_eigenvalue,
                    -t.choi,
                ));
                out.push(CheckOutcome::at_most(
                    format!("truncated_trace_preservation[t={}]", c.t),
                    c.trace_residual,
                    t.trace_preservation,
                ));
            }
            for (label, (m, b)) in self.labels().iter().zip(&tr.bounds.jumps) {
                out.push(CheckOutcome::at_most(format!("jump_truncation[{label}]"), *m, b * (1.0 + t.bound_slack)));
            }
            let (m, b) = tr.bounds.coherent;
            out.push(CheckOutcome::at_most("coherent_truncation", m, b * (1.0 + t.bound_slack)));
        }
        out.extend(self.extra.iter().cloned());
        out
    }

    fn labels(&self) -> Vec<String> {
        self.info
            .iter()
            .find(|(k, _)| k == "jump_labels")
            .map(|(_, v)| v.split(';').map(str::to_string).collect())
            .unwrap_or_else(|| (0..self.kms_jump_residuals.len()).map(|i| i.to_string()).collect())
    }

    pub fn pass(&self) -> bool {
        self.checks().iter().all(|c| c.pass)
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = format!("# {}\n", self.manifest);
        for (k, v) in &self.info {
            let _ = writeln!(s, "{k} = {v}");
        }
        for c in self.checks() {
            let _ = writeln!(
                s,
                "{} = {:.6e} (limit {:.3e}) {}",
                c.name,
                c.value,
                c.limit,
                if c.pass { "pass" } else { "FAIL" }
            );
        }
        let _ = writeln!(s, "pass = {}", self.pass());
        s
    }

    /// `check,value,limit,pass` rows.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# {}\ncheck,value,limit,pass\n", self.manifest);
        for c in self.checks() {
            let _ = writeln!(s, "{},{:e},{:e},{}", c.name, c.value, c.limit, c.pass);
        }
        s
    }
}

/// Run the exact-generator checks: KMS per jump, KMS adjointness, stationarity, CPTP.
pub fn verify_exact(
    gen: &LindbladGenerator,
    superop: &Superoperator,
    times: &[f64],
    trials: usize,
    seed: u64,
) -> Result<(Vec<f64>, f64, f64, Vec<CptpCheck>)> {
    let kms = gen
        .jumps()
        .iter()
        .map(|l| check_kms_condition(l, gen.state()))
        .collect::<Result<Vec<_>>>()?;
    let adjoint = check_kms_self_adjoint(superop, gen.state(), trials, seed)?;
    let stat = stationarity_residual(superop, &gen.sigma());
    let cptp = times.iter().map(|&t| check_cptp(superop, t)).collect::<Result<Vec<_>>>()?;
    Ok((kms, adjoint, stat, cptp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{g_hat, FilterParams};
    use crate::fourier::{default_grid, fourier_coefficients};
    use crate::generator::{assemble_superoperator, build_exact, truncated_jump};
    use crate::linalg::{real, ONE};
    use crate::spectral::{build_chain_hamiltonian, diagonalize, pauli_jump_set, pauli_string, ChainModel, Pauli};
    use crate::statefn::{constant_phi, gibbs_phi};

    #[test]
    fn kms_trivial_for_maximally_mixed() {
        let st = StationaryState::from_log_weights(&[0.0; 2], linalg::identity(2)).unwrap();
        assert!(check_kms_condition(&Pauli::X.matrix(), &st).unwrap() < 1e-15);
        assert!(check_kms_condition_matrix(&Pauli::X.matrix(), &CMat::zeros(2, 2)).is_err());
    }

    #[test]
    fn zero_superoperator_checks() {
        let sup = Superoperator::zero(2);
        let st = StationaryState::from_log_weights(&[0.0, -1.0], linalg::identity(2)).unwrap();
        assert_eq!(check_kms_self_adjoint(&sup, &st, 10, 1).unwrap(), 0.0);
        assert!(check_kms_self_adjoint(&sup, &st, 5, 1).is_err());
        let c = check_cptp(&sup, 0.0).unwrap();
        assert!(c.min_choi_eigenvalue >= -1e-12);
        assert!(c.trace_residual < 1e-15);
        // channel = identity: Choi = |Ω⟩⟨Ω| with |Ω⟩ = Σ|ii⟩
        let j = choi_matrix(&sup, 0.0).unwrap();
        assert!((linalg::trace(&j) - real(2.0)).norm() < 1e-14);
        assert!((j[(0, 3)] - ONE).norm() < 1e-14);
    }

    #[test]
    fn ancilla_accounting() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(17), 5);
        assert_eq!(ceil_log2(16), 4);
        assert_eq!(jump_ancilla_qubits(8, 6), 2 * 5 + 3);
    }

    #[test]
    fn householder_preparation() {
        let p = vec![real(0.0), linalg::c(0.6, 0.0), linalg::c(0.0, 0.8), real(0.0)];
        let u = preparation_unitary(&p).unwrap();
        assert!(linalg::max_abs(&(u.adjoint() * &u - linalg::identity(4))) < 1e-14);
        for i in 0..4 {
            assert!((u[(i, 0)] - p[i]).norm() < 1e-14);
        }
        assert!(preparation_unitary(&[real(0.5)]).is_err());
    }

    #[test]
    fn trivial_block_encodings() {
        let spec = diagonalize(&Pauli::Z.matrix(), 1.5).unwrap();
        let tau = std::f64::consts::PI / spec.energy_bound();
        let a = Pauli::X.matrix();
        let one = FourierTable::single(tau, ONE);
        let chk = verify_block_encoding(&one, &spec, &a, &a).unwrap();
        assert!(chk.deviation < 1e-14);
        assert_eq!(chk.alpha, 1.0);

        let t = constant_phi(spec.energy_bound(), 2).unwrap();
        let p = FilterParams::for_target(&t);
        let table = fourier_coefficients(|x, y| linalg::real(g_hat(&t, &p, x, y)), spec.energy_bound(), 2, 64).unwrap();
        let lb = truncated_jump(&spec, &table, &a).unwrap();
        let chk = verify_block_encoding(&table, &spec, &a, &lb).unwrap();
        assert!((chk.alpha - (-1.0f64).exp()).abs() < 1e-13);
        assert!(chk.deviation < 1e-12);
    }

    #[test]
    fn complex_coefficients_need_split_preparation() {
        let h = build_chain_hamiltonian(&ChainModel::TransverseFieldIsing { j: 1.0, h: 0.9 }, 2).unwrap();
        let spec = diagonalize(&h, 1.3).unwrap();
        let t = gibbs_phi(1.0, spec.max_abs_energy(), spec.energy_bound(), 2).unwrap();
        let w = fourier_coefficients(|x, y| crate::filter::w_hat(&t, x, y), spec.energy_bound(), 4, default_grid(4)).unwrap();
        let a = pauli_string(&[(Pauli::X, 0)], 2);
        let lb = truncated_jump(&spec, &w, &a).unwrap();
        let chk = verify_block_encoding(&w, &spec, &a, &lb).unwrap();
        assert!(chk.deviation < 1e-10, "{}", chk.deviation);
        assert!(chk.prep_unitarity_residual < 1e-12);
    }

    #[test]
    fn exact_generator_passes_and_random_coherent_fails() {
        let h = build_chain_hamiltonian(&ChainModel::TransverseFieldIsing { j: 1.0, h: 0.9 }, 2).unwrap();
        let spec = diagonalize(&h, 1.3).unwrap();
        let t = gibbs_phi(1.0, spec.max_abs_energy(), spec.energy_bound(), 2).unwrap();
        let p = FilterParams::for_target(&t);
        let gen = build_exact(&spec, &t, &p, &pauli_jump_set(2).unwrap()).unwrap();
        let sup = assemble_superoperator(&gen).unwrap();
        let (kms, adj, stat, cptp) = verify_exact(&gen, &sup, &[0.1, 1.0], 20, 7).unwrap();
        assert!(kms.iter().all(|&r| r < 1e-9));
        assert!(adj < 1e-8);
        assert!(stat < 1e-9);
        assert!(cptp.iter().all(|c| c.min_choi_eigenvalue > -1e-9 && c.trace_residual < 1e-10));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bad = gen.clone().with_coherent(linalg::random_hermitian(&mut rng, 4)).unwrap();
        let bad_sup = assemble_superoperator(&bad).unwrap();
        assert!(check_kms_self_adjoint(&bad_sup, bad.state(), 20, 7).unwrap() > 1e-3);
    }
}
