//! Time evolution under `e^{tL}`, convergence diagnostics, window-state errors and
//! microcanonical/Gibbs comparisons.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{StationaryState, Superoperator};
use crate::linalg::{self, CMat};
use crate::spectral::{pauli_string, HamiltonianSpectrum, Pauli};
use crate::statefn::{TargetFunction, WindowSpec};

/// Tolerance on positivity and trace of input states.
pub const STATE_TOLERANCE: f64 = 1e-10;

fn check_density(rho: &CMat, d: usize) -> Result<()> {
    if rho.shape() != (d, d) {
        return Err(Error::Size(format!(
            "state is {}x{}, expected {d}x{d}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if linalg::hermiticity_defect(rho) > STATE_TOLERANCE {
        return Err(Error::Validation("state is not Hermitian".into()));
    }
    let tr = linalg::trace(rho);
    if (tr.re - 1.0).abs() > STATE_TOLERANCE || tr.im.abs() > STATE_TOLERANCE {
        return Err(Error::Validation(format!("state has trace {tr}")));
    }
    let min = linalg::eigvalsh(rho).first().copied().unwrap_or(0.0);
    if min < -STATE_TOLERANCE {
        return Err(Error::Validation(format!("state has negative eigenvalue {min:e}")));
    }
    Ok(())
}

/// `e^{tL}(ρ)` and the Hermiticity/trace drift measured before clean-up.
pub fn propagate_with_drift(superop: &Superoperator, rho0: &CMat, t: f64) -> Result<(CMat, f64)> {
    check_density(rho0, superop.dim())?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Parameter(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok((rho0.clone(), 0.0));
    }
    let e = linalg::expm(&(superop.matrix() * linalg::real(t)))?;
    let mut rho = linalg::unvectorize(&(e * linalg::vectorize(rho0)), superop.dim());
    let tr = linalg::trace(&rho);
    let drift = linalg::hermiticity_defect(&rho).max((tr - linalg::ONE).norm());
    if drift > 1e-12 {
        rho = linalg::hermitize(&rho);
        let tr = linalg::trace(&rho).re;
        rho /= linalg::real(tr);
    }
    Ok((rho, drift))
}

pub fn propagate(superop: &Superoperator, rho0: &CMat, t: f64) -> Result<CMat> {
    propagate_with_drift(superop, rho0, t).map(|(rho, _)| rho)
}

/// `½ Σ |λ_i(ρ - σ)|`
pub fn trace_distance(rho: &CMat, sigma: &CMat) -> f64 {
    0.5 * linalg::eigvalsh(&(rho - sigma)).iter().map(|x| x.abs()).sum::<f64>()
}

/// Named Hermitian observable.
#[derive(Debug, Clone)]
pub struct Observable {
    pub label: String,
    pub matrix: CMat,
}

impl Observable {
    /// Parse `H` (the Hamiltonian), `I`, or a Pauli string such as `Z1Z2` / `X3`
    /// with 1-based site numbers.
    pub fn parse(label: &str, n_sites: usize, hamiltonian: &CMat) -> Result<Self> {
        let text = label.trim();
        let d = 1usize << n_sites;
        if text == "H" {
            return Ok(Self {
                label: text.into(),
                matrix: hamiltonian.clone(),
            });
        }
        if text == "I" {
            return Ok(Self {
                label: text.into(),
                matrix: linalg::identity(d),
            });
        }
        let bad = || Error::Parse(format!("cannot parse observable `{label}`"));
        let mut ops = Vec::new();
        let mut chars = text.chars().peekable();
        while let Some(ch) = chars.next() {
            let p = match ch {
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                _ => return Err(bad()),
            };
            let mut digits = String::new();
            while let Some(c) = chars.peek().copied().filter(char::is_ascii_digit) {
                digits.push(c);
                chars.next();
            }
            let site: usize = digits.parse().map_err(|_| bad())?;
            if site == 0 || site > n_sites {
                return Err(Error::Parse(format!(
                    "site {site} in `{label}` outside 1..={n_sites}"
                )));
            }
            if ops.iter().any(|&(_, s)| s == site - 1) {
                return Err(Error::Parse(format!("site {site} repeated in `{label}`")));
            }
            ops.push((p, site - 1));
        }
        if ops.is_empty() {
            return Err(bad());
        }
        Ok(Self {
            label: text.into(),
            matrix: pauli_string(&ops, n_sites),
        })
    }

    pub fn expectation(&self, rho: &CMat) -> f64 {
        linalg::trace(&(&self.matrix * rho)).re
    }
}

/// Distances and observables along `e^{tL}(ρ₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial_state_label: String,
    pub times: Vec<f64>,
    /// distance to the target state `σ`
    pub trace_distances: Vec<f64>,
    /// distance to the generator's own kernel state, when supplied
    pub kernel_distances: Option<Vec<f64>>,
    pub observables: Vec<(String, Vec<f64>)>,
    /// largest Hermiticity/trace drift seen before clean-up
    pub max_drift: f64,
}

impl Trajectory {
    /// Whether the distance to `σ` never grows by more than `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.trace_distances.windows(2).all(|w| w[1] <= w[0] + slack)
    }

    pub fn final_distance(&self) -> f64 {
        self.trace_distances.last().copied().unwrap_or(f64::NAN)
    }

    /// `t,trace_distance[,kernel_distance],<observables...>`
    pub fn to_csv(&self, manifest: &str) -> String {
        let mut s = format!("# {manifest}\n# initial_state = {}\n", self.initial_state_label);
        s.push_str("t,trace_distance");
        if self.kernel_distances.is_some() {
            s.push_str(",kernel_distance");
        }
        for (name, _) in &self.observables {
            let _ = write!(s, ",{name}");
        }
        s.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            let _ = write!(s, "{t},{:e}", self.trace_distances[i]);
            if let Some(k) = &self.kernel_distances {
                let _ = write!(s, ",{:e}", k[i]);
            }
            for (_, v) in &self.observables {
                let _ = write!(s, ",{:e}", v[i]);
            }
            s.push('\n');
        }
        s
    }
}

/// Evolve `rho0` to each time in `times` (sorted ascending, starting at or after 0).
pub fn simulate(
    superop: &Superoperator,
    rho0: &CMat,
    label: &str,
    times: &[f64],
    sigma: &CMat,
    kernel: Option<&CMat>,
    observables: &[Observable],
) -> Result<Trajectory> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("times must be sorted ascending".into()));
    }
    let mut traj = Trajectory {
        initial_state_label: label.into(),
        times: times.to_vec(),
        trace_distances: Vec::with_capacity(times.len()),
        kernel_distances: kernel.map(|_| Vec::with_capacity(times.len())),
        observables: observables.iter().map(|o| (o.label.clone(), Vec::new())).collect(),
        max_drift: 0.0,
    };
    for &t in times {
        let (rho, drift) = propagate_with_drift(superop, rho0, t)?;
        traj.max_drift = traj.max_drift.max(drift);
        traj.trace_distances.push(trace_distance(&rho, sigma));
        if let (Some(k), Some(out)) = (kernel, traj.kernel_distances.as_mut()) {
            out.push(trace_distance(&rho, k));
        }
        for (o, (_, series)) in observables.iter().zip(traj.observables.iter_mut()) {
            series.push(o.expectation(&rho));
        }
    }
    Ok(traj)
}

/// Kernel dimension and spectral gap of a superoperator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDiagnostics {
    pub kernel_dim: usize,
    /// `-max Re λ` over eigenvalues outside the kernel; 0 if there are none
    pub spectral_gap: f64,
    /// largest real part of any eigenvalue
    pub max_real_part: f64,
}

pub fn lindbladian_spectrum_diagnostics(superop: &Superoperator) -> Result<SpectrumDiagnostics> {
    let ev = linalg::eigenvalues(superop.matrix())?;
    let kernel_dim = ev.iter().filter(|z| z.norm() <= 1e-9).count();
    let spectral_gap = ev
        .iter()
        .filter(|z| z.norm() > 1e-9)
        .map(|z| -z.re)
        .fold(f64::INFINITY, f64::min);
    let max_real_part = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(SpectrumDiagnostics {
        kernel_dim,
        spectral_gap: if spectral_gap.is_finite() { spectral_gap } else { 0.0 },
        max_real_part,
    })
}

/// Trace-one Hermitian state spanning the numerical null space (smallest singular vector).
pub fn kernel_state(superop: &Superoperator) -> Result<CMat> {
    let svd = superop.matrix().clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numeric("singular value decomposition failed".into()))?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Numeric("empty superoperator".into()))?;
    let v = v_t.row(idx).adjoint();
    let rho = linalg::hermitize(&linalg::unvectorize(&v, superop.dim()));
    let tr = linalg::trace(&rho).re;
    if tr.abs() < 1e-14 {
        return Err(Error::Numeric("null vector is traceless".into()));
    }
    Ok(rho / linalg::real(tr))
}

/// Error between the smoothed window state `f(H)/Tr f(H)` and the sharp window state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicrocanonicalReport {
    /// trace distance `½‖ρ_sharp - σ‖₁`
    pub exact_distance: f64,
    /// levels in `[b, c]`
    pub in_window: usize,
    /// levels in the smoothing ramps `(b-δ, b) ∪ (c, c+δ)`
    pub edge_levels: usize,
    /// levels at the floor weight `η`
    pub far_levels: usize,
    /// `η · far_levels`
    pub eta_mass: f64,
    /// `(η · far + edge) / in_window`
    pub bound_sum: f64,
    /// `exact_distance / bound_sum`
    pub kappa: f64,
    pub degenerate: bool,
}

pub fn microcanonical_error(
    spec: &HamiltonianSpectrum,
    window: &WindowSpec,
    target: &TargetFunction,
) -> Result<MicrocanonicalReport> {
    window.validate()?;
    let e = spec.eigenvalues();
    let in_window = e.iter().filter(|&&x| window.contains(x)).count();
    let edge_levels = e
        .iter()
        .filter(|&&x| (x > window.b - window.delta && x < window.b) || (x > window.c && x < window.c + window.delta))
        .count();
    let far_levels = e.len() - in_window - edge_levels;
    let eta_mass = window.eta * far_levels as f64;
    if in_window == 0 {
        return Ok(MicrocanonicalReport {
            exact_distance: f64::NAN,
            in_window,
            edge_levels,
            far_levels,
            eta_mass,
            bound_sum: f64::NAN,
            kappa: f64::NAN,
            degenerate: true,
        });
    }
    let smooth = StationaryState::for_target(spec, target)?.probabilities();
    let sharp = 1.0 / in_window as f64;
    // both states are diagonal in the same basis
    let exact_distance = 0.5
        * e.iter()
            .zip(&smooth)
            .map(|(&x, &p)| (if window.contains(x) { sharp } else { 0.0 } - p).abs())
            .sum::<f64>();
    let bound_sum = (eta_mass + edge_levels as f64) / in_window as f64;
    let kappa = if bound_sum > 0.0 { exact_distance / bound_sum } else { 0.0 };
    Ok(MicrocanonicalReport {
        exact_distance,
        in_window,
        edge_levels,
        far_levels,
        eta_mass,
        bound_sum,
        kappa,
        degenerate: false,
    })
}

/// Sharp window state: uniform over eigenvectors with energy in `[b, c]`.
pub fn sharp_window_state(spec: &HamiltonianSpectrum, b: f64, c: f64) -> Option<CMat> {
    let e = spec.eigenvalues();
    let n = e.iter().filter(|&&x| b <= x && x <= c).count();
    if n == 0 {
        return None;
    }
    let w: Vec<f64> = e
        .iter()
        .map(|&x| if b <= x && x <= c { 1.0 / n as f64 } else { 0.0 })
        .collect();
    Some(spec.function_of(&w))
}

/// Gibbs state `e^{-βH}/Z`.
pub fn gibbs_state(spec: &HamiltonianSpectrum, beta: f64) -> Result<CMat> {
    let logs: Vec<f64> = spec.eigenvalues().iter().map(|e| -beta * e).collect();
    Ok(StationaryState::from_log_weights(&logs, spec.eigenbasis().clone())?.matrix())
}

/// Four times the level spacing around `energy`, ignoring degeneracies.
pub fn default_window_width(spec: &HamiltonianSpectrum, energy: f64) -> f64 {
    let mut levels: Vec<f64> = Vec::new();
    for &x in spec.eigenvalues() {
        if levels.last().is_none_or(|&l| x - l > 1e-9) {
            levels.push(x);
        }
    }
    if levels.len() < 2 {
        return 1.0;
    }
    let nearest = levels
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - energy).abs().total_cmp(&(b.1 - energy).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let lo = nearest.saturating_sub(1);
    let hi = (nearest + 1).min(levels.len() - 1);
    4.0 * (levels[hi] - levels[lo]) / (hi - lo) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub observable: String,
    pub gibbs: f64,
    pub window: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleComparison {
    pub beta: f64,
    pub mean_energy: f64,
    /// final window width after any widening
    pub width: f64,
    pub in_window: usize,
    pub rows: Vec<EnsembleRow>,
}

impl EnsembleComparison {
    pub fn to_csv(&self, manifest: &str) -> String {
        let mut s = format!(
            "# {manifest}\n# beta = {}\n# mean_energy = {:e}\n# width = {:e}\n# in_window = {}\n",
            self.beta, self.mean_energy, self.width, self.in_window
        );
        s.push_str("observable,gibbs,window,difference\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:e},{:e},{:e}", r.observable, r.gibbs, r.window, r.difference);
        }
        s
    }
}

/// Compare Gibbs expectations with a sharp window centred at the Gibbs mean energy.
/// An empty window is widened by doubling.
pub fn ensemble_comparison(
    spec: &HamiltonianSpectrum,
    beta: f64,
    window_width: Option<f64>,
    observables: &[Observable],
) -> Result<EnsembleComparison> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::Parameter(format!("beta must be >= 0, got {beta}")));
    }
    let gibbs = gibbs_state(spec, beta)?;
    let mean_energy = linalg::trace(&(spec.hamiltonian() * &gibbs)).re;
    let mut width = window_width.unwrap_or_else(|| default_window_width(spec, mean_energy));
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::Parameter(format!("window width must be positive, got {width}")));
    }
    let span = spec.eigenvalues().last().unwrap_or(&0.0) - spec.eigenvalues().first().unwrap_or(&0.0);
    let window = loop {
        if let Some(w) = sharp_window_state(spec, mean_energy - width / 2.0, mean_energy + width / 2.0) {
            break w;
        }
        if width > 4.0 * (span + 1.0) {
            return Err(Error::Internal("window stayed empty while widening".into()));
        }
        width *= 2.0;
    };
    let in_window = spec
        .eigenvalues()
        .iter()
        .filter(|&&x| (x - mean_energy).abs() <= width / 2.0)
        .count();
    let rows = observables
        .iter()
        .map(|o| {
            let g = o.expectation(&gibbs);
            let w = o.expectation(&window);
            EnsembleRow {
                observable: o.label.clone(),
                gibbs: g,
                window: w,
                difference: w - g,
            }
        })
        .collect();
    Ok(EnsembleComparison {
        beta,
        mean_energy,
        width,
        in_window,
        rows,
    })
}
