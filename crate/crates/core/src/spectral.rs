//! Spin-chain Hamiltonians, their spectral decomposition, and jump proposals.
//!
//! All later constructions work on eigenbasis index pairs `(k, l)` instead of
//! per-eigenvalue projectors, so degenerate spectra need no special handling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, kron, max_abs, op_norm, real, CMat, CVec, ONE, ZERO};

pub const MAX_SITES: usize = 10;
pub const DEFAULT_MARGIN: f64 = 1.2;

/// Chain models with open boundary conditions.
///
/// * Ising: `H = J Σ Z_i Z_{i+1} + h Σ X_i`
/// * XXZ: `H = J Σ (X_i X_{i+1} + Y_i Y_{i+1} + Δ Z_i Z_{i+1}) + h Σ Z_i`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChainModel {
    TransverseFieldIsing { j: f64, h: f64 },
    HeisenbergXxz { j: f64, delta: f64, h: f64 },
}

impl ChainModel {
    fn couplings(&self) -> Vec<f64> {
        match *self {
            ChainModel::TransverseFieldIsing { j, h } => vec![j, h],
            ChainModel::HeisenbergXxz { j, delta, h } => vec![j, delta, h],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> CMat {
        match self {
            Pauli::I => linalg::identity(2),
            Pauli::X => CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            Pauli::Y => CMat::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]),
            Pauli::Z => CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, real(-1.0)]),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-site operators; site 0 is the leftmost factor.
pub fn pauli_string(ops: &[(Pauli, usize)], n_sites: usize) -> CMat {
    let mut factors = vec![Pauli::I; n_sites];
    for &(p, site) in ops {
        factors[site] = p;
    }
    factors
        .iter()
        .fold(CMat::identity(1, 1), |acc, p| kron(&acc, &p.matrix()))
}

pub fn build_chain_hamiltonian(model: &ChainModel, n_sites: usize) -> Result<CMat> {
    if !(1..=MAX_SITES).contains(&n_sites) {
        return Err(Error::Size(format!(
            "n_sites must be in 1..={MAX_SITES}, got {n_sites}"
        )));
    }
    if model.couplings().iter().any(|x| !x.is_finite()) {
        return Err(Error::Parameter("coupling parameters must be finite".into()));
    }
    let dim = 1usize << n_sites;
    let mut h = CMat::zeros(dim, dim);
    match *model {
        ChainModel::TransverseFieldIsing { j, h: field } => {
            for i in 0..n_sites.saturating_sub(1) {
                h += pauli_string(&[(Pauli::Z, i), (Pauli::Z, i + 1)], n_sites) * real(j);
            }
            for i in 0..n_sites {
                h += pauli_string(&[(Pauli::X, i)], n_sites) * real(field);
            }
        }
        ChainModel::HeisenbergXxz { j, delta, h: field } => {
            for i in 0..n_sites.saturating_sub(1) {
                h += pauli_string(&[(Pauli::X, i), (Pauli::X, i + 1)], n_sites) * real(j);
                h += pauli_string(&[(Pauli::Y, i), (Pauli::Y, i + 1)], n_sites) * real(j);
                h += pauli_string(&[(Pauli::Z, i), (Pauli::Z, i + 1)], n_sites) * real(j * delta);
            }
            for i in 0..n_sites {
                h += pauli_string(&[(Pauli::Z, i)], n_sites) * real(field);
            }
        }
    }
    Ok(h)
}

/// Spectral data of a dense Hermitian Hamiltonian, `H = U diag(E) U†`.
#[derive(Debug, Clone)]
pub struct HamiltonianSpectrum {
    eigenvalues: Vec<f64>,
    eigenbasis: CMat,
    energy_bound: f64,
}

impl HamiltonianSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Energies in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unitary whose columns are the eigenvectors.
    pub fn eigenbasis(&self) -> &CMat {
        &self.eigenbasis
    }

    /// Half-period `S` of the energy interval `[-S, S]`.
    pub fn energy_bound(&self) -> f64 {
        self.energy_bound
    }

    pub fn max_abs_energy(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |acc, e| acc.max(e.abs()))
    }

    /// Same spectrum with a larger half-period.
    pub fn with_energy_bound(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s >= self.max_abs_energy() && s > 0.0) {
            return Err(Error::Parameter(format!(
                "energy bound {s} must be positive and cover max|E| = {}",
                self.max_abs_energy()
            )));
        }
        Ok(Self {
            energy_bound: s,
            ..self.clone()
        })
    }

    /// `U† A U`
    pub fn to_eigenbasis(&self, a: &CMat) -> CMat {
        self.eigenbasis.adjoint() * a * &self.eigenbasis
    }

    /// `U A U†`
    pub fn from_eigenbasis(&self, a: &CMat) -> CMat {
        &self.eigenbasis * a * self.eigenbasis.adjoint()
    }

    /// `P_k = |ψ_k⟩⟨ψ_k|`
    pub fn projector(&self, k: usize) -> CMat {
        let v = self.eigenbasis.column(k);
        v * v.adjoint()
    }

    /// `U diag(values) U†`
    pub fn function_of(&self, values: &[f64]) -> CMat {
        let diag = CVec::from_iterator(values.len(), values.iter().map(|&x| real(x)));
        self.from_eigenbasis(&CMat::from_diagonal(&diag))
    }

    pub fn hamiltonian(&self) -> CMat {
        self.function_of(&self.eigenvalues)
    }
}

pub fn diagonalize(h: &CMat, margin: f64) -> Result<HamiltonianSpectrum> {
    if !h.is_square() || h.nrows() == 0 {
        return Err(Error::Validation("Hamiltonian must be a non-empty square matrix".into()));
    }
    if !(margin.is_finite() && margin >= 1.0) {
        return Err(Error::Parameter(format!("margin must be >= 1, got {margin}")));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Validation("Hamiltonian has non-finite entries".into()));
    }
    if linalg::hermiticity_defect(h) > 1e-12 {
        return Err(Error::Validation(format!(
            "Hamiltonian is not Hermitian (defect {:e})",
            linalg::hermiticity_defect(h)
        )));
    }
    let (eigenvalues, eigenbasis) = linalg::eigh(h);
    let d = eigenvalues.len();

    let unitarity = max_abs(&(eigenbasis.adjoint() * &eigenbasis - linalg::identity(d)));
    if unitarity > 1e-12 {
        return Err(Error::Internal(format!("eigenbasis not unitary ({unitarity:e})")));
    }
    let max_e = eigenvalues.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    let spectrum = HamiltonianSpectrum {
        eigenvalues,
        eigenbasis,
        // floor of 1 keeps the Fourier period from collapsing for tiny spectra
        energy_bound: margin * max_e.max(1.0),
    };
    let recon = max_abs(&(spectrum.hamiltonian() - h));
    if recon > 1e-10 * max_abs(h).max(1.0) {
        return Err(Error::Internal(format!("spectral reconstruction error {recon:e}")));
    }
    Ok(spectrum)
}

/// Hermitian jump proposals `A_a` with `‖A_a‖ ≤ 1`.
#[derive(Debug, Clone)]
pub struct JumpProposalSet {
    labels: Vec<String>,
    proposals: Vec<CMat>,
}

impl JumpProposalSet {
    pub fn new(items: Vec<(String, CMat)>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Validation("jump proposal set is empty".into()));
        }
        let dim = items[0].1.nrows();
        for (label, a) in &items {
            if a.nrows() != dim || a.ncols() != dim {
                return Err(Error::Size(format!("proposal {label} has wrong shape")));
            }
            if linalg::hermiticity_defect(a) > 1e-14 {
                return Err(Error::Validation(format!("proposal {label} is not Hermitian")));
            }
            if op_norm(a) > 1.0 + 1e-12 {
                return Err(Error::Validation(format!("proposal {label} has norm > 1")));
            }
        }
        let (labels, proposals) = items.into_iter().unzip();
        Ok(Self { labels, proposals })
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn proposals(&self) -> &[CMat] {
        &self.proposals
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &CMat)> {
        self.labels.iter().map(String::as_str).zip(self.proposals.iter())
    }
}

/// Which single-site Paulis to use as proposals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JumpSelector {
    #[default]
    AllPauli,
    XOnly,
    ZOnly,
}

impl JumpSelector {
    fn paulis(self) -> &'static [Pauli] {
        match self {
            JumpSelector::AllPauli => &[Pauli::X, Pauli::Y, Pauli::Z],
            JumpSelector::XOnly => &[Pauli::X],
            JumpSelector::ZOnly => &[Pauli::Z],
        }
    }
}

/// `{X_i, Y_i, Z_i}` on every site, labelled with 1-based site indices.
pub fn pauli_jump_set(n_sites: usize) -> Result<JumpProposalSet> {
    selected_jump_set(n_sites, JumpSelector::AllPauli)
}

pub fn selected_jump_set(n_sites: usize, selector: JumpSelector) -> Result<JumpProposalSet> {
    if !(1..=MAX_SITES).contains(&n_sites) {
        return Err(Error::Size(format!(
            "n_sites must be in 1..={MAX_SITES}, got {n_sites}"
        )));
    }
    let mut items = Vec::new();
    for site in 0..n_sites {
        for &p in selector.paulis() {
            items.push((format!("{}{}", p.symbol(), site + 1), pauli_string(&[(p, site)], n_sites)));
        }
    }
    JumpProposalSet::new(items)
}
