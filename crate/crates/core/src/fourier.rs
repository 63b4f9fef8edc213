//! Truncated 2D Fourier series on `[-S, S]²`, tail and ℓ¹ bounds, truncation-order search.
//!
//! Convention: `F(E1, E2) = Σ c_{n1,n2} e^{iτ(n1 E1 + n2 E2)}` with `τ = π/S` and
//! `c_{n1,n2} = (1/4S²) ∬ e^{-iτ(n1 E1 + n2 E2)} F dE1 dE2`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::statefn::DerivativeNorms;

/// Largest truncation order the search will consider.
pub const MAX_TRUNCATION: usize = 1 << 20;

/// Coefficients `c_{n1,n2}` for `|n1|, |n2| ≤ M`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTable {
    tau: f64,
    m: usize,
    grid_n: usize,
    coeffs: Vec<Complex64>,
    z: f64,
}

impl FourierTable {
    /// Build from coefficients laid out row-major over `n1`, then `n2`, both from `-M`.
    pub fn from_coeffs(tau: f64, m: usize, grid_n: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let side = 2 * m + 1;
        if coeffs.len() != side * side {
            return Err(Error::Size(format!(
                "expected {} coefficients for M = {m}, got {}",
                side * side,
                coeffs.len()
            )));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Parameter(format!("tau must be positive, got {tau}")));
        }
        let z = coeffs.iter().map(|c| c.norm()).sum();
        Ok(Self {
            tau,
            m,
            grid_n,
            coeffs,
            z,
        })
    }

    /// Table holding only `c_{0,0} = value`.
    pub fn single(tau: f64, value: Complex64) -> Self {
        Self {
            tau,
            m: 0,
            grid_n: 0,
            coeffs: vec![value],
            z: value.norm(),
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn half_period(&self) -> f64 {
        PI / self.tau
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    /// ℓ¹ norm of the stored coefficients.
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn index(&self, n1: i64, n2: i64) -> Option<usize> {
        let m = self.m as i64;
        if n1.abs() > m || n2.abs() > m {
            return None;
        }
        Some(((n1 + m) * (2 * m + 1) + (n2 + m)) as usize)
    }

    /// `c_{n1,n2}`, zero outside the stored box.
    pub fn get(&self, n1: i64, n2: i64) -> Complex64 {
        self.index(n1, n2).map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, Complex64)> + '_ {
        let m = self.m as i64;
        let side = 2 * m + 1;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &c)| (i as i64 / side - m, i as i64 % side - m, c))
    }

    /// Sub-table restricted to `|n1|, |n2| ≤ m`.
    pub fn truncate(&self, m: usize) -> Result<Self> {
        if m > self.m {
            return Err(Error::Parameter(format!(
                "cannot truncate a table of order {} to {m}",
                self.m
            )));
        }
        let mi = m as i64;
        let mut coeffs = Vec::with_capacity((2 * m + 1) * (2 * m + 1));
        for n1 in -mi..=mi {
            for n2 in -mi..=mi {
                coeffs.push(self.get(n1, n2));
            }
        }
        Self::from_coeffs(self.tau, m, self.grid_n, coeffs)
    }

    /// `Σ |c|` over stored coefficients with `max(|n1|, |n2|) > m`.
    pub fn tail_mass(&self, m: usize) -> f64 {
        let mi = m as i64;
        self.iter()
            .filter(|(n1, n2, _)| n1.abs() > mi || n2.abs() > mi)
            .map(|(_, _, c)| c.norm())
            .sum()
    }

    /// `max |c|` over the shell `max(|n1|, |n2|) = m`.
    pub fn shell_max(&self, m: usize) -> f64 {
        let mi = m as i64;
        self.iter()
            .filter(|(n1, n2, _)| n1.abs().max(n2.abs()) == mi)
            .fold(0.0, |acc, (_, _, c)| acc.max(c.norm()))
    }

    /// Partial sum at a single point.
    pub fn reconstruct(&self, e1: f64, e2: f64) -> Complex64 {
        let m = self.m as i64;
        let p1 = phases(self.tau * e1, m);
        let p2 = phases(self.tau * e2, m);
        let side = (2 * m + 1) as usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, a) in p1.iter().enumerate() {
            let row = &self.coeffs[i * side..(i + 1) * side];
            let inner: Complex64 = row.iter().zip(&p2).map(|(c, b)| c * b).sum();
            acc += a * inner;
        }
        acc
    }

    /// `W[k, l] = reconstruct(E_k, E_l)` for all pairs of the given energies.
    pub fn reconstruct_matrix(&self, energies: &[f64]) -> CMat {
        let m = self.m as i64;
        let side = (2 * m + 1) as usize;
        let d = energies.len();
        let mut p = CMat::zeros(d, side);
        for (k, &e) in energies.iter().enumerate() {
            for (j, z) in phases(self.tau * e, m).into_iter().enumerate() {
                p[(k, j)] = z;
            }
        }
        let c = CMat::from_row_slice(side, side, &self.coeffs);
        &p * c * p.transpose()
    }

    /// CSV dump: `tau,M,grid_n` header and values, then `n1,n2,re,im` rows.
    /// An optional comment line (starting with `#`) is written first.
    pub fn write_csv<W: Write>(&self, mut out: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "tau,M,grid_n")?;
        writeln!(out, "{:e},{},{}", self.tau, self.m, self.grid_n)?;
        writeln!(out, "n1,n2,re,im")?;
        for (n1, n2, c) in self.iter() {
            writeln!(out, "{n1},{n2},{:e},{:e}", c.re, c.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input
            .lines()
            .filter(|l| l.as_ref().map_or(true, |s| !s.starts_with('#') && !s.trim().is_empty()));
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what}")))?
                .map_err(Error::from)
        };
        if next("header")?.trim() != "tau,M,grid_n" {
            return Err(Error::Parse("bad table header".into()));
        }
        let meta = next("table parameters")?;
        let fields: Vec<&str> = meta.trim().split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("bad parameter line `{meta}`")));
        }
        let tau: f64 = parse_field(fields[0])?;
        let m: usize = parse_field(fields[1])?;
        let grid_n: usize = parse_field(fields[2])?;
        if next("row header")?.trim() != "n1,n2,re,im" {
            return Err(Error::Parse("bad row header".into()));
        }
        let side = 2 * m + 1;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); side * side];
        let mut seen = vec![false; side * side];
        for line in lines {
            let line = line?;
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("bad row `{line}`")));
            }
            let n1: i64 = parse_field(f[0])?;
            let n2: i64 = parse_field(f[1])?;
            let mi = m as i64;
            if n1.abs() > mi || n2.abs() > mi {
                return Err(Error::Parse(format!("index ({n1},{n2}) outside order {m}")));
            }
            let i = ((n1 + mi) * side as i64 + n2 + mi) as usize;
            coeffs[i] = Complex64::new(parse_field(f[2])?, parse_field(f[3])?);
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Parse("table has missing coefficients".into()));
        }
        Self::from_coeffs(tau, m, grid_n, coeffs)
    }
}

fn parse_field<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse `{s}`")))
}

/// `e^{i n θ}` for `n = -m..=m`.
fn phases(theta: f64, m: i64) -> Vec<Complex64> {
    (-m..=m).map(|n| Complex64::from_polar(1.0, n as f64 * theta)).collect()
}

/// Coefficients for `|n| ≤ M` by the trapezoidal rule on a `grid_n²` periodic grid.
pub fn fourier_coefficients<F>(fn2d: F, s: f64, m: usize, grid_n: usize) -> Result<FourierTable>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::Parameter(format!("half-period must be positive, got {s}")));
    }
    if !grid_n.is_power_of_two() || grid_n < 8 * (m + 1) {
        return Err(Error::Parameter(format!(
            "grid_n must be a power of two >= 8(M+1) = {}, got {grid_n}",
            8 * (m + 1)
        )));
    }
    let n = grid_n;
    let h = 2.0 * s / n as f64;
    let mut grid: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let e1 = -s + i as f64 * h;
            (0..n).map(|j| fn2d(e1, -s + j as f64 * h)).collect()
        })
        .collect();
    if grid.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("non-finite samples in Fourier quadrature".into()));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    grid.par_iter_mut().for_each(|row| fft.process(row));
    // only the columns for |n2| ≤ M are needed
    let mi = m as i64;
    let wanted: Vec<usize> = (-mi..=mi).map(|n2| n2.rem_euclid(n as i64) as usize).collect();
    let cols: Vec<Vec<Complex64>> = wanted
        .par_iter()
        .map(|&j| {
            let mut col: Vec<Complex64> = grid.iter().map(|row| row[j]).collect();
            fft.process(&mut col);
            col
        })
        .collect();
    let norm = 1.0 / (n * n) as f64;
    let mut coeffs = Vec::with_capacity((2 * m + 1) * (2 * m + 1));
    for n1 in -mi..=mi {
        let r = n1.rem_euclid(n as i64) as usize;
        for (c_idx, n2) in (-mi..=mi).enumerate() {
            // grid starts at -S, so each index picks up a factor (-1)^n
            let sign = if (n1 + n2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            coeffs.push(cols[c_idx][r] * (sign * norm));
        }
    }
    FourierTable::from_coeffs(PI / s, m, grid_n, coeffs)
}

/// Grid size used when the caller does not pick one: `8(M+1)` rounded up, at least 256.
pub fn default_grid(m: usize) -> usize {
    (8 * (m + 1)).next_power_of_two().max(256)
}

fn check_order(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Parameter(format!("smoothness k must be >= 2, got {k}")));
    }
    Ok(())
}

fn derivative_envelope(tau: f64, k: usize, norms: &DerivativeNorms) -> f64 {
    8.0 / tau.powi(k as i32) * norms.mixed + norms.d1 + norms.d2
}

/// Bound on `Σ |c_{n1,n2}|` outside `[-M, M]²`:
/// `(8/τ^k ‖∂^{(k,k)}‖ + ‖∂₁^k‖ + ‖∂₂^k‖) · 2M^{1-k} / (τ^k (k-1))`.
pub fn tail_bound(s: f64, k: usize, m: usize, norms: &DerivativeNorms) -> Result<f64> {
    check_order(k)?;
    if m == 0 {
        return Err(Error::Parameter("truncation order M must be >= 1".into()));
    }
    let tau = PI / s;
    let kf = k as f64;
    Ok(derivative_envelope(tau, k, norms) * 2.0 * (m as f64).powf(1.0 - kf)
        / (tau.powi(k as i32) * (kf - 1.0)))
}

/// Bound on `Σ |c_{n1,n2}|` over all of `Z²`:
/// `10(1 + ‖f‖)(1 + (2/τ^k)(8/τ^k ‖∂^{(k,k)}‖ + ‖∂₁^k‖ + ‖∂₂^k‖))^{2/(k+1)}`.
pub fn l1_bound(s: f64, k: usize, norms: &DerivativeNorms) -> Result<f64> {
    check_order(k)?;
    let tau = PI / s;
    let inner = 1.0 + 2.0 / tau.powi(k as i32) * derivative_envelope(tau, k, norms);
    Ok(10.0 * (1.0 + norms.value) * inner.powf(2.0 / (k as f64 + 1.0)))
}

/// Truncation orders and the analytic quantities they were derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPlan {
    /// order for the jump weights `ĝ`
    pub m: usize,
    /// order for the coherent weights `ŵ`
    pub m_prime: usize,
    pub z_g_bound: f64,
    pub z_w_bound: f64,
    /// `|𝔄| Z_g² / 2`, bound on `‖Σ L_a†L_a‖ / 2`
    pub v_norm_bound: f64,
    /// bound on each `‖L_a - L̄_a‖` at the chosen `M`
    pub jump_tail: f64,
    /// bound on `‖G - Ḡ‖` at the chosen `M, M'`
    pub coherent_bound: f64,
}

/// Smallest `m ≥ 1` with `f(m) ≤ target`, for `f` non-increasing.
fn smallest_order(f: impl Fn(usize) -> f64, target: f64) -> Result<usize> {
    if f(1) <= target {
        return Ok(1);
    }
    let mut hi = 2usize;
    while f(hi) > target {
        if hi >= MAX_TRUNCATION {
            return Err(Error::Capacity(format!(
                "truncation order would exceed {MAX_TRUNCATION}"
            )));
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if f(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Smallest `M'` with `‖V‖ · tail_w(M') ≤ ε/2` and smallest `M` with
/// `tail_g(M) ≤ min(1, ε / (2|𝔄| Z_w (2 Z_g + 1)))`.
pub fn select_truncation(
    eps: f64,
    k: usize,
    s: f64,
    norms_g: &DerivativeNorms,
    norms_w: &DerivativeNorms,
    n_jumps: usize,
) -> Result<TruncationPlan> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    check_order(k)?;
    if n_jumps == 0 {
        return Err(Error::Parameter("at least one jump is required".into()));
    }
    for x in [norms_g, norms_w] {
        if ![x.d1, x.d2, x.mixed, x.value].iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("derivative norms must be finite".into()));
        }
    }
    let z_g = l1_bound(s, k, norms_g)?;
    let z_w = l1_bound(s, k, norms_w)?;
    let v_norm = n_jumps as f64 * z_g * z_g / 2.0;
    let tail_g = |m: usize| tail_bound(s, k, m, norms_g).unwrap_or(f64::INFINITY);
    let tail_w = |m: usize| tail_bound(s, k, m, norms_w).unwrap_or(f64::INFINITY);
    let m_prime = smallest_order(|m| v_norm * tail_w(m), eps / 2.0)?;
    let jump_target = (0.5 * eps / (n_jumps as f64 * z_w * (2.0 * z_g + 1.0))).min(1.0);
    let m = smallest_order(tail_g, jump_target)?;
    let jump_tail = tail_g(m);
    let coherent_bound = v_norm * tail_w(m_prime)
        + z_w * n_jumps as f64 * (2.0 * z_g + jump_tail) * jump_tail / 2.0;
    Ok(TruncationPlan {
        m,
        m_prime,
        z_g_bound: z_g,
        z_w_bound: z_w,
        v_norm_bound: v_norm,
        jump_tail,
        coherent_bound,
    })
}
