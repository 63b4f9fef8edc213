//! Target exponents `Φ` with `f = e^Φ`, extended to `2S`-periodic `C^k` functions.
//!
//! Three profiles are provided: a smoothed energy window, a Gibbs exponent with a
//! polynomial bridge through the non-physical part of the period, and a constant.
//! Every profile satisfies `Φ ≤ 0` on the whole period.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_SMOOTHSTEP_ORDER: usize = 8;
/// Multiplier applied to finite-difference derivative norms.
pub const NORM_SAFETY_FACTOR: f64 = 2.0;

/// Real polynomial with coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, &a)| j as f64 * a)
                .collect(),
        }
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    /// `sup_{[a,b]} |p|`, from the endpoints and the real critical points.
    pub fn abs_max_on(&self, a: f64, b: f64) -> f64 {
        let dp = self.derivative();
        let samples = 4096;
        let xs: Vec<f64> = (0..=samples)
            .map(|i| a + (b - a) * i as f64 / samples as f64)
            .collect();
        let mut best = xs.iter().fold(0.0f64, |acc, &x| acc.max(self.eval(x).abs()));
        for w in xs.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let (flo, fhi) = (dp.eval(lo), dp.eval(hi));
            if flo == 0.0 || flo.signum() == fhi.signum() {
                continue;
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if dp.eval(mid).signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best = best.max(self.eval(0.5 * (lo + hi)).abs());
        }
        best
    }

    /// Maximum (signed) value on `[a, b]`.
    pub fn max_on(&self, a: f64, b: f64) -> f64 {
        let dp = self.derivative();
        let samples = 4096;
        let mut best = self.eval(a).max(self.eval(b));
        let mut prev = a;
        for i in 1..=samples {
            let x = a + (b - a) * i as f64 / samples as f64;
            best = best.max(self.eval(x));
            let (mut lo, mut hi) = (prev, x);
            let flo = dp.eval(lo);
            if flo != 0.0 && flo.signum() != dp.eval(hi).signum() {
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if dp.eval(mid).signum() == flo.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                best = best.max(self.eval(0.5 * (lo + hi)));
            }
            prev = x;
        }
        best
    }
}

fn falling_factorial(j: usize, l: usize) -> f64 {
    (0..l).fold(1.0, |acc, i| acc * (j - i) as f64)
}

/// Minimal-degree polynomial on `[0, 1]` matching derivatives `0..=k` at both ends.
pub fn hermite_two_point(left: &[f64], right: &[f64]) -> Result<Polynomial> {
    if left.len() != right.len() || left.is_empty() {
        return Err(Error::Parameter("hermite conditions must pair up".into()));
    }
    let k = left.len() - 1;
    // the conditions at 0 fix the low coefficients directly
    let mut coeffs: Vec<f64> = (0..=k).map(|l| left[l] / falling_factorial(l, l)).collect();
    let mut a = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = DVector::<f64>::zeros(k + 1);
    for l in 0..=k {
        for j in 0..=k {
            a[(l, j)] = falling_factorial(k + 1 + j, l);
        }
        rhs[l] = right[l]
            - (l..=k)
                .map(|j| falling_factorial(j, l) * coeffs[j])
                .sum::<f64>();
    }
    let lu = a.clone().lu();
    let mut sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular Hermite system".into()))?;
    for _ in 0..3 {
        let residual = &rhs - &a * &sol;
        if let Some(correction) = lu.solve(&residual) {
            sol += correction;
        }
    }
    coeffs.extend(sol.iter());
    Ok(Polynomial::new(coeffs))
}

/// Smoothstep `γ` of order `k`: `γ(0)=0`, `γ(1)=1`, `γ^{(l)}(0)=γ^{(l)}(1)=0` for `1 ≤ l ≤ k`.
pub fn smoothstep_gamma(k: usize) -> Result<Polynomial> {
    if !(1..=MAX_SMOOTHSTEP_ORDER).contains(&k) {
        return Err(Error::Parameter(format!(
            "smoothstep order must be in 1..={MAX_SMOOTHSTEP_ORDER}, got {k}"
        )));
    }
    let left = vec![0.0; k + 1];
    let mut right = vec![0.0; k + 1];
    right[0] = 1.0;
    hermite_two_point(&left, &right)
}

/// Window `[b, c]` with smoothing width `δ` and floor weight `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub b: f64,
    pub c: f64,
    pub delta: f64,
    pub eta: f64,
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.c.is_finite() && self.b < self.c) {
            return Err(Error::Parameter(format!("window needs b < c, got [{}, {}]", self.b, self.c)));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Parameter(format!("delta must be > 0, got {}", self.delta)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Parameter(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        Ok(())
    }

    /// Smallest admissible half-period.
    pub fn min_half_period(&self) -> f64 {
        self.delta + self.b.abs().max(self.c.abs())
    }

    pub fn contains(&self, e: f64) -> bool {
        self.b <= e && e <= self.c
    }
}

#[derive(Debug, Clone)]
enum Profile {
    Constant,
    Window {
        spec: WindowSpec,
        gamma: Polynomial,
        log_eta: f64,
    },
    Gibbs {
        beta: f64,
        h_norm: f64,
        offset: f64,
        bridge: Polynomial,
        bridge_width: f64,
    },
}

/// `Φ` on `[-S, S]`, extended periodically.
#[derive(Debug, Clone)]
pub struct TargetFunction {
    half_period: f64,
    k: usize,
    lipschitz: f64,
    label: String,
    profile: Profile,
}

impl TargetFunction {
    pub fn half_period(&self) -> f64 {
        self.half_period
    }

    pub fn smoothness(&self) -> usize {
        self.k
    }

    /// `sup |Φ'|` over the whole period.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.profile, Profile::Constant)
            || matches!(self.profile, Profile::Gibbs { beta, .. } if beta == 0.0)
    }

    /// Constant subtracted from the Gibbs exponent to keep `Φ ≤ 0`; zero otherwise.
    pub fn offset(&self) -> f64 {
        match self.profile {
            Profile::Gibbs { offset, .. } => offset,
            _ => 0.0,
        }
    }

    /// Map `e` into `[-S, S)`.
    pub fn wrap(&self, e: f64) -> f64 {
        let s = self.half_period;
        let shifted = (e + s).rem_euclid(2.0 * s) - s;
        // keep the closed endpoint S itself
        if (e - s).abs() < 1e-15 * s.max(1.0) {
            s
        } else {
            shifted
        }
    }

    pub fn phi(&self, e: f64) -> f64 {
        self.phi_deriv(0, e)
    }

    /// `f(E) = e^{Φ(E)}`
    pub fn f(&self, e: f64) -> f64 {
        self.phi(e).exp()
    }

    /// `Φ^{(order)}(e)` for `order ≤ k`.
    pub fn phi_deriv(&self, order: usize, e: f64) -> f64 {
        let x = self.wrap(e);
        match &self.profile {
            Profile::Constant => 0.0,
            Profile::Window { spec, gamma, log_eta } => {
                let WindowSpec { b, c, delta, .. } = *spec;
                if x <= b - delta || x > c + delta {
                    if order == 0 {
                        *log_eta
                    } else {
                        0.0
                    }
                } else if x <= b {
                    let s = (b - x) / delta;
                    let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
                    log_eta * sign * gamma.nth_derivative(order).eval(s) / delta.powi(order as i32)
                } else if x <= c {
                    0.0
                } else {
                    let s = (x - c) / delta;
                    log_eta * gamma.nth_derivative(order).eval(s) / delta.powi(order as i32)
                }
            }
            Profile::Gibbs {
                beta,
                h_norm,
                offset,
                bridge,
                bridge_width,
            } => {
                if x.abs() <= *h_norm {
                    match order {
                        0 => -beta * (x + h_norm) - offset,
                        1 => -beta,
                        _ => 0.0,
                    }
                } else {
                    let t = if x > *h_norm {
                        (x - h_norm) / bridge_width
                    } else {
                        (x + 2.0 * self.half_period - h_norm) / bridge_width
                    };
                    let v = bridge.nth_derivative(order).eval(t) / bridge_width.powi(order as i32);
                    if order == 0 {
                        v - offset
                    } else {
                        v
                    }
                }
            }
        }
    }
}

/// Constant target `Φ ≡ 0` (uniform stationary state).
pub fn constant_phi(s: f64, k: usize) -> Result<TargetFunction> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::Parameter(format!("half-period must be positive, got {s}")));
    }
    if k < 2 {
        return Err(Error::Parameter(format!("smoothness k must be >= 2, got {k}")));
    }
    Ok(TargetFunction {
        half_period: s,
        k,
        lipschitz: 0.0,
        label: "constant".into(),
        profile: Profile::Constant,
    })
}

/// Smoothed window: `Φ = 0` on `(b, c]`, `log η` beyond `δ` of the edges,
/// smoothstep ramps in between.
pub fn window_phi(spec: WindowSpec, s: f64, k: usize) -> Result<TargetFunction> {
    spec.validate()?;
    if !(2..=MAX_SMOOTHSTEP_ORDER).contains(&k) {
        return Err(Error::Parameter(format!(
            "smoothness k must be in 2..={MAX_SMOOTHSTEP_ORDER}, got {k}"
        )));
    }
    if !(s.is_finite() && s >= spec.min_half_period() - 1e-12) {
        return Err(Error::Parameter(format!(
            "half-period {s} must be >= delta + max(|b|, |c|) = {}",
            spec.min_half_period()
        )));
    }
    let gamma = smoothstep_gamma(k)?;
    let log_eta = spec.eta.ln();
    let lipschitz = log_eta.abs() * gamma.derivative().abs_max_on(0.0, 1.0) / spec.delta;
    Ok(TargetFunction {
        half_period: s,
        k,
        lipschitz,
        label: format!(
            "window(b={},c={},delta={},eta={})",
            spec.b, spec.c, spec.delta, spec.eta
        ),
        profile: Profile::Window { spec, gamma, log_eta },
    })
}

/// Gibbs exponent `-β(E + ‖H‖) - offset` on `[-‖H‖, ‖H‖]`, bridged to a periodic
/// `C^k` function by a Hermite polynomial on `(‖H‖, 2S - ‖H‖)`.
///
/// The bridge has to overshoot `0` just before it re-joins the linear segment, so
/// `offset` is the height of that overshoot; it rescales `f` by a constant only.
pub fn gibbs_phi(beta: f64, h_norm: f64, s: f64, k: usize) -> Result<TargetFunction> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::Parameter(format!("beta must be >= 0, got {beta}")));
    }
    if !(h_norm.is_finite() && h_norm >= 0.0) {
        return Err(Error::Parameter(format!("H_norm must be >= 0, got {h_norm}")));
    }
    if !(s.is_finite() && s > h_norm) {
        return Err(Error::Parameter(format!("S = {s} must exceed H_norm = {h_norm}")));
    }
    if !(2..=MAX_SMOOTHSTEP_ORDER).contains(&k) {
        return Err(Error::Parameter(format!(
            "smoothness k must be in 2..={MAX_SMOOTHSTEP_ORDER}, got {k}"
        )));
    }
    let width = 2.0 * (s - h_norm);
    // derivatives in the local coordinate t = (E - ‖H‖) / width
    let mut left = vec![0.0; k + 1];
    let mut right = vec![0.0; k + 1];
    left[0] = -2.0 * beta * h_norm;
    left[1] = -beta * width;
    right[0] = 0.0;
    right[1] = -beta * width;
    let bridge = hermite_two_point(&left, &right)?;
    let offset = bridge.max_on(0.0, 1.0).max(0.0);
    let lipschitz = beta.max(bridge.derivative().abs_max_on(0.0, 1.0) / width);
    Ok(TargetFunction {
        half_period: s,
        k,
        lipschitz,
        label: format!("gibbs(beta={beta})"),
        profile: Profile::Gibbs {
            beta,
            h_norm,
            offset,
            bridge,
            bridge_width: width,
        },
    })
}

/// Normalized `L¹` norms of a function on `[-S, S]²` and of its order-`k` derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeNorms {
    /// `‖∂₁^k f‖`
    pub d1: f64,
    /// `‖∂₂^k f‖`
    pub d2: f64,
    /// `‖∂^{(k,k)} f‖`
    pub mixed: f64,
    /// `‖f‖`
    pub value: f64,
}

impl DerivativeNorms {
    pub fn zero_derivatives(value: f64) -> Self {
        Self {
            d1: 0.0,
            d2: 0.0,
            mixed: 0.0,
            value,
        }
    }

    fn scaled(self, factor: f64) -> Self {
        Self {
            d1: self.d1 * factor,
            d2: self.d2 * factor,
            mixed: self.mixed * factor,
            value: self.value,
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Finite-difference estimates scaled by [`NORM_SAFETY_FACTOR`].
pub fn derivative_l1_norms<F>(fn2d: F, s: f64, k: usize, grid_n: usize) -> Result<DerivativeNorms>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    Ok(derivative_l1_norms_raw(fn2d, s, k, grid_n)?.scaled(NORM_SAFETY_FACTOR))
}

/// Unscaled estimates: order-`k` differences on a periodic `grid_n²` grid,
/// averaged in absolute value (trapezoidal rule on a periodic grid).
pub fn derivative_l1_norms_raw<F>(fn2d: F, s: f64, k: usize, grid_n: usize) -> Result<DerivativeNorms>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    if grid_n < 64 {
        return Err(Error::Parameter(format!("grid_n must be >= 64, got {grid_n}")));
    }
    if k == 0 {
        return Err(Error::Parameter("derivative order must be >= 1".into()));
    }
    let n = grid_n;
    let h = 2.0 * s / n as f64;
    let grid: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let e1 = -s + i as f64 * h;
            (0..n).map(|j| fn2d(e1, -s + j as f64 * h)).collect()
        })
        .collect();
    if grid.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("non-finite samples in derivative estimate".into()));
    }
    // forward stencil; centred at the half-offset k/2, still a uniform periodic grid
    let weights: Vec<f64> = (0..=k)
        .map(|j| {
            let sign = if (k - j).is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * binomial(k, j) / h.powi(k as i32)
        })
        .collect();
    let diff_rows = |g: &Vec<Vec<Complex64>>| -> Vec<Vec<Complex64>> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        weights
                            .iter()
                            .enumerate()
                            .map(|(m, w)| g[(i + m) % n][j] * *w)
                            .sum()
                    })
                    .collect()
            })
            .collect()
    };
    let diff_cols = |g: &Vec<Vec<Complex64>>| -> Vec<Vec<Complex64>> {
        g.par_iter()
            .map(|row| {
                (0..n)
                    .map(|j| {
                        weights
                            .iter()
                            .enumerate()
                            .map(|(m, w)| row[(j + m) % n] * *w)
                            .sum()
                    })
                    .collect()
            })
            .collect()
    };
    let mean_abs = |g: &Vec<Vec<Complex64>>| -> f64 {
        let row_sums: Vec<f64> = g.par_iter().map(|row| row.iter().map(|z| z.norm()).sum()).collect();
        row_sums.iter().sum::<f64>() / (n * n) as f64
    };
    let d1_grid = diff_rows(&grid);
    let d2_grid = diff_cols(&grid);
    let mixed_grid = diff_cols(&d1_grid);
    Ok(DerivativeNorms {
        d1: mean_abs(&d1_grid),
        d2: mean_abs(&d2_grid),
        mixed: mean_abs(&mixed_grid),
        value: mean_abs(&grid),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_low_orders() {
        let g1 = smoothstep_gamma(1).unwrap();
        let expected1 = [0.0, 0.0, 3.0, -2.0];
        for (a, b) in g1.coeffs().iter().zip(expected1) {
            assert!((a - b).abs() < 1e-12);
        }
        let g2 = smoothstep_gamma(2).unwrap();
        let expected2 = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0];
        for (a, b) in g2.coeffs().iter().zip(expected2) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((g2.eval(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn smoothstep_boundary_conditions() {
        for k in 1..=MAX_SMOOTHSTEP_ORDER {
            let g = smoothstep_gamma(k).unwrap();
            assert_eq!(g.degree(), 2 * k + 1);
            assert!(g.eval(0.0).abs() < 1e-12);
            assert!((g.eval(1.0) - 1.0).abs() < 1e-9);
            for l in 1..=k {
                let d = g.nth_derivative(l);
                assert!(d.eval(0.0).abs() < 1e-9, "k={k} l={l}");
                assert!(d.eval(1.0).abs() < 1e-6 * (1.0 + d.abs_max_on(0.0, 1.0)), "k={k} l={l}");
            }
        }
        assert!(smoothstep_gamma(0).is_err());
        assert!(smoothstep_gamma(9).is_err());
    }

    #[test]
    fn smoothstep_monotone() {
        for k in 1..=4 {
            let g = smoothstep_gamma(k).unwrap();
            let mut prev = g.eval(0.0);
            for i in 1..=2000 {
                let v = g.eval(i as f64 / 2000.0);
                assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }

    fn sample_window() -> (WindowSpec, TargetFunction) {
        let spec = WindowSpec {
            b: -0.5,
            c: 0.7,
            delta: 0.5,
            eta: 1e-6,
        };
        let target = window_phi(spec, 2.0, 2).unwrap();
        (spec, target)
    }

    #[test]
    fn window_values() {
        let (spec, t) = sample_window();
        assert_eq!(t.phi(0.5 * (spec.b + spec.c)), 0.0);
        assert!((t.phi(-2.0) - spec.eta.ln()).abs() < 1e-14);
        assert!((t.f(-2.0) - spec.eta).abs() < 1e-18);
        let mid_ramp = t.phi(spec.b - spec.delta / 2.0);
        assert!((mid_ramp - 0.5 * spec.eta.ln()).abs() < 1e-12);
        let up_ramp = t.phi(spec.c + spec.delta / 2.0);
        assert!((up_ramp - 0.5 * spec.eta.ln()).abs() < 1e-12);
    }

    #[test]
    fn window_invariants() {
        let (spec, t) = sample_window();
        let s = t.half_period();
        let n = 10_000;
        let mut fmax = 0.0f64;
        let gamma = smoothstep_gamma(2).unwrap();
        for i in 0..=n {
            let e = -s + 2.0 * s * i as f64 / n as f64;
            assert!(t.phi(e) <= 0.0);
            fmax = fmax.max(t.f(e));
            for l in 1..=2 {
                let bound = spec.eta.ln().abs() / spec.delta.powi(l as i32)
                    * gamma.nth_derivative(l).abs_max_on(0.0, 1.0);
                assert!(t.phi_deriv(l, e).abs() <= bound + 1e-9);
            }
        }
        assert!((fmax - 1.0).abs() < 1e-12);
        for l in 0..=2 {
            assert!((t.phi_deriv(l, -s) - t.phi_deriv(l, s)).abs() <= 1e-10);
        }
        for i in 0..500 {
            let e1 = -s + 2.0 * s * (i as f64 * 0.618).fract();
            let e2 = -s + 2.0 * s * (i as f64 * 0.377).fract();
            assert!((t.phi(e1) - t.phi(e2)).abs() <= t.lipschitz() * (e1 - e2).abs() + 1e-12);
        }
    }

    #[test]
    fn window_rejects_bad_parameters() {
        let spec = WindowSpec {
            b: -0.5,
            c: 0.7,
            delta: 0.5,
            eta: 2.0,
        };
        assert!(window_phi(spec, 3.0, 2).is_err());
        let spec = WindowSpec { eta: 1e-3, ..spec };
        assert!(window_phi(spec, 1.0, 2).is_err());
        assert!(window_phi(spec, 3.0, 1).is_err());
    }

    #[test]
    fn gibbs_infinite_temperature() {
        let t = gibbs_phi(0.0, 2.0, 3.0, 2).unwrap();
        for i in 0..100 {
            let e = -3.0 + 0.06 * i as f64;
            assert_eq!(t.phi(e), 0.0);
        }
        assert_eq!(t.lipschitz(), 0.0);
        assert!(t.is_constant());
    }

    #[test]
    fn gibbs_linear_segment_and_seams() {
        let (beta, h_norm, s, k) = (1.0, 2.0, 3.0, 2);
        let t = gibbs_phi(beta, h_norm, s, k).unwrap();
        let off = t.offset();
        assert!(off > 0.0);
        assert!((t.phi(-h_norm) + off).abs() < 1e-12);
        assert!((t.phi(h_norm) + 2.0 * beta * h_norm + off).abs() < 1e-12);
        for i in 0..50 {
            let e = -h_norm + 2.0 * h_norm * i as f64 / 49.0;
            assert!((t.phi_deriv(1, e) + beta).abs() < 1e-14);
        }
        for l in 0..=k {
            assert!((t.phi_deriv(l, s) - t.phi_deriv(l, -s)).abs() <= 1e-9, "seam l={l}");
            // continuity across the linear/bridge junctions
            for &x in &[h_norm, -h_norm] {
                let a = t.phi_deriv(l, x - 1e-9);
                let b = t.phi_deriv(l, x + 1e-9);
                assert!((a - b).abs() < 1e-5, "junction {x} l={l}: {a} vs {b}");
            }
        }
        let n = 10_000;
        for i in 0..=n {
            let e = -s + 2.0 * s * i as f64 / n as f64;
            assert!(t.phi(e) <= 1e-15);
            assert!(t.phi_deriv(1, e).abs() <= t.lipschitz() * (1.0 + 1e-12));
        }
        assert!(gibbs_phi(1.0, 3.0, 3.0, 2).is_err());
    }

    #[test]
    fn norms_of_constant_and_single_mode() {
        let s = 2.0;
        let n = derivative_l1_norms(|_, _| Complex64::new(1.0, 0.0), s, 2, 64).unwrap();
        assert!(n.d1.abs() < 1e-12 && n.d2.abs() < 1e-12 && n.mixed.abs() < 1e-12);
        assert!((n.value - 1.0).abs() < 1e-14);

        let tau = std::f64::consts::PI / s;
        for k in 2..=3 {
            let raw = derivative_l1_norms_raw(
                |e1, e2| Complex64::from_polar(1.0, tau * (e1 - e2)),
                s,
                k,
                256,
            )
            .unwrap();
            let exact = tau.powi(k as i32);
            assert!((raw.d1 - exact).abs() / exact < 1e-3, "{} vs {exact}", raw.d1);
            assert!((raw.d2 - exact).abs() / exact < 1e-3);
            assert!((raw.mixed - exact * exact).abs() / (exact * exact) < 2e-3);
        }
        assert!(derivative_l1_norms(|_, _| Complex64::new(f64::NAN, 0.0), s, 2, 64).is_err());
        assert!(derivative_l1_norms(|_, _| Complex64::new(1.0, 0.0), s, 2, 32).is_err());
    }
}
