//! Dense complex linear algebra shared by every module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Vectorization of operators is
//! column-stacking throughout the crate: `vec(X)[i + j*d] = X[i, j]`, which is
//! exactly nalgebra's column-major storage order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Max-abs deviation from Hermiticity.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * real(0.5)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
/// Columns of the returned matrix are the matching eigenvectors.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let d = m.nrows();
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (values, vectors) = eigh(m);
    let diag = CVec::from_iterator(values.len(), values.iter().map(|&x| real(f(x))));
    &vectors * CMat::from_diagonal(&diag) * vectors.adjoint()
}

/// Eigenvalues of a general complex square matrix.
pub fn eigenvalues(m: &CMat) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::Size("eigenvalues need a square matrix".into()));
    }
    let d = m.nrows();
    if d == 0 {
        return Ok(Vec::new());
    }
    let f = faer::Mat::<Complex64>::from_fn(d, d, |i, j| m[(i, j)]);
    f.eigenvalues()
        .map_err(|e| Error::Numeric(format!("eigenvalue iteration failed: {e:?}")))
}

/// Dense matrix exponential (scaling and squaring with Padé approximants).
pub fn expm(m: &CMat) -> Result<CMat> {
    let e = m.exp();
    if e.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("matrix exponential overflowed".into()));
    }
    Ok(e)
}

/// Column-stacking vectorization.
pub fn vectorize(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &CVec, d: usize) -> CMat {
    CMat::from_column_slice(d, d, v.as_slice())
}

/// Random Hermitian matrix with standard-normal-ish entries.
pub fn random_hermitian<R: Rng>(rng: &mut R, d: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            m[(i, j)] = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    hermitize(&m)
}

/// Random density matrix `G G† / Tr(G G†)`.
pub fn random_density<R: Rng>(rng: &mut R, d: usize) -> CMat {
    let mut g = CMat::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            g[(i, j)] = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    let rho = &g * g.adjoint();
    let tr = trace(&rho);
    rho / tr
}

/// Elementwise (Hadamard) product.
pub fn hadamard(a: &CMat, b: &CMat) -> CMat {
    a.component_mul(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectorization_is_column_stacking() {
        let m = CMat::from_row_slice(2, 2, &[real(1.0), real(2.0), real(3.0), real(4.0)]);
        let v = vectorize(&m);
        assert_eq!(v[0], real(1.0));
        assert_eq!(v[1], real(3.0));
        assert_eq!(v[2], real(2.0));
        assert_eq!(unvectorize(&v, 2), m);
    }

    #[test]
    fn eigh_sorts_ascending() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![real(3.0), real(-1.0), real(2.0)]));
        let (vals, vecs) = eigh(&m);
        assert_eq!(vals, vec![-1.0, 2.0, 3.0]);
        let back = &vecs * CMat::from_diagonal(&CVec::from_iterator(3, vals.iter().map(|&x| real(x)))) * vecs.adjoint();
        assert!(max_abs(&(back - m)) < 1e-14);
    }

    #[test]
    fn general_eigenvalues_of_triangular() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 1.0), real(5.0), ZERO, c(-2.0, 0.5)]);
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] - c(-2.0, 0.5)).norm() < 1e-12);
        assert!((ev[1] - c(1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn expm_of_diagonal() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![real(0.5), c(0.0, std::f64::consts::PI)]));
        let e = expm(&m).unwrap();
        assert!((e[(0, 0)] - real(0.5f64.exp())).norm() < 1e-14);
        assert!((e[(1, 1)] - real(-1.0)).norm() < 1e-14);
    }
}
