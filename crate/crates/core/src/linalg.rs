//! Dense complex matrix helpers on top of `faer`.
//!
//! Every matrix exponential in the crate goes through [`HermitianEigen`]:
//! `exp(-i tau H) = Q diag(exp(-i tau lambda)) Q^dagger`, which is unitary up
//! to the orthogonality of the computed eigenvectors. Real symmetric inputs
//! (all Hamiltonians with real couplings) take a real eigensolver path.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = Mat<C64>;

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

pub fn max_abs(m: &CMat) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut out = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            out = out.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    out
}

/// `max |A - A^dagger|`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut out = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            out = out.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    out
}

/// `max |U^dagger U - I|`.
pub fn unitarity_defect(m: &CMat) -> f64 {
    let g = m.adjoint() * m;
    max_abs_diff(&g, &identity(m.nrows()))
}

/// Kronecker product, left operand on the slow index.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    Mat::from_fn(ra * rb, ca * cb, |i, j| {
        a[(i / rb, j / cb)] * b[(i % rb, j % cb)]
    })
}

pub fn mat_vec(m: &CMat, v: &[C64]) -> Vec<C64> {
    assert_eq!(m.ncols(), v.len());
    let mut out = vec![C64::new(0.0, 0.0); m.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == C64::new(0.0, 0.0) {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[(i, j)] * vj;
        }
    }
    out
}

fn is_real(m: &CMat) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].im == 0.0))
}

#[derive(Debug, Clone)]
enum Basis {
    Real(Mat<f64>),
    Complex(CMat),
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    values: Vec<f64>,
    basis: Basis,
}

impl HermitianEigen {
    /// Tolerance on `max |H - H^dagger|` relative to `max(1, max |H|)`.
    pub const HERMITIAN_TOL: f64 = 1e-12;

    pub fn new(h: &CMat) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        let defect = hermiticity_defect(h);
        if defect > Self::HERMITIAN_TOL * max_abs(h).max(1.0) {
            return Err(Error::NotHermitian(defect));
        }
        if is_real(h) {
            let n = h.nrows();
            let hr = Mat::<f64>::from_fn(n, n, |i, j| h[(i, j)].re);
            let evd = hr
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Eigen(format!("{e:?}")))?;
            let values = (0..n).map(|i| evd.S()[i]).collect();
            Ok(Self {
                values,
                basis: Basis::Real(evd.U().to_owned()),
            })
        } else {
            let evd = h
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Eigen(format!("{e:?}")))?;
            let values = (0..h.nrows()).map(|i| evd.S()[i].re).collect();
            Ok(Self {
                values,
                basis: Basis::Complex(evd.U().to_owned()),
            })
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column `k` is the eigenvector for `values()[k]`.
    pub fn vectors(&self) -> CMat {
        match &self.basis {
            Basis::Real(q) => Mat::from_fn(q.nrows(), q.ncols(), |i, j| C64::new(q[(i, j)], 0.0)),
            Basis::Complex(q) => q.clone(),
        }
    }

    /// `exp(-i tau H)`.
    pub fn unitary(&self, tau: f64) -> CMat {
        self.spectral_map(|lambda| C64::from_polar(1.0, -tau * lambda))
    }

    /// `Q diag(f(lambda)) Q^dagger`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> C64) -> CMat {
        let phases: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        match &self.basis {
            Basis::Real(q) => {
                // Two real products instead of one complex product.
                let n = q.nrows();
                let qt = q.transpose();
                let scaled_re = Mat::<f64>::from_fn(n, n, |i, j| qt[(i, j)] * phases[i].re);
                let scaled_im = Mat::<f64>::from_fn(n, n, |i, j| qt[(i, j)] * phases[i].im);
                let re = q * &scaled_re;
                let im = q * &scaled_im;
                Mat::from_fn(n, n, |i, j| C64::new(re[(i, j)], im[(i, j)]))
            }
            Basis::Complex(q) => {
                let n = q.nrows();
                let scaled = Mat::from_fn(n, n, |i, j| q[(j, i)].conj() * phases[i]);
                q * &scaled
            }
        }
    }
}
