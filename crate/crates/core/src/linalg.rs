//! Dense complex linear algebra helpers shared by the finite-section oracles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Maximum entry magnitude, the matrix norm used throughout the crate.
pub fn max_entry_norm(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Dense LU factorization together with the quantities the oracles need.
pub struct Factored {
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    dim: usize,
}

impl Factored {
    pub fn new(m: CMat) -> Self {
        let dim = m.nrows();
        Factored { lu: m.lu(), dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// log det with the imaginary part accumulated pivot by pivot
    /// (not reduced modulo 2π).
    pub fn log_det_accumulated(&self) -> C64 {
        let lu = self.lu.lu_internal();
        let mut acc = ZERO;
        for i in 0..self.dim {
            acc += lu[(i, i)].ln();
        }
        if self.lu.p().determinant::<f64>() < 0.0 {
            acc += C64::new(0.0, std::f64::consts::PI);
        }
        acc
    }

    pub fn has_zero_pivot(&self) -> bool {
        let lu = self.lu.lu_internal();
        (0..self.dim).any(|i| lu[(i, i)].norm() == 0.0 || !lu[(i, i)].is_finite())
    }

    pub fn solve(&self, b: &CMat) -> Option<CMat> {
        self.lu.solve(b)
    }

    fn solve_adjoint(&self, b: &CMat) -> Option<CMat> {
        let l = self.lu.l();
        let u = self.lu.u();
        let y = u.ad_solve_upper_triangular(b)?;
        let mut z = l.ad_solve_lower_triangular(&y)?;
        self.lu.p().inv_permute_rows(&mut z);
        Some(z)
    }

    /// Hager-Higham estimate of the 1-norm condition number.
    pub fn condition_estimate(&self, original: &CMat) -> f64 {
        if self.has_zero_pivot() {
            return f64::INFINITY;
        }
        let n = self.dim;
        if n == 0 {
            return 1.0;
        }
        let norm_a = one_norm(original);
        let mut x = CMat::from_element(n, 1, C64::new(1.0 / n as f64, 0.0));
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let Some(y) = self.solve(&x) else {
                return f64::INFINITY;
            };
            let y_norm: f64 = y.iter().map(|z| z.norm()).sum();
            if !y_norm.is_finite() {
                return f64::INFINITY;
            }
            if y_norm <= est {
                break;
            }
            est = y_norm;
            let xi = y.map(|z| if z.norm() > 0.0 { z / z.norm() } else { ONE });
            let Some(z) = self.solve_adjoint(&xi) else {
                return f64::INFINITY;
            };
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            let ztx: f64 = z.iter().zip(x.iter()).map(|(a, b)| (a.conj() * b).re).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x.fill(ZERO);
            x[(j, 0)] = ONE;
        }
        // Alternating-sign probe guards against the estimator stalling early.
        let mut alt = CMat::zeros(n, 1);
        for i in 0..n {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            alt[(i, 0)] = C64::new(sign * (1.0 + i as f64 / (n as f64 - 1.0).max(1.0)), 0.0);
        }
        if let Some(y) = self.solve(&alt) {
            let ratio = 2.0 * y.iter().map(|z| z.norm()).sum::<f64>() / (3.0 * n as f64);
            est = est.max(ratio);
        }
        norm_a * est
    }
}

pub fn one_norm(m: &CMat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMat) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = max_entry_norm(m).max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > 1e-14 * scale {
                return false;
            }
        }
    }
    true
}

/// Eigenvalues with algebraic multiplicity. Hermitian input takes the
/// symmetric path; everything else goes through faer's Schur-based solver.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    if !is_finite(m) {
        return Err(Error::EigFailure("non-finite matrix entries".into()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    if is_hermitian(m) {
        let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 100 * n)
            .ok_or_else(|| Error::EigFailure("hermitian eigensolver did not converge".into()))?;
        return Ok(eig.eigenvalues.iter().map(|&v| C64::new(v, 0.0)).collect());
    }
    let fm = faer::Mat::<C64>::from_fn(n, n, |i, j| m[(i, j)]);
    let vals = fm
        .eigenvalues()
        .map_err(|e| Error::EigFailure(format!("eigensolver failed: {e:?}")))?;
    if vals.iter().any(|z| !z.is_finite()) {
        return Err(Error::EigFailure("non-finite eigenvalue".into()));
    }
    Ok(vals)
}

/// Largest singular value, via the Hermitian eigenproblem of the smaller
/// Gram matrix.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    if gram.nrows() == 1 {
        return gram[(0, 0)].re.max(0.0).sqrt();
    }
    let vals = SymmetricEigen::new(gram).eigenvalues;
    vals.iter().cloned().fold(0.0, f64::max).sqrt()
}

/// Singular values of a small square block, descending.
pub fn singular_values(m: &CMat) -> DVector<f64> {
    m.clone().singular_values()
}

pub fn smallest_singular_value(m: &CMat) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    singular_values(m).iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn determinant(m: &CMat) -> C64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    m.clone().lu().determinant()
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x % two_pi;
    if y > std::f64::consts::PI {
        y -= two_pi;
    } else if y <= -std::f64::consts::PI {
        y += two_pi;
    }
    y
}
