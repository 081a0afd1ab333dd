//! Finite sections of block Toeplitz and Hankel operators, the correction
//! matrices `G_{ℓ,k}(b,c)`, and dense determinant/trace oracles.
//!
//! Hankel convention: the matrix of `H(a)` has block `(j,k) = a_{j+k+1}`;
//! `H(ã)` therefore has block `(j,k) = a_{−(j+k+1)}`.

use crate::analytic::AnalyticFn;
use crate::error::{Error, Result};
use crate::linalg::{self, max_entry_norm, CMat, Factored, C64};
use crate::symbol::LaurentMatrixSeries;

/// Condition-estimate ceiling for dense determinant oracles.
pub const SECTION_COND_LIMIT: f64 = 1e12;

/// Tail bound above which a correction term is rejected.
pub const CORRECTION_TAIL_LIMIT: f64 = 1e-8;

/// Dense block matrix with `block_rows × block_cols` blocks of size `N×N`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    block_rows: usize,
    block_cols: usize,
    block_size: usize,
    data: CMat,
}

impl BlockMatrix {
    pub fn zeros(block_rows: usize, block_cols: usize, block_size: usize) -> Self {
        BlockMatrix {
            block_rows,
            block_cols,
            block_size,
            data: CMat::zeros(block_rows * block_size, block_cols * block_size),
        }
    }

    /// Fills block `(i, j)` with `f(i, j)` when it returns a block.
    fn from_block_fn<'a>(
        block_rows: usize,
        block_cols: usize,
        block_size: usize,
        f: impl Fn(usize, usize) -> Option<&'a CMat>,
    ) -> Self {
        let mut m = Self::zeros(block_rows, block_cols, block_size);
        let n = block_size;
        for i in 0..block_rows {
            for j in 0..block_cols {
                if let Some(b) = f(i, j) {
                    m.data.view_mut((i * n, j * n), (n, n)).copy_from(b);
                }
            }
        }
        m
    }

    pub fn block_rows(&self) -> usize {
        self.block_rows
    }

    pub fn block_cols(&self) -> usize {
        self.block_cols
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn block(&self, i: usize, j: usize) -> CMat {
        let n = self.block_size;
        self.data.view((i * n, j * n), (n, n)).into_owned()
    }

    pub fn dense(&self) -> &CMat {
        &self.data
    }

    pub fn into_dense(self) -> CMat {
        self.data
    }
}

/// `T_n(a) = [a_{j−k}]_{j,k=0}^n`.
pub fn toeplitz_section(a: &LaurentMatrixSeries, n: usize) -> BlockMatrix {
    let size = n + 1;
    BlockMatrix::from_block_fn(size, size, a.block_size(), |j, k| a.get(j as i64 - k as i64))
}

/// `m × m` section of `H(a)`: block `(j,k) = a_{j+k+1}`.
pub fn hankel_section(a: &LaurentMatrixSeries, m: usize) -> BlockMatrix {
    hankel_window(a, 0, m, 0, m)
}

/// Rows `row0..row0+rows`, columns `col0..col0+cols` of `H(a)`.
pub fn hankel_window(
    a: &LaurentMatrixSeries,
    row0: usize,
    rows: usize,
    col0: usize,
    cols: usize,
) -> BlockMatrix {
    BlockMatrix::from_block_fn(rows, cols, a.block_size(), |j, k| {
        a.get((row0 + j + col0 + k + 1) as i64)
    })
}

/// Correction matrix `G_{ℓ,k}(b,c)` computed on a finite truncation.
#[derive(Clone, Debug)]
pub struct CorrectionTerm {
    pub ell: usize,
    pub k: usize,
    pub value: CMat,
    pub truncation: usize,
    pub truncation_error_bound: f64,
}

/// Default truncation `max(4ℓ, ℓ+32)`.
pub fn default_correction_truncation(ell: usize) -> usize {
    (4 * ell).max(ell + 32)
}

// Σ_{i>from} N‖x_i‖ over positive offsets (or negative ones when `neg`).
fn one_sided_mass(x: &LaurentMatrixSeries, from: usize, neg: bool) -> f64 {
    let n = x.block_size() as f64;
    x.iter()
        .filter(|(k, _)| if neg { -*k > from as i64 } else { *k > from as i64 })
        .map(|(_, b)| n * max_entry_norm(b))
        .sum()
}

/// `G_{ℓ,k}(b,c) = P_0 T(c) Q_ℓ (Q_ℓ H(b) H(c̃) Q_ℓ)^k Q_ℓ T(b) P_0`, with
/// all index ranges restricted to `ℓ < i ≤ m`.
///
/// The reported bound covers everything discarded by the restriction; the
/// inner Hankel product is summed over its full (finite) support.
pub fn correction_term(
    b: &LaurentMatrixSeries,
    c: &LaurentMatrixSeries,
    ell: usize,
    k: usize,
    m: usize,
) -> Result<CorrectionTerm> {
    if b.block_size() != c.block_size() {
        return Err(Error::BlockSizeMismatch { left: b.block_size(), right: c.block_size() });
    }
    if m <= ell + 8 {
        return Err(Error::ConfigInvalid(format!("truncation m={m} must exceed ell+8={}", ell + 8)));
    }
    let n = b.block_size();
    let width = m - ell;

    // row [c_{-(ℓ+1)} … c_{-m}] and column [b_{ℓ+1}; …; b_m]
    let row = BlockMatrix::from_block_fn(1, width, n, |_, j| c.get(-((ell + 1 + j) as i64)));
    let col = BlockMatrix::from_block_fn(width, 1, n, |i, _| b.get((ell + 1 + i) as i64));

    let mut right = col.into_dense();
    if k > 0 {
        // inner sum index r runs over the joint support of b and c̃
        let r_len = (b.max_offset().max(0) as usize).min((-c.min_offset()).max(0) as usize);
        let hb = hankel_window(b, ell + 1, width, 0, r_len.max(1));
        let c_rev = c.reverse();
        let hc = hankel_window(&c_rev, 0, r_len.max(1), ell + 1, width);
        let inner = hb.dense() * hc.dense();
        for _ in 0..k {
            right = &inner * right;
        }
    }
    let value = row.dense() * right;

    // bound = γβh^k − (γ−γt)(β−βt)(h−ht)^k with one-sided coefficient masses
    let beta = one_sided_mass(b, ell, false);
    let beta_t = one_sided_mass(b, m, false);
    let gamma = one_sided_mass(c, ell, true);
    let gamma_t = one_sided_mass(c, m, true);
    let hb = one_sided_mass(b, 0, false);
    let hc = one_sided_mass(c, 0, true);
    let h = hb * hc;
    let h_t = beta_t * hc + hb * gamma_t;
    let kk = k as i32;
    let bound = (gamma * beta * h.powi(kk)
        - (gamma - gamma_t) * (beta - beta_t) * (h - h_t).max(0.0).powi(kk))
    .max(0.0);
    if bound > CORRECTION_TAIL_LIMIT {
        return Err(Error::TruncationTooSmall { m, bound });
    }
    Ok(CorrectionTerm { ell, k, value, truncation: m, truncation_error_bound: bound })
}

fn factor_section(a: &LaurentMatrixSeries, n: usize) -> Result<Factored> {
    let t = toeplitz_section(a, n).into_dense();
    let f = Factored::new(t.clone());
    let cond = f.condition_estimate(&t);
    if !(cond < SECTION_COND_LIMIT) {
        return Err(Error::NumericallySingularSection { n, cond });
    }
    Ok(f)
}

/// `log det T_n(a)` on the principal branch.
pub fn log_det_direct(a: &LaurentMatrixSeries, n: usize) -> Result<C64> {
    let ld = factor_section(a, n)?.log_det_accumulated();
    Ok(C64::new(ld.re, linalg::wrap_angle(ld.im)))
}

/// `log det T_n(a)` over a sequence of orders; the imaginary part is
/// continued so that consecutive values differ as little as possible.
pub fn log_det_scan(a: &LaurentMatrixSeries, ns: &[usize]) -> Result<Vec<(usize, C64)>> {
    use rayon::prelude::*;
    let raw: Vec<C64> = ns
        .par_iter()
        .map(|&n| log_det_direct(a, n))
        .collect::<Result<_>>()?;
    Ok(ns.iter().copied().zip(continue_branch(&raw)).collect())
}

/// Shifts imaginary parts by multiples of 2π to follow the previous value.
pub fn continue_branch(values: &[C64]) -> Vec<C64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out: Vec<C64> = Vec::with_capacity(values.len());
    for v in values {
        let z = match out.last() {
            None => *v,
            Some(prev) => {
                let turns = ((prev.im - v.im) / two_pi).round();
                C64::new(v.re, v.im + turns * two_pi)
            }
        };
        out.push(z);
    }
    out
}

/// `tr f(T_n(a)) = Σ_i f(λ_i)` over eigenvalues with algebraic multiplicity.
pub fn trace_f_direct(a: &LaurentMatrixSeries, n: usize, f: &AnalyticFn) -> Result<C64> {
    let t = toeplitz_section(a, n).into_dense();
    let eig = linalg::eigenvalues(&t)?;
    eig.into_iter().map(|z| f.eval(z)).sum()
}

/// Spectral norms of the four truncations bounded by the decay estimates.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TruncationNorms {
    /// `‖Q_n T(b) P_0‖`
    pub qn_tb_p0: f64,
    /// `‖Q_n H(b)‖`
    pub qn_hb: f64,
    /// `‖P_0 T(c) Q_n‖`
    pub p0_tc_qn: f64,
    /// `‖H(c̃) Q_n‖`
    pub hct_qn: f64,
}

/// Truncation norms on sections of order `m` (default `4n`).
pub fn truncation_norms(
    b: &LaurentMatrixSeries,
    c: &LaurentMatrixSeries,
    n: usize,
    m: Option<usize>,
) -> Result<TruncationNorms> {
    if b.block_size() != c.block_size() {
        return Err(Error::BlockSizeMismatch { left: b.block_size(), right: c.block_size() });
    }
    let m = m.unwrap_or(4 * n).max(n + 1);
    let nb = b.block_size();
    let width = m - n;

    let col = BlockMatrix::from_block_fn(width, 1, nb, |i, _| b.get((n + 1 + i) as i64));
    let row = BlockMatrix::from_block_fn(1, width, nb, |_, j| c.get(-((n + 1 + j) as i64)));

    // Hankel rows/columns beyond the coefficient support vanish; drop them.
    let b_hi = b.max_offset().max(0) as usize;
    let hb_rows = width.min(b_hi.saturating_sub(n + 1));
    let hb_cols = (m + 1).min(b_hi);
    let qn_hb = hankel_window(b, n + 1, hb_rows, 0, hb_cols);

    let c_rev = c.reverse();
    let c_hi = c_rev.max_offset().max(0) as usize;
    let hc_rows = (m + 1).min(c_hi);
    let hc_cols = width.min(c_hi.saturating_sub(n + 1));
    let hct_qn = hankel_window(&c_rev, 0, hc_rows, n + 1, hc_cols);

    Ok(TruncationNorms {
        qn_tb_p0: linalg::spectral_norm(col.dense()),
        qn_hb: linalg::spectral_norm(qn_hb.dense()),
        p0_tc_qn: linalg::spectral_norm(row.dense()),
        hct_qn: linalg::spectral_norm(hct_qn.dense()),
    })
}
