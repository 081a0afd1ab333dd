//! Matrix-valued symbols on the unit circle, stored as finitely supported
//! Laurent coefficient sequences.
//!
//! Coefficients are the source of truth. Sample grids are derived caches
//! produced on demand with the FFT; every transform reports how much
//! coefficient mass it discarded.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{self, max_entry_norm, CMat, C64, ZERO};

pub mod format;

/// Largest grid the adaptive transforms will use.
pub const MAX_GRID: usize = 1 << 18;

/// Tail mass below which coefficients are dropped by adaptive cutoffs.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Smallest power of two that is at least `max(256, 8K)`.
pub fn default_grid_size(max_offset: usize) -> usize {
    (8 * max_offset).max(256).next_power_of_two()
}

/// A finitely supported Laurent series `Σ_k a_k t^k` with `N×N` complex blocks.
#[derive(Clone, Debug)]
pub struct LaurentMatrixSeries {
    block_size: usize,
    // blocks[i] is the coefficient at offset lo + i
    lo: i64,
    blocks: Vec<CMat>,
    grid_size: usize,
    smoothness: Option<f64>,
}

/// Samples `a(t_j)` at `t_j = exp(2πi j/M)`.
#[derive(Clone, Debug)]
pub struct SymbolGrid {
    block_size: usize,
    samples: Vec<CMat>,
}

/// Output of a coefficient transform together with the discarded energy
/// `Σ_{|k|>K} ‖a_k‖_F²`.
#[derive(Clone, Debug)]
pub struct CoefficientExtraction {
    pub series: LaurentMatrixSeries,
    pub tail_energy: f64,
}

/// Result of a pointwise inverse with its sup-norm residual on the grid.
#[derive(Clone, Debug)]
pub struct PointwiseInverse {
    pub series: LaurentMatrixSeries,
    pub residual: f64,
    /// Smallest singular value of `a(t_j)` over the grid.
    pub margin: f64,
}

/// How a pointwise transform chooses which offsets to keep.
#[derive(Clone, Copy, Debug)]
pub enum Cutoff {
    /// Keep offsets in `[-K, K]`.
    Fixed(usize),
    /// Keep the shortest symmetric range whose discarded mass is below `tol`,
    /// never more than `cap` offsets on either side.
    Auto { tol: f64, cap: usize },
}

impl Cutoff {
    pub fn auto() -> Self {
        Cutoff::Auto { tol: DEFAULT_TAIL_TOL, cap: MAX_GRID / 4 }
    }
}

impl SymbolGrid {
    pub fn new(block_size: usize, samples: Vec<CMat>) -> Result<Self> {
        if samples.is_empty() || !samples.len().is_power_of_two() {
            return Err(Error::ConfigInvalid(format!(
                "grid size {} is not a power of two",
                samples.len()
            )));
        }
        for s in &samples {
            if s.nrows() != block_size || s.ncols() != block_size {
                return Err(Error::BlockSizeMismatch { left: block_size, right: s.nrows() });
            }
        }
        Ok(SymbolGrid { block_size, samples })
    }

    /// Grid of a scalar function evaluated at `θ_j = 2πj/M`.
    pub fn from_scalar_fn(grid_size: usize, f: impl Fn(f64) -> C64) -> Result<Self> {
        let samples = (0..grid_size)
            .map(|j| CMat::from_element(1, 1, f(2.0 * PI * j as f64 / grid_size as f64)))
            .collect();
        SymbolGrid::new(1, samples)
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[CMat] {
        &self.samples
    }

    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.samples.len() as f64
    }
}

impl PartialEq for LaurentMatrixSeries {
    fn eq(&self, other: &Self) -> bool {
        if self.block_size != other.block_size {
            return false;
        }
        let lo = self.min_offset().min(other.min_offset());
        let hi = self.max_offset().max(other.max_offset());
        (lo..=hi).all(|k| self.coeff(k) == other.coeff(k))
    }
}

impl LaurentMatrixSeries {
    /// The zero symbol.
    pub fn zero(block_size: usize) -> Self {
        assert!(block_size > 0, "block size must be positive");
        LaurentMatrixSeries {
            block_size,
            lo: 0,
            blocks: Vec::new(),
            grid_size: default_grid_size(0),
            smoothness: None,
        }
    }

    pub fn identity(block_size: usize) -> Self {
        Self::constant(CMat::identity(block_size, block_size))
    }

    pub fn constant(block: CMat) -> Self {
        assert_eq!(block.nrows(), block.ncols(), "blocks must be square");
        let n = block.nrows();
        Self::from_blocks(n, [(0, block)]).expect("square block")
    }

    /// Builds a series from `(offset, block)` pairs; repeated offsets add up.
    pub fn from_blocks(
        block_size: usize,
        entries: impl IntoIterator<Item = (i64, CMat)>,
    ) -> Result<Self> {
        let entries: Vec<(i64, CMat)> = entries.into_iter().collect();
        for (_, b) in &entries {
            if b.nrows() != block_size || b.ncols() != block_size {
                return Err(Error::BlockSizeMismatch { left: block_size, right: b.nrows() });
            }
        }
        let mut s = Self::zero(block_size);
        if entries.is_empty() {
            return Ok(s);
        }
        let lo = entries.iter().map(|e| e.0).min().unwrap();
        let hi = entries.iter().map(|e| e.0).max().unwrap();
        s.lo = lo;
        s.blocks = vec![CMat::zeros(block_size, block_size); (hi - lo + 1) as usize];
        for (k, b) in entries {
            s.blocks[(k - lo) as usize] += b;
        }
        s.normalize();
        Ok(s)
    }

    /// Scalar series from `(offset, coefficient)` pairs.
    pub fn scalar(entries: &[(i64, C64)]) -> Self {
        Self::from_blocks(1, entries.iter().map(|&(k, c)| (k, CMat::from_element(1, 1, c))))
            .expect("1x1 blocks")
    }

    /// Scalar series from real coefficients.
    pub fn scalar_real(entries: &[(i64, f64)]) -> Self {
        let v: Vec<(i64, C64)> = entries.iter().map(|&(k, c)| (k, C64::new(c, 0.0))).collect();
        Self::scalar(&v)
    }

    /// Series from a contiguous coefficient range starting at `lo`.
    pub(crate) fn from_range(block_size: usize, lo: i64, blocks: Vec<CMat>) -> Self {
        let mut s = LaurentMatrixSeries {
            block_size,
            lo,
            blocks,
            grid_size: 0,
            smoothness: None,
        };
        s.normalize();
        s
    }

    // Strip exactly-zero blocks at both ends and refresh the grid size.
    fn normalize(&mut self) {
        while self.blocks.last().is_some_and(|b| b.iter().all(|z| *z == ZERO)) {
            self.blocks.pop();
        }
        let lead = self
            .blocks
            .iter()
            .take_while(|b| b.iter().all(|z| *z == ZERO))
            .count();
        if lead > 0 {
            self.blocks.drain(..lead);
            self.lo += lead as i64;
        }
        if self.blocks.is_empty() {
            self.lo = 0;
        }
        self.grid_size = default_grid_size(self.max_abs_offset());
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn is_scalar(&self) -> bool {
        self.block_size == 1
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn smoothness(&self) -> Option<f64> {
        self.smoothness
    }

    pub fn with_smoothness(mut self, gamma: Option<f64>) -> Self {
        self.smoothness = gamma;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Smallest stored offset (0 for the zero symbol).
    pub fn min_offset(&self) -> i64 {
        self.lo
    }

    /// Largest stored offset (0 for the zero symbol).
    pub fn max_offset(&self) -> i64 {
        if self.blocks.is_empty() {
            0
        } else {
            self.lo + self.blocks.len() as i64 - 1
        }
    }

    pub fn max_abs_offset(&self) -> usize {
        self.min_offset().unsigned_abs().max(self.max_offset().unsigned_abs()) as usize
    }

    /// Block at offset `k`, `None` when outside the stored range.
    pub fn get(&self, k: i64) -> Option<&CMat> {
        if k < self.lo {
            return None;
        }
        self.blocks.get((k - self.lo) as usize)
    }

    /// Block at offset `k`; the zero block when absent.
    pub fn coeff(&self, k: i64) -> CMat {
        self.get(k)
            .cloned()
            .unwrap_or_else(|| CMat::zeros(self.block_size, self.block_size))
    }

    /// Scalar coefficient at `k` (entry (0,0)).
    pub fn scalar_coeff(&self, k: i64) -> C64 {
        self.get(k).map(|b| b[(0, 0)]).unwrap_or(ZERO)
    }

    /// Stored `(offset, block)` pairs in increasing offset order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, &CMat)> {
        self.blocks.iter().enumerate().map(move |(i, b)| (self.lo + i as i64, b))
    }

    /// Offsets with a nonzero block.
    pub fn support(&self) -> Vec<i64> {
        self.iter()
            .filter(|(_, b)| b.iter().any(|z| *z != ZERO))
            .map(|(k, _)| k)
            .collect()
    }

    /// `Σ_k a_k e^{ikθ}`.
    pub fn evaluate(&self, theta: f64) -> CMat {
        let mut out = CMat::zeros(self.block_size, self.block_size);
        for (k, b) in self.iter() {
            let phase = C64::from_polar(1.0, k as f64 * theta);
            out += b * phase;
        }
        out
    }

    /// `ã(t) = a(1/t)`: offset `k` maps to `−k`.
    pub fn reverse(&self) -> Self {
        let blocks: Vec<CMat> = self.blocks.iter().rev().cloned().collect();
        let mut s = Self::from_range(self.block_size, -self.max_offset(), blocks);
        s.smoothness = self.smoothness;
        s
    }

    /// Restriction to offsets in `[lo, hi]`.
    pub fn restrict(&self, lo: i64, hi: i64) -> Self {
        let entries = self
            .iter()
            .filter(|(k, _)| *k >= lo && *k <= hi)
            .map(|(k, b)| (k, b.clone()));
        let mut s = Self::from_blocks(self.block_size, entries).expect("same block size");
        s.smoothness = self.smoothness;
        s
    }

    /// Part supported on offsets `>= 0`.
    pub fn analytic_part(&self) -> Self {
        self.restrict(0, i64::MAX)
    }

    /// Part supported on offsets `<= 0`.
    pub fn coanalytic_part(&self) -> Self {
        self.restrict(i64::MIN, 0)
    }

    /// Largest coefficient norm on offsets `> 0` (used as leakage measure).
    pub fn positive_mass(&self) -> f64 {
        self.iter()
            .filter(|(k, _)| *k > 0)
            .map(|(_, b)| max_entry_norm(b))
            .fold(0.0, f64::max)
    }

    /// Largest coefficient norm on offsets `< 0`.
    pub fn negative_mass(&self) -> f64 {
        self.iter()
            .filter(|(k, _)| *k < 0)
            .map(|(_, b)| max_entry_norm(b))
            .fold(0.0, f64::max)
    }

    /// `Σ_k ‖a_k‖`, an upper bound for the sup-norm on the circle.
    pub fn coefficient_sum_norm(&self) -> f64 {
        self.blocks.iter().map(max_entry_norm).sum()
    }

    /// `Σ_{|k|>K} ‖a_k‖`.
    pub fn tail_mass(&self, cutoff: usize) -> f64 {
        self.iter()
            .filter(|(k, _)| k.unsigned_abs() as usize > cutoff)
            .map(|(_, b)| max_entry_norm(b))
            .sum()
    }

    /// Shortest symmetric truncation whose discarded mass is below `tol`.
    pub fn trimmed(&self, tol: f64, cap: usize) -> Self {
        let kmax = self.max_abs_offset();
        // mass[k] = Σ over offsets with |offset| == k
        let mut mass = vec![0.0; kmax + 1];
        for (k, b) in self.iter() {
            mass[k.unsigned_abs() as usize] += max_entry_norm(b);
        }
        let mut tail = 0.0;
        let mut keep = 0;
        for k in (0..=kmax).rev() {
            if tail + mass[k] >= tol {
                keep = k;
                break;
            }
            tail += mass[k];
        }
        let keep = keep.min(cap) as i64;
        self.restrict(-keep, keep)
    }

    pub fn scale(&self, s: C64) -> Self {
        let blocks = self.blocks.iter().map(|b| b * s).collect();
        let mut out = Self::from_range(self.block_size, self.lo, blocks);
        out.smoothness = self.smoothness;
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_block_size(other)?;
        let entries = self
            .iter()
            .chain(other.iter())
            .map(|(k, b)| (k, b.clone()))
            .collect::<Vec<_>>();
        Self::from_blocks(self.block_size, entries)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// `a − λI`.
    pub fn shift(&self, lambda: C64) -> Self {
        let id = CMat::identity(self.block_size, self.block_size) * (-lambda);
        let mut out = self.add(&Self::constant(id)).expect("same block size");
        out.smoothness = self.smoothness;
        out
    }

    /// `a*(t)`: the pointwise conjugate transpose, `(a*)_k = (a_{−k})^H`.
    pub fn adjoint(&self) -> Self {
        let blocks = self.blocks.iter().rev().map(|b| b.adjoint()).collect();
        Self::from_range(self.block_size, -self.max_offset(), blocks)
    }

    fn check_block_size(&self, other: &Self) -> Result<()> {
        if self.block_size != other.block_size {
            return Err(Error::BlockSizeMismatch { left: self.block_size, right: other.block_size });
        }
        Ok(())
    }

    /// Exact block convolution: `(ab)_k = Σ_j a_j b_{k−j}`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_block_size(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(self.block_size));
        }
        let n = self.block_size;
        let len = self.blocks.len() + other.blocks.len() - 1;
        let lo = self.lo + other.lo;
        let blocks = if n == 1 {
            let a: Vec<C64> = self.blocks.iter().map(|b| b[(0, 0)]).collect();
            let b: Vec<C64> = other.blocks.iter().map(|b| b[(0, 0)]).collect();
            let mut out = vec![ZERO; len];
            for (i, x) in a.iter().enumerate() {
                if *x == ZERO {
                    continue;
                }
                for (j, y) in b.iter().enumerate() {
                    out[i + j] += x * y;
                }
            }
            out.into_iter().map(|z| CMat::from_element(1, 1, z)).collect()
        } else {
            let mut out = vec![CMat::zeros(n, n); len];
            for (i, x) in self.blocks.iter().enumerate() {
                for (j, y) in other.blocks.iter().enumerate() {
                    out[i + j].gemm(C64::new(1.0, 0.0), x, y, C64::new(1.0, 0.0));
                }
            }
            out
        };
        Ok(Self::from_range(n, lo, blocks))
    }

    /// Samples on the `M`-point uniform grid.
    pub fn sample(&self, grid_size: usize) -> Result<SymbolGrid> {
        if !grid_size.is_power_of_two() {
            return Err(Error::ConfigInvalid(format!("grid size {grid_size} is not a power of two")));
        }
        let n = self.block_size;
        let mut samples = vec![CMat::zeros(n, n); grid_size];
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_inverse(grid_size);
        let mut buf = vec![ZERO; grid_size];
        for r in 0..n {
            for c in 0..n {
                buf.fill(ZERO);
                for (k, b) in self.iter() {
                    buf[k.rem_euclid(grid_size as i64) as usize] += b[(r, c)];
                }
                fft.process(&mut buf);
                for (s, v) in samples.iter_mut().zip(&buf) {
                    s[(r, c)] = *v;
                }
            }
        }
        SymbolGrid::new(n, samples)
    }

    /// Samples on the default grid.
    pub fn sample_default(&self) -> SymbolGrid {
        self.sample(self.grid_size).expect("default grid is a power of two")
    }

    /// `Σ_k ‖a_k‖²(|k|+1)` with the maximum-entry norm.
    pub fn krein_norm(&self) -> f64 {
        self.iter()
            .map(|(k, b)| {
                let m = max_entry_norm(b);
                m * m * (k.unsigned_abs() as f64 + 1.0)
            })
            .sum()
    }

    /// Winding number of `θ ↦ det a(e^{iθ})`.
    pub fn winding_number(&self) -> Result<i64> {
        let grid = self.sample(self.grid_size.max(1024))?;
        let dets = checked_determinants(&grid)?;
        winding_of_samples(&dets)
    }
}

/// Determinants at every grid node; fails when a node is numerically singular.
pub(crate) fn checked_determinants(grid: &SymbolGrid) -> Result<Vec<C64>> {
    let margin = singular_margin(grid);
    if margin.0 <= 1e-10 {
        return Err(Error::SingularSymbol { node: margin.1, margin: margin.0 });
    }
    Ok(grid.samples().iter().map(linalg::determinant).collect())
}

/// Smallest singular value over the grid and the node attaining it.
pub(crate) fn singular_margin(grid: &SymbolGrid) -> (f64, usize) {
    grid.samples()
        .iter()
        .enumerate()
        .map(|(j, s)| (linalg::smallest_singular_value(s), j))
        .fold((f64::INFINITY, 0), |acc, v| if v.0 < acc.0 { v } else { acc })
}

pub(crate) fn winding_of_samples(values: &[C64]) -> Result<i64> {
    let m = values.len();
    let mut total = 0.0;
    for j in 0..m {
        let a = values[j];
        let b = values[(j + 1) % m];
        let step = (b / a).arg();
        if step.abs() >= PI / 2.0 {
            return Err(Error::GridTooCoarse { node: j, jump: step });
        }
        total += step;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Branch-continuous logarithm of nonvanishing samples along the grid.
pub(crate) fn continuous_log(values: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(values.len());
    let mut phase = 0.0;
    for (j, z) in values.iter().enumerate() {
        if j == 0 {
            phase = z.arg();
        } else {
            phase += (z / values[j - 1]).arg();
        }
        out.push(C64::new(z.norm().ln(), phase));
    }
    out
}

fn fft_planes(grid: &SymbolGrid) -> Vec<CMat> {
    let m = grid.len();
    let n = grid.block_size();
    let mut coeffs = vec![CMat::zeros(n, n); m];
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    let mut buf = vec![ZERO; m];
    let inv = 1.0 / m as f64;
    for r in 0..n {
        for c in 0..n {
            for (slot, s) in buf.iter_mut().zip(grid.samples()) {
                *slot = s[(r, c)];
            }
            fft.process(&mut buf);
            for (out, v) in coeffs.iter_mut().zip(&buf) {
                out[(r, c)] = v * inv;
            }
        }
    }
    coeffs
}

// Coefficients indexed by frequency mod M, unfolded to offsets in (−M/2, M/2].
fn unfold(coeffs: Vec<CMat>, keep: usize) -> (Vec<(i64, CMat)>, f64) {
    let m = coeffs.len() as i64;
    let mut kept = Vec::new();
    let mut tail = 0.0;
    for (idx, b) in coeffs.into_iter().enumerate() {
        let idx = idx as i64;
        let k = if idx > m / 2 { idx - m } else { idx };
        if k.unsigned_abs() as usize <= keep {
            kept.push((k, b));
        } else {
            tail += b.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
    }
    (kept, tail)
}

/// Discrete Fourier coefficients `a_k`, `|k| ≤ K`, of a sampled symbol.
pub fn coefficients_from_samples(grid: &SymbolGrid, cutoff: usize) -> Result<CoefficientExtraction> {
    if 2 * cutoff + 2 > grid.len() {
        return Err(Error::CutoffTooLarge { cutoff, grid_size: grid.len() });
    }
    let coeffs = fft_planes(grid);
    let (kept, tail_energy) = unfold(coeffs, cutoff);
    let series = LaurentMatrixSeries::from_blocks(grid.block_size(), kept)?;
    Ok(CoefficientExtraction { series, tail_energy })
}

/// Applies a grid-level map to the samples of `a` and transforms back,
/// doubling the grid until the upper quarter of the spectrum is negligible.
pub(crate) fn map_samples(
    a: &LaurentMatrixSeries,
    out_block_size: usize,
    cutoff: Cutoff,
    map: impl Fn(&SymbolGrid) -> Result<Vec<CMat>>,
) -> Result<CoefficientExtraction> {
    let min_grid = match cutoff {
        Cutoff::Fixed(k) => default_grid_size(k.max(a.max_abs_offset())),
        Cutoff::Auto { .. } => default_grid_size(4 * a.max_abs_offset().max(8)),
    };
    let mut m = min_grid.min(MAX_GRID);
    loop {
        let grid = a.sample(m)?;
        let mapped = SymbolGrid::new(out_block_size, map(&grid)?)?;
        let coeffs = fft_planes(&mapped);
        let total: f64 = coeffs.iter().map(max_entry_norm).sum();
        let upper: f64 = coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let k = if *i > m / 2 { m - i } else { *i };
                k > m / 4
            })
            .map(|(_, b)| max_entry_norm(b))
            .sum();
        let alias_tol = match cutoff {
            Cutoff::Auto { tol, .. } => tol * 1e-2,
            Cutoff::Fixed(_) => 1e-15,
        } * total.max(1.0);
        if upper <= alias_tol || m >= MAX_GRID {
            let keep = match cutoff {
                Cutoff::Fixed(k) => k.min(m / 2 - 1),
                Cutoff::Auto { .. } => m / 2,
            };
            let (kept, tail_energy) = unfold(coeffs, keep);
            let mut series = LaurentMatrixSeries::from_blocks(out_block_size, kept)?;
            if let Cutoff::Auto { tol, cap } = cutoff {
                series = series.trimmed(tol, cap);
            }
            return Ok(CoefficientExtraction { series, tail_energy });
        }
        m *= 2;
    }
}

/// Pointwise inverse `a(t)^{-1}` with result supported on `[−K', K']`.
pub fn pointwise_inverse(a: &LaurentMatrixSeries, cutoff: Cutoff) -> Result<PointwiseInverse> {
    let n = a.block_size();
    let probe = a.sample(a.grid_size().max(1024))?;
    let (margin, node) = singular_margin(&probe);
    if margin <= 1e-10 {
        return Err(Error::SingularSymbol { node, margin });
    }
    let ext = map_samples(a, n, cutoff, |grid| {
        let (m, node) = singular_margin(grid);
        if m <= 1e-10 {
            return Err(Error::SingularSymbol { node, margin: m });
        }
        grid.samples()
            .iter()
            .enumerate()
            .map(|(j, s)| {
                s.clone()
                    .try_inverse()
                    .ok_or(Error::SingularSymbol { node: j, margin: 0.0 })
            })
            .collect()
    })?;
    let residual = product_residual(a, &ext.series, &LaurentMatrixSeries::identity(n))?;
    Ok(PointwiseInverse { series: ext.series, residual, margin })
}

/// Cutoff for inverting `a` given its smallest singular value `margin`:
/// `K' = K·(1 + ceil(40/|log(1 − q)|))` with `q = margin / Σ‖a_k‖`.
///
/// Writing `a = S(I − r)` with `‖r‖ ≤ 1 − q`, the Neumann term `r^j` has
/// support `jK` and size `(1 − q)^j`, so the kept terms reach `e^{−40}`.
pub fn inverse_cutoff_heuristic(a: &LaurentMatrixSeries, margin: f64) -> usize {
    let k = a.max_abs_offset().max(1);
    let q = (margin / a.coefficient_sum_norm().max(f64::MIN_POSITIVE)).clamp(1e-6, 1.0 - 1e-12);
    let rate = (1.0 - q).ln().abs();
    k * (1 + (40.0 / rate).ceil() as usize)
}

/// `sup_j ‖x(t_j) y(t_j) − target(t_j)‖` on a grid fine enough for all three.
pub fn product_residual(
    x: &LaurentMatrixSeries,
    y: &LaurentMatrixSeries,
    target: &LaurentMatrixSeries,
) -> Result<f64> {
    let k = x.max_abs_offset() + y.max_abs_offset() + target.max_abs_offset();
    let m = (2 * k + 2).max(256).next_power_of_two().min(MAX_GRID);
    let gx = x.sample(m)?;
    let gy = y.sample(m)?;
    let gt = target.sample(m)?;
    Ok(gx
        .samples()
        .iter()
        .zip(gy.samples())
        .zip(gt.samples())
        .map(|((a, b), t)| max_entry_norm(&(a * b - t)))
        .fold(0.0, f64::max))
}

/// Scalar Hölder-Zygmund test symbol
/// `shift + Σ_{j=0}^{J} 2^{−γj} cos(2^j θ + φ_j)` with `shift = 2 + Σ_j 2^{−γj}`.
///
/// Phases are zero when `seed` is `None`, otherwise drawn uniformly from
/// `[0, 2π)` by a ChaCha8 stream seeded with `seed`.
pub fn zygmund_test_symbol(gamma: f64, levels: u32, seed: Option<u64>) -> Result<LaurentMatrixSeries> {
    if !(gamma > 0.0) || levels < 1 || levels > 20 {
        return Err(Error::ConfigInvalid(format!(
            "zygmund symbol needs gamma > 0 and 1 <= levels <= 20 (got {gamma}, {levels})"
        )));
    }
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let mut entries = Vec::new();
    let mut amp_sum = 0.0;
    for j in 0..=levels {
        let amp = 2f64.powf(-gamma * j as f64);
        amp_sum += amp;
        let phi = rng.as_mut().map(|r| r.random::<f64>() * 2.0 * PI).unwrap_or(0.0);
        let k = 1i64 << j;
        entries.push((k, C64::from_polar(0.5 * amp, phi)));
        entries.push((-k, C64::from_polar(0.5 * amp, -phi)));
    }
    entries.push((0, C64::new(2.0 + amp_sum, 0.0)));
    Ok(LaurentMatrixSeries::scalar(&entries).with_smoothness(Some(gamma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture() -> LaurentMatrixSeries {
        LaurentMatrixSeries::scalar_real(&[(-1, -0.5), (0, 1.25), (1, -0.5)])
    }

    fn close(a: C64, b: f64, tol: f64) -> bool {
        (a - C64::new(b, 0.0)).norm() <= tol
    }

    #[test]
    fn coefficients_of_constant() {
        let grid = SymbolGrid::from_scalar_fn(16, |_| C64::new(1.0, 0.0)).unwrap();
        let ext = coefficients_from_samples(&grid, 3).unwrap();
        assert!(close(ext.series.scalar_coeff(0), 1.0, 1e-15));
        for k in [-3, -2, -1, 1, 2, 3] {
            assert!(ext.series.scalar_coeff(k).norm() < 1e-15);
        }
    }

    #[test]
    fn coefficients_of_fixture() {
        let grid = SymbolGrid::from_scalar_fn(16, |t| C64::new(1.25 - t.cos(), 0.0)).unwrap();
        let s = coefficients_from_samples(&grid, 2).unwrap().series;
        assert!(close(s.scalar_coeff(0), 1.25, 1e-14));
        assert!(close(s.scalar_coeff(1), -0.5, 1e-14));
        assert!(close(s.scalar_coeff(-1), -0.5, 1e-14));
        assert!(s.scalar_coeff(2).norm() < 1e-14 && s.scalar_coeff(-2).norm() < 1e-14);
    }

    #[test]
    fn coefficients_outside_cutoff_go_to_tail() {
        let grid = SymbolGrid::from_scalar_fn(16, |t| C64::from_polar(1.0, 3.0 * t)).unwrap();
        let ext = coefficients_from_samples(&grid, 2).unwrap();
        assert!(ext.series.iter().all(|(_, b)| b[(0, 0)].norm() < 1e-14));
        assert!((ext.tail_energy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cutoff_too_large() {
        let grid = SymbolGrid::from_scalar_fn(8, |_| C64::new(1.0, 0.0)).unwrap();
        assert!(matches!(coefficients_from_samples(&grid, 4), Err(Error::CutoffTooLarge { .. })));
    }

    #[test]
    fn evaluate_fixture() {
        let a = fixture();
        assert!(close(a.evaluate(0.0)[(0, 0)], 0.25, 1e-15));
        assert!(close(a.evaluate(PI)[(0, 0)], 2.25, 1e-15));
        let id = LaurentMatrixSeries::identity(3);
        assert_eq!(id.evaluate(0.7), CMat::identity(3, 3));
    }

    #[test]
    fn reverse_negates_offsets() {
        let a = LaurentMatrixSeries::scalar_real(&[(0, 1.0), (1, 0.3)]);
        let r = a.reverse();
        assert_eq!(r.scalar_coeff(-1), C64::new(0.3, 0.0));
        assert_eq!(r.scalar_coeff(0), C64::new(1.0, 0.0));
        assert_eq!(r.scalar_coeff(1), ZERO);
        assert_eq!(fixture().reverse(), fixture());
    }

    #[test]
    fn inverse_of_constant_and_monomial() {
        let two = LaurentMatrixSeries::scalar_real(&[(0, 2.0)]);
        let inv = pointwise_inverse(&two, Cutoff::Fixed(4)).unwrap().series;
        assert!(close(inv.scalar_coeff(0), 0.5, 1e-15));

        let t = LaurentMatrixSeries::scalar_real(&[(1, 1.0)]);
        let inv = pointwise_inverse(&t, Cutoff::Fixed(4)).unwrap().series;
        assert!(close(inv.scalar_coeff(-1), 1.0, 1e-14));
        for k in [-4, -3, -2, 0, 1, 2, 3, 4] {
            assert!(inv.scalar_coeff(k).norm() < 1e-14);
        }
    }

    #[test]
    fn inverse_geometric_series() {
        let a = LaurentMatrixSeries::scalar_real(&[(0, 1.0), (1, -0.5)]);
        let inv = pointwise_inverse(&a, Cutoff::Fixed(40)).unwrap();
        for k in 0..=40 {
            assert!(close(inv.series.scalar_coeff(k), 0.5f64.powi(k as i32), 1e-10), "k={k}");
        }
        for k in -40..0 {
            assert!(inv.series.scalar_coeff(k).norm() < 1e-10);
        }
        assert!(inv.residual < 1e-10);
    }

    #[test]
    fn inverse_of_singular_symbol_fails() {
        // 1 - t vanishes at θ = 0
        let a = LaurentMatrixSeries::scalar_real(&[(0, 1.0), (1, -1.0)]);
        assert!(matches!(pointwise_inverse(&a, Cutoff::Fixed(8)), Err(Error::SingularSymbol { node: 0, .. })));
    }

    #[test]
    fn multiply_examples() {
        let p = LaurentMatrixSeries::scalar_real(&[(0, 1.0), (1, -0.5)]);
        let q = LaurentMatrixSeries::scalar_real(&[(0, 1.0), (-1, -0.5)]);
        assert_eq!(p.multiply(&q).unwrap(), fixture());
        assert_eq!(fixture().multiply(&LaurentMatrixSeries::identity(1)).unwrap(), fixture());
        let t = LaurentMatrixSeries::scalar_real(&[(1, 1.0)]);
        assert_eq!(t.multiply(&t.reverse()).unwrap(), LaurentMatrixSeries::identity(1));
        assert!(matches!(
            t.multiply(&LaurentMatrixSeries::identity(2)),
            Err(Error::BlockSizeMismatch { .. })
        ));
    }

    #[test]
    fn zygmund_coefficients() {
        let a = zygmund_test_symbol(1.0, 2, None).unwrap();
        for (k, v) in [(1, 0.5), (2, 0.25), (4, 0.125), (0, 3.75)] {
            assert!(close(a.scalar_coeff(k), v, 1e-15), "k={k}");
            assert!(close(a.scalar_coeff(-k), v, 1e-15), "k=-{k}");
        }
        assert_eq!(a.smoothness(), Some(1.0));

        let b = zygmund_test_symbol(0.6, 6, Some(9)).unwrap();
        for k in b.support() {
            let m = k.unsigned_abs();
            assert!(m == 0 || m.is_power_of_two(), "offset {k}");
        }
        // the symbol is real-valued: a_{-k} = conj(a_k)
        for k in 1..=64 {
            assert!((b.scalar_coeff(-k) - b.scalar_coeff(k).conj()).norm() < 1e-15);
        }

        let g2 = zygmund_test_symbol(2.0, 1, None).unwrap();
        let g1 = zygmund_test_symbol(1.0, 1, None).unwrap();
        assert!(close(g2.scalar_coeff(2), 0.5 * 0.25, 1e-15));
        assert!(close(g1.scalar_coeff(2), 0.5 * 0.5, 1e-15));
    }

    #[test]
    fn zygmund_is_deterministic() {
        let a = zygmund_test_symbol(0.75, 5, Some(7)).unwrap();
        let b = zygmund_test_symbol(0.75, 5, Some(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.winding_number().unwrap(), 0);
    }

    #[test]
    fn krein_norm_examples() {
        assert_eq!(LaurentMatrixSeries::identity(2).krein_norm(), 1.0);
        assert!((fixture().krein_norm() - 2.5625).abs() < 1e-15);
        assert_eq!(LaurentMatrixSeries::zero(1).krein_norm(), 0.0);
    }

    #[test]
    fn winding_examples() {
        assert_eq!(LaurentMatrixSeries::scalar_real(&[(1, 1.0)]).winding_number().unwrap(), 1);
        assert_eq!(fixture().winding_number().unwrap(), 0);
        assert_eq!(LaurentMatrixSeries::scalar_real(&[(-2, 1.0)]).winding_number().unwrap(), -2);
        let singular = LaurentMatrixSeries::scalar_real(&[(0, 1.0), (1, 1.0)]);
        assert!(matches!(singular.winding_number(), Err(Error::SingularSymbol { .. })));
    }

    #[test]
    fn winding_of_block_symbol_uses_determinant() {
        let mut b1 = CMat::zeros(2, 2);
        b1[(0, 0)] = C64::new(1.0, 0.0);
        let mut b0 = CMat::zeros(2, 2);
        b0[(1, 1)] = C64::new(1.0, 0.0);
        // diag(t, 1)
        let a = LaurentMatrixSeries::from_blocks(2, [(1, b1), (0, b0)]).unwrap();
        assert_eq!(a.winding_number().unwrap(), 1);
    }

    #[test]
    fn coarse_grid_is_reported() {
        let samples = [C64::new(1.0, 0.0), C64::new(-1.0, 0.1), C64::new(1.0, 0.0), C64::new(-1.0, -0.1)];
        assert!(matches!(winding_of_samples(&samples), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn trimmed_drops_small_tail() {
        let a = LaurentMatrixSeries::scalar_real(&[(0, 1.0), (3, 1e-14), (-5, 1e-15)]);
        let t = a.trimmed(1e-12, 100);
        assert_eq!(t.max_abs_offset(), 0);
    }

    fn arb_series(max_k: i64) -> impl Strategy<Value = LaurentMatrixSeries> {
        prop::collection::vec((-max_k..=max_k, -1.0f64..1.0, -1.0f64..1.0), 1..6).prop_map(|v| {
            let e: Vec<(i64, C64)> = v.into_iter().map(|(k, re, im)| (k, C64::new(re, im))).collect();
            LaurentMatrixSeries::scalar(&e)
        })
    }

    fn arb_block_series() -> impl Strategy<Value = LaurentMatrixSeries> {
        prop::collection::vec((-3i64..=3, prop::collection::vec(-1.0f64..1.0, 8)), 1..4).prop_map(|v| {
            let e = v.into_iter().map(|(k, x)| {
                let m = CMat::from_fn(2, 2, |r, c| C64::new(x[2 * r + c], x[4 + 2 * r + c]));
                (k, m)
            });
            LaurentMatrixSeries::from_blocks(2, e).unwrap()
        })
    }

    proptest! {
        #[test]
        fn round_trip_through_samples(a in arb_series(12)) {
            let m = a.grid_size();
            let k = a.max_abs_offset();
            prop_assume!(m > 2 * k + 2);
            let back = coefficients_from_samples(&a.sample(m).unwrap(), k).unwrap().series;
            let scale = a.coefficient_sum_norm().max(1.0);
            for kk in -(k as i64)..=(k as i64) {
                prop_assert!((back.scalar_coeff(kk) - a.scalar_coeff(kk)).norm() <= 1e-12 * scale);
            }
        }

        #[test]
        fn reverse_is_involution(a in arb_series(10)) {
            prop_assert_eq!(a.reverse().reverse(), a);
        }

        #[test]
        fn multiply_associative(a in arb_block_series(), b in arb_block_series(), c in arb_block_series()) {
            let left = a.multiply(&b).unwrap().multiply(&c).unwrap();
            let right = a.multiply(&b.multiply(&c).unwrap()).unwrap();
            let diff = left.sub(&right).unwrap();
            prop_assert!(diff.coefficient_sum_norm() <= 1e-13 * left.coefficient_sum_norm().max(1.0));
            prop_assert_eq!(a.multiply(&LaurentMatrixSeries::identity(2)).unwrap(), a);
        }

        #[test]
        fn winding_invariant_under_positive_scaling(a in arb_series(4), s in 0.01f64..100.0) {
            if let Ok(w) = a.winding_number() {
                prop_assert_eq!(a.scale(C64::new(s, 0.0)).winding_number().unwrap(), w);
            }
        }

        #[test]
        fn inverse_residual_small(c in 1.5f64..4.0, x in -0.5f64..0.5, y in -0.5f64..0.5) {
            // dominant constant keeps the symbol away from zero
            let a = LaurentMatrixSeries::scalar(&[(0, C64::new(c, 0.0)), (1, C64::new(x, y)), (-2, C64::new(y, x))]);
            let probe = a.sample(1024).unwrap();
            let (margin, _) = singular_margin(&probe);
            let k = inverse_cutoff_heuristic(&a, margin);
            let inv = pointwise_inverse(&a, Cutoff::Fixed(k)).unwrap();
            prop_assert!(inv.residual <= 1e-8, "residual {}", inv.residual);
        }
    }
}
