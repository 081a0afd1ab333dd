//! Szegő-Widom constants and the higher-order expansion of `log det T_n(a)`:
//!
//! `log det T_n(a) ≈ (n+1) log G(a) + log Ẽ(a) + tr Σ_{ℓ=1}^n H_ℓ`,
//! `H_ℓ = Σ_{j=1}^{p−1} (1/j) (Σ_{k=0}^{p−j−1} G_{ℓ,k}(b,c))^j`.
//!
//! `log Ẽ(a)` is fixed as `log E(a) − Σ_{ℓ≥1} tr H_ℓ`, the only constant
//! compatible with the first-order formula once the corrections converge.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::factor::{b_c_from_factors, canonical_wh, WHFactors, DEFAULT_SECTION};
use crate::fit::{fit_decay, relative_floors, DecayFit};
use crate::linalg::{self, CMat, Factored, C64};
use crate::symbol::{
    checked_determinants, continuous_log, pointwise_inverse, winding_of_samples, Cutoff,
    LaurentMatrixSeries, MAX_GRID,
};
use crate::toeplitz::{correction_term, hankel_window, log_det_direct};

/// Largest Hankel section tried for `E(a)`.
pub const SZEGO_MAX_SECTION: usize = 4096;
/// Successive `E(a)` values must agree to this.
pub const SZEGO_TOL: f64 = 1e-10;

/// Mean of the branch-continuous `log det a` over an `M`-point grid.
fn mean_log_det(a: &LaurentMatrixSeries, m: usize) -> Result<C64> {
    let dets = checked_determinants(&a.sample(m)?)?;
    let winding = winding_of_samples(&dets)?;
    if winding != 0 {
        return Err(Error::NonZeroWinding(winding));
    }
    let logs = continuous_log(&dets);
    let re = compensated_sum(logs.iter().map(|z| z.re));
    let im = compensated_sum(logs.iter().map(|z| z.im));
    Ok(C64::new(re, im) / m as f64)
}

// Neumaier summation; grid means are taken over up to 2^18 terms.
pub(crate) fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `log G(a)`: the circle average of `log det a`, refined on doubled grids
/// until it stops changing.
pub fn log_geometric_mean(a: &LaurentMatrixSeries) -> Result<C64> {
    let mut m = (4 * a.max_abs_offset() + 4).max(1024).next_power_of_two();
    let mut prev = mean_log_det(a, m)?;
    while 2 * m <= MAX_GRID {
        m *= 2;
        let next = mean_log_det(a, m)?;
        if (next - prev).norm() <= 1e-14 * next.norm().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

/// `G(a) = exp(mean log det a)`.
pub fn geometric_mean_g(a: &LaurentMatrixSeries) -> Result<C64> {
    Ok(log_geometric_mean(a)?.exp())
}

// det(I − H(a)H((a⁻¹)~)) on an m-block section. Rows and columns of H(a)
// past the positive bandwidth vanish, so the section never needs to exceed it.
fn hankel_product_det(a: &LaurentMatrixSeries, inv_rev: &LaurentMatrixSeries, m: usize) -> C64 {
    let bw = a.max_offset().max(0) as usize;
    let s = m.min(bw);
    if s == 0 {
        return C64::new(1.0, 0.0);
    }
    let ha = hankel_window(a, 0, s, 0, s);
    let hb = hankel_window(inv_rev, 0, s, 0, s);
    let n = a.block_size() * s;
    let mat = CMat::identity(n, n) - ha.dense() * hb.dense();
    Factored::new(mat).log_det_accumulated().exp()
}

/// `E(a) = det T(a)T(a⁻¹) = det(I − H(a)H((a⁻¹)~))`, with the section
/// doubled from `m` until successive values agree to `1e−10`.
pub fn szego_constant_e(a: &LaurentMatrixSeries, m: usize) -> Result<C64> {
    canonical_wh(a, default_section(a))?;
    let inv = pointwise_inverse(a, Cutoff::auto())?.series;
    let inv_rev = inv.reverse();
    let mut m = m.max(1);
    let mut prev = hankel_product_det(a, &inv_rev, m);
    while 2 * m <= SZEGO_MAX_SECTION {
        m *= 2;
        let next = hankel_product_det(a, &inv_rev, m);
        if (next - prev).norm() < SZEGO_TOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NoConvergence(format!("E(a) still moving at section {m}")))
}

/// Factorization section large enough for the symbol's bandwidth.
pub fn default_section(a: &LaurentMatrixSeries) -> usize {
    DEFAULT_SECTION.max(4 * a.max_abs_offset())
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub n: usize,
    pub p: usize,
    /// `(n+1)·log G(a)`
    pub log_g_term: C64,
    pub correction_sum: C64,
    /// `log Ẽ(a)`; equals `log E(a)` for `p = 1`.
    pub log_e_constant: C64,
    pub predicted: C64,
    pub direct: C64,
    /// `direct − predicted`, imaginary part reduced to `(−π, π]`.
    pub residual: C64,
}

/// `G_{ℓ,0}(b,c) = Σ_{i>ℓ} c_{−i} b_i` for `ℓ = 0..=L` by suffix sums.
pub fn first_corrections(b: &LaurentMatrixSeries, c: &LaurentMatrixSeries, top: usize) -> Vec<CMat> {
    let n = b.block_size();
    let hi = (b.max_offset().max(0) as usize).min((-c.min_offset()).max(0) as usize);
    let mut out = vec![CMat::zeros(n, n); top + 1];
    let mut acc = CMat::zeros(n, n);
    for i in (1..=hi.max(top + 1)).rev() {
        if i <= hi {
            acc += c.coeff(-(i as i64)) * b.coeff(i as i64);
        }
        if i - 1 <= top {
            out[i - 1] = acc.clone();
        }
    }
    out
}

/// Precomputed pieces of the expansion for one symbol and order `p`.
pub struct Expansion {
    pub p: usize,
    pub log_g: C64,
    pub log_e: C64,
    /// `tr H_ℓ` for `ℓ = 1..=L`; `H_ℓ` vanishes beyond the support of `b`, `c`.
    pub trace_h: Vec<C64>,
    pub log_e_tilde: C64,
    symbol: LaurentMatrixSeries,
}

impl Expansion {
    pub fn new(a: &LaurentMatrixSeries, p: usize, w: &WHFactors) -> Result<Self> {
        if p < 1 {
            return Err(Error::ConfigInvalid("expansion order p must be at least 1".into()));
        }
        let log_g = log_geometric_mean(a)?;
        let e = szego_constant_e(a, 1)?;
        let log_e = e.ln();
        let trace_h = if p == 1 { Vec::new() } else { correction_traces(w, p)? };
        let tail: C64 = trace_h.iter().sum();
        Ok(Expansion { p, log_g, log_e, log_e_tilde: log_e - tail, trace_h, symbol: a.clone() })
    }

    /// Report at order `n`, with `direct` supplied by the caller.
    pub fn report_with(&self, n: usize, direct: C64) -> ExpansionReport {
        let log_g_term = self.log_g * (n as f64 + 1.0);
        let correction_sum: C64 = self.trace_h.iter().take(n).sum();
        let predicted = log_g_term + correction_sum + self.log_e_tilde;
        let diff = direct - predicted;
        ExpansionReport {
            n,
            p: self.p,
            log_g_term,
            correction_sum,
            log_e_constant: self.log_e_tilde,
            predicted,
            direct,
            residual: C64::new(diff.re, linalg::wrap_angle(diff.im)),
        }
    }

    pub fn report(&self, n: usize) -> Result<ExpansionReport> {
        Ok(self.report_with(n, log_det_direct(&self.symbol, n)?))
    }
}

// tr H_ℓ for every ℓ ≥ 1 at which some G_{ℓ,k} can be nonzero.
fn correction_traces(w: &WHFactors, p: usize) -> Result<Vec<C64>> {
    let (b, c) = b_c_from_factors(w)?;
    let support = (b.max_offset().max(0) as usize).min((-c.min_offset()).max(0) as usize);
    if support <= 1 {
        return Ok(Vec::new());
    }
    let top = support - 1;
    let g0 = first_corrections(&b, &c, top);
    let n = b.block_size();
    (1..=top)
        .into_par_iter()
        .map(|ell| {
            // G_{ℓ,k} for k = 0..p−2; k = 0 from the suffix sums
            let m = crate::toeplitz::default_correction_truncation(ell).max(support + 1);
            let mut gs = vec![g0[ell].clone()];
            for k in 1..p.saturating_sub(1) {
                gs.push(correction_term(&b, &c, ell, k, m)?.value);
            }
            let mut h = CMat::zeros(n, n);
            for j in 1..p {
                let inner: CMat = gs.iter().take(p - j).fold(CMat::zeros(n, n), |acc, g| acc + g);
                let mut pow = inner.clone();
                for _ in 1..j {
                    pow = &pow * &inner;
                }
                h += pow * C64::new(1.0 / j as f64, 0.0);
            }
            Ok(linalg::trace(&h))
        })
        .collect()
}

/// One expansion report (see [`Expansion`]).
pub fn bs_expansion(a: &LaurentMatrixSeries, n: usize, p: usize, w: &WHFactors) -> Result<ExpansionReport> {
    if n < 1 {
        return Err(Error::ConfigInvalid("expansion needs n >= 1".into()));
    }
    Expansion::new(a, p, w)?.report(n)
}

/// Reports for every `n` in the grid, evaluated concurrently, in grid order.
pub fn expansion_scan(a: &LaurentMatrixSeries, n_grid: &[usize], p: usize, w: &WHFactors) -> Result<Vec<ExpansionReport>> {
    let exp = Expansion::new(a, p, w)?;
    n_grid.par_iter().map(|&n| exp.report(n)).collect()
}

/// Checks the n-grid requirements shared by remainder fits.
pub fn validate_scan_grid(n_grid: &[usize]) -> Result<()> {
    let ok = !n_grid.is_empty()
        && n_grid.windows(2).all(|w| w[0] < w[1])
        && n_grid[0] >= 4
        && *n_grid.last().unwrap() >= 8 * n_grid[0];
    if ok {
        Ok(())
    } else {
        Err(Error::ConfigInvalid("n grid must be increasing, start at >= 4 and span a factor of 8".into()))
    }
}

/// Fits `log|residual|` against `log n`, excluding values below
/// `1e−13·max(1, |log det T_n|)`.
pub fn fit_reports(reports: &[ExpansionReport]) -> Result<DecayFit> {
    let points: Vec<(f64, f64)> = reports.iter().map(|r| (r.n as f64, r.residual.norm())).collect();
    let refs: Vec<f64> = reports.iter().map(|r| r.direct.norm()).collect();
    fit_decay(&points, &relative_floors(&refs), 0, 4)
}

/// Decay fit of the order-`p` remainder over `n_grid`.
pub fn remainder_scan(a: &LaurentMatrixSeries, n_grid: &[usize], p: usize, w: &WHFactors) -> Result<DecayFit> {
    validate_scan_grid(n_grid)?;
    fit_reports(&expansion_scan(a, n_grid, p, w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::scalar_canonical_wh;
    use crate::linalg::{ONE, ZERO};
    use crate::symbol::zygmund_test_symbol;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const RHO: f64 = 0.5;

    fn fixture() -> LaurentMatrixSeries {
        LaurentMatrixSeries::scalar_real(&[(-1, -0.5), (0, 1.25), (1, -0.5)])
    }

    fn c64(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    // exp(Σ_{k≥1} k (log a)_k (log a)_{−k}) with log coefficients from a plain DFT
    fn strong_szego_series(a: &LaurentMatrixSeries, m: usize) -> C64 {
        let vals: Vec<C64> = (0..m).map(|j| a.evaluate(2.0 * PI * j as f64 / m as f64)[(0, 0)]).collect();
        let mut phase = vals[0].arg();
        let mut logs = vec![C64::new(vals[0].norm().ln(), phase)];
        for j in 1..m {
            phase += (vals[j] / vals[j - 1]).arg();
            logs.push(C64::new(vals[j].norm().ln(), phase));
        }
        let coeff = |k: i64| -> C64 {
            logs.iter()
                .enumerate()
                .map(|(j, l)| l * C64::from_polar(1.0, -2.0 * PI * (k * j as i64) as f64 / m as f64))
                .sum::<C64>()
                / m as f64
        };
        let s: C64 = (1..(m as i64 / 2 - 1)).map(|k| coeff(k) * coeff(-k) * k as f64).sum();
        s.exp()
    }

    #[test]
    fn geometric_mean_examples() {
        assert!((geometric_mean_g(&LaurentMatrixSeries::scalar_real(&[(0, 3.0)])).unwrap() - c64(3.0)).norm() < 1e-14);
        assert!((geometric_mean_g(&fixture()).unwrap() - ONE).norm() < 1e-14);
        let m = CMat::from_row_slice(2, 2, &[c64(2.0), c64(1.0), c64(0.5), c64(3.0)]);
        let g = geometric_mean_g(&LaurentMatrixSeries::constant(m)).unwrap();
        assert!((g - c64(5.5)).norm() < 1e-13);
        let t = LaurentMatrixSeries::scalar_real(&[(1, 1.0)]);
        assert!(matches!(geometric_mean_g(&t), Err(Error::NonZeroWinding(1))));
    }

    #[test]
    fn szego_constant_examples() {
        let e = szego_constant_e(&LaurentMatrixSeries::identity(2), 4).unwrap();
        assert!((e - ONE).norm() < 1e-14);
        let e = szego_constant_e(&fixture(), 4).unwrap();
        assert!((e - c64(4.0 / 3.0)).norm() < 1e-10);
        let series = strong_szego_series(&fixture(), 256);
        assert!((series - c64(4.0 / 3.0)).norm() < 1e-10);
    }

    #[test]
    fn szego_matches_series_on_zygmund_symbol() {
        let a = zygmund_test_symbol(0.75, 5, Some(11)).unwrap();
        let e = szego_constant_e(&a, 8).unwrap();
        let series = strong_szego_series(&a, 1024);
        assert!((e - series).norm() < 1e-8, "{e} vs {series}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn szego_matches_series(c in prop::collection::vec((-0.4f64..0.4, -0.4f64..0.4), 1..5)) {
            let mut e: Vec<(i64, C64)> = c.iter().enumerate().map(|(i, &(x, y))| (i as i64 - 2, C64::new(x, y))).collect();
            e.push((0, c64(2.5)));
            let a = LaurentMatrixSeries::scalar(&e);
            let v = szego_constant_e(&a, 4).unwrap();
            let s = strong_szego_series(&a, 512);
            prop_assert!((v - s).norm() < 1e-8);
        }

        #[test]
        fn geometric_mean_is_homogeneous(c in prop::collection::vec((-0.3f64..0.3, -0.3f64..0.3), 1..4), k in 0.2f64..5.0) {
            let r = CMat::from_fn(2, 2, |i, j| C64::new(c[(i + j) % c.len()].0, c[(i * j) % c.len()].1));
            let a = LaurentMatrixSeries::from_blocks(2, [(0, CMat::identity(2, 2) * c64(2.0)), (1, r.clone()), (-1, r.adjoint())]).unwrap();
            let g = geometric_mean_g(&a).unwrap();
            let gk = geometric_mean_g(&a.scale(c64(k))).unwrap();
            prop_assert!((gk - g * k * k).norm() < 1e-12 * gk.norm().max(1.0));
        }
    }

    #[test]
    fn first_order_residual_closed_form() {
        let a = fixture();
        let w = scalar_canonical_wh(&a, DEFAULT_SECTION).unwrap();
        let r = bs_expansion(&a, 8, 1, &w).unwrap();
        assert_eq!(r.correction_sum, ZERO);
        let expect = (1.0 - RHO.powi(20)).ln();
        assert!((r.residual - c64(expect)).norm() < 1e-13, "{} vs {expect}", r.residual);
        assert!((expect + 9.54e-7).abs() < 1e-9);
        assert_eq!(r.predicted, r.log_g_term + r.correction_sum + r.log_e_constant);
    }

    #[test]
    fn second_order_residual_closed_form() {
        // Σ_{ℓ>n} G_{ℓ,0} = ρ^{2n+4} = x and the residual is log(1 − x) + x
        let a = fixture();
        let w = scalar_canonical_wh(&a, DEFAULT_SECTION).unwrap();
        let exp1 = Expansion::new(&a, 1, &w).unwrap();
        let exp2 = Expansion::new(&a, 2, &w).unwrap();
        for n in [4usize, 8, 12] {
            let r1 = exp1.report(n).unwrap();
            let r2 = exp2.report(n).unwrap();
            let x = RHO.powi(2 * n as i32 + 4);
            assert!((r2.residual - c64((1.0 - x).ln() + x)).norm() < 1e-14, "n={n}");
            assert!(r2.residual.norm() <= r1.residual.norm());
            assert_eq!(r2.predicted, r2.log_g_term + r2.correction_sum + r2.log_e_constant);
        }
    }

    #[test]
    fn first_corrections_match_general_term() {
        let w = scalar_canonical_wh(&zygmund_test_symbol(1.0, 4, Some(2)).unwrap(), 128).unwrap();
        let (b, c) = b_c_from_factors(&w).unwrap();
        let fast = first_corrections(&b, &c, 20);
        let support = b.max_offset() as usize;
        for ell in [1usize, 5, 17] {
            let g = correction_term(&b, &c, ell, 0, support + ell + 10).unwrap();
            assert!((&fast[ell] - g.value).norm() < 1e-14);
        }
    }

    #[test]
    fn residual_independent_of_factor_section() {
        let a = zygmund_test_symbol(1.25, 4, Some(5)).unwrap();
        let w1 = scalar_canonical_wh(&a, 128).unwrap();
        let w2 = scalar_canonical_wh(&a, 256).unwrap();
        for p in [1usize, 2, 3] {
            let r1 = bs_expansion(&a, 16, p, &w1).unwrap();
            let r2 = bs_expansion(&a, 16, p, &w2).unwrap();
            assert!((r1.residual - r2.residual).norm() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn analytic_fixture_remainder_is_superpolynomial() {
        let a = fixture();
        let w = scalar_canonical_wh(&a, DEFAULT_SECTION).unwrap();
        let grid: Vec<usize> = (4..=32).step_by(2).collect();
        let fit = remainder_scan(&a, &grid, 1, &w).unwrap();
        assert!(fit.slope < -4.0, "{}", fit.slope);
        assert!(fit.superpolynomial);
    }

    #[test]
    fn zero_remainder_is_degenerate() {
        let a = LaurentMatrixSeries::scalar_real(&[(0, 2.0)]);
        let w = scalar_canonical_wh(&a, 64).unwrap();
        let r = remainder_scan(&a, &[4, 8, 16, 32], 1, &w);
        assert!(matches!(r, Err(Error::FitDegenerate(_))), "{r:?}");
        assert!(matches!(remainder_scan(&a, &[4, 8, 16], 1, &w), Err(Error::ConfigInvalid(_))));
    }
}
