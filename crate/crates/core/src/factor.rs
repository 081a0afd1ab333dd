//! Canonical right (`a = u₋u₊`) and left (`a = v₊v₋`) Wiener-Hopf
//! factorizations.
//!
//! Factors are normalized by `u₋(∞) = I` and `v₋(∞) = I`, which makes them
//! unique. `u₋`, `v₋` carry offsets `≤ 0`; `u₊`, `v₊` offsets `≥ 0`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, max_entry_norm, CMat, Factored, C64};
use crate::symbol::{
    continuous_log, map_samples, pointwise_inverse, product_residual, singular_margin, Cutoff,
    LaurentMatrixSeries, DEFAULT_TAIL_TOL,
};
use crate::toeplitz::toeplitz_section;
use crate::traces::ContourSpec;

/// Default finite-section order of the block algorithm.
pub const DEFAULT_SECTION: usize = 256;
/// Residual and leakage tolerance for a successful factorization.
pub const FACTOR_TOL: f64 = 1e-8;
/// Condition-estimate ceiling for `T_m(a)`.
pub const FACTOR_COND_LIMIT: f64 = 1e10;
/// Above this, a section that stays ill-conditioned after doubling is
/// reported as non-canonical rather than merely ill-conditioned.
pub const SINGULAR_SECTION_COND: f64 = 1e14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Normalization {
    /// `u₋(∞) = I` for the right factors, `f₋(∞) = I` (so `v₋(∞) = I`) for the left.
    MinusAtInfinityIsIdentity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FactorResiduals {
    /// `sup_θ ‖u₋u₊ − a‖`
    pub product_residual_right: f64,
    /// `sup_θ ‖v₊v₋ − a‖`
    pub product_residual_left: f64,
    /// Coefficient mass on the wrong side before one-sided cleanup.
    pub leakage: f64,
    /// Smallest singular value of any factor over the grid.
    pub inverse_margin: f64,
}

#[derive(Clone, Debug)]
pub struct WHFactors {
    pub u_minus: LaurentMatrixSeries,
    pub u_plus: LaurentMatrixSeries,
    pub v_plus: LaurentMatrixSeries,
    pub v_minus: LaurentMatrixSeries,
    pub normalization: Normalization,
    pub residuals: FactorResiduals,
    /// Section order (block path) or coefficient cap (scalar path) used.
    pub section: usize,
}

fn series_cutoff(m: usize) -> Cutoff {
    Cutoff::Auto { tol: DEFAULT_TAIL_TOL, cap: 4 * m }
}

fn grid_margin(x: &LaurentMatrixSeries) -> Result<f64> {
    let m = (4 * x.max_abs_offset() + 4).max(1024).next_power_of_two();
    Ok(singular_margin(&x.sample(m)?).0)
}

// (negative-offset mass, positive-offset mass), excluding offset 0
fn side_masses(x: &LaurentMatrixSeries) -> (f64, f64) {
    (x.negative_mass(), x.positive_mass())
}

/// Log-splitting factorization of a scalar symbol with winding number zero.
pub fn scalar_canonical_wh(a: &LaurentMatrixSeries, m: usize) -> Result<WHFactors> {
    if !a.is_scalar() {
        return Err(Error::BlockSizeMismatch { left: a.block_size(), right: 1 });
    }
    let winding = a.winding_number()?;
    if winding != 0 {
        return Err(Error::NonZeroWinding(winding));
    }
    let cutoff = series_cutoff(m);
    let log = map_samples(a, 1, cutoff, |grid| {
        let vals: Vec<C64> = grid.samples().iter().map(|s| s[(0, 0)]).collect();
        if let Some(j) = vals.iter().position(|z| z.norm() <= 1e-10) {
            return Err(Error::SingularSymbol { node: j, margin: vals[j].norm() });
        }
        Ok(continuous_log(&vals).into_iter().map(|z| CMat::from_element(1, 1, z)).collect())
    })?
    .series;
    let g_minus = log.restrict(i64::MIN, -1);
    let g_plus = log.restrict(0, i64::MAX);
    let exp = |g: &LaurentMatrixSeries| {
        map_samples(g, 1, cutoff, |grid| {
            Ok(grid.samples().iter().map(|s| s.map(|z| z.exp())).collect())
        })
        .map(|e| e.series)
    };
    let um = exp(&g_minus)?;
    let up = exp(&g_plus)?;
    let leakage = side_masses(&um).1 + side_masses(&up).0;
    let u_minus = um.restrict(i64::MIN, 0);
    let u_plus = up.restrict(0, i64::MAX);
    let right = product_residual(&u_minus, &u_plus, a)?;
    let margin = grid_margin(&u_minus)?.min(grid_margin(&u_plus)?);
    Ok(WHFactors {
        v_plus: u_plus.clone(),
        v_minus: u_minus.clone(),
        u_minus,
        u_plus,
        normalization: Normalization::MinusAtInfinityIsIdentity,
        residuals: FactorResiduals {
            product_residual_right: right,
            product_residual_left: right,
            leakage,
            inverse_margin: margin,
        },
        section: m,
    })
}

struct OneSided {
    minus: LaurentMatrixSeries,
    plus: LaurentMatrixSeries,
    /// `u₊⁻¹` as returned by the section solve.
    plus_inverse: LaurentMatrixSeries,
    leakage: f64,
}

// Right factorization x = minus·plus from the first block column of T_m(x)⁻¹.
fn right_factors_by_section(x: &LaurentMatrixSeries, m: usize) -> Result<OneSided> {
    let n = x.block_size();
    let t = toeplitz_section(x, m).into_dense();
    let lu = Factored::new(t.clone());
    let cond = lu.condition_estimate(&t);
    if !(cond < FACTOR_COND_LIMIT) {
        return Err(Error::IllConditionedSection { m, cond });
    }
    let mut e0 = CMat::zeros(n * (m + 1), n);
    for i in 0..n {
        e0[(i, i)] = C64::new(1.0, 0.0);
    }
    let sol = lu
        .solve(&e0)
        .ok_or(Error::IllConditionedSection { m, cond: f64::INFINITY })?;
    let blocks = (0..=m).map(|j| (j as i64, sol.view((j * n, 0), (n, n)).into_owned()));
    let w = LaurentMatrixSeries::from_blocks(n, blocks)?;

    let up = pointwise_inverse(&w, series_cutoff(m))?.series;
    let um = x.multiply(&w)?;
    let leakage = side_masses(&up).0 + side_masses(&um).1;
    Ok(OneSided {
        minus: um.restrict(i64::MIN, 0),
        plus: up.restrict(0, i64::MAX),
        plus_inverse: w,
        leakage,
    })
}

fn block_attempt(a: &LaurentMatrixSeries, m: usize) -> Result<WHFactors> {
    let right = right_factors_by_section(a, m)?;

    // a⁻¹ = f₋f₊, then v± = f±⁻¹ gives a = v₊v₋
    let a_inv = pointwise_inverse(a, series_cutoff(m))?.series;
    let left = right_factors_by_section(&a_inv, m)?;
    let v_plus = left.plus_inverse.clone();
    let vm = pointwise_inverse(&left.minus, series_cutoff(m))?.series;
    let leakage = right.leakage + left.leakage + side_masses(&vm).1;
    let v_minus = vm.restrict(i64::MIN, 0);

    let res_right = product_residual(&right.minus, &right.plus, a)?;
    let res_left = product_residual(&v_plus, &v_minus, a)?;
    let margin = [&right.minus, &right.plus, &v_plus, &v_minus]
        .into_iter()
        .map(grid_margin)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(WHFactors {
        u_minus: right.minus,
        u_plus: right.plus,
        v_plus,
        v_minus,
        normalization: Normalization::MinusAtInfinityIsIdentity,
        residuals: FactorResiduals {
            product_residual_right: res_right,
            product_residual_left: res_left,
            leakage,
            inverse_margin: margin,
        },
        section: m,
    })
}

fn passes(w: &WHFactors, a: &LaurentMatrixSeries) -> bool {
    let scale = a.coefficient_sum_norm().max(1.0);
    let r = &w.residuals;
    r.product_residual_right <= FACTOR_TOL * scale
        && r.product_residual_left <= FACTOR_TOL * scale
        && r.leakage <= FACTOR_TOL * scale
        && r.inverse_margin > 0.0
}

/// Finite-section factorization of a block symbol, retried once at `2m`.
pub fn block_canonical_wh(a: &LaurentMatrixSeries, m: usize) -> Result<WHFactors> {
    let probe = a.sample(a.grid_size().max(1024))?;
    let (margin, node) = singular_margin(&probe);
    if margin <= 1e-10 {
        return Err(Error::SingularSymbol { node, margin });
    }
    let winding = a.winding_number()?;
    if winding != 0 {
        return Err(Error::NonZeroWinding(winding));
    }
    let mut last = None;
    for section in [m, 2 * m] {
        match block_attempt(a, section) {
            Ok(w) if passes(&w, a) => return Ok(w),
            Ok(w) => last = Some(Ok(w)),
            Err(e @ Error::IllConditionedSection { .. }) => last = Some(Err(e)),
            Err(e) => return Err(e),
        }
    }
    match last {
        Some(Ok(w)) => Err(Error::NonCanonical(format!(
            "residuals right={:.3e} left={:.3e} leakage={:.3e} at m={}",
            w.residuals.product_residual_right, w.residuals.product_residual_left, w.residuals.leakage, w.section
        ))),
        // an (almost) exactly singular section is the signature of nonzero partial indices
        Some(Err(Error::IllConditionedSection { m, cond })) if !(cond < SINGULAR_SECTION_COND) => {
            Err(Error::NonCanonical(format!("section singular at m={m} (condition {cond:.3e})")))
        }
        Some(Err(e)) => Err(e),
        None => unreachable!("two attempts were made"),
    }
}

/// Scalar symbols take the log-splitting path, block symbols the section path.
pub fn canonical_wh(a: &LaurentMatrixSeries, m: usize) -> Result<WHFactors> {
    if a.is_scalar() {
        scalar_canonical_wh(a, m)
    } else {
        block_canonical_wh(a, m)
    }
}

/// `b = v₋u₊⁻¹` and `c = u₋⁻¹v₊`.
pub fn b_c_from_factors(w: &WHFactors) -> Result<(LaurentMatrixSeries, LaurentMatrixSeries)> {
    let cutoff = series_cutoff(w.section);
    let up_inv = pointwise_inverse(&w.u_plus, cutoff)?.series.restrict(0, i64::MAX);
    let um_inv = pointwise_inverse(&w.u_minus, cutoff)?.series.restrict(i64::MIN, 0);
    let b = w.v_minus.multiply(&up_inv)?;
    let c = um_inv.multiply(&w.v_plus)?;
    let cap = 4 * w.section;
    Ok((b.trimmed(DEFAULT_TAIL_TOL * 1e-2, cap), c.trimmed(DEFAULT_TAIL_TOL * 1e-2, cap)))
}

#[derive(Clone, Debug)]
pub struct FactorizationSweep {
    pub factors: Vec<WHFactors>,
    /// Largest sup-norm change of the normalized factors between adjacent nodes.
    pub continuity: f64,
    /// `continuity` divided by the largest node spacing.
    pub continuity_per_spacing: f64,
    pub max_product_residual: f64,
}

// Factors with the constant freedom of u₊, v₊ divided out.
fn normalized(w: &WHFactors) -> Option<[LaurentMatrixSeries; 4]> {
    let up0 = w.u_plus.coeff(0).try_inverse()?;
    let vp0 = w.v_plus.coeff(0).try_inverse()?;
    let up = LaurentMatrixSeries::from_blocks(w.u_plus.block_size(), w.u_plus.iter().map(|(k, b)| (k, b * &up0))).ok()?;
    let vp = LaurentMatrixSeries::from_blocks(w.v_plus.block_size(), w.v_plus.iter().map(|(k, b)| (k, &vp0 * b))).ok()?;
    Some([w.u_minus.clone(), up, vp, w.v_minus.clone()])
}

/// Factorizations of `a − λ` at every contour node.
pub fn factorization_sweep(a: &LaurentMatrixSeries, contour: &ContourSpec, m: usize) -> Result<FactorizationSweep> {
    let a_rev = a.reverse();
    let check_m = m.min(128);
    let factors: Vec<WHFactors> = contour
        .nodes
        .par_iter()
        .enumerate()
        .map(|(j, &lambda)| {
            for sym in [a, &a_rev] {
                let t = toeplitz_section(&sym.shift(lambda), check_m).into_dense();
                let cond = Factored::new(t.clone()).condition_estimate(&t);
                if !(cond < FACTOR_COND_LIMIT) {
                    return Err(Error::SpectrumTooClose { node: j, cond });
                }
            }
            // a node on the symbol curve or inside a winding region
            canonical_wh(&a.shift(lambda), m).map_err(|e| match e {
                Error::SingularSymbol { .. }
                | Error::GridTooCoarse { .. }
                | Error::NonZeroWinding(_)
                | Error::NonCanonical(_) => Error::SpectrumTooClose { node: j, cond: f64::INFINITY },
                e => e,
            })
        })
        .collect::<Result<_>>()?;

    let norm: Vec<[LaurentMatrixSeries; 4]> = factors
        .iter()
        .map(|w| normalized(w).ok_or_else(|| Error::NonCanonical("u+ has a singular constant term".into())))
        .collect::<Result<_>>()?;
    let k = factors.len();
    let mut continuity: f64 = 0.0;
    let mut spacing: f64 = 0.0;
    for j in 0..k {
        let next = (j + 1) % k;
        spacing = spacing.max((contour.nodes[next] - contour.nodes[j]).norm());
        for (x, y) in norm[j].iter().zip(&norm[next]) {
            continuity = continuity.max(x.sub(y)?.coefficient_sum_norm());
        }
    }
    let max_product_residual = factors
        .iter()
        .map(|w| w.residuals.product_residual_right.max(w.residuals.product_residual_left))
        .fold(0.0, f64::max);
    Ok(FactorizationSweep {
        factors,
        continuity,
        continuity_per_spacing: if spacing > 0.0 { continuity / spacing } else { 0.0 },
        max_product_residual,
    })
}

/// `sup_θ ‖x(θ) − y(θ)‖` bounded by the coefficient sum of the difference.
pub fn factor_distance(x: &LaurentMatrixSeries, y: &LaurentMatrixSeries) -> Result<f64> {
    Ok(x.sub(y)?.coefficient_sum_norm())
}

/// Largest entry of `(u₋)₀ − I` and `(v₋)₀ − I`.
pub fn normalization_defect(w: &WHFactors) -> f64 {
    let n = w.u_minus.block_size();
    let id = CMat::identity(n, n);
    max_entry_norm(&(w.u_minus.coeff(0) - &id)).max(max_entry_norm(&(w.v_minus.coeff(0) - id)))
}

/// `det (u₊)₀`.
pub fn plus_constant_determinant(w: &WHFactors) -> C64 {
    linalg::determinant(&w.u_plus.coeff(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ONE, ZERO};
    use crate::traces::ContourSpec;
    use proptest::prelude::*;

    fn c64(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn fixture() -> LaurentMatrixSeries {
        LaurentMatrixSeries::scalar_real(&[(-1, -0.5), (0, 1.25), (1, -0.5)])
    }

    fn block_fixture() -> LaurentMatrixSeries {
        let r = CMat::from_row_slice(2, 2, &[ONE, c64(0.2), ZERO, ONE]);
        LaurentMatrixSeries::from_blocks(
            2,
            [
                (0, CMat::identity(2, 2) * c64(1.25)),
                (1, &r * c64(-0.5)),
                (-1, r.transpose() * c64(-0.5)),
            ],
        )
        .unwrap()
    }

    fn assert_series_close(x: &LaurentMatrixSeries, y: &LaurentMatrixSeries, tol: f64) {
        let d = factor_distance(x, y).unwrap();
        assert!(d <= tol, "distance {d:e}\n{x:?}\n{y:?}");
    }

    #[test]
    fn scalar_fixture_hand_factorization() {
        let w = scalar_canonical_wh(&fixture(), DEFAULT_SECTION).unwrap();
        assert_series_close(&w.u_minus, &LaurentMatrixSeries::scalar_real(&[(-1, -0.5), (0, 1.0)]), 1e-10);
        assert_series_close(&w.u_plus, &LaurentMatrixSeries::scalar_real(&[(0, 1.0), (1, -0.5)]), 1e-10);
        assert!(w.residuals.product_residual_right <= 1e-9);
        assert!(normalization_defect(&w) < 1e-12);
    }

    #[test]
    fn scalar_constant_and_winding() {
        let w = scalar_canonical_wh(&LaurentMatrixSeries::scalar_real(&[(0, 2.0)]), 64).unwrap();
        assert_series_close(&w.u_minus, &LaurentMatrixSeries::identity(1), 1e-14);
        assert_series_close(&w.u_plus, &LaurentMatrixSeries::scalar_real(&[(0, 2.0)]), 1e-14);
        let t = LaurentMatrixSeries::scalar_real(&[(1, 1.0)]);
        assert!(matches!(scalar_canonical_wh(&t, 64), Err(Error::NonZeroWinding(1))));
    }

    #[test]
    fn block_path_matches_scalar_path() {
        let a = fixture();
        let s = scalar_canonical_wh(&a, DEFAULT_SECTION).unwrap();
        let b = block_canonical_wh(&a, DEFAULT_SECTION).unwrap();
        for (x, y) in [(&s.u_minus, &b.u_minus), (&s.u_plus, &b.u_plus), (&s.v_plus, &b.v_plus), (&s.v_minus, &b.v_minus)] {
            assert_series_close(x, y, 1e-8);
        }
    }

    #[test]
    fn block_constant_matrix() {
        let m = CMat::from_row_slice(2, 2, &[c64(2.0), c64(1.0), c64(0.5), c64(3.0)]);
        let a = LaurentMatrixSeries::constant(m.clone());
        let w = block_canonical_wh(&a, 16).unwrap();
        let id = LaurentMatrixSeries::identity(2);
        let am = LaurentMatrixSeries::constant(m);
        assert_series_close(&w.u_minus, &id, 1e-12);
        assert_series_close(&w.u_plus, &am, 1e-12);
        assert_series_close(&w.v_plus, &am, 1e-12);
        assert_series_close(&w.v_minus, &id, 1e-12);
    }

    #[test]
    fn block_fixture_residuals() {
        let a = block_fixture();
        let w = block_canonical_wh(&a, DEFAULT_SECTION).unwrap();
        assert!(w.residuals.product_residual_right <= 1e-8);
        assert!(w.residuals.product_residual_left <= 1e-8);
        assert!(w.residuals.leakage <= 1e-8);
        assert!(w.residuals.inverse_margin > 0.0);
        assert!(plus_constant_determinant(&w).norm() > 0.0);
        assert!(normalization_defect(&w) < 1e-10);
        assert!(w.u_minus.max_offset() <= 0 && w.v_minus.max_offset() <= 0);
        assert!(w.u_plus.min_offset() >= 0 && w.v_plus.min_offset() >= 0);
        // repeated runs and a doubled section give the same factors
        let again = block_canonical_wh(&a, DEFAULT_SECTION).unwrap();
        assert_series_close(&w.u_plus, &again.u_plus, 0.0);
        let doubled = block_canonical_wh(&a, 2 * DEFAULT_SECTION).unwrap();
        for (x, y) in [(&w.u_minus, &doubled.u_minus), (&w.u_plus, &doubled.u_plus), (&w.v_plus, &doubled.v_plus), (&w.v_minus, &doubled.v_minus)] {
            assert_series_close(x, y, 1e-8);
        }
    }

    #[test]
    fn nonzero_partial_indices_are_rejected() {
        // diag(t, 1/t): determinant has winding 0, partial indices ±1
        let a = LaurentMatrixSeries::from_blocks(
            2,
            [
                (1, CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO])),
                (-1, CMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE])),
            ],
        )
        .unwrap();
        let r = block_canonical_wh(&a, 32);
        assert!(matches!(r, Err(Error::NonCanonical(_))), "{r:?}");
    }

    #[test]
    fn b_and_c_of_scalar_fixture() {
        let w = scalar_canonical_wh(&fixture(), DEFAULT_SECTION).unwrap();
        let (b, c) = b_c_from_factors(&w).unwrap();
        assert!((b.scalar_coeff(-1) - c64(-0.5)).norm() < 1e-10);
        for j in 0..30 {
            assert!((b.scalar_coeff(j) - c64(0.75 * 0.5f64.powi(j as i32))).norm() < 1e-10, "b_{j}");
        }
        // t ↔ 1/t symmetry of the fixture: c = b̃
        assert_series_close(&c, &b.reverse(), 1e-10);
        // constant A: u₋ = v₋ = I and u₊ = v₊ = A, so b = A⁻¹, c = A and cb = I
        let am = CMat::from_row_slice(2, 2, &[c64(2.0), c64(1.0), ZERO, c64(3.0)]);
        let k = LaurentMatrixSeries::constant(am.clone());
        let (b, c) = b_c_from_factors(&block_canonical_wh(&k, 8).unwrap()).unwrap();
        assert_series_close(&b, &LaurentMatrixSeries::constant(am.clone().try_inverse().unwrap()), 1e-12);
        assert_series_close(&c, &k, 1e-12);
        assert_series_close(&c.multiply(&b).unwrap(), &LaurentMatrixSeries::identity(2), 1e-12);
    }

    #[test]
    fn sweep_far_contour_is_nearly_constant() {
        let a = block_fixture();
        let big = 10.0 * a.iter().map(|(_, b)| max_entry_norm(b)).fold(0.0, f64::max);
        let contour = ContourSpec::circle(ZERO, big, 64, &[]).unwrap();
        let sweep = factorization_sweep(&a, &contour, 64).unwrap();
        assert!(sweep.continuity < 0.1, "{}", sweep.continuity);
    }

    #[test]
    fn sweep_constant_symbol_has_zero_diagnostic() {
        let a = LaurentMatrixSeries::constant(CMat::from_row_slice(2, 2, &[c64(2.0), c64(1.0), ZERO, c64(3.0)]));
        let contour = ContourSpec::circle(c64(2.5), 4.0, 64, &[c64(2.0), c64(3.0)]).unwrap();
        let sweep = factorization_sweep(&a, &contour, 16).unwrap();
        assert!(sweep.continuity < 1e-12, "{}", sweep.continuity);
    }

    #[test]
    fn sweep_around_scalar_fixture() {
        let contour = ContourSpec::circle(c64(1.25), 4.0, 64, &[c64(0.25), c64(2.25)]).unwrap();
        let sweep = factorization_sweep(&fixture(), &contour, DEFAULT_SECTION).unwrap();
        assert_eq!(sweep.factors.len(), 64);
        assert!(sweep.max_product_residual <= 1e-8);
    }

    #[test]
    fn sweep_through_spectrum_fails() {
        let contour = ContourSpec::circle(c64(1.25), 0.5, 64, &[]).unwrap();
        let r = factorization_sweep(&fixture(), &contour, 64);
        assert!(matches!(r, Err(Error::SpectrumTooClose { .. })), "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn scalar_factors_reconstruct(c in prop::collection::vec((-0.3f64..0.3, -0.3f64..0.3), 1..5)) {
            // |perturbation| < 1 keeps 2 + p away from zero with winding 0
            let mut e: Vec<(i64, C64)> = c.iter().enumerate().map(|(i, &(x, y))| (i as i64 - 2, C64::new(x, y) * 0.5)).collect();
            e.push((0, c64(2.0)));
            let a = LaurentMatrixSeries::scalar(&e);
            let w = scalar_canonical_wh(&a, 64).unwrap();
            prop_assert!(w.residuals.product_residual_right <= 1e-9);
            prop_assert!(w.residuals.leakage <= 1e-9);
            prop_assert!(normalization_defect(&w) < 1e-12);
        }
    }
}
