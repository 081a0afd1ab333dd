//! Spectrum estimation, integration contours, and the trace functionals
//! `G_f(a)`, `E_f(a)` of `tr f(T_n(a)) ≈ (n+1)G_f(a) + E_f(a)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::AnalyticFn;
use crate::asymptotics::{compensated_sum, default_section, validate_scan_grid};
use crate::error::{Error, Result};
use crate::factor::factorization_sweep;
use crate::fit::{fit_decay, relative_floors, DecayFit};
use crate::linalg::{self, CMat, Factored, C64, ZERO};
use crate::symbol::{map_samples, pointwise_inverse, winding_of_samples, Cutoff, LaurentMatrixSeries, MAX_GRID};
use crate::toeplitz::{hankel_window, toeplitz_section, trace_f_direct};

/// Side of the λ-grid used for the winding test on scalar symbols.
pub const WINDING_GRID: usize = 24;
/// Starting Hankel section for `E_f`.
pub const DEFAULT_HANKEL_SECTION: usize = 64;
/// Default number of contour nodes.
pub const DEFAULT_CONTOUR_NODES: usize = 256;
/// Stabilization tolerance for the Hankel section doubling in `E_f`.
pub const E_F_TOL: f64 = 1e-9;

/// Circle contour with trapezoid weights.
#[derive(Clone, Debug, Serialize)]
pub struct ContourSpec {
    pub center: C64,
    pub radius: f64,
    pub nodes: Vec<C64>,
    /// `dλ` weights: `(2π/K)·iRe^{iθ_j}`.
    pub weights: Vec<C64>,
    /// Distance from the curve to the spectrum cloud it was built around.
    pub clearance: f64,
}

impl ContourSpec {
    /// Circle `center + radius·e^{iθ}` with `count` nodes (a power of two,
    /// at least 64). Clearance is measured against `cloud`; an empty cloud
    /// gives infinite clearance.
    pub fn circle(center: C64, radius: f64, count: usize, cloud: &[C64]) -> Result<Self> {
        if !count.is_power_of_two() || count < 64 {
            return Err(Error::ConfigInvalid(format!("contour node count {count} must be a power of two >= 64")));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::ConfigInvalid(format!("contour radius {radius} must be positive")));
        }
        let step = 2.0 * PI / count as f64;
        let nodes: Vec<C64> = (0..count).map(|j| center + C64::from_polar(radius, step * j as f64)).collect();
        let weights = (0..count)
            .map(|j| C64::new(0.0, step) * C64::from_polar(radius, step * j as f64))
            .collect();
        let clearance = cloud
            .iter()
            .map(|p| ((p - center).norm() - radius).abs())
            .fold(f64::INFINITY, f64::min);
        Ok(ContourSpec { center, radius, nodes, weights, clearance })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Bounding box and centroid of a spectrum cloud.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Hull {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub centroid: C64,
}

impl Hull {
    fn of(points: &[C64]) -> Hull {
        let mut h = Hull {
            re_min: f64::INFINITY,
            re_max: f64::NEG_INFINITY,
            im_min: f64::INFINITY,
            im_max: f64::NEG_INFINITY,
            centroid: ZERO,
        };
        for p in points {
            h.re_min = h.re_min.min(p.re);
            h.re_max = h.re_max.max(p.re);
            h.im_min = h.im_min.min(p.im);
            h.im_max = h.im_max.max(p.im);
        }
        let n = points.len() as f64;
        h.centroid = C64::new(
            compensated_sum(points.iter().map(|p| p.re)) / n,
            compensated_sum(points.iter().map(|p| p.im)) / n,
        );
        h
    }
}

/// Heuristic cloud approximating `sp T(a) ∪ sp T(ã)`.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumEstimate {
    /// Eigenvalues of `T_m(a)`, `T_m(ã)` and of the symbol samples.
    pub cloud: Vec<C64>,
    /// Grid points `λ` with `wind(a − λ) ≠ 0` (scalar symbols only).
    pub interior: Vec<C64>,
    pub hull: Hull,
}

impl SpectrumEstimate {
    pub fn points(&self) -> impl Iterator<Item = &C64> {
        self.cloud.iter().chain(&self.interior)
    }
}

/// Eigenvalues of the sections `T_m(a)`, `T_m(ã)` and of every `a(t_j)`,
/// plus winding-marked interior points for scalar symbols.
pub fn estimate_spectrum(a: &LaurentMatrixSeries, m: usize) -> Result<SpectrumEstimate> {
    if m < 64 {
        return Err(Error::ConfigInvalid(format!("spectrum section m={m} must be at least 64")));
    }
    let a_rev = a.reverse();
    let (left, right) = rayon::join(
        || linalg::eigenvalues(&toeplitz_section(a, m).into_dense()),
        || linalg::eigenvalues(&toeplitz_section(&a_rev, m).into_dense()),
    );
    let mut cloud = left?;
    cloud.extend(right?);
    let grid = a.sample_default();
    for s in grid.samples() {
        if s.nrows() == 1 {
            cloud.push(s[(0, 0)]);
        } else {
            cloud.extend(linalg::eigenvalues(s)?);
        }
    }
    if cloud.iter().any(|z| !z.is_finite()) {
        return Err(Error::EigFailure("non-finite eigenvalue in spectrum cloud".into()));
    }

    let mut interior = Vec::new();
    if a.is_scalar() {
        let values: Vec<C64> = grid.samples().iter().map(|s| s[(0, 0)]).collect();
        let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let h = Hull::of(&cloud);
        let k = WINDING_GRID;
        interior = (0..k * k)
            .into_par_iter()
            .filter_map(|idx| {
                let x = h.re_min + (h.re_max - h.re_min) * ((idx % k) as f64 + 0.5) / k as f64;
                let y = h.im_min + (h.im_max - h.im_min) * ((idx / k) as f64 + 0.5) / k as f64;
                let lambda = C64::new(x, y);
                let shifted: Vec<C64> = values.iter().map(|v| v - lambda).collect();
                if shifted.iter().any(|z| z.norm() <= 1e-9 * scale) {
                    return None;
                }
                match winding_of_samples(&shifted) {
                    Ok(w) if w != 0 => Some(lambda),
                    _ => None,
                }
            })
            .collect();
    }
    let all: Vec<C64> = cloud.iter().chain(&interior).copied().collect();
    let hull = Hull::of(&all);
    Ok(SpectrumEstimate { cloud, interior, hull })
}

// Number of single-linkage clusters at distance `link`, after merging
// points that share a cell of side `link / 4`.
fn cluster_count(points: &[C64], link: f64) -> usize {
    let cell = link / 4.0;
    let mut reps: Vec<C64> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for p in points {
        let key = ((p.re / cell).floor() as i64, (p.im / cell).floor() as i64);
        if seen.insert(key) {
            reps.push(*p);
        }
    }
    let mut parent: Vec<usize> = (0..reps.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            if (reps[i] - reps[j]).norm() <= link {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    (0..reps.len()).filter(|&i| find(&mut parent, i) == i).count()
}

/// Circle around the cloud centroid with radius `max distance + margin`.
///
/// Clouds that split into pieces more than `4·margin` apart are rejected.
pub fn build_contour(s: &SpectrumEstimate, margin: f64, nodes: usize) -> Result<ContourSpec> {
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(Error::ConfigInvalid(format!("contour margin {margin} must be positive")));
    }
    let points: Vec<C64> = s.points().copied().collect();
    if points.is_empty() {
        return Err(Error::ConfigInvalid("empty spectrum estimate".into()));
    }
    let pieces = cluster_count(&points, 4.0 * margin);
    if pieces > 1 {
        return Err(Error::ConfigInvalid(format!(
            "spectrum cloud has {pieces} components more than 4*margin apart; only single circles are supported"
        )));
    }
    let center = s.hull.centroid;
    let reach = points.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    let contour = ContourSpec::circle(center, reach + margin, nodes, &points)?;
    if contour.clearance < margin / 2.0 {
        return Err(Error::ContourTooTight { clearance: contour.clearance, required: margin / 2.0 });
    }
    Ok(contour)
}

fn mean_trace_f(a: &LaurentMatrixSeries, f: &AnalyticFn, m: usize) -> Result<C64> {
    let grid = a.sample(m)?;
    let values: Vec<C64> = grid.samples().par_iter().map(|s| f.trace_of(s)).collect::<Result<_>>()?;
    let n = values.len() as f64;
    Ok(C64::new(
        compensated_sum(values.iter().map(|z| z.re)) / n,
        compensated_sum(values.iter().map(|z| z.im)) / n,
    ))
}

/// `G_f(a) = (1/2π)∫ tr f(a(e^{iθ})) dθ` by the trapezoid rule, refined on
/// doubled grids until it stops changing.
pub fn g_f(a: &LaurentMatrixSeries, f: &AnalyticFn) -> Result<C64> {
    let mut m = a.grid_size();
    let mut prev = mean_trace_f(a, f, m)?;
    while 2 * m <= MAX_GRID {
        m *= 2;
        let next = mean_trace_f(a, f, m)?;
        if (next - prev).norm() <= 1e-14 * next.norm().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

// Reversed coefficient series of (a − λ)^{-1} and (a − λ)^{-2}.
struct NodeInverses {
    inv_rev: LaurentMatrixSeries,
    inv_sq_rev: LaurentMatrixSeries,
}

fn node_inverses(a: &LaurentMatrixSeries, lambda: C64) -> Result<NodeInverses> {
    let shifted = a.shift(lambda);
    let inv = pointwise_inverse(&shifted, Cutoff::auto())?.series;
    let sq = map_samples(&shifted, a.block_size(), Cutoff::auto(), |grid| {
        grid.samples()
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let i = s.clone().try_inverse().ok_or(Error::SingularSymbol { node: j, margin: 0.0 })?;
                Ok(&i * &i)
            })
            .collect()
    })?
    .series;
    Ok(NodeInverses { inv_rev: inv.reverse(), inv_sq_rev: sq.reverse() })
}

// tr(M⁻¹M') with M = I − H(a)H(((a−λ)⁻¹)~), M' = −H(a)H(((a−λ)⁻²)~) on an
// s-block section.
fn log_det_derivative(ha: &CMat, inv: &NodeInverses, s: usize, node: usize) -> Result<C64> {
    let hr = hankel_window(&inv.inv_rev, 0, s, 0, s);
    let hr2 = hankel_window(&inv.inv_sq_rev, 0, s, 0, s);
    let n = ha.nrows();
    let m = CMat::identity(n, n) - ha * hr.dense();
    let dm = -(ha * hr2.dense());
    let lu = Factored::new(m.clone());
    let x = lu
        .solve(&dm)
        .ok_or(Error::SpectrumTooClose { node, cond: f64::INFINITY })?;
    Ok(linalg::trace(&x))
}

// Factorization section used for the precondition sweep.
fn sweep_section(a: &LaurentMatrixSeries) -> usize {
    if a.is_scalar() {
        default_section(a)
    } else {
        (4 * a.max_abs_offset()).max(64)
    }
}

/// `E_f(a) = (1/2πi)∮ f(λ) (d/dλ) log det T(a−λ)T((a−λ)⁻¹) dλ`.
///
/// The integrand is `tr(M⁻¹M')` on a Hankel section that starts at
/// `hankel_m` blocks and doubles until `E_f` moves by less than `1e−9`.
/// Rows of `H(a)` past the positive bandwidth vanish, so sections beyond
/// it are exact.
pub fn e_f(a: &LaurentMatrixSeries, f: &AnalyticFn, contour: &ContourSpec, hankel_m: usize) -> Result<C64> {
    if !(contour.clearance > 0.0) {
        return Err(Error::ContourTooTight { clearance: contour.clearance, required: 0.0 });
    }
    f.check_disk(contour.center, contour.radius)?;
    factorization_sweep(a, contour, sweep_section(a))?;

    let bw = a.max_offset().max(0) as usize;
    if bw == 0 || a.min_offset() >= 0 {
        return Ok(ZERO);
    }
    let inverses: Vec<NodeInverses> = contour
        .nodes
        .par_iter()
        .map(|&lambda| node_inverses(a, lambda))
        .collect::<Result<_>>()?;
    let weighted: Vec<C64> = contour
        .nodes
        .iter()
        .zip(&contour.weights)
        .map(|(&lambda, &w)| Ok(w * f.eval(lambda)?))
        .collect::<Result<_>>()?;

    let at_section = |m: usize| -> Result<C64> {
        let s = m.min(bw);
        let ha = hankel_window(a, 0, s, 0, s).into_dense();
        let terms: Vec<C64> = inverses
            .par_iter()
            .enumerate()
            .map(|(j, inv)| Ok(weighted[j] * log_det_derivative(&ha, inv, s, j)?))
            .collect::<Result<_>>()?;
        let sum = C64::new(
            compensated_sum(terms.iter().map(|z| z.re)),
            compensated_sum(terms.iter().map(|z| z.im)),
        );
        Ok(sum / C64::new(0.0, 2.0 * PI))
    };

    let mut m = hankel_m.max(1);
    let mut prev = at_section(m)?;
    loop {
        if m >= bw {
            return Ok(prev);
        }
        m *= 2;
        let next = at_section(m)?;
        if (next - prev).norm() < E_F_TOL {
            return Ok(next);
        }
        prev = next;
    }
}

/// The pair `(G_f(a), E_f(a))`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WidomConstants {
    pub g_f: C64,
    pub e_f: C64,
}

impl WidomConstants {
    /// `(n+1)·G_f + E_f`.
    pub fn asymptotic(&self, n: usize) -> C64 {
        self.g_f * (n as f64 + 1.0) + self.e_f
    }
}

pub fn widom_constants(
    a: &LaurentMatrixSeries,
    f: &AnalyticFn,
    contour: &ContourSpec,
    hankel_m: usize,
) -> Result<WidomConstants> {
    Ok(WidomConstants { g_f: g_f(a, f)?, e_f: e_f(a, f, contour, hankel_m)? })
}

/// `(n+1)·G_f(a) + E_f(a)`.
pub fn trace_f_asymptotic(a: &LaurentMatrixSeries, n: usize, f: &AnalyticFn, contour: &ContourSpec) -> Result<C64> {
    Ok(widom_constants(a, f, contour, DEFAULT_HANKEL_SECTION)?.asymptotic(n))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceRow {
    pub n: usize,
    pub direct: C64,
    pub asymptotic: C64,
    pub residual_abs: f64,
}

/// Direct and asymptotic traces for every `n` in the grid.
pub fn widom_scan(
    a: &LaurentMatrixSeries,
    f: &AnalyticFn,
    n_grid: &[usize],
    contour: &ContourSpec,
    hankel_m: usize,
) -> Result<(WidomConstants, Vec<TraceRow>)> {
    let consts = widom_constants(a, f, contour, hankel_m)?;
    let rows = n_grid
        .par_iter()
        .map(|&n| {
            let direct = trace_f_direct(a, n, f)?;
            let asymptotic = consts.asymptotic(n);
            Ok(TraceRow { n, direct, asymptotic, residual_abs: (direct - asymptotic).norm() })
        })
        .collect::<Result<_>>()?;
    Ok((consts, rows))
}

/// Fits `log|residual|` against `log n` above `1e−13·max(1, |tr f(T_n)|)`.
///
/// With `gamma` known, `target_met` records `slope ≤ −(2γ−1) + 0.3`. When
/// the residuals sit on the floor the error says "exact regime".
pub fn fit_trace_rows(rows: &[TraceRow], gamma: Option<f64>) -> Result<DecayFit> {
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.residual_abs)).collect();
    let floors = relative_floors(&rows.iter().map(|r| r.direct.norm()).collect::<Vec<_>>());
    match fit_decay(&points, &floors, 0, 4) {
        Ok(mut fit) => {
            fit.target_met = gamma.map(|g| fit.slope <= -(2.0 * g - 1.0) + 0.3);
            Ok(fit)
        }
        Err(Error::FitDegenerate(msg)) => {
            let first_exact = rows.iter().zip(&floors).find(|(r, fl)| r.residual_abs <= **fl).map(|(r, _)| r.n);
            Err(Error::FitDegenerate(match first_exact {
                Some(n) => format!("exact regime: residual at the rounding floor from n = {n}; {msg}"),
                None => msg,
            }))
        }
        Err(e) => Err(e),
    }
}

/// Decay fit of `|tr f(T_n(a)) − (n+1)G_f(a) − E_f(a)|` over `n_grid`.
pub fn main_theorem_scan(
    a: &LaurentMatrixSeries,
    f: &AnalyticFn,
    n_grid: &[usize],
    contour: &ContourSpec,
) -> Result<DecayFit> {
    validate_scan_grid(n_grid)?;
    let (_, rows) = widom_scan(a, f, n_grid, contour, DEFAULT_HANKEL_SECTION)?;
    fit_trace_rows(&rows, a.smoothness())
}
