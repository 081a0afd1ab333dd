//! Log-log least-squares fits of decaying sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magnitudes below this are treated as rounding noise.
pub const RESIDUAL_FLOOR: f64 = 1e-13;

/// Straight-line fit of `log magnitude` against `log n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Points used in the fit.
    pub points: Vec<(f64, f64)>,
    /// Points excluded by the floor or the transient cut.
    pub excluded: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    /// The residual decays faster than any power over the fitted range.
    pub superpolynomial: bool,
    /// Result of the caller's slope target, when one applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_met: Option<bool>,
}

/// Ordinary least squares `y = intercept + slope·x`.
/// Returns `(slope, intercept, r², slope standard error)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let stderr = if xs.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    (slope, intercept, r2, stderr)
}

/// Fits `log|r_n|` against `log n`.
///
/// `floors[i]` is the rounding floor of point `i`; points at or below it are
/// excluded, as are the first `drop_first` points. Fewer than `min_points`
/// survivors is a `FitDegenerate` error.
pub fn fit_decay(
    points: &[(f64, f64)],
    floors: &[f64],
    drop_first: usize,
    min_points: usize,
) -> Result<DecayFit> {
    assert_eq!(points.len(), floors.len());
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    for (i, (&(n, r), &floor)) in points.iter().zip(floors).enumerate() {
        let r = r.abs();
        if i < drop_first || !(r > floor) || !r.is_finite() || !(n > 0.0) {
            excluded.push((n, r));
        } else {
            used.push((n, r));
        }
    }
    if used.len() < min_points.max(2) {
        return Err(Error::FitDegenerate(format!(
            "{} usable points above the floor, need {}",
            used.len(),
            min_points.max(2)
        )));
    }
    let xs: Vec<f64> = used.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, r_squared, slope_stderr) = least_squares(&xs, &ys);

    // geometric decay is straight against n, convex against log n
    let ns: Vec<f64> = used.iter().map(|p| p.0).collect();
    let (semi_slope, _, semi_r2, _) = least_squares(&ns, &ys);
    let superpolynomial = slope < -4.0 && semi_slope < 0.0 && semi_r2 >= r_squared;

    Ok(DecayFit {
        points: used,
        excluded,
        slope,
        intercept,
        r_squared,
        slope_stderr,
        superpolynomial,
        target_met: None,
    })
}

/// Floor `RESIDUAL_FLOOR·max(1, |reference|)` for each reference value.
pub fn relative_floors(references: &[f64]) -> Vec<f64> {
    references.iter().map(|r| RESIDUAL_FLOOR * r.abs().max(1.0)).collect()
}

/// Integer grid for `min:max:{linear|geometric}[:step]` strings.
///
/// Geometric grids double from `min` and always end at `max`; linear grids
/// use `step` (default 1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NGrid {
    pub min: usize,
    pub max: usize,
    pub kind: GridKind,
    pub step: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    Linear,
    Geometric,
}

impl NGrid {
    pub fn geometric(min: usize, max: usize) -> Self {
        NGrid { min, max, kind: GridKind::Geometric, step: 2 }
    }

    pub fn linear(min: usize, max: usize, step: usize) -> Self {
        NGrid { min, max, kind: GridKind::Linear, step }
    }

    pub fn values(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut n = self.min;
        while n <= self.max {
            out.push(n);
            n = match self.kind {
                GridKind::Linear => n + self.step,
                GridKind::Geometric => n * self.step,
            };
        }
        if out.last() != Some(&self.max) {
            out.push(self.max);
        }
        out
    }

    /// Ratio `max/min`.
    pub fn span(&self) -> f64 {
        self.max as f64 / self.min as f64
    }
}

impl std::str::FromStr for NGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::ConfigInvalid(format!("n-grid '{s}' is not min:max:linear|geometric[:step]"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() < 3 || parts.len() > 4 {
            return Err(bad());
        }
        let min: usize = parts[0].parse().map_err(|_| bad())?;
        let max: usize = parts[1].parse().map_err(|_| bad())?;
        let kind = match parts[2] {
            "linear" => GridKind::Linear,
            "geometric" => GridKind::Geometric,
            _ => return Err(bad()),
        };
        let default_step = if kind == GridKind::Linear { 1 } else { 2 };
        let step = match parts.get(3) {
            Some(t) => t.parse().map_err(|_| bad())?,
            None => default_step,
        };
        let too_small = match kind {
            GridKind::Linear => step < 1,
            GridKind::Geometric => step < 2,
        };
        if min < 1 || max < min || too_small {
            return Err(Error::ConfigInvalid(format!("n-grid '{s}' is empty or has a bad step")));
        }
        Ok(NGrid { min, max, kind, step })
    }
}
