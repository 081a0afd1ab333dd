//! Registry of scalar analytic functions `f` used in trace functionals.
//!
//! Each entry knows where it is analytic, so contour and spectrum
//! preconditions can be checked mechanically.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ONE, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticFn {
    /// `Σ_j c_j λ^j`.
    Polynomial(Vec<C64>),
    Exp,
    /// Principal branch, cut along `(−∞, 0]`.
    Log,
    /// `p(λ)/q(λ)` with coefficient lists in increasing degree.
    Rational { num: Vec<C64>, den: Vec<C64> },
}

fn horner(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c)
}

fn trim_trailing_zeros(v: &[C64]) -> &[C64] {
    let len = v.iter().rposition(|c| *c != ZERO).map_or(0, |i| i + 1);
    &v[..len]
}

impl AnalyticFn {
    pub fn square() -> Self {
        AnalyticFn::Polynomial(vec![ZERO, ZERO, ONE])
    }

    pub fn identity() -> Self {
        AnalyticFn::Polynomial(vec![ZERO, ONE])
    }

    pub fn one() -> Self {
        AnalyticFn::Polynomial(vec![ONE])
    }

    pub fn polynomial_real(coeffs: &[f64]) -> Self {
        AnalyticFn::Polynomial(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self, AnalyticFn::Polynomial(_))
    }

    /// Degree for polynomials, `None` otherwise.
    pub fn degree(&self) -> Option<usize> {
        match self {
            AnalyticFn::Polynomial(c) => Some(trim_trailing_zeros(c).len().saturating_sub(1)),
            _ => None,
        }
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        let v = match self {
            AnalyticFn::Polynomial(c) => horner(c, z),
            AnalyticFn::Exp => z.exp(),
            AnalyticFn::Log => {
                if z.im == 0.0 && z.re <= 0.0 {
                    return Err(Error::FNotAnalyticAtSample(format!("log at {z}")));
                }
                z.ln()
            }
            AnalyticFn::Rational { num, den } => {
                let d = horner(den, z);
                if d.norm() <= 1e-300 {
                    return Err(Error::FNotAnalyticAtSample(format!("rational pole at {z}")));
                }
                horner(num, z) / d
            }
        };
        if !v.is_finite() {
            return Err(Error::FNotAnalyticAtSample(format!("non-finite value at {z}")));
        }
        Ok(v)
    }

    /// Poles (or branch points) of `f`; empty for entire functions.
    pub fn singularities(&self) -> Result<Vec<C64>> {
        match self {
            AnalyticFn::Polynomial(_) | AnalyticFn::Exp => Ok(Vec::new()),
            AnalyticFn::Log => Ok(vec![ZERO]),
            AnalyticFn::Rational { den, .. } => polynomial_roots(den),
        }
    }

    /// Distance from `z` to the set where `f` fails to be analytic.
    pub fn analyticity_distance(&self, z: C64) -> Result<f64> {
        match self {
            AnalyticFn::Polynomial(_) | AnalyticFn::Exp => Ok(f64::INFINITY),
            AnalyticFn::Log => Ok(if z.re >= 0.0 { z.norm() } else { z.im.abs() }),
            AnalyticFn::Rational { .. } => Ok(self
                .singularities()?
                .iter()
                .map(|p| (p - z).norm())
                .fold(f64::INFINITY, f64::min)),
        }
    }

    /// Fails unless `f` is analytic on the closed disk `|λ − center| ≤ radius`.
    pub fn check_disk(&self, center: C64, radius: f64) -> Result<()> {
        let d = self.analyticity_distance(center)?;
        if d <= radius {
            return Err(Error::FNotAnalyticAtSample(format!(
                "{self} is not analytic on the disk |λ - {center}| <= {radius}"
            )));
        }
        Ok(())
    }

    /// `tr f(A)` via the eigenvalues of `A`.
    pub fn trace_of(&self, m: &CMat) -> Result<C64> {
        if m.nrows() == 1 {
            return self.eval(m[(0, 0)]);
        }
        linalg::eigenvalues(m)?.into_iter().map(|z| self.eval(z)).sum()
    }
}

/// Roots of `Σ c_j z^j` from the companion matrix.
fn polynomial_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let c = trim_trailing_zeros(coeffs);
    if c.len() <= 1 {
        return Ok(Vec::new());
    }
    let deg = c.len() - 1;
    let lead = c[deg];
    let mut comp = CMat::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = ONE;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    linalg::eigenvalues(&comp)
}

impl fmt::Display for AnalyticFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[C64]| {
            v.iter()
                .map(|c| if c.im == 0.0 { format!("{}", c.re) } else { format!("{}{:+}i", c.re, c.im) })
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            AnalyticFn::Polynomial(c) => write!(f, "poly:{}", list(c)),
            AnalyticFn::Exp => write!(f, "exp"),
            AnalyticFn::Log => write!(f, "log"),
            AnalyticFn::Rational { num, den } => write!(f, "rational:{};{}", list(num), list(den)),
        }
    }
}

fn parse_coeffs(s: &str) -> Result<Vec<C64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map(|x| C64::new(x, 0.0))
                .map_err(|_| Error::ConfigInvalid(format!("bad coefficient '{t}'")))
        })
        .collect()
}

impl FromStr for AnalyticFn {
    type Err = Error;

    /// Accepts `square`, `exp`, `log`, `poly:c0,c1,...` and
    /// `rational:p0,p1,...;q0,q1,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "square" => return Ok(AnalyticFn::square()),
            "exp" => return Ok(AnalyticFn::Exp),
            "log" => return Ok(AnalyticFn::Log),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("poly:") {
            return Ok(AnalyticFn::Polynomial(parse_coeffs(rest)?));
        }
        if let Some(rest) = s.strip_prefix("rational:") {
            let (n, d) = rest
                .split_once(';')
                .ok_or_else(|| Error::ConfigInvalid("rational needs 'num;den'".into()))?;
            let den = parse_coeffs(d)?;
            if trim_trailing_zeros(&den).is_empty() {
                return Err(Error::ConfigInvalid("rational denominator is zero".into()));
            }
            return Ok(AnalyticFn::Rational { num: parse_coeffs(n)?, den });
        }
        Err(Error::ConfigInvalid(format!("unknown function '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_eval() {
        let f: AnalyticFn = "poly:1,0,2".parse().unwrap();
        assert_eq!(f.eval(C64::new(2.0, 0.0)).unwrap(), C64::new(9.0, 0.0));
        assert_eq!("square".parse::<AnalyticFn>().unwrap(), AnalyticFn::square());
        assert!("sin".parse::<AnalyticFn>().is_err());
        let r: AnalyticFn = "rational:1;-2,1".parse().unwrap();
        assert!((r.eval(C64::new(3.0, 0.0)).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(r.eval(C64::new(2.0, 0.0)).is_err());
        assert_eq!(f.degree(), Some(2));
    }

    #[test]
    fn display_round_trips() {
        for s in ["poly:0,0,1", "exp", "log", "rational:1,2;3,4"] {
            let f: AnalyticFn = s.parse().unwrap();
            assert_eq!(f.to_string().parse::<AnalyticFn>().unwrap(), f);
        }
    }

    #[test]
    fn log_domain() {
        assert!(AnalyticFn::Log.eval(C64::new(-1.0, 0.0)).is_err());
        assert!(AnalyticFn::Log.check_disk(C64::new(1.25, 0.0), 1.2).is_ok());
        assert!(AnalyticFn::Log.check_disk(C64::new(1.25, 0.0), 1.5).is_err());
        assert!(AnalyticFn::Exp.check_disk(C64::new(0.0, 0.0), 1e6).is_ok());
    }

    #[test]
    fn rational_poles_from_companion() {
        let r: AnalyticFn = "rational:1;6,-5,1".parse().unwrap();
        let mut p: Vec<f64> = r.singularities().unwrap().iter().map(|z| z.re).collect();
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((p[0] - 2.0).abs() < 1e-12 && (p[1] - 3.0).abs() < 1e-12);
        assert!(r.check_disk(C64::new(0.0, 0.0), 1.9).is_ok());
        assert!(r.check_disk(C64::new(0.0, 0.0), 2.1).is_err());
    }

    #[test]
    fn trace_of_matrix() {
        let m = CMat::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(2.0, 0.0), ZERO, C64::new(3.0, 0.0)]);
        let t = AnalyticFn::square().trace_of(&m).unwrap();
        assert!((t - C64::new(10.0, 0.0)).norm() < 1e-12);
    }
}
