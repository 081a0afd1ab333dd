//! JSON file format for symbols:
//!
//! ```json
//! { "n": 1, "coeffs": [ { "k": 0, "re": [[1.25]], "im": [[0.0]] } ], "gamma": 0.75 }
//! ```
//!
//! Floats are written with 17 significant digits so a write/read cycle is
//! bit-exact.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use super::LaurentMatrixSeries;
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SymbolFile {
    pub n: usize,
    pub coeffs: Vec<CoeffEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CoeffEntry {
    pub k: i64,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// serde_json formatter that writes every float as `{:.16e}`.
pub struct SeventeenDigits<F> {
    inner: F,
}

impl<F> SeventeenDigits<F> {
    pub fn new(inner: F) -> Self {
        SeventeenDigits { inner }
    }
}

fn write_float<W: ?Sized + Write>(writer: &mut W, value: f64) -> io::Result<()> {
    if !value.is_finite() {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "non-finite float in symbol"));
    }
    write!(writer, "{:.16e}", value)
}

macro_rules! forward {
    ($($name:ident ( $($arg:ident : $ty:ty),* );)*) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.inner.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for SeventeenDigits<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write_float(writer, value)
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write_float(writer, value as f64)
    }

    forward! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

/// Serializes any value with the 17-digit float formatter.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SeventeenDigits::new(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes utf-8"))
}

impl SymbolFile {
    pub fn from_series(a: &LaurentMatrixSeries) -> Self {
        let n = a.block_size();
        let coeffs = a
            .iter()
            .filter(|(_, b)| b.iter().any(|z| z.re != 0.0 || z.im != 0.0))
            .map(|(k, b)| CoeffEntry {
                k,
                re: (0..n).map(|r| (0..n).map(|c| b[(r, c)].re).collect()).collect(),
                im: (0..n).map(|r| (0..n).map(|c| b[(r, c)].im).collect()).collect(),
            })
            .collect();
        SymbolFile { n, coeffs, gamma: a.smoothness() }
    }

    pub fn to_series(&self) -> Result<LaurentMatrixSeries> {
        if self.n == 0 {
            return Err(Error::ConfigInvalid("block size n must be positive".into()));
        }
        let n = self.n;
        let mut entries = Vec::with_capacity(self.coeffs.len());
        for e in &self.coeffs {
            let shape_ok = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|row| row.len() == n);
            if !shape_ok(&e.re) || !shape_ok(&e.im) {
                return Err(Error::ConfigInvalid(format!("coefficient k={} is not {n}x{n}", e.k)));
            }
            let block = CMat::from_fn(n, n, |r, c| C64::new(e.re[r][c], e.im[r][c]));
            entries.push((e.k, block));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return Err(Error::ConfigInvalid(format!("gamma must be positive, got {g}")));
            }
        }
        Ok(LaurentMatrixSeries::from_blocks(n, entries)?.with_smoothness(self.gamma))
    }
}

pub fn symbol_to_json(a: &LaurentMatrixSeries) -> Result<String> {
    to_json_string(&SymbolFile::from_series(a))
}

pub fn symbol_from_json(text: &str) -> Result<LaurentMatrixSeries> {
    let file: SymbolFile = serde_json::from_str(text)?;
    file.to_series()
}

pub fn read_symbol(path: &Path) -> Result<LaurentMatrixSeries> {
    symbol_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_symbol(path: &Path, a: &LaurentMatrixSeries) -> Result<()> {
    std::fs::write(path, symbol_to_json(a)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn writes_seventeen_digits() {
        let a = LaurentMatrixSeries::scalar_real(&[(0, 1.25), (1, -0.1)]).with_smoothness(Some(0.75));
        let text = symbol_to_json(&a).unwrap();
        assert!(text.contains("1.2500000000000000e0"), "{text}");
        assert!(text.contains("-1.0000000000000001e-1"), "{text}");
        assert!(text.contains("\"gamma\": 7.5000000000000000e-1"), "{text}");
        assert_eq!(symbol_from_json(&text).unwrap(), a);
    }

    #[test]
    fn rejects_bad_shapes() {
        let text = r#"{"n": 2, "coeffs": [{"k": 0, "re": [[1.0]], "im": [[0.0]]}]}"#;
        assert!(matches!(symbol_from_json(text), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn reads_minimal_file() {
        let text = r#"{"n": 1, "coeffs": [{"k": -1, "re": [[-0.5]], "im": [[0]]}, {"k": 0, "re": [[1.25]], "im": [[0]]}]}"#;
        let a = symbol_from_json(text).unwrap();
        assert_eq!(a.scalar_coeff(-1), C64::new(-0.5, 0.0));
        assert_eq!(a.smoothness(), None);
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(v in prop::collection::vec((-50i64..50, any::<f64>(), any::<f64>()), 1..8)) {
            prop_assume!(v.iter().all(|(_, a, b)| a.is_finite() && b.is_finite()));
            let e: Vec<(i64, C64)> = v.iter().map(|&(k, a, b)| (k, C64::new(a, b))).collect();
            let a = LaurentMatrixSeries::scalar(&e);
            let back = symbol_from_json(&symbol_to_json(&a).unwrap()).unwrap();
            for (k, blk) in a.iter() {
                let b = back.coeff(k);
                prop_assert_eq!(blk[(0, 0)].re.to_bits(), b[(0, 0)].re.to_bits());
                prop_assert_eq!(blk[(0, 0)].im.to_bits(), b[(0, 0)].im.to_bits());
            }
        }
    }
}
