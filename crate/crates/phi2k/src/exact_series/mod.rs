//! Exact big-integer/rational generation of every series coefficient and
//! combinatorial quantity used elsewhere in the crate, plus a Wick-pairing
//! oracle for the crossed intermediate-field measures.
//!
//! Everything here is arbitrary-precision: the coefficients grow like
//! `(kn)!` and serve as ground truth for the floating-point evaluators,
//! so no floating point enters this module.

mod wick;
mod symbolic;

pub use symbolic::{if_perturbative_coefficient, DEFAULT_IF_ORDER_CAP};
pub use wick::{x_measure_moment, CovarianceTable, FieldLabel, GaussRat};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ModelKind, ModelSpec};

/// `2p!! = ∏_{j=1}^{p} (2j-1)`, the *odd* double factorial (note: not the
/// standard even one; the nonstandard name keeps the definition explicit).
/// Empty product at `p = 0`.
pub fn odd_double_factorial(p: u64) -> BigInt {
    let mut acc = BigInt::one();
    for j in 1..=p {
        acc *= BigInt::from(2 * j - 1);
    }
    acc
}

/// `n!` as a big integer.
pub fn factorial(n: u64) -> BigInt {
    let mut acc = BigInt::one();
    for j in 2..=n {
        acc *= BigInt::from(j);
    }
    acc
}

/// Binomial coefficient `C(n, k)` as a big integer.
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for j in 0..k {
        acc = acc * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    acc
}

/// Taylor coefficient of the real `φ^{2k}` partition function:
/// `a_{k,n} = (-1)^n (2kn)!! / (2^n n!)` with `2p!!` as above.
pub fn real_coefficient(k: u32, n: u64) -> BigRational {
    let numer = odd_double_factorial(u64::from(k) * n);
    let denom = BigInt::from(2u32).pow(n as u32) * factorial(n);
    let mut r = BigRational::new(numer, denom);
    if n % 2 == 1 {
        r = -r;
    }
    r
}

/// Taylor coefficient of the complex `(φ̄φ)^k` partition function:
/// `a^c_{k,n} = (-1)^n (kn)! / n!` (always integral).
pub fn complex_coefficient(k: u32, n: u64) -> BigInt {
    let kn = u64::from(k) * n;
    let mut v = factorial(kn) / factorial(n);
    if n % 2 == 1 {
        v = -v;
    }
    v
}

/// Generalized Catalan number `C_p^{(3)} = C(3p+1, p)/(3p+1) = C(3p, p)/(2p+1)`.
///
/// Both closed forms are computed and must agree exactly.
pub fn catalan3(p: u64) -> BigInt {
    let a = binomial(3 * p + 1, p) / BigInt::from(3 * p + 1);
    let b = binomial(3 * p, p) / BigInt::from(2 * p + 1);
    assert_eq!(a, b, "generalized Catalan closed forms disagree at p = {p}");
    a
}

/// Coefficient of `u^{2p}` in the closed-form series `g(u)`:
/// `(-1)^p C(3p, p) = (2p+1)·(-1)^p·C_p^{(3)}`.
pub fn g_series_coefficient(p: u64) -> BigInt {
    let mut v = binomial(3 * p, p);
    if p % 2 == 1 {
        v = -v;
    }
    v
}

/// Exact Taylor coefficients of a partition-function series in `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSeries {
    pub model: ModelSpec,
    pub coeffs: Vec<BigRational>,
}

impl CoefficientSeries {
    /// Builds the series of the chosen model with `order` stored
    /// coefficients (indices `0..order`).
    pub fn generate(model: ModelSpec, order: usize) -> Self {
        let coeffs = (0..order as u64)
            .map(|n| match model.kind {
                ModelKind::Real => real_coefficient(model.k, n),
                ModelKind::Complex => {
                    BigRational::from_integer(complex_coefficient(model.k, n))
                }
            })
            .collect();
        CoefficientSeries { model, coeffs }
    }

    /// Number of stored coefficients.
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// `Z(0) = 1` and alternating signs; violated only by a construction
    /// bug, so exposed for tests and debug assertions.
    pub fn check_invariants(&self) -> Result<()> {
        if let Some(first) = self.coeffs.first() {
            if !first.is_one() {
                return Err(Error::Usage("series must start with coefficient 1".into()));
            }
        }
        for (n, c) in self.coeffs.iter().enumerate() {
            let expected_negative = n % 2 == 1;
            if c.is_zero() || (c.is_negative() != expected_negative) {
                return Err(Error::Usage(format!(
                    "coefficient {n} violates the alternating-sign invariant"
                )));
            }
        }
        Ok(())
    }

    /// Borel-Leroy transform of the given order: `b_n = a_n / (order·n)!`.
    pub fn borel_leroy(&self, order: u32) -> Result<CoefficientSeries> {
        if order < 1 {
            return Err(Error::Usage("Borel-Leroy order must be >= 1".into()));
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, a)| a / BigRational::from_integer(factorial(u64::from(order) * n as u64)))
            .collect();
        Ok(CoefficientSeries { model: self.model, coeffs })
    }

    /// Bit-exact JSON export with decimal-string big integers.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&SeriesJson::from(self)).expect("series serialization")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: SeriesJson =
            serde_json::from_str(s).map_err(|e| Error::Usage(format!("bad series JSON: {e}")))?;
        raw.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct RationalJson {
    num: String,
    den: String,
}

#[derive(Serialize, Deserialize)]
struct SeriesJson {
    k: u32,
    model: ModelKind,
    coeffs: Vec<RationalJson>,
}

impl From<&CoefficientSeries> for SeriesJson {
    fn from(s: &CoefficientSeries) -> Self {
        SeriesJson {
            k: s.model.k,
            model: s.model.kind,
            coeffs: s
                .coeffs
                .iter()
                .map(|c| RationalJson { num: c.numer().to_string(), den: c.denom().to_string() })
                .collect(),
        }
    }
}

impl TryFrom<SeriesJson> for CoefficientSeries {
    type Error = Error;

    fn try_from(raw: SeriesJson) -> Result<Self> {
        let model = ModelSpec::new(raw.k, raw.model)?;
        let coeffs = raw
            .coeffs
            .iter()
            .map(|r| {
                let num: BigInt =
                    r.num.parse().map_err(|_| Error::Usage(format!("bad numerator {}", r.num)))?;
                let den: BigInt =
                    r.den.parse().map_err(|_| Error::Usage(format!("bad denominator {}", r.den)))?;
                if den.is_zero() {
                    return Err(Error::Usage("zero denominator".into()));
                }
                Ok(BigRational::new(num, den))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CoefficientSeries { model, coeffs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_double_factorial_values() {
        assert_eq!(odd_double_factorial(0), BigInt::from(1));
        assert_eq!(odd_double_factorial(2), BigInt::from(3));
        assert_eq!(odd_double_factorial(4), BigInt::from(105));
        assert_eq!(odd_double_factorial(6), BigInt::from(10395));
    }

    #[test]
    fn real_coefficients_match_pairing_counts() {
        assert_eq!(real_coefficient(2, 0), BigRational::from_integer(1.into()));
        assert_eq!(real_coefficient(2, 1), BigRational::new((-3).into(), 2.into()));
        assert_eq!(real_coefficient(3, 1), BigRational::new((-15).into(), 2.into()));
        // a_{2,2} = 105/8
        assert_eq!(real_coefficient(2, 2), BigRational::new(105.into(), 8.into()));
    }

    #[test]
    fn complex_coefficients() {
        assert_eq!(complex_coefficient(3, 0), BigInt::from(1));
        assert_eq!(complex_coefficient(3, 1), BigInt::from(-6));
        assert_eq!(complex_coefficient(3, 2), BigInt::from(360));
        assert_eq!(complex_coefficient(3, 3), BigInt::from(-60480));
    }

    #[test]
    fn catalan3_values() {
        assert_eq!(catalan3(0), BigInt::from(1));
        assert_eq!(catalan3(1), BigInt::from(1));
        assert_eq!(catalan3(2), BigInt::from(3));
        assert_eq!(catalan3(3), BigInt::from(12));
    }

    #[test]
    fn g_series_values() {
        assert_eq!(g_series_coefficient(0), BigInt::from(1));
        assert_eq!(g_series_coefficient(1), BigInt::from(-3));
        assert_eq!(g_series_coefficient(2), BigInt::from(15));
        assert_eq!(g_series_coefficient(3), BigInt::from(-84));
    }

    #[test]
    fn borel_leroy_of_complex_k3_is_the_g_series() {
        let series = CoefficientSeries::generate(ModelSpec::complex(3).unwrap(), 12);
        let b = series.borel_leroy(2).unwrap();
        for (p, c) in b.coeffs.iter().enumerate() {
            assert_eq!(c, &BigRational::from_integer(g_series_coefficient(p as u64)));
        }
    }

    #[test]
    fn borel_leroy_trivial_and_first_order() {
        let one = CoefficientSeries {
            model: ModelSpec::real(2).unwrap(),
            coeffs: vec![BigRational::from_integer(1.into())],
        };
        assert_eq!(one.borel_leroy(3).unwrap().coeffs, one.coeffs);

        let series = CoefficientSeries::generate(ModelSpec::real(2).unwrap(), 2);
        let b = series.borel_leroy(1).unwrap();
        assert_eq!(b.coeffs[1], BigRational::new((-3).into(), 2.into()));
    }

    #[test]
    fn series_invariants_hold_for_generated_series() {
        for k in 2..=5 {
            for model in [ModelSpec::real(k).unwrap(), ModelSpec::complex(k).unwrap()] {
                CoefficientSeries::generate(model, 10).check_invariants().unwrap();
            }
        }
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let series = CoefficientSeries::generate(ModelSpec::complex(3).unwrap(), 8);
        let json = series.to_json();
        assert!(json.contains("\"num\":\"-6\""));
        assert!(json.contains("\"model\":\"complex\""));
        let back = CoefficientSeries::from_json(&json).unwrap();
        assert_eq!(series, back);
    }
}
