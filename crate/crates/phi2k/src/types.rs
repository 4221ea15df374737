use std::f64::consts::PI;
use std::fmt;

use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which partition function a computation targets: the real `φ^{2k}`
/// model or the complex `(φ̄φ)^k` model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Real,
    Complex,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Real => write!(f, "real"),
            ModelKind::Complex => write!(f, "complex"),
        }
    }
}

/// Interaction order `k >= 2` together with the model kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub k: u32,
    pub kind: ModelKind,
}

impl ModelSpec {
    pub fn new(k: u32, kind: ModelKind) -> Result<Self> {
        if k < 2 {
            return Err(Error::Usage(format!("interaction order k = {k} must be >= 2")));
        }
        Ok(ModelSpec { k, kind })
    }

    pub fn real(k: u32) -> Result<Self> {
        Self::new(k, ModelKind::Real)
    }

    pub fn complex(k: u32) -> Result<Self> {
        Self::new(k, ModelKind::Complex)
    }

    pub fn is_real(&self) -> bool {
        self.kind == ModelKind::Real
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} k={}", self.kind, self.k)
    }
}

/// A coupling on the Riemann surface of the logarithm, stored as
/// (modulus, unbounded argument).
///
/// Powers are always taken as `r^α e^{iαθ}`, which keeps `λ^α`
/// single-valued for arguments beyond `±π`; nothing is ever wrapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogSurfacePoint {
    pub modulus: f64,
    pub argument: f64,
}

impl LogSurfacePoint {
    pub fn new(modulus: f64, argument: f64) -> Result<Self> {
        if !(modulus.is_finite() && argument.is_finite()) || modulus < 0.0 {
            return Err(Error::Usage(format!(
                "invalid log-surface point (modulus {modulus}, argument {argument})"
            )));
        }
        Ok(LogSurfacePoint { modulus, argument })
    }

    /// Positive-real shorthand: argument 0.
    pub fn real(modulus: f64) -> Result<Self> {
        Self::new(modulus, 0.0)
    }

    pub fn is_origin(&self) -> bool {
        self.modulus == 0.0
    }

    /// `λ^α = r^α e^{iαθ}`, single-valued on the surface.
    ///
    /// At the origin this is only defined for `α > 0` (returns 0) and
    /// `α = 0` (returns 1); negative powers of 0 yield an error at the
    /// call sites that need them.
    pub fn power(&self, alpha: f64) -> Complex64 {
        if self.modulus == 0.0 {
            if alpha == 0.0 {
                return Complex64::new(1.0, 0.0);
            }
            return Complex64::new(0.0, 0.0);
        }
        let r = self.modulus.powf(alpha);
        Complex64::from_polar(r, alpha * self.argument)
    }

    /// The coupling as an ordinary complex number (sheet information
    /// collapsed).
    pub fn to_complex(&self) -> Complex64 {
        self.power(1.0)
    }

    /// `g_k = λ^{1/(2k)}`.
    pub fn g(&self, k: u32) -> Complex64 {
        self.power(1.0 / (2.0 * f64::from(k)))
    }

    /// Mirror point `θ -> -θ` (Schwarz reflection partner).
    pub fn conj(&self) -> LogSurfacePoint {
        LogSurfacePoint { modulus: self.modulus, argument: -self.argument }
    }

    /// Number of half-sheets away from the principal one.
    pub fn sheet_span(&self) -> f64 {
        self.argument.abs() / (PI / 2.0)
    }
}

impl fmt::Display for LogSurfacePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}·e^(i·{})", self.modulus, self.argument)
    }
}

/// Result of a numerical integration: complex value, absolute-error
/// estimate, convergence flag and work counter. `truncation` records the
/// half-width `T` actually used when the integral ran over a truncated
/// (possibly deformed) axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureEstimate {
    #[serde(with = "complex_serde")]
    pub value: Complex64,
    pub abs_error: f64,
    pub converged: bool,
    pub evaluations: u64,
    pub truncation: Option<f64>,
}

impl QuadratureEstimate {
    pub fn exact(value: Complex64) -> Self {
        QuadratureEstimate {
            value,
            abs_error: 0.0,
            converged: true,
            evaluations: 0,
            truncation: None,
        }
    }
}

/// Serializes `Complex64` as `{"re": .., "im": ..}`.
pub mod complex_serde {
    use num::complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Parts {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(v: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        Parts { re: v.re, im: v.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let p = Parts::deserialize(d)?;
        Ok(Complex64::new(p.re, p.im))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_is_single_valued_on_the_surface() {
        // θ = π and θ = -π are different points of the surface.
        let up = LogSurfacePoint::new(0.05, PI).unwrap();
        let down = LogSurfacePoint::new(0.05, -PI).unwrap();
        let a = up.power(0.5);
        let b = down.power(0.5);
        assert!((a - b).norm() > 1e-3);
        assert!((a.conj() - b).norm() < 1e-15);
    }

    #[test]
    fn g_matches_power() {
        let p = LogSurfacePoint::new(0.1, 0.3).unwrap();
        let g = p.g(3);
        assert!((g - p.power(1.0 / 6.0)).norm() < 1e-15);
    }

    #[test]
    fn origin_powers() {
        let zero = LogSurfacePoint::real(0.0).unwrap();
        assert_eq!(zero.power(0.5), Complex64::new(0.0, 0.0));
        assert_eq!(zero.power(0.0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn rejects_bad_points() {
        assert!(LogSurfacePoint::new(-1.0, 0.0).is_err());
        assert!(LogSurfacePoint::new(f64::NAN, 0.0).is_err());
        assert!(ModelSpec::real(1).is_err());
    }

    #[test]
    fn estimate_serializes_value_as_re_im() {
        let e = QuadratureEstimate::exact(Complex64::new(1.5, -2.0));
        let s = serde_json::to_string(&e).unwrap();
        assert!(s.contains("\"re\":1.5"));
        assert!(s.contains("\"im\":-2.0"));
    }
}
