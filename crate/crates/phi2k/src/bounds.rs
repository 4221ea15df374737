//! Domain-membership predicates, the contour amplitude `ε(k)`,
//! eigenvalue/resolvent computations on the intermediate-field matrices,
//! and the randomized verification harness for the uniform resolvent
//! bound.

use std::f64::consts::PI;

use num::complex::Complex64;
use num::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::representations::{build_if_matrix, PsiPoint};
use crate::types::{LogSurfacePoint, ModelKind, ModelSpec};

/// Which analyticity domain: `D^k_ρ = {Re λ^{-1/k} > ρ^{-1}}` or the
/// larger sector `E^k_ρ = {r < ρ, |θ| < kπ/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    D,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub order: u32,
    pub rho: f64,
}

impl DomainSpec {
    pub fn new(kind: DomainKind, order: u32, rho: f64) -> Result<Self> {
        if order == 0 || !(rho > 0.0) {
            return Err(Error::Usage(format!("invalid domain spec (order {order}, ρ {rho})")));
        }
        Ok(DomainSpec { kind, order, rho })
    }
}

/// Open-domain membership test. `D`-kind: `|θ| < kπ/2` and
/// `r^{1/k} < ρ·cos(θ/k)`; `E`-kind: `r < ρ` and `|θ| < kπ/2`.
pub fn in_domain(lambda: &LogSurfacePoint, spec: &DomainSpec) -> bool {
    if lambda.is_origin() {
        return false;
    }
    let k = f64::from(spec.order);
    let theta = lambda.argument;
    if theta.abs() >= k * PI / 2.0 {
        return false;
    }
    match spec.kind {
        DomainKind::D => lambda.modulus.powf(1.0 / k) < spec.rho * (theta / k).cos(),
        DomainKind::E => lambda.modulus < spec.rho,
    }
}

/// The contour amplitude of the resolvent lemma:
/// `ε(k) = ¼·k^{-1/2}·sin(π/4k)`.
pub fn epsilon_for(k: u32) -> f64 {
    0.25 * f64::from(k).powf(-0.5) * (PI / (4.0 * f64::from(k))).sin()
}

/// Uniform resolvent bound `2·[sin(π/4k)]^{-1}` that goes with
/// [`epsilon_for`].
pub fn resolvent_bound(k: u32) -> f64 {
    2.0 / (PI / (4.0 * f64::from(k))).sin()
}

/// The two eigenvalues of `1 - g_k M(Ψ)` differing from 1.
///
/// The characteristic polynomial is computed from the full
/// `(k+1)×(k+1)` matrix and deflated by the known factor `(x-1)^{k-1}`
/// through synthetic division; the residual quadratic is solved in
/// closed form. Large division remainders would signal a violation of
/// the rank-2 structure and surface as an error.
pub fn nontrivial_eigenvalues(
    model: ModelSpec,
    k: u32,
    psi: &PsiPoint,
    lambda: &LogSurfacePoint,
) -> Result<(Complex64, Complex64)> {
    let ifm = build_if_matrix(model, k, psi)?;
    let g = lambda.g(k);
    let a = CMatrix::identity(k as usize + 1).sub(&ifm.m.scale(g));
    let mut poly = a.char_poly();

    let scale: f64 = poly.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    for _ in 0..k - 1 {
        let (quotient, remainder) = synthetic_divide_at_one(&poly);
        if remainder.norm() > 1e-9 * scale {
            return Err(Error::Usage(format!(
                "matrix does not have the expected (x-1)^{} factor (remainder {:.3e})",
                k - 1,
                remainder.norm()
            )));
        }
        poly = quotient;
    }
    debug_assert_eq!(poly.len(), 3);
    let b = poly[1] / poly[2];
    let c = poly[0] / poly[2];
    let disc = (b * b - c * 4.0).sqrt();
    let x1 = (-b + disc) * 0.5;
    let x2 = (-b - disc) * 0.5;
    // Deterministic ordering.
    if (x1.re, x1.im) <= (x2.re, x2.im) {
        Ok((x1, x2))
    } else {
        Ok((x2, x1))
    }
}

/// One synthetic-division step of `p(x)` by `(x - 1)`; returns
/// (quotient, remainder).
fn synthetic_divide_at_one(poly: &[Complex64]) -> (Vec<Complex64>, Complex64) {
    let n = poly.len();
    let mut quotient = vec![Complex64::zero(); n - 1];
    let mut carry = Complex64::zero();
    for i in (0..n).rev() {
        let v = poly[i] + carry;
        if i == 0 {
            return (quotient, v);
        }
        quotient[i - 1] = v;
        carry = v;
    }
    unreachable!()
}

/// Operator norm of the resolvent `(1 - g_k M(Ψ))^{-1}`, computed as the
/// reciprocal of the smallest singular value of `1 - g_k M(Ψ)`.
pub fn resolvent_norm(
    model: ModelSpec,
    k: u32,
    psi: &PsiPoint,
    lambda: &LogSurfacePoint,
) -> Result<f64> {
    let ifm = build_if_matrix(model, k, psi)?;
    let g = lambda.g(k);
    let a = CMatrix::identity(k as usize + 1).sub(&ifm.m.scale(g));
    let smin = a.min_singular();
    if smin < 1e-14 {
        return Err(Error::SingularDeterminant(format!(
            "1 - gM is numerically singular (σ_min = {smin:.3e})"
        )));
    }
    Ok(1.0 / smin)
}

/// Report of one sampling run of the resolvent-bound harness.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub k: u32,
    pub model: ModelKind,
    pub samples: u64,
    pub seed: u64,
    pub epsilon: f64,
    /// the uniform bound 2/sin(π/4k)
    pub bound: f64,
    pub max_resolvent_norm: f64,
    /// smallest |x - 0| over the two nontrivial eigenvalues of 1 - gM
    pub min_eigenvalue_modulus: f64,
    /// eigenvalue-exclusion radius ½·sin(π/4k)
    pub eigenvalue_radius: f64,
    /// Hilbert-Schmidt bound 2ε√k on the imaginary-part matrix
    pub hs_bound: f64,
    pub max_hs_norm: f64,
    pub violations: u64,
}

/// Draws Ψ points on the contours (t from a deterministic grid plus
/// seeded uniforms) and λ over `E^{k-1}_1`, and verifies the resolvent
/// bound, the eigenvalue exclusion disk and the Hilbert-Schmidt control
/// on every sample. Fully reproducible from `(seed, samples)`.
pub fn bound_sample_check(
    k: u32,
    model: ModelSpec,
    samples: u64,
    seed: u64,
) -> Result<BoundReport> {
    let model = ModelSpec::new(k, model.kind)?;
    let epsilon = epsilon_for(k);
    let bound = resolvent_bound(k);
    let radius = 0.5 * (PI / (4.0 * f64::from(k))).sin();
    let hs_bound = 2.0 * epsilon * f64::from(k).sqrt();

    // Real case: 2k border entries of M(Y), each bounded by ε√2.
    // Complex case: the same count with both components deformed, so the
    // per-entry bound doubles to 2ε and the norm bound becomes 2ε√(2k).
    let hs_bound = match model.kind {
        ModelKind::Real => hs_bound,
        ModelKind::Complex => 2.0 * epsilon * (2.0 * f64::from(k)).sqrt(),
    };

    let mut report = BoundReport {
        k,
        model: model.kind,
        samples,
        seed,
        epsilon,
        bound,
        max_resolvent_norm: 0.0,
        min_eigenvalue_modulus: f64::INFINITY,
        eigenvalue_radius: radius,
        hs_bound,
        max_hs_norm: 0.0,
        violations: 0,
    };
    if samples == 0 {
        report.min_eigenvalue_modulus = f64::NAN;
        return Ok(report);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_fields = real_parameter_count(model);
    let theta_max = f64::from(k - 1) * PI / 2.0;
    // tanh saturates well inside |t| <= 10; the grid covers the contour's
    // geometric variety, the random draws fill in between.
    const GRID: [f64; 9] = [-10.0, -3.0, -1.0, -0.3, 0.0, 0.3, 1.0, 3.0, 10.0];

    for sample in 0..samples {
        let mut ts = Vec::with_capacity(n_fields);
        if sample % 2 == 0 {
            // deterministic lattice walk through the grid
            let mut key = sample / 2;
            for _ in 0..n_fields {
                ts.push(GRID[(key % GRID.len() as u64) as usize]);
                key /= GRID.len() as u64;
            }
        } else {
            for _ in 0..n_fields {
                ts.push(rng.random_range(-10.0..10.0));
            }
        }
        let r: f64 = rng.random_range(0.0..1.0);
        let r = if r == 0.0 { 0.5 } else { r };
        let theta = rng.random_range(-theta_max..theta_max);
        let lambda = LogSurfacePoint::new(r, theta)?;

        let psi = contour_psi(model, epsilon, &ts);
        let norm = resolvent_norm(model, k, &psi, &lambda)?;
        let (x1, x2) = nontrivial_eigenvalues(model, k, &psi, &lambda)?;
        let min_eig = x1.norm().min(x2.norm());
        let undeformed = contour_psi(model, 0.0, &ts);
        let hs = imaginary_part_norm(model, k, &psi, &undeformed)?;

        report.max_resolvent_norm = report.max_resolvent_norm.max(norm);
        report.min_eigenvalue_modulus = report.min_eigenvalue_modulus.min(min_eig);
        report.max_hs_norm = report.max_hs_norm.max(hs);
        if norm > bound || min_eig < radius || hs > hs_bound + 1e-12 {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Number of real contour parameters for one Ψ draw.
fn real_parameter_count(model: ModelSpec) -> usize {
    let fields = model.k as usize - 1;
    match model.kind {
        ModelKind::Real => fields,
        ModelKind::Complex => 2 * fields,
    }
}

/// Builds the Ψ point reached by the contour parameters `ts`: crossed
/// pairs come from rotating `a` (on `C_-`) against `b` (on `C_+`), the
/// plain σ (even k) stays on the real axis.
fn contour_psi(model: ModelSpec, epsilon: f64, ts: &[f64]) -> PsiPoint {
    let k = model.k;
    let has_sigma = k % 2 == 0;
    let pairs = if k % 2 == 1 { (k - 1) / 2 } else { (k - 2) / 2 } as usize;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let deform = |t: f64, sign: f64| Complex64::new(t, sign * epsilon * t.tanh());

    match model.kind {
        ModelKind::Real => {
            let mut values = Vec::with_capacity(k as usize - 1);
            let mut idx = 0;
            if has_sigma {
                values.push(Complex64::new(ts[0], 0.0));
                idx = 1;
            }
            for _ in 0..pairs {
                let a = deform(ts[idx], -1.0);
                let b = deform(ts[idx + 1], 1.0);
                values.push((a + b) * inv_sqrt2);
                values.push((a - b) * inv_sqrt2);
                idx += 2;
            }
            PsiPoint::real(values)
        }
        ModelKind::Complex => {
            let i_unit = Complex64::new(0.0, 1.0);
            let mut values = Vec::with_capacity(k as usize - 1);
            let mut bars = Vec::with_capacity(k as usize - 1);
            let mut idx = 0;
            if has_sigma {
                let s = Complex64::new(ts[0], 0.0) + i_unit * ts[1];
                values.push(s);
                bars.push(s.conj());
                idx = 2;
            }
            for _ in 0..pairs {
                let a = deform(ts[idx], -1.0) + i_unit * deform(ts[idx + 1], -1.0);
                let a_bar = deform(ts[idx], -1.0) - i_unit * deform(ts[idx + 1], -1.0);
                let b = deform(ts[idx + 2], 1.0) + i_unit * deform(ts[idx + 3], 1.0);
                let b_bar = deform(ts[idx + 2], 1.0) - i_unit * deform(ts[idx + 3], 1.0);
                values.push((a + b) * inv_sqrt2);
                bars.push((a_bar + b_bar) * inv_sqrt2);
                values.push((a - b) * inv_sqrt2);
                bars.push((a_bar - b_bar) * inv_sqrt2);
                idx += 4;
            }
            PsiPoint::complex(values, bars)
        }
    }
}

/// Operator norm of the deformation matrix `M(Y)` in the split
/// `M(Ψ) = M(X) + i·M(Y)`, where `X` is the undeformed (ε = 0) field
/// point and `Y = (Ψ - X)/i`. Since `M` is affine in Ψ with constant
/// entries, `M(Y)` is built as `M(Y-as-fields) - M(0)`.
fn imaginary_part_norm(
    model: ModelSpec,
    k: u32,
    psi: &PsiPoint,
    undeformed: &PsiPoint,
) -> Result<f64> {
    let over_i = Complex64::new(0.0, -1.0);
    let y_values: Vec<Complex64> = psi
        .values
        .iter()
        .zip(&undeformed.values)
        .map(|(v, x)| (v - x) * over_i)
        .collect();
    let y_bars: Option<Vec<Complex64>> = psi.conjugates.as_ref().map(|bars| {
        bars.iter()
            .zip(undeformed.conjugates.as_ref().unwrap())
            .map(|(v, x)| (v - x) * over_i)
            .collect()
    });
    let psi_y = PsiPoint { values: y_values, conjugates: y_bars };

    let m_y = build_if_matrix(model, k, &psi_y)?.m;
    let m_0 = build_if_matrix(model, k, &PsiPoint::zero(model))?.m;
    Ok(m_y.sub(&m_0).op_norm())
}
