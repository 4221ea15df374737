//! The three evaluators of `Z_k(λ)` / `Z^c_k(λ)`: the standard integral
//! (with its rotated-variable analytic continuation), the
//! intermediate-field contour-determinant integral, and the `k = 3`
//! complex closed-form improved action.

mod improved;

pub use improved::{
    action_derivative_bound_check, action_s, delta_pm, g_of, h_of, h_prime, improved_eval,
    DerivativeBoundReport,
};

use std::f64::consts::PI;

use num::complex::Complex64;
use num::Zero;

use crate::bounds::epsilon_for;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::quadrature::{refine_integral, tensor_integrate, AxisSpec, ContourSign, ContourSpec};
use crate::types::{LogSurfacePoint, ModelKind, ModelSpec, QuadratureEstimate};

/// Values of the remaining intermediate fields at one integration point.
/// Real model: `k-1` complex values in the Ψ ordering
/// (`α₁, β₁, α₃, β₃, …` for odd `k`; `σ, α₂, β₂, …` for even `k`).
/// Complex model: the same list plus the formal conjugates (independent
/// analytic continuations, not numeric conjugates).
#[derive(Debug, Clone, PartialEq)]
pub struct PsiPoint {
    pub values: Vec<Complex64>,
    pub conjugates: Option<Vec<Complex64>>,
}

impl PsiPoint {
    pub fn real(values: Vec<Complex64>) -> Self {
        PsiPoint { values, conjugates: None }
    }

    pub fn complex(values: Vec<Complex64>, conjugates: Vec<Complex64>) -> Self {
        PsiPoint { values, conjugates: Some(conjugates) }
    }

    pub fn zero(model: ModelSpec) -> Self {
        let n = model.k as usize - 1;
        let values = vec![Complex64::zero(); n];
        match model.kind {
            ModelKind::Real => PsiPoint::real(values),
            ModelKind::Complex => PsiPoint::complex(values.clone(), values),
        }
    }

    fn check(&self, model: ModelSpec) -> Result<()> {
        let expect = model.k as usize - 1;
        if self.values.len() != expect {
            return Err(Error::Usage(format!(
                "Ψ must have {expect} entries for k = {}, got {}",
                model.k,
                self.values.len()
            )));
        }
        match (model.kind, &self.conjugates) {
            (ModelKind::Real, None) => Ok(()),
            (ModelKind::Complex, Some(c)) if c.len() == expect => Ok(()),
            (ModelKind::Complex, Some(c)) => Err(Error::Usage(format!(
                "conjugate list must have {expect} entries, got {}",
                c.len()
            ))),
            (ModelKind::Real, Some(_)) => {
                Err(Error::Usage("real model takes no conjugate fields".into()))
            }
            (ModelKind::Complex, None) => {
                Err(Error::Usage("complex model requires conjugate fields".into()))
            }
        }
    }

    fn conjugate_values(&self) -> &[Complex64] {
        self.conjugates.as_deref().unwrap_or(&self.values)
    }
}

/// The matrices of the intermediate-field representation at one Ψ point:
/// `H` (first row/column, zero corner), the Φ covariance `C`, and
/// `M = iC·H` exactly.
#[derive(Debug, Clone)]
pub struct IFMatrix {
    pub k: u32,
    pub model: ModelSpec,
    pub h: CMatrix,
    pub c: CMatrix,
    pub m: CMatrix,
}

/// Builds `H`, `C` and `M = iC·H` for the given model and field point.
pub fn build_if_matrix(model: ModelSpec, k: u32, psi: &PsiPoint) -> Result<IFMatrix> {
    if k < 2 {
        return Err(Error::Usage(format!("unsupported interaction order k = {k}")));
    }
    let model = ModelSpec::new(k, model.kind)?;
    psi.check(model)?;
    let n = k as usize + 1;

    let mut h = CMatrix::zeros(n);
    let bars = psi.conjugate_values();
    for (j, (&v, &vb)) in psi.values.iter().zip(bars).enumerate() {
        h[(0, j + 1)] = v;
        h[(j + 1, 0)] = vb;
    }
    h[(0, n - 1)] = Complex64::new(1.0, 0.0);
    h[(n - 1, 0)] = Complex64::new(1.0, 0.0);

    // Identity on plain variables, antidiagonal -i blocks on crossed pairs.
    let mut c = CMatrix::zeros(n);
    let plain = if k % 2 == 1 { 2 } else { 1 };
    for i in 0..plain {
        c[(i, i)] = Complex64::new(1.0, 0.0);
    }
    let minus_i = Complex64::new(0.0, -1.0);
    let mut i = plain;
    while i + 1 < n {
        c[(i, i + 1)] = minus_i;
        c[(i + 1, i)] = minus_i;
        i += 2;
    }

    let m = c.mul(&h).scale(Complex64::new(0.0, 1.0));
    Ok(IFMatrix { k, model, h, c, m })
}

/// The rank-2 invariant `Q(Ψ) = Σ_j M[1,j]·M[j,1]`, defined operationally
/// from the first row and column; `det(1 - gM) = 1 - g²Q` exactly.
pub fn rank2_invariant(m: &CMatrix) -> Complex64 {
    (1..m.n).map(|j| m[(0, j)] * m[(j, 0)]).sum()
}

/// `Q(Ψ)` computed directly from the field values, without building the
/// matrix; used on the quadrature hot path. Agrees with
/// [`rank2_invariant`] of the built matrix.
#[inline]
fn rank2_invariant_from_fields(
    k: u32,
    psi: &[Complex64],
    psi_bar: &[Complex64],
) -> Complex64 {
    let k = k as usize;
    let i_unit = Complex64::new(0.0, 1.0);
    // h = (Ψ…, 1), hbar likewise with conjugates.
    let h = |j: usize| if j == k - 1 { Complex64::new(1.0, 0.0) } else { psi[j] };
    let hb = |j: usize| if j == k - 1 { Complex64::new(1.0, 0.0) } else { psi_bar[j] };
    let plain = if k % 2 == 1 { 1 } else { 0 }; // count of plain Φ rows past φ itself
    let mut q = Complex64::zero();
    for j in 0..k {
        let m_row = i_unit * h(j);
        let m_col = if j < plain {
            i_unit * hb(j)
        } else {
            // crossed pair partner within (plain..k)
            let off = j - plain;
            let partner = if off % 2 == 0 { j + 1 } else { j - 1 };
            hb(partner)
        };
        q += m_row * m_col;
    }
    q
}

/// `det(1 - g_k M(Ψ))^{-1/2}` (real model) or `det(1 - g_k M(Ψ))^{-1}`
/// (complex model).
///
/// `det(1 - gM)` is affine in `g²`, so the square-root branch continued
/// along the straight path `g: 0 -> g_k` from value 1 traces the segment
/// `[1, 1 - g_k²Q]`, which can only meet the principal cut by passing
/// through zero; the principal branch is therefore the continued one
/// whenever the determinant is nonsingular.
pub fn if_integrand(
    model: ModelSpec,
    lambda: &LogSurfacePoint,
    psi: &PsiPoint,
) -> Result<Complex64> {
    psi.check(model)?;
    let g = lambda.g(model.k);
    let q = rank2_invariant_from_fields(model.k, &psi.values, psi.conjugate_values());
    let det = Complex64::new(1.0, 0.0) - g * g * q;
    if det.norm() < 1e-12 {
        return Err(Error::SingularDeterminant(format!(
            "det(1 - gM) = {det} at Ψ = {:?}",
            psi.values
        )));
    }
    Ok(match model.kind {
        ModelKind::Real => det.sqrt().inv(),
        ModelKind::Complex => det.inv(),
    })
}

/// Standard representation: the ordinary convergent integral, valid for
/// `Re λ > 0` (use [`rotated_eval`] beyond the principal half-sheet).
pub fn standard_eval(
    model: ModelSpec,
    lambda: &LogSurfacePoint,
    tolerance: f64,
) -> Result<QuadratureEstimate> {
    if !(tolerance > 0.0) {
        return Err(Error::Usage("tolerance must be positive".into()));
    }
    if !lambda.is_origin() && lambda.argument.abs() >= PI / 2.0 {
        return Err(Error::Domain(format!(
            "standard representation needs Re λ > 0 (|θ| < π/2), got θ = {}",
            lambda.argument
        )));
    }
    let lam = lambda.to_complex();
    match model.kind {
        ModelKind::Real => {
            let two_k = 2 * model.k as i32;
            let norm = (2.0 * PI).sqrt();
            let t_max = (2.0 * (50.0 / tolerance).ln()).sqrt() + 1.0;
            let f = move |x: f64| {
                let interaction = lam * (0.5 * x.powi(two_k));
                ((-0.5 * x * x) - interaction).exp() / norm
            };
            let mut est = refine_integral(&f, -t_max, t_max, 64, tolerance, 50_000_000);
            est.truncation = Some(t_max);
            Ok(est)
        }
        ModelKind::Complex => {
            // Angular symmetry reduces the two-dimensional integral to
            // ∫_0^∞ e^{-r - λ r^k} dr exactly.
            let k = model.k as i32;
            let t_max = (50.0 / tolerance).ln() + 5.0;
            let f = move |r: f64| (-Complex64::new(r, 0.0) - lam * r.powi(k)).exp();
            let mut est = refine_integral(&f, 0.0, t_max, 64, tolerance, 50_000_000);
            est.truncation = Some(t_max);
            Ok(est)
        }
    }
}

/// Rotated-variable representation
/// `Z_k(λ) = λ^{-1/2k} ∫ e^{-ψ^{2k}/2} e^{-λ^{-1/k}ψ²/2} dψ/√(2π)`,
/// the analytic continuation valid on `|θ| < kπ/2`.
pub fn rotated_eval(
    model: ModelSpec,
    lambda: &LogSurfacePoint,
    tolerance: f64,
) -> Result<QuadratureEstimate> {
    if !(tolerance > 0.0) {
        return Err(Error::Usage("tolerance must be positive".into()));
    }
    if lambda.is_origin() {
        return Err(Error::Domain("rotated representation is undefined at λ = 0".into()));
    }
    let k = model.k;
    if lambda.argument.abs() >= f64::from(k) * PI / 2.0 {
        return Err(Error::Domain(format!(
            "rotated representation needs |θ| < kπ/2 = {}, got θ = {}",
            f64::from(k) * PI / 2.0,
            lambda.argument
        )));
    }
    let w = lambda.power(-1.0 / f64::from(k));
    match model.kind {
        ModelKind::Real => {
            let prefactor = lambda.power(-1.0 / (2.0 * f64::from(k)));
            let two_k = 2 * k as i32;
            let norm = (2.0 * PI).sqrt();
            let t_max = (2.0 * (50.0 / tolerance).ln()).powf(1.0 / f64::from(two_k as u32)) + 1.0;
            let f = move |x: f64| {
                let a = -0.5 * x.powi(two_k);
                let b = w * (0.5 * x * x);
                (Complex64::new(a, 0.0) - b).exp() / norm
            };
            let mut est = refine_integral(&f, -t_max, t_max, 64, tolerance, 50_000_000);
            est.value *= prefactor;
            est.abs_error *= prefactor.norm();
            est.truncation = Some(t_max);
            Ok(est)
        }
        ModelKind::Complex => {
            // Z^c form after r = λ^{-1/k}s: λ^{-1/k} ∫_0^∞ e^{-s^k - ws} ds.
            let prefactor = w;
            let ki = k as i32;
            let t_max = (2.0 * (50.0 / tolerance).ln()).powf(1.0 / f64::from(k)) + 1.0;
            let f = move |s: f64| {
                (Complex64::new(-s.powi(ki), 0.0) - w * s).exp()
            };
            let mut est = refine_integral(&f, 0.0, t_max, 64, tolerance, 50_000_000);
            est.value *= prefactor;
            est.abs_error *= prefactor.norm();
            est.truncation = Some(t_max);
            Ok(est)
        }
    }
}

/// Default dimension caps for [`if_eval`]: quadrature dimension `k-1`
/// (real) or `2(k-1)` (complex) stays within the 4-axis tensor limit.
pub const IF_EVAL_MAX_K_REAL: u32 = 5;
pub const IF_EVAL_MAX_K_COMPLEX: u32 = 3;

/// Intermediate-field evaluation of `Z_k(λ)`: integrates
/// [`if_integrand`] over the crossed measure `dχ(Ψ)`, realized by the
/// rotation from independent `±i` measures, each real component on its
/// own deformed contour (sign matched to its covariance sign).
///
/// `epsilon <= epsilon_for(k)` keeps the integrand uniformly bounded for
/// every `λ` in the convergence sector. Larger amplitudes remain valid
/// (the integral is ε-independent) as long as no determinant zero enters
/// the swept strip; the minimum `|det|` seen on the grid is monitored and
/// the evaluation is rejected if it comes too close to a pole.
pub fn if_eval(
    model: ModelSpec,
    lambda: &LogSurfacePoint,
    epsilon: f64,
    tolerance: f64,
) -> Result<QuadratureEstimate> {
    if !(tolerance > 0.0) {
        return Err(Error::Usage("tolerance must be positive".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Usage(format!("contour amplitude ε = {epsilon} must be in (0, 1)")));
    }
    let k = model.k;
    let max_k = match model.kind {
        ModelKind::Real => IF_EVAL_MAX_K_REAL,
        ModelKind::Complex => IF_EVAL_MAX_K_COMPLEX,
    };
    if k > max_k {
        return Err(Error::DimensionCap(format!(
            "if_eval supports k <= {max_k} for the {} model, got k = {k}",
            model.kind
        )));
    }
    if lambda.argument.abs() >= f64::from(k - 1) * PI / 2.0 && !lambda.is_origin() {
        return Err(Error::Domain(format!(
            "λ outside the order-{} sector: |θ| = {}",
            k - 1,
            lambda.argument.abs()
        )));
    }
    if lambda.is_origin() {
        return Ok(QuadratureEstimate::exact(Complex64::new(1.0, 0.0)));
    }

    let g = lambda.g(k);
    let gg = g * g;
    let is_real = model.is_real();
    let pairs = crossed_pair_count(k);
    let has_sigma = k % 2 == 0;

    // Per-axis covariance scale: 1 for a real component, 1/2 for each of
    // the two real components of a complex field.
    let component_cov = if is_real { 1.0 } else { 0.5 };
    let axis_tol = tolerance / (2.0 * dimension_count(model) as f64);

    let mut axes: Vec<AxisSpec> = Vec::new();
    if has_sigma {
        let t = sigma_truncation(axis_tol);
        if is_real {
            axes.push(AxisSpec::RealGauss { variance: 1.0, truncation: t });
        } else {
            axes.push(AxisSpec::RealGauss { variance: 0.5, truncation: t });
            axes.push(AxisSpec::RealGauss { variance: 0.5, truncation: t });
        }
    }
    for _ in 0..pairs {
        let per_field = if is_real { 1 } else { 2 };
        for _ in 0..per_field {
            axes.push(AxisSpec::Contour {
                spec: ContourSpec::for_tolerance(
                    epsilon,
                    ContourSign::Minus,
                    component_cov,
                    axis_tol,
                )?,
                covariance: component_cov,
                fold_density: true,
            });
        }
        for _ in 0..per_field {
            axes.push(AxisSpec::Contour {
                spec: ContourSpec::for_tolerance(
                    epsilon,
                    ContourSign::Plus,
                    component_cov,
                    axis_tol,
                )?,
                covariance: component_cov,
                fold_density: true,
            });
        }
    }
    debug_assert_eq!(axes.len(), dimension_count(model));

    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let kk = k;
    let fields_at = move |p: &[Complex64]| -> ([Complex64; 4], [Complex64; 4], usize) {
        let mut psi = [Complex64::zero(); 4];
        let mut psi_bar = [Complex64::zero(); 4];
        let mut idx = 0; // axis cursor
        let mut out = 0; // Ψ cursor
        if has_sigma {
            if is_real {
                psi[0] = p[0];
                psi_bar[0] = p[0];
                idx = 1;
            } else {
                psi[0] = p[0] + Complex64::new(0.0, 1.0) * p[1];
                psi_bar[0] = p[0] - Complex64::new(0.0, 1.0) * p[1];
                idx = 2;
            }
            out = 1;
        }
        for _ in 0..pairs {
            if is_real {
                let a = p[idx];
                let b = p[idx + 1];
                psi[out] = (a + b) * inv_sqrt2;
                psi_bar[out] = psi[out];
                psi[out + 1] = (a - b) * inv_sqrt2;
                psi_bar[out + 1] = psi[out + 1];
                idx += 2;
            } else {
                let i_unit = Complex64::new(0.0, 1.0);
                let a = p[idx] + i_unit * p[idx + 1];
                let a_bar = p[idx] - i_unit * p[idx + 1];
                let b = p[idx + 2] + i_unit * p[idx + 3];
                let b_bar = p[idx + 2] - i_unit * p[idx + 3];
                psi[out] = (a + b) * inv_sqrt2;
                psi_bar[out] = (a_bar + b_bar) * inv_sqrt2;
                psi[out + 1] = (a - b) * inv_sqrt2;
                psi_bar[out + 1] = (a_bar - b_bar) * inv_sqrt2;
                idx += 4;
            }
            out += 2;
        }
        (psi, psi_bar, out)
    };
    let det_at = move |p: &[Complex64]| -> Complex64 {
        let (psi, psi_bar, out) = fields_at(p);
        let q = rank2_invariant_from_fields(kk, &psi[..out], &psi_bar[..out]);
        Complex64::new(1.0, 0.0) - gg * q
    };

    // Pole proximity monitor: scan |det| over a coarse version of the
    // integration grid before paying for the full tensor sum.
    let min_det = min_det_scan(&axes, &det_at);
    if min_det < 1e-3 {
        return Err(Error::SingularDeterminant(format!(
            "det(1 - gM) reaches {min_det:.3e} on the integration region; reduce ε or move λ"
        )));
    }

    let f = |p: &[Complex64]| -> Complex64 {
        let det = det_at(p);
        if is_real {
            det.sqrt().inv()
        } else {
            det.inv()
        }
    };

    let budget = if axes.len() >= 4 { 40_000_000_000 } else { 4_000_000_000 };
    tensor_integrate(&axes, &f, tolerance, budget)
}

/// Minimum `|det|` over a coarse subsample of the tensor grid (at most
/// ~40 nodes per axis), enough to detect a determinant-zero region
/// entering the swept contour strip.
fn min_det_scan<F: Fn(&[Complex64]) -> Complex64>(axes: &[AxisSpec], det_at: &F) -> f64 {
    let coarse: Vec<Vec<Complex64>> = axes
        .iter()
        .map(|a| {
            let axis = a.build(0);
            let stride = (axis.z.len() / 40).max(1);
            axis.z.iter().copied().step_by(stride).collect()
        })
        .collect();
    let d = coarse.len();
    let mut idx = vec![0usize; d];
    let mut point = [Complex64::zero(); 4];
    let mut min = f64::INFINITY;
    loop {
        for (j, &i) in idx.iter().enumerate() {
            point[j] = coarse[j][i];
        }
        min = min.min(det_at(&point[..d]).norm());
        // odometer increment
        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] < coarse[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j == d {
                return min;
            }
        }
    }
}

fn crossed_pair_count(k: u32) -> usize {
    if k % 2 == 1 {
        (k as usize - 1) / 2
    } else {
        (k as usize - 2) / 2
    }
}

fn dimension_count(model: ModelSpec) -> usize {
    let fields = model.k as usize - 1;
    match model.kind {
        ModelKind::Real => fields,
        ModelKind::Complex => 2 * fields,
    }
}

fn sigma_truncation(tol: f64) -> f64 {
    (2.0 * (40.0 / tol).ln()).sqrt().max(4.0) + 1.0
}

/// Default contour amplitude for [`if_eval`]: the guaranteed-safe value
/// from the resolvent bound.
pub fn default_epsilon(k: u32) -> f64 {
    epsilon_for(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_series::{complex_coefficient, CoefficientSeries};
    use num::ToPrimitive;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn standard_at_zero_is_one() {
        for model in [ModelSpec::real(3).unwrap(), ModelSpec::complex(3).unwrap()] {
            let z = standard_eval(model, &LogSurfacePoint::real(0.0).unwrap(), 1e-12).unwrap();
            assert!((z.value - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn standard_rejects_left_half_plane() {
        let model = ModelSpec::real(2).unwrap();
        let lam = LogSurfacePoint::new(0.1, 2.0).unwrap();
        assert!(matches!(standard_eval(model, &lam, 1e-10), Err(Error::Domain(_))));
    }

    #[test]
    fn standard_complex_truncation_consistent() {
        // |Z - Σ_{n<=N} a_n λ^n| <= |a_{N+1}| λ^{N+1} while terms decrease.
        let model = ModelSpec::complex(3).unwrap();
        let lam = LogSurfacePoint::real(0.01).unwrap();
        let z = standard_eval(model, &lam, 1e-12).unwrap().value.re;
        let series = CoefficientSeries::generate(model, 6);
        let mut partial = 0.0;
        for n in 0..=2 {
            partial += series.coeffs[n].to_f64().unwrap() * 0.01f64.powi(n as i32);
        }
        let bound = complex_coefficient(3, 3).to_f64().unwrap().abs() * 0.01f64.powi(3);
        assert!((z - partial).abs() <= bound, "|{z} - {partial}| > {bound}");
    }

    #[test]
    fn rotated_matches_standard_in_overlap() {
        let model = ModelSpec::real(3).unwrap();
        let lam = LogSurfacePoint::real(0.1).unwrap();
        let a = standard_eval(model, &lam, 1e-11).unwrap();
        let b = rotated_eval(model, &lam, 1e-11).unwrap();
        assert!((a.value - b.value).norm() < 1e-8, "{} vs {}", a.value, b.value);
    }

    #[test]
    fn rotated_schwarz_reflection() {
        let model = ModelSpec::real(3).unwrap();
        let up = LogSurfacePoint::new(0.05, PI).unwrap();
        let down = LogSurfacePoint::new(0.05, -PI).unwrap();
        let zu = rotated_eval(model, &up, 1e-10).unwrap();
        let zd = rotated_eval(model, &down, 1e-10).unwrap();
        assert!(zu.value.norm().is_finite());
        assert!((zu.value.conj() - zd.value).norm() < 3.0 * (zu.abs_error + zd.abs_error) + 1e-12);
    }

    #[test]
    fn rotated_rejects_origin() {
        let model = ModelSpec::real(3).unwrap();
        assert!(matches!(
            rotated_eval(model, &LogSurfacePoint::real(0.0).unwrap(), 1e-10),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn if_matrix_matches_printed_m3() {
        let model = ModelSpec::real(3).unwrap();
        let alpha = c(0.7, 0.0);
        let beta = c(-0.3, 0.0);
        let m = build_if_matrix(model, 3, &PsiPoint::real(vec![alpha, beta])).unwrap().m;
        let i = c(0.0, 1.0);
        // (0, iα₁, iβ₁, i; iα₁ 0 0 0; 1 0 0 0; β₁ 0 0 0)
        let expected = [
            [c(0.0, 0.0), i * alpha, i * beta, i],
            [i * alpha, c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [beta, c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        ];
        for r in 0..4 {
            for col in 0..4 {
                assert!(
                    (m[(r, col)] - expected[r][col]).norm() < 1e-15,
                    "entry ({r},{col}): {} vs {}",
                    m[(r, col)],
                    expected[r][col]
                );
            }
        }
    }

    #[test]
    fn if_matrix_zero_fields() {
        let model = ModelSpec::real(3).unwrap();
        let m = build_if_matrix(model, 3, &PsiPoint::zero(model)).unwrap().m;
        let mut nonzero = Vec::new();
        for r in 0..4 {
            for col in 0..4 {
                if m[(r, col)].norm() > 0.0 {
                    nonzero.push((r, col, m[(r, col)]));
                }
            }
        }
        assert_eq!(nonzero.len(), 2);
        assert!((m[(0, 3)] - c(0.0, 1.0)).norm() < 1e-15);
        assert!((m[(2, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn if_matrix_matches_printed_m4_real() {
        let model = ModelSpec::real(4).unwrap();
        let sigma = c(0.5, 0.0);
        let a2 = c(-0.2, 0.0);
        let b2 = c(0.9, 0.0);
        let m = build_if_matrix(model, 4, &PsiPoint::real(vec![sigma, a2, b2])).unwrap().m;
        let i = c(0.0, 1.0);
        let expected = [
            [c(0.0, 0.0), i * sigma, i * a2, i * b2, i],
            [a2, c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [sigma, c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [b2, c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        ];
        for r in 0..5 {
            for col in 0..5 {
                assert!(
                    (m[(r, col)] - expected[r][col]).norm() < 1e-15,
                    "entry ({r},{col})"
                );
            }
        }
    }

    #[test]
    fn if_matrix_complex_k4_first_column() {
        let model = ModelSpec::complex(4).unwrap();
        let vals = vec![c(0.5, 0.1), c(-0.2, 0.3), c(0.9, -0.4)];
        let bars: Vec<Complex64> = vals.iter().map(|v| v.conj()).collect();
        let m = build_if_matrix(model, 4, &PsiPoint::complex(vals.clone(), bars.clone()))
            .unwrap()
            .m;
        // First column: (0, ᾱ₂, σ̄, 1, β̄₂)
        assert!((m[(1, 0)] - bars[1]).norm() < 1e-15);
        assert!((m[(2, 0)] - bars[0]).norm() < 1e-15);
        assert!((m[(3, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((m[(4, 0)] - bars[2]).norm() < 1e-15);
    }

    #[test]
    fn m_equals_ich_and_q_matches() {
        for model in [ModelSpec::real(5).unwrap(), ModelSpec::complex(3).unwrap()] {
            let n = model.k as usize - 1;
            let vals: Vec<Complex64> =
                (0..n).map(|j| c(0.3 + j as f64 * 0.2, -0.1 * j as f64)).collect();
            let bars: Vec<Complex64> =
                (0..n).map(|j| c(0.3 + j as f64 * 0.2, 0.4 * j as f64)).collect();
            let psi = match model.kind {
                ModelKind::Real => PsiPoint::real(vals.clone()),
                ModelKind::Complex => PsiPoint::complex(vals.clone(), bars.clone()),
            };
            let ifm = build_if_matrix(model, model.k, &psi).unwrap();
            let ich = ifm.c.mul(&ifm.h).scale(c(0.0, 1.0));
            for r in 0..ifm.m.n {
                for col in 0..ifm.m.n {
                    assert!((ifm.m[(r, col)] - ich[(r, col)]).norm() < 1e-15);
                }
            }
            let q_direct = rank2_invariant(&ifm.m);
            let q_fast = rank2_invariant_from_fields(
                model.k,
                &psi.values,
                psi.conjugate_values(),
            );
            assert!((q_direct - q_fast).norm() < 1e-13, "{q_direct} vs {q_fast}");
        }
    }

    #[test]
    fn integrand_two_determinant_routes_agree() {
        let model = ModelSpec::real(3).unwrap();
        let lam = LogSurfacePoint::real(0.08).unwrap();
        let psi = PsiPoint::real(vec![c(0.4, 0.02), c(-1.1, -0.01)]);
        let v = if_integrand(model, &lam, &psi).unwrap();

        let ifm = build_if_matrix(model, 3, &psi).unwrap();
        let g = lam.g(3);
        let a = CMatrix::identity(4).sub(&ifm.m.scale(g));
        let det = a.det();
        let direct = det.sqrt().inv();
        assert!((v - direct).norm() < 1e-12, "{v} vs {direct}");
    }

    #[test]
    fn integrand_detects_pole() {
        let model = ModelSpec::real(3).unwrap();
        // Q = -α² + 2iβ; with β = 0 and α = i/g the determinant
        // 1 - g²Q = 1 + g²α² vanishes exactly.
        let lam = LogSurfacePoint::real(0.1).unwrap();
        let g = lam.g(3);
        let alpha = g.inv() * c(0.0, 1.0);
        let psi = PsiPoint::real(vec![alpha, c(0.0, 0.0)]);
        assert!(matches!(
            if_integrand(model, &lam, &psi),
            Err(Error::SingularDeterminant(_))
        ));
    }

    #[test]
    fn integrand_is_one_when_rank2_part_vanishes() {
        let model = ModelSpec::real(3).unwrap();
        let lam = LogSurfacePoint::real(0.2).unwrap();
        // Q = -α² + 2iβ = 0 with β = α²/(2i) = -iα²/2... pick α = 0, β = 0:
        // then Q = 0 only if the constant φβ₂ entry contributes 0 — it
        // does not (Q = 2iβ₁ at α = 0), so use β₁ = 0 too.
        let psi = PsiPoint::real(vec![c(0.0, 0.0), c(0.0, 0.0)]);
        let v = if_integrand(model, &lam, &psi).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn if_eval_at_zero_and_small_lambda() {
        let model = ModelSpec::real(3).unwrap();
        let z0 = if_eval(model, &LogSurfacePoint::real(0.0).unwrap(), 0.2, 1e-6).unwrap();
        assert_eq!(z0.value, c(1.0, 0.0));

        let lam = LogSurfacePoint::real(0.05).unwrap();
        let z_if = if_eval(model, &lam, 0.25, 2e-6).unwrap();
        let z_std = standard_eval(model, &lam, 1e-11).unwrap();
        let rel = (z_if.value - z_std.value).norm() / z_std.value.norm();
        assert!(rel < 1e-5, "relative deviation {rel}, IF {} std {}", z_if.value, z_std.value);
        assert!(z_if.value.im.abs() <= z_if.abs_error + 1e-9);
    }

    #[test]
    fn det_is_quadratic_in_g() {
        // Evaluating det(1 - gM) at three g values determines it; a fourth
        // evaluation must match the fitted quadratic.
        let model = ModelSpec::real(4).unwrap();
        let psi = PsiPoint::real(vec![c(0.6, 0.1), c(-0.4, 0.2), c(0.8, -0.3)]);
        let ifm = build_if_matrix(model, 4, &psi).unwrap();
        let det_at = |g: Complex64| {
            CMatrix::identity(5).sub(&ifm.m.scale(g)).det()
        };
        let g1 = c(0.3, 0.0);
        let g2 = c(0.0, 0.4);
        let g3 = c(0.2, -0.1);
        // det(g) = 1 - g²Q: fit Q from one point, check others.
        let q1 = (c(1.0, 0.0) - det_at(g1)) / (g1 * g1);
        for g in [g2, g3, c(0.15, 0.25)] {
            let expect = c(1.0, 0.0) - g * g * q1;
            assert!((det_at(g) - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn series_coefficients_from_evaluator() {
        // Vandermonde extraction of the first Taylor coefficients from
        // standard_eval must match the exact series.
        let model = ModelSpec::real(2).unwrap();
        let points: Vec<f64> = (1..=6).map(|i| 0.002 * i as f64).collect();
        let series = CoefficientSeries::generate(model, 6);
        let mut a = vec![vec![0.0; 6]; 6];
        let mut b = vec![0.0; 6];
        for (i, &x) in points.iter().enumerate() {
            for (j, aij) in a[i].iter_mut().enumerate() {
                *aij = x.powi(j as i32);
            }
            b[i] = standard_eval(model, &LogSurfacePoint::real(x).unwrap(), 1e-13)
                .unwrap()
                .value
                .re;
        }
        // Solve the small real system by Gaussian elimination.
        for col in 0..6 {
            let piv = (col..6).max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap()).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for r in col + 1..6 {
                let f = a[r][col] / a[col][col];
                for cc in col..6 {
                    a[r][cc] -= f * a[col][cc];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; 6];
        for r in (0..6).rev() {
            let mut acc = b[r];
            for cc in r + 1..6 {
                acc -= a[r][cc] * x[cc];
            }
            x[r] = acc / a[r][r];
        }
        for n in 0..=3 {
            let exact = series.coeffs[n].to_f64().unwrap();
            let rel = (x[n] - exact).abs() / exact.abs().max(1.0);
            assert!(rel < 1e-4, "order {n}: fitted {} vs exact {exact}", x[n]);
        }
    }
}
