//! Borel-Leroy machinery: exact transform, Padé continuation, the
//! inverse integral, and Taylor-remainder diagnostics establishing the
//! `(k-1)!`-type growth pattern.
//!
//! Exact rational arithmetic carries everything up to the final
//! evaluation: the transform divides out `(kn)!` exactly, and the Padé
//! linear system is solved over the rationals, so coefficient growth
//! never touches floating point until a value is requested.

use num::complex::Complex64;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_series::CoefficientSeries;
use crate::linalg::poly_roots;
use crate::representations::standard_eval;
use crate::types::{LogSurfacePoint, ModelSpec, QuadratureEstimate};

/// `Σ_{n<N} a_n λ^n`. The products `a_n·r^n` are computed exactly and
/// rounded once per term; for positive real λ the whole sum is exact
/// rational arithmetic rounded at the end.
pub fn taylor_partial_sum(
    series: &CoefficientSeries,
    lambda: &LogSurfacePoint,
    n_terms: usize,
) -> Result<Complex64> {
    if n_terms > series.order() {
        return Err(Error::Usage(format!(
            "partial sum needs {n_terms} coefficients, series holds {}",
            series.order()
        )));
    }
    let r = BigRational::from_float(lambda.modulus)
        .ok_or_else(|| Error::Usage("non-finite modulus".into()))?;
    if lambda.argument == 0.0 {
        let mut acc = BigRational::zero();
        let mut rp = BigRational::one();
        for a in series.coeffs.iter().take(n_terms) {
            acc += a * &rp;
            rp *= &r;
        }
        return Ok(Complex64::new(
            acc.to_f64().ok_or_else(|| Error::Usage("partial sum overflows f64".into()))?,
            0.0,
        ));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    let mut rp = BigRational::one();
    for (n, a) in series.coeffs.iter().take(n_terms).enumerate() {
        let magnitude = (a * &rp)
            .to_f64()
            .ok_or_else(|| Error::Usage("partial-sum term overflows f64".into()))?;
        let term = Complex64::from_polar(magnitude.abs(), n as f64 * lambda.argument)
            * magnitude.signum();
        // Kahan update.
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        rp *= &r;
    }
    Ok(sum)
}

/// Taylor remainder `R^N Z(λ) = Z(λ) - Σ_{n<N} a_n λ^n`, evaluated
/// through the standard representation.
pub fn taylor_remainder(
    model: ModelSpec,
    lambda: &LogSurfacePoint,
    n: usize,
    tolerance: f64,
) -> Result<Complex64> {
    let z = standard_eval(model, lambda, tolerance)?;
    let series = CoefficientSeries::generate(model, n);
    let partial = taylor_partial_sum(&series, lambda, n)?;
    Ok(z.value - partial)
}

/// Result of the remainder-growth fit `log|R^N| - N log|λ| ≈
/// log A + N log B + s·N log N`; `order_estimate = s` targets `k - 1`.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    pub a: f64,
    pub b: f64,
    pub order_estimate: f64,
    pub points_used: usize,
}

/// Least-squares fit of the remainder growth over `N = 1..=n_max`.
pub fn remainder_growth_fit(
    model: ModelSpec,
    lambda: &LogSurfacePoint,
    n_max: usize,
) -> Result<GrowthFit> {
    if n_max < 6 {
        return Err(Error::InsufficientData(format!(
            "growth fit needs N_max >= 6, got {n_max}"
        )));
    }
    if lambda.is_origin() {
        return Err(Error::Domain("growth fit is undefined at λ = 0".into()));
    }
    let z = standard_eval(model, lambda, 1e-12)?;
    let series = CoefficientSeries::generate(model, n_max);
    let log_r = lambda.modulus.ln();

    let mut rows: Vec<[f64; 3]> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for n in 1..=n_max {
        let remainder = z.value - taylor_partial_sum(&series, lambda, n)?;
        let mag = remainder.norm();
        if mag <= 1e-14 {
            continue;
        }
        let nf = n as f64;
        rows.push([1.0, nf, nf * nf.ln()]);
        ys.push(mag.ln() - nf * log_r);
    }
    if rows.len() < 4 {
        return Err(Error::InsufficientData(
            "too few nonzero remainders for the growth fit".into(),
        ));
    }

    // Normal equations for the 3-parameter least squares.
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for (row, &y) in rows.iter().zip(&ys) {
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            aty[i] += row[i] * y;
        }
    }
    let x = solve3(ata, aty).ok_or_else(|| {
        Error::InsufficientData("degenerate design matrix in remainder fit".into())
    })?;
    Ok(GrowthFit { a: x[0].exp(), b: x[1].exp(), order_estimate: x[2], points_used: rows.len() })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for r in (0..3).rev() {
        let mut acc = b[r];
        for c in r + 1..3 {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Some(x)
}

/// Rational Padé approximant `N(u)/D(u)` with `D(0) = 1`, solved exactly
/// from exact-rational Taylor coefficients.
#[derive(Debug, Clone)]
pub struct PadeApproximant {
    pub numerator: Vec<BigRational>,
    pub denominator: Vec<BigRational>,
    num_f: Vec<f64>,
    den_f: Vec<f64>,
}

impl PadeApproximant {
    pub fn degrees(&self) -> (usize, usize) {
        (self.numerator.len() - 1, self.denominator.len() - 1)
    }

    pub fn eval(&self, u: Complex64) -> Complex64 {
        horner(&self.num_f, u) / horner(&self.den_f, u)
    }

    /// Roots of the denominator.
    pub fn poles(&self) -> Vec<Complex64> {
        let coeffs: Vec<Complex64> =
            self.den_f.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        poly_roots(&coeffs)
    }

    /// Exact Taylor expansion of `N/D`; must reproduce the source
    /// coefficients through order `m + n`.
    pub fn taylor(&self, count: usize) -> Vec<BigRational> {
        let mut out: Vec<BigRational> = Vec::with_capacity(count);
        for l in 0..count {
            let mut acc = self
                .numerator
                .get(l)
                .cloned()
                .unwrap_or_else(BigRational::zero);
            for j in 1..=l.min(self.denominator.len() - 1) {
                let prev: BigRational = out[l - j].clone();
                acc -= &self.denominator[j] * prev;
            }
            out.push(acc);
        }
        out
    }
}

fn horner(coeffs: &[f64], u: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * u + c;
    }
    acc
}

/// Builds the `[m/n]` Padé approximant of the series `coeffs`
/// (ascending powers; at least `m + n + 1` entries).
pub fn pade(coeffs: &[BigRational], m: usize, n: usize) -> Result<PadeApproximant> {
    if coeffs.len() < m + n + 1 {
        return Err(Error::Usage(format!(
            "[{m}/{n}] Padé needs {} coefficients, got {}",
            m + n + 1,
            coeffs.len()
        )));
    }
    if coeffs.iter().all(Zero::is_zero) {
        let zero = vec![BigRational::zero()];
        let one = vec![BigRational::one()];
        return Ok(PadeApproximant {
            num_f: vec![0.0],
            den_f: vec![1.0],
            numerator: zero,
            denominator: one,
        });
    }
    let c = |i: isize| -> BigRational {
        if i < 0 {
            BigRational::zero()
        } else {
            coeffs[i as usize].clone()
        }
    };

    // Denominator system: Σ_{j=1..n} b_j c_{m+i-j} = -c_{m+i}, i = 1..n.
    let mut b = vec![BigRational::one()];
    if n > 0 {
        let mut a: Vec<Vec<BigRational>> = (1..=n)
            .map(|i| (1..=n).map(|j| c((m + i) as isize - j as isize)).collect())
            .collect();
        let mut rhs: Vec<BigRational> = (1..=n).map(|i| -c((m + i) as isize)).collect();
        // Exact Gaussian elimination with column pivoting.
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&p, &q| a[p][col].abs().cmp(&a[q][col].abs()))
                .unwrap();
            if a[piv][col].is_zero() {
                return Err(Error::SingularSystem(format!(
                    "degenerate [{m}/{n}] Padé table entry"
                )));
            }
            a.swap(col, piv);
            rhs.swap(col, piv);
            for r in col + 1..n {
                if a[r][col].is_zero() {
                    continue;
                }
                let f = &a[r][col] / &a[col][col];
                for cc in col..n {
                    let sub = &f * &a[col][cc];
                    a[r][cc] -= sub;
                }
                let sub = &f * &rhs[col];
                rhs[r] -= sub;
            }
        }
        let mut x = vec![BigRational::zero(); n];
        for r in (0..n).rev() {
            let mut acc = rhs[r].clone();
            for cc in r + 1..n {
                acc -= &a[r][cc] * &x[cc];
            }
            x[r] = acc / &a[r][r];
        }
        b.extend(x);
    }

    // Numerator from the convolution through order m.
    let numerator: Vec<BigRational> = (0..=m)
        .map(|i| {
            (0..=i.min(n))
                .map(|j| &b[j] * c(i as isize - j as isize))
                .fold(BigRational::zero(), |acc, v| acc + v)
        })
        .collect();

    let num_f = numerator
        .iter()
        .map(|v| v.to_f64().ok_or_else(|| Error::Usage("Padé coefficient overflows f64".into())))
        .collect::<Result<Vec<_>>>()?;
    let den_f = b
        .iter()
        .map(|v| v.to_f64().ok_or_else(|| Error::Usage("Padé coefficient overflows f64".into())))
        .collect::<Result<Vec<_>>>()?;
    Ok(PadeApproximant { numerator, denominator: b, num_f, den_f })
}

/// Padé poles that would invalidate the inverse-transform contour or the
/// continuation strip `{Re u > 0, |Im u| < R}`.
pub fn poles_in_strip(poles: &[Complex64], strip_height: f64) -> Vec<Complex64> {
    poles
        .iter()
        .copied()
        .filter(|p| p.re > 0.0 && p.im.abs() < strip_height)
        .collect()
}

/// The inverse Borel-Leroy integral of the given order:
/// `f(λ) = (1/kλ) ∫_0^∞ B(u) e^{-(u/λ)^{1/k}} (u/λ)^{1/k-1} du`,
/// evaluated after the substitution `t = (u/λ)^{1/k}` as
/// `∫_0^∞ B(λ t^k) e^{-t} dt`, which removes the endpoint singularity.
pub fn borel_inverse(
    order: u32,
    b: &PadeApproximant,
    lambda: &LogSurfacePoint,
    tolerance: f64,
) -> Result<QuadratureEstimate> {
    if order < 1 {
        return Err(Error::Usage("inverse order must be >= 1".into()));
    }
    if !(tolerance > 0.0) {
        return Err(Error::Usage("tolerance must be positive".into()));
    }
    if lambda.is_origin() {
        return Err(Error::Domain("inverse integral is undefined at λ = 0".into()));
    }
    let t_max = (50.0 / tolerance).ln().max(10.0) + 5.0;
    let lam = lambda.to_complex();

    // The path {λ t^k} must stay clear of the denominator roots.
    let reach = lambda.modulus * t_max.powi(order as i32);
    for pole in b.poles() {
        let w = pole / lam;
        let arg = w.im.atan2(w.re);
        if w.norm() < 1.5 * reach && arg.abs() < 0.05 {
            return Err(Error::PoleOnContour(format!(
                "Padé pole at u = {pole} sits on the inverse-transform path"
            )));
        }
    }

    let ki = order as i32;
    let f = move |t: f64| b.eval(lam * t.powi(ki)) * (-t).exp();
    let mut est = crate::quadrature::refine_integral(&f, 0.0, t_max, 64, tolerance, 20_000_000);
    est.truncation = Some(t_max);
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_series::g_series_coefficient;

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn partial_sum_basics() {
        let model = ModelSpec::complex(3).unwrap();
        let series = CoefficientSeries::generate(model, 5);
        let lam = LogSurfacePoint::real(0.1).unwrap();
        // N = 0 -> empty sum, N = 1 -> a_0, N = 3 -> 1 - 0.6 + 3.6
        assert_eq!(taylor_partial_sum(&series, &lam, 0).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(taylor_partial_sum(&series, &lam, 1).unwrap(), Complex64::new(1.0, 0.0));
        let s3 = taylor_partial_sum(&series, &lam, 3).unwrap();
        assert!((s3.re - 4.0).abs() < 1e-12, "{s3}");
    }

    #[test]
    fn partial_sum_complex_argument() {
        let model = ModelSpec::real(2).unwrap();
        let series = CoefficientSeries::generate(model, 4);
        let lam = LogSurfacePoint::new(0.05, 0.7).unwrap();
        let direct: Complex64 = (0..4)
            .map(|n| {
                let c = series.coeffs[n].to_f64().unwrap();
                lam.to_complex().powu(n as u32) * c
            })
            .sum();
        let s = taylor_partial_sum(&series, &lam, 4).unwrap();
        assert!((s - direct).norm() < 1e-13);
    }

    #[test]
    fn remainder_of_order_zero_is_z() {
        let model = ModelSpec::real(2).unwrap();
        let lam = LogSurfacePoint::real(0.1).unwrap();
        let r0 = taylor_remainder(model, &lam, 0, 1e-12).unwrap();
        let z = standard_eval(model, &lam, 1e-12).unwrap().value;
        assert!((r0 - z).norm() < 1e-14);
    }

    #[test]
    fn first_remainder_is_negative_real() {
        // alternating series: first omitted term -3λ/2 dominates
        let model = ModelSpec::real(2).unwrap();
        let lam = LogSurfacePoint::real(0.1).unwrap();
        let r1 = taylor_remainder(model, &lam, 1, 1e-12).unwrap();
        assert!(r1.re < 0.0 && r1.im.abs() < 1e-12);
        assert!(r1.re > -0.15 && r1.re < -0.05, "{r1}");
    }

    #[test]
    fn remainder_grows_once_terms_diverge() {
        let model = ModelSpec::complex(3).unwrap();
        let lam = LogSurfacePoint::real(0.2).unwrap();
        let r5 = taylor_remainder(model, &lam, 5, 1e-10).unwrap().norm();
        let r8 = taylor_remainder(model, &lam, 8, 1e-10).unwrap().norm();
        assert!(r8 > 10.0 * r5, "divergent-series signature missing: {r5} vs {r8}");
    }

    #[test]
    fn growth_fit_orders() {
        let lam = LogSurfacePoint::real(0.05).unwrap();
        let fit2 = remainder_growth_fit(ModelSpec::real(2).unwrap(), &lam, 10).unwrap();
        assert!(
            (fit2.order_estimate - 1.0).abs() < 0.4,
            "k=2 order estimate {}",
            fit2.order_estimate
        );
        let fit3 = remainder_growth_fit(ModelSpec::complex(3).unwrap(), &lam, 10).unwrap();
        assert!(
            (fit3.order_estimate - 2.0).abs() < 0.4,
            "k=3 order estimate {}",
            fit3.order_estimate
        );
    }

    #[test]
    fn growth_fit_stability_under_lambda_halving() {
        let model = ModelSpec::complex(3).unwrap();
        let a = remainder_growth_fit(model, &LogSurfacePoint::real(0.05).unwrap(), 10).unwrap();
        let b = remainder_growth_fit(model, &LogSurfacePoint::real(0.025).unwrap(), 10).unwrap();
        assert!((a.order_estimate - b.order_estimate).abs() < 0.2 + 0.2);
    }

    #[test]
    fn growth_fit_needs_data() {
        let lam = LogSurfacePoint::real(0.05).unwrap();
        assert!(matches!(
            remainder_growth_fit(ModelSpec::real(2).unwrap(), &lam, 2),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn pade_geometric_series() {
        let coeffs: Vec<BigRational> = (0..4).map(|_| BigRational::one()).collect();
        let p = pade(&coeffs, 0, 1).unwrap();
        assert_eq!(p.numerator, vec![BigRational::one()]);
        assert_eq!(p.denominator, vec![BigRational::one(), -BigRational::one()]);
        let u = Complex64::new(0.3, 0.1);
        let expect = (Complex64::new(1.0, 0.0) - u).inv();
        assert!((p.eval(u) - expect).norm() < 1e-14);
    }

    #[test]
    fn pade_zero_series() {
        let coeffs: Vec<BigRational> = vec![BigRational::zero(); 8];
        let p = pade(&coeffs, 3, 3).unwrap();
        assert!(p.numerator.iter().all(Zero::is_zero));
        assert_eq!(p.eval(Complex64::new(0.7, 0.0)), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn pade_reproduces_taylor_exactly() {
        let model = ModelSpec::complex(3).unwrap();
        let b = CoefficientSeries::generate(model, 17).borel_leroy(2).unwrap();
        let p = pade(&b.coeffs, 8, 8).unwrap();
        let taylor = p.taylor(17);
        for (i, (got, want)) in taylor.iter().zip(&b.coeffs).enumerate() {
            assert_eq!(got, want, "order {i}");
        }
    }

    #[test]
    fn pade_poles_of_transformed_series_stay_left() {
        let model = ModelSpec::complex(3).unwrap();
        let b = CoefficientSeries::generate(model, 17).borel_leroy(2).unwrap();
        let p = pade(&b.coeffs, 8, 8).unwrap();
        let bad = poles_in_strip(&p.poles(), 0.05);
        assert!(bad.is_empty(), "poles in the continuation strip: {bad:?}");
        // the true singularity sits at u = -4/27; the nearest pole should
        // land on the negative axis close to it
        let nearest = p
            .poles()
            .into_iter()
            .min_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
            .unwrap();
        assert!(nearest.re < 0.0 && nearest.im.abs() < 1e-8);
        assert!((nearest.re + 4.0 / 27.0).abs() < 0.02, "nearest pole {nearest}");
    }

    #[test]
    fn borel_identity_order_one_constant() {
        let coeffs = vec![BigRational::one(), BigRational::zero(), BigRational::zero()];
        let p = pade(&coeffs, 1, 1).unwrap_or_else(|_| pade(&coeffs, 2, 0).unwrap());
        let lam = LogSurfacePoint::real(0.3).unwrap();
        let est = borel_inverse(1, &p, &lam, 1e-10).unwrap();
        assert!((est.value.re - 1.0).abs() < 1e-9, "{}", est.value);
    }

    #[test]
    fn borel_substitution_consistency() {
        // order-1 resummation of a geometric series reproduces 1/(1-cλ)
        let c = ratio(1, 4);
        let coeffs: Vec<BigRational> = (0..13u32)
            .map(|n| {
                let mut v = BigRational::one();
                for _ in 0..n {
                    v *= &c;
                }
                v / BigRational::from_integer(crate::exact_series::factorial(n.into()))
            })
            .collect();
        let p = pade(&coeffs, 6, 6).unwrap();
        let lam = LogSurfacePoint::real(0.9).unwrap();
        let est = borel_inverse(1, &p, &lam, 1e-10).unwrap();
        let expect = 1.0 / (1.0 - 0.25 * 0.9);
        assert!((est.value.re - expect).abs() < 1e-10, "{} vs {expect}", est.value.re);

        // order-2 route through the re-indexed series in g = √λ agrees
        let coeffs2: Vec<BigRational> = (0..13u32)
            .map(|n| {
                let mut v = BigRational::one();
                for _ in 0..n {
                    v *= &c;
                }
                v / BigRational::from_integer(crate::exact_series::factorial(2 * u64::from(n)))
            })
            .collect();
        let p2 = pade(&coeffs2, 6, 6).unwrap();
        let est2 = borel_inverse(2, &p2, &lam, 1e-10).unwrap();
        assert!(
            (est2.value.re - expect).abs() < 1e-8,
            "order-2 route: {} vs {expect}",
            est2.value.re
        );
    }

    #[test]
    fn borel_roundtrip_complex_k3() {
        let model = ModelSpec::complex(3).unwrap();
        let b = CoefficientSeries::generate(model, 17).borel_leroy(2).unwrap();
        let p = pade(&b.coeffs, 8, 8).unwrap();
        for lam_val in [0.005, 0.01, 0.02] {
            let lam = LogSurfacePoint::real(lam_val).unwrap();
            let est = borel_inverse(2, &p, &lam, 1e-8).unwrap();
            let z = standard_eval(model, &lam, 1e-12).unwrap();
            let rel = (est.value - z.value).norm() / z.value.norm();
            assert!(rel < 1e-4, "λ = {lam_val}: rel {rel}");
        }
    }

    #[test]
    fn borel_roundtrip_off_axis() {
        let model = ModelSpec::complex(3).unwrap();
        let b = CoefficientSeries::generate(model, 17).borel_leroy(2).unwrap();
        let p = pade(&b.coeffs, 8, 8).unwrap();
        let lam = LogSurfacePoint::new(0.02, std::f64::consts::PI / 4.0).unwrap();
        let est = borel_inverse(2, &p, &lam, 1e-8).unwrap();
        let z = crate::representations::rotated_eval(model, &lam, 1e-11).unwrap();
        let rel = (est.value - z.value).norm() / z.value.norm();
        assert!(rel < 1e-3, "rel {rel}");
    }

    #[test]
    fn borel_transform_ratio_approaches_27_over_4() {
        // |b_{p+1}/b_p| -> 27/4, monotone from below, within 2% by p = 30.
        let mut prev_ratio = 0.0f64;
        for p in 0..=30u64 {
            let r = g_series_coefficient(p + 1).to_f64().unwrap().abs()
                / g_series_coefficient(p).to_f64().unwrap().abs();
            assert!(r > prev_ratio, "ratio not monotone at p = {p}");
            prev_ratio = r;
        }
        assert!((prev_ratio - 6.75).abs() / 6.75 < 0.02, "ratio {prev_ratio}");
    }
}
