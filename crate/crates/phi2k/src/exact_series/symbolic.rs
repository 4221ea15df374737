//! Perturbative expansion of the intermediate-field integrand in exact
//! arithmetic.
//!
//! The integrand `exp[-c·Tr ln(1 - g M(Ψ))]` (`c = 1/2` real model, `1`
//! complex model) is expanded as a formal power series in `g` whose
//! coefficients are polynomials in the remaining fields, then integrated
//! term by term with [`x_measure_moment`]. The coefficient of
//! `g^{2kn} = λ^n` must reproduce the standard-representation Taylor
//! coefficients.

use std::collections::BTreeMap;

use num::rational::BigRational;
use num::One;

use super::wick::{x_measure_moment, CovarianceTable, FieldLabel, GaussRat};
use crate::error::{Error, Result};
use crate::types::{ModelKind, ModelSpec};

/// Default refusal threshold for `n` (pairing cost grows factorially).
pub const DEFAULT_IF_ORDER_CAP: u64 = 4;

/// Hard cap on the `g`-expansion degree `2kn`; beyond this the symbolic
/// matrix powers and pairing sums stop being desk-scale.
const MAX_G_DEGREE: u64 = 24;

/// Polynomial in field labels with exact complex-rational coefficients.
/// Keys are sorted monomials.
#[derive(Debug, Clone, PartialEq)]
struct Poly {
    terms: BTreeMap<Vec<FieldLabel>, GaussRat>,
}

impl Poly {
    fn zero() -> Self {
        Poly { terms: BTreeMap::new() }
    }

    fn constant(c: GaussRat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Vec::new(), c);
        }
        Poly { terms }
    }

    fn field(l: FieldLabel) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![l], GaussRat::one());
        Poly { terms }
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_assign(&mut self, other: &Poly) {
        for (m, c) in &other.terms {
            let entry = self.terms.entry(m.clone()).or_insert_with(GaussRat::zero);
            *entry += c.clone();
            if entry.is_zero() {
                self.terms.remove(m);
            }
        }
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out: BTreeMap<Vec<FieldLabel>, GaussRat> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mut m = Vec::with_capacity(ma.len() + mb.len());
                m.extend_from_slice(ma);
                m.extend_from_slice(mb);
                m.sort_unstable();
                *out.entry(m).or_insert_with(GaussRat::zero) += ca * cb;
            }
        }
        out.retain(|_, c| !c.is_zero());
        Poly { terms: out }
    }

    fn scale(&self, s: &GaussRat) -> Poly {
        if s.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect() }
    }

    /// Integrates against the measure: Σ coeff · ⟨monomial⟩.
    fn expectation(&self, table: &CovarianceTable) -> GaussRat {
        let mut total = GaussRat::zero();
        for (m, c) in &self.terms {
            let moment = x_measure_moment(m, table);
            if !moment.is_zero() {
                total += c * &moment;
            }
        }
        total
    }
}

type PolyMatrix = Vec<Vec<Poly>>;

/// Remaining-field labels in the `Ψ` ordering: `(α_1, β_1, α_3, β_3, …)`
/// for odd `k`, `(σ, α_2, β_2, …, α_{k-2}, β_{k-2})` for even `k`.
pub(crate) fn psi_labels(k: u32) -> Vec<FieldLabel> {
    let k = k as u8;
    let mut labels = Vec::with_capacity(k as usize - 1);
    if k % 2 == 1 {
        for j in (1..=k - 2).step_by(2) {
            labels.push(FieldLabel::alpha(j));
            labels.push(FieldLabel::beta(j));
        }
    } else {
        labels.push(FieldLabel::sigma());
        for j in (2..=k.saturating_sub(2)).step_by(2) {
            labels.push(FieldLabel::alpha(j));
            labels.push(FieldLabel::beta(j));
        }
    }
    debug_assert_eq!(labels.len(), k as usize - 1);
    labels
}

/// Symbolic `M = iC·H` for the given model, over the remaining fields.
fn symbolic_m(model: ModelSpec) -> PolyMatrix {
    let k = model.k as usize;
    let n = k + 1;
    let labels = psi_labels(model.k);

    // First row of H: (0, Ψ_1, …, Ψ_{k-1}, 1); first column mirrors it
    // (with formal conjugates in the complex model).
    let mut h: PolyMatrix = vec![vec![Poly::zero(); n]; n];
    for (j, &l) in labels.iter().enumerate() {
        h[0][j + 1] = Poly::field(l);
        let lc = if model.kind == ModelKind::Complex { l.conj() } else { l };
        h[j + 1][0] = Poly::field(lc);
    }
    h[0][k] = Poly::constant(GaussRat::one());
    h[k][0] = Poly::constant(GaussRat::one());

    // Covariance of the integrated Φ variables: identity on plain
    // variables, antidiagonal -i blocks on crossed pairs.
    let mut c: Vec<Vec<GaussRat>> = vec![vec![GaussRat::zero(); n]; n];
    let plain = if model.k % 2 == 1 { 2 } else { 1 };
    for (i, row) in c.iter_mut().enumerate().take(plain) {
        row[i] = GaussRat::one();
    }
    let mut i = plain;
    while i + 1 < n {
        c[i][i + 1] = GaussRat::minus_i();
        c[i + 1][i] = GaussRat::minus_i();
        i += 2;
    }

    // M = i C H
    let i_unit = GaussRat::i();
    let mut m: PolyMatrix = vec![vec![Poly::zero(); n]; n];
    for r in 0..n {
        for col in 0..n {
            let mut acc = Poly::zero();
            for l in 0..n {
                if c[r][l].is_zero() || h[l][col].is_zero() {
                    continue;
                }
                acc.add_assign(&h[l][col].scale(&(&i_unit * &c[r][l])));
            }
            m[r][col] = acc;
        }
    }
    m
}

fn mat_mul(a: &PolyMatrix, b: &PolyMatrix) -> PolyMatrix {
    let n = a.len();
    let mut out: PolyMatrix = vec![vec![Poly::zero(); n]; n];
    for r in 0..n {
        for col in 0..n {
            let mut acc = Poly::zero();
            for l in 0..n {
                if a[r][l].is_zero() || b[l][col].is_zero() {
                    continue;
                }
                acc.add_assign(&a[r][l].mul(&b[l][col]));
            }
            out[r][col] = acc;
        }
    }
    out
}

fn trace(m: &PolyMatrix) -> Poly {
    let mut t = Poly::zero();
    for (i, row) in m.iter().enumerate() {
        t.add_assign(&row[i]);
    }
    t
}

/// Taylor coefficient of `λ^n` extracted from the intermediate-field
/// integrand by expanding the log-determinant in `g` and applying the
/// crossed-measure Wick rules. Must equal `real_coefficient` /
/// `complex_coefficient` at the same `(k, n)`.
pub fn if_perturbative_coefficient(model: ModelSpec, n: u64) -> Result<BigRational> {
    if_perturbative_coefficient_with_cap(model, n, DEFAULT_IF_ORDER_CAP)
}

/// Same as [`if_perturbative_coefficient`] with an explicit order cap.
pub fn if_perturbative_coefficient_with_cap(
    model: ModelSpec,
    n: u64,
    cap: u64,
) -> Result<BigRational> {
    if n > cap {
        return Err(Error::OrderCap(format!("order n = {n} exceeds the cap {cap}")));
    }
    let degree = 2 * u64::from(model.k) * n;
    if degree > MAX_G_DEGREE {
        return Err(Error::OrderCap(format!(
            "g-expansion degree 2kn = {degree} exceeds the hard cap {MAX_G_DEGREE}"
        )));
    }
    if n == 0 {
        return Ok(BigRational::one());
    }
    let degree = degree as usize;

    // Exponent of the integrand as a series in g:
    // -c Tr ln(1 - gM) = c Σ_{m>=1} g^m Tr(M^m)/m.
    let c = match model.kind {
        ModelKind::Real => GaussRat::from_rational(BigRational::new(1.into(), 2.into())),
        ModelKind::Complex => GaussRat::one(),
    };
    let m = symbolic_m(model);
    let mut action: Vec<Poly> = Vec::with_capacity(degree + 1);
    action.push(Poly::zero()); // no g^0 term
    let mut power = m.clone();
    for deg in 1..=degree {
        if deg > 1 {
            power = mat_mul(&power, &m);
        }
        let tau = trace(&power);
        let coeff = c.scale(&BigRational::new(1.into(), deg.into()));
        action.push(tau.scale(&coeff));
    }

    // exp of the series via the standard derivative recurrence.
    let mut exp: Vec<Poly> = Vec::with_capacity(degree + 1);
    exp.push(Poly::constant(GaussRat::one()));
    for deg in 1..=degree {
        let mut acc = Poly::zero();
        for j in 1..=deg {
            if action[j].is_zero() || exp[deg - j].is_zero() {
                continue;
            }
            let term = action[j].mul(&exp[deg - j]);
            acc.add_assign(&term.scale(&GaussRat::from_rational(BigRational::new(
                (j as i64).into(),
                (deg as i64).into(),
            ))));
        }
        exp.push(acc);
    }

    let table = CovarianceTable::psi_measure(model);
    let value = exp[degree].expectation(&table);
    if !value.is_real() {
        return Err(Error::Usage(format!(
            "intermediate-field coefficient came out non-real: {value}"
        )));
    }
    Ok(value.re)
}

/// Expectations of all intermediate `g`-orders that do not correspond to
/// a power of `λ`; these must vanish. Exposed for tests.
#[cfg(test)]
fn off_order_expectations(model: ModelSpec, up_to_degree: usize) -> Vec<GaussRat> {
    let c = match model.kind {
        ModelKind::Real => GaussRat::from_rational(BigRational::new(1.into(), 2.into())),
        ModelKind::Complex => GaussRat::one(),
    };
    let m = symbolic_m(model);
    let mut action: Vec<Poly> = vec![Poly::zero()];
    let mut power = m.clone();
    for deg in 1..=up_to_degree {
        if deg > 1 {
            power = mat_mul(&power, &m);
        }
        let tau = trace(&power);
        action.push(tau.scale(&c.scale(&BigRational::new(1.into(), deg.into()))));
    }
    let mut exp: Vec<Poly> = vec![Poly::constant(GaussRat::one())];
    for deg in 1..=up_to_degree {
        let mut acc = Poly::zero();
        for j in 1..=deg {
            let term = action[j].mul(&exp[deg - j]);
            acc.add_assign(&term.scale(&GaussRat::from_rational(BigRational::new(
                (j as i64).into(),
                (deg as i64).into(),
            ))));
        }
        exp.push(acc);
    }
    let table = CovarianceTable::psi_measure(model);
    let period = 2 * model.k as usize;
    (1..=up_to_degree)
        .filter(|d| d % period != 0)
        .map(|d| exp[d].expectation(&table))
        .collect()
}
