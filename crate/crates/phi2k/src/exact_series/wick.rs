//! Gaussian moments of the crossed intermediate-field measures, computed
//! by exact Wick pairing.
//!
//! The crossed measure couples each `α_j` only to its partner `β_j`
//! (`⟨α_j β_j⟩ = -i`, vanishing self-covariances), so covariance values
//! live in the Gaussian rationals. Moments are evaluated by a pairing
//! recursion memoized on the remaining multiset, which keeps the cost
//! polynomial instead of the naive `(deg-1)!!`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg};

use num::rational::BigRational;
use num::{One, Zero};

use crate::types::{ModelKind, ModelSpec};

/// An exact complex rational `re + i·im`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GaussRat {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRat {
    pub fn zero() -> Self {
        GaussRat { re: BigRational::zero(), im: BigRational::zero() }
    }

    pub fn one() -> Self {
        GaussRat { re: BigRational::one(), im: BigRational::zero() }
    }

    pub fn i() -> Self {
        GaussRat { re: BigRational::zero(), im: BigRational::one() }
    }

    pub fn minus_i() -> Self {
        GaussRat { re: BigRational::zero(), im: -BigRational::one() }
    }

    pub fn from_rational(re: BigRational) -> Self {
        GaussRat { re, im: BigRational::zero() }
    }

    pub fn from_int(n: i64) -> Self {
        GaussRat::from_rational(BigRational::from_integer(n.into()))
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        GaussRat { re: &self.re * s, im: &self.im * s }
    }
}

impl Add for GaussRat {
    type Output = GaussRat;
    fn add(self, rhs: GaussRat) -> GaussRat {
        GaussRat { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

impl AddAssign for GaussRat {
    fn add_assign(&mut self, rhs: GaussRat) {
        self.re += rhs.re;
        self.im += rhs.im;
    }
}

impl Neg for GaussRat {
    type Output = GaussRat;
    fn neg(self) -> GaussRat {
        GaussRat { re: -self.re, im: -self.im }
    }
}

impl Mul for GaussRat {
    type Output = GaussRat;
    fn mul(self, rhs: GaussRat) -> GaussRat {
        &self * &rhs
    }
}

impl Mul for &GaussRat {
    type Output = GaussRat;
    fn mul(self, rhs: &GaussRat) -> GaussRat {
        GaussRat {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

impl fmt::Display for GaussRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}i", self.re, self.im)
    }
}

/// One intermediate-field factor: `σ`, `α_j` or `β_j`, optionally the
/// formal conjugate (complex model only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldLabel {
    pub base: FieldBase,
    pub conjugated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldBase {
    Sigma,
    Alpha(u8),
    Beta(u8),
}

impl FieldLabel {
    pub fn sigma() -> Self {
        FieldLabel { base: FieldBase::Sigma, conjugated: false }
    }

    pub fn alpha(j: u8) -> Self {
        FieldLabel { base: FieldBase::Alpha(j), conjugated: false }
    }

    pub fn beta(j: u8) -> Self {
        FieldLabel { base: FieldBase::Beta(j), conjugated: false }
    }

    pub fn conj(self) -> Self {
        FieldLabel { base: self.base, conjugated: !self.conjugated }
    }
}

impl fmt::Display for FieldLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.base {
            FieldBase::Sigma => write!(f, "σ")?,
            FieldBase::Alpha(j) => write!(f, "α{j}")?,
            FieldBase::Beta(j) => write!(f, "β{j}")?,
        }
        if self.conjugated {
            write!(f, "̄")?;
        }
        Ok(())
    }
}

/// Symmetric table of exact covariances between field labels; absent
/// pairs have covariance zero.
#[derive(Debug, Clone, Default)]
pub struct CovarianceTable {
    entries: BTreeMap<(FieldLabel, FieldLabel), GaussRat>,
}

impl CovarianceTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(a: FieldLabel, b: FieldLabel) -> (FieldLabel, FieldLabel) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn insert(&mut self, a: FieldLabel, b: FieldLabel, value: GaussRat) {
        if !value.is_zero() {
            self.entries.insert(Self::key(a, b), value);
        }
    }

    pub fn get(&self, a: FieldLabel, b: FieldLabel) -> GaussRat {
        self.entries.get(&Self::key(a, b)).cloned().unwrap_or_else(GaussRat::zero)
    }

    /// Covariance table of the `dχ(Ψ)` measure for the remaining fields
    /// of the given model: crossed pairs `⟨α_j β_j⟩ = -i` (real case),
    /// `⟨α_j β̄_j⟩ = ⟨ᾱ_j β_j⟩ = -i` (complex case), plus a plain `σ`
    /// (`⟨σ²⟩ = 1` real, `⟨σ σ̄⟩ = 1` complex) when `k` is even.
    pub fn psi_measure(model: ModelSpec) -> Self {
        let mut t = CovarianceTable::new();
        let k = model.k as u8;
        let crossed_js: Vec<u8> = if k % 2 == 1 {
            (1..=k.saturating_sub(2)).step_by(2).collect()
        } else {
            (2..=k.saturating_sub(2)).step_by(2).collect()
        };
        match model.kind {
            ModelKind::Real => {
                if k % 2 == 0 {
                    t.insert(FieldLabel::sigma(), FieldLabel::sigma(), GaussRat::one());
                }
                for j in crossed_js {
                    t.insert(FieldLabel::alpha(j), FieldLabel::beta(j), GaussRat::minus_i());
                }
            }
            ModelKind::Complex => {
                if k % 2 == 0 {
                    t.insert(FieldLabel::sigma(), FieldLabel::sigma().conj(), GaussRat::one());
                }
                for j in crossed_js {
                    t.insert(
                        FieldLabel::alpha(j),
                        FieldLabel::beta(j).conj(),
                        GaussRat::minus_i(),
                    );
                    t.insert(
                        FieldLabel::alpha(j).conj(),
                        FieldLabel::beta(j),
                        GaussRat::minus_i(),
                    );
                }
            }
        }
        t
    }
}

/// Canonical multiset: sorted `(label, count)` pairs.
type Multiset = Vec<(FieldLabel, u32)>;

fn to_multiset(monomial: &[FieldLabel]) -> Multiset {
    let mut counts: BTreeMap<FieldLabel, u32> = BTreeMap::new();
    for &l in monomial {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts.into_iter().collect()
}

/// Gaussian moment `⟨∏ monomial⟩` under the covariance table: sum over
/// perfect pairings of products of covariances. Zero for odd degree and
/// whenever a field has no admissible partner left.
pub fn x_measure_moment(monomial: &[FieldLabel], table: &CovarianceTable) -> GaussRat {
    let ms = to_multiset(monomial);
    let degree: u32 = ms.iter().map(|&(_, c)| c).sum();
    if degree % 2 == 1 {
        return GaussRat::zero();
    }
    let mut memo: HashMap<Multiset, GaussRat> = HashMap::new();
    moment_rec(&ms, table, &mut memo)
}

fn moment_rec(
    ms: &Multiset,
    table: &CovarianceTable,
    memo: &mut HashMap<Multiset, GaussRat>,
) -> GaussRat {
    if ms.is_empty() {
        return GaussRat::one();
    }
    if let Some(v) = memo.get(ms) {
        return v.clone();
    }
    // Pair the first remaining field with every admissible partner.
    let (first, first_count) = ms[0];
    let mut total = GaussRat::zero();
    for idx in 0..ms.len() {
        let (partner, partner_count) = ms[idx];
        let ways = if idx == 0 { first_count - 1 } else { partner_count };
        if ways == 0 {
            continue;
        }
        let cov = table.get(first, partner);
        if cov.is_zero() {
            continue;
        }
        let mut rest = ms.clone();
        rest[0].1 -= 1;
        rest[idx].1 -= 1;
        rest.retain(|&(_, c)| c > 0);
        let sub = moment_rec(&rest, table, memo);
        total += cov.scale(&BigRational::from_integer(ways.into())) * sub;
    }
    memo.insert(ms.clone(), total.clone());
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ModelSpec;

    fn real_k3_table() -> CovarianceTable {
        CovarianceTable::psi_measure(ModelSpec::real(3).unwrap())
    }

    #[test]
    fn crossed_pair_moment() {
        let t = real_k3_table();
        let m = x_measure_moment(&[FieldLabel::alpha(1), FieldLabel::beta(1)], &t);
        assert_eq!(m, GaussRat::minus_i());
    }

    #[test]
    fn self_covariances_vanish() {
        let t = real_k3_table();
        assert!(x_measure_moment(&[FieldLabel::alpha(1); 2], &t).is_zero());
        assert!(x_measure_moment(&[FieldLabel::beta(1); 2], &t).is_zero());
    }

    #[test]
    fn quartic_crossed_moment() {
        let t = real_k3_table();
        let m = x_measure_moment(
            &[FieldLabel::alpha(1), FieldLabel::beta(1), FieldLabel::alpha(1), FieldLabel::beta(1)],
            &t,
        );
        // two pairings, each (-i)^2
        assert_eq!(m, GaussRat::from_int(-2));
    }

    #[test]
    fn odd_degree_vanishes() {
        let t = real_k3_table();
        assert!(x_measure_moment(&[FieldLabel::alpha(1); 3], &t).is_zero());
    }

    #[test]
    fn unpartnered_field_kills_the_moment() {
        // α1^2 β1^2: each α1 must pair a β1, fine; but α1^2 β3^2 dies
        // because β3 has no admissible partner in the k = 3 table.
        let t = real_k3_table();
        let m = x_measure_moment(
            &[FieldLabel::alpha(1), FieldLabel::alpha(1), FieldLabel::beta(3), FieldLabel::beta(3)],
            &t,
        );
        assert!(m.is_zero());
    }

    #[test]
    fn complex_crossed_rules() {
        let t = CovarianceTable::psi_measure(ModelSpec::complex(3).unwrap());
        let m = x_measure_moment(&[FieldLabel::alpha(1), FieldLabel::beta(1).conj()], &t);
        assert_eq!(m, GaussRat::minus_i());
        assert!(x_measure_moment(&[FieldLabel::alpha(1), FieldLabel::alpha(1).conj()], &t)
            .is_zero());
        assert!(x_measure_moment(&[FieldLabel::alpha(1), FieldLabel::beta(1)], &t).is_zero());
    }

    #[test]
    fn sigma_is_plain_for_even_k() {
        let t = CovarianceTable::psi_measure(ModelSpec::real(4).unwrap());
        assert_eq!(x_measure_moment(&[FieldLabel::sigma(); 2], &t), GaussRat::one());
        // ⟨σ^4⟩ = 3
        assert_eq!(x_measure_moment(&[FieldLabel::sigma(); 4], &t), GaussRat::from_int(3));
    }
}
