//! Dense complex linear algebra for the small (size <= 6) matrices that
//! appear in the intermediate-field representation. Everything is exact
//! direct computation; no iterative estimation beyond the Jacobi sweeps.

use num::complex::Complex64;
use num::Zero;

use crate::error::{Error, Result};

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix { n, data: vec![Complex64::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        CMatrix { n, data: rows.iter().flatten().copied().collect() }
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == Complex64::zero() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn adjoint(&self) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self[(j, i)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> Complex64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = Complex64::new(1.0, 0.0);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| {
                    a[i * n + col].norm().partial_cmp(&a[j * n + col].norm()).unwrap()
                })
                .unwrap();
            if a[pivot * n + col].norm() == 0.0 {
                return Complex64::zero();
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for i in col + 1..n {
                let factor = a[i * n + col] / p;
                for j in col..n {
                    let v = a[col * n + j];
                    a[i * n + j] -= factor * v;
                }
            }
        }
        det
    }

    /// Monic characteristic polynomial coefficients `[c_0, …, c_{n-1}, 1]`
    /// (index = power of x) via the Faddeev-LeVerrier recursion.
    pub fn char_poly(&self) -> Vec<Complex64> {
        let n = self.n;
        let mut coeffs = vec![Complex64::zero(); n + 1];
        coeffs[n] = Complex64::new(1.0, 0.0);
        let mut m = CMatrix::identity(n);
        for j in 1..=n {
            m = self.mul(&m);
            let c = -m.trace() / Complex64::new(j as f64, 0.0);
            coeffs[n - j] = c;
            for i in 0..n {
                m[(i, i)] += c;
            }
        }
        coeffs
    }

    /// All eigenvalues via roots of the characteristic polynomial.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        poly_roots(&self.char_poly())
    }

    /// Singular values (descending) via Jacobi iteration on `AᴴA`.
    pub fn singular_values(&self) -> Vec<f64> {
        let gram = self.adjoint().mul(self);
        let mut eig = hermitian_eigenvalues(&gram);
        // Clamp tiny negatives from rounding.
        for v in eig.iter_mut() {
            *v = v.max(0.0).sqrt();
        }
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        eig
    }

    /// Operator (spectral) norm.
    pub fn op_norm(&self) -> f64 {
        self.singular_values()[0]
    }

    /// Smallest singular value.
    pub fn min_singular(&self) -> f64 {
        *self.singular_values().last().unwrap()
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let n = m.n;
    let mut a = m.clone();
    let scale: f64 = a.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() < 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.norm() < 1e-30 * scale {
                    continue;
                }
                // Complex Jacobi rotation zeroing a[(p,q)].
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let abs = apq.norm();
                let phase = apq / Complex64::new(abs, 0.0);
                let tau = (aqq - app) / (2.0 * abs);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Columns/rows update with J = [[c, s·phase], [-s·conj(phase), c]].
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * s * phase.conj();
                    a[(k, q)] = akp * s * phase + akq * c;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * s * phase;
                    a[(q, k)] = apk * s * phase.conj() + aqk * c;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)].re).collect()
}

/// Roots of a complex polynomial (coefficients by ascending power) via
/// the Durand-Kerner iteration. Deterministic for fixed input.
pub fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    // Strip leading (highest-power) zeros.
    let mut deg = coeffs.len().saturating_sub(1);
    while deg > 0 && coeffs[deg].norm() == 0.0 {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let monic: Vec<Complex64> = coeffs[..=deg].iter().map(|c| c / lead).collect();
    let eval = |x: Complex64| -> Complex64 {
        let mut acc = Complex64::zero();
        for &c in monic.iter().rev() {
            acc = acc * x + c;
        }
        acc
    };
    let radius = 1.0
        + monic[..deg]
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..deg)
        .map(|j| seed.powu(j as u32 + 1) * radius / seed.norm().powi(j as i32 + 1))
        .collect();
    for _ in 0..500 {
        let mut max_step = 0.0f64;
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() == 0.0 {
                // Perturb coincident iterates deterministically.
                roots[i] += Complex64::new(1e-8, 1e-8);
                continue;
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 * radius.max(1.0) {
            break;
        }
    }
    // Deterministic output order.
    roots.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    roots
}

/// Solves `A x = b` by LU with partial pivoting (small systems).
pub fn solve(a: &CMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = a.n;
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut x: Vec<Complex64> = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].norm().partial_cmp(&m[(j, col)].norm()).unwrap())
            .unwrap();
        if m[(pivot, col)].norm() < 1e-300 {
            return Err(Error::SingularSystem(format!("zero pivot at column {col}")));
        }
        if pivot != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(pivot, j)];
                m[(pivot, j)] = tmp;
            }
            x.swap(col, pivot);
        }
        let p = m[(col, col)];
        for i in col + 1..n {
            let f = m[(i, col)] / p;
            for j in col..n {
                let v = m[(col, j)];
                m[(i, j)] -= f * v;
            }
            let v = x[col];
            x[i] -= f * v;
        }
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= m[(i, j)] * x[j];
        }
        x[i] = acc / m[(i, i)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn det_of_known_matrix() {
        let m = CMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(3.0, 0.0), c(4.0, 0.0)],
        ]);
        assert!((m.det() - c(-2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn char_poly_and_eigenvalues() {
        // Diagonal (2, 3i): char poly (x-2)(x-3i) = x^2 - (2+3i)x + 6i
        let m = CMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 3.0)],
        ]);
        let p = m.char_poly();
        assert!((p[0] - c(0.0, 6.0)).norm() < 1e-12);
        assert!((p[1] + c(2.0, 3.0)).norm() < 1e-12);
        let eig = m.eigenvalues();
        assert!(eig.iter().any(|&x| (x - c(2.0, 0.0)).norm() < 1e-10));
        assert!(eig.iter().any(|&x| (x - c(0.0, 3.0)).norm() < 1e-10));
    }

    #[test]
    fn singular_values_of_diagonal() {
        let m = CMatrix::from_rows(&[
            vec![c(0.0, 3.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(-0.5, 0.0)],
        ]);
        let sv = m.singular_values();
        assert!((sv[0] - 3.0).abs() < 1e-12);
        assert!((sv[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn jacobi_handles_complex_offdiagonal() {
        // Hermitian [[2, i], [-i, 2]], eigenvalues 1 and 3.
        let m = CMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, -1.0), c(2.0, 0.0)],
        ]);
        let mut eig = hermitian_eigenvalues(&m);
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn roots_of_cubic() {
        // (x-1)(x+2)(x-i) = x^3 + (1-i)x^2 + (-2-i)x + 2i
        let coeffs = vec![c(0.0, 2.0), c(-2.0, -1.0), c(1.0, -1.0), c(1.0, 0.0)];
        let roots = poly_roots(&coeffs);
        assert_eq!(roots.len(), 3);
        for target in [c(1.0, 0.0), c(-2.0, 0.0), c(0.0, 1.0)] {
            assert!(roots.iter().any(|&r| (r - target).norm() < 1e-10));
        }
    }

    #[test]
    fn solve_small_system() {
        let a = CMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(3.0, 1.0)],
        ]);
        let b = vec![c(5.0, 0.0), c(10.0, 2.0)];
        let x = solve(&a, &b).unwrap();
        // Check residual.
        let r0 = a[(0, 0)] * x[0] + a[(0, 1)] * x[1] - b[0];
        let r1 = a[(1, 0)] * x[0] + a[(1, 1)] * x[1] - b[1];
        assert!(r0.norm() < 1e-12 && r1.norm() < 1e-12);
    }
}
