//! Small dense complex matrices and a Hermitian eigensolver.
//!
//! Everything here targets the 2x2 and 4x4 matrices of one- and two-qubit
//! states, so the implementations favor clarity and numerical robustness
//! over asymptotic speed.

use num_complex::Complex;

use crate::scalar::Real;

/// Dense square complex matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    dim: usize,
    data: Vec<Complex<T>>,
}

/// Eigendecomposition of a Hermitian matrix.
///
/// `values` are ascending and `vectors` holds the matching unit
/// eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Eigh<T> {
    pub values: Vec<T>,
    pub vectors: CMatrix<T>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex::new(T::zero(), T::zero()); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, Complex::new(T::one(), T::zero()));
        }
        m
    }

    /// Builds a matrix from rows; panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "row {i} has wrong length");
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex<T>) {
        self.data[i * self.dim + j] = v;
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self { dim: self.dim, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self { dim: self.dim, data }
    }

    pub fn scale(&self, s: T) -> Self {
        let data = self.data.iter().map(|a| a.scale(s)).collect();
        Self { dim: self.dim, data }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == Complex::new(T::zero(), T::zero()) {
                    continue;
                }
                for j in 0..n {
                    let v = out.get(i, j) + aik * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn trace(&self) -> Complex<T> {
        let mut t = Complex::new(T::zero(), T::zero());
        for i in 0..self.dim {
            t += self.get(i, i);
        }
        t
    }

    /// Real part of `Tr(self * other)`.
    pub fn trace_product_re(&self, other: &Self) -> T {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut t = T::zero();
        for i in 0..n {
            for j in 0..n {
                let a = self.get(i, j);
                let b = other.get(j, i);
                t += a.re * b.re - a.im * b.im;
            }
        }
        t
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    /// Largest deviation from Hermitian symmetry, `max |a_ij - conj(a_ji)|`.
    pub fn hermitian_deviation(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for i in 0..n {
            for j in i..n {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Hermitian part `(A + A^dagger) / 2`.
    pub fn hermitize(&self) -> Self {
        self.add(&self.adjoint()).scale(T::of(0.5))
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Self) -> Self {
        let n = self.dim;
        let m = other.dim;
        let mut out = Self::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self.get(i, j);
                for k in 0..m {
                    for l in 0..m {
                        out.set(i * m + k, j * m + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    /// Gauss-Jordan inverse with partial pivoting; `None` if singular.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.dim;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let mut pivot = col;
            let mut best = a.get(col, col).norm();
            for r in col + 1..n {
                let mag = a.get(r, col).norm();
                if mag > best {
                    best = mag;
                    pivot = r;
                }
            }
            if best <= T::epsilon() * T::of(16.0) * self.frobenius_norm().max(T::one()) {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    let tmp = a.get(col, j);
                    a.set(col, j, a.get(pivot, j));
                    a.set(pivot, j, tmp);
                    let tmp = inv.get(col, j);
                    inv.set(col, j, inv.get(pivot, j));
                    inv.set(pivot, j, tmp);
                }
            }
            let p = a.get(col, col);
            for j in 0..n {
                a.set(col, j, a.get(col, j) / p);
                inv.set(col, j, inv.get(col, j) / p);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col);
                if f == Complex::new(T::zero(), T::zero()) {
                    continue;
                }
                for j in 0..n {
                    let v = a.get(r, j) - f * a.get(col, j);
                    a.set(r, j, v);
                    let v = inv.get(r, j) - f * inv.get(col, j);
                    inv.set(r, j, v);
                }
            }
        }
        Some(inv)
    }

    /// Cholesky factor `L` with `A = L L^dagger`, or `None` when the
    /// Hermitian matrix is not strictly positive definite.
    pub fn cholesky(&self) -> Option<Self> {
        let n = self.dim;
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self.get(j, j).re;
            for k in 0..j {
                d -= l.get(j, k).norm_sqr();
            }
            if d <= T::zero() || !d.is_finite() {
                return None;
            }
            let ljj = d.sqrt();
            l.set(j, j, Complex::new(ljj, T::zero()));
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k).conj();
                }
                l.set(i, j, s.scale(T::one() / ljj));
            }
        }
        Some(l)
    }

    /// Whether a Hermitian matrix is strictly positive definite.
    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_some()
    }

    /// `ln det` of a Hermitian positive definite matrix.
    pub fn ln_det_pd(&self) -> Option<T> {
        let l = self.cholesky()?;
        let two = T::of(2.0);
        let mut sum = T::zero();
        for j in 0..self.dim {
            sum += l.get(j, j).re.ln();
        }
        Some(two * sum)
    }

    /// Eigendecomposition by cyclic complex Jacobi rotations.
    ///
    /// The matrix is assumed Hermitian; only the upper triangle and the real
    /// parts of the diagonal are trusted.
    pub fn eigh(&self) -> Eigh<T> {
        let n = self.dim;
        let mut a = self.clone();
        let mut v = Self::identity(n);
        let scale = self.frobenius_norm().max(T::one());
        let target = T::epsilon() * scale * T::from_usize(n * n).unwrap();
        for _sweep in 0..200 {
            let mut off = T::zero();
            for p in 0..n {
                for q in p + 1..n {
                    off += a.get(p, q).norm_sqr();
                }
            }
            if off.sqrt() <= target {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    jacobi_rotate(&mut a, &mut v, p, q);
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        let diag: Vec<T> = (0..n).map(|i| a.get(i, i).re).collect();
        order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
        let values: Vec<T> = order.iter().map(|&i| diag[i]).collect();
        let mut vectors = Self::zeros(n);
        for (new_col, &old_col) in order.iter().enumerate() {
            for row in 0..n {
                vectors.set(row, new_col, v.get(row, old_col));
            }
        }
        Eigh { values, vectors }
    }

    /// Eigenvalues only, ascending.
    pub fn eigvalsh(&self) -> Vec<T> {
        self.eigh().values
    }
}

/// One two-sided Jacobi rotation zeroing the `(p, q)` entry of the
/// Hermitian matrix `a`, accumulated into `v`.
fn jacobi_rotate<T: Real>(a: &mut CMatrix<T>, v: &mut CMatrix<T>, p: usize, q: usize) {
    let n = a.dim();
    let apq = a.get(p, q);
    let mag = apq.norm();
    if mag <= T::epsilon() * a.frobenius_norm().max(T::one()) * T::of(0.01) {
        return;
    }
    let w = apq.scale(T::one() / mag);
    let app = a.get(p, p).re;
    let aqq = a.get(q, q).re;
    let tau = (app - aqq) / (T::of(2.0) * mag);
    let t = if tau == T::zero() {
        T::one()
    } else {
        tau.signum() / (tau.abs() + (T::one() + tau * tau).sqrt())
    };
    let c = T::one() / (T::one() + t * t).sqrt();
    let s = t * c;
    let sw = w.scale(s);
    let sw_conj = w.conj().scale(s);

    // Column update: col_p <- c col_p + s conj(w) col_q, col_q <- -s w col_p + c col_q.
    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, akp.scale(c) + akq * sw_conj);
        a.set(k, q, akq.scale(c) - akp * sw);
    }
    // Row update with the conjugate coefficients.
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, apk.scale(c) + aqk * sw);
        a.set(q, k, aqk.scale(c) - apk * sw_conj);
    }
    let dp = a.get(p, p).re;
    let dq = a.get(q, q).re;
    a.set(p, p, Complex::new(dp, T::zero()));
    a.set(q, q, Complex::new(dq, T::zero()));
    a.set(p, q, Complex::new(T::zero(), T::zero()));
    a.set(q, p, Complex::new(T::zero(), T::zero()));

    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, vkp.scale(c) + vkq * sw_conj);
        v.set(k, q, vkq.scale(c) - vkp * sw);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c64(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix<f64> {
        let mut m = CMatrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, c64(rng.random::<f64>() * 2.0 - 1.0, 0.0));
            for j in i + 1..dim {
                let z = c64(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
                m.set(i, j, z);
                m.set(j, i, z.conj());
            }
        }
        m
    }

    #[test]
    fn identity_eigh_is_all_ones() {
        let eig = CMatrix::<f64>::identity(4).eigh();
        for v in eig.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn known_2x2_eigenvalues() {
        // [[1, (1-i)/2], [(1+i)/2, 0]] has eigenvalues (1 +- sqrt(3)) / 2.
        let m = CMatrix::from_rows(&[
            vec![c64(1.0, 0.0), c64(0.5, -0.5)],
            vec![c64(0.5, 0.5), c64(0.0, 0.0)],
        ]);
        let values = m.eigvalsh();
        assert!((values[0] - (1.0 - 3.0f64.sqrt()) / 2.0).abs() < 1e-13);
        assert!((values[1] - (1.0 + 3.0f64.sqrt()) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn eigh_reconstructs_random_hermitian_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in [2usize, 3, 4] {
            for _ in 0..50 {
                let m = random_hermitian(dim, &mut rng);
                let eig = m.eigh();
                // V diag(values) V^dagger == m
                let mut lambda = CMatrix::<f64>::zeros(dim);
                for (i, &v) in eig.values.iter().enumerate() {
                    lambda.set(i, i, c64(v, 0.0));
                }
                let rebuilt = eig.vectors.matmul(&lambda).matmul(&eig.vectors.adjoint());
                assert!(rebuilt.max_abs_diff(&m) < 1e-12, "dim {dim}");
                // V unitary
                let gram = eig.vectors.adjoint().matmul(&eig.vectors);
                assert!(gram.max_abs_diff(&CMatrix::identity(dim)) < 1e-12);
                // ascending
                for w in eig.values.windows(2) {
                    assert!(w[0] <= w[1] + 1e-14);
                }
            }
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_hermitian(4, &mut rng).add(&CMatrix::identity(4).scale(3.0));
            let inv = m.inverse().expect("well conditioned");
            let prod = m.matmul(&inv);
            assert!(prod.max_abs_diff(&CMatrix::identity(4)) < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let mut m = CMatrix::<f64>::zeros(3);
        m.set(0, 0, c64(1.0, 0.0));
        m.set(1, 1, c64(1.0, 0.0));
        assert!(m.inverse().is_none());
    }

    #[test]
    fn cholesky_detects_definiteness() {
        let mut pd = CMatrix::<f64>::identity(2).scale(0.5);
        pd.set(0, 1, c64(0.1, 0.2));
        pd.set(1, 0, c64(0.1, -0.2));
        assert!(pd.is_positive_definite());

        let mut indef = CMatrix::<f64>::identity(2);
        indef.set(1, 1, c64(-0.1, 0.0));
        assert!(!indef.is_positive_definite());
    }

    #[test]
    fn ln_det_matches_eigenvalue_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let m = random_hermitian(4, &mut rng).add(&CMatrix::identity(4).scale(3.0));
            let ld = m.ln_det_pd().expect("positive definite");
            let from_eigs: f64 = m.eigvalsh().iter().map(|v| v.ln()).sum();
            assert!((ld - from_eigs).abs() < 1e-12);
        }
    }

    #[test]
    fn kron_of_paulis() {
        let x = CMatrix::from_rows(&[
            vec![c64(0.0, 0.0), c64(1.0, 0.0)],
            vec![c64(1.0, 0.0), c64(0.0, 0.0)],
        ]);
        let z = CMatrix::from_rows(&[
            vec![c64(1.0, 0.0), c64(0.0, 0.0)],
            vec![c64(0.0, 0.0), c64(-1.0, 0.0)],
        ]);
        let xz = x.kron(&z);
        assert_eq!(xz.dim(), 4);
        assert_eq!(xz.get(0, 2), c64(1.0, 0.0));
        assert_eq!(xz.get(1, 3), c64(-1.0, 0.0));
        assert_eq!(xz.get(2, 0), c64(1.0, 0.0));
        assert_eq!(xz.get(3, 1), c64(-1.0, 0.0));
        assert_eq!(xz.get(0, 0), c64(0.0, 0.0));
    }

    #[test]
    fn trace_product_matches_explicit_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(4, &mut rng);
        let b = random_hermitian(4, &mut rng);
        let direct = a.matmul(&b).trace();
        assert!((a.trace_product_re(&b) - direct.re).abs() < 1e-13);
    }
}
