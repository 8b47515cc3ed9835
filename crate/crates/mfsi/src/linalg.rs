//! Thin wrappers around the dense/sparse linear-algebra backend, plus a tiny
//! deterministic RNG for tests and examples.
//!
//! Everything downstream talks to this module in terms of `Vec<f64>` /
//! `Vec<Complex64>` columns, so the backend types stay contained here.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;

use crate::{Error, Result};

/// Scalar abstraction shared by the real and complex field pipelines: the
/// discrete operators have real coefficients, so `Mul<f64>` is all they need.
pub trait Scalar:
    Copy
    + PartialEq
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::Mul<f64, Output = Self>
    + std::ops::Mul<Self, Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
{
    fn zero() -> Self;
    fn from_f64(x: f64) -> Self;
    fn abs(self) -> f64;
    /// Squared modulus, used by quadrature-weighted norms.
    fn abs2(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn abs2(self) -> f64 {
        self * self
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
}

/// Triplet accumulator for sparse assembly. Duplicate entries sum.
#[derive(Clone)]
pub struct Triplets<T> {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> Triplets<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(i < self.nrows && j < self.ncols, "triplet ({i},{j}) out of bounds");
        if v != T::zero() {
            self.entries.push((i, j, v));
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Matrix-vector product straight off the triplets (duplicates sum).
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![T::zero(); self.nrows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }
}

macro_rules! sparse_lu_impl {
    ($name:ident, $ty:ty) => {
        /// Sparse LU factorization handle; built once, solved many times.
        pub struct $name {
            lu: faer::sparse::linalg::solvers::Lu<usize, $ty>,
            tri: Triplets<$ty>,
        }

        impl $name {
            pub fn factor(tri: Triplets<$ty>) -> Result<Self> {
                let trips: Vec<Triplet<usize, usize, $ty>> = tri
                    .entries
                    .iter()
                    .map(|&(i, j, v)| Triplet::new(i, j, v))
                    .collect();
                let mat = SparseColMat::<usize, $ty>::try_new_from_triplets(
                    tri.nrows, tri.ncols, &trips,
                )
                .map_err(|e| Error::Linalg(format!("sparse build: {e:?}")))?;
                let lu = mat
                    .sp_lu()
                    .map_err(|e| Error::Linalg(format!("sparse lu: {e:?}")))?;
                Ok(Self { lu, tri })
            }

            pub fn solve(&self, b: &[$ty]) -> Vec<$ty> {
                assert_eq!(b.len(), self.tri.nrows);
                let mut rhs = faer::Mat::<$ty>::zeros(b.len(), 1);
                for (i, &v) in b.iter().enumerate() {
                    rhs[(i, 0)] = v;
                }
                let x = self.lu.solve(&rhs);
                (0..self.tri.ncols).map(|i| x[(i, 0)]).collect()
            }

            /// Residual max-norm `|Ax - b|_inf`, for solver sanity checks.
            pub fn residual_inf(&self, x: &[$ty], b: &[$ty]) -> f64 {
                let ax = self.tri.apply(x);
                ax.iter()
                    .zip(b)
                    .map(|(a, b)| (*a - *b).abs())
                    .fold(0.0_f64, f64::max)
            }

            pub fn matrix(&self) -> &Triplets<$ty> {
                &self.tri
            }
        }
    };
}

sparse_lu_impl!(SparseLuReal, f64);
sparse_lu_impl!(SparseLuComplex, Complex64);

/// Dense LU handle for the small dense systems (plate mass matrix etc.).
pub struct DenseLu {
    lu: faer::linalg::solvers::PartialPivLu<f64>,
    n: usize,
}

impl DenseLu {
    pub fn factor(a: &faer::Mat<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        Self {
            lu: a.partial_piv_lu(),
            n: a.nrows(),
        }
    }

    /// Factor an n×n matrix given in row-major order.
    pub fn factor_slice(a: &[f64], n: usize) -> Self {
        assert_eq!(a.len(), n * n);
        let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[i * n + j]);
        Self::factor(&m)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let rhs = col_from_slice(b);
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

pub fn col_from_slice(x: &[f64]) -> faer::Mat<f64> {
    let mut m = faer::Mat::<f64>::zeros(x.len(), 1);
    for (i, &v) in x.iter().enumerate() {
        m[(i, 0)] = v;
    }
    m
}

/// Eigendecomposition of a real square matrix: (eigenvalues, eigenvectors),
/// eigenvector j stored in column j.
pub fn dense_eigen(a: &faer::Mat<f64>) -> Result<(Vec<Complex64>, faer::Mat<c64>)> {
    let evd = a
        .eigen()
        .map_err(|e| Error::Linalg(format!("eigendecomposition: {e:?}")))?;
    let s = evd.S();
    let n = a.nrows();
    let vals: Vec<Complex64> = (0..n).map(|i| s[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Full SVD of a real matrix: (U, σ, V) with A = U diag(σ) Vᵀ.
pub fn svd_parts(a: &faer::Mat<f64>) -> Result<(faer::Mat<f64>, Vec<f64>, faer::Mat<f64>)> {
    let svd = a
        .svd()
        .map_err(|e| Error::Linalg(format!("svd: {e:?}")))?;
    let k = a.nrows().min(a.ncols());
    let s = svd.S();
    Ok((
        svd.U().to_owned(),
        (0..k).map(|i| s[i]).collect(),
        svd.V().to_owned(),
    ))
}

/// Singular values of a real matrix, descending.
pub fn singular_values(a: &faer::Mat<f64>) -> Result<Vec<f64>> {
    a.singular_values()
        .map_err(|e| Error::Linalg(format!("svd: {e:?}")))
}

/// Singular values of a complex matrix, descending.
pub fn singular_values_c(a: &faer::Mat<c64>) -> Result<Vec<f64>> {
    a.singular_values()
        .map_err(|e| Error::Linalg(format!("svd: {e:?}")))
}

/// Deterministic 64-bit generator (splitmix64), enough for test fields.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_real_roundtrip() {
        // 1D Dirichlet Laplacian, solve against a known quadratic.
        let n = 50;
        let h = 1.0 / (n as f64 + 1.0);
        let mut tri = Triplets::new(n, n);
        for i in 0..n {
            tri.push(i, i, 2.0 / (h * h));
            if i > 0 {
                tri.push(i, i - 1, -1.0 / (h * h));
            }
            if i + 1 < n {
                tri.push(i, i + 1, -1.0 / (h * h));
            }
        }
        let lu = SparseLuReal::factor(tri).unwrap();
        let b = vec![2.0; n]; // -u'' = 2 with u(0)=u(1)=0 -> u = x(1-x)
        let x = lu.solve(&b);
        for (i, &xi) in x.iter().enumerate() {
            let s = (i as f64 + 1.0) * h;
            assert!((xi - s * (1.0 - s)).abs() < 1e-10, "i={i}");
        }
        assert!(lu.residual_inf(&x, &b) < 1e-9);
    }

    #[test]
    fn sparse_complex_roundtrip() {
        let n = 40;
        let mut tri = Triplets::new(n, n);
        let mut rng = Rng::new(7);
        let mut xs = Vec::new();
        for i in 0..n {
            tri.push(i, i, Complex64::new(3.0 + rng.uniform(), 1.0));
            if i + 1 < n {
                tri.push(i, i + 1, Complex64::new(rng.range(-1.0, 1.0), 0.3));
                tri.push(i + 1, i, Complex64::new(0.2, rng.range(-1.0, 1.0)));
            }
            xs.push(Complex64::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)));
        }
        let b = tri.apply(&xs);
        let lu = SparseLuComplex::factor(tri).unwrap();
        let x = lu.solve(&b);
        for i in 0..n {
            assert!((x[i] - xs[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn dense_eigen_known_matrix() {
        // [[0, 1], [-1, 0]] has eigenvalues +-i.
        let a = faer::mat![[0.0, 1.0], [-1.0, 0.0]];
        let (vals, _) = dense_eigen(&a).unwrap();
        let mut ims: Vec<f64> = vals.iter().map(|l| l.im).collect();
        ims.sort_by(f64::total_cmp);
        assert!((ims[0] + 1.0).abs() < 1e-12);
        assert!((ims[1] - 1.0).abs() < 1e-12);
        assert!(vals.iter().all(|l| l.re.abs() < 1e-12));
    }

    #[test]
    fn svd_diag() {
        let a = faer::mat![[3.0, 0.0], [0.0, -5.0]];
        let sv = singular_values(&a).unwrap();
        assert!((sv[0] - 5.0).abs() < 1e-12 && (sv[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rng_deterministic() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..10 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = Rng::new(42);
        let mean: f64 = (0..10_000).map(|_| c.uniform()).sum::<f64>() / 10_000.0;
        assert!((mean - 0.5).abs() < 0.02);
    }
}
