//! Small dense complex matrices and a Hermitian eigensolver.
//!
//! Everything in this crate lives in dimension ≤ a few dozen, so the matrix
//! type is a plain row-major `Vec<Complex<T>>` and the eigensolver is a
//! cyclic complex Jacobi iteration, which is accurate to a few ulps of the
//! matrix norm for small Hermitian inputs.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;

const MAX_JACOBI_SWEEPS: usize = 64;

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    dim: usize,
    data: Vec<Complex<T>>,
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
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex::new(d, T::zero());
        }
        m
    }

    /// Builds a matrix from rows; `None` if the rows do not form a square.
    pub fn from_rows(rows: Vec<Vec<Complex<T>>>) -> Option<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return None;
        }
        Some(Self {
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_real_rows(rows: &[Vec<T>]) -> Option<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| Complex::new(x, T::zero())).collect())
                .collect(),
        )
    }

    /// Outer product |v⟩⟨v|.
    pub fn projector(v: &[Complex<T>]) -> Self {
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn scale(&self, factor: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    /// `a * self + b * other`, elementwise.
    pub fn lincomb(&self, a: T, other: &Self, b: T) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in lincomb");
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x * a + y * b)
                .collect(),
        }
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).map(|i| self[(i, i)]).fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + z)
    }

    /// Real part of Tr(self · other) without forming the product.
    pub fn trace_product_re(&self, other: &Self) -> T {
        assert_eq!(self.dim, other.dim, "dimension mismatch in trace product");
        let n = self.dim;
        let mut acc = T::zero();
        for i in 0..n {
            for k in 0..n {
                acc += (self[(i, k)] * other[(k, i)]).re;
            }
        }
        acc
    }

    pub fn diagonal_re(&self) -> Vec<T> {
        (0..self.dim).map(|i| self[(i, i)].re).collect()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// Largest elementwise deviation from the conjugate transpose.
    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// (A + A†) / 2.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * half;
            }
        }
        m
    }

    /// U · self · U†.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        &(u * self) * &u.adjoint()
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let mut out = Self::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self[(i, j)];
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Traces out the second factor of a `left ⊗ right` matrix.
    pub fn partial_trace_right(&self, left: usize, right: usize) -> Self {
        assert_eq!(left * right, self.dim, "partial trace dimensions");
        let mut out = Self::zeros(left);
        for i in 0..left {
            for j in 0..left {
                let mut acc = Complex::new(T::zero(), T::zero());
                for k in 0..right {
                    acc = acc + self[(i * right + k, j * right + k)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// Traces out the first factor of a `left ⊗ right` matrix.
    pub fn partial_trace_left(&self, left: usize, right: usize) -> Self {
        assert_eq!(left * right, self.dim, "partial trace dimensions");
        let mut out = Self::zeros(right);
        for k in 0..right {
            for l in 0..right {
                let mut acc = Complex::new(T::zero(), T::zero());
                for i in 0..left {
                    acc = acc + self[(i * right + k, i * right + l)];
                }
                out[(k, l)] = acc;
            }
        }
        out
    }

    /// Spectral decomposition of the Hermitian part of `self`.
    pub fn eigh(&self) -> HermitianEigen<T> {
        jacobi_eigh(&self.hermitian_part())
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> T {
        let gram = &self.adjoint() * self;
        let top = gram.eigh().values.last().copied().unwrap_or_else(T::zero);
        top.max(T::zero()).sqrt()
    }

    /// Sum of absolute eigenvalues of the Hermitian part; equals the trace
    /// norm for Hermitian input.
    pub fn trace_norm_hermitian(&self) -> T {
        self.eigh().values.iter().map(|v| v.abs()).sum()
    }

    /// e^{−i·dt·self} for Hermitian `self`.
    pub fn exp_i_hermitian(&self, dt: T) -> Self {
        let eig = self.eigh();
        eig.map_values(|lambda| {
            let phase = -lambda * dt;
            Complex::new(phase.cos(), phase.sin())
        })
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.dim + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.dim + j]
    }
}

impl<'a, T: Real> Mul<&'a CMatrix<T>> for &'a CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: &'a CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in product");
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl<'a, T: Real> Add<&'a CMatrix<T>> for &'a CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: &'a CMatrix<T>) -> CMatrix<T> {
        self.lincomb(T::one(), rhs, T::one())
    }
}

impl<'a, T: Real> Sub<&'a CMatrix<T>> for &'a CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: &'a CMatrix<T>) -> CMatrix<T> {
        self.lincomb(T::one(), rhs, -T::one())
    }
}

/// Eigenvalues in ascending order with orthonormal eigenvectors stored as
/// the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T> {
    pub values: Vec<T>,
    pub vectors: CMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    /// V · diag(f(λ)) · V†.
    pub fn map_values<F>(&self, f: F) -> CMatrix<T>
    where
        F: Fn(T) -> Complex<T>,
    {
        let n = self.values.len();
        let weights: Vec<Complex<T>> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (k, w) in weights.iter().enumerate() {
                    acc = acc + self.vectors[(i, k)] * *w * self.vectors[(j, k)].conj();
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// Column `k` as a vector.
    pub fn vector(&self, k: usize) -> Vec<Complex<T>> {
        (0..self.values.len()).map(|i| self.vectors[(i, k)]).collect()
    }

    /// ⟨v_k| m |v_k⟩ (real part) for every eigenvector.
    pub fn expectations(&self, m: &CMatrix<T>) -> Vec<T> {
        let n = self.values.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex::new(T::zero(), T::zero());
                for i in 0..n {
                    let vi = self.vectors[(i, k)].conj();
                    for j in 0..n {
                        acc = acc + vi * m[(i, j)] * self.vectors[(j, k)];
                    }
                }
                acc.re
            })
            .collect()
    }
}

fn jacobi_eigh<T: Real>(input: &CMatrix<T>) -> HermitianEigen<T> {
    let n = input.dim;
    let mut a = input.clone();
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm();
    let threshold = (T::epsilon() * scale).powi(2);

    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off <= threshold || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let g = apq.norm();
                if g == T::zero() {
                    continue;
                }
                // Phase the pair so the off-diagonal element is real, then
                // apply the real Jacobi rotation that annihilates it.
                let phase = apq / g;
                let alpha = a[(p, p)].re;
                let beta = a[(q, q)].re;
                let theta = (beta - alpha) / (g + g);
                let t = if theta == T::zero() {
                    T::one()
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                let phase_conj = phase.conj();

                // A ← A·J, V ← V·J with J[:,p] = (c, −s·e^{−iφ}), J[:,q] = (s, c·e^{−iφ}).
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * phase_conj * s;
                    a[(k, q)] = akp * s + akq * phase_conj * c;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * phase_conj * s;
                    v[(k, q)] = vkp * s + vkq * phase_conj * c;
                }
                // A ← J†·A.
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * phase * s;
                    a[(q, k)] = apk * s + aqk * phase * c;
                }
                let zero = Complex::new(T::zero(), T::zero());
                a[(p, q)] = zero;
                a[(q, p)] = zero;
                a[(p, p)] = Complex::new(a[(p, p)].re, T::zero());
                a[(q, q)] = Complex::new(a[(q, q)].re, T::zero());
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(i, i)]
            .re
            .partial_cmp(&a[(j, j)].re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = CMatrix::zeros(n);
    for (new, &old) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, new)] = v[(i, old)];
        }
    }
    HermitianEigen { values, vectors }
}

/// Haar-distributed unitary via Gram–Schmidt on a complex Ginibre matrix.
pub fn haar_unitary<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix<T> {
    let mut cols: Vec<Vec<Complex<T>>> = (0..dim).map(|_| gaussian_vector(dim, rng)).collect();
    for j in 0..dim {
        for k in 0..j {
            let (head, tail) = cols.split_at_mut(j);
            let proj = inner(&head[k], &tail[0]);
            for (x, y) in tail[0].iter_mut().zip(&head[k]) {
                *x = *x - *y * proj;
            }
        }
        normalize(&mut cols[j]);
    }
    let mut u = CMatrix::zeros(dim);
    for (j, col) in cols.iter().enumerate() {
        for (i, z) in col.iter().enumerate() {
            u[(i, j)] = *z;
        }
    }
    u
}

/// Haar-random unit vector.
pub fn haar_state<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Complex<T>> {
    let mut v = gaussian_vector(dim, rng);
    normalize(&mut v);
    v
}

fn gaussian_vector<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Complex<T>> {
    (0..dim)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect()
}

/// ⟨a|b⟩.
fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

fn normalize<T: Real>(v: &mut [Complex<T>]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    for z in v.iter_mut() {
        *z = *z / norm;
    }
}
