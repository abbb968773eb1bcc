use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;
use crate::thermo::{gibbs_state, DensityOperator, HamiltonianMatrix, Temperature};

type Sampler<T> = Arc<dyn Fn(T) -> HamiltonianMatrix<T> + Send + Sync>;

/// Largest accepted `‖H(s+h) − 2H(s) + H(s−h)‖/h²` on the probe grid.
pub const SMOOTHNESS_LIMIT: f64 = 1e8;
const PROBE_STEP: f64 = 1e-3;
const PROBE_POINTS: usize = 64;

/// Time profile `g(s)` with `g(0) = 0`, `g(1) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Linear,
    /// `3s² − 2s³`; its derivative vanishes at both ends.
    Smoothstep,
}

impl Profile {
    pub fn eval<T: Real>(self, s: T) -> T {
        match self {
            Profile::Linear => s,
            Profile::Smoothstep => s * s * (T::lit(3.0) - T::lit(2.0) * s),
        }
    }
}

/// Continuously differentiable family `H(s)`, `s ∈ [0, 1]`, with its Gibbs
/// family `τ(s)` at a fixed temperature.
#[derive(Clone)]
pub struct HamiltonianPath<T> {
    dim: usize,
    sampler: Sampler<T>,
    temp: Temperature<T>,
    step: T,
    label: String,
}

impl<T: fmt::Debug> fmt::Debug for HamiltonianPath<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianPath")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("temp", &self.temp)
            .field("step", &self.step)
            .finish()
    }
}

impl<T: Real> HamiltonianPath<T> {
    /// Wraps `sampler` and checks dimension and smoothness on a probe grid.
    pub fn new<F>(label: impl Into<String>, dim: usize, temp: Temperature<T>, sampler: F) -> Result<Self>
    where
        F: Fn(T) -> HamiltonianMatrix<T> + Send + Sync + 'static,
    {
        let path = Self {
            dim,
            sampler: Arc::new(sampler),
            temp,
            step: T::lit(1e-5).max(T::epsilon().cbrt()),
            label: label.into(),
        };
        for i in 0..=PROBE_POINTS {
            let s = T::from_usize_lossy(i) / T::from_usize_lossy(PROBE_POINTS);
            let got = path.at(s).dim();
            if got != dim {
                return Err(Error::DimensionMismatch(got, dim));
            }
        }
        let curvature = path.smoothness_probe();
        if !(curvature <= T::lit(SMOOTHNESS_LIMIT)) {
            return Err(Error::Numerical {
                op: "HamiltonianPath::new",
                detail: format!("path fails the smoothness probe (second difference {:e})", curvature.as_f64()),
            });
        }
        Ok(path)
    }

    /// Overrides the finite-difference step used for `Ḣ` and `τ̇`.
    pub fn with_derivative_step(mut self, h: T) -> Self {
        self.step = h;
        self
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn temperature(&self) -> Temperature<T> {
        self.temp
    }

    #[inline]
    pub fn derivative_step(&self) -> T {
        self.step
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn at(&self, s: T) -> HamiltonianMatrix<T> {
        (self.sampler)(s)
    }

    pub fn gibbs(&self, s: T) -> Result<DensityOperator<T>> {
        gibbs_state(&self.at(s), self.temp)
    }

    /// Max over interior probe points of the scaled second difference.
    pub fn smoothness_probe(&self) -> T {
        let hp = T::lit(PROBE_STEP);
        (1..PROBE_POINTS)
            .map(|i| {
                let s = T::from_usize_lossy(i) / T::from_usize_lossy(PROBE_POINTS);
                let lo = self.at(s - hp);
                let mid = self.at(s);
                let hi = self.at(s + hp);
                let second = &(lo.matrix() + hi.matrix()) - &mid.matrix().scale(T::lit(2.0));
                second.max_abs() / (hp * hp)
            })
            .fold(T::zero(), |a, b| if b.is_nan() { T::nan() } else { a.max(b) })
    }

    /// Derivative of `f` at `s`: central in the interior, second-order
    /// one-sided within one step of either end.
    fn differentiate<F>(&self, s: T, f: F) -> Result<CMatrix<T>>
    where
        F: Fn(T) -> Result<CMatrix<T>>,
    {
        let h = self.step;
        let two_h = h + h;
        if s - h >= T::zero() && s + h <= T::one() {
            Ok((&f(s + h)? - &f(s - h)?).scale(two_h.recip()))
        } else if s - h < T::zero() {
            let (a, b, c) = (f(s)?, f(s + h)?, f(s + two_h)?);
            let num = &(&b.scale(T::lit(4.0)) - &a.scale(T::lit(3.0))) - &c;
            Ok(num.scale(two_h.recip()))
        } else {
            let (a, b, c) = (f(s)?, f(s - h)?, f(s - two_h)?);
            let num = &(&a.scale(T::lit(3.0)) - &b.scale(T::lit(4.0))) + &c;
            Ok(num.scale(two_h.recip()))
        }
    }

    /// `dH/ds`.
    pub fn h_dot(&self, s: T) -> Result<CMatrix<T>> {
        self.differentiate(s, |x| Ok(self.at(x).matrix().clone()))
    }

    /// `dτ/ds`.
    pub fn tau_dot(&self, s: T) -> Result<CMatrix<T>> {
        self.differentiate(s, |x| Ok(self.gibbs(x)?.matrix().clone()))
    }

    /// `Ḟ(s) = d/ds F(τ(s), H_S) = Tr(τ̇(s)(H_S − H(s)))`.
    pub fn free_energy_rate(&self, s: T, h_system: &HamiltonianMatrix<T>) -> Result<T> {
        let tau_dot = self.tau_dot(s)?;
        let diff = h_system.matrix() - self.at(s).matrix();
        Ok(tau_dot.trace_product_re(&diff))
    }
}

fn diag<T: Real>(levels: &[T]) -> HamiltonianMatrix<T> {
    HamiltonianMatrix::diagonal(levels).expect("real diagonal is Hermitian")
}

/// Qubit `diag(0, E(q))` with `E(q) = T ln((1−q)/q)` and `q` moving from
/// `q0` to `q1` along `profile`.
pub fn qubit_linear_q<T: Real>(q0: T, q1: T, temp: Temperature<T>, profile: Profile) -> Result<HamiltonianPath<T>> {
    for (name, q) in [("q0", q0), ("q1", q1)] {
        if !(q > T::zero() && q <= T::lit(0.5)) {
            return Err(Error::OutOfRange {
                name,
                value: q.as_f64(),
                range: "(0, 1/2]",
            });
        }
    }
    let t = temp.value();
    HamiltonianPath::new("qubit-linear-q", 2, temp, move |s: T| {
        let q = q0 + (q1 - q0) * profile.eval(s);
        diag(&[T::zero(), t * ((T::one() - q) / q).ln()])
    })
}

/// Qubit `diag(0, E(s))` with the gap moving from `e0` to `e1`.
pub fn qubit_gap_ramp<T: Real>(e0: T, e1: T, temp: Temperature<T>, profile: Profile) -> Result<HamiltonianPath<T>> {
    HamiltonianPath::new("qubit-gap-ramp", 2, temp, move |s: T| {
        diag(&[T::zero(), e0 + (e1 - e0) * profile.eval(s)])
    })
}

/// Diagonal `dim`-level path between two random spectra in `[0, 2T]`
/// drawn from `seed`.
pub fn random_diagonal<T: Real>(dim: usize, seed: u64, temp: Temperature<T>, profile: Profile) -> Result<HamiltonianPath<T>> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut draw = || -> Vec<T> { (0..dim).map(|_| T::lit(2.0 * rng.random::<f64>()) * temp.value()).collect() };
    let start = draw();
    let end = draw();
    HamiltonianPath::new(format!("random-diagonal-d{dim}"), dim, temp, move |s: T| {
        let g = profile.eval(s);
        let levels: Vec<T> = start.iter().zip(&end).map(|(&a, &b)| a + (b - a) * g).collect();
        diag(&levels)
    })
}

/// `H(s) = (1−g(s))·H₀ + g(s)·H₁`.
pub fn endpoint_pair<T: Real>(
    h0: HamiltonianMatrix<T>,
    h1: HamiltonianMatrix<T>,
    temp: Temperature<T>,
    profile: Profile,
) -> Result<HamiltonianPath<T>> {
    if h0.dim() != h1.dim() {
        return Err(Error::DimensionMismatch(h0.dim(), h1.dim()));
    }
    let dim = h0.dim();
    HamiltonianPath::new("endpoint-pair", dim, temp, move |s: T| {
        let g = profile.eval(s);
        h0.lincomb(T::one() - g, &h1, g).expect("matching dimensions")
    })
}

/// Cyclic, non-commuting qubit path: a field of strength `b` rotating once
/// in the x–z plane, `H(s) = (b/2)(cos 2πs σ_z + sin 2πs σ_x)`, offset so
/// the ground energy at `s = 0` is zero.
pub fn rotating_field<T: Real>(b: T, temp: Temperature<T>) -> Result<HamiltonianPath<T>> {
    let half = b * T::lit(0.5);
    HamiltonianPath::new("rotating-field", 2, temp, move |s: T| {
        let phase = T::TAU() * s;
        let (sn, cs) = phase.sin_cos();
        let c = |x: T| Complex::new(x, T::zero());
        let m = CMatrix::from_rows(vec![
            vec![c(half + half * cs), c(half * sn)],
            vec![c(half * sn), c(half - half * cs)],
        ])
        .expect("square");
        HamiltonianMatrix::new(m).expect("real symmetric")
    })
}
