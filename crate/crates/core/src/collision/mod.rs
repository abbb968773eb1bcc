//! Qubit collision model: a system bit swept through a staircase of bath
//! qubits with partial thermalization at every contact.
//!
//! Work sign convention: a swap that moves the system bit 0→1 deposits
//! `E_k − ε_S` into the ledger, the reverse transition withdraws it.

mod exact;
mod reduction;
mod sampling;

pub use exact::{
    average_work, enumerate_work_paths, epsilon_upper_bound, excitation_closed_form, excitation_probabilities,
    free_energy_change, linear_schedule_excitation, loss_epsilon, work_moments, ExactDistribution, ENUMERATION_CAP,
};
pub use reduction::{doublet_swap, reduce_thermal_operation, thermal_op_reduction_check, ReducedOutcome, ReductionReport};
pub use sampling::{sample_work, sample_work_values, simulate_random_alpha, RandomAlphaReport, DEFAULT_BINS};

use serde::Serialize;

use crate::error::{check_range, Error, Result};
use crate::scalar::Real;
use crate::thermo::Temperature;

/// Excitation probabilities `q_0..q_N` of the bath staircase and the
/// matching energies `E_k = T ln((1−q_k)/q_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BathSchedule<T> {
    q: Vec<T>,
    energies: Vec<T>,
    temp: Temperature<T>,
    linear: bool,
}

impl<T: Real> BathSchedule<T> {
    /// `q` must be strictly increasing with `q_0 ∈ [0, 1)` and every later
    /// entry in (0, 1). A zero `q_0` gives `E_0 = +∞`.
    pub fn new(q: Vec<T>, temp: Temperature<T>) -> Result<Self> {
        if q.len() < 2 {
            return Err(Error::InvalidSchedule("need at least q_0 and q_1".into()));
        }
        check_range("q_0", q[0].as_f64(), 0.0, 1.0, "[0, 1)")?;
        if q[0] >= T::one() {
            return Err(Error::InvalidSchedule("q_0 must be below 1".into()));
        }
        for (k, &qk) in q.iter().enumerate().skip(1) {
            if !(qk > T::zero() && qk < T::one()) {
                return Err(Error::InvalidSchedule(format!("q_{k} = {qk} outside (0, 1)")));
            }
        }
        if let Some(k) = (1..q.len()).find(|&k| !(q[k] > q[k - 1])) {
            return Err(Error::InvalidSchedule(format!("q not strictly increasing at k = {k}")));
        }
        let energies = q
            .iter()
            .map(|&qk| {
                if qk == T::zero() {
                    T::infinity()
                } else {
                    temp.value() * ((T::one() - qk) / qk).ln()
                }
            })
            .collect();
        Ok(Self {
            q,
            energies,
            temp,
            linear: false,
        })
    }

    /// `q_k = k/2N`, ending at the maximally mixed bath qubit.
    pub fn linear(n: usize, temp: Temperature<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSchedule("N must be at least 1".into()));
        }
        let two_n = T::from_usize_lossy(2 * n);
        let q = (0..=n).map(|k| T::from_usize_lossy(k) / two_n).collect();
        let energies = (0..=n)
            .map(|k| {
                if k == 0 {
                    T::infinity()
                } else {
                    temp.value() * (T::from_usize_lossy(2 * n - k) / T::from_usize_lossy(k)).ln()
                }
            })
            .collect();
        Ok(Self {
            q,
            energies,
            temp,
            linear: true,
        })
    }

    /// `n` equal increments from `q_start` to `q_end`.
    pub fn linear_between(q_start: T, q_end: T, n: usize, temp: Temperature<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSchedule("N must be at least 1".into()));
        }
        let step = (q_end - q_start) / T::from_usize_lossy(n);
        let mut q: Vec<T> = (0..=n).map(|k| q_start + step * T::from_usize_lossy(k)).collect();
        q[n] = q_end;
        Self::new(q, temp)
    }

    /// Number of collision steps N.
    #[inline]
    pub fn n_steps(&self) -> usize {
        self.q.len() - 1
    }

    #[inline]
    pub fn q(&self) -> &[T] {
        &self.q
    }

    /// Raw energies including a possible `+∞` at `k = 0`.
    #[inline]
    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    /// `E_k`. Panics if the entry is the infinite sentinel.
    #[inline]
    pub fn energy(&self, k: usize) -> T {
        let e = self.energies[k];
        assert!(e.is_finite(), "E_{k} is the q = 0 sentinel and carries no work term");
        e
    }

    #[inline]
    pub fn temperature(&self) -> Temperature<T> {
        self.temp
    }

    /// Built by [`BathSchedule::linear`].
    #[inline]
    pub fn is_linear(&self) -> bool {
        self.linear
    }
}

/// Shorthand for [`BathSchedule::linear`].
pub fn make_linear_schedule<T: Real>(n: usize, temp: Temperature<T>) -> Result<BathSchedule<T>> {
    BathSchedule::linear(n, temp)
}

/// Distribution of per-step random α_k. Only families with a closed-form
/// mean are offered.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaDistribution<T> {
    Uniform { lo: T, hi: T },
    TwoPoint { low: T, high: T, p_high: T },
}

impl<T: Real> AlphaDistribution<T> {
    pub fn mean(&self) -> T {
        match *self {
            Self::Uniform { lo, hi } => (lo + hi) * T::lit(0.5),
            Self::TwoPoint { low, high, p_high } => low * (T::one() - p_high) + high * p_high,
        }
    }

    /// Maps a uniform draw `u ∈ [0, 1)` to α.
    #[inline]
    pub fn draw(&self, u: T) -> T {
        match *self {
            Self::Uniform { lo, hi } => lo + (hi - lo) * u,
            Self::TwoPoint { low, high, p_high } => {
                if u < p_high {
                    high
                } else {
                    low
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Uniform { lo, hi } => {
                check_range("alpha_lo", lo.as_f64(), 0.0, 1.0, "[0, 1]")?;
                check_range("alpha_hi", hi.as_f64(), 0.0, 1.0, "[0, 1]")?;
                if lo > hi {
                    return Err(Error::Unsupported(format!("uniform alpha bounds reversed: {lo} > {hi}")));
                }
            }
            Self::TwoPoint { low, high, p_high } => {
                check_range("alpha_low", low.as_f64(), 0.0, 1.0, "[0, 1]")?;
                check_range("alpha_high", high.as_f64(), 0.0, 1.0, "[0, 1]")?;
                check_range("p_high", p_high.as_f64(), 0.0, 1.0, "[0, 1]")?;
            }
        }
        if !(self.mean() < T::one()) {
            return Err(Error::OutOfRange {
                name: "mean_alpha",
                value: self.mean().as_f64(),
                range: "[0, 1)",
            });
        }
        Ok(())
    }
}

/// How strongly each bath contact fails to thermalize.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel<T> {
    /// Every contact has the same α. α = 1 (no interaction) is accepted.
    Fixed { alpha: T },
    /// Independent α_k per step; `seed` drives the α stream.
    Random { dist: AlphaDistribution<T>, seed: u64 },
}

impl<T: Real> NoiseModel<T> {
    pub fn fixed(alpha: T) -> Self {
        Self::Fixed { alpha }
    }

    pub fn mean_alpha(&self) -> T {
        match self {
            Self::Fixed { alpha } => *alpha,
            Self::Random { dist, .. } => dist.mean(),
        }
    }

    pub(crate) fn fixed_alpha(&self, op: &str) -> Result<T> {
        match self {
            Self::Fixed { alpha } => Ok(*alpha),
            Self::Random { .. } => Err(Error::Unsupported(format!(
                "{op} needs a fixed alpha; use simulate_random_alpha for random noise"
            ))),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Fixed { alpha } => check_range("alpha", alpha.as_f64(), 0.0, 1.0, "[0, 1]"),
            Self::Random { dist, .. } => dist.validate(),
        }
    }
}

/// Initial excitation `p0`, system gap `ε_S`, bath staircase and noise.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitProtocolConfig<T> {
    pub p0: T,
    pub eps_s: T,
    pub schedule: BathSchedule<T>,
    pub noise: NoiseModel<T>,
}

impl<T: Real> QubitProtocolConfig<T> {
    pub fn new(p0: T, eps_s: T, schedule: BathSchedule<T>, noise: NoiseModel<T>) -> Result<Self> {
        check_range("p0", p0.as_f64(), 0.0, 1.0, "[0, 1]")?;
        if !eps_s.is_finite() {
            return Err(Error::OutOfRange {
                name: "eps_s",
                value: eps_s.as_f64(),
                range: "finite",
            });
        }
        noise.validate()?;
        Ok(Self {
            p0,
            eps_s,
            schedule,
            noise,
        })
    }

    /// Information-to-energy conversion: `p0 = 0`, `ε_S = 0`, `q_k = k/2N`.
    pub fn canonical(n: usize, alpha: T, temp: Temperature<T>) -> Result<Self> {
        Self::new(T::zero(), T::zero(), BathSchedule::linear(n, temp)?, NoiseModel::fixed(alpha))
    }

    pub fn is_canonical(&self) -> bool {
        self.p0 == T::zero() && self.eps_s == T::zero() && self.schedule.is_linear()
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.schedule.n_steps()
    }

    /// `ω_k = E_k − ε_S` for k = 1..N (index 0 of the result is step 1).
    pub fn step_gaps(&self) -> Vec<T> {
        (1..=self.n_steps()).map(|k| self.schedule.energy(k) - self.eps_s).collect()
    }
}

/// Equal-width histogram.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram<T> {
    pub edges: Vec<T>,
    pub counts: Vec<u64>,
}

impl<T: Real> Histogram<T> {
    /// `bins` equal bins spanning the sample range; a degenerate range is
    /// widened to ±0.5 around the single value.
    pub fn from_samples(values: &[T], bins: usize) -> Self {
        let bins = bins.max(1);
        let (mut lo, mut hi) = values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(l, h), &v| (l.min(v), h.max(v)));
        if values.is_empty() {
            lo = T::zero();
            hi = T::one();
        } else if hi - lo <= T::epsilon() * lo.abs().max(T::one()) {
            lo -= T::lit(0.5);
            hi += T::lit(0.5);
        }
        let width = (hi - lo) / T::from_usize_lossy(bins);
        let edges = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + width * T::from_usize_lossy(i) })
            .collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let idx = ((v - lo) / width).floor().to_usize().unwrap_or(0).min(bins - 1);
            counts[idx] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Work bookkeeping for one protocol: per-step contributions, totals and
/// (for sampled runs) the empirical distribution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorkLedger<T> {
    pub per_step_work: Vec<T>,
    pub cumulative_work: T,
    pub mean: T,
    pub variance: T,
    pub histogram: Option<Histogram<T>>,
    pub sample_count: Option<u64>,
}

impl<T: Real> WorkLedger<T> {
    pub(crate) fn deterministic(per_step_work: Vec<T>, variance: T) -> Self {
        let total = neumaier_sum(&per_step_work);
        Self {
            per_step_work,
            cumulative_work: total,
            mean: total,
            variance: variance.max(T::zero()),
            histogram: None,
            sample_count: None,
        }
    }

    pub fn std_dev(&self) -> T {
        self.variance.sqrt()
    }

    /// σ/√n for sampled ledgers; zero for exact ones.
    pub fn standard_error(&self) -> T {
        match self.sample_count {
            Some(n) if n > 0 => (self.variance / T::lit(n as f64)).sqrt(),
            _ => T::zero(),
        }
    }
}

/// Compensated summation.
pub(crate) fn neumaier_sum<T: Real>(values: &[T]) -> T {
    let mut sum = T::zero();
    let mut c = T::zero();
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
