//! Choice of the bath-contact duration `t_th` at fixed total time `𝒯`.
//!
//! With `N = 𝒯/t` contacts of relaxation `α(t)`, the leading-order
//! dissipation is `2Γ·G(t)/𝒯` where `G(t) = (1/2 + α/(1−α))·t`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::{run_cyclic_protocol, ChannelKind, CyclicProtocol, EvolutionMode};
use crate::qudit::{gamma_coefficient, HamiltonianPath, DEFAULT_PANELS};
use crate::scalar::Real;

/// Below this many contacts the asymptotic formula is not trusted.
pub const ASYMPTOTIC_MIN_STEPS: usize = 20;
/// Grid points with fewer contacts are excluded from simulation checks.
pub const VALIDATION_MIN_STEPS: usize = 100;

const SCAN_POINTS: usize = 256;
const MAX_GOLDEN_ITERATIONS: usize = 400;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum AlphaModel<T> {
    /// `α(t) = cos²(g t)`.
    CosineSq { g: T },
    /// `α(t) = e^{−t/τ_th}`.
    Exponential { tau_th: T },
    /// Monotone cubic interpolation through `(times, alphas)`, held constant
    /// outside the table.
    Tabulated { times: Vec<T>, alphas: Vec<T> },
}

impl<T: Real> AlphaModel<T> {
    pub fn cosine_sq(g: T) -> Result<Self> {
        positive("g", g)?;
        Ok(AlphaModel::CosineSq { g })
    }

    pub fn exponential(tau_th: T) -> Result<Self> {
        positive("tau_th", tau_th)?;
        Ok(AlphaModel::Exponential { tau_th })
    }

    pub fn tabulated(times: Vec<T>, alphas: Vec<T>) -> Result<Self> {
        if times.is_empty() || times.len() != alphas.len() {
            return Err(Error::DimensionMismatch(times.len(), alphas.len()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSchedule("tabulated times must be strictly increasing".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a >= T::zero() && **a <= T::one())) {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: a.as_f64(),
                range: "[0, 1]",
            });
        }
        Ok(AlphaModel::Tabulated { times, alphas })
    }

    pub fn alpha(&self, t: T) -> T {
        let a = match self {
            AlphaModel::CosineSq { g } => {
                let c = (*g * t).cos();
                c * c
            }
            AlphaModel::Exponential { tau_th } => (-t / *tau_th).exp(),
            AlphaModel::Tabulated { times, alphas } => pchip(times, alphas, t),
        };
        a.max(T::zero()).min(T::one())
    }

    /// Natural search window `(0, t_max]` for this model, if any.
    pub fn first_branch(&self) -> Option<T> {
        match self {
            AlphaModel::CosineSq { g } => Some(T::PI() / *g),
            _ => None,
        }
    }
}

fn positive<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value: v.as_f64(),
            range: "(0, inf)",
        })
    }
}

/// Fritsch–Carlson monotone cubic Hermite interpolation.
fn pchip<T: Real>(xs: &[T], ys: &[T], x: T) -> T {
    let n = xs.len();
    if n == 1 || x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let secant = |i: usize| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    let slope = |i: usize| -> T {
        if i == 0 {
            return secant(0);
        }
        if i == n - 1 {
            return secant(n - 2);
        }
        let (d0, d1) = (secant(i - 1), secant(i));
        if d0 * d1 <= T::zero() {
            return T::zero();
        }
        let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
        let w0 = T::lit(2.0) * h1 + h0;
        let w1 = h1 + T::lit(2.0) * h0;
        (w0 + w1) / (w0 / d0 + w1 / d1)
    };
    let h = xs[k + 1] - xs[k];
    let s = (x - xs[k]) / h;
    let (s2, s3) = (s * s, s * s * s);
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let h00 = two * s3 - three * s2 + T::one();
    let h10 = s3 - two * s2 + s;
    let h01 = three * s2 - two * s3;
    let h11 = s3 - s2;
    h00 * ys[k] + h10 * h * slope(k) + h01 * ys[k + 1] + h11 * h * slope(k + 1)
}

/// `G(t) = (1/2 + α(t)/(1−α(t)))·t`; `+∞` when `α(t) = 1`.
pub fn g_function<T: Real>(model: &AlphaModel<T>, t: T) -> Result<T> {
    positive("t", t)?;
    let a = model.alpha(t);
    if a >= T::one() {
        return Ok(T::infinity());
    }
    Ok((T::lit(0.5) + a / (T::one() - a)) * t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TthOptimum<T> {
    pub t_opt: T,
    pub g_opt: T,
    pub alpha_opt: T,
    /// `G` is monotone on the range and `t_opt` is a boundary.
    pub monotone: bool,
}

/// Minimizes `G` on `t_range` (clipped to the first branch for `CosineSq`)
/// by a grid scan followed by golden-section refinement to `|Δt| < tol`.
pub fn minimize_g<T: Real>(model: &AlphaModel<T>, t_range: (T, T), tol: T) -> Result<TthOptimum<T>> {
    let (mut lo, mut hi) = t_range;
    if let Some(end) = model.first_branch() {
        hi = hi.min(end);
    }
    positive("t_min", lo)?;
    positive("tol", tol)?;
    if !(hi > lo) {
        return Err(Error::InvalidSchedule("empty search range".into()));
    }

    let grid: Vec<T> = (0..=SCAN_POINTS)
        .map(|i| lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(SCAN_POINTS))
        .collect();
    let values: Vec<T> = grid.iter().map(|&t| g_function(model, t)).collect::<Result<_>>()?;
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    if increasing || decreasing {
        let t = if increasing { lo } else { hi };
        return optimum(model, t, true);
    }

    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v < values[b] { i } else { b });
    lo = grid[best.saturating_sub(1)];
    hi = grid[(best + 1).min(SCAN_POINTS)];

    let ratio = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = g_function(model, x1)?;
    let mut f2 = g_function(model, x2)?;
    for _ in 0..MAX_GOLDEN_ITERATIONS {
        if hi - lo < tol {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = g_function(model, x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = g_function(model, x2)?;
        }
    }
    optimum(model, (lo + hi) * T::lit(0.5), false)
}

fn optimum<T: Real>(model: &AlphaModel<T>, t: T, monotone: bool) -> Result<TthOptimum<T>> {
    Ok(TthOptimum {
        t_opt: t,
        g_opt: g_function(model, t)?,
        alpha_opt: model.alpha(t),
        monotone,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DissipationQuery<T> {
    pub model: AlphaModel<T>,
    pub gamma: T,
    pub total_time: T,
    pub t_range: (T, T),
}

impl<T: Real> DissipationQuery<T> {
    pub fn new(model: AlphaModel<T>, gamma: T, total_time: T, t_range: (T, T)) -> Result<Self> {
        positive("t_min", t_range.0)?;
        positive("total_time", total_time)?;
        if !(gamma >= T::zero()) {
            return Err(Error::OutOfRange {
                name: "gamma",
                value: gamma.as_f64(),
                range: "[0, inf)",
            });
        }
        if !(t_range.1 > t_range.0) {
            return Err(Error::InvalidSchedule("empty t range".into()));
        }
        Ok(Self {
            model,
            gamma,
            total_time,
            t_range,
        })
    }

    /// `N = 𝒯/t` rounded to the nearest integer, at least 1.
    pub fn steps(&self, t: T) -> usize {
        steps_for(self.total_time, t)
    }

    /// Whether `N = 𝒯/t` is large enough for the asymptotic formula.
    pub fn is_asymptotic(&self, t: T) -> bool {
        self.steps(t) >= ASYMPTOTIC_MIN_STEPS
    }
}

fn steps_for<T: Real>(total: T, t: T) -> usize {
    (total / t).round().to_usize().unwrap_or(usize::MAX).max(1)
}

/// `W_dis(t) = 2Γ·G(t)/𝒯`.
pub fn w_dis_of_tth<T: Real>(query: &DissipationQuery<T>, t: T) -> Result<T> {
    if !(t < query.total_time) {
        return Err(Error::OutOfRange {
            name: "t_th",
            value: t.as_f64(),
            range: "(0, total_time)",
        });
    }
    Ok(T::lit(2.0) * query.gamma * g_function(&query.model, t)? / query.total_time)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValidationRow<T> {
    pub t_th: T,
    pub n: usize,
    pub alpha: T,
    pub w_dis_formula: T,
    pub w_dis_exact: T,
    pub relative_deviation: T,
    /// `N` below the validation threshold; excluded from the pass check.
    pub flagged: bool,
}

/// Compares `2Γ·G(t)/𝒯` against the exact quench protocol with
/// `N = 𝒯/t` partial thermalizations of strength `α(t)` along `path`,
/// started from `τ(0)`.
pub fn validate_against_simulation<T: Real>(
    model: &AlphaModel<T>,
    path: &HamiltonianPath<T>,
    total_time: T,
    t_grid: &[T],
) -> Result<Vec<ValidationRow<T>>> {
    let gamma = gamma_coefficient(path, DEFAULT_PANELS)?;
    let query = DissipationQuery::new(model.clone(), gamma, total_time, (T::min_positive_value(), total_time))?;
    let rho0 = path.gibbs(T::zero())?;
    t_grid
        .par_iter()
        .map(|&t| {
            let formula = w_dis_of_tth(&query, t)?;
            let n = query.steps(t);
            let alpha = model.alpha(t);
            let channel = ChannelKind::partial_therm(alpha)?;
            let protocol =
                CyclicProtocol::open_segment(path.clone(), n, channel, EvolutionMode::Quench)?.with_contact_time(t);
            let exact = run_cyclic_protocol(&protocol, &rho0)?.breakdown.total;
            Ok(ValidationRow {
                t_th: t,
                n,
                alpha,
                w_dis_formula: formula,
                w_dis_exact: exact,
                relative_deviation: (exact - formula).abs() / formula,
                flagged: n < VALIDATION_MIN_STEPS,
            })
        })
        .collect()
}
