//! Qudit collision protocol driven by a Hamiltonian path `H(s)`: exact
//! N-step work sums and their large-N dissipation expansion.

mod path;

pub use path::{
    endpoint_pair, qubit_gap_ramp, qubit_linear_q, random_diagonal, rotating_field, HamiltonianPath, Profile,
    SMOOTHNESS_LIMIT,
};

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::collision::WorkLedger;
use crate::error::{check_range, Error, Result};
use crate::fit::linear_fit;
use crate::scalar::Real;
use crate::thermo::{free_energy, trace_distance, DensityOperator, HamiltonianMatrix};

/// States whose smallest eigenvalue is at least this are treated as full rank.
pub const FULL_RANK_THRESHOLD: f64 = 1e-8;
/// Required `‖τ(0) − ρ₀‖₁` for a full-rank start.
pub const MATCH_TOLERANCE: f64 = 1e-10;
/// Default Simpson panel count for Γ.
pub const DEFAULT_PANELS: usize = 256;

/// Whether the initial state can be matched by `τ(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum StartMode<T> {
    FullRank,
    /// `delta = ‖τ(0) − ρ₀‖₁`.
    RankDeficient { delta: T },
}

#[derive(Clone, Debug)]
pub struct QuditProtocolConfig<T> {
    pub path: HamiltonianPath<T>,
    pub h_system: HamiltonianMatrix<T>,
    pub rho0: DensityOperator<T>,
    pub n: usize,
    pub alpha: T,
    mode: StartMode<T>,
}

impl<T: Real> QuditProtocolConfig<T> {
    /// A full-rank `ρ₀` must coincide with `τ(0)`; a rank-deficient one
    /// records its distance δ from `τ(0)`.
    pub fn new(
        path: HamiltonianPath<T>,
        h_system: HamiltonianMatrix<T>,
        rho0: DensityOperator<T>,
        n: usize,
        alpha: T,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSchedule("N must be at least 1".into()));
        }
        check_range("alpha", alpha.as_f64(), 0.0, 1.0, "[0, 1)")?;
        if alpha >= T::one() {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: alpha.as_f64(),
                range: "[0, 1)",
            });
        }
        for d in [h_system.dim(), rho0.dim()] {
            if d != path.dim() {
                return Err(Error::DimensionMismatch(d, path.dim()));
            }
        }
        let delta = trace_distance(&path.gibbs(T::zero())?, &rho0)?;
        let mode = if rho0.min_eigenvalue() >= T::lit(FULL_RANK_THRESHOLD) {
            if !(delta < T::tol(MATCH_TOLERANCE)) {
                return Err(Error::Unsupported(format!(
                    "full-rank initial state must equal tau(0) (trace distance {:e})", delta.as_f64()
                )));
            }
            StartMode::FullRank
        } else {
            StartMode::RankDeficient { delta }
        };
        Ok(Self {
            path,
            h_system,
            rho0,
            n,
            alpha,
            mode,
        })
    }

    /// `ρ₀ = τ(0)` and `H_S = H(1)`.
    pub fn matched(path: HamiltonianPath<T>, n: usize, alpha: T) -> Result<Self> {
        let rho0 = path.gibbs(T::zero())?;
        let h_system = path.at(T::one());
        Self::new(path, h_system, rho0, n, alpha)
    }

    /// Same path, start and system Hamiltonian with different `N` and `α`.
    pub fn with(&self, n: usize, alpha: T) -> Result<Self> {
        Self::new(self.path.clone(), self.h_system.clone(), self.rho0.clone(), n, alpha)
    }

    #[inline]
    pub fn mode(&self) -> StartMode<T> {
        self.mode
    }

    fn s_at(&self, k: usize) -> T {
        T::from_usize_lossy(k) / T::from_usize_lossy(self.n)
    }

    /// `ΔF = F(ρ₀, H_S) − F(τ(1), H_S)`.
    pub fn free_energy_change(&self) -> Result<T> {
        let temp = self.path.temperature();
        let end = self.path.gibbs(T::one())?;
        Ok(free_energy(&self.rho0, &self.h_system, temp)? - free_energy(&end, &self.h_system, temp)?)
    }
}

/// States `ρ_0..ρ_N` and the work ledger of one run.
#[derive(Clone, Debug)]
pub struct QuditRun<T> {
    pub states: Vec<DensityOperator<T>>,
    pub ledger: WorkLedger<T>,
}

/// `ρ_k = α ρ_{k−1} + (1−α) τ(k/N)`, with step work
/// `(1−α) Tr[(H(k/N) − H_S)(τ(k/N) − ρ_{k−1})]`.
pub fn run_qudit_protocol<T: Real>(config: &QuditProtocolConfig<T>) -> Result<QuditRun<T>> {
    run_from(config, &config.rho0, config.n)
}

fn run_from<T: Real>(config: &QuditProtocolConfig<T>, rho0: &DensityOperator<T>, steps: usize) -> Result<QuditRun<T>> {
    let alpha = config.alpha;
    let r = T::one() - alpha;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(rho0.clone());
    let mut per_step = Vec::with_capacity(steps);
    for k in 1..=steps {
        let s = config.s_at(k);
        let h = config.path.at(s);
        let tau = config.path.gibbs(s)?;
        let prev = states.last().expect("non-empty");
        let gap = h.matrix() - config.h_system.matrix();
        let lag = tau.matrix() - prev.matrix();
        per_step.push(r * gap.trace_product_re(&lag));
        let next = prev.mix(alpha, &tau).map_err(|e| Error::Numerical {
            op: "run_qudit_protocol",
            detail: format!("state {k} invalid: {e}"),
        })?;
        states.push(next);
    }
    Ok(QuditRun {
        states,
        ledger: WorkLedger::deterministic(per_step, T::zero()),
    })
}

fn require_full_rank<T: Real>(config: &QuditProtocolConfig<T>, op: &str) -> Result<()> {
    match config.mode {
        StartMode::FullRank => Ok(()),
        StartMode::RankDeficient { .. } => Err(Error::Unsupported(format!(
            "{op} needs a full-rank start; use rank_deficient_scaling"
        ))),
    }
}

/// `‖ρ_k − τ(k/N) + α/(N(1−α)) τ̇(k/N)‖₁`, the residual after the
/// first-order lag correction. Requires `√N ≤ k ≤ N`.
pub fn lag_deviation<T: Real>(config: &QuditProtocolConfig<T>, k: usize) -> Result<T> {
    require_full_rank(config, "lag_deviation")?;
    let min_k = (config.n as f64).sqrt().ceil() as usize;
    if k < min_k || k > config.n {
        return Err(Error::OutOfRange {
            name: "k",
            value: k as f64,
            range: "[sqrt(N), N]",
        });
    }
    let run = run_from(config, &config.rho0, k)?;
    let s = config.s_at(k);
    let tau = config.path.gibbs(s)?;
    let coef = config.alpha / (T::from_usize_lossy(config.n) * (T::one() - config.alpha));
    let corrected = &(run.states[k].matrix() - tau.matrix()) + &config.path.tau_dot(s)?.scale(coef);
    Ok(corrected.trace_norm_hermitian())
}

/// `f(λ) = −Tr(τ̇(λ) Ḣ(λ))` without the interior-point check.
fn f_raw<T: Real>(path: &HamiltonianPath<T>, s: T) -> Result<T> {
    Ok(-path.tau_dot(s)?.trace_product_re(&path.h_dot(s)?))
}

fn check_interior<T: Real>(lambda: T) -> Result<()> {
    if lambda > T::zero() && lambda < T::one() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "lambda",
            value: lambda.as_f64(),
            range: "(0, 1)",
        })
    }
}

/// `f(λ) = −Tr(τ̇(λ) Ḣ(λ))`.
pub fn f_lambda<T: Real>(path: &HamiltonianPath<T>, lambda: T) -> Result<T> {
    check_interior(lambda)?;
    f_raw(path, lambda)
}

/// `T · d²/dx² S(τ(λ+x) ‖ τ(λ))` at `x = 0`, by a central second
/// difference with step `x`.
pub fn f_lambda_relative_entropy<T: Real>(path: &HamiltonianPath<T>, lambda: T, x: T) -> Result<T> {
    check_interior(lambda)?;
    if lambda - x < T::zero() || lambda + x > T::one() {
        return Err(Error::OutOfRange {
            name: "lambda ± x",
            value: lambda.as_f64(),
            range: "[x, 1 − x]",
        });
    }
    let centre = path.gibbs(lambda)?;
    let plus = crate::thermo::relative_entropy(&path.gibbs(lambda + x)?, &centre)?;
    let minus = crate::thermo::relative_entropy(&path.gibbs(lambda - x)?, &centre)?;
    Ok(path.temperature().value() * (plus + minus) / (x * x))
}

fn simpson<T: Real>(values: &[T]) -> T {
    let m = values.len() - 1;
    let h = T::from_usize_lossy(m).recip();
    let mut acc = values[0] + values[m];
    for (i, &v) in values.iter().enumerate().take(m).skip(1) {
        acc += v * if i % 2 == 1 { T::lit(4.0) } else { T::lit(2.0) };
    }
    acc * h / T::lit(3.0)
}

/// `Γ = ½ ∫₀¹ f(s) ds` by composite Simpson with `panels` panels (rounded up
/// to even, at least 8), doubled until successive estimates agree to 1e-9.
pub fn gamma_coefficient<T: Real>(path: &HamiltonianPath<T>, panels: usize) -> Result<T> {
    let mut m = panels.max(8);
    m += m % 2;
    let sample = |m: usize| -> Result<Vec<T>> {
        (0..=m)
            .into_par_iter()
            .map(|i| f_raw(path, T::from_usize_lossy(i) / T::from_usize_lossy(m)))
            .collect()
    };
    let mut values = sample(m)?;
    let mut estimate = simpson(&values);
    for _ in 0..6 {
        let fine = 2 * m;
        let odd: Vec<T> = (0..m)
            .into_par_iter()
            .map(|i| f_raw(path, T::from_usize_lossy(2 * i + 1) / T::from_usize_lossy(fine)))
            .collect::<Result<_>>()?;
        let mut merged = Vec::with_capacity(fine + 1);
        for (i, &v) in values.iter().enumerate() {
            merged.push(v);
            if i < m {
                merged.push(odd[i]);
            }
        }
        let refined = simpson(&merged);
        let change = (refined - estimate).abs();
        values = merged;
        m = fine;
        estimate = refined;
        if change < T::tol(1e-9) {
            break;
        }
    }
    Ok(estimate * T::lit(0.5))
}

/// Fit of `N·W_dis` against `x = α/(1−α)` at fixed N.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LambdaFit<T> {
    /// Intercept, the `α = 0` coefficient Γ.
    pub gamma: T,
    /// Slope Λ.
    pub lambda: T,
    pub ratio: T,
    /// Max relative deviation of `N·W_dis / (1 + 2x)` from its mean.
    pub collapse_residual: T,
}

/// Runs the protocol at each α in `alphas` and fits `N·W_dis = Γ + Λ x`.
pub fn fit_lambda_over_gamma<T: Real>(config: &QuditProtocolConfig<T>, alphas: &[T]) -> Result<LambdaFit<T>> {
    require_full_rank(config, "fit_lambda_over_gamma")?;
    let df = config.free_energy_change()?;
    let n = T::from_usize_lossy(config.n);
    let scaled: Vec<T> = alphas
        .par_iter()
        .map(|&a| -> Result<T> {
            let run = run_qudit_protocol(&config.with(config.n, a)?)?;
            Ok(n * (df - run.ledger.cumulative_work))
        })
        .collect::<Result<_>>()?;
    let xs: Vec<T> = alphas.iter().map(|&a| a / (T::one() - a)).collect();
    let fit = linear_fit(&xs, &scaled).ok_or_else(|| Error::Numerical {
        op: "fit_lambda_over_gamma",
        detail: "need at least two distinct alphas".into(),
    })?;
    let collapsed: Vec<T> = xs
        .iter()
        .zip(&scaled)
        .map(|(&x, &y)| y / (T::one() + T::lit(2.0) * x))
        .collect();
    let mean = collapsed.iter().copied().sum::<T>() / T::from_usize_lossy(collapsed.len());
    let collapse_residual = collapsed
        .iter()
        .map(|&c| ((c - mean) / mean).abs())
        .fold(T::zero(), T::max);
    Ok(LambdaFit {
        gamma: fit.intercept,
        lambda: fit.slope,
        ratio: fit.slope / fit.intercept,
        collapse_residual,
    })
}

/// α grid used for the Λ/Γ fit inside [`asymptotic_dissipation`].
pub const LAMBDA_FIT_ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 0.9];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticReport<T> {
    pub prediction: T,
    pub exact: T,
    pub gamma: T,
    pub f_dot_start: T,
    pub f_dot_end: T,
    /// Present when both endpoint rates vanish.
    pub lambda_over_gamma: Option<T>,
}

/// Leading-order dissipation
/// `Γ/N·(1 + 2α/(1−α)) + α/(N(1−α))·(Ḟ(1) − 2Ḟ(0₊))` against the exact
/// `ΔF − W` of the run.
pub fn asymptotic_dissipation<T: Real>(config: &QuditProtocolConfig<T>) -> Result<AsymptoticReport<T>> {
    require_full_rank(config, "asymptotic_dissipation")?;
    let gamma = gamma_coefficient(&config.path, DEFAULT_PANELS)?;
    let f0 = config.path.free_energy_rate(T::zero(), &config.h_system)?;
    let f1 = config.path.free_energy_rate(T::one(), &config.h_system)?;
    let prediction = predicted_dissipation(gamma, f0, f1, config.n, config.alpha);
    let run = run_qudit_protocol(config)?;
    let exact = config.free_energy_change()? - run.ledger.cumulative_work;
    let flat = T::lit(1e-7) * gamma.max(T::one());
    let lambda_over_gamma = if f0.abs() <= flat && f1.abs() <= flat {
        let alphas: Vec<T> = LAMBDA_FIT_ALPHAS.iter().map(|&a| T::lit(a)).collect();
        Some(fit_lambda_over_gamma(config, &alphas)?.ratio)
    } else {
        None
    };
    Ok(AsymptoticReport {
        prediction,
        exact,
        gamma,
        f_dot_start: f0,
        f_dot_end: f1,
        lambda_over_gamma,
    })
}

/// The leading-order formula on its own.
pub fn predicted_dissipation<T: Real>(gamma: T, f_dot_start: T, f_dot_end: T, n: usize, alpha: T) -> T {
    let n = T::from_usize_lossy(n);
    let x = alpha / (T::one() - alpha);
    gamma / n * (T::one() + T::lit(2.0) * x) + x / n * (f_dot_end - T::lit(2.0) * f_dot_start)
}

type PathFamily<T> = Arc<dyn Fn(T) -> Result<HamiltonianPath<T>> + Send + Sync>;

/// A rank-deficient start with a δ-dependent path family whose `τ(0)`
/// sits at trace distance δ from `rho0`.
#[derive(Clone)]
pub struct RankDeficientBase<T> {
    pub rho0: DensityOperator<T>,
    pub alpha: T,
    family: PathFamily<T>,
}

impl<T: Real> RankDeficientBase<T> {
    pub fn new<F>(rho0: DensityOperator<T>, alpha: T, family: F) -> Result<Self>
    where
        F: Fn(T) -> Result<HamiltonianPath<T>> + Send + Sync + 'static,
    {
        if rho0.min_eigenvalue() >= T::lit(FULL_RANK_THRESHOLD) {
            return Err(Error::Unsupported(
                "initial state has full rank; use asymptotic_dissipation".into(),
            ));
        }
        Ok(Self {
            rho0,
            alpha,
            family: Arc::new(family),
        })
    }

    /// Erasure qubit: `ρ₀ = |0⟩⟨0|`, `H_S = 0`, and `q` linear in `s` from
    /// `δ/2` to 1/2, so that `‖τ(0) − ρ₀‖₁ = δ`.
    pub fn erasure_qubit(alpha: T, temp: crate::thermo::Temperature<T>) -> Result<Self> {
        let rho0 = DensityOperator::from_populations(&[T::one(), T::zero()])?;
        Self::new(rho0, alpha, move |delta: T| {
            qubit_linear_q(delta * T::lit(0.5), T::lit(0.5), temp, Profile::Linear)
        })
    }

    pub fn path(&self, delta: T) -> Result<HamiltonianPath<T>> {
        (self.family)(delta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RankDeficientRow<T> {
    pub delta: T,
    pub n: usize,
    pub w_dis: T,
    /// `W(ρ₀) − W(τ(0))`: the work difference caused by the mismatched start.
    pub w0: T,
    /// `δ · max_s ‖H(s) − H_S‖_∞` on a 1001-point grid.
    pub w0_bound: T,
}

/// One row per δ with `N = round(1/δ)` steps and `H_S = H(1)`.
pub fn rank_deficient_scaling<T: Real>(base: &RankDeficientBase<T>, deltas: &[T]) -> Result<Vec<RankDeficientRow<T>>> {
    deltas
        .par_iter()
        .map(|&delta| {
            if !(delta > T::zero() && delta <= T::one()) {
                return Err(Error::OutOfRange {
                    name: "delta",
                    value: delta.as_f64(),
                    range: "(0, 1]",
                });
            }
            let n = delta.recip().round().to_usize().unwrap_or(1).max(1);
            let path = base.path(delta)?;
            let h_system = path.at(T::one());
            let config = QuditProtocolConfig::new(path.clone(), h_system.clone(), base.rho0.clone(), n, base.alpha)?;
            let run = run_qudit_protocol(&config)?;
            let w_dis = config.free_energy_change()? - run.ledger.cumulative_work;
            let matched = run_from(&config, &path.gibbs(T::zero())?, n)?;
            let w0 = run.ledger.cumulative_work - matched.ledger.cumulative_work;
            let max_norm = (0..=1000)
                .map(|i| {
                    let s = T::from_usize_lossy(i) / T::lit(1000.0);
                    (path.at(s).matrix() - h_system.matrix()).operator_norm()
                })
                .fold(T::zero(), T::max);
            let measured_delta = match config.mode() {
                StartMode::RankDeficient { delta } => delta,
                StartMode::FullRank => unreachable!("base rejects full-rank starts"),
            };
            Ok(RankDeficientRow {
                delta,
                n,
                w_dis,
                w0,
                w0_bound: measured_delta * max_norm,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::Temperature;

    fn bits() -> Temperature<f64> {
        Temperature::bit_units()
    }

    fn linear_q(profile: Profile) -> HamiltonianPath<f64> {
        qubit_linear_q(0.1, 0.5, bits(), profile).unwrap()
    }

    #[test]
    fn perfect_thermalization_tracks_gibbs() {
        let cfg = QuditProtocolConfig::matched(linear_q(Profile::Linear), 20, 0.0).unwrap();
        let run = run_qudit_protocol(&cfg).unwrap();
        for k in 1..=20 {
            let tau = cfg.path.gibbs(k as f64 / 20.0).unwrap();
            assert!((&run.states[k].matrix().clone() - tau.matrix()).max_abs() < 1e-15);
        }
    }

    #[test]
    fn single_step_work() {
        let path = random_diagonal(3, 5, bits(), Profile::Linear).unwrap();
        let cfg = QuditProtocolConfig::matched(path, 1, 0.3).unwrap();
        let run = run_qudit_protocol(&cfg).unwrap();
        let tau1 = cfg.path.gibbs(1.0).unwrap();
        let gap = cfg.path.at(1.0).matrix() - cfg.h_system.matrix();
        let expected = 0.7 * gap.trace_product_re(&(tau1.matrix() - cfg.rho0.matrix()));
        assert!((run.ledger.cumulative_work - expected).abs() < 1e-15);
    }

    #[test]
    fn lag_correction_vanishes_without_noise() {
        let cfg = QuditProtocolConfig::matched(linear_q(Profile::Linear), 100, 0.0).unwrap();
        assert!(lag_deviation(&cfg, 50).unwrap() < 1e-12);
        assert!(lag_deviation(&cfg, 5).is_err());
    }

    #[test]
    fn constant_path_has_no_dissipation_coefficients() {
        let path = qubit_gap_ramp(1.0, 1.0, bits(), Profile::Linear).unwrap();
        assert_eq!(gamma_coefficient(&path, 16).unwrap(), 0.0);
        assert_eq!(f_lambda(&path, 0.5).unwrap(), 0.0);
        assert!(f_lambda(&path, 0.0).is_err());
    }

    #[test]
    fn commuting_gamma_matches_scalar_integral() {
        let (e0, e1) = (0.4, 2.5);
        let t = 0.9;
        let path = qubit_gap_ramp(e0, e1, Temperature::new(t).unwrap(), Profile::Linear).unwrap();
        // Scalar oracle: f = −q'(s) E'(s) with q the logistic excitation.
        let de = e1 - e0;
        let n = 20_000;
        let f = |s: f64| {
            let e = e0 + de * s;
            let q = 1.0 / (1.0 + (e / t).exp());
            q * (1.0 - q) * de * de / t
        };
        let h = 1.0 / n as f64;
        let integral: f64 = (0..n).map(|i| f((i as f64 + 0.5) * h) * h).sum();
        let gamma = gamma_coefficient(&path, 64).unwrap();
        assert!((gamma - 0.5 * integral).abs() < 1e-8);
    }

    #[test]
    fn f_lambda_two_routes_agree() {
        let path = linear_q(Profile::Linear);
        for &lam in &[0.2, 0.5, 0.8] {
            let direct = f_lambda(&path, lam).unwrap();
            let via_s = f_lambda_relative_entropy(&path, lam, 1e-3).unwrap();
            assert!((direct - via_s).abs() <= 1e-4f64.max(1e-3 * direct.abs()));
        }
    }

    #[test]
    fn full_rank_mismatch_rejected() {
        let path = linear_q(Profile::Linear);
        let rho = DensityOperator::from_populations(&[0.5, 0.5]).unwrap();
        let h = path.at(1.0);
        assert!(QuditProtocolConfig::new(path, h, rho, 10, 0.5).is_err());
    }

    #[test]
    fn rank_deficient_guards() {
        let full = DensityOperator::from_populations(&[0.6, 0.4]).unwrap();
        let temp = bits();
        assert!(RankDeficientBase::new(full, 0.5, move |d: f64| {
            qubit_linear_q(d, 0.5, temp, Profile::Linear)
        })
        .is_err());
        let base = RankDeficientBase::erasure_qubit(0.5, bits()).unwrap();
        assert!(rank_deficient_scaling(&base, &[0.0]).is_err());
        let cfg = QuditProtocolConfig::new(
            base.path(0.01).unwrap(),
            HamiltonianMatrix::zero(2),
            base.rho0.clone(),
            100,
            0.5,
        )
        .unwrap();
        assert!(asymptotic_dissipation(&cfg).is_err());
        assert!(matches!(cfg.mode(), StartMode::RankDeficient { delta } if (delta - 0.01).abs() < 1e-12));
    }
}
