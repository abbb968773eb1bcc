use super::{neumaier_sum, QubitProtocolConfig, WorkLedger};
use crate::error::{check_range, Error, Result};
use crate::scalar::Real;
use crate::thermo::Temperature;

/// Largest N accepted by [`enumerate_work_paths`] (2^N paths per initial bit).
pub const ENUMERATION_CAP: usize = 20;

/// `p_k = α p_{k−1} + (1−α) q_k`, `k = 0..N`.
pub fn excitation_probabilities<T: Real>(config: &QubitProtocolConfig<T>) -> Result<Vec<T>> {
    let alpha = config.noise.fixed_alpha("excitation_probabilities")?;
    let r = T::one() - alpha;
    let q = config.schedule.q();
    let mut p = Vec::with_capacity(q.len());
    p.push(config.p0);
    for k in 1..q.len() {
        let prev = p[k - 1];
        p.push(alpha * prev + r * q[k]);
    }
    Ok(p)
}

/// `p_k = (1−α) Σ_{i≤k} α^{k−i} q_i + α^k p_0`, evaluated term by term.
/// Quadratic in N; intended as a cross-check.
pub fn excitation_closed_form<T: Real>(config: &QubitProtocolConfig<T>) -> Result<Vec<T>> {
    let alpha = config.noise.fixed_alpha("excitation_closed_form")?;
    let r = T::one() - alpha;
    let q = config.schedule.q();
    let mut out = Vec::with_capacity(q.len());
    for k in 0..q.len() {
        let mut acc = T::zero();
        let mut power = T::one();
        for i in (1..=k).rev() {
            acc += power * q[i];
            power *= alpha;
        }
        out.push(r * acc + power * config.p0);
    }
    Ok(out)
}

/// Excitation after step k of the canonical protocol on `q_k = k/2N`:
/// `q_k − α(1−α^k)/((1−α)·2N)`.
pub fn linear_schedule_excitation<T: Real>(n: usize, alpha: T, k: usize) -> T {
    let two_n = T::from_usize_lossy(2 * n);
    let qk = T::from_usize_lossy(k) / two_n;
    if alpha == T::one() {
        return T::zero();
    }
    let geometric = alpha * (T::one() - alpha.powi(k as i32)) / (T::one() - alpha);
    qk - geometric / two_n
}

/// Mean extracted work, step by step: `(1−α)(E_k − ε_S)(q_k − p_{k−1})`.
/// The variance is filled in from [`work_moments`].
pub fn average_work<T: Real>(config: &QubitProtocolConfig<T>) -> Result<WorkLedger<T>> {
    let alpha = config.noise.fixed_alpha("average_work")?;
    let r = T::one() - alpha;
    let p = excitation_probabilities(config)?;
    let q = config.schedule.q();
    let per_step: Vec<T> = config
        .step_gaps()
        .into_iter()
        .enumerate()
        .map(|(i, omega)| r * omega * (q[i + 1] - p[i]))
        .collect();
    let variance = work_moments(config)?.variance;
    Ok(WorkLedger::deterministic(per_step, variance))
}

/// Mean and variance in O(N) from four running scalars: `p`, `⟨W⟩`, `⟨W²⟩`
/// and `c = E[W·1{bit = 1}]`.
pub fn work_moments<T: Real>(config: &QubitProtocolConfig<T>) -> Result<WorkLedger<T>> {
    let alpha = config.noise.fixed_alpha("work_moments")?;
    let r = T::one() - alpha;
    let q = config.schedule.q();
    let two = T::lit(2.0);
    let (mut p, mut m, mut s, mut c) = (config.p0, T::zero(), T::zero(), T::zero());
    let mut per_step = Vec::with_capacity(config.n_steps());
    for (i, omega) in config.step_gaps().into_iter().enumerate() {
        let qk = q[i + 1];
        let dm = r * omega * (qk - p);
        let s_next = s + two * r * omega * (qk * m - c) + r * omega * omega * (qk + p - two * qk * p);
        let c_next = alpha * c + r * qk * (m + (T::one() - p) * omega);
        p = alpha * p + r * qk;
        m += dm;
        s = s_next;
        c = c_next;
        per_step.push(dm);
    }
    let mut ledger = WorkLedger::deterministic(per_step, s - m * m);
    ledger.mean = m;
    Ok(ledger)
}

/// `F(ρ_0, H_S) − F(τ(q_N), H_S)` for the diagonal qubit with gap `ε_S`.
pub fn free_energy_change<T: Real>(config: &QubitProtocolConfig<T>) -> T {
    let t = config.schedule.temperature().value();
    let f = |p: T| p * config.eps_s - t * binary_entropy(p);
    let q_final = *config.schedule.q().last().expect("non-empty schedule");
    f(config.p0) - f(q_final)
}

fn binary_entropy<T: Real>(p: T) -> T {
    let term = |x: T| if x > T::zero() { -x * x.ln() } else { T::zero() };
    term(p) + term(T::one() - p)
}

/// Noise-induced loss `(1/2N) Σ_k E_k α^k` of the canonical protocol.
pub fn loss_epsilon<T: Real>(config: &QubitProtocolConfig<T>) -> Result<T> {
    let alpha = config.noise.fixed_alpha("loss_epsilon")?;
    if !config.is_canonical() {
        return Err(Error::Unsupported(
            "loss_epsilon is defined for the canonical protocol (p0 = 0, eps_s = 0, q_k = k/2N)".into(),
        ));
    }
    check_alpha_below_one(alpha)?;
    let n = config.n_steps();
    let mut power = T::one();
    let terms: Vec<T> = (1..=n)
        .map(|k| {
            power *= alpha;
            config.schedule.energy(k) * power
        })
        .collect();
    Ok(neumaier_sum(&terms) / T::from_usize_lossy(2 * n))
}

/// `α/(1−α) · T ln(2N)/(2N)`.
pub fn epsilon_upper_bound<T: Real>(n: usize, alpha: T, temp: Temperature<T>) -> Result<T> {
    if n == 0 {
        return Err(Error::InvalidSchedule("N must be at least 1".into()));
    }
    check_alpha_below_one(alpha)?;
    let two_n = T::from_usize_lossy(2 * n);
    Ok(alpha / (T::one() - alpha) * temp.value() * two_n.ln() / two_n)
}

fn check_alpha_below_one<T: Real>(alpha: T) -> Result<()> {
    check_range("alpha", alpha.as_f64(), 0.0, 1.0, "[0, 1)")?;
    if alpha == T::one() {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: 1.0,
            range: "[0, 1)",
        });
    }
    Ok(())
}

/// Exact discrete work distribution, sorted by work value.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactDistribution<T> {
    atoms: Vec<(T, T)>,
}

impl<T: Real> ExactDistribution<T> {
    /// `(work, probability)` pairs with strictly increasing work.
    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    pub fn total_probability(&self) -> T {
        let probs: Vec<T> = self.atoms.iter().map(|a| a.1).collect();
        neumaier_sum(&probs)
    }

    pub fn expectation<F: Fn(T) -> T>(&self, f: F) -> T {
        let terms: Vec<T> = self.atoms.iter().map(|&(w, p)| p * f(w)).collect();
        neumaier_sum(&terms)
    }

    pub fn mean(&self) -> T {
        self.expectation(|w| w)
    }

    pub fn variance(&self) -> T {
        let m = self.mean();
        self.expectation(|w| (w - m) * (w - m))
    }

    /// Total-variation distance `½ Σ |p̂ − p|` to the empirical distribution
    /// of `samples`; samples not within `1e-9` (relative) of an atom count
    /// as mass outside the support.
    pub fn total_variation(&self, samples: &[T]) -> T {
        if samples.is_empty() {
            return T::one();
        }
        let mut counts = vec![0u64; self.atoms.len()];
        let mut unmatched = 0u64;
        for &w in samples {
            match self.nearest_atom(w) {
                Some(i) => counts[i] += 1,
                None => unmatched += 1,
            }
        }
        let n = T::lit(samples.len() as f64);
        let diffs: Vec<T> = self
            .atoms
            .iter()
            .zip(&counts)
            .map(|(&(_, p), &c)| (T::lit(c as f64) / n - p).abs())
            .collect();
        (neumaier_sum(&diffs) + T::lit(unmatched as f64) / n) * T::lit(0.5)
    }

    fn nearest_atom(&self, w: T) -> Option<usize> {
        let idx = self.atoms.partition_point(|a| a.0 < w);
        let tol = T::lit(1e-9) * w.abs().max(T::one());
        [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter(|&i| i < self.atoms.len())
            .min_by(|&i, &j| {
                let di = (self.atoms[i].0 - w).abs();
                let dj = (self.atoms[j].0 - w).abs();
                di.partial_cmp(&dj).unwrap_or(std::cmp::Ordering::Equal)
            })
            .filter(|&i| (self.atoms[i].0 - w).abs() <= tol)
    }
}

/// Enumerates every swap/no-swap history. A history is identified by the
/// initial bit and the set of steps at which the system bit flipped, which
/// fixes its work; probabilities accumulate per history.
pub fn enumerate_work_paths<T: Real>(config: &QubitProtocolConfig<T>) -> Result<ExactDistribution<T>> {
    let alpha = config.noise.fixed_alpha("enumerate_work_paths")?;
    let n = config.n_steps();
    if n > ENUMERATION_CAP {
        return Err(Error::Unsupported(format!(
            "enumerate_work_paths is capped at N = {ENUMERATION_CAP} (got N = {n})"
        )));
    }
    let r = T::one() - alpha;
    let q = config.schedule.q();
    let gaps = config.step_gaps();
    let mut atoms: Vec<(T, T)> = Vec::new();

    for (x0, weight) in [(0u32, T::one() - config.p0), (1u32, config.p0)] {
        if weight == T::zero() {
            continue;
        }
        let mut prob = vec![T::zero(); 1usize << n];
        prob[0] = weight;
        for k in 1..=n {
            let bit = 1usize << (k - 1);
            let qk = q[k];
            for mask in 0..bit {
                let x = x0 ^ (mask.count_ones() & 1);
                let (flip, stay) = if x == 0 {
                    (r * qk, alpha + r * (T::one() - qk))
                } else {
                    (r * (T::one() - qk), alpha + r * qk)
                };
                let base = prob[mask];
                prob[mask | bit] = base * flip;
                prob[mask] = base * stay;
            }
        }
        for (mask, &p) in prob.iter().enumerate() {
            if p > T::zero() {
                atoms.push((history_work(x0, mask, &gaps), p));
            }
        }
    }

    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut merged: Vec<(T, T)> = Vec::with_capacity(atoms.len());
    for (w, p) in atoms {
        match merged.last_mut() {
            Some(last) if (w - last.0).abs() <= T::lit(1e-12) * w.abs().max(T::one()) => last.1 += p,
            _ => merged.push((w, p)),
        }
    }
    Ok(ExactDistribution { atoms: merged })
}

fn history_work<T: Real>(x0: u32, mut mask: usize, gaps: &[T]) -> T {
    let mut x = x0;
    let mut w = T::zero();
    while mask != 0 {
        let k = mask.trailing_zeros() as usize;
        if x == 0 {
            w += gaps[k];
        } else {
            w -= gaps[k];
        }
        x ^= 1;
        mask &= mask - 1;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::super::{BathSchedule, NoiseModel};
    use super::*;

    fn bits() -> Temperature<f64> {
        Temperature::bit_units()
    }

    fn canonical(n: usize, alpha: f64) -> QubitProtocolConfig<f64> {
        QubitProtocolConfig::canonical(n, alpha, bits()).unwrap()
    }

    #[test]
    fn perfect_swaps_track_the_bath() {
        let p = excitation_probabilities(&canonical(10, 0.0)).unwrap();
        let q = make_q(10);
        for k in 1..=10 {
            assert_eq!(p[k], q[k]);
        }
    }

    fn make_q(n: usize) -> Vec<f64> {
        (0..=n).map(|k| k as f64 / (2 * n) as f64).collect()
    }

    #[test]
    fn no_interaction_freezes_excitation() {
        let cfg = QubitProtocolConfig::new(
            0.3,
            0.0,
            BathSchedule::linear_between(0.3, 0.5, 8, bits()).unwrap(),
            NoiseModel::fixed(1.0),
        )
        .unwrap();
        assert!(excitation_probabilities(&cfg).unwrap().iter().all(|&p| p == 0.3));
        let w = average_work(&cfg).unwrap();
        assert_eq!(w.cumulative_work, 0.0);
        assert_eq!(w.variance, 0.0);
    }

    #[test]
    fn hand_unrolled_second_step() {
        let p = excitation_probabilities(&canonical(4, 0.5)).unwrap();
        let expected = 0.5 * (0.5 * 0.125 + 0.25);
        assert!((p[2] - expected).abs() < 1e-15);
        let closed = excitation_closed_form(&canonical(4, 0.5)).unwrap();
        assert!((closed[2] - expected).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_agree() {
        for &alpha in &[0.1, 0.5, 0.9, 0.99] {
            let cfg = canonical(300, alpha);
            let rec = excitation_probabilities(&cfg).unwrap();
            let closed = excitation_closed_form(&cfg).unwrap();
            for k in 0..=300 {
                assert!((rec[k] - closed[k]).abs() < 1e-12);
                assert!((rec[k] - linear_schedule_excitation(300, alpha, k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn canonical_work_identity() {
        let n = 200;
        for &alpha in &[0.0, 0.3, 0.8] {
            let w = average_work(&canonical(n, alpha)).unwrap().cumulative_work;
            let s = BathSchedule::linear(n, bits()).unwrap();
            let direct: f64 = (1..=n)
                .map(|k| s.energy(k) / (2 * n) as f64 * (1.0 - alpha.powi(k as i32)))
                .sum();
            assert!((w - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_is_gap_between_perfect_and_noisy_work() {
        let n = 500;
        let ideal = average_work(&canonical(n, 0.0)).unwrap().cumulative_work;
        for &alpha in &[0.2, 0.5, 0.9] {
            let noisy = average_work(&canonical(n, alpha)).unwrap().cumulative_work;
            let eps = loss_epsilon(&canonical(n, alpha)).unwrap();
            assert!((ideal - noisy - eps).abs() < 1e-12);
        }
        assert_eq!(loss_epsilon(&canonical(n, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn bound_value() {
        let b = epsilon_upper_bound(1000, 0.5, bits()).unwrap();
        assert!((b - 2000f64.ln() / (2f64.ln() * 2000.0)).abs() < 1e-15);
        assert!((b - 0.00548).abs() < 1e-5);
        assert!(epsilon_upper_bound(10, 1.0, bits()).is_err());
        assert!(loss_epsilon(&canonical(10, 1.0)).is_err());
    }

    #[test]
    fn single_step_variance() {
        for &alpha in &[0.0, 0.4] {
            let n = 1;
            let cfg = QubitProtocolConfig::new(
                0.0,
                0.0,
                BathSchedule::new(vec![0.0, 0.3], bits()).unwrap(),
                NoiseModel::fixed(alpha),
            )
            .unwrap();
            let e1 = cfg.schedule.energy(n);
            let flip = (1.0 - alpha) * 0.3;
            let expected = flip * (1.0 - flip) * e1 * e1;
            assert!((work_moments(&cfg).unwrap().variance - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn two_step_enumeration_by_hand() {
        let alpha = 0.5;
        let cfg = canonical(2, alpha);
        let e1 = cfg.schedule.energy(1);
        let (q1, q2, r) = (0.25, 0.5, 1.0 - alpha);
        // E_2 = 0: a flip at step 2 leaves the work unchanged.
        let no_flip = (1.0 - r * q1) * (alpha + r * (1.0 - q2));
        let flip_2 = (1.0 - r * q1) * r * q2;
        let flip_1 = r * q1 * (alpha + r * q2);
        let flip_12 = r * q1 * r * (1.0 - q2);
        let d = enumerate_work_paths(&cfg).unwrap();
        assert_eq!(d.atoms().len(), 2);
        assert!((d.atoms()[0].1 - (no_flip + flip_2)).abs() < 1e-15);
        assert!((d.atoms()[1].0 - e1).abs() < 1e-15);
        assert!((d.atoms()[1].1 - (flip_1 + flip_12)).abs() < 1e-15);
    }

    #[test]
    fn single_swap_outcomes() {
        let cfg = canonical(1, 0.0);
        let d = enumerate_work_paths(&cfg).unwrap();
        assert_eq!(d.atoms(), &[(0.0, 1.0)]);
        let cfg = QubitProtocolConfig::new(
            0.0,
            0.0,
            BathSchedule::new(vec![0.0, 0.2], bits()).unwrap(),
            NoiseModel::fixed(0.0),
        )
        .unwrap();
        let d = enumerate_work_paths(&cfg).unwrap();
        assert_eq!(d.atoms().len(), 2);
        assert!((d.atoms()[0].1 - 0.8).abs() < 1e-15);
        assert!((d.atoms()[1].0 - cfg.schedule.energy(1)).abs() < 1e-15);
    }

    #[test]
    fn enumeration_cap_named_in_error() {
        let err = enumerate_work_paths(&canonical(21, 0.5)).unwrap_err();
        assert!(err.to_string().contains("N = 20"));
    }

    #[test]
    fn random_noise_rejected_by_exact_routines() {
        let mut cfg = canonical(5, 0.5);
        cfg.noise = NoiseModel::Random {
            dist: super::super::AlphaDistribution::Uniform { lo: 0.2, hi: 0.4 },
            seed: 3,
        };
        assert!(matches!(excitation_probabilities(&cfg), Err(Error::Unsupported(_))));
        assert!(average_work(&cfg).is_err());
    }

    #[test]
    fn erasure_free_energy_is_one_bit() {
        let df = free_energy_change(&canonical(50, 0.5));
        assert!((df - 1.0).abs() < 1e-15);
    }
}
