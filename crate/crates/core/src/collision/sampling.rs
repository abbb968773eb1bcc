use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;

use super::{neumaier_sum, AlphaDistribution, Histogram, NoiseModel, QubitProtocolConfig, WorkLedger};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seeding::trial_seed;

/// Histogram resolution used by [`sample_work`].
pub const DEFAULT_BINS: usize = 60;

// Trials are grouped into fixed chunks and reduced in chunk order, so the
// result does not depend on the number of worker threads.
const CHUNK: usize = 1024;

struct Chunk<T> {
    values: Vec<T>,
    step_sums: Vec<T>,
    p_sums: Vec<T>,
    p_sq_sums: Vec<T>,
}

fn uniform<T: Real>(rng: &mut Xoshiro256PlusPlus) -> T {
    T::lit(rng.random::<f64>())
}

/// One stochastic history. Every step consumes exactly two uniforms from
/// `rng` (swap decision, bath bit) whatever the noise model, so a random
/// model concentrated at α reproduces `Fixed(α)` draw for draw.
fn run_trial<T: Real>(
    config: &QubitProtocolConfig<T>,
    gaps: &[T],
    rng: &mut Xoshiro256PlusPlus,
    mut alpha_source: Option<(&AlphaDistribution<T>, &mut Xoshiro256PlusPlus)>,
    step_sums: &mut [T],
    mut p_track: Option<(&mut [T], &mut [T])>,
) -> T {
    let q = config.schedule.q();
    let fixed = config.noise.mean_alpha();
    let mut x = uniform::<T>(rng) < config.p0;
    let mut p = config.p0;
    let mut w = T::zero();
    for (i, &omega) in gaps.iter().enumerate() {
        let alpha = match alpha_source.as_mut() {
            Some((dist, arng)) => dist.draw(uniform(arng)),
            None => fixed,
        };
        let u_swap: T = uniform(rng);
        let u_bath: T = uniform(rng);
        let qk = q[i + 1];
        if u_swap >= alpha {
            let y = u_bath < qk;
            if y != x {
                let dw = if y { omega } else { -omega };
                w += dw;
                step_sums[i] += dw;
                x = y;
            }
        }
        if let Some((sums, sq)) = p_track.as_mut() {
            p = alpha * p + (T::one() - alpha) * qk;
            sums[i + 1] += p;
            sq[i + 1] += p * p;
        }
    }
    w
}

fn run_chunks<T: Real>(config: &QubitProtocolConfig<T>, runs: usize, seed: u64, track_p: bool) -> Vec<Chunk<T>> {
    let n = config.n_steps();
    let gaps = config.step_gaps();
    let random = match &config.noise {
        NoiseModel::Random { dist, seed } => Some((*dist, *seed)),
        NoiseModel::Fixed { .. } => None,
    };
    (0..runs.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let range = c * CHUNK..((c + 1) * CHUNK).min(runs);
            let mut chunk = Chunk {
                values: Vec::with_capacity(range.len()),
                step_sums: vec![T::zero(); n],
                p_sums: vec![T::zero(); if track_p { n + 1 } else { 0 }],
                p_sq_sums: vec![T::zero(); if track_p { n + 1 } else { 0 }],
            };
            for i in range {
                let mut rng = Xoshiro256PlusPlus::seed_from_u64(trial_seed(seed, i as u64));
                let mut alpha_rng = random.map(|(_, s)| Xoshiro256PlusPlus::seed_from_u64(trial_seed(s, i as u64)));
                let alpha_source = match (&random, alpha_rng.as_mut()) {
                    (Some((dist, _)), Some(r)) => Some((dist, r)),
                    _ => None,
                };
                let p_track = track_p.then(|| (chunk.p_sums.as_mut_slice(), chunk.p_sq_sums.as_mut_slice()));
                let w = run_trial(config, &gaps, &mut rng, alpha_source, &mut chunk.step_sums, p_track);
                chunk.values.push(w);
            }
            chunk
        })
        .collect()
}

fn check_runs(runs: usize) -> Result<()> {
    if runs == 0 {
        Err(Error::OutOfRange {
            name: "runs",
            value: 0.0,
            range: ">= 1",
        })
    } else {
        Ok(())
    }
}

/// Extracted work of each trial, in trial order. Trial `i` draws from
/// `Xoshiro256PlusPlus::seed_from_u64(trial_seed(seed, i))`; random α_k come
/// from a second stream seeded with `trial_seed(noise_seed, i)`.
pub fn sample_work_values<T: Real>(config: &QubitProtocolConfig<T>, runs: usize, seed: u64) -> Result<Vec<T>> {
    check_runs(runs)?;
    Ok(run_chunks(config, runs, seed, false)
        .into_iter()
        .flat_map(|c| c.values)
        .collect())
}

fn ledger_from_chunks<T: Real>(chunks: &[Chunk<T>], n_steps: usize, runs: usize) -> (WorkLedger<T>, Vec<T>) {
    let values: Vec<T> = chunks.iter().flat_map(|c| c.values.iter().copied()).collect();
    let count = T::lit(runs as f64);
    let mean = neumaier_sum(&values) / count;
    let variance = if runs > 1 {
        let dev: Vec<T> = values.iter().map(|&w| (w - mean) * (w - mean)).collect();
        neumaier_sum(&dev) / T::lit((runs - 1) as f64)
    } else {
        T::zero()
    };
    let mut per_step = vec![T::zero(); n_steps];
    for c in chunks {
        for (acc, &s) in per_step.iter_mut().zip(&c.step_sums) {
            *acc += s;
        }
    }
    for v in &mut per_step {
        *v /= count;
    }
    let ledger = WorkLedger {
        cumulative_work: neumaier_sum(&per_step),
        per_step_work: per_step,
        mean,
        variance,
        histogram: Some(Histogram::from_samples(&values, DEFAULT_BINS)),
        sample_count: Some(runs as u64),
    };
    (ledger, values)
}

/// Monte Carlo estimate of the work distribution over `runs` trials.
pub fn sample_work<T: Real>(config: &QubitProtocolConfig<T>, runs: usize, seed: u64) -> Result<WorkLedger<T>> {
    check_runs(runs)?;
    let chunks = run_chunks(config, runs, seed, false);
    Ok(ledger_from_chunks(&chunks, config.n_steps(), runs).0)
}

/// Sampled work under random α_k plus the ensemble average of the
/// conditional excitation trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct RandomAlphaReport<T> {
    pub ledger: WorkLedger<T>,
    /// `E[p_k]` over trials, `k = 0..N`.
    pub mean_excitation: Vec<T>,
    pub excitation_std_error: Vec<T>,
}

pub fn simulate_random_alpha<T: Real>(
    config: &QubitProtocolConfig<T>,
    runs: usize,
    seed: u64,
) -> Result<RandomAlphaReport<T>> {
    check_runs(runs)?;
    if !matches!(config.noise, NoiseModel::Random { .. }) {
        return Err(Error::Unsupported("simulate_random_alpha needs a random noise model".into()));
    }
    let n = config.n_steps();
    let chunks = run_chunks(config, runs, seed, true);
    let (ledger, _) = ledger_from_chunks(&chunks, n, runs);
    let count = T::lit(runs as f64);
    let mut sums = vec![T::zero(); n + 1];
    let mut sq = vec![T::zero(); n + 1];
    for c in &chunks {
        for k in 0..=n {
            sums[k] += c.p_sums[k];
            sq[k] += c.p_sq_sums[k];
        }
    }
    let mut mean_excitation = Vec::with_capacity(n + 1);
    let mut excitation_std_error = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k == 0 {
            mean_excitation.push(config.p0);
            excitation_std_error.push(T::zero());
            continue;
        }
        let m = sums[k] / count;
        let var = (sq[k] / count - m * m).max(T::zero());
        mean_excitation.push(m);
        excitation_std_error.push((var / count).sqrt());
    }
    Ok(RandomAlphaReport {
        ledger,
        mean_excitation,
        excitation_std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::super::average_work;
    use super::*;
    use crate::thermo::Temperature;

    fn canonical(n: usize, alpha: f64) -> QubitProtocolConfig<f64> {
        QubitProtocolConfig::canonical(n, alpha, Temperature::bit_units()).unwrap()
    }

    #[test]
    fn no_interaction_gives_zero_every_trial() {
        let values = sample_work_values(&canonical(30, 1.0), 500, 9).unwrap();
        assert!(values.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn zero_runs_rejected() {
        assert!(sample_work(&canonical(3, 0.5), 0, 1).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = sample_work_values(&canonical(40, 0.5), 3000, 77).unwrap();
        let b = sample_work_values(&canonical(40, 0.5), 3000, 77).unwrap();
        let c = sample_work_values(&canonical(40, 0.5), 3000, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sampled_mean_matches_exact() {
        let cfg = canonical(60, 0.5);
        let exact = average_work(&cfg).unwrap();
        let sampled = sample_work(&cfg, 20_000, 5).unwrap();
        assert!((sampled.mean - exact.mean).abs() < 4.0 * sampled.standard_error());
        assert!((sampled.cumulative_work - sampled.mean).abs() < 1e-10 * 60.0);
        assert_eq!(sampled.histogram.as_ref().unwrap().total(), 20_000);
    }

    #[test]
    fn degenerate_random_alpha_matches_fixed_trial_by_trial() {
        let fixed = canonical(25, 0.4);
        let mut random = fixed.clone();
        random.noise = NoiseModel::Random {
            dist: AlphaDistribution::Uniform { lo: 0.4, hi: 0.4 },
            seed: 1234,
        };
        let a = sample_work_values(&fixed, 2000, 11).unwrap();
        let b = sample_work_values(&random, 2000, 11).unwrap();
        assert_eq!(a, b);
    }
}
