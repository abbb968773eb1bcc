//! Reduction of an arbitrary thermal operation on the degenerate doublet
//! {|0,1⟩, |1,0⟩} of system and bath qubit to a partial thermalization.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;

use crate::error::{check_range, Error, Result};
use crate::linalg::{haar_unitary, CMatrix};
use crate::scalar::Real;
use crate::seeding::trial_seed;
use crate::thermo::{gibbs_state, DensityOperator, HamiltonianMatrix, Temperature};

/// Result of one operation: the fitted α, the worst deviation of the S and
/// B marginals from the convex-mixture form, and the size of the doublet
/// coherence that the marginals never see.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReducedOutcome<T> {
    pub alpha: T,
    pub residual: T,
    pub coherence: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReductionReport<T> {
    pub trials: usize,
    pub max_residual: T,
    pub min_alpha: T,
    pub max_alpha: T,
    pub max_coherence: T,
}

fn validate_populations<T: Real>(q: T, p_prev: T) -> Result<()> {
    check_range("q", q.as_f64(), 0.0, 1.0, "(0, 1)")?;
    check_range("p_prev", p_prev.as_f64(), 0.0, 1.0, "[0, 1]")?;
    if !(q > p_prev) {
        return Err(Error::Unsupported(format!(
            "need q > p_prev so that the doublet weights differ (q = {q}, p_prev = {p_prev})"
        )));
    }
    Ok(())
}

/// Applies `V (φ ⊗ τ_A) V†`, traces out the ancilla and reads off α from
/// the |0,1⟩ population `(1−α)s + αr`, where `r = q(1−p_prev)` and
/// `s = (1−q)p_prev`. `v` acts on doublet ⊗ ancilla, doublet index major.
pub fn reduce_thermal_operation<T: Real>(
    q: T,
    p_prev: T,
    v: &CMatrix<T>,
    tau_a: &DensityOperator<T>,
) -> Result<ReducedOutcome<T>> {
    validate_populations(q, p_prev)?;
    let d_a = tau_a.dim();
    if v.dim() != 2 * d_a {
        return Err(Error::DimensionMismatch(v.dim(), 2 * d_a));
    }
    let one = T::one();
    let r = q * (one - p_prev);
    let s = (one - q) * p_prev;
    let phi = CMatrix::from_diagonal(&[r, s]).kron(tau_a.matrix());
    let psi = phi.conjugate_by(v).partial_trace_right(2, d_a);

    let alpha = (psi[(0, 0)].re - s) / (r - s);
    let both_excited = q * p_prev;
    let system_excited = psi[(1, 1)].re + both_excited;
    let bath_excited = psi[(0, 0)].re + both_excited;
    let residual = [
        (system_excited - ((one - alpha) * q + alpha * p_prev)).abs(),
        (bath_excited - (alpha * q + (one - alpha) * p_prev)).abs(),
        (psi.trace().re - (r + s)).abs(),
    ]
    .into_iter()
    .fold(T::zero(), T::max);
    Ok(ReducedOutcome {
        alpha,
        residual,
        coherence: psi[(0, 1)].norm(),
    })
}

/// Random energy-preserving unitary on doublet ⊗ ancilla: Haar-random on
/// each block {|d, a⟩ : H_A|a⟩ = E|a⟩}, identity coupling elsewhere.
fn random_thermal_operation<T: Real>(rng: &mut Xoshiro256PlusPlus, d_a: usize) -> (CMatrix<T>, DensityOperator<T>) {
    let mut levels: Vec<(T, Vec<usize>)> = Vec::new();
    for a in 0..d_a {
        let degenerate = !levels.is_empty() && rng.random::<f64>() < 0.3;
        if degenerate {
            levels.last_mut().expect("non-empty").1.push(a);
        } else {
            levels.push((T::lit(3.0 * rng.random::<f64>()), vec![a]));
        }
    }
    let mut energies = vec![T::zero(); d_a];
    for (e, idx) in &levels {
        for &a in idx {
            energies[a] = *e;
        }
    }
    let temp = Temperature::from_beta(T::lit(0.2 + 4.8 * rng.random::<f64>())).expect("positive beta");
    let h = HamiltonianMatrix::diagonal(&energies).expect("real diagonal");
    let tau = gibbs_state(&h, temp).expect("gibbs state");

    let mut v = CMatrix::zeros(2 * d_a);
    for (_, idx) in &levels {
        let basis: Vec<usize> = [0usize, 1].iter().flat_map(|&d| idx.iter().map(move |&a| d * d_a + a)).collect();
        let u: CMatrix<T> = haar_unitary(basis.len(), rng);
        for (i, &bi) in basis.iter().enumerate() {
            for (j, &bj) in basis.iter().enumerate() {
                v[(bi, bj)] = u[(i, j)];
            }
        }
    }
    (v, tau)
}

/// Draws `trials` random thermal operations (random ancilla spectrum,
/// degeneracies and temperature; Haar-random within each energy block) and
/// reports the worst reduction residual and the range of fitted α.
pub fn thermal_op_reduction_check<T: Real>(
    q: T,
    p_prev: T,
    ancilla_dim: usize,
    trials: usize,
    seed: u64,
) -> Result<ReductionReport<T>> {
    validate_populations(q, p_prev)?;
    if ancilla_dim < 2 {
        return Err(Error::OutOfRange {
            name: "ancilla_dim",
            value: ancilla_dim as f64,
            range: ">= 2",
        });
    }
    let mut report = ReductionReport {
        trials,
        max_residual: T::zero(),
        min_alpha: T::infinity(),
        max_alpha: T::neg_infinity(),
        max_coherence: T::zero(),
    };
    for i in 0..trials {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(trial_seed(seed, i as u64));
        let (v, tau) = random_thermal_operation::<T>(&mut rng, ancilla_dim);
        let out = reduce_thermal_operation(q, p_prev, &v, &tau)?;
        report.max_residual = report.max_residual.max(out.residual);
        report.min_alpha = report.min_alpha.min(out.alpha);
        report.max_alpha = report.max_alpha.max(out.alpha);
        report.max_coherence = report.max_coherence.max(out.coherence);
    }
    Ok(report)
}

/// Swap of the two doublet states, identity on the ancilla.
pub fn doublet_swap<T: Real>(d_a: usize) -> CMatrix<T> {
    let one = Complex::new(T::one(), T::zero());
    let x = CMatrix::from_rows(vec![vec![Complex::new(T::zero(), T::zero()), one], vec![one, Complex::new(T::zero(), T::zero())]])
        .expect("square");
    x.kron(&CMatrix::identity(d_a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ancilla() -> DensityOperator<f64> {
        DensityOperator::from_populations(&[0.5, 0.3, 0.2]).unwrap()
    }

    #[test]
    fn identity_gives_alpha_one() {
        let out = reduce_thermal_operation(0.4, 0.1, &CMatrix::identity(6), &ancilla()).unwrap();
        assert!((out.alpha - 1.0).abs() < 1e-15);
        assert!(out.residual < 1e-15);
    }

    #[test]
    fn doublet_swap_gives_alpha_zero() {
        let out = reduce_thermal_operation(0.4, 0.1, &doublet_swap(3), &ancilla()).unwrap();
        assert!(out.alpha.abs() < 1e-15);
        assert!(out.residual < 1e-15);
    }

    #[test]
    fn random_operations_reduce() {
        let rep = thermal_op_reduction_check(0.35, 0.2, 3, 200, 42).unwrap();
        assert!(rep.max_residual < 1e-10);
        assert!(rep.min_alpha >= -1e-12 && rep.max_alpha <= 1.0 + 1e-12);
        assert!(rep.max_coherence > 1e-6);
    }

    #[test]
    fn equal_weights_rejected() {
        assert!(reduce_thermal_operation(0.3, 0.3, &CMatrix::identity(6), &ancilla()).is_err());
        assert!(thermal_op_reduction_check(0.4, 0.1, 1, 10, 0).is_err());
    }
}
