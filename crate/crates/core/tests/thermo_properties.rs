use nalgebra::{Complex as NComplex, DMatrix};
use num_complex::Complex;
use proptest::prelude::*;
use thermoflow_core::linalg::CMatrix;
use thermoflow_core::thermo::{
    free_energy, gibbs_state, partial_thermalize, relative_entropy, trace_distance, von_neumann_entropy,
    DensityOperator, HamiltonianMatrix, Temperature,
};

fn hermitian(dim: usize, entries: &[f64]) -> CMatrix<f64> {
    let mut m = CMatrix::zeros(dim);
    let mut it = entries.iter().copied();
    for i in 0..dim {
        m[(i, i)] = Complex::new(it.next().unwrap(), 0.0);
        for j in (i + 1)..dim {
            let z = Complex::new(it.next().unwrap(), it.next().unwrap());
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

fn arb_hamiltonian() -> impl Strategy<Value = HamiltonianMatrix<f64>> {
    (2usize..=4).prop_flat_map(|d| {
        prop::collection::vec(-1.0f64..1.0, d * d).prop_map(move |v| HamiltonianMatrix::new(hermitian(d, &v)).unwrap())
    })
}

/// Full-rank state `(AA† + 0.05·1)/Tr`.
fn arb_state(dim: usize) -> impl Strategy<Value = DensityOperator<f64>> {
    prop::collection::vec(-1.0f64..1.0, 2 * dim * dim).prop_map(move |v| {
        let mut a = CMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                a[(i, j)] = Complex::new(v[2 * (i * dim + j)], v[2 * (i * dim + j) + 1]);
            }
        }
        let g = &(&a * &a.adjoint()) + &CMatrix::identity(dim).scale(0.05);
        let tr = g.trace().re;
        DensityOperator::new(g.scale(1.0 / tr)).unwrap()
    })
}

/// Temperatures and spectra keep every Gibbs population well above the
/// relative-entropy support floor.
fn arb_pair() -> impl Strategy<Value = (HamiltonianMatrix<f64>, DensityOperator<f64>, f64)> {
    arb_hamiltonian().prop_flat_map(|h| {
        let d = h.dim();
        (Just(h), arb_state(d), 0.5f64..5.0)
    })
}

fn to_nalgebra(m: &CMatrix<f64>) -> DMatrix<NComplex<f64>> {
    let d = m.dim();
    DMatrix::from_fn(d, d, |i, j| NComplex::new(m[(i, j)].re, m[(i, j)].im))
}

/// Gibbs state through nalgebra's eigensolver, without energy shift.
fn gibbs_oracle(h: &HamiltonianMatrix<f64>, t: f64) -> DMatrix<NComplex<f64>> {
    let eig = to_nalgebra(h.matrix()).symmetric_eigen();
    let weights: Vec<f64> = eig.eigenvalues.iter().map(|e| (-e / t).exp()).collect();
    let z: f64 = weights.iter().sum();
    let d = h.dim();
    let diag = DMatrix::from_fn(d, d, |i, j| if i == j { NComplex::new(weights[i] / z, 0.0) } else { NComplex::new(0.0, 0.0) });
    &eig.eigenvectors * diag * eig.eigenvectors.adjoint()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn gibbs_matches_nalgebra((h, _rho, t) in arb_pair()) {
        let tau = gibbs_state(&h, Temperature::new(t).unwrap()).unwrap();
        let oracle = gibbs_oracle(&h, t);
        for i in 0..h.dim() {
            for j in 0..h.dim() {
                let a = tau.matrix()[(i, j)];
                let b = oracle[(i, j)];
                prop_assert!((a.re - b.re).abs() < 1e-10 && (a.im - b.im).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn free_energy_gap_is_relative_entropy((h, rho, t) in arb_pair()) {
        let temp = Temperature::new(t).unwrap();
        let tau = gibbs_state(&h, temp).unwrap();
        let gap = free_energy(&rho, &h, temp).unwrap() - free_energy(&tau, &h, temp).unwrap();
        let s = relative_entropy(&rho, &tau).unwrap();
        prop_assert!((gap - t * s).abs() < 1e-9 * (1.0 + gap.abs()));
        prop_assert!(gap >= -1e-12);
    }

    #[test]
    fn pinsker_holds((h, rho, t) in arb_pair()) {
        let tau = gibbs_state(&h, Temperature::new(t).unwrap()).unwrap();
        let d = trace_distance(&rho, &tau).unwrap();
        let s = relative_entropy(&rho, &tau).unwrap();
        prop_assert!(d <= (2.0 * s).sqrt() + 1e-10);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&d));
    }

    #[test]
    fn partial_thermalization_contracts_exactly((h, rho, t) in arb_pair(), alpha in 0.0f64..1.0) {
        let tau = gibbs_state(&h, Temperature::new(t).unwrap()).unwrap();
        let out = partial_thermalize(&rho, &tau, alpha).unwrap();
        let before = trace_distance(&rho, &tau).unwrap();
        let after = trace_distance(&out, &tau).unwrap();
        prop_assert!((after - alpha * before).abs() < 1e-12);
        prop_assert!(out.min_eigenvalue() >= -1e-12);
    }

    #[test]
    fn entropy_is_bounded_by_log_dimension(rho in (2usize..=4).prop_flat_map(arb_state)) {
        let s = von_neumann_entropy(&rho);
        prop_assert!(s >= -1e-12 && s <= (rho.dim() as f64).ln() + 1e-12);
    }

    #[test]
    fn trace_distance_is_symmetric(pair in (2usize..=4).prop_flat_map(|d| (arb_state(d), arb_state(d)))) {
        let (a, b) = pair;
        let ab = trace_distance(&a, &b).unwrap();
        let ba = trace_distance(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
    }
}
