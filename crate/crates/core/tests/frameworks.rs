use num_complex::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use thermoflow_core::collision::{work_moments, BathSchedule, NoiseModel, QubitProtocolConfig};
use thermoflow_core::linalg::CMatrix;
use thermoflow_core::maps::{
    dissipation_breakdown, estimate_contraction, evolve_unitary, run_cyclic_protocol, unitary_approx_error,
    unitary_error_bound, ChannelKind, CyclicProtocol, EvolutionMode, ThermalizingChannel, DEFAULT_PROBES,
};
use thermoflow_core::qudit::{
    endpoint_pair, qubit_gap_ramp, qubit_linear_q, rotating_field, run_qudit_protocol, HamiltonianPath, Profile,
    QuditProtocolConfig,
};
use thermoflow_core::thermo::{free_energy, gibbs_state, trace_distance, DensityOperator, HamiltonianMatrix, Temperature};

fn temp() -> Temperature<f64> {
    Temperature::new(0.8).unwrap()
}

#[test]
fn qubit_collision_equals_qudit_on_matching_path() {
    let (q0, q1) = (0.12, 0.41);
    for n in [1, 7, 250] {
        for alpha in [0.0, 0.35, 0.9] {
            let path = qubit_linear_q(q0, q1, temp(), Profile::Linear).unwrap();
            let eps_s = path.at(1.0).matrix()[(1, 1)].re;
            let qudit = run_qudit_protocol(&QuditProtocolConfig::matched(path, n, alpha).unwrap()).unwrap();
            let schedule = BathSchedule::linear_between(q0, q1, n, temp()).unwrap();
            let qubit = QubitProtocolConfig::new(q0, eps_s, schedule, NoiseModel::fixed(alpha)).unwrap();
            let w = work_moments(&qubit).unwrap().mean;
            assert!((w - qudit.ledger.cumulative_work).abs() < 1e-12, "n={n} alpha={alpha}");
        }
    }
}

#[test]
fn quench_channel_protocol_reproduces_qudit_dissipation() {
    let path = qubit_gap_ramp(0.3, 2.2, temp(), Profile::Smoothstep).unwrap();
    for (n, alpha) in [(10, 0.0), (80, 0.5), (300, 0.8)] {
        let qudit_cfg = QuditProtocolConfig::matched(path.clone(), n, alpha).unwrap();
        let qudit = run_qudit_protocol(&qudit_cfg).unwrap();
        let qudit_dis = qudit_cfg.free_energy_change().unwrap() - qudit.ledger.cumulative_work;
        let proto = CyclicProtocol::open_segment(
            path.clone(),
            n,
            ChannelKind::partial_therm(alpha).unwrap(),
            EvolutionMode::Quench,
        )
        .unwrap();
        let b = dissipation_breakdown(&proto, &path.gibbs(0.0).unwrap()).unwrap();
        assert!((b.total - qudit_dis).abs() < 1e-10, "n={n}: {} vs {qudit_dis}", b.total);
    }
}

/// Diagonal cyclic qubit path `diag(0, 1 + ½ sin²(πs))`.
fn breathing_gap() -> HamiltonianPath<f64> {
    HamiltonianPath::new("breathing", 2, temp(), |s: f64| {
        let e = 1.0 + 0.5 * (std::f64::consts::PI * s).sin().powi(2);
        HamiltonianMatrix::diagonal(&[0.0, e]).unwrap()
    })
    .unwrap()
}

#[test]
fn quench_protocol_matches_scalar_recursion() {
    let path = breathing_gap();
    let beta = temp().beta();
    let gap = |s: f64| 1.0 + 0.5 * (std::f64::consts::PI * s).sin().powi(2);
    let p0 = 0.37;
    for (n, alpha) in [(5, 0.2), (64, 0.6), (500, 0.95)] {
        let proto = CyclicProtocol::new(path.clone(), n, ChannelKind::partial_therm(alpha).unwrap(), EvolutionMode::Quench)
            .unwrap();
        let rho0 = DensityOperator::from_populations(&[1.0 - p0, p0]).unwrap();
        let run = run_cyclic_protocol(&proto, &rho0).unwrap();
        let (mut p, mut w) = (p0, 0.0);
        for i in 1..=n {
            let (e_prev, e) = (gap((i - 1) as f64 / n as f64), gap(i as f64 / n as f64));
            w += (e_prev - e) * p;
            let q = 1.0 / (1.0 + (beta * e).exp());
            p = alpha * p + (1.0 - alpha) * q;
        }
        assert!((run.ledger.cumulative_work - w).abs() < 1e-10);
        assert!((run.final_state.populations()[1] - p).abs() < 1e-12);
    }
}

#[test]
fn perfect_thermalization_recovers_free_energy() {
    let t = Temperature::new(1.0).unwrap();
    let h0 = HamiltonianMatrix::diagonal(&[0.0, 1.0]).unwrap();
    let rho0 = DensityOperator::from_populations(&[0.9, 0.1]).unwrap();
    let h_tilde = HamiltonianMatrix::diagonal(&[0.0, (9.0f64).ln()]).unwrap();
    assert!(trace_distance(&gibbs_state(&h_tilde, t).unwrap(), &rho0).unwrap() < 1e-14);
    let quench = rho0.energy(&h0).unwrap() - rho0.energy(&h_tilde).unwrap();
    let path = endpoint_pair(h_tilde, h0.clone(), t, Profile::Linear).unwrap();
    let delta_f = free_energy(&rho0, &h0, t).unwrap() - free_energy(&gibbs_state(&h0, t).unwrap(), &h0, t).unwrap();
    let mut gaps = Vec::new();
    for n in [500, 4000] {
        let proto =
            CyclicProtocol::open_segment(path.clone(), n, ChannelKind::partial_therm(0.0).unwrap(), EvolutionMode::Quench)
                .unwrap();
        let w = quench + run_cyclic_protocol(&proto, &rho0).unwrap().ledger.cumulative_work;
        assert!(w <= delta_f + 1e-12);
        gaps.push(delta_f - w);
    }
    assert!(gaps[1] < 1e-3);
    assert!(gaps[0] / gaps[1] > 7.0);
}

#[test]
fn commuting_family_propagator() {
    let h0 = HamiltonianMatrix::new(
        CMatrix::from_rows(vec![
            vec![Complex::new(0.4, 0.0), Complex::new(0.1, 0.3)],
            vec![Complex::new(0.1, -0.3), Complex::new(-0.2, 0.0)],
        ])
        .unwrap(),
    )
    .unwrap();
    let base = h0.clone();
    let path = HamiltonianPath::new("scaled", 2, temp(), move |s: f64| {
        HamiltonianMatrix::new(base.matrix().scale(1.0 + s * s)).unwrap()
    })
    .unwrap();
    let (a, b) = (0.2, 0.9);
    let integral = (b - a) + (b * b * b - a * a * a) / 3.0;
    let exact = h0.matrix().exp_i_hermitian(integral);
    let u = evolve_unitary(&path, a, b, 64).unwrap();
    // Midpoint error: (b−a)·h²/24·max|f''|·‖H₀‖ with h = 0.7/64.
    assert!((&u - &exact).operator_norm() < 1e-5);
}

#[test]
fn midpoint_product_converges_at_second_order() {
    let path = rotating_field(2.0, temp()).unwrap();
    let reference = evolve_unitary(&path, 0.1, 0.6, 64).unwrap();
    let coarse = (&evolve_unitary(&path, 0.1, 0.6, 4).unwrap() - &reference).operator_norm();
    let fine = (&evolve_unitary(&path, 0.1, 0.6, 8).unwrap() - &reference).operator_norm();
    let ratio = coarse / fine;
    assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
}

#[test]
fn unitary_error_scales_quadratically_and_respects_bound() {
    let path = qubit_gap_ramp(0.5, 3.0, temp(), Profile::Linear).unwrap();
    let mut maxima = Vec::new();
    for n in [50, 100, 200] {
        let mut worst: f64 = 0.0;
        for i in 1..=n {
            let err = unitary_approx_error(&path, i, n, 16).unwrap();
            assert!(err <= unitary_error_bound(&path, i, n).unwrap() + 1e-10);
            worst = worst.max(err);
        }
        maxima.push(worst);
    }
    for w in maxima.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
    }
    let rot = rotating_field(1.5, temp()).unwrap();
    for i in [1, 17, 40] {
        assert!(unitary_approx_error(&rot, i, 40, 16).unwrap() <= unitary_error_bound(&rot, i, 40).unwrap() + 1e-10);
    }
}

#[test]
fn state_lag_shrinks_as_one_over_n() {
    let path = rotating_field(1.5, temp()).unwrap();
    let rho0 = path.gibbs(0.0).unwrap();
    let lags: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| {
            let proto = CyclicProtocol::new(path.clone(), n, ChannelKind::partial_therm(0.5).unwrap(), EvolutionMode::default())
                .unwrap();
            run_cyclic_protocol(&proto, &rho0).unwrap().lag.into_iter().fold(0.0, f64::max)
        })
        .collect();
    for w in lags.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.7..=2.4).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn gamma_and_epsilon_scale_as_one_over_n() {
    let path = rotating_field(1.5, temp()).unwrap();
    let rho0 = path.gibbs(0.0).unwrap();
    let runs: Vec<_> = [100, 200]
        .iter()
        .map(|&n| {
            let proto = CyclicProtocol::new(path.clone(), n, ChannelKind::partial_therm(0.5).unwrap(), EvolutionMode::default())
                .unwrap();
            dissipation_breakdown(&proto, &rho0).unwrap()
        })
        .collect();
    let g = runs[0].gamma / runs[1].gamma;
    let e = runs[0].epsilon / runs[1].epsilon;
    assert!((1.7..=2.4).contains(&g), "gamma ratio {g}");
    assert!((1.7..=2.4).contains(&e), "epsilon ratio {e}");
    // The unitary term decays faster than 1/N on a thermal start.
    assert!(runs[0].kappa.abs() / runs[1].kappa.abs() > 4.0);
}

#[test]
fn channels_respect_declared_contraction() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(8);
    for (dim, levels) in [(2, vec![0.0, 1.3]), (4, vec![0.0, 0.2, 0.2, 1.7])] {
        let h = HamiltonianMatrix::diagonal(&levels).unwrap();
        assert_eq!(h.dim(), dim);
        let rotated = {
            let u = thermoflow_core::linalg::haar_unitary::<f64, _>(dim, &mut rng);
            HamiltonianMatrix::new(h.matrix().conjugate_by(&u)).unwrap()
        };
        for ham in [h, rotated] {
            for lambda in [0.0, 0.5, 0.9] {
                let pt = ThermalizingChannel::new(ChannelKind::partial_therm(lambda).unwrap(), ham.clone(), temp()).unwrap();
                assert!((estimate_contraction(&pt, DEFAULT_PROBES, 2).unwrap() - lambda).abs() < 1e-12);
                let pm = ThermalizingChannel::new(ChannelKind::pinch_then_mix(lambda).unwrap(), ham.clone(), temp()).unwrap();
                assert!(estimate_contraction(&pm, DEFAULT_PROBES, 2).unwrap() <= lambda + 1e-9);
                let fixed = pm.apply(pm.target()).unwrap();
                assert!(trace_distance(&fixed, pm.target()).unwrap() < 1e-12);
            }
        }
    }
}

fn arb_qubit_state() -> impl Strategy<Value = DensityOperator<f64>> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(p, r, phi)| {
        let c = r * (p * (1.0 - p)).sqrt();
        let m = CMatrix::from_rows(vec![
            vec![Complex::new(1.0 - p, 0.0), Complex::from_polar(c, phi)],
            vec![Complex::from_polar(c, -phi), Complex::new(p, 0.0)],
        ])
        .unwrap();
        DensityOperator::new(m).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn second_law_bound(rho0 in arb_qubit_state(), n in 1usize..60, alpha in 0.0f64..1.0, unitary in any::<bool>(), pinch in any::<bool>()) {
        let path = rotating_field(1.2, temp()).unwrap();
        let mode = if unitary { EvolutionMode::default() } else { EvolutionMode::Quench };
        let kind = if pinch { ChannelKind::pinch_then_mix(alpha).unwrap() } else { ChannelKind::partial_therm(alpha).unwrap() };
        let proto = CyclicProtocol::new(path, n, kind, mode).unwrap();
        let run = run_cyclic_protocol(&proto, &rho0).unwrap();
        prop_assert!(run.ledger.cumulative_work <= proto.free_energy_bound(&rho0).unwrap() + 1e-9);
        let b = run.breakdown;
        prop_assert!((b.gamma + b.epsilon + b.kappa - b.total).abs() < 1e-9);
    }

    #[test]
    fn channels_never_expand_distances(a in arb_qubit_state(), b in arb_qubit_state(), lambda in 0.0f64..1.0) {
        let h = rotating_field(1.0, temp()).unwrap().at(0.3);
        for kind in [ChannelKind::partial_therm(lambda).unwrap(), ChannelKind::pinch_then_mix(lambda).unwrap()] {
            let ch = ThermalizingChannel::new(kind, h.clone(), temp()).unwrap();
            let before = trace_distance(&a, &b).unwrap();
            let after = trace_distance(&ch.apply(&a).unwrap(), &ch.apply(&b).unwrap()).unwrap();
            prop_assert!(after <= before + 1e-12);
        }
    }
}
