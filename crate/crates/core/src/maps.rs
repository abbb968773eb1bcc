//! Time-dependent Hamiltonian protocols with generic thermalizing channels.
//!
//! A protocol alternates unitary evolution under `H(t)` (or an instantaneous
//! quench) with a contact `σ⁽ⁱ⁾ = G⁽ⁱ⁾(ρ⁽ⁱ⁾)` whose fixed point is the Gibbs
//! state of `H(tᵢ)`, `tᵢ = i/N`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_distr::Exp1;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;

use crate::collision::{neumaier_sum, WorkLedger};
use crate::error::{check_range, Error, Result};
use crate::linalg::{haar_state, CMatrix};
use crate::qudit::HamiltonianPath;
use crate::scalar::Real;
use crate::thermo::{free_energy, gibbs_state, trace_distance, DensityOperator, HamiltonianMatrix, Temperature};

/// Default number of midpoint substeps per protocol step.
pub const DEFAULT_SUBSTEPS: usize = 16;
/// Default number of probe states in [`estimate_contraction`].
pub const DEFAULT_PROBES: usize = 200;
/// Required `‖G(τ) − τ‖₁`.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-12;
/// Required `max|H(0) − H(1)|` for a cyclic path.
pub const CYCLIC_TOLERANCE: f64 = 1e-12;
/// Allowed `max|U†U − 1|` for a computed propagator.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;
/// Allowed violation of `γ + ε + κ = ΔF_iso − W_iso`.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

const BOUND_GRID: usize = 64;

/// User-supplied channel: receives the input state, the contact Hamiltonian
/// and its Gibbs state.
pub type CustomMap<T> = Arc<
    dyn Fn(&DensityOperator<T>, &HamiltonianMatrix<T>, &DensityOperator<T>) -> Result<DensityOperator<T>> + Send + Sync,
>;

#[derive(Clone)]
pub enum ChannelKind<T> {
    /// `ρ ↦ λρ + (1−λ)τ`.
    PartialTherm { lambda: T },
    /// Dephase in the eigenbasis of `H`, then `ρ ↦ λρ + (1−λ)τ`.
    PinchThenMix { lambda: T },
    Custom { map: CustomMap<T>, declared_alpha: T },
}

impl<T: fmt::Debug> fmt::Debug for ChannelKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelKind::PartialTherm { lambda } => f.debug_struct("PartialTherm").field("lambda", lambda).finish(),
            ChannelKind::PinchThenMix { lambda } => f.debug_struct("PinchThenMix").field("lambda", lambda).finish(),
            ChannelKind::Custom { declared_alpha, .. } => {
                f.debug_struct("Custom").field("declared_alpha", declared_alpha).finish_non_exhaustive()
            }
        }
    }
}

impl<T: Real> ChannelKind<T> {
    pub fn partial_therm(lambda: T) -> Result<Self> {
        check_range("lambda", lambda.as_f64(), 0.0, 1.0, "[0, 1]")?;
        Ok(ChannelKind::PartialTherm { lambda })
    }

    pub fn pinch_then_mix(lambda: T) -> Result<Self> {
        check_range("lambda", lambda.as_f64(), 0.0, 1.0, "[0, 1]")?;
        Ok(ChannelKind::PinchThenMix { lambda })
    }

    pub fn custom<F>(declared_alpha: T, map: F) -> Result<Self>
    where
        F: Fn(&DensityOperator<T>, &HamiltonianMatrix<T>, &DensityOperator<T>) -> Result<DensityOperator<T>>
            + Send
            + Sync
            + 'static,
    {
        check_range("declared_alpha", declared_alpha.as_f64(), 0.0, 1.0, "[0, 1]")?;
        Ok(ChannelKind::Custom {
            map: Arc::new(map),
            declared_alpha,
        })
    }

    /// The contraction factor the channel promises.
    pub fn declared_alpha(&self) -> T {
        match self {
            ChannelKind::PartialTherm { lambda } | ChannelKind::PinchThenMix { lambda } => *lambda,
            ChannelKind::Custom { declared_alpha, .. } => *declared_alpha,
        }
    }
}

/// A channel bound to one contact Hamiltonian.
#[derive(Clone, Debug)]
pub struct ThermalizingChannel<T> {
    kind: ChannelKind<T>,
    hamiltonian: HamiltonianMatrix<T>,
    target: DensityOperator<T>,
}

impl<T: Real> ThermalizingChannel<T> {
    /// Binds `kind` to `h`; custom maps are checked to fix `τ`.
    pub fn new(kind: ChannelKind<T>, h: HamiltonianMatrix<T>, temp: Temperature<T>) -> Result<Self> {
        let target = gibbs_state(&h, temp)?;
        let channel = Self {
            kind,
            hamiltonian: h,
            target,
        };
        if let ChannelKind::Custom { .. } = channel.kind {
            let drift = trace_distance(&channel.apply(&channel.target)?, &channel.target)?;
            if !(drift < T::tol(FIXED_POINT_TOLERANCE)) {
                return Err(Error::Unsupported(format!(
                    "custom channel does not fix the Gibbs state (drift {:e})",
                    drift.as_f64()
                )));
            }
        }
        Ok(channel)
    }

    pub fn kind(&self) -> &ChannelKind<T> {
        &self.kind
    }

    pub fn target(&self) -> &DensityOperator<T> {
        &self.target
    }

    pub fn hamiltonian(&self) -> &HamiltonianMatrix<T> {
        &self.hamiltonian
    }

    pub fn declared_alpha(&self) -> T {
        self.kind.declared_alpha()
    }

    pub fn apply(&self, rho: &DensityOperator<T>) -> Result<DensityOperator<T>> {
        match &self.kind {
            ChannelKind::PartialTherm { lambda } => rho.mix(*lambda, &self.target),
            ChannelKind::PinchThenMix { lambda } => pinch(rho, &self.hamiltonian)?.mix(*lambda, &self.target),
            ChannelKind::Custom { map, .. } => {
                let out = map(rho, &self.hamiltonian, &self.target)?;
                if out.dim() != rho.dim() {
                    return Err(Error::DimensionMismatch(out.dim(), rho.dim()));
                }
                Ok(out)
            }
        }
    }
}

/// Σ_g Π_g ρ Π_g over the eigenspaces of `h`; eigenvalues closer than a
/// relative 1e-9 share a projector.
pub fn pinch<T: Real>(rho: &DensityOperator<T>, h: &HamiltonianMatrix<T>) -> Result<DensityOperator<T>> {
    if rho.dim() != h.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), h.dim()));
    }
    let eig = h.eigen();
    let n = h.dim();
    let scale = T::one().max(h.operator_norm());
    let gap = T::lit(1e-9) * scale;
    let mut out = CMatrix::zeros(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eig.values[end] - eig.values[end - 1] <= gap {
            end += 1;
        }
        let mut proj = CMatrix::zeros(n);
        for k in start..end {
            let v = eig.vector(k);
            for i in 0..n {
                for j in 0..n {
                    proj[(i, j)] += v[i] * v[j].conj();
                }
            }
        }
        let block = &(&proj * rho.matrix()) * &proj;
        out = &out + &block;
        start = end;
    }
    DensityOperator::new(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EvolutionMode {
    /// Midpoint product of `substeps` exponentials per step.
    Unitary { substeps: usize },
    /// Instantaneous Hamiltonian change; the state is untouched.
    Quench,
}

impl Default for EvolutionMode {
    fn default() -> Self {
        EvolutionMode::Unitary {
            substeps: DEFAULT_SUBSTEPS,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CyclicProtocol<T> {
    pub path: HamiltonianPath<T>,
    pub n: usize,
    pub channel: ChannelKind<T>,
    pub mode: EvolutionMode,
    /// Duration of one bath contact.
    pub t_th: T,
    cyclic: bool,
}

impl<T: Real> CyclicProtocol<T> {
    /// Requires `H(0) = H(1)`.
    pub fn new(path: HamiltonianPath<T>, n: usize, channel: ChannelKind<T>, mode: EvolutionMode) -> Result<Self> {
        let gap = (path.at(T::zero()).matrix() - path.at(T::one()).matrix()).max_abs();
        if !(gap < T::tol(CYCLIC_TOLERANCE)) {
            return Err(Error::InvalidSchedule(format!(
                "path is not cyclic: max |H(0) - H(1)| = {:e}",
                gap.as_f64()
            )));
        }
        Self::build(path, n, channel, mode, true)
    }

    /// Same protocol on a path with distinct endpoints.
    pub fn open_segment(path: HamiltonianPath<T>, n: usize, channel: ChannelKind<T>, mode: EvolutionMode) -> Result<Self> {
        Self::build(path, n, channel, mode, false)
    }

    fn build(path: HamiltonianPath<T>, n: usize, channel: ChannelKind<T>, mode: EvolutionMode, cyclic: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSchedule("N must be at least 1".into()));
        }
        if let EvolutionMode::Unitary { substeps: 0 } = mode {
            return Err(Error::InvalidSchedule("substeps must be at least 1".into()));
        }
        Ok(Self {
            path,
            n,
            channel,
            mode,
            t_th: T::one(),
            cyclic,
        })
    }

    pub fn with_contact_time(mut self, t_th: T) -> Self {
        self.t_th = t_th;
        self
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    /// `𝒯 = N·t_th`.
    pub fn total_time(&self) -> T {
        T::from_usize_lossy(self.n) * self.t_th
    }

    pub fn contact_time(&self, i: usize) -> T {
        T::from_usize_lossy(i) / T::from_usize_lossy(self.n)
    }

    /// `F(τ(0), H(0)) − F(τ(1), H(1))`; zero for cyclic paths.
    pub fn delta_f_iso(&self) -> Result<T> {
        if self.cyclic {
            return Ok(T::zero());
        }
        let temp = self.path.temperature();
        let (h0, h1) = (self.path.at(T::zero()), self.path.at(T::one()));
        Ok(free_energy(&gibbs_state(&h0, temp)?, &h0, temp)? - free_energy(&gibbs_state(&h1, temp)?, &h1, temp)?)
    }

    /// Upper bound on the extracted work, `F(ρ₀, H(0)) − F(τ(1), H(1))`.
    pub fn free_energy_bound(&self, rho0: &DensityOperator<T>) -> Result<T> {
        let temp = self.path.temperature();
        let (h0, h1) = (self.path.at(T::zero()), self.path.at(T::one()));
        Ok(free_energy(rho0, &h0, temp)? - free_energy(&gibbs_state(&h1, temp)?, &h1, temp)?)
    }
}

/// Time-ordered propagator from `t_start` to `t_end`, approximated by the
/// product of `e^{−iH(t_mid)Δ}` over `substeps` equal slices.
pub fn evolve_unitary<T: Real>(path: &HamiltonianPath<T>, t_start: T, t_end: T, substeps: usize) -> Result<CMatrix<T>> {
    if !(t_start < t_end) {
        return Err(Error::InvalidSchedule("evolve_unitary needs t_start < t_end".into()));
    }
    if substeps == 0 {
        return Err(Error::InvalidSchedule("substeps must be at least 1".into()));
    }
    let dt = (t_end - t_start) / T::from_usize_lossy(substeps);
    let mut u = CMatrix::identity(path.dim());
    for j in 0..substeps {
        let mid = t_start + (T::from_usize_lossy(j) + T::lit(0.5)) * dt;
        let step = path.at(mid).matrix().exp_i_hermitian(dt);
        u = &step * &u;
    }
    let defect = (&(&u.adjoint() * &u) - &CMatrix::identity(path.dim())).max_abs();
    if !(defect < T::tol(UNITARITY_TOLERANCE)) {
        return Err(Error::Numerical {
            op: "evolve_unitary",
            detail: format!("propagator not unitary (defect {:e})", defect.as_f64()),
        });
    }
    Ok(u)
}

/// `‖U_i − e^{−iH(tᵢ)/N}‖` (operator norm) for step `i ∈ 1..=N`.
pub fn unitary_approx_error<T: Real>(path: &HamiltonianPath<T>, i: usize, n: usize, substeps: usize) -> Result<T> {
    let (t0, t1) = step_window(i, n)?;
    let u = evolve_unitary(path, t0, t1, substeps)?;
    let frozen = path.at(t1).matrix().exp_i_hermitian(t1 - t0);
    Ok((&u - &frozen).operator_norm())
}

/// `e^{‖H‖δt}·δt·max_t‖H(t) − H(tᵢ)‖`, with both maxima taken over a grid on
/// the step window.
pub fn unitary_error_bound<T: Real>(path: &HamiltonianPath<T>, i: usize, n: usize) -> Result<T> {
    let (t0, t1) = step_window(i, n)?;
    let dt = t1 - t0;
    let hi = path.at(t1);
    let mut h_norm = hi.operator_norm();
    let mut drift = T::zero();
    for j in 0..=BOUND_GRID {
        let t = t0 + dt * T::from_usize_lossy(j) / T::from_usize_lossy(BOUND_GRID);
        let h = path.at(t);
        h_norm = h_norm.max(h.operator_norm());
        drift = drift.max((h.matrix() - hi.matrix()).operator_norm());
    }
    Ok((h_norm * dt).exp() * dt * drift)
}

fn step_window<T: Real>(i: usize, n: usize) -> Result<(T, T)> {
    if n == 0 || i == 0 || i > n {
        return Err(Error::OutOfRange {
            name: "step index",
            value: i as f64,
            range: "1..=N",
        });
    }
    let nf = T::from_usize_lossy(n);
    Ok((T::from_usize_lossy(i - 1) / nf, T::from_usize_lossy(i) / nf))
}

#[derive(Clone, Debug)]
pub struct CyclicRun<T> {
    pub ledger: WorkLedger<T>,
    pub final_state: DensityOperator<T>,
    /// `‖σ⁽ⁱ⁾ − τ⁽ⁱ⁾‖₁` for `i = 0..=N`.
    pub lag: Vec<T>,
    pub breakdown: DissipationBreakdown<T>,
}

/// `ΔF_iso − W_iso = γ + ε + κ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DissipationBreakdown<T> {
    pub gamma: T,
    pub epsilon: T,
    pub kappa: T,
    pub total: T,
    pub w_iso: T,
    pub delta_f_iso: T,
}

/// Runs the protocol from `rho0`; step work is
/// `Tr(H⁽ⁱ⁻¹⁾σ⁽ⁱ⁻¹⁾ − H⁽ⁱ⁾ρ⁽ⁱ⁾)`.
pub fn run_cyclic_protocol<T: Real>(protocol: &CyclicProtocol<T>, rho0: &DensityOperator<T>) -> Result<CyclicRun<T>> {
    let path = &protocol.path;
    if rho0.dim() != path.dim() {
        return Err(Error::DimensionMismatch(rho0.dim(), path.dim()));
    }
    let temp = path.temperature();
    let n = protocol.n;

    let mut h_prev = path.at(T::zero());
    let mut tau_prev = gibbs_state(&h_prev, temp)?;
    let mut sigma = rho0.clone();
    let mut lag = Vec::with_capacity(n + 1);
    lag.push(trace_distance(&sigma, &tau_prev)?);

    let mut work = Vec::with_capacity(n);
    let (mut gamma_terms, mut eps_terms, mut kappa_terms) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));

    for i in 1..=n {
        let (t0, t1) = (protocol.contact_time(i - 1), protocol.contact_time(i));
        let h = path.at(t1);
        let rho = match protocol.mode {
            EvolutionMode::Quench => sigma.clone(),
            EvolutionMode::Unitary { substeps } => sigma.evolve(&evolve_unitary(path, t0, t1, substeps)?)?,
        };
        let dh = h_prev.matrix() - h.matrix();
        work.push(sigma.matrix().trace_product_re(h_prev.matrix()) - rho.matrix().trace_product_re(h.matrix()));
        gamma_terms.push(tau_prev.matrix().trace_product_re(&dh));
        eps_terms.push(-(sigma.matrix() - tau_prev.matrix()).trace_product_re(&dh));
        kappa_terms.push(match protocol.mode {
            EvolutionMode::Quench => T::zero(),
            EvolutionMode::Unitary { .. } => -(sigma.matrix() - rho.matrix()).trace_product_re(h.matrix()),
        });

        let channel = ThermalizingChannel::new(protocol.channel.clone(), h.clone(), temp)?;
        sigma = channel.apply(&rho)?;
        lag.push(trace_distance(&sigma, channel.target())?);
        tau_prev = channel.target;
        h_prev = h;
    }

    let ledger = WorkLedger::deterministic(work, T::zero());
    let delta_f_iso = protocol.delta_f_iso()?;
    let breakdown = DissipationBreakdown {
        gamma: delta_f_iso - neumaier_sum(&gamma_terms),
        epsilon: neumaier_sum(&eps_terms),
        kappa: neumaier_sum(&kappa_terms),
        total: delta_f_iso - ledger.cumulative_work,
        w_iso: ledger.cumulative_work,
        delta_f_iso,
    };
    let defect = (breakdown.gamma + breakdown.epsilon + breakdown.kappa - breakdown.total).abs();
    if !(defect <= T::tol(IDENTITY_TOLERANCE)) {
        return Err(Error::Numerical {
            op: "dissipation_breakdown",
            detail: format!("gamma + epsilon + kappa misses the total by {:e}", defect.as_f64()),
        });
    }
    Ok(CyclicRun {
        ledger,
        final_state: sigma,
        lag,
        breakdown,
    })
}

/// The γ/ε/κ split of one run; the identity is checked to 1e-9.
pub fn dissipation_breakdown<T: Real>(
    protocol: &CyclicProtocol<T>,
    rho0: &DensityOperator<T>,
) -> Result<DissipationBreakdown<T>> {
    run_cyclic_protocol(protocol, rho0).map(|run| run.breakdown)
}

/// Largest observed `‖G(ρ) − τ‖₁ / ‖ρ − τ‖₁` over `probes` random states,
/// half Haar-random pure and half random diagonal. Probes within 1e-12 of
/// `τ` are skipped.
pub fn estimate_contraction<T: Real>(channel: &ThermalizingChannel<T>, probes: usize, seed: u64) -> Result<T> {
    if probes == 0 {
        return Err(Error::OutOfRange {
            name: "probes",
            value: 0.0,
            range: ">= 1",
        });
    }
    let dim = channel.target().dim();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut worst = T::zero();
    for k in 0..probes {
        let rho = if k % 2 == 0 {
            DensityOperator::pure(&haar_state::<T, _>(dim, &mut rng))?
        } else {
            random_diagonal_state(dim, &mut rng)?
        };
        let before = trace_distance(&rho, channel.target())?;
        if before < T::lit(1e-12) {
            continue;
        }
        let after = trace_distance(&channel.apply(&rho)?, channel.target())?;
        worst = worst.max(after / before);
    }
    Ok(worst)
}

/// Populations uniform on the simplex.
fn random_diagonal_state<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<DensityOperator<T>> {
    let w: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let z: f64 = w.iter().sum();
    let pops: Vec<T> = w.iter().map(|x| T::lit(x / z)).collect();
    DensityOperator::from_populations(&pops)
}
