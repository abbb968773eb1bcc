//! Density operators, Hamiltonians and the thermodynamic functionals on them.
//!
//! Natural units throughout: ħ = k_B = 1, energies and temperatures share a
//! unit, entropies are in nats.

use num_complex::Complex;

use crate::error::{check_range, Error, Result};
use crate::linalg::{CMatrix, HermitianEigen};
use crate::scalar::Real;

/// Eigenvalues below this are treated as exactly zero in entropic functionals.
pub const SUPPORT_FLOOR: f64 = 1e-15;
/// Weight of ρ outside supp(σ) tolerated before S(ρ‖σ) is declared infinite.
pub const SUPPORT_TOLERANCE: f64 = 1e-12;
const STATE_TOLERANCE: f64 = 1e-12;

/// Positive temperature with its cached inverse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Temperature<T> {
    t: T,
    beta: T,
}

impl<T: Real> Temperature<T> {
    pub fn new(t: T) -> Result<Self> {
        if !(t > T::zero()) || !t.is_finite() {
            return Err(Error::InvalidTemperature(t.as_f64()));
        }
        Ok(Self { t, beta: t.recip() })
    }

    pub fn from_beta(beta: T) -> Result<Self> {
        Self::new(beta.recip())
    }

    /// T = 1/ln 2, for which k_B·T·ln 2 = 1.
    pub fn bit_units() -> Self {
        Self::new(T::LN_2().recip()).expect("positive")
    }

    #[inline]
    pub fn value(&self) -> T {
        self.t
    }

    #[inline]
    pub fn beta(&self) -> T {
        self.beta
    }
}

/// Hermitian matrix used as a Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianMatrix<T> {
    matrix: CMatrix<T>,
}

impl<T: Real> HamiltonianMatrix<T> {
    /// Validates Hermiticity (max elementwise deviation from H† at most 1e-12)
    /// and stores the Hermitian part.
    pub fn new(matrix: CMatrix<T>) -> Result<Self> {
        if matrix.dim() == 0 {
            return Err(Error::NotSquare);
        }
        let defect = matrix.hermiticity_defect();
        if !(defect <= T::tol(STATE_TOLERANCE)) {
            return Err(Error::NotHermitian(defect.as_f64()));
        }
        if matrix.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical {
                op: "HamiltonianMatrix::new",
                detail: "non-finite matrix element".into(),
            });
        }
        Ok(Self {
            matrix: matrix.hermitian_part(),
        })
    }

    pub fn diagonal(levels: &[T]) -> Result<Self> {
        Self::new(CMatrix::from_diagonal(levels))
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn eigen(&self) -> HermitianEigen<T> {
        self.matrix.eigh()
    }

    /// Largest |eigenvalue|.
    pub fn operator_norm(&self) -> T {
        self.eigen().values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `a·self + b·other`.
    pub fn lincomb(&self, a: T, other: &Self, b: T) -> Result<Self> {
        ensure_same_dim(self.dim(), other.dim())?;
        Ok(Self {
            matrix: self.matrix.lincomb(a, &other.matrix, b),
        })
    }
}

/// A d×d Hermitian, unit-trace, positive semi-definite matrix, stored with
/// its spectral decomposition.
#[derive(Clone, Debug)]
pub struct DensityOperator<T> {
    matrix: CMatrix<T>,
    spectrum: HermitianEigen<T>,
}

impl<T: Real> DensityOperator<T> {
    pub fn new(matrix: CMatrix<T>) -> Result<Self> {
        if matrix.dim() == 0 {
            return Err(Error::NotSquare);
        }
        let tol = T::tol(STATE_TOLERANCE);
        let defect = matrix.hermiticity_defect();
        if !(defect <= tol) {
            return Err(Error::NotHermitian(defect.as_f64()));
        }
        let matrix = matrix.hermitian_part();
        let trace = matrix.trace().re;
        if !((trace - T::one()).abs() <= tol) {
            return Err(Error::InvalidTrace(trace.as_f64()));
        }
        let spectrum = matrix.eigh();
        let min = spectrum.values.first().copied().unwrap_or_else(T::zero);
        if !(min >= -tol) {
            return Err(Error::NotPositive(min.as_f64()));
        }
        Ok(Self { matrix, spectrum })
    }

    /// Diagonal state with the given populations.
    pub fn from_populations(populations: &[T]) -> Result<Self> {
        Self::new(CMatrix::from_diagonal(populations))
    }

    /// |ψ⟩⟨ψ| for a normalized vector.
    pub fn pure(psi: &[Complex<T>]) -> Result<Self> {
        Self::new(CMatrix::projector(psi))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let p = T::from_usize_lossy(dim).recip();
        Self::from_populations(&vec![p; dim]).expect("valid state")
    }

    /// Builds V·diag(p)·V† from a known decomposition; `values` need not be sorted.
    fn from_spectrum(values: Vec<T>, vectors: CMatrix<T>) -> Result<Self> {
        let eig = HermitianEigen { values, vectors };
        let matrix = eig.map_values(|p| Complex::new(p, T::zero()));
        let mut order: Vec<usize> = (0..eig.values.len()).collect();
        order.sort_by(|&i, &j| eig.values[i].partial_cmp(&eig.values[j]).unwrap_or(std::cmp::Ordering::Equal));
        let n = order.len();
        let mut sorted_vectors = CMatrix::zeros(n);
        for (new, &old) in order.iter().enumerate() {
            for i in 0..n {
                sorted_vectors[(i, new)] = eig.vectors[(i, old)];
            }
        }
        let spectrum = HermitianEigen {
            values: order.iter().map(|&i| eig.values[i]).collect(),
            vectors: sorted_vectors,
        };
        let trace = matrix.trace().re;
        if !((trace - T::one()).abs() <= T::tol(STATE_TOLERANCE)) {
            return Err(Error::InvalidTrace(trace.as_f64()));
        }
        Ok(Self { matrix, spectrum })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    /// Eigenvalues in ascending order.
    #[inline]
    pub fn eigenvalues(&self) -> &[T] {
        &self.spectrum.values
    }

    #[inline]
    pub fn spectrum(&self) -> &HermitianEigen<T> {
        &self.spectrum
    }

    /// Diagonal in the computational basis.
    pub fn populations(&self) -> Vec<T> {
        self.matrix.diagonal_re()
    }

    /// Tr(ρH).
    pub fn energy(&self, h: &HamiltonianMatrix<T>) -> Result<T> {
        ensure_same_dim(self.dim(), h.dim())?;
        Ok(self.matrix.trace_product_re(h.matrix()))
    }

    /// U ρ U†.
    pub fn evolve(&self, u: &CMatrix<T>) -> Result<Self> {
        ensure_same_dim(self.dim(), u.dim())?;
        Self::new(self.matrix.conjugate_by(u))
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> T {
        self.spectrum.values.first().copied().unwrap_or_else(T::zero)
    }

    /// Convex combination `w·self + (1−w)·other`.
    pub fn mix(&self, w: T, other: &Self) -> Result<Self> {
        ensure_same_dim(self.dim(), other.dim())?;
        Self::new(self.matrix.lincomb(w, &other.matrix, T::one() - w))
    }
}

pub(crate) fn ensure_same_dim(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(a, b))
    }
}

/// τ = e^{−βH} / Tr e^{−βH}, evaluated through the spectrum of H with the
/// ground energy subtracted before exponentiation.
pub fn gibbs_state<T: Real>(h: &HamiltonianMatrix<T>, temp: Temperature<T>) -> Result<DensityOperator<T>> {
    let eig = h.eigen();
    let ground = eig.values.iter().copied().fold(T::infinity(), T::min);
    let weights: Vec<T> = eig
        .values
        .iter()
        .map(|&e| (-(e - ground) * temp.beta()).exp())
        .collect();
    let z: T = weights.iter().copied().sum();
    let populations = weights.into_iter().map(|w| w / z).collect();
    DensityOperator::from_spectrum(populations, eig.vectors)
}

/// log Z = log Tr e^{−βH}, overflow-free.
pub fn log_partition_function<T: Real>(h: &HamiltonianMatrix<T>, temp: Temperature<T>) -> T {
    let eig = h.eigen();
    let ground = eig.values.iter().copied().fold(T::infinity(), T::min);
    let z: T = eig.values.iter().map(|&e| (-(e - ground) * temp.beta()).exp()).sum();
    z.ln() - ground * temp.beta()
}

/// S(ρ) = −Tr ρ ln ρ in nats.
pub fn von_neumann_entropy<T: Real>(rho: &DensityOperator<T>) -> T {
    let floor = T::lit(SUPPORT_FLOOR);
    rho.eigenvalues()
        .iter()
        .map(|&p| p.max(T::zero()).min(T::one()))
        .filter(|&p| p >= floor)
        .map(|p| -p * p.ln())
        .sum::<T>()
        .max(T::zero())
}

/// F(ρ, H) = Tr(ρH) − T·S(ρ).
pub fn free_energy<T: Real>(rho: &DensityOperator<T>, h: &HamiltonianMatrix<T>, temp: Temperature<T>) -> Result<T> {
    Ok(rho.energy(h)? - temp.value() * von_neumann_entropy(rho))
}

/// Weight of ρ on the (numerical) kernel of σ, if it exceeds the support
/// tolerance.
pub fn support_violation<T: Real>(rho: &DensityOperator<T>, sigma: &DensityOperator<T>) -> Result<Option<T>> {
    ensure_same_dim(rho.dim(), sigma.dim())?;
    let floor = T::lit(SUPPORT_FLOOR);
    let weights = sigma.spectrum().expectations(rho.matrix());
    let outside: T = sigma
        .eigenvalues()
        .iter()
        .zip(&weights)
        .filter(|(&mu, _)| mu < floor)
        .map(|(_, &w)| w.max(T::zero()))
        .sum();
    Ok((outside > T::lit(SUPPORT_TOLERANCE)).then_some(outside))
}

/// S(ρ‖σ) = Tr ρ(ln ρ − ln σ) in nats. Returns `+∞` when supp ρ ⊄ supp σ;
/// [`support_violation`] reports the offending weight.
pub fn relative_entropy<T: Real>(rho: &DensityOperator<T>, sigma: &DensityOperator<T>) -> Result<T> {
    if support_violation(rho, sigma)?.is_some() {
        return Ok(T::infinity());
    }
    let floor = T::lit(SUPPORT_FLOOR);
    let weights = sigma.spectrum().expectations(rho.matrix());
    let cross: T = sigma
        .eigenvalues()
        .iter()
        .zip(&weights)
        .filter(|(&mu, _)| mu >= floor)
        .map(|(&mu, &w)| w * mu.ln())
        .sum();
    let neg_entropy = -von_neumann_entropy(rho);
    Ok((neg_entropy - cross).max(T::zero()))
}

/// ‖ρ − σ‖₁, the sum of absolute eigenvalues of ρ − σ; lies in [0, 2].
pub fn trace_distance<T: Real>(rho: &DensityOperator<T>, sigma: &DensityOperator<T>) -> Result<T> {
    ensure_same_dim(rho.dim(), sigma.dim())?;
    let diff = rho.matrix() - sigma.matrix();
    Ok(diff.trace_norm_hermitian().max(T::zero()).min(T::lit(2.0)))
}

/// ρ' = α·ρ + (1−α)·τ.
pub fn partial_thermalize<T: Real>(rho: &DensityOperator<T>, tau: &DensityOperator<T>, alpha: T) -> Result<DensityOperator<T>> {
    check_range("alpha", alpha.as_f64(), 0.0, 1.0, "[0, 1]")?;
    rho.mix(alpha, tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qubit(p_excited: f64) -> DensityOperator<f64> {
        DensityOperator::from_populations(&[1.0 - p_excited, p_excited]).unwrap()
    }

    #[test]
    fn zero_hamiltonian_gives_maximally_mixed() {
        let temp = Temperature::new(0.7).unwrap();
        let tau = gibbs_state(&HamiltonianMatrix::zero(2), temp).unwrap();
        assert_eq!(tau.populations(), vec![0.5, 0.5]);
    }

    #[test]
    fn qubit_gibbs_matches_excitation_parametrization() {
        let temp = Temperature::<f64>::new(1.3).unwrap();
        let q: f64 = 0.2;
        let e = temp.value() * ((1.0 - q) / q).ln();
        let tau = gibbs_state(&HamiltonianMatrix::diagonal(&[0.0, e]).unwrap(), temp).unwrap();
        let pops = tau.populations();
        assert!((pops[0] - 0.8).abs() < 1e-15);
        assert!((pops[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn gibbs_survives_huge_beta_times_norm() {
        let temp = Temperature::new(1e-3).unwrap();
        let h = HamiltonianMatrix::diagonal(&[5000.0, 0.0, 7000.0]).unwrap();
        let tau = gibbs_state(&h, temp).unwrap();
        assert_eq!(tau.populations(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn non_hermitian_hamiltonian_rejected() {
        let m = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(HamiltonianMatrix::new(m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn invalid_states_rejected() {
        assert!(matches!(
            DensityOperator::from_populations(&[0.6, 0.6]),
            Err(Error::InvalidTrace(_))
        ));
        assert!(matches!(
            DensityOperator::from_populations(&[1.5, -0.5]),
            Err(Error::NotPositive(_))
        ));
        assert!(Temperature::new(0.0f64).is_err());
        assert!(Temperature::new(-1.0f64).is_err());
    }

    #[test]
    fn temperature_inverse_consistent() {
        let t = Temperature::<f64>::new(0.37).unwrap();
        assert!((t.value() * t.beta() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(von_neumann_entropy(&qubit(0.0)), 0.0);
        assert!((von_neumann_entropy(&qubit(0.5)) - 2f64.ln()).abs() < 1e-15);
        let expected = -0.75 * 0.75f64.ln() - 0.25 * 0.25f64.ln();
        assert!((von_neumann_entropy(&qubit(0.25)) - expected).abs() < 1e-15);
    }

    #[test]
    fn free_energy_examples() {
        let temp = Temperature::new(0.9).unwrap();
        let e = 1.7;
        let h = HamiltonianMatrix::diagonal(&[0.0, e]).unwrap();
        let tau = gibbs_state(&h, temp).unwrap();
        let ln_z = (1.0 + (-e / 0.9f64).exp()).ln();
        assert!((free_energy(&tau, &h, temp).unwrap() + 0.9 * ln_z).abs() < 1e-14);
        assert_eq!(free_energy(&qubit(0.0), &h, temp).unwrap(), 0.0);

        let zero = HamiltonianMatrix::zero(2);
        let gap = free_energy(&qubit(0.0), &zero, temp).unwrap() - free_energy(&qubit(0.5), &zero, temp).unwrap();
        assert!((gap - 0.9 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn free_energy_dimension_mismatch() {
        let temp = Temperature::new(1.0).unwrap();
        let h = HamiltonianMatrix::zero(3);
        assert!(matches!(free_energy(&qubit(0.3), &h, temp), Err(Error::DimensionMismatch(2, 3))));
    }

    #[test]
    fn relative_entropy_diagonal_is_binary_kl() {
        let (p, q): (f64, f64) = (0.3, 0.55);
        let kl = p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
        let s = relative_entropy(&qubit(p), &qubit(q)).unwrap();
        assert!((s - kl).abs() < 1e-14);
        assert_eq!(relative_entropy(&qubit(p), &qubit(p)).unwrap(), 0.0);
    }

    #[test]
    fn relative_entropy_support_violation_is_infinite() {
        let s = relative_entropy(&qubit(0.5), &qubit(0.0)).unwrap();
        assert!(s.is_infinite());
        let w = support_violation(&qubit(0.5), &qubit(0.0)).unwrap().unwrap();
        assert!((w - 0.5).abs() < 1e-15);
        assert_eq!(relative_entropy(&qubit(0.0), &qubit(0.5)).unwrap(), 2f64.ln());
    }

    #[test]
    fn trace_distance_examples() {
        assert_eq!(trace_distance(&qubit(0.3), &qubit(0.3)).unwrap(), 0.0);
        assert_eq!(trace_distance(&qubit(0.0), &qubit(1.0)).unwrap(), 2.0);
        assert!((trace_distance(&qubit(0.2), &qubit(0.7)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partial_thermalize_examples() {
        let rho = qubit(0.0);
        let tau = qubit(0.5);
        assert_eq!(partial_thermalize(&rho, &tau, 0.0).unwrap().populations(), tau.populations());
        assert_eq!(partial_thermalize(&rho, &tau, 1.0).unwrap().populations(), rho.populations());
        assert_eq!(partial_thermalize(&rho, &tau, 0.5).unwrap().populations(), vec![0.75, 0.25]);
        assert!(matches!(
            partial_thermalize(&rho, &tau, 1.5),
            Err(Error::OutOfRange { name: "alpha", .. })
        ));
    }

    #[test]
    fn single_precision_gibbs() {
        let temp = Temperature::<f32>::new(1.0).unwrap();
        let h = HamiltonianMatrix::<f32>::diagonal(&[0.0, 1.0]).unwrap();
        let tau = gibbs_state(&h, temp).unwrap();
        let expected = 1.0 / (1.0 + 1f32.exp());
        assert!((tau.populations()[1] - expected).abs() < 1e-6);
    }
}
