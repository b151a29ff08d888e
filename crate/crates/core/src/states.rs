//! Physical states and operators: thermal states, Bell states, random
//! unitaries and random mixed states, plus the engine's initial register.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::engine::EngineScenario;
use crate::error::{Error, Result};
use crate::linalg::{self, herm_eig, kron, partial_trace, ComplexMatrix, SubsystemLayout, TAU_HERM};

/// Eigenvalue floor for the positivity check of a density matrix.
pub const PSD_TOL: f64 = 1e-10;
/// Allowed deviation of the trace from one.
pub const TRACE_TOL: f64 = 1e-9;

/// Deterministic generator used everywhere randomness is needed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Child seed for item `index` of a run seeded with `master` (splitmix64).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hermitian, unit-trace, positive semidefinite matrix tagged with its
/// tensor-factor layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    layout: SubsystemLayout,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix, layout: SubsystemLayout) -> Result<Self> {
        let n = matrix.require_square()?;
        if n != layout.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state of dimension {n} does not match layout {layout}"
            )));
        }
        let dev = linalg::hermitian_deviation(&matrix);
        if dev > TAU_HERM {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
        }
        let matrix = matrix.hermitian_part();
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = linalg::herm_eigenvalues(&matrix)?[0];
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        Ok(Self { matrix, layout })
    }

    /// Normalizes a nonzero PSD operator to unit trace.
    pub fn from_unnormalized(matrix: ComplexMatrix, layout: SubsystemLayout) -> Result<Self> {
        let tr = matrix.trace().re;
        if tr <= 0.0 {
            return Err(Error::InvalidState(format!(
                "cannot normalize operator with trace {tr}"
            )));
        }
        Self::new(matrix.scale_real(1.0 / tr), layout)
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) vector.
    pub fn pure(psi: &[Complex64], layout: SubsystemLayout) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        Self::new(ComplexMatrix::outer(psi, psi).scale_real(1.0 / norm2), layout)
    }

    /// Computational-basis product state |i₀ i₁ …⟩ on `layout`.
    pub fn basis_state(layout: SubsystemLayout, indices: &[usize]) -> Result<Self> {
        let dims = layout.dims();
        if indices.len() != dims.len() || indices.iter().zip(&dims).any(|(i, d)| i >= d) {
            return Err(Error::DimensionMismatch(format!(
                "basis indices {indices:?} do not fit layout {layout}"
            )));
        }
        let flat = indices.iter().zip(&dims).fold(0, |acc, (i, d)| acc * d + i);
        let mut psi = vec![Complex64::new(0.0, 0.0); layout.dim()];
        psi[flat] = Complex64::new(1.0, 0.0);
        Self::pure(&psi, layout)
    }

    pub fn maximally_mixed(layout: SubsystemLayout) -> Self {
        let d = layout.dim();
        Self {
            matrix: ComplexMatrix::identity(d).scale_real(1.0 / d as f64),
            layout,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Same matrix, different factor labels.
    pub fn with_layout(self, layout: SubsystemLayout) -> Result<Self> {
        if layout.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot relabel a state of dimension {} with layout {layout}",
                self.dim()
            )));
        }
        Ok(Self { layout, ..self })
    }

    /// Reduced state on `keep` (kept in layout order).
    pub fn reduce(&self, keep: &[&str]) -> Result<Self> {
        let m = partial_trace(&self.matrix, &self.layout, keep)?;
        Self::new(m, self.layout.restrict(keep)?)
    }

    /// `self ⊗ other`, concatenating layouts.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let factors = self
            .layout
            .factors()
            .iter()
            .chain(other.layout.factors())
            .map(|f| (f.name.clone(), f.dim));
        Ok(Self {
            matrix: kron(&self.matrix, &other.matrix),
            layout: SubsystemLayout::new(factors)?,
        })
    }

    /// `U ρ U†` for a unitary `U` on the full register.
    pub fn evolve(&self, u: &ComplexMatrix) -> Result<Self> {
        Self::new(self.matrix.conjugate_by(u)?, self.layout.clone())
    }

    pub fn purity(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).map(|z| z.re).unwrap_or(0.0)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::herm_eigenvalues(&self.matrix).unwrap_or_default()
    }
}

/// A named Hermitian operator in energy units. Reservoir terms also carry a
/// temperature (k_B = 1 unless the scenario overrides it).
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTerm {
    pub name: String,
    pub matrix: ComplexMatrix,
    pub temperature: Option<f64>,
}

impl HamiltonianTerm {
    pub fn new(name: impl Into<String>, matrix: ComplexMatrix, temperature: Option<f64>) -> Result<Self> {
        let name = name.into();
        matrix.require_square()?;
        let dev = linalg::hermitian_deviation(&matrix);
        if dev > TAU_HERM {
            return Err(Error::NotHermitian(dev));
        }
        if let Some(t) = temperature {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "temperature of `{name}` must be positive, got {t}"
                )));
            }
        }
        Ok(Self {
            name,
            matrix: matrix.hermitian_part(),
            temperature,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Two-level term diag(0, gap).
    pub fn qubit(name: impl Into<String>, gap: f64, temperature: Option<f64>) -> Result<Self> {
        Self::new(name, ComplexMatrix::from_real_diag(&[0.0, gap]), temperature)
    }
}

/// Thermal state together with its partition function.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub state: DensityMatrix,
    pub partition_function: f64,
    /// ln Z, finite even when Z itself over- or underflows.
    pub ln_partition_function: f64,
}

/// exp(−βH)/Z on a single factor named after the term.
pub fn gibbs_state(h: &HamiltonianTerm, beta: f64) -> Result<GibbsState> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidScenario(format!("beta must be positive, got {beta}")));
    }
    let eig = herm_eig(&h.matrix)?;
    let e0 = eig.values[0];
    let weights: Vec<f64> = eig.values.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let sum: f64 = weights.iter().sum();
    let ln_z = -beta * e0 + sum.ln();
    let rho = linalg::reassemble(&eig, |e| Complex64::new((-beta * (e - e0)).exp() / sum, 0.0));
    let layout = SubsystemLayout::new([(h.name.clone(), h.dim())])?;
    Ok(GibbsState {
        state: DensityMatrix::new(rho, layout)?,
        partition_function: ln_z.exp(),
        ln_partition_function: ln_z,
    })
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Haar-distributed unitary drawn from `rng`.
///
/// Orthonormalizes the columns of a complex Ginibre matrix. Gram–Schmidt
/// yields the QR factor with a positive real R diagonal, which is exactly
/// the phase convention that makes Q Haar-distributed.
pub fn haar_unitary_with<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    loop {
        let z = gaussian_matrix(rng, dim, dim);
        if let Some(q) = orthonormalize_columns(&z) {
            return q;
        }
    }
}

pub fn haar_random_unitary(dim: usize, seed: u64) -> ComplexMatrix {
    haar_unitary_with(&mut rng_from_seed(seed), dim)
}

/// Modified Gram–Schmidt with one reorthogonalization pass. `None` if the
/// columns are numerically dependent.
fn orthonormalize_columns(m: &ComplexMatrix) -> Option<ComplexMatrix> {
    let mut cols: Vec<Vec<Complex64>> = (0..m.cols()).map(|j| m.column(j)).collect();
    for j in 0..cols.len() {
        for _ in 0..2 {
            for i in 0..j {
                let proj: Complex64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a.conj() * b).sum();
                let (head, tail) = cols.split_at_mut(j);
                for (x, q) in tail[0].iter_mut().zip(&head[i]) {
                    *x -= proj * q;
                }
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-10 {
            return None;
        }
        for x in &mut cols[j] {
            *x /= norm;
        }
    }
    ComplexMatrix::from_columns(&cols).ok()
}

/// ρ = G G† / tr(G G†) with G a `dim × rank` complex Gaussian matrix.
pub fn random_density_matrix_with<R: Rng + ?Sized>(
    rng: &mut R,
    layout: SubsystemLayout,
    rank: usize,
) -> Result<DensityMatrix> {
    let dim = layout.dim();
    if rank == 0 || rank > dim {
        return Err(Error::InvalidState(format!("rank {rank} out of range 1..={dim}")));
    }
    let g = gaussian_matrix(rng, dim, rank);
    let gg = &g * &g.dagger();
    DensityMatrix::from_unnormalized(gg, layout)
}

/// Random state of the given rank on a single factor named `X`.
pub fn random_density_matrix(dim: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    let layout = SubsystemLayout::new([("X", dim)])?;
    random_density_matrix_with(&mut rng_from_seed(seed), layout, rank)
}

/// Random Hermitian matrix with Gaussian entries of unit scale.
pub fn random_hermitian_with<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    gaussian_matrix(rng, dim, dim).hermitian_part()
}

/// |Φ⁺⟩⟨Φ⁺| with |Φ⁺⟩ = (|00⟩ + |11⟩)/√2 on (A:2, B:2).
pub fn bell_state() -> DensityMatrix {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let layout = SubsystemLayout::new([("A", 2), ("B", 2)]).expect("static layout");
    DensityMatrix::pure(&[one, zero, zero, one], layout).expect("static state")
}

/// Thermal system ⊗ thermal reservoirs ⊗ ρ_AB on the canonical layout
/// (S, R_1..R_n, A, B).
pub fn build_initial_state(scenario: &EngineScenario) -> Result<DensityMatrix> {
    let mut state = gibbs_state(&scenario.h_s_initial, scenario.beta())?.state;
    for (m, r) in scenario.reservoirs.iter().enumerate() {
        let g = gibbs_state(r, scenario.reservoir_beta(m)?)?;
        state = state.tensor(&g.state)?;
    }
    let full = state.tensor(&scenario.rho_ab_initial)?;
    let layout = scenario.layout()?;
    if full.layout() != &layout {
        return Err(Error::DimensionMismatch(format!(
            "initial state layout {} differs from scenario layout {layout}",
            full.layout()
        )));
    }
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{conditional_entropy, vn_entropy};
    use crate::linalg::is_unitary;

    #[test]
    fn gibbs_flat_spectrum() {
        let h = HamiltonianTerm::new("S", ComplexMatrix::zeros(2, 2), None).unwrap();
        let g = gibbs_state(&h, 3.7).unwrap();
        assert!((g.partition_function - 2.0).abs() < 1e-14);
        let half = ComplexMatrix::from_real_diag(&[0.5, 0.5]);
        assert!(g.state.matrix().max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn gibbs_ln2_gap() {
        let eps = 1.3;
        let beta = std::f64::consts::LN_2 / eps;
        let h = HamiltonianTerm::qubit("S", eps, None).unwrap();
        let g = gibbs_state(&h, beta).unwrap();
        assert!((g.partition_function - 1.5).abs() < 1e-14);
        let want = ComplexMatrix::from_real_diag(&[2.0 / 3.0, 1.0 / 3.0]);
        assert!(g.state.matrix().max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn gibbs_ground_state_limit() {
        let h = HamiltonianTerm::qubit("S", 1.0, None).unwrap();
        let g = gibbs_state(&h, 50.0).unwrap();
        let p1 = g.state.matrix()[(1, 1)].re;
        assert!((0.0..1e-20).contains(&p1));
        assert!((g.state.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gibbs_rejects_bad_beta() {
        let h = HamiltonianTerm::qubit("S", 1.0, None).unwrap();
        assert!(gibbs_state(&h, 0.0).is_err());
        assert!(gibbs_state(&h, f64::NAN).is_err());
    }

    #[test]
    fn gibbs_commutes_and_free_energy_identity() {
        let mut rng = rng_from_seed(11);
        for _ in 0..20 {
            let m = random_hermitian_with(&mut rng, 4);
            let h = HamiltonianTerm::new("S", m, None).unwrap();
            let beta: f64 = rng.random_range(0.2..3.0);
            let g = gibbs_state(&h, beta).unwrap();
            let rho = g.state.matrix();
            let comm = &(rho * &h.matrix) - &(&h.matrix * rho);
            assert!(comm.max_abs() < 1e-10);
            let energy = rho.trace_product(&h.matrix).unwrap().re;
            let f_state = energy - vn_entropy(&g.state) / beta;
            let f_z = -g.ln_partition_function / beta;
            assert!((f_state - f_z).abs() < 1e-9, "{f_state} vs {f_z}");
        }
    }

    #[test]
    fn haar_properties() {
        let u = haar_random_unitary(1, 5);
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert_eq!(haar_random_unitary(4, 99), haar_random_unitary(4, 99));
        for d in [2, 3, 6] {
            assert!(is_unitary(&haar_random_unitary(d, d as u64), 1e-10));
        }
    }

    #[test]
    fn haar_column_normalization_monte_carlo() {
        // Averaging over all entries is trivially 1/4 by unitarity, so track
        // a single fixed entry.
        let samples = 1000;
        let mut rng = rng_from_seed(7);
        let mean: f64 = (0..samples)
            .map(|_| haar_unitary_with(&mut rng, 4)[(0, 0)].norm_sqr())
            .sum::<f64>()
            / samples as f64;
        assert!((mean - 0.25).abs() < 0.02, "mean |u00|^2 = {mean}");
    }

    #[test]
    fn random_states_have_requested_rank() {
        let pure = random_density_matrix(3, 1, 1).unwrap();
        assert!(vn_entropy(&pure) < 1e-10);
        for seed in 0..50 {
            let r = random_density_matrix(2, 2, seed).unwrap();
            assert!((r.matrix().trace().re - 1.0).abs() < 1e-12);
        }
        let r = random_density_matrix(4, 2, 3).unwrap();
        let above = r.eigenvalues().iter().filter(|&&v| v > 1e-12).count();
        assert_eq!(above, 2);
        assert!(random_density_matrix(2, 3, 0).is_err());
        assert!(random_density_matrix(2, 0, 0).is_err());
    }

    #[test]
    fn bell_state_values() {
        let bell = bell_state();
        assert!((bell.purity() - 1.0).abs() < 1e-14);
        let a = bell.reduce(&["A"]).unwrap();
        assert!(a.matrix().max_abs_diff(&ComplexMatrix::from_real_diag(&[0.5, 0.5])) < 1e-15);
        let s = conditional_entropy(&bell, &["A"], &["B"]).unwrap();
        assert!((s + std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn density_matrix_validation() {
        let l = SubsystemLayout::new([("X", 2)]).unwrap();
        assert!(DensityMatrix::new(ComplexMatrix::from_real_diag(&[1.2, -0.2]), l.clone()).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::from_real_diag(&[0.6, 0.6]), l.clone()).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::identity(3).scale_real(1.0 / 3.0), l).is_err());
    }

    #[test]
    fn seeds_are_spread() {
        assert_ne!(derive_seed(42, 0), derive_seed(42, 1));
        assert_ne!(derive_seed(42, 0), derive_seed(43, 0));
        assert_eq!(derive_seed(42, 7), derive_seed(42, 7));
    }
}
