//! Entropic uncertainty with quantum memory, and the two-engine work
//! bounds that follow from it when the same ancilla is measured in two
//! different bases.

use std::f64::consts::LN_2;

use crate::engine::{
    energy_accounting, run_engine, Check, CheckKind, EngineScenario, StageTrace, ANCILLA, BOUND_TOL, MEMORY,
};
use crate::entropy::{conditional_entropy, measured_conditional_entropy, vn_entropy, MeasurementBasis};
use crate::error::{Error, Result};
use crate::states::DensityMatrix;

/// c = max_{k,m} |⟨k|α_m⟩|².
pub fn overlap_c(k_basis: &MeasurementBasis, m_basis: &MeasurementBasis) -> Result<f64> {
    if k_basis.factor != m_basis.factor || k_basis.dim() != m_basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "bases `{}` on {} (dim {}) and `{}` on {} (dim {}) are not comparable",
            k_basis.label,
            k_basis.factor,
            k_basis.dim(),
            m_basis.label,
            m_basis.factor,
            m_basis.dim()
        )));
    }
    let mut c: f64 = 0.0;
    for k in k_basis.vectors() {
        for a in m_basis.vectors() {
            let ip: num_complex::Complex64 = k.iter().zip(a).map(|(x, y)| x.conj() * y).sum();
            c = c.max(ip.norm_sqr());
        }
    }
    Ok(c)
}

/// Both sides of S(K|B) + S(M|B) ≥ ln(1/c) + S(A|B).
#[derive(Debug, Clone, PartialEq)]
pub struct EurReport {
    pub c: f64,
    pub eur_lhs: f64,
    pub eur_rhs: f64,
    pub check: Check,
}

pub fn eur_check(rho_ab: &DensityMatrix, k_basis: &MeasurementBasis, m_basis: &MeasurementBasis) -> Result<EurReport> {
    let c = overlap_c(k_basis, m_basis)?;
    let measured = k_basis.factor.as_str();
    let rest = rho_ab.layout().complement(&[measured]);
    let eur_lhs = measured_conditional_entropy(rho_ab, k_basis)? + measured_conditional_entropy(rho_ab, m_basis)?;
    let eur_rhs = (1.0 / c).ln() + conditional_entropy(rho_ab, &[measured], &rest)?;
    Ok(EurReport {
        c,
        eur_lhs,
        eur_rhs,
        check: Check::theorem("memory_uncertainty", eur_lhs - eur_rhs, BOUND_TOL),
    })
}

/// Two engines sharing everything but the measured basis and feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoEngineReport {
    pub c: f64,
    pub eur_lhs: f64,
    pub eur_rhs: f64,
    /// S(ρ_AB^(2)) + S(ρ_AB^(2)′).
    pub s25_lhs: f64,
    /// ln(1/c) + S(ρ_AB^(i)) + S(ρ_B^(i)).
    pub s25_rhs: f64,
    /// ln(1/c) + S(τ_AB) + S(ρ_B^(i)) with τ_AB the ancilla–memory state
    /// just before measurement (shared by both engines).
    pub s25_rhs_premeasure: f64,
    /// −ΔF_S + k_B T [S(ρ_AB^(2)) − S(ρ_AB^(i))].
    pub w_upper_k: f64,
    pub w_upper_m: f64,
    /// −ΔF_S − ΔF_S′ + k_B T [ln(1/c) − S(A^(i)|B^(i))].
    pub lower_bound_28: f64,
    pub achieved_work_k: f64,
    pub achieved_work_m: f64,
    pub saturation_gap_k: f64,
    pub saturation_gap_m: f64,
    pub checks: Vec<Check>,
}

impl TwoEngineReport {
    pub fn eur_lhs_bits(&self) -> f64 {
        self.eur_lhs / LN_2
    }

    pub fn eur_rhs_bits(&self) -> f64 {
        self.eur_rhs / LN_2
    }

    pub fn s25_lhs_bits(&self) -> f64 {
        self.s25_lhs / LN_2
    }

    pub fn s25_rhs_bits(&self) -> f64 {
        self.s25_rhs / LN_2
    }

    /// achieved_work_k + achieved_work_m − lower_bound_28; may be negative
    /// when the upper bounds are not saturated.
    pub fn achieved_excess(&self) -> f64 {
        self.achieved_work_k + self.achieved_work_m - self.lower_bound_28
    }
}

fn same_matrix(a: &crate::linalg::ComplexMatrix, b: &crate::linalg::ComplexMatrix) -> bool {
    a.rows() == b.rows() && a.cols() == b.cols() && a.max_abs_diff(b) <= 1e-12
}

fn require_compatible(k: &EngineScenario, m: &EngineScenario) -> Result<()> {
    if k.n_reservoirs() != 1 || m.n_reservoirs() != 1 {
        return Err(Error::InvalidScenario(format!(
            "two-engine bounds need exactly one reservoir per engine, got {} and {}",
            k.n_reservoirs(),
            m.n_reservoirs()
        )));
    }
    let mismatch = |what: &str| {
        Err(Error::InvalidScenario(format!(
            "the two engines differ in {what}; only the basis, feedback and final system Hamiltonian may differ"
        )))
    };
    if !same_matrix(&k.h_s_initial.matrix, &m.h_s_initial.matrix) {
        return mismatch("the initial system Hamiltonian");
    }
    if k.system_temperature != m.system_temperature || k.kb != m.kb {
        return mismatch("temperature or kB");
    }
    let (rk, rm) = (&k.reservoirs[0], &m.reservoirs[0]);
    if rk.name != rm.name || rk.temperature != rm.temperature || !same_matrix(&rk.matrix, &rm.matrix) {
        return mismatch("the reservoir");
    }
    if k.rho_ab_initial.layout() != m.rho_ab_initial.layout()
        || !same_matrix(k.rho_ab_initial.matrix(), m.rho_ab_initial.matrix())
    {
        return mismatch("the initial ancilla-memory state");
    }
    if !same_matrix(&k.u1, &m.u1) {
        return mismatch("U1");
    }
    if !same_matrix(&k.u2, &m.u2) {
        return mismatch("U2");
    }
    Ok(())
}

fn ab_entropies(trace: &StageTrace) -> (f64, f64) {
    (vn_entropy(&trace.reduced.ab_2), vn_entropy(&trace.reduced.ab_i))
}

pub fn two_engine_bounds(scenario_k: &EngineScenario, scenario_m: &EngineScenario) -> Result<TwoEngineReport> {
    require_compatible(scenario_k, scenario_m)?;
    let (trace_k, trace_m) = rayon::join(|| run_engine(scenario_k), || run_engine(scenario_m));
    let (trace_k, trace_m) = (trace_k?, trace_m?);
    let energy_k = energy_accounting(&trace_k, scenario_k)?;
    let energy_m = energy_accounting(&trace_m, scenario_m)?;

    let rho_ab_i = &trace_k.reduced.ab_i;
    let eur = eur_check(rho_ab_i, &scenario_k.basis, &scenario_m.basis)?;
    let c = eur.c;
    let ln_inv_c = (1.0 / c).ln();

    let (s_ab2_k, s_abi) = ab_entropies(&trace_k);
    let (s_ab2_m, _) = ab_entropies(&trace_m);
    let s_bi = vn_entropy(&trace_k.reduced.b_i);
    let tau_ab = trace_k.rho_premeasure.reduce(&[ANCILLA, MEMORY])?;

    let s25_lhs = s_ab2_k + s_ab2_m;
    let s25_rhs = ln_inv_c + s_abi + s_bi;
    let s25_rhs_premeasure = ln_inv_c + vn_entropy(&tau_ab) + s_bi;

    let kt = scenario_k.kb * scenario_k.system_temperature;
    let w_upper_k = -energy_k.delta_f_s + kt * (s_ab2_k - s_abi);
    let w_upper_m = -energy_m.delta_f_s + kt * (s_ab2_m - s_abi);
    let cond_ab = conditional_entropy(rho_ab_i, &[ANCILLA], &[MEMORY])?;
    let lower_bound_28 = -energy_k.delta_f_s - energy_m.delta_f_s + kt * (ln_inv_c - cond_ab);

    let achieved_work_k = energy_k.w_ext_total;
    let achieved_work_m = energy_m.w_ext_total;

    let checks = vec![
        eur.check.clone(),
        Check::new(
            "two_engine_entropy_sum",
            CheckKind::Conditional,
            s25_lhs - s25_rhs,
            BOUND_TOL,
        ),
        Check::theorem(
            "two_engine_entropy_sum_premeasure",
            s25_lhs - s25_rhs_premeasure,
            BOUND_TOL,
        ),
        Check::new(
            "two_engine_work_bounds",
            CheckKind::Conditional,
            w_upper_k + w_upper_m - lower_bound_28,
            BOUND_TOL,
        ),
    ];

    Ok(TwoEngineReport {
        c,
        eur_lhs: eur.eur_lhs,
        eur_rhs: eur.eur_rhs,
        s25_lhs,
        s25_rhs,
        s25_rhs_premeasure,
        w_upper_k,
        w_upper_m,
        lower_bound_28,
        achieved_work_k,
        achieved_work_m,
        saturation_gap_k: w_upper_k - achieved_work_k,
        saturation_gap_m: w_upper_m - achieved_work_m,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::bipartite_layout;
    use crate::linalg::ComplexMatrix;
    use crate::states::{bell_state, haar_unitary_with, rng_from_seed};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn overlap_of_identical_and_unbiased_bases() {
        let z = MeasurementBasis::computational("A", 2);
        let x = MeasurementBasis::hadamard("A");
        assert!(close(overlap_c(&z, &z).unwrap(), 1.0, 1e-15));
        assert!(close(overlap_c(&z, &x).unwrap(), 0.5, 1e-15));
        assert!(close(overlap_c(&x, &z).unwrap(), 0.5, 1e-15));
    }

    #[test]
    fn overlap_rejects_mismatch() {
        let z2 = MeasurementBasis::computational("A", 2);
        let z3 = MeasurementBasis::computational("A", 3);
        let zb = MeasurementBasis::computational("B", 2);
        assert!(overlap_c(&z2, &z3).is_err());
        assert!(overlap_c(&z2, &zb).is_err());
    }

    #[test]
    fn overlap_matches_exhaustive_enumeration() {
        let mut rng = rng_from_seed(11);
        let u = haar_unitary_with(&mut rng, 3);
        let v = haar_unitary_with(&mut rng, 3);
        let k = MeasurementBasis::from_unitary("u", "A", &u).unwrap();
        let m = MeasurementBasis::from_unitary("v", "A", &v).unwrap();
        let mut best: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let mut ip = num_complex::Complex64::new(0.0, 0.0);
                for r in 0..3 {
                    ip += u[(r, i)].conj() * v[(r, j)];
                }
                best = best.max(ip.norm_sqr());
            }
        }
        assert!(close(overlap_c(&k, &m).unwrap(), best, 1e-14));
    }

    #[test]
    fn overlap_ignores_global_phases() {
        let mut rng = rng_from_seed(5);
        let u = haar_unitary_with(&mut rng, 2);
        let phased = ComplexMatrix::from_fn(2, 2, |r, c| {
            u[(r, c)] * num_complex::Complex64::from_polar(1.0, 0.7 + c as f64)
        });
        let x = MeasurementBasis::hadamard("A");
        let a = MeasurementBasis::from_unitary("u", "A", &u).unwrap();
        let b = MeasurementBasis::from_unitary("u'", "A", &phased).unwrap();
        assert!(close(overlap_c(&a, &x).unwrap(), overlap_c(&b, &x).unwrap(), 1e-14));
    }

    #[test]
    fn bell_state_saturates() {
        let r = eur_check(
            &bell_state(),
            &MeasurementBasis::computational("A", 2),
            &MeasurementBasis::hadamard("A"),
        )
        .unwrap();
        assert!(close(r.eur_lhs, 0.0, 1e-8));
        assert!(close(r.eur_rhs, 0.0, 1e-8));
        assert!(r.check.passed);
    }

    #[test]
    fn uncorrelated_memory_case() {
        let layout = bipartite_layout(("A", 2), ("B", 2)).unwrap();
        let a = DensityMatrix::maximally_mixed(crate::linalg::SubsystemLayout::new([("A", 2)]).unwrap());
        let b = DensityMatrix::new(
            ComplexMatrix::from_real_rows(&[&[0.7, 0.1], &[0.1, 0.3]]),
            crate::linalg::SubsystemLayout::new([("B", 2)]).unwrap(),
        )
        .unwrap();
        let rho = a.tensor(&b).unwrap();
        assert_eq!(rho.layout(), &layout);
        let r = eur_check(
            &rho,
            &MeasurementBasis::computational("A", 2),
            &MeasurementBasis::hadamard("A"),
        )
        .unwrap();
        assert!(close(r.eur_lhs, 2.0 * LN_2, 1e-10));
        assert!(close(r.eur_rhs, 2.0 * LN_2, 1e-10));
    }

    #[test]
    fn bell_pair_two_engine_bound_is_two_ln2() {
        let (k, m) = crate::scenario::eur_bell().unwrap();
        let r = two_engine_bounds(&k, &m).unwrap();
        assert!(close(r.c, 0.5, 1e-12));
        assert!(close(r.lower_bound_28, 2.0 * LN_2, 1e-10));
        assert!(r.checks.iter().all(|c| c.passed), "{:?}", r.checks);
    }

    #[test]
    fn product_memory_with_equal_bases() {
        let k = crate::scenario::do_nothing().unwrap();
        let mut m = k.clone();
        m.h_s_final = crate::states::HamiltonianTerm::qubit("S", 3.0, None).unwrap();
        let r = two_engine_bounds(&k, &m).unwrap();
        assert!(close(r.c, 1.0, 1e-15));
        // ΔF' = −ln(1 + e^{-3}) + ln(1 + e^{-1}) at T = 1.
        let df_m = -(1.0 + (-3.0f64).exp()).ln() + (1.0 + (-1.0f64).exp()).ln();
        assert!(close(r.lower_bound_28, -df_m, 1e-12));
        assert!(close(r.s25_lhs, 0.0, 1e-12));
    }

    #[test]
    fn swapping_engines_is_symmetric() {
        let (k, m) = crate::scenario::eur_bell().unwrap();
        let a = two_engine_bounds(&k, &m).unwrap();
        let b = two_engine_bounds(&m, &k).unwrap();
        assert!(close(a.lower_bound_28, b.lower_bound_28, 1e-12));
        assert!(close(a.s25_lhs, b.s25_lhs, 1e-12));
        assert!(close(a.w_upper_k, b.w_upper_m, 1e-12));
    }

    #[test]
    fn incompatible_engines_are_rejected() {
        let (k, mut m) = crate::scenario::eur_bell().unwrap();
        m.u2 = crate::scenario::cnot();
        assert!(two_engine_bounds(&k, &m).is_err());
        let s = crate::scenario::szilard().unwrap();
        assert!(two_engine_bounds(&s, &s).is_err());
    }

    #[test]
    fn literal_entropy_sum_needs_untouched_ancilla() {
        // A starts maximally mixed; U2 swaps it with a nearly pure cold system.
        let mut k = crate::scenario::do_nothing().unwrap();
        k.h_s_initial = crate::states::HamiltonianTerm::qubit("S", 20.0, None).unwrap();
        k.h_s_final = k.h_s_initial.clone();
        let mixed_a = ComplexMatrix::from_real_diag(&[0.5, 0.0, 0.5, 0.0]);
        k.rho_ab_initial = DensityMatrix::new(mixed_a, bipartite_layout(("A", 2), ("B", 2)).unwrap()).unwrap();
        k.u2 = crate::scenario::swap(2);
        let mut m = k.clone();
        m.basis = MeasurementBasis::hadamard("A");
        let r = two_engine_bounds(&k, &m).unwrap();
        let literal = r.checks.iter().find(|c| c.name == "two_engine_entropy_sum").unwrap();
        let premeasure = r.checks.iter().find(|c| c.name == "two_engine_entropy_sum_premeasure").unwrap();
        assert!(!literal.passed);
        assert!((literal.margin + LN_2).abs() < 1e-6);
        assert!(premeasure.passed);
    }
}
