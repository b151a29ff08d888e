//! Fast-path linear algebra checked against slow, independently written
//! reference implementations.

use demon_engine::linalg::{herm_eig, herm_func, partial_trace, ComplexMatrix, SubsystemLayout};
use demon_engine::states::{random_density_matrix_with, random_hermitian_with, rng_from_seed};
use num_complex::Complex64;

/// tr over every factor not in `keep`, by explicit summation over the
/// full multi-index.
fn brute_partial_trace(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> ComplexMatrix {
    let n = dims.len();
    let total: usize = dims.iter().product();
    let kept_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let digits = |mut idx: usize| -> Vec<usize> {
        let mut d = vec![0; n];
        for f in (0..n).rev() {
            d[f] = idx % dims[f];
            idx /= dims[f];
        }
        d
    };
    let kept_index = |d: &[usize]| keep.iter().fold(0, |acc, &k| acc * dims[k] + d[k]);
    let mut out = ComplexMatrix::zeros(kept_dim, kept_dim);
    for i in 0..total {
        let di = digits(i);
        for j in 0..total {
            let dj = digits(j);
            let traced_match = (0..n).filter(|f| !keep.contains(f)).all(|f| di[f] == dj[f]);
            if traced_match {
                out[(kept_index(&di), kept_index(&dj))] += m[(i, j)];
            }
        }
    }
    out
}

#[test]
fn partial_trace_matches_index_summation() {
    let dims = [2, 2, 3];
    let names = ["X", "Y", "Z"];
    let layout = SubsystemLayout::new(names.iter().copied().zip(dims)).unwrap();
    let subsets: [&[usize]; 6] = [&[0], &[1], &[2], &[0, 1], &[0, 2], &[1, 2]];
    let mut rng = rng_from_seed(2024);
    for trial in 0..100 {
        let rank = 1 + trial % 12;
        let rho = random_density_matrix_with(&mut rng, layout.clone(), rank).unwrap();
        for keep in subsets {
            let keep_names: Vec<&str> = keep.iter().map(|&k| names[k]).collect();
            let fast = partial_trace(rho.matrix(), &layout, &keep_names).unwrap();
            let slow = brute_partial_trace(rho.matrix(), &dims, keep);
            assert!(fast.max_abs_diff(&slow) < 1e-12, "trial {trial}, keep {keep_names:?}");
        }
        // Tracing in two steps agrees with tracing at once.
        let xy = rho.reduce(&["X", "Y"]).unwrap();
        let x_two_step = xy.reduce(&["X"]).unwrap();
        let x_direct = partial_trace(rho.matrix(), &layout, &["X"]).unwrap();
        assert!(x_two_step.matrix().max_abs_diff(&x_direct) < 1e-12);
    }
}

/// exp(A) by scaling and squaring of a truncated Taylor series.
fn expm_scaling_squaring(a: &ComplexMatrix) -> ComplexMatrix {
    let norm = a.max_abs() * a.rows() as f64;
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale_real(0.5f64.powi(s));
    let n = a.rows();
    let mut result = ComplexMatrix::identity(n);
    let mut term = ComplexMatrix::identity(n);
    for k in 1..=20 {
        term = (&term * &scaled).scale_real(1.0 / k as f64);
        result = &result + &term;
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

#[test]
fn spectral_exp_matches_scaling_and_squaring() {
    let mut rng = rng_from_seed(77);
    for trial in 0..100 {
        let h = random_hermitian_with(&mut rng, 4);
        let spectral = herm_func(&h, f64::exp).unwrap();
        let reference = expm_scaling_squaring(&h);
        let rel = spectral.max_abs_diff(&reference) / reference.max_abs().max(1.0);
        assert!(rel < 1e-9, "trial {trial}: relative deviation {rel:e}");

        let ih = h.scale(Complex64::new(0.0, 1.0));
        let unitary = herm_func(&h, |x| Complex64::from_polar(1.0, x)).unwrap();
        assert!(
            unitary.max_abs_diff(&expm_scaling_squaring(&ih)) < 1e-9,
            "trial {trial}"
        );
    }
}

#[test]
fn eigendecomposition_reconstructs_random_hermitian() {
    let mut rng = rng_from_seed(5);
    for _ in 0..20 {
        let h = random_hermitian_with(&mut rng, 6);
        let eig = herm_eig(&h).unwrap();
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let v = &eig.vectors;
        let vd = v.dagger();
        assert!((&vd * v).max_abs_diff(&ComplexMatrix::identity(6)) < 1e-10);
        let lambda = ComplexMatrix::from_real_diag(&eig.values);
        assert!((&(v * &lambda) * &vd).max_abs_diff(&h) < 1e-10);
    }
}

#[test]
fn known_spectra() {
    let d = ComplexMatrix::from_real_diag(&[3.0, 1.0, 2.0]);
    assert_eq!(herm_eig(&d).unwrap().values, vec![1.0, 2.0, 3.0]);
    let x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let v = herm_eig(&x).unwrap().values;
    assert!((v[0] + 1.0).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
}
