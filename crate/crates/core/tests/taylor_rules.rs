mod common;

use anm_core::taylor;
use anm_core::tensor::dense;
use anm_core::BatchedTensor;
use common::*;

#[test]
fn elementwise_rules_match_expansion() {
    for seed in 0..20 {
        for (name, err) in elementwise_errors(seed, 10) {
            assert!(err <= 1e-8, "{name} seed {seed}: {err:e}");
        }
    }
}

#[test]
fn matrix_rules_match_expansion() {
    for seed in 0..20 {
        for m in [1, 2, 3] {
            assert!(matmul_error(seed, m, 8) <= 1e-10);
            assert!(matinv_error(seed, m, 8) <= 1e-8, "matinv seed {seed} m {m}");
            assert!(det_error(seed, m, 8) <= 1e-8, "det seed {seed} m {m}");
        }
    }
}

#[test]
fn fft_bias_matches_leibniz() {
    for seed in 0..20 {
        for m in [2, 3] {
            for k in [1, 2, 5, 13, 20] {
                assert!(det_bias_agreement(seed, m, k) <= 1e-9);
            }
        }
    }
}

#[test]
fn decompositions_reconstruct_input() {
    for seed in 0..20 {
        let e = random_decomp_errors(seed, 8);
        assert!(e.svdw_reconstruction <= 1e-8, "seed {seed}: {:e}", e.svdw_reconstruction);
        assert!(e.svdw_orthogonality <= 1e-8, "seed {seed}: {:e}", e.svdw_orthogonality);
        assert!(e.polar_reconstruction <= 1e-8);
        assert!(e.polar_symmetry <= 1e-10);
        assert!(e.w_agreement <= 1e-8, "seed {seed}: {:e}", e.w_agreement);
    }
}

#[test]
fn polar_of_scaled_rotation() {
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let rot = vec![c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0];
    let d = decomp_series(&vec![rot.clone(), rot.clone()], 3, 4, true);
    for v in d.pw[0].iter().zip(&rot) {
        assert!((v.0 - v.1).abs() < 1e-12);
    }
    let i = dense::identity(3);
    assert!(rel_err(&d.p[0], &i) < 1e-12 && rel_err(&d.p[1], &i) < 1e-10);
    for k in 1..=4 {
        assert!(d.pw[k].iter().all(|v| v.abs() < 1e-10));
    }
}

#[test]
fn repeated_singular_values_stay_finite() {
    let i = dense::identity(3);
    let x = vec![i.clone(), i];
    let d = decomp_series(&x, 3, 10, true);
    for k in 0..=10 {
        assert!(d.u[k].iter().chain(&d.s[k]).chain(&d.w[k]).chain(&d.pw[k]).all(|v| v.is_finite()));
    }
    let e = decomp_errors(&x, 3, 10);
    assert!(e.svdw_reconstruction <= 1e-6 && e.polar_reconstruction <= 1e-6);
}

#[test]
fn slope_is_order_independent() {
    // the part of f_k that is linear in x_k does not depend on k
    let x: Vec<BatchedTensor> = [1.5, 0.3, -0.7, 0.2].iter().map(|&v| BatchedTensor::from_slice(&[v])).collect();
    let f = vec![BatchedTensor::from_slice(&[1.5f64.ln()]), BatchedTensor::from_slice(&[0.3 / 1.5])];
    let full = taylor::log(2, &x[..3], &f).unwrap().get(0, 0, 0);
    let bias = taylor::log(2, &x[..2], &f).unwrap().get(0, 0, 0);
    assert!(((full - bias) - (-0.7 / 1.5)).abs() < 1e-14);
}
