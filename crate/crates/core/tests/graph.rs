use anm_core::graph::{ComputeGraph, GraphBuilder, SeriesState, VarId};
use anm_core::sparse::{CsrMatrix, SparseAffineMap};
use anm_core::{BatchedTensor, Shape};
use rand::{Rng, SeedableRng};
use rand::rngs::StdRng as ChaCha8Rng;

const B: usize = 2;

/// x (length 18) → two 3×3 matrices `A = X + 3I`, fed to `body`.
fn matrix_graph(body: impl Fn(&mut GraphBuilder, VarId, VarId) -> Vec<VarId>) -> ComputeGraph {
    let mut g = GraphBuilder::new();
    let x = g.input_x(B * 9).unwrap();
    let l = g.input_lambda().unwrap();
    let xm = g.reshape(x, Shape::new(B, 3, 3)).unwrap();
    let shift = g.constant(BatchedTensor::identity(B, 3).scale(3.0));
    let a = g.add(xm, shift).unwrap();
    let outs = body(&mut g, a, l);
    let lens: Vec<usize> = outs.iter().map(|&v| g.shape(v).len()).collect();
    let total: usize = lens.iter().sum();
    let map = SparseAffineMap::linear(CsrMatrix::identity(total));
    let out = g.sparse_affine(map, &outs, Shape::vector(total)).unwrap();
    g.finish(out).unwrap()
}

fn random_x(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn check_jacobian(name: &str, g: &ComputeGraph, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_x(&mut rng, g.num_inputs(), 0.5);
    let lam = 0.3;
    let lin = g.linearize(g.evaluate(&x, lam).unwrap()).unwrap();
    let (p, v) = g.jacobian(&lin);
    let (pf, vf) = g.jacobian_fd(&x, lam, 1e-6).unwrap();
    let err = p
        .to_dense()
        .iter()
        .zip(&pf)
        .chain(v.iter().zip(&vf))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "{name}: jacobian mismatch {err}");
}

/// Propagates random input series and checks that the truncated output
/// series matches the graph evaluated along the input curve to the
/// expected order.
fn check_series(name: &str, g: &ComputeGraph, seed: u64, order: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.num_inputs();
    let xs: Vec<Vec<f64>> = (0..=order).map(|_| random_x(&mut rng, n, 0.5)).collect();
    let ls: Vec<f64> = (0..=order).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let lin = g.linearize(g.evaluate(&xs[0], ls[0]).unwrap()).unwrap();
    let mut st = SeriesState::new(g, &lin);
    for k in 1..=order {
        st.bias().unwrap();
        st.commit(&xs[k], ls[k]).unwrap();
    }
    let ys = st.coefficients(g.output_var()).to_vec();
    let err_at = |a: f64| {
        let x: Vec<f64> = (0..n)
            .map(|i| (0..=order).map(|k| xs[k][i] * a.powi(k as i32)).sum())
            .collect();
        let l: f64 = (0..=order).map(|k| ls[k] * a.powi(k as i32)).sum();
        let f = g.output(&x, l).unwrap();
        f.iter()
            .enumerate()
            .map(|(e, fe)| {
                let y: f64 = ys.iter().enumerate().map(|(k, c)| c.values()[e] * a.powi(k as i32)).sum();
                (fe - y).abs()
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err_at(0.02), err_at(0.01));
    let rate = (e1 / e2).log2();
    assert!(
        rate > order as f64 + 0.5 || e1 < 1e-12,
        "{name}: truncation errors {e1:e} {e2:e} give rate {rate}"
    );
}

fn cases() -> Vec<(&'static str, ComputeGraph)> {
    vec![
        ("add", matrix_graph(|g, a, l| {
            let spread = SparseAffineMap::linear(CsrMatrix::from_dense(B, 1, &[1.0; B]));
            let lb = g.sparse_affine(spread, &[l], Shape::scalar(B)).unwrap();
            let s = g.mul(a, lb).unwrap();
            let t = g.add(lb, s).unwrap();
            vec![g.sub(t, a).unwrap()]
        })),
        ("mul", matrix_graph(|g, a, _| {
            let t = g.transpose(a).unwrap();
            vec![g.mul(a, t).unwrap()]
        })),
        ("div", matrix_graph(|g, a, _| {
            let d = g.det(a).unwrap();
            vec![g.div(a, d).unwrap(), g.div(d, d).unwrap()]
        })),
        ("log", matrix_graph(|g, a, _| {
            let d = g.det(a).unwrap();
            vec![g.log(d).unwrap()]
        })),
        ("pow", matrix_graph(|g, a, _| {
            let p = g.mul(a, a).unwrap();
            let q = g.affine(p, 1.0, 0.5).unwrap();
            vec![g.pow(q, -1.5).unwrap(), g.pow(a, 3.0).unwrap()]
        })),
        ("matmul", matrix_graph(|g, a, _| {
            let t = g.transpose(a).unwrap();
            vec![g.matmul(a, t).unwrap()]
        })),
        ("inverse", matrix_graph(|g, a, _| vec![g.inverse(a).unwrap()])),
        ("det", matrix_graph(|g, a, _| vec![g.det(a).unwrap()])),
        ("svd_w", matrix_graph(|g, a, _| {
            let (u, s, w) = g.svd_w(a, false).unwrap();
            vec![u, s, w]
        })),
        ("polar", matrix_graph(|g, a, _| {
            let (_, _, w) = g.svd_w(a, true).unwrap();
            vec![w]
        })),
        ("registry", matrix_graph(|g, a, _| {
            let i = g.op("inverse", &[a]).unwrap()[0];
            g.op("matmul", &[i, a]).unwrap()
        })),
    ]
}

#[test]
fn jacobians_match_finite_differences() {
    for (i, (name, g)) in cases().iter().enumerate() {
        check_jacobian(name, g, i as u64);
    }
}

#[test]
fn series_truncation_order() {
    for (i, (name, g)) in cases().iter().enumerate() {
        for order in [1, 3, 5] {
            check_series(name, g, 100 + i as u64, order);
        }
    }
}

#[test]
fn unused_factors_switch_to_polar() {
    let g = matrix_graph(|g, a, _| vec![g.svd_w(a, false).unwrap().2]);
    assert!(g.operator_names().contains(&"polar"));
    let g = matrix_graph(|g, a, _| {
        let (_, s, w) = g.svd_w(a, false).unwrap();
        vec![s, w]
    });
    assert!(g.operator_names().contains(&"svd_w"));
}

#[test]
fn build_errors() {
    let mut g = GraphBuilder::new();
    let x = g.input_x(4).unwrap();
    let m = g.reshape(x, Shape::new(1, 2, 2)).unwrap();
    assert!(g.matmul(m, x).is_err());
    assert!(g.op("nope", &[x]).is_err());
    assert!(g.input_x(2).is_err());
    let bad = g.constant(BatchedTensor::zeros(Shape::new(1, 2, 3)));
    assert!(g.det(bad).is_err());
}

#[test]
fn domain_error_names_vertex() {
    let mut g = GraphBuilder::new();
    let x = g.input_x(1).unwrap();
    let l = g.log(x).unwrap();
    let g = g.finish(l).unwrap();
    let e = g.evaluate(&[-1.0], 0.0).unwrap_err();
    assert!(format!("{e}").contains("vertex 0"), "{e}");
}
