//! Tape gradients of every differentiable op against central finite differences.

mod common;

use std::sync::Arc;

use common::{connected_graph, random_tensor};
use hdgcn::{Activation, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-6;

/// Reduces any output to a scalar through a fixed random weighting so that
/// every output entry influences the checked gradient.
fn scalarize(tape: &mut Tape, out: Var, seed: u64) -> Var {
    let (r, c) = tape.shape(out);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let w = tape.constant(random_tensor(&mut rng, r, c));
    let prod = tape.mul(out, w).unwrap();
    tape.sum(prod)
}

fn eval<F>(inputs: &[Tensor], build: &F, seed: u64) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    let out = build(&mut tape, &vars);
    let loss = scalarize(&mut tape, out, seed);
    tape.value(loss)[(0, 0)]
}

fn check<F>(name: &str, inputs: Vec<Tensor>, build: F)
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let seed = 17;
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    let out = build(&mut tape, &vars);
    let loss = scalarize(&mut tape, out, seed);
    let grads = tape.backward(loss).unwrap();
    for (k, v) in vars.iter().enumerate() {
        let analytic = grads
            .get(*v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[k].rows(), inputs[k].cols()));
        for e in 0..inputs[k].len() {
            let mut plus = inputs.clone();
            plus[k].as_mut_slice()[e] += H;
            let mut minus = inputs.clone();
            minus[k].as_mut_slice()[e] -= H;
            let numeric = (eval(&plus, &build, seed) - eval(&minus, &build, seed)) / (2.0 * H);
            let a = analytic.as_slice()[e];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            assert!(
                err < TOL,
                "{name}: input {k} entry {e}: analytic {a} numeric {numeric} (rel {err:e})"
            );
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn matmul_3x4_by_4x2() {
    let mut r = rng(1);
    check(
        "matmul",
        vec![random_tensor(&mut r, 3, 4), random_tensor(&mut r, 4, 2)],
        |t, v| t.matmul(v[0], v[1]).unwrap(),
    );
}

#[test]
fn transpose_add_scale() {
    let mut r = rng(2);
    check("transpose", vec![random_tensor(&mut r, 3, 2)], |t, v| {
        t.transpose(v[0])
    });
    check(
        "add",
        vec![random_tensor(&mut r, 2, 3), random_tensor(&mut r, 2, 3)],
        |t, v| t.add(v[0], v[1]).unwrap(),
    );
    check(
        "add_row",
        vec![random_tensor(&mut r, 4, 3), random_tensor(&mut r, 1, 3)],
        |t, v| t.add_row(v[0], v[1]).unwrap(),
    );
    check("scale", vec![random_tensor(&mut r, 2, 2)], |t, v| {
        t.scale(v[0], -1.7)
    });
}

#[test]
fn elementwise_products() {
    let mut r = rng(3);
    check(
        "mul",
        vec![random_tensor(&mut r, 3, 3), random_tensor(&mut r, 3, 3)],
        |t, v| t.mul(v[0], v[1]).unwrap(),
    );
    let mask = random_tensor(&mut r, 3, 2);
    check(
        "mul_const",
        vec![random_tensor(&mut r, 3, 2)],
        move |t, v| t.mul_const(v[0], mask.clone()).unwrap(),
    );
}

#[test]
fn sparse_product() {
    let mut r = rng(4);
    let adj = Arc::new(connected_graph(&mut r, 6, 4).normalize().unwrap());
    check("spmm", vec![random_tensor(&mut r, 6, 3)], move |t, v| {
        t.spmm(&adj, v[0]).unwrap()
    });
}

#[test]
fn softmax_and_layer_norm() {
    let mut r = rng(5);
    check("softmax", vec![random_tensor(&mut r, 3, 5)], |t, v| {
        t.softmax_rows(v[0], 0.7).unwrap()
    });
    check(
        "layer_norm",
        vec![
            random_tensor(&mut r, 4, 5),
            random_tensor(&mut r, 1, 5),
            random_tensor(&mut r, 1, 5),
        ],
        |t, v| t.layer_norm_rows(v[0], v[1], v[2], 1e-5).unwrap(),
    );
}

#[test]
fn activations() {
    let mut r = rng(6);
    // Keep ReLU inputs away from the kink.
    let x = random_tensor(&mut r, 3, 4).map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
    for act in [
        Activation::Relu,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Identity,
    ] {
        check(&format!("{act}"), vec![x.clone()], move |t, v| {
            let y = t.activation(v[0], act);
            t.scale(y, 1.0)
        });
    }
}

#[test]
fn reductions_and_indexing() {
    let mut r = rng(7);
    check("sum_rows", vec![random_tensor(&mut r, 4, 3)], |t, v| {
        t.sum_rows(v[0])
    });
    check("mean_rows", vec![random_tensor(&mut r, 4, 3)], |t, v| {
        t.mean_rows(v[0])
    });
    check("max_rows", vec![random_tensor(&mut r, 5, 3)], |t, v| {
        t.max_rows(v[0]).unwrap()
    });
    check(
        "vstack",
        vec![random_tensor(&mut r, 1, 3), random_tensor(&mut r, 2, 3)],
        |t, v| t.vstack(&[v[0], v[1]]).unwrap(),
    );
    check("select_rows", vec![random_tensor(&mut r, 4, 2)], |t, v| {
        t.select_rows(v[0], &[3, 0, 3]).unwrap()
    });
    check("sum", vec![random_tensor(&mut r, 2, 3)], |t, v| t.sum(v[0]));
}

#[test]
fn cross_entropy_4x3() {
    let mut r = rng(8);
    check(
        "cross_entropy",
        vec![random_tensor(&mut r, 4, 3).scale(2.0)],
        |t, v| t.cross_entropy(v[0], &[0, 2, 1, 2]).unwrap(),
    );
}

#[test]
fn tanh_slope_at_zero() {
    let mut tape = Tape::new();
    let x = tape.variable(Tensor::zeros(1, 1));
    let y = tape.activation(x, Activation::Tanh);
    let g = tape.backward(y).unwrap();
    let analytic = g.get(x).unwrap()[(0, 0)];
    let numeric = (H.tanh() - (-H).tanh()) / (2.0 * H);
    assert_eq!(analytic, 1.0);
    assert!((analytic - numeric).abs() < 1e-8);
}

#[test]
fn composite_chain() {
    let mut r = rng(9);
    check(
        "composite",
        vec![
            random_tensor(&mut r, 4, 3),
            random_tensor(&mut r, 3, 3),
            random_tensor(&mut r, 3, 2),
        ],
        |t, v| {
            let a = t.matmul(v[0], v[1]).unwrap();
            let a = t.activation(a, Activation::Tanh);
            let s = t.softmax_rows(a, 1.3).unwrap();
            let b = t.matmul(s, v[2]).unwrap();
            let m = t.max_rows(b).unwrap();
            let n = t.mean_rows(b);
            t.add(m, n).unwrap()
        },
    );
}
