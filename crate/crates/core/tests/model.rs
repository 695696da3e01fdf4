//! Chebyshev units, layer fusion, heads and checkpoints.

mod common;

use std::sync::Arc;

use common::{connected_graph, dense_normalized, from_na, random_tensor, to_na};
use hdgcn::gradcheck::{grad_check, grad_check_with, GradCheckOptions};
use hdgcn::graph::{GraphInput, SparseAdjacency};
use hdgcn::model::{
    graph_readout, hd_cheb_unit_forward, hdgcn_layer_forward, node_classify, prime_cheb_forward,
    row_variance, static_cheb_forward, Affine, Checkpoint, HdgcnConfig, HdgcnModel, LayerWeights,
    Task, TransitionMode,
};
use hdgcn::mvcattn::{MvcAttnDims, MvcAttnWeights, LAYER_NORM_EPS};
use hdgcn::{Activation, Error, ParamSet, Tape, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small_config(input_dim: usize) -> HdgcnConfig {
    HdgcnConfig {
        input_dim,
        hidden: 5,
        forward_key_dim: 4,
        backward_key_dim: 3,
        supernodes: 3,
        ..Default::default()
    }
}

#[test]
fn prime_unit_identity_case() {
    let mut r = rng(1);
    let x = random_tensor(&mut r, 4, 4);
    let adj = Arc::new(SparseAdjacency::identity(4));
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let w = tape.constant(Tensor::identity(4));
    let z = prime_cheb_forward(&mut tape, &adj, xv, w, Activation::Identity).unwrap();
    assert_eq!(tape.value(z), &x);
}

#[test]
fn prime_unit_matches_dense_gcn_layer() {
    let mut r = rng(2);
    let a = connected_graph(&mut r, 5, 3);
    let x = random_tensor(&mut r, 5, 3);
    let w0 = random_tensor(&mut r, 3, 4);
    let want = (dense_normalized(&a) * to_na(&x) * to_na(&w0)).map(|v| v.max(0.0));
    let adj = Arc::new(a.normalize().unwrap());
    let mut tape = Tape::new();
    let xv = tape.constant(x);
    let wv = tape.constant(w0);
    let z = prime_cheb_forward(&mut tape, &adj, xv, wv, Activation::Relu).unwrap();
    assert!(tape.value(z).max_abs_diff(&from_na(&want)) < 1e-12);
}

#[test]
fn prime_unit_on_constant_features_has_equal_rows_under_random_walk() {
    let mut r = rng(3);
    let a = connected_graph(&mut r, 6, 4);
    let rw = Arc::new(a.random_walk().unwrap());
    let mut tape = Tape::new();
    let xv = tape.constant(Tensor::filled(6, 3, 0.7));
    let wv = tape.constant(random_tensor(&mut r, 3, 2));
    let z = prime_cheb_forward(&mut tape, &rw, xv, wv, Activation::Tanh).unwrap();
    for i in 1..6 {
        let diff: f64 = tape
            .value(z)
            .row(i)
            .iter()
            .zip(tape.value(z).row(0))
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff < 1e-12);
    }
}

fn unit_setup(seed: u64, d: usize, m: usize) -> (ParamSet, MvcAttnWeights, hdgcn::ParamId) {
    let mut r = rng(seed);
    let mut params = ParamSet::new();
    let dims = MvcAttnDims {
        hidden: d,
        forward_key: d,
        backward_key: d,
        supernodes: m,
    };
    let mvc = MvcAttnWeights::init(&mut params, "u", dims, &mut r).unwrap();
    let filter = params
        .add("u.w", hdgcn::glorot_uniform(d, d, &mut r))
        .unwrap();
    (params, mvc, filter)
}

#[test]
fn hd_unit_replays_through_trace() {
    let (mut params, mvc, filter) = unit_setup(4, 3, 1);
    params.get_mut(filter).value = Tensor::identity(3);
    let mut r = rng(5);
    let z = random_tensor(&mut r, 4, 3);
    let adj = Arc::new(SparseAdjacency::identity(4));
    let mut tape = Tape::new();
    let vars = mvc.bind(&mut tape, &params);
    let fv = tape.param(&params, filter);
    let zv = tape.constant(z.clone());
    let (out, attn) =
        hd_cheb_unit_forward(&mut tape, &adj, zv, &vars, fv, Activation::Identity).unwrap();
    let trace = attn.trace(&tape, 1);
    assert_eq!(trace.a_b, Tensor::ones(4, 1));
    let s_hat = trace
        .a_f
        .matmul(&z)
        .unwrap()
        .matmul(params.value(mvc.fv))
        .unwrap();
    let replay = trace
        .a_b
        .matmul(&s_hat)
        .unwrap()
        .matmul(params.value(mvc.bv))
        .unwrap();
    assert!(tape.value(out).max_abs_diff(&replay) < 1e-12);
}

#[test]
fn hd_unit_on_zero_input_is_fully_determined() {
    let (params, mvc, filter) = unit_setup(6, 4, 2);
    let mut r = rng(7);
    let a = connected_graph(&mut r, 5, 2);
    let adj = Arc::new(a.normalize().unwrap());
    let mut tape = Tape::new();
    let vars = mvc.bind(&mut tape, &params);
    let fv = tape.param(&params, filter);
    let zv = tape.constant(Tensor::zeros(5, 4));
    let (out, attn) =
        hd_cheb_unit_forward(&mut tape, &adj, zv, &vars, fv, Activation::Relu).unwrap();
    // Zero keys make every attention map uniform and the values vanish.
    assert!(
        tape.value(attn.a_f)
            .max_abs_diff(&Tensor::filled(2, 5, 0.2))
            < 1e-15
    );
    assert!(
        tape.value(attn.a_b)
            .max_abs_diff(&Tensor::filled(5, 2, 0.5))
            < 1e-15
    );
    assert_eq!(tape.value(out), &Tensor::zeros(5, 4));
}

#[test]
fn hd_unit_gradients_on_five_nodes() {
    let (mut params, mvc, filter) = unit_setup(8, 4, 3);
    let mut r = rng(9);
    let a = connected_graph(&mut r, 5, 3);
    let adj = Arc::new(a.normalize().unwrap());
    let z = random_tensor(&mut r, 5, 4);
    let target = random_tensor(&mut r, 5, 4);
    let ids: Vec<_> = params.ids().collect();
    let forward = |tape: &mut Tape, ps: &ParamSet| {
        let vars = mvc.bind(tape, ps);
        let fv = tape.param(ps, filter);
        let zv = tape.constant(z.clone());
        let (out, _) = hd_cheb_unit_forward(tape, &adj, zv, &vars, fv, Activation::Tanh)?;
        let t = tape.constant(target.clone());
        let p = tape.mul(out, t)?;
        Ok(tape.sum(p))
    };
    let report = grad_check(&mut params, &ids, forward, GradCheckOptions::with_tol(1e-4)).unwrap();
    assert!(
        report.passed(),
        "{:?}",
        report.failures().collect::<Vec<_>>()
    );

    // A deliberately wrong backward must be caught.
    let corrupted = grad_check_with(
        &mut params,
        &ids,
        forward,
        |ps| {
            let mut tape = Tape::new();
            let loss = forward(&mut tape, ps)?;
            tape.backward_into(loss, ps)?;
            let mut grads: Vec<Tensor> = ids
                .iter()
                .map(|&id| ps.get(id).grad.clone().unwrap())
                .collect();
            grads[ids.len() - 1] = grads[ids.len() - 1].scale(1.1);
            Ok(grads)
        },
        GradCheckOptions::with_tol(1e-4),
    )
    .unwrap();
    assert!(!corrupted.passed());
    assert_eq!(corrupted.failures().next().unwrap().name, "u.w");
}

#[test]
fn static_unit_identity_adjacency() {
    let mut r = rng(10);
    let z = random_tensor(&mut r, 3, 2);
    let w = random_tensor(&mut r, 2, 2);
    let adj = Arc::new(SparseAdjacency::identity(3));
    let mut tape = Tape::new();
    let zv = tape.constant(z.clone());
    let wv = tape.constant(w.clone());
    let out = static_cheb_forward(&mut tape, &adj, zv, wv, Activation::Tanh).unwrap();
    assert!(
        tape.value(out)
            .max_abs_diff(&z.matmul(&w).unwrap().map(f64::tanh))
            < 1e-15
    );
}

#[test]
fn two_static_units_equal_fourth_power() {
    let mut r = rng(11);
    let a = connected_graph(&mut r, 7, 5);
    let norm = a.normalize().unwrap();
    let x = random_tensor(&mut r, 7, 3);
    let a2 = dense_normalized(&a).pow(4);
    let want = from_na(&(a2 * to_na(&x)));
    let adj = Arc::new(norm);
    let mut tape = Tape::new();
    let xv = tape.constant(x);
    let eye = tape.constant(Tensor::identity(3));
    let s1 = static_cheb_forward(&mut tape, &adj, xv, eye, Activation::Identity).unwrap();
    let s2 = static_cheb_forward(&mut tape, &adj, s1, eye, Activation::Identity).unwrap();
    assert!(tape.value(s2).max_abs_diff(&want) < 1e-12);
    assert!(
        adj.power_transition(4)
            .unwrap()
            .matmul(tape.value(xv))
            .unwrap()
            .max_abs_diff(&want)
            < 1e-12
    );
}

#[test]
fn deep_static_chain_smooths_monotonically() {
    let mut r = rng(12);
    let a = connected_graph(&mut r, 15, 10);
    let degrees = a.degrees();
    let adj = Arc::new(a.normalize().unwrap());
    let mut tape = Tape::new();
    let mut z = tape.constant(random_tensor(&mut r, 15, 4));
    let eye = tape.constant(Tensor::identity(4));
    let mut prev = row_variance(tape.value(z), &degrees).unwrap();
    for _ in 0..10 {
        z = static_cheb_forward(&mut tape, &adj, z, eye, Activation::Identity).unwrap();
        let v = row_variance(tape.value(z), &degrees).unwrap();
        assert!(v <= prev + 1e-15, "{v} > {prev}");
        prev = v;
    }
    assert!(prev < 1e-3);
}

fn layer_setup(cfg: &HdgcnConfig, seed: u64) -> (ParamSet, LayerWeights) {
    let mut params = ParamSet::new();
    let w = LayerWeights::init(&mut params, "l", cfg, cfg.input_dim, &mut rng(seed)).unwrap();
    (params, w)
}

#[test]
fn order_zero_layer_is_normalised_prime_output() {
    let cfg = HdgcnConfig {
        order: 0,
        ..small_config(3)
    };
    let (params, w) = layer_setup(&cfg, 13);
    let mut r = rng(14);
    let a = connected_graph(&mut r, 6, 3);
    let adj = Arc::new(a.normalize().unwrap());
    let x = random_tensor(&mut r, 6, 3);
    let mut tape = Tape::new();
    let vars = w.bind(&mut tape, &params);
    let xv = tape.constant(x);
    let out = hdgcn_layer_forward(&mut tape, &adj, xv, &vars, &cfg).unwrap();
    assert!(out.units.is_empty());
    let normed = tape
        .layer_norm_rows(
            out.prime,
            vars.fusion_gain,
            vars.fusion_bias,
            LAYER_NORM_EPS,
        )
        .unwrap();
    assert_eq!(tape.value(out.h), tape.value(normed));
}

#[test]
fn odd_order_rejected() {
    let cfg = HdgcnConfig {
        order: 3,
        ..small_config(3)
    };
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    assert!(matches!(HdgcnModel::new(cfg, 0), Err(Error::Config(_))));
}

#[test]
fn layer_fuses_prime_and_units() {
    for mode in [TransitionMode::Dynamic, TransitionMode::Static] {
        let cfg = HdgcnConfig {
            mode,
            ..small_config(3)
        };
        let (params, w) = layer_setup(&cfg, 15);
        let mut r = rng(16);
        let adj = Arc::new(connected_graph(&mut r, 6, 3).normalize().unwrap());
        let mut tape = Tape::new();
        let vars = w.bind(&mut tape, &params);
        let xv = tape.constant(random_tensor(&mut r, 6, 3));
        let out = hdgcn_layer_forward(&mut tape, &adj, xv, &vars, &cfg).unwrap();
        assert_eq!(out.units.len(), 3);
        assert_eq!(
            out.attention.len(),
            if mode == TransitionMode::Dynamic {
                3
            } else {
                0
            }
        );
        let mut total = tape.value(out.prime).clone();
        for &u in &out.units {
            total.add_assign(tape.value(u));
        }
        let tv = tape.constant(total);
        let normed = tape
            .layer_norm_rows(tv, vars.fusion_gain, vars.fusion_bias, LAYER_NORM_EPS)
            .unwrap();
        assert!(tape.value(out.h).max_abs_diff(tape.value(normed)) < 1e-15);
    }
}

#[test]
fn graph_readout_of_zero_embeddings_is_zero() {
    let mut params = ParamSet::new();
    let mut r = rng(17);
    let f1 = Affine::init(&mut params, "f1", 4, 4, &mut r).unwrap();
    let f2 = Affine::init(&mut params, "f2", 4, 4, &mut r).unwrap();
    let mut tape = Tape::new();
    let h = tape.constant(Tensor::zeros(5, 4));
    let (a, b) = (f1.bind(&mut tape, &params), f2.bind(&mut tape, &params));
    let hg = graph_readout(&mut tape, h, &a, &b).unwrap();
    assert_eq!(tape.value(hg), &Tensor::zeros(1, 4));
}

#[test]
fn graph_readout_matches_loop_oracle() {
    let mut params = ParamSet::new();
    let mut r = rng(18);
    let f1 = Affine::init(&mut params, "f1", 3, 3, &mut r).unwrap();
    let f2 = Affine::init(&mut params, "f2", 3, 3, &mut r).unwrap();
    params.get_mut(f1.bias).value = random_tensor(&mut r, 1, 3);
    let h = random_tensor(&mut r, 4, 3);
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone());
    let (a, b) = (f1.bind(&mut tape, &params), f2.bind(&mut tape, &params));
    let hg = graph_readout(&mut tape, hv, &a, &b).unwrap();
    let affine = |w: &Affine, row: &[f64], c: usize| {
        let wt = params.value(w.weight);
        params.value(w.bias)[(0, c)] + (0..3).map(|k| row[k] * wt[(k, c)]).sum::<f64>()
    };
    for c in 0..3 {
        let gated: Vec<f64> = (0..4)
            .map(|v| {
                let g = 1.0 / (1.0 + (-affine(&f1, h.row(v), c)).exp());
                g * affine(&f2, h.row(v), c).tanh()
            })
            .collect();
        let want = gated.iter().sum::<f64>() / 4.0 + gated.iter().cloned().fold(f64::MIN, f64::max);
        assert!((tape.value(hg)[(0, c)] - want).abs() < 1e-12);
    }
}

#[test]
fn node_head_shapes_and_shift_invariance() {
    let mut params = ParamSet::new();
    let mut r = rng(19);
    let hidden = Affine::init(&mut params, "h", 4, 4, &mut r).unwrap();
    let output = Affine::init(&mut params, "o", 4, 3, &mut r).unwrap();
    let mut tape = Tape::new();
    let h = tape.constant(random_tensor(&mut r, 6, 4));
    let (hv, ov) = (
        hidden.bind(&mut tape, &params),
        output.bind(&mut tape, &params),
    );
    let logits = node_classify(&mut tape, h, &hv, &ov, Activation::Relu).unwrap();
    assert_eq!(tape.shape(logits), (6, 3));
    let shifted = tape.value(logits).map(|v| v + 12.5);
    assert_eq!(shifted.argmax_rows(), tape.value(logits).argmax_rows());
}

fn toy_input(seed: u64, n: usize, d: usize) -> GraphInput {
    let mut r = rng(seed);
    let a = connected_graph(&mut r, n, n / 2);
    GraphInput::new(a.normalize().unwrap(), random_tensor(&mut r, n, d)).unwrap()
}

#[test]
fn model_is_seed_deterministic() {
    let input = toy_input(20, 7, 3);
    let a = HdgcnModel::new(small_config(3), 5)
        .unwrap()
        .predict(&input)
        .unwrap();
    let b = HdgcnModel::new(small_config(3), 5)
        .unwrap()
        .predict(&input)
        .unwrap();
    let c = HdgcnModel::new(small_config(3), 6)
        .unwrap()
        .predict(&input)
        .unwrap();
    assert_eq!(a.logits, b.logits);
    assert_ne!(a.logits, c.logits);
    assert_eq!(a.traces.len(), 3);
    assert_eq!(
        a.traces.iter().map(|t| t.order).collect::<Vec<_>>(),
        vec![1, 2, 3]
    );
}

#[test]
fn multi_layer_and_graph_task_shapes() {
    let input = toy_input(21, 6, 3);
    let cfg = HdgcnConfig {
        layers: 2,
        task: Task::Graph,
        num_classes: 4,
        ..small_config(3)
    };
    let out = HdgcnModel::new(cfg, 1).unwrap().predict(&input).unwrap();
    assert_eq!(out.logits.shape(), (1, 4));
    assert_eq!(out.node_embeddings.shape(), (6, 5));
    assert_eq!(out.traces.len(), 6);
}

#[test]
fn input_width_mismatch_is_a_dimension_error() {
    let input = toy_input(22, 6, 4);
    let err = HdgcnModel::new(small_config(3), 0)
        .unwrap()
        .predict(&input)
        .unwrap_err();
    assert!(matches!(err, Error::Dimension { .. }));
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let input = toy_input(23, 6, 3);
    let model = HdgcnModel::new(small_config(3), 9).unwrap();
    let ckpt = Checkpoint::from_model(&model, serde_json::json!({"note": "x"}));
    let json = ckpt.to_json();
    let back = Checkpoint::from_json(&json).unwrap();
    assert_eq!(back, ckpt);
    let restored = back.to_model().unwrap();
    assert_eq!(
        restored.predict(&input).unwrap().logits,
        model.predict(&input).unwrap().logits
    );

    assert!(matches!(
        Checkpoint::from_json(&json[..json.len() / 2]),
        Err(Error::Corrupt(_))
    ));
    let tampered = json.replacen("\"rows\":3", "\"rows\":4", 1);
    assert!(matches!(
        Checkpoint::from_json(&tampered).and_then(|c| c.to_model()),
        Err(Error::Corrupt(_))
    ));
    let wrong_format = json.replacen("hdgcn-checkpoint", "other", 1);
    assert!(matches!(
        Checkpoint::from_json(&wrong_format),
        Err(Error::Corrupt(_))
    ));
    let other = HdgcnConfig {
        order: 4,
        ..small_config(3)
    };
    assert!(matches!(ckpt.ensure_config(&other), Err(Error::Config(_))));
    assert!(ckpt.ensure_config(&small_config(3)).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn embeddings_are_permutation_equivariant(n in 2usize..12, seed in any::<u64>(), static_mode in any::<bool>()) {
        let input = toy_input(seed, n, 3);
        let cfg = HdgcnConfig {
            mode: if static_mode { TransitionMode::Static } else { TransitionMode::Dynamic },
            ..small_config(3)
        };
        let model = HdgcnModel::new(cfg, seed).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng(seed ^ 3));
        let base = model.predict(&input).unwrap().node_embeddings;
        let permuted = model.predict(&input.permuted(&perm).unwrap()).unwrap().node_embeddings;
        prop_assert!(permuted.max_abs_diff(&base.select_rows(&perm)) < 1e-10);
    }
}
