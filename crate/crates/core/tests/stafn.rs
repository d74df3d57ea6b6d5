mod common;

use common::*;
use geomae::rng::rng_from;
use geomae::stafn::{random_input, ModelConfig, ModelInput, StafnModel};
use geomae_tensor::{Tape, Tensor};
use proptest::prelude::*;
use rand::Rng as _;

fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = rng_from(&[seed, 77]);
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0)).unwrap()
}

fn desk_small() -> ModelConfig {
    let mut c = ModelConfig::desk(2, 1, 3, 2);
    c.d_model = 8;
    c
}

#[test]
fn attention_modules_match_loops() {
    for trial in 0..10u64 {
        let cfg = literal_config(4, 3, 2);
        let model = StafnModel::new(cfg.clone(), 3, trial).unwrap();
        let tape = Tape::new();
        let b = model.bind(&tape, false);
        let h = random_tensor(&[3, 3, 4], trial);
        let hf = random_tensor(&[2, 3, 4], trial + 100);
        let enc = model.encoder_block(0);
        let dec = model.decoder_block(0);

        let s = b.spatial_attention(tape.constant(h.clone()), &enc.spatial).unwrap();
        let want = spatial_loops(&rep_from(&h), &AttnRef::load(&model, "enc.0.spatial"), &cfg);
        assert!(max_rep_diff(&rep_from(&s.to_tensor()), &want) < 1e-10);

        let t = b.temporal_attention(tape.constant(h.clone()), &enc.temporal).unwrap();
        let want = temporal_loops(&rep_from(&h), &AttnRef::load(&model, "enc.0.temporal"), &cfg);
        assert!(max_rep_diff(&rep_from(&t.to_tensor()), &want) < 1e-10);

        let f = b
            .forecast_attention(tape.constant(hf.clone()), tape.constant(h.clone()), &dec.forecast)
            .unwrap();
        let want = forecast_loops(&rep_from(&hf), &rep_from(&h), &AttnRef::load(&model, "dec.0.forecast"), &cfg);
        assert!(max_rep_diff(&rep_from(&f.to_tensor()), &want) < 1e-10);
    }
}

#[test]
fn multi_head_modules_with_norms_match_loops() {
    let cfg = desk_small();
    let model = StafnModel::new(cfg.clone(), 4, 3).unwrap();
    let tape = Tape::new();
    let b = model.bind(&tape, false);
    let h = random_tensor(&[3, 4, 8], 1);
    let s = b.spatial_attention(tape.constant(h.clone()), &model.encoder_block(0).spatial).unwrap();
    let want = spatial_loops(&rep_from(&h), &AttnRef::load(&model, "enc.0.spatial"), &cfg);
    assert!(max_rep_diff(&rep_from(&s.to_tensor()), &want) < 1e-10);
}

#[test]
fn full_forward_matches_loops() {
    let cfg = desk_small();
    let model = StafnModel::new(cfg.clone(), 4, 9).unwrap();
    let input = random_input(&cfg, 4, &[], &mut rng_from(&[5]));
    let tape = Tape::new();
    let b = model.bind(&tape, false);
    let out = b.forward(&input).unwrap();
    let (pred, h_fur) = forward_loops(&model, &input);
    assert!(max_rep_diff(&rep_from(&out.h_fur.to_tensor()), &h_fur) < 1e-8);
    assert!(max_rep_diff(&rep_from(&out.prediction.to_tensor()), &pred) < 1e-8);
    assert_eq!(out.prediction.shape(), vec![2, 4, 1]);

    let mut literal = literal_config(8, 3, 2);
    literal.n_blocks = 2;
    let model = StafnModel::new(literal.clone(), 4, 10).unwrap();
    let input = random_input(&literal, 4, &[], &mut rng_from(&[6]));
    let out = model.bind(&tape, false).forward(&input).unwrap();
    let (pred, _) = forward_loops(&model, &input);
    assert!(max_rep_diff(&rep_from(&out.prediction.to_tensor()), &pred) < 1e-8);
}

#[test]
fn singleton_attention() {
    let cfg = desk_small();
    let model = StafnModel::new(cfg, 1, 0).unwrap();
    let tape = Tape::new();
    let b = model.bind(&tape, false);
    let h = tape.constant(random_tensor(&[3, 1, 8], 2));
    let alpha = b.attention_weights(h, h, &model.encoder_block(0).spatial).unwrap();
    assert!(alpha.to_tensor().data().iter().all(|&a| a == 1.0));
}

#[test]
fn identical_nodes_share_attention() {
    let cfg = desk_small();
    let model = StafnModel::new(cfg, 2, 0).unwrap();
    let tape = Tape::new();
    let b = model.bind(&tape, false);
    let row = random_tensor(&[1, 1, 8], 3);
    let h = Tensor::new(vec![1, 2, 8], [row.data(), row.data()].concat()).unwrap();
    let h = tape.constant(h);
    let alpha = b.attention_weights(h, h, &model.encoder_block(0).spatial).unwrap();
    assert!(alpha.to_tensor().data().iter().all(|&a| (a - 0.5).abs() < 1e-15));
}

#[test]
fn zero_query_weights_average_history_values() {
    let cfg = literal_config(4, 3, 2);
    let mut model = StafnModel::new(cfg, 2, 4).unwrap();
    model.params_mut().set("dec.0.forecast.wq", Tensor::zeros(&[4, 4])).unwrap();
    let tape = Tape::new();
    let b = model.bind(&tape, false);
    let his = random_tensor(&[3, 2, 4], 8);
    let fur = random_tensor(&[2, 2, 4], 9);
    let a = b
        .attend(
            tape.constant(fur.permute(&[1, 0, 2]).unwrap()),
            tape.constant(his.permute(&[1, 0, 2]).unwrap()),
            &model.decoder_block(0).forecast,
        )
        .unwrap()
        .to_tensor();
    let wv = mat(model.params().get("dec.0.forecast.wv").unwrap());
    for node in 0..2 {
        let mut avg = [0.0; 4];
        for step in 0..3 {
            let row: Vec<f64> = (0..4).map(|c| his.get(&[step, node, c])).collect();
            for (c, v) in affine(&row, &wv, None).iter().enumerate() {
                avg[c] += v / 3.0;
            }
        }
        for q in 0..2 {
            for c in 0..4 {
                assert!((a.get(&[node, q, c]) - avg[c]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn single_history_step_gets_all_weight() {
    let cfg = ModelConfig::desk(2, 1, 1, 3);
    let model = StafnModel::new(cfg, 3, 0).unwrap();
    let tape = Tape::new();
    let b = model.bind(&tape, false);
    let q = tape.constant(random_tensor(&[3, 3, 16], 1));
    let kv = tape.constant(random_tensor(&[3, 1, 16], 2));
    let alpha = b.attention_weights(q, kv, &model.decoder_block(0).forecast).unwrap();
    assert!(alpha.to_tensor().data().iter().all(|&a| a == 1.0));
}

#[test]
fn empty_stacks_return_encodings() {
    let mut cfg = desk_small();
    cfg.n_blocks = 0;
    let model = StafnModel::new(cfg.clone(), 4, 2).unwrap();
    let a = random_input(&cfg, 4, &[], &mut rng_from(&[1]));
    let mut other = random_input(&cfg, 4, &[], &mut rng_from(&[2]));
    other.calendar_fur = a.calendar_fur.clone();
    let tape = Tape::new();
    let b = model.bind(&tape, false);
    let fa = b.forward(&a).unwrap().h_fur.to_tensor();
    let fb = b.forward(&other).unwrap().h_fur.to_tensor();
    assert_eq!(fa, fb);
    let (_, want) = forward_loops(&model, &a);
    assert!(max_rep_diff(&rep_from(&fa), &want) < 1e-12);
    let h0 = b
        .encode_history(tape.constant(a.x_hat.clone()), tape.constant(a.hint.clone()), tape.constant(a.calendar_his.clone()))
        .unwrap();
    assert!(max_rep_diff(&rep_from(&h0.to_tensor()), &encode_loops(&model, &a)) < 1e-12);
}

#[test]
fn zero_head_predicts_zero() {
    let cfg = desk_small();
    let mut model = StafnModel::new(cfg.clone(), 4, 2).unwrap();
    model.params_mut().set("head.w", Tensor::zeros(&[8, 1])).unwrap();
    let input = random_input(&cfg, 4, &[], &mut rng_from(&[1]));
    let tape = Tape::new();
    let p = model.bind(&tape, false).forward(&input).unwrap().prediction.to_tensor();
    assert!(p.data().iter().all(|&v| v == 0.0));
}

#[test]
fn one_by_one_head() {
    let mut cfg = desk_small();
    cfg.d_model = 2;
    cfg.n_heads = 1;
    let mut model = StafnModel::new(cfg, 1, 0).unwrap();
    model.params_mut().set("head.w", Tensor::new(vec![2, 1], vec![3.0, -1.0]).unwrap()).unwrap();
    model.params_mut().set("head.b", Tensor::new(vec![1], vec![0.5]).unwrap()).unwrap();
    let tape = Tape::new();
    let h = tape.constant(Tensor::new(vec![1, 1, 2], vec![2.0, 4.0]).unwrap());
    let y = model.bind(&tape, false).predict(h).unwrap().to_tensor();
    assert_eq!(y.data(), &[3.0 * 2.0 - 4.0 + 0.5]);
}

#[test]
fn batch_equals_stacked_singles() {
    let cfg = desk_small();
    let model = StafnModel::new(cfg.clone(), 4, 2).unwrap();
    let mut rng = rng_from(&[3]);
    let singles: Vec<ModelInput> = (0..3).map(|_| random_input(&cfg, 4, &[], &mut rng)).collect();
    let batch = ModelInput::stack(&singles).unwrap();
    let tape = Tape::new();
    let b = model.bind(&tape, false);
    let out = b.forward(&batch).unwrap().prediction.to_tensor();
    for (i, s) in singles.iter().enumerate() {
        let one = b.forward(s).unwrap().prediction.to_tensor();
        assert!(out.index_first(i).max_abs_diff(&one) < 1e-12);
    }
}

#[test]
fn forward_is_deterministic() {
    let cfg = desk_small();
    let a = StafnModel::new(cfg.clone(), 4, 11).unwrap();
    let b = StafnModel::new(cfg.clone(), 4, 11).unwrap();
    assert_eq!(a.params(), b.params());
    let input = random_input(&cfg, 4, &[], &mut rng_from(&[3]));
    let tape = Tape::new();
    let pa = a.bind(&tape, false).forward(&input).unwrap().prediction.to_tensor();
    let pb = b.bind(&tape, false).forward(&input).unwrap().prediction.to_tensor();
    assert_eq!(pa, pb);
}

#[test]
fn every_parameter_gets_gradient() {
    let cfg = desk_small();
    let model = StafnModel::new(cfg.clone(), 4, 12).unwrap();
    let input = random_input(&cfg, 4, &[], &mut rng_from(&[4]));
    let tape = Tape::new();
    let b = model.bind(&tape, true);
    let loss = b.forward(&input).unwrap().prediction.square().unwrap().sum().unwrap();
    let grads = tape.backward(loss).unwrap();
    for (name, &v) in model.params().names().iter().zip(b.param_vars()) {
        let g = grads.wrt(v);
        assert!(g.data().iter().any(|&x| x != 0.0), "{} has zero gradient", name);
    }
}

#[test]
fn parameter_count_depends_only_on_config() {
    let cfg = desk_small();
    let a = StafnModel::new(cfg.clone(), 4, 1).unwrap();
    let b = StafnModel::new(cfg.clone(), 4, 2).unwrap();
    assert_eq!(a.params().n_scalars(), b.params().n_scalars());
    assert_eq!(a.params().names(), b.params().names());
    let mut bigger = cfg;
    bigger.n_blocks = 2;
    assert!(StafnModel::new(bigger, 4, 1).unwrap().params().n_scalars() > a.params().n_scalars());
}

#[test]
fn shape_errors() {
    let cfg = desk_small();
    let model = StafnModel::new(cfg.clone(), 4, 1).unwrap();
    let mut input = random_input(&cfg, 3, &[], &mut rng_from(&[1]));
    let tape = Tape::new();
    assert!(model.bind(&tape, false).forward(&input).is_err());
    input = random_input(&cfg, 4, &[], &mut rng_from(&[1]));
    input.calendar_his = Tensor::zeros(&[2, 8]);
    assert!(model.bind(&tape, false).forward(&input).is_err());
    let mut odd = cfg;
    odd.d_model = 7;
    odd.n_heads = 1;
    assert!(StafnModel::new(odd, 4, 1).is_err());
}

fn permute_nodes(t: &Tensor, perm: &[usize]) -> Tensor {
    let s = t.shape().to_vec();
    let inner: usize = s[1..].iter().product();
    let mut out = Vec::with_capacity(t.len());
    for &p in perm {
        out.extend_from_slice(&t.data()[p * inner..(p + 1) * inner]);
    }
    Tensor::new(s, out).unwrap()
}

/// Permutes axis 1 of a `[T, N, d]` tensor.
fn permute_axis1(t: &Tensor, perm: &[usize]) -> Tensor {
    let swapped = t.permute(&[1, 0, 2]).unwrap();
    permute_nodes(&swapped, perm).permute(&[1, 0, 2]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn node_permutation_equivariance(seed in 0u64..1000, perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle()) {
        let cfg = desk_small();
        let model = StafnModel::new(cfg.clone(), 4, seed).unwrap();
        let mut permuted = model.clone();
        let v = model.params().get("node_embedding").unwrap();
        permuted.params_mut().set("node_embedding", permute_nodes(v, &perm)).unwrap();
        let input = random_input(&cfg, 4, &[], &mut rng_from(&[seed, 1]));
        let mut pin = input.clone();
        pin.x_hat = permute_nodes(&input.x_hat, &perm);
        pin.hint = permute_nodes(&input.hint, &perm);
        let tape = Tape::new();
        let a = model.bind(&tape, false).forward(&input).unwrap();
        let b = permuted.bind(&tape, false).forward(&pin).unwrap();
        let want = permute_axis1(&a.prediction.to_tensor(), &perm);
        prop_assert!(want.max_abs_diff(&b.prediction.to_tensor()) < 1e-8);
        let want = permute_axis1(&a.h_fur.to_tensor(), &perm);
        prop_assert!(want.max_abs_diff(&b.h_fur.to_tensor()) < 1e-8);
    }

    #[test]
    fn spatial_attention_is_local_in_time(seed in 0u64..1000, t in 0usize..3) {
        let cfg = desk_small();
        let model = StafnModel::new(cfg, 4, seed).unwrap();
        let tape = Tape::new();
        let b = model.bind(&tape, false);
        let h = random_tensor(&[3, 4, 8], seed);
        let mut z = h.clone();
        for n in 0..4 { for c in 0..8 { z.set(&[t, n, c], 0.0); } }
        let w = &model.encoder_block(0).spatial;
        let a = b.spatial_attention(tape.constant(h), w).unwrap().to_tensor();
        let c = b.spatial_attention(tape.constant(z), w).unwrap().to_tensor();
        for s in 0..3 {
            let same = a.index_first(s) == c.index_first(s);
            prop_assert_eq!(same, s != t);
        }
    }

    #[test]
    fn temporal_and_forecast_attention_are_local_in_nodes(seed in 0u64..1000, j in 0usize..4) {
        let cfg = desk_small();
        let model = StafnModel::new(cfg, 4, seed).unwrap();
        let tape = Tape::new();
        let b = model.bind(&tape, false);
        let h = random_tensor(&[3, 4, 8], seed);
        let fur = tape.constant(random_tensor(&[2, 4, 8], seed + 1));
        let mut p = h.clone();
        for s in 0..3 { for c in 0..8 { p.set(&[s, j, c], p.get(&[s, j, c]) + 0.5); } }
        let tw = &model.encoder_block(0).temporal;
        let fw = &model.decoder_block(0).forecast;
        let pairs = [
            (b.temporal_attention(tape.constant(h.clone()), tw).unwrap().to_tensor(),
             b.temporal_attention(tape.constant(p.clone()), tw).unwrap().to_tensor()),
            (b.forecast_attention(fur, tape.constant(h.clone()), fw).unwrap().to_tensor(),
             b.forecast_attention(fur, tape.constant(p.clone()), fw).unwrap().to_tensor()),
        ];
        for (a, c) in pairs {
            let a = a.permute(&[1, 0, 2]).unwrap();
            let c = c.permute(&[1, 0, 2]).unwrap();
            for n in 0..4 {
                prop_assert_eq!(a.index_first(n) == c.index_first(n), n != j);
            }
        }
    }
}
