use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::tensor::gradcheck::check_params;
use crate::tensor::{gelu, Tensor};

fn random(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn randomize(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    for p in store.iter_mut() {
        p.value.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    }
}

fn zero_all(store: &mut ParamStore) {
    for p in store.iter_mut() {
        p.value.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Weighted sum of a block output; the input is itself a parameter so its
/// gradient is checked too.
fn block_loss(
    store: &mut ParamStore,
    back: bool,
    x: ParamId,
    seed: u64,
    f: &dyn Fn(&mut Tape, &ParamStore, Var) -> Result<Var>,
) -> Result<f64> {
    let mut tape = Tape::new();
    let xv = tape.param(store, x);
    let out = f(&mut tape, store, xv)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = tape.constant(random(tape.value(out).shape().to_vec(), &mut rng));
    let prod = tape.mul(out, w)?;
    let loss = tape.sum(prod);
    if back {
        tape.backward(loss, store)?;
    }
    Ok(tape.value(loss).item())
}

fn check(store: &mut ParamStore, x: ParamId, seed: u64, f: &dyn Fn(&mut Tape, &ParamStore, Var) -> Result<Var>) {
    let r = check_params(store, 30, |s, back| block_loss(s, back, x, seed, f)).unwrap();
    assert!(r.max_relative_error < 1e-4, "{r:?}");
}

#[test]
fn fc_split_widths() {
    assert_eq!(fan_fc_split(120).unwrap(), (20, 80));
    assert_eq!(fan_fc_split(84).unwrap(), (14, 56));
    assert!(fan_fc_split(100).is_err());
    assert!(fan_fc_split(0).is_err());
    assert_eq!(fan_conv_split(12).unwrap(), 4);
    assert_eq!(fan_conv_split(96).unwrap(), 32);
    assert!(fan_conv_split(10).is_err());
}

#[test]
fn fc_block_at_zero_input() {
    let mut store = ParamStore::new();
    let p = FanFcBlockParams::init(&mut store, "f", 3, 12, ActivationKind::Gelu, 1).unwrap();
    let bias = [0.5, -1.0, 2.0, 0.0, 0.1, 0.2, 0.3, 0.4];
    store.get_mut(p.b_pbar).value.data_mut().copy_from_slice(&bias);
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(vec![3]));
    let y = fan_fc_block(&mut tape, &store, x, &p).unwrap();
    let out = tape.value(y).data();
    assert_eq!(out.len(), 12);
    assert_eq!(&out[..2], &[1.0, 1.0]);
    assert_eq!(&out[2..4], &[0.0, 0.0]);
    for (o, b) in out[4..].iter().zip(bias) {
        assert_eq!(*o, gelu(b));
    }
}

#[test]
fn fc_block_cos_pi() {
    let mut store = ParamStore::new();
    let p = FanFcBlockParams::init(&mut store, "f", 1, 6, ActivationKind::Gelu, 1).unwrap();
    store.get_mut(p.w_p).value.data_mut()[0] = PI;
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::from_vec(vec![1.0]));
    let y = fan_fc_block(&mut tape, &store, x, &p).unwrap();
    let out = tape.value(y).data();
    assert!((out[0] + 1.0).abs() < 1e-12);
    assert!(out[1].abs() < 1e-12);
}

#[test]
fn fc_block_matches_direct_formula_and_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..20u64 {
        let d_x = rng.random_range(1..7);
        let width = 6 * rng.random_range(1..4);
        let batch = rng.random_range(1..4);
        let mut store = ParamStore::new();
        let x = store.add_tensor("x", random(vec![batch, d_x], &mut rng)).unwrap();
        let p = FanFcBlockParams::init(&mut store, "f", d_x, width, ActivationKind::Gelu, case).unwrap();
        randomize(&mut store, &mut rng);

        let mut tape = Tape::new();
        let xv = tape.param(&store, x);
        let y = fan_fc_block(&mut tape, &store, xv, &p).unwrap();
        assert_eq!(tape.value(y).shape(), &[batch, p.width()]);
        let (xs, wp, wpb, bpb) = (
            store.get(x).value.data(),
            store.get(p.w_p).value.data(),
            store.get(p.w_pbar).value.data(),
            store.get(p.b_pbar).value.data(),
        );
        for b in 0..batch {
            let row = &xs[b * d_x..(b + 1) * d_x];
            let mut expected = Vec::new();
            let proj: Vec<f64> = (0..p.d_p).map(|i| (0..d_x).map(|j| wp[i * d_x + j] * row[j]).sum()).collect();
            expected.extend(proj.iter().map(|v| v.cos()));
            expected.extend(proj.iter().map(|v| v.sin()));
            expected.extend((0..p.d_pbar).map(|i| gelu(bpb[i] + (0..d_x).map(|j| wpb[i * d_x + j] * row[j]).sum::<f64>())));
            let got = &tape.value(y).data()[b * p.width()..(b + 1) * p.width()];
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e).abs() < 1e-12);
            }
        }
        let pc = p.clone();
        check(&mut store, x, case, &move |t, s, v| fan_fc_block(t, s, v, &pc));
    }
}

#[test]
fn conv_block_at_zero_input_and_widths() {
    let mut store = ParamStore::new();
    let p = FanConvBlockParams::init(&mut store, "c", 2, 12, 64, ActivationKind::Gelu, 0).unwrap();
    let b = [0.3, -0.2, 1.0, 0.0];
    store.get_mut(p.b_sigma).value.data_mut().copy_from_slice(&b);
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(vec![2, 100]));
    let y = fan_conv_block(&mut tape, &store, x, &p).unwrap();
    let v = tape.value(y);
    assert_eq!(v.shape(), &[12, 100]);
    for c in 0..12 {
        let row = &v.data()[c * 100..(c + 1) * 100];
        let expect = match c {
            0..=3 => 1.0,
            4..=7 => 0.0,
            _ => gelu(b[c - 8]),
        };
        assert!(row.iter().all(|r| *r == expect));
    }
    assert!(FanConvBlockParams::init(&mut store, "bad", 2, 10, 3, ActivationKind::Gelu, 0).is_err());

    let mut store = ParamStore::new();
    let p = FanConvBlockParams::init(&mut store, "m", 1, 96, 64, ActivationKind::Gelu, 0).unwrap();
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(vec![1, 257]));
    let y = fan_conv_block(&mut tape, &store, x, &p).unwrap();
    assert_eq!(tape.value(y).shape(), &[96, 257]);
}

#[test]
fn conv_block_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..20u64 {
        let (batch, c_in, filters, k) = (rng.random_range(1..3), rng.random_range(1..4), 3 * rng.random_range(1..3), rng.random_range(1..6));
        let l = rng.random_range(k..k + 10);
        let mut store = ParamStore::new();
        let x = store.add_tensor("x", random(vec![batch, c_in, l], &mut rng)).unwrap();
        let p = FanConvBlockParams::init(&mut store, "c", c_in, filters, k, ActivationKind::Gelu, case).unwrap();
        randomize(&mut store, &mut rng);
        check(&mut store, x, case, &move |t, s, v| fan_conv_block(t, s, v, &p));
    }
}

#[test]
fn skip_block_identity_and_mismatch() {
    let mut store = ParamStore::new();
    let p = SkipParams::init(&mut store, "s", SkipInnerKind::Conv, 3, 5, ActivationKind::Relu, 0).unwrap();
    zero_all(&mut store);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let input = random(vec![2, 3, 20], &mut rng);
    let mut tape = Tape::new();
    let x = tape.constant(input.clone());
    let y = skip_block(&mut tape, &store, x, &p).unwrap();
    assert_eq!(tape.value(y), &input);

    let wrong = tape.constant(Tensor::zeros(vec![2, 4, 20]));
    assert!(skip_block(&mut tape, &store, wrong, &p).is_err());

    let mut store = ParamStore::new();
    let widen = SkipParams {
        inner: SkipInner::Conv(
            ConvParams::init(&mut store, "w", 3, 6, 3, Padding::Same, 0).unwrap(),
            ActivationKind::Relu,
        ),
    };
    let mut tape = Tape::new();
    let x = tape.constant(input);
    assert!(matches!(skip_block(&mut tape, &store, x, &widen), Err(Error::Shape(_))));
}

#[test]
fn skip_block_gradients_include_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..20u64 {
        let kind = if case % 2 == 0 { SkipInnerKind::Conv } else { SkipInnerKind::FanConv };
        let c = 3 * rng.random_range(1..3);
        let k = rng.random_range(1..6);
        let l = rng.random_range(k..k + 10);
        let mut store = ParamStore::new();
        let x = store.add_tensor("x", random(vec![2, c, l], &mut rng)).unwrap();
        let p = SkipParams::init(&mut store, "s", kind, c, k, ActivationKind::Gelu, case).unwrap();
        randomize(&mut store, &mut rng);
        check(&mut store, x, case, &move |t, s, v| skip_block(t, s, v, &p));
    }

    // with a zeroed branch the derivative of each output wrt its input is exactly 1
    let mut store = ParamStore::new();
    let x = store.add_tensor("x", Tensor::full(vec![2, 6], 0.5)).unwrap();
    let p = SkipParams::init(&mut store, "s", SkipInnerKind::Conv, 2, 3, ActivationKind::Relu, 0).unwrap();
    for id in store.ids().skip(1).collect::<Vec<_>>() {
        store.get_mut(id).value.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    let mut tape = Tape::new();
    let xv = tape.param(&store, x);
    let y = skip_block(&mut tape, &store, xv, &p).unwrap();
    let s = tape.sum(y);
    tape.backward(s, &mut store).unwrap();
    assert!(store.get(x).grad.iter().all(|g| *g == 1.0));
}

#[test]
fn attention_zero_params_halve_input() {
    let mut store = ParamStore::new();
    let p = AttentionParams::init(&mut store, "a", 4, 12, 0).unwrap();
    zero_all(&mut store);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let input = random(vec![4, 30], &mut rng);
    let mut tape = Tape::new();
    let x = tape.constant(input.clone());
    let y = attention_block(&mut tape, &store, x, &p).unwrap();
    assert_eq!(tape.value(y).shape(), input.shape());
    for (a, b) in tape.value(y).data().iter().zip(input.data()) {
        assert_eq!(*a, b / 2.0);
    }
}

#[test]
fn attention_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..20u64 {
        let (batch, c, hidden, l) = (rng.random_range(1..3), rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..12));
        let mut store = ParamStore::new();
        let x = store.add_tensor("x", random(vec![batch, c, l], &mut rng)).unwrap();
        let p = AttentionParams::init(&mut store, "a", c, hidden, case).unwrap();
        randomize(&mut store, &mut rng);
        check(&mut store, x, case, &move |t, s, v| attention_block(t, s, v, &p));
    }
}

#[test]
fn skip_attention_zero_inner_is_identity_and_apnea_shape() {
    let mut store = ParamStore::new();
    let skip = SkipParams::init(&mut store, "s", SkipInnerKind::Conv, 12, 64, ActivationKind::Relu, 0).unwrap();
    let att = AttentionParams::init(&mut store, "a", 12, 12, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let input = random(vec![12, 375], &mut rng);
    let mut tape = Tape::new();
    let x = tape.constant(input.clone());
    let y = skip_attention_block(&mut tape, &store, x, &skip, &att).unwrap();
    assert_eq!(tape.value(y).shape(), &[12, 375]);

    if let SkipInner::Conv(conv, _) = &skip.inner {
        zero_all_ids(&mut store, &[conv.kernels, conv.bias.unwrap()]);
    }
    let mut tape = Tape::new();
    let x = tape.constant(input.clone());
    let y = skip_attention_block(&mut tape, &store, x, &skip, &att).unwrap();
    assert_eq!(tape.value(y), &input);
}

fn zero_all_ids(store: &mut ParamStore, ids: &[ParamId]) {
    for id in ids {
        store.get_mut(*id).value.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
}

#[test]
fn skip_attention_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..20u64 {
        let kind = if case % 2 == 0 { SkipInnerKind::Conv } else { SkipInnerKind::FanConv };
        let c = 3 * rng.random_range(1..3);
        let k = rng.random_range(1..6);
        let l = rng.random_range(k..k + 8);
        let mut store = ParamStore::new();
        let x = store.add_tensor("x", random(vec![2, c, l], &mut rng)).unwrap();
        let skip = SkipParams::init(&mut store, "s", kind, c, k, ActivationKind::Gelu, case).unwrap();
        let att = AttentionParams::init(&mut store, "a", c, 4, case).unwrap();
        randomize(&mut store, &mut rng);
        check(&mut store, x, case, &move |t, s, v| skip_attention_block(t, s, v, &skip, &att));
    }
}

#[test]
fn blocks_preserve_length() {
    let mut store = ParamStore::new();
    let fan = FanConvBlockParams::init(&mut store, "f", 3, 3, 64, ActivationKind::Gelu, 0).unwrap();
    let skip = SkipParams::init(&mut store, "s", SkipInnerKind::Conv, 3, 64, ActivationKind::Relu, 0).unwrap();
    let att = AttentionParams::init(&mut store, "a", 3, 2, 0).unwrap();
    for l in [250usize, 257, 375, 1500, 6000] {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(vec![3, l], 0.1));
        let outs = [
            fan_conv_block(&mut tape, &store, x, &fan).unwrap(),
            skip_block(&mut tape, &store, x, &skip).unwrap(),
            attention_block(&mut tape, &store, x, &att).unwrap(),
            skip_attention_block(&mut tape, &store, x, &skip, &att).unwrap(),
        ];
        for o in outs {
            assert_eq!(tape.value(o).shape(), &[3, l]);
        }
    }
}

proptest! {
    #[test]
    fn fc_block_is_periodic_when_w_pbar_is_zero(
        seed in 0u64..1000,
        shifts in proptest::collection::vec(-3i32..=3, 2),
    ) {
        // W_p = [[a, 0], [0, b]] so Δ = (2πm/a, 2πn/b) gives W_p·Δ = 2π(m, n)
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let p = FanFcBlockParams::init(&mut store, "f", 2, 12, ActivationKind::Gelu, seed).unwrap();
        let (a, b) = (rng.random_range(0.5..3.0), rng.random_range(0.5..3.0));
        store.get_mut(p.w_p).value = Tensor::new(vec![2, 2], vec![a, 0.0, 0.0, b]).unwrap();
        store.get_mut(p.w_pbar).value.data_mut().iter_mut().for_each(|v| *v = 0.0);
        store.get_mut(p.b_pbar).value.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        let x0 = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let delta = [2.0 * PI * f64::from(shifts[0]) / a, 2.0 * PI * f64::from(shifts[1]) / b];
        let eval = |x: [f64; 2]| {
            let mut t = Tape::new();
            let v = t.constant(Tensor::from_vec(x.to_vec()));
            let y = fan_fc_block(&mut t, &store, v, &p).unwrap();
            t.value(y).data().to_vec()
        };
        let base = eval(x0);
        let moved = eval([x0[0] + delta[0], x0[1] + delta[1]]);
        prop_assert_eq!(base.len(), 12);
        for (u, v) in base.iter().zip(&moved) {
            prop_assert!((u - v).abs() < 1e-9);
        }
    }
}

#[test]
fn fan_extrapolates_sine_better_than_matched_mlp() {
    let mut fan = Vec::new();
    let mut mlp = Vec::new();
    for seed in 0..5 {
        let r = sine_extrapolation(12, 1500, 0.01, seed).unwrap();
        assert!(r.mlp_params >= r.fan_params);
        fan.push(r.fan_test_mse);
        mlp.push(r.mlp_test_mse);
    }
    fan.sort_by(f64::total_cmp);
    mlp.sort_by(f64::total_cmp);
    assert!(fan[2] < mlp[2], "fan median {} vs mlp median {}", fan[2], mlp[2]);
}
