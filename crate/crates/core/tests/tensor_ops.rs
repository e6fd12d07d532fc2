mod common;

use common::{conv2d_ref, depthwise_ref, pool_ref, rand_tensor, rng};
use efnet_core::blocks::Forward;
use efnet_core::tensor::kernels::{
    batch_norm, conv2d, depthwise_conv2d, global_average_pool, output_extent, pointwise_conv2d, pool2d, softmax,
    BatchNormConfig, RunningStats,
};
use efnet_core::tensor::{Mode, Padding, ParamStore, PoolKind, Tape, Tensor};
use efnet_core::Error;
use proptest::prelude::*;

#[test]
fn conv2d_matches_loop_oracle() {
    let mut r = rng(1);
    let x = rand_tensor(&[1, 5, 5, 2], &mut r);
    let k = rand_tensor(&[3, 3, 2, 3], &mut r);
    for (stride, padding, same) in [
        (1, Padding::Valid, false),
        (1, Padding::Same, true),
        (2, Padding::Same, true),
        (2, Padding::Valid, false),
    ] {
        let got = conv2d(&x, &k, stride, padding).unwrap();
        let want = conv2d_ref(&x, &k, stride, same);
        assert!(got.max_abs_diff(&want).unwrap() <= 1e-12, "stride {stride} {padding:?}");
    }
}

#[test]
fn depthwise_matches_per_channel_oracle() {
    let mut r = rng(2);
    let x = rand_tensor(&[1, 5, 5, 3], &mut r);
    let k = rand_tensor(&[3, 3, 3], &mut r);
    for (stride, padding, same) in [
        (1, Padding::Same, true),
        (2, Padding::Valid, false),
        (2, Padding::Same, true),
    ] {
        let got = depthwise_conv2d(&x, &k, stride, padding).unwrap();
        assert!(got.max_abs_diff(&depthwise_ref(&x, &k, stride, same)).unwrap() <= 1e-12);
    }
}

#[test]
fn pointwise_matches_1x1_conv2d() {
    let mut r = rng(3);
    let x = rand_tensor(&[2, 4, 3, 3], &mut r);
    let k = rand_tensor(&[3, 5], &mut r);
    let k4 = k.clone().reshape([1, 1, 3, 5]).unwrap();
    let a = pointwise_conv2d(&x, &k).unwrap();
    let b = conv2d(&x, &k4, 1, Padding::Valid).unwrap();
    assert!(a.max_abs_diff(&b).unwrap() <= 1e-12);
}

#[test]
fn pool_matches_patch_oracle() {
    let mut r = rng(4);
    let x = rand_tensor(&[2, 5, 6, 2], &mut r);
    for (kind, max) in [(PoolKind::Max, true), (PoolKind::Average, false)] {
        for (stride, padding, same) in [
            (2, Padding::Valid, false),
            (2, Padding::Same, true),
            (1, Padding::Same, true),
        ] {
            let got = pool2d(&x, kind, (3, 2), stride, padding).unwrap();
            let want = pool_ref(&x, max, 3, 2, stride, same);
            assert!(got.max_abs_diff(&want).unwrap() <= 1e-12);
        }
    }
}

#[test]
fn global_average_pool_matches_mean() {
    let mut r = rng(5);
    let x = rand_tensor(&[3, 4, 5, 2], &mut r);
    let got = global_average_pool(&x).unwrap();
    for n in 0..3 {
        for c in 0..2 {
            let mut s = 0.0;
            for y in 0..4 {
                for xx in 0..5 {
                    s += x.get(&[n, y, xx, c]).unwrap();
                }
            }
            assert!((got.get(&[n, c]).unwrap() - s / 20.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn batch_norm_train_output_is_standardized() {
    let mut r = rng(6);
    let x = rand_tensor(&[8, 3, 3, 4], &mut r).map(|v| 3.0 * v + 1.5);
    let mut stats = RunningStats::new(4);
    let cfg = BatchNormConfig {
        epsilon: 0.0,
        ..Default::default()
    };
    let out = batch_norm(
        &x,
        &Tensor::ones([4]).unwrap(),
        &Tensor::zeros([4]).unwrap(),
        &mut stats,
        Mode::Train,
        cfg,
    )
    .unwrap();
    let m = out.normalized.len() / 4;
    for c in 0..4 {
        let vals: Vec<f64> = out.normalized.iter().skip(c).step_by(4).copied().collect();
        let mean = vals.iter().sum::<f64>() / m as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
        assert!(mean.abs() <= 1e-10);
        assert!((var - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn pointwise_kernel_grad_is_channel_input_sum() {
    let mut r = rng(7);
    let x = rand_tensor(&[2, 3, 3, 2], &mut r);
    let mut params = ParamStore::new();
    let kid = params.add("k", rand_tensor(&[2, 3], &mut r), true).unwrap();
    let mut tape = Tape::new();
    let xv = tape.input(x.clone()).unwrap();
    let kv = tape.param(&params, kid).unwrap();
    let y = tape.pointwise_conv2d(xv, kv).unwrap();
    let seed = Tensor::ones(tape.value(y).shape().to_vec()).unwrap();
    tape.backward(y, &seed, &mut params).unwrap();
    let g = params.value(kid).grad().unwrap();
    for ci in 0..2 {
        let s: f64 = x.data().iter().skip(ci).step_by(2).sum();
        for co in 0..3 {
            assert!((g[ci * 3 + co] - s).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_upstream_gradient_gives_zero_grads() {
    let mut r = rng(8);
    let mut params = ParamStore::new();
    let kid = params.add("k", rand_tensor(&[3, 3, 2, 2], &mut r), true).unwrap();
    let mut tape = Tape::new();
    let xv = tape.input(rand_tensor(&[1, 4, 4, 2], &mut r)).unwrap();
    let kv = tape.param(&params, kid).unwrap();
    let y = tape.conv2d(xv, kv, 1, Padding::Same).unwrap();
    let y = tape.relu(y).unwrap();
    let seed = Tensor::zeros(tape.value(y).shape().to_vec()).unwrap();
    tape.backward(y, &seed, &mut params).unwrap();
    assert!(params.value(kid).grad().unwrap().iter().all(|&g| g == 0.0));
}

#[test]
fn non_trainable_params_are_skipped() {
    let mut params = ParamStore::new();
    let frozen = params.add("frozen", Tensor::ones([2, 2]).unwrap(), false).unwrap();
    let mut tape = Tape::new();
    let x = tape.input(Tensor::ones([1, 2]).unwrap()).unwrap();
    let k = tape.param(&params, frozen).unwrap();
    let y = tape.pointwise_conv2d(x, k).unwrap();
    let grads = tape.backward(y, &Tensor::ones([1, 2]).unwrap(), &mut params).unwrap();
    assert!(params.value(frozen).grad().is_none());
    assert!(grads.get(x).is_some());
}

#[test]
fn backward_without_forward_fails() {
    let tape = Tape::new();
    let mut other = Tape::new();
    let v = other.input(Tensor::ones([1]).unwrap()).unwrap();
    let err = tape
        .backward(v, &Tensor::ones([1]).unwrap(), &mut ParamStore::new())
        .unwrap_err();
    assert!(matches!(err, Error::EmptyTape));
}

#[test]
fn non_finite_values_are_hard_errors() {
    let mut tape = Tape::new();
    assert!(matches!(
        tape.input(Tensor::new([1], vec![f64::NAN]).unwrap()),
        Err(Error::NonFinite { .. })
    ));
    let x = tape.input(Tensor::full([1, 1], 1e308).unwrap()).unwrap();
    assert!(matches!(tape.scale(x, 10.0), Err(Error::NonFinite { .. })));
}

#[test]
fn forward_is_bitwise_deterministic() {
    let run = || {
        let mut r = rng(9);
        let x = rand_tensor(&[2, 6, 6, 3], &mut r);
        let k = rand_tensor(&[3, 3, 3, 4], &mut r);
        let mut tape = Tape::new();
        let params = ParamStore::new();
        let f = Forward::new(&mut tape, &params, Mode::Train);
        let xv = f.tape.input(x).unwrap();
        let kv = f.tape.input(k).unwrap();
        let y = f.tape.conv2d(xv, kv, 2, Padding::Same).unwrap();
        let y = f.tape.global_average_pool(y).unwrap();
        let y = f.tape.softmax(y).unwrap();
        tape.value(y).data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn conv_output_shape_is_pure_function_of_shapes(
        n in 1usize..3, h in 1usize..9, w in 1usize..9, cin in 1usize..4, cout in 1usize..4,
        k in 1usize..4, stride in 1usize..3, same in any::<bool>(),
    ) {
        let padding = if same { Padding::Same } else { Padding::Valid };
        let x = Tensor::ones([n, h, w, cin]).unwrap();
        let kern = Tensor::ones([k, k, cin, cout]).unwrap();
        match conv2d(&x, &kern, stride, padding) {
            Ok(y) => {
                let oh = output_extent(h, k, stride, padding).unwrap();
                let ow = output_extent(w, k, stride, padding).unwrap();
                let expect_h = if same { h.div_ceil(stride) } else { (h - k) / stride + 1 };
                prop_assert_eq!(oh, expect_h);
                prop_assert_eq!(y.shape(), &[n, oh, ow, cout][..]);
                let dw = depthwise_conv2d(&Tensor::ones([n, h, w, cin]).unwrap(), &Tensor::ones([k, k, cin]).unwrap(), stride, padding).unwrap();
                prop_assert_eq!(dw.shape(), &[n, oh, ow, cin][..]);
            }
            Err(_) => prop_assert!(!same && (k > h || k > w)),
        }
    }

    #[test]
    fn softmax_rows_on_simplex(rows in 1usize..5, cols in 1usize..6, seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = rand_tensor(&[rows, cols], &mut r).map(|v| 5.0 * v);
        let p = softmax(&x).unwrap();
        for row in p.data().chunks_exact(cols) {
            let s: f64 = row.iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&v| v > 0.0 && v <= 1.0));
            if cols > 1 {
                prop_assert!(row.iter().all(|&v| v < 1.0));
            }
        }
    }
}
