//! Finite-difference gradient cases for every differentiable op and block.

use super::{grad_check, rand_tensor, rng, uniform_in, GradReport};
use efnet_core::blocks::{Block, BlockKind, BlockSpec, TransitionLayer};
use efnet_core::tensor::{BatchNormArgs, BatchNormConfig, Mode, Padding, ParamStore, PoolKind, RunningStats};
use rand::Rng;

pub type Case = fn(u64) -> GradReport;

fn pad(r: &mut impl Rng) -> Padding {
    if r.random_bool(0.5) {
        Padding::Same
    } else {
        Padding::Valid
    }
}

fn conv2d(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let (n, h, w) = (
        uniform_in(&mut r, 1, 2),
        uniform_in(&mut r, 3, 6),
        uniform_in(&mut r, 3, 6),
    );
    let (cin, cout) = (uniform_in(&mut r, 1, 3), uniform_in(&mut r, 1, 3));
    let k = uniform_in(&mut r, 1, 3);
    let stride = uniform_in(&mut r, 1, 2);
    let padding = pad(&mut r);
    let inputs = [
        rand_tensor(&[n, h, w, cin], &mut r),
        rand_tensor(&[k, k, cin, cout], &mut r),
    ];
    grad_check(&ParamStore::new(), &inputs, Mode::Train, seed, |f, v| {
        f.tape.conv2d(v[0], v[1], stride, padding)
    })
}

fn depthwise(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let (n, h, w, c) = (
        uniform_in(&mut r, 1, 2),
        uniform_in(&mut r, 3, 6),
        uniform_in(&mut r, 3, 6),
        uniform_in(&mut r, 1, 3),
    );
    let k = uniform_in(&mut r, 1, 3);
    let stride = uniform_in(&mut r, 1, 2);
    let padding = pad(&mut r);
    let inputs = [rand_tensor(&[n, h, w, c], &mut r), rand_tensor(&[k, k, c], &mut r)];
    grad_check(&ParamStore::new(), &inputs, Mode::Train, seed, |f, v| {
        f.tape.depthwise_conv2d(v[0], v[1], stride, padding)
    })
}

fn pointwise(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let (cin, cout) = (uniform_in(&mut r, 1, 4), uniform_in(&mut r, 1, 4));
    let inputs = [rand_tensor(&[2, 3, 3, cin], &mut r), rand_tensor(&[cin, cout], &mut r)];
    grad_check(&ParamStore::new(), &inputs, Mode::Train, seed, |f, v| {
        f.tape.pointwise_conv2d(v[0], v[1])
    })
}

fn dense(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let (n, cin, cout) = (
        uniform_in(&mut r, 1, 4),
        uniform_in(&mut r, 1, 5),
        uniform_in(&mut r, 2, 4),
    );
    let inputs = [
        rand_tensor(&[n, cin], &mut r),
        rand_tensor(&[cin, cout], &mut r),
        rand_tensor(&[cout], &mut r),
    ];
    grad_check(&ParamStore::new(), &inputs, Mode::Train, seed, |f, v| {
        let y = f.tape.pointwise_conv2d(v[0], v[1])?;
        f.tape.bias_add(y, v[2])
    })
}

fn pool(seed: u64, kind: PoolKind) -> GradReport {
    let mut r = rng(seed);
    let (h, w, c) = (
        uniform_in(&mut r, 3, 6),
        uniform_in(&mut r, 3, 6),
        uniform_in(&mut r, 1, 3),
    );
    let k = uniform_in(&mut r, 2, 3);
    let stride = uniform_in(&mut r, 1, 2);
    let padding = pad(&mut r);
    let inputs = [rand_tensor(&[2, h, w, c], &mut r)];
    grad_check(&ParamStore::new(), &inputs, Mode::Train, seed, |f, v| {
        f.tape.pool2d(v[0], kind, (k, k), stride, padding)
    })
}

fn max_pool(seed: u64) -> GradReport {
    pool(seed, PoolKind::Max)
}

fn avg_pool(seed: u64) -> GradReport {
    pool(seed, PoolKind::Average)
}

fn global_pool(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let inputs = [rand_tensor(
        &[2, uniform_in(&mut r, 1, 4), uniform_in(&mut r, 1, 4), 3],
        &mut r,
    )];
    grad_check(&ParamStore::new(), &inputs, Mode::Train, seed, |f, v| {
        f.tape.global_average_pool(v[0])
    })
}

fn batch_norm(seed: u64, mode: Mode) -> GradReport {
    let mut r = rng(seed);
    let c = uniform_in(&mut r, 1, 3);
    let inputs = [
        rand_tensor(&[uniform_in(&mut r, 2, 3), 3, 3, c], &mut r),
        rand_tensor(&[c], &mut r),
        rand_tensor(&[c], &mut r),
    ];
    let base = RunningStats {
        mean: (0..c).map(|i| 0.1 * i as f64).collect(),
        var: (0..c).map(|i| 0.5 + 0.25 * i as f64).collect(),
    };
    grad_check(&ParamStore::new(), &inputs, mode, seed, |f, v| {
        let mut stats = base.clone();
        let mode = f.mode;
        f.tape.batch_norm(
            v[0],
            BatchNormArgs {
                gamma: v[1],
                beta: v[2],
                stats: &mut stats,
                mode,
                config: BatchNormConfig::default(),
            },
        )
    })
}

fn bn_train(seed: u64) -> GradReport {
    batch_norm(seed, Mode::Train)
}

fn bn_infer(seed: u64) -> GradReport {
    batch_norm(seed, Mode::Infer)
}

fn relu(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let inputs = [rand_tensor(&[3, 4], &mut r)];
    grad_check(&ParamStore::new(), &inputs, Mode::Train, seed, |f, v| f.tape.relu(v[0]))
}

fn relu6(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let x = rand_tensor(&[4, 4], &mut r).map(|v| v * 8.0);
    grad_check(&ParamStore::new(), &[x], Mode::Train, seed, |f, v| f.tape.relu6(v[0]))
}

fn softmax(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let inputs = [rand_tensor(&[uniform_in(&mut r, 1, 4), uniform_in(&mut r, 2, 5)], &mut r).map(|v| 3.0 * v)];
    grad_check(&ParamStore::new(), &inputs, Mode::Train, seed, |f, v| {
        f.tape.softmax(v[0])
    })
}

fn elementwise(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let c = uniform_in(&mut r, 1, 3);
    let s: f64 = r.random_range(-2.0..2.0);
    let inputs = [
        rand_tensor(&[2, 2, 2, c], &mut r),
        rand_tensor(&[2, 2, 2, c], &mut r),
        rand_tensor(&[c], &mut r),
        rand_tensor(&[2, 2, 2, 2], &mut r),
    ];
    grad_check(&ParamStore::new(), &inputs, Mode::Train, seed, |f, v| {
        let a = f.tape.add(v[0], v[1])?;
        let a = f.tape.scale(a, s)?;
        let a = f.tape.bias_add(a, v[2])?;
        f.tape.concat_channels(&[a, v[3], v[0]])
    })
}

/// Block built from `spec` over a random input with its trainable parameters.
fn block_case(seed: u64, spec: BlockSpec, batch: usize, hw: usize) -> GradReport {
    let mut r = rng(seed);
    let mut params = ParamStore::new();
    let block = Block::new(&spec, &mut params, "b", &mut r).unwrap();
    // Perturb every parameter so zero biases and unit gammas are not special.
    for p in params.iter_mut().filter(|p| p.trainable) {
        for x in p.value.data_mut() {
            *x += r.random_range(-0.3..0.3);
        }
    }
    let x = rand_tensor(&[batch, hw, hw, spec.channels_in], &mut r);
    grad_check(&params, &[x], Mode::Train, seed, |f, v| block.forward(f, v[0]))
}

fn xception(seed: u64) -> GradReport {
    let spec = if seed.is_multiple_of(2) {
        BlockSpec::new(BlockKind::XceptionSep, 3, 3)
    } else {
        BlockSpec::new(BlockKind::XceptionSep, 2, 4).with_stride(2)
    };
    block_case(seed, spec, 1, 5)
}

fn inverted_residual(seed: u64) -> GradReport {
    let spec = if seed.is_multiple_of(2) {
        BlockSpec::new(BlockKind::MobilenetInvertedResidual, 3, 3).with_expansion(2.0)
    } else {
        BlockSpec::new(BlockKind::MobilenetInvertedResidual, 2, 3)
            .with_expansion(2.0)
            .with_stride(2)
            .with_residual(false)
    };
    block_case(seed, spec, 1, 4)
}

fn preact(seed: u64) -> GradReport {
    let spec = if seed.is_multiple_of(2) {
        BlockSpec::new(BlockKind::ResnetV2Preact, 3, 3)
    } else {
        BlockSpec::new(BlockKind::ResnetV2Preact, 2, 4).with_stride(2)
    };
    block_case(seed, spec, 2, 4)
}

fn dense_block(seed: u64) -> GradReport {
    block_case(
        seed,
        BlockSpec::new(BlockKind::DensenetDense, 2, 2).with_growth(2, 2),
        2,
        3,
    )
}

fn inception_resnet(seed: u64) -> GradReport {
    let scale = [0.2, 0.5, 1.0][(seed % 3) as usize];
    block_case(
        seed,
        BlockSpec::new(BlockKind::InceptionResnetHybrid, 3, 3)
            .with_residual_scale(scale)
            .with_hidden_width(2),
        1,
        4,
    )
}

fn transition(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let mut params = ParamStore::new();
    let t = TransitionLayer::new(&mut params, "t", 3, 2, &mut r).unwrap();
    for p in params.iter_mut().filter(|p| p.trainable) {
        for x in p.value.data_mut() {
            *x += r.random_range(-0.3..0.3);
        }
    }
    let x = rand_tensor(&[2, 4, 5, 3], &mut r);
    grad_check(&params, &[x], Mode::Train, seed, |f, v| t.forward(f, v[0]))
}

pub fn op_cases() -> Vec<(&'static str, Case)> {
    vec![
        ("conv2d", conv2d as Case),
        ("depthwise_conv2d", depthwise),
        ("pointwise_conv2d", pointwise),
        ("dense", dense),
        ("max_pool2d", max_pool),
        ("avg_pool2d", avg_pool),
        ("global_average_pool", global_pool),
        ("batch_norm_train", bn_train),
        ("batch_norm_infer", bn_infer),
        ("relu", relu),
        ("relu6", relu6),
        ("softmax", softmax),
        ("add_scale_bias_concat", elementwise),
    ]
}

pub fn block_cases() -> Vec<(&'static str, Case)> {
    vec![
        ("xception_sep_block", xception as Case),
        ("inverted_residual_block", inverted_residual),
        ("preact_residual_unit", preact),
        ("dense_block", dense_block),
        ("transition_layer", transition),
        ("inception_resnet_module", inception_resnet),
    ]
}

pub const INSTANCES: u64 = 20;
pub const MAX_REL_ERR: f64 = 1e-4;

/// Worst relative error of `case` over [`INSTANCES`] seeds.
pub fn worst(case: Case) -> f64 {
    (0..INSTANCES).map(|s| case(1000 + s).max_rel_err).fold(0.0, f64::max)
}
