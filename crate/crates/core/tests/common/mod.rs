//! Independent oracles shared by the integration tests: direct loop
//! implementations of the kernels and a central finite-difference gradient
//! checker.
#![allow(dead_code)]

use efnet_core::blocks::Forward;
use efnet_core::tensor::{Mode, ParamStore, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape.to_vec(), -1.0, 1.0, rng).unwrap()
}

fn at(t: &Tensor, n: usize, y: usize, x: usize, c: usize) -> f64 {
    t.get(&[n, y, x, c]).unwrap()
}

/// Padding before the first row/column for "same" padding, extra on the far side.
fn same_pad(input: usize, k: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + k).saturating_sub(input);
    (out, total / 2)
}

fn geometry(input: usize, k: usize, stride: usize, same: bool) -> (usize, i64) {
    if same {
        let (o, p) = same_pad(input, k, stride);
        (o, p as i64)
    } else {
        ((input - k) / stride + 1, 0)
    }
}

/// Six nested loops over (n, oy, ox, co, ky, kx, ci), reading through an
/// explicit zero-padding test.
pub fn conv2d_ref(x: &Tensor, k: &Tensor, stride: usize, same: bool) -> Tensor {
    let (n, h, w, cin) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (kh, kw, cout) = (k.shape()[0], k.shape()[1], k.shape()[3]);
    let (oh, pt) = geometry(h, kh, stride, same);
    let (ow, pl) = geometry(w, kw, stride, same);
    let mut out = Vec::new();
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for co in 0..cout {
                    let mut s = 0.0;
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride + ky) as i64 - pt;
                            let ix = (ox * stride + kx) as i64 - pl;
                            if iy < 0 || ix < 0 || iy >= h as i64 || ix >= w as i64 {
                                continue;
                            }
                            for ci in 0..cin {
                                s += at(x, b, iy as usize, ix as usize, ci) * k.get(&[ky, kx, ci, co]).unwrap();
                            }
                        }
                    }
                    out.push(s);
                }
            }
        }
    }
    Tensor::new([n, oh, ow, cout], out).unwrap()
}

pub fn depthwise_ref(x: &Tensor, k: &Tensor, stride: usize, same: bool) -> Tensor {
    let (n, h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (kh, kw) = (k.shape()[0], k.shape()[1]);
    let (oh, pt) = geometry(h, kh, stride, same);
    let (ow, pl) = geometry(w, kw, stride, same);
    let mut out = Vec::new();
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut s = 0.0;
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride + ky) as i64 - pt;
                            let ix = (ox * stride + kx) as i64 - pl;
                            if iy < 0 || ix < 0 || iy >= h as i64 || ix >= w as i64 {
                                continue;
                            }
                            s += at(x, b, iy as usize, ix as usize, ch) * k.get(&[ky, kx, ch]).unwrap();
                        }
                    }
                    out.push(s);
                }
            }
        }
    }
    Tensor::new([n, oh, ow, c], out).unwrap()
}

/// Patch max/mean over in-bounds taps.
pub fn pool_ref(x: &Tensor, max: bool, kh: usize, kw: usize, stride: usize, same: bool) -> Tensor {
    let (n, h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (oh, pt) = geometry(h, kh, stride, same);
    let (ow, pl) = geometry(w, kw, stride, same);
    let mut out = Vec::new();
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut vals = Vec::new();
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride + ky) as i64 - pt;
                            let ix = (ox * stride + kx) as i64 - pl;
                            if iy >= 0 && ix >= 0 && iy < h as i64 && ix < w as i64 {
                                vals.push(at(x, b, iy as usize, ix as usize, ch));
                            }
                        }
                    }
                    out.push(if max {
                        vals.iter().cloned().fold(f64::MIN, f64::max)
                    } else {
                        vals.iter().sum::<f64>() / vals.len() as f64
                    });
                }
            }
        }
    }
    Tensor::new([n, oh, ow, c], out).unwrap()
}

pub const FD_STEP: f64 = 1e-5;
/// Magnitude below which gradient entries are compared on an absolute scale.
pub const GRAD_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy)]
pub struct GradReport {
    pub max_rel_err: f64,
    pub checked: usize,
}

/// Compares reverse-mode gradients of `loss = sum(proj * forward(...))` with
/// central differences, over every input element and every trainable
/// parameter element.
pub fn grad_check<F>(params: &ParamStore, inputs: &[Tensor], mode: Mode, seed: u64, forward: F) -> GradReport
where
    F: Fn(&mut Forward, &[Var]) -> efnet_core::Result<Var>,
{
    let run = |params: &ParamStore, inputs: &[Tensor]| -> (Tape, Var, Vec<Var>) {
        let mut tape = Tape::new();
        let mut f = Forward::new(&mut tape, params, mode);
        let vars: Vec<Var> = inputs.iter().map(|t| f.tape.input(t.clone()).unwrap()).collect();
        let out = forward(&mut f, &vars).unwrap();
        (tape, out, vars)
    };
    let (tape, out, vars) = run(params, inputs);
    let mut r = rng(seed ^ 0x5eed);
    let proj = Tensor::uniform(tape.value(out).shape().to_vec(), -1.0, 1.0, &mut r).unwrap();
    let loss = |params: &ParamStore, inputs: &[Tensor]| -> f64 {
        let (tape, out, _) = run(params, inputs);
        tape.value(out).data().iter().zip(proj.data()).map(|(a, b)| a * b).sum()
    };

    let mut analytic_params = params.clone();
    analytic_params.zero_grads();
    let grads = tape.backward(out, &proj, &mut analytic_params).unwrap();

    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut compare = |a: f64, n: f64| {
        let err = (a - n).abs() / a.abs().max(n.abs()).max(GRAD_FLOOR);
        worst = worst.max(err);
        checked += 1;
    };

    for (i, v) in vars.iter().enumerate() {
        let g = grads
            .get(*v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[i].shape().to_vec()).unwrap());
        for j in 0..inputs[i].len() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= FD_STEP;
            let n = (loss(params, &plus) - loss(params, &minus)) / (2.0 * FD_STEP);
            compare(g.data()[j], n);
        }
    }

    for (pi, p) in params.iter().enumerate() {
        if !p.trainable {
            continue;
        }
        let analytic = analytic_params.iter().nth(pi).unwrap().value.grad().map(|g| g.to_vec());
        let analytic = analytic.unwrap_or_else(|| vec![0.0; p.value.len()]);
        for (j, &a) in analytic.iter().enumerate() {
            let mut plus = params.clone();
            plus.iter_mut().nth(pi).unwrap().value.data_mut()[j] += FD_STEP;
            let mut minus = params.clone();
            minus.iter_mut().nth(pi).unwrap().value.data_mut()[j] -= FD_STEP;
            let n = (loss(&plus, inputs) - loss(&minus, inputs)) / (2.0 * FD_STEP);
            compare(a, n);
        }
    }
    GradReport {
        max_rel_err: worst,
        checked,
    }
}

pub fn uniform_in(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}
pub mod gradsuite;
