//! Forward and backward kernels on plain tensors.
//!
//! Every reduction runs in a fixed sequential order so results are bitwise
//! reproducible.

use super::{Scalar, Tensor};
use crate::error::{shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output extent `ceil(in / stride)`; odd padding goes to the bottom/right.
    Same,
    /// No padding; output extent `floor((in - k) / stride) + 1`.
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Returns `(output extent, padding before)` along one spatial axis.
fn axis_geometry(op: &'static str, input: usize, k: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    if stride == 0 {
        return shape_err(op, "stride must be positive");
    }
    match padding {
        Padding::Valid => {
            if k > input {
                return shape_err(op, format!("kernel extent {k} exceeds input extent {input}"));
            }
            Ok(((input - k) / stride + 1, 0))
        }
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(input);
            if k > input + total {
                return shape_err(op, format!("kernel extent {k} exceeds padded extent"));
            }
            Ok((out, total / 2))
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    n: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad_top: usize,
    pad_left: usize,
}

impl Geometry {
    fn new(op: &'static str, input: &[usize], kh: usize, kw: usize, stride: usize, padding: Padding) -> Result<Self> {
        if input.len() != 4 {
            return shape_err(op, format!("expected rank-4 NHWC input, got {input:?}"));
        }
        let (oh, pad_top) = axis_geometry(op, input[1], kh, stride, padding)?;
        let (ow, pad_left) = axis_geometry(op, input[2], kw, stride, padding)?;
        Ok(Self {
            n: input[0],
            h: input[1],
            w: input[2],
            oh,
            ow,
            kh,
            kw,
            stride,
            pad_top,
            pad_left,
        })
    }

    /// Input coordinate for output `o` and kernel tap `k`, if inside the image.
    #[inline]
    fn src(o: usize, k: usize, stride: usize, pad: usize, extent: usize) -> Option<usize> {
        let p = (o * stride + k).checked_sub(pad)?;
        (p < extent).then_some(p)
    }

    #[inline]
    fn row(&self, oy: usize, ky: usize) -> Option<usize> {
        Self::src(oy, ky, self.stride, self.pad_top, self.h)
    }

    #[inline]
    fn col(&self, ox: usize, kx: usize) -> Option<usize> {
        Self::src(ox, kx, self.stride, self.pad_left, self.w)
    }
}

pub fn output_extent(input: usize, k: usize, stride: usize, padding: Padding) -> Result<usize> {
    axis_geometry("output_extent", input, k, stride, padding).map(|(o, _)| o)
}

/// Standard cross-correlation. `input` is `[N,H,W,Cin]`, `kernel` is `[kh,kw,Cin,Cout]`.
pub fn conv2d(input: &Tensor, kernel: &Tensor, stride: usize, padding: Padding) -> Result<Tensor> {
    let ks = kernel.shape();
    if ks.len() != 4 {
        return shape_err("conv2d", format!("kernel must be rank 4, got {ks:?}"));
    }
    let g = Geometry::new("conv2d", input.shape(), ks[0], ks[1], stride, padding)?;
    let (cin, cout) = (ks[2], ks[3]);
    if input.shape()[3] != cin {
        return shape_err(
            "conv2d",
            format!("input has {} channels, kernel expects {cin}", input.shape()[3]),
        );
    }
    let x = input.data();
    let k = kernel.data();
    let mut out = vec![0.0; g.n * g.oh * g.ow * cout];
    for n in 0..g.n {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let o_base = ((n * g.oh + oy) * g.ow + ox) * cout;
                let acc = &mut out[o_base..o_base + cout];
                for ky in 0..g.kh {
                    let Some(iy) = g.row(oy, ky) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.col(ox, kx) else { continue };
                        let i_base = ((n * g.h + iy) * g.w + ix) * cin;
                        let k_base = (ky * g.kw + kx) * cin * cout;
                        for ci in 0..cin {
                            let xv = x[i_base + ci];
                            let krow = &k[k_base + ci * cout..k_base + (ci + 1) * cout];
                            for (a, &kv) in acc.iter_mut().zip(krow) {
                                *a += xv * kv;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![g.n, g.oh, g.ow, cout], out))
}

/// Gradients of [`conv2d`] with respect to its input and kernel.
pub fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    stride: usize,
    padding: Padding,
    grad_out: &Tensor,
) -> Result<(Vec<Scalar>, Vec<Scalar>)> {
    let ks = kernel.shape();
    let g = Geometry::new("conv2d_backward", input.shape(), ks[0], ks[1], stride, padding)?;
    let (cin, cout) = (ks[2], ks[3]);
    let x = input.data();
    let k = kernel.data();
    let go = grad_out.data();
    let mut gx = vec![0.0; x.len()];
    let mut gk = vec![0.0; k.len()];
    for n in 0..g.n {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let o_base = ((n * g.oh + oy) * g.ow + ox) * cout;
                let grow = &go[o_base..o_base + cout];
                for ky in 0..g.kh {
                    let Some(iy) = g.row(oy, ky) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.col(ox, kx) else { continue };
                        let i_base = ((n * g.h + iy) * g.w + ix) * cin;
                        let k_base = (ky * g.kw + kx) * cin * cout;
                        for ci in 0..cin {
                            let xv = x[i_base + ci];
                            let kr = k_base + ci * cout;
                            let mut dx = 0.0;
                            for co in 0..cout {
                                dx += k[kr + co] * grow[co];
                                gk[kr + co] += xv * grow[co];
                            }
                            gx[i_base + ci] += dx;
                        }
                    }
                }
            }
        }
    }
    Ok((gx, gk))
}

/// Per-channel spatial convolution. `kernel` is `[kh,kw,C]`.
pub fn depthwise_conv2d(input: &Tensor, kernel: &Tensor, stride: usize, padding: Padding) -> Result<Tensor> {
    let ks = kernel.shape();
    if ks.len() != 3 {
        return shape_err("depthwise_conv2d", format!("kernel must be rank 3, got {ks:?}"));
    }
    let g = Geometry::new("depthwise_conv2d", input.shape(), ks[0], ks[1], stride, padding)?;
    let c = ks[2];
    if input.shape()[3] != c {
        return shape_err(
            "depthwise_conv2d",
            format!("input has {} channels, kernel has {c}", input.shape()[3]),
        );
    }
    let x = input.data();
    let k = kernel.data();
    let mut out = vec![0.0; g.n * g.oh * g.ow * c];
    for n in 0..g.n {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let o_base = ((n * g.oh + oy) * g.ow + ox) * c;
                for ky in 0..g.kh {
                    let Some(iy) = g.row(oy, ky) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.col(ox, kx) else { continue };
                        let i_base = ((n * g.h + iy) * g.w + ix) * c;
                        let k_base = (ky * g.kw + kx) * c;
                        for ch in 0..c {
                            out[o_base + ch] += x[i_base + ch] * k[k_base + ch];
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![g.n, g.oh, g.ow, c], out))
}

pub fn depthwise_conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    stride: usize,
    padding: Padding,
    grad_out: &Tensor,
) -> Result<(Vec<Scalar>, Vec<Scalar>)> {
    let ks = kernel.shape();
    let g = Geometry::new(
        "depthwise_conv2d_backward",
        input.shape(),
        ks[0],
        ks[1],
        stride,
        padding,
    )?;
    let c = ks[2];
    let x = input.data();
    let k = kernel.data();
    let go = grad_out.data();
    let mut gx = vec![0.0; x.len()];
    let mut gk = vec![0.0; k.len()];
    for n in 0..g.n {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let o_base = ((n * g.oh + oy) * g.ow + ox) * c;
                for ky in 0..g.kh {
                    let Some(iy) = g.row(oy, ky) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.col(ox, kx) else { continue };
                        let i_base = ((n * g.h + iy) * g.w + ix) * c;
                        let k_base = (ky * g.kw + kx) * c;
                        for ch in 0..c {
                            let gv = go[o_base + ch];
                            gx[i_base + ch] += k[k_base + ch] * gv;
                            gk[k_base + ch] += x[i_base + ch] * gv;
                        }
                    }
                }
            }
        }
    }
    Ok((gx, gk))
}

/// Per-pixel matrix multiply over the trailing axis. `kernel` is `[Cin,Cout]`.
///
/// Works for any input rank, so a `[N,Cin]` input makes this a dense layer.
pub fn pointwise_conv2d(input: &Tensor, kernel: &Tensor) -> Result<Tensor> {
    let ks = kernel.shape();
    if ks.len() != 2 {
        return shape_err("pointwise_conv2d", format!("kernel must be rank 2, got {ks:?}"));
    }
    let (cin, cout) = (ks[0], ks[1]);
    let in_c = *input.shape().last().unwrap();
    if in_c != cin {
        return shape_err(
            "pointwise_conv2d",
            format!("input has {in_c} channels, kernel expects {cin}"),
        );
    }
    let k = kernel.data();
    let pixels = input.len() / cin;
    let mut out = vec![0.0; pixels * cout];
    for (px, orow) in input.data().chunks_exact(cin).zip(out.chunks_exact_mut(cout)) {
        for (ci, &xv) in px.iter().enumerate() {
            let krow = &k[ci * cout..(ci + 1) * cout];
            for (a, &kv) in orow.iter_mut().zip(krow) {
                *a += xv * kv;
            }
        }
    }
    let mut shape = input.shape().to_vec();
    *shape.last_mut().unwrap() = cout;
    Ok(Tensor::from_parts(shape, out))
}

pub fn pointwise_conv2d_backward(input: &Tensor, kernel: &Tensor, grad_out: &Tensor) -> (Vec<Scalar>, Vec<Scalar>) {
    let ks = kernel.shape();
    let (cin, cout) = (ks[0], ks[1]);
    let k = kernel.data();
    let mut gx = vec![0.0; input.len()];
    let mut gk = vec![0.0; k.len()];
    for ((px, grow), gxrow) in input
        .data()
        .chunks_exact(cin)
        .zip(grad_out.data().chunks_exact(cout))
        .zip(gx.chunks_exact_mut(cin))
    {
        for ci in 0..cin {
            let xv = px[ci];
            let kr = ci * cout;
            let mut dx = 0.0;
            for co in 0..cout {
                dx += k[kr + co] * grow[co];
                gk[kr + co] += xv * grow[co];
            }
            gxrow[ci] = dx;
        }
    }
    (gx, gk)
}

/// Max or average over each `kh x kw` patch. Padded taps are ignored for both kinds.
pub fn pool2d(
    input: &Tensor,
    kind: PoolKind,
    kernel: (usize, usize),
    stride: usize,
    padding: Padding,
) -> Result<Tensor> {
    let g = Geometry::new("pool2d", input.shape(), kernel.0, kernel.1, stride, padding)?;
    let c = input.shape()[3];
    let x = input.data();
    let mut out = vec![0.0; g.n * g.oh * g.ow * c];
    for n in 0..g.n {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let o_base = ((n * g.oh + oy) * g.ow + ox) * c;
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut sum = 0.0;
                    let mut count = 0usize;
                    for ky in 0..g.kh {
                        let Some(iy) = g.row(oy, ky) else { continue };
                        for kx in 0..g.kw {
                            let Some(ix) = g.col(ox, kx) else { continue };
                            let v = x[((n * g.h + iy) * g.w + ix) * c + ch];
                            best = best.max(v);
                            sum += v;
                            count += 1;
                        }
                    }
                    out[o_base + ch] = match kind {
                        PoolKind::Max => best,
                        PoolKind::Average => sum / count as f64,
                    };
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![g.n, g.oh, g.ow, c], out))
}

/// Max pooling routes the gradient to the first maximal tap of each patch.
pub fn pool2d_backward(
    input: &Tensor,
    kind: PoolKind,
    kernel: (usize, usize),
    stride: usize,
    padding: Padding,
    grad_out: &Tensor,
) -> Result<Vec<Scalar>> {
    let g = Geometry::new("pool2d_backward", input.shape(), kernel.0, kernel.1, stride, padding)?;
    let c = input.shape()[3];
    let x = input.data();
    let go = grad_out.data();
    let mut gx = vec![0.0; x.len()];
    let mut taps = Vec::with_capacity(g.kh * g.kw);
    for n in 0..g.n {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let o_base = ((n * g.oh + oy) * g.ow + ox) * c;
                taps.clear();
                for ky in 0..g.kh {
                    let Some(iy) = g.row(oy, ky) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.col(ox, kx) else { continue };
                        taps.push(((n * g.h + iy) * g.w + ix) * c);
                    }
                }
                for ch in 0..c {
                    let gv = go[o_base + ch];
                    match kind {
                        PoolKind::Max => {
                            let mut arg = taps[0] + ch;
                            for &t in &taps[1..] {
                                if x[t + ch] > x[arg] {
                                    arg = t + ch;
                                }
                            }
                            gx[arg] += gv;
                        }
                        PoolKind::Average => {
                            let share = gv / taps.len() as f64;
                            for &t in &taps {
                                gx[t + ch] += share;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(gx)
}

/// Mean over the spatial axes: `[N,H,W,C] -> [N,C]`.
pub fn global_average_pool(input: &Tensor) -> Result<Tensor> {
    let s = input.shape();
    if s.len() != 4 {
        return shape_err("global_average_pool", format!("expected rank 4, got {s:?}"));
    }
    let (n, hw, c) = (s[0], s[1] * s[2], s[3]);
    let mut out = vec![0.0; n * c];
    for (img, orow) in input.data().chunks_exact(hw * c).zip(out.chunks_exact_mut(c)) {
        for px in img.chunks_exact(c) {
            orow.iter_mut().zip(px).for_each(|(a, &v)| *a += v);
        }
        orow.iter_mut().for_each(|a| *a /= hw as f64);
    }
    Ok(Tensor::from_parts(vec![n, c], out))
}

pub fn global_average_pool_backward(input_shape: &[usize], grad_out: &Tensor) -> Vec<Scalar> {
    let (hw, c) = (input_shape[1] * input_shape[2], input_shape[3]);
    let mut gx = Vec::with_capacity(input_shape.iter().product());
    for grow in grad_out.data().chunks_exact(c) {
        for _ in 0..hw {
            gx.extend(grow.iter().map(|&g| g / hw as f64));
        }
    }
    gx
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchNormConfig {
    pub epsilon: Scalar,
    /// Weight on the old running value in the exponential moving average.
    pub momentum: Scalar,
}

impl Default for BatchNormConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            momentum: 0.99,
        }
    }
}

/// Per-channel running mean and variance used in inference mode.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<Scalar>,
    pub var: Vec<Scalar>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }
}

/// Forward result of [`batch_norm`], with what the backward pass needs.
#[derive(Debug, Clone)]
pub struct BatchNormOutput {
    pub output: Tensor,
    pub normalized: Vec<Scalar>,
    pub inv_std: Vec<Scalar>,
    pub batch_mean: Vec<Scalar>,
    pub batch_var: Vec<Scalar>,
}

/// Normalizes over every axis but the trailing channel axis.
///
/// Train mode uses the biased batch statistics and folds them into `stats`;
/// infer mode reads `stats` only.
pub fn batch_norm(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    stats: &mut RunningStats,
    mode: Mode,
    config: BatchNormConfig,
) -> Result<BatchNormOutput> {
    let c = *input.shape().last().unwrap();
    if gamma.len() != c || beta.len() != c || stats.mean.len() != c || stats.var.len() != c {
        return shape_err(
            "batch_norm",
            format!("input has {c} channels; gamma {}, beta {}", gamma.len(), beta.len()),
        );
    }
    let m = input.len() / c;
    let x = input.data();
    let (mean, var) = match mode {
        Mode::Train => {
            if m == 0 {
                return shape_err("batch_norm", "zero batch in train mode");
            }
            let mut mean = vec![0.0; c];
            for px in x.chunks_exact(c) {
                mean.iter_mut().zip(px).for_each(|(a, &v)| *a += v);
            }
            mean.iter_mut().for_each(|a| *a /= m as f64);
            let mut var = vec![0.0; c];
            for px in x.chunks_exact(c) {
                for ch in 0..c {
                    let d = px[ch] - mean[ch];
                    var[ch] += d * d;
                }
            }
            var.iter_mut().for_each(|a| *a /= m as f64);
            for ch in 0..c {
                stats.mean[ch] = config.momentum * stats.mean[ch] + (1.0 - config.momentum) * mean[ch];
                stats.var[ch] = config.momentum * stats.var[ch] + (1.0 - config.momentum) * var[ch];
            }
            (mean, var)
        }
        Mode::Infer => (stats.mean.clone(), stats.var.clone()),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + config.epsilon).sqrt()).collect();
    let (gm, bt) = (gamma.data(), beta.data());
    let mut normalized = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for ((px, nrow), orow) in x
        .chunks_exact(c)
        .zip(normalized.chunks_exact_mut(c))
        .zip(out.chunks_exact_mut(c))
    {
        for ch in 0..c {
            let xh = (px[ch] - mean[ch]) * inv_std[ch];
            nrow[ch] = xh;
            orow[ch] = gm[ch] * xh + bt[ch];
        }
    }
    Ok(BatchNormOutput {
        output: Tensor::from_parts(input.shape().to_vec(), out),
        normalized,
        inv_std,
        batch_mean: mean,
        batch_var: var,
    })
}

/// Returns `(d input, d gamma, d beta)`.
pub fn batch_norm_backward(
    gamma: &Tensor,
    normalized: &[Scalar],
    inv_std: &[Scalar],
    mode: Mode,
    grad_out: &Tensor,
) -> (Vec<Scalar>, Vec<Scalar>, Vec<Scalar>) {
    let c = gamma.len();
    let m = normalized.len() / c;
    let gm = gamma.data();
    let go = grad_out.data();
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for (grow, nrow) in go.chunks_exact(c).zip(normalized.chunks_exact(c)) {
        for ch in 0..c {
            dgamma[ch] += grow[ch] * nrow[ch];
            dbeta[ch] += grow[ch];
        }
    }
    let mut dx = vec![0.0; go.len()];
    match mode {
        Mode::Infer => {
            for (grow, drow) in go.chunks_exact(c).zip(dx.chunks_exact_mut(c)) {
                for ch in 0..c {
                    drow[ch] = grow[ch] * gm[ch] * inv_std[ch];
                }
            }
        }
        Mode::Train => {
            // dxhat = g * gamma; sum(dxhat) = gamma * dbeta; sum(dxhat * xhat) = gamma * dgamma
            let mf = m as f64;
            for ((grow, nrow), drow) in go
                .chunks_exact(c)
                .zip(normalized.chunks_exact(c))
                .zip(dx.chunks_exact_mut(c))
            {
                for ch in 0..c {
                    let dxhat = grow[ch] * gm[ch];
                    drow[ch] = inv_std[ch] / mf * (mf * dxhat - gm[ch] * dbeta[ch] - nrow[ch] * gm[ch] * dgamma[ch]);
                }
            }
        }
    }
    (dx, dgamma, dbeta)
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|x| x.max(0.0))
}

pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Vec<Scalar> {
    input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect()
}

pub fn relu6(input: &Tensor) -> Tensor {
    input.map(|x| x.clamp(0.0, 6.0))
}

pub fn relu6_backward(input: &Tensor, grad_out: &Tensor) -> Vec<Scalar> {
    input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 && x < 6.0 { g } else { 0.0 })
        .collect()
}

/// Row-wise softmax of a `[N,K]` tensor, max-shifted for stability.
pub fn softmax(input: &Tensor) -> Result<Tensor> {
    let s = input.shape();
    if s.len() != 2 {
        return shape_err("softmax", format!("expected [N,K], got {s:?}"));
    }
    let k = s[1];
    let mut out = Vec::with_capacity(input.len());
    for row in input.data().chunks_exact(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        let mut sum = 0.0;
        for &v in row {
            let e = (v - max).exp();
            sum += e;
            out.push(e);
        }
        out[start..].iter_mut().for_each(|e| *e /= sum);
    }
    Ok(Tensor::from_parts(s.to_vec(), out))
}

/// Backward of softmax given its output `probs`.
pub fn softmax_backward(probs: &Tensor, grad_out: &Tensor) -> Vec<Scalar> {
    let k = probs.shape()[1];
    let mut gx = Vec::with_capacity(probs.len());
    for (prow, grow) in probs.data().chunks_exact(k).zip(grad_out.data().chunks_exact(k)) {
        let dot: f64 = prow.iter().zip(grow).map(|(p, g)| p * g).sum();
        gx.extend(prow.iter().zip(grow).map(|(p, g)| p * (g - dot)));
    }
    gx
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return shape_err("add", format!("{:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(Tensor::from_parts(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect(),
    ))
}

pub fn scale(a: &Tensor, factor: Scalar) -> Tensor {
    a.map(|x| x * factor)
}

/// Adds a `[C]` bias along the trailing axis.
pub fn bias_add(input: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let c = *input.shape().last().unwrap();
    if bias.len() != c {
        return shape_err("bias_add", format!("{c} channels, bias of {}", bias.len()));
    }
    let b = bias.data();
    let mut out = input.data().to_vec();
    for px in out.chunks_exact_mut(c) {
        px.iter_mut().zip(b).for_each(|(x, &bv)| *x += bv);
    }
    Ok(Tensor::from_parts(input.shape().to_vec(), out))
}

pub fn bias_add_backward(channels: usize, grad_out: &Tensor) -> Vec<Scalar> {
    let mut gb = vec![0.0; channels];
    for px in grad_out.data().chunks_exact(channels) {
        gb.iter_mut().zip(px).for_each(|(a, &g)| *a += g);
    }
    gb
}

/// Concatenates along the trailing axis; all leading extents must match.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let Some(first) = parts.first() else {
        return shape_err("concat_channels", "no inputs");
    };
    let lead = &first.shape()[..first.rank() - 1];
    let mut widths = Vec::with_capacity(parts.len());
    for p in parts {
        if &p.shape()[..p.rank().saturating_sub(1)] != lead || p.rank() != first.rank() {
            return shape_err("concat_channels", format!("{:?} vs {:?}", first.shape(), p.shape()));
        }
        widths.push(*p.shape().last().unwrap());
    }
    let total: usize = widths.iter().sum();
    let pixels: usize = lead.iter().product();
    let mut out = Vec::with_capacity(pixels * total);
    for px in 0..pixels {
        for (p, &w) in parts.iter().zip(&widths) {
            out.extend_from_slice(&p.data()[px * w..(px + 1) * w]);
        }
    }
    let mut shape = lead.to_vec();
    shape.push(total);
    Ok(Tensor::from_parts(shape, out))
}

/// Splits a gradient of concatenated channels back into per-part gradients.
pub fn concat_channels_backward(widths: &[usize], grad_out: &Tensor) -> Vec<Vec<Scalar>> {
    let total: usize = widths.iter().sum();
    let pixels = grad_out.len() / total;
    let mut parts: Vec<Vec<Scalar>> = widths.iter().map(|&w| Vec::with_capacity(w * pixels)).collect();
    for px in grad_out.data().chunks_exact(total) {
        let mut off = 0;
        for (part, &w) in parts.iter_mut().zip(widths) {
            part.extend_from_slice(&px[off..off + w]);
            off += w;
        }
    }
    parts
}
