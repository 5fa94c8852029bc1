//! Forward and backward kernels for every supported layer type.
//!
//! Kernels are free functions over [`Tensor`]s and flat parameter slices;
//! [`crate::nn::Network`] wires them together and owns the parameters.

use rand::Rng;

use super::activation::{normalize, normalize_backward, sigmoid, softmax, softmax_backward};
use super::tensor::{Shape, Tensor};
use crate::error::{Error, Result};

/// `C = A * B + beta * C` for row-major matrices, optionally reading `A` or
/// `B` transposed. `A` is `m x k` (stored `k x m` when `a_t`), `B` is `k x n`
/// (stored `n x k` when `b_t`).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices hold exactly m*k, k*n and m*n elements and the
    // strides above address only those ranges.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

// ---------------------------------------------------------------------------
// 3x3 convolution, stride 1, padding 1

fn im2col(x: &[f64], c: usize, h: usize, w: usize, cols: &mut [f64]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    let out = &mut row[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        out.fill(0.0);
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            out[0] = 0.0;
                            out[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => out.copy_from_slice(src),
                        _ => {
                            out[..w - 1].copy_from_slice(&src[1..]);
                            out[w - 1] = 0.0;
                        }
                    }
                }
            }
        }
    }
}

fn col2im(cols: &[f64], c: usize, h: usize, w: usize, x: &mut [f64]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &mut x[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let g = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => dst[..w - 1]
                            .iter_mut()
                            .zip(&g[1..])
                            .for_each(|(d, v)| *d += v),
                        1 => dst.iter_mut().zip(g).for_each(|(d, v)| *d += v),
                        _ => dst[1..]
                            .iter_mut()
                            .zip(&g[..w - 1])
                            .for_each(|(d, v)| *d += v),
                    }
                }
            }
        }
    }
}

/// Column buffers kept from the forward pass, one `(9*C_in) x (H*W)` matrix per sample.
#[derive(Debug, Clone)]
pub struct ConvCache {
    input_shape: Shape,
    cols: Vec<f64>,
}

/// `weights` has shape `(c_out, c_in, 3, 3)`, `bias` has `c_out` entries.
pub fn conv3x3_forward(
    x: &Tensor,
    weights: &[f64],
    bias: &[f64],
) -> Result<(Tensor, ConvCache)> {
    let s = x.shape();
    let c_out = bias.len();
    if s.h == 0 || s.w == 0 {
        return Err(Error::shape(format!("conv input {s} is empty")));
    }
    if weights.len() != c_out * s.c * 9 {
        return Err(Error::shape(format!(
            "conv weights of length {} do not match {} outputs x {} input channels x 3 x 3",
            weights.len(),
            c_out,
            s.c
        )));
    }
    let hw = s.plane();
    let k = s.c * 9;
    let mut cols = vec![0.0; s.n * k * hw];
    let out_shape = Shape::new(s.n, c_out, s.h, s.w);
    let mut out = Tensor::zeros(out_shape);
    for n in 0..s.n {
        let col = &mut cols[n * k * hw..(n + 1) * k * hw];
        im2col(x.sample(n), s.c, s.h, s.w, col);
        let y = out.sample_mut(n);
        for (co, &b) in bias.iter().enumerate() {
            y[co * hw..(co + 1) * hw].fill(b);
        }
        gemm(c_out, k, hw, weights, false, col, false, 1.0, y);
    }
    Ok((
        out,
        ConvCache {
            input_shape: s,
            cols,
        },
    ))
}

/// Returns the input gradient; accumulates into `grad_w` and `grad_b`.
pub fn conv3x3_backward(
    cache: &ConvCache,
    weights: &[f64],
    grad_out: &Tensor,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Result<Tensor> {
    let s = cache.input_shape;
    let c_out = grad_b.len();
    let hw = s.plane();
    let k = s.c * 9;
    if grad_out.shape() != Shape::new(s.n, c_out, s.h, s.w) {
        return Err(Error::shape(format!(
            "conv gradient {} does not match output of input {s}",
            grad_out.shape()
        )));
    }
    let mut grad_x = Tensor::zeros(s);
    let mut grad_cols = vec![0.0; k * hw];
    for n in 0..s.n {
        let g = grad_out.sample(n);
        let col = &cache.cols[n * k * hw..(n + 1) * k * hw];
        gemm(c_out, hw, k, g, false, col, true, 1.0, grad_w);
        for (co, gb) in grad_b.iter_mut().enumerate() {
            *gb += g[co * hw..(co + 1) * hw].iter().sum::<f64>();
        }
        gemm(k, c_out, hw, weights, true, g, false, 0.0, &mut grad_cols);
        col2im(&grad_cols, s.c, s.h, s.w, grad_x.sample_mut(n));
    }
    Ok(grad_x)
}

// ---------------------------------------------------------------------------
// ReLU

pub fn relu_forward(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    y
}

/// Gradient flows where the input was strictly positive.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    g.data_mut()
        .iter_mut()
        .zip(x.data())
        .for_each(|(g, &v)| {
            if v <= 0.0 {
                *g = 0.0
            }
        });
    g
}

// ---------------------------------------------------------------------------
// Max pooling (2x2, stride 2) and pyramid pooling

/// Input positions (flat indices into the input tensor) that won each output.
#[derive(Debug, Clone)]
pub struct ArgmaxCache {
    input_shape: Shape,
    argmax: Vec<usize>,
}

fn scatter_argmax(cache: &ArgmaxCache, grad_out: &Tensor) -> Result<Tensor> {
    if grad_out.len() != cache.argmax.len() {
        return Err(Error::shape(format!(
            "pooling gradient has {} entries, expected {}",
            grad_out.len(),
            cache.argmax.len()
        )));
    }
    let mut g = Tensor::zeros(cache.input_shape);
    let gd = g.data_mut();
    for (&i, &v) in cache.argmax.iter().zip(grad_out.data()) {
        gd[i] += v;
    }
    Ok(g)
}

/// Trailing odd rows/columns are dropped; ties go to the lowest input index.
pub fn maxpool2x2_forward(x: &Tensor) -> Result<(Tensor, ArgmaxCache)> {
    let s = x.shape();
    if s.h < 2 || s.w < 2 {
        return Err(Error::shape(format!("max pooling needs at least 2x2, got {s}")));
    }
    let (oh, ow) = (s.h / 2, s.w / 2);
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, oh, ow));
    let mut argmax = Vec::with_capacity(out.len());
    let src = x.data();
    let dst = out.data_mut();
    let mut o = 0;
    for plane in 0..s.n * s.c {
        let base = plane * s.plane();
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * s.w + 2 * ox;
                for idx in [
                    best + 1,
                    best + s.w,
                    best + s.w + 1,
                ] {
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                dst[o] = src[best];
                argmax.push(best);
                o += 1;
            }
        }
    }
    Ok((
        out,
        ArgmaxCache {
            input_shape: s,
            argmax,
        },
    ))
}

pub fn maxpool2x2_backward(cache: &ArgmaxCache, grad_out: &Tensor) -> Result<Tensor> {
    scatter_argmax(cache, grad_out)
}

/// Boundaries of cell `i` of `n` over an axis of `len`: `[floor(i*len/n), floor((i+1)*len/n))`.
pub fn cell_bounds(i: usize, n: usize, len: usize) -> (usize, usize) {
    (i * len / n, (i + 1) * len / n)
}

/// Max pooling over a pyramid of `rows x cols` grids.
///
/// Output shape is `(N, C * sum(rows*cols), 1, 1)`, ordered by level, then
/// channel, then cell in row-major order.
pub fn pyramid_pool_forward(x: &Tensor, grids: &[(usize, usize)]) -> Result<(Tensor, ArgmaxCache)> {
    let s = x.shape();
    let max_rows = grids.iter().map(|g| g.0).max().unwrap_or(0);
    let max_cols = grids.iter().map(|g| g.1).max().unwrap_or(0);
    if grids.is_empty() || max_rows == 0 || max_cols == 0 {
        return Err(Error::InvalidLevels("empty pyramid".into()));
    }
    if s.h < max_rows || s.w < max_cols {
        return Err(Error::InputTooSmall(format!(
            "feature map {}x{} is smaller than the {}x{} grid",
            s.h, s.w, max_rows, max_cols
        )));
    }
    let cells: usize = grids.iter().map(|(r, c)| r * c).sum();
    let mut out = Tensor::zeros(Shape::new(s.n, s.c * cells, 1, 1));
    let mut argmax = Vec::with_capacity(out.len());
    let src = x.data();
    let dst = out.data_mut();
    let mut o = 0;
    for n in 0..s.n {
        for &(rows, cols) in grids {
            for c in 0..s.c {
                let base = (n * s.c + c) * s.plane();
                for r in 0..rows {
                    let (y0, y1) = cell_bounds(r, rows, s.h);
                    for q in 0..cols {
                        let (x0, x1) = cell_bounds(q, cols, s.w);
                        let mut best = base + y0 * s.w + x0;
                        for y in y0..y1 {
                            for xx in x0..x1 {
                                let idx = base + y * s.w + xx;
                                if src[idx] > src[best] {
                                    best = idx;
                                }
                            }
                        }
                        dst[o] = src[best];
                        argmax.push(best);
                        o += 1;
                    }
                }
            }
        }
    }
    Ok((
        out,
        ArgmaxCache {
            input_shape: s,
            argmax,
        },
    ))
}

pub fn pyramid_pool_backward(cache: &ArgmaxCache, grad_out: &Tensor) -> Result<Tensor> {
    scatter_argmax(cache, grad_out)
}

/// Spatial pyramid: level `l` is an `l x l` grid.
pub fn spp_grids(levels: &[usize]) -> Vec<(usize, usize)> {
    levels.iter().map(|&l| (l, l)).collect()
}

/// Temporal pyramid: level `l` is `l` full-height cells along the width.
pub fn tpp_grids(levels: &[usize]) -> Vec<(usize, usize)> {
    levels.iter().map(|&l| (1, l)).collect()
}

pub fn spp_forward(x: &Tensor, levels: &[usize]) -> Result<(Tensor, ArgmaxCache)> {
    pyramid_pool_forward(x, &spp_grids(levels))
}

pub fn tpp_forward(x: &Tensor, levels: &[usize]) -> Result<(Tensor, ArgmaxCache)> {
    pyramid_pool_forward(x, &tpp_grids(levels))
}

// ---------------------------------------------------------------------------
// Fully connected

/// `weights` is `(outputs, inputs)` row-major; the input is flattened per sample.
pub fn fully_connected_forward(x: &Tensor, weights: &[f64], bias: &[f64]) -> Result<Tensor> {
    let s = x.shape();
    let inputs = s.sample_len();
    let outputs = bias.len();
    if weights.len() != outputs * inputs {
        return Err(Error::shape(format!(
            "fully connected layer expects {} inputs, got {inputs}",
            weights.len() / outputs.max(1)
        )));
    }
    let mut out = Tensor::zeros(Shape::new(s.n, outputs, 1, 1));
    for n in 0..s.n {
        out.sample_mut(n).copy_from_slice(bias);
    }
    gemm(s.n, inputs, outputs, x.data(), false, weights, true, 1.0, out.data_mut());
    Ok(out)
}

/// Returns the gradient w.r.t. `x` (in `x`'s shape); accumulates into `grad_w` and `grad_b`.
pub fn fully_connected_backward(
    x: &Tensor,
    weights: &[f64],
    grad_out: &Tensor,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Result<Tensor> {
    let s = x.shape();
    let inputs = s.sample_len();
    let outputs = grad_b.len();
    if grad_out.len() != s.n * outputs {
        return Err(Error::shape("fully connected gradient size mismatch"));
    }
    gemm(outputs, s.n, inputs, grad_out.data(), true, x.data(), false, 1.0, grad_w);
    for n in 0..s.n {
        grad_b
            .iter_mut()
            .zip(grad_out.sample(n))
            .for_each(|(b, g)| *b += g);
    }
    let mut grad_x = Tensor::zeros(s);
    gemm(s.n, outputs, inputs, grad_out.data(), false, weights, false, 0.0, grad_x.data_mut());
    Ok(grad_x)
}

// ---------------------------------------------------------------------------
// Dropout

/// Inverted dropout: survivors are scaled by `1/(1-p)` so that evaluation is
/// the identity. Returns the output and the multiplicative mask.
pub fn dropout_forward<R: Rng + ?Sized>(x: &Tensor, p: f64, rng: &mut R) -> Result<(Tensor, Vec<f64>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "dropout probability {p} not in [0, 1)"
        )));
    }
    let keep = 1.0 / (1.0 - p);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if p > 0.0 && rng.random::<f64>() < p { 0.0 } else { keep })
        .collect();
    let mut y = x.clone();
    y.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
    Ok((y, mask))
}

pub fn dropout_backward(mask: &[f64], grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    g.data_mut().iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
    g
}

// ---------------------------------------------------------------------------
// Output activations (per sample over all features)

pub fn sigmoid_forward(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
    y
}

/// Backward given the sigmoid output `y`.
pub fn sigmoid_backward(y: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    g.data_mut()
        .iter_mut()
        .zip(y.data())
        .for_each(|(g, &s)| *g *= s * (1.0 - s));
    g
}

pub fn softmax_forward(x: &Tensor) -> Result<Tensor> {
    let mut y = x.clone();
    for n in 0..x.shape().n {
        let p = softmax(x.sample(n))?;
        y.sample_mut(n).copy_from_slice(&p);
    }
    Ok(y)
}

pub fn softmax_layer_backward(y: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for n in 0..y.shape().n {
        let d = softmax_backward(y.sample(n), grad_out.sample(n));
        g.sample_mut(n).copy_from_slice(&d);
    }
    g
}

/// Per-sample L2 normalization; returns the output and each sample's norm.
pub fn normalize_forward(x: &Tensor) -> Result<(Tensor, Vec<f64>)> {
    let mut y = x.clone();
    let mut norms = Vec::with_capacity(x.shape().n);
    for n in 0..x.shape().n {
        let (v, norm) = normalize(x.sample(n))?;
        y.sample_mut(n).copy_from_slice(&v);
        norms.push(norm);
    }
    Ok((y, norms))
}

pub fn normalize_layer_backward(y: &Tensor, norms: &[f64], grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (n, &norm) in norms.iter().enumerate() {
        let d = normalize_backward(y.sample(n), norm, grad_out.sample(n));
        g.sample_mut(n).copy_from_slice(&d);
    }
    g
}
