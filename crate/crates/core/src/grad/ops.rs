//! Forward and backward kernels. These are plain functions over tensors; the
//! tape records which ones ran and calls the matching backward kernel.

use rayon::prelude::*;

use super::{invalid, GradError, Real, Result, Tensor};

/// Probabilities are clamped to `[BCE_CLIP, 1 - BCE_CLIP]` inside the loss.
pub const BCE_CLIP: f64 = 1e-7;

/// Output spatial extent of a convolution along one axis.
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    (stride > 0 && padded >= kernel).then(|| (padded - kernel) / stride + 1)
}

#[derive(Debug, Clone, Copy)]
struct ConvGeometry {
    channels: usize,
    height: usize,
    width: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_h: usize,
    out_w: usize,
}

impl ConvGeometry {
    fn patch(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn pixels(&self) -> usize {
        self.out_h * self.out_w
    }
}

fn conv_geometry<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(usize, ConvGeometry)> {
    let [n, c, h, w] = input.dims4("conv2d")?;
    let [o, kc, kh, kw] = kernels.dims4("conv2d")?;
    if kc != c || kh != kw {
        return Err(GradError::ShapeMismatch {
            op: "conv2d",
            left: input.shape().to_vec(),
            right: kernels.shape().to_vec(),
        });
    }
    if bias.shape() != [o] {
        return Err(GradError::ShapeMismatch {
            op: "conv2d bias",
            left: kernels.shape().to_vec(),
            right: bias.shape().to_vec(),
        });
    }
    if stride == 0 {
        return Err(invalid("conv2d", "stride must be at least 1"));
    }
    let (out_h, out_w) = match (
        conv_out_dim(h, kh, stride, padding),
        conv_out_dim(w, kw, stride, padding),
    ) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(GradError::ShapeMismatch {
                op: "conv2d (kernel larger than padded input)",
                left: input.shape().to_vec(),
                right: kernels.shape().to_vec(),
            })
        }
    };
    Ok((
        n,
        ConvGeometry {
            channels: c,
            height: h,
            width: w,
            out_channels: o,
            kernel: kh,
            stride,
            padding,
            out_h,
            out_w,
        },
    ))
}

/// Unfold one sample `[C, H, W]` into a `[C*k*k, out_h*out_w]` patch matrix.
fn im2col<T: Real>(sample: &[T], g: &ConvGeometry, col: &mut [T]) {
    let pixels = g.pixels();
    let k = g.kernel;
    for ci in 0..g.channels {
        let plane = &sample[ci * g.height * g.width..(ci + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut col[row * pixels..(row + 1) * pixels];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    let line = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.height as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        *v = if ix < 0 || ix >= g.width as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Inverse of [`im2col`]: scatter-add patch gradients back onto `[C, H, W]`.
fn col2im<T: Real>(col: &[T], g: &ConvGeometry, sample: &mut [T]) {
    let pixels = g.pixels();
    let k = g.kernel;
    for ci in 0..g.channels {
        let plane = &mut sample[ci * g.height * g.width..(ci + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &col[row * pixels..(row + 1) * pixels];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        if ix >= 0 && ix < g.width as isize {
                            dst[ix as usize] = dst[ix as usize] + src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation of `input` `[N, C, H, W]` with `kernels` `[O, C, k, k]`.
pub fn conv2d<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (n, g) = conv_geometry(input, kernels, bias, stride, padding)?;
    let in_stride = g.channels * g.height * g.width;
    let out_stride = g.out_channels * g.pixels();
    let mut out = Tensor::zeros(&[n, g.out_channels, g.out_h, g.out_w]);
    if out.is_empty() {
        return Ok(out);
    }
    let weights = kernels.data();
    let b = bias.data();
    out.data_mut()
        .par_chunks_mut(out_stride)
        .zip(input.data().par_chunks(in_stride))
        .for_each_init(
            || vec![T::zero(); g.patch() * g.pixels()],
            |col, (dst, sample)| {
                im2col(sample, &g, col);
                for (o, plane) in dst.chunks_mut(g.pixels()).enumerate() {
                    plane.fill(b[o]);
                }
                T::gemm(
                    g.out_channels,
                    g.patch(),
                    g.pixels(),
                    weights,
                    (g.patch() as isize, 1),
                    col,
                    (g.pixels() as isize, 1),
                    T::one(),
                    dst,
                    g.pixels(),
                );
            },
        );
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to input, kernels and bias.
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n, g) = conv_geometry(input, kernels, bias, stride, padding)?;
    let expected = [n, g.out_channels, g.out_h, g.out_w];
    if grad_out.shape() != expected {
        return Err(GradError::ShapeMismatch {
            op: "conv2d backward",
            left: expected.to_vec(),
            right: grad_out.shape().to_vec(),
        });
    }
    let in_stride = g.channels * g.height * g.width;
    let out_stride = g.out_channels * g.pixels();
    let weights = kernels.data();
    let mut grad_input = Tensor::zeros(input.shape());

    // Per-sample kernel/bias partials, reduced below in sample order so the
    // result does not depend on thread scheduling.
    let partials: Vec<(Vec<T>, Vec<T>)> = grad_input
        .data_mut()
        .par_chunks_mut(in_stride.max(1))
        .zip(input.data().par_chunks(in_stride.max(1)))
        .zip(grad_out.data().par_chunks(out_stride.max(1)))
        .map(|((dx, sample), dy)| {
            let mut col = vec![T::zero(); g.patch() * g.pixels()];
            im2col(sample, &g, &mut col);
            let mut dw = vec![T::zero(); g.out_channels * g.patch()];
            T::gemm(
                g.out_channels,
                g.pixels(),
                g.patch(),
                dy,
                (g.pixels() as isize, 1),
                &col,
                (1, g.pixels() as isize),
                T::zero(),
                &mut dw,
                g.patch(),
            );
            let db: Vec<T> = dy
                .chunks(g.pixels())
                .map(|plane| plane.iter().copied().sum())
                .collect();
            T::gemm(
                g.patch(),
                g.out_channels,
                g.pixels(),
                weights,
                (1, g.patch() as isize),
                dy,
                (g.pixels() as isize, 1),
                T::zero(),
                &mut col,
                g.pixels(),
            );
            col2im(&col, &g, dx);
            (dw, db)
        })
        .collect();

    let mut grad_kernels = Tensor::zeros(kernels.shape());
    let mut grad_bias = Tensor::zeros(bias.shape());
    for (dw, db) in partials {
        for (a, b) in grad_kernels.data_mut().iter_mut().zip(dw) {
            *a = *a + b;
        }
        for (a, b) in grad_bias.data_mut().iter_mut().zip(db) {
            *a = *a + b;
        }
    }
    Ok((grad_input, grad_kernels, grad_bias))
}

pub fn relu<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| if x > T::zero() { x } else { T::zero() })
}

pub fn relu_backward<T: Real>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(input.shape(), data).expect("relu backward shapes agree")
}

/// 2x2 max pooling with stride 2. Returns the pooled tensor and, for every
/// output element, the flat input index that won (first maximum in scan order).
pub fn maxpool2<T: Real>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let [n, c, h, w] = input.dims4("maxpool2")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(invalid(
            "maxpool2",
            format!("spatial dims must be even, got {h}x{w}"),
        ));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    let x = input.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::from_vec(&[n, c, oh, ow], out)?, argmax))
}

pub fn maxpool2_backward<T: Real>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let mut grad = Tensor::zeros(input_shape);
    let g = grad.data_mut();
    for (&idx, &dy) in argmax.iter().zip(grad_out.data()) {
        g[idx] = g[idx] + dy;
    }
    grad
}

/// Spatial mean per channel: `[N, C, H, W] -> [N, C]`.
pub fn global_avg_pool<T: Real>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = input.dims4("global_avg_pool")?;
    let area = h * w;
    if area == 0 {
        return Err(invalid("global_avg_pool", "empty spatial extent"));
    }
    let scale = T::from_f64(area as f64);
    let data = input
        .data()
        .chunks(area)
        .map(|plane| plane.iter().copied().sum::<T>() / scale)
        .collect();
    Tensor::from_vec(&[n, c], data)
}

pub fn global_avg_pool_backward<T: Real>(input_shape: &[usize], grad_out: &Tensor<T>) -> Tensor<T> {
    let area: usize = input_shape[2..].iter().product();
    let scale = T::from_f64(area as f64);
    let mut data = Vec::with_capacity(grad_out.len() * area);
    for &g in grad_out.data() {
        data.extend(std::iter::repeat_n(g / scale, area));
    }
    Tensor::from_vec(input_shape, data).expect("gap backward shape")
}

/// Dense layer `y = x W^T + b` with `x: [B, I]`, `W: [O, I]`, `b: [O]`.
pub fn linear<T: Real>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let [batch, inner] = input.dims2("linear")?;
    let [outer, w_inner] = weights.dims2("linear")?;
    if inner != w_inner {
        return Err(GradError::ShapeMismatch {
            op: "linear",
            left: input.shape().to_vec(),
            right: weights.shape().to_vec(),
        });
    }
    if bias.shape() != [outer] {
        return Err(GradError::ShapeMismatch {
            op: "linear bias",
            left: weights.shape().to_vec(),
            right: bias.shape().to_vec(),
        });
    }
    let mut out = Vec::with_capacity(batch * outer);
    for _ in 0..batch {
        out.extend_from_slice(bias.data());
    }
    T::gemm(
        batch,
        inner,
        outer,
        input.data(),
        (inner as isize, 1),
        weights.data(),
        (1, inner as isize),
        T::one(),
        &mut out,
        outer,
    );
    Tensor::from_vec(&[batch, outer], out)
}

pub fn linear_backward<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (batch, inner) = (input.shape()[0], input.shape()[1]);
    let outer = weights.shape()[0];
    let mut dx = Tensor::zeros(input.shape());
    T::gemm(
        batch,
        outer,
        inner,
        grad_out.data(),
        (outer as isize, 1),
        weights.data(),
        (inner as isize, 1),
        T::zero(),
        dx.data_mut(),
        inner,
    );
    let mut dw = Tensor::zeros(weights.shape());
    T::gemm(
        outer,
        batch,
        inner,
        grad_out.data(),
        (1, outer as isize),
        input.data(),
        (inner as isize, 1),
        T::zero(),
        dw.data_mut(),
        inner,
    );
    let mut db = Tensor::zeros(&[outer]);
    for row in grad_out.data().chunks(outer) {
        for (a, &g) in db.data_mut().iter_mut().zip(row) {
            *a = *a + g;
        }
    }
    (dx, dw, db)
}

/// Logistic function, kept strictly inside `(0, 1)` even where the exact
/// value rounds to an endpoint.
pub fn sigmoid_scalar<T: Real>(x: T) -> T {
    let one = T::one();
    let s = if x >= T::zero() {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    };
    let upper = one - T::epsilon() / T::from_f64(2.0);
    s.max(T::min_positive_value()).min(upper)
}

pub fn sigmoid<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(sigmoid_scalar)
}

pub fn sigmoid_backward<T: Real>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&s, &g)| g * s * (T::one() - s))
        .collect();
    Tensor::from_vec(output.shape(), data).expect("sigmoid backward shapes agree")
}

fn check_bce<T: Real>(probs: &Tensor<T>, targets: &Tensor<T>) -> Result<()> {
    if probs.shape() != targets.shape() || probs.is_empty() {
        return Err(GradError::ShapeMismatch {
            op: "bce_loss",
            left: probs.shape().to_vec(),
            right: targets.shape().to_vec(),
        });
    }
    if let Some(t) = targets.data().iter().find(|&&t| t != T::zero() && t != T::one()) {
        return Err(invalid("bce_loss", format!("targets must be 0 or 1, found {t}")));
    }
    Ok(())
}

/// Mean binary cross entropy over every entry.
pub fn bce_loss<T: Real>(probs: &Tensor<T>, targets: &Tensor<T>) -> Result<T> {
    check_bce(probs, targets)?;
    let (lo, hi) = (BCE_CLIP, 1.0 - BCE_CLIP);
    let total: f64 = probs
        .data()
        .iter()
        .zip(targets.data())
        .map(|(&p, &t)| {
            let p = p.as_f64().clamp(lo, hi);
            if t == T::one() {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(T::from_f64(total / probs.len() as f64))
}

pub fn bce_backward<T: Real>(probs: &Tensor<T>, targets: &Tensor<T>, grad_out: T) -> Tensor<T> {
    let (lo, hi) = (T::from_f64(BCE_CLIP), T::from_f64(1.0 - BCE_CLIP));
    let scale = grad_out / T::from_f64(probs.len() as f64);
    let data = probs
        .data()
        .iter()
        .zip(targets.data())
        .map(|(&p, &t)| {
            if p < lo || p > hi {
                // Clamped region: the loss is flat in p.
                T::zero()
            } else {
                scale * (p - t) / (p * (T::one() - p))
            }
        })
        .collect();
    Tensor::from_vec(probs.shape(), data).expect("bce backward shapes agree")
}
