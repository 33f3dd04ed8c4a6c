//! Deformable 2D convolution with externally supplied offsets.
//!
//! Sampling positions are the regular dilated grid plus the per-location
//! fractional offsets; values are read with bilinear interpolation under a
//! zero-padding convention. Offsets carry no gradient; backward produces
//! gradients for the input, the weights, and the bias only. Accumulation is
//! in f64 with a fixed (input-channel, then tap) summation order, so results
//! are bit-reproducible.

use crate::camera::Pixel;
use crate::error::{Error, Result};
use crate::grid::ConvSpec;
use crate::offset::OffsetField;
use crate::tensor::Tensor;

/// Bilinear read from a `height x width` plane at fractional (row, col).
/// Neighbors outside the image contribute zero.
#[inline]
fn bilinear_plane(plane: &[f64], height: usize, width: usize, row: f64, col: f64) -> f64 {
    let r0 = row.floor();
    let c0 = col.floor();
    let dr = row - r0;
    let dc = col - c0;
    let r0 = r0 as i64;
    let c0 = c0 as i64;

    let fetch = |r: i64, c: i64| -> f64 {
        if r < 0 || c < 0 || r >= height as i64 || c >= width as i64 {
            0.0
        } else {
            plane[r as usize * width + c as usize]
        }
    };

    (1.0 - dr) * (1.0 - dc) * fetch(r0, c0)
        + (1.0 - dr) * dc * fetch(r0, c0 + 1)
        + dr * (1.0 - dc) * fetch(r0 + 1, c0)
        + dr * dc * fetch(r0 + 1, c0 + 1)
}

/// Bilinear sample of one channel of a rank-3 tensor at pixel `q`
/// (`q.u` = column, `q.v` = row). Out-of-bounds regions read as zero.
pub fn bilinear_sample(x: &Tensor, channel: usize, q: Pixel) -> f64 {
    let (h, w) = (x.shape()[1], x.shape()[2]);
    bilinear_plane(x.channel(channel), h, w, q.v, q.u)
}

fn check_shapes(
    x: &Tensor,
    weights: &Tensor,
    bias: &[f64],
    offsets: &OffsetField,
    spec: &ConvSpec,
) -> Result<(usize, usize, usize, usize, usize)> {
    if x.rank() != 3 {
        return Err(Error::shape(format!(
            "input must be channels x height x width, got rank {}",
            x.rank()
        )));
    }
    if weights.rank() != 4 {
        return Err(Error::shape(format!(
            "weights must be c_out x c_in x N x N, got rank {}",
            weights.rank()
        )));
    }
    let (c_in, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let n = spec.kernel_size;
    if weights.shape()[1] != c_in || weights.shape()[2] != n || weights.shape()[3] != n {
        return Err(Error::shape(format!(
            "weights {:?} incompatible with {c_in} input channels and kernel {n}",
            weights.shape()
        )));
    }
    let c_out = weights.shape()[0];
    if bias.len() != c_out {
        return Err(Error::shape(format!(
            "bias length {} but {c_out} output channels",
            bias.len()
        )));
    }
    offsets.check_spec(spec)?;
    let (h1, w1) = spec.output_dims(h, w)?;
    if offsets.height() != h1 || offsets.width() != w1 {
        return Err(Error::shape(format!(
            "offset field is {}x{} but the output is {h1}x{w1}",
            offsets.height(),
            offsets.width()
        )));
    }
    Ok((c_in, c_out, h1, w1, n))
}

/// Deformable convolution forward pass.
///
/// `y(c, p) = bias(c) + sum_ci sum_n w(c, ci, n) * x_ci(p + p_n + dp_n)`
/// with bilinear reads at the fractional positions. With an all-zero offset
/// field this is exactly a standard zero-padded dilated convolution.
pub fn forward(
    x: &Tensor,
    weights: &Tensor,
    bias: &[f64],
    offsets: &OffsetField,
    spec: &ConvSpec,
) -> Result<Tensor> {
    let (c_in, c_out, h1, w1, n) = check_shapes(x, weights, bias, offsets, spec)?;
    let (h, w) = (x.shape()[1], x.shape()[2]);
    let grid = spec.regular_grid();

    let mut out = Tensor::zeros(vec![c_out, h1, w1])?;
    for c in 0..c_out {
        for i in 0..h1 {
            for j in 0..w1 {
                let (cr, cc) = spec.window_center(i, j);
                let mut acc = bias[c];
                for ci in 0..c_in {
                    let plane = x.channel(ci);
                    for (tap, &(dr, dc)) in grid.iter().enumerate() {
                        let row = (cr + dr) as f64 + offsets.row_offset(tap, i, j);
                        let col = (cc + dc) as f64 + offsets.col_offset(tap, i, j);
                        let wv = weights.at4(c, ci, tap / n, tap % n);
                        acc += wv * bilinear_plane(plane, h, w, row, col);
                    }
                }
                out.set3(c, i, j, acc);
            }
        }
    }
    Ok(out)
}

/// Gradients of a scalar loss with respect to input, weights, and bias,
/// given `grad_out = dL/dy`. No gradient is produced for the offsets.
pub fn backward(
    x: &Tensor,
    weights: &Tensor,
    offsets: &OffsetField,
    spec: &ConvSpec,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Vec<f64>)> {
    let c_out = weights.shape()[0];
    let bias_probe = vec![0.0; c_out];
    let (c_in, c_out, h1, w1, n) = check_shapes(x, weights, &bias_probe, offsets, spec)?;
    if grad_out.rank() != 3
        || grad_out.shape() != [c_out, h1, w1]
    {
        return Err(Error::shape(format!(
            "grad_out shape {:?} but forward output is [{c_out}, {h1}, {w1}]",
            grad_out.shape()
        )));
    }
    let (h, w) = (x.shape()[1], x.shape()[2]);
    let grid = spec.regular_grid();

    let mut grad_x = Tensor::zeros(vec![c_in, h, w])?;
    let mut grad_w = Tensor::zeros(weights.shape().to_vec())?;
    let mut grad_b = vec![0.0; c_out];

    for c in 0..c_out {
        for i in 0..h1 {
            for j in 0..w1 {
                let g = grad_out.at3(c, i, j);
                grad_b[c] += g;
                if g == 0.0 {
                    continue;
                }
                let (cr, cc) = spec.window_center(i, j);
                for ci in 0..c_in {
                    let plane = x.channel(ci);
                    for (tap, &(dr, dc)) in grid.iter().enumerate() {
                        let row = (cr + dr) as f64 + offsets.row_offset(tap, i, j);
                        let col = (cc + dc) as f64 + offsets.col_offset(tap, i, j);

                        // d y / d w = sampled input value
                        let sampled = bilinear_plane(plane, h, w, row, col);
                        let widx = ((c * c_in + ci) * n + tap / n) * n + tap % n;
                        grad_w.data_mut()[widx] += g * sampled;

                        // d y / d x scatters through the four bilinear corners
                        let wv = weights.at4(c, ci, tap / n, tap % n);
                        if wv == 0.0 {
                            continue;
                        }
                        let r0f = row.floor();
                        let c0f = col.floor();
                        let fr = row - r0f;
                        let fc = col - c0f;
                        let r0 = r0f as i64;
                        let c0 = c0f as i64;
                        let corners = [
                            (r0, c0, (1.0 - fr) * (1.0 - fc)),
                            (r0, c0 + 1, (1.0 - fr) * fc),
                            (r0 + 1, c0, fr * (1.0 - fc)),
                            (r0 + 1, c0 + 1, fr * fc),
                        ];
                        for (r, cl, weight) in corners {
                            if r >= 0 && cl >= 0 && r < h as i64 && cl < w as i64 {
                                let xidx = (ci * h + r as usize) * w + cl as usize;
                                grad_x.data_mut()[xidx] += g * wv * weight;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((grad_x, grad_w, grad_b))
}
