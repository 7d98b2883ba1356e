use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng::RngState;

/// A linear forward operator `H` acting on images `[C, H, W]` (or `[H, W]`).
///
/// `Identity` also accepts arbitrary shapes such as point vectors.
#[derive(Clone, Debug, PartialEq)]
pub enum DegradationOp {
    Identity,
    /// Each pixel (shared across channels) is hidden with probability `rate`.
    MaskRandom {
        rate: f64,
        seed: u64,
        height: usize,
        width: usize,
        keep: Arc<Vec<bool>>,
    },
    /// Hides the `size` rectangle whose top-left corner is `origin`.
    MaskBox {
        origin: (usize, usize),
        size: (usize, usize),
    },
    /// Circular 2-D convolution with a centered, normalized kernel `[kh, kw]`.
    ConvBlur {
        kernel: Grid,
    },
    /// Average over non-overlapping `factor x factor` blocks.
    Downsample {
        factor: usize,
    },
}

impl DegradationOp {
    /// Hides `round(rate * height * width)` pixels chosen by `seed`.
    pub fn mask_random(rate: f64, seed: u64, height: usize, width: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Domain { name: "rate", value: rate, domain: "[0, 1]" });
        }
        let n = height * width;
        let hidden = (rate * n as f64).round() as usize;
        let mut rng = RngState::new(seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut keep = vec![true; n];
        for i in 0..hidden {
            let j = i + rng.index(n - i);
            order.swap(i, j);
            keep[order[i]] = false;
        }
        Ok(DegradationOp::MaskRandom { rate, seed, height, width, keep: Arc::new(keep) })
    }

    /// A `size x size` box centered in a `height x width` image.
    pub fn mask_box_centered(size: usize, height: usize, width: usize) -> Result<Self> {
        if size > height || size > width {
            return Err(Error::Invalid(format!("box of size {size} does not fit a {height}x{width} image")));
        }
        Ok(DegradationOp::MaskBox { origin: ((height - size) / 2, (width - size) / 2), size: (size, size) })
    }

    pub fn conv_blur(kernel: Grid) -> Result<Self> {
        validate_kernel(&kernel)?;
        Ok(DegradationOp::ConvBlur { kernel })
    }

    pub fn downsample(factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Invalid("downsample factor must be at least 1".into()));
        }
        Ok(DegradationOp::Downsample { factor })
    }

    /// Whether `H` is a 0/1 diagonal operator.
    pub fn is_mask(&self) -> bool {
        matches!(self, DegradationOp::MaskRandom { .. } | DegradationOp::MaskBox { .. })
    }

    /// Shape of `Hx` for an input of shape `input`.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            DegradationOp::Identity => Ok(input.to_vec()),
            DegradationOp::Downsample { factor } => {
                let (c, h, w) = image_dims(input)?;
                if h % factor != 0 || w % factor != 0 {
                    return Err(Error::Invalid(format!("downsample factor {factor} does not divide {h}x{w}")));
                }
                Ok(with_image_dims(input, c, h / factor, w / factor))
            }
            _ => {
                self.check_image(input)?;
                Ok(input.to_vec())
            }
        }
    }

    /// Shape of `H^T u` for an observation of shape `output`.
    pub fn input_shape(&self, output: &[usize]) -> Result<Vec<usize>> {
        match self {
            DegradationOp::Identity => Ok(output.to_vec()),
            DegradationOp::Downsample { factor } => {
                let (c, h, w) = image_dims(output)?;
                Ok(with_image_dims(output, c, h * factor, w * factor))
            }
            _ => {
                self.check_image(output)?;
                Ok(output.to_vec())
            }
        }
    }

    fn check_image(&self, shape: &[usize]) -> Result<()> {
        let (_, h, w) = image_dims(shape)?;
        match self {
            DegradationOp::MaskRandom { height, width, .. } => {
                if (h, w) != (*height, *width) {
                    return Err(Error::shape(&[*height, *width], &[h, w]));
                }
            }
            DegradationOp::MaskBox { origin, size } => {
                if origin.0 + size.0 > h || origin.1 + size.1 > w {
                    return Err(Error::Invalid(format!("box {origin:?}+{size:?} exceeds a {h}x{w} image")));
                }
            }
            DegradationOp::ConvBlur { kernel } => {
                let (kh, kw) = (kernel.shape()[0], kernel.shape()[1]);
                if kh > h || kw > w {
                    return Err(Error::Invalid(format!("kernel {kh}x{kw} is larger than the {h}x{w} image")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Per-pixel keep flag for mask operators; `None` for non-masks.
    pub(crate) fn keeps(&self, h: usize, w: usize) -> Option<Vec<bool>> {
        match self {
            DegradationOp::MaskRandom { keep, .. } => Some(keep.as_ref().clone()),
            DegradationOp::MaskBox { origin, size } => Some(
                (0..h * w)
                    .map(|p| {
                        let (i, j) = (p / w, p % w);
                        !(i >= origin.0 && i < origin.0 + size.0 && j >= origin.1 && j < origin.1 + size.1)
                    })
                    .collect(),
            ),
            _ => None,
        }
    }
}

pub(crate) fn validate_kernel(kernel: &Grid) -> Result<()> {
    let shape = kernel.shape();
    if shape.len() != 2 {
        return Err(Error::Invalid(format!("blur kernel must be 2-D, got {shape:?}")));
    }
    if kernel.data().iter().any(|&v| v < 0.0) {
        return Err(Error::Invalid("blur kernel has negative entries".into()));
    }
    let total = kernel.sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Invalid(format!("blur kernel sums to {total}, expected 1")));
    }
    Ok(())
}

fn image_dims(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [h, w] => Ok((1, h, w)),
        [c, h, w] => Ok((c, h, w)),
        _ => Err(Error::Invalid(format!("operator expects an image [H, W] or [C, H, W], got {shape:?}"))),
    }
}

fn with_image_dims(like: &[usize], c: usize, h: usize, w: usize) -> Vec<usize> {
    if like.len() == 2 {
        vec![h, w]
    } else {
        vec![c, h, w]
    }
}

fn apply_mask(op: &DegradationOp, x: &Grid) -> Result<Grid> {
    let (c, h, w) = image_dims(x.shape())?;
    let keep = op.keeps(h, w).expect("mask operator");
    let mut out = x.clone();
    for plane in out.data_mut().chunks_mut(h * w).take(c) {
        for (v, &k) in plane.iter_mut().zip(&keep) {
            if !k {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

/// Circular correlation-style sum: `out[i, j] += k[a, b] * x[i + sign*(ca - a), j + sign*(cb - b)]`.
/// `sign = 1` is the convolution, `sign = -1` its adjoint.
fn circular_conv(kernel: &Grid, x: &Grid, flip: bool) -> Result<Grid> {
    let (c, h, w) = image_dims(x.shape())?;
    let (kh, kw) = (kernel.shape()[0], kernel.shape()[1]);
    let (ch, cw) = ((kh / 2) as isize, (kw / 2) as isize);
    let mut out = vec![0.0; x.len()];
    let kdata = kernel.data();
    for ch_idx in 0..c {
        let src = &x.data()[ch_idx * h * w..(ch_idx + 1) * h * w];
        let dst = &mut out[ch_idx * h * w..(ch_idx + 1) * h * w];
        for a in 0..kh {
            for b in 0..kw {
                let weight = kdata[a * kw + b];
                let (mut di, mut dj) = (ch - a as isize, cw - b as isize);
                if flip {
                    di = -di;
                    dj = -dj;
                }
                let dj = dj.rem_euclid(w as isize) as usize;
                for i in 0..h {
                    let si = (i as isize + di).rem_euclid(h as isize) as usize;
                    let src_row = &src[si * w..(si + 1) * w];
                    let dst_row = &mut dst[i * w..(i + 1) * w];
                    // columns j with j + dj < w, then the wrapped remainder
                    let split = w - dj;
                    for (d, s) in dst_row[..split].iter_mut().zip(&src_row[dj..]) {
                        *d += weight * s;
                    }
                    for (d, s) in dst_row[split..].iter_mut().zip(&src_row[..dj]) {
                        *d += weight * s;
                    }
                }
            }
        }
    }
    Ok(Grid::from_parts(out, x.shape().to_vec()))
}

fn block_average(x: &Grid, k: usize, out_shape: Vec<usize>) -> Result<Grid> {
    let (c, h, w) = image_dims(x.shape())?;
    let (oh, ow) = (h / k, w / k);
    let inv = 1.0 / (k * k) as f64;
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        for oi in 0..oh {
            for oj in 0..ow {
                let mut acc = 0.0;
                for p in 0..k {
                    let row = ch * h * w + (oi * k + p) * w + oj * k;
                    for q in 0..k {
                        acc += x.data()[row + q];
                    }
                }
                out[ch * oh * ow + oi * ow + oj] = acc * inv;
            }
        }
    }
    Ok(Grid::from_parts(out, out_shape))
}

fn block_replicate(u: &Grid, k: usize, out_shape: Vec<usize>) -> Result<Grid> {
    let (c, oh, ow) = image_dims(u.shape())?;
    let (h, w) = (oh * k, ow * k);
    let inv = 1.0 / (k * k) as f64;
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                out[ch * h * w + i * w + j] = u.data()[ch * oh * ow + (i / k) * ow + j / k] * inv;
            }
        }
    }
    Ok(Grid::from_parts(out, out_shape))
}

pub fn op_apply(op: &DegradationOp, x: &Grid) -> Result<Grid> {
    let out_shape = op.output_shape(x.shape())?;
    match op {
        DegradationOp::Identity => Ok(x.clone()),
        DegradationOp::MaskRandom { .. } | DegradationOp::MaskBox { .. } => apply_mask(op, x),
        DegradationOp::ConvBlur { kernel } => circular_conv(kernel, x, false),
        DegradationOp::Downsample { factor } => block_average(x, *factor, out_shape),
    }
}

pub fn op_adjoint(op: &DegradationOp, u: &Grid) -> Result<Grid> {
    let in_shape = op.input_shape(u.shape())?;
    match op {
        DegradationOp::Identity => Ok(u.clone()),
        DegradationOp::MaskRandom { .. } | DegradationOp::MaskBox { .. } => apply_mask(op, u),
        DegradationOp::ConvBlur { kernel } => circular_conv(kernel, u, true),
        DegradationOp::Downsample { factor } => block_replicate(u, *factor, in_shape),
    }
}
