//! Forward and backward passes of the standard blocks. Every function works
//! on a whole batch; batch-level loops run in parallel and reduce parameter
//! gradients in sample order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

fn dims4<T: Real>(x: &Tensor<T>, what: &str) -> Result<(usize, usize, usize, usize)> {
    match *x.shape() {
        [n, c, h, w] => Ok((n, c, h, w)),
        _ => Err(Error::dim(format!(
            "{what} expects [N, C, H, W], got {:?}",
            x.shape()
        ))),
    }
}

fn stack_or_empty<T: Real>(parts: Vec<Tensor<T>>, shape: &[usize]) -> Result<Tensor<T>> {
    if parts.is_empty() {
        Ok(Tensor::zeros(shape))
    } else {
        Tensor::stack(&parts)
    }
}

/// Geometry of a stride-1 convolution with zero padding.
#[derive(Clone, Copy, Debug)]
struct ConvGeom {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeom {
    /// Unrolls one `[C, H, W]` sample into `[C·K·K, Ho·Wo]`.
    fn im2col<T: Real>(&self, x: &[T]) -> Vec<T> {
        let (k, pad, ho, wo) = (self.k, self.pad as isize, self.ho, self.wo);
        let mut cols = vec![T::zero(); self.c * k * k * ho * wo];
        for c in 0..self.c {
            for u in 0..k {
                for v in 0..k {
                    let row = &mut cols[((c * k + u) * k + v) * ho * wo..][..ho * wo];
                    for r in 0..ho {
                        let sr = r as isize + u as isize - pad;
                        if sr < 0 || sr >= self.h as isize {
                            continue;
                        }
                        let src = &x[(c * self.h + sr as usize) * self.w..][..self.w];
                        for q in 0..wo {
                            let sc = q as isize + v as isize - pad;
                            if sc >= 0 && sc < self.w as isize {
                                row[r * wo + q] = src[sc as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    /// Transpose of [`ConvGeom::im2col`].
    fn col2im<T: Real>(&self, cols: &[T]) -> Vec<T> {
        let (k, pad, ho, wo) = (self.k, self.pad as isize, self.ho, self.wo);
        let mut x = vec![T::zero(); self.c * self.h * self.w];
        for c in 0..self.c {
            for u in 0..k {
                for v in 0..k {
                    let row = &cols[((c * k + u) * k + v) * ho * wo..][..ho * wo];
                    for r in 0..ho {
                        let sr = r as isize + u as isize - pad;
                        if sr < 0 || sr >= self.h as isize {
                            continue;
                        }
                        let dst = &mut x[(c * self.h + sr as usize) * self.w..][..self.w];
                        for q in 0..wo {
                            let sc = q as isize + v as isize - pad;
                            if sc >= 0 && sc < self.w as isize {
                                dst[sc as usize] += row[r * wo + q];
                            }
                        }
                    }
                }
            }
        }
        x
    }
}

fn conv_geom<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    pad: usize,
) -> Result<(usize, usize, ConvGeom)> {
    let (n, c, h, wd) = dims4(x, "conv2d")?;
    let (f, k) = match *w.shape() {
        [f, wc, k, k2] if wc == c && k == k2 => (f, k),
        _ => {
            return Err(Error::dim(format!(
                "conv2d weight must be [F, {c}, K, K], got {:?}",
                w.shape()
            )))
        }
    };
    if b.shape() != [f] {
        return Err(Error::dim(format!(
            "conv2d bias must be [{f}], got {:?}",
            b.shape()
        )));
    }
    if h + 2 * pad < k || wd + 2 * pad < k {
        return Err(Error::dim(format!(
            "{k}×{k} kernel does not fit a padded {h}×{wd} input"
        )));
    }
    let g = ConvGeom {
        c,
        h,
        w: wd,
        k,
        pad,
        ho: h + 2 * pad + 1 - k,
        wo: wd + 2 * pad + 1 - k,
    };
    Ok((n, f, g))
}

/// Stride-1 cross-correlation with zero padding: `[N, C, H, W]` to
/// `[N, F, H + 2p − K + 1, W + 2p − K + 1]`.
pub fn conv2d_forward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    pad: usize,
) -> Result<Tensor<T>> {
    let (n, f, g) = conv_geom(x, w, b, pad)?;
    let ckk = g.c * g.k * g.k;
    let plane = g.ho * g.wo;
    let ys: Vec<Tensor<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let cols = g.im2col(x.outer(i));
            let mut y = vec![T::zero(); f * plane];
            for (fi, out) in y.chunks_mut(plane).enumerate() {
                out.fill(b.data()[fi]);
                for (kk, &wv) in w.data()[fi * ckk..(fi + 1) * ckk].iter().enumerate() {
                    let src = &cols[kk * plane..(kk + 1) * plane];
                    out.iter_mut().zip(src).for_each(|(o, &s)| *o += wv * s);
                }
            }
            Tensor::new(&[f, g.ho, g.wo], y).expect("conv output shape")
        })
        .collect();
    stack_or_empty(ys, &[0, f, g.ho, g.wo])?.ensure_finite("conv2d_forward")
}

/// Gradients of [`conv2d_forward`]: `(dx, dw, db)`.
pub fn conv2d_backward<T: Real>(
    dy: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    pad: usize,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n, f, g) = conv_geom(x, w, b, pad)?;
    if dy.shape() != [n, f, g.ho, g.wo] {
        return Err(Error::dim(format!(
            "conv2d upstream gradient {:?}, expected {:?}",
            dy.shape(),
            [n, f, g.ho, g.wo]
        )));
    }
    let ckk = g.c * g.k * g.k;
    let plane = g.ho * g.wo;
    let per_sample: Vec<(Tensor<T>, Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let cols = g.im2col(x.outer(i));
            let gy = dy.outer(i);
            let mut dw = vec![0.0f64; f * ckk];
            let mut db = vec![0.0f64; f];
            let mut dcols = vec![T::zero(); ckk * plane];
            for fi in 0..f {
                let gyf = &gy[fi * plane..(fi + 1) * plane];
                db[fi] = gyf.iter().map(|v| v.as_f64()).sum();
                for kk in 0..ckk {
                    let src = &cols[kk * plane..(kk + 1) * plane];
                    dw[fi * ckk + kk] = crate::tensor::dot(gyf, src);
                    let wv = w.data()[fi * ckk + kk];
                    dcols[kk * plane..(kk + 1) * plane]
                        .iter_mut()
                        .zip(gyf)
                        .for_each(|(d, &gv)| *d += wv * gv);
                }
            }
            let dx = Tensor::new(&[g.c, g.h, g.w], g.col2im(&dcols)).expect("conv input shape");
            (dx, dw, db)
        })
        .collect();
    let mut dw = vec![0.0f64; f * ckk];
    let mut db = vec![0.0f64; f];
    let mut dxs = Vec::with_capacity(n);
    for (dx, w_, b_) in per_sample {
        dw.iter_mut().zip(&w_).for_each(|(a, b)| *a += b);
        db.iter_mut().zip(&b_).for_each(|(a, b)| *a += b);
        dxs.push(dx);
    }
    let dx = stack_or_empty(dxs, x.shape())?.ensure_finite("conv2d_backward")?;
    let dw = Tensor::new(w.shape(), dw.into_iter().map(T::cst).collect())?;
    let db = Tensor::new(b.shape(), db.into_iter().map(T::cst).collect())?;
    Ok((dx, dw, db))
}

pub fn relu_forward<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes `dy` where the forward input was positive.
pub fn relu_backward<T: Real>(dy: &Tensor<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    if dy.shape() != x.shape() {
        return Err(Error::dim("relu gradient shape mismatch"));
    }
    let data = dy
        .data()
        .iter()
        .zip(x.data())
        .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(x.shape(), data)
}

/// 2×2 max pooling with stride 2; odd trailing rows / columns are dropped.
/// Returns the pooled tensor and the flat input index of every maximum.
pub fn maxpool2_forward<T: Real>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let (n, c, h, w) = dims4(x, "maxpool2")?;
    let (ho, wo) = (h / 2, w / 2);
    let mut y = Vec::with_capacity(n * c * ho * wo);
    let mut arg = Vec::with_capacity(n * c * ho * wo);
    for p in 0..n * c {
        let base = p * h * w;
        for r in 0..ho {
            for q in 0..wo {
                let mut best = base + 2 * r * w + 2 * q;
                for (dr, dq) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * r + dr) * w + 2 * q + dq;
                    if x.data()[i] > x.data()[best] {
                        best = i;
                    }
                }
                y.push(x.data()[best]);
                arg.push(best);
            }
        }
    }
    Ok((Tensor::new(&[n, c, ho, wo], y)?, arg))
}

pub fn maxpool2_backward<T: Real>(
    dy: &Tensor<T>,
    argmax: &[usize],
    input_shape: &[usize],
) -> Result<Tensor<T>> {
    if dy.len() != argmax.len() {
        return Err(Error::dim(
            "maxpool2 gradient does not match the cached indices",
        ));
    }
    let mut dx = Tensor::zeros(input_shape);
    for (&g, &i) in dy.data().iter().zip(argmax) {
        dx.data_mut()[i] += g;
    }
    Ok(dx)
}

/// `y = x Wᵀ + b` for `x: [N, in]`, `W: [out, in]`, `b: [out]`.
pub fn linear_forward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, din, dout) = linear_dims(x, w, b)?;
    let mut y = Vec::with_capacity(n * dout);
    for i in 0..n {
        let xi = &x.data()[i * din..(i + 1) * din];
        for o in 0..dout {
            let wo = &w.data()[o * din..(o + 1) * din];
            let mut acc = b.data()[o];
            for (&a, &c) in xi.iter().zip(wo) {
                acc += a * c;
            }
            y.push(acc);
        }
    }
    Tensor::new(&[n, dout], y)?.ensure_finite("linear_forward")
}

fn linear_dims<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(usize, usize, usize)> {
    match (x.shape(), w.shape(), b.shape()) {
        (&[n, din], &[dout, wi], &[bo]) if wi == din && bo == dout => Ok((n, din, dout)),
        _ => Err(Error::dim(format!(
            "linear shapes x {:?}, W {:?}, b {:?} are incompatible",
            x.shape(),
            w.shape(),
            b.shape()
        ))),
    }
}

/// Gradients of [`linear_forward`]: `(dx, dW, db)`.
pub fn linear_backward<T: Real>(
    dy: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n, din, dout) = linear_dims(x, w, b)?;
    if dy.shape() != [n, dout] {
        return Err(Error::dim("linear upstream gradient shape mismatch"));
    }
    let mut dx = vec![T::zero(); n * din];
    let mut dw = vec![0.0f64; dout * din];
    let mut db = vec![0.0f64; dout];
    for i in 0..n {
        let xi = &x.data()[i * din..(i + 1) * din];
        let dxi = &mut dx[i * din..(i + 1) * din];
        for o in 0..dout {
            let g = dy.data()[i * dout + o];
            db[o] += g.as_f64();
            let wo = &w.data()[o * din..(o + 1) * din];
            let dwo = &mut dw[o * din..(o + 1) * din];
            for k in 0..din {
                dxi[k] += g * wo[k];
                dwo[k] += (g * xi[k]).as_f64();
            }
        }
    }
    Ok((
        Tensor::new(x.shape(), dx)?.ensure_finite("linear_backward")?,
        Tensor::new(w.shape(), dw.into_iter().map(T::cst).collect())?,
        Tensor::new(b.shape(), db.into_iter().map(T::cst).collect())?,
    ))
}

/// Mean cross-entropy of softmax(`logits`) against `labels`, the number of
/// correct argmax predictions, and the gradient with respect to the logits.
pub fn softmax_cross_entropy<T: Real>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(f64, usize, Tensor<T>)> {
    let (n, k) = match *logits.shape() {
        [n, k] if n == labels.len() => (n, k),
        _ => {
            return Err(Error::dim(format!(
                "logits {:?} do not match {} labels",
                logits.shape(),
                labels.len()
            )))
        }
    };
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::config(format!("label {bad} outside 0..{k}")));
    }
    let mut loss = 0.0;
    let mut correct = 0;
    let mut grad = Vec::with_capacity(n * k);
    for (i, &label) in labels.iter().enumerate() {
        let row: Vec<f64> = logits.data()[i * k..(i + 1) * k]
            .iter()
            .map(|v| v.as_f64())
            .collect();
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        loss += sum.ln() + max - row[label];
        if argmax(&row) == label {
            correct += 1;
        }
        for (j, v) in row.iter().enumerate() {
            let p = (v - max).exp() / sum;
            let t = if j == label { 1.0 } else { 0.0 };
            grad.push(T::cst((p - t) / n as f64));
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("softmax_cross_entropy"));
    }
    Ok((loss / n.max(1) as f64, correct, Tensor::new(&[n, k], grad)?))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}
