use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::params::GainParams;
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};
use crate::transform::{DtcwtPlan, FilterSet, Pyramid, Stencil, SUBBANDS};

/// Geometry of one `kh × kw` correlation over an `h × w` plane, with the
/// kernel centred on the output sample and zeros outside the plane.
#[derive(Clone, Copy)]
struct Window {
    kh: usize,
    kw: usize,
    h: usize,
    w: usize,
}

impl Window {
    /// For tap `(u, v)`: the shift and the output rows / columns whose
    /// shifted input stays inside the plane.
    fn tap(
        &self,
        u: usize,
        v: usize,
    ) -> Option<(isize, isize, std::ops::Range<usize>, std::ops::Range<usize>)> {
        let du = u as isize - (self.kh / 2) as isize;
        let dv = v as isize - (self.kw / 2) as isize;
        let rows = (-du).max(0) as usize..(self.h as isize - du.max(0)).max(0) as usize;
        let cols = (-dv).max(0) as usize..(self.w as isize - dv.max(0)).max(0) as usize;
        (!rows.is_empty() && !cols.is_empty()).then_some((du, dv, rows, cols))
    }
}

/// `out[p] += alpha · Σ_uv k[u, v] · inp[p + (u, v) − centre]`
fn correlate_acc<T: Real>(out: &mut [T], inp: &[T], k: &[T], win: Window, alpha: T) {
    for u in 0..win.kh {
        for v in 0..win.kw {
            let a = alpha * k[u * win.kw + v];
            if a == T::zero() {
                continue;
            }
            let Some((du, dv, rows, cols)) = win.tap(u, v) else {
                continue;
            };
            for r in rows {
                let src = ((r as isize + du) as usize) * win.w;
                let o = &mut out[r * win.w + cols.start..r * win.w + cols.end];
                let i = &inp[(src as isize + cols.start as isize + dv) as usize..][..cols.len()];
                o.iter_mut().zip(i).for_each(|(o, &i)| *o += a * i);
            }
        }
    }
}

/// Transpose of [`correlate_acc`] with respect to `inp`.
fn correlate_transpose_acc<T: Real>(din: &mut [T], dout: &[T], k: &[T], win: Window, alpha: T) {
    for u in 0..win.kh {
        for v in 0..win.kw {
            let a = alpha * k[u * win.kw + v];
            if a == T::zero() {
                continue;
            }
            let Some((du, dv, rows, cols)) = win.tap(u, v) else {
                continue;
            };
            for r in rows {
                let dst = ((r as isize + du) as usize) * win.w;
                let d =
                    &mut din[(dst as isize + cols.start as isize + dv) as usize..][..cols.len()];
                let g = &dout[r * win.w + cols.start..r * win.w + cols.end];
                d.iter_mut().zip(g).for_each(|(d, &g)| *d += a * g);
            }
        }
    }
}

/// Gradient of [`correlate_acc`] with respect to `k`, accumulated in f64.
fn correlate_kernel_grad(
    gk: &mut [f64],
    dout: &[impl Real],
    inp: &[impl Real],
    win: Window,
    alpha: f64,
) {
    for u in 0..win.kh {
        for v in 0..win.kw {
            let Some((du, dv, rows, cols)) = win.tap(u, v) else {
                continue;
            };
            let mut acc = 0.0;
            for r in rows {
                let src = ((r as isize + du) as usize) * win.w;
                let g = &dout[r * win.w + cols.start..r * win.w + cols.end];
                let i = &inp[(src as isize + cols.start as isize + dv) as usize..][..cols.len()];
                acc += g
                    .iter()
                    .zip(i)
                    .map(|(&g, &i)| g.as_f64() * i.as_f64())
                    .sum::<f64>();
            }
            gk[u * win.kw + v] += alpha * acc;
        }
    }
}

fn plane<T>(t: &[T], index: usize, size: usize) -> &[T] {
    &t[index * size..(index + 1) * size]
}

fn plane_mut<T>(t: &mut [T], index: usize, size: usize) -> &mut [T] {
    &mut t[index * size..(index + 1) * size]
}

/// `W = G ⋆ V` per scale and subband, and `g_lp ⋆ V_lp` on the lowpass.
fn mix_forward<T: Real>(v: &Pyramid<T>, p: &GainParams<T>) -> Pyramid<T> {
    let (f_out, c_in) = (p.out_channels(), p.in_channels());
    let (h, w) = v.source_shape;
    let mut out = Pyramid::zeros(f_out, h, w, v.levels);
    for (j, (vb, g)) in v.highpass.iter().zip(&p.g_hp).enumerate() {
        let s = vb.shape();
        let (kh, kw) = p.gain_size(j + 1);
        let win = Window {
            kh,
            kw,
            h: s[2],
            w: s[3],
        };
        let (n, k) = (s[2] * s[3], kh * kw);
        let ob = &mut out.highpass[j];
        for f in 0..f_out {
            for sb in 0..SUBBANDS {
                let o = f * SUBBANDS + sb;
                for c in 0..c_in {
                    let gi = (f * c_in + c) * SUBBANDS + sb;
                    let (gr, gim) = (plane(g.re.data(), gi, k), plane(g.im.data(), gi, k));
                    let i = c * SUBBANDS + sb;
                    let (vr, vi) = (plane(vb.re.data(), i, n), plane(vb.im.data(), i, n));
                    let wr = plane_mut(ob.re.data_mut(), o, n);
                    correlate_acc(wr, vr, gr, win, T::one());
                    correlate_acc(wr, vi, gim, win, -T::one());
                    let wi = plane_mut(ob.im.data_mut(), o, n);
                    correlate_acc(wi, vi, gr, win, T::one());
                    correlate_acc(wi, vr, gim, win, T::one());
                }
            }
        }
    }
    let ls = v.lowpass.shape();
    let klp = p.lowpass_size();
    let win = Window {
        kh: klp,
        kw: klp,
        h: ls[1],
        w: ls[2],
    };
    let n = ls[1] * ls[2];
    for f in 0..f_out {
        for c in 0..c_in {
            let g = plane(p.g_lp.data(), f * c_in + c, klp * klp);
            let vl = plane(v.lowpass.data(), c, n);
            correlate_acc(
                plane_mut(out.lowpass.data_mut(), f, n),
                vl,
                g,
                win,
                T::one(),
            );
        }
    }
    out
}

/// Transpose of [`mix_forward`] in both its arguments: returns `ΔV` and
/// adds the gain gradients into `grads` (f64 planes, same layout as `p`).
fn mix_backward<T: Real>(
    dw: &Pyramid<T>,
    v: &Pyramid<T>,
    p: &GainParams<T>,
    grads: &mut [Vec<f64>],
) -> Pyramid<T> {
    let (f_out, c_in) = (p.out_channels(), p.in_channels());
    let (h, w) = v.source_shape;
    let mut dv = Pyramid::zeros(c_in, h, w, v.levels);
    for (j, (vb, g)) in v.highpass.iter().zip(&p.g_hp).enumerate() {
        let s = vb.shape();
        let (kh, kw) = p.gain_size(j + 1);
        let win = Window {
            kh,
            kw,
            h: s[2],
            w: s[3],
        };
        let (n, k) = (s[2] * s[3], kh * kw);
        let db = &dw.highpass[j];
        let (gre, gim) = grads[2 * j..2 * j + 2].split_at_mut(1);
        let (gre, gim) = (&mut gre[0], &mut gim[0]);
        let dvb = &mut dv.highpass[j];
        for f in 0..f_out {
            for sb in 0..SUBBANDS {
                let o = f * SUBBANDS + sb;
                let (dwr, dwi) = (plane(db.re.data(), o, n), plane(db.im.data(), o, n));
                for c in 0..c_in {
                    let gi = (f * c_in + c) * SUBBANDS + sb;
                    let i = c * SUBBANDS + sb;
                    let (vr, vi) = (plane(vb.re.data(), i, n), plane(vb.im.data(), i, n));
                    let dgr = plane_mut(gre, gi, k);
                    correlate_kernel_grad(dgr, dwr, vr, win, 1.0);
                    correlate_kernel_grad(dgr, dwi, vi, win, 1.0);
                    let dgi = plane_mut(gim, gi, k);
                    correlate_kernel_grad(dgi, dwr, vi, win, -1.0);
                    correlate_kernel_grad(dgi, dwi, vr, win, 1.0);
                    let (gr, gm) = (plane(g.re.data(), gi, k), plane(g.im.data(), gi, k));
                    let dvr = plane_mut(dvb.re.data_mut(), i, n);
                    correlate_transpose_acc(dvr, dwr, gr, win, T::one());
                    correlate_transpose_acc(dvr, dwi, gm, win, T::one());
                    let dvi = plane_mut(dvb.im.data_mut(), i, n);
                    correlate_transpose_acc(dvi, dwr, gm, win, -T::one());
                    correlate_transpose_acc(dvi, dwi, gr, win, T::one());
                }
            }
        }
    }
    let ls = v.lowpass.shape();
    let klp = p.lowpass_size();
    let win = Window {
        kh: klp,
        kw: klp,
        h: ls[1],
        w: ls[2],
    };
    let (n, k) = (ls[1] * ls[2], klp * klp);
    let glp = grads.last_mut().expect("lowpass gradient plane");
    for f in 0..f_out {
        let dwl = plane(dw.lowpass.data(), f, n);
        for c in 0..c_in {
            let gi = f * c_in + c;
            correlate_kernel_grad(
                plane_mut(glp, gi, k),
                dwl,
                plane(v.lowpass.data(), c, n),
                win,
                1.0,
            );
            let g = plane(p.g_lp.data(), gi, k);
            correlate_transpose_acc(
                plane_mut(dv.lowpass.data_mut(), c, n),
                dwl,
                g,
                win,
                T::one(),
            );
        }
    }
    dv
}

/// What the backward pass needs from a forward call.
#[derive(Clone, Debug)]
pub struct GainCache<T = f64> {
    /// transform of every padded input sample
    pub pyramids: Vec<Pyramid<T>>,
    /// `[N, C, H, W]` of the forward input
    pub input_shape: Vec<usize>,
}

/// Extents padded up to the next multiple of `2^levels`.
pub fn padded_extent(n: usize, levels: usize) -> usize {
    let m = 1 << levels;
    n.div_ceil(m) * m
}

struct Resize<T> {
    rows: Stencil<T>,
    cols: Stencil<T>,
}

impl<T: Real> Resize<T> {
    fn pad(h: usize, w: usize, hp: usize, wp: usize) -> Self {
        Self {
            rows: Stencil::symmetric_pad(h, hp),
            cols: Stencil::symmetric_pad(w, wp),
        }
    }

    fn crop(hp: usize, wp: usize, h: usize, w: usize) -> Self {
        Self {
            rows: Stencil::crop(hp, h),
            cols: Stencil::crop(wp, w),
        }
    }

    fn is_identity(&self) -> bool {
        self.rows.in_len() == self.rows.out_len() && self.cols.in_len() == self.cols.out_len()
    }

    /// `[C, h, w] → [C, h', w']`
    fn apply(&self, x: Tensor<T>) -> Tensor<T> {
        if self.is_identity() {
            return x;
        }
        let c = x.shape()[0];
        let (hi, wi, ho, wo) = (
            self.rows.in_len(),
            self.cols.in_len(),
            self.rows.out_len(),
            self.cols.out_len(),
        );
        let t = self.rows.apply(x.data(), c, wi);
        let t = self.cols.apply(&t, c * ho, 1);
        debug_assert_eq!(x.len(), c * hi * wi);
        Tensor::new(&[c, ho, wo], t).expect("resize output shape")
    }

    fn apply_transpose(&self, g: Tensor<T>) -> Tensor<T> {
        if self.is_identity() {
            return g;
        }
        let c = g.shape()[0];
        let (hi, wi, ho) = (self.rows.in_len(), self.cols.in_len(), self.rows.out_len());
        let t = self.cols.apply_transpose(g.data(), c * ho, 1);
        let t = self.rows.apply_transpose(&t, c, wi);
        Tensor::new(&[c, hi, wi], t).expect("resize output shape")
    }
}

/// A gain layer bound to one filter set. Transform plans are built on
/// first use for each input size and then shared.
pub struct GainLayer<T = f64> {
    fs: FilterSet,
    plans: Mutex<HashMap<(usize, usize, usize), Arc<DtcwtPlan<T>>>>,
}

impl<T> Clone for GainLayer<T> {
    fn clone(&self) -> Self {
        Self {
            fs: self.fs.clone(),
            plans: Mutex::new(HashMap::new()),
        }
    }
}

impl<T> std::fmt::Debug for GainLayer<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GainLayer")
            .field("filter_set", &self.fs.name)
            .finish()
    }
}

impl<T: Real> GainLayer<T> {
    pub fn new(fs: FilterSet) -> Self {
        Self {
            fs,
            plans: Mutex::new(HashMap::new()),
        }
    }

    pub fn filter_set(&self) -> &FilterSet {
        &self.fs
    }

    fn plan(&self, h: usize, w: usize, levels: usize) -> Result<Arc<DtcwtPlan<T>>> {
        let mut plans = self.plans.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(p) = plans.get(&(h, w, levels)) {
            return Ok(p.clone());
        }
        let plan = Arc::new(DtcwtPlan::new(&self.fs, h, w, levels)?);
        plans.insert((h, w, levels), plan.clone());
        Ok(plan)
    }

    fn check_params(&self, p: &GainParams<T>) -> Result<()> {
        p.validate()?;
        if p.filter_set != self.fs.name {
            return Err(Error::config(format!(
                "gains were made for filter set '{}', the layer uses '{}'",
                p.filter_set, self.fs.name
            )));
        }
        Ok(())
    }

    /// `y = IDTCWT(G ⊙ DTCWT(x))` for `x: [N, C, H, W]`, returning `[N, F, H, W]`.
    pub fn forward(&self, x: &Tensor<T>, p: &GainParams<T>) -> Result<(Tensor<T>, GainCache<T>)> {
        self.check_params(p)?;
        let s = x.shape();
        if s.len() != 4 || s[1] != p.in_channels() {
            return Err(Error::dim(format!(
                "gain layer expects [N, {}, H, W], got {s:?}",
                p.in_channels()
            )));
        }
        let (n, h, w) = (s[0], s[2], s[3]);
        let (hp, wp) = (padded_extent(h, p.levels), padded_extent(w, p.levels));
        let plan = self.plan(hp, wp, p.levels)?;
        let pad = Resize::pad(h, w, hp, wp);
        let crop = Resize::crop(hp, wp, h, w);
        let per_sample: Vec<Result<(Tensor<T>, Pyramid<T>)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let v = plan.forward(&pad.apply(x.outer_tensor(i)))?;
                let y = crop.apply(plan.inverse(&mix_forward(&v, p))?);
                Ok((y, v))
            })
            .collect();
        let mut ys = Vec::with_capacity(n);
        let mut pyramids = Vec::with_capacity(n);
        for r in per_sample {
            let (y, v) = r?;
            ys.push(y);
            pyramids.push(v);
        }
        let y = if n == 0 {
            Tensor::zeros(&[0, p.out_channels(), h, w])
        } else {
            Tensor::stack(&ys)?
        };
        Ok((
            y.ensure_finite("gain_forward")?,
            GainCache {
                pyramids,
                input_shape: s.to_vec(),
            },
        ))
    }

    /// Returns `(dx, dG)` for the upstream gradient `dy: [N, F, H, W]`.
    /// Gain gradients are summed over the batch in sample order.
    pub fn backward(
        &self,
        dy: &Tensor<T>,
        cache: &GainCache<T>,
        p: &GainParams<T>,
    ) -> Result<(Tensor<T>, GainParams<T>)> {
        self.check_params(p)?;
        let xs = &cache.input_shape;
        let (n, h, w) = (xs[0], xs[2], xs[3]);
        if dy.shape() != [n, p.out_channels(), h, w] {
            return Err(Error::dim(format!(
                "upstream gradient {:?} does not match the forward output [{n}, {}, {h}, {w}]",
                dy.shape(),
                p.out_channels()
            )));
        }
        if cache.pyramids.len() != n || xs[1] != p.in_channels() {
            return Err(Error::dim("cache does not match the gain parameters"));
        }
        let (hp, wp) = (padded_extent(h, p.levels), padded_extent(w, p.levels));
        let plan = self.plan(hp, wp, p.levels)?;
        if cache
            .pyramids
            .iter()
            .any(|v| v.source_shape != (hp, wp) || v.channels() != p.in_channels())
        {
            return Err(Error::dim(
                "cached pyramids do not match the gain parameters",
            ));
        }
        let pad = Resize::pad(h, w, hp, wp);
        let crop = Resize::crop(hp, wp, h, w);
        let zero_grads = || {
            p.planes()
                .iter()
                .map(|t| vec![0.0; t.len()])
                .collect::<Vec<_>>()
        };
        let per_sample: Vec<Result<(Tensor<T>, Vec<Vec<f64>>)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let dw = plan.inverse_adjoint(&crop.apply_transpose(dy.outer_tensor(i)))?;
                let mut grads = zero_grads();
                let dv = mix_backward(&dw, &cache.pyramids[i], p, &mut grads);
                let dx = pad.apply_transpose(plan.forward_adjoint(&dv)?);
                Ok((dx, grads))
            })
            .collect();
        let mut total = zero_grads();
        let mut dxs = Vec::with_capacity(n);
        for r in per_sample {
            let (dx, grads) = r?;
            for (t, g) in total.iter_mut().zip(&grads) {
                t.iter_mut().zip(g).for_each(|(t, g)| *t += g);
            }
            dxs.push(dx);
        }
        let mut dp = p.zeros_like();
        for (plane, g) in dp.planes_mut().into_iter().zip(&total) {
            plane
                .data_mut()
                .iter_mut()
                .zip(g)
                .for_each(|(d, &g)| *d = T::cst(g));
        }
        if !dp.is_finite() {
            return Err(Error::NonFinite("gain_backward"));
        }
        let dx = if n == 0 {
            Tensor::zeros(xs)
        } else {
            Tensor::stack(&dxs)?
        };
        Ok((dx.ensure_finite("gain_backward")?, dp))
    }
}

/// One-off forward pass; see [`GainLayer::forward`].
pub fn gain_forward<T: Real>(
    x: &Tensor<T>,
    p: &GainParams<T>,
    fs: &FilterSet,
) -> Result<(Tensor<T>, GainCache<T>)> {
    GainLayer::new(fs.clone()).forward(x, p)
}

/// One-off backward pass; see [`GainLayer::backward`].
pub fn gain_backward<T: Real>(
    dy: &Tensor<T>,
    cache: &GainCache<T>,
    p: &GainParams<T>,
    fs: &FilterSet,
) -> Result<(Tensor<T>, GainParams<T>)> {
    GainLayer::new(fs.clone()).backward(dy, cache, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gainlayer::{gain_init, InitScheme};
    use crate::rng::SeededRng;
    use crate::tensor::inner_product;

    fn naive_correlate(inp: &[f64], k: &[f64], win: Window) -> Vec<f64> {
        let mut out = vec![0.0; win.h * win.w];
        for r in 0..win.h as isize {
            for c in 0..win.w as isize {
                let mut acc = 0.0;
                for u in 0..win.kh as isize {
                    for v in 0..win.kw as isize {
                        let (rr, cc) = (r + u - win.kh as isize / 2, c + v - win.kw as isize / 2);
                        if rr >= 0 && cc >= 0 && rr < win.h as isize && cc < win.w as isize {
                            acc += k[(u * win.kw as isize + v) as usize]
                                * inp[(rr * win.w as isize + cc) as usize];
                        }
                    }
                }
                out[(r * win.w as isize + c) as usize] = acc;
            }
        }
        out
    }

    #[test]
    fn correlation_matches_naive_loop() {
        let mut rng = SeededRng::new(1);
        for (kh, kw, h, w) in [(3, 3, 5, 7), (1, 1, 4, 4), (5, 3, 3, 6), (3, 5, 2, 2)] {
            let win = Window { kh, kw, h, w };
            let inp: Vec<f64> = (0..h * w).map(|_| rng.normal()).collect();
            let k: Vec<f64> = (0..kh * kw).map(|_| rng.normal()).collect();
            let mut out = vec![0.0; h * w];
            correlate_acc(&mut out, &inp, &k, win, 1.0);
            let want = naive_correlate(&inp, &k, win);
            for (a, b) in out.iter().zip(&want) {
                assert!((a - b).abs() < 1e-13);
            }
            // transpose and kernel gradient by the dot identity
            let g: Vec<f64> = (0..h * w).map(|_| rng.normal()).collect();
            let mut din = vec![0.0; h * w];
            correlate_transpose_acc(&mut din, &g, &k, win, 1.0);
            let lhs: f64 = out.iter().zip(&g).map(|(a, b)| a * b).sum();
            let rhs: f64 = din.iter().zip(&inp).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12);
            let mut gk = vec![0.0; kh * kw];
            correlate_kernel_grad(&mut gk, &g, &inp, win, 1.0);
            let rhs: f64 = gk.iter().zip(&k).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_gains_reproduce_the_input() {
        let fs = FilterSet::default();
        let mut rng = SeededRng::new(2);
        for levels in 1..=3 {
            for (h, w) in [(16, 16), (13, 10)] {
                let p = GainParams::identity(3, levels, 3, &fs.name);
                let x: Tensor = rng.normal_tensor(&[2, 3, h, w]);
                let (y, _) = gain_forward(&x, &p, &fs).unwrap();
                assert!(y.max_abs_diff(&x).unwrap() <= 1e-9, "J={levels} {h}x{w}");
            }
        }
    }

    #[test]
    fn zero_gains_give_zero_output() {
        let fs = FilterSet::default();
        let p = gain_init::<f64>(4, 2, 2, 3, 0, InitScheme::Zeros, &fs.name).unwrap();
        let x: Tensor = SeededRng::new(3).normal_tensor(&[2, 2, 8, 8]);
        let (y, _) = gain_forward(&x, &p, &fs).unwrap();
        assert_eq!(y.shape(), &[2, 4, 8, 8]);
        assert_eq!(y.max_abs(), 0.0);
    }

    #[test]
    fn adjoint_identity_holds() {
        let fs = FilterSet::default();
        let layer = GainLayer::new(fs.clone());
        let mut rng = SeededRng::new(4);
        for (levels, h, w, k) in [(1, 8, 8, 1), (2, 16, 12, 3), (2, 11, 9, 1), (3, 16, 16, 3)] {
            let mut p =
                gain_init::<f64>(3, 2, levels, 3, 5, InitScheme::UnitNormal, &fs.name).unwrap();
            for b in &mut p.g_hp {
                b.re = rng.normal_tensor(&[3, 2, 6, k, k]);
                b.im = rng.normal_tensor(&[3, 2, 6, k, k]);
            }
            let x: Tensor = rng.normal_tensor(&[2, 2, h, w]);
            let dy: Tensor = rng.normal_tensor(&[2, 3, h, w]);
            let (y, cache) = layer.forward(&x, &p).unwrap();
            let (dx, _) = layer.backward(&dy, &cache, &p).unwrap();
            let lhs = inner_product(&y, &dy).unwrap();
            let rhs = inner_product(&x, &dx).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0),
                "{lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn gain_gradient_is_the_bilinear_partner() {
        // y is linear in the gains too, so <y(G), dy> = <G, dG> exactly.
        let fs = FilterSet::default();
        let layer = GainLayer::new(fs.clone());
        let mut rng = SeededRng::new(5);
        let mut p = gain_init::<f64>(2, 3, 2, 3, 6, InitScheme::UnitNormal, &fs.name).unwrap();
        p.g_hp[1].re = rng.normal_tensor(&[2, 3, 6, 3, 3]);
        p.g_hp[1].im = rng.normal_tensor(&[2, 3, 6, 3, 3]);
        let x: Tensor = rng.normal_tensor(&[3, 3, 12, 12]);
        let dy: Tensor = rng.normal_tensor(&[3, 2, 12, 12]);
        let (y, cache) = layer.forward(&x, &p).unwrap();
        let (_, dp) = layer.backward(&dy, &cache, &p).unwrap();
        let lhs = inner_product(&y, &dy).unwrap();
        let rhs: f64 = p
            .planes()
            .iter()
            .zip(dp.planes())
            .map(|(a, b)| inner_product(a, b).unwrap())
            .sum();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs(), "{lhs} vs {rhs}");
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let fs = FilterSet::default();
        let p = gain_init::<f64>(3, 2, 1, 3, 1, InitScheme::UnitNormal, &fs.name).unwrap();
        let x: Tensor = SeededRng::new(6).normal_tensor(&[2, 2, 8, 8]);
        let (_, cache) = gain_forward(&x, &p, &fs).unwrap();
        let (dx, dp) = gain_backward(&Tensor::zeros(&[2, 3, 8, 8]), &cache, &p, &fs).unwrap();
        assert_eq!(dx.max_abs(), 0.0);
        assert!(dp.planes().iter().all(|t| t.max_abs() == 0.0));
    }

    #[test]
    fn linear_in_the_input() {
        let fs = FilterSet::default();
        let p = gain_init::<f64>(3, 2, 2, 3, 1, InitScheme::UnitNormal, &fs.name).unwrap();
        let x: Tensor = SeededRng::new(7).normal_tensor(&[1, 2, 16, 16]);
        let (y1, _) = gain_forward(&x, &p, &fs).unwrap();
        let (y2, _) = gain_forward(&x.scale(-2.5), &p, &fs).unwrap();
        let err = y2.max_abs_diff(&y1.scale(-2.5)).unwrap();
        assert!(err <= 1e-12 * y1.max_abs() * 2.5);
    }

    #[test]
    fn batch_results_do_not_depend_on_threads() {
        let fs = FilterSet::default();
        let p = gain_init::<f64>(3, 2, 1, 3, 1, InitScheme::UnitNormal, &fs.name).unwrap();
        let mut rng = SeededRng::new(8);
        let x: Tensor = rng.normal_tensor(&[9, 2, 8, 8]);
        let dy: Tensor = rng.normal_tensor(&[9, 3, 8, 8]);
        let run = || {
            let layer = GainLayer::new(fs.clone());
            let (y, c) = layer.forward(&x, &p).unwrap();
            let (dx, dp) = layer.backward(&dy, &c, &p).unwrap();
            (y, dx, dp)
        };
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(run);
        assert_eq!(a, b);
    }

    #[test]
    fn shape_errors() {
        let fs = FilterSet::default();
        let layer = GainLayer::new(fs.clone());
        let p = gain_init::<f64>(3, 2, 1, 3, 1, InitScheme::UnitNormal, &fs.name).unwrap();
        assert!(layer.forward(&Tensor::zeros(&[1, 3, 8, 8]), &p).is_err());
        let (_, cache) = layer.forward(&Tensor::zeros(&[1, 2, 8, 8]), &p).unwrap();
        assert!(layer
            .backward(&Tensor::zeros(&[1, 2, 8, 8]), &cache, &p)
            .is_err());
        let other = gain_init::<f64>(3, 2, 1, 3, 1, InitScheme::UnitNormal, "legall").unwrap();
        assert!(matches!(
            layer.forward(&Tensor::zeros(&[1, 2, 8, 8]), &other),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn padding_helpers() {
        assert_eq!(padded_extent(32, 2), 32);
        assert_eq!(padded_extent(13, 2), 16);
        assert_eq!(padded_extent(1, 3), 8);
    }

    #[test]
    fn complex_multiply_matches_scalar_model() {
        // one channel, one subband active: W = G V as complex numbers
        let fs = FilterSet::default();
        let mut p = GainParams::<f64>::zeros(1, 1, 1, 1, 1, &fs.name);
        p.g_hp[0].re.set(&[0, 0, 2, 0, 0], 0.6);
        p.g_hp[0].im.set(&[0, 0, 2, 0, 0], -1.3);
        let x: Tensor = SeededRng::new(9).normal_tensor(&[1, 1, 8, 8]);
        let plan = DtcwtPlan::new(&fs, 8, 8, 1).unwrap();
        let v = plan.forward(&x.outer_tensor(0)).unwrap();
        let w = mix_forward(&v, &p);
        let b = &v.highpass[0];
        let wb = &w.highpass[0];
        for k in 0..16 {
            let i = 2 * 16 + k;
            let (vr, vi) = (b.re.data()[i], b.im.data()[i]);
            assert!((wb.re.data()[i] - (0.6 * vr + 1.3 * vi)).abs() < 1e-15);
            assert!((wb.im.data()[i] - (0.6 * vi - 1.3 * vr)).abs() < 1e-15);
        }
        let e: f64 = (0..16)
            .map(|k| b.re.data()[32 + k].powi(2) + b.im.data()[32 + k].powi(2))
            .sum();
        assert!(
            (crate::tensor::ComplexTensor::energy(wb).sum() - e * (0.36 + 1.69)).abs() < 1e-12 * e
        );
    }
}
