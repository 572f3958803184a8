//! Central finite-difference checks for the hand-written backward passes.
//!
//! Every check uses the scalar loss `⟨y, R⟩` with a fixed random `R`, so the
//! upstream gradient is `R` itself. Both layers are linear in each argument
//! separately, which makes the central difference exact up to rounding and
//! lets 32-bit checks use a large step.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gainlayer::{build_dense_operator, gain_init, GainLayer, GainParams, InitScheme};
use crate::nn::{conv2d_backward, conv2d_forward};
use crate::rng::SeededRng;
use crate::tensor::{inner_product, Real, Tensor};
use crate::transform::FilterSet;

/// Worst acceptable relative error at 64 bits.
pub const F64_TOLERANCE: f64 = 1e-6;
/// Worst acceptable relative error at 32 bits.
pub const F32_TOLERANCE: f64 = 1e-3;
/// Gradients smaller than this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-3;

/// `|fd − an| / max(|fd|, |an|, REL_FLOOR)`
pub fn relative_error(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / fd.abs().max(an.abs()).max(REL_FLOOR)
}

pub fn tolerance<T: Real>() -> f64 {
    if T::NAME == "f32" {
        F32_TOLERANCE
    } else {
        F64_TOLERANCE
    }
}

fn step<T: Real>() -> f64 {
    if T::NAME == "f32" {
        1.0
    } else {
        1e-5
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheck {
    /// which tensor was perturbed
    pub name: String,
    pub entries: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Perturbs every entry of the tensor `get` selects and compares the
/// central difference of `loss` with `analytic`.
fn probe<S, T: Real>(
    state: &mut S,
    name: &str,
    analytic: &Tensor<T>,
    get: impl Fn(&mut S) -> &mut Tensor<T>,
    loss: impl Fn(&S) -> Result<f64>,
) -> Result<GradCheck> {
    let h = step::<T>();
    let n = get(state).len();
    let mut out = GradCheck {
        name: name.to_owned(),
        entries: n,
        max_rel_err: 0.0,
        max_abs_err: 0.0,
    };
    for k in 0..n {
        let orig = get(state).data()[k];
        let at = |state: &mut S, v: f64| -> Result<f64> {
            get(state).data_mut()[k] = T::cst(v);
            loss(state)
        };
        let x0 = orig.as_f64();
        let fd = (at(state, x0 + h)? - at(state, x0 - h)?) / (2.0 * h);
        get(state).data_mut()[k] = orig;
        let an = analytic.data()[k].as_f64();
        out.max_abs_err = out.max_abs_err.max((fd - an).abs());
        out.max_rel_err = out.max_rel_err.max(relative_error(fd, an));
    }
    Ok(out)
}

/// Sizes for the layer checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerCheckConfig {
    pub batch: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    pub levels: usize,
    pub lowpass_size: usize,
    /// convolution kernel side
    pub kernel: usize,
    pub seed: u64,
}

impl Default for LayerCheckConfig {
    fn default() -> Self {
        Self {
            batch: 2,
            in_channels: 2,
            out_channels: 3,
            height: 8,
            width: 8,
            levels: 1,
            lowpass_size: 3,
            kernel: 3,
            seed: 0,
        }
    }
}

struct GainState<T> {
    x: Tensor<T>,
    p: GainParams<T>,
}

/// Checks the input gradient and every gain plane of a gain layer with
/// unit-normal gains.
pub fn gain_layer_gradcheck<T: Real>(
    cfg: &LayerCheckConfig,
    fs: &FilterSet,
) -> Result<Vec<GradCheck>> {
    let mut rng = SeededRng::new(cfg.seed);
    let p = gain_init::<T>(
        cfg.out_channels,
        cfg.in_channels,
        cfg.levels,
        cfg.lowpass_size,
        cfg.seed.wrapping_add(1),
        InitScheme::UnitNormal,
        &fs.name,
    )?;
    let x: Tensor<T> = rng.normal_tensor(&[cfg.batch, cfg.in_channels, cfg.height, cfg.width]);
    let r: Tensor<T> = rng.normal_tensor(&[cfg.batch, cfg.out_channels, cfg.height, cfg.width]);
    let layer = GainLayer::<T>::new(fs.clone());
    let (_, cache) = layer.forward(&x, &p)?;
    let (dx, dp) = layer.backward(&r, &cache, &p)?;
    let loss = |s: &GainState<T>| inner_product(&layer.forward(&s.x, &s.p)?.0, &r);

    let mut state = GainState { x, p };
    let mut out = vec![probe(&mut state, "input", &dx, |s| &mut s.x, loss)?];
    let names: Vec<String> = (1..=cfg.levels)
        .flat_map(|j| [format!("g_hp{j}.re"), format!("g_hp{j}.im")])
        .chain(["g_lp".to_owned()])
        .collect();
    for (i, (name, grad)) in names.iter().zip(dp.planes()).enumerate() {
        out.push(probe(
            &mut state,
            name,
            grad,
            |s| s.p.planes_mut().swap_remove(i),
            loss,
        )?);
    }
    Ok(out)
}

struct ConvState<T> {
    x: Tensor<T>,
    w: Tensor<T>,
    b: Tensor<T>,
}

/// Checks a "same"-padded convolution (`kernel` must be odd).
pub fn conv2d_gradcheck<T: Real>(cfg: &LayerCheckConfig) -> Result<Vec<GradCheck>> {
    if cfg.kernel % 2 == 0 {
        return Err(Error::config(format!(
            "kernel must be odd, got {}",
            cfg.kernel
        )));
    }
    let pad = cfg.kernel / 2;
    let mut rng = SeededRng::new(cfg.seed);
    let x: Tensor<T> = rng.normal_tensor(&[cfg.batch, cfg.in_channels, cfg.height, cfg.width]);
    let w: Tensor<T> =
        rng.normal_tensor(&[cfg.out_channels, cfg.in_channels, cfg.kernel, cfg.kernel]);
    let b: Tensor<T> = rng.normal_tensor(&[cfg.out_channels]);
    let r: Tensor<T> = rng.normal_tensor(&[cfg.batch, cfg.out_channels, cfg.height, cfg.width]);
    let (dx, dw, db) = conv2d_backward(&r, &x, &w, &b, pad)?;
    let loss = |s: &ConvState<T>| inner_product(&conv2d_forward(&s.x, &s.w, &s.b, pad)?, &r);
    let mut state = ConvState { x, w, b };
    Ok(vec![
        probe(&mut state, "input", &dx, |s| &mut s.x, loss)?,
        probe(&mut state, "weight", &dw, |s| &mut s.w, loss)?,
        probe(&mut state, "bias", &db, |s| &mut s.b, loss)?,
    ])
}

/// Largest entry of `|Aᵀdy − dx|` relative to `|Aᵀdy|∞`, where `A` is the
/// materialised layer and `dx` the passthrough gradient of the backward pass.
pub fn dense_operator_check(
    p: &GainParams,
    height: usize,
    width: usize,
    fs: &FilterSet,
    seed: u64,
) -> Result<f64> {
    let a = build_dense_operator(p, height, width, fs)?;
    let (rows, cols) = (a.shape()[0], a.shape()[1]);
    let mut rng = SeededRng::new(seed);
    let x: Tensor = rng.normal_tensor(&[1, p.in_channels(), height, width]);
    let dy: Tensor = rng.normal_tensor(&[1, p.out_channels(), height, width]);
    let layer = GainLayer::new(fs.clone());
    let (_, cache) = layer.forward(&x, p)?;
    let (dx, _) = layer.backward(&dy, &cache, p)?;
    let mut at_dy = vec![0.0; cols];
    for r in 0..rows {
        let g = dy.data()[r];
        for (acc, &v) in at_dy.iter_mut().zip(&a.data()[r * cols..(r + 1) * cols]) {
            *acc += v * g;
        }
    }
    let scale = at_dy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = at_dy
        .iter()
        .zip(dx.data())
        .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
    Ok(err / scale.max(f64::MIN_POSITIVE))
}
