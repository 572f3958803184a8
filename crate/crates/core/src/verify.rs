//! Invariant suites shared by the command-line self test and the
//! acceptance checks. Each suite reports its worst error next to the bound
//! it must meet instead of failing fast.

use serde::Serialize;

use crate::error::Result;
use crate::gainlayer::{gain_init, GainLayer, GainParams, InitScheme};
use crate::rng::SeededRng;
use crate::tensor::{inner_product, ComplexTensor, Tensor};
use crate::transform::{
    pyramid_shapes, BiorthogonalFilters, DtcwtPlan, FilterSet, Pyramid, QshiftFilters,
    LEVEL1_NAMES, QSHIFT_NAMES, STAGE_PR_TOLERANCE,
};

pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-9;
pub const TRANSFORM_ADJOINT_TOLERANCE: f64 = 1e-11;
pub const LAYER_ADJOINT_TOLERANCE: f64 = 1e-10;
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub property: String,
    pub max_error: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(property: impl Into<String>, max_error: f64, threshold: f64) -> Self {
        Self {
            property: property.into(),
            max_error,
            threshold,
            // NaN fails
            passed: max_error <= threshold,
        }
    }
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Single-stage reconstruction of every built-in filter table.
pub fn filter_stage_checks() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for name in LEVEL1_NAMES {
        let err = BiorthogonalFilters::named(name)?.stage_reconstruction_error();
        out.push(Check::new(
            format!("stage reconstruction {name}"),
            err,
            STAGE_PR_TOLERANCE,
        ));
    }
    for name in QSHIFT_NAMES {
        let err = QshiftFilters::named(name)?.stage_reconstruction_error();
        out.push(Check::new(
            format!("stage reconstruction {name}"),
            err,
            STAGE_PR_TOLERANCE,
        ));
    }
    Ok(out)
}

/// `‖inverse(forward(x)) − x‖∞` over random `[channels, h, w]` inputs.
pub fn reconstruction_check(
    fs: &FilterSet,
    shape: [usize; 3],
    levels: usize,
    trials: usize,
    seed: u64,
) -> Result<Check> {
    let [c, h, w] = shape;
    let plan = DtcwtPlan::<f64>::new(fs, h, w, levels)?;
    let mut rng = SeededRng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x: Tensor = rng.normal_tensor(&[c, h, w]);
        let err = plan.inverse(&plan.forward(&x)?)?.max_abs_diff(&x)?;
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    Ok(Check::new(
        format!("perfect reconstruction J={levels} {c}x{h}x{w}"),
        worst,
        RECONSTRUCTION_TOLERANCE,
    ))
}

fn random_pyramid(rng: &mut SeededRng, c: usize, h: usize, w: usize, levels: usize) -> Pyramid {
    let (lp, hp) = pyramid_shapes(c, h, w, levels);
    Pyramid {
        lowpass: rng.normal_tensor(&lp),
        highpass: hp
            .iter()
            .map(|s| ComplexTensor {
                re: rng.normal_tensor(s),
                im: rng.normal_tensor(s),
            })
            .collect(),
        levels,
        source_shape: (h, w),
    }
}

/// Dot tests for both transform adjoint pairs:
/// `⟨Fx, P⟩ = ⟨x, FᵀP⟩` and `⟨IP, y⟩ = ⟨P, Iᵀy⟩`.
pub fn transform_adjoint_checks(
    fs: &FilterSet,
    shape: [usize; 3],
    levels: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<Check>> {
    let [c, h, w] = shape;
    let plan = DtcwtPlan::<f64>::new(fs, h, w, levels)?;
    let mut rng = SeededRng::new(seed);
    let (mut fwd, mut inv) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let x: Tensor = rng.normal_tensor(&[c, h, w]);
        let p = random_pyramid(&mut rng, c, h, w, levels);
        let lhs = plan.forward(&x)?.inner_product(&p)?;
        let rhs = inner_product(&x, &plan.forward_adjoint(&p)?)?;
        fwd = fwd.max(relative_gap(lhs, rhs));
        let y: Tensor = rng.normal_tensor(&[c, h, w]);
        let lhs = inner_product(&plan.inverse(&p)?, &y)?;
        let rhs = p.inner_product(&plan.inverse_adjoint(&y)?)?;
        inv = inv.max(relative_gap(lhs, rhs));
    }
    Ok(vec![
        Check::new(
            format!("forward adjoint J={levels}"),
            fwd,
            TRANSFORM_ADJOINT_TOLERANCE,
        ),
        Check::new(
            format!("inverse adjoint J={levels}"),
            inv,
            TRANSFORM_ADJOINT_TOLERANCE,
        ),
    ])
}

/// `⟨L x, y⟩ = ⟨x, Lᵀy⟩` where `Lᵀ` is the passthrough gradient of the
/// gain layer backward pass.
pub fn layer_adjoint_check(
    fs: &FilterSet,
    levels: usize,
    trials: usize,
    seed: u64,
) -> Result<Check> {
    let mut rng = SeededRng::new(seed);
    let layer = GainLayer::<f64>::new(fs.clone());
    let mut worst = 0.0f64;
    for t in 0..trials {
        let p: GainParams = gain_init(
            3,
            2,
            levels,
            3,
            seed.wrapping_add(t as u64),
            InitScheme::UnitNormal,
            &fs.name,
        )?;
        let x: Tensor = rng.normal_tensor(&[2, 2, 12, 10]);
        let y: Tensor = rng.normal_tensor(&[2, 3, 12, 10]);
        let (lx, cache) = layer.forward(&x, &p)?;
        let (lty, _) = layer.backward(&y, &cache, &p)?;
        worst = worst.max(relative_gap(
            inner_product(&lx, &y)?,
            inner_product(&x, &lty)?,
        ));
    }
    Ok(Check::new(
        format!("gain layer adjoint J={levels}"),
        worst,
        LAYER_ADJOINT_TOLERANCE,
    ))
}

/// Unit lowpass and subband gains with matching channels reproduce the input.
pub fn identity_check(fs: &FilterSet, levels: usize, seed: u64) -> Result<Check> {
    let p = GainParams::identity(3, levels, 3, &fs.name);
    let x: Tensor = SeededRng::new(seed).normal_tensor(&[2, 3, 32, 32]);
    let (y, _) = GainLayer::new(fs.clone()).forward(&x, &p)?;
    Ok(Check::new(
        format!("identity gains J={levels}"),
        y.max_abs_diff(&x)?,
        IDENTITY_TOLERANCE,
    ))
}

/// Everything above for one filter set, on `3×32×32` inputs with
/// `J ∈ {1, 2, 3}`.
pub fn transform_suite(fs: &FilterSet, trials: usize, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for levels in 1..=3 {
        out.push(reconstruction_check(fs, [3, 32, 32], levels, trials, seed)?);
    }
    for levels in 1..=3 {
        out.extend(transform_adjoint_checks(
            fs,
            [3, 32, 32],
            levels,
            trials,
            seed,
        )?);
    }
    for levels in 1..=2 {
        out.push(layer_adjoint_check(fs, levels, trials.min(10), seed)?);
        out.push(identity_check(fs, levels, seed)?);
    }
    Ok(out)
}
