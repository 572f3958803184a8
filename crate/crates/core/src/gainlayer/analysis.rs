//! Measurements on gain layers: dense operators, impulse responses, spectra
//! and the spread of randomly drawn filter shapes.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use super::layer::GainLayer;
use super::params::GainParams;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{Real, Tensor};
use crate::transform::FilterSet;

/// Largest spatial extent [`build_dense_operator`] will materialise.
pub const DENSE_OPERATOR_LIMIT: usize = 16;

/// Materialises the layer as a `(F·H·W) × (C·H·W)` matrix, column `k`
/// being the response to the `k`-th basis image.
pub fn build_dense_operator(p: &GainParams, h: usize, w: usize, fs: &FilterSet) -> Result<Tensor> {
    if h > DENSE_OPERATOR_LIMIT || w > DENSE_OPERATOR_LIMIT {
        return Err(Error::config(format!(
            "{h}×{w} exceeds the {DENSE_OPERATOR_LIMIT}×{DENSE_OPERATOR_LIMIT} dense-operator limit"
        )));
    }
    let (c, f) = (p.in_channels(), p.out_channels());
    let (cols, rows) = (c * h * w, f * h * w);
    let basis = Tensor::from_fn(&[cols, c, h, w], |i| {
        if i / cols == i % cols {
            1.0
        } else {
            0.0
        }
    });
    let (y, _) = GainLayer::new(fs.clone()).forward(&basis, p)?;
    let mut m = Tensor::zeros(&[rows, cols]);
    for k in 0..cols {
        for (r, &v) in y.outer(k).iter().enumerate() {
            m.data_mut()[r * cols + k] = v;
        }
    }
    Ok(m)
}

/// Layer output for a unit impulse at the centre of each input channel,
/// `[F, C, size, size]`.
pub fn impulse_response<T: Real>(
    p: &GainParams<T>,
    size: usize,
    fs: &FilterSet,
) -> Result<Tensor<T>> {
    impulse_responses(&GainLayer::new(fs.clone()), std::slice::from_ref(p), size)
        .map(|mut v| v.remove(0))
}

/// [`impulse_response`] for many gain sets sharing one layer, in parallel.
pub fn impulse_responses<T: Real>(
    layer: &GainLayer<T>,
    params: &[GainParams<T>],
    size: usize,
) -> Result<Vec<Tensor<T>>> {
    if size % 2 == 0 || size == 0 {
        return Err(Error::config(format!(
            "impulse size must be odd, got {size}"
        )));
    }
    params
        .par_iter()
        .map(|p| {
            let c = p.in_channels();
            let f = p.out_channels();
            let mid = size / 2;
            let mut x = Tensor::zeros(&[c, c, size, size]);
            for ch in 0..c {
                x.set(&[ch, ch, mid, mid], T::one());
            }
            let (y, _) = layer.forward(&x, p)?;
            let plane = size * size;
            Ok(Tensor::from_fn(&[f, c, size, size], |i| {
                let (fc, k) = (i / plane, i % plane);
                y.data()[((fc % c) * f + fc / c) * plane + k]
            }))
        })
        .collect()
}

/// Signed frequency in radians per sample of DFT bin `k` out of `n`.
fn bin_frequency(k: usize, n: usize) -> f64 {
    let k = if k > n / 2 {
        k as f64 - n as f64
    } else {
        k as f64
    };
    2.0 * PI * k / n as f64
}

/// `|X(ω_r, ω_c)|²` of an `h × w` image, row-major.
pub fn power_spectrum(img: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = img.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let row_fft = planner.plan_fft_forward(w);
    for row in buf.chunks_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(h);
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            col[r] = buf[r * w + c];
        }
        col_fft.process(&mut col);
        for r in 0..h {
            buf[r * w + c] = col[r];
        }
    }
    buf.iter().map(|z| z.norm_sqr()).collect()
}

/// Share of spectral energy where `lo < max(|ω_r|, |ω_c|) < hi`.
pub fn annulus_energy_fraction(img: &[f64], h: usize, w: usize, lo: f64, hi: f64) -> f64 {
    masked_fraction(img, h, w, |wr, wc| {
        let m = wr.abs().max(wc.abs());
        lo < m && m < hi
    })
}

/// Share of spectral energy inside the passband of subband `subband` at
/// `scale`: the max-norm annulus `(π / 2^scale, π / 2^(scale-1)]` crossed
/// with the 30° sector around the subband's frequency direction, together
/// with its mirror through the origin.
pub fn subband_region_fraction(
    img: &[f64],
    h: usize,
    w: usize,
    scale: usize,
    subband: usize,
) -> f64 {
    let hi = PI / (1 << (scale - 1)) as f64;
    let lo = hi / 2.0;
    let centre = (crate::transform::ORIENTATIONS_DEG[subband] + 90.0).to_radians();
    masked_fraction(img, h, w, |wr, wc| {
        let m = wr.abs().max(wc.abs());
        if !(lo < m && m <= hi) {
            return false;
        }
        // rows grow downwards, so the upward frequency is -ω_r
        let angle = (-wr).atan2(wc);
        let mut d = (angle - centre).rem_euclid(PI);
        if d > PI / 2.0 {
            d = PI - d;
        }
        d <= PI / 12.0
    })
}

fn masked_fraction(img: &[f64], h: usize, w: usize, inside: impl Fn(f64, f64) -> bool) -> f64 {
    let spec = power_spectrum(img, h, w);
    let mut total = 0.0;
    let mut kept = 0.0;
    for r in 0..h {
        let wr = bin_frequency(r, h);
        for c in 0..w {
            let e = spec[r * w + c];
            total += e;
            if inside(wr, bin_frequency(c, w)) {
                kept += e;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        kept / total
    }
}

/// Share of spatial energy inside a `size × size` box centred on
/// `(row, col)`.
pub fn box_energy_fraction(
    img: &[f64],
    h: usize,
    w: usize,
    row: usize,
    col: usize,
    size: usize,
) -> f64 {
    let half = size / 2;
    let mut total = 0.0;
    let mut kept = 0.0;
    for r in 0..h {
        for c in 0..w {
            let e = img[r * w + c] * img[r * w + c];
            total += e;
            if r.abs_diff(row) <= half && c.abs_diff(col) <= half {
                kept += e;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        kept / total
    }
}

/// Result of fitting a degrees-of-freedom count to pairwise correlations.
#[derive(Clone, Debug, Serialize)]
pub struct DofEstimate {
    pub dof: f64,
    pub mean: f64,
    pub variance: f64,
    pub pairs: usize,
    /// every pairwise normalised inner product, `(0,1), (0,2), …, (1,2), …`
    #[serde(skip)]
    pub correlations: Vec<f64>,
}

/// Fits `d` so that normalised inner products between `vectors` spread like
/// those of independent `d`-dimensional standard normal vectors, whose
/// variance is `1 / d`.
pub fn dof_from_vectors(vectors: &[Vec<f64>]) -> Result<DofEstimate> {
    if vectors.len() < 2 {
        return Err(Error::config("need at least two shapes to correlate"));
    }
    let unit: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n == 0.0 || !n.is_finite() {
                Err(Error::Degenerate(
                    "a shape has zero or non-finite energy".into(),
                ))
            } else {
                Ok(v.iter().map(|x| x / n).collect())
            }
        })
        .collect::<Result<_>>()?;
    let correlations: Vec<f64> = (0..unit.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let unit = &unit;
            (i + 1..unit.len()).map(move |j| {
                unit[i]
                    .iter()
                    .zip(&unit[j])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
        })
        .collect();
    let n = correlations.len() as f64;
    let mean = correlations.iter().sum::<f64>() / n;
    let variance = correlations
        .iter()
        .map(|c| (c - mean) * (c - mean))
        .sum::<f64>()
        / n;
    if variance < 1e-12 {
        return Err(Error::Degenerate(format!(
            "correlations have variance {variance:.3e}; the shapes are (nearly) identical"
        )));
    }
    Ok(DofEstimate {
        dof: 1.0 / variance,
        mean,
        variance,
        pairs: correlations.len(),
        correlations,
    })
}

/// Grid used for the random-shape experiments: large enough to hold a
/// scale-2 response with a wide margin.
pub const SHAPE_GRID: usize = 65;

/// Gains of `num_shapes` single-channel two-level layers whose scale-2
/// coefficients are unit normal and whose other gains are zero.
pub fn random_shape_gains(num_shapes: usize, seed: u64, filter_set: &str) -> Vec<GainParams> {
    let mut rng = SeededRng::new(seed);
    (0..num_shapes)
        .map(|_| {
            let mut p = GainParams::zeros(1, 1, 2, 1, 1, filter_set);
            p.g_hp[1].re = rng.normal_tensor(p.g_hp[1].re.shape());
            p.g_hp[1].im = rng.normal_tensor(p.g_hp[1].im.shape());
            p.init.scheme = "unit-normal-scale2".into();
            p.init.seed = Some(seed);
            p
        })
        .collect()
}

/// Impulse responses of [`random_shape_gains`] on a [`SHAPE_GRID`] grid.
pub fn random_shapes(num_shapes: usize, seed: u64, fs: &FilterSet) -> Result<Vec<Tensor>> {
    impulse_responses(
        &GainLayer::new(fs.clone()),
        &random_shape_gains(num_shapes, seed, &fs.name),
        SHAPE_GRID,
    )
}

/// Degrees of freedom of `num_shapes` random scale-2 shapes.
///
/// ```
/// use wavegain::gainlayer::corr_dof;
/// let est = corr_dof(64, 1, &Default::default()).unwrap();
/// assert!(est.dof > 5.0 && est.dof < 20.0);
/// ```
pub fn corr_dof(num_shapes: usize, seed: u64, fs: &FilterSet) -> Result<DofEstimate> {
    let shapes = random_shapes(num_shapes, seed, fs)?;
    dof_from_vectors(
        &shapes
            .into_iter()
            .map(Tensor::into_data)
            .collect::<Vec<_>>(),
    )
}

/// The estimator applied to white Gaussian vectors of known dimension.
pub fn white_noise_dof(dim: usize, num_vectors: usize, seed: u64) -> Result<DofEstimate> {
    let mut rng = SeededRng::new(seed);
    let vectors: Vec<Vec<f64>> = (0..num_vectors)
        .map(|_| (0..dim).map(|_| rng.normal()).collect())
        .collect();
    dof_from_vectors(&vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gainlayer::{gain_forward, gain_init, random_scale_gains, InitScheme};
    use crate::transform::SUBBANDS;

    #[test]
    fn dense_operator_reproduces_forward() {
        let fs = FilterSet::default();
        let p = gain_init::<f64>(2, 2, 1, 3, 3, InitScheme::UnitNormal, &fs.name).unwrap();
        let m = build_dense_operator(&p, 8, 8, &fs).unwrap();
        assert_eq!(m.shape(), &[128, 128]);
        let x: Tensor = SeededRng::new(1).normal_tensor(&[1, 2, 8, 8]);
        let (y, _) = gain_forward(&x, &p, &fs).unwrap();
        for r in 0..128 {
            let v: f64 = (0..128).map(|k| m.data()[r * 128 + k] * x.data()[k]).sum();
            assert!((v - y.data()[r]).abs() < 1e-11);
        }
    }

    #[test]
    fn identity_operator() {
        let fs = FilterSet::default();
        let p = GainParams::identity(1, 2, 3, &fs.name);
        let m = build_dense_operator(&p, 8, 8, &fs).unwrap();
        for r in 0..64 {
            for c in 0..64 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((m.data()[r * 64 + c] - want).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn size_guard() {
        let fs = FilterSet::default();
        let p = GainParams::identity(1, 1, 3, &fs.name);
        assert!(matches!(
            build_dense_operator(&p, 32, 8, &fs),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn impulse_layout_and_zero_params() {
        let fs = FilterSet::default();
        let p = gain_init::<f64>(3, 2, 1, 3, 3, InitScheme::UnitNormal, &fs.name).unwrap();
        let r = impulse_response(&p, 15, &fs).unwrap();
        assert_eq!(r.shape(), &[3, 2, 15, 15]);
        // channel pair (2, 1) alone
        let mut single = GainParams::zeros(1, 1, 1, 1, 3, &fs.name);
        single.g_hp[0]
            .re
            .data_mut()
            .copy_from_slice(&p.g_hp[0].re.data()[(2 * 2 + 1) * SUBBANDS..][..SUBBANDS]);
        single.g_hp[0]
            .im
            .data_mut()
            .copy_from_slice(&p.g_hp[0].im.data()[(2 * 2 + 1) * SUBBANDS..][..SUBBANDS]);
        single
            .g_lp
            .data_mut()
            .copy_from_slice(&p.g_lp.data()[(2 * 2 + 1) * 9..][..9]);
        let s = impulse_response(&single, 15, &fs).unwrap();
        let got = &r.data()[(2 * 2 + 1) * 225..][..225];
        for (a, b) in got.iter().zip(s.data()) {
            assert!((a - b).abs() < 1e-14);
        }
        let z = impulse_response(&p.zeros_like(), 15, &fs).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        assert!(impulse_response(&p, 16, &fs).is_err());
    }

    #[test]
    fn power_spectrum_matches_direct_dft() {
        let (h, w) = (5, 6);
        let img: Vec<f64> = SeededRng::new(2).normal_tensor::<f64>(&[h * w]).into_data();
        let spec = power_spectrum(&img, h, w);
        for kr in 0..h {
            for kc in 0..w {
                let (mut re, mut im) = (0.0, 0.0);
                for r in 0..h {
                    for c in 0..w {
                        let t =
                            -2.0 * PI * ((kr * r) as f64 / h as f64 + (kc * c) as f64 / w as f64);
                        re += img[r * w + c] * t.cos();
                        im += img[r * w + c] * t.sin();
                    }
                }
                assert!((spec[kr * w + kc] - (re * re + im * im)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn annulus_of_a_pure_tone() {
        let n = 65;
        let tone =
            |f: f64| -> Vec<f64> { (0..n * n).map(|i| (f * (i % n) as f64).cos()).collect() };
        let inside =
            annulus_energy_fraction(&tone(2.0 * PI * 12.0 / 65.0), n, n, PI / 4.0, PI / 2.0);
        assert!((inside - 1.0).abs() < 1e-12);
        let outside =
            annulus_energy_fraction(&tone(2.0 * PI * 3.0 / 65.0), n, n, PI / 4.0, PI / 2.0);
        assert!(outside < 1e-12);
    }

    #[test]
    fn dof_estimator_recovers_white_noise_dimension() {
        let est = white_noise_dof(12, 512, 3).unwrap();
        assert!((est.dof - 12.0).abs() <= 0.5, "{}", est.dof);
        assert_eq!(est.pairs, 512 * 511 / 2);
    }

    #[test]
    fn identical_shapes_are_degenerate() {
        let v = vec![vec![1.0, 2.0, 3.0]; 10];
        assert!(matches!(dof_from_vectors(&v), Err(Error::Degenerate(_))));
        let v = vec![vec![0.0; 3], vec![1.0, 0.0, 0.0]];
        assert!(matches!(dof_from_vectors(&v), Err(Error::Degenerate(_))));
        assert!(dof_from_vectors(&[vec![1.0]]).is_err());
    }

    #[test]
    fn scale_supports() {
        let fs = FilterSet::default();
        let n = SHAPE_GRID;
        for (scale, size, want) in [(1, 7, 0.99), (2, 17, 0.99)] {
            let mut p = GainParams::<f64>::zeros(1, 1, 2, 1, 1, &fs.name);
            p.g_hp[scale - 1].re.fill(1.0);
            let r = impulse_response(&p, n, &fs).unwrap();
            let frac = box_energy_fraction(r.data(), n, n, n / 2, n / 2, size);
            assert!(frac >= want, "scale {scale}: {frac}");
        }
    }

    #[test]
    fn single_subband_gains_stay_in_their_sector() {
        // Measured once on the default filters: 0.58 to 0.73 of the energy
        // sits in the subband's own 30° sector, the rest leaks into the
        // neighbouring sectors through the filters' transition bands.
        let fs = FilterSet::default();
        let n = SHAPE_GRID;
        for scale in 1..=2 {
            for sb in 0..SUBBANDS {
                let mut p = GainParams::<f64>::zeros(1, 1, 2, 1, 1, &fs.name);
                p.g_hp[scale - 1].re.set(&[0, 0, sb, 0, 0], 1.0);
                let r = impulse_response(&p, n, &fs).unwrap();
                let own = subband_region_fraction(r.data(), n, n, scale, sb);
                assert!(own >= 0.55, "scale {scale} subband {sb}: {own}");
                for other in (0..SUBBANDS).filter(|&o| o != sb) {
                    let o = subband_region_fraction(r.data(), n, n, scale, other);
                    assert!(
                        own > 2.0 * o,
                        "scale {scale} subband {sb} vs {other}: {own} {o}"
                    );
                }
            }
        }
    }

    #[test]
    fn random_scale_two_shapes() {
        let fs = FilterSet::default();
        let p = random_scale_gains::<f64>(1, 1, 2, 2, 7, &fs.name).unwrap();
        let r = impulse_response(&p, SHAPE_GRID, &fs).unwrap();
        assert!(r.max_abs() > 0.0);
        let frac = annulus_energy_fraction(r.data(), SHAPE_GRID, SHAPE_GRID, PI / 4.0, PI / 2.0);
        assert!(frac > 0.5 && frac < 1.0, "{frac}");
    }
}
