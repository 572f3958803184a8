//! Two-dimensional dual-tree complex wavelet transform.
//!
//! Level 1 runs the odd-length biorthogonal filters without decimation, so
//! the four trees sit interleaved in one full-resolution image. Levels two
//! and up run the q-shift pair on the interleaved signal and halve each
//! extent. At every level the three highpass quad images (horizontal,
//! diagonal, vertical) are paired into six complex subbands.
//!
//! The plan holds one stencil per filter and axis, so the forward, inverse
//! and both adjoints share exactly the same coefficient tables.

use std::f64::consts::FRAC_1_SQRT_2;

use super::filters::FilterSet;
use super::pyramid::{pyramid_shapes, Pyramid, SUBBANDS};
use super::stencil::Stencil;
use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor, Real, Tensor};

/// Subband slots filled by each quad image: (first of pair, second of pair).
const HORIZONTAL: (usize, usize) = (0, 5);
const DIAGONAL: (usize, usize) = (1, 4);
const VERTICAL: (usize, usize) = (2, 3);

#[derive(Clone, Debug)]
struct Level<T> {
    rows_in: usize,
    cols_in: usize,
    /// analysis along rows / columns, index 0 lowpass, 1 highpass
    analysis_rows: [Stencil<T>; 2],
    analysis_cols: [Stencil<T>; 2],
    synthesis_rows: [Stencil<T>; 2],
    synthesis_cols: [Stencil<T>; 2],
}

impl<T: Real> Level<T> {
    fn rows_out(&self) -> usize {
        self.analysis_rows[0].out_len()
    }

    fn cols_out(&self) -> usize {
        self.analysis_cols[0].out_len()
    }
}

/// Precomputed transform for one image size, depth and filter set.
#[derive(Clone, Debug)]
pub struct DtcwtPlan<T = f64> {
    height: usize,
    width: usize,
    levels: usize,
    filter_set: String,
    stages: Vec<Level<T>>,
}

struct Plane<'a, T> {
    data: &'a [T],
    rows: usize,
    cols: usize,
}

fn along_rows<T: Real>(s: &Stencil<T>, p: &Plane<'_, T>) -> Vec<T> {
    s.apply(p.data, 1, p.cols)
}

fn along_cols<T: Real>(s: &Stencil<T>, p: &Plane<'_, T>) -> Vec<T> {
    s.apply(p.data, p.rows, 1)
}

fn along_rows_t<T: Real>(s: &Stencil<T>, g: &[T], cols: usize) -> Vec<T> {
    s.apply_transpose(g, 1, cols)
}

fn along_cols_t<T: Real>(s: &Stencil<T>, g: &[T], rows: usize) -> Vec<T> {
    s.apply_transpose(g, rows, 1)
}

fn add_into<T: Real>(acc: &mut [T], v: &[T]) {
    acc.iter_mut().zip(v).for_each(|(a, &b)| *a += b);
}

/// Pairs the four corners of each 2×2 quad into two complex coefficients.
/// Writes subband `slots.0` and `slots.1` of one channel.
fn quads_to_complex<T: Real>(
    y: &[T],
    rows: usize,
    cols: usize,
    band: &mut ComplexTensor<T>,
    channel: usize,
    slots: (usize, usize),
) {
    let (hr, hc) = (rows / 2, cols / 2);
    let plane = hr * hc;
    let s = T::cst(FRAC_1_SQRT_2);
    let o1 = (channel * SUBBANDS + slots.0) * plane;
    let o2 = (channel * SUBBANDS + slots.1) * plane;
    for r in 0..hr {
        for c in 0..hc {
            let a = y[2 * r * cols + 2 * c];
            let b = y[2 * r * cols + 2 * c + 1];
            let cc = y[(2 * r + 1) * cols + 2 * c];
            let d = y[(2 * r + 1) * cols + 2 * c + 1];
            let k = r * hc + c;
            band.re.data_mut()[o1 + k] = (a - d) * s;
            band.im.data_mut()[o1 + k] = (b + cc) * s;
            band.re.data_mut()[o2 + k] = (a + d) * s;
            band.im.data_mut()[o2 + k] = (b - cc) * s;
        }
    }
}

/// Inverse (and transpose) of [`quads_to_complex`].
fn complex_to_quads<T: Real>(
    band: &ComplexTensor<T>,
    channel: usize,
    slots: (usize, usize),
    rows: usize,
    cols: usize,
) -> Vec<T> {
    let (hr, hc) = (rows / 2, cols / 2);
    let plane = hr * hc;
    let s = T::cst(FRAC_1_SQRT_2);
    let o1 = (channel * SUBBANDS + slots.0) * plane;
    let o2 = (channel * SUBBANDS + slots.1) * plane;
    let mut y = vec![T::zero(); rows * cols];
    for r in 0..hr {
        for c in 0..hc {
            let k = r * hc + c;
            let (r1, i1) = (band.re.data()[o1 + k], band.im.data()[o1 + k]);
            let (r2, i2) = (band.re.data()[o2 + k], band.im.data()[o2 + k]);
            y[2 * r * cols + 2 * c] = (r1 + r2) * s;
            y[2 * r * cols + 2 * c + 1] = (i1 + i2) * s;
            y[(2 * r + 1) * cols + 2 * c] = (i1 - i2) * s;
            y[(2 * r + 1) * cols + 2 * c + 1] = (r2 - r1) * s;
        }
    }
    y
}

impl<T: Real> DtcwtPlan<T> {
    /// Plans a `levels`-scale transform of `height × width` images. Both
    /// extents must be divisible by `2^levels`.
    pub fn new(fs: &FilterSet, height: usize, width: usize, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::dim("the transform needs at least one level"));
        }
        let div = 1usize << levels;
        if height == 0 || width == 0 || height % div != 0 || width % div != 0 {
            return Err(Error::dim(format!(
                "{height}×{width} is not divisible by 2^{levels} = {div}"
            )));
        }
        let b = &fs.level1;
        let q = &fs.qshift;
        let mut stages = Vec::with_capacity(levels);
        stages.push(Level {
            rows_in: height,
            cols_in: width,
            analysis_rows: [
                Stencil::filter(height, &b.h0o),
                Stencil::filter(height, &b.h1o),
            ],
            analysis_cols: [
                Stencil::filter(width, &b.h0o),
                Stencil::filter(width, &b.h1o),
            ],
            synthesis_rows: [
                Stencil::filter(height, &b.g0o),
                Stencil::filter(height, &b.g1o),
            ],
            synthesis_cols: [
                Stencil::filter(width, &b.g0o),
                Stencil::filter(width, &b.g1o),
            ],
        });
        let (mut rows, mut cols) = (height, width);
        for _ in 2..=levels {
            stages.push(Level {
                rows_in: rows,
                cols_in: cols,
                analysis_rows: [
                    Stencil::qshift_decimate(rows, &q.h0b, &q.h0a),
                    Stencil::qshift_decimate(rows, &q.h1b, &q.h1a),
                ],
                analysis_cols: [
                    Stencil::qshift_decimate(cols, &q.h0b, &q.h0a),
                    Stencil::qshift_decimate(cols, &q.h1b, &q.h1a),
                ],
                synthesis_rows: [
                    Stencil::qshift_interpolate(rows / 2, &q.g0b, &q.g0a),
                    Stencil::qshift_interpolate(rows / 2, &q.g1b, &q.g1a),
                ],
                synthesis_cols: [
                    Stencil::qshift_interpolate(cols / 2, &q.g0b, &q.g0a),
                    Stencil::qshift_interpolate(cols / 2, &q.g1b, &q.g1a),
                ],
            });
            rows /= 2;
            cols /= 2;
        }
        Ok(Self {
            height,
            width,
            levels,
            filter_set: fs.name.clone(),
            stages,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn filter_set(&self) -> &str {
        &self.filter_set
    }

    fn check_image(&self, x: &Tensor<T>) -> Result<usize> {
        if x.ndim() != 3 || x.shape()[1] != self.height || x.shape()[2] != self.width {
            return Err(Error::dim(format!(
                "expected [C, {}, {}], got {:?}",
                self.height,
                self.width,
                x.shape()
            )));
        }
        Ok(x.shape()[0])
    }

    fn check_pyramid(&self, p: &Pyramid<T>) -> Result<usize> {
        p.validate()?;
        if p.levels != self.levels || p.source_shape != (self.height, self.width) {
            return Err(Error::dim(format!(
                "pyramid ({} levels, {:?}) does not match the plan ({} levels, {:?})",
                p.levels,
                p.source_shape,
                self.levels,
                (self.height, self.width)
            )));
        }
        Ok(p.channels())
    }

    fn empty_pyramid(&self, channels: usize) -> Pyramid<T> {
        Pyramid::zeros(channels, self.height, self.width, self.levels)
    }

    /// Image `[C, H, W]` to pyramid.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Pyramid<T>> {
        let channels = self.check_image(x)?;
        let mut out = self.empty_pyramid(channels);
        let lp_plane = out.lowpass.outer_stride();
        for c in 0..channels {
            let mut cur = x.outer(c).to_vec();
            for (j, lvl) in self.stages.iter().enumerate() {
                let p = Plane {
                    data: &cur,
                    rows: lvl.rows_in,
                    cols: lvl.cols_in,
                };
                let lo = along_rows(&lvl.analysis_rows[0], &p);
                let hi = along_rows(&lvl.analysis_rows[1], &p);
                let (r, k) = (lvl.rows_out(), lvl.cols_in);
                let lo = Plane {
                    data: &lo,
                    rows: r,
                    cols: k,
                };
                let hi = Plane {
                    data: &hi,
                    rows: r,
                    cols: k,
                };
                let band = &mut out.highpass[j];
                let (r, k) = (lvl.rows_out(), lvl.cols_out());
                quads_to_complex(
                    &along_cols(&lvl.analysis_cols[0], &hi),
                    r,
                    k,
                    band,
                    c,
                    HORIZONTAL,
                );
                quads_to_complex(
                    &along_cols(&lvl.analysis_cols[1], &hi),
                    r,
                    k,
                    band,
                    c,
                    DIAGONAL,
                );
                quads_to_complex(
                    &along_cols(&lvl.analysis_cols[1], &lo),
                    r,
                    k,
                    band,
                    c,
                    VERTICAL,
                );
                cur = along_cols(&lvl.analysis_cols[0], &lo);
            }
            out.lowpass.data_mut()[c * lp_plane..(c + 1) * lp_plane].copy_from_slice(&cur);
        }
        if !out.is_finite() {
            return Err(Error::NonFinite("dtcwt_forward"));
        }
        Ok(out)
    }

    /// Pyramid to image `[C, H, W]`.
    pub fn inverse(&self, p: &Pyramid<T>) -> Result<Tensor<T>> {
        let channels = self.check_pyramid(p)?;
        let mut out = Tensor::zeros(&[channels, self.height, self.width]);
        for c in 0..channels {
            let mut z = p.lowpass.outer(c).to_vec();
            for (j, lvl) in self.stages.iter().enumerate().rev() {
                let band = &p.highpass[j];
                let (r, k) = (lvl.rows_out(), lvl.cols_out());
                let horizontal = complex_to_quads(band, c, HORIZONTAL, r, k);
                let diagonal = complex_to_quads(band, c, DIAGONAL, r, k);
                let vertical = complex_to_quads(band, c, VERTICAL, r, k);
                let plane = |d| Plane {
                    data: d,
                    rows: r,
                    cols: k,
                };
                let mut y1 = along_rows(&lvl.synthesis_rows[0], &plane(&z));
                add_into(
                    &mut y1,
                    &along_rows(&lvl.synthesis_rows[1], &plane(&horizontal)),
                );
                let mut y2 = along_rows(&lvl.synthesis_rows[0], &plane(&vertical));
                add_into(
                    &mut y2,
                    &along_rows(&lvl.synthesis_rows[1], &plane(&diagonal)),
                );
                let rows_in = lvl.rows_in;
                let mut next = along_cols(
                    &lvl.synthesis_cols[0],
                    &Plane {
                        data: &y1,
                        rows: rows_in,
                        cols: k,
                    },
                );
                add_into(
                    &mut next,
                    &along_cols(
                        &lvl.synthesis_cols[1],
                        &Plane {
                            data: &y2,
                            rows: rows_in,
                            cols: k,
                        },
                    ),
                );
                z = next;
            }
            out.outer_mut(c).copy_from_slice(&z);
        }
        out.ensure_finite("dtcwt_inverse")
    }

    /// Transpose of [`DtcwtPlan::forward`]: pyramid to image.
    pub fn forward_adjoint(&self, p: &Pyramid<T>) -> Result<Tensor<T>> {
        let channels = self.check_pyramid(p)?;
        let mut out = Tensor::zeros(&[channels, self.height, self.width]);
        for c in 0..channels {
            let mut g = p.lowpass.outer(c).to_vec();
            for (j, lvl) in self.stages.iter().enumerate().rev() {
                let band = &p.highpass[j];
                let (r, k) = (lvl.rows_out(), lvl.cols_out());
                let g_h = complex_to_quads(band, c, HORIZONTAL, r, k);
                let g_d = complex_to_quads(band, c, DIAGONAL, r, k);
                let g_v = complex_to_quads(band, c, VERTICAL, r, k);
                let mut g_hi = along_cols_t(&lvl.analysis_cols[0], &g_h, r);
                add_into(&mut g_hi, &along_cols_t(&lvl.analysis_cols[1], &g_d, r));
                let mut g_lo = along_cols_t(&lvl.analysis_cols[0], &g, r);
                add_into(&mut g_lo, &along_cols_t(&lvl.analysis_cols[1], &g_v, r));
                let cols = lvl.cols_in;
                let mut g_in = along_rows_t(&lvl.analysis_rows[0], &g_lo, cols);
                add_into(&mut g_in, &along_rows_t(&lvl.analysis_rows[1], &g_hi, cols));
                g = g_in;
            }
            out.outer_mut(c).copy_from_slice(&g);
        }
        out.ensure_finite("dtcwt_forward_adjoint")
    }

    /// Transpose of [`DtcwtPlan::inverse`]: image to pyramid.
    pub fn inverse_adjoint(&self, x: &Tensor<T>) -> Result<Pyramid<T>> {
        let channels = self.check_image(x)?;
        let mut out = self.empty_pyramid(channels);
        let lp_plane = out.lowpass.outer_stride();
        for c in 0..channels {
            let mut g = x.outer(c).to_vec();
            for (j, lvl) in self.stages.iter().enumerate() {
                let (r, k) = (lvl.rows_out(), lvl.cols_out());
                let rows_in = lvl.rows_in;
                let g_y1 = along_cols_t(&lvl.synthesis_cols[0], &g, rows_in);
                let g_y2 = along_cols_t(&lvl.synthesis_cols[1], &g, rows_in);
                let g_z = along_rows_t(&lvl.synthesis_rows[0], &g_y1, k);
                let g_h = along_rows_t(&lvl.synthesis_rows[1], &g_y1, k);
                let g_v = along_rows_t(&lvl.synthesis_rows[0], &g_y2, k);
                let g_d = along_rows_t(&lvl.synthesis_rows[1], &g_y2, k);
                let band = &mut out.highpass[j];
                quads_to_complex(&g_h, r, k, band, c, HORIZONTAL);
                quads_to_complex(&g_d, r, k, band, c, DIAGONAL);
                quads_to_complex(&g_v, r, k, band, c, VERTICAL);
                g = g_z;
            }
            out.lowpass.data_mut()[c * lp_plane..(c + 1) * lp_plane].copy_from_slice(&g);
        }
        if !out.is_finite() {
            return Err(Error::NonFinite("dtcwt_inverse_adjoint"));
        }
        Ok(out)
    }

    /// Multiplies spent by one forward transform of one channel.
    pub fn forward_multiplies(&self) -> usize {
        let mut total = 0;
        for lvl in &self.stages {
            let rows: usize = lvl
                .analysis_rows
                .iter()
                .map(|s| s.taps() * s.out_len() * lvl.cols_in)
                .sum();
            let cols: usize = lvl
                .analysis_cols
                .iter()
                .map(|s| 2 * s.taps() * s.out_len() * lvl.rows_out())
                .sum();
            total += rows + cols;
        }
        total
    }

    /// Multiplies spent by one inverse transform of one channel.
    pub fn inverse_multiplies(&self) -> usize {
        let mut total = 0;
        for lvl in &self.stages {
            let rows: usize = lvl
                .synthesis_rows
                .iter()
                .map(|s| 2 * s.taps() * s.out_len() * lvl.cols_out())
                .sum();
            let cols: usize = lvl
                .synthesis_cols
                .iter()
                .map(|s| s.taps() * s.out_len() * lvl.rows_in)
                .sum();
            total += rows + cols;
        }
        total
    }
}

/// Shapes of the pyramid produced for a `[C, H, W]` input.
pub fn output_shapes(
    channels: usize,
    height: usize,
    width: usize,
    levels: usize,
) -> (Vec<usize>, Vec<Vec<usize>>) {
    pyramid_shapes(channels, height, width, levels)
}

/// Forward transform of a `[C, H, W]` tensor.
pub fn dtcwt_forward<T: Real>(x: &Tensor<T>, levels: usize, fs: &FilterSet) -> Result<Pyramid<T>> {
    if x.ndim() != 3 {
        return Err(Error::dim(format!(
            "expected [C, H, W], got {:?}",
            x.shape()
        )));
    }
    DtcwtPlan::new(fs, x.shape()[1], x.shape()[2], levels)?.forward(x)
}

pub fn dtcwt_inverse<T: Real>(p: &Pyramid<T>, fs: &FilterSet) -> Result<Tensor<T>> {
    p.validate()?;
    DtcwtPlan::new(fs, p.source_shape.0, p.source_shape.1, p.levels)?.inverse(p)
}

pub fn dtcwt_forward_adjoint<T: Real>(p: &Pyramid<T>, fs: &FilterSet) -> Result<Tensor<T>> {
    p.validate()?;
    DtcwtPlan::new(fs, p.source_shape.0, p.source_shape.1, p.levels)?.forward_adjoint(p)
}

pub fn dtcwt_inverse_adjoint<T: Real>(
    x: &Tensor<T>,
    levels: usize,
    fs: &FilterSet,
) -> Result<Pyramid<T>> {
    if x.ndim() != 3 {
        return Err(Error::dim(format!(
            "expected [C, H, W], got {:?}",
            x.shape()
        )));
    }
    DtcwtPlan::new(fs, x.shape()[1], x.shape()[2], levels)?.inverse_adjoint(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::transform::load_filter_set;

    fn test_image(h: usize, w: usize) -> Tensor {
        Tensor::from_fn(&[1, h, w], |k| {
            let (r, c) = ((k / w) as f64, (k % w) as f64);
            (0.3 * r + 0.7 * c).sin() + (0.11 * r * c).cos() + 0.05 * r - 0.02 * c
        })
    }

    type Subbands = [(f64, f64); 6];

    struct Golden {
        filters: &'static str,
        shape: (usize, usize, usize),
        lowpass_shape: [usize; 2],
        lowpass_12: f64,
        lowpass_sum: f64,
        /// coefficient (1, 1) of every subband, per scale
        scales: &'static [Subbands],
    }

    // Reference values from an independent implementation of the same
    // transform, evaluated on `test_image`.
    const GOLDEN: [Golden; 3] = [
        Golden {
            filters: "near_sym_a+qshift_a",
            shape: (16, 24, 3),
            lowpass_shape: [4, 6],
            lowpass_12: -0.02484084757425853,
            lowpass_sum: 20.326767880216494,
            scales: &[
                [
                    (0.015495804004668639, 0.06020544357874309),
                    (-0.0008454315912441112, 0.006054970236499774),
                    (0.09843225074040667, 0.18575686742113168),
                    (0.164896017918793, -0.05745632953637804),
                    (0.007096748206201478, -0.0016683904845823869),
                    (0.05287998107296138, 0.005240963260910864),
                ],
                [
                    (0.5289012076756372, 0.8621027021972707),
                    (0.5527642057142188, -0.4630756775956286),
                    (1.3984043608123804, 1.8409759339936778),
                    (0.5418892661438683, -0.8432021291108714),
                    (-0.07540048325494267, -0.022990683470420353),
                    (0.0868501684250729, 0.4569354139174627),
                ],
                [
                    (0.03878760868635138, -0.003264584814095549),
                    (-1.7421290174754605, -0.7936367781820173),
                    (1.453547308118719, 3.8545274164396552),
                    (0.5121224572186848, -0.8509940840406625),
                    (0.26592869423455134, -0.937407369379536),
                    (-0.00593418601113108, 0.09450201431630384),
                ],
            ],
        },
        Golden {
            filters: "near_sym_b+qshift_c",
            shape: (32, 16, 3),
            lowpass_shape: [8, 4],
            lowpass_12: -0.30136894852967266,
            lowpass_sum: 88.18386955924808,
            scales: &[
                [
                    (0.004116653851643429, -0.024699362818867046),
                    (0.0009804424806291788, -0.00034547419415475674),
                    (0.04188232236080432, 0.026799115406660027),
                    (0.032177669900361444, -0.03437217379416646),
                    (-0.0003452180973958917, 0.0005133390201157692),
                    (-0.010634483308307725, -0.0016842914311119665),
                ],
                [
                    (-0.5602771699005455, -0.8061979822913199),
                    (0.7101746737332882, -0.338791523905452),
                    (-1.4530038674605184, -1.769007551411843),
                    (-0.3761549409514712, 0.9779616311350715),
                    (-0.02355123090323119, -0.02263072317291684),
                    (-0.0013886167622284007, -0.4762290253832002),
                ],
                [
                    (-0.1346821196118698, -0.261158422385391),
                    (-0.7865417025606709, -1.1292023968567437),
                    (-1.2501045590990736, -4.070927937050175),
                    (-1.2096093254506428, 0.9941717382627895),
                    (-0.016314408181302142, 0.2333509779919079),
                    (0.4620731794916817, -0.372869482043374),
                ],
            ],
        },
        Golden {
            filters: "legall+qshift_06",
            shape: (16, 16, 2),
            lowpass_shape: [8, 8],
            lowpass_12: -0.4371740064926109,
            lowpass_sum: 39.84795936393947,
            scales: &[
                [
                    (0.008724660704619256, 0.04269396959139435),
                    (-0.00046910608140028317, 0.0026655682327980865),
                    (0.06073303235917887, 0.12211604576558524),
                    (0.10847093122274798, -0.03528146573069701),
                    (0.002977556990162847, -0.0005910285799153915),
                    (0.03735389626261003, 0.00277229998938815),
                ],
                [
                    (0.628467672429603, 1.1304205695918068),
                    (0.7765496541449532, -0.5993882369301946),
                    (1.7282948626906833, 2.1830323245374084),
                    (0.45113523515837584, -1.1415256612283142),
                    (0.12604211346224864, -0.025112855185673577),
                    (0.05682377814335632, 0.5444733396606689),
                ],
            ],
        },
    ];

    #[test]
    fn matches_reference_coefficients() {
        for g in &GOLDEN {
            let fs = load_filter_set(g.filters).unwrap();
            let (h, w, levels) = g.shape;
            let p = dtcwt_forward(&test_image(h, w), levels, &fs).unwrap();
            assert_eq!(&p.lowpass.shape()[1..], &g.lowpass_shape);
            assert!(
                (p.lowpass.get(&[0, 1, 2]) - g.lowpass_12).abs() < 1e-12,
                "{}",
                g.filters
            );
            assert!(
                (p.lowpass.sum() - g.lowpass_sum).abs() < 1e-10,
                "{}",
                g.filters
            );
            for (j, want) in g.scales.iter().enumerate() {
                for (k, &(re, im)) in want.iter().enumerate() {
                    let band = &p.highpass[j];
                    let idx = [0, k, 1, 1];
                    assert!(
                        (band.re.get(&idx) - re).abs() < 1e-12
                            && (band.im.get(&idx) - im).abs() < 1e-12,
                        "{} scale {} subband {k}: ({}, {}) vs ({re}, {im})",
                        g.filters,
                        j + 1,
                        band.re.get(&idx),
                        band.im.get(&idx)
                    );
                }
            }
        }
    }

    #[test]
    fn perfect_reconstruction() {
        let mut rng = SeededRng::new(1);
        for name in [
            "near_sym_a+qshift_a",
            "near_sym_b+qshift_b",
            "legall+qshift_c",
            "near_sym_a+qshift_06",
        ] {
            let fs = load_filter_set(name).unwrap();
            for levels in 1..=3 {
                for (h, w) in [(32, 32), (16, 40), (8, 8)] {
                    let x: Tensor = rng.normal_tensor(&[2, h, w]);
                    let plan = DtcwtPlan::new(&fs, h, w, levels).unwrap();
                    let y = plan.inverse(&plan.forward(&x).unwrap()).unwrap();
                    let err = y.max_abs_diff(&x).unwrap();
                    assert!(err <= 1e-9, "{name} J={levels} {h}x{w}: {err:e}");
                }
            }
        }
    }

    #[test]
    fn adjoint_dot_tests() {
        let fs = FilterSet::default();
        let mut rng = SeededRng::new(2);
        for trial in 0..100 {
            let levels = 1 + trial % 3;
            let (h, w) = [(16, 16), (8, 24), (32, 8)][trial % 3];
            let plan = DtcwtPlan::new(&fs, h, w, levels).unwrap();
            let x: Tensor = rng.normal_tensor(&[2, h, w]);
            let mut y = Pyramid::zeros(2, h, w, levels);
            y.lowpass = rng.normal_tensor(y.lowpass.shape());
            for b in &mut y.highpass {
                b.re = rng.normal_tensor(b.re.shape());
                b.im = rng.normal_tensor(b.im.shape());
            }
            let lhs = plan.forward(&x).unwrap().inner_product(&y).unwrap();
            let rhs = crate::tensor::inner_product(&x, &plan.forward_adjoint(&y).unwrap()).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-11 * lhs.abs().max(1.0),
                "forward: {lhs} vs {rhs}"
            );
            let lhs = crate::tensor::inner_product(&plan.inverse(&y).unwrap(), &x).unwrap();
            let rhs = y.inner_product(&plan.inverse_adjoint(&x).unwrap()).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-11 * lhs.abs().max(1.0),
                "inverse: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn linearity() {
        let fs = FilterSet::default();
        let mut rng = SeededRng::new(3);
        let plan = DtcwtPlan::new(&fs, 16, 16, 2).unwrap();
        let a: Tensor = rng.normal_tensor(&[1, 16, 16]);
        let b: Tensor = rng.normal_tensor(&[1, 16, 16]);
        let mut mix = a.scale(2.5);
        mix.axpy(-0.75, &b).unwrap();
        let mut want = plan.forward(&a).unwrap().scale(2.5);
        want.axpy(-0.75, &plan.forward(&b).unwrap()).unwrap();
        assert!(plan.forward(&mix).unwrap().max_abs_diff(&want).unwrap() < 1e-12);
    }

    #[test]
    fn constant_image_has_no_highpass() {
        let x = Tensor::full(&[1, 32, 32], 3.0);
        for name in [
            "near_sym_a+qshift_06",
            "near_sym_b+qshift_06",
            "legall+qshift_06",
        ] {
            let p = dtcwt_forward(&x, 3, &load_filter_set(name).unwrap()).unwrap();
            for band in &p.highpass {
                assert!(band.max_abs() <= 1e-10, "{name}");
            }
            // each q-shift level scales DC by √2 per axis
            assert!(
                p.lowpass
                    .data()
                    .iter()
                    .all(|v: &f64| (v - 12.0).abs() < 1e-10),
                "{name}"
            );
        }
    }

    #[test]
    fn qshift_dc_leakage_is_bounded_by_the_filters() {
        // The longer q-shift designs only approximate a zero at DC, so a
        // constant leaks into the coarse bands in proportion to Σh1.
        let x = Tensor::full(&[1, 32, 32], 3.0);
        for name in [
            "near_sym_a+qshift_a",
            "near_sym_a+qshift_b",
            "near_sym_a+qshift_c",
        ] {
            let fs = load_filter_set(name).unwrap();
            let leak: f64 = fs.qshift.h1a.iter().sum::<f64>().abs();
            let p = dtcwt_forward(&x, 3, &fs).unwrap();
            assert!(p.highpass[0].max_abs() <= 1e-10, "{name}");
            for band in &p.highpass[1..] {
                assert!(
                    band.max_abs() <= 3.0 * 4.0 * leak + 1e-10,
                    "{name}: {}",
                    band.max_abs()
                );
            }
        }
    }

    #[test]
    fn impulse_response_is_local() {
        let fs = FilterSet::default();
        let plan = DtcwtPlan::new(&fs, 64, 64, 2).unwrap();
        for scale in 1..=2 {
            let mut p = Pyramid::zeros(1, 64, 64, 2);
            let n = 64 >> scale;
            p.highpass[scale - 1].re.set(&[0, 1, n / 2, n / 2], 1.0);
            let y = plan.inverse(&p).unwrap();
            let (cr, cc) = ((n / 2) << scale, (n / 2) << scale);
            let half = if scale == 1 { 8 } else { 16 };
            for r in 0..64usize {
                for c in 0..64usize {
                    if r.abs_diff(cr) > half || c.abs_diff(cc) > half {
                        assert_eq!(y.get(&[0, r, c]), 0.0, "scale {scale} ({r}, {c})");
                    }
                }
            }
        }
    }

    /// Fraction of highpass energy landing in `subband` at `scale` for a real
    /// sinusoid whose stripes run at `orientation` degrees.
    fn sinusoid_share(orientation: f64, omega: f64, scale: usize, subband: usize) -> f64 {
        let fs = FilterSet::default();
        let t = (orientation + 90.0).to_radians();
        let x = Tensor::from_fn(&[1, 64, 64], |k| {
            let (r, c) = ((k / 64) as f64, (k % 64) as f64);
            (omega * (c * t.cos() - r * t.sin())).cos()
        });
        let p = dtcwt_forward(&x, 3, &fs).unwrap();
        let total: f64 = (0..6).map(|s| p.subband_energy(scale, s)).sum();
        p.subband_energy(scale, subband) / total
    }

    #[test]
    fn sinusoids_select_their_subband() {
        use std::f64::consts::PI;
        // Real sinusoids leak into the mirror orientation, so the target band
        // holds a clear majority rather than all of the energy.
        for (k, &deg) in crate::transform::ORIENTATIONS_DEG.iter().enumerate() {
            let share = sinusoid_share(deg, 0.5 * PI, 2, k);
            let others = (0..6)
                .filter(|&s| s != k)
                .map(|s| sinusoid_share(deg, 0.5 * PI, 2, s));
            assert!(share >= 0.4, "{deg}°: {share}");
            for o in others {
                assert!(share > o, "{deg}°: {share} <= {o}");
            }
        }
    }

    #[test]
    fn rejects_indivisible_sizes() {
        let fs = FilterSet::default();
        assert!(DtcwtPlan::<f64>::new(&fs, 12, 16, 3).is_err());
        assert!(DtcwtPlan::<f64>::new(&fs, 16, 16, 0).is_err());
        let plan = DtcwtPlan::<f64>::new(&fs, 16, 16, 2).unwrap();
        assert!(plan.forward(&Tensor::zeros(&[1, 16, 8])).is_err());
        assert!(plan.inverse(&Pyramid::zeros(1, 16, 16, 1)).is_err());
    }

    #[test]
    fn single_precision_tracks_double() {
        let fs = FilterSet::default();
        let x = test_image(16, 16);
        let p64 = dtcwt_forward(&x, 2, &fs).unwrap();
        let p32 = dtcwt_forward(&x.cast::<f32>(), 2, &fs).unwrap();
        assert!(
            (p32.lowpass
                .cast::<f64>()
                .max_abs_diff(&p64.lowpass)
                .unwrap())
                < 1e-5
        );
        let back = dtcwt_inverse(&p32, &fs).unwrap().cast::<f64>();
        assert!(back.max_abs_diff(&x).unwrap() < 1e-5);
    }
}
