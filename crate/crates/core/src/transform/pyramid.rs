use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::npy;
use crate::tensor::{ComplexTensor, Real, Tensor};

/// Number of oriented subbands per scale.
pub const SUBBANDS: usize = 6;

/// Subband orientations in degrees, in storage order.
pub const ORIENTATIONS_DEG: [f64; SUBBANDS] = [15.0, 45.0, 75.0, 105.0, 135.0, 165.0];

/// Coefficients of a `levels`-scale 2-D dual-tree transform of a
/// `[C, H, W]` tensor.
///
/// * `highpass[j - 1]` holds scale `j`: `[C, 6, H / 2^j, W / 2^j]`.
/// * `lowpass` is the interleaved four-tree lowpass, `[C, H / 2^(J-1), W / 2^(J-1)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pyramid<T = f64> {
    pub lowpass: Tensor<T>,
    pub highpass: Vec<ComplexTensor<T>>,
    pub levels: usize,
    pub source_shape: (usize, usize),
}

/// Expected shapes `(lowpass, [highpass per scale])` for a source tensor.
pub fn pyramid_shapes(
    channels: usize,
    h: usize,
    w: usize,
    levels: usize,
) -> (Vec<usize>, Vec<Vec<usize>>) {
    let lp_div = 1 << (levels.max(1) - 1);
    let lowpass = vec![channels, h / lp_div, w / lp_div];
    let highpass = (1..=levels)
        .map(|j| vec![channels, SUBBANDS, h >> j, w >> j])
        .collect();
    (lowpass, highpass)
}

impl<T: Real> Pyramid<T> {
    pub fn zeros(channels: usize, h: usize, w: usize, levels: usize) -> Self {
        let (lp, hp) = pyramid_shapes(channels, h, w, levels);
        Self {
            lowpass: Tensor::zeros(&lp),
            highpass: hp.iter().map(|s| ComplexTensor::zeros(s)).collect(),
            levels,
            source_shape: (h, w),
        }
    }

    pub fn channels(&self) -> usize {
        self.lowpass.shape()[0]
    }

    /// Checks every plane against the shapes implied by `source_shape`.
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.highpass.len() != self.levels {
            return Err(Error::dim(format!(
                "pyramid declares {} levels but holds {} highpass scales",
                self.levels,
                self.highpass.len()
            )));
        }
        if self.lowpass.ndim() != 3 {
            return Err(Error::dim("pyramid lowpass must be [C, H, W]"));
        }
        let (h, w) = self.source_shape;
        let (lp, hp) = pyramid_shapes(self.channels(), h, w, self.levels);
        if self.lowpass.shape() != lp.as_slice() {
            return Err(Error::dim(format!(
                "lowpass shape {:?}, expected {lp:?}",
                self.lowpass.shape()
            )));
        }
        for (j, (band, want)) in self.highpass.iter().zip(&hp).enumerate() {
            if band.shape() != want.as_slice() || band.im.shape() != want.as_slice() {
                return Err(Error::dim(format!(
                    "scale {} shape {:?}, expected {want:?}",
                    j + 1,
                    band.shape()
                )));
            }
        }
        Ok(())
    }

    /// Real inner product over the lowpass and both planes of every scale.
    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        if self.levels != other.levels {
            return Err(Error::dim("pyramids have different depths"));
        }
        let mut acc = crate::tensor::inner_product(&self.lowpass, &other.lowpass)?;
        for (a, b) in self.highpass.iter().zip(&other.highpass) {
            acc += crate::tensor::inner_product(&a.re, &b.re)?;
            acc += crate::tensor::inner_product(&a.im, &b.im)?;
        }
        Ok(acc)
    }

    pub fn scale(&self, alpha: T) -> Self {
        Self {
            lowpass: self.lowpass.scale(alpha),
            highpass: self.highpass.iter().map(|b| b.scale(alpha)).collect(),
            levels: self.levels,
            source_shape: self.source_shape,
        }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: T, other: &Self) -> Result<()> {
        self.lowpass.axpy(alpha, &other.lowpass)?;
        for (a, b) in self.highpass.iter_mut().zip(&other.highpass) {
            a.axpy(alpha, b)?;
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.inner_product(self).unwrap_or(f64::NAN).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.highpass
            .iter()
            .fold(self.lowpass.max_abs(), |m, b| m.max(b.max_abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        let mut m = self.lowpass.max_abs_diff(&other.lowpass)?;
        for (a, b) in self.highpass.iter().zip(&other.highpass) {
            m = m
                .max(a.re.max_abs_diff(&b.re)?)
                .max(a.im.max_abs_diff(&b.im)?);
        }
        Ok(m)
    }

    /// Total squared magnitude of the highpass coefficients.
    pub fn highpass_energy(&self) -> f64 {
        self.highpass.iter().map(|b| b.energy().sum()).sum()
    }

    /// Energy of one subband at scale `scale` (1-based), all channels.
    pub fn subband_energy(&self, scale: usize, subband: usize) -> f64 {
        let band = &self.highpass[scale - 1];
        let shape = band.shape();
        let plane = shape[2] * shape[3];
        let mut e = 0.0;
        for c in 0..shape[0] {
            let off = (c * SUBBANDS + subband) * plane;
            for k in off..off + plane {
                let (r, i) = (band.re.data()[k].as_f64(), band.im.data()[k].as_f64());
                e += r * r + i * i;
            }
        }
        e
    }

    pub fn is_finite(&self) -> bool {
        self.lowpass.is_finite() && self.highpass.iter().all(ComplexTensor::is_finite)
    }

    /// Writes `lowpass.npy`, `scale{j}.re.npy`, `scale{j}.im.npy` and
    /// `manifest.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, filter_set: &str) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        npy::save(&self.lowpass, dir.join("lowpass.npy"))?;
        for (j, band) in self.highpass.iter().enumerate() {
            npy::save_complex(band, dir.join(format!("scale{}", j + 1)))?;
        }
        let manifest = PyramidManifest {
            levels: self.levels,
            source_shape: [self.source_shape.0, self.source_shape.1],
            lowpass_shape: self.lowpass.shape().to_vec(),
            highpass_shapes: self.highpass.iter().map(|b| b.shape().to_vec()).collect(),
            filter_set: filter_set.to_owned(),
            orientations_deg: ORIENTATIONS_DEG.to_vec(),
            dtype: T::NAME.to_owned(),
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    /// Reads a pyramid written by [`Pyramid::save`], returning it with the
    /// filter-set name recorded in the manifest.
    pub fn load(dir: impl AsRef<Path>) -> Result<(Self, String)> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: PyramidManifest = serde_json::from_str(&text)?;
        let lowpass = npy::load(dir.join("lowpass.npy"))?;
        let highpass = (1..=manifest.levels)
            .map(|j| npy::load_complex(dir.join(format!("scale{j}"))))
            .collect::<Result<Vec<_>>>()?;
        let p = Self {
            lowpass,
            highpass,
            levels: manifest.levels,
            source_shape: (manifest.source_shape[0], manifest.source_shape[1]),
        };
        p.validate()
            .map_err(|e| Error::format(&path, e.to_string()))?;
        Ok((p, manifest.filter_set))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PyramidManifest {
    levels: usize,
    source_shape: [usize; 2],
    lowpass_shape: Vec<usize>,
    highpass_shapes: Vec<Vec<usize>>,
    filter_set: String,
    orientations_deg: Vec<f64>,
    dtype: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn shapes_halve_per_scale() {
        let (lp, hp) = pyramid_shapes(3, 32, 16, 3);
        assert_eq!(lp, vec![3, 8, 4]);
        assert_eq!(
            hp,
            vec![vec![3, 6, 16, 8], vec![3, 6, 8, 4], vec![3, 6, 4, 2]]
        );
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = SeededRng::new(8);
        let mut p = Pyramid::<f64>::zeros(2, 16, 16, 2);
        p.lowpass = rng.normal_tensor(p.lowpass.shape());
        for b in &mut p.highpass {
            b.re = rng.normal_tensor(b.re.shape());
            b.im = rng.normal_tensor(b.im.shape());
        }
        p.save(dir.path(), "near_sym_a+qshift_a").unwrap();
        for f in [
            "lowpass.npy",
            "scale1.re.npy",
            "scale2.im.npy",
            "manifest.json",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let (back, name) = Pyramid::<f64>::load(dir.path()).unwrap();
        assert_eq!(back, p);
        assert_eq!(name, "near_sym_a+qshift_a");
    }

    #[test]
    fn malformed_shapes_are_rejected() {
        let mut p = Pyramid::<f64>::zeros(1, 8, 8, 2);
        p.highpass.pop();
        assert!(p.validate().is_err());
        let mut p = Pyramid::<f64>::zeros(1, 8, 8, 2);
        p.lowpass = Tensor::zeros(&[1, 2, 2]);
        assert!(p.validate().is_err());
    }
}
