use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::npy;
use crate::rng::SeededRng;
use crate::tensor::{ComplexTensor, Real, Tensor};
use crate::transform::SUBBANDS;

/// How [`gain_init`] draws the gains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// every real component ~ N(0, 1)
    UnitNormal,
    /// every real component ~ N(0, 2 / ((C + F) · fan)), where `fan` is the
    /// number of taps per (f, c) pair: `6·kh·kw` for the subbands and
    /// `klp²` for the lowpass
    GlorotLike,
    Zeros,
}

impl std::str::FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit-normal" => Ok(Self::UnitNormal),
            "glorot-like" => Ok(Self::GlorotLike),
            "zeros" => Ok(Self::Zeros),
            _ => Err(Error::config(format!(
                "unknown init scheme '{s}' (expected unit-normal, glorot-like or zeros)"
            ))),
        }
    }
}

/// Where a parameter set came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitRecord {
    pub scheme: String,
    pub seed: Option<u64>,
}

/// Learnable weights of one gain layer.
///
/// * `g_hp[j - 1]`: complex gains for scale `j`, `[F, C, 6, kh, kw]`.
/// * `g_lp`: real lowpass gain, `[F, C, klp, klp]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GainParams<T = f64> {
    pub g_hp: Vec<ComplexTensor<T>>,
    pub g_lp: Tensor<T>,
    pub levels: usize,
    pub filter_set: String,
    pub init: InitRecord,
}

impl<T: Real> GainParams<T> {
    /// All-zero gains with `kh = kw = gain_size` at every scale.
    pub fn zeros(
        out_channels: usize,
        in_channels: usize,
        levels: usize,
        gain_size: usize,
        lowpass_size: usize,
        filter_set: &str,
    ) -> Self {
        let hp = [out_channels, in_channels, SUBBANDS, gain_size, gain_size];
        Self {
            g_hp: (0..levels).map(|_| ComplexTensor::zeros(&hp)).collect(),
            g_lp: Tensor::zeros(&[out_channels, in_channels, lowpass_size, lowpass_size]),
            levels,
            filter_set: filter_set.to_owned(),
            init: InitRecord {
                scheme: "zeros".into(),
                seed: None,
            },
        }
    }

    /// Unit gains from input channel `c` to output channel `c` and a centred
    /// lowpass delta, so the layer reproduces its input.
    pub fn identity(channels: usize, levels: usize, lowpass_size: usize, filter_set: &str) -> Self {
        let mut p = Self::zeros(channels, channels, levels, 1, lowpass_size, filter_set);
        let mid = lowpass_size / 2;
        for c in 0..channels {
            for band in &mut p.g_hp {
                for s in 0..SUBBANDS {
                    band.re.set(&[c, c, s, 0, 0], T::one());
                }
            }
            p.g_lp.set(&[c, c, mid, mid], T::one());
        }
        p.init.scheme = "identity".into();
        p
    }

    pub fn out_channels(&self) -> usize {
        self.g_lp.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.g_lp.shape()[1]
    }

    pub fn lowpass_size(&self) -> usize {
        self.g_lp.shape()[2]
    }

    /// `(kh, kw)` of the subband gains at scale `j` (1-based).
    pub fn gain_size(&self, scale: usize) -> (usize, usize) {
        let s = self.g_hp[scale - 1].shape();
        (s[3], s[4])
    }

    /// Number of stored real scalars.
    pub fn parameter_count(&self) -> usize {
        self.g_hp.iter().map(|b| 2 * b.len()).sum::<usize>() + self.g_lp.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.g_hp.len() != self.levels {
            return Err(Error::dim(format!(
                "gain parameters declare {} levels but hold {} scales",
                self.levels,
                self.g_hp.len()
            )));
        }
        let lp = self.g_lp.shape();
        if lp.len() != 4 || lp[2] != lp[3] || lp[2] % 2 == 0 {
            return Err(Error::dim(format!(
                "lowpass gain must be [F, C, k, k] with k odd, got {lp:?}"
            )));
        }
        for (j, band) in self.g_hp.iter().enumerate() {
            let s = band.shape();
            if s.len() != 5
                || s[0] != lp[0]
                || s[1] != lp[1]
                || s[2] != SUBBANDS
                || s[3] % 2 == 0
                || s[4] % 2 == 0
            {
                return Err(Error::dim(format!(
                    "scale {} gain must be [{}, {}, 6, kh, kw] with odd kh, kw, got {s:?}",
                    j + 1,
                    lp[0],
                    lp[1]
                )));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.g_lp.is_finite() && self.g_hp.iter().all(ComplexTensor::is_finite)
    }

    /// Real planes in a fixed order: each scale's re then im, then the lowpass.
    pub fn planes(&self) -> Vec<&Tensor<T>> {
        let mut v: Vec<&Tensor<T>> = Vec::with_capacity(2 * self.levels + 1);
        for b in &self.g_hp {
            v.push(&b.re);
            v.push(&b.im);
        }
        v.push(&self.g_lp);
        v
    }

    /// Mutable counterpart of [`GainParams::planes`].
    pub fn planes_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v: Vec<&mut Tensor<T>> = Vec::with_capacity(2 * self.levels + 1);
        for b in &mut self.g_hp {
            v.push(&mut b.re);
            v.push(&mut b.im);
        }
        v.push(&mut self.g_lp);
        v
    }

    /// Zero-valued parameters of the same shapes.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for p in z.planes_mut() {
            p.fill(T::zero());
        }
        z.init = InitRecord {
            scheme: "zeros".into(),
            seed: None,
        };
        z
    }

    pub fn cast<U: Real>(&self) -> GainParams<U> {
        GainParams {
            g_hp: self
                .g_hp
                .iter()
                .map(|b| ComplexTensor {
                    re: b.re.cast(),
                    im: b.im.cast(),
                })
                .collect(),
            g_lp: self.g_lp.cast(),
            levels: self.levels,
            filter_set: self.filter_set.clone(),
            init: self.init.clone(),
        }
    }

    /// Writes `g_hp{j}.re.npy`, `g_hp{j}.im.npy`, `g_lp.npy` and
    /// `manifest.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (j, band) in self.g_hp.iter().enumerate() {
            npy::save_complex(band, dir.join(format!("g_hp{}", j + 1)))?;
        }
        npy::save(&self.g_lp, dir.join("g_lp.npy"))?;
        let (kh, kw) = self.gain_size(1);
        let manifest = GainManifest {
            out_channels: self.out_channels(),
            in_channels: self.in_channels(),
            levels: self.levels,
            lowpass_size: self.lowpass_size(),
            gain_size: [kh, kw],
            filter_set: self.filter_set.clone(),
            init_scheme: self.init.scheme.clone(),
            seed: self.init.seed,
            parameter_count: self.parameter_count(),
            dtype: T::NAME.to_owned(),
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: GainManifest = serde_json::from_str(&text)?;
        let g_hp = (1..=m.levels)
            .map(|j| npy::load_complex(dir.join(format!("g_hp{j}"))))
            .collect::<Result<Vec<_>>>()?;
        let p = Self {
            g_hp,
            g_lp: npy::load(dir.join("g_lp.npy"))?,
            levels: m.levels,
            filter_set: m.filter_set,
            init: InitRecord {
                scheme: m.init_scheme,
                seed: m.seed,
            },
        };
        p.validate()
            .map_err(|e| Error::format(&path, e.to_string()))?;
        if p.out_channels() != m.out_channels || p.in_channels() != m.in_channels {
            return Err(Error::format(
                &path,
                "channel counts disagree with the stored arrays",
            ));
        }
        Ok(p)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GainManifest {
    out_channels: usize,
    in_channels: usize,
    levels: usize,
    lowpass_size: usize,
    gain_size: [usize; 2],
    filter_set: String,
    init_scheme: String,
    seed: Option<u64>,
    parameter_count: usize,
    dtype: String,
}

/// Draws gains with 1×1 subband taps and a `klp × klp` lowpass.
///
/// ```
/// use wavegain::gainlayer::{gain_init, InitScheme};
/// let p = gain_init::<f64>(6, 3, 1, 3, 0, InitScheme::GlorotLike, "near_sym_a+qshift_a").unwrap();
/// assert_eq!(p.parameter_count(), 21 * 6 * 3);
/// ```
pub fn gain_init<T: Real>(
    out_channels: usize,
    in_channels: usize,
    levels: usize,
    lowpass_size: usize,
    seed: u64,
    scheme: InitScheme,
    filter_set: &str,
) -> Result<GainParams<T>> {
    if out_channels == 0 || in_channels == 0 || levels == 0 {
        return Err(Error::config("gain layers need F, C and J of at least 1"));
    }
    if lowpass_size % 2 == 0 {
        return Err(Error::config(format!(
            "lowpass gain size must be odd, got {lowpass_size}"
        )));
    }
    let mut p = GainParams::zeros(
        out_channels,
        in_channels,
        levels,
        1,
        lowpass_size,
        filter_set,
    );
    let mut rng = SeededRng::new(seed);
    let fan_sum = (in_channels + out_channels) as f64;
    let (hp_std, lp_std) = match scheme {
        InitScheme::UnitNormal => (1.0, 1.0),
        InitScheme::GlorotLike => (
            (2.0 / (fan_sum * SUBBANDS as f64)).sqrt(),
            (2.0 / (fan_sum * (lowpass_size * lowpass_size) as f64)).sqrt(),
        ),
        InitScheme::Zeros => (0.0, 0.0),
    };
    if scheme != InitScheme::Zeros {
        for band in &mut p.g_hp {
            band.re = rng.normal_tensor_std(band.re.shape(), hp_std);
            band.im = rng.normal_tensor_std(band.im.shape(), hp_std);
        }
        p.g_lp = rng.normal_tensor_std(p.g_lp.shape(), lp_std);
    }
    p.init = InitRecord {
        scheme: serde_json::to_value(scheme)?
            .as_str()
            .unwrap_or_default()
            .to_owned(),
        seed: Some(seed),
    };
    Ok(p)
}

/// Gains that are zero everywhere except scale `scale`, whose real and
/// imaginary parts are unit normal: twelve random numbers per (f, c) pair.
pub fn random_scale_gains<T: Real>(
    out_channels: usize,
    in_channels: usize,
    levels: usize,
    scale: usize,
    seed: u64,
    filter_set: &str,
) -> Result<GainParams<T>> {
    if scale == 0 || scale > levels {
        return Err(Error::config(format!("scale {scale} outside 1..={levels}")));
    }
    let mut p = GainParams::zeros(out_channels, in_channels, levels, 1, 1, filter_set);
    let mut rng = SeededRng::new(seed);
    let band = &mut p.g_hp[scale - 1];
    band.re = rng.normal_tensor(band.re.shape());
    band.im = rng.normal_tensor(band.im.shape());
    p.init = InitRecord {
        scheme: format!("unit-normal-scale{scale}"),
        seed: Some(seed),
    };
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: &str = "near_sym_a+qshift_a";

    #[test]
    fn same_seed_same_parameters() {
        for scheme in [InitScheme::UnitNormal, InitScheme::GlorotLike] {
            let a = gain_init::<f64>(4, 3, 2, 3, 11, scheme, FS).unwrap();
            let b = gain_init::<f64>(4, 3, 2, 3, 11, scheme, FS).unwrap();
            assert_eq!(a, b);
            let c = gain_init::<f64>(4, 3, 2, 3, 12, scheme, FS).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn parameter_count_for_one_level() {
        for (f, c) in [(1, 1), (6, 3), (16, 6)] {
            let p = gain_init::<f32>(f, c, 1, 3, 0, InitScheme::GlorotLike, FS).unwrap();
            assert_eq!(p.parameter_count(), 21 * f * c);
        }
    }

    #[test]
    fn glorot_variance() {
        let p = gain_init::<f64>(40, 24, 1, 3, 5, InitScheme::GlorotLike, FS).unwrap();
        let x = &p.g_hp[0].re;
        let var = x.data().iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let want = 2.0 / (64.0 * 6.0);
        assert!((var / want - 1.0).abs() < 0.1, "{var} vs {want}");
    }

    #[test]
    fn zeros_scheme() {
        let p = gain_init::<f64>(2, 2, 2, 3, 0, InitScheme::Zeros, FS).unwrap();
        assert!(p.planes().iter().all(|t| t.max_abs() == 0.0));
        assert_eq!(p.init.scheme, "zeros");
    }

    #[test]
    fn random_scale_has_twelve_numbers_per_pair() {
        let p = random_scale_gains::<f64>(1, 1, 2, 2, 3, FS).unwrap();
        assert_eq!(p.g_hp[0].max_abs(), 0.0);
        assert_eq!(p.g_lp.max_abs(), 0.0);
        let nonzero = p.g_hp[1]
            .re
            .data()
            .iter()
            .chain(p.g_hp[1].im.data())
            .filter(|v| **v != 0.0)
            .count();
        assert_eq!(nonzero, 12);
    }

    #[test]
    fn scheme_names_parse() {
        assert_eq!(
            "glorot-like".parse::<InitScheme>().unwrap(),
            InitScheme::GlorotLike
        );
        assert!("he".parse::<InitScheme>().is_err());
        let p = gain_init::<f64>(1, 1, 1, 3, 0, InitScheme::UnitNormal, FS).unwrap();
        assert_eq!(p.init.scheme, "unit-normal");
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = gain_init::<f64>(3, 2, 2, 3, 4, InitScheme::UnitNormal, FS).unwrap();
        p.save(dir.path()).unwrap();
        assert_eq!(GainParams::<f64>::load(dir.path()).unwrap(), p);
        let m: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("manifest.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(m["seed"], 4);
        assert_eq!(m["levels"], 2);
    }

    #[test]
    fn even_sizes_are_rejected() {
        assert!(gain_init::<f64>(1, 1, 1, 2, 0, InitScheme::Zeros, FS).is_err());
        let mut p = GainParams::<f64>::zeros(1, 1, 1, 1, 3, FS);
        p.g_hp[0] = ComplexTensor::zeros(&[1, 1, 6, 2, 2]);
        assert!(p.validate().is_err());
    }
}
