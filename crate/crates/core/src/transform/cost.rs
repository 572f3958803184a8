//! Multiply counts derived from filter lengths and decimation factors.

use super::filters::FilterSet;

/// Multiplies per image pixel for one channel.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TransformMacs {
    pub forward: f64,
    pub inverse: f64,
}

/// Counts the multiplies of a `levels`-scale transform.
///
/// Level 1 filters every row and column of the full image: the row pass
/// runs both filters once, the column pass runs both filters on both row
/// outputs. Each q-shift level halves the extent along the filtered axis,
/// so with filters of length `m` it spends `m / 2` multiplies per input
/// sample per filter, and its input is a quarter the size of the previous
/// level's.
///
/// ```
/// use wavegain::transform::{transform_macs, FilterSet};
/// let macs = transform_macs(&FilterSet::default(), 2);
/// assert_eq!(macs.forward, 56.0);
/// ```
pub fn transform_macs(fs: &FilterSet, levels: usize) -> TransformMacs {
    let b = &fs.level1;
    let q = &fs.qshift;
    let mut forward = 0.0;
    let mut inverse = 0.0;
    if levels >= 1 {
        let analysis = (b.h0o.len() + b.h1o.len()) as f64;
        let synthesis = (b.g0o.len() + b.g1o.len()) as f64;
        forward += 3.0 * analysis;
        inverse += 3.0 * synthesis;
    }
    let mut area = 1.0;
    for _ in 2..=levels {
        let analysis = (q.h0a.len() + q.h1a.len()) as f64 / 2.0;
        let synthesis = (q.g0a.len() + q.g1a.len()) as f64 / 2.0;
        forward += 2.0 * analysis * area;
        inverse += 2.0 * synthesis * area;
        area /= 4.0;
    }
    TransformMacs { forward, inverse }
}

/// Shape of a gain layer and of the convolution it replaces.
#[derive(Clone, Debug)]
pub struct LayerCostSpec {
    pub channels_in: usize,
    pub channels_out: usize,
    pub levels: usize,
    /// spatial size of each complex subband gain (square)
    pub gain_size: usize,
    /// spatial size of the real lowpass gain (square)
    pub lowpass_size: usize,
    /// kernel size of the reference convolution
    pub kernel: usize,
    pub filter_set: FilterSet,
}

/// Multiplies per input pixel of a gain layer against a `K×K` convolution.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct LayerMacs {
    /// forward transform of one input channel
    pub forward_overhead: f64,
    /// inverse transform of one output channel
    pub inverse_overhead: f64,
    /// subband and lowpass mixing, per input channel pixel
    pub mixing: f64,
    /// `K²F`
    pub conv_equivalent: f64,
}

/// Analytic multiply counts for a gain layer.
///
/// Every complex gain tap costs four real multiplies. Scale `j` holds
/// `6 / 4^j` complex coefficients per pixel, the lowpass `1 / 4^(J-1)`.
///
/// ```
/// use wavegain::transform::{mac_count, FilterSet, LayerCostSpec};
/// let spec = LayerCostSpec {
///     channels_in: 3,
///     channels_out: 6,
///     levels: 1,
///     gain_size: 1,
///     lowpass_size: 3,
///     kernel: 5,
///     filter_set: FilterSet::default(),
/// };
/// let macs = mac_count(&spec);
/// assert_eq!(macs.conv_equivalent, 150.0);
/// assert_eq!(macs.mixing, 15.0 * 6.0);
/// ```
pub fn mac_count(spec: &LayerCostSpec) -> LayerMacs {
    let t = transform_macs(&spec.filter_set, spec.levels);
    let f = spec.channels_out as f64;
    let taps = (spec.gain_size * spec.gain_size) as f64;
    let mut mixing = 0.0;
    let mut density = 1.0;
    for _ in 1..=spec.levels {
        density /= 4.0;
        mixing += 6.0 * 4.0 * taps * f * density;
    }
    let lp_density = 4.0 * density;
    mixing += (spec.lowpass_size * spec.lowpass_size) as f64 * f * lp_density;
    LayerMacs {
        forward_overhead: t.forward,
        inverse_overhead: t.inverse,
        mixing,
        conv_equivalent: (spec.kernel * spec.kernel) as f64 * f,
    }
}
