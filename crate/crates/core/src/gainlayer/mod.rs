//! Learnable complex gains applied in the wavelet domain.
//!
//! A gain layer maps `x: [N, C, H, W]` to `y: [N, F, H, W]` by transforming
//! every input channel, mixing the channels of each subband with a complex
//! gain and the lowpass with a small real kernel, and inverting the
//! transform for every output channel. The layer is linear in both `x` and
//! the gains, so its backward pass is built from the transform adjoints and
//! the transposed mixing.

mod analysis;
mod layer;
mod params;

pub use analysis::{
    annulus_energy_fraction, box_energy_fraction, build_dense_operator, corr_dof, dof_from_vectors,
    impulse_response, impulse_responses, power_spectrum, random_shape_gains, random_shapes,
    subband_region_fraction, white_noise_dof, DofEstimate, DENSE_OPERATOR_LIMIT, SHAPE_GRID,
};
pub use layer::{gain_backward, gain_forward, padded_extent, GainCache, GainLayer};
pub use params::{gain_init, random_scale_gains, GainParams, InitRecord, InitScheme};
