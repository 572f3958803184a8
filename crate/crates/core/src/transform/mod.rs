//! Filters, multirate stages and the 2-D dual-tree complex wavelet transform.

mod cost;
mod dtcwt;
mod filters;
pub mod multirate;
mod pyramid;
mod stencil;
mod tables;

pub use cost::{mac_count, transform_macs, LayerCostSpec, LayerMacs, TransformMacs};
pub use dtcwt::{
    dtcwt_forward, dtcwt_forward_adjoint, dtcwt_inverse, dtcwt_inverse_adjoint, output_shapes,
    DtcwtPlan,
};
pub use filters::{
    load_filter_set, BiorthogonalFilters, FilterSet, QshiftFilters, DEFAULT_LEVEL1, DEFAULT_QSHIFT,
    LEVEL1_NAMES, QSHIFT_NAMES, STAGE_PR_TOLERANCE,
};
pub use pyramid::{pyramid_shapes, Pyramid, ORIENTATIONS_DEG, SUBBANDS};
pub use stencil::reflect;
pub(crate) use stencil::Stencil;
