//! Runs the code blocks of the guide in `book/src` as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/transform.md")]
pub mod transform {}

#[doc = include_str!("../../../book/src/gain-layer.md")]
pub mod gain_layer {}

#[doc = include_str!("../../../book/src/shapes.md")]
pub mod shapes {}

#[doc = include_str!("../../../book/src/cost.md")]
pub mod cost {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
