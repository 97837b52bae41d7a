//! The chapters of `book/` compiled as doc-tests, so every snippet in the
//! guide runs against the current library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/spectral.md")]
pub mod spectral {}

#[doc = include_str!("../../../book/src/littlewood_paley.md")]
pub mod littlewood_paley {}

#[doc = include_str!("../../../book/src/bony.md")]
pub mod bony {}

#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}

#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/file_formats.md")]
pub mod file_formats {}
