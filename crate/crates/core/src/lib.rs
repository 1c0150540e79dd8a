//! Restores a smooth function with error band from a sampled histogram
//! with the bin hierarchy method.
//!
//! The pipeline is [`histogram::parse_histogram`] →
//! [`hierarchy::build_hierarchy`] → [`fit::bhm_fit`], producing a
//! [`spline::BhmSpline`]. The [`generator`] module samples test functions
//! into histogram files, and [`params`] reads the `key = value` parameter
//! files of both executables.

pub mod fit;
pub mod format;
pub mod generator;
pub mod gof;
pub mod hierarchy;
pub mod histogram;
pub mod params;
pub mod spline;

pub use fit::{bhm_fit, FitError, FitParams};
pub use hierarchy::{build_hierarchy, BinHierarchy};
pub use histogram::{parse_histogram, Histogram};
pub use spline::BhmSpline;
