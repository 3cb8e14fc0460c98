//! covkern: covariate-driven kernel intensity estimation for spatial point
//! processes, with a smooth bootstrap resampler, data-driven bandwidth
//! selectors, and a seeded simulation benchmark harness.

pub mod bandwidth;
pub mod bootstrap;
pub mod error;
pub mod estimators;
pub mod geom;
pub mod kernels;
pub mod numeric;
pub mod sim;
pub mod transform;

pub use bandwidth::{BandwidthMethod, BandwidthReport};
pub use bootstrap::BootstrapWorld;
pub use error::{Error, Result};
pub use geom::{Point, PointPattern, RasterCovariate, Window};
pub use estimators::{IntensityEstimate, RhoEstimate, TransformedSample};
pub use kernels::Kernel;
pub use transform::CovariateDistribution;
