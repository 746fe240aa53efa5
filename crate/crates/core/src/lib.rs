//! GG-Rician amplitude and intensity distributions with a Metropolis-Hastings
//! estimator, reference-model fitting and goodness-of-fit tooling for SAR
//! amplitude statistics.

// NaN must fail range checks, hence `!(x >= 0.0)`
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod dataio;
pub mod distributions;
pub mod error;
pub mod estimation;
pub mod gof;
pub mod quadrature;
pub mod sampling;
pub mod specfun;

pub use distributions::{
    cdf, cdf_many, log_likelihood, pdf, Density, Domain, Family, GgRicianParams, ModelSpec,
};
pub use dataio::{
    fit_patches, load_samples, sorted_downsample, two_region_image, Format, Loaded, MapConfig, ParameterMap,
    RasterImage,
};
pub use error::{Error, Result};
pub use gof::{build_histogram, evaluate, score_models, GofReport, Histogram};
pub use estimation::{
    fit_reference, mh_fit, nmse, posterior_summary, FitResult, MhConfig, ReferenceConfig, ReferenceFit,
};
pub use quadrature::QuadratureRule;
pub use sampling::{sample_gg, sample_ggrician, sample_reference, RngStream, SampleSet};
