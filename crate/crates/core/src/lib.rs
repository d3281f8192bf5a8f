//! Granularity-modulated correlation (GMC) for image quality assessment benchmarks.
//!
//! Classical PLCC/SRCC/KRCC collapse a model's agreement with subjective scores into
//! one number. GMC instead localizes a weighted correlation at query points in the
//! joint (MOS, |ΔMOS|) plane, corrects for imbalanced MOS distributions with a density
//! regulator, fits a continuous correlation surface through the query results and
//! integrates it into global and regional indicators.
//!
//! The pipeline is:
//!
//! 1. [`dataset`]: load a score file, normalize MOS to `[0, 100]`, rank, fill in σ.
//! 2. [`regulator`]: estimate the MOS density `D(q)`.
//! 3. [`sampler`]: draw `K` query points with Latin hypercube sampling.
//! 4. [`surface::evaluate_query`]: weighted correlation Γ at each query, using the
//!    [`modulator`] weights and the [`gcc`] pairwise correlation.
//! 5. [`surface`]: local linear fit, grid, integration into a [`GmcReport`].
//!
//! [`pipeline::compute_gmc`] runs all of it from a [`GmcConfig`].

pub mod ablation;
pub mod combine;
pub mod dataset;
pub mod error;
mod fastexp;
pub mod gcc;
pub mod modulator;
pub mod pipeline;
pub mod regulator;
pub mod robustness;
pub mod sampler;
pub mod summation;
pub mod surface;

pub use ablation::{run_ablation_sampling, AblationRow, AblationSummary, AblationTable};
pub use combine::{combine_scores, Polarity};
pub use dataset::{estimate_sigma, load_scores, Dataset, Sample, ScoreFormat, SigmaSource};
pub use error::{Error, Result};
pub use gcc::{classical_correlation, weighted_gcc, Correlation, PairMode};
pub use modulator::{p_d, p_s, PdConvention};
pub use pipeline::{compute_gmc, GmcConfig, GmcOutcome};
pub use regulator::{fit_density, p_t, DensityMode, DensityModel};
pub use robustness::{
    default_plans, draw_subset, run_protocol, MixtureMode, ModelScores, ResamplePlan, RobustnessReport,
};
pub use sampler::{sample_points, QueryPoint, SamplePlan, SamplingScheme};
pub use surface::{
    evaluate_query, fit_surface, integrate, region_partition, Baselines, CorrelationSurface, GmcReport, Rect,
    RegionSet,
};
