//! Inverse problems: weighted trace fits, the gyromagnetic slope, and the
//! reporter / proton localization maps.

pub mod lm;
mod fit;
mod map;
mod models;
mod protons;
mod reporters;

pub use fit::{
    fit_gyromagnetic, fit_trace, reduced_chi2, FitResult, FitSpec, GyromagneticFit, LarmorPoint,
};
pub use lm::{Bounds, LmConfig};
pub use map::{Grid2D, GridAxis, ProbabilityMap};
pub use models::TraceModel;
pub use protons::{localize_protons, CredibleInterval, ProtonBranch, ProtonMapConfig};
pub use reporters::{
    field_cone, localize_reporters, DepthSpec, MultiAngleDataset, ReporterConfig, ReporterFit,
    ReporterLocalization,
};
