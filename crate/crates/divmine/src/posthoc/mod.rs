//! Evaluation machinery: diversity-vs-size curves, the cluster purity
//! grid over algorithm variants, and the supporting statistical tests.

mod diversity;
mod purity;
pub mod special;
mod stats;

pub use diversity::{
    default_size_grid, diversity_curve, DiversityConfig, DiversityCurve, DiversityPoint, Strategy,
};
pub use purity::{
    compare_variants, purity, purity_grid, standard_variants, CompareBy, GridConfig, GridLabels,
    PairwiseTest, PurityCell, PurityValue, VariantFamily, VariantSpec,
};
pub use stats::{levene, mann_whitney_u, LeveneCenter, LeveneResult, MwuMode, MwuResult};
