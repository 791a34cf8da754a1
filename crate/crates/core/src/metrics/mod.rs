//! Survival and classification evaluation.

mod classification;
mod concordance;
mod km;
mod logrank;
mod stratify;

pub use classification::{classification_report, ClassMetrics, ClassificationReport};
pub use concordance::{concordance_counts, concordance_index, ConcordanceCounts};
pub use km::{km_estimator, KmCurve};
pub use logrank::{chi2_sf_1df, logrank_test, logrank_test_with, LogrankMethod, LogrankResult};
pub use stratify::{percentile, stratify_percentile, RiskGroup, RiskGroups};

/// Default low/intermediate and intermediate/high percentile cuts.
pub const DEFAULT_CUTS: [f64; 2] = [33.0, 66.0];
