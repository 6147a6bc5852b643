//! Negative selection screening of acquisition targets.
//!
//! An acquirer's ("self") feature history is turned into per-feature
//! detector intervals. Self cells inside their interval are masked, and the
//! remaining accepted-detectors matrix is compared with every candidate
//! ("nonself") by Euclidean distance or cosine angle. Repeating this under
//! random perturbations of the detector bounds yields rank-frequency tables
//! that show which candidate is most consistently the most dissimilar.
//!
//! Typical flow: [`panel::parse_panel_csv`] → [`trials::prepare`] →
//! [`trials::TrialEngine`] → [`trials::summarize`], with
//! [`baseline::correlation_baseline`] as a static cross-check.

#![forbid(unsafe_code)]

pub mod baseline;
pub mod detector;
pub mod error;
pub mod monitor;
pub mod panel;
pub mod preprocess;
pub mod report;
pub mod synth;
pub mod trials;

pub use error::{Error, Result};
pub use monitor::{MaskMode, SimilarityMeasure};
pub use panel::{parse_panel_csv, split_self_nonself, FeaturePanel, PanelSplit};
pub use preprocess::{normalize_minmax, NormalizationScope, NormalizedPanel};
pub use trials::{prepare, run_trials, summarize, RankFrequencyTable, TrialConfig, TrialEngine, UMode, UScope};
