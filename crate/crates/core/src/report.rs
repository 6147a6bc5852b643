//! End-to-end run assembly and the serializable run report.

use serde::Serialize;

use crate::baseline::{correlation_baseline, BaselineBasis, CorrelationReport};
use crate::detector::{AcceptedDetectors, DetectorSet, FeatureStats};
use crate::error::Result;
use crate::monitor::SimilarityMeasure;
use crate::trials::{summarize, PreparedInput, RankFrequencyTable, TrialConfig, TrialEngine, TrialSummary};

pub const TOOL_NAME: &str = "immunoscan";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RunWarning {
    ConstantSeries { entity: Option<String>, feature: String },
    SpanBound { feature: String, n: f64, bound: f64 },
    GrowthTransitionsSkipped { feature: String, skipped: usize, transitions: usize },
    GrowthUndefined { feature: String },
    BaselineUnavailable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputEcho {
    pub path: String,
    /// SHA-256 of the input file bytes.
    pub sha256: String,
    pub self_entity: String,
}

/// Detectors and accepted matrix with every `u` set to zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorSnapshot {
    pub self_entity: String,
    pub n: f64,
    pub std_definition: &'static str,
    pub years: Vec<i32>,
    pub features: Vec<String>,
    pub stats: FeatureStats,
    pub ranges: Vec<SnapshotRange>,
    /// years × features, `true` = kept.
    pub mask: Vec<Vec<bool>>,
    /// years × features, masked cells hold 0.
    pub accepted: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotRange {
    pub feature: String,
    pub lower: f64,
    pub upper: f64,
    pub empty: bool,
}

impl DetectorSnapshot {
    fn new(engine: &TrialEngine<'_>, input: &PreparedInput, detectors: &DetectorSet, accepted: &AcceptedDetectors) -> Self {
        let own = &input.normalized.self_panel.panel;
        Self {
            self_entity: own.entities()[0].clone(),
            n: detectors.n,
            std_definition: "population",
            years: own.years().to_vec(),
            features: own.features().to_vec(),
            stats: engine.stats().clone(),
            ranges: own
                .features()
                .iter()
                .zip(&detectors.ranges)
                .map(|(f, r)| SnapshotRange {
                    feature: f.clone(),
                    lower: r.lower,
                    upper: r.upper,
                    empty: r.is_empty(),
                })
                .collect(),
            mask: accepted.mask_rows(),
            accepted: accepted.value_rows(),
        }
    }
}

pub fn detector_snapshot(config: &TrialConfig, input: &PreparedInput) -> Result<DetectorSnapshot> {
    let engine = TrialEngine::new(config.clone(), input)?;
    let zeros = vec![0.0; engine.stats().len()];
    let detectors = crate::detector::detector_ranges(engine.stats(), config.n, &zeros)?;
    let accepted = crate::detector::apply_mask(&input.normalized.self_panel.panel.entity_matrix(0), &detectors)?;
    Ok(DetectorSnapshot::new(&engine, input, &detectors, &accepted))
}

/// Top NSA entity per measure next to the baseline's lowest-r entity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub measure: SimilarityMeasure,
    pub top_rank1_entity: String,
    pub top_rank1_share: f64,
    pub baseline_lowest_r: Option<String>,
    pub agrees: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub tool: ToolInfo,
    pub input: InputEcho,
    pub config: TrialConfig,
    pub baseline_basis: BaselineBasis,
    pub warnings: Vec<RunWarning>,
    pub detector_snapshot: DetectorSnapshot,
    pub tables: Vec<RankFrequencyTable>,
    pub summaries: Vec<TrialSummary>,
    pub baseline: Option<CorrelationReport>,
    pub cross_check: Vec<CrossCheck>,
}

pub fn run_pipeline(
    input_echo: InputEcho,
    config: &TrialConfig,
    input: &PreparedInput,
    baseline_basis: BaselineBasis,
    workers: Option<usize>,
) -> Result<RunReport> {
    let engine = TrialEngine::new(config.clone(), input)?;
    let mut warnings = collect_warnings(&engine, input);

    let snapshot = detector_snapshot(config, input)?;
    let tables = engine.run(workers)?;
    let summaries: Vec<TrialSummary> = tables.iter().map(summarize).collect();

    let baseline = match correlation_baseline(input, baseline_basis) {
        Ok(b) => Some(b),
        Err(e) => {
            warnings.push(RunWarning::BaselineUnavailable { reason: e.to_string() });
            None
        }
    };

    let cross_check = summaries
        .iter()
        .map(|s| {
            let top = s
                .entities
                .iter()
                .enumerate()
                .max_by(|(i, a), (j, b)| a.top1_share.total_cmp(&b.top1_share).then(j.cmp(i)))
                .map(|(_, e)| e)
                .expect("at least one nonself entity");
            let lowest = baseline.as_ref().map(|b| b.most_dissimilar().to_owned());
            CrossCheck {
                measure: s.measure,
                top_rank1_entity: top.entity.clone(),
                top_rank1_share: top.top1_share,
                agrees: lowest.as_ref().map(|l| *l == top.entity),
                baseline_lowest_r: lowest,
            }
        })
        .collect();

    Ok(RunReport {
        tool: ToolInfo {
            name: TOOL_NAME,
            version: TOOL_VERSION,
        },
        input: input_echo,
        config: config.clone(),
        baseline_basis,
        warnings,
        detector_snapshot: snapshot,
        tables,
        summaries,
        baseline,
        cross_check,
    })
}

pub fn collect_warnings(engine: &TrialEngine<'_>, input: &PreparedInput) -> Vec<RunWarning> {
    let mut warnings: Vec<RunWarning> = Vec::new();
    let mut constants = input.normalized.self_panel.constant_series.clone();
    constants.extend(input.normalized.nonself_panel.constant_series.iter().cloned());
    constants.dedup();
    warnings.extend(constants.into_iter().map(|c| RunWarning::ConstantSeries {
        entity: c.entity,
        feature: c.feature,
    }));
    warnings.extend(engine.span_warnings().into_iter().map(|w| RunWarning::SpanBound {
        feature: w.feature,
        n: w.n,
        bound: w.bound,
    }));
    for s in &engine.stats().features {
        if s.growth.is_undefined() {
            warnings.push(RunWarning::GrowthUndefined {
                feature: s.feature.clone(),
            });
        } else if s.growth.skipped > 0 {
            warnings.push(RunWarning::GrowthTransitionsSkipped {
                feature: s.feature.clone(),
                skipped: s.growth.skipped,
                transitions: s.growth.transitions,
            });
        }
    }
    warnings
}
