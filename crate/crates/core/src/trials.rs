//! Seeded Monte Carlo harness.
//!
//! Every trial draws fresh uncertainty values, rebuilds the detector
//! ranges, masks the self, then scores and ranks the nonself entities under
//! each requested measure. Rank positions are tallied into rank-frequency
//! tables (ranks × entities).
//!
//! Trial `t` draws from its own ChaCha8 stream `(seed, t)`, so the tables are
//! identical no matter how many workers run the trials or in which order.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{
    apply_mask, detector_ranges, feature_stats, validate_span, AcceptedDetectors, DetectorSet,
    FeatureStats, GrowthBasis, SpanBoundWarning,
};
use crate::error::{Error, Result};
use crate::monitor::{
    rank_entities, score_entities, DissimilarityScores, MaskMode, SimilarityMeasure, TrialRanking,
};
use crate::panel::{split_self_nonself, FeaturePanel, PanelSplit, YearFeatureMatrix};
use crate::preprocess::{normalize_minmax, NormalizationScope, NormalizedSplit};

/// Distribution of the uncertainty factor `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UMode {
    /// Continuous uniform on [-1, 1].
    #[default]
    Uniform,
    /// Equiprobable on {-1, 0, +1}.
    Ternary,
    /// Always 0; detectors become deterministic.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UScope {
    /// Independent draw for every feature.
    #[default]
    PerFeature,
    /// One draw per trial, shared by all features.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub n: f64,
    pub trials: u64,
    pub seed: u64,
    pub u_mode: UMode,
    pub u_scope: UScope,
    pub growth_basis: GrowthBasis,
    pub scope: NormalizationScope,
    pub measures: Vec<SimilarityMeasure>,
    pub mask_mode: MaskMode,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            n: 0.45,
            trials: 1000,
            seed: 0,
            u_mode: UMode::default(),
            u_scope: UScope::default(),
            growth_basis: GrowthBasis::default(),
            scope: NormalizationScope::default(),
            measures: vec![SimilarityMeasure::EuclideanDistance, SimilarityMeasure::CosineAngle],
            mask_mode: MaskMode::default(),
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        validate_span(self.n)?;
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.measures.is_empty() {
            return Err(Error::InvalidParameter("at least one measure is required".into()));
        }
        let mut seen = self.measures.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.measures.len() {
            return Err(Error::InvalidParameter("measures must not repeat".into()));
        }
        Ok(())
    }
}

/// Independent random stream for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn draw_u<R: Rng + ?Sized>(rng: &mut R, mode: UMode, count: usize, scope: UScope) -> Vec<f64> {
    let draws = match scope {
        UScope::PerFeature => count,
        UScope::Global => 1,
    };
    let uniform = Uniform::new_inclusive(-1.0, 1.0);
    let values: Vec<f64> = (0..draws)
        .map(|_| match mode {
            UMode::Uniform => uniform.sample(rng),
            UMode::Ternary => f64::from(rng.gen_range(-1i8..=1)),
            UMode::Zero => 0.0,
        })
        .collect();
    match scope {
        UScope::PerFeature => values,
        UScope::Global => vec![values[0]; count],
    }
}

/// Raw and normalized views of the same self/nonself split.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedInput {
    pub raw: PanelSplit,
    pub normalized: NormalizedSplit,
}

/// Normalizes the whole panel, then splits off the self.
pub fn prepare(panel: &FeaturePanel, self_id: &str, scope: NormalizationScope) -> Result<PreparedInput> {
    let raw = split_self_nonself(panel, self_id)?;
    let normalized = normalize_minmax(panel, scope).split(self_id)?;
    Ok(PreparedInput { raw, normalized })
}

/// Everything one trial produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub u: Vec<f64>,
    pub detectors: DetectorSet,
    pub accepted: AcceptedDetectors,
    /// In the order of `TrialConfig::measures`.
    pub measures: Vec<MeasureOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureOutcome {
    pub scores: DissimilarityScores,
    pub ranking: TrialRanking,
}

/// Precomputed per-run state; cheap to share across worker threads.
pub struct TrialEngine<'a> {
    config: TrialConfig,
    input: &'a PreparedInput,
    stats: FeatureStats,
    self_matrix: YearFeatureMatrix,
}

impl<'a> TrialEngine<'a> {
    pub fn new(config: TrialConfig, input: &'a PreparedInput) -> Result<Self> {
        config.validate()?;
        let nonself = &input.normalized.nonself_panel.panel;
        let own = &input.normalized.self_panel.panel;
        if !own.same_axes(nonself) || !own.same_axes(&input.raw.self_panel) {
            return Err(Error::Shape("self and nonself panels differ in axes".into()));
        }
        let stats = feature_stats(&input.normalized.self_panel, &input.raw.self_panel, config.growth_basis)?;
        Ok(Self {
            self_matrix: own.entity_matrix(0),
            config,
            input,
            stats,
        })
    }

    pub fn config(&self) -> &TrialConfig {
        &self.config
    }

    pub fn stats(&self) -> &FeatureStats {
        &self.stats
    }

    pub fn nonself_entities(&self) -> &[String] {
        self.input.normalized.nonself_panel.panel.entities()
    }

    /// Span-bound advisories; they depend on `n`, mean and spread only.
    pub fn span_warnings(&self) -> Vec<SpanBoundWarning> {
        let zeros = vec![0.0; self.stats.len()];
        detector_ranges(&self.stats, self.config.n, &zeros)
            .map(|d| d.span_warnings)
            .unwrap_or_default()
    }

    /// The uncertainty values trial `t` uses.
    pub fn u_for_trial(&self, trial: u64) -> Vec<f64> {
        let mut rng = trial_rng(self.config.seed, trial);
        draw_u(&mut rng, self.config.u_mode, self.stats.len(), self.config.u_scope)
    }

    /// Runs the detector → mask → score → rank chain for explicit `u`.
    pub fn evaluate(&self, u: &[f64]) -> Result<TrialOutcome> {
        let detectors = detector_ranges(&self.stats, self.config.n, u)?;
        let accepted = apply_mask(&self.self_matrix, &detectors)?;
        let measures = self
            .config
            .measures
            .iter()
            .map(|&measure| {
                let scores = score_entities(
                    &accepted,
                    &self.input.normalized.nonself_panel,
                    measure,
                    self.config.mask_mode,
                )?;
                let ranking = rank_entities(&scores);
                Ok(MeasureOutcome { scores, ranking })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrialOutcome {
            u: u.to_vec(),
            detectors,
            accepted,
            measures,
        })
    }

    pub fn run_trial(&self, trial: u64) -> Result<TrialOutcome> {
        self.evaluate(&self.u_for_trial(trial))
            .map_err(|e| Error::Trial {
                trial,
                source: Box::new(e),
            })
    }

    /// Runs every trial. `workers = None` uses the global rayon pool.
    pub fn run(&self, workers: Option<usize>) -> Result<Vec<RankFrequencyTable>> {
        let job = || -> Vec<Result<Vec<Vec<usize>>>> {
            (0..self.config.trials)
                .into_par_iter()
                .map(|t| {
                    self.run_trial(t)
                        .map(|o| o.measures.into_iter().map(|m| m.ranking.indices).collect())
                })
                .collect()
        };
        let per_trial = match workers {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
                .install(job),
            None => job(),
        };

        let k = self.nonself_entities().len();
        let mut tables: Vec<RankFrequencyTable> = self
            .config
            .measures
            .iter()
            .map(|&measure| RankFrequencyTable {
                measure,
                entities: self.nonself_entities().to_vec(),
                trials: self.config.trials,
                counts: vec![vec![0; k]; k],
            })
            .collect();
        for rankings in per_trial {
            for (table, order) in tables.iter_mut().zip(rankings?) {
                for (rank, entity) in order.into_iter().enumerate() {
                    table.counts[rank][entity] += 1;
                }
            }
        }
        Ok(tables)
    }
}

pub fn run_trials(config: &TrialConfig, input: &PreparedInput) -> Result<Vec<RankFrequencyTable>> {
    TrialEngine::new(config.clone(), input)?.run(None)
}

/// Counts of how often each entity landed on each rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankFrequencyTable {
    pub measure: SimilarityMeasure,
    pub entities: Vec<String>,
    pub trials: u64,
    /// `counts[rank - 1][entity]`.
    pub counts: Vec<Vec<u64>>,
}

impl RankFrequencyTable {
    pub fn column(&self, entity: usize) -> Vec<u64> {
        self.counts.iter().map(|row| row[entity]).collect()
    }

    /// Every row and every column sums to `trials`.
    pub fn is_doubly_stochastic(&self) -> bool {
        let k = self.entities.len();
        self.counts.len() == k
            && self.counts.iter().all(|r| r.len() == k && r.iter().sum::<u64>() == self.trials)
            && (0..k).all(|e| self.column(e).iter().sum::<u64>() == self.trials)
    }

    /// `rank,<entity>,...` header, then one row per rank.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let header = std::iter::once("rank").chain(self.entities.iter().map(String::as_str));
        writer.write_record(header).expect("in-memory write");
        for (rank, row) in self.counts.iter().enumerate() {
            let record = std::iter::once((rank + 1).to_string()).chain(row.iter().map(u64::to_string));
            writer.write_record(record).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn from_csv(text: &str, measure: SimilarityMeasure) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
            .clone();
        if header.get(0) != Some("rank") {
            return Err(Error::Parse {
                line: 1,
                message: "first column must be `rank`".into(),
            });
        }
        let entities: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut counts = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            let bad = |message: String| Error::Parse { line, message };
            if rec.get(0) != Some((i + 1).to_string().as_str()) {
                return Err(bad(format!("expected rank {}", i + 1)));
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|c| c.parse::<u64>().map_err(|_| bad(format!("bad count `{c}`"))))
                .collect::<Result<Vec<_>>>()?;
            counts.push(row);
        }
        let trials = counts.first().map_or(0, |r| r.iter().sum());
        let table = Self {
            measure,
            entities,
            trials,
            counts,
        };
        if !table.is_doubly_stochastic() {
            return Err(Error::InvalidParameter("rank table rows/columns do not balance".into()));
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntitySummary {
    pub entity: String,
    /// Rank with the highest count; ties go to the better (smaller) rank.
    pub modal_rank: usize,
    pub top1_share: f64,
    pub mean_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub measure: SimilarityMeasure,
    pub trials: u64,
    pub entities: Vec<EntitySummary>,
}

pub fn summarize(table: &RankFrequencyTable) -> TrialSummary {
    let trials = table.trials as f64;
    let entities = table
        .entities
        .iter()
        .enumerate()
        .map(|(e, name)| {
            let column = table.column(e);
            let modal_rank = column
                .iter()
                .enumerate()
                .fold((0, 0), |best, (r, &c)| if c > best.1 { (r, c) } else { best })
                .0
                + 1;
            let weighted: u64 = column.iter().enumerate().map(|(r, &c)| (r as u64 + 1) * c).sum();
            EntitySummary {
                entity: name.clone(),
                modal_rank,
                top1_share: column[0] as f64 / trials,
                mean_rank: weighted as f64 / trials,
            }
        })
        .collect();
    TrialSummary {
        measure: table.measure,
        trials: table.trials,
        entities,
    }
}
