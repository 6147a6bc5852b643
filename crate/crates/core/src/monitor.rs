//! Comparison of the self's accepted detectors against each nonself.
//!
//! Vectors run across years, one per feature. Each entity's score is the
//! mean of its per-feature components; larger means more dissimilar.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::detector::AcceptedDetectors;
use crate::error::{Error, Result};
use crate::preprocess::NormalizedPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityMeasure {
    EuclideanDistance,
    CosineAngle,
}

impl SimilarityMeasure {
    pub fn short_name(self) -> &'static str {
        match self {
            Self::EuclideanDistance => "euclidean",
            Self::CosineAngle => "cosine",
        }
    }
}

/// How masked self cells enter the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// Masked cells take part as zeros.
    #[default]
    ZeroInclude,
    /// Only kept coordinates are compared.
    Exclude,
}

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("vector lengths {} and {}", a.len(), b.len())));
    }
    Ok(())
}

pub fn feature_euclidean(self_vec: &[f64], nonself_vec: &[f64]) -> Result<f64> {
    check_len(self_vec, nonself_vec)?;
    Ok(self_vec
        .iter()
        .zip(nonself_vec)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Angle between the two vectors in radians, `None` if either has zero norm.
pub fn feature_cosine_angle(self_vec: &[f64], nonself_vec: &[f64]) -> Result<Option<f64>> {
    check_len(self_vec, nonself_vec)?;
    let dot: f64 = self_vec.iter().zip(nonself_vec).map(|(a, b)| a * b).sum();
    let sq_a: f64 = self_vec.iter().map(|a| a * a).sum();
    let sq_b: f64 = nonself_vec.iter().map(|b| b * b).sum();
    if sq_a == 0.0 || sq_b == 0.0 {
        return Ok(None);
    }
    // sqrt of the product keeps cos(v, v) at exactly 1.
    Ok(Some(clamp_cosine(dot / (sq_a * sq_b).sqrt()).acos()))
}

pub fn clamp_cosine(c: f64) -> f64 {
    c.clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityScore {
    pub entity: String,
    pub score: f64,
    /// One value per feature; `None` for features skipped in averaging.
    pub components: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissimilarityScores {
    pub measure: SimilarityMeasure,
    /// Nonself entities in panel order.
    pub entities: Vec<EntityScore>,
    pub skipped_features: Vec<String>,
}

pub fn score_entities(
    accepted: &AcceptedDetectors,
    nonself: &NormalizedPanel,
    measure: SimilarityMeasure,
    mask_mode: MaskMode,
) -> Result<DissimilarityScores> {
    let panel = &nonself.panel;
    let (n_entities, n_years, n_features) = panel.dims();
    if accepted.years != n_years || accepted.features != n_features {
        return Err(Error::Shape(format!(
            "accepted detectors are {}x{}, nonself panel is {}x{}",
            accepted.years, accepted.features, n_years, n_features
        )));
    }

    // Self-side vectors per feature, restricted to kept years under Exclude.
    let self_side: Vec<(Vec<usize>, Vec<f64>)> = (0..n_features)
        .map(|f| {
            let years: Vec<usize> = match mask_mode {
                MaskMode::ZeroInclude => (0..n_years).collect(),
                MaskMode::Exclude => (0..n_years).filter(|&y| accepted.kept(y, f)).collect(),
            };
            let v = years.iter().map(|&y| accepted.value(y, f)).collect();
            (years, v)
        })
        .collect();

    let skip: Vec<bool> = match measure {
        SimilarityMeasure::EuclideanDistance => vec![false; n_features],
        SimilarityMeasure::CosineAngle => self_side
            .iter()
            .map(|(_, v)| v.iter().all(|x| *x == 0.0))
            .collect(),
    };
    if measure == SimilarityMeasure::CosineAngle && skip.iter().all(|s| *s) {
        return Err(Error::NoSignal);
    }
    let used = skip.iter().filter(|s| !**s).count() as f64;

    let entities = (0..n_entities)
        .map(|e| {
            let components = (0..n_features)
                .map(|f| {
                    if skip[f] {
                        return Ok(None);
                    }
                    let (years, self_vec) = &self_side[f];
                    let other: Vec<f64> = years.iter().map(|&y| panel.value(e, y, f)).collect();
                    match measure {
                        SimilarityMeasure::EuclideanDistance => {
                            feature_euclidean(self_vec, &other).map(Some)
                        }
                        SimilarityMeasure::CosineAngle => Ok(Some(
                            feature_cosine_angle(self_vec, &other)?.unwrap_or(FRAC_PI_2),
                        )),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let score = components.iter().flatten().sum::<f64>() / used;
            Ok(EntityScore {
                entity: panel.entities()[e].clone(),
                score,
                components,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DissimilarityScores {
        measure,
        entities,
        skipped_features: (0..n_features)
            .filter(|&f| skip[f])
            .map(|f| panel.features()[f].clone())
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRanking {
    /// Position 0 holds rank 1 (most dissimilar).
    pub order: Vec<String>,
    pub scores: Vec<f64>,
    /// For each position, the entity's index in the nonself panel.
    pub indices: Vec<usize>,
}

/// Sorts by score descending; equal scores keep panel order.
pub fn rank_entities(scores: &DissimilarityScores) -> TrialRanking {
    let mut indices: Vec<usize> = (0..scores.entities.len()).collect();
    indices.sort_by(|&a, &b| {
        scores.entities[b]
            .score
            .total_cmp(&scores.entities[a].score)
            .then(a.cmp(&b))
    });
    TrialRanking {
        order: indices.iter().map(|&i| scores.entities[i].entity.clone()).collect(),
        scores: indices.iter().map(|&i| scores.entities[i].score).collect(),
        indices,
    }
}
