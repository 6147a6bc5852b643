//! Detector generation for the self and masking of its feature space.
//!
//! Each feature gets one interval `[mu - n*sd - c, mu + n*sd + c]`, where
//! `mu` and `sd` are the mean and population standard deviation of the
//! self's normalized series and `c = u * g` is a change term built from the
//! feature's mean growth rate `g` and an uncertainty draw `u` in [-1, 1].
//! Self cells that fall inside their feature's interval are masked (set to
//! zero); the cells left over form the accepted-detectors matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{FeaturePanel, YearFeatureMatrix};
use crate::preprocess::NormalizedPanel;

/// Series on which the mean growth rate is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthBasis {
    #[default]
    Normalized,
    Raw,
}

/// Mean of year-over-year relative changes, as a fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRate {
    pub rate: f64,
    /// Transitions dropped because the previous year's value was zero.
    pub skipped: usize,
    pub transitions: usize,
}

impl GrowthRate {
    /// Every transition was skipped and `rate` fell back to 0.0.
    pub fn is_undefined(&self) -> bool {
        self.skipped == self.transitions
    }
}

pub fn mean_growth_rate(series: &[f64]) -> Result<GrowthRate> {
    if series.len() < 2 {
        return Err(Error::InsufficientHistory(series.len()));
    }
    let growths: Vec<f64> = series
        .windows(2)
        .filter(|w| w[0] != 0.0)
        .map(|w| (w[1] - w[0]) / w[0])
        .collect();
    let transitions = series.len() - 1;
    let rate = if growths.is_empty() {
        0.0
    } else {
        growths.iter().sum::<f64>() / growths.len() as f64
    };
    Ok(GrowthRate {
        rate,
        skipped: transitions - growths.len(),
        transitions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureStat {
    pub feature: String,
    pub mean: f64,
    /// Population standard deviation (divides by the year count).
    pub std_dev: f64,
    pub growth: GrowthRate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureStats {
    pub basis: GrowthBasis,
    pub features: Vec<FeatureStat>,
}

impl FeatureStats {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

pub fn mean_and_population_std(series: &[f64]) -> (f64, f64) {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-feature mean, standard deviation and growth of the self.
///
/// Both panels must hold exactly the self entity on identical axes.
pub fn feature_stats(
    normalized: &NormalizedPanel,
    raw: &FeaturePanel,
    basis: GrowthBasis,
) -> Result<FeatureStats> {
    let norm = &normalized.panel;
    if norm.dims().0 != 1 || raw.dims().0 != 1 {
        return Err(Error::Shape("feature stats need single-entity panels".into()));
    }
    if !norm.same_axes(raw) {
        return Err(Error::Shape("normalized and raw panels differ in axes".into()));
    }
    let years = norm.dims().1;
    if years < 2 {
        return Err(Error::InsufficientHistory(years));
    }
    let features = norm
        .features()
        .iter()
        .enumerate()
        .map(|(f, name)| {
            let series = norm.series(0, f);
            let (mean, std_dev) = mean_and_population_std(&series);
            let growth = match basis {
                GrowthBasis::Normalized => mean_growth_rate(&series)?,
                GrowthBasis::Raw => mean_growth_rate(&raw.series(0, f))?,
            };
            Ok(FeatureStat {
                feature: name.clone(),
                mean,
                std_dev,
                growth,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureStats { basis, features })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorRange {
    pub lower: f64,
    pub upper: f64,
    /// Realized change term `u * g`.
    pub change: f64,
}

impl DetectorRange {
    /// An inverted interval covers nothing.
    pub fn is_empty(&self) -> bool {
        self.upper < self.lower
    }

    pub fn covers(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// `n` exceeds `mu / sd` for a feature. Advisory only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanBoundWarning {
    pub feature: String,
    pub n: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorSet {
    pub n: f64,
    pub ranges: Vec<DetectorRange>,
    pub span_warnings: Vec<SpanBoundWarning>,
}

pub fn validate_span(n: f64) -> Result<()> {
    if !(n.is_finite() && n >= 0.0) {
        return Err(Error::InvalidParameter(format!("n must be finite and >= 0, got {n}")));
    }
    Ok(())
}

pub fn detector_ranges(stats: &FeatureStats, n: f64, u: &[f64]) -> Result<DetectorSet> {
    validate_span(n)?;
    if u.len() != stats.len() {
        return Err(Error::InvalidParameter(format!(
            "expected {} uncertainty values, got {}",
            stats.len(),
            u.len()
        )));
    }
    if let Some(bad) = u.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParameter(format!("u = {bad} outside [-1, 1]")));
    }
    let mut span_warnings = Vec::new();
    let ranges = stats
        .features
        .iter()
        .zip(u)
        .map(|(s, &u)| {
            if s.std_dev > 0.0 && n > s.mean / s.std_dev {
                span_warnings.push(SpanBoundWarning {
                    feature: s.feature.clone(),
                    n,
                    bound: s.mean / s.std_dev,
                });
            }
            let change = u * s.growth.rate;
            let half = n * s.std_dev;
            DetectorRange {
                lower: s.mean - half - change,
                upper: s.mean + half + change,
                change,
            }
        })
        .collect();
    Ok(DetectorSet {
        n,
        ranges,
        span_warnings,
    })
}

/// The self's matrix after masking, with an explicit kept/masked grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptedDetectors {
    pub years: usize,
    pub features: usize,
    /// Row-major years × features; masked cells hold 0.0.
    pub values: Vec<f64>,
    /// `true` = kept (outside the detector range).
    pub mask: Vec<bool>,
}

impl AcceptedDetectors {
    pub fn value(&self, year: usize, feature: usize) -> f64 {
        self.values[year * self.features + feature]
    }

    pub fn kept(&self, year: usize, feature: usize) -> bool {
        self.mask[year * self.features + feature]
    }

    pub fn column(&self, feature: usize) -> Vec<f64> {
        (0..self.years).map(|y| self.value(y, feature)).collect()
    }

    pub fn mask_column(&self, feature: usize) -> Vec<bool> {
        (0..self.years).map(|y| self.kept(y, feature)).collect()
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|k| !**k).count()
    }

    /// Mask as nested rows, one per year.
    pub fn mask_rows(&self) -> Vec<Vec<bool>> {
        self.mask.chunks(self.features).map(<[bool]>::to_vec).collect()
    }

    pub fn value_rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.features).map(<[f64]>::to_vec).collect()
    }
}

pub fn apply_mask(self_matrix: &YearFeatureMatrix, ranges: &DetectorSet) -> Result<AcceptedDetectors> {
    if self_matrix.features != ranges.ranges.len() {
        return Err(Error::Shape(format!(
            "matrix has {} features, detector set has {}",
            self_matrix.features,
            ranges.ranges.len()
        )));
    }
    let mut values = self_matrix.values.clone();
    let mut mask = vec![true; values.len()];
    for (cell, (value, kept)) in values.iter_mut().zip(mask.iter_mut()).enumerate() {
        let range = &ranges.ranges[cell % self_matrix.features];
        if !range.is_empty() && range.covers(*value) {
            *value = 0.0;
            *kept = false;
        }
    }
    Ok(AcceptedDetectors {
        years: self_matrix.years,
        features: self_matrix.features,
        values,
        mask,
    })
}
