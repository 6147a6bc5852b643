//! Min-max scaling onto [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::panel::{split_self_nonself, FeaturePanel};

/// Which cells share one min/max pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationScope {
    /// Min and max over one entity's years, per feature.
    #[default]
    PerEntity,
    /// Min and max over every entity and year, per feature.
    Global,
}

/// A series whose range is zero; every cell of it maps to 0.0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstantSeries {
    /// `None` under global scope, where the group spans all entities.
    pub entity: Option<String>,
    pub feature: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedPanel {
    pub panel: FeaturePanel,
    pub scope: NormalizationScope,
    /// Fingerprint of the raw panel these values came from.
    pub source_fingerprint: String,
    pub constant_series: Vec<ConstantSeries>,
}

impl NormalizedPanel {
    pub fn split(&self, self_id: &str) -> Result<NormalizedSplit> {
        let split = split_self_nonself(&self.panel, self_id)?;
        let self_name = split.self_panel.entities()[0].clone();
        let (own, rest): (Vec<_>, Vec<_>) = self
            .constant_series
            .iter()
            .cloned()
            .partition(|c| c.entity.as_deref() == Some(self_name.as_str()));
        let wrap = |panel: FeaturePanel, constant_series: Vec<ConstantSeries>| NormalizedPanel {
            panel,
            scope: self.scope,
            source_fingerprint: self.source_fingerprint.clone(),
            constant_series,
        };
        let shared: Vec<_> = rest.iter().filter(|c| c.entity.is_none()).cloned().collect();
        let others: Vec<_> = rest.into_iter().filter(|c| c.entity.is_some()).collect();
        Ok(NormalizedSplit {
            self_panel: wrap(split.self_panel, own.into_iter().chain(shared.clone()).collect()),
            nonself_panel: wrap(split.nonself_panel, others.into_iter().chain(shared).collect()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSplit {
    pub self_panel: NormalizedPanel,
    pub nonself_panel: NormalizedPanel,
}

/// Applies `(x - min) / (max - min)` within each scope group.
pub fn normalize_minmax(panel: &FeaturePanel, scope: NormalizationScope) -> NormalizedPanel {
    let (n_entities, n_years, n_features) = panel.dims();
    let mut out = panel.values().to_vec();
    let mut constant_series = Vec::new();
    let idx = |e: usize, y: usize, f: usize| (e * n_years + y) * n_features + f;

    let groups: Vec<Vec<usize>> = match scope {
        NormalizationScope::PerEntity => (0..n_entities).map(|e| vec![e]).collect(),
        NormalizationScope::Global => vec![(0..n_entities).collect()],
    };

    for group in &groups {
        for f in 0..n_features {
            let cells: Vec<usize> = group
                .iter()
                .flat_map(|&e| (0..n_years).map(move |y| idx(e, y, f)))
                .collect();
            let (lo, hi) = cells.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = panel.values()[i];
                (lo.min(v), hi.max(v))
            });
            if hi == lo {
                for &i in &cells {
                    out[i] = 0.0;
                }
                constant_series.push(ConstantSeries {
                    entity: match scope {
                        NormalizationScope::PerEntity => Some(panel.entities()[group[0]].clone()),
                        NormalizationScope::Global => None,
                    },
                    feature: panel.features()[f].clone(),
                });
                continue;
            }
            // Halving keeps the range finite for values near f64::MAX.
            let halve = !(hi - lo).is_finite();
            for &i in &cells {
                let x = panel.values()[i];
                out[i] = if halve {
                    (x / 2.0 - lo / 2.0) / (hi / 2.0 - lo / 2.0)
                } else {
                    (x - lo) / (hi - lo)
                };
            }
        }
    }

    NormalizedPanel {
        panel: panel.with_values(out),
        scope,
        source_fingerprint: panel.fingerprint(),
        constant_series,
    }
}
