//! Pearson correlation between the self and each nonself, computed on
//! feature vectors averaged over the years. Lowest r = most dissimilar.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::FeaturePanel;
use crate::trials::PreparedInput;

/// Values the averaged vectors are built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineBasis {
    #[default]
    Normalized,
    Raw,
}

pub fn average_feature_vector(panel: &FeaturePanel, entity: &str) -> Result<Vec<f64>> {
    let e = panel
        .entity_index(entity)
        .ok_or_else(|| Error::NotFound(entity.to_owned()))?;
    let years = panel.dims().1 as f64;
    Ok((0..panel.dims().2)
        .map(|f| panel.series(e, f).iter().sum::<f64>() / years)
        .collect())
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("vector lengths {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientFeatures(a.len()));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEntry {
    pub entity: String,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub basis: BaselineBasis,
    pub self_entity: String,
    /// Nonself entities in panel order.
    pub entries: Vec<CorrelationEntry>,
    /// Ascending by r (most dissimilar first); ties keep panel order.
    pub ordering: Vec<String>,
}

impl CorrelationReport {
    pub fn most_dissimilar(&self) -> &str {
        &self.ordering[0]
    }

    pub fn most_similar(&self) -> &str {
        &self.ordering[self.ordering.len() - 1]
    }

    /// `entity,r` rows in panel order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("entity,r\n");
        for e in &self.entries {
            out.push_str(&format!("{},{:?}\n", csv_field(&e.entity), e.r));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub fn correlation_baseline(input: &PreparedInput, basis: BaselineBasis) -> Result<CorrelationReport> {
    let (own, others) = match basis {
        BaselineBasis::Normalized => (
            &input.normalized.self_panel.panel,
            &input.normalized.nonself_panel.panel,
        ),
        BaselineBasis::Raw => (&input.raw.self_panel, &input.raw.nonself_panel),
    };
    let self_entity = own.entities()[0].clone();
    let self_vec = average_feature_vector(own, &self_entity)?;
    let entries = others
        .entities()
        .iter()
        .map(|e| {
            let v = average_feature_vector(others, e)?;
            Ok(CorrelationEntry {
                entity: e.clone(),
                r: pearson(&self_vec, &v)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut idx: Vec<usize> = (0..entries.len()).collect();
    idx.sort_by(|&a, &b| entries[a].r.total_cmp(&entries[b].r).then(a.cmp(&b)));
    Ok(CorrelationReport {
        basis,
        self_entity,
        ordering: idx.iter().map(|&i| entries[i].entity.clone()).collect(),
        entries,
    })
}
