//! Entity × year × feature panels.
//!
//! Panels are read from a long CSV layout with the exact header
//! `entity,year,feature,value`, one row per cell. Entities and features keep
//! their first-appearance order; years are sorted ascending. A panel is
//! always dense: every (entity, year, feature) cell must be present exactly
//! once.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 4] = ["entity", "year", "feature", "value"];

/// Dense value tensor indexed by (entity, year, feature).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeaturePanel {
    entities: Vec<String>,
    years: Vec<i32>,
    features: Vec<String>,
    values: Vec<f64>,
}

impl FeaturePanel {
    /// Builds a panel from axis labels and a flat, entity-major value buffer
    /// (`values[(e * years + y) * features + f]`).
    pub fn new(
        entities: Vec<String>,
        years: Vec<i32>,
        features: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if entities.is_empty() || years.is_empty() || features.is_empty() {
            return Err(Error::InvalidPanel("every axis needs at least one label".into()));
        }
        let expected = entities.len() * years.len() * features.len();
        if values.len() != expected {
            return Err(Error::InvalidPanel(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(dup) = first_duplicate(&entities) {
            return Err(Error::InvalidPanel(format!("duplicate entity {dup}")));
        }
        if let Some(dup) = first_duplicate(&features) {
            return Err(Error::InvalidPanel(format!("duplicate feature {dup}")));
        }
        if years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPanel("years must be strictly increasing".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let per_entity = years.len() * features.len();
            let (e, rest) = (pos / per_entity, pos % per_entity);
            return Err(Error::InvalidPanel(format!(
                "non-finite value at ({}, {}, {})",
                entities[e],
                years[rest / features.len()],
                features[rest % features.len()]
            )));
        }
        Ok(Self {
            entities,
            years,
            features,
            values,
        })
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// (entities, years, features)
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.entities.len(), self.years.len(), self.features.len())
    }

    pub fn entity_index(&self, id: &str) -> Option<usize> {
        self.entities.iter().position(|e| e == id)
    }

    #[inline]
    fn offset(&self, entity: usize, year: usize, feature: usize) -> usize {
        (entity * self.years.len() + year) * self.features.len() + feature
    }

    pub fn value(&self, entity: usize, year: usize, feature: usize) -> f64 {
        self.values[self.offset(entity, year, feature)]
    }

    /// One entity's values for one feature, in year order.
    pub fn series(&self, entity: usize, feature: usize) -> Vec<f64> {
        (0..self.years.len())
            .map(|y| self.value(entity, y, feature))
            .collect()
    }

    /// One entity's years × features block, row-major by year.
    pub fn entity_matrix(&self, entity: usize) -> YearFeatureMatrix {
        let width = self.years.len() * self.features.len();
        let start = entity * width;
        YearFeatureMatrix {
            years: self.years.len(),
            features: self.features.len(),
            values: self.values[start..start + width].to_vec(),
        }
    }

    /// Same axes, new values. Used by transforms that preserve shape.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            entities: self.entities.clone(),
            years: self.years.clone(),
            features: self.features.clone(),
            values,
        }
    }

    /// Sub-panel holding the given entities, in the given order.
    pub fn select_entities(&self, indices: &[usize]) -> Self {
        let width = self.years.len() * self.features.len();
        let mut values = Vec::with_capacity(indices.len() * width);
        for &e in indices {
            values.extend_from_slice(&self.values[e * width..(e + 1) * width]);
        }
        Self {
            entities: indices.iter().map(|&e| self.entities[e].clone()).collect(),
            years: self.years.clone(),
            features: self.features.clone(),
            values,
        }
    }

    pub fn same_axes(&self, other: &FeaturePanel) -> bool {
        self.years == other.years && self.features == other.features
    }

    /// Serializes to the long CSV layout; `parse_panel_csv` reads it back
    /// bit-identically.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        writer.write_record(CSV_HEADER).map_err(csv_io)?;
        for (e, entity) in self.entities.iter().enumerate() {
            for (y, year) in self.years.iter().enumerate() {
                for (f, feature) in self.features.iter().enumerate() {
                    let year = year.to_string();
                    let value = format_value(self.value(e, y, f));
                    writer
                        .write_record([entity.as_str(), &year, feature, &value])
                        .map_err(csv_io)?;
                }
            }
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// SHA-256 of the canonical CSV serialization.
    pub fn fingerprint(&self) -> String {
        sha256_hex(self.to_csv_string().as_bytes())
    }
}

/// Shortest decimal that round-trips to the same `f64`.
pub(crate) fn format_value(v: f64) -> String {
    format!("{v:?}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn first_duplicate(labels: &[String]) -> Option<&str> {
    let mut seen = BTreeSet::new();
    labels
        .iter()
        .find(|l| !seen.insert(l.as_str()))
        .map(String::as_str)
}

fn csv_io(err: csv::Error) -> Error {
    Error::Io(err.to_string())
}

/// A single entity's years × features values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearFeatureMatrix {
    pub years: usize,
    pub features: usize,
    /// Row-major: `values[year * features + feature]`.
    pub values: Vec<f64>,
}

impl YearFeatureMatrix {
    pub fn get(&self, year: usize, feature: usize) -> f64 {
        self.values[year * self.features + feature]
    }

    pub fn column(&self, feature: usize) -> Vec<f64> {
        (0..self.years).map(|y| self.get(y, feature)).collect()
    }
}

/// Reads a long-format panel CSV.
pub fn parse_panel_csv<R: Read>(source: R) -> Result<FeaturePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_parse_error(&e))?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty input, expected header".into(),
            })
        }
    };
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("header must be exactly `{}`", CSV_HEADER.join(",")),
        });
    }

    let mut entities: Vec<String> = Vec::new();
    let mut entity_ids: HashMap<String, usize> = HashMap::new();
    let mut features: Vec<String> = Vec::new();
    let mut feature_ids: HashMap<String, usize> = HashMap::new();
    let mut years: BTreeSet<i32> = BTreeSet::new();
    let mut cells: HashMap<(usize, i32, usize), f64> = HashMap::new();

    for rec in records {
        let rec = rec.map_err(|e| csv_parse_error(&e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 columns, found {}", rec.len()),
            });
        }
        let (entity, year, feature, value) = (&rec[0], &rec[1], &rec[2], &rec[3]);
        if entity.is_empty() || feature.is_empty() {
            return Err(Error::Parse {
                line,
                message: "entity and feature must be non-empty".into(),
            });
        }
        let year: i32 = year.trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("year `{year}` is not an integer"),
        })?;
        let value: f64 = match value.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("value `{value}` is not a finite number"),
                })
            }
        };

        let e = *entity_ids.entry(entity.to_owned()).or_insert_with(|| {
            entities.push(entity.to_owned());
            entities.len() - 1
        });
        let f = *feature_ids.entry(feature.to_owned()).or_insert_with(|| {
            features.push(feature.to_owned());
            features.len() - 1
        });
        years.insert(year);
        if cells.insert((e, year, f), value).is_some() {
            return Err(Error::DuplicateCell {
                line,
                entity: entity.to_owned(),
                year,
                feature: feature.to_owned(),
            });
        }
    }

    if cells.is_empty() {
        return Err(Error::InvalidPanel("no data rows".into()));
    }

    let years: Vec<i32> = years.into_iter().collect();
    let mut values = Vec::with_capacity(entities.len() * years.len() * features.len());
    for (e, entity) in entities.iter().enumerate() {
        for &year in &years {
            for (f, feature) in features.iter().enumerate() {
                match cells.get(&(e, year, f)) {
                    Some(&v) => values.push(v),
                    None => {
                        return Err(Error::IncompletePanel {
                            entity: entity.clone(),
                            year,
                            feature: feature.clone(),
                        })
                    }
                }
            }
        }
    }
    FeaturePanel::new(entities, years, features, values)
}

fn csv_parse_error(err: &csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

/// The acquirer ("self") and its candidate targets ("nonself").
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSplit {
    pub self_panel: FeaturePanel,
    pub nonself_panel: FeaturePanel,
}

impl PanelSplit {
    pub fn self_id(&self) -> &str {
        &self.self_panel.entities[0]
    }
}

pub fn split_self_nonself(panel: &FeaturePanel, self_id: &str) -> Result<PanelSplit> {
    let self_idx = panel
        .entity_index(self_id)
        .ok_or_else(|| Error::NotFound(self_id.to_owned()))?;
    if panel.entities.len() < 2 {
        return Err(Error::NoCandidates);
    }
    let others: Vec<usize> = (0..panel.entities.len()).filter(|&e| e != self_idx).collect();
    Ok(PanelSplit {
        self_panel: panel.select_entities(&[self_idx]),
        nonself_panel: panel.select_entities(&others),
    })
}
