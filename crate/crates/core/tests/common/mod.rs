//! Straight-line reference pipeline written from the formulas alone.
//! Shares no code with the library beyond plain `f64` arithmetic.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

/// `raw[e][y][f]`, entity 0 is the self.
pub type Cube = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleMeasure {
    Distance,
    Angle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrial {
    /// Scores of nonself entities 1..E, in panel order.
    pub scores: Vec<f64>,
    /// Nonself positions (0-based among nonselfs) from rank 1 down.
    pub order: Vec<usize>,
}

pub fn normalize_per_entity(raw: &Cube) -> Cube {
    let years = raw[0].len();
    let features = raw[0][0].len();
    let mut out = raw.clone();
    for e in 0..raw.len() {
        for f in 0..features {
            let mut lo = raw[e][0][f];
            let mut hi = raw[e][0][f];
            for y in 1..years {
                if raw[e][y][f] < lo {
                    lo = raw[e][y][f];
                }
                if raw[e][y][f] > hi {
                    hi = raw[e][y][f];
                }
            }
            for y in 0..years {
                out[e][y][f] = if hi == lo { 0.0 } else { (raw[e][y][f] - lo) / (hi - lo) };
            }
        }
    }
    out
}

fn growth(series: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for j in 1..series.len() {
        let last = series[j - 1];
        if last != 0.0 {
            total += (series[j] - last) / last;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// One trial: detectors from the self's normalized series, mask, compare.
/// Returns `None` when every self feature is fully zero under the angle.
pub fn trial(raw: &Cube, n: f64, u: &[f64], measure: OracleMeasure, raw_growth: bool) -> Option<OracleTrial> {
    let norm = normalize_per_entity(raw);
    let years = raw[0].len();
    let features = raw[0][0].len();

    let mut accepted = vec![vec![0.0; features]; years];
    for f in 0..features {
        let x: Vec<f64> = (0..years).map(|y| norm[0][y][f]).collect();
        let mu = x.iter().sum::<f64>() / years as f64;
        let sd = (x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / years as f64).sqrt();
        let g = if raw_growth {
            growth(&(0..years).map(|y| raw[0][y][f]).collect::<Vec<_>>())
        } else {
            growth(&x)
        };
        let c = u[f] * g;
        let lower = mu - n * sd - c;
        let upper = mu + n * sd + c;
        for y in 0..years {
            let inside = lower <= upper && lower <= x[y] && x[y] <= upper;
            accepted[y][f] = if inside { 0.0 } else { x[y] };
        }
    }

    let mut used = vec![true; features];
    if measure == OracleMeasure::Angle {
        for f in 0..features {
            used[f] = (0..years).any(|y| accepted[y][f] != 0.0);
        }
        if used.iter().all(|u| !u) {
            return None;
        }
    }
    let used_count = used.iter().filter(|u| **u).count() as f64;

    let mut scores = Vec::new();
    for e in 1..raw.len() {
        let mut total = 0.0;
        for f in 0..features {
            if !used[f] {
                continue;
            }
            let component = match measure {
                OracleMeasure::Distance => {
                    let mut s = 0.0;
                    for y in 0..years {
                        let d = accepted[y][f] - norm[e][y][f];
                        s += d * d;
                    }
                    s.sqrt()
                }
                OracleMeasure::Angle => {
                    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                    for y in 0..years {
                        dot += accepted[y][f] * norm[e][y][f];
                        na += accepted[y][f] * accepted[y][f];
                        nb += norm[e][y][f] * norm[e][y][f];
                    }
                    if nb == 0.0 {
                        FRAC_PI_2
                    } else {
                        let c = dot / (na.sqrt() * nb.sqrt());
                        c.max(-1.0).min(1.0).acos()
                    }
                }
            };
            total += component;
        }
        scores.push(total / used_count);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    // insertion sort: higher score first, earlier entity first on ties
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (order[j - 1], order[j]);
            if scores[b] > scores[a] || (scores[b] == scores[a] && b < a) {
                order.swap(j - 1, j);
                j -= 1;
            } else {
                break;
            }
        }
    }
    Some(OracleTrial { scores, order })
}

/// Panel values in the library's flat layout.
pub fn flatten(raw: &Cube) -> Vec<f64> {
    raw.iter().flat_map(|e| e.iter().flat_map(|y| y.iter().copied())).collect()
}

pub fn unflatten(values: &[f64], entities: usize, years: usize, features: usize) -> Cube {
    (0..entities)
        .map(|e| {
            (0..years)
                .map(|y| {
                    let start = (e * years + y) * features;
                    values[start..start + features].to_vec()
                })
                .collect()
        })
        .collect()
}
