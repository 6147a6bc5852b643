//! Synthetic panels with one planted outlier, used as test fixtures.
//!
//! The self grows steadily in every feature. Ordinary nonselfs are scaled,
//! slightly noisy copies of the self. The outlier sits orders of magnitude
//! below the self and shrinks year over year, so it lies outside the self's
//! range on the raw scale and runs against its trend after normalization.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::FeaturePanel;

/// The 18 banking indicators of the reference case study, used as feature
/// names when a synthetic panel asks for that many or fewer.
pub const BANK_FEATURES: [&str; 18] = [
    "number_of_offices",
    "number_of_employees",
    "business_per_employee",
    "profit_per_employee",
    "capital_and_reserves_surplus",
    "deposits",
    "investments",
    "advances",
    "interest_income",
    "other_income",
    "interest_expended",
    "operating_expenses",
    "cost_of_funds",
    "return_on_assets",
    "wages_pct_total_expenses",
    "return_on_advances_adj_cof",
    "crar",
    "net_npa_ratio",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSpec {
    /// Total entity count, self and outlier included.
    pub entities: usize,
    pub features: usize,
    pub years: usize,
    pub first_year: i32,
    pub self_name: String,
    pub outlier: String,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            entities: 8,
            features: 18,
            years: 4,
            first_year: 2005,
            self_name: "SELF".into(),
            outlier: "TGT".into(),
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.entities < 2 {
            return Err(Error::InvalidParameter("need at least 2 entities (self and outlier)".into()));
        }
        if self.features < 1 {
            return Err(Error::InvalidParameter("need at least 1 feature".into()));
        }
        if self.years < 2 {
            return Err(Error::InvalidParameter("need at least 2 years".into()));
        }
        if self.self_name == self.outlier || self.self_name.is_empty() || self.outlier.is_empty() {
            return Err(Error::InvalidParameter("self and outlier names must be distinct and non-empty".into()));
        }
        Ok(())
    }

    fn entity_names(&self) -> Vec<String> {
        let ordinary = self.entities - 2;
        let mut names = vec![self.self_name.clone()];
        let mut k = 1;
        while names.len() < ordinary + 1 {
            let name = format!("N{k:02}");
            if name != self.outlier && name != self.self_name {
                names.push(name);
            }
            k += 1;
        }
        names.push(self.outlier.clone());
        names
    }

    fn feature_names(&self) -> Vec<String> {
        if self.features <= BANK_FEATURES.len() {
            BANK_FEATURES[..self.features].iter().map(|s| s.to_string()).collect()
        } else {
            (1..=self.features).map(|f| format!("feature_{f:02}")).collect()
        }
    }
}

pub fn synth_panel(spec: &SynthSpec) -> Result<FeaturePanel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n_e, n_y, n_f) = (spec.entities, spec.years, spec.features);

    // self[f][y]
    let self_series: Vec<Vec<f64>> = (0..n_f)
        .map(|_| {
            let level = 10f64.powf(rng.gen_range(1.0..4.0));
            let growth: f64 = rng.gen_range(0.06..0.20);
            (0..n_y)
                .map(|y| level * (1.0 + growth).powi(y as i32) * (1.0 + rng.gen_range(-0.01..0.01)))
                .collect()
        })
        .collect();

    let mut values = vec![0.0; n_e * n_y * n_f];
    let mut put = |e: usize, y: usize, f: usize, v: f64| values[(e * n_y + y) * n_f + f] = v;

    for f in 0..n_f {
        for y in 0..n_y {
            put(0, y, f, self_series[f][y]);
        }
    }
    for e in 1..n_e - 1 {
        let scale = rng.gen_range(0.1..0.9);
        for f in 0..n_f {
            for y in 0..n_y {
                let noise = 1.0 + rng.gen_range(-0.015..0.015);
                put(e, y, f, scale * self_series[f][y] * noise);
            }
        }
    }
    let outlier = n_e - 1;
    for f in 0..n_f {
        let scale = rng.gen_range(0.001..0.01);
        let decline: f64 = rng.gen_range(0.10..0.30);
        for y in 0..n_y {
            let noise = 1.0 + rng.gen_range(-0.01..0.01);
            put(outlier, y, f, scale * self_series[f][0] * (1.0 - decline).powi(y as i32) * noise);
        }
    }

    FeaturePanel::new(
        spec.entity_names(),
        (0..n_y as i32).map(|y| spec.first_year + y).collect(),
        spec.feature_names(),
        values,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::parse_panel_csv;

    #[test]
    fn default_shape() {
        let p = synth_panel(&SynthSpec::default()).unwrap();
        assert_eq!(p.dims(), (8, 4, 18));
        assert_eq!(p.entities()[0], "SELF");
        assert_eq!(p.entities()[7], "TGT");
        assert_eq!(p.years(), &[2005, 2006, 2007, 2008]);
        let csv = p.to_csv_string();
        assert_eq!(csv.lines().count(), 577);
        assert_eq!(parse_panel_csv(csv.as_bytes()).unwrap(), p);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_panel(&SynthSpec::default()).unwrap().to_csv_string();
        let b = synth_panel(&SynthSpec::default()).unwrap().to_csv_string();
        let c = synth_panel(&SynthSpec { seed: 8, ..Default::default() }).unwrap().to_csv_string();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn outlier_outside_self_range() {
        let p = synth_panel(&SynthSpec::default()).unwrap();
        for f in 0..18 {
            let own = p.series(0, f);
            let lo = own.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(p.series(7, f).iter().all(|v| *v < lo));
            // self rises, outlier falls
            assert!(own.windows(2).all(|w| w[1] > w[0]));
            assert!(p.series(7, f).windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn name_collisions_and_validation() {
        let p = synth_panel(&SynthSpec {
            entities: 4,
            features: 20,
            outlier: "N01".into(),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(p.entities(), &["SELF", "N02", "N03", "N01"]);
        assert_eq!(p.features()[19], "feature_20");

        for bad in [
            SynthSpec { entities: 1, ..Default::default() },
            SynthSpec { years: 1, ..Default::default() },
            SynthSpec { features: 0, ..Default::default() },
            SynthSpec { outlier: "SELF".into(), ..Default::default() },
        ] {
            assert!(matches!(synth_panel(&bad), Err(Error::InvalidParameter(_))));
        }
    }
}
