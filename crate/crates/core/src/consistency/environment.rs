//! Where weather and bathymetry come from. Live services are out of reach, so
//! the shipped provider answers from a fixture table keyed by grid cell and
//! date.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::WhiteBalance;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("cannot read environment fixture: {0}")]
    Io(#[from] std::io::Error),
    #[error("environment fixture is malformed: {0}")]
    Format(#[from] serde_json::Error),
    #[error("environment fixture: {0}")]
    Invalid(String),
    #[error("environment provider unavailable: {0}")]
    Unavailable(String),
}

/// Observed conditions at a place on a date.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weather: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub humidity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure: Option<f64>,
}

/// Gazetteer labels and bathymetry for a grid cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlaceLabels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    /// Deepest water reachable in the cell, 0 for dry land.
    #[serde(default, rename = "water_depth_max", skip_serializing_if = "Option::is_none")]
    pub max_water_depth: Option<f64>,
}

pub trait EnvironmentProvider: Send + Sync {
    fn conditions(&self, latitude: f64, longitude: f64, date: NaiveDate) -> Result<Option<Conditions>, EnvError>;
    fn place(&self, latitude: f64, longitude: f64) -> Result<Option<PlaceLabels>, EnvError>;
    /// `None` when the provider has no opinion about this weather label.
    fn white_balance_compatible(&self, weather: &str, wb: WhiteBalance) -> Option<bool>;
}

/// Knows nothing; every provider-backed group is skipped.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoEnvironment;

impl EnvironmentProvider for NoEnvironment {
    fn conditions(&self, _: f64, _: f64, _: NaiveDate) -> Result<Option<Conditions>, EnvError> {
        Ok(None)
    }
    fn place(&self, _: f64, _: f64) -> Result<Option<PlaceLabels>, EnvError> {
        Ok(None)
    }
    fn white_balance_compatible(&self, _: &str, _: WhiteBalance) -> Option<bool> {
        None
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConditionRow {
    lat_cell: i32,
    lon_cell: i32,
    date: NaiveDate,
    #[serde(flatten)]
    conditions: Conditions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PlaceRow {
    lat_cell: i32,
    lon_cell: i32,
    #[serde(flatten)]
    labels: PlaceLabels,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FixtureFile {
    cell_size_deg: f64,
    #[serde(default)]
    conditions: Vec<ConditionRow>,
    #[serde(default)]
    places: Vec<PlaceRow>,
    /// weather label -> white balance presets that suit it
    #[serde(default)]
    white_balance: BTreeMap<String, Vec<WhiteBalance>>,
}

#[derive(Debug, Clone)]
pub struct FixtureEnvironment {
    cell_size: f64,
    conditions: BTreeMap<(i32, i32, NaiveDate), Conditions>,
    places: BTreeMap<(i32, i32), PlaceLabels>,
    white_balance: BTreeMap<String, Vec<WhiteBalance>>,
}

const BUNDLED: &str = include_str!("../../data/environment.json");

impl FixtureEnvironment {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled environment fixture is valid")
    }

    pub fn load(path: &Path) -> Result<Self, EnvError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let file: FixtureFile = serde_json::from_str(text)?;
        if !(file.cell_size_deg > 0.0 && file.cell_size_deg <= 180.0) {
            return Err(EnvError::Invalid(format!("cell_size_deg {} out of (0, 180]", file.cell_size_deg)));
        }
        let mut conditions = BTreeMap::new();
        for row in file.conditions {
            let key = (row.lat_cell, row.lon_cell, row.date);
            if conditions.insert(key, row.conditions).is_some() {
                return Err(EnvError::Invalid(format!("duplicate conditions for cell {key:?}")));
            }
        }
        let mut places = BTreeMap::new();
        for row in file.places {
            if row.labels.max_water_depth.is_some_and(|d| d < 0.0) {
                return Err(EnvError::Invalid(format!("negative water depth in cell ({}, {})", row.lat_cell, row.lon_cell)));
            }
            if places.insert((row.lat_cell, row.lon_cell), row.labels).is_some() {
                return Err(EnvError::Invalid(format!("duplicate place for cell ({}, {})", row.lat_cell, row.lon_cell)));
            }
        }
        let white_balance = file.white_balance.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect();
        Ok(Self { cell_size: file.cell_size_deg, conditions, places, white_balance })
    }

    pub fn cell(&self, latitude: f64, longitude: f64) -> (i32, i32) {
        ((latitude / self.cell_size).floor() as i32, (longitude / self.cell_size).floor() as i32)
    }
}

impl EnvironmentProvider for FixtureEnvironment {
    fn conditions(&self, latitude: f64, longitude: f64, date: NaiveDate) -> Result<Option<Conditions>, EnvError> {
        let (la, lo) = self.cell(latitude, longitude);
        Ok(self.conditions.get(&(la, lo, date)).cloned())
    }

    fn place(&self, latitude: f64, longitude: f64) -> Result<Option<PlaceLabels>, EnvError> {
        Ok(self.places.get(&self.cell(latitude, longitude)).cloned())
    }

    fn white_balance_compatible(&self, weather: &str, wb: WhiteBalance) -> Option<bool> {
        self.white_balance.get(&weather.trim().to_lowercase()).map(|ok| ok.contains(&wb))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_floor_toward_negative_infinity() {
        let env = FixtureEnvironment::bundled();
        assert_eq!(env.cell(40.7128, -74.006), (40, -75));
        assert_eq!(env.cell(-0.5, 0.5), (-1, 0));
    }

    #[test]
    fn bundled_lookup() {
        let env = FixtureEnvironment::bundled();
        let date = NaiveDate::from_ymd_opt(2009, 1, 15).unwrap();
        let c = env.conditions(40.7128, -74.006, date).unwrap().unwrap();
        assert_eq!(c.weather.as_deref(), Some("sunny"));
        assert_eq!(env.white_balance_compatible("Sunny", WhiteBalance::Daylight), Some(true));
        assert_eq!(env.white_balance_compatible("sunny", WhiteBalance::Tungsten), Some(false));
        assert_eq!(env.white_balance_compatible("volcanic ash", WhiteBalance::Tungsten), None);
    }

    #[test]
    fn duplicate_cells_rejected() {
        let text = r#"{"cell_size_deg":1,"places":[{"lat_cell":0,"lon_cell":0},{"lat_cell":0,"lon_cell":0}]}"#;
        assert!(FixtureEnvironment::from_json(text).is_err());
    }
}
