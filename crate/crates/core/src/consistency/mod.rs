//! Single-record metadata consistency rules.
//!
//! Nine rule groups, each looking at a set of related attributes and deciding
//! whether they agree with each other (or with external references such as a
//! camera capability table or an environment provider). A group whose inputs
//! are missing is skipped rather than guessed.

mod capability;
mod environment;
mod rules;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::ImageServiceRecord;

pub use capability::{CapabilityDb, CapabilityEntry, CapabilityError};
pub use environment::{
    Conditions, EnvError, EnvironmentProvider, FixtureEnvironment, NoEnvironment, PlaceLabels,
};
pub use rules::{
    check_capabilities, check_environment, check_exposure_triangle, check_exposure_value, check_gps_timezone,
    check_time_of_day, check_timestamp_order, compute_exposure_value, iso_adjusted_ev, EnvironmentFindings,
    ExposureDomainError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleGroup {
    #[serde(rename = "G1_timestamps")]
    Timestamps,
    #[serde(rename = "G2_capabilities")]
    Capabilities,
    #[serde(rename = "G3_exposure_value")]
    ExposureValue,
    #[serde(rename = "G4_exposure_triangle")]
    ExposureTriangle,
    #[serde(rename = "G5_time_of_day")]
    TimeOfDay,
    #[serde(rename = "G6_gps_timezone")]
    GpsTimezone,
    #[serde(rename = "G7_weather_settings")]
    WeatherSettings,
    #[serde(rename = "G8_environment")]
    Environment,
    #[serde(rename = "G9_water_depth")]
    WaterDepth,
}

impl RuleGroup {
    pub const ALL: [RuleGroup; 9] = [
        RuleGroup::Timestamps,
        RuleGroup::Capabilities,
        RuleGroup::ExposureValue,
        RuleGroup::ExposureTriangle,
        RuleGroup::TimeOfDay,
        RuleGroup::GpsTimezone,
        RuleGroup::WeatherSettings,
        RuleGroup::Environment,
        RuleGroup::WaterDepth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleGroup::Timestamps => "G1_timestamps",
            RuleGroup::Capabilities => "G2_capabilities",
            RuleGroup::ExposureValue => "G3_exposure_value",
            RuleGroup::ExposureTriangle => "G4_exposure_triangle",
            RuleGroup::TimeOfDay => "G5_time_of_day",
            RuleGroup::GpsTimezone => "G6_gps_timezone",
            RuleGroup::WeatherSettings => "G7_weather_settings",
            RuleGroup::Environment => "G8_environment",
            RuleGroup::WaterDepth => "G9_water_depth",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.as_str() == s)
    }

    /// Field paths the group reads.
    pub fn required_fields(self) -> &'static [&'static str] {
        match self {
            RuleGroup::Timestamps => &[
                "temporal.datetime_original",
                "temporal.datetime_digitized",
                "temporal.datetime_modified",
            ],
            RuleGroup::Capabilities => &[
                "camera.make",
                "camera.model",
                "camera.focal_length",
                "camera.aperture",
                "camera.iso",
                "camera.resolution",
            ],
            RuleGroup::ExposureValue => &[
                "camera.aperture",
                "camera.exposure_time",
                "camera.exposure_value",
                "camera.shutter_speed",
            ],
            RuleGroup::ExposureTriangle => &["camera.aperture", "camera.exposure_time", "camera.iso"],
            RuleGroup::TimeOfDay => &[
                "camera.aperture",
                "camera.exposure_time",
                "camera.iso",
                "temporal.datetime_original",
                "temporal.timezone_offset",
            ],
            RuleGroup::GpsTimezone => &[
                "spatial.latitude",
                "spatial.longitude",
                "spatial.city",
                "spatial.country",
                "temporal.timezone_offset",
                "temporal.datetime_original",
                "temporal.gps_timestamp",
            ],
            RuleGroup::WeatherSettings => &[
                "temporal.datetime_original",
                "spatial.latitude",
                "spatial.longitude",
                "camera.white_balance",
            ],
            RuleGroup::Environment => &[
                "environment.temperature",
                "environment.humidity",
                "environment.pressure",
                "environment.weather",
                "spatial.latitude",
                "spatial.longitude",
                "temporal.datetime_original",
            ],
            RuleGroup::WaterDepth => &["environment.water_depth", "spatial.latitude", "spatial.longitude"],
        }
    }
}

impl fmt::Display for RuleGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingStatus {
    Consistent,
    Inconsistent,
    SkippedMissingInputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFinding {
    pub group_id: RuleGroup,
    pub status: FindingStatus,
    /// 0 is fully consistent, 1 maximally inconsistent. Absent when skipped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    pub detail: String,
}

impl GroupFinding {
    pub fn skipped(group_id: RuleGroup, detail: impl Into<String>) -> Self {
        Self { group_id, status: FindingStatus::SkippedMissingInputs, score: None, detail: detail.into() }
    }

    pub fn judged(group_id: RuleGroup, inconsistent: bool, score: f64, detail: impl Into<String>) -> Self {
        Self {
            group_id,
            status: if inconsistent { FindingStatus::Inconsistent } else { FindingStatus::Consistent },
            score: Some(score.clamp(0.0, 1.0)),
            detail: detail.into(),
        }
    }

    pub fn is_inconsistent(&self) -> bool {
        self.status == FindingStatus::Inconsistent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InconsistencyReport {
    pub record_id: String,
    pub findings: Vec<GroupFinding>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<f64>,
}

impl InconsistencyReport {
    pub fn finding(&self, group: RuleGroup) -> &GroupFinding {
        self.findings
            .iter()
            .find(|f| f.group_id == group)
            .expect("reports carry one finding per group")
    }

    pub fn inconsistent_groups(&self) -> Vec<RuleGroup> {
        self.findings.iter().filter(|f| f.is_inconsistent()).map(|f| f.group_id).collect()
    }
}

/// Thresholds for every rule group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Max |recorded EV - recomputed EV|.
    pub ev: f64,
    /// Max |APEX shutter value - log2(1/exposure_time)|.
    pub shutter_apex: f64,
    /// Plausible ISO-100 scene band.
    pub ev_band_min: f64,
    pub ev_band_max: f64,
    /// EV of band exceedance that saturates the triangle score.
    pub ev_band_saturation: f64,
    pub day_ev_min: f64,
    pub night_ev_max: f64,
    pub day_start_hour: f64,
    pub day_end_hour: f64,
    pub timezone_slack_minutes: f64,
    pub gps_clock_slack_seconds: f64,
    pub temperature_c: f64,
    pub humidity_pct: f64,
    pub pressure_hpa: f64,
    pub water_depth_m: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ev: 0.5,
            shutter_apex: 0.5,
            ev_band_min: -2.0,
            ev_band_max: 20.0,
            ev_band_saturation: 4.0,
            day_ev_min: 10.0,
            night_ev_max: 4.0,
            day_start_hour: 6.0,
            day_end_hour: 18.0,
            timezone_slack_minutes: 120.0,
            gps_clock_slack_seconds: 300.0,
            temperature_c: 10.0,
            humidity_pct: 30.0,
            pressure_hpa: 25.0,
            water_depth_m: 1.0,
        }
    }
}

impl Tolerances {
    /// Field-level sanity checks; returns a description of the first problem.
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("ev", self.ev),
            ("shutter_apex", self.shutter_apex),
            ("ev_band_saturation", self.ev_band_saturation),
            ("timezone_slack_minutes", self.timezone_slack_minutes),
            ("gps_clock_slack_seconds", self.gps_clock_slack_seconds),
            ("temperature_c", self.temperature_c),
            ("humidity_pct", self.humidity_pct),
            ("pressure_hpa", self.pressure_hpa),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(format!("tolerance {name} must be > 0, got {v}"));
            }
        }
        if !(self.ev_band_min < self.ev_band_max) {
            return Err("ev_band_min must be below ev_band_max".into());
        }
        if !(self.night_ev_max < self.day_ev_min) {
            return Err("night_ev_max must be below day_ev_min".into());
        }
        if !(0.0 <= self.day_start_hour && self.day_start_hour < self.day_end_hour && self.day_end_hour <= 24.0) {
            return Err("day window must satisfy 0 <= start < end <= 24".into());
        }
        if !(self.water_depth_m >= 0.0) {
            return Err("water_depth_m must be >= 0".into());
        }
        Ok(())
    }
}

/// Runs every rule group against one record.
pub fn evaluate_all(
    record: &ImageServiceRecord,
    db: &CapabilityDb,
    env: &dyn EnvironmentProvider,
    tol: &Tolerances,
) -> InconsistencyReport {
    let temporal = record.temporal.as_ref();
    let camera = record.camera.as_ref();
    let spatial = record.spatial.as_ref();

    let g1 = match temporal {
        Some(t) => check_timestamp_order(t),
        None => GroupFinding::skipped(RuleGroup::Timestamps, "no temporal attributes"),
    };
    let (g2, g3, g4) = match camera {
        Some(c) => (check_capabilities(c, db), check_exposure_value(c, tol), check_exposure_triangle(c, tol)),
        None => (
            GroupFinding::skipped(RuleGroup::Capabilities, "no camera attributes"),
            GroupFinding::skipped(RuleGroup::ExposureValue, "no camera attributes"),
            GroupFinding::skipped(RuleGroup::ExposureTriangle, "no camera attributes"),
        ),
    };
    let g5 = match (camera, temporal) {
        (Some(c), Some(t)) => check_time_of_day(c, t, tol),
        _ => GroupFinding::skipped(RuleGroup::TimeOfDay, "needs camera and temporal attributes"),
    };
    let place = spatial.and_then(|s| env.place(s.latitude, s.longitude).ok().flatten());
    let g6 = check_gps_timezone(spatial, temporal, place.as_ref(), tol);
    let env_findings = check_environment(record, env, tol);

    let findings = vec![
        g1,
        g2,
        g3,
        g4,
        g5,
        g6,
        env_findings.weather_settings,
        env_findings.environment,
        env_findings.water_depth,
    ];
    let scores: Vec<f64> = findings.iter().filter_map(|f| f.score).collect();
    let aggregate = (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64);
    InconsistencyReport { record_id: record.id.clone(), findings, aggregate }
}

/// Reports for many records, in input order.
pub fn evaluate_many(
    records: &[ImageServiceRecord],
    db: &CapabilityDb,
    env: &dyn EnvironmentProvider,
    tol: &Tolerances,
    exec: crate::par::Exec,
) -> Vec<InconsistencyReport> {
    crate::par::map_slice(exec, records, |r| evaluate_all(r, db, env, tol))
}
