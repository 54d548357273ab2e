//! Canonical data model for image services.
//!
//! A record holds one version of an image: its upload time plus the
//! non-functional attribute groups (spatial, temporal, contextual, and the
//! intrinsic camera/environment tags). Functional capture attributes are
//! carried along but nothing downstream reads them.
//!
//! Records enter the system either as sidecar documents ([`parse_record`],
//! [`parse_corpus`]) or as raw tag maps from an external extractor
//! ([`canonicalize_tags`]). Both paths produce the same canonical form:
//! UTC timestamps, decimal-degree GPS, f-number apertures, seconds for
//! exposure time.

mod parse;
mod tags;
pub(crate) mod values;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use parse::{parse_corpus, parse_record, serialize_corpus, serialize_record, Corpus};
pub use tags::{canonicalize_tags, Canonicalized};

pub type Timestamp = DateTime<Utc>;

/// Error raised while reading sidecar documents.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("malformed document: {0}")]
    Shape(String),
    #[error("{} validation violation(s): {}", .0.len(), summarize(.0))]
    Validation(Vec<ValidationViolation>),
}

fn summarize(v: &[ValidationViolation]) -> String {
    v.iter()
        .map(|v| format!("{}: {}", v.field_path, v.message))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageServiceRecord {
    pub id: String,
    #[serde(with = "values::ts")]
    pub upload_time: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<FunctionalAttrs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial: Option<SpatialAttrs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal: Option<TemporalAttrs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contextual: Option<ContextualAttrs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraAttrs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentAttrs>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, String>,
}

impl ImageServiceRecord {
    /// A record with nothing but an id and an upload time.
    pub fn bare(id: impl Into<String>, upload_time: Timestamp) -> Self {
        Self {
            id: id.into(),
            upload_time,
            functional: None,
            spatial: None,
            temporal: None,
            contextual: None,
            camera: None,
            environment: None,
            extras: BTreeMap::new(),
        }
    }

    /// Capture time as recorded by the camera, if any.
    pub fn datetime_original(&self) -> Option<Timestamp> {
        self.temporal.as_ref().and_then(|t| t.datetime_original)
    }

    /// Title, caption and headline joined by newlines; `None` when all are absent.
    pub fn context_text(&self) -> Option<String> {
        let c = self.contextual.as_ref()?;
        let parts: Vec<&str> = [&c.title, &c.caption, &c.headline]
            .into_iter()
            .filter_map(|s| s.as_deref())
            .collect();
        if parts.is_empty() {
            None
        } else {
            Some(parts.join("\n"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureAction {
    ShutterPress,
    Timed,
    Panoramic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSwitch {
    Photo,
    Video,
}

/// Capture actions. Stored, never consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalAttrs {
    pub capture_action: CaptureAction,
    pub mode_switch: ModeSwitch,
    pub capture_delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialAttrs {
    pub latitude: f64,
    pub longitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TemporalAttrs {
    #[serde(default, with = "values::ts_opt", skip_serializing_if = "Option::is_none")]
    pub datetime_original: Option<Timestamp>,
    #[serde(default, with = "values::ts_opt", skip_serializing_if = "Option::is_none")]
    pub datetime_digitized: Option<Timestamp>,
    #[serde(default, with = "values::ts_opt", skip_serializing_if = "Option::is_none")]
    pub datetime_modified: Option<Timestamp>,
    /// Signed minutes east of UTC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timezone_offset: Option<i32>,
    #[serde(default, with = "values::ts_opt", skip_serializing_if = "Option::is_none")]
    pub gps_timestamp: Option<Timestamp>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContextualAttrs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub headline: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhiteBalance {
    Auto,
    Daylight,
    Cloudy,
    Tungsten,
    Fluorescent,
    Flash,
}

impl WhiteBalance {
    pub const ALL: [WhiteBalance; 6] = [
        WhiteBalance::Auto,
        WhiteBalance::Daylight,
        WhiteBalance::Cloudy,
        WhiteBalance::Tungsten,
        WhiteBalance::Fluorescent,
        WhiteBalance::Flash,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WhiteBalance::Auto => "auto",
            WhiteBalance::Daylight => "daylight",
            WhiteBalance::Cloudy => "cloudy",
            WhiteBalance::Tungsten => "tungsten",
            WhiteBalance::Fluorescent => "fluorescent",
            WhiteBalance::Flash => "flash",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL.into_iter().find(|wb| wb.as_str() == s)
    }

    /// Position in [`WhiteBalance::ALL`], used as an ordinal coordinate.
    pub fn ordinal(self) -> usize {
        Self::ALL.iter().position(|&w| w == self).unwrap_or(0)
    }
}

impl fmt::Display for WhiteBalance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CameraAttrs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub make: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Millimetres.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focal_length: Option<f64>,
    /// f-number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aperture: Option<f64>,
    /// Seconds. Unit of record for shutter timing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposure_time: Option<f64>,
    /// APEX time value, kept for cross-checking against `exposure_time`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shutter_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iso: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposure_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub white_balance: Option<WhiteBalance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<(u32, u32)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentAttrs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub humidity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weather: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub water_depth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationViolation {
    pub record_id: String,
    pub field_path: String,
    pub message: String,
}

impl ValidationViolation {
    pub fn new(record_id: &str, field_path: &str, message: impl Into<String>) -> Self {
        Self {
            record_id: record_id.to_string(),
            field_path: field_path.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.record_id, self.field_path, self.message)
    }
}

pub const MAX_TZ_OFFSET_MINUTES: i32 = 14 * 60;

/// Checks every type invariant. Empty result means the record is valid.
pub fn validate(record: &ImageServiceRecord) -> Vec<ValidationViolation> {
    let id = record.id.as_str();
    let mut out = Vec::new();
    let mut fail = |path: &str, msg: String| out.push(ValidationViolation::new(id, path, msg));

    if record.id.trim().is_empty() {
        fail("id", "id must be non-empty".into());
    }
    if let Some(f) = &record.functional {
        if !(f.capture_delay >= 0.0) {
            fail("functional.capture_delay", format!("{} must be >= 0", f.capture_delay));
        }
    }
    if let Some(s) = &record.spatial {
        if !(-90.0..=90.0).contains(&s.latitude) {
            fail("spatial.latitude", format!("{} outside [-90, 90]", s.latitude));
        }
        if !(-180.0..=180.0).contains(&s.longitude) {
            fail("spatial.longitude", format!("{} outside [-180, 180]", s.longitude));
        }
    }
    if let Some(t) = &record.temporal {
        if let Some(tz) = t.timezone_offset {
            if tz.abs() > MAX_TZ_OFFSET_MINUTES {
                fail("temporal.timezone_offset", format!("{tz} minutes outside [-840, 840]"));
            }
        }
    }
    if let Some(c) = &record.camera {
        let positive = [
            ("camera.focal_length", c.focal_length),
            ("camera.aperture", c.aperture),
            ("camera.exposure_time", c.exposure_time),
        ];
        for (path, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    fail(path, format!("{v} must be > 0"));
                }
            }
        }
        if c.iso == Some(0) {
            fail("camera.iso", "0 must be > 0".into());
        }
        for (path, v) in [("camera.shutter_speed", c.shutter_speed), ("camera.exposure_value", c.exposure_value)] {
            if let Some(v) = v {
                if !v.is_finite() {
                    fail(path, format!("{v} is not finite"));
                }
            }
        }
        if let Some((w, h)) = c.resolution {
            if w == 0 || h == 0 {
                fail("camera.resolution", format!("{w}x{h} must be positive"));
            }
        }
    }
    if let Some(e) = &record.environment {
        if let Some(h) = e.humidity {
            if !(0.0..=100.0).contains(&h) {
                fail("environment.humidity", format!("{h} outside [0, 100]"));
            }
        }
        if let Some(p) = e.pressure {
            if !(p > 0.0) {
                fail("environment.pressure", format!("{p} must be > 0"));
            }
        }
        if let Some(d) = e.water_depth {
            if !(d >= 0.0) {
                fail("environment.water_depth", format!("{d} must be >= 0"));
            }
        }
        if let Some(t) = e.temperature {
            if !t.is_finite() {
                fail("environment.temperature", format!("{t} is not finite"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn base() -> ImageServiceRecord {
        ImageServiceRecord::bare("r1", Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap())
    }

    #[test]
    fn valid_record_has_no_violations() {
        let mut r = base();
        r.spatial = Some(SpatialAttrs {
            latitude: 40.7128,
            longitude: -74.006,
            city: Some("New York".into()),
            state: None,
            country: None,
        });
        r.camera = Some(CameraAttrs { iso: Some(100), aperture: Some(4.0), ..Default::default() });
        assert!(validate(&r).is_empty());
    }

    #[test]
    fn humidity_out_of_range() {
        let mut r = base();
        r.environment = Some(EnvironmentAttrs { humidity: Some(120.0), ..Default::default() });
        let v = validate(&r);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field_path, "environment.humidity");
    }

    #[test]
    fn two_camera_violations() {
        let mut r = base();
        r.camera = Some(CameraAttrs { iso: Some(0), exposure_time: Some(-1.0), ..Default::default() });
        let v = validate(&r);
        assert_eq!(v.len(), 2);
        let paths: Vec<_> = v.iter().map(|v| v.field_path.as_str()).collect();
        assert!(paths.contains(&"camera.iso"));
        assert!(paths.contains(&"camera.exposure_time"));
    }

    #[test]
    fn timezone_bounds() {
        let mut r = base();
        r.temporal = Some(TemporalAttrs { timezone_offset: Some(840), ..Default::default() });
        assert!(validate(&r).is_empty());
        r.temporal = Some(TemporalAttrs { timezone_offset: Some(-841), ..Default::default() });
        assert_eq!(validate(&r)[0].field_path, "temporal.timezone_offset");
    }

    #[test]
    fn context_text_joins_present_parts() {
        let mut r = base();
        assert_eq!(r.context_text(), None);
        r.contextual = Some(ContextualAttrs {
            title: Some("a".into()),
            caption: None,
            headline: Some("b".into()),
        });
        assert_eq!(r.context_text().as_deref(), Some("a\nb"));
    }
}
