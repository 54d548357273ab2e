//! Sidecar document reader/writer.
//!
//! The sidecar format is JSON. Scalars are accepted leniently (numbers or
//! strings; rationals, DMS coordinates, EXIF-style dates) and canonicalized on
//! the way in. Unknown keys are kept in `extras` under their dotted path.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;
use serde_json::{Map, Value};

use super::values::{parse_coordinate, parse_offset_minutes, parse_rational, parse_timestamp};
use super::*;

/// A set of versions plus an optional ground-truth parent map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corpus {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_id: Option<String>,
    pub versions: Vec<ImageServiceRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth_tree: Option<BTreeMap<String, Option<String>>>,
}

pub fn parse_record(bytes: &[u8]) -> Result<ImageServiceRecord, ModelError> {
    let value = parse_json(bytes)?;
    let obj = value
        .as_object()
        .ok_or_else(|| ModelError::Shape("record must be an object".into()))?;
    let mut violations = Vec::new();
    let record = record_from_object(obj, &mut violations)?;
    violations.extend(validate(&record));
    if violations.is_empty() {
        Ok(record)
    } else {
        Err(ModelError::Validation(violations))
    }
}

pub fn parse_corpus(bytes: &[u8]) -> Result<Corpus, ModelError> {
    let value = parse_json(bytes)?;
    let obj = value
        .as_object()
        .ok_or_else(|| ModelError::Shape("corpus must be an object".into()))?;
    let versions = obj
        .get("versions")
        .and_then(Value::as_array)
        .ok_or_else(|| ModelError::Shape("corpus needs a `versions` array".into()))?;
    let mut violations = Vec::new();
    let mut records = Vec::with_capacity(versions.len());
    for (i, v) in versions.iter().enumerate() {
        let obj = v
            .as_object()
            .ok_or_else(|| ModelError::Shape(format!("versions[{i}] must be an object")))?;
        let r = record_from_object(obj, &mut violations)?;
        violations.extend(validate(&r));
        records.push(r);
    }
    let mut seen = HashSet::new();
    for r in &records {
        if !seen.insert(r.id.as_str()) {
            violations.push(ValidationViolation::new(&r.id, "id", format!("duplicate id {:?}", r.id)));
        }
    }
    if !violations.is_empty() {
        return Err(ModelError::Validation(violations));
    }
    let ground_truth_tree = match obj.get("ground_truth_tree") {
        None | Some(Value::Null) => None,
        Some(Value::Object(m)) => {
            let mut tree = BTreeMap::new();
            for (child, parent) in m {
                let parent = match parent {
                    Value::Null => None,
                    Value::String(s) => Some(s.clone()),
                    other => return Err(ModelError::Shape(format!("ground_truth_tree[{child}] = {other}"))),
                };
                tree.insert(child.clone(), parent);
            }
            Some(tree)
        }
        Some(_) => return Err(ModelError::Shape("ground_truth_tree must be an object".into())),
    };
    Ok(Corpus {
        image_id: obj.get("image_id").and_then(Value::as_str).map(str::to_string),
        versions: records,
        ground_truth_tree,
    })
}

pub fn serialize_record(record: &ImageServiceRecord) -> String {
    to_pretty(record)
}

pub fn serialize_corpus(corpus: &Corpus) -> String {
    to_pretty(corpus)
}

fn to_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("canonical types always serialize");
    s.push('\n');
    s
}

fn parse_json(bytes: &[u8]) -> Result<Value, ModelError> {
    serde_json::from_slice(bytes).map_err(|e| ModelError::Syntax {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current = 1;
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if current == line {
            break;
        }
        if b == b'\n' {
            current += 1;
            start = i + 1;
        }
    }
    (start + column.saturating_sub(1)).min(bytes.len())
}

/// Reads the fields of one group object, collecting leftovers into extras.
struct Fields<'a> {
    group: &'static str,
    obj: &'a Map<String, Value>,
    used: HashSet<&'static str>,
}

impl<'a> Fields<'a> {
    fn new(group: &'static str, obj: &'a Map<String, Value>) -> Self {
        Self { group, obj, used: HashSet::new() }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.insert(key);
        self.obj.get(key).filter(|v| !v.is_null())
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.group)
    }

    fn string(&mut self, key: &'static str) -> Option<String> {
        self.raw(key).map(|v| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }

    fn real_with(
        &mut self,
        key: &'static str,
        id: &str,
        out: &mut Vec<ValidationViolation>,
        conv: impl Fn(&str) -> Option<f64>,
    ) -> Option<f64> {
        let v = self.raw(key)?;
        let parsed = match v {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => conv(s),
            _ => None,
        };
        if parsed.is_none() {
            out.push(ValidationViolation::new(id, &self.path(key), format!("cannot read {v} as a number")));
        }
        parsed
    }

    fn real(&mut self, key: &'static str, id: &str, out: &mut Vec<ValidationViolation>) -> Option<f64> {
        self.real_with(key, id, out, parse_rational)
    }

    fn timestamp(
        &mut self,
        key: &'static str,
        tz: Option<i32>,
        id: &str,
        out: &mut Vec<ValidationViolation>,
    ) -> Option<Timestamp> {
        let v = self.raw(key)?;
        let parsed = v.as_str().and_then(|s| parse_timestamp(s, tz));
        if parsed.is_none() {
            out.push(ValidationViolation::new(id, &self.path(key), format!("cannot read {v} as a timestamp")));
        }
        parsed
    }

    fn leftovers(&self, extras: &mut BTreeMap<String, String>) {
        for (k, v) in self.obj {
            if !self.used.contains(k.as_str()) {
                extras.insert(self.path(k), scalar_string(v));
            }
        }
    }
}

fn scalar_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn group<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<Option<&'a Map<String, Value>>, ModelError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Object(m)) => Ok(Some(m)),
        Some(other) => Err(ModelError::Shape(format!("`{key}` must be an object, found {other}"))),
    }
}

const TOP_LEVEL: [&str; 9] = [
    "id",
    "upload_time",
    "functional",
    "spatial",
    "temporal",
    "contextual",
    "camera",
    "environment",
    "extras",
];

fn record_from_object(
    obj: &Map<String, Value>,
    violations: &mut Vec<ValidationViolation>,
) -> Result<ImageServiceRecord, ModelError> {
    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err(ModelError::Shape("record needs a string `id`".into())),
    };
    let upload_time = obj
        .get("upload_time")
        .and_then(Value::as_str)
        .and_then(|s| parse_timestamp(s, None))
        .ok_or_else(|| ModelError::Shape(format!("record {id:?} needs an ISO-8601 `upload_time`")))?;

    let mut record = ImageServiceRecord::bare(id.clone(), upload_time);
    let mut extras = BTreeMap::new();

    if let Some(m) = group(obj, "extras")? {
        for (k, v) in m {
            extras.insert(k.clone(), scalar_string(v));
        }
    }
    for (k, v) in obj {
        if !TOP_LEVEL.contains(&k.as_str()) {
            extras.insert(k.clone(), scalar_string(v));
        }
    }

    if let Some(m) = group(obj, "functional")? {
        let mut f = Fields::new("functional", m);
        let action = f.string("capture_action");
        let mode = f.string("mode_switch");
        let delay = f.real("capture_delay", &id, violations);
        let action = action.and_then(|s| enum_from_str::<CaptureAction>(&s, "functional.capture_action", &id, violations));
        let mode = mode.and_then(|s| enum_from_str::<ModeSwitch>(&s, "functional.mode_switch", &id, violations));
        match (action, mode) {
            (Some(capture_action), Some(mode_switch)) => {
                record.functional = Some(FunctionalAttrs {
                    capture_action,
                    mode_switch,
                    capture_delay: delay.unwrap_or(0.0),
                })
            }
            _ => violations.push(ValidationViolation::new(
                &id,
                "functional",
                "capture_action and mode_switch are required",
            )),
        }
        f.leftovers(&mut extras);
    }

    if let Some(m) = group(obj, "spatial")? {
        let mut f = Fields::new("spatial", m);
        let lat_ref = f.string("latitude_ref");
        let lon_ref = f.string("longitude_ref");
        let lat = f.real_with("latitude", &id, violations, |s| parse_coordinate(s, lat_ref.as_deref()));
        let lon = f.real_with("longitude", &id, violations, |s| parse_coordinate(s, lon_ref.as_deref()));
        let lat = lat.map(|v| apply_ref(v, lat_ref.as_deref()));
        let lon = lon.map(|v| apply_ref(v, lon_ref.as_deref()));
        let city = f.string("city");
        let state = f.string("state");
        let country = f.string("country");
        match (lat, lon) {
            (Some(latitude), Some(longitude)) => {
                record.spatial = Some(SpatialAttrs { latitude, longitude, city, state, country })
            }
            _ => {
                for key in ["latitude", "longitude"] {
                    if m.get(key).is_none_or(Value::is_null) {
                        violations.push(ValidationViolation::new(&id, &format!("spatial.{key}"), "required"));
                    }
                }
            }
        }
        f.leftovers(&mut extras);
    }

    if let Some(m) = group(obj, "temporal")? {
        let mut f = Fields::new("temporal", m);
        let tz = f.raw("timezone_offset").map(|v| {
            let parsed = match v {
                Value::Number(n) => n.as_i64().and_then(|n| i32::try_from(n).ok()),
                Value::String(s) => parse_offset_minutes(s),
                _ => None,
            };
            if parsed.is_none() {
                violations.push(ValidationViolation::new(&id, "temporal.timezone_offset", format!("cannot read {v}")));
            }
            parsed
        });
        let tz = tz.flatten();
        let t = TemporalAttrs {
            datetime_original: f.timestamp("datetime_original", tz, &id, violations),
            datetime_digitized: f.timestamp("datetime_digitized", tz, &id, violations),
            datetime_modified: f.timestamp("datetime_modified", tz, &id, violations),
            timezone_offset: tz,
            gps_timestamp: f.timestamp("gps_timestamp", None, &id, violations),
        };
        record.temporal = Some(t);
        f.leftovers(&mut extras);
    }

    if let Some(m) = group(obj, "contextual")? {
        let mut f = Fields::new("contextual", m);
        record.contextual = Some(ContextualAttrs {
            title: f.string("title"),
            caption: f.string("caption"),
            headline: f.string("headline"),
        });
        f.leftovers(&mut extras);
    }

    if let Some(m) = group(obj, "camera")? {
        let mut f = Fields::new("camera", m);
        let iso = f.real("iso", &id, violations).and_then(|v| {
            if v.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&v) {
                Some(v as u32)
            } else {
                violations.push(ValidationViolation::new(&id, "camera.iso", format!("{v} is not a positive integer")));
                None
            }
        });
        let white_balance = f
            .string("white_balance")
            .and_then(|s| enum_from_str::<WhiteBalance>(&s, "camera.white_balance", &id, violations));
        let resolution = f.raw("resolution").and_then(|v| {
            let r = read_resolution(v);
            if r.is_none() {
                violations.push(ValidationViolation::new(&id, "camera.resolution", format!("cannot read {v}")));
            }
            r
        });
        record.camera = Some(CameraAttrs {
            make: f.string("make"),
            model: f.string("model"),
            focal_length: f.real("focal_length", &id, violations),
            aperture: f.real("aperture", &id, violations),
            exposure_time: f.real("exposure_time", &id, violations),
            shutter_speed: f.real("shutter_speed", &id, violations),
            iso,
            exposure_value: f.real("exposure_value", &id, violations),
            white_balance,
            resolution,
        });
        f.leftovers(&mut extras);
    }

    if let Some(m) = group(obj, "environment")? {
        let mut f = Fields::new("environment", m);
        record.environment = Some(EnvironmentAttrs {
            temperature: f.real("temperature", &id, violations),
            humidity: f.real("humidity", &id, violations),
            pressure: f.real("pressure", &id, violations),
            weather: f.string("weather"),
            water_depth: f.real("water_depth", &id, violations),
        });
        f.leftovers(&mut extras);
    }

    record.extras = extras;
    Ok(record)
}

fn apply_ref(v: f64, reference: Option<&str>) -> f64 {
    match reference.and_then(|r| r.trim().chars().next()).map(|c| c.to_ascii_uppercase()) {
        Some('S') | Some('W') => -v.abs(),
        _ => v,
    }
}

fn enum_from_str<T: serde::de::DeserializeOwned>(
    s: &str,
    path: &str,
    id: &str,
    out: &mut Vec<ValidationViolation>,
) -> Option<T> {
    let parsed = serde_json::from_value(Value::String(s.trim().to_ascii_lowercase())).ok();
    if parsed.is_none() {
        out.push(ValidationViolation::new(id, path, format!("unknown value {s:?}")));
    }
    parsed
}

fn read_resolution(v: &Value) -> Option<(u32, u32)> {
    let to_u32 = |v: &Value| v.as_u64().and_then(|n| u32::try_from(n).ok());
    match v {
        Value::Array(a) if a.len() == 2 => Some((to_u32(&a[0])?, to_u32(&a[1])?)),
        Value::Object(m) => Some((to_u32(m.get("width")?)?, to_u32(m.get("height")?)?)),
        Value::String(s) => {
            let (w, h) = s.split_once(['x', 'X', '×'])?;
            Some((w.trim().parse().ok()?, h.trim().parse().ok()?))
        }
        _ => None,
    }
}
