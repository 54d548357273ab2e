//! Per-version attribute vectors in a shared, normalized space.
//!
//! Each [`GroupSchema`] picks a handful of record fields. For every version the
//! chosen fields become one point; coordinates are min-max scaled
//! across the whole version set so that points of different versions are
//! comparable. A version's points plus its scaled upload time form its
//! [`Cluster`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::ImageServiceRecord;

/// Bucket count for free text unless a schema says otherwise.
pub const DEFAULT_TEXT_DIMS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DimKind {
    Numeric,
    /// Degrees; treated as a plain number (no antimeridian wrap).
    AngularDegrees,
    /// Hashed bag of words spread over `buckets` coordinates.
    Text { buckets: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSpec {
    pub field: String,
    #[serde(flatten)]
    pub kind: DimKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSchema {
    pub group_id: String,
    pub dims: Vec<DimSpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("cannot read schema table: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema table is malformed: {0}")]
    Format(#[from] serde_json::Error),
    #[error("schema {group}: {message}")]
    Invalid { group: String, message: String },
}

/// Field paths [`field_value`] understands.
pub const KNOWN_FIELDS: &[&str] = &[
    "temporal.datetime_original",
    "temporal.datetime_digitized",
    "temporal.datetime_modified",
    "temporal.gps_timestamp",
    "temporal.timezone_offset",
    "spatial.latitude",
    "spatial.longitude",
    "spatial.labels",
    "contextual.text",
    "camera.make_model",
    "camera.focal_length",
    "camera.aperture",
    "camera.exposure_time",
    "camera.shutter_speed",
    "camera.iso",
    "camera.exposure_value",
    "camera.white_balance",
    "camera.resolution_width",
    "camera.resolution_height",
    "environment.temperature",
    "environment.humidity",
    "environment.pressure",
    "environment.weather",
    "environment.water_depth",
];

impl GroupSchema {
    /// Coordinates per point: one per numeric field, `buckets` per text field,
    /// plus the constant anchor coordinate.
    pub fn dim_count(&self) -> usize {
        self.feature_dims() + 1
    }

    fn feature_dims(&self) -> usize {
        self.dims
            .iter()
            .map(|d| match d.kind {
                DimKind::Text { buckets } => buckets,
                _ => 1,
            })
            .sum()
    }

    pub fn check(&self) -> Result<(), SchemaError> {
        let fail = |message: String| Err(SchemaError::Invalid { group: self.group_id.clone(), message });
        if self.group_id.is_empty() {
            return fail("empty group id".into());
        }
        if self.dims.is_empty() {
            return fail("no dimensions".into());
        }
        for d in &self.dims {
            if !KNOWN_FIELDS.contains(&d.field.as_str()) {
                return fail(format!("unknown field {:?}", d.field));
            }
            let text_field = matches!(
                d.field.as_str(),
                "spatial.labels" | "contextual.text" | "camera.make_model" | "environment.weather"
            );
            match d.kind {
                DimKind::Text { buckets } if buckets < 2 => return fail(format!("{}: text needs >= 2 buckets", d.field)),
                DimKind::Text { .. } if !text_field => return fail(format!("{} is not a text field", d.field)),
                DimKind::Numeric | DimKind::AngularDegrees if text_field => {
                    return fail(format!("{} is a text field", d.field))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

const BUNDLED_SCHEMAS: &str = include_str!("../data/schemas.json");

#[derive(Deserialize)]
struct SchemaFile {
    groups: Vec<GroupSchema>,
}

pub fn schemas_from_json(text: &str) -> Result<Vec<GroupSchema>, SchemaError> {
    let file: SchemaFile = serde_json::from_str(text)?;
    let mut seen = std::collections::BTreeSet::new();
    for s in &file.groups {
        s.check()?;
        if !seen.insert(s.group_id.clone()) {
            return Err(SchemaError::Invalid { group: s.group_id.clone(), message: "duplicate group id".into() });
        }
    }
    Ok(file.groups)
}

pub fn load_schemas(path: &Path) -> Result<Vec<GroupSchema>, SchemaError> {
    schemas_from_json(&std::fs::read_to_string(path)?)
}

pub fn default_schemas() -> Vec<GroupSchema> {
    schemas_from_json(BUNDLED_SCHEMAS).expect("bundled schemas are valid")
}

pub enum FieldValue {
    Number(f64),
    Text(String),
}

/// Reads one schema field from a record.
pub fn field_value(r: &ImageServiceRecord, field: &str) -> Option<FieldValue> {
    use FieldValue::{Number, Text};
    let t = r.temporal.as_ref();
    let s = r.spatial.as_ref();
    let c = r.camera.as_ref();
    let e = r.environment.as_ref();
    let secs = |v: Option<crate::model::Timestamp>| v.map(|v| Number(v.timestamp() as f64));
    let joined = |parts: &[&Option<String>]| {
        let v: Vec<&str> = parts.iter().filter_map(|p| p.as_deref()).filter(|p| !p.trim().is_empty()).collect();
        (!v.is_empty()).then(|| Text(v.join(" ")))
    };
    match field {
        "temporal.datetime_original" => secs(t?.datetime_original),
        "temporal.datetime_digitized" => secs(t?.datetime_digitized),
        "temporal.datetime_modified" => secs(t?.datetime_modified),
        "temporal.gps_timestamp" => secs(t?.gps_timestamp),
        "temporal.timezone_offset" => t?.timezone_offset.map(|v| Number(v as f64)),
        "spatial.latitude" => s.map(|s| Number(s.latitude)),
        "spatial.longitude" => s.map(|s| Number(s.longitude)),
        "spatial.labels" => s.and_then(|s| joined(&[&s.city, &s.state, &s.country])),
        "contextual.text" => r.context_text().map(Text),
        "camera.make_model" => c.and_then(|c| joined(&[&c.make, &c.model])),
        "camera.focal_length" => c?.focal_length.map(Number),
        "camera.aperture" => c?.aperture.map(Number),
        "camera.exposure_time" => c?.exposure_time.map(Number),
        "camera.shutter_speed" => c?.shutter_speed.map(Number),
        "camera.iso" => c?.iso.map(|v| Number(v as f64)),
        "camera.exposure_value" => c?.exposure_value.map(Number),
        "camera.white_balance" => c?.white_balance.map(|w| Number(w.ordinal() as f64)),
        "camera.resolution_width" => c?.resolution.map(|r| Number(r.0 as f64)),
        "camera.resolution_height" => c?.resolution.map(|r| Number(r.1 as f64)),
        "environment.temperature" => e?.temperature.map(Number),
        "environment.humidity" => e?.humidity.map(Number),
        "environment.pressure" => e?.pressure.map(Number),
        "environment.weather" => e?.weather.clone().map(Text),
        "environment.water_depth" => e?.water_depth.map(Number),
        _ => None,
    }
}

/// Min-max scaling of one dimension; a flat dimension maps to 0.5.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|v| if span > 0.0 && span.is_finite() { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.5 })
        .collect()
}

/// [`normalize`] over the values that are present; absent stays absent.
///
/// The column is then reflected if needed so that its first present value
/// (the earliest upload) lies in the upper half. Both transform fits are
/// cheaper from larger-norm sources, so this orientation makes edges that
/// lead away from early uploads the cheap direction.
fn normalize_column(raw: &[Option<f64>]) -> Vec<Option<f64>> {
    let known: Vec<f64> = raw.iter().flatten().copied().collect();
    let mut scaled = normalize(&known);
    if scaled.first().is_some_and(|&x| x < 0.5) {
        scaled.iter_mut().for_each(|x| *x = 1.0 - *x);
    }
    let mut it = scaled.into_iter();
    raw.iter().map(|x| x.and(it.next())).collect()
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ *b as u64).wrapping_mul(FNV_PRIME))
}

/// Lowercased alphanumeric runs.
pub fn tokenize(s: &str) -> impl Iterator<Item = String> + '_ {
    s.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

/// Hashed bag-of-words: token counts in `d` buckets, L2-normalized. Empty
/// text gives the zero vector.
pub fn embed_text(s: &str, d: usize) -> Vec<f64> {
    assert!(d >= 2, "text embedding needs at least two buckets");
    let mut v = vec![0.0; d];
    for tok in tokenize(s) {
        v[(fnv1a(tok.as_bytes()) % d as u64) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Cosine of two vectors; 0 when either is the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeVector {
    pub version_id: String,
    pub group_id: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub version_id: String,
    pub points: BTreeMap<String, AttributeVector>,
    pub t_upload: f64,
}

impl Cluster {
    pub fn point(&self, group: &str) -> Option<&[f64]> {
        self.points.get(group).map(|p| p.values.as_slice())
    }
}

/// Builds one cluster per version.
///
/// Every coordinate (numeric fields and text hash buckets alike) is min-max
/// scaled per dimension over the versions that carry the field, oriented as
/// in [`normalize_column`]; a version missing a field gets 0 there. The last
/// coordinate of every
/// point is a constant 1, so affine changes of the other coordinates stay
/// linear maps and no point is ever the zero vector.
pub fn build_clusters(versions: &[ImageServiceRecord], schemas: &[GroupSchema]) -> Vec<Cluster> {
    let n = versions.len();
    let mut points: Vec<BTreeMap<String, AttributeVector>> = vec![BTreeMap::new(); n];

    for schema in schemas {
        let mut columns: Vec<Vec<Option<f64>>> = Vec::new();
        let mut present = vec![false; n];
        for dim in &schema.dims {
            match dim.kind {
                DimKind::Numeric | DimKind::AngularDegrees => {
                    let raw: Vec<Option<f64>> = versions
                        .iter()
                        .map(|r| match field_value(r, &dim.field) {
                            Some(FieldValue::Number(x)) if x.is_finite() => Some(x),
                            _ => None,
                        })
                        .collect();
                    columns.push(normalize_column(&raw));
                }
                DimKind::Text { buckets } => {
                    let embedded: Vec<Option<Vec<f64>>> = versions
                        .iter()
                        .map(|r| match field_value(r, &dim.field) {
                            Some(FieldValue::Text(s)) => Some(embed_text(&s, buckets)),
                            _ => None,
                        })
                        .collect();
                    for b in 0..buckets {
                        let raw: Vec<Option<f64>> = embedded.iter().map(|v| v.as_ref().map(|v| v[b])).collect();
                        columns.push(normalize_column(&raw));
                    }
                }
            }
        }
        for col in &columns {
            for (i, v) in col.iter().enumerate() {
                present[i] |= v.is_some();
            }
        }
        for (i, r) in versions.iter().enumerate() {
            if !present[i] {
                continue;
            }
            let mut values: Vec<f64> = columns.iter().map(|c| c[i].unwrap_or(0.0)).collect();
            values.push(1.0);
            points[i].insert(
                schema.group_id.clone(),
                AttributeVector { version_id: r.id.clone(), group_id: schema.group_id.clone(), values },
            );
        }
    }

    let uploads: Vec<f64> = versions.iter().map(|r| r.upload_time.timestamp() as f64).collect();
    let t = normalize(&uploads);
    versions
        .iter()
        .zip(points)
        .zip(t)
        .map(|((r, points), t_upload)| Cluster { version_id: r.id.clone(), points, t_upload })
        .collect()
}

/// Fraction of groups present in both clusters whose points lie within
/// Euclidean distance `eps`. Upload time is ignored.
pub fn intersection_score(a: &Cluster, b: &Cluster, eps: f64) -> f64 {
    let mut shared = 0usize;
    let mut close = 0usize;
    for (g, pa) in &a.points {
        if let Some(pb) = b.points.get(g) {
            shared += 1;
            let d2: f64 = pa.values.iter().zip(&pb.values).map(|(x, y)| (x - y) * (x - y)).sum();
            if d2.sqrt() <= eps {
                close += 1;
            }
        }
    }
    if shared == 0 {
        0.0
    } else {
        close as f64 / shared as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CameraAttrs, ContextualAttrs, SpatialAttrs};
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn rec(id: &str, secs: i64) -> ImageServiceRecord {
        ImageServiceRecord::bare(id, Utc.timestamp_opt(1_600_000_000 + secs, 0).unwrap())
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[2.0, 4.0, 6.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize(&[5.0, 5.0, 5.0]), vec![0.5, 0.5, 0.5]);
        assert_eq!(normalize(&[0.0, 10.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn empty_text_is_zero() {
        assert!(embed_text("", 64).iter().all(|x| *x == 0.0));
        assert!(embed_text(" ,;", 64).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn text_embedding_is_deterministic_and_unit() {
        let a = embed_text("Plane crash, Hudson!", 64);
        assert_eq!(a, embed_text("plane CRASH hudson", 64));
        let n: f64 = a.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_duplicate_captions_are_similar() {
        let a = embed_text("plane crash hudson", 64);
        let b = embed_text("plane crash hudson river", 64);
        // Independently: bucket each token, count, cosine.
        let bucket = |t: &str| {
            let mut h: u64 = 0xcbf29ce484222325;
            for byte in t.bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            (h % 64) as usize
        };
        let count = |toks: &[&str]| {
            let mut v = [0.0f64; 64];
            toks.iter().for_each(|t| v[bucket(t)] += 1.0);
            v
        };
        let (x, y) = (count(&["plane", "crash", "hudson"]), count(&["plane", "crash", "hudson", "river"]));
        let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let expected = dot / (x.iter().map(|a| a * a).sum::<f64>().sqrt() * y.iter().map(|a| a * a).sum::<f64>().sqrt());
        let got = cosine(&a, &b);
        assert!((got - expected).abs() < 1e-12);
        assert!(got > 0.7);
    }

    #[test]
    fn single_version_is_centered() {
        let clusters = build_clusters(&[rec("a", 0)], &default_schemas());
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].t_upload, 0.5);
    }

    fn with_fields(id: &str, secs: i64) -> ImageServiceRecord {
        let mut r = rec(id, secs);
        r.camera = Some(CameraAttrs { aperture: Some(4.0), exposure_time: Some(0.01), iso: Some(200), ..Default::default() });
        r.spatial = Some(SpatialAttrs { latitude: 1.0, longitude: 2.0, city: None, state: None, country: None });
        r.contextual = Some(ContextualAttrs { title: Some("harbour at dawn".into()), caption: None, headline: None });
        r
    }

    #[test]
    fn identical_versions_differ_only_in_upload_time() {
        let vs = [with_fields("a", 0), with_fields("b", 10), with_fields("c", 20)];
        let cs = build_clusters(&vs, &default_schemas());
        assert_eq!(cs[0].points.values().map(|p| &p.values).collect::<Vec<_>>(), cs[2].points.values().map(|p| &p.values).collect::<Vec<_>>());
        assert_eq!([cs[0].t_upload, cs[1].t_upload, cs[2].t_upload], [0.0, 0.5, 1.0]);
    }

    #[test]
    fn columns_are_oriented_towards_the_first_upload() {
        let mut vs = [with_fields("a", 0), with_fields("b", 10), with_fields("c", 20)];
        // First upload holds the smallest latitude and the largest longitude.
        for (r, (lat, lon)) in vs.iter_mut().zip([(1.0, 9.0), (5.0, 2.0), (3.0, 4.0)]) {
            let s = r.spatial.as_mut().unwrap();
            (s.latitude, s.longitude) = (lat, lon);
        }
        vs[1].contextual.as_mut().unwrap().title = Some("storm over the pier".into());
        let cs = build_clusters(&vs, &default_schemas());
        let g6: Vec<&[f64]> = cs.iter().map(|c| c.point("G6_gps_timezone").unwrap()).collect();
        assert_eq!((g6[0][0], g6[1][0], g6[2][0]), (1.0, 0.0, 0.5));
        assert_eq!((g6[0][1], g6[1][1], g6[2][1]), (1.0, 0.0, 2.0 / 7.0));
        let text = &cs[0].point("context").unwrap()[..DEFAULT_TEXT_DIMS];
        assert!(text.iter().all(|&x| x >= 0.5));
    }

    #[test]
    fn missing_gps_drops_that_point() {
        let mut b = with_fields("b", 10);
        b.spatial = None;
        let cs = build_clusters(&[with_fields("a", 0), b], &default_schemas());
        assert!(cs[0].point("G6_gps_timezone").is_some());
        assert!(cs[1].point("G6_gps_timezone").is_none());
    }

    fn cluster(points: &[(&str, Vec<f64>)]) -> Cluster {
        Cluster {
            version_id: "x".into(),
            points: points
                .iter()
                .map(|(g, v)| (g.to_string(), AttributeVector { version_id: "x".into(), group_id: g.to_string(), values: v.clone() }))
                .collect(),
            t_upload: 0.0,
        }
    }

    #[test]
    fn intersection_examples() {
        let eps = 0.1;
        let a = cluster(&[("g1", vec![0.0, 0.0]), ("g2", vec![0.0, 0.0]), ("g3", vec![0.0, 0.0]), ("g4", vec![0.0, 0.0])]);
        assert_eq!(intersection_score(&a, &a, eps), 1.0);
        let b = cluster(&[("g1", vec![eps / 2.0, 0.0]), ("g2", vec![0.0, eps / 2.0]), ("g3", vec![2.0 * eps, 0.0]), ("g4", vec![0.0, 2.0 * eps])]);
        assert_eq!(intersection_score(&a, &b, eps), 0.5);
        let c = cluster(&[("g9", vec![0.0])]);
        assert_eq!(intersection_score(&a, &c, eps), 0.0);
    }

    #[test]
    fn bundled_schemas_are_valid() {
        let s = default_schemas();
        assert!(s.iter().any(|g| g.group_id == "context"));
        assert!(s.iter().all(|g| g.dim_count() >= 2));
    }

    #[test]
    fn schema_rejects_unknown_field() {
        let bad = r#"{"groups":[{"group_id":"x","dims":[{"field":"camera.lens","kind":"numeric"}]}]}"#;
        assert!(schemas_from_json(bad).is_err());
    }

    proptest! {
        #[test]
        fn normalized_values_are_bounded(v in proptest::collection::vec(-1e6f64..1e6, 1..30)) {
            prop_assert!(normalize(&v).iter().all(|x| (0.0..=1.0).contains(x)));
        }

        #[test]
        fn intersection_is_symmetric(
            xs in proptest::collection::vec(0.0f64..1.0, 6),
            ys in proptest::collection::vec(0.0f64..1.0, 6),
            eps in 0.01f64..1.0,
        ) {
            let a = cluster(&[("g1", xs[..3].to_vec()), ("g2", xs[3..].to_vec())]);
            let b = cluster(&[("g1", ys[..3].to_vec()), ("g2", ys[3..].to_vec())]);
            prop_assert_eq!(intersection_score(&a, &b, eps), intersection_score(&b, &a, eps));
            prop_assert_eq!(intersection_score(&a, &a, eps), 1.0);
        }
    }
}
