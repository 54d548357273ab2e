use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, embed_text, DEFAULT_TEXT_DIMS};
use crate::model::ImageServiceRecord;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// What changed along an edge: place, capture time and wording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticDiff {
    /// Great-circle distance between the two GPS fixes.
    pub delta_spatial_km: f64,
    /// Location labels (city, state, country) that differ.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub changed_labels: Vec<String>,
    /// Child capture time minus parent capture time.
    pub delta_temporal_s: i64,
    /// 1 − cosine similarity of the hashed context text.
    pub delta_context: f64,
}

pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

pub fn semantic_diff(parent: &ImageServiceRecord, child: &ImageServiceRecord) -> SemanticDiff {
    let (ps, cs) = (parent.spatial.as_ref(), child.spatial.as_ref());
    let delta_spatial_km = match (ps, cs) {
        (Some(a), Some(b)) => haversine_km(a.latitude, a.longitude, b.latitude, b.longitude),
        _ => 0.0,
    };
    let mut changed_labels = Vec::new();
    let label = |s: Option<&crate::model::SpatialAttrs>, k: usize| {
        s.and_then(|s| [&s.city, &s.state, &s.country][k].clone())
    };
    for (k, name) in ["city", "state", "country"].iter().enumerate() {
        if label(ps, k) != label(cs, k) {
            changed_labels.push(name.to_string());
        }
    }
    let delta_temporal_s = match (parent.datetime_original(), child.datetime_original()) {
        (Some(a), Some(b)) => (b - a).num_seconds(),
        _ => 0,
    };
    let delta_context = match (parent.context_text(), child.context_text()) {
        (None, None) => 0.0,
        (a, b) => {
            let ea = embed_text(a.as_deref().unwrap_or(""), DEFAULT_TEXT_DIMS);
            let eb = embed_text(b.as_deref().unwrap_or(""), DEFAULT_TEXT_DIMS);
            let zero = |v: &[f64]| v.iter().all(|x| *x == 0.0);
            if zero(&ea) && zero(&eb) {
                0.0
            } else {
                (1.0 - cosine(&ea, &eb)).clamp(0.0, 1.0)
            }
        }
    };
    SemanticDiff { delta_spatial_km, changed_labels, delta_temporal_s, delta_context }
}
