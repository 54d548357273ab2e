//! The mutation catalog: the kinds of edits a re-poster makes to metadata.

use chrono::Duration;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::consistency::{compute_exposure_value, RuleGroup};
use crate::model::{ImageServiceRecord, MAX_TZ_OFFSET_MINUTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    ShiftDatetime,
    MoveGps,
    RewriteContext,
    SwapCameraModel,
    PerturbExposure,
    DesyncShutterExposure,
    ChangeTimezone,
}

impl MutationKind {
    pub const ALL: [MutationKind; 7] = [
        MutationKind::ShiftDatetime,
        MutationKind::MoveGps,
        MutationKind::RewriteContext,
        MutationKind::SwapCameraModel,
        MutationKind::PerturbExposure,
        MutationKind::DesyncShutterExposure,
        MutationKind::ChangeTimezone,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MutationKind::ShiftDatetime => "shift_datetime",
            MutationKind::MoveGps => "move_gps",
            MutationKind::RewriteContext => "rewrite_context",
            MutationKind::SwapCameraModel => "swap_camera_model",
            MutationKind::PerturbExposure => "perturb_exposure",
            MutationKind::DesyncShutterExposure => "desync_shutter_exposure",
            MutationKind::ChangeTimezone => "change_timezone",
        }
    }
}

/// The rule group each kind is built to trip when applied to a consistent
/// record.
pub fn designated_group(kind: MutationKind) -> RuleGroup {
    match kind {
        MutationKind::ShiftDatetime => RuleGroup::Timestamps,
        MutationKind::MoveGps => RuleGroup::GpsTimezone,
        MutationKind::RewriteContext => RuleGroup::GpsTimezone,
        MutationKind::SwapCameraModel => RuleGroup::Capabilities,
        MutationKind::PerturbExposure => RuleGroup::TimeOfDay,
        MutationKind::DesyncShutterExposure => RuleGroup::ExposureValue,
        MutationKind::ChangeTimezone => RuleGroup::GpsTimezone,
    }
}

/// One edit with its magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MutationOp {
    /// Moves the original capture time forward, past the digitization time.
    ShiftDatetime { seconds: i64 },
    /// Relocates the GPS fix; the timezone is left behind.
    MoveGps { dlat: f64, dlon: f64 },
    /// Replaces title, caption, headline and place names with another story.
    RewriteContext { narrative: usize },
    /// Claims a body that cannot produce the recorded settings.
    SwapCameraModel { camera: usize },
    /// Scales exposure time by 2^stops towards the opposite day/night class,
    /// keeping EV and shutter value in step.
    PerturbExposure { stops: f64 },
    /// Offsets the recorded shutter value and EV from the exposure time.
    DesyncShutterExposure { offset: f64 },
    /// Moves the timezone offset away from the one the clock implies.
    ChangeTimezone { minutes: i32 },
}

pub const SHIFT_SECONDS: (i64, i64) = (3_600, 30 * 86_400);
pub const MOVE_LON_DEG: (f64, f64) = (60.0, 150.0);
pub const MOVE_LAT_DEG: f64 = 20.0;
pub const EXPOSURE_STOPS: (f64, f64) = (9.0, 12.0);
pub const DESYNC_OFFSET: (f64, f64) = (1.0, 6.0);
pub const TIMEZONE_MINUTES: (i32, i32) = (180, 720);

pub struct Narrative {
    pub title: &'static str,
    pub caption: &'static str,
    pub headline: &'static str,
    pub city: &'static str,
    pub state: &'static str,
    pub country: &'static str,
}

pub const NARRATIVES: &[Narrative] = &[
    Narrative {
        title: "Missing airliner wreckage sighted",
        caption: "Search crews spot debris from the vanished flight in open water",
        headline: "Families await news as debris is recovered",
        city: "Kuala Lumpur",
        state: "Federal Territory of Kuala Lumpur",
        country: "Malaysia",
    },
    Narrative {
        title: "Flood waters swallow the riverside",
        caption: "Residents wade through streets after the embankment failed overnight",
        headline: "Thousands evacuated as river bursts banks",
        city: "London",
        state: "England",
        country: "United Kingdom",
    },
    Narrative {
        title: "Protest fills the main square",
        caption: "Crowds gather at dusk holding banners and candles",
        headline: "Police estimate tens of thousands attended",
        city: "Paris",
        state: "Ile-de-France",
        country: "France",
    },
    Narrative {
        title: "Tsunami drill at the harbour",
        caption: "Coast guard boats practice rescues near the pier",
        headline: "Annual exercise tests warning sirens",
        city: "Tokyo",
        state: "Tokyo",
        country: "Japan",
    },
    Narrative {
        title: "Bushfire smoke over the bridge",
        caption: "Orange haze blankets the skyline during the heatwave",
        headline: "Air quality warnings issued across the state",
        city: "Sydney",
        state: "New South Wales",
        country: "Australia",
    },
    Narrative {
        title: "Monsoon traffic chaos",
        caption: "Buses stranded in knee deep water on the coastal road",
        headline: "Commuters stuck for hours after record rainfall",
        city: "Mumbai",
        state: "Maharashtra",
        country: "India",
    },
    Narrative {
        title: "Carnival parade through the avenue",
        caption: "Samba schools dance past packed grandstands",
        headline: "Millions celebrate on the final night",
        city: "Rio de Janeiro",
        state: "Rio de Janeiro",
        country: "Brazil",
    },
    Narrative {
        title: "Sandstorm engulfs the city",
        caption: "Visibility drops to a few metres as dust sweeps in",
        headline: "Flights grounded and schools closed",
        city: "Cairo",
        state: "Cairo",
        country: "Egypt",
    },
];

/// Bodies whose fixed lenses cannot produce a typical DSLR exposure.
pub const CAMERA_SWAPS: &[(&str, &str)] = &[
    ("Apple", "iPhone 3G"),
    ("Apple", "iPhone 4"),
    ("samsung", "GT-I9300"),
    ("HTC", "HTC One"),
    ("GoPro", "HD2"),
];

impl MutationOp {
    pub fn kind(&self) -> MutationKind {
        match self {
            MutationOp::ShiftDatetime { .. } => MutationKind::ShiftDatetime,
            MutationOp::MoveGps { .. } => MutationKind::MoveGps,
            MutationOp::RewriteContext { .. } => MutationKind::RewriteContext,
            MutationOp::SwapCameraModel { .. } => MutationKind::SwapCameraModel,
            MutationOp::PerturbExposure { .. } => MutationKind::PerturbExposure,
            MutationOp::DesyncShutterExposure { .. } => MutationKind::DesyncShutterExposure,
            MutationOp::ChangeTimezone { .. } => MutationKind::ChangeTimezone,
        }
    }

    pub fn sample(kind: MutationKind, rng: &mut ChaCha8Rng) -> Self {
        let sign = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        match kind {
            MutationKind::ShiftDatetime => MutationOp::ShiftDatetime { seconds: rng.gen_range(SHIFT_SECONDS.0..=SHIFT_SECONDS.1) },
            MutationKind::MoveGps => MutationOp::MoveGps {
                dlat: rng.gen_range(-MOVE_LAT_DEG..=MOVE_LAT_DEG),
                dlon: sign(rng) * rng.gen_range(MOVE_LON_DEG.0..=MOVE_LON_DEG.1),
            },
            MutationKind::RewriteContext => MutationOp::RewriteContext { narrative: rng.gen_range(0..NARRATIVES.len()) },
            MutationKind::SwapCameraModel => MutationOp::SwapCameraModel { camera: rng.gen_range(0..CAMERA_SWAPS.len()) },
            MutationKind::PerturbExposure => MutationOp::PerturbExposure { stops: rng.gen_range(EXPOSURE_STOPS.0..=EXPOSURE_STOPS.1) },
            MutationKind::DesyncShutterExposure => {
                MutationOp::DesyncShutterExposure { offset: sign(rng) * rng.gen_range(DESYNC_OFFSET.0..=DESYNC_OFFSET.1) }
            }
            MutationKind::ChangeTimezone => {
                // Whole half hours, like real zones.
                let halves = rng.gen_range(TIMEZONE_MINUTES.0 / 30..=TIMEZONE_MINUTES.1 / 30);
                MutationOp::ChangeTimezone { minutes: sign(rng) as i32 * halves * 30 }
            }
        }
    }

    pub fn check_bounds(&self) -> Result<(), String> {
        let ok = match *self {
            MutationOp::ShiftDatetime { seconds } => (SHIFT_SECONDS.0..=SHIFT_SECONDS.1).contains(&seconds),
            MutationOp::MoveGps { dlat, dlon } => {
                dlat.abs() <= MOVE_LAT_DEG && (MOVE_LON_DEG.0..=MOVE_LON_DEG.1).contains(&dlon.abs())
            }
            MutationOp::RewriteContext { narrative } => narrative < NARRATIVES.len(),
            MutationOp::SwapCameraModel { camera } => camera < CAMERA_SWAPS.len(),
            MutationOp::PerturbExposure { stops } => (EXPOSURE_STOPS.0..=EXPOSURE_STOPS.1).contains(&stops),
            MutationOp::DesyncShutterExposure { offset } => (DESYNC_OFFSET.0..=DESYNC_OFFSET.1).contains(&offset.abs()),
            MutationOp::ChangeTimezone { minutes } => (TIMEZONE_MINUTES.0..=TIMEZONE_MINUTES.1).contains(&minutes.abs()),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("{} magnitude out of bounds: {self:?}", self.kind().as_str()))
        }
    }
}

fn wrap_longitude(lon: f64) -> f64 {
    let w = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 && lon > 0.0 {
        180.0
    } else {
        w
    }
}

/// Applies one edit in place. On failure names the op and the missing field.
pub fn apply_op(r: &mut ImageServiceRecord, op: &MutationOp) -> Result<(), (&'static str, &'static str)> {
    let name = op.kind().as_str();
    match *op {
        MutationOp::ShiftDatetime { seconds } => {
            let t = r.temporal.as_mut().and_then(|t| t.datetime_original.as_mut()).ok_or((name, "temporal.datetime_original"))?;
            *t += Duration::seconds(seconds);
        }
        MutationOp::MoveGps { dlat, dlon } => {
            let s = r.spatial.as_mut().ok_or((name, "spatial"))?;
            s.latitude = (s.latitude + dlat).clamp(-89.0, 89.0);
            s.longitude = wrap_longitude(s.longitude + dlon);
        }
        MutationOp::RewriteContext { narrative } => {
            let s = r.spatial.as_mut().ok_or((name, "spatial"))?;
            // Never "rewrite" to the story already told.
            let mut k = narrative % NARRATIVES.len();
            if s.city.as_deref() == Some(NARRATIVES[k].city) {
                k = (k + 1) % NARRATIVES.len();
            }
            let n = &NARRATIVES[k];
            s.city = Some(n.city.into());
            s.state = Some(n.state.into());
            s.country = Some(n.country.into());
            let c = r.contextual.get_or_insert_with(Default::default);
            c.title = Some(n.title.into());
            c.caption = Some(n.caption.into());
            c.headline = Some(n.headline.into());
        }
        MutationOp::SwapCameraModel { camera } => {
            let c = r.camera.as_mut().ok_or((name, "camera"))?;
            let mut k = camera % CAMERA_SWAPS.len();
            if c.model.as_deref() == Some(CAMERA_SWAPS[k].1) {
                k = (k + 1) % CAMERA_SWAPS.len();
            }
            c.make = Some(CAMERA_SWAPS[k].0.into());
            c.model = Some(CAMERA_SWAPS[k].1.into());
        }
        MutationOp::PerturbExposure { stops } => {
            let c = r.camera.as_mut().ok_or((name, "camera"))?;
            let (Some(a), Some(t)) = (c.aperture, c.exposure_time) else {
                return Err((name, "camera.exposure_time"));
            };
            let iso = c.iso.unwrap_or(100) as f64;
            let ev100 = compute_exposure_value(a, t).map_err(|_| (name, "camera.exposure_time"))? - (iso / 100.0).log2();
            // Bright scenes get darker and vice versa, so the day/night read flips.
            let direction = if ev100 >= 7.0 { 1.0 } else { -1.0 };
            let new_t = t * (direction * stops).exp2();
            c.exposure_time = Some(new_t);
            c.shutter_speed = Some(-new_t.log2());
            c.exposure_value = compute_exposure_value(a, new_t).ok();
        }
        MutationOp::DesyncShutterExposure { offset } => {
            let c = r.camera.as_mut().ok_or((name, "camera"))?;
            let t = c.exposure_time.ok_or((name, "camera.exposure_time"))?;
            let a = c.aperture.ok_or((name, "camera.aperture"))?;
            c.shutter_speed = Some(c.shutter_speed.unwrap_or(-t.log2()) + offset);
            let ev = c.exposure_value.or_else(|| compute_exposure_value(a, t).ok()).unwrap_or(0.0);
            c.exposure_value = Some(ev + offset);
        }
        MutationOp::ChangeTimezone { minutes } => {
            let t = r.temporal.as_mut().ok_or((name, "temporal"))?;
            let tz = t.timezone_offset.ok_or((name, "temporal.timezone_offset"))?;
            // Reflect instead of clamping so the change keeps its size.
            let moved = if (tz + minutes).abs() <= MAX_TZ_OFFSET_MINUTES { tz + minutes } else { tz - minutes };
            t.timezone_offset = Some(moved);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::{evaluate_all, CapabilityDb, FindingStatus, FixtureEnvironment, Tolerances};
    use crate::evalgen::seed_record;
    use rand::SeedableRng;

    #[test]
    fn longitude_wraps() {
        assert_eq!(wrap_longitude(190.0), -170.0);
        assert_eq!(wrap_longitude(-224.0), 136.0);
        assert_eq!(wrap_longitude(180.0), 180.0);
    }

    #[test]
    fn sampled_ops_are_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            for k in MutationKind::ALL {
                let op = MutationOp::sample(k, &mut rng);
                assert_eq!(op.kind(), k);
                op.check_bounds().unwrap();
            }
        }
    }

    #[test]
    fn every_kind_trips_its_group_on_the_seed() {
        let (db, env, tol) = (CapabilityDb::bundled(), FixtureEnvironment::bundled(), Tolerances::default());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            for k in MutationKind::ALL {
                let mut r = seed_record();
                let op = MutationOp::sample(k, &mut rng);
                apply_op(&mut r, &op).unwrap();
                let report = evaluate_all(&r, &db, &env, &tol);
                assert_eq!(report.finding(designated_group(k)).status, FindingStatus::Inconsistent, "{op:?}");
            }
        }
    }

    #[test]
    fn desync_breaks_exposure_value() {
        let mut r = seed_record();
        apply_op(&mut r, &MutationOp::DesyncShutterExposure { offset: 2.0 }).unwrap();
        let c = r.camera.unwrap();
        let ev = compute_exposure_value(c.aperture.unwrap(), c.exposure_time.unwrap()).unwrap();
        assert!((c.exposure_value.unwrap() - ev).abs() > Tolerances::default().ev);
    }
}
