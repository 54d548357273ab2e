use chrono::{Duration, Timelike};

use super::{CapabilityDb, EnvironmentProvider, GroupFinding, PlaceLabels, RuleGroup, Tolerances};
use crate::model::{CameraAttrs, ImageServiceRecord, SpatialAttrs, TemporalAttrs, WhiteBalance};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("exposure inputs must be positive (aperture {aperture}, exposure time {exposure_time})")]
pub struct ExposureDomainError {
    pub aperture: f64,
    pub exposure_time: f64,
}

/// EV = log2(N^2 / t), the ISO-100 exposure value.
pub fn compute_exposure_value(aperture: f64, exposure_time: f64) -> Result<f64, ExposureDomainError> {
    if !(aperture > 0.0 && exposure_time > 0.0) || !aperture.is_finite() || !exposure_time.is_finite() {
        return Err(ExposureDomainError { aperture, exposure_time });
    }
    Ok((aperture * aperture / exposure_time).log2())
}

/// Scene brightness normalised to ISO 100: EV - log2(iso / 100).
pub fn iso_adjusted_ev(aperture: f64, exposure_time: f64, iso: u32) -> Result<f64, ExposureDomainError> {
    let ev = compute_exposure_value(aperture, exposure_time)?;
    Ok(ev - (iso as f64 / 100.0).log2())
}

/// G1: original <= digitized <= modified over the timestamps present.
pub fn check_timestamp_order(t: &TemporalAttrs) -> GroupFinding {
    let named = [
        ("original", t.datetime_original),
        ("digitized", t.datetime_digitized),
        ("modified", t.datetime_modified),
    ];
    let present: Vec<_> = named.iter().filter_map(|(n, v)| v.map(|v| (*n, v))).collect();
    if present.len() < 2 {
        return GroupFinding::skipped(RuleGroup::Timestamps, "fewer than two timestamps");
    }
    let broken: Vec<String> = present
        .windows(2)
        .filter(|w| w[0].1 > w[1].1)
        .map(|w| format!("{} is after {}", w[0].0, w[1].0))
        .collect();
    if broken.is_empty() {
        GroupFinding::judged(RuleGroup::Timestamps, false, 0.0, "timestamps are ordered")
    } else {
        GroupFinding::judged(RuleGroup::Timestamps, true, 1.0, broken.join("; "))
    }
}

/// G2: recorded settings must lie within what the named camera supports.
pub fn check_capabilities(c: &CameraAttrs, db: &CapabilityDb) -> GroupFinding {
    let (Some(make), Some(model)) = (c.make.as_deref(), c.model.as_deref()) else {
        return GroupFinding::skipped(RuleGroup::Capabilities, "make or model absent");
    };
    let Some(entry) = db.lookup(make, model) else {
        return GroupFinding::skipped(RuleGroup::Capabilities, format!("{make} {model} not in capability table"));
    };
    let in_range = |v: f64, r: [f64; 2]| r[0] <= v && v <= r[1];
    let mut checked = 0usize;
    let mut out = Vec::new();
    if let Some(f) = c.focal_length {
        checked += 1;
        if !in_range(f, entry.focal_length_range) {
            out.push(format!("focal length {f} mm outside {:?}", entry.focal_length_range));
        }
    }
    if let Some(a) = c.aperture {
        checked += 1;
        if !in_range(a, entry.aperture_range) {
            out.push(format!("aperture f/{a} outside {:?}", entry.aperture_range));
        }
    }
    if let Some(iso) = c.iso {
        checked += 1;
        if !(entry.iso_range[0] <= iso && iso <= entry.iso_range[1]) {
            out.push(format!("iso {iso} outside {:?}", entry.iso_range));
        }
    }
    if let Some((w, h)) = c.resolution {
        checked += 1;
        let (mw, mh) = entry.max_resolution;
        // Portrait captures swap the axes.
        if !((w <= mw && h <= mh) || (w <= mh && h <= mw)) {
            out.push(format!("resolution {w}x{h} exceeds {mw}x{mh}"));
        }
    }
    if checked == 0 {
        return GroupFinding::skipped(RuleGroup::Capabilities, "no checkable settings");
    }
    let score = out.len() as f64 / checked as f64;
    if out.is_empty() {
        GroupFinding::judged(RuleGroup::Capabilities, false, 0.0, format!("{checked} setting(s) within {make} {model} limits"))
    } else {
        GroupFinding::judged(RuleGroup::Capabilities, true, score, out.join("; "))
    }
}

/// G3: recorded exposure value and APEX shutter value against the recomputed ones.
pub fn check_exposure_value(c: &CameraAttrs, tol: &Tolerances) -> GroupFinding {
    let (Some(aperture), Some(time)) = (c.aperture, c.exposure_time) else {
        return GroupFinding::skipped(RuleGroup::ExposureValue, "aperture or exposure time absent");
    };
    let mut subchecks = Vec::new();
    if let Some(recorded) = c.exposure_value {
        if let Ok(ev) = compute_exposure_value(aperture, time) {
            let diff = (recorded - ev).abs();
            subchecks.push((diff > tol.ev, (diff / (2.0 * tol.ev)).min(1.0), format!("recorded EV {recorded:.2} vs computed {ev:.2}")));
        }
    }
    if let Some(tv) = c.shutter_speed {
        if time > 0.0 {
            let expected = -time.log2();
            let diff = (tv - expected).abs();
            subchecks.push((
                diff > tol.shutter_apex,
                (diff / (2.0 * tol.shutter_apex)).min(1.0),
                format!("shutter APEX {tv:.2} vs exposure time APEX {expected:.2}"),
            ));
        }
    }
    if subchecks.is_empty() {
        return GroupFinding::skipped(RuleGroup::ExposureValue, "no recorded exposure value or shutter speed");
    }
    let inconsistent = subchecks.iter().any(|s| s.0);
    let score = subchecks.iter().map(|s| s.1).fold(0.0, f64::max);
    let detail = subchecks.into_iter().map(|s| s.2).collect::<Vec<_>>().join("; ");
    GroupFinding::judged(RuleGroup::ExposureValue, inconsistent, score, detail)
}

/// G4: shutter, aperture and ISO together must describe a plausible scene.
pub fn check_exposure_triangle(c: &CameraAttrs, tol: &Tolerances) -> GroupFinding {
    let (Some(aperture), Some(time), Some(iso)) = (c.aperture, c.exposure_time, c.iso) else {
        return GroupFinding::skipped(RuleGroup::ExposureTriangle, "aperture, exposure time or iso absent");
    };
    let Ok(ev100) = iso_adjusted_ev(aperture, time, iso) else {
        return GroupFinding::skipped(RuleGroup::ExposureTriangle, "non-positive exposure inputs");
    };
    let exceed = (tol.ev_band_min - ev100).max(ev100 - tol.ev_band_max).max(0.0);
    let detail = format!("EV100 {ev100:.2} vs band [{}, {}]", tol.ev_band_min, tol.ev_band_max);
    GroupFinding::judged(RuleGroup::ExposureTriangle, exceed > 0.0, (exceed / tol.ev_band_saturation).min(1.0), detail)
}

/// G5: a bright exposure at night or a dark one at noon. Advisory only: indoor
/// and flash shots legitimately break it.
pub fn check_time_of_day(c: &CameraAttrs, t: &TemporalAttrs, tol: &Tolerances) -> GroupFinding {
    let (Some(aperture), Some(time), Some(iso)) = (c.aperture, c.exposure_time, c.iso) else {
        return GroupFinding::skipped(RuleGroup::TimeOfDay, "exposure settings absent");
    };
    let (Some(original), Some(offset)) = (t.datetime_original, t.timezone_offset) else {
        return GroupFinding::skipped(RuleGroup::TimeOfDay, "capture time or timezone absent");
    };
    let Ok(ev100) = iso_adjusted_ev(aperture, time, iso) else {
        return GroupFinding::skipped(RuleGroup::TimeOfDay, "non-positive exposure inputs");
    };
    let exposure_says_day = if ev100 >= tol.day_ev_min {
        true
    } else if ev100 <= tol.night_ev_max {
        false
    } else {
        return GroupFinding::skipped(RuleGroup::TimeOfDay, format!("EV100 {ev100:.2} is indeterminate"));
    };
    let local = original + Duration::minutes(offset as i64);
    let hour = local.hour() as f64 + local.minute() as f64 / 60.0 + local.second() as f64 / 3600.0;
    let clock_says_day = tol.day_start_hour <= hour && hour < tol.day_end_hour;
    let word = |day: bool| if day { "day" } else { "night" };
    let detail = format!(
        "advisory: exposure EV100 {ev100:.2} reads {}, local time {:02}:{:02} reads {}",
        word(exposure_says_day),
        local.hour(),
        local.minute(),
        word(clock_says_day)
    );
    let disagree = exposure_says_day != clock_says_day;
    GroupFinding::judged(RuleGroup::TimeOfDay, disagree, if disagree { 1.0 } else { 0.0 }, detail)
}

/// Nautical-timezone estimate in minutes: round(longitude / 15) hours.
pub(crate) fn nautical_offset_minutes(longitude: f64) -> f64 {
    (longitude / 15.0).round() * 60.0
}

/// G6: GPS position vs timezone, camera clock vs GPS clock, and place labels
/// vs the provider's gazetteer.
pub fn check_gps_timezone(
    s: Option<&SpatialAttrs>,
    t: Option<&TemporalAttrs>,
    place: Option<&PlaceLabels>,
    tol: &Tolerances,
) -> GroupFinding {
    let mut subchecks: Vec<(bool, f64, String)> = Vec::new();
    let graded = |diff: f64, slack: f64| if diff > slack { (diff / (2.0 * slack)).min(1.0) } else { 0.0 };

    if let (Some(s), Some(offset)) = (s, t.and_then(|t| t.timezone_offset)) {
        let expected = nautical_offset_minutes(s.longitude);
        let diff = (offset as f64 - expected).abs();
        subchecks.push((
            diff > tol.timezone_slack_minutes,
            graded(diff, tol.timezone_slack_minutes),
            format!("offset {offset} min vs {expected} min expected at longitude {:.3}", s.longitude),
        ));
    }
    if let Some(t) = t {
        if let (Some(orig), Some(gps)) = (t.datetime_original, t.gps_timestamp) {
            // Both clocks are canonical UTC; a camera set to the wrong zone
            // shows up as an offset-sized gap.
            let diff = (orig - gps).num_seconds().unsigned_abs() as f64;
            subchecks.push((
                diff > tol.gps_clock_slack_seconds,
                graded(diff, tol.gps_clock_slack_seconds),
                format!("camera clock and GPS clock differ by {diff} s"),
            ));
        }
    }
    if let (Some(s), Some(place)) = (s, place) {
        let mut mismatched = Vec::new();
        for (name, recorded, expected) in [
            ("city", &s.city, &place.city),
            ("state", &s.state, &place.state),
            ("country", &s.country, &place.country),
        ] {
            if let (Some(r), Some(e)) = (recorded, expected) {
                if !r.trim().eq_ignore_ascii_case(e.trim()) {
                    mismatched.push(format!("{name} {r:?} but coordinates are in {e:?}"));
                }
            }
        }
        let compared = [(&s.city, &place.city), (&s.state, &place.state), (&s.country, &place.country)]
            .iter()
            .filter(|(r, e)| r.is_some() && e.is_some())
            .count();
        if compared > 0 {
            let bad = !mismatched.is_empty();
            let detail = if bad { mismatched.join("; ") } else { "place labels match coordinates".to_string() };
            subchecks.push((bad, if bad { 1.0 } else { 0.0 }, detail));
        }
    }
    if subchecks.is_empty() {
        return GroupFinding::skipped(RuleGroup::GpsTimezone, "no GPS/timezone pairs to compare");
    }
    let inconsistent = subchecks.iter().any(|s| s.0);
    let score = subchecks.iter().map(|s| s.1).fold(0.0, f64::max);
    let detail = subchecks.into_iter().map(|s| s.2).collect::<Vec<_>>().join("; ");
    GroupFinding::judged(RuleGroup::GpsTimezone, inconsistent, score, detail)
}

/// Findings for the three provider-backed groups.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentFindings {
    pub weather_settings: GroupFinding,
    pub environment: GroupFinding,
    pub water_depth: GroupFinding,
}

impl EnvironmentFindings {
    fn all_skipped(detail: &str) -> Self {
        Self {
            weather_settings: GroupFinding::skipped(RuleGroup::WeatherSettings, detail),
            environment: GroupFinding::skipped(RuleGroup::Environment, detail),
            water_depth: GroupFinding::skipped(RuleGroup::WaterDepth, detail),
        }
    }

    pub fn as_array(&self) -> [&GroupFinding; 3] {
        [&self.weather_settings, &self.environment, &self.water_depth]
    }
}

/// G7-G9: recorded environment and white balance against the provider's view
/// of the shooting location and date.
pub fn check_environment(r: &ImageServiceRecord, env: &dyn EnvironmentProvider, tol: &Tolerances) -> EnvironmentFindings {
    let Some(s) = r.spatial.as_ref() else {
        return EnvironmentFindings::all_skipped("no GPS position");
    };
    let mut out = EnvironmentFindings::all_skipped("");

    // G9 needs only the location.
    out.water_depth = match r.environment.as_ref().and_then(|e| e.water_depth) {
        None => GroupFinding::skipped(RuleGroup::WaterDepth, "no recorded water depth"),
        Some(depth) => match env.place(s.latitude, s.longitude) {
            Err(e) => GroupFinding::skipped(RuleGroup::WaterDepth, format!("provider failure: {e}")),
            Ok(None) => GroupFinding::skipped(RuleGroup::WaterDepth, "no bathymetry for location"),
            Ok(Some(PlaceLabels { max_water_depth: None, .. })) => {
                GroupFinding::skipped(RuleGroup::WaterDepth, "no bathymetry for location")
            }
            Ok(Some(PlaceLabels { max_water_depth: Some(max), .. })) => {
                let excess = depth - max;
                GroupFinding::judged(
                    RuleGroup::WaterDepth,
                    excess > tol.water_depth_m,
                    if excess > tol.water_depth_m { (excess / (max + excess).max(1.0)).clamp(0.5, 1.0) } else { 0.0 },
                    format!("recorded depth {depth} m, location allows {max} m"),
                )
            }
        },
    };

    let Some(date) = r.datetime_original().map(|t| t.date_naive()) else {
        out.weather_settings = GroupFinding::skipped(RuleGroup::WeatherSettings, "no capture date");
        out.environment = GroupFinding::skipped(RuleGroup::Environment, "no capture date");
        return out;
    };
    let conditions = match env.conditions(s.latitude, s.longitude, date) {
        Err(e) => {
            let d = format!("provider failure: {e}");
            out.weather_settings = GroupFinding::skipped(RuleGroup::WeatherSettings, &d);
            out.environment = GroupFinding::skipped(RuleGroup::Environment, &d);
            return out;
        }
        Ok(None) => {
            out.weather_settings = GroupFinding::skipped(RuleGroup::WeatherSettings, "no provider entry for location/date");
            out.environment = GroupFinding::skipped(RuleGroup::Environment, "no provider entry for location/date");
            return out;
        }
        Ok(Some(c)) => c,
    };

    // G7
    out.weather_settings = match (conditions.weather.as_deref(), r.camera.as_ref().and_then(|c| c.white_balance)) {
        (Some(weather), Some(wb)) => {
            if wb == WhiteBalance::Auto {
                GroupFinding::judged(RuleGroup::WeatherSettings, false, 0.0, format!("auto white balance under {weather}"))
            } else {
                match env.white_balance_compatible(weather, wb) {
                    Some(true) => GroupFinding::judged(RuleGroup::WeatherSettings, false, 0.0, format!("{wb} suits {weather}")),
                    Some(false) => GroupFinding::judged(
                        RuleGroup::WeatherSettings,
                        true,
                        1.0,
                        format!("white balance {wb} does not suit {weather} at the shooting location"),
                    ),
                    None => GroupFinding::judged(
                        RuleGroup::WeatherSettings,
                        false,
                        0.0,
                        format!("advisory: no white-balance mapping for weather {weather:?} ({wb})"),
                    ),
                }
            }
        }
        _ => GroupFinding::skipped(RuleGroup::WeatherSettings, "white balance or provider weather absent"),
    };

    // G8
    out.environment = match r.environment.as_ref() {
        None => GroupFinding::skipped(RuleGroup::Environment, "no recorded environment"),
        Some(e) => {
            let mut checks: Vec<(bool, String)> = Vec::new();
            if let (Some(rw), Some(pw)) = (e.weather.as_deref(), conditions.weather.as_deref()) {
                let ok = rw.trim().eq_ignore_ascii_case(pw.trim());
                checks.push((!ok, format!("weather {rw:?} vs {pw:?}")));
            }
            let numeric = [
                ("temperature", e.temperature, conditions.temperature, tol.temperature_c),
                ("humidity", e.humidity, conditions.humidity, tol.humidity_pct),
                ("pressure", e.pressure, conditions.pressure, tol.pressure_hpa),
            ];
            for (name, recorded, expected, slack) in numeric {
                if let (Some(r), Some(x)) = (recorded, expected) {
                    let diff = (r - x).abs();
                    checks.push((diff > slack, format!("{name} {r} vs {x}")));
                }
            }
            if checks.is_empty() {
                GroupFinding::skipped(RuleGroup::Environment, "nothing to compare with provider")
            } else {
                let failed = checks.iter().filter(|c| c.0).count();
                let detail = checks.iter().map(|c| c.1.as_str()).collect::<Vec<_>>().join("; ");
                GroupFinding::judged(RuleGroup::Environment, failed > 0, failed as f64 / checks.len() as f64, detail)
            }
        }
    };
    out
}
