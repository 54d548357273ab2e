//! Maps raw EXIF/IPTC/XMP tag maps (as emitted by common extractors) onto the
//! canonical record.

use std::collections::BTreeMap;

use super::values::{parse_coordinate, parse_offset_minutes, parse_rational, parse_timestamp};
use super::*;

/// Result of canonicalizing a tag map. Unreadable mapped tags are reported as
/// violations and left out of the record.
#[derive(Debug, Clone, PartialEq)]
pub struct Canonicalized {
    pub record: ImageServiceRecord,
    pub violations: Vec<ValidationViolation>,
}

/// Canonical field each recognised tag lands in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    DateTimeOriginal,
    DateTimeDigitized,
    DateTimeModified,
    Offset,
    GpsTime,
    GpsDate,
    Latitude,
    LatitudeRef,
    Longitude,
    LongitudeRef,
    City,
    State,
    Country,
    Title,
    Caption,
    Headline,
    Make,
    Model,
    FocalLength,
    FNumber,
    ApertureApex,
    ExposureTime,
    ShutterApex,
    Iso,
    ExposureValue,
    WhiteBalance,
    Width,
    Height,
    Temperature,
    Humidity,
    Pressure,
    Weather,
    WaterDepth,
}

/// Tag vocabulary, first match wins when several tags feed one field.
const TAG_TABLE: &[(&str, Target)] = &[
    ("DateTimeOriginal", Target::DateTimeOriginal),
    ("CreateDate", Target::DateTimeDigitized),
    ("DateTimeDigitized", Target::DateTimeDigitized),
    ("ModifyDate", Target::DateTimeModified),
    ("DateTime", Target::DateTimeModified),
    ("OffsetTimeOriginal", Target::Offset),
    ("OffsetTime", Target::Offset),
    ("TimeZoneOffset", Target::Offset),
    ("GPSTimeStamp", Target::GpsTime),
    ("GPSDateStamp", Target::GpsDate),
    ("GPSLatitude", Target::Latitude),
    ("GPSLatitudeRef", Target::LatitudeRef),
    ("GPSLongitude", Target::Longitude),
    ("GPSLongitudeRef", Target::LongitudeRef),
    ("City", Target::City),
    ("State", Target::State),
    ("Province-State", Target::State),
    ("Country", Target::Country),
    ("Country-PrimaryLocationName", Target::Country),
    ("Title", Target::Title),
    ("ObjectName", Target::Title),
    ("Caption-Abstract", Target::Caption),
    ("ImageDescription", Target::Caption),
    ("Description", Target::Caption),
    ("Headline", Target::Headline),
    ("Make", Target::Make),
    ("Model", Target::Model),
    ("FocalLength", Target::FocalLength),
    ("FNumber", Target::FNumber),
    ("ApertureValue", Target::ApertureApex),
    ("ExposureTime", Target::ExposureTime),
    ("ShutterSpeedValue", Target::ShutterApex),
    ("ISO", Target::Iso),
    ("ISOSpeedRatings", Target::Iso),
    ("PhotographicSensitivity", Target::Iso),
    ("ExposureValue", Target::ExposureValue),
    ("LightValue", Target::ExposureValue),
    ("WhiteBalance", Target::WhiteBalance),
    ("ExifImageWidth", Target::Width),
    ("PixelXDimension", Target::Width),
    ("ImageWidth", Target::Width),
    ("ExifImageHeight", Target::Height),
    ("PixelYDimension", Target::Height),
    ("ImageHeight", Target::Height),
    ("AmbientTemperature", Target::Temperature),
    ("Humidity", Target::Humidity),
    ("Pressure", Target::Pressure),
    ("Weather", Target::Weather),
    ("WaterDepth", Target::WaterDepth),
];

fn lookup(tag: &str) -> Option<Target> {
    // Extractors often prefix the family ("EXIF:FNumber", "IPTC:City").
    let bare = tag.rsplit(':').next().unwrap_or(tag);
    TAG_TABLE.iter().find(|(name, _)| *name == bare).map(|(_, t)| *t)
}

/// Maps an extractor's tag map onto a canonical record for version `id`
/// uploaded at `upload_time`.
pub fn canonicalize_tags(id: &str, upload_time: Timestamp, raw: &BTreeMap<String, String>) -> Canonicalized {
    let mut by_target: BTreeMap<u8, (&str, &str)> = BTreeMap::new();
    let mut extras = BTreeMap::new();
    // Walk in table order so precedence is independent of map iteration order.
    for (name, target) in TAG_TABLE {
        for (tag, value) in raw {
            let bare = tag.rsplit(':').next().unwrap_or(tag);
            if bare == *name {
                by_target.entry(*target as u8).or_insert((tag.as_str(), value.as_str()));
            }
        }
    }
    for (tag, value) in raw {
        if lookup(tag).is_none() {
            extras.insert(tag.clone(), value.clone());
        }
    }
    let get = |t: Target| by_target.get(&(t as u8)).copied();

    let mut violations = Vec::new();
    let mut bad = |path: &str, tag: &str, value: &str, why: &str| {
        violations.push(ValidationViolation::new(id, path, format!("{tag}={value:?}: {why}")));
    };

    let mut real = |t: Target, path: &str, positive: bool| -> Option<f64> {
        let (tag, value) = get(t)?;
        match parse_rational(value) {
            Some(v) if !positive || v > 0.0 => Some(v),
            Some(_) => {
                bad(path, tag, value, "must be > 0");
                None
            }
            None => {
                bad(path, tag, value, "not a number");
                None
            }
        }
    };

    let focal_length = real(Target::FocalLength, "camera.focal_length", true);
    let mut aperture = real(Target::FNumber, "camera.aperture", true);
    if aperture.is_none() && get(Target::FNumber).is_none() {
        // APEX aperture value: N = 2^(Av/2)
        aperture = real(Target::ApertureApex, "camera.aperture", false).map(|av| 2f64.powf(av / 2.0));
    }
    let exposure_time = real(Target::ExposureTime, "camera.exposure_time", true);
    let shutter_speed = real(Target::ShutterApex, "camera.shutter_speed", false);
    let exposure_value = real(Target::ExposureValue, "camera.exposure_value", false);
    let iso = real(Target::Iso, "camera.iso", true).map(|v| v.round() as u32);
    let width = real(Target::Width, "camera.resolution", true);
    let height = real(Target::Height, "camera.resolution", true);
    let temperature = real(Target::Temperature, "environment.temperature", false);
    let humidity = real(Target::Humidity, "environment.humidity", false);
    let pressure = real(Target::Pressure, "environment.pressure", true);
    let water_depth = real(Target::WaterDepth, "environment.water_depth", false);

    let text = |t: Target| get(t).map(|(_, v)| v.trim().to_string()).filter(|s| !s.is_empty());

    let mut tz = None;
    if let Some((tag, value)) = get(Target::Offset) {
        match parse_offset_minutes(value) {
            Some(m) => tz = Some(m),
            None => bad("temporal.timezone_offset", tag, value, "not an offset"),
        }
    }
    let mut stamp = |t: Target, path: &str, offset: Option<i32>| -> Option<Timestamp> {
        let (tag, value) = get(t)?;
        let parsed = parse_timestamp(value, offset);
        if parsed.is_none() {
            bad(path, tag, value, "not a timestamp");
        }
        parsed
    };
    let datetime_original = stamp(Target::DateTimeOriginal, "temporal.datetime_original", tz);
    let datetime_digitized = stamp(Target::DateTimeDigitized, "temporal.datetime_digitized", tz);
    let datetime_modified = stamp(Target::DateTimeModified, "temporal.datetime_modified", tz);
    let gps_timestamp = match (get(Target::GpsDate), get(Target::GpsTime)) {
        (Some((_, date)), Some((tag, time))) => {
            let time = time
                .split_whitespace()
                .map(|p| parse_rational(p).map(|v| v as u32))
                .collect::<Option<Vec<_>>>()
                .filter(|v| v.len() == 3)
                .map(|v| format!("{:02}:{:02}:{:02}", v[0], v[1], v[2]))
                .unwrap_or_else(|| time.to_string());
            let joined = format!("{} {time}", date.replace('-', ":"));
            let parsed = parse_timestamp(&joined, None);
            if parsed.is_none() {
                bad("temporal.gps_timestamp", tag, time.as_str(), "not a timestamp");
            }
            parsed
        }
        _ => None,
    };

    let mut coord = |t: Target, r: Target, path: &str, limit: f64| -> Option<f64> {
        let (tag, value) = get(t)?;
        let reference = get(r).map(|(_, v)| v);
        match parse_coordinate(value, reference) {
            Some(v) if v.abs() <= limit => Some(v),
            Some(_) => {
                bad(path, tag, value, "out of range");
                None
            }
            None => {
                bad(path, tag, value, "not a coordinate");
                None
            }
        }
    };
    let latitude = coord(Target::Latitude, Target::LatitudeRef, "spatial.latitude", 90.0);
    let longitude = coord(Target::Longitude, Target::LongitudeRef, "spatial.longitude", 180.0);

    let white_balance = get(Target::WhiteBalance).and_then(|(tag, value)| {
        let wb = map_white_balance(value);
        if wb.is_none() {
            bad("camera.white_balance", tag, value, "unknown white balance");
        }
        wb
    });

    let humidity = humidity.filter(|h| {
        let ok = (0.0..=100.0).contains(h);
        if !ok {
            let (tag, value) = get(Target::Humidity).unwrap_or(("Humidity", ""));
            bad("environment.humidity", tag, value, "outside [0, 100]");
        }
        ok
    });
    let water_depth = water_depth.filter(|d| {
        let ok = *d >= 0.0;
        if !ok {
            let (tag, value) = get(Target::WaterDepth).unwrap_or(("WaterDepth", ""));
            bad("environment.water_depth", tag, value, "must be >= 0");
        }
        ok
    });
    let tz = tz.filter(|m| {
        let ok = m.abs() <= MAX_TZ_OFFSET_MINUTES;
        if !ok {
            bad("temporal.timezone_offset", "OffsetTime", &m.to_string(), "outside +/-14h");
        }
        ok
    });

    let mut record = ImageServiceRecord::bare(id, upload_time);
    if let (Some(latitude), Some(longitude)) = (latitude, longitude) {
        record.spatial = Some(SpatialAttrs {
            latitude,
            longitude,
            city: text(Target::City),
            state: text(Target::State),
            country: text(Target::Country),
        });
    }
    let temporal = TemporalAttrs {
        datetime_original,
        datetime_digitized,
        datetime_modified,
        timezone_offset: tz,
        gps_timestamp,
    };
    if temporal != TemporalAttrs::default() {
        record.temporal = Some(temporal);
    }
    let contextual = ContextualAttrs {
        title: text(Target::Title),
        caption: text(Target::Caption),
        headline: text(Target::Headline),
    };
    if contextual != ContextualAttrs::default() {
        record.contextual = Some(contextual);
    }
    let camera = CameraAttrs {
        make: text(Target::Make),
        model: text(Target::Model),
        focal_length,
        aperture,
        exposure_time,
        shutter_speed,
        iso,
        exposure_value,
        white_balance,
        resolution: match (width, height) {
            (Some(w), Some(h)) => Some((w.round() as u32, h.round() as u32)),
            _ => None,
        },
    };
    if camera != CameraAttrs::default() {
        record.camera = Some(camera);
    }
    let environment = EnvironmentAttrs {
        temperature,
        humidity,
        pressure,
        weather: text(Target::Weather),
        water_depth,
    };
    if environment != EnvironmentAttrs::default() {
        record.environment = Some(environment);
    }
    record.extras = extras;
    Canonicalized { record, violations }
}

fn map_white_balance(value: &str) -> Option<WhiteBalance> {
    let v = value.trim().to_ascii_lowercase();
    if let Some(wb) = WhiteBalance::parse(&v) {
        return Some(wb);
    }
    match v.as_str() {
        "0" | "auto white balance" => Some(WhiteBalance::Auto),
        "1" | "manual" | "manual white balance" => Some(WhiteBalance::Daylight),
        "fine weather" | "sunny" => Some(WhiteBalance::Daylight),
        "cloudy weather" | "shade" | "overcast" => Some(WhiteBalance::Cloudy),
        "incandescent" | "tungsten (incandescent light)" => Some(WhiteBalance::Tungsten),
        _ if v.contains("fluorescent") => Some(WhiteBalance::Fluorescent),
        _ => None,
    }
}
