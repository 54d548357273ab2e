//! Lenient scalar converters shared by the sidecar parser and the tag mapper.

use chrono::{DateTime, FixedOffset, NaiveDateTime, TimeZone, Utc};

use super::Timestamp;

pub const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

pub fn format_ts(t: &Timestamp) -> String {
    t.format(TS_FORMAT).to_string()
}

pub mod ts {
    use super::*;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_ts(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let s = String::deserialize(d)?;
        parse_timestamp(&s, None).ok_or_else(|| D::Error::custom(format!("bad timestamp {s:?}")))
    }
}

pub mod ts_opt {
    use super::*;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Option<Timestamp>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => s.serialize_str(&format_ts(t)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Timestamp>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| parse_timestamp(&s, None).ok_or_else(|| D::Error::custom(format!("bad timestamp {s:?}"))))
            .transpose()
    }
}

/// Parses `"a/b"`, `"12.5"`, `"f/4"`, `"50 mm"` and the like into a real.
pub fn parse_rational(s: &str) -> Option<f64> {
    let s = s.trim();
    let s = s.strip_prefix("f/").or_else(|| s.strip_prefix("F/")).unwrap_or(s);
    let s = s.trim_end_matches(|c: char| c.is_ascii_alphabetic() || c == ' ').trim();
    if s.is_empty() {
        return None;
    }
    let v = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().ok()?;
            let d: f64 = d.trim().parse().ok()?;
            if d == 0.0 {
                return None;
            }
            n / d
        }
        None => s.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

/// Parses a GPS coordinate: plain decimal, or degrees/minutes/seconds given as
/// rationals or decimals (`"40/1 42/1 46/1"`, `"40 deg 42' 46\" N"`), with an
/// optional hemisphere letter either embedded or passed as `reference`.
pub fn parse_coordinate(s: &str, reference: Option<&str>) -> Option<f64> {
    let mut hemi: Option<char> = reference.and_then(|r| r.trim().chars().next()).map(|c| c.to_ascii_uppercase());
    let mut cleaned = String::with_capacity(s.len());
    for c in s.replace("deg", " ").chars() {
        match c {
            'N' | 'S' | 'E' | 'W' | 'n' | 's' | 'e' | 'w' => hemi = Some(c.to_ascii_uppercase()),
            '°' | '\'' | '"' | ',' => cleaned.push(' '),
            _ => cleaned.push(c),
        }
    }
    let parts: Vec<f64> = cleaned
        .split_whitespace()
        .map(parse_rational)
        .collect::<Option<Vec<_>>>()?;
    let magnitude = match parts.as_slice() {
        [d] => *d,
        [d, m] => d.abs() + m / 60.0,
        [d, m, sec] => d.abs() + m / 60.0 + sec / 3600.0,
        _ => return None,
    };
    let negative = parts.first().is_some_and(|d| *d < 0.0) || matches!(hemi, Some('S') | Some('W'));
    let v = if negative { -magnitude.abs() } else { magnitude };
    v.is_finite().then_some(v)
}

/// Parses a UTC offset: signed minutes (`"-300"`) or `"+05:30"` / `"-0500"`.
pub fn parse_offset_minutes(s: &str) -> Option<i32> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("z") {
        return Some(0);
    }
    if let Ok(m) = s.parse::<i32>() {
        if !(s.len() == 5 && (s.starts_with('+') || s.starts_with('-'))) {
            return Some(m);
        }
    }
    let (sign, rest) = match s.as_bytes().first()? {
        b'+' => (1, &s[1..]),
        b'-' => (-1, &s[1..]),
        _ => return None,
    };
    let (h, m) = match rest.split_once(':') {
        Some((h, m)) => (h, m),
        None if rest.len() == 4 => rest.split_at(2),
        None => (rest, "0"),
    };
    let h: i32 = h.parse().ok()?;
    let m: i32 = m.parse().ok()?;
    Some(sign * (h * 60 + m))
}

/// Parses an ISO-8601 or EXIF (`YYYY:MM:DD HH:MM:SS`) timestamp into UTC.
///
/// Strings carrying their own offset are converted directly. Naive local
/// strings are shifted by `local_offset_minutes` when given, else taken as UTC.
pub fn parse_timestamp(s: &str, local_offset_minutes: Option<i32>) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(truncate(t.with_timezone(&Utc)));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%:z", "%Y:%m:%d %H:%M:%S%:z", "%Y-%m-%d %H:%M:%S%:z"] {
        if let Ok(t) = DateTime::parse_from_str(s, fmt) {
            return Some(truncate(t.with_timezone(&Utc)));
        }
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S",
        "%Y:%m:%d %H:%M:%S",
        "%Y:%m:%d %H:%M:%S%.f",
    ] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            let offset = FixedOffset::east_opt(local_offset_minutes.unwrap_or(0) * 60)?;
            let local = offset.from_local_datetime(&naive).single()?;
            return Some(truncate(local.with_timezone(&Utc)));
        }
    }
    None
}

fn truncate(t: Timestamp) -> Timestamp {
    Utc.timestamp_opt(t.timestamp(), 0).single().unwrap_or(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals() {
        assert!((parse_rational("1/60").unwrap() - 0.016_666_666).abs() < 1e-6);
        assert_eq!(parse_rational("f/4"), Some(4.0));
        assert_eq!(parse_rational("50 mm"), Some(50.0));
        assert_eq!(parse_rational("-2"), Some(-2.0));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    #[test]
    fn dms_rational_north() {
        // 40 + 42/60 + 46/3600 = 40.712777...
        let lat = parse_coordinate("40/1 42/1 46/1", Some("N")).unwrap();
        assert!((lat - 40.712_777_8).abs() < 1e-6);
        let lat = parse_coordinate("40/1 42/1 46/1 N", None).unwrap();
        assert!((lat - 40.712_777_8).abs() < 1e-6);
    }

    #[test]
    fn dms_west_is_negative() {
        let lon = parse_coordinate("74 deg 0' 21.6\" W", None).unwrap();
        assert!((lon + 74.006).abs() < 1e-9);
        assert_eq!(parse_coordinate("-74.006", None), Some(-74.006));
    }

    #[test]
    fn offsets() {
        assert_eq!(parse_offset_minutes("-300"), Some(-300));
        assert_eq!(parse_offset_minutes("+05:30"), Some(330));
        assert_eq!(parse_offset_minutes("-0500"), Some(-300));
        assert_eq!(parse_offset_minutes("Z"), Some(0));
    }

    #[test]
    fn timestamps_to_utc() {
        let t = parse_timestamp("2009:01:15 15:31:00", Some(-300)).unwrap();
        assert_eq!(format_ts(&t), "2009-01-15T20:31:00Z");
        let t = parse_timestamp("2009-01-15T15:31:00-05:00", None).unwrap();
        assert_eq!(format_ts(&t), "2009-01-15T20:31:00Z");
        let t = parse_timestamp("2009-01-15T20:31:00Z", Some(600)).unwrap();
        assert_eq!(format_ts(&t), "2009-01-15T20:31:00Z");
    }
}
