//! Minute-resolution UTC timestamps.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::DataError;

/// UTC instant at minute resolution, stored as minutes since the Unix
/// epoch. Serialized as `YYYY-MM-DDTHH:MM:SSZ` with seconds fixed at 00.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub fn from_minutes(minutes: i64) -> Self {
        Timestamp(minutes)
    }

    pub fn minutes(&self) -> i64 {
        self.0
    }

    pub fn from_ymd_hm(year: i64, month: u32, day: u32, hour: u32, minute: u32) -> Self {
        let days = days_from_civil(year, month, day);
        Timestamp(days * 1440 + i64::from(hour) * 60 + i64::from(minute))
    }

    /// Parse `YYYY-MM-DDTHH:MM:SSZ`. Seconds must be `00`: the data model
    /// is minute-resolution and silently truncating seconds would hide
    /// misaligned inputs.
    pub fn parse(s: &str) -> Result<Self, DataError> {
        let bad = || DataError::BadTimestamp(s.to_string());
        let bytes = s.as_bytes();
        if bytes.len() != 20 || bytes[4] != b'-' || bytes[7] != b'-' || bytes[10] != b'T'
            || bytes[13] != b':' || bytes[16] != b':' || bytes[19] != b'Z'
        {
            return Err(bad());
        }
        let num = |range: std::ops::Range<usize>| -> Result<i64, DataError> {
            s[range].parse::<i64>().map_err(|_| bad())
        };
        let year = num(0..4)?;
        let month = num(5..7)?;
        let day = num(8..10)?;
        let hour = num(11..13)?;
        let minute = num(14..16)?;
        let second = num(17..19)?;
        if !(1583..=9999).contains(&year) // Gregorian calendar only
            || !(1..=12).contains(&month)
            || day < 1
            || day > days_in_month(year, month as u32)
            || hour > 23
            || minute > 59
            || second != 0
        {
            return Err(bad());
        }
        Ok(Self::from_ymd_hm(
            year,
            month as u32,
            day as u32,
            hour as u32,
            minute as u32,
        ))
    }

    /// True when the instant falls on a whole hour.
    pub fn is_top_of_hour(&self) -> bool {
        self.0.rem_euclid(60) == 0
    }

    /// Largest whole hour not after this instant.
    pub fn floor_hour(&self) -> Timestamp {
        Timestamp(self.0 - self.0.rem_euclid(60))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let days = self.0.div_euclid(1440);
        let rem = self.0.rem_euclid(1440);
        let (year, month, day) = civil_from_days(days);
        write!(
            f,
            "{:04}-{:02}-{:02}T{:02}:{:02}:00Z",
            year,
            month,
            day,
            rem / 60,
            rem % 60
        )
    }
}

impl Serialize for Timestamp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Timestamp::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn is_leap(year: i64) -> bool {
    year % 4 == 0 && (year % 100 != 0 || year % 400 == 0)
}

fn days_in_month(year: i64, month: u32) -> i64 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        _ => 28,
    }
}

// Civil-date conversions on the proleptic Gregorian calendar.
fn days_from_civil(mut year: i64, month: u32, day: u32) -> i64 {
    if month <= 2 {
        year -= 1;
    }
    let era = year.div_euclid(400);
    let yoe = year - era * 400;
    let mp = i64::from(month) + if month > 2 { -3 } else { 9 };
    let doy = (153 * mp + 2) / 5 + i64::from(day) - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(days: i64) -> (i64, u32, u32) {
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let year = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let month = (if mp < 10 { mp + 3 } else { mp - 9 }) as u32;
    (if month <= 2 { year + 1 } else { year }, month, day)
}
