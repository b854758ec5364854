//! Temporal alignment of the minute-resolution power-quality stream with
//! the hour-resolution weather stream.
//!
//! Non-fault minutes are subsampled one-per-hour (the minute coinciding
//! with each weather timestamp); fault minutes are always retained at full
//! resolution and joined to the most recent weather row.

use super::{DataError, Dataset, FeatureSchema, Sample, Timestamp};

/// One minute of power-quality measurements plus the fault label.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerRecord {
    pub timestamp: Timestamp,
    /// d_frequency, d_voltage_imbalance, d_active_power, min_power_factor,
    /// d_reactive_power, flicker: features 6..12 of the schema.
    pub power: [f64; 6],
    pub y: u8,
}

/// One hour of weather measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherRecord {
    pub timestamp: Timestamp,
    /// wind_gust, wind_dir, temperature, pressure, humidity,
    /// precipitation: features 0..6 of the schema.
    pub weather: [f64; 6],
}

/// Join the two streams into a dataset.
///
/// Preconditions: power timestamps strictly increasing at 1-minute
/// cadence; weather rows at 1-hour cadence with the first row no later
/// than the first power minute. A weather step other than 60 minutes
/// inside the power range is a coverage gap.
pub fn align_streams(
    power: &[PowerRecord],
    weather: &[WeatherRecord],
) -> Result<Dataset, DataError> {
    if power.is_empty() || weather.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    for pair in power.windows(2) {
        if pair[1].timestamp.minutes() - pair[0].timestamp.minutes() != 1 {
            return Err(DataError::PowerCadence {
                at: pair[1].timestamp,
            });
        }
    }
    let first_power = power[0].timestamp;
    let last_power = power[power.len() - 1].timestamp;
    if weather[0].timestamp > first_power {
        return Err(DataError::CoverageGap {
            after: weather[0].timestamp,
            gap_minutes: weather[0].timestamp.minutes() - first_power.minutes(),
        });
    }
    for pair in weather.windows(2) {
        let step = pair[1].timestamp.minutes() - pair[0].timestamp.minutes();
        let overlaps_range =
            pair[1].timestamp > first_power && pair[0].timestamp < last_power;
        if overlaps_range && step != 60 {
            return Err(DataError::CoverageGap {
                after: pair[0].timestamp,
                gap_minutes: step,
            });
        }
        if step <= 0 {
            return Err(DataError::CoverageGap {
                after: pair[0].timestamp,
                gap_minutes: step,
            });
        }
    }

    let mut samples = Vec::new();
    let mut cursor = 0usize;
    for p in power {
        // Most recent weather row at or before this minute.
        while cursor + 1 < weather.len() && weather[cursor + 1].timestamp <= p.timestamp {
            cursor += 1;
        }
        let w = &weather[cursor];
        let age = p.timestamp.minutes() - w.timestamp.minutes();
        if age >= 60 {
            return Err(DataError::CoverageGap {
                after: w.timestamp,
                gap_minutes: age,
            });
        }
        let keep = p.y == 1 || p.timestamp == w.timestamp;
        if keep {
            let mut x = [0.0; 12];
            x[..6].copy_from_slice(&w.weather);
            x[6..].copy_from_slice(&p.power);
            samples.push(Sample::new(x, p.y, p.timestamp));
        }
    }
    if samples.is_empty() {
        return Err(DataError::NoValidRows);
    }
    Ok(Dataset::new(samples, FeatureSchema::standard()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_run(minutes: std::ops::Range<i64>, faults: &[i64]) -> Vec<PowerRecord> {
        minutes
            .map(|m| PowerRecord {
                timestamp: Timestamp::from_minutes(m),
                power: [m as f64, 0.0, 0.0, 0.9, 0.0, 0.1],
                y: u8::from(faults.contains(&m)),
            })
            .collect()
    }

    fn weather_at(hours: &[i64]) -> Vec<WeatherRecord> {
        hours
            .iter()
            .map(|&h| WeatherRecord {
                timestamp: Timestamp::from_minutes(h * 60),
                weather: [h as f64, 180.0, -1.0, 1005.0, 75.0, 0.0],
            })
            .collect()
    }

    #[test]
    fn one_in_sixty_without_faults() {
        let ds = align_streams(&power_run(0..180, &[]), &weather_at(&[0, 1, 2])).unwrap();
        assert_eq!(ds.len(), 3);
        let minutes: Vec<i64> = ds.samples().iter().map(|s| s.timestamp.minutes()).collect();
        assert_eq!(minutes, vec![0, 60, 120]);
    }

    #[test]
    fn faults_are_exempt_from_subsampling() {
        let ds =
            align_streams(&power_run(0..180, &[75, 136]), &weather_at(&[0, 1, 2])).unwrap();
        assert_eq!(ds.len(), 5);
        assert_eq!(ds.n_fault(), 2);
        // Fault at minute 75 joins the hour-1 weather row.
        let fault = ds
            .samples()
            .iter()
            .find(|s| s.timestamp.minutes() == 75)
            .unwrap();
        assert_eq!(fault.x[0], 1.0);
        // Power features come from the fault minute itself.
        assert_eq!(fault.x[6], 75.0);
    }

    #[test]
    fn coverage_gap_is_detected() {
        let err = align_streams(&power_run(0..121, &[]), &weather_at(&[0, 2])).unwrap_err();
        assert!(matches!(err, DataError::CoverageGap { gap_minutes: 120, .. }));
    }

    #[test]
    fn weather_starting_late_is_a_gap() {
        let err = align_streams(&power_run(0..120, &[]), &weather_at(&[1, 2])).unwrap_err();
        assert!(matches!(err, DataError::CoverageGap { .. }));
    }

    #[test]
    fn power_cadence_violation_is_rejected() {
        let mut power = power_run(0..10, &[]);
        power.remove(5);
        let err = align_streams(&power, &weather_at(&[0])).unwrap_err();
        assert!(matches!(err, DataError::PowerCadence { .. }));
    }
}
