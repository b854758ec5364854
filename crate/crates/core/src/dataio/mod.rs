//! Dataset ingestion, alignment, normalization, splitting and rebalancing.
//!
//! Owns the fixed 12-feature schema: six weather variables followed by six
//! power-quality variables, in an order that is identical across every CSV
//! file, model file and report produced by this crate.

mod align;
mod csv_io;
mod norm;
mod split;
mod time;

pub use align::{align_streams, PowerRecord, WeatherRecord};
pub use csv_io::{load_csv, write_csv, CsvLoad};
pub use norm::{apply_norm, fit_norm, NormStats};
pub use split::{stratified_kfold, stratified_split, FoldPlan};
pub use time::Timestamp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Number of input features; fixed by the schema.
pub const NUM_FEATURES: usize = 12;

/// A single 12-dimensional feature vector.
pub type FeatureVec = [f64; NUM_FEATURES];

/// Canonical feature identifiers, weather block first.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "wind_gust",
    "wind_dir",
    "temperature",
    "pressure",
    "humidity",
    "precipitation",
    "d_frequency",
    "d_voltage_imbalance",
    "d_active_power",
    "min_power_factor",
    "d_reactive_power",
    "flicker",
];

/// Errors raised by data loading and preparation.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    NotFound(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: ::csv::Error,
    },
    #[error("header mismatch: offending columns {offending:?} (expected order {expected:?})")]
    HeaderMismatch {
        offending: Vec<String>,
        expected: Vec<String>,
    },
    #[error("no valid rows after ingestion")]
    NoValidRows,
    #[error("invalid timestamp {0:?} (expected YYYY-MM-DDTHH:MM:SSZ with seconds 00)")]
    BadTimestamp(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("dataset contains a single class (label {0})")]
    SingleClass(u8),
    #[error("class {label} has {count} samples, fewer than k={k}")]
    ClassTooSmall { label: u8, count: usize, k: usize },
    #[error("power stream cadence violation at {at}: expected strictly increasing 1-minute steps")]
    PowerCadence { at: Timestamp },
    #[error("weather coverage gap of {gap_minutes} minutes after {after} inside power range")]
    CoverageGap { after: Timestamp, gap_minutes: i64 },
}

/// The ordered identifiers of the 12 input features.
///
/// The order is fixed; constructing a schema always yields the canonical
/// one, and all files and reports use it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    names: [&'static str; NUM_FEATURES],
}

impl FeatureSchema {
    pub fn standard() -> Self {
        FeatureSchema {
            names: FEATURE_NAMES,
        }
    }

    pub fn names(&self) -> &[&'static str; NUM_FEATURES] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &'static str {
        self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| *n == name)
    }
}

impl Default for FeatureSchema {
    fn default() -> Self {
        Self::standard()
    }
}

/// One observation: 12 features, a binary label (1 = imminent fault) and a
/// minute-resolution timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: FeatureVec,
    pub y: u8,
    pub timestamp: Timestamp,
}

impl Sample {
    pub fn new(x: FeatureVec, y: u8, timestamp: Timestamp) -> Self {
        assert!(y <= 1, "label must be 0 or 1, got {y}");
        assert!(
            x.iter().all(|v| v.is_finite()),
            "features must be finite after ingestion"
        );
        Sample { x, y, timestamp }
    }
}

/// An immutable collection of samples with O(1) per-class counts.
#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Vec<Sample>,
    schema: FeatureSchema,
    n_fault: usize,
    n_nonfault: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, schema: FeatureSchema) -> Self {
        let n_fault = samples.iter().filter(|s| s.y == 1).count();
        let n_nonfault = samples.len() - n_fault;
        Dataset {
            samples,
            schema,
            n_fault,
            n_nonfault,
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_fault(&self) -> usize {
        self.n_fault
    }

    pub fn n_nonfault(&self) -> usize {
        self.n_nonfault
    }

    pub fn count(&self, label: u8) -> usize {
        if label == 1 {
            self.n_fault
        } else {
            self.n_nonfault
        }
    }

    /// New dataset holding the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let samples = indices.iter().map(|&i| self.samples[i].clone()).collect();
        Dataset::new(samples, self.schema.clone())
    }
}

/// Per-class loss weights with equalized class mass: `w_c = N / (2 n_c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub nonfault: f64,
    pub fault: f64,
}

impl ClassWeights {
    /// Uniform weights; every sample counts the same.
    pub fn uniform() -> Self {
        ClassWeights {
            nonfault: 1.0,
            fault: 1.0,
        }
    }

    pub fn weight_for(&self, label: u8) -> f64 {
        if label == 1 {
            self.fault
        } else {
            self.nonfault
        }
    }
}

/// Inverse-frequency class weights: `w_c = N / (2 n_c)`, so that the two
/// weighted class masses are equal.
pub fn class_weights(ds: &Dataset) -> Result<ClassWeights, DataError> {
    if ds.n_fault() == 0 {
        return Err(DataError::SingleClass(0));
    }
    if ds.n_nonfault() == 0 {
        return Err(DataError::SingleClass(1));
    }
    let n = ds.len() as f64;
    Ok(ClassWeights {
        nonfault: n / (2.0 * ds.n_nonfault() as f64),
        fault: n / (2.0 * ds.n_fault() as f64),
    })
}

/// Duplicate minority-class samples (drawn with replacement, seeded) until
/// the class counts are equal. Majority samples are untouched; the original
/// samples, minority included, are all retained.
pub fn oversample_minority(train: &Dataset, seed: u64) -> Result<Dataset, DataError> {
    if train.n_fault() == 0 {
        return Err(DataError::SingleClass(0));
    }
    if train.n_nonfault() == 0 {
        return Err(DataError::SingleClass(1));
    }
    let (minority_label, deficit) = if train.n_fault() < train.n_nonfault() {
        (1u8, train.n_nonfault() - train.n_fault())
    } else {
        (0u8, train.n_fault() - train.n_nonfault())
    };
    let mut samples = train.samples().to_vec();
    if deficit > 0 {
        let minority: Vec<&Sample> = train.samples().iter().filter(|s| s.y == minority_label).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..deficit {
            let pick = rng.gen_range(0..minority.len());
            samples.push(minority[pick].clone());
        }
    }
    Ok(Dataset::new(samples, train.schema().clone()))
}
