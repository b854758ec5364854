//! Seeded synthetic fault datasets with planted causal mechanisms.
//!
//! Non-fault samples are drawn from truncated-normal per-feature
//! marginals. Explained faults are drawn by rejection against a planted
//! logistic rule over z-scored driver features; a configurable fraction
//! of faults is instead drawn straight from the non-fault distribution,
//! mimicking events that are invisible in the measured variables. The
//! generator records which mechanism (if any) produced every fault, which
//! is the ground truth for attribution tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::sigmoid;
use crate::dataio::{Dataset, FeatureSchema, FeatureVec, Sample, Timestamp, NUM_FEATURES};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    BadConfig(String),
    #[error("rejection sampling infeasible: acceptance rate below {0:e}")]
    InfeasibleRejection(f64),
}

/// Truncated-normal marginal for one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Plausible per-feature marginals in the units of the schema: weather
/// block tuned to an Arctic coastal winter, power block to a single
/// industrial feeder.
pub fn default_marginals() -> [Marginal; NUM_FEATURES] {
    [
        Marginal { mean: 8.0, sd: 5.0, lo: 0.0, hi: 45.0 },      // wind_gust (m/s)
        Marginal { mean: 180.0, sd: 90.0, lo: 0.0, hi: 360.0 },  // wind_dir (deg)
        Marginal { mean: -2.0, sd: 8.0, lo: -30.0, hi: 25.0 },   // temperature (°C)
        Marginal { mean: 1005.0, sd: 12.0, lo: 950.0, hi: 1050.0 }, // pressure (hPa)
        Marginal { mean: 75.0, sd: 15.0, lo: 5.0, hi: 100.0 },   // humidity (%)
        Marginal { mean: 0.5, sd: 1.0, lo: 0.0, hi: 20.0 },      // precipitation (mm)
        Marginal { mean: 0.0, sd: 0.05, lo: -0.5, hi: 0.5 },     // d_frequency (Hz)
        Marginal { mean: 0.5, sd: 0.4, lo: 0.0, hi: 5.0 },       // d_voltage_imbalance (%)
        Marginal { mean: 50.0, sd: 40.0, lo: 0.0, hi: 500.0 },   // d_active_power (kW)
        Marginal { mean: 0.92, sd: 0.06, lo: 0.0, hi: 1.0 },     // min_power_factor
        Marginal { mean: 20.0, sd: 15.0, lo: 0.0, hi: 200.0 },   // d_reactive_power (kVAr)
        Marginal { mean: 0.3, sd: 0.2, lo: 0.0, hi: 2.0 },       // flicker
    ]
}

/// A planted causal rule: `p(fault | x) = σ(Σ c_k · z_{d_k} + bias)` over
/// z-scored driver features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub drivers: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub bias: f64,
}

impl Mechanism {
    pub fn new(drivers: Vec<usize>, coefficients: Vec<f64>, bias: f64) -> Self {
        Mechanism {
            drivers,
            coefficients,
            bias,
        }
    }

    /// Fault probability of a sample under this rule, with z-scores taken
    /// against the scenario marginals.
    pub fn fault_probability(&self, x: &FeatureVec, marginals: &[Marginal; NUM_FEATURES]) -> f64 {
        let mut s = self.bias;
        for (&d, &c) in self.drivers.iter().zip(&self.coefficients) {
            let m = &marginals[d];
            s += c * (x[d] - m.mean) / m.sd;
        }
        sigmoid(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_nonfault: usize,
    pub n_fault: usize,
    pub mechanisms: Vec<Mechanism>,
    /// Additive feature noise in units of each marginal's sd.
    pub noise_sigma: f64,
    /// Fraction of faults drawn from the non-fault distribution, i.e.
    /// invisible in the features.
    pub unexplained_fault_fraction: f64,
    pub seed: u64,
    /// Per-feature generating distributions, recorded so scenario files
    /// are self-describing.
    #[serde(default = "default_marginals_vec")]
    pub marginals: Vec<Marginal>,
}

fn default_marginals_vec() -> Vec<Marginal> {
    default_marginals().to_vec()
}

impl ScenarioConfig {
    pub fn new(n_nonfault: usize, n_fault: usize, mechanisms: Vec<Mechanism>, seed: u64) -> Self {
        ScenarioConfig {
            n_nonfault,
            n_fault,
            mechanisms,
            noise_sigma: 0.0,
            unexplained_fault_fraction: 0.0,
            seed,
            marginals: default_marginals_vec(),
        }
    }

    fn validate(&self) -> Result<[Marginal; NUM_FEATURES], SynthError> {
        if self.marginals.len() != NUM_FEATURES {
            return Err(SynthError::BadConfig(format!(
                "expected {NUM_FEATURES} marginals, got {}",
                self.marginals.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.unexplained_fault_fraction) {
            return Err(SynthError::BadConfig(
                "unexplained_fault_fraction must be in [0, 1]".to_string(),
            ));
        }
        if self.noise_sigma < 0.0 {
            return Err(SynthError::BadConfig("noise_sigma must be ≥ 0".to_string()));
        }
        for (i, m) in self.mechanisms.iter().enumerate() {
            if m.drivers.len() != m.coefficients.len() {
                return Err(SynthError::BadConfig(format!(
                    "mechanism {i}: {} drivers but {} coefficients",
                    m.drivers.len(),
                    m.coefficients.len()
                )));
            }
            if m.drivers.iter().any(|&d| d >= NUM_FEATURES) {
                return Err(SynthError::BadConfig(format!(
                    "mechanism {i}: driver index out of range"
                )));
            }
            if !m.coefficients.iter().all(|c| c.is_finite()) || !m.bias.is_finite() {
                return Err(SynthError::BadConfig(format!(
                    "mechanism {i}: non-finite coefficients"
                )));
            }
        }
        let explained = self.n_fault - self.unexplained_count();
        if explained > 0 && self.mechanisms.is_empty() {
            return Err(SynthError::BadConfig(
                "explained faults requested but no mechanisms given".to_string(),
            ));
        }
        let mut marginals = [Marginal {
            mean: 0.0,
            sd: 1.0,
            lo: 0.0,
            hi: 0.0,
        }; NUM_FEATURES];
        for (slot, m) in marginals.iter_mut().zip(&self.marginals) {
            if m.sd <= 0.0 || m.lo >= m.hi {
                return Err(SynthError::BadConfig("degenerate marginal".to_string()));
            }
            *slot = *m;
        }
        Ok(marginals)
    }

    pub fn unexplained_count(&self) -> usize {
        (self.unexplained_fault_fraction * self.n_fault as f64).round() as usize
    }
}

/// Origin of one generated fault sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultOrigin {
    /// Index into the generated dataset.
    pub index: usize,
    /// Mechanism that produced it; `None` for unexplained faults.
    pub mechanism: Option<usize>,
}

/// A generated dataset plus the ground truth behind its fault labels.
#[derive(Debug, Clone)]
pub struct Generated {
    pub dataset: Dataset,
    pub fault_provenance: Vec<FaultOrigin>,
}

impl Generated {
    pub fn unexplained_indices(&self) -> Vec<usize> {
        self.fault_provenance
            .iter()
            .filter(|f| f.mechanism.is_none())
            .map(|f| f.index)
            .collect()
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 is kept away from 0.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn truncated_normal(m: &Marginal, rng: &mut ChaCha8Rng) -> f64 {
    for _ in 0..1000 {
        let v = m.mean + m.sd * standard_normal(rng);
        if v >= m.lo && v <= m.hi {
            return v;
        }
    }
    // Bounds several sd wide make this unreachable in practice.
    m.mean.clamp(m.lo, m.hi)
}

fn draw_nonfault(marginals: &[Marginal; NUM_FEATURES], rng: &mut ChaCha8Rng) -> FeatureVec {
    let mut x = [0.0; NUM_FEATURES];
    for j in 0..NUM_FEATURES {
        x[j] = truncated_normal(&marginals[j], rng);
    }
    x
}

/// Generate the scenario. Deterministic: identical configs produce
/// identical datasets byte for byte.
pub fn generate(config: &ScenarioConfig) -> Result<Generated, SynthError> {
    let marginals = config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let n_unexplained = config.unexplained_count();
    let n_explained = config.n_fault - n_unexplained;

    // (features, label, mechanism)
    let mut rows: Vec<(FeatureVec, u8, Option<usize>)> =
        Vec::with_capacity(config.n_nonfault + config.n_fault);
    for _ in 0..config.n_nonfault {
        rows.push((draw_nonfault(&marginals, &mut rng), 0, None));
    }

    const MIN_ACCEPTANCE: f64 = 1e-4;
    let mut attempts: u64 = 0;
    let attempt_cap = 10_000u64.max(n_explained as u64 * 10_000);
    for _ in 0..n_explained {
        let mech_idx = if config.mechanisms.len() == 1 {
            0
        } else {
            rng.gen_range(0..config.mechanisms.len())
        };
        loop {
            attempts += 1;
            if attempts > attempt_cap {
                return Err(SynthError::InfeasibleRejection(MIN_ACCEPTANCE));
            }
            let candidate = draw_nonfault(&marginals, &mut rng);
            let p = config.mechanisms[mech_idx].fault_probability(&candidate, &marginals);
            if rng.gen::<f64>() < p {
                rows.push((candidate, 1, Some(mech_idx)));
                break;
            }
        }
    }
    for _ in 0..n_unexplained {
        rows.push((draw_nonfault(&marginals, &mut rng), 1, None));
    }

    if config.noise_sigma > 0.0 {
        for (x, _, _) in &mut rows {
            for j in 0..NUM_FEATURES {
                let m = &marginals[j];
                x[j] = (x[j] + config.noise_sigma * m.sd * standard_normal(&mut rng))
                    .clamp(m.lo, m.hi);
            }
        }
    }

    // Interleave classes in time rather than emitting them in blocks.
    rows.shuffle(&mut rng);
    let start = Timestamp::from_ymd_hm(2021, 2, 19, 0, 0).minutes();
    let mut samples = Vec::with_capacity(rows.len());
    let mut fault_provenance = Vec::new();
    for (i, (x, y, mech)) in rows.into_iter().enumerate() {
        if y == 1 {
            fault_provenance.push(FaultOrigin {
                index: i,
                mechanism: mech,
            });
        }
        samples.push(Sample::new(x, y, Timestamp::from_minutes(start + i as i64)));
    }
    Ok(Generated {
        dataset: Dataset::new(samples, FeatureSchema::standard()),
        fault_provenance,
    })
}

/// Per-mechanism driver ranking by |coefficient| (descending, ties in
/// schema order): the oracle attribution tests compare against.
pub fn ground_truth_drivers(config: &ScenarioConfig) -> Vec<Vec<usize>> {
    config
        .mechanisms
        .iter()
        .map(|m| {
            let mut ranked: Vec<(usize, f64)> = m
                .drivers
                .iter()
                .zip(&m.coefficients)
                .map(|(&d, &c)| (d, c.abs()))
                .collect();
            ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            ranked.into_iter().map(|(d, _)| d).collect()
        })
        .collect()
}
