//! Run manifests embedded in every output file, tying results back to
//! the exact inputs, seeds and parameters that produced them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Provenance record for one command invocation. Field values are fully
/// determined by the command line and input data (the time span is the
/// span of the data processed, not a wall clock), so identical runs
/// produce identical manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub artifact_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub params: BTreeMap<String, String>,
    /// First and last timestamp of the input data, when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_span: Option<[String; 2]>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            inputs: BTreeMap::new(),
            params: BTreeMap::new(),
            data_span: None,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn input(mut self, key: &str, value: impl ToString) -> Self {
        self.inputs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn span(mut self, ds: &gridfault::Dataset) -> Self {
        if let (Some(first), Some(last)) = (ds.samples().first(), ds.samples().last()) {
            self.data_span = Some([first.timestamp.to_string(), last.timestamp.to_string()]);
        }
        self
    }
}
