//! Run manifests: inputs, configuration and certificates of a run as
//! deterministic JSON. No timestamps or timings are recorded.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::TectonicFieldGrid;
use crate::transversalize::{BallRecord, StepCertificate};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub inputs: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub config: serde_json::Value,
    #[serde(default)]
    pub steps: Vec<StepCertificate>,
    #[serde(default)]
    pub balls: Vec<BallRecord>,
    pub faults: usize,
    pub plates: usize,
    pub surgeries: usize,
    /// Final min |det| over the certified region.
    pub certificate: f64,
    pub location: [f64; 2],
    pub certified: bool,
    pub c0_norm: f64,
    /// Loci of the last attempt when a run does not converge.
    #[serde(default)]
    pub loci: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub message: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: "tectonica".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            ..Default::default()
        }
    }

    pub fn input(mut self, key: &str, value: impl Serialize) -> Result<Self> {
        self.inputs.insert(key.into(), serde_json::to_value(value)?);
        Ok(self)
    }

    /// Records fault, plate and surgery counts of an output field.
    pub fn describe_field(&mut self, tf: &TectonicFieldGrid) {
        self.faults = tf.faults.len();
        self.plates = tf.plate_count();
        self.surgeries = self.steps.iter().map(|s| s.surgeries.len()).sum();
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{} {}{}: {}\n",
            self.tool,
            self.command,
            self.scenario
                .as_ref()
                .map(|s| format!(" ({s})"))
                .unwrap_or_default(),
            if self.certified {
                "certified"
            } else {
                "not certified"
            }
        );
        out += &format!(
            "  min |det| = {:.6e} at ({:.4}, {:.4})\n",
            self.certificate, self.location[0], self.location[1]
        );
        out += &format!(
            "  faults {}  plates {}  surgeries {}  steps {}  balls {}\n",
            self.faults,
            self.plates,
            self.surgeries,
            self.steps.len(),
            self.balls.len()
        );
        out += &format!("  sup norm of the added field {:.6e}\n", self.c0_norm);
        for (k, s) in self.steps.iter().enumerate() {
            out += &format!(
                "  step {k}: min |det| {:.6e}, eps {:?}, retries {}\n",
                s.min_abs_det, s.eps, s.retries
            );
        }
        if let Some(m) = &self.message {
            out += &format!("  {m}\n");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_exact() {
        let mut m = RunManifest::new("transversalize")
            .input("seed", 7u64)
            .unwrap();
        m.certificate = 0.1 + 0.2;
        m.location = [1.0 / 3.0, 0.0];
        let text = m.to_json().unwrap();
        let back = RunManifest::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json().unwrap(), text);
        assert!(m.summary().contains("not certified"));
    }
}
