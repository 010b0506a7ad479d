//! JSON field bundles.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BaseGrid, Fault, TectonicFieldGrid};
use crate::symplectic::{dim_from_packed, packed_len, SymmetricForm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub phi: Vec<f64>,
    pub ell: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlatesRecord {
    pub labels: Vec<usize>,
    /// n(n+1)/2 packed upper-triangular entries per sample.
    pub forms: Vec<f64>,
}

/// Serialized tectonic field; flat arrays are row-major over the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldBundle {
    pub grid: BaseGrid,
    pub faults: Vec<FaultRecord>,
    pub plates: PlatesRecord,
}

impl FieldBundle {
    pub fn from_field(tf: &TectonicFieldGrid) -> Self {
        FieldBundle {
            grid: tf.grid.clone(),
            faults: tf
                .faults
                .iter()
                .map(|f| FaultRecord {
                    phi: f.phi.clone(),
                    ell: f.ell.clone(),
                })
                .collect(),
            plates: PlatesRecord {
                labels: tf.labels.clone(),
                forms: tf.forms.iter().flat_map(|f| f.to_packed()).collect(),
            },
        }
    }

    pub fn into_field(self) -> Result<TectonicFieldGrid> {
        let len = self.grid.len();
        let per = self.plates.forms.len() / len.max(1);
        if per * len != self.plates.forms.len() {
            return Err(Error::Input(
                "form array length is not a multiple of the sample count".into(),
            ));
        }
        let n = dim_from_packed(per).filter(|&n| n > 0).ok_or_else(|| {
            Error::Input(format!(
                "{per} entries per sample is not a packed form size"
            ))
        })?;
        let forms = self
            .plates
            .forms
            .chunks(packed_len(n))
            .map(|c| SymmetricForm::from_packed(n, c))
            .collect::<Result<Vec<_>>>()?;
        let faults = self
            .faults
            .into_iter()
            .enumerate()
            .map(|(id, f)| Fault {
                id,
                phi: f.phi,
                ell: f.ell,
            })
            .collect();
        TectonicFieldGrid::with_labels(self.grid, n, faults, self.plates.labels, forms)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_exact_round_trip() {
        let g = BaseGrid::interval(-1.0, 1.0, 40).unwrap();
        let phi = g.sample(|x| x[0] * std::f64::consts::PI - 0.1);
        let forms: Vec<SymmetricForm> = g.sample(|x| {
            SymmetricForm::from_rows(&[vec![x[0].sin(), 1.0 / 3.0], vec![1.0 / 3.0, x[0].exp()]])
                .unwrap()
        });
        let ell = phi.iter().flat_map(|p| [p.cos(), 0.1 * p]).collect();
        let tf = TectonicFieldGrid::new(g, 2, vec![Fault { id: 0, phi, ell }], forms).unwrap();
        let text = FieldBundle::from_field(&tf).to_json().unwrap();
        let back: FieldBundle = serde_json::from_str(&text).unwrap();
        let tf2 = back.into_field().unwrap();
        assert_eq!(tf, tf2);
        for (a, b) in tf.forms.iter().zip(&tf2.forms) {
            for (x, y) in a.to_packed().iter().zip(b.to_packed()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn rejects_bad_form_count() {
        let g = BaseGrid::interval(0.0, 1.0, 16).unwrap();
        let b = FieldBundle {
            grid: g,
            faults: vec![],
            plates: PlatesRecord {
                labels: vec![0; 16],
                forms: vec![0.0; 32],
            },
        };
        assert!(b.into_field().is_err());
    }
}
