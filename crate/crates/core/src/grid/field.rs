use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::BaseGrid;
use crate::error::{Error, Result};
use crate::symplectic::SymmetricForm;

/// Level set {φ = 0} carrying a ridge covector field.
///
/// The plus side is φ > 0; across the fault the plate form jumps by ℓℓᵀ
/// from the minus side to the plus side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub id: usize,
    pub phi: Vec<f64>,
    /// n entries per sample.
    pub ell: Vec<f64>,
}

impl Fault {
    pub fn ell_at(&self, idx: usize, n: usize) -> &[f64] {
        &self.ell[idx * n..(idx + 1) * n]
    }

    pub fn plus(&self, idx: usize) -> bool {
        self.phi[idx] > 0.0
    }
}

/// Connected components of equal sign vectors, labelled in scan order.
pub fn label_plates(grid: &BaseGrid, faults: &[Fault]) -> Vec<usize> {
    let len = grid.len();
    let sign = |i: usize| faults.iter().map(move |f| f.plus(i));
    let same = |a: usize, b: usize| sign(a).eq(sign(b));
    let mut labels = vec![usize::MAX; len];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..len {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for j in grid.neighbors(i) {
                if labels[j] == usize::MAX && same(i, j) {
                    labels[j] = next;
                    queue.push_back(j);
                }
            }
        }
        next += 1;
    }
    labels
}

/// Plate forms sampled per grid sample, with the faults that separate plates.
#[derive(Clone, Debug, PartialEq)]
pub struct TectonicFieldGrid {
    pub grid: BaseGrid,
    n: usize,
    pub faults: Vec<Fault>,
    pub labels: Vec<usize>,
    /// Form of the sample's own plate.
    pub forms: Vec<SymmetricForm>,
}

impl TectonicFieldGrid {
    pub fn new(
        grid: BaseGrid,
        n: usize,
        faults: Vec<Fault>,
        forms: Vec<SymmetricForm>,
    ) -> Result<Self> {
        let labels = label_plates(&grid, &faults);
        Self::with_labels(grid, n, faults, labels, forms)
    }

    /// Keeps the supplied labels; `validate` reports disagreement with the faults.
    pub fn with_labels(
        grid: BaseGrid,
        n: usize,
        faults: Vec<Fault>,
        labels: Vec<usize>,
        forms: Vec<SymmetricForm>,
    ) -> Result<Self> {
        let len = grid.len();
        if forms.len() != len || labels.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                found: forms.len().min(labels.len()),
            });
        }
        if let Some(f) = forms.iter().find(|f| f.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: f.dim(),
            });
        }
        for f in &faults {
            if f.phi.len() != len || f.ell.len() != len * n {
                return Err(Error::Input(format!(
                    "fault {} has wrong sample count",
                    f.id
                )));
            }
        }
        Ok(TectonicFieldGrid {
            grid,
            n,
            faults,
            labels,
            forms,
        })
    }

    /// Single plate with a constant form.
    pub fn constant(grid: BaseGrid, form: SymmetricForm) -> Self {
        let len = grid.len();
        let n = form.dim();
        TectonicFieldGrid {
            grid,
            n,
            faults: Vec::new(),
            labels: vec![0; len],
            forms: vec![form; len],
        }
    }

    pub fn zero(grid: BaseGrid, n: usize) -> Self {
        Self::constant(grid, SymmetricForm::zeros(n))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn plate_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn plate_samples(&self, plate: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.labels[i] == plate)
            .collect()
    }

    pub fn relabel(&mut self) {
        self.labels = label_plates(&self.grid, &self.faults);
    }

    /// Faults whose sign differs between two samples.
    pub fn separating(&self, a: usize, b: usize) -> Vec<usize> {
        self.faults
            .iter()
            .enumerate()
            .filter(|(_, f)| f.plus(a) != f.plus(b))
            .map(|(k, _)| k)
            .collect()
    }

    /// Adds a form field to every sample.
    pub fn add_field(&mut self, delta: &[SymmetricForm]) {
        for (f, d) in self.forms.iter_mut().zip(delta) {
            *f = &*f + d;
        }
    }

    /// Largest spectral norm over the samples.
    pub fn sup_norm(&self) -> f64 {
        self.forms
            .iter()
            .map(SymmetricForm::spectral_norm)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Topology;

    #[test]
    fn labels_split_by_sign() {
        let g = BaseGrid::interval(-1.0, 1.0, 21).unwrap();
        let phi = g.sample(|x| x[0]);
        let f = Fault {
            id: 0,
            phi,
            ell: vec![1.0; 21],
        };
        let l = label_plates(&g, &[f]);
        assert_eq!(l[0], 0);
        assert_eq!(l[20], 1);
        assert_eq!(l[10], 0); // φ = 0 belongs to the minus side
    }

    #[test]
    fn periodic_wrap_joins_components() {
        let g = BaseGrid::circle(0.0, 1.0, 32).unwrap();
        // φ > 0 on (0.25, 0.75): minus side is one arc through the seam
        let phi = g.sample(|x| (0.25 - (x[0] - 0.5).abs()) * 4.0);
        let f = Fault {
            id: 0,
            phi,
            ell: vec![1.0; 32],
        };
        let l = label_plates(&g, &[f]);
        assert_eq!(l.iter().max(), Some(&1));
        assert_eq!(l[0], l[31]);
    }

    #[test]
    fn two_crossing_faults_give_four_plates() {
        let g = BaseGrid::square(Topology::Bounded, -1.0, 1.0, 16).unwrap();
        let a = Fault {
            id: 0,
            phi: g.sample(|x| x[0]),
            ell: vec![1.0; 2 * g.len()],
        };
        let b = Fault {
            id: 1,
            phi: g.sample(|x| x[1]),
            ell: vec![1.0; 2 * g.len()],
        };
        let l = label_plates(&g, &[a, b]);
        assert_eq!(l.iter().max(), Some(&3));
    }
}
