//! Uniform base grids, tectonic fields sampled on them, and their checks.

mod check;
mod cutoff;
mod field;
mod stencil;

pub use check::{
    det_field, min_abs_det, min_abs_det_masked, validate, DetMinimum, PlateScalarField,
    ValidateOptions, ValidationReport, Violation, ViolationKind,
};
pub(crate) use cutoff::jump_profile_unchecked;
pub use cutoff::{jump_profile, smoothstep, CutoffKind, CutoffProfile};
pub use field::{label_plates, Fault, TectonicFieldGrid};
pub use stencil::{candidates, fd_weights, gradient_fine};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Periodic,
    Bounded,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    dim: usize,
    topology: Vec<Topology>,
    extent: Vec<[f64; 2]>,
    resolution: Vec<usize>,
}

/// Uniform 1D or 2D sample grid. Flat indices are row-major, axis 0 slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct BaseGrid {
    topology: Vec<Topology>,
    extent: Vec<[f64; 2]>,
    resolution: Vec<usize>,
}

impl TryFrom<GridSpec> for BaseGrid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        if s.topology.len() != s.dim {
            return Err(Error::DimensionMismatch {
                expected: s.dim,
                found: s.topology.len(),
            });
        }
        BaseGrid::new(s.topology, s.extent, s.resolution)
    }
}

impl From<BaseGrid> for GridSpec {
    fn from(g: BaseGrid) -> Self {
        GridSpec {
            dim: g.dim(),
            topology: g.topology,
            extent: g.extent,
            resolution: g.resolution,
        }
    }
}

impl BaseGrid {
    pub fn new(
        topology: Vec<Topology>,
        extent: Vec<[f64; 2]>,
        resolution: Vec<usize>,
    ) -> Result<Self> {
        let d = topology.len();
        if d == 0 || d > 2 {
            return Err(Error::Input(format!("grid dimension {d} is not 1 or 2")));
        }
        if extent.len() != d || resolution.len() != d {
            return Err(Error::Input("grid axes disagree in length".into()));
        }
        for (e, &r) in extent.iter().zip(&resolution) {
            if !(e[0].is_finite() && e[1].is_finite() && e[1] > e[0]) {
                return Err(Error::Input(format!("bad extent [{}, {}]", e[0], e[1])));
            }
            if r < 16 {
                return Err(Error::Input(format!("resolution {r} is below 16")));
            }
        }
        Ok(BaseGrid {
            topology,
            extent,
            resolution,
        })
    }

    pub fn interval(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new(vec![Topology::Bounded], vec![[a, b]], vec![n])
    }

    pub fn circle(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new(vec![Topology::Periodic], vec![[a, b]], vec![n])
    }

    pub fn square(topology: Topology, a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new(vec![topology; 2], vec![[a, b]; 2], vec![n; 2])
    }

    pub fn dim(&self) -> usize {
        self.topology.len()
    }

    pub fn topology(&self) -> &[Topology] {
        &self.topology
    }

    pub fn extent(&self) -> &[[f64; 2]] {
        &self.extent
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn periodic(&self, axis: usize) -> bool {
        self.topology[axis] == Topology::Periodic
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let [a, b] = self.extent[axis];
        let n = self.resolution[axis];
        match self.topology[axis] {
            Topology::Periodic => (b - a) / n as f64,
            Topology::Bounded => (b - a) / (n - 1) as f64,
        }
    }

    /// Largest spacing over the axes.
    pub fn h(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn period(&self, axis: usize) -> Option<f64> {
        self.periodic(axis)
            .then(|| self.extent[axis][1] - self.extent[axis][0])
    }

    pub fn multi(&self, idx: usize) -> [usize; 2] {
        if self.dim() == 1 {
            [idx, 0]
        } else {
            let n1 = self.resolution[1];
            [idx / n1, idx % n1]
        }
    }

    pub fn index(&self, i: [usize; 2]) -> usize {
        if self.dim() == 1 {
            i[0]
        } else {
            i[0] * self.resolution[1] + i[1]
        }
    }

    /// Physical coordinates; the second entry is 0 on 1D grids.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let m = self.multi(idx);
        let mut x = [0.0; 2];
        for (a, xa) in x.iter_mut().enumerate().take(self.dim()) {
            *xa = self.extent[a][0] + m[a] as f64 * self.spacing(a);
        }
        x
    }

    /// Neighbour one step along `axis` in direction `dir` (±1).
    pub fn step(&self, idx: usize, axis: usize, dir: isize) -> Option<usize> {
        let mut m = self.multi(idx);
        let n = self.resolution[axis] as isize;
        let j = m[axis] as isize + dir;
        let j = if j < 0 || j >= n {
            if self.periodic(axis) {
                j.rem_euclid(n)
            } else {
                return None;
            }
        } else {
            j
        };
        m[axis] = j as usize;
        Some(self.index(m))
    }

    /// Offset neighbour (d0, d1), honouring wrap.
    pub fn offset(&self, idx: usize, d: [isize; 2]) -> Option<usize> {
        let mut i = idx;
        for a in 0..self.dim() {
            if d[a] != 0 {
                let s = d[a].signum();
                for _ in 0..d[a].abs() {
                    i = self.step(i, a, s)?;
                }
            }
        }
        Some(i)
    }

    /// Axis-aligned neighbours.
    pub fn neighbors(&self, idx: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(4);
        for a in 0..self.dim() {
            for d in [-1, 1] {
                if let Some(j) = self.step(idx, a, d) {
                    if j != idx && !out.contains(&j) {
                        out.push(j);
                    }
                }
            }
        }
        out
    }

    /// Axis-aligned and diagonal neighbours.
    pub fn neighbors8(&self, idx: usize) -> Vec<usize> {
        if self.dim() == 1 {
            return self.neighbors(idx);
        }
        let mut out = Vec::with_capacity(8);
        for d0 in -1..=1 {
            for d1 in -1..=1 {
                if d0 == 0 && d1 == 0 {
                    continue;
                }
                if let Some(j) = self.offset(idx, [d0, d1]) {
                    if j != idx && !out.contains(&j) {
                        out.push(j);
                    }
                }
            }
        }
        out
    }

    /// Forward edges (a, b, axis) with b = a + e_axis.
    pub fn edges(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for idx in 0..self.len() {
            for a in 0..self.dim() {
                let m = self.multi(idx);
                if !self.periodic(a) && m[a] + 1 >= self.resolution[a] {
                    continue;
                }
                if let Some(b) = self.step(idx, a, 1) {
                    out.push((idx, b, a));
                }
            }
        }
        out
    }

    /// Cells of a 2D grid as corner quadruples [i, i+e0, i+e0+e1, i+e1].
    pub fn cells(&self) -> Vec<[usize; 4]> {
        if self.dim() != 2 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for idx in 0..self.len() {
            let m = self.multi(idx);
            if (!self.periodic(0) && m[0] + 1 >= self.resolution[0])
                || (!self.periodic(1) && m[1] + 1 >= self.resolution[1])
            {
                continue;
            }
            let a = self.step(idx, 0, 1).expect("inside");
            let b = self.step(a, 1, 1).expect("inside");
            let c = self.step(idx, 1, 1).expect("inside");
            out.push([idx, a, b, c]);
        }
        out
    }

    /// b − a reduced to the nearest periodic image.
    pub fn displacement(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let mut d = [b[0] - a[0], b[1] - a[1]];
        for (ax, da) in d.iter_mut().enumerate().take(self.dim()) {
            if let Some(p) = self.period(ax) {
                *da -= p * (*da / p).round();
            }
        }
        d
    }

    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = self.displacement(a, b);
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }

    /// Wraps periodic coordinates into the extent.
    pub fn wrap(&self, mut x: [f64; 2]) -> [f64; 2] {
        for (ax, xa) in x.iter_mut().enumerate().take(self.dim()) {
            if let Some(p) = self.period(ax) {
                let a = self.extent[ax][0];
                *xa = a + (*xa - a).rem_euclid(p);
            }
        }
        x
    }

    /// Fractional grid coordinates of a physical point.
    pub fn to_grid(&self, x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (a, ga) in g.iter_mut().enumerate().take(self.dim()) {
            *ga = (x[a] - self.extent[a][0]) / self.spacing(a);
        }
        g
    }

    /// Central-difference gradient of a sampled scalar, one-sided at borders.
    pub fn gradient(&self, f: &[f64], idx: usize) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (a, ga) in g.iter_mut().enumerate().take(self.dim()) {
            let h = self.spacing(a);
            *ga = match (self.step(idx, a, -1), self.step(idx, a, 1)) {
                (Some(m), Some(p)) => (f[p] - f[m]) / (2.0 * h),
                (None, Some(p)) => (f[p] - f[idx]) / h,
                (Some(m), None) => (f[idx] - f[m]) / h,
                (None, None) => 0.0,
            };
        }
        g
    }

    /// Samples a closure of the physical coordinates.
    pub fn sample<T>(&self, f: impl Fn([f64; 2]) -> T) -> Vec<T> {
        (0..self.len()).map(|i| f(self.coords(i))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_by_topology() {
        let g = BaseGrid::interval(-1.0, 1.0, 17).unwrap();
        assert_eq!(g.spacing(0), 0.125);
        assert_eq!(g.coords(16)[0], 1.0);
        let c = BaseGrid::circle(0.0, 1.0, 16).unwrap();
        assert_eq!(c.spacing(0), 1.0 / 16.0);
        assert_eq!(c.step(15, 0, 1), Some(0));
        assert_eq!(g.step(16, 0, 1), None);
    }

    #[test]
    fn rejects_coarse_grid() {
        assert!(BaseGrid::interval(0.0, 1.0, 8).is_err());
        assert!(BaseGrid::interval(1.0, 0.0, 32).is_err());
    }

    #[test]
    fn row_major_2d() {
        let g = BaseGrid::new(
            vec![Topology::Bounded, Topology::Periodic],
            vec![[0.0, 1.0], [0.0, 2.0]],
            vec![16, 20],
        )
        .unwrap();
        assert_eq!(g.index([3, 5]), 65);
        assert_eq!(g.multi(65), [3, 5]);
        assert_eq!(g.step(g.index([3, 19]), 1, 1), Some(g.index([3, 0])));
        assert_eq!(g.cells().len(), 15 * 20);
        assert_eq!(g.edges().len(), 15 * 20 + 16 * 20);
        let d = g.displacement([0.5, 1.9], [0.5, 0.1]);
        assert!((d[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn json_shape() {
        let g = BaseGrid::circle(0.0, 1.0, 32).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(
            s,
            r#"{"dim":1,"topology":["periodic"],"extent":[[0.0,1.0]],"resolution":[32]}"#
        );
        let back: BaseGrid = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }
}
