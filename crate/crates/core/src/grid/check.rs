use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{label_plates, TectonicFieldGrid};
use crate::symplectic::{numerical_rank, SymmetricForm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    JumpCondition,
    Gradient,
    VanishingCovector,
    RidgeDependence,
    PlateLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub fault: Option<usize>,
    pub sample: usize,
    pub magnitude: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub max_jump_defect: f64,
    pub checked_crossings: usize,
    pub unchecked_crossings: usize,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    pub tol_jump: f64,
    /// Defaults to 1e-3/h.
    pub grad_min: Option<f64>,
    pub ell_min: f64,
    pub cond_max: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            tol_jump: 1e-6,
            grad_min: None,
            ell_min: 1e-6,
            cond_max: 1e6,
        }
    }
}

/// Crossing parameter t ∈ [0,1] of {φ = 0} on the segment from a to b.
fn crossing(pa: f64, pb: f64) -> f64 {
    let d = pa - pb;
    if d == 0.0 {
        0.5
    } else {
        (pa / d).clamp(0.0, 1.0)
    }
}

/// Extrapolation of a plate form to distance `d` (in cells) beyond `x`, from
/// the same-plate samples one and two cells further back: quadratic when
/// `x3` is available, linear otherwise.
fn extrapolate(
    tf: &TectonicFieldGrid,
    x: usize,
    x2: usize,
    x3: Option<usize>,
    d: f64,
) -> SymmetricForm {
    match x3 {
        Some(x3) => {
            let w0 = (d + 1.0) * (d + 2.0) / 2.0;
            let w1 = -d * (d + 2.0);
            let w2 = d * (d + 1.0) / 2.0;
            &(&(&tf.forms[x] * w0) + &(&tf.forms[x2] * w1)) + &(&tf.forms[x3] * w2)
        }
        None => {
            let slope = &tf.forms[x] - &tf.forms[x2];
            &tf.forms[x] + &(&slope * d)
        }
    }
}

pub fn validate(tf: &TectonicFieldGrid, opts: &ValidateOptions) -> ValidationReport {
    let grid = &tf.grid;
    let n = tf.n();
    let grad_min = opts.grad_min.unwrap_or(1e-3 / grid.h());
    let mut rep = ValidationReport::default();

    let expect = label_plates(grid, &tf.faults);
    if !same_partition(&expect, &tf.labels) {
        for i in 0..tf.len() {
            if expect[i] != expect[0] && tf.labels[i] == tf.labels[0]
                || expect[i] == expect[0] && tf.labels[i] != tf.labels[0]
            {
                rep.violations.push(Violation {
                    kind: ViolationKind::PlateLabel,
                    fault: None,
                    sample: i,
                    magnitude: 1.0,
                });
                break;
            }
        }
        if rep.violations.is_empty() {
            rep.violations.push(Violation {
                kind: ViolationKind::PlateLabel,
                fault: None,
                sample: 0,
                magnitude: 1.0,
            });
        }
    }

    let mut grad_flagged = vec![false; tf.len()];
    for (a, b, axis) in grid.edges() {
        let sep = tf.separating(a, b);
        if sep.is_empty() {
            continue;
        }
        for &k in &sep {
            let f = &tf.faults[k];
            for x in [a, b] {
                if grad_flagged[x] {
                    continue;
                }
                let g = grid.gradient(&f.phi, x);
                let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
                if norm < grad_min {
                    grad_flagged[x] = true;
                    rep.violations.push(Violation {
                        kind: ViolationKind::Gradient,
                        fault: Some(k),
                        sample: x,
                        magnitude: norm,
                    });
                }
            }
        }
        if sep.len() != 1 {
            rep.unchecked_crossings += 1;
            continue;
        }
        let k = sep[0];
        let f = &tf.faults[k];
        let t = crossing(f.phi[a], f.phi[b]);
        let ell: Vec<f64> = (0..n)
            .map(|i| (1.0 - t) * f.ell_at(a, n)[i] + t * f.ell_at(b, n)[i])
            .collect();
        let ell_norm = ell.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ell_norm < opts.ell_min {
            rep.violations.push(Violation {
                kind: ViolationKind::VanishingCovector,
                fault: Some(k),
                sample: a,
                magnitude: ell_norm,
            });
        }
        let (plus, minus, dp, dm) = if f.plus(b) {
            (b, a, 1.0 - t, t)
        } else {
            (a, b, t, 1.0 - t)
        };
        let dir_plus = if plus == b { 1 } else { -1 };
        let plus2 = grid.step(plus, axis, dir_plus);
        let minus2 = grid.step(minus, axis, -dir_plus);
        let (Some(plus2), Some(minus2)) = (plus2, minus2) else {
            rep.unchecked_crossings += 1;
            continue;
        };
        if tf.labels[plus2] != tf.labels[plus] || tf.labels[minus2] != tf.labels[minus] {
            rep.unchecked_crossings += 1;
            continue;
        }
        let third = |x2: usize, dir: isize| {
            grid.step(x2, axis, dir)
                .filter(|&x3| tf.labels[x3] == tf.labels[x2])
        };
        let lp = extrapolate(tf, plus, plus2, third(plus2, dir_plus), dp);
        let lm = extrapolate(tf, minus, minus2, third(minus2, -dir_plus), dm);
        let jump = &lp - &lm;
        let defect = (&jump - &SymmetricForm::outer(1.0, &ell)).max_abs();
        rep.checked_crossings += 1;
        rep.max_jump_defect = rep.max_jump_defect.max(defect);
        if defect > opts.tol_jump {
            rep.violations.push(Violation {
                kind: ViolationKind::JumpCondition,
                fault: Some(k),
                sample: minus,
                magnitude: defect,
            });
        }
    }

    for cell in grid.cells() {
        let crossing: Vec<usize> = (0..tf.faults.len())
            .filter(|&k| {
                let f = &tf.faults[k];
                let s = f.plus(cell[0]);
                cell.iter().any(|&c| f.plus(c) != s)
            })
            .collect();
        if crossing.len() < 2 {
            continue;
        }
        let rows = crossing.len();
        let m = nalgebra::DMatrix::from_fn(rows, n, |r, i| {
            let f = &tf.faults[crossing[r]];
            cell.iter().map(|&c| f.ell_at(c, n)[i]).sum::<f64>() / 4.0
        });
        let cond = if rows > n || numerical_rank(&m) < rows {
            f64::INFINITY
        } else {
            let sv = m.svd(false, false).singular_values;
            let hi = sv.iter().cloned().fold(0.0, f64::max);
            let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            hi / lo
        };
        if cond > opts.cond_max {
            rep.violations.push(Violation {
                kind: ViolationKind::RidgeDependence,
                fault: Some(crossing[0]),
                sample: cell[0],
                magnitude: cond,
            });
        }
    }
    rep
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let m = a.iter().max().map_or(0, |v| v + 1);
    let mut map = vec![usize::MAX; m];
    let mut used = std::collections::HashSet::new();
    for (&x, &y) in a.iter().zip(b) {
        if map[x] == usize::MAX {
            if !used.insert(y) {
                return false;
            }
            map[x] = y;
        } else if map[x] != y {
            return false;
        }
    }
    true
}

/// det(g − λ) on one plate, extended one cell beyond it by constant extrapolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateScalarField {
    pub plate: usize,
    pub samples: Vec<usize>,
    pub values: Vec<f64>,
}

pub fn det_field(tf: &TectonicFieldGrid, g: &[SymmetricForm]) -> Vec<PlateScalarField> {
    let mut out: Vec<PlateScalarField> = (0..tf.plate_count())
        .map(|plate| PlateScalarField {
            plate,
            samples: Vec::new(),
            values: Vec::new(),
        })
        .collect();
    for i in 0..tf.len() {
        let p = tf.labels[i];
        out[p].samples.push(i);
        out[p].values.push((&g[i] - &tf.forms[i]).det());
        let mut seen = vec![p];
        for j in tf.grid.neighbors(i) {
            let q = tf.labels[j];
            if !seen.contains(&q) {
                seen.push(q);
                out[q].samples.push(i);
                out[q].values.push((&g[i] - &tf.forms[j]).det());
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetMinimum {
    pub value: f64,
    /// Sample nearest to the minimizing location.
    pub sample: usize,
    pub point: [f64; 2],
}

fn lerp_form(a: &SymmetricForm, b: &SymmetricForm, t: f64) -> SymmetricForm {
    &(a * (1.0 - t)) + &(b * t)
}

/// Minimum of |det(g − λ)| over samples, grid edges and, in 2D, cells
/// touching three or more plates.
///
/// On a plate-crossing edge g is interpolated to the crossing and compared
/// with both one-sided forms; an edge inside one plate along which the
/// determinant changes sign counts as a zero. At a cell touching three or
/// more plates g at the cell centre is compared with every corner form.
pub fn min_abs_det(tf: &TectonicFieldGrid, g: &[SymmetricForm]) -> DetMinimum {
    min_abs_det_masked(tf, g, None)
}

/// As [`min_abs_det`], restricted to samples, edges and cells touching the mask.
pub fn min_abs_det_masked(
    tf: &TectonicFieldGrid,
    g: &[SymmetricForm],
    mask: Option<&[bool]>,
) -> DetMinimum {
    let grid = &tf.grid;
    let on = |i: usize| mask.map_or(true, |m| m[i]);
    let best = |a: DetMinimum, b: DetMinimum| {
        if b.value < a.value || (b.value == a.value && b.sample < a.sample) {
            b
        } else {
            a
        }
    };
    let empty = DetMinimum {
        value: f64::INFINITY,
        sample: 0,
        point: [0.0; 2],
    };
    let dets: Vec<f64> = (0..tf.len())
        .into_par_iter()
        .map(|i| (&g[i] - &tf.forms[i]).det())
        .collect();
    let at_samples = (0..tf.len())
        .into_par_iter()
        .filter(|&i| on(i))
        .map(|i| DetMinimum {
            value: dets[i].abs(),
            sample: i,
            point: grid.coords(i),
        })
        .reduce(|| empty, best);

    let edges = grid.edges();
    let at_edges = edges
        .par_iter()
        .filter(|(a, b, _)| on(*a) || on(*b))
        .filter_map(|&(a, b, _)| {
            let xa = grid.coords(a);
            let d = grid.displacement(xa, grid.coords(b));
            let at = |t: f64| grid.wrap([xa[0] + t * d[0], xa[1] + t * d[1]]);
            if tf.labels[a] == tf.labels[b] {
                let (da, db) = (dets[a], dets[b]);
                if (da > 0.0) == (db > 0.0) || da == 0.0 || db == 0.0 {
                    return None;
                }
                let t = crossing(da, db);
                return Some(DetMinimum {
                    value: 0.0,
                    sample: if t <= 0.5 { a } else { b },
                    point: at(t),
                });
            }
            let sep = tf.separating(a, b);
            let t = if sep.is_empty() {
                0.5
            } else {
                sep.iter()
                    .map(|&k| crossing(tf.faults[k].phi[a], tf.faults[k].phi[b]))
                    .sum::<f64>()
                    / sep.len() as f64
            };
            let gx = lerp_form(&g[a], &g[b], t);
            let v = (&gx - &tf.forms[a])
                .det()
                .abs()
                .min((&gx - &tf.forms[b]).det().abs());
            Some(DetMinimum {
                value: v,
                sample: if t <= 0.5 { a } else { b },
                point: at(t),
            })
        })
        .reduce(|| empty, best);

    let cells = grid.cells();
    let at_cells = cells
        .par_iter()
        .filter(|c| c.iter().any(|&i| on(i)))
        .filter(|c| {
            let mut l: Vec<usize> = c.iter().map(|&i| tf.labels[i]).collect();
            l.sort_unstable();
            l.dedup();
            l.len() >= 3
        })
        .map(|c| {
            let gx = c.iter().fold(SymmetricForm::zeros(tf.n()), |acc, &i| {
                &acc + &(&g[i] * 0.25)
            });
            let v = c
                .iter()
                .map(|&i| (&gx - &tf.forms[i]).det().abs())
                .fold(f64::INFINITY, f64::min);
            let x0 = grid.coords(c[0]);
            DetMinimum {
                value: v,
                sample: c[0],
                point: grid.wrap([x0[0] + 0.5 * grid.spacing(0), x0[1] + 0.5 * grid.spacing(1)]),
            }
        })
        .reduce(|| empty, best);

    best(best(at_samples, at_edges), at_cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BaseGrid, Fault};

    fn two_plates(jump: f64) -> TectonicFieldGrid {
        let g = BaseGrid::interval(-1.0, 1.0, 32).unwrap();
        let phi = g.sample(|x| x[0]);
        let forms = phi
            .iter()
            .map(|&p| SymmetricForm::diag(&[if p > 0.0 { jump } else { 0.0 }]))
            .collect();
        let f = Fault {
            id: 0,
            phi,
            ell: vec![1.0; 32],
        };
        TectonicFieldGrid::new(g, 1, vec![f], forms).unwrap()
    }

    #[test]
    fn single_plate_is_valid() {
        let g = BaseGrid::interval(0.0, 1.0, 20).unwrap();
        let tf = TectonicFieldGrid::constant(g, SymmetricForm::identity(2));
        assert!(validate(&tf, &ValidateOptions::default()).is_empty());
    }

    #[test]
    fn unit_jump_is_valid() {
        let rep = validate(&two_plates(1.0), &ValidateOptions::default());
        assert!(rep.is_empty(), "{rep:?}");
        assert_eq!(rep.checked_crossings, 1);
    }

    #[test]
    fn wrong_jump_reports_defect() {
        let rep = validate(&two_plates(2.0), &ValidateOptions::default());
        assert_eq!(rep.violations.len(), 1);
        let v = &rep.violations[0];
        assert_eq!(v.kind, ViolationKind::JumpCondition);
        assert!((v.magnitude - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bad_labels_reported() {
        let mut tf = two_plates(1.0);
        tf.labels = vec![0; 32];
        let rep = validate(&tf, &ValidateOptions::default());
        assert!(rep
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::PlateLabel));
    }

    #[test]
    fn det_field_examples() {
        let g = BaseGrid::interval(0.0, 1.0, 16).unwrap();
        let tf = TectonicFieldGrid::constant(g.clone(), SymmetricForm::identity(2));
        let gf = vec![SymmetricForm::diag(&[2.0, 3.0]); 16];
        let d = det_field(&tf, &gf);
        assert_eq!(d.len(), 1);
        assert!(d[0].values.iter().all(|v| *v == 2.0));
        let same = det_field(&tf, &tf.forms);
        assert!(same[0].values.iter().all(|v| *v == 0.0));
        let tf1 = TectonicFieldGrid::zero(g, 1);
        let d = det_field(&tf1, &vec![SymmetricForm::identity(1); 16]);
        assert!(d[0].values.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn min_det_constant_margin() {
        let g = BaseGrid::interval(0.0, 1.0, 16).unwrap();
        let tf = TectonicFieldGrid::zero(g, 2);
        let gf = vec![SymmetricForm::diag(&[0.5, 0.25]); 16];
        assert_eq!(min_abs_det(&tf, &gf).value, 0.125);
        assert_eq!(min_abs_det(&tf, &tf.forms).value, 0.0);
    }

    #[test]
    fn min_det_sees_one_sided_forms() {
        // g = 1 + x/2 equals the plus form exactly at the crossing, between samples
        let tf = two_plates(1.0);
        let gf: Vec<SymmetricForm> = tf.grid.sample(|x| SymmetricForm::diag(&[1.0 + 0.5 * x[0]]));
        let sample_min = (0..32)
            .map(|i| (&gf[i] - &tf.forms[i]).det().abs())
            .fold(f64::INFINITY, f64::min);
        assert!(sample_min > 0.01);
        let m = min_abs_det(&tf, &gf);
        assert!(m.value < 1e-12);
        assert!(m.point[0].abs() < 1e-12);
    }

    #[test]
    fn min_det_sees_sign_change_inside_plate() {
        let g = BaseGrid::interval(-1.0, 1.0, 32).unwrap();
        let tf = TectonicFieldGrid::zero(g, 1);
        let gf: Vec<SymmetricForm> = tf.grid.sample(|x| SymmetricForm::diag(&[x[0]]));
        let m = min_abs_det(&tf, &gf);
        assert_eq!(m.value, 0.0);
        assert!(m.point[0].abs() < 1e-12);
        let mask: Vec<bool> = tf.grid.sample(|x| x[0] > 0.5);
        assert!(min_abs_det_masked(&tf, &gf, Some(&mask)).value > 0.5);
    }
}
