use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::grid::BaseGrid;

/// Traced piece of a zero set.
///
/// Points are physical coordinates, unwrapped along the curve on periodic
/// axes. 2D curves are oriented with the positive side on the left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCurve {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
    /// Unit normals toward increasing values, one per point.
    pub normals: Vec<[f64; 2]>,
    /// Set when the sampled gradient is too small to resolve the crossing.
    #[serde(default)]
    pub degenerate: bool,
}

impl LevelCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Consecutive point pairs, including the closing one.
    pub fn segments(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Grid edge carrying a crossing: (lower sample, upper sample, axis).
pub(crate) type EdgeKey = (usize, usize, usize);

fn edge_key(a: usize, b: usize, axis: usize) -> EdgeKey {
    (a.min(b), a.max(b), axis)
}

/// A traced curve with bookkeeping for surgery.
#[derive(Clone, Debug)]
pub(crate) struct Traced {
    pub curve: LevelCurve,
    /// Corner-0 sample of the cell holding each segment.
    pub cells: Vec<usize>,
    /// Edge holding each point; `None` for points added by surgery.
    pub edges: Vec<Option<EdgeKey>>,
}

impl Traced {
    pub fn first_edge(&self) -> Option<EdgeKey> {
        self.edges.first().copied().flatten()
    }

    pub fn last_edge(&self) -> Option<EdgeKey> {
        self.edges.last().copied().flatten()
    }
}

/// Gradient below which a crossing counts as unresolved.
pub(crate) const DEGENERATE_GRADIENT: f64 = 1e-3;

/// Kept strictly inside the edge so that a zero sample never puts a curve
/// point on a grid vertex.
fn crossing_t(va: f64, vb: f64) -> f64 {
    const INSET: f64 = 1e-6;
    let d = va - vb;
    if d == 0.0 {
        0.5
    } else {
        (va / d).clamp(INSET, 1.0 - INSET)
    }
}

fn edge_point(grid: &BaseGrid, a: usize, axis: usize, t: f64) -> [f64; 2] {
    let mut x = grid.coords(a);
    x[axis] += t * grid.spacing(axis);
    x
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    if n == 0.0 {
        [0.0, 0.0]
    } else {
        [v[0] / n, v[1] / n]
    }
}

/// Zero crossings of a 1D sample field; each crossing is a one-point curve.
pub(crate) fn trace_1d(
    grid: &BaseGrid,
    values: &[f64],
    skip_edge: &dyn Fn(usize, usize) -> bool,
) -> Vec<Traced> {
    let h = grid.spacing(0);
    let mut out = Vec::new();
    for (a, b, axis) in grid.edges() {
        let (va, vb) = (values[a], values[b]);
        if (va > 0.0) == (vb > 0.0) || skip_edge(a, b) {
            continue;
        }
        let t = crossing_t(va, vb);
        let normal = if vb > va { [1.0, 0.0] } else { [-1.0, 0.0] };
        out.push(Traced {
            curve: LevelCurve {
                points: vec![edge_point(grid, a, axis, t)],
                closed: false,
                normals: vec![normal],
                degenerate: ((vb - va) / h).abs() < DEGENERATE_GRADIENT,
            },
            cells: vec![a],
            edges: vec![Some(edge_key(a, b, axis))],
        });
    }
    out
}

struct Segment {
    cell: usize,
    from: (EdgeKey, [f64; 2]),
    to: (EdgeKey, [f64; 2]),
    degenerate: bool,
}

/// Marching squares over the cells of a 2D grid, skipping cells for which
/// `skip_cell` holds. Saddles are resolved by the mean of the four corners.
pub(crate) fn trace_2d(
    grid: &BaseGrid,
    values: &[f64],
    skip_cell: &dyn Fn(&[usize; 4]) -> bool,
) -> Vec<Traced> {
    let (h0, h1) = (grid.spacing(0), grid.spacing(1));
    let mut segs: Vec<Segment> = Vec::new();
    for cell in grid.cells() {
        let v = cell.map(|i| values[i]);
        let pos = v.map(|x| x > 0.0);
        if pos.iter().all(|&p| p) || pos.iter().all(|&p| !p) || skip_cell(&cell) {
            continue;
        }
        let x0 = grid.coords(cell[0]);
        // Corner offsets in CCW order, and each edge's (start corner, end corner, axis).
        let local = [[0.0, 0.0], [h0, 0.0], [h0, h1], [0.0, h1]];
        let mut exits = Vec::new();
        let mut entries = Vec::new();
        for k in 0..4 {
            let (c0, c1) = (k, (k + 1) % 4);
            if pos[c0] == pos[c1] {
                continue;
            }
            let t = crossing_t(v[c0], v[c1]);
            let p = [
                x0[0] + local[c0][0] + t * (local[c1][0] - local[c0][0]),
                x0[1] + local[c0][1] + t * (local[c1][1] - local[c0][1]),
            ];
            let axis = if k % 2 == 0 { 0 } else { 1 };
            let key = edge_key(cell[c0], cell[c1], axis);
            if pos[c0] {
                exits.push((k, key, p));
            } else {
                entries.push((k, key, p));
            }
        }
        let gx = ((v[1] - v[0]) + (v[2] - v[3])) / (2.0 * h0);
        let gy = ((v[3] - v[0]) + (v[2] - v[1])) / (2.0 * h1);
        let degenerate = gx.hypot(gy) < DEGENERATE_GRADIENT;
        let center_pos = v.iter().sum::<f64>() / 4.0 > 0.0;
        for &(k, key, p) in &exits {
            // Next entry edge counter-clockwise when the centre is positive,
            // previous one otherwise.
            let pick = entries
                .iter()
                .min_by_key(|(ke, _, _)| {
                    if center_pos {
                        (ke + 4 - k) % 4
                    } else {
                        (k + 4 - ke) % 4
                    }
                })
                .expect("crossings come in pairs");
            segs.push(Segment {
                cell: cell[0],
                from: (key, p),
                to: (pick.1, pick.2),
                degenerate,
            });
        }
    }
    stitch(grid, segs)
}

fn stitch(grid: &BaseGrid, segs: Vec<Segment>) -> Vec<Traced> {
    let mut by_start: HashMap<EdgeKey, usize> = HashMap::new();
    let mut has_pred = vec![false; segs.len()];
    for (i, s) in segs.iter().enumerate() {
        by_start.insert(s.from.0, i);
    }
    for s in &segs {
        if let Some(&j) = by_start.get(&s.to.0) {
            has_pred[j] = true;
        }
    }
    let mut used = vec![false; segs.len()];
    let mut out = Vec::new();
    let walk = |start: usize, used: &mut Vec<bool>| {
        let mut points = vec![segs[start].from.1];
        let mut edges = vec![Some(segs[start].from.0)];
        let mut cells = Vec::new();
        let mut degenerate = false;
        let mut i = start;
        let mut closed = false;
        loop {
            used[i] = true;
            let s = &segs[i];
            let prev = *points.last().expect("nonempty");
            let d = grid.displacement(prev, s.to.1);
            points.push([prev[0] + d[0], prev[1] + d[1]]);
            edges.push(Some(s.to.0));
            cells.push(s.cell);
            degenerate |= s.degenerate;
            match by_start.get(&s.to.0) {
                Some(&j) if j == start => {
                    closed = true;
                    break;
                }
                Some(&j) if !used[j] => i = j,
                _ => break,
            }
        }
        let normals = normals_left(&points, closed);
        Traced {
            curve: LevelCurve {
                points,
                closed,
                normals,
                degenerate,
            },
            cells,
            edges,
        }
    };
    for i in 0..segs.len() {
        if !used[i] && !has_pred[i] {
            out.push(walk(i, &mut used));
        }
    }
    for i in 0..segs.len() {
        if !used[i] {
            out.push(walk(i, &mut used));
        }
    }
    out
}

/// Left normals of a polyline, averaged over the adjacent segments.
pub(crate) fn normals_left(points: &[[f64; 2]], closed: bool) -> Vec<[f64; 2]> {
    let m = points.len();
    let seg = |i: usize| {
        let (a, b) = (points[i], points[i + 1]);
        unit([b[0] - a[0], b[1] - a[1]])
    };
    (0..m)
        .map(|i| {
            let mut t = [0.0, 0.0];
            if i + 1 < m {
                let s = seg(i);
                t = [t[0] + s[0], t[1] + s[1]];
            } else if closed && m > 1 {
                let s = seg(0);
                t = [t[0] + s[0], t[1] + s[1]];
            }
            if i > 0 {
                let s = seg(i - 1);
                t = [t[0] + s[0], t[1] + s[1]];
            }
            let t = unit(t);
            [-t[1], t[0]]
        })
        .collect()
}

/// Zero set of a sampled scalar: crossing points in 1D, oriented
/// marching-squares polylines in 2D.
pub fn trace_zero_set(grid: &BaseGrid, values: &[f64]) -> Vec<LevelCurve> {
    let traced = if grid.dim() == 1 {
        trace_1d(grid, values, &|_, _| false)
    } else {
        trace_2d(grid, values, &|_| false)
    };
    traced.into_iter().map(|t| t.curve).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Topology;

    #[test]
    fn one_d_crossing_is_cooriented() {
        let g = BaseGrid::interval(-1.0, 1.0, 64).unwrap();
        let c = trace_zero_set(&g, &g.sample(|x| x[0]));
        assert_eq!(c.len(), 1);
        assert!(c[0].points[0][0].abs() < 1e-12);
        assert_eq!(c[0].normals[0], [1.0, 0.0]);
        let c = trace_zero_set(&g, &g.sample(|x| -x[0]));
        assert_eq!(c[0].normals[0], [-1.0, 0.0]);
    }

    #[test]
    fn positive_field_has_no_locus() {
        let g = BaseGrid::square(Topology::Periodic, 0.0, 1.0, 32).unwrap();
        assert!(trace_zero_set(&g, &vec![0.1; g.len()]).is_empty());
    }

    #[test]
    fn circle_is_closed_and_counterclockwise_outside_positive() {
        let g = BaseGrid::square(Topology::Periodic, -1.0, 1.0, 64).unwrap();
        let c = trace_zero_set(&g, &g.sample(|x| x[0] * x[0] + x[1] * x[1] - 0.25));
        assert_eq!(c.len(), 1);
        assert!(c[0].closed);
        assert_eq!(c[0].points.first(), c[0].points.last());
        // Positive outside on the left means clockwise travel: negative signed area.
        let area: f64 = c[0]
            .segments()
            .map(|(a, b)| a[0] * b[1] - a[1] * b[0])
            .sum::<f64>()
            / 2.0;
        assert!(area < 0.0);
        for (p, n) in c[0].points.iter().zip(&c[0].normals) {
            assert!(p[0] * n[0] + p[1] * n[1] > 0.0);
        }
    }

    #[test]
    fn saddle_follows_centre() {
        let g = BaseGrid::square(Topology::Bounded, -1.0, 1.0, 16).unwrap();
        let c = trace_zero_set(&g, &g.sample(|x| x[0] * x[1] + 0.01));
        // Positive centre joins the positive quadrants: two open curves.
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|k| !k.closed));
    }

    #[test]
    fn line_across_seam_is_unwrapped() {
        let g = BaseGrid::square(Topology::Periodic, 0.0, 1.0, 32).unwrap();
        let c = trace_zero_set(
            &g,
            &g.sample(|x| (2.0 * std::f64::consts::PI * x[1]).sin() + 0.3),
        );
        assert_eq!(c.len(), 2);
        for k in &c {
            assert!(k.closed);
            for w in k.points.windows(2) {
                assert!((w[1][0] - w[0][0]).abs() < 0.1);
            }
        }
    }
}
