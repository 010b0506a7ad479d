use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use super::locus::{EdgeKey, LevelCurve};
use crate::error::{Error, Result};
use crate::grid::BaseGrid;

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-7 {
        r
    } else {
        v
    }
}

fn wrap_index(grid: &BaseGrid, axis: usize, i: i64) -> Option<usize> {
    let n = grid.resolution()[axis] as i64;
    if grid.periodic(axis) {
        Some(i.rem_euclid(n) as usize)
    } else if (0..n).contains(&i) {
        Some(i as usize)
    } else {
        None
    }
}

/// Grid edges crossed by the polylines, with crossing counts. Points lying on
/// grid lines are counted once by a half-open rule.
pub(crate) fn crossed_edges(grid: &BaseGrid, curves: &[LevelCurve]) -> HashMap<EdgeKey, u32> {
    let mut out = HashMap::new();
    for c in curves {
        let mut pts: Vec<[f64; 2]> = c
            .points
            .iter()
            .map(|&x| grid.to_grid(x).map(snap))
            .collect();
        // Open curves end on the border: extend them slightly past it so
        // the half-open rule counts the border edges.
        if !c.closed && pts.len() >= 2 {
            let m = pts.len();
            let ext = |a: [f64; 2], b: [f64; 2]| {
                let d = [b[0] - a[0], b[1] - a[1]];
                let n = d[0].hypot(d[1]).max(f64::MIN_POSITIVE);
                [b[0] + 1e-4 * d[0] / n, b[1] + 1e-4 * d[1] / n]
            };
            let head = ext(pts[1], pts[0]);
            let tail = ext(pts[m - 2], pts[m - 1]);
            pts.insert(0, head);
            pts.push(tail);
        }
        for w in pts.windows(2) {
            let (p, q) = (w[0], w[1]);
            for a in 0..2 {
                let o = 1 - a;
                let (lo, hi) = if p[a] < q[a] {
                    (p[a], q[a])
                } else {
                    (q[a], p[a])
                };
                // Lines c with lo < c ≤ hi.
                let mut c = lo.floor() + 1.0;
                while c <= hi {
                    let y = p[o] + (c - p[a]) / (q[a] - p[a]) * (q[o] - p[o]);
                    let j = y.floor() as i64;
                    let line = wrap_index(grid, a, c as i64);
                    let (s0, s1) = (wrap_index(grid, o, j), wrap_index(grid, o, j + 1));
                    if let (Some(line), Some(s0), Some(s1)) = (line, s0, s1) {
                        let mut m0 = [0; 2];
                        let mut m1 = [0; 2];
                        m0[a] = line;
                        m1[a] = line;
                        m0[o] = s0;
                        m1[o] = s1;
                        let (i0, i1) = (grid.index(m0), grid.index(m1));
                        *out.entry((i0.min(i1), i0.max(i1), o)).or_insert(0) += 1;
                    }
                    c += 1.0;
                }
            }
        }
    }
    out
}

/// Two-colouring of the samples in which colours differ exactly across the
/// blocked edges.
pub(crate) fn two_colour(grid: &BaseGrid, blocked: &dyn Fn(EdgeKey) -> bool) -> Result<Vec<u8>> {
    let len = grid.len();
    let mut colour = vec![u8::MAX; len];
    let mut queue = VecDeque::new();
    let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); len];
    for (a, b, axis) in grid.edges() {
        let bl = blocked((a.min(b), a.max(b), axis));
        adj[a].push((b, bl));
        adj[b].push((a, bl));
    }
    for start in 0..len {
        if colour[start] != u8::MAX {
            continue;
        }
        colour[start] = 0;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for &(j, bl) in &adj[i] {
                let want = colour[i] ^ u8::from(bl);
                if colour[j] == u8::MAX {
                    colour[j] = want;
                    queue.push_back(j);
                } else if colour[j] != want {
                    return Err(Error::NonDividing(format!(
                        "inconsistent sides at samples {i} and {j}"
                    )));
                }
            }
        }
    }
    Ok(colour)
}

fn point_segment(grid: &BaseGrid, x: [f64; 2], a: [f64; 2], d: [f64; 2], len2: f64) -> f64 {
    let r = grid.displacement(a, x);
    let t = if len2 > 0.0 {
        ((r[0] * d[0] + r[1] * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (r[0] - t * d[0]).hypot(r[1] - t * d[1])
}

/// Distance from every sample to the nearest polyline point, exact up to
/// `radius` and clamped there.
pub(crate) fn polyline_distance(grid: &BaseGrid, curves: &[LevelCurve], radius: f64) -> Vec<f64> {
    let mut segs: Vec<([f64; 2], [f64; 2])> = Vec::new();
    for c in curves {
        if c.points.len() == 1 {
            segs.push((c.points[0], c.points[0]));
        }
        for (a, b) in c.segments() {
            segs.push((a, b));
        }
    }
    let mut dist = vec![radius; grid.len()];
    let dim = grid.dim();
    let reach: Vec<i64> = (0..dim)
        .map(|a| (radius / grid.spacing(a)).ceil() as i64 + 1)
        .collect();
    // Per segment, the samples of the box around it.
    let updates: Vec<Vec<(usize, f64)>> = segs
        .par_iter()
        .map(|&(a, b)| {
            let d = [b[0] - a[0], b[1] - a[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let ga = grid.to_grid(a);
            let gb = grid.to_grid(b);
            let mut lo = [0i64; 2];
            let mut hi = [0i64; 2];
            for ax in 0..dim {
                lo[ax] = ga[ax].min(gb[ax]).floor() as i64 - reach[ax];
                hi[ax] = ga[ax].max(gb[ax]).ceil() as i64 + reach[ax];
                let n = grid.resolution()[ax] as i64;
                if grid.periodic(ax) && hi[ax] - lo[ax] >= n {
                    lo[ax] = 0;
                    hi[ax] = n - 1;
                }
            }
            let mut out = Vec::new();
            for i0 in lo[0]..=hi[0] {
                let Some(m0) = wrap_index(grid, 0, i0) else {
                    continue;
                };
                let (l1, h1) = if dim == 2 { (lo[1], hi[1]) } else { (0, 0) };
                for i1 in l1..=h1 {
                    let m1 = if dim == 2 {
                        match wrap_index(grid, 1, i1) {
                            Some(m) => m,
                            None => continue,
                        }
                    } else {
                        0
                    };
                    let idx = grid.index([m0, m1]);
                    let v = point_segment(grid, grid.coords(idx), a, d, len2);
                    if v < radius {
                        out.push((idx, v));
                    }
                }
            }
            out
        })
        .collect();
    for u in updates {
        for (idx, v) in u {
            if v < dist[idx] {
                dist[idx] = v;
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Topology;
    use crate::transversalize::trace_zero_set;

    #[test]
    fn circle_distance_and_colours() {
        let g = BaseGrid::square(Topology::Periodic, -1.0, 1.0, 64).unwrap();
        let f = g.sample(|x| x[0].hypot(x[1]) - 0.5);
        let curves = trace_zero_set(&g, &f);
        let d = polyline_distance(&g, &curves, 0.3);
        for i in 0..g.len() {
            let exact = f[i].abs().min(0.3);
            assert!((d[i] - exact).abs() < 2e-3, "{} {}", d[i], exact);
        }
        let crossed = crossed_edges(&g, &curves);
        let colour = two_colour(&g, &|k| crossed.get(&k).is_some_and(|c| c % 2 == 1)).unwrap();
        let inside = colour[g.index([32, 32])];
        for i in 0..g.len() {
            assert_eq!(colour[i] == inside, f[i] <= 0.0);
        }
    }

    #[test]
    fn single_seam_line_does_not_divide_a_torus() {
        let g = BaseGrid::square(Topology::Periodic, 0.0, 1.0, 32).unwrap();
        let f = g.sample(|x| x[1] - 0.5 + 0.01);
        let curves: Vec<LevelCurve> = trace_zero_set(&g, &f);
        // The level set on a torus is two lines; keep one.
        let crossed = crossed_edges(&g, &curves[..1]);
        assert!(two_colour(&g, &|k| crossed.get(&k).is_some_and(|c| c % 2 == 1)).is_err());
        let crossed = crossed_edges(&g, &curves);
        assert!(two_colour(&g, &|k| crossed.get(&k).is_some_and(|c| c % 2 == 1)).is_ok());
    }
}
