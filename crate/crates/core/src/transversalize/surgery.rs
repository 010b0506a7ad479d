use serde::{Deserialize, Serialize};

use super::locus::{normals_left, LevelCurve};
use crate::error::{Error, Result};

/// Room available to an S-curve: it must stay within `max_offset` of the
/// fault polyline and must not cross any obstacle segment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Clearance {
    pub fault: Vec<[f64; 2]>,
    pub max_offset: f64,
    pub obstacles: Vec<([f64; 2], [f64; 2])>,
    /// Target spacing of the S-curve samples.
    pub spacing: f64,
    /// Periods of the base axes, for minimum-image distances.
    #[serde(default)]
    pub periods: [Option<f64>; 2],
}

impl Clearance {
    fn displacement(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let mut d = [b[0] - a[0], b[1] - a[1]];
        for (da, p) in d.iter_mut().zip(self.periods) {
            if let Some(p) = p {
                *da -= p * (*da / p).round();
            }
        }
        d
    }

    fn segment_distance(&self, x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
        let r = self.displacement(a, x);
        let d = self.displacement(a, b);
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 > 0.0 {
            ((r[0] * d[0] + r[1] * d[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (r[0] - t * d[0]).hypot(r[1] - t * d[1])
    }

    /// Distance from a point to the fault polyline.
    pub fn fault_distance(&self, x: [f64; 2]) -> f64 {
        match self.fault.len() {
            0 => f64::INFINITY,
            1 => {
                let d = self.displacement(self.fault[0], x);
                d[0].hypot(d[1])
            }
            _ => self
                .fault
                .windows(2)
                .map(|w| self.segment_distance(x, w[0], w[1]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Whether the segment pq properly crosses an obstacle.
    pub fn blocked(&self, p: [f64; 2], q: [f64; 2]) -> bool {
        self.obstacles.iter().any(|&(a, b)| {
            // Bring the obstacle to the image nearest p.
            let da = self.displacement(p, a);
            let a2 = [p[0] + da[0], p[1] + da[1]];
            let b2 = [a2[0] + (b[0] - a[0]), a2[1] + (b[1] - a[1])];
            segments_cross(p, q, a2, b2)
        })
    }
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Proper intersection of segments pq and ab (shared endpoints do not count).
pub fn segments_cross(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let d1 = orient(a, b, p);
    let d2 = orient(a, b, q);
    let d3 = orient(p, q, a);
    let d4 = orient(p, q, b);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn unit(v: [f64; 2]) -> Option<[f64; 2]> {
    let n = v[0].hypot(v[1]);
    (n > 0.0).then(|| [v[0] / n, v[1] / n])
}

/// Cubic Hermite curve from `p0` leaving along `t0` to `p1` arriving along
/// `t1`, tangent lengths equal to the chord. Returns the interior and end
/// points (not `p0`).
pub(crate) fn s_curve(
    p0: [f64; 2],
    t0: [f64; 2],
    p1: [f64; 2],
    t1: [f64; 2],
    clearance: &Clearance,
) -> Result<Vec<[f64; 2]>> {
    let chord = [p1[0] - p0[0], p1[1] - p0[1]];
    let len = chord[0].hypot(chord[1]);
    if len == 0.0 {
        return Err(Error::Surgery("endpoints coincide".into()));
    }
    let (Some(t0), Some(t1)) = (unit(t0), unit(t1)) else {
        return Err(Error::Surgery("undefined end tangent".into()));
    };
    let m0 = [t0[0] * len, t0[1] * len];
    let m1 = [t1[0] * len, t1[1] * len];
    let spacing = if clearance.spacing > 0.0 {
        clearance.spacing
    } else {
        len / 16.0
    };
    let count = ((3.0 * len / spacing).ceil() as usize).clamp(8, 4096);
    let mut out = Vec::with_capacity(count);
    for i in 1..=count {
        let s = i as f64 / count as f64;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let p = [
            h00 * p0[0] + h10 * m0[0] + h01 * p1[0] + h11 * m1[0],
            h00 * p0[1] + h10 * m0[1] + h01 * p1[1] + h11 * m1[1],
        ];
        out.push(p);
    }
    out[count - 1] = p1;
    let mut prev = p0;
    for &p in &out {
        let off = clearance.fault_distance(p);
        if off > clearance.max_offset {
            return Err(Error::Surgery(format!(
                "S-curve leaves the tube: offset {off:.3e} > {:.3e}",
                clearance.max_offset
            )));
        }
        if clearance.blocked(prev, p) {
            return Err(Error::Surgery(format!(
                "S-curve meets the locus near ({:.4}, {:.4})",
                p[0], p[1]
            )));
        }
        prev = p;
    }
    Ok(out)
}

fn end_tangent(c: &LevelCurve) -> Option<[f64; 2]> {
    let m = c.points.len();
    (m >= 2).then(|| {
        let (a, b) = (c.points[m - 2], c.points[m - 1]);
        [b[0] - a[0], b[1] - a[1]]
    })
}

fn start_tangent(c: &LevelCurve) -> Option<[f64; 2]> {
    (c.points.len() >= 2).then(|| {
        let (a, b) = (c.points[0], c.points[1]);
        [b[0] - a[0], b[1] - a[1]]
    })
}

/// Joins a curve ending at a fault to one starting on its other side with a
/// C¹ S-curve, after checking the clearance.
pub fn s_curve_reconnect(
    incoming: &LevelCurve,
    outgoing: &LevelCurve,
    clearance: &Clearance,
) -> Result<LevelCurve> {
    let (Some(p0), Some(p1)) = (incoming.points.last(), outgoing.points.first()) else {
        return Err(Error::Surgery("empty curve".into()));
    };
    let (Some(t0), Some(t1)) = (end_tangent(incoming), start_tangent(outgoing)) else {
        return Err(Error::Surgery(
            "curves need two points for a tangent".into(),
        ));
    };
    let d = clearance.displacement(*p0, *p1);
    let p1u = [p0[0] + d[0], p0[1] + d[1]];
    let bridge = s_curve(*p0, t0, p1u, t1, clearance)?;
    let shift = [p1u[0] - p1[0], p1u[1] - p1[1]];
    let mut points = incoming.points.clone();
    points.extend_from_slice(&bridge[..bridge.len() - 1]);
    points.extend(
        outgoing
            .points
            .iter()
            .map(|p| [p[0] + shift[0], p[1] + shift[1]]),
    );
    let normals = normals_left(&points, false);
    Ok(LevelCurve {
        points,
        closed: false,
        normals,
        degenerate: incoming.degenerate || outgoing.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(a: [f64; 2], b: [f64; 2]) -> LevelCurve {
        LevelCurve {
            points: vec![a, b],
            closed: false,
            normals: normals_left(&[a, b], false),
            degenerate: false,
        }
    }

    fn vertical_fault() -> Clearance {
        Clearance {
            fault: vec![[0.0, -1.0], [0.0, 1.0]],
            max_offset: 0.5,
            obstacles: Vec::new(),
            spacing: 0.01,
            periods: [None, None],
        }
    }

    #[test]
    fn symmetric_ends_give_odd_curve() {
        let d = 0.25;
        let s = s_curve(
            [0.0, d],
            [1.0, 0.0],
            [0.0, -d],
            [1.0, 0.0],
            &vertical_fault(),
        )
        .unwrap();
        let m = s.len();
        let mut all = vec![[0.0, d]];
        all.extend(s);
        for i in 0..=m {
            let (a, b) = (all[i], all[m - i]);
            assert!((a[0] + b[0]).abs() < 1e-12 && (a[1] + b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn joined_curve_stays_in_corridor() {
        let c = vertical_fault();
        let a = line([-0.5, 0.3], [0.0, 0.3]);
        let b = line([0.0, -0.2], [0.5, -0.2]);
        let j = s_curve_reconnect(&a, &b, &c).unwrap();
        assert_eq!(j.points.first(), a.points.first());
        assert_eq!(j.points.last(), b.points.last());
        for (p, q) in j.segments().skip(1).take(j.len() - 3) {
            assert!(c.fault_distance(p) <= c.max_offset);
            assert!(!segments_cross(p, q, [-1.0, 0.5], [1.0, 0.5]));
        }
    }

    #[test]
    fn coincident_ends_fail() {
        let err = s_curve(
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 0.0],
            [1.0, 0.0],
            &vertical_fault(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Surgery(_)));
    }

    #[test]
    fn obstacle_blocks_surgery() {
        let mut c = vertical_fault();
        c.obstacles.push(([-1.0, 0.0], [1.0, 0.0]));
        let err = s_curve([0.0, 0.3], [1.0, 0.0], [0.0, -0.2], [1.0, 0.0], &c).unwrap_err();
        assert!(matches!(err, Error::Surgery(_)));
    }
}
