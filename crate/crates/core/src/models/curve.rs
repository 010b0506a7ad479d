use serde::{Deserialize, Serialize};

use super::GeneratingProfile;
use crate::error::{Error, Result};

/// Which coordinate parametrizes the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphOver {
    /// q = f(p)
    P,
    /// p = f(q)
    Q,
}

/// Sampled planar graph with ridge markers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgyCurve {
    pub over: GraphOver,
    pub param: Vec<f64>,
    pub value: Vec<f64>,
    /// df/dparam per sample, if known; one-sided values come from `marker_slopes`.
    pub slope: Option<Vec<f64>>,
    /// Sample indices of ridge points.
    pub markers: Vec<usize>,
    /// (left, right) slopes at each marker.
    pub marker_slopes: Vec<(f64, f64)>,
}

impl RidgyCurve {
    pub fn from_fn(over: GraphOver, param: Vec<f64>, f: impl Fn(f64) -> f64) -> Self {
        let value = param.iter().map(|&t| f(t)).collect();
        RidgyCurve {
            over,
            param,
            value,
            slope: None,
            markers: Vec::new(),
            marker_slopes: Vec::new(),
        }
    }

    /// q = φ′(p) sampled at `param`, with symbolic slopes and ridge markers.
    pub fn from_profile(prof: &GeneratingProfile, param: Vec<f64>) -> Self {
        let value = param.iter().map(|&p| prof.q(p)).collect();
        let slope = param.iter().map(|&p| prof.dq(p)).collect();
        let mut markers = Vec::new();
        let mut marker_slopes = Vec::new();
        for r in prof.ridge_points() {
            if let Some(i) = param.iter().position(|&p| p == r) {
                markers.push(i);
                marker_slopes.push(prof.one_sided_dq(r));
            }
        }
        RidgyCurve {
            over: GraphOver::P,
            param,
            value,
            slope: Some(slope),
            markers,
            marker_slopes,
        }
    }

    pub fn len(&self) -> usize {
        self.param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.param.is_empty()
    }

    /// (q, p) pairs.
    pub fn points(&self) -> Vec<[f64; 2]> {
        self.param
            .iter()
            .zip(&self.value)
            .map(|(&t, &v)| match self.over {
                GraphOver::P => [v, t],
                GraphOver::Q => [t, v],
            })
            .collect()
    }

    pub fn is_marker(&self, i: usize) -> bool {
        self.markers.contains(&i)
    }
}

/// Uniform samples of [a, b] merged with the given knots inside it.
pub fn sampling(a: f64, b: f64, count: usize, knots: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = (0..count)
        .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
        .collect();
    t.extend(knots.iter().copied().filter(|&k| k > a && k < b));
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// ∫ (f₁ − f₂) dparam over [a, b] by the trapezoid rule on the shared samples.
pub fn signed_area_between(c1: &RidgyCurve, c2: &RidgyCurve, interval: [f64; 2]) -> Result<f64> {
    let [a, b] = interval;
    if c1.over != c2.over {
        return Err(Error::Input(
            "curves are graphs over different coordinates".into(),
        ));
    }
    let covers = |c: &RidgyCurve| {
        !c.is_empty() && c.param[0] <= a && *c.param.last().expect("nonempty") >= b
    };
    if !(a < b) || !covers(c1) || !covers(c2) {
        return Err(Error::Input(
            "interval is not covered by both curves".into(),
        ));
    }
    let pick = |c: &RidgyCurve| -> Vec<(f64, f64)> {
        c.param
            .iter()
            .zip(&c.value)
            .filter(|(t, _)| **t >= a && **t <= b)
            .map(|(&t, &v)| (t, v))
            .collect()
    };
    let s1 = pick(c1);
    let s2 = pick(c2);
    if s1.len() != s2.len() || s1.iter().zip(&s2).any(|(x, y)| x.0 != y.0) {
        return Err(Error::Input(
            "curves do not share their sampling on the interval".into(),
        ));
    }
    if s1.first().map(|s| s.0) != Some(a) || s1.last().map(|s| s.0) != Some(b) {
        return Err(Error::Input("interval endpoints must be samples".into()));
    }
    let d: Vec<(f64, f64)> = s1.iter().zip(&s2).map(|(x, y)| (x.0, x.1 - y.1)).collect();
    Ok(d.windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum())
}

/// |sin| of the angle between a tangent (dq, dp) and the vertical {dq = 0}.
fn vertical_sine(dq: f64, dp: f64) -> f64 {
    let n = dq.hypot(dp);
    if n == 0.0 {
        0.0
    } else {
        dq.abs() / n
    }
}

fn tangent_sine(over: GraphOver, slope: f64) -> f64 {
    if slope.is_infinite() {
        return match over {
            GraphOver::P => 1.0,
            GraphOver::Q => 0.0,
        };
    }
    match over {
        GraphOver::P => vertical_sine(slope, 1.0),
        GraphOver::Q => vertical_sine(1.0, slope),
    }
}

/// Minimum over samples of the angle sine between the tangent and the
/// vertical direction; markers contribute both one-sided tangents.
pub fn transversality_margin(c: &RidgyCurve) -> f64 {
    let mut m = f64::INFINITY;
    match &c.slope {
        Some(s) => {
            for (i, &v) in s.iter().enumerate() {
                if !c.is_marker(i) {
                    m = m.min(tangent_sine(c.over, v));
                }
            }
            for &(l, r) in &c.marker_slopes {
                m = m.min(tangent_sine(c.over, l)).min(tangent_sine(c.over, r));
            }
        }
        None => {
            for w in c.points().windows(2) {
                m = m.min(vertical_sine(w[1][0] - w[0][0], w[1][1] - w[0][1]));
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_curves_have_zero_area() {
        let t = sampling(-1.0, 1.0, 101, &[]);
        let c = RidgyCurve::from_fn(GraphOver::P, t, |p| p * p);
        assert_eq!(signed_area_between(&c, &c, [-1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_area() {
        let t = sampling(-0.5, 0.5, 1001, &[]);
        let a = RidgyCurve::from_fn(GraphOver::P, t.clone(), |p| p * p);
        let b = RidgyCurve::from_fn(GraphOver::P, t, |p| p * p + 0.3);
        let area = signed_area_between(&b, &a, [-0.5, 0.5]).unwrap();
        assert!((area - 2.0 * 0.5 * 0.3).abs() < 1e-12);
        assert!(signed_area_between(&a, &b, [-0.6, 0.5]).is_err());
    }

    #[test]
    fn margins() {
        let eps = 0.1;
        let t = sampling(-0.3, 0.3, 61, &[0.0]);
        let ridge = RidgyCurve {
            over: GraphOver::P,
            value: t.iter().map(|p: &f64| eps * p.abs()).collect(),
            slope: Some(t.iter().map(|p: &f64| eps * p.signum()).collect()),
            markers: vec![t.iter().position(|p| *p == 0.0).unwrap()],
            marker_slopes: vec![(-eps, eps)],
            param: t.clone(),
        };
        let m = transversality_margin(&ridge);
        assert!((m - eps / (1.0 + eps * eps).sqrt()).abs() < 1e-15);

        let fold = RidgyCurve::from_profile(&GeneratingProfile::Fold { eps: 0.0 }, t.clone());
        assert_eq!(transversality_margin(&fold), 0.0);

        let line = RidgyCurve::from_fn(GraphOver::Q, t, |_| 0.7);
        assert_eq!(transversality_margin(&line), 1.0);
    }
}
