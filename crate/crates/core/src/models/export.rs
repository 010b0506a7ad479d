use std::fmt::Write as _;

use super::{GraphOver, ModelRidge, RidgyCurve};

/// CSV with header `p,q,ridge_marker`; floats use the shortest round-trip form.
pub fn curve_csv(c: &RidgyCurve) -> String {
    let mut out = String::from("p,q,ridge_marker\n");
    for (i, [q, p]) in c.points().into_iter().enumerate() {
        let _ = writeln!(out, "{p},{q},{}", u8::from(c.is_marker(i)));
    }
    out
}

/// Axis-aligned view box [q_min, q_max] × [p_min, p_max].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewBox {
    pub q: [f64; 2],
    pub p: [f64; 2],
}

impl ViewBox {
    pub fn around(curves: &[&RidgyCurve]) -> Self {
        let mut q = [f64::INFINITY, f64::NEG_INFINITY];
        let mut p = q;
        for c in curves {
            for [x, y] in c.points() {
                q = [q[0].min(x), q[1].max(x)];
                p = [p[0].min(y), p[1].max(y)];
            }
        }
        let pad = |r: [f64; 2]| {
            let w = (r[1] - r[0]).max(1e-9) * 0.05;
            [r[0] - w, r[1] + w]
        };
        ViewBox {
            q: pad(q),
            p: pad(p),
        }
    }
}

const PALETTE: [&str; 6] = [
    "#444444", "#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e",
];

fn header(view: &ViewBox, size: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"{} {} {} {}\">\n",
        view.q[0],
        -view.p[1],
        view.q[1] - view.q[0],
        view.p[1] - view.p[0]
    )
}

/// One `<path>` per curve, q horizontal and p vertical (upward).
pub fn curves_svg(curves: &[&RidgyCurve], view: &ViewBox) -> String {
    let stroke = (view.q[1] - view.q[0]).max(view.p[1] - view.p[0]) / 300.0;
    let mut out = header(view, 400.0);
    for (k, c) in curves.iter().enumerate() {
        let mut d = String::new();
        for (i, [q, p]) in c.points().into_iter().enumerate() {
            let _ = write!(d, "{}{q} {}", if i == 0 { "M" } else { " L" }, -p);
        }
        let _ = writeln!(
            out,
            "<path d=\"{d}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{stroke}\"/>",
            PALETTE[k % PALETTE.len()]
        );
        for &m in &c.markers {
            let [q, p] = c.points()[m];
            let _ = writeln!(
                out,
                "<circle cx=\"{q}\" cy=\"{}\" r=\"{}\" fill=\"black\"/>",
                -p,
                2.0 * stroke
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Sampled piece of a model ridge in the (q_j, p_j) plane: a ray or a line.
pub fn ridge_piece_curve(
    m: &ModelRidge,
    piece: usize,
    j: usize,
    reach: f64,
    count: usize,
) -> RidgyCurve {
    use super::Coord;
    let pc = &m.pieces[piece];
    let t: Vec<f64> = (0..count)
        .map(|i| reach * i as f64 / (count - 1) as f64)
        .collect();
    if pc.nonneg.contains(&Coord::Q(j)) {
        RidgyCurve::from_fn(GraphOver::Q, t, |_| 0.0)
    } else if pc.nonneg.contains(&Coord::P(j)) {
        RidgyCurve::from_fn(GraphOver::P, t, |_| 0.0)
    } else {
        let t = (0..count)
            .map(|i| -reach + 2.0 * reach * i as f64 / (count - 1) as f64)
            .collect();
        RidgyCurve::from_fn(GraphOver::Q, t, |_| 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{sampling, GeneratingProfile};

    #[test]
    fn csv_lists_markers() {
        let prof = GeneratingProfile::Fold { eps: 0.1 };
        let c = RidgyCurve::from_profile(&prof, sampling(-0.5, 0.5, 11, &prof.knots()));
        let csv = curve_csv(&c);
        assert!(csv.starts_with("p,q,ridge_marker\n"));
        assert_eq!(csv.lines().filter(|l| l.ends_with(",1")).count(), 1);
        assert_eq!(csv.lines().count(), c.len() + 1);
    }

    #[test]
    fn svg_is_deterministic() {
        let prof = GeneratingProfile::Cusp { eps: 0.1 };
        let c = RidgyCurve::from_profile(&prof, sampling(-0.5, 0.5, 51, &prof.knots()));
        let v = ViewBox::around(&[&c]);
        let a = curves_svg(&[&c], &v);
        assert_eq!(a, curves_svg(&[&c], &v));
        assert_eq!(a.matches("<path").count(), 1);
    }
}
