use serde::{Deserialize, Serialize};

use crate::grid::CutoffProfile;

/// Generating function φ_ε of one variable with symbolic derivatives.
///
/// `Fold` interpolates the fold q = p² (outside |p| ≥ ε) and the ridge
/// q = ε|p| (inside |p| ≤ ε/2). `Cusp` interpolates q = |p|^{2/3} and q = |p|/ε.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratingProfile {
    Fold { eps: f64 },
    Cusp { eps: f64 },
}

fn sigma(t: f64) -> (f64, f64, f64) {
    CutoffProfile::sigma().eval(t)
}

impl GeneratingProfile {
    pub fn eps(&self) -> f64 {
        match *self {
            GeneratingProfile::Fold { eps } | GeneratingProfile::Cusp { eps } => eps,
        }
    }

    /// φ_ε(p).
    pub fn value(&self, p: f64) -> f64 {
        let a = p.abs();
        let sg = p.signum();
        match *self {
            GeneratingProfile::Fold { eps } => {
                if eps == 0.0 {
                    return p * p * p / 3.0;
                }
                let s = sigma(a / eps).0;
                (1.0 - s) * p * p * p / 3.0 + 0.5 * eps * s * sg * p * p
            }
            GeneratingProfile::Cusp { eps } => {
                let outer = 0.6 * sg * a.powf(5.0 / 3.0);
                if eps == 0.0 {
                    return outer;
                }
                let s = sigma(a / eps).0;
                (1.0 - s) * outer + s * sg * p * p / (2.0 * eps)
            }
        }
    }

    /// q = φ_ε′(p).
    pub fn q(&self, p: f64) -> f64 {
        let a = p.abs();
        match *self {
            GeneratingProfile::Fold { eps } => {
                if eps == 0.0 {
                    return p * p;
                }
                let (s, s1, _) = sigma(a / eps);
                (1.0 - s) * p * p + eps * s * a + s1 * (p * p / 2.0 - a * a * a / (3.0 * eps))
            }
            GeneratingProfile::Cusp { eps } => {
                let outer = a.powf(2.0 / 3.0);
                if eps == 0.0 {
                    return outer;
                }
                let (s, s1, _) = sigma(a / eps);
                (1.0 - s) * outer
                    + s * a / eps
                    + s1 / eps * (p * p / (2.0 * eps) - 0.6 * a.powf(5.0 / 3.0))
            }
        }
    }

    /// dq/dp; one-sided at p = 0 gives the right limit, mirrored for p < 0.
    pub fn dq(&self, p: f64) -> f64 {
        let a = p.abs();
        let sg = if p < 0.0 { -1.0 } else { 1.0 };
        let d = match *self {
            GeneratingProfile::Fold { eps } => {
                if eps == 0.0 {
                    return 2.0 * p;
                }
                let t = a / eps;
                let (s, s1, s2) = sigma(t);
                eps * (2.0 * t * (1.0 - s)
                    + s
                    + 2.0 * s1 * t * (1.0 - t)
                    + s2 * (t * t / 2.0 - t * t * t / 3.0))
            }
            GeneratingProfile::Cusp { eps } => {
                let outer = if a == 0.0 {
                    f64::INFINITY
                } else {
                    2.0 / 3.0 * a.powf(-1.0 / 3.0)
                };
                if eps == 0.0 {
                    outer
                } else {
                    let (s, s1, s2) = sigma(a / eps);
                    let (s1, s2) = (s1 / eps, s2 / (eps * eps));
                    let o = if s == 1.0 { 0.0 } else { (1.0 - s) * outer };
                    o + s / eps
                        + 2.0 * s1 * (a / eps - a.powf(2.0 / 3.0))
                        + s2 * (a * a / (2.0 * eps) - 0.6 * a.powf(5.0 / 3.0))
                }
            }
        };
        sg * d
    }

    /// (left, right) limits of dq/dp.
    pub fn one_sided_dq(&self, p: f64) -> (f64, f64) {
        if p == 0.0 {
            let d = self.dq(0.0);
            (-d, d)
        } else {
            (self.dq(p), self.dq(p))
        }
    }

    /// Breakpoints of the piecewise definition, including the ridge at 0.
    pub fn knots(&self) -> Vec<f64> {
        let eps = self.eps();
        if eps == 0.0 {
            return vec![0.0];
        }
        let mut k = vec![0.0];
        for x in CutoffProfile::sigma().knots() {
            k.push(x * eps);
            k.push(-x * eps);
        }
        k.sort_by(f64::total_cmp);
        k
    }

    /// Ridge points, where only q is continuous.
    pub fn ridge_points(&self) -> Vec<f64> {
        match *self {
            GeneratingProfile::Fold { eps } | GeneratingProfile::Cusp { eps } if eps > 0.0 => {
                vec![0.0]
            }
            _ => vec![],
        }
    }
}

pub fn fold_to_ridge(eps: f64, p: f64) -> f64 {
    GeneratingProfile::Fold { eps }.q(p)
}

pub fn cusp_to_ridge(eps: f64, p: f64) -> f64 {
    GeneratingProfile::Cusp { eps }.q(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_examples() {
        assert!((fold_to_ridge(0.0, 0.3) - 0.09).abs() < 1e-16);
        assert!((fold_to_ridge(0.1, 0.025) - 0.0025).abs() < 1e-16);
        assert!((fold_to_ridge(0.1, 0.2) - 0.04).abs() < 1e-16);
    }

    #[test]
    fn cusp_examples() {
        assert!((cusp_to_ridge(0.0, 8.0) - 4.0).abs() < 1e-14);
        assert!((cusp_to_ridge(0.1, 0.04) - 0.4).abs() < 1e-15);
        for i in 0..100 {
            let p = i as f64 * 0.0031;
            assert_eq!(cusp_to_ridge(0.1, p), cusp_to_ridge(0.1, -p));
        }
    }

    #[test]
    fn q_is_derivative_of_value() {
        for prof in [
            GeneratingProfile::Fold { eps: 0.1 },
            GeneratingProfile::Cusp { eps: 0.1 },
        ] {
            for i in 1..400 {
                let p = -0.2 + 0.4 * i as f64 / 400.0 + 1e-4;
                let h = 1e-6;
                let fd = (prof.value(p + h) - prof.value(p - h)) / (2.0 * h);
                assert!((fd - prof.q(p)).abs() < 1e-6, "{prof:?} at {p}");
                let fd2 = (prof.q(p + h) - prof.q(p - h)) / (2.0 * h);
                assert!(
                    (fd2 - prof.dq(p)).abs() < 1e-4 * (1.0 + fd2.abs()),
                    "{prof:?} dq at {p}"
                );
            }
        }
    }

    #[test]
    fn q_is_continuous_at_knots() {
        for prof in [
            GeneratingProfile::Fold { eps: 0.2 },
            GeneratingProfile::Cusp { eps: 0.2 },
        ] {
            for k in prof.knots() {
                assert!((prof.q(k - 1e-12) - prof.q(k + 1e-12)).abs() < 1e-9);
            }
        }
    }
}
