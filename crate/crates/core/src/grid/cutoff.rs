use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// C² monotone step on [0, 1]: f(0)=0, f(1)=1, f', f'' vanish at both ends.
///
/// f'' is the hat 32s on [0,¼], 32(½−s) on [¼,¾], 32(s−1) on [¾,1].
pub fn smoothstep(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    if s > 0.5 {
        let (f, d1, d2) = smoothstep(1.0 - s);
        return (1.0 - f, d1, -d2);
    }
    if s <= 0.25 {
        (16.0 / 3.0 * s * s * s, 16.0 * s * s, 32.0 * s)
    } else {
        (
            8.0 * s * s - 16.0 / 3.0 * s * s * s - 2.0 * s + 1.0 / 6.0,
            16.0 * s - 16.0 * s * s - 2.0,
            32.0 * (0.5 - s),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoffKind {
    Psi,
    Sigma,
    Theta,
}

/// Bump equal to 1 on [0, ½·radius] and 0 beyond `radius`, non-increasing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub kind: CutoffKind,
    pub radius: f64,
}

impl CutoffProfile {
    pub fn psi() -> Self {
        CutoffProfile {
            kind: CutoffKind::Psi,
            radius: 1.0,
        }
    }

    pub fn sigma() -> Self {
        CutoffProfile {
            kind: CutoffKind::Sigma,
            radius: 1.0,
        }
    }

    /// Equal to 1 near the fault and 0 outside `tube` (in units of φ).
    pub fn theta(tube: f64) -> Result<Self> {
        if !(tube > 0.0) {
            return Err(Error::Input("tube radius must be positive".into()));
        }
        Ok(CutoffProfile {
            kind: CutoffKind::Theta,
            radius: tube,
        })
    }

    /// Value and first two derivatives in x, evaluated at |x|/radius.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let t = x.abs() / self.radius;
        let s = x.signum() / self.radius;
        let (f, d1, d2) = smoothstep(2.0 * t - 1.0);
        (1.0 - f, -2.0 * d1 * s, -4.0 * d2 * s * s)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// Knots where the polynomial pieces change, in units of x ≥ 0.
    pub fn knots(&self) -> [f64; 5] {
        [0.5, 0.625, 0.75, 0.875, 1.0].map(|k| k * self.radius)
    }
}

/// ε·sign(u)·ψ(|u|/ε).
pub fn jump_profile(eps: f64, u: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Input("eps must be positive".into()));
    }
    Ok(jump_profile_unchecked(eps, u))
}

pub(crate) fn jump_profile_unchecked(eps: f64, u: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    eps * u.signum() * CutoffProfile::psi().value(u / eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_is_c2() {
        for k in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let a = smoothstep(k - 1e-9);
            let b = smoothstep(k + 1e-9);
            assert!((a.0 - b.0).abs() < 1e-8);
            assert!((a.1 - b.1).abs() < 1e-7);
            assert!((a.2 - b.2).abs() < 1e-6, "f'' jumps at {k}");
        }
        assert!((smoothstep(0.5).0 - 0.5).abs() < 1e-15);
        assert!((smoothstep(0.5).1 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_difference() {
        let p = CutoffProfile::theta(0.3).unwrap();
        for i in 1..200 {
            let x = -0.35 + 0.7 * i as f64 / 200.0;
            let h = 1e-6;
            let fd = (p.value(x + h) - p.value(x - h)) / (2.0 * h);
            assert!((fd - p.eval(x).1).abs() < 1e-6);
        }
    }

    #[test]
    fn psi_shape() {
        let p = CutoffProfile::psi();
        assert_eq!(p.value(0.0), 1.0);
        assert_eq!(p.value(0.5), 1.0);
        assert_eq!(p.value(1.0), 0.0);
        assert_eq!(p.value(3.0), 0.0);
        let mut last = 1.0;
        for i in 0..=1000 {
            let v = p.value(i as f64 / 1000.0 * 1.2);
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn jump_examples() {
        assert_eq!(jump_profile(0.1, 1e-12).unwrap(), 0.1);
        assert_eq!(jump_profile(0.1, 0.2).unwrap(), 0.0);
        for i in 0..50 {
            let u = i as f64 * 0.003;
            assert_eq!(
                jump_profile(0.1, -u).unwrap(),
                -jump_profile(0.1, u).unwrap()
            );
        }
        assert!(jump_profile(0.0, 0.1).is_err());
    }
}
