use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::step::{inductive_step, InductiveStepConfig, Rank1Field, StepCertificate};
use crate::error::{Error, Result};
use crate::grid::{min_abs_det_masked, smoothstep, BaseGrid, TectonicFieldGrid};
use crate::rank1::{decompose_field, frame_covector, frame_pairs};
use crate::symplectic::SymmetricForm;

/// Closed ball in the base, with minimum-image distances on periodic axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Ball {
    pub fn new(center: [f64; 2], radius: f64) -> Self {
        Ball { center, radius }
    }

    pub fn distance(&self, grid: &BaseGrid, idx: usize) -> f64 {
        grid.distance(grid.coords(idx), self.center)
    }

    pub fn mask(&self, grid: &BaseGrid) -> Vec<bool> {
        (0..grid.len())
            .map(|i| self.distance(grid, i) <= self.radius)
            .collect()
    }
}

/// Subset of the base grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Everywhere,
    #[default]
    Nowhere,
    Ball(Ball),
    Samples(Vec<bool>),
}

impl Region {
    pub fn mask(&self, grid: &BaseGrid) -> Result<Vec<bool>> {
        Ok(match self {
            Region::Everywhere => vec![true; grid.len()],
            Region::Nowhere => vec![false; grid.len()],
            Region::Ball(b) => b.mask(grid),
            Region::Samples(m) => {
                if m.len() != grid.len() {
                    return Err(Error::DimensionMismatch {
                        expected: grid.len(),
                        found: m.len(),
                    });
                }
                m.clone()
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtensionConfig {
    pub step: InductiveStepConfig,
    /// Largest outer ball radius.
    pub rho_max: f64,
    /// C as a fraction of the largest |det(γ−ζ)| on K1.
    pub c_fraction: f64,
    /// Inner radius as a fraction of the outer one.
    pub inner_fraction: f64,
    pub max_balls: usize,
    /// ε halvings per ball when an earlier certificate degrades.
    pub max_retries: usize,
}

impl Default for ExtensionConfig {
    fn default() -> Self {
        ExtensionConfig {
            step: InductiveStepConfig::default(),
            rho_max: 0.25,
            c_fraction: 0.5,
            inner_fraction: 0.6,
            max_balls: 256,
            max_retries: 4,
        }
    }
}

impl ExtensionConfig {
    pub fn check(&self) -> Result<()> {
        self.step.check()?;
        if !(self.rho_max > 0.0) {
            return Err(Error::Input("rho_max must be positive".into()));
        }
        if !(self.c_fraction > 0.0 && self.c_fraction < 1.0) {
            return Err(Error::Input("c_fraction must lie in (0, 1)".into()));
        }
        if !(self.inner_fraction > 0.0 && self.inner_fraction < 1.0) {
            return Err(Error::Input("inner_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LocalExtensionOutput {
    pub field: TectonicFieldGrid,
    /// min |det(γ − ξ − ζ)| on the inner ball.
    pub certificate: f64,
    pub sigma: f64,
    pub eps_initial: f64,
    pub steps: Vec<StepCertificate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallRecord {
    pub ball: Ball,
    pub inner_radius: f64,
    pub eps_initial: f64,
    pub halvings: usize,
    pub certificate: f64,
    pub faults_added: usize,
}

#[derive(Clone, Debug)]
pub struct GlobalExtensionOutput {
    pub field: TectonicFieldGrid,
    /// min |det(γ − ζ̂)| on K1.
    pub certificate: f64,
    pub location: [f64; 2],
    pub c: f64,
    pub balls: Vec<BallRecord>,
    /// Largest change of a form on K2 (zero by construction).
    pub k2_change: f64,
    /// Sup norm of ζ̂ − ζ.
    pub c0_norm: f64,
}

fn check_gamma(gamma: &[SymmetricForm], tf: &TectonicFieldGrid) -> Result<()> {
    if gamma.len() != tf.len() {
        return Err(Error::DimensionMismatch {
            expected: tf.len(),
            found: gamma.len(),
        });
    }
    if let Some(g) = gamma.iter().find(|g| g.dim() != tf.n()) {
        return Err(Error::DimensionMismatch {
            expected: tf.n(),
            found: g.dim(),
        });
    }
    Ok(())
}

fn sup_spectral(forms: &[SymmetricForm]) -> f64 {
    forms
        .par_iter()
        .map(|f| f.spectral_norm())
        .reduce(|| 0.0, f64::max)
}

/// Makes ξ + ζ transverse to γ on the inner ball with ζ = 0 near the
/// boundary of `ball`.
pub fn local_extension(
    gamma: &[SymmetricForm],
    xi: &TectonicFieldGrid,
    ball: &Ball,
    inner: &Ball,
    cfg: &InductiveStepConfig,
) -> Result<LocalExtensionOutput> {
    cfg.check()?;
    check_gamma(gamma, xi)?;
    if !(inner.radius > 0.0 && inner.radius < ball.radius)
        || xi.grid.distance(inner.center, ball.center) > 0.0
    {
        return Err(Error::Input(
            "inner ball must be concentric and smaller".into(),
        ));
    }
    let grid = &xi.grid;
    let h = grid.h();
    let n = xi.n();
    let eps_initial = cfg.eps_initial.min(0.1 * ball.radius - h);
    if !(eps_initial > 0.0) {
        return Err(Error::Input(format!(
            "ball radius {:.3e} leaves no room for a bump at spacing {h:.3e}",
            ball.radius
        )));
    }

    let s = 1.0 + sup_spectral(gamma) + 2.0 * sup_spectral(&xi.forms);
    let sigma = SymmetricForm::scalar(n, s);
    let diff: Vec<SymmetricForm> = gamma.iter().map(|g| g - &sigma).collect();
    let alphas = decompose_field(&diff);
    let reach = inner.radius + 0.75 * (ball.radius - inner.radius);
    let chi: Vec<f64> = (0..grid.len())
        .map(|i| {
            let d = ball.distance(grid, i);
            1.0 - smoothstep((d - inner.radius) / (reach - inner.radius)).0
        })
        .collect();

    let mut lambda = vec![sigma.clone(); grid.len()];
    let mut field = xi.clone();
    let mut steps = Vec::new();
    let step_cfg = InductiveStepConfig {
        eps_initial,
        ..cfg.clone()
    };
    for (j, (pair, alpha)) in frame_pairs(n).into_iter().zip(alphas).enumerate() {
        let ell = frame_covector(n, pair);
        let cut: Vec<f64> = alpha.iter().zip(&chi).map(|(a, c)| a * c).collect();
        let eta = Rank1Field::with_constant_ell(cut, &ell);
        let cfg_j = InductiveStepConfig {
            seed: cfg.seed.wrapping_add(j as u64),
            ..step_cfg.clone()
        };
        let out = inductive_step(&lambda, &eta, &field, &cfg_j).map_err(|e| Error::Step {
            step: j,
            source: Box::new(e),
        })?;
        for (l, e) in lambda.iter_mut().zip(eta.forms()) {
            *l = &*l + &e;
        }
        field = out.field;
        steps.push(out.certificate);
    }

    // The bumps must vanish within a cell of the boundary and outside.
    if let Some(i) = (0..grid.len()).find(|&i| {
        ball.distance(grid, i) >= ball.radius - h
            && (&field.forms[i] - &xi.forms[i]).spectral_norm() > 0.0
    }) {
        let x = grid.coords(i);
        return Err(Error::Convergence {
            attempts: 1,
            reason: format!(
                "extension reaches the ball boundary at ({:.4}, {:.4})",
                x[0], x[1]
            ),
            loci: Vec::new(),
        });
    }
    let inner_mask = inner.mask(grid);
    let certificate = min_abs_det_masked(&field, gamma, Some(&inner_mask)).value;
    if !(certificate > 0.0) {
        return Err(Error::Convergence {
            attempts: 1,
            reason: "extension is not transverse on the inner ball".into(),
            loci: Vec::new(),
        });
    }
    Ok(LocalExtensionOutput {
        field,
        certificate,
        sigma: s,
        eps_initial,
        steps,
    })
}

/// Pointwise |det(γ − ζ)|, lowered at samples next to a plate crossing to the
/// value against the neighbouring plate's form at the edge midpoint.
fn singularity_weight(gamma: &[SymmetricForm], tf: &TectonicFieldGrid) -> Vec<f64> {
    let mut w: Vec<f64> = gamma
        .par_iter()
        .zip(&tf.forms)
        .map(|(g, z)| (g - z).det().abs())
        .collect();
    for (a, b, _) in tf.grid.edges() {
        if tf.labels[a] == tf.labels[b] {
            continue;
        }
        let mid = &(&gamma[a] + &gamma[b]) * 0.5;
        let v = (&mid - &tf.forms[a])
            .det()
            .abs()
            .min((&mid - &tf.forms[b]).det().abs());
        w[a] = w[a].min(v);
        w[b] = w[b].min(v);
    }
    w
}

/// Extends ζ to a field transverse to γ on K1 that agrees with ζ on K2.
pub fn global_extension(
    gamma: &[SymmetricForm],
    zeta: &TectonicFieldGrid,
    k1: &Region,
    k2: &Region,
    cfg: &ExtensionConfig,
) -> Result<GlobalExtensionOutput> {
    cfg.check()?;
    check_gamma(gamma, zeta)?;
    let grid = &zeta.grid;
    let h = grid.h();
    let m1 = k1.mask(grid)?;
    let m2 = k2.mask(grid)?;
    if m1.iter().zip(&m2).any(|(a, b)| *a && *b) {
        return Err(Error::Input("K1 and K2 intersect".into()));
    }
    let margin = cfg.step.margin_target;

    let w = singularity_weight(gamma, zeta);
    let w_max = m1
        .iter()
        .zip(&w)
        .filter(|(m, _)| **m)
        .map(|(_, w)| *w)
        .fold(0.0, f64::max);
    let c = cfg.c_fraction * w_max;
    let first = min_abs_det_masked(zeta, gamma, Some(&m1));
    if first.value > margin {
        return Ok(GlobalExtensionOutput {
            field: zeta.clone(),
            certificate: first.value,
            location: first.point,
            c,
            balls: Vec::new(),
            k2_change: 0.0,
            c0_norm: 0.0,
        });
    }

    // Balls live in Ω_2C ∖ K2.
    let allowed: Vec<bool> = (0..grid.len()).map(|i| w[i] < 2.0 * c && !m2[i]).collect();
    let forbidden: Vec<[f64; 2]> = (0..grid.len())
        .filter(|&i| !allowed[i])
        .map(|i| grid.coords(i))
        .collect();
    let mut pending: Vec<bool> = (0..grid.len()).map(|i| m1[i] && w[i] < c).collect();
    // Samples where the first scan sees a singular crossing also need a ball.
    if first.value <= margin {
        pending[first.sample] = true;
    }

    let mut field = zeta.clone();
    let mut balls: Vec<BallRecord> = Vec::new();
    let mut inner_masks: Vec<Vec<bool>> = Vec::new();
    while let Some(centre) = (0..grid.len())
        .filter(|&i| pending[i])
        .min_by(|&a, &b| w[a].total_cmp(&w[b]).then(a.cmp(&b)))
    {
        let index = balls.len();
        if index >= cfg.max_balls {
            return Err(Error::Ball {
                ball: index,
                source: Box::new(Error::Convergence {
                    attempts: index,
                    reason: format!("more than {} balls needed", cfg.max_balls),
                    loci: Vec::new(),
                }),
            });
        }
        let x = grid.coords(centre);
        if !allowed[centre] {
            return Err(Error::Input(format!(
                "singular point ({:.4}, {:.4}) of K1 touches K2",
                x[0], x[1]
            )));
        }
        let clearance = forbidden
            .par_iter()
            .map(|&y| grid.distance(x, y))
            .reduce(|| f64::INFINITY, f64::min);
        let radius = cfg.rho_max.min(clearance - h);
        let ball = Ball::new(x, radius);
        let inner = Ball::new(x, cfg.inner_fraction * radius);

        let mut eps = cfg.step.eps_initial;
        let mut halvings = 0;
        let (out, inner_mask) = loop {
            let step = InductiveStepConfig {
                eps_initial: eps,
                seed: cfg.step.seed.wrapping_add(1000 * index as u64),
                ..cfg.step.clone()
            };
            let attempt = local_extension(gamma, &field, &ball, &inner, &step).and_then(|out| {
                // Earlier balls must keep at least half their margin.
                for (k, (rec, mask)) in balls.iter().zip(&inner_masks).enumerate() {
                    let m = min_abs_det_masked(&out.field, gamma, Some(mask)).value;
                    if m < 0.5 * rec.certificate {
                        return Err(Error::Convergence {
                            attempts: 1,
                            reason: format!(
                                "ball {k} margin fell from {:.3e} to {m:.3e}",
                                rec.certificate
                            ),
                            loci: Vec::new(),
                        });
                    }
                }
                Ok(out)
            });
            match attempt {
                Ok(out) => break (out, inner.mask(grid)),
                Err(e) if e.is_convergence() && halvings < cfg.max_retries => {
                    eps *= 0.5;
                    halvings += 1;
                }
                Err(e) => {
                    return Err(Error::Ball {
                        ball: index,
                        source: Box::new(e),
                    })
                }
            }
        };
        for (p, m) in pending.iter_mut().zip(&inner_mask) {
            if *m {
                *p = false;
            }
        }
        balls.push(BallRecord {
            ball,
            inner_radius: inner.radius,
            eps_initial: out.eps_initial,
            halvings,
            certificate: out.certificate,
            faults_added: out.field.faults.len() - field.faults.len(),
        });
        inner_masks.push(inner_mask);
        field = out.field;
    }

    let last = min_abs_det_masked(&field, gamma, Some(&m1));
    if !(last.value > margin) {
        return Err(Error::Ball {
            ball: balls.len().saturating_sub(1),
            source: Box::new(Error::Convergence {
                attempts: balls.len(),
                reason: format!(
                    "final certificate {:.3e} at ({:.4}, {:.4})",
                    last.value, last.point[0], last.point[1]
                ),
                loci: Vec::new(),
            }),
        });
    }
    let changes: Vec<f64> = field
        .forms
        .par_iter()
        .zip(&zeta.forms)
        .map(|(a, b)| (a - b).spectral_norm())
        .collect();
    let k2_change = changes
        .iter()
        .zip(&m2)
        .filter(|(_, m)| **m)
        .map(|(c, _)| *c)
        .fold(0.0, f64::max);
    if k2_change > 0.0 {
        return Err(Error::Invariant(format!(
            "field changed on K2 by {k2_change:.3e}"
        )));
    }
    Ok(GlobalExtensionOutput {
        field,
        certificate: last.value,
        location: last.point,
        c,
        balls,
        k2_change,
        c0_norm: changes.iter().copied().fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_masks() {
        let g = BaseGrid::circle(0.0, 1.0, 20).unwrap();
        assert_eq!(Region::Everywhere.mask(&g).unwrap(), vec![true; 20]);
        let b = Region::Ball(Ball::new([0.0, 0.0], 0.075)).mask(&g).unwrap();
        assert_eq!(b.iter().filter(|m| **m).count(), 3);
        assert!(b[19] && b[0] && b[1]);
        assert!(Region::Samples(vec![true]).mask(&g).is_err());
    }

    #[test]
    fn sigma_itself_needs_no_faults() {
        let g = BaseGrid::interval(-1.0, 1.0, 128).unwrap();
        let xi = TectonicFieldGrid::zero(g.clone(), 1);
        // γ = 2 is already transverse to ξ = 0.
        let gamma = vec![SymmetricForm::scalar(1, 2.0); g.len()];
        let out = local_extension(
            &gamma,
            &xi,
            &Ball::new([0.0, 0.0], 0.5),
            &Ball::new([0.0, 0.0], 0.3),
            &InductiveStepConfig::default(),
        )
        .unwrap();
        assert!(out.field.faults.is_empty());
        assert_eq!(out.field.forms, xi.forms);
        assert_eq!(out.sigma, 3.0);
    }
}
