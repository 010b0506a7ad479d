use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distance::{crossed_edges, polyline_distance, two_colour};
use super::extend::nearest_sources;
use super::locus::{trace_1d, trace_2d, EdgeKey, LevelCurve, Traced};
use super::perturb::Perturber;
use super::surgery::{s_curve, Clearance};
use crate::error::{Error, Result};
use crate::grid::{
    jump_profile_unchecked, min_abs_det, validate, BaseGrid, Fault, TectonicFieldGrid,
    ValidateOptions, ViolationKind,
};
use crate::symplectic::SymmetricForm;

/// Field of rank-1 forms α·ℓℓᵀ; `ell` holds n entries per sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rank1Field {
    pub alpha: Vec<f64>,
    pub ell: Vec<f64>,
}

impl Rank1Field {
    pub fn new(alpha: Vec<f64>, ell: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || ell.len() % alpha.len() != 0 || ell.len() == 0 {
            return Err(Error::Input("ell needs n entries per sample".into()));
        }
        Ok(Rank1Field { alpha, ell })
    }

    /// Constant covector with a sampled coefficient.
    pub fn with_constant_ell(alpha: Vec<f64>, ell: &[f64]) -> Self {
        let len = alpha.len();
        Rank1Field {
            alpha,
            ell: ell.iter().copied().cycle().take(len * ell.len()).collect(),
        }
    }

    pub fn zero(len: usize, n: usize) -> Self {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        Self::with_constant_ell(vec![0.0; len], &e)
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn n(&self) -> usize {
        self.ell.len() / self.alpha.len()
    }

    pub fn ell_at(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.ell[i * n..(i + 1) * n]
    }

    pub fn form_at(&self, i: usize) -> SymmetricForm {
        SymmetricForm::outer(self.alpha[i], self.ell_at(i))
    }

    pub fn forms(&self) -> Vec<SymmetricForm> {
        (0..self.len()).map(|i| self.form_at(i)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.alpha.iter().all(|&a| a == 0.0) || self.ell.iter().all(|&l| l == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InductiveStepConfig {
    pub eps_initial: f64,
    /// ε_{j+1} = ratio·ε_j.
    pub ratio: f64,
    /// In grid cells.
    pub tube_radius: f64,
    pub margin_target: f64,
    pub max_retries: usize,
    pub seed: u64,
    /// Size of the genericity perturbation; 1e-4·eps_initial when unset.
    pub gen_eps: Option<f64>,
    /// Relative size of the covector perturbation.
    pub ell_perturbation: f64,
}

impl Default for InductiveStepConfig {
    fn default() -> Self {
        InductiveStepConfig {
            eps_initial: 0.1,
            ratio: 0.125,
            tube_radius: 8.0,
            margin_target: 0.0,
            max_retries: 8,
            seed: 0,
            gen_eps: None,
            ell_perturbation: 0.05,
        }
    }
}

impl InductiveStepConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.eps_initial > 0.0) {
            return Err(Error::Input("eps_initial must be positive".into()));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Input("ratio must lie in (0, 1)".into()));
        }
        if !(self.tube_radius > 0.0) {
            return Err(Error::Input("tube_radius must be positive".into()));
        }
        if !(self.margin_target >= 0.0) {
            return Err(Error::Input("margin_target must be nonnegative".into()));
        }
        if !(self.ell_perturbation > 0.0) {
            return Err(Error::Input("ell_perturbation must be positive".into()));
        }
        Ok(())
    }
}

/// Smallest ε in units of the grid spacing: keeps three samples on each side
/// of a new fault inside the flat part of ψ.
pub const EPS_FLOOR_CELLS: f64 = 6.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateRecord {
    pub plate: usize,
    pub curves: usize,
    pub points: usize,
    pub fault: Option<usize>,
    pub delta: Option<i8>,
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgeryRecord {
    pub plate: usize,
    /// Index of the crossed fault in the output field.
    pub crossed_fault: usize,
    pub from: [f64; 2],
    pub to: [f64; 2],
    /// Normal offsets of the two ends from the unperturbed locus.
    pub offsets: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepCertificate {
    pub min_abs_det: f64,
    pub sample: usize,
    pub location: [f64; 2],
    pub bound: f64,
    pub eps_initial: f64,
    pub eps: Vec<f64>,
    pub retries: usize,
    pub plates: Vec<PlateRecord>,
    pub surgeries: Vec<SurgeryRecord>,
    pub genericity_perturbations: usize,
    pub ell_perturbations: usize,
    pub degenerate_loci: usize,
    pub c0_norm: f64,
    pub c0_bound: f64,
    pub identity_residual: f64,
    pub faults_added: usize,
    pub eps_floor_hits: usize,
}

/// Form added on one new fault: −δ·ε·sign(u)·ψ(|u|/ε)·ℓ̃ℓ̃ᵀ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultBump {
    /// Index of the fault in the output field.
    pub fault: usize,
    pub plate: usize,
    pub delta: i8,
    pub eps: f64,
    pub u: Vec<f64>,
    pub ell: Vec<f64>,
    pub curves: Vec<LevelCurve>,
}

impl FaultBump {
    pub fn n(&self) -> usize {
        self.ell.len() / self.u.len()
    }

    pub fn ell_at(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.ell[i * n..(i + 1) * n]
    }

    pub fn coefficient(&self, i: usize) -> f64 {
        -f64::from(self.delta) * jump_profile_unchecked(self.eps, self.u[i])
    }

    pub fn forms(&self) -> Vec<SymmetricForm> {
        (0..self.u.len())
            .map(|i| SymmetricForm::outer(self.coefficient(i), self.ell_at(i)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub field: TectonicFieldGrid,
    pub certificate: StepCertificate,
    pub bumps: Vec<FaultBump>,
}

fn sum_forms(a: &[SymmetricForm], b: &[SymmetricForm]) -> Vec<SymmetricForm> {
    a.par_iter().zip(b).map(|(x, y)| x + y).collect()
}

fn structural_precondition(tf: &TectonicFieldGrid) -> Result<()> {
    let rep = validate(tf, &ValidateOptions::default());
    if let Some(v) = rep
        .violations
        .iter()
        .find(|v| v.kind != ViolationKind::JumpCondition)
    {
        return Err(Error::Precondition(format!(
            "field fails validation: {:?} at sample {}",
            v.kind, v.sample
        )));
    }
    Ok(())
}

/// det(λ + η − ζ̃_Q − extra) on the whole grid, where ζ̃_Q extends the form of
/// plate Q to each sample from its nearest plate sample.
pub(crate) struct PlateDet {
    pub m: Vec<SymmetricForm>,
    pub det: Vec<f64>,
}

fn plate_det(
    tf: &TectonicFieldGrid,
    target: &[SymmetricForm],
    in_plate: &[bool],
    extra: Option<&[SymmetricForm]>,
) -> PlateDet {
    let src = nearest_sources(&tf.grid, in_plate);
    let m: Vec<SymmetricForm> = (0..tf.len())
        .into_par_iter()
        .map(|i| {
            let mi = &target[i] - &tf.forms[src[i]];
            match extra {
                Some(e) => &mi - &e[i],
                None => mi,
            }
        })
        .collect();
    let det = m.par_iter().map(SymmetricForm::det).collect();
    PlateDet { m, det }
}

fn cell_corners(grid: &BaseGrid, c0: usize) -> Option<[usize; 4]> {
    let a = grid.step(c0, 0, 1)?;
    let b = grid.step(a, 1, 1)?;
    let c = grid.step(c0, 1, 1)?;
    Some([c0, a, b, c])
}

fn touches(grid: &BaseGrid, t: &Traced, in_plate: &[bool]) -> bool {
    t.edges
        .iter()
        .flatten()
        .any(|&(a, b, _)| in_plate[a] || in_plate[b])
        || (grid.dim() == 2
            && t.cells
                .iter()
                .filter_map(|&c| cell_corners(grid, c))
                .any(|c| c.iter().any(|&i| in_plate[i])))
}

fn edge_t(grid: &BaseGrid, key: EdgeKey, p: [f64; 2]) -> f64 {
    let (a, _, axis) = key;
    let xa = grid.coords(a);
    let d = grid.displacement(xa, p);
    (d[axis] / grid.spacing(axis)).clamp(0.0, 1.0)
}

fn lerp(a: &SymmetricForm, b: &SymmetricForm, t: f64) -> SymmetricForm {
    &(a * (1.0 - t)) + &(b * t)
}

fn nearest_sample(grid: &BaseGrid, p: [f64; 2]) -> usize {
    let g = grid.to_grid(grid.wrap(p));
    let mut m = [0usize; 2];
    for a in 0..grid.dim() {
        let n = grid.resolution()[a] as i64;
        let i = g[a].round() as i64;
        m[a] = if grid.periodic(a) {
            i.rem_euclid(n) as usize
        } else {
            i.clamp(0, n - 1) as usize
        };
    }
    grid.index(m)
}

fn on_vertex(grid: &BaseGrid, p: [f64; 2]) -> bool {
    let g = grid.to_grid(p);
    (0..grid.dim()).all(|a| (g[a] - g[a].round()).abs() < 1e-9)
}

fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot.abs() / (na * nb)).min(1.0).acos()
}

fn pair_condition(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return f64::INFINITY;
    }
    let m = nalgebra::DMatrix::from_fn(2, n, |r, i| if r == 0 { a[i] / na } else { b[i] / nb });
    let sv = m.svd(false, false).singular_values;
    let hi = sv.iter().cloned().fold(0.0, f64::max);
    let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Locus of det(λ + η − ζ̃_Q) for plate Q: components touching the closure of
/// the plate.
pub fn singular_locus(
    lambda: &[SymmetricForm],
    eta: &Rank1Field,
    tf: &TectonicFieldGrid,
    plate: usize,
) -> Result<Vec<LevelCurve>> {
    check_shapes(lambda, eta, tf)?;
    if plate >= tf.plate_count() {
        return Err(Error::Input(format!("no plate {plate}")));
    }
    let target = sum_forms(lambda, &eta.forms());
    let in_plate: Vec<bool> = tf.labels.iter().map(|&l| l == plate).collect();
    let pd = plate_det(tf, &target, &in_plate, None);
    let traced = if tf.grid.dim() == 1 {
        trace_1d(&tf.grid, &pd.det, &|_, _| false)
    } else {
        trace_2d(&tf.grid, &pd.det, &|_| false)
    };
    Ok(traced
        .into_iter()
        .filter(|t| touches(&tf.grid, t, &in_plate))
        .map(|t| t.curve)
        .collect())
}

fn check_shapes(lambda: &[SymmetricForm], eta: &Rank1Field, tf: &TectonicFieldGrid) -> Result<()> {
    if lambda.len() != tf.len() || eta.len() != tf.len() {
        return Err(Error::DimensionMismatch {
            expected: tf.len(),
            found: lambda.len().min(eta.len()),
        });
    }
    if let Some(f) = lambda.iter().find(|f| f.dim() != tf.n()) {
        return Err(Error::DimensionMismatch {
            expected: tf.n(),
            found: f.dim(),
        });
    }
    if eta.n() != tf.n() {
        return Err(Error::DimensionMismatch {
            expected: tf.n(),
            found: eta.n(),
        });
    }
    Ok(())
}

/// One rank-1 inductive step: returns ζ + ζ′ transverse to λ + η.
pub fn inductive_step(
    lambda: &[SymmetricForm],
    eta: &Rank1Field,
    tf: &TectonicFieldGrid,
    cfg: &InductiveStepConfig,
) -> Result<StepOutput> {
    cfg.check()?;
    check_shapes(lambda, eta, tf)?;
    structural_precondition(tf)?;
    if tf.n() >= 2 {
        let m = min_abs_det(tf, lambda);
        if !(m.value > 0.0) {
            return Err(Error::Precondition(format!(
                "λ is not transverse to ζ near ({:.4}, {:.4})",
                m.point[0], m.point[1]
            )));
        }
    }
    let target = sum_forms(lambda, &eta.forms());
    if eta.is_zero() {
        let m = min_abs_det(tf, &target);
        return Ok(StepOutput {
            field: tf.clone(),
            certificate: StepCertificate {
                min_abs_det: m.value,
                sample: m.sample,
                location: m.point,
                bound: cfg.margin_target,
                eps_initial: cfg.eps_initial,
                eps: Vec::new(),
                retries: 0,
                plates: Vec::new(),
                surgeries: Vec::new(),
                genericity_perturbations: 0,
                ell_perturbations: 0,
                degenerate_loci: 0,
                c0_norm: 0.0,
                c0_bound: 0.0,
                identity_residual: 0.0,
                faults_added: 0,
                eps_floor_hits: 0,
            },
            bumps: Vec::new(),
        });
    }

    let mut eps0 = cfg.eps_initial;
    let mut reason = String::new();
    let mut loci: Vec<Vec<[f64; 2]>> = Vec::new();
    for attempt in 0..=cfg.max_retries {
        match attempt_step(lambda, eta, tf, cfg, &target, eps0, attempt) {
            Ok(mut out) => {
                out.certificate.retries = attempt;
                if out.certificate.min_abs_det > cfg.margin_target {
                    return Ok(out);
                }
                reason = format!(
                    "certificate {:.3e} does not exceed {:.3e} at ({:.4}, {:.4})",
                    out.certificate.min_abs_det,
                    cfg.margin_target,
                    out.certificate.location[0],
                    out.certificate.location[1]
                );
                loci = out
                    .bumps
                    .iter()
                    .flat_map(|b| b.curves.iter().map(|c| c.points.clone()))
                    .collect();
            }
            Err(e) if e.is_convergence() => {
                reason = e.to_string();
                if let Error::Convergence { loci: l, .. } = e {
                    loci = l;
                }
            }
            Err(e) => return Err(e),
        }
        eps0 *= 0.5;
    }
    Err(Error::Convergence {
        attempts: cfg.max_retries + 1,
        reason,
        loci,
    })
}

struct Attempt<'a> {
    grid: &'a BaseGrid,
    tf: &'a TectonicFieldGrid,
    eta: &'a Rank1Field,
    cfg: &'a InductiveStepConfig,
    rng: Perturber,
}

enum PlateOutcome {
    Done,
    Generic,
}

struct NewFault {
    phi: Vec<f64>,
    curves: Vec<LevelCurve>,
}

struct StepState {
    field: TectonicFieldGrid,
    bump_sum: Vec<SymmetricForm>,
    bumps: Vec<FaultBump>,
    new_faults: Vec<NewFault>,
    plates: Vec<PlateRecord>,
    surgeries: Vec<SurgeryRecord>,
    eps: Vec<f64>,
    ell_perturbations: usize,
    degenerate_loci: usize,
    identity_residual: f64,
    floor_hits: usize,
    max_ell2: f64,
}

fn attempt_step(
    lambda: &[SymmetricForm],
    eta: &Rank1Field,
    tf: &TectonicFieldGrid,
    cfg: &InductiveStepConfig,
    target: &[SymmetricForm],
    eps0: f64,
    attempt: usize,
) -> Result<StepOutput> {
    const MAX_GENERIC: usize = 4;
    let grid = &tf.grid;
    let gen_eps = cfg.gen_eps.unwrap_or(1e-4 * cfg.eps_initial);
    let mut at = Attempt {
        grid,
        tf,
        eta,
        cfg,
        rng: Perturber::new(cfg.seed ^ (attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
    };
    let mut lam_eff = lambda.to_vec();
    let mut generic_rounds = 0;
    let state = 'restart: loop {
        let eff_target = sum_forms(&lam_eff, &eta.forms());
        let mut st = StepState {
            field: tf.clone(),
            bump_sum: vec![SymmetricForm::zeros(tf.n()); tf.len()],
            bumps: Vec::new(),
            new_faults: Vec::new(),
            plates: Vec::new(),
            surgeries: Vec::new(),
            eps: Vec::new(),
            ell_perturbations: 0,
            degenerate_loci: 0,
            identity_residual: 0.0,
            floor_hits: 0,
            max_ell2: 0.0,
        };
        for plate in 0..tf.plate_count() {
            let allow_generic = generic_rounds < MAX_GENERIC;
            match at.plate(&mut st, &eff_target, plate, eps0, allow_generic)? {
                PlateOutcome::Done => {}
                PlateOutcome::Generic => {
                    generic_rounds += 1;
                    let p = at.rng.smooth_field(grid, tf.n(), gen_eps);
                    lam_eff = sum_forms(&lam_eff, &p);
                    continue 'restart;
                }
            }
        }
        break st;
    };

    let mut field = state.field;
    field.relabel();
    let m = min_abs_det(&field, target);
    let c0_norm = field
        .forms
        .par_iter()
        .zip(&tf.forms)
        .map(|(a, b)| (a - b).spectral_norm())
        .reduce(|| 0.0, f64::max);
    let eps1 = state.eps.first().copied().unwrap_or(0.0);
    Ok(StepOutput {
        certificate: StepCertificate {
            min_abs_det: m.value,
            sample: m.sample,
            location: m.point,
            bound: cfg.margin_target,
            eps_initial: eps0,
            eps: state.eps,
            retries: 0,
            plates: state.plates,
            surgeries: state.surgeries,
            genericity_perturbations: generic_rounds,
            ell_perturbations: state.ell_perturbations,
            degenerate_loci: state.degenerate_loci,
            c0_norm,
            c0_bound: eps1 * state.max_ell2 / (1.0 - cfg.ratio),
            identity_residual: state.identity_residual,
            faults_added: state.bumps.len(),
            eps_floor_hits: state.floor_hits,
        },
        field,
        bumps: state.bumps,
    })
}

/// Loose end of a traced curve at a skipped cell.
#[derive(Clone, Copy, Debug)]
struct End {
    curve: usize,
    fault: usize,
    plus: bool,
    point: [f64; 2],
}

impl Attempt<'_> {
    fn plate(
        &mut self,
        st: &mut StepState,
        target: &[SymmetricForm],
        plate: usize,
        eps0: f64,
        allow_generic: bool,
    ) -> Result<PlateOutcome> {
        let grid = self.grid;
        let tf = self.tf;
        let n = tf.n();
        let h = grid.h();
        let in_plate: Vec<bool> = tf.labels.iter().map(|&l| l == plate).collect();
        let mut record = PlateRecord {
            plate,
            curves: 0,
            points: 0,
            fault: None,
            delta: None,
            eps: None,
        };

        // Cheap test on the plate closure before the full extension.
        let quick = (0..tf.len()).filter(|&i| in_plate[i]).any(|a| {
            let ma = &(&target[a] - &tf.forms[a]) - &st.bump_sum[a];
            let da = ma.det();
            da == 0.0
                || grid.neighbors(a).into_iter().any(|b| {
                    let db = (&(&target[b] - &tf.forms[a]) - &st.bump_sum[b]).det();
                    (da > 0.0) != (db > 0.0)
                })
        });
        if !quick {
            st.plates.push(record);
            return Ok(PlateOutcome::Done);
        }

        let pd = plate_det(tf, target, &in_plate, Some(&st.bump_sum));
        let new_phi: Vec<&Vec<f64>> = st.new_faults.iter().map(|f| &f.phi).collect();
        let straddles = |a: usize, b: usize| {
            new_phi
                .iter()
                .position(|phi| (phi[a] > 0.0) != (phi[b] > 0.0))
        };
        let mut skipped: HashMap<EdgeKey, usize> = HashMap::new();
        let traced: Vec<Traced> = if grid.dim() == 1 {
            trace_1d(grid, &pd.det, &|a, b| straddles(a, b).is_some())
        } else {
            let straddle_cell = |c: &[usize; 4]| (1..4).find_map(|k| straddles(c[0], c[k]));
            for c in grid.cells() {
                if let Some(k) = straddle_cell(&c) {
                    for e in 0..4 {
                        let (a, b) = (c[e], c[(e + 1) % 4]);
                        skipped.entry((a.min(b), a.max(b), e % 2)).or_insert(k);
                    }
                }
            }
            trace_2d(grid, &pd.det, &|c| straddle_cell(c).is_some())
        };
        let kept: Vec<Traced> = traced
            .into_iter()
            .filter(|t| touches(grid, t, &in_plate))
            .collect();
        if kept.is_empty() {
            st.plates.push(record);
            return Ok(PlateOutcome::Done);
        }
        if allow_generic {
            if kept.iter().any(|t| t.curve.degenerate) {
                return Ok(PlateOutcome::Generic);
            }
            if kept
                .iter()
                .any(|t| t.curve.points.iter().any(|&p| on_vertex(grid, p)))
            {
                return Ok(PlateOutcome::Generic);
            }
        }
        st.degenerate_loci += kept.iter().filter(|t| t.curve.degenerate).count();

        // S-curve surgery across earlier new faults.
        let curves = if grid.dim() == 2 && !skipped.is_empty() {
            match self.reconnect(st, &kept, &skipped, target, &in_plate, plate, allow_generic)? {
                Some(c) => c,
                None => return Ok(PlateOutcome::Generic),
            }
        } else {
            kept.iter().map(|t| t.curve.clone()).collect()
        };
        record.curves = curves.len();
        record.points = curves.iter().map(LevelCurve::len).sum();

        // Covector, with the condition-(C) perturbation if needed.
        let ell = self.covector(st, &curves)?;

        // δ from the adjugate quadratic along the locus.
        let ell_at = |i: usize| &ell[i * n..(i + 1) * n];
        let mut sign = 0i8;
        for t in &kept {
            for (&p, key) in t.curve.points.iter().zip(&t.edges) {
                let Some(k) = key else { continue };
                let (m, i) = (lerp(&pd.m[k.0], &pd.m[k.1], edge_t(grid, *k, p)), k.0);
                let a = m.adjugate_quadratic(ell_at(i));
                if a.abs() < 1e-12 {
                    if allow_generic {
                        return Ok(PlateOutcome::Generic);
                    }
                    continue;
                }
                let s = if a > 0.0 { 1 } else { -1 };
                if sign == 0 {
                    sign = s;
                } else if sign != s {
                    return Err(Error::Surgery(format!(
                        "δ changes sign along the locus of plate {plate}"
                    )));
                }
                for c in [-1.0, 1.0] {
                    let bumped = &m + &SymmetricForm::outer(c, ell_at(i));
                    let r = (bumped.det() - (m.det() + c * a)).abs();
                    st.identity_residual = st.identity_residual.max(r);
                }
            }
        }
        let delta = if sign == 0 { 1 } else { sign };

        // Sides of the new fault.
        let blocked: HashMap<EdgeKey, u32> = if grid.dim() == 1 {
            let mut m = HashMap::new();
            for t in &kept {
                for k in t.edges.iter().flatten() {
                    *m.entry(*k).or_insert(0) += 1;
                }
            }
            m
        } else {
            crossed_edges(grid, &curves)
        };
        let colour = two_colour(grid, &|k| blocked.get(&k).is_some_and(|c| c % 2 == 1))?;

        let m_faults = st.eps.len() as i32;
        let mut eps = eps0 * self.cfg.ratio.powi(m_faults);
        let floor = EPS_FLOOR_CELLS * h;
        if eps < floor {
            eps = floor;
            st.floor_hits += 1;
        }
        let radius = (self.cfg.tube_radius * h).max(eps + 2.0 * h);
        let dist = polyline_distance(grid, &curves, radius);
        let mut score = [0i64; 2];
        for i in 0..tf.len() {
            if dist[i] < 2.0 * h {
                score[colour[i] as usize] += if pd.det[i] > 0.0 { 1 } else { -1 };
            }
        }
        if score[0].signum() * score[1].signum() >= 0 {
            return Err(Error::NonDividing(format!(
                "sides of the locus of plate {plate} are not oppositely signed"
            )));
        }
        let pos = if score[0] > 0 { 0 } else { 1 };
        let u: Vec<f64> = (0..tf.len())
            .map(|i| {
                let d = dist[i].max(f64::MIN_POSITIVE);
                if colour[i] == pos {
                    d
                } else {
                    -d
                }
            })
            .collect();

        let bump = FaultBump {
            fault: st.field.faults.len(),
            plate,
            delta,
            eps,
            u,
            ell: ell.clone(),
            curves: curves.clone(),
        };
        let forms = bump.forms();
        st.field.add_field(&forms);
        st.bump_sum = sum_forms(&st.bump_sum, &forms);
        let scale = (2.0 * eps).sqrt();
        let id = st.field.faults.iter().map(|f| f.id + 1).max().unwrap_or(0);
        let phi: Vec<f64> = bump.u.iter().map(|&u| -f64::from(delta) * u / h).collect();
        st.field.faults.push(Fault {
            id,
            phi: phi.clone(),
            ell: ell.iter().map(|v| v * scale).collect(),
        });
        st.max_ell2 = st.max_ell2.max(
            (0..tf.len())
                .map(|i| ell_at(i).iter().map(|v| v * v).sum::<f64>())
                .fold(0.0, f64::max),
        );
        record.fault = Some(bump.fault);
        record.delta = Some(delta);
        record.eps = Some(eps);
        st.eps.push(eps);
        st.plates.push(record);
        st.new_faults.push(NewFault { phi, curves });
        st.bumps.push(bump);
        Ok(PlateOutcome::Done)
    }

    /// Pairs loose ends across earlier new faults and joins them with
    /// S-curves. `None` asks for a genericity perturbation.
    #[allow(clippy::too_many_arguments)]
    fn reconnect(
        &mut self,
        st: &mut StepState,
        kept: &[Traced],
        skipped: &HashMap<EdgeKey, usize>,
        target: &[SymmetricForm],
        in_plate: &[bool],
        plate: usize,
        allow_generic: bool,
    ) -> Result<Option<Vec<LevelCurve>>> {
        let grid = self.grid;
        let h = grid.h();
        let mut ends: Vec<End> = Vec::new();
        let mut starts: Vec<End> = Vec::new();
        for (ci, t) in kept.iter().enumerate() {
            if t.curve.closed {
                continue;
            }
            let side = |k: usize, e: EdgeKey| st.new_faults[k].phi[e.0] > 0.0;
            if let Some(e) = t.last_edge() {
                if let Some(&k) = skipped.get(&e) {
                    ends.push(End {
                        curve: ci,
                        fault: k,
                        plus: side(k, e),
                        point: *t.curve.points.last().expect("nonempty"),
                    });
                }
            }
            if let Some(e) = t.first_edge() {
                if let Some(&k) = skipped.get(&e) {
                    starts.push(End {
                        curve: ci,
                        fault: k,
                        plus: side(k, e),
                        point: t.curve.points[0],
                    });
                }
            }
        }
        if ends.is_empty() && starts.is_empty() {
            return Ok(Some(kept.iter().map(|t| t.curve.clone()).collect()));
        }
        let mut cand: Vec<(f64, usize, usize)> = Vec::new();
        for (i, e) in ends.iter().enumerate() {
            for (j, s) in starts.iter().enumerate() {
                if e.fault == s.fault && e.plus != s.plus {
                    cand.push((grid.distance(e.point, s.point), i, j));
                }
            }
        }
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut end_used = vec![false; ends.len()];
        let mut start_used = vec![false; starts.len()];
        let mut pairs = Vec::new();
        for (_, i, j) in cand {
            if !end_used[i] && !start_used[j] {
                end_used[i] = true;
                start_used[j] = true;
                pairs.push((i, j));
            }
        }
        if end_used.iter().any(|u| !u) || start_used.iter().any(|u| !u) {
            return Err(Error::Surgery(format!(
                "unmatched loose end of the locus of plate {plate}"
            )));
        }

        // Unperturbed determinant for the splitting offsets.
        let d0 = plate_det(self.tf, target, in_plate, None).det;
        let offset = |p: [f64; 2], key: Option<EdgeKey>| -> f64 {
            let Some(k) = key else { return 0.0 };
            let t = edge_t(grid, k, p);
            let v = d0[k.0] * (1.0 - t) + d0[k.1] * t;
            let g = grid.gradient(&d0, k.0);
            let norm = g[0].hypot(g[1]);
            if norm > 0.0 {
                v / norm
            } else {
                0.0
            }
        };
        let obstacles: Vec<([f64; 2], [f64; 2])> =
            kept.iter().flat_map(|t| t.curve.segments()).collect();
        let mut next: Vec<Option<(usize, Vec<[f64; 2]>)>> = vec![None; kept.len()];
        let mut has_prev = vec![false; kept.len()];
        for (i, j) in pairs {
            let (e, s) = (ends[i], starts[j]);
            let (a, b) = (&kept[e.curve], &kept[s.curve]);
            let offsets = [
                offset(e.point, a.last_edge()),
                offset(s.point, b.first_edge()),
            ];
            if !(offsets[0] * offsets[1] < 0.0) {
                return Err(Error::Surgery(format!(
                    "loose ends near ({:.4}, {:.4}) are not split to opposite sides",
                    e.point[0], e.point[1]
                )));
            }
            let ta = end_dir(&a.curve);
            let tb = start_dir(&b.curve);
            let fault_curves = &st.new_faults[e.fault].curves;
            if allow_generic {
                let phi = &st.new_faults[e.fault].phi;
                let g = grid.gradient(phi, nearest_sample(grid, e.point));
                let along = [-g[1], g[0]];
                for dir in [ta, tb] {
                    let c = (dir[0] * along[0] + dir[1] * along[1]).abs()
                        / (dir[0].hypot(dir[1]) * along[0].hypot(along[1])).max(f64::MIN_POSITIVE);
                    if c.min(1.0).acos() < 1e-2 {
                        return Ok(None);
                    }
                }
            }
            let clearance = Clearance {
                fault: nearest_polyline(grid, fault_curves, e.point),
                max_offset: self.cfg.tube_radius * h,
                obstacles: obstacles.clone(),
                spacing: 0.5 * h,
                periods: [
                    grid.period(0),
                    if grid.dim() == 2 {
                        grid.period(1)
                    } else {
                        None
                    },
                ],
            };
            let d = grid.displacement(e.point, s.point);
            let p1 = [e.point[0] + d[0], e.point[1] + d[1]];
            let bridge = s_curve(e.point, ta, p1, tb, &clearance)?;
            st.surgeries.push(SurgeryRecord {
                plate,
                crossed_fault: st.bumps[e.fault].fault,
                from: e.point,
                to: s.point,
                offsets,
            });
            next[e.curve] = Some((s.curve, bridge));
            has_prev[s.curve] = true;
        }

        // Assemble chains.
        let mut used = vec![false; kept.len()];
        let mut out = Vec::new();
        let chain = |start: usize, used: &mut Vec<bool>| {
            let mut points: Vec<[f64; 2]> = Vec::new();
            let mut degenerate = false;
            let mut i = start;
            let mut closed = false;
            loop {
                used[i] = true;
                let c = &kept[i].curve;
                degenerate |= c.degenerate;
                let shift = match points.last() {
                    Some(&last) => {
                        let d = grid.displacement(last, c.points[0]);
                        [
                            last[0] + d[0] - c.points[0][0],
                            last[1] + d[1] - c.points[0][1],
                        ]
                    }
                    None => [0.0, 0.0],
                };
                let skip = usize::from(!points.is_empty());
                points.extend(
                    c.points
                        .iter()
                        .skip(skip)
                        .map(|p| [p[0] + shift[0], p[1] + shift[1]]),
                );
                match &next[i] {
                    Some((j, bridge)) => {
                        let last = *points.last().expect("nonempty");
                        let d = [bridge[0][0] - last[0], bridge[0][1] - last[1]];
                        let base = grid.displacement(last, bridge[0]);
                        let fix = [base[0] - d[0], base[1] - d[1]];
                        points.extend(
                            bridge[..bridge.len() - 1]
                                .iter()
                                .map(|p| [p[0] + fix[0], p[1] + fix[1]]),
                        );
                        if *j == start {
                            let first = points[0];
                            let last = *points.last().expect("nonempty");
                            let d = grid.displacement(last, first);
                            points.push([last[0] + d[0], last[1] + d[1]]);
                            closed = true;
                            break;
                        }
                        if used[*j] {
                            break;
                        }
                        i = *j;
                    }
                    None => break,
                }
            }
            let normals = super::locus::normals_left(&points, closed);
            LevelCurve {
                points,
                closed,
                normals,
                degenerate,
            }
        };
        for i in 0..kept.len() {
            if !used[i] && !has_prev[i] {
                out.push(chain(i, &mut used));
            }
        }
        for i in 0..kept.len() {
            if !used[i] {
                out.push(chain(i, &mut used));
            }
        }
        Ok(Some(out))
    }

    /// ℓ̃ for the new fault: η's covector, perturbed when it is nearly
    /// dependent on the covector of a crossed fault.
    fn covector(&mut self, st: &mut StepState, curves: &[LevelCurve]) -> Result<Vec<f64>> {
        const MAX_DRAWS: usize = 16;
        let grid = self.grid;
        let n = self.tf.n();
        let base = self.eta.ell.clone();
        if n < 2 || grid.dim() < 2 {
            return Ok(base);
        }
        // Samples where the new curves cross an existing fault.
        let mut crossings: Vec<(usize, usize)> = Vec::new();
        for (k, f) in st.field.faults.iter().enumerate() {
            for c in curves {
                for (p, q) in c.segments() {
                    let (a, b) = (nearest_sample(grid, p), nearest_sample(grid, q));
                    if f.plus(a) != f.plus(b) {
                        crossings.push((k, a));
                    }
                }
            }
        }
        let ok = |ell: &[f64]| {
            crossings.iter().all(|&(k, i)| {
                let a = &ell[i * n..(i + 1) * n];
                let b = st.field.faults[k].ell_at(i, n);
                angle_between(a, b) >= 1e-2 && pair_condition(a, b) <= 1e6
            })
        };
        if ok(&base) {
            return Ok(base);
        }
        for _ in 0..MAX_DRAWS {
            let r = self.rng.unit_vector(n);
            let mut ell = base.clone();
            for i in 0..grid.len() {
                let e = &mut ell[i * n..(i + 1) * n];
                let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (v, rv) in e.iter_mut().zip(&r) {
                    *v += self.cfg.ell_perturbation * norm * rv;
                }
            }
            if ok(&ell) {
                st.ell_perturbations += 1;
                return Ok(ell);
            }
        }
        Err(Error::Surgery(
            "no covector perturbation restores independence at a crossing".into(),
        ))
    }
}

fn end_dir(c: &LevelCurve) -> [f64; 2] {
    let m = c.points.len();
    if m < 2 {
        return [0.0, 0.0];
    }
    let (a, b) = (c.points[m - 2], c.points[m - 1]);
    [b[0] - a[0], b[1] - a[1]]
}

fn start_dir(c: &LevelCurve) -> [f64; 2] {
    if c.points.len() < 2 {
        return [0.0, 0.0];
    }
    let (a, b) = (c.points[0], c.points[1]);
    [b[0] - a[0], b[1] - a[1]]
}

/// Points of the fault polylines, shifted to the periodic image nearest `p`.
fn nearest_polyline(grid: &BaseGrid, curves: &[LevelCurve], p: [f64; 2]) -> Vec<[f64; 2]> {
    let mut best: Option<(f64, &LevelCurve)> = None;
    for c in curves {
        let d = c
            .points
            .iter()
            .map(|&q| grid.distance(p, q))
            .fold(f64::INFINITY, f64::min);
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, c));
        }
    }
    let Some((_, c)) = best else {
        return Vec::new();
    };
    let anchor = c
        .points
        .iter()
        .copied()
        .min_by(|a, b| grid.distance(p, *a).total_cmp(&grid.distance(p, *b)))
        .expect("nonempty");
    let d = grid.displacement(p, anchor);
    let shift = [p[0] + d[0] - anchor[0], p[1] + d[1] - anchor[1]];
    c.points
        .iter()
        .map(|q| [q[0] + shift[0], q[1] + shift[1]])
        .collect()
}
