//! Named strategies selected from configuration: γ presets, scripted
//! transversalization scenarios and exportable model families.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{min_abs_det, BaseGrid, CutoffProfile, Fault, TectonicFieldGrid, Topology};
use crate::manifest::RunManifest;
use crate::models::{
    curve_csv, curves_svg, earthquake_generating, model_ridge_pieces, ridge_piece_curve, sampling,
    signed_area_between, EarthquakeFault, GeneratingProfile, GraphOver, RidgyCurve, ViewBox,
};
use crate::symplectic::SymmetricForm;
use crate::transversalize::{
    global_extension, inductive_step, ExtensionConfig, InductiveStepConfig, Rank1Field, Region,
};

/// Field γ of symmetric forms sampled on a grid.
pub trait GammaPreset: Send + Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn sample(&self, grid: &BaseGrid, n: usize) -> Vec<SymmetricForm>;
}

struct ConstantIdentity;

impl GammaPreset for ConstantIdentity {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn describe(&self) -> &'static str {
        "identity form everywhere"
    }

    fn sample(&self, grid: &BaseGrid, n: usize) -> Vec<SymmetricForm> {
        vec![SymmetricForm::identity(n); grid.len()]
    }
}

fn diag_first(n: usize, first: f64) -> SymmetricForm {
    let mut d = vec![1.0; n];
    d[0] = first;
    SymmetricForm::diag(&d)
}

struct SinWave;

impl GammaPreset for SinWave {
    fn name(&self) -> &'static str {
        "sin-wave"
    }

    fn describe(&self) -> &'static str {
        "first diagonal entry sin(2πq₁/width), others 1"
    }

    fn sample(&self, grid: &BaseGrid, n: usize) -> Vec<SymmetricForm> {
        let [a, b] = grid.extent()[0];
        grid.sample(|x| diag_first(n, (TAU * (x[0] - a) / (b - a)).sin()))
    }
}

struct Radial;

impl GammaPreset for Radial {
    fn name(&self) -> &'static str {
        "radial"
    }

    fn describe(&self) -> &'static str {
        "first diagonal entry |q|² − ¼, others 1"
    }

    fn sample(&self, grid: &BaseGrid, n: usize) -> Vec<SymmetricForm> {
        grid.sample(|x| diag_first(n, x[0] * x[0] + x[1] * x[1] - 0.25))
    }
}

/// Overrides shared by all scenarios.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub seed: u64,
    pub eps: Option<f64>,
    pub ratio: Option<f64>,
    pub margin: Option<f64>,
}

impl ScenarioParams {
    fn step(&self, eps: f64, ratio: f64) -> InductiveStepConfig {
        InductiveStepConfig {
            eps_initial: self.eps.unwrap_or(eps),
            ratio: self.ratio.unwrap_or(ratio),
            margin_target: self.margin.unwrap_or(0.0),
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub field: TectonicFieldGrid,
    pub manifest: RunManifest,
}

/// Scripted run of the transversalization algorithm.
pub trait Scenario: Send + Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn run(&self, params: &ScenarioParams) -> Result<ScenarioRun>;
}

/// Global extension of ζ to a field transverse to γ, recorded in a manifest.
pub fn extension_run(
    gamma: &[SymmetricForm],
    zeta: &TectonicFieldGrid,
    k1: &Region,
    k2: &Region,
    cfg: &ExtensionConfig,
    mut manifest: RunManifest,
) -> Result<ScenarioRun> {
    manifest.config = serde_json::to_value(cfg)?;
    let out = global_extension(gamma, zeta, k1, k2, cfg)?;
    manifest.certificate = out.certificate;
    manifest.location = out.location;
    manifest.certified = out.certificate > cfg.step.margin_target;
    manifest.c0_norm = out.c0_norm;
    manifest.balls = out.balls;
    manifest.describe_field(&out.field);
    Ok(ScenarioRun {
        field: out.field,
        manifest,
    })
}

fn step_run(
    lambda: &[SymmetricForm],
    eta: &Rank1Field,
    tf: &TectonicFieldGrid,
    cfg: &InductiveStepConfig,
    mut manifest: RunManifest,
) -> Result<ScenarioRun> {
    manifest.config = serde_json::to_value(cfg)?;
    let out = inductive_step(lambda, eta, tf, cfg)?;
    let c = &out.certificate;
    manifest.certificate = c.min_abs_det;
    manifest.location = c.location;
    manifest.certified = c.min_abs_det > cfg.margin_target;
    manifest.c0_norm = c.c0_norm;
    manifest.steps.push(out.certificate);
    manifest.describe_field(&out.field);
    Ok(ScenarioRun {
        field: out.field,
        manifest,
    })
}

fn tagged(name: &str, mut m: RunManifest) -> RunManifest {
    m.scenario = Some(name.into());
    m
}

struct Step1d;

impl Scenario for Step1d {
    fn name(&self) -> &'static str {
        "step-1d"
    }

    fn describe(&self) -> &'static str {
        "one rank-1 step on [-1, 1], 512 samples: λ = 0, ζ = 0, η = q·[1]"
    }

    fn run(&self, params: &ScenarioParams) -> Result<ScenarioRun> {
        let g = BaseGrid::interval(-1.0, 1.0, 512)?;
        let tf = TectonicFieldGrid::zero(g.clone(), 1);
        let lambda = vec![SymmetricForm::zeros(1); g.len()];
        let eta = Rank1Field::with_constant_ell(g.sample(|x| x[0]), &[1.0]);
        let cfg = params.step(0.1, 0.125);
        let manifest = RunManifest::new("transversalize").input("params", params)?;
        step_run(&lambda, &eta, &tf, &cfg, tagged(self.name(), manifest))
    }
}

struct SinCircle;

impl Scenario for SinCircle {
    fn name(&self) -> &'static str {
        "sin-circle"
    }

    fn describe(&self) -> &'static str {
        "global extension on a 1024-sample circle: γ = sin(2πq), ζ = 0"
    }

    fn run(&self, params: &ScenarioParams) -> Result<ScenarioRun> {
        let g = BaseGrid::circle(0.0, 1.0, 1024)?;
        let gamma = SinWave.sample(&g, 1);
        let zeta = TectonicFieldGrid::zero(g, 1);
        let cfg = ExtensionConfig {
            step: params.step(0.02, 0.125),
            ..Default::default()
        };
        let manifest = RunManifest::new("transversalize")
            .input("params", params)?
            .input("gamma", "sin-wave")?;
        extension_run(
            &gamma,
            &zeta,
            &Region::Everywhere,
            &Region::Nowhere,
            &cfg,
            tagged(self.name(), manifest),
        )
    }
}

/// The fault N = {q₁ = 0} with ℓ_N = (½, ½) on [−1, 1]², 256², and the
/// plate forms 0 on q₁ < 0 and ℓ_Nℓ_Nᵀ + diag(0, −⅔q₁) on q₁ > 0.
pub fn s_curve_field() -> Result<TectonicFieldGrid> {
    let g = BaseGrid::square(Topology::Bounded, -1.0, 1.0, 256)?;
    let ln = [0.5, 0.5];
    let fault = Fault {
        id: 0,
        phi: g.sample(|x| x[0]),
        ell: ln.iter().copied().cycle().take(2 * g.len()).collect(),
    };
    let forms = g.sample(|x| {
        if x[0] > 0.0 {
            &SymmetricForm::outer(1.0, &ln) + &SymmetricForm::diag(&[0.0, -2.0 / 3.0 * x[0]])
        } else {
            SymmetricForm::zeros(2)
        }
    });
    TectonicFieldGrid::new(g, 2, vec![fault], forms)
}

struct SCurve;

impl Scenario for SCurve {
    fn name(&self) -> &'static str {
        "s-curve"
    }

    fn describe(&self) -> &'static str {
        "one step across an existing fault: λ = I, η = (q₂ − 1)·e₂ on [-1, 1]², 256²; needs surgery"
    }

    fn run(&self, params: &ScenarioParams) -> Result<ScenarioRun> {
        let tf = s_curve_field()?;
        let g = &tf.grid;
        let lambda = vec![SymmetricForm::identity(2); g.len()];
        let eta = Rank1Field::with_constant_ell(g.sample(|x| x[1] - 1.0), &[0.0, 1.0]);
        let cfg = params.step(0.2, 0.25);
        let manifest = RunManifest::new("transversalize").input("params", params)?;
        step_run(&lambda, &eta, &tf, &cfg, tagged(self.name(), manifest))
    }
}

struct IdentityCircle;

impl Scenario for IdentityCircle {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn describe(&self) -> &'static str {
        "γ = identity on a 256-sample circle, ζ = 0: already transverse"
    }

    fn run(&self, params: &ScenarioParams) -> Result<ScenarioRun> {
        let g = BaseGrid::circle(0.0, 1.0, 256)?;
        let gamma = ConstantIdentity.sample(&g, 1);
        let zeta = TectonicFieldGrid::zero(g.clone(), 1);
        let cfg = ExtensionConfig {
            step: params.step(0.02, 0.125),
            ..Default::default()
        };
        debug_assert!(min_abs_det(&zeta, &gamma).value > 0.0);
        let manifest = RunManifest::new("transversalize")
            .input("params", params)?
            .input("gamma", "constant")?;
        extension_run(
            &gamma,
            &zeta,
            &Region::Everywhere,
            &Region::Nowhere,
            &cfg,
            tagged(self.name(), manifest),
        )
    }
}

/// Parameters of the model exports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub eps: Vec<f64>,
    pub t: Vec<f64>,
    pub k: usize,
    pub n: usize,
    pub samples: usize,
    pub reach: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            eps: vec![0.0, 0.1],
            t: vec![0.0, 0.5, 1.0],
            k: 2,
            n: 2,
            samples: 201,
            reach: 1.0,
        }
    }
}

impl ModelParams {
    fn check(&self) -> Result<()> {
        if self.samples < 3 {
            return Err(Error::Input("samples must be at least 3".into()));
        }
        if !(self.reach > 0.0 && self.reach.is_finite()) {
            return Err(Error::Input("reach must be positive".into()));
        }
        if let Some(e) = self.eps.iter().find(|e| !(**e >= 0.0 && **e <= 0.5)) {
            return Err(Error::Input(format!("eps {e} outside [0, 0.5]")));
        }
        if let Some(t) = self.t.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::Input(format!("time {t} must be non-negative")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExportFile {
    pub name: String,
    pub contents: String,
}

/// Family of model curves exported as CSV and SVG.
pub trait ModelFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn export(&self, params: &ModelParams) -> Result<Vec<ExportFile>>;
}

fn profile_family(
    prefix: &str,
    params: &ModelParams,
    make: impl Fn(f64) -> GeneratingProfile,
) -> Result<Vec<ExportFile>> {
    params.check()?;
    let curves: Vec<(f64, RidgyCurve)> = params
        .eps
        .iter()
        .map(|&e| {
            let prof = make(e);
            (
                e,
                RidgyCurve::from_profile(&prof, sampling(-0.5, 0.5, params.samples, &prof.knots())),
            )
        })
        .collect();
    let mut files: Vec<ExportFile> = curves
        .iter()
        .map(|(e, c)| ExportFile {
            name: format!("{prefix}-eps{e}.csv"),
            contents: curve_csv(c),
        })
        .collect();
    // Signed areas against the first curve on a shared fine sampling.
    if let Some((e0, _)) = curves.first() {
        let mut knots: Vec<f64> = params.eps.iter().flat_map(|&e| make(e).knots()).collect();
        knots.sort_by(f64::total_cmp);
        let fine = sampling(-0.5, 0.5, 20 * params.samples, &knots);
        let base = RidgyCurve::from_profile(&make(*e0), fine.clone());
        let mut csv = String::from("eps,signed_area\n");
        for &e in &params.eps {
            let c = RidgyCurve::from_profile(&make(e), fine.clone());
            let a = signed_area_between(&c, &base, [-0.5, 0.5])?;
            csv += &format!("{e},{a}\n");
        }
        files.push(ExportFile {
            name: format!("{prefix}-areas.csv"),
            contents: csv,
        });
    }
    let refs: Vec<&RidgyCurve> = curves.iter().map(|(_, c)| c).collect();
    if !refs.is_empty() {
        files.push(ExportFile {
            name: format!("{prefix}.svg"),
            contents: curves_svg(&refs, &ViewBox::around(&refs)),
        });
    }
    Ok(files)
}

struct FoldRidge;

impl ModelFamily for FoldRidge {
    fn name(&self) -> &'static str {
        "fold-ridge"
    }

    fn describe(&self) -> &'static str {
        "fold to ridge interpolation q = φ_ε′(p), one curve per ε"
    }

    fn export(&self, params: &ModelParams) -> Result<Vec<ExportFile>> {
        profile_family("fold-ridge", params, |eps| GeneratingProfile::Fold { eps })
    }
}

struct CuspRidge;

impl ModelFamily for CuspRidge {
    fn name(&self) -> &'static str {
        "cusp-ridge"
    }

    fn describe(&self) -> &'static str {
        "cusp to ridge interpolation, one curve per ε"
    }

    fn export(&self, params: &ModelParams) -> Result<Vec<ExportFile>> {
        profile_family("cusp-ridge", params, |eps| GeneratingProfile::Cusp { eps })
    }
}

struct EarthquakeFrames;

impl ModelFamily for EarthquakeFrames {
    fn name(&self) -> &'static str {
        "earthquake"
    }

    fn describe(&self) -> &'static str {
        "frames p = t·dΦ(q) of the earthquake on [-1, 1] with fault q = 0"
    }

    fn export(&self, params: &ModelParams) -> Result<Vec<ExportFile>> {
        params.check()?;
        let g = BaseGrid::interval(-1.0, 1.0, params.samples.max(16))?;
        let fault = EarthquakeFault {
            phi: g.sample(|x| x[0]),
            theta: CutoffProfile::theta(0.5)?,
        };
        let q: Vec<f64> = (0..g.len()).map(|i| g.coords(i)[0]).collect();
        let mut curves = Vec::new();
        for &t in &params.t {
            let eq = earthquake_generating(&g, std::slice::from_ref(&fault), t)?;
            let mut c = RidgyCurve::from_fn(GraphOver::Q, q.clone(), |_| 0.0);
            c.value = eq.dphi.iter().map(|d| d[0]).collect();
            curves.push((t, c));
        }
        let mut files: Vec<ExportFile> = curves
            .iter()
            .map(|(t, c)| ExportFile {
                name: format!("earthquake-t{t}.csv"),
                contents: curve_csv(c),
            })
            .collect();
        let refs: Vec<&RidgyCurve> = curves.iter().map(|(_, c)| c).collect();
        if !refs.is_empty() {
            files.push(ExportFile {
                name: "earthquake.svg".into(),
                contents: curves_svg(&refs, &ViewBox::around(&refs)),
            });
        }
        Ok(files)
    }
}

/// "I=" names the empty index set; spell it out in file names.
fn file_label(label: &str) -> String {
    if label == "I=" {
        "I=none".into()
    } else {
        label.into()
    }
}

struct ModelRidgeFamily;

impl ModelFamily for ModelRidgeFamily {
    fn name(&self) -> &'static str {
        "model-ridge"
    }

    fn describe(&self) -> &'static str {
        "pieces of the model ridge R_{k,n}, one file per piece"
    }

    fn export(&self, params: &ModelParams) -> Result<Vec<ExportFile>> {
        params.check()?;
        if !(1..=6).contains(&params.n) {
            return Err(Error::Input(format!("n = {} outside 1..=6", params.n)));
        }
        let m = model_ridge_pieces(params.k, params.n)?;
        let mut files = Vec::new();
        for (i, piece) in m.pieces.iter().enumerate() {
            let mut csv = format!("# {}\nj,p,q,ridge_marker\n", serde_json::to_string(piece)?);
            for j in 0..m.k {
                let c = ridge_piece_curve(&m, i, j, params.reach, params.samples);
                for line in curve_csv(&c).lines().skip(1) {
                    csv += &format!("{j},{line}\n");
                }
            }
            files.push(ExportFile {
                name: format!(
                    "model-ridge-k{}-n{}-{}.csv",
                    m.k,
                    m.n,
                    file_label(&piece.label())
                ),
                contents: csv,
            });
        }
        Ok(files)
    }
}

/// Strategies by name.
pub struct Registry {
    gammas: BTreeMap<&'static str, Box<dyn GammaPreset>>,
    scenarios: BTreeMap<&'static str, Box<dyn Scenario>>,
    models: BTreeMap<&'static str, Box<dyn ModelFamily>>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

fn lookup<'a, T: ?Sized>(
    map: &'a BTreeMap<&'static str, Box<T>>,
    kind: &str,
    name: &str,
) -> Result<&'a T> {
    map.get(name).map(|b| &**b).ok_or_else(|| {
        let known: Vec<&str> = map.keys().copied().collect();
        Error::Input(format!(
            "unknown {kind} '{name}'; known: {}",
            known.join(", ")
        ))
    })
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            gammas: BTreeMap::new(),
            scenarios: BTreeMap::new(),
            models: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register_gamma(Box::new(ConstantIdentity));
        r.register_gamma(Box::new(SinWave));
        r.register_gamma(Box::new(Radial));
        r.register_scenario(Box::new(Step1d));
        r.register_scenario(Box::new(SinCircle));
        r.register_scenario(Box::new(SCurve));
        r.register_scenario(Box::new(IdentityCircle));
        r.register_model(Box::new(FoldRidge));
        r.register_model(Box::new(CuspRidge));
        r.register_model(Box::new(EarthquakeFrames));
        r.register_model(Box::new(ModelRidgeFamily));
        r
    }

    pub fn register_gamma(&mut self, g: Box<dyn GammaPreset>) {
        self.gammas.insert(g.name(), g);
    }

    pub fn register_scenario(&mut self, s: Box<dyn Scenario>) {
        self.scenarios.insert(s.name(), s);
    }

    pub fn register_model(&mut self, m: Box<dyn ModelFamily>) {
        self.models.insert(m.name(), m);
    }

    pub fn gamma(&self, name: &str) -> Result<&dyn GammaPreset> {
        lookup(&self.gammas, "gamma preset", name)
    }

    pub fn scenario(&self, name: &str) -> Result<&dyn Scenario> {
        lookup(&self.scenarios, "scenario", name)
    }

    pub fn model(&self, name: &str) -> Result<&dyn ModelFamily> {
        lookup(&self.models, "model family", name)
    }

    pub fn gamma_names(&self) -> Vec<&'static str> {
        self.gammas.keys().copied().collect()
    }

    pub fn scenario_names(&self) -> Vec<&'static str> {
        self.scenarios.keys().copied().collect()
    }

    pub fn model_names(&self) -> Vec<&'static str> {
        self.models.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names() {
        let r = Registry::builtin();
        assert_eq!(r.gamma_names(), ["constant", "radial", "sin-wave"]);
        assert_eq!(
            r.scenario_names(),
            ["identity", "s-curve", "sin-circle", "step-1d"]
        );
        assert_eq!(
            r.model_names(),
            ["cusp-ridge", "earthquake", "fold-ridge", "model-ridge"]
        );
        assert!(matches!(r.scenario("nope"), Err(Error::Input(_))));
    }

    #[test]
    fn identity_needs_no_faults() {
        let run = Registry::builtin()
            .scenario("identity")
            .unwrap()
            .run(&ScenarioParams::default())
            .unwrap();
        assert!(run.manifest.certified);
        assert_eq!(run.manifest.faults, 0);
        assert!(run.manifest.balls.is_empty());
    }

    #[test]
    fn fold_family_has_zero_area() {
        let files = Registry::builtin()
            .model("fold-ridge")
            .unwrap()
            .export(&ModelParams::default())
            .unwrap();
        let names: Vec<&str> = files.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "fold-ridge-eps0.csv",
                "fold-ridge-eps0.1.csv",
                "fold-ridge-areas.csv",
                "fold-ridge.svg"
            ]
        );
        for line in files[2].contents.lines().skip(1) {
            let a: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!(a.abs() <= 1e-8, "{line}");
        }
    }

    #[test]
    fn earthquake_starts_at_zero_section() {
        let files = Registry::builtin()
            .model("earthquake")
            .unwrap()
            .export(&ModelParams::default())
            .unwrap();
        assert_eq!(files.len(), 4);
        assert!(files[0]
            .contents
            .lines()
            .skip(1)
            .all(|l| l.split(',').next() == Some("0")));
    }

    #[test]
    fn model_ridge_two_two_has_four_pieces() {
        let files = Registry::builtin()
            .model("model-ridge")
            .unwrap()
            .export(&ModelParams::default())
            .unwrap();
        let names: Vec<&str> = files.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names.len(), 4);
        for l in ["I=none", "I=1", "I=2", "I=12"] {
            assert!(
                names.contains(&format!("model-ridge-k2-n2-{l}.csv").as_str()),
                "{names:?}"
            );
        }
    }

    #[test]
    fn out_of_range_parameters_fail() {
        let p = ModelParams {
            eps: vec![-0.1],
            ..Default::default()
        };
        assert!(Registry::builtin()
            .model("fold-ridge")
            .unwrap()
            .export(&p)
            .is_err());
    }
}
