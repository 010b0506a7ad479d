//! Command-line driver: validation of field bundles, transversalization runs,
//! model exports and manifest reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use tectonica::grid::{validate, BaseGrid, TectonicFieldGrid, ValidateOptions};
use tectonica::io::FieldBundle;
use tectonica::manifest::RunManifest;
use tectonica::registry::{extension_run, ModelParams, Registry, ScenarioParams, ScenarioRun};
use tectonica::transversalize::{ExtensionConfig, Region};
use tectonica::Error;

const EXIT_DOMAIN: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_CONVERGENCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "tectonica",
    version,
    about = "Tectonic fields and formal transversalization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a field bundle; exit 0 iff the report is empty.
    Validate {
        bundle: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        tol_jump: f64,
    },
    /// Run a scenario or a configured global extension.
    Transversalize {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        margin: Option<f64>,
        /// Output directory for manifest.json and field.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Export model curves as CSV and SVG.
    Models {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Summarize a run manifest.
    Report { manifest: PathBuf },
    /// List the named presets, scenarios and model families.
    List,
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
    /// Loci of the last attempt of a run that did not converge.
    loci: Vec<Vec<[f64; 2]>>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_parse() {
            EXIT_PARSE
        } else if e.is_convergence() {
            EXIT_CONVERGENCE
        } else {
            EXIT_DOMAIN
        };
        let loci = match e.root() {
            Error::Convergence { loci, .. } => loci.clone(),
            _ => Vec::new(),
        };
        Failure {
            code,
            message: e.to_string(),
            loci,
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn parse_failure(message: String) -> Failure {
    Failure {
        code: EXIT_PARSE,
        message,
        loci: Vec::new(),
    }
}

/// Where γ comes from.
#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum GammaSource {
    Preset(String),
    /// Field bundle whose plate forms are read as γ.
    Bundle(PathBuf),
}

/// Configuration of `transversalize`: either a named scenario, or γ with
/// optional ζ, grid and regions for a global extension.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransversalizeConfig {
    #[serde(default)]
    scenario: Option<String>,
    #[serde(default)]
    gamma: Option<GammaSource>,
    #[serde(default)]
    grid: Option<BaseGrid>,
    #[serde(default = "one")]
    n: usize,
    #[serde(default)]
    zeta: Option<PathBuf>,
    #[serde(default = "everywhere")]
    k1: Region,
    #[serde(default)]
    k2: Region,
    #[serde(default)]
    extension: ExtensionConfig,
    #[serde(default)]
    seed: Option<u64>,
}

fn one() -> usize {
    1
}

fn everywhere() -> Region {
    Region::Everywhere
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelsConfig {
    family: String,
    #[serde(flatten)]
    params: ModelParams,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| parse_failure(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| parse_failure(format!("{}: {e}", path.display())))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn read_field(path: &Path) -> CliResult<TectonicFieldGrid> {
    let bundle: FieldBundle = read_json(path)?;
    Ok(bundle.into_field()?)
}

fn cmd_validate(bundle: &Path, out: Option<&Path>, tol_jump: f64) -> CliResult<u8> {
    if !(tol_jump > 0.0) {
        return Err(Failure {
            code: EXIT_DOMAIN,
            message: "tol-jump must be positive".into(),
            loci: Vec::new(),
        });
    }
    let tf = read_field(bundle)?;
    let report = validate(
        &tf,
        &ValidateOptions {
            tol_jump,
            ..Default::default()
        },
    );
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(if report.is_empty() { 0 } else { EXIT_DOMAIN })
}

fn check_positive(name: &str, v: Option<f64>) -> CliResult<()> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(Failure {
            code: EXIT_DOMAIN,
            message: format!("--{name} must be positive"),
            loci: Vec::new(),
        }),
        _ => Ok(()),
    }
}

fn run_configured(
    reg: &Registry,
    path: &Path,
    cfg: TransversalizeConfig,
    params: &ScenarioParams,
) -> CliResult<ScenarioRun> {
    if let Some(name) = &cfg.scenario {
        if cfg.gamma.is_some() || cfg.zeta.is_some() || cfg.grid.is_some() {
            return Err(parse_failure(
                "a scenario takes no gamma, zeta or grid".into(),
            ));
        }
        return Ok(reg.scenario(name)?.run(params)?);
    }
    let Some(source) = &cfg.gamma else {
        return Err(parse_failure("config needs a scenario or a gamma".into()));
    };
    let zeta = match &cfg.zeta {
        Some(p) => Some(read_field(&resolve(path, p))?),
        None => None,
    };
    let mut manifest = RunManifest::new("transversalize");
    let gamma = match source {
        GammaSource::Preset(name) => {
            let grid = match (&cfg.grid, &zeta) {
                (Some(g), _) => g.clone(),
                (None, Some(z)) => z.grid.clone(),
                (None, None) => {
                    return Err(parse_failure(
                        "a gamma preset needs a grid or a zeta bundle".into(),
                    ))
                }
            };
            let n = zeta.as_ref().map_or(cfg.n, |z| z.n());
            if !(1..=6).contains(&n) {
                return Err(Failure {
                    code: EXIT_DOMAIN,
                    message: format!("n = {n} outside 1..=6"),
                    loci: Vec::new(),
                });
            }
            manifest = manifest.input("gamma", name)?;
            (grid.clone(), reg.gamma(name)?.sample(&grid, n))
        }
        GammaSource::Bundle(p) => {
            let f = read_field(&resolve(path, p))?;
            manifest = manifest.input("gamma", p)?;
            (f.grid.clone(), f.forms)
        }
    };
    let (grid, gamma) = gamma;
    let n = gamma.first().map_or(1, |g| g.dim());
    let zeta = match zeta {
        Some(z) => z,
        None => TectonicFieldGrid::zero(grid, n),
    };
    if zeta.len() != gamma.len() {
        return Err(Failure {
            code: EXIT_DOMAIN,
            message: "gamma and zeta live on different grids".into(),
            loci: Vec::new(),
        });
    }
    manifest = manifest
        .input("zeta_faults", zeta.faults.len())?
        .input("k1", &cfg.k1)?
        .input("k2", &cfg.k2)?;
    let mut ext = cfg.extension.clone();
    ext.step.seed = params.seed;
    if let Some(e) = params.eps {
        ext.step.eps_initial = e;
    }
    if let Some(r) = params.ratio {
        ext.step.ratio = r;
    }
    if let Some(m) = params.margin {
        ext.step.margin_target = m;
    }
    Ok(extension_run(
        &gamma, &zeta, &cfg.k1, &cfg.k2, &ext, manifest,
    )?)
}

fn cmd_transversalize(
    path: &Path,
    seed: Option<u64>,
    params: ScenarioParams,
    out: &Path,
) -> CliResult<u8> {
    check_positive("eps", params.eps)?;
    check_positive("ratio", params.ratio)?;
    if let Some(m) = params.margin {
        if !(m >= 0.0) {
            return Err(Failure {
                code: EXIT_DOMAIN,
                message: "--margin must be nonnegative".into(),
                loci: Vec::new(),
            });
        }
    }
    let cfg: TransversalizeConfig = read_json(path)?;
    let params = ScenarioParams {
        seed: seed.or(cfg.seed).unwrap_or(0),
        ..params
    };
    std::fs::create_dir_all(out)?;
    let reg = Registry::builtin();
    match run_configured(&reg, path, cfg.clone(), &params) {
        Ok(run) => {
            run.manifest.write(&out.join("manifest.json"))?;
            FieldBundle::from_field(&run.field).write(&out.join("field.json"))?;
            eprint!("{}", run.manifest.summary());
            Ok(if run.manifest.certified {
                0
            } else {
                EXIT_CONVERGENCE
            })
        }
        Err(f) if f.code == EXIT_CONVERGENCE => {
            let mut m = RunManifest::new("transversalize");
            m.scenario = cfg.scenario.clone();
            m.message = Some(f.message.clone());
            m.loci = f.loci.clone();
            m.write(&out.join("manifest.json"))?;
            Err(f)
        }
        Err(f) => Err(f),
    }
}

fn cmd_models(path: &Path, out: &Path) -> CliResult<u8> {
    let cfg: ModelsConfig = read_json(path)?;
    let files = Registry::builtin()
        .model(&cfg.family)?
        .export(&cfg.params)?;
    std::fs::create_dir_all(out)?;
    for f in &files {
        std::fs::write(out.join(&f.name), &f.contents)?;
        println!("{}", f.name);
    }
    Ok(0)
}

fn cmd_report(path: &Path) -> CliResult<u8> {
    let m: RunManifest = read_json(path)?;
    print!("{}", m.summary());
    Ok(0)
}

fn cmd_list() -> CliResult<u8> {
    let reg = Registry::builtin();
    println!("gamma presets:");
    for n in reg.gamma_names() {
        println!("  {n:<12} {}", reg.gamma(n)?.describe());
    }
    println!("scenarios:");
    for n in reg.scenario_names() {
        println!("  {n:<12} {}", reg.scenario(n)?.describe());
    }
    println!("model families:");
    for n in reg.model_names() {
        println!("  {n:<12} {}", reg.model(n)?.describe());
    }
    Ok(0)
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("TECTONICA_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        parse_failure(format!(
            "TECTONICA_THREADS must be a positive integer, got '{v}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure {
            code: EXIT_DOMAIN,
            message: e.to_string(),
            loci: Vec::new(),
        })
}

fn run(cli: Cli) -> CliResult<u8> {
    configure_threads()?;
    match cli.command {
        Command::Validate {
            bundle,
            out,
            tol_jump,
        } => cmd_validate(&bundle, out.as_deref(), tol_jump),
        Command::Transversalize {
            config,
            seed,
            eps,
            ratio,
            margin,
            out,
        } => cmd_transversalize(
            &config,
            seed,
            ScenarioParams {
                seed: 0,
                eps,
                ratio,
                margin,
            },
            &out,
        ),
        Command::Models { config, out } => cmd_models(&config, &out),
        Command::Report { manifest } => cmd_report(&manifest),
        Command::List => cmd_list(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_PARSE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
