//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a non-zero status if any criterion fails.

use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tectonica::grid::{
    jump_profile, validate, BaseGrid, CutoffProfile, TectonicFieldGrid, Topology, ValidateOptions,
};
use tectonica::models::{
    earthquake_tectonic_field, fold_to_ridge, sampling, signed_area_between, transversality_margin,
    EarthquakeFault, GeneratingProfile, RidgyCurve,
};
use tectonica::rank1::decompose;
use tectonica::registry::{Registry, ScenarioParams, ScenarioRun};
use tectonica::symplectic::{
    maps_planes, ordered_ridge_isomorphism, vertical_shear, FormalRidge, Rank1Form, SymmetricForm,
};
use tectonica::transversalize::trace_zero_set;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymmetricForm {
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-scale..scale);
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    SymmetricForm::from_rows(&rows).unwrap()
}

fn omega(n: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        w[(i, n + i)] = 1.0;
        w[(n + i, i)] = -1.0;
    }
    w
}

fn symplectic_defect(m: &DMatrix<f64>) -> f64 {
    let w = omega(m.nrows() / 2);
    (m.transpose() * &w * m - &w).amax()
}

fn run_scenario(name: &str) -> ScenarioRun {
    Registry::builtin()
        .scenario(name)
        .unwrap()
        .run(&ScenarioParams::default())
        .unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let n = 1 + k % 6;
        let s = random_symmetric(&mut rng, n, 10.0);
        let d = decompose(&s);
        let mut r = vec![vec![0.0; n]; n];
        for t in &d.terms {
            for i in 0..n {
                for j in 0..n {
                    r[i][j] += t.alpha * t.ell[i] * t.ell[j];
                }
            }
        }
        let mut err: f64 = 0.0;
        for (i, row) in r.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                err = err.max((v - s.get(i, j)).abs());
            }
        }
        worst = worst.max(err / s.max_abs().max(f64::MIN_POSITIVE));
    }
    outcome(
        worst <= 1e-12,
        format!("max relative recomposition error {worst:.2e}"),
    )
}

fn random_normalized_ridge(rng: &mut ChaCha8Rng, n: usize, k: usize) -> FormalRidge {
    let jumps = (0..k)
        .map(|j| {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let alpha = sign * rng.gen_range(0.2..5.0);
            let mut ell = vec![0.0; n];
            ell[j] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(0.5..2.0);
            Rank1Form::new(alpha, ell).unwrap()
        })
        .collect();
    FormalRidge::new(SymmetricForm::zeros(n), jumps).unwrap()
}

/// Graph of the plane with index set `mask`, built from the jumps directly.
fn plane(r: &FormalRidge, mask: usize) -> DMatrix<f64> {
    let n = r.dim();
    let mut s = DMatrix::zeros(n, n);
    for (j, mu) in r.jumps().iter().enumerate() {
        if mask & (1 << j) != 0 {
            for a in 0..n {
                for b in 0..n {
                    s[(a, b)] += mu.alpha * mu.ell[a] * mu.ell[b];
                }
            }
        }
    }
    s
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut sym: f64 = 0.0;
    let mut plane_err: f64 = 0.0;
    let mut flagged = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=4);
        let b = random_symmetric(&mut rng, n, 3.0);
        sym = sym.max(symplectic_defect(vertical_shear(&b).matrix()));
        let k = rng.gen_range(0..=n);
        let r1 = random_normalized_ridge(&mut rng, n, k);
        let r2 = random_normalized_ridge(&mut rng, n, k);
        let iso = ordered_ridge_isomorphism(&r1, &r2).unwrap();
        let m = iso.matrix();
        sym = sym.max(symplectic_defect(m));
        if !maps_planes(&iso, &r1, &r2) {
            flagged += 1;
        }
        for mask in 0..(1usize << k) {
            let s1 = plane(&r1, mask);
            let s2 = plane(&r2, mask);
            let mut frame = DMatrix::zeros(2 * n, n);
            frame
                .view_mut((0, 0), (n, n))
                .copy_from(&DMatrix::identity(n, n));
            frame.view_mut((n, 0), (n, n)).copy_from(&s1);
            let image = m * frame;
            let x = image.rows(0, n).into_owned();
            let y = image.rows(n, n).into_owned();
            let scale = 1.0 + s2.amax() * x.amax();
            plane_err = plane_err.max((y - &s2 * x).amax() / scale);
        }
    }
    outcome(
        sym <= 1e-10 && plane_err <= 1e-10 && flagged == 0,
        format!("max |MᵀΩM − Ω| {sym:.2e}, max plane residual {plane_err:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let run = run_scenario("step-1d");
    let c = &run.manifest.steps[0];
    let eps = c.eps[0];
    let g = &run.field.grid;
    // Samples, plus both one-sided limits at the fault q = 0.
    let mut scan = eps;
    for i in 0..g.len() {
        let q = g.coords(i)[0];
        scan = scan.min((q + jump_profile(eps, q).unwrap()).abs());
    }
    let dev = (c.min_abs_det - scan).abs();
    outcome(
        c.min_abs_det >= 0.9 * eps && scan >= 0.9 * eps && dev <= 1e-12,
        format!(
            "certificate {:.6} vs scan {scan:.6} (ε₁ = {eps}), deviation {dev:.1e}",
            c.min_abs_det
        ),
    )
}

fn criterion_4() -> Outcome {
    let run = run_scenario("sin-circle");
    let eps1 = 0.02;
    let tf = &run.field;
    let g = &tf.grid;
    let gamma = |x: f64| (TAU * x).sin();
    let zeta = |i: usize| tf.forms[i].get(0, 0);
    let mut scan = f64::INFINITY;
    for i in 0..g.len() {
        scan = scan.min((gamma(g.coords(i)[0]) - zeta(i)).abs());
    }
    // Inside a plate ζ̂ is interpolated along the edge. Across a fault each
    // side keeps its own form up to the crossing, which is included.
    for (a, b, _) in g.edges() {
        let xa = g.coords(a)[0];
        let d = g.displacement(g.coords(a), g.coords(b))[0];
        let cut = tf
            .faults
            .iter()
            .find(|f| (f.phi[a] > 0.0) != (f.phi[b] > 0.0))
            .map(|f| f.phi[a] / (f.phi[a] - f.phi[b]));
        let mut probes: Vec<f64> = (1..64).map(|s| s as f64 / 64.0).collect();
        probes.extend(cut);
        for s in probes {
            let x = gamma(xa + d * s);
            let v = match cut {
                None => (x - (1.0 - s) * zeta(a) - s * zeta(b)).abs(),
                Some(c) if s < c => (x - zeta(a)).abs(),
                Some(c) if s > c => (x - zeta(b)).abs(),
                Some(_) => (x - zeta(a)).abs().min((x - zeta(b)).abs()),
            };
            scan = scan.min(v);
        }
    }
    let c0 = tf
        .forms
        .iter()
        .map(SymmetricForm::max_abs)
        .fold(0.0, f64::max);
    outcome(
        run.manifest.certified
            && run.manifest.certificate > 0.0
            && scan > 0.0
            && run.manifest.certificate <= scan + 1e-12
            && c0 <= 2.0 * eps1,
        format!(
            "certificate {:.4e}, scan {scan:.4e}, sup |ζ̂| {c0:.4} (bound {})",
            run.manifest.certificate,
            2.0 * eps1
        ),
    )
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0)
    };
    (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
}

fn criterion_5() -> Outcome {
    let g = BaseGrid::square(Topology::Periodic, -1.0, 1.0, 256).unwrap();
    let h = g.h();
    let det = g.sample(|x| x[0] * x[0] + x[1] * x[1] - 0.25);
    let curves = trace_zero_set(&g, &det);
    let points: Vec<[f64; 2]> = curves
        .iter()
        .flat_map(|c| c.points.iter().copied())
        .collect();
    let to_circle = points
        .iter()
        .map(|p| (p[0].hypot(p[1]) - 0.5).abs())
        .fold(0.0, f64::max);
    let segments: Vec<([f64; 2], [f64; 2])> = curves.iter().flat_map(|c| c.segments()).collect();
    let from_circle = (0..4096)
        .map(|k| {
            let a = TAU * k as f64 / 4096.0;
            let p = [0.5 * a.cos(), 0.5 * a.sin()];
            segments
                .iter()
                .map(|&(s, e)| segment_distance(p, s, e))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let hd = to_circle.max(from_circle);
    let closed = curves.len() == 1 && curves[0].closed;
    outcome(
        closed && hd <= 1.5 * h,
        format!(
            "{} curve(s), Hausdorff distance {hd:.3e} = {:.3}h",
            curves.len(),
            hd / h
        ),
    )
}

fn criterion_6() -> Outcome {
    let run = run_scenario("s-curve");
    let tf = &run.field;
    let g = &tf.grid;
    let surgeries = &run.manifest.steps[0].surgeries;
    let opposite =
        !surgeries.is_empty() && surgeries.iter().all(|s| s.offsets[0] * s.offsets[1] < 0.0);
    // λ + η = diag(1, q₂) against the forms of every plate meeting a cell,
    // on a 3×3 lattice of points per cell.
    let det_at = |x: [f64; 2], z: &SymmetricForm| {
        let a = 1.0 - z.get(0, 0);
        let d = x[1] - z.get(1, 1);
        let b = z.get(0, 1);
        (a * d - b * b).abs()
    };
    let mut scan = f64::INFINITY;
    for i in 0..g.len() {
        scan = scan.min(det_at(g.coords(i), &tf.forms[i]));
    }
    let (hx, hy) = (g.spacing(0), g.spacing(1));
    for c in g.cells() {
        let mut labels: Vec<usize> = c.iter().map(|&i| tf.labels[i]).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() < 2 {
            continue;
        }
        let x0 = g.coords(c[0]);
        for sx in 0..3 {
            for sy in 0..3 {
                let x = [x0[0] + 0.5 * sx as f64 * hx, x0[1] + 0.5 * sy as f64 * hy];
                for &k in &c {
                    scan = scan.min(det_at(x, &tf.forms[k]));
                }
            }
        }
    }
    outcome(
        run.manifest.certified
            && opposite
            && scan > 0.0
            && run.manifest.certificate <= scan + 1e-12,
        format!(
            "{} surgery(ies), offsets {:?}, certificate {:.4e}, one-sided scan {scan:.4e}",
            surgeries.len(),
            surgeries.iter().map(|s| s.offsets).collect::<Vec<_>>(),
            run.manifest.certificate
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for eps in [0.05, 0.1, 0.2] {
        let fold = GeneratingProfile::Fold { eps: 0.0 };
        let ridge = GeneratingProfile::Fold { eps };
        let fine = sampling(-0.5, 0.5, 200_001, &ridge.knots());
        let area = signed_area_between(
            &RidgyCurve::from_profile(&ridge, fine.clone()),
            &RidgyCurve::from_profile(&fold, fine),
            [-0.5, 0.5],
        )
        .unwrap();
        let exact = (ridge.value(0.5) - ridge.value(-0.5)) - (fold.value(0.5) - fold.value(-0.5));
        let curve = RidgyCurve::from_profile(&ridge, sampling(-0.5, 0.5, 2001, &ridge.knots()));
        let margin = transversality_margin(&curve);
        let bound = eps / (1.0 + eps * eps).sqrt() - 1e-10;
        let mut pieces = true;
        for k in 0..=1000 {
            let p = -0.5 + k as f64 / 1000.0;
            let q = fold_to_ridge(eps, p);
            if p.abs() <= eps / 2.0 && q != eps * p.abs() {
                pieces = false;
            }
            if p.abs() >= eps && q != p * p {
                pieces = false;
            }
        }
        let ok = area.abs() <= 1e-8 && exact.abs() <= 1e-8 && margin >= bound && pieces;
        pass &= ok;
        notes.push(format!(
            "ε={eps}: area {area:.1e}/{exact:.1e}, margin {margin:.4} vs {bound:.4}, pieces {}",
            if pieces { "exact" } else { "inexact" }
        ));
    }
    outcome(pass, notes.join("; "))
}

/// Value at 0 of the quadratic through (x_k, y_k).
fn extrapolate(x: [f64; 3], y: [f64; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let w: f64 = (0..3)
                .filter(|&m| m != k)
                .map(|m| x[m] / (x[m] - x[k]))
                .product();
            w * y[k]
        })
        .sum()
}

/// Largest deviation of the one-sided Hessian jump from 2t·dφ·dφᵀ, each side
/// extrapolated quadratically along the crossing edge from three samples.
fn hessian_jump_defect(
    tf: &TectonicFieldGrid,
    grad: impl Fn([f64; 2]) -> [f64; 2],
    phi: &[f64],
    t: f64,
) -> (f64, usize) {
    let g = &tf.grid;
    let n = g.dim();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    // The samples 1 and 2 steps past `i`, moving away from `from`.
    let ray = |i: usize, from: usize, axis: usize| -> Option<[usize; 2]> {
        let m = g.multi(i);
        let r = g.resolution()[axis] as isize;
        let mut delta = m[axis] as isize - g.multi(from)[axis] as isize;
        if delta.abs() > 1 {
            delta = -delta.signum();
        }
        let mut out = [0; 2];
        for (k, o) in out.iter_mut().enumerate() {
            let mut next = m[axis] as isize + delta * (k as isize + 1);
            if g.topology()[axis] == Topology::Periodic {
                next = next.rem_euclid(r);
            } else if next < 0 || next >= r {
                return None;
            }
            let mut mm = m;
            mm[axis] = next as usize;
            *o = g.index(mm);
        }
        Some(out)
    };
    for (a, b, axis) in g.edges() {
        if (phi[a] > 0.0) == (phi[b] > 0.0) {
            continue;
        }
        let (minus, plus) = if phi[a] > 0.0 { (b, a) } else { (a, b) };
        let (Some(ms), Some(ps)) = (ray(minus, plus, axis), ray(plus, minus, axis)) else {
            continue;
        };
        let same = |side: usize, s: [usize; 2]| s.iter().all(|&k| tf.labels[k] == tf.labels[side]);
        if !same(minus, ms) || !same(plus, ps) {
            continue;
        }
        let s = phi[minus] / (phi[minus] - phi[plus]);
        let (xa, xb) = (g.coords(minus), g.coords(plus));
        let d = g.displacement(xa, xb);
        let dg = grad([xa[0] + s * d[0], xa[1] + s * d[1]]);
        for i in 0..n {
            for j in 0..n {
                let f = |k: usize| tf.forms[k].get(i, j);
                let lm = extrapolate([-s, -s - 1.0, -s - 2.0], [f(minus), f(ms[0]), f(ms[1])]);
                let lp = extrapolate([1.0 - s, 2.0 - s, 3.0 - s], [f(plus), f(ps[0]), f(ps[1])]);
                worst = worst.max((lp - lm - 2.0 * t * dg[i] * dg[j]).abs());
            }
        }
        checked += 1;
    }
    (worst, checked)
}

fn criterion_8() -> Outcome {
    let t = 1.0;
    let theta = CutoffProfile::theta(0.5).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();

    let g1 = BaseGrid::interval(-1.0, 1.0, 512).unwrap();
    let phi1 = g1.sample(|x| x[0] - 0.1);
    let g2 = BaseGrid::new(
        vec![Topology::Bounded, Topology::Periodic],
        vec![[-1.0, 1.0], [-1.0, 1.0]],
        vec![128, 128],
    )
    .unwrap();
    let phi2 = g2.sample(|x| x[0] - 0.3 * (PI * x[1]).sin() + 0.1);
    let cases: [(
        &str,
        &BaseGrid,
        &Vec<f64>,
        Box<dyn Fn([f64; 2]) -> [f64; 2]>,
    ); 2] = [
        ("1D", &g1, &phi1, Box::new(|_| [1.0, 0.0])),
        (
            "2D",
            &g2,
            &phi2,
            Box::new(|x| [1.0, -0.3 * PI * (PI * x[1]).cos()]),
        ),
    ];
    for (label, g, phi, grad) in cases {
        let fault = EarthquakeFault {
            phi: phi.clone(),
            theta,
        };
        let tf = earthquake_tectonic_field(g, &[fault], t).unwrap();
        let tol = 10.0 * g.h() * g.h();
        let report = validate(
            &tf,
            &ValidateOptions {
                tol_jump: tol,
                ..Default::default()
            },
        );
        let (defect, checked) = hessian_jump_defect(&tf, grad, phi, t);
        let ok = report.is_empty() && report.checked_crossings > 0 && checked > 0 && defect <= tol;
        pass &= ok;
        notes.push(format!(
            "{label}: {} violation(s), validate defect {:.2e}, Hessian jump defect {defect:.2e} (tol {tol:.2e})",
            report.violations.len(),
            report.max_jump_defect
        ));
    }
    outcome(pass, notes.join("; "))
}

fn criterion_9() -> Outcome {
    let mut mismatched = Vec::new();
    let registry = Registry::builtin();
    for name in ["step-1d", "sin-circle", "s-curve"] {
        let params = ScenarioParams {
            seed: 7,
            ..Default::default()
        };
        let s = registry.scenario(name).unwrap();
        let first = s.run(&params).unwrap().manifest.to_json().unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let second = pool
            .install(|| s.run(&params))
            .unwrap()
            .manifest
            .to_json()
            .unwrap();
        if first != second {
            mismatched.push(name);
        }
    }
    let g = BaseGrid::square(Topology::Periodic, -1.0, 1.0, 256).unwrap();
    let det = g.sample(|x| x[0] * x[0] + x[1] * x[1] - 0.25);
    let a = serde_json::to_string(&trace_zero_set(&g, &det)).unwrap();
    let b = serde_json::to_string(&trace_zero_set(&g, &det)).unwrap();
    if a != b {
        mismatched.push("locus");
    }
    outcome(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            "manifests byte-identical across repeated runs and thread counts".into()
        } else {
            format!("differing outputs: {mismatched:?}")
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        (
            "rank-1 decomposition round trip",
            criterion_1,
            Duration::from_secs(1),
        ),
        (
            "symplectic certification",
            criterion_2,
            Duration::from_secs(5),
        ),
        ("1D inductive step", criterion_3, Duration::from_secs(1)),
        (
            "1D global transversalization",
            criterion_4,
            Duration::from_secs(10),
        ),
        ("2D locus tracing", criterion_5, Duration::from_secs(5)),
        (
            "2D splitting and S-curve surgery",
            criterion_6,
            Duration::from_secs(60),
        ),
        (
            "fold to ridge exactness and transversality",
            criterion_7,
            Duration::MAX,
        ),
        (
            "earthquake and tectonic field consistency",
            criterion_8,
            Duration::MAX,
        ),
        ("determinism", criterion_9, Duration::MAX),
    ];
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let in_time = elapsed < *budget;
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = if *budget == Duration::MAX {
            String::new()
        } else {
            format!(", budget {budget:?}")
        };
        println!(
            "{} criterion {}: {name}: {} ({elapsed:.2?}{budget})",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
