use crate::error::{Error, Result};
use crate::grid::{
    candidates, fd_weights, gradient_fine, BaseGrid, CutoffProfile, Fault, TectonicFieldGrid,
};
use crate::symplectic::SymmetricForm;

/// Sampled t·Φ and t·dΦ for Φ = Σ θ_j(φ_j)·(φ_j⁺)².
#[derive(Clone, Debug, PartialEq)]
pub struct Earthquake {
    pub t: f64,
    pub phi: Vec<f64>,
    pub dphi: Vec<[f64; 2]>,
}

/// A fault function with its cutoff θ.
#[derive(Clone, Debug, PartialEq)]
pub struct EarthquakeFault {
    pub phi: Vec<f64>,
    pub theta: CutoffProfile,
}

fn check_regular(grid: &BaseGrid, faults: &[EarthquakeFault]) -> Result<()> {
    let grad_min = 1e-3 / grid.h();
    for (k, f) in faults.iter().enumerate() {
        if f.phi.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: f.phi.len(),
            });
        }
        for (a, b, _) in grid.edges() {
            if (f.phi[a] > 0.0) != (f.phi[b] > 0.0) {
                for x in [a, b] {
                    let g = grid.gradient(&f.phi, x);
                    if g[0].hypot(g[1]) < grad_min {
                        return Err(Error::Precondition(format!(
                            "fault {k} has a critical point on its zero set near sample {x}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn earthquake_generating(
    grid: &BaseGrid,
    faults: &[EarthquakeFault],
    t: f64,
) -> Result<Earthquake> {
    if !(t >= 0.0) {
        return Err(Error::Input("time must be non-negative".into()));
    }
    check_regular(grid, faults)?;
    let len = grid.len();
    let mut phi = vec![0.0; len];
    let mut dphi = vec![[0.0; 2]; len];
    for f in faults {
        for i in 0..len {
            let x = f.phi[i];
            if x <= 0.0 {
                continue;
            }
            let (th, dth, _) = f.theta.eval(x);
            let g = grid.gradient(&f.phi, i);
            phi[i] += t * th * x * x;
            let c = t * (dth * x * x + 2.0 * th * x);
            dphi[i][0] += c * g[0];
            dphi[i][1] += c * g[1];
        }
    }
    Ok(Earthquake { t, phi, dphi })
}

/// Finite-difference Hessian of a sampled scalar using only samples with the
/// same plate label as `idx`: fourth-order stencils where the plate allows,
/// second-order ones next, and a local cubic fit as the last resort.
pub fn plate_hessian(
    grid: &BaseGrid,
    f: &[f64],
    labels: &[usize],
    idx: usize,
) -> Option<SymmetricForm> {
    let d = grid.dim();
    let plate = labels[idx];
    let at = |off: [isize; 2]| -> Option<f64> {
        let j = grid.offset(idx, off)?;
        (labels[j] == plate).then(|| f[j])
    };
    let mut h = vec![vec![0.0; d]; d];
    for a in 0..d {
        let ha = grid.spacing(a);
        let found = candidates(2).into_iter().find_map(|offs| {
            let vals: Option<Vec<f64>> = offs
                .iter()
                .map(|&o| {
                    let mut off = [0; 2];
                    off[a] = o;
                    at(off)
                })
                .collect();
            let w = fd_weights(&offs, 2);
            vals.map(|v| v.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>() / (ha * ha))
        });
        match found {
            Some(v) => h[a][a] = v,
            None if d == 2 => return fitted_hessian(grid, f, labels, idx),
            None => return None,
        }
    }
    if d == 2 {
        let c1 = candidates(1);
        let mut pairs: Vec<(usize, usize)> = (0..c1.len())
            .flat_map(|i| (0..c1.len()).map(move |j| (i, j)))
            .collect();
        pairs.sort_by_key(|&(i, j)| (i.max(j), i + j));
        let found = pairs.into_iter().find_map(|(i, j)| {
            let (o0, o1) = (&c1[i], &c1[j]);
            let (w0, w1) = (fd_weights(o0, 1), fd_weights(o1, 1));
            let mut s = 0.0;
            for (&a, &wa) in o0.iter().zip(&w0) {
                for (&b, &wb) in o1.iter().zip(&w1) {
                    if wa * wb != 0.0 || a == 0 && b == 0 {
                        s += wa * wb * at([a, b])?;
                    } else {
                        at([a, b])?;
                    }
                }
            }
            Some(s / (grid.spacing(0) * grid.spacing(1)))
        });
        match found {
            Some(m) => {
                h[0][1] = m;
                h[1][0] = m;
            }
            None => return fitted_hessian(grid, f, labels, idx),
        }
    }
    SymmetricForm::from_rows(&h).ok()
}

/// Hessian of a least-squares cubic through the same-plate samples of a
/// window around `idx`; used where no tensor stencil fits inside the plate.
fn fitted_hessian(
    grid: &BaseGrid,
    f: &[f64],
    labels: &[usize],
    idx: usize,
) -> Option<SymmetricForm> {
    let (h0, h1) = (grid.spacing(0), grid.spacing(1));
    for w in 2..=6isize {
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for a in -w..=w {
            for b in -w..=w {
                let Some(j) = grid.offset(idx, [a, b]) else {
                    continue;
                };
                if labels[j] != labels[idx] {
                    continue;
                }
                let (x, y) = (a as f64, b as f64);
                rows.extend([
                    1.0,
                    x,
                    y,
                    x * x,
                    x * y,
                    y * y,
                    x * x * x,
                    x * x * y,
                    x * y * y,
                    y * y * y,
                ]);
                rhs.push(f[j]);
            }
        }
        let m = rhs.len();
        if m < 14 {
            continue;
        }
        let a = nalgebra::DMatrix::from_row_slice(m, 10, &rows);
        let svd = a.svd(true, true);
        let s = &svd.singular_values;
        if s.min() < 1e-8 * s.max() {
            continue;
        }
        let c = svd.solve(&nalgebra::DVector::from_vec(rhs), 0.0).ok()?;
        let rows = vec![
            vec![2.0 * c[3] / (h0 * h0), c[4] / (h0 * h1)],
            vec![c[4] / (h0 * h1), 2.0 * c[5] / (h1 * h1)],
        ];
        return SymmetricForm::from_rows(&rows).ok();
    }
    None
}

/// Tectonic field of finite-difference Hessians of t·Φ, with ridge covectors
/// √(2t)·dφ_j on the faults.
pub fn earthquake_tectonic_field(
    grid: &BaseGrid,
    faults: &[EarthquakeFault],
    t: f64,
) -> Result<TectonicFieldGrid> {
    let eq = earthquake_generating(grid, faults, t)?;
    let n = grid.dim();
    let fs: Vec<Fault> = faults
        .iter()
        .enumerate()
        .map(|(id, f)| {
            let c = (2.0 * t).sqrt();
            let ell = (0..grid.len())
                .flat_map(|i| {
                    let g = gradient_fine(grid, &f.phi, i);
                    (0..n).map(move |a| c * g[a])
                })
                .collect();
            Fault {
                id,
                phi: f.phi.clone(),
                ell,
            }
        })
        .collect();
    let labels = crate::grid::label_plates(grid, &fs);
    let forms = (0..grid.len())
        .map(|i| {
            plate_hessian(grid, &eq.phi, &labels, i).ok_or_else(|| {
                Error::Input(format!(
                    "plate too thin for a Hessian stencil at sample {i}"
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TectonicFieldGrid::new(grid.clone(), n, fs, forms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_fault(grid: &BaseGrid) -> Vec<EarthquakeFault> {
        vec![EarthquakeFault {
            phi: grid.sample(|x| x[0]),
            theta: CutoffProfile::theta(10.0).unwrap(),
        }]
    }

    #[test]
    fn zero_time_is_zero_section() {
        let g = BaseGrid::interval(-1.0, 1.0, 64).unwrap();
        let e = earthquake_generating(&g, &linear_fault(&g), 0.0).unwrap();
        assert!(e.dphi.iter().all(|d| d[0] == 0.0));
    }

    #[test]
    fn slope_jump_of_positive_part_squared() {
        let g = BaseGrid::interval(-1.0, 1.0, 65).unwrap();
        let t = 0.7;
        let e = earthquake_generating(&g, &linear_fault(&g), t).unwrap();
        for i in 0..g.len() {
            let x = g.coords(i)[0];
            let expect = 2.0 * t * x.max(0.0);
            assert!((e.dphi[i][0] - expect).abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn hessian_jump_is_rank_one() {
        let g = BaseGrid::interval(-1.0, 1.0, 64).unwrap();
        let tf = earthquake_tectonic_field(&g, &linear_fault(&g), 0.5).unwrap();
        let minus = &tf.forms[0];
        let plus = &tf.forms[63];
        assert!((plus.get(0, 0) - minus.get(0, 0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn critical_fault_rejected() {
        let g = BaseGrid::interval(-1.0, 1.0, 64).unwrap();
        let f = vec![EarthquakeFault {
            phi: g.sample(|x| x[0] * x[0] * x[0]),
            theta: CutoffProfile::theta(1.0).unwrap(),
        }];
        assert!(matches!(
            earthquake_generating(&g, &f, 1.0),
            Err(Error::Precondition(_))
        ));
    }
}
