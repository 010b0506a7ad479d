//! Finite-difference stencils on integer offsets.

use nalgebra::{DMatrix, DVector};

use super::BaseGrid;

/// Weights w with Σ w_k f(o_k) ≈ f^(order)(0) for unit spacing.
pub fn fd_weights(offsets: &[isize], order: usize) -> Vec<f64> {
    let m = offsets.len();
    let mut a = DMatrix::zeros(m, m);
    let mut fact = 1.0;
    for r in 0..m {
        if r > 0 {
            fact *= r as f64;
        }
        for (c, &o) in offsets.iter().enumerate() {
            a[(r, c)] = (o as f64).powi(r as i32) / fact;
        }
    }
    let mut b = DVector::zeros(m);
    b[order] = 1.0;
    a.lu()
        .solve(&b)
        .expect("distinct offsets")
        .iter()
        .copied()
        .collect()
}

fn range(lo: isize, hi: isize) -> Vec<isize> {
    (lo..=hi).collect()
}

/// Candidate offset sets for a derivative, best first: fourth-order central,
/// shifted and one-sided, then second-order.
pub fn candidates(order: usize) -> Vec<Vec<isize>> {
    match order {
        1 => vec![
            range(-2, 2),
            range(-1, 3),
            range(-3, 1),
            range(0, 4),
            range(-4, 0),
            range(-1, 1),
            range(0, 2),
            range(-2, 0),
        ],
        _ => vec![
            range(-2, 2),
            range(-1, 4),
            range(-4, 1),
            range(0, 5),
            range(-5, 0),
            range(-1, 1),
            range(0, 3),
            range(-3, 0),
        ],
    }
}

/// Fourth-order gradient where the grid allows it.
pub fn gradient_fine(grid: &BaseGrid, f: &[f64], idx: usize) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (a, ga) in g.iter_mut().enumerate().take(grid.dim()) {
        for offs in candidates(1) {
            let pts: Option<Vec<usize>> = offs
                .iter()
                .map(|&o| {
                    let mut d = [0; 2];
                    d[a] = o;
                    grid.offset(idx, d)
                })
                .collect();
            if let Some(pts) = pts {
                let w = fd_weights(&offs, 1);
                *ga = pts.iter().zip(&w).map(|(&p, &wk)| wk * f[p]).sum::<f64>() / grid.spacing(a);
                break;
            }
        }
    }
    g
}
