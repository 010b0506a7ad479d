//! Sums of squares of linear forms on the fixed frame e_i, e_i + e_j.

use serde::{Deserialize, Serialize};

use crate::symplectic::{packed_len, Rank1Form, SymmetricForm};

/// Frame pairs (i, j), i ≤ j, in lexicographic order.
pub fn frame_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(packed_len(n));
    for i in 0..n {
        for j in i..n {
            out.push((i, j));
        }
    }
    out
}

/// Covector of a frame pair: e_i, or e_i + e_j.
pub fn frame_covector(n: usize, (i, j): (usize, usize)) -> Vec<f64> {
    let mut ell = vec![0.0; n];
    ell[i] = 1.0;
    ell[j] = 1.0;
    ell
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rank1Decomposition {
    pub pairs: Vec<(usize, usize)>,
    pub terms: Vec<Rank1Form>,
}

impl Rank1Decomposition {
    pub fn alphas(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.alpha).collect()
    }

    pub fn recompose(&self, n: usize) -> SymmetricForm {
        self.terms
            .iter()
            .fold(SymmetricForm::zeros(n), |acc, t| &acc + &t.as_form())
    }
}

/// Coefficients on the fixed frame, in `frame_pairs` order.
pub fn alphas(s: &SymmetricForm) -> Vec<f64> {
    let n = s.dim();
    frame_pairs(n)
        .into_iter()
        .map(|(i, j)| {
            if i == j {
                let off: f64 = (0..n).filter(|&m| m != i).map(|m| s.get(i, m)).sum();
                s.get(i, i) - off
            } else {
                s.get(i, j)
            }
        })
        .collect()
}

pub fn decompose(s: &SymmetricForm) -> Rank1Decomposition {
    let n = s.dim();
    let pairs = frame_pairs(n);
    let terms = pairs
        .iter()
        .zip(alphas(s))
        .map(|(&p, alpha)| Rank1Form {
            alpha,
            ell: frame_covector(n, p),
        })
        .collect();
    Rank1Decomposition { pairs, terms }
}

/// Pointwise decomposition; entry m holds the alpha field of frame term m.
pub fn decompose_field(field: &[SymmetricForm]) -> Vec<Vec<f64>> {
    let Some(first) = field.first() else {
        return Vec::new();
    };
    let terms = packed_len(first.dim());
    let mut out = vec![Vec::with_capacity(field.len()); terms];
    for s in field {
        for (m, a) in alphas(s).into_iter().enumerate() {
            out[m].push(a);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_form() {
        assert!(decompose(&SymmetricForm::zeros(3))
            .alphas()
            .iter()
            .all(|a| *a == 0.0));
    }

    #[test]
    fn polarization_instance() {
        let s = SymmetricForm::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let d = decompose(&s);
        assert_eq!(d.pairs, vec![(0, 0), (0, 1), (1, 1)]);
        assert_eq!(d.alphas(), vec![-1.0, 1.0, -1.0]);
        assert_eq!(d.recompose(2), s);
    }

    #[test]
    fn small_example() {
        let s = SymmetricForm::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let d = decompose(&s);
        assert_eq!(d.alphas(), vec![1.0, 1.0, 2.0]);
        assert_eq!(d.recompose(2), s);
        assert_eq!(d.terms[1].ell, vec![1.0, 1.0]);
    }

    #[test]
    fn linear_field() {
        let field: Vec<SymmetricForm> = (0..16)
            .map(|i| SymmetricForm::scalar(2, -1.0 + i as f64 / 8.0))
            .collect();
        let a = decompose_field(&field);
        assert_eq!(a.len(), 3);
        for (i, s) in field.iter().enumerate() {
            let q = s.get(0, 0);
            assert_eq!(a[0][i], q);
            assert_eq!(a[1][i], 0.0);
            assert_eq!(a[2][i], q);
        }
    }
}
