use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate of ℝ²ⁿ: q_j or p_j, 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coord {
    Q(usize),
    P(usize),
}

impl Coord {
    fn position(self, n: usize) -> usize {
        match self {
            Coord::Q(j) => j,
            Coord::P(j) => n + j,
        }
    }
}

/// One linear piece: listed coordinates vanish, listed coordinates are ≥ 0,
/// the remaining q's of the stabilization are free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgePiece {
    /// Subset I ⊂ {0..k} of corner factors lying on the q side.
    pub index_set: Vec<usize>,
    pub zero: Vec<Coord>,
    pub nonneg: Vec<Coord>,
    pub free: Vec<Coord>,
}

impl RidgePiece {
    /// Label listing I 1-based, e.g. "I=12", or "I=" for the empty set.
    pub fn label(&self) -> String {
        let digits: String = self.index_set.iter().map(|j| (j + 1).to_string()).collect();
        format!("I={digits}")
    }

    pub fn contains(&self, x: &[f64], n: usize) -> bool {
        self.zero.iter().all(|c| x[c.position(n)] == 0.0)
            && self.nonneg.iter().all(|c| x[c.position(n)] >= 0.0)
    }

    /// Generators as (vector, is_line): rays for the quadrant, lines for the free factor.
    pub fn generators(&self, n: usize) -> Vec<(Vec<f64>, bool)> {
        let unit = |c: Coord| {
            let mut v = vec![0.0; 2 * n];
            v[c.position(n)] = 1.0;
            v
        };
        self.nonneg
            .iter()
            .map(|&c| (unit(c), false))
            .chain(self.free.iter().map(|&c| (unit(c), true)))
            .collect()
    }
}

/// Product of k corners {p = 0, q ≥ 0} ∪ {q = 0, p ≥ 0}, stabilized by ℝⁿ⁻ᵏ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRidge {
    pub k: usize,
    pub n: usize,
    pub pieces: Vec<RidgePiece>,
}

pub fn model_ridge_pieces(k: usize, n: usize) -> Result<ModelRidge> {
    if k > n {
        return Err(Error::Input(format!("k = {k} exceeds n = {n}")));
    }
    let pieces = (0..1usize << k)
        .rev()
        .map(|mask| {
            let index_set: Vec<usize> = (0..k).filter(|j| mask >> j & 1 == 1).collect();
            let mut zero = Vec::new();
            let mut nonneg = Vec::new();
            for j in 0..k {
                if mask >> j & 1 == 1 {
                    zero.push(Coord::P(j));
                    nonneg.push(Coord::Q(j));
                } else {
                    zero.push(Coord::Q(j));
                    nonneg.push(Coord::P(j));
                }
            }
            let free = (k..n).map(Coord::Q).collect();
            zero.extend((k..n).map(Coord::P));
            RidgePiece {
                index_set,
                zero,
                nonneg,
                free,
            }
        })
        .collect();
    Ok(ModelRidge { k, n, pieces })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_section_when_k_is_zero() {
        let m = model_ridge_pieces(0, 3).unwrap();
        assert_eq!(m.pieces.len(), 1);
        assert_eq!(
            m.pieces[0].zero,
            vec![Coord::P(0), Coord::P(1), Coord::P(2)]
        );
        assert_eq!(m.pieces[0].free.len(), 3);
    }

    #[test]
    fn corner_pieces() {
        let m = model_ridge_pieces(1, 1).unwrap();
        assert_eq!(m.pieces.len(), 2);
        assert_eq!(m.pieces[0].zero, vec![Coord::P(0)]);
        assert_eq!(m.pieces[0].nonneg, vec![Coord::Q(0)]);
        assert_eq!(m.pieces[1].zero, vec![Coord::Q(0)]);
        assert_eq!(m.pieces[1].nonneg, vec![Coord::P(0)]);
    }

    #[test]
    fn conormal_pieces_in_the_plane() {
        let m = model_ridge_pieces(2, 2).unwrap();
        let zeros: Vec<Vec<Coord>> = m.pieces.iter().map(|p| p.zero.clone()).collect();
        assert_eq!(
            zeros,
            vec![
                vec![Coord::P(0), Coord::P(1)],
                vec![Coord::Q(0), Coord::P(1)],
                vec![Coord::P(0), Coord::Q(1)],
                vec![Coord::Q(0), Coord::Q(1)],
            ]
        );
        assert_eq!(m.pieces[0].label(), "I=12");
        assert_eq!(m.pieces[3].label(), "I=");
    }

    #[test]
    fn interiors_are_disjoint() {
        for (k, n) in [(1, 1), (2, 2), (2, 3), (3, 3)] {
            let m = model_ridge_pieces(k, n).unwrap();
            for (a, pa) in m.pieces.iter().enumerate() {
                let mut x = vec![0.0; 2 * n];
                for (v, _) in pa.generators(n) {
                    for i in 0..2 * n {
                        x[i] += v[i];
                    }
                }
                for (b, pb) in m.pieces.iter().enumerate() {
                    assert_eq!(pb.contains(&x, n), a == b);
                }
            }
        }
        assert!(model_ridge_pieces(3, 2).is_err());
    }
}
