use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::BaseGrid;
use crate::symplectic::SymmetricForm;

/// Seeded generator for the genericity and condition-(C) perturbations.
#[derive(Clone, Debug)]
pub(crate) struct Perturber {
    rng: ChaCha8Rng,
}

impl Perturber {
    pub fn new(seed: u64) -> Self {
        Perturber {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn unit_vector(&mut self, n: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| self.rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.1 && norm <= 1.0 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }

    /// Smooth low-frequency field of symmetric forms with spectral norm at
    /// most `size` at every sample.
    pub fn smooth_field(&mut self, grid: &BaseGrid, n: usize, size: f64) -> Vec<SymmetricForm> {
        const MODES: usize = 3;
        let mut modes = Vec::with_capacity(MODES);
        for _ in 0..MODES {
            let packed: Vec<f64> = (0..n * (n + 1) / 2)
                .map(|_| self.rng.gen_range(-1.0..1.0))
                .collect();
            let k: [f64; 2] = [self.rng.gen_range(0.5..2.0), self.rng.gen_range(0.5..2.0)];
            let phase: f64 = self.rng.gen_range(0.0..std::f64::consts::TAU);
            let m = SymmetricForm::from_packed(n, &packed).expect("packed length");
            let norm = m.spectral_norm().max(1e-12);
            modes.push((&m * (1.0 / norm), k, phase));
        }
        let ext = grid.extent();
        let width: Vec<f64> = ext.iter().map(|e| e[1] - e[0]).collect();
        grid.sample(|x| {
            let mut acc = SymmetricForm::zeros(n);
            for (m, k, phase) in &modes {
                let mut arg = *phase;
                for a in 0..grid.dim() {
                    arg += std::f64::consts::TAU * k[a] * (x[a] - ext[a][0]) / width[a];
                }
                acc = &acc + &(m * (size / MODES as f64 * arg.cos()));
            }
            acc
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_bounded() {
        let g = BaseGrid::interval(0.0, 1.0, 50).unwrap();
        let a = Perturber::new(7).smooth_field(&g, 2, 1e-3);
        let b = Perturber::new(7).smooth_field(&g, 2, 1e-3);
        assert_eq!(a, b);
        assert!(a.iter().all(|f| f.spectral_norm() <= 1e-3 + 1e-15));
        let v = Perturber::new(1).unit_vector(3);
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
