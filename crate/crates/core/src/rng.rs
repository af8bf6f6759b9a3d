//! Seeded noise source.
//!
//! Backed by the ChaCha20 stream cipher (a counter-based generator), so a seed
//! yields the same stream on every platform. Normals come from Box-Muller.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone)]
pub struct NoiseRng {
    inner: ChaCha20Rng,
    spare_normal: Option<f64>,
}

impl NoiseRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha20Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn normal_vec(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.standard_normal()).collect()
    }

    /// Uniformly distributed point on the unit sphere in `dim` dimensions.
    pub fn unit_direction(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let g = self.normal_vec(dim);
            let n = crate::tensor::norm(&g);
            if n > 0.0 {
                return g.into_iter().map(|x| x / n).collect();
            }
        }
    }

    /// Gamma variate with integer shape, as a sum of exponentials.
    pub fn gamma_int(&mut self, shape: usize, scale: f64) -> f64 {
        let sum: f64 = (0..shape).map(|_| -self.uniform_open0().ln()).sum();
        sum * scale
    }

    /// Fisher-Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            p.swap(i, j);
        }
        p
    }
}

/// Per-row seed used when a batch operation needs independent streams.
#[inline]
pub fn row_seed(seed: u64, row: usize) -> u64 {
    seed ^ row as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible() {
        let a: Vec<f64> = {
            let mut r = NoiseRng::new(9);
            (0..16).map(|_| r.standard_normal()).collect()
        };
        let b: Vec<f64> = {
            let mut r = NoiseRng::new(9);
            (0..16).map(|_| r.standard_normal()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn normal_moments() {
        let mut r = NoiseRng::new(1);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| r.standard_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn gamma_mean() {
        let mut r = NoiseRng::new(2);
        let n = 20_000;
        let mean = (0..n).map(|_| r.gamma_int(5, 0.5)).sum::<f64>() / n as f64;
        assert!((mean - 2.5).abs() < 0.05);
    }

    #[test]
    fn permutation_is_bijective() {
        let mut r = NoiseRng::new(3);
        let mut p = r.permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
