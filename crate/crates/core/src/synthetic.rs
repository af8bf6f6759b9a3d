//! Seeded synthetic data: embedding spaces with a known linear relation,
//! labeled blobs and throwaway sentences.

use crate::error::{invalid, Result};
use crate::rng::NoiseRng;
use crate::tensor::{norm, DenseMatrix};
use crate::utility::LabeledEmbeddings;

/// `rows` unit vectors drawn uniformly from the sphere in `dim` dimensions.
pub fn random_unit_rows(rows: usize, dim: usize, seed: u64) -> DenseMatrix<f64> {
    let mut rng = NoiseRng::new(seed);
    let data: Vec<f64> = (0..rows).flat_map(|_| rng.unit_direction(dim)).collect();
    DenseMatrix::from_vec(rows, dim, data).expect("sized by construction")
}

/// Unit rows whose coordinate `j` is drawn with standard deviation
/// `decay^j` before normalization, so most of the energy sits in the leading
/// directions.
pub fn anisotropic_unit_rows(rows: usize, dim: usize, decay: f64, seed: u64) -> DenseMatrix<f64> {
    let mut rng = NoiseRng::new(seed);
    let mut data = Vec::with_capacity(rows * dim);
    for _ in 0..rows {
        let row: Vec<f64> = (0..dim)
            .map(|j| decay.powi(j as i32) * rng.standard_normal())
            .collect();
        let n = norm(&row);
        data.extend(row.iter().map(|v| v / n));
    }
    DenseMatrix::from_vec(rows, dim, data).expect("sized by construction")
}

/// Haar-ish random orthogonal matrix: Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal(dim: usize, seed: u64) -> DenseMatrix<f64> {
    let mut rng = NoiseRng::new(seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v = rng.normal_vec(dim);
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = norm(&v);
        if n > 1e-8 {
            basis.push(v.iter().map(|x| x / n).collect());
        }
    }
    DenseMatrix::from_rows(&basis).expect("square by construction")
}

/// Victim space as a fixed invertible linear image of the attack space:
/// `attack · Q · diag(scales)`.
pub fn rotated_scaled(attack: &DenseMatrix<f64>, q: &DenseMatrix<f64>, scales: &[f64]) -> Result<DenseMatrix<f64>> {
    if scales.len() != q.cols() {
        return Err(invalid("scales", "one scale per column of Q"));
    }
    let d = DenseMatrix::from_diag(scales);
    attack.matmul(q)?.matmul(&d)
}

/// Adds `sigma · N(0, 1)` to every entry.
pub fn perturb(m: &DenseMatrix<f64>, sigma: f64, seed: u64) -> DenseMatrix<f64> {
    let mut rng = NoiseRng::new(seed);
    DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j) + sigma * rng.standard_normal())
}

const WORDS: [&str; 32] = [
    "river", "stone", "quiet", "market", "silver", "window", "garden", "engine",
    "paper", "lantern", "harbor", "violet", "thunder", "copper", "meadow", "signal",
    "orange", "bridge", "winter", "candle", "forest", "mirror", "planet", "velvet",
    "anchor", "basket", "coffee", "desert", "falcon", "island", "jacket", "kettle",
];

/// `n` distinct sentences of 4 to 8 words over a small fixed vocabulary.
/// No word repeats within a sentence, so each sentence is decodable by a
/// model that only sees the previous token.
pub fn sentences(n: usize, seed: u64) -> Vec<String> {
    let mut rng = NoiseRng::new(seed);
    let mut seen = std::collections::HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let len = 4 + rng.below(5);
        let s: Vec<&str> = rng.permutation(WORDS.len())[..len].iter().map(|&i| WORDS[i]).collect();
        let s = s.join(" ");
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    out
}

/// Gaussian blobs around `num_classes` random centers at distance `separation`
/// from the origin; `per_class` points each, isotropic std `spread`.
pub fn blobs(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    separation: f64,
    spread: f64,
    seed: u64,
) -> Result<LabeledEmbeddings> {
    let centers = random_unit_rows(num_classes, dim, seed);
    let mut rng = NoiseRng::new(seed.wrapping_add(0x9e37_79b9));
    let mut data = Vec::with_capacity(num_classes * per_class * dim);
    let mut labels = Vec::with_capacity(num_classes * per_class);
    for i in 0..num_classes * per_class {
        let c = i % num_classes;
        data.extend(
            centers
                .row(c)
                .iter()
                .map(|&x| separation * x + spread * rng.standard_normal()),
        );
        labels.push(c);
    }
    LabeledEmbeddings::new(DenseMatrix::from_vec(labels.len(), dim, data)?, labels, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_is_orthogonal() {
        let q = random_orthogonal(7, 3);
        let qtq = q.t_matmul(&q).unwrap();
        assert!(qtq.max_abs_diff(&DenseMatrix::identity(7)).unwrap() < 1e-12);
    }

    #[test]
    fn rows_are_unit() {
        for m in [random_unit_rows(5, 4, 1), anisotropic_unit_rows(5, 4, 0.5, 1)] {
            for r in m.iter_rows() {
                assert!((crate::tensor::norm(r) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sentences_unique() {
        let s = sentences(50, 0);
        let set: std::collections::HashSet<_> = s.iter().collect();
        assert_eq!(set.len(), 50);
    }
}
