//! Defenses applied to victim embeddings before they leave the defender.
//!
//! | kind       | effect                                                            |
//! |------------|-------------------------------------------------------------------|
//! | `wet`      | circulant linear transform, then renormalize                      |
//! | `shuffle`  | one seeded coordinate permutation for the whole dataset          |
//! | `gaussian` | `(ê + λ·g)/‖ê + λ·g‖`, `g ~ N(0, I)`, `ê` the normalized input    |
//! | `ldp`      | Purkayastha or planar-Laplace metric-LDP mechanism at budget `ε`  |
//!
//! All randomness flows from [`DefenseSpec::seed`]. Row-wise batch
//! application derives one stream per row as `seed ⊕ row`.

mod ldp;
mod wet;

pub use ldp::AngleSampler;
pub use wet::{
    wet_apply, wet_generate, WetTransform, WET_MAX_ATTEMPTS, WET_MAX_CONDITION, WET_RCOND,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{row_seed, NoiseRng};
use crate::scalar::Real;
use crate::tensor::{normalize_slice, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefenseKind {
    #[serde(alias = "WET")]
    Wet,
    #[serde(alias = "Shuffle")]
    Shuffle,
    #[serde(alias = "Gaussian")]
    Gaussian,
    #[serde(alias = "LDP")]
    Ldp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LdpMechanism {
    /// Purkayastha directional mechanism.
    #[default]
    #[serde(alias = "PurMech")]
    Purmech,
    /// Normalized planar Laplace mechanism.
    #[serde(alias = "LapMech")]
    Lapmech,
}

/// Tagged defense configuration, serialized as
/// `{"kind", "lambda", "epsilon", "mechanism", "seed"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefenseSpec {
    pub kind: DefenseKind,
    /// Gaussian noise scale `λ`.
    #[serde(default)]
    pub lambda: f64,
    /// Privacy budget `ε` for LDP.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub mechanism: LdpMechanism,
    #[serde(default)]
    pub seed: u64,
}

fn default_epsilon() -> f64 {
    1.0
}

impl DefenseSpec {
    pub fn wet(seed: u64) -> Self {
        Self::base(DefenseKind::Wet, seed)
    }

    pub fn shuffle(seed: u64) -> Self {
        Self::base(DefenseKind::Shuffle, seed)
    }

    pub fn gaussian(lambda: f64, seed: u64) -> Self {
        Self {
            lambda,
            ..Self::base(DefenseKind::Gaussian, seed)
        }
    }

    pub fn ldp(mechanism: LdpMechanism, epsilon: f64, seed: u64) -> Self {
        Self {
            epsilon,
            mechanism,
            ..Self::base(DefenseKind::Ldp, seed)
        }
    }

    fn base(kind: DefenseKind, seed: u64) -> Self {
        Self {
            kind,
            lambda: 0.0,
            epsilon: default_epsilon(),
            mechanism: LdpMechanism::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be finite and ≥ 0, got {}", self.lambda)));
        }
        if self.kind == DefenseKind::Ldp && !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon", format!("must be finite and > 0, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// WET and Shuffle are fixed transforms keyed by the seed; every row a
    /// defender publishes must share the key.
    pub fn is_keyed(&self) -> bool {
        matches!(self.kind, DefenseKind::Wet | DefenseKind::Shuffle)
    }

    /// Same spec with the seed offset, for repeated runs.
    pub fn reseeded(&self, offset: u64) -> Self {
        Self {
            seed: self.seed.wrapping_add(offset),
            ..*self
        }
    }
}

/// Permutes coordinates: `out[i] = e[π(i)]` with `π` drawn from `seed`.
pub fn shuffle_apply<T: Real>(e: &[T], seed: u64) -> Vec<T> {
    let perm = NoiseRng::new(seed).permutation(e.len());
    permute(e, &perm)
}

fn permute<T: Copy>(e: &[T], perm: &[usize]) -> Vec<T> {
    perm.iter().map(|&j| e[j]).collect()
}

fn to_unit_f64<T: Real>(e: &[T]) -> Result<Vec<f64>> {
    let wide: Vec<f64> = e.iter().map(|x| x.to_f64_lossless()).collect();
    normalize_slice(&wide)
}

fn narrow<T: Real>(v: Vec<f64>) -> Vec<T> {
    v.into_iter().map(T::lit).collect()
}

/// Normalized Gaussian perturbation of the normalized input.
pub fn gaussian_apply<T: Real>(e: &[T], lambda: f64, seed: u64) -> Result<Vec<T>> {
    let mut rng = NoiseRng::new(seed);
    gaussian_with(e, lambda, &mut rng)
}

fn gaussian_with<T: Real>(e: &[T], lambda: f64, rng: &mut NoiseRng) -> Result<Vec<T>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be finite and ≥ 0, got {lambda}")));
    }
    let unit = to_unit_f64(e)?;
    for _ in 0..2 {
        let noisy: Vec<f64> = unit
            .iter()
            .map(|&x| x + lambda * rng.standard_normal())
            .collect();
        if let Ok(out) = normalize_slice(&noisy) {
            return Ok(narrow(out));
        }
    }
    Err(Error::ZeroNorm("gaussian_apply"))
}

/// Applies one metric-LDP mechanism to the normalized input.
pub fn ldp_apply<T: Real>(
    e: &[T],
    mechanism: LdpMechanism,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<T>> {
    check_epsilon(epsilon)?;
    let sampler = match mechanism {
        LdpMechanism::Purmech => Some(AngleSampler::new(e.len(), epsilon)),
        LdpMechanism::Lapmech => None,
    };
    ldp_with(e, epsilon, sampler.as_ref(), &mut NoiseRng::new(seed))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(invalid("epsilon", format!("must be finite and > 0, got {epsilon}")))
    }
}

fn ldp_with<T: Real>(
    e: &[T],
    epsilon: f64,
    purkayastha: Option<&AngleSampler>,
    rng: &mut NoiseRng,
) -> Result<Vec<T>> {
    let unit = to_unit_f64(e)?;
    match purkayastha {
        Some(sampler) => Ok(narrow(ldp::purkayastha(&unit, sampler, rng))),
        None => {
            for _ in 0..2 {
                if let Some(out) = ldp::planar_laplace(&unit, epsilon, rng) {
                    return Ok(narrow(out));
                }
            }
            Err(Error::ZeroNorm("ldp_apply"))
        }
    }
}

/// Applies `spec` to every row of `embeddings`.
///
/// WET and shuffle draw one transform/permutation for the whole batch;
/// Gaussian and LDP use an independent stream per row.
pub fn apply_defense<T: Real>(
    spec: &DefenseSpec,
    embeddings: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>> {
    spec.validate()?;
    let (rows, dim) = embeddings.shape();
    let mut out = DenseMatrix::zeros(rows, dim);
    match spec.kind {
        DefenseKind::Wet => {
            let t = wet_generate::<T>(dim, spec.seed)?;
            for i in 0..rows {
                out.row_mut(i).copy_from_slice(&wet_apply(&t, embeddings.row(i))?);
            }
        }
        DefenseKind::Shuffle => {
            let perm = NoiseRng::new(spec.seed).permutation(dim);
            for i in 0..rows {
                out.row_mut(i).copy_from_slice(&permute(embeddings.row(i), &perm));
            }
        }
        DefenseKind::Gaussian => {
            for i in 0..rows {
                let mut rng = NoiseRng::new(row_seed(spec.seed, i));
                let y = gaussian_with(embeddings.row(i), spec.lambda, &mut rng)?;
                out.row_mut(i).copy_from_slice(&y);
            }
        }
        DefenseKind::Ldp => {
            let sampler = match spec.mechanism {
                LdpMechanism::Purmech => Some(AngleSampler::new(dim, spec.epsilon)),
                LdpMechanism::Lapmech => None,
            };
            for i in 0..rows {
                let mut rng = NoiseRng::new(row_seed(spec.seed, i));
                let y = ldp_with(embeddings.row(i), spec.epsilon, sampler.as_ref(), &mut rng)?;
                out.row_mut(i).copy_from_slice(&y);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::cosine_slices;
    use crate::svd::pinv;
    use crate::tensor::norm;

    fn unit(dim: usize, seed: u64) -> Vec<f64> {
        NoiseRng::new(seed).unit_direction(dim)
    }

    #[test]
    fn wet_scalar_and_two_by_two() {
        let t = wet_generate::<f64>(1, 77).unwrap();
        assert_eq!(t.dim(), 1);
        assert_ne!(t.matrix().get(0, 0), 0.0);

        let t = WetTransform::from_first_row(&[3.0_f64, 1.0]).unwrap();
        assert_eq!(t.matrix().as_slice(), &[3.0, 1.0, 1.0, 3.0]);
        // [1, 1] is singular
        assert!(WetTransform::from_first_row(&[1.0_f64, 1.0]).is_err());
        assert!(WetTransform::<f64>::from_first_row(&[]).is_err());
    }

    #[test]
    fn wet_generate_invariants() {
        let t = wet_generate::<f64>(8, 42).unwrap();
        let f = crate::svd::svd(t.matrix()).unwrap();
        assert_eq!(f.rank(WET_RCOND), 8);
        assert!(t.condition_estimate() <= WET_MAX_CONDITION);
        let m = t.matrix();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(m.get(i, j), m.get((i + 1) % 8, (j + 1) % 8));
            }
        }
        assert_eq!(wet_generate::<f64>(8, 42).unwrap(), t);
        assert!(wet_generate::<f64>(0, 1).is_err());
    }

    #[test]
    fn wet_apply_examples() {
        let id = WetTransform::from_first_row(&[1.0_f64, 0.0, 0.0]).unwrap();
        let e = unit(3, 1);
        let out = wet_apply(&id, &e).unwrap();
        assert!(out.iter().zip(&e).all(|(a, b)| (a - b).abs() < 1e-15));

        let t = wet_generate::<f64>(12, 3).unwrap();
        for s in 0..100 {
            let e = unit(12, 100 + s);
            let y = wet_apply(&t, &e).unwrap();
            assert!((norm(&y) - 1.0).abs() < 1e-12);
            let scale = norm(&t.matrix().matvec(&e).unwrap());
            let scaled: Vec<f64> = y.iter().map(|x| x * scale).collect();
            let back = t.recover(&scaled).unwrap();
            let err = back.iter().zip(&e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-8, "recovery error {err}");
        }
        assert!(wet_apply(&t, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn wet_normalization_commutes_with_right_factor() {
        // Norm(T·(E·W)) == Norm((T·E)·W) for a left transform T
        let mut r = NoiseRng::new(5);
        let e = DenseMatrix::from_fn(4, 3, |_, _| r.standard_normal());
        let w = DenseMatrix::from_fn(3, 5, |_, _| r.standard_normal());
        let t = wet_generate::<f64>(4, 9).unwrap();
        let lhs = t.matrix().matmul(&e.matmul(&w).unwrap()).unwrap().normalize_rows().unwrap();
        let rhs = t.matrix().matmul(&e).unwrap().matmul(&w).unwrap().normalize_rows().unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn shuffle_examples() {
        assert_eq!(shuffle_apply(&[2.5_f64; 3], 4), vec![2.5; 3]);
        let e = vec![3.0_f64, -1.0, 0.5, 7.0, 2.0];
        let out = shuffle_apply(&e, 11);
        assert_eq!(norm(&out), norm(&e));
        let (mut a, mut b) = (out.clone(), e.clone());
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_examples() {
        let e = unit(10, 3);
        let same = gaussian_apply(&e, 0.0, 1).unwrap();
        assert!(same.iter().zip(&e).all(|(a, b)| (a - b).abs() < 1e-15));
        for lambda in [0.01, 0.1, 1.0, 10.0] {
            assert!((norm(&gaussian_apply(&e, lambda, 2).unwrap()) - 1.0).abs() < 1e-12);
        }
        let mean = |lambda: f64| {
            (0..1000)
                .map(|s| cosine_slices(&e, &gaussian_apply(&e, lambda, s).unwrap()).unwrap())
                .sum::<f64>()
                / 1000.0
        };
        let (a, b, c) = (mean(0.01), mean(0.1), mean(1.0));
        assert!(a > b && b > c, "{a} {b} {c}");
        assert!(gaussian_apply(&[0.0_f64, 0.0], 1.0, 1).is_err());
        assert!(gaussian_apply(&e, -1.0, 1).is_err());
    }

    #[test]
    fn ldp_examples() {
        let e = unit(16, 4);
        for mech in [LdpMechanism::Purmech, LdpMechanism::Lapmech] {
            let y = ldp_apply(&e, mech, 2.0, 1).unwrap();
            assert!((norm(&y) - 1.0).abs() < 1e-12);
            let near = (0..100).all(|s| {
                cosine_slices(&e, &ldp_apply(&e, mech, 1e6, s).unwrap()).unwrap() > 0.99
            });
            assert!(near, "{mech:?}");
            let mean = |eps: f64| {
                (0..1000)
                    .map(|s| cosine_slices(&e, &ldp_apply(&e, mech, eps, s).unwrap()).unwrap())
                    .sum::<f64>()
                    / 1000.0
            };
            assert!(mean(12.0) > mean(1.0), "{mech:?}");
            assert!(ldp_apply(&e, mech, 0.0, 1).is_err());
            assert!(ldp_apply(&e, mech, -3.0, 1).is_err());
        }
    }

    #[test]
    fn batch_determinism_and_norms() {
        let mut r = NoiseRng::new(8);
        let m = DenseMatrix::from_fn(6, 9, |_, _| r.standard_normal());
        let specs = [
            DefenseSpec::wet(1),
            DefenseSpec::gaussian(0.3, 2),
            DefenseSpec::ldp(LdpMechanism::Purmech, 4.0, 3),
            DefenseSpec::ldp(LdpMechanism::Lapmech, 4.0, 3),
        ];
        for spec in specs {
            let a = apply_defense(&spec, &m).unwrap();
            let b = apply_defense(&spec, &m).unwrap();
            assert_eq!(a, b);
            for row in a.iter_rows() {
                assert!((norm(row) - 1.0).abs() < 1e-9, "{spec:?}");
            }
        }
        let s = apply_defense(&DefenseSpec::shuffle(5), &m).unwrap();
        let perm = NoiseRng::new(5).permutation(9);
        for i in 0..6 {
            assert_eq!(s.row(i), permute(m.row(i), &perm).as_slice());
        }
    }

    #[test]
    fn wet_recovery_from_pinv() {
        let t = wet_generate::<f64>(5, 6).unwrap();
        let p = pinv(t.matrix(), 1e-10).unwrap();
        let prod = p.matmul(t.matrix()).unwrap();
        assert!(prod.max_abs_diff(&DenseMatrix::identity(5)).unwrap() < 1e-10);
    }

    #[test]
    fn spec_json_shape() {
        let s: DefenseSpec = serde_json::from_str(
            r#"{"kind":"LDP","lambda":0,"epsilon":4,"mechanism":"LapMech","seed":9}"#,
        )
        .unwrap();
        assert_eq!(s, DefenseSpec::ldp(LdpMechanism::Lapmech, 4.0, 9));
        let json = serde_json::to_value(DefenseSpec::gaussian(0.1, 3)).unwrap();
        assert_eq!(json["kind"], "gaussian");
        assert_eq!(json["lambda"], 0.1);
        assert!(DefenseSpec::ldp(LdpMechanism::Purmech, 0.0, 1).validate().is_err());
        assert!(DefenseSpec::gaussian(-0.5, 1).validate().is_err());
    }
}
