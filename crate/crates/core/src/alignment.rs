//! One-step linear alignment of a victim embedding space into an attack space.
//!
//! Given `b` paired rows `E_V` (`b×m`) and `E_A` (`b×n`), the map `W` (`m×n`)
//! minimizes `Σᵢ ‖e_A,i − e_V,i·W‖²`. The fit goes through the SVD of `E_V`
//! and returns the minimum-norm least-squares solution `W = E_V⁺·E_A`, which
//! equals `(E_Vᵀ E_V)⁻¹ E_Vᵀ E_A` whenever the Gram matrix is invertible and
//! stays defined in the few-shot regime `b < m`, down to a single pair.
//!
//! An optional ridge term `α` replaces each inverted singular value `1/σ` with
//! `σ / (σ² + α)`, i.e. `W = (E_Vᵀ E_V + αI)⁻¹ E_Vᵀ E_A`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::metrics::cosine_slices;
use crate::scalar::Real;
use crate::svd::{check_rcond, svd, DEFAULT_RCOND};
use crate::tensor::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentOptions<T> {
    /// Relative singular-value cutoff.
    pub rcond: T,
    /// Ridge strength `α ≥ 0`.
    pub ridge: T,
}

impl<T: Real> Default for AlignmentOptions<T> {
    fn default() -> Self {
        Self {
            rcond: T::lit(DEFAULT_RCOND),
            ridge: T::zero(),
        }
    }
}

impl<T: Real> AlignmentOptions<T> {
    pub fn with_rcond(rcond: T) -> Self {
        Self {
            rcond,
            ..Self::default()
        }
    }
}

/// Fitted alignment plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMap<T> {
    /// `m × n`.
    pub w: DenseMatrix<T>,
    pub samples_used: usize,
    /// `‖E_A − E_V·W‖_F` on the fitting pairs.
    pub residual_fro: T,
    /// Singular values of `E_V` above `rcond · σ_max`.
    pub effective_rank: usize,
    /// `‖E_Vᵀ E_V W − E_Vᵀ E_A‖_F`, zero at the least-squares optimum.
    pub gradient_norm: T,
    /// `‖E_Vᵀ E_A‖_F`, the scale against which `gradient_norm` is judged.
    pub cross_norm: T,
    /// `σ_max / σ_min` over the retained singular values of `E_V`.
    pub condition_estimate: T,
    pub options: AlignmentOptions<T>,
}

/// Serializable summary written next to a stored map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentDiagnostics {
    pub victim_dim: usize,
    pub attack_dim: usize,
    pub samples_used: usize,
    pub residual_fro: f64,
    pub effective_rank: usize,
    pub gradient_norm: f64,
    pub cross_norm: f64,
    pub condition_estimate: f64,
    pub rcond: f64,
    pub ridge: f64,
}

impl<T: Real> AlignmentMap<T> {
    pub fn victim_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn attack_dim(&self) -> usize {
        self.w.cols()
    }

    /// Whether the normal equations hold to `tol` relative to `‖E_Vᵀ E_A‖_F`.
    pub fn is_stationary(&self, tol: T) -> bool {
        self.gradient_norm <= tol * self.cross_norm.max(T::one())
    }

    pub fn diagnostics(&self) -> AlignmentDiagnostics {
        AlignmentDiagnostics {
            victim_dim: self.victim_dim(),
            attack_dim: self.attack_dim(),
            samples_used: self.samples_used,
            residual_fro: self.residual_fro.to_f64_lossless(),
            effective_rank: self.effective_rank,
            gradient_norm: self.gradient_norm.to_f64_lossless(),
            cross_norm: self.cross_norm.to_f64_lossless(),
            condition_estimate: self.condition_estimate.to_f64_lossless(),
            rcond: self.options.rcond.to_f64_lossless(),
            ridge: self.options.ridge.to_f64_lossless(),
        }
    }

    /// Rebuilds a map from a stored weight matrix and its diagnostics.
    pub fn from_parts(w: DenseMatrix<T>, diag: &AlignmentDiagnostics) -> Result<Self> {
        if w.shape() != (diag.victim_dim, diag.attack_dim) {
            return Err(shape(
                "AlignmentMap::from_parts",
                format!("{}×{}", diag.victim_dim, diag.attack_dim),
                format!("{}×{}", w.rows(), w.cols()),
            ));
        }
        Ok(Self {
            w,
            samples_used: diag.samples_used,
            residual_fro: T::lit(diag.residual_fro),
            effective_rank: diag.effective_rank,
            gradient_norm: T::lit(diag.gradient_norm),
            cross_norm: T::lit(diag.cross_norm),
            condition_estimate: T::lit(diag.condition_estimate),
            options: AlignmentOptions {
                rcond: T::lit(diag.rcond),
                ridge: T::lit(diag.ridge),
            },
        })
    }
}

/// Fits `W` from paired rows with the default ridge of zero.
pub fn fit_alignment<T: Real>(
    victim: &DenseMatrix<T>,
    attack: &DenseMatrix<T>,
    rcond: T,
) -> Result<AlignmentMap<T>> {
    fit_alignment_with(victim, attack, AlignmentOptions::with_rcond(rcond))
}

pub fn fit_alignment_with<T: Real>(
    victim: &DenseMatrix<T>,
    attack: &DenseMatrix<T>,
    options: AlignmentOptions<T>,
) -> Result<AlignmentMap<T>> {
    check_rcond(options.rcond)?;
    if options.ridge < T::zero() || !options.ridge.is_finite() {
        return Err(invalid("ridge", format!("must be finite and ≥ 0, got {}", options.ridge)));
    }
    if victim.rows() != attack.rows() {
        return Err(shape(
            "fit_alignment",
            format!("{} attack rows", victim.rows()),
            attack.rows(),
        ));
    }
    if victim.rows() == 0 {
        return Err(Error::Empty("alignment pairs"));
    }
    if !victim.is_finite() || !attack.is_finite() {
        return Err(Error::NonFinite("fit_alignment"));
    }

    let factors = svd(victim)?;
    let ridge = options.ridge;
    let inverse = if ridge == T::zero() {
        factors.filtered_inverse(options.rcond, |s| s.recip())
    } else {
        factors.filtered_inverse(options.rcond, |s| s / (s * s + ridge))
    };
    let w = inverse.matmul(attack)?;

    let prediction = victim.matmul(&w)?;
    let residual = attack.sub(&prediction)?;
    let gradient = victim.t_matmul(&residual)?;
    let cross = victim.t_matmul(attack)?;

    let effective_rank = factors.rank(options.rcond);
    let condition_estimate = if effective_rank == 0 {
        T::infinity()
    } else {
        factors.sigma_max() / factors.singular_values[effective_rank - 1]
    };

    Ok(AlignmentMap {
        w,
        samples_used: victim.rows(),
        residual_fro: residual.frobenius_norm(),
        effective_rank,
        gradient_norm: gradient.frobenius_norm(),
        cross_norm: cross.frobenius_norm(),
        condition_estimate,
        options,
    })
}

/// `E_V · W`.
pub fn apply_alignment<T: Real>(
    map: &AlignmentMap<T>,
    victim: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>> {
    if victim.cols() != map.victim_dim() {
        return Err(shape("apply_alignment", map.victim_dim(), victim.cols()));
    }
    victim.matmul(&map.w)
}

/// Row-wise cosine between aligned and ground-truth attack embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentQuality<T> {
    /// `None` where either row has zero norm.
    pub cosines: Vec<Option<T>>,
    /// Mean over the rows that have a cosine; `None` if there are none.
    pub mean: Option<T>,
    /// Rows excluded from the mean.
    pub skipped: usize,
}

pub fn alignment_quality<T: Real>(
    aligned: &DenseMatrix<T>,
    truth: &DenseMatrix<T>,
) -> Result<AlignmentQuality<T>> {
    if aligned.shape() != truth.shape() {
        return Err(shape(
            "alignment_quality",
            format!("{}×{}", truth.rows(), truth.cols()),
            format!("{}×{}", aligned.rows(), aligned.cols()),
        ));
    }
    let cosines: Vec<Option<T>> = aligned
        .iter_rows()
        .zip(truth.iter_rows())
        .map(|(a, t)| cosine_slices(a, t).ok())
        .collect();
    let valid: Vec<T> = cosines.iter().flatten().copied().collect();
    let skipped = cosines.len() - valid.len();
    if skipped > 0 {
        log::warn!("alignment_quality: {skipped} zero-norm row(s) excluded from the mean");
    }
    let mean = if valid.is_empty() {
        None
    } else {
        Some(valid.iter().copied().sum::<T>() / T::lit(valid.len() as f64))
    };
    Ok(AlignmentQuality {
        cosines,
        mean,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NoiseRng;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix<f64> {
        let mut r = NoiseRng::new(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| r.standard_normal())
    }

    #[test]
    fn self_alignment_is_identity() {
        let e = gaussian(20, 6, 1);
        let map = fit_alignment(&e, &e, 1e-10).unwrap();
        assert!(map.w.max_abs_diff(&DenseMatrix::identity(6)).unwrap() < 1e-10);
        assert_eq!(map.effective_rank, 6);
    }

    #[test]
    fn single_pair_minimum_norm() {
        let v = DenseMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let a = DenseMatrix::from_rows(&[[0.0, 2.0]]).unwrap();
        let map = fit_alignment(&v, &a, 1e-10).unwrap();
        assert_eq!(map.w.as_slice(), &[0.0, 2.0, 0.0, 0.0]);
        assert_eq!(map.effective_rank, 1);
        assert!(map.is_stationary(1e-6));
    }

    #[test]
    fn consistent_system_recovers_map() {
        let v = gaussian(50, 8, 2);
        let r = gaussian(8, 12, 3);
        let a = v.matmul(&r).unwrap();
        let map = fit_alignment(&v, &a, 1e-10).unwrap();
        assert!(map.w.max_abs_diff(&r).unwrap() < 1e-6);
        assert!(map.residual_fro < 1e-9);
    }

    #[test]
    fn ridge_shrinks_weights() {
        let v = gaussian(10, 4, 4);
        let a = gaussian(10, 3, 5);
        let plain = fit_alignment(&v, &a, 1e-10).unwrap();
        let ridged = fit_alignment_with(
            &v,
            &a,
            AlignmentOptions {
                rcond: 1e-10,
                ridge: 5.0,
            },
        )
        .unwrap();
        assert!(ridged.w.frobenius_norm() < plain.w.frobenius_norm());
        // closed form (VᵀV + αI)⁻¹ Vᵀ A via the normal equations
        let mut gram = v.t_matmul(&v).unwrap();
        for i in 0..4 {
            gram.set(i, i, gram.get(i, i) + 5.0);
        }
        let lhs = gram.matmul(&ridged.w).unwrap();
        let rhs = v.t_matmul(&a).unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
    }

    #[test]
    fn errors() {
        let v = gaussian(3, 2, 6);
        let a = gaussian(4, 2, 7);
        assert!(matches!(fit_alignment(&v, &a, 1e-10), Err(Error::ShapeMismatch { .. })));
        let empty = DenseMatrix::<f64>::zeros(0, 2);
        assert_eq!(
            fit_alignment(&empty, &empty, 1e-10),
            Err(Error::Empty("alignment pairs"))
        );
        let bad_ridge = AlignmentOptions {
            rcond: 1e-10,
            ridge: -1.0,
        };
        assert!(fit_alignment_with(&v, &v, bad_ridge).is_err());
    }

    #[test]
    fn apply_examples() {
        let e = gaussian(4, 3, 8);
        let id = fit_alignment(&DenseMatrix::identity(3), &DenseMatrix::identity(3), 1e-10)
            .unwrap();
        assert!(apply_alignment(&id, &e).unwrap().max_abs_diff(&e).unwrap() < 1e-15);

        let zero = fit_alignment(&DenseMatrix::identity(3), &DenseMatrix::zeros(3, 3), 1e-10)
            .unwrap();
        assert!(apply_alignment(&zero, &e)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&x| x == 0.0));

        let diag = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 3.0]]).unwrap();
        let map = fit_alignment(&DenseMatrix::identity(2), &diag, 1e-10).unwrap();
        let out = apply_alignment(&map, &DenseMatrix::from_rows(&[[1.0, 2.0]]).unwrap()).unwrap();
        assert!((out.get(0, 0) - 1.0_f64).abs() < 1e-15 && (out.get(0, 1) - 6.0_f64).abs() < 1e-14);

        assert!(apply_alignment(&map, &e).is_err());
    }

    #[test]
    fn quality_examples() {
        let a = DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 0.0], [0.0, 0.0]]).unwrap();
        let t = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        let q = alignment_quality(&a, &t).unwrap();
        assert!((q.cosines[0].unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(q.cosines[1], Some(0.0));
        assert_eq!(q.cosines[2], None);
        assert_eq!(q.skipped, 1);
        assert!((q.mean.unwrap() - std::f64::consts::FRAC_1_SQRT_2 / 2.0).abs() < 1e-12);

        let same = alignment_quality(&t, &t).unwrap();
        assert!(same.cosines.iter().all(|c| (c.unwrap() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn bitwise_deterministic() {
        let v = gaussian(7, 9, 9);
        let a = gaussian(7, 5, 10);
        let w1 = fit_alignment(&v, &a, 1e-10).unwrap().w;
        let w2 = fit_alignment(&v, &a, 1e-10).unwrap().w;
        assert_eq!(
            w1.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            w2.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }
}
