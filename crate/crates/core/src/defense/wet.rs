use crate::error::{invalid, shape, Error, Result};
use crate::rng::NoiseRng;
use crate::scalar::Real;
use crate::svd::svd;
use crate::tensor::{norm, DenseMatrix};

/// Rank cutoff used when admitting a transform.
pub const WET_RCOND: f64 = 1e-10;
/// Largest admissible `σ_max / σ_min`.
pub const WET_MAX_CONDITION: f64 = 1e6;
pub const WET_MAX_ATTEMPTS: usize = 64;

/// Full-rank, well-conditioned circulant transform applied to embeddings
/// before release, followed by renormalization.
#[derive(Debug, Clone, PartialEq)]
pub struct WetTransform<T> {
    t: DenseMatrix<T>,
    inverse: DenseMatrix<T>,
    condition_estimate: T,
}

impl<T: Real> WetTransform<T> {
    /// Circulant matrix whose row `i` is `first_row` cyclically shifted right by `i`.
    /// Fails unless the result is full rank and `σ_max/σ_min ≤ 1e6`.
    pub fn from_first_row(first_row: &[T]) -> Result<Self> {
        let d = first_row.len();
        if d == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        let t = DenseMatrix::from_fn(d, d, |i, j| first_row[(j + d - i) % d]);
        if !t.is_finite() {
            return Err(Error::NonFinite("WetTransform::from_first_row"));
        }
        let f = svd(&t)?;
        let rank = f.rank(T::lit(WET_RCOND));
        let smin = f.singular_values[d - 1];
        let condition = if smin > T::zero() {
            f.sigma_max() / smin
        } else {
            T::infinity()
        };
        if rank < d || condition > T::lit(WET_MAX_CONDITION) {
            return Err(invalid(
                "first_row",
                format!("transform is rank {rank}/{d} with condition {condition}"),
            ));
        }
        let inverse = f.filtered_inverse(T::lit(WET_RCOND), |s| s.recip());
        Ok(Self {
            t,
            inverse,
            condition_estimate: condition,
        })
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.t
    }

    pub fn condition_estimate(&self) -> T {
        self.condition_estimate
    }

    pub fn dim(&self) -> usize {
        self.t.rows()
    }

    /// `pinv(T) · y`: undoes the transform given the pre-normalization vector.
    pub fn recover(&self, scaled: &[T]) -> Result<Vec<T>> {
        self.inverse.matvec(scaled)
    }
}

/// Draws a seeded circulant transform, regenerating until it is admissible.
pub fn wet_generate<T: Real>(dim: usize, seed: u64) -> Result<WetTransform<T>> {
    if dim == 0 {
        return Err(invalid("dim", "must be at least 1"));
    }
    let mut rng = NoiseRng::new(seed);
    for _ in 0..WET_MAX_ATTEMPTS {
        let row: Vec<T> = rng.normal_vec(dim).into_iter().map(T::lit).collect();
        if let Ok(t) = WetTransform::from_first_row(&row) {
            return Ok(t);
        }
    }
    Err(Error::NoAdmissibleTransform {
        attempts: WET_MAX_ATTEMPTS,
    })
}

/// `T·e / ‖T·e‖`.
pub fn wet_apply<T: Real>(t: &WetTransform<T>, e: &[T]) -> Result<Vec<T>> {
    if e.len() != t.dim() {
        return Err(shape("wet_apply", t.dim(), e.len()));
    }
    let y = t.t.matvec(e)?;
    let n = norm(&y);
    if n == T::zero() {
        return Err(Error::ZeroNorm("wet_apply"));
    }
    Ok(y.into_iter().map(|x| x / n).collect())
}
