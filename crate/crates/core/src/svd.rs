//! Thin singular value decomposition (one-sided Jacobi) and the
//! Moore-Penrose pseudoinverse built on it.
//!
//! One-sided Jacobi orthogonalizes the columns of `A` by plane rotations that
//! are accumulated into `V`. The sweep order is fixed, so results are
//! bitwise reproducible for a given input.

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::tensor::{dot, norm, DenseMatrix};

/// Default relative cutoff for treating a singular value as zero.
pub const DEFAULT_RCOND: f64 = 1e-10;

const MAX_SWEEPS: usize = 80;

/// Factors of `A = U · diag(σ) · Vᵀ` with `k = min(rows, cols)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors<T> {
    /// `rows × k`, orthonormal columns.
    pub u: DenseMatrix<T>,
    /// Descending, non-negative.
    pub singular_values: Vec<T>,
    /// `k × cols`, orthonormal rows.
    pub vt: DenseMatrix<T>,
}

impl<T: Real> SvdFactors<T> {
    /// `U · diag(σ) · Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, &s) in us.row_mut(i).iter_mut().zip(&self.singular_values) {
                *x *= s;
            }
        }
        us.matmul(&self.vt).expect("factor shapes agree")
    }

    pub fn sigma_max(&self) -> T {
        self.singular_values.first().copied().unwrap_or_else(T::zero)
    }

    /// Number of singular values strictly above `rcond · σ_max`.
    pub fn rank(&self, rcond: T) -> usize {
        let cutoff = rcond * self.sigma_max();
        self.singular_values
            .iter()
            .filter(|&&s| s > cutoff && s > T::zero())
            .count()
    }

    /// Applies a spectral filter: returns `V · diag(f(σᵢ)) · Uᵀ`, where
    /// singular values at or below `rcond · σ_max` map to zero.
    pub fn filtered_inverse(&self, rcond: T, f: impl Fn(T) -> T) -> DenseMatrix<T> {
        let cutoff = rcond * self.sigma_max();
        let k = self.singular_values.len();
        let (rows, cols) = (self.u.rows(), self.vt.cols());
        let mut out = DenseMatrix::zeros(cols, rows);
        for (idx, &s) in self.singular_values.iter().enumerate().take(k) {
            if !(s > cutoff && s > T::zero()) {
                continue;
            }
            let g = f(s);
            for i in 0..cols {
                let vi = self.vt.get(idx, i) * g;
                if vi == T::zero() {
                    continue;
                }
                let row = out.row_mut(i);
                for (j, o) in row.iter_mut().enumerate() {
                    *o += vi * self.u.get(j, idx);
                }
            }
        }
        out
    }
}

/// Thin SVD of `a`.
pub fn svd<T: Real>(a: &DenseMatrix<T>) -> Result<SvdFactors<T>> {
    if !a.is_finite() {
        return Err(Error::NonFinite("svd"));
    }
    if a.rows() >= a.cols() {
        let (u, s, v) = jacobi_tall(a)?;
        Ok(SvdFactors {
            u,
            singular_values: s,
            vt: v.transpose(),
        })
    } else {
        let (u, s, v) = jacobi_tall(&a.transpose())?;
        // Aᵀ = U S Vᵀ  ⇒  A = V S Uᵀ
        Ok(SvdFactors {
            u: v,
            singular_values: s,
            vt: u.transpose(),
        })
    }
}

/// Moore-Penrose pseudoinverse with singular values at or below
/// `rcond · σ_max` treated as zero.
pub fn pinv<T: Real>(a: &DenseMatrix<T>, rcond: T) -> Result<DenseMatrix<T>> {
    check_rcond(rcond)?;
    Ok(svd(a)?.filtered_inverse(rcond, |s| s.recip()))
}

pub(crate) fn check_rcond<T: Real>(rcond: T) -> Result<()> {
    if rcond > T::zero() && rcond < T::one() {
        Ok(())
    } else {
        Err(invalid("rcond", format!("must lie in (0, 1), got {rcond}")))
    }
}

/// Returns `(U, σ, V)` for `rows ≥ cols`; `U` is `rows × cols`, `V` is `cols × cols`.
#[allow(clippy::type_complexity)]
fn jacobi_tall<T: Real>(a: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, Vec<T>, DenseMatrix<T>)> {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<T>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let tol = T::EPS * T::lit(m.max(1) as f64).sqrt();

    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = (T::one() + t * t).sqrt().recip();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence { sweeps: MAX_SWEEPS });
    }

    let sigma: Vec<T> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps ties in column order
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).expect("finite"));

    let smax = order.first().map_or(T::zero(), |&i| sigma[i]);
    let tiny = smax * T::EPS * T::lit(m.max(n) as f64);
    let mut ucols: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        if sigma[j] > tiny && sigma[j] > T::zero() {
            ucols.push(cols[j].iter().map(|&x| x / sigma[j]).collect());
        } else {
            ucols.push(vec![T::zero(); m]);
            deficient.push(k);
        }
    }
    complete_basis(&mut ucols, &deficient);

    let u = DenseMatrix::from_fn(m, n, |i, k| ucols[k][i]);
    let v = DenseMatrix::from_fn(n, n, |i, k| vcols[order[k]][i]);
    let s = order.iter().map(|&j| sigma[j]).collect();
    Ok((u, s, v))
}

fn rotate<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the columns listed in `slots` with unit vectors orthogonal to every
/// other column, using Gram-Schmidt over the standard basis.
fn complete_basis<T: Real>(cols: &mut [Vec<T>], slots: &[usize]) {
    if slots.is_empty() {
        return;
    }
    let m = cols[0].len();
    let mut candidate = 0;
    for &slot in slots {
        while candidate < m {
            let mut e = vec![T::zero(); m];
            e[candidate] = T::one();
            candidate += 1;
            for _ in 0..2 {
                for (k, c) in cols.iter().enumerate() {
                    if k == slot {
                        continue;
                    }
                    let proj = dot(&e, c);
                    for (x, &y) in e.iter_mut().zip(c) {
                        *x -= proj * y;
                    }
                }
            }
            let n = norm(&e);
            if n > T::lit(0.5) {
                cols[slot] = e.into_iter().map(|x| x / n).collect();
                break;
            }
        }
    }
}
