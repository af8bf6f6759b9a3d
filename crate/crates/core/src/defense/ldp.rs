//! Metric-LDP mechanisms for unit-norm embeddings.
//!
//! * Planar Laplace (`LapMech`): add `z` with density `∝ exp(−ε‖z‖)`, sampled
//!   as a uniform direction scaled by `Gamma(d, 1/ε)`, then renormalize.
//! * Purkayastha (`PurMech`): rotate the input by an angle `θ` drawn from the
//!   density `∝ exp(−εθ) sin^{d−2}(θ)` on `[0, π]` towards a uniformly random
//!   orthogonal direction. The output stays on the unit sphere.
//!
//! Both are pure (`δ = 0`).

use crate::rng::NoiseRng;
use crate::tensor::{dot, norm};

const GRID: usize = 4096;
/// Log-density drop at which the angle support is truncated.
const TAIL: f64 = 45.0;

/// Inverse-CDF sampler for the Purkayastha angle in dimension `d`.
#[derive(Debug, Clone)]
pub struct AngleSampler {
    kind: AngleKind,
}

#[derive(Debug, Clone)]
enum AngleKind {
    /// `d == 1`: the sphere is `{±1}`; `p_flip = e^{−επ} / (1 + e^{−επ})`.
    Discrete { p_flip: f64 },
    /// `d == 2`: exponential truncated to `[0, π]`.
    Exponential { epsilon: f64 },
    /// `d ≥ 3`: tabulated CDF over `[lo, hi]`.
    Table { lo: f64, step: f64, cdf: Vec<f64> },
}

impl AngleSampler {
    pub fn new(dim: usize, epsilon: f64) -> Self {
        let pi = std::f64::consts::PI;
        let kind = match dim {
            0 | 1 => {
                let w = (-epsilon * pi).exp();
                AngleKind::Discrete {
                    p_flip: w / (1.0 + w),
                }
            }
            2 => AngleKind::Exponential { epsilon },
            _ => {
                let k = (dim - 2) as f64;
                let log_f = |t: f64| -epsilon * t + k * t.sin().ln();
                // log-density is concave with its mode at atan(k/ε)
                let mode = (k / epsilon).atan();
                let peak = log_f(mode);
                let lo = bisect(|t| log_f(t) - (peak - TAIL), 0.0, mode);
                let hi = bisect(|t| (peak - TAIL) - log_f(t), mode, pi);
                let step = (hi - lo) / GRID as f64;
                let mut cdf = Vec::with_capacity(GRID + 1);
                cdf.push(0.0);
                let mut acc = 0.0;
                for i in 0..GRID {
                    let mid = lo + (i as f64 + 0.5) * step;
                    acc += (log_f(mid) - peak).exp();
                    cdf.push(acc);
                }
                for c in &mut cdf {
                    *c /= acc;
                }
                AngleKind::Table { lo, step, cdf }
            }
        };
        Self { kind }
    }

    pub fn sample(&self, rng: &mut NoiseRng) -> f64 {
        let pi = std::f64::consts::PI;
        match &self.kind {
            AngleKind::Discrete { p_flip } => {
                if rng.uniform() < *p_flip {
                    pi
                } else {
                    0.0
                }
            }
            AngleKind::Exponential { epsilon } => {
                let u = rng.uniform();
                let mass = -(-epsilon * pi).exp_m1();
                (-(-u * mass).ln_1p() / epsilon).min(pi)
            }
            AngleKind::Table { lo, step, cdf } => {
                let u = rng.uniform();
                // first index with cdf[idx] > u
                let idx = cdf.partition_point(|&c| c <= u).clamp(1, cdf.len() - 1);
                let (c0, c1) = (cdf[idx - 1], cdf[idx]);
                let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
                lo + ((idx - 1) as f64 + frac) * step
            }
        }
    }
}

/// Finds the sign change of a monotone `f` on `[a, b]`, where `f(a) ≤ 0 ≤ f(b)`
/// is expected; returns the nearest endpoint otherwise.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must take the early return
fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    if !(fa <= 0.0) {
        return a;
    }
    if fb <= 0.0 {
        return b;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m) <= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Purkayastha draw around the unit vector `unit`.
pub(crate) fn purkayastha(unit: &[f64], sampler: &AngleSampler, rng: &mut NoiseRng) -> Vec<f64> {
    let d = unit.len();
    let theta = sampler.sample(rng);
    if d == 1 {
        return vec![unit[0] * theta.cos().signum()];
    }
    let ortho = loop {
        let mut g = rng.normal_vec(d);
        let p = dot(&g, unit);
        for (x, &u) in g.iter_mut().zip(unit) {
            *x -= p * u;
        }
        let n = norm(&g);
        if n > 1e-12 {
            break g.into_iter().map(|x| x / n).collect::<Vec<_>>();
        }
    };
    let (c, s) = (theta.cos(), theta.sin());
    let out: Vec<f64> = unit.iter().zip(&ortho).map(|(&u, &o)| c * u + s * o).collect();
    let n = norm(&out);
    out.into_iter().map(|x| x / n).collect()
}

/// Planar Laplace draw around `unit`, renormalized. `None` on the
/// measure-zero event that the noisy vector is exactly zero.
pub(crate) fn planar_laplace(unit: &[f64], epsilon: f64, rng: &mut NoiseRng) -> Option<Vec<f64>> {
    let d = unit.len();
    let radius = rng.gamma_int(d, 1.0 / epsilon);
    let dir = rng.unit_direction(d);
    let y: Vec<f64> = unit.iter().zip(&dir).map(|(&u, &z)| u + radius * z).collect();
    let n = norm(&y);
    (n > 0.0).then(|| y.into_iter().map(|x| x / n).collect())
}
