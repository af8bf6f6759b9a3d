//! Adaptive-moment optimizer with decoupled weight decay.

/// AdamW over a fixed list of parameter blocks.
///
/// Update per entry: `θ ← θ − lr·(m̂/(√v̂ + ε) + wd·θ)`, so `lr = 0` leaves
/// parameters untouched.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(block_sizes: &[usize], lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            first: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. `params[i]` and `grads[i]` must match block `i`.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), self.first.len(), "block count");
        assert_eq!(grads.len(), self.first.len(), "block count");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (b, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.first[b], &mut self.second[b]);
            assert_eq!(p.len(), m.len(), "block {b} size");
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= self.lr * (mhat / (vhat.sqrt() + self.eps) + self.weight_decay * p[i]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut opt = AdamW::new(&[2], 0.05, 0.0);
        for _ in 0..2000 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            opt.step(&mut [&mut x], &[&g]);
        }
        assert!(x.iter().all(|v| v.abs() < 1e-3), "{x:?}");
    }

    #[test]
    fn zero_lr_is_inert() {
        let mut x = vec![1.0, 2.0];
        let mut opt = AdamW::new(&[2], 0.0, 0.1);
        opt.step(&mut [&mut x], &[&[5.0, -5.0]]);
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn decay_is_decoupled() {
        // with zero gradient only the decay term moves the weight
        let mut x = vec![1.0];
        let mut opt = AdamW::new(&[1], 0.1, 0.5);
        opt.step(&mut [&mut x], &[&[0.0]]);
        assert!((x[0] - 0.95).abs() < 1e-15);
    }
}
