use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second-moment state for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub params: AdamParams,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize, lr: f64, params: AdamParams) -> Self {
        Self { lr, params, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn moments_finite(&self) -> bool {
        self.m.iter().chain(&self.v).all(|x| x.is_finite())
    }

    /// Applies one bias-corrected update in place.
    pub fn step(&mut self, x: &mut [f64], grad: &[f64]) {
        assert_eq!(x.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let AdamParams { beta1, beta2, eps } = self.params;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..x.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            x[i] -= self.lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut opt = Adam::new(2, 0.1, AdamParams::default());
        let mut x = vec![1.0, -1.0];
        opt.step(&mut x, &[3.0, -0.5]);
        assert!((x[0] - 0.9).abs() < 1e-6 && (x[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn minimises_quadratic() {
        let mut opt = Adam::new(1, 0.05, AdamParams::default());
        let mut x = vec![2.0];
        for _ in 0..2000 {
            let g = [2.0 * (x[0] - 0.5)];
            opt.step(&mut x, &g);
        }
        assert!((x[0] - 0.5).abs() < 1e-3);
        assert!(opt.moments_finite());
    }
}
