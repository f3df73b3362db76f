use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::NeuralError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    /// Adam with decoupled weight decay applied to every parameter.
    AdamW { weight_decay: f64 },
}

impl OptimizerKind {
    pub fn adamw() -> Self {
        OptimizerKind::AdamW { weight_decay: 0.01 }
    }
}

/// Adam moment estimates for one parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    kind: OptimizerKind,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(kind: OptimizerKind, n_params: usize) -> Self {
        Self { kind, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let shrink = match self.kind {
            OptimizerKind::Adam => 1.0,
            OptimizerKind::AdamW { weight_decay } => 1.0 - lr * weight_decay,
        };
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p = *p * shrink - lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// `target <- (1 - tau) target + tau online`, elementwise.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<(), NeuralError> {
    if !target.same_shape(online) {
        return Err(NeuralError::ShapeMismatch { expected: target.n_params(), got: online.n_params() });
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(NeuralError::InvalidConfig(format!("soft-update rate {tau} outside [0, 1]")));
    }
    if tau == 1.0 {
        target.params_mut().copy_from_slice(online.params());
        return Ok(());
    }
    for (t, o) in target.params_mut().iter_mut().zip(online.params()) {
        *t = (1.0 - tau) * *t + tau * o;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_adam_params() {
        let mut p = vec![0.3, -1.2];
        let mut opt = Adam::new(OptimizerKind::Adam, 2);
        for _ in 0..5 {
            opt.step(&mut p, &[0.0, 0.0], 1e-3);
        }
        assert_eq!(p, vec![0.3, -1.2]);
    }

    #[test]
    fn first_step_has_magnitude_lr() {
        let mut p = vec![1.0];
        let mut opt = Adam::new(OptimizerKind::Adam, 1);
        opt.step(&mut p, &[0.37], 0.01);
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
        assert!((1.0 - p[0] - 0.01 * 0.37 / (0.37 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn adamw_decays_without_gradient() {
        let mut p = vec![2.0, -4.0];
        let mut opt = Adam::new(OptimizerKind::adamw(), 2);
        opt.step(&mut p, &[0.0, 0.0], 0.1);
        assert!((p[0] - 2.0 * (1.0 - 0.1 * 0.01)).abs() < 1e-15);
        assert!((p[1] + 4.0 * (1.0 - 0.1 * 0.01)).abs() < 1e-15);
    }

    #[test]
    fn soft_update_limits() {
        let online = Mlp::zeros(&[1, 1]).unwrap();
        let mut target = online.clone();
        target.params_mut().copy_from_slice(&[1.0, 2.0]);
        let before = target.clone();
        soft_update(&mut target, &online, 0.0).unwrap();
        assert_eq!(target, before);
        soft_update(&mut target, &online, 1.0).unwrap();
        assert_eq!(target, online);
        assert!(soft_update(&mut target, &Mlp::zeros(&[2, 1]).unwrap(), 0.5).is_err());
    }

    #[test]
    fn soft_update_lags_geometrically() {
        let mut online = Mlp::zeros(&[1, 1]).unwrap();
        online.params_mut().copy_from_slice(&[1.0, -1.0]);
        let mut target = Mlp::zeros(&[1, 1]).unwrap();
        let tau = 0.01;
        for k in 1..=300 {
            soft_update(&mut target, &online, tau).unwrap();
            let gap = (online.params()[0] - target.params()[0]).abs();
            assert!((gap - (1.0 - tau).powi(k)).abs() < 1e-12);
        }
    }
}
