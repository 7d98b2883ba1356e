use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Domain { name: "lr", value: self.lr, domain: "(0, inf)" });
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Invalid("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Domain { name: "eps", value: self.eps, domain: "(0, inf)" });
        }
        Ok(())
    }
}

/// Bias-corrected Adam moments for a flat parameter vector.
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, n_params: usize) -> Result<Self> {
        config.validate()?;
        Ok(AdamState { config, m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0 })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Applies one update in place. On a non-finite update neither the
    /// parameters nor the state change.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(&[self.m.len()], &[params.len(), grads.len()]));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let step = self.step + 1;
        let bc1 = 1.0 - beta1.powi(step as i32);
        let bc2 = 1.0 - beta2.powi(step as i32);
        let mut m = self.m.clone();
        let mut v = self.v.clone();
        let mut next = params.to_vec();
        for i in 0..next.len() {
            let g = grads[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            next[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            if !next[i].is_finite() {
                return Err(Error::NonFinite { step: step as usize, context: format!("Adam update of parameter {i}") });
            }
        }
        params.copy_from_slice(&next);
        self.m = m;
        self.v = v;
        self.step = step;
        Ok(())
    }
}

pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_parameters_and_decays_moments() {
        let mut state = AdamState::new(AdamConfig::with_lr(0.1), 2).unwrap();
        let mut p = vec![1.0, -2.0];
        state.step(&mut p, &[0.5, -0.5]).unwrap();
        let (m, v) = (state.first_moment().to_vec(), state.second_moment().to_vec());
        let before = p.clone();
        state.step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(state.first_moment()[0], 0.9 * m[0]);
        assert_eq!(state.second_moment()[1], 0.999 * v[1]);
        // the decayed first moment still moves the parameters; only the gradient term vanishes
        assert!(p[0] < before[0]);

        let mut fresh = AdamState::new(AdamConfig::default(), 3).unwrap();
        let mut q = vec![0.1, 0.2, 0.3];
        fresh.step(&mut q, &[0.0; 3]).unwrap();
        assert_eq!(q, vec![0.1, 0.2, 0.3]);
        assert_eq!(fresh.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::with_lr(1e-3);
        for g in [3.0, -0.02, 1e-3] {
            let mut state = AdamState::new(cfg, 1).unwrap();
            let mut p = vec![0.0];
            state.step(&mut p, &[g]).unwrap();
            let expected = -cfg.lr * g.signum();
            assert!((p[0] - expected).abs() <= cfg.lr * cfg.eps / g.abs() + 1e-18, "{g}: {}", p[0]);
        }
    }

    #[test]
    fn converges_on_convex_quadratic() {
        let target = [1.5, -0.5];
        let mut state = AdamState::new(AdamConfig::with_lr(0.1), 2).unwrap();
        let mut w = vec![0.0, 0.0];
        for _ in 0..100 {
            let grads: Vec<f64> = w.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            state.step(&mut w, &grads).unwrap();
        }
        let loss: f64 = w.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(loss < 1e-4, "{loss}");
    }

    #[test]
    fn rejects_non_finite_update() {
        let mut state = AdamState::new(AdamConfig::default(), 1).unwrap();
        let mut p = vec![1.0];
        assert!(state.step(&mut p, &[f64::NAN]).is_err());
        assert_eq!(p, vec![1.0]);
        assert_eq!(state.step_count(), 0);
        assert!(state.step(&mut p, &[1.0, 2.0]).is_err());
    }
}
