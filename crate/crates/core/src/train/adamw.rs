use serde::{Deserialize, Serialize};

use crate::engine::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid AdamW settings: {self:?}")))
        }
    }
}

/// Moment estimates for one parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub config: AdamWConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamWState {
    pub fn new(config: AdamWConfig, params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        Self {
            config,
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.v
    }
}

/// One AdamW update: decoupled decay `w ← w − lr·wd·w`, then the
/// bias-corrected Adam step.
pub fn adamw_step(state: &mut AdamWState, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
    if params.len() != state.m.len() || grads.len() != params.len() {
        return Err(Error::Parameter(format!(
            "optimizer tracks {} tensors, got {} parameters and {} gradients",
            state.m.len(),
            params.len(),
            grads.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(Error::Shape {
                op: "adamw_step",
                left: p.shape(),
                right: g.shape(),
            });
        }
    }
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    let decay = 1.0 - c.lr * c.weight_decay;
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let (pd, gd) = (p.data_mut(), g.data());
        for (i, w) in pd.iter_mut().enumerate() {
            let gi = gd[i];
            let mi = &mut m.data_mut()[i];
            *mi = c.beta1 * *mi + (1.0 - c.beta1) * gi;
            let vi = &mut v.data_mut()[i];
            *vi = c.beta2 * *vi + (1.0 - c.beta2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *w = *w * decay - c.lr * m_hat / (v_hat.sqrt() + c.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_only_decays() {
        let mut params = vec![Tensor::from_vec(1, 3, vec![1.0, -2.0, 0.5]).unwrap()];
        let grads = vec![Tensor::zeros(1, 3)];
        let mut st = AdamWState::new(AdamWConfig::default(), &params);
        adamw_step(&mut st, &mut params, &grads).unwrap();
        let f = 1.0 - 1e-5;
        assert_eq!(params[0].data(), &[1.0 * f, -2.0 * f, 0.5 * f]);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..AdamWConfig::default()
        };
        let mut params = vec![Tensor::from_vec(1, 2, vec![0.0, 0.0]).unwrap()];
        let grads = vec![Tensor::from_vec(1, 2, vec![3.0, -0.02]).unwrap()];
        let mut st = AdamWState::new(cfg, &params);
        adamw_step(&mut st, &mut params, &grads).unwrap();
        assert!((params[0].get(0, 0) + 1e-3).abs() < 1e-11);
        assert!((params[0].get(0, 1) - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn zero_betas_give_sign_descent() {
        let cfg = AdamWConfig {
            lr: 0.1,
            beta1: 0.0,
            beta2: 0.0,
            epsilon: 1e-12,
            weight_decay: 0.0,
        };
        let mut params = vec![Tensor::from_vec(1, 3, vec![1.0, 1.0, 1.0]).unwrap()];
        let mut st = AdamWState::new(cfg, &params);
        for g in [[5.0, -0.1, 1e-3], [-2.0, 7.0, -4.0]] {
            let before = params[0].clone();
            adamw_step(&mut st, &mut params, &[Tensor::from_vec(1, 3, g.to_vec()).unwrap()]).unwrap();
            for i in 0..3 {
                let step = params[0].get(0, i) - before.get(0, i);
                assert!((step + 0.1 * g[i].signum()).abs() < 1e-8, "{step}");
            }
        }
    }

    #[test]
    fn quadratic_descends_monotonically() {
        let cfg = AdamWConfig {
            lr: 1e-2,
            weight_decay: 0.0,
            ..AdamWConfig::default()
        };
        // f(x, y) = (x − 1)² + 3(y + 2)²
        let loss = |p: &Tensor| (p.get(0, 0) - 1.0).powi(2) + 3.0 * (p.get(0, 1) + 2.0).powi(2);
        let mut params = vec![Tensor::from_vec(1, 2, vec![-1.0, 0.5]).unwrap()];
        let mut st = AdamWState::new(cfg, &params);
        let mut last = loss(&params[0]);
        for _ in 0..100 {
            let p = &params[0];
            let g = Tensor::from_vec(1, 2, vec![2.0 * (p.get(0, 0) - 1.0), 6.0 * (p.get(0, 1) + 2.0)]).unwrap();
            adamw_step(&mut st, &mut params, &[g]).unwrap();
            let now = loss(&params[0]);
            assert!(now < last, "{now} >= {last}");
            last = now;
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut params = vec![Tensor::zeros(2, 2)];
        let mut st = AdamWState::new(AdamWConfig::default(), &params);
        assert!(adamw_step(&mut st, &mut params, &[Tensor::zeros(2, 1)]).is_err());
        assert!(adamw_step(&mut st, &mut params, &[]).is_err());
        assert_eq!(st.step_count(), 0);
    }
}
