//! Moment-based adaptive optimizer.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::{Grads, ParamSet};
use crate::tensor::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Mat>,
    v: Vec<Mat>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let zeros: Vec<Mat> = params
            .iter()
            .map(|(_, p)| Mat::zeros(p.rows, p.cols))
            .collect();
        Adam {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update; arrays without a gradient are left untouched.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Grads) -> Result<()> {
        grads.check_finite(params)?;
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for id in params.ids().collect::<Vec<_>>() {
            let Some(g) = grads.get(id) else { continue };
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            let p = params.get_mut(id);
            for k in 0..p.data.len() {
                let gk = g.data[k];
                m.data[k] = c.beta1 * m.data[k] + (1.0 - c.beta1) * gk;
                v.data[k] = c.beta2 * v.data[k] + (1.0 - c.beta2) * gk * gk;
                let mh = m.data[k] / bc1;
                let vh = v.data[k] / bc2;
                p.data[k] -= c.lr * mh / (vh.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::NeuralError;
    use crate::params::ParamId;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut p = ParamSet::new();
        let id = p.insert("w", Mat::from_vec(1, 2, vec![1.0, 1.0]));
        let mut opt = Adam::new(AdamConfig::with_lr(0.1), &p);
        let mut g = Grads::for_params(&p);
        g.accumulate(id, &Mat::from_vec(1, 2, vec![3.0, -0.5]), 1.0);
        opt.step(&mut p, &g).unwrap();
        let w = p.get(id);
        assert!((w.data[0] - 0.9).abs() < 1e-6);
        assert!((w.data[1] - 1.1).abs() < 1e-6);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = ParamSet::new();
        p.insert("a", Mat::zeros(1, 1));
        p.insert("decoder.w", Mat::zeros(1, 1));
        let mut opt = Adam::new(AdamConfig::with_lr(0.1), &p);
        let mut g = Grads::for_params(&p);
        g.accumulate(ParamId(1), &Mat::scalar(f64::NAN), 1.0);
        match opt.step(&mut p, &g) {
            Err(NeuralError::NonFiniteGradient(name)) => assert_eq!(name, "decoder.w"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(opt.steps(), 0);
    }
}
