use crate::error::{Error, Result};
use crate::nn::Mlp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam moments for one network. Steps descend the supplied gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self { config, m: vec![0.0; num_params], v: vec![0.0; num_params], t: 0 }
    }

    pub fn for_net(config: AdamConfig, net: &Mlp) -> Self {
        Self::new(config, net.num_params())
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, net: &mut Mlp, grad: &[f64]) -> Result<()> {
        if grad.len() != self.m.len() || net.num_params() != self.m.len() {
            return Err(Error::Dimension { expected: self.m.len(), actual: grad.len() });
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in net
            .params_mut()
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p -= lr * mhat / (vhat.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use crate::seed;

    fn scalar(w: f64) -> Mlp {
        Mlp::from_params(&[1, 1], Activation::Relu, Activation::Identity, vec![w, 0.0]).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut rng = seed::rng(2);
        let mut net = Mlp::new(&[3, 4, 2], Activation::Relu, Activation::Tanh, &mut rng).unwrap();
        let before = net.clone();
        let mut opt = Adam::for_net(AdamConfig::with_lr(1e-2), &net);
        let zero = vec![0.0; net.num_params()];
        opt.step(&mut net, &zero).unwrap();
        assert_eq!(net, before);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn quadratic_descends_monotonically() {
        let mut net = scalar(1.0);
        let mut opt = Adam::for_net(AdamConfig::with_lr(1e-2), &net);
        let mut prev = 1.0;
        for _ in 0..100 {
            let w = net.params()[0];
            opt.step(&mut net, &[2.0 * w, 0.0]).unwrap();
            let loss = net.params()[0].powi(2);
            assert!(loss < prev);
            prev = loss;
        }
        assert!(prev < 0.5);
    }

    #[test]
    fn deterministic() {
        let mut a = scalar(0.3);
        let mut b = scalar(0.3);
        let mut oa = Adam::for_net(AdamConfig::with_lr(1e-3), &a);
        let mut ob = Adam::for_net(AdamConfig::with_lr(1e-3), &b);
        for g in [0.5, -0.1, 2.0] {
            oa.step(&mut a, &[g, g]).unwrap();
            ob.step(&mut b, &[g, g]).unwrap();
        }
        assert_eq!(a, b);
        assert_eq!(oa, ob);
    }

    #[test]
    fn shape_mismatch() {
        let mut net = scalar(1.0);
        let mut opt = Adam::for_net(AdamConfig::with_lr(1e-3), &net);
        assert!(opt.step(&mut net, &[1.0]).is_err());
    }
}
