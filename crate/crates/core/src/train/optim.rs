use alloc::vec;
use alloc::vec::Vec;

use crate::params::{ComponentSet, Grads, ParamStore};

/// L2 norm over the gradients of trainable tensors.
pub fn global_norm(store: &ParamStore, g: &Grads) -> f64 {
    let trainable = g.trainable();
    let mut sum = 0.0;
    for s in store.specs() {
        if trainable.contains(s.component) {
            sum += g.data()[s.offset..s.offset + s.len].iter().map(|v| v * v).sum::<f64>();
        }
    }
    libm::sqrt(sum)
}

/// Rescales gradients so their global norm is at most `max_norm`; returns the
/// pre-clip norm.
pub fn clip_grad_norm(store: &ParamStore, g: &mut Grads, max_norm: f64) -> f64 {
    let norm = global_norm(store, g);
    if norm > max_norm {
        let scale = max_norm / (norm + 1e-6);
        g.data_mut().iter_mut().for_each(|v| *v *= scale);
    }
    norm
}

/// Adam with decoupled weight decay; touches only trainable tensors.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
    trainable: ComponentSet,
}

impl AdamW {
    pub fn new(store: &ParamStore, trainable: ComponentSet, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        AdamW {
            beta1,
            beta2,
            eps,
            weight_decay,
            m: vec![0.0; store.len()],
            v: vec![0.0; store.len()],
            t: 0,
            trainable,
        }
    }

    pub fn steps_taken(&self) -> u32 {
        self.t
    }

    pub fn step(&mut self, store: &mut ParamStore, g: &Grads, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        let specs: Vec<_> = store
            .specs()
            .iter()
            .filter(|s| self.trainable.contains(s.component))
            .map(|s| (s.offset, s.len, s.decay))
            .collect();
        let params = store.data_mut();
        for (offset, len, decay) in specs {
            let range = offset..offset + len;
            let slots = params[range.clone()]
                .iter_mut()
                .zip(&g.data()[range.clone()])
                .zip(self.m[range.clone()].iter_mut().zip(&mut self.v[range]));
            for ((p, &grad), (m, v)) in slots {
                if decay {
                    *p *= 1.0 - lr * self.weight_decay;
                }
                *m = self.beta1 * *m + (1.0 - self.beta1) * grad;
                *v = self.beta2 * *v + (1.0 - self.beta2) * grad * grad;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
    }
}
