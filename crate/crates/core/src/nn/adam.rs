use ndarray::Zip;

use super::{Gradients, Mlp, NnError};

/// Adaptive-moment optimizer with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    /// Descends along `grads`. Parameters are left untouched when any
    /// gradient entry is non-finite.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<(), NnError> {
        if grads.layers.len() != net.layers.len() || self.m.layers.len() != net.layers.len() {
            return Err(NnError::Architecture);
        }
        for (g, p) in grads.layers.iter().zip(&net.layers) {
            if g.w.dim() != p.w.dim() || g.b.dim() != p.b.dim() {
                return Err(NnError::Architecture);
            }
        }
        if !grads.is_finite() {
            return Err(NnError::NonFinite("gradient"));
        }
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let lr = self.lr;
        let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for l in 0..net.layers.len() {
            let (p, g) = (&mut net.layers[l], &grads.layers[l]);
            let (m, v) = (&mut self.m.layers[l], &mut self.v.layers[l]);
            Zip::from(&mut p.w).and(&g.w).and(&mut m.w).and(&mut v.w).for_each(update);
            Zip::from(&mut p.b).and(&g.b).and(&mut m.b).and(&mut v.b).for_each(update);
        }
        Ok(())
    }
}
