//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::tensor::{DiffTensor, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> AdamConfig<T> {
    pub fn with_lr(lr: T) -> Self {
        AdamConfig {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }
}

/// Per-parameter first/second moment estimates plus a step counter. One
/// state drives one fixed list of parameter tensors, matched by position.
pub struct AdamState<T> {
    cfg: AdamConfig<T>,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(cfg: AdamConfig<T>, params: &[DiffTensor<T>]) -> Self {
        AdamState {
            cfg,
            m: params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
            v: params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn set_lr(&mut self, lr: T) {
        self.cfg.lr = lr;
    }

    pub fn lr(&self) -> T {
        self.cfg.lr
    }

    /// One Adam update. `grads[i]` pairs with `params[i]`; `None` skips the
    /// parameter (its moments still decay is NOT applied — untouched).
    pub fn apply(
        &mut self,
        params: &mut [DiffTensor<T>],
        grads: &[Option<Vec<T>>],
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.m.len()],
                got: vec![params.len(), grads.len()],
            });
        }
        self.step += 1;
        let t = self.step;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.cfg;
        let bc1 = T::one() - beta1.powi(t as i32);
        let bc2 = T::one() - beta2.powi(t as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let Some(g) = &grads[i] else { continue };
            if g.len() != p.len() {
                return Err(Error::ShapeMismatch {
                    expected: vec![p.len()],
                    got: vec![g.len()],
                });
            }
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let pv = p.values_mut();
            for j in 0..g.len() {
                let gj = g[j];
                m[j] = beta1 * m[j] + (T::one() - beta1) * gj;
                v[j] = beta2 * v[j] + (T::one() - beta2) * gj * gj;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                pv[j] = pv[j] - lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Serialize moments for checkpoint/resume: (m tensors, v tensors, step).
    pub fn snapshot(&self) -> (Vec<Vec<T>>, Vec<Vec<T>>, u64) {
        (self.m.clone(), self.v.clone(), self.step)
    }

    pub fn restore(&mut self, m: Vec<Vec<T>>, v: Vec<Vec<T>>, step: u64) -> Result<()> {
        if m.len() != self.m.len() || v.len() != self.v.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.m.len()],
                got: vec![m.len(), v.len()],
            });
        }
        self.m = m;
        self.v = v;
        self.step = step;
        Ok(())
    }
}
