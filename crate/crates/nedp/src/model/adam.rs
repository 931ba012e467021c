//! Adam optimizer state over named parameter blocks.

use ndarray::{ArrayD, ArrayViewD, ArrayViewMutD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment accumulators mirroring a fixed list of parameter
/// blocks, plus the shared step counter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<ArrayD<f64>>,
    v: Vec<ArrayD<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, blocks: &[ArrayViewD<'_, f64>]) -> AdamState {
        AdamState {
            lr,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            t: 0,
            m: blocks.iter().map(|b| ArrayD::zeros(b.raw_dim())).collect(),
            v: blocks.iter().map(|b| ArrayD::zeros(b.raw_dim())).collect(),
        }
    }

    /// One bias-corrected update across all blocks. `names` label the blocks
    /// for error reporting and must parallel `params` and `grads`.
    pub fn step(
        &mut self,
        names: &[&'static str],
        params: &mut [ArrayViewMutD<'_, f64>],
        grads: &[ArrayViewD<'_, f64>],
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::dimension(format!(
                "adam state tracks {} blocks but got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (name, g) in names.iter().zip(grads) {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteGradient { block: name });
            }
        }
        self.t += 1;
        let corr1 = 1.0 - self.beta1.powi(self.t as i32);
        let corr2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            m.zip_mut_with(g, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            v.zip_mut_with(g, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            ndarray::Zip::from(&mut *p)
                .and(&*m)
                .and(&*v)
                .for_each(|p, &m, &v| {
                    *p -= self.lr * (m / corr1) / ((v / corr2).sqrt() + self.eps);
                });
        }
        Ok(())
    }
}
