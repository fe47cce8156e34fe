//! AdamW: bias-corrected Adam with decoupled weight decay.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// First/second moment tensors per parameter plus the step counter.
#[derive(Debug, Default)]
pub struct AdamState<S> {
    m: BTreeMap<String, Vec<S>>,
    v: BTreeMap<String, Vec<S>>,
    step: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new() -> Self {
        Self {
            m: BTreeMap::new(),
            v: BTreeMap::new(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One AdamW update over every trainable parameter with a gradient.
///
/// Decay is applied directly to the parameter (scaled by the learning rate,
/// not routed through the gradient) and only where the entry opted in.
/// Frozen parameters are never touched. A non-finite gradient aborts the
/// step before anything is modified, naming the parameter.
pub fn adamw_step<S: Scalar>(
    params: &mut ParamStore<S>,
    grads: &BTreeMap<String, Tensor<S>>,
    state: &mut AdamState<S>,
    lr: f64,
    hyper: &AdamHyper,
) -> Result<()> {
    for (name, g) in grads {
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient(name.clone()));
        }
        match params.entry(name) {
            None => return Err(Error::NonFiniteGradient(format!("unknown parameter {name}"))),
            Some(e) => {
                if e.frozen {
                    return Err(Error::InvalidTrainConfig(format!(
                        "gradient supplied for frozen parameter {name}"
                    )));
                }
                if e.tensor.shape() != g.shape() {
                    return Err(Error::ShapeMismatch {
                        op: "adamw_step",
                        lhs: e.tensor.shape(),
                        rhs: g.shape(),
                    });
                }
            }
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let beta1 = S::from_f64_c(hyper.beta1);
    let beta2 = S::from_f64_c(hyper.beta2);
    let eps = S::from_f64_c(hyper.eps);
    let lr_s = S::from_f64_c(lr);
    let bc1 = S::one() - beta1.powi(t);
    let bc2 = S::one() - beta2.powi(t);

    for (name, g) in grads {
        let entry = params.entry(name).unwrap();
        let decay = entry.decay;
        let n = entry.tensor.len();
        let m = state.m.entry(name.clone()).or_insert_with(|| vec![S::zero(); n]);
        let v = state.v.entry(name.clone()).or_insert_with(|| vec![S::zero(); n]);
        let mut new = entry.tensor.data().to_vec();
        for ((p, (m_i, v_i)), &g_i) in new.iter_mut().zip(m.iter_mut().zip(v.iter_mut())).zip(g.data())
        {
            *m_i = beta1 * *m_i + (S::one() - beta1) * g_i;
            *v_i = beta2 * *v_i + (S::one() - beta2) * g_i * g_i;
            let m_hat = *m_i / bc1;
            let v_hat = *v_i / bc2;
            let mut step = lr_s * m_hat / (v_hat.sqrt() + eps);
            if decay {
                step = step + lr_s * S::from_f64_c(hyper.weight_decay) * *p;
            }
            *p = *p - step;
        }
        let shape = entry.tensor.shape();
        params.set_tensor(name, Tensor::new(shape[0], shape[1], new));
    }
    Ok(())
}
