//! The finite-difference oracle for gradient verification.
//!
//! Analytic gradients come from one tape backward pass; the oracle
//! recomputes each of them from two function evaluations with a central
//! difference. Meant to run in verification precision (`f64`).

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};

/// Default step for central differences in verification mode.
pub const DEFAULT_EPS: f64 = 1e-5;

/// A scalar loss evaluated on a tape, with the tape leaves that correspond
/// to parameter-store entries.
pub struct TapeEval<S> {
    pub tape: Tape<S>,
    pub loss: Var,
    pub leaves: BTreeMap<String, Var>,
}

impl<S: Scalar> TapeEval<S> {
    pub fn loss_value(&self) -> S {
        self.tape.value(self.loss).item()
    }
}

/// Compare tape gradients of `f` against central differences.
///
/// Returns the max over checked parameter values of
/// `|analytic - central| / max(1, |central|)`.
///
/// Frozen entries are skipped — the tape deliberately computes no gradient
/// for them. `max_coords_per_tensor` bounds the number of coordinates
/// sampled from each tensor (`None` checks all of them); sampling is seeded
/// and reproducible.
pub fn grad_check<S: Scalar>(
    f: &dyn Fn(&ParamStore<S>) -> Result<TapeEval<S>>,
    params: &ParamStore<S>,
    eps: S,
    max_coords_per_tensor: Option<usize>,
    seed: u64,
) -> Result<S> {
    assert!(eps > S::zero(), "eps must be positive");
    let base = f(params)?;
    let grads = base.tape.backward(base.loss)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = S::zero();
    for (name, entry) in params.iter() {
        if entry.frozen {
            continue;
        }
        let leaf = match base.leaves.get(name) {
            Some(v) => *v,
            None => continue, // parameter not used by this loss
        };
        let analytic = grads.get(leaf, entry.tensor.shape());
        let n = entry.tensor.len();
        let coords: Vec<usize> = match max_coords_per_tensor {
            Some(k) if k < n => {
                let mut picked: Vec<usize> = (0..k).map(|_| rng.gen_range(0..n)).collect();
                picked.sort_unstable();
                picked.dedup();
                picked
            }
            _ => (0..n).collect(),
        };
        for idx in coords {
            let plus = f(&params.with_perturbed(name, idx, eps))?.loss_value();
            let minus = f(&params.with_perturbed(name, idx, -eps))?.loss_value();
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFiniteOracle(format!("{name}[{idx}]")));
            }
            let central = (plus - minus) / (S::from_f64_c(2.0) * eps);
            let denom = S::one().max(central.abs());
            let err = (analytic.data()[idx] - central).abs() / denom;
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
