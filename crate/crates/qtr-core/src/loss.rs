//! Training objectives: hard-label cross entropy and the two soft-target
//! distillation losses.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Cross entropy against the hard ground-truth label.
    HardCe,
    /// Mean squared error over the two logits against the teacher's logits.
    KdMse,
    /// Cross entropy between teacher and student softmax distributions.
    KdSoftCe,
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard_ce" => Ok(Self::HardCe),
            "kd_mse" => Ok(Self::KdMse),
            "kd_soft_ce" => Ok(Self::KdSoftCe),
            other => Err(Error::UnknownLossMode(other.to_string())),
        }
    }
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::HardCe => "hard_ce",
            Self::KdMse => "kd_mse",
            Self::KdSoftCe => "kd_soft_ce",
        };
        f.write_str(s)
    }
}

impl LossMode {
    pub fn needs_teacher(&self) -> bool {
        !matches!(self, Self::HardCe)
    }
}

/// Knobs for the soft losses.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossConfig {
    /// Softmax temperature for `kd_soft_ce`.
    pub temperature: f64,
    /// Weight of an additional hard-label term under the KD losses;
    /// 0 trains on the teacher signal alone.
    pub hard_blend: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            hard_blend: 0.0,
        }
    }
}

/// Negative log softmax probability of the true class, composed from
/// shift-stable primitives on the tape.
pub fn hard_ce_on_tape<S: Scalar>(tape: &mut Tape<S>, logits: Var, label: u8) -> Result<Var> {
    debug_assert!(label <= 1);
    let lse = tape.logsumexp(logits)?;
    let mut onehot = vec![S::zero(); 2];
    onehot[label as usize] = S::one();
    let mask = tape.constant(Tensor::row_vector(onehot));
    let picked = tape.mul(logits, mask)?;
    let picked = tape.sum_all(picked);
    tape.sub(lse, picked)
}

/// Mean squared error over the two logits.
pub fn kd_mse_on_tape<S: Scalar>(tape: &mut Tape<S>, logits: Var, teacher: [S; 2]) -> Result<Var> {
    let target = tape.constant(Tensor::row_vector(teacher.to_vec()));
    let diff = tape.sub(logits, target)?;
    let sq = tape.mul(diff, diff)?;
    let sum = tape.sum_all(sq);
    Ok(tape.scale(sum, S::from_f64_c(0.5)))
}

/// Cross entropy from the teacher's tempered softmax to the student's.
pub fn kd_soft_ce_on_tape<S: Scalar>(
    tape: &mut Tape<S>,
    logits: Var,
    teacher: [S; 2],
    temperature: f64,
) -> Result<Var> {
    let t = S::from_f64_c(temperature);
    let target = Tensor::row_vector(vec![teacher[0] / t, teacher[1] / t])
        .softmax_rows(2)?
        .scale(-S::one());
    let scaled = tape.scale(logits, S::one() / t);
    let lse = tape.logsumexp(scaled)?;
    let neg_target = tape.constant(target);
    let weighted = tape.mul(scaled, neg_target)?;
    let cross = tape.sum_all(weighted);
    tape.add(lse, cross)
}

/// Build the configured loss for one example.
pub fn loss_on_tape<S: Scalar>(
    tape: &mut Tape<S>,
    logits: Var,
    mode: LossMode,
    label: Option<u8>,
    teacher_logits: Option<[S; 2]>,
    cfg: &LossConfig,
) -> Result<Var> {
    let need_label = || {
        label.ok_or_else(|| Error::InvalidTrainConfig("example lacks a hard label".into()))
    };
    let need_teacher = || {
        teacher_logits
            .ok_or_else(|| Error::InvalidTrainConfig("example lacks teacher logits".into()))
    };
    match mode {
        LossMode::HardCe => hard_ce_on_tape(tape, logits, need_label()?),
        LossMode::KdMse | LossMode::KdSoftCe => {
            let soft = match mode {
                LossMode::KdMse => kd_mse_on_tape(tape, logits, need_teacher()?)?,
                _ => kd_soft_ce_on_tape(tape, logits, need_teacher()?, cfg.temperature)?,
            };
            if cfg.hard_blend > 0.0 && label.is_some() {
                let hard = hard_ce_on_tape(tape, logits, label.unwrap())?;
                let alpha = S::from_f64_c(cfg.hard_blend);
                let soft_part = tape.scale(soft, S::one() - alpha);
                let hard_part = tape.scale(hard, alpha);
                tape.add(soft_part, hard_part)
            } else {
                Ok(soft)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_hard(logits: [f64; 2], label: u8) -> f64 {
        let mut tape = Tape::new();
        let l = tape.leaf(Tensor::row_vector(logits.to_vec()));
        let loss = hard_ce_on_tape(&mut tape, l, label).unwrap();
        tape.value(loss).item()
    }

    #[test]
    fn uniform_logits_cost_ln_two() {
        assert!((eval_hard([0.0, 0.0], 0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((eval_hard([0.0, 0.0], 1) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn saturated_logits() {
        // logits argmax is class 0; the wrong class costs the margin
        let wrong = eval_hard([20.0, -20.0], 1);
        assert!((wrong - 40.0).abs() < 1e-9, "wrong-class loss {wrong}");
        let right = eval_hard([20.0, -20.0], 0);
        assert!(right < 1e-15, "right-class loss {right}");
    }

    #[test]
    fn matches_high_precision_reference() {
        // values computed with a 60-digit reference
        assert!((eval_hard([0.3, -1.2], 1) - 1.701_413_277_982_752_4).abs() < 1e-15);
        assert!((eval_hard([0.3, -1.2], 0) - 0.201_413_277_982_752_41).abs() < 1e-15);
        assert!((eval_hard([2.5, 0.75], 0) - 0.160_224_150_438_087_22).abs() < 1e-15);
        assert!((eval_hard([-0.125, 1.5], 1) - 0.179_744_635_385_659_05).abs() < 1e-15);
    }

    #[test]
    fn huge_logits_stay_finite() {
        assert!(eval_hard([1000.0, -1000.0], 1).is_finite());
    }

    fn eval_mse(student: [f64; 2], teacher: [f64; 2]) -> f64 {
        let mut tape = Tape::new();
        let l = tape.leaf(Tensor::row_vector(student.to_vec()));
        let loss = kd_mse_on_tape(&mut tape, l, teacher).unwrap();
        tape.value(loss).item()
    }

    #[test]
    fn kd_mse_cases() {
        assert_eq!(eval_mse([1.5, -0.5], [1.5, -0.5]), 0.0);
        // ((1-0)^2 + (0-1)^2) / 2 = 1
        assert_eq!(eval_mse([1.0, 0.0], [0.0, 1.0]), 1.0);
        assert!(eval_mse([0.3, 0.4], [0.1, -0.2]) > 0.0);
    }

    #[test]
    fn kd_soft_ce_uniform_target_costs_ln_two() {
        let mut tape = Tape::new();
        let l = tape.leaf(Tensor::row_vector(vec![0.0, 0.0]));
        let loss = kd_soft_ce_on_tape(&mut tape, l, [0.0, 0.0], 1.0).unwrap();
        assert!((tape.value(loss).item() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn blend_interpolates_between_soft_and_hard() {
        let run = |blend: f64| -> f64 {
            let mut tape = Tape::new();
            let l = tape.leaf(Tensor::row_vector(vec![0.2, -0.4]));
            let cfg = LossConfig {
                temperature: 1.0,
                hard_blend: blend,
            };
            let loss = loss_on_tape(
                &mut tape,
                l,
                LossMode::KdMse,
                Some(1),
                Some([0.5, 0.1]),
                &cfg,
            )
            .unwrap();
            tape.value(loss).item()
        };
        let soft_only = run(0.0);
        let hard_only = run(1.0);
        let mid = run(0.5);
        assert!((mid - 0.5 * (soft_only + hard_only)).abs() < 1e-12);
    }

    #[test]
    fn mode_parsing_round_trips() {
        for (s, m) in [
            ("hard_ce", LossMode::HardCe),
            ("kd_mse", LossMode::KdMse),
            ("kd_soft_ce", LossMode::KdSoftCe),
        ] {
            assert_eq!(LossMode::from_str(s).unwrap(), m);
            assert_eq!(m.to_string(), s);
        }
        assert!(matches!(
            LossMode::from_str("kd_js"),
            Err(Error::UnknownLossMode(_))
        ));
    }
}
