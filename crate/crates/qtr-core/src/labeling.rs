//! Teacher soft-labeling: attach the teacher's output logits to examples.

use rayon::prelude::*;

use crate::corpus::Example;
use crate::error::{Error, Result};
use crate::input::assemble_input;
use crate::model::Model;
use crate::scalar::Scalar;
use crate::vocab::Vocab;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelingSummary {
    pub labeled: usize,
    pub skipped: usize,
}

/// Run the teacher over every example and attach its two logits. Hard
/// labels are untouched. Examples that fail to assemble (degenerate or
/// uncoverable text) are skipped and counted; output order follows input
/// order.
pub fn label_with_teacher<S: Scalar>(
    examples: &[Example],
    teacher: &Model<S>,
    vocab: &Vocab,
) -> Result<(Vec<Example>, LabelingSummary)> {
    if teacher.vocab_fingerprint != vocab.fingerprint() {
        return Err(Error::FingerprintMismatch {
            in_file: teacher.vocab_fingerprint.clone(),
            current: vocab.fingerprint(),
        });
    }
    let labeled: Vec<Option<Example>> = examples
        .par_iter()
        .map(|e| {
            let seq = match assemble_input(&e.query, &e.title, vocab) {
                Ok(seq) => seq,
                Err(Error::EmptyText | Error::DegenerateInput) => return Ok(None),
                Err(other) => return Err(other),
            };
            let [l0, l1] = teacher.logits(&seq)?;
            let mut out = e.clone();
            out.teacher_logits = Some([l0.to_f64_c(), l1.to_f64_c()]);
            Ok(Some(out))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(examples.len());
    let mut summary = LabelingSummary::default();
    for item in labeled {
        match item {
            Some(e) => {
                summary.labeled += 1;
                out.push(e);
            }
            None => summary.skipped += 1,
        }
    }
    Ok((out, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::ModelSpec;
    use crate::vocab::RESERVED;

    fn toy_vocab() -> Vocab {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend((0..20).map(|i| format!("w{i}")));
        Vocab::new(tokens).unwrap()
    }

    fn toy_teacher(vocab: &Vocab) -> Model<f64> {
        let mut spec = ModelSpec::named("bert-student-1x8", vocab.len(), 12).unwrap();
        spec.embedding_trainable = true;
        Model::init(spec, vocab, 3).unwrap()
    }

    #[test]
    fn empty_input_list_gives_empty_output() {
        let vocab = toy_vocab();
        let teacher = toy_teacher(&vocab);
        let (out, summary) = label_with_teacher(&[], &teacher, &vocab).unwrap();
        assert!(out.is_empty());
        assert_eq!(summary, LabelingSummary::default());
    }

    #[test]
    fn labels_are_deterministic_and_preserve_hard_labels() {
        let vocab = toy_vocab();
        let teacher = toy_teacher(&vocab);
        let examples = vec![
            Example::labeled("w0 w1", "w1 w2 w3", 1),
            Example::unlabeled("w4", "w4 w5"),
        ];
        let (a, s1) = label_with_teacher(&examples, &teacher, &vocab).unwrap();
        let (b, _) = label_with_teacher(&examples, &teacher, &vocab).unwrap();
        assert_eq!(a, b);
        assert_eq!(s1.labeled, 2);
        assert_eq!(a[0].label, Some(1));
        assert_eq!(a[1].label, None);
        assert!(a.iter().all(|e| e.teacher_logits.is_some()));
    }

    #[test]
    fn degenerate_examples_are_skipped_and_counted() {
        let vocab = toy_vocab();
        let teacher = toy_teacher(&vocab);
        let examples = vec![
            Example::labeled("w0", "w1", 1),
            Example::labeled("", "w1", 0), // empty query cannot assemble
        ];
        let (out, summary) = label_with_teacher(&examples, &teacher, &vocab).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(summary.labeled, 1);
        assert_eq!(summary.skipped, 1);
    }

    #[test]
    fn foreign_vocab_is_rejected() {
        let vocab = toy_vocab();
        let teacher = toy_teacher(&vocab);
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend((0..20).map(|i| format!("x{i}")));
        let other = Vocab::new(tokens).unwrap();
        assert!(matches!(
            label_with_teacher(&[], &teacher, &other),
            Err(Error::FingerprintMismatch { .. })
        ));
    }
}
