//! Property tests for the input pipeline and numeric invariants.

use proptest::prelude::*;

use qtr_core::augment::filter_overlap;
use qtr_core::corpus::Example;
use qtr_core::input::{assemble_ids, MAX_INPUT_LEN};
use qtr_core::tensor::Tensor;
use qtr_core::vocab::{Vocab, RESERVED};
use qtr_core::wordpiece::{detokenize, wordpiece_tokenize};

fn test_vocab(words: u32) -> Vocab {
    let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
    tokens.extend((0..words).map(|i| format!("w{i}")));
    Vocab::new(tokens).unwrap()
}

proptest! {
    #[test]
    fn assembled_inputs_respect_structure(q_len in 1usize..60, t_len in 1usize..60) {
        let vocab = test_vocab(130);
        let q: Vec<u32> = (0..q_len as u32).map(|i| i + 5).collect();
        let t: Vec<u32> = (0..t_len as u32).map(|i| i + 65).collect();
        let seq = assemble_ids(&q, &t, &vocab).unwrap();

        prop_assert!(seq.true_len <= MAX_INPUT_LEN);
        prop_assert_eq!(seq.ids.len(), seq.true_len);
        prop_assert_eq!(seq.ids[0], vocab.cls_id());
        let sep_count = seq.ids.iter().filter(|&&id| id == vocab.sep_id()).count();
        prop_assert_eq!(sep_count, 2);
        let cls_count = seq.ids.iter().filter(|&&id| id == vocab.cls_id()).count();
        prop_assert_eq!(cls_count, 1);

        let first_sep = seq.ids.iter().position(|&id| id == vocab.sep_id()).unwrap();
        let second_sep = seq.ids.iter().rposition(|&id| id == vocab.sep_id()).unwrap();
        let kept_q = &seq.ids[1..first_sep];
        let kept_t = &seq.ids[first_sep + 1..second_sep];
        // each side keeps at least one token and is a prefix of its input
        prop_assert!(!kept_q.is_empty());
        prop_assert!(!kept_t.is_empty());
        prop_assert_eq!(kept_q, &q[..kept_q.len()]);
        prop_assert_eq!(kept_t, &t[..kept_t.len()]);
        // segment ids flip right after the first separator
        for (i, &s) in seq.segments.iter().enumerate() {
            prop_assert_eq!(s, u8::from(i > first_sep));
        }
        // nothing is pruned when everything fits
        if q_len + t_len + 3 <= MAX_INPUT_LEN {
            prop_assert_eq!(kept_q.len(), q_len);
            prop_assert_eq!(kept_t.len(), t_len);
        }
    }

    #[test]
    fn wordpiece_round_trips_covered_text(word_ids in prop::collection::vec(0u32..40, 1..8)) {
        let vocab = test_vocab(40);
        let text = word_ids
            .iter()
            .map(|i| format!("w{i}"))
            .collect::<Vec<_>>()
            .join(" ");
        let pieces = wordpiece_tokenize(&text, &vocab).unwrap();
        prop_assert_eq!(detokenize(&pieces), text);
    }

    #[test]
    fn softmax_rows_are_shift_invariant_distributions(
        data in prop::collection::vec(-30.0f64..30.0, 12),
        shift in -100.0f64..100.0,
    ) {
        let x = Tensor::<f64>::new(3, 4, data.clone());
        let y = x.softmax_rows(4).unwrap();
        for r in 0..3 {
            let sum: f64 = y.row_slice(r).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(y.row_slice(r).iter().all(|&p| p >= 0.0));
        }
        let shifted = Tensor::<f64>::new(3, 4, data.iter().map(|v| v + shift).collect());
        let z = shifted.softmax_rows(4).unwrap();
        for (a, b) in y.data().iter().zip(z.data()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn filter_overlap_is_idempotent(
        n_aug in 0usize..40,
        n_eval in 1usize..20,
        collide_every in 1usize..5,
    ) {
        let dev: Vec<Example> = (0..n_eval)
            .map(|i| Example::labeled(format!("dq{i}"), format!("dt{i}"), 1))
            .collect();
        let test: Vec<Example> = (0..n_eval)
            .map(|i| Example::labeled(format!("tq{i}"), format!("tt{i}"), 0))
            .collect();
        let aug: Vec<Example> = (0..n_aug)
            .map(|i| {
                if i % collide_every == 0 && n_eval > 0 {
                    Example::unlabeled(format!("dq{}", i % n_eval), format!("fresh{i}"))
                } else {
                    Example::unlabeled(format!("aq{i}"), format!("at{i}"))
                }
            })
            .collect();
        let once = filter_overlap(aug, &dev, &test);
        let twice = filter_overlap(once.clone(), &dev, &test);
        prop_assert_eq!(once, twice);
    }
}

#[test]
fn deterministic_ops_given_identical_inputs() {
    let x = Tensor::<f64>::new(4, 6, (0..24).map(|i| (i as f64).sin()).collect());
    let w = Tensor::<f64>::new(6, 3, (0..18).map(|i| (i as f64).cos()).collect());
    let a = x.matmul(&w).unwrap();
    let b = x.matmul(&w).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        x.softmax_rows(6).unwrap(),
        x.softmax_rows(6).unwrap()
    );
}
