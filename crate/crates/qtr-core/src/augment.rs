//! Unlabeled data augmentation for distillation, plus dev/test overlap
//! filtering.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::corpus::Example;
use crate::error::{Error, Result};
use crate::gen::{GenConfig, PairSampler, World};
use crate::vocab::MASK;

/// Relative weights of the augmentation strategies.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AugConfig {
    /// Replace one random word of a training pair with `[MASK]`.
    pub mask_weight: f64,
    /// Keep a random contiguous word span of query and title.
    pub ngram_weight: f64,
    /// Draw a fresh pair from the synthetic generator, label discarded.
    pub resample_weight: f64,
}

impl Default for AugConfig {
    fn default() -> Self {
        Self {
            mask_weight: 1.0,
            ngram_weight: 1.0,
            resample_weight: 2.0,
        }
    }
}

impl AugConfig {
    fn total(&self) -> Result<f64> {
        let t = self.mask_weight + self.ngram_weight + self.resample_weight;
        if !(t > 0.0) || self.mask_weight < 0.0 || self.ngram_weight < 0.0 || self.resample_weight < 0.0
        {
            return Err(Error::InvalidGenConfig(
                "augmentation weights must be non-negative with a positive sum".into(),
            ));
        }
        Ok(t)
    }
}

fn mask_one_word(rng: &mut ChaCha20Rng, source: &Example) -> Example {
    let q_words: Vec<&str> = source.query.split_whitespace().collect();
    let t_words: Vec<&str> = source.title.split_whitespace().collect();
    let total = q_words.len() + t_words.len();
    let pos = rng.gen_range(0..total);
    let rebuild = |words: &[&str], at: Option<usize>| -> String {
        words
            .iter()
            .enumerate()
            .map(|(i, w)| if Some(i) == at { MASK } else { *w })
            .collect::<Vec<_>>()
            .join(" ")
    };
    if pos < q_words.len() {
        Example::unlabeled(rebuild(&q_words, Some(pos)), rebuild(&t_words, None))
    } else {
        Example::unlabeled(
            rebuild(&q_words, None),
            rebuild(&t_words, Some(pos - q_words.len())),
        )
    }
}

fn ngram_span(rng: &mut ChaCha20Rng, text: &str) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let len = rng.gen_range(1..=words.len());
    let start = rng.gen_range(0..=words.len() - len);
    words[start..start + len].join(" ")
}

/// Produce up to `n` distinct unlabeled pairs from the training corpus and
/// the generator inventory. Outputs are deduplicated; the count can fall
/// short only when the source material cannot yield `n` distinct pairs.
pub fn augment(
    train: &[Example],
    world: &World,
    gen_cfg: &GenConfig,
    aug_cfg: &AugConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<Example>> {
    let total = aug_cfg.total()?;
    if n == 0 {
        return Ok(Vec::new());
    }
    if train.is_empty() && aug_cfg.resample_weight <= 0.0 {
        return Err(Error::InvalidGenConfig(
            "augmentation from an empty corpus needs the resample strategy".into(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(0x61756700); // distinct from corpus generation streams
    let mut sampler = PairSampler::new(world, gen_cfg.match_probability()?, seed, 0x61756701);

    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let max_attempts = n.saturating_mul(50).max(10_000);
    let mut attempts = 0;
    while out.len() < n && attempts < max_attempts {
        attempts += 1;
        let pick = rng.gen_range(0.0..total);
        let example = if pick < aug_cfg.mask_weight && !train.is_empty() {
            let src = &train[rng.gen_range(0..train.len())];
            mask_one_word(&mut rng, src)
        } else if pick < aug_cfg.mask_weight + aug_cfg.ngram_weight && !train.is_empty() {
            let src = &train[rng.gen_range(0..train.len())];
            Example::unlabeled(ngram_span(&mut rng, &src.query), ngram_span(&mut rng, &src.title))
        } else {
            sampler.draw_unlabeled()
        };
        if seen.insert((example.query.clone(), example.title.clone())) {
            out.push(example);
        }
    }
    Ok(out)
}

/// Drop augmented examples whose query appears as a dev/test query or whose
/// title appears as a dev/test title. Survivor order is preserved.
pub fn filter_overlap(augmented: Vec<Example>, dev: &[Example], test: &[Example]) -> Vec<Example> {
    let queries: HashSet<&str> = dev
        .iter()
        .chain(test)
        .map(|e| e.query.as_str())
        .collect();
    let titles: HashSet<&str> = dev
        .iter()
        .chain(test)
        .map(|e| e.title.as_str())
        .collect();
    augmented
        .into_iter()
        .filter(|e| !queries.contains(e.query.as_str()) && !titles.contains(e.title.as_str()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::generate_synthetic_corpus;

    fn setup() -> (crate::gen::GeneratedCorpus, GenConfig) {
        let cfg = GenConfig {
            train_size: 500,
            dev_size: 100,
            test_size: 100,
            ..GenConfig::default()
        };
        (generate_synthetic_corpus(&cfg, 42).unwrap(), cfg)
    }

    #[test]
    fn zero_n_returns_empty() {
        let (g, cfg) = setup();
        let out = augment(&g.split.train, &g.world, &cfg, &AugConfig::default(), 0, 1).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn masking_changes_exactly_one_word_position() {
        let (g, cfg) = setup();
        let aug_cfg = AugConfig {
            mask_weight: 1.0,
            ngram_weight: 0.0,
            resample_weight: 0.0,
        };
        let out = augment(&g.split.train, &g.world, &cfg, &aug_cfg, 1000, 9).unwrap();
        let sources: HashSet<(Vec<&str>, Vec<&str>)> = g
            .split
            .train
            .iter()
            .map(|e| {
                (
                    e.query.split_whitespace().collect(),
                    e.title.split_whitespace().collect(),
                )
            })
            .collect();
        for e in &out {
            let q: Vec<&str> = e.query.split_whitespace().collect();
            let t: Vec<&str> = e.title.split_whitespace().collect();
            let masks = q.iter().chain(&t).filter(|w| **w == MASK).count();
            assert_eq!(masks, 1, "expected exactly one [MASK] in {e:?}");
            // some source pair differs from this output in exactly the
            // masked position
            let matches = sources.iter().any(|(sq, st)| {
                sq.len() == q.len()
                    && st.len() == t.len()
                    && sq
                        .iter()
                        .chain(st)
                        .zip(q.iter().chain(&t))
                        .filter(|(a, b)| a != b)
                        .all(|(_, b)| *b == MASK)
                    && sq
                        .iter()
                        .chain(st)
                        .zip(q.iter().chain(&t))
                        .filter(|(a, b)| a != b)
                        .count()
                        == 1
            });
            assert!(matches, "no source differs in exactly one position: {e:?}");
        }
    }

    #[test]
    fn ngram_outputs_are_contiguous_spans() {
        let (g, cfg) = setup();
        let aug_cfg = AugConfig {
            mask_weight: 0.0,
            ngram_weight: 1.0,
            resample_weight: 0.0,
        };
        let out = augment(&g.split.train, &g.world, &cfg, &aug_cfg, 200, 3).unwrap();
        for e in &out {
            let found = g.split.train.iter().any(|src| {
                is_span(&e.query, &src.query) && is_span(&e.title, &src.title)
            });
            assert!(found, "not a span of any source: {e:?}");
        }
    }

    fn is_span(needle: &str, hay: &str) -> bool {
        let n: Vec<&str> = needle.split_whitespace().collect();
        let h: Vec<&str> = hay.split_whitespace().collect();
        h.windows(n.len()).any(|w| w == n.as_slice())
    }

    #[test]
    fn outputs_are_distinct_and_reproducible() {
        let (g, cfg) = setup();
        let a = augment(&g.split.train, &g.world, &cfg, &AugConfig::default(), 500, 5).unwrap();
        let b = augment(&g.split.train, &g.world, &cfg, &AugConfig::default(), 500, 5).unwrap();
        assert_eq!(a, b);
        let mut seen = HashSet::new();
        for e in &a {
            assert!(seen.insert((e.query.clone(), e.title.clone())));
        }
    }

    #[test]
    fn filter_removes_constructed_collisions() {
        let (g, _) = setup();
        let dev = &g.split.dev;
        let test = &g.split.test;
        // 100 synthetic pairs, 30 of them share a dev query
        let mut aug = Vec::new();
        for i in 0..70 {
            aug.push(Example::unlabeled(format!("fresh query {i}"), format!("fresh title {i}")));
        }
        for i in 0..30 {
            aug.push(Example::unlabeled(dev[i].query.clone(), format!("fresh title x{i}")));
        }
        let filtered = filter_overlap(aug.clone(), dev, test);
        assert_eq!(filtered.len(), 70);
        // an example with a test-set title is removed too
        let one = vec![Example::unlabeled("whatever", test[0].title.clone())];
        assert!(filter_overlap(one, dev, test).is_empty());
        // idempotent
        let again = filter_overlap(filtered.clone(), dev, test);
        assert_eq!(again, filtered);
        // disjoint set passes through unchanged
        let disjoint = vec![Example::unlabeled("no such query", "no such title")];
        assert_eq!(filter_overlap(disjoint.clone(), dev, test), disjoint);
    }
}
