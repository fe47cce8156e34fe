//! Synthetic query-title corpus generation.
//!
//! Titles describe a product: brand, optional adjectives, a category noun,
//! an alphanumeric model code, an optional media format and filler words.
//! The ground-truth label is a deterministic rule on the pair:
//!
//! * every attribute word in the query (brand, model code, format) must
//!   also appear in the title, and
//! * the fraction of query words present in the title must reach the
//!   coverage threshold.
//!
//! Stored labels are the rule output flipped with a configured noise rate.
//! Generation is bit-reproducible from (config, seed): the word inventory,
//! every sample and the noise flips all come from seeded ChaCha streams.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::corpus::{CorpusSplit, Example};
use crate::error::{Error, Result};
use crate::vocab::{Vocab, RESERVED};

const CATEGORIES: &[&str] = &[
    "camera", "laptop", "phone", "tablet", "headphones", "speaker", "monitor", "keyboard",
    "mouse", "printer", "router", "modem", "drone", "watch", "charger", "cable", "battery",
    "case", "stand", "lamp", "desk", "chair", "shelf", "blender", "toaster", "kettle", "mixer",
    "vacuum", "heater", "fan", "drill", "hammer", "wrench", "saw", "ladder", "jacket", "shirt",
    "shoes", "boots", "backpack", "wallet", "sunglasses", "guitar", "piano", "violin",
    "microphone", "projector", "scanner",
];

const ADJECTIVES: &[&str] = &[
    "wireless", "portable", "compact", "digital", "smart", "classic", "deluxe", "premium",
    "rugged", "slim", "foldable", "ergonomic", "adjustable", "rechargeable", "waterproof",
    "vintage", "modern", "heavy", "light", "mini", "ultra", "professional", "universal",
    "magnetic", "cordless", "electric", "manual", "automatic", "silent", "fast", "durable",
    "flexible", "padded", "insulated", "reflective", "ceramic",
];

const FILLERS: &[&str] = &[
    "with", "for", "kit", "bundle", "set", "pack", "edition", "series", "model", "new",
    "original", "genuine", "official", "replacement", "spare", "accessory", "home", "office",
    "travel", "outdoor", "indoor", "kids", "adult", "gift", "black", "white", "silver", "blue",
    "red", "green",
];

const FORMATS: &[&str] = &["dvd", "bluray", "cd", "vinyl", "paperback", "hardcover"];

const CODE_PREFIX_PAIRS: &[&str] = &[
    "cm", "xr", "gt", "dx", "mk", "zt", "qs", "vr", "px", "kb", "ln", "sr", "tf", "wd", "hp",
    "jx", "bq", "fz", "gm", "rk",
];

const BRAND_ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "gr",
    "kr", "pl", "tr",
];
const BRAND_VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

const MIN_BRANDS: usize = 12;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GenConfig {
    pub train_size: usize,
    pub dev_size: usize,
    pub test_size: usize,
    pub vocab_size: usize,
    pub positive_rate: f64,
    pub noise_rate: f64,
    pub coverage_threshold: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            train_size: 50_000,
            dev_size: 5_000,
            test_size: 10_000,
            vocab_size: 360,
            positive_rate: 0.785,
            noise_rate: 0.1,
            coverage_threshold: 0.6,
        }
    }
}

impl GenConfig {
    /// Probability of constructing a rule-positive pair so that the rate of
    /// stored labels (after noise flips) hits the target in expectation.
    pub fn match_probability(&self) -> Result<f64> {
        if !(0.0..0.5).contains(&self.noise_rate) {
            return Err(Error::InvalidGenConfig(format!(
                "noise rate must be in [0, 0.5), got {}",
                self.noise_rate
            )));
        }
        if self.positive_rate <= 0.0 || self.positive_rate >= 1.0 {
            return Err(Error::InvalidGenConfig(format!(
                "positive rate must be strictly inside (0, 1), got {}",
                self.positive_rate
            )));
        }
        let p = (self.positive_rate - self.noise_rate) / (1.0 - 2.0 * self.noise_rate);
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidGenConfig(format!(
                "positive rate {} unreachable under noise rate {}",
                self.positive_rate, self.noise_rate
            )));
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.match_probability()?;
        if !(0.0 < self.coverage_threshold && self.coverage_threshold <= 1.0) {
            return Err(Error::InvalidGenConfig(format!(
                "coverage threshold must be in (0, 1], got {}",
                self.coverage_threshold
            )));
        }
        if self.train_size == 0 || self.dev_size == 0 || self.test_size == 0 {
            return Err(Error::InvalidGenConfig("all split sizes must be positive".into()));
        }
        World::required_vocab(self.vocab_size)?;
        Ok(())
    }
}

/// The word inventory behind a generated corpus. Brands beyond the fixed
/// base lists are synthesized pronounceable strings.
#[derive(Debug, Clone)]
pub struct World {
    brands: Vec<String>,
    formats: Vec<String>,
    code_prefixes: Vec<String>,
    brand_set: HashSet<String>,
    format_set: HashSet<String>,
    prefix_set: HashSet<String>,
    coverage_threshold: f64,
}

impl World {
    fn required_vocab(vocab_size: usize) -> Result<usize> {
        let fixed = RESERVED.len()
            + CATEGORIES.len()
            + ADJECTIVES.len()
            + FILLERS.len()
            + FORMATS.len()
            + 26                       // single letters for code prefixes
            + CODE_PREFIX_PAIRS.len()
            + 10                       // ##0..##9
            + 100; // ##00..##99
        let min = fixed + MIN_BRANDS;
        if vocab_size < min {
            return Err(Error::InvalidGenConfig(format!(
                "vocab size {vocab_size} too small, need at least {min}"
            )));
        }
        Ok(vocab_size - fixed)
    }

    /// Build the inventory and its vocabulary. Token order is fixed:
    /// reserved, base lists, code pieces, then brands.
    pub fn build(cfg: &GenConfig, seed: u64) -> Result<(Self, Vocab)> {
        let n_brands = Self::required_vocab(cfg.vocab_size)?;
        let mut rng = stream_rng(seed, 0);

        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(CATEGORIES.iter().map(|s| s.to_string()));
        tokens.extend(ADJECTIVES.iter().map(|s| s.to_string()));
        tokens.extend(FILLERS.iter().map(|s| s.to_string()));
        tokens.extend(FORMATS.iter().map(|s| s.to_string()));
        let mut code_prefixes: Vec<String> = (b'a'..=b'z').map(|c| (c as char).to_string()).collect();
        code_prefixes.extend(CODE_PREFIX_PAIRS.iter().map(|s| s.to_string()));
        tokens.extend(code_prefixes.iter().cloned());
        for d in 0..10 {
            tokens.push(format!("##{d}"));
        }
        for d in 0..100 {
            tokens.push(format!("##{d:02}"));
        }

        let mut taken: HashSet<String> = tokens.iter().cloned().collect();
        let mut brands = Vec::with_capacity(n_brands);
        while brands.len() < n_brands {
            let brand = synth_brand(&mut rng);
            if taken.insert(brand.clone()) {
                tokens.push(brand.clone());
                brands.push(brand);
            }
        }

        let world = Self {
            brand_set: brands.iter().cloned().collect(),
            brands,
            formats: FORMATS.iter().map(|s| s.to_string()).collect(),
            format_set: FORMATS.iter().map(|s| s.to_string()).collect(),
            prefix_set: code_prefixes.iter().cloned().collect(),
            code_prefixes,
            coverage_threshold: cfg.coverage_threshold,
        };
        Ok((world, Vocab::new(tokens)?))
    }

    fn is_model_code(&self, word: &str) -> bool {
        for plen in (1..=2).rev() {
            if word.len() > plen && self.prefix_set.contains(&word[..plen]) {
                let digits = &word[plen..];
                if (2..=4).contains(&digits.len())
                    && digits.bytes().all(|b| b.is_ascii_digit())
                {
                    return true;
                }
            }
        }
        false
    }

    fn is_attribute(&self, word: &str) -> bool {
        self.brand_set.contains(word) || self.format_set.contains(word) || self.is_model_code(word)
    }

    /// The deterministic ground-truth relevance rule.
    pub fn relevance_rule(&self, query: &str, title: &str) -> bool {
        let q_words: Vec<&str> = query.split_whitespace().collect();
        if q_words.is_empty() {
            return false;
        }
        let t_words: HashSet<&str> = title.split_whitespace().collect();
        let mut covered = 0usize;
        for w in &q_words {
            let present = t_words.contains(w);
            if self.is_attribute(w) && !present {
                return false;
            }
            if present {
                covered += 1;
            }
        }
        covered as f64 / q_words.len() as f64 >= self.coverage_threshold
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Head-heavy index sampling (P(idx < k) = sqrt(k/n)); corpora have
/// Zipf-like token frequencies and the rule stays learnable at small sizes
/// only when attribute tokens actually recur.
fn zipfish(rng: &mut ChaCha20Rng, n: usize) -> usize {
    let u: f64 = rng.gen();
    ((u * u) * n as f64) as usize
}

fn synth_brand(rng: &mut ChaCha20Rng) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut s = String::new();
    for _ in 0..syllables {
        s.push_str(BRAND_ONSETS[rng.gen_range(0..BRAND_ONSETS.len())]);
        s.push_str(BRAND_VOWELS[rng.gen_range(0..BRAND_VOWELS.len())]);
    }
    s
}

struct Entity {
    brand: String,
    category: String,
    code: String,
    adjectives: Vec<String>,
    format: Option<String>,
    fillers: Vec<String>,
}

/// Draws query-title pairs from the inventory; the workhorse behind both
/// corpus generation and resampling-based augmentation.
pub struct PairSampler<'w> {
    world: &'w World,
    rng: ChaCha20Rng,
    match_probability: f64,
}

impl<'w> PairSampler<'w> {
    pub fn new(world: &'w World, match_probability: f64, seed: u64, stream: u64) -> Self {
        Self {
            world,
            rng: stream_rng(seed, stream),
            match_probability,
        }
    }

    fn pick<'a>(&mut self, list: &'a [&'a str]) -> &'a str {
        list[zipfish(&mut self.rng, list.len())]
    }

    fn sample_entity(&mut self) -> Entity {
        let w = self.world;
        let brand = w.brands[zipfish(&mut self.rng, w.brands.len())].clone();
        let category = self.pick(CATEGORIES).to_string();
        let code = self.sample_code();
        let n_adj = self.rng.gen_range(0..=2);
        let adjectives = (0..n_adj).map(|_| self.pick(ADJECTIVES).to_string()).collect();
        let format = if self.rng.gen_bool(0.5) {
            Some(w.formats[self.rng.gen_range(0..w.formats.len())].clone())
        } else {
            None
        };
        let n_fill = self.rng.gen_range(0..=2);
        let fillers = (0..n_fill).map(|_| self.pick(FILLERS).to_string()).collect();
        Entity {
            brand,
            category,
            code,
            adjectives,
            format,
            fillers,
        }
    }

    fn sample_code(&mut self) -> String {
        let w = self.world;
        let prefix = &w.code_prefixes[zipfish(&mut self.rng, w.code_prefixes.len())];
        let n_digits = self.rng.gen_range(2..=4);
        let mut code = prefix.clone();
        for _ in 0..n_digits {
            code.push(char::from(b'0' + zipfish(&mut self.rng, 10) as u8));
        }
        code
    }

    fn title_of(&self, e: &Entity) -> String {
        let mut words = vec![e.brand.clone()];
        words.extend(e.adjectives.iter().cloned());
        words.push(e.category.clone());
        words.push(e.code.clone());
        if let Some(f) = &e.format {
            words.push(f.clone());
        }
        words.extend(e.fillers.iter().cloned());
        words.join(" ")
    }

    fn matching_query(&mut self, e: &Entity) -> String {
        let mut words = Vec::new();
        if self.rng.gen_bool(0.7) {
            words.push(e.brand.clone());
        }
        if self.rng.gen_bool(0.25) {
            if let Some(adj) = e.adjectives.first() {
                words.push(adj.clone());
            }
        }
        let with_model = self.rng.gen_bool(0.6);
        words.push(e.category.clone());
        if with_model {
            words.push(e.code.clone());
        }
        if let (Some(f), true) = (&e.format, self.rng.gen_bool(0.3)) {
            words.push(f.clone());
        }
        words.join(" ")
    }

    fn negative_query(&mut self, e: &Entity) -> String {
        loop {
            match self.rng.gen_range(0..5u8) {
                4 => {
                    // category mismatch: two words, half of them absent from
                    // the title, so coverage lands under any threshold > 0.5
                    if self.world.coverage_threshold <= 0.5 {
                        continue;
                    }
                    let other = loop {
                        let c = self.pick(CATEGORIES);
                        if c != e.category {
                            break c.to_string();
                        }
                    };
                    let anchor = if self.rng.gen_bool(0.5) {
                        e.brand.clone()
                    } else {
                        e.code.clone()
                    };
                    return format!("{anchor} {other}");
                }
                0 => {
                    // brand mismatch
                    let other = loop {
                        let b = &self.world.brands[self.rng.gen_range(0..self.world.brands.len())];
                        if *b != e.brand {
                            break b.clone();
                        }
                    };
                    let mut q = vec![other, e.category.clone()];
                    if self.rng.gen_bool(0.5) {
                        q.push(e.code.clone());
                    }
                    return q.join(" ");
                }
                1 => {
                    // model code mismatch: same prefix, different digits
                    let other = loop {
                        let c = self.sample_code();
                        if c != e.code {
                            break c;
                        }
                    };
                    let mut q = Vec::new();
                    if self.rng.gen_bool(0.6) {
                        q.push(e.brand.clone());
                    }
                    q.push(e.category.clone());
                    q.push(other);
                    return q.join(" ");
                }
                2 => {
                    // format mismatch; needs a title-side format to contradict
                    if e.format.is_none() {
                        continue;
                    }
                    let have = e.format.clone().unwrap();
                    let other = loop {
                        let f = &self.world.formats[self.rng.gen_range(0..self.world.formats.len())];
                        if *f != have {
                            break f.clone();
                        }
                    };
                    let mut q = vec![e.brand.clone(), e.category.clone()];
                    q.push(other);
                    return q.join(" ");
                }
                _ => {
                    // coverage dilution with non-attribute alien words
                    let mut q = vec![e.brand.clone(), e.category.clone()];
                    let title = self.title_of(e);
                    let covered = q.len();
                    let tau = self.world.coverage_threshold;
                    let mut aliens = 0usize;
                    while (covered as f64) / ((covered + aliens) as f64) >= tau {
                        aliens += 1;
                    }
                    let title_words: HashSet<&str> = title.split_whitespace().collect();
                    let mut added = 0;
                    let mut guard = 0;
                    while added < aliens && guard < 1000 {
                        guard += 1;
                        let w = match self.rng.gen_range(0..3u8) {
                            0 => self.pick(CATEGORIES),
                            1 => self.pick(ADJECTIVES),
                            _ => self.pick(FILLERS),
                        };
                        if !title_words.contains(w) && !q.iter().any(|x| x == w) {
                            q.push(w.to_string());
                            added += 1;
                        }
                    }
                    if added < aliens {
                        continue; // pathological draw, try another perturbation
                    }
                    return q.join(" ");
                }
            }
        }
    }

    /// One pair plus the rule's verdict on it.
    pub fn draw(&mut self) -> (String, String, bool) {
        loop {
            let e = self.sample_entity();
            let title = self.title_of(&e);
            let (query, want_positive) = if self.rng.gen_bool(self.match_probability) {
                (self.matching_query(&e), true)
            } else {
                (self.negative_query(&e), false)
            };
            let rule = self.world.relevance_rule(&query, &title);
            // constructions are designed to hit their intended side; resample
            // the rare degenerate draw instead of skewing the rate
            if rule == want_positive {
                return (query, title, rule);
            }
        }
    }

    /// One unlabeled pair, for augmentation.
    pub fn draw_unlabeled(&mut self) -> Example {
        let (q, t, _) = self.draw();
        Example::unlabeled(q, t)
    }

    fn noisy_label(&mut self, rule: bool, noise_rate: f64) -> u8 {
        let flip = noise_rate > 0.0 && self.rng.gen_bool(noise_rate);
        (rule ^ flip) as u8
    }
}

/// A generated corpus: vocabulary, inventory and example splits.
pub struct GeneratedCorpus {
    pub world: World,
    pub vocab: Vocab,
    pub split: CorpusSplit,
}

/// Generate train/dev/test splits, pairwise disjoint on (query, title).
pub fn generate_synthetic_corpus(cfg: &GenConfig, seed: u64) -> Result<GeneratedCorpus> {
    cfg.validate()?;
    let p_match = cfg.match_probability()?;
    let (world, vocab) = World::build(cfg, seed)?;

    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut fill = |size: usize, stream: u64| -> Result<Vec<Example>> {
        let mut sampler = PairSampler::new(&world, p_match, seed, stream);
        let mut out = Vec::with_capacity(size);
        let max_attempts = size.saturating_mul(200).max(10_000);
        let mut attempts = 0;
        while out.len() < size {
            attempts += 1;
            if attempts > max_attempts {
                return Err(Error::InvalidGenConfig(format!(
                    "could not generate {size} distinct pairs (vocabulary too small for the requested sizes)"
                )));
            }
            let (q, t, rule) = sampler.draw();
            if !seen.insert((q.clone(), t.clone())) {
                continue;
            }
            let label = sampler.noisy_label(rule, cfg.noise_rate);
            out.push(Example::labeled(q, t, label));
        }
        Ok(out)
    };

    let train = fill(cfg.train_size, 1)?;
    let dev = fill(cfg.dev_size, 2)?;
    let test = fill(cfg.test_size, 3)?;
    Ok(GeneratedCorpus {
        world,
        vocab,
        split: CorpusSplit { train, dev, test },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::positive_rate;
    use crate::wordpiece::wordpiece_tokenize;

    fn small_cfg() -> GenConfig {
        GenConfig {
            train_size: 2_000,
            dev_size: 300,
            test_size: 300,
            ..GenConfig::default()
        }
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let a = generate_synthetic_corpus(&small_cfg(), 7).unwrap();
        let b = generate_synthetic_corpus(&small_cfg(), 7).unwrap();
        let lines =
            |s: &CorpusSplit| -> Vec<String> { s.train.iter().map(|e| e.to_tsv_line()).collect() };
        assert_eq!(lines(&a.split), lines(&b.split));
        assert_eq!(a.vocab.to_file_string(), b.vocab.to_file_string());
        let c = generate_synthetic_corpus(&small_cfg(), 8).unwrap();
        assert_ne!(lines(&a.split), lines(&c.split));
    }

    #[test]
    fn zero_noise_labels_equal_the_rule() {
        let cfg = GenConfig {
            noise_rate: 0.0,
            positive_rate: 0.7,
            ..small_cfg()
        };
        let g = generate_synthetic_corpus(&cfg, 3).unwrap();
        for e in g.split.train.iter().chain(&g.split.dev).chain(&g.split.test) {
            let rule = g.world.relevance_rule(&e.query, &e.title);
            assert_eq!(e.label, Some(rule as u8), "pair {} / {}", e.query, e.title);
        }
    }

    #[test]
    fn splits_are_disjoint_on_pairs() {
        let g = generate_synthetic_corpus(&small_cfg(), 11).unwrap();
        let mut seen = HashSet::new();
        for e in g
            .split
            .train
            .iter()
            .chain(&g.split.dev)
            .chain(&g.split.test)
        {
            assert!(
                seen.insert((e.query.clone(), e.title.clone())),
                "duplicate pair across splits: {} / {}",
                e.query,
                e.title
            );
        }
    }

    #[test]
    fn generated_text_is_fully_covered_by_the_vocab() {
        let g = generate_synthetic_corpus(&small_cfg(), 5).unwrap();
        let unk = crate::vocab::UNK;
        for e in g.split.train.iter().take(500) {
            for text in [&e.query, &e.title] {
                let pieces = wordpiece_tokenize(text, &g.vocab).unwrap();
                assert!(
                    pieces.iter().all(|p| p != unk),
                    "uncovered word in: {text} -> {pieces:?}"
                );
            }
        }
    }

    #[test]
    fn infeasible_configs_are_rejected() {
        let mut cfg = small_cfg();
        cfg.positive_rate = 0.0;
        assert!(generate_synthetic_corpus(&cfg, 1).is_err());
        let mut cfg = small_cfg();
        cfg.noise_rate = 0.6;
        assert!(generate_synthetic_corpus(&cfg, 1).is_err());
        let mut cfg = small_cfg();
        cfg.vocab_size = 50;
        assert!(generate_synthetic_corpus(&cfg, 1).is_err());
        // target rate unreachable under heavy noise
        let mut cfg = small_cfg();
        cfg.positive_rate = 0.95;
        cfg.noise_rate = 0.4;
        assert!(generate_synthetic_corpus(&cfg, 1).is_err());
    }

    #[test]
    fn realized_rate_tracks_target_at_scale() {
        // the full-size check lives in the acceptance suite; this one uses
        // 10k examples and a wider band to stay fast
        let cfg = GenConfig {
            train_size: 10_000,
            dev_size: 500,
            test_size: 500,
            ..GenConfig::default()
        };
        let g = generate_synthetic_corpus(&cfg, 7).unwrap();
        let rate = positive_rate(&g.split.train);
        assert!((rate - 0.785).abs() < 0.015, "realized rate {rate}");
    }
}
