//! Seeded synthetic corpora with planted relevance signal.
//!
//! Every post is built from a Zipf-distributed pseudo-word background. Each
//! planted tier independently emits one of its tokens into a post with a
//! class-dependent probability; the post's planted tier is the most relevant
//! tier that fired. Indicator tokens appear in every post at a shared
//! background rate and are additionally inserted into the relevant posts of
//! the class they belong to, so their class signal is concentrated in the
//! high and medium strata while pooled counts are dominated by background use.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Publication, Result, Timeline, UserClass};
use crate::features::tokenize;
use crate::relevance::RelevanceLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTier {
    pub label: RelevanceLabel,
    pub tokens: Vec<String>,
    /// Per-post probability that a Diagnosed user's post carries a token of this tier.
    pub p_diagnosed: f64,
    pub p_control: f64,
}

impl PlantedTier {
    pub fn probability(&self, class: UserClass) -> f64 {
        match class {
            UserClass::Diagnosed => self.p_diagnosed,
            UserClass::Control => self.p_control,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSet {
    /// Users of this class add an indicator token to their relevant posts.
    pub class: UserClass,
    pub tokens: Vec<String>,
    pub p_relevant: f64,
    /// Per-word probability of drawing from this set in any post.
    pub background_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_diagnosed: usize,
    pub control_ratio: usize,
    /// Inclusive range of posts per timeline.
    pub posts_per_user: (usize, usize),
    pub words_per_post: (usize, usize),
    pub background_vocab: usize,
    pub zipf_exponent: f64,
    pub tiers: Vec<PlantedTier>,
    pub indicators: Vec<IndicatorSet>,
    /// Probability of appending a URL, and separately a mention, to a post.
    pub noise_rate: f64,
    pub seed: u64,
}

fn strings(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| (*w).to_string()).collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_diagnosed: 100,
            control_ratio: 7,
            posts_per_user: (30, 200),
            words_per_post: (5, 15),
            background_vocab: 4000,
            zipf_exponent: 1.0,
            tiers: vec![
                PlantedTier {
                    label: RelevanceLabel::High,
                    tokens: strings(&["desesperança", "suicídio", "autolesão", "inútil", "vazio"]),
                    p_diagnosed: 0.04,
                    p_control: 0.03,
                },
                PlantedTier {
                    label: RelevanceLabel::Medium,
                    tokens: strings(&["insônia", "cansaço", "ansiedade", "choro", "apetite", "tristeza"]),
                    p_diagnosed: 0.12,
                    p_control: 0.10,
                },
            ],
            indicators: vec![
                IndicatorSet {
                    class: UserClass::Diagnosed,
                    tokens: strings(&["eu", "me", "mim", "meu", "minha"]),
                    p_relevant: 0.8,
                    background_rate: 0.04,
                },
                IndicatorSet {
                    class: UserClass::Control,
                    tokens: strings(&["ele", "ela", "eles", "elas", "deles"]),
                    p_relevant: 0.8,
                    background_rate: 0.04,
                },
            ],
            noise_rate: 0.05,
            seed: 42,
        }
    }
}

fn unit(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CorpusError::InvalidConfig(m));
        if self.n_diagnosed == 0 {
            return bad("n_diagnosed must be at least 1".into());
        }
        if self.control_ratio == 0 {
            return bad("control_ratio must be at least 1".into());
        }
        let (p0, p1) = self.posts_per_user;
        let (w0, w1) = self.words_per_post;
        if p0 == 0 || p0 > p1 || w0 == 0 || w0 > w1 {
            return bad("posts and word ranges must be non-empty with min >= 1".into());
        }
        if self.background_vocab == 0 || self.zipf_exponent.is_nan() || self.zipf_exponent < 0.0 {
            return bad("background vocabulary must be non-empty with a non-negative exponent".into());
        }
        if !unit(self.noise_rate) {
            return bad(format!("noise_rate {} outside [0, 1]", self.noise_rate));
        }
        let mut seen = HashSet::new();
        for tier in &self.tiers {
            if tier.label == RelevanceLabel::Low {
                return bad("low relevance is the default tier and cannot be planted".into());
            }
            if tier.tokens.is_empty() || !unit(tier.p_diagnosed) || !unit(tier.p_control) {
                return bad(format!("tier {:?} needs tokens and probabilities in [0, 1]", tier.label));
            }
        }
        let mut labels: Vec<_> = self.tiers.iter().map(|t| t.label).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.tiers.len() {
            return bad("each relevance tier may be planted once".into());
        }
        let mut rate = 0.0;
        for set in &self.indicators {
            if set.tokens.is_empty() || !unit(set.p_relevant) || !unit(set.background_rate) {
                return bad("indicator sets need tokens and probabilities in [0, 1]".into());
            }
            rate += set.background_rate;
        }
        if rate > 1.0 {
            return bad("indicator background rates sum above 1".into());
        }
        let all_tokens =
            self.tiers.iter().flat_map(|t| &t.tokens).chain(self.indicators.iter().flat_map(|s| &s.tokens));
        for tok in all_tokens {
            if tokenize(tok) != [tok.clone()] {
                return bad(format!("token `{tok}` is not a single normalized token"));
            }
            if !seen.insert(tok) {
                return bad(format!("token `{tok}` is used twice"));
            }
        }
        Ok(())
    }

    pub fn n_control(&self) -> usize {
        self.n_diagnosed * self.control_ratio
    }

    /// Tiers ordered from most to least relevant.
    fn ordered_tiers(&self) -> Vec<&PlantedTier> {
        let mut tiers: Vec<&PlantedTier> = self.tiers.iter().collect();
        tiers.sort_by_key(|t| t.label);
        tiers
    }

    /// The tier a post was planted with, recovered from its text.
    pub fn planted_tier(&self, text: &str) -> RelevanceLabel {
        let tokens: HashSet<String> = tokenize(text).into_iter().collect();
        self.ordered_tiers()
            .into_iter()
            .find(|tier| tier.tokens.iter().any(|t| tokens.contains(t)))
            .map_or(RelevanceLabel::Low, |tier| tier.label)
    }

    /// Analytic per-post tier probabilities for a class, indexed by label code - 1.
    pub fn expected_tier_proportions(&self, class: UserClass) -> [f64; 3] {
        let mut out = [0.0; 3];
        let mut none_yet = 1.0;
        for tier in self.ordered_tiers() {
            let p = tier.probability(class);
            out[tier.label.index()] = none_yet * p;
            none_yet *= 1.0 - p;
        }
        out[RelevanceLabel::Low.index()] += none_yet;
        out
    }

    /// Tokens of the given planted tier, empty when that tier is not planted.
    pub fn tier_tokens(&self, label: RelevanceLabel) -> Vec<String> {
        self.tiers.iter().filter(|t| t.label == label).flat_map(|t| t.tokens.clone()).collect()
    }
}

const CONSONANTS: &[char] = &['b', 'c', 'd', 'f', 'g', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z'];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];

fn pseudo_word(mut i: usize) -> String {
    let base = CONSONANTS.len() * VOWELS.len();
    let mut word = String::new();
    let syllables = if i < base * base { 2 } else { 3 };
    for _ in 0..syllables {
        let s = i % base;
        i /= base;
        word.push(CONSONANTS[s / VOWELS.len()]);
        word.push(VOWELS[s % VOWELS.len()]);
    }
    word
}

fn background_words(config: &SynthConfig) -> Vec<String> {
    let reserved: HashSet<&String> =
        config.tiers.iter().flat_map(|t| &t.tokens).chain(config.indicators.iter().flat_map(|s| &s.tokens)).collect();
    (0..).map(pseudo_word).filter(|w| !reserved.contains(w)).take(config.background_vocab).collect()
}

struct Generator<'a> {
    config: &'a SynthConfig,
    tiers: Vec<&'a PlantedTier>,
    vocab: Vec<String>,
    zipf: WeightedIndex<f64>,
    rng: ChaCha8Rng,
    /// Config digest prefix in every post id, so corpora generated from
    /// different settings never share annotation-cache keys.
    tag: String,
}

impl Generator<'_> {
    fn word(&mut self) -> String {
        let mut u: f64 = self.rng.random();
        for set in &self.config.indicators {
            if u < set.background_rate {
                let k = self.rng.random_range(0..set.tokens.len());
                return set.tokens[k].clone();
            }
            u -= set.background_rate;
        }
        self.vocab[self.zipf.sample(&mut self.rng)].clone()
    }

    fn insert(&mut self, words: &mut Vec<String>, tokens: &[String]) {
        let tok = tokens[self.rng.random_range(0..tokens.len())].clone();
        let at = self.rng.random_range(0..=words.len());
        words.insert(at, tok);
    }

    fn post(&mut self, class: UserClass) -> String {
        let (w0, w1) = self.config.words_per_post;
        let n = self.rng.random_range(w0..=w1);
        let mut words: Vec<String> = (0..n).map(|_| self.word()).collect();

        let mut relevant = false;
        for i in 0..self.tiers.len() {
            let tier = self.tiers[i];
            if self.rng.random_bool(tier.probability(class)) {
                self.insert(&mut words, &tier.tokens);
                relevant = true;
            }
        }
        if relevant {
            let config = self.config;
            for set in config.indicators.iter().filter(|s| s.class == class) {
                if self.rng.random_bool(set.p_relevant) {
                    self.insert(&mut words, &set.tokens);
                }
            }
        }
        if self.rng.random_bool(self.config.noise_rate) {
            words.push(format!("https://t.co/{}", self.rng.random_range(0..100_000u32)));
        }
        if self.rng.random_bool(self.config.noise_rate) {
            words.insert(0, format!("@user{}", self.rng.random_range(0..1000u32)));
        }
        words.join(" ")
    }

    fn timeline(&mut self, user_id: String, class: UserClass) -> Timeline {
        let (p0, p1) = self.config.posts_per_user;
        let n = self.rng.random_range(p0..=p1);
        let mut ts: i64 = 1_500_000_000 + self.rng.random_range(0..10_000_000);
        let publications = (0..n)
            .map(|k| {
                ts += self.rng.random_range(60..86_400);
                Publication {
                    user_id: user_id.clone(),
                    post_id: format!("{user_id}-{k:04}-{}", self.tag),
                    timestamp: ts,
                    text: self.post(class),
                }
            })
            .collect();
        Timeline { user_id, label: class, split: None, publications }
    }
}

/// Generates an unsplit corpus with exactly `n_diagnosed` Diagnosed and
/// `n_diagnosed * control_ratio` Control users.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Corpus> {
    config.validate()?;
    let vocab = background_words(config);
    let weights: Vec<f64> = (0..vocab.len()).map(|r| 1.0 / ((r + 1) as f64).powf(config.zipf_exponent)).collect();
    let zipf = WeightedIndex::new(&weights).expect("positive weights");
    let mut gen = Generator {
        config,
        tiers: config.ordered_tiers(),
        vocab,
        zipf,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        tag: crate::digest::json_digest(config)[..8].to_string(),
    };

    let mut timelines = Vec::with_capacity(config.n_diagnosed + config.n_control());
    for u in 0..config.n_diagnosed {
        timelines.push(gen.timeline(format!("d{u:05}"), UserClass::Diagnosed));
    }
    for u in 0..config.n_control() {
        timelines.push(gen.timeline(format!("c{u:05}"), UserClass::Control));
    }
    Ok(Corpus::new(timelines))
}
