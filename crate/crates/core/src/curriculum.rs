//! Training-chain generation, the multi-turn transcript format, and the
//! two-stage dataset ordering (ISR-tail examples first, then the full mix).

use std::collections::BTreeSet;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hangul::{isr_applicable, isr_apply, isr_sources, Syllable};
use crate::lexicon::{sample_training_words, Lexicon, PlanError, SamplingPlan, Word, WordError};
use crate::rules::{check_step, ChainState, MIN_WORD_LEN};

/// Chain lengths (2N-1 words for N = 1..=4).
pub const CHAIN_LENGTHS: [usize; 4] = [1, 3, 5, 7];

/// Attempts per chain before giving up on a dead end.
pub const MAX_ATTEMPTS: usize = 100;

/// The training prompt, shipped verbatim.
pub const PROMPT_KO: &str = include_str!("../assets/prompt_ko.txt");

#[derive(Error, Debug, Clone, PartialEq)]
pub enum CurriculumError {
    #[error("chain length {0} is not one of 1, 3, 5, 7")]
    BadLength(usize),
    #[error("no chain of length {length} found after {attempts} attempts (require_isr_tail={isr_tail})")]
    Exhausted { length: usize, attempts: usize, isr_tail: bool },
    #[error("chain link {index} ({prev} -> {next}) breaks the chain rule")]
    BrokenLink { index: usize, prev: Word, next: Word },
    #[error("stage1_fraction must be in [0, 1), got {0}")]
    StageFraction(f64),
    #[error("stage2_isr_boost must be positive, got {0}")]
    Boost(f64),
    #[error("chain_lengths must be a non-empty subset of 1, 3, 5, 7")]
    Lengths,
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("transcript: {0}")]
    Transcript(String),
    #[error(transparent)]
    Word(#[from] WordError),
}

/// A training chain of 2N-1 words; the model is asked for word 2N.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chain {
    words: Vec<Word>,
    isr_example: bool,
}

impl Chain {
    /// Checks the length and that adjacent words link (raw or rewritten
    /// syllable, noun, unused, at least two syllables).
    pub fn new(lex: &Lexicon, words: Vec<Word>) -> Result<Self, CurriculumError> {
        if !CHAIN_LENGTHS.contains(&words.len()) {
            return Err(CurriculumError::BadLength(words.len()));
        }
        let mut used = BTreeSet::new();
        used.insert(words[0].clone());
        for (i, pair) in words.windows(2).enumerate() {
            if !check_step(lex, &pair[0], &pair[1], &used).is_valid() {
                return Err(CurriculumError::BrokenLink { index: i + 1, prev: pair[0].clone(), next: pair[1].clone() });
            }
            used.insert(pair[1].clone());
        }
        Ok(Self::unchecked(words))
    }

    fn unchecked(words: Vec<Word>) -> Self {
        let isr_example = isr_applicable(words.last().expect("non-empty chain").last());
        Chain { words, isr_example }
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn isr_example(&self) -> bool {
        self.isr_example
    }

    /// The syllable the next answer has to continue from.
    pub fn tail_syllable(&self) -> Syllable {
        self.words.last().expect("non-empty chain").last()
    }

    pub fn state(&self) -> ChainState {
        ChainState::from_words(self.words.iter().cloned())
    }
}

/// Nouns of length >= 2 that may precede a word starting with `first`:
/// words ending in `first` and words ending in a syllable rewritten to `first`.
fn predecessors(lex: &Lexicon, first: Syllable) -> Vec<&Word> {
    let mut out: Vec<&Word> = lex.ending_with(first).iter().collect();
    for src in isr_sources(first) {
        out.extend(lex.ending_with(src));
    }
    out.retain(|w| w.len() >= MIN_WORD_LEN);
    out.sort();
    out
}

/// Whether some unused noun can follow `tail`.
fn answerable(lex: &Lexicon, tail: &Word, used: &BTreeSet<Word>) -> bool {
    let last = tail.last();
    !lex.candidates(last, used, MIN_WORD_LEN).is_empty()
        || isr_apply(last).is_some_and(|s| !lex.candidates(s, used, MIN_WORD_LEN).is_empty())
}

/// Builds a chain backwards from a tail drawn by `pick_tail`, taking a
/// uniform step over unused predecessors at each link. A dead end or an
/// unanswerable tail restarts with a fresh tail.
fn walk<'a, R: Rng>(
    lex: &'a Lexicon,
    length: usize,
    isr_tail: bool,
    rng: &mut R,
    mut pick_tail: impl FnMut(&mut R) -> Option<&'a Word>,
) -> Result<Chain, CurriculumError> {
    if !CHAIN_LENGTHS.contains(&length) {
        return Err(CurriculumError::BadLength(length));
    }
    let exhausted = CurriculumError::Exhausted { length, attempts: MAX_ATTEMPTS, isr_tail };
    'attempt: for _ in 0..MAX_ATTEMPTS {
        let Some(tail) = pick_tail(rng) else {
            return Err(exhausted);
        };
        let mut rev = vec![tail.clone()];
        let mut used: BTreeSet<Word> = rev.iter().cloned().collect();
        while rev.len() < length {
            let head = rev.last().expect("non-empty").first();
            let options: Vec<&Word> = predecessors(lex, head).into_iter().filter(|w| !used.contains(*w)).collect();
            let Some(prev) = options.choose(rng) else {
                continue 'attempt;
            };
            used.insert((*prev).clone());
            rev.push((*prev).clone());
        }
        if !answerable(lex, tail, &used) {
            continue;
        }
        rev.reverse();
        return Ok(Chain::unchecked(rev));
    }
    Err(exhausted)
}

/// Generates a chain of `length` words whose tail is any lexicon noun (or,
/// with `require_isr_tail`, a noun whose final syllable admits the rule).
pub fn generate_chain<R: Rng>(lex: &Lexicon, length: usize, require_isr_tail: bool, rng: &mut R) -> Result<Chain, CurriculumError> {
    let tails: Vec<&Word> = lex.nouns().filter(|w| w.len() >= MIN_WORD_LEN && (!require_isr_tail || isr_applicable(w.last()))).collect();
    walk(lex, length, require_isr_tail, rng, |rng| tails.choose(rng).copied())
}

/// Role markers and delimiters of the chat transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranscriptTemplate {
    pub prompt: String,
    pub system_open: String,
    pub user_open: String,
    pub assistant_open: String,
    pub turn_end: String,
    pub newline: String,
    /// Appended after the final, unanswered assistant marker.
    pub open_turn_suffix: String,
}

impl Default for TranscriptTemplate {
    fn default() -> Self {
        TranscriptTemplate {
            prompt: PROMPT_KO.trim().to_string(),
            system_open: "<|im_start|>system".into(),
            user_open: "<|im_start|>user".into(),
            assistant_open: "<|im_start|>assistant".into(),
            turn_end: "<|im_end|>".into(),
            newline: "\n".into(),
            open_turn_suffix: String::new(),
        }
    }
}

impl TranscriptTemplate {
    fn block(&self, out: &mut String, open: &str, body: &str) {
        out.push_str(open);
        out.push_str(&self.newline);
        out.push_str(body);
        out.push_str(&self.turn_end);
        out.push_str(&self.newline);
    }

    /// System prompt, then user/assistant turns alternating from word 1, then
    /// an open assistant turn.
    pub fn render(&self, words: &[Word]) -> String {
        let mut out = String::new();
        self.block(&mut out, &self.system_open, &self.prompt);
        for (i, w) in words.iter().enumerate() {
            let open = if i % 2 == 0 { &self.user_open } else { &self.assistant_open };
            self.block(&mut out, open, w.as_str());
        }
        out.push_str(&self.assistant_open);
        out.push_str(&self.open_turn_suffix);
        out
    }

    /// Inverse of [`render`](Self::render).
    pub fn parse(&self, text: &str) -> Result<Vec<Word>, CurriculumError> {
        let err = |m: &str| CurriculumError::Transcript(m.to_string());
        let mut header = String::new();
        self.block(&mut header, &self.system_open, &self.prompt);
        let mut rest = text.strip_prefix(header.as_str()).ok_or_else(|| err("missing system block"))?;
        let tail = format!("{}{}", self.assistant_open, self.open_turn_suffix);
        let mut words = Vec::new();
        while rest != tail {
            let open = if words.len() % 2 == 0 { &self.user_open } else { &self.assistant_open };
            let prefix = format!("{open}{}", self.newline);
            let body = rest.strip_prefix(prefix.as_str()).ok_or_else(|| err("expected turn marker"))?;
            let end = body.find(self.turn_end.as_str()).ok_or_else(|| err("unterminated turn"))?;
            words.push(Word::new(&body[..end])?);
            rest =
                body[end + self.turn_end.len()..].strip_prefix(self.newline.as_str()).ok_or_else(|| err("missing newline after turn"))?;
        }
        if words.len() % 2 == 0 {
            return Err(err("transcript must end after a user turn"));
        }
        Ok(words)
    }
}

pub fn render_transcript(chain: &Chain, tmpl: &TranscriptTemplate) -> String {
    tmpl.render(chain.words())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_examples: usize,
    /// Fraction of examples (training steps) in the ISR-only first stage.
    pub stage1_fraction: f64,
    /// Relative weight of ISR-tail words when drawing stage-2 tails.
    pub stage2_isr_boost: f64,
    pub chain_lengths: Vec<usize>,
    pub sampling: SamplingPlan,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_examples: 1000,
            stage1_fraction: 0.25,
            stage2_isr_boost: 1.0,
            chain_lengths: CHAIN_LENGTHS.to_vec(),
            sampling: SamplingPlan::default(),
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), CurriculumError> {
        self.sampling.validate()?;
        if !(0.0..1.0).contains(&self.stage1_fraction) {
            return Err(CurriculumError::StageFraction(self.stage1_fraction));
        }
        if !(self.stage2_isr_boost > 0.0 && self.stage2_isr_boost.is_finite()) {
            return Err(CurriculumError::Boost(self.stage2_isr_boost));
        }
        if self.chain_lengths.is_empty() || self.chain_lengths.iter().any(|l| !CHAIN_LENGTHS.contains(l)) {
            return Err(CurriculumError::Lengths);
        }
        Ok(())
    }

    pub fn stage1_count(&self) -> usize {
        (self.stage1_fraction * self.n_examples as f64).floor() as usize
    }
}

/// One line of the dataset file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Example {
    pub chain: Vec<Word>,
    pub transcript: String,
    pub isr_example: bool,
    pub stage: u8,
}

impl Example {
    pub fn state(&self) -> ChainState {
        ChainState::from_words(self.chain.iter().cloned())
    }

    pub fn tail_syllable(&self) -> Syllable {
        self.chain.last().expect("non-empty chain").last()
    }
}

/// `n` lengths cycling through `lengths`, shuffled, so every length appears
/// floor(n/k) or ceil(n/k) times.
fn balanced_lengths<R: Rng>(n: usize, lengths: &[usize], rng: &mut R) -> Vec<usize> {
    let mut out: Vec<usize> = lengths.iter().copied().cycle().take(n).collect();
    out.shuffle(rng);
    out
}

/// Builds the ordered dataset: a stage-1 prefix of ISR-tail chains followed
/// by a stage-2 mix whose tails come from the per-group training sample.
pub fn build_dataset(lex: &Lexicon, cfg: &DatasetConfig, tmpl: &TranscriptTemplate) -> Result<Vec<Example>, CurriculumError> {
    cfg.validate()?;
    let no_used = BTreeSet::new();
    let pool: Vec<Word> =
        sample_training_words(lex, &cfg.sampling).into_iter().filter(|w| w.len() >= MIN_WORD_LEN && answerable(lex, w, &no_used)).collect();
    let isr_pool: Vec<&Word> = pool.iter().filter(|w| isr_applicable(w.last())).collect();
    let weights: Vec<f64> = pool.iter().map(|w| if isr_applicable(w.last()) { cfg.stage2_isr_boost } else { 1.0 }).collect();
    let weighted = WeightedIndex::new(&weights).ok();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n1 = cfg.stage1_count();
    let stage1_lengths = balanced_lengths(n1, &cfg.chain_lengths, &mut rng);
    let stage2_lengths = balanced_lengths(cfg.n_examples - n1, &cfg.chain_lengths, &mut rng);

    let mut out = Vec::with_capacity(cfg.n_examples);
    for len in stage1_lengths {
        let chain = walk(lex, len, true, &mut rng, |rng| isr_pool.choose(rng).copied())?;
        out.push(make_example(chain, 1, tmpl));
    }
    for len in stage2_lengths {
        let chain = walk(lex, len, false, &mut rng, |rng| weighted.as_ref().map(|d| &pool[d.sample(rng)]))?;
        out.push(make_example(chain, 2, tmpl));
    }
    Ok(out)
}

fn make_example(chain: Chain, stage: u8, tmpl: &TranscriptTemplate) -> Example {
    Example { transcript: render_transcript(&chain, tmpl), isr_example: chain.isr_example, chain: chain.words, stage }
}
