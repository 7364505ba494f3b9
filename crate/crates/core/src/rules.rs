//! Rule checks for a proposed word, the three reward schemes, and the
//! failure-mode classifier used by the arena.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hangul::{isr_apply, Syllable};
use crate::lexicon::{Lexicon, Word};

/// Minimum answer length in syllables.
pub const MIN_WORD_LEN: usize = 2;

/// Words played so far plus the set of used words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChainState {
    words: Vec<Word>,
    used: BTreeSet<Word>,
}

impl ChainState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_words<I: IntoIterator<Item = Word>>(words: I) -> Self {
        let mut state = ChainState::new();
        for w in words {
            state.push(w);
        }
        state
    }

    pub fn push(&mut self, w: Word) {
        self.used.insert(w.clone());
        self.words.push(w);
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn used(&self) -> &BTreeSet<Word> {
        &self.used
    }

    pub fn last_word(&self) -> Option<&Word> {
        self.words.last()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardScheme {
    Baseline,
    IsrForcing,
    IsrForcingOs,
}

impl RewardScheme {
    pub const ALL: [RewardScheme; 3] = [RewardScheme::Baseline, RewardScheme::IsrForcing, RewardScheme::IsrForcingOs];

    pub fn name(self) -> &'static str {
        match self {
            RewardScheme::Baseline => "baseline",
            RewardScheme::IsrForcing => "isr_forcing",
            RewardScheme::IsrForcingOs => "isr_forcing_os",
        }
    }
}

impl fmt::Display for RewardScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
#[error("unknown reward scheme {0:?} (expected baseline, isr_forcing or isr_forcing_os)")]
pub struct UnknownScheme(pub String);

impl FromStr for RewardScheme {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RewardScheme::ALL.into_iter().find(|scheme| scheme.name() == s).ok_or_else(|| UnknownScheme(s.to_string()))
    }
}

/// Per-rule outcome of proposing `cand` after `prev`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RuleReport {
    /// first(cand) == last(prev)
    pub syllable_match_raw: bool,
    /// last(prev) admits the initial-sound rule and first(cand) is its rewrite
    pub syllable_match_isr: bool,
    pub is_noun: bool,
    pub is_new: bool,
    pub min_length_ok: bool,
    /// no syllable match, but cand starts with some non-final syllable of prev
    pub other_syllable_start: bool,
    /// last(prev) admits the initial-sound rule
    pub isr_applicable: bool,
}

impl RuleReport {
    pub fn syllable_match(&self) -> bool {
        self.syllable_match_raw || self.syllable_match_isr
    }

    pub fn is_valid(&self) -> bool {
        self.syllable_match() && self.is_noun && self.is_new && self.min_length_ok
    }
}

pub fn check_step(lex: &Lexicon, prev: &Word, cand: &Word, used: &BTreeSet<Word>) -> RuleReport {
    let last = prev.last();
    let first = cand.first();
    let rewritten: Option<Syllable> = isr_apply(last);
    let syllable_match_raw = first == last;
    let syllable_match_isr = rewritten == Some(first);
    let other_syllable_start = !syllable_match_raw && !syllable_match_isr && {
        let n = prev.len();
        prev.syllables().take(n - 1).any(|s| s == first)
    };
    RuleReport {
        syllable_match_raw,
        syllable_match_isr,
        is_noun: lex.contains(cand),
        is_new: !used.contains(cand),
        min_length_ok: cand.len() >= MIN_WORD_LEN,
        other_syllable_start,
        isr_applicable: rewritten.is_some(),
    }
}

/// Clause-by-clause reward. Field names are the wire names of the scoring protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub clause_a_i: u8,
    pub clause_a_ii: u8,
    pub clause_b: u8,
    pub repetition: bool,
    pub clause_d: f64,
    pub total: f64,
}

/// Penalty for starting with a non-final syllable of the previous word.
pub const OTHER_SYLLABLE_PENALTY: f64 = -0.5;
pub const REPETITION_REWARD: f64 = -1.0;

pub fn score_report(scheme: RewardScheme, report: &RuleReport) -> RewardBreakdown {
    let clause_a_i = report.syllable_match_raw as u8;
    let clause_a_ii = match scheme {
        RewardScheme::Baseline => 0,
        RewardScheme::IsrForcing | RewardScheme::IsrForcingOs => report.syllable_match_isr as u8,
    };
    let clause_b = ((clause_a_i == 1 || clause_a_ii == 1) && report.is_noun) as u8;
    let clause_d = match scheme {
        RewardScheme::IsrForcingOs if report.other_syllable_start => OTHER_SYLLABLE_PENALTY,
        _ => 0.0,
    };
    let repetition = !report.is_new;
    let total = if repetition { REPETITION_REWARD } else { clause_a_i as f64 + clause_a_ii as f64 + clause_b as f64 + clause_d };
    RewardBreakdown { clause_a_i, clause_a_ii, clause_b, repetition, clause_d, total }
}

/// Scores `cand` as the next word after the last word of `state`.
///
/// Panics if `state` is empty.
pub fn score(scheme: RewardScheme, lex: &Lexicon, state: &ChainState, cand: &Word) -> RewardBreakdown {
    let prev = state.last_word().expect("score needs a non-empty chain");
    score_report(scheme, &check_step(lex, prev, cand, state.used()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureMode {
    /// raw syllable used where the initial-sound rule was required
    #[serde(rename = "a")]
    IsrViolation,
    /// starts with a non-final syllable of the previous word
    #[serde(rename = "b")]
    OtherSyllable,
    #[serde(rename = "c")]
    Repetition,
    /// does not start with the previous word's last syllable
    #[serde(rename = "d")]
    WrongFirst,
    /// syllable matches but not a dictionary noun (or too short)
    #[serde(rename = "e")]
    NotNoun,
}

impl FailureMode {
    pub const ALL: [FailureMode; 5] =
        [FailureMode::IsrViolation, FailureMode::OtherSyllable, FailureMode::Repetition, FailureMode::WrongFirst, FailureMode::NotNoun];

    pub fn letter(self) -> char {
        match self {
            FailureMode::IsrViolation => 'a',
            FailureMode::OtherSyllable => 'b',
            FailureMode::Repetition => 'c',
            FailureMode::WrongFirst => 'd',
            FailureMode::NotNoun => 'e',
        }
    }

    pub fn from_letter(c: char) -> Option<FailureMode> {
        FailureMode::ALL.into_iter().find(|m| m.letter() == c)
    }

    /// Whether this mode's condition holds, independent of priority.
    fn matches(self, r: &RuleReport) -> bool {
        match self {
            FailureMode::Repetition => !r.is_new,
            FailureMode::IsrViolation => r.isr_applicable && r.syllable_match_raw && !r.is_noun,
            FailureMode::OtherSyllable => r.other_syllable_start,
            FailureMode::WrongFirst => !r.syllable_match(),
            FailureMode::NotNoun => r.syllable_match() && (!r.is_noun || !r.min_length_ok),
        }
    }
}

impl fmt::Display for FailureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Order in which failure conditions are tested; the first match wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FailurePriority([FailureMode; 5]);

impl Default for FailurePriority {
    /// c → a → b → d → e
    fn default() -> Self {
        FailurePriority([
            FailureMode::Repetition,
            FailureMode::IsrViolation,
            FailureMode::OtherSyllable,
            FailureMode::WrongFirst,
            FailureMode::NotNoun,
        ])
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
#[error("failure priority must list each of a..e exactly once")]
pub struct InvalidPriority;

impl FailurePriority {
    pub fn new(order: [FailureMode; 5]) -> Result<Self, InvalidPriority> {
        let distinct: BTreeSet<_> = order.iter().collect();
        if distinct.len() == 5 {
            Ok(FailurePriority(order))
        } else {
            Err(InvalidPriority)
        }
    }

    pub fn order(&self) -> &[FailureMode; 5] {
        &self.0
    }

    pub fn classify(&self, report: &RuleReport) -> Option<FailureMode> {
        if report.is_valid() {
            return None;
        }
        self.0.iter().copied().find(|m| m.matches(report))
    }
}

impl FromStr for FailurePriority {
    type Err = InvalidPriority;

    /// Parses strings like `"cabde"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let modes: Vec<FailureMode> = s.chars().map(FailureMode::from_letter).collect::<Option<_>>().ok_or(InvalidPriority)?;
        let order: [FailureMode; 5] = modes.try_into().map_err(|_| InvalidPriority)?;
        FailurePriority::new(order)
    }
}

/// Classifies `cand` with the default priority; `None` means the answer is valid.
///
/// Panics if `state` is empty.
pub fn classify_failure(lex: &Lexicon, state: &ChainState, cand: &Word) -> Option<FailureMode> {
    let prev = state.last_word().expect("classify_failure needs a non-empty chain");
    FailurePriority::default().classify(&check_step(lex, prev, cand, state.used()))
}
