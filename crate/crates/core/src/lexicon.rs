//! Noun lexicon: loading, candidate lookup by first syllable, grouping by
//! final syllable, and the per-group training-word sampler.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::hangul::{isr_applicable, HangulError, Syllable};

#[derive(Error, Debug)]
pub enum LexiconError {
    #[error("line {line}: {source}")]
    InvalidLine {
        line: usize,
        #[source]
        source: WordError,
    },
    #[error("reading lexicon: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("empty word")]
    Empty,
    #[error("{word:?}: {source}")]
    NotHangul {
        word: String,
        #[source]
        source: HangulError,
    },
}

/// A non-empty string of precomposed Hangul syllables.
///
/// Ordering is by codepoint sequence, which is also the byte order of the
/// UTF-8 text.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(String);

impl Word {
    pub fn new(text: &str) -> Result<Self, WordError> {
        if text.is_empty() {
            return Err(WordError::Empty);
        }
        for c in text.chars() {
            Syllable::new(c).map_err(|source| WordError::NotHangul { word: text.to_string(), source })?;
        }
        Ok(Word(text.to_string()))
    }

    pub fn from_syllables(syllables: &[Syllable]) -> Result<Self, WordError> {
        if syllables.is_empty() {
            return Err(WordError::Empty);
        }
        Ok(Word(syllables.iter().map(|s| s.as_char()).collect()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn syllables(&self) -> impl DoubleEndedIterator<Item = Syllable> + '_ {
        // validated at construction
        self.0.chars().map(|c| Syllable::new(c).expect("word holds only syllables"))
    }

    pub fn first(&self) -> Syllable {
        self.syllables().next().expect("word is non-empty")
    }

    pub fn last(&self) -> Syllable {
        self.syllables().next_back().expect("word is non-empty")
    }

    /// Length in syllables.
    pub fn len(&self) -> usize {
        self.0.chars().count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({})", self.0)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Word {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Word::new(s)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Word::new(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    /// Abort on the first invalid line.
    #[default]
    Strict,
    /// Skip invalid lines and record them in the report.
    Lenient,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub lines: usize,
    pub accepted: usize,
    pub duplicates: usize,
    pub comments_or_blank: usize,
    /// (1-based line number, offending text)
    pub rejected: Vec<(usize, String)>,
}

/// Immutable noun set with first- and last-syllable indices.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    nouns: BTreeSet<Word>,
    by_first: BTreeMap<Syllable, Vec<Word>>,
    by_last: BTreeMap<Syllable, Vec<Word>>,
}

impl Lexicon {
    pub fn from_words<I: IntoIterator<Item = Word>>(words: I) -> Self {
        let nouns: BTreeSet<Word> = words.into_iter().collect();
        let mut by_first: BTreeMap<Syllable, Vec<Word>> = BTreeMap::new();
        let mut by_last: BTreeMap<Syllable, Vec<Word>> = BTreeMap::new();
        // BTreeSet iteration keeps every index list sorted
        for w in &nouns {
            by_first.entry(w.first()).or_default().push(w.clone());
            by_last.entry(w.last()).or_default().push(w.clone());
        }
        Lexicon { nouns, by_first, by_last }
    }

    /// Convenience for tests and fixtures; panics on invalid words.
    pub fn from_strs(words: &[&str]) -> Self {
        Lexicon::from_words(words.iter().map(|w| Word::new(w).expect("valid Hangul word")))
    }

    pub fn len(&self) -> usize {
        self.nouns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nouns.is_empty()
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.nouns.contains(w)
    }

    pub fn contains_str(&self, w: &str) -> bool {
        Word::new(w).map(|w| self.nouns.contains(&w)).unwrap_or(false)
    }

    pub fn nouns(&self) -> impl Iterator<Item = &Word> {
        self.nouns.iter()
    }

    pub fn starting_with(&self, s: Syllable) -> &[Word] {
        self.by_first.get(&s).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn ending_with(&self, s: Syllable) -> &[Word] {
        self.by_last.get(&s).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Final-syllable groups in syllable order.
    pub fn groups(&self) -> impl Iterator<Item = (Syllable, &[Word])> {
        self.by_last.iter().map(|(s, g)| (*s, g.as_slice()))
    }

    /// Unused nouns of at least `min_len` syllables starting with `start`,
    /// in codepoint order.
    pub fn candidates(&self, start: Syllable, used: &BTreeSet<Word>, min_len: usize) -> Vec<&Word> {
        self.starting_with(start).iter().filter(|w| w.len() >= min_len && !used.contains(*w)).collect()
    }

    pub fn stats(&self) -> LexiconStats {
        let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
        let mut isr_groups = 0;
        let mut isr_words = 0;
        for (last, group) in self.groups() {
            *histogram.entry(group.len()).or_default() += 1;
            if isr_applicable(last) {
                isr_groups += 1;
                isr_words += group.len();
            }
        }
        let groups = self.by_last.len();
        LexiconStats {
            nouns: self.len(),
            groups,
            isr_groups,
            isr_words,
            isr_group_share: if groups == 0 { 0.0 } else { isr_groups as f64 / groups as f64 },
            group_size_histogram: histogram,
        }
    }
}

/// Summary printed by `lexicon stats`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LexiconStats {
    pub nouns: usize,
    pub groups: usize,
    pub isr_groups: usize,
    pub isr_words: usize,
    pub isr_group_share: f64,
    /// group size → number of final-syllable groups of that size
    pub group_size_histogram: BTreeMap<usize, usize>,
}

/// Reads a word list: one noun per line, `#` comments, surrounding
/// whitespace trimmed, duplicates collapsed.
pub fn load_lexicon<R: BufRead>(source: R, mode: LoadMode) -> Result<(Lexicon, LoadReport), LexiconError> {
    let mut report = LoadReport::default();
    let mut words = BTreeSet::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        report.lines += 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            report.comments_or_blank += 1;
            continue;
        }
        match Word::new(text) {
            Ok(w) => {
                if words.insert(w) {
                    report.accepted += 1;
                } else {
                    report.duplicates += 1;
                }
            }
            Err(source) => match mode {
                LoadMode::Strict => return Err(LexiconError::InvalidLine { line: line_no, source }),
                LoadMode::Lenient => report.rejected.push((line_no, text.to_string())),
            },
        }
    }
    Ok((Lexicon::from_words(words), report))
}

/// Parameters of the per-group sampler. Defaults are the published values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingPlan {
    pub general_ratio: f64,
    pub isr_ratio: f64,
    pub floor_count: usize,
    pub cap_count: usize,
    pub small_group_threshold: usize,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan { general_ratio: 0.01, isr_ratio: 0.2, floor_count: 10, cap_count: 200, small_group_threshold: 10, seed: 0 }
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum PlanError {
    #[error("ratios must satisfy 0 < general_ratio ({general}) <= isr_ratio ({isr}) <= 1")]
    Ratios { general: f64, isr: f64 },
    #[error("floor_count ({floor}) exceeds cap_count ({cap})")]
    FloorAboveCap { floor: usize, cap: usize },
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<(), PlanError> {
        let (general, isr) = (self.general_ratio, self.isr_ratio);
        if !(general > 0.0 && general <= isr && isr <= 1.0) {
            return Err(PlanError::Ratios { general, isr });
        }
        if self.floor_count > self.cap_count {
            return Err(PlanError::FloorAboveCap { floor: self.floor_count, cap: self.cap_count });
        }
        Ok(())
    }
}

/// Number of words to draw from a final-syllable group of `group_size`.
///
/// Small groups are taken whole; otherwise `min(max(trunc(ratio * |G|), floor), cap)`
/// with the ISR ratio for groups whose final syllable admits the initial-sound rule.
pub fn sample_group_count(group_size: usize, isr_final: bool, plan: &SamplingPlan) -> usize {
    if group_size < plan.small_group_threshold {
        return group_size;
    }
    let ratio = if isr_final { plan.isr_ratio } else { plan.general_ratio };
    let scaled = (ratio * group_size as f64).trunc() as usize;
    scaled.max(plan.floor_count).min(plan.cap_count)
}

/// Draws `sample_group_count` words uniformly without replacement from every
/// final-syllable group, using a ChaCha8 stream seeded from `plan.seed`.
/// Groups are visited in syllable order so the result depends only on the seed.
pub fn sample_training_words(lex: &Lexicon, plan: &SamplingPlan) -> BTreeSet<Word> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut out = BTreeSet::new();
    for (last, group) in lex.groups() {
        let k = sample_group_count(group.len(), isr_applicable(last), plan).min(group.len());
        for i in index::sample(&mut rng, group.len(), k) {
            out.insert(group[i].clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syl(c: char) -> Syllable {
        Syllable::new(c).unwrap()
    }

    fn w(s: &str) -> Word {
        Word::new(s).unwrap()
    }

    #[test]
    fn word_accessors() {
        let word = w("가동력");
        assert_eq!(word.first(), syl('가'));
        assert_eq!(word.last(), syl('력'));
        assert_eq!(word.len(), 3);
        assert_eq!(Word::new(""), Err(WordError::Empty));
        assert!(Word::new("사랑a").is_err());
        assert!(Word::new("사 랑").is_err());
    }

    #[test]
    fn load_chain_words() {
        let text = "사랑\n낭만\n만두\n";
        let (lex, report) = load_lexicon(text.as_bytes(), LoadMode::Strict).unwrap();
        assert_eq!(lex.len(), 3);
        assert_eq!(lex.starting_with(syl('사')), &[w("사랑")]);
        assert_eq!(lex.ending_with(syl('두')), &[w("만두")]);
        assert_eq!(report.accepted, 3);
    }

    #[test]
    fn load_empty() {
        let (lex, report) = load_lexicon("".as_bytes(), LoadMode::Strict).unwrap();
        assert!(lex.is_empty());
        assert_eq!(report.lines, 0);
    }

    #[test]
    fn strict_rejects_non_hangul() {
        let err = load_lexicon("hello\n".as_bytes(), LoadMode::Strict).unwrap_err();
        assert!(matches!(err, LexiconError::InvalidLine { line: 1, .. }));
    }

    #[test]
    fn lenient_skips_and_counts() {
        let text = "# header\n사랑\n  사랑  \nhello\n\n만두\r\n";
        let (lex, report) = load_lexicon(text.as_bytes(), LoadMode::Lenient).unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(report.lines, 6);
        assert_eq!(report.duplicates, 1);
        assert_eq!(report.comments_or_blank, 2);
        assert_eq!(report.rejected, vec![(4, "hello".to_string())]);
    }

    #[test]
    fn candidates_filter_used_and_length() {
        let lex = Lexicon::from_strs(&["사랑", "낭만", "만두", "만화", "만", "만세"]);
        let used: BTreeSet<Word> = [w("사랑"), w("낭만")].into_iter().collect();
        let got: Vec<_> = lex.candidates(syl('만'), &used, 2).into_iter().cloned().collect();
        assert_eq!(got, vec![w("만두"), w("만세"), w("만화")]);
        let with_short = lex.candidates(syl('만'), &used, 1);
        assert_eq!(with_short.len(), 4);
        let all: BTreeSet<Word> = lex.starting_with(syl('만')).iter().cloned().collect();
        assert!(lex.candidates(syl('만'), &all, 1).is_empty());
    }

    #[test]
    fn group_count_examples() {
        let plan = SamplingPlan::default();
        assert_eq!(sample_group_count(5, false, &plan), 5);
        assert_eq!(sample_group_count(5, true, &plan), 5);
        assert_eq!(sample_group_count(1000, false, &plan), 10);
        assert_eq!(sample_group_count(1000, true, &plan), 200);
        assert_eq!(sample_group_count(10, false, &plan), 10);
        assert_eq!(sample_group_count(5000, true, &plan), 200);
        assert_eq!(sample_group_count(0, true, &plan), 0);
    }

    #[test]
    fn plan_validation() {
        assert!(SamplingPlan::default().validate().is_ok());
        let bad = SamplingPlan { general_ratio: 0.5, isr_ratio: 0.2, ..Default::default() };
        assert!(matches!(bad.validate(), Err(PlanError::Ratios { .. })));
        let bad = SamplingPlan { general_ratio: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SamplingPlan { floor_count: 300, ..Default::default() };
        assert!(matches!(bad.validate(), Err(PlanError::FloorAboveCap { .. })));
    }

    #[test]
    fn small_group_taken_whole() {
        let lex = Lexicon::from_strs(&["이념", "관념", "개념", "사랑"]);
        let picked = sample_training_words(&lex, &SamplingPlan::default());
        assert_eq!(picked.len(), 4);
    }

    #[test]
    fn stats_counts_isr_groups() {
        let lex = Lexicon::from_strs(&["이념", "관념", "사랑", "만두"]);
        let stats = lex.stats();
        assert_eq!(stats.nouns, 4);
        assert_eq!(stats.groups, 3);
        // 념 and 랑 both admit the rule
        assert_eq!(stats.isr_groups, 2);
        assert_eq!(stats.isr_words, 3);
        assert_eq!(stats.group_size_histogram.get(&1), Some(&2));
        assert_eq!(stats.group_size_histogram.get(&2), Some(&1));
    }
}
