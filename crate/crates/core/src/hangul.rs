//! Precomposed Hangul syllables, their jamo decomposition, and the
//! initial-sound rule (두음법칙) as a syllable-to-syllable rewrite.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// First codepoint of the precomposed syllable block (가).
pub const SYLLABLE_BASE: u32 = 0xAC00;
/// Number of precomposed syllables (U+AC00..=U+D7A3).
pub const SYLLABLE_COUNT: u32 = 11_172;

pub const INITIAL_COUNT: u8 = 19;
pub const MEDIAL_COUNT: u8 = 21;
pub const FINAL_COUNT: u8 = 28;

const FINALS_PER_INITIAL: u32 = MEDIAL_COUNT as u32 * FINAL_COUNT as u32;

// choseong indices used by the initial-sound rule
pub const INITIAL_NIEUN: u8 = 2; // ㄴ
pub const INITIAL_RIEUL: u8 = 5; // ㄹ
pub const INITIAL_IEUNG: u8 = 11; // ㅇ

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum HangulError {
    #[error("U+{0:04X} is not a precomposed Hangul syllable")]
    NotSyllable(u32),
    #[error("jamo index out of range: initial={initial} medial={medial} final={final_}")]
    JamoOutOfRange { initial: u8, medial: u8, final_: u8 },
}

/// One precomposed Hangul syllable (U+AC00..=U+D7A3).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Syllable(char);

impl Syllable {
    pub fn new(c: char) -> Result<Self, HangulError> {
        let code = c as u32;
        if (SYLLABLE_BASE..SYLLABLE_BASE + SYLLABLE_COUNT).contains(&code) {
            Ok(Syllable(c))
        } else {
            Err(HangulError::NotSyllable(code))
        }
    }

    pub fn from_u32(code: u32) -> Result<Self, HangulError> {
        char::from_u32(code).ok_or(HangulError::NotSyllable(code)).and_then(Syllable::new)
    }

    /// Iterates every syllable of the block in codepoint order.
    pub fn all() -> impl Iterator<Item = Syllable> {
        (SYLLABLE_BASE..SYLLABLE_BASE + SYLLABLE_COUNT).map(|code| Syllable(char::from_u32(code).expect("block is valid scalar values")))
    }

    pub fn as_char(self) -> char {
        self.0
    }

    pub fn codepoint(self) -> u32 {
        self.0 as u32
    }

    pub fn decompose(self) -> JamoTriple {
        decompose(self)
    }

    pub fn isr(self) -> Option<Syllable> {
        isr_apply(self)
    }
}

impl fmt::Debug for Syllable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Syllable({})", self.0)
    }
}

impl fmt::Display for Syllable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<char> for Syllable {
    type Error = HangulError;

    fn try_from(c: char) -> Result<Self, Self::Error> {
        Syllable::new(c)
    }
}

impl Serialize for Syllable {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_char(self.0)
    }
}

impl<'de> Deserialize<'de> for Syllable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let c = char::deserialize(deserializer)?;
        Syllable::new(c).map_err(serde::de::Error::custom)
    }
}

/// (choseong, jungseong, jongseong) indices; `final_ == 0` means no final consonant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JamoTriple {
    pub initial: u8,
    pub medial: u8,
    pub final_: u8,
}

impl JamoTriple {
    pub fn new(initial: u8, medial: u8, final_: u8) -> Result<Self, HangulError> {
        let t = JamoTriple { initial, medial, final_ };
        if initial < INITIAL_COUNT && medial < MEDIAL_COUNT && final_ < FINAL_COUNT {
            Ok(t)
        } else {
            Err(HangulError::JamoOutOfRange { initial, medial, final_ })
        }
    }
}

pub fn decompose(s: Syllable) -> JamoTriple {
    let offset = s.codepoint() - SYLLABLE_BASE;
    JamoTriple {
        initial: (offset / FINALS_PER_INITIAL) as u8,
        medial: ((offset % FINALS_PER_INITIAL) / FINAL_COUNT as u32) as u8,
        final_: (offset % FINAL_COUNT as u32) as u8,
    }
}

/// Decomposes a raw `char`, failing for anything outside the syllable block.
pub fn decompose_char(c: char) -> Result<JamoTriple, HangulError> {
    Syllable::new(c).map(decompose)
}

pub fn compose(t: JamoTriple) -> Result<Syllable, HangulError> {
    let t = JamoTriple::new(t.initial, t.medial, t.final_)?;
    let code = SYLLABLE_BASE + (t.initial as u32 * MEDIAL_COUNT as u32 + t.medial as u32) * FINAL_COUNT as u32 + t.final_ as u32;
    Ok(Syllable(char::from_u32(code).expect("in-range jamo compose to a valid scalar")))
}

/// The initial-sound rule, one row per bare syllable: before → after.
///
/// Lookups key on the (initial, medial) pair of the left column, so a
/// final consonant on the input is carried over unchanged (력 → 역, 롱 → 농).
pub const ISR_TABLE: [(char, char); 16] = [
    ('녀', '여'),
    ('뇨', '요'),
    ('뉴', '유'),
    ('니', '이'),
    ('라', '나'),
    ('래', '내'),
    ('랴', '야'),
    ('려', '여'),
    ('례', '예'),
    ('로', '노'),
    ('뢰', '뇌'),
    ('료', '요'),
    ('루', '누'),
    ('류', '유'),
    ('르', '느'),
    ('리', '이'),
];

/// Maps an (initial, medial) pair through the rule. Indices follow the
/// Unicode choseong/jungseong order.
fn isr_pair(initial: u8, medial: u8) -> Option<(u8, u8)> {
    let target = match (initial, medial) {
        // ㄴ + ㅕ ㅛ ㅠ ㅣ → ㅇ
        (INITIAL_NIEUN, 6 | 12 | 17 | 20) => INITIAL_IEUNG,
        // ㄹ + ㅑ ㅕ ㅖ ㅛ ㅠ ㅣ → ㅇ
        (INITIAL_RIEUL, 2 | 6 | 7 | 12 | 17 | 20) => INITIAL_IEUNG,
        // ㄹ + ㅏ ㅐ ㅗ ㅚ ㅜ ㅡ → ㄴ
        (INITIAL_RIEUL, 0 | 1 | 8 | 11 | 13 | 18) => INITIAL_NIEUN,
        _ => return None,
    };
    Some((target, medial))
}

/// Applies the initial-sound rule to `s`, keeping its final consonant.
/// Returns `None` when no table row matches.
pub fn isr_apply(s: Syllable) -> Option<Syllable> {
    let t = decompose(s);
    let (initial, medial) = isr_pair(t.initial, t.medial)?;
    Some(compose(JamoTriple { initial, medial, final_: t.final_ }).expect("table targets are in range"))
}

pub fn isr_applicable(s: Syllable) -> bool {
    let t = decompose(s);
    isr_pair(t.initial, t.medial).is_some()
}

/// Every syllable whose rewrite is `s` (e.g. 여 ← 녀, 려), in codepoint order.
pub fn isr_sources(s: Syllable) -> Vec<Syllable> {
    let t = decompose(s);
    let mut out = Vec::new();
    for initial in [INITIAL_NIEUN, INITIAL_RIEUL] {
        if isr_pair(initial, t.medial) == Some((t.initial, t.medial)) {
            out.push(compose(JamoTriple { initial, medial: t.medial, final_: t.final_ }).expect("in range"));
        }
    }
    out
}
