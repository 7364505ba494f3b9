//! Straight-line reference for the reward clauses and failure modes.
//!
//! Works on plain `String`s and its own syllable arithmetic; nothing here
//! calls into the library's rules or hangul modules.

#![allow(dead_code)]

use std::collections::BTreeSet;

/// Before → after rows of the initial-sound rule table.
pub const TABLE: [(char, char); 16] = [
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

pub fn split(c: char) -> (u32, u32, u32) {
    let off = c as u32 - 0xAC00;
    (off / 588, (off % 588) / 28, off % 28)
}

pub fn join(initial: u32, medial: u32, fin: u32) -> char {
    char::from_u32(0xAC00 + (initial * 21 + medial) * 28 + fin).unwrap()
}

pub fn rewrite(c: char) -> Option<char> {
    let (i, m, f) = split(c);
    for (before, after) in TABLE {
        let (bi, bm, _) = split(before);
        if bi == i && bm == m {
            let (ai, am, _) = split(after);
            return Some(join(ai, am, f));
        }
    }
    None
}

pub fn reward(scheme: &str, nouns: &BTreeSet<String>, chain: &[String], cand: &str) -> f64 {
    let prev = chain.last().unwrap();
    let last = prev.chars().last().unwrap();
    let first = cand.chars().next().unwrap();
    let noun = nouns.contains(cand);

    // (c) repetition: the reward becomes -1
    if chain.iter().any(|w| w == cand) {
        return -1.0;
    }
    let mut r = 0.0;
    if scheme == "baseline" {
        // (a)
        if first == last {
            r += 1.0;
            // (b)
            if noun {
                r += 1.0;
            }
        }
        return r;
    }
    // (a-i)
    let a_i = first == last;
    // (a-ii)
    let a_ii = rewrite(last) == Some(first);
    if a_i {
        r += 1.0;
    }
    if a_ii {
        r += 1.0;
    }
    // (b)
    if (a_i || a_ii) && noun {
        r += 1.0;
    }
    // (d)
    if scheme == "isr_forcing_os" && !a_i && !a_ii {
        let n = prev.chars().count();
        if prev.chars().take(n - 1).any(|c| c == first) {
            r -= 0.5;
        }
    }
    r
}

/// Failure letter with priority c, a, b, d, e; `None` for a valid answer.
pub fn failure(nouns: &BTreeSet<String>, chain: &[String], cand: &str) -> Option<char> {
    let prev = chain.last().unwrap();
    let last = prev.chars().last().unwrap();
    let first = cand.chars().next().unwrap();
    let noun = nouns.contains(cand);
    let long = cand.chars().count() >= 2;
    let raw = first == last;
    let isr = rewrite(last) == Some(first);

    if chain.iter().any(|w| w == cand) {
        return Some('c');
    }
    if rewrite(last).is_some() && raw && !noun {
        return Some('a');
    }
    if !raw && !isr {
        let n = prev.chars().count();
        if prev.chars().take(n - 1).any(|c| c == first) {
            return Some('b');
        }
        return Some('d');
    }
    if !noun || !long {
        return Some('e');
    }
    None
}

/// Fixture nouns plus raw-syllable non-nouns after every final syllable
/// and a few single-syllable words.
pub fn candidate_pool(nouns: &BTreeSet<String>) -> Vec<String> {
    let mut pool: BTreeSet<String> = nouns.clone();
    let finals: BTreeSet<char> = nouns.iter().map(|w| w.chars().last().unwrap()).collect();
    for (i, f) in finals.iter().enumerate() {
        if i % 2 == 0 {
            let w = format!("{f}량");
            if !nouns.contains(&w) {
                pool.insert(w);
            }
        }
    }
    for w in ["력", "역", "가", "랑비", "문", "식빵"] {
        pool.insert(w.to_string());
    }
    pool.into_iter().collect()
}

/// A one- or two-word chain ending in `prev`.
pub fn chains_for(prev: &str, index: usize, nouns: &[String]) -> Vec<String> {
    if index.is_multiple_of(3) {
        let other = &nouns[(index * 7 + 1) % nouns.len()];
        if other != prev {
            return vec![other.clone(), prev.to_string()];
        }
    }
    vec![prev.to_string()]
}
