//! Games between a policy and the dictionary opponent, and the evaluation
//! metrics over a batch of games.
//!
//! The dictionary opens with a random noun; the policy answers; each valid
//! answer is met by a fresh dictionary noun until the dictionary runs out
//! (model win), the policy breaks a rule (model failure) or the turn cap is
//! hit. Every game draws from two ChaCha8 streams seeded by the game seed:
//! stream 0 for the opponent and stream 1 for the policy, so the opponent's
//! choices do not depend on how many draws the policy makes.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hangul::isr_apply;
use crate::lexicon::{Lexicon, Word};
use crate::rules::{check_step, score_report, ChainState, FailureMode, FailurePriority, RewardScheme, MIN_WORD_LEN};

const OPPONENT_STREAM: u64 = 0;
const POLICY_STREAM: u64 = 1;

pub const DEFAULT_TURN_CAP: usize = 100;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ArenaError {
    #[error("the opponent has no opening word (empty lexicon?)")]
    NoOpening,
    #[error("n_games must be at least 1")]
    NoGames,
}

/// Something that answers in the word chain.
pub trait Policy {
    /// Called before every game with that game's seed.
    fn reset(&mut self, _game_seed: u64) {}

    /// The next word, or `None` when the policy produces no usable Hangul
    /// word (judged as not starting with the required syllable).
    fn next_word(&mut self, lex: &Lexicon, state: &ChainState, rng: &mut ChaCha8Rng) -> Option<Word>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn reset(&mut self, game_seed: u64) {
        (**self).reset(game_seed)
    }

    fn next_word(&mut self, lex: &Lexicon, state: &ChainState, rng: &mut ChaCha8Rng) -> Option<Word> {
        (**self).next_word(lex, state, rng)
    }
}

/// The dictionary side of the game.
pub trait Opponent {
    fn opening(&mut self, lex: &Lexicon, rng: &mut ChaCha8Rng) -> Option<Word>;
    fn respond(&mut self, lex: &Lexicon, state: &ChainState, rng: &mut ChaCha8Rng) -> Option<Word>;
}

/// Unused nouns of length >= 2 that legally follow the last word of
/// `state`: raw-syllable starts, plus rewritten starts when `use_isr`.
pub fn valid_continuations<'a>(lex: &'a Lexicon, state: &ChainState, use_isr: bool) -> Vec<&'a Word> {
    let Some(last) = state.last_word().map(Word::last) else {
        return Vec::new();
    };
    let mut pool = lex.candidates(last, state.used(), MIN_WORD_LEN);
    if use_isr {
        if let Some(alt) = isr_apply(last) {
            pool.extend(lex.candidates(alt, state.used(), MIN_WORD_LEN));
        }
    }
    pool.sort();
    pool
}

/// Uniform choice over the valid continuations, `None` when there are none.
pub fn dictionary_move(lex: &Lexicon, state: &ChainState, rng: &mut ChaCha8Rng, use_isr: bool) -> Option<Word> {
    valid_continuations(lex, state, use_isr).choose(rng).map(|w| (*w).clone())
}

/// Random opening, random valid replies.
#[derive(Debug, Clone, Copy)]
pub struct DictionaryOpponent {
    pub use_isr: bool,
}

impl Default for DictionaryOpponent {
    fn default() -> Self {
        DictionaryOpponent { use_isr: true }
    }
}

impl Opponent for DictionaryOpponent {
    fn opening(&mut self, lex: &Lexicon, rng: &mut ChaCha8Rng) -> Option<Word> {
        let openings: Vec<&Word> = lex.nouns().filter(|w| w.len() >= MIN_WORD_LEN).collect();
        openings.choose(rng).map(|w| (*w).clone())
    }

    fn respond(&mut self, lex: &Lexicon, state: &ChainState, rng: &mut ChaCha8Rng) -> Option<Word> {
        dictionary_move(lex, state, rng, self.use_isr)
    }
}

/// Fixed opening and replies; runs out (model wins) after the last reply.
#[derive(Debug, Clone)]
pub struct ScriptedOpponent {
    opening: Word,
    replies: Vec<Word>,
    next: usize,
}

impl ScriptedOpponent {
    pub fn new(opening: Word, replies: Vec<Word>) -> Self {
        ScriptedOpponent { opening, replies, next: 0 }
    }
}

impl Opponent for ScriptedOpponent {
    fn opening(&mut self, _lex: &Lexicon, _rng: &mut ChaCha8Rng) -> Option<Word> {
        self.next = 0;
        Some(self.opening.clone())
    }

    fn respond(&mut self, _lex: &Lexicon, _state: &ChainState, _rng: &mut ChaCha8Rng) -> Option<Word> {
        let reply = self.replies.get(self.next).cloned();
        self.next += 1;
        reply
    }
}

/// Plays a fixed move list; once exhausted it repeats the opening word.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    moves: Vec<Word>,
    next: usize,
}

impl ScriptedPolicy {
    pub fn new(moves: Vec<Word>) -> Self {
        ScriptedPolicy { moves, next: 0 }
    }
}

impl Policy for ScriptedPolicy {
    fn reset(&mut self, _game_seed: u64) {
        self.next = 0;
    }

    fn next_word(&mut self, _lex: &Lexicon, state: &ChainState, _rng: &mut ChaCha8Rng) -> Option<Word> {
        let word = self.moves.get(self.next).cloned().or_else(|| state.words().first().cloned());
        self.next += 1;
        word
    }
}

/// Uniform over valid answers (raw and rewritten starts).
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomValidPolicy;

impl Policy for RandomValidPolicy {
    fn next_word(&mut self, lex: &Lexicon, state: &ChainState, rng: &mut ChaCha8Rng) -> Option<Word> {
        valid_continuations(lex, state, true).choose(rng).map(|w| (*w).clone())
    }
}

/// Always the first valid answer in codepoint order.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstValidPolicy;

impl Policy for FirstValidPolicy {
    fn next_word(&mut self, lex: &Lexicon, state: &ChainState, _rng: &mut ChaCha8Rng) -> Option<Word> {
        valid_continuations(lex, state, true).first().map(|w| (*w).clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Dictionary,
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Move {
    pub side: Side,
    /// `None` when the model gave no usable word
    pub word: Option<Word>,
    /// Reward of a model move under the configured scheme.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    ModelWin,
    ModelFail { mode: FailureMode },
    TurnCap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameRecord {
    pub seed: u64,
    pub opening: Word,
    /// Every move after the opening, alternating model/dictionary.
    pub moves: Vec<Move>,
    /// Valid model answers; the failing answer is not counted.
    pub model_turns: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArenaConfig {
    pub scheme: RewardScheme,
    /// Stop after this many valid model answers; `None` disables the cap.
    pub turn_cap: Option<usize>,
    pub priority: FailurePriority,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        ArenaConfig { scheme: RewardScheme::IsrForcing, turn_cap: Some(DEFAULT_TURN_CAP), priority: FailurePriority::default() }
    }
}

fn rng_pair(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut opponent = ChaCha8Rng::seed_from_u64(seed);
    opponent.set_stream(OPPONENT_STREAM);
    let mut policy = ChaCha8Rng::seed_from_u64(seed);
    policy.set_stream(POLICY_STREAM);
    (opponent, policy)
}

pub fn play_game<P, O>(policy: &mut P, opponent: &mut O, lex: &Lexicon, cfg: &ArenaConfig, seed: u64) -> Result<GameRecord, ArenaError>
where
    P: Policy + ?Sized,
    O: Opponent + ?Sized,
{
    let (mut opp_rng, mut pol_rng) = rng_pair(seed);
    policy.reset(seed);
    let opening = opponent.opening(lex, &mut opp_rng).ok_or(ArenaError::NoOpening)?;
    let mut state = ChainState::new();
    state.push(opening.clone());
    let mut moves = Vec::new();
    let mut model_turns = 0;

    let outcome = loop {
        if cfg.turn_cap.is_some_and(|cap| model_turns >= cap) {
            break Outcome::TurnCap;
        }
        let answer = policy.next_word(lex, &state, &mut pol_rng);
        let (failure, reward) = match &answer {
            None => (Some(FailureMode::WrongFirst), 0.0),
            Some(w) => {
                let prev = state.last_word().expect("chain has the opening");
                let report = check_step(lex, prev, w, state.used());
                (cfg.priority.classify(&report), score_report(cfg.scheme, &report).total)
            }
        };
        moves.push(Move { side: Side::Model, word: answer.clone(), reward: Some(reward) });
        if let Some(mode) = failure {
            break Outcome::ModelFail { mode };
        }
        model_turns += 1;
        state.push(answer.expect("valid answers are words"));
        match opponent.respond(lex, &state, &mut opp_rng) {
            None => break Outcome::ModelWin,
            Some(w) => {
                moves.push(Move { side: Side::Dictionary, word: Some(w.clone()), reward: None });
                state.push(w);
            }
        }
    };
    Ok(GameRecord { seed, opening, moves, model_turns, outcome })
}

/// Aggregate metrics over a batch of games.
///
/// `win_rate`, `failure_ratios` and `turn_cap_rate` are fractions of all
/// games; `avg_model_turns` excludes won games.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub scheme: RewardScheme,
    pub n_games: usize,
    pub wins: usize,
    pub turn_caps: usize,
    pub failure_counts: BTreeMap<FailureMode, usize>,
    pub win_rate: f64,
    pub turn_cap_rate: f64,
    pub failure_ratios: BTreeMap<FailureMode, f64>,
    pub avg_model_turns: Option<f64>,
    pub mean_model_reward: f64,
}

impl EvalSummary {
    pub fn from_records(scheme: RewardScheme, records: &[GameRecord]) -> Result<Self, ArenaError> {
        if records.is_empty() {
            return Err(ArenaError::NoGames);
        }
        let n = records.len();
        let mut wins = 0;
        let mut turn_caps = 0;
        let mut failure_counts: BTreeMap<FailureMode, usize> = FailureMode::ALL.iter().map(|m| (*m, 0)).collect();
        let mut non_win_turns = 0;
        let mut reward_sum = 0.0;
        let mut reward_n = 0usize;
        for r in records {
            match r.outcome {
                Outcome::ModelWin => wins += 1,
                Outcome::TurnCap => turn_caps += 1,
                Outcome::ModelFail { mode } => *failure_counts.entry(mode).or_default() += 1,
            }
            if r.outcome != Outcome::ModelWin {
                non_win_turns += r.model_turns;
            }
            for reward in r.moves.iter().filter_map(|m| m.reward) {
                reward_sum += reward;
                reward_n += 1;
            }
        }
        let frac = |k: usize| k as f64 / n as f64;
        let non_wins = n - wins;
        Ok(EvalSummary {
            scheme,
            n_games: n,
            wins,
            turn_caps,
            failure_ratios: failure_counts.iter().map(|(m, c)| (*m, frac(*c))).collect(),
            failure_counts,
            win_rate: frac(wins),
            turn_cap_rate: frac(turn_caps),
            avg_model_turns: (non_wins > 0).then(|| non_win_turns as f64 / non_wins as f64),
            mean_model_reward: if reward_n == 0 { 0.0 } else { reward_sum / reward_n as f64 },
        })
    }

    /// Sum of the failure ratios as an exact fraction of `n_games`.
    pub fn failure_ratio_sum(&self) -> Ratio<u64> {
        let failed: usize = self.failure_counts.values().sum();
        Ratio::new(failed as u64, self.n_games as u64)
    }

    pub fn win_ratio(&self) -> Ratio<u64> {
        Ratio::new(self.wins as u64, self.n_games as u64)
    }

    pub fn turn_cap_ratio(&self) -> Ratio<u64> {
        Ratio::new(self.turn_caps as u64, self.n_games as u64)
    }
}

/// Plays games with seeds `base_seed..base_seed + n_games` in order.
pub fn run_games<P, O>(
    policy: &mut P,
    opponent: &mut O,
    lex: &Lexicon,
    cfg: &ArenaConfig,
    n_games: usize,
    base_seed: u64,
) -> Result<Vec<GameRecord>, ArenaError>
where
    P: Policy + ?Sized,
    O: Opponent + ?Sized,
{
    if n_games == 0 {
        return Err(ArenaError::NoGames);
    }
    (0..n_games as u64).map(|i| play_game(policy, opponent, lex, cfg, base_seed.wrapping_add(i))).collect()
}

/// Parallel [`run_games`]: each game gets a fresh policy and opponent from
/// the factories. Identical to the serial run when the factories produce
/// equivalent players.
pub fn run_games_par<P, O, FP, FO>(
    make_policy: FP,
    make_opponent: FO,
    lex: &Lexicon,
    cfg: &ArenaConfig,
    n_games: usize,
    base_seed: u64,
) -> Result<Vec<GameRecord>, ArenaError>
where
    P: Policy,
    O: Opponent,
    FP: Fn() -> P + Sync,
    FO: Fn() -> O + Sync,
{
    if n_games == 0 {
        return Err(ArenaError::NoGames);
    }
    (0..n_games as u64)
        .into_par_iter()
        .map(|i| play_game(&mut make_policy(), &mut make_opponent(), lex, cfg, base_seed.wrapping_add(i)))
        .collect()
}

pub fn run_eval<P, O>(
    policy: &mut P,
    opponent: &mut O,
    lex: &Lexicon,
    cfg: &ArenaConfig,
    n_games: usize,
    base_seed: u64,
) -> Result<EvalSummary, ArenaError>
where
    P: Policy + ?Sized,
    O: Opponent + ?Sized,
{
    let records = run_games(policy, opponent, lex, cfg, n_games, base_seed)?;
    EvalSummary::from_records(cfg.scheme, &records)
}
