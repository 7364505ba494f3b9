//! Verifiable-reward environment for the Korean word-chain game (끝말잇기).
//!
//! - [`hangul`]: syllable decomposition and the initial-sound rule (두음법칙)
//! - [`lexicon`]: noun list loading, candidate lookup, training-word sampling
//! - [`rules`]: rule checks, reward schemes, failure classification
//! - [`curriculum`]: chain generation, transcripts, two-stage dataset order
//! - [`arena`]: games against the dictionary and evaluation metrics
//! - [`trainer`]: tabular group-relative policy-gradient trainer
//! - [`service`]: NDJSON scoring protocol

pub mod arena;
pub mod curriculum;
pub mod hangul;
pub mod lexicon;
pub mod rules;
pub mod service;
pub mod trainer;

pub use rand_chacha;

pub use arena::{
    dictionary_move, play_game, run_eval, run_games, run_games_par, ArenaConfig, ArenaError, DictionaryOpponent, EvalSummary,
    FirstValidPolicy, GameRecord, Opponent, Outcome, Policy, RandomValidPolicy, ScriptedOpponent, ScriptedPolicy,
};
pub use curriculum::{
    build_dataset, generate_chain, render_transcript, Chain, CurriculumError, DatasetConfig, Example, TranscriptTemplate,
};
pub use hangul::{compose, decompose, isr_applicable, isr_apply, HangulError, JamoTriple, Syllable};
pub use lexicon::{load_lexicon, sample_group_count, sample_training_words, Lexicon, LexiconError, LoadMode, SamplingPlan, Word};
pub use rules::{check_step, classify_failure, score, ChainState, FailureMode, FailurePriority, RewardBreakdown, RewardScheme, RuleReport};
pub use service::{serve_scores, ScoreRequest, ScoreResponse};
pub use trainer::{train, TabularPolicy, TrainConfig, TrainError, TrainLog};

/// The constructed test lexicon shipped with the crate.
pub const FIXTURE_LEXICON: &str = include_str!("../fixtures/lexicon.txt");

/// Loads [`FIXTURE_LEXICON`].
pub fn fixture_lexicon() -> Lexicon {
    load_lexicon(FIXTURE_LEXICON.as_bytes(), LoadMode::Strict).expect("fixture lexicon is valid").0
}
