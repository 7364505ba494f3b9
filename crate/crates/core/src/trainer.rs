//! Tabular softmax policy trained with group-relative policy-gradient
//! updates: G answers are sampled per prompt, each scored by the reward
//! scheme, and the advantage of each answer is its reward minus the group
//! mean. No KL or clipping terms.
//!
//! A context is the syllable the answer must continue from. Its action set
//! holds nouns starting with that syllable, nouns starting with its
//! initial-sound rewrite, and a few synthetic non-nouns built from the raw
//! syllable (the kind of answer that follows the basic rule but not the
//! initial-sound rule).

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::Policy;
use crate::curriculum::{build_dataset, CurriculumError, DatasetConfig, Example, TranscriptTemplate};
use crate::hangul::{isr_applicable, isr_apply, Syllable};
use crate::lexicon::{Lexicon, Word};
use crate::rules::{score, ChainState, RewardBreakdown, RewardScheme, MIN_WORD_LEN};

/// Second syllables tried, in order, when building non-noun distractors.
pub const DISTRACTOR_SUFFIXES: [char; 8] = ['량', '사', '수', '기', '도', '미', '소', '자'];
pub const DISTRACTORS_PER_CONTEXT: usize = 3;

/// Threshold on the ISR-application rate used to compare runs.
pub const ISR_RATE_TARGET: f64 = 0.9;

#[derive(Error, Debug)]
pub enum TrainError {
    #[error("group_size must be at least 2, got {0}")]
    GroupSize(usize),
    #[error("temperature must be positive and finite, got {0}")]
    Temperature(f64),
    #[error("learning_rate must be finite and non-negative, got {0}")]
    LearningRate(f64),
    #[error(transparent)]
    Dataset(#[from] CurriculumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionClass {
    /// noun starting with the raw syllable
    RawNoun,
    /// noun starting with the rewritten syllable
    IsrNoun,
    /// raw syllable plus a suffix, not in the lexicon
    RawDistractor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub word: Word,
    pub class: ActionClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextTable {
    pub actions: Vec<Action>,
    pub logits: Vec<f64>,
}

impl ContextTable {
    pub fn build(lex: &Lexicon, ctx: Syllable) -> Self {
        let long = |ws: &[Word]| -> Vec<Word> { ws.iter().filter(|w| w.len() >= MIN_WORD_LEN).cloned().collect() };
        let mut actions: Vec<Action> =
            long(lex.starting_with(ctx)).into_iter().map(|word| Action { word, class: ActionClass::RawNoun }).collect();
        if let Some(alt) = isr_apply(ctx) {
            actions.extend(long(lex.starting_with(alt)).into_iter().map(|word| Action { word, class: ActionClass::IsrNoun }));
        }
        let distractors = DISTRACTOR_SUFFIXES
            .iter()
            .map(|c| Word::from_syllables(&[ctx, Syllable::new(*c).expect("suffixes are syllables")]).expect("non-empty"))
            .filter(|w| !lex.contains(w))
            .take(DISTRACTORS_PER_CONTEXT);
        actions.extend(distractors.map(|word| Action { word, class: ActionClass::RawDistractor }));
        let logits = vec![0.0; actions.len()];
        ContextTable { actions, logits }
    }

    pub fn probabilities(&self, temperature: f64) -> Vec<f64> {
        softmax(&self.logits, temperature)
    }

    pub fn class_mass(&self, temperature: f64, class: ActionClass) -> f64 {
        self.probabilities(temperature).iter().zip(&self.actions).filter(|(_, a)| a.class == class).map(|(p, _)| p).sum()
    }

    /// Probability of answering with a noun that links (raw or rewritten).
    pub fn accuracy(&self, temperature: f64) -> f64 {
        self.class_mass(temperature, ActionClass::RawNoun) + self.class_mass(temperature, ActionClass::IsrNoun)
    }

    pub fn has_class(&self, class: ActionClass) -> bool {
        self.actions.iter().any(|a| a.class == class)
    }
}

pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| ((l - max) / temperature).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Expected reward `J = sum_a pi_a r_a` of a softmax policy over fixed rewards.
pub fn expected_reward(logits: &[f64], rewards: &[f64], temperature: f64) -> f64 {
    softmax(logits, temperature).iter().zip(rewards).map(|(p, r)| p * r).sum()
}

/// Analytic gradient of [`expected_reward`] w.r.t. the logits:
/// `dJ/dtheta_b = pi_b (r_b - J) / temperature`.
pub fn expected_reward_gradient(logits: &[f64], rewards: &[f64], temperature: f64) -> Vec<f64> {
    let probs = softmax(logits, temperature);
    let j: f64 = probs.iter().zip(rewards).map(|(p, r)| p * r).sum();
    probs.iter().zip(rewards).map(|(p, r)| p * (r - j) / temperature).collect()
}

/// Per-context softmax tables, created on first use with uniform logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    pub temperature: f64,
    pub contexts: BTreeMap<Syllable, ContextTable>,
}

impl TabularPolicy {
    pub fn new(temperature: f64) -> Self {
        TabularPolicy { temperature, contexts: BTreeMap::new() }
    }

    pub fn context(&mut self, lex: &Lexicon, ctx: Syllable) -> &mut ContextTable {
        self.contexts.entry(ctx).or_insert_with(|| ContextTable::build(lex, ctx))
    }

    pub fn get(&self, ctx: Syllable) -> Option<&ContextTable> {
        self.contexts.get(&ctx)
    }

    fn sample(&mut self, lex: &Lexicon, ctx: Syllable, rng: &mut ChaCha8Rng) -> Option<usize> {
        let temperature = self.temperature;
        let table = self.context(lex, ctx);
        let probs = table.probabilities(temperature);
        WeightedIndex::new(&probs).ok().map(|d| d.sample(rng))
    }
}

impl Policy for TabularPolicy {
    fn next_word(&mut self, lex: &Lexicon, state: &ChainState, rng: &mut ChaCha8Rng) -> Option<Word> {
        let ctx = state.last_word()?.last();
        let idx = self.sample(lex, ctx, rng)?;
        Some(self.contexts[&ctx].actions[idx].word.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub action: usize,
    pub word: Word,
    pub reward: RewardBreakdown,
}

/// Samples `group_size` answers for the prompt and scores each one.
///
/// Panics if `state` is empty.
pub fn rollout_group(
    policy: &mut TabularPolicy,
    lex: &Lexicon,
    scheme: RewardScheme,
    state: &ChainState,
    group_size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Rollout> {
    let ctx = state.last_word().expect("prompt has at least one word").last();
    let mut out = Vec::with_capacity(group_size);
    for _ in 0..group_size {
        let Some(action) = policy.sample(lex, ctx, rng) else {
            break;
        };
        let word = policy.contexts[&ctx].actions[action].word.clone();
        let reward = score(scheme, lex, state, &word);
        out.push(Rollout { action, word, reward });
    }
    out
}

/// Group-mean-centred advantages.
pub fn advantages(rewards: &[f64]) -> Vec<f64> {
    if rewards.is_empty() {
        return Vec::new();
    }
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    rewards.iter().map(|r| r - mean).collect()
}

/// One policy-gradient step on a context table:
/// `theta_b += lr * sum_i A_i * (1[a_i = b] - pi_b) / temperature`.
pub fn update_table(table: &mut ContextTable, temperature: f64, group: &[(usize, f64)], learning_rate: f64) {
    if group.is_empty() {
        return;
    }
    let rewards: Vec<f64> = group.iter().map(|(_, r)| *r).collect();
    let adv = advantages(&rewards);
    let probs = table.probabilities(temperature);
    let mut grad = vec![0.0; table.logits.len()];
    for ((action, _), a) in group.iter().zip(&adv) {
        for (b, g) in grad.iter_mut().enumerate() {
            let indicator = if b == *action { 1.0 } else { 0.0 };
            *g += a * (indicator - probs[b]) / temperature;
        }
    }
    for (l, g) in table.logits.iter_mut().zip(grad) {
        *l += learning_rate * g;
    }
}

/// Applies [`update_table`] to the prompt's context using the rollouts' totals.
pub fn update(policy: &mut TabularPolicy, ctx: Syllable, group: &[Rollout], learning_rate: f64) {
    let temperature = policy.temperature;
    let Some(table) = policy.contexts.get_mut(&ctx) else {
        return;
    };
    let pairs: Vec<(usize, f64)> = group.iter().map(|r| (r.action, r.reward.total)).collect();
    update_table(table, temperature, &pairs, learning_rate);
}

/// Best reward among raw-start actions vs. among rewritten-start actions of
/// a context, by enumerating every action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassRewardMaxima {
    pub raw: f64,
    pub isr: f64,
}

pub fn class_reward_maxima(lex: &Lexicon, scheme: RewardScheme, state: &ChainState) -> Option<ClassRewardMaxima> {
    let ctx = state.last_word()?.last();
    let table = ContextTable::build(lex, ctx);
    let best = |pred: &dyn Fn(ActionClass) -> bool| {
        table
            .actions
            .iter()
            .filter(|a| pred(a.class))
            .map(|a| score(scheme, lex, state, &a.word).total)
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |m| m.max(r))))
    };
    let raw = best(&|c| c != ActionClass::IsrNoun)?;
    let isr = best(&|c| c == ActionClass::IsrNoun)?;
    Some(ClassRewardMaxima { raw, isr })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub scheme: RewardScheme,
    /// Curriculum settings; `n_examples` is replaced by `steps`.
    pub curriculum: DatasetConfig,
    pub group_size: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub steps: usize,
    pub log_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            scheme: RewardScheme::IsrForcing,
            curriculum: DatasetConfig::default(),
            group_size: 4,
            learning_rate: 0.5,
            temperature: 1.0,
            steps: 2000,
            log_every: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.group_size < 2 {
            return Err(TrainError::GroupSize(self.group_size));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(TrainError::Temperature(self.temperature));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::LearningRate(self.learning_rate));
        }
        Ok(())
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepMetrics {
    /// Number of updates applied so far.
    pub step: usize,
    pub scheme: RewardScheme,
    /// Curriculum stage of the prompt used at this step (0 before training).
    pub stage: u8,
    /// Mean probability of a rewritten-start noun over rule-required contexts.
    pub isr_rate: f64,
    /// Probability of a linking noun, per ISR-applicable prompt syllable.
    pub accuracy: BTreeMap<Syllable, f64>,
    /// Mean group reward at this step.
    pub mean_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub metrics: Vec<StepMetrics>,
    pub policy: TabularPolicy,
    /// Contexts averaged into `isr_rate`.
    pub required_contexts: Vec<Syllable>,
}

impl TrainLog {
    /// First logged step whose ISR rate reaches `target`.
    pub fn first_step_reaching(&self, target: f64) -> Option<usize> {
        self.metrics.iter().find(|m| m.isr_rate >= target).map(|m| m.step)
    }
}

/// ISR-applicable contexts where the rule has to be applied: some noun
/// starts with the rewritten syllable and none starts with the raw one.
pub fn rule_required(lex: &Lexicon, ctx: Syllable) -> bool {
    let long = |s: Syllable| lex.starting_with(s).iter().any(|w| w.len() >= MIN_WORD_LEN);
    match isr_apply(ctx) {
        Some(alt) => long(alt) && !long(ctx),
        None => false,
    }
}

fn snapshot(
    policy: &TabularPolicy,
    scheme: RewardScheme,
    step: usize,
    stage: u8,
    tracked: &BTreeSet<Syllable>,
    required: &[Syllable],
    mean_reward: Option<f64>,
) -> StepMetrics {
    let t = policy.temperature;
    let isr_rate = if required.is_empty() {
        0.0
    } else {
        required.iter().map(|c| policy.contexts[c].class_mass(t, ActionClass::IsrNoun)).sum::<f64>() / required.len() as f64
    };
    StepMetrics {
        step,
        scheme,
        stage,
        isr_rate,
        accuracy: tracked.iter().map(|c| (*c, policy.contexts[c].accuracy(t))).collect(),
        mean_reward,
    }
}

/// Runs one pass over the curriculum-ordered dataset, one prompt per step.
pub fn train(lex: &Lexicon, cfg: &TrainConfig) -> Result<TrainLog, TrainError> {
    cfg.validate()?;
    let dataset_cfg = DatasetConfig { n_examples: cfg.steps, ..cfg.curriculum.clone() };
    let dataset = build_dataset(lex, &dataset_cfg, &TranscriptTemplate::default())?;
    Ok(train_on(lex, cfg, &dataset))
}

/// Trains on a prebuilt, ordered dataset.
pub fn train_on(lex: &Lexicon, cfg: &TrainConfig, dataset: &[Example]) -> TrainLog {
    let mut policy = TabularPolicy::new(cfg.temperature);
    let tails: BTreeSet<Syllable> = dataset.iter().map(Example::tail_syllable).collect();
    for ctx in &tails {
        policy.context(lex, *ctx);
    }
    let tracked: BTreeSet<Syllable> = tails.iter().copied().filter(|c| isr_applicable(*c)).collect();
    let required: Vec<Syllable> = tracked.iter().copied().filter(|c| rule_required(lex, *c)).collect();

    let log_every = cfg.log_every.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut metrics = vec![snapshot(&policy, cfg.scheme, 0, 0, &tracked, &required, None)];
    for (i, example) in dataset.iter().enumerate() {
        let state = example.state();
        let ctx = example.tail_syllable();
        let group = rollout_group(&mut policy, lex, cfg.scheme, &state, cfg.group_size, &mut rng);
        update(&mut policy, ctx, &group, cfg.learning_rate);
        let step = i + 1;
        if step % log_every == 0 || step == dataset.len() {
            let mean = group.iter().map(|r| r.reward.total).sum::<f64>() / group.len().max(1) as f64;
            metrics.push(snapshot(&policy, cfg.scheme, step, example.stage, &tracked, &required, Some(mean)));
        }
    }
    TrainLog { metrics, policy, required_contexts: required }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        Word::new(s).unwrap()
    }

    fn syl(c: char) -> Syllable {
        Syllable::new(c).unwrap()
    }

    fn lex() -> Lexicon {
        Lexicon::from_strs(&["가동력", "역량", "역사", "역할", "나라", "라디오", "나무", "사과", "과일"])
    }

    #[test]
    fn context_classes() {
        let lex = lex();
        let t = ContextTable::build(&lex, syl('력'));
        assert!(!t.has_class(ActionClass::RawNoun));
        assert_eq!(t.actions.iter().filter(|a| a.class == ActionClass::IsrNoun).count(), 3);
        let distractors: Vec<_> = t.actions.iter().filter(|a| a.class == ActionClass::RawDistractor).map(|a| a.word.to_string()).collect();
        assert_eq!(distractors, vec!["력량", "력사", "력수"]);
        let t = ContextTable::build(&lex, syl('라'));
        assert!(t.has_class(ActionClass::RawNoun));
        assert!(t.has_class(ActionClass::IsrNoun));
        assert!(t.has_class(ActionClass::RawDistractor));
    }

    #[test]
    fn distractors_skip_real_nouns() {
        let lex = Lexicon::from_strs(&["력량", "역사"]);
        let t = ContextTable::build(&lex, syl('력'));
        let distractors: Vec<_> = t.actions.iter().filter(|a| a.class == ActionClass::RawDistractor).map(|a| a.word.to_string()).collect();
        assert_eq!(distractors, vec!["력사", "력수", "력기"]);
    }

    #[test]
    fn softmax_normalised() {
        let p = softmax(&[1.0, -2.0, 300.0, 0.5], 0.7);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_step_hand_computation() {
        // three actions, uniform logits; group picks actions [0, 1, 1, 2]
        // with rewards [2, 1, 1, 0]; mean 1 so advantages [1, 0, 0, -1].
        // grad_b = sum_i A_i (1[a_i=b] - 1/3) = 1[b=0] - 1[b=2]
        let mut t = ContextTable {
            actions: ["가가", "가나", "가다"].iter().map(|s| Action { word: w(s), class: ActionClass::RawNoun }).collect(),
            logits: vec![0.0; 3],
        };
        update_table(&mut t, 1.0, &[(0, 2.0), (1, 1.0), (1, 1.0), (2, 0.0)], 0.5);
        assert_eq!(t.logits, vec![0.5, 0.0, -0.5]);
        let p = t.probabilities(1.0);
        assert!(p[0] > 1.0 / 3.0 && p[2] < 1.0 / 3.0);
    }

    #[test]
    fn uniform_rewards_leave_policy_unchanged() {
        let mut t = ContextTable {
            actions: ["가가", "가나"].iter().map(|s| Action { word: w(s), class: ActionClass::RawNoun }).collect(),
            logits: vec![0.3, -0.1],
        };
        let before = t.clone();
        update_table(&mut t, 1.0, &[(0, 1.0), (1, 1.0), (1, 1.0), (0, 1.0)], 0.7);
        assert_eq!(t, before);
    }

    #[test]
    fn contexts_update_independently() {
        let lex = lex();
        let mut policy = TabularPolicy::new(1.0);
        policy.context(&lex, syl('력'));
        policy.context(&lex, syl('과'));
        let before = policy.get(syl('과')).unwrap().clone();
        let state = ChainState::from_words([w("가동력")]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let g = rollout_group(&mut policy, &lex, RewardScheme::IsrForcing, &state, 4, &mut rng);
            update(&mut policy, syl('력'), &g, 0.5);
        }
        assert_eq!(policy.get(syl('과')).unwrap(), &before);
        assert_ne!(policy.get(syl('력')).unwrap().logits, vec![0.0; 6]);
    }

    #[test]
    fn rollout_is_seeded() {
        let lex = lex();
        let state = ChainState::from_words([w("가동력")]);
        let run = || {
            let mut policy = TabularPolicy::new(1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            rollout_group(&mut policy, &lex, RewardScheme::IsrForcing, &state, 4, &mut rng)
        };
        let a = run();
        assert_eq!(a.len(), 4);
        assert_eq!(a, run());
        for r in &a {
            assert!([1.0, 2.0].contains(&r.reward.total));
        }
    }

    #[test]
    fn advantages_centre() {
        assert_eq!(advantages(&[1.0, 1.0, 1.0, 1.0]), vec![0.0; 4]);
        assert_eq!(advantages(&[2.0, 1.0, 1.0, 0.0]), vec![1.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(matches!(TrainConfig { group_size: 1, ..Default::default() }.validate(), Err(TrainError::GroupSize(1))));
        assert!(TrainConfig { temperature: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: f64::NAN, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn rule_required_contexts() {
        let lex = lex();
        assert!(rule_required(&lex, syl('력')));
        // 라 has raw nouns (라디오)
        assert!(!rule_required(&lex, syl('라')));
        assert!(!rule_required(&lex, syl('과')));
    }

    #[test]
    fn policy_json_round_trip() {
        let lex = lex();
        let mut policy = TabularPolicy::new(1.0);
        policy.context(&lex, syl('력')).logits[0] = 1.25;
        let json = serde_json::to_string(&policy).unwrap();
        let back: TabularPolicy = serde_json::from_str(&json).unwrap();
        assert_eq!(back, policy);
    }
}
