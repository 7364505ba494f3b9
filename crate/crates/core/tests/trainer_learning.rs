use kkut_core::trainer::{
    class_reward_maxima, expected_reward, expected_reward_gradient, softmax, update_table, Action, ActionClass, ContextTable,
    ISR_RATE_TARGET,
};
use kkut_core::{fixture_lexicon, train, ChainState, DatasetConfig, RewardScheme, TrainConfig, Word};
use proptest::prelude::*;

fn w(s: &str) -> Word {
    Word::new(s).unwrap()
}

fn table(logits: Vec<f64>) -> ContextTable {
    let names = ["가가", "가나", "가다", "가라", "가마"];
    ContextTable { actions: names[..logits.len()].iter().map(|s| Action { word: w(s), class: ActionClass::RawNoun }).collect(), logits }
}

#[test]
fn gradient_matches_central_differences() {
    let cases = [
        (vec![0.0, 0.0, 0.0], vec![2.0, 1.0, 0.0], 1.0),
        (vec![0.3, -1.2, 2.0], vec![-1.0, 2.0, 1.0], 1.0),
        (vec![1.5, 0.2, -0.7], vec![0.0, -0.5, 2.0], 0.6),
    ];
    let h = 1e-6;
    for (logits, rewards, tau) in cases {
        let g = expected_reward_gradient(&logits, &rewards, tau);
        for b in 0..logits.len() {
            let mut up = logits.clone();
            let mut down = logits.clone();
            up[b] += h;
            down[b] -= h;
            let fd = (expected_reward(&up, &rewards, tau) - expected_reward(&down, &rewards, tau)) / (2.0 * h);
            assert!((fd - g[b]).abs() <= 1e-5, "b={b}: {fd} vs {}", g[b]);
        }
    }
}

/// Averages the update over every possible group, weighted by its
/// probability; the result must be lr * (G - 1) * grad J.
#[test]
fn expected_update_is_scaled_gradient() {
    let logits = vec![0.4, -0.3, 1.1];
    let rewards = [2.0, 1.0, -1.0];
    let tau = 0.8;
    let lr = 0.1;
    let g = 4;
    let probs = softmax(&logits, tau);
    let mut mean_delta = [0.0; 3];
    for code in 0..3usize.pow(g as u32) {
        let picks: Vec<usize> = (0..g).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let weight: f64 = picks.iter().map(|a| probs[*a]).product();
        let group: Vec<(usize, f64)> = picks.iter().map(|a| (*a, rewards[*a])).collect();
        let mut t = table(logits.clone());
        update_table(&mut t, tau, &group, lr);
        for b in 0..3 {
            mean_delta[b] += weight * (t.logits[b] - logits[b]);
        }
    }
    let grad = expected_reward_gradient(&logits, &rewards, tau);
    for b in 0..3 {
        assert!((mean_delta[b] - lr * (g as f64 - 1.0) * grad[b]).abs() < 1e-12);
    }
}

#[test]
fn reward_conflict_on_rule_context() {
    let lex = fixture_lexicon();
    let state = ChainState::from_words([w("가동력")]);
    let base = class_reward_maxima(&lex, RewardScheme::Baseline, &state).unwrap();
    assert_eq!((base.raw, base.isr), (1.0, 0.0));
    let forcing = class_reward_maxima(&lex, RewardScheme::IsrForcing, &state).unwrap();
    assert_eq!((forcing.raw, forcing.isr), (1.0, 2.0));
}

fn cfg(seed: u64, stage1_fraction: f64) -> TrainConfig {
    TrainConfig { seed, curriculum: DatasetConfig { seed, stage1_fraction, ..Default::default() }, ..Default::default() }
}

#[test]
fn curriculum_reaches_target_sooner() {
    let lex = fixture_lexicon();
    let mut wins = 0;
    for seed in 0..5 {
        let with = train(&lex, &cfg(seed, 0.25)).unwrap().first_step_reaching(ISR_RATE_TARGET);
        let without = train(&lex, &cfg(seed, 0.0)).unwrap().first_step_reaching(ISR_RATE_TARGET);
        let with = with.expect("curriculum run reaches the target");
        if without.is_none_or(|s| with < s) {
            wins += 1;
        }
    }
    assert!(wins >= 4, "curriculum faster in {wins}/5 seed pairs");
}

#[test]
fn baseline_does_not_learn_the_rule() {
    let lex = fixture_lexicon();
    let base = train(&lex, &TrainConfig { scheme: RewardScheme::Baseline, ..cfg(2, 0.25) }).unwrap();
    let forcing = train(&lex, &cfg(2, 0.25)).unwrap();
    let tail = |log: &kkut_core::TrainLog| log.metrics.last().unwrap().isr_rate;
    assert!(tail(&base) < 0.5, "baseline isr_rate {}", tail(&base));
    assert!(tail(&forcing) > ISR_RATE_TARGET);
    for (b, f) in base.metrics.iter().zip(&forcing.metrics).skip(200) {
        assert!(b.isr_rate < f.isr_rate, "step {}", b.step);
    }
}

#[test]
fn zero_learning_rate_is_flat() {
    let lex = fixture_lexicon();
    let log = train(&lex, &TrainConfig { learning_rate: 0.0, steps: 200, ..cfg(1, 0.25) }).unwrap();
    let first = log.metrics[0].isr_rate;
    assert!(log.metrics.iter().all(|m| m.isr_rate == first));
    assert!(log.policy.contexts.values().all(|t| t.logits.iter().all(|l| *l == 0.0)));
}

#[test]
fn training_is_deterministic() {
    let lex = fixture_lexicon();
    let c = TrainConfig { steps: 300, ..cfg(4, 0.25) };
    let a = train(&lex, &c).unwrap();
    let b = train(&lex, &c).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.policy, b.policy);
}

#[test]
fn log_every_thins_metrics() {
    let lex = fixture_lexicon();
    let log = train(&lex, &TrainConfig { steps: 100, log_every: 30, ..cfg(0, 0.25) }).unwrap();
    let steps: Vec<usize> = log.metrics.iter().map(|m| m.step).collect();
    assert_eq!(steps, vec![0, 30, 60, 90, 100]);
}

proptest! {
    #[test]
    fn updates_conserve_probability(
        logits in prop::collection::vec(-5.0f64..5.0, 2..6),
        picks in prop::collection::vec((0usize..6, -1.0f64..2.0), 1..8),
        lr in 0.0f64..2.0,
        tau in 0.2f64..3.0,
    ) {
        let n = logits.len();
        let before: f64 = logits.iter().sum();
        let mut t = table(logits);
        let group: Vec<(usize, f64)> = picks.into_iter().map(|(a, r)| (a % n, r)).collect();
        update_table(&mut t, tau, &group, lr);
        let p = t.probabilities(tau);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        // centred advantages make the logit step sum to zero
        prop_assert!((t.logits.iter().sum::<f64>() - before).abs() < 1e-9);
    }
}
