//! Hot paths: syllable arithmetic, scoring, candidate lookup and full games.

use std::collections::BTreeSet;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kkut_core::arena::{play_game, run_games_par, ArenaConfig, DictionaryOpponent, RandomValidPolicy};
use kkut_core::{decompose, fixture_lexicon, isr_apply, score, ChainState, RewardScheme, Syllable, Word};

fn bench_hangul(c: &mut Criterion) {
    let all: Vec<Syllable> = Syllable::all().collect();
    c.bench_function("decompose_all", |b| b.iter(|| all.iter().map(|s| decompose(black_box(*s)).final_ as u64).sum::<u64>()));
    c.bench_function("isr_apply_all", |b| b.iter(|| all.iter().filter_map(|s| isr_apply(black_box(*s))).count()));
}

fn bench_score(c: &mut Criterion) {
    let lex = fixture_lexicon();
    let state = ChainState::from_words(["사랑", "낭만", "만두", "두뇌", "가동력"].map(|w| Word::new(w).unwrap()));
    let cand = Word::new("역량").unwrap();
    let mut group = c.benchmark_group("score");
    for scheme in RewardScheme::ALL {
        group.bench_with_input(BenchmarkId::from_parameter(scheme), &scheme, |b, scheme| {
            b.iter(|| score(*scheme, &lex, black_box(&state), black_box(&cand)))
        });
    }
    group.finish();
}

fn bench_candidates(c: &mut Criterion) {
    let lex = fixture_lexicon();
    let used = BTreeSet::new();
    let starts: Vec<Syllable> = lex.groups().map(|(s, _)| s).collect();
    c.bench_function("candidates_every_final", |b| b.iter(|| starts.iter().map(|s| lex.candidates(*s, &used, 2).len()).sum::<usize>()));
}

fn bench_games(c: &mut Criterion) {
    let lex = fixture_lexicon();
    let cfg = ArenaConfig::default();
    c.bench_function("play_game_random", |b| {
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            play_game(&mut RandomValidPolicy, &mut DictionaryOpponent::default(), &lex, &cfg, seed).unwrap()
        })
    });
    c.bench_function("run_games_par_1000", |b| {
        b.iter(|| run_games_par(|| RandomValidPolicy, DictionaryOpponent::default, &lex, &cfg, 1000, 0).unwrap())
    });
}

criterion_group!(benches, bench_hangul, bench_score, bench_candidates, bench_games);
criterion_main!(benches);
