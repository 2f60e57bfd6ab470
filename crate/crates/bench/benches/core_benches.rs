use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use factsel_core::maniple::{fit_forest, vote, Hyperparams, MaxFeatures};
use factsel_core::metrics::{pass_at_k, pass_at_k_exact, shapley_from_game, Game};
use factsel_core::prompt::{render, PromptPlan};
use factsel_core::{load_corpus, FactSet, Job, PythonParser};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench_pass_at_k(c: &mut Criterion) {
    let mut g = c.benchmark_group("pass_at_k");
    for &(n, c_, k) in &[(15u64, 4u64, 1u64), (15, 4, 5), (200, 37, 100)] {
        g.bench_with_input(BenchmarkId::new("f64", format!("{n}/{c_}/{k}")), &(n, c_, k), |b, &(n, c_, k)| {
            b.iter(|| pass_at_k(black_box(n), black_box(c_), black_box(k)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("exact", format!("{n}/{c_}/{k}")), &(n, c_, k), |b, &(n, c_, k)| {
            b.iter(|| pass_at_k_exact(black_box(n), black_box(c_), black_box(k)).unwrap())
        });
    }
    g.finish();
}

fn bench_shapley(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut game: Game = [0.0; 128];
    for v in game.iter_mut().skip(1) {
        *v = rng.gen();
    }
    c.bench_function("shapley_7_facts", |b| b.iter(|| shapley_from_game(black_box(&game))));
}

fn synthetic(rows: usize, dims: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..dims).map(|j| if j < 7 { f64::from(rng.gen_range(0..2u8)) } else { rng.gen_range(0.0..4000.0) }).collect())
        .collect();
    let y = x
        .iter()
        .map(|r| {
            let s = r[2] + r[3] + r[6];
            if rng.gen_bool(0.05) {
                rng.gen_range(0..3)
            } else {
                (s as usize).min(2)
            }
        })
        .collect();
    (x, y)
}

fn bench_forest(c: &mut Criterion) {
    let (x, y) = synthetic(1000, 7 + 4 + 2, 5);
    let mut g = c.benchmark_group("forest");
    g.sample_size(10);
    for &(n_trees, max_features) in &[(100usize, MaxFeatures::Sqrt), (100, MaxFeatures::All)] {
        let params = Hyperparams {
            n_trees,
            max_depth: None,
            min_samples_leaf: 1,
            max_features,
        };
        g.bench_function(format!("fit_{n_trees}_{max_features:?}").to_lowercase(), |b| {
            b.iter(|| fit_forest(black_box(&x), black_box(&y), 3, params, 7))
        });
    }
    let trees = fit_forest(
        &x,
        &y,
        3,
        Hyperparams {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
        },
        7,
    );
    g.bench_function("vote_100", |b| b.iter(|| vote(black_box(&trees), 3, black_box(&x[17]))));
    g.finish();
}

fn bench_prompt(c: &mut Criterion) {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/corpus");
    let corpus = load_corpus(&root, &PythonParser).unwrap();
    let (bug, facts) = corpus.bug("pandas:128").unwrap();
    let mut g = c.benchmark_group("render_prompt");
    for bits in ["0000000", "1111111"] {
        let set: FactSet = bits.parse().unwrap();
        let plan = PromptPlan::new(Job::new(bug, set));
        g.bench_function(bits, |b| b.iter(|| render(black_box(&plan), facts).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench_pass_at_k, bench_shapley, bench_forest, bench_prompt);
criterion_main!(benches);
