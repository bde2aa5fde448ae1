//! Parallel vs sequential throughput on the data-parallel inner loops:
//! stationary scoring over a synthetic graph, sentence similarity
//! matrices, and Monte-Carlo position estimates.
//!
//! Build with the default `parallel` feature to compare both paths; with
//! `--no-default-features` only the sequential baselines run.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use linkpulse::ids::{LinkId, SiteId};
use linkpulse::power::{stationary_scores_seq, PowerParams, TransitionGraph};
use linkpulse::simulator::{Attractiveness, SiteSpec};
use linkpulse::summarize::{collect_sentences, similarity_matrix_seq, PageDoc};

#[cfg(feature = "parallel")]
use linkpulse::power::stationary_scores_par;
#[cfg(feature = "parallel")]
use linkpulse::summarize::similarity_matrix_par;

/// Pseudo-random graph: `n` nodes, `deg` out-edges each, edges spread by
/// a multiplicative stride so the structure is irregular but fixed.
fn synthetic_graph(n: usize, deg: usize) -> TransitionGraph {
    let mut edges = Vec::with_capacity(n * deg);
    let mut x: u64 = 88172645463325252;
    for from in 0..n as u64 {
        for _ in 0..deg {
            // xorshift64
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            let to = x % n as u64;
            if to != from {
                edges.push((from as u32, to as u32, 1.0));
            }
        }
    }
    TransitionGraph::from_weighted_edges(n, &edges)
}

fn synthetic_docs(docs: usize, sentences_per_doc: usize) -> Vec<PageDoc> {
    let words = [
        "link", "page", "visit", "count", "window", "rank", "slot", "site", "graph", "score",
        "user", "query", "layout", "popular", "recent",
    ];
    (0..docs)
        .map(|d| {
            let text: String = (0..sentences_per_doc)
                .map(|s| {
                    let mut sentence = String::new();
                    for w in 0..8 {
                        sentence.push_str(words[(d * 31 + s * 7 + w * 3) % words.len()]);
                        sentence.push(' ');
                    }
                    sentence.push_str("end.");
                    sentence
                })
                .collect::<Vec<_>>()
                .join(" ");
            PageDoc::new(
                SiteId::new(format!("s{d}")).unwrap(),
                LinkId::new(format!("/p{d}")).unwrap(),
                text,
            )
            .unwrap()
        })
        .collect()
}

fn bench_stationary(c: &mut Criterion) {
    let graph = synthetic_graph(20_000, 8);
    let params = PowerParams {
        damping: 0.85,
        epsilon: 1e-10,
        max_iter: 30,
    };
    let mut group = c.benchmark_group("stationary_scores");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("seq", "20k nodes"), &graph, |b, g| {
        b.iter(|| stationary_scores_seq(g, &params))
    });
    #[cfg(feature = "parallel")]
    group.bench_with_input(BenchmarkId::new("par", "20k nodes"), &graph, |b, g| {
        b.iter(|| stationary_scores_par(g, &params))
    });
    group.finish();
}

fn bench_similarity(c: &mut Criterion) {
    let docs = synthetic_docs(40, 20);
    let sentences = collect_sentences(&docs);
    let mut group = c.benchmark_group("similarity_matrix");
    group.sample_size(10);
    group.bench_with_input(
        BenchmarkId::new("seq", format!("{} sentences", sentences.len())),
        &sentences,
        |b, s| b.iter(|| similarity_matrix_seq(s)),
    );
    #[cfg(feature = "parallel")]
    group.bench_with_input(
        BenchmarkId::new("par", format!("{} sentences", sentences.len())),
        &sentences,
        |b, s| b.iter(|| similarity_matrix_par(s)),
    );
    group.finish();
}

fn bench_monte_carlo(c: &mut Criterion) {
    let spec = SiteSpec {
        site: SiteId::new("bench").unwrap(),
        weight: 1.0,
        links: (0..50)
            .map(|i| LinkId::new(format!("/l{i}")).unwrap())
            .collect(),
        attractiveness: Attractiveness::Zipf { s: 1.2 },
        satisfaction: None,
    };
    let mut group = c.benchmark_group("expected_position_mc");
    group.sample_size(10);
    group.bench_function("seq/1M draws", |b| {
        b.iter(|| linkpulse::simulator::expected_position_monte_carlo_seq(&spec, None, 1_000_000, 7))
    });
    #[cfg(feature = "parallel")]
    group.bench_function("par/1M draws", |b| {
        b.iter(|| linkpulse::simulator::expected_position_monte_carlo_par(&spec, None, 1_000_000, 7))
    });
    group.finish();
}

criterion_group!(benches, bench_stationary, bench_similarity, bench_monte_carlo);
criterion_main!(benches);
