//! Stationary-score computation shared by the page ranker and the
//! sentence scorer.
//!
//! The iteration is the usual damped random walk: each node receives a
//! uniform teleport share plus the damped, weight-proportional share of
//! its in-neighbours' scores; nodes without outgoing weight spread their
//! score uniformly. Per-node contributions are accumulated in a fixed
//! order and reductions run over the score vector in index order, so the
//! result is bit-identical whether the per-node map runs sequentially or
//! on a rayon pool, at any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A weighted digraph in pull form: for every node, the list of
/// (source, coefficient) pairs where coefficient = edge weight divided by
/// the source's total outgoing weight.
#[derive(Debug, Clone)]
pub struct TransitionGraph {
    incoming: Vec<Vec<(u32, f64)>>,
    dangling: Vec<bool>,
}

impl TransitionGraph {
    /// Builds the pull representation from weighted edges. Edge sources
    /// and targets must be < `n`; self-loops must have been dropped by the
    /// caller. Contribution lists are sorted by source index so the inner
    /// sums have a fixed order.
    pub fn from_weighted_edges(n: usize, edges: &[(u32, u32, f64)]) -> Self {
        let mut out_weight = vec![0.0f64; n];
        for &(from, _, w) in edges {
            out_weight[from as usize] += w;
        }
        let mut incoming: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(from, to, w) in edges {
            incoming[to as usize].push((from, w / out_weight[from as usize]));
        }
        for list in &mut incoming {
            list.sort_by_key(|&(source, _)| source);
        }
        let dangling = out_weight.iter().map(|&w| w == 0.0).collect();
        TransitionGraph { incoming, dangling }
    }

    pub fn len(&self) -> usize {
        self.incoming.len()
    }

    pub fn is_empty(&self) -> bool {
        self.incoming.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PowerParams {
    pub damping: f64,
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for PowerParams {
    fn default() -> Self {
        PowerParams {
            damping: 0.85,
            epsilon: 1e-10,
            max_iter: 200,
        }
    }
}

/// Stationary scores plus the number of iterations used. Dispatches to
/// the rayon path when the `parallel` feature is enabled.
pub fn stationary_scores(graph: &TransitionGraph, params: &PowerParams) -> (Vec<f64>, usize) {
    #[cfg(feature = "parallel")]
    {
        run(graph, params, step_par)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run(graph, params, step_seq)
    }
}

/// Sequential variant, always available; used by benches as the baseline.
pub fn stationary_scores_seq(graph: &TransitionGraph, params: &PowerParams) -> (Vec<f64>, usize) {
    run(graph, params, step_seq)
}

/// Rayon variant. Bit-identical to the sequential one.
#[cfg(feature = "parallel")]
pub fn stationary_scores_par(graph: &TransitionGraph, params: &PowerParams) -> (Vec<f64>, usize) {
    run(graph, params, step_par)
}

fn run(
    graph: &TransitionGraph,
    params: &PowerParams,
    step: impl Fn(&TransitionGraph, &[f64], f64, f64) -> Vec<f64>,
) -> (Vec<f64>, usize) {
    let n = graph.len();
    if n == 0 {
        return (Vec::new(), 0);
    }
    let uniform = 1.0 / n as f64;
    let mut scores = vec![uniform; n];
    let mut iterations = 0;
    for _ in 0..params.max_iter {
        iterations += 1;
        let dangling_mass: f64 = scores
            .iter()
            .zip(&graph.dangling)
            .filter(|(_, &d)| d)
            .map(|(s, _)| s)
            .sum();
        let base = (1.0 - params.damping) * uniform + params.damping * dangling_mass * uniform;
        let next = step(graph, &scores, base, params.damping);
        let delta: f64 = next
            .iter()
            .zip(&scores)
            .map(|(a, b)| (a - b).abs())
            .sum();
        scores = next;
        if delta < params.epsilon {
            break;
        }
    }
    (scores, iterations)
}

fn node_score(graph: &TransitionGraph, scores: &[f64], base: f64, damping: f64, i: usize) -> f64 {
    let pulled: f64 = graph.incoming[i]
        .iter()
        .map(|&(j, coeff)| scores[j as usize] * coeff)
        .sum();
    base + damping * pulled
}

fn step_seq(graph: &TransitionGraph, scores: &[f64], base: f64, damping: f64) -> Vec<f64> {
    (0..graph.len())
        .map(|i| node_score(graph, scores, base, damping, i))
        .collect()
}

#[cfg(feature = "parallel")]
fn step_par(graph: &TransitionGraph, scores: &[f64], base: f64, damping: f64) -> Vec<f64> {
    (0..graph.len())
        .into_par_iter()
        .map(|i| node_score(graph, scores, base, damping, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> TransitionGraph {
        let edges: Vec<(u32, u32, f64)> = (0..n as u32)
            .map(|i| (i, (i + 1) % n as u32, 1.0))
            .collect();
        TransitionGraph::from_weighted_edges(n, &edges)
    }

    #[test]
    fn ring_is_uniform() {
        let graph = ring(5);
        let (scores, _) = stationary_scores(&graph, &PowerParams::default());
        for s in scores {
            assert!((s - 0.2).abs() < 1e-9);
        }
    }

    #[test]
    fn scores_sum_to_one_with_dangling_nodes() {
        // 0 -> 1 -> 2, node 2 dangling.
        let graph = TransitionGraph::from_weighted_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let (scores, _) = stationary_scores(&graph, &PowerParams::default());
        let sum: f64 = scores.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(scores.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn weighted_edges_shift_mass() {
        // Node 0 splits 3:1 between 1 and 2.
        let graph =
            TransitionGraph::from_weighted_edges(3, &[(0, 1, 3.0), (0, 2, 1.0), (1, 0, 1.0), (2, 0, 1.0)]);
        let (scores, _) = stationary_scores(&graph, &PowerParams::default());
        assert!(scores[1] > scores[2]);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential_bitwise() {
        let graph = ring(257);
        let params = PowerParams::default();
        let (seq, it_seq) = stationary_scores_seq(&graph, &params);
        let (par, it_par) = stationary_scores_par(&graph, &params);
        assert_eq!(it_seq, it_par);
        assert_eq!(seq, par);
    }
}
