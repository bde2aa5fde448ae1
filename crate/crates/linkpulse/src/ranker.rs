//! Cross-site page ranking: a damped link-graph baseline blended with
//! each page's popularity inside its own site.
//!
//! The blend is multiplicative: `base * (1 + lambda * local)` with an
//! extra `(1 + beta)` for pages currently occupying their site's top-left
//! slot block. A page with no local signal keeps its baseline score
//! exactly, so the blend never reorders pages the local data cannot
//! distinguish.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counters::CounterSnapshot;
use crate::graph::LinkGraph;
use crate::ids::{LinkId, PageRef, SiteId};
use crate::popularity::{site_scores, top_k_links};
use crate::power::{stationary_scores, PowerParams, TransitionGraph};

#[derive(Debug, Error)]
pub enum RankError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("damping must lie in (0, 1), got {0}")]
    InvalidDamping(f64),
    #[error("candidate {0} is not a graph node")]
    UnknownCandidate(PageRef),
    #[error("unknown link {site}{link} in snapshot")]
    UnknownLink { site: SiteId, link: LinkId },
}

/// Baseline link-graph scores, aligned with the graph's node order.
#[derive(Debug, Clone)]
pub struct GlobalRank {
    scores: Vec<f64>,
    pub damping: f64,
    pub iterations_used: usize,
}

impl GlobalRank {
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn get(&self, graph: &LinkGraph, page: &PageRef) -> Option<f64> {
        graph.index_of(page).map(|i| self.scores[i])
    }
}

/// Damped power iteration with uniform teleport; dangling nodes spread
/// their mass uniformly. Stops when the L1 delta drops below `epsilon`
/// or after `max_iter` rounds.
pub fn pagerank(
    graph: &LinkGraph,
    damping: f64,
    epsilon: f64,
    max_iter: usize,
) -> Result<GlobalRank, RankError> {
    if graph.is_empty() {
        return Err(RankError::EmptyGraph);
    }
    if !(damping > 0.0 && damping < 1.0) {
        return Err(RankError::InvalidDamping(damping));
    }
    let edges: Vec<(u32, u32, f64)> = (0..graph.node_count())
        .flat_map(|from| {
            graph
                .out_neighbors(from)
                .iter()
                .map(move |&to| (from as u32, to as u32, 1.0))
        })
        .collect();
    let transition = TransitionGraph::from_weighted_edges(graph.node_count(), &edges);
    let (scores, iterations_used) = stationary_scores(
        &transition,
        &PowerParams {
            damping,
            epsilon,
            max_iter,
        },
    );
    Ok(GlobalRank {
        scores,
        damping,
        iterations_used,
    })
}

/// Per-site local factors in [0, 1].
///
/// The raw signal for a link is hi * ci. Links where either side is
/// degenerate take the median of the site's defined raws (zero when none
/// are defined), and everything is normalized by the site maximum.
pub fn local_factors(
    snapshot: &CounterSnapshot,
    site: &SiteId,
) -> BTreeMap<LinkId, f64> {
    let scored = match site_scores(snapshot, site) {
        Ok(scored) => scored,
        Err(_) => return BTreeMap::new(),
    };
    normalize_factors(
        scored
            .into_iter()
            .map(|(link, s)| {
                let raw = match (s.hi, s.ci) {
                    (Some(hi), Some(ci)) => Some(hi * ci),
                    _ => None,
                };
                (link, raw)
            })
            .collect(),
    )
}

/// Median fallback for degenerate raws, then division by the site max.
/// An even number of defined raws takes the mean of the two middles.
fn normalize_factors(raws: Vec<(LinkId, Option<f64>)>) -> BTreeMap<LinkId, f64> {
    let mut defined: Vec<f64> = raws.iter().filter_map(|(_, r)| *r).collect();
    defined.sort_by(|a, b| a.total_cmp(b));
    let fallback = median_of_sorted(&defined);
    let filled: Vec<(LinkId, f64)> = raws
        .into_iter()
        .map(|(link, raw)| (link, raw.unwrap_or(fallback)))
        .collect();
    let max = filled.iter().map(|(_, r)| *r).fold(0.0f64, f64::max);
    filled
        .into_iter()
        .map(|(link, raw)| (link, if max > 0.0 { raw / max } else { 0.0 }))
        .collect()
}

/// Local factor for a single link of a known site.
pub fn local_factor(
    snapshot: &CounterSnapshot,
    site: &SiteId,
    link: &LinkId,
) -> Result<f64, RankError> {
    local_factors(snapshot, site)
        .remove(link)
        .ok_or_else(|| RankError::UnknownLink {
            site: site.clone(),
            link: link.clone(),
        })
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

/// `base * (1 + lambda*local)`, times `(1 + beta)` for top-left pages.
pub fn combined_score(base: f64, local: f64, topleft: bool, lambda: f64, beta: f64) -> f64 {
    let boost = if topleft { 1.0 + beta } else { 1.0 };
    base * (1.0 + lambda * local) * boost
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedScore {
    pub base: f64,
    pub local: f64,
    pub topleft: bool,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPage {
    #[serde(flatten)]
    pub page: PageRef,
    #[serde(flatten)]
    pub score: CombinedScore,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RankParams {
    pub damping: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub lambda: f64,
    pub beta: f64,
    pub k_topleft: usize,
}

impl Default for RankParams {
    fn default() -> Self {
        RankParams {
            damping: 0.85,
            epsilon: 1e-10,
            max_iter: 200,
            lambda: 1.0,
            beta: 0.25,
            k_topleft: 5,
        }
    }
}

/// Ranks `candidates` by the blended score, descending. Ties fall back to
/// the baseline score, then to the page reference. Candidates whose site
/// has no counter data rank with a neutral local factor of zero.
pub fn rank_results(
    graph: &LinkGraph,
    snapshot: &CounterSnapshot,
    candidates: &[PageRef],
    params: &RankParams,
) -> Result<Vec<RankedPage>, RankError> {
    for candidate in candidates {
        if graph.index_of(candidate).is_none() {
            return Err(RankError::UnknownCandidate(candidate.clone()));
        }
    }
    let global = pagerank(graph, params.damping, params.epsilon, params.max_iter)?;

    // One pass of factors and slot assignments per site touched.
    let mut factors: BTreeMap<SiteId, BTreeMap<LinkId, f64>> = BTreeMap::new();
    let mut topleft: BTreeMap<SiteId, Vec<LinkId>> = BTreeMap::new();
    for candidate in candidates {
        if factors.contains_key(&candidate.site) {
            continue;
        }
        factors.insert(candidate.site.clone(), local_factors(snapshot, &candidate.site));
        let slots = top_k_links(snapshot, &candidate.site, params.k_topleft)
            .map(|slots| slots.into_iter().map(|(link, _)| link).collect())
            .unwrap_or_default();
        topleft.insert(candidate.site.clone(), slots);
    }

    let mut ranked: Vec<RankedPage> = candidates
        .iter()
        .map(|page| {
            let base = global.get(graph, page).expect("candidate checked above");
            let local = factors[&page.site].get(&page.link).copied().unwrap_or(0.0);
            let is_topleft = topleft[&page.site].contains(&page.link);
            RankedPage {
                page: page.clone(),
                score: CombinedScore {
                    base,
                    local,
                    topleft: is_topleft,
                    combined: combined_score(base, local, is_topleft, params.lambda, params.beta),
                },
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .combined
            .total_cmp(&a.score.combined)
            .then(b.score.base.total_cmp(&a.score.base))
            .then(a.page.cmp(&b.page))
    });
    Ok(ranked)
}
