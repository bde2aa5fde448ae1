//! Deterministic synthetic click traffic and scenario harnesses.
//!
//! Traffic is a single-step user model: each click picks a site in
//! proportion to its weight, then a link within the site in proportion to
//! its attractiveness, at uniformly spaced timestamps. The same config
//! and seed always produce a byte-identical log.
//!
//! [`expected_position`] is the scan-cost proxy used to measure layouts:
//! the expected display index of the clicked link. With a slot block, a
//! hoisted link is found at the earlier of its slot index and its
//! original index, so hoisting the most attractive links can only shorten
//! the expected scan.

use std::collections::BTreeMap;
use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counters::{ClickEvent, CounterStore};
use crate::graph::LinkGraph;
use crate::ids::{LinkId, PageRef, SiteId};
use crate::popularity::PageLayout;
use crate::ranker::{rank_results, RankParams, RankedPage};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Counter(#[from] crate::counters::CounterError),
    #[error(transparent)]
    Rank(#[from] crate::ranker::RankError),
}

/// Per-link attractiveness: explicit positive weights, or synthesized
/// from a Zipf law over the native link order (`weight(rank r) = r^-s`).
#[derive(Debug, Clone, PartialEq)]
pub enum Attractiveness {
    Explicit(Vec<f64>),
    Zipf { s: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteSpec {
    pub site: SiteId,
    pub weight: f64,
    pub links: Vec<LinkId>,
    pub attractiveness: Attractiveness,
    /// Reserved per-link satisfaction probabilities; parsed and echoed
    /// but not used by the single-step click model.
    pub satisfaction: Option<Vec<f64>>,
}

impl SiteSpec {
    /// Resolved, unnormalized per-link weights in native link order.
    pub fn link_weights(&self) -> Vec<f64> {
        match &self.attractiveness {
            Attractiveness::Explicit(w) => w.clone(),
            Attractiveness::Zipf { s } => (1..=self.links.len())
                .map(|r| (r as f64).powf(-s))
                .collect(),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.links.is_empty() {
            return Err(SimError::InvalidConfig(format!(
                "site {} has no links",
                self.site
            )));
        }
        let weight_ok = self.weight.is_finite() && self.weight > 0.0;
        if !weight_ok {
            return Err(SimError::InvalidConfig(format!(
                "site {} weight must be positive",
                self.site
            )));
        }
        match &self.attractiveness {
            Attractiveness::Explicit(w) => {
                if w.len() != self.links.len() {
                    return Err(SimError::InvalidConfig(format!(
                        "site {}: {} attractiveness values for {} links",
                        self.site,
                        w.len(),
                        self.links.len()
                    )));
                }
                if !w.iter().all(|&x| x > 0.0 && x.is_finite()) {
                    return Err(SimError::InvalidConfig(format!(
                        "site {}: attractiveness values must be positive",
                        self.site
                    )));
                }
            }
            Attractiveness::Zipf { s } => {
                if !(s.is_finite() && *s > 0.0) {
                    return Err(SimError::InvalidConfig(format!(
                        "site {}: zipf exponent must be positive",
                        self.site
                    )));
                }
            }
        }
        if let Some(sat) = &self.satisfaction {
            if sat.len() != self.links.len() || !sat.iter().all(|&x| (0.0..=1.0).contains(&x)) {
                return Err(SimError::InvalidConfig(format!(
                    "site {}: satisfaction must give one value in [0,1] per link",
                    self.site
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub sites: Vec<SiteSpec>,
    pub total_clicks: u64,
    pub now_start: u64,
    pub inter_event_gap: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.total_clicks == 0 {
            return Err(SimError::InvalidConfig(
                "total_clicks must be at least 1".to_string(),
            ));
        }
        if self.sites.is_empty() {
            return Err(SimError::InvalidConfig("no sites configured".to_string()));
        }
        for site in &self.sites {
            site.validate()?;
        }
        Ok(())
    }
}

// JSON shape for SiteSpec: exactly one of `attractiveness` / `zipf_s`.
#[derive(Serialize, Deserialize)]
struct SiteSpecRepr {
    site: SiteId,
    weight: f64,
    links: Vec<LinkId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    attractiveness: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zipf_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    satisfaction: Option<Vec<f64>>,
}

impl Serialize for SiteSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let (attractiveness, zipf_s) = match &self.attractiveness {
            Attractiveness::Explicit(w) => (Some(w.clone()), None),
            Attractiveness::Zipf { s } => (None, Some(*s)),
        };
        SiteSpecRepr {
            site: self.site.clone(),
            weight: self.weight,
            links: self.links.clone(),
            attractiveness,
            zipf_s,
            satisfaction: self.satisfaction.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SiteSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = SiteSpecRepr::deserialize(deserializer)?;
        let attractiveness = match (repr.attractiveness, repr.zipf_s) {
            (Some(w), None) => Attractiveness::Explicit(w),
            (None, Some(s)) => Attractiveness::Zipf { s },
            _ => {
                return Err(serde::de::Error::custom(
                    "exactly one of `attractiveness` or `zipf_s` is required",
                ))
            }
        };
        Ok(SiteSpec {
            site: repr.site,
            weight: repr.weight,
            links: repr.links,
            attractiveness,
            satisfaction: repr.satisfaction,
        })
    }
}

impl Serialize for SimConfig {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            seed: u64,
            total_clicks: u64,
            now_start: u64,
            inter_event_gap: u64,
            sites: &'a [SiteSpec],
        }
        Repr {
            seed: self.seed,
            total_clicks: self.total_clicks,
            now_start: self.now_start,
            inter_event_gap: self.inter_event_gap,
            sites: &self.sites,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SimConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            seed: u64,
            total_clicks: u64,
            now_start: u64,
            #[serde(default = "default_gap")]
            inter_event_gap: u64,
            sites: Vec<SiteSpec>,
        }
        fn default_gap() -> u64 {
            1
        }
        let repr = Repr::deserialize(deserializer)?;
        Ok(SimConfig {
            seed: repr.seed,
            sites: repr.sites,
            total_clicks: repr.total_clicks,
            now_start: repr.now_start,
            inter_event_gap: repr.inter_event_gap,
        })
    }
}

/// Totals emitted alongside a simulated log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSummary {
    pub total: u64,
    pub per_site: BTreeMap<SiteId, u64>,
    pub per_link: BTreeMap<SiteId, BTreeMap<LinkId, u64>>,
}

/// Generates the full event stream for `config`. Timestamps are
/// `now_start + n * inter_event_gap`, so the log is non-decreasing.
pub fn run_simulation(config: &SimConfig) -> Result<(Vec<ClickEvent>, SimSummary), SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let site_dist = WeightedIndex::new(config.sites.iter().map(|s| s.weight))
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let link_dists: Vec<WeightedIndex<f64>> = config
        .sites
        .iter()
        .map(|s| {
            WeightedIndex::new(s.link_weights())
                .map_err(|e| SimError::InvalidConfig(e.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let mut events = Vec::with_capacity(config.total_clicks as usize);
    let mut per_site: BTreeMap<SiteId, u64> = BTreeMap::new();
    let mut per_link: BTreeMap<SiteId, BTreeMap<LinkId, u64>> = BTreeMap::new();
    for n in 0..config.total_clicks {
        let si = site_dist.sample(&mut rng);
        let li = link_dists[si].sample(&mut rng);
        let spec = &config.sites[si];
        let event = ClickEvent::new(
            config.now_start + n * config.inter_event_gap,
            spec.site.clone(),
            spec.links[li].clone(),
        );
        *per_site.entry(spec.site.clone()).or_default() += 1;
        *per_link
            .entry(spec.site.clone())
            .or_default()
            .entry(spec.links[li].clone())
            .or_default() += 1;
        events.push(event);
    }
    Ok((
        events,
        SimSummary {
            total: config.total_clicks,
            per_site,
            per_link,
        },
    ))
}

/// Runs the simulation and writes the canonical JSONL log.
pub fn write_log(config: &SimConfig, mut out: impl Write) -> Result<SimSummary, SimError> {
    let (events, summary) = run_simulation(config)?;
    for event in &events {
        serde_json::to_writer(&mut out, event).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(summary)
}

/// Expected display index of the clicked link.
///
/// Without a layout, link `i` sits at its native index `i`. With a
/// layout, a hoisted link is also present in the slot block and is found
/// at `min(slot, i)`; everything else stays at its native index.
pub fn expected_position(spec: &SiteSpec, layout: Option<&PageLayout>) -> f64 {
    let weights = spec.link_weights();
    let total: f64 = weights.iter().sum();
    let slot_of = slot_index(spec, layout);
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| w / total * effective_position(i, slot_of[i]) as f64)
        .sum()
}

/// Monte-Carlo estimate of [`expected_position`]. Dispatches to the
/// rayon path under the `parallel` feature.
///
/// Draws are split into fixed-size chunks, each drawn from its own RNG
/// stream, and the integer position totals are folded in chunk order, so
/// the estimate is identical with or without a thread pool.
pub fn expected_position_monte_carlo(
    spec: &SiteSpec,
    layout: Option<&PageLayout>,
    draws: u64,
    seed: u64,
) -> f64 {
    #[cfg(feature = "parallel")]
    {
        expected_position_monte_carlo_par(spec, layout, draws, seed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        expected_position_monte_carlo_seq(spec, layout, draws, seed)
    }
}

pub fn expected_position_monte_carlo_seq(
    spec: &SiteSpec,
    layout: Option<&PageLayout>,
    draws: u64,
    seed: u64,
) -> f64 {
    let (chunks, chunk_total) = monte_carlo_chunks(spec, layout, draws, seed);
    let total: u64 = chunks.iter().map(chunk_total).sum();
    total as f64 / draws as f64
}

#[cfg(feature = "parallel")]
pub fn expected_position_monte_carlo_par(
    spec: &SiteSpec,
    layout: Option<&PageLayout>,
    draws: u64,
    seed: u64,
) -> f64 {
    use rayon::prelude::*;
    let (chunks, chunk_total) = monte_carlo_chunks(spec, layout, draws, seed);
    let totals: Vec<u64> = chunks.par_iter().map(&chunk_total).collect();
    totals.iter().sum::<u64>() as f64 / draws as f64
}

const MC_CHUNK: u64 = 8_192;

/// (chunk index, draws in chunk) work items.
type McChunk = (u64, u64);

// Per-chunk position totals are exact integers, so the grand total does
// not depend on summation order.
fn monte_carlo_chunks<'a>(
    spec: &'a SiteSpec,
    layout: Option<&PageLayout>,
    draws: u64,
    seed: u64,
) -> (Vec<McChunk>, impl Fn(&McChunk) -> u64 + Sync + 'a) {
    let weights = spec.link_weights();
    let dist = WeightedIndex::new(weights).expect("validated weights");
    let slot_of = slot_index(spec, layout);
    let chunks: Vec<McChunk> = (0..draws.div_ceil(MC_CHUNK))
        .map(|c| (c, MC_CHUNK.min(draws - c * MC_CHUNK)))
        .collect();
    let chunk_total = move |&(chunk, len): &McChunk| -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        let mut total = 0u64;
        for _ in 0..len {
            let i = dist.sample(&mut rng);
            total += effective_position(i, slot_of[i]) as u64;
        }
        total
    };
    (chunks, chunk_total)
}

fn slot_index(spec: &SiteSpec, layout: Option<&PageLayout>) -> Vec<Option<usize>> {
    let mut slot_of = vec![None; spec.links.len()];
    if let Some(layout) = layout {
        for (slot, entry) in layout.slots.iter().enumerate() {
            if let Some(i) = spec.links.iter().position(|l| l == &entry.link) {
                slot_of[i] = Some(slot);
            }
        }
    }
    slot_of
}

fn effective_position(native: usize, slot: Option<usize>) -> usize {
    match slot {
        Some(s) => s.min(native),
        None => native,
    }
}

/// Parameters of the two-site ranking scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub seed: u64,
    pub total_clicks: u64,
    /// Share of site A's in-site traffic going to page a.
    pub a_local_share: f64,
    /// Share of site B's in-site traffic going to page b.
    pub b_local_share: f64,
    pub lambda: f64,
    pub beta: f64,
    pub k_topleft: usize,
    pub damping: f64,
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            seed: 17,
            total_clicks: 10_000,
            a_local_share: 0.05,
            b_local_share: 0.60,
            lambda: 1.0,
            beta: 0.25,
            k_topleft: 5,
            damping: 0.85,
            epsilon: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioCounts {
    pub site_a_clicks: u64,
    pub site_b_clicks: u64,
    pub page_a_clicks: u64,
    pub page_b_clicks: u64,
}

/// Outcome of the two-site scenario: the well-linked site's weak page
/// against the obscure site's strong page, ranked with and without the
/// local blend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub parameters: ScenarioParams,
    pub counts: ScenarioCounts,
    pub page_a: PageRef,
    pub page_b: PageRef,
    /// Ranking with the local blend disabled (lambda = 0, beta = 0).
    pub baseline: Vec<RankedPage>,
    /// Ranking with the configured lambda and beta.
    pub combined: Vec<RankedPage>,
    /// True when the combined ranking inverts the baseline order of a and b.
    pub flipped: bool,
}

/// Two sites, twelve graph nodes: page a collects eight inbound edges,
/// page b two, but two of a's backers also endorse the pages that link to
/// b. Site A spreads its traffic thin over six links while site B
/// concentrates on b, so b dominates its site locally while a does not.
pub fn scenario_ab(params: &ScenarioParams) -> Result<ScenarioReport, SimError> {
    if !(params.a_local_share > 0.0 && params.a_local_share < 1.0)
        || !(params.b_local_share > 0.0 && params.b_local_share < 1.0)
    {
        return Err(SimError::InvalidConfig(
            "local shares must lie strictly between 0 and 1".to_string(),
        ));
    }

    let site_a = SiteId::new("site-a.example").expect("static id");
    let site_b = SiteId::new("site-b.example").expect("static id");
    let page_a = PageRef::new(site_a.clone(), LinkId::new("/a").expect("static id"));
    let page_b = PageRef::new(site_b.clone(), LinkId::new("/b").expect("static id"));

    // Site A: page a plus five ballast links sharing the rest evenly.
    let a_links: Vec<LinkId> = std::iter::once("/a".to_string())
        .chain((2..=6).map(|i| format!("/a{i}")))
        .map(|l| LinkId::new(l).expect("static id"))
        .collect();
    let mut a_weights = vec![(1.0 - params.a_local_share) / 5.0; 6];
    a_weights[0] = params.a_local_share;

    // Site B: page b plus four ballast links.
    let b_links: Vec<LinkId> = std::iter::once("/b".to_string())
        .chain((2..=5).map(|i| format!("/b{i}")))
        .map(|l| LinkId::new(l).expect("static id"))
        .collect();
    let mut b_weights = vec![(1.0 - params.b_local_share) / 4.0; 5];
    b_weights[0] = params.b_local_share;

    let config = SimConfig {
        seed: params.seed,
        total_clicks: params.total_clicks,
        now_start: 1_000_000,
        inter_event_gap: 1,
        sites: vec![
            SiteSpec {
                site: site_a.clone(),
                weight: 1.0,
                links: a_links,
                attractiveness: Attractiveness::Explicit(a_weights),
                satisfaction: None,
            },
            SiteSpec {
                site: site_b.clone(),
                weight: 1.0,
                links: b_links,
                attractiveness: Attractiveness::Explicit(b_weights),
                satisfaction: None,
            },
        ],
    };
    let (events, summary) = run_simulation(&config)?;
    let store = CounterStore::new();
    for event in &events {
        store.record_click(event)?;
    }
    let last_ts = config.now_start + (config.total_clicks - 1) * config.inter_event_gap;
    let snapshot = store.snapshot(last_ts);

    let graph = scenario_graph(&page_a, &page_b);
    let candidates = [page_a.clone(), page_b.clone()];
    let baseline_params = RankParams {
        damping: params.damping,
        epsilon: params.epsilon,
        max_iter: params.max_iter,
        lambda: 0.0,
        beta: 0.0,
        k_topleft: params.k_topleft,
    };
    let combined_params = RankParams {
        lambda: params.lambda,
        beta: params.beta,
        ..baseline_params
    };
    let baseline = rank_results(&graph, &snapshot, &candidates, &baseline_params)?;
    let combined = rank_results(&graph, &snapshot, &candidates, &combined_params)?;
    let flipped = baseline[0].page != combined[0].page;

    let counts = ScenarioCounts {
        site_a_clicks: summary.per_site.get(&site_a).copied().unwrap_or(0),
        site_b_clicks: summary.per_site.get(&site_b).copied().unwrap_or(0),
        page_a_clicks: summary
            .per_link
            .get(&site_a)
            .and_then(|m| m.get(&page_a.link))
            .copied()
            .unwrap_or(0),
        page_b_clicks: summary
            .per_link
            .get(&site_b)
            .and_then(|m| m.get(&page_b.link))
            .copied()
            .unwrap_or(0),
    };
    Ok(ScenarioReport {
        parameters: *params,
        counts,
        page_a,
        page_b,
        baseline,
        combined,
        flipped,
    })
}

fn scenario_graph(page_a: &PageRef, page_b: &PageRef) -> LinkGraph {
    let hub = |i: usize| {
        PageRef::new(
            SiteId::new(format!("hub-{i:02}.example")).expect("static id"),
            LinkId::new("/").expect("static id"),
        )
    };
    let mut edges = Vec::new();
    // Eight endorsements for page a.
    for i in 1..=8 {
        edges.push((hub(i), page_a.clone()));
    }
    // Hubs 7 and 8 also endorse the two pages that endorse b.
    edges.push((hub(7), hub(9)));
    edges.push((hub(8), hub(10)));
    edges.push((hub(9), page_b.clone()));
    edges.push((hub(10), page_b.clone()));
    LinkGraph::from_edges(&edges, &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::popularity::page_layout;

    fn spec(weights: &[f64]) -> SiteSpec {
        SiteSpec {
            site: SiteId::new("s").unwrap(),
            weight: 1.0,
            links: (0..weights.len())
                .map(|i| LinkId::new(format!("/l{i}")).unwrap())
                .collect(),
            attractiveness: Attractiveness::Explicit(weights.to_vec()),
            satisfaction: None,
        }
    }

    fn tiny_config(seed: u64) -> SimConfig {
        SimConfig {
            seed,
            sites: vec![spec(&[3.0, 1.0])],
            total_clicks: 500,
            now_start: 100,
            inter_event_gap: 2,
        }
    }

    #[test]
    fn identical_seed_gives_identical_logs() {
        let config = tiny_config(9);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_log(&config, &mut a).unwrap();
        write_log(&config, &mut b).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn different_seed_changes_the_log() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_log(&tiny_config(1), &mut a).unwrap();
        write_log(&tiny_config(2), &mut b).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn single_link_site_gets_every_event() {
        let config = SimConfig {
            seed: 4,
            sites: vec![spec(&[1.0])],
            total_clicks: 50,
            now_start: 0,
            inter_event_gap: 1,
        };
        let (events, summary) = run_simulation(&config).unwrap();
        assert_eq!(events.len(), 50);
        assert!(events.iter().all(|e| e.link.as_str() == "/l0"));
        assert_eq!(summary.total, 50);
        assert_eq!(summary.per_site.values().sum::<u64>(), 50);
    }

    #[test]
    fn timestamps_are_uniformly_spaced() {
        let (events, _) = run_simulation(&tiny_config(7)).unwrap();
        for (n, event) in events.iter().enumerate() {
            assert_eq!(event.ts, 100 + 2 * n as u64);
        }
    }

    #[test]
    fn attractiveness_ratio_is_respected() {
        let config = SimConfig {
            seed: 11,
            sites: vec![spec(&[3.0, 1.0])],
            total_clicks: 100_000,
            now_start: 0,
            inter_event_gap: 1,
        };
        let (_, summary) = run_simulation(&config).unwrap();
        let links = &summary.per_link[&SiteId::new("s").unwrap()];
        let a = links[&LinkId::new("/l0").unwrap()] as f64;
        let b = links[&LinkId::new("/l1").unwrap()] as f64;
        let ratio = a / b;
        assert!((ratio - 3.0).abs() / 3.0 < 0.03, "ratio {ratio}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = tiny_config(1);
        config.total_clicks = 0;
        assert!(matches!(
            run_simulation(&config),
            Err(SimError::InvalidConfig(_))
        ));
        let bad = SimConfig {
            seed: 0,
            sites: vec![SiteSpec {
                attractiveness: Attractiveness::Explicit(vec![1.0]),
                ..spec(&[1.0, 1.0])
            }],
            total_clicks: 1,
            now_start: 0,
            inter_event_gap: 1,
        };
        assert!(matches!(
            run_simulation(&bad),
            Err(SimError::InvalidConfig(_))
        ));
    }

    #[test]
    fn sim_config_json_roundtrip_and_zipf() {
        let json = r#"{
            "seed": 5, "total_clicks": 10, "now_start": 0,
            "sites": [{"site": "s", "weight": 1.0, "links": ["/a", "/b", "/c"], "zipf_s": 1.2}]
        }"#;
        let config: SimConfig = serde_json::from_str(json).unwrap();
        assert_eq!(config.inter_event_gap, 1);
        let weights = config.sites[0].link_weights();
        assert_eq!(weights[0], 1.0);
        assert!((weights[1] - 2f64.powf(-1.2)).abs() < 1e-12);
        let back: SimConfig =
            serde_json::from_str(&serde_json::to_string(&config).unwrap()).unwrap();
        assert_eq!(back, config);

        let both = r#"{"seed":1,"total_clicks":1,"now_start":0,
            "sites":[{"site":"s","weight":1,"links":["/a"],"zipf_s":1.0,"attractiveness":[1.0]}]}"#;
        assert!(serde_json::from_str::<SimConfig>(both).is_err());
    }

    #[test]
    fn uniform_attractiveness_expected_position() {
        for n in [1usize, 4, 9] {
            let s = spec(&vec![1.0; n]);
            let expected = (n as f64 - 1.0) / 2.0;
            assert!((expected_position(&s, None) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn hoisting_best_link_strictly_helps_unless_first() {
        // Most attractive link last: hoisting it to slot 0 must help.
        let s = spec(&[1.0, 2.0, 10.0]);
        let layout = layout_hoisting(&s, &[2]);
        let without = expected_position(&s, None);
        let with = expected_position(&s, Some(&layout));
        assert!(with < without);

        // Already first: hoisting changes nothing.
        let s = spec(&[10.0, 2.0, 1.0]);
        let layout = layout_hoisting(&s, &[0]);
        assert_eq!(expected_position(&s, Some(&layout)), expected_position(&s, None));
    }

    /// Layout whose slots are the given native indices, in order.
    fn layout_hoisting(spec: &SiteSpec, native: &[usize]) -> PageLayout {
        use crate::popularity::LayoutSlot;
        PageLayout {
            site: spec.site.clone(),
            k: native.len(),
            generated_at: 0,
            slots: native
                .iter()
                .map(|&i| LayoutSlot {
                    link: spec.links[i].clone(),
                    history: 1,
                    recent: 1,
                    product: 1,
                    hi: None,
                    ci: None,
                })
                .collect(),
        }
    }

    #[test]
    fn monte_carlo_matches_analytic() {
        let s = spec(&[5.0, 1.0, 3.0, 2.0]);
        let layout = layout_hoisting(&s, &[0, 2]);
        let analytic = expected_position(&s, Some(&layout));
        let mc = expected_position_monte_carlo(&s, Some(&layout), 200_000, 3);
        assert!((mc - analytic).abs() / analytic.max(1e-9) < 0.02, "mc={mc} analytic={analytic}");
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let s = spec(&[5.0, 1.0, 3.0]);
        let a = expected_position_monte_carlo(&s, None, 50_000, 8);
        let b = expected_position_monte_carlo(&s, None, 50_000, 8);
        assert_eq!(a, b);
    }

    #[test]
    fn layout_built_from_traffic_lowers_expected_position() {
        // Attractive links buried at the end of the native order.
        let s = spec(&[1.0, 1.0, 1.0, 6.0, 8.0]);
        let config = SimConfig {
            seed: 23,
            sites: vec![s.clone()],
            total_clicks: 20_000,
            now_start: 0,
            inter_event_gap: 1,
        };
        let (events, _) = run_simulation(&config).unwrap();
        let store = CounterStore::new();
        for e in &events {
            store.record_click(e).unwrap();
        }
        let snap = store.snapshot(20_000);
        let layout = page_layout(&snap, &s.site, 2).unwrap();
        assert!(expected_position(&s, Some(&layout)) < expected_position(&s, None));
    }

    #[test]
    fn scenario_flips_with_defaults() {
        let report = scenario_ab(&ScenarioParams::default()).unwrap();
        assert_eq!(report.baseline[0].page, report.page_a, "baseline favors a");
        assert_eq!(report.combined[0].page, report.page_b, "combined favors b");
        assert!(report.flipped);
        assert!(report.counts.page_b_clicks > report.counts.page_a_clicks);
    }

    #[test]
    fn scenario_with_lambda_zero_matches_baseline() {
        let params = ScenarioParams {
            lambda: 0.0,
            beta: 0.0,
            ..ScenarioParams::default()
        };
        let report = scenario_ab(&params).unwrap();
        assert!(!report.flipped);
        let base_order: Vec<&PageRef> = report.baseline.iter().map(|r| &r.page).collect();
        let comb_order: Vec<&PageRef> = report.combined.iter().map(|r| &r.page).collect();
        assert_eq!(base_order, comb_order);
    }

    #[test]
    fn symmetric_local_shares_do_not_flip() {
        let params = ScenarioParams {
            a_local_share: 0.3,
            b_local_share: 0.3,
            ..ScenarioParams::default()
        };
        let report = scenario_ab(&params).unwrap();
        assert!(!report.flipped);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            /// Hoisting the top-k by attractiveness never increases the
            /// expected position.
            #[test]
            fn hoisting_top_k_never_hurts(
                weights in proptest::collection::vec(0.01f64..100.0, 1..20),
                k in 1usize..6,
            ) {
                let s = spec(&weights);
                let mut by_weight: Vec<usize> = (0..weights.len()).collect();
                by_weight.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
                by_weight.truncate(k);
                let layout = layout_hoisting(&s, &by_weight);
                prop_assert!(
                    expected_position(&s, Some(&layout)) <= expected_position(&s, None) + 1e-12
                );
            }

            /// Event counts are conserved across sites.
            #[test]
            fn conservation(seed in 0u64..1_000, clicks in 1u64..2_000) {
                let config = SimConfig {
                    seed,
                    sites: vec![
                        spec(&[2.0, 1.0]),
                        SiteSpec {
                            site: SiteId::new("t").unwrap(),
                            weight: 0.5,
                            links: vec![LinkId::new("/x").unwrap()],
                            attractiveness: Attractiveness::Explicit(vec![1.0]),
                            satisfaction: None,
                        },
                    ],
                    total_clicks: clicks,
                    now_start: 0,
                    inter_event_gap: 1,
                };
                let (events, summary) = run_simulation(&config).unwrap();
                prop_assert_eq!(events.len() as u64, clicks);
                prop_assert_eq!(summary.per_site.values().sum::<u64>(), clicks);
                let link_total: u64 = summary
                    .per_link
                    .values()
                    .flat_map(|m| m.values())
                    .sum();
                prop_assert_eq!(link_total, clicks);
            }
        }
    }
}
