//! Popularity-pruned extractive summarization.
//!
//! The input corpus is first narrowed to the pages occupying each site's
//! top-left slot block (and, in query mode, to pages containing a query
//! token). Sentences are then scored on a similarity graph: nodes are
//! sentences, edge weights are cosine similarities of term-frequency
//! vectors above a threshold, and scores come from the same stationary
//! iteration the page ranker uses. Selection is greedy by score with a
//! redundancy cap, and the summary is emitted in document order.
//!
//! Sentence splitting is deliberately plain: a sentence ends at `.`, `!`
//! or `?` followed by whitespace or end of text. Abbreviations are not
//! special-cased.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counters::CounterSnapshot;
use crate::ids::{LinkId, SiteId};
use crate::popularity::{top_k_links, PopularityError};
use crate::power::{stationary_scores, PowerParams, TransitionGraph};

#[derive(Debug, Error)]
pub enum SummarizeError {
    #[error("query mode requires a non-empty query")]
    EmptyQuery,
    #[error("no content left after pruning and filtering")]
    NoContent,
    #[error("page text is empty for {site}{link}")]
    EmptyDoc { site: SiteId, link: LinkId },
    #[error(transparent)]
    Popularity(#[from] PopularityError),
    #[error("corpus manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The text behind one link.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageDoc {
    pub site: SiteId,
    pub link: LinkId,
    pub text: String,
}

impl PageDoc {
    pub fn new(site: SiteId, link: LinkId, text: String) -> Result<Self, SummarizeError> {
        if text.split_whitespace().next().is_none() {
            return Err(SummarizeError::EmptyDoc { site, link });
        }
        Ok(PageDoc { site, link, text })
    }
}

/// One extractive unit, with its normalized tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub site: SiteId,
    pub link: LinkId,
    pub index: usize,
    pub text: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SummaryMode {
    #[serde(rename = "generic")]
    Generic,
    #[serde(rename = "query-specific")]
    QuerySpecific,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SummaryScope {
    #[serde(rename = "single-site")]
    SingleSite,
    #[serde(rename = "multi-site")]
    MultiSite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarySentence {
    pub site: SiteId,
    pub link: LinkId,
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: SummaryMode,
    pub scope: SummaryScope,
    pub budget: usize,
    pub sentences: Vec<SummarySentence>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummarizeParams {
    pub budget: usize,
    pub mode: SummaryMode,
    pub query: Option<String>,
    pub similarity_threshold: f64,
    pub redundancy_cap: f64,
    pub damping: f64,
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for SummarizeParams {
    fn default() -> Self {
        SummarizeParams {
            budget: 3,
            mode: SummaryMode::Generic,
            query: None,
            similarity_threshold: 0.1,
            redundancy_cap: 0.7,
            damping: 0.85,
            epsilon: 1e-10,
            max_iter: 200,
        }
    }
}

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Splits `text` into sentences on `.`/`!`/`?` followed by whitespace or
/// end of text. Fragments without a terminator are kept as sentences.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '!' | '?') {
            let boundary = chars.peek().is_none_or(|next| next.is_whitespace());
            if boundary {
                push_sentence(&mut sentences, &mut current);
            }
        }
    }
    push_sentence(&mut sentences, &mut current);
    sentences
}

fn push_sentence(sentences: &mut Vec<String>, current: &mut String) {
    let trimmed = current.trim();
    if !trimmed.is_empty() {
        sentences.push(trimmed.to_string());
    }
    current.clear();
}

/// Keeps only docs whose (site, link) sits in its site's top-k slots.
/// Returns the surviving docs (input order preserved) plus the popular
/// links that had no doc in the corpus.
pub fn prune_popular(
    snapshot: &CounterSnapshot,
    sites: &[SiteId],
    docs: &[PageDoc],
    k: usize,
) -> (Vec<PageDoc>, Vec<(SiteId, LinkId)>) {
    let mut popular: Vec<(SiteId, LinkId)> = Vec::new();
    for site in sites {
        if let Ok(top) = top_k_links(snapshot, site, k) {
            popular.extend(top.into_iter().map(|(link, _)| (site.clone(), link)));
        }
    }
    let kept: Vec<PageDoc> = docs
        .iter()
        .filter(|d| popular.iter().any(|(s, l)| s == &d.site && l == &d.link))
        .cloned()
        .collect();
    let missing: Vec<(SiteId, LinkId)> = popular
        .into_iter()
        .filter(|(s, l)| !docs.iter().any(|d| &d.site == s && &d.link == l))
        .collect();
    (kept, missing)
}

/// Keeps docs containing at least one query token (whole-token,
/// case-insensitive).
pub fn filter_by_query(
    docs: &[PageDoc],
    query_tokens: &[String],
) -> Result<Vec<PageDoc>, SummarizeError> {
    let normalized: Vec<String> = query_tokens
        .iter()
        .flat_map(|t| tokenize(t))
        .collect();
    if normalized.is_empty() {
        return Err(SummarizeError::EmptyQuery);
    }
    Ok(docs
        .iter()
        .filter(|d| {
            let tokens = tokenize(&d.text);
            normalized.iter().any(|q| tokens.contains(q))
        })
        .cloned()
        .collect())
}

/// Builds the budgeted summary. In query mode the docs are filtered by
/// the query first; popularity pruning is the caller's responsibility
/// (see [`prune_popular`]).
pub fn summarize(docs: &[PageDoc], params: &SummarizeParams) -> Result<Summary, SummarizeError> {
    let docs: Vec<PageDoc> = match params.mode {
        SummaryMode::Generic => docs.to_vec(),
        SummaryMode::QuerySpecific => {
            let query = params.query.clone().ok_or(SummarizeError::EmptyQuery)?;
            filter_by_query(docs, &[query])?
        }
    };
    if docs.is_empty() {
        return Err(SummarizeError::NoContent);
    }
    let scope = if docs
        .iter()
        .all(|d| d.site == docs[0].site)
    {
        SummaryScope::SingleSite
    } else {
        SummaryScope::MultiSite
    };

    let sentences = collect_sentences(&docs);
    if sentences.is_empty() {
        return Err(SummarizeError::NoContent);
    }
    let sim = similarity_matrix(&sentences);
    let scores = sentence_scores(&sentences, &sim, params);
    let picked = select_greedy(&sentences, &sim, &scores, params);

    // Emit in document order: docs as given, sentences by index.
    let doc_pos: BTreeMap<(SiteId, LinkId), usize> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| ((d.site.clone(), d.link.clone()), i))
        .collect();
    let mut chosen: Vec<&Sentence> = picked.iter().map(|&i| &sentences[i]).collect();
    chosen.sort_by_key(|s| (doc_pos[&(s.site.clone(), s.link.clone())], s.index));

    Ok(Summary {
        mode: params.mode,
        scope,
        budget: params.budget,
        sentences: chosen
            .into_iter()
            .map(|s| SummarySentence {
                site: s.site.clone(),
                link: s.link.clone(),
                index: s.index,
                text: s.text.clone(),
            })
            .collect(),
    })
}

/// Top-k links of a site paired with their docs where available; the
/// caller classifies from these.
pub fn representative_pages(
    snapshot: &CounterSnapshot,
    site: &SiteId,
    k: usize,
    docs: &[PageDoc],
) -> Result<Vec<(LinkId, Option<PageDoc>)>, SummarizeError> {
    Ok(top_k_links(snapshot, site, k)?
        .into_iter()
        .map(|(link, _)| {
            let doc = docs
                .iter()
                .find(|d| &d.site == site && d.link == link)
                .cloned();
            (link, doc)
        })
        .collect())
}

pub fn collect_sentences(docs: &[PageDoc]) -> Vec<Sentence> {
    let mut sentences = Vec::new();
    for doc in docs {
        for (index, text) in split_sentences(&doc.text).into_iter().enumerate() {
            let tokens = tokenize(&text);
            if tokens.is_empty() {
                continue;
            }
            sentences.push(Sentence {
                site: doc.site.clone(),
                link: doc.link.clone(),
                index,
                text,
                tokens,
            });
        }
    }
    sentences
}

/// Dense pairwise cosine similarity over term-frequency vectors.
/// Dispatches to the rayon path under the `parallel` feature.
pub fn similarity_matrix(sentences: &[Sentence]) -> Vec<Vec<f64>> {
    #[cfg(feature = "parallel")]
    {
        similarity_matrix_par(sentences)
    }
    #[cfg(not(feature = "parallel"))]
    {
        similarity_matrix_seq(sentences)
    }
}

pub fn similarity_matrix_seq(sentences: &[Sentence]) -> Vec<Vec<f64>> {
    let (tf, norms) = frequency_vectors(sentences);
    (0..sentences.len())
        .map(|i| similarity_row(sentences.len(), &tf, &norms, i))
        .collect()
}

/// Row-parallel build; rows are independent, so the matrix is identical
/// to the sequential one.
#[cfg(feature = "parallel")]
pub fn similarity_matrix_par(sentences: &[Sentence]) -> Vec<Vec<f64>> {
    use rayon::prelude::*;
    let (tf, norms) = frequency_vectors(sentences);
    (0..sentences.len())
        .into_par_iter()
        .map(|i| similarity_row(sentences.len(), &tf, &norms, i))
        .collect()
}

type TermFrequencies<'a> = Vec<BTreeMap<&'a str, f64>>;

fn frequency_vectors(sentences: &[Sentence]) -> (TermFrequencies<'_>, Vec<f64>) {
    let tf: TermFrequencies = sentences
        .iter()
        .map(|s| {
            let mut counts: BTreeMap<&str, f64> = BTreeMap::new();
            for token in &s.tokens {
                *counts.entry(token.as_str()).or_default() += 1.0;
            }
            counts
        })
        .collect();
    let norms: Vec<f64> = tf
        .iter()
        .map(|v| v.values().map(|c| c * c).sum::<f64>().sqrt())
        .collect();
    (tf, norms)
}

fn similarity_row(n: usize, tf: &TermFrequencies<'_>, norms: &[f64], i: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            if i == j {
                1.0
            } else {
                cosine(&tf[i], &tf[j], norms[i], norms[j])
            }
        })
        .collect()
}

fn cosine(a: &BTreeMap<&str, f64>, b: &BTreeMap<&str, f64>, na: f64, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .iter()
        .filter_map(|(t, c)| large.get(t).map(|d| c * d))
        .sum();
    dot / (na * nb)
}

/// Stationary scores over the thresholded similarity graph; they sum to
/// one whenever at least one sentence exists.
pub fn sentence_scores(
    sentences: &[Sentence],
    sim: &[Vec<f64>],
    params: &SummarizeParams,
) -> Vec<f64> {
    let mut edges = Vec::new();
    for (i, row) in sim.iter().enumerate().take(sentences.len()) {
        for (j, &weight) in row.iter().enumerate() {
            if i != j && weight >= params.similarity_threshold {
                edges.push((i as u32, j as u32, weight));
            }
        }
    }
    let graph = TransitionGraph::from_weighted_edges(sentences.len(), &edges);
    let (scores, _) = stationary_scores(
        &graph,
        &PowerParams {
            damping: params.damping,
            epsilon: params.epsilon,
            max_iter: params.max_iter,
        },
    );
    scores
}

fn select_greedy(
    sentences: &[Sentence],
    sim: &[Vec<f64>],
    scores: &[f64],
    params: &SummarizeParams,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| sentences[a].site.cmp(&sentences[b].site))
            .then_with(|| sentences[a].link.cmp(&sentences[b].link))
            .then(sentences[a].index.cmp(&sentences[b].index))
    });
    let mut picked: Vec<usize> = Vec::new();
    for i in order {
        if picked.len() >= params.budget {
            break;
        }
        if picked.iter().any(|&p| sim[i][p] > params.redundancy_cap) {
            continue;
        }
        picked.push(i);
    }
    picked
}

/// Manifest schema for a corpus directory: a list of file -> page
/// mappings, one text file per page.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub docs: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub site: SiteId,
    pub link: LinkId,
}

/// Loads the docs named by `manifest_path` from `dir`.
pub fn load_corpus(dir: &Path, manifest_path: &Path) -> Result<Vec<PageDoc>, SummarizeError> {
    let raw = fs::read_to_string(manifest_path)?;
    let manifest: CorpusManifest =
        serde_json::from_str(&raw).map_err(|e| SummarizeError::Manifest(e.to_string()))?;
    manifest
        .docs
        .into_iter()
        .map(|entry| {
            let text = fs::read_to_string(dir.join(&entry.file))?;
            PageDoc::new(entry.site, entry.link, text)
        })
        .collect()
}

/// Filename for a page's text: `{site}__{sanitized link}.txt`, with
/// non-alphanumeric link characters mapped to `-`.
pub fn corpus_filename(site: &SiteId, link: &LinkId) -> String {
    let sanitized: String = link
        .as_str()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '-' })
        .collect();
    format!("{}__{}.txt", site, sanitized)
}
