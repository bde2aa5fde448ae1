//! Cross-site directed page graph.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::Deserialize;
use thiserror::Error;

use crate::ids::PageRef;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Directed page graph with adjacency indexed both ways. Self-loops are
/// dropped on construction; parallel edges collapse to one. Nodes are
/// kept in sorted order, so the layout is independent of insertion order.
#[derive(Debug, Clone)]
pub struct LinkGraph {
    nodes: Vec<PageRef>,
    index: BTreeMap<PageRef, usize>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl LinkGraph {
    pub fn from_edges(edges: &[(PageRef, PageRef)], isolated: &[PageRef]) -> Self {
        let mut node_set: BTreeSet<PageRef> = isolated.iter().cloned().collect();
        for (from, to) in edges {
            node_set.insert(from.clone());
            node_set.insert(to.clone());
        }
        let nodes: Vec<PageRef> = node_set.into_iter().collect();
        let index: BTreeMap<PageRef, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();

        let mut out_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nodes.len()];
        for (from, to) in edges {
            if from == to {
                continue;
            }
            out_sets[index[from]].insert(index[to]);
        }
        let mut in_adj: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        let out_adj: Vec<Vec<usize>> = out_sets
            .into_iter()
            .enumerate()
            .map(|(from, tos)| {
                let tos: Vec<usize> = tos.into_iter().collect();
                for &to in &tos {
                    in_adj[to].push(from);
                }
                tos
            })
            .collect();

        LinkGraph {
            nodes,
            index,
            out_adj,
            in_adj,
        }
    }

    /// Reads the JSONL edge list: one `{"from": .., "to": ..}` edge or one
    /// `{"node": ..}` isolated-node declaration per line. Fails on the
    /// first malformed line, reporting its number.
    pub fn load_jsonl(reader: impl BufRead) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        let mut isolated = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: GraphLine =
                serde_json::from_str(&line).map_err(|err| GraphError::Parse {
                    line: idx + 1,
                    message: err.to_string(),
                })?;
            match (parsed.from, parsed.to, parsed.node) {
                (Some(from), Some(to), None) => edges.push((from, to)),
                (None, None, Some(node)) => isolated.push(node),
                _ => {
                    return Err(GraphError::Parse {
                        line: idx + 1,
                        message: "expected either from+to or node".to_string(),
                    })
                }
            }
        }
        Ok(LinkGraph::from_edges(&edges, &isolated))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[PageRef] {
        &self.nodes
    }

    pub fn index_of(&self, page: &PageRef) -> Option<usize> {
        self.index.get(page).copied()
    }

    pub fn out_neighbors(&self, node: usize) -> &[usize] {
        &self.out_adj[node]
    }

    pub fn in_neighbors(&self, node: usize) -> &[usize] {
        &self.in_adj[node]
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out_adj[node].len()
    }
}

#[derive(Deserialize)]
struct GraphLine {
    from: Option<PageRef>,
    to: Option<PageRef>,
    node: Option<PageRef>,
}
