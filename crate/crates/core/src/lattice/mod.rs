//! Word graphs (lattices) of a single line region.
//!
//! A [`WordGraph`] is a DAG whose edges carry a word hypothesis, the frame
//! span it covers and a combined log score. Node frames increase strictly
//! along every edge and the unique source/sink sit at frames `0` and `m`, so
//! the edges of any source→sink path tile `[0, m)` exactly.
//!
//! [`WordGraph::normalize`] runs forward–backward in log space and stores the
//! edge posteriors that every downstream estimator works from.

mod parse;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logmath::log_add;

pub use parse::{parse_lattice, write_lattice};

/// Half-open frame interval `[begin, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub begin: u32,
    pub end: u32,
}

impl Span {
    pub fn new(begin: u32, end: u32) -> Self {
        Self { begin, end }
    }

    pub fn len(&self) -> u32 {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.begin
    }

    pub fn contains(&self, frame: u32) -> bool {
        self.begin <= frame && frame < self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub id: u32,
    pub frame: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: u32,
    pub from: u32,
    pub to: u32,
    pub word: String,
    /// Natural-log combined optical + language model score.
    pub log_score: f64,
    /// Posterior mass of this segmentation hypothesis; set by normalization.
    pub posterior: Option<f64>,
}

/// Posterior calibration applied when normalizing a word graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    /// Scale on log scores before forward–backward. Equivalent to changing
    /// the logarithm base of the scores.
    pub gamma: f64,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self { gamma: 1.0 }
    }
}

impl NormalizationConfig {
    pub fn new(gamma: f64) -> Result<Self> {
        let cfg = Self { gamma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be finite and positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Normalization {
    gamma: f64,
    log_total: f64,
}

/// One source→sink path with its normalized probability.
#[derive(Clone, Debug, PartialEq)]
pub struct PathHypothesis {
    pub edge_ids: Vec<u32>,
    pub words: Vec<String>,
    pub probability: f64,
}

impl PathHypothesis {
    pub fn transcript(&self) -> String {
        self.words.join(" ")
    }
}

#[derive(Clone, Debug)]
pub struct WordGraph {
    region_id: String,
    num_frames: u32,
    /// Topological order: ascending frame, then id.
    nodes: Vec<Node>,
    /// Ascending edge id.
    edges: Vec<Edge>,
    /// Dense (from, to) node positions per edge.
    ends: Vec<(usize, usize)>,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
    /// Sorted distinct edge words.
    vocabulary: Vec<String>,
    /// Position of each edge's word in `vocabulary`.
    word_ids: Vec<u32>,
    normalization: Option<Normalization>,
}

impl WordGraph {
    /// Validates and assembles a word graph. Posteriors on the given edges
    /// are discarded.
    pub fn new(
        region_id: impl Into<String>,
        num_frames: u32,
        mut nodes: Vec<Node>,
        mut edges: Vec<Edge>,
    ) -> Result<Self> {
        let region_id = region_id.into();
        if region_id.is_empty() || region_id.chars().any(char::is_whitespace) {
            return Err(Error::Structure(format!("invalid region id {region_id:?}")));
        }
        if num_frames == 0 {
            return Err(Error::Structure("region has zero frames".into()));
        }
        if nodes.is_empty() {
            return Err(Error::Structure("lattice has no nodes".into()));
        }

        nodes.sort_by_key(|n| (n.frame, n.id));
        let mut position = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if node.frame > num_frames {
                return Err(Error::Structure(format!(
                    "node {} at frame {} lies beyond the region's {} frames",
                    node.id, node.frame, num_frames
                )));
            }
            if position.insert(node.id, i).is_some() {
                return Err(Error::Structure(format!("duplicate node id {}", node.id)));
            }
        }

        edges.sort_by_key(|e| e.id);
        if let Some(w) = edges.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Structure(format!("duplicate edge id {}", w[0].id)));
        }

        let mut ends = Vec::with_capacity(edges.len());
        let mut incoming = vec![Vec::new(); nodes.len()];
        let mut outgoing = vec![Vec::new(); nodes.len()];
        for (k, edge) in edges.iter_mut().enumerate() {
            edge.posterior = None;
            let lookup = |n: u32| {
                position.get(&n).copied().ok_or_else(|| {
                    Error::Structure(format!("edge {} references unknown node {}", edge.id, n))
                })
            };
            let (from, to) = (lookup(edge.from)?, lookup(edge.to)?);
            let (f0, f1) = (nodes[from].frame, nodes[to].frame);
            if f0 >= f1 {
                return Err(Error::Structure(format!(
                    "edge {} ({} -> {}) has non-increasing span: frame {} -> {}",
                    edge.id, edge.from, edge.to, f0, f1
                )));
            }
            if !edge.log_score.is_finite() {
                return Err(Error::Structure(format!(
                    "edge {} has non-finite log score",
                    edge.id
                )));
            }
            if edge.word.is_empty() || edge.word.chars().any(char::is_whitespace) {
                return Err(Error::Structure(format!(
                    "edge {} has invalid word {:?}",
                    edge.id, edge.word
                )));
            }
            ends.push((from, to));
            outgoing[from].push(k);
            incoming[to].push(k);
        }

        let sources: Vec<usize> = (0..nodes.len())
            .filter(|&i| incoming[i].is_empty())
            .collect();
        let sinks: Vec<usize> = (0..nodes.len())
            .filter(|&i| outgoing[i].is_empty())
            .collect();
        let names = |idx: &[usize]| {
            idx.iter()
                .map(|&i| nodes[i].id.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        if sources.len() != 1 {
            return Err(Error::Structure(format!(
                "expected exactly one source node, found {} ({}); every node must lie on a source-to-sink path",
                sources.len(),
                names(&sources)
            )));
        }
        if sinks.len() != 1 {
            return Err(Error::Structure(format!(
                "expected exactly one sink node, found {} ({}); every node must lie on a source-to-sink path",
                sinks.len(),
                names(&sinks)
            )));
        }
        let (source, sink) = (&nodes[sources[0]], &nodes[sinks[0]]);
        if source.frame != 0 {
            return Err(Error::Structure(format!(
                "source node {} starts at frame {}, expected 0",
                source.id, source.frame
            )));
        }
        if sink.frame != num_frames {
            return Err(Error::Structure(format!(
                "sink node {} ends at frame {}, expected {}",
                sink.id, sink.frame, num_frames
            )));
        }

        let vocabulary: Vec<String> = edges
            .iter()
            .map(|e| e.word.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let word_ids = edges
            .iter()
            .map(|e| vocabulary.binary_search(&e.word).unwrap() as u32)
            .collect();

        Ok(Self {
            region_id,
            num_frames,
            nodes,
            edges,
            ends,
            incoming,
            outgoing,
            vocabulary,
            word_ids,
            normalization: None,
        })
    }

    pub fn region_id(&self) -> &str {
        &self.region_id
    }

    pub fn num_frames(&self) -> u32 {
        self.num_frames
    }

    /// Nodes in topological order.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Edges in ascending id order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Sorted distinct words of this region.
    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn contains_word(&self, word: &str) -> bool {
        self.word_id(word).is_some()
    }

    pub(crate) fn word_id(&self, word: &str) -> Option<u32> {
        self.vocabulary
            .binary_search_by(|w| w.as_str().cmp(word))
            .ok()
            .map(|i| i as u32)
    }

    pub(crate) fn edge_word_ids(&self) -> &[u32] {
        &self.word_ids
    }

    pub fn edge_span(&self, edge_index: usize) -> Span {
        let (from, to) = self.ends[edge_index];
        Span::new(self.nodes[from].frame, self.nodes[to].frame)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization.is_some()
    }

    /// Calibration scale used by the last normalization (1.0 if none).
    pub fn gamma(&self) -> f64 {
        self.normalization.map_or(1.0, |n| n.gamma)
    }

    /// Log of the total (gamma-scaled) path mass, once normalized.
    pub fn log_total_mass(&self) -> Option<f64> {
        self.normalization.map(|n| n.log_total)
    }

    fn source(&self) -> usize {
        0
    }

    fn sink(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Log forward mass at the sink, skipping edges for which `skip` holds.
    pub(crate) fn log_forward_total(&self, gamma: f64, skip: impl Fn(usize) -> bool) -> f64 {
        let alpha = self.forward(gamma, skip);
        alpha[self.sink()]
    }

    fn forward(&self, gamma: f64, skip: impl Fn(usize) -> bool) -> Vec<f64> {
        let mut alpha = vec![f64::NEG_INFINITY; self.nodes.len()];
        alpha[self.source()] = 0.0;
        for n in 1..self.nodes.len() {
            let mut acc = f64::NEG_INFINITY;
            for &e in &self.incoming[n] {
                if skip(e) {
                    continue;
                }
                let (from, _) = self.ends[e];
                acc = log_add(acc, alpha[from] + gamma * self.edges[e].log_score);
            }
            alpha[n] = acc;
        }
        alpha
    }

    fn backward(&self, gamma: f64) -> Vec<f64> {
        let mut beta = vec![f64::NEG_INFINITY; self.nodes.len()];
        beta[self.sink()] = 0.0;
        for n in (0..self.nodes.len() - 1).rev() {
            let mut acc = f64::NEG_INFINITY;
            for &e in &self.outgoing[n] {
                let (_, to) = self.ends[e];
                acc = log_add(acc, beta[to] + gamma * self.edges[e].log_score);
            }
            beta[n] = acc;
        }
        beta
    }

    /// Fills every edge posterior by forward–backward over gamma-scaled
    /// scores.
    pub fn normalize(mut self, cfg: &NormalizationConfig) -> Result<Self> {
        cfg.validate()?;
        let gamma = cfg.gamma;
        let alpha = self.forward(gamma, |_| false);
        let beta = self.backward(gamma);
        let log_total = alpha[self.sink()];
        if !log_total.is_finite() {
            return Err(Error::NoFinitePath);
        }
        for (k, edge) in self.edges.iter_mut().enumerate() {
            let (from, to) = self.ends[k];
            let lp = alpha[from] + gamma * edge.log_score + beta[to] - log_total;
            edge.posterior = Some(lp.exp().clamp(0.0, 1.0));
        }
        self.normalization = Some(Normalization { gamma, log_total });
        Ok(self)
    }

    /// Edge posterior by dense edge position, 0 when not normalized.
    pub(crate) fn posterior(&self, edge_index: usize) -> f64 {
        self.edges[edge_index].posterior.unwrap_or(0.0)
    }

    /// Maximum-score source→sink path as dense edge positions; exact ties go
    /// to the lexicographically smallest edge-id sequence.
    pub(crate) fn one_best_indices(&self) -> Vec<usize> {
        let gamma = self.gamma();
        let mut best = vec![f64::NEG_INFINITY; self.nodes.len()];
        best[self.sink()] = 0.0;
        for n in (0..self.nodes.len() - 1).rev() {
            for &e in &self.outgoing[n] {
                let (_, to) = self.ends[e];
                best[n] = best[n].max(gamma * self.edges[e].log_score + best[to]);
            }
        }
        let mut path = Vec::new();
        let mut node = self.source();
        while node != self.sink() {
            // outgoing lists are in ascending edge id, so the first maximum wins ties
            let mut choice = None;
            let mut choice_score = f64::NEG_INFINITY;
            for &e in &self.outgoing[node] {
                let (_, to) = self.ends[e];
                let s = gamma * self.edges[e].log_score + best[to];
                if choice.is_none() || s > choice_score {
                    choice = Some(e);
                    choice_score = s;
                }
            }
            let e = choice.expect("validated graph: every non-sink node has an outgoing edge");
            path.push(e);
            node = self.ends[e].1;
        }
        path
    }

    pub fn one_best_path(&self) -> Vec<&Edge> {
        self.one_best_indices()
            .into_iter()
            .map(|e| &self.edges[e])
            .collect()
    }

    /// Number of source→sink paths, saturating at `u128::MAX`.
    pub fn path_count(&self) -> u128 {
        let mut count = vec![0u128; self.nodes.len()];
        count[self.source()] = 1;
        for n in 1..self.nodes.len() {
            count[n] = self.incoming[n]
                .iter()
                .fold(0u128, |acc, &e| acc.saturating_add(count[self.ends[e].0]));
        }
        count[self.sink()]
    }

    /// Lists every source→sink path with its probability, normalized over the
    /// enumerated path scores themselves.
    pub fn enumerate_paths(&self, cap: usize) -> Result<Vec<PathHypothesis>> {
        let count = self.path_count();
        if count > cap as u128 {
            return Err(Error::TooManyPaths { count, cap });
        }
        let gamma = self.gamma();
        let mut raw: Vec<(Vec<usize>, f64)> = Vec::with_capacity(count as usize);
        let mut stack: Vec<(usize, Vec<usize>, f64)> = vec![(self.source(), Vec::new(), 0.0)];
        while let Some((node, path, score)) = stack.pop() {
            if node == self.sink() {
                raw.push((path, score));
                continue;
            }
            for &e in self.outgoing[node].iter().rev() {
                let mut next = path.clone();
                next.push(e);
                stack.push((
                    self.ends[e].1,
                    next,
                    score + gamma * self.edges[e].log_score,
                ));
            }
        }
        let log_total = crate::logmath::log_sum_exp(raw.iter().map(|(_, s)| *s));
        if !log_total.is_finite() {
            return Err(Error::NoFinitePath);
        }
        Ok(raw
            .into_iter()
            .map(|(path, score)| PathHypothesis {
                edge_ids: path.iter().map(|&e| self.edges[e].id).collect(),
                words: path.iter().map(|&e| self.edges[e].word.clone()).collect(),
                probability: (score - log_total).exp(),
            })
            .collect())
    }
}
