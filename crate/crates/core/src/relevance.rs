//! Line-region relevance probabilities `P(R | x, v)`: the probability that
//! word `v` is written at least once in region `x`.
//!
//! Five estimators are provided, from the naive 1-best transcript check to
//! the exact marginal over all lattice paths, plus a brute-force path
//! enumeration oracle for testing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Span, WordGraph};
use crate::posteriorgram::{BlockSet, Posteriorgram};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// 1 if the word is on the best path, else 0.
    OneBest,
    /// Sum of block peak posteriors. Not a proper probability.
    BlockSum,
    /// Maximum frame posterior.
    FrameMax,
    /// Inclusion–exclusion over block peaks under independence.
    NaiveBayes,
    /// Mass of all paths containing the word.
    Exact,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::OneBest,
        Method::BlockSum,
        Method::FrameMax,
        Method::NaiveBayes,
        Method::Exact,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::OneBest => "onebest",
            Method::BlockSum => "sum",
            Method::FrameMax => "max",
            Method::NaiveBayes => "nb",
            Method::Exact => "exact",
        }
    }

    pub(crate) fn code(&self) -> u32 {
        match self {
            Method::OneBest => 0,
            Method::BlockSum => 1,
            Method::FrameMax => 2,
            Method::NaiveBayes => 3,
            Method::Exact => 4,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        Method::ALL.into_iter().find(|m| m.code() == code)
    }

    /// Whether scores from this estimator are bounded by 1.
    pub fn is_proper(&self) -> bool {
        *self != Method::BlockSum
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "onebest" | "1best" => Method::OneBest,
            "sum" => Method::BlockSum,
            "max" => Method::FrameMax,
            "nb" => Method::NaiveBayes,
            "exact" => Method::Exact,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown method {s:?} (expected onebest, sum, max, nb or exact)"
                )))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevanceScore {
    pub word: String,
    pub region_id: String,
    pub score: f64,
    pub method: Method,
    /// Where the word was spotted, when the estimator locates it.
    pub best_span: Option<Span>,
}

/// Score 1 iff `v` lies on the best path.
pub fn relevance_one_best(g: &WordGraph, v: &str) -> RelevanceScore {
    let span = if g.contains_word(v) {
        g.one_best_indices()
            .into_iter()
            .find(|&e| g.edges()[e].word == v)
            .map(|e| g.edge_span(e))
    } else {
        None
    };
    RelevanceScore {
        word: v.to_owned(),
        region_id: g.region_id().to_owned(),
        score: if span.is_some() { 1.0 } else { 0.0 },
        method: Method::OneBest,
        best_span: span,
    }
}

/// Leftmost maximal run of frames attaining the row maximum.
fn argmax_run(row: &[f64]) -> Option<(f64, Span)> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let begin = row.iter().position(|&x| x == max)?;
    let len = row[begin..].iter().take_while(|&&x| x == max).count();
    Some((max, Span::new(begin as u32, (begin + len) as u32)))
}

/// `max_i P(v | x, i)`, located at the leftmost maximal run.
pub fn relevance_frame_max(pg: &Posteriorgram, v: &str) -> RelevanceScore {
    let (score, best_span) = match pg.row(v).and_then(argmax_run) {
        Some((max, span)) if max > 0.0 => (max, Some(span)),
        _ => (0.0, None),
    };
    RelevanceScore {
        word: v.to_owned(),
        region_id: pg.region_id.clone(),
        score,
        method: Method::FrameMax,
        best_span,
    }
}

fn strongest_block(bs: &BlockSet) -> Option<Span> {
    crate::posteriorgram::strongest(&bs.blocks).map(|b| b.span())
}

/// Sum of block peaks. May exceed 1 when the word has several blocks.
pub fn relevance_block_sum(bs: &BlockSet) -> RelevanceScore {
    RelevanceScore {
        word: bs.word.clone(),
        region_id: bs.region_id.clone(),
        score: bs.peaks().sum(),
        method: Method::BlockSum,
        best_span: strongest_block(bs),
    }
}

/// `q(1) = p1`, `q(k) = p_k + q(k-1) (1 - p_k)`; zero for no blocks.
pub fn naive_bayes_recurrence(peaks: impl IntoIterator<Item = f64>) -> f64 {
    peaks.into_iter().fold(0.0, |q, p| p + q * (1.0 - p))
}

pub fn relevance_naive_bayes(bs: &BlockSet) -> RelevanceScore {
    RelevanceScore {
        word: bs.word.clone(),
        region_id: bs.region_id.clone(),
        score: naive_bayes_recurrence(bs.peaks()),
        method: Method::NaiveBayes,
        best_span: strongest_block(bs),
    }
}

/// Exact `Σ_{w: v ∈ w} P(w | x)`, computed as one minus the mass of the
/// subgraph with every `v` edge removed.
pub fn relevance_exact(g: &WordGraph, v: &str) -> Result<RelevanceScore> {
    let log_total = g.log_total_mass().ok_or(Error::NotNormalized)?;
    let score = match g.word_id(v) {
        None => 0.0,
        Some(id) => {
            let words = g.edge_word_ids();
            let without = g.log_forward_total(g.gamma(), |e| words[e] == id);
            if without == f64::NEG_INFINITY {
                1.0
            } else {
                (-(without - log_total).exp_m1()).clamp(0.0, 1.0)
            }
        }
    };
    Ok(RelevanceScore {
        word: v.to_owned(),
        region_id: g.region_id().to_owned(),
        score,
        method: Method::Exact,
        best_span: None,
    })
}

/// Brute-force exact relevance by path enumeration.
pub fn relevance_oracle(g: &WordGraph, v: &str, cap: usize) -> Result<RelevanceScore> {
    let paths = g.enumerate_paths(cap)?;
    let score = paths
        .iter()
        .filter(|p| p.words.iter().any(|w| w == v))
        .map(|p| p.probability)
        .sum();
    Ok(RelevanceScore {
        word: v.to_owned(),
        region_id: g.region_id().to_owned(),
        score,
        method: Method::Exact,
        best_span: None,
    })
}

/// Loss matrix of the two-class spotting decision; `tau` is the Bayes
/// decision threshold on the relevance probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionThresholds {
    pub loss_nn: f64,
    pub loss_ny: f64,
    pub loss_yn: f64,
    pub loss_yy: f64,
    pub tau: f64,
}

impl DecisionThresholds {
    /// `loss_ab` is the loss of answering `a` when the truth is `b`.
    pub fn from_losses(loss_nn: f64, loss_ny: f64, loss_yn: f64, loss_yy: f64) -> Result<Self> {
        let denom = loss_ny - loss_yy + loss_yn - loss_nn;
        let tau = (loss_yn - loss_nn) / denom;
        if !tau.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "losses ({loss_nn}, {loss_ny}, {loss_yn}, {loss_yy}) give no finite threshold"
            )));
        }
        Ok(Self {
            loss_nn,
            loss_ny,
            loss_yn,
            loss_yy,
            tau,
        })
    }

    /// Threshold-only form, as used when sweeping operating points.
    pub fn with_tau(tau: f64) -> Self {
        Self {
            loss_nn: 0.0,
            loss_ny: 1.0 - tau,
            loss_yn: tau,
            loss_yy: 0.0,
            tau,
        }
    }
}

/// Answer "yes" iff the relevance probability strictly exceeds `tau`.
pub fn decide(score: &RelevanceScore, t: &DecisionThresholds) -> bool {
    score.score > t.tau
}
