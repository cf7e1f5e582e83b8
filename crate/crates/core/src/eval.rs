//! Retrieval evaluation: recall, raw and interpolated precision, global AP
//! over the pooled query set, per-query AP and mAP.
//!
//! Curves are swept over distinct scores: every (query, region) pair sharing
//! a score enters the detected set at the same threshold, so results do not
//! depend on the order of tied entries. AP is the step integral of precision
//! over the recall increments of the sweep.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::SpotIndex;
use crate::relevance::Method;

/// Ground truth: word → regions where it is written.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    pub relevant: BTreeMap<String, BTreeSet<String>>,
}

impl Qrels {
    /// Parses `word<TAB>region_id` lines. Blank lines and `#` comments are
    /// skipped.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut qrels = Qrels::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(word), Some(region), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(Error::Syntax {
                    line: i + 1,
                    reason: "expected `word<TAB>region_id`".into(),
                });
            };
            if word.is_empty() || region.is_empty() {
                return Err(Error::Syntax {
                    line: i + 1,
                    reason: "empty word or region id".into(),
                });
            }
            qrels.insert(word, region);
        }
        Ok(qrels)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text)
    }

    pub fn insert(&mut self, word: &str, region_id: &str) {
        self.relevant
            .entry(word.to_owned())
            .or_default()
            .insert(region_id.to_owned());
    }

    /// `r(q)`, the number of regions relevant for `word`.
    pub fn relevant_count(&self, word: &str) -> usize {
        self.relevant.get(word).map_or(0, BTreeSet::len)
    }

    pub fn is_relevant(&self, word: &str, region_id: &str) -> bool {
        self.relevant
            .get(word)
            .is_some_and(|set| set.contains(region_id))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (word, regions) in &self.relevant {
            for region in regions {
                out.push_str(word);
                out.push('\t');
                out.push_str(region);
                out.push('\n');
            }
        }
        out
    }
}

/// One query per line; blank lines skipped, duplicates kept once in first
/// occurrence order.
pub fn parse_queries(text: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .filter(|l| seen.insert(l.to_string()))
        .map(str::to_owned)
        .collect()
}

pub fn load_queries(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_queries(&text))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpPoint {
    pub recall: f64,
    pub precision_raw: f64,
    pub precision_interpolated: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RpCurve {
    pub points: Vec<RpPoint>,
    pub ap_raw: f64,
    pub ap_interpolated: f64,
}

impl RpCurve {
    /// Sweeps a threshold over the distinct scores of `(score, relevant)`
    /// pairs. `relevant_total` must be positive.
    pub fn from_scored(scored: &mut [(f64, bool)], relevant_total: usize) -> Self {
        assert!(relevant_total > 0, "AP is undefined without relevant items");
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let r = relevant_total as f64;
        let (mut hits, mut detected) = (0usize, 0usize);
        let mut points = Vec::new();
        let mut i = 0;
        while i < scored.len() {
            let level = scored[i].0;
            while i < scored.len() && scored[i].0 == level {
                detected += 1;
                hits += scored[i].1 as usize;
                i += 1;
            }
            points.push(RpPoint {
                recall: hits as f64 / r,
                precision_raw: hits as f64 / detected as f64,
                precision_interpolated: 0.0,
            });
        }
        interpolate(&mut points);

        let (mut ap_raw, mut ap_interpolated, mut prev) = (0.0, 0.0, 0.0);
        for p in &points {
            if p.recall > prev {
                ap_raw += (p.recall - prev) * p.precision_raw;
                ap_interpolated += (p.recall - prev) * p.precision_interpolated;
                prev = p.recall;
            }
        }
        Self {
            points,
            ap_raw,
            ap_interpolated,
        }
    }
}

/// `π'(ρ) = max_{ρ' ≥ ρ} π(ρ')`. Points at equal recall share one value.
pub fn interpolate(points: &mut [RpPoint]) {
    let mut best = 0.0f64;
    let mut suffix = vec![0.0; points.len()];
    for (k, p) in points.iter().enumerate().rev() {
        best = best.max(p.precision_raw);
        suffix[k] = best;
    }
    let mut k = 0;
    while k < points.len() {
        let recall = points[k].recall;
        let value = suffix[k];
        while k < points.len() && points[k].recall == recall {
            points[k].precision_interpolated = value;
            k += 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryEval {
    /// `r(q)`
    pub relevant: usize,
    /// Entries retrieved at the lowest threshold.
    pub detected: usize,
    pub hits: usize,
    /// Interpolated AP; absent when `r(q) = 0`.
    pub ap: Option<f64>,
    pub ap_raw: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_query: BTreeMap<String, QueryEval>,
    pub global: RpCurve,
    /// Mean of per-query interpolated APs; only defined when every evaluated
    /// query has at least one relevant region.
    pub map_value: Option<f64>,
    pub query_count: usize,
    pub relevant_query_count: usize,
}

impl EvalReport {
    pub fn ap(&self) -> f64 {
        self.global.ap_interpolated
    }
}

fn labeled(ix: &SpotIndex, q: &str, qrels: &Qrels) -> Vec<(f64, bool)> {
    ix.postings(q)
        .unwrap_or(&[])
        .iter()
        .map(|p| (p.score, qrels.is_relevant(q, ix.region_id(p.region))))
        .collect()
}

fn finish(per_query: BTreeMap<String, QueryEval>, global: RpCurve) -> EvalReport {
    let query_count = per_query.len();
    let relevant_query_count = per_query.values().filter(|q| q.relevant > 0).count();
    let map_value = (query_count > 0 && relevant_query_count == query_count)
        .then(|| per_query.values().map(|q| q.ap.unwrap_or(0.0)).sum::<f64>() / query_count as f64);
    EvalReport {
        per_query,
        global,
        map_value,
        query_count,
        relevant_query_count,
    }
}

/// Global (pooled) R-P curve and AP plus per-query APs over `queries`.
/// Queries absent from `qrels` count as having no relevant region.
pub fn evaluate(ix: &SpotIndex, queries: &[String], qrels: &Qrels) -> Result<EvalReport> {
    if queries.is_empty() {
        return Err(Error::InvalidParameter("empty query set".into()));
    }
    let mut seen = HashSet::new();
    let mut pooled = Vec::new();
    let mut relevant_total = 0;
    let mut per_query = BTreeMap::new();
    for q in queries {
        if !seen.insert(q.as_str()) {
            continue;
        }
        let mut scored = labeled(ix, q, qrels);
        let r = qrels.relevant_count(q);
        relevant_total += r;
        let curve = (r > 0).then(|| RpCurve::from_scored(&mut scored, r));
        per_query.insert(
            q.clone(),
            QueryEval {
                relevant: r,
                detected: scored.len(),
                hits: scored.iter().filter(|s| s.1).count(),
                ap: curve.as_ref().map(|c| c.ap_interpolated),
                ap_raw: curve.as_ref().map(|c| c.ap_raw),
            },
        );
        pooled.extend(scored);
    }
    if relevant_total == 0 {
        return Err(Error::ApUndefined);
    }
    let global = RpCurve::from_scored(&mut pooled, relevant_total);
    Ok(finish(per_query, global))
}

fn single_point(hits: usize, detected: usize, relevant: usize) -> RpCurve {
    let recall = hits as f64 / relevant as f64;
    let precision = if detected == 0 {
        0.0
    } else {
        hits as f64 / detected as f64
    };
    RpCurve {
        points: vec![RpPoint {
            recall,
            precision_raw: precision,
            precision_interpolated: precision,
        }],
        // a single point has no area under the raw curve
        ap_raw: 0.0,
        ap_interpolated: precision * recall,
    }
}

/// Degenerate evaluation of a 1-best index: one operating point
/// `(ρ0, π0)` and interpolated AP `π0 · ρ0`.
pub fn evaluate_one_best(ix: &SpotIndex, queries: &[String], qrels: &Qrels) -> Result<EvalReport> {
    if ix.method() != Method::OneBest {
        return Err(Error::InvalidParameter(format!(
            "1-best evaluation needs a onebest index, got {}",
            ix.method()
        )));
    }
    if queries.is_empty() {
        return Err(Error::InvalidParameter("empty query set".into()));
    }
    let mut seen = HashSet::new();
    let (mut h, mut d, mut r) = (0, 0, 0);
    let mut per_query = BTreeMap::new();
    for q in queries {
        if !seen.insert(q.as_str()) {
            continue;
        }
        let scored = labeled(ix, q, qrels);
        let rq = qrels.relevant_count(q);
        let hq = scored.iter().filter(|s| s.1).count();
        let dq = scored.len();
        let curve = (rq > 0).then(|| single_point(hq, dq, rq));
        per_query.insert(
            q.clone(),
            QueryEval {
                relevant: rq,
                detected: dq,
                hits: hq,
                ap: curve.as_ref().map(|c| c.ap_interpolated),
                ap_raw: curve.as_ref().map(|c| c.ap_raw),
            },
        );
        h += hq;
        d += dq;
        r += rq;
    }
    if r == 0 {
        return Err(Error::ApUndefined);
    }
    Ok(finish(per_query, single_point(h, d, r)))
}

/// Writes `recall,precision_raw,precision_interpolated` with 6 decimals.
pub fn write_rp_csv_to<W: Write>(curve: &RpCurve, mut out: W) -> std::io::Result<()> {
    writeln!(out, "recall,precision_raw,precision_interpolated")?;
    for p in &curve.points {
        writeln!(
            out,
            "{:.6},{:.6},{:.6}",
            p.recall, p.precision_raw, p.precision_interpolated
        )?;
    }
    Ok(())
}

pub fn write_rp_csv(curve: &RpCurve, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_rp_csv_to(curve, &mut buf).expect("writing to a Vec cannot fail");
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
