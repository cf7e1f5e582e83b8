//! Inverted spot index: word → regions ranked by relevance probability.

mod format;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{parse_lattice, NormalizationConfig, Span, WordGraph};
use crate::posteriorgram::{build_posteriorgram, segment_row, strongest, DEFAULT_PEAK_THRESHOLD};
use crate::relevance::{naive_bayes_recurrence, relevance_exact, relevance_frame_max, Method};

pub use format::{load_index, save_index, FORMAT_VERSION, MAGIC};

/// Default minimum score kept in the index.
pub const DEFAULT_PRUNE_EPSILON: f64 = 1e-4;

/// File extension of lattice files picked up by [`build_index`].
pub const LATTICE_EXTENSION: &str = "lat";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub method: Method,
    pub normalization: NormalizationConfig,
    pub peak_threshold: f64,
    pub prune_epsilon: f64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            method: Method::FrameMax,
            normalization: NormalizationConfig::default(),
            peak_threshold: DEFAULT_PEAK_THRESHOLD,
            prune_epsilon: DEFAULT_PRUNE_EPSILON,
        }
    }
}

impl IndexConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.normalization.validate()?;
        if !(self.peak_threshold > 0.0 && self.peak_threshold < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "peak threshold must lie in (0, 1), got {}",
                self.peak_threshold
            )));
        }
        if !(0.0..1.0).contains(&self.prune_epsilon) {
            return Err(Error::InvalidParameter(format!(
                "prune epsilon must lie in [0, 1), got {}",
                self.prune_epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Posting {
    /// Ordinal into [`SpotIndex::regions`].
    pub region: u32,
    pub score: f64,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpotIndex {
    pub config: IndexConfig,
    /// Sorted region ids of every ingested lattice.
    pub regions: Vec<String>,
    /// Per word, postings by descending score then ascending region.
    pub entries: BTreeMap<String, Vec<Posting>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub regions: usize,
    pub vocabulary_size: usize,
    pub total_spots: usize,
    pub spots_per_line: f64,
}

impl SpotIndex {
    pub fn method(&self) -> Method {
        self.config.method
    }

    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    pub fn region_id(&self, ordinal: u32) -> &str {
        &self.regions[ordinal as usize]
    }

    pub fn postings(&self, word: &str) -> Option<&[Posting]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn stats(&self) -> IndexStats {
        let total_spots = self.entries.values().map(Vec::len).sum();
        let regions = self.regions.len();
        IndexStats {
            regions,
            vocabulary_size: self.entries.len(),
            total_spots,
            spots_per_line: if regions == 0 {
                0.0
            } else {
                total_spots as f64 / regions as f64
            },
        }
    }

    /// Assembles an index from per-region scores. Regions are sorted by id;
    /// the result does not depend on the order of `scored`.
    pub fn from_scores(config: IndexConfig, scored: Vec<RegionScores>) -> Result<Self> {
        config.validate()?;
        let mut scored = scored;
        scored.sort_by(|a, b| a.region_id.cmp(&b.region_id));
        if let Some(w) = scored.windows(2).find(|w| w[0].region_id == w[1].region_id) {
            return Err(Error::InvalidParameter(format!(
                "duplicate region id {}",
                w[0].region_id
            )));
        }
        let mut entries: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (ordinal, region) in scored.iter().enumerate() {
            for spot in &region.spots {
                if spot.score >= config.prune_epsilon && spot.score > 0.0 {
                    entries.entry(spot.word.clone()).or_default().push(Posting {
                        region: ordinal as u32,
                        score: spot.score,
                        span: spot.span,
                    });
                }
            }
        }
        for list in entries.values_mut() {
            sort_postings(list);
        }
        Ok(Self {
            config,
            regions: scored.into_iter().map(|r| r.region_id).collect(),
            entries,
        })
    }
}

pub(crate) fn sort_postings(list: &mut [Posting]) {
    list.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.region.cmp(&b.region)));
}

pub fn stats(ix: &SpotIndex) -> IndexStats {
    ix.stats()
}

/// One estimator score for one word of a region.
#[derive(Clone, Debug, PartialEq)]
pub struct Spot {
    pub word: String,
    pub score: f64,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionScores {
    pub region_id: String,
    pub spots: Vec<Spot>,
}

/// Normalizes a raw lattice and scores every word of its vocabulary with
/// the configured estimator. Spots carry the estimator's location, falling
/// back to the frame-max run when the estimator has none.
pub fn score_region(g: WordGraph, cfg: &IndexConfig) -> Result<RegionScores> {
    let g = if g.is_normalized() && g.gamma() == cfg.normalization.gamma {
        g
    } else {
        g.normalize(&cfg.normalization)?
    };
    let pg = build_posteriorgram(&g)?;
    let one_best = (cfg.method == Method::OneBest).then(|| g.one_best_indices());
    let mut spots = Vec::with_capacity(g.vocabulary().len());
    for word in g.vocabulary() {
        let frame_max = relevance_frame_max(&pg, word);
        let fallback = frame_max.best_span.unwrap_or(Span::new(0, 0));
        let (score, span) = match cfg.method {
            Method::FrameMax => (frame_max.score, frame_max.best_span),
            Method::OneBest => {
                let on_path = one_best
                    .iter()
                    .flatten()
                    .find(|&&e| g.edges()[e].word == *word)
                    .map(|&e| g.edge_span(e));
                (if on_path.is_some() { 1.0 } else { 0.0 }, on_path)
            }
            Method::Exact => (relevance_exact(&g, word)?.score, None),
            Method::BlockSum | Method::NaiveBayes => {
                let row = pg.row(word).unwrap_or(&[]);
                let blocks = segment_row(row, cfg.peak_threshold)?;
                let peaks = blocks.iter().map(|b| b.peak);
                let score = if cfg.method == Method::BlockSum {
                    peaks.sum()
                } else {
                    naive_bayes_recurrence(peaks)
                };
                (score, strongest(&blocks).map(|b| b.span()))
            }
        };
        spots.push(Spot {
            word: word.clone(),
            score,
            span: span.unwrap_or(fallback),
        });
    }
    Ok(RegionScores {
        region_id: g.region_id().to_owned(),
        spots,
    })
}

/// In-memory build over already parsed lattices, scored in parallel.
pub fn build_index_from_graphs(graphs: Vec<WordGraph>, cfg: &IndexConfig) -> Result<SpotIndex> {
    cfg.validate()?;
    let scored = graphs
        .into_par_iter()
        .map(|g| score_region(g, cfg))
        .collect::<Result<Vec<_>>>()?;
    SpotIndex::from_scores(*cfg, scored)
}

/// Index plus the lattices that could not be ingested.
#[derive(Debug)]
pub struct BuildOutput {
    pub index: SpotIndex,
    pub failures: Vec<(PathBuf, String)>,
}

/// Lattice files (`*.lat`) directly inside `dir`, sorted by path.
pub fn lattice_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let read = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in read {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() && path.extension().is_some_and(|x| x == LATTICE_EXTENSION) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Builds an index over every lattice file in `lattice_dir`. Files that fail
/// to parse or normalize are reported in [`BuildOutput::failures`]; the build
/// only fails if none succeed. A region id seen twice keeps the file that
/// sorts first.
pub fn build_index(lattice_dir: &Path, cfg: &IndexConfig) -> Result<BuildOutput> {
    cfg.validate()?;
    let files = lattice_files(lattice_dir)?;
    let results: Vec<(PathBuf, Result<RegionScores>)> = files
        .into_par_iter()
        .map(|path| {
            let scored = std::fs::read(&path)
                .map_err(|e| Error::io(&path, e))
                .and_then(|bytes| parse_lattice(&bytes))
                .and_then(|g| score_region(g, cfg));
            (path, scored)
        })
        .collect();

    let mut seen = HashSet::new();
    let mut scored = Vec::new();
    let mut failures = Vec::new();
    for (path, result) in results {
        match result {
            Ok(region) => {
                if seen.insert(region.region_id.clone()) {
                    scored.push(region);
                } else {
                    failures.push((path, format!("duplicate region id {}", region.region_id)));
                }
            }
            Err(e) => failures.push((path, e.to_string())),
        }
    }
    if scored.is_empty() {
        return Err(Error::NoLattices { failures });
    }
    Ok(BuildOutput {
        index: SpotIndex::from_scores(*cfg, scored)?,
        failures,
    })
}
