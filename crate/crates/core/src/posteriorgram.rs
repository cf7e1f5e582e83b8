//! Frame-level word posteriors `P(v | x, i)` and their segmentation into
//! peak blocks.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Span, WordGraph};

/// Default drop threshold used to detect significant local maxima.
pub const DEFAULT_PEAK_THRESHOLD: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct Posteriorgram {
    pub region_id: String,
    pub num_frames: u32,
    /// Dense row per word present in the lattice. Absent words are zero.
    pub rows: BTreeMap<String, Vec<f64>>,
}

impl Posteriorgram {
    /// Sums the posteriors of all edges labeled with each word over the
    /// frames they span.
    pub fn from_graph(g: &WordGraph) -> Result<Self> {
        if !g.is_normalized() {
            return Err(Error::NotNormalized);
        }
        let m = g.num_frames() as usize;
        let mut dense = vec![vec![0.0; m]; g.vocabulary().len()];
        for (k, &w) in g.edge_word_ids().iter().enumerate() {
            let span = g.edge_span(k);
            let p = g.posterior(k);
            for x in &mut dense[w as usize][span.begin as usize..span.end as usize] {
                *x += p;
            }
        }
        let rows = g
            .vocabulary()
            .iter()
            .cloned()
            .zip(
                dense
                    .into_iter()
                    .map(|row| row.into_iter().map(|x| x.min(1.0)).collect()),
            )
            .collect();
        Ok(Self {
            region_id: g.region_id().to_owned(),
            num_frames: g.num_frames(),
            rows,
        })
    }

    pub fn row(&self, word: &str) -> Option<&[f64]> {
        self.rows.get(word).map(Vec::as_slice)
    }

    /// `P(v | x, i)`, zero for words absent from the lattice.
    pub fn value(&self, word: &str, frame: u32) -> f64 {
        self.row(word)
            .and_then(|r| r.get(frame as usize).copied())
            .unwrap_or(0.0)
    }

    /// Per-frame total posterior mass; each entry should be 1.
    pub fn frame_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.num_frames as usize];
        for row in self.rows.values() {
            for (s, x) in sums.iter_mut().zip(row) {
                *s += x;
            }
        }
        sums
    }

    /// Largest deviation of any frame sum from 1.
    pub fn max_normalization_error(&self) -> f64 {
        self.frame_sums()
            .into_iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `frame,word,probability` rows, frame-major, skipping zeros.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "frame,word,probability")?;
        for i in 0..self.num_frames as usize {
            for (word, row) in &self.rows {
                if row[i] > 0.0 {
                    writeln!(out, "{i},{word},{:.6}", row[i])?;
                }
            }
        }
        Ok(())
    }
}

pub fn build_posteriorgram(g: &WordGraph) -> Result<Posteriorgram> {
    Posteriorgram::from_graph(g)
}

/// A sub-interval of a row around one significant local maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub begin: u32,
    pub end: u32,
    pub peak_frame: u32,
    pub peak: f64,
}

impl Block {
    pub fn span(&self) -> Span {
        Span::new(self.begin, self.end)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSet {
    pub region_id: String,
    pub word: String,
    pub blocks: Vec<Block>,
}

impl BlockSet {
    pub fn peaks(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().map(|b| b.peak)
    }
}

/// Highest-peak block, leftmost on ties.
pub fn strongest(blocks: &[Block]) -> Option<&Block> {
    blocks
        .iter()
        .fold(None, |best: Option<&Block>, b| match best {
            Some(a) if a.peak >= b.peak => Some(a),
            _ => Some(b),
        })
}

fn check_peak_threshold(peak_threshold: f64) -> Result<()> {
    if !(peak_threshold > 0.0 && peak_threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "peak threshold must lie in (0, 1), got {peak_threshold}"
        )));
    }
    Ok(())
}

/// Single left-to-right scan: a block is cut as soon as the row falls more
/// than `peak_threshold` below the running maximum since the last cut. The
/// frame that triggers the cut opens the next block. Blocks whose peak stays
/// below the threshold are dropped.
pub fn segment_row(row: &[f64], peak_threshold: f64) -> Result<Vec<Block>> {
    check_peak_threshold(peak_threshold)?;
    let mut blocks = Vec::new();
    let mut start = 0usize;
    let mut max = f64::NEG_INFINITY;
    let mut argmax = 0usize;
    for (i, &x) in row.iter().enumerate() {
        if x > max {
            max = x;
            argmax = i;
        } else if x < max - peak_threshold {
            if max >= peak_threshold {
                blocks.push(Block {
                    begin: start as u32,
                    end: i as u32,
                    peak_frame: argmax as u32,
                    peak: max,
                });
            }
            start = i;
            max = x;
            argmax = i;
        }
    }
    if start < row.len() && max >= peak_threshold {
        blocks.push(Block {
            begin: start as u32,
            end: row.len() as u32,
            peak_frame: argmax as u32,
            peak: max,
        });
    }
    Ok(blocks)
}

pub fn segment_blocks(pg: &Posteriorgram, word: &str, peak_threshold: f64) -> Result<BlockSet> {
    let blocks = match pg.row(word) {
        Some(row) => segment_row(row, peak_threshold)?,
        None => {
            check_peak_threshold(peak_threshold)?;
            Vec::new()
        }
    };
    Ok(BlockSet {
        region_id: pg.region_id.clone(),
        word: word.to_owned(),
        blocks,
    })
}
