//! Probabilistic keyword spotting over word lattices.
//!
//! Word graphs of line regions are normalized into edge posteriors, turned
//! into frame-level posteriorgrams and scored with one of several estimators
//! of the line relevance probability `P(R | x, v)`. Scores populate an
//! inverted [`SpotIndex`] that answers threshold queries, and the [`eval`]
//! module measures retrieval quality with recall, interpolated precision and
//! average precision.

pub mod error;
pub mod eval;
pub mod index;
pub mod lattice;
pub mod logmath;
pub mod posteriorgram;
pub mod query;
pub mod relevance;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{evaluate, evaluate_one_best, write_rp_csv, EvalReport, Qrels, RpCurve, RpPoint};
pub use index::{
    build_index, build_index_from_graphs, load_index, save_index, stats, IndexConfig, IndexStats,
    Posting, SpotIndex,
};
pub use lattice::{parse_lattice, write_lattice, Edge, Node, NormalizationConfig, Span, WordGraph};
pub use posteriorgram::{build_posteriorgram, segment_blocks, Block, BlockSet, Posteriorgram};
pub use query::{search, suggest, Hit, QueryResult};
pub use relevance::{
    decide, relevance_block_sum, relevance_exact, relevance_frame_max, relevance_naive_bayes,
    relevance_one_best, relevance_oracle, DecisionThresholds, Method, RelevanceScore,
};
pub use synth::{generate, generate_corpus, SynthConfig};
