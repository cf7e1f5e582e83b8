//! Threshold-tunable ranked retrieval over a [`SpotIndex`].

use serde::{Deserialize, Serialize};

use crate::index::SpotIndex;
use crate::lattice::Span;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    /// 1-based position in the ranking.
    pub rank: usize,
    pub region_id: String,
    pub score: f64,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query: String,
    pub tau: f64,
    /// The word has no entry in the index.
    pub out_of_lexicon: bool,
    /// Number of regions scoring above `tau`, before `limit` truncation.
    pub detected_count: usize,
    pub hits: Vec<Hit>,
}

/// Regions whose score for `q` strictly exceeds `tau`, best first, at most
/// `limit` of them.
pub fn search(ix: &SpotIndex, q: &str, tau: f64, limit: usize) -> QueryResult {
    let (out_of_lexicon, detected) = match ix.postings(q) {
        None => (true, &[][..]),
        Some(list) => {
            // lists are sorted by descending score
            let n = list.partition_point(|p| p.score > tau);
            (false, &list[..n])
        }
    };
    QueryResult {
        query: q.to_owned(),
        tau,
        out_of_lexicon,
        detected_count: detected.len(),
        hits: detected
            .iter()
            .take(limit)
            .enumerate()
            .map(|(i, p)| Hit {
                rank: i + 1,
                region_id: ix.region_id(p.region).to_owned(),
                score: p.score,
                span: p.span,
            })
            .collect(),
    }
}

/// Indexed words starting with `prefix`, in lexicographic order.
pub fn suggest(ix: &SpotIndex, prefix: &str, limit: usize) -> Vec<String> {
    ix.entries
        .range::<str, _>((
            std::ops::Bound::Included(prefix),
            std::ops::Bound::Unbounded,
        ))
        .map(|(w, _)| w)
        .take_while(|w| w.starts_with(prefix))
        .take(limit)
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::tests::sample_index;
    use crate::index::IndexConfig;

    fn ix() -> SpotIndex {
        sample_index(IndexConfig {
            prune_epsilon: 0.0,
            ..IndexConfig::default()
        })
    }

    #[test]
    fn search_sample() {
        let ix = ix();
        let r = search(&ix, "cloud", 0.5, 100);
        assert_eq!(r.detected_count, 1);
        assert_eq!(r.hits[0].region_id, "r1");
        assert_eq!(r.hits[0].rank, 1);
        assert!((r.hits[0].score - 0.6).abs() < 1e-7);
        assert!(!r.out_of_lexicon);

        let r = search(&ix, "clouds", 0.5, 100);
        assert_eq!(
            (r.detected_count, r.hits.len(), r.out_of_lexicon),
            (0, 0, false)
        );

        assert_eq!(search(&ix, "clouds", 0.0, 100).hits.len(), 1);
    }

    #[test]
    fn oov_query() {
        let r = search(&ix(), "zzz", 0.0, 10);
        assert!(r.out_of_lexicon);
        assert!(r.hits.is_empty());
    }

    #[test]
    fn limit_truncates_but_counts_all() {
        let r = search(&ix(), "the", 0.0, 0);
        assert_eq!((r.detected_count, r.hits.len()), (1, 0));
    }

    #[test]
    fn suggestions() {
        let ix = ix();
        assert_eq!(suggest(&ix, "clo", 10), ["cloud", "clouds"]);
        assert!(suggest(&ix, "zz", 10).is_empty());
        assert_eq!(suggest(&ix, "", 2), ["cloud", "clouds"]);
        assert_eq!(suggest(&ix, "", 10).len(), 4);
        assert_eq!(suggest(&ix, "clouds", 10), ["clouds"]);
    }
}
