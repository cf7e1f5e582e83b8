//! Lattice text format.
//!
//! ```text
//! LATTICE <region_id> <num_frames>
//! N <node_count>
//! E <edge_count>
//! node <id> <frame>
//! edge <id> <from> <to> <word> <log_score>
//! ```
//!
//! UTF-8, one lattice per file. Lines starting with `#` are comments; blank
//! lines are ignored. Node and edge lines may appear in any order after the
//! three header lines.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{Edge, Node, WordGraph};
use crate::error::{Error, Result};

fn syntax(line: usize, reason: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        reason: reason.into(),
    }
}

fn field<T: FromStr>(line: usize, what: &str, token: Option<&str>) -> Result<T> {
    let token = token.ok_or_else(|| syntax(line, format!("missing {what}")))?;
    token
        .parse()
        .map_err(|_| syntax(line, format!("invalid {what} {token:?}")))
}

/// Parses and validates one lattice. Posteriors are left unset.
pub fn parse_lattice(input: &[u8]) -> Result<WordGraph> {
    let text = std::str::from_utf8(input).map_err(|e| {
        let line = 1 + input[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count();
        syntax(line, "input is not valid UTF-8")
    })?;

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (ln, header) = lines.next().ok_or_else(|| syntax(1, "missing header"))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("LATTICE") {
        return Err(syntax(
            ln,
            "missing header: expected `LATTICE <region_id> <num_frames>`",
        ));
    }
    let region_id: String = field(ln, "region id", tok.next())?;
    let num_frames: u32 = field(ln, "frame count", tok.next())?;
    if tok.next().is_some() {
        return Err(syntax(ln, "trailing tokens after header"));
    }

    let mut count_line = |key: &str| -> Result<(usize, usize)> {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| syntax(ln, format!("missing `{key} <count>` line")))?;
        let mut tok = l.split_whitespace();
        if tok.next() != Some(key) {
            return Err(syntax(ln, format!("expected `{key} <count>`")));
        }
        let n = field(ln, "count", tok.next())?;
        if tok.next().is_some() {
            return Err(syntax(ln, "trailing tokens"));
        }
        Ok((ln, n))
    };
    let (_, node_count) = count_line("N")?;
    let (_, edge_count) = count_line("E")?;

    let mut nodes = Vec::with_capacity(node_count.min(1 << 16));
    let mut edges = Vec::with_capacity(edge_count.min(1 << 16));
    let mut last_line = ln;
    for (ln, l) in lines {
        last_line = ln;
        let mut tok = l.split_whitespace();
        match tok.next() {
            Some("node") => {
                let id = field(ln, "node id", tok.next())?;
                let frame = field(ln, "node frame", tok.next())?;
                nodes.push(Node { id, frame });
            }
            Some("edge") => {
                let id = field(ln, "edge id", tok.next())?;
                let from = field(ln, "edge source node", tok.next())?;
                let to = field(ln, "edge target node", tok.next())?;
                let word: String = field(ln, "edge word", tok.next())?;
                let log_score: f64 = field(ln, "log score", tok.next())?;
                if !log_score.is_finite() {
                    return Err(syntax(ln, format!("non-finite log score on edge {id}")));
                }
                edges.push(Edge {
                    id,
                    from,
                    to,
                    word,
                    log_score,
                    posterior: None,
                });
            }
            Some(other) => return Err(syntax(ln, format!("unknown record type {other:?}"))),
            None => unreachable!("blank lines are filtered"),
        }
        if tok.next().is_some() {
            return Err(syntax(ln, "trailing tokens"));
        }
    }

    if nodes.len() != node_count {
        return Err(syntax(
            last_line,
            format!("expected {node_count} node lines, found {}", nodes.len()),
        ));
    }
    if edges.len() != edge_count {
        return Err(syntax(
            last_line,
            format!("expected {edge_count} edge lines, found {}", edges.len()),
        ));
    }

    WordGraph::new(region_id, num_frames, nodes, edges)
}

/// Serializes a word graph in the text format. Scores are written with
/// shortest round-trip precision, so parsing the output reproduces them
/// bit for bit.
pub fn write_lattice(g: &WordGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "LATTICE {} {}", g.region_id(), g.num_frames());
    let _ = writeln!(out, "N {}", g.nodes().len());
    let _ = writeln!(out, "E {}", g.edges().len());
    let mut nodes: Vec<&Node> = g.nodes().iter().collect();
    nodes.sort_by_key(|n| n.id);
    for n in nodes {
        let _ = writeln!(out, "node {} {}", n.id, n.frame);
    }
    for e in g.edges() {
        let _ = writeln!(
            out,
            "edge {} {} {} {} {:?}",
            e.id, e.from, e.to, e.word, e.log_score
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::tests::SAMPLE;

    #[test]
    fn parses_sample() {
        let g = parse_lattice(SAMPLE.as_bytes()).unwrap();
        assert_eq!(g.region_id(), "r1");
        assert_eq!(g.num_frames(), 30);
        assert_eq!(g.nodes().len(), 4);
        assert_eq!(g.edges().len(), 4);
        assert_eq!(g.vocabulary(), ["cloud", "clouds", "is", "the"]);
        assert!(!g.is_normalized());
        assert!(g.edges().iter().all(|e| e.posterior.is_none()));
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = format!(
            "# produced by decoder\n\n{}",
            SAMPLE.replace("N 4\n", "N 4\n# nodes\n\n")
        );
        assert!(parse_lattice(text.as_bytes()).is_ok());
    }

    #[test]
    fn empty_input_is_missing_header() {
        match parse_lattice(b"") {
            Err(Error::Syntax { line, reason }) => {
                assert_eq!(line, 1);
                assert!(reason.contains("missing header"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_lattice(b"# only a comment\n"),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn backward_edge_is_structural_error() {
        let text = "LATTICE r 30\nN 4\nE 5\nnode 0 0\nnode 1 10\nnode 2 20\nnode 3 30\n\
            edge 0 0 1 a 0\nedge 1 1 2 b 0\nedge 2 2 3 c 0\nedge 3 0 2 d 0\nedge 9 2 1 back 0\n";
        match parse_lattice(text.as_bytes()) {
            Err(Error::Structure(msg)) => {
                assert!(msg.contains("edge 9"), "{msg}");
                assert!(msg.contains("non-increasing"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let bad = SAMPLE.replace("edge 3 2 3 is 0.0", "edge 3 2 3 is zero");
        match parse_lattice(bad.as_bytes()) {
            Err(Error::Syntax { line, reason }) => {
                assert_eq!(line, 11);
                assert!(reason.contains("log score"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let bad = SAMPLE.replace("E 4", "E 5");
        assert!(matches!(
            parse_lattice(bad.as_bytes()),
            Err(Error::Syntax { .. })
        ));
        let bad = SAMPLE.replace("node 3 30", "vertex 3 30");
        assert!(matches!(
            parse_lattice(bad.as_bytes()),
            Err(Error::Syntax { line: 7, .. })
        ));
        let bad = SAMPLE.replace("edge 3 2 3 is 0.0", "edge 3 2 3 is inf");
        assert!(matches!(
            parse_lattice(bad.as_bytes()),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn structural_errors() {
        // dangling node: second source
        let text = "LATTICE r 10\nN 3\nE 1\nnode 0 0\nnode 1 10\nnode 2 5\nedge 0 0 1 a 0\n";
        let err = parse_lattice(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("source"), "{err}");
        // sink short of the last frame
        let text = "LATTICE r 10\nN 2\nE 1\nnode 0 0\nnode 1 8\nedge 0 0 1 a 0\n";
        let err = parse_lattice(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("sink node 1"), "{err}");
        // unknown node
        let text = "LATTICE r 10\nN 2\nE 1\nnode 0 0\nnode 1 10\nedge 0 0 4 a 0\n";
        let err = parse_lattice(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("unknown node 4"), "{err}");
        // duplicate node id
        let text = "LATTICE r 10\nN 2\nE 1\nnode 0 0\nnode 0 10\nedge 0 0 0 a 0\n";
        assert!(parse_lattice(text.as_bytes()).is_err());
    }

    #[test]
    fn write_then_parse_is_identity() {
        let g = parse_lattice(SAMPLE.as_bytes()).unwrap();
        let again = parse_lattice(write_lattice(&g).as_bytes()).unwrap();
        assert_eq!(g.edges(), again.edges());
        assert_eq!(g.nodes(), again.nodes());
        assert_eq!(write_lattice(&g), write_lattice(&again));
    }
}
