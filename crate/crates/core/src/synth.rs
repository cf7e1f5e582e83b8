//! Synthetic lattice collections with known transcripts.
//!
//! Lines are sausage-shaped: one slot per true word, each slot carrying the
//! true edge and, with probability `confusion_rate`, one to three competing
//! edges whose words are edit-distance-1 neighbours of the true word when the
//! vocabulary has any. Everything is a deterministic function of the seed;
//! each line draws from its own ChaCha stream so lines can be built in
//! parallel.

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Zipf};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::lattice::{write_lattice, Edge, Node, WordGraph};

const ALPHABET: &[u8] = b"abcdeilmnorstu";

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub num_lines: usize,
    pub vocab_size: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Probability that a slot gains competing edges.
    pub confusion_rate: f64,
    /// Standard deviation of the log-score jitter. Competing edges are also
    /// shifted down by this amount on average.
    pub score_noise: f64,
    pub seed: u64,
    pub frames_per_char: u32,
    /// Zipf exponent of word frequencies; 0 gives uniform sampling.
    pub zipf_exponent: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_lines: 100,
            vocab_size: 200,
            min_words: 8,
            max_words: 12,
            confusion_rate: 0.5,
            score_noise: 0.5,
            seed: 42,
            frames_per_char: 4,
            zipf_exponent: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_owned()));
        if self.num_lines == 0 {
            return bad("num_lines must be positive");
        }
        if self.vocab_size < 2 {
            return bad("vocab_size must be at least 2");
        }
        if self.min_words == 0 || self.min_words > self.max_words {
            return bad("words per line must be a nonempty positive range");
        }
        if !(0.0..=1.0).contains(&self.confusion_rate) {
            return bad("confusion_rate must lie in [0, 1]");
        }
        if !(self.score_noise >= 0.0 && self.score_noise.is_finite()) {
            return bad("score_noise must be finite and non-negative");
        }
        if self.frames_per_char == 0 {
            return bad("frames_per_char must be positive");
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return bad("zipf_exponent must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthLine {
    pub region_id: String,
    pub transcript: Vec<String>,
    pub graph: WordGraph,
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    /// Sorted vocabulary.
    pub vocabulary: Vec<String>,
    pub lines: Vec<SynthLine>,
}

impl SynthCorpus {
    pub fn qrels(&self) -> Qrels {
        let mut qrels = Qrels::default();
        for line in &self.lines {
            for w in &line.transcript {
                qrels.insert(w, &line.region_id);
            }
        }
        qrels
    }

    /// Every vocabulary word, in sorted order.
    pub fn queries(&self) -> Vec<String> {
        self.vocabulary.clone()
    }

    pub fn graphs(&self) -> Vec<WordGraph> {
        self.lines.iter().map(|l| l.graph.clone()).collect()
    }
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_word(rng: &mut impl Rng) -> String {
    let len = rng.random_range(3..=7);
    (0..len)
        .map(|_| *ALPHABET.choose(rng).unwrap() as char)
        .collect()
}

fn mutate(word: &str, rng: &mut impl Rng) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    let letter = *ALPHABET.choose(rng).unwrap() as char;
    match rng.random_range(0..3) {
        0 => {
            let i = rng.random_range(0..chars.len());
            chars[i] = letter;
        }
        1 => {
            let i = rng.random_range(0..=chars.len());
            chars.insert(i, letter);
        }
        _ if chars.len() > 2 => {
            let i = rng.random_range(0..chars.len());
            chars.remove(i);
        }
        _ => chars.push(letter),
    }
    chars.into_iter().collect()
}

/// Vocabulary built from small clusters of mutually close words, in
/// frequency-rank order.
fn build_vocabulary(size: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut words = Vec::with_capacity(size);
    while words.len() < size {
        let root = random_word(rng);
        if !seen.insert(root.clone()) {
            continue;
        }
        words.push(root.clone());
        let extra = rng.random_range(0..=3);
        for _ in 0..extra {
            if words.len() >= size {
                break;
            }
            let m = mutate(&root, rng);
            if seen.insert(m.clone()) {
                words.push(m);
            }
        }
    }
    words.shuffle(rng);
    words
}

pub(crate) fn edit_distance_one(a: &str, b: &str) -> bool {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    match a.len() as isize - b.len() as isize {
        0 => a.iter().zip(b).filter(|(x, y)| x != y).count() == 1,
        1 | -1 => {
            let (long, short) = if a.len() > b.len() { (a, b) } else { (b, a) };
            let i = long.iter().zip(short).take_while(|(x, y)| x == y).count();
            long[i + 1..] == short[i..]
        }
        _ => false,
    }
}

fn neighbours(vocab: &[String]) -> Vec<Vec<usize>> {
    vocab
        .iter()
        .map(|w| {
            (0..vocab.len())
                .filter(|&j| edit_distance_one(w, &vocab[j]))
                .collect()
        })
        .collect()
}

struct Sampler<'a> {
    cfg: &'a SynthConfig,
    vocab: &'a [String],
    neighbours: &'a [Vec<usize>],
    zipf: Option<Zipf<f64>>,
}

impl Sampler<'_> {
    fn word(&self, rng: &mut impl Rng) -> usize {
        match &self.zipf {
            Some(z) => (z.sample(rng) as usize).clamp(1, self.vocab.len()) - 1,
            None => rng.random_range(0..self.vocab.len()),
        }
    }

    fn line(&self, index: usize) -> Result<SynthLine> {
        let cfg = self.cfg;
        let mut rng = stream(cfg.seed, index as u64 + 1);
        let region_id = format!("line{index:06}");
        let n = rng.random_range(cfg.min_words..=cfg.max_words);
        let transcript: Vec<usize> = (0..n).map(|_| self.word(&mut rng)).collect();

        let mut nodes = vec![Node { id: 0, frame: 0 }];
        let mut edges = Vec::new();
        let mut frame = 0u32;
        for (slot, &w) in transcript.iter().enumerate() {
            frame += cfg.frames_per_char * self.vocab[w].len() as u32;
            nodes.push(Node {
                id: slot as u32 + 1,
                frame,
            });
            let jitter = |rng: &mut ChaCha8Rng| -> f64 {
                let z: f64 = StandardNormal.sample(rng);
                cfg.score_noise * z
            };
            let mut slot_edges = vec![(w, jitter(&mut rng))];
            if rng.random_bool(cfg.confusion_rate) {
                let count = rng.random_range(1..=3usize);
                let mut pool: Vec<usize> = self.neighbours[w].clone();
                pool.shuffle(&mut rng);
                let mut chosen: Vec<usize> = pool.into_iter().take(count).collect();
                while chosen.len() < count {
                    let c = rng.random_range(0..self.vocab.len());
                    if c != w && !chosen.contains(&c) {
                        chosen.push(c);
                    }
                }
                for c in chosen {
                    let score = jitter(&mut rng) - cfg.score_noise;
                    slot_edges.push((c, score));
                }
            }
            slot_edges.shuffle(&mut rng);
            for (word, log_score) in slot_edges {
                edges.push(Edge {
                    id: edges.len() as u32,
                    from: slot as u32,
                    to: slot as u32 + 1,
                    word: self.vocab[word].clone(),
                    log_score,
                    posterior: None,
                });
            }
        }
        let graph = WordGraph::new(region_id.clone(), frame, nodes, edges)?;
        Ok(SynthLine {
            region_id,
            transcript: transcript.iter().map(|&w| self.vocab[w].clone()).collect(),
            graph,
        })
    }
}

/// Builds the corpus in memory.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, 0);
    let ranked = build_vocabulary(cfg.vocab_size, &mut rng);
    let neighbours = neighbours(&ranked);
    let zipf = (cfg.zipf_exponent > 0.0)
        .then(|| Zipf::new(ranked.len() as f64, cfg.zipf_exponent))
        .transpose()
        .map_err(|e| Error::InvalidParameter(format!("zipf: {e}")))?;
    let sampler = Sampler {
        cfg,
        vocab: &ranked,
        neighbours: &neighbours,
        zipf,
    };
    let lines = (0..cfg.num_lines)
        .into_par_iter()
        .map(|i| sampler.line(i))
        .collect::<Result<Vec<_>>>()?;
    let mut vocabulary = ranked;
    vocabulary.sort();
    Ok(SynthCorpus { vocabulary, lines })
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub lattice_dir: PathBuf,
    pub lattice_files: Vec<PathBuf>,
    pub qrels_path: PathBuf,
    pub queries_path: PathBuf,
}

/// Writes `lattices/<region>.lat`, `qrels.tsv` and `queries.txt` under
/// `out_dir`.
pub fn generate(cfg: &SynthConfig, out_dir: &Path) -> Result<SynthOutput> {
    let corpus = generate_corpus(cfg)?;
    let lattice_dir = out_dir.join("lattices");
    std::fs::create_dir_all(&lattice_dir).map_err(|e| Error::io(&lattice_dir, e))?;
    let lattice_files = corpus
        .lines
        .par_iter()
        .map(|line| {
            let path = lattice_dir.join(format!("{}.lat", line.region_id));
            std::fs::write(&path, write_lattice(&line.graph)).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    let qrels_path = out_dir.join("qrels.tsv");
    std::fs::write(&qrels_path, corpus.qrels().to_tsv()).map_err(|e| Error::io(&qrels_path, e))?;
    let queries_path = out_dir.join("queries.txt");
    let mut queries = corpus.queries().join("\n");
    queries.push('\n');
    std::fs::write(&queries_path, queries).map_err(|e| Error::io(&queries_path, e))?;
    Ok(SynthOutput {
        lattice_dir,
        lattice_files,
        qrels_path,
        queries_path,
    })
}

/// Shape of small general DAG lattices used by property tests.
#[derive(Clone, Debug)]
pub struct RandomDagConfig {
    pub max_nodes: usize,
    pub max_paths: u128,
    pub vocab_size: usize,
    pub min_score: f64,
    pub max_score: f64,
}

impl Default for RandomDagConfig {
    fn default() -> Self {
        Self {
            max_nodes: 10,
            max_paths: 2000,
            vocab_size: 5,
            min_score: -2.0,
            max_score: 0.0,
        }
    }
}

/// Random valid word graph: strictly increasing node frames, every node on
/// a source→sink path, at most `max_paths` paths. Words are drawn from
/// `w0..w{vocab_size}` so repeats within a line are common.
pub fn random_word_graph(rng: &mut impl Rng, cfg: &RandomDagConfig, region_id: &str) -> WordGraph {
    loop {
        let n = rng.random_range(2..=cfg.max_nodes.max(2));
        let mut frame = 0u32;
        let nodes: Vec<Node> = (0..n)
            .map(|i| {
                if i > 0 {
                    frame += rng.random_range(1..=5);
                }
                Node {
                    id: i as u32,
                    frame,
                }
            })
            .collect();

        let mut pairs: BTreeSet<(usize, usize, u32)> = BTreeSet::new();
        let mut has_in = vec![false; n];
        for i in 0..n - 1 {
            let j = rng.random_range(i + 1..n.min(i + 4));
            pairs.insert((i, j, rng.random_range(0..2)));
            has_in[j] = true;
        }
        for (j, _) in has_in.iter().enumerate().skip(1).filter(|(_, &seen)| !seen) {
            pairs.insert((rng.random_range(0..j), j, 0));
        }
        for _ in 0..rng.random_range(0..=n) {
            let i = rng.random_range(0..n - 1);
            let j = rng.random_range(i + 1..n);
            pairs.insert((i, j, rng.random_range(0..3)));
        }

        let edges: Vec<Edge> = pairs
            .into_iter()
            .enumerate()
            .map(|(id, (i, j, _))| Edge {
                id: id as u32,
                from: i as u32,
                to: j as u32,
                word: format!("w{}", rng.random_range(0..cfg.vocab_size)),
                log_score: rng.random_range(cfg.min_score..=cfg.max_score),
                posterior: None,
            })
            .collect();
        let g = WordGraph::new(region_id, frame, nodes, edges)
            .expect("generator only emits valid graphs");
        if g.path_count() <= cfg.max_paths {
            return g;
        }
    }
}
