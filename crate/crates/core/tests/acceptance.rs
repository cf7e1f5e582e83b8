//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use kws_core::eval::RpCurve;
use kws_core::index::{lattice_files, RegionScores, Spot};
use kws_core::posteriorgram::segment_row;
use kws_core::relevance::naive_bayes_recurrence;
use kws_core::synth::{generate_corpus, random_word_graph, RandomDagConfig, SynthConfig};
use kws_core::{
    build_index, build_index_from_graphs, build_posteriorgram, evaluate, evaluate_one_best,
    parse_lattice, relevance_exact, relevance_frame_max, relevance_oracle, IndexConfig, Method,
    NormalizationConfig, Qrels, Span, SpotIndex, WordGraph,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_LATTICES: usize = 500;
const ORACLE_TOL: f64 = 1e-9;
const ORACLE_BUDGET: Duration = Duration::from_secs(10);
const NB_VECTORS: usize = 1000;
const NB_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-9;
const AP_EXAMPLE: f64 = 0.8333;
const AP_EXAMPLE_TOL: f64 = 1e-4;
const ORDERING_GAP: f64 = 0.02;
const ORDERING_BUDGET: Duration = Duration::from_secs(60);
const THROUGHPUT_LINES: usize = 10_000;
const THROUGHPUT_BUDGET: Duration = Duration::from_secs(30);

type Outcome = Result<String, String>;
type Check<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn random_corpus() -> Vec<WordGraph> {
    let cfg = RandomDagConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..ORACLE_LATTICES)
        .map(|i| {
            random_word_graph(&mut rng, &cfg, &format!("dag{i:04}"))
                .normalize(&NormalizationConfig::default())
                .unwrap()
        })
        .collect()
}

fn oracle_equivalence(corpus: &[WordGraph]) -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut pairs = 0usize;
    for g in corpus {
        for w in g.vocabulary() {
            let exact = relevance_exact(g, w).map_err(|e| e.to_string())?.score;
            let oracle = relevance_oracle(g, w, 2000)
                .map_err(|e| e.to_string())?
                .score;
            worst = worst.max((exact - oracle).abs());
            pairs += 1;
        }
    }
    let elapsed = start.elapsed();
    let msg = format!(
        "{} lattices, {pairs} pairs, max |exact-oracle| = {worst:.2e}, {:.2?}",
        corpus.len(),
        elapsed
    );
    if worst <= ORACLE_TOL && elapsed < ORACLE_BUDGET {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn lower_bounds(corpus: &[WordGraph]) -> Outcome {
    let mut max_excess = f64::NEG_INFINITY;
    let mut sum_deficit = 0.0f64;
    let mut default_deficit = 0.0f64;
    let mut pairs = 0usize;
    for g in corpus {
        let pg = build_posteriorgram(g).map_err(|e| e.to_string())?;
        for w in g.vocabulary() {
            let fm = relevance_frame_max(&pg, w).score;
            let ex = relevance_exact(g, w).map_err(|e| e.to_string())?.score;
            max_excess = max_excess.max(fm - ex);
            let row = pg.row(w).unwrap();
            // every positive posterior clears this threshold, so no block is dropped
            let fine: f64 = segment_row(row, 1e-12)
                .unwrap()
                .iter()
                .map(|b| b.peak)
                .sum();
            sum_deficit = sum_deficit.max(fm - fine);
            let coarse: f64 = segment_row(row, 0.05).unwrap().iter().map(|b| b.peak).sum();
            if fm >= 0.05 {
                default_deficit = default_deficit.max(fm - coarse);
            } else if coarse != 0.0 {
                return Err(format!("{w}: sub-threshold row kept a block"));
            }
            pairs += 1;
        }
    }
    let msg = format!(
        "{pairs} pairs, max(FrameMax-Exact) = {max_excess:.2e}, \
         max(FrameMax-BlockSum) = {sum_deficit:.2e} (all blocks), {default_deficit:.2e} (threshold 0.05)"
    );
    if max_excess <= 1e-9 && sum_deficit <= 0.0 && default_deficit <= 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn inclusion_exclusion(p: &[f64]) -> f64 {
    let n = p.len();
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let prod: f64 = (0..n)
            .filter(|k| mask >> k & 1 == 1)
            .map(|k| p[k])
            .product();
        if mask.count_ones() % 2 == 1 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total
}

fn recurrence_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_closed, mut worst_ie) = (0.0f64, 0.0f64);
    for _ in 0..NB_VECTORS {
        let n = rng.random_range(0..=6);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let dp = naive_bayes_recurrence(p.iter().copied());
        let closed = 1.0 - p.iter().map(|x| 1.0 - x).product::<f64>();
        worst_closed = worst_closed.max((dp - closed).abs());
        worst_ie = worst_ie.max((dp - inclusion_exclusion(&p)).abs());
    }
    let msg = format!(
        "{NB_VECTORS} vectors, max |dp-closed| = {worst_closed:.2e}, max |dp-incl/excl| = {worst_ie:.2e}"
    );
    if worst_closed <= NB_TOL && worst_ie <= NB_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn normalization(random: &[WordGraph]) -> Outcome {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut graphs: Vec<WordGraph> = lattice_files(&fixtures)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|p| {
            parse_lattice(&std::fs::read(p).unwrap())
                .and_then(|g| g.normalize(&NormalizationConfig::default()))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let fixture_count = graphs.len();
    let synth = generate_corpus(&SynthConfig {
        num_lines: 500,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    for g in synth.graphs() {
        graphs.push(g.normalize(&NormalizationConfig::default()).unwrap());
    }
    for gamma in [0.5, 2.0] {
        for g in random.iter().take(100) {
            graphs.push(
                g.clone()
                    .normalize(&NormalizationConfig::new(gamma).unwrap())
                    .unwrap(),
            );
        }
    }
    graphs.extend(random.iter().cloned());
    let mut worst = 0.0f64;
    for g in &graphs {
        worst = worst.max(build_posteriorgram(g).unwrap().max_normalization_error());
    }
    let msg = format!(
        "{} lattices ({fixture_count} fixtures), max |frame sum - 1| = {worst:.2e}",
        graphs.len()
    );
    if worst <= NORM_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn one_best_index(detected: usize) -> SpotIndex {
    let scored = (0..detected)
        .map(|i| RegionScores {
            region_id: format!("r{i}"),
            spots: vec![Spot {
                word: "w".into(),
                score: 1.0,
                span: Span::new(0, 1),
            }],
        })
        .collect();
    SpotIndex::from_scores(IndexConfig::with_method(Method::OneBest), scored).unwrap()
}

fn metric_fixtures() -> Outcome {
    let mut scored = vec![(0.9, true), (0.6, false), (0.3, true)];
    let example = RpCurve::from_scored(&mut scored, 2).ap_interpolated;

    let ix = one_best_index(4);
    let mut qrels = Qrels::default();
    for r in ["r0", "r1", "x0", "x1", "x2"] {
        qrels.insert("w", r);
    }
    let degenerate = evaluate_one_best(&ix, &["w".to_string()], &qrels)
        .map_err(|e| e.to_string())?
        .ap();

    // ties and query order on a synthetic index
    let corpus = generate_corpus(&SynthConfig {
        num_lines: 300,
        score_noise: 0.0,
        ..SynthConfig::default()
    })
    .unwrap();
    let qrels = corpus.qrels();
    let mut queries = corpus.queries();
    let ix = build_index_from_graphs(corpus.graphs(), &IndexConfig::default()).unwrap();
    let base = evaluate(&ix, &queries, &qrels).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut reorder_ok = true;
    for _ in 0..5 {
        queries.shuffle(&mut rng);
        let again = evaluate(&ix, &queries, &qrels).unwrap();
        reorder_ok &= again == base;
    }

    let mut tie_ok = true;
    let mut tied: Vec<(f64, bool)> = (0..200)
        .map(|_| (rng.random_range(0..6) as f64 / 5.0, rng.random_bool(0.4)))
        .collect();
    let relevant = tied.iter().filter(|s| s.1).count() + 3;
    let reference = RpCurve::from_scored(&mut tied.clone(), relevant);
    for _ in 0..20 {
        tied.shuffle(&mut rng);
        let c = RpCurve::from_scored(&mut tied.clone(), relevant);
        tie_ok &= c == reference;
    }

    let msg = format!(
        "hit/miss/hit AP = {example:.6}, 1-best (2,4,5) AP = {degenerate}, \
         query reorder invariant = {reorder_ok}, tie shuffle invariant = {tie_ok}"
    );
    if (example - AP_EXAMPLE).abs() <= AP_EXAMPLE_TOL && degenerate == 0.2 && reorder_ok && tie_ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn estimator_ordering() -> Outcome {
    let start = Instant::now();
    let cfg = SynthConfig {
        num_lines: 2000,
        vocab_size: 500,
        confusion_rate: 0.5,
        score_noise: 0.5,
        seed: 42,
        ..SynthConfig::default()
    };
    let corpus = generate_corpus(&cfg).map_err(|e| e.to_string())?;
    let qrels = corpus.qrels();
    let queries = corpus.queries();
    let graphs = corpus.graphs();
    let mut ap = std::collections::BTreeMap::new();
    for method in Method::ALL {
        let ix = build_index_from_graphs(graphs.clone(), &IndexConfig::with_method(method))
            .map_err(|e| e.to_string())?;
        let report = if method == Method::OneBest {
            evaluate_one_best(&ix, &queries, &qrels)
        } else {
            evaluate(&ix, &queries, &qrels)
        }
        .map_err(|e| e.to_string())?;
        ap.insert(method, report.ap());
    }
    let elapsed = start.elapsed();
    let proper = [Method::Exact, Method::NaiveBayes, Method::FrameMax].map(|m| ap[&m]);
    let hi = proper.iter().copied().fold(f64::MIN, f64::max);
    let lo = proper.iter().copied().fold(f64::MAX, f64::min);
    let sum = ap[&Method::BlockSum];
    let one_best = ap[&Method::OneBest];
    let msg = format!(
        "AP exact={:.5} nb={:.5} max={:.5} sum={sum:.5} 1best={one_best:.5}, spread {:.4}, {:.2?}",
        proper[0],
        proper[1],
        proper[2],
        hi - lo,
        elapsed
    );
    if hi - lo <= ORDERING_GAP && lo > sum && sum > one_best && elapsed < ORDERING_BUDGET {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn index_round_trip() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = generate_corpus(&SynthConfig {
        num_lines: 300,
        ..SynthConfig::default()
    })
    .unwrap();
    let mut ok = true;
    for method in Method::ALL {
        let cfg = IndexConfig::with_method(method);
        let mut graphs = corpus.graphs();
        let ix = build_index_from_graphs(graphs.clone(), &cfg).unwrap();
        let path = tmp.path().join(format!("{method}.bin"));
        kws_core::save_index(&ix, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let loaded = kws_core::load_index(&path).unwrap();
        kws_core::save_index(&loaded, &path).unwrap();
        ok &= loaded == ix && std::fs::read(&path).unwrap() == first;

        graphs.reverse();
        let reversed = build_index_from_graphs(graphs.clone(), &cfg).unwrap();
        graphs.shuffle(&mut ChaCha8Rng::seed_from_u64(method as u64));
        let shuffled = build_index_from_graphs(graphs, &cfg).unwrap();
        ok &= reversed.to_bytes() == first && shuffled.to_bytes() == first;
    }

    // directories written in opposite orders
    let lines: Vec<_> = corpus.lines.iter().take(50).collect();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    for l in &lines {
        let text = kws_core::write_lattice(&l.graph);
        std::fs::write(a.join(format!("{}.lat", l.region_id)), &text).unwrap();
    }
    for (i, l) in lines.iter().enumerate().rev() {
        let text = kws_core::write_lattice(&l.graph);
        std::fs::write(
            b.join(format!("{:03}_{}.lat", lines.len() - i, l.region_id)),
            &text,
        )
        .unwrap();
    }
    let cfg = IndexConfig::default();
    let ia = build_index(&a, &cfg).unwrap().index.to_bytes();
    let ib = build_index(&b, &cfg).unwrap().index.to_bytes();
    ok &= ia == ib;

    let msg = format!("5 methods x 300 lines + 50 files, byte-identical = {ok}");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn throughput() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = SynthConfig {
        num_lines: THROUGHPUT_LINES,
        confusion_rate: 1.0,
        seed: 5,
        ..SynthConfig::default()
    };
    let out = kws_core::synth::generate(&cfg, tmp.path()).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let built =
        build_index(&out.lattice_dir, &IndexConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let stats = built.index.stats();
    let msg = format!(
        "{} lattices from disk, {} spots, {:.2?} on {} threads",
        stats.regions,
        stats.total_spots,
        elapsed,
        rayon::current_num_threads()
    );
    if stats.regions == THROUGHPUT_LINES && built.failures.is_empty() && elapsed < THROUGHPUT_BUDGET
    {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let random = random_corpus();
    let checks: Vec<Check> = vec![
        (
            "oracle equivalence",
            Box::new(|| oracle_equivalence(&random)),
        ),
        ("lower bounds", Box::new(|| lower_bounds(&random))),
        ("recurrence identity", Box::new(recurrence_identity)),
        ("normalization", Box::new(|| normalization(&random))),
        ("metric fixtures", Box::new(metric_fixtures)),
        ("estimator ordering", Box::new(estimator_ordering)),
        ("index round-trip", Box::new(index_round_trip)),
        ("throughput", Box::new(throughput)),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(msg) => println!("PASS  {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
