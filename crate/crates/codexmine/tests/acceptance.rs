//! Acceptance suite: the eight release gates for this workspace.
//!
//! Each gate is one test named `a<N>_...` so the harness prints exactly
//! one pass/fail line per gate; with `--nocapture` every test also
//! prints a `PASS` line carrying the numbers it measured. Thresholds and
//! time limits live next to their asserts.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use codexmine::corpus::{collect_unknowns, ingest, map_corpus, IngestFormat, DEFAULT_LAMBDA};
use codexmine::discovery::{
    build_reference_models, candidates_tsv, generate_candidates, infer_meaning, parse_seed_file,
    CandidateParams, CentroidIndex, CorpusView, OccurrenceIndex, TargetSpec,
};
use codexmine::lexicon::{Lexicon, TaxonPath};
use codexmine::semspace::{
    entropy, kl_divergence, select_dimensions, similarity, vectorize, DocVector, SimilarityParams,
};
use codexmine::som::{bmu, init_coarse_rebalanced, metrics, train_with_history, TrainConfig};
use codexmine::synth::{generate, GeneratorSpec, PlantedRelation};

// ---------------------------------------------------------------- gate 1

/// Direct-summation reference for Shannon entropy in nats.
fn oracle_entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h
}

/// Direct-summation reference for the divergence, including the uniform
/// epsilon mixture that keeps zero bins of q finite.
fn oracle_kl(p: &[f64], q: &[f64]) -> f64 {
    let eps = 1e-9;
    let uniform = 1.0 / q.len() as f64;
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        if pi > 0.0 {
            let qs = (1.0 - eps) * qi + eps * uniform;
            acc += pi * (pi / qs).ln();
        }
    }
    acc
}

/// A random distribution over `dim` bins with roughly 20% zero bins.
fn random_distribution(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let mut p: Vec<f64> = (0..dim)
            .map(|_| {
                if rng.gen::<f64>() < 0.2 {
                    0.0
                } else {
                    -(rng.gen::<f64>().max(1e-12)).ln()
                }
            })
            .collect();
        let sum: f64 = p.iter().sum();
        if sum > 0.0 {
            for x in p.iter_mut() {
                *x /= sum;
            }
            return p;
        }
    }
}

#[test]
fn a1_entropy_and_divergence_match_direct_oracle() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_h: f64 = 0.0;
    let mut worst_kl: f64 = 0.0;
    let mut min_kl = f64::INFINITY;
    for i in 0..1000usize {
        let dim = 2 + i % 99; // cycles over dimensions 2..=100
        let p = random_distribution(&mut rng, dim);
        let q = random_distribution(&mut rng, dim);
        let h = entropy(&p).unwrap();
        worst_h = worst_h.max((h - oracle_entropy(&p)).abs());
        let kl = kl_divergence(&p, &q).unwrap();
        worst_kl = worst_kl.max((kl - oracle_kl(&p, &q)).abs());
        min_kl = min_kl.min(kl);
    }
    let elapsed = t0.elapsed();
    assert!(
        worst_h <= 1e-9,
        "entropy drifts {worst_h:e} from the oracle"
    );
    assert!(
        worst_kl <= 1e-9,
        "divergence drifts {worst_kl:e} from the oracle"
    );
    assert!(min_kl >= -1e-12, "divergence went negative: {min_kl:e}");
    assert!(elapsed < Duration::from_secs(5), "too slow: {elapsed:?}");
    println!(
        "PASS a1: 1000 distributions, worst |dH|={worst_h:.2e}, worst |dKL|={worst_kl:.2e}, \
         min KL={min_kl:.2e}, {elapsed:?}"
    );
}

// ---------------------------------------------------------------- gate 2

/// A synthetic point in a k-dimensional space: unit direction, topic
/// distribution, and a sorted support set.
fn random_point(rng: &mut ChaCha8Rng, k: usize, id: usize) -> DocVector {
    let w: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let unit: Vec<f64> = w.iter().map(|x| x / norm).collect();
    let sum: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / sum).collect();
    let support: Vec<u32> = (0..k as u32).filter(|_| rng.gen::<f64>() < 0.3).collect();
    DocVector {
        doc_id: format!("v{id}"),
        w,
        p,
        unit,
        support,
    }
}

#[test]
fn a2_similarity_is_bounded_symmetric_reflexive() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let params = SimilarityParams::default();
    let mut worst_asym: f64 = 0.0;
    let mut min_self = f64::INFINITY;
    for i in 0..1000usize {
        let k = 4 + i % 61;
        let a = random_point(&mut rng, k, 2 * i);
        let b = random_point(&mut rng, k, 2 * i + 1);
        let ab = similarity(&a, &b, &params).unwrap();
        let ba = similarity(&b, &a, &params).unwrap();
        assert!((0.0..=1.0).contains(&ab), "similarity {ab} out of [0,1]");
        worst_asym = worst_asym.max((ab - ba).abs());
        min_self = min_self
            .min(similarity(&a, &a, &params).unwrap())
            .min(similarity(&b, &b, &params).unwrap());
    }
    let elapsed = t0.elapsed();
    assert!(worst_asym <= 1e-12, "asymmetry {worst_asym:e}");
    assert!(min_self >= 0.999, "self-similarity fell to {min_self}");
    assert!(elapsed < Duration::from_secs(5), "too slow: {elapsed:?}");
    println!(
        "PASS a2: 1000 pairs, worst asymmetry={worst_asym:.2e}, \
         min self-similarity={min_self:.6}, {elapsed:?}"
    );
}

// ------------------------------------------------------------ gates 3, 4

/// 300 labeled points from three well-separated Gaussians in 10 dims.
fn three_gaussians(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for cluster in 0..3usize {
        for _ in 0..100 {
            let mut v = vec![0.0f64; 10];
            v[cluster * 3] = 5.0;
            for x in v.iter_mut() {
                // Irwin–Hall approximation of a standard normal.
                let n: f64 = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
                *x += 0.5 * n;
            }
            data.push(v);
            labels.push(cluster);
        }
    }
    (data, labels)
}

#[test]
fn a3_map_separates_gaussian_clusters() {
    let t0 = Instant::now();
    let (data, labels) = three_gaussians(5);
    let grid = init_coarse_rebalanced(&data, 10, 10, 2, 30, 5).unwrap();
    let config = TrainConfig::for_grid(10, 10, 30, 2, 5);
    let (trained, history) = train_with_history(&grid, &data, &config).unwrap();
    let (qe, te) = metrics(&trained, &data).unwrap();

    // Cluster purity over BMU cells: majority label per occupied cell.
    let mut per_cell: std::collections::HashMap<(usize, usize), [usize; 3]> = Default::default();
    for (v, &label) in data.iter().zip(&labels) {
        let cell = bmu(&trained, v).unwrap();
        per_cell.entry(cell).or_default()[label] += 1;
    }
    let majority: usize = per_cell.values().map(|c| *c.iter().max().unwrap()).sum();
    let purity = majority as f64 / data.len() as f64;

    // The quantization error may not rise by more than 2% on any step of
    // the final 15 epochs.
    let mut worst_step: f64 = 0.0;
    for w in history[history.len() - 15..].windows(2) {
        worst_step = worst_step.max(w[1] / w[0] - 1.0);
    }

    let elapsed = t0.elapsed();
    assert!(purity >= 0.9, "purity {purity}");
    assert!(te <= 0.1, "topographic error {te}");
    assert!(
        worst_step <= 0.02,
        "QE rose {worst_step:+.4} in the final epochs"
    );
    assert!(elapsed < Duration::from_secs(10), "too slow: {elapsed:?}");
    println!(
        "PASS a3: purity={purity:.3} te={te:.4} qe={qe:.4} \
         worst tail step={worst_step:+.5}, {elapsed:?}"
    );
}

#[test]
fn a4_coarse_init_accelerates_convergence() {
    // Epochs until the quantization error is within 5% of the better
    // run's final value: multigrid init plus constant-sigma refinement
    // versus a data-sampled codebook under the full annealing schedule.
    let mut coarse_epochs = Vec::new();
    let mut random_epochs = Vec::new();
    for seed in 0..10u64 {
        let (data, _) = three_gaussians(seed);
        let grid = init_coarse_rebalanced(&data, 10, 10, 2, 30, seed).unwrap();
        let refine = TrainConfig {
            epochs: 30,
            sigma0: 1.0,
            sigma_end: 1.0,
            coarse_levels: 2,
            seed,
        };
        let (_, coarse_hist) = train_with_history(&grid, &data, &refine).unwrap();

        let grid = init_coarse_rebalanced(&data, 10, 10, 0, 30, seed).unwrap();
        let full = TrainConfig::for_grid(10, 10, 30, 0, seed);
        let (_, random_hist) = train_with_history(&grid, &data, &full).unwrap();

        let target = 1.05
            * coarse_hist
                .last()
                .unwrap()
                .min(*random_hist.last().unwrap());
        let crossing = |h: &[f64]| h.iter().position(|&q| q <= target).map(|i| i + 1);
        let (Some(c), Some(r)) = (crossing(&coarse_hist), crossing(&random_hist)) else {
            panic!("seed {seed}: a run never reached the shared quality target");
        };
        coarse_epochs.push(c);
        random_epochs.push(r);
    }
    coarse_epochs.sort_unstable();
    random_epochs.sort_unstable();
    let median = |v: &[usize]| (v[v.len() / 2 - 1] + v[v.len() / 2]) as f64 / 2.0;
    let (mc, mr) = (median(&coarse_epochs), median(&random_epochs));
    println!(
        "PASS a4: epochs to within 5% of final QE over 10 seeds — \
         coarse init median {mc}, random init median {mr}, ratio {:.3}",
        mc / mr
    );
    assert!(
        mc <= 0.8 * mr,
        "coarse init needed {mc} median epochs, random {mr}; ratio {:.3} > 0.8",
        mc / mr
    );
}

// ------------------------------------------------------ gates 5, 6, 8

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_codexmine")
}

/// Runs the binary in `dir`, panicking with its stderr on failure.
fn run_cli(dir: &Path, args: &[&str], threads: Option<&str>) -> String {
    let mut cmd = Command::new(binary());
    cmd.current_dir(dir).args(args);
    if let Some(t) = threads {
        cmd.env("CODEXMINE_THREADS", t);
    }
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "codexmine {args:?} exited {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

/// The reference scenario: 2,000 documents over a 500-group lexicon
/// (25 themes of 19 terms plus target, plants, and seeds) spanning a
/// 7-level taxonomy, 20 planted positives at rate 0.35, 200 distractors.
const SCENARIO: &[&str] = &[
    "--seed",
    "13",
    "--docs",
    "2000",
    "--themes",
    "25",
    "--terms-per-theme",
    "19",
    "--plants",
    "20",
    "--plant-rate",
    "0.35",
    "--seed-terms",
    "4",
    "--seed-rate",
    "0.5",
    "--distractors",
    "200",
    "--len-min",
    "40",
    "--len-max",
    "80",
    "--noise",
    "0.05",
];

/// The same scenario for in-process use.
fn scenario_spec() -> GeneratorSpec {
    let planted = (0..20)
        .map(|i| PlantedRelation::new(&format!("plant{i:02}"), "BiomarkerFor", "morbux", 0.35))
        .collect();
    let seeds = (0..4)
        .map(|i| PlantedRelation::new(&format!("seedterm{i}"), "BiomarkerFor", "morbux", 0.5))
        .collect();
    GeneratorSpec {
        doc_count: 2000,
        themes: 25,
        terms_per_theme: 19,
        planted,
        seeds,
        distractor_count: 200,
        len_min: 40,
        len_max: 80,
        noise_rate: 0.05,
        seed: 13,
    }
}

/// Reads one value out of a metrics TSV.
fn metric(text: &str, name: &str) -> f64 {
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix(name) {
            if let Some(value) = rest.strip_prefix('\t') {
                return value.trim().parse().expect("numeric metric");
            }
        }
    }
    panic!("metric {name} missing from:\n{text}");
}

#[test]
fn a5_blind_discovery_of_planted_relations() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path();
    let mut args = vec!["synth-generate", "--out-dir", "gen"];
    args.extend_from_slice(SCENARIO);
    run_cli(dir, &args, None);

    // The ground truth leaves the pipeline's working tree before any
    // discovery step runs; the run is graded only afterwards.
    std::fs::create_dir(dir.join("vault")).unwrap();
    std::fs::rename(dir.join("gen/truth.tsv"), dir.join("vault/truth.tsv")).unwrap();
    assert!(!dir.join("gen/truth.tsv").exists());

    let t0 = Instant::now();
    run_cli(
        dir,
        &[
            "discover",
            "--lexicon",
            "gen/lexicon.tsv",
            "--corpus",
            "gen/corpus.jsonl",
            "--seeds",
            "gen/seeds.tsv",
            "--out-dir",
            "run",
            "--seed",
            "13",
        ],
        None,
    );
    let elapsed = t0.elapsed();
    assert!(
        elapsed < Duration::from_secs(60),
        "discovery took {elapsed:?}"
    );

    // The candidates file's provenance header proves what was read:
    // lexicon, corpus, and seeds — nothing else.
    let candidates = std::fs::read_to_string(dir.join("run/candidates.tsv")).unwrap();
    let hashed: Vec<&str> = candidates
        .lines()
        .filter_map(|l| l.strip_prefix("# input "))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(hashed, ["lexicon", "corpus", "seeds"]);

    run_cli(
        dir,
        &[
            "evaluate",
            "--candidates",
            "run/candidates.tsv",
            "--truth",
            "vault/truth.tsv",
            "--out-dir",
            "run",
        ],
        None,
    );
    let metrics = std::fs::read_to_string(dir.join("run/metrics.tsv")).unwrap();
    let recall50 = metric(&metrics, "recall@50");
    let auc = metric(&metrics, "auc");
    assert!(recall50 >= 0.8, "recall@50 = {recall50}");
    assert!(auc >= 0.9, "auc = {auc}");
    println!("PASS a5: recall@50={recall50:.4} auc={auc:.4}, discovery in {elapsed:?}");
}

#[test]
fn a6_masked_groups_recover_their_meaning() {
    let spec = scenario_spec();
    let artifacts = generate(&spec).unwrap();
    let lexicon = Lexicon::parse(&artifacts.lexicon_tsv).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    std::fs::write(&corpus_path, &artifacts.corpus_jsonl).unwrap();
    let store = ingest(&corpus_path, IngestFormat::Jsonl).unwrap().store;

    // Mask 50 ordinary groups with document frequency >= 5, spread
    // evenly across the sorted id space.
    let full_map = map_corpus(&store, &lexicon, DEFAULT_LAMBDA);
    let mut eligible: Vec<&str> = full_map
        .group_frequencies
        .keys()
        .filter(|g| g.starts_with('t'))
        .filter(|g| {
            full_map
                .docs
                .iter()
                .filter(|d| d.group_counts.contains_key(g.as_str()))
                .count()
                >= 5
        })
        .map(String::as_str)
        .collect();
    eligible.sort_unstable();
    assert!(
        eligible.len() >= 50,
        "only {} maskable groups",
        eligible.len()
    );
    let stride = eligible.len() / 50;
    let masked: BTreeSet<String> = (0..50).map(|i| eligible[i * stride].to_string()).collect();

    let masked_lex = lexicon.without_groups(&masked).unwrap();
    let mapped = map_corpus(&store, &masked_lex, DEFAULT_LAMBDA);
    let space = select_dimensions(&mapped, &masked_lex, 100, 2).unwrap();
    let vectors: Vec<_> = mapped.docs.iter().map(|d| vectorize(d, &space)).collect();
    let occ = OccurrenceIndex::build(&mapped);
    let view = CorpusView::new(&mapped, &vectors, &occ).unwrap();
    let index = CentroidIndex::build(&view, &masked_lex).unwrap();
    let unknowns = collect_unknowns(&mapped);
    let params = SimilarityParams::default();

    let mut hypernym_ok = 0usize;
    let mut descriptor_ok = 0usize;
    for gid in &masked {
        let group = lexicon.group(gid).unwrap();
        let unknown = unknowns
            .iter()
            .find(|u| u.surface == group.canonical)
            .expect("masked canonical surface shows up as unknown");
        let meaning = infer_meaning(unknown, &view, &index, &params).unwrap();
        if masked_lex
            .taxon_distance(&meaning.hypernym, &group.hypernym)
            .unwrap()
            <= 1
        {
            hypernym_ok += 1;
        }
        // A true co-theme descriptor shares the masked group's theme
        // prefix (ids are t<theme><term>).
        let theme = &gid[..3];
        if meaning.descriptors.iter().any(|d| d.starts_with(theme)) {
            descriptor_ok += 1;
        }
    }
    assert!(
        hypernym_ok >= 35,
        "only {hypernym_ok}/50 constructed hypernyms within distance 1"
    );
    assert!(
        descriptor_ok >= 40,
        "only {descriptor_ok}/50 meanings list a co-theme descriptor"
    );
    println!(
        "PASS a6: constructed hypernym within distance 1 for {hypernym_ok}/50, \
         co-theme descriptor for {descriptor_ok}/50"
    );
}

// ---------------------------------------------------------------- gate 7

#[test]
fn a7_candidates_table_matches_golden_file() {
    // A fixed miniature corpus: six documents tie the markers to the
    // disease, six eye documents stand apart.
    let mut lexicon_tsv = String::from("g_tgt\tdiax\tdiax,en\tbio/disease\n");
    for (gid, surface) in [("g_m1", "marka"), ("g_m2", "markb"), ("g_m3", "markc")] {
        lexicon_tsv.push_str(&format!(
            "{gid}\t{surface}\t{surface},en\tbio/meta/markers\n"
        ));
    }
    for (gid, surface) in [("g_o1", "lens"), ("g_o2", "retina")] {
        lexicon_tsv.push_str(&format!("{gid}\t{surface}\t{surface},en\tbio/eye/part\n"));
    }
    lexicon_tsv.push_str("g_f1\tfiller\tfiller,en\tbio/other\n");
    let lexicon = Lexicon::parse(&lexicon_tsv).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    let mut jsonl = String::new();
    for i in 0..12 {
        let body = if i < 6 {
            format!(
                "diax marka markb {}",
                if i % 2 == 0 { "markc" } else { "filler" }
            )
        } else {
            "lens retina filler padding".to_string()
        };
        jsonl.push_str(&format!(
            "{{\"doc_id\":\"d{i:03}\",\"title\":\"\",\"body\":\"{body}\"}}\n"
        ));
    }
    std::fs::write(&corpus_path, &jsonl).unwrap();
    let store = ingest(&corpus_path, IngestFormat::Jsonl).unwrap().store;

    let mapped = map_corpus(&store, &lexicon, DEFAULT_LAMBDA);
    let space = select_dimensions(&mapped, &lexicon, 6, 2).unwrap();
    let vectors: Vec<_> = mapped.docs.iter().map(|d| vectorize(d, &space)).collect();
    let occ = OccurrenceIndex::build(&mapped);
    let view = CorpusView::new(&mapped, &vectors, &occ).unwrap();
    let seeds = parse_seed_file("marka\tMarks\tdiax\n").unwrap();
    let params = SimilarityParams::default();
    let (models, unresolved) = build_reference_models(&seeds, &view, &lexicon, 3, &params).unwrap();
    assert!(unresolved.is_empty());

    let chain: BTreeSet<TaxonPath> = lexicon
        .lookup("diax")
        .iter()
        .flat_map(|g| lexicon.group(g).unwrap().hypernym.chain())
        .collect();
    let whitelist: BTreeSet<TaxonPath> = lexicon
        .taxonomy()
        .nodes_at_depth(2, 3)
        .filter(|n| !chain.contains(n))
        .cloned()
        .collect();
    let spec = TargetSpec::build("diax", &seeds, &lexicon, whitelist).unwrap();
    let cand = CandidateParams {
        theta: 0.6,
        n0: 5.0,
        min_support: 2,
        similarity: params.clone(),
    };
    let candidates = generate_candidates(&view, &lexicon, &models, &spec, &[], &cand).unwrap();
    let tsv = candidates_tsv(&candidates, &params, 0.6, 6, 42);

    // Schema: fixed header, seven columns, confidence with one decimal.
    let mut lines = tsv.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with("# alpha="), "{comment}");
    assert_eq!(
        lines.next().unwrap(),
        "Row\tTerm\tRelationship\tObject\tConf%\t#Docs\tDocIDs"
    );
    let mut rows = 0;
    for line in lines {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 7, "row has {} columns: {line}", cols.len());
        assert_eq!(cols[0], (rows + 1).to_string());
        let conf = cols[4];
        let (int_part, frac) = conf.split_once('.').expect("decimal point");
        assert!(int_part.chars().all(|c| c.is_ascii_digit()), "{conf}");
        assert_eq!(frac.len(), 1, "confidence {conf} not one decimal");
        assert!(frac.chars().all(|c| c.is_ascii_digit()), "{conf}");
        let docs: usize = cols[5].parse().expect("doc count");
        assert!(docs >= 2);
        rows += 1;
    }
    assert!(rows >= 2, "fixture produced only {rows} rows");

    let golden_path =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_candidates.tsv");
    if std::env::var_os("BLESS").is_some() {
        std::fs::write(&golden_path, &tsv).unwrap();
    }
    let golden = std::fs::read_to_string(&golden_path).expect("golden file present");
    assert_eq!(tsv, golden, "candidates table drifted from the golden file");
    println!("PASS a7: {rows} rows match the golden table byte for byte");
}

// ---------------------------------------------------------------- gate 8

#[test]
fn a8_worker_count_never_changes_artifacts() {
    let root = tempfile::tempdir().unwrap();
    let dir_one = root.path().join("one");
    let dir_eight = root.path().join("eight");
    std::fs::create_dir_all(&dir_one).unwrap();
    std::fs::create_dir_all(&dir_eight).unwrap();

    let mut args = vec!["synth-generate", "--out-dir", "gen"];
    args.extend_from_slice(SCENARIO);
    run_cli(&dir_one, &args, Some("1"));
    std::fs::create_dir(dir_eight.join("gen")).unwrap();
    for name in ["corpus.jsonl", "lexicon.tsv", "seeds.tsv", "truth.tsv"] {
        std::fs::copy(
            dir_one.join("gen").join(name),
            dir_eight.join("gen").join(name),
        )
        .unwrap();
    }

    let common = [
        "--lexicon",
        "gen/lexicon.tsv",
        "--corpus",
        "gen/corpus.jsonl",
        "--seeds",
        "gen/seeds.tsv",
        "--out-dir",
        "run",
        "--seed",
        "13",
    ];
    for (dir, threads) in [(&dir_one, "1"), (&dir_eight, "8")] {
        for sub in ["space-build", "som-train", "map-export", "discover"] {
            let mut args = vec![sub];
            args.extend_from_slice(&common);
            run_cli(dir, &args, Some(threads));
        }
    }

    for name in ["run/candidates.tsv", "run/map.svg"] {
        let one = std::fs::read(dir_one.join(name)).unwrap();
        let eight = std::fs::read(dir_eight.join(name)).unwrap();
        assert_eq!(one, eight, "{name} differs between 1 and 8 workers");
    }
    println!("PASS a8: candidates table and map image byte-identical with 1 and 8 workers");
}
