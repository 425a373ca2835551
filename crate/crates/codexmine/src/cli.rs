//! Command-line interface: argument parsing, subcommand dispatch, and the
//! artifact files each stage reads and writes.
//!
//! Exit codes: 0 on success, 1 for anything wrong with the inputs (bad
//! flags, unreadable files, malformed data), 2 for a broken internal
//! invariant. No subcommand modifies its input files, and identical
//! configuration plus identical inputs produce byte-identical outputs
//! regardless of the worker count.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{artifact_header, artifact_header_xml, RunConfig};
use crate::corpus::{self, collect_unknowns, map_corpus, IngestFormat, DEFAULT_LAMBDA};
use crate::discovery::{
    build_reference_models, candidates_tsv, generate_candidates, infer_meaning, inferred_tsv,
    parse_candidates_tsv, parse_seed_file, CandidateParams, CentroidIndex, CorpusView,
    DiscoveryError, InferredMeaning, OccurrenceIndex, TargetSpec,
};
use crate::lexicon::{Lexicon, TaxonPath};
use crate::semspace::{select_dimensions, vectorize, DocVector, SemanticSpace, SimilarityParams};
use crate::som::{self, build_map, init_coarse_rebalanced, SomGrid, TrainConfig};
use crate::synth::{
    evaluate, generate, metrics_text, metrics_tsv, parse_truth_tsv, truth_tsv, GeneratorSpec,
    PlantedRelation,
};

/// Failures split by exit code: input problems exit 1, broken internal
/// invariants exit 2.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Internal(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "{msg}"),
            CliError::Internal(msg) => write!(f, "internal invariant violated: {msg}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

fn input(e: impl fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn internal(e: impl fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

#[derive(Parser, Debug)]
#[command(
    name = "codexmine",
    version,
    about = "Batch knowledge discovery over document corpora",
    after_help = "Settings resolve in three layers: built-in defaults, then the \
--config file of flat \"key = value\" lines, then command-line flags. \
Worker count comes from --threads or CODEXMINE_THREADS and never changes \
any result. Every output file starts with a comment header recording the \
subcommand, the full configuration, and a SHA-256 hash per input file."
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Cmd,
}

/// Every flag that overrides a config-file key, plus --config itself.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Config file of flat "key = value" lines; flags override it.
    #[arg(long, global = true, value_name = "FILE", overrides_with = "config")]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores). Never affects results.
    #[arg(long, global = true, value_name = "N", overrides_with = "threads")]
    threads: Option<usize>,
    /// Semantic space dimensionality (default 100, at least 2).
    #[arg(long, global = true, value_name = "INT", overrides_with = "k")]
    k: Option<usize>,
    /// Cosine weight; alpha+beta+gamma must sum to 1 (default 0.5).
    #[arg(long, global = true, value_name = "FLOAT", overrides_with = "alpha")]
    alpha: Option<f64>,
    /// Divergence weight (default 0.25).
    #[arg(long, global = true, value_name = "FLOAT", overrides_with = "beta")]
    beta: Option<f64>,
    /// Taxonomy-overlap weight (default 0.25).
    #[arg(long, global = true, value_name = "FLOAT", overrides_with = "gamma")]
    gamma: Option<f64>,
    /// Topics kept per vector for the divergence term (default 10).
    #[arg(
        long = "top-m",
        global = true,
        value_name = "INT",
        overrides_with = "top_m"
    )]
    top_m: Option<usize>,
    /// Candidate qualification threshold, strictly between 0 and 1
    /// (default 0.6).
    #[arg(long, global = true, value_name = "FLOAT", overrides_with = "theta")]
    theta: Option<f64>,
    /// Support softening constant in the confidence score (default 5).
    #[arg(long, global = true, value_name = "FLOAT", overrides_with = "n0")]
    n0: Option<f64>,
    /// Minimum document frequency for a dimension (default 2).
    #[arg(
        long = "df-min",
        global = true,
        value_name = "INT",
        overrides_with = "df_min"
    )]
    df_min: Option<usize>,
    /// Map grid rows (default 10, at least 2).
    #[arg(
        long = "grid-rows",
        global = true,
        value_name = "INT",
        overrides_with = "grid_rows"
    )]
    grid_rows: Option<usize>,
    /// Map grid columns (default 10, at least 2).
    #[arg(
        long = "grid-cols",
        global = true,
        value_name = "INT",
        overrides_with = "grid_cols"
    )]
    grid_cols: Option<usize>,
    /// Training epochs at full grid resolution (default 30).
    #[arg(long, global = true, value_name = "INT", overrides_with = "epochs")]
    epochs: Option<usize>,
    /// Coarse grids trained before the full one, 0..=8 (default 2).
    #[arg(
        long = "coarse-levels",
        global = true,
        value_name = "INT",
        overrides_with = "coarse_levels"
    )]
    coarse_levels: Option<usize>,
    /// Master seed for everything randomized (default 42).
    #[arg(long, global = true, value_name = "INT", overrides_with = "seed")]
    seed: Option<u64>,
    /// Support documents a candidate needs (default 2).
    #[arg(
        long = "min-support",
        global = true,
        value_name = "INT",
        overrides_with = "min_support"
    )]
    min_support: Option<usize>,
    /// Clusters per (relationship, target) reference model (default 3).
    #[arg(
        long = "clusters-per-model",
        global = true,
        value_name = "INT",
        overrides_with = "clusters_per_model"
    )]
    clusters_per_model: Option<usize>,
    /// Comma-separated taxonomy paths candidates must reach. Default:
    /// every depth-2..3 node off the target's own hypernym chain.
    #[arg(
        long,
        global = true,
        value_name = "PATHS",
        overrides_with = "whitelist"
    )]
    whitelist: Option<String>,
    /// Lexicon TSV path.
    #[arg(long, global = true, value_name = "FILE", overrides_with = "lexicon")]
    lexicon: Option<String>,
    /// Corpus path (JSONL unless a subcommand says otherwise).
    #[arg(long, global = true, value_name = "PATH", overrides_with = "corpus")]
    corpus: Option<String>,
    /// Seed-relation TSV path.
    #[arg(long, global = true, value_name = "FILE", overrides_with = "seeds")]
    seeds: Option<String>,
    /// Directory artifacts are written to (and read back from).
    #[arg(
        long = "out-dir",
        global = true,
        value_name = "DIR",
        overrides_with = "out_dir"
    )]
    out_dir: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Parse a lexicon file and report its size.
    LexiconValidate,
    /// Read a raw corpus, skip malformed records, write normalized JSONL.
    Ingest {
        /// Input format: jsonl, pubmed_tsv, or textdir.
        #[arg(long, default_value = "jsonl")]
        format: String,
    },
    /// Select the space dimensions and write the manifest.
    SpaceBuild,
    /// Train the document map and write its codebook.
    SomTrain,
    /// Assign documents to map cells; write the cell table and an SVG.
    MapExport,
    /// Construct meanings for unknown terms and write the report.
    Infer,
    /// Run the discovery steps over a prebuilt space and write ranked
    /// candidates.
    Discover {
        /// Ground-truth TSV; when given, metrics are computed and written.
        #[arg(long, value_name = "FILE")]
        truth: Option<PathBuf>,
    },
    /// Generate a synthetic corpus, lexicon, seed file, and ground truth.
    SynthGenerate {
        /// Documents to generate.
        #[arg(long, default_value_t = 2000)]
        docs: usize,
        /// Themes; theme 0 hosts the target.
        #[arg(long, default_value_t = 25)]
        themes: usize,
        /// Ordinary vocabulary terms per theme.
        #[arg(long = "terms-per-theme", default_value_t = 19)]
        terms_per_theme: usize,
        /// Planted relations that become ground-truth positives.
        #[arg(long, default_value_t = 20)]
        plants: usize,
        /// Probability a target document carries each planted term.
        #[arg(long = "plant-rate", default_value_t = 0.35)]
        plant_rate: f64,
        /// Relations planted the same way but emitted as seeds.
        #[arg(long = "seed-terms", default_value_t = 4)]
        seed_terms: usize,
        /// Probability a target document carries each seed term.
        #[arg(long = "seed-rate", default_value_t = 0.5)]
        seed_rate: f64,
        /// Relationship label for plants and seeds.
        #[arg(long, default_value = "BiomarkerFor")]
        relationship: String,
        /// Target label (single token).
        #[arg(long, default_value = "morbux")]
        target: String,
        /// Distractor terms listed in the truth file.
        #[arg(long, default_value_t = 200)]
        distractors: usize,
        /// Minimum document length in tokens.
        #[arg(long = "len-min", default_value_t = 40)]
        len_min: usize,
        /// Maximum document length in tokens.
        #[arg(long = "len-max", default_value_t = 80)]
        len_max: usize,
        /// Probability a token is uniform noise instead of a theme draw.
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
    },
    /// Score a candidates file against ground truth.
    Evaluate {
        /// Ranked candidates TSV, as written by discover.
        #[arg(long, value_name = "FILE")]
        candidates: PathBuf,
        /// Ground-truth TSV, as written by synth-generate.
        #[arg(long, value_name = "FILE")]
        truth: PathBuf,
    },
}

/// Entry point behind `main`; returns the process exit code.
pub fn run() -> i32 {
    match try_run(std::env::args_os()) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

/// Parses and dispatches one invocation. Kept separate from `run` so
/// tests can drive the CLI in-process.
pub fn try_run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(CliError::Input(e.to_string()));
        }
    };
    init_threads(cli.overrides.threads)?;
    let cfg = resolve_config(&cli.overrides)?;
    match cli.command {
        Cmd::LexiconValidate => cmd_lexicon_validate(&cfg),
        Cmd::Ingest { format } => cmd_ingest(&cfg, &format),
        Cmd::SpaceBuild => cmd_space_build(&cfg),
        Cmd::SomTrain => cmd_som_train(&cfg),
        Cmd::MapExport => cmd_map_export(&cfg),
        Cmd::Infer => cmd_infer(&cfg),
        Cmd::Discover { truth } => cmd_discover(&cfg, truth.as_deref()),
        Cmd::SynthGenerate {
            docs,
            themes,
            terms_per_theme,
            plants,
            plant_rate,
            seed_terms,
            seed_rate,
            relationship,
            target,
            distractors,
            len_min,
            len_max,
            noise,
        } => {
            let spec = synth_spec(
                &cfg,
                docs,
                themes,
                terms_per_theme,
                plants,
                plant_rate,
                seed_terms,
                seed_rate,
                &relationship,
                &target,
                distractors,
                len_min,
                len_max,
                noise,
            );
            cmd_synth_generate(&cfg, &spec)
        }
        Cmd::Evaluate { candidates, truth } => cmd_evaluate(&cfg, &candidates, &truth),
    }
}

/// Sizes the global worker pool from --threads or CODEXMINE_THREADS.
/// Results never depend on it; repeat calls keep the first pool.
fn init_threads(flag: Option<usize>) -> Result<(), CliError> {
    let requested = match flag {
        Some(n) => Some(n),
        None => match std::env::var("CODEXMINE_THREADS") {
            Ok(raw) => Some(raw.parse().map_err(|_| {
                CliError::Input(format!(
                    "CODEXMINE_THREADS: invalid value \"{raw}\" (expected a positive integer)"
                ))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = requested {
        if n == 0 {
            return Err(CliError::Input(
                "threads: 0 is not a valid worker count (expected at least 1)".to_string(),
            ));
        }
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Defaults, then the config file, then flags; validated at the end.
fn resolve_config(ov: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &ov.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
        cfg.apply_file(&text).map_err(input)?;
    }
    if let Some(v) = ov.k {
        cfg.k = v;
    }
    if let Some(v) = ov.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = ov.beta {
        cfg.beta = v;
    }
    if let Some(v) = ov.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = ov.top_m {
        cfg.top_m = v;
    }
    if let Some(v) = ov.theta {
        cfg.theta = v;
    }
    if let Some(v) = ov.n0 {
        cfg.n0 = v;
    }
    if let Some(v) = ov.df_min {
        cfg.df_min = v;
    }
    if let Some(v) = ov.grid_rows {
        cfg.grid_rows = v;
    }
    if let Some(v) = ov.grid_cols {
        cfg.grid_cols = v;
    }
    if let Some(v) = ov.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = ov.coarse_levels {
        cfg.coarse_levels = v;
    }
    if let Some(v) = ov.seed {
        cfg.seed = v;
    }
    if let Some(v) = ov.min_support {
        cfg.min_support = v;
    }
    if let Some(v) = ov.clusters_per_model {
        cfg.clusters_per_model = v;
    }
    if let Some(v) = &ov.whitelist {
        cfg.whitelist = v.clone();
    }
    if let Some(v) = &ov.lexicon {
        cfg.lexicon = v.clone();
    }
    if let Some(v) = &ov.corpus {
        cfg.corpus = v.clone();
    }
    if let Some(v) = &ov.seeds {
        cfg.seeds = v.clone();
    }
    if let Some(v) = &ov.out_dir {
        cfg.out_dir = v.clone();
    }
    cfg.validate().map_err(input)?;
    Ok(cfg)
}

impl RunConfig {
    fn similarity(&self) -> SimilarityParams {
        SimilarityParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            top_m: self.top_m,
        }
    }
}

/// Fails with the flag and config-key names when a required path is unset.
fn require_path<'a>(value: &'a str, flag: &str, key: &str) -> Result<&'a Path, CliError> {
    if value.is_empty() {
        return Err(CliError::Input(format!(
            "no {key} path given (pass --{flag} or set \"{key}\" in the config file)"
        )));
    }
    Ok(Path::new(value))
}

fn lexicon_path(cfg: &RunConfig) -> Result<&Path, CliError> {
    require_path(&cfg.lexicon, "lexicon", "lexicon")
}

fn corpus_path(cfg: &RunConfig) -> Result<&Path, CliError> {
    require_path(&cfg.corpus, "corpus", "corpus")
}

fn seeds_path(cfg: &RunConfig) -> Result<&Path, CliError> {
    require_path(&cfg.seeds, "seeds", "seeds")
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    let dir = require_path(&cfg.out_dir, "out-dir", "out_dir")?;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn load_lexicon(cfg: &RunConfig) -> Result<Lexicon, CliError> {
    let path = lexicon_path(cfg)?;
    Lexicon::load(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Loads the corpus JSONL written by ingest (or synth-generate). Any
/// malformed record at this point is an input error: the normalized
/// artifact is supposed to be clean.
fn load_corpus(cfg: &RunConfig) -> Result<corpus::CorpusStore, CliError> {
    let path = corpus_path(cfg)?;
    let report = corpus::ingest(path, IngestFormat::Jsonl)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if let Some(first) = report.issues.first() {
        return Err(CliError::Input(format!(
            "{}: {} malformed record(s), first at {first}",
            path.display(),
            report.issues.len()
        )));
    }
    Ok(report.store)
}

/// The space manifest if one was built, otherwise a fresh derivation
/// with the current configuration. A file on disk is authoritative.
fn load_or_build_space(
    cfg: &RunConfig,
    lex: &Lexicon,
    mapped: &corpus::MappedCorpus,
) -> Result<SemanticSpace, CliError> {
    let manifest = Path::new(&cfg.out_dir).join("space.tsv");
    if cfg.out_dir.is_empty() || !manifest.exists() {
        return select_dimensions(mapped, lex, cfg.k, cfg.df_min).map_err(input);
    }
    SemanticSpace::from_manifest_tsv(&read_file(&manifest)?, lex)
        .map_err(|e| CliError::Input(format!("{}: {e}", manifest.display())))
}

/// Vectorizes every mapped document in corpus order.
fn vectorize_all(mapped: &corpus::MappedCorpus, space: &SemanticSpace) -> Vec<DocVector> {
    mapped.docs.iter().map(|d| vectorize(d, space)).collect()
}

/// The whitelist for one target: the configured paths when given,
/// otherwise every depth-2..3 taxonomy node off the target's own chain.
fn whitelist_for(
    cfg: &RunConfig,
    lex: &Lexicon,
    label: &str,
) -> Result<BTreeSet<TaxonPath>, CliError> {
    if !cfg.whitelist.is_empty() {
        let mut set = BTreeSet::new();
        for part in cfg.whitelist.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let path = TaxonPath::parse(part)
                .map_err(|e| CliError::Input(format!("whitelist entry \"{part}\": {e}")))?;
            set.insert(path);
        }
        return Ok(set);
    }
    let chains: BTreeSet<TaxonPath> = lex
        .lookup(label)
        .iter()
        .filter_map(|g| lex.group(g))
        .flat_map(|g| g.hypernym.chain())
        .collect();
    Ok(lex
        .taxonomy()
        .nodes_at_depth(2, 3)
        .filter(|n| !chains.contains(n))
        .cloned()
        .collect())
}

/// Constructs meanings for every unknown term with enough evidence.
/// Unknowns that fail their own preconditions are skipped, not fatal.
fn infer_all(
    view: &CorpusView,
    lex: &Lexicon,
    params: &SimilarityParams,
) -> Result<(Vec<InferredMeaning>, usize), CliError> {
    let index = CentroidIndex::build(view, lex).map_err(input)?;
    let unknowns = collect_unknowns(view.mapped);
    let mut meanings = Vec::new();
    let mut skipped = 0usize;
    for u in &unknowns {
        match infer_meaning(u, view, &index, params) {
            Ok(m) => meanings.push(m),
            Err(DiscoveryError::InsufficientEvidence { .. } | DiscoveryError::EmptyContext(_)) => {
                skipped += 1
            }
            Err(e) => return Err(internal(e)),
        }
    }
    Ok((meanings, skipped))
}

fn cmd_lexicon_validate(cfg: &RunConfig) -> Result<(), CliError> {
    let lex = load_lexicon(cfg)?;
    println!(
        "groups={}, taxa={}",
        lex.group_count(),
        lex.taxonomy().len()
    );
    Ok(())
}

fn cmd_ingest(cfg: &RunConfig, format: &str) -> Result<(), CliError> {
    let format: IngestFormat = format.parse().map_err(input)?;
    let path = corpus_path(cfg)?;
    let report = corpus::ingest(path, format)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let dir = out_dir(cfg)?;
    let header = artifact_header("ingest", cfg, &[("corpus", path)]).map_err(input)?;
    let out = dir.join("corpus.norm.jsonl");
    write_file(&out, &format!("{header}{}", report.store.to_jsonl()))?;
    for issue in &report.issues {
        println!("skipped {issue}");
    }
    println!(
        "docs={} skipped={}",
        report.store.len(),
        report.issues.len()
    );
    Ok(())
}

fn cmd_space_build(cfg: &RunConfig) -> Result<(), CliError> {
    let lex = load_lexicon(cfg)?;
    let store = load_corpus(cfg)?;
    let mapped = map_corpus(&store, &lex, DEFAULT_LAMBDA);
    let space = select_dimensions(&mapped, &lex, cfg.k, cfg.df_min).map_err(input)?;
    let dir = out_dir(cfg)?;
    let header = artifact_header(
        "space-build",
        cfg,
        &[
            ("lexicon", lexicon_path(cfg)?),
            ("corpus", corpus_path(cfg)?),
        ],
    )
    .map_err(input)?;
    write_file(
        &dir.join("space.tsv"),
        &format!("{header}{}", space.to_manifest_tsv()),
    )?;
    println!("dims={} docs={}", space.k(), mapped.docs.len());
    Ok(())
}

fn cmd_som_train(cfg: &RunConfig) -> Result<(), CliError> {
    let lex = load_lexicon(cfg)?;
    let store = load_corpus(cfg)?;
    let mapped = map_corpus(&store, &lex, DEFAULT_LAMBDA);
    let space = load_or_build_space(cfg, &lex, &mapped)?;
    let vectors = vectorize_all(&mapped, &space);
    let data: Vec<Vec<f64>> = vectors.iter().map(|v| v.unit.clone()).collect();
    let grid = init_coarse_rebalanced(
        &data,
        cfg.grid_rows,
        cfg.grid_cols,
        cfg.coarse_levels,
        cfg.epochs,
        cfg.seed,
    )
    .map_err(input)?;
    let schedule = TrainConfig::for_grid(
        cfg.grid_rows,
        cfg.grid_cols,
        cfg.epochs,
        cfg.coarse_levels,
        cfg.seed,
    );
    let trained = som::train(&grid, &data, &schedule).map_err(input)?;
    let (qe, te) = som::metrics(&trained, &data).map_err(internal)?;
    let dir = out_dir(cfg)?;
    let header = artifact_header(
        "som-train",
        cfg,
        &[
            ("lexicon", lexicon_path(cfg)?),
            ("corpus", corpus_path(cfg)?),
        ],
    )
    .map_err(input)?;
    write_file(
        &dir.join("som.tsv"),
        &format!("{header}{}", trained.to_codebook_tsv()),
    )?;
    println!(
        "grid={}x{} qe={qe:.6} te={te:.6}",
        trained.rows(),
        trained.cols()
    );
    Ok(())
}

fn cmd_map_export(cfg: &RunConfig) -> Result<(), CliError> {
    let lex = load_lexicon(cfg)?;
    let store = load_corpus(cfg)?;
    let mapped = map_corpus(&store, &lex, DEFAULT_LAMBDA);
    let space = load_or_build_space(cfg, &lex, &mapped)?;
    let vectors = vectorize_all(&mapped, &space);
    let dir = out_dir(cfg)?;
    let codebook_path = dir.join("som.tsv");
    let grid = SomGrid::from_codebook_tsv(&read_file(&codebook_path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", codebook_path.display())))?;
    let map = build_map(&grid, &vectors, &space).map_err(input)?;
    let inputs = [
        ("lexicon", lexicon_path(cfg)?),
        ("corpus", corpus_path(cfg)?),
    ];
    let header = artifact_header("map-export", cfg, &inputs).map_err(input)?;
    write_file(&dir.join("map.tsv"), &format!("{header}{}", map.to_tsv()))?;
    let xml_header = artifact_header_xml("map-export", cfg, &inputs).map_err(input)?;
    write_file(
        &dir.join("map.svg"),
        &format!("{xml_header}{}", map.to_svg()),
    )?;
    let occupied = map.cells.iter().filter(|c| c.count > 0).count();
    println!(
        "cells={} occupied={occupied} docs={}",
        map.rows * map.cols,
        map.assignments.len()
    );
    Ok(())
}

fn cmd_infer(cfg: &RunConfig) -> Result<(), CliError> {
    let lex = load_lexicon(cfg)?;
    let store = load_corpus(cfg)?;
    let mapped = map_corpus(&store, &lex, DEFAULT_LAMBDA);
    let space = load_or_build_space(cfg, &lex, &mapped)?;
    let vectors = vectorize_all(&mapped, &space);
    let occ = OccurrenceIndex::build(&mapped);
    let view = CorpusView::new(&mapped, &vectors, &occ).map_err(internal)?;
    let (meanings, skipped) = infer_all(&view, &lex, &cfg.similarity())?;
    let dir = out_dir(cfg)?;
    let header = artifact_header(
        "infer",
        cfg,
        &[
            ("lexicon", lexicon_path(cfg)?),
            ("corpus", corpus_path(cfg)?),
        ],
    )
    .map_err(input)?;
    write_file(
        &dir.join("inferred.tsv"),
        &format!("{header}{}", inferred_tsv(&meanings)),
    )?;
    println!("inferred={} skipped={skipped}", meanings.len());
    Ok(())
}

fn cmd_discover(cfg: &RunConfig, truth: Option<&Path>) -> Result<(), CliError> {
    let lex = load_lexicon(cfg)?;
    let store = load_corpus(cfg)?;
    let mapped = map_corpus(&store, &lex, DEFAULT_LAMBDA);
    let space = load_or_build_space(cfg, &lex, &mapped)?;
    let vectors = vectorize_all(&mapped, &space);
    let occ = OccurrenceIndex::build(&mapped);
    let view = CorpusView::new(&mapped, &vectors, &occ).map_err(internal)?;

    let seeds_file = seeds_path(cfg)?;
    let seeds = parse_seed_file(&read_file(seeds_file)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", seeds_file.display())))?;
    let params = cfg.similarity();
    let (models, unresolved) =
        build_reference_models(&seeds, &view, &lex, cfg.clusters_per_model, &params)
            .map_err(input)?;
    for term in &unresolved {
        println!("seed term not in lexicon, skipped: {term}");
    }

    let (meanings, _) = infer_all(&view, &lex, &params)?;

    let cand_params = CandidateParams {
        theta: cfg.theta,
        n0: cfg.n0,
        min_support: cfg.min_support,
        similarity: params.clone(),
    };
    let mut targets: Vec<String> = seeds.iter().map(|s| s.target.clone()).collect();
    targets.sort();
    targets.dedup();
    let mut candidates = Vec::new();
    for label in &targets {
        let whitelist = whitelist_for(cfg, &lex, label)?;
        let spec = TargetSpec::build(label, &seeds, &lex, whitelist).map_err(input)?;
        candidates.extend(
            generate_candidates(&view, &lex, &models, &spec, &meanings, &cand_params)
                .map_err(input)?,
        );
    }

    let tsv = candidates_tsv(&candidates, &params, cfg.theta, cfg.k, cfg.seed);
    let dir = out_dir(cfg)?;
    let mut inputs = vec![
        ("lexicon", lexicon_path(cfg)?),
        ("corpus", corpus_path(cfg)?),
        ("seeds", seeds_file),
    ];
    if let Some(t) = truth {
        inputs.push(("truth", t));
    }
    let header = artifact_header("discover", cfg, &inputs).map_err(input)?;
    write_file(&dir.join("candidates.tsv"), &format!("{header}{tsv}"))?;
    println!("candidates={}", candidates.len());

    if let Some(truth_path) = truth {
        let truth = parse_truth_tsv(&read_file(truth_path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", truth_path.display())))?;
        let rows = parse_candidates_tsv(&tsv).map_err(internal)?;
        let metrics = evaluate(&rows, &truth);
        write_file(
            &dir.join("metrics.tsv"),
            &format!("{header}{}", metrics_tsv(&metrics)),
        )?;
        print!("{}", metrics_text(&metrics));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn synth_spec(
    cfg: &RunConfig,
    docs: usize,
    themes: usize,
    terms_per_theme: usize,
    plants: usize,
    plant_rate: f64,
    seed_terms: usize,
    seed_rate: f64,
    relationship: &str,
    target: &str,
    distractors: usize,
    len_min: usize,
    len_max: usize,
    noise: f64,
) -> GeneratorSpec {
    let planted = (0..plants)
        .map(|i| PlantedRelation::new(&format!("plant{i:02}"), relationship, target, plant_rate))
        .collect();
    let seeds = (0..seed_terms)
        .map(|i| PlantedRelation::new(&format!("seedterm{i}"), relationship, target, seed_rate))
        .collect();
    GeneratorSpec {
        doc_count: docs,
        themes,
        terms_per_theme,
        planted,
        seeds,
        distractor_count: distractors,
        len_min,
        len_max,
        noise_rate: noise,
        seed: cfg.seed,
    }
}

fn cmd_synth_generate(cfg: &RunConfig, spec: &GeneratorSpec) -> Result<(), CliError> {
    let artifacts = generate(spec).map_err(input)?;
    let dir = out_dir(cfg)?;
    let header = artifact_header("synth-generate", cfg, &[]).map_err(input)?;
    write_file(
        &dir.join("corpus.jsonl"),
        &format!("{header}{}", artifacts.corpus_jsonl),
    )?;
    write_file(
        &dir.join("lexicon.tsv"),
        &format!("{header}{}", artifacts.lexicon_tsv),
    )?;
    write_file(
        &dir.join("seeds.tsv"),
        &format!("{header}{}", artifacts.seeds_tsv),
    )?;
    write_file(
        &dir.join("truth.tsv"),
        &format!("{header}{}", truth_tsv(&artifacts.truth)),
    )?;
    println!(
        "docs={} positives={} distractors={}",
        spec.doc_count,
        artifacts.truth.positives.len(),
        artifacts.truth.distractors.len()
    );
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig, candidates: &Path, truth: &Path) -> Result<(), CliError> {
    let rows = parse_candidates_tsv(&read_file(candidates)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", candidates.display())))?;
    let parsed_truth = parse_truth_tsv(&read_file(truth)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", truth.display())))?;
    let metrics = evaluate(&rows, &parsed_truth);
    if !cfg.out_dir.is_empty() {
        let dir = out_dir(cfg)?;
        let header = artifact_header(
            "evaluate",
            cfg,
            &[("candidates", candidates), ("truth", truth)],
        )
        .map_err(input)?;
        write_file(
            &dir.join("metrics.tsv"),
            &format!("{header}{}", metrics_tsv(&metrics)),
        )?;
    }
    print!("{}", metrics_text(&metrics));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn args(parts: &[&str]) -> Vec<String> {
        std::iter::once("codexmine")
            .chain(parts.iter().copied())
            .map(String::from)
            .collect()
    }

    /// A small but fully functional workspace: lexicon, corpus, seeds.
    struct Workspace {
        dir: tempfile::TempDir,
        lexicon: PathBuf,
        corpus: PathBuf,
        seeds: PathBuf,
        out: PathBuf,
    }

    impl Workspace {
        fn new() -> Self {
            let dir = tempfile::tempdir().unwrap();
            let lexicon = dir.path().join("lexicon.tsv");
            let corpus = dir.path().join("corpus.jsonl");
            let seeds = dir.path().join("seeds.tsv");
            let out = dir.path().join("out");

            let mut lex = String::new();
            lex.push_str("g_tgt\tdiax\tdiax,en\tbio/disease\n");
            for (gid, surface) in [("g_m1", "marka"), ("g_m2", "markb"), ("g_m3", "markc")] {
                lex.push_str(&format!(
                    "{gid}\t{surface}\t{surface},en\tbio/meta/markers\n"
                ));
            }
            for (gid, surface) in [("g_o1", "lens"), ("g_o2", "retina")] {
                lex.push_str(&format!("{gid}\t{surface}\t{surface},en\tbio/eye/part\n"));
            }
            lex.push_str("g_f1\tfiller\tfiller,en\tbio/other\n");
            std::fs::write(&lexicon, &lex).unwrap();

            let mut docs = String::new();
            for i in 0..12 {
                let body = if i < 6 {
                    format!(
                        "diax marka markb {}",
                        if i % 2 == 0 { "markc" } else { "filler" }
                    )
                } else {
                    "lens retina filler padding".to_string()
                };
                docs.push_str(&format!(
                    "{{\"doc_id\":\"d{i:03}\",\"title\":\"\",\"body\":\"{body}\"}}\n"
                ));
            }
            std::fs::write(&corpus, &docs).unwrap();

            std::fs::write(&seeds, "marka\tMarks\tdiax\n").unwrap();
            Workspace {
                dir,
                lexicon,
                corpus,
                seeds,
                out,
            }
        }

        fn flags(&self) -> Vec<String> {
            [
                "--lexicon",
                self.lexicon.to_str().unwrap(),
                "--corpus",
                self.corpus.to_str().unwrap(),
                "--seeds",
                self.seeds.to_str().unwrap(),
                "--out-dir",
                self.out.to_str().unwrap(),
                "--k",
                "6",
                "--grid-rows",
                "3",
                "--grid-cols",
                "3",
                "--epochs",
                "6",
                "--coarse-levels",
                "1",
                "--min-support",
                "2",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect()
        }

        fn run(&self, subcommand: &str, extra: &[&str]) -> Result<(), CliError> {
            let mut argv = vec!["codexmine".to_string(), subcommand.to_string()];
            argv.extend(self.flags());
            argv.extend(extra.iter().map(|s| s.to_string()));
            try_run(argv)
        }
    }

    #[test]
    fn help_and_version_exit_cleanly() {
        assert!(try_run(args(&["--help"])).is_ok());
        assert!(try_run(args(&["--version"])).is_ok());
    }

    #[test]
    fn unknown_subcommand_is_an_input_error() {
        let err = try_run(args(&["mine-bitcoin"])).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn bad_flag_value_is_an_input_error() {
        let err = try_run(args(&["space-build", "--k", "banana"])).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("--k"), "{err}");
    }

    #[test]
    fn weight_violation_exits_one_with_the_exact_message() {
        let ws = Workspace::new();
        let err = ws
            .run(
                "space-build",
                &["--alpha", "0.5", "--beta", "0.5", "--gamma", "0.2"],
            )
            .unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert_eq!(err.to_string(), "weights must sum to 1");
    }

    #[test]
    fn missing_required_path_names_flag_and_key() {
        let err = try_run(args(&["space-build"])).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("--lexicon") && msg.contains("config file"),
            "{msg}"
        );
    }

    #[test]
    fn lexicon_validate_accepts_the_fixture() {
        let ws = Workspace::new();
        ws.run("lexicon-validate", &[]).unwrap();
    }

    #[test]
    fn config_file_is_applied_and_flags_override_it() {
        let ws = Workspace::new();
        let cfg_path = ws.dir.path().join("run.cfg");
        std::fs::write(
            &cfg_path,
            format!(
                "lexicon = {}\n# comment\nk = 5\n",
                ws.lexicon.to_str().unwrap()
            ),
        )
        .unwrap();
        // Config supplies the lexicon; the subcommand runs without --lexicon.
        try_run(args(&[
            "lexicon-validate",
            "--config",
            cfg_path.to_str().unwrap(),
        ]))
        .unwrap();
        // A bad config key is an input error naming the key.
        std::fs::write(&cfg_path, "kk = 5\n").unwrap();
        let err = try_run(args(&[
            "lexicon-validate",
            "--config",
            cfg_path.to_str().unwrap(),
        ]))
        .unwrap_err();
        assert!(err.to_string().contains("kk"), "{err}");
    }

    #[test]
    fn pipeline_stages_chain_over_shared_artifacts() {
        let ws = Workspace::new();
        ws.run("ingest", &[]).unwrap();
        let norm = ws.out.join("corpus.norm.jsonl");
        let text = std::fs::read_to_string(&norm).unwrap();
        assert!(text.starts_with("# codexmine ingest\n# config: "));
        assert!(text.contains("sha256="));

        // Later stages read the normalized corpus.
        let norm_flag = norm.to_str().unwrap().to_string();
        ws.run("space-build", &["--corpus", &norm_flag]).unwrap();
        let manifest = std::fs::read_to_string(ws.out.join("space.tsv")).unwrap();
        assert!(manifest.starts_with("# codexmine space-build\n"));

        ws.run("som-train", &["--corpus", &norm_flag]).unwrap();
        ws.run("map-export", &["--corpus", &norm_flag]).unwrap();
        let svg = std::fs::read_to_string(ws.out.join("map.svg")).unwrap();
        assert!(svg.starts_with("<!-- codexmine map-export -->"));
        assert!(svg.contains("<svg "));

        ws.run("infer", &["--corpus", &norm_flag]).unwrap();
        ws.run("discover", &["--corpus", &norm_flag]).unwrap();
        let tsv = std::fs::read_to_string(ws.out.join("candidates.tsv")).unwrap();
        assert!(tsv.starts_with("# codexmine discover\n"));
        assert!(tsv.contains("Row\tTerm\tRelationship\tObject\tConf%\t#Docs\tDocIDs"));
        // The co-occurring markers are rediscovered against the seed model.
        let rows = parse_candidates_tsv(&tsv).unwrap();
        assert!(rows.iter().any(|r| r.term == "markb"), "{tsv}");
        // The whitelist default excluded the target's own chain, so the
        // target never nominates itself.
        assert!(rows.iter().all(|r| r.term != "diax"), "{tsv}");
    }

    #[test]
    fn discover_never_modifies_its_inputs() {
        let ws = Workspace::new();
        let before: Vec<String> = [&ws.lexicon, &ws.corpus, &ws.seeds]
            .iter()
            .map(|p| std::fs::read_to_string(p).unwrap())
            .collect();
        ws.run("discover", &[]).unwrap();
        let after: Vec<String> = [&ws.lexicon, &ws.corpus, &ws.seeds]
            .iter()
            .map(|p| std::fs::read_to_string(p).unwrap())
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn explicit_whitelist_narrows_the_candidate_pool() {
        let ws = Workspace::new();
        ws.run("discover", &["--whitelist", "bio/eye"]).unwrap();
        let tsv = std::fs::read_to_string(ws.out.join("candidates.tsv")).unwrap();
        let rows = parse_candidates_tsv(&tsv).unwrap();
        assert!(
            rows.iter().all(|r| r.term == "lens" || r.term == "retina"),
            "{tsv}"
        );
        // A malformed whitelist path is an input error.
        let err = ws
            .run("discover", &["--whitelist", "bio//eye"])
            .unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn synth_generate_and_evaluate_round_trip() {
        let ws = Workspace::new();
        let run = |sub: &str, extra: &[&str]| {
            let mut argv = args(&[sub, "--out-dir", ws.out.to_str().unwrap(), "--seed", "9"]);
            argv.extend(extra.iter().map(|s| s.to_string()));
            try_run(argv)
        };
        run(
            "synth-generate",
            &[
                "--docs",
                "120",
                "--themes",
                "4",
                "--terms-per-theme",
                "8",
                "--plants",
                "3",
                "--seed-terms",
                "2",
                "--distractors",
                "6",
                "--len-min",
                "20",
                "--len-max",
                "30",
            ],
        )
        .unwrap();
        for name in ["corpus.jsonl", "lexicon.tsv", "seeds.tsv", "truth.tsv"] {
            let text = std::fs::read_to_string(ws.out.join(name)).unwrap();
            assert!(text.starts_with("# codexmine synth-generate\n"), "{name}");
        }

        // Discover over the generated artifacts, grading against truth.
        let lex = ws.out.join("lexicon.tsv");
        let corpus = ws.out.join("corpus.jsonl");
        let seeds = ws.out.join("seeds.tsv");
        let truth = ws.out.join("truth.tsv");
        let mut argv = args(&[
            "discover",
            "--lexicon",
            lex.to_str().unwrap(),
            "--corpus",
            corpus.to_str().unwrap(),
            "--seeds",
            seeds.to_str().unwrap(),
            "--out-dir",
            ws.out.to_str().unwrap(),
            "--k",
            "30",
            "--truth",
            truth.to_str().unwrap(),
        ]);
        argv.push("--seed".into());
        argv.push("9".into());
        try_run(argv).unwrap();
        let metrics = std::fs::read_to_string(ws.out.join("metrics.tsv")).unwrap();
        assert!(metrics.contains("auc"), "{metrics}");

        // The standalone evaluator reproduces the same numbers.
        let cands = ws.out.join("candidates.tsv");
        try_run(args(&[
            "evaluate",
            "--candidates",
            cands.to_str().unwrap(),
            "--truth",
            truth.to_str().unwrap(),
            "--out-dir",
            ws.out.to_str().unwrap(),
        ]))
        .unwrap();
        let again = std::fs::read_to_string(ws.out.join("metrics.tsv")).unwrap();
        let tail = |s: &str| {
            s.lines()
                .filter(|l| !l.starts_with('#'))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(tail(&metrics), tail(&again));
    }

    #[test]
    fn repeat_runs_are_byte_identical() {
        let ws = Workspace::new();
        ws.run("discover", &[]).unwrap();
        let first = std::fs::read(ws.out.join("candidates.tsv")).unwrap();
        ws.run("discover", &[]).unwrap();
        let second = std::fs::read(ws.out.join("candidates.tsv")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn zero_threads_is_rejected() {
        let err = try_run(args(&["lexicon-validate", "--threads", "0"])).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("threads"), "{err}");
    }

    #[test]
    fn internal_errors_exit_two() {
        let err = CliError::Internal("boom".into());
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("internal invariant"));
    }

    #[test]
    fn ingest_reports_malformed_records_but_keeps_going() {
        let ws = Workspace::new();
        let dirty = ws.dir.path().join("dirty.jsonl");
        let mut f = std::fs::File::create(&dirty).unwrap();
        writeln!(
            f,
            "{{\"doc_id\":\"a\",\"title\":\"\",\"body\":\"diax marka\"}}"
        )
        .unwrap();
        writeln!(f, "not json at all").unwrap();
        writeln!(
            f,
            "{{\"doc_id\":\"b\",\"title\":\"\",\"body\":\"lens retina\"}}"
        )
        .unwrap();
        drop(f);
        ws.run("ingest", &["--corpus", dirty.to_str().unwrap()])
            .unwrap();
        let norm = std::fs::read_to_string(ws.out.join("corpus.norm.jsonl")).unwrap();
        assert_eq!(norm.lines().filter(|l| !l.starts_with('#')).count(), 2);
        // But a later stage refuses a corpus that still has bad records.
        let err = ws
            .run("space-build", &["--corpus", dirty.to_str().unwrap()])
            .unwrap_err();
        assert!(err.to_string().contains("malformed"), "{err}");
    }
}
