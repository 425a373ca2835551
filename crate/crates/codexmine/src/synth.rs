//! Synthetic corpora with planted relations and known ground truth.
//!
//! The generator builds a themed vocabulary over a taxonomy, writes
//! documents as Zipf-weighted bags of theme terms plus uniform noise, and
//! then plants chosen terms into target-mentioning documents at a given
//! co-occurrence rate. The truth file travels separately from the corpus
//! so a discovery run stays a blind experiment; `evaluate` scores a
//! candidate table against that truth afterwards.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{CorpusStore, DocSource, Document};
use crate::discovery::{ParsedCandidate, SeedEntry};
use crate::lexicon::{Lexicon, SynonymGroup, TaxonPath};
use crate::token::{surface_token_count, tokenize};

/// Within-theme sub-clusters; each theme's vocabulary splits into this
/// many taxonomy leaves, and every document focuses on one of them.
const KINDS_PER_THEME: usize = 4;
/// Themes per level-2 taxonomy node.
const THEMES_PER_FIELD: usize = 5;
/// Probability that a document outside the target's home theme mentions
/// the target.
const TARGET_MENTION_RATE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("truth file line {line}: {reason}")]
    TruthParse { line: usize, reason: String },
}

/// One relation to plant: `term` is inserted into a `rate` fraction of
/// the documents that mention `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedRelation {
    pub term: String,
    pub relationship: String,
    pub target: String,
    pub rate: f64,
}

impl PlantedRelation {
    pub fn new(term: &str, relationship: &str, target: &str, rate: f64) -> Self {
        Self {
            term: term.to_string(),
            relationship: relationship.to_string(),
            target: target.to_string(),
            rate,
        }
    }
}

/// Everything the generator needs. `planted` become truth positives;
/// `seeds` are planted the same way but are written to the seed file
/// instead, so the discovery run never gets graded on its own inputs.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub doc_count: usize,
    pub themes: usize,
    pub terms_per_theme: usize,
    pub planted: Vec<PlantedRelation>,
    pub seeds: Vec<PlantedRelation>,
    pub distractor_count: usize,
    pub len_min: usize,
    pub len_max: usize,
    pub noise_rate: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    /// The single target label all planted relations point at.
    pub fn target_label(&self) -> &str {
        &self.planted[0].target
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::InvalidSpec(msg));
        if self.doc_count == 0 {
            return fail("doc_count must be positive".into());
        }
        if self.themes < 2 {
            return fail("need at least 2 themes (one hosts the target)".into());
        }
        if self.terms_per_theme == 0 {
            return fail("terms_per_theme must be positive".into());
        }
        if self.len_min == 0 || self.len_min > self.len_max {
            return fail(format!(
                "document length range [{}, {}] is invalid",
                self.len_min, self.len_max
            ));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return fail(format!("noise_rate {} must lie in [0,1)", self.noise_rate));
        }
        if self.planted.is_empty() {
            return fail("at least one planted relation is required".into());
        }
        if self.distractor_count == 0 {
            return fail("distractor_count must be positive".into());
        }
        let ordinary = (self.themes - 1) * self.terms_per_theme;
        if self.distractor_count > ordinary {
            return fail(format!(
                "vocabulary too small: {} distractors requested but only {} \
                 terms exist outside the target theme",
                self.distractor_count, ordinary
            ));
        }
        let target = self.target_label();
        if surface_token_count(target) != 1 {
            return fail(format!("target label \"{target}\" must be a single token"));
        }
        let target_synonyms = [target.to_string(), format!("{target}ia")];
        let vocabulary: BTreeSet<String> = (0..self.themes)
            .flat_map(|t| (0..self.terms_per_theme).map(move |j| ordinary_surface(t, j)))
            .collect();
        let mut seen = BTreeSet::new();
        for rel in self.planted.iter().chain(self.seeds.iter()) {
            if !(0.0..=1.0).contains(&rel.rate) {
                return fail(format!(
                    "rate {} for \"{}\" must lie in [0,1]",
                    rel.rate, rel.term
                ));
            }
            if rel.target != target {
                return fail(format!(
                    "all planted relations must share one target: \"{}\" vs \"{target}\"",
                    rel.target
                ));
            }
            let tokens = surface_token_count(&rel.term);
            if !(1..=4).contains(&tokens) {
                return fail(format!(
                    "planted term \"{}\" must span 1 to 4 tokens",
                    rel.term
                ));
            }
            if rel.relationship.trim().is_empty() {
                return fail(format!(
                    "planted term \"{}\" has an empty relationship",
                    rel.term
                ));
            }
            if target_synonyms.contains(&rel.term) {
                return fail(format!(
                    "planted term \"{}\" collides with a target synonym",
                    rel.term
                ));
            }
            if vocabulary.contains(&rel.term) {
                return fail(format!(
                    "planted term \"{}\" collides with the theme vocabulary",
                    rel.term
                ));
            }
            if !seen.insert(rel.term.clone()) {
                return fail(format!("duplicate planted term \"{}\"", rel.term));
            }
        }
        Ok(())
    }
}

/// What the generator knows and the pipeline must not see.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub positives: Vec<SeedEntry>,
    pub distractors: Vec<String>,
    /// (doc_id, theme index) for every generated document.
    pub doc_themes: Vec<(String, usize)>,
}

/// The four artifacts of one generation run.
#[derive(Debug, Clone)]
pub struct GeneratedArtifacts {
    pub corpus_jsonl: String,
    pub lexicon_tsv: String,
    pub seeds_tsv: String,
    pub truth: GroundTruth,
}

fn ordinary_surface(theme: usize, term: usize) -> String {
    format!("t{theme:02}w{term:02}")
}

fn ordinary_group_id(theme: usize, term: usize) -> String {
    format!("t{theme:02}g{term:02}")
}

/// Which kind a term index belongs to; contiguous rank blocks.
fn kind_of(term: usize, kinds: usize, terms_per_theme: usize) -> usize {
    term * kinds / terms_per_theme
}

/// Taxonomy leaf for (theme, kind). The four kinds sit at depths 4
/// through 7, which gives the taxonomy its full height.
fn kind_path(theme: usize, kind: usize) -> TaxonPath {
    let field = theme / THEMES_PER_FIELD;
    let base = format!("bio/field{field:02}/topic{theme:02}");
    let suffix = match kind {
        0 => "classa",
        1 => "classb/famb",
        2 => "classc/famc/genc",
        _ => "classd/famd/gend/specd",
    };
    TaxonPath::parse(&format!("{base}/{suffix}")).expect("generated path is well-formed")
}

fn target_hypernym() -> TaxonPath {
    TaxonPath::parse("bio/field00/topic00/malady").expect("generated path is well-formed")
}

/// Cumulative table for Zipf sampling with exponent 1.0 (weights 1/rank).
struct ZipfTable {
    cum: Vec<f64>,
}

impl ZipfTable {
    fn new(n: usize) -> Self {
        let weights: Vec<f64> = (1..=n).map(|r| 1.0 / r as f64).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cum = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Self { cum }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen();
        self.cum
            .partition_point(|&c| c <= u)
            .min(self.cum.len() - 1)
    }
}

struct Draft {
    tokens: Vec<String>,
    theme: usize,
    mentions_target: bool,
}

/// Generates the corpus, lexicon, seed file, and ground truth. Fully
/// deterministic per seed; single-pass and single-threaded by design.
pub fn generate(spec: &GeneratorSpec) -> Result<GeneratedArtifacts, SynthError> {
    spec.validate()?;
    let kinds = KINDS_PER_THEME.min(spec.terms_per_theme);
    let target = spec.target_label().to_string();
    let target_surfaces = [target.clone(), format!("{target}ia")];

    // Lexicon: the target group, the theme vocabulary, then one group per
    // planted/seed term so every candidate has a taxonomy position.
    let mut groups = vec![SynonymGroup {
        group_id: "g_target".to_string(),
        canonical: target.clone(),
        members: target_surfaces
            .iter()
            .map(|s| (s.clone(), "en".to_string()))
            .collect(),
        hypernym: target_hypernym(),
    }];
    for t in 0..spec.themes {
        for j in 0..spec.terms_per_theme {
            let surface = ordinary_surface(t, j);
            groups.push(SynonymGroup {
                group_id: ordinary_group_id(t, j),
                canonical: surface.clone(),
                members: vec![(surface, "en".to_string())],
                hypernym: kind_path(t, kind_of(j, kinds, spec.terms_per_theme)),
            });
        }
    }
    for (i, rel) in spec.planted.iter().enumerate() {
        let theme = 1 + i % (spec.themes - 1);
        groups.push(SynonymGroup {
            group_id: format!("p{i:02}"),
            canonical: rel.term.clone(),
            members: vec![(rel.term.clone(), "en".to_string())],
            hypernym: kind_path(theme, i % kinds),
        });
    }
    for (i, rel) in spec.seeds.iter().enumerate() {
        let theme = 1 + (spec.planted.len() + i) % (spec.themes - 1);
        groups.push(SynonymGroup {
            group_id: format!("s{i:02}"),
            canonical: rel.term.clone(),
            members: vec![(rel.term.clone(), "en".to_string())],
            hypernym: kind_path(theme, i % kinds),
        });
    }
    let lexicon = Lexicon::from_groups(groups)
        .map_err(|e| SynthError::InvalidSpec(format!("generated lexicon invalid: {e}")))?;
    let lexicon_tsv = lexicon.to_canonical_tsv();

    // Documents, phase one: sub-theme bags. Every document focuses on one
    // kind of one theme; its non-noise tokens are Zipf draws from that
    // kind's bag, which is what keeps the taxonomy leaves separable in
    // term co-occurrence. Target mentions are decided here so the
    // planting phase sees a fixed set of target documents.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let kind_members: Vec<Vec<usize>> = (0..kinds)
        .map(|k| {
            (0..spec.terms_per_theme)
                .filter(|&j| kind_of(j, kinds, spec.terms_per_theme) == k)
                .collect()
        })
        .collect();
    let kind_tables: Vec<ZipfTable> = kind_members
        .iter()
        .map(|members| ZipfTable::new(members.len()))
        .collect();

    let mut drafts = Vec::with_capacity(spec.doc_count);
    for _ in 0..spec.doc_count {
        let theme = rng.gen_range(0..spec.themes);
        let focus = rng.gen_range(0..kinds);
        let len = rng.gen_range(spec.len_min..=spec.len_max);
        let mut tokens = Vec::with_capacity(len + 2);
        for _ in 0..len {
            if rng.gen::<f64>() < spec.noise_rate {
                let t = rng.gen_range(0..spec.themes);
                let j = rng.gen_range(0..spec.terms_per_theme);
                tokens.push(ordinary_surface(t, j));
            } else {
                let slot = kind_tables[focus].sample(&mut rng);
                tokens.push(ordinary_surface(theme, kind_members[focus][slot]));
            }
        }
        let mentions_target = theme == 0 || rng.gen::<f64>() < TARGET_MENTION_RATE;
        if mentions_target {
            let surface = target_surfaces[rng.gen_range(0..target_surfaces.len())].clone();
            let at = rng.gen_range(0..=tokens.len());
            tokens.insert(at, surface);
        }
        drafts.push(Draft {
            tokens,
            theme,
            mentions_target,
        });
    }

    // Phase two: plant terms into target-mentioning documents, one
    // Bernoulli draw per (relation, target document).
    for rel in spec.planted.iter().chain(spec.seeds.iter()) {
        let words = tokenize(&rel.term);
        for draft in drafts.iter_mut() {
            if !draft.mentions_target || rng.gen::<f64>() >= rel.rate {
                continue;
            }
            let at = rng.gen_range(0..=draft.tokens.len());
            for (offset, word) in words.iter().enumerate() {
                draft.tokens.insert(at + offset, word.clone());
            }
        }
    }

    let documents: Vec<Document> = drafts
        .iter()
        .enumerate()
        .map(|(i, d)| Document {
            doc_id: format!("d{i:05}"),
            title: String::new(),
            body: d.tokens.join(" "),
            source: DocSource::Synthetic,
        })
        .collect();
    let doc_themes: Vec<(String, usize)> = documents
        .iter()
        .zip(&drafts)
        .map(|(doc, d)| (doc.doc_id.clone(), d.theme))
        .collect();
    let store = CorpusStore::from_documents(documents).expect("generated doc ids are unique");
    let corpus_jsonl = store.to_jsonl();

    let mut seeds_tsv = String::new();
    for rel in &spec.seeds {
        seeds_tsv.push_str(&format!(
            "{}\t{}\t{}\n",
            rel.term, rel.relationship, rel.target
        ));
    }

    let positives: Vec<SeedEntry> = spec
        .planted
        .iter()
        .map(|rel| SeedEntry {
            term: rel.term.clone(),
            relationship: rel.relationship.clone(),
            target: rel.target.clone(),
        })
        .collect();
    // Distractors: ordinary terms outside the target theme, frequent
    // ranks first so most of them genuinely appear in the corpus.
    let mut distractors = Vec::with_capacity(spec.distractor_count);
    'pick: for j in 0..spec.terms_per_theme {
        for t in 1..spec.themes {
            if distractors.len() == spec.distractor_count {
                break 'pick;
            }
            distractors.push(ordinary_surface(t, j));
        }
    }
    let truth = GroundTruth {
        positives,
        distractors,
        doc_themes,
    };
    Ok(GeneratedArtifacts {
        corpus_jsonl,
        lexicon_tsv,
        seeds_tsv,
        truth,
    })
}

/// Serializes ground truth as TSV: term, relationship, target, kind.
/// Distractor rows carry "-" for the relationship they do not have.
pub fn truth_tsv(truth: &GroundTruth) -> String {
    let target = truth
        .positives
        .first()
        .map(|p| p.target.clone())
        .unwrap_or_default();
    let mut out = String::new();
    for p in &truth.positives {
        out.push_str(&format!(
            "{}\t{}\t{}\tpositive\n",
            p.term, p.relationship, p.target
        ));
    }
    for d in &truth.distractors {
        out.push_str(&format!("{d}\t-\t{target}\tdistractor\n"));
    }
    out
}

/// Parses a truth TSV. Document themes are not serialized, so the parsed
/// truth carries an empty theme list.
pub fn parse_truth_tsv(text: &str) -> Result<GroundTruth, SynthError> {
    let mut positives = Vec::new();
    let mut distractors = Vec::new();
    let mut kinds: BTreeSet<String> = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(SynthError::TruthParse {
                line: line_no,
                reason: format!("expected 4 columns, found {}", cols.len()),
            });
        }
        if !kinds.insert(cols[0].to_string()) {
            return Err(SynthError::TruthParse {
                line: line_no,
                reason: format!("term \"{}\" listed twice", cols[0]),
            });
        }
        match cols[3] {
            "positive" => positives.push(SeedEntry {
                term: cols[0].to_string(),
                relationship: cols[1].to_string(),
                target: cols[2].to_string(),
            }),
            "distractor" => distractors.push(cols[0].to_string()),
            other => {
                return Err(SynthError::TruthParse {
                    line: line_no,
                    reason: format!("unknown kind \"{other}\""),
                })
            }
        }
    }
    Ok(GroundTruth {
        positives,
        distractors,
        doc_themes: Vec::new(),
    })
}

/// Scores for one evaluation run.
#[derive(Debug, Clone)]
pub struct Metrics {
    /// (k, precision) over the first k ranked rows, k ∈ {10, 25, 50}.
    pub precision_at: Vec<(usize, f64)>,
    /// (k, recall) — positives found within the first k rows.
    pub recall_at: Vec<(usize, f64)>,
    /// Positives found anywhere in the output.
    pub recall: f64,
    /// Mann-Whitney AUC of positives vs distractors; terms absent from
    /// the output score zero. NaN when either class is empty.
    pub auc: f64,
    pub positives_found: usize,
    pub positives_total: usize,
}

const PRECISION_KS: [usize; 3] = [10, 25, 50];

/// Scores a ranked candidate table against ground truth. Positives match
/// on the full (term, relationship, object) triple; distractors match on
/// the term alone.
pub fn evaluate(rows: &[ParsedCandidate], truth: &GroundTruth) -> Metrics {
    let positive_set: BTreeSet<(&str, &str, &str)> = truth
        .positives
        .iter()
        .map(|p| (p.term.as_str(), p.relationship.as_str(), p.target.as_str()))
        .collect();
    let is_positive = |row: &ParsedCandidate| {
        positive_set.contains(&(
            row.term.as_str(),
            row.relationship.as_str(),
            row.object.as_str(),
        ))
    };

    let mut precision_at = Vec::new();
    let mut recall_at = Vec::new();
    for k in PRECISION_KS {
        let top = &rows[..rows.len().min(k)];
        let hits: BTreeSet<(&str, &str, &str)> = top
            .iter()
            .filter(|r| is_positive(r))
            .map(|r| (r.term.as_str(), r.relationship.as_str(), r.object.as_str()))
            .collect();
        precision_at.push((k, hits.len() as f64 / k as f64));
        if truth.positives.is_empty() {
            recall_at.push((k, 0.0));
        } else {
            recall_at.push((k, hits.len() as f64 / truth.positives.len() as f64));
        }
    }

    let mut pos_scores = vec![0.0f64; truth.positives.len()];
    for (i, p) in truth.positives.iter().enumerate() {
        for row in rows {
            if row.term == p.term && row.relationship == p.relationship && row.object == p.target {
                pos_scores[i] = pos_scores[i].max(row.confidence);
            }
        }
    }
    let positives_found = rows
        .iter()
        .filter(|r| is_positive(r))
        .map(|r| (r.term.as_str(), r.relationship.as_str(), r.object.as_str()))
        .collect::<BTreeSet<_>>()
        .len();
    let mut dis_scores = vec![0.0f64; truth.distractors.len()];
    for (i, d) in truth.distractors.iter().enumerate() {
        for row in rows {
            if &row.term == d {
                dis_scores[i] = dis_scores[i].max(row.confidence);
            }
        }
    }

    let recall = if truth.positives.is_empty() {
        0.0
    } else {
        positives_found as f64 / truth.positives.len() as f64
    };
    Metrics {
        precision_at,
        recall_at,
        recall,
        auc: mann_whitney_auc(&pos_scores, &dis_scores),
        positives_found,
        positives_total: truth.positives.len(),
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting half.
fn mann_whitney_auc(pos: &[f64], neg: &[f64]) -> f64 {
    if pos.is_empty() || neg.is_empty() {
        return f64::NAN;
    }
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Machine-readable metrics: one "name\tvalue" row per figure.
pub fn metrics_tsv(m: &Metrics) -> String {
    let mut out = String::from("metric\tvalue\n");
    for (k, v) in &m.precision_at {
        out.push_str(&format!("precision@{k}\t{v:.4}\n"));
    }
    for (k, v) in &m.recall_at {
        out.push_str(&format!("recall@{k}\t{v:.4}\n"));
    }
    out.push_str(&format!("recall\t{:.4}\n", m.recall));
    out.push_str(&format!("auc\t{:.4}\n", m.auc));
    out.push_str(&format!(
        "positives_found\t{}\npositives_total\t{}\n",
        m.positives_found, m.positives_total
    ));
    out
}

/// Human-readable metrics table.
pub fn metrics_text(m: &Metrics) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<18}{}\n", "metric", "value"));
    for (k, v) in &m.precision_at {
        out.push_str(&format!("{:<18}{v:.4}\n", format!("precision@{k}")));
    }
    for (k, v) in &m.recall_at {
        out.push_str(&format!("{:<18}{v:.4}\n", format!("recall@{k}")));
    }
    out.push_str(&format!("{:<18}{:.4}\n", "recall", m.recall));
    out.push_str(&format!("{:<18}{:.4}\n", "auc", m.auc));
    out.push_str(&format!(
        "{:<18}{} of {}\n",
        "positives found", m.positives_found, m.positives_total
    ));
    out
}
