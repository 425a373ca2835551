//! Corpus ingestion and term mapping.
//!
//! Documents arrive as JSONL, a 3-column TSV of abstracts, or a directory
//! of plain-text files. Mapping walks each document's token stream with a
//! greedy longest-match against the lexicon surface index (up to 4-token
//! surfaces), resolves polysemous surfaces from document context plus
//! corpus-wide priors, and records unmatched tokens as unknown terms.
//!
//! Documents are independent, so both mapping passes run in parallel over
//! a frozen store; the priors the second pass needs are merged from the
//! first pass sequentially, which keeps the whole procedure deterministic.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Lexicon, TaxonPath};
use crate::token::tokenize;

/// Weight of the prior term in the disambiguation score.
pub const DEFAULT_LAMBDA: f64 = 0.2;

/// Taxonomy depth at which sense/context agreement is measured.
const DISAMBIGUATION_LEVEL: usize = 3;

/// Longest lexicon surface, in tokens, tried during greedy matching.
const MAX_MATCH_TOKENS: usize = 4;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus input: {0}")]
    Io(#[from] std::io::Error),
    #[error("duplicate doc_id {0}")]
    DuplicateDocId(String),
    #[error("unsupported corpus format \"{0}\"")]
    UnsupportedFormat(String),
    #[error("corpus contains no documents")]
    Empty,
}

/// Where a document came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocSource {
    Pubmed,
    Trial,
    Internal,
    Synthetic,
}

impl fmt::Display for DocSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DocSource::Pubmed => "pubmed",
            DocSource::Trial => "trial",
            DocSource::Internal => "internal",
            DocSource::Synthetic => "synthetic",
        };
        write!(f, "{s}")
    }
}

impl FromStr for DocSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pubmed" => Ok(DocSource::Pubmed),
            "trial" => Ok(DocSource::Trial),
            "internal" => Ok(DocSource::Internal),
            "synthetic" => Ok(DocSource::Synthetic),
            other => Err(format!("unknown source \"{other}\"")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    pub source: DocSource,
}

impl Document {
    /// The token stream mapping runs over: title tokens twice, then body.
    /// Doubling the title is the recorded weighting choice.
    pub fn token_stream(&self) -> Vec<String> {
        let title = tokenize(&self.title);
        let body = tokenize(&self.body);
        let mut stream = Vec::with_capacity(title.len() * 2 + body.len());
        stream.extend(title.iter().cloned());
        stream.extend(title);
        stream.extend(body);
        stream
    }
}

/// An immutable, id-indexed document collection.
#[derive(Debug, Clone)]
pub struct CorpusStore {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl CorpusStore {
    /// Freezes a document list into a store; duplicate ids are a hard error.
    pub fn from_documents(docs: Vec<Document>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(docs.len());
        for (idx, doc) in docs.iter().enumerate() {
            if by_id.insert(doc.doc_id.clone(), idx).is_some() {
                return Err(CorpusError::DuplicateDocId(doc.doc_id.clone()));
            }
        }
        Ok(Self { docs, by_id })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.by_id.get(doc_id).map(|&i| &self.docs[i])
    }

    /// One JSON object per line, in store order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for doc in &self.docs {
            out.push_str(&serde_json::to_string(doc).expect("document serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestFormat {
    Jsonl,
    PubmedTsv,
    Textdir,
}

impl FromStr for IngestFormat {
    type Err = CorpusError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(IngestFormat::Jsonl),
            "pubmed_tsv" => Ok(IngestFormat::PubmedTsv),
            "textdir" => Ok(IngestFormat::Textdir),
            other => Err(CorpusError::UnsupportedFormat(other.to_string())),
        }
    }
}

/// A record that could not become a Document; ingestion keeps going.
#[derive(Debug, Clone)]
pub struct RecordIssue {
    pub location: String,
    pub reason: String,
}

impl fmt::Display for RecordIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.reason)
    }
}

pub struct IngestReport {
    pub store: CorpusStore,
    pub issues: Vec<RecordIssue>,
}

/// Reads a corpus file or directory. Record-level problems (missing ids,
/// empty bodies, unparseable lines) are collected and skipped; duplicate
/// doc_ids abort with a hard error naming the id.
pub fn ingest(path: &Path, format: IngestFormat) -> Result<IngestReport, CorpusError> {
    let (docs, issues) = match format {
        IngestFormat::Jsonl => ingest_jsonl(&std::fs::read_to_string(path)?),
        IngestFormat::PubmedTsv => ingest_pubmed_tsv(&std::fs::read_to_string(path)?),
        IngestFormat::Textdir => ingest_textdir(path)?,
    };
    let store = CorpusStore::from_documents(docs)?;
    Ok(IngestReport { store, issues })
}

#[derive(Deserialize)]
struct RawJsonDoc {
    doc_id: Option<String>,
    title: Option<String>,
    body: Option<String>,
    source: Option<String>,
}

fn ingest_jsonl(text: &str) -> (Vec<Document>, Vec<RecordIssue>) {
    let mut docs = Vec::new();
    let mut issues = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let issue = |reason: String| RecordIssue {
            location: format!("line {line_no}"),
            reason,
        };
        let raw: RawJsonDoc = match serde_json::from_str(trimmed) {
            Ok(raw) => raw,
            Err(e) => {
                issues.push(issue(format!("invalid JSON: {e}")));
                continue;
            }
        };
        let doc_id = match raw.doc_id.filter(|s| !s.trim().is_empty()) {
            Some(id) => id,
            None => {
                issues.push(issue("missing doc_id".to_string()));
                continue;
            }
        };
        let body = match raw.body.filter(|s| !s.trim().is_empty()) {
            Some(b) => b,
            None => {
                issues.push(issue(format!("doc {doc_id}: empty body")));
                continue;
            }
        };
        let source = match raw.source {
            None => DocSource::Internal,
            Some(s) => match s.parse() {
                Ok(src) => src,
                Err(e) => {
                    issues.push(issue(format!("doc {doc_id}: {e}")));
                    continue;
                }
            },
        };
        docs.push(Document {
            doc_id,
            title: raw.title.unwrap_or_default(),
            body,
            source,
        });
    }
    (docs, issues)
}

fn ingest_pubmed_tsv(text: &str) -> (Vec<Document>, Vec<RecordIssue>) {
    let mut docs = Vec::new();
    let mut issues = Vec::new();
    let mut saw_data = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        // An optional header row is recognized by its first column.
        if !saw_data && cols[0].eq_ignore_ascii_case("pmid") {
            saw_data = true;
            continue;
        }
        saw_data = true;
        if cols.len() != 3 {
            issues.push(RecordIssue {
                location: format!("line {line_no}"),
                reason: format!("expected 3 columns, found {}", cols.len()),
            });
            continue;
        }
        let (pmid, title, abstract_) = (cols[0].trim(), cols[1], cols[2]);
        if pmid.is_empty() {
            issues.push(RecordIssue {
                location: format!("line {line_no}"),
                reason: "missing pmid".to_string(),
            });
            continue;
        }
        if abstract_.trim().is_empty() {
            issues.push(RecordIssue {
                location: format!("line {line_no}"),
                reason: format!("doc {pmid}: empty abstract"),
            });
            continue;
        }
        docs.push(Document {
            doc_id: pmid.to_string(),
            title: title.to_string(),
            body: abstract_.to_string(),
            source: DocSource::Pubmed,
        });
    }
    (docs, issues)
}

fn ingest_textdir(dir: &Path) -> Result<(Vec<Document>, Vec<RecordIssue>), CorpusError> {
    let mut paths: Vec<std::path::PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
        .collect();
    paths.sort();
    let mut docs = Vec::new();
    let mut issues = Vec::new();
    for path in paths {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let body = std::fs::read_to_string(&path)?;
        if body.trim().is_empty() {
            issues.push(RecordIssue {
                location: path.display().to_string(),
                reason: "empty body".to_string(),
            });
            continue;
        }
        docs.push(Document {
            doc_id: stem,
            title: String::new(),
            body,
            source: DocSource::Internal,
        });
    }
    Ok((docs, issues))
}

/// What a matched or unmatched surface resolved to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Group(String),
    Unknown,
}

/// One surface occurrence in a document's token stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    /// The normalized surface as matched (tokens joined by spaces).
    pub surface: String,
    pub resolution: Resolution,
    /// Index of the first token of this surface in the token stream.
    pub position: usize,
}

#[derive(Debug, Clone)]
pub struct MappedDocument {
    pub doc_id: String,
    pub occurrences: Vec<Occurrence>,
    /// Tally of group-resolved occurrences.
    pub group_counts: BTreeMap<String, usize>,
}

/// All mapped documents plus the corpus-wide group frequencies
/// (the sum of every document's final group_counts).
#[derive(Debug, Clone)]
pub struct MappedCorpus {
    pub docs: Vec<MappedDocument>,
    pub group_frequencies: BTreeMap<String, usize>,
}

/// A surface the lexicon does not know, with its corpus footprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownTerm {
    pub surface: String,
    pub doc_frequency: usize,
    pub total_frequency: usize,
    /// Up to 20 containing doc_ids, in corpus order.
    pub sample_doc_ids: Vec<String>,
}

/// One token stream item after the greedy matching pass.
enum SegItem {
    Resolved(Occurrence),
    /// Polysemous surface awaiting sense resolution.
    Pending {
        surface: String,
        senses: BTreeSet<String>,
        position: usize,
    },
}

struct SegmentedDoc {
    doc_id: String,
    items: Vec<SegItem>,
    /// Counts of unambiguously resolved groups; the disambiguation context.
    unambiguous: BTreeMap<String, usize>,
}

/// Noise filter for unknown candidates: too short, or digits/hyphens only.
fn is_noise(token: &str) -> bool {
    token.chars().count() < 3 || token.chars().all(|c| c.is_ascii_digit() || c == '-')
}

/// Greedy longest-match pass over one document. Unambiguous surfaces are
/// resolved immediately; polysemous ones are parked for the second pass.
fn segment(doc: &Document, lex: &Lexicon) -> SegmentedDoc {
    let stream = doc.token_stream();
    let mut items = Vec::new();
    let mut unambiguous: BTreeMap<String, usize> = BTreeMap::new();
    let mut i = 0;
    while i < stream.len() {
        let mut matched = false;
        let longest = MAX_MATCH_TOKENS.min(stream.len() - i);
        for n in (1..=longest).rev() {
            let key = stream[i..i + n].join(" ");
            let Some(senses) = lex.lookup_normalized(&key) else {
                continue;
            };
            if senses.len() == 1 {
                let group = senses.iter().next().unwrap().clone();
                *unambiguous.entry(group.clone()).or_insert(0) += 1;
                items.push(SegItem::Resolved(Occurrence {
                    surface: key,
                    resolution: Resolution::Group(group),
                    position: i,
                }));
            } else {
                items.push(SegItem::Pending {
                    surface: key,
                    senses: senses.clone(),
                    position: i,
                });
            }
            i += n;
            matched = true;
            break;
        }
        if !matched {
            let token = &stream[i];
            if !is_noise(token) {
                items.push(SegItem::Resolved(Occurrence {
                    surface: token.clone(),
                    resolution: Resolution::Unknown,
                    position: i,
                }));
            }
            i += 1;
        }
    }
    SegmentedDoc {
        doc_id: doc.doc_id.clone(),
        items,
        unambiguous,
    }
}

/// The taxonomy node at which a group participates in disambiguation:
/// its hypernym path cut to the configured level.
fn disambiguation_node(lex: &Lexicon, group_id: &str) -> Option<TaxonPath> {
    let group = lex.group(group_id)?;
    let depth = group.hypernym.depth().min(DISAMBIGUATION_LEVEL);
    Some(group.hypernym.prefix(depth))
}

/// Picks the sense of a polysemous surface.
///
/// Each sense is scored as the cosine between the context's distribution
/// over level-3 taxonomy nodes and the sense's own level-3 node, plus
/// `lambda` times the sense's prior normalized over the sense set. Ties go
/// to the higher raw prior, then the lexicographically smaller group_id.
pub fn disambiguate(
    senses: &BTreeSet<String>,
    context: &BTreeMap<String, usize>,
    prior: &BTreeMap<String, usize>,
    lex: &Lexicon,
    lambda: f64,
) -> String {
    assert!(senses.len() >= 2, "disambiguate needs at least two senses");

    // Context mass per level-3 node.
    let mut node_mass: BTreeMap<TaxonPath, f64> = BTreeMap::new();
    for (group_id, &count) in context {
        if let Some(node) = disambiguation_node(lex, group_id) {
            *node_mass.entry(node).or_insert(0.0) += count as f64;
        }
    }
    let context_norm = node_mass.values().map(|m| m * m).sum::<f64>().sqrt();

    let prior_total: usize = senses
        .iter()
        .map(|s| prior.get(s).copied().unwrap_or(0))
        .sum();

    let mut best: Option<(f64, usize, String)> = None;
    for sense in senses {
        let raw_prior = prior.get(sense).copied().unwrap_or(0);
        let normalized_prior = if prior_total == 0 {
            1.0 / senses.len() as f64
        } else {
            raw_prior as f64 / prior_total as f64
        };
        // Cosine against a point mass at the sense's node.
        let cos = match disambiguation_node(lex, sense) {
            Some(node) if context_norm > 0.0 => {
                node_mass.get(&node).copied().unwrap_or(0.0) / context_norm
            }
            _ => 0.0,
        };
        let score = cos + lambda * normalized_prior;
        let better = match &best {
            None => true,
            Some((bs, bp, _)) => score > *bs || (score == *bs && raw_prior > *bp),
        };
        if better {
            best = Some((score, raw_prior, sense.clone()));
        }
    }
    best.expect("at least one sense").2
}

/// Resolves a segmented document's pending occurrences into a final
/// MappedDocument, using the given corpus-wide priors.
fn finalize(
    seg: SegmentedDoc,
    lex: &Lexicon,
    priors: &BTreeMap<String, usize>,
    lambda: f64,
) -> MappedDocument {
    let mut occurrences = Vec::with_capacity(seg.items.len());
    let mut group_counts = seg.unambiguous.clone();
    for item in seg.items {
        match item {
            SegItem::Resolved(occ) => occurrences.push(occ),
            SegItem::Pending {
                surface,
                senses,
                position,
            } => {
                let group = disambiguate(&senses, &seg.unambiguous, priors, lex, lambda);
                *group_counts.entry(group.clone()).or_insert(0) += 1;
                occurrences.push(Occurrence {
                    surface,
                    resolution: Resolution::Group(group),
                    position,
                });
            }
        }
    }
    MappedDocument {
        doc_id: seg.doc_id,
        occurrences,
        group_counts,
    }
}

/// Maps a single document against the lexicon. The document serves as its
/// own one-document corpus: its unambiguous counts are both the context
/// and the prior for any polysemous surface it contains.
pub fn map_terms(doc: &Document, lex: &Lexicon) -> MappedDocument {
    let seg = segment(doc, lex);
    let priors = seg.unambiguous.clone();
    finalize(seg, lex, &priors, DEFAULT_LAMBDA)
}

/// Maps every document in the store.
///
/// Two parallel passes with a sequential merge in between: pass one
/// segments each document and resolves unambiguous surfaces, the merge
/// folds those counts into corpus-wide priors in document order, and pass
/// two disambiguates the pending occurrences against the frozen priors.
/// The result is byte-identical regardless of worker count.
pub fn map_corpus(store: &CorpusStore, lex: &Lexicon, lambda: f64) -> MappedCorpus {
    let segmented: Vec<SegmentedDoc> = store.docs().par_iter().map(|d| segment(d, lex)).collect();

    let mut priors: BTreeMap<String, usize> = BTreeMap::new();
    for seg in &segmented {
        for (group, count) in &seg.unambiguous {
            *priors.entry(group.clone()).or_insert(0) += count;
        }
    }

    let docs: Vec<MappedDocument> = segmented
        .into_par_iter()
        .map(|seg| finalize(seg, lex, &priors, lambda))
        .collect();

    let mut group_frequencies: BTreeMap<String, usize> = BTreeMap::new();
    for doc in &docs {
        for (group, count) in &doc.group_counts {
            *group_frequencies.entry(group.clone()).or_insert(0) += count;
        }
    }
    MappedCorpus {
        docs,
        group_frequencies,
    }
}

/// Tallies distinct unknown surfaces across the mapped corpus, ordered by
/// descending total frequency (ties: ascending surface).
pub fn collect_unknowns(mapped: &MappedCorpus) -> Vec<UnknownTerm> {
    struct Tally {
        doc_frequency: usize,
        total_frequency: usize,
        sample_doc_ids: Vec<String>,
    }
    let mut tallies: BTreeMap<&str, Tally> = BTreeMap::new();
    for doc in &mapped.docs {
        let mut seen_here: BTreeSet<&str> = BTreeSet::new();
        for occ in &doc.occurrences {
            if occ.resolution != Resolution::Unknown {
                continue;
            }
            let tally = tallies.entry(occ.surface.as_str()).or_insert(Tally {
                doc_frequency: 0,
                total_frequency: 0,
                sample_doc_ids: Vec::new(),
            });
            tally.total_frequency += 1;
            if seen_here.insert(occ.surface.as_str()) {
                tally.doc_frequency += 1;
                if tally.sample_doc_ids.len() < 20 {
                    tally.sample_doc_ids.push(doc.doc_id.clone());
                }
            }
        }
    }
    let mut unknowns: Vec<UnknownTerm> = tallies
        .into_iter()
        .map(|(surface, t)| UnknownTerm {
            surface: surface.to_string(),
            doc_frequency: t.doc_frequency,
            total_frequency: t.total_frequency,
            sample_doc_ids: t.sample_doc_ids,
        })
        .collect();
    unknowns.sort_by(|a, b| {
        b.total_frequency
            .cmp(&a.total_frequency)
            .then_with(|| a.surface.cmp(&b.surface))
    });
    unknowns
}
