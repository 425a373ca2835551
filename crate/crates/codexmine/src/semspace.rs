//! The k-dimensional semantic space: dimension selection, document
//! vectorization, and the composite similarity measure.
//!
//! Dimensions are descriptors — taxonomy nodes at levels 2..7 or synonym
//! groups — scored by W(g) = ln(1 + F(g)) · (1 − H_norm(g)), which rewards
//! descriptors that are frequent but concentrated in few documents.
//! Documents become tf·idf vectors over the chosen dimensions; a group
//! occurrence also feeds every taxonomy-node dimension on its hypernym
//! chain. Similarity blends three [0,1] ingredients: the vector cosine,
//! a bounded reciprocal of the symmetrized Kullback–Leibler divergence
//! between main-topic distributions, and descriptor-support overlap that
//! credits shared taxonomy ancestors.
//!
//! All reductions run in a fixed index order, so every result here is
//! bit-reproducible across runs and thread counts.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::corpus::{MappedCorpus, MappedDocument};
use crate::lexicon::{Lexicon, TaxonPath};

/// Smoothing mass mixed into the second argument of kl_divergence.
pub const KL_EPSILON: f64 = 1e-9;

/// Taxonomy nodes shallower than this never become dimensions or count
/// as shared ancestors: level-1 roots are too coarse to discriminate.
const MIN_TAXON_LEVEL: usize = 2;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("only {found} candidate descriptors for k = {needed}")]
    NotEnoughCandidates { found: usize, needed: usize },
    #[error("distribution has a negative entry at index {0}")]
    NegativeEntry(usize),
    #[error("distribution sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("similarity weights sum to {0}, not 1")]
    BadWeights(f64),
    #[error("cannot take the centroid of zero members")]
    EmptyMembers,
    #[error("manifest line {line}: {reason}")]
    ManifestParse { line: usize, reason: String },
    #[error("manifest references unknown descriptor \"{0}\"")]
    UnknownDescriptor(String),
    #[error("cannot read manifest: {0}")]
    Io(#[from] std::io::Error),
}

/// One axis of the semantic space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Descriptor {
    Taxon(TaxonPath),
    Group(String),
}

impl Descriptor {
    /// Canonical prefixed id; the lexicographic tie-break key.
    pub fn id(&self) -> String {
        match self {
            Descriptor::Taxon(path) => format!("taxon:{path}"),
            Descriptor::Group(gid) => format!("group:{gid}"),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Descriptor::Taxon(_) => "taxon",
            Descriptor::Group(_) => "group",
        }
    }

    /// The id without its kind prefix, as written in manifest files.
    pub fn bare_id(&self) -> String {
        match self {
            Descriptor::Taxon(path) => path.to_string(),
            Descriptor::Group(gid) => gid.clone(),
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// The frozen k-dimensional space. Immutable after construction; cheap to
/// share across threads.
#[derive(Debug, Clone)]
pub struct SemanticSpace {
    dims: Vec<Descriptor>,
    w_scores: Vec<f64>,
    idf: Vec<f64>,
    /// For each lexicon group: the dimension indices an occurrence feeds
    /// (its own group dimension plus chain taxon dimensions).
    group_dims: HashMap<String, Vec<usize>>,
    /// Interned descriptor-id sets used by the support-overlap term: the
    /// dimension itself plus, for group dimensions, its taxonomy ancestors
    /// at levels >= 2.
    expansions: Vec<Vec<u32>>,
}

impl SemanticSpace {
    pub fn k(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[Descriptor] {
        &self.dims
    }

    pub fn w_scores(&self) -> &[f64] {
        &self.w_scores
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    /// One TSV row per dimension: index, bare id, kind, W, idf.
    /// Floats are printed in shortest round-trip form.
    pub fn to_manifest_tsv(&self) -> String {
        let mut out = String::from("index\tid\tkind\tw_score\tidf\n");
        for (i, dim) in self.dims.iter().enumerate() {
            out.push_str(&format!(
                "{i}\t{}\t{}\t{}\t{}\n",
                dim.bare_id(),
                dim.kind(),
                self.w_scores[i],
                self.idf[i]
            ));
        }
        out
    }

    /// Rebuilds a space from manifest text; the lexicon must be the one
    /// the manifest was built from.
    pub fn from_manifest_tsv(text: &str, lex: &Lexicon) -> Result<Self, SpaceError> {
        let mut dims = Vec::new();
        let mut w_scores = Vec::new();
        let mut idf = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols[0] == "index" {
                continue;
            }
            if cols.len() != 5 {
                return Err(SpaceError::ManifestParse {
                    line: line_no,
                    reason: format!("expected 5 columns, found {}", cols.len()),
                });
            }
            let parse_err = |reason: String| SpaceError::ManifestParse {
                line: line_no,
                reason,
            };
            let index: usize = cols[0]
                .parse()
                .map_err(|e| parse_err(format!("bad index: {e}")))?;
            if index != dims.len() {
                return Err(parse_err(format!(
                    "index {index} out of order, expected {}",
                    dims.len()
                )));
            }
            let dim = match cols[2] {
                "taxon" => {
                    let path = TaxonPath::parse(cols[1]).map_err(&parse_err)?;
                    if !lex.taxonomy().contains(&path) {
                        return Err(SpaceError::UnknownDescriptor(cols[1].to_string()));
                    }
                    Descriptor::Taxon(path)
                }
                "group" => {
                    if lex.group(cols[1]).is_none() {
                        return Err(SpaceError::UnknownDescriptor(cols[1].to_string()));
                    }
                    Descriptor::Group(cols[1].to_string())
                }
                other => return Err(parse_err(format!("unknown kind \"{other}\""))),
            };
            let w: f64 = cols[3]
                .parse()
                .map_err(|e| parse_err(format!("bad w_score: {e}")))?;
            let idf_v: f64 = cols[4]
                .parse()
                .map_err(|e| parse_err(format!("bad idf: {e}")))?;
            dims.push(dim);
            w_scores.push(w);
            idf.push(idf_v);
        }
        if dims.len() < 2 {
            return Err(SpaceError::InvalidK(dims.len()));
        }
        Ok(Self::assemble(dims, w_scores, idf, lex))
    }

    /// Wires up the derived lookup tables for a chosen dimension list.
    fn assemble(dims: Vec<Descriptor>, w_scores: Vec<f64>, idf: Vec<f64>, lex: &Lexicon) -> Self {
        let dim_index: HashMap<&Descriptor, usize> =
            dims.iter().enumerate().map(|(i, d)| (d, i)).collect();

        let mut group_dims: HashMap<String, Vec<usize>> = HashMap::new();
        for group in lex.groups() {
            let mut indices = Vec::new();
            let own = Descriptor::Group(group.group_id.clone());
            if let Some(&i) = dim_index.get(&own) {
                indices.push(i);
            }
            for node in group.hypernym.chain() {
                if node.depth() < MIN_TAXON_LEVEL {
                    continue;
                }
                if let Some(&i) = dim_index.get(&Descriptor::Taxon(node)) {
                    indices.push(i);
                }
            }
            if !indices.is_empty() {
                indices.sort_unstable();
                group_dims.insert(group.group_id.clone(), indices);
            }
        }

        // Intern descriptor ids for the overlap term in a fixed order so
        // the numbering is deterministic.
        let mut intern: HashMap<String, u32> = HashMap::new();
        let intern_id = |id: String, table: &mut HashMap<String, u32>| -> u32 {
            let next = table.len() as u32;
            *table.entry(id).or_insert(next)
        };
        let mut expansions = Vec::with_capacity(dims.len());
        for dim in &dims {
            let mut set = vec![intern_id(dim.id(), &mut intern)];
            if let Descriptor::Group(gid) = dim {
                if let Some(group) = lex.group(gid) {
                    for node in group.hypernym.chain() {
                        if node.depth() >= MIN_TAXON_LEVEL {
                            set.push(intern_id(Descriptor::Taxon(node).id(), &mut intern));
                        }
                    }
                }
            }
            set.sort_unstable();
            set.dedup();
            expansions.push(set);
        }

        Self {
            dims,
            w_scores,
            idf,
            group_dims,
            expansions,
        }
    }
}

/// Per-candidate corpus statistics: how often and how spread out.
struct CandidateStats {
    /// Occurrence count per containing document (values only; entropy is
    /// summed over the sorted counts so document order cannot matter).
    doc_counts: Vec<usize>,
    total: usize,
}

impl CandidateStats {
    fn doc_frequency(&self) -> usize {
        self.doc_counts.len()
    }

    /// ln(1 + F) · (1 − H_norm): frequency rewarded, spread penalized.
    fn w_score(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let f = self.total as f64;
        let df = self.doc_frequency();
        let h_norm = if df <= 1 {
            0.0
        } else {
            let mut sorted = self.doc_counts.clone();
            sorted.sort_unstable();
            let h: f64 = sorted
                .iter()
                .map(|&c| {
                    let p = c as f64 / f;
                    -p * p.ln()
                })
                .sum();
            h / (df as f64).ln()
        };
        (1.0 + f).ln() * (1.0 - h_norm)
    }
}

/// Tallies per-descriptor statistics over the mapped corpus. Group counts
/// feed the group's own entry plus every chain taxon at levels >= 2.
fn accumulate_stats(mapped: &MappedCorpus, lex: &Lexicon) -> BTreeMap<Descriptor, CandidateStats> {
    let mut stats: BTreeMap<Descriptor, BTreeMap<usize, usize>> = BTreeMap::new();
    for (doc_idx, doc) in mapped.docs.iter().enumerate() {
        for (group_id, &count) in &doc.group_counts {
            let Some(group) = lex.group(group_id) else {
                continue;
            };
            let own = Descriptor::Group(group_id.clone());
            *stats.entry(own).or_default().entry(doc_idx).or_insert(0) += count;
            for node in group.hypernym.chain() {
                if node.depth() < MIN_TAXON_LEVEL {
                    continue;
                }
                let key = Descriptor::Taxon(node);
                *stats.entry(key).or_default().entry(doc_idx).or_insert(0) += count;
            }
        }
    }
    stats
        .into_iter()
        .map(|(desc, by_doc)| {
            let doc_counts: Vec<usize> = by_doc.into_values().collect();
            let total = doc_counts.iter().sum();
            (desc, CandidateStats { doc_counts, total })
        })
        .collect()
}

/// Selects the k highest-W descriptors as the space's dimensions.
///
/// Candidates are all taxonomy nodes at levels 2..7 plus every group with
/// document frequency >= df_min. Ties in W break on the lexicographic
/// descriptor id, so the outcome is deterministic and independent of
/// document order.
pub fn select_dimensions(
    mapped: &MappedCorpus,
    lex: &Lexicon,
    k: usize,
    df_min: usize,
) -> Result<SemanticSpace, SpaceError> {
    if mapped.docs.is_empty() {
        return Err(SpaceError::EmptyCorpus);
    }
    if k < 2 {
        return Err(SpaceError::InvalidK(k));
    }
    let stats = accumulate_stats(mapped, lex);

    let mut candidates: Vec<(Descriptor, f64)> = Vec::new();
    // Taxonomy nodes are unconditional candidates (zero-presence nodes
    // simply score 0); groups must clear the df_min noise floor.
    for node in lex.taxonomy().nodes_at_depth(MIN_TAXON_LEVEL, 7) {
        let key = Descriptor::Taxon(node.clone());
        let w = stats.get(&key).map_or(0.0, |s| s.w_score());
        candidates.push((key, w));
    }
    for group in lex.groups() {
        let key = Descriptor::Group(group.group_id.clone());
        if let Some(s) = stats.get(&key) {
            if s.doc_frequency() >= df_min {
                let w = s.w_score();
                candidates.push((key, w));
            }
        }
    }

    if candidates.len() < k {
        return Err(SpaceError::NotEnoughCandidates {
            found: candidates.len(),
            needed: k,
        });
    }

    candidates.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("W scores are finite")
            .then_with(|| a.0.id().cmp(&b.0.id()))
    });
    candidates.truncate(k);

    let n = mapped.docs.len() as f64;
    let mut dims = Vec::with_capacity(k);
    let mut w_scores = Vec::with_capacity(k);
    let mut idf = Vec::with_capacity(k);
    for (desc, w) in candidates {
        let df = stats.get(&desc).map_or(0, |s| s.doc_frequency());
        dims.push(desc);
        w_scores.push(w);
        // Zero-presence dimensions get idf 0 to keep weights finite; their
        // tf is zero in every document anyway.
        idf.push(if df == 0 {
            0.0
        } else {
            (1.0 + n / df as f64).ln()
        });
    }
    Ok(SemanticSpace::assemble(dims, w_scores, idf, lex))
}

/// A document in the semantic space.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVector {
    pub doc_id: String,
    /// Raw tf·idf weights, one per dimension.
    pub w: Vec<f64>,
    /// L1-normalized topic distribution (uniform when w is all zero).
    pub p: Vec<f64>,
    /// L2-normalized direction (all zeros when w is all zero).
    pub unit: Vec<f64>,
    /// Sorted interned ids of supporting descriptors, ancestors included.
    pub support: Vec<u32>,
}

/// A labeled cluster representative in the semantic space.
#[derive(Debug, Clone)]
pub struct FeatureVector {
    pub label: String,
    /// Mean of the members' unit vectors, re-normalized to unit length.
    pub centroid: Vec<f64>,
    /// L1 normalization of the centroid (uniform when centroid is zero).
    pub topics: Vec<f64>,
    /// Sorted union of the members' support sets.
    pub support: Vec<u32>,
    pub member_doc_ids: Vec<String>,
    pub member_count: usize,
}

/// Anything similarity can compare: a direction, a topic distribution,
/// and a descriptor-support set, all in the same space.
pub trait SpacePoint {
    fn unit(&self) -> &[f64];
    fn topics(&self) -> &[f64];
    fn support(&self) -> &[u32];
}

impl SpacePoint for DocVector {
    fn unit(&self) -> &[f64] {
        &self.unit
    }
    fn topics(&self) -> &[f64] {
        &self.p
    }
    fn support(&self) -> &[u32] {
        &self.support
    }
}

impl SpacePoint for FeatureVector {
    fn unit(&self) -> &[f64] {
        &self.centroid
    }
    fn topics(&self) -> &[f64] {
        &self.topics
    }
    fn support(&self) -> &[u32] {
        &self.support
    }
}

fn l1_normalize_or_uniform(w: &[f64]) -> Vec<f64> {
    let sum: f64 = w.iter().sum();
    if sum > 0.0 {
        w.iter().map(|x| x / sum).collect()
    } else {
        vec![1.0 / w.len() as f64; w.len()]
    }
}

fn l2_normalize_or_zero(w: &[f64]) -> Vec<f64> {
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        w.iter().map(|x| x / norm).collect()
    } else {
        vec![0.0; w.len()]
    }
}

/// Projects a mapped document onto the space: w_i = tf_i · idf_i, where a
/// group occurrence counts toward its own dimension and every chain taxon
/// dimension. A document touching no dimension yields the zero vector with
/// a uniform topic distribution.
pub fn vectorize(mdoc: &MappedDocument, space: &SemanticSpace) -> DocVector {
    let k = space.k();
    let mut tf = vec![0usize; k];
    for (group_id, &count) in &mdoc.group_counts {
        if let Some(indices) = space.group_dims.get(group_id) {
            for &i in indices {
                tf[i] += count;
            }
        }
    }
    let w: Vec<f64> = (0..k).map(|i| tf[i] as f64 * space.idf[i]).collect();
    let p = l1_normalize_or_uniform(&w);
    let unit = l2_normalize_or_zero(&w);
    let mut support = Vec::new();
    for (i, &weight) in w.iter().enumerate() {
        if weight > 0.0 {
            support.extend_from_slice(&space.expansions[i]);
        }
    }
    support.sort_unstable();
    support.dedup();
    DocVector {
        doc_id: mdoc.doc_id.clone(),
        w,
        p,
        unit,
        support,
    }
}

/// Mean of the members' unit vectors, re-normalized; support is the union
/// of member supports. Summation runs per index over members in the given
/// order, so reorderings agree to float-noise level.
pub fn centroid_of<T: SpacePoint>(points: &[&T], label: &str) -> Result<FeatureVector, SpaceError> {
    let first = points.first().ok_or(SpaceError::EmptyMembers)?;
    let k = first.unit().len();
    let mut mean = vec![0.0; k];
    for point in points {
        let u = point.unit();
        for i in 0..k {
            mean[i] += u[i];
        }
    }
    let n = points.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    let centroid = l2_normalize_or_zero(&mean);
    let topics = l1_normalize_or_uniform(&centroid);
    let mut support = Vec::new();
    for point in points {
        support.extend_from_slice(point.support());
    }
    support.sort_unstable();
    support.dedup();
    Ok(FeatureVector {
        label: label.to_string(),
        centroid,
        topics,
        support,
        member_doc_ids: Vec::new(),
        member_count: points.len(),
    })
}

/// Centroid of documents, keeping their ids as the member list.
pub fn centroid(members: &[&DocVector], label: &str) -> Result<FeatureVector, SpaceError> {
    let mut fv = centroid_of(members, label)?;
    fv.member_doc_ids = members.iter().map(|d| d.doc_id.clone()).collect();
    Ok(fv)
}

fn validate_distribution(p: &[f64]) -> Result<(), SpaceError> {
    for (i, &x) in p.iter().enumerate() {
        if x < 0.0 {
            return Err(SpaceError::NegativeEntry(i));
        }
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(SpaceError::NotNormalized(sum));
    }
    Ok(())
}

/// Shannon entropy in nats, with 0·ln 0 = 0.
pub fn entropy(p: &[f64]) -> Result<f64, SpaceError> {
    validate_distribution(p)?;
    let h = p
        .iter()
        .map(|&x| if x > 0.0 { -x * x.ln() } else { 0.0 })
        .sum();
    Ok(h)
}

/// Kullback–Leibler divergence KL(p ‖ q') in nats, where q' mixes q with
/// a uniform epsilon so zero bins of q stay finite.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, SpaceError> {
    if p.len() != q.len() {
        return Err(SpaceError::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    validate_distribution(p)?;
    validate_distribution(q)?;
    let uniform = 1.0 / q.len() as f64;
    let kl = p
        .iter()
        .zip(q.iter())
        .map(|(&pi, &qi)| {
            if pi > 0.0 {
                let qs = (1.0 - KL_EPSILON) * qi + KL_EPSILON * uniform;
                pi * (pi / qs).ln()
            } else {
                0.0
            }
        })
        .sum();
    Ok(kl)
}

/// Weights of the three similarity ingredients plus the main-topic cutoff.
#[derive(Debug, Clone)]
pub struct SimilarityParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub top_m: usize,
}

impl Default for SimilarityParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.25,
            gamma: 0.25,
            top_m: 10,
        }
    }
}

impl SimilarityParams {
    pub fn validate(&self) -> Result<(), SpaceError> {
        let sum = self.alpha + self.beta + self.gamma;
        if (sum - 1.0).abs() > 1e-9 || self.alpha < 0.0 || self.beta < 0.0 || self.gamma < 0.0 {
            return Err(SpaceError::BadWeights(sum));
        }
        Ok(())
    }
}

/// Indices of the m largest topics, ties broken toward lower index.
fn top_m_indices(p: &[f64], m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        p[b].partial_cmp(&p[a])
            .expect("topic masses are finite")
            .then_with(|| a.cmp(&b))
    });
    order.truncate(m);
    order
}

/// Restricts p to the given sorted index set and renormalizes; a zero
/// restriction becomes uniform over the set.
fn restrict(p: &[f64], indices: &[usize]) -> Vec<f64> {
    let slice: Vec<f64> = indices.iter().map(|&i| p[i]).collect();
    l1_normalize_or_uniform(&slice)
}

/// Jaccard overlap of two sorted interned support sets. Two empty sets
/// count as identical (overlap 1).
fn jaccard(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (mut i, mut j) = (0, 0);
    let mut intersection = 0usize;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                intersection += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - intersection;
    intersection as f64 / union as f64
}

/// The composite similarity in [0,1]:
/// α·max(0, cos) + β·1/(1 + KL_sym over the joint main topics) + γ·overlap.
///
/// KL_sym averages both divergence directions over the union of the two
/// top-m topic index sets, renormalized. Two all-zero vectors compare as
/// identical — they are indistinguishable in this space.
pub fn similarity<A: SpacePoint, B: SpacePoint>(
    a: &A,
    b: &B,
    params: &SimilarityParams,
) -> Result<f64, SpaceError> {
    params.validate()?;
    let (ua, ub) = (a.unit(), b.unit());
    if ua.len() != ub.len() {
        return Err(SpaceError::DimensionMismatch {
            left: ua.len(),
            right: ub.len(),
        });
    }

    let norm_a = ua.iter().map(|x| x * x).sum::<f64>();
    let norm_b = ub.iter().map(|x| x * x).sum::<f64>();
    let cos = if norm_a == 0.0 && norm_b == 0.0 {
        1.0
    } else {
        ua.iter().zip(ub.iter()).map(|(x, y)| x * y).sum::<f64>()
    };

    let mut union: Vec<usize> = top_m_indices(a.topics(), params.top_m);
    union.extend(top_m_indices(b.topics(), params.top_m));
    union.sort_unstable();
    union.dedup();
    let pa = restrict(a.topics(), &union);
    let pb = restrict(b.topics(), &union);
    let kl_sym = (kl_divergence(&pa, &pb)? + kl_divergence(&pb, &pa)?) / 2.0;
    // Gibbs' inequality holds up to smoothing noise; clamp the residual.
    let kl_sym = kl_sym.max(0.0);

    let overlap = jaccard(a.support(), b.support());

    // Each term is bounded by its weight, but unit-vector dot products
    // can carry an ulp of excess; clamp so callers get a true [0,1].
    let sim = params.alpha * cos.max(0.0) + params.beta / (1.0 + kl_sym) + params.gamma * overlap;
    Ok(sim.clamp(0.0, 1.0))
}

/// Semantic deviation d = 1 − similarity, the discovery-side distance.
pub fn semantic_deviation<A: SpacePoint, B: SpacePoint>(
    a: &A,
    b: &B,
    params: &SimilarityParams,
) -> Result<f64, SpaceError> {
    Ok(1.0 - similarity(a, b, params)?)
}
