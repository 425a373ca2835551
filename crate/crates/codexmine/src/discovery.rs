//! The four-step discovery procedure.
//!
//! Step 1 turns seed terms into reference models: documents containing a
//! seed synonym together with a target synonym are clustered (k-medoids in
//! similarity space) and each cluster's centroid becomes a mathematical
//! model of what, say, "biomarker for diabetes" means. Step 2 infers the
//! meaning of unknown terms from the company they keep: a constructed
//! hypernym plus associated descriptors. Step 3 screens every candidate —
//! lexicon groups and unknowns that point into the taxonomy whitelist —
//! by its semantic deviation from the nearest reference centroid. Step 4
//! scores the survivors and emits them as a ranked table.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{MappedCorpus, Resolution, UnknownTerm};
use crate::lexicon::{Lexicon, TaxonPath};
use crate::semspace::{
    centroid, centroid_of, semantic_deviation, DocVector, FeatureVector, SimilarityParams,
    SpaceError,
};

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("cannot read file: {0}")]
    Io(#[from] std::io::Error),
    #[error("seed file line {line}: {reason}")]
    SeedParse { line: usize, reason: String },
    #[error("no seed term resolves against the lexicon")]
    NoSeedsResolve,
    #[error("no documents match any seed for {relationship} {target}")]
    NoMatchingDocs {
        relationship: String,
        target: String,
    },
    #[error("target \"{0}\" has no synonym group in the lexicon")]
    UnknownTarget(String),
    #[error("whitelist is empty")]
    EmptyWhitelist,
    #[error("insufficient evidence for \"{surface}\": document frequency {df} < 2")]
    InsufficientEvidence { surface: String, df: usize },
    #[error("documents containing \"{0}\" have no mapped terms")]
    EmptyContext(String),
    #[error("no reference models")]
    EmptyModels,
    #[error("threshold must lie in (0,1), got {0}")]
    BadTheta(f64),
    #[error("confidence called on non-qualified candidate: deviation {deviation} >= {theta}")]
    NotQualified { deviation: f64, theta: f64 },
    #[error("vector list does not align with the mapped corpus")]
    MisalignedVectors,
    #[error("candidate file line {line}: {reason}")]
    CandidateParse { line: usize, reason: String },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// One row of the seed-term file: (term, relationship, target).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedEntry {
    pub term: String,
    pub relationship: String,
    pub target: String,
}

/// Parses the seed TSV; "#" lines are comments.
pub fn parse_seed_file(text: &str) -> Result<Vec<SeedEntry>, DiscoveryError> {
    let mut seeds = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(DiscoveryError::SeedParse {
                line: line_no,
                reason: format!(
                    "expected 3 columns (term, relationship, target), found {}",
                    cols.len()
                ),
            });
        }
        let (term, relationship, target) = (cols[0].trim(), cols[1].trim(), cols[2].trim());
        if term.is_empty() || relationship.is_empty() || target.is_empty() {
            return Err(DiscoveryError::SeedParse {
                line: line_no,
                reason: "empty field".to_string(),
            });
        }
        seeds.push(SeedEntry {
            term: term.to_string(),
            relationship: relationship.to_string(),
            target: target.to_string(),
        });
    }
    Ok(seeds)
}

/// What to hunt for: the target concept, its synonym groups, and the
/// taxonomy regions candidates are allowed to come from.
#[derive(Debug, Clone)]
pub struct TargetSpec {
    pub label: String,
    pub relationships: Vec<String>,
    pub target_groups: BTreeSet<String>,
    pub whitelist: BTreeSet<TaxonPath>,
}

impl TargetSpec {
    /// Resolves a target label against the lexicon and collects the
    /// relationships the seed file pairs it with.
    pub fn build(
        label: &str,
        seeds: &[SeedEntry],
        lex: &Lexicon,
        whitelist: BTreeSet<TaxonPath>,
    ) -> Result<Self, DiscoveryError> {
        if whitelist.is_empty() {
            return Err(DiscoveryError::EmptyWhitelist);
        }
        let target_groups = lex.lookup(label);
        if target_groups.is_empty() {
            return Err(DiscoveryError::UnknownTarget(label.to_string()));
        }
        let mut relationships: Vec<String> = seeds
            .iter()
            .filter(|s| s.target == label)
            .map(|s| s.relationship.clone())
            .collect();
        relationships.sort();
        relationships.dedup();
        Ok(Self {
            label: label.to_string(),
            relationships,
            target_groups,
            whitelist,
        })
    }
}

/// Fast lookup from group ids and unknown surfaces to the (sorted) doc
/// indices containing them. Built once per mapped corpus.
#[derive(Debug, Default)]
pub struct OccurrenceIndex {
    pub by_group: BTreeMap<String, Vec<usize>>,
    pub by_unknown: BTreeMap<String, Vec<usize>>,
}

impl OccurrenceIndex {
    pub fn build(mapped: &MappedCorpus) -> Self {
        let mut by_group: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut by_unknown: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (idx, doc) in mapped.docs.iter().enumerate() {
            for group in doc.group_counts.keys() {
                by_group.entry(group.clone()).or_default().push(idx);
            }
            let mut seen: BTreeSet<&str> = BTreeSet::new();
            for occ in &doc.occurrences {
                if occ.resolution == Resolution::Unknown && seen.insert(&occ.surface) {
                    by_unknown.entry(occ.surface.clone()).or_default().push(idx);
                }
            }
        }
        Self {
            by_group,
            by_unknown,
        }
    }

    /// Sorted doc indices containing any of the given groups.
    fn docs_with_any(&self, groups: &BTreeSet<String>) -> Vec<usize> {
        let mut docs: Vec<usize> = groups
            .iter()
            .filter_map(|g| self.by_group.get(g))
            .flatten()
            .copied()
            .collect();
        docs.sort_unstable();
        docs.dedup();
        docs
    }
}

/// The three read-only views every discovery step consumes together: the
/// mapped corpus, its document vectors (aligned by index), and the
/// occurrence index.
#[derive(Clone, Copy)]
pub struct CorpusView<'a> {
    pub mapped: &'a MappedCorpus,
    pub vectors: &'a [DocVector],
    pub occ: &'a OccurrenceIndex,
}

impl<'a> CorpusView<'a> {
    pub fn new(
        mapped: &'a MappedCorpus,
        vectors: &'a [DocVector],
        occ: &'a OccurrenceIndex,
    ) -> Result<Self, DiscoveryError> {
        if vectors.len() != mapped.docs.len() {
            return Err(DiscoveryError::MisalignedVectors);
        }
        Ok(Self {
            mapped,
            vectors,
            occ,
        })
    }
}

/// The semantic models for one (relationship, target) pair.
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    pub relationship: String,
    pub target: String,
    /// Resolved seed terms this model was built from.
    pub seed_terms: Vec<String>,
    pub centroids: Vec<FeatureVector>,
}

/// Step 1: build one reference model per (relationship, target) pair in
/// the seed file. Returns the models plus the seed terms that did not
/// resolve against the lexicon (reported, skipped).
pub fn build_reference_models(
    seeds: &[SeedEntry],
    view: &CorpusView,
    lex: &Lexicon,
    clusters_per_model: usize,
    params: &SimilarityParams,
) -> Result<(Vec<ReferenceModel>, Vec<String>), DiscoveryError> {
    let mut unresolved = Vec::new();
    // (relationship, target) -> (resolved seed surfaces, seed group ids)
    let mut by_pair: BTreeMap<(String, String), (Vec<String>, BTreeSet<String>)> = BTreeMap::new();
    for seed in seeds {
        let groups = lex.lookup(&seed.term);
        if groups.is_empty() {
            unresolved.push(seed.term.clone());
            continue;
        }
        let entry = by_pair
            .entry((seed.relationship.clone(), seed.target.clone()))
            .or_default();
        entry.0.push(seed.term.clone());
        entry.1.extend(groups);
    }
    if by_pair.is_empty() {
        return Err(DiscoveryError::NoSeedsResolve);
    }

    let mut models = Vec::new();
    for ((relationship, target), (mut seed_terms, seed_groups)) in by_pair {
        seed_terms.sort();
        seed_terms.dedup();
        let target_groups = lex.lookup(&target);
        if target_groups.is_empty() {
            return Err(DiscoveryError::UnknownTarget(target));
        }
        let seed_docs = view.occ.docs_with_any(&seed_groups);
        let target_docs = view.occ.docs_with_any(&target_groups);
        let member_idx: Vec<usize> = intersect_sorted(&seed_docs, &target_docs);
        if member_idx.is_empty() {
            return Err(DiscoveryError::NoMatchingDocs {
                relationship,
                target,
            });
        }
        let members: Vec<&DocVector> = member_idx.iter().map(|&i| &view.vectors[i]).collect();
        let k = clusters_per_model.min(members.len()).max(1);
        let clusters = k_medoids(&members, k, params)?;
        let mut centroids = Vec::with_capacity(clusters.len());
        for (ci, cluster) in clusters.iter().enumerate() {
            let cluster_members: Vec<&DocVector> = cluster.iter().map(|&i| members[i]).collect();
            let label = format!("{relationship}:{target}:{ci}");
            centroids.push(centroid(&cluster_members, &label)?);
        }
        models.push(ReferenceModel {
            relationship,
            target,
            seed_terms,
            centroids,
        });
    }
    Ok((models, unresolved))
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Deterministic k-medoids over the pairwise semantic deviations.
///
/// The first medoid minimizes total deviation; the rest are farthest-first
/// picks. Assignment and medoid updates iterate to a fixed point (at most
/// 20 rounds), every tie resolving to the lowest index. Returns clusters
/// as index lists into `members`, each non-empty, in medoid pick order.
fn k_medoids(
    members: &[&DocVector],
    k: usize,
    params: &SimilarityParams,
) -> Result<Vec<Vec<usize>>, DiscoveryError> {
    let n = members.len();
    let dev: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| semantic_deviation(members[i], members[j], params).expect("same space"))
                .collect()
        })
        .collect();

    // Seed medoids: global center, then farthest-first.
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let first = (0..n)
        .min_by(|&a, &b| {
            let sa: f64 = dev[a].iter().sum();
            let sb: f64 = dev[b].iter().sum();
            sa.partial_cmp(&sb).unwrap().then_with(|| a.cmp(&b))
        })
        .expect("members non-empty");
    medoids.push(first);
    while medoids.len() < k {
        let next = (0..n)
            .filter(|i| !medoids.contains(i))
            .max_by(|&a, &b| {
                let da = medoids.iter().map(|&m| dev[a][m]).fold(f64::MAX, f64::min);
                let db = medoids.iter().map(|&m| dev[b][m]).fold(f64::MAX, f64::min);
                da.partial_cmp(&db).unwrap().then_with(|| b.cmp(&a))
            })
            .expect("fewer medoids than members");
        medoids.push(next);
    }

    let assign = |medoids: &[usize]| -> Vec<usize> {
        (0..n)
            .map(|i| {
                let mut best = 0;
                let mut best_d = f64::MAX;
                for (mi, &m) in medoids.iter().enumerate() {
                    if dev[i][m] < best_d {
                        best_d = dev[i][m];
                        best = mi;
                    }
                }
                best
            })
            .collect()
    };

    let mut assignment = assign(&medoids);
    for _ in 0..20 {
        let mut next_medoids = medoids.clone();
        for (mi, slot) in next_medoids.iter_mut().enumerate() {
            let cluster: Vec<usize> = (0..n).filter(|&i| assignment[i] == mi).collect();
            if cluster.is_empty() {
                continue;
            }
            *slot = cluster
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let sa: f64 = cluster.iter().map(|&j| dev[a][j]).sum();
                    let sb: f64 = cluster.iter().map(|&j| dev[b][j]).sum();
                    sa.partial_cmp(&sb).unwrap().then_with(|| a.cmp(&b))
                })
                .expect("cluster non-empty");
        }
        if next_medoids == medoids {
            break;
        }
        medoids = next_medoids;
        assignment = assign(&medoids);
    }

    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); medoids.len()];
    for (i, &mi) in assignment.iter().enumerate() {
        clusters[mi].push(i);
    }
    // An emptied cluster keeps its medoid as a singleton so every centroid
    // remains well-defined.
    for (mi, cluster) in clusters.iter_mut().enumerate() {
        if cluster.is_empty() {
            cluster.push(medoids[mi]);
        }
    }
    Ok(clusters)
}

/// Step 2 output: what an unknown term appears to mean.
#[derive(Debug, Clone)]
pub struct InferredMeaning {
    pub surface: String,
    /// The taxonomy node (level >= 2) whose neighborhood best matches the
    /// unknown term's context.
    pub hypernym: TaxonPath,
    /// Up to two nearest synonym groups present in the term's documents.
    pub descriptors: Vec<String>,
    /// Similarity between the context vector and the hypernym's centroid.
    pub score: f64,
}

/// Precomputed context centroids: one per covered synonym group, one per
/// taxonomy node (level >= 2) with covered member groups.
pub struct CentroidIndex {
    group_centroids: BTreeMap<String, FeatureVector>,
    node_centroids: BTreeMap<TaxonPath, FeatureVector>,
}

impl CentroidIndex {
    /// Builds centroids for every group that occurs in the corpus, then
    /// aggregates them into per-node centroids up the taxonomy.
    pub fn build(view: &CorpusView, lex: &Lexicon) -> Result<Self, DiscoveryError> {
        let entries: Vec<(String, FeatureVector)> = view
            .occ
            .by_group
            .par_iter()
            .map(|(group_id, doc_idx)| {
                let members: Vec<&DocVector> = doc_idx.iter().map(|&i| &view.vectors[i]).collect();
                let fv = centroid(&members, group_id).expect("doc list non-empty");
                (group_id.clone(), fv)
            })
            .collect();
        let group_centroids: BTreeMap<String, FeatureVector> = entries.into_iter().collect();

        let mut node_members: BTreeMap<TaxonPath, Vec<&FeatureVector>> = BTreeMap::new();
        for group in lex.groups() {
            let Some(fv) = group_centroids.get(&group.group_id) else {
                continue;
            };
            for node in group.hypernym.chain() {
                if node.depth() >= 2 {
                    node_members.entry(node).or_default().push(fv);
                }
            }
        }
        let mut node_centroids = BTreeMap::new();
        for (node, members) in node_members {
            let fv = centroid_of(&members, &node.to_string())?;
            node_centroids.insert(node, fv);
        }
        Ok(Self {
            group_centroids,
            node_centroids,
        })
    }

    pub fn group_centroid(&self, group_id: &str) -> Option<&FeatureVector> {
        self.group_centroids.get(group_id)
    }

    pub fn node_centroid(&self, node: &TaxonPath) -> Option<&FeatureVector> {
        self.node_centroids.get(node)
    }
}

/// Step 2: infer an unknown term's meaning from its containing documents.
///
/// The context vector is the centroid of the documents containing the
/// term. The constructed hypernym is the taxonomy node whose member-group
/// centroid is most similar to that context (ties: deeper path, then
/// lexicographic). Associated descriptors are the two nearest group
/// centroids among groups that actually occur in the term's documents.
pub fn infer_meaning(
    u: &UnknownTerm,
    view: &CorpusView,
    index: &CentroidIndex,
    params: &SimilarityParams,
) -> Result<InferredMeaning, DiscoveryError> {
    if u.doc_frequency < 2 {
        return Err(DiscoveryError::InsufficientEvidence {
            surface: u.surface.clone(),
            df: u.doc_frequency,
        });
    }
    let doc_idx = view
        .occ
        .by_unknown
        .get(&u.surface)
        .cloned()
        .unwrap_or_default();
    let members: Vec<&DocVector> = doc_idx.iter().map(|&i| &view.vectors[i]).collect();
    if members.is_empty() {
        return Err(DiscoveryError::EmptyContext(u.surface.clone()));
    }
    let context = centroid(&members, &u.surface)?;
    if context.centroid.iter().all(|&x| x == 0.0) {
        return Err(DiscoveryError::EmptyContext(u.surface.clone()));
    }

    // Ties favor the deeper node: along a single-child chain the member
    // sets coincide, the centroids are bit-identical, and the deeper
    // hypernym is the more informative answer.
    let mut best: Option<(f64, &TaxonPath)> = None;
    for (node, fv) in &index.node_centroids {
        let sim = crate::semspace::similarity(&context, fv, params)?;
        let better = match best {
            None => true,
            Some((bs, bn)) => {
                sim > bs
                    || (sim == bs
                        && (node.depth() > bn.depth() || (node.depth() == bn.depth() && node < bn)))
            }
        };
        if better {
            best = Some((sim, node));
        }
    }
    let (score, hypernym) = best.ok_or_else(|| DiscoveryError::EmptyContext(u.surface.clone()))?;

    // Groups present in the unknown term's documents, ranked by context
    // similarity; ties toward the smaller group id.
    let mut present: BTreeSet<&String> = BTreeSet::new();
    for &i in &doc_idx {
        present.extend(view.mapped.docs[i].group_counts.keys());
    }
    let mut ranked: Vec<(f64, &String)> = Vec::new();
    for group_id in present {
        if let Some(fv) = index.group_centroids.get(group_id) {
            let sim = crate::semspace::similarity(&context, fv, params)?;
            ranked.push((sim, group_id));
        }
    }
    ranked.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("similarities are finite")
            .then_with(|| a.1.cmp(b.1))
    });
    let descriptors: Vec<String> = ranked.iter().take(2).map(|(_, g)| (*g).clone()).collect();

    Ok(InferredMeaning {
        surface: u.surface.clone(),
        hypernym: hypernym.clone(),
        descriptors,
        score,
    })
}

/// A scored discovery: term, relationship, object, and the evidence.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub term: String,
    pub relationship: String,
    pub object: String,
    /// Minimum semantic deviation from the reference centroids.
    pub deviation: f64,
    /// Confidence percent in [0, 100].
    pub confidence: f64,
    pub support_doc_ids: Vec<String>,
}

/// Step 4's empirical score: 100 · (1 − d̄/θ) · n/(n + n₀), clamped to
/// [0, 100]. Errs when the candidate is not qualified (d̄ ≥ θ).
pub fn confidence(
    deviation: f64,
    support: usize,
    theta: f64,
    n0: f64,
) -> Result<f64, DiscoveryError> {
    if deviation >= theta {
        return Err(DiscoveryError::NotQualified { deviation, theta });
    }
    let n = support as f64;
    let conf = 100.0 * (1.0 - deviation / theta) * (n / (n + n0));
    Ok(conf.clamp(0.0, 100.0))
}

/// Everything generate_candidates needs beyond the corpus itself.
pub struct CandidateParams {
    pub theta: f64,
    pub n0: f64,
    pub min_support: usize,
    pub similarity: SimilarityParams,
}

/// Step 3: screen the candidate pool against the reference models.
///
/// The pool is every lexicon group whose hypernym chain meets the
/// whitelist (the target's own groups excluded) plus every inferred
/// unknown whose constructed hypernym points into the whitelist. A
/// candidate needs at least `min_support` documents containing it
/// together with a target synonym, and qualifies iff its support
/// centroid's deviation from the nearest reference centroid is below θ.
pub fn generate_candidates(
    view: &CorpusView,
    lex: &Lexicon,
    models: &[ReferenceModel],
    spec: &TargetSpec,
    inferred: &[InferredMeaning],
    cand: &CandidateParams,
) -> Result<Vec<Candidate>, DiscoveryError> {
    if models.is_empty() {
        return Err(DiscoveryError::EmptyModels);
    }
    if !(cand.theta > 0.0 && cand.theta < 1.0) {
        return Err(DiscoveryError::BadTheta(cand.theta));
    }
    let relevant: Vec<&ReferenceModel> = models.iter().filter(|m| m.target == spec.label).collect();
    if relevant.is_empty() {
        return Err(DiscoveryError::EmptyModels);
    }

    let whitelisted = |chain: &[TaxonPath]| chain.iter().any(|n| spec.whitelist.contains(n));
    let target_docs = view.occ.docs_with_any(&spec.target_groups);

    // Pool entries: (display term, containing-doc index list).
    let mut pool: Vec<(String, &Vec<usize>)> = Vec::new();
    for group in lex.groups() {
        if spec.target_groups.contains(&group.group_id) {
            continue;
        }
        if !whitelisted(&group.hypernym.chain()) {
            continue;
        }
        if let Some(docs) = view.occ.by_group.get(&group.group_id) {
            pool.push((group.canonical.clone(), docs));
        }
    }
    for meaning in inferred {
        if !whitelisted(&meaning.hypernym.chain()) {
            continue;
        }
        if let Some(docs) = view.occ.by_unknown.get(&meaning.surface) {
            pool.push((meaning.surface.clone(), docs));
        }
    }

    let candidates: Vec<Candidate> = pool
        .par_iter()
        .map(|(term, docs)| -> Result<Vec<Candidate>, DiscoveryError> {
            let support_idx = intersect_sorted(docs, &target_docs);
            if support_idx.len() < cand.min_support {
                return Ok(Vec::new());
            }
            let members: Vec<&DocVector> = support_idx.iter().map(|&i| &view.vectors[i]).collect();
            let fv = centroid(&members, term)?;
            let support_doc_ids: Vec<String> = support_idx
                .iter()
                .map(|&i| view.mapped.docs[i].doc_id.clone())
                .collect();
            let mut out = Vec::new();
            for model in &relevant {
                let mut d_min = f64::MAX;
                for c in &model.centroids {
                    let d = semantic_deviation(&fv, c, &cand.similarity)?;
                    if d < d_min {
                        d_min = d;
                    }
                }
                if d_min < cand.theta {
                    let conf = confidence(d_min, support_idx.len(), cand.theta, cand.n0)?;
                    out.push(Candidate {
                        term: term.clone(),
                        relationship: model.relationship.clone(),
                        object: model.target.clone(),
                        deviation: d_min,
                        confidence: conf,
                        support_doc_ids: support_doc_ids.clone(),
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(candidates)
}

/// Most documents an output row lists before the "…" marker.
const DOC_ID_CAP: usize = 25;

/// Step 4: the ranked candidate table.
///
/// Sorted by confidence descending (unrounded), ties by #Docs descending
/// then term ascending. A run-parameters comment precedes the header row.
pub fn candidates_tsv(
    candidates: &[Candidate],
    params: &SimilarityParams,
    theta: f64,
    k: usize,
    seed: u64,
) -> String {
    let mut order: Vec<&Candidate> = candidates.iter().collect();
    order.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .expect("confidence is finite")
            .then_with(|| b.support_doc_ids.len().cmp(&a.support_doc_ids.len()))
            .then_with(|| a.term.cmp(&b.term))
    });
    let mut out = format!(
        "# alpha={} beta={} gamma={} theta={theta} k={k} seed={seed}\n",
        params.alpha, params.beta, params.gamma
    );
    out.push_str("Row\tTerm\tRelationship\tObject\tConf%\t#Docs\tDocIDs\n");
    for (i, c) in order.iter().enumerate() {
        let n = c.support_doc_ids.len();
        let mut ids = c.support_doc_ids[..n.min(DOC_ID_CAP)].join(",");
        if n > DOC_ID_CAP {
            ids.push_str(",…");
        }
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.1}\t{}\t{}\n",
            i + 1,
            c.term,
            c.relationship,
            c.object,
            c.confidence,
            n,
            ids
        ));
    }
    out
}

/// The inferred-meanings report: surface, constructed hypernym path, two
/// associated descriptors, score.
pub fn inferred_tsv(meanings: &[InferredMeaning]) -> String {
    let mut out =
        String::from("surface\tconstructed_hypernym\tdescriptor_1\tdescriptor_2\tscore\n");
    for m in meanings {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.4}\n",
            m.surface,
            m.hypernym,
            m.descriptors.first().map(String::as_str).unwrap_or(""),
            m.descriptors.get(1).map(String::as_str).unwrap_or(""),
            m.score
        ));
    }
    out
}

/// A row read back from a candidates TSV.
#[derive(Debug, Clone)]
pub struct ParsedCandidate {
    pub row: usize,
    pub term: String,
    pub relationship: String,
    pub object: String,
    pub confidence: f64,
    pub doc_count: usize,
    pub doc_ids: Vec<String>,
}

/// Parses a candidates TSV produced by candidates_tsv.
pub fn parse_candidates_tsv(text: &str) -> Result<Vec<ParsedCandidate>, DiscoveryError> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty()
            || line.starts_with('#')
            || line == "Row\tTerm\tRelationship\tObject\tConf%\t#Docs\tDocIDs"
        {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 7 {
            return Err(DiscoveryError::CandidateParse {
                line: line_no,
                reason: format!("expected 7 columns, found {}", cols.len()),
            });
        }
        let parse_err = |reason: String| DiscoveryError::CandidateParse {
            line: line_no,
            reason,
        };
        rows.push(ParsedCandidate {
            row: cols[0]
                .parse()
                .map_err(|e| parse_err(format!("bad row number: {e}")))?,
            term: cols[1].to_string(),
            relationship: cols[2].to_string(),
            object: cols[3].to_string(),
            confidence: cols[4]
                .parse()
                .map_err(|e| parse_err(format!("bad confidence: {e}")))?,
            doc_count: cols[5]
                .parse()
                .map_err(|e| parse_err(format!("bad doc count: {e}")))?,
            doc_ids: cols[6]
                .split(',')
                .filter(|s| !s.is_empty() && *s != "…")
                .map(str::to_string)
                .collect(),
        });
    }
    Ok(rows)
}
