//! The embedded lexicon: synonym groups linked into a 7-level taxonomy.
//!
//! A lexicon file is a 4-column TSV: group id, canonical surface, member
//! list ("surface,langtag" pairs joined by ";"), and the hypernym path
//! (labels joined by "/"). Lines starting with `#` are comments; a manifest
//! comment `#groups=N #taxa=M` is validated against the loaded content.
//!
//! The taxonomy tree is the prefix closure of all hypernym paths, so every
//! prefix of a referenced path is itself a node. A lexicon is immutable
//! after load and safe to share across threads.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::token::{normalize_surface, surface_token_count};

/// Longest taxonomy path, root included.
pub const MAX_TAXONOMY_DEPTH: usize = 7;

/// Longest multi-word surface form, in tokens.
pub const MAX_SURFACE_TOKENS: usize = 4;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon file: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty lexicon file")]
    EmptyFile,
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: duplicate group_id {group_id}")]
    DuplicateGroupId { line: usize, group_id: String },
    #[error("line {line}: invalid taxon path \"{path}\": {reason}")]
    InvalidTaxonPath {
        line: usize,
        path: String,
        reason: String,
    },
    #[error("manifest mismatch: declared {declared}, loaded {loaded}")]
    ManifestMismatch { declared: String, loaded: String },
    #[error("unknown group_id {0}")]
    UnknownGroup(String),
    #[error("taxon path \"{0}\" is not a node of this taxonomy")]
    UnknownTaxon(String),
}

/// Ordered list of taxonomy labels from the root, 1..=7 levels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaxonPath {
    levels: Vec<String>,
}

impl TaxonPath {
    /// Builds a path from labels, trimming whitespace. Rejects empty labels
    /// and paths outside 1..=7 levels.
    pub fn new<I, S>(labels: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let levels: Vec<String> = labels
            .into_iter()
            .map(|l| l.as_ref().trim().to_string())
            .collect();
        if levels.is_empty() {
            return Err("path has no levels".to_string());
        }
        if levels.len() > MAX_TAXONOMY_DEPTH {
            return Err(format!(
                "path has {} levels, maximum is {}",
                levels.len(),
                MAX_TAXONOMY_DEPTH
            ));
        }
        if levels.iter().any(|l| l.is_empty()) {
            return Err("path contains an empty label".to_string());
        }
        Ok(Self { levels })
    }

    /// Parses a "/"-joined path.
    pub fn parse(text: &str) -> Result<Self, String> {
        Self::new(text.split('/'))
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    /// Depth of this node; the root level is 1.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// The prefix of this path with the given length.
    pub fn prefix(&self, len: usize) -> TaxonPath {
        assert!(len >= 1 && len <= self.levels.len());
        TaxonPath {
            levels: self.levels[..len].to_vec(),
        }
    }

    /// All prefixes from the root down to the full path.
    pub fn chain(&self) -> Vec<TaxonPath> {
        (1..=self.levels.len()).map(|n| self.prefix(n)).collect()
    }

    /// Length of the longest common prefix with another path.
    pub fn common_prefix_len(&self, other: &TaxonPath) -> usize {
        self.levels
            .iter()
            .zip(other.levels.iter())
            .take_while(|(a, b)| a == b)
            .count()
    }
}

impl fmt::Display for TaxonPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.levels.join("/"))
    }
}

/// A synonym group ("semantic cloud"): one concept, many surface forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymGroup {
    pub group_id: String,
    pub canonical: String,
    /// (surface form, language tag) pairs; the canonical surface is a member.
    pub members: Vec<(String, String)>,
    pub hypernym: TaxonPath,
}

/// Prefix-closed tree of taxonomy nodes.
#[derive(Debug, Clone, Default)]
pub struct Taxonomy {
    nodes: BTreeSet<TaxonPath>,
}

impl Taxonomy {
    pub fn insert_path(&mut self, path: &TaxonPath) {
        for prefix in path.chain() {
            self.nodes.insert(prefix);
        }
    }

    pub fn contains(&self, path: &TaxonPath) -> bool {
        self.nodes.contains(path)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TaxonPath> {
        self.nodes.iter()
    }

    /// Nodes whose depth lies within the given inclusive range.
    pub fn nodes_at_depth(&self, min: usize, max: usize) -> impl Iterator<Item = &TaxonPath> {
        self.nodes
            .iter()
            .filter(move |n| n.depth() >= min && n.depth() <= max)
    }
}

/// The loaded lexicon: groups, taxonomy, and the case-folded surface index.
#[derive(Debug, Clone)]
pub struct Lexicon {
    groups: BTreeMap<String, SynonymGroup>,
    taxonomy: Taxonomy,
    surface_index: HashMap<String, BTreeSet<String>>,
}

impl Lexicon {
    /// Assembles a lexicon from groups, building the taxonomy as the prefix
    /// closure of all hypernym paths and indexing every member surface.
    pub fn from_groups(groups: Vec<SynonymGroup>) -> Result<Self, LexiconError> {
        let mut map = BTreeMap::new();
        let mut taxonomy = Taxonomy::default();
        let mut surface_index: HashMap<String, BTreeSet<String>> = HashMap::new();
        for group in groups {
            taxonomy.insert_path(&group.hypernym);
            for (surface, _) in &group.members {
                let key =
                    normalize_surface(surface).ok_or_else(|| LexiconError::MalformedRecord {
                        line: 0,
                        reason: format!("member surface \"{surface}\" has no word tokens"),
                    })?;
                surface_index
                    .entry(key)
                    .or_default()
                    .insert(group.group_id.clone());
            }
            if let Some(prev) = map.insert(group.group_id.clone(), group) {
                return Err(LexiconError::DuplicateGroupId {
                    line: 0,
                    group_id: prev.group_id,
                });
            }
        }
        Ok(Self {
            groups: map,
            taxonomy,
            surface_index,
        })
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses lexicon TSV text. Loading is deterministic and independent of
    /// record order; duplicate ids, malformed records, and bad taxon paths
    /// are rejected with the offending line number.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut records: Vec<(usize, SynonymGroup)> = Vec::new();
        let mut declared_groups: Option<usize> = None;
        let mut declared_taxa: Option<usize> = None;
        let mut seen_ids: HashMap<String, usize> = HashMap::new();

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((g, t)) = parse_manifest(rest) {
                    declared_groups = Some(g);
                    declared_taxa = Some(t);
                }
                continue;
            }
            let group = parse_record(line_no, line)?;
            if let Some(prev_line) = seen_ids.insert(group.group_id.clone(), line_no) {
                let _ = prev_line;
                return Err(LexiconError::DuplicateGroupId {
                    line: line_no,
                    group_id: group.group_id,
                });
            }
            records.push((line_no, group));
        }

        if records.is_empty() {
            return Err(LexiconError::EmptyFile);
        }

        // Sort by group_id so the result is independent of record order.
        records.sort_by(|a, b| a.1.group_id.cmp(&b.1.group_id));
        let lexicon = Self::from_groups(records.into_iter().map(|(_, g)| g).collect())?;

        if let (Some(dg), Some(dt)) = (declared_groups, declared_taxa) {
            let (lg, lt) = (lexicon.groups.len(), lexicon.taxonomy.len());
            if dg != lg || dt != lt {
                return Err(LexiconError::ManifestMismatch {
                    declared: format!("groups={dg} taxa={dt}"),
                    loaded: format!("groups={lg} taxa={lt}"),
                });
            }
        }
        Ok(lexicon)
    }

    /// Canonical TSV form: manifest line, then records sorted by group id.
    /// Equal for any record permutation of the source file.
    pub fn to_canonical_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "#groups={} #taxa={}\n",
            self.groups.len(),
            self.taxonomy.len()
        ));
        for group in self.groups.values() {
            let members = group
                .members
                .iter()
                .map(|(s, l)| format!("{s},{l}"))
                .collect::<Vec<_>>()
                .join(";");
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                group.group_id, group.canonical, members, group.hypernym
            ));
        }
        out
    }

    /// All group ids registered for a surface form; empty when unknown.
    /// Matching is exact on the case-folded, token-normalized surface.
    pub fn lookup(&self, surface: &str) -> BTreeSet<String> {
        match normalize_surface(surface) {
            Some(key) => self.surface_index.get(&key).cloned().unwrap_or_default(),
            None => BTreeSet::new(),
        }
    }

    /// Group ids for an already-normalized index key.
    pub fn lookup_normalized(&self, key: &str) -> Option<&BTreeSet<String>> {
        self.surface_index.get(key)
    }

    pub fn group(&self, group_id: &str) -> Option<&SynonymGroup> {
        self.groups.get(group_id)
    }

    pub fn groups(&self) -> impl Iterator<Item = &SynonymGroup> {
        self.groups.values()
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    /// Surface keys mapped to two or more groups.
    pub fn polysemous_surfaces(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.surface_index.iter().filter(|(_, ids)| ids.len() >= 2)
    }

    /// Taxonomy nodes from the root down to the group's hypernym leaf.
    pub fn hypernym_chain(&self, group_id: &str) -> Result<Vec<TaxonPath>, LexiconError> {
        let group = self
            .groups
            .get(group_id)
            .ok_or_else(|| LexiconError::UnknownGroup(group_id.to_string()))?;
        Ok(group.hypernym.chain())
    }

    /// Tree distance between two taxonomy nodes:
    /// (len(a) - L) + (len(b) - L) where L is the common-prefix length.
    pub fn taxon_distance(&self, a: &TaxonPath, b: &TaxonPath) -> Result<usize, LexiconError> {
        for p in [a, b] {
            if !self.taxonomy.contains(p) {
                return Err(LexiconError::UnknownTaxon(p.to_string()));
            }
        }
        let l = a.common_prefix_len(b);
        Ok((a.depth() - l) + (b.depth() - l))
    }

    /// A copy of this lexicon with the given groups removed; used by the
    /// masked-term inference protocol.
    pub fn without_groups(&self, masked: &BTreeSet<String>) -> Result<Lexicon, LexiconError> {
        let remaining: Vec<SynonymGroup> = self
            .groups
            .values()
            .filter(|g| !masked.contains(&g.group_id))
            .cloned()
            .collect();
        Self::from_groups(remaining)
    }
}

fn parse_manifest(comment: &str) -> Option<(usize, usize)> {
    let mut groups = None;
    let mut taxa = None;
    for part in comment.split_whitespace() {
        let part = part.trim_start_matches('#');
        if let Some(v) = part.strip_prefix("groups=") {
            groups = v.parse().ok();
        } else if let Some(v) = part.strip_prefix("taxa=") {
            taxa = v.parse().ok();
        }
    }
    Some((groups?, taxa?))
}

fn parse_record(line_no: usize, line: &str) -> Result<SynonymGroup, LexiconError> {
    let malformed = |reason: String| LexiconError::MalformedRecord {
        line: line_no,
        reason,
    };
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 4 {
        return Err(malformed(format!(
            "expected 4 columns, found {}",
            cols.len()
        )));
    }
    let group_id = cols[0].trim();
    if group_id.is_empty() {
        return Err(malformed("empty group_id".to_string()));
    }
    let canonical = cols[1].trim();
    if canonical.is_empty() {
        return Err(malformed("empty canonical surface".to_string()));
    }

    let mut members = Vec::new();
    for entry in cols[2].split(';') {
        let entry = entry.trim();
        if entry.is_empty() {
            continue;
        }
        let (surface, lang) = match entry.rsplit_once(',') {
            Some((s, l)) => (s.trim(), l.trim()),
            None => {
                return Err(malformed(format!(
                    "member \"{entry}\" lacks a language tag"
                )))
            }
        };
        if surface.is_empty() {
            return Err(malformed("empty member surface".to_string()));
        }
        let token_count = surface_token_count(surface);
        if token_count == 0 {
            return Err(malformed(format!(
                "member \"{surface}\" has no word tokens"
            )));
        }
        if token_count > MAX_SURFACE_TOKENS {
            return Err(malformed(format!(
                "member \"{surface}\" has {token_count} tokens, maximum is {MAX_SURFACE_TOKENS}"
            )));
        }
        members.push((surface.to_string(), lang.to_string()));
    }
    if members.is_empty() {
        return Err(malformed("empty member list".to_string()));
    }
    let canonical_key = normalize_surface(canonical)
        .ok_or_else(|| malformed("canonical surface has no word tokens".to_string()))?;
    let canonical_present = members
        .iter()
        .any(|(s, _)| normalize_surface(s).as_deref() == Some(canonical_key.as_str()));
    if !canonical_present {
        return Err(malformed(format!(
            "canonical \"{canonical}\" is not among the members"
        )));
    }

    let hypernym = TaxonPath::parse(cols[3]).map_err(|reason| LexiconError::InvalidTaxonPath {
        line: line_no,
        path: cols[3].to_string(),
        reason,
    })?;

    Ok(SynonymGroup {
        group_id: group_id.to_string(),
        canonical: canonical.to_string(),
        members,
        hypernym,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> &'static str {
        "#groups=3 #taxa=5\n\
         g_hctz\thydrochlorothiazide\thctz,en;hydrochlorothiazide,en\thealth/medicine/drug/diuretic drug\n\
         g_insulin\tinsulin\tinsulin,en;insulina,es\thealth/medicine/hormone\n\
         g_glyc\tglycemic control\tglycemic control,en\thealth/medicine\n"
    }

    #[test]
    fn loads_sample_records() {
        let lex = Lexicon::parse(sample()).unwrap();
        assert_eq!(lex.group_count(), 3);
        let g = lex.group("g_hctz").unwrap();
        assert_eq!(g.members.len(), 2);
        assert_eq!(g.hypernym.to_string(), "health/medicine/drug/diuretic drug");
    }

    #[test]
    fn lookup_is_case_folded_and_total() {
        let lex = Lexicon::parse(sample()).unwrap();
        let ids = lex.lookup("HCTZ");
        assert_eq!(ids.into_iter().collect::<Vec<_>>(), vec!["g_hctz"]);
        assert!(lex.lookup("zzqx").is_empty());
        assert!(lex.lookup("").is_empty());
    }

    #[test]
    fn polysemous_surface_returns_all_senses() {
        let text = "ga\talpha\talpha,en\troot/left\n\
                    gb\tbeta\talpha,en;beta,en\troot/right\n";
        let lex = Lexicon::parse(text).unwrap();
        let ids = lex.lookup("Alpha");
        assert_eq!(ids.into_iter().collect::<Vec<_>>(), vec!["ga", "gb"]);
        assert_eq!(lex.polysemous_surfaces().count(), 1);
    }

    #[test]
    fn empty_member_list_is_malformed() {
        let text = "g1\tx\t\troot/a\n";
        let err = Lexicon::parse(text).unwrap_err();
        assert!(matches!(err, LexiconError::MalformedRecord { .. }), "{err}");
    }

    #[test]
    fn duplicate_group_id_rejected() {
        let text = "g1\ta\ta,en\troot\ng1\tb\tb,en\troot\n";
        let err = Lexicon::parse(text).unwrap_err();
        assert!(
            matches!(err, LexiconError::DuplicateGroupId { .. }),
            "{err}"
        );
    }

    #[test]
    fn empty_file_rejected() {
        assert!(matches!(
            Lexicon::parse("# just a comment\n"),
            Err(LexiconError::EmptyFile)
        ));
    }

    #[test]
    fn wrong_column_count_is_malformed() {
        let err = Lexicon::parse("g1\ta\ta,en\n").unwrap_err();
        assert!(matches!(err, LexiconError::MalformedRecord { .. }), "{err}");
    }

    #[test]
    fn eight_level_path_rejected() {
        let text = "g1\ta\ta,en\tl1/l2/l3/l4/l5/l6/l7/l8\n";
        let err = Lexicon::parse(text).unwrap_err();
        assert!(
            matches!(err, LexiconError::InvalidTaxonPath { .. }),
            "{err}"
        );
    }

    #[test]
    fn manifest_mismatch_rejected() {
        let text = "#groups=9 #taxa=9\ng1\ta\ta,en\troot\n";
        let err = Lexicon::parse(text).unwrap_err();
        assert!(
            matches!(err, LexiconError::ManifestMismatch { .. }),
            "{err}"
        );
    }

    #[test]
    fn hypernym_chain_is_root_first() {
        let lex = Lexicon::parse(sample()).unwrap();
        let chain = lex.hypernym_chain("g_hctz").unwrap();
        let labels: Vec<String> = chain.iter().map(|p| p.to_string()).collect();
        assert_eq!(
            labels,
            vec![
                "health",
                "health/medicine",
                "health/medicine/drug",
                "health/medicine/drug/diuretic drug"
            ]
        );
        assert!(chain.len() <= MAX_TAXONOMY_DEPTH);
        assert!(lex.hypernym_chain("nope").is_err());
    }

    #[test]
    fn chain_is_prefix_closed_in_taxonomy() {
        let lex = Lexicon::parse(sample()).unwrap();
        for group in lex.groups() {
            for node in group.hypernym.chain() {
                assert!(lex.taxonomy().contains(&node), "missing prefix {node}");
            }
        }
    }

    #[test]
    fn root_hypernym_gives_single_element_chain() {
        let text = "g1\ta\ta,en\troot\n";
        let lex = Lexicon::parse(text).unwrap();
        assert_eq!(lex.hypernym_chain("g1").unwrap().len(), 1);
    }

    // Brute-force oracle: walk both paths and count the non-shared tail.
    fn distance_oracle(a: &TaxonPath, b: &TaxonPath) -> usize {
        let mut l = 0;
        while l < a.depth() && l < b.depth() && a.levels()[l] == b.levels()[l] {
            l += 1;
        }
        (a.depth() - l) + (b.depth() - l)
    }

    #[test]
    fn taxon_distance_matches_oracle() {
        let text = "g1\ta\ta,en\tr1/x/y\ng2\tb\tb,en\tr2/z\ng3\tc\tc,en\tr1/x/w/v\n";
        let lex = Lexicon::parse(text).unwrap();
        let nodes: Vec<TaxonPath> = lex.taxonomy().nodes().cloned().collect();
        for a in &nodes {
            for b in &nodes {
                let d = lex.taxon_distance(a, b).unwrap();
                assert_eq!(d, distance_oracle(a, b));
                assert_eq!(d, lex.taxon_distance(b, a).unwrap());
                assert_eq!(d == 0, a == b);
            }
        }
        // Disjoint roots, depths 3 and 2.
        let a = TaxonPath::parse("r1/x/y").unwrap();
        let b = TaxonPath::parse("r2/z").unwrap();
        assert_eq!(lex.taxon_distance(&a, &b).unwrap(), 5);
    }

    #[test]
    fn taxon_distance_rejects_unknown_node() {
        let lex = Lexicon::parse(sample()).unwrap();
        let a = TaxonPath::parse("health").unwrap();
        let bogus = TaxonPath::parse("nowhere/at/all").unwrap();
        assert!(matches!(
            lex.taxon_distance(&a, &bogus),
            Err(LexiconError::UnknownTaxon(_))
        ));
    }

    #[test]
    fn canonical_form_is_permutation_invariant() {
        let forward = sample();
        let mut lines: Vec<&str> = forward.lines().collect();
        lines[1..].reverse();
        let backward = format!("{}\n", lines.join("\n"));
        let a = Lexicon::parse(forward).unwrap().to_canonical_tsv();
        let b = Lexicon::parse(&backward).unwrap().to_canonical_tsv();
        assert_eq!(a, b);
        // Round trip: canonical form reloads to the same canonical form.
        let c = Lexicon::parse(&a).unwrap().to_canonical_tsv();
        assert_eq!(a, c);
    }

    #[test]
    fn without_groups_drops_surfaces() {
        let lex = Lexicon::parse(sample()).unwrap();
        let masked: BTreeSet<String> = ["g_hctz".to_string()].into_iter().collect();
        let reduced = lex.without_groups(&masked).unwrap();
        assert_eq!(reduced.group_count(), 2);
        assert!(reduced.lookup("hctz").is_empty());
        assert!(!reduced.lookup("insulin").is_empty());
    }

    #[test]
    fn five_token_member_rejected() {
        let text = "g1\ta b c d e\ta b c d e,en\troot\n";
        let err = Lexicon::parse(text).unwrap_err();
        assert!(matches!(err, LexiconError::MalformedRecord { .. }), "{err}");
    }
}
