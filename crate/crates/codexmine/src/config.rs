//! Run configuration: defaults, the flat "key = value" config file, and
//! the comment header every output artifact starts with.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

/// Every knob a run can turn. Defaults are the documented baseline; a
/// config file overrides defaults and command-line flags override both.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Semantic space dimensionality (>= 2).
    pub k: usize,
    /// Cosine weight in the composite similarity.
    pub alpha: f64,
    /// Divergence weight in the composite similarity.
    pub beta: f64,
    /// Taxonomy-overlap weight in the composite similarity.
    pub gamma: f64,
    /// Topics kept per vector for the divergence term (>= 1).
    pub top_m: usize,
    /// Deviation threshold for candidate qualification, in (0,1).
    pub theta: f64,
    /// Support-count softening constant in the confidence score (>= 0).
    pub n0: f64,
    /// Minimum document frequency for a group to become a dimension (>= 1).
    pub df_min: usize,
    /// Map grid height (>= 2).
    pub grid_rows: usize,
    /// Map grid width (>= 2).
    pub grid_cols: usize,
    /// Training epochs at full resolution (>= 1).
    pub epochs: usize,
    /// Coarse grids trained before the full one (0..=8).
    pub coarse_levels: usize,
    /// Master seed for everything randomized.
    pub seed: u64,
    /// Support documents a candidate needs to stay in the output (>= 1).
    pub min_support: usize,
    /// Reference-document clusters per (relationship, target) model (>= 1).
    pub clusters_per_model: usize,
    /// Comma-separated taxonomy paths candidates must reach; empty means
    /// every depth-2..3 node off the target's own hypernym chain.
    pub whitelist: String,
    pub lexicon: String,
    pub corpus: String,
    pub seeds: String,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 100,
            alpha: 0.5,
            beta: 0.25,
            gamma: 0.25,
            top_m: 10,
            theta: 0.6,
            n0: 5.0,
            df_min: 2,
            grid_rows: 10,
            grid_cols: 10,
            epochs: 30,
            coarse_levels: 2,
            seed: 42,
            min_support: 2,
            clusters_per_model: 3,
            whitelist: String::new(),
            lexicon: String::new(),
            corpus: String::new(),
            seeds: String::new(),
            out_dir: String::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: expected \"key = value\", got \"{text}\"")]
    Syntax { line: usize, text: String },
    #[error("config key \"{key}\": {reason}")]
    Value { key: String, reason: String },
    #[error("unknown config key \"{0}\"")]
    UnknownKey(String),
    #[error("weights must sum to 1")]
    WeightSum,
}

impl RunConfig {
    /// Applies the flat "key = value" file on top of this config.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    text: line.to_string(),
                });
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Sets one key from its string form; used by the file loader.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e| ConfigError::Value {
                key: key.to_string(),
                reason: format!("invalid value \"{value}\": {e}"),
            })
        }
        match key {
            "k" => self.k = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "top_m" => self.top_m = parse(key, value)?,
            "theta" => self.theta = parse(key, value)?,
            "n0" => self.n0 = parse(key, value)?,
            "df_min" => self.df_min = parse(key, value)?,
            "grid_rows" => self.grid_rows = parse(key, value)?,
            "grid_cols" => self.grid_cols = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "coarse_levels" => self.coarse_levels = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "min_support" => self.min_support = parse(key, value)?,
            "clusters_per_model" => self.clusters_per_model = parse(key, value)?,
            "whitelist" => self.whitelist = value.to_string(),
            "lexicon" => self.lexicon = value.to_string(),
            "corpus" => self.corpus = value.to_string(),
            "seeds" => self.seeds = value.to_string(),
            "out_dir" => self.out_dir = value.to_string(),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Checks every numeric field against its documented range.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |key: &str, reason: String| {
            Err(ConfigError::Value {
                key: key.to_string(),
                reason,
            })
        };
        if self.k < 2 {
            return range("k", format!("{} is below the minimum of 2", self.k));
        }
        for (key, w) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !w.is_finite() || w < 0.0 {
                return range(key, format!("{w} must be a finite non-negative number"));
            }
        }
        if (self.alpha + self.beta + self.gamma - 1.0).abs() > 1e-9 {
            return Err(ConfigError::WeightSum);
        }
        if self.top_m < 1 {
            return range("top_m", "must be at least 1".into());
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return range(
                "theta",
                format!("{} must lie strictly between 0 and 1", self.theta),
            );
        }
        if !self.n0.is_finite() || self.n0 < 0.0 {
            return range(
                "n0",
                format!("{} must be a finite non-negative number", self.n0),
            );
        }
        if self.df_min < 1 {
            return range("df_min", "must be at least 1".into());
        }
        if self.grid_rows < 2 || self.grid_cols < 2 {
            return range(
                "grid_rows/grid_cols",
                format!(
                    "{}x{} is below the 2x2 minimum",
                    self.grid_rows, self.grid_cols
                ),
            );
        }
        if self.epochs < 1 {
            return range("epochs", "must be at least 1".into());
        }
        if self.coarse_levels > 8 {
            return range(
                "coarse_levels",
                format!("{} exceeds the maximum of 8", self.coarse_levels),
            );
        }
        if self.min_support < 1 {
            return range("min_support", "must be at least 1".into());
        }
        if self.clusters_per_model < 1 {
            return range("clusters_per_model", "must be at least 1".into());
        }
        Ok(())
    }

    /// One-line rendering of the full configuration for output headers.
    pub fn summary(&self) -> String {
        fn path(s: &str) -> &str {
            if s.is_empty() {
                "-"
            } else {
                s
            }
        }
        let mut line = String::new();
        let _ = write!(
            line,
            "k={} alpha={} beta={} gamma={} top_m={} theta={} n0={} df_min={} \
             grid_rows={} grid_cols={} epochs={} coarse_levels={} seed={} \
             min_support={} clusters_per_model={} whitelist={} lexicon={} \
             corpus={} seeds={} out_dir={}",
            self.k,
            self.alpha,
            self.beta,
            self.gamma,
            self.top_m,
            self.theta,
            self.n0,
            self.df_min,
            self.grid_rows,
            self.grid_cols,
            self.epochs,
            self.coarse_levels,
            self.seed,
            self.min_support,
            self.clusters_per_model,
            path(&self.whitelist),
            path(&self.lexicon),
            path(&self.corpus),
            path(&self.seeds),
            path(&self.out_dir),
        );
        line
    }
}

/// Lowercase hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// The comment header that opens every output artifact: the subcommand,
/// the full configuration, and a content hash per input file.
pub fn artifact_header(
    subcommand: &str,
    cfg: &RunConfig,
    inputs: &[(&str, &Path)],
) -> std::io::Result<String> {
    let mut out = format!("# codexmine {subcommand}\n# config: {}\n", cfg.summary());
    for (label, path) in inputs {
        let _ = writeln!(out, "# input {label} sha256={}", sha256_file(path)?);
    }
    Ok(out)
}

/// The same header wrapped in XML comments for SVG artifacts.
pub fn artifact_header_xml(
    subcommand: &str,
    cfg: &RunConfig,
    inputs: &[(&str, &Path)],
) -> std::io::Result<String> {
    let plain = artifact_header(subcommand, cfg, inputs)?;
    let mut out = String::new();
    for line in plain.lines() {
        let _ = writeln!(out, "<!-- {} -->", line.trim_start_matches("# "));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn defaults_validate() {
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn file_overrides_defaults_and_tolerates_comments() {
        let mut cfg = RunConfig::default();
        cfg.apply_file("# a comment\n\nk = 40\ntheta=0.5\nlexicon = data/lex.tsv\n")
            .unwrap();
        assert_eq!(cfg.k, 40);
        assert_eq!(cfg.theta, 0.5);
        assert_eq!(cfg.lexicon, "data/lex.tsv");
        // Untouched keys keep their defaults.
        assert_eq!(cfg.epochs, 30);
    }

    #[test]
    fn bad_lines_and_keys_are_named() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_file("k 40\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
        let err = cfg.apply_file("bogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let err = cfg.apply_file("k = banana\n").unwrap_err();
        assert!(err.to_string().contains("\"k\""), "{err}");
    }

    #[test]
    fn weight_sum_violation_has_the_exact_message() {
        let mut cfg = RunConfig {
            alpha: 0.5,
            beta: 0.5,
            gamma: 0.2,
            ..RunConfig::default()
        };
        assert_eq!(
            cfg.validate().unwrap_err().to_string(),
            "weights must sum to 1"
        );
        cfg.gamma = 0.0;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn out_of_range_values_name_the_field() {
        let check = |mutate: &dyn Fn(&mut RunConfig), needle: &str| {
            let mut cfg = RunConfig::default();
            mutate(&mut cfg);
            let msg = cfg.validate().unwrap_err().to_string();
            assert!(msg.contains(needle), "{msg:?} missing {needle:?}");
        };
        check(&|c| c.k = 1, "k");
        check(&|c| c.theta = 1.0, "theta");
        check(&|c| c.theta = 0.0, "theta");
        check(&|c| c.grid_rows = 1, "grid_rows");
        check(&|c| c.epochs = 0, "epochs");
        check(&|c| c.min_support = 0, "min_support");
        check(&|c| c.alpha = -0.1, "alpha");
        check(&|c| c.coarse_levels = 9, "coarse_levels");
    }

    #[test]
    fn header_records_config_and_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.tsv");
        std::fs::File::create(&input)
            .unwrap()
            .write_all(b"abc")
            .unwrap();
        let cfg = RunConfig::default();
        let header = artifact_header("space-build", &cfg, &[("lexicon", input.as_path())]).unwrap();
        assert!(header.starts_with("# codexmine space-build\n# config: k=100 alpha=0.5"));
        // SHA-256 of "abc", a fixed point anyone can recompute.
        assert!(header.contains("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"));
        let xml = artifact_header_xml("map-export", &cfg, &[]).unwrap();
        assert!(xml.starts_with("<!-- codexmine map-export -->\n<!-- config: "));
    }

    #[test]
    fn summary_is_stable_and_complete() {
        let cfg = RunConfig::default();
        let s = cfg.summary();
        for key in [
            "k=",
            "alpha=",
            "beta=",
            "gamma=",
            "top_m=",
            "theta=",
            "n0=",
            "df_min=",
            "grid_rows=",
            "grid_cols=",
            "epochs=",
            "coarse_levels=",
            "seed=",
            "min_support=",
            "clusters_per_model=",
            "whitelist=",
            "lexicon=",
            "corpus=",
            "seeds=",
            "out_dir=",
        ] {
            assert!(s.contains(key), "summary lacks {key}");
        }
        assert_eq!(s, RunConfig::default().summary());
    }
}
