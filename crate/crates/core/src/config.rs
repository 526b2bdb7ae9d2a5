//! Run configuration: a flat `key = value` file with `#` comments.
//!
//! The effective configuration (file plus command-line overrides) is
//! rendered back in canonical form into every output directory, so a run can
//! be repeated from its own artifacts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::som::SomConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`")]
    Value {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,

    pub som_rows: usize,
    pub som_cols: usize,
    pub som_epochs: usize,
    pub som_initial_radius: f64,
    pub som_final_radius: f64,
    pub replication: usize,

    pub k_min: usize,
    pub k_max: usize,
    /// Fixed cluster count; when set, `k_min`/`k_max` are ignored.
    pub k: Option<usize>,

    pub hmm_states: usize,
    /// Additive smoothing of the empirical unit-to-unit matrix.
    pub alpha: f64,
    pub hmm_max_iter: usize,
    pub hmm_tol: f64,

    pub min_support: usize,
    pub top_n: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let som = SomConfig::default();
        Self {
            corpus: None,
            out: PathBuf::from("out"),
            seed: 0,
            som_rows: som.rows,
            som_cols: som.cols,
            som_epochs: som.epochs,
            som_initial_radius: som.initial_radius,
            som_final_radius: som.final_radius,
            replication: 1,
            k_min: 2,
            k_max: 8,
            k: None,
            hmm_states: 4,
            alpha: 0.0,
            hmm_max_iter: 200,
            hmm_tol: 1e-6,
            min_support: 1,
            top_n: 5,
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Value {
        line,
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn som(&self) -> SomConfig {
        SomConfig {
            rows: self.som_rows,
            cols: self.som_cols,
            epochs: self.som_epochs,
            initial_radius: self.som_initial_radius,
            final_radius: self.som_final_radius,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.som_rows == 0 || self.som_cols == 0 {
            return fail("som_rows and som_cols must be >= 1");
        }
        if self.som_epochs == 0 {
            return fail("som_epochs must be >= 1");
        }
        let radius_ok = |r: f64| r.is_finite() && r >= 0.0;
        if !radius_ok(self.som_initial_radius) || !radius_ok(self.som_final_radius) {
            return fail("SOM radii must be finite and >= 0");
        }
        if self.replication == 0 {
            return fail("replication must be >= 1");
        }
        if self.k_min < 2 || self.k_min > self.k_max {
            return fail("need 2 <= k_min <= k_max");
        }
        if self.k == Some(0) {
            return fail("k must be >= 1");
        }
        if self.hmm_states == 0 || self.hmm_max_iter == 0 {
            return fail("hmm_states and hmm_max_iter must be >= 1");
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return fail("alpha must be finite and >= 0");
        }
        if !(self.hmm_tol.is_finite() && self.hmm_tol > 0.0) {
            return fail("hmm_tol must be finite and > 0");
        }
        if self.top_n == 0 {
            return fail("top_n must be >= 1");
        }
        Ok(())
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "corpus" => c.corpus = (!value.is_empty()).then(|| PathBuf::from(value)),
                "out" => c.out = PathBuf::from(value),
                "seed" => c.seed = parse_value(line, key, value)?,
                "som_rows" => c.som_rows = parse_value(line, key, value)?,
                "som_cols" => c.som_cols = parse_value(line, key, value)?,
                "som_epochs" => c.som_epochs = parse_value(line, key, value)?,
                "som_initial_radius" => c.som_initial_radius = parse_value(line, key, value)?,
                "som_final_radius" => c.som_final_radius = parse_value(line, key, value)?,
                "replication" => c.replication = parse_value(line, key, value)?,
                "k_min" => c.k_min = parse_value(line, key, value)?,
                "k_max" => c.k_max = parse_value(line, key, value)?,
                "k" => {
                    c.k = match value {
                        "" | "auto" => None,
                        v => Some(parse_value(line, key, v)?),
                    }
                }
                "hmm_states" => c.hmm_states = parse_value(line, key, value)?,
                "alpha" => c.alpha = parse_value(line, key, value)?,
                "hmm_max_iter" => c.hmm_max_iter = parse_value(line, key, value)?,
                "hmm_tol" => c.hmm_tol = parse_value(line, key, value)?,
                "min_support" => c.min_support = parse_value(line, key, value)?,
                "top_n" => c.top_n = parse_value(line, key, value)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// Canonical rendering; parsing it back yields an equal configuration.
impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        writeln!(f, "corpus = {}", path(&self.corpus))?;
        writeln!(f, "out = {}", self.out.display())?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "\n# self-organizing map")?;
        writeln!(f, "som_rows = {}", self.som_rows)?;
        writeln!(f, "som_cols = {}", self.som_cols)?;
        writeln!(f, "som_epochs = {}", self.som_epochs)?;
        writeln!(f, "som_initial_radius = {}", self.som_initial_radius)?;
        writeln!(f, "som_final_radius = {}", self.som_final_radius)?;
        writeln!(f, "replication = {}", self.replication)?;
        writeln!(f, "\n# clustering")?;
        writeln!(f, "k_min = {}", self.k_min)?;
        writeln!(f, "k_max = {}", self.k_max)?;
        writeln!(f, "k = {}", self.k.map_or_else(|| "auto".to_string(), |k| k.to_string()))?;
        writeln!(f, "\n# markov layer")?;
        writeln!(f, "hmm_states = {}", self.hmm_states)?;
        writeln!(f, "alpha = {}", self.alpha)?;
        writeln!(f, "hmm_max_iter = {}", self.hmm_max_iter)?;
        writeln!(f, "hmm_tol = {:e}", self.hmm_tol)?;
        writeln!(f, "\n# report")?;
        writeln!(f, "min_support = {}", self.min_support)?;
        writeln!(f, "top_n = {}", self.top_n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_round_trips() {
        let mut c = RunConfig::default();
        c.corpus = Some(PathBuf::from("data/x.csv"));
        c.seed = 42;
        c.k = Some(3);
        c.hmm_tol = 1.5e-7;
        c.som_final_radius = 0.1 + 0.2;
        let back: RunConfig = c.to_string().parse().unwrap();
        assert_eq!(back, c);
        let d = RunConfig::default();
        assert_eq!(d.to_string().parse::<RunConfig>().unwrap(), d);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let c: RunConfig = "# a run\n\nseed = 7  # trailing\nk=auto\n".parse().unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.k, None);
    }

    #[test]
    fn errors_name_the_line() {
        assert!(matches!("seed 3".parse::<RunConfig>(), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(
            "\nsedd = 3".parse::<RunConfig>(),
            Err(ConfigError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(
            "som_rows = -1".parse::<RunConfig>(),
            Err(ConfigError::Value { line: 1, .. })
        ));
        assert!(matches!("k_min = 9".parse::<RunConfig>(), Err(ConfigError::Invalid(_))));
    }
}
