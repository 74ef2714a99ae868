//! Plain-text model specification files.
//!
//! One `key = value` pair per line; blank lines and `#` comments are
//! ignored. Recognized keys:
//!
//! ```text
//! rows = 10                 # required, positive integer
//! cols = 10                 # required, positive integer
//! potential = rll           # or four weights: `w00 w01 w10 w11`
//! h_potential = 1 1 1 0     # horizontal edges only (requires v_potential)
//! v_potential = 1 1 1 0     # vertical edges only (requires h_potential)
//! strip_width = 1           # optional, 1..=cols, default 1
//! ```
//!
//! `potential` applies one table to both edge orientations and conflicts
//! with `h_potential`/`v_potential`. When no potential key is present the
//! RLL table is used. Unknown and duplicate keys are errors.

use rllcap_core::model::{LatticeModel, PairwisePotential};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {reason}")]
    Value {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] rllcap_core::Error),
}

/// One parsed `key = value` line.
pub(crate) struct Pair {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Splits a config file into pairs, enforcing syntax and key uniqueness.
pub(crate) fn parse_pairs(text: &str) -> Result<Vec<Pair>, ConfigError> {
    let mut pairs: Vec<Pair> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.split('#').next().unwrap_or("").trim();
        if trimmed.is_empty() {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or(ConfigError::Syntax { line })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if pairs.iter().any(|p| p.key == key) {
            return Err(ConfigError::DuplicateKey { line, key });
        }
        pairs.push(Pair { key, value, line });
    }
    Ok(pairs)
}

pub(crate) fn parse_usize(pair: &Pair) -> Result<usize, ConfigError> {
    pair.value.parse().map_err(|_| ConfigError::Value {
        line: pair.line,
        key: pair.key.clone(),
        reason: format!("expected a nonnegative integer, got `{}`", pair.value),
    })
}

pub(crate) fn parse_u64(pair: &Pair) -> Result<u64, ConfigError> {
    pair.value.parse().map_err(|_| ConfigError::Value {
        line: pair.line,
        key: pair.key.clone(),
        reason: format!("expected a nonnegative integer, got `{}`", pair.value),
    })
}

/// Parses `rll` or four whitespace-separated weights `w00 w01 w10 w11`.
pub fn parse_potential(text: &str) -> Result<PairwisePotential, String> {
    if text.trim() == "rll" {
        return Ok(PairwisePotential::rll());
    }
    let weights: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("expected `rll` or four weights: {e}"))?;
    if weights.len() != 4 {
        return Err(format!(
            "expected `rll` or four weights `w00 w01 w10 w11`, got {} values",
            weights.len()
        ));
    }
    PairwisePotential::new([[weights[0], weights[1]], [weights[2], weights[3]]])
        .map_err(|e| e.to_string())
}

/// A fully resolved model configuration.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub rows: usize,
    pub cols: usize,
    pub h_potential: PairwisePotential,
    pub v_potential: PairwisePotential,
    pub strip_width: usize,
}

impl ModelSpec {
    /// Parses a model spec file; any key outside the model grammar is an
    /// error.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_pairs(parse_pairs(text)?)
    }

    pub(crate) fn from_pairs(pairs: Vec<Pair>) -> Result<Self, ConfigError> {
        let mut rows = None;
        let mut cols = None;
        let mut potential = None;
        let mut h_potential = None;
        let mut v_potential = None;
        let mut strip_width = None;

        for pair in &pairs {
            match pair.key.as_str() {
                "rows" => rows = Some(parse_usize(pair)?),
                "cols" => cols = Some(parse_usize(pair)?),
                "strip_width" => strip_width = Some(parse_usize(pair)?),
                "potential" | "h_potential" | "v_potential" => {
                    let table =
                        parse_potential(&pair.value).map_err(|reason| ConfigError::Value {
                            line: pair.line,
                            key: pair.key.clone(),
                            reason,
                        })?;
                    match pair.key.as_str() {
                        "potential" => potential = Some(table),
                        "h_potential" => h_potential = Some(table),
                        _ => v_potential = Some(table),
                    }
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line: pair.line,
                        key: pair.key.clone(),
                    })
                }
            }
        }

        let rows = rows.ok_or(ConfigError::Missing("rows"))?;
        let cols = cols.ok_or(ConfigError::Missing("cols"))?;
        let (h, v) = resolve_potentials(potential, h_potential, v_potential)?;
        let spec = Self {
            rows,
            cols,
            h_potential: h,
            v_potential: v,
            strip_width: strip_width.unwrap_or(1),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a spec from command-line flags.
    pub fn inline(
        rows: usize,
        cols: usize,
        potential: Option<&str>,
        strip_width: Option<usize>,
    ) -> Result<Self, ConfigError> {
        let table = match potential {
            Some(text) => parse_potential(text).map_err(ConfigError::Invalid)?,
            None => PairwisePotential::rll(),
        };
        let spec = Self {
            rows,
            cols,
            h_potential: table.clone(),
            v_potential: table,
            strip_width: strip_width.unwrap_or(1),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(ConfigError::Invalid(format!(
                "lattice dimensions must be positive, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.strip_width == 0 || self.strip_width > self.cols {
            return Err(ConfigError::Invalid(format!(
                "strip_width must be in 1..={}, got {}",
                self.cols, self.strip_width
            )));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<LatticeModel, ConfigError> {
        Ok(LatticeModel::new(
            self.rows,
            self.cols,
            self.h_potential.clone(),
            self.v_potential.clone(),
        )?)
    }
}

fn resolve_potentials(
    both: Option<PairwisePotential>,
    h: Option<PairwisePotential>,
    v: Option<PairwisePotential>,
) -> Result<(PairwisePotential, PairwisePotential), ConfigError> {
    match (both, h, v) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(ConfigError::Invalid(
            "`potential` conflicts with `h_potential`/`v_potential`".into(),
        )),
        (Some(p), None, None) => Ok((p.clone(), p)),
        (None, Some(h), Some(v)) => Ok((h, v)),
        (None, Some(_), None) => Err(ConfigError::Missing("v_potential")),
        (None, None, Some(_)) => Err(ConfigError::Missing("h_potential")),
        (None, None, None) => Ok((PairwisePotential::rll(), PairwisePotential::rll())),
    }
}
