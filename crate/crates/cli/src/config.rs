//! Experiment configuration files.
//!
//! A config is a TOML document with top-level `experiment`, `seed` and `out`
//! keys, a `[measure]` table naming a built-in measure or listing atoms, and
//! a flat `[params]` table. Every parameter is optional; each subcommand
//! falls back to the values used by the acceptance suite.

use std::path::PathBuf;

use renewal_lab::matrix::GroupElement;
use renewal_lab::measure::{self, GeneratorMeasure, BUILTIN_NAMES};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Largest seed a TOML integer can hold.
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// When present it must name the subcommand being run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    /// Mandatory, either here or through `--seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub measure: MeasureSpec,
    #[serde(default)]
    pub params: Params,
}

/// Either `builtin = "cone2"` or a list of `[[measure.atoms]]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<AtomSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    /// Rows of the matrix.
    pub matrix: Vec<Vec<f64>>,
    pub weight: f64,
    /// Permutation of `A = {0, .., m-1}`; omitted when `A` is trivial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perm: Option<Vec<usize>>,
}

/// Knobs shared by the subcommands. The documentation of each subcommand in
/// [`crate::experiments`] lists the ones it reads and their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Points of the circle grid (an icosphere of similar spacing in d = 3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// Length of sampled products.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma_draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regular_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regular_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolvent_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolvent_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profiles: Option<usize>,
    /// Support radius, edge exponent and origin exponent of the bump used by
    /// `renewal-rate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump_edge: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump_origin: Option<f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// The canonical text of a config: parse, then serialize.
    pub fn normalize(text: &str) -> Result<String, CliError> {
        Ok(Self::parse(text)?.to_toml())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seed.is_some_and(|s| s > MAX_SEED) {
            return Err(CliError::Config(format!("seed must be at most {MAX_SEED}")));
        }
        let p = &self.params;
        let positive = [
            ("gamma", p.gamma),
            ("resolution", p.resolution),
            ("tolerance", p.tolerance),
            ("quad_tol", p.quad_tol),
            ("cutoff", p.cutoff),
            ("resolvent_c", p.resolvent_c),
            ("beta", p.beta),
            ("regular_radius", p.regular_radius),
            ("bump_radius", p.bump_radius),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (p.b_min, p.b_max) {
            if !(lo < hi) {
                return Err(CliError::Config("b_min must be below b_max".into()));
            }
        }
        if let Some(name) = &self.measure.builtin {
            if !self.measure.atoms.is_empty() {
                return Err(CliError::Config("measure takes either builtin or atoms, not both".into()));
            }
            if !BUILTIN_NAMES.contains(&name.as_str()) {
                return Err(CliError::Config(format!("unknown builtin measure {name:?}; known: {}", BUILTIN_NAMES.join(", "))));
            }
        }
        for (i, atom) in self.measure.atoms.iter().enumerate() {
            let d = atom.matrix.len();
            if d == 0 || atom.matrix.iter().any(|row| row.len() != d) {
                return Err(CliError::Config(format!("atom {i}: matrix must be square")));
            }
        }
        Ok(())
    }

    /// The seed, which is mandatory.
    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config("seed is mandatory (set `seed` in the config or pass --seed)".into()))
    }

    /// The configured measure; `cone2` when the table is absent.
    pub fn measure(&self) -> Result<GeneratorMeasure, CliError> {
        let spec = &self.measure;
        if spec.atoms.is_empty() {
            let name = spec.builtin.as_deref().unwrap_or("cone2");
            return measure::builtin(name).ok_or_else(|| CliError::Config(format!("unknown builtin measure {name:?}")));
        }
        let mut atoms = Vec::with_capacity(spec.atoms.len());
        let mut perms = Vec::with_capacity(spec.atoms.len());
        for atom in &spec.atoms {
            atoms.push((GroupElement::from_rows(&atom.matrix)?, atom.weight));
            perms.push(atom.perm.clone().unwrap_or_else(|| vec![0]));
        }
        Ok(GeneratorMeasure::with_action(atoms, perms)?)
    }

    /// Display name of the measure for output tables.
    pub fn measure_name(&self) -> String {
        if self.measure.atoms.is_empty() {
            self.measure.builtin.clone().unwrap_or_else(|| "cone2".into())
        } else {
            "custom".into()
        }
    }
}
