//! Run configuration: JSON validated against the published schema, then
//! deserialized and resolved so that every default is explicit.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chern::ElementSpec;
use crate::exact::{format_rat, parse_rat, IntMatrix, Rat};
use crate::frequency::MagneticMatrix;
use crate::odometer::SubgroupChain;
use crate::random::{random_chain, rng_from_seed};
use crate::spectral::{Boundary, GapParams, HamiltonianSpec};

pub const SCHEMA: &str = include_str!("../../schema/run_config.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Freq,
    Coh,
    Chern,
    Spectrum,
    Verify,
    Butterfly,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Freq => "freq",
            Mode::Coh => "coh",
            Mode::Chern => "chern",
            Mode::Spectrum => "spectrum",
            Mode::Verify => "verify",
            Mode::Butterfly => "butterfly",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChainSpec {
    Trivial {
        p: usize,
    },
    Diagonal {
        degrees: Vec<i64>,
        depth: usize,
    },
    Explicit {
        p: usize,
        matrices: Vec<Vec<Vec<i64>>>,
    },
    /// Drawn from the run seed.
    Random {
        p: usize,
        depth: usize,
        max_index: u64,
    },
}

impl ChainSpec {
    pub fn p(&self) -> usize {
        match self {
            ChainSpec::Trivial { p }
            | ChainSpec::Explicit { p, .. }
            | ChainSpec::Random { p, .. } => *p,
            ChainSpec::Diagonal { degrees, .. } => degrees.len(),
        }
    }

    pub fn build(&self, seed: u64) -> Result<SubgroupChain, ConfigError> {
        let invalid = |e: crate::odometer::ChainError| ConfigError::Invalid {
            field: "/chain".into(),
            message: e.to_string(),
        };
        match self {
            ChainSpec::Trivial { p } => Ok(SubgroupChain::trivial(*p)),
            ChainSpec::Diagonal { degrees, depth } => {
                SubgroupChain::diagonal(degrees, *depth).map_err(invalid)
            }
            ChainSpec::Explicit { p, matrices } => SubgroupChain::new(
                *p,
                matrices.iter().map(|m| IntMatrix::from_rows(m)).collect(),
            )
            .map_err(invalid),
            ChainSpec::Random {
                p,
                depth,
                max_index,
            } => Ok(random_chain(
                &mut rng_from_seed(seed),
                *p,
                *depth,
                *max_index,
            )),
        }
    }

    /// Short stable identifier used in reports.
    pub fn id(&self, seed: u64) -> String {
        match self {
            ChainSpec::Trivial { p } => format!("trivial(p={p})"),
            ChainSpec::Diagonal { degrees, depth } => {
                format!("diagonal({degrees:?}, depth={depth})")
            }
            ChainSpec::Explicit { p, matrices } => format!("explicit(p={p}, {matrices:?})"),
            ChainSpec::Random {
                p,
                depth,
                max_index,
            } => {
                format!("random(p={p}, depth={depth}, max_index={max_index}, seed={seed})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSpec {
    /// Strict upper triangle, row by row, as `"a/b"`.
    pub upper: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub level: usize,
    pub values: Vec<String>,
    #[serde(default = "one_string")]
    pub coupling: String,
    #[serde(default)]
    pub base_point: Vec<i64>,
}

fn one_string() -> String {
    "1/1".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSettings {
    #[serde(default = "default_volumes")]
    pub volumes: Vec<usize>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Resolved from the boundary and volumes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_q_max")]
    pub q_max: u64,
    /// Resolved to the chain depth when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_level: Option<usize>,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
}

fn default_volumes() -> Vec<usize> {
    vec![12, 24, 36]
}
fn default_delta() -> f64 {
    0.05
}
fn default_eps() -> f64 {
    0.02
}
fn default_q_max() -> u64 {
    12
}
fn default_boundary() -> Boundary {
    Boundary::Periodic
}

impl Default for SpectralSettings {
    fn default() -> Self {
        Self {
            volumes: default_volumes(),
            delta: default_delta(),
            tol: None,
            eps: default_eps(),
            q_max: default_q_max(),
            max_level: None,
            boundary: default_boundary(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ButterflySettings {
    #[serde(default = "default_butterfly_q")]
    pub q_max: u64,
    #[serde(default = "default_butterfly_volume")]
    pub volume: usize,
}

fn default_butterfly_q() -> u64 {
    6
}
fn default_butterfly_volume() -> usize {
    16
}

impl Default for ButterflySettings {
    fn default() -> Self {
        Self {
            q_max: default_butterfly_q(),
            volume: default_butterfly_volume(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySettings {
    #[serde(default = "d100")]
    pub random_chains: usize,
    #[serde(default = "d3")]
    pub max_depth: usize,
    #[serde(default = "d64")]
    pub max_index: u64,
    #[serde(default = "d5")]
    pub wide_chains: usize,
    #[serde(default = "d36")]
    pub wide_max_index: u64,
    #[serde(default = "d1000")]
    pub pfaffians: usize,
    #[serde(default = "d200")]
    pub chern_elements: usize,
}

fn d100() -> usize {
    100
}
fn d3() -> usize {
    3
}
fn d64() -> u64 {
    64
}
fn d5() -> usize {
    5
}
fn d36() -> u64 {
    36
}
fn d1000() -> usize {
    1000
}
fn d200() -> usize {
    200
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            random_chains: d100(),
            max_depth: d3(),
            max_index: d64(),
            wide_chains: d5(),
            wide_max_index: d36(),
            pfaffians: d1000(),
            chern_elements: d200(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default = "default_gaps_csv")]
    pub gaps_csv: String,
    #[serde(default = "default_butterfly_csv")]
    pub butterfly_csv: String,
}

fn default_report() -> String {
    "report.json".into()
}
fn default_gaps_csv() -> String {
    "gaps.csv".into()
}
fn default_butterfly_csv() -> String {
    "butterfly.csv".into()
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            report: default_report(),
            gaps_csv: default_gaps_csv(),
            butterfly_csv: default_butterfly_csv(),
        }
    }
}

fn default_schema_version() -> u32 {
    1
}

fn default_chain() -> ChainSpec {
    ChainSpec::Trivial { p: 2 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_chain")]
    pub chain: ChainSpec,
    /// Zero matrix when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSpec>,
    /// Chain depth when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub spectral: SpectralSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<ElementSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees: Option<Vec<i64>>,
    #[serde(default)]
    pub butterfly: ButterflySettings,
    #[serde(default)]
    pub verify: VerifySettings,
    #[serde(default)]
    pub outputs: OutputPaths,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("config is not valid JSON (line {line}, column {column}): {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("invalid value at `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("config mode `{config}` does not match subcommand `{command}`")]
    ModeMismatch { config: Mode, command: Mode },
}

/// Every schema violation in `value`, as `(instance path, message)`.
pub fn schema_violations(value: &Value) -> Vec<(String, String)> {
    let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("bundled schema compiles");
    let result = compiled.validate(value);
    match result {
        Ok(()) => Vec::new(),
        Err(errors) => {
            let mut out: Vec<(String, String)> = errors
                .map(|e| {
                    let path = e.instance_path.to_string();
                    (
                        if path.is_empty() { "/".into() } else { path },
                        e.to_string(),
                    )
                })
                .collect();
            out.sort();
            out
        }
    }
}

impl RunConfig {
    /// Parses, validates against the schema, and resolves defaults.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        if let Some((field, message)) = schema_violations(&value).into_iter().next() {
            return Err(ConfigError::Schema { field, message });
        }
        let config: RunConfig = serde_json::from_value(value).map_err(|e| ConfigError::Schema {
            field: "/".into(),
            message: e.to_string(),
        })?;
        config.resolve()
    }

    /// Fills every defaulted field and checks cross-field consistency.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        let p = self.chain.p();
        let chain = self.chain.build(self.seed)?;
        let pairs = p * p.saturating_sub(1) / 2;
        let theta = self.theta.get_or_insert_with(|| ThetaSpec {
            upper: vec!["0/1".into(); pairs],
        });
        if theta.upper.len() != pairs {
            return Err(ConfigError::Invalid {
                field: "/theta/upper".into(),
                message: format!(
                    "expected {pairs} entries for p = {p}, got {}",
                    theta.upper.len()
                ),
            });
        }
        for (k, s) in theta.upper.iter_mut().enumerate() {
            *s = format_rat(&parse_field(s, &format!("/theta/upper/{k}"))?);
        }
        let level = *self.level.get_or_insert(chain.depth());
        if level > chain.depth() {
            return Err(ConfigError::Invalid {
                field: "/level".into(),
                message: format!("chain has {} levels", chain.depth()),
            });
        }
        if let Some(pot) = &mut self.potential {
            if pot.base_point.is_empty() {
                pot.base_point = vec![0; p];
            }
            pot.coupling = format_rat(&parse_field(&pot.coupling, "/potential/coupling")?);
            for (k, v) in pot.values.iter_mut().enumerate() {
                *v = format_rat(&parse_field(v, &format!("/potential/values/{k}"))?);
            }
        }
        let s = &mut self.spectral;
        if s.tol.is_none() {
            s.tol = Some(GapParams::defaults(s.boundary, p, &s.volumes).tol);
        }
        s.max_level.get_or_insert(chain.depth());
        if let Some(e) = &mut self.element {
            *e =
                ElementSpec::from_element(&e.to_element().map_err(|err| ConfigError::Invalid {
                    field: "/element".into(),
                    message: err.to_string(),
                })?);
        }
        Ok(self)
    }

    pub fn chain(&self) -> Result<SubgroupChain, ConfigError> {
        self.chain.build(self.seed)
    }

    pub fn theta(&self) -> Result<MagneticMatrix, ConfigError> {
        let p = self.chain.p();
        let upper: Vec<Rat> = match &self.theta {
            Some(t) => t
                .upper
                .iter()
                .enumerate()
                .map(|(k, s)| parse_field(s, &format!("/theta/upper/{k}")))
                .collect::<Result<_, _>>()?,
            None => vec![Rat::from_integer(0.into()); p * p.saturating_sub(1) / 2],
        };
        Ok(MagneticMatrix::from_upper(p, &upper))
    }

    pub fn hamiltonian(&self) -> Result<HamiltonianSpec, ConfigError> {
        let theta = self.theta()?;
        let mut spec = HamiltonianSpec::free(theta, self.spectral.boundary);
        if let Some(pot) = &self.potential {
            spec.chain = self.chain()?;
            spec.potential_level = pot.level;
            spec.potential_values = pot
                .values
                .iter()
                .enumerate()
                .map(|(k, v)| parse_field(v, &format!("/potential/values/{k}")))
                .collect::<Result<_, _>>()?;
            spec.coupling = parse_field(&pot.coupling, "/potential/coupling")?;
            spec.base_point = if pot.base_point.is_empty() {
                vec![0; spec.p()]
            } else {
                pot.base_point.clone()
            };
        }
        spec.validate().map_err(|e| ConfigError::Invalid {
            field: "/potential".into(),
            message: e.to_string(),
        })?;
        Ok(spec)
    }

    pub fn gap_params(&self) -> GapParams {
        let s = &self.spectral;
        let defaults = GapParams::defaults(s.boundary, self.chain.p(), &s.volumes);
        GapParams {
            delta: s.delta,
            tol: s.tol.unwrap_or(defaults.tol),
        }
    }
}

fn parse_field(s: &str, field: &str) -> Result<Rat, ConfigError> {
    parse_rat(s).map_err(|e| ConfigError::Invalid {
        field: field.into(),
        message: e.to_string(),
    })
}
