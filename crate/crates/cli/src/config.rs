//! Command line, config files and per-experiment parameter sets.
//!
//! A config file is TOML with optional top-level `seed`, `threads`, `out`
//! and one table per experiment. Flags override file values; the merged
//! table is then deserialised strictly, so a key the experiment does not
//! know is an error whether it came from the file or the command line.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Lln,
    Clt,
    DynVariance,
    LdpFit,
    RateSolve,
    RateBounds,
    Varprob,
    Hydro,
    IdentitySuite,
    Theorem4,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lln => "lln",
            Self::Clt => "clt",
            Self::DynVariance => "dyn-variance",
            Self::LdpFit => "ldp-fit",
            Self::RateSolve => "rate-solve",
            Self::RateBounds => "rate-bounds",
            Self::Varprob => "varprob",
            Self::Hydro => "hydro",
            Self::IdentitySuite => "identity-suite",
            Self::Theorem4 => "theorem4",
        }
    }

    pub fn all() -> &'static [Experiment] {
        &[
            Self::Lln,
            Self::Clt,
            Self::DynVariance,
            Self::LdpFit,
            Self::RateSolve,
            Self::RateBounds,
            Self::Varprob,
            Self::Hydro,
            Self::IdentitySuite,
            Self::Theorem4,
        ]
    }
}

#[derive(Debug, Parser)]
#[command(name = "ssep", version, about = "Exclusion-process experiments", allow_negative_numbers = true)]
pub struct Args {
    #[arg(value_enum)]
    pub experiment: Experiment,
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Initial profile, e.g. "step 0.8 0.2".
    #[arg(long)]
    pub profile: Option<String>,
    /// Macroscopic time (physical time for clt and dyn-variance).
    #[arg(long = "T")]
    pub t: Option<f64>,
    /// Scaling parameter.
    #[arg(long = "N")]
    pub n: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub a_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub t_list: Option<Vec<f64>>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// ldp-fit: cap on samples per size when topping up a thin tail
    #[arg(long)]
    pub max_samples: Option<u64>,
    /// Space-time grid as "nx,nt".
    #[arg(long)]
    pub grid: Option<String>,
    /// dic or lem.
    #[arg(long)]
    pub init: Option<String>,
    /// current or tagged.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub half_width: Option<usize>,
}

/// Seed, threads and output directory after merging file and flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSettings {
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: Experiment,
    pub settings: RunSettings,
    /// The experiment's table after overrides, before typing.
    pub table: toml::Table,
}

impl Resolved {
    /// Typed parameters; unknown keys and ill-typed values are config
    /// errors.
    pub fn params<P: DeserializeOwned + Validate>(&self) -> Result<P, CliError> {
        let p: P = toml::Value::Table(self.table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("[{}] {}", self.experiment.name(), e.message())))?;
        p.validate().map_err(|m| CliError::Config(format!("[{}] {m}", self.experiment.name())))?;
        Ok(p)
    }

    /// SHA-256 over the experiment, seed and parameter table. Threads and
    /// the output path do not change results and are left out.
    pub fn hash(&self) -> String {
        let canon = serde_json::json!({
            "experiment": self.experiment.name(),
            "seed": self.settings.seed,
            "params": toml_to_json(&toml::Value::Table(self.table.clone())),
        });
        let digest = Sha256::digest(canon.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// serde_json keeps object keys sorted, which makes the hash canonical.
pub fn toml_to_json(v: &toml::Value) -> serde_json::Value {
    match v {
        toml::Value::String(s) => serde_json::Value::String(s.clone()),
        toml::Value::Integer(i) => serde_json::Value::from(*i),
        toml::Value::Float(f) => serde_json::Value::from(*f),
        toml::Value::Boolean(b) => serde_json::Value::Bool(*b),
        toml::Value::Datetime(d) => serde_json::Value::String(d.to_string()),
        toml::Value::Array(a) => serde_json::Value::Array(a.iter().map(toml_to_json).collect()),
        toml::Value::Table(t) => serde_json::Value::Object(t.iter().map(|(k, v)| (k.clone(), toml_to_json(v))).collect()),
    }
}

pub fn resolve(args: &Args) -> Result<Resolved, CliError> {
    let mut file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?
        }
        None => toml::Table::new(),
    };

    let mut seed = None;
    let mut threads = None;
    let mut out = None;
    let mut section = toml::Table::new();
    for (key, value) in std::mem::take(&mut file) {
        match key.as_str() {
            "seed" => seed = Some(as_u64(&value, "seed")?),
            "threads" => threads = Some(as_u64(&value, "threads")? as usize),
            "out" => {
                out = Some(PathBuf::from(
                    value.as_str().ok_or_else(|| CliError::Config("out must be a string".into()))?,
                ))
            }
            name if Experiment::all().iter().any(|e| e.name() == name) => {
                let t = match value {
                    toml::Value::Table(t) => t,
                    _ => return Err(CliError::Config(format!("[{name}] must be a table"))),
                };
                if name == args.experiment.name() {
                    section = t;
                }
            }
            other => return Err(CliError::Config(format!("unknown top-level key {other:?}"))),
        }
    }

    let mut set = |k: &str, v: toml::Value| {
        section.insert(k.to_string(), v);
    };
    let floats = |v: &[f64]| toml::Value::Array(v.iter().map(|&x| toml::Value::Float(x)).collect());
    if let Some(v) = &args.profile {
        set("profile", toml::Value::String(v.clone()));
    }
    if let Some(v) = args.t {
        set("t", toml::Value::Float(v));
    }
    if let Some(v) = args.n {
        set("n", toml::Value::Float(v));
    }
    if let Some(v) = args.a {
        set("a", toml::Value::Float(v));
    }
    if let Some(v) = &args.a_list {
        set("a_list", floats(v));
    }
    if let Some(v) = &args.n_list {
        set("n_list", floats(v));
    }
    if let Some(v) = &args.t_list {
        set("t_list", floats(v));
    }
    if let Some(v) = args.samples {
        set("samples", toml::Value::Integer(v as i64));
    }
    if let Some(v) = args.max_samples {
        set("max_samples", toml::Value::Integer(v as i64));
    }
    if let Some(v) = &args.grid {
        set("grid", toml::Value::String(v.clone()));
    }
    if let Some(v) = &args.init {
        set("init", toml::Value::String(v.clone()));
    }
    if let Some(v) = &args.kind {
        set("kind", toml::Value::String(v.clone()));
    }
    if let Some(v) = args.rho {
        set("rho", toml::Value::Float(v));
    }
    if let Some(v) = args.half_width {
        set("half_width", toml::Value::Integer(v as i64));
    }

    let settings = RunSettings {
        seed: args.seed.or(seed).unwrap_or(1),
        threads: args.threads.or(threads),
        out: args.out.clone().or(out).unwrap_or_else(|| PathBuf::from("results")),
    };
    if settings.threads == Some(0) {
        return Err(CliError::Config("threads must be positive".into()));
    }
    Ok(Resolved {
        experiment: args.experiment,
        settings,
        table: section,
    })
}

fn as_u64(v: &toml::Value, key: &str) -> Result<u64, CliError> {
    v.as_integer()
        .filter(|&i| i >= 0)
        .map(|i| i as u64)
        .ok_or_else(|| CliError::Config(format!("{key} must be a non-negative integer")))
}

/// Range checks beyond what the types enforce.
pub trait Validate {
    fn validate(&self) -> Result<(), String>;
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive and finite, got {v}"))
    }
}

fn all_positive(name: &str, v: &[f64]) -> Result<(), String> {
    if v.is_empty() {
        return Err(format!("{name} must not be empty"));
    }
    v.iter().try_for_each(|&x| positive(name, x))
}

fn density(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(format!("{name} must lie in (0, 1), got {v}"))
    }
}

fn count(name: &str, v: u64) -> Result<(), String> {
    if v > 0 {
        Ok(())
    } else {
        Err(format!("{name} must be positive"))
    }
}

/// `"nx,nt"`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("grid must be \"nx,nt\", got {s:?}"))?;
    let nx = a.trim().parse::<usize>().map_err(|_| format!("bad nx in grid {s:?}"))?;
    let nt = b.trim().parse::<usize>().map_err(|_| format!("bad nt in grid {s:?}"))?;
    if nx < 5 || nt == 0 {
        return Err(format!("grid {s:?} too small"));
    }
    Ok((nx, nt))
}

fn init_kind(s: &str) -> Result<(), String> {
    match s {
        "dic" | "lem" => Ok(()),
        _ => Err(format!("init must be dic or lem, got {s:?}")),
    }
}

fn curve_kind(s: &str) -> Result<(), String> {
    match s {
        "current" | "tagged" => Ok(()),
        _ => Err(format!("kind must be current or tagged, got {s:?}")),
    }
}

fn profile(s: &str) -> Result<(), String> {
    ssep_core::profiles::Profile::parse(s).map(|_| ()).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlnParams {
    pub profile: String,
    pub t: f64,
    pub n: f64,
    pub samples: u64,
    pub init: String,
    pub half_width: Option<usize>,
}

impl Default for LlnParams {
    fn default() -> Self {
        Self {
            profile: "step 0.8 0.2".into(),
            t: 1.0,
            n: 100.0,
            samples: 400,
            init: "dic".into(),
            half_width: None,
        }
    }
}

impl Validate for LlnParams {
    fn validate(&self) -> Result<(), String> {
        profile(&self.profile)?;
        positive("t", self.t)?;
        positive("n", self.n)?;
        count("samples", self.samples)?;
        init_kind(&self.init)
    }
}

/// Equilibrium fluctuations; `t` is physical time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CltParams {
    pub rho: f64,
    pub t: f64,
    pub half_width: usize,
    pub samples: u64,
}

impl Default for CltParams {
    fn default() -> Self {
        Self {
            rho: 0.5,
            t: 400.0,
            half_width: 120,
            samples: 50_000,
        }
    }
}

impl Validate for CltParams {
    fn validate(&self) -> Result<(), String> {
        density("rho", self.rho)?;
        positive("t", self.t)?;
        count("half_width", self.half_width as u64)?;
        count("samples", self.samples)
    }
}

/// Deterministic `Q₀(T)/√T` table over `t_list`, plus Monte Carlo from the
/// deterministic constant-density start at physical time `t` unless
/// `samples = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynVarianceParams {
    pub rho: f64,
    pub t_list: Vec<f64>,
    pub t: f64,
    pub half_width: usize,
    pub samples: u64,
}

impl Default for DynVarianceParams {
    fn default() -> Self {
        Self {
            rho: 0.5,
            t_list: vec![100.0, 1000.0, 10000.0],
            t: 400.0,
            half_width: 120,
            samples: 50_000,
        }
    }
}

impl Validate for DynVarianceParams {
    fn validate(&self) -> Result<(), String> {
        density("rho", self.rho)?;
        all_positive("t_list", &self.t_list)?;
        positive("t", self.t)?;
        count("half_width", self.half_width as u64)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdpFitParams {
    pub profile: String,
    pub t: f64,
    pub a: f64,
    pub n_list: Vec<f64>,
    /// Block size: each N is sampled in blocks of this many until the tail
    /// has `MIN_TAIL_HITS` successes or `max_samples` is reached.
    pub samples: u64,
    pub max_samples: u64,
    pub init: String,
    pub kind: String,
    /// Grid of the numerical rate used for comparison; `"0,0"` skips it.
    pub grid: String,
}

impl Default for LdpFitParams {
    fn default() -> Self {
        Self {
            profile: "constant 0.5".into(),
            t: 1.0,
            a: 0.3,
            n_list: vec![8.0, 12.0, 16.0, 24.0],
            samples: 100_000,
            max_samples: 4_000_000,
            init: "dic".into(),
            kind: "current".into(),
            grid: "161,200".into(),
        }
    }
}

impl Validate for LdpFitParams {
    fn validate(&self) -> Result<(), String> {
        profile(&self.profile)?;
        positive("t", self.t)?;
        all_positive("n_list", &self.n_list)?;
        if self.n_list.len() < 2 {
            return Err("n_list needs at least two sizes to fit a slope".into());
        }
        count("samples", self.samples)?;
        count("max_samples", self.max_samples)?;
        init_kind(&self.init)?;
        curve_kind(&self.kind)?;
        if self.grid != "0,0" {
            parse_grid(&self.grid)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSolveParams {
    pub profile: String,
    pub t: f64,
    pub a_list: Vec<f64>,
    pub grid: String,
    pub init: String,
    pub kind: String,
}

impl Default for RateSolveParams {
    fn default() -> Self {
        Self {
            profile: "constant 0.5".into(),
            t: 1.0,
            a_list: vec![0.05, 0.1, 0.2],
            grid: "201,300".into(),
            init: "dic".into(),
            kind: "current".into(),
        }
    }
}

impl Validate for RateSolveParams {
    fn validate(&self) -> Result<(), String> {
        profile(&self.profile)?;
        positive("t", self.t)?;
        if self.a_list.is_empty() {
            return Err("a_list must not be empty".into());
        }
        parse_grid(&self.grid)?;
        init_kind(&self.init)?;
        curve_kind(&self.kind)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateBoundsParams {
    pub profile: String,
    pub t: f64,
    pub a_list: Vec<f64>,
    pub kind: String,
    /// Slack `ε` of the cubic lower bound.
    pub eps: f64,
    /// Reference profile of the lower bound; the profile itself if unset.
    pub reference: Option<String>,
}

impl Default for RateBoundsParams {
    fn default() -> Self {
        Self {
            profile: "constant 0.5".into(),
            t: 1.0,
            a_list: vec![0.1, 0.3, 1.0, 3.0, 10.0, 20.0, 40.0],
            kind: "current".into(),
            eps: 0.1,
            reference: None,
        }
    }
}

impl Validate for RateBoundsParams {
    fn validate(&self) -> Result<(), String> {
        profile(&self.profile)?;
        positive("t", self.t)?;
        if self.a_list.is_empty() {
            return Err("a_list must not be empty".into());
        }
        curve_kind(&self.kind)?;
        if !(self.eps >= 0.0) {
            return Err(format!("eps must be non-negative, got {}", self.eps));
        }
        if let Some(r) = &self.reference {
            profile(r)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarprobParams {
    pub rho: f64,
    pub t_list: Vec<f64>,
    /// Minimiser grid as "nt,nx" on `[−l, l]`.
    pub grid: String,
    pub half_width: Option<usize>,
}

impl Default for VarprobParams {
    fn default() -> Self {
        Self {
            rho: 0.5,
            t_list: vec![100.0, 1000.0, 10000.0],
            grid: "256,1024".into(),
            half_width: None,
        }
    }
}

impl Validate for VarprobParams {
    fn validate(&self) -> Result<(), String> {
        density("rho", self.rho)?;
        all_positive("t_list", &self.t_list)?;
        parse_grid(&self.grid).map(|_| ())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydroParams {
    pub profile: String,
    pub t_list: Vec<f64>,
}

impl Default for HydroParams {
    fn default() -> Self {
        Self {
            profile: "step 0.8 0.2".into(),
            t_list: vec![0.25, 0.5, 1.0, 2.0, 4.0],
        }
    }
}

impl Validate for HydroParams {
    fn validate(&self) -> Result<(), String> {
        profile(&self.profile)?;
        all_positive("t_list", &self.t_list)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentityParams {
    /// Total samples, spread evenly over the profiles.
    pub samples: u64,
    pub profiles: Vec<String>,
    pub n: f64,
    pub t: f64,
}

impl Default for IdentityParams {
    fn default() -> Self {
        Self {
            samples: 10_000,
            profiles: vec![
                "constant 0.5".into(),
                "step 0.8 0.2".into(),
                "indicator -1 1".into(),
                "step 0.3 0.9".into(),
                "table 0.2 0.6 -1:0.2 0:0.9 1:0.6".into(),
            ],
            n: 10.0,
            t: 0.5,
        }
    }
}

impl Validate for IdentityParams {
    fn validate(&self) -> Result<(), String> {
        count("samples", self.samples)?;
        if self.profiles.is_empty() {
            return Err("profiles must not be empty".into());
        }
        self.profiles.iter().try_for_each(|p| profile(p))?;
        positive("n", self.n)?;
        if self.n.fract() != 0.0 {
            return Err(format!("n must be an integer, got {}", self.n));
        }
        positive("t", self.t)
    }
}

/// Block start `1_{[−1,1]}` at scale `N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theorem4Params {
    pub t: f64,
    pub n_list: Vec<f64>,
    pub a_list: Vec<f64>,
    pub samples: u64,
    pub kind: String,
    pub half_width: Option<usize>,
}

impl Default for Theorem4Params {
    fn default() -> Self {
        Self {
            t: 1.0,
            n_list: vec![10.0, 20.0],
            a_list: vec![0.3, 0.5],
            samples: 20_000,
            kind: "current".into(),
            half_width: None,
        }
    }
}

impl Validate for Theorem4Params {
    fn validate(&self) -> Result<(), String> {
        positive("t", self.t)?;
        all_positive("n_list", &self.n_list)?;
        if self.n_list.iter().any(|n| n.fract() != 0.0) {
            return Err("n_list entries must be integers".into());
        }
        all_positive("a_list", &self.a_list)?;
        count("samples", self.samples)?;
        curve_kind(&self.kind)
    }
}
