//! Command-line flags and their configuration-file counterparts.
//!
//! Every flag (except `--config` and `--threads`) is also a key of the TOML
//! configuration file, spelled with underscores: `--lambda1-0` is
//! `lambda1_0`. Flags win over the file. Relative paths in the file are
//! resolved against the file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Deserializer};
use sface_core::data::CsvSchema;
use sface_core::estimators::{Augmentation, MethodLabel};
use sface_core::identification::Scale;
use sface_core::profiles::AssumptionCombo;
use sface_core::sensitivity::Axis;
use sface_core::simulation::{Misspec, Study};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "sface",
    version,
    about = "Subtype-free average causal effects: estimation, sensitivity grids and simulation studies"
)]
pub struct Cli {
    /// Worker threads for bootstrap, grid and simulation work (0 = all cores).
    /// Results do not depend on this setting.
    #[arg(long, global = true, env = "SFACE_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point estimates, bootstrap standard errors and Wald intervals for
    /// every estimand (JSON or CSV).
    Estimate(EstimateArgs),
    /// Effects over a grid of subtype-switching probabilities (CSV or JSON).
    Sensitivity(SensitivityArgs),
    /// Monte-Carlo simulation study; writes a metrics CSV.
    Simulate(SimulateArgs),
    /// Potential-outcome profiles allowed by an assumption combination.
    Profiles(ProfilesArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate(_) => "estimate",
            Command::Sensitivity(_) => "sensitivity",
            Command::Simulate(_) => "simulate",
            Command::Profiles(_) => "profiles",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// Column mapping: a TOML file on the command line, a path or an inline
/// table in the configuration file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SchemaSource {
    Path(PathBuf),
    Inline(CsvSchema),
}

impl FromStr for SchemaSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(SchemaSource::Path(PathBuf::from(s)))
    }
}

/// A sensitivity axis given as `v` or `lo:hi:step`; numbers are accepted in
/// the configuration file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisValue(pub Axis);

impl FromStr for AxisValue {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(AxisValue)
    }
}

impl<'de> Deserialize<'de> for AxisValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(AxisValue(Axis::Fixed(v))),
            Raw::Text(s) => s.parse().map(AxisValue).map_err(serde::de::Error::custom),
        }
    }
}

/// `path=value` override of one data-generating parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSetting {
    pub path: String,
    pub value: f64,
}

impl FromStr for ParamSetting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (path, value) = s.split_once('=').ok_or_else(|| format!("expected path=value, got `{s}`"))?;
        let value = value.trim().parse().map_err(|_| format!("cannot parse `{value}` as a number"))?;
        Ok(ParamSetting { path: path.trim().to_string(), value })
    }
}

/// The configuration file spells overrides as a table, `[param]` with
/// `"gamma2.2" = 1.1`.
fn param_table<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<ParamSetting>>, D::Error> {
    let map: Option<BTreeMap<String, f64>> = Option::deserialize(d)?;
    Ok(map.map(|m| m.into_iter().map(|(path, value)| ParamSetting { path, value }).collect()))
}

/// Options shared by the commands that analyse a dataset.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct InputArgs {
    /// Configuration file (TOML) whose keys mirror the flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Input CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Column mapping (TOML: exposure, outcome, covariates, weight,
    /// case_covariates). Default: `A`, `Y`, `weight` if present, all other
    /// columns as covariates.
    #[arg(long)]
    pub schema: Option<SchemaSource>,
    /// Predictors of the missing-subtype model (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub missingness_covariates: Option<Vec<String>>,
    /// Quantile at which inverse-probability missingness weights are
    /// truncated [default: 0.99].
    #[arg(long)]
    pub truncation_quantile: Option<f64>,
    /// Augmentation of the doubly-robust estimator [default: unit].
    #[arg(long)]
    pub augmentation: Option<Augmentation>,
    /// Lower propensity clipping bound [default: 0.01].
    #[arg(long)]
    pub clip_lo: Option<f64>,
    /// Upper propensity clipping bound [default: 0.99].
    #[arg(long)]
    pub clip_hi: Option<f64>,
    /// Bootstrap replicates [default: 200].
    #[arg(long)]
    pub boot: Option<usize>,
    /// Master seed [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file [default: standard output].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Monotonicity assumptions for subtypes 1 and 2, each s, d or n
    /// [default: s,s].
    #[arg(long)]
    pub combo: Option<AssumptionCombo>,
    /// Estimation methods: stand, iptw, dr (comma-separated) [default: all].
    #[arg(long, value_delimiter = ',')]
    pub method: Option<Vec<MethodLabel>>,
    /// Effect scales: diff, rr (comma-separated) [default: both].
    #[arg(long, value_delimiter = ',')]
    pub scale: Option<Vec<Scale>>,
    /// Probability of switching from subtype 1 to 2 [default: 0].
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Probability of switching from subtype 2 to 1 [default: 0].
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Probability that exposure prevents subtype-1 disease [default: 0].
    #[arg(long = "lambda1-0")]
    pub lambda1_0: Option<f64>,
    /// Probability that exposure prevents subtype-2 disease [default: 0].
    #[arg(long = "lambda2-0")]
    pub lambda2_0: Option<f64>,
    /// Output format: json or csv [default: json].
    #[arg(long)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct SensitivityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Monotonicity assumptions for subtypes 1 and 2 [default: d,d].
    #[arg(long)]
    pub combo: Option<AssumptionCombo>,
    /// Estimation method [default: dr].
    #[arg(long)]
    pub method: Option<MethodLabel>,
    /// Effect scale [default: diff].
    #[arg(long)]
    pub scale: Option<Scale>,
    /// λ1 as a value or lo:hi:step [default: 0].
    #[arg(long)]
    pub lambda1: Option<AxisValue>,
    /// λ2 as a value or lo:hi:step [default: 0].
    #[arg(long)]
    pub lambda2: Option<AxisValue>,
    /// Fixed λ1⁰ [default: 0].
    #[arg(long = "lambda1-0")]
    pub lambda1_0: Option<f64>,
    /// Fixed λ2⁰ [default: 0].
    #[arg(long = "lambda2-0")]
    pub lambda2_0: Option<f64>,
    /// Level of the Wald intervals is 1 − alpha [default: 0.05].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Drop grid values above the data-driven λ bounds.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub clip_to_bounds: Option<bool>,
    /// Also write the significance boundary (CSV) to this file.
    #[arg(long)]
    pub boundary: Option<PathBuf>,
    /// Output format: csv or json [default: csv].
    #[arg(long)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    /// Configuration file (TOML) whose keys mirror the flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Study: I, II or III [default: I].
    #[arg(long)]
    pub study: Option<Study>,
    /// Cohort size per simulated dataset [default: 10000].
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of simulated datasets [default: 500].
    #[arg(long)]
    pub sims: Option<usize>,
    /// Bootstrap replicates per dataset; 0 skips coverage [default: 200].
    #[arg(long)]
    pub boot: Option<usize>,
    /// Master seed [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Study III misspecification: none, exposure, outcome or both
    /// [default: none].
    #[arg(long)]
    pub misspec: Option<Misspec>,
    /// Base of the logarithm in the misspecified X2 transform [default: 2].
    #[arg(long)]
    pub log_base: Option<f64>,
    /// Monte-Carlo size for the true effects [default: 10000000].
    #[arg(long)]
    pub n_mc: Option<usize>,
    /// Parameter swept across values (e.g. gamma2.2). Study II defaults to
    /// gamma2.2 over ln 2..ln 6.
    #[arg(long)]
    pub sweep_path: Option<String>,
    /// Values of the swept parameter (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub sweep_values: Option<Vec<f64>>,
    /// Data-generating parameter override path=value (repeatable or
    /// comma-separated).
    #[arg(long, value_delimiter = ',')]
    #[serde(deserialize_with = "param_table")]
    pub param: Option<Vec<ParamSetting>>,
    /// Augmentation of the doubly-robust estimator [default: unit].
    #[arg(long)]
    pub augmentation: Option<Augmentation>,
    /// Output file [default: standard output].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct ProfilesArgs {
    /// Configuration file (TOML) whose keys mirror the flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Monotonicity assumptions for subtypes 1 and 2, each s, d or n.
    #[arg(long)]
    pub combo: Option<AssumptionCombo>,
    /// Observed record A,Y1,Y2: print only the compatible profiles.
    #[arg(long)]
    pub observed: Option<String>,
    /// Output format: text or json [default: text].
    #[arg(long)]
    pub format: Option<Format>,
    /// Output file [default: standard output].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Flags that have no configuration key.
pub const FLAG_ONLY: [&str; 4] = ["config", "threads", "help", "version"];

/// Configuration keys accepted by a subcommand: its argument ids.
pub fn config_keys(command: &str) -> Vec<String> {
    let cli = Cli::command();
    let sub = cli.find_subcommand(command).expect("known subcommand");
    sub.get_arguments()
        .map(|a| a.get_id().as_str().to_string())
        .filter(|id| !FLAG_ONLY.contains(&id.as_str()))
        .collect()
}

/// Parse a configuration file for `command`, rejecting unknown keys.
pub fn load_config<T: for<'de> Deserialize<'de>>(path: &Path, command: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, command).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_config<T: for<'de> Deserialize<'de>>(text: &str, command: &str) -> Result<T, String> {
    let table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
    let known = config_keys(command);
    if let Some(k) = table.keys().find(|k| !known.contains(k)) {
        return Err(format!("unknown key `{k}` for `{command}` (known: {})", known.join(", ")));
    }
    toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| e.to_string())
}

/// Resolve a path from the configuration file against its directory.
fn rebase(p: &mut Option<PathBuf>, dir: &Path) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = dir.join(&*path);
        }
    }
}

/// Field-wise `self.or(other)`.
macro_rules! merge_fields {
    ($a:ident, $b:ident; $($f:ident),* $(,)?) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f; } )*
    };
}

impl InputArgs {
    fn merge(&mut self, file: InputArgs) {
        merge_fields!(self, file; data, schema, missingness_covariates, truncation_quantile, augmentation,
            clip_lo, clip_hi, boot, seed, out);
    }

    fn rebase(&mut self, dir: &Path) {
        rebase(&mut self.data, dir);
        rebase(&mut self.out, dir);
        if let Some(SchemaSource::Path(p)) = &mut self.schema {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl EstimateArgs {
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let Some(path) = self.input.config.clone() else { return Ok(self) };
        let mut file: EstimateArgs = load_config(&path, "estimate")?;
        file.input.rebase(&config_dir(&path));
        self.input.merge(file.input);
        merge_fields!(self, file; combo, method, scale, lambda1, lambda2, lambda1_0, lambda2_0, format);
        Ok(self)
    }
}

impl SensitivityArgs {
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let Some(path) = self.input.config.clone() else { return Ok(self) };
        let mut file: SensitivityArgs = load_config(&path, "sensitivity")?;
        let dir = config_dir(&path);
        file.input.rebase(&dir);
        rebase(&mut file.boundary, &dir);
        self.input.merge(file.input);
        merge_fields!(self, file; combo, method, scale, lambda1, lambda2, lambda1_0, lambda2_0, alpha,
            clip_to_bounds, boundary, format);
        Ok(self)
    }
}

impl SimulateArgs {
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let mut file: SimulateArgs = load_config(&path, "simulate")?;
        rebase(&mut file.out, &config_dir(&path));
        merge_fields!(self, file; study, n, sims, boot, seed, misspec, log_base, n_mc, sweep_path, sweep_values,
            param, augmentation, out);
        Ok(self)
    }
}

impl ProfilesArgs {
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let mut file: ProfilesArgs = load_config(&path, "profiles")?;
        rebase(&mut file.out, &config_dir(&path));
        merge_fields!(self, file; combo, observed, format, out);
        Ok(self)
    }
}
