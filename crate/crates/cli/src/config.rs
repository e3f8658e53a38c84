use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Congestion {
    Linear,
    Mm1,
    #[value(name = "none")]
    #[serde(rename = "none")]
    Uncongested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeArg {
    Internet,
    Icn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Popularity {
    Uniform,
    Zipf,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Scenario and output settings shared by every subcommand. The same keys
/// are accepted in a config file; flags take precedence.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Demand at zero price.
    #[arg(long)]
    pub dmax: Option<f64>,
    /// Price sensitivity of demand.
    #[arg(long)]
    pub d: Option<f64>,
    /// Link bandwidth B.
    #[arg(long)]
    pub b: Option<f64>,
    /// Background load on the link.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Caching factor in [0, 1].
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Congestion factor.
    #[arg(long, value_enum)]
    pub g: Option<Congestion>,
    /// Congestion parameter a, instead of B and lambda.
    #[arg(long)]
    pub a: Option<f64>,
    /// Side payment (positive: CP pays ISP).
    #[arg(long)]
    pub ps: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Caching cost scale.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    #[arg(long, value_enum)]
    pub popularity: Option<Popularity>,
    /// Zipf exponent.
    #[arg(long)]
    pub zipf_s: Option<f64>,
    /// Number of users N in the popularity model.
    #[arg(long)]
    pub n_users: Option<usize>,
    /// Popularity table with header `j,pi`.
    #[arg(long)]
    pub popularity_csv: Option<PathBuf>,
    /// Golden-section tolerance for the optimal caching factor.
    #[arg(long)]
    pub refine_tol: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(alias = "output_format")]
    pub format: Option<Format>,
    /// Output file (default: standard output).
    #[arg(long)]
    #[serde(alias = "output_path")]
    pub output: Option<PathBuf>,
    /// Accepted for reproducible configs; all computation is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

macro_rules! overlay_fields {
    ($base:expr, $top:expr; $($field:ident),* $(,)?) => {
        RunConfig { $($field: $top.$field.or($base.$field)),* }
    };
}

impl RunConfig {
    /// Fields set in `top` win over `self`.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        overlay_fields!(self, top;
            dmax, d, b, lambda, kappa, g, a, ps, grid, gamma, regime, popularity,
            zipf_s, n_users, popularity_csv, refine_tol, format, output, seed)
    }

    pub fn from_path(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::parse(&text)
            .map_err(|msg| CliError::Input(format!("config {}: {msg}", path.display())))
    }

    /// JSON object or flat `key = value` lines (`#` starts a comment).
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let value = if text.trim_start().starts_with('{') {
            serde_json::from_str::<Value>(text).map_err(|e| e.to_string())?
        } else {
            Value::Object(parse_key_values(text)?)
        };
        serde_json::from_value(value).map_err(|e| e.to_string())
    }
}

fn parse_key_values(text: &str) -> Result<Map<String, Value>, String> {
    let mut map = Map::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        let key = key.trim().replace('-', "_");
        if map
            .insert(key.clone(), scalar_value(value.trim()))
            .is_some()
        {
            return Err(format!("line {}: duplicate key {key}", i + 1));
        }
    }
    Ok(map)
}

fn scalar_value(text: &str) -> Value {
    match text {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Ok(n) = text.parse::<u64>() {
        return Value::from(n);
    }
    if let Ok(n) = text.parse::<i64>() {
        return Value::from(n);
    }
    if let Some(n) = text
        .parse::<f64>()
        .ok()
        .and_then(serde_json::Number::from_f64)
    {
        return Value::Number(n);
    }
    let unquoted = text
        .strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .unwrap_or(text);
    Value::String(unquoted.to_string())
}
