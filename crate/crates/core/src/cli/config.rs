//! Flat `key = value` run configuration for the simulation harness.

use std::fmt::Write as _;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::fmt::g10;
use crate::sim::SimConfig;

/// Accepted keys with their meaning. Defaults are rendered from
/// [`SimConfig::default`].
pub const KEYS: &[(&str, &str)] = &[
    ("n", "sample size"),
    ("J", "replications per h"),
    ("L", "Gaussian draws per adjustment"),
    ("h_grid", "local parameters, `start:step:end` or a comma list"),
    ("M", "truncation level"),
    ("seed", "master seed"),
    ("pi", "treated share among participants"),
    ("eps_coef", "kink threshold eps_n = eps_coef * n^eps_exp"),
    ("eps_exp", "exponent of eps_n"),
    ("lambda_coef", "support half-width lambda_n = lambda_coef * n^lambda_exp"),
    ("lambda_exp", "exponent of lambda_n"),
    ("km_lo", "lower end of the search box"),
    ("km_hi", "upper end of the search box"),
    ("inner_grid", "support grid points per axis"),
    ("outer_grid", "search grid points per axis"),
    ("tol_w", "simplex tolerance in search-box widths"),
    ("max_evals", "search evaluation budget"),
    ("scale_by_sqrt_n", "multiply regret by sqrt(n) (true/false)"),
];

fn valid_keys() -> String {
    KEYS.iter().map(|(k, _)| *k).collect::<Vec<_>>().join(", ")
}

/// A parsed configuration and the keys that appeared in the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: SimConfig,
    pub given: Vec<String>,
}

/// Parse `key = value` lines; `#` starts a comment and blank lines are
/// skipped. Keys not given keep their defaults.
pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let mut config = SimConfig::default();
    let mut given = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::UnknownKey {
                line: line_no,
                key: key.to_string(),
                valid: valid_keys(),
            });
        }
        apply(&mut config, key, value).map_err(|msg| Error::Parse {
            line: line_no,
            msg: format!("{key}: {msg}"),
        })?;
        if !given.iter().any(|g| g == key) {
            given.push(key.to_string());
        }
    }
    Ok(ParsedConfig { config, given })
}

fn num<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse `{value}`"))
}

fn apply(c: &mut SimConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    let a = &mut c.adjust;
    match key {
        "n" => c.n = num(value)?,
        "J" => c.replications = num(value)?,
        "L" => a.draws = num(value)?,
        "h_grid" => c.h_grid = parse_grid(value)?,
        "M" => a.truncation = num(value)?,
        "seed" => c.seed = num(value)?,
        "pi" => c.pi = num(value)?,
        "eps_coef" => a.eps_coef = num(value)?,
        "eps_exp" => a.eps_exp = num(value)?,
        "lambda_coef" => a.lambda_coef = num(value)?,
        "lambda_exp" => a.lambda_exp = num(value)?,
        "km_lo" => a.km_lo = num(value)?,
        "km_hi" => a.km_hi = num(value)?,
        "inner_grid" => a.grid.support_points = num(value)?,
        "outer_grid" => a.grid.search_points = num(value)?,
        "tol_w" => a.grid.tol_w = num(value)?,
        "max_evals" => a.grid.max_evals = num(value)?,
        "scale_by_sqrt_n" => {
            c.scale_by_sqrt_n = match value {
                "true" | "1" => true,
                "false" | "0" => false,
                _ => return Err(format!("expected true or false, got `{value}`")),
            }
        }
        _ => unreachable!("key checked against KEYS"),
    }
    Ok(())
}

/// `start:step:end` (inclusive) or `x1,x2,...`.
pub fn parse_grid(value: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [start, step, end] => {
            let (start, step, end): (f64, f64, f64) = (num(start)?, num(step)?, num(end)?);
            if !(step > 0.0) || !(end >= start) {
                return Err("range needs step > 0 and end >= start".into());
            }
            let count = ((end - start) / step + 1e-9).floor() as usize;
            Ok((0..=count).map(|i| round12(start + i as f64 * step)).collect())
        }
        [_] => value
            .split(',')
            .map(|x| num::<f64>(x.trim()))
            .collect::<std::result::Result<Vec<_>, _>>(),
        _ => Err(format!("cannot parse grid `{value}`")),
    }
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Every key with its resolved value, in `KEYS` order.
pub fn render_config(c: &SimConfig) -> Vec<(&'static str, String)> {
    let a = &c.adjust;
    KEYS.iter()
        .map(|(k, _)| {
            let v = match *k {
                "n" => c.n.to_string(),
                "J" => c.replications.to_string(),
                "L" => a.draws.to_string(),
                "h_grid" => c.h_grid.iter().map(|h| g10(*h)).collect::<Vec<_>>().join(","),
                "M" => g10(a.truncation),
                "seed" => c.seed.to_string(),
                "pi" => g10(c.pi),
                "eps_coef" => g10(a.eps_coef),
                "eps_exp" => format!("{}", a.eps_exp),
                "lambda_coef" => g10(a.lambda_coef),
                "lambda_exp" => format!("{}", a.lambda_exp),
                "km_lo" => g10(a.km_lo),
                "km_hi" => g10(a.km_hi),
                "inner_grid" => a.grid.support_points.to_string(),
                "outer_grid" => a.grid.search_points.to_string(),
                "tol_w" => g10(a.grid.tol_w),
                "max_evals" => a.grid.max_evals.to_string(),
                "scale_by_sqrt_n" => c.scale_by_sqrt_n.to_string(),
                _ => unreachable!(),
            };
            (*k, v)
        })
        .collect()
}

/// Help text listing every accepted key and its default.
pub fn keys_help() -> String {
    let defaults = render_config(&SimConfig::default());
    let mut out = String::from("Config keys (key = value, '#' comments):\n");
    for ((key, doc), (_, default)) in KEYS.iter().zip(&defaults) {
        let shown = if *key == "h_grid" { "-2:0.05:2".to_string() } else { default.clone() };
        let _ = writeln!(out, "  {key:<16} {doc} [default: {shown}]");
    }
    out
}

/// Keys mentioned in a help text produced by [`keys_help`].
pub fn keys_in_help(help: &str) -> Vec<String> {
    help.lines()
        .skip_while(|l| !l.starts_with("Config keys"))
        .skip(1)
        .take_while(|l| l.starts_with("  "))
        .filter_map(|l| l.split_whitespace().next().map(str::to_string))
        .collect()
}

/// Resolved parameters of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub entries: Vec<(&'static str, String)>,
    pub seed: u64,
    pub version: &'static str,
    pub threads: usize,
    pub duration: Duration,
}

impl RunManifest {
    pub fn new(config: &SimConfig, threads: usize, duration: Duration) -> Self {
        Self {
            entries: render_config(config),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION"),
            threads,
            duration,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        let _ = writeln!(out, "# version={}", self.version);
        let _ = writeln!(out, "# threads={}", self.threads);
        let _ = writeln!(out, "# duration_secs={:.3}", self.duration.as_secs_f64());
        out
    }
}
