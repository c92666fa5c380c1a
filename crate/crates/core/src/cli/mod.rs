//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on a mathematical or numerical error, 2 on a
//! usage error (bad flags, malformed config).

pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use crate::adjust::{lam_str, plug_in_str, AdjustSettings};
use crate::error::{Error, Result};
use crate::fmt::g10;
use crate::gauss::{self, GaussianLaw, SeededStream};
use crate::model::{IdModel, ModelKind, Theta};
use crate::rule::{kappa, kappa_prime, KappaMode, KappaSpec};
use crate::sim::{run_experiment_with_threads, write_csv};

pub use config::{parse_config, ParsedConfig, RunManifest};

/// Comma-separated list of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct NumList(pub Vec<f64>);

impl FromStr for NumList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| format!("`{x}` is not a number")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(NumList)
    }
}

impl NumList {
    fn exact<const N: usize>(&self, flag: &str) -> Result<[f64; N]> {
        <[f64; N]>::try_from(self.0.as_slice())
            .map_err(|_| Error::Usage(format!("--{flag} expects {N} comma-separated values, got {}", self.0.len())))
    }
}

#[derive(Debug, Parser)]
#[command(name = "regret-rules", version, about = "Minimax-regret treatment rules under partial identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the lower and upper bound of the treatment effect.
    Bounds(PointArgs),
    /// Print the optimal treatment probability, and its directional
    /// derivative when a direction is given.
    Kappa(KappaArgs),
    /// Solve for the adjustment term at an estimate and print both rules.
    Adjust(AdjustArgs),
    /// Evaluate Gaussian closed forms.
    Oracle(OracleArgs),
    /// Run the replication study and write a regret-curve CSV.
    #[command(after_help = config::keys_help())]
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct PointArgs {
    /// Identification model.
    #[arg(long, default_value = "ex2")]
    model: ModelKind,
    /// Parameter vector, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    theta: NumList,
    /// Outcome range `y_lo,y_hi`.
    #[arg(long, allow_hyphen_values = true, default_value = "0,1")]
    range: NumList,
}

impl PointArgs {
    fn resolve(&self) -> Result<(IdModel, Theta)> {
        let [lo, hi] = self.range.exact::<2>("range")?;
        let theta = Theta::new(self.theta.0.clone(), lo, hi)?;
        let model = IdModel::new(self.model);
        model.validate(&theta)?;
        Ok((model, theta))
    }
}

#[derive(Debug, Args)]
struct KappaArgs {
    /// Lower bound (with --tauU, instead of --model/--theta).
    #[arg(long = "tauL", allow_hyphen_values = true, requires = "tau_u", conflicts_with = "theta")]
    tau_l: Option<f64>,
    #[arg(long = "tauU", allow_hyphen_values = true, requires = "tau_l")]
    tau_u: Option<f64>,
    /// Lower-bound derivative gradient, comma separated.
    #[arg(long = "dL", allow_hyphen_values = true, requires = "tau_l")]
    d_l: Option<NumList>,
    /// Upper-bound derivative gradient, comma separated.
    #[arg(long = "dU", allow_hyphen_values = true, requires = "tau_l")]
    d_u: Option<NumList>,
    #[arg(long, default_value = "ex2")]
    model: ModelKind,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<NumList>,
    #[arg(long, allow_hyphen_values = true, default_value = "0,1")]
    range: NumList,
    /// Direction for the derivative.
    #[arg(long, allow_hyphen_values = true)]
    dir: Option<NumList>,
    /// Kink threshold; switches to the estimated derivative.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Debug, Args)]
struct AdjustArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Covariance: k variances (diagonal) or k*k entries, row-major.
    #[arg(long, allow_hyphen_values = true)]
    sigma: NumList,
    /// Sample size.
    #[arg(long)]
    n: usize,
    /// Gaussian draws.
    #[arg(long = "draws", short = 'L', default_value_t = 1000)]
    draws: usize,
    /// Truncation level.
    #[arg(long = "trunc", short = 'M', default_value_t = 1000.0)]
    truncation: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Search box `lo,hi` applied to every axis.
    #[arg(long, allow_hyphen_values = true, default_value = "-2,2")]
    km: NumList,
    /// Support grid points per axis.
    #[arg(long, default_value_t = 15)]
    inner_grid: usize,
    /// Search grid points per axis.
    #[arg(long, default_value_t = 9)]
    outer_grid: usize,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct OracleArgs {
    /// `m,sd`: E[min{X,0}] for X ~ N(m, sd^2).
    #[arg(long, allow_hyphen_values = true)]
    emin: Option<NumList>,
    /// `w,s,sd`: regret criterion F.
    #[arg(long = "F", allow_hyphen_values = true)]
    f: Option<NumList>,
    /// `w,s,sd`: squared-error criterion G.
    #[arg(long = "G", allow_hyphen_values = true)]
    g: Option<NumList>,
    /// `w,sd`: supremum of G over s.
    #[arg(long = "Gsup", allow_hyphen_values = true)]
    g_sup: Option<NumList>,
    /// Standard normal CDF.
    #[arg(long, allow_hyphen_values = true)]
    cdf: Option<f64>,
    /// Standard normal density.
    #[arg(long, allow_hyphen_values = true)]
    pdf: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV; the manifest goes next to it.
    #[arg(long, default_value = "rimr.csv")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report sqrt(n) times the regret.
    #[arg(long)]
    scale_sqrt_n: bool,
    /// Check that this help text lists exactly the accepted config keys.
    #[arg(long)]
    self_test: bool,
}

/// Run with process arguments and standard streams.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Run with explicit output streams; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
                return 2;
            }
            let _ = write!(out, "{text}");
            return 0;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

fn emit(out: &mut dyn Write, line: &str) -> Result<()> {
    writeln!(out, "{line}").map_err(|source| Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Bounds(a) => {
            let (model, theta) = a.resolve()?;
            let b = model.bounds(&theta)?;
            emit(out, &format!("{} {}", g10(b.lo), g10(b.hi)))
        }
        Command::Kappa(a) => kappa_cmd(a, out),
        Command::Adjust(a) => adjust_cmd(a, out),
        Command::Oracle(a) => oracle_cmd(a, out),
        Command::Simulate(a) => simulate_cmd(a, out),
    }
}

fn kappa_cmd(a: KappaArgs, out: &mut dyn Write) -> Result<()> {
    let mode = match a.eps {
        Some(eps) => KappaMode::Estimated { eps },
        None => KappaMode::Exact,
    };
    let (tau_l, tau_u, spec) = match (a.tau_l, a.tau_u, &a.theta) {
        (Some(l), Some(u), _) => {
            let spec = match (&a.d_l, &a.d_u) {
                (Some(dl), Some(du)) => Some(KappaSpec::new(
                    l,
                    u,
                    crate::model::DirectionalDerivative::linear(dl.0.clone()),
                    crate::model::DirectionalDerivative::linear(du.0.clone()),
                    mode,
                )?),
                (None, None) => None,
                _ => return Err(Error::Usage("--dL and --dU must be given together".into())),
            };
            (l, u, spec)
        }
        (None, None, Some(theta)) => {
            let point = PointArgs {
                model: a.model,
                theta: theta.clone(),
                range: a.range.clone(),
            };
            let (model, theta) = point.resolve()?;
            let b = model.bounds(&theta)?;
            let spec = match &a.dir {
                Some(_) => {
                    let d = model.derivative(&theta)?;
                    Some(KappaSpec::new(b.lo, b.hi, d.lower, d.upper, mode)?)
                }
                None => None,
            };
            (b.lo, b.hi, spec)
        }
        _ => {
            return Err(Error::Usage("give either --tauL and --tauU, or --theta".into()))
        }
    };
    emit(out, &g10(kappa(tau_l, tau_u)?.get()))?;
    match (spec, &a.dir) {
        (Some(spec), Some(dir)) => emit(out, &g10(kappa_prime(&spec, &dir.0)?)),
        (Some(_), None) => Err(Error::Usage("--dL/--dU need --dir".into())),
        _ => Ok(()),
    }
}

fn covariance(list: &NumList, k: usize) -> Result<GaussianLaw> {
    let v = &list.0;
    if v.len() == k {
        GaussianLaw::diagonal(v)
    } else if v.len() == k * k {
        GaussianLaw::new(DMatrix::from_row_slice(k, k, v))
    } else {
        Err(Error::Domain(format!("--sigma needs {k} or {} values, got {}", k * k, v.len())))
    }
}

fn adjust_cmd(a: AdjustArgs, out: &mut dyn Write) -> Result<()> {
    let (model, theta) = a.point.resolve()?;
    let law = covariance(&a.sigma, model.dim())?;
    let [km_lo, km_hi] = a.km.exact::<2>("km")?;
    let mut settings = AdjustSettings {
        draws: a.draws,
        truncation: a.truncation,
        km_lo,
        km_hi,
        ..AdjustSettings::default()
    };
    settings.grid.support_points = a.inner_grid;
    settings.grid.search_points = a.outer_grid;
    let problem = settings.build_problem(&model, &theta, &law, a.n, SeededStream::new(a.seed, 0))?;
    let result = problem.solve_adjustment();
    let join = |v: &[f64]| v.iter().map(|x| g10(*x)).collect::<Vec<_>>().join(",");
    emit(out, &format!("w_hat {}", join(&result.w_hat)))?;
    emit(out, &format!("objective {}", g10(result.objective)))?;
    emit(out, &format!("argmax_s {}", join(&result.argmax_s)))?;
    emit(out, &format!("evaluations {}", result.evaluations))?;
    emit(out, &format!("converged {}", result.converged))?;
    emit(out, &format!("plug_in {}", g10(plug_in_str(&theta, &model)?.get())))?;
    emit(out, &format!("lam {}", g10(lam_str(&theta, &result.w_hat, a.n, &model)?.get())))
}

fn oracle_cmd(a: OracleArgs, out: &mut dyn Write) -> Result<()> {
    let value = if let Some(v) = a.emin {
        let [m, sd] = v.exact::<2>("emin")?;
        gauss::expected_min_zero(m, sd)?
    } else if let Some(v) = a.f {
        let [w, s, sd] = v.exact::<3>("F")?;
        gauss::f_obj(w, s, sd)?
    } else if let Some(v) = a.g {
        let [w, s, sd] = v.exact::<3>("G")?;
        gauss::g_obj(w, s, sd)?
    } else if let Some(v) = a.g_sup {
        let [w, sd] = v.exact::<2>("Gsup")?;
        gauss::g_sup_s(w, sd)?
    } else if let Some(x) = a.cdf {
        gauss::std_normal_cdf(x)
    } else if let Some(x) = a.pdf {
        gauss::std_normal_pdf(x)
    } else {
        unreachable!("clap requires one oracle flag")
    };
    emit(out, &g10(value))
}

/// `<stem>.manifest.txt` next to the CSV.
pub fn manifest_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    csv.with_file_name(format!("{stem}.manifest.txt"))
}

fn simulate_cmd(a: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    if a.self_test {
        let mut cmd = <Cli as clap::CommandFactory>::command();
        let help = cmd.find_subcommand_mut("simulate").expect("simulate subcommand").render_long_help().to_string();
        let listed = config::keys_in_help(&help);
        let accepted: Vec<String> = config::KEYS.iter().map(|(k, _)| k.to_string()).collect();
        if listed != accepted {
            return Err(Error::Domain(format!("help lists {listed:?}, parser accepts {accepted:?}")));
        }
        for (key, value) in config::render_config(&crate::sim::SimConfig::default()) {
            parse_config(&format!("{key}={value}"))?;
        }
        return emit(out, &format!("self-test ok: {} keys", accepted.len()));
    }
    let text = match &a.config {
        Some(path) => std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    let mut config = parse_config(&text)?.config;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if a.scale_sqrt_n {
        config.scale_by_sqrt_n = true;
    }
    let start = Instant::now();
    let (plug, lam) = run_experiment_with_threads(&config, a.threads)?;
    write_csv(&plug, &lam, &a.out)?;
    let manifest = RunManifest::new(&config, a.threads, start.elapsed());
    let mpath = manifest_path(&a.out);
    std::fs::write(&mpath, manifest.render()).map_err(|source| Error::Io { path: mpath.clone(), source })?;
    emit(out, &format!("wrote {} ({} rows) and {}", a.out.display(), plug.records.len(), mpath.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("regret-rules").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn kappa_from_bounds() {
        assert_eq!(call(&["kappa", "--tauL", "-1", "--tauU", "1"]), (0, "0.5\n".into(), String::new()));
    }

    #[test]
    fn kappa_errors_exit_one() {
        let (code, _, err) = call(&["kappa", "--tauL", "0", "--tauU", "0"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("error:"));
    }

    #[test]
    fn oracle_emin() {
        assert_eq!(call(&["oracle", "--emin", "0,1"]).1, "-0.3989422804\n");
        assert_eq!(call(&["oracle", "--Gsup", "1,1"]).1, "2\n");
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["oracle"]).0, 2);
    }

    #[test]
    fn manifest_sits_next_to_csv() {
        assert_eq!(manifest_path(Path::new("out/run.csv")), PathBuf::from("out/run.manifest.txt"));
    }

    #[test]
    fn self_test_passes() {
        let (code, out, _) = call(&["simulate", "--self-test"]);
        assert_eq!(code, 0, "{out}");
    }
}
