//! Replication harness comparing the plug-in and adjusted rules along the
//! local perturbation path of the participation design.
//!
//! For every `h` on the grid, `J` samples are drawn at `theta_n(h)`, both
//! rules are computed on each, and the regret of the average rule value is
//! scored against the rule at the true parameter. Every replication owns a
//! random stream derived from `(seed, h index, replication)`, and results are
//! reduced in index order, so output does not depend on the thread count.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::adjust::{lam_str, plug_in_str, AdjustSettings};
use crate::error::{Error, Result};
use crate::estimate::{ex2_sample, ex2_theta_hat, theta_path};
use crate::fmt::g10;
use crate::gauss::{GaussianLaw, SeededStream};
use crate::model::{IdModel, ModelKind, Theta};
use crate::rule::{kappa, neg_part, pos_part};

const PURPOSE_SAMPLE: u64 = 0;
const PURPOSE_DRAWS: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Sample size `n`.
    pub n: usize,
    /// Replications `J` per grid point.
    pub replications: usize,
    /// Ordered local parameters `h`.
    pub h_grid: Vec<f64>,
    pub seed: u64,
    /// Treated share among participants.
    pub pi: f64,
    /// Draw count, truncation, tuning sequences, boxes and grids of the
    /// adjustment.
    pub adjust: AdjustSettings,
    /// Report `sqrt(n)` times the regret.
    pub scale_by_sqrt_n: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 300,
            replications: 5000,
            h_grid: (0..=80).map(|i| -2.0 + 0.05 * i as f64).collect(),
            seed: 1,
            pi: 0.5,
            adjust: AdjustSettings::default(),
            scale_by_sqrt_n: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::Domain("J must be at least 1".into()));
        }
        if self.adjust.draws == 0 {
            return Err(Error::Domain("L must be at least 1".into()));
        }
        if self.h_grid.is_empty() {
            return Err(Error::Domain("h grid is empty".into()));
        }
        if self.h_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("h grid must be strictly increasing".into()));
        }
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return Err(Error::Domain(format!("pi must lie in (0, 1), got {}", self.pi)));
        }
        if !(self.adjust.truncation > 0.0) {
            return Err(Error::Domain("M must be positive".into()));
        }
        if !(self.adjust.km_lo <= self.adjust.km_hi) {
            return Err(Error::Domain("km_lo must not exceed km_hi".into()));
        }
        if !(self.adjust.lambda(self.n) > 0.0) || !(self.adjust.eps(self.n) > 0.0) {
            return Err(Error::Domain("lambda_n and eps_n must be positive".into()));
        }
        for &h in &self.h_grid {
            theta_path(h, self.n)?;
        }
        Ok(())
    }
}

/// Regret of a rule with mean value `delta_bar` at `theta_h`.
pub fn rimr(delta_bar: f64, theta_h: &Theta, model: &IdModel) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta_bar) {
        return Err(Error::Domain(format!("rule value {delta_bar} is not a probability")));
    }
    let b = model.bounds(theta_h)?;
    let gap = delta_bar - kappa(b.lo, b.hi)?.get();
    Ok(rimr_from_parts(neg_part(b.lo), pos_part(b.hi), gap))
}

fn rimr_from_parts(tau_l_neg: f64, tau_u_pos: f64, gap: f64) -> f64 {
    // adding 0.0 turns a -0.0 from the negative branch into 0.0
    (tau_l_neg * gap).max(-tau_u_pos * gap) + 0.0
}

/// One grid point of a regret curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RimrRecord {
    pub h: f64,
    /// Mean rule value over non-degenerate replications.
    pub delta_bar: f64,
    /// Rule at the true parameter.
    pub kappa_oracle: f64,
    pub rimr: f64,
    pub se: f64,
    /// Replications excluded from the mean.
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RimrCurve {
    pub n: usize,
    pub scaled: bool,
    pub records: Vec<RimrRecord>,
}

impl RimrCurve {
    /// Record with the largest regret (first one on ties).
    pub fn peak(&self) -> Option<&RimrRecord> {
        self.records.iter().fold(None, |best: Option<&RimrRecord>, r| match best {
            Some(b) if b.rimr >= r.rimr => Some(b),
            _ => Some(r),
        })
    }

    pub fn at(&self, h: f64) -> Option<&RimrRecord> {
        self.records.iter().find(|r| (r.h - h).abs() < 1e-12)
    }
}

/// Rule values of one replication; `None` marks a degenerate replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replication {
    pub plug_in: Option<f64>,
    pub lam: Option<f64>,
}

/// Simulate one replication at grid index `h_idx`.
pub fn replicate(config: &SimConfig, h_idx: usize, j: usize) -> Result<Replication> {
    let model = IdModel::new(ModelKind::Ex2);
    let truth = theta_path(config.h_grid[h_idx], config.n)?;
    let coords = [h_idx as u64, j as u64];
    let sample = ex2_sample(
        &truth,
        config.pi,
        config.n,
        SeededStream::derive(config.seed, &[coords[0], coords[1], PURPOSE_SAMPLE]),
    )?;
    let est = match ex2_theta_hat(&sample) {
        Ok(e) => e,
        Err(Error::EmptyCell(cell)) => {
            log::debug!("h index {h_idx}, replication {j}: empty {cell} cell");
            return Ok(Replication { plug_in: None, lam: None });
        }
        Err(e) => return Err(e),
    };
    let plug = plug_in_str(&est.theta_hat, &model).ok().map(|p| p.get());
    let lam = adjusted_rule(config, &model, &est.theta_hat, &est.sigma_hat, &coords);
    Ok(Replication { plug_in: plug, lam })
}

fn adjusted_rule(
    config: &SimConfig,
    model: &IdModel,
    theta_hat: &Theta,
    sigma_hat: &nalgebra::DMatrix<f64>,
    coords: &[u64; 2],
) -> Option<f64> {
    let attempt = || -> Result<f64> {
        let law = GaussianLaw::new(sigma_hat.clone())?;
        let stream = SeededStream::derive(config.seed, &[coords[0], coords[1], PURPOSE_DRAWS]);
        let problem = config.adjust.build_problem(model, theta_hat, &law, config.n, stream)?;
        let result = problem.solve_adjustment();
        if !result.converged {
            log::debug!("replication {coords:?}: adjustment budget exhausted");
        }
        Ok(lam_str(theta_hat, &result.w_hat, config.n, model)?.get())
    };
    match attempt() {
        Ok(v) => Some(v),
        Err(e) => {
            log::debug!("replication {coords:?}: adjusted rule unavailable ({e})");
            None
        }
    }
}

/// Sum by recursive halving; the order of additions depends only on the
/// length of the input.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Plug-in and adjusted regret curves, using the current rayon pool.
pub fn run_experiment(config: &SimConfig) -> Result<(RimrCurve, RimrCurve)> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.h_grid.len())
        .flat_map(|i| (0..config.replications).map(move |j| (i, j)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(i, j)| replicate(config, i, j))
        .collect::<Result<Vec<_>>>()?;

    let mut plug = Vec::with_capacity(config.h_grid.len());
    let mut lam = Vec::with_capacity(config.h_grid.len());
    for (i, chunk) in outcomes.chunks(config.replications).enumerate() {
        let h = config.h_grid[i];
        let p = score_rule_values(config, h, &chunk.iter().map(|r| r.plug_in).collect::<Vec<_>>())?;
        let l = score_rule_values(config, h, &chunk.iter().map(|r| r.lam).collect::<Vec<_>>())?;
        if p.degenerate > 0 || l.degenerate > 0 {
            log::info!("h = {h}: {} plug-in and {} adjusted replications degenerate", p.degenerate, l.degenerate);
        }
        plug.push(p);
        lam.push(l);
    }
    let curve = |records| RimrCurve {
        n: config.n,
        scaled: config.scale_by_sqrt_n,
        records,
    };
    Ok((curve(plug), curve(lam)))
}

/// Regret record at `h` for per-replication rule values; `None` entries are
/// degenerate replications and are left out of the mean.
pub fn score_rule_values(config: &SimConfig, h: f64, values: &[Option<f64>]) -> Result<RimrRecord> {
    let model = IdModel::new(ModelKind::Ex2);
    let truth = theta_path(h, config.n)?;
    let b = model.bounds(&truth)?;
    let oracle = kappa(b.lo, b.hi)?.get();
    let (ln, up) = (neg_part(b.lo), pos_part(b.hi));
    let scale = if config.scale_by_sqrt_n { (config.n as f64).sqrt() } else { 1.0 };

    let used: Vec<f64> = values.iter().flatten().copied().collect();
    if used.is_empty() {
        return Err(Error::AllDegenerate { h });
    }
    let m = used.len() as f64;
    // shifting by the first value keeps the mean exact for constant inputs
    let shifted: Vec<f64> = used.iter().map(|v| v - used[0]).collect();
    let mean = used[0] + pairwise_sum(&shifted) / m;
    let sq: Vec<f64> = used.iter().map(|v| (v - mean) * (v - mean)).collect();
    let sd = if used.len() > 1 { (pairwise_sum(&sq) / (m - 1.0)).sqrt() } else { 0.0 };
    let gap = mean - oracle;
    let active = if ln * gap >= -up * gap { ln } else { up };
    Ok(RimrRecord {
        h,
        delta_bar: mean,
        kappa_oracle: oracle,
        rimr: scale * rimr_from_parts(ln, up, gap),
        se: scale * active * sd / m.sqrt(),
        degenerate: values.len() - used.len(),
    })
}

/// Run on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(config: &SimConfig, threads: usize) -> Result<(RimrCurve, RimrCurve)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(config))
}

pub const CSV_HEADER: [&str; 11] = [
    "h",
    "n",
    "delta_bar_plugin",
    "delta_bar_lam",
    "kappa_oracle",
    "rimr_plugin",
    "rimr_lam",
    "se_plugin",
    "se_lam",
    "degenerate_plugin",
    "degenerate_lam",
];

/// Write both curves as one CSV table sorted by `h`.
pub fn write_csv_to<W: Write>(plug: &RimrCurve, lam: &RimrCurve, writer: W) -> Result<()> {
    if plug.records.len() != lam.records.len() || plug.records.iter().zip(&lam.records).any(|(a, b)| a.h != b.h) {
        return Err(Error::Domain("curves are not on the same h grid".into()));
    }
    let mut rows: Vec<(&RimrRecord, &RimrRecord)> = plug.records.iter().zip(&lam.records).collect();
    rows.sort_by(|a, b| a.0.h.total_cmp(&b.0.h));
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    for (p, l) in rows {
        wtr.write_record([
            g10(p.h),
            plug.n.to_string(),
            g10(p.delta_bar),
            g10(l.delta_bar),
            g10(p.kappa_oracle),
            g10(p.rimr),
            g10(l.rimr),
            g10(p.se),
            g10(l.se),
            p.degenerate.to_string(),
            l.degenerate.to_string(),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_csv(plug: &RimrCurve, lam: &RimrCurve, path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut buf = std::io::BufWriter::new(file);
    write_csv_to(plug, lam, &mut buf).map_err(|e| match e {
        Error::Csv(c) if c.is_io_error() => match c.into_kind() {
            csv::ErrorKind::Io(source) => io(source),
            other => Error::Domain(format!("{other:?}")),
        },
        e => e,
    })?;
    buf.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SimConfig {
        let mut c = SimConfig {
            n: 300,
            replications: 2,
            h_grid: vec![-1.0, 0.0, 1.0],
            seed: 5,
            ..SimConfig::default()
        };
        c.adjust.draws = 20;
        c.adjust.grid.support_points = 3;
        c.adjust.grid.search_points = 3;
        c.adjust.grid.max_evals = 40;
        c
    }

    #[test]
    fn rimr_examples() {
        let m = IdModel::new(ModelKind::Ex2);
        let t = theta_path(0.7, 300).unwrap();
        let b = m.bounds(&t).unwrap();
        let k = kappa(b.lo, b.hi).unwrap().get();
        assert_eq!(rimr(k, &t, &m).unwrap(), 0.0);
        assert!((rimr_from_parts(0.0, 0.5, -0.1) - 0.05).abs() < 1e-15);
        assert!((rimr_from_parts(0.3, 0.5, 0.1) - 0.03).abs() < 1e-15);
        assert!(rimr(1.5, &t, &m).is_err());
    }

    #[test]
    fn oracle_rule_has_zero_regret() {
        let c = small_config();
        let m = IdModel::new(ModelKind::Ex2);
        for &h in &c.h_grid {
            let b = m.bounds(&theta_path(h, c.n).unwrap()).unwrap();
            let k = kappa(b.lo, b.hi).unwrap().get();
            let r = score_rule_values(&c, h, &[Some(k); 7]).unwrap();
            assert_eq!(r.rimr, 0.0);
            assert_eq!(r.se, 0.0);
        }
        assert!(matches!(score_rule_values(&c, 0.0, &[None, None]), Err(Error::AllDegenerate { .. })));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn degenerate_search_box_collapses_curves() {
        let mut c = small_config();
        c.adjust.km_lo = 0.0;
        c.adjust.km_hi = 0.0;
        let (p, l) = run_experiment(&c).unwrap();
        for (a, b) in p.records.iter().zip(&l.records) {
            assert_eq!(a.delta_bar, b.delta_bar);
            assert_eq!(a.rimr, b.rimr);
        }
    }

    #[test]
    fn validation_rejects_bad_grids() {
        let mut c = small_config();
        c.h_grid = vec![0.0, 0.0];
        assert!(run_experiment(&c).is_err());
        c.h_grid = vec![];
        assert!(run_experiment(&c).is_err());
        c.h_grid = vec![30.0];
        assert!(matches!(c.validate(), Err(Error::PathOutOfRange { .. })));
    }

    #[test]
    fn csv_shapes() {
        let empty = RimrCurve {
            n: 300,
            scaled: false,
            records: vec![],
        };
        let mut buf = Vec::new();
        write_csv_to(&empty, &empty, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_HEADER.join(",") + "\n");

        let (p, l) = run_experiment(&small_config()).unwrap();
        let mut buf = Vec::new();
        write_csv_to(&p, &l, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
    }
}
