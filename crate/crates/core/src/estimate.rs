//! Data-generating processes and efficient estimators for the two
//! experiment designs.
//!
//! Design 1 observes `(Y, D)` from a randomized experiment on the target
//! population. Design 2 observes `(S Y, S D, S)`: only the participants
//! (`S = 1`) are randomized and their outcomes recorded. Both estimators are
//! sample analogues with diagonal asymptotic covariance.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::SeededStream;
use crate::model::Theta;

/// Redraws allowed per bootstrap replicate before giving up.
pub const MAX_BOOT_RETRIES: usize = 100;

/// One observation of the participation design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ex2Row {
    /// `S * Y`.
    pub sy: f64,
    /// `S * D`, 0 or 1.
    pub sd: u8,
    /// `S`, 0 or 1.
    pub s: u8,
}

impl Ex2Row {
    pub fn participant(y: f64, treated: bool) -> Self {
        Self {
            sy: y,
            sd: treated as u8,
            s: 1,
        }
    }

    pub fn outsider() -> Self {
        Self { sy: 0.0, sd: 0, s: 0 }
    }

    fn check(&self, line: usize) -> Result<()> {
        let ok = self.s <= 1 && self.sd <= 1 && (self.s == 1 || (self.sy == 0.0 && self.sd == 0)) && self.sy.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Parse {
                line,
                msg: format!("inconsistent row (sy={}, sd={}, s={}): sy and sd must be 0 when s = 0", self.sy, self.sd, self.s),
            })
        }
    }
}

/// A sample from the participation design with its outcome range.
#[derive(Debug, Clone, PartialEq)]
pub struct Ex2Sample {
    rows: Vec<Ex2Row>,
    y_lo: f64,
    y_hi: f64,
}

impl Ex2Sample {
    /// Validate rows against the participation structure and `[y_lo, y_hi]`.
    pub fn new(rows: Vec<Ex2Row>, y_lo: f64, y_hi: f64) -> Result<Self> {
        if !(y_lo < y_hi) {
            return Err(Error::InvalidTheta(format!("outcome range [{y_lo}, {y_hi}] is empty")));
        }
        for (i, r) in rows.iter().enumerate() {
            r.check(i + 1)?;
            if r.s == 1 && !(y_lo..=y_hi).contains(&r.sy) {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("outcome {} outside [{y_lo}, {y_hi}]", r.sy),
                });
            }
        }
        Ok(Self { rows, y_lo, y_hi })
    }

    pub fn rows(&self) -> &[Ex2Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.y_lo, self.y_hi)
    }

    /// Read a headered CSV with columns `sy, sd, s`.
    pub fn read_csv<R: Read>(reader: R, y_lo: f64, y_hi: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<Ex2Row>, _>>()?;
        Self::new(rows, y_lo, y_hi)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv_path(path: &Path, y_lo: f64, y_hi: f64) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(f, y_lo, y_hi)
    }
}

/// One observation of the fully randomized design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ex1Row {
    pub y: f64,
    pub treated: bool,
}

/// Observations per estimator cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellCounts {
    pub treated: usize,
    pub control: usize,
    /// Rows with `S = 0` (always zero for the randomized design).
    pub outside: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOut {
    pub theta_hat: Theta,
    /// Diagonal asymptotic covariance of `sqrt(n) (theta_hat - theta)`.
    pub sigma_hat: DMatrix<f64>,
    pub counts: CellCounts,
}

#[inline]
fn bernoulli<R: Rng>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

fn check_prob(x: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidTheta(format!("{what} = {x} is not a probability")))
    }
}

/// Binary-outcome draw from the participation design at
/// `theta = (mu1, mu0, p)` with treated share `pi` among participants.
pub fn ex2_sample(theta: &Theta, pi: f64, n: usize, stream: SeededStream) -> Result<Ex2Sample> {
    let v = theta.values();
    if v.len() != 3 {
        return Err(Error::InvalidTheta(format!("expected 3 components, got {}", v.len())));
    }
    check_prob(v[0], "mu1")?;
    check_prob(v[1], "mu0")?;
    check_prob(v[2], "p")?;
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::Domain(format!("treated share must lie in (0, 1), got {pi}")));
    }
    let mut rng = stream.rng();
    let rows = (0..n)
        .map(|_| {
            if !bernoulli(&mut rng, v[2]) {
                return Ex2Row::outsider();
            }
            let d = bernoulli(&mut rng, pi);
            let mu = if d { v[0] } else { v[1] };
            Ex2Row::participant(bernoulli(&mut rng, mu) as u8 as f64, d)
        })
        .collect();
    Ok(Ex2Sample { rows, y_lo: 0.0, y_hi: 1.0 })
}

/// Binary-outcome draw from the randomized design at `theta = (mu1, mu0, p)`.
pub fn ex1_sample(theta: &Theta, n: usize, stream: SeededStream) -> Result<Vec<Ex1Row>> {
    let v = theta.values();
    if v.len() != 3 {
        return Err(Error::InvalidTheta(format!("expected 3 components, got {}", v.len())));
    }
    for (x, what) in v.iter().zip(["mu1", "mu0", "p"]) {
        check_prob(*x, what)?;
    }
    let mut rng = stream.rng();
    Ok((0..n)
        .map(|_| {
            let treated = bernoulli(&mut rng, v[2]);
            let mu = if treated { v[0] } else { v[1] };
            Ex1Row {
                y: bernoulli(&mut rng, mu) as u8 as f64,
                treated,
            }
        })
        .collect())
}

#[derive(Default)]
struct Moments {
    count: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, y: f64) {
        self.count += 1;
        self.sum += y;
        self.sum_sq += y * y;
    }

    fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Within-cell variance with divisor equal to the cell count.
    fn var(&self) -> f64 {
        let m = self.mean();
        (self.sum_sq / self.count as f64 - m * m).max(0.0)
    }
}

/// Cell means, participation share and their asymptotic covariance.
pub fn ex2_theta_hat(sample: &Ex2Sample) -> Result<EstimateOut> {
    let (mut t, mut c) = (Moments::default(), Moments::default());
    let mut outside = 0usize;
    for r in &sample.rows {
        match (r.s, r.sd) {
            (1, 1) => t.push(r.sy),
            (1, _) => c.push(r.sy),
            _ => outside += 1,
        }
    }
    if t.count == 0 {
        return Err(Error::EmptyCell("treated participants"));
    }
    if c.count == 0 {
        return Err(Error::EmptyCell("control participants"));
    }
    let n = sample.len() as f64;
    let participants = (t.count + c.count) as f64;
    let p = participants / n;
    let pi = t.count as f64 / participants;
    let theta_hat = Theta::new(vec![t.mean(), c.mean(), p], sample.y_lo, sample.y_hi)?;
    let sigma_hat = DMatrix::from_diagonal(&DVector::from_vec(vec![
        t.var() / (pi * p),
        c.var() / ((1.0 - pi) * p),
        p * (1.0 - p),
    ]));
    Ok(EstimateOut {
        theta_hat,
        sigma_hat,
        counts: CellCounts {
            treated: t.count,
            control: c.count,
            outside,
        },
    })
}

/// Arm means, treated share and their asymptotic covariance.
pub fn ex1_theta_hat(rows: &[Ex1Row], y_lo: f64, y_hi: f64) -> Result<EstimateOut> {
    let (mut t, mut c) = (Moments::default(), Moments::default());
    for r in rows {
        if r.treated {
            t.push(r.y)
        } else {
            c.push(r.y)
        }
    }
    if t.count == 0 {
        return Err(Error::EmptyCell("treated"));
    }
    if c.count == 0 {
        return Err(Error::EmptyCell("control"));
    }
    let p = t.count as f64 / rows.len() as f64;
    let theta_hat = Theta::new(vec![t.mean(), c.mean(), p], y_lo, y_hi)?;
    let sigma_hat = DMatrix::from_diagonal(&DVector::from_vec(vec![t.var() / p, c.var() / (1.0 - p), p * (1.0 - p)]));
    Ok(EstimateOut {
        theta_hat,
        sigma_hat,
        counts: CellCounts {
            treated: t.count,
            control: c.count,
            outside: 0,
        },
    })
}

/// Nonparametric bootstrap replicates of `sqrt(n) (theta* - theta_hat)`.
pub fn boot_g(sample: &Ex2Sample, stream: SeededStream, count: usize) -> Result<Vec<Vec<f64>>> {
    let base = ex2_theta_hat(sample)?;
    let n = sample.len();
    let root_n = (n as f64).sqrt();
    let mut rng = stream.rng();
    let mut buf = Ex2Sample {
        rows: Vec::with_capacity(n),
        ..sample.clone()
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut tries = 0;
        let est = loop {
            buf.rows.clear();
            buf.rows.extend((0..n).map(|_| sample.rows[rng.random_range(0..n)]));
            match ex2_theta_hat(&buf) {
                Ok(e) => break e,
                Err(Error::EmptyCell(_)) if tries + 1 < MAX_BOOT_RETRIES => tries += 1,
                Err(Error::EmptyCell(_)) => return Err(Error::BootstrapDegenerate(MAX_BOOT_RETRIES)),
                Err(e) => return Err(e),
            }
        };
        out.push(
            est.theta_hat
                .values()
                .iter()
                .zip(base.theta_hat.values())
                .map(|(a, b)| root_n * (a - b))
                .collect(),
        );
    }
    Ok(out)
}

/// Base point of the local perturbation path in the simulation design.
pub const PATH_BASE: [f64; 3] = [2.0 / 3.0, 1.0 / 3.0, 0.75];

/// `theta_n(h) = base + h (1, 1/2, 1) / sqrt(n)`.
pub fn theta_path(h: f64, n: usize) -> Result<Theta> {
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let step = h / (n as f64).sqrt();
    let values = vec![PATH_BASE[0] + step, PATH_BASE[1] + 0.5 * step, PATH_BASE[2] + step];
    if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::PathOutOfRange { h, n });
    }
    Theta::unit(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theta0() -> Theta {
        Theta::unit(PATH_BASE.to_vec()).unwrap()
    }

    #[test]
    fn sampler_degenerate_cases() {
        let t = Theta::unit(vec![1.0, 1.0, 0.5]).unwrap();
        let s = ex2_sample(&t, 0.5, 500, SeededStream::new(1, 0)).unwrap();
        assert!(s.rows().iter().filter(|r| r.s == 1).all(|r| r.sy == 1.0));
        let t = Theta::unit(vec![0.3, 0.6, 1.0]).unwrap();
        let s = ex2_sample(&t, 0.5, 500, SeededStream::new(1, 0)).unwrap();
        assert!(s.rows().iter().all(|r| r.s == 1));
    }

    #[test]
    fn constant_outcomes_are_exact() {
        let rows = vec![
            Ex2Row::participant(1.0, true),
            Ex2Row::participant(1.0, false),
            Ex2Row::outsider(),
            Ex2Row::participant(1.0, true),
        ];
        let est = ex2_theta_hat(&Ex2Sample::new(rows, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(est.theta_hat.values(), &[1.0, 1.0, 0.75]);
        assert_eq!(est.sigma_hat[(0, 0)], 0.0);
        assert_eq!(est.sigma_hat[(1, 1)], 0.0);
        assert_eq!(est.counts, CellCounts { treated: 2, control: 1, outside: 1 });
    }

    #[test]
    fn empty_cells_error() {
        let rows = vec![Ex2Row::participant(1.0, true), Ex2Row::outsider()];
        let s = Ex2Sample::new(rows, 0.0, 1.0).unwrap();
        assert!(matches!(ex2_theta_hat(&s), Err(Error::EmptyCell(_))));
        let rows = vec![Ex1Row { y: 1.0, treated: true }; 4];
        assert!(matches!(ex1_theta_hat(&rows, 0.0, 1.0), Err(Error::EmptyCell(_))));
    }

    #[test]
    fn randomized_design_alternating() {
        let rows: Vec<Ex1Row> = (0..10).map(|i| Ex1Row { y: 0.25, treated: i % 2 == 0 }).collect();
        let est = ex1_theta_hat(&rows, 0.0, 1.0).unwrap();
        assert_eq!(est.theta_hat.values(), &[0.25, 0.25, 0.5]);
        assert_eq!(est.sigma_hat[(2, 2)], 0.25);
    }

    #[test]
    fn inconsistent_rows_rejected() {
        let bad = Ex2Row { sy: 1.0, sd: 0, s: 0 };
        assert!(Ex2Sample::new(vec![bad], 0.0, 1.0).is_err());
        let bad = Ex2Row { sy: 2.0, sd: 1, s: 1 };
        assert!(Ex2Sample::new(vec![bad], 0.0, 1.0).is_err());
    }

    #[test]
    fn path_values() {
        assert_eq!(theta_path(0.0, 17).unwrap(), theta0());
        let t = theta_path(2.0, 400).unwrap();
        let expect = [2.0 / 3.0 + 0.1, 1.0 / 3.0 + 0.05, 0.75 + 0.1];
        for (a, b) in t.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let t = theta_path(-2.0, 400).unwrap();
        let expect = [2.0 / 3.0 - 0.1, 1.0 / 3.0 - 0.05, 0.75 - 0.1];
        for (a, b) in t.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(theta_path(2.0, 1), Err(Error::PathOutOfRange { .. })));
    }

    #[test]
    fn bootstrap_identical_rows_is_zero_in_means() {
        let rows: Vec<Ex2Row> = (0..40).map(|i| Ex2Row::participant(0.5, i % 2 == 0)).collect();
        let s = Ex2Sample::new(rows, 0.0, 1.0).unwrap();
        let g = boot_g(&s, SeededStream::new(3, 1), 20).unwrap();
        assert!(g.iter().all(|x| x[0] == 0.0 && x[1] == 0.0 && x[2] == 0.0));
        assert_eq!(g, boot_g(&s, SeededStream::new(3, 1), 20).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let s = ex2_sample(&theta0(), 0.5, 30, SeededStream::new(9, 9)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("sy,sd,s\n"));
        let back = Ex2Sample::read_csv(buf.as_slice(), 0.0, 1.0).unwrap();
        assert_eq!(back, s);
    }
}
