//! Identification-region models for the average treatment effect.
//!
//! Three bound maps are supported:
//!
//! * [`ModelKind::Ex1`]: worst-case bounds from observational data alone,
//!   `theta = (mu1, mu0, p)` with `p = P(D = 1)`.
//! * [`ModelKind::Ex2`]: an experiment on a non-randomly recruited sample,
//!   `theta = (mu1, mu0, p)` with `p = P(S = 1)`.
//! * [`ModelKind::Ex3`]: bounds under a mean-independent binary instrument,
//!   `theta = (mu11, mu10, mu01, mu00, p1, p0)` where `mu_{d,j}` is the mean
//!   outcome in treatment arm `d` at instrument value `j`.
//!
//! Besides the bounds themselves each model exposes its directional
//! derivative at an interior point as a [`DirectionalDerivative`]: the max (or
//! min) of finitely many linear forms. For the first two models there is a
//! single form (the ordinary gradient); for the instrument model the forms are
//! the gradients of the expressions that attain the max / min.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Absolute tolerance used to decide which expressions tie for the max / min.
pub const TIE_TOL: f64 = 1e-10;

/// Intermediate parameter together with the outcome range `[y_lo, y_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    values: Vec<f64>,
    y_lo: f64,
    y_hi: f64,
}

impl Theta {
    pub fn new(values: Vec<f64>, y_lo: f64, y_hi: f64) -> Result<Self> {
        if !(y_lo.is_finite() && y_hi.is_finite() && y_lo < y_hi) {
            return Err(Error::InvalidTheta(format!(
                "outcome range [{y_lo}, {y_hi}] must satisfy y_lo < y_hi"
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidTheta(format!("non-finite component {v}")));
        }
        Ok(Self { values, y_lo, y_hi })
    }

    /// Parameter on the unit outcome range `[0, 1]`.
    pub fn unit(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 0.0, 1.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn y_lo(&self) -> f64 {
        self.y_lo
    }

    pub fn y_hi(&self) -> f64 {
        self.y_hi
    }

    /// `y_hi - y_lo`.
    pub fn y_width(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Same outcome range, new components.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.y_lo, self.y_hi)
    }
}

/// Lower and upper bound of the identification region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsPair {
    pub lo: f64,
    pub hi: f64,
}

impl BoundsPair {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Ex1,
    Ex2,
    Ex3,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Ex1 => "ex1",
            ModelKind::Ex2 => "ex2",
            ModelKind::Ex3 => "ex3",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ex1" => Ok(ModelKind::Ex1),
            "ex2" => Ok(ModelKind::Ex2),
            "ex3" => Ok(ModelKind::Ex3),
            other => Err(Error::Domain(format!("unknown model `{other}` (expected ex1, ex2, ex3)"))),
        }
    }
}

/// How the linear forms of a [`DirectionalDerivative`] are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    Max,
    Min,
}

/// A positively homogeneous, Lipschitz map `b -> max_j <g_j, b>` (or `min_j`).
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalDerivative {
    forms: Vec<Vec<f64>>,
    combine: Combine,
}

impl DirectionalDerivative {
    /// Ordinary (linear) derivative with the given gradient.
    pub fn linear(gradient: Vec<f64>) -> Self {
        Self {
            forms: vec![gradient],
            combine: Combine::Max,
        }
    }

    pub fn from_forms(forms: Vec<Vec<f64>>, combine: Combine) -> Result<Self> {
        let Some(first) = forms.first() else {
            return Err(Error::Domain("directional derivative needs at least one form".into()));
        };
        if forms.iter().any(|f| f.len() != first.len()) {
            return Err(Error::Domain("linear forms have differing lengths".into()));
        }
        Ok(Self { forms, combine })
    }

    pub fn dim(&self) -> usize {
        self.forms[0].len()
    }

    pub fn forms(&self) -> &[Vec<f64>] {
        &self.forms
    }

    pub fn combine(&self) -> Combine {
        self.combine
    }

    pub fn is_linear(&self) -> bool {
        self.forms.iter().all(|f| f == &self.forms[0])
    }

    /// Evaluate at direction `b`. Panics if `b` has the wrong length.
    pub fn eval(&self, b: &[f64]) -> f64 {
        assert_eq!(b.len(), self.dim(), "direction has wrong length");
        self.reduce(self.forms.iter().map(|g| dot(g, b)))
    }

    /// Evaluate from precomputed projections `<g_j, b>`, one per form.
    pub fn eval_projected(&self, projections: &[f64]) -> f64 {
        self.reduce(projections.iter().copied())
    }

    /// Write `<g_j, b>` for every form into `out`.
    pub fn project_into(&self, b: &[f64], out: &mut [f64]) {
        for (o, g) in out.iter_mut().zip(&self.forms) {
            *o = dot(g, b);
        }
    }

    fn reduce(&self, values: impl Iterator<Item = f64>) -> f64 {
        match self.combine {
            Combine::Max => values.fold(f64::NEG_INFINITY, f64::max),
            Combine::Min => values.fold(f64::INFINITY, f64::min),
        }
    }

    /// Lipschitz constant with respect to the Euclidean norm: the largest
    /// gradient norm among the forms.
    pub fn lipschitz(&self) -> f64 {
        self.forms
            .iter()
            .map(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Directional derivatives of both bounds at one base point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundDerivatives {
    pub lower: DirectionalDerivative,
    pub upper: DirectionalDerivative,
}

/// An identification model: bound maps plus their directional derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdModel {
    kind: ModelKind,
}

impl IdModel {
    pub const fn new(kind: ModelKind) -> Self {
        Self { kind }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::Ex1 | ModelKind::Ex2 => 3,
            ModelKind::Ex3 => 6,
        }
    }

    /// Number of leading components that are conditional means; the rest are
    /// probabilities.
    pub fn mean_components(&self) -> usize {
        match self.kind {
            ModelKind::Ex1 | ModelKind::Ex2 => 2,
            ModelKind::Ex3 => 4,
        }
    }

    /// Check dimension and component ranges.
    pub fn validate(&self, theta: &Theta) -> Result<()> {
        if theta.dim() != self.dim() {
            return Err(Error::ModelMismatch {
                model: self.kind,
                expected: self.dim(),
                got: theta.dim(),
            });
        }
        let m = self.mean_components();
        for (i, &v) in theta.values().iter().enumerate() {
            let (lo, hi) = if i < m { (theta.y_lo, theta.y_hi) } else { (0.0, 1.0) };
            if v < lo || v > hi {
                return Err(Error::InvalidTheta(format!(
                    "component {i} = {v} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Whether every component lies strictly inside its range.
    pub fn is_interior(&self, theta: &Theta) -> bool {
        let m = self.mean_components();
        theta.values().iter().enumerate().all(|(i, &v)| {
            let (lo, hi) = if i < m { (theta.y_lo, theta.y_hi) } else { (0.0, 1.0) };
            v > lo && v < hi
        })
    }

    /// Clamp components into the parameter space, keeping probabilities at
    /// least `prob_margin` away from 0 and 1.
    pub fn clamp(&self, theta: &Theta, prob_margin: f64) -> Theta {
        let m = self.mean_components();
        let values = theta
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if i < m {
                    v.clamp(theta.y_lo, theta.y_hi)
                } else {
                    v.clamp(prob_margin, 1.0 - prob_margin)
                }
            })
            .collect();
        Theta { values, ..theta.clone() }
    }

    pub fn bounds(&self, theta: &Theta) -> Result<BoundsPair> {
        match self.kind {
            ModelKind::Ex1 => ex1_bounds(theta),
            ModelKind::Ex2 => ex2_bounds(theta),
            ModelKind::Ex3 => ex3_bounds(theta),
        }
    }

    /// Directional derivatives of `tau_L` and `tau_U` at an interior point.
    pub fn derivative(&self, theta0: &Theta) -> Result<BoundDerivatives> {
        self.validate(theta0)?;
        if !self.is_interior(theta0) {
            return Err(Error::BoundaryPoint(format!("theta = {:?}", theta0.values())));
        }
        let v = theta0.values();
        let w = theta0.y_width();
        match self.kind {
            ModelKind::Ex1 => {
                let (mu1, mu0, p) = (v[0], v[1], v[2]);
                let (yl, yu) = (theta0.y_lo, theta0.y_hi);
                Ok(BoundDerivatives {
                    lower: DirectionalDerivative::linear(vec![p, -(1.0 - p), (mu1 - yu) - (yl - mu0)]),
                    upper: DirectionalDerivative::linear(vec![p, -(1.0 - p), (mu1 - yl) - (yu - mu0)]),
                })
            }
            ModelKind::Ex2 => {
                let (mu1, mu0, p) = (v[0], v[1], v[2]);
                Ok(BoundDerivatives {
                    lower: DirectionalDerivative::linear(vec![p, -p, (mu1 - mu0) + w]),
                    upper: DirectionalDerivative::linear(vec![p, -p, (mu1 - mu0) - w]),
                })
            }
            ModelKind::Ex3 => {
                let (psi_l, psi_u) = ex3_psi(theta0)?;
                let (grad_l, grad_u) = ex3_psi_gradients(theta0);
                let max_l = psi_l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min_u = psi_u.iter().copied().fold(f64::INFINITY, f64::min);
                let active_l = (0..4)
                    .filter(|&j| psi_l[j] >= max_l - TIE_TOL)
                    .map(|j| grad_l[j].to_vec())
                    .collect();
                let active_u = (0..4)
                    .filter(|&j| psi_u[j] <= min_u + TIE_TOL)
                    .map(|j| grad_u[j].to_vec())
                    .collect();
                Ok(BoundDerivatives {
                    lower: DirectionalDerivative::from_forms(active_l, Combine::Max)?,
                    upper: DirectionalDerivative::from_forms(active_u, Combine::Min)?,
                })
            }
        }
    }

    /// `(tau_L'(b), tau_U'(b))` at `theta0`.
    pub fn dtau(&self, theta0: &Theta, b: &[f64]) -> Result<(f64, f64)> {
        if b.len() != self.dim() {
            return Err(Error::ModelMismatch {
                model: self.kind,
                expected: self.dim(),
                got: b.len(),
            });
        }
        let d = self.derivative(theta0)?;
        Ok((d.lower.eval(b), d.upper.eval(b)))
    }

    /// Global Lipschitz bound for both derivative maps over the parameter
    /// space: the sum of the per-entry gradient bounds of the worst expression.
    pub fn lipschitz(&self, y_width: f64) -> f64 {
        match self.kind {
            ModelKind::Ex1 => 2.0 + y_width,
            ModelKind::Ex2 | ModelKind::Ex3 => 2.0 + 2.0 * y_width,
        }
    }
}

fn expect_dim(theta: &Theta, kind: ModelKind, expected: usize) -> Result<()> {
    if theta.dim() != expected {
        return Err(Error::ModelMismatch {
            model: kind,
            expected,
            got: theta.dim(),
        });
    }
    Ok(())
}

/// Worst-case bounds with no assumptions beyond bounded outcomes.
pub fn ex1_bounds(theta: &Theta) -> Result<BoundsPair> {
    expect_dim(theta, ModelKind::Ex1, 3)?;
    let v = theta.values();
    let (mu1, mu0, p) = (v[0], v[1], v[2]);
    let (yl, yu) = (theta.y_lo, theta.y_hi);
    Ok(BoundsPair {
        lo: (mu1 - yu) * p + (yl - mu0) * (1.0 - p),
        hi: (mu1 - yl) * p + (yu - mu0) * (1.0 - p),
    })
}

/// Bounds for a randomized experiment on a non-random sample; the width is
/// `2 (y_hi - y_lo)(1 - p)`.
pub fn ex2_bounds(theta: &Theta) -> Result<BoundsPair> {
    expect_dim(theta, ModelKind::Ex2, 3)?;
    let v = theta.values();
    let (mu1, mu0, p) = (v[0], v[1], v[2]);
    let w = theta.y_width();
    Ok(BoundsPair {
        lo: (mu1 - mu0) * p - w * (1.0 - p),
        hi: (mu1 - mu0) * p + w * (1.0 - p),
    })
}

/// The four candidate lower bounds and four candidate upper bounds under a
/// mean-independent binary instrument.
pub fn ex3_psi(theta: &Theta) -> Result<([f64; 4], [f64; 4])> {
    expect_dim(theta, ModelKind::Ex3, 6)?;
    let v = theta.values();
    let (m11, m10, m01, m00, p1, p0) = (v[0], v[1], v[2], v[3], v[4], v[5]);
    let (yl, yu) = (theta.y_lo, theta.y_hi);
    // treated-arm pieces at j = 1, 0 and control-arm pieces at j = 1, 0
    let t_lo = [m11 * p1 + yl * (1.0 - p1), m10 * p0 + yl * (1.0 - p0)];
    let t_hi = [m11 * p1 + yu * (1.0 - p1), m10 * p0 + yu * (1.0 - p0)];
    let c_hi = [m01 * (1.0 - p1) + yu * p1, m00 * (1.0 - p0) + yu * p0];
    let c_lo = [m01 * (1.0 - p1) + yl * p1, m00 * (1.0 - p0) + yl * p0];
    let psi_l = [t_lo[0] - c_hi[0], t_lo[0] - c_hi[1], t_lo[1] - c_hi[0], t_lo[1] - c_hi[1]];
    let psi_u = [t_hi[0] - c_lo[0], t_hi[0] - c_lo[1], t_hi[1] - c_lo[0], t_hi[1] - c_lo[1]];
    Ok((psi_l, psi_u))
}

/// Gradients of the eight expressions of [`ex3_psi`] with respect to
/// `(mu11, mu10, mu01, mu00, p1, p0)`.
fn ex3_psi_gradients(theta: &Theta) -> ([[f64; 6]; 4], [[f64; 6]; 4]) {
    let v = theta.values();
    let (m11, m10, m01, m00, p1, p0) = (v[0], v[1], v[2], v[3], v[4], v[5]);
    let (yl, yu) = (theta.y_lo, theta.y_hi);

    // d/dtheta of the treated piece for instrument j (lower / upper variants)
    let treated = |j: usize, y_fill: f64| -> [f64; 6] {
        let mut g = [0.0; 6];
        if j == 0 {
            g[0] = p1;
            g[4] = m11 - y_fill;
        } else {
            g[1] = p0;
            g[5] = m10 - y_fill;
        }
        g
    };
    let control = |j: usize, y_fill: f64| -> [f64; 6] {
        let mut g = [0.0; 6];
        if j == 0 {
            g[2] = 1.0 - p1;
            g[4] = y_fill - m01;
        } else {
            g[3] = 1.0 - p0;
            g[5] = y_fill - m00;
        }
        g
    };
    let combos = [(0, 0), (0, 1), (1, 0), (1, 1)];
    let mut lower = [[0.0; 6]; 4];
    let mut upper = [[0.0; 6]; 4];
    for (row, &(a, c)) in combos.iter().enumerate() {
        let (tl, ch) = (treated(a, yl), control(c, yu));
        let (th, cl) = (treated(a, yu), control(c, yl));
        for i in 0..6 {
            lower[row][i] = tl[i] - ch[i];
            upper[row][i] = th[i] - cl[i];
        }
    }
    (lower, upper)
}

/// Sharp bounds: max of the candidate lower bounds and min of the candidate
/// upper bounds.
pub fn ex3_bounds(theta: &Theta) -> Result<BoundsPair> {
    let (psi_l, psi_u) = ex3_psi(theta)?;
    Ok(BoundsPair {
        lo: psi_l.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        hi: psi_u.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> Theta {
        Theta::unit(v.to_vec()).unwrap()
    }

    #[test]
    fn ex1_hand_values() {
        let b = ex1_bounds(&unit(&[1.0, 0.0, 0.5])).unwrap();
        assert!((b.lo - 0.0).abs() < 1e-15 && (b.hi - 1.0).abs() < 1e-15);
        let b = ex1_bounds(&unit(&[0.5, 0.5, 0.5])).unwrap();
        assert!((b.lo + 0.5).abs() < 1e-15 && (b.hi - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ex1_width_at_extreme_means() {
        for &p in &[0.0, 0.2, 0.7, 1.0] {
            let t = Theta::new(vec![3.0, -1.0, p], -1.0, 3.0).unwrap();
            let b = ex1_bounds(&t).unwrap();
            assert!((b.width() - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ex2_hand_values() {
        let b = ex2_bounds(&unit(&[2.0 / 3.0, 1.0 / 3.0, 0.75])).unwrap();
        assert!(b.lo.abs() < 1e-12);
        assert!((b.hi - 0.5).abs() < 1e-12);
        let b = ex2_bounds(&unit(&[0.5, 0.5, 0.5])).unwrap();
        assert!((b.lo + 0.5).abs() < 1e-15 && (b.hi - 0.5).abs() < 1e-15);
        let b = ex2_bounds(&unit(&[0.9, 0.2, 1.0])).unwrap();
        assert_eq!(b.lo, b.hi);
        assert!((b.lo - 0.7).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let t = unit(&[0.5, 0.5]);
        assert!(matches!(ex1_bounds(&t), Err(Error::ModelMismatch { expected: 3, .. })));
        assert!(matches!(ex3_psi(&t), Err(Error::ModelMismatch { expected: 6, .. })));
        let m = IdModel::new(ModelKind::Ex2);
        assert!(m.dtau(&unit(&[0.5, 0.5, 0.5]), &[1.0]).is_err());
    }

    #[test]
    fn ex3_symmetric_instrument_collapses_to_ex1() {
        let t = unit(&[0.7, 0.7, 0.2, 0.2, 0.4, 0.4]);
        let (psi_l, psi_u) = ex3_psi(&t).unwrap();
        assert!(psi_l.iter().all(|&x| (x - psi_l[0]).abs() < 1e-15));
        assert!(psi_u.iter().all(|&x| (x - psi_u[0]).abs() < 1e-15));
        let b3 = ex3_bounds(&t).unwrap();
        let b1 = ex1_bounds(&unit(&[0.7, 0.2, 0.4])).unwrap();
        assert!((b3.lo - b1.lo).abs() < 1e-15 && (b3.hi - b1.hi).abs() < 1e-15);
    }

    #[test]
    fn ex3_hand_values() {
        // mu11 = mu10 = 1, mu01 = mu00 = 0, p1 = p0 = 1/2:
        // every psi_L entry is 1 * 0.5 + 0 - 0 - 1 * 0.5 = 0
        let t = unit(&[1.0, 1.0, 0.0, 0.0, 0.5, 0.5]);
        let (psi_l, psi_u) = ex3_psi(&t).unwrap();
        assert_eq!(psi_l, [0.0; 4]);
        assert_eq!(psi_u, [1.0; 4]);
        assert_eq!(ex3_bounds(&t).unwrap().lo, 0.0);
    }

    #[test]
    fn boundary_points_reject_derivatives() {
        let m = IdModel::new(ModelKind::Ex2);
        for v in [[0.5, 0.5, 1.0], [1.0, 0.5, 0.5], [0.5, 0.0, 0.5]] {
            let r = m.dtau(&unit(&v), &[1.0, 0.0, 0.0]);
            assert!(matches!(r, Err(Error::BoundaryPoint(_))), "{v:?}");
        }
    }

    #[test]
    fn ex2_derivative_at_kink_point() {
        let m = IdModel::new(ModelKind::Ex2);
        let t = unit(&[2.0 / 3.0, 1.0 / 3.0, 0.75]);
        let (dl, du) = m.dtau(&t, &[1.0, 0.0, 0.0]).unwrap();
        assert!((dl - 0.75).abs() < 1e-15 && (du - 0.75).abs() < 1e-15);
        assert_eq!(m.dtau(&t, &[0.0; 3]).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn ex3_tie_keeps_all_active_forms() {
        let m = IdModel::new(ModelKind::Ex3);
        let t = unit(&[0.7, 0.7, 0.2, 0.2, 0.4, 0.4]);
        let d = m.derivative(&t).unwrap();
        assert_eq!(d.lower.forms().len(), 4);
        assert_eq!(d.upper.forms().len(), 4);
        assert!(!d.lower.is_linear());
    }

    #[test]
    fn clamp_respects_margins() {
        let m = IdModel::new(ModelKind::Ex2);
        let t = unit(&[1.2, -0.1, 1.0]);
        let c = m.clamp(&t, 1e-9);
        assert_eq!(c.values(), &[1.0, 0.0, 1.0 - 1e-9]);
    }

    #[test]
    fn model_kind_parses() {
        assert_eq!("EX3".parse::<ModelKind>().unwrap(), ModelKind::Ex3);
        assert!("ex4".parse::<ModelKind>().is_err());
    }
}
