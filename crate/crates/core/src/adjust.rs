//! Data-dependent adjustment of the plug-in rule.
//!
//! The adjustment `w` minimizes, over a compact search box, the worst case
//! over a support sieve of
//!
//! ```text
//! max{ tau_L^- * A(w, s), -tau_U^+ * A(w, s) },
//! A(w, s) = (1/L) sum_l clamp_M( k'(G_l + w + s) - k'(s) )
//! ```
//!
//! where `k'` is the estimated directional derivative of the optimal rule and
//! `G_l` are draws approximating the limit law of the estimator. The inner
//! supremum is a grid search with one local refinement pass; the outer
//! minimization is a coarse grid followed by a bounded Nelder-Mead descent.
//! Every `(w, s)` pair is scored on the same draws.

use crate::error::{Error, Result};
use crate::gauss::{mvn_sample, GaussianLaw, SeededStream};
use crate::model::{Combine, IdModel, Theta};
use crate::rule::{kappa, KappaMode, KappaSpec, TreatmentProb};

/// Margin that keeps adjusted probabilities away from 0 and 1.
pub const PROB_MARGIN: f64 = 1e-9;

/// `max{-m, min{m, x}}`.
#[inline]
pub fn truncate(x: f64, m: f64) -> f64 {
    x.clamp(-m, m)
}

/// Axis-aligned box `prod_i [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl SearchBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Domain("box bounds must be nonempty and of equal length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Domain("box requires finite lo <= hi on every axis".into()));
        }
        Ok(Self { lo, hi })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a)
    }

    pub fn max_width(&self) -> f64 {
        self.widths().fold(0.0, f64::max)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Coordinates of grid node `i` of `points` along `axis`.
    fn node(&self, axis: usize, i: usize, points: usize) -> f64 {
        let (lo, hi) = (self.lo[axis], self.hi[axis]);
        if points <= 1 || lo == hi {
            return 0.5 * (lo + hi);
        }
        let t = i as f64 / (points - 1) as f64;
        lo * (1.0 - t) + hi * t
    }

    fn points_on(&self, axis: usize, points: usize) -> usize {
        if self.lo[axis] == self.hi[axis] {
            1
        } else {
            points.max(1)
        }
    }

    /// Grid spacing along `axis` (zero on degenerate axes).
    pub fn step(&self, axis: usize, points: usize) -> f64 {
        let n = self.points_on(axis, points);
        if n <= 1 {
            0.0
        } else {
            (self.hi[axis] - self.lo[axis]) / (n - 1) as f64
        }
    }

    /// Visit every node of the tensor grid in lexicographic order.
    fn for_each_node(&self, points: usize, mut f: impl FnMut(&[f64])) {
        let k = self.dim();
        let counts: Vec<usize> = (0..k).map(|a| self.points_on(a, points)).collect();
        let mut idx = vec![0usize; k];
        let mut x: Vec<f64> = (0..k).map(|a| self.node(a, 0, counts[a])).collect();
        loop {
            f(&x);
            let mut axis = k;
            while axis > 0 {
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < counts[axis] {
                    x[axis] = self.node(axis, idx[axis], counts[axis]);
                    break;
                }
                idx[axis] = 0;
                x[axis] = self.node(axis, 0, counts[axis]);
                if axis == 0 {
                    return;
                }
            }
            if k == 0 {
                return;
            }
        }
    }
}

/// Grid resolutions and stopping rules for the nested search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    /// Points per axis of the inner (support) grid.
    pub support_points: usize,
    /// Points per axis of the outer (search) grid.
    pub search_points: usize,
    /// Simplex-size tolerance as a fraction of the widest search-box side.
    pub tol_w: f64,
    /// Budget of outer evaluations (each one an inner supremum).
    pub max_evals: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            support_points: 15,
            search_points: 9,
            tol_w: 1e-3,
            max_evals: 2000,
        }
    }
}

/// A fully specified adjustment problem.
#[derive(Debug, Clone)]
pub struct AdjustProblem {
    spec: KappaSpec,
    draws: Vec<Vec<f64>>,
    support: SearchBox,
    search: SearchBox,
    truncation: f64,
    grid: GridConfig,
    // draw projections onto the forms of dL (first) and dU (second), row-major
    proj: Vec<f64>,
    n_lower: usize,
    n_upper: usize,
}

/// Value of the Monte Carlo criterion and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McValue {
    pub value: f64,
    pub se: f64,
}

/// Result of the inner supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct SupResult {
    pub value: f64,
    pub argmax_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjustResult {
    pub w_hat: Vec<f64>,
    pub objective: f64,
    pub argmax_s: Vec<f64>,
    /// Number of inner suprema evaluated.
    pub evaluations: usize,
    /// False when the evaluation budget ran out before the simplex collapsed.
    pub converged: bool,
}

impl AdjustProblem {
    pub fn new(
        spec: KappaSpec,
        draws: Vec<Vec<f64>>,
        support: SearchBox,
        search: SearchBox,
        truncation: f64,
        grid: GridConfig,
    ) -> Result<Self> {
        let k = spec.dim();
        if draws.is_empty() {
            return Err(Error::Domain("adjustment needs at least one draw".into()));
        }
        if let Some(d) = draws.iter().find(|d| d.len() != k) {
            return Err(Error::Domain(format!("draw has {} components, expected {k}", d.len())));
        }
        if support.dim() != k || search.dim() != k {
            return Err(Error::Domain(format!("support and search boxes must have dimension {k}")));
        }
        if !(truncation > 0.0) {
            return Err(Error::Domain(format!("truncation level must be positive, got {truncation}")));
        }
        if grid.support_points == 0 || grid.search_points == 0 {
            return Err(Error::Domain("grid resolutions must be at least one point per axis".into()));
        }
        let n_lower = spec.d_l().forms().len();
        let n_upper = spec.d_u().forms().len();
        let width = n_lower + n_upper;
        let mut proj = vec![0.0; draws.len() * width];
        for (row, d) in proj.chunks_exact_mut(width).zip(&draws) {
            let (pl, pu) = row.split_at_mut(n_lower);
            spec.d_l().project_into(d, pl);
            spec.d_u().project_into(d, pu);
        }
        Ok(Self {
            spec,
            draws,
            support,
            search,
            truncation,
            grid,
            proj,
            n_lower,
            n_upper,
        })
    }

    pub fn spec(&self) -> &KappaSpec {
        &self.spec
    }

    pub fn draws(&self) -> &[Vec<f64>] {
        &self.draws
    }

    pub fn support(&self) -> &SearchBox {
        &self.support
    }

    pub fn search(&self) -> &SearchBox {
        &self.search
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn grid(&self) -> &GridConfig {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// `tau_L^-` at the estimate.
    pub fn tau_l_hat_neg(&self) -> f64 {
        self.spec.tau_l_neg()
    }

    /// `tau_U^+` at the estimate.
    pub fn tau_u_hat_pos(&self) -> f64 {
        self.spec.tau_u_pos()
    }

    /// Same problem with a different truncation level.
    pub fn with_truncation(&self, truncation: f64) -> Result<Self> {
        if !(truncation > 0.0) {
            return Err(Error::Domain(format!("truncation level must be positive, got {truncation}")));
        }
        Ok(Self {
            truncation,
            ..self.clone()
        })
    }

    /// Same problem with different boxes.
    pub fn with_boxes(&self, support: SearchBox, search: SearchBox) -> Result<Self> {
        if support.dim() != self.dim() || search.dim() != self.dim() {
            return Err(Error::Domain("box dimension mismatch".into()));
        }
        Ok(Self {
            support,
            search,
            ..self.clone()
        })
    }

    fn check_len(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Domain(format!(
                "{what} has {} components, expected {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Monte Carlo criterion at `(w, s)`.
    pub fn mc_objective(&self, w: &[f64], s: &[f64]) -> Result<f64> {
        Ok(self.mc_objective_with_se(w, s)?.value)
    }

    /// Monte Carlo criterion at `(w, s)` with the standard error of the
    /// active branch.
    pub fn mc_objective_with_se(&self, w: &[f64], s: &[f64]) -> Result<McValue> {
        self.check_len(w, "w")?;
        self.check_len(s, "s")?;
        let mut scratch = Scratch::new(self);
        let (mean, mean_sq) = self.average(w, s, &mut scratch);
        let value = self.combine(mean);
        let l = self.draws.len() as f64;
        let var = if l > 1.0 {
            ((mean_sq - mean * mean) * l / (l - 1.0)).max(0.0)
        } else {
            0.0
        };
        let coef = if self.tau_l_hat_neg() * mean >= -self.tau_u_hat_pos() * mean {
            self.tau_l_hat_neg()
        } else {
            self.tau_u_hat_pos()
        };
        Ok(McValue {
            value,
            se: coef * (var / l).sqrt(),
        })
    }

    #[inline]
    fn combine(&self, mean: f64) -> f64 {
        (self.tau_l_hat_neg() * mean).max(-self.tau_u_hat_pos() * mean)
    }

    /// `(mean, mean of squares)` of the truncated differences.
    fn average(&self, w: &[f64], s: &[f64], scratch: &mut Scratch) -> (f64, f64) {
        let spec = &self.spec;
        for ((u, a), b) in scratch.u.iter_mut().zip(w).zip(s) {
            *u = a + b;
        }
        let (shift_l, shift_u) = scratch.shift.split_at_mut(self.n_lower);
        spec.d_l().project_into(&scratch.u, shift_l);
        spec.d_u().project_into(&scratch.u, shift_u);
        let base = spec.from_values(spec.d_l().eval(s), spec.d_u().eval(s));
        let m = self.truncation;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        if self.n_lower == 1 && self.n_upper == 1 {
            let (sl, su) = (scratch.shift[0], scratch.shift[1]);
            for row in self.proj.chunks_exact(2) {
                let d = truncate(spec.from_values(row[0] + sl, row[1] + su) - base, m);
                sum += d;
                sum_sq += d * d;
            }
        } else {
            let width = self.n_lower + self.n_upper;
            let cl = spec.d_l().combine();
            let cu = spec.d_u().combine();
            for row in self.proj.chunks_exact(width) {
                let (rl, ru) = row.split_at(self.n_lower);
                let dl = reduce_shifted(cl, rl, shift_l);
                let du = reduce_shifted(cu, ru, shift_u);
                let d = truncate(spec.from_values(dl, du) - base, m);
                sum += d;
                sum_sq += d * d;
            }
        }
        let l = self.draws.len() as f64;
        (sum / l, sum_sq / l)
    }

    fn value_at(&self, w: &[f64], s: &[f64], scratch: &mut Scratch) -> f64 {
        let (mean, _) = self.average(w, s, scratch);
        self.combine(mean)
    }

    /// Supremum of the criterion over the support box for fixed `w`.
    pub fn sup_over_support(&self, w: &[f64]) -> Result<SupResult> {
        self.check_len(w, "w")?;
        let mut scratch = Scratch::new(self);
        Ok(self.sup_inner(w, &mut scratch))
    }

    fn sup_inner(&self, w: &[f64], scratch: &mut Scratch) -> SupResult {
        let points = self.grid.support_points;
        let mut best = f64::NEG_INFINITY;
        let mut best_s = vec![0.0; self.dim()];
        let mut eval_scratch = scratch.clone();
        self.support.for_each_node(points, |s| {
            let v = self.value_at(w, s, &mut eval_scratch);
            if v > best {
                best = v;
                best_s.copy_from_slice(s);
            }
        });
        // one refinement pass at half the grid step around the incumbent
        let k = self.dim();
        let half: Vec<f64> = (0..k).map(|a| 0.5 * self.support.step(a, points)).collect();
        if half.iter().any(|&h| h > 0.0) {
            let center = best_s.clone();
            let mut offsets = vec![-1i32; k];
            let mut cand = vec![0.0; k];
            loop {
                if offsets.iter().any(|&o| o != 0) {
                    for a in 0..k {
                        cand[a] = center[a] + offsets[a] as f64 * half[a];
                    }
                    self.support.clamp(&mut cand);
                    let v = self.value_at(w, &cand, &mut eval_scratch);
                    if v > best {
                        best = v;
                        best_s.copy_from_slice(&cand);
                    }
                }
                let mut a = 0;
                while a < k {
                    offsets[a] += 1;
                    if offsets[a] <= 1 {
                        break;
                    }
                    offsets[a] = -1;
                    a += 1;
                }
                if a == k {
                    break;
                }
            }
        }
        *scratch = eval_scratch;
        SupResult {
            value: best,
            argmax_s: best_s,
        }
    }

    /// Minimize the inner supremum over the search box.
    pub fn solve_adjustment(&self) -> AdjustResult {
        let k = self.dim();
        let mut origin = vec![0.0; k];
        self.search.clamp(&mut origin);

        if self.spec.is_identically_zero() {
            // every criterion value is exactly zero; the smallest-norm point wins ties
            return AdjustResult {
                w_hat: origin,
                objective: 0.0,
                argmax_s: vec![0.0; k].into_iter().enumerate().map(|(a, _)| self.support.node(a, 0, 1)).collect(),
                evaluations: 0,
                converged: true,
            };
        }

        let mut scratch = Scratch::new(self);
        let mut evals = 0usize;
        let score = |w: &[f64], scratch: &mut Scratch, evals: &mut usize| -> Candidate {
            *evals += 1;
            let sup = self.sup_inner(w, scratch);
            Candidate {
                w: w.to_vec(),
                value: sup.value,
                argmax_s: sup.argmax_s,
            }
        };

        let mut best = score(&origin, &mut scratch, &mut evals);
        let mut grid_nodes = Vec::new();
        self.search.for_each_node(self.grid.search_points, |w| grid_nodes.push(w.to_vec()));
        for w in &grid_nodes {
            let c = score(w, &mut scratch, &mut evals);
            if c.better_than(&best) {
                best = c;
            }
        }

        // bounded Nelder-Mead over the non-degenerate axes
        let free: Vec<usize> = (0..k).filter(|&a| self.search.step(a, self.grid.search_points) > 0.0).collect();
        let tol = self.grid.tol_w * self.search.max_width();
        let mut converged = true;
        if !free.is_empty() {
            let mut simplex = vec![best.clone()];
            for &a in &free {
                let step = self.search.step(a, self.grid.search_points);
                let mut w = best.w.clone();
                w[a] = if w[a] + step <= self.search.hi[a] { w[a] + step } else { w[a] - step };
                simplex.push(score(&w, &mut scratch, &mut evals));
            }
            converged = false;
            loop {
                simplex.sort_by(|a, b| a.order(b));
                if simplex[0].better_than(&best) {
                    best = simplex[0].clone();
                }
                let size = simplex[1..]
                    .iter()
                    .map(|c| c.w.iter().zip(&simplex[0].w).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
                    .fold(0.0, f64::max);
                if size < tol {
                    converged = true;
                    break;
                }
                if evals >= self.grid.max_evals {
                    log::debug!("adjustment search stopped after {evals} evaluations");
                    break;
                }
                let nv = simplex.len();
                let worst = simplex[nv - 1].clone();
                let centroid: Vec<f64> = (0..k)
                    .map(|a| simplex[..nv - 1].iter().map(|c| c.w[a]).sum::<f64>() / (nv - 1) as f64)
                    .collect();
                let along = |t: f64| -> Vec<f64> {
                    let mut p: Vec<f64> = centroid.iter().zip(&worst.w).map(|(c, x)| c + t * (c - x)).collect();
                    self.search.clamp(&mut p);
                    p
                };
                let reflected = score(&along(1.0), &mut scratch, &mut evals);
                if reflected.value < simplex[0].value {
                    let expanded = score(&along(2.0), &mut scratch, &mut evals);
                    simplex[nv - 1] = if expanded.value < reflected.value { expanded } else { reflected };
                } else if reflected.value < simplex[nv - 2].value {
                    simplex[nv - 1] = reflected;
                } else {
                    let contracted = if reflected.value < worst.value {
                        score(&along(0.5), &mut scratch, &mut evals)
                    } else {
                        score(&along(-0.5), &mut scratch, &mut evals)
                    };
                    if contracted.value < worst.value.min(reflected.value) {
                        simplex[nv - 1] = contracted;
                    } else {
                        let anchor = simplex[0].w.clone();
                        for c in simplex.iter_mut().skip(1) {
                            let mut p: Vec<f64> = anchor.iter().zip(&c.w).map(|(a, x)| a + 0.5 * (x - a)).collect();
                            self.search.clamp(&mut p);
                            *c = score(&p, &mut scratch, &mut evals);
                        }
                    }
                }
            }
            for c in &simplex {
                if c.better_than(&best) {
                    best = c.clone();
                }
            }
        }

        AdjustResult {
            w_hat: best.w,
            objective: best.value,
            argmax_s: best.argmax_s,
            evaluations: evals,
            converged,
        }
    }
}

#[inline]
fn reduce_shifted(combine: Combine, row: &[f64], shift: &[f64]) -> f64 {
    let it = row.iter().zip(shift).map(|(a, b)| a + b);
    match combine {
        Combine::Max => it.fold(f64::NEG_INFINITY, f64::max),
        Combine::Min => it.fold(f64::INFINITY, f64::min),
    }
}

#[derive(Debug, Clone)]
struct Scratch {
    u: Vec<f64>,
    shift: Vec<f64>,
}

impl Scratch {
    fn new(p: &AdjustProblem) -> Self {
        Self {
            u: vec![0.0; p.dim()],
            shift: vec![0.0; p.n_lower + p.n_upper],
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    w: Vec<f64>,
    value: f64,
    argmax_s: Vec<f64>,
}

impl Candidate {
    fn norm_sq(&self) -> f64 {
        self.w.iter().map(|x| x * x).sum()
    }

    /// Lower value wins; exact ties go to the smaller adjustment.
    fn better_than(&self, other: &Candidate) -> bool {
        self.value < other.value || (self.value == other.value && self.norm_sq() < other.norm_sq())
    }

    fn order(&self, other: &Candidate) -> std::cmp::Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| self.norm_sq().total_cmp(&other.norm_sq()))
    }
}

/// How an adjustment problem is built from an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustSettings {
    /// Number of Gaussian draws `L`.
    pub draws: usize,
    /// Truncation level `M`.
    pub truncation: f64,
    /// Kink threshold `eps_n = eps_coef * n^eps_exp`.
    pub eps_coef: f64,
    pub eps_exp: f64,
    /// Support half-width `lambda_n = lambda_coef * n^lambda_exp`.
    pub lambda_coef: f64,
    pub lambda_exp: f64,
    /// Search box `[km_lo, km_hi]^k`.
    pub km_lo: f64,
    pub km_hi: f64,
    pub grid: GridConfig,
}

impl Default for AdjustSettings {
    fn default() -> Self {
        Self {
            draws: 1000,
            truncation: 1000.0,
            eps_coef: 1.0,
            eps_exp: -1.0 / 3.0,
            lambda_coef: 1.0,
            lambda_exp: 1.0 / 3.0,
            km_lo: -2.0,
            km_hi: 2.0,
            grid: GridConfig::default(),
        }
    }
}

impl AdjustSettings {
    pub fn eps(&self, n: usize) -> f64 {
        self.eps_coef * (n as f64).powf(self.eps_exp)
    }

    pub fn lambda(&self, n: usize) -> f64 {
        self.lambda_coef * (n as f64).powf(self.lambda_exp)
    }

    /// Assemble the problem at estimate `theta_hat` with estimated
    /// covariance `sigma_hat`, drawing `L` Gaussian vectors from `stream`.
    pub fn build_problem(
        &self,
        model: &IdModel,
        theta_hat: &Theta,
        sigma_hat: &GaussianLaw,
        n: usize,
        stream: SeededStream,
    ) -> Result<AdjustProblem> {
        if n == 0 {
            return Err(Error::Domain("sample size must be at least 1".into()));
        }
        let k = model.dim();
        if sigma_hat.dim() != k {
            return Err(Error::Domain(format!("covariance has dimension {}, expected {k}", sigma_hat.dim())));
        }
        let bounds = model.bounds(theta_hat)?;
        let deriv = model.derivative(theta_hat)?;
        let spec = KappaSpec::new(
            bounds.lo,
            bounds.hi,
            deriv.lower,
            deriv.upper,
            KappaMode::Estimated { eps: self.eps(n) },
        )?;
        let draws = mvn_sample(sigma_hat, stream, self.draws)?;
        let lambda = self.lambda(n);
        AdjustProblem::new(
            spec,
            draws,
            SearchBox::cube(k, -lambda, lambda)?,
            SearchBox::cube(k, self.km_lo, self.km_hi)?,
            self.truncation,
            self.grid,
        )
    }
}

/// `kappa` at the unadjusted estimate.
pub fn plug_in_str(theta_hat: &Theta, model: &IdModel) -> Result<TreatmentProb> {
    let b = model.bounds(theta_hat)?;
    kappa(b.lo, b.hi)
}

/// `kappa` at `theta_hat + w_hat / sqrt(n)`, clamped into the parameter space.
pub fn lam_str(theta_hat: &Theta, w_hat: &[f64], n: usize, model: &IdModel) -> Result<TreatmentProb> {
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    if w_hat.len() != theta_hat.dim() {
        return Err(Error::Domain("adjustment and parameter dimensions differ".into()));
    }
    let root_n = (n as f64).sqrt();
    let shifted: Vec<f64> = theta_hat.values().iter().zip(w_hat).map(|(t, w)| t + w / root_n).collect();
    let adjusted = model.clamp(&theta_hat.with_values(shifted)?, PROB_MARGIN);
    plug_in_str(&adjusted, model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DirectionalDerivative, ModelKind};

    fn kink_problem(draws: Vec<Vec<f64>>, support: f64, search: (f64, f64)) -> AdjustProblem {
        let spec = KappaSpec::new(
            0.0,
            0.5,
            DirectionalDerivative::linear(vec![1.0]),
            DirectionalDerivative::linear(vec![1.0]),
            KappaMode::Estimated { eps: 0.1 },
        )
        .unwrap();
        AdjustProblem::new(
            spec,
            draws,
            SearchBox::cube(1, -support, support).unwrap(),
            SearchBox::cube(1, search.0, search.1).unwrap(),
            1000.0,
            GridConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn truncate_cases() {
        assert_eq!(truncate(0.3, 1000.0), 0.3);
        assert_eq!(truncate(-5000.0, 1000.0), -1000.0);
        assert_eq!(truncate(5000.0, 1000.0), 1000.0);
    }

    #[test]
    fn zero_draws_zero_objective() {
        let p = kink_problem(vec![vec![0.0]; 5], 2.0, (-2.0, 2.0));
        assert_eq!(p.mc_objective(&[0.0], &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn grid_contains_center_for_odd_counts() {
        let b = SearchBox::cube(2, -6.69, 6.69).unwrap();
        let mut seen = false;
        b.for_each_node(15, |x| seen |= x == [0.0, 0.0]);
        assert!(seen);
        let mut count = 0;
        b.for_each_node(4, |_| count += 1);
        assert_eq!(count, 16);
    }

    #[test]
    fn degenerate_support_reduces_to_single_point() {
        let draws: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 - 25.0) / 10.0]).collect();
        let p = kink_problem(draws, 0.0, (-2.0, 2.0));
        let sup = p.sup_over_support(&[0.4]).unwrap();
        assert_eq!(sup.argmax_s, vec![0.0]);
        assert_eq!(sup.value, p.mc_objective(&[0.4], &[0.0]).unwrap());
    }

    #[test]
    fn degenerate_search_box_forces_zero() {
        let draws: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 - 25.0) / 10.0]).collect();
        let p = kink_problem(draws, 2.0, (0.0, 0.0));
        let r = p.solve_adjustment();
        assert_eq!(r.w_hat, vec![0.0]);
        assert!(r.converged);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let p = kink_problem(vec![vec![0.0]], 1.0, (-1.0, 1.0));
        assert!(p.mc_objective(&[0.0, 1.0], &[0.0]).is_err());
        assert!(p.sup_over_support(&[]).is_err());
    }

    #[test]
    fn identically_zero_spec_short_circuits() {
        let spec = KappaSpec::new(
            0.4,
            0.9,
            DirectionalDerivative::linear(vec![1.0, 0.5]),
            DirectionalDerivative::linear(vec![1.0, -0.5]),
            KappaMode::Estimated { eps: 0.1 },
        )
        .unwrap();
        let p = AdjustProblem::new(
            spec,
            vec![vec![0.3, -0.2]; 4],
            SearchBox::cube(2, -1.0, 1.0).unwrap(),
            SearchBox::cube(2, -2.0, 2.0).unwrap(),
            1000.0,
            GridConfig::default(),
        )
        .unwrap();
        let r = p.solve_adjustment();
        assert_eq!(r.w_hat, vec![0.0, 0.0]);
        assert_eq!(r.objective, 0.0);
        assert_eq!(p.sup_over_support(&[1.5, -1.0]).unwrap().value, 0.0);
    }

    #[test]
    fn plug_in_values() {
        let m = IdModel::new(ModelKind::Ex2);
        let t = Theta::unit(vec![2.0 / 3.0, 1.0 / 3.0, 0.75]).unwrap();
        // tau_L is zero up to rounding, where kappa is 1
        assert!((plug_in_str(&t, &m).unwrap().get() - 1.0).abs() < 1e-12);
        let t = Theta::unit(vec![0.1, 0.9, 0.9]).unwrap();
        assert_eq!(plug_in_str(&t, &m).unwrap().get(), 0.0);
        // mu1 = mu0: tau_L = -tau_U
        let t = Theta::unit(vec![0.4, 0.4, 0.6]).unwrap();
        assert_eq!(plug_in_str(&t, &m).unwrap().get(), 0.5);
    }

    #[test]
    fn lam_with_zero_adjustment_is_plug_in() {
        let m = IdModel::new(ModelKind::Ex2);
        let t = Theta::unit(vec![0.6, 0.35, 0.7]).unwrap();
        let lam = lam_str(&t, &[0.0; 3], 300, &m).unwrap();
        assert_eq!(lam, plug_in_str(&t, &m).unwrap());
        let far = lam_str(&t, &[1.0, -1.0, 1.0], 1_000_000_000_000, &m).unwrap().get();
        assert!((far - plug_in_str(&t, &m).unwrap().get()).abs() < 1e-5);
    }

    #[test]
    fn lam_shift_raises_rule_at_kink() {
        let m = IdModel::new(ModelKind::Ex2);
        let t = Theta::unit(vec![2.0 / 3.0 - 0.01, 1.0 / 3.0, 0.75]).unwrap();
        let w = [1.0, -1.0, 1.0]; // dL(w) = p + p + (mu1 - mu0 + 1) > 0
        let plug = plug_in_str(&t, &m).unwrap().get();
        let lam = lam_str(&t, &w, 300, &m).unwrap().get();
        assert!(lam >= plug);
        assert!(plug < 1.0);
    }

    #[test]
    fn lam_clamps_into_parameter_space() {
        let m = IdModel::new(ModelKind::Ex2);
        let t = Theta::unit(vec![0.99, 0.01, 0.99]).unwrap();
        let lam = lam_str(&t, &[2.0, -2.0, 2.0], 4, &m).unwrap().get();
        assert!((0.0..=1.0).contains(&lam));
    }
}
