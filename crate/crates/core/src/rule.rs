//! The minimax-regret treatment rule and its directional derivative.
//!
//! With identification region `[tau_L, tau_U]` the rule assigning treatment
//! with probability `kappa = tau_U^+ / (tau_U^+ + tau_L^-)` minimizes the worst
//! case welfare regret. `kappa` is only directionally differentiable where
//! either bound crosses zero; [`kappa_prime`] evaluates its derivative, either
//! exactly at a known base point or in the thresholded form used when the
//! base point is estimated.

use crate::error::{Error, Result};
use crate::model::DirectionalDerivative;

/// `max{x, 0}`.
#[inline]
pub fn pos_part(x: f64) -> f64 {
    x.max(0.0)
}

/// `max{-x, 0}`.
#[inline]
pub fn neg_part(x: f64) -> f64 {
    (-x).max(0.0)
}

/// Probability of assigning treatment 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TreatmentProb(f64);

impl TreatmentProb {
    pub fn new(p: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            Err(Error::Domain(format!("treatment probability {p} outside [0, 1]")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Optimal rule for the region `[tau_l, tau_u]`.
pub fn kappa(tau_l: f64, tau_u: f64) -> Result<TreatmentProb> {
    let (up, ln) = (pos_part(tau_u), neg_part(tau_l));
    if up + ln == 0.0 {
        return Err(Error::DegenerateRegion);
    }
    Ok(TreatmentProb((up / (up + ln)).clamp(0.0, 1.0)))
}

/// Minimax regret value `tau_U^+ tau_L^- / (tau_U^+ + tau_L^-)`.
pub fn minimax_value(tau_l: f64, tau_u: f64) -> Result<f64> {
    let (up, ln) = (pos_part(tau_u), neg_part(tau_l));
    if up + ln == 0.0 {
        return Err(Error::DegenerateRegion);
    }
    Ok(up * ln / (up + ln))
}

/// Directional derivative of `x -> max{x, 0}` at `y` in direction `x`.
#[inline]
pub fn m_prime(y: f64, x: f64) -> f64 {
    if y > 0.0 {
        x
    } else if y == 0.0 {
        x.max(0.0)
    } else {
        0.0
    }
}

/// Thresholded estimate of [`m_prime`]: `y` within `eps` of zero counts as a kink.
#[inline]
pub fn m_hat(y: f64, x: f64, eps: f64) -> f64 {
    if y > eps {
        x
    } else if y >= -eps {
        x.max(0.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaMode {
    /// Derivative at a known base point.
    Exact,
    /// Plug-in estimate with kink-detection threshold `eps > 0`.
    Estimated { eps: f64 },
}

/// Everything needed to evaluate the derivative of `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaSpec {
    tau_l: f64,
    tau_u: f64,
    d_l: DirectionalDerivative,
    d_u: DirectionalDerivative,
    mode: KappaMode,
}

impl KappaSpec {
    pub fn new(
        tau_l: f64,
        tau_u: f64,
        d_l: DirectionalDerivative,
        d_u: DirectionalDerivative,
        mode: KappaMode,
    ) -> Result<Self> {
        if tau_l > tau_u {
            return Err(Error::Domain(format!("tau_L = {tau_l} exceeds tau_U = {tau_u}")));
        }
        if d_l.dim() != d_u.dim() {
            return Err(Error::Domain("bound derivatives have differing dimensions".into()));
        }
        match mode {
            KappaMode::Exact if tau_l == tau_u => {
                return Err(Error::Domain("exact mode requires tau_L < tau_U".into()))
            }
            KappaMode::Estimated { eps } if !(eps > 0.0) => {
                return Err(Error::Domain(format!("threshold eps = {eps} must be positive")))
            }
            _ => {}
        }
        if pos_part(tau_u) + neg_part(tau_l) == 0.0 {
            return Err(Error::DegenerateRegion);
        }
        Ok(Self {
            tau_l,
            tau_u,
            d_l,
            d_u,
            mode,
        })
    }

    pub fn tau_l(&self) -> f64 {
        self.tau_l
    }

    pub fn tau_u(&self) -> f64 {
        self.tau_u
    }

    pub fn d_l(&self) -> &DirectionalDerivative {
        &self.d_l
    }

    pub fn d_u(&self) -> &DirectionalDerivative {
        &self.d_u
    }

    pub fn mode(&self) -> KappaMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.d_l.dim()
    }

    /// `tau_L^-`
    pub fn tau_l_neg(&self) -> f64 {
        neg_part(self.tau_l)
    }

    /// `tau_U^+`
    pub fn tau_u_pos(&self) -> f64 {
        pos_part(self.tau_u)
    }

    /// Derivative given the bound-derivative values `dL(b)` and `dU(b)`.
    #[inline]
    pub fn from_values(&self, dl: f64, du: f64) -> f64 {
        let (ln, up) = (self.tau_l_neg(), self.tau_u_pos());
        let denom = (up + ln) * (up + ln);
        let (mu, ml) = match self.mode {
            KappaMode::Exact => (m_prime(self.tau_u, du), m_prime(-self.tau_l, -dl)),
            KappaMode::Estimated { eps } => (m_hat(self.tau_u, du, eps), m_hat(-self.tau_l, -dl, eps)),
        };
        (ln * mu - up * ml) / denom
    }

    /// Whether the derivative vanishes for every direction: neither bound is
    /// (estimated to be) at or beyond the kink that would make it move `kappa`.
    pub fn is_identically_zero(&self) -> bool {
        let zero_at = |y: f64| match self.mode {
            KappaMode::Exact => y < 0.0,
            KappaMode::Estimated { eps } => y < -eps,
        };
        // the dU term carries weight tau_L^-, the dL term weight tau_U^+
        let upper_silent = self.tau_l_neg() == 0.0 || zero_at(self.tau_u);
        let lower_silent = self.tau_u_pos() == 0.0 || zero_at(-self.tau_l);
        upper_silent && lower_silent
    }

    /// Lipschitz constant `(tau_L^- C_U + tau_U^+ C_L) / (tau_U^+ + tau_L^-)^2`.
    pub fn lipschitz(&self) -> f64 {
        let (ln, up) = (self.tau_l_neg(), self.tau_u_pos());
        (ln * self.d_u.lipschitz() + up * self.d_l.lipschitz()) / ((up + ln) * (up + ln))
    }
}

/// Directional derivative of `kappa` in direction `b`.
pub fn kappa_prime(spec: &KappaSpec, b: &[f64]) -> Result<f64> {
    if b.len() != spec.dim() {
        return Err(Error::Domain(format!(
            "direction has {} components, expected {}",
            b.len(),
            spec.dim()
        )));
    }
    Ok(spec.from_values(spec.d_l.eval(b), spec.d_u.eval(b)))
}
