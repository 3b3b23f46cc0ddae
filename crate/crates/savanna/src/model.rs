//! Domain types and the primitive maps of the model.
//!
//! Between fires the normalized biomasses follow the competition system
//!
//! ```text
//! w' = r_w · w · (1 − w)
//! g' = r_g · g · (1 − g − w)
//! ```
//!
//! Fires arrive at rate `λ(w, g)` and apply the linear loss map
//! `S(w, g) = ((1 − M_w)·w, (1 − M_g)·g)`. The intensity must vanish on the
//! no-grass axis (`λ(w, 0) = 0`) and be strictly positive for `g > 0`, with
//! a finite declared supremum; [`validate_params`] checks those assumptions
//! on a dense sample grid.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Tolerance for clamping states back into `[0,1]²` after numeric work.
/// Excursions beyond it signal a bug and raise [`ModelError::StateOutOfDomain`].
pub const DOMAIN_TOL: f64 = 1e-12;

/// Side length of the validation sample grid (`101 × 101` points on `[0,1]²`).
const VALIDATION_GRID: usize = 101;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("growth rate {name} must be positive, got {value}")]
    NonPositiveRate { name: &'static str, value: f64 },
    #[error("loss fraction {name} must lie strictly inside (0,1), got {value}")]
    LossFractionOutOfRange { name: &'static str, value: f64 },
    #[error("intensity violates model assumptions: {reason}")]
    IntensityViolatesAssumptions { reason: String },
    #[error("state ({w}, {g}) lies outside [0,1]^2 beyond tolerance {DOMAIN_TOL:e}")]
    StateOutOfDomain { w: f64, g: f64 },
}

/// A point `(w, g)` of the normalized state square `[0,1]²`.
///
/// Construction clamps round-off excursions up to [`DOMAIN_TOL`] and rejects
/// anything larger, so a `State` always carries in-domain coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    w: f64,
    g: f64,
}

impl State {
    pub fn new(w: f64, g: f64) -> Result<Self, ModelError> {
        let clamp = |v: f64| -> Option<f64> {
            if !v.is_finite() {
                None
            } else if (0.0..=1.0).contains(&v) {
                Some(v)
            } else if v > -DOMAIN_TOL && v < 1.0 + DOMAIN_TOL {
                Some(v.clamp(0.0, 1.0))
            } else {
                None
            }
        };
        match (clamp(w), clamp(g)) {
            (Some(w), Some(g)) => Ok(State { w, g }),
            _ => Err(ModelError::StateOutOfDomain { w, g }),
        }
    }

    #[inline]
    pub fn w(&self) -> f64 {
        self.w
    }

    #[inline]
    pub fn g(&self) -> f64 {
        self.g
    }

    /// Euclidean distance to another state.
    pub fn distance(&self, other: &State) -> f64 {
        (self.w - other.w).hypot(self.g - other.g)
    }

    /// Euclidean norm of the state as a vector.
    pub fn norm(&self) -> f64 {
        self.w.hypot(self.g)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.w, self.g)
    }
}

/// Fire intensity specification.
///
/// The built-in family is `λ(w, g) = c·g^p` with `c > 0`, `p ≥ 1`; its exact
/// supremum over `[0,1]²` is `c`. A user-supplied function must declare its
/// own supremum bound and must vanish identically on `{g = 0}`.
#[derive(Clone)]
pub enum IntensitySpec {
    PowerOfGrass { c: f64, p: f64 },
    Custom {
        f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
        sup: f64,
    },
}

impl IntensitySpec {
    /// `λ(w, g) = g`, the default used throughout the examples.
    pub fn grass() -> Self {
        IntensitySpec::PowerOfGrass { c: 1.0, p: 1.0 }
    }

    /// Raw evaluation; clamps the arguments into `[0,1]` so that integrator
    /// trial points a hair outside the square stay well-defined.
    pub(crate) fn eval(&self, w: f64, g: f64) -> f64 {
        let w = w.clamp(0.0, 1.0);
        let g = g.clamp(0.0, 1.0);
        match self {
            IntensitySpec::PowerOfGrass { c, p } => {
                if g == 0.0 {
                    0.0
                } else if *p == 1.0 {
                    c * g
                } else {
                    c * g.powf(*p)
                }
            }
            IntensitySpec::Custom { f, .. } => f(w, g),
        }
    }

    /// Exact supremum for the built-in family, declared bound otherwise.
    fn sup(&self) -> f64 {
        match self {
            IntensitySpec::PowerOfGrass { c, .. } => *c,
            IntensitySpec::Custom { sup, .. } => *sup,
        }
    }
}

impl fmt::Debug for IntensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntensitySpec::PowerOfGrass { c, p } => {
                write!(f, "PowerOfGrass {{ c: {c}, p: {p} }}")
            }
            IntensitySpec::Custom { sup, .. } => write!(f, "Custom {{ sup: {sup} }}"),
        }
    }
}

/// Unvalidated parameter record, as read from a parameter file or built in
/// code. [`validate_params`] turns it into [`ModelParams`].
#[derive(Debug, Clone)]
pub struct RawParams {
    pub r_w: f64,
    pub r_g: f64,
    pub m_w: f64,
    pub m_g: f64,
    pub intensity: IntensitySpec,
    /// Upper bound on `λ` over `[0,1]²`; defaults to the family's exact sup.
    pub lambda_sup: Option<f64>,
    /// Carrying capacities; used only for unnormalized input/output
    /// conversion, never inside the dynamics.
    pub k_w: f64,
    pub k_g: f64,
}

impl Default for RawParams {
    /// Moderate tree growth, faster grass recovery, strong tree loss and
    /// mild grass loss per fire, `λ(w,g) = g`.
    fn default() -> Self {
        RawParams {
            r_w: 0.25,
            r_g: 0.5,
            m_w: 0.4,
            m_g: 0.1,
            intensity: IntensitySpec::grass(),
            lambda_sup: None,
            k_w: 1.0,
            k_g: 1.0,
        }
    }
}

/// Validated model parameters. Construct through [`validate_params`].
#[derive(Debug, Clone)]
pub struct ModelParams {
    r_w: f64,
    r_g: f64,
    m_w: f64,
    m_g: f64,
    intensity: IntensitySpec,
    lambda_sup: f64,
    k_w: f64,
    k_g: f64,
}

/// Checks positivity of the growth rates, the range of the loss fractions,
/// and the intensity assumptions (`λ(w,0) = 0`, `λ > 0` for `g > 0`,
/// `λ ≤ lambda_sup`) on a `101 × 101` sample grid.
pub fn validate_params(raw: RawParams) -> Result<ModelParams, ModelError> {
    for (name, value) in [("r_w", raw.r_w), ("r_g", raw.r_g)] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(ModelError::NonPositiveRate { name, value });
        }
    }
    for (name, value) in [("M_w", raw.m_w), ("M_g", raw.m_g)] {
        if !(value > 0.0 && value < 1.0) {
            return Err(ModelError::LossFractionOutOfRange { name, value });
        }
    }
    let lambda_sup = raw.lambda_sup.unwrap_or_else(|| raw.intensity.sup());
    if !lambda_sup.is_finite() || lambda_sup <= 0.0 {
        return Err(ModelError::IntensityViolatesAssumptions {
            reason: format!("lambda_sup must be finite and positive, got {lambda_sup}"),
        });
    }

    let n = VALIDATION_GRID;
    for i in 0..n {
        for j in 0..n {
            let w = i as f64 / (n - 1) as f64;
            let g = j as f64 / (n - 1) as f64;
            let lam = raw.intensity.eval(w, g);
            if !lam.is_finite() || lam < 0.0 {
                return Err(ModelError::IntensityViolatesAssumptions {
                    reason: format!("lambda({w}, {g}) = {lam} is not finite and nonnegative"),
                });
            }
            if g == 0.0 && lam != 0.0 {
                return Err(ModelError::IntensityViolatesAssumptions {
                    reason: format!("lambda({w}, 0) = {lam}, but fires require grass"),
                });
            }
            if g > 0.0 && lam <= 0.0 {
                return Err(ModelError::IntensityViolatesAssumptions {
                    reason: format!("lambda({w}, {g}) = {lam} must be positive for g > 0"),
                });
            }
            if lam > lambda_sup {
                return Err(ModelError::IntensityViolatesAssumptions {
                    reason: format!(
                        "lambda({w}, {g}) = {lam} exceeds declared bound {lambda_sup}"
                    ),
                });
            }
        }
    }

    Ok(ModelParams {
        r_w: raw.r_w,
        r_g: raw.r_g,
        m_w: raw.m_w,
        m_g: raw.m_g,
        intensity: raw.intensity,
        lambda_sup,
        k_w: raw.k_w,
        k_g: raw.k_g,
    })
}

impl ModelParams {
    #[inline]
    pub fn r_w(&self) -> f64 {
        self.r_w
    }

    #[inline]
    pub fn r_g(&self) -> f64 {
        self.r_g
    }

    #[inline]
    pub fn m_w(&self) -> f64 {
        self.m_w
    }

    #[inline]
    pub fn m_g(&self) -> f64 {
        self.m_g
    }

    #[inline]
    pub fn lambda_sup(&self) -> f64 {
        self.lambda_sup
    }

    pub fn k_w(&self) -> f64 {
        self.k_w
    }

    pub fn k_g(&self) -> f64 {
        self.k_g
    }

    pub fn intensity_spec(&self) -> &IntensitySpec {
        &self.intensity
    }

    /// Drift field `b(x) = (r_w·w·(1−w), r_g·g·(1−g−w))`.
    ///
    /// Total on the domain; vanishes exactly at `(0,0)`, `(1,0)` and `(0,1)`.
    #[inline]
    pub fn drift(&self, x: State) -> (f64, f64) {
        self.drift_raw(x.w, x.g)
    }

    #[inline]
    pub(crate) fn drift_raw(&self, w: f64, g: f64) -> (f64, f64) {
        (self.r_w * w * (1.0 - w), self.r_g * g * (1.0 - g - w))
    }

    /// Fire intensity `λ(x)`; zero whenever `g = 0`.
    #[inline]
    pub fn intensity(&self, x: State) -> f64 {
        self.intensity.eval(x.w, x.g)
    }

    #[inline]
    pub(crate) fn intensity_raw(&self, w: f64, g: f64) -> f64 {
        self.intensity.eval(w, g)
    }

    /// Fire loss map `S(x) = ((1−M_w)·w, (1−M_g)·g)`.
    ///
    /// A contraction toward the origin, so the result is again in `[0,1]²`.
    #[inline]
    pub fn jump(&self, x: State) -> State {
        State {
            w: (1.0 - self.m_w) * x.w,
            g: (1.0 - self.m_g) * x.g,
        }
    }

    /// Inverse loss map `S⁻¹`; `None` when the preimage falls outside
    /// `[0,1]²` (the fire gain term is zero there since no density lives
    /// outside the square).
    pub fn jump_inverse(&self, x: State) -> Option<State> {
        let w = x.w / (1.0 - self.m_w);
        let g = x.g / (1.0 - self.m_g);
        if w > 1.0 || g > 1.0 {
            None
        } else {
            Some(State { w, g })
        }
    }
}
