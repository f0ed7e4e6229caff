//! Continuous negative definite functions used as (quasi-)distances.
//!
//! Three families are supported:
//!
//! * `Stable { alpha }`: `ψ(x) = |x|^α` with the Euclidean norm, `α ∈ (0, 2)`.
//!   `α = 1` is exactly the Euclidean distance.
//! * `Minkowski { p }`: `ψ(x) = (Σ |x_j|^p)^{1/p}`, `p ∈ (1, 2]`.
//! * `BoundedExp { gamma }`: `ψ(x) = (1 − exp(−γ|x|)) / γ`, bounded by `1/γ`.
//!
//! Parameters are validated once when a [`CndfSpec`] is built, so the
//! evaluation routines used inside the O(N²) kernels do no checking.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{input, parameter, Error, Result};

/// A family of continuous negative definite functions, without a dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CndfKind {
    Stable { alpha: f64 },
    Minkowski { p: f64 },
    BoundedExp { gamma: f64 },
}

impl CndfKind {
    pub const EUCLIDEAN: CndfKind = CndfKind::Stable { alpha: 1.0 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            CndfKind::Stable { alpha } if !(alpha > 0.0 && alpha < 2.0) => {
                Err(parameter(format!("stable alpha must lie in (0,2), got {alpha}")))
            }
            CndfKind::Minkowski { p } if !(p > 1.0 && p <= 2.0) => {
                Err(parameter(format!("minkowski p must lie in (1,2], got {p}")))
            }
            CndfKind::BoundedExp { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(parameter(format!("boundedexp gamma must be positive, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    /// Binds the family to a block dimension.
    pub fn with_dimension(self, dimension: usize) -> Result<CndfSpec> {
        CndfSpec::new(self, dimension)
    }
}

impl fmt::Display for CndfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CndfKind::Stable { alpha } if alpha == 1.0 => write!(f, "euclid"),
            CndfKind::Stable { alpha } => write!(f, "stable:alpha={alpha}"),
            CndfKind::Minkowski { p } => write!(f, "minkowski:p={p}"),
            CndfKind::BoundedExp { gamma } => write!(f, "boundedexp:gamma={gamma}"),
        }
    }
}

impl FromStr for CndfKind {
    type Err = Error;

    /// Parses `stable:alpha=<a>`, `minkowski:p=<p>`, `boundedexp:gamma=<g>` or `euclid`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("euclid") {
            return Ok(CndfKind::EUCLIDEAN);
        }
        let (family, arg) = s
            .split_once(':')
            .ok_or_else(|| input(format!("cannot parse distance spec {s:?}")))?;
        let (key, value) = arg
            .split_once('=')
            .ok_or_else(|| input(format!("expected key=value in distance spec {s:?}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| input(format!("non-numeric parameter in distance spec {s:?}")))?;
        let kind = match (family.trim().to_ascii_lowercase().as_str(), key.trim()) {
            ("stable", "alpha") => CndfKind::Stable { alpha: value },
            ("minkowski", "p") => CndfKind::Minkowski { p: value },
            ("boundedexp", "gamma") => CndfKind::BoundedExp { gamma: value },
            _ => return Err(input(format!("unknown distance spec {s:?}"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// A validated distance function for a block of a given dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CndfSpec {
    kind: CndfKind,
    dimension: usize,
}

impl CndfSpec {
    pub fn new(kind: CndfKind, dimension: usize) -> Result<Self> {
        kind.validate()?;
        if dimension == 0 {
            return Err(parameter("block dimension must be at least 1"));
        }
        Ok(CndfSpec { kind, dimension })
    }

    pub fn euclidean(dimension: usize) -> Result<Self> {
        Self::new(CndfKind::EUCLIDEAN, dimension)
    }

    pub fn stable(alpha: f64, dimension: usize) -> Result<Self> {
        Self::new(CndfKind::Stable { alpha }, dimension)
    }

    pub fn minkowski(p: f64, dimension: usize) -> Result<Self> {
        Self::new(CndfKind::Minkowski { p }, dimension)
    }

    pub fn bounded_exp(gamma: f64, dimension: usize) -> Result<Self> {
        Self::new(CndfKind::BoundedExp { gamma }, dimension)
    }

    pub fn kind(&self) -> CndfKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Evaluates `ψ(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(input(format!(
                "vector of length {} passed to a distance of dimension {}",
                x.len(),
                self.dimension
            )));
        }
        Ok(self.eval_diff(x, None))
    }

    /// Evaluates `ψ(x − y)` without allocating. Both slices must have the
    /// spec's dimension; this is the hot path of every distance matrix.
    #[inline]
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension);
        debug_assert_eq!(y.len(), self.dimension);
        self.eval_diff(x, Some(y))
    }

    #[inline]
    fn eval_diff(&self, x: &[f64], y: Option<&[f64]>) -> f64 {
        let diff = |j: usize| match y {
            Some(y) => x[j] - y[j],
            None => x[j],
        };
        match self.kind {
            CndfKind::Minkowski { p } => {
                if self.dimension == 1 {
                    return diff(0).abs();
                }
                let s: f64 = (0..self.dimension).map(|j| diff(j).abs().powf(p)).sum();
                s.powf(1.0 / p)
            }
            CndfKind::Stable { alpha } => {
                let norm = euclidean_norm(self.dimension, diff);
                if alpha == 1.0 {
                    norm
                } else {
                    norm.powf(alpha)
                }
            }
            CndfKind::BoundedExp { gamma } => {
                let norm = euclidean_norm(self.dimension, diff);
                -(-gamma * norm).exp_m1() / gamma
            }
        }
    }
}

#[inline]
fn euclidean_norm(dimension: usize, diff: impl Fn(usize) -> f64) -> f64 {
    if dimension == 1 {
        diff(0).abs()
    } else {
        (0..dimension).map(|j| diff(j) * diff(j)).sum::<f64>().sqrt()
    }
}

/// The normalizing constant `c_{α,d}` of the Lévy measure `c |t|^{-d-α} dt`
/// which represents `|x|^α` as `∫ (1 − cos⟨x,t⟩) ρ(dt)`.
pub fn stable_constant(alpha: f64, d: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(parameter(format!("alpha must lie in (0,2), got {alpha}")));
    }
    if d == 0 {
        return Err(parameter("dimension must be at least 1"));
    }
    let d = d as f64;
    Ok(alpha * 2f64.powf(alpha - 1.0) * gamma((alpha + d) / 2.0)
        / (std::f64::consts::PI.powf(d / 2.0) * gamma(1.0 - alpha / 2.0)))
}

/// Rate `γ` for [`CndfKind::BoundedExp`] such that `ψ(δ)` reaches 99% of `sup ψ`.
pub fn suggest_gamma(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(parameter(format!("delta must be positive, got {delta}")));
    }
    Ok(-(0.01f64).ln() / delta)
}
