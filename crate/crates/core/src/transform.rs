//! Coordinate-wise bijections between admissible parameter ranges and the
//! real line, used to run the optimizer unconstrained.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::filters::FilterFamily;
use crate::math;
use crate::restriction::RestrictionSpec;

/// Upper cap on INAR autoregressive coefficients `a_h`.
pub const INAR_A_MAX: f64 = 0.999;
/// Lower bound on intercepts and dispersion parameters.
pub const POSITIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    /// `x = lower + exp(u)`.
    Positive { lower: f64 },
    /// `x = lower + (upper - lower) · logistic(u)`.
    Interval { lower: f64, upper: f64 },
}

impl Bound {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Bound::Positive { lower } => x > lower && x.is_finite(),
            Bound::Interval { lower, upper } => x > lower && x < upper,
        }
    }

    /// Pulls `x` inside the open range, keeping a relative margin.
    pub fn clamp_interior(&self, x: f64) -> f64 {
        match *self {
            Bound::Positive { lower } => {
                let margin = 1e-3 * lower.abs().max(1e-3);
                if x.is_finite() { x.max(lower + margin) } else { lower + 1.0 }
            }
            Bound::Interval { lower, upper } => {
                let margin = 1e-3 * (upper - lower);
                if x.is_finite() { x.clamp(lower + margin, upper - margin) } else { 0.5 * (lower + upper) }
            }
        }
    }

    pub fn to_internal(&self, x: f64) -> f64 {
        match *self {
            Bound::Positive { lower } => math::ln(x - lower),
            Bound::Interval { lower, upper } => {
                let q = (x - lower) / (upper - lower);
                math::ln(q / (1.0 - q))
            }
        }
    }

    pub fn to_external(&self, u: f64) -> f64 {
        match *self {
            Bound::Positive { lower } => lower + math::exp(u),
            Bound::Interval { lower, upper } => lower + (upper - lower) * math::logistic(u),
        }
    }

    /// `dx/du` at internal coordinate `u`.
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Bound::Positive { .. } => math::exp(u),
            Bound::Interval { lower, upper } => {
                let s = math::logistic(u);
                (upper - lower) * s * (1.0 - s)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    bounds: Vec<Bound>,
}

impl Transform {
    pub fn new(bounds: Vec<Bound>) -> Self {
        Self { bounds }
    }

    /// Bounds for the full `θ` of a family, with `b_h < INAR_A_MAX`.
    pub fn for_family(family: FilterFamily) -> Self {
        Self::with_b_max(family, INAR_A_MAX)
    }

    /// Bounds with the INAR variance slopes `b_h` capped at `b_max`; an
    /// infinite cap leaves them unbounded above.
    pub fn with_b_max(family: FilterFamily, b_max: f64) -> Self {
        let pos = Bound::Positive { lower: POSITIVE_FLOOR };
        let unit = Bound::Interval { lower: 0.0, upper: 1.0 };
        let bounds = match family {
            FilterFamily::InarLinear { lags } => {
                let mut b = alloc::vec![pos];
                b.extend(core::iter::repeat_n(Bound::Interval { lower: 0.0, upper: INAR_A_MAX }, lags));
                b.push(pos);
                let slope = if b_max.is_finite() {
                    Bound::Interval { lower: 0.0, upper: b_max }
                } else {
                    Bound::Positive { lower: 0.0 }
                };
                b.extend(core::iter::repeat_n(slope, lags));
                b
            }
            FilterFamily::IngarchLinear => alloc::vec![pos, unit, unit, pos, unit, unit],
            FilterFamily::BetaVar => alloc::vec![unit, unit, unit, unit, unit, unit, pos],
        };
        Self { bounds }
    }

    /// Bounds for the reduced `(ψ, γ₂)` of a restriction.
    pub fn for_restriction(spec: &RestrictionSpec, b_max: f64) -> Self {
        let full = Self::with_b_max(spec.family(), b_max);
        let p = spec.family().p();
        let mut bounds = full.bounds[..p].to_vec();
        bounds.extend(spec.free_indices().iter().map(|&j| full.bounds[p + j]));
        Self { bounds }
    }

    /// Bounds of the first `n` coordinates.
    pub fn truncate(mut self, n: usize) -> Self {
        self.bounds.truncate(n);
        self
    }

    pub fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn clamp_interior(&self, x: &[f64]) -> Vec<f64> {
        self.bounds.iter().zip(x).map(|(b, &v)| b.clamp_interior(v)).collect()
    }

    pub fn to_internal(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.bounds.len() {
            return Err(Error::DimensionMismatch {
                expected: self.bounds.len(),
                found: x.len(),
            });
        }
        self.bounds
            .iter()
            .zip(x)
            .enumerate()
            .map(|(i, (b, &v))| {
                if b.contains(v) {
                    Ok(b.to_internal(v))
                } else {
                    Err(Error::Inadmissible(format!("coordinate {i} = {v} outside {b:?}")))
                }
            })
            .collect()
    }

    pub fn to_external(&self, u: &[f64]) -> Vec<f64> {
        self.bounds.iter().zip(u).map(|(b, &v)| b.to_external(v)).collect()
    }

    pub fn derivatives(&self, u: &[f64]) -> Vec<f64> {
        self.bounds.iter().zip(u).map(|(b, &v)| b.derivative(v)).collect()
    }
}
