//! Observed series and parameter vectors.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Declared sample space of the observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSpace {
    Counts,
    UnitInterval,
    Reals,
}

impl SampleSpace {
    pub fn contains(self, y: f64) -> bool {
        match self {
            SampleSpace::Counts => y.is_finite() && y >= 0.0 && y == math::floor(y),
            SampleSpace::UnitInterval => y > 0.0 && y < 1.0,
            SampleSpace::Reals => y.is_finite(),
        }
    }
}

/// An ordered univariate series `Y_1..Y_T` with at least two observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    space: SampleSpace,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, space: SampleSpace) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooShort {
                len: values.len(),
                min: 2,
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, y)| !space.contains(**y)) {
            return Err(Error::SpaceViolation { index, value, space });
        }
        Ok(Self { values, space })
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        Self::new(counts.iter().map(|&c| c as f64).collect(), SampleSpace::Counts)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn space(&self) -> SampleSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sample variance with the `n - 1` divisor.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (self.values.len() - 1) as f64
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Affine map `(y - lower) / (upper - lower)` onto the open unit interval.
    pub fn rescale_to_unit(&self, lower: f64, upper: f64) -> Result<TimeSeries> {
        if !(lower < upper) {
            return Err(Error::InvalidSpec(alloc::format!(
                "rescale bounds must satisfy lower < upper, got ({lower}, {upper})"
            )));
        }
        let width = upper - lower;
        let mut out = Vec::with_capacity(self.values.len());
        for (index, &value) in self.values.iter().enumerate() {
            if !(value > lower && value < upper) {
                return Err(Error::OutOfBounds {
                    index,
                    value,
                    lower,
                    upper,
                });
            }
            out.push((value - lower) / width);
        }
        TimeSeries::new(out, SampleSpace::UnitInterval)
    }
}

/// Full parameter vector `θ = (ψ', γ')'` with coordinate names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub psi: Vec<f64>,
    pub gamma: Vec<f64>,
    pub names: Vec<String>,
}

impl ParamVector {
    pub fn new(psi: Vec<f64>, gamma: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if psi.is_empty() || gamma.is_empty() {
            return Err(Error::InvalidSpec("ψ and γ must both be non-empty".into()));
        }
        if names.len() != psi.len() + gamma.len() {
            return Err(Error::DimensionMismatch {
                expected: psi.len() + gamma.len(),
                found: names.len(),
            });
        }
        Ok(Self { psi, gamma, names })
    }

    pub fn p(&self) -> usize {
        self.psi.len()
    }

    pub fn k(&self) -> usize {
        self.gamma.len()
    }

    pub fn dim(&self) -> usize {
        self.psi.len() + self.gamma.len()
    }

    /// `θ` as one contiguous vector.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.psi.clone();
        v.extend_from_slice(&self.gamma);
        v
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(if i < self.p() { self.psi[i] } else { self.gamma[i - self.p()] })
    }

    pub fn named(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.psi.iter().chain(self.gamma.iter()).copied())
    }
}
