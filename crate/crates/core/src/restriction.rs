//! Restrictions `Sγ = g(ψ)` between pseudo-variance and mean parameters.
//!
//! Every built-in restriction is a set of scalar links `γ_j = f(ψ_i)` with
//! `f` one of identity, `a(1-a)` or `a + a²`, so the Jacobian and curvature
//! of `g` are available in closed form.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterFamily;
use crate::linalg::Matrix;
use crate::series::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestrictionKind {
    /// `b_h = a_h(1 - a_h)` for every lag.
    BinomialThinning,
    /// `b_h = a_h` for every lag.
    PoissonThinning,
    /// `b_h = a_h + a_h²` for every lag.
    GeometricThinning,
    /// `ω₂ = ω₁`.
    EquidispersedError,
    /// `α₂ = α₁`.
    AlphaEqual,
    /// `β₂ = β₁`.
    BetaEqual,
    /// `(ω₂, α₂, β₂) = (ω₁, α₁, β₁)`.
    FullEqual,
}

impl RestrictionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RestrictionKind::BinomialThinning => "binomial",
            RestrictionKind::PoissonThinning => "poisson",
            RestrictionKind::GeometricThinning => "geometric",
            RestrictionKind::EquidispersedError => "equidispersion",
            RestrictionKind::AlphaEqual => "alpha_equal",
            RestrictionKind::BetaEqual => "beta_equal",
            RestrictionKind::FullEqual => "full_equal",
        }
    }

    fn links(&self, family: FilterFamily) -> Result<Vec<Link>> {
        let mismatch = || {
            Err(Error::FamilyMismatch {
                restriction: self.as_str().to_string(),
                family: family.name(),
            })
        };
        let thinning = |map: LinkMap| match family {
            FilterFamily::InarLinear { lags } => Ok((1..=lags)
                .map(|h| Link {
                    target: h,
                    source: h,
                    map,
                })
                .collect()),
            _ => mismatch(),
        };
        let recursive = |offsets: &[usize]| match family {
            FilterFamily::IngarchLinear | FilterFamily::BetaVar => Ok(offsets
                .iter()
                .map(|&i| Link {
                    target: i,
                    source: i,
                    map: LinkMap::Identity,
                })
                .collect()),
            _ => mismatch(),
        };
        match self {
            RestrictionKind::BinomialThinning => thinning(LinkMap::Binomial),
            RestrictionKind::PoissonThinning => thinning(LinkMap::Identity),
            RestrictionKind::GeometricThinning => thinning(LinkMap::Geometric),
            RestrictionKind::EquidispersedError => Ok(alloc::vec![Link {
                target: 0,
                source: 0,
                map: LinkMap::Identity,
            }]),
            RestrictionKind::AlphaEqual => recursive(&[1]),
            RestrictionKind::BetaEqual => recursive(&[2]),
            RestrictionKind::FullEqual => recursive(&[0, 1, 2]),
        }
    }
}

impl fmt::Display for RestrictionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RestrictionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match norm.as_str() {
            "binomial" | "binomial_thinning" => RestrictionKind::BinomialThinning,
            "poisson" | "poisson_thinning" => RestrictionKind::PoissonThinning,
            "geometric" | "geometric_thinning" => RestrictionKind::GeometricThinning,
            "equidispersion" | "equidispersed_error" | "omega_equal" => RestrictionKind::EquidispersedError,
            "alpha_equal" => RestrictionKind::AlphaEqual,
            "beta_equal" => RestrictionKind::BetaEqual,
            "full_equal" => RestrictionKind::FullEqual,
            _ => return Err(Error::InvalidRestriction(format!("unknown restriction {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LinkMap {
    Identity,
    Binomial,
    Geometric,
}

impl LinkMap {
    fn value(self, a: f64) -> f64 {
        match self {
            LinkMap::Identity => a,
            LinkMap::Binomial => a * (1.0 - a),
            LinkMap::Geometric => a + a * a,
        }
    }

    fn slope(self, a: f64) -> f64 {
        match self {
            LinkMap::Identity => 1.0,
            LinkMap::Binomial => 1.0 - 2.0 * a,
            LinkMap::Geometric => 1.0 + 2.0 * a,
        }
    }

    fn curvature(self) -> f64 {
        match self {
            LinkMap::Identity => 0.0,
            LinkMap::Binomial => -2.0,
            LinkMap::Geometric => 2.0,
        }
    }
}

/// `γ[target] = map(ψ[source])`; indices are within the γ and ψ blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Link {
    target: usize,
    source: usize,
    map: LinkMap,
}

/// A (possibly composite, possibly empty) set of restrictions resolved
/// against a filter family.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionSpec {
    family: FilterFamily,
    kinds: Vec<RestrictionKind>,
    links: Vec<Link>,
    free: Vec<usize>,
}

impl RestrictionSpec {
    pub fn new(family: FilterFamily, kinds: &[RestrictionKind]) -> Result<Self> {
        let mut links: Vec<Link> = Vec::new();
        for kind in kinds {
            for link in kind.links(family)? {
                if links.iter().any(|l| l.target == link.target) {
                    return Err(Error::InvalidRestriction(format!(
                        "restrictions overlap on coordinate {}",
                        family.coordinate_names()[family.p() + link.target]
                    )));
                }
                links.push(link);
            }
        }
        links.sort_by_key(|l| l.target);
        let free = (0..family.k()).filter(|j| !links.iter().any(|l| l.target == *j)).collect();
        Ok(Self {
            family,
            kinds: kinds.to_vec(),
            links,
            free,
        })
    }

    pub fn none(family: FilterFamily) -> Self {
        Self::new(family, &[]).expect("empty restriction is always valid")
    }

    /// Parses `"binomial+equidispersion"` style names.
    pub fn parse(family: FilterFamily, name: &str) -> Result<Self> {
        let kinds = name
            .split('+')
            .filter(|s| !s.trim().is_empty() && s.trim() != "none")
            .map(RestrictionKind::from_str)
            .collect::<Result<Vec<_>>>()?;
        Self::new(family, &kinds)
    }

    pub fn family(&self) -> FilterFamily {
        self.family
    }

    pub fn kinds(&self) -> &[RestrictionKind] {
        &self.kinds
    }

    pub fn name(&self) -> String {
        if self.kinds.is_empty() {
            return "none".to_string();
        }
        self.kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join("+")
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Number of restrictions `r`.
    pub fn r(&self) -> usize {
        self.links.len()
    }

    /// Restricted γ indices (the selection `S`), ascending.
    pub fn restricted_indices(&self) -> Vec<usize> {
        self.links.iter().map(|l| l.target).collect()
    }

    /// Free γ indices (`γ₂`), ascending.
    pub fn free_indices(&self) -> &[usize] {
        &self.free
    }

    /// Reduced dimension `m_R = p + k₂`.
    pub fn reduced_dim(&self) -> usize {
        self.family.p() + self.free.len()
    }

    /// Coordinate names of the reduced vector `(ψ, γ₂)`.
    pub fn reduced_names(&self) -> Vec<String> {
        let names = self.family.coordinate_names();
        let p = self.family.p();
        let mut out: Vec<String> = names[..p].to_vec();
        out.extend(self.free.iter().map(|&j| names[p + j].clone()));
        out
    }

    /// `g(ψ)` in restricted-index order.
    pub fn g(&self, psi: &[f64]) -> Vec<f64> {
        self.links.iter().map(|l| l.map.value(psi[l.source])).collect()
    }

    /// `∂g/∂ψ'`, `r × p`.
    pub fn g_jacobian(&self, psi: &[f64]) -> Matrix {
        let mut jac = Matrix::zeros(self.r(), self.family.p());
        for (row, l) in self.links.iter().enumerate() {
            jac[(row, l.source)] = l.map.slope(psi[l.source]);
        }
        jac
    }

    /// `r(θ) = Sγ - g(ψ)`.
    pub fn residual(&self, theta: &[f64]) -> Vec<f64> {
        let p = self.family.p();
        self.links
            .iter()
            .map(|l| theta[p + l.target] - l.map.value(theta[l.source]))
            .collect()
    }

    /// `R(θ) = ∂r/∂θ'`, `r × m`.
    pub fn residual_jacobian(&self, theta: &[f64]) -> Matrix {
        let p = self.family.p();
        let mut jac = Matrix::zeros(self.r(), self.family.dim());
        for (row, l) in self.links.iter().enumerate() {
            jac[(row, p + l.target)] = 1.0;
            jac[(row, l.source)] -= l.map.slope(theta[l.source]);
        }
        jac
    }

    /// Maps reduced `(ψ, γ₂)` to the full `θ = (ψ, γ)`.
    pub fn expand(&self, reduced: &[f64]) -> Result<Vec<f64>> {
        if reduced.len() != self.reduced_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.reduced_dim(),
                found: reduced.len(),
            });
        }
        let p = self.family.p();
        let mut theta = alloc::vec![0.0; self.family.dim()];
        theta[..p].copy_from_slice(&reduced[..p]);
        for l in &self.links {
            theta[p + l.target] = l.map.value(reduced[l.source]);
        }
        for (i, &j) in self.free.iter().enumerate() {
            theta[p + j] = reduced[p + i];
        }
        Ok(theta)
    }

    /// Extracts `(ψ, γ₂)` from a full `θ`.
    pub fn reduce(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.family.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.family.dim(),
                found: theta.len(),
            });
        }
        let p = self.family.p();
        let mut out = theta[..p].to_vec();
        out.extend(self.free.iter().map(|&j| theta[p + j]));
        Ok(out)
    }

    /// `∂θ/∂(ψ, γ₂)'`, `m × m_R`.
    pub fn jacobian(&self, reduced: &[f64]) -> Matrix {
        let p = self.family.p();
        let mut jac = Matrix::zeros(self.family.dim(), self.reduced_dim());
        for i in 0..p {
            jac[(i, i)] = 1.0;
        }
        for l in &self.links {
            jac[(p + l.target, l.source)] = l.map.slope(reduced[l.source]);
        }
        for (i, &j) in self.free.iter().enumerate() {
            jac[(p + j, p + i)] = 1.0;
        }
        jac
    }

    /// `Σ_i w_i ∂²θ_i/∂φ∂φ'` for weights `w` over full coordinates, where
    /// `φ` is the reduced vector. Only nonlinear links contribute.
    pub fn weighted_curvature(&self, weights: &[f64]) -> Matrix {
        let p = self.family.p();
        let mut out = Matrix::zeros(self.reduced_dim(), self.reduced_dim());
        for l in &self.links {
            let c = l.map.curvature();
            if c != 0.0 {
                out[(l.source, l.source)] += weights[p + l.target] * c;
            }
        }
        out
    }
}

impl fmt::Display for RestrictionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Evaluates a single named restriction map: `g(ψ)` and `∂g/∂ψ'`.
pub fn restriction_map(kind: RestrictionKind, family: FilterFamily, psi: &[f64]) -> Result<(Vec<f64>, Matrix)> {
    if psi.len() != family.p() {
        return Err(Error::DimensionMismatch {
            expected: family.p(),
            found: psi.len(),
        });
    }
    let spec = RestrictionSpec::new(family, &[kind])?;
    Ok((spec.g(psi), spec.g_jacobian(psi)))
}

/// Full parameter vector from reduced coordinates.
pub fn apply_restriction(spec: &RestrictionSpec, reduced: &[f64]) -> Result<ParamVector> {
    let theta = spec.expand(reduced)?;
    spec.family().params(&theta)
}
