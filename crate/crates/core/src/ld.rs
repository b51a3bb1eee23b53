//! Lagrangian-descriptor evaluation on section ensembles and the four
//! descriptor-based chaos indicators.
//!
//! Each classified point costs exactly five descriptor integrations: the
//! center and its four stencil neighbors. The indicators are absolute and
//! relative first differences (D, R), the centered gradient magnitude (C)
//! and the centered second difference (S); chaotic neighborhoods decorrelate
//! the five values and push all four indicators up by orders of magnitude.

use rayon::prelude::*;

use crate::error::Error;
use crate::integrate::{ld_endpoint, IntegratorConfig};
use crate::model::ModelParams;
use crate::section::{build_stencil, NeighborLift, NeighborStencil, SectionPoint, SectionSpec};

/// Integration direction for the descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// Configuration of the descriptor computation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct LdConfig {
    /// Integration horizon.
    pub tau: f64,
    /// Exponent `p` of the accumulated `sum_i |F_i|^p`.
    pub p_exponent: f64,
    /// Stencil spacing on the section plane.
    pub sigma_i: f64,
    /// Chaotic and regular motion classify identically in either time
    /// direction, so only one component is computed; forward by default.
    pub direction: Direction,
    /// How stencil neighbors are returned to the energy surface.
    pub neighbor_lift: NeighborLift,
    pub integrator: IntegratorConfig,
}

impl Default for LdConfig {
    fn default() -> Self {
        Self {
            tau: 700.0,
            p_exponent: 0.5,
            sigma_i: 1e-4,
            direction: Direction::Forward,
            neighbor_lift: NeighborLift::ReLift,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl LdConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "descriptor horizon must be positive and finite, got {}",
                self.tau
            )));
        }
        if !(self.p_exponent > 0.0 && self.p_exponent <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "descriptor exponent must lie in (0, 1], got {}",
                self.p_exponent
            )));
        }
        if !(self.sigma_i > 0.0 && self.sigma_i.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "stencil spacing must be positive, got {}",
                self.sigma_i
            )));
        }
        self.integrator.validate()
    }
}

/// The four indicator values for one stencil, with the underlying
/// descriptor values kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IndicatorSet {
    pub d: f64,
    pub r: f64,
    pub c: f64,
    pub s: f64,
    pub ld_center: f64,
    /// Order matches the stencil: `theta1+`, `theta1-`, `p1+`, `p1-`.
    pub ld_neighbors: [f64; 4],
}

/// Indicator selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Indicator {
    D,
    R,
    C,
    /// The second-difference indicator; with D, the most reliable of the
    /// four, and the default for classification.
    S,
}

impl Indicator {
    pub fn value(&self, set: &IndicatorSet) -> f64 {
        match self {
            Indicator::D => set.d,
            Indicator::R => set.r,
            Indicator::C => set.c,
            Indicator::S => set.s,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Indicator::D => "d",
            Indicator::R => "r",
            Indicator::C => "c",
            Indicator::S => "s",
        }
    }
}

/// Why a sample could not be classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Unclassifiable {
    /// The integrator aborted on the center or a neighbor.
    IntegrationFailed,
    /// The stencil could not be lifted onto the energy surface.
    StencilOffSurface,
    /// Zero descriptor at the center; D and R are undefined.
    DegenerateCenter,
}

/// Per-point outcome of the batch driver.
pub type PointOutcome = Result<IndicatorSet, Unclassifiable>;

/// Forward (or backward) descriptor value of one lifted section point.
pub fn ld_value(params: &ModelParams, point: &SectionPoint, cfg: &LdConfig) -> Result<f64, Error> {
    cfg.validate()?;
    let backward = cfg.direction == Direction::Backward;
    let (_, value) = ld_endpoint(
        params,
        &point.state(),
        cfg.tau,
        cfg.p_exponent,
        &cfg.integrator,
        backward,
    )?;
    Ok(value)
}

/// The four indicators from raw descriptor values.
///
/// With the section plane two-dimensional (`n = 2`, four neighbors):
///
/// ```text
/// D = ( |L0-L1p| + |L0-L1m| + |L0-L2p| + |L0-L2m| ) / (4 L0)
/// R = | 1 - (L1p + L1m + L2p + L2m) / (4 L0) |
/// C = ( |L1p-L1m| / s + |L2p-L2m| / s ) / 4
/// S = ( |L1p-2L0+L1m| / s^2 + |L2p-2L0+L2m| / s^2 ) / 2
/// ```
///
/// Per-leg sums are formed first so that relabeling the two stencil axes
/// leaves every indicator bit-identical.
pub fn indicators_from_values(
    l0: f64,
    neighbors: [f64; 4],
    sigma_i: f64,
) -> Result<IndicatorSet, Error> {
    if l0 == 0.0 {
        return Err(Error::DegenerateCenter);
    }
    let [l1p, l1m, l2p, l2m] = neighbors;

    let d_leg1 = (l0 - l1p).abs() + (l0 - l1m).abs();
    let d_leg2 = (l0 - l2p).abs() + (l0 - l2m).abs();
    let d = (d_leg1 + d_leg2) / (4.0 * l0);

    let r = (1.0 - ((l1p + l1m) + (l2p + l2m)) / (4.0 * l0)).abs();

    let c = ((l1p - l1m).abs() / sigma_i + (l2p - l2m).abs() / sigma_i) / 4.0;

    let s2 = sigma_i * sigma_i;
    let s = ((l1p - 2.0 * l0 + l1m).abs() / s2 + (l2p - 2.0 * l0 + l2m).abs() / s2) / 2.0;

    Ok(IndicatorSet { d, r, c, s, ld_center: l0, ld_neighbors: neighbors })
}

/// Indicators for one stencil: five descriptor integrations plus the
/// difference formulas.
pub fn indicators(
    params: &ModelParams,
    stencil: &NeighborStencil,
    cfg: &LdConfig,
) -> Result<IndicatorSet, Error> {
    let l0 = ld_value(params, &stencil.center, cfg)?;
    let mut ln = [0.0; 4];
    for (slot, nb) in ln.iter_mut().zip(stencil.offsets.iter()) {
        *slot = ld_value(params, nb, cfg)?;
    }
    indicators_from_values(l0, ln, stencil.sigma_i)
}

/// Batch evaluation over a section ensemble.
///
/// Order-preserving and embarrassingly parallel; failures become
/// [`Unclassifiable`] markers instead of aborting the batch.
pub fn ensemble_indicators(
    params: &ModelParams,
    points: &[SectionPoint],
    spec: &SectionSpec,
    cfg: &LdConfig,
) -> Vec<PointOutcome> {
    points
        .par_iter()
        .map(|point| {
            let stencil = build_stencil(spec, point, cfg.sigma_i, cfg.neighbor_lift)
                .map_err(|_| Unclassifiable::StencilOffSurface)?;
            match indicators(params, &stencil, cfg) {
                Ok(set) => Ok(set),
                Err(Error::DegenerateCenter) => Err(Unclassifiable::DegenerateCenter),
                Err(_) => Err(Unclassifiable::IntegrationFailed),
            }
        })
        .collect()
}
