//! The energy-constrained Poincaré section `theta2 = 0`, `H = H0`,
//! `beta p2 - alpha p1 cos(theta1) > 0`: lifting `(theta1, p1)` onto the
//! energy surface, Monte Carlo sampling of the accessible region, and the
//! four-point neighbor stencil used by the chaos indicators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Error;
use crate::model::{equilibrium_energies, hamiltonian, potential, ModelParams, PhaseState};

/// Tangent-point threshold: the lift rejects points whose normal kinetic
/// term `2 beta K - p1^2` is this close to zero (relative to its scale).
const TANGENT_TOL: f64 = 1e-14;

/// Cap on rejection-sampling draws per accepted point; hitting it means
/// the acceptance rate is below ~1e-6 and something is off with the spec.
const MAX_DRAWS_PER_SAMPLE: u64 = 10_000_000;

/// A fixed-energy section with the sampling range for `theta1`.
#[derive(Debug, Clone, Copy)]
pub struct SectionSpec {
    pub params: ModelParams,
    pub energy: f64,
    /// Sampling range for `theta1`; the default `[0, pi]` uses the
    /// symmetry of the dynamics in the sign of the angles.
    pub theta1_range: (f64, f64),
}

impl SectionSpec {
    /// Errors with [`Error::EmptyRegion`] unless `energy` exceeds the
    /// minimum-equilibrium energy `H1` (below it the surface is empty or a
    /// single point).
    pub fn new(params: ModelParams, energy: f64) -> Result<Self, Error> {
        let h1 = equilibrium_energies(&params)[0];
        if !(energy > h1) {
            return Err(Error::EmptyRegion { energy, h1 });
        }
        Ok(Self {
            params,
            energy,
            theta1_range: (0.0, std::f64::consts::PI),
        })
    }

    /// Potential along the section, `V(theta1, 0)`.
    pub fn section_potential(&self, theta1: f64) -> f64 {
        potential(&self.params, theta1, 0.0)
    }

    /// Half-width bound of `p1` over the whole section:
    /// `P = sqrt(2 beta (H0 - H1))`.
    pub fn p1_bound(&self) -> f64 {
        let h1 = equilibrium_energies(&self.params)[0];
        (2.0 * self.params.beta() * (self.energy - h1)).sqrt()
    }
}

/// A point on the section with its lifted momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionPoint {
    pub theta1: f64,
    pub p1: f64,
    /// Momentum `p2` solving `H(theta1, 0, p1, p2) = H0` on the positive
    /// branch of the direction condition.
    pub p2: f64,
    /// `H(lifted state) - H0`; roundoff-level by construction.
    pub energy_residual: f64,
}

impl SectionPoint {
    /// The full phase-space state (`theta2 = 0`).
    pub fn state(&self) -> PhaseState {
        PhaseState::new(self.theta1, 0.0, self.p1, self.p2)
    }
}

/// How stencil neighbors are placed on (or off) the energy surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NeighborLift {
    /// Re-solve `p2` so every neighbor lies exactly on `H = H0`.
    ReLift,
    /// Keep the center's `p2`; neighbors leave the energy surface by
    /// `O(sigma_i)`. Exists to measure the sensitivity of the indicators
    /// to the lifting convention.
    FixedP2,
}

/// The four neighbors `center +/- sigma_i e_i` in `(theta1, p1)`.
#[derive(Debug, Clone, Copy)]
pub struct NeighborStencil {
    pub center: SectionPoint,
    /// Order: `theta1 + s`, `theta1 - s`, `p1 + s`, `p1 - s`.
    pub offsets: [SectionPoint; 4],
    pub sigma_i: f64,
}

/// Solve the energy constraint for `p2` at `(theta1, p1)` on the section.
///
/// The constraint is a quadratic `beta p2^2 - 2 alpha cos(theta1) p1 p2 +
/// p1^2 - 2 (beta - alpha^2 cos^2 theta1) K = 0` with `K = H0 - V(theta1, 0)`;
/// the discriminant is nonnegative iff `p1^2 <= 2 beta K`. The root with
/// `beta p2 - alpha p1 cos(theta1) > 0` is the larger one.
pub fn lift_p2(spec: &SectionSpec, theta1: f64, p1: f64) -> Result<f64, Error> {
    let params = &spec.params;
    let beta = params.beta();
    let ax = params.alpha() * theta1.cos();
    let kin = spec.energy - spec.section_potential(theta1);

    let margin = 2.0 * beta * kin - p1 * p1;
    let scale = (2.0 * beta * kin.abs()).max(1.0);
    // A band around zero counts as tangent; only clearly negative margins
    // are outside (the boundary itself rounds to either sign).
    if margin.abs() <= TANGENT_TOL * scale {
        return Err(Error::TangentPoint { theta1, p1 });
    }
    if margin < 0.0 {
        return Err(Error::OutsideAccessibleRegion { theta1, p1 });
    }

    let det_b = beta - ax * ax;
    Ok((ax * p1 + (det_b * margin).sqrt()) / beta)
}

/// [`lift_p2`] packaged with the energy residual.
pub fn lift_point(spec: &SectionSpec, theta1: f64, p1: f64) -> Result<SectionPoint, Error> {
    let p2 = lift_p2(spec, theta1, p1)?;
    let state = PhaseState::new(theta1, 0.0, p1, p2);
    let energy_residual = hamiltonian(&spec.params, &state) - spec.energy;
    Ok(SectionPoint { theta1, p1, p2, energy_residual })
}

/// Build the four-neighbor stencil around `center`.
///
/// `theta1` offsets keep `p1` fixed and re-solve `p2`; `p1` offsets keep
/// `theta1` fixed. With [`NeighborLift::ReLift`] all five points sit on the
/// energy surface, so the descriptor differences measure dynamics rather
/// than energy variation. Fails with [`Error::StencilOffSurface`] when the
/// center is too close to the accessible-region boundary for a neighbor to
/// lift.
pub fn build_stencil(
    spec: &SectionSpec,
    center: &SectionPoint,
    sigma_i: f64,
    lift: NeighborLift,
) -> Result<NeighborStencil, Error> {
    assert!(sigma_i > 0.0, "stencil spacing must be positive");
    let displaced = [
        (center.theta1 + sigma_i, center.p1),
        (center.theta1 - sigma_i, center.p1),
        (center.theta1, center.p1 + sigma_i),
        (center.theta1, center.p1 - sigma_i),
    ];

    let mut offsets = [*center; 4];
    for (slot, (theta1, p1)) in offsets.iter_mut().zip(displaced) {
        *slot = match lift {
            NeighborLift::ReLift => {
                lift_point(spec, theta1, p1).map_err(|_| Error::StencilOffSurface { theta1, p1 })?
            }
            NeighborLift::FixedP2 => {
                let state = PhaseState::new(theta1, 0.0, p1, center.p2);
                SectionPoint {
                    theta1,
                    p1,
                    p2: center.p2,
                    energy_residual: hamiltonian(&spec.params, &state) - spec.energy,
                }
            }
        };
    }

    Ok(NeighborStencil { center: *center, offsets, sigma_i })
}

/// Uniform rejection sampling of the accessible region
/// `{theta1 in range, p1^2 <= 2 beta (H0 - V(theta1, 0))}`, each accepted
/// point lifted onto the energy surface.
///
/// Each sample index `i` draws from its own counter-keyed stream
/// (`seed`, stream `i`), so the result is a pure function of `(spec, n,
/// seed)` no matter how the work is scheduled.
pub fn sample_section(spec: &SectionSpec, n: usize, seed: u64) -> Result<Vec<SectionPoint>, Error> {
    sample_impl(spec, n, seed, None)
}

/// As [`sample_section`], additionally requiring that every returned point
/// admits a full [`build_stencil`] at spacing `sigma_i` (boundary-adjacent
/// draws are rejected and redrawn, keeping the stencil spacing uniform
/// across the ensemble).
pub fn sample_section_with_stencils(
    spec: &SectionSpec,
    n: usize,
    seed: u64,
    sigma_i: f64,
) -> Result<Vec<SectionPoint>, Error> {
    sample_impl(spec, n, seed, Some(sigma_i))
}

fn sample_impl(
    spec: &SectionSpec,
    n: usize,
    seed: u64,
    stencil_sigma: Option<f64>,
) -> Result<Vec<SectionPoint>, Error> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let p_max = spec.p1_bound();
    let (lo, hi) = spec.theta1_range;

    (0..n)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            for _ in 0..MAX_DRAWS_PER_SAMPLE {
                let theta1 = rng.gen_range(lo..=hi);
                let p1 = rng.gen_range(-p_max..=p_max);
                let point = match lift_point(spec, theta1, p1) {
                    Ok(point) => point,
                    Err(_) => continue,
                };
                if let Some(sigma) = stencil_sigma {
                    if build_stencil(spec, &point, sigma, NeighborLift::ReLift).is_err() {
                        continue;
                    }
                }
                return Ok(point);
            }
            Err(Error::SamplingStalled)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::direction_value;
    use std::f64::consts::PI;

    fn params(alpha: f64, sigma: f64) -> ModelParams {
        ModelParams::new(alpha, sigma).unwrap()
    }

    fn spec(alpha: f64, sigma: f64, energy: f64) -> SectionSpec {
        SectionSpec::new(params(alpha, sigma), energy).unwrap()
    }

    #[test]
    fn spec_rejects_energies_below_minimum() {
        let p = params(1.0, 1.0);
        assert!(matches!(
            SectionSpec::new(p, -3.0),
            Err(Error::EmptyRegion { .. })
        ));
        assert!(SectionSpec::new(p, -2.9).is_ok());
    }

    #[test]
    fn lift_matches_closed_form_at_origin() {
        // alpha = sigma = 1, H0 = 20, theta1 = 0, p1 = 0:
        // beta p2^2 / (2 (beta - alpha^2)) * ... reduces to p2 = sqrt(23).
        let s = spec(1.0, 1.0, 20.0);
        let p2 = lift_p2(&s, 0.0, 0.0).unwrap();
        assert!((p2 - 23.0_f64.sqrt()).abs() < 1e-12);
        let point = lift_point(&s, 0.0, 0.0).unwrap();
        assert!(point.energy_residual.abs() <= 1e-12 * 20.0);
    }

    #[test]
    fn lift_rejects_outside_and_tangent() {
        let s = spec(1.0, 1.0, 20.0);
        let p_max = s.p1_bound();
        assert!(matches!(
            lift_p2(&s, 0.0, p_max * 1.01),
            Err(Error::OutsideAccessibleRegion { .. })
        ));

        // Exact kinetic boundary: p1^2 = 2 beta (H0 - V), a tangent point.
        let kin = s.energy - s.section_potential(1.0);
        let p1 = (2.0 * s.params.beta() * kin).sqrt();
        assert!(matches!(
            lift_p2(&s, 1.0, p1),
            Err(Error::TangentPoint { .. })
        ));
    }

    #[test]
    fn lifted_points_satisfy_section_conditions() {
        for (a, sg, h0) in [(1.0, 1.0, 20.0), (1.0, 8.0, 17.0), (2.0, 0.5, 10.0), (0.5, 0.5, 3.0)] {
            let s = spec(a, sg, h0);
            let points = sample_section(&s, 200, 7).unwrap();
            assert_eq!(points.len(), 200);
            for pt in &points {
                assert!(pt.theta1 >= 0.0 && pt.theta1 <= PI);
                assert!(
                    pt.energy_residual.abs() <= 1e-12 * h0.abs().max(1.0),
                    "residual {:e}",
                    pt.energy_residual
                );
                assert!(direction_value(&s.params, &pt.state()) > 0.0);
                let h = hamiltonian(&s.params, &pt.state());
                assert!((h - h0).abs() <= 1e-12 * h0.abs().max(1.0));
            }
        }
    }

    #[test]
    fn boundary_discriminant_vanishes_algebraically() {
        // On p1^2 = 2 beta (H0 - V(theta1, 0)) the p2 quadratic has a
        // double root; verify the residual form at random boundary points.
        let s = spec(1.3, 0.7, 9.0);
        let mut rng = <ChaCha8Rng as SeedableRng>::seed_from_u64(5);
        for _ in 0..100 {
            let theta1: f64 = rng.gen_range(0.0..PI);
            let kin = s.energy - s.section_potential(theta1);
            assert!(kin > 0.0);
            let p1 = (2.0 * s.params.beta() * kin).sqrt();
            let margin: f64 = 2.0 * s.params.beta() * kin - p1 * p1;
            assert!(margin.abs() <= 1e-9 * (2.0 * s.params.beta() * kin));
        }
    }

    #[test]
    fn sampling_deterministic_for_fixed_seed() {
        let s = spec(1.0, 1.0, 20.0);
        let a = sample_section(&s, 500, 42).unwrap();
        let b = sample_section(&s, 500, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_section(&s, 500, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_deterministic_across_thread_counts() {
        let s = spec(1.0, 1.0, 20.0);
        let baseline = sample_section(&s, 300, 11).unwrap();
        for threads in [1, 2, 4] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let got = pool.install(|| sample_section(&s, 300, 11).unwrap());
            assert_eq!(baseline, got, "thread count {threads}");
        }
    }

    #[test]
    fn low_energy_samples_concentrate_near_the_minimum() {
        // Just above H1 the accessible region shrinks to theta1 = 0.
        let p = params(1.0, 1.0);
        let h1 = equilibrium_energies(&p)[0];
        let s = SectionSpec::new(p, h1 + 0.1).unwrap();
        let points = sample_section(&s, 200, 3).unwrap();
        for pt in points {
            assert!(pt.theta1 < 0.5, "theta1 = {} too far out", pt.theta1);
        }
    }

    #[test]
    fn theta1_marginal_matches_area_density() {
        // Chi-squared test of the sampled theta1 marginal against the
        // analytic width 2 sqrt(2 beta (H0 - V(theta1, 0))), integrated
        // per bin with Simpson's rule. 20 bins, significance 0.001:
        // critical chi2(19) = 43.82.
        let s = spec(1.0, 1.0, 20.0);
        let n = 100_000;
        let points = sample_section(&s, n, 99).unwrap();

        let bins = 20;
        let width = |theta: f64| {
            let kin = s.energy - s.section_potential(theta);
            2.0 * (2.0 * s.params.beta() * kin).max(0.0).sqrt()
        };
        let simpson = |a: f64, b: f64| {
            let m = 64;
            let h = (b - a) / m as f64;
            let mut acc = width(a) + width(b);
            for k in 1..m {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * width(a + k as f64 * h);
            }
            acc * h / 3.0
        };

        let total: f64 = simpson(0.0, PI);
        let mut counts = vec![0usize; bins];
        for pt in &points {
            let b = ((pt.theta1 / PI) * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        let mut chi2 = 0.0;
        for (b, &count) in counts.iter().enumerate() {
            let lo = PI * b as f64 / bins as f64;
            let hi = PI * (b + 1) as f64 / bins as f64;
            let expected = n as f64 * simpson(lo, hi) / total;
            chi2 += (count as f64 - expected).powi(2) / expected;
        }
        assert!(chi2 < 43.82, "chi2 = {chi2}");
    }

    #[test]
    fn stencil_offsets_relift_onto_surface() {
        let s = spec(1.0, 1.0, 20.0);
        let center = lift_point(&s, 1.1, 0.7).unwrap();
        let st = build_stencil(&s, &center, 1e-4, NeighborLift::ReLift).unwrap();
        let expected = [
            (center.theta1 + 1e-4, center.p1),
            (center.theta1 - 1e-4, center.p1),
            (center.theta1, center.p1 + 1e-4),
            (center.theta1, center.p1 - 1e-4),
        ];
        for (nb, (t, q)) in st.offsets.iter().zip(expected) {
            assert_eq!(nb.theta1, t);
            assert_eq!(nb.p1, q);
            assert!(nb.energy_residual.abs() <= 1e-12 * 20.0);
            assert!(direction_value(&s.params, &nb.state()) > 0.0);
        }
    }

    #[test]
    fn stencil_fixed_p2_leaves_surface() {
        let s = spec(1.0, 1.0, 20.0);
        let center = lift_point(&s, 1.1, 0.7).unwrap();
        let st = build_stencil(&s, &center, 1e-4, NeighborLift::FixedP2).unwrap();
        // theta1 neighbors pick up an O(sigma) energy offset.
        assert!(st.offsets[0].energy_residual.abs() > 1e-8);
        for nb in &st.offsets {
            assert_eq!(nb.p2, center.p2);
        }
    }

    #[test]
    fn stencil_fails_at_the_boundary() {
        let s = spec(1.0, 1.0, 20.0);
        // A center within sigma of the p1 boundary: the p1 + sigma
        // neighbor cannot lift.
        let kin = s.energy - s.section_potential(0.3);
        let p_edge = (2.0 * s.params.beta() * kin).sqrt();
        let center = lift_point(&s, 0.3, p_edge - 5e-5).unwrap();
        assert!(matches!(
            build_stencil(&s, &center, 1e-4, NeighborLift::ReLift),
            Err(Error::StencilOffSurface { .. })
        ));
    }

    #[test]
    fn stencil_filtered_sampling_always_builds() {
        let s = spec(1.0, 1.0, 20.0);
        let points = sample_section_with_stencils(&s, 300, 17, 1e-4).unwrap();
        for pt in &points {
            assert!(build_stencil(&s, &pt, 1e-4, NeighborLift::ReLift).is_ok());
        }
    }

    #[test]
    fn empty_request_yields_empty_output() {
        let s = spec(1.0, 1.0, 20.0);
        assert!(sample_section(&s, 0, 1).unwrap().is_empty());
    }
}
