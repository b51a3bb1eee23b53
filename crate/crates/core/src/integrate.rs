//! Adaptive 8th-order Runge-Kutta integration of Hamilton's equations,
//! with an augmented equation accumulating the Lagrangian descriptor and
//! with Poincaré-crossing event detection.
//!
//! The stepper is the classic 13-stage embedded 7(8) pair propagating the
//! 8th-order solution. The error test is per unit step (the estimate is
//! compared against `tol * |h|`), so the accumulated error over a horizon
//! `tau` stays near `tau * tol`; at the default 1e-8 this holds the energy
//! to better than four significant digits over `tau = 700`.
//! No dense output is kept: section crossings are refined by bisection,
//! re-integrating from the bracket start, and trajectory samples are taken
//! by forcing steps to land on the requested times.

use std::f64::consts::TAU;
use std::ops::ControlFlow;

use crate::error::Error;
use crate::model::{hamiltonian, vector_field, ModelParams, PhaseState};

/// Tolerances and step limits for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            rel_tol: 1e-8,
            initial_step: 1e-3,
            max_step: 1.0,
            min_step: 1e-12,
            max_steps: 100_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let positive = self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.initial_step > 0.0
            && self.max_step > 0.0
            && self.min_step > 0.0;
        if !positive {
            return Err(Error::InvalidConfig(
                "tolerances and step bounds must be strictly positive".into(),
            ));
        }
        if !(self.min_step < self.initial_step && self.initial_step <= self.max_step) {
            return Err(Error::InvalidConfig(
                "require min_step < initial_step <= max_step".into(),
            ));
        }
        Ok(())
    }
}

/// Sampled solution of one integration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Sample times, strictly increasing (forward) or decreasing (backward).
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    /// max over accepted steps of |H(t) - H(0)|.
    pub energy_drift: f64,
}

/// Integration aborted mid-flight; carries whatever was computed so far.
#[derive(Debug, Clone)]
pub struct IntegrationAbort {
    pub error: Error,
    pub partial: Trajectory,
}

/// A detected crossing of the section `theta2 = 0 (mod 2 pi)` in the
/// positive direction `beta p2 - alpha p1 cos(delta theta) > 0`.
#[derive(Debug, Clone)]
pub struct CrossingEvent {
    pub time: f64,
    pub state: PhaseState,
    pub direction_value: f64,
}

/// Residual tolerance on the wrapped angle at a refined crossing.
pub const CROSSING_WRAP_TOL: f64 = 1e-10;

pub(crate) trait OdeSystem<const N: usize> {
    fn rhs(&self, y: &[f64; N], dydt: &mut [f64; N]);
}

struct HamiltonSystem<'a> {
    params: &'a ModelParams,
}

impl OdeSystem<4> for HamiltonSystem<'_> {
    fn rhs(&self, y: &[f64; 4], dydt: &mut [f64; 4]) {
        *dydt = vector_field(self.params, &PhaseState::from_array(*y));
    }
}

/// Hamiltonian flow augmented with `dL/dt = sum_i |F_i|^p`.
///
/// `negate` reverses the flow while keeping the accumulator non-negative,
/// which is how the backward descriptor component is computed.
struct LdSystem<'a> {
    params: &'a ModelParams,
    p_exponent: f64,
    negate: bool,
}

#[inline]
fn ld_integrand(f: &[f64; 4], p: f64) -> f64 {
    // p = 1/2 dominates every inner loop; powf is an order of magnitude
    // slower than sqrt, so special-case the common exponents.
    if p == 0.5 {
        f[0].abs().sqrt() + f[1].abs().sqrt() + f[2].abs().sqrt() + f[3].abs().sqrt()
    } else if p == 1.0 {
        f[0].abs() + f[1].abs() + f[2].abs() + f[3].abs()
    } else {
        f[0].abs().powf(p) + f[1].abs().powf(p) + f[2].abs().powf(p) + f[3].abs().powf(p)
    }
}

impl OdeSystem<5> for LdSystem<'_> {
    fn rhs(&self, y: &[f64; 5], dydt: &mut [f64; 5]) {
        let f = vector_field(
            self.params,
            &PhaseState::new(y[0], y[1], y[2], y[3]),
        );
        let sign = if self.negate { -1.0 } else { 1.0 };
        dydt[0] = sign * f[0];
        dydt[1] = sign * f[1];
        dydt[2] = sign * f[2];
        dydt[3] = sign * f[3];
        dydt[4] = ld_integrand(&f, self.p_exponent);
    }
}

// 13-stage Fehlberg 7(8) coefficients, exact rationals. The row-sum
// consistency c_i = sum_j a_ij and sum b_i = 1 are asserted in the tests.
const STAGES: usize = 13;

#[rustfmt::skip]
const A: [[f64; 12]; STAGES] = [
    [0.0; 12],
    [2.0 / 27.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 36.0, 1.0 / 12.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 24.0, 0.0, 1.0 / 8.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [5.0 / 12.0, 0.0, -25.0 / 16.0, 25.0 / 16.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 20.0, 0.0, 0.0, 1.0 / 4.0, 1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-25.0 / 108.0, 0.0, 0.0, 125.0 / 108.0, -65.0 / 27.0, 125.0 / 54.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [31.0 / 300.0, 0.0, 0.0, 0.0, 61.0 / 225.0, -2.0 / 9.0, 13.0 / 900.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.0, 0.0, 0.0, -53.0 / 6.0, 704.0 / 45.0, -107.0 / 9.0, 67.0 / 90.0, 3.0, 0.0, 0.0, 0.0, 0.0],
    [-91.0 / 108.0, 0.0, 0.0, 23.0 / 108.0, -976.0 / 135.0, 311.0 / 54.0, -19.0 / 60.0, 17.0 / 6.0, -1.0 / 12.0, 0.0, 0.0, 0.0],
    [2383.0 / 4100.0, 0.0, 0.0, -341.0 / 164.0, 4496.0 / 1025.0, -301.0 / 82.0, 2133.0 / 4100.0, 45.0 / 82.0, 45.0 / 164.0, 18.0 / 41.0, 0.0, 0.0],
    [3.0 / 205.0, 0.0, 0.0, 0.0, 0.0, -6.0 / 41.0, -3.0 / 205.0, -3.0 / 41.0, 3.0 / 41.0, 6.0 / 41.0, 0.0, 0.0],
    [-1777.0 / 4100.0, 0.0, 0.0, -341.0 / 164.0, 4496.0 / 1025.0, -289.0 / 82.0, 2193.0 / 4100.0, 51.0 / 82.0, 33.0 / 164.0, 12.0 / 41.0, 0.0, 1.0],
];

// 8th-order propagation weights; stages 11 and 12 only feed the estimator.
#[rustfmt::skip]
const B: [f64; STAGES] = [
    41.0 / 840.0, 0.0, 0.0, 0.0, 0.0, 34.0 / 105.0, 9.0 / 35.0, 9.0 / 35.0,
    9.0 / 280.0, 9.0 / 280.0, 41.0 / 840.0, 0.0, 0.0,
];

// Local truncation error of the embedded 7th-order formula:
// TE = (41/840) h (k0 + k10 - k11 - k12).
const ERR_WEIGHT: f64 = 41.0 / 840.0;

// Stage nodes; only used by the consistency test (the flow is autonomous).
#[rustfmt::skip]
#[cfg(test)]
const C: [f64; STAGES] = [
    0.0, 2.0 / 27.0, 1.0 / 9.0, 1.0 / 6.0, 5.0 / 12.0, 0.5, 5.0 / 6.0,
    1.0 / 6.0, 2.0 / 3.0, 1.0 / 3.0, 1.0, 0.0, 1.0,
];

const STEP_SAFETY: f64 = 0.9;
// The error ratio behaves like h^7 under per-unit-step control.
const STEP_EXPONENT: f64 = 1.0 / 7.0;
// Growth factor bounds 1/3 .. 6 per step.
const FACC1: f64 = 3.0;
const FACC2: f64 = 1.0 / 6.0;

enum Halt {
    Underflow { t: f64, h: f64 },
    Budget { t: f64, steps: u64 },
}

impl Halt {
    fn into_error(self) -> Error {
        match self {
            Halt::Underflow { t, h } => Error::StepUnderflow { t, h },
            Halt::Budget { t, steps } => Error::StepBudgetExceeded { t, steps },
        }
    }
}

/// One trial step from `(t, y)` with stage slope `k0 = f(y)` cached.
///
/// Returns the candidate 8th-order solution and the error ratio: the RMS of
/// the embedded truncation-error estimate over the per-unit-step tolerance
/// `(abs_tol + rel_tol |y|) |h|`. A ratio of at most 1 means acceptable.
fn trial_step<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    cfg: &IntegratorConfig,
    y: &[f64; N],
    k0: &[f64; N],
    h: f64,
) -> ([f64; N], f64) {
    let mut k = [[0.0; N]; STAGES];
    k[0] = *k0;

    let mut y_stage = [0.0; N];
    for s in 1..STAGES {
        let row = &A[s];
        for i in 0..N {
            let mut acc = row[0] * k[0][i];
            for (j, aj) in row.iter().enumerate().take(s).skip(1) {
                acc += aj * k[j][i];
            }
            y_stage[i] = y[i] + h * acc;
        }
        let (head, tail) = k.split_at_mut(s);
        let _ = head;
        sys.rhs(&y_stage, &mut tail[0]);
    }

    let mut y_new = [0.0; N];
    let mut err_sq = 0.0;
    for i in 0..N {
        let mut incr = 0.0;
        for j in 0..STAGES {
            incr += B[j] * k[j][i];
        }
        y_new[i] = y[i] + h * incr;
        let te = h * ERR_WEIGHT * (k[0][i] + k[10][i] - k[11][i] - k[12][i]);
        let scale = (cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs())) * h.abs();
        err_sq += (te / scale) * (te / scale);
    }
    (y_new, (err_sq / N as f64).sqrt())
}

/// Adaptive integration of `dy/dt = f(y)` from `t0` to `t_end`.
///
/// `stops` are mandatory landing times strictly between `t0` and `t_end`,
/// sorted in travel direction. `on_step` sees every accepted step (previous
/// and new point, plus whether the step landed on a stop) and may end the
/// integration early. On halt the last good `(t, y)` is returned with the
/// reason.
#[allow(clippy::too_many_arguments)]
fn drive<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    cfg: &IntegratorConfig,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    stops: &[f64],
    mut on_step: impl FnMut(f64, &[f64; N], f64, &[f64; N], bool) -> ControlFlow<()>,
) -> Result<(f64, [f64; N]), (Halt, f64, [f64; N])> {
    debug_assert!(t_end != t0);
    let posneg = (t_end - t0).signum();

    let mut t = t0;
    let mut y = y0;
    let mut k0 = [0.0; N];
    sys.rhs(&y, &mut k0);

    let mut h = posneg * cfg.initial_step.min(cfg.max_step);
    let mut rejected_last = false;
    let mut steps: u64 = 0;
    let mut stop_idx = 0usize;

    loop {
        if steps >= cfg.max_steps {
            return Err((Halt::Budget { t, steps }, t, y));
        }
        steps += 1;

        // Land exactly on the next mandatory time.
        let target = if stop_idx < stops.len() {
            stops[stop_idx]
        } else {
            t_end
        };
        let mut landing = false;
        if (t + 1.01 * h - target) * posneg > 0.0 {
            h = target - t;
            landing = true;
        }

        let (y_new, err) = trial_step(sys, cfg, &y, &k0, h);

        let fac11 = err.powf(STEP_EXPONENT);
        if err <= 1.0 {
            // Accepted.
            let t_prev = t;
            let y_prev = y;
            t = if landing { target } else { t + h };
            y = y_new;
            sys.rhs(&y, &mut k0);

            let on_stop = landing && stop_idx < stops.len();
            if on_stop {
                stop_idx += 1;
            }
            if let ControlFlow::Break(()) = on_step(t_prev, &y_prev, t, &y, on_stop) {
                return Ok((t, y));
            }
            if landing && stop_idx == 0 && stops.is_empty() || (landing && !on_stop) {
                // Landed on t_end itself.
                return Ok((t, y));
            }
            if (t_end - t) * posneg <= 0.0 {
                return Ok((t, y));
            }

            let mut fac = fac11 / STEP_SAFETY;
            fac = fac.clamp(FACC2, FACC1);
            let mut h_new = h / fac;
            if rejected_last {
                h_new = posneg * h_new.abs().min(h.abs());
            }
            rejected_last = false;
            h = posneg * h_new.abs().min(cfg.max_step);
        } else {
            // Rejected: shrink and retry.
            rejected_last = true;
            h /= FACC1.min(fac11 / STEP_SAFETY);
            if h.abs() < cfg.min_step {
                return Err((Halt::Underflow { t, h }, t, y));
            }
        }
    }
}

/// Point-to-point integration returning only the endpoint.
fn endpoint<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    cfg: &IntegratorConfig,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
) -> Result<[f64; N], Halt> {
    if t_end == t0 {
        return Ok(y0);
    }
    match drive(sys, cfg, t0, y0, t_end, &[], |_, _, _, _, _| {
        ControlFlow::Continue(())
    }) {
        Ok((_, y)) => Ok(y),
        Err((halt, _, _)) => Err(halt),
    }
}

fn sample_times(t_end: f64, dt: f64) -> Vec<f64> {
    // Strictly interior multiples of dt; the endpoint is always recorded.
    let mut out = Vec::new();
    let sign = t_end.signum();
    let mut k = 1u64;
    loop {
        let t = sign * dt * k as f64;
        if (t_end - t) * sign <= 0.0 {
            break;
        }
        out.push(t);
        k += 1;
    }
    out
}

/// Integrate Hamilton's equations from `state0` over `[0, t_end]`
/// (backward when `t_end < 0`).
///
/// Samples are recorded at multiples of `sample_every` plus the endpoint;
/// with `None` every accepted step is recorded. `energy_drift` is the
/// maximum of `|H(t) - H(0)|` over all accepted steps.
pub fn integrate(
    params: &ModelParams,
    state0: &PhaseState,
    t_end: f64,
    cfg: &IntegratorConfig,
    sample_every: Option<f64>,
) -> Result<Trajectory, IntegrationAbort> {
    let start = Trajectory {
        times: vec![0.0],
        states: vec![*state0],
        energy_drift: 0.0,
    };
    if let Err(error) = cfg.validate() {
        return Err(IntegrationAbort { error, partial: start });
    }
    if t_end == 0.0 || !t_end.is_finite() {
        return Err(IntegrationAbort {
            error: Error::InvalidConfig(format!("t_end must be finite and nonzero, got {t_end}")),
            partial: start,
        });
    }
    if let Some(dt) = sample_every {
        if !(dt > 0.0) {
            return Err(IntegrationAbort {
                error: Error::InvalidConfig("sample_every must be positive".into()),
                partial: start,
            });
        }
    }

    let sys = HamiltonSystem { params };
    let h0 = hamiltonian(params, state0);
    let stops = sample_every.map(|dt| sample_times(t_end, dt)).unwrap_or_default();

    let mut traj = start;
    let record_all = sample_every.is_none();
    let result = drive(
        &sys,
        cfg,
        0.0,
        state0.to_array(),
        t_end,
        &stops,
        |_, _, t, y, on_stop| {
            let state = PhaseState::from_array(*y);
            let drift = (hamiltonian(params, &state) - h0).abs();
            if drift > traj.energy_drift {
                traj.energy_drift = drift;
            }
            if record_all || on_stop {
                traj.times.push(t);
                traj.states.push(state);
            }
            ControlFlow::Continue(())
        },
    );

    match result {
        Ok((t, y)) => {
            if traj.times.last() != Some(&t) {
                traj.times.push(t);
                traj.states.push(PhaseState::from_array(y));
            }
            Ok(traj)
        }
        Err((halt, t, y)) => {
            if traj.times.last() != Some(&t) {
                traj.times.push(t);
                traj.states.push(PhaseState::from_array(y));
            }
            Err(IntegrationAbort {
                error: halt.into_error(),
                partial: traj,
            })
        }
    }
}

/// Integrate the 5-dimensional system `(state, L)` with
/// `dL/dt = sum_i |F_i|^p`, `L(0) = 0`, over the horizon `tau > 0`,
/// returning the final state and the accumulated descriptor.
///
/// The descriptor component participates in step-size control with the
/// same tolerances: the `|F|^p` integrand has unbounded slope where a
/// component of `F` crosses zero, and near-equilibrium passages would
/// otherwise lose accuracy silently.
pub fn integrate_with_ld(
    params: &ModelParams,
    state0: &PhaseState,
    tau: f64,
    p_exponent: f64,
    cfg: &IntegratorConfig,
) -> Result<(PhaseState, f64), Error> {
    ld_endpoint(params, state0, tau, p_exponent, cfg, false)
}

/// As [`integrate_with_ld`] with a direction switch: `backward` integrates
/// the negated vector field, which accumulates the descriptor over the
/// past of `state0` while keeping the accumulator non-decreasing.
pub fn ld_endpoint(
    params: &ModelParams,
    state0: &PhaseState,
    tau: f64,
    p_exponent: f64,
    cfg: &IntegratorConfig,
    backward: bool,
) -> Result<(PhaseState, f64), Error> {
    cfg.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "descriptor horizon must be positive and finite, got {tau}"
        )));
    }
    if !(p_exponent > 0.0 && p_exponent <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "descriptor exponent must lie in (0, 1], got {p_exponent}"
        )));
    }

    let sys = LdSystem { params, p_exponent, negate: backward };
    let a = state0.to_array();
    let y0 = [a[0], a[1], a[2], a[3], 0.0];
    match endpoint(&sys, cfg, 0.0, y0, tau) {
        Ok(y) => Ok((PhaseState::new(y[0], y[1], y[2], y[3]), y[4])),
        Err(halt) => Err(halt.into_error()),
    }
}

/// Sampled version of [`integrate_with_ld`]: returns the trajectory plus
/// the descriptor value aligned with each sample.
pub fn ld_trajectory(
    params: &ModelParams,
    state0: &PhaseState,
    tau: f64,
    p_exponent: f64,
    cfg: &IntegratorConfig,
    sample_every: Option<f64>,
) -> Result<(Trajectory, Vec<f64>), Error> {
    cfg.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "descriptor horizon must be positive and finite, got {tau}"
        )));
    }
    if !(p_exponent > 0.0 && p_exponent <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "descriptor exponent must lie in (0, 1], got {p_exponent}"
        )));
    }

    let sys = LdSystem { params, p_exponent, negate: false };
    let h0 = hamiltonian(params, state0);
    let a = state0.to_array();
    let y0 = [a[0], a[1], a[2], a[3], 0.0];
    let stops = sample_every.map(|dt| sample_times(tau, dt)).unwrap_or_default();
    let record_all = sample_every.is_none();

    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![*state0],
        energy_drift: 0.0,
    };
    let mut ld = vec![0.0];

    let result = drive(&sys, cfg, 0.0, y0, tau, &stops, |_, _, t, y, on_stop| {
        let state = PhaseState::new(y[0], y[1], y[2], y[3]);
        let drift = (hamiltonian(params, &state) - h0).abs();
        if drift > traj.energy_drift {
            traj.energy_drift = drift;
        }
        if record_all || on_stop {
            traj.times.push(t);
            traj.states.push(state);
            ld.push(y[4]);
        }
        ControlFlow::Continue(())
    });

    match result {
        Ok((t, y)) => {
            if traj.times.last() != Some(&t) {
                traj.times.push(t);
                traj.states.push(PhaseState::new(y[0], y[1], y[2], y[3]));
                ld.push(y[4]);
            }
            Ok((traj, ld))
        }
        Err((halt, _, _)) => Err(halt.into_error()),
    }
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta - (theta / TAU).round() * TAU;
    if w <= -std::f64::consts::PI {
        w + TAU
    } else {
        w
    }
}

/// `beta p2 - alpha p1 cos(delta theta)`, positive on the oriented section.
pub fn direction_value(params: &ModelParams, state: &PhaseState) -> f64 {
    params.beta() * state.p2 - params.alpha() * state.p1 * state.delta_theta().cos()
}

/// Detect up to `n_crossings` transversal crossings of
/// `theta2 = 0 (mod 2 pi)` with positive direction value, integrating
/// forward until `t_max`.
///
/// Candidates are flagged by a sign change of `sin(theta2)` with
/// `cos(theta2) > 0` across an accepted step, then refined by bisection on
/// the wrapped angle (re-integrating from the bracket start) until the
/// residual is below [`CROSSING_WRAP_TOL`]. Crossings that fail the
/// direction condition are discarded. Grazing candidates whose residual
/// cannot be driven below tolerance are skipped, never fabricated.
pub fn poincare_crossings(
    params: &ModelParams,
    state0: &PhaseState,
    n_crossings: usize,
    cfg: &IntegratorConfig,
    t_max: f64,
) -> Result<Vec<CrossingEvent>, Error> {
    cfg.validate()?;
    if n_crossings == 0 {
        return Err(Error::InvalidConfig("n_crossings must be at least 1".into()));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "t_max must be positive and finite, got {t_max}"
        )));
    }

    let sys = HamiltonSystem { params };
    let mut events = Vec::new();

    // The start point may itself lie on the section.
    if wrap_angle(state0.theta2).abs() <= CROSSING_WRAP_TOL {
        let dir = direction_value(params, state0);
        if dir > 0.0 {
            events.push(CrossingEvent {
                time: 0.0,
                state: *state0,
                direction_value: dir,
            });
            if events.len() >= n_crossings {
                return Ok(events);
            }
        }
    }

    let result = drive(
        &sys,
        cfg,
        0.0,
        state0.to_array(),
        t_max,
        &[],
        |t_prev, y_prev, t_new, y_new, _| {
            let s_prev = y_prev[1].sin();
            let s_new = y_new[1].sin();
            let candidate = s_prev * s_new < 0.0
                && y_prev[1].cos() > 0.0
                && y_new[1].cos() > 0.0;
            if candidate {
                if let Some((t_c, y_c)) = refine_crossing(&sys, cfg, t_prev, y_prev, t_new) {
                    let state = PhaseState::from_array(y_c);
                    let dir = direction_value(params, &state);
                    if dir > 0.0 {
                        events.push(CrossingEvent {
                            time: t_c,
                            state,
                            direction_value: dir,
                        });
                        if events.len() >= n_crossings {
                            return ControlFlow::Break(());
                        }
                    }
                }
            }
            ControlFlow::Continue(())
        },
    );

    match result {
        Ok(_) => Ok(events),
        Err((halt, _, _)) => Err(halt.into_error()),
    }
}

/// Bisection refinement of a flagged crossing inside the accepted step
/// `[t_a, t_b]`, re-integrating from `(t_a, y_a)` with the step capped at
/// the bracket width.
fn refine_crossing(
    sys: &HamiltonSystem<'_>,
    cfg: &IntegratorConfig,
    t_a: f64,
    y_a: &[f64; 4],
    t_b: f64,
) -> Option<(f64, [f64; 4])> {
    let width = t_b - t_a;
    let local = IntegratorConfig {
        max_step: width,
        initial_step: (0.5 * width).max(cfg.min_step * 2.0),
        ..*cfg
    };

    let side_a = wrap_angle(y_a[1]).signum();
    let mut lo = t_a;
    let mut hi = t_b;

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let y_mid = endpoint(sys, &local, t_a, *y_a, mid).ok()?;
        let w = wrap_angle(y_mid[1]);
        if w.abs() <= CROSSING_WRAP_TOL {
            return Some((mid, y_mid));
        }
        if w.signum() == side_a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    None
}
