//! Dimensionless double-pendulum model: inertia matrices, energies,
//! Hamiltonian vector field, equilibria and their linear stability.
//!
//! The configuration is `(theta1, theta2)` with conjugate momenta `(p1, p2)`.
//! Everything is expressed through the length ratio `alpha = l1/l2` and the
//! mass ratio `sigma = m1/m2`; time is measured in units of `sqrt(l2/g)`.

use num_complex::Complex64;

use crate::error::Error;

/// Relative tolerance used to decide that an eigenvalue is purely real or
/// purely imaginary. Eigen-solves in double precision leave residue of
/// order 1e-12 on what should be exact zeros.
const EIG_CLASS_TOL: f64 = 1e-9;

/// Dimensionless model constants.
///
/// `beta`, `mu` and `gamma` are always derived from `alpha` and `sigma`;
/// they cannot drift out of sync because the fields are private.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    alpha: f64,
    sigma: f64,
    beta: f64,
    mu: f64,
    gamma: f64,
    // beta / alpha = alpha (1 + sigma): gravity coefficient of theta1,
    // cached to keep divisions out of the vector field.
    beta_over_alpha: f64,
}

impl ModelParams {
    /// Build the parameter set from the length ratio `alpha = l1/l2` and the
    /// mass ratio `sigma = m1/m2`. Both must be finite and positive.
    pub fn new(alpha: f64, sigma: f64) -> Result<Self, Error> {
        if !(alpha.is_finite() && alpha > 0.0 && sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParams { alpha, sigma });
        }
        let beta = alpha * alpha * (1.0 + sigma);
        Ok(Self {
            alpha,
            sigma,
            beta,
            mu: 1.0 / (1.0 + sigma),
            gamma: beta - alpha * alpha,
            beta_over_alpha: alpha * (1.0 + sigma),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `beta = alpha^2 (1 + sigma)`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `mu = 1 / (1 + sigma)`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `gamma = beta - alpha^2 = alpha^2 sigma`, a lower bound for
    /// `det B(x) = beta - alpha^2 x^2` on `|x| <= 1`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Phase-space state `(theta1, theta2, p1, p2)`.
///
/// Angles are stored unwrapped; the dynamics only ever evaluates their
/// sines and cosines, so wrapping is never required.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub theta1: f64,
    pub theta2: f64,
    pub p1: f64,
    pub p2: f64,
}

impl PhaseState {
    pub fn new(theta1: f64, theta2: f64, p1: f64, p2: f64) -> Self {
        Self { theta1, theta2, p1, p2 }
    }

    /// `delta theta = theta1 - theta2`.
    pub fn delta_theta(&self) -> f64 {
        self.theta1 - self.theta2
    }

    pub fn is_finite(&self) -> bool {
        self.theta1.is_finite()
            && self.theta2.is_finite()
            && self.p1.is_finite()
            && self.p2.is_finite()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.theta1, self.theta2, self.p1, self.p2]
    }

    pub fn from_array(y: [f64; 4]) -> Self {
        Self::new(y[0], y[1], y[2], y[3])
    }
}

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
///
/// All matrices of the model (B, its inverse, and C) are symmetric 2x2, so
/// closed-form algebra is exact and cheap; no linear-algebra crate is needed
/// in the inner loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.xx * v[0] + self.xy * v[1],
            self.xy * v[0] + self.yy * v[1],
        ]
    }

    /// Quadratic form `v^T M v`.
    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.xx * v[0] * v[0] + 2.0 * self.xy * v[0] * v[1] + self.yy * v[1] * v[1]
    }
}

fn check_cos_range(x: f64) {
    assert!(
        x.is_finite() && x.abs() <= 1.0,
        "cos(delta_theta) argument out of [-1, 1]: {x}"
    );
}

/// Inertia matrix `B(x) = [[beta, alpha x], [alpha x, 1]]` with `x = cos(delta theta)`.
///
/// Positive definite for all `|x| <= 1` since `det B = beta - alpha^2 x^2 >= gamma > 0`.
pub fn b_matrix(params: &ModelParams, x: f64) -> Sym2 {
    check_cos_range(x);
    Sym2 {
        xx: params.beta,
        xy: params.alpha * x,
        yy: 1.0,
    }
}

/// Closed-form inverse of [`b_matrix`]:
/// `B^{-1}(x) = [[1, -alpha x], [-alpha x, beta]] / (beta - alpha^2 x^2)`.
pub fn b_inverse(params: &ModelParams, x: f64) -> Sym2 {
    check_cos_range(x);
    let ax = params.alpha * x;
    let det = params.beta - ax * ax;
    Sym2 {
        xx: 1.0 / det,
        xy: -ax / det,
        yy: params.beta / det,
    }
}

/// Derivative matrix `C(x) = d(B^{-1})/dx = -B^{-1} B'(x) B^{-1}` with
/// `B'(x) = [[0, alpha], [alpha, 0]]`:
///
/// `C(x) = -alpha / (beta - alpha^2 x^2)^2 * [[-2 alpha x, beta + alpha^2 x^2],
///                                            [beta + alpha^2 x^2, -2 alpha beta x]]`.
pub fn c_matrix(params: &ModelParams, x: f64) -> Sym2 {
    check_cos_range(x);
    let a = params.alpha;
    let ax2 = a * a * x * x;
    let det = params.beta - ax2;
    let scale = -a / (det * det);
    Sym2 {
        xx: scale * (-2.0 * a * x),
        xy: scale * (params.beta + ax2),
        yy: scale * (-2.0 * a * params.beta * x),
    }
}

/// Potential energy `V(theta1, theta2) = -(beta/alpha) cos theta1 - cos theta2`.
pub fn potential(params: &ModelParams, theta1: f64, theta2: f64) -> f64 {
    -params.beta_over_alpha * theta1.cos() - theta2.cos()
}

/// Kinetic energy `T = p^T B^{-1}(cos delta_theta) p / 2`; non-negative,
/// zero iff both momenta vanish.
pub fn kinetic(params: &ModelParams, state: &PhaseState) -> f64 {
    let binv = b_inverse(params, state.delta_theta().cos());
    0.5 * binv.quad([state.p1, state.p2])
}

/// Total energy `H = T + V`.
pub fn hamiltonian(params: &ModelParams, state: &PhaseState) -> f64 {
    kinetic(params, state) + potential(params, state.theta1, state.theta2)
}

/// Hamiltonian vector field `(theta', p') = (dH/dp, -dH/dtheta)`:
///
/// `theta' = B^{-1}(cos dt) p`,
/// `p'     = (sin dt / 2) (p^T C(cos dt) p) (1, -1)^T - ((beta/alpha) sin theta1, sin theta2)^T`.
pub fn vector_field(params: &ModelParams, state: &PhaseState) -> [f64; 4] {
    // Expanded form of B^{-1} p and p^T C p sharing one reciprocal of
    // det B; this is the innermost loop of every descriptor integration.
    let (sin_dt, cos_dt) = state.delta_theta().sin_cos();
    let (p1, p2) = (state.p1, state.p2);
    let a = params.alpha;
    let beta = params.beta;

    let ax = a * cos_dt;
    let inv_det = 1.0 / (beta - ax * ax);

    let theta1_dot = (p1 - ax * p2) * inv_det;
    let theta2_dot = (beta * p2 - ax * p1) * inv_det;

    // p^T C p with C = -a/det^2 [[-2ax, beta + ax^2], [beta + ax^2, -2 a beta x]].
    let quad = (-a * inv_det * inv_det)
        * (-2.0 * ax * p1 * p1 + 2.0 * (beta + ax * ax) * p1 * p2 - 2.0 * ax * beta * p2 * p2);
    let coupling = 0.5 * sin_dt * quad;

    [
        theta1_dot,
        theta2_dot,
        coupling - params.beta_over_alpha * state.theta1.sin(),
        -coupling - state.theta2.sin(),
    ]
}

/// Energies `(H1, H2, H3, H4)` of the four equilibria
/// `(0,0), (0,pi), (pi,0), (pi,pi)`:
/// `-k-1, -k+1, k-1, k+1` with `k = alpha (1 + sigma) = beta / alpha`.
pub fn equilibrium_energies(params: &ModelParams) -> [f64; 4] {
    let k = params.beta / params.alpha;
    [-k - 1.0, -k + 1.0, k - 1.0, k + 1.0]
}

/// Linear stability class of an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Stability {
    /// Two purely imaginary eigenvalue pairs (stable).
    CenterCenter,
    /// One real pair and one imaginary pair (index-1 saddle).
    SaddleCenter,
    /// Two real pairs (index-2 saddle).
    SaddleSaddle,
}

/// One of the four equilibria with its linearization spectrum.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    /// 1-based index following the `(0,0), (0,pi), (pi,0), (pi,pi)` order.
    pub index: usize,
    pub position: PhaseState,
    pub energy: f64,
    pub stability: Stability,
    /// Spectrum of the equilibrium Jacobian, sorted by (re, im).
    /// Comes in `+lambda / -lambda` pairs.
    pub eigenvalues: [Complex64; 4],
}

const EQUILIBRIUM_ANGLES: [(f64, f64); 4] = [
    (0.0, 0.0),
    (0.0, std::f64::consts::PI),
    (std::f64::consts::PI, 0.0),
    (std::f64::consts::PI, std::f64::consts::PI),
];

/// Jacobian of the vector field at equilibrium `index` (1..=4).
///
/// At `p = 0` the momentum-dependent blocks vanish, leaving the
/// anti-block-diagonal form `[[0, B^{-1}(cos dt)], [-hess V, 0]]`.
pub fn equilibrium_jacobian(params: &ModelParams, index: usize) -> [[f64; 4]; 4] {
    assert!((1..=4).contains(&index), "equilibrium index must be 1..=4");
    let (t1, t2) = EQUILIBRIUM_ANGLES[index - 1];
    let binv = b_inverse(params, (t1 - t2).cos());
    let hess = [(params.beta / params.alpha) * t1.cos(), t2.cos()];
    [
        [0.0, 0.0, binv.xx, binv.xy],
        [0.0, 0.0, binv.xy, binv.yy],
        [-hess[0], 0.0, 0.0, 0.0],
        [0.0, -hess[1], 0.0, 0.0],
    ]
}

/// The four equilibria with energies, spectra and stability classes.
///
/// The Jacobian at each equilibrium is anti-block-diagonal `[[0, M], [N, 0]]`,
/// so its eigenvalues are the complex square roots of the eigenvalues of the
/// 2x2 product `M N`; this keeps the spectrum in exact `+lambda/-lambda` pairs.
pub fn equilibria(params: &ModelParams) -> Result<[Equilibrium; 4], Error> {
    let energies = equilibrium_energies(params);
    let mut out = Vec::with_capacity(4);

    for (i, &(t1, t2)) in EQUILIBRIUM_ANGLES.iter().enumerate() {
        let index = i + 1;
        let m = b_inverse(params, (t1 - t2).cos());
        // N = -hess V, diagonal at the equilibria.
        let n = [
            -(params.beta / params.alpha) * t1.cos(),
            -t2.cos(),
        ];
        // P = M N with diagonal N.
        let p = [[m.xx * n[0], m.xy * n[1]], [m.xy * n[0], m.yy * n[1]]];
        let tr = p[0][0] + p[1][1];
        let det = p[0][0] * p[1][1] - p[0][1] * p[1][0];
        let disc = Complex64::new(tr * tr - 4.0 * det, 0.0).sqrt();
        let nu = [
            (Complex64::new(tr, 0.0) + disc) * 0.5,
            (Complex64::new(tr, 0.0) - disc) * 0.5,
        ];

        let mut eigs = [Complex64::new(0.0, 0.0); 4];
        for (k, v) in nu.iter().enumerate() {
            let root = v.sqrt();
            eigs[2 * k] = root;
            eigs[2 * k + 1] = -root;
        }
        eigs.sort_by(|a, b| {
            (a.re, a.im)
                .partial_cmp(&(b.re, b.im))
                .expect("finite eigenvalues")
        });

        let stability = classify_spectrum(&eigs).ok_or(Error::UnclassifiableSpectrum { index })?;

        out.push(Equilibrium {
            index,
            position: PhaseState::new(t1, t2, 0.0, 0.0),
            energy: energies[i],
            stability,
            eigenvalues: eigs,
        });
    }

    Ok(out.try_into().expect("exactly four equilibria"))
}

fn classify_spectrum(eigs: &[Complex64; 4]) -> Option<Stability> {
    let mut imaginary = 0usize;
    let mut real = 0usize;
    for l in eigs {
        let scale = EIG_CLASS_TOL * l.norm().max(1.0);
        let re_zero = l.re.abs() < scale;
        let im_zero = l.im.abs() < scale;
        match (re_zero, im_zero) {
            (true, false) => imaginary += 1,
            (false, true) => real += 1,
            // Zero or genuinely complex eigenvalues match no class.
            _ => return None,
        }
    }
    match (imaginary, real) {
        (4, 0) => Some(Stability::CenterCenter),
        (2, 2) => Some(Stability::SaddleCenter),
        (0, 4) => Some(Stability::SaddleSaddle),
        _ => None,
    }
}

/// Central finite-difference Jacobian of [`vector_field`].
///
/// Verification aid: the analytic Jacobian is only available at the
/// equilibria, so tests cross-check linearizations against this.
pub fn finite_difference_jacobian(
    params: &ModelParams,
    state: &PhaseState,
    step: f64,
) -> [[f64; 4]; 4] {
    let mut jac = [[0.0; 4]; 4];
    let y0 = state.to_array();
    for j in 0..4 {
        let mut plus = y0;
        let mut minus = y0;
        plus[j] += step;
        minus[j] -= step;
        let fp = vector_field(params, &PhaseState::from_array(plus));
        let fm = vector_field(params, &PhaseState::from_array(minus));
        for i in 0..4 {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    jac
}
