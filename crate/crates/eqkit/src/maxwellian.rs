//! Local Maxwellians solving the free-transport equation.
//!
//! The family is parameterized by an amplitude `r0 > 0`, three scalars
//! `alpha`, `beta`, `gamma`, a skew-symmetric matrix stored as [`Skew`], and
//! two vectors `w1`, `w2`. The density is `m = r0 exp(E)` with the exponent
//!
//! ```text
//! E(t,x,v) = -alpha |x - t v|^2 + beta (x - t v).v - gamma |v|^2
//!            + 2 (L (x - t v)).v - 2 w1.(x - t v) + 2 w2.v
//! ```
//!
//! which depends on `(t, x)` only through `x - t v`, so `m` solves the
//! transport equation for every parameter choice. The factored form
//! `rho(t,x) exp(-a(t) |v - u(t,x)|^2)` is reconstructed on the time window
//! where `a(t) = alpha t^2 + beta t + gamma` stays positive.

use crate::skew::Skew;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Default cap on the exponent before `exp` (just under `ln(f64::MAX)`).
pub const DEFAULT_EXP_CAP: f64 = 700.0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MaxwellianError {
    #[error("amplitude r0 must be strictly positive, got {0}")]
    NonPositiveAmplitude(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("exponent {exponent} exceeds overflow cap {cap}")]
    Overflow { exponent: f64, cap: f64 },
    #[error("t = {t} is outside the positivity window ({lo}, {hi}) of a(t)")]
    OutsidePositivityWindow { t: f64, lo: f64, hi: f64 },
}

/// One evaluation point of the phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub t: f64,
    pub x: DVector<f64>,
    pub v: DVector<f64>,
}

impl EvalPoint {
    pub fn new(t: f64, x: DVector<f64>, v: DVector<f64>) -> EvalPoint {
        assert_eq!(x.len(), v.len(), "position/velocity dimension mismatch");
        EvalPoint { t, x, v }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxwellianParams {
    pub r0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda0: Skew,
    pub w1: DVector<f64>,
    pub w2: DVector<f64>,
}

impl MaxwellianParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        r0: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        lambda0: Skew,
        w1: DVector<f64>,
        w2: DVector<f64>,
    ) -> Result<MaxwellianParams, MaxwellianError> {
        if !(r0 > 0.0) {
            return Err(MaxwellianError::NonPositiveAmplitude(r0));
        }
        let dim = lambda0.dim();
        for w in [&w1, &w2] {
            if w.len() != dim {
                return Err(MaxwellianError::DimensionMismatch {
                    expected: dim,
                    found: w.len(),
                });
            }
        }
        Ok(MaxwellianParams {
            r0,
            alpha,
            beta,
            gamma,
            lambda0,
            w1,
            w2,
        })
    }

    /// The global Maxwellian `r0 exp(-gamma |v|^2)`.
    pub fn global(dim: usize, r0: f64, gamma: f64) -> MaxwellianParams {
        MaxwellianParams::new(
            r0,
            0.0,
            0.0,
            gamma,
            Skew::zero(dim),
            DVector::zeros(dim),
            DVector::zeros(dim),
        )
        .expect("global Maxwellian parameters are always valid")
    }

    pub fn dim(&self) -> usize {
        self.lambda0.dim()
    }

    /// The exponent `E(t,x,v)`; `m = r0 exp(E)`.
    pub fn exponent(&self, p: &EvalPoint) -> f64 {
        let y = &p.x - &p.v * p.t;
        // (L(x - tv)).v = (Lx).v by skewness, but we evaluate the stated form.
        -self.alpha * y.norm_squared() + self.beta * y.dot(&p.v)
            - self.gamma * p.v.norm_squared()
            + 2.0 * self.lambda0.apply_dot(&y, &p.v)
            - 2.0 * self.w1.dot(&y)
            + 2.0 * self.w2.dot(&p.v)
    }

    pub fn eval(&self, p: &EvalPoint) -> Result<f64, MaxwellianError> {
        self.eval_with_cap(p, DEFAULT_EXP_CAP)
    }

    pub fn eval_with_cap(&self, p: &EvalPoint, cap: f64) -> Result<f64, MaxwellianError> {
        let e = self.exponent(p);
        if e > cap {
            return Err(MaxwellianError::Overflow { exponent: e, cap });
        }
        Ok(self.r0 * e.exp())
    }

    /// `d_t m + v . grad_x m` from analytic partial derivatives of the
    /// exponent. Identically zero in exact arithmetic; the returned value is
    /// the rounding-level residual of the two derivative routes.
    pub fn transport_residual(&self, p: &EvalPoint) -> f64 {
        let y = &p.x - &p.v * p.t;
        // dE/dt = 2 alpha y.v - beta |v|^2 - 2 (L v).v + 2 w1.v
        let de_dt = 2.0 * self.alpha * y.dot(&p.v) - self.beta * p.v.norm_squared()
            - 2.0 * self.lambda0.apply_dot(&p.v, &p.v)
            + 2.0 * self.w1.dot(&p.v);
        // grad_x E = -2 alpha y + beta v - 2 L v - 2 w1
        let grad = -&y * (2.0 * self.alpha) + &p.v * self.beta
            - self.lambda0.apply(&p.v) * 2.0
            - &self.w1 * 2.0;
        let m = self.r0 * self.exponent(p).exp();
        m * (de_dt + grad.dot(&p.v))
    }

    pub fn factored(&self) -> FactoredForm {
        FactoredForm::new(self.clone())
    }
}

/// Maximal open interval containing `t = 0` on which `a(t) > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityWindow {
    pub lo: f64,
    pub hi: f64,
}

impl PositivityWindow {
    pub fn contains(&self, t: f64) -> bool {
        self.lo < t && t < self.hi
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    fn from_quadratic(alpha: f64, beta: f64, gamma: f64) -> PositivityWindow {
        const EMPTY: PositivityWindow = PositivityWindow { lo: 0.0, hi: 0.0 };
        let full = PositivityWindow {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        };
        if alpha == 0.0 {
            if beta == 0.0 {
                return if gamma > 0.0 { full } else { EMPTY };
            }
            // linear: positive on one side of the root
            if gamma <= 0.0 {
                return EMPTY;
            }
            let root = -gamma / beta;
            return if beta > 0.0 {
                PositivityWindow {
                    lo: root,
                    hi: f64::INFINITY,
                }
            } else {
                PositivityWindow {
                    lo: f64::NEG_INFINITY,
                    hi: root,
                }
            };
        }
        let disc = beta * beta - 4.0 * alpha * gamma;
        if disc < 0.0 {
            return if alpha > 0.0 { full } else { EMPTY };
        }
        let sq = disc.sqrt();
        let (r1, r2) = {
            let a = (-beta - sq) / (2.0 * alpha);
            let b = (-beta + sq) / (2.0 * alpha);
            (a.min(b), a.max(b))
        };
        if alpha > 0.0 {
            // positive outside [r1, r2]
            if r1 > 0.0 {
                PositivityWindow {
                    lo: f64::NEG_INFINITY,
                    hi: r1,
                }
            } else if r2 < 0.0 {
                PositivityWindow {
                    lo: r2,
                    hi: f64::INFINITY,
                }
            } else {
                EMPTY
            }
        } else {
            // positive inside (r1, r2)
            if r1 < 0.0 && 0.0 < r2 {
                PositivityWindow { lo: r1, hi: r2 }
            } else {
                EMPTY
            }
        }
    }
}

/// Result of factoring `m` at one `(t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factored {
    /// Density via the peak of `m` over `v`: `rho = m(t, x, u)`.
    pub rho: f64,
    /// Density via the explicit closed formula; agrees with `rho` to rounding.
    pub rho_formula: f64,
    /// Temperature coefficient `a(t)`.
    pub a: f64,
    /// Bulk velocity `u(t, x)`.
    pub u: DVector<f64>,
}

/// Residuals of the five coefficient-equation groups, each normalized by the
/// magnitude of its constituent terms.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeResiduals {
    pub groups: [f64; 5],
}

impl PdeResiduals {
    pub fn max(&self) -> f64 {
        self.groups.iter().cloned().fold(0.0, f64::max)
    }
}

/// The factored representation `rho(t,x) exp(-a(t) |v - u(t,x)|^2)`.
#[derive(Debug, Clone)]
pub struct FactoredForm {
    params: MaxwellianParams,
    window: PositivityWindow,
}

impl FactoredForm {
    pub fn new(params: MaxwellianParams) -> FactoredForm {
        let window = PositivityWindow::from_quadratic(params.alpha, params.beta, params.gamma);
        FactoredForm { params, window }
    }

    pub fn params(&self) -> &MaxwellianParams {
        &self.params
    }

    pub fn positivity_window(&self) -> PositivityWindow {
        self.window
    }

    /// `a(t) = alpha t^2 + beta t + gamma`.
    pub fn sigma0(&self, t: f64) -> f64 {
        (self.params.alpha * t + self.params.beta) * t + self.params.gamma
    }

    pub fn sigma0_prime(&self, t: f64) -> f64 {
        2.0 * self.params.alpha * t + self.params.beta
    }

    /// `C(t) = (t w1 + w2) / a(t)`.
    pub fn c_vec(&self, t: f64) -> DVector<f64> {
        (&self.params.w1 * t + &self.params.w2) / self.sigma0(t)
    }

    pub fn c_prime(&self, t: f64) -> DVector<f64> {
        let s = self.sigma0(t);
        let sp = self.sigma0_prime(t);
        &self.params.w1 / s - self.c_vec(t) * (sp / s)
    }

    fn c_second(&self, t: f64) -> DVector<f64> {
        // from (a(t) C)'' = 0: a C'' + 2 a' C' + a'' C = 0
        let s = self.sigma0(t);
        let sp = self.sigma0_prime(t);
        let spp = 2.0 * self.params.alpha;
        -(self.c_prime(t) * (2.0 * sp) + self.c_vec(t) * spp) / s
    }

    /// `rho0(t) = r0 exp(|t w1 + w2|^2 / a(t))`.
    pub fn rho0(&self, t: f64) -> f64 {
        let n = &self.params.w1 * t + &self.params.w2;
        self.params.r0 * (n.norm_squared() / self.sigma0(t)).exp()
    }

    /// `phi = (a'/2a)^2 + (a'/2a)'`; `a^2 phi` is the constant
    /// `(4 alpha gamma - beta^2)/4`.
    pub fn phi(&self, t: f64) -> f64 {
        let s = self.sigma0(t);
        let sp = self.sigma0_prime(t);
        let spp = 2.0 * self.params.alpha;
        let q = sp / (2.0 * s);
        q * q + (s * spp - sp * sp) / (2.0 * s * s)
    }

    fn check_window(&self, t: f64) -> Result<(), MaxwellianError> {
        if self.window.contains(t) && self.sigma0(t) > 0.0 {
            Ok(())
        } else {
            Err(MaxwellianError::OutsidePositivityWindow {
                t,
                lo: self.window.lo,
                hi: self.window.hi,
            })
        }
    }

    /// `u(t,x) = (1/a) L x + (a'/2a) x + C(t)`.
    pub fn velocity(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>, MaxwellianError> {
        self.check_window(t)?;
        let s = self.sigma0(t);
        let sp = self.sigma0_prime(t);
        Ok(self.params.lambda0.apply(x) / s + x * (sp / (2.0 * s)) + self.c_vec(t))
    }

    /// Both density routes plus `a` and `u` at `(t, x)`.
    pub fn factor(&self, t: f64, x: &DVector<f64>) -> Result<Factored, MaxwellianError> {
        self.check_window(t)?;
        let u = self.velocity(t, x)?;
        let a = self.sigma0(t);
        let rho = self
            .params
            .eval_with_cap(&EvalPoint::new(t, x.clone(), u.clone()), f64::INFINITY)?;
        // combine the exponents before exp: the two factors can overflow
        // individually near the window edge while their product is fine
        let n = &self.params.w1 * t + &self.params.w2;
        let log_rho0_over_r0 = n.norm_squared() / self.sigma0(t);
        let rho_formula =
            self.params.r0 * (log_rho0_over_r0 + self.log_density_shape(t, x)).exp();
        Ok(Factored {
            rho,
            rho_formula,
            a,
            u,
        })
    }

    /// `G(t,x) = log(rho / rho0) = -x.(M x) - 2 (L C).x - a'(C.x) - 2a(C'.x)`
    /// with `M = (1/a) L^2 + a phi I`.
    fn log_density_shape(&self, t: f64, x: &DVector<f64>) -> f64 {
        let s = self.sigma0(t);
        let sp = self.sigma0_prime(t);
        let c = self.c_vec(t);
        let cp = self.c_prime(t);
        let mx = self.apply_m(t, x);
        -x.dot(&mx) - 2.0 * self.params.lambda0.apply_dot(&c, x) - sp * c.dot(x)
            - 2.0 * s * cp.dot(x)
    }

    fn apply_m(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let s = self.sigma0(t);
        let lx = self.params.lambda0.apply(x);
        self.params.lambda0.apply(&lx) / s + x * (s * self.phi(t))
    }

    fn grad_log_rho(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        // M is symmetric (L^2 is), so grad(-x.Mx) = -2 M x.
        let s = self.sigma0(t);
        let sp = self.sigma0_prime(t);
        let c = self.c_vec(t);
        let cp = self.c_prime(t);
        -self.apply_m(t, x) * 2.0 - self.params.lambda0.apply(&c) * 2.0 - c * sp - cp * (2.0 * s)
    }

    fn dt_log_rho(&self, t: f64, x: &DVector<f64>) -> f64 {
        let s = self.sigma0(t);
        let sp = self.sigma0_prime(t);
        let spp = 2.0 * self.params.alpha;
        let c = self.c_vec(t);
        let cp = self.c_prime(t);
        let cpp = self.c_second(t);

        // rho0'/rho0 = (a |C|^2)' = a'|C|^2 + 2a C.C'
        let dlog_rho0 = sp * c.norm_squared() + 2.0 * s * c.dot(&cp);

        // d/dt of M: -(a'/a^2) L^2 + (a phi)' I, with
        // phi' = 2 q q' + q'' for q = a'/(2a).
        let q = sp / (2.0 * s);
        let qp = (s * spp - sp * sp) / (2.0 * s * s);
        let qpp = (-3.0 * s * sp * spp + 2.0 * sp * sp * sp) / (2.0 * s * s * s);
        let phi = q * q + qp;
        let phi_prime = 2.0 * q * qp + qpp;
        let s_phi_prime = sp * phi + s * phi_prime;
        let lx = self.params.lambda0.apply(x);
        let llx = self.params.lambda0.apply(&lx);
        let x_mprime_x = -sp / (s * s) * x.dot(&llx) + s_phi_prime * x.norm_squared();

        let dt_shape = -x_mprime_x - 2.0 * self.params.lambda0.apply_dot(&cp, x)
            - spp * c.dot(x)
            - 3.0 * sp * cp.dot(x)
            - 2.0 * s * cpp.dot(x);
        dlog_rho0 + dt_shape
    }

    /// Evaluate the five coefficient-equation groups at `(t, x)` from the
    /// analytic derivatives of the factored `(rho, a, u)`. Each group is
    /// returned normalized by the sum of magnitudes of its terms, so the
    /// contract is "rounding-level for every parameter choice".
    pub fn pde_residuals(&self, t: f64, x: &DVector<f64>) -> Result<PdeResiduals, MaxwellianError> {
        self.check_window(t)?;
        let dim = self.params.dim();
        let s = self.sigma0(t);
        let sp = self.sigma0_prime(t);
        let spp = 2.0 * self.params.alpha;

        let u = self.velocity(t, x)?;
        let jac = self.params.lambda0.to_matrix() / s
            + DMatrix::identity(dim, dim) * (sp / (2.0 * s));

        let n = &self.params.w1 * t + &self.params.w2;
        let rho =
            self.params.r0 * (n.norm_squared() / s + self.log_density_shape(t, x)).exp();
        let grad_rho = self.grad_log_rho(t, x) * rho;
        let dt_rho = self.dt_log_rho(t, x) * rho;

        // du/dt = -(a'/a^2) L x + q' x + C'
        let q_prime = (s * spp - sp * sp) / (2.0 * s * s);
        let du_dt =
            self.params.lambda0.apply(x) * (-sp / (s * s)) + x * q_prime + self.c_prime(t);

        let norm = |residual: f64, scale: f64| residual.abs() / (scale + f64::MIN_POSITIVE);

        // group 1: rho * d_{x_i} a = 0; a has no x-dependence by construction.
        let g1 = 0.0;

        // group 2: rho [ u.grad a + d_t a - 2 a (d_{x_i} u_i) ] per i
        let mut g2: f64 = 0.0;
        for i in 0..dim {
            let r = rho * (sp - 2.0 * s * jac[(i, i)]);
            let scale = rho.abs() * (sp.abs() + 2.0 * s.abs() * jac[(i, i)].abs());
            g2 = g2.max(norm(r, scale));
        }

        // group 3: rho a [ d_{x_i} u_j + d_{x_j} u_i ] for i < j
        let mut g3: f64 = 0.0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let r = rho * s * (jac[(i, j)] + jac[(j, i)]);
                let scale = (rho * s).abs() * (jac[(i, j)].abs() + jac[(j, i)].abs());
                g3 = g3.max(norm(r, scale));
            }
        }

        // group 4: 2 rho a grad(u_i).u + 2 rho a d_t u_i + d_{x_i} rho per i
        let mut g4: f64 = 0.0;
        for i in 0..dim {
            let grad_ui_dot_u: f64 = (0..dim).map(|j| jac[(i, j)] * u[j]).sum();
            let t1 = 2.0 * rho * s * grad_ui_dot_u;
            let t2 = 2.0 * rho * s * du_dt[i];
            let t3 = grad_rho[i];
            g4 = g4.max(norm(t1 + t2 + t3, t1.abs() + t2.abs() + t3.abs()));
        }

        // group 5: d_t rho + u.grad rho
        let t2 = u.dot(&grad_rho);
        let g5 = norm(dt_rho + t2, dt_rho.abs() + t2.abs());

        Ok(PdeResiduals {
            groups: [g1, g2, g3, g4, g5],
        })
    }
}
