//! Flows of the affine symmetry fields and the Lie-bracket tangency test.
//!
//! Two field kinds cover every generator the constraint nullspace can
//! produce: dilation-type `x' = alpha x + c` and screw-type
//! `x' = L x + (beta/2) x + c` with `L` skew. Both have closed-form flows
//! (exponentials and plane/Rodrigues rotations); a classical RK4 integrator
//! serves as the independent oracle. When a generator satisfies a domain's
//! boundary constraint, its flow from any boundary point stays on the
//! boundary; `on_surface_defect` measures that.

use crate::geometry::{BoundarySample, Domain};
use crate::skew::{cross3, Skew};
use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum FlowError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("field decomposition is singular: {0}")]
    SingularFieldDecomposition(String),
    #[error("lie bracket requires two 3-dimensional screw fields")]
    BracketNeedsScrews,
}

/// An affine vector field on R^d.
#[derive(Debug, Clone, PartialEq)]
pub enum AffineField {
    /// `x' = alpha x + c`
    Dilation { alpha: f64, c: DVector<f64> },
    /// `x' = L x + (beta/2) x + c`
    Screw {
        lambda: Skew,
        beta: f64,
        c: DVector<f64>,
    },
}

impl AffineField {
    pub fn dim(&self) -> usize {
        match self {
            AffineField::Dilation { c, .. } => c.len(),
            AffineField::Screw { lambda, .. } => lambda.dim(),
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            AffineField::Dilation { alpha, c } => x * *alpha + c,
            AffineField::Screw { lambda, beta, c } => {
                lambda.apply(x) + x * (beta / 2.0) + c
            }
        }
    }

    pub fn constant_part(&self) -> &DVector<f64> {
        match self {
            AffineField::Dilation { c, .. } | AffineField::Screw { c, .. } => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMethod {
    ClosedForm,
    Rk4,
}

#[derive(Debug, Clone)]
pub struct FlowCurve {
    pub times: Vec<f64>,
    pub points: Vec<DVector<f64>>,
    pub method: FlowMethod,
}

/// Exact flow of the field from `x0`, evaluated at the given times.
pub fn closed_form_flow(
    field: &AffineField,
    x0: &DVector<f64>,
    times: &[f64],
) -> Result<FlowCurve, FlowError> {
    let dim = field.dim();
    if x0.len() != dim {
        return Err(FlowError::DimensionMismatch {
            expected: dim,
            found: x0.len(),
        });
    }
    let eval: Box<dyn Fn(f64) -> DVector<f64>> = match field {
        AffineField::Dilation { alpha, c } => dilation_flow(*alpha, c, x0),
        AffineField::Screw { lambda, beta, c } => {
            if lambda.is_zero() {
                // pure dilation at rate beta/2
                dilation_flow(beta / 2.0, c, x0)
            } else if dim == 2 || *beta != 0.0 {
                // L + (beta/2) I is invertible here: its eigenvalues are
                // beta/2 and beta/2 +- i|z|
                let m = lambda.to_matrix()
                    + nalgebra::DMatrix::identity(dim, dim) * (beta / 2.0);
                let y = m.lu().solve(c).ok_or_else(|| {
                    FlowError::SingularFieldDecomposition(
                        "L + (beta/2) I not invertible".into(),
                    )
                })?;
                let lambda = *lambda;
                let beta = *beta;
                let shifted = x0 + &y;
                Box::new(move |t: f64| {
                    lambda.rotate(t, &shifted) * (beta / 2.0 * t).exp() - &y
                })
            } else {
                // d = 3, beta = 0: split c into axial drift and rotation offset
                let Skew::Spatial(z) = lambda else { unreachable!() };
                let z = DVector::from_vec(vec![z.x, z.y, z.z]);
                let u = &z / z.norm();
                let axial_speed = c.dot(&u);
                let w = c - &u * axial_speed;
                // y solves L y = w: y = (-z / |z|^2) ^ w
                let y = cross3(&(-&z / z.norm_squared()), &w);
                let lambda = *lambda;
                let shifted = x0 + &y;
                Box::new(move |t: f64| {
                    lambda.rotate(t, &shifted) - &y + &u * (axial_speed * t)
                })
            }
        }
    };
    Ok(FlowCurve {
        times: times.to_vec(),
        points: times.iter().map(|&t| eval(t)).collect(),
        method: FlowMethod::ClosedForm,
    })
}

fn dilation_flow(
    alpha: f64,
    c: &DVector<f64>,
    x0: &DVector<f64>,
) -> Box<dyn Fn(f64) -> DVector<f64>> {
    if alpha == 0.0 {
        let x0 = x0.clone();
        let c = c.clone();
        Box::new(move |t: f64| &x0 + &c * t)
    } else {
        let fixed = c / alpha;
        let shifted = x0 + &fixed;
        Box::new(move |t: f64| &shifted * (alpha * t).exp() - &fixed)
    }
}

/// Classical fourth-order Runge-Kutta integration of the field.
pub fn rk4_flow(field: &AffineField, x0: &DVector<f64>, t_end: f64, steps: usize) -> FlowCurve {
    assert!(steps >= 1);
    let h = t_end / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    times.push(0.0);
    points.push(x.clone());
    for i in 0..steps {
        let k1 = field.eval(&x);
        let k2 = field.eval(&(&x + &k1 * (h / 2.0)));
        let k3 = field.eval(&(&x + &k2 * (h / 2.0)));
        let k4 = field.eval(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        times.push((i + 1) as f64 * h);
        points.push(x.clone());
    }
    FlowCurve {
        times,
        points,
        method: FlowMethod::Rk4,
    }
}

/// Maximum normalized implicit residual `|g(x(t))| / scale` along the curve.
pub fn on_surface_defect(curve: &FlowCurve, domain: &Domain) -> f64 {
    let scale = domain.scale();
    curve
        .points
        .iter()
        .map(|p| domain.implicit(p).map(f64::abs).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
        / scale
}

/// Lie bracket of two 3-d screw fields, `[F1, F2] = DF1 F2 - DF2 F1`.
///
/// The sign convention is pinned by the adapted-coordinates example: for a
/// vertical screw of pitch `p` and a second screw of axis offset `rho` along
/// `e1`, inclination `theta` and rate `lambda`, the bracket at `(x, y, z)`
/// is `(sin(theta) rho - cos(theta)(lambda + p), cos(theta) z, -cos(theta) y)`.
pub fn lie_bracket(f1: &AffineField, f2: &AffineField) -> Result<AffineField, FlowError> {
    let (AffineField::Screw {
        lambda: l1,
        beta: b1,
        c: c1,
    }, AffineField::Screw {
        lambda: l2,
        beta: b2,
        c: c2,
    }) = (f1, f2)
    else {
        return Err(FlowError::BracketNeedsScrews);
    };
    let (Skew::Spatial(z1), Skew::Spatial(z2)) = (l1, l2) else {
        return Err(FlowError::BracketNeedsScrews);
    };
    // linear parts A_i = [z_i]x + (b_i/2) I commute with the identity blocks,
    // so [A1, A2] = [z1 ^ z2]x
    let z = z1.cross(z2);
    // constant part: A1 c2 - A2 c1
    let c = cross3(&DVector::from_vec(vec![z1.x, z1.y, z1.z]), c2) + c2 * (b1 / 2.0)
        - cross3(&DVector::from_vec(vec![z2.x, z2.y, z2.z]), c1)
        - c1 * (b2 / 2.0);
    Ok(AffineField::Screw {
        lambda: Skew::Spatial(z),
        beta: 0.0,
        c,
    })
}

/// Maximum over boundary samples of the normalized triple product
/// `|[F1,F2] . (F1 ^ F2)|`; near zero certifies that the two flows are
/// jointly compatible with some common invariant surface through the samples.
pub fn tangency_defect(
    f1: &AffineField,
    f2: &AffineField,
    samples: &[BoundarySample],
) -> Result<f64, FlowError> {
    let bracket = lie_bracket(f1, f2)?;
    const EPS: f64 = 1e-30;
    let mut worst = 0.0f64;
    for s in samples {
        let v1 = f1.eval(&s.x);
        let v2 = f2.eval(&s.x);
        let br = bracket.eval(&s.x);
        let triple = br.dot(&cross3(&v1, &v2)).abs();
        let denom = (br.norm() + EPS) * (v1.norm() * v2.norm() + EPS);
        worst = worst.max(triple / denom);
    }
    Ok(worst)
}
