//! Domains, boundary sampling, outward normals, and the two wall laws.
//!
//! Built-in shapes sample their boundary parametrically and carry closed-form
//! normals; DSL-backed shapes (implicit surfaces, helical sweeps, generalized
//! cylinders) project random points onto the zero level set by Newton steps
//! along the gradient and take `grad g / |grad g|` as the normal. Constraint
//! assembly only reads points and normals, so normal orientation is free to
//! follow the gradient where "outward" has no meaning.

use crate::skew::quarter_turn;
use crate::surface::{Dual, EvalError, SurfaceExpr};
use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

/// Tangential sampling extent for unbounded shapes (planes, cylinders, ...).
const EXTENT: f64 = 2.0;
/// Relative on-surface tolerance targeted by Newton projection.
const PROJECT_TOL: f64 = 1e-12;
const PROJECT_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Error)]
pub enum GeometryError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degenerate gradient (|grad g| < 1e-12) at {at:?}")]
    DegenerateGradient { at: Vec<f64> },
    #[error("projection onto the surface failed: {accepted}/{requested} points after {attempts} attempts")]
    ProjectionFailed {
        requested: usize,
        accepted: usize,
        attempts: usize,
    },
    #[error("expression evaluation failed: {0}")]
    Eval(#[from] EvalError),
}

/// A boundary point with its unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySample {
    pub x: DVector<f64>,
    pub n: DVector<f64>,
}

/// Specular reflection `v' = v - 2 (v.n) n`; preserves `|v|`.
pub fn specular_reflect(v: &DVector<f64>, n: &DVector<f64>) -> DVector<f64> {
    v - n * (2.0 * v.dot(n))
}

/// Bounce-back reflection `v' = -v`.
pub fn bounce_back(v: &DVector<f64>) -> DVector<f64> {
    -v
}

#[derive(Debug, Clone)]
pub enum Shape {
    /// Interior `x.n < offset`; boundary is the line/plane `x.n = offset`.
    HalfSpace { normal: DVector<f64>, offset: f64 },
    /// Interior between the two parallel planes `x.n = offset1|offset2`.
    Slab {
        normal: DVector<f64>,
        offset1: f64,
        offset2: f64,
    },
    /// Disk (d=2) or ball (d=3); boundary circle/sphere.
    Ball { center: DVector<f64>, radius: f64 },
    /// Region between two concentric circles (d=2) or spheres (d=3).
    Annulus {
        center: DVector<f64>,
        r_inner: f64,
        r_outer: f64,
    },
    /// Infinite cylinder of revolution (d=3 only).
    Cylinder {
        axis_point: DVector<f64>,
        axis_dir: DVector<f64>,
        radius: f64,
    },
    /// Region between two coaxial cylinders of revolution (d=3 only).
    CoaxialCylinders {
        axis_point: DVector<f64>,
        axis_dir: DVector<f64>,
        r_inner: f64,
        r_outer: f64,
    },
    /// Axis-aligned ellipse (d=2) or ellipsoid (d=3).
    Ellipsoid {
        center: DVector<f64>,
        semi_axes: DVector<f64>,
    },
    /// Torus of revolution (d=3 only).
    Torus {
        center: DVector<f64>,
        axis_dir: DVector<f64>,
        major_radius: f64,
        minor_radius: f64,
    },
    /// Sweep of a meridian profile curve under the screw motion of axial
    /// advance `pitch` per radian (shift `2 pi pitch` per turn). The profile
    /// expression uses `x` = distance from the axis, `y` = co-rotating height.
    Helical {
        axis_point: DVector<f64>,
        axis_dir: DVector<f64>,
        pitch: f64,
        profile: SurfaceExpr,
        profile_bbox: ([f64; 2], [f64; 2]),
    },
    /// Union of parallel lines through a cross-section curve (d=3 only).
    GeneralizedCylinder {
        direction: DVector<f64>,
        cross_section: SurfaceExpr,
        profile_bbox: ([f64; 2], [f64; 2]),
    },
    /// Arbitrary implicit surface, sampled inside a bounding box.
    Implicit {
        expr: SurfaceExpr,
        bbox_lo: DVector<f64>,
        bbox_hi: DVector<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct Domain {
    dim: usize,
    shape: Shape,
}

fn unit(v: DVector<f64>, what: &str) -> Result<DVector<f64>, GeometryError> {
    let n = v.norm();
    if n < 1e-300 {
        return Err(GeometryError::InvalidShape(format!("{what} must be nonzero")));
    }
    Ok(v / n)
}

/// Orthonormal basis of the plane perpendicular to the unit vector `u`
/// (d = 3), right-handed: `e1 ^ e2 = u`.
fn perp_frame(u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let pick = (0..3)
        .min_by(|&a, &b| u[a].abs().partial_cmp(&u[b].abs()).unwrap())
        .unwrap();
    let mut k = DVector::zeros(3);
    k[pick] = 1.0;
    let e1 = {
        let c = crate::skew::cross3(u, &k);
        let n = c.norm();
        c / n
    };
    let e2 = crate::skew::cross3(u, &e1);
    (e1, e2)
}

impl Domain {
    pub fn new(dim: usize, shape: Shape) -> Result<Domain, GeometryError> {
        if dim != 2 && dim != 3 {
            return Err(GeometryError::InvalidShape(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        let expect = |v: &DVector<f64>, what: &str| -> Result<(), GeometryError> {
            if v.len() != dim {
                return Err(GeometryError::InvalidShape(format!(
                    "{what} has length {}, expected {dim}",
                    v.len()
                )));
            }
            Ok(())
        };
        let positive = |r: f64, what: &str| -> Result<(), GeometryError> {
            if r > 0.0 {
                Ok(())
            } else {
                Err(GeometryError::InvalidShape(format!(
                    "{what} must be positive, got {r}"
                )))
            }
        };
        let three_d_only = |what: &str| -> Result<(), GeometryError> {
            if dim == 3 {
                Ok(())
            } else {
                Err(GeometryError::InvalidShape(format!("{what} requires d = 3")))
            }
        };

        let shape = match shape {
            Shape::HalfSpace { normal, offset } => {
                expect(&normal, "normal")?;
                Shape::HalfSpace {
                    normal: unit(normal, "normal")?,
                    offset,
                }
            }
            Shape::Slab {
                normal,
                offset1,
                offset2,
            } => {
                expect(&normal, "normal")?;
                if offset1 == offset2 {
                    return Err(GeometryError::InvalidShape(
                        "slab offsets must differ".into(),
                    ));
                }
                Shape::Slab {
                    normal: unit(normal, "normal")?,
                    offset1: offset1.min(offset2),
                    offset2: offset1.max(offset2),
                }
            }
            Shape::Ball { center, radius } => {
                expect(&center, "center")?;
                positive(radius, "radius")?;
                Shape::Ball { center, radius }
            }
            Shape::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                expect(&center, "center")?;
                positive(r_inner, "inner radius")?;
                if r_outer <= r_inner {
                    return Err(GeometryError::InvalidShape(
                        "outer radius must exceed inner radius".into(),
                    ));
                }
                Shape::Annulus {
                    center,
                    r_inner,
                    r_outer,
                }
            }
            Shape::Cylinder {
                axis_point,
                axis_dir,
                radius,
            } => {
                three_d_only("cylinder")?;
                expect(&axis_point, "axis point")?;
                expect(&axis_dir, "axis direction")?;
                positive(radius, "radius")?;
                Shape::Cylinder {
                    axis_point,
                    axis_dir: unit(axis_dir, "axis direction")?,
                    radius,
                }
            }
            Shape::CoaxialCylinders {
                axis_point,
                axis_dir,
                r_inner,
                r_outer,
            } => {
                three_d_only("coaxial cylinders")?;
                expect(&axis_point, "axis point")?;
                expect(&axis_dir, "axis direction")?;
                positive(r_inner, "inner radius")?;
                if r_outer <= r_inner {
                    return Err(GeometryError::InvalidShape(
                        "outer radius must exceed inner radius".into(),
                    ));
                }
                Shape::CoaxialCylinders {
                    axis_point,
                    axis_dir: unit(axis_dir, "axis direction")?,
                    r_inner,
                    r_outer,
                }
            }
            Shape::Ellipsoid { center, semi_axes } => {
                expect(&center, "center")?;
                expect(&semi_axes, "semi-axes")?;
                for i in 0..dim {
                    positive(semi_axes[i], "semi-axis")?;
                }
                Shape::Ellipsoid { center, semi_axes }
            }
            Shape::Torus {
                center,
                axis_dir,
                major_radius,
                minor_radius,
            } => {
                three_d_only("torus")?;
                expect(&center, "center")?;
                expect(&axis_dir, "axis direction")?;
                positive(minor_radius, "minor radius")?;
                if major_radius <= minor_radius {
                    return Err(GeometryError::InvalidShape(
                        "major radius must exceed minor radius".into(),
                    ));
                }
                Shape::Torus {
                    center,
                    axis_dir: unit(axis_dir, "axis direction")?,
                    major_radius,
                    minor_radius,
                }
            }
            Shape::Helical {
                axis_point,
                axis_dir,
                pitch,
                profile,
                profile_bbox,
            } => {
                three_d_only("helical surface")?;
                expect(&axis_point, "axis point")?;
                expect(&axis_dir, "axis direction")?;
                if profile.dim() != 2 {
                    return Err(GeometryError::InvalidShape(
                        "helical profile must be a 2-variable expression".into(),
                    ));
                }
                Shape::Helical {
                    axis_point,
                    axis_dir: unit(axis_dir, "axis direction")?,
                    pitch,
                    profile,
                    profile_bbox,
                }
            }
            Shape::GeneralizedCylinder {
                direction,
                cross_section,
                profile_bbox,
            } => {
                three_d_only("generalized cylinder")?;
                expect(&direction, "direction")?;
                if cross_section.dim() != 2 {
                    return Err(GeometryError::InvalidShape(
                        "cross-section must be a 2-variable expression".into(),
                    ));
                }
                Shape::GeneralizedCylinder {
                    direction: unit(direction, "direction")?,
                    cross_section,
                    profile_bbox,
                }
            }
            Shape::Implicit {
                expr,
                bbox_lo,
                bbox_hi,
            } => {
                expect(&bbox_lo, "bounding box")?;
                expect(&bbox_hi, "bounding box")?;
                if expr.dim() != dim {
                    return Err(GeometryError::InvalidShape(format!(
                        "expression uses {} variables, domain is {dim}-dimensional",
                        expr.dim()
                    )));
                }
                for i in 0..dim {
                    if !(bbox_lo[i] < bbox_hi[i]) {
                        return Err(GeometryError::InvalidShape(
                            "bounding box must be nonempty".into(),
                        ));
                    }
                }
                Shape::Implicit {
                    expr,
                    bbox_lo,
                    bbox_hi,
                }
            }
        };
        Ok(Domain { dim, shape })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Representative length scale; relative tolerances multiply this.
    pub fn scale(&self) -> f64 {
        match &self.shape {
            Shape::HalfSpace { offset, .. } => offset.abs().max(1.0),
            Shape::Slab { offset1, offset2, .. } => offset1.abs().max(offset2.abs()).max(1.0),
            Shape::Ball { center, radius } => center.norm() + radius,
            Shape::Annulus { center, r_outer, .. } => center.norm() + r_outer,
            Shape::Cylinder {
                axis_point, radius, ..
            } => axis_point.norm() + radius + EXTENT,
            Shape::CoaxialCylinders {
                axis_point, r_outer, ..
            } => axis_point.norm() + r_outer + EXTENT,
            Shape::Ellipsoid { center, semi_axes } => center.norm() + semi_axes.amax(),
            Shape::Torus {
                center,
                major_radius,
                minor_radius,
                ..
            } => center.norm() + major_radius + minor_radius,
            Shape::Helical {
                axis_point,
                pitch,
                profile_bbox,
                ..
            } => {
                let (lo, hi) = profile_bbox;
                let reach = lo[0].abs().max(hi[0].abs()).max(lo[1].abs()).max(hi[1].abs());
                axis_point.norm() + reach + pitch.abs() * PI + 1.0
            }
            Shape::GeneralizedCylinder { profile_bbox, .. } => {
                let (lo, hi) = profile_bbox;
                lo[0].abs().max(hi[0].abs()).max(lo[1].abs()).max(hi[1].abs()) + EXTENT
            }
            Shape::Implicit { bbox_lo, bbox_hi, .. } => bbox_lo.norm().max(bbox_hi.norm()).max(1.0),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(
            self.shape,
            Shape::Ball { .. }
                | Shape::Annulus { .. }
                | Shape::Ellipsoid { .. }
                | Shape::Torus { .. }
                | Shape::Implicit { .. }
        )
    }

    /// Axis-aligned box containing the closed domain (bounded shapes only).
    pub fn bounding_box(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        match &self.shape {
            Shape::Ball { center, radius } => {
                Some((center.map(|c| c - radius), center.map(|c| c + radius)))
            }
            Shape::Annulus { center, r_outer, .. } => {
                Some((center.map(|c| c - r_outer), center.map(|c| c + r_outer)))
            }
            Shape::Ellipsoid { center, semi_axes } => Some((
                DVector::from_fn(self.dim, |i, _| center[i] - semi_axes[i]),
                DVector::from_fn(self.dim, |i, _| center[i] + semi_axes[i]),
            )),
            Shape::Torus {
                center,
                major_radius,
                minor_radius,
                ..
            } => {
                let reach = major_radius + minor_radius;
                Some((center.map(|c| c - reach), center.map(|c| c + reach)))
            }
            Shape::Implicit { bbox_lo, bbox_hi, .. } => Some((bbox_lo.clone(), bbox_hi.clone())),
            _ => None,
        }
    }

    /// Center of rotational symmetry, when the shape has one.
    pub fn rotation_center(&self) -> Option<DVector<f64>> {
        match &self.shape {
            Shape::Ball { center, .. } | Shape::Annulus { center, .. } => Some(center.clone()),
            _ => None,
        }
    }

    /// Implicit function with interior negative (where an interior exists).
    pub fn implicit(&self, x: &DVector<f64>) -> Result<f64, GeometryError> {
        self.check_dim(x)?;
        match &self.shape {
            Shape::HalfSpace { normal, offset } => Ok(x.dot(normal) - offset),
            Shape::Slab {
                normal,
                offset1,
                offset2,
            } => {
                let h = x.dot(normal);
                Ok((h - offset1) * (h - offset2))
            }
            Shape::Ball { center, radius } => Ok((x - center).norm() - radius),
            Shape::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let r = (x - center).norm();
                Ok((r - r_inner) * (r - r_outer))
            }
            Shape::Cylinder {
                axis_point,
                axis_dir,
                radius,
            } => {
                let xi = x - axis_point;
                let axial = xi.dot(axis_dir);
                Ok((xi.norm_squared() - axial * axial).max(0.0).sqrt() - radius)
            }
            Shape::CoaxialCylinders {
                axis_point,
                axis_dir,
                r_inner,
                r_outer,
            } => {
                let xi = x - axis_point;
                let axial = xi.dot(axis_dir);
                let r = (xi.norm_squared() - axial * axial).max(0.0).sqrt();
                Ok((r - r_inner) * (r - r_outer))
            }
            Shape::Ellipsoid { center, semi_axes } => {
                let mut sum = 0.0;
                for i in 0..self.dim {
                    let y = (x[i] - center[i]) / semi_axes[i];
                    sum += y * y;
                }
                Ok(sum - 1.0)
            }
            Shape::Torus {
                center,
                axis_dir,
                major_radius,
                minor_radius,
            } => {
                let xi = x - center;
                let h = xi.dot(axis_dir);
                let rho = (xi.norm_squared() - h * h).max(0.0).sqrt();
                Ok((rho - major_radius).powi(2) + h * h - minor_radius * minor_radius)
            }
            Shape::Helical { .. } | Shape::GeneralizedCylinder { .. } => {
                Ok(self.implicit_grad(x)?.0)
            }
            Shape::Implicit { expr, .. } => Ok(expr.eval(x.as_slice())?),
        }
    }

    /// Implicit value and gradient.
    pub fn implicit_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>), GeometryError> {
        self.check_dim(x)?;
        match &self.shape {
            Shape::HalfSpace { normal, .. } => Ok((self.implicit(x)?, normal.clone())),
            Shape::Slab {
                normal,
                offset1,
                offset2,
            } => {
                let h = x.dot(normal);
                let g = (h - offset1) * (h - offset2);
                Ok((g, normal * ((h - offset1) + (h - offset2))))
            }
            Shape::Ball { center, .. } => {
                let xi = x - center;
                let r = xi.norm();
                if r < 1e-12 {
                    return Err(GeometryError::DegenerateGradient {
                        at: x.as_slice().to_vec(),
                    });
                }
                Ok((self.implicit(x)?, xi / r))
            }
            Shape::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let xi = x - center;
                let r = xi.norm();
                if r < 1e-12 {
                    return Err(GeometryError::DegenerateGradient {
                        at: x.as_slice().to_vec(),
                    });
                }
                let g = (r - r_inner) * (r - r_outer);
                Ok((g, xi * (((r - r_inner) + (r - r_outer)) / r)))
            }
            Shape::Cylinder {
                axis_point,
                axis_dir,
                ..
            } => {
                let xi = x - axis_point;
                let radial = &xi - axis_dir * xi.dot(axis_dir);
                let r = radial.norm();
                if r < 1e-12 {
                    return Err(GeometryError::DegenerateGradient {
                        at: x.as_slice().to_vec(),
                    });
                }
                Ok((self.implicit(x)?, radial / r))
            }
            Shape::CoaxialCylinders {
                axis_point,
                axis_dir,
                r_inner,
                r_outer,
            } => {
                let xi = x - axis_point;
                let radial = &xi - axis_dir * xi.dot(axis_dir);
                let r = radial.norm();
                if r < 1e-12 {
                    return Err(GeometryError::DegenerateGradient {
                        at: x.as_slice().to_vec(),
                    });
                }
                let g = (r - r_inner) * (r - r_outer);
                Ok((g, radial * (((r - r_inner) + (r - r_outer)) / r)))
            }
            Shape::Ellipsoid { center, semi_axes } => {
                let g = self.implicit(x)?;
                let grad = DVector::from_fn(self.dim, |i, _| {
                    2.0 * (x[i] - center[i]) / (semi_axes[i] * semi_axes[i])
                });
                Ok((g, grad))
            }
            Shape::Torus {
                center,
                axis_dir,
                major_radius,
                ..
            } => {
                let xi = x - center;
                let h = xi.dot(axis_dir);
                let radial = &xi - axis_dir * h;
                let rho = radial.norm();
                if rho < 1e-12 {
                    return Err(GeometryError::DegenerateGradient {
                        at: x.as_slice().to_vec(),
                    });
                }
                let g = self.implicit(x)?;
                let grad = radial * (2.0 * (rho - major_radius) / rho) + axis_dir * (2.0 * h);
                Ok((g, grad))
            }
            Shape::Helical {
                axis_point,
                axis_dir,
                pitch,
                profile,
                ..
            } => {
                let (e1, e2) = perp_frame(axis_dir);
                let xd: Vec<Dual> = (0..3).map(|i| Dual::var(x[i], i)).collect();
                let mut h = Dual::constant(0.0);
                let mut p1 = Dual::constant(0.0);
                let mut p2 = Dual::constant(0.0);
                for i in 0..3 {
                    let xi = xd[i] - Dual::constant(axis_point[i]);
                    h = h + xi * axis_dir[i];
                    p1 = p1 + xi * e1[i];
                    p2 = p2 + xi * e2[i];
                }
                let r = p1
                    .hypot(p2)
                    .ok_or_else(|| GeometryError::DegenerateGradient {
                        at: x.as_slice().to_vec(),
                    })?;
                if r.v < 1e-12 {
                    return Err(GeometryError::DegenerateGradient {
                        at: x.as_slice().to_vec(),
                    });
                }
                let theta = p2.atan2(p1);
                let mut height = h - theta * *pitch;
                if *pitch != 0.0 {
                    // reduce to the principal branch; a constant shift, so the
                    // gradient is untouched away from the cut
                    let period = TAU * pitch.abs();
                    let shift = (height.v / period).round() * period;
                    height = height - Dual::constant(shift);
                }
                let out = profile.eval_dual(&[r, height])?;
                Ok((out.v, DVector::from_row_slice(&out.dx)))
            }
            Shape::GeneralizedCylinder {
                direction,
                cross_section,
                ..
            } => {
                let (e1, e2) = perp_frame(direction);
                let xd: Vec<Dual> = (0..3).map(|i| Dual::var(x[i], i)).collect();
                let mut p1 = Dual::constant(0.0);
                let mut p2 = Dual::constant(0.0);
                for i in 0..3 {
                    p1 = p1 + xd[i] * e1[i];
                    p2 = p2 + xd[i] * e2[i];
                }
                let out = cross_section.eval_dual(&[p1, p2])?;
                Ok((out.v, DVector::from_row_slice(&out.dx)))
            }
            Shape::Implicit { expr, .. } => {
                let (g, grad) = expr.eval_grad(x.as_slice())?;
                Ok((g, DVector::from_vec(grad)))
            }
        }
    }

    /// Unit normal at a boundary point; gradient direction, outward where the
    /// interior convention makes the gradient point outward.
    pub fn normal(&self, x: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
        let (_, grad) = self.implicit_grad(x)?;
        let n = grad.norm();
        if n < 1e-12 {
            return Err(GeometryError::DegenerateGradient {
                at: x.as_slice().to_vec(),
            });
        }
        Ok(grad / n)
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<(), GeometryError> {
        if x.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Draw `count` boundary samples, deterministically for a given seed.
    pub fn sample_boundary(
        &self,
        count: usize,
        seed: u64,
    ) -> Result<Vec<BoundarySample>, GeometryError> {
        assert!(count >= 1, "sample count must be at least 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        match &self.shape {
            Shape::HalfSpace { normal, offset } => {
                for _ in 0..count {
                    let x = self.plane_point(&mut rng, normal, *offset);
                    out.push(BoundarySample {
                        x,
                        n: normal.clone(),
                    });
                }
            }
            Shape::Slab {
                normal,
                offset1,
                offset2,
            } => {
                for i in 0..count {
                    let (offset, sign) = if i % 2 == 0 {
                        (*offset2, 1.0)
                    } else {
                        (*offset1, -1.0)
                    };
                    let x = self.plane_point(&mut rng, normal, offset);
                    out.push(BoundarySample {
                        x,
                        n: normal * sign,
                    });
                }
            }
            Shape::Ball { center, radius } => {
                for _ in 0..count {
                    let dir = self.unit_direction(&mut rng);
                    out.push(BoundarySample {
                        x: center + &dir * *radius,
                        n: dir,
                    });
                }
            }
            Shape::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                for i in 0..count {
                    let dir = self.unit_direction(&mut rng);
                    let (r, sign) = if i % 2 == 0 {
                        (*r_outer, 1.0)
                    } else {
                        (*r_inner, -1.0)
                    };
                    out.push(BoundarySample {
                        x: center + &dir * r,
                        n: dir * sign,
                    });
                }
            }
            Shape::Cylinder {
                axis_point,
                axis_dir,
                radius,
            } => {
                let (e1, e2) = perp_frame(axis_dir);
                for _ in 0..count {
                    let theta = rng.random_range(0.0..TAU);
                    let h = rng.random_range(-EXTENT..EXTENT);
                    let radial = &e1 * theta.cos() + &e2 * theta.sin();
                    out.push(BoundarySample {
                        x: axis_point + axis_dir * h + &radial * *radius,
                        n: radial,
                    });
                }
            }
            Shape::CoaxialCylinders {
                axis_point,
                axis_dir,
                r_inner,
                r_outer,
            } => {
                let (e1, e2) = perp_frame(axis_dir);
                for i in 0..count {
                    let theta = rng.random_range(0.0..TAU);
                    let h = rng.random_range(-EXTENT..EXTENT);
                    let radial = &e1 * theta.cos() + &e2 * theta.sin();
                    let (r, sign) = if i % 2 == 0 {
                        (*r_outer, 1.0)
                    } else {
                        (*r_inner, -1.0)
                    };
                    out.push(BoundarySample {
                        x: axis_point + axis_dir * h + &radial * r,
                        n: radial * sign,
                    });
                }
            }
            Shape::Ellipsoid { center, semi_axes } => {
                for _ in 0..count {
                    let dir = self.unit_direction(&mut rng);
                    let x = DVector::from_fn(self.dim, |i, _| center[i] + semi_axes[i] * dir[i]);
                    let grad = DVector::from_fn(self.dim, |i, _| dir[i] / semi_axes[i]);
                    let n = grad.norm();
                    out.push(BoundarySample { x, n: grad / n });
                }
            }
            Shape::Torus {
                center,
                axis_dir,
                major_radius,
                minor_radius,
            } => {
                let (e1, e2) = perp_frame(axis_dir);
                for _ in 0..count {
                    let phi = rng.random_range(0.0..TAU);
                    let psi = rng.random_range(0.0..TAU);
                    let radial = &e1 * phi.cos() + &e2 * phi.sin();
                    let n = &radial * psi.cos() + axis_dir * psi.sin();
                    let x = center + &radial * *major_radius + &n * *minor_radius;
                    out.push(BoundarySample { x, n });
                }
            }
            Shape::Helical {
                axis_point,
                axis_dir,
                pitch,
                profile,
                profile_bbox,
            } => {
                let (e1, e2) = perp_frame(axis_dir);
                let mut attempts = 0usize;
                let budget = 100 * count;
                while out.len() < count && attempts < budget {
                    attempts += 1;
                    let Some(q) = self.project_profile(&mut rng, profile, profile_bbox) else {
                        continue;
                    };
                    if q[0] < 1e-6 {
                        // profile point on or behind the axis: cylindrical
                        // coordinates degenerate there
                        continue;
                    }
                    let theta = rng.random_range(-PI..PI);
                    let radial = &e1 * theta.cos() + &e2 * theta.sin();
                    let x = axis_point + &radial * q[0] + axis_dir * (q[1] + pitch * theta);
                    match self.normal(&x) {
                        Ok(n) => out.push(BoundarySample { x, n }),
                        Err(_) => continue,
                    }
                }
                if out.len() < count {
                    return Err(GeometryError::ProjectionFailed {
                        requested: count,
                        accepted: out.len(),
                        attempts,
                    });
                }
            }
            Shape::GeneralizedCylinder {
                direction,
                cross_section,
                profile_bbox,
            } => {
                let (e1, e2) = perp_frame(direction);
                let mut attempts = 0usize;
                let budget = 100 * count;
                while out.len() < count && attempts < budget {
                    attempts += 1;
                    let Some(q) = self.project_profile(&mut rng, cross_section, profile_bbox)
                    else {
                        continue;
                    };
                    let s = rng.random_range(-EXTENT..EXTENT);
                    let x = &e1 * q[0] + &e2 * q[1] + direction * s;
                    match self.normal(&x) {
                        Ok(n) => out.push(BoundarySample { x, n }),
                        Err(_) => continue,
                    }
                }
                if out.len() < count {
                    return Err(GeometryError::ProjectionFailed {
                        requested: count,
                        accepted: out.len(),
                        attempts,
                    });
                }
            }
            Shape::Implicit {
                expr,
                bbox_lo,
                bbox_hi,
            } => {
                let tol = PROJECT_TOL * self.scale();
                let mut attempts = 0usize;
                let budget = 100 * count;
                while out.len() < count && attempts < budget {
                    attempts += 1;
                    let start: Vec<f64> = (0..self.dim)
                        .map(|i| rng.random_range(bbox_lo[i]..bbox_hi[i]))
                        .collect();
                    let Some(p) = newton_project(expr, &start, tol) else {
                        continue;
                    };
                    let x = DVector::from_vec(p);
                    match self.normal(&x) {
                        Ok(n) => out.push(BoundarySample { x, n }),
                        Err(_) => continue,
                    }
                }
                if out.len() < count {
                    return Err(GeometryError::ProjectionFailed {
                        requested: count,
                        accepted: out.len(),
                        attempts,
                    });
                }
            }
        }
        Ok(out)
    }

    fn plane_point(
        &self,
        rng: &mut ChaCha8Rng,
        normal: &DVector<f64>,
        offset: f64,
    ) -> DVector<f64> {
        if self.dim == 2 {
            let tau = quarter_turn(normal);
            normal * offset + tau * rng.random_range(-EXTENT..EXTENT)
        } else {
            let (e1, e2) = perp_frame(normal);
            normal * offset
                + e1 * rng.random_range(-EXTENT..EXTENT)
                + e2 * rng.random_range(-EXTENT..EXTENT)
        }
    }

    fn unit_direction(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        if self.dim == 2 {
            let theta = rng.random_range(0.0..TAU);
            DVector::from_vec(vec![theta.cos(), theta.sin()])
        } else {
            loop {
                let v = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
                let n = v.norm();
                if n > 1e-8 {
                    return v / n;
                }
            }
        }
    }

    fn project_profile(
        &self,
        rng: &mut ChaCha8Rng,
        profile: &SurfaceExpr,
        bbox: &([f64; 2], [f64; 2]),
    ) -> Option<Vec<f64>> {
        let (lo, hi) = bbox;
        let start = vec![
            rng.random_range(lo[0]..hi[0]),
            rng.random_range(lo[1]..hi[1]),
        ];
        let scale = lo[0]
            .abs()
            .max(hi[0].abs())
            .max(lo[1].abs())
            .max(hi[1].abs())
            .max(1.0);
        newton_project(profile, &start, PROJECT_TOL * scale)
    }

    /// Smallest flight parameter `s` in `(s_lo, s_hi]` at which the ray
    /// `x + s v` crosses the boundary, or `None` if it stays inside.
    pub fn first_boundary_hit(
        &self,
        x: &DVector<f64>,
        v: &DVector<f64>,
        s_lo: f64,
        s_hi: f64,
    ) -> Option<f64> {
        if s_hi <= s_lo {
            return None;
        }
        let in_range = |s: f64| s > s_lo && s <= s_hi;
        match &self.shape {
            Shape::HalfSpace { normal, offset } => {
                let vn = v.dot(normal);
                if vn == 0.0 {
                    return None;
                }
                let s = (offset - x.dot(normal)) / vn;
                in_range(s).then_some(s)
            }
            Shape::Slab {
                normal,
                offset1,
                offset2,
            } => {
                let vn = v.dot(normal);
                if vn == 0.0 {
                    return None;
                }
                let h = x.dot(normal);
                [(offset1 - h) / vn, (offset2 - h) / vn]
                    .into_iter()
                    .filter(|&s| in_range(s))
                    .min_by(f64::total_cmp)
            }
            Shape::Ball { center, radius } => {
                let xi = x - center;
                smallest_quadratic_root(
                    v.norm_squared(),
                    2.0 * xi.dot(v),
                    xi.norm_squared() - radius * radius,
                    s_lo,
                    s_hi,
                )
            }
            Shape::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let xi = x - center;
                let a = v.norm_squared();
                let b = 2.0 * xi.dot(v);
                let c = xi.norm_squared();
                [r_inner, r_outer]
                    .into_iter()
                    .filter_map(|r| smallest_quadratic_root(a, b, c - r * r, s_lo, s_hi))
                    .min_by(f64::total_cmp)
            }
            Shape::Ellipsoid { center, semi_axes } => {
                let y = DVector::from_fn(self.dim, |i, _| (x[i] - center[i]) / semi_axes[i]);
                let w = DVector::from_fn(self.dim, |i, _| v[i] / semi_axes[i]);
                smallest_quadratic_root(
                    w.norm_squared(),
                    2.0 * y.dot(&w),
                    y.norm_squared() - 1.0,
                    s_lo,
                    s_hi,
                )
            }
            Shape::Cylinder {
                axis_point,
                axis_dir,
                radius,
            } => {
                let xi = x - axis_point;
                let xp = &xi - axis_dir * xi.dot(axis_dir);
                let vp = v - axis_dir * v.dot(axis_dir);
                smallest_quadratic_root(
                    vp.norm_squared(),
                    2.0 * xp.dot(&vp),
                    xp.norm_squared() - radius * radius,
                    s_lo,
                    s_hi,
                )
            }
            Shape::CoaxialCylinders {
                axis_point,
                axis_dir,
                r_inner,
                r_outer,
            } => {
                let xi = x - axis_point;
                let xp = &xi - axis_dir * xi.dot(axis_dir);
                let vp = v - axis_dir * v.dot(axis_dir);
                let a = vp.norm_squared();
                let b = 2.0 * xp.dot(&vp);
                let c = xp.norm_squared();
                [r_inner, r_outer]
                    .into_iter()
                    .filter_map(|r| smallest_quadratic_root(a, b, c - r * r, s_lo, s_hi))
                    .min_by(f64::total_cmp)
            }
            Shape::Torus { .. }
            | Shape::Helical { .. }
            | Shape::GeneralizedCylinder { .. }
            | Shape::Implicit { .. } => self.scan_boundary_hit(x, v, s_lo, s_hi),
        }
    }

    /// Sign-change scan followed by bisection, for shapes without a
    /// closed-form ray intersection.
    fn scan_boundary_hit(
        &self,
        x: &DVector<f64>,
        v: &DVector<f64>,
        s_lo: f64,
        s_hi: f64,
    ) -> Option<f64> {
        let speed = v.norm();
        if speed == 0.0 {
            return None;
        }
        let step = 0.01 * self.scale() / speed;
        let g_at = |s: f64| self.implicit(&(x + v * s)).unwrap_or(f64::NAN);
        let mut s_prev = s_lo;
        let mut g_prev = g_at(s_prev);
        let mut s = s_lo;
        while s < s_hi {
            s = (s + step).min(s_hi);
            let g = g_at(s);
            if g.is_nan() {
                s_prev = s;
                g_prev = g;
                continue;
            }
            if !g_prev.is_nan() && g_prev < 0.0 && g >= 0.0 {
                let (mut a, mut b) = (s_prev, s);
                for _ in 0..50 {
                    let mid = 0.5 * (a + b);
                    if g_at(mid) < 0.0 {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                return Some(0.5 * (a + b));
            }
            s_prev = s;
            g_prev = g;
        }
        None
    }

    /// Whether `x` is inside the closed domain (up to a small tolerance).
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        match self.implicit(x) {
            Ok(g) => g <= 1e-9 * self.scale(),
            Err(_) => false,
        }
    }
}

/// Newton projection of `start` onto `{g = 0}` along the gradient.
fn newton_project(expr: &SurfaceExpr, start: &[f64], tol: f64) -> Option<Vec<f64>> {
    let mut p = start.to_vec();
    for _ in 0..PROJECT_MAX_ITER {
        let (g, grad) = expr.eval_grad(&p).ok()?;
        if g.abs() <= tol {
            return Some(p);
        }
        let norm2: f64 = grad.iter().map(|d| d * d).sum();
        if norm2 < 1e-24 {
            return None;
        }
        let step = g / norm2;
        for (pi, di) in p.iter_mut().zip(&grad) {
            *pi -= step * di;
        }
    }
    None
}

/// Smallest root of `a s^2 + b s + c = 0` in `(s_lo, s_hi]`.
fn smallest_quadratic_root(a: f64, b: f64, c: f64, s_lo: f64, s_hi: f64) -> Option<f64> {
    let mut roots = [f64::NAN; 2];
    let mut count = 0;
    if a == 0.0 {
        if b != 0.0 {
            roots[0] = -c / b;
            count = 1;
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            if b == 0.0 {
                let r = (sq / (2.0 * a)).abs();
                roots = [-r, r];
            } else {
                // stable pairing: avoid cancellation in the small root
                let q = -0.5 * (b + b.signum() * sq);
                roots = [q / a, if q != 0.0 { c / q } else { -b / a }];
            }
            count = 2;
        }
    }
    roots[..count]
        .iter()
        .copied()
        .filter(|s| s.is_finite() && *s > s_lo && *s <= s_hi)
        .min_by(f64::total_cmp)
}
