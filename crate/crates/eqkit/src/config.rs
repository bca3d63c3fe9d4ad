//! TOML file formats: Maxwellian parameters, domains, and affine fields.
//!
//! Parameter files carry `r0, alpha, beta, gamma, w1, w2, lambda0, dim`;
//! `lambda0` is a scalar for d=2 and a 3-array for d=3. Domain files select a
//! shape with `kind` plus shape-specific keys; implicit shapes embed their
//! surface expression as a string. Field files describe one dilation or screw
//! generator for the `trace` subcommand.

use crate::flows::AffineField;
use crate::geometry::{Domain, GeometryError, Shape};
use crate::maxwellian::{MaxwellianError, MaxwellianParams};
use crate::skew::Skew;
use crate::surface::{self, ParseError};
use nalgebra::DVector;
use serde::Deserialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid TOML in {path}: {source}")]
    Toml {
        path: String,
        source: Box<toml::de::Error>,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("invalid surface expression: {0}")]
    Expr(#[from] ParseError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Maxwellian(#[from] MaxwellianError),
}

/// A TOML value that is either one scalar (d=2 skew) or an array (d=3 axis).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

impl ScalarOrVec {
    fn into_skew(self, dim: usize) -> Result<Skew, ConfigError> {
        match (dim, self) {
            (2, ScalarOrVec::Scalar(a)) => Ok(Skew::Planar(a)),
            (3, ScalarOrVec::Vec(v)) if v.len() == 3 => {
                Ok(Skew::Spatial(nalgebra::Vector3::new(v[0], v[1], v[2])))
            }
            (2, ScalarOrVec::Vec(_)) => Err(ConfigError::Invalid(
                "lambda0 must be a scalar when dim = 2".into(),
            )),
            (3, _) => Err(ConfigError::Invalid(
                "lambda0 must be a 3-array when dim = 3".into(),
            )),
            (d, _) => Err(ConfigError::Invalid(format!("unsupported dim {d}"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    dim: usize,
    r0: f64,
    #[serde(default)]
    alpha: f64,
    #[serde(default)]
    beta: f64,
    gamma: f64,
    lambda0: Option<ScalarOrVec>,
    w1: Option<Vec<f64>>,
    w2: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainFile {
    dim: usize,
    kind: String,
    normal: Option<Vec<f64>>,
    offset: Option<f64>,
    offset1: Option<f64>,
    offset2: Option<f64>,
    center: Option<Vec<f64>>,
    radius: Option<f64>,
    r_inner: Option<f64>,
    r_outer: Option<f64>,
    axis_point: Option<Vec<f64>>,
    axis_dir: Option<Vec<f64>>,
    semi_axes: Option<Vec<f64>>,
    major_radius: Option<f64>,
    minor_radius: Option<f64>,
    pitch: Option<f64>,
    profile: Option<String>,
    profile_bbox: Option<[[f64; 2]; 2]>,
    direction: Option<Vec<f64>>,
    cross_section: Option<String>,
    expr: Option<String>,
    bbox_lo: Option<Vec<f64>>,
    bbox_hi: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldFile {
    dim: usize,
    kind: String,
    alpha: Option<f64>,
    lambda0: Option<ScalarOrVec>,
    #[serde(default)]
    beta: f64,
    c: Vec<f64>,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn toml_of<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|source| ConfigError::Toml {
        path: path.display().to_string(),
        source: Box::new(source),
    })
}

fn dvec(v: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(v)
}

fn need<T>(value: Option<T>, kind: &str, key: &str) -> Result<T, ConfigError> {
    value.ok_or_else(|| ConfigError::Invalid(format!("kind \"{kind}\" requires key `{key}`")))
}

pub fn load_params(path: &Path) -> Result<MaxwellianParams, ConfigError> {
    params_from_str(&read(path)?, path)
}

pub fn params_from_str(text: &str, path: &Path) -> Result<MaxwellianParams, ConfigError> {
    let raw: ParamsFile = toml_of(text, path)?;
    if raw.dim != 2 && raw.dim != 3 {
        return Err(ConfigError::Invalid(format!(
            "dim must be 2 or 3, got {}",
            raw.dim
        )));
    }
    let lambda0 = match raw.lambda0 {
        Some(l) => l.into_skew(raw.dim)?,
        None => Skew::zero(raw.dim),
    };
    let zero = vec![0.0; raw.dim];
    let w1 = raw.w1.unwrap_or_else(|| zero.clone());
    let w2 = raw.w2.unwrap_or(zero);
    if w1.len() != raw.dim || w2.len() != raw.dim {
        return Err(ConfigError::Invalid(
            "w1 and w2 must have `dim` entries".into(),
        ));
    }
    Ok(MaxwellianParams::new(
        raw.r0,
        raw.alpha,
        raw.beta,
        raw.gamma,
        lambda0,
        dvec(w1),
        dvec(w2),
    )?)
}

const DEFAULT_PROFILE_BBOX: ([f64; 2], [f64; 2]) = ([-8.0, -8.0], [8.0, 8.0]);

pub fn load_domain(path: &Path) -> Result<Domain, ConfigError> {
    domain_from_str(&read(path)?, path)
}

pub fn domain_from_str(text: &str, path: &Path) -> Result<Domain, ConfigError> {
    let raw: DomainFile = toml_of(text, path)?;
    let dim = raw.dim;
    let kind = raw.kind.as_str();
    let profile_bbox = raw
        .profile_bbox
        .map(|[lo, hi]| (lo, hi))
        .unwrap_or(DEFAULT_PROFILE_BBOX);
    let shape = match kind {
        "half_space" => Shape::HalfSpace {
            normal: dvec(need(raw.normal, kind, "normal")?),
            offset: need(raw.offset, kind, "offset")?,
        },
        "slab" => Shape::Slab {
            normal: dvec(need(raw.normal, kind, "normal")?),
            offset1: need(raw.offset1, kind, "offset1")?,
            offset2: need(raw.offset2, kind, "offset2")?,
        },
        "ball" => Shape::Ball {
            center: dvec(need(raw.center, kind, "center")?),
            radius: need(raw.radius, kind, "radius")?,
        },
        "annulus" => Shape::Annulus {
            center: dvec(need(raw.center, kind, "center")?),
            r_inner: need(raw.r_inner, kind, "r_inner")?,
            r_outer: need(raw.r_outer, kind, "r_outer")?,
        },
        "cylinder" => Shape::Cylinder {
            axis_point: dvec(need(raw.axis_point, kind, "axis_point")?),
            axis_dir: dvec(need(raw.axis_dir, kind, "axis_dir")?),
            radius: need(raw.radius, kind, "radius")?,
        },
        "coaxial_cylinders" => Shape::CoaxialCylinders {
            axis_point: dvec(need(raw.axis_point, kind, "axis_point")?),
            axis_dir: dvec(need(raw.axis_dir, kind, "axis_dir")?),
            r_inner: need(raw.r_inner, kind, "r_inner")?,
            r_outer: need(raw.r_outer, kind, "r_outer")?,
        },
        "ellipsoid" => Shape::Ellipsoid {
            center: dvec(need(raw.center, kind, "center")?),
            semi_axes: dvec(need(raw.semi_axes, kind, "semi_axes")?),
        },
        "torus" => Shape::Torus {
            center: dvec(need(raw.center, kind, "center")?),
            axis_dir: dvec(need(raw.axis_dir, kind, "axis_dir")?),
            major_radius: need(raw.major_radius, kind, "major_radius")?,
            minor_radius: need(raw.minor_radius, kind, "minor_radius")?,
        },
        "helical" => Shape::Helical {
            axis_point: dvec(need(raw.axis_point, kind, "axis_point")?),
            axis_dir: dvec(need(raw.axis_dir, kind, "axis_dir")?),
            pitch: need(raw.pitch, kind, "pitch")?,
            profile: surface::parse(&need(raw.profile, kind, "profile")?, 2)?,
            profile_bbox,
        },
        "generalized_cylinder" => Shape::GeneralizedCylinder {
            direction: dvec(need(raw.direction, kind, "direction")?),
            cross_section: surface::parse(&need(raw.cross_section, kind, "cross_section")?, 2)?,
            profile_bbox,
        },
        "implicit" => Shape::Implicit {
            expr: surface::parse(&need(raw.expr, kind, "expr")?, dim)?,
            bbox_lo: dvec(need(raw.bbox_lo, kind, "bbox_lo")?),
            bbox_hi: dvec(need(raw.bbox_hi, kind, "bbox_hi")?),
        },
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown domain kind \"{other}\""
            )))
        }
    };
    Ok(Domain::new(dim, shape)?)
}

pub fn load_field(path: &Path) -> Result<AffineField, ConfigError> {
    field_from_str(&read(path)?, path)
}

pub fn field_from_str(text: &str, path: &Path) -> Result<AffineField, ConfigError> {
    let raw: FieldFile = toml_of(text, path)?;
    if raw.c.len() != raw.dim {
        return Err(ConfigError::Invalid(
            "field constant `c` must have `dim` entries".into(),
        ));
    }
    match raw.kind.as_str() {
        "dilation" => Ok(AffineField::Dilation {
            alpha: raw.alpha.unwrap_or(0.0),
            c: dvec(raw.c),
        }),
        "screw" => {
            let lambda = match raw.lambda0 {
                Some(l) => l.into_skew(raw.dim)?,
                None => Skew::zero(raw.dim),
            };
            Ok(AffineField::Screw {
                lambda,
                beta: raw.beta,
                c: dvec(raw.c),
            })
        }
        other => Err(ConfigError::Invalid(format!(
            "unknown field kind \"{other}\" (expected \"dilation\" or \"screw\")"
        ))),
    }
}
