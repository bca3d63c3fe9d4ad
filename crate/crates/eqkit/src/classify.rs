//! Reading a constraint nullspace back as a geometric symmetry class.
//!
//! The nullspace basis is projected onto its `(alpha, beta, skew, w1, w2)`
//! blocks. Dilations (`alpha`, `beta`) only survive flat boundaries; the rank
//! of the skew block counts independent rotations; pure-translation directions
//! separate slabs (a plane of translations) from generalized cylinders (a
//! line). Axis, center and pitch are recovered from the coupling
//! `w2 = -z ^ y + p z` by least squares.

use crate::constraint::{AdmissibleFamily, ConstraintError, ThetaLayout};
use crate::maxwellian::MaxwellianParams;
use crate::skew::cross3;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Threshold on recovered pitch below which a helical family is reported as a
/// plain surface of revolution (pitch 0).
const PITCH_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SymmetryCase {
    GlobalOnly,
    HalfSpace,
    Slab,
    DiskOrAnnulus,
    CylinderOfRevolution,
    Sphere,
    HelicalSurface,
    GeneralizedCylinder,
    Unrecognized,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DetectedGeometry {
    pub axis_point: Option<Vec<f64>>,
    pub axis_dir: Option<Vec<f64>>,
    pub center: Option<Vec<f64>>,
    pub pitch: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryFlags {
    pub has_alpha_dilation: bool,
    pub has_beta_dilation: bool,
    pub rotation_dims: usize,
    pub translation_dims: usize,
    pub helical_coupling: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryClass {
    pub case: SymmetryCase,
    pub detected: DetectedGeometry,
    pub flags: SymmetryFlags,
}

/// Numerical rank with an absolute singular-value threshold (the inputs are
/// blocks of orthonormal vectors, so scales are O(1)).
fn rank_at(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .filter(|&&s| s > tol)
        .count()
}

struct Blocks {
    layout: ThetaLayout,
    /// skew_len x k
    lambda: DMatrix<f64>,
    /// d x k
    w1: DMatrix<f64>,
    /// d x k
    w2: DMatrix<f64>,
    alpha: DVector<f64>,
    beta: DVector<f64>,
}

fn split_blocks(family: &AdmissibleFamily) -> Blocks {
    let layout = ThetaLayout::new(family.dim);
    let k = family.basis.len();
    let lambda = DMatrix::from_fn(layout.skew_len(), k, |i, j| {
        family.basis[j][layout.skew_range().start + i]
    });
    let w1 = DMatrix::from_fn(family.dim, k, |i, j| {
        family.basis[j][layout.w1_range().start + i]
    });
    let w2 = DMatrix::from_fn(family.dim, k, |i, j| {
        family.basis[j][layout.w2_range().start + i]
    });
    let alpha = DVector::from_fn(k, |j, _| family.basis[j][ThetaLayout::ALPHA]);
    let beta = DVector::from_fn(k, |j, _| family.basis[j][ThetaLayout::BETA]);
    Blocks {
        layout,
        lambda,
        w1,
        w2,
        alpha,
        beta,
    }
}

/// Coefficient combinations spanning the pure-translation subfamily (zero
/// alpha, beta and skew blocks), as columns.
fn translation_combos(family: &AdmissibleFamily, blocks: &Blocks, tol: f64) -> DMatrix<f64> {
    let k = family.basis.len();
    if k == 0 {
        return DMatrix::zeros(0, 0);
    }
    let top_rows = 2 + blocks.layout.skew_len();
    let mut top = DMatrix::zeros(top_rows, k);
    for j in 0..k {
        top[(0, j)] = blocks.alpha[j];
        top[(1, j)] = blocks.beta[j];
        for i in 0..blocks.layout.skew_len() {
            top[(2 + i, j)] = blocks.lambda[(i, j)];
        }
    }
    // pad so all right singular vectors are exposed
    if top.nrows() < k {
        let missing = k - top.nrows();
        let at = top.nrows();
        top = top.insert_rows(at, missing, 0.0);
    }
    let svd = top.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let mut combos: Vec<DVector<f64>> = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol {
            combos.push(v_t.row(i).transpose());
        }
    }
    let m = combos.len();
    DMatrix::from_fn(k, m, |i, j| combos[j][i])
}

/// Spatial span of the pure translations: directions reached by w1 or w2.
fn translation_span(blocks: &Blocks, combos: &DMatrix<f64>, tol: f64) -> (usize, Vec<DVector<f64>>) {
    let d = blocks.layout.dim;
    let m = combos.ncols();
    if m == 0 {
        return (0, Vec::new());
    }
    let w1c = &blocks.w1 * combos;
    let w2c = &blocks.w2 * combos;
    let mut stacked = DMatrix::zeros(d, 2 * m);
    stacked.view_mut((0, 0), (d, m)).copy_from(&w1c);
    stacked.view_mut((0, m), (d, m)).copy_from(&w2c);
    let svd = stacked.clone().svd(true, false);
    let u = svd.u.unwrap();
    let mut dirs = Vec::new();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    for &i in &order {
        if svd.singular_values[i] > tol {
            dirs.push(u.column(i).clone_owned());
        }
    }
    (dirs.len(), dirs)
}

/// Axis direction of a rank-1 skew block (d = 3).
fn rotation_axis(blocks: &Blocks, tol: f64) -> Option<DVector<f64>> {
    let svd = blocks.lambda.clone().svd(true, false);
    let u = svd.u.unwrap();
    let mut best = None;
    let mut best_s = tol;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > best_s {
            best_s = s;
            best = Some(u.column(i).clone_owned());
        }
    }
    best
}

/// Least-squares solve of `z_k ^ y = -w2_k` over the basis vectors that carry
/// a rotation; recovers the point of the rotation axis closest to the origin
/// when the axis direction is also supplied.
fn solve_axis_point(
    family: &AdmissibleFamily,
    blocks: &Blocks,
    axis_dir: Option<&DVector<f64>>,
    tol: f64,
) -> Option<DVector<f64>> {
    let d = blocks.layout.dim;
    let k = family.basis.len();
    if d == 2 {
        // single skew scalar: w2 = -a J y, so y = J w2 / a
        for j in 0..k {
            let a = blocks.lambda[(0, j)];
            if a.abs() > tol {
                let w2 = blocks.w2.column(j);
                return Some(DVector::from_vec(vec![-w2[1] / a, w2[0] / a]));
            }
        }
        return None;
    }
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for j in 0..k {
        let z = DVector::from_vec(vec![
            blocks.lambda[(0, j)],
            blocks.lambda[(1, j)],
            blocks.lambda[(2, j)],
        ]);
        if z.norm() <= tol {
            continue;
        }
        // rows of the cross-product matrix [z]x
        let zx = [
            DVector::from_vec(vec![0.0, -z[2], z[1]]),
            DVector::from_vec(vec![z[2], 0.0, -z[0]]),
            DVector::from_vec(vec![-z[1], z[0], 0.0]),
        ];
        let w2 = blocks.w2.column(j).clone_owned();
        for (row, b) in zx.into_iter().zip([-w2[0], -w2[1], -w2[2]]) {
            rows.push(row);
            rhs.push(b);
        }
    }
    if rows.is_empty() {
        return None;
    }
    let a = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs);
    let y = a.svd(true, true).solve(&b, 1e-12).ok()?;
    // report the axis point closest to the origin
    if let Some(dir) = axis_dir {
        let proj = y.dot(dir);
        Some(&y - dir * proj)
    } else {
        Some(y)
    }
}

/// Pitch of the screw coupling `w2 . z / |z|^2` for the (single) basis vector
/// carrying the rotation.
fn recover_pitch(blocks: &Blocks, tol: f64) -> Option<f64> {
    let k = blocks.w2.ncols();
    let mut best: Option<(f64, f64)> = None;
    for j in 0..k {
        let z = DVector::from_vec(vec![
            blocks.lambda[(0, j)],
            blocks.lambda[(1, j)],
            blocks.lambda[(2, j)],
        ]);
        let zn = z.norm();
        if zn > tol {
            let pitch = blocks.w2.column(j).dot(&z) / (zn * zn);
            if best.map(|(n, _)| zn > n).unwrap_or(true) {
                best = Some((zn, pitch));
            }
        }
    }
    best.map(|(_, p)| p)
}

/// Interpret a nullspace as one of the classification cases.
pub fn classify(family: &AdmissibleFamily) -> SymmetryClass {
    let tol = family.tol.max(1e-12);
    let blocks = split_blocks(family);
    let has_alpha = blocks.alpha.norm() > tol;
    let has_beta = blocks.beta.norm() > tol;
    let rotation_dims = rank_at(&blocks.lambda, tol);
    let combos = translation_combos(family, &blocks, tol);
    let (translation_dims, translation_dirs) = translation_span(&blocks, &combos, tol);

    let mut detected = DetectedGeometry::default();
    let mut helical_coupling = false;

    let case = if family.null_dim == 0 {
        SymmetryCase::GlobalOnly
    } else if has_alpha {
        // dilations survive only flat boundaries
        if family.dim == 3 {
            if let Some(dir) = rotation_axis(&blocks, tol) {
                detected.axis_dir = Some(dir.as_slice().to_vec());
            }
        }
        SymmetryCase::HalfSpace
    } else if family.dim == 2 {
        if rotation_dims >= 1 {
            detected.center = solve_axis_point(family, &blocks, None, tol)
                .map(|c| c.as_slice().to_vec());
            SymmetryCase::DiskOrAnnulus
        } else if translation_dims == 1 {
            detected.axis_dir = Some(translation_dirs[0].as_slice().to_vec());
            SymmetryCase::Slab
        } else {
            SymmetryCase::Unrecognized
        }
    } else {
        match (rotation_dims, translation_dims) {
            (3, 0) => {
                detected.center = solve_axis_point(family, &blocks, None, tol)
                    .map(|c| c.as_slice().to_vec());
                SymmetryCase::Sphere
            }
            (1, 2) => {
                // rotations about the boundary normal plus in-plane shifts
                let axis = rotation_axis(&blocks, tol);
                let plane_ok = axis
                    .as_ref()
                    .map(|a| {
                        translation_dirs
                            .iter()
                            .all(|t| t.dot(a).abs() < 1e-6)
                    })
                    .unwrap_or(false);
                detected.axis_dir = axis.map(|a| a.as_slice().to_vec());
                if plane_ok {
                    SymmetryCase::Slab
                } else {
                    SymmetryCase::Unrecognized
                }
            }
            (1, 1) => {
                let axis = rotation_axis(&blocks, tol);
                let along_axis = axis
                    .as_ref()
                    .map(|a| translation_dirs[0].dot(a).abs() > 1.0 - 1e-6)
                    .unwrap_or(false);
                if along_axis {
                    let axis = axis.unwrap();
                    detected.axis_point = solve_axis_point(family, &blocks, Some(&axis), tol)
                        .map(|p| p.as_slice().to_vec());
                    detected.axis_dir = Some(axis.as_slice().to_vec());
                    SymmetryCase::CylinderOfRevolution
                } else {
                    SymmetryCase::Unrecognized
                }
            }
            (1, 0) => {
                let axis = rotation_axis(&blocks, tol);
                let pitch = recover_pitch(&blocks, tol).unwrap_or(0.0);
                helical_coupling = pitch.abs() > PITCH_EPS;
                if let Some(axis) = axis {
                    detected.axis_point = solve_axis_point(family, &blocks, Some(&axis), tol)
                        .map(|p| p.as_slice().to_vec());
                    detected.axis_dir = Some(axis.as_slice().to_vec());
                }
                // sign convention: pitch of the screw as generated by the
                // rotation's own orientation, so it is basis-sign invariant
                detected.pitch = Some(pitch);
                SymmetryCase::HelicalSurface
            }
            (0, 1) => {
                detected.axis_dir = Some(translation_dirs[0].as_slice().to_vec());
                SymmetryCase::GeneralizedCylinder
            }
            _ => SymmetryCase::Unrecognized,
        }
    };

    SymmetryClass {
        case,
        detected,
        flags: SymmetryFlags {
            has_alpha_dilation: has_alpha,
            has_beta_dilation: has_beta,
            rotation_dims,
            translation_dims,
            helical_coupling,
        },
    }
}

/// Build concrete Maxwellian parameters from family coordinates.
pub fn family_to_maxwellian(
    family: &AdmissibleFamily,
    gamma: f64,
    r0: f64,
    coeffs: &[f64],
) -> Result<MaxwellianParams, ConstraintError> {
    family.to_maxwellian(gamma, r0, coeffs)
}

/// Convenience for tests and the CLI: the line direction `z ^ w2 / |z|^2`
/// recovery is exact for exactly-sampled symmetric shapes.
pub fn axis_point_from_rotation(z: &DVector<f64>, w2: &DVector<f64>) -> DVector<f64> {
    cross3(z, w2) / z.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{assemble, BcKind, DEFAULT_TOL};
    use crate::geometry::{Domain, Shape};
    use crate::surface::parse;
    use nalgebra::DVector;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dv(values: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(values)
    }

    fn family_of(domain: &Domain, bc: BcKind, samples: usize, seed: u64) -> AdmissibleFamily {
        let s = domain.sample_boundary(samples, seed).unwrap();
        assemble(&s, bc, domain.dim()).unwrap().nullspace(DEFAULT_TOL)
    }

    #[test]
    fn disk_classified_with_center() {
        let center = dv(&[0.4, -0.7]);
        let disk = Domain::new(
            2,
            Shape::Ball {
                center: center.clone(),
                radius: 1.2,
            },
        )
        .unwrap();
        let family = family_of(&disk, BcKind::Specular, 256, 42);
        let class = classify(&family);
        assert_eq!(class.case, SymmetryCase::DiskOrAnnulus);
        let found = dv(&class.detected.center.unwrap());
        assert!((found - center).norm() <= 1e-8);
    }

    #[test]
    fn cylinder_classified_with_axis() {
        let cyl = Domain::new(
            3,
            Shape::Cylinder {
                axis_point: dv(&[0.5, -0.3, 0.0]),
                axis_dir: dv(&[1.0, 1.0, 1.0]),
                radius: 0.9,
            },
        )
        .unwrap();
        let family = family_of(&cyl, BcKind::Specular, 256, 42);
        assert_eq!(family.null_dim, 3);
        let class = classify(&family);
        assert_eq!(class.case, SymmetryCase::CylinderOfRevolution);
        let axis = dv(&class.detected.axis_dir.unwrap());
        let truth = dv(&[1.0, 1.0, 1.0]) / 3.0f64.sqrt();
        assert!(
            (axis.dot(&truth).abs() - 1.0).abs() <= 1e-8,
            "axis {axis:?}"
        );
        // axis point: distance from the recovered line point to the true line
        let p = dv(&class.detected.axis_point.unwrap());
        let true_point = dv(&[0.5, -0.3, 0.0]);
        let offset = &p - &true_point;
        let dist = (&offset - &truth * offset.dot(&truth)).norm();
        assert!(dist <= 1e-8, "axis point off the true axis by {dist}");
    }

    #[test]
    fn triaxial_ellipsoid_admits_only_global() {
        let ell = Domain::new(
            3,
            Shape::Ellipsoid {
                center: DVector::zeros(3),
                semi_axes: dv(&[1.0, 1.3, 1.7]),
            },
        )
        .unwrap();
        let family = family_of(&ell, BcKind::Specular, 256, 42);
        let class = classify(&family);
        assert_eq!(class.case, SymmetryCase::GlobalOnly);
    }

    #[test]
    fn sphere_and_spheroid_cases() {
        let center = dv(&[0.2, 0.1, -0.4]);
        let sphere = Domain::new(
            3,
            Shape::Ball {
                center: center.clone(),
                radius: 1.0,
            },
        )
        .unwrap();
        let family = family_of(&sphere, BcKind::Specular, 256, 42);
        assert_eq!(family.null_dim, 3);
        let class = classify(&family);
        assert_eq!(class.case, SymmetryCase::Sphere);
        let found = dv(&class.detected.center.unwrap());
        assert!((found - &center).norm() <= 1e-8);

        let spheroid = Domain::new(
            3,
            Shape::Ellipsoid {
                center: DVector::zeros(3),
                semi_axes: dv(&[1.0, 1.0, 2.0]),
            },
        )
        .unwrap();
        let family = family_of(&spheroid, BcKind::Specular, 256, 42);
        assert_eq!(family.null_dim, 1);
        let class = classify(&family);
        // a surface of revolution: helical with zero pitch
        assert_eq!(class.case, SymmetryCase::HelicalSurface);
        assert!(!class.flags.helical_coupling);
        assert!(class.detected.pitch.unwrap().abs() <= 1e-8);
        let axis = dv(&class.detected.axis_dir.unwrap());
        assert!(axis[2].abs() > 1.0 - 1e-8);
    }

    #[test]
    fn halfspace_slab_and_generalized_cylinder() {
        let hs = Domain::new(
            3,
            Shape::HalfSpace {
                normal: dv(&[0.0, 1.0, 0.0]),
                offset: 1.0,
            },
        )
        .unwrap();
        let class = classify(&family_of(&hs, BcKind::Specular, 256, 1));
        assert_eq!(class.case, SymmetryCase::HalfSpace);
        assert!(class.flags.has_alpha_dilation);
        assert!(class.flags.has_beta_dilation);

        let slab = Domain::new(
            3,
            Shape::Slab {
                normal: dv(&[0.0, 1.0, 0.0]),
                offset1: -0.5,
                offset2: 0.5,
            },
        )
        .unwrap();
        let family = family_of(&slab, BcKind::Specular, 256, 1);
        assert_eq!(family.null_dim, 5);
        let class = classify(&family);
        assert_eq!(class.case, SymmetryCase::Slab);
        assert_eq!(class.flags.rotation_dims, 1);
        assert_eq!(class.flags.translation_dims, 2);

        let gc = Domain::new(
            3,
            Shape::GeneralizedCylinder {
                direction: dv(&[0.0, 0.0, 1.0]),
                cross_section: parse("(x/2)^2 + y^2 - 1", 2).unwrap(),
                profile_bbox: ([-3.0, -2.0], [3.0, 2.0]),
            },
        )
        .unwrap();
        let family = family_of(&gc, BcKind::Specular, 256, 1);
        assert_eq!(family.null_dim, 2);
        let class = classify(&family);
        assert_eq!(class.case, SymmetryCase::GeneralizedCylinder);
        let dir = dv(&class.detected.axis_dir.unwrap());
        assert!(dir[2].abs() > 1.0 - 1e-8);
    }

    #[test]
    fn d2_slab_is_pure_translation() {
        let slab = Domain::new(
            2,
            Shape::Slab {
                normal: dv(&[1.0, 0.0]),
                offset1: 0.0,
                offset2: 1.0,
            },
        )
        .unwrap();
        let family = family_of(&slab, BcKind::Specular, 128, 3);
        assert_eq!(family.null_dim, 2);
        let class = classify(&family);
        assert_eq!(class.case, SymmetryCase::Slab);
        assert_eq!(class.flags.rotation_dims, 0);
        assert_eq!(class.flags.translation_dims, 1);
    }

    #[test]
    fn helical_pitch_recovered() {
        let helical = Domain::new(
            3,
            Shape::Helical {
                axis_point: DVector::zeros(3),
                axis_dir: dv(&[0.0, 0.0, 1.0]),
                pitch: 0.3,
                profile: parse("(x-2)^2 + y^2 - 0.25", 2).unwrap(),
                profile_bbox: ([-3.0, -1.0], [3.0, 1.0]),
            },
        )
        .unwrap();
        let family = family_of(&helical, BcKind::Specular, 256, 42);
        assert_eq!(family.null_dim, 1);
        let class = classify(&family);
        assert_eq!(class.case, SymmetryCase::HelicalSurface);
        assert!(class.flags.helical_coupling);
        let pitch = class.detected.pitch.unwrap();
        assert!(
            (pitch.abs() - 0.3).abs() <= 3e-7,
            "recovered pitch {pitch}"
        );
    }

    #[test]
    fn global_family_builds_global_maxwellian() {
        let ell = Domain::new(
            2,
            Shape::Ellipsoid {
                center: DVector::zeros(2),
                semi_axes: dv(&[2.0, 1.0]),
            },
        )
        .unwrap();
        let family = family_of(&ell, BcKind::Specular, 128, 2);
        let params = family_to_maxwellian(&family, 1.3, 0.7, &[]).unwrap();
        assert_eq!(params.gamma, 1.3);
        assert_eq!(params.r0, 0.7);
        assert_eq!(params.alpha, 0.0);
        assert!(params.lambda0.is_zero());
    }

    #[test]
    fn classification_invariant_under_basis_rotation() {
        let cyl = Domain::new(
            3,
            Shape::Cylinder {
                axis_point: dv(&[0.3, 0.4, 0.0]),
                axis_dir: dv(&[0.0, 1.0, 2.0]),
                radius: 1.1,
            },
        )
        .unwrap();
        let family = family_of(&cyl, BcKind::Specular, 256, 9);
        let base = classify(&family);
        assert_eq!(base.case, SymmetryCase::CylinderOfRevolution);
        let base_axis = dv(&base.detected.axis_dir.clone().unwrap());
        let base_point = dv(&base.detected.axis_point.clone().unwrap());

        // rotate the basis within its span by a random orthogonal matrix
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let k = family.basis.len();
        let random = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0f64));
        let qr = random.qr();
        let q = qr.q();
        let mut rotated = family.clone();
        rotated.basis = (0..k)
            .map(|j| {
                let mut v = DVector::zeros(family.basis[0].len());
                for i in 0..k {
                    v += &family.basis[i] * q[(i, j)];
                }
                v
            })
            .collect();
        let re = classify(&rotated);
        assert_eq!(re.case, base.case);
        let axis = dv(&re.detected.axis_dir.unwrap());
        assert!((axis.dot(&base_axis).abs() - 1.0).abs() <= 1e-8);
        let point = dv(&re.detected.axis_point.unwrap());
        assert!((point - base_point).norm() <= 1e-8);
    }

    #[test]
    fn built_maxwellians_satisfy_transport_and_constraints() {
        use crate::constraint::theta_residual;
        use crate::maxwellian::EvalPoint;

        let disk = Domain::new(
            2,
            Shape::Ball {
                center: dv(&[0.1, 0.2]),
                radius: 1.0,
            },
        )
        .unwrap();
        let family = family_of(&disk, BcKind::Specular, 128, 5);
        let params = family_to_maxwellian(&family, 1.0, 1.0, &[0.8]).unwrap();

        // transport residual at random points
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let p = EvalPoint::new(
                rng.random_range(-1.0..1.0),
                DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0)),
                DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0)),
            );
            let m = params.eval(&p).unwrap();
            assert!(params.transport_residual(&p).abs() <= 1e-10 * m.max(1.0));
        }

        // constraint residual on fresh samples
        let fresh = disk.sample_boundary(128, 99).unwrap();
        let layout = ThetaLayout::new(2);
        let theta = layout.from_params(&params);
        assert!(theta_residual(&theta, &fresh, BcKind::Specular, 2) <= 1e-10);
    }
}
