//! Skew-symmetric matrices stored by their independent entries.
//!
//! A `d x d` skew-symmetric matrix has `d(d-1)/2` free entries. We only ever
//! need `d = 2` (one scalar `a`, the matrix `((0,-a),(a,0))`) and `d = 3`
//! (an axis vector `z`, acting as `x -> z ^ x`). The dense matrix is derived
//! from this storage, never authoritative, so skewness holds exactly.

use nalgebra::{DMatrix, DVector, Vector3};

/// Skew-symmetric linear map in dimension 2 or 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Skew {
    /// `((0, -a), (a, 0))`; positive `a` rotates counterclockwise.
    Planar(f64),
    /// `x -> z ^ x` for the stored axis vector `z`.
    Spatial(Vector3<f64>),
}

impl Skew {
    pub fn zero(dim: usize) -> Skew {
        match dim {
            2 => Skew::Planar(0.0),
            3 => Skew::Spatial(Vector3::zeros()),
            _ => panic!("skew storage only defined for d = 2 or 3, got {dim}"),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Skew::Planar(_) => 2,
            Skew::Spatial(_) => 3,
        }
    }

    /// Number of independent entries: 1 for d=2, 3 for d=3.
    pub fn param_len(dim: usize) -> usize {
        dim * (dim - 1) / 2
    }

    /// The independent entries, in the order used by the constraint engine.
    pub fn params(&self) -> Vec<f64> {
        match self {
            Skew::Planar(a) => vec![*a],
            Skew::Spatial(z) => vec![z.x, z.y, z.z],
        }
    }

    pub fn from_params(dim: usize, p: &[f64]) -> Skew {
        match dim {
            2 => {
                assert_eq!(p.len(), 1);
                Skew::Planar(p[0])
            }
            3 => {
                assert_eq!(p.len(), 3);
                Skew::Spatial(Vector3::new(p[0], p[1], p[2]))
            }
            _ => panic!("skew storage only defined for d = 2 or 3, got {dim}"),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.norm() == 0.0
    }

    /// `|a|` for d=2, `|z|` for d=3; equals the rotation rate of the map.
    pub fn norm(&self) -> f64 {
        match self {
            Skew::Planar(a) => a.abs(),
            Skew::Spatial(z) => z.norm(),
        }
    }

    /// Apply the map to a vector.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Skew::Planar(a) => {
                debug_assert_eq!(x.len(), 2);
                DVector::from_vec(vec![-a * x[1], a * x[0]])
            }
            Skew::Spatial(z) => {
                debug_assert_eq!(x.len(), 3);
                DVector::from_vec(vec![
                    z.y * x[2] - z.z * x[1],
                    z.z * x[0] - z.x * x[2],
                    z.x * x[1] - z.y * x[0],
                ])
            }
        }
    }

    /// `(Sx) . y` without forming the intermediate vector.
    pub fn apply_dot(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.apply(x).dot(y)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            Skew::Planar(a) => DMatrix::from_row_slice(2, 2, &[0.0, -a, *a, 0.0]),
            Skew::Spatial(z) => DMatrix::from_row_slice(
                3,
                3,
                &[0.0, -z.z, z.y, z.z, 0.0, -z.x, -z.y, z.x, 0.0],
            ),
        }
    }

    /// `exp(t S)` as a dense rotation matrix: a plane rotation by `a t` for
    /// d=2, the Rodrigues rotation about `z/|z|` by `|z| t` for d=3.
    pub fn exp(&self, t: f64) -> DMatrix<f64> {
        match self {
            Skew::Planar(a) => {
                let (s, c) = (a * t).sin_cos();
                DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
            }
            Skew::Spatial(z) => {
                let norm = z.norm();
                if norm == 0.0 {
                    return DMatrix::identity(3, 3);
                }
                let u = z / norm;
                let (s, c) = (norm * t).sin_cos();
                let ux = DMatrix::from_row_slice(
                    3,
                    3,
                    &[0.0, -u.z, u.y, u.z, 0.0, -u.x, -u.y, u.x, 0.0],
                );
                let uut = DMatrix::from_fn(3, 3, |i, j| u[i] * u[j]);
                DMatrix::identity(3, 3) * c + ux * s + uut * (1.0 - c)
            }
        }
    }

    /// Rotate a single vector by `exp(t S)` without forming the matrix.
    pub fn rotate(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Skew::Planar(a) => {
                let (s, c) = (a * t).sin_cos();
                DVector::from_vec(vec![c * x[0] - s * x[1], s * x[0] + c * x[1]])
            }
            Skew::Spatial(z) => {
                let norm = z.norm();
                if norm == 0.0 {
                    return x.clone();
                }
                let u = z / norm;
                let v = Vector3::new(x[0], x[1], x[2]);
                let (s, c) = (norm * t).sin_cos();
                let rotated = v * c + u.cross(&v) * s + u * (u.dot(&v)) * (1.0 - c);
                DVector::from_vec(vec![rotated.x, rotated.y, rotated.z])
            }
        }
    }
}

pub fn cross3(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(a.len(), 3);
    debug_assert_eq!(b.len(), 3);
    DVector::from_vec(vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}

/// `J x` with `J = ((0,-1),(1,0))`, the quarter turn used for d=2 rows.
pub fn quarter_turn(x: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(x.len(), 2);
    DVector::from_vec(vec![-x[1], x[0]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matrix_is_exactly_skew() {
        for skew in [
            Skew::Planar(1.7),
            Skew::Spatial(Vector3::new(0.3, -1.2, 0.8)),
        ] {
            let m = skew.to_matrix();
            let sum = &m + m.transpose();
            assert_eq!(sum.norm(), 0.0);
        }
    }

    #[test]
    fn apply_matches_matrix() {
        let z = Skew::Spatial(Vector3::new(0.4, -0.9, 1.3));
        let x = DVector::from_vec(vec![1.0, 2.0, -0.5]);
        let via_matrix = z.to_matrix() * &x;
        assert_relative_eq!(z.apply(&x), via_matrix, epsilon = 1e-15);
    }

    #[test]
    fn exp_is_rotation() {
        let z = Skew::Spatial(Vector3::new(0.2, 0.5, -0.7));
        let r = z.exp(1.3);
        let should_be_id = &r * r.transpose();
        assert_relative_eq!(should_be_id, DMatrix::identity(3, 3), epsilon = 1e-14);

        let x = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        assert_relative_eq!(z.rotate(1.3, &x), r * &x, epsilon = 1e-13);
    }

    #[test]
    fn planar_exp_reduces_to_plane_rotation() {
        let s = Skew::Planar(2.0);
        let r = s.exp(0.25);
        let (sin, cos) = (0.5f64).sin_cos();
        assert_relative_eq!(r[(0, 0)], cos);
        assert_relative_eq!(r[(0, 1)], -sin);
        assert_relative_eq!(r[(1, 0)], sin);
    }
}
