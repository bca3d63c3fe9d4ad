//! Forward-mode dual numbers with up to three partials.
//!
//! One value plus a fixed-size gradient slot; unused components stay zero, so
//! the same type serves d = 2 and d = 3. All elementary operations propagate
//! derivatives exactly (up to rounding), no differencing involved.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub dx: [f64; 3],
}

impl Dual {
    pub fn constant(v: f64) -> Dual {
        Dual { v, dx: [0.0; 3] }
    }

    /// Seed variable `index` with unit derivative.
    pub fn var(v: f64, index: usize) -> Dual {
        let mut dx = [0.0; 3];
        dx[index] = 1.0;
        Dual { v, dx }
    }

    fn map(self, v: f64, dv: f64) -> Dual {
        Dual {
            v,
            dx: [self.dx[0] * dv, self.dx[1] * dv, self.dx[2] * dv],
        }
    }

    pub fn sin(self) -> Dual {
        self.map(self.v.sin(), self.v.cos())
    }

    pub fn cos(self) -> Dual {
        self.map(self.v.cos(), -self.v.sin())
    }

    pub fn exp(self) -> Dual {
        let e = self.v.exp();
        self.map(e, e)
    }

    /// Fails for negative arguments; the gradient blows up at exactly zero,
    /// which callers treat as a singular point.
    pub fn sqrt(self) -> Option<Dual> {
        if self.v < 0.0 {
            return None;
        }
        let r = self.v.sqrt();
        Some(self.map(r, 0.5 / r))
    }

    pub fn abs(self) -> Dual {
        let sign = if self.v > 0.0 {
            1.0
        } else if self.v < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.map(self.v.abs(), sign)
    }

    /// Integer power; negative exponents fail at zero.
    pub fn powi(self, n: i32) -> Option<Dual> {
        if n == 0 {
            return Some(Dual::constant(1.0));
        }
        if self.v == 0.0 && n < 0 {
            return None;
        }
        let v = self.v.powi(n);
        let dv = f64::from(n) * self.v.powi(n - 1);
        Some(self.map(v, dv))
    }

    /// `atan2(self, other)` with exact derivative propagation. Not part of
    /// the expression grammar; used internally for co-rotating coordinates.
    pub fn atan2(self, other: Dual) -> Dual {
        let (y, x) = (self, other);
        let denom = x.v * x.v + y.v * y.v;
        let mut dx = [0.0; 3];
        for i in 0..3 {
            dx[i] = (x.v * y.dx[i] - y.v * x.dx[i]) / denom;
        }
        Dual {
            v: y.v.atan2(x.v),
            dx,
        }
    }

    pub fn hypot(self, other: Dual) -> Option<Dual> {
        (self * self + other * other).sqrt()
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual {
            v: self.v + rhs.v,
            dx: [
                self.dx[0] + rhs.dx[0],
                self.dx[1] + rhs.dx[1],
                self.dx[2] + rhs.dx[2],
            ],
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual {
            v: self.v - rhs.v,
            dx: [
                self.dx[0] - rhs.dx[0],
                self.dx[1] - rhs.dx[1],
                self.dx[2] - rhs.dx[2],
            ],
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual {
            v: self.v * rhs.v,
            dx: [
                self.dx[0] * rhs.v + self.v * rhs.dx[0],
                self.dx[1] * rhs.v + self.v * rhs.dx[1],
                self.dx[2] * rhs.v + self.v * rhs.dx[2],
            ],
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        let inv = 1.0 / rhs.v;
        let v = self.v * inv;
        Dual {
            v,
            dx: [
                (self.dx[0] - v * rhs.dx[0]) * inv,
                (self.dx[1] - v * rhs.dx[1]) * inv,
                (self.dx[2] - v * rhs.dx[2]) * inv,
            ],
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            dx: [-self.dx[0], -self.dx[1], -self.dx[2]],
        }
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, rhs: f64) -> Dual {
        self.map(self.v * rhs, rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn product_rule() {
        let x = Dual::var(2.0, 0);
        let y = Dual::var(3.0, 1);
        let p = x * y;
        assert_eq!(p.v, 6.0);
        assert_eq!(p.dx, [3.0, 2.0, 0.0]);
    }

    #[test]
    fn quotient_and_chain() {
        let x = Dual::var(0.7, 0);
        let f = (x.sin() / x.exp()).abs();
        // d/dx |sin x / e^x| = (cos x - sin x) e^{-x} at 0.7 (positive branch)
        let expected = (0.7f64.cos() - 0.7f64.sin()) * (-0.7f64).exp();
        assert_relative_eq!(f.dx[0], expected, epsilon = 1e-14);
    }

    #[test]
    fn atan2_gradient() {
        let y = Dual::var(1.0, 1);
        let x = Dual::var(2.0, 0);
        let th = y.atan2(x);
        assert_relative_eq!(th.v, (0.5f64).atan());
        // d theta / dx = -y / (x^2+y^2), d theta / dy = x / (x^2+y^2)
        assert_relative_eq!(th.dx[0], -1.0 / 5.0);
        assert_relative_eq!(th.dx[1], 2.0 / 5.0);
    }

    #[test]
    fn negative_powers_reject_zero() {
        assert!(Dual::constant(0.0).powi(-1).is_none());
        assert!(Dual::constant(0.0).powi(2).is_some());
    }
}
