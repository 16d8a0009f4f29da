//! Forward-mode dual numbers with a 4-slot gradient.
//!
//! Used to obtain the exact derivative of the CIOU loss with respect to the
//! four box offsets of an anchor. The [`SmoothNum`] trait lets the CIOU
//! formula be written once and evaluated either on plain scalars or on
//! [`Dual4`] values.

use crate::num::Real;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Minimal scalar interface needed by the box-loss formulas.
pub trait SmoothNum<F: Real>:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(c: F) -> Self;
    fn value(&self) -> F;
    fn sqrt(self) -> Self;
    fn atan(self) -> Self;
    /// Branch selection on the primal value only.
    fn max(self, other: Self) -> Self {
        if self.value() >= other.value() {
            self
        } else {
            other
        }
    }
    fn min(self, other: Self) -> Self {
        if self.value() <= other.value() {
            self
        } else {
            other
        }
    }
}

impl<F: Real> SmoothNum<F> for F {
    fn constant(c: F) -> Self {
        c
    }
    fn value(&self) -> F {
        *self
    }
    fn sqrt(self) -> Self {
        Float::sqrt(self)
    }
    fn atan(self) -> Self {
        Float::atan(self)
    }
}

use num_traits::Float;

/// Value plus a 4-component gradient, propagated by the chain rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual4<F> {
    pub v: F,
    pub d: [F; 4],
}

impl<F: Real> Dual4<F> {
    pub fn constant(v: F) -> Self {
        Self { v, d: [F::zero(); 4] }
    }

    /// A variable seeded with `dv` in gradient slot `slot`.
    pub fn seeded(v: F, slot: usize, dv: F) -> Self {
        let mut d = [F::zero(); 4];
        d[slot] = dv;
        Self { v, d }
    }
}

impl<F: Real> Add for Dual4<F> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            d: [
                self.d[0] + o.d[0],
                self.d[1] + o.d[1],
                self.d[2] + o.d[2],
                self.d[3] + o.d[3],
            ],
        }
    }
}

impl<F: Real> Sub for Dual4<F> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            v: self.v - o.v,
            d: [
                self.d[0] - o.d[0],
                self.d[1] - o.d[1],
                self.d[2] - o.d[2],
                self.d[3] - o.d[3],
            ],
        }
    }
}

impl<F: Real> Mul for Dual4<F> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d: [
                self.d[0] * o.v + self.v * o.d[0],
                self.d[1] * o.v + self.v * o.d[1],
                self.d[2] * o.v + self.v * o.d[2],
                self.d[3] * o.v + self.v * o.d[3],
            ],
        }
    }
}

impl<F: Real> Div for Dual4<F> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = F::one() / o.v;
        let q = self.v * inv;
        Self {
            v: q,
            d: [
                (self.d[0] - q * o.d[0]) * inv,
                (self.d[1] - q * o.d[1]) * inv,
                (self.d[2] - q * o.d[2]) * inv,
                (self.d[3] - q * o.d[3]) * inv,
            ],
        }
    }
}

impl<F: Real> Neg for Dual4<F> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            v: -self.v,
            d: [-self.d[0], -self.d[1], -self.d[2], -self.d[3]],
        }
    }
}

impl<F: Real> SmoothNum<F> for Dual4<F> {
    fn constant(c: F) -> Self {
        Dual4::constant(c)
    }
    fn value(&self) -> F {
        self.v
    }
    fn sqrt(self) -> Self {
        let s = Float::sqrt(self.v);
        let f = F::one() / ((F::one() + F::one()) * s);
        Self {
            v: s,
            d: [self.d[0] * f, self.d[1] * f, self.d[2] * f, self.d[3] * f],
        }
    }
    fn atan(self) -> Self {
        let f = F::one() / (F::one() + self.v * self.v);
        Self {
            v: Float::atan(self.v),
            d: [self.d[0] * f, self.d[1] * f, self.d[2] * f, self.d[3] * f],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn dual_arithmetic_matches_finite_differences() {
        let x0 = 0.7;
        let g = |x: f64| ((x * x + 3.0) / (x + 2.0)).sqrt().atan();
        let x = Dual4::seeded(x0, 0, 1.0);
        let two = Dual4::constant(2.0);
        let three = Dual4::constant(3.0);
        let y = SmoothNum::<f64>::atan(SmoothNum::<f64>::sqrt((x * x + three) / (x + two)));
        assert!((y.v - g(x0)).abs() < 1e-14);
        assert!((y.d[0] - fd(g, x0)).abs() < 1e-8);
        assert_eq!(y.d[1], 0.0);
    }
}
