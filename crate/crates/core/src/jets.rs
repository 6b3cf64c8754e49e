//! Order-2 jets over the four real spacetime coordinates.
//!
//! A [`Jet`] carries the value of a complex function together with its exact
//! first partials `∂_μ` and second partials `∂_μ∂_ν` at one point. Arithmetic
//! follows the Leibniz and chain rules; mixing jets of different order
//! truncates to the lower one. The Hessian is stored as its 10 independent
//! entries, so symmetry holds bit for bit.
//!
//! Coordinates are real, hence `conj` commutes with differentiation.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Smallest divisor magnitude accepted by [`Jet::try_div`].
pub const DEFAULT_DIV_EPSILON: f64 = 1e-300;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Packed index of the symmetric pair (μ, ν).
const SYM: [[usize; 4]; 4] = [[0, 1, 2, 3], [1, 4, 5, 6], [2, 5, 7, 8], [3, 6, 8, 9]];

/// A point `x^μ = (t, x, y, z)` in natural units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpacetimePoint(pub [f64; 4]);

impl SpacetimePoint {
    pub fn new(coords: [f64; 4]) -> Result<Self> {
        if coords.iter().all(|c| c.is_finite()) {
            Ok(Self(coords))
        } else {
            Err(Error::Config {
                pointer: "/point".into(),
                message: format!("non-finite coordinate in {coords:?}"),
            })
        }
    }

    pub fn origin() -> Self {
        Self([0.0; 4])
    }

    pub fn coord(&self, mu: usize) -> f64 {
        self.0[mu]
    }

    /// Copy of the point with coordinate `mu` moved by `delta`.
    pub fn shifted(&self, mu: usize, delta: f64) -> Self {
        let mut c = self.0;
        c[mu] += delta;
        Self(c)
    }
}

/// Truncation order of a jet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Order {
    Zero = 0,
    One = 1,
    Two = 2,
}

impl Order {
    pub fn from_u8(k: u8) -> Option<Self> {
        match k {
            0 => Some(Order::Zero),
            1 => Some(Order::One),
            2 => Some(Order::Two),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    /// One order lower, or `None` at order zero.
    pub fn lower(self) -> Option<Self> {
        match self {
            Order::Zero => None,
            Order::One => Some(Order::Zero),
            Order::Two => Some(Order::One),
        }
    }
}

/// Truncated Taylor data of a complex function of the four coordinates.
///
/// Entries beyond `order` are kept at zero.
#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    order: Order,
    value: C64,
    grad: [C64; 4],
    hess: [C64; 10],
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("Jet");
        s.field("order", &self.order).field("value", &self.value);
        if self.order >= Order::One {
            s.field("grad", &self.grad);
        }
        if self.order == Order::Two {
            s.field("hess", &self.hess);
        }
        s.finish()
    }
}

impl Jet {
    pub fn constant(value: C64, order: Order) -> Self {
        Self {
            order,
            value,
            grad: [ZERO; 4],
            hess: [ZERO; 10],
        }
    }

    pub fn real(value: f64, order: Order) -> Self {
        Self::constant(C64::new(value, 0.0), order)
    }

    pub fn zero(order: Order) -> Self {
        Self::constant(ZERO, order)
    }

    pub fn one(order: Order) -> Self {
        Self::real(1.0, order)
    }

    /// The coordinate function `x^μ` expanded at `point`.
    pub fn seed_coordinate(mu: usize, point: &SpacetimePoint, order: Order) -> Self {
        assert!(mu < 4, "coordinate index {mu} out of range");
        let mut j = Self::real(point.coord(mu), order);
        if order >= Order::One {
            j.grad[mu] = C64::new(1.0, 0.0);
        }
        j
    }

    /// Builds a jet from raw Taylor data; `hess` is read as a full 4×4 array
    /// and only its upper triangle is kept.
    pub fn from_parts(order: Order, value: C64, grad: [C64; 4], hess: [[C64; 4]; 4]) -> Self {
        let mut j = Self::constant(value, order);
        if order >= Order::One {
            j.grad = grad;
        }
        if order == Order::Two {
            for mu in 0..4 {
                for nu in mu..4 {
                    j.hess[SYM[mu][nu]] = hess[mu][nu];
                }
            }
        }
        j
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn value(&self) -> C64 {
        self.value
    }

    /// `∂_μ` of the function; zero when the order is 0.
    pub fn grad(&self, mu: usize) -> C64 {
        self.grad[mu]
    }

    pub fn grad_array(&self) -> [C64; 4] {
        self.grad
    }

    /// `∂_μ∂_ν` of the function; zero below order 2.
    pub fn hess(&self, mu: usize, nu: usize) -> C64 {
        self.hess[SYM[mu][nu]]
    }

    /// Drops Taylor data above `order`. Raising the order is not possible
    /// and leaves the jet unchanged.
    pub fn truncate(&self, order: Order) -> Self {
        if order >= self.order {
            return *self;
        }
        let mut j = Self::constant(self.value, order);
        if order >= Order::One {
            j.grad = self.grad;
        }
        j
    }

    /// The jet of `∂f/∂x^μ`, one order lower.
    pub fn partial(&self, mu: usize) -> Result<Self> {
        let order = self.order.lower().ok_or(Error::OrderExhausted)?;
        let mut j = Self::constant(self.grad[mu], order);
        if order == Order::One {
            for nu in 0..4 {
                j.grad[nu] = self.hess[SYM[mu][nu]];
            }
        }
        Ok(j)
    }

    pub fn conj(&self) -> Self {
        Self {
            order: self.order,
            value: self.value.conj(),
            grad: self.grad.map(|g| g.conj()),
            hess: self.hess.map(|h| h.conj()),
        }
    }

    /// Real part, taken entrywise (linear, so it commutes with `∂_μ`).
    pub fn re(&self) -> Self {
        let r = |z: C64| C64::new(z.re, 0.0);
        Self {
            order: self.order,
            value: r(self.value),
            grad: self.grad.map(r),
            hess: self.hess.map(r),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            order: self.order,
            value: self.value * c,
            grad: self.grad.map(|g| g * c),
            hess: self.hess.map(|h| h * c),
        }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        Self {
            order: self.order,
            value: self.value * c,
            grad: self.grad.map(|g| g * c),
            hess: self.hess.map(|h| h * c),
        }
    }

    /// Largest modulus over all stored Taylor coefficients.
    pub fn max_abs(&self) -> f64 {
        let mut m = self.value.norm();
        if self.order >= Order::One {
            m = self.grad.iter().fold(m, |acc, g| acc.max(g.norm()));
        }
        if self.order == Order::Two {
            m = self.hess.iter().fold(m, |acc, h| acc.max(h.norm()));
        }
        m
    }

    /// Composition `f ∘ self` given `f`, `f'` and `f''` at the jet value.
    fn compose(&self, f0: C64, f1: C64, f2: C64) -> Self {
        let mut j = Self::constant(f0, self.order);
        if self.order >= Order::One {
            j.grad = self.grad.map(|g| f1 * g);
        }
        if self.order == Order::Two {
            for mu in 0..4 {
                for nu in mu..4 {
                    let k = SYM[mu][nu];
                    j.hess[k] = f1 * self.hess[k] + f2 * self.grad[mu] * self.grad[nu];
                }
            }
        }
        j
    }

    pub fn sin(&self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.compose(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.compose(c, -s, -c)
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.compose(e, e, e)
    }

    /// Integer power. Negative exponents need a nonzero value.
    pub fn powi(&self, n: i32) -> Result<Self> {
        match n {
            0 => return Ok(Self::one(self.order)),
            1 => return Ok(*self),
            _ => {}
        }
        if n < 0 && self.value.norm() < DEFAULT_DIV_EPSILON {
            return Err(Error::DivisionByZeroValue {
                magnitude: self.value.norm(),
            });
        }
        let v = self.value;
        let nf = f64::from(n);
        let f0 = v.powi(n);
        let f1 = v.powi(n - 1) * nf;
        let f2 = if n == 2 {
            C64::new(2.0, 0.0)
        } else {
            v.powi(n - 2) * (nf * (nf - 1.0))
        };
        Ok(self.compose(f0, f1, f2))
    }

    pub fn try_div(&self, rhs: &Jet) -> Result<Self> {
        self.try_div_eps(rhs, DEFAULT_DIV_EPSILON)
    }

    /// Quotient rule to order 2; fails when `|rhs.value| < eps`.
    pub fn try_div_eps(&self, rhs: &Jet, eps: f64) -> Result<Self> {
        let b = rhs.value;
        if b.norm() < eps {
            return Err(Error::DivisionByZeroValue {
                magnitude: b.norm(),
            });
        }
        let order = self.order.min(rhs.order);
        let q = self.value / b;
        let mut j = Self::constant(q, order);
        if order >= Order::One {
            for mu in 0..4 {
                j.grad[mu] = (self.grad[mu] - q * rhs.grad[mu]) / b;
            }
        }
        if order == Order::Two {
            for mu in 0..4 {
                for nu in mu..4 {
                    let k = SYM[mu][nu];
                    j.hess[k] = (self.hess[k]
                        - j.grad[mu] * rhs.grad[nu]
                        - j.grad[nu] * rhs.grad[mu]
                        - q * rhs.hess[k])
                        / b;
                }
            }
        }
        Ok(j)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut j = Jet::constant(self.value + rhs.value, order);
        if order >= Order::One {
            for mu in 0..4 {
                j.grad[mu] = self.grad[mu] + rhs.grad[mu];
            }
        }
        if order == Order::Two {
            for k in 0..10 {
                j.hess[k] = self.hess[k] + rhs.hess[k];
            }
        }
        j
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut j = Jet::constant(self.value - rhs.value, order);
        if order >= Order::One {
            for mu in 0..4 {
                j.grad[mu] = self.grad[mu] - rhs.grad[mu];
            }
        }
        if order == Order::Two {
            for k in 0..10 {
                j.hess[k] = self.hess[k] - rhs.hess[k];
            }
        }
        j
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let (a, b) = (self.value, rhs.value);
        let mut j = Jet::constant(a * b, order);
        if order >= Order::One {
            for mu in 0..4 {
                j.grad[mu] = self.grad[mu] * b + a * rhs.grad[mu];
            }
        }
        if order == Order::Two {
            for mu in 0..4 {
                for nu in mu..4 {
                    let k = SYM[mu][nu];
                    j.hess[k] = self.hess[k] * b
                        + self.grad[mu] * rhs.grad[nu]
                        + self.grad[nu] * rhs.grad[mu]
                        + a * rhs.hess[k];
                }
            }
        }
        j
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            order: self.order,
            value: -self.value,
            grad: self.grad.map(|g| -g),
            hess: self.hess.map(|h| -h),
        }
    }
}

impl Mul<C64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: C64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale_real(rhs)
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = *self - rhs;
    }
}
