use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::scalar::Scalar;

/// Planar vector.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec2<F> {
    pub x: F,
    pub y: F,
}

impl<F: Scalar> Vec2<F> {
    pub fn new(x: F, y: F) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(F::zero(), F::zero())
    }

    /// Unit vector at angle `theta`.
    pub fn polar(theta: F) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Self) -> F {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Self) -> F {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> F {
        self.dot(self)
    }

    pub fn norm(self) -> F {
        self.x.hypot(self.y)
    }

    pub fn angle(self) -> F {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise quarter turn.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn rotate(self, theta: F) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn normalized(self) -> Self {
        self / self.norm()
    }

    pub fn lerp(self, o: Self, s: F) -> Self {
        self + (o - self) * s
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<F: Scalar> Add for Vec2<F> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<F: Scalar> Sub for Vec2<F> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<F: Scalar> Neg for Vec2<F> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<F: Scalar> Mul<F> for Vec2<F> {
    type Output = Self;
    fn mul(self, s: F) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<F: Scalar> Div<F> for Vec2<F> {
    type Output = Self;
    fn div(self, s: F) -> Self {
        Self::new(self.x / s, self.y / s)
    }
}

impl<F: Scalar> AddAssign for Vec2<F> {
    fn add_assign(&mut self, o: Self) {
        self.x = self.x + o.x;
        self.y = self.y + o.y;
    }
}

impl<F: Scalar> SubAssign for Vec2<F> {
    fn sub_assign(&mut self, o: Self) {
        self.x = self.x - o.x;
        self.y = self.y - o.y;
    }
}
