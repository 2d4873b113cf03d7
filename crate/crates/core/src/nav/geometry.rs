use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

pub(crate) fn lit<T: Float>(value: f64) -> T {
    T::from(value).expect("float literal fits the scalar type")
}

impl<T: Float> std::ops::Add for Point<T> {
    type Output = Self;

    fn add(self, other: Self) -> Self {
        Self::new(self.x + other.x, self.y + other.y)
    }
}

impl<T: Float> std::ops::Sub for Point<T> {
    type Output = Self;

    fn sub(self, other: Self) -> Self {
        Self::new(self.x - other.x, self.y - other.y)
    }
}

impl<T: Float> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn from_f64(x: f64, y: f64) -> Self {
        Self::new(lit(x), lit(y))
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn scale(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k)
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product; negative means `other` turns
    /// clockwise from `self`.
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n.is_zero() {
            self
        } else {
            self.scale(n.recip())
        }
    }

    /// Counterclockwise rotation about the origin.
    pub fn rotated(self, radians: T) -> Self {
        let (s, c) = radians.sin_cos();
        Self::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }

    pub fn approx_eq(self, other: Self, tol: T) -> bool {
        (self.x - other.x).abs() <= tol && (self.y - other.y).abs() <= tol
    }

    pub fn cast<U: Float>(self) -> Point<U> {
        Point::new(
            U::from(self.x).expect("coordinate fits"),
            U::from(self.y).expect("coordinate fits"),
        )
    }
}
