//! Planar rigid-body geometry: vectors, SE(2) poses and constant twists.

use core::f64::consts::{PI, TAU};
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

/// A 2-vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_squared())
    }

    #[inline]
    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    /// Rotates by `angle` radians counter-clockwise.
    #[inline]
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = libm::sincos(angle);
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Angle of the vector from the +x axis, in (−π, π].
    #[inline]
    pub fn angle(self) -> f64 {
        libm::atan2(self.y, self.x)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = libm::fmod(angle, TAU);
    if a > PI {
        a -= TAU;
    } else if a <= -PI {
        a += TAU;
    }
    a
}

/// SE(2) pose `(x, y, θ)`: rotation by θ followed by translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Default for Pose2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    /// Builds a pose, wrapping `theta` into (−π, π].
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    #[inline]
    pub fn translation(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// `R_θ p + t`.
    #[inline]
    pub fn apply(&self, p: Vec2) -> Vec2 {
        p.rotated(self.theta) + self.translation()
    }

    /// Rotates a direction (normals, velocities) without translating it.
    #[inline]
    pub fn rotate(&self, v: Vec2) -> Vec2 {
        v.rotated(self.theta)
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let t = self.apply(other.translation());
        Pose2::new(t.x, t.y, self.theta + other.theta)
    }

    pub fn inverse(&self) -> Pose2 {
        let t = (-self.translation()).rotated(-self.theta);
        Pose2::new(t.x, t.y, -self.theta)
    }

    /// Relative pose `self⁻¹ ∘ other`, i.e. `other` expressed in the frame of `self`.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose(other)
    }

    /// Pose reached after integrating a constant body-frame twist for `dt` seconds.
    pub fn exp(twist: Velocity2, dt: f64) -> Pose2 {
        let phi = twist.omega * dt;
        let u = Vec2::new(twist.vx * dt, twist.vy * dt);
        let (a, b) = twist_coefficients(phi);
        Pose2::new(a * u.x - b * u.y, b * u.x + a * u.y, phi)
    }

    /// Constant body-frame twist that moves the identity onto `self` in `dt` seconds.
    ///
    /// Inverse of [`Pose2::exp`] for rotations within (−π, π]. Returns zero for `dt <= 0`.
    pub fn log(&self, dt: f64) -> Velocity2 {
        if dt <= 0.0 {
            return Velocity2::ZERO;
        }
        let (a, b) = twist_coefficients(self.theta);
        let det = a * a + b * b;
        let ux = (a * self.x + b * self.y) / det;
        let uy = (-b * self.x + a * self.y) / det;
        Velocity2::new(ux / dt, uy / dt, self.theta / dt)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

impl Mul for Pose2 {
    type Output = Pose2;
    fn mul(self, rhs: Pose2) -> Pose2 {
        self.compose(&rhs)
    }
}

// Left Jacobian entries of SE(2): V = [[a, -b], [b, a]].
fn twist_coefficients(phi: f64) -> (f64, f64) {
    if phi.abs() < 1e-6 {
        let phi2 = phi * phi;
        (1.0 - phi2 / 6.0, phi / 2.0 - phi * phi2 / 24.0)
    } else {
        let (s, c) = libm::sincos(phi);
        (s / phi, (1.0 - c) / phi)
    }
}

/// Body-frame velocity: forward, lateral (m/s) and yaw rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Velocity2 {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Velocity2 {
    pub const ZERO: Velocity2 = Velocity2 {
        vx: 0.0,
        vy: 0.0,
        omega: 0.0,
    };

    pub const fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }
}

impl Neg for Velocity2 {
    type Output = Velocity2;
    fn neg(self) -> Velocity2 {
        Velocity2::new(-self.vx, -self.vy, -self.omega)
    }
}
