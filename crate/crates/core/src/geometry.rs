//! Parametric inclusion shapes and their trapezoidal boundary discretization.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use libm::{cos, sin, sqrt};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        sqrt(self.norm_sq())
    }

    /// Counterclockwise rotation by `angle` radians.
    #[inline]
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = (sin(angle), cos(angle));
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Clockwise quarter turn; maps the tangent of a counterclockwise curve
    /// to its outward normal.
    #[inline]
    pub fn perp_cw(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Curve family before the rigid motion and scaling are applied.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    Disk {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// `r(θ) = radius·(1 + amplitude·cos(petals·θ))`.
    Flower {
        radius: f64,
        petals: u32,
        amplitude: f64,
    },
    /// Star-shaped curve `r(θ) = c0 + Σ_k (cos_k cos kθ + sin_k sin kθ)`, k ≥ 1.
    Fourier {
        c0: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
}

/// A closed C² curve: `x(t) = center + scale·R(rotation)·x_kind(t)`, t ∈ [0, 2π).
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricShape {
    pub kind: ShapeKind,
    pub center: Vec2,
    pub rotation: f64,
    pub scale: f64,
}

impl ParametricShape {
    pub fn new(kind: ShapeKind) -> Self {
        ParametricShape { kind, center: Vec2::ZERO, rotation: 0.0, scale: 1.0 }
    }

    pub fn disk(radius: f64) -> Self {
        Self::new(ShapeKind::Disk { radius })
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        Self::new(ShapeKind::Ellipse { a, b })
    }

    pub fn flower(radius: f64, petals: u32, amplitude: f64) -> Self {
        Self::new(ShapeKind::Flower { radius, petals, amplitude })
    }

    pub fn with_center(mut self, center: Vec2) -> Self {
        self.center = center;
        self
    }

    pub fn with_rotation(mut self, rotation: f64) -> Self {
        self.rotation = rotation;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// Checks that the curve is closed, simple and regular.
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        if !finite(self.scale) || self.scale <= 0.0 {
            return Err(Error::InvalidShape(format!("scale must be positive, got {}", self.scale)));
        }
        if !finite(self.rotation) || !finite(self.center.x) || !finite(self.center.y) {
            return Err(Error::InvalidShape("non-finite placement".into()));
        }
        match &self.kind {
            ShapeKind::Disk { radius } => {
                if !finite(*radius) || *radius <= 0.0 {
                    return Err(Error::InvalidShape(format!("disk radius {radius}")));
                }
            }
            ShapeKind::Ellipse { a, b } => {
                if !finite(*a) || !finite(*b) || *a <= 0.0 || *b <= 0.0 {
                    return Err(Error::InvalidShape(format!("ellipse semi-axes {a}, {b}")));
                }
            }
            ShapeKind::Flower { radius, petals, amplitude } => {
                if !finite(*radius) || *radius <= 0.0 {
                    return Err(Error::InvalidShape(format!("flower radius {radius}")));
                }
                if !finite(*amplitude) || amplitude.abs() >= 1.0 {
                    return Err(Error::InvalidShape(format!("flower amplitude {amplitude} makes the radius vanish")));
                }
                if *petals == 0 {
                    return Err(Error::InvalidShape("flower needs at least one petal".into()));
                }
            }
            ShapeKind::Fourier { c0, cos, sin } => {
                if cos.iter().chain(sin.iter()).any(|v| !v.is_finite()) || !c0.is_finite() {
                    return Err(Error::InvalidShape("non-finite Fourier coefficient".into()));
                }
                let probes = 4096;
                for i in 0..probes {
                    let t = 2.0 * PI * i as f64 / probes as f64;
                    let (r, _, _) = self.radial(t);
                    if r <= 0.0 {
                        return Err(Error::InvalidShape(format!("radius function non-positive at t = {t:.4}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Radius, first and second derivative for star-shaped kinds.
    fn radial(&self, t: f64) -> (f64, f64, f64) {
        match &self.kind {
            ShapeKind::Disk { radius } => (*radius, 0.0, 0.0),
            ShapeKind::Flower { radius, petals, amplitude } => {
                let m = *petals as f64;
                let (s, c) = (sin(m * t), cos(m * t));
                (radius * (1.0 + amplitude * c), -radius * amplitude * m * s, -radius * amplitude * m * m * c)
            }
            ShapeKind::Fourier { c0, cos: ca, sin: sa } => {
                let (mut r, mut dr, mut ddr) = (*c0, 0.0, 0.0);
                let terms = ca.len().max(sa.len());
                for k in 1..=terms {
                    let a = ca.get(k - 1).copied().unwrap_or(0.0);
                    let b = sa.get(k - 1).copied().unwrap_or(0.0);
                    let kf = k as f64;
                    let (s, c) = (sin(kf * t), cos(kf * t));
                    r += a * c + b * s;
                    dr += kf * (-a * s + b * c);
                    ddr -= kf * kf * (a * c + b * s);
                }
                (r, dr, ddr)
            }
            ShapeKind::Ellipse { .. } => unreachable!("ellipse is not parametrized radially"),
        }
    }

    /// Point, first and second parameter derivative in the shape's own frame.
    fn local_jet(&self, t: f64) -> (Vec2, Vec2, Vec2) {
        let (s, c) = (sin(t), cos(t));
        match &self.kind {
            ShapeKind::Ellipse { a, b } => {
                (Vec2::new(a * c, b * s), Vec2::new(-a * s, b * c), Vec2::new(-a * c, -b * s))
            }
            _ => {
                let (r, dr, ddr) = self.radial(t);
                (
                    Vec2::new(r * c, r * s),
                    Vec2::new(dr * c - r * s, dr * s + r * c),
                    Vec2::new(ddr * c - 2.0 * dr * s - r * c, ddr * s + 2.0 * dr * c - r * s),
                )
            }
        }
    }

    /// Point and parameter derivatives after scaling, rotation and translation.
    pub fn jet(&self, t: f64) -> (Vec2, Vec2, Vec2) {
        let (p, d1, d2) = self.local_jet(t);
        let map = |v: Vec2| (v * self.scale).rotate(self.rotation);
        (map(p) + self.center, map(d1), map(d2))
    }

    pub fn point(&self, t: f64) -> Vec2 {
        self.jet(t).0
    }
}

/// Equispaced-in-parameter discretization of a closed curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMesh {
    pub params: Vec<f64>,
    pub points: Vec<Vec2>,
    pub tangents: Vec<Vec2>,
    /// Outward unit normals.
    pub normals: Vec<Vec2>,
    pub curvature: Vec<f64>,
    /// Trapezoidal arc-length weights `|x'(t_i)|·2π/M`.
    pub weights: Vec<f64>,
    pub center: Vec2,
}

/// Samples `shape` at `m` equispaced parameter values.
pub fn sample_boundary(shape: &ParametricShape, m: usize) -> Result<BoundaryMesh> {
    if m < 16 || !m.is_multiple_of(2) {
        return Err(Error::InvalidMesh(format!("node count must be even and >= 16, got {m}")));
    }
    shape.validate()?;
    let dt = 2.0 * PI / m as f64;
    let mut mesh = BoundaryMesh {
        params: Vec::with_capacity(m),
        points: Vec::with_capacity(m),
        tangents: Vec::with_capacity(m),
        normals: Vec::with_capacity(m),
        curvature: Vec::with_capacity(m),
        weights: Vec::with_capacity(m),
        center: shape.center,
    };
    for i in 0..m {
        let t = i as f64 * dt;
        let (p, d1, d2) = shape.jet(t);
        let speed = d1.norm();
        if !(speed > 0.0) || !speed.is_finite() {
            return Err(Error::InvalidShape(format!("singular parametrization at t = {t:.4}")));
        }
        let tangent = d1 * (1.0 / speed);
        mesh.params.push(t);
        mesh.points.push(p);
        mesh.tangents.push(tangent);
        mesh.normals.push(tangent.perp_cw());
        mesh.curvature.push(d1.cross(d2) / (speed * speed * speed));
        mesh.weights.push(speed * dt);
    }
    for i in 0..m {
        let j = (i + 1) % m;
        if (mesh.points[i] - mesh.points[j]).norm() == 0.0 {
            return Err(Error::DegenerateMesh(i, j));
        }
    }
    Ok(mesh)
}

impl BoundaryMesh {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn perimeter(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Largest chord between consecutive nodes.
    pub fn max_spacing(&self) -> f64 {
        let m = self.len();
        (0..m).map(|i| (self.points[(i + 1) % m] - self.points[i]).norm()).fold(0.0, f64::max)
    }

    /// Distance from `p` to the closed polyline through the nodes.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let m = self.len();
        let mut best = f64::INFINITY;
        for i in 0..m {
            let a = self.points[i];
            let b = self.points[(i + 1) % m];
            let ab = b - a;
            let t = ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
            let d = (a + ab * t - p).norm_sq();
            if d < best {
                best = d;
            }
        }
        sqrt(best)
    }

    /// Nearest node to `p` and its distance.
    pub fn nearest_node(&self, p: Vec2) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, q) in self.points.iter().enumerate() {
            let d = (*q - p).norm_sq();
            if d < best.1 {
                best = (i, d);
            }
        }
        (best.0, sqrt(best.1))
    }

    /// Axis-aligned bounding box of the nodes as `(min, max)`.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Even-odd point-in-polygon test against the node polyline.
    pub fn contains(&self, p: Vec2) -> bool {
        let m = self.len();
        let mut inside = false;
        for i in 0..m {
            let a = self.points[i];
            let b = self.points[(i + 1) % m];
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// Enclosed area `½∮⟨x, ν⟩ ds` with the mesh quadrature; positive for the
/// counterclockwise orientation used throughout.
pub fn signed_area(mesh: &BoundaryMesh) -> f64 {
    0.5 * mesh
        .points
        .iter()
        .zip(&mesh.normals)
        .zip(&mesh.weights)
        .map(|((p, n), w)| (*p - mesh.center).dot(*n) * w)
        .sum::<f64>()
}
