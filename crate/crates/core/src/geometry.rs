//! Planar geometry used by the workspace model: points, occluder shapes and
//! segment/shape intersection for line-of-sight tests.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or vector in workspace coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product; positive when `other` lies
    /// counter-clockwise of `self`.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    /// Rotated by +90 degrees (left-hand normal).
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Euclidean distance between two points.
pub fn distance(a: Vec2, b: Vec2) -> f64 {
    (b - a).norm()
}

/// Wraps an angle into `[-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    if (-PI..=PI).contains(&theta) {
        return theta;
    }
    let wrapped = (theta + PI).rem_euclid(TAU) - PI;
    if wrapped < -PI {
        wrapped + TAU
    } else {
        wrapped
    }
}

/// Occluder footprint, expressed relative to the occluder's center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Disc { radius: f64 },
    /// Convex polygon. Vertices may be given in either winding; they are
    /// stored counter-clockwise after validation.
    Polygon { vertices: Vec<Vec2> },
}

/// Axis-aligned rectangle of the given size, centered on the origin.
pub fn rectangle(width: f64, height: f64) -> Shape {
    let (hw, hh) = (width / 2.0, height / 2.0);
    Shape::Polygon {
        vertices: vec![
            Vec2::new(-hw, -hh),
            Vec2::new(hw, -hh),
            Vec2::new(hw, hh),
            Vec2::new(-hw, hh),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ShapeError {
    #[error("disc radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon vertex {0} is not finite")]
    NonFiniteVertex(usize),
    #[error("polygon has zero area")]
    Degenerate,
    #[error("polygon is not convex")]
    NotConvex,
}

impl Shape {
    /// Checks the shape invariants and returns the canonical (CCW) form.
    pub fn validated(self) -> Result<Shape, ShapeError> {
        match self {
            Shape::Disc { radius } => {
                if radius.is_finite() && radius > 0.0 {
                    Ok(Shape::Disc { radius })
                } else {
                    Err(ShapeError::BadRadius(radius))
                }
            }
            Shape::Polygon { mut vertices } => {
                if vertices.len() < 3 {
                    return Err(ShapeError::TooFewVertices(vertices.len()));
                }
                if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
                    return Err(ShapeError::NonFiniteVertex(i));
                }
                let area = signed_area(&vertices);
                if area.abs() <= f64::EPSILON {
                    return Err(ShapeError::Degenerate);
                }
                if area < 0.0 {
                    vertices.reverse();
                }
                let n = vertices.len();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let c = vertices[(i + 2) % n];
                    if (b - a).cross(c - b) < -1e-12 {
                        return Err(ShapeError::NotConvex);
                    }
                }
                Ok(Shape::Polygon { vertices })
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Shape::Disc { radius } => std::f64::consts::PI * radius * radius,
            Shape::Polygon { vertices } => signed_area(vertices).abs(),
        }
    }

    /// Whether the segment `a`-`b` touches the shape placed at `center`.
    /// Touching the boundary counts as a hit.
    pub fn intersects_segment(&self, center: Vec2, a: Vec2, b: Vec2) -> bool {
        match self {
            Shape::Disc { radius } => point_segment_distance(center, a, b) <= *radius,
            Shape::Polygon { vertices } => clip_segment_convex(a - center, b - center, vertices),
        }
    }

    /// Whether the point lies inside (or on) the shape placed at `center`.
    pub fn contains(&self, center: Vec2, p: Vec2) -> bool {
        match self {
            Shape::Disc { radius } => distance(center, p) <= *radius,
            Shape::Polygon { vertices } => {
                let q = p - center;
                let n = vertices.len();
                (0..n).all(|i| (vertices[(i + 1) % n] - vertices[i]).cross(q - vertices[i]) >= 0.0)
            }
        }
    }
}

fn signed_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum::<f64>()
        / 2.0
}

/// Shortest distance from `p` to the closed segment `a`-`b`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return distance(p, a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    distance(p, a + ab * t)
}

/// Cyrus-Beck clipping of a segment against a CCW convex polygon. Returns
/// true if any part of the segment survives the clip.
fn clip_segment_convex(a: Vec2, b: Vec2, ccw: &[Vec2]) -> bool {
    let d = b - a;
    let (mut t_enter, mut t_exit) = (0.0_f64, 1.0_f64);
    let n = ccw.len();
    for i in 0..n {
        let p0 = ccw[i];
        let edge = ccw[(i + 1) % n] - p0;
        // Inside is where edge.cross(x - p0) >= 0.
        let num = edge.cross(a - p0);
        let den = edge.cross(d);
        if den == 0.0 {
            if num < 0.0 {
                return false;
            }
            continue;
        }
        let t = -num / den;
        if den > 0.0 {
            t_enter = t_enter.max(t);
        } else {
            t_exit = t_exit.min(t);
        }
        if t_enter > t_exit {
            return false;
        }
    }
    true
}
