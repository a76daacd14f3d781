//! Small fixed-size vector helpers.

use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// `None` for the zero vector.
pub fn normalize(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    (n > 0.0 && n.is_finite()).then(|| scale(a, 1.0 / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn as_str(&self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "x" | "X" => Some(Axis::X),
            "y" | "Y" => Some(Axis::Y),
            "z" | "Z" => Some(Axis::Z),
            _ => None,
        }
    }
}

/// Right-handed rotation about one principal axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRotation {
    pub axis: Axis,
    pub degrees: f64,
}

impl AxisRotation {
    pub fn identity() -> Self {
        Self {
            axis: Axis::X,
            degrees: 0.0,
        }
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let (s, c) = self.degrees.to_radians().sin_cos();
        match self.axis {
            Axis::X => [v[0], c * v[1] - s * v[2], s * v[1] + c * v[2]],
            Axis::Y => [c * v[0] + s * v[2], v[1], -s * v[0] + c * v[2]],
            Axis::Z => [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]],
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            axis: self.axis,
            degrees: -self.degrees,
        }
    }
}

/// Axis-aligned box in mesh coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn center(&self) -> Vec3 {
        scale(add(self.min, self.max), 0.5)
    }

    pub fn extents(&self) -> Vec3 {
        sub(self.max, self.min)
    }

    pub fn max_dim(&self) -> f64 {
        let e = self.extents();
        e[0].max(e[1]).max(e[2])
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        std::array::from_fn(|i| {
            [
                if i & 1 == 0 { a[0] } else { b[0] },
                if i & 2 == 0 { a[1] } else { b[1] },
                if i & 4 == 0 { a[2] } else { b[2] },
            ]
        })
    }

    /// Corners after recentring on the box centre and rotating.
    pub fn rotated_corners(&self, rotation: &AxisRotation) -> [Vec3; 8] {
        let c = self.center();
        self.corners().map(|p| rotation.apply(sub(p, c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec3, b: Vec3) -> bool {
        (0..3).all(|i| (a[i] - b[i]).abs() < 1e-12)
    }

    #[test]
    fn quarter_turns_are_right_handed() {
        let r = |axis, degrees| AxisRotation { axis, degrees };
        assert!(close(r(Axis::Z, 90.0).apply([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0]));
        assert!(close(r(Axis::X, 90.0).apply([0.0, 1.0, 0.0]), [0.0, 0.0, 1.0]));
        assert!(close(r(Axis::Y, 90.0).apply([0.0, 0.0, 1.0]), [1.0, 0.0, 0.0]));
        let q = r(Axis::Y, 33.0);
        assert!(close(q.inverse().apply(q.apply([0.3, -2.0, 1.5])), [0.3, -2.0, 1.5]));
    }

    #[test]
    fn box_helpers() {
        let b = Aabb {
            min: [-1.0, 0.0, 2.0],
            max: [1.0, 0.5, 5.0],
        };
        assert_eq!(b.center(), [0.0, 0.25, 3.5]);
        assert_eq!(b.max_dim(), 3.0);
        let corners = b.corners();
        assert_eq!(corners[0], b.min);
        assert_eq!(corners[7], b.max);
        let rc = b.rotated_corners(&AxisRotation::identity());
        assert_eq!(rc[0], [-1.0, -0.25, -1.5]);
    }
}
