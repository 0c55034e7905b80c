//! World-space shapes and the overlap tests used by voxelization.

use glam::{DQuat, DVec3};

/// Axis-aligned box given by its corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: DVec3,
    pub max: DVec3,
}

impl Aabb {
    pub fn new(min: DVec3, max: DVec3) -> Self {
        Self { min, max }
    }

    pub fn center(&self) -> DVec3 {
        (self.min + self.max) * 0.5
    }

    pub fn half_extents(&self) -> DVec3 {
        (self.max - self.min) * 0.5
    }

    pub fn contains(&self, p: DVec3) -> bool {
        p.cmpge(self.min).all() && p.cmple(self.max).all()
    }

    pub fn distance_to(&self, p: DVec3) -> f64 {
        (p.clamp(self.min, self.max) - p).length()
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb::new(self.min.min(other.min), self.max.max(other.max))
    }
}

/// A scene shape posed at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PosedShape {
    /// Oriented box: local axes are the columns of `rotation`.
    Box {
        center: DVec3,
        rotation: DQuat,
        half_extents: DVec3,
    },
    /// Capsule around the segment `a..b`.
    Capsule { a: DVec3, b: DVec3, radius: f64 },
}

fn segment_point_distance(a: DVec3, b: DVec3, p: DVec3) -> f64 {
    let ab = b - a;
    let len2 = ab.length_squared();
    let s = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + ab * s - p).length()
}

/// Minimum distance between a segment and a box. The distance to a convex set
/// is convex along a line, so a ternary search converges to the minimum.
fn segment_box_distance(a: DVec3, b: DVec3, boxed: &Aabb) -> f64 {
    let f = |s: f64| boxed.distance_to(a + (b - a) * s);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..90 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f((lo + hi) * 0.5).min(f(0.0)).min(f(1.0))
}

impl PosedShape {
    pub fn bounds(&self) -> Aabb {
        match *self {
            PosedShape::Box {
                center,
                rotation,
                half_extents,
            } => {
                let axes = [rotation * DVec3::X, rotation * DVec3::Y, rotation * DVec3::Z];
                let ext = axes[0].abs() * half_extents.x
                    + axes[1].abs() * half_extents.y
                    + axes[2].abs() * half_extents.z;
                Aabb::new(center - ext, center + ext)
            }
            PosedShape::Capsule { a, b, radius } => {
                let r = DVec3::splat(radius);
                Aabb::new(a.min(b) - r, a.max(b) + r)
            }
        }
    }

    pub fn contains(&self, p: DVec3) -> bool {
        match *self {
            PosedShape::Box {
                center,
                rotation,
                half_extents,
            } => {
                let local = rotation.inverse() * (p - center);
                local.abs().cmple(half_extents).all()
            }
            PosedShape::Capsule { a, b, radius } => segment_point_distance(a, b, p) <= radius,
        }
    }

    /// True when the shape and `cell` share interior volume.
    pub fn overlaps_aabb(&self, cell: &Aabb) -> bool {
        match *self {
            PosedShape::Box {
                center,
                rotation,
                half_extents,
            } => obb_overlaps_aabb(center, rotation, half_extents, cell),
            PosedShape::Capsule { a, b, radius } => segment_box_distance(a, b, cell) < radius,
        }
    }

    /// Distance from a point to the shape surface (0 inside).
    pub fn distance_to(&self, p: DVec3) -> f64 {
        match *self {
            PosedShape::Box {
                center,
                rotation,
                half_extents,
            } => {
                let local = rotation.inverse() * (p - center);
                (local.abs() - half_extents).max(DVec3::ZERO).length()
            }
            PosedShape::Capsule { a, b, radius } => {
                (segment_point_distance(a, b, p) - radius).max(0.0)
            }
        }
    }

    /// The 8 corners of the shape's local bounding box (for wireframes).
    pub fn wire_corners(&self) -> [DVec3; 8] {
        let (center, rotation, half) = match *self {
            PosedShape::Box {
                center,
                rotation,
                half_extents,
            } => (center, rotation, half_extents),
            PosedShape::Capsule { a, b, radius } => {
                let axis = b - a;
                let len = axis.length();
                let rotation = if len > 1e-12 {
                    DQuat::from_rotation_arc(DVec3::Y, axis / len)
                } else {
                    DQuat::IDENTITY
                };
                (
                    (a + b) * 0.5,
                    rotation,
                    DVec3::new(radius, len * 0.5 + radius, radius),
                )
            }
        };
        let mut out = [DVec3::ZERO; 8];
        for (i, c) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            *c = center + rotation * (half * DVec3::new(sx, sy, sz));
        }
        out
    }
}

/// The 12 edges of a box as index pairs into [`PosedShape::wire_corners`].
pub const BOX_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Separating-axis test between an oriented box and an axis-aligned box.
/// Touching faces do not count as overlap.
fn obb_overlaps_aabb(center: DVec3, rotation: DQuat, half: DVec3, cell: &Aabb) -> bool {
    let cell_half = cell.half_extents();
    let d = center - cell.center();
    let u = [rotation * DVec3::X, rotation * DVec3::Y, rotation * DVec3::Z];
    let e = [DVec3::X, DVec3::Y, DVec3::Z];
    let separated = |axis: DVec3| -> bool {
        if axis.length_squared() < 1e-20 {
            return false;
        }
        let ra = cell_half.x * axis.x.abs() + cell_half.y * axis.y.abs() + cell_half.z * axis.z.abs();
        let rb = half.x * axis.dot(u[0]).abs()
            + half.y * axis.dot(u[1]).abs()
            + half.z * axis.dot(u[2]).abs();
        axis.dot(d).abs() >= ra + rb
    };
    for axis in e.iter().chain(u.iter()) {
        if separated(*axis) {
            return false;
        }
    }
    for a in &e {
        for b in &u {
            if separated(a.cross(*b)) {
                return false;
            }
        }
    }
    true
}
