//! Small geometric helpers shared by placement, previews and playback.

use glam::DVec3;

pub const WORLD_UP: DVec3 = DVec3::Y;

/// Rounds `value` to 9 significant digits.
///
/// Every float that ends up in a serialized artifact passes through here so
/// that save/load cycles are bit-stable.
pub fn quantize(value: f64) -> f64 {
    if !value.is_finite() || value == 0.0 {
        return value;
    }
    format!("{value:.8e}").parse().unwrap_or(value)
}

pub fn quantize_vec(v: DVec3) -> DVec3 {
    DVec3::new(quantize(v.x), quantize(v.y), quantize(v.z))
}

/// Orthonormal camera basis `(right, up, forward)` for a look direction.
///
/// Falls back to world X as the right axis when looking straight up or down.
pub fn camera_basis(forward: DVec3) -> (DVec3, DVec3, DVec3) {
    let f = forward.normalize();
    let mut right = f.cross(WORLD_UP);
    if right.length_squared() < 1e-18 {
        right = DVec3::X;
    }
    let right = right.normalize();
    let up = right.cross(f);
    (right, up, f)
}

/// Yaw/pitch (radians) of a direction; yaw is measured about +Y from +Z.
pub fn yaw_pitch(dir: DVec3) -> (f64, f64) {
    let d = dir.normalize();
    (d.x.atan2(d.z), d.y.clamp(-1.0, 1.0).asin())
}

pub fn direction_from_yaw_pitch(yaw: f64, pitch: f64) -> DVec3 {
    DVec3::new(pitch.cos() * yaw.sin(), pitch.sin(), pitch.cos() * yaw.cos())
}

/// Pinhole projection into normalized device coordinates (`[-1, 1]` on both
/// axes inside the frame). Returns `None` for points at or behind the camera.
pub fn project_ndc(
    eye: DVec3,
    forward: DVec3,
    fov_y: f64,
    aspect: f64,
    point: DVec3,
) -> Option<(f64, f64)> {
    let (right, up, f) = camera_basis(forward);
    let rel = point - eye;
    let depth = rel.dot(f);
    if depth <= 1e-9 {
        return None;
    }
    let tan_half = (fov_y * 0.5).tan();
    let x = rel.dot(right) / (depth * tan_half * aspect);
    let y = rel.dot(up) / (depth * tan_half);
    Some((x, y))
}

/// Radical inverse in `base`; element `index` of a Halton sequence.
pub fn halton(mut index: u32, base: u32) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = f64::from(base);
    while index > 0 {
        f /= b;
        r += f * f64::from(index % base);
        index /= base;
    }
    r
}

/// Hermite smoothstep on `[0, 1]`.
pub fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}
