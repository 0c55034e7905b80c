//! Voxelized collision proxies.
//!
//! Each shot marker gets one [`OccupancyGrid`] covering the proxy volume that
//! governs it, baked from the scene posed at the marker's time. Space outside
//! the grid is free. Grids answer point, sphere, ray and capsule queries and
//! serialize to a small little-endian binary format.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use glam::DVec3;
use thiserror::Error;

use crate::geometry::Aabb;
use crate::scene::{ProxyVolume, SceneDescription, SceneError, Timeline};

pub const GRID_MAGIC: [u8; 4] = *b"OGRD";
pub const GRID_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum ProxyError {
    #[error("grid format error: {0}")]
    Format(String),
    #[error("marker `{0}` is not covered by any proxy volume")]
    NoProxy(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Dense bitset of cell occupancy.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Bits {
    len: usize,
    words: Vec<u64>,
}

impl Bits {
    fn new(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Lazily built Chebyshev dilations, keyed by radius in cells.
#[derive(Default)]
struct DilationCache(RwLock<HashMap<usize, Arc<Bits>>>);

impl Clone for DilationCache {
    fn clone(&self) -> Self {
        Self::default()
    }
}

impl fmt::Debug for DilationCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DilationCache")
    }
}

#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    pub origin: DVec3,
    pub cell_size: f64,
    pub dims: [usize; 3],
    pub marker_id: String,
    bits: Bits,
    dilations: DilationCache,
}

impl PartialEq for OccupancyGrid {
    fn eq(&self, other: &Self) -> bool {
        self.origin == other.origin
            && self.cell_size == other.cell_size
            && self.dims == other.dims
            && self.marker_id == other.marker_id
            && self.bits == other.bits
    }
}

impl OccupancyGrid {
    /// An all-free grid covering `volume`.
    pub fn empty(volume: &ProxyVolume, marker_id: impl Into<String>) -> Self {
        Self::with_dims(volume.min, volume.cell_size, volume.dims(), marker_id)
    }

    pub fn with_dims(origin: DVec3, cell_size: f64, dims: [usize; 3], marker_id: impl Into<String>) -> Self {
        Self {
            origin,
            cell_size,
            dims,
            marker_id: marker_id.into(),
            bits: Bits::new(dims[0] * dims[1] * dims[2]),
            dilations: DilationCache::default(),
        }
    }

    pub fn cell_count(&self) -> usize {
        self.bits.len
    }

    pub fn occupied_count(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn bounds(&self) -> Aabb {
        let ext = DVec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.cell_size;
        Aabb::new(self.origin, self.origin + ext)
    }

    fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    pub fn cell_box(&self, c: [usize; 3]) -> Aabb {
        let min = self.origin + DVec3::new(c[0] as f64, c[1] as f64, c[2] as f64) * self.cell_size;
        Aabb::new(min, min + DVec3::splat(self.cell_size))
    }

    pub fn cell_center(&self, c: [usize; 3]) -> DVec3 {
        self.cell_box(c).center()
    }

    pub fn is_cell_occupied(&self, c: [usize; 3]) -> bool {
        self.bits.get(self.index(c))
    }

    pub fn set_occupied(&mut self, c: [usize; 3]) {
        let i = self.index(c);
        self.bits.set(i);
        self.dilations = DilationCache::default();
    }

    /// Cell containing `p` under floor indexing, if inside the grid.
    pub fn cell_of(&self, p: DVec3) -> Option<[usize; 3]> {
        let rel = (p - self.origin) / self.cell_size;
        let mut out = [0; 3];
        for (axis, r) in [rel.x, rel.y, rel.z].into_iter().enumerate() {
            if !(r >= 0.0) {
                return None;
            }
            let i = r.floor() as usize;
            if i >= self.dims[axis] {
                return None;
            }
            out[axis] = i;
        }
        Some(out)
    }

    pub fn contains(&self, p: DVec3) -> bool {
        self.cell_of(p).is_some()
    }

    /// Inclusive cell index range overlapping `b`, clamped to the grid.
    fn cell_range(&self, b: &Aabb) -> Option<([usize; 3], [usize; 3])> {
        let lo = (b.min - self.origin) / self.cell_size;
        let hi = (b.max - self.origin) / self.cell_size;
        let mut a = [0; 3];
        let mut z = [0; 3];
        for axis in 0..3 {
            let (l, h) = (lo[axis].floor(), hi[axis].floor());
            if h < 0.0 || l >= self.dims[axis] as f64 {
                return None;
            }
            a[axis] = l.max(0.0) as usize;
            z[axis] = (h as usize).min(self.dims[axis] - 1);
        }
        Some((a, z))
    }

    fn for_cells_in(&self, b: &Aabb, mut f: impl FnMut([usize; 3]) -> bool) -> bool {
        let Some((a, z)) = self.cell_range(b) else {
            return false;
        };
        for k in a[2]..=z[2] {
            for j in a[1]..=z[1] {
                for i in a[0]..=z[0] {
                    if f([i, j, k]) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// True when a sphere shares volume with any occupied cell.
    pub fn sphere_overlaps(&self, center: DVec3, radius: f64) -> bool {
        if radius <= 0.0 {
            return is_occupied(self, center);
        }
        let b = Aabb::new(center - DVec3::splat(radius), center + DVec3::splat(radius));
        self.for_cells_in(&b, |c| {
            self.is_cell_occupied(c) && self.cell_box(c).distance_to(center) < radius
        })
    }

    /// Occupied cells sharing volume with a sphere, in index order.
    pub fn overlapping_cells(&self, center: DVec3, radius: f64) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        let b = Aabb::new(center - DVec3::splat(radius), center + DVec3::splat(radius));
        self.for_cells_in(&b, |c| {
            if self.is_cell_occupied(c) && self.cell_box(c).distance_to(center) < radius {
                out.push(c);
            }
            false
        });
        out
    }

    /// Grid whose cells are occupied if any cell within `k` steps along every
    /// axis is occupied.
    pub fn dilated(&self, k: usize) -> OccupancyGrid {
        let mut out = self.clone();
        out.bits = (*self.dilated_bits(k)).clone();
        out
    }

    fn dilated_bits(&self, k: usize) -> Arc<Bits> {
        if k == 0 {
            return Arc::new(self.bits.clone());
        }
        if let Some(b) = self.dilations.0.read().expect("cache lock").get(&k) {
            return Arc::clone(b);
        }
        let [nx, ny, nz] = self.dims;
        let mut cur: Vec<bool> = (0..self.bits.len).map(|i| self.bits.get(i)).collect();
        let strides = [1, nx, nx * ny];
        for axis in 0..3 {
            let n = self.dims[axis];
            let stride = strides[axis];
            let mut next = vec![false; cur.len()];
            for idx in 0..cur.len() {
                let pos = (idx / stride) % n;
                let lo = pos.saturating_sub(k);
                let hi = (pos + k).min(n - 1);
                let base = idx - pos * stride;
                next[idx] = (lo..=hi).any(|p| cur[base + p * stride]);
            }
            cur = next;
        }
        let _ = (ny, nz);
        let mut bits = Bits::new(cur.len());
        for (i, v) in cur.iter().enumerate() {
            if *v {
                bits.set(i);
            }
        }
        let bits = Arc::new(bits);
        self.dilations
            .0
            .write()
            .expect("cache lock")
            .insert(k, Arc::clone(&bits));
        bits
    }

    fn raycast_bits(&self, bits: &Bits, from: DVec3, to: DVec3) -> Option<f64> {
        let dir = to - from;
        let len = dir.length();
        if len == 0.0 {
            let c = self.cell_of(from)?;
            return bits.get(self.index(c)).then_some(0.0);
        }
        let bounds = self.bounds();
        let (mut s_enter, mut s_exit) = (0.0f64, 1.0f64);
        for axis in 0..3 {
            if dir[axis].abs() < 1e-300 {
                if from[axis] < bounds.min[axis] || from[axis] >= bounds.max[axis] {
                    return None;
                }
            } else {
                let a = (bounds.min[axis] - from[axis]) / dir[axis];
                let b = (bounds.max[axis] - from[axis]) / dir[axis];
                s_enter = s_enter.max(a.min(b));
                s_exit = s_exit.min(a.max(b));
            }
        }
        if s_enter > s_exit {
            return None;
        }
        let start = from + dir * s_enter;
        let mut cell = [0i64; 3];
        let mut step = [0i64; 3];
        for axis in 0..3 {
            let r = ((start[axis] - self.origin[axis]) / self.cell_size).floor() as i64;
            cell[axis] = r.clamp(0, self.dims[axis] as i64 - 1);
            step[axis] = if dir[axis] > 0.0 {
                1
            } else if dir[axis] < 0.0 {
                -1
            } else {
                0
            };
        }
        let boundary_s = |cell: &[i64; 3], axis: usize| -> f64 {
            if step[axis] == 0 {
                return f64::INFINITY;
            }
            let edge = cell[axis] + i64::from(step[axis] > 0);
            let coord = self.origin[axis] + edge as f64 * self.cell_size;
            (coord - from[axis]) / dir[axis]
        };
        let mut s_cell = s_enter;
        loop {
            let c = [cell[0] as usize, cell[1] as usize, cell[2] as usize];
            if bits.get(self.index(c)) {
                return Some(s_cell * len);
            }
            let next = [boundary_s(&cell, 0), boundary_s(&cell, 1), boundary_s(&cell, 2)];
            let axis = (0..3)
                .min_by(|a, b| next[*a].total_cmp(&next[*b]))
                .expect("three axes");
            s_cell = next[axis];
            if s_cell > s_exit {
                return None;
            }
            cell[axis] += step[axis];
            if cell[axis] < 0 || cell[axis] >= self.dims[axis] as i64 {
                return None;
            }
        }
    }
}

/// Occupancy of the cell containing `point`; outside the grid is free.
pub fn is_occupied(grid: &OccupancyGrid, point: DVec3) -> bool {
    grid.cell_of(point).is_some_and(|c| grid.is_cell_occupied(c))
}

/// Distance along `from → to` at which the segment first enters an occupied
/// cell (3D DDA).
pub fn raycast(grid: &OccupancyGrid, from: DVec3, to: DVec3) -> Option<f64> {
    grid.raycast_bits(&grid.bits, from, to)
}

/// Whether a sphere of `radius` swept from `from` to `to` stays clear of
/// occupied cells. Conservative: casts a ray through the grid dilated by
/// `ceil(radius / cell_size)` cells.
pub fn capsule_cast(grid: &OccupancyGrid, from: DVec3, to: DVec3, radius: f64) -> bool {
    capsule_hit(grid, from, to, radius).is_none()
}

/// Like [`capsule_cast`] but returns the hit distance on the dilated grid.
pub fn capsule_hit(grid: &OccupancyGrid, from: DVec3, to: DVec3, radius: f64) -> Option<f64> {
    let k = (radius.max(0.0) / grid.cell_size - 1e-12).ceil().max(0.0) as usize;
    if k == 0 {
        return raycast(grid, from, to);
    }
    let bits = grid.dilated_bits(k);
    grid.raycast_bits(&bits, from, to)
}

/// Occupancy of `volume` with every object not in `exclude` posed at `t`.
pub fn voxelize_excluding(
    scene: &SceneDescription,
    volume: &ProxyVolume,
    t: f64,
    exclude: &[String],
    marker_id: &str,
) -> OccupancyGrid {
    let mut grid = OccupancyGrid::empty(volume, marker_id);
    for obj in scene.objects.iter().filter(|o| !exclude.contains(&o.id)) {
        let shape = obj.posed_shape(t);
        let Some((a, z)) = grid.cell_range(&shape.bounds()) else {
            continue;
        };
        for k in a[2]..=z[2] {
            for j in a[1]..=z[1] {
                for i in a[0]..=z[0] {
                    let c = [i, j, k];
                    if shape.overlaps_aabb(&grid.cell_box(c)) {
                        let idx = grid.index(c);
                        grid.bits.set(idx);
                    }
                }
            }
        }
    }
    grid
}

/// Occupancy of `volume` with the whole scene posed at `t`.
pub fn voxelize(scene: &SceneDescription, volume: &ProxyVolume, t: f64) -> OccupancyGrid {
    voxelize_excluding(scene, volume, t, &[], "")
}

/// The proxy that governs a marker: the first containing its subject point,
/// otherwise the nearest.
pub fn governing_proxy(timeline: &Timeline, subject: DVec3) -> Option<&ProxyVolume> {
    timeline
        .proxies
        .iter()
        .find(|p| p.contains(subject))
        .or_else(|| {
            timeline.proxies.iter().min_by(|a, b| {
                Aabb::new(a.min, a.max)
                    .distance_to(subject)
                    .total_cmp(&Aabb::new(b.min, b.max).distance_to(subject))
            })
        })
}

/// Bakes one grid per marker, in marker order. The marker's own targets are
/// left out of its grid: they are what the camera looks at, and placement
/// checks clearance to them analytically.
pub fn bake(scene: &SceneDescription, timeline: &Timeline) -> Result<Vec<OccupancyGrid>, ProxyError> {
    let mut jobs = Vec::new();
    for m in &timeline.markers {
        let subject = scene.subject_point(&m.targets, m.time)?;
        let volume = governing_proxy(timeline, subject).ok_or_else(|| ProxyError::NoProxy(m.id.clone()))?;
        jobs.push((m, *volume));
    }
    let grids = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(m, v)| s.spawn(move || voxelize_excluding(scene, v, m.time, &m.targets, &m.id)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("voxelization thread"))
            .collect()
    });
    Ok(grids)
}

/// Binary layout (little-endian): magic `OGRD`, version `u16`, reserved `u16`,
/// origin `3 × f64`, cell size `f64`, dims `3 × u32`, marker id length `u16`
/// and UTF-8 bytes, then `ceil(n / 8)` bytes of LSB-first occupancy bits with
/// cell index `x + nx * (y + ny * z)`.
pub fn serialize_grid(grid: &OccupancyGrid) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&GRID_MAGIC);
    out.extend_from_slice(&GRID_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    for v in [grid.origin.x, grid.origin.y, grid.origin.z, grid.cell_size] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for d in grid.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    let id = grid.marker_id.as_bytes();
    out.extend_from_slice(&(id.len() as u16).to_le_bytes());
    out.extend_from_slice(id);
    let n = grid.bits.len;
    let mut packed = vec![0u8; n.div_ceil(8)];
    for i in 0..n {
        if grid.bits.get(i) {
            packed[i / 8] |= 1 << (i % 8);
        }
    }
    out.extend_from_slice(&packed);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProxyError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or_else(|| {
            ProxyError::Format(format!("truncated at byte {} (need {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, ProxyError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, ProxyError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, ProxyError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn deserialize_grid(bytes: &[u8]) -> Result<OccupancyGrid, ProxyError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != GRID_MAGIC {
        return Err(ProxyError::Format("bad magic".into()));
    }
    let version = r.u16()?;
    if version != GRID_VERSION {
        return Err(ProxyError::Format(format!("unsupported version {version}")));
    }
    r.u16()?;
    let origin = DVec3::new(r.f64()?, r.f64()?, r.f64()?);
    let cell_size = r.f64()?;
    if !(cell_size > 0.0) || !origin.is_finite() {
        return Err(ProxyError::Format("invalid origin or cell size".into()));
    }
    let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    if dims.iter().any(|d| *d == 0 || *d > crate::scene::MAX_PROXY_CELLS) {
        return Err(ProxyError::Format(format!("invalid dims {dims:?}")));
    }
    let id_len = r.u16()? as usize;
    let marker_id = std::str::from_utf8(r.take(id_len)?)
        .map_err(|_| ProxyError::Format("marker id is not UTF-8".into()))?
        .to_string();
    let mut grid = OccupancyGrid::with_dims(origin, cell_size, dims, marker_id);
    let n = grid.bits.len;
    let packed = r.take(n.div_ceil(8))?;
    if r.pos != bytes.len() {
        return Err(ProxyError::Format(format!(
            "{} trailing bytes after bitset",
            bytes.len() - r.pos
        )));
    }
    for i in 0..n {
        if packed[i / 8] >> (i % 8) & 1 == 1 {
            grid.bits.set(i);
        }
    }
    Ok(grid)
}
