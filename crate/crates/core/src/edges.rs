//! Sparse edge maps and edge-segment (edgelet) extraction.
//!
//! Edge maps come either from EMAP files produced by an external boundary
//! detector or from the built-in oriented Gaussian-derivative detector. After
//! non-maximum suppression, pixels above the magnitude threshold are chained
//! into 8-connected segments that break once the accumulated orientation change
//! reaches a right angle.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::filters::gaussian_gradient;
use crate::imagio::LabImage;

const MAGIC: &[u8; 4] = b"EMAP";

#[derive(Debug, Error)]
pub enum EdgeError {
    #[error("bad magic: expected EMAP, found {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated edge map: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("invalid {field} value {value} at index {index}")]
    BadValue {
        field: &'static str,
        index: usize,
        value: f32,
    },
    #[error("edge map is already sparse")]
    AlreadySparse,
    #[error("edge map must be sparse (run non-maximum suppression first)")]
    NotSparse,
    #[error("edge map is {got:?}, image is {expected:?}")]
    SizeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense per-pixel edge magnitude and orientation.
///
/// Magnitudes lie in `[0, 255]`; orientations are the edge tangent direction in
/// radians, `[0, pi)`, with y growing downward (a vertical edge has orientation pi/2).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    magnitude: Vec<f32>,
    orientation: Vec<f32>,
    sparse: bool,
    /// Set by the built-in detector when the image has no gradients at all.
    flat: bool,
}

fn check_values(magnitude: &[f32], orientation: &[f32]) -> Result<(), EdgeError> {
    for (index, &value) in magnitude.iter().enumerate() {
        if !value.is_finite() || !(0.0..=255.0).contains(&value) {
            return Err(EdgeError::BadValue {
                field: "magnitude",
                index,
                value,
            });
        }
    }
    for (index, &value) in orientation.iter().enumerate() {
        if !value.is_finite() || value < 0.0 || value as f64 >= PI {
            return Err(EdgeError::BadValue {
                field: "orientation",
                index,
                value,
            });
        }
    }
    Ok(())
}

/// Maps an angle to `[0, pi)` in f32 without landing on the rounded-up value of pi.
fn wrap_orientation(angle: f64) -> f32 {
    let o = angle.rem_euclid(PI) as f32;
    if o as f64 >= PI {
        0.0
    } else {
        o
    }
}

/// Smallest difference between two undirected orientations, in `[0, pi/2]`.
pub fn orientation_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(PI);
    d.min(PI - d)
}

/// Signed change from `a` to `b` modulo pi, in `[-pi/2, pi/2)`.
pub fn orientation_delta(a: f64, b: f64) -> f64 {
    (b - a + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2
}

/// Range of unwrapped orientation seen along a chain, relative to its seed.
#[derive(Debug, Clone, Copy, Default)]
struct TurnSpan {
    lo: f64,
    hi: f64,
}

impl TurnSpan {
    fn extended(self, u: f64) -> Self {
        Self {
            lo: self.lo.min(u),
            hi: self.hi.max(u),
        }
    }

    fn width(self) -> f64 {
        self.hi - self.lo
    }
}

impl EdgeMap {
    pub fn new(
        width: usize,
        height: usize,
        magnitude: Vec<f32>,
        orientation: Vec<f32>,
    ) -> Result<Self, EdgeError> {
        let n = width * height;
        if magnitude.len() != n || orientation.len() != n {
            return Err(EdgeError::Truncated {
                expected: n,
                found: magnitude.len().min(orientation.len()),
            });
        }
        check_values(&magnitude, &orientation)?;
        Ok(Self {
            width,
            height,
            magnitude,
            orientation,
            sparse: false,
            flat: false,
        })
    }

    /// Builds a map that is treated as already suppressed (e.g. a thinned detector output).
    pub fn new_sparse(
        width: usize,
        height: usize,
        magnitude: Vec<f32>,
        orientation: Vec<f32>,
    ) -> Result<Self, EdgeError> {
        let mut map = Self::new(width, height, magnitude, orientation)?;
        map.sparse = true;
        Ok(map)
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            magnitude: vec![0.0; width * height],
            orientation: vec![0.0; width * height],
            sparse: false,
            flat: false,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_sparse(&self) -> bool {
        self.sparse
    }

    pub fn is_flat(&self) -> bool {
        self.flat
    }

    pub fn magnitudes(&self) -> &[f32] {
        &self.magnitude
    }

    pub fn orientations(&self) -> &[f32] {
        &self.orientation
    }

    #[inline]
    pub fn magnitude(&self, x: usize, y: usize) -> f32 {
        self.magnitude[y * self.width + x]
    }

    #[inline]
    pub fn orientation(&self, x: usize, y: usize) -> f32 {
        self.orientation[y * self.width + x]
    }

    /// Overwrites one pixel. Panics on out-of-range values.
    pub fn set(&mut self, x: usize, y: usize, magnitude: f32, orientation: f32) {
        assert!((0.0..=255.0).contains(&magnitude));
        assert!(orientation >= 0.0 && (orientation as f64) < PI);
        let i = y * self.width + x;
        self.magnitude[i] = magnitude;
        self.orientation[i] = orientation;
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, EdgeError> {
        if bytes.len() < 12 {
            if bytes.len() >= 4 && &bytes[..4] != MAGIC {
                return Err(EdgeError::BadMagic(bytes[..4].try_into().unwrap()));
            }
            return Err(EdgeError::Truncated {
                expected: 12,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if &magic != MAGIC {
            return Err(EdgeError::BadMagic(magic));
        }
        let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let n = width * height;
        let expected = 12 + 8 * n;
        if bytes.len() < expected {
            return Err(EdgeError::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        let floats = |start: usize| -> Vec<f32> {
            bytes[start..start + 4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect()
        };
        let magnitude = floats(12);
        let orientation = floats(12 + 4 * n);
        Self::new(width, height, magnitude, orientation)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.magnitude.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for v in self.magnitude.iter().chain(&self.orientation) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

/// Reads an EMAP file. The result is never marked sparse.
pub fn read_edge_map(path: impl AsRef<Path>) -> Result<EdgeMap, EdgeError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    EdgeMap::decode(&bytes)
}

pub fn write_edge_map(map: &EdgeMap, path: impl AsRef<Path>) -> Result<(), EdgeError> {
    std::fs::File::create(path)?.write_all(&map.encode())?;
    Ok(())
}

pub const ORIENTATIONS: [f64; 4] = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];

/// Oriented Gaussian-derivative detector over the three Lab channels.
///
/// The per-pixel magnitude is the strongest steered response over channels and
/// the four orientations, rescaled so the image-wide maximum maps to 255. The
/// orientation is the edge tangent of the winning channel's gradient.
pub fn detect_edges_builtin(lab: &LabImage, sigma: f64) -> EdgeMap {
    let (w, h) = (lab.width(), lab.height());
    let grads: Vec<_> = lab
        .channels()
        .iter()
        .map(|c| gaussian_gradient(c, sigma))
        .collect();
    let mut raw = vec![0.0f64; w * h];
    let mut orientation = vec![0.0f32; w * h];
    for i in 0..w * h {
        let mut best = 0.0;
        let mut best_grad = (0.0, 0.0);
        for (gx, gy) in &grads {
            let (dx, dy) = (gx.values()[i], gy.values()[i]);
            for theta in ORIENTATIONS {
                let r = (theta.cos() * dx + theta.sin() * dy).abs();
                if r > best {
                    best = r;
                    best_grad = (dx, dy);
                }
            }
        }
        raw[i] = best;
        if best > 0.0 {
            orientation[i] = wrap_orientation(best_grad.1.atan2(best_grad.0) + FRAC_PI_2);
        }
    }
    let max = raw.iter().cloned().fold(0.0, f64::max);
    let flat = max <= 1e-12;
    let magnitude = raw
        .iter()
        .map(|&v| {
            if flat {
                0.0
            } else {
                ((v / max) * 255.0).clamp(0.0, 255.0) as f32
            }
        })
        .collect();
    EdgeMap {
        width: w,
        height: h,
        magnitude,
        orientation: if flat { vec![0.0; w * h] } else { orientation },
        sparse: false,
        flat,
    }
}

/// Bilinear sample of the magnitude grid; taps outside the image read as zero.
fn sample_magnitude(map: &EdgeMap, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let (tx, ty) = (x - x0, y - y0);
    let tap = |xi: f64, yi: f64| -> f64 {
        if xi < 0.0 || yi < 0.0 || xi >= map.width as f64 || yi >= map.height as f64 {
            0.0
        } else {
            map.magnitude(xi as usize, yi as usize) as f64
        }
    };
    let mut v = 0.0;
    for (dx, wx) in [(0.0, 1.0 - tx), (1.0, tx)] {
        for (dy, wy) in [(0.0, 1.0 - ty), (1.0, ty)] {
            let wgt = wx * wy;
            if wgt != 0.0 {
                v += wgt * tap(x0 + dx, y0 + dy);
            }
        }
    }
    v
}

/// Interpolated magnitudes one pixel away on either side, across the edge.
pub fn across_edge_neighbors(map: &EdgeMap, x: usize, y: usize) -> (f64, f64) {
    let o = map.orientation(x, y) as f64;
    // unit normal to the tangent (cos o, sin o)
    // snap f32 rounding residue so axis-aligned edges sample exact neighbours
    let snap = |v: f64| if v.abs() < 1e-6 { 0.0 } else { v };
    let (nx, ny) = (snap(o.sin()), snap(-o.cos()));
    let (fx, fy) = (x as f64, y as f64);
    (
        sample_magnitude(map, fx + nx, fy + ny),
        sample_magnitude(map, fx - nx, fy - ny),
    )
}

/// Tolerance used when comparing interpolated magnitudes.
pub fn nms_tolerance(m: f64) -> f64 {
    1e-6 * m.max(1.0)
}

/// Thins edges to one-pixel ridges across the edge direction.
///
/// Plateaus keep exactly one pixel: a pixel must strictly dominate the backward
/// neighbor and at least match the forward neighbor.
pub fn non_max_suppress(map: &EdgeMap) -> Result<EdgeMap, EdgeError> {
    if map.sparse {
        return Err(EdgeError::AlreadySparse);
    }
    let mut out = map.clone();
    for y in 0..map.height {
        for x in 0..map.width {
            let m = map.magnitude(x, y) as f64;
            if m <= 0.0 {
                continue;
            }
            let (fwd, back) = across_edge_neighbors(map, x, y);
            let tol = nms_tolerance(m);
            let keep = m >= fwd - tol && m > back + tol;
            if !keep {
                out.magnitude[y * map.width + x] = 0.0;
            }
        }
    }
    out.sparse = true;
    Ok(out)
}

/// One chain of edge pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Edgelet {
    pub id: usize,
    /// Ordered pixels, consecutive ones 8-connected.
    pub pixels: Vec<(u32, u32)>,
    /// Edge magnitude at each pixel.
    pub magnitudes: Vec<f32>,
    /// Maximum member magnitude.
    pub strength: f64,
    pub centroid: (f64, f64),
    /// Circular mean of member orientations, `[0, pi)`.
    pub mean_orientation: f64,
}

impl Edgelet {
    /// Builds an edgelet from pixels, reading magnitudes and orientations from `map`.
    pub fn from_pixels(id: usize, pixels: Vec<(u32, u32)>, map: &EdgeMap) -> Self {
        assert!(!pixels.is_empty(), "edgelet needs at least one pixel");
        let magnitudes: Vec<f32> = pixels
            .iter()
            .map(|&(x, y)| map.magnitude(x as usize, y as usize))
            .collect();
        let strength = magnitudes.iter().fold(0.0f64, |a, &m| a.max(m as f64));
        let n = pixels.len() as f64;
        let (sx, sy) = pixels
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
        // raster order so the mean does not depend on chain direction
        let mut sorted = pixels.clone();
        sorted.sort_unstable_by_key(|&(x, y)| (y, x));
        let (c, s) = sorted.iter().fold((0.0, 0.0), |(c, s), &(x, y)| {
            let o = 2.0 * map.orientation(x as usize, y as usize) as f64;
            (c + o.cos(), s + o.sin())
        });
        let mean_orientation = if c.abs() < 1e-12 && s.abs() < 1e-12 {
            0.0
        } else {
            (s.atan2(c) / 2.0).rem_euclid(PI)
        };
        Self {
            id,
            pixels,
            magnitudes,
            strength,
            centroid: (sx / n, sy / n),
            mean_orientation,
        }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Inclusive pixel bounding box `(x0, y0, x1, y1)`.
    pub fn bbox(&self) -> (u32, u32, u32, u32) {
        self.pixels.iter().fold(
            (u32::MAX, u32::MAX, 0, 0),
            |(x0, y0, x1, y1), &(x, y)| (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        )
    }
}

const NEIGHBORS: [(isize, isize); 8] = [
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (-1, 1),
    (-1, -1),
    (1, -1),
];

struct Chainer<'a> {
    map: &'a EdgeMap,
    candidate: Vec<bool>,
    assigned: Vec<bool>,
}

impl<'a> Chainer<'a> {
    fn idx(&self, x: usize, y: usize) -> usize {
        y * self.map.width + x
    }

    fn neighbor(&self, x: usize, y: usize, d: (isize, isize)) -> Option<(usize, usize)> {
        let nx = x as isize + d.0;
        let ny = y as isize + d.1;
        if nx < 0 || ny < 0 || nx >= self.map.width as isize || ny >= self.map.height as isize {
            None
        } else {
            Some((nx as usize, ny as usize))
        }
    }

    /// A pixel whose candidate neighbors form three or more separate 8-connected groups.
    fn is_junction(&self, x: usize, y: usize) -> bool {
        let occupied: Vec<(isize, isize)> = NEIGHBORS
            .iter()
            .filter(|&&d| {
                self.neighbor(x, y, d)
                    .is_some_and(|(nx, ny)| self.candidate[self.idx(nx, ny)])
            })
            .copied()
            .collect();
        if occupied.len() < 3 {
            return false;
        }
        let mut group = vec![usize::MAX; occupied.len()];
        let mut groups = 0;
        for start in 0..occupied.len() {
            if group[start] != usize::MAX {
                continue;
            }
            group[start] = groups;
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                for j in 0..occupied.len() {
                    if group[j] == usize::MAX
                        && (occupied[i].0 - occupied[j].0).abs() <= 1
                        && (occupied[i].1 - occupied[j].1).abs() <= 1
                    {
                        group[j] = groups;
                        stack.push(j);
                    }
                }
            }
            groups += 1;
        }
        groups >= 3
    }

    /// Extends a chain from `start`, calling `push` for each accepted pixel.
    ///
    /// Growth stops once the chain's net orientation span would reach pi/2.
    fn grow(&mut self, start: (usize, usize), span: &mut TurnSpan, push: &mut impl FnMut((usize, usize))) {
        let mut cur = start;
        let mut unwrapped = 0.0;
        loop {
            let here = self.map.orientation(cur.0, cur.1) as f64;
            let mut best: Option<((usize, usize), f64, usize)> = None;
            for (rank, &d) in NEIGHBORS.iter().enumerate() {
                let Some(n) = self.neighbor(cur.0, cur.1, d) else {
                    continue;
                };
                let i = self.idx(n.0, n.1);
                if !self.candidate[i] || self.assigned[i] {
                    continue;
                }
                let diff = orientation_distance(here, self.map.orientation(n.0, n.1) as f64);
                let better = match best {
                    None => true,
                    Some((_, bd, br)) => diff < bd - 1e-12 || (diff <= bd + 1e-12 && rank < br),
                };
                if better {
                    best = Some((n, diff, rank));
                }
            }
            let Some((next, _, _)) = best else {
                return;
            };
            let u = unwrapped + orientation_delta(here, self.map.orientation(next.0, next.1) as f64);
            let wider = span.extended(u);
            if wider.width() >= FRAC_PI_2 - 1e-9 {
                return;
            }
            *span = wider;
            unwrapped = u;
            let i = self.idx(next.0, next.1);
            self.assigned[i] = true;
            push(next);
            if self.is_junction(next.0, next.1) {
                return;
            }
            cur = next;
        }
    }
}

/// Groups strong sparse-map pixels into edgelets.
///
/// Pixels with magnitude above `min_mag` are chained greedily in raster order of
/// their seeds; chains longer than `min_len` are kept.
pub fn extract_edgelets(
    map: &EdgeMap,
    min_len: usize,
    min_mag: f64,
) -> Result<Vec<Edgelet>, EdgeError> {
    if !map.sparse {
        return Err(EdgeError::NotSparse);
    }
    let candidate: Vec<bool> = map.magnitude.iter().map(|&m| m as f64 > min_mag).collect();
    let mut chainer = Chainer {
        map,
        assigned: vec![false; candidate.len()],
        candidate,
    };
    let mut out = Vec::new();
    for y in 0..map.height {
        for x in 0..map.width {
            let i = chainer.idx(x, y);
            if !chainer.candidate[i] || chainer.assigned[i] || chainer.is_junction(x, y) {
                continue;
            }
            chainer.assigned[i] = true;
            let mut forward = Vec::new();
            let mut backward = Vec::new();
            let mut span = TurnSpan::default();
            chainer.grow((x, y), &mut span, &mut |p| forward.push(p));
            chainer.grow((x, y), &mut span, &mut |p| backward.push(p));
            if 1 + forward.len() + backward.len() <= min_len {
                continue;
            }
            let pixels: Vec<(u32, u32)> = backward
                .iter()
                .rev()
                .chain(std::iter::once(&(x, y)))
                .chain(forward.iter())
                .map(|&(px, py)| (px as u32, py as u32))
                .collect();
            out.push(Edgelet::from_pixels(out.len(), pixels, map));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagio::{rgb_to_lab, RgbImage};

    fn sparse_with(w: usize, h: usize, pts: &[(usize, usize, f32, f32)]) -> EdgeMap {
        let mut m = EdgeMap::zeros(w, h);
        for &(x, y, mag, o) in pts {
            m.set(x, y, mag, o);
        }
        m.sparse = true;
        m
    }

    #[test]
    fn emap_parse_and_errors() {
        let mut bytes = b"EMAP".to_vec();
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&4u32.to_le_bytes());
        for i in 0..16 {
            bytes.extend_from_slice(&(i as f32 * 10.0).to_le_bytes());
        }
        for _ in 0..16 {
            bytes.extend_from_slice(&1.0f32.to_le_bytes());
        }
        let map = EdgeMap::decode(&bytes).unwrap();
        assert_eq!((map.width(), map.height()), (4, 4));
        assert!(!map.is_sparse());
        assert_eq!(map.magnitude(3, 1), 70.0);
        assert_eq!(map.encode(), bytes);

        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(EdgeMap::decode(&bad), Err(EdgeError::BadMagic(_))));

        let mut short = b"EMAP".to_vec();
        short.extend_from_slice(&100u32.to_le_bytes());
        short.extend_from_slice(&100u32.to_le_bytes());
        for _ in 0..50 {
            short.extend_from_slice(&0f32.to_le_bytes());
        }
        assert!(matches!(EdgeMap::decode(&short), Err(EdgeError::Truncated { .. })));

        let mut nan = bytes.clone();
        nan[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(EdgeMap::decode(&nan), Err(EdgeError::BadValue { .. })));
        let mut big = bytes.clone();
        big[12..16].copy_from_slice(&300f32.to_le_bytes());
        assert!(matches!(EdgeMap::decode(&big), Err(EdgeError::BadValue { .. })));
        let mut pi = bytes;
        let at = 12 + 64;
        pi[at..at + 4].copy_from_slice(&(PI as f32).to_le_bytes());
        assert!(matches!(EdgeMap::decode(&pi), Err(EdgeError::BadValue { .. })));
    }

    #[test]
    fn builtin_on_constant_image_is_flat() {
        let img = RgbImage::from_fn(20, 20, |_, _| [90, 120, 30]).unwrap();
        let map = detect_edges_builtin(&rgb_to_lab(&img), 1.0);
        assert!(map.is_flat());
        assert!(map.magnitudes().iter().all(|&m| m == 0.0));
    }

    #[test]
    fn builtin_vertical_step() {
        let img =
            RgbImage::from_fn(24, 20, |x, _| if x < 12 { [0, 0, 0] } else { [255, 255, 255] })
                .unwrap();
        let map = detect_edges_builtin(&rgb_to_lab(&img), 1.0);
        for y in 0..20 {
            let row_max = (0..24).map(|x| map.magnitude(x, y)).fold(0.0, f32::max);
            assert_eq!(row_max, 255.0);
            assert_eq!(map.magnitude(11, y), 255.0);
            assert_eq!(map.magnitude(12, y), 255.0);
            assert!((map.orientation(11, y) as f64 - FRAC_PI_2).abs() < 1e-6);
            assert_eq!(map.magnitude(2, y), 0.0);
        }
    }

    #[test]
    fn nms_trivial_cases() {
        let zero = EdgeMap::zeros(8, 8);
        let out = non_max_suppress(&zero).unwrap();
        assert!(out.is_sparse());
        assert!(out.magnitudes().iter().all(|&m| m == 0.0));
        assert!(matches!(non_max_suppress(&out), Err(EdgeError::AlreadySparse)));

        let mut single = EdgeMap::zeros(8, 8);
        single.set(4, 4, 77.0, 0.3);
        let out = non_max_suppress(&single).unwrap();
        assert_eq!(out.magnitudes(), single.magnitudes());
    }

    #[test]
    fn nms_triangle_profile_keeps_peak() {
        // horizontal edge (orientation 0): profile runs down the column
        let mut map = EdgeMap::zeros(9, 9);
        for (y, m) in [(2, 10.0), (3, 20.0), (4, 30.0), (5, 20.0), (6, 10.0)] {
            for x in 0..9 {
                map.set(x, y, m, 0.0);
            }
        }
        let out = non_max_suppress(&map).unwrap();
        for y in 0..9 {
            for x in 0..9 {
                let expect = if y == 4 { 30.0 } else { 0.0 };
                assert_eq!(out.magnitude(x, y), expect, "({x},{y})");
            }
        }
    }

    #[test]
    fn nms_plateau_keeps_single_ridge() {
        let mut map = EdgeMap::zeros(10, 6);
        for y in 0..6 {
            map.set(4, y, 200.0, FRAC_PI_2 as f32);
            map.set(5, y, 200.0, FRAC_PI_2 as f32);
        }
        let out = non_max_suppress(&map).unwrap();
        for y in 0..6 {
            let kept = (out.magnitude(4, y) > 0.0) as u8 + (out.magnitude(5, y) > 0.0) as u8;
            assert_eq!(kept, 1);
        }
    }

    #[test]
    fn chaining_straight_line() {
        let pts: Vec<_> = (0..30).map(|x| (x + 2, 5, 100.0, 0.0)).collect();
        let map = sparse_with(40, 10, &pts);
        let e = extract_edgelets(&map, 15, 40.0).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].len(), 30);
        assert_eq!(e[0].strength, 100.0);
        assert_eq!(e[0].centroid, (16.5, 5.0));
    }

    #[test]
    fn chaining_requires_sparse_and_handles_empty() {
        let map = EdgeMap::zeros(10, 10);
        assert!(matches!(extract_edgelets(&map, 15, 40.0), Err(EdgeError::NotSparse)));
        let map = sparse_with(10, 10, &[]);
        assert!(extract_edgelets(&map, 15, 40.0).unwrap().is_empty());
    }

    #[test]
    fn chaining_threshold_gaps() {
        let pts: Vec<_> = (0..30)
            .map(|x| (x + 2, 5, if x % 2 == 0 { 100.0 } else { 35.0 }, 0.0))
            .collect();
        let map = sparse_with(40, 10, &pts);
        assert!(extract_edgelets(&map, 15, 40.0).unwrap().is_empty());
    }

    #[test]
    fn thresholds_are_strict() {
        let pts: Vec<_> = (0..16).map(|x| (x + 2, 5, 41.0, 0.0)).collect();
        let map = sparse_with(40, 10, &pts);
        assert_eq!(extract_edgelets(&map, 15, 40.0).unwrap().len(), 1);
        let pts: Vec<_> = (0..15).map(|x| (x + 2, 5, 41.0, 0.0)).collect();
        let map = sparse_with(40, 10, &pts);
        assert!(extract_edgelets(&map, 15, 40.0).unwrap().is_empty());
        let pts: Vec<_> = (0..20).map(|x| (x + 2, 5, 40.0, 0.0)).collect();
        let map = sparse_with(40, 10, &pts);
        assert!(extract_edgelets(&map, 15, 40.0).unwrap().is_empty());
    }

    #[test]
    fn t_junction_pixel_is_shared_once() {
        let mut pts: Vec<_> = (0..41).map(|x| (x + 2, 5, 100.0, 0.0)).collect();
        pts.extend((6..30).map(|y| (22, y, 100.0, FRAC_PI_2 as f32)));
        let map = sparse_with(50, 32, &pts);
        let e = extract_edgelets(&map, 15, 40.0).unwrap();
        let mut seen = std::collections::HashSet::new();
        for el in &e {
            for p in &el.pixels {
                assert!(seen.insert(*p), "pixel {p:?} in two edgelets");
            }
        }
        assert!(e.len() >= 2);
    }

    #[test]
    fn orientation_jitter_does_not_cut_chains() {
        let pts: Vec<_> = (5..45)
            .map(|x| (x, 10, 100.0, if x % 2 == 0 { 0.2 } else { PI as f32 - 0.2 }))
            .collect();
        let map = sparse_with(50, 20, &pts);
        let es = extract_edgelets(&map, 15, 40.0).unwrap();
        assert_eq!(es.len(), 1);
        assert_eq!(es[0].len(), 40);
    }

    #[test]
    fn orientation_delta_is_signed() {
        assert!((orientation_delta(0.1, PI - 0.1) + 0.2).abs() < 1e-12);
        assert!((orientation_delta(PI - 0.1, 0.1) - 0.2).abs() < 1e-12);
        assert_eq!(orientation_delta(0.0, FRAC_PI_2), -FRAC_PI_2);
    }
}
