use std::path::Path;

use crate::edges::Edgelet;

use super::{CrfError, Labeling};

/// Binary object mask (true = object).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    /// Loads any decodable image; pixels brighter than mid-gray are object.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CrfError> {
        let img = image::open(path.as_ref())
            .map_err(|e| CrfError::Parse(format!("{}: {e}", path.as_ref().display())))?
            .to_luma8();
        let (w, h) = img.dimensions();
        Ok(Self {
            width: w as usize,
            height: h as usize,
            data: img.pixels().map(|p| p.0[0] > 127).collect(),
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Object pixels with a 4-neighbour outside the object; the image border does not count.
    pub fn boundary(&self) -> Vec<bool> {
        let mut out = vec![false; self.data.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    continue;
                }
                let outside = |nx: isize, ny: isize| {
                    nx >= 0
                        && ny >= 0
                        && (nx as usize) < self.width
                        && (ny as usize) < self.height
                        && !self.get(nx as usize, ny as usize)
                };
                let (xi, yi) = (x as isize, y as isize);
                if outside(xi - 1, yi) || outside(xi + 1, yi) || outside(xi, yi - 1) || outside(xi, yi + 1) {
                    out[y * self.width + x] = true;
                }
            }
        }
        out
    }

    /// Pixels within Euclidean distance `tol` of the boundary.
    pub fn near_boundary(&self, tol: usize) -> Vec<bool> {
        let boundary = self.boundary();
        let t = tol as isize;
        let mut out = vec![false; self.data.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                if !boundary[y * self.width + x] {
                    continue;
                }
                for dy in -t..=t {
                    for dx in -t..=t {
                        if dx * dx + dy * dy > t * t {
                            continue;
                        }
                        let (nx, ny) = (x as isize + dx, y as isize + dy);
                        if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
                            out[ny as usize * self.width + nx as usize] = true;
                        }
                    }
                }
            }
        }
        out
    }
}

/// Two-cluster 1-D k-means seeded at the extremes; `true` marks the high cluster.
///
/// Returns `None` when all values are equal. Points equidistant from both
/// centroids go to the low cluster.
pub fn kmeans_two(values: &[f64]) -> Option<Vec<bool>> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || !(hi > lo) {
        return None;
    }
    let (mut c_lo, mut c_hi) = (lo, hi);
    let mut assign: Vec<bool> = Vec::new();
    loop {
        let next: Vec<bool> = values
            .iter()
            .map(|&v| (v - c_hi).abs() < (v - c_lo).abs())
            .collect();
        if next == assign {
            return Some(assign);
        }
        assign = next;
        let mean = |high: bool| {
            let (s, n) = values
                .iter()
                .zip(&assign)
                .filter(|(_, &a)| a == high)
                .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
            (n > 0).then(|| s / n as f64)
        };
        c_lo = mean(false).unwrap_or(c_lo);
        c_hi = mean(true).unwrap_or(c_hi);
    }
}

/// Object/non-object training labels from a ground-truth mask.
///
/// An edgelet is object when at least half of its pixels lie within
/// `boundary_tol` of the mask boundary, or when its strength falls in the
/// high cluster of a two-means split of all strengths.
pub fn weak_labels(
    edgelets: &[Edgelet],
    mask: &BinaryMask,
    image_dims: (usize, usize),
    boundary_tol: usize,
) -> Result<Labeling, CrfError> {
    if (mask.width, mask.height) != image_dims {
        return Err(CrfError::SizeMismatch(format!(
            "mask is {}x{}, image is {}x{}",
            mask.width, mask.height, image_dims.0, image_dims.1
        )));
    }
    let near = mask.near_boundary(boundary_tol);
    let strengths: Vec<f64> = edgelets.iter().map(|e| e.strength).collect();
    let high = kmeans_two(&strengths);
    let mut labels = Vec::with_capacity(edgelets.len());
    for (k, e) in edgelets.iter().enumerate() {
        let mut hits = 0;
        for &(x, y) in &e.pixels {
            let (x, y) = (x as usize, y as usize);
            if x >= mask.width || y >= mask.height {
                return Err(CrfError::SizeMismatch(format!(
                    "edgelet pixel ({x}, {y}) outside {}x{} mask",
                    mask.width, mask.height
                )));
            }
            hits += near[y * mask.width + x] as usize;
        }
        let on_boundary = 2 * hits >= e.pixels.len();
        let strong = high.as_ref().is_some_and(|h| h[k]);
        labels.push(u8::from(on_boundary || strong));
    }
    Ok(Labeling(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edges::EdgeMap;

    fn line(id: usize, y: u32, mag: f32) -> (Edgelet, EdgeMap) {
        let mut map = EdgeMap::zeros(60, 60);
        for x in 5..25 {
            map.set(x, y as usize, mag, 0.0);
        }
        (Edgelet::from_pixels(id, (5..25).map(|x| (x, y)).collect(), &map), map)
    }

    #[test]
    fn boundary_rule() {
        let mask = BinaryMask::from_fn(60, 60, |_, y| y >= 30);
        let (e, _) = line(0, 31, 100.0);
        let (f, _) = line(1, 10, 100.0);
        let labels = weak_labels(&[e, f], &mask, (60, 60), 2).unwrap();
        assert_eq!(labels, Labeling(vec![1, 0]));
    }

    #[test]
    fn kmeans_split() {
        let mask = BinaryMask::from_fn(60, 60, |_, _| false);
        let es: Vec<_> = [10.0, 12.0, 200.0, 210.0]
            .iter()
            .enumerate()
            .map(|(k, &m)| line(k, 5 + 5 * k as u32, m).0)
            .collect();
        assert_eq!(weak_labels(&es, &mask, (60, 60), 2).unwrap(), Labeling(vec![0, 0, 1, 1]));
        let flat: Vec<_> = (0..3).map(|k| line(k, 5 + 5 * k as u32, 100.0).0).collect();
        assert_eq!(weak_labels(&flat, &mask, (60, 60), 2).unwrap(), Labeling(vec![0, 0, 0]));
    }

    #[test]
    fn size_mismatch() {
        let mask = BinaryMask::from_fn(50, 60, |_, _| false);
        assert!(matches!(weak_labels(&[], &mask, (60, 60), 2), Err(CrfError::SizeMismatch(_))));
    }

    #[test]
    fn kmeans_matches_threshold_search() {
        // oracle: best split of the sorted values by within-cluster sum of squares
        let v = [3.0, 1.0, 8.0, 9.5, 2.2, 7.7, 4.9];
        let got = kmeans_two(&v).unwrap();
        let mut sorted = v.to_vec();
        sorted.sort_by(f64::total_cmp);
        let sse = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
        };
        let cut = (1..sorted.len())
            .min_by(|&a, &b| {
                let ca = sse(&sorted[..a]) + sse(&sorted[a..]);
                let cb = sse(&sorted[..b]) + sse(&sorted[b..]);
                ca.total_cmp(&cb)
            })
            .unwrap();
        let oracle: Vec<bool> = v.iter().map(|&x| x >= sorted[cut]).collect();
        assert_eq!(got, oracle);
    }
}
