//! Per-edgelet low-level features and CRF node/link feature vectors.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::edges::{EdgeMap, Edgelet, ORIENTATIONS};
use crate::filters::{difference_of_gaussians, gaussian_gradient, laplacian_of_gaussian};
use crate::imagio::{LabImage, ScalarField};

pub const NODE_DIM: usize = 7;
pub const LINK_DIM: usize = 4;

/// `[f_G, DoG1, DoG2, LoG1, LoG2, f_LTP, strength]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeFeatures(pub [f64; NODE_DIM]);

impl NodeFeatures {
    pub fn color_gradient(&self) -> f64 {
        self.0[0]
    }

    pub fn ltp(&self) -> f64 {
        self.0[5]
    }

    pub fn strength(&self) -> f64 {
        self.0[6]
    }
}

/// `[up_down, right_left, mean_diff, var_diff]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkFeatures(pub [f64; LINK_DIM]);

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    /// LTP threshold in luminance units.
    pub ltp_threshold: f64,
    /// Base filter-bank scale.
    pub texture_scale: f64,
    pub patch_radius: usize,
    /// Gaussian-derivative scale of the colour gradients.
    pub gradient_sigma: f64,
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            ltp_threshold: 5.0,
            texture_scale: 0.5,
            patch_radius: 5,
            gradient_sigma: 1.0,
            seed: 42,
        }
    }
}

/// Raster-sorted copy of an edgelet's pixels, so sums do not depend on chain order.
fn canonical_pixels(edgelet: &Edgelet) -> Vec<(u32, u32)> {
    let mut px = edgelet.pixels.clone();
    px.sort_unstable_by_key(|&(x, y)| (y, x));
    px
}

/// Steered colour-gradient magnitudes `G_o` at the four orientations, summed over Lab channels.
#[derive(Debug, Clone)]
pub struct OrientedGradients {
    fields: [ScalarField; 4],
}

impl OrientedGradients {
    pub fn compute(lab: &LabImage, sigma: f64) -> Self {
        let (w, h) = (lab.width(), lab.height());
        let grads: Vec<_> = lab
            .channels()
            .iter()
            .map(|c| gaussian_gradient(c, sigma))
            .collect();
        let fields = ORIENTATIONS.map(|theta| {
            let (c, s) = (theta.cos(), theta.sin());
            ScalarField::from_fn(w, h, |x, y| {
                grads
                    .iter()
                    .map(|(gx, gy)| (c * gx.get(x, y) + s * gy.get(x, y)).abs())
                    .sum()
            })
        });
        Self { fields }
    }

    pub fn from_fields(fields: [ScalarField; 4]) -> Self {
        Self { fields }
    }

    pub fn field(&self, orientation: usize) -> &ScalarField {
        &self.fields[orientation]
    }
}

/// Euclidean norm of the per-orientation response sums.
pub fn color_gradient_from_sums(sums: [f64; 4]) -> f64 {
    sums.iter().map(|s| s * s).sum::<f64>().sqrt()
}

pub fn color_gradient_feature(edgelet: &Edgelet, gradients: &OrientedGradients) -> f64 {
    let pixels = canonical_pixels(edgelet);
    let sums = [0, 1, 2, 3].map(|o| {
        let f = gradients.field(o);
        pixels
            .iter()
            .map(|&(x, y)| f.get(x as usize, y as usize))
            .sum::<f64>()
    });
    color_gradient_from_sums(sums)
}

/// 3x3 neighbourhood offsets; bit `b` of a code corresponds to `LTP_NEIGHBORS[b]`.
pub const LTP_NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
];

/// Upper and lower binary codes of the local ternary pattern at `(x, y)`.
pub fn ltp_codes(luminance: &ScalarField, x: usize, y: usize, threshold: f64) -> (u8, u8) {
    let center = luminance.get(x, y);
    let mut upper = 0u8;
    let mut lower = 0u8;
    for (b, &(dx, dy)) in LTP_NEIGHBORS.iter().enumerate() {
        let z = luminance.get_clamped(x as isize + dx, y as isize + dy) - center;
        if z >= threshold {
            upper |= 1 << b;
        }
        if z <= -threshold {
            lower |= 1 << b;
        }
    }
    (upper, lower)
}

/// Population variance of small integer codes, evaluated exactly and rounded once.
fn code_variance(codes: impl Iterator<Item = u8>) -> f64 {
    let (mut n, mut s, mut s2) = (0i128, 0i128, 0i128);
    for c in codes {
        let c = c as i128;
        n += 1;
        s += c;
        s2 += c * c;
    }
    if n == 0 {
        return 0.0;
    }
    (n * s2 - s * s) as f64 / (n * n) as f64
}

/// Mean of the variances of the upper and lower LTP codes over the edgelet.
pub fn ltp_feature(edgelet: &Edgelet, luminance: &ScalarField, threshold: f64) -> f64 {
    assert!(threshold > 0.0, "LTP threshold must be positive");
    let codes: Vec<(u8, u8)> = edgelet
        .pixels
        .iter()
        .map(|&(x, y)| ltp_codes(luminance, x as usize, y as usize, threshold))
        .collect();
    let upper = code_variance(codes.iter().map(|c| c.0));
    let lower = code_variance(codes.iter().map(|c| c.1));
    (upper + lower) / 2.0
}

pub fn edge_strength(edgelet: &Edgelet, map: &EdgeMap) -> f64 {
    edgelet
        .pixels
        .iter()
        .map(|&(x, y)| map.magnitude(x as usize, y as usize) as f64)
        .fold(0.0, f64::max)
}

/// DoG responses at scales `{k, 2k}` and scale-normalized LoG at `{k, 2k, 4k}` on luminance.
#[derive(Debug, Clone)]
pub struct TextureBank {
    dog: [ScalarField; 2],
    log: [ScalarField; 3],
}

impl TextureBank {
    pub fn compute(luminance: &ScalarField, k: f64) -> Self {
        assert!(k > 0.0, "filter scale must be positive");
        Self {
            dog: [k, 2.0 * k].map(|s| difference_of_gaussians(luminance, s)),
            log: [k, 2.0 * k, 4.0 * k].map(|s| laplacian_of_gaussian(luminance, s)),
        }
    }

    fn width(&self) -> usize {
        self.dog[0].width()
    }

    fn height(&self) -> usize {
        self.dog[0].height()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureContext {
    /// Region DoG variances, ascending.
    pub dog: [f64; 2],
    /// Region LoG variances, ascending.
    pub log: [f64; 2],
    /// Both side regions fell outside the image.
    pub degenerate: bool,
}

/// Pixels of the disc of `radius` around a real-valued center, clipped to the image.
pub fn disc_pixels(center: (f64, f64), radius: usize, width: usize, height: usize) -> Vec<(usize, usize)> {
    let r = radius as f64;
    let x0 = (center.0 - r).ceil().max(0.0) as isize;
    let x1 = (center.0 + r).floor().min(width as f64 - 1.0) as isize;
    let y0 = (center.1 - r).ceil().max(0.0) as isize;
    let y1 = (center.1 + r).floor().min(height as f64 - 1.0) as isize;
    let mut out = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 - center.0, y as f64 - center.1);
            if dx * dx + dy * dy <= r * r {
                out.push((x as usize, y as usize));
            }
        }
    }
    out
}

/// Centers of the two side regions: the centroid pushed `radius + 1` along the mean normal.
pub fn side_region_centers(edgelet: &Edgelet, radius: usize) -> [(f64, f64); 2] {
    let normal = edgelet.mean_orientation + FRAC_PI_2;
    let off = radius as f64 + 1.0;
    let (dx, dy) = (off * normal.cos(), off * normal.sin());
    let (cx, cy) = edgelet.centroid;
    [(cx + dx, cy + dy), (cx - dx, cy - dy)]
}

fn pooled_variance(fields: &[ScalarField], pixels: &[(usize, usize)]) -> f64 {
    let n = (fields.len() * pixels.len()) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let values = || {
        fields
            .iter()
            .flat_map(move |f| pixels.iter().map(move |&(x, y)| f.get(x, y)))
    };
    let mean = values().sum::<f64>() / n;
    values().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Seeded draw of half (rounded up) of the region's pixels, returned in raster order.
pub fn sample_half(pixels: &[(usize, usize)], rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    if pixels.is_empty() {
        return Vec::new();
    }
    let count = pixels.len().div_ceil(2);
    let mut idx = rand::seq::index::sample(rng, pixels.len(), count).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pixels[i]).collect()
}

fn edgelet_rng(seed: u64, edgelet_id: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (edgelet_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

impl TextureBank {
    /// Texture variances of the two regions flanking the edgelet.
    ///
    /// With `sample == false` every region pixel is used instead of a seeded half.
    pub fn context(&self, edgelet: &Edgelet, radius: usize, seed: u64, sample: bool) -> TextureContext {
        assert!(radius >= 1, "patch radius must be at least 1");
        let mut rng = edgelet_rng(seed, edgelet.id);
        let mut dog = [0.0; 2];
        let mut log = [0.0; 2];
        let mut empty = 0;
        for (side, center) in side_region_centers(edgelet, radius).into_iter().enumerate() {
            let region = disc_pixels(center, radius, self.width(), self.height());
            if region.is_empty() {
                empty += 1;
            }
            let used = if sample {
                sample_half(&region, &mut rng)
            } else {
                region
            };
            dog[side] = pooled_variance(&self.dog, &used);
            log[side] = pooled_variance(&self.log, &used);
        }
        if empty == 2 {
            return TextureContext {
                dog: [0.0; 2],
                log: [0.0; 2],
                degenerate: true,
            };
        }
        let asc = |v: [f64; 2]| if v[0] <= v[1] { v } else { [v[1], v[0]] };
        TextureContext {
            dog: asc(dog),
            log: asc(log),
            degenerate: false,
        }
    }
}

/// Convenience form that builds the filter bank for a single edgelet.
pub fn texture_context(
    edgelet: &Edgelet,
    luminance: &ScalarField,
    k: f64,
    radius: usize,
    seed: u64,
) -> TextureContext {
    TextureBank::compute(luminance, k).context(edgelet, radius, seed, true)
}

/// Image-wide precomputation shared by every edgelet of one image.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    luminance: ScalarField,
    gradients: OrientedGradients,
    bank: TextureBank,
    config: FeatureConfig,
}

impl FeatureExtractor {
    pub fn new(lab: &LabImage, config: FeatureConfig) -> Self {
        Self {
            luminance: lab.l.clone(),
            gradients: OrientedGradients::compute(lab, config.gradient_sigma),
            bank: TextureBank::compute(&lab.l, config.texture_scale),
            config,
        }
    }

    pub fn luminance(&self) -> &ScalarField {
        &self.luminance
    }

    pub fn node_features(&self, edgelet: &Edgelet, map: &EdgeMap) -> NodeFeatures {
        let fg = color_gradient_feature(edgelet, &self.gradients);
        let tex = self
            .bank
            .context(edgelet, self.config.patch_radius, self.config.seed, true);
        let ltp = ltp_feature(edgelet, &self.luminance, self.config.ltp_threshold);
        let s = edge_strength(edgelet, map);
        NodeFeatures([fg, tex.dog[0], tex.dog[1], tex.log[0], tex.log[1], ltp, s])
    }

    /// Features for every edgelet, in order, computed in parallel.
    pub fn all_node_features(&self, edgelets: &[Edgelet], map: &EdgeMap) -> Vec<NodeFeatures> {
        use rayon::prelude::*;
        edgelets
            .par_iter()
            .map(|e| self.node_features(e, map))
            .collect()
    }
}

/// Relative position of `i` with respect to `j` plus statistics of the feature difference.
pub fn link_features(
    fi: &NodeFeatures,
    ci: (f64, f64),
    fj: &NodeFeatures,
    cj: (f64, f64),
) -> LinkFeatures {
    let up_down = if ci.1 < cj.1 { 1.0 } else { 0.0 };
    let right_left = if ci.0 > cj.0 { 1.0 } else { 0.0 };
    let d: Vec<f64> = fi.0.iter().zip(&fj.0).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    LinkFeatures([up_down, right_left, mean, var])
}
