//! Sliding-window enumeration, salient-edge density scoring, greedy
//! refinement and box-level non-maximum suppression.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::crf::Labeling;
use crate::edges::Edgelet;

#[derive(Debug, Error)]
pub enum ProposalError {
    #[error("no window fits a {0}x{1} image")]
    ImageTooSmall(u32, u32),
    #[error("invalid window parameters: {0}")]
    BadConfig(String),
    #[error("proposal CSV line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned box in integer pixels: top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Window {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Window {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w as f64 * self.h as f64
    }

    /// Exclusive right edge.
    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    /// Exclusive bottom edge.
    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn contains_pixel(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    pub fn intersection(&self, other: &Window) -> f64 {
        let iw = self.right().min(other.right()) as i64 - self.x.max(other.x) as i64;
        let ih = self.bottom().min(other.bottom()) as i64 - self.y.max(other.y) as i64;
        if iw <= 0 || ih <= 0 {
            0.0
        } else {
            (iw * ih) as f64
        }
    }

    pub fn iou(&self, other: &Window) -> f64 {
        let inter = self.intersection(other);
        if inter == 0.0 {
            return 0.0;
        }
        inter / (self.area() + other.area() - inter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub window: Window,
    pub score: f64,
    /// 1-based position in the ranked set.
    pub rank: usize,
}

/// Proposals ordered by non-increasing score with ranks `1..=len`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProposalSet {
    pub proposals: Vec<Proposal>,
}

impl ProposalSet {
    /// Sorts by score (stable, so equal scores keep input order) and assigns ranks.
    pub fn ranked(mut proposals: Vec<Proposal>) -> Self {
        proposals.sort_by(|a, b| b.score.total_cmp(&a.score));
        for (k, p) in proposals.iter_mut().enumerate() {
            p.rank = k + 1;
        }
        Self { proposals }
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn windows(&self) -> Vec<Window> {
        self.proposals.iter().map(|p| p.window).collect()
    }

    pub fn truncate(&mut self, n: usize) {
        self.proposals.truncate(n);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowConfig {
    /// Target IoU between neighbouring same-size windows.
    pub alpha: f64,
    /// Window area as a fraction of image area: first, last and increment.
    pub scale_min: f64,
    pub scale_max: f64,
    pub scale_step: f64,
    /// Width over height.
    pub aspects: Vec<f64>,
    pub min_side: u32,
}

impl Default for WindowConfig {
    fn default() -> Self {
        let r3 = 3f64.sqrt();
        Self {
            alpha: 0.65,
            scale_min: 0.005,
            scale_max: 0.95,
            scale_step: 0.01,
            aspects: vec![1.0 / 3.0, 1.0 / r3, 1.0, r3, 3.0],
            min_side: 8,
        }
    }
}

/// Largest deviation from `alpha` tolerated between adjacent same-size windows.
pub const STRIDE_IOU_TOLERANCE: f64 = 0.02;

/// IoU of two same-size windows of side `side` offset by `stride` along one axis.
pub fn shifted_iou(side: u32, stride: u32) -> f64 {
    (side as f64 - stride as f64) / (side as f64 + stride as f64)
}

/// Real-valued stride giving IoU exactly `alpha` between shifted copies.
pub fn real_stride(side: f64, alpha: f64) -> f64 {
    side * (1.0 - alpha) / (1.0 + alpha)
}

/// Integer stride (at least 1) whose shifted IoU is closest to `alpha`.
pub fn stride_for(side: u32, alpha: f64) -> u32 {
    let base = real_stride(side as f64, alpha).floor().max(1.0) as u32;
    let up = base + 1;
    let err = |s: u32| (shifted_iou(side, s) - alpha).abs();
    if up < side && err(up) < err(base) {
        up
    } else {
        base
    }
}

fn admissible(side: u32, alpha: f64) -> bool {
    side >= 2 && (shifted_iou(side, stride_for(side, alpha)) - alpha).abs() <= STRIDE_IOU_TOLERANCE
}

/// Rounds a real side length to the nearest integer that admits an in-tolerance stride.
pub fn window_side(real: f64, alpha: f64) -> u32 {
    let base = real.round().max(1.0) as u32;
    if admissible(base, alpha) {
        return base;
    }
    for d in 1..=4u32 {
        let mut options = [base.checked_sub(d), Some(base + d)];
        // prefer the side closer to the real-valued length
        if (base as f64) < real {
            options.swap(0, 1);
        }
        for s in options.into_iter().flatten() {
            if admissible(s, alpha) {
                return s;
            }
        }
    }
    base
}

/// Distinct `(w, h)` window sizes in enumeration order.
pub fn window_sizes(img_w: u32, img_h: u32, cfg: &WindowConfig) -> Result<Vec<(u32, u32)>, ProposalError> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(ProposalError::BadConfig(format!("alpha {} outside (0, 1)", cfg.alpha)));
    }
    if !(cfg.scale_min > 0.0 && cfg.scale_min < cfg.scale_max && cfg.scale_step > 0.0) {
        return Err(ProposalError::BadConfig("scale range".into()));
    }
    if cfg.aspects.iter().any(|a| !(*a > 0.0)) {
        return Err(ProposalError::BadConfig("aspect ratios must be positive".into()));
    }
    let area = img_w as f64 * img_h as f64;
    let mut sizes = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut k = 0usize;
    loop {
        let a = cfg.scale_min + k as f64 * cfg.scale_step;
        if a > cfg.scale_max + 1e-12 {
            break;
        }
        k += 1;
        for &r in &cfg.aspects {
            let w = window_side((a * area * r).sqrt(), cfg.alpha);
            let h = window_side((a * area / r).sqrt(), cfg.alpha);
            if w < cfg.min_side || h < cfg.min_side || w > img_w || h > img_h {
                continue;
            }
            if seen.insert((w, h)) {
                sizes.push((w, h));
            }
        }
    }
    Ok(sizes)
}

/// All candidate windows, grouped by size, row-major positions within a size.
pub fn enumerate_windows(img_w: u32, img_h: u32, cfg: &WindowConfig) -> Result<Vec<Window>, ProposalError> {
    let mut out = Vec::new();
    for (w, h) in window_sizes(img_w, img_h, cfg)? {
        let sx = stride_for(w, cfg.alpha);
        let sy = stride_for(h, cfg.alpha);
        let mut y = 0;
        while y + h <= img_h {
            let mut x = 0;
            while x + w <= img_w {
                out.push(Window::new(x, y, w, h));
                x += sx;
            }
            y += sy;
        }
    }
    if out.is_empty() {
        return Err(ProposalError::ImageTooSmall(img_w, img_h));
    }
    Ok(out)
}

/// One edgelet as seen by the window scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct SalientEdge {
    pub id: usize,
    /// Inclusive pixel bounds `(x0, y0, x1, y1)`.
    pub bbox: (u32, u32, u32, u32),
    pub length: usize,
    pub saliency: f64,
    pub object: bool,
}

impl SalientEdge {
    pub fn inside(&self, win: &Window) -> bool {
        let (x0, y0, x1, y1) = self.bbox;
        x0 >= win.x && y0 >= win.y && x1 < win.right() && y1 < win.bottom()
    }

    pub fn weight(&self) -> f64 {
        self.saliency * self.length as f64
    }
}

/// Object-labelled edgelets sorted by left edge for containment queries.
#[derive(Debug, Clone)]
pub struct SalientEdgeIndex {
    edges: Vec<SalientEdge>,
    by_left: Vec<usize>,
}

impl SalientEdgeIndex {
    pub fn new(edges: Vec<SalientEdge>) -> Self {
        let mut edges = edges;
        edges.sort_by_key(|e| e.id);
        let mut by_left: Vec<usize> = (0..edges.len()).filter(|&k| edges[k].object).collect();
        by_left.sort_by_key(|&k| (edges[k].bbox.0, k));
        Self { edges, by_left }
    }

    /// Index over edgelets with their saliencies and CRF labels (1 = object).
    pub fn from_edgelets(edgelets: &[Edgelet], saliency: &[f64], labels: &Labeling) -> Self {
        assert_eq!(edgelets.len(), saliency.len());
        assert_eq!(edgelets.len(), labels.len());
        Self::new(
            edgelets
                .iter()
                .zip(saliency)
                .zip(&labels.0)
                .map(|((e, &s), &l)| SalientEdge {
                    id: e.id,
                    bbox: e.bbox(),
                    length: e.len(),
                    saliency: s,
                    object: l == 1,
                })
                .collect(),
        )
    }

    pub fn edges(&self) -> &[SalientEdge] {
        &self.edges
    }

    pub fn object_count(&self) -> usize {
        self.by_left.len()
    }

    /// `sum s_j l_j / sqrt(w h)` over object edgelets fully inside `win`, summed in id order.
    pub fn score(&self, win: &Window) -> f64 {
        let lo = self.by_left.partition_point(|&k| self.edges[k].bbox.0 < win.x);
        let mut hits: Vec<usize> = self.by_left[lo..]
            .iter()
            .take_while(|&&k| self.edges[k].bbox.0 < win.right())
            .copied()
            .filter(|&k| self.edges[k].inside(win))
            .collect();
        if hits.is_empty() {
            return 0.0;
        }
        hits.sort_unstable();
        let total: f64 = hits.iter().map(|&k| self.edges[k].weight()).sum();
        total / win.area().sqrt()
    }
}

pub fn score_window(win: &Window, index: &SalientEdgeIndex) -> f64 {
    index.score(win)
}

/// Greedy coordinate ascent on `(x, y, w, h)` with halving steps.
///
/// Steps start at half the window's translation stride and the search ends
/// once both steps drop below 2 px.
pub fn refine_window(
    start: Window,
    index: &SalientEdgeIndex,
    alpha: f64,
    img_w: u32,
    img_h: u32,
    min_side: u32,
) -> Proposal {
    let mut best = start;
    let mut best_score = index.score(&start);
    let mut step_x = stride_for(start.w, alpha) as f64 / 2.0;
    let mut step_y = stride_for(start.h, alpha) as f64 / 2.0;
    while step_x >= 2.0 || step_y >= 2.0 {
        let dx = if step_x >= 2.0 { step_x.round() as i64 } else { 0 };
        let dy = if step_y >= 2.0 { step_y.round() as i64 } else { 0 };
        loop {
            let mut moved = false;
            let moves = [
                (-dx, 0, 0, 0),
                (dx, 0, 0, 0),
                (0, -dy, 0, 0),
                (0, dy, 0, 0),
                (0, 0, -dx, 0),
                (0, 0, dx, 0),
                (0, 0, 0, -dy),
                (0, 0, 0, dy),
            ];
            for (mx, my, mw, mh) in moves {
                if mx == 0 && my == 0 && mw == 0 && mh == 0 {
                    continue;
                }
                let (x, y) = (best.x as i64 + mx, best.y as i64 + my);
                let (w, h) = (best.w as i64 + mw, best.h as i64 + mh);
                if x < 0
                    || y < 0
                    || w < min_side as i64
                    || h < min_side as i64
                    || x + w > img_w as i64
                    || y + h > img_h as i64
                {
                    continue;
                }
                let cand = Window::new(x as u32, y as u32, w as u32, h as u32);
                let s = index.score(&cand);
                if s > best_score {
                    best = cand;
                    best_score = s;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        step_x /= 2.0;
        step_y /= 2.0;
    }
    Proposal {
        window: best,
        score: best_score,
        rank: 0,
    }
}

/// Refines every proposal independently and re-ranks.
pub fn refine(
    proposals: &[Proposal],
    index: &SalientEdgeIndex,
    alpha: f64,
    img_w: u32,
    img_h: u32,
    min_side: u32,
) -> ProposalSet {
    let refined: Vec<Proposal> = proposals
        .par_iter()
        .map(|p| refine_window(p.window, index, alpha, img_w, img_h, min_side))
        .collect();
    ProposalSet::ranked(refined)
}

/// Greedy suppression in descending score order; a box survives when its IoU
/// with every kept box is at most `theta`.
pub fn nms_boxes(proposals: &ProposalSet, theta: f64) -> ProposalSet {
    let mut ordered = proposals.proposals.clone();
    ordered.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut kept: Vec<Proposal> = Vec::new();
    for p in ordered {
        if kept.iter().all(|k| k.window.iou(&p.window) <= theta) {
            kept.push(p);
        }
    }
    ProposalSet::ranked(kept)
}

/// Scores every window and keeps the `top_k` best with positive score.
pub fn score_windows(windows: &[Window], index: &SalientEdgeIndex, top_k: usize) -> Vec<Proposal> {
    let scores: Vec<f64> = windows.par_iter().map(|w| index.score(w)).collect();
    let mut order: Vec<usize> = (0..windows.len()).filter(|&k| scores[k] > 0.0).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(top_k);
    order
        .into_iter()
        .enumerate()
        .map(|(r, k)| Proposal {
            window: windows[k],
            score: scores[k],
            rank: r + 1,
        })
        .collect()
}

/// Writes `rank,x,y,w,h,score`, preceded by `# `-prefixed header comments.
pub fn write_proposals_csv(mut out: impl Write, set: &ProposalSet, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "rank,x,y,w,h,score")?;
    for p in &set.proposals {
        let w = p.window;
        writeln!(out, "{},{},{},{},{},{:?}", p.rank, w.x, w.y, w.w, w.h, p.score)?;
    }
    Ok(())
}

/// Reads a proposal CSV, skipping `#` comment lines, and returns it in rank order.
pub fn read_proposals_csv(input: impl BufRead) -> Result<ProposalSet, ProposalError> {
    let mut proposals = Vec::new();
    let mut header_seen = false;
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != "rank,x,y,w,h,score" {
                return Err(ProposalError::Parse {
                    line: n + 1,
                    msg: format!("unexpected header {line:?}"),
                });
            }
            header_seen = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 6 {
            return Err(ProposalError::Parse {
                line: n + 1,
                msg: format!("expected 6 fields, found {}", cells.len()),
            });
        }
        let bad = |what: &str| ProposalError::Parse {
            line: n + 1,
            msg: format!("bad {what}"),
        };
        let int = |s: &str, what: &str| s.trim().parse::<u32>().map_err(|_| bad(what));
        let rank = cells[0].trim().parse::<usize>().map_err(|_| bad("rank"))?;
        let window = Window::new(
            int(cells[1], "x")?,
            int(cells[2], "y")?,
            int(cells[3], "w")?,
            int(cells[4], "h")?,
        );
        let score = cells[5].trim().parse::<f64>().map_err(|_| bad("score"))?;
        proposals.push(Proposal { window, score, rank });
    }
    if !header_seen {
        return Err(ProposalError::Parse {
            line: 0,
            msg: "missing header".into(),
        });
    }
    proposals.sort_by_key(|p| p.rank);
    Ok(ProposalSet { proposals })
}
