//! Ground-truth loading, IoU matching and proposal recall metrics.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::proposals::{read_proposals_csv, Window};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing field `{field}` in {context}")]
    MissingField { field: String, context: String },
    #[error("no ground-truth boxes")]
    NoGroundTruth,
    #[error("image ids differ between proposals and annotations: {0}")]
    IdMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthBox {
    pub image_id: String,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub class_name: String,
}

impl GroundTruthBox {
    pub fn window(&self) -> Window {
        Window::new(self.x, self.y, self.w, self.h)
    }
}

pub fn iou(a: &Window, b: &Window) -> f64 {
    a.iou(b)
}

/// Annotations keyed by image id.
pub type Annotations = BTreeMap<String, Vec<GroundTruthBox>>;

/// Ranked proposal windows keyed by image id.
pub type RankedProposals = BTreeMap<String, Vec<Window>>;

fn child_text<'a>(node: roxmltree::Node<'a, 'a>, name: &str) -> Option<&'a str> {
    node.children()
        .find(|c| c.has_tag_name(name))
        .and_then(|c| c.text())
        .map(str::trim)
}

/// Parses VOC XML text. Corners are inclusive, so `w = xmax - xmin + 1`.
pub fn parse_voc_str(text: &str, image_id: &str) -> Result<Vec<GroundTruthBox>, EvalError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| EvalError::Parse(format!("{image_id}: {e}")))?;
    let mut boxes = Vec::new();
    for obj in doc.root_element().children().filter(|c| c.has_tag_name("object")) {
        let difficult = child_text(obj, "difficult").is_some_and(|t| t == "1");
        let class_name = child_text(obj, "name").unwrap_or("").to_string();
        let bnd = obj
            .children()
            .find(|c| c.has_tag_name("bndbox"))
            .ok_or_else(|| EvalError::MissingField {
                field: "bndbox".into(),
                context: image_id.into(),
            })?;
        let coord = |name: &str| -> Result<i64, EvalError> {
            let t = child_text(bnd, name).ok_or_else(|| EvalError::MissingField {
                field: name.into(),
                context: image_id.into(),
            })?;
            let v: f64 = t
                .parse()
                .map_err(|_| EvalError::Parse(format!("{image_id}: {name} = {t:?}")))?;
            if !v.is_finite() {
                return Err(EvalError::Parse(format!("{image_id}: {name} = {t:?}")));
            }
            Ok(v.round() as i64)
        };
        let (x0, y0, x1, y1) = (coord("xmin")?, coord("ymin")?, coord("xmax")?, coord("ymax")?);
        if x0 < 0 || y0 < 0 || x1 < x0 || y1 < y0 {
            return Err(EvalError::Parse(format!(
                "{image_id}: degenerate box ({x0},{y0},{x1},{y1})"
            )));
        }
        if difficult {
            continue;
        }
        boxes.push(GroundTruthBox {
            image_id: image_id.into(),
            x: x0 as u32,
            y: y0 as u32,
            w: (x1 - x0 + 1) as u32,
            h: (y1 - y0 + 1) as u32,
            class_name,
        });
    }
    Ok(boxes)
}

/// Parses a VOC XML file; the image id is the file stem.
pub fn parse_voc_xml(path: impl AsRef<Path>) -> Result<Vec<GroundTruthBox>, EvalError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_voc_str(&text, &file_stem(path))
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Reads `image_id,x,y,w,h` rows; `#` lines are comments.
pub fn read_annotation_csv(input: impl BufRead) -> Result<Vec<GroundTruthBox>, EvalError> {
    let mut out = Vec::new();
    let mut header = false;
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            if line != "image_id,x,y,w,h" {
                return Err(EvalError::Parse(format!("line {}: unexpected header {line:?}", n + 1)));
            }
            header = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 5 {
            return Err(EvalError::Parse(format!("line {}: expected 5 fields", n + 1)));
        }
        let num = |k: usize| {
            cells[k]
                .parse::<u32>()
                .map_err(|_| EvalError::Parse(format!("line {}: bad number {:?}", n + 1, cells[k])))
        };
        let (w, h) = (num(3)?, num(4)?);
        if w == 0 || h == 0 {
            return Err(EvalError::Parse(format!("line {}: empty box", n + 1)));
        }
        out.push(GroundTruthBox {
            image_id: cells[0].to_string(),
            x: num(1)?,
            y: num(2)?,
            w,
            h,
            class_name: String::new(),
        });
    }
    if !header {
        return Err(EvalError::Parse("missing header".into()));
    }
    Ok(out)
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::path::PathBuf>, EvalError> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    Ok(paths)
}

fn has_ext(p: &Path, ext: &str) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Loads every `*.xml` (one image each) and `*.csv` (any images) in `dir`.
pub fn load_annotations_dir(dir: impl AsRef<Path>) -> Result<Annotations, EvalError> {
    let mut out = Annotations::new();
    for p in sorted_entries(dir.as_ref())? {
        if has_ext(&p, "xml") {
            let boxes = parse_voc_xml(&p)?;
            out.entry(file_stem(&p)).or_default().extend(boxes);
        } else if has_ext(&p, "csv") {
            let f = std::io::BufReader::new(fs::File::open(&p)?);
            for b in read_annotation_csv(f)? {
                out.entry(b.image_id.clone()).or_default().push(b);
            }
        }
    }
    Ok(out)
}

/// Loads every `*.csv` proposal file in `dir`, keyed by file stem, in rank order.
pub fn load_proposals_dir(dir: impl AsRef<Path>) -> Result<RankedProposals, EvalError> {
    let mut out = RankedProposals::new();
    for p in sorted_entries(dir.as_ref())? {
        if has_ext(&p, "csv") {
            let f = std::io::BufReader::new(fs::File::open(&p)?);
            let set = read_proposals_csv(f).map_err(|e| EvalError::Parse(format!("{}: {e}", p.display())))?;
            out.insert(file_stem(&p), set.windows());
        }
    }
    Ok(out)
}

/// 1-based rank of the first proposal covering `gt` at `iou_thr`.
fn first_hit(proposals: &[Window], gt: &Window, iou_thr: f64) -> Option<usize> {
    proposals.iter().position(|p| p.iou(gt) >= iou_thr).map(|k| k + 1)
}

/// Fraction of `gts` matched by any of the top `n` proposals.
pub fn recall_at_n(proposals: &[Window], gts: &[Window], n: usize, iou_thr: f64) -> Result<f64, EvalError> {
    if gts.is_empty() {
        return Err(EvalError::NoGroundTruth);
    }
    let top = &proposals[..n.min(proposals.len())];
    let hits = gts.iter().filter(|g| first_hit(top, g, iou_thr).is_some()).count();
    Ok(hits as f64 / gts.len() as f64)
}

/// Recall at `N = 1..=max_n` from each ground truth's first matching rank.
pub fn recall_curve(first_hits: &[Option<usize>], max_n: usize) -> Vec<f64> {
    let total = first_hits.len();
    let mut counts = vec![0usize; max_n + 1];
    for r in first_hits.iter().flatten() {
        if *r <= max_n {
            counts[*r] += 1;
        }
    }
    let mut acc = 0;
    (1..=max_n)
        .map(|n| {
            acc += counts[n];
            if total == 0 {
                0.0
            } else {
                acc as f64 / total as f64
            }
        })
        .collect()
}

/// Area under recall-vs-N in percent.
///
/// The first point counts as a unit-width column and the rest are joined by
/// trapezoids, so a flat curve at `r` scores exactly `100 r`.
pub fn auc(curve: &[f64]) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    let mut area = curve[0];
    for pair in curve.windows(2) {
        area += 0.5 * (pair[0] + pair[1]);
    }
    100.0 * area / curve.len() as f64
}

/// Smallest `N` (1-based) whose recall reaches `target`.
pub fn n_at_recall(curve: &[f64], target: f64) -> Option<usize> {
    curve.iter().position(|&r| r >= target).map(|k| k + 1)
}

/// Renders an `n_at_recall` result; unreached targets print as `-`.
pub fn format_n_at(n: Option<usize>) -> String {
    n.map_or_else(|| "-".to_string(), |v| v.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IouCurve {
    pub iou: f64,
    /// Recall at `N = 1..=max_n`.
    pub recall: Vec<f64>,
    pub auc: f64,
    pub n_at_75: Option<usize>,
    /// Recall at `max_n`, in percent.
    pub recall_at_max: f64,
}

impl IouCurve {
    pub fn from_recall(iou: f64, recall: Vec<f64>) -> Self {
        Self {
            iou,
            auc: auc(&recall),
            n_at_75: n_at_recall(&recall, 0.75),
            recall_at_max: 100.0 * recall.last().copied().unwrap_or(0.0),
            recall,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub max_n: usize,
    pub curves: Vec<IouCurve>,
}

/// Ground-truth-pooled recall curves for each IoU threshold.
pub fn evaluate(
    proposals: &RankedProposals,
    annotations: &Annotations,
    iou_list: &[f64],
    max_n: usize,
) -> Result<EvalReport, EvalError> {
    let missing: Vec<&String> = annotations.keys().filter(|k| !proposals.contains_key(*k)).collect();
    let extra: Vec<&String> = proposals.keys().filter(|k| !annotations.contains_key(*k)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(EvalError::IdMismatch(format!(
            "without proposals: {missing:?}; without annotations: {extra:?}"
        )));
    }
    if annotations.values().all(|v| v.is_empty()) {
        return Err(EvalError::NoGroundTruth);
    }
    let ids: Vec<&String> = annotations.keys().collect();
    let curves = iou_list
        .iter()
        .map(|&thr| {
            let hits: Vec<Option<usize>> = ids
                .par_iter()
                .map(|id| {
                    let props = &proposals[*id];
                    let top = &props[..max_n.min(props.len())];
                    annotations[*id]
                        .iter()
                        .map(|g| first_hit(top, &g.window(), thr))
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect();
            IouCurve::from_recall(thr, recall_curve(&hits, max_n))
        })
        .collect();
    Ok(EvalReport { max_n, curves })
}

/// Writes `iou,n,recall` rows, a blank line, then `iou,auc,n_at_75,recall_at_max`.
pub fn write_report_csv(mut out: impl Write, report: &EvalReport, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "iou,n,recall")?;
    for c in &report.curves {
        for (k, r) in c.recall.iter().enumerate() {
            writeln!(out, "{},{},{:?}", c.iou, k + 1, r)?;
        }
    }
    writeln!(out)?;
    writeln!(out, "iou,auc,n_at_75,recall_at_max")?;
    for c in &report.curves {
        writeln!(out, "{},{:?},{},{:?}", c.iou, c.auc, format_n_at(c.n_at_75), c.recall_at_max)?;
    }
    Ok(())
}

/// Reads a report written by [`write_report_csv`]; only the curve block is
/// authoritative, summary rows must name known thresholds.
pub fn read_report_csv(input: impl BufRead) -> Result<EvalReport, EvalError> {
    enum Section {
        Start,
        Curves,
        Summary,
    }
    let mut section = Section::Start;
    let mut curves: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut summary_ious = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        let err = |msg: &str| EvalError::Parse(format!("report line {}: {msg}", n + 1));
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "iou,n,recall" {
            if !matches!(section, Section::Start) {
                return Err(err("duplicate curve header"));
            }
            section = Section::Curves;
            continue;
        }
        if line == "iou,auc,n_at_75,recall_at_max" {
            if !matches!(section, Section::Curves) {
                return Err(err("summary before curves"));
            }
            section = Section::Summary;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| err(&format!("bad number {s:?}")));
        match section {
            Section::Start => return Err(err("missing header")),
            Section::Curves => {
                if cells.len() != 3 {
                    return Err(err("expected 3 fields"));
                }
                let (thr, k, r) = (num(cells[0])?, cells[1].trim(), num(cells[2])?);
                let k: usize = k.parse().map_err(|_| err(&format!("bad n {k:?}")))?;
                if !(0.0..=1.0).contains(&r) {
                    return Err(err("recall outside [0, 1]"));
                }
                match curves.last_mut() {
                    Some((t, rs)) if *t == thr => {
                        if k != rs.len() + 1 {
                            return Err(err("n out of sequence"));
                        }
                        rs.push(r);
                    }
                    _ => {
                        if k != 1 {
                            return Err(err("curve must start at n = 1"));
                        }
                        curves.push((thr, vec![r]));
                    }
                }
            }
            Section::Summary => {
                if cells.len() != 4 {
                    return Err(err("expected 4 fields"));
                }
                summary_ious.push(num(cells[0])?);
            }
        }
    }
    if matches!(section, Section::Start) {
        return Err(EvalError::Parse("empty report".into()));
    }
    if summary_ious.iter().any(|t| !curves.iter().any(|(c, _)| c == t)) {
        return Err(EvalError::Parse("summary names an unknown threshold".into()));
    }
    let max_n = curves.first().map_or(0, |(_, r)| r.len());
    if curves.iter().any(|(_, r)| r.len() != max_n) {
        return Err(EvalError::Parse("curves differ in length".into()));
    }
    Ok(EvalReport {
        max_n,
        curves: curves.into_iter().map(|(t, r)| IouCurve::from_recall(t, r)).collect(),
    })
}

/// Long-format plot data: `series,iou,n,recall`, one series per threshold.
pub fn write_curves_csv(mut out: impl Write, report: &EvalReport, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "series,iou,n,recall")?;
    for c in &report.curves {
        for (k, r) in c.recall.iter().enumerate() {
            writeln!(out, "iou_{},{},{},{:?}", c.iou, c.iou, k + 1, r)?;
        }
    }
    Ok(())
}
