use std::fmt::Write as _;
use std::path::Path;

use crate::features::{LINK_DIM, NODE_DIM};

use super::graph::FeatureStats;
use super::CrfError;

pub const MODEL_HEADER: &str = "SALPROP-MODEL";
const VERSION: &str = "v1";

/// 14 unary plus 16 pairwise weights.
pub const PARAM_DIM: usize = 2 * NODE_DIM + 4 * LINK_DIM;

/// Linear CRF weights plus the node-feature standardization learned in training.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    /// Row per label.
    pub unary: [[f64; NODE_DIM]; 2],
    /// Row per label pair, indexed by [`super::pair_index`].
    pub pairwise: [[f64; LINK_DIM]; 4],
    pub stats: FeatureStats,
}

impl Default for CrfModel {
    fn default() -> Self {
        Self::zeros()
    }
}

impl CrfModel {
    pub fn zeros() -> Self {
        Self {
            unary: [[0.0; NODE_DIM]; 2],
            pairwise: [[0.0; LINK_DIM]; 4],
            stats: FeatureStats::default(),
        }
    }

    /// Flattened weights: unary rows then pairwise rows.
    pub fn weights(&self) -> [f64; PARAM_DIM] {
        let mut w = [0.0; PARAM_DIM];
        let flat = self.unary.iter().flatten().chain(self.pairwise.iter().flatten());
        for (dst, src) in w.iter_mut().zip(flat) {
            *dst = *src;
        }
        w
    }

    pub fn from_weights(w: &[f64; PARAM_DIM], stats: FeatureStats) -> Self {
        let mut m = Self {
            stats,
            ..Self::zeros()
        };
        for l in 0..2 {
            m.unary[l].copy_from_slice(&w[l * NODE_DIM..(l + 1) * NODE_DIM]);
        }
        let base = 2 * NODE_DIM;
        for p in 0..4 {
            m.pairwise[p].copy_from_slice(&w[base + p * LINK_DIM..base + (p + 1) * LINK_DIM]);
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.weights().iter().all(|v| v.is_finite())
            && self.stats.mean.iter().all(|v| v.is_finite())
            && self.stats.std.iter().all(|v| v.is_finite() && *v > 0.0)
    }

    pub fn to_text(&self) -> String {
        fn row(out: &mut String, values: &[f64]) {
            let cells: Vec<String> = values.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        let mut out = format!("{MODEL_HEADER} {VERSION}\n");
        row(&mut out, &self.stats.mean);
        row(&mut out, &self.stats.std);
        for r in &self.unary {
            row(&mut out, r);
        }
        for r in &self.pairwise {
            row(&mut out, r);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CrfError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CrfError::Parse("empty model file".into()))?;
        let version = header
            .strip_prefix(MODEL_HEADER)
            .map(str::trim)
            .ok_or_else(|| CrfError::Parse(format!("bad header {header:?}")))?;
        if version != VERSION {
            return Err(CrfError::BadVersion(version.to_string()));
        }
        let mut row = |what: &str, n: usize| -> Result<Vec<f64>, CrfError> {
            let line = lines
                .next()
                .ok_or_else(|| CrfError::Parse(format!("missing {what} line")))?;
            let values = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| CrfError::Parse(format!("{what}: {t:?}: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != n {
                return Err(CrfError::Parse(format!(
                    "{what}: expected {n} values, found {}",
                    values.len()
                )));
            }
            Ok(values)
        };
        let mut stats = FeatureStats::default();
        stats.mean.copy_from_slice(&row("feature_mean", NODE_DIM)?);
        stats.std.copy_from_slice(&row("feature_std", NODE_DIM)?);
        let mut model = Self {
            stats,
            ..Self::zeros()
        };
        for l in 0..2 {
            model.unary[l].copy_from_slice(&row("unary", NODE_DIM)?);
        }
        for p in 0..4 {
            model.pairwise[p].copy_from_slice(&row("pairwise", LINK_DIM)?);
        }
        if !model.is_finite() {
            return Err(CrfError::Parse(
                "non-finite weight or non-positive feature scale".into(),
            ));
        }
        Ok(model)
    }
}

pub fn save_model(model: &CrfModel, path: impl AsRef<Path>) -> Result<(), CrfError> {
    std::fs::write(path, model.to_text())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CrfModel, CrfError> {
    let text = std::fs::read_to_string(path)?;
    CrfModel::from_text(&text)
}
