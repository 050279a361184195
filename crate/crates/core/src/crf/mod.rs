//! Pairwise binary CRF over edgelets: graph construction, scoring, MAP
//! decoding, structured-SVM training and weak-label generation.

mod graph;
mod inference;
mod model;
mod train;
mod weak;

pub use graph::{build_graph, EdgeGraph, FeatureStats, Link, Node};
pub use inference::{
    map_inference, map_inference_exact, Exhaustive, LoopyBp, MapDecoder, Potentials,
    EXACT_NODE_LIMIT,
};
pub use model::{load_model, save_model, CrfModel, MODEL_HEADER, PARAM_DIM};
pub use train::{
    hamming_accuracy, train_bcfw, train_bcfw_with, BcfwConfig, TrainReport, TrainingSample,
};
pub use weak::{kmeans_two, weak_labels, BinaryMask};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CrfError {
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("exhaustive decoding supports at most {EXACT_NODE_LIMIT} nodes, got {0}")]
    TooLarge(usize),
    #[error("no training samples")]
    EmptyTrainingSet,
    #[error("training diverged: non-finite weights")]
    NonFinite,
    #[error("unsupported model version {0:?}")]
    BadVersion(String),
    #[error("model parse error: {0}")]
    Parse(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One label per node: 0 = non-object, 1 = object.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Labeling(pub Vec<u8>);

impl Labeling {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn hamming(&self, other: &Labeling) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

/// Index of the pairwise weight row for a label pair: 00, 01, 10, 11.
#[inline]
pub fn pair_index(li: u8, lj: u8) -> usize {
    2 * li as usize + lj as usize
}

/// Score of a labeling (higher is better).
pub fn energy(graph: &EdgeGraph, labeling: &Labeling, model: &CrfModel) -> Result<f64, CrfError> {
    if labeling.len() != graph.nodes.len() {
        return Err(CrfError::SizeMismatch(format!(
            "{} labels for {} nodes",
            labeling.len(),
            graph.nodes.len()
        )));
    }
    let mut total = 0.0;
    for (node, &l) in graph.nodes.iter().zip(&labeling.0) {
        total += dot(&model.unary[l as usize], &node.features.0);
    }
    for link in &graph.links {
        let p = pair_index(labeling.0[link.i], labeling.0[link.j]);
        total += dot(&model.pairwise[p], &link.features.0);
    }
    Ok(total)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
