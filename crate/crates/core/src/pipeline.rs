//! End-to-end composition: edges, node features, saliency, CRF labelling and
//! window scoring.

use thiserror::Error;

use crate::bayes::{compute_saliency, BayesError, EdgeletSaliency};
use crate::crf::{build_graph, weak_labels, BinaryMask, CrfError, CrfModel, EdgeGraph, Labeling, MapDecoder, Potentials, TrainingSample};
use crate::edges::{extract_edgelets, non_max_suppress, EdgeError, EdgeMap, Edgelet};
use crate::features::{FeatureConfig, FeatureExtractor, NodeFeatures};
use crate::imagio::{rgb_to_lab, LabImage, RgbImage};
use crate::proposals::{
    enumerate_windows, nms_boxes, refine, score_windows, ProposalError, ProposalSet, SalientEdgeIndex,
    WindowConfig,
};
use crate::registry::EdgeSource;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Edge(#[from] EdgeError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Crf(#[from] CrfError),
    #[error(transparent)]
    Proposal(#[from] ProposalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub features: FeatureConfig,
    /// Salient-set threshold as a fraction of the strongest edgelet.
    pub beta: f64,
    /// Edgelets must be longer than this many pixels.
    pub min_len: usize,
    /// Edge pixels must exceed this magnitude (0-255 scale).
    pub min_mag: f64,
    pub link_radius: f64,
    pub max_degree: usize,
    pub windows: WindowConfig,
    /// Windows refined before suppression.
    pub top_k: usize,
    pub nms_theta: f64,
    pub max_n: usize,
    /// Pixel tolerance of the weak-label boundary test.
    pub boundary_tol: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            beta: 0.8,
            min_len: 15,
            min_mag: 40.0,
            link_radius: 15.0,
            max_degree: 8,
            windows: WindowConfig::default(),
            top_k: 1000,
            nms_theta: 0.75,
            max_n: 1000,
            boundary_tol: 2,
        }
    }
}

/// Intermediate per-image results.
#[derive(Debug, Clone)]
pub struct EdgeletAnalysis {
    pub edgelets: Vec<Edgelet>,
    pub features: Vec<NodeFeatures>,
    pub graph: EdgeGraph,
}

/// Thins (if needed) and chains an edge map, then builds features and the graph.
pub fn analyze_edges(lab: &LabImage, map: EdgeMap, cfg: &PipelineConfig) -> Result<EdgeletAnalysis, PipelineError> {
    let sparse = if map.is_sparse() { map } else { non_max_suppress(&map)? };
    let edgelets = extract_edgelets(&sparse, cfg.min_len, cfg.min_mag)?;
    let extractor = FeatureExtractor::new(lab, cfg.features.clone());
    let features = extractor.all_node_features(&edgelets, &sparse);
    let graph = build_graph(&edgelets, &features, cfg.link_radius, cfg.max_degree)?;
    Ok(EdgeletAnalysis {
        edgelets,
        features,
        graph,
    })
}

/// Saliency posteriors and CRF labels for the analysed edgelets.
pub fn label_edgelets(
    analysis: &EdgeletAnalysis,
    model: &CrfModel,
    decoder: &dyn MapDecoder,
    beta: f64,
) -> Result<(Vec<EdgeletSaliency>, Labeling), PipelineError> {
    let saliency = compute_saliency(&analysis.edgelets, &analysis.features, beta)?;
    let graph = analysis.graph.standardized(&model.stats);
    let labels = decoder.decode(&Potentials::new(&graph, model))?;
    Ok((saliency, labels))
}

/// Ranked proposals for one image.
pub fn generate_proposals(
    image: &RgbImage,
    edges: &dyn EdgeSource,
    model: &CrfModel,
    decoder: &dyn MapDecoder,
    cfg: &PipelineConfig,
) -> Result<ProposalSet, PipelineError> {
    let lab = rgb_to_lab(image);
    let analysis = analyze_edges(&lab, edges.edges(&lab)?, cfg)?;
    if analysis.edgelets.is_empty() {
        return Ok(ProposalSet::default());
    }
    let (saliency, labels) = label_edgelets(&analysis, model, decoder, cfg.beta)?;
    let s: Vec<f64> = saliency.iter().map(|r| r.posterior).collect();
    let index = SalientEdgeIndex::from_edgelets(&analysis.edgelets, &s, &labels);
    if index.object_count() == 0 {
        return Ok(ProposalSet::default());
    }
    let (w, h) = (image.width(), image.height());
    let windows = enumerate_windows(w, h, &cfg.windows)?;
    let top = score_windows(&windows, &index, cfg.top_k);
    let refined = refine(&top, &index, cfg.windows.alpha, w, h, cfg.windows.min_side);
    let mut set = nms_boxes(&refined, cfg.nms_theta);
    set.truncate(cfg.max_n);
    Ok(set)
}

/// Graph and weak labels for one image/mask pair; `None` when no edgelets survive.
pub fn training_sample(
    image: &RgbImage,
    mask: &BinaryMask,
    edges: &dyn EdgeSource,
    cfg: &PipelineConfig,
) -> Result<Option<TrainingSample>, PipelineError> {
    let lab = rgb_to_lab(image);
    let analysis = analyze_edges(&lab, edges.edges(&lab)?, cfg)?;
    if analysis.edgelets.is_empty() {
        return Ok(None);
    }
    let gold = weak_labels(
        &analysis.edgelets,
        mask,
        (image.width() as usize, image.height() as usize),
        cfg.boundary_tol,
    )?;
    Ok(Some(TrainingSample {
        graph: analysis.graph,
        gold,
    }))
}
