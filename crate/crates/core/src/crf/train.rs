//! Block-coordinate Frank-Wolfe for the structured SVM.
//!
//! Objective: `lambda/2 |w|^2 + 1/n sum_i max_y [L_i(y) - <w, psi_i(y)>]` with
//! `lambda = 1 / (C n)`, `psi_i(y) = Phi(x_i, y_i) - Phi(x_i, y)` and `L_i` the
//! node-normalized Hamming loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::{LINK_DIM, NODE_DIM};

use super::graph::{EdgeGraph, FeatureStats};
use super::inference::{LoopyBp, MapDecoder, Potentials};
use super::model::{CrfModel, PARAM_DIM};
use super::{pair_index, CrfError, Labeling};

type Weights = [f64; PARAM_DIM];

#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub graph: EdgeGraph,
    pub gold: Labeling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcfwConfig {
    pub c: f64,
    pub max_passes: usize,
    pub gap_tol: f64,
    pub seed: u64,
}

impl Default for BcfwConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_passes: 200,
            gap_tol: 1e-3,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: CrfModel,
    /// Duality gap of the averaged iterate after each pass.
    pub gaps: Vec<f64>,
    pub passes: usize,
    pub converged: bool,
}

impl TrainReport {
    pub fn final_gap(&self) -> f64 {
        self.gaps.last().copied().unwrap_or(0.0)
    }
}

/// Joint feature map `Phi(x, y)`.
fn joint_feature(graph: &EdgeGraph, labels: &Labeling) -> Weights {
    let mut phi = [0.0; PARAM_DIM];
    for (node, &l) in graph.nodes.iter().zip(&labels.0) {
        let base = l as usize * NODE_DIM;
        for (k, v) in node.features.0.iter().enumerate() {
            phi[base + k] += v;
        }
    }
    for link in &graph.links {
        let base = 2 * NODE_DIM + pair_index(labels.0[link.i], labels.0[link.j]) * LINK_DIM;
        for (k, v) in link.features.0.iter().enumerate() {
            phi[base + k] += v;
        }
    }
    phi
}

fn dot(a: &Weights, b: &Weights) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalized_hamming(a: &Labeling, b: &Labeling) -> f64 {
    if a.is_empty() {
        0.0
    } else {
        a.hamming(b) as f64 / a.len() as f64
    }
}

struct Block {
    graph: EdgeGraph,
    gold: Labeling,
    gold_phi: Weights,
}

struct Oracle<'a> {
    decoder: &'a dyn MapDecoder,
}

impl Oracle<'_> {
    /// Loss-augmented decode: `argmax_y L(y) + <w, Phi(x, y)>`.
    fn most_violated(&self, block: &Block, w: &Weights, stats: FeatureStats) -> Result<(Weights, f64), CrfError> {
        let model = CrfModel::from_weights(w, stats);
        let mut pot = Potentials::new(&block.graph, &model);
        if !block.gold.is_empty() {
            pot.add_hamming_loss(&block.gold, 1.0 / block.gold.len() as f64);
        }
        let y = self.decoder.decode(&pot)?;
        let phi = joint_feature(&block.graph, &y);
        let mut psi = [0.0; PARAM_DIM];
        for k in 0..PARAM_DIM {
            psi[k] = block.gold_phi[k] - phi[k];
        }
        Ok((psi, normalized_hamming(&block.gold, &y)))
    }
}

/// Trains with the default damped loopy-BP oracle.
pub fn train_bcfw(samples: &[TrainingSample], config: &BcfwConfig) -> Result<TrainReport, CrfError> {
    train_bcfw_with(samples, config, &LoopyBp::default())
}

/// Trains with a caller-chosen loss-augmented decoder.
pub fn train_bcfw_with(
    samples: &[TrainingSample],
    config: &BcfwConfig,
    decoder: &dyn MapDecoder,
) -> Result<TrainReport, CrfError> {
    if samples.is_empty() {
        return Err(CrfError::EmptyTrainingSet);
    }
    for s in samples {
        if s.gold.len() != s.graph.len() {
            return Err(CrfError::SizeMismatch(format!(
                "{} gold labels for {} nodes",
                s.gold.len(),
                s.graph.len()
            )));
        }
    }
    let stats = FeatureStats::fit(samples.iter().flat_map(|s| s.graph.nodes.iter().map(|n| &n.features)));
    if config.c <= 0.0 {
        return Ok(TrainReport {
            model: CrfModel::from_weights(&[0.0; PARAM_DIM], stats),
            gaps: Vec::new(),
            passes: 0,
            converged: true,
        });
    }
    let blocks: Vec<Block> = samples
        .iter()
        .map(|s| {
            let graph = s.graph.standardized(&stats);
            let gold_phi = joint_feature(&graph, &s.gold);
            Block {
                graph,
                gold: s.gold.clone(),
                gold_phi,
            }
        })
        .collect();
    let n = blocks.len();
    let nf = n as f64;
    let lambda = 1.0 / (config.c * nf);
    let oracle = Oracle { decoder };

    let mut w = [0.0; PARAM_DIM];
    let mut loss = 0.0;
    let mut w_blocks = vec![[0.0; PARAM_DIM]; n];
    let mut l_blocks = vec![0.0; n];
    let mut w_avg = [0.0; PARAM_DIM];
    let mut w_blocks_avg = vec![[0.0; PARAM_DIM]; n];
    let mut l_blocks_avg = vec![0.0; n];

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut gaps = Vec::new();
    let mut step = 0usize;
    let mut converged = false;

    for _pass in 0..config.max_passes {
        order.shuffle(&mut rng);
        for &i in &order {
            let (psi, li) = oracle.most_violated(&blocks[i], &w, stats)?;
            let mut ws = [0.0; PARAM_DIM];
            for k in 0..PARAM_DIM {
                ws[k] = psi[k] / (lambda * nf);
            }
            let ls = li / nf;
            let mut diff = [0.0; PARAM_DIM];
            for k in 0..PARAM_DIM {
                diff[k] = w_blocks[i][k] - ws[k];
            }
            let block_gap = lambda * dot(&diff, &w) - l_blocks[i] + ls;
            let denom = lambda * dot(&diff, &diff);
            let gamma = if denom > 0.0 {
                (block_gap / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut new_block = [0.0; PARAM_DIM];
            for k in 0..PARAM_DIM {
                new_block[k] = (1.0 - gamma) * w_blocks[i][k] + gamma * ws[k];
                w[k] += new_block[k] - w_blocks[i][k];
            }
            let new_loss = (1.0 - gamma) * l_blocks[i] + gamma * ls;
            loss += new_loss - l_blocks[i];
            w_blocks[i] = new_block;
            l_blocks[i] = new_loss;

            let rho = step as f64 / (step as f64 + 2.0);
            for k in 0..PARAM_DIM {
                w_avg[k] = rho * w_avg[k] + (1.0 - rho) * w[k];
            }
            for b in 0..n {
                for k in 0..PARAM_DIM {
                    w_blocks_avg[b][k] = rho * w_blocks_avg[b][k] + (1.0 - rho) * w_blocks[b][k];
                }
                l_blocks_avg[b] = rho * l_blocks_avg[b] + (1.0 - rho) * l_blocks[b];
            }
            step += 1;
        }
        if !w.iter().chain(&w_avg).all(|v| v.is_finite()) || !loss.is_finite() {
            return Err(CrfError::NonFinite);
        }
        let mut gap = 0.0;
        for (i, block) in blocks.iter().enumerate() {
            let (psi, li) = oracle.most_violated(block, &w_avg, stats)?;
            let mut diff = [0.0; PARAM_DIM];
            for k in 0..PARAM_DIM {
                diff[k] = w_blocks_avg[i][k] - psi[k] / (lambda * nf);
            }
            gap += lambda * dot(&diff, &w_avg) - l_blocks_avg[i] + li / nf;
        }
        gaps.push(gap);
        if gap < config.gap_tol {
            converged = true;
            break;
        }
    }
    Ok(TrainReport {
        model: CrfModel::from_weights(&w_avg, stats),
        passes: gaps.len(),
        gaps,
        converged,
    })
}

/// Fraction of nodes whose decoded label matches gold, pooled over samples.
pub fn hamming_accuracy(samples: &[TrainingSample], model: &CrfModel, decoder: &dyn MapDecoder) -> Result<f64, CrfError> {
    let (mut right, mut total) = (0usize, 0usize);
    for s in samples {
        let g = s.graph.standardized(&model.stats);
        let y = decoder.decode(&Potentials::new(&g, model))?;
        right += s.gold.len() - s.gold.hamming(&y);
        total += s.gold.len();
    }
    Ok(if total == 0 { 1.0 } else { right as f64 / total as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::{energy, Node};
    use crate::features::NodeFeatures;

    fn one_node(x: f64, gold: u8) -> TrainingSample {
        let node = Node {
            edgelet_id: 0,
            features: NodeFeatures([x, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            centroid: (0.0, 0.0),
        };
        TrainingSample {
            graph: EdgeGraph::new(vec![node], vec![]).unwrap(),
            gold: Labeling(vec![gold]),
        }
    }

    #[test]
    fn separable_single_nodes() {
        let samples = vec![one_node(1.0, 1), one_node(-1.0, 0), one_node(2.0, 1), one_node(-3.0, 0)];
        let report = train_bcfw(&samples, &BcfwConfig::default()).unwrap();
        let acc = hamming_accuracy(&samples, &report.model, &LoopyBp::default()).unwrap();
        assert_eq!(acc, 1.0);
        assert!(report.final_gap() < report.gaps[0] || report.gaps.len() == 1);
    }

    #[test]
    fn single_sample_single_node() {
        let samples = vec![one_node(1.0, 1)];
        let report = train_bcfw(&samples, &BcfwConfig::default()).unwrap();
        assert_eq!(hamming_accuracy(&samples, &report.model, &LoopyBp::default()).unwrap(), 1.0);
    }

    #[test]
    fn zero_c_keeps_zero_weights() {
        let samples = vec![one_node(1.0, 1), one_node(-1.0, 0)];
        let cfg = BcfwConfig {
            c: 0.0,
            ..BcfwConfig::default()
        };
        let report = train_bcfw(&samples, &cfg).unwrap();
        assert!(report.model.weights().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_set_rejected() {
        assert!(matches!(
            train_bcfw(&[], &BcfwConfig::default()),
            Err(CrfError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn joint_feature_matches_energy() {
        let s = one_node(2.5, 1);
        let mut model = CrfModel::zeros();
        model.unary[1][0] = 3.0;
        let phi = joint_feature(&s.graph, &s.gold);
        assert_eq!(dot(&model.weights(), &phi), energy(&s.graph, &s.gold, &model).unwrap());
    }
}
