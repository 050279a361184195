use super::graph::EdgeGraph;
use super::model::CrfModel;
use super::{dot, pair_index, CrfError, Labeling};

pub const EXACT_NODE_LIMIT: usize = 20;

/// Log-domain unary and pairwise scores of one graph under one model.
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub unary: Vec<[f64; 2]>,
    /// `pairwise[k][li][lj]` for link `k`.
    pub pairwise: Vec<[[f64; 2]; 2]>,
    pub links: Vec<(usize, usize)>,
    incident: Vec<Vec<usize>>,
}

impl Potentials {
    /// Scores for a graph whose node features are already standardized.
    pub fn new(graph: &EdgeGraph, model: &CrfModel) -> Self {
        let unary = graph
            .nodes
            .iter()
            .map(|n| {
                [
                    dot(&model.unary[0], &n.features.0),
                    dot(&model.unary[1], &n.features.0),
                ]
            })
            .collect();
        let pairwise = graph
            .links
            .iter()
            .map(|l| {
                let s = |a: u8, b: u8| dot(&model.pairwise[pair_index(a, b)], &l.features.0);
                [[s(0, 0), s(0, 1)], [s(1, 0), s(1, 1)]]
            })
            .collect();
        Self::from_parts(unary, pairwise, graph.links.iter().map(|l| (l.i, l.j)).collect())
    }

    pub fn from_parts(
        unary: Vec<[f64; 2]>,
        pairwise: Vec<[[f64; 2]; 2]>,
        links: Vec<(usize, usize)>,
    ) -> Self {
        assert_eq!(pairwise.len(), links.len());
        let mut incident = vec![Vec::new(); unary.len()];
        for (k, &(i, j)) in links.iter().enumerate() {
            incident[i].push(k);
            incident[j].push(k);
        }
        Self {
            unary,
            pairwise,
            links,
            incident,
        }
    }

    pub fn len(&self) -> usize {
        self.unary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unary.is_empty()
    }

    /// Adds `weight` to every label that disagrees with `gold` (Hamming loss augmentation).
    pub fn add_hamming_loss(&mut self, gold: &Labeling, weight: f64) {
        for (u, &g) in self.unary.iter_mut().zip(&gold.0) {
            u[1 - g as usize] += weight;
        }
    }

    pub fn score(&self, labels: &[u8]) -> f64 {
        let mut s = 0.0;
        for (u, &l) in self.unary.iter().zip(labels) {
            s += u[l as usize];
        }
        for (p, &(i, j)) in self.pairwise.iter().zip(&self.links) {
            s += p[labels[i] as usize][labels[j] as usize];
        }
        s
    }
}

/// A MAP decoder over binary pairwise potentials.
pub trait MapDecoder: Send + Sync {
    fn name(&self) -> &'static str;
    fn decode(&self, potentials: &Potentials) -> Result<Labeling, CrfError>;
}

/// Damped synchronous max-product belief propagation in the log domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopyBp {
    pub max_iters: usize,
    /// Weight of the previous message in each update.
    pub damping: f64,
    pub tolerance: f64,
}

impl Default for LoopyBp {
    fn default() -> Self {
        Self {
            max_iters: 50,
            damping: 0.5,
            tolerance: 1e-6,
        }
    }
}

impl LoopyBp {
    pub fn run(&self, p: &Potentials) -> Labeling {
        let n = p.len();
        // messages[2k] flows i -> j over link k, messages[2k + 1] flows j -> i
        let mut msgs = vec![[0.0f64; 2]; 2 * p.links.len()];
        let incoming = |msgs: &[[f64; 2]], node: usize, skip: Option<usize>| -> [f64; 2] {
            let mut acc = p.unary[node];
            for &k in &p.incident[node] {
                if Some(k) == skip {
                    continue;
                }
                let m = if p.links[k].1 == node { msgs[2 * k] } else { msgs[2 * k + 1] };
                acc[0] += m[0];
                acc[1] += m[1];
            }
            acc
        };
        for _ in 0..self.max_iters {
            let mut next = msgs.clone();
            let mut delta = 0.0f64;
            for (k, &(i, j)) in p.links.iter().enumerate() {
                for (slot, src, forward) in [(2 * k, i, true), (2 * k + 1, j, false)] {
                    let h = incoming(&msgs, src, Some(k));
                    let mut m = [0.0; 2];
                    for (dst_label, out) in m.iter_mut().enumerate() {
                        *out = (0..2)
                            .map(|src_label| {
                                let pw = if forward {
                                    p.pairwise[k][src_label][dst_label]
                                } else {
                                    p.pairwise[k][dst_label][src_label]
                                };
                                h[src_label] + pw
                            })
                            .fold(f64::NEG_INFINITY, f64::max);
                    }
                    let top = m[0].max(m[1]);
                    for (v, old) in m.iter_mut().zip(msgs[slot]) {
                        *v = (1.0 - self.damping) * (*v - top) + self.damping * old;
                        delta = delta.max((*v - old).abs());
                    }
                    next[slot] = m;
                }
            }
            msgs = next;
            if delta < self.tolerance {
                break;
            }
        }
        Labeling(
            (0..n)
                .map(|node| {
                    let b = incoming(&msgs, node, None);
                    u8::from(b[1] > b[0])
                })
                .collect(),
        )
    }
}

impl MapDecoder for LoopyBp {
    fn name(&self) -> &'static str {
        "bp"
    }

    fn decode(&self, potentials: &Potentials) -> Result<Labeling, CrfError> {
        Ok(self.run(potentials))
    }
}

/// Exhaustive enumeration; returns the lexicographically smallest maximizer.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Exhaustive;

impl Exhaustive {
    pub fn run(&self, p: &Potentials) -> Result<Labeling, CrfError> {
        let n = p.len();
        if n > EXACT_NODE_LIMIT {
            return Err(CrfError::TooLarge(n));
        }
        let mut labels = vec![0u8; n];
        let mut best = labels.clone();
        let mut best_score = f64::NEG_INFINITY;
        // counting upward with node 0 as the most significant bit visits labelings lexicographically
        for code in 0u64..(1u64 << n) {
            for (i, l) in labels.iter_mut().enumerate() {
                *l = ((code >> (n - 1 - i)) & 1) as u8;
            }
            let s = p.score(&labels);
            if s > best_score {
                best_score = s;
                best.copy_from_slice(&labels);
            }
        }
        Ok(Labeling(best))
    }
}

impl MapDecoder for Exhaustive {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn decode(&self, potentials: &Potentials) -> Result<Labeling, CrfError> {
        self.run(potentials)
    }
}

pub fn map_inference(graph: &EdgeGraph, model: &CrfModel, max_iters: usize, damping: f64) -> Labeling {
    LoopyBp {
        max_iters,
        damping,
        ..LoopyBp::default()
    }
    .run(&Potentials::new(graph, model))
}

pub fn map_inference_exact(graph: &EdgeGraph, model: &CrfModel) -> Result<Labeling, CrfError> {
    Exhaustive.run(&Potentials::new(graph, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::{energy, graph::Node, Link};
    use crate::features::{LinkFeatures, NodeFeatures};

    fn single_node(scores: (f64, f64)) -> (EdgeGraph, CrfModel) {
        let node = Node {
            edgelet_id: 0,
            features: NodeFeatures([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            centroid: (0.0, 0.0),
        };
        let mut m = CrfModel::zeros();
        m.unary[0][0] = scores.0;
        m.unary[1][0] = scores.1;
        (EdgeGraph::new(vec![node], vec![]).unwrap(), m)
    }

    #[test]
    fn single_node_cases() {
        let (g, m) = single_node((1.0, 2.0));
        assert_eq!(energy(&g, &Labeling(vec![0]), &m).unwrap(), 1.0);
        assert_eq!(energy(&g, &Labeling(vec![1]), &m).unwrap(), 2.0);
        assert_eq!(map_inference(&g, &m, 50, 0.5), Labeling(vec![1]));
        assert_eq!(map_inference_exact(&g, &m).unwrap(), Labeling(vec![1]));
        let (g, m) = single_node((3.0, 2.0));
        assert_eq!(map_inference(&g, &m, 50, 0.5), Labeling(vec![0]));
    }

    #[test]
    fn zero_model_ties_to_zero() {
        let nodes: Vec<_> = (0..4)
            .map(|k| Node {
                edgelet_id: k,
                features: NodeFeatures([k as f64; 7]),
                centroid: (k as f64, 0.0),
            })
            .collect();
        let links = vec![Link {
            i: 0,
            j: 1,
            features: LinkFeatures([1.0, 0.0, 2.0, 3.0]),
        }];
        let g = EdgeGraph::new(nodes, links).unwrap();
        let m = CrfModel::zeros();
        assert_eq!(map_inference(&g, &m, 50, 0.5), Labeling::zeros(4));
        assert_eq!(map_inference_exact(&g, &m).unwrap(), Labeling::zeros(4));
        assert_eq!(energy(&g, &Labeling(vec![1, 0, 1, 1]), &m).unwrap(), 0.0);
        assert!(energy(&g, &Labeling(vec![1]), &m).is_err());
    }

    #[test]
    fn too_large_for_exhaustive() {
        let p = Potentials::from_parts(vec![[0.0, 1.0]; 21], vec![], vec![]);
        assert!(matches!(Exhaustive.run(&p), Err(CrfError::TooLarge(21))));
        let p = Potentials::from_parts(vec![[0.0, 1.0]; 20], vec![], vec![]);
        assert_eq!(Exhaustive.run(&p).unwrap(), Labeling(vec![1; 20]));
    }

    #[test]
    fn attractive_chain() {
        // node 0 strongly prefers 1, others mildly prefer 0, strong agreement on links
        let mut unary = vec![[0.0, 5.0]];
        unary.extend(std::iter::repeat_n([0.5, 0.0], 4));
        let agree = [[1.0, -1.0], [-1.0, 2.0]];
        let links: Vec<_> = (0..4).map(|i| (i, i + 1)).collect();
        let p = Potentials::from_parts(unary, vec![agree; 4], links);
        let exact = Exhaustive.run(&p).unwrap();
        assert_eq!(exact, Labeling(vec![1; 5]));
        assert_eq!(LoopyBp::default().run(&p), exact);
    }

    #[test]
    fn hamming_augmentation() {
        let mut p = Potentials::from_parts(vec![[0.0, 0.0]; 2], vec![], vec![]);
        p.add_hamming_loss(&Labeling(vec![0, 1]), 0.5);
        assert_eq!(p.unary, vec![[0.0, 0.5], [0.5, 0.0]]);
    }
}
