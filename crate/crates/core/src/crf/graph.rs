use crate::edges::Edgelet;
use crate::features::{link_features, LinkFeatures, NodeFeatures, NODE_DIM};

use super::CrfError;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub edgelet_id: usize,
    pub features: NodeFeatures,
    pub centroid: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub i: usize,
    pub j: usize,
    pub features: LinkFeatures,
}

/// Edgelets as nodes, spatially close pairs as links (`i < j`).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGraph {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    adjacency: Vec<Vec<usize>>,
}

impl EdgeGraph {
    /// Validates and indexes a graph.
    pub fn new(nodes: Vec<Node>, links: Vec<Link>) -> Result<Self, CrfError> {
        let n = nodes.len();
        for l in &links {
            if l.i == l.j {
                return Err(CrfError::InvalidGraph(format!("self link on node {}", l.i)));
            }
            if l.i.max(l.j) >= n {
                return Err(CrfError::InvalidGraph(format!(
                    "link ({}, {}) out of range for {n} nodes",
                    l.i, l.j
                )));
            }
            if l.i > l.j {
                return Err(CrfError::InvalidGraph(format!(
                    "link ({}, {}) must have i < j",
                    l.i, l.j
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for l in &links {
            if !seen.insert((l.i, l.j)) {
                return Err(CrfError::InvalidGraph(format!("duplicate link ({}, {})", l.i, l.j)));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (k, l) in links.iter().enumerate() {
            adjacency[l.i].push(k);
            adjacency[l.j].push(k);
        }
        Ok(Self {
            nodes,
            links,
            adjacency,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Link indices touching `node`.
    pub fn incident(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// Copy with node features z-scored and link features recomputed from them.
    pub fn standardized(&self, stats: &FeatureStats) -> EdgeGraph {
        let nodes: Vec<Node> = self
            .nodes
            .iter()
            .map(|n| Node {
                features: stats.apply(&n.features),
                ..n.clone()
            })
            .collect();
        let links = self
            .links
            .iter()
            .map(|l| Link {
                i: l.i,
                j: l.j,
                features: link_features(
                    &nodes[l.i].features,
                    nodes[l.i].centroid,
                    &nodes[l.j].features,
                    nodes[l.j].centroid,
                ),
            })
            .collect();
        EdgeGraph {
            nodes,
            links,
            adjacency: self.adjacency.clone(),
        }
    }
}

/// Per-component mean and standard deviation of raw node features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureStats {
    pub mean: [f64; NODE_DIM],
    pub std: [f64; NODE_DIM],
}

impl Default for FeatureStats {
    fn default() -> Self {
        Self {
            mean: [0.0; NODE_DIM],
            std: [1.0; NODE_DIM],
        }
    }
}

impl FeatureStats {
    /// Population statistics; components without spread get unit scale.
    pub fn fit<'a>(features: impl IntoIterator<Item = &'a NodeFeatures>) -> Self {
        let all: Vec<&NodeFeatures> = features.into_iter().collect();
        if all.is_empty() {
            return Self::default();
        }
        let n = all.len() as f64;
        let mut mean = [0.0; NODE_DIM];
        for f in &all {
            for (m, v) in mean.iter_mut().zip(&f.0) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = [0.0; NODE_DIM];
        for f in &all {
            for k in 0..NODE_DIM {
                std[k] += (f.0[k] - mean[k]).powi(2);
            }
        }
        // constant components stay raw so they act as a bias term
        for k in 0..NODE_DIM {
            std[k] = (std[k] / n).sqrt();
            if !(std[k] > 1e-12) || !std[k].is_finite() {
                std[k] = 1.0;
                mean[k] = 0.0;
            }
        }
        Self { mean, std }
    }

    pub fn apply(&self, f: &NodeFeatures) -> NodeFeatures {
        let mut out = [0.0; NODE_DIM];
        for k in 0..NODE_DIM {
            out[k] = (f.0[k] - self.mean[k]) / self.std[k];
        }
        NodeFeatures(out)
    }
}

fn endpoint_distance(a: &Edgelet, b: &Edgelet) -> f64 {
    let ends = |e: &Edgelet| [e.pixels[0], *e.pixels.last().unwrap()];
    let mut best = f64::INFINITY;
    for p in ends(a) {
        for q in ends(b) {
            let dx = p.0 as f64 - q.0 as f64;
            let dy = p.1 as f64 - q.1 as f64;
            best = best.min((dx * dx + dy * dy).sqrt());
        }
    }
    best
}

/// Links edgelets whose closest endpoints are within `link_radius`.
///
/// Each node ranks its candidates by distance (ties to the lower index) and a
/// link survives only if each endpoint keeps the other among its `max_degree`
/// nearest, which bounds every degree by `max_degree`.
pub fn build_graph(
    edgelets: &[Edgelet],
    features: &[NodeFeatures],
    link_radius: f64,
    max_degree: usize,
) -> Result<EdgeGraph, CrfError> {
    if edgelets.len() != features.len() {
        return Err(CrfError::SizeMismatch(format!(
            "{} edgelets, {} feature vectors",
            edgelets.len(),
            features.len()
        )));
    }
    let n = edgelets.len();
    let boxes: Vec<_> = edgelets.iter().map(|e| e.bbox()).collect();
    let mut candidates: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            // cheap reject on bounding-box gap
            let (a, b) = (boxes[i], boxes[j]);
            let gx = (a.0 as f64 - b.2 as f64).max(b.0 as f64 - a.2 as f64).max(0.0);
            let gy = (a.1 as f64 - b.3 as f64).max(b.1 as f64 - a.3 as f64).max(0.0);
            if gx > link_radius || gy > link_radius {
                continue;
            }
            let d = endpoint_distance(&edgelets[i], &edgelets[j]);
            if d <= link_radius {
                candidates[i].push((d, j));
                candidates[j].push((d, i));
            }
        }
    }
    let mut keep: Vec<std::collections::HashSet<usize>> = Vec::with_capacity(n);
    for c in &mut candidates {
        c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        keep.push(c.iter().take(max_degree).map(|&(_, j)| j).collect());
    }
    let nodes: Vec<Node> = edgelets
        .iter()
        .zip(features)
        .map(|(e, f)| Node {
            edgelet_id: e.id,
            features: *f,
            centroid: e.centroid,
        })
        .collect();
    let mut links = Vec::new();
    for i in 0..n {
        let mut js: Vec<usize> = keep[i].iter().copied().filter(|&j| j > i && keep[j].contains(&i)).collect();
        js.sort_unstable();
        for j in js {
            links.push(Link {
                i,
                j,
                features: link_features(&features[i], nodes[i].centroid, &features[j], nodes[j].centroid),
            });
        }
    }
    EdgeGraph::new(nodes, links)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edges::EdgeMap;

    fn hline(id: usize, x0: u32, y: u32, len: u32, map: &EdgeMap) -> Edgelet {
        Edgelet::from_pixels(id, (x0..x0 + len).map(|x| (x, y)).collect(), map)
    }

    fn feats(n: usize) -> Vec<NodeFeatures> {
        (0..n).map(|i| NodeFeatures([i as f64; 7])).collect()
    }

    #[test]
    fn radius_rule() {
        let map = EdgeMap::zeros(200, 20);
        let near = [hline(0, 0, 5, 20, &map), hline(1, 24, 8, 20, &map)];
        let g = build_graph(&near, &feats(2), 15.0, 8).unwrap();
        assert_eq!(g.links.len(), 1);
        assert_eq!((g.links[0].i, g.links[0].j), (0, 1));
        let far = [hline(0, 0, 5, 20, &map), hline(1, 70, 5, 20, &map)];
        let g = build_graph(&far, &feats(2), 15.0, 8).unwrap();
        assert!(g.links.is_empty());
    }

    #[test]
    fn degree_cap() {
        let map = EdgeMap::zeros(100, 100);
        // star: center plus 12 short segments all starting within 3 px of the hub
        let mut es = vec![Edgelet::from_pixels(0, vec![(50, 50)], &map)];
        for k in 0..12u32 {
            es.push(Edgelet::from_pixels(k as usize + 1, vec![(40 + k, 52)], &map));
        }
        let g = build_graph(&es, &feats(13), 15.0, 4).unwrap();
        for i in 0..g.len() {
            assert!(g.incident(i).len() <= 4);
        }
    }

    #[test]
    fn invalid_graphs() {
        let node = |k| Node {
            edgelet_id: k,
            features: NodeFeatures([0.0; 7]),
            centroid: (0.0, 0.0),
        };
        let link = |i, j| Link {
            i,
            j,
            features: LinkFeatures([0.0; 4]),
        };
        assert!(EdgeGraph::new(vec![node(0)], vec![link(0, 0)]).is_err());
        assert!(EdgeGraph::new(vec![node(0), node(1)], vec![link(0, 1), link(0, 1)]).is_err());
        assert!(EdgeGraph::new(vec![node(0), node(1)], vec![link(0, 2)]).is_err());
        assert!(EdgeGraph::new(vec![node(0), node(1)], vec![link(0, 1)]).is_ok());
    }

    #[test]
    fn stats_standardize() {
        let fs = [NodeFeatures([1.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0]), NodeFeatures([3.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0])];
        let s = FeatureStats::fit(&fs);
        assert_eq!(s.mean[0], 2.0);
        assert_eq!(s.std[0], 1.0);
        assert_eq!(s.std[1], 1.0);
        assert_eq!(s.apply(&fs[0]).0[0], -1.0);
        assert_eq!(s.mean[1], 0.0);
        assert_eq!(s.apply(&fs[1]).0[1], 5.0);
    }
}
