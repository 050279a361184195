//! Bayesian edge saliency: a texture/colour/strength prior combined with
//! strength likelihoods learned from the image's own salient and background
//! edgelets.

use std::io::Write;

use thiserror::Error;

use crate::edges::Edgelet;
use crate::features::NodeFeatures;

pub const BINS: usize = 10;
pub const PRIOR_FLOOR: f64 = 1e-3;
pub const PRIOR_CEIL: f64 = 1.0 - 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum BayesError {
    #[error("no edgelets to score")]
    EmptyInput,
    #[error("beta must be positive, got {0}")]
    BadBeta(f64),
    #[error("{edgelets} edgelets but {features} feature vectors")]
    Misaligned { edgelets: usize, features: usize },
}

/// Smoothed, normalized magnitude histograms of salient and background edgelets.
///
/// Bins cover magnitudes divided by `max_strength`, ten uniform bins on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyHistograms {
    pub salient: [f64; BINS],
    pub background: [f64; BINS],
    pub max_strength: f64,
}

impl SaliencyHistograms {
    /// Bin for a normalized value; the last bin is closed at 1.
    pub fn bin(normalized: f64) -> usize {
        ((normalized * BINS as f64).floor().max(0.0) as usize).min(BINS - 1)
    }

    /// `(p(s | sal), p(s | bg))` for an edgelet strength.
    pub fn likelihoods(&self, strength: f64) -> (f64, f64) {
        let b = Self::bin(strength / self.max_strength);
        (self.salient[b], self.background[b])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeletSaliency {
    pub edgelet_id: usize,
    pub prior: f64,
    pub posterior: f64,
    pub nu: f64,
    pub strength: f64,
}

/// Priors from the products `f_G * f_LTP * strength`, normalized by their maximum and clamped.
pub fn prior_from_products(nu: &[f64]) -> Result<Vec<f64>, BayesError> {
    if nu.is_empty() {
        return Err(BayesError::EmptyInput);
    }
    let max = nu.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(vec![0.5; nu.len()]);
    }
    Ok(nu
        .iter()
        .map(|v| (v / max).clamp(PRIOR_FLOOR, PRIOR_CEIL))
        .collect())
}

/// Priors for `(f_G, f_LTP, strength)` triples.
pub fn saliency_prior(nodes: &[(f64, f64, f64)]) -> Result<Vec<f64>, BayesError> {
    let nu: Vec<f64> = nodes.iter().map(|(g, t, s)| g * t * s).collect();
    prior_from_products(&nu)
}

fn normalize(counts: [f64; BINS]) -> [f64; BINS] {
    let total: f64 = counts.iter().sum();
    counts.map(|c| c / total)
}

/// Splits edgelets at `beta` times the strongest strength and histograms member magnitudes.
pub fn build_likelihood_histograms(
    edgelets: &[Edgelet],
    beta: f64,
) -> Result<SaliencyHistograms, BayesError> {
    if !(beta > 0.0) {
        return Err(BayesError::BadBeta(beta));
    }
    if edgelets.is_empty() {
        return Err(BayesError::EmptyInput);
    }
    let max_strength = edgelets.iter().map(|e| e.strength).fold(0.0, f64::max);
    let max_strength = if max_strength > 0.0 { max_strength } else { 1.0 };
    let mut salient = [1.0; BINS];
    let mut background = [1.0; BINS];
    for e in edgelets {
        let target = if e.strength >= beta * max_strength {
            &mut salient
        } else {
            &mut background
        };
        for &m in &e.magnitudes {
            target[SaliencyHistograms::bin(m as f64 / max_strength)] += 1.0;
        }
    }
    Ok(SaliencyHistograms {
        salient: normalize(salient),
        background: normalize(background),
        max_strength,
    })
}

/// Posterior from prior and the two likelihoods.
pub fn posterior_from_likelihoods(prior: f64, p_sal: f64, p_bg: f64) -> f64 {
    let num = prior * p_sal;
    num / (num + (1.0 - prior) * p_bg)
}

/// Background posterior, the complement of [`posterior_from_likelihoods`].
pub fn background_posterior(prior: f64, p_sal: f64, p_bg: f64) -> f64 {
    let num = (1.0 - prior) * p_bg;
    num / (prior * p_sal + num)
}

pub fn posterior(strength: f64, prior: f64, hist: &SaliencyHistograms) -> f64 {
    let (p_sal, p_bg) = hist.likelihoods(strength);
    posterior_from_likelihoods(prior, p_sal, p_bg)
}

pub fn compute_saliency(
    edgelets: &[Edgelet],
    features: &[NodeFeatures],
    beta: f64,
) -> Result<Vec<EdgeletSaliency>, BayesError> {
    if edgelets.len() != features.len() {
        return Err(BayesError::Misaligned {
            edgelets: edgelets.len(),
            features: features.len(),
        });
    }
    let hist = build_likelihood_histograms(edgelets, beta)?;
    let nu: Vec<f64> = features
        .iter()
        .map(|f| f.color_gradient() * f.ltp() * f.strength())
        .collect();
    let priors = prior_from_products(&nu)?;
    Ok(edgelets
        .iter()
        .zip(priors)
        .zip(nu)
        .map(|((e, prior), nu)| EdgeletSaliency {
            edgelet_id: e.id,
            prior,
            posterior: posterior(e.strength, prior, &hist),
            nu,
            strength: e.strength,
        })
        .collect())
}

/// Debug dump: `edgelet_id,prior,posterior,strength`.
pub fn write_saliency_csv(mut out: impl Write, rows: &[EdgeletSaliency]) -> std::io::Result<()> {
    writeln!(out, "edgelet_id,prior,posterior,strength")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.edgelet_id, r.prior, r.posterior, r.strength)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edges::EdgeMap;

    fn edgelet_with(id: usize, mags: &[f32]) -> Edgelet {
        let mut map = EdgeMap::zeros(mags.len(), 1);
        for (x, &m) in mags.iter().enumerate() {
            map.set(x, 0, m, 0.0);
        }
        let px = (0..mags.len()).map(|x| (x as u32, 0)).collect();
        Edgelet::from_pixels(id, px, &map)
    }

    #[test]
    fn prior_ratio_and_clamp() {
        assert_eq!(prior_from_products(&[2.0, 4.0, 8.0]).unwrap(), vec![0.25, 0.5, 0.999]);
        assert_eq!(prior_from_products(&[3.0, 3.0]).unwrap(), vec![0.999, 0.999]);
        assert_eq!(prior_from_products(&[0.0, 0.0, 0.0]).unwrap(), vec![0.5; 3]);
        assert_eq!(prior_from_products(&[]), Err(BayesError::EmptyInput));
        assert_eq!(
            saliency_prior(&[(1.0, 1.0, 2.0), (2.0, 2.0, 2.0)]).unwrap(),
            vec![0.25, 0.999]
        );
    }

    #[test]
    fn split_membership() {
        let es = [
            edgelet_with(0, &[90.0]),
            edgelet_with(1, &[85.0]),
            edgelet_with(2, &[30.0]),
            edgelet_with(3, &[20.0]),
            edgelet_with(4, &[100.0]),
        ];
        let h = build_likelihood_histograms(&es, 0.8).unwrap();
        // salient: 0.9, 0.85, 1.0 -> bins 9, 8, 9 ; background: 0.3, 0.2 -> bins 3, 2
        let s = [1., 1., 1., 1., 1., 1., 1., 1., 2., 3.].map(|c| c / 13.0);
        let b = [1., 1., 2., 2., 1., 1., 1., 1., 1., 1.].map(|c| c / 12.0);
        assert_eq!(h.salient, s);
        assert_eq!(h.background, b);
    }

    #[test]
    fn single_edgelet_background_uniform() {
        let h = build_likelihood_histograms(&[edgelet_with(0, &[50.0, 70.0])], 0.8).unwrap();
        assert_eq!(h.background, [0.1; BINS]);
        assert!(h.salient[9] > h.salient[0]);
    }

    #[test]
    fn two_edgelet_hand_count() {
        // M = 200; A (strength 200): 0.5, 0.75, 1.0 -> bins 5, 7, 9 ; B (strength 100): 0.25, 0.5 -> bins 2, 5
        let es = [edgelet_with(0, &[100.0, 150.0, 200.0]), edgelet_with(1, &[50.0, 100.0])];
        let h = build_likelihood_histograms(&es, 0.8).unwrap();
        let mut s = [1.0; BINS];
        s[5] += 1.0;
        s[7] += 1.0;
        s[9] += 1.0;
        let mut b = [1.0; BINS];
        b[2] += 1.0;
        b[5] += 1.0;
        assert_eq!(h.salient, s.map(|c| c / 13.0));
        assert_eq!(h.background, b.map(|c| c / 12.0));
    }

    #[test]
    fn posterior_arithmetic() {
        assert_eq!(posterior_from_likelihoods(0.5, 0.2, 0.2), 0.5);
        assert!((posterior_from_likelihoods(0.25, 0.3, 0.1) - 0.5).abs() < 1e-15);
        assert!((posterior_from_likelihoods(0.999, 0.4, 0.4) - 0.999).abs() < 1e-15);
    }

    #[test]
    fn bin_edges() {
        assert_eq!(SaliencyHistograms::bin(0.0), 0);
        assert_eq!(SaliencyHistograms::bin(0.1), 1);
        assert_eq!(SaliencyHistograms::bin(0.99), 9);
        assert_eq!(SaliencyHistograms::bin(1.0), 9);
    }

    #[test]
    fn errors() {
        assert_eq!(build_likelihood_histograms(&[], 0.8), Err(BayesError::EmptyInput));
        assert_eq!(
            build_likelihood_histograms(&[edgelet_with(0, &[1.0])], 0.0),
            Err(BayesError::BadBeta(0.0))
        );
        assert_eq!(compute_saliency(&[], &[], 0.8), Err(BayesError::EmptyInput));
    }

    #[test]
    fn strong_edgelet_on_flat_background() {
        // one strong edgelet, one weak; the strong one's strength bin is dominated by salient mass
        let strong = edgelet_with(0, &[200.0; 20]);
        let weak = edgelet_with(1, &[50.0; 20]);
        let feats = [
            NodeFeatures([10.0, 0.0, 0.0, 0.0, 0.0, 2.0, 200.0]),
            NodeFeatures([5.0, 0.0, 0.0, 0.0, 0.0, 1.0, 50.0]),
        ];
        let out = compute_saliency(&[strong, weak], &feats, 0.8).unwrap();
        // nu = 4000 and 250 -> priors 0.999 and 0.0625
        assert_eq!(out[0].prior, 0.999);
        assert_eq!(out[1].prior, 0.0625);
        // salient hist: bin 9 gets 21/30 ; background: bin 2 gets 21/30, bin 9 1/30
        let expect = posterior_from_likelihoods(0.999, 21.0 / 30.0, 1.0 / 30.0);
        assert_eq!(out[0].posterior, expect);
        assert!(out[0].posterior >= out[0].prior);
        let mut csv = Vec::new();
        write_saliency_csv(&mut csv, &out).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("edgelet_id,prior,posterior,strength\n0,"));
    }
}
