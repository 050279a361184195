use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use salprop::bayes::{posterior, SaliencyHistograms, BINS};
use salprop::edges::{orientation_delta, EdgeMap};
use salprop::evalkit::{iou, recall_at_n};
use salprop::imagio::srgb_pixel_to_lab;
use salprop::proposals::{
    nms_boxes, read_proposals_csv, refine_window, write_proposals_csv, Proposal, ProposalSet, SalientEdge,
    SalientEdgeIndex, Window,
};

fn window() -> impl Strategy<Value = Window> {
    (0u32..100, 0u32..100, 1u32..60, 1u32..60).prop_map(|(x, y, w, h)| Window::new(x, y, w, h))
}

fn proposals(max: usize) -> impl Strategy<Value = Vec<Proposal>> {
    prop::collection::vec((window(), 0u32..40), 0..max).prop_map(|v| {
        v.into_iter()
            .map(|(window, s)| Proposal {
                window,
                score: s as f64 / 8.0,
                rank: 0,
            })
            .collect()
    })
}

fn scene(w: u32, h: u32) -> impl Strategy<Value = Vec<SalientEdge>> {
    prop::collection::vec((0..w, 0..h, 0u32..30, 0u32..30, 16usize..60, 0.0f64..1.0, any::<bool>()), 0..25).prop_map(
        move |v| {
            v.into_iter()
                .enumerate()
                .map(|(id, (x, y, dx, dy, length, saliency, object))| SalientEdge {
                    id,
                    bbox: (x, y, (x + dx).min(w - 1), (y + dy).min(h - 1)),
                    length,
                    saliency,
                    object,
                })
                .collect()
        },
    )
}

proptest! {
    #[test]
    fn iou_symmetric_and_bounded(a in window(), b in window()) {
        let ab = iou(&a, &b);
        prop_assert_eq!(ab, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn ranking_is_dense_and_sorted(props in proposals(60)) {
        let set = ProposalSet::ranked(props.clone());
        prop_assert_eq!(set.len(), props.len());
        for (k, p) in set.proposals.iter().enumerate() {
            prop_assert_eq!(p.rank, k + 1);
        }
        prop_assert!(set.proposals.windows(2).all(|p| p[0].score >= p[1].score));
    }

    #[test]
    fn nms_output_is_sparse_subset(props in proposals(60), theta in 0.1f64..0.95) {
        let set = ProposalSet::ranked(props);
        let kept = nms_boxes(&set, theta);
        for (k, p) in kept.proposals.iter().enumerate() {
            prop_assert_eq!(p.rank, k + 1);
            prop_assert!(set.proposals.iter().any(|q| q.window == p.window && q.score == p.score));
            for q in &kept.proposals[..k] {
                prop_assert!(iou(&p.window, &q.window) <= theta);
            }
        }
        // the best box always survives
        if let Some(first) = set.proposals.first() {
            prop_assert_eq!(kept.proposals[0].score, first.score);
        }
    }

    #[test]
    fn refine_never_lowers_score(edges in scene(120, 90), start in (0u32..60, 0u32..40, 8u32..60, 8u32..50)) {
        let index = SalientEdgeIndex::new(edges);
        let start = Window::new(start.0, start.1, start.2, start.3);
        let before = index.score(&start);
        let p = refine_window(start, &index, 0.65, 120, 90, 8);
        prop_assert!(p.score >= before);
        prop_assert_eq!(p.score, index.score(&p.window));
        prop_assert!(p.window.x + p.window.w <= 120 && p.window.y + p.window.h <= 90);
        prop_assert!(p.window.w >= 8 && p.window.h >= 8);
    }

    #[test]
    fn score_grows_with_containment(edges in scene(100, 100), win in (0u32..50, 0u32..50, 8u32..50, 8u32..50)) {
        // enlarging a window can only add contained edges
        let index = SalientEdgeIndex::new(edges);
        let a = Window::new(win.0, win.1, win.2, win.3);
        let b = Window::new(0, 0, win.0 + win.2 + 1, win.1 + win.3 + 1);
        let unnormalized = |w: &Window| index.score(w) * (w.w as f64 * w.h as f64).sqrt();
        prop_assert!(unnormalized(&b) + 1e-9 >= unnormalized(&a));
    }

    #[test]
    fn proposal_csv_round_trip(props in proposals(30)) {
        let set = ProposalSet::ranked(props);
        let mut buf = Vec::new();
        write_proposals_csv(&mut buf, &set, &["note".to_string()]).unwrap();
        let back = read_proposals_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.proposals.len(), set.proposals.len());
        for (a, b) in back.proposals.iter().zip(&set.proposals) {
            prop_assert_eq!(a.window, b.window);
            prop_assert_eq!(a.rank, b.rank);
            prop_assert_eq!(a.score.to_bits(), b.score.to_bits());
        }
    }

    #[test]
    fn emap_round_trip(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
        let mags: Vec<f32> = (0..w * h).map(|i| ((seed.wrapping_mul(i as u64 + 7) % 2551) as f32) / 10.0).collect();
        let oris: Vec<f32> = (0..w * h).map(|i| ((seed.wrapping_add(i as u64) % 314) as f32) / 100.0).collect();
        let map = EdgeMap::new(w, h, mags, oris).unwrap();
        let back = EdgeMap::decode(&map.encode()).unwrap();
        prop_assert_eq!(back.encode(), map.encode());
    }

    #[test]
    fn posterior_is_probability(raw in prop::collection::vec(1u32..100, 2 * BINS), prior in 0.0f64..=1.0, strength in 0.0f64..300.0) {
        let norm = |v: &[u32]| {
            let t: u32 = v.iter().sum();
            let mut out = [0.0; BINS];
            for (o, x) in out.iter_mut().zip(v) {
                *o = *x as f64 / t as f64;
            }
            out
        };
        let hist = SaliencyHistograms { salient: norm(&raw[..BINS]), background: norm(&raw[BINS..]), max_strength: 255.0 };
        let p = posterior(strength, prior, &hist);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn orientation_delta_wraps(a in 0.0f64..std::f64::consts::PI, b in 0.0f64..std::f64::consts::PI) {
        let d = orientation_delta(a, b);
        prop_assert!((-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2 + 1e-12).contains(&d));
        let r = (a + d - b).rem_euclid(std::f64::consts::PI);
        prop_assert!(r < 1e-9 || std::f64::consts::PI - r < 1e-9);
    }

    #[test]
    fn recall_monotone_in_n(gts in prop::collection::vec(window(), 1..5), props in prop::collection::vec(window(), 1..40)) {
        let mut prev = 0.0;
        for n in 1..=props.len() {
            let r = recall_at_n(&props, &gts, n, 0.5).unwrap();
            prop_assert!(r >= prev);
            prev = r;
        }
    }

    #[test]
    fn lab_lightness_in_range(r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
        let [l, _, _] = srgb_pixel_to_lab([r, g, b]);
        prop_assert!((-1e-9..=100.0 + 1e-6).contains(&l));
    }
}

#[test]
fn lab_reference_points() {
    let white = srgb_pixel_to_lab([255, 255, 255]);
    assert_abs_diff_eq!(white[0], 100.0, epsilon = 1e-3);
    assert_abs_diff_eq!(white[1], 0.0, epsilon = 1e-2);
    assert_abs_diff_eq!(white[2], 0.0, epsilon = 1e-2);
    let red = srgb_pixel_to_lab([255, 0, 0]);
    assert_abs_diff_eq!(red[0], 53.24, epsilon = 0.05);
    assert_abs_diff_eq!(red[1], 80.09, epsilon = 0.1);
    assert_abs_diff_eq!(red[2], 67.20, epsilon = 0.1);
}
