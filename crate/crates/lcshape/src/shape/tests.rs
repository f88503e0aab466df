use super::*;
use crate::curves::{
    aggregate, AggregatePolicy, CurveKey, CurveSet, Metric, ObsMatrix, RepeatId, Scaling, Split,
};

fn key() -> CurveKey {
    CurveKey::new(
        "d",
        "l",
        Metric::ErrorRate,
        Split::Validation,
        Scaling::None,
    )
    .unwrap()
}

/// Curve whose repeats all equal the mean (zero noise), paired over `k`.
fn exact_curve(anchors: Vec<u64>, means: Vec<f64>, k: usize) -> EmpiricalCurve {
    let rows: Vec<Vec<f64>> = means.iter().map(|&m| vec![m; k]).collect();
    let set = CurveSet::new(
        key(),
        anchors,
        ObsMatrix::from_rows(rows).unwrap(),
        (0..k as u32)
            .map(|i| RepeatId {
                outer: i / 5,
                inner: i % 5,
            })
            .collect(),
    )
    .unwrap();
    aggregate(&set, AggregatePolicy::CompleteCase).unwrap()
}

fn curve_from_rows(anchors: Vec<u64>, rows: Vec<Vec<f64>>) -> EmpiricalCurve {
    let k = rows[0].len();
    let set = CurveSet::new(
        key(),
        anchors,
        ObsMatrix::from_rows(rows).unwrap(),
        (0..k as u32)
            .map(|i| RepeatId {
                outer: i / 5,
                inner: i % 5,
            })
            .collect(),
    )
    .unwrap();
    aggregate(&set, AggregatePolicy::CompleteCase).unwrap()
}

#[test]
fn mono_error_strictly_decreasing_is_zero() {
    let (eps, pair) = mono_violation_error(&[0.5, 0.4, 0.3]).unwrap();
    assert_eq!(eps, 0.0);
    assert!(pair.is_none());
}

#[test]
fn mono_error_hand_enumerated() {
    // Brute force over all 6 pairs gives 0.1 at (1, 2) zero-based.
    let (eps, pair) = mono_violation_error(&[0.5, 0.3, 0.4, 0.2]).unwrap();
    assert!((eps - 0.1).abs() < 1e-12);
    assert_eq!(pair, Some((1, 2)));
}

#[test]
fn mono_error_single_increasing_pair() {
    let (eps, pair) = mono_violation_error(&[0.2, 0.5]).unwrap();
    assert!((eps - 0.3).abs() < 1e-12);
    assert_eq!(pair, Some((0, 1)));
}

#[test]
fn mono_error_rejects_short_curves() {
    assert!(mono_violation_error(&[0.5]).is_err());
}

#[test]
fn interpolate_midpoint() {
    assert!((linear_interpolate(10, 30, 0.4, 0.2, 20).unwrap() - 0.3).abs() < 1e-15);
}

#[test]
fn interpolate_weights_by_raw_size() {
    let v = linear_interpolate(16, 64, 0.5, 0.1, 32).unwrap();
    assert!((v - (0.5 * (32.0 / 48.0) + 0.1 * (16.0 / 48.0))).abs() < 1e-15);
    assert!((v - 0.366_666_666_666_666_6).abs() < 1e-12);
}

#[test]
fn interpolate_constant_segment() {
    for (h, i, j) in [(10u64, 15u64, 30u64), (16, 17, 2000)] {
        let v = linear_interpolate(h, j, 0.42, 0.42, i).unwrap();
        assert!((v - 0.42).abs() < 1e-15);
    }
}

#[test]
fn interpolate_rejects_bad_ordering() {
    assert!(linear_interpolate(30, 10, 0.4, 0.2, 20).is_err());
    assert!(linear_interpolate(10, 30, 0.4, 0.2, 30).is_err());
}

#[test]
fn conv_error_exactly_linear_is_zero() {
    let (eps, t) = conv_violation_error(&[1, 2, 3], &[0.5, 0.35, 0.2]).unwrap();
    assert_eq!(eps, 0.0);
    assert!(t.is_none());
}

#[test]
fn conv_error_hand_computed() {
    let (eps, t) = conv_violation_error(&[1, 2, 3], &[0.5, 0.5, 0.2]).unwrap();
    assert!((eps - 0.15).abs() < 1e-12);
    assert_eq!(t, Some((0, 1, 2)));
}

#[test]
fn conv_error_zero_on_exact_power_law() {
    // Convex decreasing a + b * n^-c sampled exactly.
    let anchors: Vec<u64> = (1..40).map(|k| 16 + 3 * k).collect();
    let means: Vec<f64> = anchors
        .iter()
        .map(|&n| 0.1 + 0.5 * (n as f64).powf(-0.6))
        .collect();
    let (eps, _) = conv_violation_error(&anchors, &means).unwrap();
    assert!(eps <= 1e-12, "eps = {eps}");
}

#[test]
fn detectors_ignore_constant_curves() {
    let c = exact_curve(vec![16, 18, 20, 23], vec![0.4; 4], 25);
    assert!(detect_non_monotone(&c, 0.05).unwrap().is_none());
    assert!(detect_non_convex(&c, 0.05).unwrap().is_none());
    assert!(detect_dipping(&c, 0.05).unwrap().is_none());
}

#[test]
fn detectors_flag_noiseless_violations_via_degenerate_rule() {
    let c = exact_curve(vec![16, 18, 20, 23], vec![0.5, 0.3, 0.45, 0.2], 25);
    let w = detect_non_monotone(&c, 0.05).unwrap().unwrap();
    assert!(w.significant);
    assert_eq!(w.indices, vec![1, 2]);
    assert_eq!(w.p_value, 0.0);
}

#[test]
fn detect_non_convex_noiseless_power_law_is_none() {
    let anchors: Vec<u64> = (0..20).map(|k| 16 + 5 * k).collect();
    let means: Vec<f64> = anchors
        .iter()
        .map(|&n| 0.1 + 0.5 * (n as f64).powf(-0.6))
        .collect();
    let c = exact_curve(anchors, means, 25);
    assert!(detect_non_convex(&c, 0.05).unwrap().is_none());
}

#[test]
fn detect_requires_pairing() {
    let mut c = exact_curve(vec![16, 18, 20], vec![0.5, 0.6, 0.4], 5);
    c.repeat_matrix = None;
    assert!(matches!(
        detect_non_monotone(&c, 0.05),
        Err(Error::PairingUnavailable)
    ));
}

#[test]
fn dipping_strictly_decreasing_is_none() {
    let c = exact_curve(vec![16, 18, 20, 23], vec![0.5, 0.4, 0.3, 0.2], 25);
    assert!(detect_dipping(&c, 0.05).unwrap().is_none());
}

#[test]
fn dipping_hand_computed_pair() {
    let c = exact_curve(vec![16, 18, 20, 23], vec![0.5, 0.2, 0.3, 0.4], 25);
    let w = detect_dipping(&c, 0.05).unwrap().unwrap();
    assert!((w.epsilon - 0.2).abs() < 1e-12);
    assert_eq!(w.indices, vec![1, 3]);
    assert!(w.significant);
}

#[test]
fn dipping_none_when_curve_recovers_below_minimum() {
    // Peak recovers below its pre-peak minimum: final anchor beats all.
    let c = exact_curve(vec![16, 18, 20, 23], vec![0.5, 0.3, 0.45, 0.25], 25);
    assert!(detect_dipping(&c, 0.05).unwrap().is_none());
}

#[test]
fn peaking_noiseless_bump_detected() {
    // Decrease, bump, recover: all three degenerate tests give p = 0.
    let c = exact_curve(
        vec![16, 18, 20, 23, 27, 32],
        vec![0.5, 0.38, 0.31, 0.45, 0.27, 0.22],
        25,
    );
    let e = detect_peaking(&c, 0.05).unwrap().unwrap();
    assert_eq!(e.p_rise, 0.0);
    assert_eq!(e.p_recovery, 0.0);
    assert!(e.triple.1 == 3);
}

#[test]
fn peaking_none_for_monotone_increasing_curve() {
    // Risk only rises: no recovery, condition 3 fails.
    let c = exact_curve(vec![16, 18, 20, 23], vec![0.2, 0.3, 0.4, 0.5], 25);
    assert!(detect_peaking(&c, 0.05).unwrap().is_none());
}

#[test]
fn peaking_none_for_phase_transition() {
    // Monotone decreasing with a sudden drop: non-convex but not peaking.
    let means = vec![0.5, 0.499, 0.498, 0.497, 0.2, 0.199, 0.198];
    let anchors = vec![16, 32, 64, 128, 256, 512, 1024];
    let c = exact_curve(anchors, means, 25);
    assert!(detect_peaking(&c, 0.05).unwrap().is_none());
    let w = detect_non_convex(&c, 0.05).unwrap().unwrap();
    assert!(w.significant, "phase transitions violate convexity");
    assert!(detect_non_monotone(&c, 0.05).unwrap().is_none());
}

#[test]
fn local_monotonicity_noiseless_decreasing() {
    let c = exact_curve(vec![16, 18, 20, 23], vec![0.5, 0.4, 0.3, 0.2], 25);
    let labels = local_monotonicity(&c, 0.05).unwrap();
    assert_eq!(labels.len(), 3);
    assert!(labels.iter().all(|l| l.label == SegmentKind::Improvement));
    assert!(labels.iter().all(|l| l.p_improve == 0.0));
}

#[test]
fn local_monotonicity_noiseless_constant() {
    let c = exact_curve(vec![16, 18, 20], vec![0.4, 0.4, 0.4], 25);
    let labels = local_monotonicity(&c, 0.05).unwrap();
    assert!(labels.iter().all(|l| l.label == SegmentKind::Insignificant));
    assert!(labels
        .iter()
        .all(|l| l.p_improve == 1.0 && l.p_worsen == 1.0));
}

fn seg(label: SegmentKind) -> SegmentLabel {
    SegmentLabel {
        from_anchor: 0,
        to_anchor: 1,
        label,
        p_improve: 0.5,
        p_worsen: 0.5,
    }
}

#[test]
fn local_peak_patterns() {
    use SegmentKind::*;
    let mk = |kinds: &[SegmentKind]| kinds.iter().map(|&k| seg(k)).collect::<Vec<_>>();
    assert!(detect_peaking_local(&mk(&[
        Improvement,
        Worsening,
        Improvement
    ])));
    assert!(detect_peaking_local(&mk(&[
        Improvement,
        Insignificant,
        Worsening,
        Insignificant,
        Improvement
    ])));
    assert!(!detect_peaking_local(&mk(&[Worsening, Improvement])));
    assert!(!detect_peaking_local(&mk(&[Improvement, Worsening])));
    assert!(!detect_peaking_local(&[]));
}

#[test]
fn classify_marks_peaking_curves_non_convex() {
    let c = exact_curve(
        vec![16, 18, 20, 23, 27, 32],
        vec![0.5, 0.38, 0.31, 0.45, 0.27, 0.22],
        25,
    );
    let report = classify_curve(&c, false, 0.05).unwrap();
    assert!(report.peaking);
    assert!(!report.convex, "peaking implies a convexity violation");
    assert!(report.ill_behaved());
    assert!(report.to_json()["ill_behaved"].as_bool().unwrap());
}

#[test]
fn noisy_violation_significance_depends_on_magnitude() {
    // A tiny bump within noise must not be significant; a huge one must be.
    let anchors: Vec<u64> = (0..10).map(|k| 16 + 4 * k).collect();
    let k = 25;
    let mut rng = crate::rng::SplitMix64::new(77);
    let noise = 0.05;
    let small: Vec<Vec<f64>> = (0..10)
        .map(|a| {
            (0..k)
                .map(|_| {
                    let base = 0.5 - 0.02 * a as f64 + if a == 5 { 0.005 } else { 0.0 };
                    base + noise * rng.next_gaussian()
                })
                .collect()
        })
        .collect();
    let c = curve_from_rows(anchors.clone(), small);
    if let Some(w) = detect_non_monotone(&c, 0.05).unwrap() {
        assert!(!w.significant, "5x-below-noise bump flagged significant");
    }

    let big: Vec<Vec<f64>> = (0..10)
        .map(|a| {
            (0..k)
                .map(|_| {
                    let base = 0.5 - 0.02 * a as f64 + if a >= 5 { 0.5 } else { 0.0 };
                    base + noise * rng.next_gaussian()
                })
                .collect()
        })
        .collect();
    let c = curve_from_rows(anchors, big);
    let w = detect_non_monotone(&c, 0.05).unwrap().unwrap();
    assert!(w.significant);
}

#[test]
fn conv_error_rejects_mismatched_lengths() {
    assert!(conv_violation_error(&[1, 2], &[0.5, 0.4, 0.3]).is_err());
    assert!(conv_violation_error(&[1, 2], &[0.5, 0.4]).is_err());
}

#[test]
fn dipping_false_positive_rate_stays_below_alpha() {
    // Flat noisy curves: the dipping test corrects by the N - 1 pairs it
    // examines, so the flag rate stays at or below alpha.
    let trials = 4000;
    let mut hits = 0;
    for t in 0..trials {
        let mut rng = crate::rng::SplitMix64::new(91_000 + t);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..25).map(|_| 0.5 + 0.05 * rng.next_gaussian()).collect())
            .collect();
        let anchors: Vec<u64> = (0..20u64).map(|i| 16 + 2 * i).collect();
        let curve = curve_from_rows(anchors, rows);
        if detect_dipping(&curve, 0.05)
            .unwrap()
            .is_some_and(|w| w.significant)
        {
            hits += 1;
        }
    }
    let rate = hits as f64 / trials as f64;
    let bound = 0.05 + 3.0 * (0.05f64 * 0.95 / trials as f64).sqrt();
    assert!(
        rate <= bound,
        "dipping false-positive rate {rate} above {bound}"
    );
}

#[test]
fn fwer_holds_at_other_grid_sizes() {
    // The Bonferroni guarantee is not tied to one (N, K): spot-check a
    // short curve with few repeats.
    let trials = 4000;
    let mut mono_hits = 0;
    for t in 0..trials {
        let mut rng = crate::rng::SplitMix64::new(95_000 + t);
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..8).map(|_| 0.5 + 0.02 * rng.next_gaussian()).collect())
            .collect();
        let anchors: Vec<u64> = (0..10u64).map(|i| 16 + 2 * i).collect();
        let curve = curve_from_rows(anchors, rows);
        if detect_non_monotone(&curve, 0.05)
            .unwrap()
            .is_some_and(|w| w.significant)
        {
            mono_hits += 1;
        }
    }
    let rate = mono_hits as f64 / trials as f64;
    let bound = 0.05 + 3.0 * (0.05f64 * 0.95 / trials as f64).sqrt();
    assert!(
        rate <= bound,
        "mono false-positive rate {rate} above {bound}"
    );
}

#[test]
fn noisy_bump_flags_non_convexity_with_high_probability() {
    // A 10-SE interior bump on a flat baseline, N = 8, K = 25: the
    // corrected convexity test still has near-total power.
    let anchors: Vec<u64> = vec![16, 18, 20, 21, 23, 25, 27, 30];
    let k = 25;
    let sigma = 0.05;
    let bump = 10.0 * sigma / (k as f64).sqrt();
    let trials = 2000;
    let mut hits = 0;
    for t in 0..trials {
        let mut rng = crate::rng::SplitMix64::new(31_000 + t);
        let rows: Vec<Vec<f64>> = (0..anchors.len())
            .map(|a| {
                let mean = 0.3 + if a == 3 { bump } else { 0.0 };
                (0..k).map(|_| mean + sigma * rng.next_gaussian()).collect()
            })
            .collect();
        let curve = curve_from_rows(anchors.clone(), rows);
        if detect_non_convex(&curve, 0.05)
            .unwrap()
            .is_some_and(|w| w.significant)
        {
            hits += 1;
        }
    }
    let power = hits as f64 / trials as f64;
    assert!(power >= 0.99, "non-convexity power {power} below 0.99");
}

#[test]
fn local_monotonicity_false_positive_rate_is_two_alpha() {
    // Flat noisy curves: each segment triggers either direction with
    // probability alpha, so non-insignificant labels appear at rate
    // 2 alpha. Curves are iid, so the empirical standard error over
    // curves bounds the grand mean honestly.
    let alpha = 0.05;
    let n_anchors = 40;
    let k = 25;
    let curves = 10_000;
    let mut fractions = Vec::with_capacity(curves);
    for t in 0..curves {
        let mut rng = crate::rng::SplitMix64::new(77_000 + t as u64);
        let rows: Vec<Vec<f64>> = (0..n_anchors)
            .map(|_| (0..k).map(|_| 0.5 + 0.05 * rng.next_gaussian()).collect())
            .collect();
        let anchors: Vec<u64> = (0..n_anchors as u64).map(|i| 16 + 2 * i).collect();
        let curve = curve_from_rows(anchors, rows);
        let labels = local_monotonicity(&curve, alpha).unwrap();
        let flagged = labels
            .iter()
            .filter(|l| l.label != SegmentKind::Insignificant)
            .count();
        fractions.push(flagged as f64 / labels.len() as f64);
    }
    let mean = fractions.iter().sum::<f64>() / curves as f64;
    let var = fractions
        .iter()
        .map(|f| (f - mean) * (f - mean))
        .sum::<f64>()
        / (curves as f64 - 1.0);
    let se = (var / curves as f64).sqrt();
    assert!(
        (mean - 2.0 * alpha).abs() <= 3.0 * se,
        "non-insignificant rate {mean:.4} vs expected {:.4} (3 SE = {:.4})",
        2.0 * alpha,
        3.0 * se
    );
}

#[test]
fn crossing_identical_curves_all_zero() {
    let curve = exact_curve(vec![16, 18, 20], vec![0.5, 0.4, 0.3], 5);
    let cells: Vec<CrossingCell> = (0..10)
        .map(|i| {
            let mut curves = std::collections::BTreeMap::new();
            for l in ["a", "b"] {
                let mut c = curve.clone();
                c.key.learner = l.to_string();
                curves.insert(l.to_string(), c);
            }
            CrossingCell {
                id: format!("cell{i}"),
                curves,
            }
        })
        .collect();
    let m = crossing_matrix(&cells, 0).unwrap();
    assert_eq!(m.p_start_better[0][1], 0.0);
    assert_eq!(m.p_cross_from_above[0][1], 0.0);
    assert!(m.p_overtaken_given_lead[0][1].is_none());
}

#[test]
fn crossing_dominant_learner() {
    let cells: Vec<CrossingCell> = (0..10)
        .map(|i| {
            let mut curves = std::collections::BTreeMap::new();
            curves.insert("a".into(), exact_curve(vec![16, 18], vec![0.2, 0.1], 3));
            curves.insert("b".into(), exact_curve(vec![16, 18], vec![0.4, 0.3], 3));
            CrossingCell {
                id: format!("cell{i}"),
                curves,
            }
        })
        .collect();
    let m = crossing_matrix(&cells, 0).unwrap();
    assert_eq!(m.p_start_better[0][1], 1.0);
    assert_eq!(m.p_cross_from_above[0][1], 0.0);
    assert_eq!(m.p_overtaken_given_lead[0][1], Some(0.0));
}

#[test]
fn crossing_hand_counted_fixture() {
    // a leads at start in 4 of 5 cells and is overtaken in 2 of those.
    let mk = |start_a: f64, end_a: f64| {
        let mut curves = std::collections::BTreeMap::new();
        curves.insert(
            "a".into(),
            exact_curve(vec![16, 18], vec![start_a, end_a], 3),
        );
        curves.insert("b".into(), exact_curve(vec![16, 18], vec![0.5, 0.5], 3));
        curves
    };
    let cells: Vec<CrossingCell> = [
        mk(0.4, 0.6), // leads, overtaken
        mk(0.4, 0.7), // leads, overtaken
        mk(0.4, 0.4), // leads, keeps lead
        mk(0.4, 0.3), // leads, keeps lead
        mk(0.6, 0.4), // does not lead
    ]
    .into_iter()
    .enumerate()
    .map(|(i, curves)| CrossingCell {
        id: format!("cell{i}"),
        curves,
    })
    .collect();
    let m = crossing_matrix(&cells, 0).unwrap();
    assert!((m.p_start_better[0][1] - 0.8).abs() < 1e-12);
    assert!((m.p_cross_from_above[0][1] - 0.4).abs() < 1e-12);
    assert!((m.p_overtaken_given_lead[0][1].unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn crossing_rejects_incomplete_groups() {
    let mut curves = std::collections::BTreeMap::new();
    curves.insert("a".into(), exact_curve(vec![16, 18], vec![0.2, 0.1], 3));
    let full = CrossingCell {
        id: "c0".into(),
        curves: {
            let mut m = curves.clone();
            m.insert("b".into(), exact_curve(vec![16, 18], vec![0.4, 0.3], 3));
            m
        },
    };
    let partial = CrossingCell {
        id: "c1".into(),
        curves,
    };
    let err = crossing_matrix(&[full, partial], 0).unwrap_err();
    match err {
        Error::IncompleteGroup(msg) => assert!(msg.contains("c1:b"), "{msg}"),
        other => panic!("expected incomplete group, got {other}"),
    }
}

#[test]
fn classify_group_flat_filtering() {
    // One flat curve at mid-level, one spanning curve; same dataset group.
    let flat = exact_curve(vec![16, 18, 20], vec![0.3, 0.3, 0.3], 25);
    let mut spanning = exact_curve(vec![16, 18, 20], vec![0.9, 0.5, 0.1], 25);
    spanning.key.learner = "wide".into();
    let reports = classify_group(&[flat, spanning], 0.05, 0.05, false).unwrap();
    assert!(reports[0].flat);
    assert!(reports[0].monotone && reports[0].convex);
    assert!(!reports[1].flat);
}
