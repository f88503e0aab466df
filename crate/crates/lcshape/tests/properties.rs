//! Property-based invariants over the curve, stats, shape, and selection
//! modules.

use std::collections::BTreeMap;

use lcshape::curves::{
    aggregate, anchor_schedule, read_curves, write_jsonl, AggregatePolicy, CurveSet, FileFormat,
    ObsMatrix, RepeatId,
};
use lcshape::selection::{run_sh, CandidateCurves, ShConfig, TieRule};
use lcshape::shape::{
    conv_violation_error, crossing_matrix, detect_dipping, detect_non_monotone,
    mono_violation_error, CrossingCell,
};
use lcshape::stats::{paired_one_sided_t, t_sf};
use lcshape_testkit as testkit;
use proptest::prelude::*;

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

fn means_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 2..max_len)
}

fn anchors_for(len: usize) -> Vec<u64> {
    anchor_schedule(16, 8, 1_000_000).unwrap().anchors[..len].to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mono_scan_equals_brute_force(means in means_strategy(64)) {
        let (eps, arg) = mono_violation_error(&means).unwrap();
        let (beps, barg) = testkit::mono_violation_brute(&means);
        prop_assert_eq!(eps.to_bits(), beps.to_bits());
        prop_assert_eq!(arg, barg);
    }

    #[test]
    fn conv_matches_independent_oracle(means in means_strategy(24)) {
        prop_assume!(means.len() >= 3);
        let anchors = anchors_for(means.len());
        let (eps, arg) = conv_violation_error(&anchors, &means).unwrap();
        let (oeps, oarg) = testkit::conv_violation_oracle(&anchors, &means);
        prop_assert_eq!(eps.to_bits(), oeps.to_bits());
        prop_assert_eq!(arg, oarg);
    }

    #[test]
    fn conv_error_invariant_under_affine_shift_in_n(
        means in means_strategy(16),
        slope in -0.5f64..0.5,
        intercept in -1.0f64..1.0,
    ) {
        prop_assume!(means.len() >= 3);
        let anchors = anchors_for(means.len());
        let shifted: Vec<f64> = anchors
            .iter()
            .zip(&means)
            .map(|(&n, &m)| m + slope * 1e-3 * n as f64 + intercept)
            .collect();
        let (eps, _) = conv_violation_error(&anchors, &means).unwrap();
        let (eps_shifted, _) = conv_violation_error(&anchors, &shifted).unwrap();
        prop_assert!((eps - eps_shifted).abs() <= 1e-9, "{eps} vs {eps_shifted}");
    }

    #[test]
    fn violation_errors_scale_linearly(
        means in means_strategy(16),
        lambda in 0.01f64..100.0,
    ) {
        let scaled: Vec<f64> = means.iter().map(|m| lambda * m).collect();
        let (eps, arg) = mono_violation_error(&means).unwrap();
        let (seps, sarg) = mono_violation_error(&scaled).unwrap();
        prop_assert!((seps - lambda * eps).abs() <= 1e-9 * lambda.max(1.0));
        prop_assert_eq!(arg, sarg, "argmax moved under scaling");
        if means.len() >= 3 {
            let anchors = anchors_for(means.len());
            let (ce, ca) = conv_violation_error(&anchors, &means).unwrap();
            let (cse, csa) = conv_violation_error(&anchors, &scaled).unwrap();
            prop_assert!((cse - lambda * ce).abs() <= 1e-9 * lambda.max(1.0));
            prop_assert_eq!(ca, csa);
        }
    }

    #[test]
    fn dipping_epsilon_never_exceeds_mono_epsilon(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 3..12),
    ) {
        let anchors = anchors_for(rows.len());
        let curve = testkit::curve_from_rows(testkit::test_key("d", "l"), anchors, rows);
        let dip = detect_dipping(&curve, 0.05).unwrap();
        let mono = detect_non_monotone(&curve, 0.05).unwrap();
        if let Some(d) = &dip {
            // Dipping pairs are a subset of all pairs.
            let m = mono.as_ref().expect("dipping implies a mono violation");
            prop_assert!(m.epsilon >= d.epsilon - 1e-15);
        }
    }

    #[test]
    fn paired_test_antisymmetry(
        later in prop::collection::vec(0.0f64..1.0, 3..30),
        offsets in prop::collection::vec(-0.2f64..0.2, 3..30),
    ) {
        let n = later.len().min(offsets.len());
        let later = &later[..n];
        let earlier: Vec<f64> = later.iter().zip(&offsets[..n]).map(|(l, o)| l + o).collect();
        let fwd = paired_one_sided_t(later, &earlier).unwrap();
        let rev = paired_one_sided_t(&earlier, later).unwrap();
        if fwd.t_stat.is_finite() && fwd.t_stat != 0.0 {
            prop_assert!((fwd.t_stat + rev.t_stat).abs() < 1e-9);
            prop_assert!((fwd.p_value + rev.p_value - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn t_sf_symmetry_over_domain(t in -40.0f64..40.0, df in 1u32..=200) {
        let s = t_sf(t, df) + t_sf(-t, df);
        prop_assert!((s - 1.0).abs() < 1e-12, "df={} t={}: {}", df, t, s);
    }

    #[test]
    fn jsonl_round_trip_preserves_records(
        values in prop::collection::vec(prop::option::of(0.0f64..1.0), 6),
    ) {
        // 3 anchors x 2 repeats with optional missing cells.
        let rows: Vec<Vec<f64>> = values
            .chunks(2)
            .map(|c| c.iter().map(|v| v.unwrap_or(f64::NAN)).collect())
            .collect();
        let set = CurveSet::new(
            testkit::test_key("ds", "ln"),
            vec![16, 18, 20],
            ObsMatrix::from_rows(rows).unwrap(),
            vec![RepeatId { outer: 0, inner: 0 }, RepeatId { outer: 0, inner: 1 }],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_jsonl(std::slice::from_ref(&set), &mut buf).unwrap();
        let reloaded = read_curves(std::io::Cursor::new(&buf), FileFormat::Jsonl, "mem").unwrap();
        prop_assert_eq!(reloaded.len(), 1);
        let r = &reloaded[0];
        prop_assert_eq!(&r.anchors, &set.anchors);
        for i in 0..3 {
            for j in 0..2 {
                let a = set.observations.get(i, j);
                let b = r.observations.get(i, j);
                prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
            }
        }
    }

    #[test]
    fn sh_dominance_soundness(
        base in 0.05f64..0.4,
        gaps in prop::collection::vec(0.01f64..0.1, 4),
        rate_idx in 0usize..4,
        start in 0usize..3,
    ) {
        // Candidate i has risk base + sum(gaps[..i]) at every anchor:
        // candidate 0 dominates.
        let anchors: Vec<u64> = vec![16, 32, 64, 128, 256];
        let mut candidates = BTreeMap::new();
        let mut level = base;
        for (i, gap) in std::iter::once(&0.0).chain(gaps.iter()).enumerate() {
            level += gap;
            let id = format!("cand{i}");
            let means = vec![level; anchors.len()];
            candidates.insert(
                id.clone(),
                CandidateCurves {
                    validation: testkit::mean_curve(
                        testkit::test_key("d", &id),
                        anchors.clone(),
                        means.clone(),
                    ),
                    test: testkit::mean_curve(testkit::test_key("d", &id), anchors.clone(), means),
                },
            );
        }
        let config = ShConfig {
            start_anchor: start,
            budget_rate: [0.125, 0.25, 0.5, 1.0][rate_idx],
            drop_fraction: 0.5,
            tie_rule: TieRule::KeepLexicographic,
        };
        let run = run_sh(&candidates, &config).unwrap();
        prop_assert_eq!(&run.chosen, "cand0");
        prop_assert_eq!(run.regret, 0.0);
        prop_assert_eq!(run.chosen_rank, 1);
        // Fidelity strictly increases across rounds.
        for w in run.rounds.windows(2) {
            prop_assert!(w[1].anchor > w[0].anchor);
        }
    }

    #[test]
    fn crossing_probabilities_well_formed(
        starts in prop::collection::vec(0.0f64..1.0, 8),
        ends in prop::collection::vec(0.0f64..1.0, 8),
    ) {
        // 4 cells x 2 learners from the raw draws.
        let cells: Vec<CrossingCell> = (0..4)
            .map(|c| {
                let mut curves = BTreeMap::new();
                for (l, name) in ["a", "b"].iter().enumerate() {
                    let idx = 2 * c + l;
                    curves.insert(
                        name.to_string(),
                        testkit::mean_curve(
                            testkit::test_key("d", name),
                            vec![16, 32],
                            vec![starts[idx], ends[idx]],
                        ),
                    );
                }
                CrossingCell { id: format!("c{c}"), curves }
            })
            .collect();
        let m = crossing_matrix(&cells, 0).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let ps = m.p_start_better[a][b];
                let pc = m.p_cross_from_above[a][b];
                prop_assert!((0.0..=1.0).contains(&ps));
                prop_assert!((0.0..=1.0).contains(&pc));
                prop_assert!(pc <= ps + 1e-15, "crossing requires an initial lead");
                if let Some(cond) = m.p_overtaken_given_lead[a][b] {
                    prop_assert!((0.0..=1.0).contains(&cond));
                }
            }
        }
    }

    #[test]
    fn aggregate_means_match_definition(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 5), 2..8),
    ) {
        let anchors = anchors_for(rows.len());
        let set = CurveSet::new(
            testkit::test_key("d", "l"),
            anchors,
            ObsMatrix::from_rows(rows.clone()).unwrap(),
            (0..5).map(|i| RepeatId { outer: 0, inner: i }).collect(),
        )
        .unwrap();
        let curve = aggregate(&set, AggregatePolicy::CompleteCase).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let naive: f64 = row.iter().sum::<f64>() / row.len() as f64;
            prop_assert!((curve.means[i] - naive).abs() <= 1e-12 * naive.abs().max(1.0));
        }
    }
}

// Deterministic (non-proptest) invariants that need specific structure.

#[test]
fn dense_schedule_contains_coarse_subgrid_up_to_one_million() {
    let dense = anchor_schedule(16, 8, 1_000_000).unwrap();
    let coarse = anchor_schedule(16, 2, 1_000_000).unwrap();
    let every_4th: Vec<u64> = dense.anchors.iter().step_by(4).copied().collect();
    assert_eq!(every_4th, coarse.anchors);
}

#[test]
fn t_sf_approaches_normal_tail_at_large_df() {
    for i in 0..=20 {
        let t = -5.0 + 0.5 * i as f64;
        let tail = t_sf(t, 1_000_000);
        let normal = testkit::normal_sf(t);
        assert!(
            (tail - normal).abs() < 1e-6,
            "t={t}: t tail {tail} vs normal {normal}"
        );
    }
}

#[test]
fn paired_test_null_rejection_rate_is_calibrated() {
    // Under H0 the paired t-test is exact: over 1e5 simulated tests the
    // rejection rate at alpha must sit within 3 binomial SEs.
    let alpha = 0.05;
    let trials = 100_000;
    let n_pairs = 10;
    let mut rng = lcshape::rng::SplitMix64::new(2024);
    let mut rejections = 0;
    for _ in 0..trials {
        let a: Vec<f64> = (0..n_pairs).map(|_| rng.next_gaussian()).collect();
        let b: Vec<f64> = (0..n_pairs).map(|_| rng.next_gaussian()).collect();
        if paired_one_sided_t(&a, &b).unwrap().p_value < alpha {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / trials as f64;
    let se = (alpha * (1.0 - alpha) / trials as f64).sqrt();
    assert!(
        (rate - alpha).abs() <= 3.0 * se,
        "rejection rate {rate} outside {alpha} +/- {}",
        3.0 * se
    );
}
