//! Shared fixtures for the acceptance suite.

#![allow(dead_code)]

use std::collections::BTreeMap;

use lcshape::curves::{anchor_schedule, AnchorSchedule, Metric, Scaling, Split};
use lcshape::fitting::ModelFamily;
use lcshape::rng::SplitMix64;
use lcshape::selection::{CandidateCurves, PanelCell};
use lcshape::synth::{SynthShape, SynthSpec};
use lcshape_testkit as testkit;

pub fn synth_spec(
    shape: SynthShape,
    base_params: Vec<f64>,
    noise_sd: f64,
    k_repeats: u32,
    seed: u64,
    max_size: u64,
) -> SynthSpec {
    SynthSpec {
        shape,
        base_params,
        noise_sd,
        k_repeats,
        seed,
        anchors: anchor_schedule(16, 8, max_size).unwrap(),
        dataset: "fixture".into(),
        learner: "gen".into(),
        metric: Metric::ErrorRate,
        split: Split::Validation,
        scaling: Scaling::None,
    }
}

/// Parameter draws for the exact-recovery runs: ranges that produce
/// learning-curve-like shapes over anchors 16..=470.
pub fn draw_params(family: ModelFamily, rng: &mut SplitMix64) -> [f64; 4] {
    let sign = if rng.next_u64().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    match family {
        ModelFamily::Pow4 => [
            rng.uniform(0.0, 1.0),
            sign * rng.uniform(0.1, 1.0),
            rng.uniform(0.2, 2.0),
            rng.uniform(0.0, 5.0),
        ],
        ModelFamily::Mmf4 => {
            let d = rng.uniform(0.3, 2.0);
            let pivot = rng.log_uniform(16.0, 470.0);
            [
                rng.uniform(0.0, 1.0),
                pivot.powf(d),
                rng.uniform(0.0, 1.0),
                d,
            ]
        }
        ModelFamily::Wbl4 => {
            let d = rng.uniform(0.3, 2.0);
            let pivot = rng.log_uniform(16.0, 470.0);
            [
                pivot.powf(-d),
                sign * rng.uniform(0.1, 1.0),
                rng.uniform(0.0, 1.0),
                d,
            ]
        }
    }
}

/// Draws for the Jacobian finite-difference check. The FD step is pinned
/// at `1e-6 * max(1, |param|)`, so parameters whose scale falls far below
/// 1 (tiny WBL4 rate constants) would make the central difference itself
/// inaccurate; these ranges keep the step well-conditioned while still
/// covering curve-like shapes.
pub fn draw_jacobian_point(family: ModelFamily, rng: &mut SplitMix64) -> ([f64; 4], f64) {
    let n = rng.log_uniform(4.0, 2000.0);
    let params = match family {
        ModelFamily::Pow4 => [
            rng.uniform(-1.0, 1.0),
            rng.uniform(-2.0, 2.0),
            rng.uniform(0.1, 3.0),
            rng.uniform(0.0, 5.0),
        ],
        ModelFamily::Mmf4 => [
            rng.uniform(-1.0, 1.0),
            rng.log_uniform(1.0, 1e3),
            rng.uniform(-1.0, 1.0),
            rng.uniform(0.1, 2.0),
        ],
        ModelFamily::Wbl4 => [
            rng.log_uniform(1e-3, 0.5),
            rng.uniform(-2.0, 2.0),
            rng.uniform(-1.0, 1.0),
            rng.uniform(0.1, 2.0),
        ],
    };
    (params, n)
}

fn panel_schedule() -> AnchorSchedule {
    anchor_schedule(16, 8, 512).unwrap()
}

fn pow4(a: f64, b: f64, c: f64, n: f64) -> f64 {
    a - b * n.powf(-c)
}

/// Mean curves plus small seeded per-cell noise; margins in the fixtures
/// dwarf the noise, so orderings at decision anchors are stable.
fn noisy_candidate(
    learner: &str,
    schedule: &AnchorSchedule,
    mean_of: impl Fn(f64) -> f64,
    rng: &mut SplitMix64,
) -> CandidateCurves {
    let noise = 0.002;
    let mut curve = |split: Split| {
        let means: Vec<f64> = schedule
            .anchors
            .iter()
            .map(|&n| mean_of(n as f64) + noise * rng.next_gaussian())
            .collect();
        let mut key = testkit::test_key("panel", learner);
        key.split = split;
        testkit::mean_curve(key, schedule.anchors.clone(), means)
    };
    CandidateCurves {
        validation: curve(Split::Validation),
        test: curve(Split::Test),
    }
}

/// Five candidates, the first uniformly best on validation and test.
pub fn dominance_cell(dataset: &str, seed: u64) -> PanelCell {
    let schedule = panel_schedule();
    let mut rng = SplitMix64::new(40_000 + seed);
    let mut candidates = BTreeMap::new();
    for i in 0..5u32 {
        let offset = 0.1 + 0.08 * i as f64;
        candidates.insert(
            format!("l{i}"),
            noisy_candidate(
                &format!("l{i}"),
                &schedule,
                |n| pow4(offset, -0.4, 0.5, n),
                &mut rng,
            ),
        );
    }
    PanelCell {
        dataset: dataset.to_string(),
        fold: 0,
        candidates,
    }
}

/// Five well-separated non-crossing curves: SH can never go wrong.
pub fn low_crossing_cell(dataset: &str, seed: u64) -> PanelCell {
    let schedule = panel_schedule();
    let mut rng = SplitMix64::new(50_000 + seed);
    let mut candidates = BTreeMap::new();
    for i in 0..5u32 {
        let asymptote = 0.10 + 0.05 * i as f64;
        candidates.insert(
            format!("l{i}"),
            noisy_candidate(
                &format!("l{i}"),
                &schedule,
                |n| pow4(asymptote, -0.5, 0.5, n),
                &mut rng,
            ),
        );
    }
    PanelCell {
        dataset: dataset.to_string(),
        fold: 0,
        candidates,
    }
}

/// Three early birds that dominate every anchor SH can reach before the
/// field narrows, and two late bloomers with the best final risks. The
/// curves cross around n = 200, so early elimination is always wrong.
pub fn high_crossing_cell(dataset: &str, seed: u64) -> PanelCell {
    let schedule = panel_schedule();
    let mut rng = SplitMix64::new(60_000 + seed);
    let mut candidates = BTreeMap::new();
    for (i, asymptote) in [0.20, 0.22, 0.24].iter().enumerate() {
        candidates.insert(
            format!("early{i}"),
            noisy_candidate(
                &format!("early{i}"),
                &schedule,
                |n| pow4(*asymptote, -0.6, 1.2, n),
                &mut rng,
            ),
        );
    }
    for (i, asymptote) in [0.05, 0.08].iter().enumerate() {
        candidates.insert(
            format!("late{i}"),
            noisy_candidate(
                &format!("late{i}"),
                &schedule,
                |n| pow4(*asymptote, -3.0, 0.55, n),
                &mut rng,
            ),
        );
    }
    PanelCell {
        dataset: dataset.to_string(),
        fold: 0,
        candidates,
    }
}

/// JSON spec array for the CLI determinism run: `n` decaying learners on
/// one dataset, both splits, plus two flat baselines.
pub fn cli_spec_json(n: usize, seed: u64) -> String {
    let mut specs = Vec::new();
    for i in 0..n {
        for (split, seed_off) in [("validation", 0u64), ("test", 10_000)] {
            specs.push(serde_json::json!({
                "shape": "pow_decay",
                "base_params": [0.08 + 0.02 * i as f64, -0.5, 0.5, 0.0],
                "noise_sd": 0.01,
                "k_repeats": 25,
                "seed": seed + seed_off + i as u64,
                "anchors": {"base": 16, "density": 8, "max_size": 128},
                "dataset": "cli",
                "learner": format!("learner-{i:02}"),
                "metric": "error_rate",
                "split": split,
                "scaling": "none",
            }));
        }
    }
    for (split, seed_off) in [("validation", 0u64), ("test", 10_000)] {
        for lvl in 0..2 {
            specs.push(serde_json::json!({
                "shape": "flat",
                "base_params": [0.45 + 0.3 * lvl as f64],
                "noise_sd": 0.005,
                "k_repeats": 25,
                "seed": seed + seed_off + 900 + lvl,
                "anchors": {"base": 16, "density": 8, "max_size": 128},
                "dataset": "cli",
                "learner": format!("flat-{lvl}"),
                "metric": "error_rate",
                "split": split,
                "scaling": "none",
            }));
        }
    }
    serde_json::to_string_pretty(&specs).unwrap()
}
