//! Synthetic learning-curve generators.
//!
//! Fixtures for every detector and the SH study: flat curves, power-law
//! decays, peaks, dips, phase transitions, and engineered crossing pairs.
//! Observations are the shape mean plus iid Gaussian noise; each cell's
//! noise is keyed by `(seed, anchor, repeat)` so generation is
//! deterministic and independent of evaluation order.
//!
//! Bump and step magnitudes are given in standard-error units
//! (`noise_sd / sqrt(k_repeats)`), which makes detector power statements
//! independent of the noise level. Noiseless fixtures fall back to
//! absolute units of 0.01 so the shapes keep their defining geometry.

use serde::{Deserialize, Serialize};

use crate::curves::{
    AnchorSchedule, CurveKey, CurveSet, Metric, ObsMatrix, RepeatId, Scaling, Split,
};
use crate::error::{Error, Result};
use crate::fitting::{eval_unchecked, ModelFamily};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthShape {
    Flat,
    PowDecay,
    Peak,
    Dip,
    PhaseTransition,
    CrossingPair,
}

/// Recipe for one synthetic curve (or pair, for `CrossingPair`).
///
/// `base_params` is shape-specific; missing entries take the documented
/// defaults:
///
/// - `flat`: `[level]`, default `[0.5]`
/// - `pow_decay`: POW4 `[a, b, c, d]`, default `[0.1, -0.4, 0.5, 0.0]`
/// - `peak`: `[a, b, c, d, height_se, center_frac, width]`, default bump of
///   6 standard errors at the middle anchor, width 1.5 index units
/// - `dip`: `[a, b, c, d, height_se, center_frac, width]`, step up that
///   persists to the last anchor
/// - `phase_transition`: `[hi, lo, center_frac, width]`, monotone drop
/// - `crossing_pair`: two POW4 parameter sets `[aA..dA, aB..dB]` whose
///   defaults cross exactly once inside the anchor range
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub shape: SynthShape,
    #[serde(default)]
    pub base_params: Vec<f64>,
    pub noise_sd: f64,
    pub k_repeats: u32,
    pub seed: u64,
    pub anchors: AnchorSchedule,
    pub dataset: String,
    pub learner: String,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    #[serde(default = "default_split")]
    pub split: Split,
    #[serde(default = "default_scaling")]
    pub scaling: Scaling,
}

fn default_metric() -> Metric {
    Metric::ErrorRate
}
fn default_split() -> Split {
    Split::Validation
}
fn default_scaling() -> Scaling {
    Scaling::None
}

/// Magnitude of one standard-error unit for this spec.
pub fn se_unit(spec: &SynthSpec) -> f64 {
    if spec.noise_sd > 0.0 {
        spec.noise_sd / (spec.k_repeats as f64).sqrt()
    } else {
        0.01
    }
}

fn param(spec: &SynthSpec, idx: usize, default: f64) -> f64 {
    spec.base_params.get(idx).copied().unwrap_or(default)
}

/// Noise-free mean structure, one vector per generated curve.
pub fn mean_structure(spec: &SynthSpec) -> Result<Vec<Vec<f64>>> {
    let anchors = &spec.anchors.anchors;
    let n = anchors.len();
    if n == 0 {
        return Err(Error::InvalidSpec("anchor schedule is empty".into()));
    }
    let se = se_unit(spec);
    let pow4 = |p: [f64; 4]| -> Vec<f64> {
        anchors
            .iter()
            .map(|&a| eval_unchecked(ModelFamily::Pow4, &p, a as f64))
            .collect()
    };
    let decay_defaults = [
        param(spec, 0, 0.1),
        param(spec, 1, -0.4),
        param(spec, 2, 0.5),
        param(spec, 3, 0.0),
    ];

    let means = match spec.shape {
        SynthShape::Flat => vec![vec![param(spec, 0, 0.5); n]],
        SynthShape::PowDecay => vec![pow4(decay_defaults)],
        SynthShape::Peak => {
            let height = param(spec, 4, 6.0) * se;
            let center = param(spec, 5, 0.5) * (n - 1) as f64;
            let width = param(spec, 6, 1.5).max(1e-9);
            let mut m = pow4(decay_defaults);
            for (i, v) in m.iter_mut().enumerate() {
                let d = (i as f64 - center) / width;
                *v += height * (-0.5 * d * d).exp();
            }
            vec![m]
        }
        SynthShape::Dip => {
            let height = param(spec, 4, 6.0) * se;
            let center = param(spec, 5, 0.5) * (n - 1) as f64;
            let width = param(spec, 6, 1.5).max(1e-9);
            let mut m = pow4(decay_defaults);
            for (i, v) in m.iter_mut().enumerate() {
                // Smoothed step that persists to the final anchor.
                let d = (i as f64 - center) / width;
                *v += height / (1.0 + (-d).exp());
            }
            vec![m]
        }
        SynthShape::PhaseTransition => {
            let hi = param(spec, 0, 0.5);
            let lo = param(spec, 1, 0.2);
            if lo >= hi {
                return Err(Error::InvalidSpec(format!(
                    "phase transition needs lo < hi, got {lo} >= {hi}"
                )));
            }
            let center = param(spec, 2, 0.5) * (n - 1) as f64;
            let width = param(spec, 3, 0.4).max(1e-9);
            let m = (0..n)
                .map(|i| {
                    let d = (i as f64 - center) / width;
                    // Monotone decreasing sigmoid from hi down to lo.
                    lo + (hi - lo) / (1.0 + d.exp())
                })
                .collect();
            vec![m]
        }
        SynthShape::CrossingPair => {
            let a = [
                param(spec, 0, 0.25),
                param(spec, 1, -0.9),
                param(spec, 2, 1.2),
                param(spec, 3, 0.0),
            ];
            let b = [
                param(spec, 4, 0.05),
                param(spec, 5, -1.6),
                param(spec, 6, 0.55),
                param(spec, 7, 0.0),
            ];
            vec![pow4(a), pow4(b)]
        }
    };
    Ok(means)
}

/// Generates the spec's curve sets with keyed Gaussian noise.
///
/// Every shape yields one `CurveSet`; `CrossingPair` yields two, with
/// `-a` / `-b` appended to the learner id. Repeats map onto seed pairs as
/// five inner seeds per outer seed.
pub fn generate(spec: &SynthSpec) -> Result<Vec<CurveSet>> {
    if spec.k_repeats == 0 {
        return Err(Error::InvalidSpec("k_repeats must be positive".into()));
    }
    if spec.noise_sd < 0.0 {
        return Err(Error::InvalidSpec("noise_sd must be non-negative".into()));
    }
    if spec.dataset.is_empty() || spec.learner.is_empty() {
        return Err(Error::InvalidSpec(
            "dataset and learner must be non-empty".into(),
        ));
    }
    let structures = mean_structure(spec)?;
    let k = spec.k_repeats as usize;
    let repeat_ids: Vec<RepeatId> = (0..spec.k_repeats)
        .map(|r| RepeatId {
            outer: r / 5,
            inner: r % 5,
        })
        .collect();

    let mut sets = Vec::with_capacity(structures.len());
    for (ci, means) in structures.iter().enumerate() {
        let learner = if structures.len() == 1 {
            spec.learner.clone()
        } else {
            format!("{}-{}", spec.learner, (b'a' + ci as u8) as char)
        };
        let key = CurveKey::new(
            spec.dataset.clone(),
            learner,
            spec.metric,
            spec.split,
            spec.scaling,
        )?;
        let mut matrix = ObsMatrix::filled(means.len(), k, 0.0);
        for (ai, &mean) in means.iter().enumerate() {
            for r in 0..k {
                let noise = if spec.noise_sd > 0.0 {
                    let cell = (ci * means.len() + ai) as u64;
                    spec.noise_sd * SplitMix64::keyed(spec.seed, cell, r as u64).next_gaussian()
                } else {
                    0.0
                };
                matrix.set(ai, r, mean + noise);
            }
        }
        sets.push(CurveSet::new(
            key,
            spec.anchors.anchors.clone(),
            matrix,
            repeat_ids.clone(),
        )?);
    }
    Ok(sets)
}
