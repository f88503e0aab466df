//! Curve shape classification: monotonicity and convexity violation errors,
//! significance procedures with Bonferroni correction, peaking and dipping
//! detection, and local-monotonicity segmentation.
//!
//! The detectors are deliberately pessimistic: a curve is only called
//! ill-behaved when its violation survives a paired one-sided t-test at the
//! corrected level, otherwise it is assumed well-behaved. Lower metric
//! values are better throughout.

mod crossing;

pub use crossing::{crossing_matrix, CrossingCell, CrossingMatrix};

use serde::Serialize;

use crate::curves::{CurveKey, EmpiricalCurve};
use crate::error::{Error, Result};
use crate::stats::{bonferroni_pairs, bonferroni_triples, paired_one_sided_t};

/// Violation sizes at or below this fraction of the curve scale are float
/// dust from exactly-sampled shapes, not violations.
const EPSILON_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Monotonicity,
    Convexity,
    Dipping,
}

/// A located violation together with its significance test outcome.
/// Anchor indices are 0-based positions into the curve.
#[derive(Debug, Clone, Serialize)]
pub struct ViolationWitness {
    pub kind: ViolationKind,
    pub indices: Vec<usize>,
    /// Violation size in metric units.
    pub epsilon: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Largest risk increase between any anchor pair.
///
/// Runs the O(N) prefix-minimum scan; ties resolve to the smallest `i`,
/// then the smallest `j`, matching a lexicographic brute-force sweep.
/// Returns the maximizing 0-based pair when the error is positive.
///
/// ```
/// let (eps, pair) = lcshape::shape::mono_violation_error(&[0.5, 0.3, 0.4, 0.2]).unwrap();
/// assert!((eps - 0.1).abs() < 1e-12);
/// assert_eq!(pair, Some((1, 2)));
/// ```
#[allow(clippy::needless_range_loop)]
pub fn mono_violation_error(means: &[f64]) -> Result<(f64, Option<(usize, usize)>)> {
    let n = means.len();
    if n < 2 {
        return Err(Error::TooShortCurve { need: 2, got: n });
    }
    if means.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidArgument("means must be finite".into()));
    }

    let mut best = 0.0f64;
    let mut best_pair = None;
    let mut min_val = means[0];
    let mut min_idx = 0usize;
    for j in 1..n {
        let gap = means[j] - min_val;
        if gap > best {
            best = gap;
            best_pair = Some((min_idx, j));
        }
        // Strict `<` keeps the first index among tied minima.
        if means[j] < min_val {
            min_val = means[j];
            min_idx = j;
        }
    }
    Ok((best.max(0.0), best_pair))
}

/// Linear interpolation in raw training-set size between `(n_h, c_h)` and
/// `(n_j, c_j)`, evaluated at `n_i`. The anchors are log-spaced, so
/// interpolating in the anchor index instead would misplace the chord.
pub fn linear_interpolate(n_h: u64, n_j: u64, c_h: f64, c_j: f64, n_i: u64) -> Result<f64> {
    if !(n_h < n_i && n_i < n_j) {
        return Err(Error::AnchorOrder(format!(
            "need n_h < n_i < n_j, got {n_h}, {n_i}, {n_j}"
        )));
    }
    Ok(interpolate_unchecked(
        n_h as f64, n_j as f64, c_h, c_j, n_i as f64,
    ))
}

#[inline]
fn interpolate_unchecked(n_h: f64, n_j: f64, c_h: f64, c_j: f64, n_i: f64) -> f64 {
    ((n_j - n_i) * c_h + (n_i - n_h) * c_j) / (n_j - n_h)
}

/// Largest excess of the curve above its chord over any anchor triple,
/// by exhaustive search. Ties resolve lexicographically in `(h, i, j)`.
#[allow(clippy::type_complexity)]
pub fn conv_violation_error(
    anchors: &[u64],
    means: &[f64],
) -> Result<(f64, Option<(usize, usize, usize)>)> {
    let n = means.len();
    if n < 3 {
        return Err(Error::TooShortCurve { need: 3, got: n });
    }
    if anchors.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} anchors for {} means",
            anchors.len(),
            n
        )));
    }

    let ns: Vec<f64> = anchors.iter().map(|&a| a as f64).collect();
    let mut best = 0.0f64;
    let mut best_triple = None;
    for h in 0..n - 2 {
        for i in h + 1..n - 1 {
            for j in i + 1..n {
                let interp = interpolate_unchecked(ns[h], ns[j], means[h], means[j], ns[i]);
                let gap = means[i] - interp;
                if gap > best {
                    best = gap;
                    best_triple = Some((h, i, j));
                }
            }
        }
    }
    Ok((best.max(0.0), best_triple))
}

fn curve_scale(means: &[f64]) -> f64 {
    means.iter().fold(1.0f64, |acc, m| acc.max(m.abs()))
}

fn complete_case_matrix(curve: &EmpiricalCurve) -> Result<&crate::curves::ObsMatrix> {
    let m = curve
        .repeat_matrix
        .as_ref()
        .ok_or(Error::PairingUnavailable)?;
    if m.cols() < 2 {
        return Err(Error::TooFewPairs(m.cols()));
    }
    Ok(m)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    Ok(())
}

/// Tests the curve for a significant monotonicity violation.
///
/// Returns `None` when the violation error is zero (the curve is monotone);
/// otherwise returns the witness at the maximizing pair, with `significant`
/// set iff its paired one-sided p-value clears the pairwise Bonferroni
/// level.
pub fn detect_non_monotone(curve: &EmpiricalCurve, alpha: f64) -> Result<Option<ViolationWitness>> {
    check_alpha(alpha)?;
    let matrix = complete_case_matrix(curve)?;
    let (epsilon, pair) = mono_violation_error(&curve.means)?;
    let (i, j) = match pair {
        Some(p) if epsilon > EPSILON_TOLERANCE * curve_scale(&curve.means) => p,
        _ => return Ok(None),
    };
    let test = paired_one_sided_t(matrix.row(j), matrix.row(i))?;
    let level = bonferroni_pairs(alpha, curve.len() as u32)?;
    Ok(Some(ViolationWitness {
        kind: ViolationKind::Monotonicity,
        indices: vec![i, j],
        epsilon,
        p_value: test.p_value,
        significant: test.p_value < level,
    }))
}

/// Tests the curve for a significant convexity violation.
///
/// The comparison distribution interpolates each repeat's own curve
/// between the maximizing outer anchors, so the paired test sees matched
/// seed pairs on both sides.
pub fn detect_non_convex(curve: &EmpiricalCurve, alpha: f64) -> Result<Option<ViolationWitness>> {
    check_alpha(alpha)?;
    let matrix = complete_case_matrix(curve)?;
    let (epsilon, triple) = conv_violation_error(&curve.anchors, &curve.means)?;
    let (h, i, j) = match triple {
        Some(t) if epsilon > EPSILON_TOLERANCE * curve_scale(&curve.means) => t,
        _ => return Ok(None),
    };
    let interpolated = per_repeat_interpolation(curve, matrix, h, i, j);
    let test = paired_one_sided_t(matrix.row(i), &interpolated)?;
    let level = bonferroni_triples(alpha, curve.len() as u32)?;
    Ok(Some(ViolationWitness {
        kind: ViolationKind::Convexity,
        indices: vec![h, i, j],
        epsilon,
        p_value: test.p_value,
        significant: test.p_value < level,
    }))
}

fn per_repeat_interpolation(
    curve: &EmpiricalCurve,
    matrix: &crate::curves::ObsMatrix,
    h: usize,
    i: usize,
    j: usize,
) -> Vec<f64> {
    let (nh, ni, nj) = (
        curve.anchors[h] as f64,
        curve.anchors[i] as f64,
        curve.anchors[j] as f64,
    );
    (0..matrix.cols())
        .map(|r| interpolate_unchecked(nh, nj, matrix.get(h, r), matrix.get(j, r), ni))
        .collect()
}

/// Dipping: a monotonicity violation that persists to the final anchor.
///
/// Only pairs `(i, N)` are examined, so the Bonferroni correction divides
/// by the `N - 1` hypotheses actually tested.
pub fn detect_dipping(curve: &EmpiricalCurve, alpha: f64) -> Result<Option<ViolationWitness>> {
    check_alpha(alpha)?;
    let matrix = complete_case_matrix(curve)?;
    let n = curve.len();
    if n < 2 {
        return Err(Error::TooShortCurve { need: 2, got: n });
    }
    let last = n - 1;
    let mut epsilon = 0.0f64;
    let mut arg = None;
    for i in 0..last {
        let gap = curve.means[last] - curve.means[i];
        if gap > epsilon {
            epsilon = gap;
            arg = Some(i);
        }
    }
    let i = match arg {
        Some(i) if epsilon > EPSILON_TOLERANCE * curve_scale(&curve.means) => i,
        _ => return Ok(None),
    };
    let test = paired_one_sided_t(matrix.row(last), matrix.row(i))?;
    let level = alpha / (n as f64 - 1.0);
    Ok(Some(ViolationWitness {
        kind: ViolationKind::Dipping,
        indices: vec![i, last],
        epsilon,
        p_value: test.p_value,
        significant: test.p_value < level,
    }))
}

/// Evidence for a peak: the convexity-violation triple plus the p-values of
/// its three constituent tests.
#[derive(Debug, Clone, Serialize)]
pub struct PeakingEvidence {
    pub triple: (usize, usize, usize),
    /// Curve above its chord at the triple.
    pub p_convexity: f64,
    /// Risk rises from `h*` to `i*`.
    pub p_rise: f64,
    /// Risk recovers (drops) from `i*` to `j*`.
    pub p_recovery: f64,
}

/// Peaking is a significant convexity violation whose middle anchor both
/// rose significantly from the left anchor and recovered significantly
/// toward the right anchor. Returns evidence only when all three
/// conditions hold.
pub fn detect_peaking(curve: &EmpiricalCurve, alpha: f64) -> Result<Option<PeakingEvidence>> {
    check_alpha(alpha)?;
    let matrix = complete_case_matrix(curve)?;
    let conv = match detect_non_convex(curve, alpha)? {
        Some(w) if w.significant => w,
        _ => return Ok(None),
    };
    let (h, i, j) = (conv.indices[0], conv.indices[1], conv.indices[2]);
    let pair_level = bonferroni_pairs(alpha, curve.len() as u32)?;

    let rise = paired_one_sided_t(matrix.row(i), matrix.row(h))?;
    if rise.p_value >= pair_level {
        return Ok(None);
    }
    let recovery = paired_one_sided_t(matrix.row(i), matrix.row(j))?;
    if recovery.p_value >= pair_level {
        return Ok(None);
    }
    Ok(Some(PeakingEvidence {
        triple: (h, i, j),
        p_convexity: conv.p_value,
        p_rise: rise.p_value,
        p_recovery: recovery.p_value,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Improvement,
    Worsening,
    Insignificant,
}

/// Classification of one consecutive-anchor segment.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentLabel {
    pub from_anchor: usize,
    pub to_anchor: usize,
    pub label: SegmentKind,
    pub p_improve: f64,
    pub p_worsen: f64,
}

/// Labels each consecutive segment as improvement, worsening, or
/// insignificant at the uncorrected level `alpha`.
pub fn local_monotonicity(curve: &EmpiricalCurve, alpha: f64) -> Result<Vec<SegmentLabel>> {
    check_alpha(alpha)?;
    let matrix = complete_case_matrix(curve)?;
    let n = curve.len();
    if n < 2 {
        return Err(Error::TooShortCurve { need: 2, got: n });
    }
    let mut labels = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let worsen = paired_one_sided_t(matrix.row(k + 1), matrix.row(k))?;
        let improve = paired_one_sided_t(matrix.row(k), matrix.row(k + 1))?;
        let label = if worsen.p_value < alpha {
            SegmentKind::Worsening
        } else if improve.p_value < alpha {
            SegmentKind::Improvement
        } else {
            SegmentKind::Insignificant
        };
        labels.push(SegmentLabel {
            from_anchor: k,
            to_anchor: k + 1,
            label,
            p_improve: improve.p_value,
            p_worsen: worsen.p_value,
        });
    }
    Ok(labels)
}

/// Alternative peak detector over segment labels: an improvement followed
/// by a worsening followed by another improvement, with insignificant
/// segments allowed in between.
pub fn detect_peaking_local(labels: &[SegmentLabel]) -> bool {
    // Phases: seen improvement -> seen worsening -> trailing improvement.
    let mut phase = 0u8;
    for l in labels {
        match (phase, l.label) {
            (0, SegmentKind::Improvement) => phase = 1,
            (1, SegmentKind::Worsening) => phase = 2,
            (2, SegmentKind::Improvement) => return true,
            _ => {}
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Per-curve report
// ---------------------------------------------------------------------------

/// Full shape classification of one curve.
#[derive(Debug, Clone, Serialize)]
pub struct ShapeReport {
    pub key: CurveKey,
    pub flat: bool,
    pub monotone: bool,
    pub convex: bool,
    pub peaking: bool,
    pub dipping: bool,
    pub witnesses: Vec<ViolationWitness>,
    pub peaking_detail: Option<PeakingEvidence>,
    pub alpha: f64,
    pub n_anchors: usize,
    pub dropped_anchors: usize,
}

impl ShapeReport {
    /// Non-monotone or non-convex.
    pub fn ill_behaved(&self) -> bool {
        !self.monotone || !self.convex
    }

    /// A report for a curve excluded from violation analysis (flat filter):
    /// assumed well-behaved, no tests run.
    pub fn flat_placeholder(curve: &EmpiricalCurve, alpha: f64) -> Self {
        Self {
            key: curve.key.clone(),
            flat: true,
            monotone: true,
            convex: true,
            peaking: false,
            dipping: false,
            witnesses: Vec::new(),
            peaking_detail: None,
            alpha,
            n_anchors: curve.len(),
            dropped_anchors: curve.dropped_anchors.len(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["ill_behaved"] = serde_json::json!(self.ill_behaved());
        v
    }
}

/// Runs every detector on one curve. `flat` is decided by the caller
/// because it needs the comparison group.
pub fn classify_curve(curve: &EmpiricalCurve, flat: bool, alpha: f64) -> Result<ShapeReport> {
    check_alpha(alpha)?;
    let n = curve.len();

    let mut witnesses = Vec::new();
    let mut monotone = true;
    let mut convex = true;
    let mut dipping = false;
    let mut peaking = false;
    let mut peaking_detail = None;

    if n >= 2 {
        if let Some(w) = detect_non_monotone(curve, alpha)? {
            monotone = !w.significant;
            witnesses.push(w);
        }
        if let Some(w) = detect_dipping(curve, alpha)? {
            dipping = w.significant;
            witnesses.push(w);
        }
    }
    if n >= 3 {
        if let Some(w) = detect_non_convex(curve, alpha)? {
            convex = !w.significant;
            witnesses.push(w);
        }
        if let Some(evidence) = detect_peaking(curve, alpha)? {
            peaking = true;
            peaking_detail = Some(evidence);
        }
    }

    Ok(ShapeReport {
        key: curve.key.clone(),
        flat,
        monotone,
        convex,
        peaking,
        dipping,
        witnesses,
        peaking_detail,
        alpha,
        n_anchors: n,
        dropped_anchors: curve.dropped_anchors.len(),
    })
}

/// Classifies a batch of curves, computing flat flags within groups that
/// share (dataset, metric, split, scaling). Flat curves are excluded from
/// violation testing unless `analyze_flat` is set.
pub fn classify_group(
    curves: &[EmpiricalCurve],
    alpha: f64,
    flat_threshold: f64,
    analyze_flat: bool,
) -> Result<Vec<ShapeReport>> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<_, Vec<&EmpiricalCurve>> = BTreeMap::new();
    for c in curves {
        groups.entry(c.key.group_id()).or_default().push(c);
    }
    let mut reports = Vec::with_capacity(curves.len());
    for c in curves {
        let group = &groups[&c.key.group_id()];
        let flat = crate::curves::is_flat(c, group, flat_threshold)?;
        if flat && !analyze_flat {
            reports.push(ShapeReport::flat_placeholder(c, alpha));
        } else {
            reports.push(classify_curve(c, flat, alpha)?);
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests;
