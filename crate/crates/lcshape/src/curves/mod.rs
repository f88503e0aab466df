//! Learning-curve data model: anchor schedules, raw observation sets, and
//! aggregation of repeats into empirical mean curves.
//!
//! All types are immutable after construction and every operation is a pure
//! function, so curves can be processed in parallel without shared state.

mod io;

pub use io::{load_curves, read_curves, write_aggregated_csv, write_jsonl, FileFormat};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::compensated_sum;

// ---------------------------------------------------------------------------
// Key enums
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ErrorRate,
    LogLoss,
    Auc,
    F1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Validation,
    Test,
}

/// Feature-scaling variant of the producing pipeline. Metadata only: it
/// never changes how a curve is analyzed, but it partitions flat-filter
/// groups and report keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    None,
    Minmax,
    Standard,
}

macro_rules! string_enum {
    ($ty:ty { $($variant:path => $name:literal),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"), other
                    )),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self {
                    $($variant => $name,)+
                };
                f.write_str(name)
            }
        }
    };
}

string_enum!(Metric {
    Metric::ErrorRate => "error_rate",
    Metric::LogLoss => "log_loss",
    Metric::Auc => "auc",
    Metric::F1 => "f1",
});

string_enum!(Split {
    Split::Validation => "validation",
    Split::Test => "test",
});

string_enum!(Scaling {
    Scaling::None => "none",
    Scaling::Minmax => "minmax",
    Scaling::Standard => "standard",
});

/// Identity of one learning curve.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CurveKey {
    pub dataset: String,
    pub learner: String,
    pub metric: Metric,
    pub split: Split,
    pub scaling: Scaling,
}

impl CurveKey {
    pub fn new(
        dataset: impl Into<String>,
        learner: impl Into<String>,
        metric: Metric,
        split: Split,
        scaling: Scaling,
    ) -> Result<Self> {
        let dataset = dataset.into();
        let learner = learner.into();
        if dataset.is_empty() || learner.is_empty() {
            return Err(Error::InvalidArgument(
                "dataset and learner ids must be non-empty".into(),
            ));
        }
        Ok(Self {
            dataset,
            learner,
            metric,
            split,
            scaling,
        })
    }

    /// The flat-filter grouping: curves compared on the same dataset,
    /// metric, split, and scaling.
    pub fn group_id(&self) -> (String, Metric, Split, Scaling) {
        (self.dataset.clone(), self.metric, self.split, self.scaling)
    }
}

impl fmt::Display for CurveKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}/{}",
            self.dataset, self.learner, self.metric, self.split, self.scaling
        )
    }
}

// ---------------------------------------------------------------------------
// Anchor schedule
// ---------------------------------------------------------------------------

/// Geometric training-set-size grid `n_k = ceil(base * 2^(k/density))`,
/// deduplicated and truncated at `max_size`.
///
/// Deserializes either from explicit `anchors` or from
/// `{base, density, max_size}`, in which case the grid is generated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnchorSchedule {
    pub base: u64,
    pub density: u32,
    pub anchors: Vec<u64>,
}

impl<'de> Deserialize<'de> for AnchorSchedule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            base: u64,
            density: u32,
            #[serde(default)]
            anchors: Vec<u64>,
            #[serde(default)]
            max_size: Option<u64>,
        }
        let raw = Raw::deserialize(d)?;
        if !raw.anchors.is_empty() {
            if raw.anchors.windows(2).any(|w| w[0] >= w[1]) {
                return Err(serde::de::Error::custom(
                    "anchors must be strictly increasing",
                ));
            }
            return Ok(AnchorSchedule {
                base: raw.base,
                density: raw.density,
                anchors: raw.anchors,
            });
        }
        match raw.max_size {
            Some(m) => anchor_schedule(raw.base, raw.density, m).map_err(serde::de::Error::custom),
            None => Err(serde::de::Error::custom(
                "anchor schedule needs `anchors` or `max_size`",
            )),
        }
    }
}

/// Builds the anchor schedule for sizes up to `max_size` inclusive.
///
/// ```
/// let s = lcshape::curves::anchor_schedule(16, 2, 100).unwrap();
/// assert_eq!(s.anchors, vec![16, 23, 32, 46, 64, 91]);
/// ```
pub fn anchor_schedule(base: u64, density: u32, max_size: u64) -> Result<AnchorSchedule> {
    if base == 0 || density == 0 {
        return Err(Error::InvalidArgument(
            "base and density must be positive".into(),
        ));
    }
    if max_size < base {
        return Err(Error::InvalidArgument(format!(
            "max_size {max_size} is smaller than base {base}"
        )));
    }
    let mut anchors = Vec::new();
    let mut k = 0u32;
    loop {
        let raw = base as f64 * f64::exp2(k as f64 / density as f64);
        // Snap near-integers before the ceiling so exact powers of two do
        // not round up from float dust.
        let snapped = if (raw - raw.round()).abs() < 1e-9 * raw.max(1.0) {
            raw.round()
        } else {
            raw.ceil()
        };
        let n = snapped as u64;
        if n > max_size {
            break;
        }
        // Duplicates from the ceiling collapse; keep the first occurrence.
        if anchors.last() != Some(&n) {
            anchors.push(n);
        }
        k += 1;
    }
    Ok(AnchorSchedule {
        base,
        density,
        anchors,
    })
}

// ---------------------------------------------------------------------------
// Observation matrix
// ---------------------------------------------------------------------------

/// Dense row-major matrix of risk observations, anchors by repeats.
/// Missing entries are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ObsMatrix {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::InvalidArgument("ragged observation rows".into()));
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// New matrix keeping the given rows and columns, in order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            for &c in cols {
                data.push(self.get(r, c));
            }
        }
        Self {
            rows: rows.len(),
            cols: cols.len(),
            data,
        }
    }
}

/// One train/validation/test realization, identified by its seed pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RepeatId {
    pub outer: u32,
    pub inner: u32,
}

/// Raw per-repeat risk observations for one curve.
///
/// Column `r` holds the same `(outer, inner)` seed pair at every anchor,
/// which is what licenses paired t-tests between anchors. Columns are kept
/// in ascending `RepeatId` order so aggregation is independent of input
/// order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveSet {
    pub key: CurveKey,
    pub anchors: Vec<u64>,
    pub observations: ObsMatrix,
    pub repeat_ids: Vec<RepeatId>,
}

impl CurveSet {
    pub fn new(
        key: CurveKey,
        anchors: Vec<u64>,
        observations: ObsMatrix,
        repeat_ids: Vec<RepeatId>,
    ) -> Result<Self> {
        if observations.rows() != anchors.len() || observations.cols() != repeat_ids.len() {
            return Err(Error::InvalidArgument(format!(
                "observation shape {}x{} does not match {} anchors x {} repeats",
                observations.rows(),
                observations.cols(),
                anchors.len(),
                repeat_ids.len()
            )));
        }
        if anchors.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::AnchorOrder(
                "anchors must be strictly increasing".into(),
            ));
        }
        let mut set = Self {
            key,
            anchors,
            observations,
            repeat_ids,
        };
        set.canonicalize_columns()?;
        Ok(set)
    }

    /// Sorts columns by `(outer, inner)` so sums run in a canonical order.
    fn canonicalize_columns(&mut self) -> Result<()> {
        let mut order: Vec<usize> = (0..self.repeat_ids.len()).collect();
        order.sort_by_key(|&i| self.repeat_ids[i]);
        if order
            .windows(2)
            .any(|w| self.repeat_ids[w[0]] == self.repeat_ids[w[1]])
        {
            return Err(Error::InvalidArgument("repeat ids must be unique".into()));
        }
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return Ok(());
        }
        let all_rows: Vec<usize> = (0..self.anchors.len()).collect();
        self.observations = self.observations.select(&all_rows, &order);
        self.repeat_ids = order.iter().map(|&i| self.repeat_ids[i]).collect();
        Ok(())
    }

    pub fn missing_mask(&self) -> Vec<Vec<bool>> {
        (0..self.anchors.len())
            .map(|r| {
                self.observations
                    .row(r)
                    .iter()
                    .map(|v| v.is_nan())
                    .collect()
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregatePolicy {
    /// Drop every repeat column containing a missing value anywhere, so the
    /// remaining matrix supports paired tests across all anchors.
    CompleteCase,
    /// Keep all non-missing values per anchor; no paired matrix available.
    PerAnchor,
}

/// Per-anchor mean curve with its dispersion and (optionally) the paired
/// repeat matrix behind it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalCurve {
    pub key: CurveKey,
    pub anchors: Vec<u64>,
    pub means: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Complete-case observation matrix; `None` under `PerAnchor`.
    pub repeat_matrix: Option<ObsMatrix>,
    pub k_effective: Vec<usize>,
    /// Anchors dropped because they had no usable observations.
    pub dropped_anchors: Vec<u64>,
}

impl EmpiricalCurve {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// Repeat values at one anchor; errors unless aggregated complete-case.
    pub fn repeats_at(&self, idx: usize) -> Result<&[f64]> {
        match &self.repeat_matrix {
            Some(m) => Ok(m.row(idx)),
            None => Err(Error::PairingUnavailable),
        }
    }
}

/// Collapses the repeats of a `CurveSet` into an empirical mean curve.
pub fn aggregate(set: &CurveSet, policy: AggregatePolicy) -> Result<EmpiricalCurve> {
    let n_anchors = set.anchors.len();
    let n_repeats = set.repeat_ids.len();
    if n_anchors == 0 || n_repeats == 0 {
        return Err(Error::EmptyCurve);
    }

    match policy {
        AggregatePolicy::CompleteCase => {
            // All-missing anchors go first so a single dead anchor does not
            // wipe out every column.
            let mut kept_rows = Vec::new();
            let mut dropped = Vec::new();
            for r in 0..n_anchors {
                if set.observations.row(r).iter().all(|v| v.is_nan()) {
                    dropped.push(set.anchors[r]);
                } else {
                    kept_rows.push(r);
                }
            }
            if kept_rows.is_empty() {
                return Err(Error::EmptyCurve);
            }
            let kept_cols: Vec<usize> = (0..n_repeats)
                .filter(|&c| {
                    kept_rows
                        .iter()
                        .all(|&r| !set.observations.get(r, c).is_nan())
                })
                .collect();
            if kept_cols.is_empty() {
                return Err(Error::EmptyCurve);
            }
            let matrix = set.observations.select(&kept_rows, &kept_cols);
            let anchors: Vec<u64> = kept_rows.iter().map(|&r| set.anchors[r]).collect();
            let k = kept_cols.len();
            let mut means = Vec::with_capacity(anchors.len());
            let mut std_errors = Vec::with_capacity(anchors.len());
            for r in 0..anchors.len() {
                let (mean, se) = mean_and_stderr(matrix.row(r));
                means.push(mean);
                std_errors.push(se);
            }
            Ok(EmpiricalCurve {
                key: set.key.clone(),
                anchors,
                means,
                std_errors,
                repeat_matrix: Some(matrix),
                k_effective: vec![k; kept_rows.len()],
                dropped_anchors: dropped,
            })
        }
        AggregatePolicy::PerAnchor => {
            let mut anchors = Vec::new();
            let mut means = Vec::new();
            let mut std_errors = Vec::new();
            let mut k_effective = Vec::new();
            let mut dropped = Vec::new();
            for r in 0..n_anchors {
                let usable: Vec<f64> = set
                    .observations
                    .row(r)
                    .iter()
                    .copied()
                    .filter(|v| !v.is_nan())
                    .collect();
                if usable.is_empty() {
                    dropped.push(set.anchors[r]);
                    continue;
                }
                let (mean, se) = mean_and_stderr(&usable);
                anchors.push(set.anchors[r]);
                means.push(mean);
                std_errors.push(se);
                k_effective.push(usable.len());
            }
            if anchors.is_empty() {
                return Err(Error::EmptyCurve);
            }
            Ok(EmpiricalCurve {
                key: set.key.clone(),
                anchors,
                means,
                std_errors,
                repeat_matrix: None,
                k_effective,
                dropped_anchors: dropped,
            })
        }
    }
}

/// Splits a `CurveSet` by outer seed and aggregates each slice, yielding
/// one curve per (dataset, outer fold) cell.
pub fn aggregate_by_outer(
    set: &CurveSet,
    policy: AggregatePolicy,
) -> Result<BTreeMap<u32, EmpiricalCurve>> {
    let mut by_outer: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (c, rid) in set.repeat_ids.iter().enumerate() {
        by_outer.entry(rid.outer).or_default().push(c);
    }
    let all_rows: Vec<usize> = (0..set.anchors.len()).collect();
    let mut out = BTreeMap::new();
    for (outer, cols) in by_outer {
        let sub = CurveSet::new(
            set.key.clone(),
            set.anchors.clone(),
            set.observations.select(&all_rows, &cols),
            cols.iter().map(|&c| set.repeat_ids[c]).collect(),
        )?;
        out.insert(outer, aggregate(&sub, policy)?);
    }
    Ok(out)
}

/// Mean and standard error of the mean (sample sd over sqrt k). A single
/// observation has standard error zero.
fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    let mean = compensated_sum(values.iter().copied()) / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(values.iter().map(|v| {
        let d = v - mean;
        d * d
    }));
    let sd = (ss / (k as f64 - 1.0)).sqrt();
    (mean, sd / (k as f64).sqrt())
}

// ---------------------------------------------------------------------------
// Flat filter
// ---------------------------------------------------------------------------

/// Whether a curve is flat relative to its comparison group.
///
/// All mean values in the group are min-max normalized jointly; the curve
/// is flat when its own normalized range falls below `threshold`. A
/// degenerate group (identical values everywhere) counts as flat.
pub fn is_flat(curve: &EmpiricalCurve, group: &[&EmpiricalCurve], threshold: f64) -> Result<bool> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "flat threshold must lie in (0,1), got {threshold}"
        )));
    }
    if group.is_empty() {
        return Err(Error::MismatchedGroup("empty group".into()));
    }
    if !group.iter().any(|c| c.key == curve.key) {
        return Err(Error::MismatchedGroup(format!(
            "curve {} not present in its group",
            curve.key
        )));
    }
    let gid = curve.key.group_id();
    for c in group {
        if c.key.group_id() != gid {
            return Err(Error::MismatchedGroup(format!(
                "{} grouped with {}",
                c.key, curve.key
            )));
        }
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in group {
        for &m in &c.means {
            lo = lo.min(m);
            hi = hi.max(m);
        }
    }
    if hi <= lo {
        return Ok(true);
    }
    let span = hi - lo;
    let (cmin, cmax) = curve
        .means
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &m| {
            (a.min(m), b.max(m))
        });
    Ok((cmax - cmin) / span < threshold)
}
