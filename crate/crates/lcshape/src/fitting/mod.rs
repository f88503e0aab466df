//! Parametric learning-curve models (POW4, MMF4, WBL4) and nonlinear least
//! squares via damped Gauss-Newton (Levenberg-Marquardt) with multi-start.
//!
//! Fits target the empirical mean curve at raw training-set sizes. Every
//! fit is deterministic given `FitConfig::seed`: restart draws come from a
//! counter-based generator and the solver itself is sequential.

mod lm;

pub use lm::fit_curve;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curves::CurveKey;
use crate::error::{Error, Result};
use crate::shape::ShapeReport;
use crate::stats::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    /// `a - b (d + n)^(-c)`: four-parameter power law.
    Pow4,
    /// `(a b + c n^d) / (b + n^d)`: Morgan-Mercer-Flodin.
    Mmf4,
    /// `-b exp(-a n^d) + c`: four-parameter Weibull.
    Wbl4,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::Pow4, ModelFamily::Mmf4, ModelFamily::Wbl4];
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::Pow4 => "pow4",
            ModelFamily::Mmf4 => "mmf4",
            ModelFamily::Wbl4 => "wbl4",
        })
    }
}

impl FromStr for ModelFamily {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pow4" => Ok(ModelFamily::Pow4),
            "mmf4" => Ok(ModelFamily::Mmf4),
            "wbl4" => Ok(ModelFamily::Wbl4),
            other => Err(format!("unknown model family `{other}`")),
        }
    }
}

/// A model family with concrete parameters `(a, b, c, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametricModel {
    pub family: ModelFamily,
    pub params: [f64; 4],
}

impl ParametricModel {
    pub fn new(family: ModelFamily, params: [f64; 4]) -> Self {
        Self { family, params }
    }
}

/// Evaluates the model at training-set size `n`, checking parameter-domain
/// invariants at that point.
pub fn model_eval(model: &ParametricModel, n: f64) -> Result<f64> {
    check_domain(model, n)?;
    let v = eval_unchecked(model.family, &model.params, n);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!(
            "{} evaluated non-finite at n = {n} with params {:?}",
            model.family, model.params
        )))
    }
}

fn check_domain(model: &ParametricModel, n: f64) -> Result<()> {
    if !n.is_finite() || n <= 0.0 {
        return Err(Error::Domain(format!("n must be positive, got {n}")));
    }
    let [_, b, _, d] = model.params;
    match model.family {
        ModelFamily::Pow4 => {
            if d + n <= 0.0 {
                return Err(Error::Domain(format!(
                    "pow4 requires d + n > 0, got {}",
                    d + n
                )));
            }
        }
        ModelFamily::Mmf4 => {
            if b + n.powf(d) == 0.0 {
                return Err(Error::Domain("mmf4 denominator b + n^d is zero".into()));
            }
        }
        ModelFamily::Wbl4 => {}
    }
    Ok(())
}

/// Raw formula evaluation; NaN/inf propagate instead of erroring so the
/// solver can reject bad steps cheaply.
pub(crate) fn eval_unchecked(family: ModelFamily, p: &[f64; 4], n: f64) -> f64 {
    let [a, b, c, d] = *p;
    match family {
        ModelFamily::Pow4 => a - b * (d + n).powf(-c),
        ModelFamily::Mmf4 => {
            let u = n.powf(d);
            (a * b + c * u) / (b + u)
        }
        ModelFamily::Wbl4 => -b * (-a * n.powf(d)).exp() + c,
    }
}

/// Closed-form partial derivatives with respect to `(a, b, c, d)`.
pub fn model_jacobian(model: &ParametricModel, n: f64) -> Result<[f64; 4]> {
    check_domain(model, n)?;
    let grad = jacobian_unchecked(model.family, &model.params, n);
    if grad.iter().all(|g| g.is_finite()) {
        Ok(grad)
    } else {
        Err(Error::Domain(format!(
            "{} gradient non-finite at n = {n} with params {:?}",
            model.family, model.params
        )))
    }
}

pub(crate) fn jacobian_unchecked(family: ModelFamily, p: &[f64; 4], n: f64) -> [f64; 4] {
    let [a, b, c, d] = *p;
    match family {
        ModelFamily::Pow4 => {
            let base = d + n;
            let pw = base.powf(-c);
            [1.0, -pw, b * pw * base.ln(), b * c * base.powf(-c - 1.0)]
        }
        ModelFamily::Mmf4 => {
            let u = n.powf(d);
            let den = b + u;
            let den2 = den * den;
            [
                b / den,
                u * (a - c) / den2,
                u / den,
                b * (c - a) / den2 * u * n.ln(),
            ]
        }
        ModelFamily::Wbl4 => {
            let u = n.powf(d);
            let e = (-a * u).exp();
            [b * u * e, -e, 1.0, a * b * u * n.ln() * e]
        }
    }
}

/// Default projection bounds per family, `[lo, hi]` for each of a, b, c, d.
/// They keep LM steps inside the formulas' numeric domain; a and b carry
/// no constraints of their own.
pub(crate) fn default_bounds(family: ModelFamily) -> [[f64; 2]; 4] {
    const FREE: [f64; 2] = [-1e12, 1e12];
    match family {
        // c in (0, 10], d >= 0 so (d + n)^-c stays real on n >= 1.
        ModelFamily::Pow4 => [FREE, FREE, [1e-6, 10.0], [0.0, 1e9]],
        // b > 0 keeps the denominator positive; d in (0, 10].
        ModelFamily::Mmf4 => [FREE, [1e-9, 1e12], FREE, [1e-6, 10.0]],
        // a > 0 so the exponential decays; d in (0, 10].
        ModelFamily::Wbl4 => [[1e-9, 1e6], FREE, FREE, [1e-6, 10.0]],
    }
}

/// Solver configuration; serializable so runs can pin it in a file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub family: Option<ModelFamily>,
    /// Random restarts in addition to the heuristic start.
    pub restarts: u32,
    pub seed: u64,
    pub max_iters: u32,
    /// Initial damping factor.
    pub lambda0: f64,
    /// Converged when the relative residual-norm decrease falls below this.
    pub tol_residual: f64,
    /// Converged when the step norm falls below this.
    pub tol_step: f64,
    /// Overrides the per-family projection bounds.
    pub bounds: Option<[[f64; 2]; 4]>,
    /// Replace analytic Jacobians with central finite differences.
    pub fd_jacobian: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            family: None,
            restarts: 20,
            seed: 0,
            max_iters: 500,
            lambda0: 1e-3,
            tol_residual: 1e-10,
            tol_step: 1e-12,
            bounds: None,
            fd_jacobian: false,
        }
    }
}

/// Outcome of fitting one family to one curve.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub model: ParametricModel,
    /// Mean squared residual over the fitted anchors.
    pub mse: f64,
    pub converged: bool,
    /// LM iterations used by the winning start.
    pub iterations: u32,
    pub restarts_used: u32,
    /// Residual norms at the initial point and each accepted step of the
    /// winning start; non-increasing by construction.
    pub residual_norm_history: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Shape-stratified evaluation
// ---------------------------------------------------------------------------

pub(crate) const LOG_MSE_FLOOR: f64 = 1e-20;

/// One cell of the monotone x convex stratification.
#[derive(Debug, Clone, Serialize)]
pub struct MseGroup {
    pub monotone: bool,
    pub convex: bool,
    pub count: usize,
    pub mean_log10_mse: f64,
}

/// Per-curve violation sizes paired with the fit MSE, for scatter output.
#[derive(Debug, Clone, Serialize)]
pub struct MsePair {
    pub key: CurveKey,
    pub eps_mono: f64,
    pub eps_conv: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StratifiedMse {
    pub groups: Vec<MseGroup>,
    pub pairs: Vec<MsePair>,
}

pub fn log10_mse(mse: f64) -> f64 {
    mse.max(LOG_MSE_FLOOR).log10()
}

/// Groups fit MSEs by the shape flags of the matching reports.
///
/// Flat-flagged curves are skipped (they are trivially easy to fit); every
/// fit must have a report with the same key.
pub fn stratified_mse(
    reports: &[ShapeReport],
    fits: &[(CurveKey, FitResult)],
) -> Result<StratifiedMse> {
    use std::collections::BTreeMap;
    let by_key: BTreeMap<&CurveKey, &ShapeReport> = reports.iter().map(|r| (&r.key, r)).collect();

    let mut cells: BTreeMap<(bool, bool), Vec<f64>> = BTreeMap::new();
    let mut pairs = Vec::new();
    for (key, fit) in fits {
        let report = by_key
            .get(key)
            .ok_or_else(|| Error::KeyMismatch(format!("no shape report for {key}")))?;
        if report.flat {
            continue;
        }
        cells
            .entry((report.monotone, report.convex))
            .or_default()
            .push(log10_mse(fit.mse));
        let eps_of = |kind: crate::shape::ViolationKind| {
            report
                .witnesses
                .iter()
                .find(|w| w.kind == kind)
                .map_or(0.0, |w| w.epsilon)
        };
        pairs.push(MsePair {
            key: key.clone(),
            eps_mono: eps_of(crate::shape::ViolationKind::Monotonicity),
            eps_conv: eps_of(crate::shape::ViolationKind::Convexity),
            mse: fit.mse,
        });
    }

    let groups = cells
        .into_iter()
        .map(|((monotone, convex), logs)| MseGroup {
            monotone,
            convex,
            count: logs.len(),
            mean_log10_mse: compensated_sum(logs.iter().copied()) / logs.len() as f64,
        })
        .collect();
    Ok(StratifiedMse { groups, pairs })
}
