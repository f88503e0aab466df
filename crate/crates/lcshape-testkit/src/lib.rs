//! Independent oracles and fixture builders backing the lcshape test
//! suites. Only ever a dev-dependency.
//!
//! The oracles are written against the mathematical definitions, not the
//! crate's implementation paths: the incomplete beta uses a power series
//! instead of a continued fraction, the Student-t tail has a gamma-free
//! closed form for integer df, and the violation errors use plain
//! exhaustive loops with their own tie handling.

use std::f64::consts::PI;

use lcshape::curves::{
    aggregate, AggregatePolicy, CurveKey, CurveSet, EmpiricalCurve, Metric, ObsMatrix, RepeatId,
    Scaling, Split,
};

// ---------------------------------------------------------------------------
// Student-t oracles
// ---------------------------------------------------------------------------

/// Regularized incomplete beta by the power series
/// `I_x(a,b) = x^a (1-x)^b / (a B(a,b)) * [1 + sum_{n>=1} r_n]` with term
/// ratio `r_n / r_{n-1} = (a+b+n-1)/(a+n) * x`, using the symmetry
/// transform to keep x on the fast-converging side.
pub fn beta_inc_series(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x >= (a + 1.0) / (a + b + 2.0) {
        return 1.0 - beta_inc_series_direct(b, a, 1.0 - x);
    }
    beta_inc_series_direct(a, b, x)
}

fn beta_inc_series_direct(a: f64, b: f64, x: f64) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut n = 1.0f64;
    loop {
        term *= (a + b + n - 1.0) / (a + n) * x;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() || n > 2_000_000.0 {
            break;
        }
        n += 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta_stirling(a, b);
    (ln_front.exp() / a) * sum
}

/// ln B(a, b) via Stirling's series with argument shifting; a different
/// formula family than the Lanczos ln-gamma inside lcshape.
pub fn ln_beta_stirling(a: f64, b: f64) -> f64 {
    ln_gamma_stirling(a) + ln_gamma_stirling(b) - ln_gamma_stirling(a + b)
}

fn ln_gamma_stirling(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut shift = 0.0f64;
    let mut z = x;
    while z < 20.0 {
        shift += z.ln();
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let series = inv / 12.0 - inv * inv2 / 360.0 + inv * inv2 * inv2 / 1260.0
        - inv * inv2 * inv2 * inv2 / 1680.0
        + inv * inv2 * inv2 * inv2 * inv2 / 1188.0;
    0.5 * (2.0 * PI).ln() + (z - 0.5) * z.ln() - z + series - shift
}

/// `P(T >= t)` oracle: one half of the regularized incomplete beta, the
/// same reduction the implementation uses but driven by the series.
pub fn t_sf_series(t: f64, df: u32) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let nu = df as f64;
    let x = nu / (nu + t * t);
    let half = 0.5 * beta_inc_series(0.5 * nu, 0.5, x);
    if t > 0.0 {
        half
    } else {
        1.0 - half
    }
}

/// `P(T >= t)` for integer df via the exact trigonometric recursion; no
/// gamma function involved anywhere.
pub fn t_sf_trig(t: f64, df: u32) -> f64 {
    let nu = df as f64;
    let theta = (t / nu.sqrt()).atan();
    if df == 1 {
        return 0.5 - theta / PI;
    }
    let c = theta.cos();
    let s = theta.sin();
    let c2 = c * c;
    if df.is_multiple_of(2) {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut j = 1u32;
        while 2 * j <= df - 2 {
            term *= (2.0 * j as f64 - 1.0) / (2.0 * j as f64) * c2;
            sum += term;
            j += 1;
        }
        0.5 - 0.5 * s * sum
    } else {
        let mut term = c;
        let mut sum = c;
        let mut j = 1u32;
        while 2 * j + 1 < df - 1 {
            term *= (2.0 * j as f64) / (2.0 * j as f64 + 1.0) * c2;
            sum += term;
            j += 1;
        }
        0.5 - (theta + s * sum) / PI
    }
}

/// Standard normal upper tail via erfc.
pub fn normal_sf(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

// ---------------------------------------------------------------------------
// Violation-error oracles
// ---------------------------------------------------------------------------

/// Brute-force monotonicity violation error: every pair in lexicographic
/// (i, j) order, keeping strictly larger gaps.
pub fn mono_violation_brute(means: &[f64]) -> (f64, Option<(usize, usize)>) {
    let mut best = 0.0f64;
    let mut arg = None;
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            let gap = means[j] - means[i];
            if gap > best {
                best = gap;
                arg = Some((i, j));
            }
        }
    }
    (best, arg)
}

/// Independently coded triple loop for the convexity violation error:
/// iterates in (j, h, i) order and resolves ties by explicit lexicographic
/// comparison on (h, i, j). The interpolation expression itself is the
/// canonical definition, shared with the implementation so float results
/// are comparable bit for bit.
pub fn conv_violation_oracle(
    anchors: &[u64],
    means: &[f64],
) -> (f64, Option<(usize, usize, usize)>) {
    let n = means.len();
    let ns: Vec<f64> = anchors.iter().map(|&a| a as f64).collect();
    let mut best = 0.0f64;
    let mut arg: Option<(usize, usize, usize)> = None;
    for j in (2..n).rev() {
        for h in 0..j - 1 {
            for i in h + 1..j {
                let interp =
                    ((ns[j] - ns[i]) * means[h] + (ns[i] - ns[h]) * means[j]) / (ns[j] - ns[h]);
                let gap = means[i] - interp;
                let better =
                    gap > best || (gap == best && best > 0.0 && arg.is_some_and(|t| (h, i, j) < t));
                if better {
                    best = gap;
                    arg = Some((h, i, j));
                }
            }
        }
    }
    if best > 0.0 {
        (best, arg)
    } else {
        (0.0, None)
    }
}

// ---------------------------------------------------------------------------
// Fixture builders
// ---------------------------------------------------------------------------

pub fn test_key(dataset: &str, learner: &str) -> CurveKey {
    CurveKey::new(
        dataset,
        learner,
        Metric::ErrorRate,
        Split::Validation,
        Scaling::None,
    )
    .unwrap()
}

/// Builds a complete-case empirical curve straight from repeat rows.
pub fn curve_from_rows(key: CurveKey, anchors: Vec<u64>, rows: Vec<Vec<f64>>) -> EmpiricalCurve {
    let k = rows[0].len();
    let set = CurveSet::new(
        key,
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

/// Curve whose repeats all equal the mean values (zero noise).
pub fn exact_curve(key: CurveKey, anchors: Vec<u64>, means: &[f64], k: usize) -> EmpiricalCurve {
    curve_from_rows(key, anchors, means.iter().map(|&m| vec![m; k]).collect())
}

/// Mean-only curve (no repeat matrix), for operations that only read
/// `means`, such as crossing matrices and SH.
pub fn mean_curve(key: CurveKey, anchors: Vec<u64>, means: Vec<f64>) -> EmpiricalCurve {
    EmpiricalCurve {
        key,
        anchors,
        std_errors: vec![0.0; means.len()],
        k_effective: vec![1; means.len()],
        repeat_matrix: None,
        dropped_anchors: vec![],
        means,
    }
}
