//! Pairwise curve-crossing statistics across (dataset, fold) cells.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::curves::EmpiricalCurve;
use crate::error::{Error, Result};

/// One comparison cell: every learner's curve on the same dataset and fold.
#[derive(Debug, Clone)]
pub struct CrossingCell {
    pub id: String,
    pub curves: BTreeMap<String, EmpiricalCurve>,
}

/// Crossing probabilities over a panel of cells.
///
/// `p_start_better[a][b]` is the fraction of cells where learner `a` beats
/// `b` at the start anchor; `p_cross_from_above[a][b]` additionally requires
/// `a` to be worse at the final anchor; the conditional matrix divides the
/// two and is `None` where `a` never led. Ties count as "not better", so
/// diagonals are zero.
#[derive(Debug, Clone, Serialize)]
pub struct CrossingMatrix {
    pub learners: Vec<String>,
    pub p_start_better: Vec<Vec<f64>>,
    pub p_cross_from_above: Vec<Vec<f64>>,
    pub p_overtaken_given_lead: Vec<Vec<Option<f64>>>,
}

/// Counts start-better and crossed-from-above events over all cells.
pub fn crossing_matrix(cells: &[CrossingCell], start_anchor: usize) -> Result<CrossingMatrix> {
    if cells.is_empty() {
        return Err(Error::InvalidArgument("no cells supplied".into()));
    }
    let mut learners: Vec<String> = cells
        .iter()
        .flat_map(|c| c.curves.keys().cloned())
        .collect();
    learners.sort();
    learners.dedup();

    let mut missing = Vec::new();
    for cell in cells {
        for l in &learners {
            match cell.curves.get(l) {
                None => missing.push(format!("{}:{}", cell.id, l)),
                Some(curve) if curve.len() <= start_anchor => {
                    return Err(Error::InvalidArgument(format!(
                        "start anchor index {start_anchor} out of range for {} in cell {}",
                        l, cell.id
                    )));
                }
                Some(_) => {}
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteGroup(missing.join(", ")));
    }

    let m = learners.len();
    let mut start_counts = vec![vec![0u64; m]; m];
    let mut cross_counts = vec![vec![0u64; m]; m];
    for cell in cells {
        let starts: Vec<f64> = learners
            .iter()
            .map(|l| cell.curves[l].means[start_anchor])
            .collect();
        let ends: Vec<f64> = learners
            .iter()
            .map(|l| *cell.curves[l].means.last().expect("non-empty curve"))
            .collect();
        for a in 0..m {
            for b in 0..m {
                if a == b {
                    continue;
                }
                if starts[a] < starts[b] {
                    start_counts[a][b] += 1;
                    if ends[a] > ends[b] {
                        cross_counts[a][b] += 1;
                    }
                }
            }
        }
    }

    let total = cells.len() as f64;
    let p_start_better: Vec<Vec<f64>> = start_counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / total).collect())
        .collect();
    let p_cross_from_above: Vec<Vec<f64>> = cross_counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / total).collect())
        .collect();
    let p_overtaken_given_lead: Vec<Vec<Option<f64>>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| {
                    if start_counts[a][b] == 0 {
                        None
                    } else {
                        Some(cross_counts[a][b] as f64 / start_counts[a][b] as f64)
                    }
                })
                .collect()
        })
        .collect();

    Ok(CrossingMatrix {
        learners,
        p_start_better,
        p_cross_from_above,
        p_overtaken_given_lead,
    })
}

impl CrossingMatrix {
    /// Long-form CSV: one row per ordered learner pair, diagonal omitted.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "learner_a",
            "learner_b",
            "p_start_better",
            "p_cross_from_above",
            "p_overtaken_given_lead",
        ])?;
        for (a, la) in self.learners.iter().enumerate() {
            for (b, lb) in self.learners.iter().enumerate() {
                if a == b {
                    continue;
                }
                w.write_record(&[
                    la.clone(),
                    lb.clone(),
                    self.p_start_better[a][b].to_string(),
                    self.p_cross_from_above[a][b].to_string(),
                    self.p_overtaken_given_lead[a][b].map_or_else(String::new, |v| v.to_string()),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
