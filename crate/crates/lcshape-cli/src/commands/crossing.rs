//! `lcshape crossing`: pairwise crossing-probability matrices.
//!
//! Cells are (dataset, outer fold): each curve set is split by outer seed
//! and aggregated over its inner seeds, matching nested-cross-validation
//! folds. Every learner must cover every cell.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use clap::Args;

use lcshape::curves::{aggregate_by_outer, AggregatePolicy, CurveSet};
use lcshape::shape::{crossing_matrix, CrossingCell, CrossingMatrix};
use lcshape::Result;

use super::{ensure_out_dir, load_filtered};
use crate::manifest::RunManifest;
use crate::CommonOpts;

#[derive(Args, Debug)]
pub struct CrossingArgs {
    #[command(flatten)]
    common: CommonOpts,

    /// Anchor position at which the initial lead is measured (1 = first).
    #[arg(long, default_value_t = 1)]
    start_anchor: usize,
}

pub fn run(args: CrossingArgs) -> Result<()> {
    if args.start_anchor == 0 {
        return Err(lcshape::Error::InvalidArgument(
            "start anchor positions are 1-based".into(),
        ));
    }
    let sets = load_filtered(&args.common, Some(args.common.split.0))?;
    let cells = build_cells(&sets)?;
    let matrix = crossing_matrix(&cells, args.start_anchor - 1)?;

    ensure_out_dir(&args.common.out)?;
    matrix.write_csv(File::create(args.common.out.join("crossing.csv"))?)?;
    write_single(
        &matrix,
        &args.common.out.join("crossing_start_better.csv"),
        |m, a, b| Some(m.p_start_better[a][b]),
    )?;
    write_single(
        &matrix,
        &args.common.out.join("crossing_from_above.csv"),
        |m, a, b| Some(m.p_cross_from_above[a][b]),
    )?;
    write_single(
        &matrix,
        &args.common.out.join("crossing_conditional.csv"),
        |m, a, b| m.p_overtaken_given_lead[a][b],
    )?;

    let config = serde_json::json!({
        "input": args.common.input.display().to_string(),
        "format": args.common.format.to_string(),
        "metric": args.common.metric.to_string(),
        "split": args.common.split.to_string(),
        "start_anchor": args.start_anchor,
        "threads": args.common.threads,
    });
    RunManifest::new("crossing", &[&args.common.input], &config).write(&args.common.out)?;
    eprintln!(
        "crossing: {} learners over {} cells -> {}",
        matrix.learners.len(),
        cells.len(),
        args.common.out.display()
    );
    Ok(())
}

/// Groups per-outer-fold curves into (dataset, fold) cells.
pub fn build_cells(sets: &[CurveSet]) -> Result<Vec<CrossingCell>> {
    let mut cells: BTreeMap<(String, u32), CrossingCell> = BTreeMap::new();
    for set in sets {
        for (outer, curve) in aggregate_by_outer(set, AggregatePolicy::CompleteCase)? {
            let id = (set.key.dataset.clone(), outer);
            cells
                .entry(id.clone())
                .or_insert_with(|| CrossingCell {
                    id: format!("{}#{outer}", id.0),
                    curves: BTreeMap::new(),
                })
                .curves
                .insert(set.key.learner.clone(), curve);
        }
    }
    Ok(cells.into_values().collect())
}

fn write_single(
    matrix: &CrossingMatrix,
    path: &Path,
    value: impl Fn(&CrossingMatrix, usize, usize) -> Option<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["learner_a", "learner_b", "value"])?;
    for (a, la) in matrix.learners.iter().enumerate() {
        for (b, lb) in matrix.learners.iter().enumerate() {
            if a == b {
                continue;
            }
            w.write_record(&[
                la.clone(),
                lb.clone(),
                value(matrix, a, b).map_or_else(String::new, |v| v.to_string()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
