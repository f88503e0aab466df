//! `lcshape detect`: shape classification over a curve bundle.
//!
//! Writes per-curve reports (CSV + JSON), the aggregated-curve export, and
//! a category summary table with the fraction of curves per shape class.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use clap::Args;
use rayon::prelude::*;

use lcshape::curves::{is_flat, write_aggregated_csv, EmpiricalCurve};
use lcshape::shape::{classify_curve, ShapeReport, ViolationKind};
use lcshape::Result;

use super::{aggregate_all, ensure_out_dir, load_filtered, write_json_file};
use crate::manifest::RunManifest;
use crate::{with_threads, CommonOpts};

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[command(flatten)]
    common: CommonOpts,

    /// Significance level for all violation tests.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Normalized range below which a curve counts as flat.
    #[arg(long, default_value_t = 0.05)]
    flat_threshold: f64,

    /// Run violation tests on flat curves too instead of skipping them.
    #[arg(long, default_value_t = false)]
    include_flat: bool,
}

pub const SHAPE_CSV_HEADER: &str = "dataset,learner,metric,split,scaling,flat,monotone,convex,peaking,dipping,eps_mono,eps_conv,p_mono,p_conv";

pub fn run(args: DetectArgs) -> Result<()> {
    let sets = load_filtered(&args.common, Some(args.common.split.0))?;
    let curves = aggregate_all(&sets)?;
    let reports = with_threads(args.common.threads, || {
        classify_parallel(&curves, args.alpha, args.flat_threshold, args.include_flat)
    })?;

    ensure_out_dir(&args.common.out)?;
    write_reports_csv(&reports, &args.common.out.join("shape_reports.csv"))?;
    let json = serde_json::Value::Array(reports.iter().map(ShapeReport::to_json).collect());
    write_json_file(&args.common.out.join("shape_reports.json"), &json)?;
    write_aggregated_csv(&curves, File::create(args.common.out.join("curves.csv"))?)?;
    write_aggregate_table(&reports, &args.common.out.join("aggregate.csv"))?;

    let config = serde_json::json!({
        "input": args.common.input.display().to_string(),
        "format": args.common.format.to_string(),
        "metric": args.common.metric.to_string(),
        "split": args.common.split.to_string(),
        "alpha": args.alpha,
        "flat_threshold": args.flat_threshold,
        "include_flat": args.include_flat,
        "threads": args.common.threads,
    });
    RunManifest::new("detect", &[&args.common.input], &config).write(&args.common.out)?;
    eprintln!(
        "detect: {} curves -> {}",
        reports.len(),
        args.common.out.display()
    );
    Ok(())
}

/// Flat flags need the group context, so they are computed up front; the
/// per-curve detector work then runs in parallel, order preserved.
fn classify_parallel(
    curves: &[EmpiricalCurve],
    alpha: f64,
    flat_threshold: f64,
    include_flat: bool,
) -> Result<Vec<ShapeReport>> {
    let mut groups: BTreeMap<_, Vec<&EmpiricalCurve>> = BTreeMap::new();
    for c in curves {
        groups.entry(c.key.group_id()).or_default().push(c);
    }
    let flat_flags: Vec<bool> = curves
        .iter()
        .map(|c| is_flat(c, &groups[&c.key.group_id()], flat_threshold))
        .collect::<Result<_>>()?;

    curves
        .par_iter()
        .zip(flat_flags)
        .map(|(curve, flat)| {
            if flat && !include_flat {
                Ok(ShapeReport::flat_placeholder(curve, alpha))
            } else {
                classify_curve(curve, flat, alpha)
            }
        })
        .collect()
}

fn witness_fields(report: &ShapeReport, kind: ViolationKind) -> (String, String) {
    match report.witnesses.iter().find(|w| w.kind == kind) {
        Some(w) => (w.epsilon.to_string(), w.p_value.to_string()),
        None => ("0".to_string(), String::new()),
    }
}

pub fn write_reports_csv(reports: &[ShapeReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(SHAPE_CSV_HEADER.split(','))?;
    for r in reports {
        let (eps_mono, p_mono) = witness_fields(r, ViolationKind::Monotonicity);
        let (eps_conv, p_conv) = witness_fields(r, ViolationKind::Convexity);
        w.write_record(&[
            r.key.dataset.clone(),
            r.key.learner.clone(),
            r.key.metric.to_string(),
            r.key.split.to_string(),
            r.key.scaling.to_string(),
            r.flat.to_string(),
            r.monotone.to_string(),
            r.convex.to_string(),
            r.peaking.to_string(),
            r.dipping.to_string(),
            eps_mono,
            eps_conv,
            p_mono,
            p_conv,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The shape-class summary: fraction of all analyzed curves per category.
fn write_aggregate_table(reports: &[ShapeReport], path: &Path) -> Result<()> {
    let total = reports.len() as f64;
    let count = |f: &dyn Fn(&ShapeReport) -> bool| reports.iter().filter(|r| f(r)).count();
    let rows: [(&str, usize); 6] = [
        ("flat", count(&|r| r.flat)),
        ("non_monotone", count(&|r| !r.monotone)),
        ("non_convex", count(&|r| !r.convex)),
        ("ill_behaved", count(&|r| r.ill_behaved())),
        ("peaking", count(&|r| r.peaking)),
        ("dipping", count(&|r| r.dipping)),
    ];
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["category", "count", "percent"])?;
    for (name, n) in rows {
        w.write_record(&[
            name.to_string(),
            n.to_string(),
            (100.0 * n as f64 / total).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
