//! `lcshape fit`: parametric fitting with shape-stratified MSE summaries.
//!
//! Consumes an existing detect report (`--reports`) when available so
//! shape flags are not recomputed; otherwise classifies internally. Flat
//! curves are skipped unless `--include-flat` is given.

use std::fs::File;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;

use lcshape::curves::{CurveKey, EmpiricalCurve, Metric, Scaling, Split};
use lcshape::fitting::{
    fit_curve, stratified_mse, FitConfig, FitResult, ModelFamily, StratifiedMse,
};
use lcshape::shape::{classify_group, ShapeReport};
use lcshape::{Error, Result};

use super::{aggregate_all, ensure_out_dir, load_filtered, parse_list};
use crate::manifest::RunManifest;
use crate::{with_threads, CommonOpts};

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    common: CommonOpts,

    /// Model families to fit: `pow4`, `mmf4`, `wbl4`, or `all`.
    #[arg(long, default_value = "all")]
    family: String,

    /// JSON file with solver settings (restarts, seed, tolerances, bounds).
    #[arg(long)]
    fit_config: Option<PathBuf>,

    /// Shape reports from a previous `detect` run (shape_reports.json);
    /// skips re-running the detectors.
    #[arg(long)]
    reports: Option<PathBuf>,

    /// Seed for restart draws (overrides the fit-config file).
    #[arg(long)]
    seed: Option<u64>,

    /// Significance level when shape reports are computed here.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Flat filter threshold when shape reports are computed here.
    #[arg(long, default_value_t = 0.05)]
    flat_threshold: f64,

    /// Fit flat curves too instead of skipping them.
    #[arg(long, default_value_t = false)]
    include_flat: bool,
}

pub const FIT_CSV_HEADER: &str = "dataset,learner,family,a,b,c,d,mse,converged,iterations";

pub fn run(args: FitArgs) -> Result<()> {
    let families: Vec<ModelFamily> = if args.family == "all" {
        ModelFamily::ALL.to_vec()
    } else {
        parse_list(&args.family, "family")?
    };

    let sets = load_filtered(&args.common, Some(args.common.split.0))?;
    let curves = aggregate_all(&sets)?;

    let reports = match &args.reports {
        Some(path) => load_reports_json(path)?,
        None => classify_group(&curves, args.alpha, args.flat_threshold, false)?,
    };
    let flat_by_key: std::collections::BTreeMap<&CurveKey, bool> =
        reports.iter().map(|r| (&r.key, r.flat)).collect();

    let mut config = match &args.fit_config {
        Some(path) => {
            let file = File::open(path)?;
            serde_json::from_reader(file)?
        }
        None => FitConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }

    // Every (curve, family) fit is independent.
    let jobs: Vec<(&EmpiricalCurve, ModelFamily)> = curves
        .iter()
        .filter(|c| args.include_flat || !flat_by_key.get(&c.key).copied().unwrap_or(false))
        .flat_map(|c| families.iter().map(move |&f| (c, f)))
        .collect();
    if jobs.is_empty() {
        return Err(crate::empty_input_error("no curves left to fit"));
    }
    let fits: Vec<(CurveKey, ModelFamily, FitResult)> = with_threads(args.common.threads, || {
        jobs.par_iter()
            .map(|&(curve, family)| {
                let fit = fit_curve(&curve.anchors, &curve.means, family, &config)?;
                Ok((curve.key.clone(), family, fit))
            })
            .collect::<Result<_>>()
    })?;

    ensure_out_dir(&args.common.out)?;
    write_fits_csv(&fits, &args.common.out.join("fits.csv"))?;
    write_stratified(&reports, &fits, &families, &args.common.out)?;

    let config_json = serde_json::json!({
        "input": args.common.input.display().to_string(),
        "format": args.common.format.to_string(),
        "metric": args.common.metric.to_string(),
        "split": args.common.split.to_string(),
        "families": families.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "fit_config": serde_json::to_value(&config)?,
        "reports": args.reports.as_ref().map(|p| p.display().to_string()),
        "alpha": args.alpha,
        "flat_threshold": args.flat_threshold,
        "include_flat": args.include_flat,
        "threads": args.common.threads,
    });
    RunManifest::new("fit", &[&args.common.input], &config_json).write(&args.common.out)?;
    eprintln!(
        "fit: {} fits over {} curves -> {}",
        fits.len(),
        curves.len(),
        args.common.out.display()
    );
    Ok(())
}

fn write_fits_csv(fits: &[(CurveKey, ModelFamily, FitResult)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(FIT_CSV_HEADER.split(','))?;
    for (key, family, fit) in fits {
        let [a, b, c, d] = fit.model.params;
        w.write_record(&[
            key.dataset.clone(),
            key.learner.clone(),
            family.to_string(),
            a.to_string(),
            b.to_string(),
            c.to_string(),
            d.to_string(),
            fit.mse.to_string(),
            fit.converged.to_string(),
            fit.iterations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-family stratified summary plus the (violation error, mse) scatter
/// table behind the shape-vs-MSE plots.
fn write_stratified(
    reports: &[ShapeReport],
    fits: &[(CurveKey, ModelFamily, FitResult)],
    families: &[ModelFamily],
    out: &Path,
) -> Result<()> {
    let mut strat = csv::Writer::from_writer(File::create(out.join("stratified.csv"))?);
    strat.write_record(["family", "monotone", "convex", "count", "mean_log10_mse"])?;
    let mut pairs = csv::Writer::from_writer(File::create(out.join("pairs.csv"))?);
    pairs.write_record([
        "dataset", "learner", "metric", "split", "scaling", "family", "eps_mono", "eps_conv", "mse",
    ])?;

    for &family in families {
        let keyed: Vec<(CurveKey, FitResult)> = fits
            .iter()
            .filter(|(_, f, _)| *f == family)
            .map(|(k, _, fit)| (k.clone(), fit.clone()))
            .collect();
        let StratifiedMse {
            groups,
            pairs: scatter,
        } = stratified_mse(reports, &keyed)?;
        for g in groups {
            strat.write_record(&[
                family.to_string(),
                g.monotone.to_string(),
                g.convex.to_string(),
                g.count.to_string(),
                g.mean_log10_mse.to_string(),
            ])?;
        }
        for p in scatter {
            pairs.write_record(&[
                p.key.dataset.clone(),
                p.key.learner.clone(),
                p.key.metric.to_string(),
                p.key.split.to_string(),
                p.key.scaling.to_string(),
                family.to_string(),
                p.eps_mono.to_string(),
                p.eps_conv.to_string(),
                p.mse.to_string(),
            ])?;
        }
    }
    strat.flush()?;
    pairs.flush()?;
    Ok(())
}

/// Reads a `shape_reports.json` produced by `detect`.
pub fn load_reports_json(path: &Path) -> Result<Vec<ShapeReport>> {
    let value: serde_json::Value = serde_json::from_reader(File::open(path)?)?;
    let arr = value.as_array().ok_or_else(|| {
        Error::InvalidArgument(format!("{}: expected a JSON array", path.display()))
    })?;
    arr.iter().map(report_from_json).collect()
}

fn report_from_json(v: &serde_json::Value) -> Result<ShapeReport> {
    let field = |name: &str| -> Result<&serde_json::Value> {
        v.get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("report missing field `{name}`")))
    };
    let bool_of = |name: &str| -> Result<bool> {
        field(name)?
            .as_bool()
            .ok_or_else(|| Error::InvalidArgument(format!("report field `{name}` not a bool")))
    };
    let key_obj = field("key")?;
    let key = CurveKey::new(
        key_obj["dataset"].as_str().unwrap_or_default(),
        key_obj["learner"].as_str().unwrap_or_default(),
        key_obj["metric"]
            .as_str()
            .unwrap_or_default()
            .parse::<Metric>()
            .map_err(Error::InvalidArgument)?,
        key_obj["split"]
            .as_str()
            .unwrap_or_default()
            .parse::<Split>()
            .map_err(Error::InvalidArgument)?,
        key_obj["scaling"]
            .as_str()
            .unwrap_or_default()
            .parse::<Scaling>()
            .map_err(Error::InvalidArgument)?,
    )?;

    let witnesses = v["witnesses"]
        .as_array()
        .map(|ws| {
            ws.iter()
                .map(|w| {
                    Ok(lcshape::shape::ViolationWitness {
                        kind: match w["kind"].as_str().unwrap_or_default() {
                            "monotonicity" => lcshape::shape::ViolationKind::Monotonicity,
                            "convexity" => lcshape::shape::ViolationKind::Convexity,
                            "dipping" => lcshape::shape::ViolationKind::Dipping,
                            other => {
                                return Err(Error::InvalidArgument(format!(
                                    "unknown witness kind `{other}`"
                                )))
                            }
                        },
                        indices: w["indices"]
                            .as_array()
                            .map(|xs| {
                                xs.iter()
                                    .filter_map(|x| x.as_u64().map(|u| u as usize))
                                    .collect()
                            })
                            .unwrap_or_default(),
                        epsilon: w["epsilon"].as_f64().unwrap_or(0.0),
                        p_value: w["p_value"].as_f64().unwrap_or(1.0),
                        significant: w["significant"].as_bool().unwrap_or(false),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?
        .unwrap_or_default();

    Ok(ShapeReport {
        key,
        flat: bool_of("flat")?,
        monotone: bool_of("monotone")?,
        convex: bool_of("convex")?,
        peaking: bool_of("peaking")?,
        dipping: bool_of("dipping")?,
        witnesses,
        peaking_detail: None,
        alpha: v["alpha"].as_f64().unwrap_or(0.05),
        n_anchors: v["n_anchors"].as_u64().unwrap_or(0) as usize,
        dropped_anchors: v["dropped_anchors"].as_u64().unwrap_or(0) as usize,
    })
}
