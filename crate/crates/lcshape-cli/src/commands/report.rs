//! `lcshape report`: join detect/fit/crossing/sh outputs into one summary
//! table keyed by curve. No new analysis happens here; the command only
//! merges the CSVs of previous runs.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::Args;

use lcshape::{Error, Result};

use super::ensure_out_dir;
use crate::manifest::RunManifest;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Output directory of a `detect` run (required).
    #[arg(long)]
    detect: PathBuf,

    /// Output directory of a `fit` run.
    #[arg(long)]
    fit: Option<PathBuf>,

    /// Output directory of a `crossing` run.
    #[arg(long)]
    crossing: Option<PathBuf>,

    /// Output directory of an `sh` run.
    #[arg(long)]
    sh: Option<PathBuf>,

    /// Output directory for the merged table.
    #[arg(long)]
    out: PathBuf,
}

type CurveId = (String, String, String, String, String);

pub fn run(args: ReportArgs) -> Result<()> {
    let detect_rows = read_csv(&args.detect.join("shape_reports.csv"))?;
    if detect_rows.is_empty() {
        return Err(crate::empty_input_error("detect output holds no curves"));
    }

    // Curve id -> best (lowest-mse) fit across the fitted families.
    let mut best_fit: BTreeMap<CurveId, (String, f64)> = BTreeMap::new();
    if let Some(dir) = &args.fit {
        for row in read_csv(&dir.join("fits.csv"))? {
            // fits.csv has no metric/split/scaling columns; join on
            // (dataset, learner) against each detect row's key below.
            let dataset = row["dataset"].clone();
            let learner = row["learner"].clone();
            let mse: f64 = row["mse"].parse().unwrap_or(f64::INFINITY);
            let family = row["family"].clone();
            let id = (
                dataset,
                learner,
                String::new(),
                String::new(),
                String::new(),
            );
            match best_fit.get(&id) {
                Some((_, best)) if *best <= mse => {}
                _ => {
                    best_fit.insert(id, (family, mse));
                }
            }
        }
    }

    // Learner -> mean conditional overtake probability.
    let mut overtaken: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    if let Some(dir) = &args.crossing {
        for row in read_csv(&dir.join("crossing.csv"))? {
            if let Ok(v) = row["p_overtaken_given_lead"].parse::<f64>() {
                let e = overtaken
                    .entry(row["learner_a"].clone())
                    .or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
    }

    // Learner -> times chosen by SH across all configs and cells.
    let mut chosen_counts: BTreeMap<String, usize> = BTreeMap::new();
    if let Some(dir) = &args.sh {
        for row in read_csv(&dir.join("sh_study.csv"))? {
            *chosen_counts.entry(row["chosen"].clone()).or_insert(0) += 1;
        }
    }

    ensure_out_dir(&args.out)?;
    let mut w = csv::Writer::from_writer(File::create(args.out.join("report.csv"))?);
    w.write_record([
        "dataset",
        "learner",
        "metric",
        "split",
        "scaling",
        "flat",
        "monotone",
        "convex",
        "peaking",
        "dipping",
        "ill_behaved",
        "eps_mono",
        "eps_conv",
        "best_family",
        "best_mse",
        "sh_times_chosen",
        "cross_mean_p_overtaken",
    ])?;
    for row in &detect_rows {
        let ill = row["monotone"] == "false" || row["convex"] == "false";
        let fit_id = (
            row["dataset"].clone(),
            row["learner"].clone(),
            String::new(),
            String::new(),
            String::new(),
        );
        let (best_family, best_mse) = match best_fit.get(&fit_id) {
            Some((f, m)) => (f.clone(), m.to_string()),
            None => (String::new(), String::new()),
        };
        let over = overtaken
            .get(&row["learner"])
            .map_or(String::new(), |(sum, n)| (sum / *n as f64).to_string());
        let times = chosen_counts
            .get(&row["learner"])
            .map_or(String::new(), ToString::to_string);
        w.write_record(&[
            row["dataset"].clone(),
            row["learner"].clone(),
            row["metric"].clone(),
            row["split"].clone(),
            row["scaling"].clone(),
            row["flat"].clone(),
            row["monotone"].clone(),
            row["convex"].clone(),
            row["peaking"].clone(),
            row["dipping"].clone(),
            ill.to_string(),
            row["eps_mono"].clone(),
            row["eps_conv"].clone(),
            best_family,
            best_mse,
            times,
            over,
        ])?;
    }
    w.flush()?;

    let config = serde_json::json!({
        "detect": args.detect.display().to_string(),
        "fit": args.fit.as_ref().map(|p| p.display().to_string()),
        "crossing": args.crossing.as_ref().map(|p| p.display().to_string()),
        "sh": args.sh.as_ref().map(|p| p.display().to_string()),
    });
    RunManifest::new("report", &[&args.detect], &config).write(&args.out)?;
    eprintln!(
        "report: {} curves -> {}",
        detect_rows.len(),
        args.out.display()
    );
    Ok(())
}

/// Reads a headered CSV into name-keyed rows.
pub fn read_csv(path: &Path) -> Result<Vec<BTreeMap<String, String>>> {
    let mut reader = csv::Reader::from_reader(File::open(path)?);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.into_records() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::InvalidArgument(format!(
                "{}: row width {} does not match header width {}",
                path.display(),
                record.len(),
                headers.len()
            )));
        }
        rows.push(
            headers
                .iter()
                .cloned()
                .zip(record.iter().map(str::to_string))
                .collect(),
        );
    }
    Ok(rows)
}
