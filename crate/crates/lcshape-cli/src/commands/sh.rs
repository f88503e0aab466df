//! `lcshape sh`: Successive Halving simulations over a config grid.
//!
//! The panel has one cell per (dataset, outer fold); candidates are the
//! learners, selected on validation curves and scored on test curves. The
//! grid is the cross product of start anchors and budget rates.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use clap::Args;

use lcshape::curves::{aggregate_by_outer, AggregatePolicy, CurveSet, Split};
use lcshape::selection::{sh_study, CandidateCurves, PanelCell, ShConfig, ShStudy, TieRule};
use lcshape::{Error, Result};

use super::{ensure_out_dir, load_filtered, parse_list};
use crate::manifest::RunManifest;
use crate::CommonOpts;

#[derive(Args, Debug)]
pub struct ShArgs {
    #[command(flatten)]
    common: CommonOpts,

    /// Comma-separated start anchor positions (1 = first anchor).
    #[arg(long, default_value = "1,8,16")]
    start_anchors: String,

    /// Comma-separated per-round budget increase rates.
    #[arg(long, default_value = "0.125,0.25,0.5,1.0")]
    budget_rates: String,

    /// Fraction of candidates dropped per round.
    #[arg(long, default_value_t = 0.5)]
    drop_fraction: f64,

    /// Tie rule: `keep_lexicographic` or `keep_all_tied`.
    #[arg(long, default_value = "keep_lexicographic")]
    tie_rule: String,

    /// Comma-separated k values for the top-k summary.
    #[arg(long, default_value = "1,2,3")]
    k: String,
}

pub const STUDY_CSV_HEADER: &str =
    "config_id,start_anchor,budget_rate,dataset,fold,chosen,chosen_rank,regret";
pub const SUMMARY_CSV_HEADER: &str = "config_id,k,p_top_k,mean_log_regret,median_regret";

pub fn run(args: ShArgs) -> Result<()> {
    let starts: Vec<usize> = parse_list(&args.start_anchors, "start anchor")?;
    if starts.contains(&0) {
        return Err(Error::InvalidArgument(
            "start anchor positions are 1-based".into(),
        ));
    }
    let rates: Vec<f64> = parse_list(&args.budget_rates, "budget rate")?;
    let k_values: Vec<usize> = parse_list(&args.k, "k")?;
    let tie_rule: TieRule = args.tie_rule.parse().map_err(Error::InvalidArgument)?;

    // The grid iterates rates within starts, matching the published
    // start-anchor x budget-rate layout.
    let configs: Vec<ShConfig> = starts
        .iter()
        .flat_map(|&s| {
            rates.iter().map(move |&r| ShConfig {
                start_anchor: s - 1,
                budget_rate: r,
                drop_fraction: args.drop_fraction,
                tie_rule,
            })
        })
        .collect();

    // `sh` needs both splits regardless of --split.
    let sets = load_filtered(&args.common, None)?;
    let panel = build_panel(&sets)?;
    let study = sh_study(&panel, &configs, &k_values)?;

    ensure_out_dir(&args.common.out)?;
    write_study(&study, &args.common.out)?;

    let config = serde_json::json!({
        "input": args.common.input.display().to_string(),
        "format": args.common.format.to_string(),
        "metric": args.common.metric.to_string(),
        "start_anchors": starts,
        "budget_rates": rates,
        "drop_fraction": args.drop_fraction,
        "tie_rule": args.tie_rule,
        "k": k_values,
        "threads": args.common.threads,
    });
    RunManifest::new("sh", &[&args.common.input], &config).write(&args.common.out)?;
    eprintln!(
        "sh: {} configs x {} cells -> {}",
        configs.len(),
        panel.len(),
        args.common.out.display()
    );
    Ok(())
}

/// Builds (dataset, fold) cells holding each learner's validation and test
/// curves; errors list every incomplete cell.
pub fn build_panel(sets: &[CurveSet]) -> Result<Vec<PanelCell>> {
    type FoldKey = (String, u32);
    let mut validation: BTreeMap<FoldKey, BTreeMap<String, _>> = BTreeMap::new();
    let mut test: BTreeMap<FoldKey, BTreeMap<String, _>> = BTreeMap::new();
    for set in sets {
        let target = match set.key.split {
            Split::Validation => &mut validation,
            Split::Test => &mut test,
        };
        for (outer, curve) in aggregate_by_outer(set, AggregatePolicy::CompleteCase)? {
            target
                .entry((set.key.dataset.clone(), outer))
                .or_default()
                .insert(set.key.learner.clone(), curve);
        }
    }

    let mut missing = Vec::new();
    let mut panel = Vec::new();
    for (cell_key, val_curves) in validation {
        let Some(test_curves) = test.get(&cell_key) else {
            missing.push(format!("{}#{}:test", cell_key.0, cell_key.1));
            continue;
        };
        let mut candidates = BTreeMap::new();
        for (learner, val) in val_curves {
            match test_curves.get(&learner) {
                Some(t) => {
                    candidates.insert(
                        learner,
                        CandidateCurves {
                            validation: val,
                            test: t.clone(),
                        },
                    );
                }
                None => missing.push(format!("{}#{}:{learner}:test", cell_key.0, cell_key.1)),
            }
        }
        panel.push(PanelCell {
            dataset: cell_key.0,
            fold: cell_key.1,
            candidates,
        });
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteGroup(missing.join(", ")));
    }
    if panel.is_empty() {
        return Err(crate::empty_input_error(
            "no (dataset, fold) cells with both splits",
        ));
    }
    Ok(panel)
}

fn write_study(study: &ShStudy, out: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(out.join("sh_study.csv"))?);
    w.write_record(STUDY_CSV_HEADER.split(','))?;
    for r in &study.rows {
        w.write_record(&[
            r.config_id.clone(),
            r.start_anchor.to_string(),
            r.budget_rate.to_string(),
            r.dataset.clone(),
            r.fold.to_string(),
            r.chosen.clone(),
            r.chosen_rank.to_string(),
            r.regret.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(File::create(out.join("sh_summary.csv"))?);
    w.write_record(SUMMARY_CSV_HEADER.split(','))?;
    for s in &study.summaries {
        w.write_record(&[
            s.config_id.clone(),
            s.k.to_string(),
            s.p_top_k.to_string(),
            s.mean_log_regret.to_string(),
            s.median_regret.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
