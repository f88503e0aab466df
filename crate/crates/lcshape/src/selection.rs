//! Successive Halving over stored learning curves.
//!
//! Each round evaluates the surviving candidates' validation mean risk at
//! the current anchor, drops the worst fraction, and advances the fidelity
//! multiplicatively, snapped up to the anchor grid. Ranking and regret are
//! computed on the test curves at the schedule's final anchor. The run is
//! fully deterministic; ties resolve through the configured rule.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curves::EmpiricalCurve;
use crate::error::{Error, Result};
use crate::stats::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Tied risks rank by learner id, so the lexicographically smallest
    /// tied candidate survives preferentially.
    KeepLexicographic,
    /// Candidates tied with the last intended survivor are all kept.
    KeepAllTied,
}

impl FromStr for TieRule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "keep_lexicographic" => Ok(TieRule::KeepLexicographic),
            "keep_all_tied" => Ok(TieRule::KeepAllTied),
            other => Err(format!("unknown tie rule `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShConfig {
    /// 0-based index into the shared anchor schedule.
    pub start_anchor: usize,
    /// Fractional fidelity increase per round (0.25 = +25% per round).
    pub budget_rate: f64,
    /// Fraction of the surviving candidates dropped each round.
    pub drop_fraction: f64,
    pub tie_rule: TieRule,
}

impl Default for ShConfig {
    fn default() -> Self {
        Self {
            start_anchor: 0,
            budget_rate: 0.25,
            drop_fraction: 0.5,
            tie_rule: TieRule::KeepLexicographic,
        }
    }
}

/// Validation and test curves of one candidate, on the shared schedule.
#[derive(Debug, Clone)]
pub struct CandidateCurves {
    pub validation: EmpiricalCurve,
    pub test: EmpiricalCurve,
}

/// One evaluated round: the anchor, the candidates that survived the drop,
/// and their validation risks at that anchor.
#[derive(Debug, Clone, Serialize)]
pub struct ShRound {
    pub anchor: u64,
    pub survivors: Vec<String>,
    pub risks: Vec<f64>,
}

/// Trace of one Successive Halving execution.
#[derive(Debug, Clone, Serialize)]
pub struct ShRun {
    pub config: ShConfig,
    pub rounds: Vec<ShRound>,
    pub chosen: String,
    /// Chosen learner's final test risk minus the best final test risk.
    pub regret: f64,
    /// Rank of the chosen learner by final test risk (1 = best; ties share
    /// the better rank).
    pub chosen_rank: usize,
}

/// Runs Successive Halving over the candidate curves.
pub fn run_sh(candidates: &BTreeMap<String, CandidateCurves>, config: &ShConfig) -> Result<ShRun> {
    if candidates.len() < 2 {
        return Err(Error::EmptyCandidates);
    }
    if !config.budget_rate.is_finite() || config.budget_rate <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "budget rate must be positive, got {}",
            config.budget_rate
        )));
    }
    if !(config.drop_fraction > 0.0 && config.drop_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "drop fraction must lie in (0,1), got {}",
            config.drop_fraction
        )));
    }

    let schedule = shared_schedule(candidates)?;
    if config.start_anchor >= schedule.len() {
        return Err(Error::InvalidArgument(format!(
            "start anchor index {} out of range for a {}-anchor schedule",
            config.start_anchor,
            schedule.len()
        )));
    }
    let last_idx = schedule.len() - 1;

    let mut survivors: Vec<&String> = candidates.keys().collect();
    let mut anchor_idx = config.start_anchor;
    let mut rounds = Vec::new();
    let chosen: String = loop {
        // Rank survivors at the current fidelity, best first.
        let mut ranked: Vec<(&String, f64)> = survivors
            .iter()
            .map(|&id| (id, candidates[id].validation.means[anchor_idx]))
            .collect();
        ranked.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(b.0))
        });

        let m = ranked.len();
        let drop_count = ((config.drop_fraction * m as f64).ceil() as usize).min(m - 1);
        let keep = m - drop_count;
        let kept: Vec<(&String, f64)> = match config.tie_rule {
            TieRule::KeepLexicographic => ranked.iter().take(keep).cloned().collect(),
            TieRule::KeepAllTied => {
                let boundary = ranked[keep - 1].1;
                ranked
                    .iter()
                    .filter(|(_, r)| *r <= boundary)
                    .cloned()
                    .collect()
            }
        };
        rounds.push(ShRound {
            anchor: schedule[anchor_idx],
            survivors: kept.iter().map(|(id, _)| (*id).clone()).collect(),
            risks: kept.iter().map(|(_, r)| *r).collect(),
        });
        survivors = kept.iter().map(|(id, _)| *id).collect();

        if survivors.len() == 1 {
            break survivors[0].clone();
        }
        if anchor_idx == last_idx {
            // Fidelity exhausted: best validation risk at the final
            // reached anchor wins (kept is already sorted best-first).
            break kept[0].0.clone();
        }
        anchor_idx = advance_fidelity(schedule, anchor_idx, config.budget_rate);
    };

    // Rank and regret on test curves at the schedule's final anchor.
    let final_tests: BTreeMap<&String, f64> = candidates
        .iter()
        .map(|(id, c)| (id, *c.test.means.last().expect("non-empty curve")))
        .collect();
    let chosen_final = final_tests[&chosen];
    let best_final = final_tests.values().copied().fold(f64::INFINITY, f64::min);
    let chosen_rank = 1 + final_tests.values().filter(|&&v| v < chosen_final).count();

    Ok(ShRun {
        config: *config,
        rounds,
        chosen,
        regret: chosen_final - best_final,
        chosen_rank,
    })
}

fn shared_schedule(candidates: &BTreeMap<String, CandidateCurves>) -> Result<&[u64]> {
    let mut iter = candidates.iter();
    let (first_id, first) = iter.next().expect("validated non-empty");
    let schedule = first.validation.anchors.as_slice();
    if schedule.is_empty() {
        return Err(Error::EmptyCurve);
    }
    if first.test.anchors != schedule {
        return Err(Error::ScheduleMismatch(format!(
            "validation and test anchors differ for {first_id}"
        )));
    }
    for (id, c) in iter {
        if c.validation.anchors != schedule || c.test.anchors != schedule {
            return Err(Error::ScheduleMismatch(format!(
                "{id} does not share {first_id}'s anchors"
            )));
        }
    }
    Ok(schedule)
}

/// Smallest anchor at least `current * (1 + rate)`, clamped to the last
/// anchor; always advances by at least one index.
fn advance_fidelity(schedule: &[u64], current_idx: usize, rate: f64) -> usize {
    let target = schedule[current_idx] as f64 * (1.0 + rate);
    let mut idx = current_idx + 1;
    while idx < schedule.len() - 1 && (schedule[idx] as f64) < target {
        idx += 1;
    }
    idx
}

// ---------------------------------------------------------------------------
// Study grid
// ---------------------------------------------------------------------------

/// One (dataset, outer fold) cell of an SH study panel.
#[derive(Debug, Clone)]
pub struct PanelCell {
    pub dataset: String,
    pub fold: u32,
    pub candidates: BTreeMap<String, CandidateCurves>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub config_id: String,
    /// 1-based anchor position, as reported in study exports.
    pub start_anchor: usize,
    pub budget_rate: f64,
    pub dataset: String,
    pub fold: u32,
    pub chosen: String,
    pub chosen_rank: usize,
    pub regret: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudySummaryRow {
    pub config_id: String,
    pub k: usize,
    /// Fraction of cells whose chosen learner ranked within the top k.
    pub p_top_k: f64,
    pub mean_log_regret: f64,
    pub median_regret: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShStudy {
    pub rows: Vec<StudyRow>,
    pub summaries: Vec<StudySummaryRow>,
}

/// Regrets are floored before the log so zero regret stays plottable.
pub const REGRET_FLOOR: f64 = 1e-6;

/// Runs every config over every panel cell and summarizes top-k rates and
/// regret distributions per config.
pub fn sh_study(panel: &[PanelCell], configs: &[ShConfig], k_values: &[usize]) -> Result<ShStudy> {
    if panel.is_empty() || configs.is_empty() {
        return Err(Error::InvalidArgument(
            "panel and configs must be non-empty".into(),
        ));
    }
    let mut rows = Vec::with_capacity(panel.len() * configs.len());
    let mut summaries = Vec::new();
    for (ci, config) in configs.iter().enumerate() {
        let config_id = format!("c{ci:02}");
        let mut ranks = Vec::with_capacity(panel.len());
        let mut regrets = Vec::with_capacity(panel.len());
        for cell in panel {
            let run = run_sh(&cell.candidates, config).map_err(|e| Error::Cell {
                cell: format!("{}#{}", cell.dataset, cell.fold),
                source: Box::new(e),
            })?;
            ranks.push(run.chosen_rank);
            regrets.push(run.regret);
            rows.push(StudyRow {
                config_id: config_id.clone(),
                start_anchor: config.start_anchor + 1,
                budget_rate: config.budget_rate,
                dataset: cell.dataset.clone(),
                fold: cell.fold,
                chosen: run.chosen,
                chosen_rank: run.chosen_rank,
                regret: run.regret,
            });
        }

        let mean_log_regret = compensated_sum(regrets.iter().map(|r| (r + REGRET_FLOOR).log10()))
            / regrets.len() as f64;
        let median_regret = median(&mut regrets.clone());
        for &k in k_values {
            let hits = ranks.iter().filter(|&&r| r <= k).count();
            summaries.push(StudySummaryRow {
                config_id: config_id.clone(),
                k,
                p_top_k: hits as f64 / ranks.len() as f64,
                mean_log_regret,
                median_regret,
            });
        }
    }
    Ok(ShStudy { rows, summaries })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
