pub mod crossing;
pub mod detect;
pub mod fit;
pub mod report;
pub mod sh;
pub mod synth;

use std::fs;
use std::path::Path;

use lcshape::curves::{
    aggregate, load_curves, AggregatePolicy, CurveSet, EmpiricalCurve, Metric, Split,
};
use lcshape::{Error, Result};

use crate::{empty_input_error, CommonOpts};

/// Loads the input and keeps only the requested metric (and split, when
/// given). Errors with the empty-input code when nothing survives.
pub fn load_filtered(opts: &CommonOpts, split: Option<Split>) -> Result<Vec<CurveSet>> {
    let sets = load_curves(&opts.input, opts.format.0)?;
    let metric: Metric = opts.metric.0;
    let filtered: Vec<CurveSet> = sets
        .into_iter()
        .filter(|s| s.key.metric == metric && split.is_none_or(|sp| s.key.split == sp))
        .collect();
    if filtered.is_empty() {
        return Err(empty_input_error(&format!(
            "no curves with metric {metric}{} in {}",
            split.map_or(String::new(), |s| format!(" and split {s}")),
            opts.input.display()
        )));
    }
    Ok(filtered)
}

/// Complete-case aggregation over a batch; curve order is preserved.
pub fn aggregate_all(sets: &[CurveSet]) -> Result<Vec<EmpiricalCurve>> {
    sets.iter()
        .map(|s| aggregate(s, AggregatePolicy::CompleteCase))
        .collect()
}

pub fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Serializes a value as one pretty JSON file.
pub fn write_json_file(path: &Path, value: &serde_json::Value) -> Result<()> {
    use std::io::Write;
    let mut f = fs::File::create(path)?;
    writeln!(f, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Parses a comma-separated list with a labelled error.
pub fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|_| Error::InvalidArgument(format!("bad {what} entry `{tok}`")))
        })
        .collect()
}
