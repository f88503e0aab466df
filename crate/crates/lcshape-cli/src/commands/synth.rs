//! `lcshape synth`: emit synthetic fixture curves as JSONL records.
//!
//! The spec file holds one `SynthSpec` object or an array of them; the
//! output flows through the same ingestion schema as real data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;

use lcshape::curves::write_jsonl;
use lcshape::synth::{generate, SynthSpec};
use lcshape::{Error, Result};

use crate::manifest::digest_config;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Spec file: one JSON object or an array of them.
    #[arg(long)]
    spec: PathBuf,

    /// Output JSONL path (`-` for stdout).
    #[arg(long)]
    out: String,

    /// Overrides every spec's seed with `seed + index`.
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run(args: SynthArgs) -> Result<()> {
    let value: serde_json::Value = serde_json::from_reader(File::open(&args.spec)?)?;
    let mut specs: Vec<SynthSpec> = match value {
        serde_json::Value::Array(items) => items
            .into_iter()
            .map(serde_json::from_value)
            .collect::<std::result::Result<_, _>>()?,
        obj @ serde_json::Value::Object(_) => vec![serde_json::from_value(obj)?],
        _ => {
            return Err(Error::InvalidSpec(
                "spec file must hold an object or an array".into(),
            ))
        }
    };
    if specs.is_empty() {
        return Err(crate::empty_input_error("spec file holds no specs"));
    }
    if let Some(seed) = args.seed {
        for (i, spec) in specs.iter_mut().enumerate() {
            spec.seed = seed.wrapping_add(i as u64);
        }
    }

    let mut sets = Vec::new();
    for spec in &specs {
        sets.extend(generate(spec)?);
    }

    match args.out.as_str() {
        "-" => {
            let stdout = std::io::stdout();
            write_jsonl(&sets, stdout.lock())?;
        }
        path => {
            let mut w = BufWriter::new(File::create(path)?);
            write_jsonl(&sets, &mut w)?;
            w.flush()?;
        }
    }
    eprintln!(
        "synth: {} specs -> {} curve sets (config digest {})",
        specs.len(),
        sets.len(),
        &digest_config(&serde_json::to_value(&specs)?)[..12],
    );
    Ok(())
}
