//! Run manifest: what ran, over which inputs, with which effective
//! configuration. The digest covers every effective parameter (defaults
//! included), so byte-identical data outputs are attributable to an exact
//! configuration. The timestamp lives only here; data files stay
//! byte-reproducible across reruns.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use lcshape::Result;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub config_digest: String,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    /// `effective_config` must hold every parameter that influenced the
    /// run, defaults included; its canonical JSON is hashed.
    pub fn new(
        command: &str,
        inputs: &[&Path],
        effective_config: &serde_json::Value,
    ) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            config_digest: digest_config(effective_config),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: iso8601_now(),
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let mut f = File::create(out_dir.join("manifest.json"))?;
        let json = serde_json::to_string_pretty(self)?;
        writeln!(f, "{json}")?;
        Ok(())
    }
}

/// SHA-256 over the canonical (alphabetically keyed) JSON encoding.
pub fn digest_config(config: &serde_json::Value) -> String {
    let canonical = config.to_string();
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

fn iso8601_now() -> String {
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default();
    iso8601_from_unix(now.as_secs())
}

/// UTC civil time from unix seconds (days algorithm by Howard Hinnant).
fn iso8601_from_unix(secs: u64) -> String {
    let days = (secs / 86_400) as i64;
    let rem = secs % 86_400;
    let (h, m, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);

    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let year = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = if month <= 2 { year + 1 } else { year };

    format!("{year:04}-{month:02}-{day:02}T{h:02}:{m:02}:{s:02}Z")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_timestamps() {
        assert_eq!(iso8601_from_unix(0), "1970-01-01T00:00:00Z");
        assert_eq!(iso8601_from_unix(951_782_400), "2000-02-29T00:00:00Z");
        assert_eq!(iso8601_from_unix(1_754_006_399), "2025-07-31T23:59:59Z");
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = serde_json::json!({"alpha": 0.05, "input": "x.jsonl"});
        let b = serde_json::json!({"input": "x.jsonl", "alpha": 0.05});
        // Value maps are ordered, so key order in the literal is irrelevant.
        assert_eq!(digest_config(&a), digest_config(&b));
        let c = serde_json::json!({"alpha": 0.06, "input": "x.jsonl"});
        assert_ne!(digest_config(&a), digest_config(&c));
        assert_eq!(digest_config(&a).len(), 64);
    }
}
