//! Experiment reports: named quantities, margins, verdicts, and the
//! canonical JSON form used for golden-run regression.
//!
//! Reports must be byte-identical across re-runs with the same config and
//! seed, regardless of thread count.  Quantities and tolerances live in
//! sorted maps, inputs are a sorted JSON value, and the wall-clock runtime is
//! deliberately excluded from the serialized form (it is the one field that
//! cannot be reproducible).

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub name: String,
    pub verdict: Verdict,
    pub seed: u64,
    /// The full configuration record that produced this report.
    pub inputs: serde_json::Value,
    pub quantities: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    /// Wall-clock runtime; not serialized (see module docs).
    #[serde(skip, default)]
    pub runtime_ms: u64,
}

impl ExperimentReport {
    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn canonical_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// A radial or parametric profile emitted alongside a report, for plotting.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub abscissa: String,
    pub ordinate: String,
    pub points: Vec<(f64, f64)>,
}

impl Profile {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{}\n", self.abscissa, self.ordinate);
        for (x, y) in &self.points {
            out.push_str(&format!("{x:.17e},{y:.17e}\n"));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub profile: Option<Profile>,
}

/// Verdict, named quantities and tolerances produced by an experiment body;
/// the surrounding runner attaches name, seed, inputs and runtime.
#[derive(Clone, Debug, Default)]
pub struct ExperimentCore {
    pub quantities: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub margins: Vec<(String, f64, f64)>,
    pub inconclusive_reason: Option<String>,
    pub profile: Option<Profile>,
}

impl ExperimentCore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn quantity(&mut self, name: &str, value: f64) {
        self.quantities.insert(name.to_string(), value);
    }

    pub fn tolerance(&mut self, name: &str, value: f64) {
        self.tolerances.insert(name.to_string(), value);
    }

    /// Registers a margin that must be >= -tol for the verdict to hold.
    /// The value is also recorded as a quantity.
    pub fn margin(&mut self, name: &str, value: f64, tol: f64) {
        self.quantities.insert(name.to_string(), value);
        self.margins.push((name.to_string(), value, tol));
    }

    pub fn inconclusive(&mut self, reason: &str) {
        self.inconclusive_reason = Some(reason.to_string());
    }

    /// holds when every margin clears its tolerance; fails when one is
    /// violated; a registered inconclusive reason overrides both.
    pub fn verdict(&self) -> Verdict {
        if self.inconclusive_reason.is_some() {
            return Verdict::Inconclusive;
        }
        if self
            .margins
            .iter()
            .any(|(_, value, tol)| !value.is_finite() || *value < -tol)
        {
            Verdict::Fails
        } else {
            Verdict::Holds
        }
    }
}

/// Assembles the final report.  NaN or infinite quantities are replaced by
/// an `<name>_undefined` flag so the JSON stays round-trippable.
pub fn assemble(
    name: &str,
    seed: u64,
    inputs: serde_json::Value,
    core: ExperimentCore,
    started: Instant,
) -> RunOutput {
    let verdict = core.verdict();
    let mut quantities = BTreeMap::new();
    for (k, v) in core.quantities {
        if v.is_finite() {
            quantities.insert(k, v);
        } else {
            quantities.insert(format!("{k}_undefined"), 1.0);
        }
    }
    if let Some(reason) = &core.inconclusive_reason {
        quantities.insert(format!("inconclusive_{}", slug(reason)), 1.0);
    }
    RunOutput {
        report: ExperimentReport {
            schema_version: 1,
            name: name.to_string(),
            verdict,
            seed,
            inputs,
            quantities,
            tolerances: core.tolerances,
            runtime_ms: started.elapsed().as_millis() as u64,
        },
        profile: core.profile,
    }
}

fn slug(reason: &str) -> String {
    reason
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect::<String>()
        .split('_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_logic() {
        let mut core = ExperimentCore::new();
        core.margin("a", 0.5, 1e-6);
        core.margin("b", -1e-9, 1e-6);
        assert_eq!(core.verdict(), Verdict::Holds);
        core.margin("c", -1.0, 1e-6);
        assert_eq!(core.verdict(), Verdict::Fails);
        core.inconclusive("precondition failed");
        assert_eq!(core.verdict(), Verdict::Inconclusive);
    }

    #[test]
    fn report_json_round_trips_and_skips_runtime() {
        let mut core = ExperimentCore::new();
        core.quantity("value", 1.25);
        core.tolerance("tol", 1e-6);
        let out = assemble(
            "demo",
            42,
            serde_json::json!({"n": 2}),
            core,
            Instant::now(),
        );
        let json = out.report.canonical_json().unwrap();
        assert!(!json.contains("runtime"));
        let back: ExperimentReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.name, "demo");
        assert_eq!(back.seed, 42);
        assert_eq!(back.quantities["value"], 1.25);
        assert_eq!(back.runtime_ms, 0);
    }

    #[test]
    fn non_finite_quantities_become_flags() {
        let mut core = ExperimentCore::new();
        core.quantity("ratio", f64::NAN);
        let out = assemble("demo", 0, serde_json::Value::Null, core, Instant::now());
        assert!(out.report.quantities.contains_key("ratio_undefined"));
        assert!(out.report.canonical_json().is_ok());
    }

    #[test]
    fn profile_csv_format() {
        let p = Profile {
            abscissa: "radius".into(),
            ordinate: "value".into(),
            points: vec![(1.0, 2.0), (2.0, 0.5)],
        };
        let csv = p.to_csv();
        assert!(csv.starts_with("radius,value\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
