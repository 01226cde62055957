//! Report envelope shared by all experiments.
//!
//! A report is a flat, serialization-friendly record: named invariant checks
//! (each `value ≤ threshold`), named scalars, free-form notes, branching
//! witnesses, and long-format numeric tables. Emission is deterministic —
//! ordered maps, declaration-order JSON, shortest-round-trip floats — so a
//! rerun with the same config and seed reproduces the output byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::branching::{BranchWitness, WitnessKind};
use crate::error::{Error, Result};

/// One named check. Passing means `value ≤ threshold`; every check folds
/// into the report's overall `passed` flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Long-format numeric table: named columns, one row per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Serializable branching witness: geodesics flattened to vertex paths, the
/// dyadic ratio ladder split into aligned times and (possibly absent) ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub kind: String,
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub agree_time: f64,
    pub split_times: Vec<f64>,
    pub ratio_times: Vec<f64>,
    pub ratios: Vec<Option<f64>>,
}

impl From<&BranchWitness> for WitnessRecord {
    fn from(w: &BranchWitness) -> Self {
        WitnessRecord {
            kind: match w.kind {
                WitnessKind::InteriorAgreement => "interior_agreement".to_string(),
                WitnessKind::SharedEndpoint => "shared_endpoint".to_string(),
            },
            first: w.first.vertices().to_vec(),
            second: w.second.vertices().to_vec(),
            agree_time: w.agree_time,
            split_times: w.split_times.clone(),
            ratio_times: w.ratio_ladder.iter().map(|r| r.time).collect(),
            ratios: w.ratio_ladder.iter().map(|r| r.ratio).collect(),
        }
    }
}

/// Outcome of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    /// Conjunction of all invariant checks recorded so far.
    pub passed: bool,
    pub invariants: Vec<InvariantCheck>,
    pub scalars: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub witnesses: Vec<WitnessRecord>,
    pub tables: BTreeMap<String, Table>,
}

impl Report {
    pub fn new(experiment: &str, seed: u64) -> Self {
        Report {
            experiment: experiment.to_string(),
            seed,
            passed: true,
            invariants: Vec::new(),
            scalars: BTreeMap::new(),
            notes: Vec::new(),
            witnesses: Vec::new(),
            tables: BTreeMap::new(),
        }
    }

    /// Records a check and folds it into `passed`. Returns whether it passed.
    pub fn check(&mut self, name: &str, value: f64, threshold: f64) -> bool {
        debug_assert!(value.is_finite(), "non-finite invariant value for {name}");
        let passed = value <= threshold;
        self.invariants.push(InvariantCheck {
            name: name.to_string(),
            value,
            threshold,
            passed,
        });
        self.passed &= passed;
        passed
    }

    pub fn scalar(&mut self, name: &str, value: f64) {
        debug_assert!(value.is_finite(), "non-finite scalar for {name}");
        self.scalars.insert(name.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn record_witnesses(&mut self, witnesses: &[BranchWitness]) {
        self.witnesses.extend(witnesses.iter().map(WitnessRecord::from));
    }

    pub fn table(&mut self, name: &str, columns: &[&str], rows: Vec<Vec<f64>>) {
        for row in &rows {
            debug_assert_eq!(row.len(), columns.len(), "ragged row in table {name}");
            debug_assert!(row.iter().all(|v| v.is_finite()), "non-finite cell in table {name}");
        }
        self.tables.insert(
            name.to_string(),
            Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows },
        );
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Writes a report under `dir`: a JSON envelope (validated against the
/// shipped schema before touching disk), an invariants CSV, a scalars CSV,
/// and one CSV per table. Returns the written paths in sorted order.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    let value = serde_json::to_value(report)
        .map_err(|source| Error::Json { path: dir.display().to_string(), source })?;
    let schema_errors = crate::io::validate_report_value(&value);
    if !schema_errors.is_empty() {
        return Err(Error::InvalidParameter {
            reason: format!("report failed schema validation: {}", schema_errors.join("; ")),
        });
    }

    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    let stem = &report.experiment;
    let mut written = Vec::new();

    let json_path = dir.join(format!("{stem}_report.json"));
    crate::io::write_json(report, &json_path)?;
    written.push(json_path);

    let mut text = String::from("name,value,threshold,passed\n");
    for c in &report.invariants {
        text.push_str(&format!("{},{},{},{}\n", c.name, c.value, c.threshold, c.passed));
    }
    let inv_path = dir.join(format!("{stem}_invariants.csv"));
    write_text(&inv_path, &text)?;
    written.push(inv_path);

    let mut text = String::from("name,value\n");
    for (name, value) in &report.scalars {
        text.push_str(&format!("{name},{value}\n"));
    }
    let scalar_path = dir.join(format!("{stem}_scalars.csv"));
    write_text(&scalar_path, &text)?;
    written.push(scalar_path);

    for (name, table) in &report.tables {
        let mut text = table.columns.join(",");
        text.push('\n');
        for row in &table.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        let table_path = dir.join(format!("{stem}_{name}.csv"));
        write_text(&table_path, &text)?;
        written.push(table_path);
    }

    written.sort();
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_folds_into_passed() {
        let mut r = Report::new("probe", 0);
        assert!(r.check("fine", 0.5, 1.0));
        assert!(r.passed);
        assert!(!r.check("broken", 2.0, 1.0));
        assert!(!r.passed);
        assert!(r.check("fine_again", 0.0, 0.0));
        assert!(!r.passed, "a later pass must not clear an earlier failure");
    }

    #[test]
    fn emitted_files_are_deterministic_and_schema_valid() {
        let mut r = Report::new("probe", 9);
        r.check("gap", 1e-9, 1e-7);
        r.scalar("cost", 0.25);
        r.scalar("answer", 42.0);
        r.note("one note");
        r.table("profile", &["t", "value"], vec![vec![0.5, 1.0 / 3.0]]);

        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let paths_a = emit_report(&r, dir_a.path()).unwrap();
        let paths_b = emit_report(&r, dir_b.path()).unwrap();
        assert_eq!(paths_a.len(), 4);
        assert_eq!(paths_a.len(), paths_b.len());
        for (a, b) in paths_a.iter().zip(&paths_b) {
            assert_eq!(a.file_name(), b.file_name());
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap(), "{a:?}");
        }

        let json = fs::read_to_string(&paths_a[2]).unwrap();
        assert!(json.ends_with('\n'));
        let table_csv = fs::read_to_string(dir_a.path().join("probe_profile.csv")).unwrap();
        assert_eq!(table_csv, "t,value\n0.5,0.3333333333333333\n");
        let cell: f64 = "0.3333333333333333".parse().unwrap();
        assert_eq!(cell.to_bits(), (1.0_f64 / 3.0).to_bits());
    }

    #[test]
    fn table_csv_filenames_follow_the_experiment_stem() {
        let mut r = Report::new("stem", 0);
        r.table("alpha", &["a"], vec![]);
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&r, dir.path()).unwrap();
        let names: Vec<_> = paths.iter().map(|p| p.file_name().unwrap().to_str().unwrap()).collect();
        assert_eq!(
            names,
            ["stem_alpha.csv", "stem_invariants.csv", "stem_report.json", "stem_scalars.csv"]
        );
    }
}
