//! Persistence: declarative space and measure specifications, JSON and CSV
//! round-trips for spaces and plans, and a small structural validator for the
//! report envelope.
//!
//! Design constraints, in order of importance:
//!
//! - **Round trips are exact.** Distances, weights, and masses are written in
//!   shortest-round-trip decimal form (the `Display`/`serde_json` float
//!   encoding), so reading a file back reproduces the original `f64`s bit for
//!   bit. Saved spaces carry their full distance matrix and are rebuilt with
//!   [`MetricSpace::from_matrix`], not re-derived by shortest paths, so a
//!   space whose metric was carried from elsewhere (a rescaled ball) survives
//!   unchanged.
//! - **Files are deterministic.** All maps are ordered (`BTreeMap`), plan
//!   entries are kept in their canonical (x, y) order, and JSON is emitted in
//!   declaration order with a trailing newline.
//! - **Errors carry positions.** CSV loaders report the offending line;
//!   JSON and filesystem errors carry the path.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::gallery::{
    build_cycle, build_dyadic_arc_space, build_grid, build_segment, build_tripod,
};
use crate::space::{Edge, MetricSpace};
use crate::measure::Measure;
use crate::transport::{PlanEntry, TransportPlan};

/// Structural schema for the experiment report envelope, shipped with the
/// crate. [`validate_report_value`] checks emitted reports against it.
pub const REPORT_SCHEMA: &str = include_str!("../schemas/report.schema.json");

fn default_edge_weight() -> f64 {
    1.0
}

/// Declarative description of a space, as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    /// Path graph with `edges` equal edges of weight `edge_weight`
    /// (default 1), so total length `edges · edge_weight`.
    Segment {
        edges: usize,
        #[serde(default = "default_edge_weight")]
        edge_weight: f64,
    },
    /// `width × height` unit grid.
    Grid { width: usize, height: usize },
    /// Three unit-edge legs of `leg` edges glued at a center.
    Tripod { leg: usize },
    /// Unit-edge cycle on `vertices` vertices.
    Cycle { vertices: usize },
    /// Dyadic arc space at the given depth and per-arc resolution.
    DyadicArcs { depth: usize, resolution: usize },
    /// Arbitrary connected weighted graph. Label keys are vertex indices;
    /// JSON object keys are strings, so they are parsed in [`SpaceSpec::build`].
    Graph {
        vertices: usize,
        edges: Vec<(usize, usize, f64)>,
        #[serde(default)]
        labels: BTreeMap<String, String>,
    },
    /// Explicit distance matrix plus the edges known to exist. The matrix is
    /// authoritative; edges only describe adjacency.
    Matrix {
        distances: Vec<Vec<f64>>,
        #[serde(default)]
        edges: Vec<(usize, usize, f64)>,
        #[serde(default)]
        labels: BTreeMap<String, String>,
    },
}

fn parse_labels(labels: &BTreeMap<String, String>) -> Result<BTreeMap<usize, String>> {
    labels
        .iter()
        .map(|(k, v)| {
            let vertex = k.parse::<usize>().map_err(|_| Error::InvalidParameter {
                reason: format!("label key {k:?} is not a vertex index"),
            })?;
            Ok((vertex, v.clone()))
        })
        .collect()
}

impl SpaceSpec {
    pub fn build(&self) -> Result<MetricSpace> {
        match self {
            SpaceSpec::Segment { edges, edge_weight } => {
                if *edges == 0 {
                    return Err(Error::InvalidParameter {
                        reason: "segment needs at least one edge".into(),
                    });
                }
                if !edge_weight.is_finite() || *edge_weight <= 0.0 {
                    return Err(Error::InvalidParameter {
                        reason: format!("segment edge weight {edge_weight} must be positive"),
                    });
                }
                if *edge_weight == 1.0 {
                    return build_segment(*edges);
                }
                let list: Vec<_> = (0..*edges).map(|i| (i, i + 1, *edge_weight)).collect();
                let labels = BTreeMap::from([
                    (0, "left".to_string()),
                    (*edges, "right".to_string()),
                ]);
                MetricSpace::build(*edges + 1, &list, labels)
            }
            SpaceSpec::Grid { width, height } => build_grid(*width, *height),
            SpaceSpec::Tripod { leg } => build_tripod(*leg),
            SpaceSpec::Cycle { vertices } => build_cycle(*vertices),
            SpaceSpec::DyadicArcs { depth, resolution } => {
                Ok(build_dyadic_arc_space(*depth, *resolution)?.space)
            }
            SpaceSpec::Graph { vertices, edges, labels } => {
                MetricSpace::build(*vertices, edges, parse_labels(labels)?)
            }
            SpaceSpec::Matrix { distances, edges, labels } => {
                let n = distances.len();
                let mut flat = Vec::with_capacity(n * n);
                for (i, row) in distances.iter().enumerate() {
                    if row.len() != n {
                        return Err(Error::NotAMetric {
                            reason: format!("row {i} has {} entries, expected {n}", row.len()),
                        });
                    }
                    flat.extend_from_slice(row);
                }
                MetricSpace::from_matrix(flat, n, edges, parse_labels(labels)?)
            }
        }
    }
}

/// Declarative description of a measure on a space with `n` vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// Unit mass at one vertex.
    Dirac { vertex: usize },
    /// Uniform probability on all vertices.
    Uniform,
    /// Uniform probability on the inclusive vertex range `start..=end`.
    UniformRange { start: usize, end: usize },
    /// Explicit masses, one per vertex. Normalized to a probability measure
    /// unless `normalize` is set to false (reference measures need not be
    /// probabilities).
    Explicit {
        masses: Vec<f64>,
        #[serde(default = "default_normalize")]
        normalize: bool,
    },
}

fn default_normalize() -> bool {
    true
}

impl MeasureSpec {
    pub fn realize(&self, n: usize) -> Result<Measure> {
        match self {
            MeasureSpec::Dirac { vertex } => Measure::dirac(n, *vertex),
            MeasureSpec::Uniform => {
                if n == 0 {
                    return Err(Error::EmptySpace);
                }
                Ok(Measure::uniform(n))
            }
            MeasureSpec::UniformRange { start, end } => {
                if start > end {
                    return Err(Error::InvalidParameter {
                        reason: format!("empty vertex range {start}..={end}"),
                    });
                }
                if *end >= n {
                    return Err(Error::VertexOutOfRange { v: *end, n });
                }
                let count = (end - start + 1) as f64;
                let mut masses = vec![0.0; n];
                for m in &mut masses[*start..=*end] {
                    *m = 1.0 / count;
                }
                Measure::new(masses)
            }
            MeasureSpec::Explicit { masses, normalize } => {
                let mu = Measure::new(masses.clone())?;
                mu.require_len(n)?;
                if *normalize {
                    mu.normalized()
                } else {
                    Ok(mu)
                }
            }
        }
    }
}

/// Serialized form of a [`MetricSpace`]: the full distance matrix plus the
/// edge list and labels. Reading rebuilds via [`MetricSpace::from_matrix`],
/// so every stored distance survives bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavedSpace {
    pub vertices: usize,
    pub edges: Vec<Edge>,
    pub labels: BTreeMap<usize, String>,
    pub distances: Vec<Vec<f64>>,
}

impl SavedSpace {
    pub fn from_space(space: &MetricSpace) -> Self {
        let n = space.vertex_count();
        let distances = (0..n)
            .map(|i| (0..n).map(|j| space.dist(i, j)).collect())
            .collect();
        SavedSpace {
            vertices: n,
            edges: space.edges().to_vec(),
            labels: space.labels().clone(),
            distances,
        }
    }

    pub fn into_space(self) -> Result<MetricSpace> {
        let n = self.vertices;
        if self.distances.len() != n {
            return Err(Error::NotAMetric {
                reason: format!("{} matrix rows for {} vertices", self.distances.len(), n),
            });
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in self.distances.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotAMetric {
                    reason: format!("row {i} has {} entries, expected {n}", row.len()),
                });
            }
            flat.extend_from_slice(row);
        }
        let edges: Vec<_> = self.edges.iter().map(|e| (e.u, e.v, e.w)).collect();
        MetricSpace::from_matrix(flat, n, &edges, self.labels)
    }
}

/// Serialized form of a [`TransportPlan`]. The cost is recomputed on read
/// from the same entries in the same order, so it round-trips exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavedPlan {
    pub entries: Vec<PlanEntry>,
    pub optimal: bool,
}

impl SavedPlan {
    pub fn from_plan(plan: &TransportPlan) -> Self {
        SavedPlan { entries: plan.entries().to_vec(), optimal: plan.is_optimal() }
    }

    pub fn into_plan(self, space: &MetricSpace) -> Result<TransportPlan> {
        TransportPlan::from_entries(space, self.entries, self.optimal)
    }
}

/// Reads any JSON-serializable value, attributing parse errors to the path.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text)
        .map_err(|source| Error::Json { path: path.display().to_string(), source })
}

/// Writes a value as pretty-printed JSON with a trailing newline. Output is
/// deterministic: struct fields in declaration order, maps in key order.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| Error::Json { path: path.display().to_string(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn write_space(space: &MetricSpace, path: &Path) -> Result<()> {
    write_json(&SavedSpace::from_space(space), path)
}

pub fn read_space(path: &Path) -> Result<MetricSpace> {
    read_json::<SavedSpace>(path)?.into_space()
}

pub fn write_plan(plan: &TransportPlan, path: &Path) -> Result<()> {
    write_json(&SavedPlan::from_plan(plan), path)
}

pub fn read_plan(path: &Path, space: &MetricSpace) -> Result<TransportPlan> {
    read_json::<SavedPlan>(path)?.into_plan(space)
}

const PLAN_CSV_HEADER: &str = "x,y,mass";

/// Writes a plan as `x,y,mass` CSV. Masses use shortest-round-trip decimal
/// form, so the file parses back to the same floats.
pub fn write_plan_csv(plan: &TransportPlan, path: &Path) -> Result<()> {
    let mut text = String::from(PLAN_CSV_HEADER);
    text.push('\n');
    for e in plan.entries() {
        text.push_str(&format!("{},{},{}\n", e.x, e.y, e.mass));
    }
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Reads a plan written by [`write_plan_csv`]. `optimal` must be supplied by
/// the caller; the CSV stores only the coupling.
pub fn read_plan_csv(path: &Path, space: &MetricSpace, optimal: bool) -> Result<TransportPlan> {
    let text = fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_plan_csv(&text, space, optimal)
}

fn parse_plan_csv(text: &str, space: &MetricSpace, optimal: bool) -> Result<TransportPlan> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == PLAN_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                what: "plan csv",
                line: 1,
                reason: format!("expected header {PLAN_CSV_HEADER:?}, found {header:?}"),
            });
        }
        None => {
            return Err(Error::Parse {
                what: "plan csv",
                line: 1,
                reason: "file is empty".into(),
            });
        }
    }
    let mut entries = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let row = raw.trim_end();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                what: "plan csv",
                line,
                reason: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let x = fields[0].trim().parse::<usize>().map_err(|e| Error::Parse {
            what: "plan csv",
            line,
            reason: format!("bad source vertex {:?}: {e}", fields[0]),
        })?;
        let y = fields[1].trim().parse::<usize>().map_err(|e| Error::Parse {
            what: "plan csv",
            line,
            reason: format!("bad target vertex {:?}: {e}", fields[1]),
        })?;
        let mass = fields[2].trim().parse::<f64>().map_err(|e| Error::Parse {
            what: "plan csv",
            line,
            reason: format!("bad mass {:?}: {e}", fields[2]),
        })?;
        entries.push(PlanEntry { x, y, mass });
    }
    TransportPlan::from_entries(space, entries, optimal)
}

/// Validates `value` against a structural schema supporting the subset of
/// JSON Schema this crate ships: `type` (string or union array), `properties`,
/// `required`, `items`, `enum`, and `additionalProperties` (boolean or
/// schema). Returns one message per violation; empty means valid.
pub fn validate_schema(schema: &Value, value: &Value) -> Vec<String> {
    let mut errors = Vec::new();
    validate_node(schema, value, "$", &mut errors);
    errors
}

/// Validates a report JSON value against the shipped [`REPORT_SCHEMA`].
pub fn validate_report_value(value: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA)
        .expect("shipped report schema is valid JSON");
    validate_schema(&schema, value)
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.as_i64().is_some() || n.as_u64().is_some() => "integer",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "integer" => v.as_i64().is_some() || v.as_u64().is_some(),
        // An integer literal is also a number.
        "number" => v.is_number(),
        _ => false,
    }
}

fn validate_node(schema: &Value, value: &Value, path: &str, errors: &mut Vec<String>) {
    let Some(obj) = schema.as_object() else {
        errors.push(format!("{path}: schema node is not an object"));
        return;
    };

    if let Some(ty) = obj.get("type") {
        let names: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list.iter().filter_map(Value::as_str).collect(),
            _ => Vec::new(),
        };
        if !names.iter().any(|name| type_matches(name, value)) {
            errors.push(format!(
                "{path}: expected type {}, found {}",
                names.join(" or "),
                type_name(value)
            ));
            return;
        }
    }

    if let Some(options) = obj.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            errors.push(format!("{path}: value {value} not in enum"));
        }
    }

    if let Some(fields) = value.as_object() {
        if let Some(required) = obj.get("required").and_then(Value::as_array) {
            for name in required.iter().filter_map(Value::as_str) {
                if !fields.contains_key(name) {
                    errors.push(format!("{path}: missing required field {name:?}"));
                }
            }
        }
        let properties = obj.get("properties").and_then(Value::as_object);
        for (name, field) in fields {
            let child_path = format!("{path}.{name}");
            if let Some(prop_schema) = properties.and_then(|p| p.get(name)) {
                validate_node(prop_schema, field, &child_path, errors);
            } else {
                match obj.get("additionalProperties") {
                    Some(Value::Bool(false)) => {
                        errors.push(format!("{path}: unexpected field {name:?}"));
                    }
                    Some(extra) if extra.is_object() => {
                        validate_node(extra, field, &child_path, errors);
                    }
                    _ => {}
                }
            }
        }
    }

    if let (Some(items), Some(list)) = (obj.get("items"), value.as_array()) {
        for (i, element) in list.iter().enumerate() {
            validate_node(items, element, &format!("{path}[{i}]"), errors);
        }
    }
}
