//! Optimal transport with quadratic cost: primal solving, lifting couplings
//! to geodesics, and extraction of transport maps.
//!
//! The primal problem minimizes Σ π(x,y)·d²(x,y) over couplings π of two
//! probability measures. Plans are solved on the product of the marginals'
//! supports by a deterministic network simplex; the optimal value is W₂².
//! A plan lifts to a geodesic plan by sending each atom along the
//! lexicographically first geodesic between its endpoints, which preserves
//! the cost bitwise because a geodesic's stored length is the metric
//! distance of its endpoints.

mod hungarian;
mod simplex;

pub use hungarian::solve_assignment;
pub(crate) use simplex::{solve_transportation, TableauSolution};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Measure, MASS_TOL};
use crate::space::{enumerate_geodesics, DiscreteGeodesic, MetricSpace};

/// Masses at or below this are dropped from solved plans as pivoting dust.
pub const PLAN_PRUNE_TOL: f64 = 1e-12;

/// One atom of a coupling: mass moving from vertex `x` to vertex `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub x: usize,
    pub y: usize,
    pub mass: f64,
}

/// Sparse coupling of two measures on the same space, with quadratic cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    n: usize,
    entries: Vec<PlanEntry>,
    cost: f64,
    optimal: bool,
}

impl TransportPlan {
    /// Wraps explicit entries, computing the quadratic cost from the space.
    /// `optimal` should be claimed only for certified plans.
    pub fn from_entries(space: &MetricSpace, entries: Vec<PlanEntry>, optimal: bool) -> Result<Self> {
        let n = space.vertex_count();
        for e in &entries {
            if e.x >= n {
                return Err(Error::VertexOutOfRange { v: e.x, n });
            }
            if e.y >= n {
                return Err(Error::VertexOutOfRange { v: e.y, n });
            }
            if !e.mass.is_finite() || e.mass <= 0.0 {
                return Err(Error::BadMass { v: e.x, mass: e.mass });
            }
        }
        let mut entries = entries;
        entries.sort_by(|a, b| (a.x, a.y).cmp(&(b.x, b.y)));
        for pair in entries.windows(2) {
            if (pair[0].x, pair[0].y) == (pair[1].x, pair[1].y) {
                return Err(Error::DuplicateEdge { u: pair[0].x, v: pair[0].y });
            }
        }
        let cost = entries.iter().map(|e| e.mass * space.dist(e.x, e.y).powi(2)).sum();
        Ok(TransportPlan { n, entries, cost, optimal })
    }

    /// Entries sorted by (x, y).
    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    /// Σ mass · d²(x, y).
    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// Whether the solver certified dual feasibility for this plan.
    pub fn is_optimal(&self) -> bool {
        self.optimal
    }

    /// √cost; equals the 2-Wasserstein distance when the plan is optimal.
    pub fn wasserstein2(&self) -> f64 {
        self.cost.sqrt()
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }

    /// First marginal as a dense measure.
    pub fn source_marginal(&self) -> Measure {
        let mut masses = vec![0.0; self.n];
        for e in &self.entries {
            masses[e.x] += e.mass;
        }
        Measure::new(masses).expect("entry masses are positive and finite")
    }

    /// Second marginal as a dense measure.
    pub fn target_marginal(&self) -> Measure {
        let mut masses = vec![0.0; self.n];
        for e in &self.entries {
            masses[e.y] += e.mass;
        }
        Measure::new(masses).expect("entry masses are positive and finite")
    }

    /// Largest per-vertex deviation of the plan's marginals from (μ, ν).
    pub fn marginal_defect(&self, mu: &Measure, nu: &Measure) -> f64 {
        let src = self.source_marginal();
        let tgt = self.target_marginal();
        let mut worst: f64 = 0.0;
        for v in 0..self.n {
            worst = worst.max((src.mass(v) - mu.mass(v)).abs());
            worst = worst.max((tgt.mass(v) - nu.mass(v)).abs());
        }
        worst
    }
}

/// Node potentials of the solved transportation problem, on support indices.
#[derive(Debug, Clone)]
pub(crate) struct SolvedTransport {
    pub plan: TransportPlan,
    /// Source-support vertices in ascending order.
    pub sources: Vec<usize>,
    /// Potential per source, aligned with `sources`: u(x) + v(y) = d² on
    /// basic cells and u(x) + v(y) ≤ d² everywhere when optimal. The sink
    /// potential is not carried; the dual pipeline re-derives it by
    /// c-transform, which also certifies it.
    pub u: Vec<f64>,
}

/// Solves the Kantorovich problem with cost d² and also returns the
/// simplex node potentials for dual extraction.
pub(crate) fn solve_with_potentials(
    space: &MetricSpace,
    mu: &Measure,
    nu: &Measure,
) -> Result<SolvedTransport> {
    let n = space.vertex_count();
    mu.require_len(n)?;
    nu.require_len(n)?;
    let (tmu, tnu) = (mu.total(), nu.total());
    if (tmu - tnu).abs() > MASS_TOL {
        return Err(Error::UnequalTotals { mu: tmu, nu: tnu });
    }
    mu.require_probability()?;
    nu.require_probability()?;

    let sources = mu.support();
    let sinks = nu.support();
    let p = sources.len();
    let q = sinks.len();
    // Normalizing both sides to total 1 keeps the tableau balanced to within
    // a few ulps, so no marginal defect concentrates in the final cell.
    let a: Vec<f64> = sources.iter().map(|&x| mu.mass(x) / tmu).collect();
    let b: Vec<f64> = sinks.iter().map(|&y| nu.mass(y) / tnu).collect();
    let cost: Vec<f64> = sources
        .iter()
        .flat_map(|&x| sinks.iter().map(move |&y| (x, y)))
        .map(|(x, y)| space.dist(x, y).powi(2))
        .collect();

    let TableauSolution { cells, u, v, optimal } = solve_transportation(p, q, &cost, &a, &b)?;

    let entries: Vec<PlanEntry> = cells
        .iter()
        .filter(|&&(_, _, m)| m > PLAN_PRUNE_TOL)
        .map(|&(i, j, m)| PlanEntry { x: sources[i], y: sinks[j], mass: m })
        .collect();
    let plan_cost: f64 = entries.iter().map(|e| e.mass * space.dist(e.x, e.y).powi(2)).sum();
    // Strong duality at the tableau level: when the solver certifies
    // optimality, Σ a·u + Σ b·v must reproduce the primal cost up to
    // cancellation dust. The sink potential has no other consumer — the
    // dual pipeline re-derives ψ by c-transform — so it is checked here.
    debug_assert!(
        !optimal || {
            let dual: f64 = a.iter().zip(&u).map(|(a, u)| a * u).sum::<f64>()
                + b.iter().zip(&v).map(|(b, v)| b * v).sum::<f64>();
            (dual - plan_cost).abs() <= 1e-7 * (1.0 + plan_cost)
        },
        "tableau potentials disagree with the certified plan cost"
    );
    let plan = TransportPlan { n, entries, cost: plan_cost, optimal };
    Ok(SolvedTransport { plan, sources, u })
}

/// Optimal coupling of μ and ν for the quadratic cost. Deterministic: the
/// solver's pivot rule and tie-breaking are fixed.
pub fn solve_kantorovich(space: &MetricSpace, mu: &Measure, nu: &Measure) -> Result<TransportPlan> {
    Ok(solve_with_potentials(space, mu, nu)?.plan)
}

/// Coupling supported on geodesics: each entry carries mass along one
/// discrete geodesic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPlan {
    entries: Vec<(DiscreteGeodesic, f64)>,
}

impl GeodesicPlan {
    pub fn from_entries(entries: Vec<(DiscreteGeodesic, f64)>) -> Result<Self> {
        for (g, m) in &entries {
            if !m.is_finite() || *m <= 0.0 {
                return Err(Error::BadMass { v: g.start(), mass: *m });
            }
        }
        Ok(GeodesicPlan { entries })
    }

    pub fn entries(&self) -> &[(DiscreteGeodesic, f64)] {
        &self.entries
    }

    /// Σ mass · length², using each geodesic's stored length.
    pub fn cost(&self) -> f64 {
        self.entries.iter().map(|(g, m)| m * g.length().powi(2)).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|(_, m)| m).sum()
    }

    /// Projects each geodesic to its endpoint pair, merging duplicates;
    /// recovers the transport plan the lift was built from.
    pub fn project_endpoints(&self, space: &MetricSpace) -> Result<TransportPlan> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (g, m) in &self.entries {
            *merged.entry((g.start(), g.end())).or_insert(0.0) += m;
        }
        TransportPlan::from_entries(
            space,
            merged
                .into_iter()
                .map(|((x, y), mass)| PlanEntry { x, y, mass })
                .collect(),
            false,
        )
    }

    /// Push-forward of the plan's mass through evaluation at t = 0 or t = 1.
    pub fn endpoint_marginal(&self, n: usize, end: bool) -> Result<Measure> {
        let mut masses = vec![0.0; n];
        for (g, m) in &self.entries {
            let v = if end { g.end() } else { g.start() };
            if v >= n {
                return Err(Error::VertexOutOfRange { v, n });
            }
            masses[v] += m;
        }
        Measure::new(masses)
    }
}

/// Lifts a coupling to geodesics: each entry rides the lexicographically
/// first geodesic between its endpoints, so the lift is deterministic and
/// `lifted.cost() == plan.cost()` exactly.
pub fn lift_to_geodesic_plan(plan: &TransportPlan, space: &MetricSpace) -> Result<GeodesicPlan> {
    let mut entries = Vec::with_capacity(plan.entries().len());
    for e in plan.entries() {
        let mut family = enumerate_geodesics(space, e.x, e.y, 1)?;
        entries.push((family.geodesics.remove(0), e.mass));
    }
    GeodesicPlan::from_entries(entries)
}

/// Either a transport map on the plan's source support, or a report of the
/// sources whose conditional destination is split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MapOrSplit {
    Map(BTreeMap<usize, usize>),
    Split(SplitReport),
}

/// Sources with non-Dirac conditional destinations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    /// Destination distribution of each split source, sorted by destination.
    pub rows: BTreeMap<usize, Vec<(usize, f64)>>,
    /// Σ over sources of (row mass − modal destination mass), over total.
    pub split_mass_fraction: f64,
}

/// Extracts the modal-destination map if every source sends at least a
/// (1 − tol) fraction of its mass to a single destination; otherwise reports
/// the split. Modal ties break to the smaller destination vertex.
pub fn extract_map(plan: &TransportPlan, tol: f64) -> Result<MapOrSplit> {
    if !(0.0..1.0).contains(&tol) {
        return Err(Error::InvalidParameter { reason: format!("tol {tol} outside [0,1)") });
    }
    let mut rows: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for e in plan.entries() {
        rows.entry(e.x).or_default().push((e.y, e.mass));
    }
    let total: f64 = plan.total_mass();
    let mut map = BTreeMap::new();
    let mut split_rows = BTreeMap::new();
    let mut split_mass = 0.0;
    let mut all_modal = true;
    for (&x, dests) in &rows {
        let row_mass: f64 = dests.iter().map(|(_, m)| m).sum();
        let &(modal_y, modal_mass) = dests
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
            .expect("plan rows are nonempty");
        map.insert(x, modal_y);
        split_mass += row_mass - modal_mass;
        if modal_mass < (1.0 - tol) * row_mass {
            all_modal = false;
        }
        if dests.len() > 1 {
            split_rows.insert(x, dests.clone());
        }
    }
    if all_modal {
        Ok(MapOrSplit::Map(map))
    } else {
        Ok(MapOrSplit::Split(SplitReport {
            rows: split_rows,
            split_mass_fraction: split_mass / total,
        }))
    }
}

/// Result of an exhaustive cyclical-monotonicity check over the support of a
/// plan: for every cycle (x₁,y₁),…,(x_k,y_k) of length k ≤ max_len,
/// Σ d²(x_i,y_i) ≤ Σ d²(x_i,y_{i+1}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicalMonotonicityReport {
    pub passes: bool,
    /// Largest Σd²(x_i,y_i) − Σd²(x_i,y_{i+1}) found (≤ 0 when monotone).
    pub worst_excess: f64,
    /// A cycle achieving the worst excess, when it is a violation.
    pub violation: Option<Vec<(usize, usize)>>,
    pub cycles_checked: usize,
}

/// Checks all cycles of support pairs up to `max_len`. Exhaustive: intended
/// for supports of a few dozen entries.
pub fn check_cyclical_monotonicity(
    space: &MetricSpace,
    plan: &TransportPlan,
    max_len: usize,
) -> Result<CyclicalMonotonicityReport> {
    if max_len < 2 {
        return Err(Error::InvalidParameter { reason: "cycle length must be at least 2".into() });
    }
    let pairs: Vec<(usize, usize)> = plan.entries().iter().map(|e| (e.x, e.y)).collect();
    let cost = |x: usize, y: usize| space.dist(x, y).powi(2);
    let mut worst = f64::NEG_INFINITY;
    let mut violation = None;
    let mut cycles = 0usize;

    // Ordered tuples of distinct pair indices with the smallest index first
    // enumerate each cyclic sequence exactly once (both orientations appear,
    // which is required: the reverse cycle tests a different comparison).
    let m = pairs.len();
    let mut stack: Vec<usize> = Vec::new();
    let mut used = vec![false; m];
    fn rec(
        pairs: &[(usize, usize)],
        cost: &impl Fn(usize, usize) -> f64,
        k: usize,
        stack: &mut Vec<usize>,
        used: &mut Vec<bool>,
        worst: &mut f64,
        violation: &mut Option<Vec<(usize, usize)>>,
        cycles: &mut usize,
    ) {
        if stack.len() == k {
            *cycles += 1;
            let mut own = 0.0;
            let mut shifted = 0.0;
            for (pos, &idx) in stack.iter().enumerate() {
                let (x, y) = pairs[idx];
                let (_, y_next) = pairs[stack[(pos + 1) % k]];
                own += cost(x, y);
                shifted += cost(x, y_next);
            }
            let excess = own - shifted;
            if excess > *worst {
                *worst = excess;
                if excess > 1e-9 * (1.0 + own.abs()) {
                    *violation = Some(stack.iter().map(|&i| pairs[i]).collect());
                }
            }
            return;
        }
        let floor = stack.first().copied().unwrap_or(0);
        let start = if stack.is_empty() { 0 } else { floor + 1 };
        for idx in start..pairs.len() {
            if !used[idx] {
                used[idx] = true;
                stack.push(idx);
                rec(pairs, cost, k, stack, used, worst, violation, cycles);
                stack.pop();
                used[idx] = false;
            }
        }
    }
    for k in 2..=max_len.min(m) {
        // First element is forced to be the minimum of the tuple: iterate the
        // anchor explicitly, then extend with larger indices only... except
        // the interior order must be free. Anchoring is handled inside rec
        // via `floor`.
        rec(&pairs, &cost, k, &mut stack, &mut used, &mut worst, &mut violation, &mut cycles);
    }
    if m < 2 {
        worst = 0.0;
    }
    let passes = violation.is_none();
    Ok(CyclicalMonotonicityReport { passes, worst_excess: worst, violation, cycles_checked: cycles })
}
