//! A gallery of benchmark spaces: segments, grids, tripods, cycles, and a
//! dyadic arc space on which slope notions genuinely disagree.
//!
//! The dyadic arc space refines the unit segment. Its base consists of the
//! points k·2⁻ᴺ joined by edges of weight 2·2⁻ᴺ; for every level n = 1…N
//! and every k < 2ⁿ an arc of length Lₙ = (2 − 2⁻ⁿ)·2⁻ⁿ is glued between
//! the base points k·2⁻ⁿ and (k+1)·2⁻ⁿ, discretized into M equal edges.
//! One coarse arc is shorter than two finer ones (Lₙ = 2·Lₙ₊₁ − 2⁻²ⁿ⁻¹
//! < 2·Lₙ₊₁) and the finest arc undercuts the base edge it parallels by
//! exactly 2⁻²ᴺ, so shortest paths ride the arcs and never the base.
//!
//! The function f is the coordinate on the base and dips on each arc: in
//! arc time t it falls with slope −2·2⁻ⁿ until t = ½, reaching
//! (k − 1)·2⁻ⁿ, then climbs with slope +4·2⁻ⁿ. Every departure from a
//! base vertex strictly decreases f, so the slope of f along geodesics
//! vanishes at every base vertex while f still climbs from 0 to 1 along
//! the base path of length 2 — the slope along geodesics is not an upper
//! gradient along arbitrary curves, and the inequality chain between the
//! three slope notions is strict.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slopes::{
    check_upper_gradient_along_geodesics, compute_slope_report, ScaleLadder, UpperGradientCheck,
    DEFAULT_CURVE_BUDGET, DEFAULT_GEODESIC_CAP, DEFAULT_HOP_HORIZON,
};
use crate::space::{curve_length, enumerate_geodesics, MetricSpace};

/// Unit-edge path with `n_edges` edges; endpoints labeled.
pub fn build_segment(n_edges: usize) -> Result<MetricSpace> {
    if n_edges == 0 {
        return Err(Error::InvalidParameter { reason: "segment needs at least one edge".into() });
    }
    let edges: Vec<(usize, usize, f64)> = (0..n_edges).map(|i| (i, i + 1, 1.0)).collect();
    let labels = BTreeMap::from([(0, "left".to_string()), (n_edges, "right".to_string())]);
    MetricSpace::build(n_edges + 1, &edges, labels)
}

/// w × h unit-edge lattice; vertex (x, y) has index y·w + x. A 1 × 1 grid
/// is the one-point space; 2 × 2 is the 4-cycle.
pub fn build_grid(w: usize, h: usize) -> Result<MetricSpace> {
    if w == 0 || h == 0 {
        return Err(Error::InvalidParameter { reason: format!("grid sides must be >= 1, got {w} x {h}") });
    }
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = y * w + x;
            if x + 1 < w {
                edges.push((v, v + 1, 1.0));
            }
            if y + 1 < h {
                edges.push((v, v + w, 1.0));
            }
        }
    }
    MetricSpace::build(w * h, &edges, BTreeMap::new())
}

/// Three unit-edge legs of length `leg` joined at a center (vertex 0). Leg
/// l occupies 1 + l·leg … (l+1)·leg, leaf last; center and leaves labeled.
pub fn build_tripod(leg: usize) -> Result<MetricSpace> {
    if leg == 0 {
        return Err(Error::InvalidParameter { reason: "tripod legs need at least one edge".into() });
    }
    let mut edges = Vec::new();
    let mut labels = BTreeMap::from([(0, "center".to_string())]);
    for l in 0..3 {
        let start = 1 + l * leg;
        edges.push((0, start, 1.0));
        for i in 0..leg - 1 {
            edges.push((start + i, start + i + 1, 1.0));
        }
        labels.insert(start + leg - 1, format!("leaf-{l}"));
    }
    MetricSpace::build(3 * leg + 1, &edges, labels)
}

/// Unit-edge cycle on n ≥ 3 vertices.
pub fn build_cycle(n: usize) -> Result<MetricSpace> {
    if n < 3 {
        return Err(Error::InvalidParameter { reason: format!("cycle needs >= 3 vertices, got {n}") });
    }
    let edges: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    MetricSpace::build(n, &edges, BTreeMap::new())
}

/// One glued arc of the dyadic arc space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcInfo {
    /// Level n in 1..=depth.
    pub level: usize,
    /// Index k in 0..2ⁿ: the arc joins base points k·2⁻ⁿ and (k+1)·2⁻ⁿ.
    pub index: usize,
    /// The full vertex chain, base endpoint to base endpoint (M+1 entries).
    pub vertices: Vec<usize>,
    /// (2 − 2⁻ⁿ)·2⁻ⁿ.
    pub length: f64,
}

/// The dyadic arc space together with its test function and layout tables.
#[derive(Debug, Clone)]
pub struct ExampleSpace {
    pub space: MetricSpace,
    /// The coordinate-with-dips function, one value per vertex.
    pub f: Vec<f64>,
    /// N: number of dyadic levels.
    pub depth: usize,
    /// M: edges per arc (even, ≥ 2).
    pub arc_resolution: usize,
    /// Vertex ids of the base points in coordinate order; id k sits at
    /// k·2⁻ᴺ.
    pub base_vertices: Vec<usize>,
    pub arcs: Vec<ArcInfo>,
    /// Consecutive base pairs (k, k+1), each carrying weight 2·2⁻ᴺ.
    pub base_edges: Vec<(usize, usize)>,
}

/// Builds the dyadic arc space of depth N ≥ 1 with M ≥ 2 (even) edges per
/// arc. Base vertices come first (ids 0..=2ᴺ in coordinate order), then
/// arc interiors level by level. Construction asserts the exact-arithmetic
/// facts the layout depends on: one arc beats two finer arcs, the finest
/// arc beats the base edge, and f is continuous bitwise at arc endpoints
/// and midpoints.
pub fn build_dyadic_arc_space(depth: usize, arc_resolution: usize) -> Result<ExampleSpace> {
    let (n_levels, m) = (depth, arc_resolution);
    if n_levels == 0 {
        return Err(Error::InvalidParameter { reason: "depth must be >= 1".into() });
    }
    if n_levels > 24 {
        return Err(Error::InvalidParameter { reason: format!("depth {n_levels} is too deep to materialize") });
    }
    if m < 2 || m % 2 != 0 {
        return Err(Error::InvalidParameter {
            reason: format!("arc resolution must be even and >= 2, got {m}"),
        });
    }

    let base_count = (1usize << n_levels) + 1;
    let level_length = |n: usize| -> f64 {
        let p = 0.5f64.powi(n as i32);
        (2.0 - p) * p
    };
    let base_weight = 2.0 * 0.5f64.powi(n_levels as i32);
    for n in 1..n_levels {
        assert!(level_length(n) < 2.0 * level_length(n + 1), "one arc must beat two finer arcs");
    }
    assert!(level_length(n_levels) < base_weight, "the finest arc must beat the base edge");

    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut f: Vec<f64> = Vec::with_capacity(base_count);
    let mut base_edges = Vec::with_capacity(base_count - 1);
    for k in 0..base_count {
        f.push(k as f64 * 0.5f64.powi(n_levels as i32));
    }
    for k in 0..base_count - 1 {
        edges.push((k, k + 1, base_weight));
        base_edges.push((k, k + 1));
    }

    let mut arcs = Vec::new();
    let mut next_id = base_count;
    for n in 1..=n_levels {
        let pow = 0.5f64.powi(n as i32);
        let len = level_length(n);
        let w = len / m as f64;
        let stride = 1usize << (n_levels - n);
        for k in 0..(1usize << n) {
            let base_lo = k * stride;
            let base_hi = (k + 1) * stride;
            let mut chain = Vec::with_capacity(m + 1);
            chain.push(base_lo);
            for i in 1..m {
                let t = i as f64 / m as f64;
                let falling = k as f64 * pow - 2.0 * pow * t;
                let rising = (k as f64 - 3.0) * pow + 4.0 * pow * t;
                let value = if 2 * i < m {
                    falling
                } else if 2 * i > m {
                    rising
                } else {
                    assert_eq!(falling.to_bits(), rising.to_bits(), "f must agree bitwise at arc midpoints");
                    falling
                };
                f.push(value);
                chain.push(next_id);
                next_id += 1;
            }
            chain.push(base_hi);
            assert_eq!((k as f64 * pow).to_bits(), f[base_lo].to_bits(), "f continuity at arc start");
            assert_eq!(
                ((k as f64 - 3.0) * pow + 4.0 * pow).to_bits(),
                f[base_hi].to_bits(),
                "f continuity at arc end"
            );
            for pair in chain.windows(2) {
                edges.push((pair[0], pair[1], w));
            }
            arcs.push(ArcInfo { level: n, index: k, vertices: chain, length: len });
        }
    }

    let labels = BTreeMap::from([
        (0, "base-start".to_string()),
        (1usize << (n_levels - 1), "base-half".to_string()),
        (base_count - 1, "base-end".to_string()),
    ]);
    let space = MetricSpace::build(next_id, &edges, labels)?;
    Ok(ExampleSpace {
        space,
        f,
        depth: n_levels,
        arc_resolution: m,
        base_vertices: (0..base_count).collect(),
        arcs,
        base_edges,
    })
}

/// Everything the dyadic arc space is supposed to exhibit, measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcSpaceAudit {
    pub base_pairs_checked: usize,
    pub geodesics_checked: usize,
    /// Every checked geodesic decomposed into fully traversed arcs without
    /// touching a base edge.
    pub decomposition_clean: bool,
    /// Smallest value of level − (N − ⌊log₂ j⌋ − 1) over all traversed
    /// arcs, where j·2⁻ᴺ is the coordinate distance of the endpoints: a
    /// geodesic that far apart cannot afford arcs much coarser than the
    /// separation. The bound holds iff this is ≥ 0. Integer arithmetic
    /// throughout.
    pub level_margin: i64,
    pub level_bound_holds: bool,
    /// max |Δf|/w over edges; must be 8/3, attained on the rising half of
    /// the level-1 arcs.
    pub lipschitz_constant: f64,
    /// d(base-start, base-half): realized by a single level-1 arc, ¾.
    pub half_distance: f64,
    /// f at every arc midpoint equals (k−1)·2⁻ⁿ bitwise.
    pub midpoints_exact: bool,
    /// Slope of f along geodesics at each base vertex (finest radius).
    pub base_slopes: Vec<f64>,
    /// Each of those values is exactly 0.0 at every radius.
    pub base_slopes_all_zero: bool,
    /// Length of the base path 0 → 1: 2ᴺ edges of 2·2⁻ᴺ, exactly 2.
    pub base_path_length: f64,
    /// The upper-gradient inequality for f with the geodesic slope as
    /// candidate gradient, along the base path. `passes` must be false:
    /// the integral is 0 while f climbs by 1.
    pub upper_gradient_check: UpperGradientCheck,
    /// Exhaustive swap check that no shortest path between base vertices
    /// uses a base edge; `None` when depth > 5 (not run).
    pub no_base_edge_on_shortest: Option<bool>,
}

/// Radii at which base slopes are measured.
const AUDIT_RADII: [f64; 2] = [0.5, 0.25];
/// Depth limit for the exhaustive no-base-edge check.
const EXHAUSTIVE_SWAP_DEPTH: usize = 5;

/// Runs the full measurement suite against a built arc space.
pub fn arc_space_audit(es: &ExampleSpace) -> Result<ArcSpaceAudit> {
    let space = &es.space;
    let m = es.arc_resolution;

    // Edge classification: None = base edge, Some(i) = edge of arcs[i].
    let mut classes: BTreeMap<(usize, usize), Option<usize>> = BTreeMap::new();
    let norm = |u: usize, v: usize| (u.min(v), u.max(v));
    for &(u, v) in &es.base_edges {
        classes.insert(norm(u, v), None);
    }
    for (i, arc) in es.arcs.iter().enumerate() {
        for pair in arc.vertices.windows(2) {
            classes.insert(norm(pair[0], pair[1]), Some(i));
        }
    }

    let mut base_pairs_checked = 0usize;
    let mut geodesics_checked = 0usize;
    let mut decomposition_clean = true;
    let mut level_margin = i64::MAX;
    for (xi, &x) in es.base_vertices.iter().enumerate() {
        for &y in &es.base_vertices[xi + 1..] {
            base_pairs_checked += 1;
            let j = (y - x) as u64; // base ids are coordinate indices
            let required = es.depth as i64 - j.ilog2() as i64 - 1;
            for g in enumerate_geodesics(space, x, y, DEFAULT_GEODESIC_CAP)?.geodesics {
                geodesics_checked += 1;
                let path = g.vertices();
                let mut pos = 0;
                while pos + 1 < path.len() {
                    match classes[&norm(path[pos], path[pos + 1])] {
                        None => {
                            decomposition_clean = false;
                            pos += 1;
                        }
                        Some(a) => {
                            let whole = pos + m < path.len()
                                && (0..m).all(|s| {
                                    classes[&norm(path[pos + s], path[pos + s + 1])] == Some(a)
                                });
                            if !whole {
                                decomposition_clean = false;
                                pos += 1;
                                continue;
                            }
                            level_margin = level_margin.min(es.arcs[a].level as i64 - required);
                            pos += m;
                        }
                    }
                }
            }
        }
    }

    let lipschitz_constant = space
        .edges()
        .iter()
        .map(|e| (es.f[e.u] - es.f[e.v]).abs() / e.w)
        .fold(0.0, f64::max);

    let half = es.base_vertices[1usize << (es.depth - 1)];
    let half_distance = space.dist(es.base_vertices[0], half);

    let midpoints_exact = es.arcs.iter().all(|arc| {
        let mid = arc.vertices[m / 2];
        let expected = (arc.index as f64 - 1.0) * 0.5f64.powi(arc.level as i32);
        es.f[mid].to_bits() == expected.to_bits()
    });

    let ladder = ScaleLadder::new(AUDIT_RADII.to_vec(), DEFAULT_HOP_HORIZON)?;
    let report = compute_slope_report(space, &es.f, &ladder, DEFAULT_GEODESIC_CAP, DEFAULT_CURVE_BUDGET)?;
    let base_slopes: Vec<f64> =
        es.base_vertices.iter().map(|&v| report.rows[v].headline_geodesic()).collect();
    let base_slopes_all_zero = es
        .base_vertices
        .iter()
        .all(|&v| report.rows[v].slope_geodesics.iter().all(|&s| s == 0.0));

    let g: Vec<f64> = report.rows.iter().map(|row| row.headline_geodesic()).collect();
    let base_path: Vec<usize> = es.base_vertices.clone();
    let base_path_length = curve_length(space, &base_path)?;
    let upper_gradient_check = check_upper_gradient_along_geodesics(space, &es.f, &g, &base_path)?;

    let no_base_edge_on_shortest = if es.depth <= EXHAUSTIVE_SWAP_DEPTH {
        let mut all_hold = true;
        'swap: for &x in &es.base_vertices {
            for &y in &es.base_vertices {
                if x == y {
                    continue;
                }
                for &(k, k1) in &es.base_edges {
                    let w = 2.0 * 0.5f64.powi(es.depth as i32);
                    let through = (space.dist(x, k) + w + space.dist(k1, y))
                        .min(space.dist(x, k1) + w + space.dist(k, y));
                    if through <= space.dist(x, y) {
                        all_hold = false;
                        break 'swap;
                    }
                }
            }
        }
        Some(all_hold)
    } else {
        None
    };

    Ok(ArcSpaceAudit {
        base_pairs_checked,
        geodesics_checked,
        decomposition_clean,
        level_margin,
        level_bound_holds: decomposition_clean && level_margin >= 0,
        lipschitz_constant,
        half_distance,
        midpoints_exact,
        base_slopes,
        base_slopes_all_zero,
        base_path_length,
        upper_gradient_check,
        no_base_edge_on_shortest,
    })
}
