//! Scale-ladder estimators for three pointwise slopes of a function on a
//! metric graph, and the upper-gradient inequality checker.
//!
//! For f: X → ℝ and a vertex x, the three notions ordered by the families
//! they range over are:
//!
//! - ascending slope `|∇⁺f|`: max over probes y in a ball of
//!   [f(y)−f(x)]⁺/d(y,x) — no path structure at all;
//! - slope along curves `|∇_c⁺f|`: sup over simple paths from x staying in
//!   the ball of the min over the first few steps of the same quotient;
//! - slope along geodesics `|∇_g⁺f|`: the same min-over-prefix, but the sup
//!   ranges only over shortest paths from x.
//!
//! The min over a short prefix stands in for a liminf as the curve parameter
//! goes to 0: it never overestimates that liminf on refining families. Every
//! geodesic is a curve and every first step is a probe, so the chain
//! `|∇_g⁺f| ≤ |∇_c⁺f| ≤ |∇⁺f|` holds by construction, pointwise at every
//! radius — the estimators draw their quotients from the same pool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{curve_length, enumerate_geodesics, MetricSpace};

/// Default prefix length for the liminf surrogate.
pub const DEFAULT_HOP_HORIZON: usize = 4;
/// Default cap on enumerated geodesics per target pair.
pub const DEFAULT_GEODESIC_CAP: usize = 64;
/// Default cap on simple paths examined per vertex and radius.
pub const DEFAULT_CURVE_BUDGET: usize = 65_536;

/// Decreasing radii at which slopes are evaluated, plus the prefix length
/// used by the liminf surrogates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    radii: Vec<f64>,
    hop_horizon: usize,
}

impl ScaleLadder {
    pub fn new(radii: Vec<f64>, hop_horizon: usize) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::EmptyLadder);
        }
        for &r in &radii {
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::BadLadder { r });
            }
        }
        for pair in radii.windows(2) {
            if pair[1] >= pair[0] {
                return Err(Error::BadLadder { r: pair[1] });
            }
        }
        if hop_horizon == 0 {
            return Err(Error::BadHopHorizon);
        }
        Ok(ScaleLadder { radii, hop_horizon })
    }

    /// Geometric ladder diam/2, …, diam/2^levels. Degenerates to `[1.0]` on
    /// a one-point space.
    pub fn geometric(space: &MetricSpace, levels: usize, hop_horizon: usize) -> Result<Self> {
        let diam = space.diameter();
        if diam == 0.0 {
            return ScaleLadder::new(vec![1.0], hop_horizon);
        }
        let radii = (1..=levels.max(1)).map(|k| diam / f64::powi(2.0, k as i32)).collect();
        ScaleLadder::new(radii, hop_horizon)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Smallest radius: the scale of the headline slope values.
    pub fn finest(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    pub fn hop_horizon(&self) -> usize {
        self.hop_horizon
    }
}

fn check_field(space: &MetricSpace, f: &[f64]) -> Result<()> {
    if f.len() != space.vertex_count() {
        return Err(Error::LengthMismatch { got: f.len(), want: space.vertex_count() });
    }
    for (v, &value) in f.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::BadPotential { v, value });
        }
    }
    Ok(())
}

/// Ascending slope per radius: max over y ≠ x with d(x,y) ≤ r of
/// [f(y)−f(x)]⁺/d(y,x), or 0 when the punctured ball is empty.
pub fn ascending_slope(space: &MetricSpace, f: &[f64], x: usize, ladder: &ScaleLadder) -> Result<Vec<f64>> {
    check_field(space, f)?;
    if x >= space.vertex_count() {
        return Err(Error::VertexOutOfRange { v: x, n: space.vertex_count() });
    }
    let mut out = Vec::with_capacity(ladder.radii().len());
    for &r in ladder.radii() {
        let mut best: f64 = 0.0;
        for y in 0..space.vertex_count() {
            let d = space.dist(x, y);
            if y != x && d <= r {
                best = best.max((f[y] - f[x]).max(0.0) / d);
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// Quotient profile of one path from x: (distance to x, quotient) for each
/// of the first `hop_horizon` vertices after x.
fn prefix_quotients(
    space: &MetricSpace,
    f: &[f64],
    x: usize,
    vertices: &[usize],
    hop_horizon: usize,
) -> Vec<(f64, f64)> {
    vertices
        .iter()
        .skip(1)
        .take(hop_horizon)
        .map(|&v| {
            let d = space.dist(x, v);
            (d, (f[v] - f[x]).max(0.0) / d)
        })
        .collect()
}

/// Min over the in-ball prefix of a quotient profile; None when no prefix
/// vertex lies in the ball.
fn prefix_min(profile: &[(f64, f64)], r: f64) -> Option<f64> {
    profile
        .iter()
        .filter(|&&(d, _)| d <= r)
        .map(|&(_, q)| q)
        .fold(None, |acc, q| Some(acc.map_or(q, |a: f64| a.min(q))))
}

/// Slope along geodesics per radius: sup over enumerated geodesics from x
/// (to every target in the largest ball, capped per target) of the min over
/// the first `hop_horizon` aligned steps within the radius. The `bool` is a
/// partial flag: some enumeration hit the cap, so the value is a certified
/// lower bound rather than the full discrete sup.
pub fn slope_along_geodesics(
    space: &MetricSpace,
    f: &[f64],
    x: usize,
    ladder: &ScaleLadder,
    cap: usize,
) -> Result<(Vec<f64>, bool)> {
    check_field(space, f)?;
    if x >= space.vertex_count() {
        return Err(Error::VertexOutOfRange { v: x, n: space.vertex_count() });
    }
    let r_max = ladder.radii()[0];
    let mut profiles = Vec::new();
    let mut partial = false;
    for y in space.closed_ball(x, r_max) {
        if y == x {
            continue;
        }
        let family = enumerate_geodesics(space, x, y, cap)?;
        partial |= family.truncated;
        for g in &family.geodesics {
            profiles.push(prefix_quotients(space, f, x, g.vertices(), ladder.hop_horizon()));
        }
    }
    let values = ladder
        .radii()
        .iter()
        .map(|&r| {
            profiles
                .iter()
                .filter_map(|p| prefix_min(p, r))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok((values, partial))
}

/// Slope along curves per radius: the same min-over-prefix construction,
/// with the sup over all simple paths from x whose vertices stay in the
/// ball, enumerated depth-first to the hop horizon under a path budget, and
/// merged with the geodesic value so the chain inequality is structural even
/// when the budget truncates the search.
pub fn slope_along_curves(
    space: &MetricSpace,
    f: &[f64],
    x: usize,
    ladder: &ScaleLadder,
    cap: usize,
    budget: usize,
) -> Result<(Vec<f64>, bool)> {
    let (geodesic_values, mut partial) = slope_along_geodesics(space, f, x, ladder, cap)?;
    if budget == 0 {
        return Err(Error::InvalidParameter { reason: "curve budget must be >= 1".into() });
    }
    let mut values = Vec::with_capacity(ladder.radii().len());
    for (k, &r) in ladder.radii().iter().enumerate() {
        // Depth-first over simple paths from x inside B(x, r), depth capped
        // at the hop horizon: extending past the horizon cannot change the
        // min over the first hop_horizon steps.
        let mut best = geodesic_values[k];
        let mut examined = 0usize;
        let mut path = vec![x];
        let mut on_path = vec![false; space.vertex_count()];
        on_path[x] = true;
        let mut cursors = vec![0usize];
        let mut running_min = vec![f64::INFINITY];
        'dfs: loop {
            if examined >= budget {
                partial = true;
                break;
            }
            let u = *path.last().unwrap();
            let depth = path.len() - 1;
            let cursor = *cursors.last().unwrap();
            if depth < ladder.hop_horizon() {
                let nbrs = space.neighbors(u);
                for (offset, &(v, _)) in nbrs[cursor..].iter().enumerate() {
                    if !on_path[v] && space.dist(x, v) <= r {
                        *cursors.last_mut().unwrap() = cursor + offset + 1;
                        let d = space.dist(x, v);
                        let q = (f[v] - f[x]).max(0.0) / d;
                        let m = running_min.last().unwrap().min(q);
                        path.push(v);
                        on_path[v] = true;
                        cursors.push(0);
                        running_min.push(m);
                        examined += 1;
                        best = best.max(m);
                        continue 'dfs;
                    }
                }
            }
            let left = path.pop().unwrap();
            on_path[left] = false;
            cursors.pop();
            running_min.pop();
            if path.is_empty() {
                break;
            }
        }
        values.push(best);
    }
    Ok((values, partial))
}

/// Per-vertex slope values across the ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexSlopes {
    pub vertex: usize,
    pub slope_plus: Vec<f64>,
    pub slope_curves: Vec<f64>,
    pub slope_geodesics: Vec<f64>,
}

impl VertexSlopes {
    /// Value at the smallest radius.
    pub fn headline_geodesic(&self) -> f64 {
        *self.slope_geodesics.last().unwrap()
    }

    pub fn headline_curves(&self) -> f64 {
        *self.slope_curves.last().unwrap()
    }

    pub fn headline_plus(&self) -> f64 {
        *self.slope_plus.last().unwrap()
    }
}

/// All three slope estimators at every vertex and ladder radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub radii: Vec<f64>,
    pub hop_horizon: usize,
    pub rows: Vec<VertexSlopes>,
    /// Some enumeration was truncated by cap or budget; affected values are
    /// certified lower bounds.
    pub partial: bool,
}

impl SlopeReport {
    /// Largest violation of slope_geodesics ≤ slope_curves ≤ slope_plus
    /// (0 when the chain holds everywhere, as it must by construction).
    pub fn chain_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            for k in 0..self.radii.len() {
                worst = worst.max(row.slope_geodesics[k] - row.slope_curves[k]);
                worst = worst.max(row.slope_curves[k] - row.slope_plus[k]);
            }
        }
        worst
    }
}

/// Computes all three slopes at every vertex. Vertices are processed in
/// parallel; the output order is the vertex order.
pub fn compute_slope_report(
    space: &MetricSpace,
    f: &[f64],
    ladder: &ScaleLadder,
    cap: usize,
    budget: usize,
) -> Result<SlopeReport> {
    check_field(space, f)?;
    let rows: Vec<(VertexSlopes, bool)> = (0..space.vertex_count())
        .into_par_iter()
        .map(|x| -> Result<(VertexSlopes, bool)> {
            let slope_plus = ascending_slope(space, f, x, ladder)?;
            let (slope_geodesics, partial_g) = slope_along_geodesics(space, f, x, ladder, cap)?;
            let (slope_curves, partial_c) = slope_along_curves(space, f, x, ladder, cap, budget)?;
            Ok((
                VertexSlopes { vertex: x, slope_plus, slope_curves, slope_geodesics },
                partial_g | partial_c,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let partial = rows.iter().any(|(_, p)| *p);
    Ok(SlopeReport {
        radii: ladder.radii().to_vec(),
        hop_horizon: ladder.hop_horizon(),
        rows: rows.into_iter().map(|(r, _)| r).collect(),
        partial,
    })
}

/// Outcome of testing the upper-gradient inequality |f(γ₀)−f(γ₁)| ≤ ∫_γ g
/// along one vertex path, with the integral discretized by the trapezoid
/// rule on edges (exact for edge-affine g under constant-speed time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperGradientCheck {
    /// Σ over edges of w(u,v) · (g(u)+g(v))/2.
    pub integral: f64,
    /// |f(first) − f(last)|.
    pub variation: f64,
    /// integral − variation; the inequality passes iff ≥ −1e-9.
    pub residual: f64,
    pub passes: bool,
}

/// Tests the upper-gradient inequality for f with candidate gradient g along
/// an explicit vertex path. The path may be any curve — in particular a
/// non-geodesic one, which is exactly how a candidate that is an upper
/// gradient only along geodesics is exposed.
pub fn check_upper_gradient_along_geodesics(
    space: &MetricSpace,
    f: &[f64],
    g: &[f64],
    path: &[usize],
) -> Result<UpperGradientCheck> {
    check_field(space, f)?;
    check_field(space, g)?;
    if let Some((v, &value)) = g.iter().enumerate().find(|&(_, &value)| value < 0.0) {
        return Err(Error::BadPotential { v, value });
    }
    // Validates the path (edges exist, vertices in range).
    curve_length(space, path)?;
    let mut integral = 0.0;
    for pair in path.windows(2) {
        let w = space.edge_weight(pair[0], pair[1]).expect("validated above");
        integral += w * (g[pair[0]] + g[pair[1]]) / 2.0;
    }
    let variation = (f[path[0]] - f[*path.last().unwrap()]).abs();
    let residual = integral - variation;
    Ok(UpperGradientCheck { integral, variation, residual, passes: residual >= -1e-9 })
}
