//! Measures, densities, relative entropy, and the doubling-constant
//! estimator.
//!
//! A [`Measure`] is a dense nonnegative mass vector aligned with a space's
//! vertex order. A [`Density`] represents μ = ρ·m relative to a reference
//! measure m; where m vanishes but μ does not, the density is undefined and
//! the measure is flagged as not absolutely continuous rather than rejected,
//! because discrete interpolants legitimately concentrate.
//!
//! The doubling constant of (X, d, m) is estimated as
//! `max m(B(x,2r)) / m(B(x,r))` over vertices x with `m(B(x,r)) > 0` and a
//! ladder of radii, with closed balls throughout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{geodesic_point, MetricSpace};
use crate::transport::GeodesicPlan;

/// Absolute tolerance for "is this a probability measure".
pub const MASS_TOL: f64 = 1e-9;

/// Dense nonnegative measure on the vertex set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    masses: Vec<f64>,
}

impl Measure {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        for (v, &m) in masses.iter().enumerate() {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::BadMass { v, mass: m });
            }
        }
        Ok(Measure { masses })
    }

    /// Unit mass at a single vertex.
    pub fn dirac(n: usize, v: usize) -> Result<Self> {
        if v >= n {
            return Err(Error::VertexOutOfRange { v, n });
        }
        let mut masses = vec![0.0; n];
        masses[v] = 1.0;
        Ok(Measure { masses })
    }

    /// Probability measure with equal mass on every vertex.
    pub fn uniform(n: usize) -> Self {
        Measure { masses: vec![1.0 / n as f64; n] }
    }

    /// Counting measure: mass 1 on every vertex.
    pub fn counting(n: usize) -> Self {
        Measure { masses: vec![1.0; n] }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn mass(&self, v: usize) -> f64 {
        self.masses[v]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Vertices carrying strictly positive mass, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.masses.len()).filter(|&v| self.masses[v] > 0.0).collect()
    }

    pub fn is_probability(&self) -> bool {
        (self.total() - 1.0).abs() <= MASS_TOL
    }

    pub fn require_probability(&self) -> Result<()> {
        let total = self.total();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::NotProbability { total });
        }
        if self.support().is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(())
    }

    pub fn require_len(&self, n: usize) -> Result<()> {
        if self.masses.len() != n {
            return Err(Error::LengthMismatch { got: self.masses.len(), want: n });
        }
        Ok(())
    }

    /// Rescales to total mass 1.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::EmptySupport);
        }
        Ok(Measure { masses: self.masses.iter().map(|m| m / total).collect() })
    }
}

/// Density ρ of a measure μ = ρ·m relative to a reference measure m.
///
/// `values[v]` is meaningful where `m(v) > 0`; `undefined` lists the vertices
/// where μ has mass but m does not, together with that mass — there the
/// density does not exist and μ is not absolutely continuous w.r.t. m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    values: Vec<f64>,
    undefined: BTreeMap<usize, f64>,
}

impl Density {
    /// Computes μ/m pointwise.
    pub fn from_measure(mu: &Measure, m: &Measure) -> Result<Self> {
        mu.require_len(m.len())?;
        let mut values = vec![0.0; m.len()];
        let mut undefined = BTreeMap::new();
        for v in 0..m.len() {
            if m.mass(v) > 0.0 {
                values[v] = mu.mass(v) / m.mass(v);
            } else if mu.mass(v) > 0.0 {
                undefined.insert(v, mu.mass(v));
            }
        }
        Ok(Density { values, undefined })
    }

    pub fn value(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Vertices where μ has mass but the reference measure does not.
    pub fn undefined(&self) -> &BTreeMap<usize, f64> {
        &self.undefined
    }

    pub fn is_absolutely_continuous(&self) -> bool {
        self.undefined.is_empty()
    }

    /// Rebuilds the measure ρ·m (dropping any undefined mass).
    pub fn reconstruct(&self, m: &Measure) -> Result<Measure> {
        m.require_len(self.values.len())?;
        Measure::new(
            (0..m.len()).map(|v| self.values[v] * m.mass(v)).collect(),
        )
    }
}

/// Push-forward of `mu` through a vertex map: each target accumulates the
/// mass of its preimages. The map must cover the support of `mu`.
pub fn push_forward(mu: &Measure, map: &BTreeMap<usize, usize>, n_target: usize) -> Result<Measure> {
    let mut masses = vec![0.0; n_target];
    for v in mu.support() {
        let &t = map.get(&v).ok_or(Error::MapUndefined { v, mass: mu.mass(v) })?;
        if t >= n_target {
            return Err(Error::VertexOutOfRange { v: t, n: n_target });
        }
        masses[t] += mu.mass(v);
    }
    Measure::new(masses)
}

/// Relative entropy Σ ρ log ρ dm of the probability measure ρ·m, with the
/// convention 0·log 0 = 0. Returns +∞ when the density is undefined on a
/// vertex carrying mass (μ not absolutely continuous w.r.t. m).
pub fn relative_entropy(rho: &Density, m: &Measure) -> Result<f64> {
    m.require_len(rho.values().len())?;
    let total: f64 = (0..m.len()).map(|v| rho.value(v) * m.mass(v)).sum::<f64>()
        + rho.undefined().values().sum::<f64>();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::NotProbability { total });
    }
    if !rho.is_absolutely_continuous() {
        return Ok(f64::INFINITY);
    }
    let mut acc = 0.0;
    for v in 0..m.len() {
        let r = rho.value(v);
        if r > 0.0 && m.mass(v) > 0.0 {
            acc += r * r.ln() * m.mass(v);
        }
    }
    Ok(acc)
}

/// Default geometric radius ladder diam/2, diam/4, ..., diam/2^8. On a
/// single-vertex space (diameter 0) the ladder degenerates to `[1.0]`.
pub fn default_radius_ladder(space: &MetricSpace) -> Vec<f64> {
    let diam = space.diameter();
    if diam == 0.0 {
        return vec![1.0];
    }
    (1..=8).map(|k| diam / f64::powi(2.0, k)).collect()
}

/// Estimated doubling constant: max over vertices x and ladder radii r with
/// `m(B(x,r)) > 0` of `m(B(x,2r)) / m(B(x,r))`, closed balls.
pub fn doubling_constant(space: &MetricSpace, m: &Measure, radii: &[f64]) -> Result<f64> {
    m.require_len(space.vertex_count())?;
    if radii.is_empty() {
        return Err(Error::EmptyLadder);
    }
    for &r in radii {
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::BadLadder { r });
        }
    }
    if m.support().is_empty() {
        return Err(Error::EmptySupport);
    }
    let mut best: f64 = 1.0;
    for x in 0..space.vertex_count() {
        for &r in radii {
            let inner: f64 = space.closed_ball(x, r).iter().map(|&v| m.mass(v)).sum();
            if inner > 0.0 {
                let outer: f64 = space.closed_ball(x, 2.0 * r).iter().map(|&v| m.mass(v)).sum();
                best = best.max(outer / inner);
            }
        }
    }
    Ok(best)
}

/// Aggregate snapping error committed when evaluating a geodesic plan at a
/// non-aligned time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapReport {
    /// Largest single snap error over the plan's geodesics.
    pub max_snap_error: f64,
    /// Σ mass · snap_error over the plan.
    pub mass_weighted_snap_error: f64,
}

/// Density at time `t` of the displacement interpolant: push-forward of the
/// plan's mass through geodesic evaluation at `t`, divided by the reference
/// measure `m`.
pub fn interpolant_density(
    pi: &GeodesicPlan,
    t: f64,
    m: &Measure,
) -> Result<(Density, SnapReport)> {
    let mut masses = vec![0.0; m.len()];
    let mut max_snap: f64 = 0.0;
    let mut weighted_snap = 0.0;
    for (g, mass) in pi.entries() {
        let p = geodesic_point(g, t)?;
        if p.vertex >= m.len() {
            return Err(Error::VertexOutOfRange { v: p.vertex, n: m.len() });
        }
        masses[p.vertex] += mass;
        max_snap = max_snap.max(p.snap_error);
        weighted_snap += mass * p.snap_error;
    }
    let mu = Measure::new(masses)?;
    let rho = Density::from_measure(&mu, m)?;
    Ok((rho, SnapReport { max_snap_error: max_snap, mass_weighted_snap_error: weighted_snap }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{enumerate_geodesics, DiscreteGeodesic};

    fn unit_path(n_edges: usize) -> MetricSpace {
        let edges: Vec<_> = (0..n_edges).map(|i| (i, i + 1, 1.0)).collect();
        MetricSpace::build(n_edges + 1, &edges, BTreeMap::new()).unwrap()
    }

    /// Independent oracle for doubling on unit-edge graphs: closed balls by
    /// breadth-first hop counting, masses summed directly.
    fn doubling_oracle_unit_edges(n: usize, edges: &[(usize, usize)], m: &[f64], r: f64) -> f64 {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        let hop_dist = |s: usize| {
            let mut d = vec![usize::MAX; n];
            d[s] = 0;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if d[v] == usize::MAX {
                        d[v] = d[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            d
        };
        let mut best: f64 = 1.0;
        for x in 0..n {
            let d = hop_dist(x);
            let ball = |radius: f64| -> f64 {
                (0..n).filter(|&v| (d[v] as f64) <= radius).map(|v| m[v]).sum()
            };
            let inner = ball(r);
            if inner > 0.0 {
                best = best.max(ball(2.0 * r) / inner);
            }
        }
        best
    }

    #[test]
    fn measure_validation() {
        assert!(matches!(Measure::new(vec![0.5, -0.1]), Err(Error::BadMass { v: 1, .. })));
        assert!(matches!(Measure::new(vec![f64::NAN]), Err(Error::BadMass { .. })));
        let mu = Measure::new(vec![0.25, 0.0, 0.75]).unwrap();
        assert_eq!(mu.support(), vec![0, 2]);
        assert!(mu.is_probability());
        mu.require_probability().unwrap();
        assert!(matches!(
            Measure::new(vec![0.5, 0.6]).unwrap().require_probability(),
            Err(Error::NotProbability { .. })
        ));
    }

    #[test]
    fn push_forward_identity_and_constant() {
        let mu = Measure::new(vec![0.3, 0.7]).unwrap();
        let id: BTreeMap<usize, usize> = [(0, 0), (1, 1)].into();
        assert_eq!(push_forward(&mu, &id, 2).unwrap(), mu);
        let to_zero: BTreeMap<usize, usize> = [(0, 0), (1, 0)].into();
        let nu = push_forward(&mu, &to_zero, 2).unwrap();
        assert_eq!(nu.masses(), &[1.0, 0.0]);
    }

    #[test]
    fn push_forward_swap() {
        let mu = Measure::new(vec![0.3, 0.7]).unwrap();
        let swap: BTreeMap<usize, usize> = [(0, 1), (1, 0)].into();
        let nu = push_forward(&mu, &swap, 2).unwrap();
        assert_eq!(nu.masses(), &[0.7, 0.3]);
        assert!((nu.total() - mu.total()).abs() <= 1e-12);
    }

    #[test]
    fn push_forward_requires_map_on_support() {
        let mu = Measure::new(vec![0.3, 0.7]).unwrap();
        let partial: BTreeMap<usize, usize> = [(0, 0)].into();
        assert!(matches!(
            push_forward(&mu, &partial, 2),
            Err(Error::MapUndefined { v: 1, .. })
        ));
        // Undefined off the support is fine.
        let mu2 = Measure::new(vec![1.0, 0.0]).unwrap();
        push_forward(&mu2, &partial, 2).unwrap();
    }

    #[test]
    fn density_roundtrip_and_flags() {
        let m = Measure::new(vec![1.0, 2.0, 0.0]).unwrap();
        let mu = Measure::new(vec![0.5, 0.5, 0.0]).unwrap();
        let rho = Density::from_measure(&mu, &m).unwrap();
        assert!(rho.is_absolutely_continuous());
        assert_eq!(rho.value(0), 0.5);
        assert_eq!(rho.value(1), 0.25);
        assert_eq!(rho.reconstruct(&m).unwrap(), mu);

        let bad = Measure::new(vec![0.5, 0.0, 0.5]).unwrap();
        let rho = Density::from_measure(&bad, &m).unwrap();
        assert!(!rho.is_absolutely_continuous());
        assert_eq!(rho.undefined().get(&2), Some(&0.5));
    }

    #[test]
    fn entropy_of_uniform_density_is_zero() {
        let m = Measure::new(vec![0.25; 4]).unwrap();
        let rho = Density::from_measure(&m, &m).unwrap();
        assert_eq!(relative_entropy(&rho, &m).unwrap(), 0.0);
    }

    #[test]
    fn entropy_uniform_over_k_of_n() {
        // μ uniform on 4 of 10 unit-mass vertices, m counting: entropy −log 4.
        let m = Measure::counting(10);
        let mut masses = vec![0.0; 10];
        for v in 0..4 {
            masses[v] = 0.25;
        }
        let mu = Measure::new(masses).unwrap();
        let rho = Density::from_measure(&mu, &m).unwrap();
        let h = relative_entropy(&rho, &m).unwrap();
        assert!((h - (-(4.0f64).ln())).abs() <= 1e-12);
    }

    #[test]
    fn entropy_of_dirac_against_counting_is_zero() {
        let m = Measure::counting(10);
        let mu = Measure::dirac(10, 3).unwrap();
        let rho = Density::from_measure(&mu, &m).unwrap();
        assert_eq!(relative_entropy(&rho, &m).unwrap(), 0.0);
    }

    #[test]
    fn entropy_infinite_when_not_absolutely_continuous() {
        let m = Measure::new(vec![1.0, 0.0]).unwrap();
        let mu = Measure::new(vec![0.5, 0.5]).unwrap();
        let rho = Density::from_measure(&mu, &m).unwrap();
        assert_eq!(relative_entropy(&rho, &m).unwrap(), f64::INFINITY);
    }

    #[test]
    fn entropy_rejects_non_probability() {
        let m = Measure::counting(2);
        let mu = Measure::new(vec![0.5, 0.2]).unwrap();
        let rho = Density::from_measure(&mu, &m).unwrap();
        assert!(matches!(relative_entropy(&rho, &m), Err(Error::NotProbability { .. })));
    }

    #[test]
    fn doubling_single_vertex_is_one() {
        let s = MetricSpace::build(1, &[], BTreeMap::new()).unwrap();
        let m = Measure::counting(1);
        assert_eq!(doubling_constant(&s, &m, &default_radius_ladder(&s)).unwrap(), 1.0);
    }

    #[test]
    fn doubling_path_interior_ratio() {
        // 9-vertex unit path, counting measure, r = 1: the max ratio is
        // attained at interior vertices, |B(x,2)|/|B(x,1)| = 5/3.
        let s = unit_path(8);
        let m = Measure::counting(9);
        let got = doubling_constant(&s, &m, &[1.0]).unwrap();
        let edges: Vec<_> = (0..8).map(|i| (i, i + 1)).collect();
        let oracle = doubling_oracle_unit_edges(9, &edges, m.masses(), 1.0);
        assert!((got - oracle).abs() <= 1e-12);
        assert!((got - 5.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn doubling_star_at_leaf() {
        // Star, center 0, k = 6 leaves, counting measure, r = 1. From a leaf
        // B(x,1) = {leaf, center} and B(x,2) is everything, ratio (k+1)/2;
        // from the center both balls are everything. Max = (k+1)/2.
        let k = 6;
        let edges: Vec<_> = (1..=k).map(|v| (0, v, 1.0)).collect();
        let s = MetricSpace::build(k + 1, &edges, BTreeMap::new()).unwrap();
        let m = Measure::counting(k + 1);
        let got = doubling_constant(&s, &m, &[1.0]).unwrap();
        let oracle_edges: Vec<_> = (1..=k).map(|v| (0, v)).collect();
        let oracle = doubling_oracle_unit_edges(k + 1, &oracle_edges, m.masses(), 1.0);
        assert!((got - oracle).abs() <= 1e-12);
        assert!((got - (k as f64 + 1.0) / 2.0).abs() <= 1e-12);
    }

    #[test]
    fn doubling_invariant_under_uniform_scaling() {
        let edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)];
        let scaled: Vec<_> = edges.iter().map(|&(u, v, w)| (u, v, 3.0 * w)).collect();
        let s1 = MetricSpace::build(5, &edges, BTreeMap::new()).unwrap();
        let s3 = MetricSpace::build(5, &scaled, BTreeMap::new()).unwrap();
        let m = Measure::counting(5);
        let ladder = [0.5, 1.0, 2.0];
        let scaled_ladder: Vec<_> = ladder.iter().map(|r| 3.0 * r).collect();
        let a = doubling_constant(&s1, &m, &ladder).unwrap();
        let b = doubling_constant(&s3, &m, &scaled_ladder).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn doubling_rejects_bad_ladder() {
        let s = unit_path(2);
        let m = Measure::counting(3);
        assert!(matches!(doubling_constant(&s, &m, &[]), Err(Error::EmptyLadder)));
        assert!(matches!(doubling_constant(&s, &m, &[0.0]), Err(Error::BadLadder { .. })));
        assert!(matches!(doubling_constant(&s, &m, &[-1.0]), Err(Error::BadLadder { .. })));
    }

    #[test]
    fn interpolant_endpoints_recover_marginals() {
        let s = unit_path(4);
        let m = Measure::counting(5);
        // Two geodesics: 0 -> 4 with mass 0.25, 1 -> 3 with mass 0.75.
        let g04 = enumerate_geodesics(&s, 0, 4, 1).unwrap().geodesics.remove(0);
        let g13 = enumerate_geodesics(&s, 1, 3, 1).unwrap().geodesics.remove(0);
        let pi = GeodesicPlan::from_entries(vec![(g04, 0.25), (g13, 0.75)]).unwrap();
        let (rho0, snap0) = interpolant_density(&pi, 0.0, &m).unwrap();
        assert_eq!(snap0.max_snap_error, 0.0);
        let mu0 = rho0.reconstruct(&m).unwrap();
        assert_eq!(mu0.masses(), &[0.25, 0.75, 0.0, 0.0, 0.0]);
        let (rho1, _) = interpolant_density(&pi, 1.0, &m).unwrap();
        let mu1 = rho1.reconstruct(&m).unwrap();
        assert_eq!(mu1.masses(), &[0.0, 0.0, 0.0, 0.75, 0.25]);
    }

    #[test]
    fn interpolant_uniform_shift_on_path_grid() {
        // 9-vertex unit path; uniform mass on {0..4} shifted to {4..8}.
        // At t = 1/2 every geodesic is at its own midpoint: window {2..6}.
        let s = unit_path(8);
        let m = Measure::counting(9);
        let mut entries = Vec::new();
        for i in 0..5 {
            let g = enumerate_geodesics(&s, i, i + 4, 1).unwrap().geodesics.remove(0);
            entries.push((g, 0.2));
        }
        let pi = GeodesicPlan::from_entries(entries).unwrap();
        let (rho, snap) = interpolant_density(&pi, 0.5, &m).unwrap();
        assert_eq!(snap.max_snap_error, 0.0);
        let mid = rho.reconstruct(&m).unwrap();
        assert_eq!(mid.masses(), &[0.0, 0.0, 0.2, 0.2, 0.2, 0.2, 0.2, 0.0, 0.0]);
    }

    #[test]
    fn interpolant_snap_report_off_grid() {
        let s = unit_path(2);
        let m = Measure::counting(3);
        let g = enumerate_geodesics(&s, 0, 2, 1).unwrap().geodesics.remove(0);
        let pi = GeodesicPlan::from_entries(vec![(g, 1.0)]).unwrap();
        // t = 0.4 snaps to the midpoint vertex (time 0.5): error 0.1·2 = 0.2.
        let (rho, snap) = interpolant_density(&pi, 0.4, &m).unwrap();
        assert!((snap.max_snap_error - 0.2).abs() <= 1e-12);
        assert!((snap.mass_weighted_snap_error - 0.2).abs() <= 1e-12);
        assert_eq!(rho.reconstruct(&m).unwrap().masses(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn interpolant_of_constant_geodesics_is_static() {
        let m = Measure::counting(3);
        let pi = GeodesicPlan::from_entries(vec![
            (DiscreteGeodesic::constant(0), 0.5),
            (DiscreteGeodesic::constant(2), 0.5),
        ])
        .unwrap();
        for t in [0.0, 0.3, 1.0] {
            let (rho, snap) = interpolant_density(&pi, t, &m).unwrap();
            assert_eq!(snap.max_snap_error, 0.0);
            assert_eq!(rho.reconstruct(&m).unwrap().masses(), &[0.5, 0.0, 0.5]);
        }
    }
}
