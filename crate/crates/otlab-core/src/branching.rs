//! Branching diagnostics: witnesses for geodesic pairs that merge or split,
//! dyadic separation-rate ladders, rescaled pointed balls, and a
//! Gromov–Hausdorff distance between finite metric spaces.
//!
//! A space is non-branching when two constant-speed geodesics that share
//! their start and agree at one interior time coincide everywhere. On a
//! finite graph both halves of that statement are checkable directly:
//! geodesic pairs are enumerated and compared at their shared vertex-aligned
//! times. Beyond the yes/no diagnosis, the separation rate
//! d(γ_t, γ'_t) / d(γ_0, γ_t) over dyadic t probes the strong form:
//! distinct geodesics from a point are strongly separated when this rate is
//! bounded below as t ↓ 0, and a rate that decays to zero flags a pair that
//! peels apart slower than it advances.
//!
//! The blow-up surrogate rescales closed balls — d_r = d/r restricted to
//! B(x, r), the complete matrix carried over rather than re-derived from
//! surviving edges — and compares consecutive scales by pointed
//! Gromov–Hausdorff distance, computed as half the minimal distortion over
//! correspondences with basepoints pinned. Values stabilizing near zero
//! across a radius ladder are evidence of (never proof of) a tangent-like
//! local structure.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slopes::ScaleLadder;
use crate::space::{enumerate_geodesics, geodesic_point, DiscreteGeodesic, MetricSpace};

/// Default depth of dyadic separation ladders: times 2⁻¹ … 2⁻⁶.
pub const DEFAULT_DYADIC_DEPTH: usize = 6;
/// Default node budget for the Gromov–Hausdorff search. Large enough that
/// spaces with ≤ 5 points on either side always finish exhaustively (the
/// unpruned search tree is below 1.3e7 nodes there).
pub const DEFAULT_GH_BUDGET: usize = 50_000_000;
/// Default number of sampled start/target/target triples for branch
/// detection on spaces too large for the exhaustive scan.
pub const DEFAULT_SAMPLE_PAIRS: usize = 512;

/// Largest vertex count scanned exhaustively by [`detect_branching`].
const EXHAUSTIVE_VERTEX_LIMIT: usize = 200;
/// Geodesics kept per endpoint pair during branch scans.
const FAMILY_CAP: usize = 16;
/// Witness count at which a scan stops early.
const WITNESS_CAP: usize = 256;
/// Matches the vertex-alignment tolerance of `DiscreteGeodesic`.
const TIME_MATCH_TOL: f64 = 1e-12;
/// Fixed seed for sampled scans; detection must be reproducible without any
/// configuration plumbed through.
const SAMPLE_SEED: u64 = 0x6f74_6c61_62;

/// How a geodesic pair witnesses branching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessKind {
    /// The pair agrees at an interior time and differs elsewhere: the direct
    /// violation of non-branching.
    InteriorAgreement,
    /// The pair joins the same endpoints through different vertices:
    /// geodesic non-uniqueness, agreement only at time 1.
    SharedEndpoint,
}

/// Separation ratio d(γ_t, γ'_t) / d(γ_0, γ_t) at one dyadic time; `None`
/// when either geodesic has no vertex aligned there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicRatio {
    pub time: f64,
    pub ratio: Option<f64>,
}

/// A geodesic pair with a common start that merges and splits.
///
/// Invariants: the geodesics share their start vertex; they sit at the same
/// vertex at `agree_time` (1.0 for the shared-endpoint kind, an interior
/// aligned time otherwise); `split_times` is nonempty. Split times are
/// shared vertex-aligned times where the vertices differ; only when the two
/// time grids share nothing but the endpoints do they fall back to
/// merged-grid times evaluated by snapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchWitness {
    pub kind: WitnessKind,
    pub first: DiscreteGeodesic,
    pub second: DiscreteGeodesic,
    pub agree_time: f64,
    pub split_times: Vec<f64>,
    /// Separation ratios over dyadic times down to 2^(−DEFAULT_DYADIC_DEPTH).
    pub ratio_ladder: Vec<DyadicRatio>,
}

/// Outcome of a branch scan. An empty witness list proves non-branching
/// only when `exhaustive` is true; a sampled or truncated scan that found
/// nothing merely failed to find.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchScan {
    pub witnesses: Vec<BranchWitness>,
    /// True when every geodesic pair with a common start was examined: the
    /// space was within the exhaustive limit, no enumeration hit its cap,
    /// and the witness cap did not stop the scan.
    pub exhaustive: bool,
    pub pairs_examined: usize,
}

/// Shared vertex-aligned times of two geodesics: (time, vertex of g,
/// vertex of h), by a two-pointer merge of the aligned grids.
fn common_aligned(g: &DiscreteGeodesic, h: &DiscreteGeodesic) -> Vec<(f64, usize, usize)> {
    let (tg, th) = (g.times(), h.times());
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < tg.len() && j < th.len() {
        if tg[i] < th[j] - TIME_MATCH_TOL {
            i += 1;
        } else if th[j] < tg[i] - TIME_MATCH_TOL {
            j += 1;
        } else {
            out.push((tg[i], g.vertices()[i], h.vertices()[j]));
            i += 1;
            j += 1;
        }
    }
    out
}

/// Split evidence for pairs whose aligned grids share only the endpoints:
/// times from the merged grid where the snapped vertices differ.
fn merged_snapped_splits(space: &MetricSpace, g: &DiscreteGeodesic, h: &DiscreteGeodesic) -> Vec<f64> {
    let mut grid: Vec<f64> = g.times().iter().chain(h.times().iter()).cloned().collect();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    grid.into_iter()
        .filter(|&t| {
            let pg = geodesic_point(g, t).expect("grid times lie in [0,1]");
            let ph = geodesic_point(h, t).expect("grid times lie in [0,1]");
            space.dist(pg.vertex, ph.vertex) > 0.0
        })
        .collect()
}

/// Classifies one geodesic pair with a common start. `None` when the pair
/// is identical, or distinct without either agreement-then-split structure
/// (distinct targets reached along never-again-meeting paths do not
/// witness branching).
fn witness_for_pair(
    space: &MetricSpace,
    g: &DiscreteGeodesic,
    h: &DiscreteGeodesic,
    depth: usize,
) -> Result<Option<BranchWitness>> {
    debug_assert_eq!(g.start(), h.start());
    if g.vertices() == h.vertices() {
        return Ok(None);
    }
    let common = common_aligned(g, h);
    let agree_interior: Option<f64> = common
        .iter()
        .find(|&&(t, vg, vh)| vg == vh && t > TIME_MATCH_TOL && t < 1.0 - TIME_MATCH_TOL)
        .map(|&(t, _, _)| t);
    let splits_common: Vec<f64> = common
        .iter()
        .filter(|&&(_, vg, vh)| vg != vh)
        .map(|&(t, _, _)| t)
        .collect();
    let split_times = if splits_common.is_empty() {
        merged_snapped_splits(space, g, h)
    } else {
        splits_common
    };
    if split_times.is_empty() {
        return Ok(None);
    }
    let (kind, agree_time) = match agree_interior {
        Some(s) => (WitnessKind::InteriorAgreement, s),
        None if g.end() == h.end() => (WitnessKind::SharedEndpoint, 1.0),
        None => return Ok(None),
    };
    let ratio_ladder = dyadic_ratio_ladder(space, g, h, depth)?;
    Ok(Some(BranchWitness {
        kind,
        first: g.clone(),
        second: h.clone(),
        agree_time,
        split_times,
        ratio_ladder,
    }))
}

/// Scans geodesic pairs sharing a start vertex for branching witnesses.
///
/// Spaces with at most 200 vertices are scanned exhaustively: every
/// enumerated geodesic from every start (up to the per-pair cap) is compared
/// against every other from the same start. Larger spaces draw
/// `sample_pairs` seeded start/target/target triples instead, and the scan
/// reports itself non-exhaustive.
pub fn detect_branching(space: &MetricSpace, sample_pairs: usize) -> Result<BranchScan> {
    let n = space.vertex_count();
    let mut witnesses: Vec<BranchWitness> = Vec::new();
    let mut pairs_examined = 0usize;
    let mut complete = true;

    let compare = |witnesses: &mut Vec<BranchWitness>,
                       pairs_examined: &mut usize,
                       g: &DiscreteGeodesic,
                       h: &DiscreteGeodesic|
     -> Result<bool> {
        *pairs_examined += 1;
        if let Some(w) = witness_for_pair(space, g, h, DEFAULT_DYADIC_DEPTH)? {
            witnesses.push(w);
            if witnesses.len() >= WITNESS_CAP {
                return Ok(true);
            }
        }
        Ok(false)
    };

    if n <= EXHAUSTIVE_VERTEX_LIMIT {
        'scan: for x in 0..n {
            let mut pool: Vec<DiscreteGeodesic> = Vec::new();
            for y in 0..n {
                if y == x {
                    continue;
                }
                let family = enumerate_geodesics(space, x, y, FAMILY_CAP)?;
                complete &= !family.truncated;
                pool.extend(family.geodesics);
            }
            for i in 0..pool.len() {
                for j in (i + 1)..pool.len() {
                    if compare(&mut witnesses, &mut pairs_examined, &pool[i], &pool[j])? {
                        complete = false;
                        break 'scan;
                    }
                }
            }
        }
        Ok(BranchScan { witnesses, exhaustive: complete, pairs_examined })
    } else {
        if sample_pairs == 0 {
            return Err(Error::InvalidParameter {
                reason: format!(
                    "space has {n} vertices (> {EXHAUSTIVE_VERTEX_LIMIT}); sampled \
                     detection needs sample_pairs >= 1"
                ),
            });
        }
        fn draw_not(rng: &mut ChaCha8Rng, n: usize, x: usize) -> usize {
            loop {
                let v = rng.gen_range(0..n);
                if v != x {
                    return v;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
        'sample: for _ in 0..sample_pairs {
            let x = rng.gen_range(0..n);
            let y = draw_not(&mut rng, n, x);
            let z = draw_not(&mut rng, n, x);
            let fy = enumerate_geodesics(space, x, y, FAMILY_CAP)?;
            if y == z {
                for i in 0..fy.geodesics.len() {
                    for j in (i + 1)..fy.geodesics.len() {
                        if compare(&mut witnesses, &mut pairs_examined, &fy.geodesics[i], &fy.geodesics[j])? {
                            break 'sample;
                        }
                    }
                }
            } else {
                let fz = enumerate_geodesics(space, x, z, FAMILY_CAP)?;
                for g in &fy.geodesics {
                    for h in &fz.geodesics {
                        if compare(&mut witnesses, &mut pairs_examined, g, h)? {
                            break 'sample;
                        }
                    }
                }
            }
        }
        Ok(BranchScan { witnesses, exhaustive: false, pairs_examined })
    }
}

/// Separation ratios d(g_t, h_t) / d(g_0, g_t) at t = 2⁻¹ … 2⁻ᵈᵉᵖᵗʰ.
///
/// A ratio is present only where both geodesics have a vertex exactly
/// aligned at t and g has advanced (so the denominator is positive); the
/// ladder never interpolates. The denominator follows the first geodesic,
/// so the roles of `g` and `h` are not symmetric.
pub fn dyadic_ratio_ladder(
    space: &MetricSpace,
    g: &DiscreteGeodesic,
    h: &DiscreteGeodesic,
    depth: usize,
) -> Result<Vec<DyadicRatio>> {
    if depth == 0 {
        return Err(Error::InvalidParameter { reason: "dyadic depth must be >= 1".into() });
    }
    for &v in g.vertices().iter().chain(h.vertices()) {
        if v >= space.vertex_count() {
            return Err(Error::VertexOutOfRange { v, n: space.vertex_count() });
        }
    }
    let mut out = Vec::with_capacity(depth);
    for j in 1..=depth {
        let t = 0.5f64.powi(j as i32);
        let ratio = match (g.aligned_index(t), h.aligned_index(t)) {
            (Ok(ig), Ok(ih)) if ig > 0 => {
                let vg = g.vertices()[ig];
                let vh = h.vertices()[ih];
                Some(space.dist(vg, vh) / space.dist(g.start(), vg))
            }
            _ => None,
        };
        out.push(DyadicRatio { time: t, ratio });
    }
    Ok(out)
}

/// Label for a separation ladder. A reading of the finitely many available
/// ratios — never a claim about the t ↓ 0 limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RatioVerdict {
    /// Every available ratio is positive and the finest retains at least
    /// half of the coarsest; `floor` is the smallest ratio observed.
    BoundedBelow { floor: f64 },
    /// Some ratio vanished, or the ratios decayed by more than half across
    /// the ladder; `trend` is the least-squares slope of ratio against time
    /// (0 when fewer than two ratios are available).
    Decaying { trend: f64 },
}

/// Dyadic separation ladder of a geodesic pair, with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationLadder {
    pub depth: usize,
    pub entries: Vec<DyadicRatio>,
    pub verdict: RatioVerdict,
}

/// Measures how fast two geodesics from a common start separate near t = 0.
///
/// Preconditions: the geodesics share their start, reach distinct
/// endpoints, and `g` is nonconstant. Errors with [`Error::EmptyLadder`]
/// when no dyadic time of the requested depth is vertex-aligned for both —
/// the caller's discretization is then too coarse for this probe.
pub fn strong_nonbranching_ratio(
    space: &MetricSpace,
    g: &DiscreteGeodesic,
    h: &DiscreteGeodesic,
    depth: usize,
) -> Result<SeparationLadder> {
    if g.start() != h.start() {
        return Err(Error::GeodesicPrecondition {
            reason: format!("geodesics start at {} and {}; the ratio needs a common start", g.start(), h.start()),
        });
    }
    if g.end() == h.end() {
        return Err(Error::GeodesicPrecondition {
            reason: format!("both geodesics end at {}; the ratio needs distinct endpoints", g.end()),
        });
    }
    if g.is_constant() {
        return Err(Error::GeodesicPrecondition {
            reason: "the first geodesic is constant; the denominator d(g_0, g_t) never leaves 0".into(),
        });
    }
    let entries = dyadic_ratio_ladder(space, g, h, depth)?;
    let available: Vec<(f64, f64)> = entries
        .iter()
        .filter_map(|e| e.ratio.map(|r| (e.time, r)))
        .collect();
    if available.is_empty() {
        return Err(Error::EmptyLadder);
    }
    let floor = available.iter().map(|&(_, r)| r).fold(f64::INFINITY, f64::min);
    let coarsest = available.first().expect("nonempty").1;
    let finest = available.last().expect("nonempty").1;
    let verdict = if floor > 0.0 && finest >= 0.5 * coarsest {
        RatioVerdict::BoundedBelow { floor }
    } else {
        RatioVerdict::Decaying { trend: least_squares_slope(&available) }
    };
    Ok(SeparationLadder { depth, entries, verdict })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_r = points.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_r)).sum();
    let var: f64 = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    if var == 0.0 {
        0.0
    } else {
        cov / var
    }
}

/// A closed ball with the ambient metric restricted and divided by the
/// radius. The carried matrix is the restriction of the full-space metric,
/// not the induced subgraph metric, so distances never inflate when
/// geodesics exit and re-enter the ball.
#[derive(Debug, Clone)]
pub struct RescaledBall {
    pub space: MetricSpace,
    /// Index of the center in the rescaled space.
    pub basepoint: usize,
    /// Original vertex ids, ascending; `original[i]` is rescaled vertex i.
    pub original: Vec<usize>,
    pub radius: f64,
    /// True when the surviving edges realize the carried metric: the
    /// shortest path inside the ball matches the restricted distance within
    /// 1e-9 for every vertex pair. False flags a ball whose geodesics leave
    /// it, where edge-walking operations see longer routes than `dist`.
    pub geodesically_convex: bool,
}

/// Restricts the space to the closed ball B(x, r) and divides all
/// distances by r. Labels inside the ball are carried over (re-indexed);
/// the basepoint is labeled "basepoint" if it had no label. A radius below
/// the shortest incident edge yields a valid one-point space.
pub fn rescale_ball(space: &MetricSpace, x: usize, r: f64) -> Result<RescaledBall> {
    let n = space.vertex_count();
    if x >= n {
        return Err(Error::VertexOutOfRange { v: x, n });
    }
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidParameter { reason: format!("ball radius must be positive, got {r}") });
    }
    let original = space.closed_ball(x, r);
    let k = original.len();
    let index_of = |v: usize| original.binary_search(&v).expect("ball members index themselves");
    let basepoint = index_of(x);

    let mut carried = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            carried[i * k + j] = space.dist(original[i], original[j]) / r;
        }
    }
    let surviving: Vec<(usize, usize, f64)> = space
        .edges()
        .iter()
        .filter(|e| original.binary_search(&e.u).is_ok() && original.binary_search(&e.v).is_ok())
        .map(|e| (index_of(e.u), index_of(e.v), e.w / r))
        .collect();

    let mut labels: BTreeMap<usize, String> = space
        .labels()
        .iter()
        .filter(|(&v, _)| original.binary_search(&v).is_ok())
        .map(|(&v, name)| (index_of(v), name.clone()))
        .collect();
    labels.entry(basepoint).or_insert_with(|| "basepoint".to_string());

    let geodesically_convex = induced_matches_carried(space, &original, &surviving, r);
    let ball_space = MetricSpace::from_matrix(carried, k, &surviving, labels)?;
    Ok(RescaledBall { space: ball_space, basepoint, original, radius: r, geodesically_convex })
}

/// Dijkstra over the surviving edges only, compared against the carried
/// (restricted) distances in original units.
fn induced_matches_carried(
    space: &MetricSpace,
    original: &[usize],
    surviving: &[(usize, usize, f64)],
    r: f64,
) -> bool {
    let k = original.len();
    let mut adj = vec![Vec::new(); k];
    for &(i, j, w) in surviving {
        // Undo the rescale so the comparison tolerance is in original units.
        adj[i].push((j, w * r));
        adj[j].push((i, w * r));
    }
    for s in 0..k {
        let mut dist = vec![f64::INFINITY; k];
        dist[s] = 0.0;
        let mut heap = std::collections::BinaryHeap::new();
        heap.push((std::cmp::Reverse(0u64), s));
        // Order by bit pattern of the nonnegative distance: monotone for
        // nonnegative floats, avoids a float Ord wrapper for this one check.
        while let Some((std::cmp::Reverse(bits), u)) = heap.pop() {
            if f64::from_bits(bits) > dist[u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = dist[u] + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push((std::cmp::Reverse(nd.to_bits()), v));
                }
            }
        }
        for t in 0..k {
            let carried = space.dist(original[s], original[t]);
            if !dist[t].is_finite() || (dist[t] - carried).abs() > 1e-9 * (1.0 + carried) {
                return false;
            }
        }
    }
    true
}

/// Whether a Gromov–Hausdorff value is the exact minimum or the best bound
/// found before the search budget ran out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GhMethod {
    Exact,
    UpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhDistance {
    pub value: f64,
    pub method: GhMethod,
}

/// Gromov–Hausdorff distance between finite metric spaces: half the minimal
/// distortion over correspondences.
///
/// Any correspondence R contains the union of a pair of maps f: A → B,
/// g: B → A with f(a) ∈ R(a) and g(b) ∈ R⁻¹(b); the union is itself a
/// correspondence with no larger distortion, and conversely every such
/// union is one. The minimum over correspondences therefore equals the
/// minimum over (f, g) pairs, which a branch-and-bound search explores with
/// a greedy + local-search incumbent. Within `budget` node visits the
/// search is exhaustive and the value exact; past it, the best value found
/// is returned as an upper bound. Deterministic, and symmetric bitwise:
/// the argument pair is canonicalized before searching.
pub fn gh_distance(a: &MetricSpace, b: &MetricSpace, budget: usize) -> GhDistance {
    gh_canonical(a, b, None, budget)
}

/// [`gh_distance`] restricted to correspondences pairing `pa` with `pb`:
/// the pointed distance used when comparing rescaled balls around a common
/// basepoint.
pub fn gh_distance_pinned(
    a: &MetricSpace,
    b: &MetricSpace,
    pa: usize,
    pb: usize,
    budget: usize,
) -> Result<GhDistance> {
    if pa >= a.vertex_count() {
        return Err(Error::VertexOutOfRange { v: pa, n: a.vertex_count() });
    }
    if pb >= b.vertex_count() {
        return Err(Error::VertexOutOfRange { v: pb, n: b.vertex_count() });
    }
    Ok(gh_canonical(a, b, Some((pa, pb)), budget))
}

/// Orders the pair so the search always sees the same (A, B): smaller space
/// first, ties broken by the lexicographically smaller distance matrix.
fn gh_canonical(a: &MetricSpace, b: &MetricSpace, pin: Option<(usize, usize)>, budget: usize) -> GhDistance {
    let swap = match a.vertex_count().cmp(&b.vertex_count()) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => matrix_lex_greater(a, b),
    };
    if swap {
        gh_search(b, a, pin.map(|(pa, pb)| (pb, pa)), budget)
    } else {
        gh_search(a, b, pin, budget)
    }
}

fn matrix_lex_greater(a: &MetricSpace, b: &MetricSpace) -> bool {
    let n = a.vertex_count();
    for i in 0..n {
        for j in 0..n {
            match a.dist(i, j).total_cmp(&b.dist(i, j)) {
                std::cmp::Ordering::Greater => return true,
                std::cmp::Ordering::Less => return false,
                std::cmp::Ordering::Equal => {}
            }
        }
    }
    false
}

/// Max distortion of the correspondence graph(f) ∪ graph(g).
fn full_distortion(a: &MetricSpace, b: &MetricSpace, fa: &[usize], gb: &[usize]) -> f64 {
    let (na, nb) = (a.vertex_count(), b.vertex_count());
    let mut worst: f64 = 0.0;
    for i in 0..na {
        for j in (i + 1)..na {
            worst = worst.max((a.dist(i, j) - b.dist(fa[i], fa[j])).abs());
        }
    }
    for k in 0..nb {
        for l in (k + 1)..nb {
            worst = worst.max((b.dist(k, l) - a.dist(gb[k], gb[l])).abs());
        }
    }
    for i in 0..na {
        for k in 0..nb {
            worst = worst.max((a.dist(i, gb[k]) - b.dist(fa[i], k)).abs());
        }
    }
    worst
}

struct GhSearch<'a> {
    a: &'a MetricSpace,
    b: &'a MetricSpace,
    pin: Option<(usize, usize)>,
    order_f: Vec<usize>,
    order_g: Vec<usize>,
    fa: Vec<usize>,
    gb: Vec<usize>,
    best: f64,
    nodes: usize,
    budget: usize,
    aborted: bool,
}

impl GhSearch<'_> {
    fn candidates_f(&self, slot_vertex: usize) -> std::ops::Range<usize> {
        match self.pin {
            Some((pa, pb)) if slot_vertex == pa => pb..pb + 1,
            _ => 0..self.b.vertex_count(),
        }
    }

    fn candidates_g(&self, slot_vertex: usize) -> std::ops::Range<usize> {
        match self.pin {
            Some((pa, pb)) if slot_vertex == pb => pa..pa + 1,
            _ => 0..self.a.vertex_count(),
        }
    }

    fn descend_f(&mut self, slot: usize, running: f64) {
        if slot == self.order_f.len() {
            self.descend_g(0, running);
            return;
        }
        let i = self.order_f[slot];
        for cand in self.candidates_f(i) {
            if self.aborted {
                return;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                self.aborted = true;
                return;
            }
            let mut m = running;
            for &j in &self.order_f[..slot] {
                m = m.max((self.a.dist(i, j) - self.b.dist(cand, self.fa[j])).abs());
                if m >= self.best {
                    break;
                }
            }
            if m >= self.best {
                continue;
            }
            self.fa[i] = cand;
            self.descend_f(slot + 1, m);
        }
    }

    fn descend_g(&mut self, slot: usize, running: f64) {
        if slot == self.order_g.len() {
            // Pruning kept running < best on the way down, so this is a
            // strict improvement and already the full distortion.
            self.best = running;
            return;
        }
        let k = self.order_g[slot];
        for cand in self.candidates_g(k) {
            if self.aborted {
                return;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                self.aborted = true;
                return;
            }
            let mut m = running;
            for &l in &self.order_g[..slot] {
                m = m.max((self.b.dist(k, l) - self.a.dist(cand, self.gb[l])).abs());
                if m >= self.best {
                    break;
                }
            }
            if m < self.best {
                for i in 0..self.a.vertex_count() {
                    m = m.max((self.a.dist(i, cand) - self.b.dist(self.fa[i], k)).abs());
                    if m >= self.best {
                        break;
                    }
                }
            }
            if m >= self.best {
                continue;
            }
            self.gb[k] = cand;
            self.descend_g(slot + 1, m);
        }
    }
}

/// The full search: greedy seed, local-search improvement, then
/// branch-and-bound. Requires a.n ≤ b.n (callers canonicalize).
fn gh_search(a: &MetricSpace, b: &MetricSpace, pin: Option<(usize, usize)>, budget: usize) -> GhDistance {
    let (na, nb) = (a.vertex_count(), b.vertex_count());
    debug_assert!(na <= nb);
    let pinned_first = |n: usize, p: Option<usize>| -> Vec<usize> {
        let mut order: Vec<usize> = Vec::with_capacity(n);
        if let Some(p) = p {
            order.push(p);
        }
        order.extend((0..n).filter(|&v| Some(v) != p));
        order
    };
    let order_f = pinned_first(na, pin.map(|(pa, _)| pa));
    let order_g = pinned_first(nb, pin.map(|(_, pb)| pb));

    let (fa, gb) = greedy_assignment(a, b, pin, &order_f, &order_g);
    let (fa, gb, incumbent) = local_search(a, b, pin, fa, gb);

    let mut search = GhSearch {
        a,
        b,
        pin,
        order_f,
        order_g,
        fa,
        gb,
        best: incumbent,
        nodes: 0,
        budget,
        aborted: false,
    };
    search.descend_f(0, 0.0);
    GhDistance {
        value: search.best / 2.0,
        method: if search.aborted { GhMethod::UpperBound } else { GhMethod::Exact },
    }
}

/// Slot-by-slot greedy: each assignment minimizes the incremental max
/// distortion against everything assigned so far, ties to the smaller
/// candidate.
fn greedy_assignment(
    a: &MetricSpace,
    b: &MetricSpace,
    pin: Option<(usize, usize)>,
    order_f: &[usize],
    order_g: &[usize],
) -> (Vec<usize>, Vec<usize>) {
    let (na, nb) = (a.vertex_count(), b.vertex_count());
    let mut fa = vec![0usize; na];
    for (slot, &i) in order_f.iter().enumerate() {
        let candidates: Vec<usize> = match pin {
            Some((pa, pb)) if i == pa => vec![pb],
            _ => (0..nb).collect(),
        };
        let mut best_cand = candidates[0];
        let mut best_val = f64::INFINITY;
        for &cand in &candidates {
            let mut m: f64 = 0.0;
            for &j in &order_f[..slot] {
                m = m.max((a.dist(i, j) - b.dist(cand, fa[j])).abs());
            }
            if m < best_val {
                best_val = m;
                best_cand = cand;
            }
        }
        fa[i] = best_cand;
    }
    let mut gb = vec![0usize; nb];
    for (slot, &k) in order_g.iter().enumerate() {
        let candidates: Vec<usize> = match pin {
            Some((pa, pb)) if k == pb => vec![pa],
            _ => (0..na).collect(),
        };
        let mut best_cand = candidates[0];
        let mut best_val = f64::INFINITY;
        for &cand in &candidates {
            let mut m: f64 = 0.0;
            for &l in &order_g[..slot] {
                m = m.max((b.dist(k, l) - a.dist(cand, gb[l])).abs());
            }
            for i in 0..na {
                m = m.max((a.dist(i, cand) - b.dist(fa[i], k)).abs());
            }
            if m < best_val {
                best_val = m;
                best_cand = cand;
            }
        }
        gb[k] = best_cand;
    }
    (fa, gb)
}

/// Deterministic single-reassignment sweeps until no strict improvement
/// (at most 8 sweeps).
fn local_search(
    a: &MetricSpace,
    b: &MetricSpace,
    pin: Option<(usize, usize)>,
    mut fa: Vec<usize>,
    mut gb: Vec<usize>,
) -> (Vec<usize>, Vec<usize>, f64) {
    let (na, nb) = (a.vertex_count(), b.vertex_count());
    let mut value = full_distortion(a, b, &fa, &gb);
    for _ in 0..8 {
        let mut improved = false;
        for i in 0..na {
            if matches!(pin, Some((pa, _)) if i == pa) {
                continue;
            }
            let saved = fa[i];
            for cand in 0..nb {
                if cand == saved {
                    continue;
                }
                fa[i] = cand;
                let v = full_distortion(a, b, &fa, &gb);
                if v < value {
                    value = v;
                    improved = true;
                } else {
                    fa[i] = saved;
                }
                if fa[i] == cand {
                    break;
                }
            }
        }
        for k in 0..nb {
            if matches!(pin, Some((_, pb)) if k == pb) {
                continue;
            }
            let saved = gb[k];
            for cand in 0..na {
                if cand == saved {
                    continue;
                }
                gb[k] = cand;
                let v = full_distortion(a, b, &fa, &gb);
                if v < value {
                    value = v;
                    improved = true;
                } else {
                    gb[k] = saved;
                }
                if gb[k] == cand {
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
    (fa, gb, value)
}

/// One rescaled ball along a tangent ladder, with its branch scan.
#[derive(Debug, Clone)]
pub struct TangentLevel {
    pub radius: f64,
    pub ball: RescaledBall,
    pub scan: BranchScan,
}

/// Pointed comparison of two consecutive ladder levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentStep {
    pub coarse_radius: f64,
    pub fine_radius: f64,
    pub distance: f64,
    pub method: GhMethod,
}

/// Rescaled balls around one basepoint across a radius ladder, with the
/// pointed Gromov–Hausdorff distance between consecutive levels.
#[derive(Debug, Clone)]
pub struct TangentLadderReport {
    pub basepoint: usize,
    pub levels: Vec<TangentLevel>,
    pub steps: Vec<TangentStep>,
    /// Interpretation caveat attached to every emitted report.
    pub legend: &'static str,
}

pub const TANGENT_LEGEND: &str = "Consecutive rescaled balls are compared with basepoints pinned. \
     Small, stabilizing step distances are consistent with a limiting local structure but cannot \
     identify one: different radius subsequences may stabilize differently, and the vertex \
     resolution of each ball changes with its radius.";

/// Builds the rescaled-ball ladder at `x` and compares consecutive levels.
/// Branch scans inside balls beyond the exhaustive limit fall back to
/// seeded sampling.
pub fn tangent_ladder_report(
    space: &MetricSpace,
    x: usize,
    ladder: &ScaleLadder,
    budget: usize,
) -> Result<TangentLadderReport> {
    let mut levels = Vec::with_capacity(ladder.radii().len());
    for &r in ladder.radii() {
        let ball = rescale_ball(space, x, r)?;
        let scan = detect_branching(&ball.space, DEFAULT_SAMPLE_PAIRS)?;
        levels.push(TangentLevel { radius: r, ball, scan });
    }
    let mut steps = Vec::new();
    for pair in levels.windows(2) {
        let (coarse, fine) = (&pair[0], &pair[1]);
        let gh = gh_distance_pinned(
            &coarse.ball.space,
            &fine.ball.space,
            coarse.ball.basepoint,
            fine.ball.basepoint,
            budget,
        )?;
        steps.push(TangentStep {
            coarse_radius: coarse.radius,
            fine_radius: fine.radius,
            distance: gh.value,
            method: gh.method,
        });
    }
    Ok(TangentLadderReport { basepoint: x, levels, steps, legend: TANGENT_LEGEND })
}
