//! Finite geodesic metric spaces as positively weighted graphs.
//!
//! A [`MetricSpace`] caches the full all-pairs shortest-path matrix, so every
//! distance lookup downstream is exact and O(1). Geodesics are shortest edge
//! paths carrying a constant-speed parameterization on [0,1]: vertex `v_i`
//! sits at time `t_i` = (prefix length to `v_i`) / (total length), so
//! `dist(v_i, v_j) = |t_i - t_j| * length` holds at vertex-aligned times with
//! no discretization error (subpaths of shortest paths are shortest).
//!
//! Evaluation at a non-aligned time snaps to the nearest path vertex and
//! reports the snap error instead of interpolating; downstream identities
//! stay exact on aligned times and degrade auditably off them.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when classifying a path or edge as shortest.
pub const PATH_REL_TOL: f64 = 1e-9;

/// An undirected edge with a strictly positive length. Stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Finite metric space backed by a connected weighted graph.
///
/// Invariants established at construction:
/// - the graph is connected and every edge weight is strictly positive;
/// - `dist` is symmetric, zero exactly on the diagonal, and satisfies the
///   triangle inequality;
/// - `dist(u,v) <= w` for every edge `(u,v,w)`.
#[derive(Debug, Clone)]
pub struct MetricSpace {
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<(usize, f64)>>,
    dist: Vec<f64>,
    labels: BTreeMap<usize, String>,
}

impl MetricSpace {
    /// Builds a space from an edge list, deriving distances by Dijkstra from
    /// every source.
    pub fn build(n: usize, edges: &[(usize, usize, f64)], labels: BTreeMap<usize, String>) -> Result<Self> {
        let edges = normalize_edges(n, edges)?;
        let adj = adjacency(n, &edges);
        let dist = all_pairs(n, &adj)?;
        for (&v, _) in &labels {
            if v >= n {
                return Err(Error::VertexOutOfRange { v, n });
            }
        }
        Ok(MetricSpace { n, edges, adj, dist, labels })
    }

    /// Builds a space from an explicit distance matrix plus the edges that
    /// are known to exist (used for rescaled balls, where the metric is
    /// carried over rather than re-derived and the induced edge set may not
    /// realize it). Validates the metric axioms and edge consistency.
    pub fn from_matrix(
        dist: Vec<f64>,
        n: usize,
        edges: &[(usize, usize, f64)],
        labels: BTreeMap<usize, String>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        if dist.len() != n * n {
            return Err(Error::NotAMetric {
                reason: format!("matrix has {} entries, expected {}", dist.len(), n * n),
            });
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(Error::NotAMetric { reason: format!("nonzero diagonal at {i}") });
            }
            for j in 0..n {
                let d = dist[i * n + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::NotAMetric { reason: format!("bad entry ({i},{j}) = {d}") });
                }
                if i != j && d == 0.0 {
                    return Err(Error::NotAMetric { reason: format!("zero distance between {i} and {j}") });
                }
                if (dist[j * n + i] - d).abs() > 1e-12 * (1.0 + d.abs()) {
                    return Err(Error::NotAMetric { reason: format!("asymmetric at ({i},{j})") });
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs = dist[i * n + j];
                    let rhs = dist[i * n + k] + dist[k * n + j];
                    if lhs > rhs + 1e-12 * (1.0 + lhs) {
                        return Err(Error::NotAMetric {
                            reason: format!("triangle violated: d({i},{j}) > d({i},{k}) + d({k},{j})"),
                        });
                    }
                }
            }
        }
        let edges = normalize_edges(n, edges)?;
        for e in &edges {
            let d = dist[e.u * n + e.v];
            if e.w < d - 1e-9 * (1.0 + d) {
                return Err(Error::NotAMetric {
                    reason: format!("edge ({},{}) shorter than carried distance: {} < {}", e.u, e.v, e.w, d),
                });
            }
        }
        let adj = adjacency(n, &edges);
        Ok(MetricSpace { n, edges, adj, dist, labels })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `u` with edge weights, sorted by vertex id.
    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adj[u]
    }

    pub fn dist(&self, u: usize, v: usize) -> f64 {
        self.dist[u * self.n + v]
    }

    pub fn labels(&self) -> &BTreeMap<usize, String> {
        &self.labels
    }

    pub fn label(&self, v: usize) -> Option<&str> {
        self.labels.get(&v).map(|s| s.as_str())
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().cloned().fold(0.0, f64::max)
    }

    /// Smallest edge weight; the finest resolvable scale.
    pub fn min_edge_weight(&self) -> Option<f64> {
        self.edges.iter().map(|e| e.w).fold(None, |acc, w| {
            Some(acc.map_or(w, |a: f64| a.min(w)))
        })
    }

    /// Weight of the edge between `u` and `v`, if present.
    pub fn edge_weight(&self, u: usize, v: usize) -> Option<f64> {
        self.adj[u]
            .binary_search_by(|(x, _)| x.cmp(&v))
            .ok()
            .map(|i| self.adj[u][i].1)
    }

    /// Vertices within the closed ball of radius `r` around `x`, ascending.
    pub fn closed_ball(&self, x: usize, r: f64) -> Vec<usize> {
        (0..self.n).filter(|&v| self.dist(x, v) <= r).collect()
    }

    /// Checks whether edge (u,v,w) lies on some shortest path from `x` to `y`
    /// when traversed u -> v.
    fn on_shortest(&self, x: usize, y: usize, u: usize, v: usize, w: f64) -> bool {
        let d = self.dist(x, y);
        let via = self.dist(x, u) + w + self.dist(v, y);
        (via - d).abs() <= PATH_REL_TOL * d.max(1.0)
    }
}

fn normalize_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Vec<Edge>> {
    if n == 0 {
        return Err(Error::EmptySpace);
    }
    let mut out = Vec::with_capacity(edges.len());
    for &(u, v, w) in edges {
        if u >= n {
            return Err(Error::VertexOutOfRange { v: u, n });
        }
        if v >= n {
            return Err(Error::VertexOutOfRange { v, n });
        }
        if u == v {
            return Err(Error::SelfLoop { u, v });
        }
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::BadWeight { u, v, w });
        }
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        out.push(Edge { u: a, v: b, w });
    }
    out.sort_by(|a, b| (a.u, a.v).cmp(&(b.u, b.v)));
    for pair in out.windows(2) {
        if pair[0].u == pair[1].u && pair[0].v == pair[1].v {
            return Err(Error::DuplicateEdge { u: pair[0].u, v: pair[0].v });
        }
    }
    Ok(out)
}

fn adjacency(n: usize, edges: &[Edge]) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.u].push((e.v, e.w));
        adj[e.v].push((e.u, e.w));
    }
    for list in &mut adj {
        list.sort_by(|a, b| a.0.cmp(&b.0));
    }
    adj
}

#[derive(PartialEq)]
struct HeapEntry {
    d: f64,
    v: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance; weights are finite so partial_cmp is total.
        other
            .d
            .partial_cmp(&self.d)
            .unwrap()
            .then_with(|| other.v.cmp(&self.v))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn all_pairs(n: usize, adj: &[Vec<(usize, f64)>]) -> Result<Vec<f64>> {
    let mut dist = vec![f64::INFINITY; n * n];
    for s in 0..n {
        let row = &mut dist[s * n..(s + 1) * n];
        row[s] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry { d: 0.0, v: s });
        while let Some(HeapEntry { d, v }) = heap.pop() {
            if d > row[v] {
                continue;
            }
            for &(u, w) in &adj[v] {
                let nd = d + w;
                if nd < row[u] {
                    row[u] = nd;
                    heap.push(HeapEntry { d: nd, v: u });
                }
            }
        }
        if let Some(unreached) = row.iter().position(|d| !d.is_finite()) {
            let reached = row.iter().filter(|d| d.is_finite()).count();
            return Err(Error::Disconnected { unreached, reached, total: n });
        }
    }
    // The two directed runs sum the same edge weights in opposite order and
    // can disagree in the last ulp. Both sums are lengths of actual paths, so
    // the smaller one is the sharper estimate; storing it on both sides makes
    // the matrix exactly symmetric.
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist[i * n + j].min(dist[j * n + i]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    Ok(dist)
}

/// A shortest path with constant-speed times on [0,1].
///
/// The constant geodesic at a vertex is represented by a single vertex with
/// times `[0.0]` and length 0; evaluation at any time returns that vertex
/// with zero snap error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteGeodesic {
    vertices: Vec<usize>,
    times: Vec<f64>,
    length: f64,
}

impl DiscreteGeodesic {
    /// Wraps a vertex path after checking it is a shortest path. The stored
    /// length is the cached distance between the endpoints, so plan costs and
    /// lifted costs are bitwise identical downstream.
    pub fn from_path(space: &MetricSpace, path: &[usize]) -> Result<Self> {
        if path.is_empty() {
            return Err(Error::EmptyPath);
        }
        for &v in path {
            if v >= space.vertex_count() {
                return Err(Error::VertexOutOfRange { v, n: space.vertex_count() });
            }
        }
        if path.len() == 1 {
            return Ok(DiscreteGeodesic { vertices: path.to_vec(), times: vec![0.0], length: 0.0 });
        }
        let x = path[0];
        let y = path[path.len() - 1];
        let mut prefix = Vec::with_capacity(path.len());
        prefix.push(0.0);
        let mut acc = 0.0;
        for pair in path.windows(2) {
            let w = space
                .edge_weight(pair[0], pair[1])
                .ok_or(Error::MissingEdge { u: pair[0], v: pair[1] })?;
            acc += w;
            prefix.push(acc);
        }
        let dist = space.dist(x, y);
        if (acc - dist).abs() > PATH_REL_TOL * dist.max(1.0) {
            return Err(Error::NotShortest { x, y, len: acc, dist });
        }
        let times = prefix.iter().map(|p| p / acc).collect();
        Ok(DiscreteGeodesic { vertices: path.to_vec(), times, length: dist })
    }

    pub fn constant(v: usize) -> Self {
        DiscreteGeodesic { vertices: vec![v], times: vec![0.0], length: 0.0 }
    }

    pub fn start(&self) -> usize {
        self.vertices[0]
    }

    pub fn end(&self) -> usize {
        *self.vertices.last().unwrap()
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Aligned times, one per vertex; `[0.0]` for the constant geodesic.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_constant(&self) -> bool {
        self.vertices.len() == 1
    }

    /// Index of the aligned time nearest to `t`, ties to the smaller index.
    pub fn nearest_aligned(&self, t: f64) -> usize {
        let mut best = 0;
        let mut best_gap = (t - self.times[0]).abs();
        for (i, &ti) in self.times.iter().enumerate().skip(1) {
            let gap = (t - ti).abs();
            if gap < best_gap {
                best = i;
                best_gap = gap;
            }
        }
        best
    }

    /// Index of the vertex exactly aligned at `t`, within 1e-12.
    pub fn aligned_index(&self, t: f64) -> Result<usize> {
        let i = self.nearest_aligned(t);
        if (self.times[i] - t).abs() <= 1e-12 {
            Ok(i)
        } else {
            Err(Error::TimeNotAligned { t, nearest: self.times[i] })
        }
    }
}

/// Result of evaluating a geodesic at a time: the snapped vertex and the
/// arc-length error committed by snapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnappedPoint {
    pub vertex: usize,
    pub time: f64,
    pub snapped_time: f64,
    pub snap_error: f64,
}

/// Evaluates `g` at time `t`, snapping to the nearest aligned vertex (ties to
/// the smaller index). `snap_error = |t - t_i| * length` is zero exactly when
/// `t` is vertex-aligned.
pub fn geodesic_point(g: &DiscreteGeodesic, t: f64) -> Result<SnappedPoint> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeOutOfRange { t });
    }
    let i = g.nearest_aligned(t);
    let snapped_time = g.times()[i];
    Ok(SnappedPoint {
        vertex: g.vertices()[i],
        time: t,
        snapped_time,
        snap_error: (t - snapped_time).abs() * g.length(),
    })
}

/// All shortest paths from `x` to `y` in lexicographic order of their vertex
/// sequences, truncated at `cap`.
#[derive(Debug, Clone)]
pub struct GeodesicFamily {
    pub geodesics: Vec<DiscreteGeodesic>,
    pub truncated: bool,
}

/// Enumerates all distinct shortest paths from `x` to `y` by walking the
/// shortest-path DAG depth-first with neighbors in ascending vertex order,
/// which yields lexicographic order of vertex sequences. `x == y` yields the
/// constant geodesic.
pub fn enumerate_geodesics(space: &MetricSpace, x: usize, y: usize, cap: usize) -> Result<GeodesicFamily> {
    let n = space.vertex_count();
    if x >= n {
        return Err(Error::VertexOutOfRange { v: x, n });
    }
    if y >= n {
        return Err(Error::VertexOutOfRange { v: y, n });
    }
    if cap == 0 {
        return Err(Error::InvalidParameter { reason: "cap must be >= 1".into() });
    }
    if x == y {
        return Ok(GeodesicFamily { geodesics: vec![DiscreteGeodesic::constant(x)], truncated: false });
    }

    let mut out = Vec::new();
    let mut truncated = false;
    let mut path = vec![x];
    // Iterative DFS; each frame holds the index of the next neighbor to try.
    let mut cursors = vec![0usize];
    'dfs: loop {
        let u = *path.last().unwrap();
        if u == y {
            if out.len() == cap {
                truncated = true;
            } else {
                out.push(DiscreteGeodesic::from_path(space, &path)?);
            }
            path.pop();
            cursors.pop();
            if path.is_empty() || truncated {
                break;
            }
            continue;
        }
        let cursor = *cursors.last().unwrap();
        let nbrs = space.neighbors(u);
        for (offset, &(v, w)) in nbrs[cursor..].iter().enumerate() {
            if space.on_shortest(x, y, u, v, w) && space.dist(x, v) > space.dist(x, u) {
                *cursors.last_mut().unwrap() = cursor + offset + 1;
                path.push(v);
                cursors.push(0);
                continue 'dfs;
            }
        }
        path.pop();
        cursors.pop();
        if path.is_empty() {
            break;
        }
    }
    Ok(GeodesicFamily { geodesics: out, truncated })
}

/// Sup distance between two geodesics over the merged aligned time grid,
/// together with the snapping correction that upper-bounds the deviation from
/// the continuum sup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupDistance {
    /// max over merged grid times of dist(g(t), h(t)).
    pub value: f64,
    /// max over the grid of the two snap errors' sum.
    pub correction: f64,
}

/// Evaluates both geodesics on the union of their aligned time grids and
/// takes the max pointwise distance. Symmetric; at least
/// `max(dist(g_0,h_0), dist(g_1,h_1))` because endpoint times are aligned in
/// both paths.
pub fn geodesic_sup_distance(space: &MetricSpace, g: &DiscreteGeodesic, h: &DiscreteGeodesic) -> Result<SupDistance> {
    let mut grid: Vec<f64> = g.times().iter().chain(h.times().iter()).cloned().collect();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let mut value: f64 = 0.0;
    let mut correction: f64 = 0.0;
    for &t in &grid {
        let pg = geodesic_point(g, t.min(1.0))?;
        let ph = geodesic_point(h, t.min(1.0))?;
        value = value.max(space.dist(pg.vertex, ph.vertex));
        correction = correction.max(pg.snap_error + ph.snap_error);
    }
    Ok(SupDistance { value, correction })
}

/// Sum of edge weights along a vertex path; the discrete curve length.
/// Repeated vertices are allowed (curves may backtrack); each consecutive
/// pair must be an edge.
pub fn curve_length(space: &MetricSpace, path: &[usize]) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    for &v in path {
        if v >= space.vertex_count() {
            return Err(Error::VertexOutOfRange { v, n: space.vertex_count() });
        }
    }
    let mut acc = 0.0;
    for pair in path.windows(2) {
        acc += space
            .edge_weight(pair[0], pair[1])
            .ok_or(Error::MissingEdge { u: pair[0], v: pair[1] })?;
    }
    Ok(acc)
}
