//! Shared fixtures for the acceptance suite: a seeded random-instance
//! generator and an exhaustive Gromov–Hausdorff oracle. The oracle is
//! deliberately plain nested loops with no pruning, so it shares nothing
//! with the library's branch-and-bound search beyond the definition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use otlab_core::{Measure, MetricSpace};

/// Random connected weighted graph with random probability marginals. A
/// spanning tree with random parents keeps it connected; extra chords keep
/// geodesics non-unique often enough to exercise the lift.
pub fn random_instance(seed: u64, max_vertices: usize) -> (MetricSpace, Measure, Measure) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_vertices);
    let mut edges: Vec<(usize, usize, f64)> = (1..n)
        .map(|v| (rng.gen_range(0..v), v, rng.gen_range(0.1..2.0)))
        .collect();
    for _ in 0..n {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        let (u, v) = (u.min(v), u.max(v));
        if u != v && !edges.iter().any(|&(a, b, _)| (a, b) == (u, v)) {
            edges.push((u, v, rng.gen_range(0.1..2.0)));
        }
    }
    let space = MetricSpace::build(n, &edges, Default::default())
        .expect("spanning tree keeps the graph connected");
    let mu = random_probability(&mut rng, n);
    let nu = random_probability(&mut rng, n);
    (space, mu, nu)
}

fn random_probability(rng: &mut ChaCha8Rng, n: usize) -> Measure {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    Measure::new(raw.into_iter().map(|m| m / total).collect())
        .expect("normalized masses form a probability measure")
}

/// Exhaustive Gromov–Hausdorff distance over map pairs.
///
/// Every correspondence contains the union of the graphs of some f: A → B
/// and g: B → A, and every such union is itself a correspondence, so
/// minimizing the union's distortion over all (f, g) pairs is exact. Usable
/// up to five points per side.
pub fn gh_oracle(a: &MetricSpace, b: &MetricSpace) -> f64 {
    let (na, nb) = (a.vertex_count(), b.vertex_count());
    let maps_ab = enumerate_maps(na, nb);
    let maps_ba = enumerate_maps(nb, na);
    let mut best = f64::INFINITY;
    for f in &maps_ab {
        let mut dis_f: f64 = 0.0;
        for i in 0..na {
            for j in 0..na {
                dis_f = dis_f.max((a.dist(i, j) - b.dist(f[i], f[j])).abs());
            }
        }
        for g in &maps_ba {
            let mut dis = dis_f;
            for p in 0..nb {
                for q in 0..nb {
                    dis = dis.max((b.dist(p, q) - a.dist(g[p], g[q])).abs());
                }
            }
            for i in 0..na {
                for p in 0..nb {
                    dis = dis.max((a.dist(i, g[p]) - b.dist(f[i], p)).abs());
                }
            }
            best = best.min(dis);
        }
    }
    best / 2.0
}

fn enumerate_maps(from: usize, to: usize) -> Vec<Vec<usize>> {
    let count = to.pow(from as u32);
    let mut out = Vec::with_capacity(count);
    for code in 0..count {
        let mut map = Vec::with_capacity(from);
        let mut c = code;
        for _ in 0..from {
            map.push(c % to);
            c /= to;
        }
        out.push(map);
    }
    out
}
