//! Deterministic benchmark fixtures.
//!
//! Mid-sized instances shared by the bench targets, built here so every
//! measurement drives the same data. Nothing in this crate is part of the
//! lab's public API.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use otlab_core::{build_grid, Measure, MetricSpace};

/// 5×5 unit grid, uniform mass on the two left columns flowing to the two
/// right columns: a solver instance with many co-optimal plans.
pub fn grid_shift_instance() -> (MetricSpace, Measure, Measure) {
    let space = build_grid(5, 5).expect("grid builds");
    let left: Vec<usize> = (0..25).filter(|v| v % 5 < 2).collect();
    let right: Vec<usize> = (0..25).filter(|v| v % 5 >= 3).collect();
    let mut mu = vec![0.0; 25];
    let mut nu = vec![0.0; 25];
    for &v in &left {
        mu[v] = 0.1;
    }
    for &v in &right {
        nu[v] = 0.1;
    }
    let mu = Measure::new(mu).expect("source is a probability measure");
    let nu = Measure::new(nu).expect("target is a probability measure");
    (space, mu, nu)
}

/// Random connected weighted graph with random marginals: a spanning chain
/// keeps it connected, extra chords keep geodesics non-unique.
pub fn random_instance(n: usize, seed: u64) -> (MetricSpace, Measure, Measure) {
    assert!(n >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize, f64)> = (1..n)
        .map(|v| (v - 1, v, rng.gen_range(0.2..1.8)))
        .collect();
    for _ in 0..n {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        let (u, v) = (u.min(v), u.max(v));
        if u != v && !edges.iter().any(|&(a, b, _)| (a, b) == (u, v)) {
            edges.push((u, v, rng.gen_range(0.2..1.8)));
        }
    }
    let space = MetricSpace::build(n, &edges, Default::default()).expect("graph is connected");
    let mu = random_measure(&mut rng, n);
    let nu = random_measure(&mut rng, n);
    (space, mu, nu)
}

fn random_measure(rng: &mut ChaCha8Rng, n: usize) -> Measure {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    Measure::new(raw.into_iter().map(|m| m / total).collect())
        .expect("normalized masses form a probability measure")
}

/// Piecewise-sawtooth potential: enough structure that c-transforms do not
/// collapse to a constant.
pub fn sawtooth(n: usize) -> Vec<f64> {
    (0..n).map(|v| (v % 7) as f64 * 0.3 - (v % 3) as f64).collect()
}
