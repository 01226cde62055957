//! Acceptance gate: ten release criteria, one test per criterion, each at
//! its stated tolerance and runtime budget. Every test prints one
//! `criterion NN PASS — …` line on success, so a `--nocapture` run reads as
//! a checklist; an assert failure turns that criterion's cargo line into the
//! FAIL line.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::tempdir;

use otlab_core::branching::DEFAULT_GH_BUDGET;
use otlab_core::{
    arc_space_audit, build_cycle, build_dyadic_arc_space, build_grid, build_segment,
    build_tripod, check_cyclical_monotonicity, compute_slope_report, detect_branching,
    emit_report, enumerate_geodesics, gh_distance, lift_to_geodesic_plan,
    potential_quotient_bounds, run, solve_dual, solve_kantorovich, strong_nonbranching_ratio,
    verify_potential, ExperimentConfig, ExperimentName, GhMethod, LadderSpec, MeasureSpec,
    MetricSpace, PlanEntry, RatioVerdict, ScaleLadder, SpaceSpec, Tolerances, TransportPlan,
};

fn conclude(criterion: &str, start: Instant, budget_secs: Option<u64>, detail: &str) {
    let elapsed = start.elapsed();
    if let Some(b) = budget_secs {
        assert!(
            elapsed <= Duration::from_secs(b),
            "criterion {criterion} exceeded its {b} s budget: {elapsed:?}"
        );
    }
    println!("criterion {criterion} PASS — {detail} [{elapsed:.2?}]");
}

#[test]
fn criterion_01_duality_suite() {
    let start = Instant::now();
    let (mut worst_gap, mut worst_feas, mut worst_cc, mut worst_slack) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in 0..100 {
        let (space, mu, nu) = common::random_instance(seed, 50);
        let plan = solve_kantorovich(&space, &mu, &nu).unwrap();
        let pair = solve_dual(&space, &mu, &nu).unwrap();

        let rel_gap = (plan.cost() - 2.0 * pair.dual_value()).abs() / plan.cost().max(1.0);
        let feas = pair.feasibility_defect(&space);
        let cc = pair.c_concavity_defect(&space).unwrap();
        let slack = verify_potential(&pair, &plan, &space).max_residual;

        assert!(rel_gap <= 1e-7, "seed {seed}: relative duality gap {rel_gap:e}");
        assert!(feas <= 1e-9, "seed {seed}: feasibility defect {feas:e}");
        assert!(cc <= 1e-9, "seed {seed}: c-concavity defect {cc:e}");
        assert!(slack <= 1e-7, "seed {seed}: slackness residual {slack:e}");

        worst_gap = worst_gap.max(rel_gap);
        worst_feas = worst_feas.max(feas);
        worst_cc = worst_cc.max(cc);
        worst_slack = worst_slack.max(slack);
    }
    conclude(
        "01",
        start,
        Some(30),
        &format!(
            "100 instances; worst rel gap {worst_gap:.1e}, feasibility {worst_feas:.1e}, \
             c-concavity {worst_cc:.1e}, slackness {worst_slack:.1e}"
        ),
    );
}

#[test]
fn criterion_02_cyclical_monotonicity() {
    let start = Instant::now();
    let mut cycles_total = 0usize;
    for seed in 1000..1030 {
        let (space, mu, nu) = common::random_instance(seed, 10);
        let plan = solve_kantorovich(&space, &mu, &nu).unwrap();
        // Basic solutions carry at most |supp μ| + |supp ν| − 1 entries, so
        // ten vertices keep the support well inside the exhaustive regime.
        assert!(plan.entries().len() <= 20);
        let report = check_cyclical_monotonicity(&space, &plan, 4).unwrap();
        assert!(report.passes, "seed {seed}: cycle excess {:e}", report.worst_excess);
        assert!(report.violation.is_none());
        cycles_total += report.cycles_checked;
    }

    let two = MetricSpace::build(2, &[(0, 1, 1.0)], Default::default()).unwrap();
    let swap = TransportPlan::from_entries(
        &two,
        vec![PlanEntry { x: 0, y: 1, mass: 0.5 }, PlanEntry { x: 1, y: 0, mass: 0.5 }],
        false,
    )
    .unwrap();
    let report = check_cyclical_monotonicity(&two, &swap, 4).unwrap();
    assert!(!report.passes, "the swap plan must be rejected");
    let cycle = report.violation.expect("rejection must name the violating cycle");
    assert_eq!(cycle.len(), 2);
    assert!(cycle.contains(&(0, 1)) && cycle.contains(&(1, 0)));
    assert_eq!(report.worst_excess, 2.0, "reassigning the swap saves exactly 2·d²");
    conclude(
        "02",
        start,
        Some(10),
        &format!("{cycles_total} cycles over 30 optimal supports clean; swap instance rejected with its 2-cycle"),
    );
}

#[test]
fn criterion_03_first_order_bound() {
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0usize;
    for seed in 0..100 {
        let (space, mu, nu) = common::random_instance(seed, 50);
        let plan = solve_kantorovich(&space, &mu, &nu).unwrap();
        let pair = solve_dual(&space, &mu, &nu).unwrap();
        let lifted = lift_to_geodesic_plan(&plan, &space).unwrap();
        let phi = pair.phi();
        for (g, _mass) in lifted.entries() {
            let d = g.length();
            let x = g.start();
            for (i, &v) in g.vertices().iter().enumerate() {
                let t = g.times()[i];
                let drop = phi[x] - phi[v];
                let bound = (2.0 * t - t * t) / 2.0 * d * d;
                worst = worst.max(bound - drop);
                checked += 1;
            }
        }
    }
    assert!(worst <= 1e-7, "largest first-order violation {worst:e}");
    conclude(
        "03",
        start,
        None,
        &format!("{checked} aligned times across the duality suite; worst deficit {worst:.1e}"),
    );
}

#[test]
fn criterion_04_arc_space_audit() {
    let start = Instant::now();
    let es = build_dyadic_arc_space(4, 4).unwrap();
    let audit = arc_space_audit(&es).unwrap();

    assert_eq!(audit.half_distance, 0.75, "d(0, ½) must be exactly ¾");
    assert!(audit.midpoints_exact, "arc-midpoint values must be hit bitwise");
    assert!(audit.base_slopes_all_zero);
    assert!(audit.base_slopes.iter().all(|&s| s == 0.0));
    assert!(
        (audit.lipschitz_constant - 8.0 / 3.0).abs() <= 1e-12,
        "Lipschitz constant {} is not 8/3",
        audit.lipschitz_constant
    );
    assert_eq!(audit.base_path_length, 2.0, "base path must have length exactly 2");
    let ug = &audit.upper_gradient_check;
    assert!(!ug.passes, "the upper-gradient inequality must fail along the base path");
    assert_eq!(ug.integral, 0.0);
    assert_eq!(ug.variation, 1.0);
    assert!(audit.decomposition_clean);
    assert!(audit.level_bound_holds);
    assert_eq!(audit.no_base_edge_on_shortest, Some(true));
    conclude(
        "04",
        start,
        Some(20),
        &format!(
            "depth 4 / resolution 4: {} geodesics decomposed, slopes 0 at the base, Lipschitz 8/3, upper gradient fails",
            audit.geodesics_checked
        ),
    );
}

#[test]
fn criterion_05_slope_chain() {
    let start = Instant::now();
    let gallery: Vec<(&str, MetricSpace)> = vec![
        ("segment", build_segment(8).unwrap()),
        ("grid", build_grid(4, 4).unwrap()),
        ("tripod", build_tripod(3).unwrap()),
        ("cycle", build_cycle(6).unwrap()),
        ("dyadic_arcs", build_dyadic_arc_space(2, 2).unwrap().space),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut reports = 0usize;
    for (name, space) in &gallery {
        let ladder = ScaleLadder::geometric(space, 3, 4).unwrap();
        for round in 0..20 {
            let f: Vec<f64> =
                (0..space.vertex_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let report = compute_slope_report(space, &f, &ladder, 64, 65_536).unwrap();
            assert_eq!(
                report.chain_defect(),
                0.0,
                "slope chain violated on {name}, round {round}"
            );
            reports += 1;
        }
    }
    conclude(
        "05",
        start,
        None,
        &format!("{reports} slope reports across {} gallery spaces, zero chain violations", gallery.len()),
    );
}

/// Uniform left half to uniform right half on a unit-length segment of
/// `edges` equal edges; both halves include the midpoint vertex.
fn shift_config(edges: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentName::MetricBrenier,
        seed,
        space: Some(SpaceSpec::Segment { edges, edge_weight: 1.0 / edges as f64 }),
        source: Some(MeasureSpec::UniformRange { start: 0, end: edges / 2 }),
        target: Some(MeasureSpec::UniformRange { start: edges / 2, end: edges }),
        reference: None,
        ladder: None,
        tolerances: Tolerances::default(),
        times: Vec::new(),
        map_tolerance: None,
        sample_pairs: None,
        basepoint: None,
        arc_depth: None,
        arc_resolution: None,
        output_dir: None,
    }
}

#[test]
fn criterion_06_metric_brenier_reproduction() {
    let start = Instant::now();
    let mut errors = Vec::new();
    for edges in [16usize, 32, 64, 128] {
        let report = run(&shift_config(edges, 606)).unwrap();
        assert!(report.passed, "exact invariants failed at {} vertices", edges + 1);
        let w2 = report.scalars["wasserstein2"];
        assert!((w2 - 0.5).abs() <= 1e-6, "{} vertices: W2 = {w2}", edges + 1);
        errors.push(report.scalars["slope_vs_distance_l1"]);
    }
    let headline = *errors.last().unwrap();
    assert!(headline <= 0.1, "129-vertex mass-weighted slope error {headline}");
    for pair in errors.windows(2) {
        assert!(pair[1] < pair[0], "error sequence {errors:?} is not strictly decreasing");
    }
    conclude(
        "06",
        start,
        Some(60),
        &format!("W2 = 0.5 ± 1e-6 at 17/33/65/129 vertices; slope errors {errors:?} strictly decreasing"),
    );
}

#[test]
fn criterion_07_pointwise_quotient_bracket() {
    let start = Instant::now();
    let space = SpaceSpec::Segment { edges: 128, edge_weight: 1.0 / 128.0 }.build().unwrap();
    let mu = MeasureSpec::UniformRange { start: 0, end: 64 }.realize(129).unwrap();
    let nu = MeasureSpec::UniformRange { start: 64, end: 128 }.realize(129).unwrap();
    let plan = solve_kantorovich(&space, &mu, &nu).unwrap();
    let pair = solve_dual(&space, &mu, &nu).unwrap();
    let lifted = lift_to_geodesic_plan(&plan, &space).unwrap();
    let h = space.min_edge_weight().expect("segment has edges");

    let (mut bracketed, mut total) = (0.0f64, 0.0f64);
    let mut quotients = 0usize;
    for (g, mass) in lifted.entries() {
        total += mass;
        if g.times().len() < 2 {
            // Constant geodesic: no positive aligned time, nothing to bound.
            bracketed += mass;
            continue;
        }
        let qb = potential_quotient_bounds(&pair, g, g.times()[1], &space).unwrap();
        let d = g.length();
        let lo = (2.0 - qb.t) / 2.0 * d - 1e-7;
        let hi = d + 0.5 * h * (1.0 + 2.0 * d);
        if qb.quotient >= lo && qb.quotient <= hi {
            bracketed += mass;
        }
        quotients += 1;
    }
    assert!(quotients >= 60, "expected a full shift support, saw {quotients} moving geodesics");
    assert_eq!(bracketed, total, "bracket missed {:e} of the support mass", total - bracketed);
    conclude(
        "07",
        start,
        None,
        &format!("{quotients} support geodesics; 100% of mass inside the smallest-aligned-time bracket"),
    );
}

#[test]
fn criterion_08_branching_diagnostics() {
    let start = Instant::now();
    for (name, space) in [
        ("129-vertex segment", build_segment(128).unwrap()),
        ("65×1 grid", build_grid(65, 1).unwrap()),
        ("1×50 grid", build_grid(1, 50).unwrap()),
    ] {
        let scan = detect_branching(&space, 512).unwrap();
        assert!(scan.exhaustive, "{name}: scan must be exhaustive under 200 vertices");
        assert!(scan.witnesses.is_empty(), "{name}: unexpected branching witness");
    }

    for (name, space) in [("tripod", build_tripod(1).unwrap()), ("4-cycle", build_cycle(4).unwrap())]
    {
        let scan = detect_branching(&space, 512).unwrap();
        assert!(!scan.witnesses.is_empty(), "{name}: expected at least one branching witness");
    }

    // Center-to-leaf geodesics on a 64-edge-per-leg tripod: the separation is
    // twice the distance travelled at every time, so each dyadic ratio is
    // exactly 2 down to the vertex spacing 2⁻⁶.
    let tripod = build_tripod(64).unwrap();
    let leg_a = enumerate_geodesics(&tripod, 0, 64, 4).unwrap().geodesics.remove(0);
    let leg_b = enumerate_geodesics(&tripod, 0, 128, 4).unwrap().geodesics.remove(0);
    for depth in 1..=6 {
        let ladder = strong_nonbranching_ratio(&tripod, &leg_a, &leg_b, depth).unwrap();
        assert_eq!(ladder.entries.len(), depth);
        for entry in &ladder.entries {
            assert_eq!(entry.ratio, Some(2.0), "tripod ratio at t = {}", entry.time);
        }
        assert!(matches!(ladder.verdict, RatioVerdict::BoundedBelow { .. }));
    }

    // Two geodesics sharing their first three edges: inside the shared
    // prefix the separation vanishes, so every aligned dyadic ratio is 0.
    let shared = MetricSpace::build(
        6,
        &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (3, 5, 1.0)],
        Default::default(),
    )
    .unwrap();
    let g = enumerate_geodesics(&shared, 0, 4, 4).unwrap().geodesics.remove(0);
    let h = enumerate_geodesics(&shared, 0, 5, 4).unwrap().geodesics.remove(0);
    for depth in 2..=6 {
        let ladder = strong_nonbranching_ratio(&shared, &g, &h, depth).unwrap();
        let available: Vec<f64> = ladder.entries.iter().filter_map(|e| e.ratio).collect();
        assert!(!available.is_empty(), "depth {depth}: no aligned dyadic time");
        assert!(available.iter().all(|&r| r == 0.0), "shared-prefix ratios {available:?}");
        assert!(matches!(ladder.verdict, RatioVerdict::Decaying { .. }));
    }
    conclude(
        "08",
        start,
        None,
        "path galleries witness-free, tripod and 4-cycle branch, tripod ratio exactly 2 at depths 1–6, shared-prefix ratio 0",
    );
}

#[test]
fn criterion_09_gh_oracle_equivalence() {
    let start = Instant::now();
    let corpus: Vec<(&str, MetricSpace)> = vec![
        ("point", MetricSpace::build(1, &[], Default::default()).unwrap()),
        ("two_points_unit", MetricSpace::build(2, &[(0, 1, 1.0)], Default::default()).unwrap()),
        ("two_points_wide", MetricSpace::build(2, &[(0, 1, 1.37)], Default::default()).unwrap()),
        ("path_3", build_segment(2).unwrap()),
        ("cycle_3", build_cycle(3).unwrap()),
        ("path_4", build_segment(3).unwrap()),
        ("tripod_1", build_tripod(1).unwrap()),
        ("cycle_4", build_cycle(4).unwrap()),
        ("path_5", build_segment(4).unwrap()),
        ("cycle_5", build_cycle(5).unwrap()),
    ];
    let mut pairs = 0usize;
    let mut worst = 0.0f64;
    for i in 0..corpus.len() {
        for j in i..corpus.len() {
            let (name_a, a) = &corpus[i];
            let (name_b, b) = &corpus[j];
            let gh = gh_distance(a, b, DEFAULT_GH_BUDGET);
            assert_eq!(gh.method, GhMethod::Exact, "{name_a} vs {name_b}: budget exhausted");
            let oracle = common::gh_oracle(a, b);
            let err = (gh.value - oracle).abs();
            assert!(err <= 1e-12, "{name_a} vs {name_b}: search {} vs oracle {oracle}", gh.value);
            worst = worst.max(err);
            pairs += 1;
        }
    }

    let base = MetricSpace::build(2, &[(0, 1, 1.0)], Default::default()).unwrap();
    let eps = 0.25;
    let stretched = MetricSpace::build(2, &[(0, 1, 1.0 + eps)], Default::default()).unwrap();
    assert_eq!(gh_distance(&base, &stretched, DEFAULT_GH_BUDGET).value, eps / 2.0);
    conclude(
        "09",
        start,
        None,
        &format!("{pairs} corpus pairs matched the exhaustive oracle (worst gap {worst:.1e}); diameter perturbation gives ε/2"),
    );
}

fn branching_config() -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentName::BranchingAudit,
        seed: 1010,
        space: Some(SpaceSpec::Tripod { leg: 2 }),
        source: None,
        target: None,
        reference: None,
        ladder: Some(LadderSpec { radii: vec![2.0, 1.0, 0.5], hop_horizon: 4 }),
        tolerances: Tolerances::default(),
        times: Vec::new(),
        map_tolerance: None,
        sample_pairs: None,
        basepoint: Some(0),
        arc_depth: None,
        arc_resolution: None,
        output_dir: None,
    }
}

fn arc_audit_config() -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentName::ArcSpaceAudit,
        seed: 4,
        space: Some(SpaceSpec::DyadicArcs { depth: 3, resolution: 2 }),
        source: None,
        target: None,
        reference: None,
        ladder: None,
        tolerances: Tolerances::default(),
        times: Vec::new(),
        map_tolerance: None,
        sample_pairs: None,
        basepoint: None,
        arc_depth: None,
        arc_resolution: None,
        output_dir: None,
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort_by(|x, y| x.0.cmp(&y.0));
    files
}

#[test]
fn criterion_10_deterministic_reports() {
    let start = Instant::now();
    let mut files_compared = 0usize;
    for cfg in [shift_config(32, 42), branching_config(), arc_audit_config()] {
        let first = run(&cfg).unwrap();
        let second = run(&cfg).unwrap();
        assert_eq!(first, second, "{} reruns disagree in memory", cfg.experiment);

        let dir_a = tempdir().unwrap();
        let dir_b = tempdir().unwrap();
        emit_report(&first, dir_a.path()).unwrap();
        emit_report(&second, dir_b.path()).unwrap();
        let bytes_a = dir_bytes(dir_a.path());
        let bytes_b = dir_bytes(dir_b.path());
        assert!(!bytes_a.is_empty());
        assert_eq!(bytes_a, bytes_b, "{}: emitted files differ", cfg.experiment);
        files_compared += bytes_a.len();
    }
    conclude(
        "10",
        start,
        None,
        &format!("three experiment types rerun; {files_compared} emitted files byte-identical"),
    );
}
