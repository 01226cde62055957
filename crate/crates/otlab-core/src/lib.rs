//! Optimal transport on finite geodesic metric spaces.
//!
//! The crate studies the quadratic Kantorovich problem on connected weighted
//! graphs, treated as discretizations of geodesic metric measure spaces. It
//! solves the primal and dual problems exactly, lifts optimal plans onto
//! discrete geodesics, and measures how far the dual potential behaves like
//! a distance function along them: ascending slopes over a radius ladder,
//! upper-gradient checks, first-order quotient brackets, and displacement
//! entropy profiles. A separate set of diagnostics quantifies branching of
//! geodesics — the structural property that breaks single-valued transport
//! maps — through witness scans, dyadic separation ratios, and a rescaled
//! comparison of balls across scales.
//!
//! Organization:
//!
//! - [`space`]: metric spaces as weighted graphs, discrete geodesics, and
//!   geodesic enumeration.
//! - [`measure`]: measures, densities, entropy, doubling, interpolants.
//! - [`transport`]: exact primal solvers, plans, geodesic lifts, map
//!   extraction, cyclical-monotonicity checks.
//! - [`duality`]: c-transforms, potential pairs, duality gaps, quotient
//!   bounds.
//! - [`slopes`]: slope estimators over radius ladders and upper-gradient
//!   tests.
//! - [`branching`]: branching witnesses, separation ladders, rescaled balls,
//!   Gromov–Hausdorff bounds.
//! - [`gallery`]: reference spaces, including the dyadic arc space with its
//!   exact audit.
//! - [`io`]: declarative specs, JSON/CSV persistence, schema validation.
//! - [`lab`]: experiment driver turning configs into deterministic reports.
//!
//! Numerical discipline throughout: exact rational data stays exact in
//! binary floating point wherever the construction guarantees it (dyadic
//! weights, halved squared distances on integer grids), every tolerance is a
//! named constant justified at its definition, and certified quantities are
//! re-derived from their definitions in tests rather than compared against
//! the code that produced them.

pub mod branching;
pub mod duality;
pub mod error;
pub mod gallery;
pub mod io;
pub mod lab;
pub mod measure;
pub mod slopes;
pub mod space;
pub mod transport;

pub use branching::{
    detect_branching, dyadic_ratio_ladder, gh_distance, gh_distance_pinned, rescale_ball,
    strong_nonbranching_ratio, tangent_ladder_report, BranchScan, BranchWitness, DyadicRatio,
    GhDistance, GhMethod, RatioVerdict, RescaledBall, SeparationLadder, TangentLadderReport,
    TangentLevel, TangentStep, WitnessKind,
};
pub use duality::{
    ascending_probe_bound, c_transform, duality_gap, potential_quotient_bounds, solve_dual,
    verify_potential, PotentialPair, QuotientBounds, SlacknessReport,
};
pub use error::{Error, Result};
pub use gallery::{
    arc_space_audit, build_cycle, build_dyadic_arc_space, build_grid, build_segment,
    build_tripod, ArcInfo, ArcSpaceAudit, ExampleSpace,
};
pub use io::{
    read_json, read_plan, read_plan_csv, read_space, validate_report_value, validate_schema,
    write_json, write_plan, write_plan_csv, write_space, MeasureSpec, SavedPlan, SavedSpace,
    SpaceSpec, REPORT_SCHEMA,
};
pub use lab::{
    emit_report, load_config, run, ExperimentConfig, ExperimentName, InvariantCheck, LadderSpec,
    Report, Table, Tolerances, WitnessRecord,
};
pub use measure::{
    default_radius_ladder, doubling_constant, interpolant_density, push_forward,
    relative_entropy, Density, Measure, SnapReport,
};
pub use slopes::{
    ascending_slope, check_upper_gradient_along_geodesics, compute_slope_report, ScaleLadder,
    SlopeReport, UpperGradientCheck, VertexSlopes,
};
pub use space::{
    curve_length, enumerate_geodesics, geodesic_point, geodesic_sup_distance, DiscreteGeodesic,
    Edge, GeodesicFamily, MetricSpace, SnappedPoint, SupDistance,
};
pub use transport::{
    check_cyclical_monotonicity, extract_map, lift_to_geodesic_plan, solve_kantorovich,
    CyclicalMonotonicityReport, GeodesicPlan, MapOrSplit, PlanEntry, SplitReport, TransportPlan,
};
