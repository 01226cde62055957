//! Kantorovich duality with cost d²/2: c-transforms, dual potentials, and
//! the exact inequality chain connecting potentials to distance quotients.
//!
//! Conventions. The primal problem minimizes Σ π·d², the dual maximizes
//! 2·(∫φ dμ + ∫ψ dν) over pairs with φ(x) + ψ(y) ≤ d²(x,y)/2; potentials are
//! stored for the d²/2 cost and the factor 2 appears only in [`duality_gap`].
//!
//! The c-transform is φ^c(x) = min_y { d²(x,y)/2 − φ(y) }, with −∞ allowed
//! in the input as an "undefined here" sentinel excluded from the minimum.
//! A solved [`PotentialPair`] is post-processed by a double transform
//! (ψ ← φ^c, φ ← ψ^c), which makes feasibility and c-concavity structural
//! rather than numerical: φ = ψ^c implies φ(x) + ψ(y) ≤ d²(x,y)/2 pointwise
//! and (φ^c)^c = ψ^ccc = ψ^c = φ. The double transform can only increase the
//! dual value, and weak duality caps it at half the optimal primal cost, so
//! strong duality survives the post-processing intact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::space::{DiscreteGeodesic, MetricSpace};
use crate::transport::{solve_with_potentials, TransportPlan};

/// Absolute tolerance for the structural potential invariants
/// (feasibility, c-concavity).
pub const POTENTIAL_TOL: f64 = 1e-9;

/// Relative tolerance for strong duality and complementary slackness.
pub const DUALITY_REL_TOL: f64 = 1e-7;

/// c-transform φ^c(x) = min over y of d²(x,y)/2 − φ(y). Entries equal to
/// −∞ mark vertices where φ is undefined and are excluded from the minimum.
pub fn c_transform(phi: &[f64], space: &MetricSpace) -> Result<Vec<f64>> {
    let n = space.vertex_count();
    if phi.len() != n {
        return Err(Error::LengthMismatch { got: phi.len(), want: n });
    }
    let mut any_finite = false;
    for (v, &p) in phi.iter().enumerate() {
        if p.is_nan() || p == f64::INFINITY {
            return Err(Error::BadPotential { v, value: p });
        }
        if p != f64::NEG_INFINITY {
            any_finite = true;
        }
    }
    if !any_finite {
        return Err(Error::AllNegativeInfinity);
    }
    let mut out = Vec::with_capacity(n);
    for x in 0..n {
        let mut best = f64::INFINITY;
        for y in 0..n {
            if phi[y] == f64::NEG_INFINITY {
                continue;
            }
            let candidate = space.dist(x, y).powi(2) / 2.0 - phi[y];
            if candidate < best {
                best = candidate;
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// A dual pair (φ, φ^c) for the cost d²/2, with its dual objective value
/// ∫φ dμ + ∫φ^c dν.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialPair {
    phi: Vec<f64>,
    phic: Vec<f64>,
    dual_value: f64,
}

impl PotentialPair {
    /// Wraps explicit potentials, computing the dual value against (μ, ν).
    /// No invariant is enforced here; use the defect methods to audit.
    pub fn new(phi: Vec<f64>, phic: Vec<f64>, mu: &Measure, nu: &Measure) -> Result<Self> {
        mu.require_len(phi.len())?;
        nu.require_len(phic.len())?;
        for (v, &p) in phi.iter().chain(phic.iter()).enumerate() {
            if !p.is_finite() {
                return Err(Error::BadPotential { v: v % phi.len(), value: p });
            }
        }
        let dual_value = integral(&phi, mu) + integral(&phic, nu);
        Ok(PotentialPair { phi, phic, dual_value })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn phic(&self) -> &[f64] {
        &self.phic
    }

    /// ∫φ dμ + ∫φ^c dν for the measures given at construction.
    pub fn dual_value(&self) -> f64 {
        self.dual_value
    }

    /// max over (x,y) of φ(x) + φ^c(y) − d²(x,y)/2; feasible iff ≤ ~0.
    pub fn feasibility_defect(&self, space: &MetricSpace) -> f64 {
        let n = space.vertex_count();
        let mut worst = f64::NEG_INFINITY;
        for x in 0..n {
            for y in 0..n {
                let slack = self.phi[x] + self.phic[y] - space.dist(x, y).powi(2) / 2.0;
                worst = worst.max(slack);
            }
        }
        worst
    }

    /// max over x of |φ(x) − (φ^c)^c(x)|; zero for c-concave φ.
    pub fn c_concavity_defect(&self, space: &MetricSpace) -> Result<f64> {
        let phicc = c_transform(&self.phic, space)?;
        Ok(self
            .phi
            .iter()
            .zip(&phicc)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn integral(f: &[f64], m: &Measure) -> f64 {
    f.iter().zip(m.masses()).map(|(v, mass)| v * mass).sum()
}

/// Solves the dual problem: simplex node potentials are halved onto the
/// source support and double-c-transformed into a c-concave feasible pair.
/// 2·dual_value equals the optimal primal cost within working precision.
pub fn solve_dual(space: &MetricSpace, mu: &Measure, nu: &Measure) -> Result<PotentialPair> {
    let solved = solve_with_potentials(space, mu, nu)?;
    let n = space.vertex_count();
    let mut raw = vec![f64::NEG_INFINITY; n];
    for (k, &x) in solved.sources.iter().enumerate() {
        // Node potentials certify u(x) + v(y) ≤ d²; halving gives a pair
        // feasible for the d²/2 cost.
        raw[x] = solved.u[k] / 2.0;
    }
    let psi = c_transform(&raw, space)?;
    let phi = c_transform(&psi, space)?;
    let phic = c_transform(&phi, space)?;
    PotentialPair::new(phi, phic, mu, nu)
}

/// Complementary-slackness audit of a pair against a plan's support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlacknessReport {
    /// max over support pairs of |φ(x) + φ^c(y) − d²(x,y)/2|.
    pub max_residual: f64,
    /// Support pair attaining the max residual.
    pub worst_pair: Option<(usize, usize)>,
    /// True iff every residual ≤ 1e-7·(1 + d²(x,y)).
    pub passes: bool,
}

/// Checks the support equality φ(x) + φ^c(y) = d²(x,y)/2 on every plan
/// entry. For an optimal plan and optimal pair this is complementary
/// slackness; the Kantorovich-potential property along plan geodesics.
pub fn verify_potential(
    pp: &PotentialPair,
    plan: &TransportPlan,
    space: &MetricSpace,
) -> SlacknessReport {
    let mut max_residual: f64 = 0.0;
    let mut worst_pair = None;
    let mut passes = true;
    for e in plan.entries() {
        let d2 = space.dist(e.x, e.y).powi(2);
        let residual = (pp.phi()[e.x] + pp.phic()[e.y] - d2 / 2.0).abs();
        if residual > max_residual {
            max_residual = residual;
            worst_pair = Some((e.x, e.y));
        }
        if residual > DUALITY_REL_TOL * (1.0 + d2) {
            passes = false;
        }
    }
    SlacknessReport { max_residual, worst_pair, passes }
}

/// plan.cost − 2·dual_value. Nonnegative (within tolerance) for any feasible
/// pair, zero within tolerance iff plan and pair are both optimal.
pub fn duality_gap(plan: &TransportPlan, pp: &PotentialPair) -> f64 {
    plan.cost() - 2.0 * pp.dual_value()
}

/// Distance quotient of a potential along a geodesic, with the two bounds
/// that follow from feasibility and the support equality alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotientBounds {
    /// (φ(γ₀) − φ(γ_t)) / d(γ₀, γ_t).
    pub quotient: f64,
    /// (2−t)/2 · d(γ₀, γ₁): the first-order lower bound. Holds whenever the
    /// pair verifies on (γ₀, γ₁), with slack no worse than the support
    /// residual.
    pub lower: f64,
    /// d(γ_t, y_t) + d(γ₀, γ_t)/2 with y_t the vertex realizing the
    /// c-transform minimum at γ_t. Unconditional: follows from c-concavity
    /// and the triangle inequality.
    pub upper: f64,
    /// The realizing vertex y_t behind `upper`.
    pub argmin: usize,
    /// The aligned time actually used.
    pub t: f64,
}

/// Evaluates the quotient (φ(γ₀) − φ(γ_t))/d(γ₀,γ_t) at a vertex-aligned
/// time t > 0, with its guaranteed lower and upper bounds.
///
/// Lower bound: subtracting feasibility at (γ_t, γ₁) from the support
/// equality at (γ₀, γ₁) gives φ(γ₀) − φ(γ_t) ≥ (2t−t²)/2·d²(γ₀,γ₁), i.e.
/// quotient ≥ (2−t)/2·d(γ₀,γ₁) after dividing by d(γ₀,γ_t) = t·d(γ₀,γ₁).
///
/// Upper bound: with y_t realizing φ(γ_t) = d²(γ_t,y_t)/2 − φ^c(y_t) and
/// φ(γ₀) ≤ d²(γ₀,y_t)/2 − φ^c(y_t), the difference telescopes to
/// quotient ≤ (d(γ₀,y_t) + d(γ_t,y_t))/2 ≤ d(γ_t,y_t) + d(γ₀,γ_t)/2.
pub fn potential_quotient_bounds(
    pp: &PotentialPair,
    g: &DiscreteGeodesic,
    t: f64,
    space: &MetricSpace,
) -> Result<QuotientBounds> {
    if t <= 0.0 || t > 1.0 {
        return Err(Error::TimeOutOfRange { t });
    }
    let idx = g.aligned_index(t)?;
    if idx == 0 {
        return Err(Error::GeodesicPrecondition {
            reason: format!("time {t} aligns to the start vertex; the quotient needs γ_t ≠ γ₀"),
        });
    }
    let t = g.times()[idx];
    let x0 = g.start();
    let x1 = g.end();
    let xt = g.vertices()[idx];
    let d0t = space.dist(x0, xt);
    let quotient = (pp.phi()[x0] - pp.phi()[xt]) / d0t;
    let lower = (2.0 - t) / 2.0 * space.dist(x0, x1);

    let mut argmin = 0;
    let mut best = f64::INFINITY;
    for y in 0..space.vertex_count() {
        let candidate = space.dist(xt, y).powi(2) / 2.0 - pp.phic()[y];
        if candidate < best {
            best = candidate;
            argmin = y;
        }
    }
    let upper = space.dist(xt, argmin) + d0t / 2.0;
    Ok(QuotientBounds { quotient, lower, upper, argmin, t })
}

/// Upper bound on the ascending probe quotient [φ(z)−φ(x)]/d(z,x) at the
/// start x of a support geodesic with endpoint distance `d_pair`: the bound
/// (d(z,x) + 2·d_pair)/2 follows from feasibility at (z, y) and the support
/// equality at (x, y).
pub fn ascending_probe_bound(d_probe: f64, d_pair: f64) -> f64 {
    (d_probe + 2.0 * d_pair) / 2.0
}
