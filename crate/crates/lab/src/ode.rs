//! Comparison test for `f' = −2c₁f^λ + c₂`.

use ode_solvers::{Dop853, OutputType, System, Vector1};
use rand::Rng;

use crate::error::{LabError, LabResult};
use ising_kac_core::rng::replica_rng;

/// Allowed excess of the numerical solution over the bound.
pub const TOLERANCE: f64 = 1e-9;

struct Decay {
    c1: f64,
    c2: f64,
    lambda: f64,
}

impl System<f64, Vector1<f64>> for Decay {
    fn system(&self, _t: f64, y: &Vector1<f64>, dy: &mut Vector1<f64>) {
        dy[0] = -2.0 * self.c1 * y[0].max(0.0).powf(self.lambda) + self.c2;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonOutcome {
    pub holds: bool,
    /// Largest `f(t) − bound(t)` over the mesh; negative means slack everywhere.
    pub max_excess: f64,
    pub t: Vec<f64>,
    pub f: Vec<f64>,
    pub bound: Vec<f64>,
}

/// `f₀/(1 + c₁(λ−1)t f₀^{λ−1})^{1/(λ−1)} ∨ (c₂/c₁)^{1/λ}`.
pub fn comparison_bound(c1: f64, c2: f64, lambda: f64, f0: f64, t: f64) -> f64 {
    let decay = f0 / (1.0 + c1 * (lambda - 1.0) * t * f0.powf(lambda - 1.0)).powf(1.0 / (lambda - 1.0));
    decay.max((c2 / c1).powf(1.0 / lambda))
}

/// Integrates on `[0, t_end]` with an adaptive eighth-order scheme and compares
/// the solution with the bound at every accepted step.
pub fn ode_comparison_check(c1: f64, c2: f64, lambda: f64, f0: f64, t_end: f64) -> LabResult<ComparisonOutcome> {
    if !(lambda > 1.0 && lambda.is_finite()) {
        return Err(LabError::Param(format!("λ = {lambda} must exceed 1")));
    }
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(LabError::Param(format!("c₁ = {c1} must be positive")));
    }
    if !(c2 >= 0.0 && c2.is_finite()) {
        return Err(LabError::Param(format!("c₂ = {c2} must be nonnegative")));
    }
    if !(f0 >= 0.0 && f0.is_finite()) {
        return Err(LabError::Param(format!("f₀ = {f0} must be nonnegative")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(LabError::Param(format!("T = {t_end} must be positive")));
    }
    let mut solver = Dop853::new(Decay { c1, c2, lambda }, 0.0, t_end, 0.0, Vector1::new(f0), 1e-12, 1e-14);
    solver.set_output(OutputType::Sparse);
    solver
        .integrate()
        .map_err(|e| LabError::Param(format!("integration failed: {e}")))?;
    let t = solver.x_out().clone();
    let f: Vec<f64> = solver.y_out().iter().map(|y| y[0]).collect();
    let bound: Vec<f64> = t.iter().map(|&s| comparison_bound(c1, c2, lambda, f0, s)).collect();
    let max_excess = f.iter().zip(&bound).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    Ok(ComparisonOutcome { holds: max_excess <= TOLERANCE, max_excess, t, f, bound })
}

/// One randomized draw of `(c₁, c₂, λ, f₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub c1: f64,
    pub c2: f64,
    pub lambda: f64,
    pub f0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedComparison {
    pub draws: Vec<(Draw, f64)>,
    pub violations: usize,
    pub max_excess: f64,
}

/// Repeats the check for `count` parameter draws on `[0, 2]`.
pub fn randomized_comparison(seed: u64, count: usize) -> LabResult<RandomizedComparison> {
    let mut rng = replica_rng(seed, 0);
    let mut draws = Vec::with_capacity(count);
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    for _ in 0..count {
        let d = Draw {
            c1: rng.random_range(0.1..3.0),
            c2: if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..3.0) },
            lambda: rng.random_range(1.2..4.0),
            f0: if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..5.0) },
        };
        let out = ode_comparison_check(d.c1, d.c2, d.lambda, d.f0, 2.0)?;
        if !out.holds {
            violations += 1;
        }
        max_excess = max_excess.max(out.max_excess);
        draws.push((d, out.max_excess));
    }
    Ok(RandomizedComparison { draws, violations, max_excess })
}
