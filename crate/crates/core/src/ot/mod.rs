//! Unbalanced entropic optimal transport between a predicted density and
//! ground-truth dots:
//!
//! ```text
//! min_{P >= 0}  <C, P> - eps·H(P) + tau_a·||P·1 - a||_2^2 + tau_b·||Pᵀ·1 - b||_1
//! H(P) = -Σ P_ij log P_ij
//! ```
//!
//! The source marginal is penalized in squared L2 and the target marginal in
//! L1. Both weights default to the same `tau`.

mod solver;

pub use solver::{solve, OtSolution, PLAN_LIMIT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::GridMap;

/// Distances are clamped here before exponentiation.
pub const EXP_DISTANCE_CLAMP: f64 = 60.0;

/// Prediction pixels below this density are dropped from the source support.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_TAU: f64 = 10.0;
pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("solver did not converge after {iterations} iterations (objective {objective})")]
    NonConvergence { iterations: usize, objective: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// `exp(||x - y||)`.
    #[default]
    ExpEuclidean,
    Euclidean,
    SquaredEuclidean,
}

impl std::str::FromStr for CostKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exp" => Ok(CostKind::ExpEuclidean),
            "l2" => Ok(CostKind::Euclidean),
            "l2sq" => Ok(CostKind::SquaredEuclidean),
            other => Err(format!("unknown cost '{other}' (expected exp|l2|l2sq)")),
        }
    }
}

/// Dense row-major `n × m` cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub n: usize,
    pub m: usize,
    pub values: Vec<f64>,
    /// Entries whose distance hit [`EXP_DISTANCE_CLAMP`].
    pub clamped: usize,
}

impl CostMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }
}

pub fn build_cost(src: &[[f64; 2]], dst: &[[f64; 2]], kind: CostKind) -> CostMatrix {
    let mut clamped = 0;
    let mut values = Vec::with_capacity(src.len() * dst.len());
    for x in src {
        for y in dst {
            let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
            values.push(match kind {
                CostKind::SquaredEuclidean => d2,
                CostKind::Euclidean => d2.sqrt(),
                CostKind::ExpEuclidean => {
                    let d = d2.sqrt();
                    if d > EXP_DISTANCE_CLAMP {
                        clamped += 1;
                        EXP_DISTANCE_CLAMP.exp()
                    } else {
                        d.exp()
                    }
                }
            });
        }
    }
    CostMatrix {
        n: src.len(),
        m: dst.len(),
        values,
        clamped,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtProblem {
    pub cost: CostMatrix,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub epsilon: f64,
    pub tau_a: f64,
    pub tau_b: f64,
}

impl OtProblem {
    pub fn new(
        cost: CostMatrix,
        a: Vec<f64>,
        b: Vec<f64>,
        epsilon: f64,
        tau: f64,
    ) -> Result<Self, OtError> {
        let p = OtProblem {
            cost,
            a,
            b,
            epsilon,
            tau_a: tau,
            tau_b: tau,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_points(
        src: &[[f64; 2]],
        a: Vec<f64>,
        dst: &[[f64; 2]],
        b: Vec<f64>,
        kind: CostKind,
        epsilon: f64,
        tau: f64,
    ) -> Result<Self, OtError> {
        if src.iter().chain(dst).flatten().any(|v| !v.is_finite()) {
            return Err(OtError::InvalidProblem("non-finite coordinates".into()));
        }
        Self::new(build_cost(src, dst, kind), a, b, epsilon, tau)
    }

    pub fn n(&self) -> usize {
        self.cost.n
    }

    pub fn m(&self) -> usize {
        self.cost.m
    }

    pub fn validate(&self) -> Result<(), OtError> {
        let bad = |m: String| Err(OtError::InvalidProblem(m));
        if self.n() < 1 || self.m() < 1 {
            return bad("need at least one source and one target".into());
        }
        if self.a.len() != self.n() || self.b.len() != self.m() {
            return bad(format!(
                "marginals of length {}/{} for a {}x{} cost",
                self.a.len(),
                self.b.len(),
                self.n(),
                self.m()
            ));
        }
        if self
            .a
            .iter()
            .chain(&self.b)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return bad("marginals must be finite and non-negative".into());
        }
        if self.cost.values.iter().any(|c| !c.is_finite()) {
            return bad("cost matrix has non-finite entries".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon {} must be positive", self.epsilon));
        }
        if !(self.tau_a >= 0.0
            && self.tau_b >= 0.0
            && self.tau_a.is_finite()
            && self.tau_b.is_finite())
        {
            return bad("tau must be finite and non-negative".into());
        }
        Ok(())
    }
}

/// Row sums `P·1` and column sums `Pᵀ·1` of a row-major plan.
pub fn marginals(plan: &[f64], n: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            let p = plan[i * m + j];
            rows[i] += p;
            cols[j] += p;
        }
    }
    (rows, cols)
}

/// `(||P·1 - a||_2^2, ||Pᵀ·1 - b||_1)`.
pub fn marginal_residuals(problem: &OtProblem, plan: &[f64]) -> (f64, f64) {
    let (rows, cols) = marginals(plan, problem.n(), problem.m());
    let ra = rows
        .iter()
        .zip(&problem.a)
        .map(|(r, a)| (r - a).powi(2))
        .sum();
    let rb = cols
        .iter()
        .zip(&problem.b)
        .map(|(c, b)| (c - b).abs())
        .sum();
    (ra, rb)
}

/// The full objective for a given plan, with `0·log 0 = 0`.
pub fn evaluate_objective(problem: &OtProblem, plan: &[f64]) -> f64 {
    assert_eq!(plan.len(), problem.n() * problem.m(), "plan shape");
    let mut transport = 0.0;
    let mut neg_entropy = 0.0;
    for (p, c) in plan.iter().zip(&problem.cost.values) {
        if *p > 0.0 {
            transport += c * p;
            neg_entropy += p * p.ln();
        }
    }
    let (ra, rb) = marginal_residuals(problem, plan);
    transport + problem.epsilon * neg_entropy + problem.tau_a * ra + problem.tau_b * rb
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtSettings {
    pub epsilon: f64,
    pub tau: f64,
    pub cost: CostKind,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for OtSettings {
    fn default() -> Self {
        OtSettings {
            epsilon: DEFAULT_EPSILON,
            tau: DEFAULT_TAU,
            cost: CostKind::ExpEuclidean,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub objective: f64,
    pub marginal_residual_a: f64,
    pub marginal_residual_b: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Source points kept after pruning.
    pub support: usize,
    pub targets: usize,
    pub clamped_costs: usize,
    pub settings: OtSettings,
}

/// OT loss between a density map and unit-mass ground-truth points given in
/// continuous `(row, col)` coordinates. Sources are pixel centers
/// `(i + 0.5, j + 0.5)` with density at least [`SUPPORT_THRESHOLD`]; the
/// pruned mass enters the source-marginal penalty analytically.
pub fn localization_loss(
    pred: &GridMap,
    gt_points: &[(f64, f64)],
    settings: &OtSettings,
) -> Result<LossReport, OtError> {
    if pred.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(OtError::InvalidProblem(
            "prediction must be finite and non-negative".into(),
        ));
    }
    if gt_points
        .iter()
        .any(|(r, c)| !(r.is_finite() && c.is_finite()))
    {
        return Err(OtError::InvalidProblem(
            "non-finite ground-truth point".into(),
        ));
    }
    let mut src = Vec::new();
    let mut a = Vec::new();
    let mut pruned_sq = 0.0;
    for (k, &v) in pred.values.iter().enumerate() {
        let v = v as f64;
        if v >= SUPPORT_THRESHOLD {
            src.push([(k / pred.cols) as f64 + 0.5, (k % pred.cols) as f64 + 0.5]);
            a.push(v);
        } else {
            pruned_sq += v * v;
        }
    }
    let dst: Vec<[f64; 2]> = gt_points.iter().map(|&(r, c)| [r, c]).collect();
    let b = vec![1.0; dst.len()];
    let tau = settings.tau;
    let pruned_term = tau * pruned_sq;
    let report = |objective, ra, rb, iterations, converged, clamped| LossReport {
        objective,
        marginal_residual_a: ra,
        marginal_residual_b: rb,
        iterations,
        converged,
        support: src.len(),
        targets: dst.len(),
        clamped_costs: clamped,
        settings: *settings,
    };
    if src.is_empty() || dst.is_empty() {
        // Empty plan: only the marginal penalties remain.
        let ra = a.iter().map(|x| x * x).sum::<f64>() + pruned_sq;
        let rb = b.len() as f64;
        return Ok(report(tau * ra + tau * rb, ra, rb, 0, true, 0));
    }
    let problem = OtProblem::from_points(&src, a, &dst, b, settings.cost, settings.epsilon, tau)?;
    let sol = solve(&problem, settings.max_iters, settings.tol)?;
    Ok(report(
        sol.objective + pruned_term,
        sol.marginal_residual_a + pruned_sq,
        sol.marginal_residual_b,
        sol.iterations,
        sol.converged,
        problem.cost.clamped,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_cost_examples() {
        let c = build_cost(
            &[[0.0, 0.0], [1.0, 0.0]],
            &[[0.0, 0.0]],
            CostKind::ExpEuclidean,
        );
        assert_eq!(c.get(0, 0), 1.0);
        assert!((c.get(1, 0) - std::f64::consts::E).abs() < 1e-15);
        let far = build_cost(&[[0.0, 0.0]], &[[100.0, 0.0]], CostKind::ExpEuclidean);
        assert_eq!(far.clamped, 1);
        assert_eq!(far.get(0, 0), 60f64.exp());
    }

    #[test]
    fn zero_plan_objective_is_pure_penalty() {
        let p = OtProblem::from_points(
            &[[0.0, 0.0], [2.0, 1.0]],
            vec![0.3, 1.2],
            &[[1.0, 1.0]],
            vec![1.0],
            CostKind::Euclidean,
            0.1,
            10.0,
        )
        .unwrap();
        let obj = evaluate_objective(&p, &[0.0, 0.0]);
        assert!((obj - 10.0 * (0.09 + 1.44) - 10.0 * 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_atom_objective() {
        let c = CostMatrix {
            n: 1,
            m: 1,
            values: vec![1.0],
            clamped: 0,
        };
        let p = OtProblem::new(c, vec![1.0], vec![1.0], 0.1, 10.0).unwrap();
        assert_eq!(evaluate_objective(&p, &[1.0]), 1.0);
    }

    #[test]
    fn invalid_problems_are_rejected() {
        let c = || CostMatrix {
            n: 1,
            m: 1,
            values: vec![1.0],
            clamped: 0,
        };
        assert!(OtProblem::new(c(), vec![f64::NAN], vec![1.0], 0.1, 1.0).is_err());
        assert!(OtProblem::new(c(), vec![1.0], vec![1.0], 0.0, 1.0).is_err());
        assert!(OtProblem::new(c(), vec![-1.0], vec![1.0], 0.1, 1.0).is_err());
    }

    #[test]
    fn empty_prediction_costs_tau_per_point() {
        let pred = GridMap::zeros(8, 8, crate::annotate::MapKind::PixelDensity);
        let r = localization_loss(
            &pred,
            &[(2.5, 2.5), (5.5, 1.5), (0.5, 7.5)],
            &OtSettings::default(),
        )
        .unwrap();
        assert_eq!(r.objective, 30.0);
        assert_eq!(r.support, 0);
    }
}
