//! Block-coordinate ascent on the dual, in the log domain.
//!
//! With potentials `f` (source) and `g` (target) the primal plan is
//! `P_ij = exp((f_i + g_j - C_ij)/eps - 1)` and the dual reads
//!
//! ```text
//! D(f, g) = <f, a> - ||f||²/(4·tau_a) + <g, b> - eps·Σ P_ij,   |g_j| <= tau_b
//! ```
//!
//! Each block is maximized exactly: the `g` step is a clipped closed form and
//! the `f` step is a Lambert-W root. Steps are over-relaxed while that keeps
//! the dual increasing. Strong duality gives `F(P) - D >= 0` as a certificate
//! of optimality.
//!
//! The plan is never stored during the iteration. Work is split into fixed
//! row blocks processed in parallel and reduced in block order, so results do
//! not depend on the thread count.
#![allow(clippy::needless_range_loop)]

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{OtError, OtProblem};

/// Plans with more entries than this are not returned, only the potentials.
pub const PLAN_LIMIT: usize = 4_000_000;

/// Over-relaxation: starts at `OVER_RELAXATION`, is halved towards 1 whenever
/// a step lowers the dual, and grows back geometrically otherwise.
const OVER_RELAXATION: f64 = 1.5;
const OMEGA_GROWTH: f64 = 1.05;
const OMEGA_MAX: f64 = 1.95;

const BLOCK_ROWS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtSolution {
    /// Row-major `n × m` plan, present when `n·m <= PLAN_LIMIT`.
    pub plan: Option<Vec<f64>>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// Column factors applied on top of the potentials' plan (see
    /// [`OtSolution::plan_entry`]).
    pub column_scale: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub marginal_residual_a: f64,
    pub marginal_residual_b: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective after each sweep; non-increasing.
    pub history: Vec<f64>,
}

impl OtSolution {
    pub fn duality_gap(&self) -> f64 {
        self.objective - self.dual_objective
    }

    /// `P_ij` of the returned solution, also when the plan was not stored.
    pub fn plan_entry(&self, problem: &OtProblem, i: usize, j: usize) -> f64 {
        let x = (self.f[i] + self.g[j] - problem.cost.get(i, j)) / problem.epsilon - 1.0;
        self.column_scale[j] * x.exp()
    }

    pub fn require_converged(self) -> Result<Self, OtError> {
        if self.converged {
            Ok(self)
        } else {
            Err(OtError::NonConvergence {
                iterations: self.iterations,
                objective: self.objective,
            })
        }
    }
}

/// `w > 0` with `w + ln w = x`, i.e. `W(e^x)`.
pub(crate) fn lambert_w_exp(x: f64) -> f64 {
    // Newton in l = ln w on h(l) = e^l + l - x, which is convex and increasing.
    let mut l = if x < 1.0 { x } else { (x - x.ln()).ln() };
    for _ in 0..100 {
        let el = l.exp();
        let step = (el + l - x) / (el + 1.0);
        l -= step;
        if step.abs() <= 1e-15 * l.abs().max(1.0) {
            break;
        }
    }
    l.exp()
}

/// Running log-sum-exp `(max, Σ exp(x - max))`.
#[derive(Clone, Copy)]
struct Lse(f64, f64);

impl Lse {
    const EMPTY: Lse = Lse(f64::NEG_INFINITY, 0.0);

    fn push(&mut self, x: f64) {
        if x <= self.0 {
            self.1 += (x - self.0).exp();
        } else {
            self.1 = self.1 * (self.0 - x).exp() + 1.0;
            self.0 = x;
        }
    }

    fn merge(self, o: Lse) -> Lse {
        if o.0 == f64::NEG_INFINITY {
            return self;
        }
        if self.0 == f64::NEG_INFINITY {
            return o;
        }
        let m = self.0.max(o.0);
        Lse(m, self.1 * (self.0 - m).exp() + o.1 * (o.0 - m).exp())
    }

    fn value(self) -> f64 {
        self.0 + self.1.ln()
    }
}

/// Marginals and per-column sums of the plan induced by the potentials.
struct PlanStats {
    rows: Vec<f64>,
    cols: Vec<f64>,
    /// Σ_i C_ij P_ij
    transport: Vec<f64>,
    /// Σ_i P_ij ln P_ij
    neg_entropy: Vec<f64>,
}

struct State<'a> {
    p: &'a OtProblem,
    blocks: Vec<Range<usize>>,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl<'a> State<'a> {
    fn new(p: &'a OtProblem) -> Self {
        let n = p.n();
        State {
            blocks: (0..n.div_ceil(BLOCK_ROWS))
                .map(|k| k * BLOCK_ROWS..((k + 1) * BLOCK_ROWS).min(n))
                .collect(),
            f: vec![0.0; n],
            g: vec![0.0; p.m()],
            p,
        }
    }

    /// `ln P_ij`.
    #[inline]
    fn log_plan(&self, i: usize, j: usize) -> f64 {
        (self.f[i] + self.g[j] - self.p.cost.get(i, j)) / self.p.epsilon - 1.0
    }

    fn update_f(&mut self, omega: f64) {
        let (m, eps, tau) = (self.p.m(), self.p.epsilon, self.p.tau_a);
        if tau == 0.0 {
            return;
        }
        let p = self.p;
        let g = &self.g;
        self.f.par_iter_mut().enumerate().for_each(|(i, fi)| {
            let mut lse = Lse::EMPTY;
            for j in 0..m {
                lse.push((g[j] - p.cost.get(i, j)) / eps);
            }
            let log_k = lse.value() - 1.0;
            let x = (2.0 * tau / eps).ln() + log_k + 2.0 * tau * p.a[i] / eps;
            let r = eps * lambert_w_exp(x) / (2.0 * tau);
            let target = 2.0 * tau * (p.a[i] - r);
            *fi += omega * (target - *fi);
        });
    }

    fn update_g(&mut self, omega: f64) {
        let (m, eps, tau) = (self.p.m(), self.p.epsilon, self.p.tau_b);
        if tau == 0.0 {
            return;
        }
        let p = self.p;
        let f = &self.f;
        let partial: Vec<Vec<Lse>> = self
            .blocks
            .par_iter()
            .map(|rows| {
                let mut acc = vec![Lse::EMPTY; m];
                for i in rows.clone() {
                    for (j, a) in acc.iter_mut().enumerate() {
                        a.push((f[i] - p.cost.get(i, j)) / eps);
                    }
                }
                acc
            })
            .collect();
        for j in 0..m {
            let b = p.b[j];
            let target = if b == 0.0 {
                -tau
            } else {
                let log_l = partial
                    .iter()
                    .fold(Lse::EMPTY, |acc, blk| acc.merge(blk[j]))
                    .value()
                    - 1.0;
                (eps * (b.ln() - log_l)).clamp(-tau, tau)
            };
            self.g[j] = (self.g[j] + omega * (target - self.g[j])).clamp(-tau, tau);
        }
    }

    fn stats(&self) -> PlanStats {
        let m = self.p.m();
        let parts: Vec<(Vec<f64>, [Vec<f64>; 3])> = self
            .blocks
            .par_iter()
            .map(|range| {
                let mut rows = vec![0.0; range.len()];
                let mut cols = [vec![0.0; m], vec![0.0; m], vec![0.0; m]];
                for (k, i) in range.clone().enumerate() {
                    for j in 0..m {
                        let lp = self.log_plan(i, j);
                        let q = lp.exp();
                        if q > 0.0 {
                            rows[k] += q;
                            cols[0][j] += q;
                            cols[1][j] += self.p.cost.get(i, j) * q;
                            cols[2][j] += q * lp;
                        }
                    }
                }
                (rows, cols)
            })
            .collect();
        let mut out = PlanStats {
            rows: Vec::with_capacity(self.p.n()),
            cols: vec![0.0; m],
            transport: vec![0.0; m],
            neg_entropy: vec![0.0; m],
        };
        for (rows, cols) in parts {
            out.rows.extend(rows);
            for j in 0..m {
                out.cols[j] += cols[0][j];
                out.transport[j] += cols[1][j];
                out.neg_entropy[j] += cols[2][j];
            }
        }
        out
    }

    /// Row sums of the plan after scaling column `j` by `scale[j]`.
    fn scaled_rows(&self, scale: &[f64]) -> Vec<f64> {
        let m = self.p.m();
        self.blocks
            .par_iter()
            .flat_map_iter(|range| {
                range.clone().map(move |i| {
                    (0..m)
                        .map(|j| scale[j] * self.log_plan(i, j).exp())
                        .sum::<f64>()
                })
            })
            .collect()
    }

    /// Factors that give the columns whose potential is strictly inside the
    /// box exactly mass `b`, as they have at the optimum.
    fn column_scale(&self, cols: &[f64]) -> Vec<f64> {
        (0..self.p.m())
            .map(|j| {
                if self.g[j].abs() < self.p.tau_b && cols[j] > 0.0 {
                    self.p.b[j] / cols[j]
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// A lower bound on the optimum for any potentials with `|g| <= tau_b`.
    fn dual(&self, mass: f64) -> f64 {
        let p = self.p;
        let fa: f64 = self.f.iter().zip(&p.a).map(|(f, a)| f * a).sum();
        let quad = if p.tau_a > 0.0 {
            self.f.iter().map(|f| f * f).sum::<f64>() / (4.0 * p.tau_a)
        } else {
            0.0
        };
        let gb: f64 = self.g.iter().zip(&p.b).map(|(g, b)| g * b).sum();
        fa - quad + gb - p.epsilon * mass
    }
}

struct Candidate {
    objective: f64,
    scale: Vec<f64>,
    residual_a: f64,
    residual_b: f64,
}

fn candidate(
    p: &OtProblem,
    rows: &[f64],
    cols: &[f64],
    transport: f64,
    neg_entropy: f64,
    scale: Vec<f64>,
) -> Candidate {
    let ra: f64 = rows.iter().zip(&p.a).map(|(r, a)| (r - a).powi(2)).sum();
    let rb: f64 = cols.iter().zip(&p.b).map(|(c, b)| (c - b).abs()).sum();
    Candidate {
        objective: transport + p.epsilon * neg_entropy + p.tau_a * ra + p.tau_b * rb,
        scale,
        residual_a: ra,
        residual_b: rb,
    }
}

/// The plan of the current potentials, and the same plan with its columns
/// rounded to their target mass where that is optimal.
fn candidates(st: &State) -> (Candidate, Option<Candidate>, f64) {
    let p = st.p;
    let s = st.stats();
    let mass: f64 = s.cols.iter().sum();
    let raw = candidate(
        p,
        &s.rows,
        &s.cols,
        s.transport.iter().sum(),
        s.neg_entropy.iter().sum(),
        vec![1.0; p.m()],
    );
    let scale = st.column_scale(&s.cols);
    if scale.iter().all(|&k| k == 1.0) {
        return (raw, None, mass);
    }
    let rows = st.scaled_rows(&scale);
    let cols: Vec<f64> = s.cols.iter().zip(&scale).map(|(c, k)| c * k).collect();
    let transport = s.transport.iter().zip(&scale).map(|(t, k)| t * k).sum();
    let neg_entropy = (0..p.m())
        .map(|j| scale[j] * (s.neg_entropy[j] + scale[j].ln() * s.cols[j]))
        .sum();
    (
        raw,
        Some(candidate(p, &rows, &cols, transport, neg_entropy, scale)),
        mass,
    )
}

/// Solves the problem to within `tol`: stops when the best objective moved by
/// less than `tol` in the last sweep and the duality gap is below `tol`.
/// Returns the best iterate with `converged = false` when `max_iters` sweeps
/// are not enough.
pub fn solve(problem: &OtProblem, max_iters: usize, tol: f64) -> Result<OtSolution, OtError> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(OtError::InvalidProblem(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let (n, m) = (problem.n(), problem.m());
    let mut st = State::new(problem);
    // The empty plan is the starting point.
    let mut best = candidate(
        problem,
        &vec![0.0; n],
        &vec![0.0; m],
        0.0,
        0.0,
        vec![0.0; m],
    );
    let mut best_f = st.f.clone();
    let mut best_g = st.g.clone();
    let mut best_dual = f64::NEG_INFINITY;
    let mut history = Vec::with_capacity(max_iters);
    let mut converged = false;
    let mut iterations = 0;
    let mut omega = OVER_RELAXATION;
    let mut last_dual = f64::NEG_INFINITY;

    while iterations < max_iters {
        iterations += 1;
        let (f_prev, g_prev) = (st.f.clone(), st.g.clone());
        st.update_g(omega);
        st.update_f(omega);
        let (mut raw, mut rounded, mut mass) = candidates(&st);
        let mut dual = st.dual(mass);
        if omega > 1.0 && dual < last_dual {
            // Overshot: redo a plain sweep and damp.
            st.f = f_prev;
            st.g = g_prev;
            st.update_g(1.0);
            st.update_f(1.0);
            (raw, rounded, mass) = candidates(&st);
            dual = st.dual(mass);
            omega = 1.0 + 0.5 * (omega - 1.0);
        } else {
            omega = (1.0 + (omega - 1.0) * OMEGA_GROWTH).min(OMEGA_MAX);
        }
        last_dual = dual;
        best_dual = best_dual.max(dual);
        let previous = best.objective;
        for c in std::iter::once(raw).chain(rounded) {
            if c.objective < best.objective {
                best = c;
                best_f.clone_from(&st.f);
                best_g.clone_from(&st.g);
            }
        }
        history.push(best.objective);
        if previous - best.objective < tol && best.objective - best_dual < tol {
            converged = true;
            break;
        }
    }

    let mut sol = OtSolution {
        plan: None,
        f: best_f,
        g: best_g,
        column_scale: best.scale,
        objective: best.objective,
        dual_objective: best_dual,
        marginal_residual_a: best.residual_a,
        marginal_residual_b: best.residual_b,
        iterations,
        converged,
        history,
    };
    if n * m <= PLAN_LIMIT {
        let plan = (0..n * m)
            .map(|k| sol.plan_entry(problem, k / m, k % m))
            .collect();
        sol.plan = Some(plan);
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::{evaluate_objective, CostKind, CostMatrix};

    #[test]
    fn lambert_w_identity() {
        for x in [-40.0, -3.0, 0.0, 0.5, 1.0, 3.0, 50.0, 700.0, 1e5] {
            let w = lambert_w_exp(x);
            assert!(
                (w + w.ln() - x).abs() < 1e-10 * x.abs().max(1.0),
                "x={x} w={w}"
            );
        }
        assert!((lambert_w_exp(1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_atom_saturates_once_tau_beats_cost() {
        let c = CostMatrix {
            n: 1,
            m: 1,
            values: vec![2.0],
            clamped: 0,
        };
        let run = |tau: f64| {
            let p = OtProblem::new(c.clone(), vec![1.0], vec![1.0], 0.1, tau).unwrap();
            let s = solve(&p, 2000, 1e-10).unwrap();
            assert!(s.converged);
            (s.plan.unwrap()[0], s.objective)
        };
        // Below the cost the plan sheds mass; above it the L1 kink pins P = 1.
        let (cheap, _) = run(1.0);
        assert!(cheap < 0.9 && cheap > 0.0);
        let (mass, obj) = run(10.0);
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
        assert!((obj - 2.0).abs() < 1e-5, "{obj}");
    }

    #[test]
    fn gap_closes_and_history_is_monotone() {
        let src: Vec<[f64; 2]> = (0..6).map(|i| [i as f64 * 0.7, (i % 2) as f64]).collect();
        let dst = [[0.5, 0.5], [2.0, 0.2], [3.5, 1.0]];
        let a = vec![0.2, 0.3, 0.5, 0.4, 0.1, 0.6];
        let p = OtProblem::from_points(
            &src,
            a,
            &dst,
            vec![1.0; 3],
            CostKind::ExpEuclidean,
            0.1,
            10.0,
        )
        .unwrap();
        let s = solve(&p, 500, 1e-6).unwrap();
        assert!(s.converged, "iterations {}", s.iterations);
        assert!(s.duality_gap() >= -1e-9 && s.duality_gap() < 1e-6);
        assert!(s.history.windows(2).all(|w| w[1] <= w[0]));
        let direct = evaluate_objective(&p, s.plan.as_ref().unwrap());
        assert!((s.objective - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn zero_target_mass_keeps_plan_empty_in_that_column() {
        let p = OtProblem::from_points(
            &[[0.0, 0.0]],
            vec![1.0],
            &[[0.0, 0.0], [0.1, 0.0]],
            vec![1.0, 0.0],
            CostKind::Euclidean,
            0.1,
            10.0,
        )
        .unwrap();
        let s = solve(&p, 500, 1e-8).unwrap();
        let plan = s.plan.unwrap();
        assert!(plan[1] < plan[0] * 1e-3);
    }
}
