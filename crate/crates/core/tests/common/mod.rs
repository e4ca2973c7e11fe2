//! Shared reference implementations for integration tests.
#![allow(dead_code)]

use mvforge::ot::{evaluate_objective, OtProblem};
use nalgebra::{DMatrix, DVector};

fn huber(x: f64, delta: f64) -> (f64, f64, f64) {
    if x.abs() <= delta {
        (x * x / (2.0 * delta), x / delta, 1.0 / delta)
    } else {
        (x.abs() - delta / 2.0, x.signum(), 0.0)
    }
}

/// Objective with the L1 term replaced by a Huber function of width `delta`,
/// plus its gradient and Hessian in `P`.
fn smoothed(p: &OtProblem, plan: &[f64], delta: f64) -> (f64, DVector<f64>, DMatrix<f64>) {
    let (n, m) = (p.n(), p.m());
    let len = n * m;
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; m];
    let mut value = 0.0;
    for i in 0..n {
        for j in 0..m {
            let q = plan[i * m + j];
            rows[i] += q;
            cols[j] += q;
            value += p.cost.values[i * m + j] * q + p.epsilon * q * q.ln();
        }
    }
    let mut dcol = vec![0.0; m];
    let mut hcol = vec![0.0; m];
    for j in 0..m {
        let (h, dh, ddh) = huber(cols[j] - p.b[j], delta);
        value += p.tau_b * h;
        dcol[j] = p.tau_b * dh;
        hcol[j] = p.tau_b * ddh;
    }
    let mut grad = DVector::zeros(len);
    let mut hess = DMatrix::zeros(len, len);
    for i in 0..n {
        let r = rows[i] - p.a[i];
        value += p.tau_a * r * r;
        for j in 0..m {
            let k = i * m + j;
            grad[k] =
                p.cost.values[k] + p.epsilon * (plan[k].ln() + 1.0) + 2.0 * p.tau_a * r + dcol[j];
            hess[(k, k)] += p.epsilon / plan[k];
            for jj in 0..m {
                hess[(k, i * m + jj)] += 2.0 * p.tau_a;
            }
            for ii in 0..n {
                hess[(k, ii * m + j)] += hcol[j];
            }
        }
    }
    (value, grad, hess)
}

/// Independent primal reference: damped Newton on the plan entries with the
/// L1 penalty smoothed, shrinking the smoothing width between rounds. Returns
/// the exact objective of the final plan.
pub fn ot_oracle(p: &OtProblem) -> f64 {
    let len = p.n() * p.m();
    let mut plan = vec![1.0 / len as f64; len];
    let mut delta = 1e-2;
    while delta >= 1e-11 {
        for _ in 0..200 {
            let (value, grad, hess) = smoothed(p, &plan, delta);
            let Some(chol) = hess.cholesky() else { break };
            let dir = -chol.solve(&grad);
            let decrement = -grad.dot(&dir);
            if decrement < 1e-24 {
                break;
            }
            // Stay strictly positive, then backtrack.
            let mut t: f64 = 1.0;
            for k in 0..len {
                if dir[k] < 0.0 {
                    t = t.min(0.99 * plan[k] / -dir[k]);
                }
            }
            loop {
                let trial: Vec<f64> = (0..len).map(|k| plan[k] + t * dir[k]).collect();
                let (v, _, _) = smoothed(p, &trial, delta);
                if v <= value - 0.25 * t * decrement || t < 1e-16 {
                    plan = trial;
                    break;
                }
                t *= 0.5;
            }
        }
        delta *= 0.1;
    }
    evaluate_objective(p, &plan)
}

/// Exhaustive matching: maximum number of pairs closer than `t`, then minimum
/// total distance, by dynamic programming over subsets of `pred`. Returns the
/// chosen `(gt, pred)` pairs in gt order.
pub fn brute_force_match(gt: &[[f64; 2]], pred: &[[f64; 2]], t: f64) -> Vec<(usize, usize)> {
    assert!(pred.len() <= 16, "subset DP is exponential in pred.len()");
    let d = |i: usize, j: usize| (gt[i][0] - pred[j][0]).hypot(gt[i][1] - pred[j][1]);
    let full = 1usize << pred.len();
    // best[i][mask]: (pairs, distance) achievable with gt[i..] using preds outside mask.
    let mut best = vec![vec![(0usize, 0.0f64); full]; gt.len() + 1];
    let better = |a: (usize, f64), b: (usize, f64)| a.0 > b.0 || (a.0 == b.0 && a.1 < b.1);
    for i in (0..gt.len()).rev() {
        for mask in 0..full {
            let mut b = best[i + 1][mask];
            for j in 0..pred.len() {
                if mask & (1 << j) == 0 && d(i, j) < t {
                    let (k, s) = best[i + 1][mask | (1 << j)];
                    let cand = (k + 1, s + d(i, j));
                    if better(cand, b) {
                        b = cand;
                    }
                }
            }
            best[i][mask] = b;
        }
    }
    let mut pairs = Vec::new();
    let mut mask = 0;
    for i in 0..gt.len() {
        let target = best[i][mask];
        if best[i + 1][mask] == target {
            continue;
        }
        let j = (0..pred.len())
            .find(|&j| {
                mask & (1 << j) == 0 && d(i, j) < t && {
                    let (k, s) = best[i + 1][mask | (1 << j)];
                    (k + 1, s + d(i, j)) == target
                }
            })
            .expect("reconstruction follows the table");
        pairs.push((i, j));
        mask |= 1 << j;
    }
    pairs
}

/// Random `(n, m)` OT instance with positions in a 3x3 box and the default
/// exponential cost.
pub fn random_ot_problem(rng: &mut impl rand::Rng, epsilon: f64, tau: f64) -> OtProblem {
    let n = rng.random_range(1..=6);
    let m = rng.random_range(1..=6);
    let mut pts = |k: usize| -> Vec<[f64; 2]> {
        (0..k)
            .map(|_| [3.0 * rng.random::<f64>(), 3.0 * rng.random::<f64>()])
            .collect()
    };
    let src = pts(n);
    let dst = pts(m);
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let b = vec![1.0; m];
    OtProblem::from_points(
        &src,
        a,
        &dst,
        b,
        mvforge::ot::CostKind::ExpEuclidean,
        epsilon,
        tau,
    )
    .unwrap()
}

/// Ground-truth driven fusion check: 20 people on distinct cell centers of a
/// 10 m square, 5 ring cameras. Each view gets a density map rendered at the
/// projected heads; the maps are projected at head height and max-fused.
/// Returns the number of people whose cell is not a fused peak plus the
/// number of peaks that are not a person's cell.
pub fn toy_fusion_mismatches(seed: u64) -> usize {
    use mvforge::annotate::render_density_map;
    use mvforge::fusion::{ground_pipeline, peak_cells, ViewMapStack};
    use mvforge::geometry::{standard_rig, CameraRing, GroundGrid, WorldPoint, HEAD_HEIGHT};
    use rand::Rng;
    use std::collections::BTreeSet;

    let mut rng = mvforge::rng::rng_from_seed(seed);
    let grid = GroundGrid::covering(10.0, 10.0, 0.1).unwrap();
    let mut cells: Vec<(usize, usize)> = Vec::new();
    while cells.len() < 20 {
        let c = (rng.random_range(10..90), rng.random_range(10..90));
        let far = cells.iter().all(|o: &(usize, usize)| {
            let dr = o.0 as f64 - c.0 as f64;
            let dc = o.1 as f64 - c.1 as f64;
            dr.hypot(dc) >= 10.0
        });
        if far {
            cells.push(c);
        }
    }
    let pitch = -30.0f64;
    let radius = 15.0;
    let template = CameraRing {
        image_width: 1280,
        image_height: 720,
        ..CameraRing::new(
            WorldPoint::new(5.0, 5.0, 0.0),
            radius,
            radius * (-pitch).to_radians().tan(),
            pitch,
            5,
            60.0,
        )
    };
    let cameras = standard_rig(&template, 5).unwrap();
    let maps = cameras
        .iter()
        .map(|cam| {
            let heads: Vec<(f64, f64)> = cells
                .iter()
                .filter_map(|&(r, c)| {
                    let (x, y) = grid.cell_center(r, c);
                    let q = cam.project(&WorldPoint::new(x, y, HEAD_HEIGHT)).ok()?;
                    cam.contains(&q).then_some((q.v, q.u))
                })
                .collect();
            render_density_map(
                &heads,
                cam.image_height as usize,
                cam.image_width as usize,
                2.0,
            )
        })
        .collect();
    let stack = ViewMapStack::new(maps, cameras).unwrap();
    let fused = ground_pipeline(&stack, None, &grid, HEAD_HEIGHT).unwrap();
    let floor = 1e-3 * fused.values.iter().cloned().fold(0.0f32, f32::max);
    let peaks: BTreeSet<(usize, usize)> = peak_cells(&fused, floor).into_iter().collect();
    let truth: BTreeSet<(usize, usize)> = cells.into_iter().collect();
    peaks.symmetric_difference(&truth).count()
}
