use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Maximum cardinality, then minimum total distance.
    #[default]
    Optimal,
    /// Repeatedly take the closest free pair.
    Greedy,
}

impl std::str::FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" | "hungarian" => Ok(MatchMode::Optimal),
            "greedy" => Ok(MatchMode::Greedy),
            other => Err(format!(
                "unknown match mode '{other}' (expected optimal|greedy)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub gt: usize,
    pub pred: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Sorted by gt index.
    pub pairs: Vec<MatchedPair>,
    pub threshold: f64,
}

impl MatchReport {
    pub fn matched_distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().map(|p| p.distance)
    }

    pub fn total_distance(&self) -> f64 {
        self.matched_distances().sum()
    }

    pub fn n_gt(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn n_pred(&self) -> usize {
        self.tp + self.fp
    }
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Matches predictions to ground truth using pairs closer than `threshold`
/// (strictly).
///
/// # Panics
/// If `threshold` is not positive and finite.
pub fn match_points(
    gt: &[[f64; 2]],
    pred: &[[f64; 2]],
    threshold: f64,
    mode: MatchMode,
) -> MatchReport {
    assert!(
        threshold > 0.0 && threshold.is_finite(),
        "threshold must be positive, got {threshold}"
    );
    let mut edges = Vec::new();
    for (i, g) in gt.iter().enumerate() {
        for (j, p) in pred.iter().enumerate() {
            let d = dist(g, p);
            if d < threshold {
                edges.push((i, j, d));
            }
        }
    }
    let mut pairs = match mode {
        MatchMode::Greedy => greedy(&edges, gt.len(), pred.len()),
        MatchMode::Optimal => optimal(&edges, gt.len(), pred.len(), threshold),
    };
    pairs.sort_by_key(|p| p.gt);
    let tp = pairs.len();
    MatchReport {
        tp,
        fp: pred.len() - tp,
        fn_: gt.len() - tp,
        pairs,
        threshold,
    }
}

fn greedy(edges: &[(usize, usize, f64)], n: usize, m: usize) -> Vec<MatchedPair> {
    let mut order: Vec<&(usize, usize, f64)> = edges.iter().collect();
    order.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut gt_used = vec![false; n];
    let mut pred_used = vec![false; m];
    let mut out = Vec::new();
    for &&(i, j, d) in &order {
        if !gt_used[i] && !pred_used[j] {
            gt_used[i] = true;
            pred_used[j] = true;
            out.push(MatchedPair {
                gt: i,
                pred: j,
                distance: d,
            });
        }
    }
    out
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Solves each connected component of the threshold graph separately.
fn optimal(edges: &[(usize, usize, f64)], n: usize, m: usize, threshold: f64) -> Vec<MatchedPair> {
    // Nodes: gt 0..n, pred n..n+m.
    let mut parent: Vec<usize> = (0..n + m).collect();
    for &(i, j, _) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, n + j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut comp_edges: std::collections::BTreeMap<usize, Vec<(usize, usize, f64)>> =
        Default::default();
    for &e in edges {
        let root = find(&mut parent, e.0);
        comp_edges.entry(root).or_default().push(e);
    }
    let mut out = Vec::new();
    for es in comp_edges.values() {
        let mut rows: Vec<usize> = es.iter().map(|e| e.0).collect();
        let mut cols: Vec<usize> = es.iter().map(|e| e.1).collect();
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        if es.len() == 1 {
            let (i, j, d) = es[0];
            out.push(MatchedPair {
                gt: i,
                pred: j,
                distance: d,
            });
            continue;
        }
        // Every allowed edge is worth a bonus larger than any sum of
        // distances, so cardinality is maximized first.
        let k = (rows.len().min(cols.len()) + 1) as f64 * threshold;
        let transpose = rows.len() > cols.len();
        let (nr, nc) = if transpose {
            (cols.len(), rows.len())
        } else {
            (rows.len(), cols.len())
        };
        let mut cost = vec![0.0; nr * nc];
        let mut dist_of = vec![None; nr * nc];
        for &(i, j, d) in es {
            let r = rows.binary_search(&i).unwrap();
            let c = cols.binary_search(&j).unwrap();
            let (r, c) = if transpose { (c, r) } else { (r, c) };
            cost[r * nc + c] = d - k;
            dist_of[r * nc + c] = Some(d);
        }
        for (r, c) in hungarian(&cost, nr, nc) {
            if let Some(d) = dist_of[r * nc + c] {
                let (ri, ci) = if transpose { (c, r) } else { (r, c) };
                out.push(MatchedPair {
                    gt: rows[ri],
                    pred: cols[ci],
                    distance: d,
                });
            }
        }
    }
    out
}

/// Minimum-cost assignment of every row to a distinct column (`n <= m`);
/// shortest augmenting paths with potentials.
pub(crate) fn hungarian(cost: &[f64], n: usize, m: usize) -> Vec<(usize, usize)> {
    assert!(n <= m);
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hungarian_small_matrix() {
        // Optimum picks (0,1), (1,0), (2,2): 1 + 2 + 2 = 5.
        let c = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let mut a = hungarian(&c, 3, 3);
        a.sort();
        let total: f64 = a.iter().map(|&(r, k)| c[r * 3 + k]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn identical_sets_match_fully() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for mode in [MatchMode::Optimal, MatchMode::Greedy] {
            let r = match_points(&pts, &pts, 3.0, mode);
            assert_eq!((r.tp, r.fp, r.fn_), (3, 0, 0));
            assert_eq!(r.total_distance(), 0.0);
        }
    }

    #[test]
    fn empty_predictions() {
        let r = match_points(&[[0.0, 0.0]; 3], &[], 1.0, MatchMode::Optimal);
        assert_eq!((r.tp, r.fp, r.fn_), (0, 0, 3));
    }

    #[test]
    fn optimal_beats_greedy_on_cardinality() {
        // Greedy takes the closest pair (g0,p0) and strands g1.
        let gt = [[0.0, 0.0], [1.8, 0.0]];
        let pred = [[0.9, 0.0], [-0.95, 0.0]];
        let g = match_points(&gt, &pred, 1.0, MatchMode::Greedy);
        let o = match_points(&gt, &pred, 1.0, MatchMode::Optimal);
        assert_eq!(g.tp, 1);
        assert_eq!(o.tp, 2);
    }

    #[test]
    fn threshold_is_strict() {
        let r = match_points(&[[0.0, 0.0]], &[[3.0, 0.0]], 3.0, MatchMode::Optimal);
        assert_eq!(r.tp, 0);
    }
}
