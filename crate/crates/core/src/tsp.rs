//! Tour and open-path solvers over arbitrary asymmetric cost matrices.
//!
//! Instances up to `exact_threshold` nodes are solved to proven optimality
//! by dynamic programming over subsets; larger ones get a nearest-neighbor
//! construction improved by 2-opt and Or-opt passes. Both tiers are fully
//! deterministic. A free path end is handled by appending a virtual
//! terminal that every node can reach at zero cost, then solving the
//! fixed-end instance.

use crate::matrix::SquareMatrix;
use crate::scalar::Scalar;

/// Node count up to which instances are solved exactly by default.
pub const DEFAULT_EXACT_THRESHOLD: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum TspError {
    #[error("instance has no nodes")]
    EmptyInstance,
    #[error("start and end anchors coincide on {n} > 1 nodes")]
    InfeasibleAnchors { n: usize },
    #[error("anchor index {index} out of bounds for {n} nodes")]
    AnchorOutOfBounds { index: usize, n: usize },
}

/// Closed tour through all nodes, anchored at `start`.
#[derive(Debug, Clone)]
pub struct TourInstance<S: Scalar> {
    pub cost: SquareMatrix<S>,
    pub start: usize,
}

/// Open path visiting all nodes from `start`, optionally ending at `end`.
#[derive(Debug, Clone)]
pub struct PathInstance<S: Scalar> {
    pub cost: SquareMatrix<S>,
    pub start: usize,
    pub end: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Exact,
    LocalSearch,
}

/// A solved instance: the visiting order (starting at the anchor), its
/// re-summed objective, and whether optimality is proven.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveReport<S: Scalar> {
    pub order: Vec<usize>,
    pub objective: S,
    pub optimal: bool,
    pub method: SolveMethod,
}

pub fn tour_objective<S: Scalar>(cost: &SquareMatrix<S>, order: &[usize]) -> S {
    let mut total = S::zero();
    for w in order.windows(2) {
        total = total + cost.get(w[0], w[1]);
    }
    if order.len() > 1 {
        total = total + cost.get(order[order.len() - 1], order[0]);
    }
    total
}

pub fn path_objective<S: Scalar>(cost: &SquareMatrix<S>, order: &[usize]) -> S {
    order
        .windows(2)
        .fold(S::zero(), |acc, w| acc + cost.get(w[0], w[1]))
}

/// Minimizes a closed tour anchored at `instance.start`.
///
/// Panics if the anchor is out of bounds; a single-node instance yields the
/// trivial tour.
pub fn solve_tour<S: Scalar>(instance: &TourInstance<S>, exact_threshold: usize) -> SolveReport<S> {
    let n = instance.cost.n();
    assert!(instance.start < n, "tour anchor within bounds");
    if n == 1 {
        return SolveReport {
            order: vec![instance.start],
            objective: S::zero(),
            optimal: true,
            method: SolveMethod::Exact,
        };
    }
    if n <= exact_threshold {
        let order = held_karp(&instance.cost, instance.start, Anchor::Tour);
        let objective = tour_objective(&instance.cost, &order);
        return SolveReport {
            order,
            objective,
            optimal: true,
            method: SolveMethod::Exact,
        };
    }
    let mut order = nearest_neighbor_order(&instance.cost, instance.start, None);
    local_search(&instance.cost, &mut order, true);
    let objective = tour_objective(&instance.cost, &order);
    SolveReport {
        order,
        objective,
        optimal: false,
        method: SolveMethod::LocalSearch,
    }
}

/// Minimizes an open path from `instance.start`, ending at `instance.end`
/// when fixed and anywhere otherwise.
pub fn solve_path<S: Scalar>(
    instance: &PathInstance<S>,
    exact_threshold: usize,
) -> Result<SolveReport<S>, TspError> {
    let n = instance.cost.n();
    if n == 0 {
        return Err(TspError::EmptyInstance);
    }
    if instance.start >= n {
        return Err(TspError::AnchorOutOfBounds {
            index: instance.start,
            n,
        });
    }
    if let Some(end) = instance.end {
        if end >= n {
            return Err(TspError::AnchorOutOfBounds { index: end, n });
        }
        if end == instance.start && n > 1 {
            return Err(TspError::InfeasibleAnchors { n });
        }
    }
    if n == 1 {
        return Ok(SolveReport {
            order: vec![instance.start],
            objective: S::zero(),
            optimal: true,
            method: SolveMethod::Exact,
        });
    }

    // A free end becomes a virtual terminal: reachable from every node at
    // zero cost and never left.
    let (cost, end, virtual_end) = match instance.end {
        Some(end) => (instance.cost.clone(), end, false),
        None => {
            let aug = SquareMatrix::from_fn(n + 1, |i, j| {
                if i < n && j < n {
                    instance.cost.get(i, j)
                } else if j == n {
                    S::zero()
                } else {
                    S::infinity()
                }
            });
            (aug, n, true)
        }
    };

    let exact = n <= exact_threshold;
    let mut order = if exact {
        held_karp(&cost, instance.start, Anchor::Path { end })
    } else {
        let mut order = nearest_neighbor_order(&cost, instance.start, Some(end));
        local_search(&cost, &mut order, false);
        order
    };
    if virtual_end {
        debug_assert_eq!(order.last(), Some(&n));
        order.pop();
    }
    let objective = path_objective(&instance.cost, &order);
    Ok(SolveReport {
        order,
        objective,
        optimal: exact,
        method: if exact {
            SolveMethod::Exact
        } else {
            SolveMethod::LocalSearch
        },
    })
}

enum Anchor {
    Tour,
    Path { end: usize },
}

/// Subset dynamic programming over the non-anchor nodes. Ties resolve to
/// the smallest node index, so results are deterministic.
fn held_karp<S: Scalar>(cost: &SquareMatrix<S>, start: usize, anchor: Anchor) -> Vec<usize> {
    let n = cost.n();
    let fixed_end = match &anchor {
        Anchor::Tour => None,
        Anchor::Path { end } => Some(*end),
    };
    let others: Vec<usize> = (0..n)
        .filter(|&v| v != start && Some(v) != fixed_end)
        .collect();
    let k = others.len();

    if k == 0 {
        return match fixed_end {
            Some(end) => vec![start, end],
            None => vec![start],
        };
    }

    let full = (1usize << k) - 1;
    let mut dp = vec![S::infinity(); (full + 1) * k];
    let mut parent = vec![u8::MAX; (full + 1) * k];
    for (i, &node) in others.iter().enumerate() {
        dp[(1 << i) * k + i] = cost.get(start, node);
    }
    for mask in 1..=full {
        for i in 0..k {
            if mask & (1 << i) == 0 {
                continue;
            }
            let cur = dp[mask * k + i];
            if !cur.is_finite() {
                continue;
            }
            for j in 0..k {
                if mask & (1 << j) != 0 {
                    continue;
                }
                let next = mask | (1 << j);
                let cand = cur + cost.get(others[i], others[j]);
                if cand < dp[next * k + j] {
                    dp[next * k + j] = cand;
                    parent[next * k + j] = i as u8;
                }
            }
        }
    }

    let closing = |i: usize| match &anchor {
        Anchor::Tour => cost.get(others[i], start),
        Anchor::Path { end } => cost.get(others[i], *end),
    };
    let mut best = 0;
    let mut best_cost = S::infinity();
    for i in 0..k {
        let total = dp[full * k + i] + closing(i);
        if total < best_cost {
            best_cost = total;
            best = i;
        }
    }

    let mut chain = Vec::with_capacity(k);
    let mut mask = full;
    let mut i = best;
    loop {
        chain.push(others[i]);
        let p = parent[mask * k + i];
        mask &= !(1 << i);
        if mask == 0 {
            break;
        }
        i = p as usize;
    }
    chain.reverse();

    let mut order = Vec::with_capacity(n);
    order.push(start);
    order.extend(chain);
    if let Some(end) = fixed_end {
        order.push(end);
    }
    order
}

/// Greedy chain from `start`; a fixed `end` is excluded from the chain and
/// appended last. Ties go to the smallest node index.
fn nearest_neighbor_order<S: Scalar>(
    cost: &SquareMatrix<S>,
    start: usize,
    end: Option<usize>,
) -> Vec<usize> {
    let n = cost.n();
    let mut visited = vec![false; n];
    visited[start] = true;
    if let Some(end) = end {
        visited[end] = true;
    }
    let mut order = vec![start];
    let mut current = start;
    loop {
        let mut next = None;
        let mut best = S::infinity();
        for (v, &seen) in visited.iter().enumerate() {
            if seen {
                continue;
            }
            let c = cost.get(current, v);
            if c < best {
                best = c;
                next = Some(v);
            }
        }
        match next {
            Some(v) => {
                visited[v] = true;
                order.push(v);
                current = v;
            }
            None => break,
        }
    }
    if let Some(end) = end {
        order.push(end);
    }
    order
}

/// Alternating best-improvement 2-opt and Or-opt passes until neither
/// finds a move. Position 0 stays the anchor; for paths the last position
/// stays the (possibly virtual) end. Deltas account for asymmetric costs:
/// a 2-opt reversal re-prices every internal arc via prefix sums.
fn local_search<S: Scalar>(cost: &SquareMatrix<S>, order: &mut Vec<usize>, is_tour: bool) {
    let tol = S::from_f64_lossy(1e-9);
    loop {
        let improved_two_opt = two_opt_pass(cost, order, is_tour, tol);
        let improved_or_opt = or_opt_pass(cost, order, is_tour, tol);
        if !improved_two_opt && !improved_or_opt {
            break;
        }
    }
}

fn two_opt_pass<S: Scalar>(
    cost: &SquareMatrix<S>,
    order: &mut [usize],
    is_tour: bool,
    tol: S,
) -> bool {
    let n = order.len();
    if n < 4 {
        return false;
    }
    let mut any = false;
    loop {
        // Prefix sums of forward and reversed arcs along the sequence.
        let mut fwd = vec![S::zero(); n];
        let mut bwd = vec![S::zero(); n];
        for t in 1..n {
            fwd[t] = fwd[t - 1] + cost.get(order[t - 1], order[t]);
            bwd[t] = bwd[t - 1] + cost.get(order[t], order[t - 1]);
        }

        let j_max = if is_tour { n - 1 } else { n - 2 };
        let mut best_delta = -tol;
        let mut best_move: Option<(usize, usize)> = None;
        for i in 1..=j_max {
            for j in (i + 1)..=j_max {
                let after = if j + 1 == n { order[0] } else { order[j + 1] };
                let old = cost.get(order[i - 1], order[i])
                    + (fwd[j] - fwd[i])
                    + cost.get(order[j], after);
                let new = cost.get(order[i - 1], order[j])
                    + (bwd[j] - bwd[i])
                    + cost.get(order[i], after);
                let delta = new - old;
                if delta < best_delta {
                    best_delta = delta;
                    best_move = Some((i, j));
                }
            }
        }
        match best_move {
            Some((i, j)) => {
                order[i..=j].reverse();
                any = true;
            }
            None => return any,
        }
    }
}

fn or_opt_pass<S: Scalar>(
    cost: &SquareMatrix<S>,
    order: &mut Vec<usize>,
    is_tour: bool,
    tol: S,
) -> bool {
    let n = order.len();
    if n < 3 {
        return false;
    }
    let mut any = false;
    loop {
        let succ = |t: usize| -> Option<usize> {
            if t + 1 < n {
                Some(order[t + 1])
            } else if is_tour {
                Some(order[0])
            } else {
                None
            }
        };
        let seg_max = if is_tour { n - 1 } else { n - 2 };
        let mut best_delta = -tol;
        let mut best_move: Option<(usize, usize, usize)> = None;
        for len in 1..=3usize.min(seg_max.saturating_sub(1)) {
            for i in 1..=seg_max + 1 - len {
                let seg_end = i + len - 1;
                let Some(after_seg) = succ(seg_end) else {
                    continue;
                };
                let removed =
                    cost.get(order[i - 1], order[i]) + cost.get(order[seg_end], after_seg);
                let bridge = cost.get(order[i - 1], after_seg);
                // Insert after position t, for t outside [i-1, seg_end].
                let t_max = if is_tour { n - 1 } else { n - 2 };
                for t in 0..=t_max {
                    if t + 1 >= i && t <= seg_end {
                        continue;
                    }
                    let after_t = succ(t).expect("t bounded away from the path end");
                    let old = removed + cost.get(order[t], after_t);
                    let new =
                        bridge + cost.get(order[t], order[i]) + cost.get(order[seg_end], after_t);
                    let delta = new - old;
                    if delta < best_delta {
                        best_delta = delta;
                        best_move = Some((i, len, t));
                    }
                }
            }
        }
        match best_move {
            Some((i, len, t)) => {
                let seg: Vec<usize> = order.drain(i..i + len).collect();
                let insert_at = if t < i { t + 1 } else { t + 1 - len };
                for (off, v) in seg.into_iter().enumerate() {
                    order.insert(insert_at + off, v);
                }
                any = true;
            }
            None => return any,
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    use super::oracle;

    fn matrix_from(rows: Vec<Vec<f64>>) -> SquareMatrix<f64> {
        SquareMatrix::try_from(rows).unwrap()
    }

    #[test]
    fn single_node_tour_is_trivial() {
        let inst = TourInstance {
            cost: matrix_from(vec![vec![0.0]]),
            start: 0,
        };
        let report = solve_tour(&inst, DEFAULT_EXACT_THRESHOLD);
        assert_eq!(report.order, vec![0]);
        assert_eq!(report.objective, 0.0);
        assert!(report.optimal);
    }

    #[test]
    fn four_node_tour_matches_brute_force() {
        let cost = matrix_from(vec![
            vec![0.0, 2.0, 9.0, 10.0],
            vec![1.0, 0.0, 6.0, 4.0],
            vec![15.0, 7.0, 0.0, 8.0],
            vec![6.0, 3.0, 12.0, 0.0],
        ]);
        let inst = TourInstance {
            cost: cost.clone(),
            start: 0,
        };
        let report = solve_tour(&inst, DEFAULT_EXACT_THRESHOLD);
        let (_, oracle_obj) = oracle::best_tour(&cost, 0);
        assert!((report.objective - oracle_obj).abs() < 1e-9);
        assert_eq!(report.order[0], 0);
    }

    #[test]
    fn asymmetric_tour_prefers_cheap_direction() {
        // The cycle 0->1->2->0 costs 3; its reverse costs 30.
        let cost = matrix_from(vec![
            vec![0.0, 1.0, 10.0],
            vec![10.0, 0.0, 1.0],
            vec![1.0, 10.0, 0.0],
        ]);
        let inst = TourInstance { cost, start: 0 };
        let report = solve_tour(&inst, DEFAULT_EXACT_THRESHOLD);
        assert_eq!(report.order, vec![0, 1, 2]);
        assert!((report.objective - 3.0).abs() < 1e-12);
        let reverse_cost = tour_objective(&inst.cost, &[0, 2, 1]);
        assert!(reverse_cost > report.objective);
    }

    #[test]
    fn two_node_path_is_forced() {
        let inst = PathInstance {
            cost: matrix_from(vec![vec![0.0, 5.0], vec![7.0, 0.0]]),
            start: 0,
            end: Some(1),
        };
        let report = solve_path(&inst, DEFAULT_EXACT_THRESHOLD).unwrap();
        assert_eq!(report.order, vec![0, 1]);
        assert_eq!(report.objective, 5.0);
    }

    #[test]
    fn fixed_endpoint_path_matches_brute_force() {
        let cost = matrix_from(vec![
            vec![0.0, 3.0, 8.0, 2.0, 9.0],
            vec![3.0, 0.0, 4.0, 7.0, 5.0],
            vec![8.0, 4.0, 0.0, 6.0, 1.0],
            vec![2.0, 7.0, 6.0, 0.0, 3.0],
            vec![9.0, 5.0, 1.0, 3.0, 0.0],
        ]);
        let inst = PathInstance {
            cost: cost.clone(),
            start: 0,
            end: Some(4),
        };
        let report = solve_path(&inst, DEFAULT_EXACT_THRESHOLD).unwrap();
        let (_, oracle_obj) = oracle::best_path(&cost, 0, Some(4));
        assert!((report.objective - oracle_obj).abs() < 1e-9);
        assert_eq!(report.order[0], 0);
        assert_eq!(*report.order.last().unwrap(), 4);
    }

    #[test]
    fn line_graph_path_reads_left_to_right() {
        let xs = [0.0f64, 1.0, 2.5, 4.0, 7.0];
        let cost = SquareMatrix::from_fn(xs.len(), |i, j| (xs[i] - xs[j]).abs());
        let inst = PathInstance {
            cost,
            start: 0,
            end: None,
        };
        let report = solve_path(&inst, DEFAULT_EXACT_THRESHOLD).unwrap();
        assert_eq!(report.order, vec![0, 1, 2, 3, 4]);
        assert!((report.objective - 7.0).abs() < 1e-12);
    }

    #[test]
    fn coinciding_anchors_rejected() {
        let inst = PathInstance {
            cost: matrix_from(vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
            start: 0,
            end: Some(0),
        };
        assert!(matches!(
            solve_path(&inst, DEFAULT_EXACT_THRESHOLD),
            Err(TspError::InfeasibleAnchors { .. })
        ));
    }

    #[test]
    fn local_search_beats_or_matches_nearest_neighbor() {
        // Threshold 0 forces the heuristic tier.
        let cost = matrix_from(vec![
            vec![0.0, 2.0, 9.0, 10.0, 4.0, 3.0],
            vec![2.0, 0.0, 6.0, 4.0, 5.0, 8.0],
            vec![9.0, 6.0, 0.0, 8.0, 7.0, 1.0],
            vec![10.0, 4.0, 8.0, 0.0, 2.0, 6.0],
            vec![4.0, 5.0, 7.0, 2.0, 0.0, 9.0],
            vec![3.0, 8.0, 1.0, 6.0, 9.0, 0.0],
        ]);
        let inst = TourInstance {
            cost: cost.clone(),
            start: 0,
        };
        let report = solve_tour(&inst, 0);
        assert_eq!(report.method, SolveMethod::LocalSearch);
        let nn = nearest_neighbor_order(&cost, 0, None);
        assert!(report.objective <= tour_objective(&cost, &nn) + 1e-12);
        let exact = solve_tour(&inst, DEFAULT_EXACT_THRESHOLD);
        assert!(report.objective >= exact.objective - 1e-12);
    }

    #[test]
    fn heuristic_path_respects_anchors() {
        let cost = SquareMatrix::from_fn(8, |i, j| {
            if i == j {
                0.0
            } else {
                ((i as f64 * 3.7 + j as f64 * 1.3).sin().abs() * 10.0) + 1.0
            }
        });
        let inst = PathInstance {
            cost,
            start: 2,
            end: Some(5),
        };
        let report = solve_path(&inst, 0).unwrap();
        assert_eq!(report.order[0], 2);
        assert_eq!(*report.order.last().unwrap(), 5);
        let mut sorted = report.order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn free_end_heuristic_path_is_a_permutation() {
        let cost = SquareMatrix::from_fn(9, |i, j| {
            if i == j {
                0.0
            } else {
                ((i * 31 + j * 17) % 23) as f64 + 1.0
            }
        });
        let inst = PathInstance {
            cost,
            start: 4,
            end: None,
        };
        let report = solve_path(&inst, 0).unwrap();
        assert_eq!(report.order[0], 4);
        assert_eq!(report.order.len(), 9);
        let mut sorted = report.order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn repeated_solves_are_identical() {
        let cost = SquareMatrix::from_fn(12, |i, j| {
            if i == j {
                0.0
            } else {
                ((i * 13 + j * 7) % 29) as f64 + 0.5
            }
        });
        let inst = TourInstance { cost, start: 0 };
        let a = solve_tour(&inst, 0);
        let b = solve_tour(&inst, 0);
        assert_eq!(a.order, b.order);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn f32_instances_solve_too() {
        let cost = SquareMatrix::<f32>::from_fn(5, |i, j| {
            if i == j {
                0.0
            } else {
                ((i * 7 + j * 3) % 11) as f32 + 1.0
            }
        });
        let report = solve_tour(&TourInstance { cost, start: 0 }, DEFAULT_EXACT_THRESHOLD);
        assert_eq!(report.order.len(), 5);
        assert!(report.optimal);
    }

    fn arb_cost(n: usize) -> impl Strategy<Value = SquareMatrix<f64>> {
        proptest::collection::vec(0.1f64..100.0, n * n).prop_map(move |vals| {
            SquareMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { vals[i * n + j] })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]

        #[test]
        fn exact_tour_matches_oracle_on_random_instances(
            (n, cost) in (2usize..=7).prop_flat_map(|n| (Just(n), arb_cost(n)))
        ) {
            let _ = n;
            let start = 0;
            let report = solve_tour(&TourInstance { cost: cost.clone(), start }, DEFAULT_EXACT_THRESHOLD);
            let (_, oracle_obj) = oracle::best_tour(&cost, start);
            prop_assert!((report.objective - oracle_obj).abs() < 1e-9);
            prop_assert!((report.objective - tour_objective(&cost, &report.order)).abs() < 1e-9);
        }

        #[test]
        fn exact_path_matches_oracle_on_random_instances(
            (n, cost, fixed) in (2usize..=7)
                .prop_flat_map(|n| (Just(n), arb_cost(n), proptest::bool::ANY))
        ) {
            let start = 0;
            let end = if fixed { Some(n - 1) } else { None };
            let report = solve_path(&PathInstance { cost: cost.clone(), start, end }, DEFAULT_EXACT_THRESHOLD).unwrap();
            let (_, oracle_obj) = oracle::best_path(&cost, start, end);
            prop_assert!((report.objective - oracle_obj).abs() < 1e-9);
            prop_assert!((report.objective - path_objective(&cost, &report.order)).abs() < 1e-9);
        }

        #[test]
        fn heuristic_tier_returns_valid_tours(
            (n, cost) in (4usize..=10).prop_flat_map(|n| (Just(n), arb_cost(n)))
        ) {
            let report = solve_tour(&TourInstance { cost: cost.clone(), start: 0 }, 0);
            prop_assert_eq!(report.order[0], 0);
            let mut sorted = report.order.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            let exact = solve_tour(&TourInstance { cost, start: 0 }, DEFAULT_EXACT_THRESHOLD);
            prop_assert!(report.objective >= exact.objective - 1e-9);
        }
    }
}
