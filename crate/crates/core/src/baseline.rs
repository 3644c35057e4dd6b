//! Reference predictors: the stop-level nearest-neighbor chain and the
//! travel-time-minimal tour over all stops.

use crate::domain::{Route, StopId};
use crate::predict::{PredictError, PredictedSequence, SolverTrace};
use crate::tsp::{solve_tour, tour_objective, SolveReport, TourInstance};
use crate::zones::{to_zone_sequence, ZoneSequence};
use crate::Float;

fn zone_projection(route: &Route, order: &[StopId]) -> Result<ZoneSequence, PredictError> {
    let zones = crate::zones::stop_zones_in_order(route, order)?;
    Ok(to_zone_sequence(route.station(), &zones)?)
}

/// Greedily chains each stop to the nearest unvisited one by travel time,
/// starting from the station. Ties break to the smallest stop id.
pub fn nearest_neighbor(route: &Route) -> Result<PredictedSequence, PredictError> {
    let station = route.station_stop().id.clone();
    let mut remaining: Vec<StopId> = route.delivery_stops().map(|s| s.id.clone()).collect();
    remaining.sort();
    let mut order = vec![station];
    while !remaining.is_empty() {
        let here = order.last().expect("order non-empty").clone();
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .min_by(|a, b| {
                route
                    .travel_time(&here, a.1)
                    .partial_cmp(&route.travel_time(&here, b.1))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| a.1.cmp(b.1))
            })
            .expect("remaining non-empty");
        order.push(remaining.remove(pos));
    }
    Ok(PredictedSequence {
        route_id: route.route_id().to_owned(),
        zone_order: zone_projection(route, &order)?,
        stop_order: order,
        trace: SolverTrace::default(),
    })
}

/// Minimizes the closed travel-time tour over all stops, cuts it at the
/// station, and reads it in the direction of lower directed cost (ties to
/// the lexicographically smaller stop sequence).
pub fn full_tsp(route: &Route, exact_threshold: usize) -> Result<PredictedSequence, PredictError> {
    let ids: Vec<StopId> = route.stops().iter().map(|s| s.id.clone()).collect();
    let station_index = route
        .stops()
        .iter()
        .position(|s| s.is_station)
        .expect("route has a station stop");
    let cost =
        crate::matrix::SquareMatrix::from_fn(ids.len(), |i, j| route.travel_time(&ids[i], &ids[j]));
    let report: SolveReport<Float> = solve_tour(
        &TourInstance {
            cost: cost.clone(),
            start: station_index,
        },
        exact_threshold,
    );

    let forward = report.order.clone();
    let mut order = forward.clone();
    if forward.len() > 2 {
        let mut reversed = vec![forward[0]];
        reversed.extend(forward[1..].iter().rev().copied());
        let fwd_cost = tour_objective(&cost, &forward);
        let rev_cost = tour_objective(&cost, &reversed);
        let tol = 1e-12;
        let pick_reversed = if rev_cost + tol < fwd_cost {
            true
        } else if (rev_cost - fwd_cost).abs() <= tol {
            let rev_ids: Vec<&StopId> = reversed.iter().map(|&i| &ids[i]).collect();
            let fwd_ids: Vec<&StopId> = forward.iter().map(|&i| &ids[i]).collect();
            rev_ids < fwd_ids
        } else {
            false
        };
        if pick_reversed {
            order = reversed;
        }
    }

    let stop_order: Vec<StopId> = order.into_iter().map(|i| ids[i].clone()).collect();
    Ok(PredictedSequence {
        route_id: route.route_id().to_owned(),
        zone_order: zone_projection(route, &stop_order)?,
        stop_order,
        trace: SolverTrace {
            global: Some(report),
            per_zone: Vec::new(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::testutil::route_from_parts;
    use crate::tsp::oracle;

    #[test]
    fn two_stop_route_has_one_order() {
        let route = route_from_parts(
            "r1",
            "st",
            &[("s", 0.0, 0.0, None), ("a", 0.0, 1e-3, Some("A"))],
            vec![vec![0.0, 5.0], vec![5.0, 0.0]],
            None,
        );
        let nn = nearest_neighbor(&route).unwrap();
        assert_eq!(nn.stop_order, vec![StopId::from("s"), StopId::from("a")]);
        let tsp = full_tsp(&route, 16).unwrap();
        assert_eq!(tsp.stop_order, nn.stop_order);
    }

    #[test]
    fn greedy_chain_matches_step_simulation() {
        // Star-ish asymmetric instance where the greedy chain is forced:
        // from s the cheapest is b, from b it is c, from c it is a.
        let route = route_from_parts(
            "r1",
            "st",
            &[
                ("s", 0.0, 0.0, None),
                ("a", 0.0, 1e-3, Some("A")),
                ("b", 0.0, 2e-3, Some("B")),
                ("c", 0.0, 3e-3, Some("C")),
            ],
            vec![
                vec![0.0, 9.0, 1.0, 8.0],
                vec![9.0, 0.0, 7.0, 6.0],
                vec![5.0, 4.0, 0.0, 2.0],
                vec![8.0, 3.0, 7.0, 0.0],
            ],
            None,
        );
        let nn = nearest_neighbor(&route).unwrap();
        let expected: Vec<StopId> = ["s", "b", "c", "a"].iter().map(|&x| x.into()).collect();
        assert_eq!(nn.stop_order, expected);
    }

    #[test]
    fn greedy_tie_breaks_lexicographically() {
        let route = route_from_parts(
            "r1",
            "st",
            &[
                ("s", 0.0, 0.0, None),
                ("b", 0.0, 1e-3, Some("B")),
                ("a", 0.0, 2e-3, Some("A")),
            ],
            vec![
                vec![0.0, 4.0, 4.0],
                vec![4.0, 0.0, 1.0],
                vec![4.0, 1.0, 0.0],
            ],
            None,
        );
        let nn = nearest_neighbor(&route).unwrap();
        let expected: Vec<StopId> = ["s", "a", "b"].iter().map(|&x| x.into()).collect();
        assert_eq!(nn.stop_order, expected);
    }

    #[test]
    fn full_tsp_matches_brute_force_objective() {
        let route = route_from_parts(
            "r1",
            "st",
            &[
                ("s", 0.0, 0.0, None),
                ("a", 0.0, 1e-3, Some("A")),
                ("b", 0.0, 2e-3, Some("B")),
                ("c", 0.0, 3e-3, Some("C")),
            ],
            vec![
                vec![0.0, 2.0, 9.0, 10.0],
                vec![1.0, 0.0, 6.0, 4.0],
                vec![15.0, 7.0, 0.0, 8.0],
                vec![6.0, 3.0, 12.0, 0.0],
            ],
            None,
        );
        let pred = full_tsp(&route, 16).unwrap();
        let cost = crate::matrix::SquareMatrix::from_fn(4, |i, j| {
            route.travel_time(&route.stops()[i].id.clone(), &route.stops()[j].id.clone())
        });
        let (_, oracle_obj) = oracle::best_tour(&cost, 0);
        let indices: Vec<usize> = pred
            .stop_order
            .iter()
            .map(|id| route.stop_index(id).unwrap())
            .collect();
        let realized = crate::tsp::tour_objective(&cost, &indices);
        assert!((realized - oracle_obj).abs() < 1e-9);
        assert_eq!(pred.stop_order[0], StopId::from("s"));
    }

    #[test]
    fn symmetric_tie_picks_lexicographically_smaller_direction() {
        // Symmetric matrix: both tour directions cost the same, so the
        // direction rule must pick the lexicographically smaller sequence.
        let route = route_from_parts(
            "r1",
            "st",
            &[
                ("s", 0.0, 0.0, None),
                ("a", 0.0, 1e-3, Some("A")),
                ("b", 0.0, 2e-3, Some("B")),
                ("c", 0.0, 3e-3, Some("C")),
            ],
            vec![
                vec![0.0, 1.0, 2.0, 1.0],
                vec![1.0, 0.0, 1.0, 2.0],
                vec![2.0, 1.0, 0.0, 1.0],
                vec![1.0, 2.0, 1.0, 0.0],
            ],
            None,
        );
        let pred = full_tsp(&route, 16).unwrap();
        let reversed: Vec<StopId> = {
            let mut r = vec![pred.stop_order[0].clone()];
            r.extend(pred.stop_order[1..].iter().rev().cloned());
            r
        };
        assert!(pred.stop_order <= reversed);
    }

    #[test]
    fn exact_full_tsp_never_loses_to_nearest_neighbor() {
        // Random-ish instances; the exact tour objective is a lower bound.
        for seed in 0..10u64 {
            let n = 6;
            let vals: Vec<f64> = (0..n * n)
                .map(|k| (((seed * 97 + k as u64 * 31) % 89) as f64) + 1.0)
                .collect();
            let stops: Vec<(String, f64, f64, Option<&str>)> = (0..n)
                .map(|i| {
                    (
                        if i == 0 {
                            "s".to_owned()
                        } else {
                            format!("p{i}")
                        },
                        0.0,
                        i as f64 * 1e-3,
                        if i == 0 { None } else { Some("Z") },
                    )
                })
                .collect();
            let stop_refs: Vec<(&str, f64, f64, Option<&str>)> = stops
                .iter()
                .map(|s| (s.0.as_str(), s.1, s.2, s.3))
                .collect();
            let times: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| if i == j { 0.0 } else { vals[i * n + j] })
                        .collect()
                })
                .collect();
            let route = route_from_parts("r", "st", &stop_refs, times, None);
            let nn = nearest_neighbor(&route).unwrap();
            let tsp = full_tsp(&route, 16).unwrap();
            let closed = |order: &[StopId]| -> f64 {
                let mut total = route.realized_travel_time(order);
                total += route.travel_time(order.last().unwrap(), &order[0]);
                total
            };
            assert!(closed(&tsp.stop_order) <= closed(&nn.stop_order) + 1e-9);
        }
    }
}
