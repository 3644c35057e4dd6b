//! The full prediction pipeline: a global tour fixes the zone sequence,
//! then a chain of open paths orders the stops inside each zone.
//!
//! Every per-zone path starts at the last kept stop of the previous zone
//! (the station for the first) and is steered by a lookahead node: the next
//! zone's center-nearest stop, or the station for the final zone. The
//! lookahead is pinned as the path's terminal and dropped afterwards, so
//! only the zone's own stops are kept.

use serde::Serialize;

use crate::cost::{
    self, cost_matrix, zone_centers, zone_distance_matrix, zone_travel_time_matrix, CostError,
    MetricChoice, TransitionMatrix, WeightConfig, ZoneGeometry,
};
use crate::domain::{planar_distance, Route, StopId, ZoneId};
use crate::matrix::SquareMatrix;
use crate::tsp::{
    solve_path, solve_tour, tour_objective, PathInstance, SolveReport, TourInstance, TspError,
    DEFAULT_EXACT_THRESHOLD,
};
use crate::zones::{to_zone_sequence, ZoneError, ZoneSequence};
use crate::Float;

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error("route {route_id} is served by {route_station}, model learned for {model_station}")]
    StationMismatch {
        route_id: String,
        route_station: String,
        model_station: String,
    },
    #[error("zone {zone} has no stops on route {route_id}")]
    EmptyZone { route_id: String, zone: ZoneId },
    #[error("zone sequence does not cover route {route_id}'s zones exactly")]
    ZoneMismatch { route_id: String },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Tsp(#[from] TspError),
    #[error(transparent)]
    Zone(#[from] ZoneError),
}

/// Knobs of the prediction pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictorConfig {
    /// Instance size up to which tours and paths are solved exactly.
    pub exact_threshold: usize,
    /// Cost backend of the within-zone paths. Travel time is the default;
    /// planar distance is available for comparison.
    pub local_metric: MetricChoice,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            exact_threshold: DEFAULT_EXACT_THRESHOLD,
            local_metric: MetricChoice::TravelTime,
        }
    }
}

/// Solver evidence retained with a prediction.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SolverTrace {
    pub global: Option<SolveReport<Float>>,
    pub per_zone: Vec<(ZoneId, SolveReport<Float>)>,
}

/// A full stop-order prediction plus its zone-level projection.
#[derive(Debug, Clone, Serialize)]
pub struct PredictedSequence {
    pub route_id: String,
    pub stop_order: Vec<StopId>,
    pub zone_order: ZoneSequence,
    pub trace: SolverTrace,
}

/// Predicts the order in which a route will traverse its zones: builds the
/// blended cost matrix over `{station} ∪ zones` and solves the closed tour
/// anchored at the station.
///
/// The tour direction is normalized deterministically: the cheaper directed
/// reading wins; on an exact cost tie the direction whose first zone is
/// closer to the station is taken, so symmetric instances read outward from
/// the station.
pub fn predict_zone_sequence(
    route: &Route,
    model: &TransitionMatrix,
    weights: &WeightConfig,
    config: &PredictorConfig,
) -> Result<(ZoneSequence, SolveReport<Float>), PredictError> {
    if model.station() != route.station() {
        return Err(PredictError::StationMismatch {
            route_id: route.route_id().to_owned(),
            route_station: route.station().to_string(),
            model_station: model.station().to_string(),
        });
    }
    let geometry = zone_centers(route);
    let (index, dist) = match weights.metric {
        MetricChoice::Euclidean => {
            let dm = zone_distance_matrix(&geometry);
            (dm.index, dm.values)
        }
        MetricChoice::TravelTime => {
            let tm = zone_travel_time_matrix(route, &geometry);
            (tm.index, tm.values)
        }
    };
    let cost = cost_matrix(model, &dist, weights, &index)?;
    let mut report = solve_tour(
        &TourInstance {
            cost: cost.values.clone(),
            start: 0,
        },
        config.exact_threshold,
    );

    if report.order.len() > 2 {
        let mut reversed = vec![0];
        reversed.extend(report.order[1..].iter().rev().copied());
        let reversed_cost = tour_objective(&cost.values, &reversed);
        let tol = 1e-12;
        let take_reversed = reversed_cost + tol < report.objective
            || ((reversed_cost - report.objective).abs() <= tol
                && cost.values.get(0, reversed[1]) + tol < cost.values.get(0, report.order[1]));
        if take_reversed {
            report.objective = reversed_cost;
            report.order = reversed;
        }
    }

    let zones = report.order[1..]
        .iter()
        .map(|&i| match index.node(i) {
            cost::ZoneNode::Zone(z) => z.clone(),
            cost::ZoneNode::Station => unreachable!("tour anchored at the station"),
        })
        .collect();
    Ok((
        ZoneSequence {
            station: route.station().clone(),
            zones,
        },
        report,
    ))
}

/// The stop of `zone` nearest to the zone's center, ties to the smallest
/// stop id.
pub fn select_entry_stop(
    zone: &ZoneId,
    route: &Route,
    geometry: &ZoneGeometry,
) -> Result<StopId, PredictError> {
    let center = geometry.center(zone);
    route
        .stops_of_zone(zone)
        .min_by(|a, b| {
            let da = planar_distance(a.location, center, geometry.ref_lat_rad);
            let db = planar_distance(b.location, center, geometry.ref_lat_rad);
            da.partial_cmp(&db)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.id.cmp(&b.id))
        })
        .map(|stop| stop.id.clone())
        .ok_or_else(|| PredictError::EmptyZone {
            route_id: route.route_id().to_owned(),
            zone: zone.clone(),
        })
}

fn local_cost(route: &Route, ids: &[StopId], metric: MetricChoice) -> SquareMatrix<Float> {
    match metric {
        MetricChoice::TravelTime => {
            SquareMatrix::from_fn(ids.len(), |i, j| route.travel_time(&ids[i], &ids[j]))
        }
        MetricChoice::Euclidean => cost::stop_distance_matrix(route, ids),
    }
}

/// Orders the stops of every zone along a given zone sequence.
///
/// Zone `k`'s path runs from the previous kept endpoint to the lookahead
/// (next zone's entry stop, or the station after the last zone); a route
/// with a single zone closes the loop at the station instead, which makes
/// the path a station-anchored tour.
pub fn predict_stop_sequence(
    route: &Route,
    zone_seq: &ZoneSequence,
    config: &PredictorConfig,
) -> Result<PredictedSequence, PredictError> {
    let route_zones = route.zone_set();
    let seq_zones: std::collections::BTreeSet<&ZoneId> = zone_seq.zones.iter().collect();
    if route_zones != seq_zones || zone_seq.zones.len() != route_zones.len() {
        return Err(PredictError::ZoneMismatch {
            route_id: route.route_id().to_owned(),
        });
    }

    let geometry = zone_centers(route);
    let station_id = route.station_stop().id.clone();
    let mut stop_order = vec![station_id.clone()];
    let mut per_zone = Vec::with_capacity(zone_seq.zones.len());
    let total = zone_seq.zones.len();

    for (k, zone) in zone_seq.zones.iter().enumerate() {
        let mut zone_stops: Vec<StopId> = route.stops_of_zone(zone).map(|s| s.id.clone()).collect();
        if zone_stops.is_empty() {
            return Err(PredictError::EmptyZone {
                route_id: route.route_id().to_owned(),
                zone: zone.clone(),
            });
        }
        zone_stops.sort();
        let prev = stop_order
            .last()
            .expect("sequence starts at the station")
            .clone();

        let (kept, report) = if total == 1 {
            // Start and lookahead would both be the station: solve the
            // closed loop through the zone instead.
            let mut ids = vec![prev.clone()];
            ids.extend(zone_stops.iter().cloned());
            let cost = local_cost(route, &ids, config.local_metric);
            let report = solve_tour(&TourInstance { cost, start: 0 }, config.exact_threshold);
            let kept: Vec<StopId> = report.order[1..].iter().map(|&i| ids[i].clone()).collect();
            (kept, report)
        } else {
            let lookahead = if k + 1 < total {
                select_entry_stop(&zone_seq.zones[k + 1], route, &geometry)?
            } else {
                station_id.clone()
            };
            let mut ids = vec![prev.clone()];
            ids.extend(zone_stops.iter().cloned());
            ids.push(lookahead);
            let cost = local_cost(route, &ids, config.local_metric);
            let report = solve_path(
                &PathInstance {
                    cost,
                    start: 0,
                    end: Some(ids.len() - 1),
                },
                config.exact_threshold,
            )?;
            // Drop the fixed start (already emitted) and the lookahead.
            let kept: Vec<StopId> = report.order[1..report.order.len() - 1]
                .iter()
                .map(|&i| ids[i].clone())
                .collect();
            (kept, report)
        };
        debug_assert_eq!(kept.len(), zone_stops.len());
        stop_order.extend(kept);
        per_zone.push((zone.clone(), report));
    }

    debug_assert_eq!(stop_order.len(), route.stops().len());
    Ok(PredictedSequence {
        route_id: route.route_id().to_owned(),
        stop_order,
        zone_order: zone_seq.clone(),
        trace: SolverTrace {
            global: None,
            per_zone,
        },
    })
}

/// End-to-end prediction: the global zone tour followed by the per-zone
/// path chain.
pub fn predict(
    route: &Route,
    model: &TransitionMatrix,
    weights: &WeightConfig,
    config: &PredictorConfig,
) -> Result<PredictedSequence, PredictError> {
    let (zone_seq, global) = predict_zone_sequence(route, model, weights, config)?;
    let mut predicted = predict_stop_sequence(route, &zone_seq, config)?;
    predicted.trace.global = Some(global);
    if cfg!(debug_assertions) {
        let zones: Vec<ZoneId> = predicted
            .stop_order
            .iter()
            .filter_map(|id| route.stop(id).and_then(|s| s.zone.clone()))
            .collect();
        let reduced = to_zone_sequence(route.station(), &zones).expect("non-empty prediction");
        debug_assert_eq!(reduced.zones, predicted.zone_order.zones);
    }
    Ok(predicted)
}
