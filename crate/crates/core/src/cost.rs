//! Transition, distance, travel-time, and blended cost matrices for
//! zone-sequence prediction.
//!
//! The blended cost of moving from node `i` to node `j` is
//! `C_ij = w_ij * D_ij + (1 - w_ij) * (1 - P_ij)` with a zero diagonal,
//! where `D` is a max-normalized distance or travel-time matrix over the
//! route's zones, `P` the learned transition probabilities, and `w` either
//! a single weight or separate weights for the station-to-zone row, the
//! zone-to-station column, and the zone-to-zone block.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{planar_distance, project, GeoPoint, Route, StopId, ZoneId};
use crate::matrix::SquareMatrix;
use crate::scalar::Scalar;
use crate::zones::CountMatrix;
use crate::Float;

#[derive(Debug, thiserror::Error)]
pub enum CostError {
    #[error("weight {name} = {value} outside [0, 1]")]
    WeightOutOfRange { name: &'static str, value: Float },
    #[error("matrix over {expected} nodes, got {actual}")]
    IndexMismatch { expected: usize, actual: usize },
}

/// Row-normalized transition probabilities over one station's zones.
/// Shares the count matrix's index: 0 is the station, `1..` the zones.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    station: crate::domain::StationId,
    zones: Vec<ZoneId>,
    probs: SquareMatrix<Float>,
}

/// A node of the zone-level problem: the station or one zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoneNode<'a> {
    Station,
    Zone(&'a ZoneId),
}

impl TransitionMatrix {
    pub fn station(&self) -> &crate::domain::StationId {
        &self.station
    }

    pub fn zones(&self) -> &[ZoneId] {
        &self.zones
    }

    pub fn probs(&self) -> &SquareMatrix<Float> {
        &self.probs
    }

    /// Transition probability between two nodes. Zones never seen during
    /// learning fall back to probability 0, so their cost contribution is
    /// maximal unfamiliarity and prediction leans on distance.
    pub fn prob(&self, from: ZoneNode<'_>, to: ZoneNode<'_>) -> Float {
        let index = |node: ZoneNode<'_>| match node {
            ZoneNode::Station => Some(0),
            ZoneNode::Zone(z) => self.zones.binary_search(z).ok().map(|i| i + 1),
        };
        match (index(from), index(to)) {
            (Some(i), Some(j)) => self.probs.get(i, j),
            _ => 0.0,
        }
    }
}

/// Row-normalizes a count matrix; all-zero rows stay all zeros.
pub fn to_transition_matrix(counts: &CountMatrix) -> TransitionMatrix {
    let n = counts.len();
    let mut probs = SquareMatrix::zeros(n);
    for i in 0..n {
        let row_sum: u64 = counts.counts().row(i).iter().sum();
        if row_sum == 0 {
            continue;
        }
        for j in 0..n {
            probs.set(i, j, counts.counts().get(i, j) as Float / row_sum as Float);
        }
    }
    TransitionMatrix {
        station: counts.station().clone(),
        zones: counts.zones().to_vec(),
        probs,
    }
}

/// Zone centers and the station location for one route.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneGeometry {
    pub centers: BTreeMap<ZoneId, GeoPoint>,
    pub station_location: GeoPoint,
    /// Projection reference latitude (radians) shared by all planar math
    /// on this route.
    pub ref_lat_rad: f64,
}

impl ZoneGeometry {
    pub fn center(&self, zone: &ZoneId) -> GeoPoint {
        *self.centers.get(zone).expect("zone belongs to the route")
    }
}

/// Per-route zone centers: the arithmetic mean of each zone's stop
/// coordinates, plus the station's own location.
pub fn zone_centers(route: &Route) -> ZoneGeometry {
    let mut sums: BTreeMap<ZoneId, (f64, f64, usize)> = BTreeMap::new();
    for stop in route.delivery_stops() {
        if let Some(zone) = &stop.zone {
            let entry = sums.entry(zone.clone()).or_insert((0.0, 0.0, 0));
            entry.0 += stop.location.lat;
            entry.1 += stop.location.lng;
            entry.2 += 1;
        }
    }
    let centers: BTreeMap<ZoneId, GeoPoint> = sums
        .into_iter()
        .map(|(zone, (lat, lng, k))| (zone, GeoPoint::new(lat / k as f64, lng / k as f64)))
        .collect();
    let station_location = route.station_stop().location;
    let mean_lat = centers
        .values()
        .map(|p| p.lat)
        .chain(std::iter::once(station_location.lat))
        .sum::<f64>()
        / (centers.len() + 1) as f64;
    ZoneGeometry {
        centers,
        station_location,
        ref_lat_rad: mean_lat.to_radians(),
    }
}

/// Index over `{station} ∪ route zones`: 0 is the station, `1..` the zones
/// in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteZoneIndex {
    zones: Vec<ZoneId>,
}

#[allow(clippy::len_without_is_empty)] // never empty: the station is always present
impl RouteZoneIndex {
    pub fn from_geometry(geometry: &ZoneGeometry) -> Self {
        Self {
            zones: geometry.centers.keys().cloned().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.zones.len() + 1
    }

    pub fn zones(&self) -> &[ZoneId] {
        &self.zones
    }

    pub fn node(&self, i: usize) -> ZoneNode<'_> {
        if i == 0 {
            ZoneNode::Station
        } else {
            ZoneNode::Zone(&self.zones[i - 1])
        }
    }

    pub fn location(&self, i: usize, geometry: &ZoneGeometry) -> GeoPoint {
        match self.node(i) {
            ZoneNode::Station => geometry.station_location,
            ZoneNode::Zone(z) => geometry.center(z),
        }
    }
}

/// Max-normalized pairwise distances over `{station} ∪ route zones`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneDistanceMatrix {
    pub index: RouteZoneIndex,
    pub values: SquareMatrix<Float>,
    /// All points coincide; the matrix is all zeros.
    pub degenerate: bool,
}

/// Euclidean distances between zone centers (and the station) on the
/// projected plane, divided by the largest entry.
pub fn zone_distance_matrix(geometry: &ZoneGeometry) -> ZoneDistanceMatrix {
    let index = RouteZoneIndex::from_geometry(geometry);
    let n = index.len();
    let raw = SquareMatrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            planar_distance(
                index.location(i, geometry),
                index.location(j, geometry),
                geometry.ref_lat_rad,
            )
        }
    });
    let max = raw.max_entry();
    if max <= 0.0 {
        return ZoneDistanceMatrix {
            index,
            values: raw,
            degenerate: true,
        };
    }
    ZoneDistanceMatrix {
        index,
        values: raw.scaled_by_inverse(max),
        degenerate: false,
    }
}

/// Max-normalized travel times between zone representative stops.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneTravelTimeMatrix {
    pub index: RouteZoneIndex,
    pub values: SquareMatrix<Float>,
    /// Representative stop of each zone: the stop closest to the zone
    /// center; the station anchors to the station stop.
    pub anchors: BTreeMap<ZoneId, StopId>,
    pub degenerate: bool,
}

/// Picks each zone's center-nearest stop (ties to the smallest stop id)
/// and normalizes the travel times between those anchor stops.
pub fn zone_travel_time_matrix(route: &Route, geometry: &ZoneGeometry) -> ZoneTravelTimeMatrix {
    let index = RouteZoneIndex::from_geometry(geometry);
    let mut anchors: BTreeMap<ZoneId, StopId> = BTreeMap::new();
    for zone in index.zones() {
        let center = geometry.center(zone);
        let anchor = route
            .stops_of_zone(zone)
            .min_by(|a, b| {
                let da = planar_distance(a.location, center, geometry.ref_lat_rad);
                let db = planar_distance(b.location, center, geometry.ref_lat_rad);
                da.partial_cmp(&db)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| a.id.cmp(&b.id))
            })
            .expect("zone has at least one stop");
        anchors.insert(zone.clone(), anchor.id.clone());
    }

    let station_id = route.station_stop().id.clone();
    let anchor_id = |i: usize| -> &StopId {
        match index.node(i) {
            ZoneNode::Station => &station_id,
            ZoneNode::Zone(z) => &anchors[z],
        }
    };
    let n = index.len();
    let raw = SquareMatrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            route.travel_time(anchor_id(i), anchor_id(j))
        }
    });
    let max = raw.max_entry();
    let degenerate = max <= 0.0;
    let values = if degenerate {
        raw
    } else {
        raw.scaled_by_inverse(max)
    };
    ZoneTravelTimeMatrix {
        index,
        values,
        anchors,
        degenerate,
    }
}

/// Which inter-zone "distance" feeds the cost blend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricChoice {
    Euclidean,
    TravelTime,
}

/// The blend weights: one scalar, or separate station-row / zone-block /
/// station-column weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weights {
    Scalar {
        omega: Float,
    },
    Structured {
        omega_f: Float,
        omega_z: Float,
        omega_l: Float,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub weights: Weights,
    pub metric: MetricChoice,
}

impl WeightConfig {
    pub fn scalar(omega: Float, metric: MetricChoice) -> Result<Self, CostError> {
        check_weight("omega", omega)?;
        Ok(Self {
            weights: Weights::Scalar { omega },
            metric,
        })
    }

    pub fn structured(
        omega_f: Float,
        omega_z: Float,
        omega_l: Float,
        metric: MetricChoice,
    ) -> Result<Self, CostError> {
        check_weight("omega_f", omega_f)?;
        check_weight("omega_z", omega_z)?;
        check_weight("omega_l", omega_l)?;
        Ok(Self {
            weights: Weights::Structured {
                omega_f,
                omega_z,
                omega_l,
            },
            metric,
        })
    }

    /// Weight applied at entry (i, j) of the zone cost matrix.
    pub fn weight_at(&self, i: usize, j: usize) -> Float {
        match self.weights {
            Weights::Scalar { omega } => omega,
            Weights::Structured {
                omega_f,
                omega_z,
                omega_l,
            } => {
                if i == 0 {
                    omega_f
                } else if j == 0 {
                    omega_l
                } else {
                    omega_z
                }
            }
        }
    }
}

fn check_weight(name: &'static str, value: Float) -> Result<(), CostError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(CostError::WeightOutOfRange { name, value })
    }
}

/// The blended zone-level objective minimized by the global tour.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub index: RouteZoneIndex,
    pub values: SquareMatrix<Float>,
}

/// Blends a normalized distance backend with the transition probabilities.
///
/// The backend matrix must be indexed by `index`; the transition matrix may
/// cover a superset or miss zones entirely (missing zones contribute
/// probability 0). The diagonal is forced to zero.
pub fn cost_matrix(
    transitions: &TransitionMatrix,
    dist: &SquareMatrix<Float>,
    weights: &WeightConfig,
    index: &RouteZoneIndex,
) -> Result<CostMatrix, CostError> {
    if dist.n() != index.len() {
        return Err(CostError::IndexMismatch {
            expected: index.len(),
            actual: dist.n(),
        });
    }
    let n = index.len();
    let values = SquareMatrix::from_fn(n, |i, j| {
        if i == j {
            return 0.0;
        }
        let w = weights.weight_at(i, j);
        let p = transitions.prob(index.node(i), index.node(j));
        w * dist.get(i, j) + (1.0 - w) * (1.0 - p)
    });
    Ok(CostMatrix {
        index: index.clone(),
        values,
    })
}

/// Generic blend of one entry, usable with any scalar width.
pub fn blend_entry<S: Scalar>(weight: S, dist: S, prob: S) -> S {
    weight * dist + (S::one() - weight) * (S::one() - prob)
}

/// Planar distance matrix between arbitrary stops of a route, used when the
/// within-zone solver runs on Euclidean distances instead of travel times.
pub fn stop_distance_matrix(route: &Route, stop_ids: &[StopId]) -> SquareMatrix<Float> {
    let pts: Vec<GeoPoint> = stop_ids
        .iter()
        .map(|id| route.stop(id).expect("stop belongs to route").location)
        .collect();
    let ref_lat = pts.iter().map(|p| p.lat).sum::<f64>() / pts.len().max(1) as f64;
    let ref_lat_rad = ref_lat.to_radians();
    let projected: Vec<(f64, f64)> = pts.iter().map(|&p| project(p, ref_lat_rad)).collect();
    SquareMatrix::from_fn(stop_ids.len(), |i, j| {
        let (xi, yi) = projected[i];
        let (xj, yj) = projected[j];
        ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::testutil::route_from_parts;
    use crate::domain::StationId;
    use crate::zones::accumulate_counts;
    use approx::assert_relative_eq;

    fn learned_transitions() -> TransitionMatrix {
        // Three routes: (A,B) twice and (B,A) once.
        let mk = |id: &str, order: [&str; 2]| {
            route_from_parts(
                id,
                "st",
                &[
                    ("s", 0.0, 0.0, None),
                    ("a", 0.0, 0.001, Some("A")),
                    ("b", 0.0, 0.002, Some("B")),
                ],
                vec![
                    vec![0.0, 1.0, 2.0],
                    vec![1.0, 0.0, 1.0],
                    vec![2.0, 1.0, 0.0],
                ],
                Some(&["s", order[0], order[1]]),
            )
        };
        let r1 = mk("r1", ["a", "b"]);
        let r2 = mk("r2", ["a", "b"]);
        let r3 = mk("r3", ["b", "a"]);
        let station = StationId::from("st");
        to_transition_matrix(&accumulate_counts(&station, [&r1, &r2, &r3]).unwrap())
    }

    #[test]
    fn rows_normalize_and_zero_rows_stay_zero() {
        let tm = learned_transitions();
        // Station row: s->A twice, s->B once.
        assert_relative_eq!(tm.probs().get(0, 1), 2.0 / 3.0);
        assert_relative_eq!(tm.probs().get(0, 2), 1.0 / 3.0);
        for i in 0..tm.probs().n() {
            let sum: Float = tm.probs().row(i).iter().sum();
            assert!(
                sum == 0.0 || (sum - 1.0).abs() < 1e-12,
                "row {i} sums to {sum}"
            );
        }
    }

    #[test]
    fn unknown_zone_probability_is_zero() {
        let tm = learned_transitions();
        let unknown = ZoneId::from("ZZ");
        assert_eq!(tm.prob(ZoneNode::Station, ZoneNode::Zone(&unknown)), 0.0);
        assert_eq!(tm.prob(ZoneNode::Zone(&unknown), ZoneNode::Station), 0.0);
    }

    fn geometry_route() -> Route {
        route_from_parts(
            "r1",
            "st",
            &[
                ("s", 0.0, 0.0, None),
                ("a1", 0.0, 0.0, Some("A")),
                ("a2", 2.0e-3, 2.0e-3, Some("A")),
                ("b1", 4.0e-3, 4.0e-3, Some("B")),
            ],
            vec![
                vec![0.0, 1.0, 2.0, 3.0],
                vec![1.0, 0.0, 1.0, 2.0],
                vec![2.0, 1.0, 0.0, 1.0],
                vec![3.0, 2.0, 1.0, 0.0],
            ],
            None,
        )
    }

    #[test]
    fn centers_are_stop_means() {
        let geometry = zone_centers(&geometry_route());
        let a = geometry.center(&ZoneId::from("A"));
        assert_relative_eq!(a.lat, 1.0e-3);
        assert_relative_eq!(a.lng, 1.0e-3);
        let b = geometry.center(&ZoneId::from("B"));
        assert_relative_eq!(b.lat, 4.0e-3);
    }

    #[test]
    fn distance_matrix_normalizes_onto_unit_max() {
        let geometry = zone_centers(&geometry_route());
        let dm = zone_distance_matrix(&geometry);
        assert!(!dm.degenerate);
        assert_relative_eq!(dm.values.max_entry(), 1.0);
        // Direct computation oracle for one entry.
        let d_sa = planar_distance(
            geometry.station_location,
            geometry.center(&ZoneId::from("A")),
            geometry.ref_lat_rad,
        );
        let d_sb = planar_distance(
            geometry.station_location,
            geometry.center(&ZoneId::from("B")),
            geometry.ref_lat_rad,
        );
        assert_relative_eq!(dm.values.get(0, 1), d_sa / d_sb, epsilon = 1e-12);
        assert_relative_eq!(dm.values.get(0, 2), 1.0);
        for i in 0..dm.values.n() {
            assert_eq!(dm.values.get(i, i), 0.0);
        }
    }

    #[test]
    fn collinear_equally_spaced_centers_normalize_to_halves() {
        // Three collinear, equally spaced points: normalized distances are
        // {0, 0.5, 1}, checked against a direct distance oracle.
        let route = route_from_parts(
            "r1",
            "st",
            &[
                ("s", 0.0, 0.0, None),
                ("a", 1.0e-3, 0.0, Some("A")),
                ("b", 2.0e-3, 0.0, Some("B")),
            ],
            vec![
                vec![0.0, 1.0, 2.0],
                vec![1.0, 0.0, 1.0],
                vec![2.0, 1.0, 0.0],
            ],
            None,
        );
        let dm = zone_distance_matrix(&zone_centers(&route));
        assert_relative_eq!(dm.values.get(0, 1), 0.5, epsilon = 1e-12);
        assert_relative_eq!(dm.values.get(1, 2), 0.5, epsilon = 1e-12);
        assert_relative_eq!(dm.values.get(0, 2), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_zone_distance_matrix_has_unit_off_diagonals() {
        let route = route_from_parts(
            "r1",
            "st",
            &[("s", 0.0, 0.0, None), ("a", 1.0e-3, 0.0, Some("A"))],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            None,
        );
        let dm = zone_distance_matrix(&zone_centers(&route));
        assert_eq!(dm.values.n(), 2);
        assert_relative_eq!(dm.values.get(0, 1), 1.0);
        assert_relative_eq!(dm.values.get(1, 0), 1.0);
    }

    #[test]
    fn coincident_points_flag_degenerate_geometry() {
        let route = route_from_parts(
            "r1",
            "st",
            &[("s", 1.0, 1.0, None), ("a", 1.0, 1.0, Some("A"))],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            None,
        );
        let dm = zone_distance_matrix(&zone_centers(&route));
        assert!(dm.degenerate);
        assert!(dm.values.entries().all(|v| v == 0.0));
    }

    #[test]
    fn travel_time_matrix_uses_center_nearest_anchor() {
        let route = geometry_route();
        let geometry = zone_centers(&route);
        let tm = zone_travel_time_matrix(&route, &geometry);
        // Zone A's center is the midpoint of a1 and a2; the distance tie
        // breaks lexicographically to a1.
        assert_eq!(tm.anchors[&ZoneId::from("A")], StopId::from("a1"));
        assert_eq!(tm.anchors[&ZoneId::from("B")], StopId::from("b1"));
        // Anchor travel times normalize by their max.
        assert_relative_eq!(tm.values.get(0, 1), 1.0 / 3.0);
        assert_relative_eq!(tm.values.get(0, 2), 1.0);
    }

    #[test]
    fn travel_time_matrix_normalization_oracle() {
        // Known anchor times {100, 200, 400} against a direct oracle.
        let route = route_from_parts(
            "r1",
            "st",
            &[
                ("s", 0.0, 0.0, None),
                ("a", 1.0e-3, 0.0, Some("A")),
                ("b", 2.0e-3, 0.0, Some("B")),
                ("c", 3.0e-3, 0.0, Some("C")),
            ],
            vec![
                vec![0.0, 100.0, 200.0, 400.0],
                vec![100.0, 0.0, 100.0, 300.0],
                vec![200.0, 100.0, 0.0, 200.0],
                vec![400.0, 300.0, 200.0, 0.0],
            ],
            None,
        );
        let tm = zone_travel_time_matrix(&route, &zone_centers(&route));
        assert_relative_eq!(tm.values.get(0, 1), 0.25);
        assert_relative_eq!(tm.values.get(0, 2), 0.5);
        assert_relative_eq!(tm.values.get(0, 3), 1.0);
    }

    #[test]
    fn travel_time_matrix_inherits_symmetry() {
        let route = geometry_route();
        let tm = zone_travel_time_matrix(&route, &zone_centers(&route));
        let n = tm.values.n();
        for i in 0..n {
            for j in 0..n {
                assert_relative_eq!(tm.values.get(i, j), tm.values.get(j, i));
            }
        }
    }

    #[test]
    fn cost_blend_matches_direct_evaluation() {
        // w = 0.5, D = 0.4, P = 0.8 -> 0.5*0.4 + 0.5*0.2 = 0.3
        assert_relative_eq!(blend_entry(0.5, 0.4, 0.8), 0.3);
    }

    #[test]
    fn cost_matrix_endpoints() {
        let tm = learned_transitions();
        let route = geometry_route();
        let geometry = zone_centers(&route);
        let dm = zone_distance_matrix(&geometry);
        let index = dm.index.clone();

        let all_dist = WeightConfig::scalar(1.0, MetricChoice::Euclidean).unwrap();
        let c1 = cost_matrix(&tm, &dm.values, &all_dist, &index).unwrap();
        assert_eq!(c1.values, dm.values);

        let all_hist = WeightConfig::scalar(0.0, MetricChoice::Euclidean).unwrap();
        let c0 = cost_matrix(&tm, &dm.values, &all_hist, &index).unwrap();
        for i in 0..index.len() {
            for j in 0..index.len() {
                let expected = if i == j {
                    0.0
                } else {
                    1.0 - tm.prob(index.node(i), index.node(j))
                };
                assert_relative_eq!(c0.values.get(i, j), expected);
            }
        }
    }

    #[test]
    fn structured_weights_select_blocks() {
        let tm = learned_transitions();
        let route = geometry_route();
        let geometry = zone_centers(&route);
        let dm = zone_distance_matrix(&geometry);
        let w = WeightConfig::structured(1.0, 0.0, 0.5, MetricChoice::Euclidean).unwrap();
        let c = cost_matrix(&tm, &dm.values, &w, &dm.index).unwrap();
        // Station row uses omega_f = 1 -> pure distance.
        assert_relative_eq!(c.values.get(0, 2), dm.values.get(0, 2));
        // Zone block uses omega_z = 0 -> pure history.
        let expected = 1.0 - tm.prob(dm.index.node(1), dm.index.node(2));
        assert_relative_eq!(c.values.get(1, 2), expected);
        // Station column uses omega_l = 0.5.
        let p = tm.prob(dm.index.node(1), ZoneNode::Station);
        let expected = 0.5 * dm.values.get(1, 0) + 0.5 * (1.0 - p);
        assert_relative_eq!(c.values.get(1, 0), expected);
    }

    #[test]
    fn structured_equals_scalar_when_uniform() {
        let tm = learned_transitions();
        let route = geometry_route();
        let geometry = zone_centers(&route);
        let dm = zone_distance_matrix(&geometry);
        for omega in [0.0, 0.3, 0.9, 1.0] {
            let scalar = WeightConfig::scalar(omega, MetricChoice::Euclidean).unwrap();
            let structured =
                WeightConfig::structured(omega, omega, omega, MetricChoice::Euclidean).unwrap();
            let cs = cost_matrix(&tm, &dm.values, &scalar, &dm.index).unwrap();
            let cu = cost_matrix(&tm, &dm.values, &structured, &dm.index).unwrap();
            assert_eq!(cs.values, cu.values);
        }
    }

    #[test]
    fn rebuilding_from_the_same_inputs_is_bitwise_identical() {
        let tm = learned_transitions();
        let route = geometry_route();
        let geometry = zone_centers(&route);
        let dm = zone_distance_matrix(&geometry);
        let w = WeightConfig::scalar(0.37, MetricChoice::Euclidean).unwrap();
        let a = cost_matrix(&tm, &dm.values, &w, &dm.index).unwrap();
        let b = cost_matrix(&tm, &dm.values, &w, &dm.index).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn weights_outside_unit_interval_rejected() {
        assert!(WeightConfig::scalar(1.5, MetricChoice::Euclidean).is_err());
        assert!(WeightConfig::structured(0.2, -0.1, 1.0, MetricChoice::TravelTime).is_err());
    }

    #[test]
    fn cost_is_affine_in_omega() {
        let tm = learned_transitions();
        let route = geometry_route();
        let geometry = zone_centers(&route);
        let dm = zone_distance_matrix(&geometry);
        let index = dm.index.clone();
        // At fixed (i,j), C moves affinely from (1-P) toward D as omega
        // grows, hence monotonically.
        let (i, j) = (1, 2);
        let p = tm.prob(index.node(i), index.node(j));
        let d = dm.values.get(i, j);
        let mut prev: Option<Float> = None;
        for k in 0..=10 {
            let omega = k as Float / 10.0;
            let w = WeightConfig::scalar(omega, MetricChoice::Euclidean).unwrap();
            let c = cost_matrix(&tm, &dm.values, &w, &index).unwrap();
            let v = c.values.get(i, j);
            assert_relative_eq!(v, omega * d + (1.0 - omega) * (1.0 - p), epsilon = 1e-12);
            if let Some(prev) = prev {
                if d < 1.0 - p {
                    assert!(v <= prev);
                } else {
                    assert!(v >= prev);
                }
            }
            prev = Some(v);
        }
    }
}
