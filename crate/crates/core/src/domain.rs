//! Core identifiers, geometry, and route representations.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Float, TravelTimeMatrix};

macro_rules! string_id {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Self {
                Self(value.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(value: &str) -> Self {
                Self(value.to_owned())
            }
        }
    };
}

string_id!(
    /// Identifier of a stop, unique within its route.
    StopId
);
string_id!(
    /// Identifier of a zone. Only meaningful within one station's scope.
    ZoneId
);
string_id!(
    /// Identifier of a delivery station.
    StationId
);

/// WGS84 coordinates in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lng: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lng: f64) -> Self {
        Self { lat, lng }
    }

    pub fn in_bounds(&self) -> bool {
        self.lat.is_finite()
            && self.lng.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lng)
    }
}

const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Equirectangular projection around `ref_lat_rad`, in meters.
///
/// Adequate at city scale, where routes live.
pub fn project(p: GeoPoint, ref_lat_rad: f64) -> (f64, f64) {
    let x = EARTH_RADIUS_M * p.lng.to_radians() * ref_lat_rad.cos();
    let y = EARTH_RADIUS_M * p.lat.to_radians();
    (x, y)
}

/// Planar Euclidean distance between two points under [`project`].
pub fn planar_distance(a: GeoPoint, b: GeoPoint, ref_lat_rad: f64) -> f64 {
    let (ax, ay) = project(a, ref_lat_rad);
    let (bx, by) = project(b, ref_lat_rad);
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

/// One stop of a route. The station is a stop with `is_station` set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub id: StopId,
    pub location: GeoPoint,
    pub zone: Option<ZoneId>,
    pub is_station: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum DomainError {
    #[error("route {route_id}: no non-station stop carries a zone id")]
    NoZonedStops { route_id: String },
}

/// A route: one station stop, `n` delivery stops, travel times between all
/// of them, and optionally the realized visiting order.
///
/// Construction is lenient; integrity is checked by [`validate_route`],
/// which reports breaches as data so that ingestion can reject bad routes
/// instead of panicking. Pipeline code assumes validated routes. Values are
/// immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct Route {
    route_id: String,
    station: StationId,
    stops: Vec<Stop>,
    travel_times: TravelTimeMatrix,
    actual_sequence: Option<Vec<StopId>>,
    index: HashMap<StopId, usize>,
}

impl PartialEq for Route {
    fn eq(&self, other: &Self) -> bool {
        self.route_id == other.route_id
            && self.station == other.station
            && self.stops == other.stops
            && self.travel_times == other.travel_times
            && self.actual_sequence == other.actual_sequence
    }
}

impl Route {
    /// Builds a route. The travel-time matrix rows/columns follow `stops`
    /// order. On duplicate stop ids the first occurrence wins the index;
    /// [`validate_route`] reports the duplication.
    pub fn new(
        route_id: impl Into<String>,
        station: StationId,
        stops: Vec<Stop>,
        travel_times: TravelTimeMatrix,
        actual_sequence: Option<Vec<StopId>>,
    ) -> Self {
        let mut index = HashMap::with_capacity(stops.len());
        for (i, stop) in stops.iter().enumerate() {
            index.entry(stop.id.clone()).or_insert(i);
        }
        Self {
            route_id: route_id.into(),
            station,
            stops,
            travel_times,
            actual_sequence,
            index,
        }
    }

    pub fn route_id(&self) -> &str {
        &self.route_id
    }

    pub fn station(&self) -> &StationId {
        &self.station
    }

    pub fn stops(&self) -> &[Stop] {
        &self.stops
    }

    pub fn travel_times(&self) -> &TravelTimeMatrix {
        &self.travel_times
    }

    pub fn actual_sequence(&self) -> Option<&[StopId]> {
        self.actual_sequence.as_deref()
    }

    pub fn stop_index(&self, id: &StopId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn stop(&self, id: &StopId) -> Option<&Stop> {
        self.stop_index(id).map(|i| &self.stops[i])
    }

    /// The unique station stop.
    pub fn station_stop(&self) -> &Stop {
        self.stops
            .iter()
            .find(|s| s.is_station)
            .expect("route has a station stop")
    }

    pub fn delivery_stops(&self) -> impl Iterator<Item = &Stop> {
        self.stops.iter().filter(|s| !s.is_station)
    }

    /// Travel time in seconds between two stops of this route.
    ///
    /// Panics if either id does not belong to the route.
    pub fn travel_time(&self, from: &StopId, to: &StopId) -> Float {
        let i = self.stop_index(from).expect("from stop belongs to route");
        let j = self.stop_index(to).expect("to stop belongs to route");
        self.travel_times.get(i, j)
    }

    /// Sorted set of zones appearing on this route's delivery stops.
    pub fn zone_set(&self) -> BTreeSet<&ZoneId> {
        self.delivery_stops()
            .filter_map(|s| s.zone.as_ref())
            .collect()
    }

    /// Stops of one zone, in stop-list order.
    pub fn stops_of_zone<'a>(&'a self, zone: &'a ZoneId) -> impl Iterator<Item = &'a Stop> {
        self.delivery_stops()
            .filter(move |s| s.zone.as_ref() == Some(zone))
    }

    /// Summed travel time along `order`, without a return leg.
    pub fn realized_travel_time(&self, order: &[StopId]) -> Float {
        order
            .windows(2)
            .map(|w| self.travel_time(&w[0], &w[1]))
            .sum()
    }

    fn with_stops(&self, stops: Vec<Stop>) -> Self {
        Self::new(
            self.route_id.clone(),
            self.station.clone(),
            stops,
            self.travel_times.clone(),
            self.actual_sequence.clone(),
        )
    }
}

/// Fills in missing zone ids: a stop without a zone takes the zone of the
/// zoned stop reachable in minimal travel time, ties broken by the
/// lexicographically smallest stop id. Zoned stops are never altered, so the
/// operation is idempotent.
pub fn impute_missing_zones(route: &Route) -> Result<Route, DomainError> {
    let donors: Vec<(usize, &ZoneId)> = route
        .stops
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_station)
        .filter_map(|(i, s)| s.zone.as_ref().map(|z| (i, z)))
        .collect();

    let needs_zone = route
        .stops
        .iter()
        .any(|s| !s.is_station && s.zone.is_none());
    if !needs_zone {
        return Ok(route.clone());
    }
    if donors.is_empty() {
        return Err(DomainError::NoZonedStops {
            route_id: route.route_id.clone(),
        });
    }

    let stops = route
        .stops
        .iter()
        .enumerate()
        .map(|(i, stop)| {
            if stop.is_station || stop.zone.is_some() {
                return stop.clone();
            }
            let (_, best_zone) = donors
                .iter()
                .map(|&(j, zone)| ((route.travel_times.get(i, j), &route.stops[j].id), zone))
                .min_by(|a, b| {
                    a.0 .0
                        .partial_cmp(&b.0 .0)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then_with(|| a.0 .1.cmp(b.0 .1))
                })
                .expect("donors non-empty");
            let mut stop = stop.clone();
            stop.zone = Some((*best_zone).clone());
            stop
        })
        .collect();

    Ok(route.with_stops(stops))
}

/// One failed route invariant. Violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn violation(field: &'static str, message: impl Into<String>) -> Violation {
    Violation {
        field,
        message: message.into(),
    }
}

/// Checks every route invariant and returns the list of breaches; an empty
/// list means the route is well formed.
pub fn validate_route(route: &Route) -> Vec<Violation> {
    let mut out = Vec::new();

    if route.route_id.is_empty() {
        out.push(violation("route_id", "route id is empty"));
    }
    if route.station.as_str().is_empty() {
        out.push(violation("station", "station id is empty"));
    }

    let station_count = route.stops.iter().filter(|s| s.is_station).count();
    if station_count != 1 {
        out.push(violation(
            "stops.is_station",
            format!("expected exactly one station stop, found {station_count}"),
        ));
    }

    let mut seen = BTreeSet::new();
    for stop in &route.stops {
        if stop.id.as_str().is_empty() {
            out.push(violation("stops.id", "stop id is empty"));
        }
        if !seen.insert(&stop.id) {
            out.push(violation(
                "stops.id",
                format!("duplicate stop id {}", stop.id),
            ));
        }
        if !stop.location.in_bounds() {
            out.push(violation(
                "stops.location",
                format!(
                    "stop {} at ({}, {}) outside lat/lng bounds",
                    stop.id, stop.location.lat, stop.location.lng
                ),
            ));
        }
    }

    let n = route.stops.len();
    if route.travel_times.n() != n {
        out.push(violation(
            "travel_times",
            format!(
                "matrix is {}x{} but the route has {} stops",
                route.travel_times.n(),
                route.travel_times.n(),
                n
            ),
        ));
    } else {
        for i in 0..n {
            if route.travel_times.get(i, i) != 0.0 {
                out.push(violation(
                    "travel_times.diagonal",
                    format!("t({id},{id}) != 0", id = route.stops[i].id),
                ));
            }
            for j in 0..n {
                let t = route.travel_times.get(i, j);
                if !t.is_finite() || t < 0.0 {
                    out.push(violation(
                        "travel_times.entries",
                        format!(
                            "t({},{}) = {} is not a nonnegative real",
                            route.stops[i].id, route.stops[j].id, t
                        ),
                    ));
                }
            }
        }
    }

    if let Some(seq) = &route.actual_sequence {
        if seq.len() != n {
            out.push(violation(
                "actual_sequence",
                format!("sequence visits {} stops, route has {}", seq.len(), n),
            ));
        }
        let distinct: BTreeSet<_> = seq.iter().collect();
        if distinct.len() != seq.len() {
            out.push(violation("actual_sequence", "sequence repeats a stop"));
        }
        for id in seq {
            if route.stop_index(id).is_none() {
                out.push(violation(
                    "actual_sequence",
                    format!("sequence references unknown stop {id}"),
                ));
            }
        }
        match seq.first() {
            Some(first) if route.stop(first).map(|s| s.is_station) == Some(true) => {}
            _ => out.push(violation(
                "actual_sequence",
                "sequence does not begin at the station stop",
            )),
        }
    }

    out
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::matrix::SquareMatrix;

    /// Small route builder for tests: stop 0 is the station.
    pub fn route_from_parts(
        route_id: &str,
        station: &str,
        stops: &[(&str, f64, f64, Option<&str>)],
        times: Vec<Vec<Float>>,
        actual: Option<&[&str]>,
    ) -> Route {
        let stops: Vec<Stop> = stops
            .iter()
            .enumerate()
            .map(|(i, &(id, lat, lng, zone))| Stop {
                id: StopId::from(id),
                location: GeoPoint::new(lat, lng),
                zone: zone.map(ZoneId::from),
                is_station: i == 0,
            })
            .collect();
        let matrix = SquareMatrix::try_from(times).unwrap();
        let actual = actual.map(|ids| ids.iter().map(|&s| StopId::from(s)).collect());
        Route::new(route_id, StationId::from(station), stops, matrix, actual)
    }
}
