//! Synthetic corpus generator with controllable driver behavior.
//!
//! Zones are placed as spatial clusters in pairs along an outward arc
//! around each station: each arc step carries two zones side by side, so
//! sweeping the arc is the natural geometric order while the order inside
//! a pair is a near-tie that distance alone cannot settle. The station's
//! preferred permutation sweeps the arc with one fixed orientation per
//! pair; that is the tacit knowledge a learner can pick up and a distance
//! minimizer can only guess. Each route samples a subset of its station's
//! zones and some stops per zone; the realized zone order follows the
//! preferred permutation (with probability `habit_strength`) or a
//! distance-greedy sweep, and stops inside a zone come out either
//! shortest-path ordered or shuffled. Travel times are planar distances at
//! a fixed speed plus bounded nonnegative noise, drawn independently per
//! direction, so matrices turn asymmetric as soon as the noise level is
//! positive.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{GeoPoint, Route, StationId, Stop, StopId, ZoneId};
use crate::ingest::Corpus;
use crate::matrix::SquareMatrix;
use crate::tsp::{solve_path, PathInstance};
use crate::Float;

#[derive(Debug, thiserror::Error)]
#[error("invalid generator config: {reason}")]
pub struct InvalidConfig {
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WithinZonePolicy {
    /// Exact open path over the zone's stops, anchored at the stop nearest
    /// to the previous endpoint.
    ShortestPath,
    /// Uniformly shuffled.
    Random,
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub station_count: usize,
    pub zones_per_station: usize,
    /// Inclusive range of stops sampled per visited zone.
    pub stops_per_zone: (usize, usize),
    pub routes_per_station: usize,
    /// Probability that a route follows the station's preferred zone
    /// permutation instead of the distance-greedy sweep.
    pub habit_strength: f64,
    pub within_zone_policy: WithinZonePolicy,
    /// Travel-time noise as a fraction of the base time; 0 gives exact
    /// symmetric planar times.
    pub noise_level: f64,
    /// Inclusive range of the fraction of a station's zones a route visits.
    pub zone_coverage: (f64, f64),
    pub noise_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            station_count: 1,
            zones_per_station: 8,
            stops_per_zone: (2, 4),
            routes_per_station: 50,
            habit_strength: 0.8,
            within_zone_policy: WithinZonePolicy::ShortestPath,
            noise_level: 0.05,
            zone_coverage: (0.6, 1.0),
            noise_seed: 0,
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<(), InvalidConfig> {
        let fail = |reason: &str| {
            Err(InvalidConfig {
                reason: reason.to_owned(),
            })
        };
        if self.station_count == 0 {
            return fail("station_count must be positive");
        }
        if self.zones_per_station == 0 {
            return fail("zones_per_station must be positive");
        }
        if self.routes_per_station == 0 {
            return fail("routes_per_station must be positive");
        }
        if self.stops_per_zone.0 == 0 || self.stops_per_zone.0 > self.stops_per_zone.1 {
            return fail("stops_per_zone range must be positive and ordered");
        }
        if !(0.0..=1.0).contains(&self.habit_strength) {
            return fail("habit_strength must lie in [0, 1]");
        }
        if self.noise_level < 0.0 || !self.noise_level.is_finite() {
            return fail("noise_level must be a nonnegative real");
        }
        let (lo, hi) = self.zone_coverage;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return fail("zone_coverage must satisfy 0 < lo <= hi <= 1");
        }
        Ok(())
    }
}

const METERS_PER_DEG_LAT: f64 = 111_320.0;
const SPEED_M_PER_S: f64 = 7.5;
/// Zone pairs fan out over roughly three quarters of a turn.
const ARC_SPAN_RAD: f64 = 4.7;
const ARC_BASE_M: f64 = 420.0;
const ARC_STEP_M: f64 = 230.0;
/// Tangential half-gap between the two zones of a pair.
const PAIR_GAP_M: f64 = 80.0;
const ZONE_JITTER_M: f64 = 45.0;

fn offset(origin: GeoPoint, east_m: f64, north_m: f64) -> GeoPoint {
    let lat = origin.lat + north_m / METERS_PER_DEG_LAT;
    let lng = origin.lng + east_m / (METERS_PER_DEG_LAT * origin.lat.to_radians().cos());
    GeoPoint::new(lat, lng)
}

fn planar_m(a: GeoPoint, b: GeoPoint, ref_lat_rad: f64) -> f64 {
    crate::domain::planar_distance(a, b, ref_lat_rad)
}

/// Generates a corpus. Deterministic for a fixed config.
pub fn generate(config: &GeneratorConfig) -> Result<Corpus, InvalidConfig> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.noise_seed);
    let mut routes = Vec::with_capacity(config.station_count * config.routes_per_station);

    for s in 0..config.station_count {
        let station_id = StationId::new(format!("ST{s}"));
        let station_loc = GeoPoint::new(40.0 + s as f64 * 0.5, -100.0 + s as f64 * 0.25);
        let ref_lat_rad = station_loc.lat.to_radians();

        // Fixed zone layout for the station: zones 2j and 2j+1 sit side by
        // side at arc step j, so sweeping j = 0, 1, ... is geometrically
        // forced while the order within a pair is a near-tie.
        let m = config.zones_per_station;
        let pairs = m.div_ceil(2);
        let zone_centers: Vec<GeoPoint> = (0..m)
            .map(|k| {
                let j = k / 2;
                let r = ARC_BASE_M + ARC_STEP_M * j as f64;
                let theta = if pairs > 1 {
                    ARC_SPAN_RAD * j as f64 / pairs as f64
                } else {
                    0.0
                };
                let side = if k % 2 == 0 { -1.0 } else { 1.0 };
                let east = r * theta.cos() - side * PAIR_GAP_M * theta.sin();
                let north = r * theta.sin() + side * PAIR_GAP_M * theta.cos();
                offset(station_loc, east, north)
            })
            .collect();

        // The station's tacit preference: sweep the arc with one fixed
        // orientation per pair. Distance cannot tell the orientations
        // apart; history can.
        let mut habit: Vec<usize> = Vec::with_capacity(m);
        for j in 0..pairs {
            let (a, b) = (2 * j, 2 * j + 1);
            if b < m {
                if rng.gen_bool(0.5) {
                    habit.extend([b, a]);
                } else {
                    habit.extend([a, b]);
                }
            } else {
                habit.push(a);
            }
        }

        // Zone names carry no geographic order, as in real data.
        let mut zone_names: Vec<usize> = (0..m).collect();
        zone_names.shuffle(&mut rng);

        for r in 0..config.routes_per_station {
            let route = generate_route(
                config,
                &mut rng,
                &station_id,
                station_loc,
                ref_lat_rad,
                &zone_centers,
                &habit,
                &zone_names,
                r,
            );
            routes.push(route);
        }
    }

    Ok(Corpus::new(routes).expect("generated route ids are unique"))
}

#[allow(clippy::too_many_arguments)]
fn generate_route(
    config: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
    station_id: &StationId,
    station_loc: GeoPoint,
    ref_lat_rad: f64,
    zone_centers: &[GeoPoint],
    habit: &[usize],
    zone_names: &[usize],
    route_index: usize,
) -> Route {
    let m = zone_centers.len();
    let (cov_lo, cov_hi) = config.zone_coverage;
    let min_zones = ((cov_lo * m as f64).ceil() as usize).clamp(1, m);
    let max_zones = ((cov_hi * m as f64).round() as usize).clamp(min_zones, m);
    let zone_count = rng.gen_range(min_zones..=max_zones);

    // Sample the visited zone subset.
    let mut all_zones: Vec<usize> = (0..m).collect();
    all_zones.shuffle(rng);
    let mut subset: Vec<usize> = all_zones.into_iter().take(zone_count).collect();
    subset.sort_unstable();

    // Sample the stops of each visited zone.
    let mut stops = vec![Stop {
        id: StopId::new("AS"),
        location: station_loc,
        zone: None,
        is_station: true,
    }];
    let mut stops_of_zone: Vec<Vec<usize>> = vec![Vec::new(); m];
    for &z in &subset {
        let count = rng.gen_range(config.stops_per_zone.0..=config.stops_per_zone.1);
        for _ in 0..count {
            let east = rng.gen_range(-ZONE_JITTER_M..ZONE_JITTER_M);
            let north = rng.gen_range(-ZONE_JITTER_M..ZONE_JITTER_M);
            let idx = stops.len();
            stops.push(Stop {
                id: StopId::new(format!("P{idx:03}")),
                location: offset(zone_centers[z], east, north),
                zone: Some(ZoneId::new(format!("Z{:02}", zone_names[z]))),
                is_station: false,
            });
            stops_of_zone[z].push(idx);
        }
    }

    // Travel times: planar seconds plus directional nonnegative noise.
    let n = stops.len();
    let mut times = SquareMatrix::<Float>::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let base = planar_m(stops[i].location, stops[j].location, ref_lat_rad) / SPEED_M_PER_S;
            let noise = if config.noise_level > 0.0 {
                1.0 + config.noise_level * rng.gen_range(0.0..1.0)
            } else {
                1.0
            };
            times.set(i, j, base * noise);
        }
    }

    // Zone order: habit restriction or distance-greedy sweep over the
    // route's realized zone centroids.
    let follows_habit = rng.gen_range(0.0..1.0) < config.habit_strength;
    let zone_order: Vec<usize> = if follows_habit {
        habit
            .iter()
            .copied()
            .filter(|z| subset.contains(z))
            .collect()
    } else {
        let centroid = |z: usize| -> GeoPoint {
            let members = &stops_of_zone[z];
            let lat =
                members.iter().map(|&i| stops[i].location.lat).sum::<f64>() / members.len() as f64;
            let lng =
                members.iter().map(|&i| stops[i].location.lng).sum::<f64>() / members.len() as f64;
            GeoPoint::new(lat, lng)
        };
        let mut remaining: Vec<usize> = subset.clone();
        let mut order = Vec::with_capacity(remaining.len());
        let mut here = station_loc;
        while !remaining.is_empty() {
            let (pos, _) = remaining
                .iter()
                .enumerate()
                .map(|(pos, &z)| (pos, planar_m(here, centroid(z), ref_lat_rad)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
                .expect("remaining non-empty");
            let z = remaining.remove(pos);
            here = centroid(z);
            order.push(z);
        }
        order
    };

    // Stop order inside each zone.
    let mut sequence = vec![0usize];
    for &z in &zone_order {
        let members = &stops_of_zone[z];
        let prev = *sequence.last().expect("station first");
        let block: Vec<usize> = match config.within_zone_policy {
            WithinZonePolicy::Random => {
                let mut shuffled = members.clone();
                shuffled.shuffle(rng);
                shuffled
            }
            WithinZonePolicy::ShortestPath => {
                let anchor_pos = members
                    .iter()
                    .enumerate()
                    .min_by(|a, b| {
                        times
                            .get(prev, *a.1)
                            .partial_cmp(&times.get(prev, *b.1))
                            .unwrap_or(std::cmp::Ordering::Equal)
                            .then_with(|| stops[*a.1].id.cmp(&stops[*b.1].id))
                    })
                    .map(|(pos, _)| pos)
                    .expect("zone has stops");
                let cost =
                    SquareMatrix::from_fn(members.len(), |a, b| times.get(members[a], members[b]));
                // Zones beyond 18 stops fall back to local search.
                let report = solve_path(
                    &PathInstance {
                        cost,
                        start: anchor_pos,
                        end: None,
                    },
                    18,
                )
                .expect("well-formed zone instance");
                report.order.iter().map(|&pos| members[pos]).collect()
            }
        };
        sequence.extend(block);
    }

    let actual: Vec<StopId> = sequence.iter().map(|&i| stops[i].id.clone()).collect();
    Route::new(
        format!("{station_id}-{route_index:04}"),
        station_id.clone(),
        stops,
        times,
        Some(actual),
    )
}
