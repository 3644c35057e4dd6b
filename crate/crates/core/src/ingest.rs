//! Corpus I/O: the challenge-style JSON layout, train/test splitting, and
//! prediction files.
//!
//! Three files describe a corpus. The route file maps route ids to a
//! station code plus stops (lat/lng, optional `zone_id`, `type` of
//! `Station` or `Dropoff`); the sequence file maps route ids to
//! `{"actual": {stop: visit order}}`; the travel-time file nests
//! `route -> from-stop -> to-stop -> seconds`. Routes that parse but break
//! an invariant land in a rejection report instead of being dropped
//! silently.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::{
    impute_missing_zones, validate_route, DomainError, GeoPoint, Route, StationId, Stop, StopId,
    ZoneId,
};
use crate::matrix::SquareMatrix;
use crate::predict::PredictedSequence;
use crate::Float;

pub const ROUTE_FILE: &str = "route_data.json";
pub const SEQUENCE_FILE: &str = "actual_sequences.json";
pub const TRAVEL_TIME_FILE: &str = "travel_times.json";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {detail}")]
    Format { file: PathBuf, detail: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("test fraction {value} outside (0, 1)")]
    InvalidFraction { value: Float },
    #[error("duplicate route id {route_id}")]
    DuplicateRouteId { route_id: String },
    #[error("prediction references unknown route {route_id}")]
    UnknownRoute { route_id: String },
    #[error("prediction for route {route_id} is not a permutation of its stops: {reason}")]
    InvalidPrediction { route_id: String, reason: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// An immutable set of routes spanning one or more stations.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    routes: Vec<Route>,
    stations: BTreeSet<StationId>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(routes: Vec<Route>) -> Result<Self, IngestError> {
        let mut by_id = HashMap::with_capacity(routes.len());
        for (i, route) in routes.iter().enumerate() {
            if by_id.insert(route.route_id().to_owned(), i).is_some() {
                return Err(IngestError::DuplicateRouteId {
                    route_id: route.route_id().to_owned(),
                });
            }
        }
        let stations = routes.iter().map(|r| r.station().clone()).collect();
        Ok(Self {
            routes,
            stations,
            by_id,
        })
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn stations(&self) -> &BTreeSet<StationId> {
        &self.stations
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn route(&self, route_id: &str) -> Option<&Route> {
        self.by_id.get(route_id).map(|&i| &self.routes[i])
    }

    pub fn by_station<'a>(&'a self, station: &'a StationId) -> impl Iterator<Item = &'a Route> {
        self.routes.iter().filter(move |r| r.station() == station)
    }

    /// Imputes missing zone ids on every route.
    pub fn imputed(&self) -> Result<Corpus, DomainError> {
        let routes = self
            .routes
            .iter()
            .map(impute_missing_zones)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Corpus::new(routes).expect("ids unchanged"))
    }
}

/// A route that failed ingestion, with the reason.
#[derive(Debug, Clone, Serialize)]
pub struct Rejection {
    pub route_id: String,
    pub reason: String,
}

/// Result of loading a corpus: the good routes and the rejection report.
#[derive(Debug)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StopRecord {
    lat: f64,
    lng: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    zone_id: Option<String>,
    #[serde(rename = "type")]
    kind: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RouteRecord {
    station_code: String,
    stops: BTreeMap<String, StopRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SequenceRecord {
    actual: BTreeMap<String, usize>,
}

type RouteFile = BTreeMap<String, RouteRecord>;
type SequenceFile = BTreeMap<String, SequenceRecord>;
type TravelTimeFile = BTreeMap<String, BTreeMap<String, BTreeMap<String, Float>>>;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IngestError> {
    let bytes = fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|e| IngestError::Format {
        file: path.to_owned(),
        detail: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IngestError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable artifact");
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })
}

fn assemble_route(
    route_id: &str,
    record: &RouteRecord,
    sequence: Option<&SequenceRecord>,
    times: Option<&BTreeMap<String, BTreeMap<String, Float>>>,
) -> Result<Route, String> {
    if record.stops.is_empty() {
        return Err("route has no stops".to_owned());
    }
    let stops: Vec<Stop> = record
        .stops
        .iter()
        .map(|(id, rec)| Stop {
            id: StopId::new(id.clone()),
            location: GeoPoint::new(rec.lat, rec.lng),
            zone: rec
                .zone_id
                .as_deref()
                .filter(|z| !z.is_empty())
                .map(ZoneId::new),
            is_station: rec.kind == "Station",
        })
        .collect();

    let times = times.ok_or_else(|| "no travel-time entry for this route".to_owned())?;
    let n = stops.len();
    let mut matrix = SquareMatrix::<Float>::zeros(n);
    for (i, from) in stops.iter().enumerate() {
        let row = times
            .get(from.id.as_str())
            .ok_or_else(|| format!("travel times missing row for stop {}", from.id))?;
        for (j, to) in stops.iter().enumerate() {
            let t = row
                .get(to.id.as_str())
                .ok_or_else(|| format!("travel times missing {} -> {}", from.id, to.id))?;
            matrix.set(i, j, *t);
        }
    }

    let actual = match sequence {
        Some(seq) => {
            let mut pairs: Vec<(&String, &usize)> = seq.actual.iter().collect();
            pairs.sort_by_key(|&(_, order)| *order);
            Some(
                pairs
                    .into_iter()
                    .map(|(id, _)| StopId::new(id.clone()))
                    .collect(),
            )
        }
        None => None,
    };

    let route = Route::new(
        route_id,
        StationId::new(record.station_code.clone()),
        stops,
        matrix,
        actual,
    );
    let violations = validate_route(&route);
    if violations.is_empty() {
        Ok(route)
    } else {
        let reasons: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        Err(reasons.join("; "))
    }
}

/// Loads a corpus from the three-file layout. Routes that break an
/// invariant are collected into the rejection report.
pub fn load_corpus(
    route_path: &Path,
    sequence_path: &Path,
    travel_time_path: &Path,
) -> Result<LoadedCorpus, IngestError> {
    let route_file: RouteFile = read_json(route_path)?;
    let sequence_file: SequenceFile = read_json(sequence_path)?;
    let travel_file: TravelTimeFile = read_json(travel_time_path)?;

    let mut routes = Vec::with_capacity(route_file.len());
    let mut rejections = Vec::new();
    for (route_id, record) in &route_file {
        match assemble_route(
            route_id,
            record,
            sequence_file.get(route_id),
            travel_file.get(route_id),
        ) {
            Ok(route) => routes.push(route),
            Err(reason) => rejections.push(Rejection {
                route_id: route_id.clone(),
                reason,
            }),
        }
    }
    Ok(LoadedCorpus {
        corpus: Corpus::new(routes)?,
        rejections,
    })
}

/// Loads the standard file names from one directory.
pub fn load_corpus_dir(dir: &Path) -> Result<LoadedCorpus, IngestError> {
    load_corpus(
        &dir.join(ROUTE_FILE),
        &dir.join(SEQUENCE_FILE),
        &dir.join(TRAVEL_TIME_FILE),
    )
}

/// Writes a corpus back out in the canonical three-file layout.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<(), IngestError> {
    let mut route_file: RouteFile = BTreeMap::new();
    let mut sequence_file: SequenceFile = BTreeMap::new();
    let mut travel_file: TravelTimeFile = BTreeMap::new();

    for route in corpus.routes() {
        let stops: BTreeMap<String, StopRecord> = route
            .stops()
            .iter()
            .map(|s| {
                (
                    s.id.as_str().to_owned(),
                    StopRecord {
                        lat: s.location.lat,
                        lng: s.location.lng,
                        zone_id: s.zone.as_ref().map(|z| z.as_str().to_owned()),
                        kind: if s.is_station { "Station" } else { "Dropoff" }.to_owned(),
                    },
                )
            })
            .collect();
        route_file.insert(
            route.route_id().to_owned(),
            RouteRecord {
                station_code: route.station().as_str().to_owned(),
                stops,
            },
        );

        if let Some(actual) = route.actual_sequence() {
            let map: BTreeMap<String, usize> = actual
                .iter()
                .enumerate()
                .map(|(order, id)| (id.as_str().to_owned(), order))
                .collect();
            sequence_file.insert(route.route_id().to_owned(), SequenceRecord { actual: map });
        }

        let mut times: BTreeMap<String, BTreeMap<String, Float>> = BTreeMap::new();
        for from in route.stops() {
            let mut row = BTreeMap::new();
            for to in route.stops() {
                row.insert(
                    to.id.as_str().to_owned(),
                    route.travel_time(&from.id, &to.id),
                );
            }
            times.insert(from.id.as_str().to_owned(), row);
        }
        travel_file.insert(route.route_id().to_owned(), times);
    }

    fs::create_dir_all(dir).map_err(|source| IngestError::Io {
        path: dir.to_owned(),
        source,
    })?;
    write_json(&dir.join(ROUTE_FILE), &route_file)?;
    write_json(&dir.join(SEQUENCE_FILE), &sequence_file)?;
    write_json(&dir.join(TRAVEL_TIME_FILE), &travel_file)?;
    Ok(())
}

/// A train/test partition of a corpus.
#[derive(Debug)]
pub struct TrainTestSplit {
    pub train: Corpus,
    pub test: Corpus,
    pub seed: u64,
}

/// Splits per station: each station contributes `round(fraction * n)` of
/// its routes to the test side. Deterministic for a fixed seed.
pub fn split_corpus(
    corpus: &Corpus,
    test_fraction: Float,
    seed: u64,
) -> Result<TrainTestSplit, IngestError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if corpus.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(IngestError::InvalidFraction {
            value: test_fraction,
        });
    }

    let mut by_station: BTreeMap<&StationId, Vec<&Route>> = BTreeMap::new();
    for route in corpus.routes() {
        by_station.entry(route.station()).or_default().push(route);
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (_, mut station_routes) in by_station {
        station_routes.sort_by(|a, b| a.route_id().cmp(b.route_id()));
        station_routes.shuffle(&mut rng);
        let n_test = ((test_fraction * station_routes.len() as Float).round() as usize)
            .min(station_routes.len());
        for (i, route) in station_routes.into_iter().enumerate() {
            if i < n_test {
                test.push(route.clone());
            } else {
                train.push(route.clone());
            }
        }
    }
    Ok(TrainTestSplit {
        train: Corpus::new(train)?,
        test: Corpus::new(test)?,
        seed,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ProposedRecord {
    proposed: BTreeMap<String, usize>,
}

/// Writes predictions as `{route_id: {"proposed": {stop: order}}}` with
/// sorted keys, so identical inputs produce identical bytes. Every
/// sequence is checked to be a complete permutation of its route's stops
/// before anything is written.
pub fn write_predictions(
    corpus: &Corpus,
    predictions: &BTreeMap<String, PredictedSequence>,
    path: &Path,
) -> Result<(), IngestError> {
    let mut out: BTreeMap<String, ProposedRecord> = BTreeMap::new();
    for (route_id, pred) in predictions {
        let route = corpus
            .route(route_id)
            .ok_or_else(|| IngestError::UnknownRoute {
                route_id: route_id.clone(),
            })?;
        if pred.stop_order.len() != route.stops().len() {
            return Err(IngestError::InvalidPrediction {
                route_id: route_id.clone(),
                reason: format!(
                    "{} stops ordered, route has {}",
                    pred.stop_order.len(),
                    route.stops().len()
                ),
            });
        }
        let mut proposed = BTreeMap::new();
        for (order, stop) in pred.stop_order.iter().enumerate() {
            if route.stop_index(stop).is_none() {
                return Err(IngestError::InvalidPrediction {
                    route_id: route_id.clone(),
                    reason: format!("unknown stop {stop}"),
                });
            }
            if proposed.insert(stop.as_str().to_owned(), order).is_some() {
                return Err(IngestError::InvalidPrediction {
                    route_id: route_id.clone(),
                    reason: format!("stop {stop} visited twice"),
                });
            }
        }
        out.insert(route_id.clone(), ProposedRecord { proposed });
    }
    write_json(path, &out)
}

/// Reads a prediction file back into per-route stop orders.
pub fn read_predictions(path: &Path) -> Result<BTreeMap<String, Vec<StopId>>, IngestError> {
    let raw: BTreeMap<String, ProposedRecord> = read_json(path)?;
    Ok(raw
        .into_iter()
        .map(|(route_id, record)| {
            let mut pairs: Vec<(String, usize)> = record.proposed.into_iter().collect();
            pairs.sort_by_key(|&(_, order)| order);
            (
                route_id,
                pairs.into_iter().map(|(id, _)| StopId::new(id)).collect(),
            )
        })
        .collect())
}
