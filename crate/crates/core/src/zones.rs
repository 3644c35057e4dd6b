//! Zone-sequence reduction and transition-count learning.
//!
//! A realized stop sequence is reduced to its sequence of unique zones:
//! run-length encode the stop zones, then repeatedly resolve re-occurring
//! zones by keeping the occurrence with the most stops (earliest wins ties),
//! re-merging newly adjacent runs of the same zone. Transitions between the
//! surviving zones, plus the station boundary legs, are tallied per station
//! into an asymmetric count matrix.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::{Route, StationId, StopId, ZoneId};
use crate::matrix::SquareMatrix;

#[derive(Debug, thiserror::Error)]
pub enum ZoneError {
    #[error("empty zone list")]
    EmptyInput,
    #[error("route {route_id} has no actual sequence")]
    MissingActualSequence { route_id: String },
    #[error("route {route_id} belongs to station {route_station}, expected {expected}")]
    StationMismatch {
        route_id: String,
        route_station: StationId,
        expected: StationId,
    },
    #[error("stop {stop_id} of route {route_id} has no zone (run imputation first)")]
    UnzonedStop { route_id: String, stop_id: StopId },
}

/// A maximal run of consecutive stops in the same zone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLengthPair {
    pub zone: ZoneId,
    pub count: usize,
}

/// The order in which a route traverses its zones, each exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZoneSequence {
    pub station: StationId,
    pub zones: Vec<ZoneId>,
}

pub fn run_length_encode(zones: &[ZoneId]) -> Vec<RunLengthPair> {
    let mut pairs: Vec<RunLengthPair> = Vec::new();
    for zone in zones {
        match pairs.last_mut() {
            Some(last) if &last.zone == zone => last.count += 1,
            _ => pairs.push(RunLengthPair {
                zone: zone.clone(),
                count: 1,
            }),
        }
    }
    pairs
}

fn merge_adjacent(pairs: &mut Vec<RunLengthPair>) {
    let mut merged: Vec<RunLengthPair> = Vec::with_capacity(pairs.len());
    for pair in pairs.drain(..) {
        match merged.last_mut() {
            Some(last) if last.zone == pair.zone => last.count += pair.count,
            _ => merged.push(pair),
        }
    }
    *pairs = merged;
}

/// Reduces a per-stop zone list to the sequence of unique zones.
///
/// Re-occurring zones keep their largest run (earliest run on ties). When
/// several zones re-occur, the one with the most runs is resolved first,
/// ties going to the zone whose first run comes earliest; removing runs
/// re-merges newly adjacent runs of the same zone before the next pass.
pub fn reduce_zone_runs(zones: &[ZoneId]) -> Result<Vec<ZoneId>, ZoneError> {
    if zones.is_empty() {
        return Err(ZoneError::EmptyInput);
    }
    let mut pairs = run_length_encode(zones);

    loop {
        // Occurrence lists per zone, in first-appearance order.
        let mut order: Vec<&ZoneId> = Vec::new();
        let mut occurrences: Vec<Vec<usize>> = Vec::new();
        for (idx, pair) in pairs.iter().enumerate() {
            match order.iter().position(|z| *z == &pair.zone) {
                Some(k) => occurrences[k].push(idx),
                None => {
                    order.push(&pair.zone);
                    occurrences.push(vec![idx]);
                }
            }
        }

        let Some(dup) = occurrences
            .iter()
            .enumerate()
            .filter(|(_, occ)| occ.len() > 1)
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.1[0].cmp(&a.1[0])))
        else {
            break;
        };

        let keep = *dup
            .1
            .iter()
            .max_by(|&&a, &&b| pairs[a].count.cmp(&pairs[b].count).then(b.cmp(&a)))
            .expect("duplicate has occurrences");
        let drop: BTreeSet<usize> = dup.1.iter().copied().filter(|&i| i != keep).collect();
        let mut kept: Vec<RunLengthPair> = pairs
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !drop.contains(i))
            .map(|(_, p)| p)
            .collect();
        merge_adjacent(&mut kept);
        pairs = kept;
    }

    Ok(pairs.into_iter().map(|p| p.zone).collect())
}

/// Reduces the zones of a stop sequence to a [`ZoneSequence`].
pub fn to_zone_sequence(station: &StationId, zones: &[ZoneId]) -> Result<ZoneSequence, ZoneError> {
    Ok(ZoneSequence {
        station: station.clone(),
        zones: reduce_zone_runs(zones)?,
    })
}

/// Zones of `order`'s delivery stops, in visiting order.
pub fn stop_zones_in_order(route: &Route, order: &[StopId]) -> Result<Vec<ZoneId>, ZoneError> {
    order
        .iter()
        .filter_map(|id| route.stop(id))
        .filter(|stop| !stop.is_station)
        .map(|stop| {
            stop.zone.clone().ok_or_else(|| ZoneError::UnzonedStop {
                route_id: route.route_id().to_owned(),
                stop_id: stop.id.clone(),
            })
        })
        .collect()
}

/// The zone sequence realized by a route's actual stop sequence.
pub fn route_zone_sequence(route: &Route) -> Result<ZoneSequence, ZoneError> {
    let actual = route
        .actual_sequence()
        .ok_or_else(|| ZoneError::MissingActualSequence {
            route_id: route.route_id().to_owned(),
        })?;
    let zones = stop_zones_in_order(route, actual)?;
    to_zone_sequence(route.station(), &zones)
}

/// Asymmetric transition counts over one station's zones. Index 0 is the
/// station itself; indices `1..` follow `zones` (sorted).
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    station: StationId,
    zones: Vec<ZoneId>,
    counts: SquareMatrix<u64>,
}

impl CountMatrix {
    pub fn station(&self) -> &StationId {
        &self.station
    }

    pub fn zones(&self) -> &[ZoneId] {
        &self.zones
    }

    pub fn counts(&self) -> &SquareMatrix<u64> {
        &self.counts
    }

    /// Matrix index of a zone, if the zone was seen during learning.
    pub fn zone_index(&self, zone: &ZoneId) -> Option<usize> {
        self.zones.binary_search(zone).ok().map(|i| i + 1)
    }

    pub fn len(&self) -> usize {
        self.counts.n()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total number of tallied transitions.
    pub fn total(&self) -> u64 {
        self.counts.entries().sum()
    }
}

/// Tallies zone transitions over one station's routes.
///
/// Every route contributes its station departure, its zone-to-zone legs,
/// and its return to the station.
pub fn accumulate_counts<'a>(
    station: &StationId,
    routes: impl IntoIterator<Item = &'a Route> + Clone,
) -> Result<CountMatrix, ZoneError> {
    let mut zone_set: BTreeSet<ZoneId> = BTreeSet::new();
    let mut sequences = Vec::new();
    for route in routes.clone() {
        if route.station() != station {
            return Err(ZoneError::StationMismatch {
                route_id: route.route_id().to_owned(),
                route_station: route.station().clone(),
                expected: station.clone(),
            });
        }
        let seq = route_zone_sequence(route)?;
        zone_set.extend(seq.zones.iter().cloned());
        // Zones visited at least once anywhere on the route count as seen,
        // even if the reduction dropped their smaller runs.
        zone_set.extend(route.zone_set().into_iter().cloned());
        sequences.push(seq);
    }

    let zones: Vec<ZoneId> = zone_set.into_iter().collect();
    let mut counts = SquareMatrix::<u64>::zeros(zones.len() + 1);
    let index_of =
        |zone: &ZoneId| -> usize { zones.binary_search(zone).expect("zone collected above") + 1 };

    for seq in &sequences {
        if seq.zones.is_empty() {
            continue;
        }
        let first = index_of(&seq.zones[0]);
        counts.set(0, first, counts.get(0, first) + 1);
        for pair in seq.zones.windows(2) {
            let (i, j) = (index_of(&pair[0]), index_of(&pair[1]));
            counts.set(i, j, counts.get(i, j) + 1);
        }
        let last = index_of(&seq.zones[seq.zones.len() - 1]);
        counts.set(last, 0, counts.get(last, 0) + 1);
    }

    Ok(CountMatrix {
        station: station.clone(),
        zones,
        counts,
    })
}

/// Serialized form: the index list (station first, then zones) plus the
/// dense count matrix.
#[derive(Debug, Serialize, Deserialize)]
struct CountMatrixFile {
    station: String,
    index: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl Serialize for CountMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut index = Vec::with_capacity(self.zones.len() + 1);
        index.push(self.station.as_str().to_owned());
        index.extend(self.zones.iter().map(|z| z.as_str().to_owned()));
        CountMatrixFile {
            station: self.station.as_str().to_owned(),
            index,
            counts: self.counts.clone().into(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CountMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let file = CountMatrixFile::deserialize(deserializer)?;
        let counts = SquareMatrix::try_from(file.counts).map_err(D::Error::custom)?;
        if file.index.len() != counts.n() {
            return Err(D::Error::custom(format!(
                "index has {} labels but the matrix is {}x{}",
                file.index.len(),
                counts.n(),
                counts.n()
            )));
        }
        if file.index.first().map(String::as_str) != Some(file.station.as_str()) {
            return Err(D::Error::custom("index must start with the station"));
        }
        let zones: Vec<ZoneId> = file.index[1..].iter().map(ZoneId::new).collect();
        if zones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(D::Error::custom("zone index must be strictly sorted"));
        }
        Ok(CountMatrix {
            station: StationId::new(file.station),
            zones,
            counts,
        })
    }
}
