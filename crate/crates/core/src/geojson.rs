//! GeoJSON export of predicted sequences for map inspection.

use serde_json::{json, Value};

use crate::domain::Route;
use crate::predict::PredictedSequence;

/// Colors cycled over zones, in zone-sequence order.
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Builds a FeatureCollection: the full predicted path as one LineString,
/// one colored LineString per zone block, and a station marker.
pub fn predicted_sequence_geojson(route: &Route, predicted: &PredictedSequence) -> Value {
    let coord = |id: &crate::domain::StopId| -> Value {
        let loc = route
            .stop(id)
            .expect("prediction covers route stops")
            .location;
        json!([loc.lng, loc.lat])
    };

    let mut features = Vec::new();

    let path: Vec<Value> = predicted.stop_order.iter().map(coord).collect();
    features.push(json!({
        "type": "Feature",
        "properties": {
            "route_id": predicted.route_id,
            "kind": "predicted-path",
            "stroke": "#444444",
            "stroke-width": 2,
            "stroke-opacity": 0.8,
        },
        "geometry": { "type": "LineString", "coordinates": path },
    }));

    for (zi, zone) in predicted.zone_order.zones.iter().enumerate() {
        let block: Vec<Value> = predicted
            .stop_order
            .iter()
            .filter(|id| {
                route
                    .stop(id)
                    .and_then(|s| s.zone.as_ref())
                    .map(|z| z == zone)
                    .unwrap_or(false)
            })
            .map(coord)
            .collect();
        features.push(json!({
            "type": "Feature",
            "properties": {
                "kind": "zone-block",
                "zone": zone.as_str(),
                "order": zi,
                "stroke": PALETTE[zi % PALETTE.len()],
                "stroke-width": 4,
            },
            "geometry": { "type": "LineString", "coordinates": block },
        }));
    }

    let station = route.station_stop();
    features.push(json!({
        "type": "Feature",
        "properties": {
            "kind": "station",
            "station": route.station().as_str(),
            "marker-symbol": "warehouse",
        },
        "geometry": {
            "type": "Point",
            "coordinates": [station.location.lng, station.location.lat],
        },
    }));

    json!({ "type": "FeatureCollection", "features": features })
}
