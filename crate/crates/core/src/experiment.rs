//! Experiment harness: per-station model learning, corpus-level prediction
//! and scoring, stratified k-fold cross-validation, weight sweeps, the
//! zone-oracle run, and the benchmark table.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::baseline;
use crate::cost::{to_transition_matrix, MetricChoice, TransitionMatrix, WeightConfig, Weights};
use crate::domain::{Route, StationId};
use crate::ingest::Corpus;
use crate::metrics::{corpus_performance, evaluate_route, CorpusScore, MetricError};
use crate::predict::{
    predict, predict_stop_sequence, PredictError, PredictedSequence, PredictorConfig,
};
use crate::zones::{accumulate_counts, route_zone_sequence, CountMatrix, ZoneError};
use crate::Float;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("station {station} has {have} routes, need at least {need}")]
    InsufficientData {
        station: StationId,
        have: usize,
        need: usize,
    },
    #[error("no model learned for station {station}")]
    MissingModel { station: StationId },
    #[error("fold count {k} must be at least 2")]
    BadFoldCount { k: usize },
    #[error(transparent)]
    Zone(#[from] ZoneError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Learned transition models, one per station.
#[derive(Debug, Clone)]
pub struct ModelSet {
    counts: BTreeMap<StationId, CountMatrix>,
    models: BTreeMap<StationId, TransitionMatrix>,
}

impl ModelSet {
    pub fn from_counts(counts: Vec<CountMatrix>) -> Self {
        let models = counts
            .iter()
            .map(|c| (c.station().clone(), to_transition_matrix(c)))
            .collect();
        let counts = counts
            .into_iter()
            .map(|c| (c.station().clone(), c))
            .collect();
        Self { counts, models }
    }

    pub fn counts(&self) -> impl Iterator<Item = &CountMatrix> {
        self.counts.values()
    }

    pub fn model(&self, station: &StationId) -> Option<&TransitionMatrix> {
        self.models.get(station)
    }

    pub fn stations(&self) -> impl Iterator<Item = &StationId> {
        self.models.keys()
    }
}

/// Learns one count matrix per station from the corpus's actual sequences.
pub fn learn_models(corpus: &Corpus) -> Result<ModelSet, ExperimentError> {
    learn_models_from(corpus.stations().iter(), |station| {
        corpus.by_station(station)
    })
}

fn learn_models_from<'a, I, F, R>(stations: I, routes_of: F) -> Result<ModelSet, ExperimentError>
where
    I: Iterator<Item = &'a StationId>,
    F: Fn(&'a StationId) -> R,
    R: Iterator<Item = &'a Route>,
{
    let mut counts = Vec::new();
    for station in stations {
        let routes: Vec<&Route> = routes_of(station).collect();
        counts.push(accumulate_counts(station, routes.iter().copied())?);
    }
    Ok(ModelSet::from_counts(counts))
}

/// Predicts every route of a corpus against its station's model. Routes are
/// processed in corpus order; prediction itself is parallel and the output
/// order is deterministic.
pub fn predict_corpus(
    corpus: &Corpus,
    models: &ModelSet,
    weights: &WeightConfig,
    config: &PredictorConfig,
) -> Result<Vec<PredictedSequence>, ExperimentError> {
    corpus
        .routes()
        .par_iter()
        .map(|route| {
            let model =
                models
                    .model(route.station())
                    .ok_or_else(|| ExperimentError::MissingModel {
                        station: route.station().clone(),
                    })?;
            Ok(predict(route, model, weights, config)?)
        })
        .collect()
}

/// Scores stop orders against their routes' actual sequences.
pub fn score_predictions(
    corpus: &Corpus,
    predictions: &[PredictedSequence],
) -> Result<CorpusScore, ExperimentError> {
    let reports = predictions
        .par_iter()
        .map(|pred| {
            let route = corpus.route(&pred.route_id).ok_or_else(|| {
                ExperimentError::Predict(PredictError::ZoneMismatch {
                    route_id: pred.route_id.clone(),
                })
            })?;
            Ok(evaluate_route(route, &pred.stop_order)?)
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(corpus_performance(reports)?)
}

/// Learns on `train`, predicts and scores `test`.
pub fn evaluate_split(
    train: &Corpus,
    test: &Corpus,
    weights: &WeightConfig,
    config: &PredictorConfig,
) -> Result<CorpusScore, ExperimentError> {
    let models = learn_models(train)?;
    let predictions = predict_corpus(test, &models, weights, config)?;
    score_predictions(test, &predictions)
}

/// Grid evaluation result: one mean-over-folds performance per config.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub grid: Vec<WeightConfig>,
    pub performances: Vec<Float>,
    pub fold_count: usize,
    /// Per grid point, the per-fold means the performance averages.
    pub fold_scores: Vec<Vec<Float>>,
}

impl SweepResult {
    pub fn best(&self) -> Option<(&WeightConfig, Float)> {
        self.performances
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, &p)| (&self.grid[i], p))
    }

    /// CSV rows: one per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,omega,omega_f,omega_z,omega_l,metric,performance\n");
        for (config, perf) in self.grid.iter().zip(&self.performances) {
            let metric = match config.metric {
                MetricChoice::Euclidean => "euclid",
                MetricChoice::TravelTime => "traveltime",
            };
            match config.weights {
                Weights::Scalar { omega } => {
                    out.push_str(&format!("scalar,{omega},,,,{metric},{perf}\n"));
                }
                Weights::Structured {
                    omega_f,
                    omega_z,
                    omega_l,
                } => {
                    out.push_str(&format!(
                        "structured,,{omega_f},{omega_z},{omega_l},{metric},{perf}\n"
                    ));
                }
            }
        }
        out
    }
}

/// Stratified fold assignment: within each station, routes are shuffled
/// deterministically and dealt round-robin over the folds.
fn assign_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, ExperimentError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if k < 2 {
        return Err(ExperimentError::BadFoldCount { k });
    }
    let mut by_station: BTreeMap<&StationId, Vec<usize>> = BTreeMap::new();
    for (i, route) in corpus.routes().iter().enumerate() {
        by_station.entry(route.station()).or_default().push(i);
    }
    for (station, members) in &by_station {
        if members.len() < k {
            return Err(ExperimentError::InsufficientData {
                station: (*station).clone(),
                have: members.len(),
                need: k,
            });
        }
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    for (_, mut members) in by_station {
        members.sort_by(|&a, &b| {
            corpus.routes()[a]
                .route_id()
                .cmp(corpus.routes()[b].route_id())
        });
        members.shuffle(&mut rng);
        for (i, idx) in members.into_iter().enumerate() {
            folds[i % k].push(idx);
        }
    }
    Ok(folds)
}

/// k-fold cross-validation over a weight grid: for each fold, learn on the
/// remaining folds and score the held-out routes under every grid config;
/// each grid point reports the mean of its per-fold means.
pub fn cross_validate(
    corpus: &Corpus,
    grid: &[WeightConfig],
    k: usize,
    seed: u64,
    config: &PredictorConfig,
) -> Result<SweepResult, ExperimentError> {
    let folds = assign_folds(corpus, k, seed)?;
    let mut fold_scores = vec![Vec::with_capacity(k); grid.len()];

    for held_out in 0..k {
        let train_routes: Vec<Route> = folds
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != held_out)
            .flat_map(|(_, members)| members.iter().map(|&i| corpus.routes()[i].clone()))
            .collect();
        let test_routes: Vec<Route> = folds[held_out]
            .iter()
            .map(|&i| corpus.routes()[i].clone())
            .collect();
        let train = Corpus::new(train_routes).expect("fold ids unique");
        let test = Corpus::new(test_routes).expect("fold ids unique");
        let models = learn_models(&train)?;

        for (g, weights) in grid.iter().enumerate() {
            let predictions = predict_corpus(&test, &models, weights, config)?;
            let score = score_predictions(&test, &predictions)?;
            fold_scores[g].push(score.performance);
        }
    }

    let performances = fold_scores
        .iter()
        .map(|scores| scores.iter().sum::<Float>() / scores.len() as Float)
        .collect();
    Ok(SweepResult {
        grid: grid.to_vec(),
        performances,
        fold_count: k,
        fold_scores,
    })
}

/// Equally spaced values 0, 1/steps, ..., 1.
pub fn unit_grid(steps: usize) -> Vec<Float> {
    (0..=steps).map(|i| i as Float / steps as Float).collect()
}

/// Cross-validated sweep of the scalar weight over {0, 0.1, ..., 1} for one
/// distance backend.
pub fn omega_sweep(
    corpus: &Corpus,
    metric: MetricChoice,
    k: usize,
    seed: u64,
    config: &PredictorConfig,
) -> Result<SweepResult, ExperimentError> {
    let grid: Vec<WeightConfig> = unit_grid(10)
        .into_iter()
        .map(|omega| WeightConfig::scalar(omega, metric).expect("grid weight in range"))
        .collect();
    cross_validate(corpus, &grid, k, seed, config)
}

/// Cross-validated full grid over (station-to-zone, zone-to-zone) weights
/// at a fixed zone-to-station weight. Row-major: the station weight varies
/// slowest.
#[allow(clippy::too_many_arguments)]
pub fn station_weight_grid(
    corpus: &Corpus,
    f_grid: &[Float],
    z_grid: &[Float],
    omega_l: Float,
    metric: MetricChoice,
    k: usize,
    seed: u64,
    config: &PredictorConfig,
) -> Result<SweepResult, ExperimentError> {
    let mut grid = Vec::with_capacity(f_grid.len() * z_grid.len());
    for &f in f_grid {
        for &z in z_grid {
            grid.push(
                WeightConfig::structured(f, z, omega_l, metric).expect("grid weights in range"),
            );
        }
    }
    cross_validate(corpus, &grid, k, seed, config)
}

/// Cross-validated sensitivity of the zone-to-station weight at fixed
/// (station-to-zone, zone-to-zone) pairs.
pub fn omega_l_sensitivity(
    corpus: &Corpus,
    pairs: &[(Float, Float)],
    l_grid: &[Float],
    metric: MetricChoice,
    k: usize,
    seed: u64,
    config: &PredictorConfig,
) -> Result<SweepResult, ExperimentError> {
    let mut grid = Vec::with_capacity(pairs.len() * l_grid.len());
    for &(f, z) in pairs {
        for &l in l_grid {
            grid.push(WeightConfig::structured(f, z, l, metric).expect("grid weights in range"));
        }
    }
    cross_validate(corpus, &grid, k, seed, config)
}

/// Scores the pipeline with the zone sequence taken from each test route's
/// realized order, so only the within-zone stage is exercised. The
/// zone-level deviation is zero by construction.
pub fn hypothetical_oracle_run(
    test: &Corpus,
    config: &PredictorConfig,
) -> Result<CorpusScore, ExperimentError> {
    let reports = test
        .routes()
        .par_iter()
        .map(|route| {
            let zone_seq = route_zone_sequence(route)?;
            let predicted = predict_stop_sequence(route, &zone_seq, config)?;
            Ok(evaluate_route(route, &predicted.stop_order)?)
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(corpus_performance(reports)?)
}

/// One comparison row: corpus means of the headline metrics.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub model: String,
    pub sd_zone: Float,
    pub sd_stop: Float,
    pub erp_ratio: Float,
    pub time_seconds: Float,
    pub performance: Float,
}

impl BenchmarkRow {
    fn from_score(model: &str, score: &CorpusScore) -> Self {
        Self {
            model: model.to_owned(),
            sd_zone: score.mean_of(|r| r.sd_zone),
            sd_stop: score.mean_of(|r| r.sd_stop),
            erp_ratio: score.mean_erp_ratio(),
            time_seconds: score.mean_of(|r| r.travel_time_seconds),
            performance: score.performance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkTable {
    pub fn row(&self, model: &str) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,sd_zone,sd_stop,erp_ratio,time_s,performance\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.model, r.sd_zone, r.sd_stop, r.erp_ratio, r.time_seconds, r.performance
            ));
        }
        out
    }
}

impl std::fmt::Display for BenchmarkTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<22} {:>8} {:>8} {:>9} {:>9} {:>12}",
            "model", "SD_zone", "SD_stop", "ERP_ratio", "Time(s)", "Performance"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<22} {:>8.4} {:>8.4} {:>9.4} {:>9.0} {:>12.4}",
                r.model, r.sd_zone, r.sd_stop, r.erp_ratio, r.time_seconds, r.performance
            )?;
        }
        Ok(())
    }
}

pub const MODEL_DRIVER: &str = "Driver";
pub const MODEL_NN: &str = "Nearest Neighbor";
pub const MODEL_FULL_TSP: &str = "Full TSP";
pub const MODEL_LGOL: &str = "LG-OL";
pub const MODEL_LGOL_HYPOTHETICAL: &str = "LG-OL (hypothetical)";

/// Runs the benchmark suite on a test corpus: the driver identity, the two
/// reference predictors, the learned pipeline, and the zone-oracle variant.
pub fn benchmark_table(
    test: &Corpus,
    models: &ModelSet,
    weights: &WeightConfig,
    config: &PredictorConfig,
) -> Result<BenchmarkTable, ExperimentError> {
    let mut rows = Vec::with_capacity(5);

    let driver_reports = test
        .routes()
        .par_iter()
        .map(|route| {
            let actual = route
                .actual_sequence()
                .ok_or_else(|| MetricError::MissingActualSequence {
                    route_id: route.route_id().to_owned(),
                })?
                .to_vec();
            evaluate_route(route, &actual)
        })
        .collect::<Result<Vec<_>, _>>()?;
    rows.push(BenchmarkRow::from_score(
        MODEL_DRIVER,
        &corpus_performance(driver_reports)?,
    ));

    let nn_reports = test
        .routes()
        .par_iter()
        .map(|route| {
            let pred = baseline::nearest_neighbor(route)?;
            Ok(evaluate_route(route, &pred.stop_order)?)
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    rows.push(BenchmarkRow::from_score(
        MODEL_NN,
        &corpus_performance(nn_reports)?,
    ));

    let tsp_reports = test
        .routes()
        .par_iter()
        .map(|route| {
            let pred = baseline::full_tsp(route, config.exact_threshold)?;
            Ok(evaluate_route(route, &pred.stop_order)?)
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    rows.push(BenchmarkRow::from_score(
        MODEL_FULL_TSP,
        &corpus_performance(tsp_reports)?,
    ));

    let predictions = predict_corpus(test, models, weights, config)?;
    rows.push(BenchmarkRow::from_score(
        MODEL_LGOL,
        &score_predictions(test, &predictions)?,
    ));

    rows.push(BenchmarkRow::from_score(
        MODEL_LGOL_HYPOTHETICAL,
        &hypothetical_oracle_run(test, config)?,
    ));

    Ok(BenchmarkTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::testutil::route_from_parts;
    use crate::synth::{generate, GeneratorConfig, WithinZonePolicy};

    fn tiny_corpus() -> Corpus {
        generate(&GeneratorConfig {
            station_count: 2,
            zones_per_station: 4,
            stops_per_zone: (1, 2),
            routes_per_station: 8,
            habit_strength: 0.8,
            within_zone_policy: WithinZonePolicy::ShortestPath,
            noise_level: 0.05,
            zone_coverage: (0.7, 1.0),
            noise_seed: 5,
        })
        .unwrap()
    }

    #[test]
    fn cross_validation_averages_fold_means() {
        let corpus = tiny_corpus();
        let grid = [WeightConfig::scalar(0.9, MetricChoice::TravelTime).unwrap()];
        let result = cross_validate(&corpus, &grid, 2, 7, &PredictorConfig::default()).unwrap();
        assert_eq!(result.fold_count, 2);
        assert_eq!(result.performances.len(), 1);
        assert_eq!(result.fold_scores[0].len(), 2);
        let mean = (result.fold_scores[0][0] + result.fold_scores[0][1]) / 2.0;
        assert!((result.performances[0] - mean).abs() < 1e-12);
    }

    #[test]
    fn grid_arity_is_preserved() {
        let corpus = tiny_corpus();
        let grid: Vec<WeightConfig> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&w| WeightConfig::scalar(w, MetricChoice::Euclidean).unwrap())
            .collect();
        let result = cross_validate(&corpus, &grid, 2, 7, &PredictorConfig::default()).unwrap();
        assert_eq!(result.performances.len(), 3);
    }

    #[test]
    fn omega_sweep_covers_the_endpoints() {
        let corpus = tiny_corpus();
        let result = omega_sweep(
            &corpus,
            MetricChoice::TravelTime,
            2,
            7,
            &PredictorConfig::default(),
        )
        .unwrap();
        assert_eq!(result.grid.len(), 11);
        let omegas: Vec<Float> = result
            .grid
            .iter()
            .map(|c| match c.weights {
                Weights::Scalar { omega } => omega,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(omegas[0], 0.0);
        assert_eq!(omegas[10], 1.0);
    }

    #[test]
    fn identical_routes_score_identically_across_folds() {
        // Four copies of one route (distinct ids): any 2-fold split holds
        // the same content, so both fold scores coincide.
        let mk = |id: &str| {
            route_from_parts(
                id,
                "st",
                &[
                    ("s", 0.0, 0.0, None),
                    ("a", 0.0, 1e-3, Some("A")),
                    ("b", 0.0, 2e-3, Some("B")),
                    ("c", 0.0, 3e-3, Some("C")),
                ],
                vec![
                    vec![0.0, 10.0, 20.0, 30.0],
                    vec![10.0, 0.0, 10.0, 20.0],
                    vec![20.0, 10.0, 0.0, 10.0],
                    vec![30.0, 20.0, 10.0, 0.0],
                ],
                Some(&["s", "a", "b", "c"]),
            )
        };
        let corpus = Corpus::new(vec![mk("r1"), mk("r2"), mk("r3"), mk("r4")]).unwrap();
        let grid = [WeightConfig::scalar(0.5, MetricChoice::TravelTime).unwrap()];
        let result = cross_validate(&corpus, &grid, 2, 3, &PredictorConfig::default()).unwrap();
        assert!((result.fold_scores[0][0] - result.fold_scores[0][1]).abs() < 1e-12);
    }

    #[test]
    fn folds_partition_the_corpus() {
        let corpus = tiny_corpus();
        let folds = assign_folds(&corpus, 3, 11).unwrap();
        let mut seen = vec![false; corpus.len()];
        for fold in &folds {
            for &i in fold {
                assert!(!seen[i], "route in two folds");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        // Stratification: every fold has routes of every station.
        for fold in &folds {
            let stations: std::collections::BTreeSet<_> = fold
                .iter()
                .map(|&i| corpus.routes()[i].station().clone())
                .collect();
            assert_eq!(stations.len(), corpus.stations().len());
        }
    }

    #[test]
    fn default_grid_covers_the_reference_weights() {
        let grid = unit_grid(10);
        assert_eq!(grid.len(), 11);
        assert!(grid.contains(&0.2));
        assert!(grid.contains(&0.8));
        assert!(grid.contains(&1.0));
        assert!(grid.contains(&0.0));
    }

    #[test]
    fn insufficient_station_data_is_reported() {
        let corpus = tiny_corpus();
        assert!(matches!(
            assign_folds(&corpus, 9, 1),
            Err(ExperimentError::InsufficientData { .. })
        ));
        assert!(matches!(
            assign_folds(&corpus, 1, 1),
            Err(ExperimentError::BadFoldCount { .. })
        ));
    }

    #[test]
    fn structured_weights_reproduce_the_scalar_sweep_point() {
        let corpus = tiny_corpus();
        let config = PredictorConfig::default();
        for omega in [0.3, 0.9] {
            let scalar = [WeightConfig::scalar(omega, MetricChoice::TravelTime).unwrap()];
            let structured =
                [
                    WeightConfig::structured(omega, omega, omega, MetricChoice::TravelTime)
                        .unwrap(),
                ];
            let a = cross_validate(&corpus, &scalar, 2, 7, &config).unwrap();
            let b = cross_validate(&corpus, &structured, 2, 7, &config).unwrap();
            assert_eq!(a.performances[0], b.performances[0]);
        }
    }

    #[test]
    fn hypothetical_run_has_zero_zone_deviation() {
        let corpus = tiny_corpus();
        let score = hypothetical_oracle_run(&corpus, &PredictorConfig::default()).unwrap();
        for report in &score.per_route {
            assert_eq!(report.sd_zone, 0.0, "route {}", report.route_id);
        }
    }

    #[test]
    fn single_stop_zones_make_the_oracle_run_perfect() {
        // One stop per zone: the zone order fixes the whole stop order.
        let corpus = generate(&GeneratorConfig {
            station_count: 1,
            zones_per_station: 5,
            stops_per_zone: (1, 1),
            routes_per_station: 4,
            habit_strength: 1.0,
            within_zone_policy: WithinZonePolicy::ShortestPath,
            noise_level: 0.0,
            zone_coverage: (1.0, 1.0),
            noise_seed: 2,
        })
        .unwrap();
        let score = hypothetical_oracle_run(&corpus, &PredictorConfig::default()).unwrap();
        assert_eq!(score.performance, 0.0);
    }

    #[test]
    fn benchmark_table_driver_row_is_all_zero() {
        let corpus = tiny_corpus();
        let split = crate::ingest::split_corpus(&corpus, 0.25, 3).unwrap();
        let models = learn_models(&split.train).unwrap();
        let weights = WeightConfig::scalar(0.9, MetricChoice::TravelTime).unwrap();
        let table =
            benchmark_table(&split.test, &models, &weights, &PredictorConfig::default()).unwrap();
        assert_eq!(table.rows.len(), 5);
        let driver = table.row(MODEL_DRIVER).unwrap();
        assert_eq!(driver.sd_zone, 0.0);
        assert_eq!(driver.sd_stop, 0.0);
        assert_eq!(driver.erp_ratio, 0.0);
        assert_eq!(driver.performance, 0.0);
        assert!(driver.time_seconds > 0.0);
        let hypothetical = table.row(MODEL_LGOL_HYPOTHETICAL).unwrap();
        assert_eq!(hypothetical.sd_zone, 0.0);
    }
}
