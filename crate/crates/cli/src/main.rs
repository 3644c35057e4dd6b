//! `lgol`: learn zone preferences from historical routes, predict stop
//! sequences for new ones, and reproduce the evaluation experiments.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lgol_core::cost::{MetricChoice, WeightConfig};
use lgol_core::experiment::{
    benchmark_table, learn_models, omega_l_sensitivity, omega_sweep, predict_corpus,
    station_weight_grid, unit_grid, ModelSet, SweepResult,
};
use lgol_core::geojson::predicted_sequence_geojson;
use lgol_core::ingest::{
    load_corpus_dir, read_json, read_predictions, split_corpus, write_corpus, write_json, Corpus,
    LoadedCorpus,
};
use lgol_core::metrics::evaluate_route;
use lgol_core::predict::PredictorConfig;
use lgol_core::synth::{generate, GeneratorConfig, WithinZonePolicy};
use lgol_core::zones::CountMatrix;

#[derive(Parser)]
#[command(
    name = "lgol",
    version,
    about = "Zone-level route learning and stop-sequence prediction"
)]
struct Cli {
    /// Worker threads for per-route prediction (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus in the standard three-file layout.
    Generate(GenerateArgs),
    /// Learn one zone-transition count matrix per station.
    Learn(LearnArgs),
    /// Predict stop sequences for a corpus of routes.
    Predict(PredictArgs),
    /// Score predictions against realized sequences.
    Score(ScoreArgs),
    /// Cross-validated sweep of the scalar weight.
    Cv(CvArgs),
    /// Cross-validated grid over the station/zone weights.
    Contour(ContourArgs),
    /// Benchmark table: reference predictors vs the learned pipeline.
    Bench(BenchArgs),
    /// Export a predicted route as GeoJSON.
    ExportGeojson(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum MetricArg {
    Euclid,
    Traveltime,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SweepMetricArg {
    Euclid,
    Traveltime,
    Both,
}

impl From<MetricArg> for MetricChoice {
    fn from(value: MetricArg) -> Self {
        match value {
            MetricArg::Euclid => MetricChoice::Euclidean,
            MetricArg::Traveltime => MetricChoice::TravelTime,
        }
    }
}

/// Cost-blend weights: one scalar, or the structured station/zone/return
/// triple. The structured flags conflict with `--omega`; unset structured
/// components fall back to (0.2, 0.8, 1).
#[derive(Args, Serialize)]
struct WeightArgs {
    /// Scalar blend weight (default mode, 0.9).
    #[arg(long, conflicts_with_all = ["omega_f", "omega_z", "omega_l"])]
    omega: Option<f64>,
    /// Station-to-first-zone weight (structured mode).
    #[arg(long)]
    omega_f: Option<f64>,
    /// Zone-to-zone weight (structured mode).
    #[arg(long)]
    omega_z: Option<f64>,
    /// Zone-to-station weight (structured mode).
    #[arg(long)]
    omega_l: Option<f64>,
    /// Distance backend of the zone cost matrix.
    #[arg(long, value_enum, default_value_t = MetricArg::Traveltime)]
    metric: MetricArg,
}

impl WeightArgs {
    fn resolve(&self) -> Result<WeightConfig> {
        let metric = self.metric.into();
        let config = if self.omega_f.is_some() || self.omega_z.is_some() || self.omega_l.is_some() {
            WeightConfig::structured(
                self.omega_f.unwrap_or(0.2),
                self.omega_z.unwrap_or(0.8),
                self.omega_l.unwrap_or(1.0),
                metric,
            )
        } else {
            WeightConfig::scalar(self.omega.unwrap_or(0.9), metric)
        };
        config.context("invalid weight configuration")
    }
}

#[derive(Args, Serialize)]
struct SolverArgs {
    /// Instance size up to which tours and paths are solved exactly.
    #[arg(long, default_value_t = 16)]
    exact_threshold: usize,
    /// Cost backend of the within-zone paths.
    #[arg(long, value_enum, default_value_t = MetricArg::Traveltime)]
    local_metric: MetricArg,
}

impl SolverArgs {
    fn resolve(&self) -> PredictorConfig {
        PredictorConfig {
            exact_threshold: self.exact_threshold,
            local_metric: self.local_metric.into(),
        }
    }
}

#[derive(Args, Serialize)]
struct GenerateArgs {
    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    stations: usize,
    #[arg(long, default_value_t = 8)]
    zones: usize,
    #[arg(long, default_value_t = 50)]
    routes: usize,
    #[arg(long, default_value_t = 2)]
    stops_min: usize,
    #[arg(long, default_value_t = 4)]
    stops_max: usize,
    /// Probability a route follows the station's preferred permutation.
    #[arg(long, default_value_t = 0.8)]
    habit: f64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Shortest)]
    policy: PolicyArg,
    /// Travel-time noise fraction.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0.6)]
    coverage_min: f64,
    #[arg(long, default_value_t = 1.0)]
    coverage_max: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum PolicyArg {
    Shortest,
    Random,
}

#[derive(Args, Serialize)]
struct LearnArgs {
    /// Corpus directory (route_data, actual_sequences, travel_times).
    #[arg(long = "in")]
    input: PathBuf,
    /// Model output directory; one JSON per station.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    /// Model directory produced by `learn`.
    #[arg(long)]
    model: PathBuf,
    /// Corpus directory with the routes to predict.
    #[arg(long)]
    routes: PathBuf,
    /// Output predictions file.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Serialize)]
struct ScoreArgs {
    /// Predictions file from `predict`.
    #[arg(long)]
    pred: PathBuf,
    /// Corpus directory with the realized sequences.
    #[arg(long)]
    actual: PathBuf,
    /// Output prefix; writes <prefix>.csv and <prefix>.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct CvArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Backends to sweep.
    #[arg(long, value_enum, default_value_t = SweepMetricArg::Both)]
    metric: SweepMetricArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output prefix; writes <prefix>.csv and <prefix>.json.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Serialize)]
struct ContourArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Fixed zone-to-station weight of the grid.
    #[arg(long, default_value_t = 1.0)]
    omega_l: f64,
    /// Grid resolution: steps per unit interval.
    #[arg(long, default_value_t = 10)]
    steps: usize,
    /// Also sweep the zone-to-station weight at near-optimal pairs.
    #[arg(long)]
    l_sweep: bool,
    #[arg(long, value_enum, default_value_t = MetricArg::Traveltime)]
    metric: MetricArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Serialize)]
struct BenchArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Serialize)]
struct ExportArgs {
    /// Corpus directory with the routes.
    #[arg(long)]
    routes: PathBuf,
    /// Predictions file from `predict`.
    #[arg(long)]
    pred: PathBuf,
    /// Route to export; all routes when omitted.
    #[arg(long)]
    route_id: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

/// Provenance record written alongside every output artifact.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    tool_version: &'static str,
    config: serde_json::Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
    seeds: Vec<u64>,
    duration_seconds: f64,
}

fn write_manifest(
    primary_output: &Path,
    config: serde_json::Value,
    inputs: &[&Path],
    outputs: &[&Path],
    seeds: &[u64],
    started: Instant,
) -> Result<()> {
    let manifest = RunManifest {
        command: std::env::args().collect::<Vec<_>>().join(" "),
        tool_version: env!("CARGO_PKG_VERSION"),
        config,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        seeds: seeds.to_vec(),
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    let path = manifest_path(primary_output);
    write_json(&path, &manifest).context("writing run manifest")?;
    Ok(())
}

fn manifest_path(primary_output: &Path) -> PathBuf {
    if primary_output.extension().is_some() {
        primary_output.with_extension("manifest.json")
    } else {
        primary_output.join("manifest.json")
    }
}

fn load_imputed(dir: &Path) -> Result<Corpus> {
    let LoadedCorpus { corpus, rejections } =
        load_corpus_dir(dir).with_context(|| format!("loading corpus from {}", dir.display()))?;
    if !rejections.is_empty() {
        eprintln!("warning: {} route(s) rejected:", rejections.len());
        for r in &rejections {
            eprintln!("  {}: {}", r.route_id, r.reason);
        }
    }
    if corpus.is_empty() {
        bail!("corpus at {} contains no usable routes", dir.display());
    }
    Ok(corpus.imputed()?)
}

fn load_models(dir: &Path) -> Result<ModelSet> {
    let mut counts = Vec::new();
    let entries =
        std::fs::read_dir(dir).with_context(|| format!("reading model dir {}", dir.display()))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension().map(|x| x == "json").unwrap_or(false)
                && p.file_name().map(|n| n != "manifest.json").unwrap_or(true)
        })
        .collect();
    paths.sort();
    for path in paths {
        let matrix: CountMatrix = read_json(&path)?;
        counts.push(matrix);
    }
    if counts.is_empty() {
        bail!("no model files found in {}", dir.display());
    }
    Ok(ModelSet::from_counts(counts))
}

fn sweep_outputs(result: &SweepResult, out: &Path) -> Result<()> {
    let csv_path = out.with_extension("csv");
    std::fs::write(&csv_path, result.to_csv())
        .with_context(|| format!("writing {}", csv_path.display()))?;
    let json_path = out.with_extension("json");
    write_json(&json_path, result)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .context("initializing worker pool")?;
    }
    let started = Instant::now();

    match cli.command {
        Command::Generate(args) => {
            let config = GeneratorConfig {
                station_count: args.stations,
                zones_per_station: args.zones,
                stops_per_zone: (args.stops_min, args.stops_max),
                routes_per_station: args.routes,
                habit_strength: args.habit,
                within_zone_policy: match args.policy {
                    PolicyArg::Shortest => WithinZonePolicy::ShortestPath,
                    PolicyArg::Random => WithinZonePolicy::Random,
                },
                noise_level: args.noise,
                zone_coverage: (args.coverage_min, args.coverage_max),
                noise_seed: args.seed,
            };
            let corpus = generate(&config)?;
            write_corpus(&corpus, &args.out)?;
            println!(
                "generated {} routes over {} stations into {}",
                corpus.len(),
                corpus.stations().len(),
                args.out.display()
            );
            write_manifest(
                &args.out,
                serde_json::to_value(&args)?,
                &[],
                &[&args.out],
                &[args.seed],
                started,
            )
        }
        Command::Learn(args) => {
            let corpus = load_imputed(&args.input)?;
            let models = learn_models(&corpus)?;
            std::fs::create_dir_all(&args.out)
                .with_context(|| format!("creating {}", args.out.display()))?;
            let mut outputs = Vec::new();
            for counts in models.counts() {
                let path = args.out.join(format!("{}.json", counts.station()));
                write_json(&path, counts)?;
                outputs.push(path);
            }
            println!(
                "learned {} station model(s) from {} routes into {}",
                outputs.len(),
                corpus.len(),
                args.out.display()
            );
            let output_refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
            write_manifest(
                &args.out,
                serde_json::to_value(&args)?,
                &[&args.input],
                &output_refs,
                &[],
                started,
            )
        }
        Command::Predict(args) => {
            let corpus = load_imputed(&args.routes)?;
            let models = load_models(&args.model)?;
            let weights = args.weights.resolve()?;
            let config = args.solver.resolve();
            let predictions = predict_corpus(&corpus, &models, &weights, &config)?;
            let map = predictions
                .into_iter()
                .map(|p| (p.route_id.clone(), p))
                .collect();
            lgol_core::ingest::write_predictions(&corpus, &map, &args.out)?;
            println!(
                "predicted {} route(s) into {}",
                map.len(),
                args.out.display()
            );
            write_manifest(
                &args.out,
                serde_json::json!({
                    "weights": args.weights,
                    "solver": args.solver,
                }),
                &[&args.model, &args.routes],
                &[&args.out],
                &[],
                started,
            )
        }
        Command::Score(args) => {
            let corpus = load_imputed(&args.actual)?;
            let predictions = read_predictions(&args.pred)?;
            let mut reports = Vec::new();
            for (route_id, stop_order) in &predictions {
                let route = corpus
                    .route(route_id)
                    .with_context(|| format!("prediction for unknown route {route_id}"))?;
                reports.push(evaluate_route(route, stop_order)?);
            }
            let score = lgol_core::metrics::corpus_performance(reports)?;

            let mut csv = String::from(
                "route_id,sd_zone,sd_stop,erp_edit,erp_norm,erp_ratio,time_s,route_score\n",
            );
            for r in &score.per_route {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.route_id,
                    r.sd_zone,
                    r.sd_stop,
                    r.erp_edit,
                    r.erp_norm,
                    r.erp_ratio.map(|v| v.to_string()).unwrap_or_default(),
                    r.travel_time_seconds,
                    r.route_score
                ));
            }
            let csv_path = args.out.with_extension("csv");
            std::fs::write(&csv_path, csv)
                .with_context(|| format!("writing {}", csv_path.display()))?;
            let json_path = args.out.with_extension("json");
            write_json(&json_path, &score)?;
            println!(
                "Performance {:.6} over {} route(s)",
                score.performance,
                score.per_route.len()
            );
            write_manifest(
                &json_path,
                serde_json::to_value(&args)?,
                &[&args.pred, &args.actual],
                &[&csv_path, &json_path],
                &[],
                started,
            )
        }
        Command::Cv(args) => {
            let corpus = load_imputed(&args.input)?;
            let config = args.solver.resolve();
            let metrics: Vec<MetricChoice> = match args.metric {
                SweepMetricArg::Euclid => vec![MetricChoice::Euclidean],
                SweepMetricArg::Traveltime => vec![MetricChoice::TravelTime],
                SweepMetricArg::Both => {
                    vec![MetricChoice::Euclidean, MetricChoice::TravelTime]
                }
            };
            let mut combined: Option<SweepResult> = None;
            for metric in metrics {
                let sweep = omega_sweep(&corpus, metric, args.k, args.seed, &config)?;
                combined = Some(match combined {
                    None => sweep,
                    Some(mut acc) => {
                        acc.grid.extend(sweep.grid);
                        acc.performances.extend(sweep.performances);
                        acc.fold_scores.extend(sweep.fold_scores);
                        acc
                    }
                });
            }
            let result = combined.expect("at least one backend");
            sweep_outputs(&result, &args.out)?;
            if let Some((best, perf)) = result.best() {
                println!("best grid point: {best:?} at Performance {perf:.6}");
            }
            write_manifest(
                &args.out.with_extension("json"),
                serde_json::to_value(&args)?,
                &[&args.input],
                &[
                    &args.out.with_extension("csv"),
                    &args.out.with_extension("json"),
                ],
                &[args.seed],
                started,
            )
        }
        Command::Contour(args) => {
            let corpus = load_imputed(&args.input)?;
            let config = args.solver.resolve();
            let grid = unit_grid(args.steps);
            let mut result = station_weight_grid(
                &corpus,
                &grid,
                &grid,
                args.omega_l,
                args.metric.into(),
                args.k,
                args.seed,
                &config,
            )?;
            if args.l_sweep {
                let pairs = [(0.1, 0.7), (0.1, 0.8), (0.2, 0.7), (0.2, 0.8)];
                let l_result = omega_l_sensitivity(
                    &corpus,
                    &pairs,
                    &grid,
                    args.metric.into(),
                    args.k,
                    args.seed,
                    &config,
                )?;
                result.grid.extend(l_result.grid);
                result.performances.extend(l_result.performances);
                result.fold_scores.extend(l_result.fold_scores);
            }
            sweep_outputs(&result, &args.out)?;
            if let Some((best, perf)) = result.best() {
                println!("best grid point: {best:?} at Performance {perf:.6}");
            }
            write_manifest(
                &args.out.with_extension("json"),
                serde_json::to_value(&args)?,
                &[&args.input],
                &[
                    &args.out.with_extension("csv"),
                    &args.out.with_extension("json"),
                ],
                &[args.seed],
                started,
            )
        }
        Command::Bench(args) => {
            let corpus = load_imputed(&args.input)?;
            let split = split_corpus(&corpus, args.test_fraction, args.seed)?;
            let models = learn_models(&split.train)?;
            let weights = args.weights.resolve()?;
            let config = args.solver.resolve();
            let table = benchmark_table(&split.test, &models, &weights, &config)?;
            print!("{table}");
            let csv_path = args.out.with_extension("csv");
            std::fs::write(&csv_path, table.to_csv())
                .with_context(|| format!("writing {}", csv_path.display()))?;
            let json_path = args.out.with_extension("json");
            write_json(&json_path, &table)?;
            write_manifest(
                &json_path,
                serde_json::to_value(&args)?,
                &[&args.input],
                &[&csv_path, &json_path],
                &[args.seed],
                started,
            )
        }
        Command::ExportGeojson(args) => {
            let corpus = load_imputed(&args.routes)?;
            let predictions = read_predictions(&args.pred)?;
            let mut features = Vec::new();
            for (route_id, stop_order) in &predictions {
                if let Some(only) = &args.route_id {
                    if only != route_id {
                        continue;
                    }
                }
                let route = corpus
                    .route(route_id)
                    .with_context(|| format!("prediction for unknown route {route_id}"))?;
                let zones = lgol_core::zones::stop_zones_in_order(route, stop_order)?;
                let zone_order = lgol_core::zones::to_zone_sequence(route.station(), &zones)?;
                let predicted = lgol_core::predict::PredictedSequence {
                    route_id: route_id.clone(),
                    stop_order: stop_order.clone(),
                    zone_order,
                    trace: Default::default(),
                };
                let collection = predicted_sequence_geojson(route, &predicted);
                features.extend(
                    collection["features"]
                        .as_array()
                        .cloned()
                        .unwrap_or_default(),
                );
            }
            if features.is_empty() {
                bail!("no matching routes to export");
            }
            let out = serde_json::json!({
                "type": "FeatureCollection",
                "features": features,
            });
            write_json(&args.out, &out)?;
            println!("wrote {}", args.out.display());
            write_manifest(
                &args.out,
                serde_json::to_value(&args)?,
                &[&args.routes, &args.pred],
                &[&args.out],
                &[],
                started,
            )
        }
    }
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::ExitCode::from(1)
        }
    }
}
