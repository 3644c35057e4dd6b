//! Learn-global / optimize-local route prediction for last-mile delivery.
//!
//! The pipeline learns zone-transition preferences from realized routes,
//! predicts the zone sequence of a new route as a TSP over a cost matrix
//! blending historical transition probabilities with inter-zone distances,
//! and then orders the stops inside each zone with a chain of open TSPs.
//! Evaluation, benchmark predictors, a cross-validation harness, and a
//! synthetic corpus generator round out the toolkit.
//!
//! Numeric kernels (matrices, solvers, metric formulas) are generic over
//! [`Scalar`]; the route pipeline itself runs on [`Float`].

pub mod baseline;
pub mod cost;
pub mod domain;
pub mod experiment;
pub mod geojson;
pub mod ingest;
pub mod matrix;
pub mod metrics;
pub mod predict;
pub mod scalar;
pub mod synth;
pub mod tsp;
pub mod zones;

pub use scalar::Scalar;

/// Scalar type used by the concrete route pipeline.
pub type Float = f64;

/// Travel times between the stops of one route, in seconds.
pub type TravelTimeMatrix = matrix::SquareMatrix<Float>;
