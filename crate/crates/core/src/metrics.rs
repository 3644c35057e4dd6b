//! Route-prediction scores: sequence deviation, insert/delete edit counts,
//! normalized-travel-time penalties, the combined per-route score, and the
//! corpus-level mean.

use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;

use crate::domain::{Route, StopId, ZoneId};
use crate::matrix::SquareMatrix;
use crate::scalar::Scalar;
use crate::zones::{self, ZoneError};
use crate::Float;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("sequences are not permutations of the same elements ({reason})")]
    NotPermutation { reason: &'static str },
    #[error("route {route_id} has no actual sequence to score against")]
    MissingActualSequence { route_id: String },
    #[error("no reports to aggregate")]
    EmptyInput,
    #[error(transparent)]
    Zone(#[from] ZoneError),
}

fn check_permutations<T: Eq + Hash>(actual: &[T], predicted: &[T]) -> Result<(), MetricError> {
    if actual.len() != predicted.len() {
        return Err(MetricError::NotPermutation {
            reason: "different lengths",
        });
    }
    if actual.is_empty() {
        return Err(MetricError::NotPermutation {
            reason: "empty sequences",
        });
    }
    if actual[0] != predicted[0] {
        return Err(MetricError::NotPermutation {
            reason: "different first elements",
        });
    }
    let mut positions: HashMap<&T, usize> = HashMap::with_capacity(actual.len());
    for item in actual {
        if positions.insert(item, 0).is_some() {
            return Err(MetricError::NotPermutation {
                reason: "repeated element",
            });
        }
    }
    for item in predicted {
        if positions.remove(item).is_none() {
            return Err(MetricError::NotPermutation {
                reason: "element missing from actual",
            });
        }
    }
    Ok(())
}

/// Positional sequence deviation between two permutations sharing their
/// first element.
///
/// Maps each predicted element to its position in the realized order and
/// sums the pairwise position jumps minus one, scaled by `2 / (n (n - 1))`
/// where `n` is the sequence length without the shared anchor. Sequences
/// with `n < 2` return 0 by convention (see [`sd_is_degenerate`]).
pub fn sequence_deviation<T: Eq + Hash>(
    actual: &[T],
    predicted: &[T],
) -> Result<Float, MetricError> {
    check_permutations(actual, predicted)?;
    let n = actual.len() - 1;
    if n < 2 {
        return Ok(0.0);
    }
    let positions: HashMap<&T, usize> = actual
        .iter()
        .enumerate()
        .map(|(i, item)| (item, i))
        .collect();
    let a: Vec<Float> = predicted
        .iter()
        .map(|item| positions[item] as Float)
        .collect();
    let sum: Float = a.windows(2).map(|w| (w[1] - w[0]).abs() - 1.0).sum();
    Ok(2.0 / (n as Float * (n - 1) as Float) * sum)
}

/// Whether a sequence of this length fell back to the short-sequence zero
/// convention of [`sequence_deviation`].
pub fn sd_is_degenerate(len: usize) -> bool {
    len < 3
}

fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut dp = vec![0usize; b.len() + 1];
    for x in a {
        let mut prev_diag = 0;
        for (j, y) in b.iter().enumerate() {
            let keep = dp[j + 1];
            dp[j + 1] = if x == y {
                prev_diag + 1
            } else {
                dp[j + 1].max(dp[j])
            };
            prev_diag = keep;
        }
    }
    dp[b.len()]
}

/// Minimal number of insertions plus deletions transforming one sequence
/// into the other: `2 * (len - LCS)`. Substitutions are not allowed.
pub fn erp_edit<T: Eq + Hash>(actual: &[T], predicted: &[T]) -> Result<usize, MetricError> {
    check_permutations(actual, predicted)?;
    Ok(2 * (actual.len() - lcs_len(actual, predicted)))
}

/// Positionwise sum of standardized, min-shifted travel times between the
/// paired stops of two equal-length sequences, over node indices into `tt`.
///
/// The standardization statistics (population mean and deviation) and the
/// shift minimum range over all ordered stop pairs of the route, diagonal
/// included. A zero-deviation matrix makes every term 0 by convention; the
/// second return flags that case.
pub fn erp_norm<S: Scalar>(
    actual: &[usize],
    predicted: &[usize],
    tt: &SquareMatrix<S>,
) -> Result<(S, bool), MetricError> {
    if actual.len() != predicted.len() {
        return Err(MetricError::NotPermutation {
            reason: "different lengths",
        });
    }
    let n = tt.n();
    let count = S::from_usize_lossy(n * n);
    let mean = tt.entries().fold(S::zero(), |acc, v| acc + v) / count;
    let var = tt
        .entries()
        .fold(S::zero(), |acc, v| acc + (v - mean) * (v - mean))
        / count;
    let std = var.sqrt();
    if std == S::zero() {
        return Ok((S::zero(), true));
    }
    let min_t = tt
        .entries()
        .fold(S::infinity(), |acc, v| if v < acc { v } else { acc });
    let min_y = (min_t - mean) / std;
    let total = actual
        .iter()
        .zip(predicted)
        .fold(S::zero(), |acc, (&a, &b)| {
            let y = (tt.get(a, b) - mean) / std;
            acc + (y - min_y)
        });
    Ok((total, false))
}

/// Convention fallbacks taken while scoring one route.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MetricFlags {
    /// Too few stops for the stop-level deviation formula.
    pub sd_stop_degenerate: bool,
    /// Too few zones for the zone-level deviation formula.
    pub sd_zone_degenerate: bool,
    /// All travel times equal; normalized-time terms forced to 0.
    pub zero_variance: bool,
}

/// All scores of one predicted route.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub route_id: String,
    pub sd_stop: Float,
    pub sd_zone: Float,
    pub erp_edit: usize,
    pub erp_norm: Float,
    /// Average additional travel time per edit; undefined for a perfect
    /// prediction.
    pub erp_ratio: Option<Float>,
    pub route_score: Float,
    /// Realized travel time along the prediction, without the return leg.
    pub travel_time_seconds: Float,
    pub flags: MetricFlags,
}

/// Scores a predicted stop order against the route's realized sequence.
pub fn evaluate_route(
    route: &Route,
    predicted: &[StopId],
) -> Result<EvaluationReport, MetricError> {
    let actual = route
        .actual_sequence()
        .ok_or_else(|| MetricError::MissingActualSequence {
            route_id: route.route_id().to_owned(),
        })?;

    let sd_stop = sequence_deviation(actual, predicted)?;

    // Zone-level deviation: project both sequences onto unique zones and
    // anchor them at the station (represented as None).
    let actual_zones = zones::stop_zones_in_order(route, actual)?;
    let predicted_zones = zones::stop_zones_in_order(route, predicted)?;
    let actual_zone_seq = zones::reduce_zone_runs(&actual_zones)?;
    let predicted_zone_seq = zones::reduce_zone_runs(&predicted_zones)?;
    let anchored = |seq: &[ZoneId]| -> Vec<Option<ZoneId>> {
        std::iter::once(None)
            .chain(seq.iter().cloned().map(Some))
            .collect()
    };
    let sd_zone = sequence_deviation(&anchored(&actual_zone_seq), &anchored(&predicted_zone_seq))?;

    let edit = erp_edit(actual, predicted)?;

    let to_indices = |seq: &[StopId]| -> Vec<usize> {
        seq.iter()
            .map(|id| route.stop_index(id).expect("permutation checked above"))
            .collect()
    };
    let (norm, zero_variance) = erp_norm(
        &to_indices(actual),
        &to_indices(predicted),
        route.travel_times(),
    )?;

    let (route_score, erp_ratio) = if edit > 0 {
        (sd_stop * norm / edit as Float, Some(norm / edit as Float))
    } else {
        (0.0, None)
    };

    Ok(EvaluationReport {
        route_id: route.route_id().to_owned(),
        sd_stop,
        sd_zone,
        erp_edit: edit,
        erp_norm: norm,
        erp_ratio,
        route_score,
        travel_time_seconds: route.realized_travel_time(predicted),
        flags: MetricFlags {
            sd_stop_degenerate: sd_is_degenerate(actual.len()),
            sd_zone_degenerate: sd_is_degenerate(actual_zone_seq.len() + 1),
            zero_variance,
        },
    })
}

/// Corpus-level score: the mean per-route score plus the per-route reports.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusScore {
    pub performance: Float,
    pub per_route: Vec<EvaluationReport>,
}

impl CorpusScore {
    /// Mean of a per-route component over the corpus.
    pub fn mean_of(&self, f: impl Fn(&EvaluationReport) -> Float) -> Float {
        if self.per_route.is_empty() {
            return 0.0;
        }
        self.per_route.iter().map(f).sum::<Float>() / self.per_route.len() as Float
    }

    /// Mean ERP ratio over the routes where it is defined, 0 if none.
    pub fn mean_erp_ratio(&self) -> Float {
        let defined: Vec<Float> = self.per_route.iter().filter_map(|r| r.erp_ratio).collect();
        if defined.is_empty() {
            return 0.0;
        }
        defined.iter().sum::<Float>() / defined.len() as Float
    }
}

/// Averages route scores into the corpus performance.
pub fn corpus_performance(reports: Vec<EvaluationReport>) -> Result<CorpusScore, MetricError> {
    if reports.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let performance = reports.iter().map(|r| r.route_score).sum::<Float>() / reports.len() as Float;
    Ok(CorpusScore {
        performance,
        per_route: reports,
    })
}
