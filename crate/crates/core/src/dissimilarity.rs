//! Per-frame representational dissimilarity matrices.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{default_labels, ActivityDataset, DistanceMatrix, RdmMovie};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissimilarityMeasure {
    Euclidean,
    /// Not a metric; provided because classical MDS consumes squared distances.
    SquaredEuclidean,
    /// `1 − Pearson r` between raw pattern rows.
    Correlation,
    /// `1 − cosine similarity`.
    Cosine,
}

impl DissimilarityMeasure {
    pub fn name(self) -> &'static str {
        match self {
            DissimilarityMeasure::Euclidean => "euclidean",
            DissimilarityMeasure::SquaredEuclidean => "squared_euclidean",
            DissimilarityMeasure::Correlation => "correlation",
            DissimilarityMeasure::Cosine => "cosine",
        }
    }

    pub fn is_metric(self) -> bool {
        !matches!(self, DissimilarityMeasure::SquaredEuclidean)
    }
}

impl fmt::Display for DissimilarityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DissimilarityMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "squared_euclidean" => Ok(Self::SquaredEuclidean),
            "correlation" => Ok(Self::Correlation),
            "cosine" => Ok(Self::Cosine),
            other => Err(Error::InvalidParameter(format!("unknown dissimilarity measure {other:?}"))),
        }
    }
}

/// RDM of the rows of `patterns` (conditions × channels), labelled `0..n`.
pub fn compute_rdm(patterns: &DMatrix<f64>, measure: DissimilarityMeasure) -> Result<DistanceMatrix> {
    compute_rdm_with_labels(patterns, measure, default_labels(patterns.nrows()))
}

pub fn compute_rdm_with_labels(
    patterns: &DMatrix<f64>,
    measure: DissimilarityMeasure,
    labels: Vec<String>,
) -> Result<DistanceMatrix> {
    let n = patterns.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!("{} labels for {n} patterns", labels.len())));
    }
    if patterns.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("patterns contain non-finite values".into()));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| patterns.row(i).iter().copied().collect()).collect();
    let prepared = prepare_rows(&rows, measure)?;
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = pair_dissimilarity(&prepared[i], &prepared[j], measure);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(DistanceMatrix::from_parts_unchecked(d, labels))
}

/// Row data after the measure's preprocessing (mean removal for correlation)
/// together with its squared norm.
struct Prepared {
    values: Vec<f64>,
    sq_norm: f64,
}

fn prepare_rows(rows: &[Vec<f64>], measure: DissimilarityMeasure) -> Result<Vec<Prepared>> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let values = match measure {
                DissimilarityMeasure::Correlation => {
                    let m = row.iter().sum::<f64>() / row.len() as f64;
                    row.iter().map(|v| v - m).collect()
                }
                _ => row.clone(),
            };
            let sq_norm: f64 = values.iter().map(|v| v * v).sum();
            let needs_norm =
                matches!(measure, DissimilarityMeasure::Correlation | DissimilarityMeasure::Cosine);
            if needs_norm && sq_norm == 0.0 {
                return Err(Error::DegenerateRow { row: i, measure: measure.name(), frame: None });
            }
            Ok(Prepared { values, sq_norm })
        })
        .collect()
}

fn pair_dissimilarity(a: &Prepared, b: &Prepared, measure: DissimilarityMeasure) -> f64 {
    match measure {
        DissimilarityMeasure::Euclidean | DissimilarityMeasure::SquaredEuclidean => {
            let ss: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
            if measure == DissimilarityMeasure::Euclidean {
                ss.sqrt()
            } else {
                ss
            }
        }
        DissimilarityMeasure::Correlation | DissimilarityMeasure::Cosine => {
            let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
            let sim = (dot / (a.sq_norm * b.sq_norm).sqrt()).clamp(-1.0, 1.0);
            1.0 - sim
        }
    }
}

/// One RDM per dataset frame, in frame order.
pub fn compute_rdm_movie(ds: &ActivityDataset, measure: DissimilarityMeasure) -> Result<RdmMovie> {
    let labels = ds.condition_labels().to_vec();
    let results: Vec<Result<DistanceMatrix>> = (0..ds.n_frames())
        .into_par_iter()
        .map(|f| {
            compute_rdm_with_labels(&ds.frame(f), measure, labels.clone()).map_err(|e| match e {
                Error::DegenerateRow { row, measure, .. } => {
                    Error::DegenerateRow { row, measure, frame: Some(f) }
                }
                other => other,
            })
        })
        .collect();
    let frames = results.into_iter().collect::<Result<Vec<_>>>()?;
    RdmMovie::new(frames, ds.frame_times().to_vec())
}
