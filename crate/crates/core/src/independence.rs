//! Distance covariance, distance correlation and the adaptive multi-threshold
//! permutation test of independence.
//!
//! The adaptive statistic transforms both distance matrices with a family of
//! threshold bands, computes the distance correlation under each band and
//! aggregates (max by default). The permutation test recomputes the whole
//! aggregate for every permutation, so the multiplicity of the grid is
//! absorbed by the null distribution.

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DistanceMatrix;
use crate::dissimilarity::{compute_rdm, DissimilarityMeasure};
use crate::error::{Error, Result};
use crate::rng::SeedSpec;
use crate::transform::{transform_rdm, RampShape, ThresholdBand};

pub const MIN_SAMPLE_SIZE: usize = 4;

/// Two variables observed on the same `n` units.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl PairedSample {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "x has {} rows, y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.nrows() < MIN_SAMPLE_SIZE {
            return Err(Error::InvalidParameter(format!(
                "paired sample needs at least {MIN_SAMPLE_SIZE} observations, got {}",
                x.nrows()
            )));
        }
        if x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::Shape("paired sample variables need at least one column".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("paired sample contains non-finite values".into()));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn distance_matrices(&self, measure: DissimilarityMeasure) -> Result<(DistanceMatrix, DistanceMatrix)> {
        Ok((compute_rdm(&self.x, measure)?, compute_rdm(&self.y, measure)?))
    }
}

/// `A_ij = d_ij − mean_i − mean_j + grand mean`.
pub fn double_center(dm: &DistanceMatrix) -> DMatrix<f64> {
    let d = dm.matrix();
    let n = d.nrows();
    let row_means: Vec<f64> = (0..n).map(|i| d.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    // d is symmetric, so column means equal row means
    DMatrix::from_fn(n, n, |i, j| d[(i, j)] - row_means[i] - row_means[j] + grand)
}

fn centered_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows() as f64;
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>() / (n * n)
}

/// Squared distance covariance (V-statistic), clamped at zero.
pub fn distance_covariance(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch(format!("{} vs {} points", a.n(), b.n())));
    }
    Ok(centered_inner(&double_center(a), &double_center(b)).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceCorrelation {
    pub value: f64,
    /// Set when either distance variance is zero; `value` is then 0.
    pub degenerate: bool,
}

fn dcor_from_moments(cov: f64, var_a: f64, var_b: f64) -> DistanceCorrelation {
    if var_a <= 0.0 || var_b <= 0.0 {
        return DistanceCorrelation { value: 0.0, degenerate: true };
    }
    let r2 = cov.max(0.0) / (var_a * var_b).sqrt();
    DistanceCorrelation { value: r2.sqrt().clamp(0.0, 1.0), degenerate: false }
}

/// Distance correlation of two distance matrices over the same points.
pub fn distance_correlation_of(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<DistanceCorrelation> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch(format!("{} vs {} points", a.n(), b.n())));
    }
    let ca = double_center(a);
    let cb = double_center(b);
    Ok(dcor_from_moments(centered_inner(&ca, &cb), centered_inner(&ca, &ca), centered_inner(&cb, &cb)))
}

pub fn distance_correlation(sample: &PairedSample, measure: DissimilarityMeasure) -> Result<DistanceCorrelation> {
    let (a, b) = sample.distance_matrices(measure)?;
    distance_correlation_of(&a, &b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Aggregation::Max),
            "mean" => Ok(Aggregation::Mean),
            other => Err(Error::InvalidParameter(format!("unknown aggregation {other:?}"))),
        }
    }
}

impl Aggregation {
    fn apply(self, values: &[f64]) -> f64 {
        match self {
            Aggregation::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

/// Settings of the adaptive statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub bands: Vec<ThresholdBand>,
    pub shape: RampShape,
    pub aggregation: Aggregation,
    pub measure: DissimilarityMeasure,
}

impl AdaptiveConfig {
    pub fn new(bands: Vec<ThresholdBand>) -> Self {
        Self {
            bands,
            shape: RampShape::Linear,
            aggregation: Aggregation::Max,
            measure: DissimilarityMeasure::Euclidean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStat {
    /// Band bounds as configured (quantile levels or distances).
    pub lower: f64,
    pub upper: f64,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveStatistic {
    pub value: f64,
    pub per_threshold: Vec<ThresholdStat>,
}

/// Per-band centered matrices; thresholds and centering both commute with
/// relabeling, so permutations only re-index `y`'s centered matrix.
struct PreparedBands {
    x_centered: Vec<DMatrix<f64>>,
    y_centered: Vec<DMatrix<f64>>,
    x_var: Vec<f64>,
    y_var: Vec<f64>,
}

impl PreparedBands {
    fn new(sample: &PairedSample, config: &AdaptiveConfig) -> Result<Self> {
        if config.bands.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let (dx, dy) = sample.distance_matrices(config.measure)?;
        let mut out = PreparedBands {
            x_centered: Vec::with_capacity(config.bands.len()),
            y_centered: Vec::with_capacity(config.bands.len()),
            x_var: Vec::new(),
            y_var: Vec::new(),
        };
        for band in &config.bands {
            let tx = transform_rdm(&dx, &band.transform_for(&dx, config.shape)?);
            let ty = transform_rdm(&dy, &band.transform_for(&dy, config.shape)?);
            let cx = double_center(&tx);
            let cy = double_center(&ty);
            out.x_var.push(centered_inner(&cx, &cx));
            out.y_var.push(centered_inner(&cy, &cy));
            out.x_centered.push(cx);
            out.y_centered.push(cy);
        }
        Ok(out)
    }

    /// Per-band distance correlations with `y` relabeled by `perm`
    /// (`None` is the observed pairing).
    fn band_stats(&self, perm: Option<&[usize]>) -> Vec<f64> {
        (0..self.x_centered.len())
            .map(|b| {
                let a = &self.x_centered[b];
                let c = &self.y_centered[b];
                let n = a.nrows();
                let cov = match perm {
                    None => centered_inner(a, c),
                    Some(p) => {
                        let mut s = 0.0;
                        for j in 0..n {
                            for i in 0..n {
                                s += a[(i, j)] * c[(p[i], p[j])];
                            }
                        }
                        s / (n * n) as f64
                    }
                };
                dcor_from_moments(cov, self.x_var[b], self.y_var[b]).value
            })
            .collect()
    }
}

pub fn adaptive_statistic(sample: &PairedSample, config: &AdaptiveConfig) -> Result<AdaptiveStatistic> {
    let prepared = PreparedBands::new(sample, config)?;
    let stats = prepared.band_stats(None);
    Ok(AdaptiveStatistic {
        value: config.aggregation.apply(&stats),
        per_threshold: per_threshold(config, &stats),
    })
}

fn per_threshold(config: &AdaptiveConfig, stats: &[f64]) -> Vec<ThresholdStat> {
    config
        .bands
        .iter()
        .zip(stats)
        .map(|(band, &statistic)| {
            let (lower, upper) = band.bounds();
            ThresholdStat { lower, upper, statistic }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_permutations: usize,
    pub per_threshold_stats: Option<Vec<ThresholdStat>>,
}

/// Relative slack when comparing a permuted statistic to the observed one,
/// so round-off never turns an exact tie into a strict loss.
const TIE_TOLERANCE: f64 = 1e-12;

/// Uniform random permutation of `0..n` drawn from `seed`'s stream.
pub fn random_permutation(n: usize, seed: &SeedSpec) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed.stream());
    perm
}

/// Permutation test: permutation `k` relabels `y` with
/// `random_permutation(n, seed.child(k))`; the p-value uses the add-one
/// estimator `(#{T_k >= T_obs} + 1) / (n_perm + 1)`.
pub fn permutation_test(
    sample: &PairedSample,
    config: &AdaptiveConfig,
    n_perm: usize,
    seed: &SeedSpec,
) -> Result<TestResult> {
    if n_perm == 0 {
        return Err(Error::InvalidParameter("n_perm must be positive".into()));
    }
    let prepared = PreparedBands::new(sample, config)?;
    let observed_bands = prepared.band_stats(None);
    let observed = config.aggregation.apply(&observed_bands);
    let n = sample.n();
    let null: Vec<f64> = (0..n_perm as u64)
        .into_par_iter()
        .map(|k| {
            let perm = random_permutation(n, &seed.child(k));
            config.aggregation.apply(&prepared.band_stats(Some(&perm)))
        })
        .collect();
    let threshold = observed - TIE_TOLERANCE * observed.abs().max(1.0);
    let exceed = null.iter().filter(|&&t| t >= threshold).count();
    Ok(TestResult {
        statistic: observed,
        p_value: (exceed + 1) as f64 / (n_perm + 1) as f64,
        n_permutations: n_perm,
        per_threshold_stats: Some(per_threshold(config, &observed_bands)),
    })
}
