//! Synthetic model zoo and model-selection benchmarks for summary statistics.

use std::collections::HashSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissimilarity::{compute_rdm, DissimilarityMeasure};
use crate::error::{Error, Result};
use crate::rng::{stable_hash, SeedSpec, Stream};
use crate::simcompare::{compare_rdms, linear_cka, svcca, RdmComparator, RepresentationPair, DEFAULT_RIDGE, DEFAULT_VARIANCE_RETAINED};
use crate::transform::{RampShape, ThresholdBand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Tanh,
    Relu,
}

impl Nonlinearity {
    fn apply(self, v: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => v.tanh(),
            Nonlinearity::Relu => v.max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Generator {
    RandomFeatureNet { depth: usize, width: usize, nonlinearity: Nonlinearity },
    /// Condition `i` sits in cluster `i mod k`; centres are the unit basis
    /// vectors of `R^k` and each point is jittered by `spread` per coordinate.
    Clusters { k: usize, spread: f64 },
    /// Unit circle, evenly spaced.
    Ring,
    /// Unit-spaced square lattice filled row by row.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFamily {
    pub family_id: String,
    pub generator: Generator,
    pub noise_sd: f64,
}

impl ModelFamily {
    pub fn new(family_id: impl Into<String>, generator: Generator, noise_sd: f64) -> Result<Self> {
        let f = Self { family_id: family_id.into(), generator, noise_sd };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise_sd must be finite and >= 0, got {}", self.noise_sd)));
        }
        match self.generator {
            Generator::RandomFeatureNet { depth, width, .. } if depth == 0 || width == 0 => {
                Err(Error::InvalidParameter("random_feature_net needs depth >= 1 and width >= 1".into()))
            }
            Generator::Clusters { k, .. } if k < 2 => Err(Error::InvalidParameter("clusters needs k >= 2".into())),
            Generator::Clusters { spread, .. } if !(spread >= 0.0 && spread.is_finite()) => {
                Err(Error::InvalidParameter("clusters spread must be finite and >= 0".into()))
            }
            _ => Ok(()),
        }
    }
}

fn normal(rng: &mut Stream) -> f64 {
    StandardNormal.sample(rng)
}

fn random_rotation(dim: usize, rng: &mut Stream) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |_, _| normal(rng)).qr().q()
}

pub fn generate_representation(family: &ModelFamily, stimuli: &DMatrix<f64>, seed: &SeedSpec) -> Result<DMatrix<f64>> {
    family.validate()?;
    if stimuli.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("stimuli contain non-finite values".into()));
    }
    let n = stimuli.nrows();
    let mut rng = seed.stream();
    let clean = match family.generator {
        Generator::RandomFeatureNet { depth, width, nonlinearity } => {
            let mut h = stimuli.clone();
            for _ in 0..depth {
                let scale = 1.0 / (h.ncols().max(1) as f64).sqrt();
                let w = DMatrix::from_fn(h.ncols(), width, |_, _| normal(&mut rng) * scale);
                let b: Vec<f64> = (0..width).map(|_| normal(&mut rng) * scale).collect();
                let mut z = &h * w;
                for (c, mut col) in z.column_iter_mut().enumerate() {
                    col.apply(|v| *v = nonlinearity.apply(*v + b[c]));
                }
                h = z;
            }
            h
        }
        Generator::Clusters { k, spread } => {
            let pts = DMatrix::from_fn(n, k, |i, c| if i % k == c { 1.0 } else { 0.0 });
            let jitter = DMatrix::from_fn(n, k, |_, _| normal(&mut rng) * spread);
            (pts + jitter) * random_rotation(k, &mut rng)
        }
        Generator::Ring => {
            let pts = DMatrix::from_fn(n, 2, |i, c| {
                let a = 2.0 * PI * i as f64 / n as f64;
                if c == 0 { a.cos() } else { a.sin() }
            });
            pts * random_rotation(2, &mut rng)
        }
        Generator::Grid => {
            let side = (n as f64).sqrt().ceil().max(1.0) as usize;
            let pts = DMatrix::from_fn(n, 2, |i, c| if c == 0 { (i % side) as f64 } else { (i / side) as f64 });
            pts * random_rotation(2, &mut rng)
        }
    };
    if family.noise_sd == 0.0 {
        return Ok(clean);
    }
    let sd = family.noise_sd;
    Ok(clean.map(|v| v + normal(&mut rng) * sd))
}

/// Summary statistic used to score a data representation against a model instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Statistic {
    /// RDM comparison, optionally after a geo-topological transform applied
    /// to both RDMs.
    Rdm {
        comparator: RdmComparator,
        measure: DissimilarityMeasure,
        band: Option<ThresholdBand>,
        shape: RampShape,
    },
    Cka,
    Svcca,
}

impl Statistic {
    pub fn rdm(comparator: RdmComparator) -> Self {
        Statistic::Rdm { comparator, measure: DissimilarityMeasure::Euclidean, band: None, shape: RampShape::Linear }
    }

    pub fn with_band(self, band: ThresholdBand) -> Self {
        match self {
            Statistic::Rdm { comparator, measure, shape, .. } => Statistic::Rdm { comparator, measure, band: Some(band), shape },
            other => other,
        }
    }

    pub fn id(&self) -> String {
        match self {
            Statistic::Rdm { comparator, measure, band, shape } => {
                let mut s = format!("rdm:{}:{}", measure.name(), comparator.name());
                if let Some(b) = band {
                    let (lo, hi) = b.bounds();
                    let kind = match b {
                        ThresholdBand::Absolute { .. } => "abs",
                        ThresholdBand::Quantile { .. } => "q",
                    };
                    s.push_str(&format!(":{kind}[{lo},{hi}]:{}", shape.name()));
                }
                s
            }
            Statistic::Cka => "cka".into(),
            Statistic::Svcca => "svcca".into(),
        }
    }

    /// Similarity of `a` and `b`; larger means more alike.
    pub fn score(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
        match *self {
            Statistic::Rdm { comparator, measure, band, shape } => {
                let mut ra = compute_rdm(a, measure)?;
                let mut rb = compute_rdm(b, measure)?;
                if let Some(band) = band {
                    ra = band.apply(&ra, shape)?;
                    rb = band.apply(&rb, shape)?;
                }
                Ok(comparator.similarity(compare_rdms(&ra, &rb, comparator)?))
            }
            Statistic::Cka => linear_cka(&RepresentationPair::new(a.clone(), b.clone())?),
            Statistic::Svcca => svcca(&RepresentationPair::new(a.clone(), b.clone())?, DEFAULT_VARIANCE_RETAINED, DEFAULT_RIDGE),
        }
    }

    fn thresholds(&self) -> Option<(f64, f64)> {
        match self {
            Statistic::Rdm { band: Some(b), .. } => Some(b.bounds()),
            _ => None,
        }
    }
}

fn check_families(families: &[ModelFamily]) -> Result<()> {
    if families.is_empty() {
        return Err(Error::InvalidParameter("at least one model family is required".into()));
    }
    let mut seen = HashSet::new();
    for f in families {
        f.validate()?;
        if !seen.insert(f.family_id.as_str()) {
            return Err(Error::InvalidParameter(format!("duplicate family_id {:?}", f.family_id)));
        }
    }
    Ok(())
}

/// Seed of candidate instance `i`. Every family draws instance `i` from the
/// same stream, so identical generators produce identical instances.
pub fn instance_seed(seed: &SeedSpec, instance: usize) -> SeedSpec {
    seed.child(instance as u64)
}

/// Mean score of `data_rep` against fresh instances of each family, in input order.
pub fn family_scores(
    data_rep: &DMatrix<f64>,
    families: &[ModelFamily],
    stimuli: &DMatrix<f64>,
    statistic: &Statistic,
    instances_per_family: usize,
    seed: &SeedSpec,
) -> Result<Vec<f64>> {
    check_families(families)?;
    if instances_per_family == 0 {
        return Err(Error::InvalidParameter("instances_per_family must be >= 1".into()));
    }
    families
        .iter()
        .map(|f| {
            let mut total = 0.0;
            for i in 0..instances_per_family {
                let inst = generate_representation(f, stimuli, &instance_seed(seed, i))?;
                total += statistic.score(data_rep, &inst)?;
            }
            Ok(total / instances_per_family as f64)
        })
        .collect()
}

/// Index of the best-scoring family; exact ties go to the smallest `family_id`.
fn select(families: &[ModelFamily], scores: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..families.len() {
        let better = scores[k] > scores[best]
            || (scores[k] == scores[best] && families[k].family_id < families[best].family_id);
        if better {
            best = k;
        }
    }
    best
}

pub fn identify_model(
    data_rep: &DMatrix<f64>,
    families: &[ModelFamily],
    stimuli: &DMatrix<f64>,
    statistic: &Statistic,
    instances_per_family: usize,
    seed: &SeedSpec,
) -> Result<String> {
    let scores = family_scores(data_rep, families, stimuli, statistic, instances_per_family, seed)?;
    Ok(families[select(families, &scores)].family_id.clone())
}

/// Seed of the data generated for `family_id` in `trial`.
pub fn data_seed(seed: &SeedSpec, family_id: &str, trial: usize) -> SeedSpec {
    seed.child(0).child(stable_hash(family_id)).child(trial as u64)
}

/// Seed handed to [`identify_model`] for that trial. Its instance streams
/// extend a path starting with `1`, so they never coincide with a data seed,
/// whose path starts with `0`.
pub fn candidate_seed(seed: &SeedSpec, family_id: &str, trial: usize) -> SeedSpec {
    seed.child(1).child(stable_hash(family_id)).child(trial as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub statistic_id: String,
    pub family_ids: Vec<String>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub sensitivity: Vec<f64>,
    /// One-vs-rest; 1 when a family has no negatives.
    pub specificity: Vec<f64>,
    pub accuracy: f64,
    pub thresholds_used: Option<(f64, f64)>,
}

pub fn run_benchmark(
    families: &[ModelFamily],
    stimuli: &DMatrix<f64>,
    statistic: &Statistic,
    trials_per_family: usize,
    instances_per_family: usize,
    seed: &SeedSpec,
) -> Result<BenchmarkReport> {
    check_families(families)?;
    if trials_per_family == 0 {
        return Err(Error::InvalidParameter("trials_per_family must be >= 1".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..families.len()).flat_map(|f| (0..trials_per_family).map(move |t| (f, t))).collect();
    let predictions: Vec<usize> = jobs
        .par_iter()
        .map(|&(f, t)| {
            let id = &families[f].family_id;
            let data = generate_representation(&families[f], stimuli, &data_seed(seed, id, t))?;
            let scores = family_scores(&data, families, stimuli, statistic, instances_per_family, &candidate_seed(seed, id, t))?;
            Ok(select(families, &scores))
        })
        .collect::<Result<_>>()?;

    let nf = families.len();
    let mut confusion = vec![vec![0u64; nf]; nf];
    for (&(f, _), &p) in jobs.iter().zip(&predictions) {
        confusion[f][p] += 1;
    }
    let total: u64 = confusion.iter().flatten().sum();
    let correct: u64 = (0..nf).map(|f| confusion[f][f]).sum();
    let sensitivity = (0..nf)
        .map(|f| confusion[f][f] as f64 / confusion[f].iter().sum::<u64>() as f64)
        .collect();
    let specificity = (0..nf)
        .map(|f| {
            let fp: u64 = (0..nf).filter(|&g| g != f).map(|g| confusion[g][f]).sum();
            let negatives: u64 = (0..nf).filter(|&g| g != f).map(|g| confusion[g].iter().sum::<u64>()).sum();
            if negatives == 0 {
                1.0
            } else {
                (negatives - fp) as f64 / negatives as f64
            }
        })
        .collect();
    Ok(BenchmarkReport {
        statistic_id: statistic.id(),
        family_ids: families.iter().map(|f| f.family_id.clone()).collect(),
        confusion,
        sensitivity,
        specificity,
        accuracy: correct as f64 / total as f64,
        thresholds_used: statistic.thresholds(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub lower: f64,
    pub upper: f64,
    /// `None` when the band is degenerate for some generated RDM.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptimization {
    pub best: (f64, f64),
    pub best_accuracy: f64,
    pub baseline_accuracy: f64,
    /// Grid points in input order, with the `(0, 1)` baseline appended if absent.
    pub surface: Vec<SurfacePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkSize {
    pub trials_per_family: usize,
    pub instances_per_family: usize,
}

/// Benchmarks the RDM statistic at every quantile band of `grid` (all points
/// share the same seeds) and returns the best band: highest accuracy, then
/// narrowest band, then smallest lower quantile.
pub fn optimize_thresholds(
    families: &[ModelFamily],
    stimuli: &DMatrix<f64>,
    comparator: RdmComparator,
    shape: RampShape,
    grid: &[(f64, f64)],
    size: BenchmarkSize,
    seed: &SeedSpec,
) -> Result<ThresholdOptimization> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut points: Vec<(f64, f64)> = grid.to_vec();
    if !points.contains(&(0.0, 1.0)) {
        points.push((0.0, 1.0));
    }
    let base = Statistic::Rdm { comparator, measure: DissimilarityMeasure::Euclidean, band: None, shape };
    let mut surface = Vec::with_capacity(points.len());
    for &(lo, hi) in &points {
        let stat = base.with_band(ThresholdBand::quantile(lo, hi)?);
        let accuracy = match run_benchmark(families, stimuli, &stat, size.trials_per_family, size.instances_per_family, seed) {
            Ok(r) => Some(r.accuracy),
            Err(Error::DegenerateBand { .. } | Error::ZeroVarianceRdm) => None,
            Err(e) => return Err(e),
        };
        surface.push(SurfacePoint { lower: lo, upper: hi, accuracy });
    }
    let baseline_accuracy = surface
        .iter()
        .find(|p| (p.lower, p.upper) == (0.0, 1.0))
        .and_then(|p| p.accuracy)
        .ok_or_else(|| Error::InvalidParameter("baseline benchmark is degenerate".into()))?;
    let mut best: Option<&SurfacePoint> = None;
    for p in &surface {
        let Some(acc) = p.accuracy else { continue };
        let replace = match best {
            None => true,
            Some(b) => {
                let b_acc = b.accuracy.unwrap_or(f64::NEG_INFINITY);
                let (w, bw) = (p.upper - p.lower, b.upper - b.lower);
                acc > b_acc || (acc == b_acc && (w < bw || (w == bw && p.lower < b.lower)))
            }
        };
        if replace {
            best = Some(p);
        }
    }
    let best = best.expect("baseline point is always scored");
    Ok(ThresholdOptimization {
        best: (best.lower, best.upper),
        best_accuracy: best.accuracy.unwrap_or(baseline_accuracy),
        baseline_accuracy,
        surface,
    })
}
