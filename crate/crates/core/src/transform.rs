//! Two-threshold monotonic distance transforms.
//!
//! Distances at or below the lower threshold `l` collapse to zero, distances
//! at or above the upper threshold `u` saturate at `u − l`, and a continuous
//! nondecreasing ramp connects the two. With `l = 0` and `u` equal to the
//! largest distance the linear ramp is the identity, so the family
//! interpolates between the raw geometry and a purely topological
//! (thresholded graph) view of an RDM.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::DistanceMatrix;
use crate::error::{Error, Result};
use crate::stats::{quantile_sorted, sorted_copy};

pub const DEFAULT_LOGISTIC_STEEPNESS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RampShape {
    /// `min(max(d − l, 0), u − l)`.
    Linear,
    /// Logistic ramp rescaled to hit 0 at `l` and 1 at `u` exactly.
    Logistic { steepness: f64 },
}

impl RampShape {
    pub fn name(&self) -> &'static str {
        match self {
            RampShape::Linear => "linear",
            RampShape::Logistic { .. } => "logistic",
        }
    }
}

impl FromStr for RampShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(RampShape::Linear),
            "logistic" => Ok(RampShape::Logistic { steepness: DEFAULT_LOGISTIC_STEEPNESS }),
            other => Err(Error::InvalidParameter(format!("unknown transform shape {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTopoTransform {
    lower: f64,
    upper: f64,
    shape: RampShape,
}

impl GeoTopoTransform {
    pub fn new(lower: f64, upper: f64, shape: RampShape) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower < 0.0 || upper <= lower {
            return Err(Error::InvalidTransform(format!(
                "thresholds must satisfy 0 <= l < u, got l = {lower}, u = {upper}"
            )));
        }
        if let RampShape::Logistic { steepness } = shape {
            if !(steepness.is_finite() && steepness > 0.0) {
                return Err(Error::InvalidTransform(format!(
                    "logistic steepness must be positive, got {steepness}"
                )));
            }
        }
        Ok(Self { lower, upper, shape })
    }

    pub fn linear(lower: f64, upper: f64) -> Result<Self> {
        Self::new(lower, upper, RampShape::Linear)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn shape(&self) -> RampShape {
        self.shape
    }

    pub fn apply(&self, d: f64) -> f64 {
        transform_distance(d, self)
    }
}

pub fn transform_distance(d: f64, t: &GeoTopoTransform) -> f64 {
    let (l, u) = (t.lower, t.upper);
    if d <= l {
        return 0.0;
    }
    if d >= u {
        return u - l;
    }
    match t.shape {
        RampShape::Linear => d - l,
        RampShape::Logistic { steepness } => {
            let sigma = |x: f64| 1.0 / (1.0 + (-steepness * (x - 0.5)).exp());
            let (s0, s1) = (sigma(0.0), sigma(1.0));
            let s = (sigma((d - l) / (u - l)) - s0) / (s1 - s0);
            (u - l) * s.clamp(0.0, 1.0)
        }
    }
}

pub fn transform_rdm(dm: &DistanceMatrix, t: &GeoTopoTransform) -> DistanceMatrix {
    dm.map_off_diagonal(|d| transform_distance(d, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridDerivation {
    Quantile,
    Absolute,
}

/// Nonempty list of `(l, u)` threshold pairs in distance units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    pairs: Vec<(f64, f64)>,
    derivation: GridDerivation,
}

impl ThresholdGrid {
    pub fn absolute(pairs: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(pairs, GridDerivation::Absolute)
    }

    fn new(pairs: Vec<(f64, f64)>, derivation: GridDerivation) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyGrid);
        }
        for &(l, u) in &pairs {
            GeoTopoTransform::linear(l, u)?;
        }
        Ok(Self { pairs, derivation })
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn derivation(&self) -> GridDerivation {
        self.derivation
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn sorted_off_diagonal(dm: &DistanceMatrix) -> Result<Vec<f64>> {
    let v = dm.upper_triangle();
    if v.is_empty() {
        return Err(Error::InvalidDistanceMatrix("no off-diagonal entries".into()));
    }
    Ok(sorted_copy(&v))
}

fn check_quantiles(q: &[f64], what: &str) -> Result<()> {
    if q.is_empty() {
        return Err(Error::InvalidParameter(format!("{what} quantile list is empty")));
    }
    if q.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidParameter(format!("{what} quantiles must lie in [0, 1]")));
    }
    if q.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(format!("{what} quantiles must be sorted")));
    }
    Ok(())
}

/// Cartesian product of quantile levels mapped to empirical quantiles of the
/// off-diagonal entries. Quantile 0 maps to the smallest entry. Pairs whose
/// values coincide are dropped.
pub fn quantile_grid(
    dm: &DistanceMatrix,
    lower_quantiles: &[f64],
    upper_quantiles: &[f64],
) -> Result<ThresholdGrid> {
    check_quantiles(lower_quantiles, "lower")?;
    check_quantiles(upper_quantiles, "upper")?;
    let sorted = sorted_off_diagonal(dm)?;
    let mut pairs = Vec::new();
    for &ql in lower_quantiles {
        for &qu in upper_quantiles {
            if ql >= qu {
                continue;
            }
            let l = quantile_sorted(&sorted, ql);
            let u = quantile_sorted(&sorted, qu);
            if l < u {
                pairs.push((l, u));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyGrid);
    }
    ThresholdGrid::new(pairs, GridDerivation::Quantile)
}

/// A threshold pair that is either fixed in distance units or resolved
/// against each matrix it is applied to.
///
/// Quantile bands resolve the lower level `0` to `l = 0` (not to the smallest
/// entry), so the band `(0, 1)` is the identity transform on every matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ThresholdBand {
    Absolute { l: f64, u: f64 },
    Quantile { lower: f64, upper: f64 },
}

impl ThresholdBand {
    pub fn quantile(lower: f64, upper: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lower) || !(0.0..=1.0).contains(&upper) || lower >= upper {
            return Err(Error::InvalidParameter(format!(
                "quantile band needs 0 <= lower < upper <= 1, got ({lower}, {upper})"
            )));
        }
        Ok(ThresholdBand::Quantile { lower, upper })
    }

    pub fn absolute(l: f64, u: f64) -> Result<Self> {
        GeoTopoTransform::linear(l, u)?;
        Ok(ThresholdBand::Absolute { l, u })
    }

    /// `(l, u)` in the units of `dm`.
    pub fn resolve(&self, dm: &DistanceMatrix) -> Result<(f64, f64)> {
        match *self {
            ThresholdBand::Absolute { l, u } => Ok((l, u)),
            ThresholdBand::Quantile { lower, upper } => {
                let sorted = sorted_off_diagonal(dm)?;
                let l = if lower == 0.0 { 0.0 } else { quantile_sorted(&sorted, lower) };
                let u = quantile_sorted(&sorted, upper);
                if l >= u {
                    return Err(Error::DegenerateBand { lower, upper, l, u });
                }
                Ok((l, u))
            }
        }
    }

    pub fn transform_for(&self, dm: &DistanceMatrix, shape: RampShape) -> Result<GeoTopoTransform> {
        let (l, u) = self.resolve(dm)?;
        GeoTopoTransform::new(l, u, shape)
    }

    pub fn apply(&self, dm: &DistanceMatrix, shape: RampShape) -> Result<DistanceMatrix> {
        Ok(transform_rdm(dm, &self.transform_for(dm, shape)?))
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ThresholdBand::Absolute { l, u } => (l, u),
            ThresholdBand::Quantile { lower, upper } => (lower, upper),
        }
    }
}

impl From<&ThresholdGrid> for Vec<ThresholdBand> {
    fn from(grid: &ThresholdGrid) -> Self {
        grid.pairs().iter().map(|&(l, u)| ThresholdBand::Absolute { l, u }).collect()
    }
}
