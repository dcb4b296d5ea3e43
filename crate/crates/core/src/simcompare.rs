//! Representation comparison: linear CKA, SVCCA, PWCCA and RDM comparators.

use std::cmp::Ordering;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::DistanceMatrix;
use crate::embedding::center_columns;
use crate::error::{Error, Result};
use crate::stats::{average_ranks, pearson};

pub const MIN_CONDITIONS: usize = 4;
pub const DEFAULT_VARIANCE_RETAINED: f64 = 0.99;
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Two representations of the same `n_cond` conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationPair {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl RepresentationPair {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "x has {} conditions, y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.nrows() < MIN_CONDITIONS {
            return Err(Error::TooFewConditions { found: x.nrows(), required: MIN_CONDITIONS });
        }
        if x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::Shape("representations need at least one channel".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("representation contains non-finite values".into()));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn swapped(&self) -> Self {
        Self { x: self.y.clone(), y: self.x.clone() }
    }
}

/// `‖YᵀX‖²_F / (‖XᵀX‖_F ‖YᵀY‖_F)` on column-centred representations.
pub fn linear_cka(pair: &RepresentationPair) -> Result<f64> {
    let x = center_columns(&pair.x);
    let y = center_columns(&pair.y);
    let xx = (x.transpose() * &x).norm();
    let yy = (y.transpose() * &y).norm();
    if xx == 0.0 || yy == 0.0 {
        return Err(Error::DegenerateRepresentation("a centred representation is all zero".into()));
    }
    let yx = (y.transpose() * &x).norm_squared();
    Ok((yx / (xx * yy)).clamp(0.0, 1.0))
}

/// Leading singular subspace (scores `U_k Σ_k`) holding at least
/// `variance_retained` of the squared singular values of the centred matrix.
pub fn reduce_to_subspace(x: &DMatrix<f64>, variance_retained: f64) -> Result<DMatrix<f64>> {
    if !(variance_retained > 0.0 && variance_retained <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "variance_retained must lie in (0, 1], got {variance_retained}"
        )));
    }
    let xc = center_columns(x);
    let svd = xc.svd(true, false);
    let u = svd.u.expect("svd u");
    let sigma = svd.singular_values;
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Err(Error::DegenerateRepresentation("representation has zero variance".into()));
    }
    let mut kept = Vec::new();
    let mut acc = 0.0;
    for &k in &order {
        if sigma[k] == 0.0 {
            break;
        }
        kept.push(k);
        acc += sigma[k] * sigma[k];
        if acc >= variance_retained * total {
            break;
        }
    }
    let n = x.nrows();
    Ok(DMatrix::from_fn(n, kept.len(), |i, c| u[(i, kept[c])] * sigma[kept[c]]))
}

/// Canonical correlation analysis of two centred matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Cca {
    /// Descending canonical correlations, `min(p, q)` of them.
    pub correlations: Vec<f64>,
    /// Unit-norm canonical variates of `x`, one column per correlation.
    pub x_variates: DMatrix<f64>,
}

fn inverse_sqrt_ridge(c: DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let p = c.nrows();
    let eig = SymmetricEigen::new(c);
    let spectral = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if spectral <= 0.0 {
        return Err(Error::DegenerateRepresentation("covariance is zero".into()));
    }
    let shift = ridge * spectral;
    let mut out = DMatrix::zeros(p, p);
    for k in 0..p {
        let lambda = eig.eigenvalues[k].max(0.0) + shift;
        if lambda <= 0.0 {
            return Err(Error::DegenerateRepresentation("singular covariance with zero ridge".into()));
        }
        let v = eig.eigenvectors.column(k);
        out += (&v * v.transpose()) / lambda.sqrt();
    }
    Ok(out)
}

/// Ridge-regularized CCA by whitening: the canonical correlations are the
/// singular values of `Cxx^{-1/2} Cxy Cyy^{-1/2}` with each covariance
/// shifted by `ridge` times its spectral norm.
pub fn cca(x: &DMatrix<f64>, y: &DMatrix<f64>, ridge: f64) -> Result<Cca> {
    let x = center_columns(x);
    let y = center_columns(y);
    let wx = inverse_sqrt_ridge(x.transpose() * &x, ridge)?;
    let wy = inverse_sqrt_ridge(y.transpose() * &y, ridge)?;
    let t = &wx * (x.transpose() * &y) * &wy;
    let svd = t.svd(true, false);
    let u = svd.u.expect("svd u");
    let sigma = svd.singular_values;
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let correlations = order.iter().map(|&k| sigma[k].clamp(0.0, 1.0)).collect();
    let mut x_variates = DMatrix::zeros(x.nrows(), order.len());
    for (c, &k) in order.iter().enumerate() {
        let h = &x * (&wx * u.column(k));
        let norm = h.norm();
        if norm > 0.0 {
            x_variates.set_column(c, &(h / norm));
        }
    }
    Ok(Cca { correlations, x_variates })
}

/// Mean canonical correlation between the SVD-reduced representations.
pub fn svcca(pair: &RepresentationPair, variance_retained: f64, ridge: f64) -> Result<f64> {
    let xr = reduce_to_subspace(&pair.x, variance_retained)?;
    let yr = reduce_to_subspace(&pair.y, variance_retained)?;
    let c = cca(&xr, &yr, ridge)?;
    Ok(c.correlations.iter().sum::<f64>() / c.correlations.len() as f64)
}

/// Projection-weighted CCA.
///
/// Weight `α_i ∝ Σ_j |⟨h_i, x_j⟩|` where `h_i` are the unit-norm canonical
/// variates of `x` and `x_j` the columns of `x`'s reduced representation;
/// weights sum to one. The result depends on which argument is `x`.
pub fn pwcca(pair: &RepresentationPair, variance_retained: f64, ridge: f64) -> Result<f64> {
    let xr = reduce_to_subspace(&pair.x, variance_retained)?;
    let yr = reduce_to_subspace(&pair.y, variance_retained)?;
    let c = cca(&xr, &yr, ridge)?;
    let weights = projection_weights(&c.x_variates, &xr);
    Ok(c.correlations.iter().zip(&weights).map(|(r, w)| r * w).sum::<f64>().clamp(0.0, 1.0))
}

fn projection_weights(variates: &DMatrix<f64>, reduced: &DMatrix<f64>) -> Vec<f64> {
    let proj = variates.transpose() * reduced;
    let raw: Vec<f64> = proj.row_iter().map(|r| r.iter().map(|v| v.abs()).sum()).collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        return vec![1.0 / raw.len() as f64; raw.len()];
    }
    raw.iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RdmComparator {
    /// Cosine distance between RDM vectors.
    Cosine,
    /// Euclidean distance between RDM vectors.
    Euclidean,
    Pearson,
    Spearman,
    /// Kendall's τ-a.
    Kendall,
}

impl RdmComparator {
    pub fn name(self) -> &'static str {
        match self {
            RdmComparator::Cosine => "cosine",
            RdmComparator::Euclidean => "euclidean",
            RdmComparator::Pearson => "pearson",
            RdmComparator::Spearman => "spearman",
            RdmComparator::Kendall => "kendall",
        }
    }

    /// True for comparators that return a distance (smaller is more similar).
    pub fn is_distance(self) -> bool {
        matches!(self, RdmComparator::Cosine | RdmComparator::Euclidean)
    }

    /// Comparator value oriented so that larger means more similar.
    pub fn similarity(self, value: f64) -> f64 {
        if self.is_distance() {
            -value
        } else {
            value
        }
    }
}

impl FromStr for RdmComparator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(RdmComparator::Cosine),
            "euclidean" => Ok(RdmComparator::Euclidean),
            "pearson" => Ok(RdmComparator::Pearson),
            "spearman" => Ok(RdmComparator::Spearman),
            "kendall" => Ok(RdmComparator::Kendall),
            other => Err(Error::InvalidParameter(format!("unknown RDM comparator {other:?}"))),
        }
    }
}

pub fn compare_rdms(a: &DistanceMatrix, b: &DistanceMatrix, cmp: RdmComparator) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch(format!("{} vs {} conditions", a.n(), b.n())));
    }
    if a.labels() != b.labels() {
        return Err(Error::LabelMismatch);
    }
    compare_vectors(&a.upper_triangle(), &b.upper_triangle(), cmp)
}

/// Comparator applied to two already vectorized RDMs.
pub fn compare_vectors(va: &[f64], vb: &[f64], cmp: RdmComparator) -> Result<f64> {
    if va.len() != vb.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} entries", va.len(), vb.len())));
    }
    match cmp {
        RdmComparator::Euclidean => {
            Ok(va.iter().zip(vb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
        }
        RdmComparator::Cosine => {
            let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
            let na: f64 = va.iter().map(|x| x * x).sum();
            let nb: f64 = vb.iter().map(|x| x * x).sum();
            if na == 0.0 || nb == 0.0 {
                return Err(Error::ZeroVarianceRdm);
            }
            Ok((1.0 - (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)).max(0.0))
        }
        RdmComparator::Pearson => pearson(va, vb).ok_or(Error::ZeroVarianceRdm),
        RdmComparator::Spearman => {
            pearson(&average_ranks(va), &average_ranks(vb)).ok_or(Error::ZeroVarianceRdm)
        }
        RdmComparator::Kendall => kendall_tau_a(va, vb).ok_or(Error::ZeroVarianceRdm),
    }
}

fn tied_pairs(sorted: impl Iterator<Item = f64>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<f64> = None;
    for v in sorted {
        if prev == Some(v) {
            run += 1;
        } else {
            total += run * run.saturating_sub(1) / 2;
            run = 1;
        }
        prev = Some(v);
    }
    total + run * run.saturating_sub(1) / 2
}

/// Sorts `v` in place, returning the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's τ-a, `(concordant − discordant) / (m (m − 1) / 2)` with ties
/// counted as neither, in `O(m log m)` (Knight's merge-sort method).
/// `None` when either vector is constant.
pub fn kendall_tau_a(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let m = a.len() as u64;
    let n0 = m * m.saturating_sub(1) / 2;
    if n0 == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..a.len()).collect();
    idx.sort_by(|&i, &j| {
        a[i].partial_cmp(&a[j]).unwrap_or(Ordering::Equal).then(b[i].partial_cmp(&b[j]).unwrap_or(Ordering::Equal))
    });
    let ties_a = tied_pairs(idx.iter().map(|&i| a[i]));
    // joint ties: runs equal in both coordinates are adjacent after the sort
    let mut ties_ab = 0u64;
    let mut run = 1u64;
    for w in idx.windows(2) {
        if a[w[0]] == a[w[1]] && b[w[0]] == b[w[1]] {
            run += 1;
        } else {
            ties_ab += run * (run - 1) / 2;
            run = 1;
        }
    }
    ties_ab += run * (run - 1) / 2;

    let mut bs: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let mut buf = Vec::with_capacity(bs.len());
    let discordant = merge_count(&mut bs, &mut buf);
    let ties_b = tied_pairs(bs.iter().copied());
    if ties_a == n0 || ties_b == n0 {
        return None;
    }
    let concordant = n0 + ties_ab - ties_a - ties_b - discordant;
    Some((concordant as f64 - discordant as f64) / n0 as f64)
}
