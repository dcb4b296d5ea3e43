//! Shared data model: activity tensors, distance matrices and RDM movies.
//!
//! All types validate their invariants on construction and are immutable
//! afterwards, so a value that exists is a value that is valid.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Minimum number of conditions for any pairwise-geometry statistic.
pub const MIN_CONDITIONS: usize = 3;

/// Unvalidated dataset as read from disk.
///
/// `values` is laid out frame-major, then condition, then channel:
/// index `(f * n_cond + c) * channel_count + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub values: Vec<f64>,
    pub frame_times: Vec<f64>,
    pub condition_labels: Vec<String>,
    pub channel_count: usize,
}

/// A conditions × channels × time-frames measurement tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityDataset {
    values: Vec<f64>,
    frame_times: Vec<f64>,
    condition_labels: Vec<String>,
    channel_count: usize,
}

/// Checks every dataset invariant and returns the validated dataset.
pub fn validate_dataset(raw: RawDataset) -> Result<ActivityDataset> {
    let RawDataset { values, frame_times, condition_labels, channel_count } = raw;
    let n_frames = frame_times.len();
    let n_cond = condition_labels.len();
    if n_frames == 0 {
        return Err(Error::Shape("dataset has no frames".into()));
    }
    if channel_count == 0 {
        return Err(Error::Shape("channel_count must be positive".into()));
    }
    if n_cond < MIN_CONDITIONS {
        return Err(Error::TooFewConditions { found: n_cond, required: MIN_CONDITIONS });
    }
    let expected = n_frames * n_cond * channel_count;
    if values.len() != expected {
        return Err(Error::Shape(format!(
            "expected {expected} values for shape ({n_frames}, {n_cond}, {channel_count}), got {}",
            values.len()
        )));
    }
    check_unique_labels(&condition_labels)?;
    check_increasing_times(&frame_times)?;
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        let channel = pos % channel_count;
        let condition = (pos / channel_count) % n_cond;
        let frame = pos / (channel_count * n_cond);
        return Err(Error::NonFiniteValue { frame, condition, channel });
    }
    Ok(ActivityDataset { values, frame_times, condition_labels, channel_count })
}

pub(crate) fn check_unique_labels(labels: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(labels.len());
    for (index, label) in labels.iter().enumerate() {
        if !seen.insert(label.as_str()) {
            return Err(Error::DuplicateLabel { index, label: label.clone() });
        }
    }
    Ok(())
}

pub(crate) fn check_increasing_times(times: &[f64]) -> Result<()> {
    for (index, t) in times.iter().enumerate() {
        if !t.is_finite() {
            return Err(Error::NonMonotonicTime { index });
        }
        if index > 0 && *t <= times[index - 1] {
            return Err(Error::NonMonotonicTime { index });
        }
    }
    Ok(())
}

impl ActivityDataset {
    pub fn n_frames(&self) -> usize {
        self.frame_times.len()
    }

    pub fn n_conditions(&self) -> usize {
        self.condition_labels.len()
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn frame_times(&self) -> &[f64] {
        &self.frame_times
    }

    pub fn condition_labels(&self) -> &[String] {
        &self.condition_labels
    }

    /// Flat values in frame, condition, channel order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, frame: usize, condition: usize, channel: usize) -> f64 {
        self.values[(frame * self.n_conditions() + condition) * self.channel_count + channel]
    }

    /// Activity patterns of one frame as an `n_cond × n_channel` matrix.
    pub fn frame(&self, frame: usize) -> DMatrix<f64> {
        let n_cond = self.n_conditions();
        let k = self.channel_count;
        let start = frame * n_cond * k;
        DMatrix::from_row_slice(n_cond, k, &self.values[start..start + n_cond * k])
    }

    pub fn into_raw(self) -> RawDataset {
        RawDataset {
            values: self.values,
            frame_times: self.frame_times,
            condition_labels: self.condition_labels,
            channel_count: self.channel_count,
        }
    }
}

/// Symmetric, zero-diagonal, nonnegative dissimilarity matrix with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    d: DMatrix<f64>,
    labels: Vec<String>,
}

impl DistanceMatrix {
    pub fn new(d: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let n = d.nrows();
        if d.ncols() != n {
            return Err(Error::InvalidDistanceMatrix(format!("not square: {}x{}", n, d.ncols())));
        }
        if labels.len() != n {
            return Err(Error::InvalidDistanceMatrix(format!(
                "{} labels for {n} rows",
                labels.len()
            )));
        }
        check_unique_labels(&labels)?;
        for i in 0..n {
            if d[(i, i)] != 0.0 {
                return Err(Error::InvalidDistanceMatrix(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                let v = d[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidDistanceMatrix(format!(
                        "entry ({i}, {j}) = {v} is negative or non-finite"
                    )));
                }
                if d[(j, i)] != v {
                    return Err(Error::InvalidDistanceMatrix(format!(
                        "asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { d, labels })
    }

    /// Builds a matrix with default labels `"0"`, `"1"`, ...
    pub fn unlabeled(d: DMatrix<f64>) -> Result<Self> {
        let labels = default_labels(d.nrows());
        Self::new(d, labels)
    }

    /// Inverse of [`DistanceMatrix::upper_triangle`].
    pub fn from_upper_triangle(values: &[f64], labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::DimensionMismatch(format!(
                "{} upper-triangle values for n = {n}",
                values.len()
            )));
        }
        let mut d = DMatrix::zeros(n, n);
        let mut it = values.iter();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = *it.next().unwrap();
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        Self::new(d, labels)
    }

    /// Build without validation; callers guarantee the invariants.
    pub(crate) fn from_parts_unchecked(d: DMatrix<f64>, labels: Vec<String>) -> Self {
        debug_assert_eq!(d.nrows(), labels.len());
        Self { d, labels }
    }

    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Off-diagonal entries in row-major order over `i < j`.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.d[(i, j)]);
            }
        }
        out
    }

    /// Largest entry (0 for matrices with fewer than two points).
    pub fn max_entry(&self) -> f64 {
        self.upper_triangle().into_iter().fold(0.0, f64::max)
    }

    /// Applies `f` to every off-diagonal entry, keeping symmetry and labels.
    pub(crate) fn map_off_diagonal(&self, f: impl Fn(f64) -> f64) -> Self {
        let n = self.n();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(self.d[(i, j)]);
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        Self { d, labels: self.labels.clone() }
    }

    /// Simultaneous row/column permutation: entry `(i, j)` of the result is
    /// entry `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        assert_eq!(perm.len(), n, "permutation length");
        let d = DMatrix::from_fn(n, n, |i, j| self.d[(perm[i], perm[j])]);
        let labels = perm.iter().map(|&p| self.labels[p].clone()).collect();
        Self { d, labels }
    }
}

pub fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Time-indexed stack of distance matrices sharing one label set.
#[derive(Debug, Clone, PartialEq)]
pub struct RdmMovie {
    frames: Vec<DistanceMatrix>,
    frame_times: Vec<f64>,
}

impl RdmMovie {
    pub fn new(frames: Vec<DistanceMatrix>, frame_times: Vec<f64>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Shape("movie has no frames".into()));
        }
        if frames.len() != frame_times.len() {
            return Err(Error::Shape(format!(
                "{} frames but {} frame times",
                frames.len(),
                frame_times.len()
            )));
        }
        check_increasing_times(&frame_times)?;
        let labels = frames[0].labels();
        for (t, f) in frames.iter().enumerate() {
            if f.labels() != labels {
                return Err(Error::Shape(format!("frame {t} has a different label set")));
            }
        }
        Ok(Self { frames, frame_times })
    }

    pub fn frames(&self) -> &[DistanceMatrix] {
        &self.frames
    }

    pub fn frame_times(&self) -> &[f64] {
        &self.frame_times
    }

    pub fn labels(&self) -> &[String] {
        self.frames[0].labels()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn n(&self) -> usize {
        self.frames[0].n()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        ["a", "b", "c", "d", "e"][..n].iter().map(|s| s.to_string()).collect()
    }

    fn raw(frames: usize, cond: usize, chan: usize) -> RawDataset {
        RawDataset {
            values: (0..frames * cond * chan).map(|i| i as f64 * 0.5).collect(),
            frame_times: (0..frames).map(|t| t as f64 * 10.0).collect(),
            condition_labels: labels(cond),
            channel_count: chan,
        }
    }

    #[test]
    fn accepts_valid_dataset() {
        let ds = validate_dataset(raw(2, 3, 4)).unwrap();
        assert_eq!(ds.n_frames(), 2);
        assert_eq!(ds.n_conditions(), 3);
        assert_eq!(ds.channel_count(), 4);
        assert_eq!(ds.value(1, 2, 3), ((1 * 3 + 2) * 4 + 3) as f64 * 0.5);
        let f = ds.frame(1);
        assert_eq!(f[(2, 3)], ds.value(1, 2, 3));
    }

    #[test]
    fn rejects_repeated_time() {
        let mut r = raw(2, 3, 4);
        r.frame_times = vec![0.0, 0.0];
        assert_eq!(validate_dataset(r), Err(Error::NonMonotonicTime { index: 1 }));
    }

    #[test]
    fn rejects_nan_and_names_index() {
        let mut r = raw(2, 3, 4);
        r.values[(0 * 3 + 1) * 4 + 2] = f64::NAN;
        assert_eq!(
            validate_dataset(r),
            Err(Error::NonFiniteValue { frame: 0, condition: 1, channel: 2 })
        );
    }

    #[test]
    fn rejects_duplicate_label() {
        let mut r = raw(1, 3, 2);
        r.condition_labels[2] = "a".into();
        assert_eq!(
            validate_dataset(r),
            Err(Error::DuplicateLabel { index: 2, label: "a".into() })
        );
    }

    #[test]
    fn rejects_two_conditions() {
        let r = raw(1, 2, 2);
        assert!(matches!(validate_dataset(r), Err(Error::TooFewConditions { found: 2, .. })));
    }

    #[test]
    fn upper_triangle_order() {
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 3.0, 2.0, 3.0, 0.0]);
        let dm = DistanceMatrix::new(d, labels(3)).unwrap();
        assert_eq!(dm.upper_triangle(), vec![1.0, 2.0, 3.0]);

        let two = DistanceMatrix::unlabeled(DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 5.0, 0.0]))
            .unwrap();
        assert_eq!(two.upper_triangle(), vec![5.0]);
    }

    #[test]
    fn distance_matrix_rejects_invalid() {
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(DistanceMatrix::unlabeled(asym).is_err());
        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        assert!(DistanceMatrix::unlabeled(diag).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!(DistanceMatrix::unlabeled(neg).is_err());
    }

    #[test]
    fn movie_requires_shared_labels() {
        let a = DistanceMatrix::new(DMatrix::zeros(3, 3), labels(3)).unwrap();
        let b = DistanceMatrix::new(DMatrix::zeros(3, 3), vec!["x".into(), "y".into(), "z".into()])
            .unwrap();
        assert!(RdmMovie::new(vec![a.clone(), b], vec![0.0, 1.0]).is_err());
        assert!(RdmMovie::new(vec![a.clone(), a.clone()], vec![1.0, 0.0]).is_err());
        assert_eq!(RdmMovie::new(vec![a.clone(), a], vec![0.0, 1.0]).unwrap().len(), 2);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn upper_triangle_round_trip(v in proptest::collection::vec(0.0f64..1e6, 0..40)) {
                // truncate to a triangular number
                let mut n = 1;
                while (n + 1) * n / 2 <= v.len() { n += 1; }
                let m = n * (n - 1) / 2;
                let labels = default_labels(n);
                let dm = DistanceMatrix::from_upper_triangle(&v[..m], labels).unwrap();
                prop_assert_eq!(dm.upper_triangle(), v[..m].to_vec());
                let again = DistanceMatrix::from_upper_triangle(&dm.upper_triangle(), dm.labels().to_vec()).unwrap();
                prop_assert_eq!(again, dm);
            }
        }
    }
}
