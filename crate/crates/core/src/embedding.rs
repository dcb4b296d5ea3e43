//! Low-dimensional embeddings of distance matrices.
//!
//! Classical (Torgerson) scaling provides a deterministic initial
//! configuration; metric stress is then minimized by Guttman-transform
//! majorization (SMACOF with unit weights), which never increases stress.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::DistanceMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingInit {
    Classical,
    Given,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub dims: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub init: EmbeddingInit,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { dims: 2, max_iter: 300, rel_tol: 1e-7, init: EmbeddingInit::Classical }
    }
}

impl EmbeddingConfig {
    pub fn with_dims(dims: usize) -> Self {
        Self { dims, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dims) {
            return Err(Error::InvalidParameter(format!("dims must be 2 or 3, got {}", self.dims)));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalMds {
    /// `n × dims`, columns ordered by descending eigenvalue.
    pub points: DMatrix<f64>,
    /// All eigenvalues of the doubly centred Gram matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues below the zero tolerance that are negative, i.e. the
    /// non-Euclidean part of the input.
    pub negative_eigenvalues: Vec<f64>,
}

/// Eigenvalues below this fraction of the spectrum's absolute sum count as zero.
const EIGEN_ZERO_TOL: f64 = 1e-12;

pub fn classical_mds(dm: &DistanceMatrix, dims: usize) -> Result<ClassicalMds> {
    let n = dm.n();
    if dims == 0 || dims > n {
        return Err(Error::InvalidParameter(format!("cannot embed {n} points in {dims} dimensions")));
    }
    let d = dm.matrix();
    let sq = d.map(|v| v * v);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));

    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let abs_sum: f64 = eigenvalues.iter().map(|v| v.abs()).sum();
    let tol = EIGEN_ZERO_TOL * abs_sum;
    let negative_eigenvalues = eigenvalues.iter().copied().filter(|&v| v < -tol).collect();

    let mut points = DMatrix::zeros(n, dims);
    for (c, &k) in order.iter().take(dims).enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= tol {
            continue;
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        // sign: largest-magnitude entry nonnegative, ties to the lowest index
        let mut pivot = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let s = lambda.sqrt();
        for i in 0..n {
            points[(i, c)] = v[i] * s;
        }
    }
    Ok(ClassicalMds { points, eigenvalues, negative_eigenvalues })
}

fn pairwise(points: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..points.ncols() {
        let t = points[(i, c)] - points[(j, c)];
        s += t * t;
    }
    s.sqrt()
}

/// Raw metric stress `Σ_{i<j} (d_ij − ‖x_i − x_j‖)²`.
pub fn metric_stress(dm: &DistanceMatrix, points: &DMatrix<f64>) -> f64 {
    let n = dm.n();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = dm.get(i, j) - pairwise(points, i, j);
            s += r * r;
        }
    }
    s
}

fn guttman_transform(dm: &DistanceMatrix, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = dm.n();
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let delta = pairwise(x, i, j);
            // coincident points contribute nothing
            let v = if delta > 0.0 { -dm.get(i, j) / delta } else { 0.0 };
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| b[(i, j)]).sum();
        b[(i, i)] = -off;
    }
    (b * x) / n as f64
}

pub fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    let n = x.nrows() as f64;
    for mut col in out.column_iter_mut() {
        let m = col.sum() / n;
        col.add_scalar_mut(-m);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingResult {
    pub points: DMatrix<f64>,
    pub stress: f64,
    /// Accepted Guttman iterations.
    pub iterations: usize,
    pub converged: bool,
    /// Stress of the initial configuration followed by every accepted iterate.
    pub stress_trace: Vec<f64>,
}

/// Metric-stress MDS by majorization.
///
/// An iterate is accepted only when it lowers stress by at least `rel_tol`
/// relative to the current value; the first step that does not is the
/// convergence point and the current configuration is returned unchanged.
/// Re-running from a converged configuration on the same matrix therefore
/// returns that configuration exactly.
pub fn stress_mds(
    dm: &DistanceMatrix,
    config: &EmbeddingConfig,
    init_points: Option<&DMatrix<f64>>,
) -> Result<EmbeddingResult> {
    config.validate()?;
    let n = dm.n();
    let mut x = match (config.init, init_points) {
        (EmbeddingInit::Given, Some(p)) => {
            if p.nrows() != n || p.ncols() != config.dims {
                return Err(Error::DimensionMismatch(format!(
                    "initial configuration is {}x{}, expected {n}x{}",
                    p.nrows(),
                    p.ncols(),
                    config.dims
                )));
            }
            center_columns(p)
        }
        (EmbeddingInit::Given, None) => {
            return Err(Error::InvalidParameter("init = given requires initial points".into()))
        }
        (EmbeddingInit::Classical, _) => classical_mds(dm, config.dims)?.points,
    };
    let mut stress = metric_stress(dm, &x);
    let mut trace = vec![stress];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        if stress == 0.0 {
            converged = true;
            break;
        }
        let next = guttman_transform(dm, &x);
        let next_stress = metric_stress(dm, &next);
        if (stress - next_stress) / stress < config.rel_tol {
            converged = true;
            break;
        }
        x = next;
        stress = next_stress;
        trace.push(stress);
        iterations += 1;
    }
    Ok(EmbeddingResult { points: x, stress, iterations, converged, stress_trace: trace })
}

/// Largest absolute mismatch between input distances and embedded distances.
pub fn max_distance_error(dm: &DistanceMatrix, points: &DMatrix<f64>) -> f64 {
    let n = dm.n();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((dm.get(i, j) - pairwise(points, i, j)).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissimilarity::{compute_rdm, DissimilarityMeasure};
    use crate::rng::SeedSpec;
    use rand::Rng;

    fn rdm_of(points: &DMatrix<f64>) -> DistanceMatrix {
        compute_rdm(points, DissimilarityMeasure::Euclidean).unwrap()
    }

    #[test]
    fn right_triangle_recovered() {
        let p = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 3.0, 0.0, 0.0, 4.0]);
        let dm = rdm_of(&p);
        let c = classical_mds(&dm, 2).unwrap();
        assert!(max_distance_error(&dm, &c.points) < 1e-9);
        assert!(c.negative_eigenvalues.is_empty());
        for col in c.points.column_iter() {
            assert!(col.sum().abs() < 1e-9);
        }
    }

    #[test]
    fn duplicate_points_coincide() {
        let p = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 2.0, 1.0, 2.0, 3.0, -1.0]);
        let c = classical_mds(&rdm_of(&p), 2).unwrap();
        for k in 0..2 {
            assert!((c.points[(1, k)] - c.points[(2, k)]).abs() < 1e-9);
        }
        let r = stress_mds(&rdm_of(&p), &EmbeddingConfig::default(), None).unwrap();
        assert!(max_distance_error(&rdm_of(&p), &r.points) < 1e-8);
    }

    #[test]
    fn non_euclidean_metric_reports_negative_eigenvalue() {
        // star graph K_{1,3} path metric: centre at 1 from each leaf, leaves at 2
        let d = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 2.0, 2.0, 1.0, 2.0, 0.0, 2.0, 1.0, 2.0, 2.0, 0.0],
        );
        let dm = DistanceMatrix::unlabeled(d.clone()).unwrap();
        let c = classical_mds(&dm, 2).unwrap();
        // oracle: eigenvalues of the centred Gram matrix from an independent
        // dense eigensolve (nalgebra's general Schur route)
        let sq = d.map(|v| v * v);
        let j = DMatrix::<f64>::identity(4, 4) - DMatrix::from_element(4, 4, 0.25);
        let b = &j * sq * &j * -0.5;
        let eig = b.complex_eigenvalues();
        let min_re = eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        assert!(min_re < -1e-6);
        assert_eq!(c.negative_eigenvalues.len(), 1);
        assert!((c.negative_eigenvalues[0] - min_re).abs() < 1e-9);
        assert!(max_distance_error(&dm, &c.points) > 1e-3);
    }

    #[test]
    fn embeddable_distances_reach_zero_stress() {
        let p = DMatrix::from_row_slice(5, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 3.0, 3.0, -1.0, 0.5]);
        let r = stress_mds(&rdm_of(&p), &EmbeddingConfig::default(), None).unwrap();
        assert!(r.stress < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn all_zero_rdm_maps_to_origin() {
        let dm = DistanceMatrix::unlabeled(DMatrix::zeros(4, 4)).unwrap();
        let r = stress_mds(&dm, &EmbeddingConfig::default(), None).unwrap();
        assert_eq!(r.stress, 0.0);
        assert!(r.points.iter().all(|&v| v == 0.0));

        let init = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        let cfg = EmbeddingConfig { init: EmbeddingInit::Given, ..EmbeddingConfig::default() };
        let r = stress_mds(&dm, &cfg, Some(&init)).unwrap();
        assert_eq!(r.stress, 0.0);
        assert!(r.points.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noisy_square_improves_on_classical_init() {
        let mut rng = SeedSpec::new(4).stream();
        let p = DMatrix::from_row_slice(4, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let clean = rdm_of(&p);
        let noise: Vec<f64> = (0..6).map(|_| 1.0 + 0.01 * rng.random_range(-1.0..1.0)).collect();
        let perturbed: Vec<f64> = clean.upper_triangle().iter().zip(&noise).map(|(v, e)| v * e).collect();
        let noisy = DistanceMatrix::from_upper_triangle(&perturbed, clean.labels().to_vec()).unwrap();
        let init_stress = metric_stress(&noisy, &classical_mds(&noisy, 2).unwrap().points);
        let r = stress_mds(&noisy, &EmbeddingConfig::default(), None).unwrap();
        assert!(r.stress <= init_stress);
        assert_eq!(r.stress_trace[0], init_stress);
    }

    #[test]
    fn stress_trace_nonincreasing_and_centered() {
        let mut rng = SeedSpec::new(17).stream();
        for _ in 0..20 {
            let n = rng.random_range(4..15);
            let p = DMatrix::from_fn(n, 5, |_, _| rng.random_range(-1.0..1.0));
            let dm = rdm_of(&p);
            let r = stress_mds(&dm, &EmbeddingConfig::with_dims(2), None).unwrap();
            for w in r.stress_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
            for col in r.points.column_iter() {
                assert!(col.sum().abs() / n as f64 <= 1e-9);
            }
        }
    }

    #[test]
    fn scaled_input_scales_output() {
        let mut rng = SeedSpec::new(23).stream();
        let p = DMatrix::from_fn(9, 4, |_, _| rng.random_range(-1.0..1.0));
        let dm = rdm_of(&p);
        let alpha = 3.5;
        let scaled = dm.map_off_diagonal(|v| v * alpha);
        let a = stress_mds(&dm, &EmbeddingConfig::default(), None).unwrap();
        let b = stress_mds(&scaled, &EmbeddingConfig::default(), None).unwrap();
        assert_eq!(a.iterations, b.iterations);
        let tol = 1e-9 * alpha * a.points.amax();
        assert!((a.points * alpha - b.points).amax() <= tol);
    }

    #[test]
    fn rerun_from_converged_is_fixed() {
        let mut rng = SeedSpec::new(31).stream();
        let p = DMatrix::from_fn(8, 4, |_, _| rng.random_range(-1.0..1.0));
        let dm = rdm_of(&p);
        let a = stress_mds(&dm, &EmbeddingConfig::default(), None).unwrap();
        assert!(a.converged);
        let cfg = EmbeddingConfig { init: EmbeddingInit::Given, ..EmbeddingConfig::default() };
        let b = stress_mds(&dm, &cfg, Some(&a.points)).unwrap();
        assert!((a.points - b.points).amax() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let dm = DistanceMatrix::unlabeled(DMatrix::zeros(4, 4)).unwrap();
        assert!(stress_mds(&dm, &EmbeddingConfig::with_dims(4), None).is_err());
        let cfg = EmbeddingConfig { init: EmbeddingInit::Given, ..EmbeddingConfig::default() };
        assert!(stress_mds(&dm, &cfg, None).is_err());
        assert!(stress_mds(&dm, &cfg, Some(&DMatrix::zeros(3, 2))).is_err());
    }
}
