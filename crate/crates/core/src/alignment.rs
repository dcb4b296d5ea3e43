//! Orthogonal Procrustes, generalized Procrustes analysis and the
//! moving-frame trajectory pipeline.
//!
//! Configurations are `n × dims` matrices with one point per row. A
//! [`ProcrustesSolution`] maps a source onto a target as
//! `scale · source · rotation + translation`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DistanceMatrix, RdmMovie};
use crate::embedding::{center_columns, stress_mds, EmbeddingConfig, EmbeddingInit};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ProcrustesSolution {
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
    pub scale: f64,
    /// Sum of squared point-wise differences after alignment.
    pub residual: f64,
}

impl ProcrustesSolution {
    pub fn apply(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = points * &self.rotation * self.scale;
        for mut row in out.row_iter_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v += self.translation[c];
            }
        }
        out
    }
}

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

pub fn procrustes(
    source: &DMatrix<f64>,
    target: &DMatrix<f64>,
    allow_scale: bool,
    allow_reflection: bool,
) -> Result<ProcrustesSolution> {
    if source.shape() != target.shape() {
        return Err(Error::DimensionMismatch(format!(
            "source is {:?}, target is {:?}",
            source.shape(),
            target.shape()
        )));
    }
    let (n, dims) = source.shape();
    if dims == 0 || n < dims {
        return Err(Error::InvalidParameter(format!("procrustes needs n >= dims, got n = {n}, dims = {dims}")));
    }
    let mu_s = column_means(source);
    let mu_t = column_means(target);
    let xs = center_columns(source);
    let yt = center_columns(target);
    let source_ss = xs.norm_squared();
    if allow_scale && source_ss == 0.0 {
        return Err(Error::DegenerateConfiguration("source has zero total variance".into()));
    }

    let cross = xs.transpose() * &yt;
    let svd = cross.svd(true, true);
    let mut u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let sigma = svd.singular_values;
    let mut rotation = &u * &v_t;
    let mut trace = sigma.sum();
    if !allow_reflection && rotation.determinant() < 0.0 {
        let k = sigma.imin();
        u.column_mut(k).neg_mut();
        rotation = &u * &v_t;
        trace -= 2.0 * sigma[k];
    }
    let scale = if allow_scale { trace / source_ss } else { 1.0 };
    let translation = &mu_t - (mu_s.transpose() * &rotation * scale).transpose();
    let mut solution = ProcrustesSolution { rotation, translation, scale, residual: 0.0 };
    solution.residual = (solution.apply(source) - target).norm_squared();
    Ok(solution)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpaOptions {
    pub allow_scale: bool,
    pub allow_reflection: bool,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for GpaOptions {
    fn default() -> Self {
        Self { allow_scale: false, allow_reflection: false, max_iter: 100, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpaResult {
    pub aligned: Vec<DMatrix<f64>>,
    pub consensus: DMatrix<f64>,
    /// Total residual `Σ_k ‖aligned_k − consensus‖²` after each iteration.
    pub residual_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl GpaResult {
    pub fn residual(&self) -> f64 {
        *self.residual_trace.last().unwrap_or(&0.0)
    }
}

/// Generalized Procrustes analysis.
///
/// Starts from the first (centred) configuration as consensus, then
/// alternates aligning every configuration to the consensus and replacing
/// the consensus by the mean of the aligned configurations, until the
/// consensus moves less than `tol` (Frobenius norm). With scaling enabled
/// the consensus is rescaled to the root-mean-square size of the inputs
/// after each update so the solution cannot shrink towards zero.
pub fn gpa(configs: &[DMatrix<f64>], options: &GpaOptions) -> Result<GpaResult> {
    if configs.len() < 2 {
        return Err(Error::InvalidParameter("gpa needs at least two configurations".into()));
    }
    let shape = configs[0].shape();
    if configs.iter().any(|c| c.shape() != shape) {
        return Err(Error::DimensionMismatch("gpa configurations differ in shape".into()));
    }
    let centered: Vec<DMatrix<f64>> = configs.iter().map(center_columns).collect();
    let target_size =
        (centered.iter().map(|c| c.norm_squared()).sum::<f64>() / centered.len() as f64).sqrt();
    let mut consensus = centered[0].clone();
    let mut aligned = centered.clone();
    let mut residual_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iter {
        iterations += 1;
        aligned = centered
            .iter()
            .map(|c| {
                let sol = procrustes(c, &consensus, options.allow_scale, options.allow_reflection)?;
                Ok(sol.apply(c))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut next = aligned.iter().fold(DMatrix::zeros(shape.0, shape.1), |acc, a| acc + a)
            / aligned.len() as f64;
        if options.allow_scale {
            let size = next.norm();
            if size > 0.0 {
                next *= target_size / size;
            }
        }
        let residual: f64 = aligned.iter().map(|a| (a - &next).norm_squared()).sum();
        residual_trace.push(residual);
        let moved = (&next - &consensus).norm();
        consensus = next;
        if moved < options.tol {
            converged = true;
            break;
        }
    }
    Ok(GpaResult { aligned, consensus, residual_trace, iterations, converged })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentMode {
    /// Align frame `t` onto the aligned frame `t − 1`.
    Sequential,
    /// Align every frame to the GPA consensus of all frames.
    Gpa,
}

impl std::str::FromStr for AlignmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(AlignmentMode::Sequential),
            "gpa" => Ok(AlignmentMode::Gpa),
            other => Err(Error::InvalidParameter(format!("unknown alignment mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    pub mode: AlignmentMode,
    /// Initialize frame `t`'s MDS from frame `t − 1`'s configuration.
    pub warm_start: bool,
    pub allow_reflection: bool,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self { mode: AlignmentMode::Sequential, warm_start: true, allow_reflection: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEmbedding {
    /// Aligned per-frame configurations.
    pub frames: Vec<DMatrix<f64>>,
    /// Per-frame embeddings before alignment.
    pub raw_frames: Vec<DMatrix<f64>>,
    pub frame_times: Vec<f64>,
    pub stress_per_frame: Vec<f64>,
    pub labels: Vec<String>,
}

impl TrajectoryEmbedding {
    /// `Σ_t ‖frame_t − frame_{t−1}‖²_F` over the aligned frames.
    pub fn inter_frame_motion(&self) -> f64 {
        motion(&self.frames)
    }

    pub fn dims(&self) -> usize {
        self.frames[0].ncols()
    }
}

pub fn motion(frames: &[DMatrix<f64>]) -> f64 {
    frames.windows(2).map(|w| (&w[1] - &w[0]).norm_squared()).sum()
}

fn embed(dm: &DistanceMatrix, cfg: &EmbeddingConfig, warm: Option<&DMatrix<f64>>) -> Result<(DMatrix<f64>, f64)> {
    let result = match warm {
        Some(init) => {
            let given = EmbeddingConfig { init: EmbeddingInit::Given, ..*cfg };
            stress_mds(dm, &given, Some(init))?
        }
        None => stress_mds(dm, &EmbeddingConfig { init: EmbeddingInit::Classical, ..*cfg }, None)?,
    };
    Ok((result.points, result.stress))
}

pub fn align_trajectory(
    movie: &RdmMovie,
    cfg: &EmbeddingConfig,
    options: &TrajectoryOptions,
) -> Result<TrajectoryEmbedding> {
    cfg.validate()?;
    let frames_in = movie.frames();
    let mut raw_frames = Vec::with_capacity(movie.len());
    let mut stress_per_frame = Vec::with_capacity(movie.len());
    let frames = match options.mode {
        AlignmentMode::Sequential => {
            let mut aligned: Vec<DMatrix<f64>> = Vec::with_capacity(movie.len());
            for dm in frames_in {
                let prev = aligned.last();
                let warm = if options.warm_start { prev } else { None };
                let (points, stress) = embed(dm, cfg, warm)?;
                let out = match prev {
                    None => points.clone(),
                    Some(p) => procrustes(&points, p, false, options.allow_reflection)?.apply(&points),
                };
                raw_frames.push(points);
                stress_per_frame.push(stress);
                aligned.push(out);
            }
            aligned
        }
        AlignmentMode::Gpa => {
            let embedded: Vec<(DMatrix<f64>, f64)> = if options.warm_start {
                let mut out: Vec<(DMatrix<f64>, f64)> = Vec::with_capacity(movie.len());
                for dm in frames_in {
                    let warm = out.last().map(|(p, _)| p);
                    let e = embed(dm, cfg, warm)?;
                    out.push(e);
                }
                out
            } else {
                frames_in
                    .par_iter()
                    .map(|dm| embed(dm, cfg, None))
                    .collect::<Vec<_>>()
                    .into_iter()
                    .collect::<Result<Vec<_>>>()?
            };
            for (p, s) in embedded {
                raw_frames.push(p);
                stress_per_frame.push(s);
            }
            if raw_frames.len() == 1 {
                raw_frames.clone()
            } else {
                let opts = GpaOptions { allow_reflection: options.allow_reflection, ..GpaOptions::default() };
                gpa(&raw_frames, &opts)?.aligned
            }
        }
    };
    Ok(TrajectoryEmbedding {
        frames,
        raw_frames,
        frame_times: movie.frame_times().to_vec(),
        stress_per_frame,
        labels: movie.labels().to_vec(),
    })
}
