//! Subcommand definitions and execution.

use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use geotopo::alignment::{align_trajectory, AlignmentMode, TrajectoryOptions};
use geotopo::data::{default_labels, DistanceMatrix};
use geotopo::dissimilarity::{compute_rdm_with_labels, DissimilarityMeasure};
use geotopo::embedding::{stress_mds, EmbeddingConfig, EmbeddingInit};
use geotopo::independence::{permutation_test, AdaptiveConfig, Aggregation, PairedSample};
use geotopo::modelbench::{optimize_thresholds, run_benchmark, BenchmarkSize, ModelFamily, Statistic};
use geotopo::rng::SeedSpec;
use geotopo::simcompare::{compare_rdms, linear_cka, pwcca, svcca, RdmComparator, RepresentationPair};
use geotopo::simplicial::{build_filtration_graph, simplicial_profile, witness_bootstrap, FiltrationParams};
use geotopo::transform::{RampShape, ThresholdBand, DEFAULT_LOGISTIC_STEEPNESS};
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Deserialize;

use crate::doc::{matrix, Node};
use crate::error::{CliError, CliResult};
use crate::ingest::{self, InputFormat};
use crate::SCHEMA_VERSION;

fn parse<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

fn parse_threads(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("expected a positive integer, got {s:?}")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "geotopo", version, about = "Geometric and topological analysis of representations")]
pub struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, value_parser = parse_threads)]
    pub threads: Option<usize>,
    /// Write the document here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dataset to RDM movie.
    Rdm(RdmArgs),
    /// Geo-topological transform of every frame.
    Transform(TransformArgs),
    /// Per-frame metric MDS.
    Embed(EmbedArgs),
    /// Embedding plus alignment over time.
    Trajectory(TrajectoryArgs),
    /// Adaptive distance-correlation permutation test.
    Dtest(DtestArgs),
    /// Compare two representations.
    Compare(CompareArgs),
    /// Simplex counts and Betti numbers of a filtration graph.
    Simplicial(SimplicialArgs),
    /// Model-selection benchmark from a JSON configuration.
    Bench(BenchArgs),
    /// Trajectory document to plot records.
    #[command(name = "export-plot")]
    ExportPlot(ExportPlotArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: String,
    /// long_csv, matrix_csv_set, json_tensor or rdm_csv; `.json` files that
    /// are not tensors are read as rdm_movie documents.
    #[arg(long, default_value = "long_csv", value_parser = parse::<InputFormat>)]
    pub format: InputFormat,
    #[arg(long, default_value = "euclidean", value_parser = parse::<DissimilarityMeasure>)]
    pub measure: DissimilarityMeasure,
}

impl InputArgs {
    fn params(&self) -> Node {
        Node::obj().with("format", self.format.name()).with("measure", self.measure.name())
    }
}

#[derive(Debug, Args)]
pub struct RdmArgs {
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Quantile,
    Absolute,
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "quantile" => Ok(Scale::Quantile),
            "absolute" => Ok(Scale::Absolute),
            other => Err(format!("unknown scale {other:?}")),
        }
    }
}

impl Scale {
    fn name(self) -> &'static str {
        match self {
            Scale::Quantile => "quantile",
            Scale::Absolute => "absolute",
        }
    }

    fn band(self, lower: f64, upper: f64) -> CliResult<ThresholdBand> {
        Ok(match self {
            Scale::Quantile => ThresholdBand::quantile(lower, upper)?,
            Scale::Absolute => ThresholdBand::absolute(lower, upper)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeName {
    Linear,
    Logistic,
}

impl FromStr for ShapeName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear" => Ok(ShapeName::Linear),
            "logistic" => Ok(ShapeName::Logistic),
            other => Err(format!("unknown shape {other:?}")),
        }
    }
}

fn ramp(shape: ShapeName, steepness: f64) -> RampShape {
    match shape {
        ShapeName::Linear => RampShape::Linear,
        ShapeName::Logistic => RampShape::Logistic { steepness },
    }
}

fn shape_params(node: Node, shape: RampShape) -> Node {
    match shape {
        RampShape::Linear => node.with("shape", "linear"),
        RampShape::Logistic { steepness } => node.with("shape", "logistic").with("steepness", steepness),
    }
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.0)]
    pub lower: f64,
    #[arg(long, default_value_t = 1.0)]
    pub upper: f64,
    /// Whether --lower/--upper are quantile levels or distances.
    #[arg(long, default_value = "quantile", value_parser = parse::<Scale>)]
    pub scale: Scale,
    #[arg(long, default_value = "linear", value_parser = parse::<ShapeName>)]
    pub shape: ShapeName,
    #[arg(long, default_value_t = DEFAULT_LOGISTIC_STEEPNESS)]
    pub steepness: f64,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
}

impl EmbedArgs {
    fn config(&self) -> EmbeddingConfig {
        EmbeddingConfig { dims: self.dims, max_iter: self.max_iter, rel_tol: self.tol, init: EmbeddingInit::Classical }
    }

    fn params(&self) -> Node {
        self.input.params().with("dims", self.dims).with("max_iter", self.max_iter).with("tol", self.tol)
    }
}

#[derive(Debug, Args)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub embed: EmbedArgs,
    #[arg(long, default_value = "sequential", value_parser = parse::<AlignmentMode>)]
    pub mode: AlignmentMode,
    /// Embed every frame from classical MDS instead of the previous frame.
    #[arg(long)]
    pub no_warm_start: bool,
    #[arg(long)]
    pub allow_reflection: bool,
}

#[derive(Debug, Args)]
pub struct DtestArgs {
    /// Sample matrix CSV for x (rows are observations).
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
    #[arg(long, default_value_t = 999)]
    pub perms: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated bands `lower:upper`.
    #[arg(long, default_value = "0:1")]
    pub grid: String,
    #[arg(long, default_value = "quantile", value_parser = parse::<Scale>)]
    pub scale: Scale,
    #[arg(long, default_value = "max", value_parser = parse::<Aggregation>)]
    pub aggregation: Aggregation,
    #[arg(long, default_value = "linear", value_parser = parse::<ShapeName>)]
    pub shape: ShapeName,
    #[arg(long, default_value_t = DEFAULT_LOGISTIC_STEEPNESS)]
    pub steepness: f64,
    #[arg(long, default_value = "euclidean", value_parser = parse::<DissimilarityMeasure>)]
    pub measure: DissimilarityMeasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Cka,
    Svcca,
    Pwcca,
    Rdm(RdmComparator),
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cka" => Ok(Metric::Cka),
            "svcca" => Ok(Metric::Svcca),
            "pwcca" => Ok(Metric::Pwcca),
            other => other.parse::<RdmComparator>().map(Metric::Rdm).map_err(|_| format!("unknown metric {other:?}")),
        }
    }
}

impl Metric {
    fn name(self) -> &'static str {
        match self {
            Metric::Cka => "cka",
            Metric::Svcca => "svcca",
            Metric::Pwcca => "pwcca",
            Metric::Rdm(c) => c.name(),
        }
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Representation CSV (conditions × channels).
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
    #[arg(long, value_parser = parse::<Metric>)]
    pub metric: Metric,
    /// Dissimilarity used to build RDMs for RDM comparators.
    #[arg(long, default_value = "euclidean", value_parser = parse::<DissimilarityMeasure>)]
    pub measure: DissimilarityMeasure,
    #[arg(long, default_value_t = geotopo::simcompare::DEFAULT_VARIANCE_RETAINED)]
    pub variance_retained: f64,
    #[arg(long, default_value_t = geotopo::simcompare::DEFAULT_RIDGE)]
    pub ridge: f64,
}

#[derive(Debug, Args)]
pub struct SimplicialArgs {
    /// Point cloud CSV; a `time` column holds timestamps.
    #[arg(long)]
    pub input: String,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = geotopo::simplicial::DEFAULT_MAX_DIM)]
    pub max_dim: usize,
    /// Number of bootstrap subsamples (0 disables).
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: String,
}

#[derive(Debug, Args)]
pub struct ExportPlotArgs {
    /// Trajectory document.
    #[arg(long)]
    pub input: String,
}

struct Manifest {
    command: &'static str,
    parameters: Node,
    input_paths: Vec<String>,
    master_seed: Option<u64>,
}

fn document(kind: &str, manifest: Manifest, result: Node) -> String {
    let m = Node::obj()
        .with("command", manifest.command)
        .with("parameters", manifest.parameters)
        .with("input_paths", manifest.input_paths)
        .with("master_seed", manifest.master_seed)
        .with("tool_version", env!("CARGO_PKG_VERSION"));
    Node::obj()
        .with("schema_version", SCHEMA_VERSION)
        .with("kind", kind)
        .with("manifest", m)
        .with("result", result)
        .render()
}

pub fn execute(command: &Command) -> CliResult<String> {
    match command {
        Command::Rdm(a) => rdm(a),
        Command::Transform(a) => transform(a),
        Command::Embed(a) => embed(a),
        Command::Trajectory(a) => trajectory(a),
        Command::Dtest(a) => dtest(a),
        Command::Compare(a) => compare(a),
        Command::Simplicial(a) => simplicial(a),
        Command::Bench(a) => bench(a),
        Command::ExportPlot(a) => export_plot(a),
    }
}

fn rdm(a: &RdmArgs) -> CliResult<String> {
    let movie = ingest::read_movie(&a.input.input, a.input.format, a.input.measure)?;
    let frames: Vec<Node> = movie
        .frames()
        .iter()
        .zip(movie.frame_times())
        .map(|(dm, &t)| Node::obj().with("time", t).with("matrix", matrix(dm.matrix())))
        .collect();
    let result = Node::obj()
        .with("measure", a.input.measure.name())
        .with("labels", movie.labels().to_vec())
        .with("frames", frames);
    let manifest = Manifest { command: "rdm", parameters: a.input.params(), input_paths: vec![a.input.input.clone()], master_seed: None };
    Ok(document("rdm_movie", manifest, result))
}

fn transform(a: &TransformArgs) -> CliResult<String> {
    let movie = ingest::read_movie(&a.input.input, a.input.format, a.input.measure)?;
    let band = a.scale.band(a.lower, a.upper)?;
    let shape = ramp(a.shape, a.steepness);
    let mut frames = Vec::with_capacity(movie.len());
    for (dm, &t) in movie.frames().iter().zip(movie.frame_times()) {
        let tr = band.transform_for(dm, shape)?;
        let out = geotopo::transform::transform_rdm(dm, &tr);
        frames.push(
            Node::obj()
                .with("time", t)
                .with("l", tr.lower())
                .with("u", tr.upper())
                .with("matrix", matrix(out.matrix())),
        );
    }
    let params = shape_params(
        a.input.params().with("lower", a.lower).with("upper", a.upper).with("scale", a.scale.name()),
        shape,
    );
    let result = Node::obj().with("labels", movie.labels().to_vec()).with("frames", frames);
    let manifest = Manifest { command: "transform", parameters: params, input_paths: vec![a.input.input.clone()], master_seed: None };
    Ok(document("rdm_movie", manifest, result))
}

fn embed(a: &EmbedArgs) -> CliResult<String> {
    let movie = ingest::read_movie(&a.input.input, a.input.format, a.input.measure)?;
    let cfg = a.config();
    cfg.validate()?;
    let results = movie
        .frames()
        .par_iter()
        .map(|dm| stress_mds(dm, &cfg, None))
        .collect::<geotopo::Result<Vec<_>>>()?;
    let frames: Vec<Node> = results
        .iter()
        .zip(movie.frame_times())
        .map(|(r, &t)| {
            Node::obj()
                .with("time", t)
                .with("stress", r.stress)
                .with("iterations", r.iterations)
                .with("converged", r.converged)
                .with("points", matrix(&r.points))
        })
        .collect();
    let result = Node::obj().with("dims", a.dims).with("labels", movie.labels().to_vec()).with("frames", frames);
    let manifest = Manifest { command: "embed", parameters: a.params(), input_paths: vec![a.input.input.clone()], master_seed: None };
    Ok(document("embedding", manifest, result))
}

fn trajectory(a: &TrajectoryArgs) -> CliResult<String> {
    let movie = ingest::read_movie(&a.embed.input.input, a.embed.input.format, a.embed.input.measure)?;
    let options = TrajectoryOptions { mode: a.mode, warm_start: !a.no_warm_start, allow_reflection: a.allow_reflection };
    let traj = align_trajectory(&movie, &a.embed.config(), &options)?;
    let mode = match a.mode {
        AlignmentMode::Sequential => "sequential",
        AlignmentMode::Gpa => "gpa",
    };
    let frames: Vec<Node> = traj
        .frames
        .iter()
        .zip(&traj.frame_times)
        .map(|(p, &t)| Node::obj().with("time", t).with("points", matrix(p)))
        .collect();
    let result = Node::obj()
        .with("mode", mode)
        .with("dims", traj.dims())
        .with("labels", traj.labels.clone())
        .with("frame_times", traj.frame_times.clone())
        .with("stress_per_frame", traj.stress_per_frame.clone())
        .with("inter_frame_motion", traj.inter_frame_motion())
        .with("frames", frames);
    let params = a
        .embed
        .params()
        .with("mode", mode)
        .with("warm_start", options.warm_start)
        .with("allow_reflection", options.allow_reflection);
    let manifest = Manifest { command: "trajectory", parameters: params, input_paths: vec![a.embed.input.input.clone()], master_seed: None };
    Ok(document("trajectory", manifest, result))
}

fn parse_grid(grid: &str) -> CliResult<Vec<(f64, f64)>> {
    grid.split(',')
        .map(|pair| {
            let (lo, hi) = pair
                .split_once(':')
                .ok_or_else(|| CliError::Config(format!("grid entry {pair:?} is not lower:upper")))?;
            let lo = lo.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad grid bound {lo:?}")))?;
            let hi = hi.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad grid bound {hi:?}")))?;
            Ok((lo, hi))
        })
        .collect()
}

fn aggregation_name(a: Aggregation) -> &'static str {
    match a {
        Aggregation::Max => "max",
        Aggregation::Mean => "mean",
    }
}

fn dtest(a: &DtestArgs) -> CliResult<String> {
    let x = ingest::read_matrix_csv(&a.x)?.values;
    let y = ingest::read_matrix_csv(&a.y)?.values;
    let sample = PairedSample::new(x, y)?;
    let pairs = parse_grid(&a.grid)?;
    let bands = pairs.iter().map(|&(l, u)| a.scale.band(l, u)).collect::<CliResult<Vec<_>>>()?;
    let shape = ramp(a.shape, a.steepness);
    let config = AdaptiveConfig { bands, shape, aggregation: a.aggregation, measure: a.measure };
    let seed = SeedSpec::new(a.seed);
    let r = permutation_test(&sample, &config, a.perms, &seed)?;
    let per: Vec<Node> = r
        .per_threshold_stats
        .unwrap_or_default()
        .iter()
        .map(|s| Node::obj().with("lower", s.lower).with("upper", s.upper).with("statistic", s.statistic))
        .collect();
    let result = Node::obj()
        .with("statistic", r.statistic)
        .with("p_value", r.p_value)
        .with("n_permutations", r.n_permutations)
        .with("aggregation", aggregation_name(a.aggregation))
        .with("per_threshold", per);
    let grid: Vec<Node> = pairs.iter().map(|&(l, u)| Node::from(vec![l, u])).collect();
    let params = shape_params(
        Node::obj()
            .with("perms", a.perms)
            .with("grid", grid)
            .with("scale", a.scale.name())
            .with("aggregation", aggregation_name(a.aggregation)),
        shape,
    )
    .with("measure", a.measure.name());
    let manifest = Manifest { command: "dtest", parameters: params, input_paths: vec![a.x.clone(), a.y.clone()], master_seed: Some(a.seed) };
    Ok(document("independence_test", manifest, result))
}

fn compare(a: &CompareArgs) -> CliResult<String> {
    let x = ingest::read_matrix_csv(&a.x)?;
    let y = ingest::read_matrix_csv(&a.y)?;
    let value = match a.metric {
        Metric::Cka => linear_cka(&RepresentationPair::new(x.values, y.values)?)?,
        Metric::Svcca => svcca(&RepresentationPair::new(x.values, y.values)?, a.variance_retained, a.ridge)?,
        Metric::Pwcca => pwcca(&RepresentationPair::new(x.values, y.values)?, a.variance_retained, a.ridge)?,
        Metric::Rdm(c) => {
            let rdm = |m: ingest::LabeledMatrix| -> CliResult<DistanceMatrix> {
                let labels = m.row_labels.unwrap_or_else(|| default_labels(m.values.nrows()));
                Ok(compute_rdm_with_labels(&m.values, a.measure, labels)?)
            };
            compare_rdms(&rdm(x)?, &rdm(y)?, c)?
        }
    };
    let mut params = Node::obj().with("metric", a.metric.name());
    params = match a.metric {
        Metric::Rdm(_) => params.with("measure", a.measure.name()),
        _ => params.with("variance_retained", a.variance_retained).with("ridge", a.ridge),
    };
    let result = Node::obj().with("metric", a.metric.name()).with("value", value);
    let manifest = Manifest { command: "compare", parameters: params, input_paths: vec![a.x.clone(), a.y.clone()], master_seed: None };
    Ok(document("comparison", manifest, result))
}

fn simplicial(a: &SimplicialArgs) -> CliResult<String> {
    let cloud = ingest::read_point_cloud(&a.input)?;
    let params = FiltrationParams::new(a.epsilon, a.tau, a.max_dim)?;
    let graph = build_filtration_graph(&cloud, &params)?;
    let profile = simplicial_profile(&graph, a.max_dim)?;
    let bootstrap = if a.bootstrap > 0 {
        let size = a.sample_size.ok_or_else(|| CliError::Config("--bootstrap needs --sample-size".into()))?;
        let b = witness_bootstrap(&cloud, &params, a.bootstrap, size, &SeedSpec::new(a.seed))?;
        let per: Vec<Node> = b
            .per_dim
            .iter()
            .enumerate()
            .map(|(d, s)| {
                Node::obj()
                    .with("dim", d)
                    .with("mean", s.mean)
                    .with("sd", s.sd)
                    .with("p2_5", s.p2_5)
                    .with("p50", s.p50)
                    .with("p97_5", s.p97_5)
            })
            .collect();
        Node::obj().with("n_samples", a.bootstrap).with("sample_size", size).with("per_dim", per)
    } else {
        Node::Null
    };
    let result = Node::obj()
        .with("points", cloud.len())
        .with(
            "profile",
            Node::obj()
                .with("counts", profile.counts.clone())
                .with("betti0", profile.betti0)
                .with("betti1", profile.betti1)
                .with("edge_count", profile.edge_count),
        )
        .with("bootstrap", bootstrap);
    let p = Node::obj()
        .with("epsilon", a.epsilon)
        .with("tau", a.tau)
        .with("max_dim", a.max_dim)
        .with("bootstrap", a.bootstrap)
        .with("sample_size", a.sample_size);
    let seed = (a.bootstrap > 0).then_some(a.seed);
    let manifest = Manifest { command: "simplicial", parameters: p, input_paths: vec![a.input.clone()], master_seed: seed };
    Ok(document("simplicial_profile", manifest, result))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchConfig {
    families: Vec<ModelFamily>,
    stimuli: StimuliSpec,
    statistic: StatisticSpec,
    trials_per_family: usize,
    #[serde(default = "one")]
    instances_per_family: usize,
    seed: u64,
    #[serde(default)]
    optimize: Option<OptimizeSpec>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum StimuliSpec {
    /// Standard normal entries drawn from `SeedSpec::new(seed)`.
    Gaussian { n_conditions: usize, dims: usize, seed: u64 },
    Matrix { rows: Vec<Vec<f64>> },
}

impl StimuliSpec {
    fn build(&self) -> CliResult<DMatrix<f64>> {
        match self {
            StimuliSpec::Gaussian { n_conditions, dims, seed } => {
                let mut rng = SeedSpec::new(*seed).stream();
                Ok(DMatrix::from_fn(*n_conditions, *dims, |_, _| StandardNormal.sample(&mut rng)))
            }
            StimuliSpec::Matrix { rows } => {
                let ncols = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != ncols) {
                    return Err(CliError::Config("stimuli rows differ in length".into()));
                }
                Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatisticSpec {
    kind: String,
    #[serde(default)]
    comparator: Option<String>,
    #[serde(default)]
    measure: Option<String>,
    #[serde(default)]
    band: Option<[f64; 2]>,
    #[serde(default)]
    scale: Option<String>,
    #[serde(default)]
    shape: Option<String>,
    #[serde(default)]
    steepness: Option<f64>,
}

fn config_parse<T: FromStr>(s: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| CliError::Config(e.to_string()))
}

impl StatisticSpec {
    fn shape(&self) -> CliResult<RampShape> {
        let name: ShapeName = config_parse(self.shape.as_deref().unwrap_or("linear"))?;
        Ok(ramp(name, self.steepness.unwrap_or(DEFAULT_LOGISTIC_STEEPNESS)))
    }

    fn comparator(&self) -> CliResult<RdmComparator> {
        config_parse(self.comparator.as_deref().ok_or_else(|| CliError::Config("rdm statistic needs a comparator".into()))?)
    }

    fn build(&self) -> CliResult<Statistic> {
        match self.kind.as_str() {
            "cka" => Ok(Statistic::Cka),
            "svcca" => Ok(Statistic::Svcca),
            "rdm" => {
                let measure = config_parse(self.measure.as_deref().unwrap_or("euclidean"))?;
                let band = match self.band {
                    Some([l, u]) => Some(config_parse::<Scale>(self.scale.as_deref().unwrap_or("quantile"))?.band(l, u)?),
                    None => None,
                };
                Ok(Statistic::Rdm { comparator: self.comparator()?, measure, band, shape: self.shape()? })
            }
            other => Err(CliError::Config(format!("unknown statistic kind {other:?}"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizeSpec {
    grid: Vec<[f64; 2]>,
}

fn bench(a: &BenchArgs) -> CliResult<String> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| CliError::Io { path: a.config.clone(), message: e.to_string() })?;
    let cfg: BenchConfig = serde_json::from_str(&text).map_err(|e| CliError::parse(&a.config, e.line() as u64, e.to_string()))?;
    let stimuli = cfg.stimuli.build()?;
    let statistic = cfg.statistic.build()?;
    let seed = SeedSpec::new(cfg.seed);
    let report = run_benchmark(&cfg.families, &stimuli, &statistic, cfg.trials_per_family, cfg.instances_per_family, &seed)?;
    let optimization = match &cfg.optimize {
        None => Node::Null,
        Some(o) => {
            if !matches!(statistic, Statistic::Rdm { .. }) {
                return Err(CliError::Config("threshold optimization needs an rdm statistic".into()));
            }
            let grid: Vec<(f64, f64)> = o.grid.iter().map(|p| (p[0], p[1])).collect();
            let size = BenchmarkSize { trials_per_family: cfg.trials_per_family, instances_per_family: cfg.instances_per_family };
            let r = optimize_thresholds(&cfg.families, &stimuli, cfg.statistic.comparator()?, cfg.statistic.shape()?, &grid, size, &seed)?;
            let surface: Vec<Node> = r
                .surface
                .iter()
                .map(|p| Node::obj().with("lower", p.lower).with("upper", p.upper).with("accuracy", p.accuracy))
                .collect();
            Node::obj()
                .with("best", vec![r.best.0, r.best.1])
                .with("best_accuracy", r.best_accuracy)
                .with("baseline_accuracy", r.baseline_accuracy)
                .with("surface", surface)
        }
    };
    let confusion: Vec<Node> = report.confusion.iter().map(|row| Node::from(row.clone())).collect();
    let result = Node::obj()
        .with("statistic_id", report.statistic_id.clone())
        .with("family_ids", report.family_ids.clone())
        .with("confusion", confusion)
        .with("sensitivity", report.sensitivity.clone())
        .with("specificity", report.specificity.clone())
        .with("accuracy", report.accuracy)
        .with("thresholds_used", report.thresholds_used.map(|(l, u)| vec![l, u]))
        .with("optimization", optimization);
    let params = Node::obj()
        .with("trials_per_family", cfg.trials_per_family)
        .with("instances_per_family", cfg.instances_per_family)
        .with("families", cfg.families.len());
    let manifest = Manifest { command: "bench", parameters: params, input_paths: vec![a.config.clone()], master_seed: Some(cfg.seed) };
    Ok(document("benchmark_report", manifest, result))
}

fn export_plot(a: &ExportPlotArgs) -> CliResult<String> {
    let t = ingest::read_trajectory(&a.input)?;
    let dims = t.frames.first().map_or(0, |f| f.ncols());
    let mut axes: Vec<String> = vec!["time".into()];
    axes.extend((1..=dims).map(|d| format!("dim{d}")));
    let mut records = Vec::new();
    for (f, &time) in t.frames.iter().zip(&t.frame_times) {
        for (i, label) in t.labels.iter().enumerate() {
            records.push(
                Node::obj()
                    .with("time", time)
                    .with("condition", label.clone())
                    .with("coordinates", f.row(i).iter().copied().collect::<Vec<f64>>()),
            );
        }
    }
    let result = Node::obj().with("axes", axes).with("records", records);
    let manifest = Manifest { command: "export-plot", parameters: Node::obj(), input_paths: vec![a.input.clone()], master_seed: None };
    Ok(document("plot_records", manifest, result))
}
