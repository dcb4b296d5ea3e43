//! Input readers: activity datasets, labelled matrices, RDM documents and
//! point clouds.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use geotopo::data::{validate_dataset, ActivityDataset, DistanceMatrix, RawDataset, RdmMovie};
use geotopo::dissimilarity::{compute_rdm_movie, DissimilarityMeasure};
use geotopo::simplicial::TimedPointCloud;
use nalgebra::DMatrix;
use serde_json::Value;

use crate::doc::Node;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    LongCsv,
    MatrixCsvSet,
    JsonTensor,
    /// A single labelled distance matrix; not a dataset.
    RdmCsv,
}

impl InputFormat {
    pub fn name(self) -> &'static str {
        match self {
            InputFormat::LongCsv => "long_csv",
            InputFormat::MatrixCsvSet => "matrix_csv_set",
            InputFormat::JsonTensor => "json_tensor",
            InputFormat::RdmCsv => "rdm_csv",
        }
    }
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "long_csv" => Ok(InputFormat::LongCsv),
            "matrix_csv_set" => Ok(InputFormat::MatrixCsvSet),
            "json_tensor" => Ok(InputFormat::JsonTensor),
            "rdm_csv" => Ok(InputFormat::RdmCsv),
            other => Err(format!("unknown input format {other:?}")),
        }
    }
}

fn read_text(path: &str) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_string(), message: e.to_string() })
}

fn csv_reader(path: &str) -> CliResult<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io { path: path.to_string(), message: e.to_string() })
}

fn csv_error(path: &str, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    CliError::parse(path, line, e.to_string())
}

fn parse_f64(path: &str, line: u64, field: &str) -> CliResult<f64> {
    field.parse::<f64>().map_err(|_| CliError::parse(path, line, format!("not a number: {field:?}")))
}

pub fn read_dataset(path: &str, format: InputFormat) -> CliResult<ActivityDataset> {
    match format {
        InputFormat::LongCsv => read_long_csv(path),
        InputFormat::MatrixCsvSet => read_matrix_csv_set(path),
        InputFormat::JsonTensor => read_json_tensor(path),
        InputFormat::RdmCsv => Err(CliError::Config("rdm_csv holds a distance matrix, not a dataset".into())),
    }
}

/// `time,condition,channel,value` rows covering the full cross grid.
/// Times are sorted ascending; conditions and channels keep first-appearance order.
pub fn read_long_csv(path: &str) -> CliResult<ActivityDataset> {
    let mut rdr = csv_reader(path)?;
    let header: Vec<String> = rdr.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
    if header != ["time", "condition", "channel", "value"] {
        return Err(CliError::parse(path, 1, "header must be time,condition,channel,value"));
    }
    let mut times: Vec<f64> = Vec::new();
    let mut conditions: Vec<String> = Vec::new();
    let mut channels: Vec<String> = Vec::new();
    let mut cond_index: HashMap<String, usize> = HashMap::new();
    let mut chan_index: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(u64, usize, usize), f64> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(CliError::parse(path, line, format!("expected 4 fields, found {}", record.len())));
        }
        let t = parse_f64(path, line, &record[0])?;
        let v = parse_f64(path, line, &record[3])?;
        if !times.iter().any(|&x| x.to_bits() == t.to_bits()) {
            times.push(t);
        }
        let ci = *cond_index.entry(record[1].to_string()).or_insert_with(|| {
            conditions.push(record[1].to_string());
            conditions.len() - 1
        });
        let ki = *chan_index.entry(record[2].to_string()).or_insert_with(|| {
            channels.push(record[2].to_string());
            channels.len() - 1
        });
        if cells.insert((t.to_bits(), ci, ki), v).is_some() {
            return Err(CliError::parse(path, line, "duplicate (time, condition, channel) cell"));
        }
    }
    if times.iter().any(|t| t.is_nan()) {
        return Err(CliError::Config(format!("{path}: time values must be numbers")));
    }
    times.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let mut values = Vec::with_capacity(times.len() * conditions.len() * channels.len());
    for &t in &times {
        for (ci, c) in conditions.iter().enumerate() {
            for (ki, k) in channels.iter().enumerate() {
                match cells.get(&(t.to_bits(), ci, ki)) {
                    Some(&v) => values.push(v),
                    None => return Err(CliError::IncompleteGrid { time: t, condition: c.clone(), channel: k.clone() }),
                }
            }
        }
    }
    let raw = RawDataset { values, frame_times: times, condition_labels: conditions, channel_count: channels.len() };
    Ok(validate_dataset(raw)?)
}

/// Numeric matrix CSV. When the first header cell is `condition` or
/// `label`, the first column holds row labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub row_labels: Option<Vec<String>>,
    pub column_names: Vec<String>,
    pub values: DMatrix<f64>,
}

pub fn read_matrix_csv(path: &str) -> CliResult<LabeledMatrix> {
    let mut rdr = csv_reader(path)?;
    let header: Vec<String> = rdr.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
    let labeled = matches!(header.first().map(String::as_str), Some("condition" | "label"));
    let skip = usize::from(labeled);
    let column_names = header[skip..].to_vec();
    if column_names.is_empty() {
        return Err(CliError::parse(path, 1, "no value columns"));
    }
    let mut labels = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut n = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(CliError::parse(path, line, format!("expected {} fields, found {}", header.len(), record.len())));
        }
        if labeled {
            labels.push(record[0].to_string());
        }
        for field in record.iter().skip(skip) {
            rows.push(parse_f64(path, line, field)?);
        }
        n += 1;
    }
    Ok(LabeledMatrix {
        row_labels: labeled.then_some(labels),
        values: DMatrix::from_row_slice(n, column_names.len(), &rows),
        column_names,
    })
}

/// Manifest CSV with header `time,path`; each path (relative to the
/// manifest's directory) is a labelled conditions × channels matrix CSV.
pub fn read_matrix_csv_set(path: &str) -> CliResult<ActivityDataset> {
    let base = Path::new(path).parent().unwrap_or(Path::new("."));
    let mut rdr = csv_reader(path)?;
    let header: Vec<String> = rdr.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
    if header != ["time", "path"] {
        return Err(CliError::parse(path, 1, "header must be time,path"));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut first: Option<(Vec<String>, Vec<String>)> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        times.push(parse_f64(path, line, &record[0])?);
        let frame_path = base.join(&record[1]);
        let frame_path = frame_path.to_string_lossy().to_string();
        let m = read_matrix_csv(&frame_path)?;
        let labels = m.row_labels.clone().ok_or_else(|| CliError::parse(&frame_path, 1, "first column must be condition"))?;
        match &first {
            None => first = Some((labels, m.column_names.clone())),
            Some((l, c)) => {
                if *l != labels || *c != m.column_names {
                    return Err(CliError::parse(&frame_path, 1, "conditions or channels differ from the first frame"));
                }
            }
        }
        for i in 0..m.values.nrows() {
            values.extend(m.values.row(i).iter());
        }
    }
    let (labels, channels) = first.ok_or_else(|| CliError::parse(path, 1, "manifest lists no frames"))?;
    let raw = RawDataset { values, frame_times: times, condition_labels: labels, channel_count: channels.len() };
    Ok(validate_dataset(raw)?)
}

fn json_value(path: &str) -> CliResult<Value> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.line() as u64, e.to_string()))
}

fn f64_array(path: &str, v: &Value, what: &str) -> CliResult<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| CliError::parse(path, 0, format!("{what} must be an array")))?
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| CliError::parse(path, 0, format!("{what} must hold numbers"))))
        .collect()
}

fn string_array(path: &str, v: &Value, what: &str) -> CliResult<Vec<String>> {
    v.as_array()
        .ok_or_else(|| CliError::parse(path, 0, format!("{what} must be an array")))?
        .iter()
        .map(|x| x.as_str().map(str::to_string).ok_or_else(|| CliError::parse(path, 0, format!("{what} must hold strings"))))
        .collect()
}

/// `{"format": "json_tensor", "shape": [frames, conditions, channels],
/// "frame_times": [...], "condition_labels": [...], "values": [...]}` with
/// values flattened frame-major, then condition, then channel.
pub fn read_json_tensor(path: &str) -> CliResult<ActivityDataset> {
    let v = json_value(path)?;
    if v["format"] != "json_tensor" {
        return Err(CliError::parse(path, 1, "format must be \"json_tensor\""));
    }
    let shape = f64_array(path, &v["shape"], "shape")?;
    if shape.len() != 3 || shape.iter().any(|s| s.fract() != 0.0 || *s < 0.0) {
        return Err(CliError::parse(path, 0, "shape must be [frames, conditions, channels]"));
    }
    let values = f64_array(path, &v["values"], "values")?;
    let expected = shape.iter().product::<f64>() as usize;
    if values.len() != expected {
        return Err(CliError::parse(path, 0, format!("values has {} entries, shape needs {expected}", values.len())));
    }
    let raw = RawDataset {
        values,
        frame_times: f64_array(path, &v["frame_times"], "frame_times")?,
        condition_labels: string_array(path, &v["condition_labels"], "condition_labels")?,
        channel_count: shape[2] as usize,
    };
    if raw.frame_times.len() != shape[0] as usize || raw.condition_labels.len() != shape[1] as usize {
        return Err(CliError::parse(path, 0, "frame_times or condition_labels disagree with shape"));
    }
    Ok(validate_dataset(raw)?)
}

pub fn json_tensor_document(ds: &ActivityDataset) -> String {
    Node::obj()
        .with("format", "json_tensor")
        .with("shape", vec![ds.n_frames(), ds.n_conditions(), ds.channel_count()])
        .with("frame_times", ds.frame_times().to_vec())
        .with("condition_labels", ds.condition_labels().to_vec())
        .with("values", ds.values().to_vec())
        .render()
}

/// Square CSV whose header is `label,<labels…>` and whose rows start with the row label.
pub fn read_rdm_csv(path: &str) -> CliResult<DistanceMatrix> {
    let m = read_matrix_csv(path)?;
    let labels = m.row_labels.ok_or_else(|| CliError::parse(path, 1, "first header cell must be label"))?;
    if labels != m.column_names {
        return Err(CliError::parse(path, 1, "row labels must match column labels"));
    }
    Ok(DistanceMatrix::new(m.values, labels)?)
}

fn matrix_from_rows(path: &str, v: &Value, what: &str) -> CliResult<DMatrix<f64>> {
    let rows = v.as_array().ok_or_else(|| CliError::parse(path, 0, format!("{what} must be an array of rows")))?;
    let parsed: Vec<Vec<f64>> = rows.iter().map(|r| f64_array(path, r, what)).collect::<CliResult<_>>()?;
    let ncols = parsed.first().map_or(0, Vec::len);
    if parsed.iter().any(|r| r.len() != ncols) {
        return Err(CliError::parse(path, 0, format!("{what} rows differ in length")));
    }
    Ok(DMatrix::from_fn(parsed.len(), ncols, |i, j| parsed[i][j]))
}

/// Reads the output document of a previous command.
pub fn read_document(path: &str, kind: &str) -> CliResult<Value> {
    let v = json_value(path)?;
    if v["kind"] != kind {
        return Err(CliError::parse(path, 1, format!("expected a {kind} document")));
    }
    Ok(v)
}

pub fn movie_from_document(path: &str, doc: &Value) -> CliResult<RdmMovie> {
    let r = &doc["result"];
    let labels = string_array(path, &r["labels"], "labels")?;
    let frames = r["frames"].as_array().ok_or_else(|| CliError::parse(path, 0, "frames must be an array"))?;
    let mut times = Vec::new();
    let mut dms = Vec::new();
    for f in frames {
        times.push(f["time"].as_f64().ok_or_else(|| CliError::parse(path, 0, "frame time missing"))?);
        dms.push(DistanceMatrix::new(matrix_from_rows(path, &f["matrix"], "matrix")?, labels.clone())?);
    }
    Ok(RdmMovie::new(dms, times)?)
}

/// Loads an RDM movie from an `rdm_movie` document, a single `rdm_csv`
/// matrix (one frame at time 0) or a dataset in any format.
pub fn read_movie(path: &str, format: InputFormat, measure: DissimilarityMeasure) -> CliResult<RdmMovie> {
    if path.ends_with(".json") && format != InputFormat::JsonTensor {
        let doc = read_document(path, "rdm_movie")?;
        return movie_from_document(path, &doc);
    }
    match format {
        InputFormat::RdmCsv => Ok(RdmMovie::new(vec![read_rdm_csv(path)?], vec![0.0])?),
        f => Ok(compute_rdm_movie(&read_dataset(path, f)?, measure)?),
    }
}

/// Point cloud CSV; a `time` column, if present, holds timestamps and a
/// leading `condition`/`label` column is ignored.
pub fn read_point_cloud(path: &str) -> CliResult<TimedPointCloud> {
    let m = read_matrix_csv(path)?;
    let time_col = m.column_names.iter().position(|c| c == "time");
    let coords: Vec<usize> = (0..m.column_names.len()).filter(|&c| Some(c) != time_col).collect();
    if coords.is_empty() {
        return Err(CliError::parse(path, 1, "no coordinate columns"));
    }
    let points = DMatrix::from_fn(m.values.nrows(), coords.len(), |i, c| m.values[(i, coords[c])]);
    let times = time_col.map(|t| m.values.column(t).iter().copied().collect());
    Ok(TimedPointCloud::new(points, times)?)
}

pub struct TrajectoryInput {
    pub labels: Vec<String>,
    pub frame_times: Vec<f64>,
    pub frames: Vec<DMatrix<f64>>,
}

pub fn read_trajectory(path: &str) -> CliResult<TrajectoryInput> {
    let doc = read_document(path, "trajectory")?;
    let r = &doc["result"];
    let labels = string_array(path, &r["labels"], "labels")?;
    let frames = r["frames"].as_array().ok_or_else(|| CliError::parse(path, 0, "frames must be an array"))?;
    let mut out = TrajectoryInput { labels, frame_times: Vec::new(), frames: Vec::new() };
    for f in frames {
        out.frame_times.push(f["time"].as_f64().ok_or_else(|| CliError::parse(path, 0, "frame time missing"))?);
        out.frames.push(matrix_from_rows(path, &f["points"], "points")?);
    }
    Ok(out)
}
