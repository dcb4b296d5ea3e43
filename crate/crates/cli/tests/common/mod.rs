#![allow(dead_code)]

use std::path::{Path, PathBuf};

use geotopo::rng::SeedSpec;
use rand_distr::{Distribution, StandardNormal};

pub fn write(dir: &Path, name: &str, text: &str) -> String {
    let p: PathBuf = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().to_string()
}

fn gaussian(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = SeedSpec::new(seed).stream();
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Long CSV with `frames` frames of 6 conditions × 4 channels; a static
/// dataset repeats frame 0.
pub fn long_csv(frames: usize, seed: u64, static_frames: bool) -> String {
    let base = gaussian(seed, 6 * 4);
    let drift = gaussian(seed + 1, frames * 6 * 4);
    let mut s = String::from("time,condition,channel,value\n");
    for t in 0..frames {
        for c in 0..6 {
            for k in 0..4 {
                let mut v = base[c * 4 + k];
                if !static_frames {
                    v += 0.2 * drift[(t * 6 + c) * 4 + k];
                }
                s.push_str(&format!("{}.5,cond{c},ch{k},{v:e}\n", t));
            }
        }
    }
    s
}

pub fn matrix_csv(seed: u64, rows: usize, cols: usize, labeled: bool) -> String {
    let v = gaussian(seed, rows * cols);
    let mut s = String::new();
    if labeled {
        s.push_str("condition,");
    }
    s.push_str(&(0..cols).map(|c| format!("v{c}")).collect::<Vec<_>>().join(","));
    s.push('\n');
    for i in 0..rows {
        if labeled {
            s.push_str(&format!("s{i},"));
        }
        s.push_str(&(0..cols).map(|c| format!("{:e}", v[i * cols + c])).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

pub fn cloud_csv(seed: u64, m: usize) -> String {
    let v = gaussian(seed, m * 2);
    let mut s = String::from("time,x,y\n");
    for i in 0..m {
        s.push_str(&format!("{i},{:e},{:e}\n", v[2 * i], v[2 * i + 1]));
    }
    s
}

pub const BENCH_CONFIG: &str = r#"{
  "families": [
    {"family_id": "clusters", "generator": {"kind": "clusters", "k": 2, "spread": 0.3}, "noise_sd": 0.4},
    {"family_id": "tanh_net", "generator": {"kind": "random_feature_net", "depth": 2, "width": 20, "nonlinearity": "tanh"}, "noise_sd": 0.4}
  ],
  "stimuli": {"kind": "gaussian", "n_conditions": 16, "dims": 4, "seed": 7},
  "statistic": {"kind": "rdm", "comparator": "cosine"},
  "trials_per_family": 6,
  "instances_per_family": 2,
  "seed": 2024,
  "optimize": {"grid": [[0.0, 1.0], [0.2, 1.0], [0.2, 0.8]]}
}
"#;

/// Runs the cli in-process and returns (exit code, stdout, stderr).
pub fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["geotopo"];
    argv.extend_from_slice(args);
    let code = geotopo_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}
