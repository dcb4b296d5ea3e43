//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use geotopo::alignment::{align_trajectory, procrustes, AlignmentMode, TrajectoryOptions};
use geotopo::data::{default_labels, DistanceMatrix, RdmMovie};
use geotopo::dissimilarity::{compute_rdm, DissimilarityMeasure};
use geotopo::embedding::{stress_mds, EmbeddingConfig};
use geotopo::independence::{distance_correlation, permutation_test, AdaptiveConfig, PairedSample};
use geotopo::modelbench::{
    optimize_thresholds, run_benchmark, BenchmarkSize, Generator, ModelFamily, Nonlinearity, Statistic,
};
use geotopo::rng::{SeedSpec, Stream};
use geotopo::simcompare::{kendall_tau_a, linear_cka, svcca, RdmComparator, RepresentationPair};
use geotopo::simplicial::{
    betti_numbers, build_filtration_graph, simplex_counts, FiltrationGraph, FiltrationParams, TimedPointCloud,
};
use geotopo::transform::{transform_rdm, GeoTopoTransform, RampShape, ThresholdBand};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Binomial, DiscreteCDF};

type Outcome = Result<String, String>;

fn normal(rng: &mut Stream) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Stream) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

fn random_orthogonal(dim: usize, rng: &mut Stream) -> DMatrix<f64> {
    let qr = gaussian_matrix(dim, dim, rng).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..dim {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

fn random_rotation(dim: usize, rng: &mut Stream) -> DMatrix<f64> {
    let mut q = random_orthogonal(dim, rng);
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn identity_transform() -> Outcome {
    let start = Instant::now();
    let mut rng = SeedSpec::new(101).stream();
    for k in 0..100 {
        let n = rng.random_range(3..=25);
        let values: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.random_range(0.01..10.0)).collect();
        let dm = DistanceMatrix::from_upper_triangle(&values, default_labels(n)).map_err(|e| e.to_string())?;
        let max = values.iter().copied().fold(0.0, f64::max);
        let t = GeoTopoTransform::new(0.0, max, RampShape::Linear).map_err(|e| e.to_string())?;
        let out = transform_rdm(&dm, &t);
        check(out.matrix() == dm.matrix(), || format!("rdm {k} changed"))?;
        let q = ThresholdBand::quantile(0.0, 1.0).unwrap().apply(&dm, RampShape::Linear).map_err(|e| e.to_string())?;
        check(q.matrix() == dm.matrix(), || format!("quantile band changed rdm {k}"))?;
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("100 rdms exact in {:.2?}", start.elapsed()))
}

/// Central 99% acceptance region of Binomial(n, p).
fn binomial_region(n: u64, p: f64) -> (u64, u64) {
    let b = Binomial::new(p, n).unwrap();
    let lo = (0..=n).find(|&k| b.cdf(k) > 0.005).unwrap();
    let hi = (0..=n).find(|&k| b.cdf(k) >= 0.995).unwrap();
    (lo, hi)
}

fn calibration() -> Outcome {
    let start = Instant::now();
    let bands: Vec<ThresholdBand> =
        [(0.0, 1.0), (0.0, 0.5), (0.25, 1.0), (0.25, 0.75)].iter().map(|&(l, u)| ThresholdBand::quantile(l, u).unwrap()).collect();
    let config = AdaptiveConfig::new(bands);
    let trials = 500u64;
    let mut rejections = 0u64;
    for t in 0..trials {
        let mut rng = SeedSpec::new(202).child(t).stream();
        let x = gaussian_matrix(30, 2, &mut rng);
        let y = gaussian_matrix(30, 2, &mut rng);
        let sample = PairedSample::new(x, y).map_err(|e| e.to_string())?;
        let r = permutation_test(&sample, &config, 199, &SeedSpec::new(203).child(t)).map_err(|e| e.to_string())?;
        if r.p_value <= 0.05 {
            rejections += 1;
        }
    }
    let (lo, hi) = binomial_region(trials, 0.05);
    check((lo..=hi).contains(&rejections), || format!("{rejections}/{trials} rejections outside [{lo}, {hi}]"))?;

    let x = gaussian_matrix(30, 2, &mut SeedSpec::new(204).stream());
    let sample = PairedSample::new(x.clone(), x).unwrap();
    let r = permutation_test(&sample, &config, 199, &SeedSpec::new(205)).map_err(|e| e.to_string())?;
    check(r.p_value == 1.0 / 200.0, || format!("y = x gave p = {}", r.p_value))?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("{rejections}/{trials} rejections in [{lo}, {hi}], y=x p=1/200, {:.1?}", start.elapsed()))
}

fn naive_dcor(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let dist = |m: &DMatrix<f64>, i: usize, j: usize| (m.row(i) - m.row(j)).norm();
    let centered = |m: &DMatrix<f64>| {
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = dist(m, i, j);
            }
        }
        let mut row = vec![0.0; n];
        let mut col = vec![0.0; n];
        let mut all = 0.0;
        for i in 0..n {
            for j in 0..n {
                row[i] += a[i][j] / n as f64;
                col[j] += a[i][j] / n as f64;
                all += a[i][j] / (n * n) as f64;
            }
        }
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                out[i][j] = a[i][j] - row[i] - col[j] + all;
            }
        }
        out
    };
    let (a, b) = (centered(x), centered(y));
    let mut xy = 0.0;
    let mut xx = 0.0;
    let mut yy = 0.0;
    for i in 0..n {
        for j in 0..n {
            xy += a[i][j] * b[i][j];
            xx += a[i][j] * a[i][j];
            yy += b[i][j] * b[i][j];
        }
    }
    let nn = (n * n) as f64;
    ((xy / nn) / ((xx / nn) * (yy / nn)).sqrt()).sqrt()
}

fn dcor_oracle() -> Outcome {
    let mut rng = SeedSpec::new(303).stream();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(4..=12);
        let px = rng.random_range(1..=3);
        let py = rng.random_range(1..=3);
        let x = gaussian_matrix(n, px, &mut rng);
        let mut y = gaussian_matrix(n, py, &mut rng);
        y.column_mut(0).axpy(1.0, &x.column(0), 0.5);
        let lib = distance_correlation(&PairedSample::new(x.clone(), y.clone()).unwrap(), DissimilarityMeasure::Euclidean)
            .map_err(|e| e.to_string())?
            .value;
        worst = worst.max((lib - naive_dcor(&x, &y)).abs());
    }
    check(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    Ok(format!("50 samples, max deviation {worst:.1e}"))
}

fn mds_recovery() -> Outcome {
    let mut rng = SeedSpec::new(404).stream();
    let mut worst_stress: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for k in 0..100 {
        let n = rng.random_range(4..=20);
        let pts = gaussian_matrix(n, 2, &mut rng) * 3.0;
        let dm = compute_rdm(&pts, DissimilarityMeasure::Euclidean).map_err(|e| e.to_string())?;
        let r = stress_mds(&dm, &EmbeddingConfig::with_dims(2), None).map_err(|e| e.to_string())?;
        check(r.stress_trace.windows(2).all(|w| w[1] <= w[0]), || format!("config {k}: stress trace increased"))?;
        worst_stress = worst_stress.max(r.stress);
        let emb = compute_rdm(&r.points, DissimilarityMeasure::Euclidean).unwrap();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = dm.get(i, j);
                worst_rel = worst_rel.max((emb.get(i, j) - d).abs() / d);
            }
        }
    }
    check(worst_stress < 1e-10, || format!("max stress {worst_stress:e}"))?;
    check(worst_rel <= 1e-8, || format!("max relative distance error {worst_rel:e}"))?;
    Ok(format!("max stress {worst_stress:.1e}, max relative error {worst_rel:.1e}"))
}

fn procrustes_recovery() -> Outcome {
    let mut rng = SeedSpec::new(505).stream();
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let dims = if k % 2 == 0 { 2 } else { 3 };
        let n = rng.random_range(dims + 1..=15);
        let src = gaussian_matrix(n, dims, &mut rng);
        let rot = random_rotation(dims, &mut rng);
        let shift: Vec<f64> = (0..dims).map(|_| 5.0 * normal(&mut rng)).collect();
        let mut target = &src * &rot;
        for mut row in target.row_iter_mut() {
            for c in 0..dims {
                row[c] += shift[c];
            }
        }
        let sol = procrustes(&src, &target, false, false).map_err(|e| e.to_string())?;
        worst = worst.max(sol.residual);
    }
    check(worst < 1e-16, || format!("max residual {worst:e}"))?;

    let pts = gaussian_matrix(8, 3, &mut rng);
    let dm = compute_rdm(&pts, DissimilarityMeasure::Euclidean).unwrap();
    let movie = RdmMovie::new(vec![dm; 6], (0..6).map(f64::from).collect()).unwrap();
    let mut motion: f64 = 0.0;
    for mode in [AlignmentMode::Sequential, AlignmentMode::Gpa] {
        for warm_start in [true, false] {
            let opts = TrajectoryOptions { mode, warm_start, allow_reflection: false };
            let t = align_trajectory(&movie, &EmbeddingConfig::with_dims(2), &opts).map_err(|e| e.to_string())?;
            motion = motion.max(t.inter_frame_motion());
        }
    }
    check(motion < 1e-8, || format!("static movie motion {motion:e}"))?;
    Ok(format!("max residual {worst:.1e}, static motion {motion:.1e}"))
}

fn random_graph(m: usize, p: f64, rng: &mut Stream) -> FiltrationGraph {
    let mut edges = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    FiltrationGraph::from_edges(m, &edges).unwrap()
}

fn is_clique(g: &FiltrationGraph, mask: u32) -> bool {
    let v: Vec<usize> = (0..32).filter(|&i| mask >> i & 1 == 1).collect();
    v.iter().enumerate().all(|(a, &i)| v[a + 1..].iter().all(|&j| g.has_edge(i, j)))
}

/// Simplices of the clique complex up to `max_dim`, grouped by dimension.
fn enumerate_cliques(g: &FiltrationGraph, max_dim: usize) -> Vec<Vec<u32>> {
    let m = g.vertex_count();
    let mut out = vec![Vec::new(); max_dim + 1];
    for mask in 1u32..(1 << m) {
        let k = mask.count_ones() as usize;
        if k <= max_dim + 1 && is_clique(g, mask) {
            out[k - 1].push(mask);
        }
    }
    out
}

fn dense_rank(mut rows: Vec<Vec<bool>>) -> usize {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][c]) else { continue };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && rows[r][c] {
                let pivot = rows[rank].clone();
                for (x, y) in rows[r].iter_mut().zip(pivot) {
                    *x ^= y;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn boundary(faces: &[u32], cells: &[u32]) -> Vec<Vec<bool>> {
    faces.iter().map(|&f| cells.iter().map(|&c| c & f == f).collect()).collect()
}

fn simplex_oracle() -> Outcome {
    let mut rng = SeedSpec::new(606).stream();
    for k in 0..50 {
        let m = rng.random_range(3..=12);
        let p = rng.random_range(0.2..0.9);
        let g = random_graph(m, p, &mut rng);
        let counts = simplex_counts(&g, 5).map_err(|e| e.to_string())?;
        let expected: Vec<u64> = enumerate_cliques(&g, 5).iter().map(|c| c.len() as u64).collect();
        check(counts == expected, || format!("graph {k}: {counts:?} vs {expected:?}"))?;
    }
    let k5: Vec<(usize, usize)> = (0..5).flat_map(|i| ((i + 1)..5).map(move |j| (i, j))).collect();
    let counts = simplex_counts(&FiltrationGraph::from_edges(5, &k5).unwrap(), 5).unwrap();
    check(counts[..5] == [5, 10, 10, 5, 1], || format!("K5 gave {counts:?}"))?;
    let mut checked = 0;
    for k in 0..50 {
        let m = rng.random_range(3..=10);
        let p = rng.random_range(0.2..0.8);
        let g = random_graph(m, p, &mut rng);
        let cl = enumerate_cliques(&g, 2);
        let r1 = dense_rank(boundary(&cl[0], &cl[1]));
        let r2 = dense_rank(boundary(&cl[1], &cl[2]));
        let b0 = cl[0].len() - r1;
        let b1 = cl[1].len() - r1 - r2;
        let got = betti_numbers(&g);
        check(got == (b0 as u64, Some(b1 as u64)), || format!("graph {k}: betti {got:?} vs ({b0}, {b1})"))?;
        checked += 1;
    }
    Ok(format!("50 graphs match enumeration, K5 exact, {checked} betti pairs match"))
}

fn filtration_monotonicity() -> Outcome {
    let mut rng = SeedSpec::new(707).stream();
    for c in 0..20 {
        let m = rng.random_range(8..=30);
        let pts = gaussian_matrix(m, 2, &mut rng);
        let times: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..10.0)).collect();
        let cloud = TimedPointCloud::new(pts, Some(times)).map_err(|e| e.to_string())?;
        let mut prev: Option<Vec<u64>> = None;
        for step in 0..10 {
            let eps = 0.15 * (step + 1) as f64;
            let g = build_filtration_graph(&cloud, &FiltrationParams::new(eps, None, 5).unwrap()).map_err(|e| e.to_string())?;
            let counts = simplex_counts(&g, 5).map_err(|e| e.to_string())?;
            if let Some(p) = &prev {
                check(p.iter().zip(&counts).all(|(a, b)| a <= b), || format!("cloud {c}: counts fell at eps {eps}"))?;
            }
            for tau in [0.5, 2.0, 5.0] {
                let gt = build_filtration_graph(&cloud, &FiltrationParams::new(eps, Some(tau), 5).unwrap()).unwrap();
                let ct = simplex_counts(&gt, 5).unwrap();
                check(ct.iter().zip(&counts).all(|(a, b)| a <= b), || format!("cloud {c}: tau {tau} increased counts"))?;
            }
            prev = Some(counts);
        }
    }
    Ok("20 clouds x 10 epsilons monotone, tau never increases".into())
}

fn kendall_brute(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len();
    let mut s: i64 = 0;
    for i in 0..m {
        for j in (i + 1)..m {
            let x = (a[i] - a[j]).signum() as i64 * (a[i] != a[j]) as i64;
            let y = (b[i] - b[j]).signum() as i64 * (b[i] != b[j]) as i64;
            s += x * y;
        }
    }
    s as f64 / (m * (m - 1) / 2) as f64
}

fn comparator_invariance() -> Outcome {
    let mut rng = SeedSpec::new(808).stream();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(10..=40);
        let p = rng.random_range(2..=6);
        let x = gaussian_matrix(n, p, &mut rng);
        let y = &x * random_orthogonal(p, &mut rng);
        let pair = RepresentationPair::new(x, y).map_err(|e| e.to_string())?;
        let cka = linear_cka(&pair).map_err(|e| e.to_string())?;
        let sv = svcca(&pair, 0.99, 1e-8).map_err(|e| e.to_string())?;
        worst = worst.max((cka - 1.0).abs()).max((sv - 1.0).abs());
    }
    check(worst <= 1e-6, || format!("max deviation from 1: {worst:e}"))?;
    for k in 0..100 {
        let m = rng.random_range(2..=500);
        let levels = rng.random_range(2..=50);
        let a: Vec<f64> = (0..m).map(|_| rng.random_range(0..levels) as f64).collect();
        let b: Vec<f64> = (0..m).map(|i| if i % 3 == 0 { normal(&mut rng) } else { rng.random_range(0..levels) as f64 }).collect();
        let fast = kendall_tau_a(&a, &b).ok_or("kendall returned None")?;
        let slow = kendall_brute(&a, &b);
        check(fast == slow, || format!("pair {k}: fast {fast} vs brute {slow}"))?;
    }
    Ok(format!("max CKA/SVCCA deviation {worst:.1e}, 100 kendall pairs exact"))
}

fn model_selection() -> Outcome {
    let start = Instant::now();
    let mut rng = SeedSpec::new(909).stream();
    let stimuli = gaussian_matrix(9, 3, &mut rng);
    let fam = |id: &str, g| ModelFamily::new(id, g, 0.0).unwrap();
    let fams = vec![fam("clusters", Generator::Clusters { k: 3, spread: 0.0 }), fam("ring", Generator::Ring), fam("grid", Generator::Grid)];
    let r = run_benchmark(&fams, &stimuli, &Statistic::rdm(RdmComparator::Spearman), 10, 2, &SeedSpec::new(910))
        .map_err(|e| e.to_string())?;
    check(r.accuracy == 1.0, || format!("separable accuracy {}", r.accuracy))?;

    let mut rng = SeedSpec::new(7).stream();
    let stimuli = gaussian_matrix(16, 4, &mut rng);
    let fams = vec![
        ModelFamily::new("clusters", Generator::Clusters { k: 2, spread: 0.3 }, 0.4).unwrap(),
        ModelFamily::new("tanh_net", Generator::RandomFeatureNet { depth: 2, width: 20, nonlinearity: Nonlinearity::Tanh }, 0.4)
            .unwrap(),
    ];
    let grid: Vec<(f64, f64)> =
        [0.0, 0.1, 0.2, 0.3, 0.4, 0.5].iter().flat_map(|&l| [0.6, 0.8, 1.0].map(|u| (l, u))).collect();
    let size = BenchmarkSize { trials_per_family: 30, instances_per_family: 2 };
    let opt = optimize_thresholds(&fams, &stimuli, RdmComparator::Cosine, RampShape::Linear, &grid, size, &SeedSpec::new(2024))
        .map_err(|e| e.to_string())?;
    check(opt.best_accuracy > opt.baseline_accuracy, || {
        format!("best {:?} at {} does not beat baseline {}", opt.best, opt.best_accuracy, opt.baseline_accuracy)
    })?;
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "separable 1.0; best band {:?} accuracy {:.3} > baseline {:.3}, {:.1?}",
        opt.best,
        opt.best_accuracy,
        opt.baseline_accuracy,
        start.elapsed()
    ))
}

fn binary_output(args: &[String], threads: usize) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_geotopo"))
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))?;
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    let data = common::write(p, "data.csv", &common::long_csv(4, 1, false));
    let x = common::write(p, "x.csv", &common::matrix_csv(2, 20, 3, true));
    let y = common::write(p, "y.csv", &common::matrix_csv(3, 20, 2, true));
    let cloud = common::write(p, "cloud.csv", &common::cloud_csv(4, 30));
    let cfg = common::write(p, "bench.json", common::BENCH_CONFIG);
    let (_, movie, _) = common::run(&["rdm", "--input", &data]);
    let movie = common::write(p, "movie.json", &movie);
    let (_, traj, _) = common::run(&["trajectory", "--input", &data]);
    let traj = common::write(p, "traj.json", &traj);

    let s = |v: &[&str]| v.iter().map(|a| a.to_string()).collect::<Vec<String>>();
    let commands = vec![
        s(&["rdm", "--input", &data, "--measure", "correlation"]),
        s(&["transform", "--input", &movie, "--lower", "0.2", "--upper", "0.8"]),
        s(&["embed", "--input", &data, "--dims", "3"]),
        s(&["trajectory", "--input", &data, "--mode", "gpa"]),
        s(&["dtest", "--x", &x, "--y", &y, "--perms", "199", "--seed", "9", "--grid", "0:1,0.25:1,0:0.5"]),
        s(&["compare", "--x", &x, "--y", &y, "--metric", "svcca"]),
        s(&["simplicial", "--input", &cloud, "--epsilon", "1", "--tau", "8", "--bootstrap", "25", "--sample-size", "20", "--seed", "3"]),
        s(&["bench", "--config", &cfg]),
        s(&["export-plot", "--input", &traj]),
    ];
    for args in &commands {
        let reference = binary_output(args, 1)?;
        for threads in [2, 8] {
            let again = binary_output(args, threads)?;
            check(again == reference, || format!("{} differs at {threads} threads", args[0]))?;
        }
    }
    Ok(format!("{} subcommands byte-identical at 1, 2, 8 threads", commands.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("identity transform", identity_transform),
        ("independence test calibration", calibration),
        ("distance correlation oracle", dcor_oracle),
        ("mds recovery", mds_recovery),
        ("procrustes recovery", procrustes_recovery),
        ("simplex count oracle", simplex_oracle),
        ("filtration monotonicity", filtration_monotonicity),
        ("comparator invariances", comparator_invariance),
        ("model selection benchmark", model_selection),
        ("end-to-end determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
