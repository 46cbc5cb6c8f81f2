//! Independent oracles and criterion checks shared by the integration tests
//! and the acceptance runner. Nothing here calls the solver being checked to
//! produce an expected value.
#![allow(dead_code)]

use kinskill::classify::{
    lr_fit, lr_gradient, lr_objective, svm_decision, svm_fit, LabeledSet, LrModel, LrParams,
};
use kinskill::features::{
    curvature_series, depth_perception, jerk_series, path_length, render_feature_csv, speed_series,
    FeatureConfig,
};
use kinskill::ingest::{load_dataset, parse_manifest, Skill, Trial};
use kinskill::pipeline::{extract_all, PipelineModel};
use kinskill::preprocess::{derivative, loess_smooth, Series3};
use kinskill::reduce::{fit_pca, fit_scaler};
use kinskill::synth::gen_population;
use kinskill::validate::{
    fit_fold, make_folds, render_report, run_eval, run_eval_on_features, OutputFormat, Scheme,
};
use kinskill::{ColumnSchema, Dataset, FeatureVector, PipelineConfig, TrialMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub type Check = Result<(), String>;

pub const DT: f64 = 1.0 / 30.0;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn series(values: Vec<[f64; 3]>) -> Series3 {
    Series3::new(values, DT).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sample(f: impl Fn(f64) -> [f64; 3], n: usize) -> Series3 {
    series((0..n).map(|i| f(i as f64 * DT)).collect())
}

// ---------------------------------------------------------------- features

pub fn pl_oracle(points: &[[f64; 3]]) -> f64 {
    let mut total = 0.0;
    for i in 1..points.len() {
        let mut sq = 0.0;
        for c in 0..3 {
            sq += (points[i][c] - points[i - 1][c]).powi(2);
        }
        total += sq.sqrt();
    }
    total
}

pub fn path_length_oracle() -> Check {
    ensure!((path_length(&series(vec![[0.0; 3], [3.0, 4.0, 0.0]])) - 5.0).abs() < 1e-15, "3-4-5");
    ensure!(path_length(&series(vec![[1.0, 2.0, 3.0]])) == 0.0, "single point");
    let mut r = rng(100);
    let pts: Vec<[f64; 3]> = (0..100).map(|_| [r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0)]).collect();
    let got = path_length(&series(pts.clone()));
    let want = pl_oracle(&pts);
    ensure!((got - want).abs() <= 1e-12, "random points: {got} vs {want}");
    Ok(())
}

pub fn depth_perception_oracle() -> Check {
    let z = [0.0, 0.0, 1.0];
    let along = series((0..10).map(|i| [0.0, 0.0, (i as f64).sin()]).collect());
    let dp = depth_perception(&along, &z).unwrap();
    ensure!((dp - path_length(&along)).abs() < 1e-12, "motion along axis");
    let flat = series((0..10).map(|i| [i as f64, (i * i) as f64, 2.0]).collect());
    ensure!(depth_perception(&flat, &z).unwrap() == 0.0, "orthogonal motion");

    let mut r = rng(101);
    let mut p = [0.0f64; 3];
    let mut walk = vec![p];
    for _ in 0..200 {
        for v in p.iter_mut() {
            *v += r.gen_range(-1.0..1.0);
        }
        walk.push(p);
    }
    let oracle: f64 = walk.windows(2).map(|w| (w[1][2] - w[0][2]).abs()).sum();
    let got = depth_perception(&series(walk), &z).unwrap();
    ensure!((got - oracle).abs() <= 1e-12, "random walk: {got} vs {oracle}");
    ensure!(depth_perception(&along, &[0.0, 0.0, 2.0]).is_err(), "non-unit axis accepted");
    Ok(())
}

pub fn speed_oracle() -> Check {
    let steps = series((0..20).map(|i| [i as f64, 0.0, 0.0]).collect());
    ensure!(speed_series(&steps).unwrap().iter().all(|s| (s - 30.0).abs() < 1e-9), "unit steps");
    let still = series(vec![[1.0, 1.0, 1.0]; 6]);
    ensure!(speed_series(&still).unwrap().iter().all(|&s| s == 0.0), "stationary");

    // Sinusoid riding on a drift: speed never vanishes, so relative error is meaningful.
    let (v0, a, w) = (3.0, 2.0, PI);
    let pts = sample(|t| [v0 * t, a * (w * t).sin(), 0.0], 300);
    let speeds = speed_series(&pts).unwrap();
    ensure!(speeds.len() == 299, "length {}", speeds.len());
    for (i, s) in speeds.iter().enumerate() {
        let t = (i as f64 + 0.5) * DT;
        let exact = (v0 * v0 + (a * w * (w * t).cos()).powi(2)).sqrt();
        ensure!((s - exact).abs() / exact < 0.02, "entry {i}: {s} vs {exact}");
    }
    Ok(())
}

pub fn jerk_oracle() -> Check {
    let line = sample(|t| [2.0 * t, -t, 0.5], 60);
    ensure!(jerk_series(&line).unwrap().iter().all(|j| *j <= 1e-9), "line");
    let n = 60;
    let cubic = sample(|t| [t * t * t, 0.0, 0.0], n);
    let j = jerk_series(&cubic).unwrap();
    for (i, v) in j.iter().enumerate().take(n - 3).skip(3) {
        ensure!((v - 6.0).abs() < 1e-6, "cubic entry {i}: {v}");
    }
    ensure!(jerk_series(&sample(|t| [t, 0.0, 0.0], 3)).is_err(), "short series accepted");

    let mut r = rng(102);
    let raw = sample(|t| [t.sin(), t.cos(), 0.1 * t], 300);
    let noisy = series(
        raw.values()
            .iter()
            .map(|p| [p[0] + r.gen_range(-0.05..0.05), p[1] + r.gen_range(-0.05..0.05), p[2]])
            .collect(),
    );
    let smoothed = loess_smooth(&noisy, 0.05).unwrap();
    let mean = |s: &Series3| {
        let j = jerk_series(s).unwrap();
        j.iter().sum::<f64>() / j.len() as f64
    };
    ensure!(mean(&smoothed) < mean(&noisy), "smoothing did not lower mean jerk");
    Ok(())
}

fn curvature_of(points: &Series3) -> Vec<f64> {
    let v = derivative(points).unwrap();
    let a = derivative(&v).unwrap();
    curvature_series(&v, &a).unwrap()
}

pub fn curvature_oracle() -> Check {
    let r = 2.0;
    let circle = sample(|t| [r * (0.5 * t).cos(), r * (0.5 * t).sin(), 0.0], 400);
    let k = curvature_of(&circle);
    for v in &k[2..k.len() - 2] {
        ensure!((v - 0.5).abs() / 0.5 < 0.01, "circle: {v}");
    }
    let line = sample(|t| [t, 2.0 * t, -t], 50);
    ensure!(curvature_of(&line).iter().all(|v| *v <= 1e-9), "line");
    // Helix (r cos s, r sin s, c s) has curvature r / (r^2 + c^2).
    let (hr, hc) = (1.0, 1.0);
    let helix = sample(|t| [hr * t.cos(), hr * t.sin(), hc * t], 400);
    let k = curvature_of(&helix);
    let exact = hr / (hr * hr + hc * hc);
    for v in &k[2..k.len() - 2] {
        ensure!((v - exact).abs() / exact < 0.01, "helix: {v}");
    }
    let v = derivative(&line).unwrap();
    let short = series(v.values()[..10].to_vec());
    ensure!(curvature_series(&v, &short).is_err(), "length mismatch accepted");
    Ok(())
}

pub fn smoothing_oracle() -> Check {
    let constant = series(vec![[1.5, -2.0, 7.25]; 40]);
    ensure!(loess_smooth(&constant, 0.2).unwrap() == constant, "constant series changed");
    let line = series((0..50).map(|i| [2.0 * i as f64, 1.0 - i as f64, 0.5]).collect());
    let out = loess_smooth(&line, 0.3).unwrap();
    for (a, b) in out.values().iter().zip(line.values()) {
        for c in 0..3 {
            ensure!((a[c] - b[c]).abs() <= 1e-9, "line moved: {} vs {}", a[c], b[c]);
        }
    }

    let normal = rand_distr::Normal::new(0.0, 0.1).unwrap();
    let mut r = rng(103);
    let clean: Vec<f64> = (0..300).map(|i| (i as f64 * 0.05).sin()).collect();
    let noisy = series(clean.iter().map(|v| [v + r.sample(normal), 0.0, 0.0]).collect());
    let smooth = loess_smooth(&noisy, 0.1).unwrap();
    let rmse = |s: &Series3| {
        (s.values().iter().zip(&clean).map(|(p, c)| (p[0] - c).powi(2)).sum::<f64>() / 300.0).sqrt()
    };
    ensure!(rmse(&smooth) < rmse(&noisy), "smoothing raised RMSE");
    ensure!(loess_smooth(&noisy, 0.0).is_err() && loess_smooth(&noisy, 1.5).is_err(), "bad span accepted");
    Ok(())
}

pub fn feature_checks() -> Vec<(&'static str, fn() -> Check)> {
    vec![
        ("smoothing", smoothing_oracle as fn() -> Check),
        ("path length", path_length_oracle),
        ("depth perception", depth_perception_oracle),
        ("speed", speed_oracle),
        ("jerk", jerk_oracle),
        ("curvature", curvature_oracle),
    ]
}

// ------------------------------------------------------------- classifiers

/// Solves a small dense system by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp()
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// Half-width of the bias interval allowed by KKT; zero when some
    /// multiplier is strictly inside the box.
    pub bias_slack: f64,
    pub objective: f64,
}

impl DualSolution {
    pub fn decision(&self, x: &[Vec<f64>], y: &[f64], gamma: f64, at: &[f64]) -> f64 {
        self.alphas.iter().zip(x).zip(y).map(|((a, xi), yi)| a * yi * kernel(xi, at, gamma)).sum::<f64>() + self.bias
    }
}

/// Exact soft-margin dual by enumerating which multipliers sit at 0, at C,
/// or strictly between; each free set fixes a linear KKT system. With no
/// free multiplier the bias is only bounded, and the midpoint is used.
pub fn brute_force_dual(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64) -> Option<DualSolution> {
    let n = x.len();
    let k: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| kernel(a, b, gamma)).collect()).collect();
    let objective = |al: &[f64]| {
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += al[i] * al[j] * y[i] * y[j] * k[i][j];
            }
        }
        al.iter().sum::<f64>() - 0.5 * q
    };
    let mut best: Option<DualSolution> = None;
    for code in 0..3usize.pow(n as u32) {
        // state 0: alpha = 0, 1: alpha = C, 2: free
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        if free.is_empty() {
            let alphas: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
            if alphas.iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>().abs() > 1e-12 {
                continue;
            }
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..n {
                let g: f64 = (0..n).map(|j| alphas[j] * y[j] * k[i][j]).sum();
                // alpha = 0 needs y f >= 1, alpha = C needs y f <= 1.
                let bound = y[i] - g;
                match (state[i], y[i] > 0.0) {
                    (0, true) | (1, false) => lo = lo.max(bound),
                    _ => hi = hi.min(bound),
                }
            }
            if lo > hi + 1e-9 || !lo.is_finite() || !hi.is_finite() {
                continue;
            }
            let obj = objective(&alphas);
            if best.as_ref().map_or(true, |b| obj > b.objective) {
                best = Some(DualSolution { alphas, bias: 0.5 * (lo + hi), bias_slack: 0.5 * (hi - lo).max(0.0), objective: obj });
            }
            continue;
        }
        let m = free.len();
        let mut a = vec![vec![0.0; m + 1]; m + 1];
        let mut rhs = vec![0.0; m + 1];
        for (r, &i) in free.iter().enumerate() {
            for (col, &j) in free.iter().enumerate() {
                a[r][col] = y[j] * k[i][j];
            }
            a[r][m] = 1.0;
            rhs[r] = y[i] - (0..n).filter(|&j| state[j] == 1).map(|j| c * y[j] * k[i][j]).sum::<f64>();
        }
        for (col, &j) in free.iter().enumerate() {
            a[m][col] = y[j];
        }
        rhs[m] = -(0..n).filter(|&j| state[j] == 1).map(|j| c * y[j]).sum::<f64>();
        let Some(sol) = gauss_solve(a, rhs) else { continue };

        let mut alphas: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        for (col, &i) in free.iter().enumerate() {
            alphas[i] = sol[col];
        }
        let bias = sol[m];
        if free.iter().any(|&i| alphas[i] <= 0.0 || alphas[i] >= c) {
            continue;
        }
        let kkt_ok = (0..n).all(|i| {
            let f: f64 = (0..n).map(|j| alphas[j] * y[j] * k[i][j]).sum::<f64>() + bias;
            match state[i] {
                0 => y[i] * f >= 1.0 - 1e-9,
                1 => y[i] * f <= 1.0 + 1e-9,
                _ => true,
            }
        });
        if !kkt_ok {
            continue;
        }
        let obj = objective(&alphas);
        if best.as_ref().map_or(true, |b| obj > b.objective) {
            best = Some(DualSolution { alphas, bias, bias_slack: 0.0, objective: obj });
        }
    }
    best
}

fn signs(y: &[Skill]) -> Vec<f64> {
    y.iter().map(|s| if *s == Skill::Expert { 1.0 } else { -1.0 }).collect()
}

fn random_set(seed: u64, n: usize, d: usize, shift: f64) -> LabeledSet {
    let mut r = rng(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let s = if i % 2 == 0 { Skill::Expert } else { Skill::Novice };
        let off = if s == Skill::Expert { shift } else { -shift };
        x.push((0..d).map(|_| r.gen_range(-1.0..1.0) + off).collect());
        y.push(s);
    }
    LabeledSet::new(x, y).unwrap()
}

pub fn lr_gradient_oracle() -> Check {
    for seed in 0..5 {
        let data = random_set(200 + seed, 30, 4, 0.3);
        let params = LrParams::default();
        let fit = lr_fit(&data, &params).map_err(|e| e.to_string())?;
        // Probe away from the optimum too, where the gradient is not ~0.
        let probes = [
            fit.clone(),
            LrModel { beta0: 0.3, beta: vec![0.5, -0.2, 0.1, 0.7] },
        ];
        for m in probes {
            let g = lr_gradient(&m, &data, params.l2);
            let h = 1e-6;
            for j in 0..=m.beta.len() {
                let bumped = |delta: f64| {
                    let mut b = m.clone();
                    if j == 0 {
                        b.beta0 += delta;
                    } else {
                        b.beta[j - 1] += delta;
                    }
                    lr_objective(&b, &data, params.l2)
                };
                let fd = (bumped(h) - bumped(-h)) / (2.0 * h);
                let scale = g[j].abs().max(1.0);
                ensure!((fd - g[j]).abs() / scale <= 1e-5, "seed {seed} coord {j}: {fd} vs {}", g[j]);
            }
        }
    }
    Ok(())
}

/// Largest KKT violation of an SVM fit, recomputed from the model alone.
fn kkt_residual(data: &LabeledSet, m: &kinskill::classify::SvmModel) -> f64 {
    let y = signs(data.y());
    let mut worst = 0.0f64;
    for (xi, yi) in data.x().iter().zip(&y) {
        let alpha = m
            .support_vectors
            .iter()
            .position(|sv| sv == xi)
            .map_or(0.0, |p| m.alphas[p]);
        let margin = yi * svm_decision(m, xi).unwrap();
        let v = if alpha <= 1e-12 {
            (1.0 - margin).max(0.0)
        } else if alpha >= m.c - 1e-12 {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

pub fn svm_kkt_check() -> Check {
    for seed in 0..5 {
        let data = random_set(300 + seed, 40, 3, 0.4);
        let tol = 1e-4;
        let m = svm_fit(&data, 1.0, 0.5, tol, 1000).map_err(|e| e.to_string())?;
        let sum: f64 = m.alphas.iter().zip(&m.labels).map(|(a, y)| a * y).sum();
        ensure!(sum.abs() <= 1e-6, "sum alpha y = {sum}");
        ensure!(m.alphas.iter().all(|a| *a >= 0.0 && *a <= m.c), "box violated");
        // The solver stops when the dual gap estimate is below tol; margins
        // can then be off by about tol as well.
        let r = kkt_residual(&data, &m);
        ensure!(r <= 2.0 * tol, "seed {seed}: KKT residual {r}");
    }
    Ok(())
}

pub fn svm_dual_oracle() -> Check {
    let cases = [(6usize, 1.0, 1.0), (7, 10.0, 0.5), (8, 1.0, 2.0), (8, 0.5, 1.0), (6, 100.0, 1.0)];
    for (case, &(n, c, gamma)) in cases.iter().enumerate() {
        let data = random_set(400 + case as u64, n, 2, 0.3);
        let y = signs(data.y());
        let oracle = brute_force_dual(data.x(), &y, c, gamma).ok_or(format!("case {case}: oracle found no solution"))?;
        let m = svm_fit(&data, c, gamma, 1e-6, 10_000).map_err(|e| e.to_string())?;
        ensure!(
            (m.dual_objective - oracle.objective).abs() <= 1e-4,
            "case {case}: objective {} vs {}",
            m.dual_objective,
            oracle.objective
        );
        let mut r = rng(500 + case as u64);
        let mut probes: Vec<Vec<f64>> = data.x().to_vec();
        probes.extend((0..50).map(|_| vec![r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)]));
        for p in &probes {
            let want = oracle.decision(data.x(), &y, gamma, p);
            let got = svm_decision(&m, p).unwrap();
            let slack = oracle.bias_slack + 1e-3;
            ensure!((got - want).abs() <= slack, "case {case}: decision {got} vs {want}");
            if want.abs() > slack {
                ensure!((got > 0.0) == (want > 0.0), "case {case}: prediction differs at {p:?}");
            }
        }
    }
    Ok(())
}

pub fn classifier_checks() -> Vec<(&'static str, fn() -> Check)> {
    vec![
        ("LR gradient vs finite differences", lr_gradient_oracle as fn() -> Check),
        ("SVM KKT residual", svm_kkt_check),
        ("SVM vs brute-force dual", svm_dual_oracle),
    ]
}

// --------------------------------------------------------------------- PCA

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// eigenvalues and eigenvectors (as columns of the second value).
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    (0..d)
        .map(|a| {
            (0..d)
                .map(|b| rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (n as f64 - 1.0))
                .collect()
        })
        .collect()
}

/// Standardized 40 x 17 feature matrix from a synthetic population.
pub fn standardized_feature_rows(seed: u64) -> Vec<Vec<f64>> {
    let pop = gen_population(4, 4, 5, 0.5, seed).unwrap();
    let feats = extract_all(&pop.dataset, &FeatureConfig::default()).unwrap();
    let rows: Vec<Vec<f64>> = feats.iter().map(|f| f.to_array().to_vec()).collect();
    let scaler = fit_scaler(&rows).unwrap();
    rows.iter().map(|r| scaler.transform(r).unwrap()).collect()
}

pub fn pca_eigen_oracle() -> Check {
    let rows = standardized_feature_rows(7);
    let cov = covariance(&rows);
    let (values, vectors) = jacobi_eigen(cov);
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let model = fit_pca(&rows, 1.0).map_err(|e| e.to_string())?;
    ensure!(model.spectrum.len() == 17, "spectrum length {}", model.spectrum.len());
    for (rank, &i) in order.iter().enumerate() {
        let want = values[i].max(0.0);
        let got = model.spectrum[rank];
        ensure!((got - want).abs() <= 1e-8, "eigenvalue {rank}: {got} vs {want}");
    }
    for (rank, row) in model.basis.iter().enumerate() {
        let i = order[rank];
        let gap = order
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| (values[j] - values[i]).abs())
            .fold(f64::INFINITY, f64::min);
        if gap < 1e-6 {
            // Eigenvectors of (near-)repeated eigenvalues are not unique.
            continue;
        }
        let mut col: Vec<f64> = vectors.iter().map(|r| r[i]).collect();
        let pivot = col.iter().copied().fold(0.0f64, |b, v| if v.abs() > b.abs() { v } else { b });
        if pivot < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        for (a, b) in row.iter().zip(&col) {
            ensure!((a - b).abs() <= 1e-8, "eigenvector {rank}: {a} vs {b}");
        }
    }
    Ok(())
}

pub fn pca_decorrelation_check() -> Check {
    for target in [0.95, 1.0] {
        let rows = standardized_feature_rows(8);
        let model = fit_pca(&rows, target).map_err(|e| e.to_string())?;
        let projected: Vec<Vec<f64>> = rows.iter().map(|r| model.project(r).unwrap()).collect();
        let cov = covariance(&projected);
        for (a, row) in cov.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                if a != b {
                    ensure!(v.abs() <= 1e-8, "target {target}: cov[{a}][{b}] = {v}");
                } else {
                    ensure!((v - model.explained_variance[a]).abs() <= 1e-8, "variance {a}");
                }
            }
        }
    }
    Ok(())
}

pub fn pca_checks() -> Vec<(&'static str, fn() -> Check)> {
    vec![
        ("eigenpairs vs Jacobi", pca_eigen_oracle as fn() -> Check),
        ("decorrelated projection", pca_decorrelation_check),
    ]
}

// -------------------------------------------------------- cross-validation

/// Synthetic population with unequal trial counts per surgeon.
pub fn unequal_population(seed: u64) -> Dataset {
    let pop = gen_population(3, 3, 5, 1.0, seed).unwrap();
    let keep = |t: &Trial| match t.meta.surgeon_id.as_str() {
        "S02" => t.meta.trial_index <= 3,
        "S05" => t.meta.trial_index <= 4,
        "S06" => t.meta.trial_index != 2,
        _ => true,
    };
    Dataset::new(pop.dataset.trials().iter().filter(|t| keep(t)).cloned().collect()).unwrap()
}

pub fn partition_check() -> Check {
    let full = gen_population(4, 4, 5, 0.5, 21).unwrap().dataset;
    ensure!(make_folds(&full, Scheme::Loso).unwrap().folds.len() == 5, "8x5 LOSO folds");
    ensure!(make_folds(&full, Scheme::Louo).unwrap().folds.len() == 8, "8x5 LOUO folds");

    for ds in [unequal_population(22), full] {
        let keys: Vec<_> = ds.metas().map(|m| m.key()).collect();
        let max_ordinal = ds.metas().map(|m| m.trial_index).max().unwrap() as usize;
        for scheme in [Scheme::Loso, Scheme::Louo] {
            let plan = make_folds(&ds, scheme).unwrap();
            let expected = match scheme {
                Scheme::Loso => max_ordinal,
                Scheme::Louo => ds.surgeons().len(),
            };
            ensure!(plan.folds.len() == expected, "{scheme:?}: {} folds, want {expected}", plan.folds.len());
            let mut seen: Vec<_> = plan.folds.iter().flat_map(|f| f.test.clone()).collect();
            seen.sort();
            let mut all = keys.clone();
            all.sort();
            ensure!(seen == all, "{scheme:?}: test sets are not a partition");
            for f in &plan.folds {
                ensure!(f.train.iter().all(|k| !f.test.contains(k)), "{scheme:?}: train/test overlap");
                ensure!(f.train.len() + f.test.len() == keys.len(), "{scheme:?}: fold misses trials");
                let mut surgeons: Vec<_> = f.test.iter().map(|k| k.surgeon_id.clone()).collect();
                surgeons.sort();
                let distinct = {
                    let mut s = surgeons.clone();
                    s.dedup();
                    s
                };
                match scheme {
                    Scheme::Loso => ensure!(distinct.len() == surgeons.len(), "LOSO fold repeats a surgeon"),
                    Scheme::Louo => {
                        ensure!(distinct.len() == 1, "LOUO fold mixes surgeons");
                        let owned = keys.iter().filter(|k| k.surgeon_id == distinct[0]).count();
                        ensure!(owned == f.test.len(), "LOUO fold misses a trial of {}", distinct[0]);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Perturbing a fold's own held-out rows must not change what it fits.
pub fn leakage_check() -> Check {
    let ds = unequal_population(23);
    let metas: Vec<TrialMeta> = ds.metas().cloned().collect();
    let feats = extract_all(&ds, &FeatureConfig::default()).unwrap();
    for scheme in [Scheme::Loso, Scheme::Louo] {
        let plan = make_folds(&ds, scheme).unwrap();
        for cfg in [PipelineConfig::default(), PipelineConfig { classifier: kinskill::classify::ClassifierKind::Svm, ..Default::default() }] {
            for fold in plan.folds.iter().filter(|f| f.degenerate.is_none()) {
                let base = fit_fold(fold, &metas, &feats, &cfg).map_err(|e| e.to_string())?;
                let mut moved = feats.clone();
                for (m, f) in metas.iter().zip(moved.iter_mut()) {
                    if fold.test.contains(&m.key()) {
                        let mut a = f.to_array();
                        a.iter_mut().for_each(|v| *v = *v * 3.0 + 100.0);
                        *f = FeatureVector::from_array(&a);
                    }
                }
                let again = fit_fold(fold, &metas, &moved, &cfg).map_err(|e| e.to_string())?;
                ensure!(
                    again.to_json().unwrap() == base.to_json().unwrap(),
                    "{scheme:?} fold {} changed after perturbing its test rows",
                    fold.index
                );
            }
        }
    }
    Ok(())
}

pub fn arithmetic_check() -> Check {
    let ds = unequal_population(24);
    for scheme in [Scheme::Loso, Scheme::Louo] {
        for kind in [kinskill::classify::ClassifierKind::Lr, kinskill::classify::ClassifierKind::Svm] {
            let cfg = PipelineConfig { classifier: kind, ..Default::default() };
            let r = run_eval(&ds, scheme, &cfg).map_err(|e| e.to_string())?;
            r.check_consistency().map_err(|e| e.to_string())?;
            let preds: Vec<_> = r.folds.iter().flat_map(|f| f.predictions.iter()).collect();
            let correct = preds.iter().filter(|p| p.truth == p.predicted).count();
            let nov: Vec<_> = preds.iter().filter(|p| p.truth == Skill::Novice).collect();
            let exp: Vec<_> = preds.iter().filter(|p| p.truth == Skill::Expert).collect();
            let nov_ok = nov.iter().filter(|p| p.predicted == Skill::Novice).count();
            let exp_ok = exp.iter().filter(|p| p.predicted == Skill::Expert).count();
            ensure!(nov_ok + exp_ok == correct, "correct counts disagree");
            let overall = r.overall_acc.ok_or("no overall accuracy")?;
            ensure!(overall == correct as f64 / preds.len() as f64, "overall {overall}");
            ensure!(r.novice_acc == Some(nov_ok as f64 / nov.len() as f64), "novice accuracy");
            ensure!(r.expert_acc == Some(exp_ok as f64 / exp.len() as f64), "expert accuracy");
            ensure!(preds.len() == ds.len(), "predictions {} for {} trials", preds.len(), ds.len());
        }
    }
    Ok(())
}

pub fn cv_checks() -> Vec<(&'static str, fn() -> Check)> {
    vec![
        ("partition and fold counts", partition_check as fn() -> Check),
        ("no leakage", leakage_check),
        ("accuracy arithmetic", arithmetic_check),
    ]
}

// ------------------------------------------------------------ end to end

pub fn loso_accuracy(separation: f64, seed: u64) -> f64 {
    let pop = gen_population(4, 4, 5, separation, seed).unwrap();
    run_eval(&pop.dataset, Scheme::Loso, &PipelineConfig::default()).unwrap().overall_acc.unwrap()
}

pub fn separation_sweep() -> Check {
    let full = loso_accuracy(1.0, 0);
    ensure!(full == 1.0, "separation 1: LOSO accuracy {full}");
    let chance: Vec<f64> = (0..20).map(|s| loso_accuracy(0.0, 1000 + s)).collect();
    let mean = chance.iter().sum::<f64>() / chance.len() as f64;
    ensure!((0.35..=0.65).contains(&mean), "separation 0: mean accuracy {mean} over 20 seeds");
    let mut prev = f64::NEG_INFINITY;
    let mut curve = Vec::new();
    for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let avg = (0..10).map(|k| loso_accuracy(s, k)).sum::<f64>() / 10.0;
        curve.push(avg);
        ensure!(avg >= prev, "accuracy fell at separation {s}: {curve:?}");
        prev = avg;
    }
    Ok(())
}

/// Everything a run writes, for byte comparison.
pub fn run_artifacts(seed: u64) -> Vec<String> {
    let pop = gen_population(4, 4, 5, 0.75, seed).unwrap();
    let cfg = PipelineConfig { seed, ..Default::default() };
    let feats = extract_all(&pop.dataset, &cfg.features).unwrap();
    let rows: Vec<(TrialMeta, FeatureVector)> = pop.dataset.metas().cloned().zip(feats.iter().cloned()).collect();
    let mut out = vec![pop.manifest.clone(), render_feature_csv(&rows)];
    out.extend(pop.files.iter().map(|(_, text)| text.clone()));
    for kind in [kinskill::classify::ClassifierKind::Lr, kinskill::classify::ClassifierKind::Svm] {
        let cfg = PipelineConfig { classifier: kind, ..cfg.clone() };
        out.push(PipelineModel::fit_dataset(&pop.dataset, &cfg).unwrap().to_json().unwrap());
        let metas: Vec<TrialMeta> = pop.dataset.metas().cloned().collect();
        for scheme in [Scheme::Loso, Scheme::Louo] {
            let plan = make_folds(&pop.dataset, scheme).unwrap();
            let report = run_eval_on_features(&metas, &feats, &plan, &cfg).unwrap();
            for format in [OutputFormat::Table, OutputFormat::Json, OutputFormat::Csv] {
                out.push(render_report(&report, format).unwrap());
            }
        }
    }
    out
}

pub fn determinism_check() -> Check {
    let a = run_artifacts(5);
    let b = run_artifacts(5);
    ensure!(a.len() == b.len(), "artifact counts differ");
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        ensure!(x == y, "artifact {i} differs between runs");
    }
    ensure!(run_artifacts(6)[1] != a[1], "different seeds gave identical features");
    Ok(())
}

// ------------------------------------------------------------- real data

pub const REAL_DATA_ENV: &str = "KINSKILL_JIGSAWS_DIR";

/// LOSO and LOUO overall accuracy on a user-supplied JIGSAWS suturing
/// directory (`manifest.csv` plus kinematics files), or `None` when absent.
pub fn real_data_accuracies() -> Option<Result<(f64, f64), String>> {
    let dir = std::env::var_os(REAL_DATA_ENV)?;
    let dir = std::path::PathBuf::from(dir);
    Some((|| {
        let text = std::fs::read_to_string(dir.join("manifest.csv")).map_err(|e| e.to_string())?;
        let metas = parse_manifest(&text).map_err(|e| e.to_string())?;
        let schema = ColumnSchema::jigsaws_psm();
        let ds = load_dataset(&dir, metas, &schema).map_err(|e| e.to_string())?;
        let cfg = PipelineConfig { schema, ..Default::default() };
        let acc = |scheme| -> Result<f64, String> {
            let r = run_eval(&ds, scheme, &cfg).map_err(|e| e.to_string())?;
            r.overall_acc.ok_or_else(|| "every fold degenerate".to_string())
        };
        Ok((acc(Scheme::Loso)?, acc(Scheme::Louo)?))
    })())
}
