//! Soft-margin SVM with an RBF kernel, trained in the dual by sequential
//! minimal optimization.
//!
//! The dual is posed as minimizing `f(a) = 1/2 a'Qa - sum(a)` with
//! `Q_ij = y_i y_j K(x_i, x_j)`, `0 <= a_i <= C` and `sum(y_i a_i) = 0`.
//! Each step picks the maximal violating pair: among indices free to move
//! up, the one with the largest `-y_t grad_t`, and among those free to move
//! down, the smallest. In terms of prediction errors `E_t = f(x_t) - y_t`
//! this is the feasible pair with the largest `|E_i - E_j|`. Ties resolve to
//! the lowest index, so training is deterministic.

use serde::{Deserialize, Serialize};

use super::LabeledSet;
use crate::error::{Error, Result};
use crate::ingest::Skill;

/// Curvature floor for the pair subproblem.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaRule {
    /// `1 / k` for `k` input dimensions.
    InverseDim,
    /// `1 / median(|x_i - x_j|^2)` over training pairs.
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    /// Fixed kernel width; when absent `gamma_rule` decides.
    pub gamma: Option<f64>,
    pub gamma_rule: GammaRule,
    /// Stopping threshold on the maximal KKT violation.
    pub tol: f64,
    /// Iteration budget, in multiples of the training set size.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: None,
            gamma_rule: GammaRule::InverseDim,
            tol: 1e-4,
            max_passes: 1000,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Param(format!("C must be positive, got {}", self.c)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Param(format!("gamma must be positive, got {g}")));
            }
        }
        if !(self.tol > 0.0) || self.max_passes == 0 {
            return Err(Error::Param("tol must be positive and max_passes at least 1".into()));
        }
        Ok(())
    }

    /// Kernel width for the given training rows.
    pub fn resolve_gamma(&self, x: &[Vec<f64>]) -> f64 {
        if let Some(g) = self.gamma {
            return g;
        }
        let k = x.first().map_or(1, Vec::len).max(1);
        match self.gamma_rule {
            GammaRule::InverseDim => 1.0 / k as f64,
            GammaRule::Median => median_gamma(x).unwrap_or(1.0 / k as f64),
        }
    }
}

/// `1 / median squared pairwise distance`, or `None` when every pair coincides.
pub fn median_gamma(x: &[Vec<f64>]) -> Option<f64> {
    let mut d2: Vec<f64> = Vec::new();
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            d2.push(sq_dist(&x[i], &x[j]));
        }
    }
    if d2.is_empty() {
        return None;
    }
    d2.sort_by(f64::total_cmp);
    let m = d2.len();
    let median = if m % 2 == 1 { d2[m / 2] } else { 0.5 * (d2[m / 2 - 1] + d2[m / 2]) };
    (median > 0.0).then(|| 1.0 / median)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    /// `-1` (novice) or `+1` (expert) per support vector.
    pub labels: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    /// Maximal KKT violation at termination.
    pub kkt_violation: f64,
    /// Dual objective `sum(a) - 1/2 a'Qa` at the solution.
    pub dual_objective: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(-gamma |xi - xj|^2)`
pub fn rbf_kernel(xi: &[f64], xj: &[f64], gamma: f64) -> Result<f64> {
    if xi.len() != xj.len() {
        return Err(Error::Dimension { expected: xi.len(), got: xj.len() });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Param(format!("gamma must be positive, got {gamma}")));
    }
    Ok((-gamma * sq_dist(xi, xj)).exp())
}

/// Dense kernel matrix of `x` with itself.
pub fn gram_matrix(x: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        k[i][i] = 1.0;
        for j in 0..i {
            let v = (-gamma * sq_dist(&x[i], &x[j])).exp();
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

/// `sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij`
pub fn dual_objective(alphas: &[f64], y: &[f64], gram: &[Vec<f64>]) -> f64 {
    let n = alphas.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alphas[i] * alphas[j] * y[i] * y[j] * gram[i][j];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

fn can_move_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn can_move_down(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Maximal violating pair `(i, j, gap)`, or `None` if either side is empty.
fn select_pair(y: &[f64], alpha: &[f64], grad: &[f64], c: f64) -> Option<(usize, usize, f64)> {
    let mut up: Option<(usize, f64)> = None;
    let mut low: Option<(usize, f64)> = None;
    for t in 0..y.len() {
        let v = -y[t] * grad[t];
        if can_move_up(y[t], alpha[t], c) && up.map_or(true, |(_, best)| v > best) {
            up = Some((t, v));
        }
        if can_move_down(y[t], alpha[t], c) && low.map_or(true, |(_, best)| v < best) {
            low = Some((t, v));
        }
    }
    let ((i, m), (j, big_m)) = (up?, low?);
    Some((i, j, m - big_m))
}

/// Trains the SVM, stopping when the maximal KKT violation is at most `tol`.
pub fn svm_fit(data: &LabeledSet, c: f64, gamma: f64, tol: f64, max_passes: usize) -> Result<SvmModel> {
    SvmParams { c, gamma: Some(gamma), tol, max_passes, ..Default::default() }.validate()?;
    data.require_both_classes()?;

    let n = data.len();
    let x = data.x();
    let y: Vec<f64> = data.y().iter().map(|s| s.as_sign()).collect();
    let gram = gram_matrix(x, gamma);

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = max_passes.saturating_mul(n);
    let mut iter = 0;

    let violation = loop {
        let Some((i, j, gap)) = select_pair(&y, &alpha, &grad, c) else {
            break 0.0;
        };
        if gap <= tol {
            break gap.max(0.0);
        }
        if iter == max_iter {
            return Err(Error::SvmNotConverged { passes: max_passes, violation: gap });
        }
        iter += 1;

        // Move a_i by +y_i t and a_j by -y_j t, keeping sum(y a) fixed.
        let curvature = (gram[i][i] + gram[j][j] - 2.0 * gram[i][j]).max(TAU);
        let mut t = gap / curvature;
        let room_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let room_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        t = t.min(room_i).min(room_j);

        let new_i = if t == room_i {
            if y[i] > 0.0 { c } else { 0.0 }
        } else {
            alpha[i] + y[i] * t
        };
        let new_j = if t == room_j {
            if y[j] > 0.0 { 0.0 } else { c }
        } else {
            alpha[j] - y[j] * t
        };
        let di = new_i - alpha[i];
        let dj = new_j - alpha[j];
        alpha[i] = new_i;
        alpha[j] = new_j;
        for s in 0..n {
            grad[s] += y[s] * (y[i] * gram[s][i] * di + y[j] * gram[s][j] * dj);
        }
    };

    // Bias from free support vectors, else the midpoint of the feasible range.
    let free: Vec<f64> = (0..n)
        .filter(|&t| alpha[t] > 0.0 && alpha[t] < c)
        .map(|t| -y[t] * grad[t])
        .collect();
    let bias = if free.is_empty() {
        let (mut m, mut big_m) = (f64::NEG_INFINITY, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if can_move_up(y[t], alpha[t], c) {
                m = m.max(v);
            }
            if can_move_down(y[t], alpha[t], c) {
                big_m = big_m.min(v);
            }
        }
        match (m.is_finite(), big_m.is_finite()) {
            (true, true) => 0.5 * (m + big_m),
            (true, false) => m,
            (false, true) => big_m,
            (false, false) => 0.0,
        }
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    };

    let dual = dual_objective(&alpha, &y, &gram);
    let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(SvmModel {
        support_vectors: sv.iter().map(|&t| x[t].clone()).collect(),
        alphas: sv.iter().map(|&t| alpha[t]).collect(),
        labels: sv.iter().map(|&t| y[t]).collect(),
        bias,
        gamma,
        c,
        kkt_violation: violation,
        dual_objective: dual,
    })
}

/// `sum(a_i y_i K(x_i, x)) + b`
pub fn svm_decision(model: &SvmModel, x: &[f64]) -> Result<f64> {
    let k = model.support_vectors.first().map_or(x.len(), Vec::len);
    if x.len() != k {
        return Err(Error::Dimension { expected: k, got: x.len() });
    }
    let mut f = model.bias;
    for ((sv, a), y) in model.support_vectors.iter().zip(&model.alphas).zip(&model.labels) {
        f += a * y * (-model.gamma * sq_dist(sv, x)).exp();
    }
    Ok(f)
}

/// Expert for a positive decision value; zero counts as novice.
pub fn svm_predict(model: &SvmModel, x: &[f64]) -> Result<Skill> {
    Ok(if svm_decision(model, x)? > 0.0 {
        Skill::Expert
    } else {
        Skill::Novice
    })
}
