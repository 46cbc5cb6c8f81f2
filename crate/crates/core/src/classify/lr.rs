//! L2-penalized logistic regression fitted by Newton's method (IRLS).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::LabeledSet;
use crate::error::{Error, Result};
use crate::ingest::Skill;

/// Coefficient norm past which an unpenalized fit is treated as diverging.
const BLOW_UP_NORM: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrParams {
    /// Ridge penalty on the slope coefficients; the intercept is unpenalized.
    pub l2: f64,
    pub max_iter: usize,
    /// Stop once the gradient norm of the penalized log-likelihood, divided
    /// by the row count, is below this.
    pub tol: f64,
}

impl Default for LrParams {
    fn default() -> Self {
        LrParams {
            l2: 1e-4,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

impl LrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Param(format!("l2 must be non-negative, got {}", self.l2)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Param("tol must be positive and max_iter at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub beta0: f64,
    pub beta: Vec<f64>,
}

impl LrModel {
    fn linear(&self, x: &[f64]) -> f64 {
        self.beta0 + self.beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Expert probability `1 / (1 + exp(-(beta0 + beta . x)))`.
pub fn lr_predict_proba(model: &LrModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.beta.len() {
        return Err(Error::Dimension { expected: model.beta.len(), got: x.len() });
    }
    Ok(sigmoid(model.linear(x)))
}

/// Expert when the probability exceeds one half.
pub fn lr_predict(model: &LrModel, x: &[f64]) -> Result<Skill> {
    Ok(if lr_predict_proba(model, x)? > 0.5 {
        Skill::Expert
    } else {
        Skill::Novice
    })
}

/// Penalized log-likelihood `sum(y eta - ln(1 + e^eta)) - l2/2 |beta|^2`.
pub fn lr_objective(model: &LrModel, data: &LabeledSet, l2: f64) -> f64 {
    let ll: f64 = data
        .x()
        .iter()
        .zip(data.y())
        .map(|(x, y)| {
            let eta = model.linear(x);
            y.as_binary() * eta - softplus(eta)
        })
        .sum();
    ll - 0.5 * l2 * model.beta.iter().map(|b| b * b).sum::<f64>()
}

/// Gradient of [`lr_objective`], intercept first.
pub fn lr_gradient(model: &LrModel, data: &LabeledSet, l2: f64) -> Vec<f64> {
    let d = model.beta.len();
    let mut g = vec![0.0; d + 1];
    for (x, y) in data.x().iter().zip(data.y()) {
        let r = y.as_binary() - sigmoid(model.linear(x));
        g[0] += r;
        for j in 0..d {
            g[j + 1] += r * x[j];
        }
    }
    for j in 0..d {
        g[j + 1] -= l2 * model.beta[j];
    }
    g
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn lr_fit(data: &LabeledSet, params: &LrParams) -> Result<LrModel> {
    lr_fit_traced(data, params).map(|(m, _)| m)
}

/// Like [`lr_fit`], also returning the objective after every iterate
/// (starting from the zero initialization).
pub fn lr_fit_traced(data: &LabeledSet, params: &LrParams) -> Result<(LrModel, Vec<f64>)> {
    params.validate()?;
    data.require_both_classes()?;
    let n = data.len();
    let d = data.dim();
    let l2 = params.l2;

    let mut model = LrModel { beta0: 0.0, beta: vec![0.0; d] };
    let mut objective = lr_objective(&model, data, l2);
    let mut trace = vec![objective];
    let mut grad = lr_gradient(&model, data, l2);
    let mut iterations = 0;
    let scaled = |g: &[f64]| norm(g) / n as f64;

    while scaled(&grad) > params.tol {
        if iterations == params.max_iter {
            return Err(Error::LrNotConverged { iterations, grad_norm: norm(&grad) });
        }
        iterations += 1;

        // Negative Hessian: X' W X + l2 on the slope block.
        let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
        for x in data.x() {
            let p = sigmoid(model.linear(x));
            let w = p * (1.0 - p);
            for a in 0..=d {
                let xa = if a == 0 { 1.0 } else { x[a - 1] };
                for b in a..=d {
                    let xb = if b == 0 { 1.0 } else { x[b - 1] };
                    h[(a, b)] += w * xa * xb;
                }
            }
        }
        for a in 0..=d {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
            if a > 0 {
                h[(a, a)] += l2;
            }
        }
        let rhs = DVector::from_column_slice(&grad);
        let eps = 1e-12 * h.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let step = h
            .svd(true, true)
            .solve(&rhs, eps)
            .map_err(|e| Error::Degenerate(format!("Newton system: {e}")))?;

        // Step halving keeps the objective monotone.
        let mut t = 1.0;
        let candidate = loop {
            let cand = LrModel {
                beta0: model.beta0 + t * step[0],
                beta: model.beta.iter().enumerate().map(|(j, b)| b + t * step[j + 1]).collect(),
            };
            let value = lr_objective(&cand, data, l2);
            if value >= objective || t < 1e-10 {
                break (cand, value);
            }
            t *= 0.5;
        };
        if candidate.1 < objective {
            // No ascent possible at this precision.
            break;
        }
        model = candidate.0;
        objective = candidate.1;
        trace.push(objective);
        grad = lr_gradient(&model, data, l2);

        if l2 == 0.0 && norm(&model.beta) > BLOW_UP_NORM {
            return Err(Error::Separation);
        }
    }

    if scaled(&grad) > params.tol {
        return Err(Error::LrNotConverged { iterations, grad_norm: norm(&grad) });
    }

    if l2 == 0.0 && n > 0 {
        let separates = data
            .x()
            .iter()
            .zip(data.y())
            .all(|(x, y)| y.as_sign() * model.linear(x) > 0.0);
        if separates {
            return Err(Error::Separation);
        }
    }
    Ok((model, trace))
}
