//! Local linear regression smoothing and finite-difference derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest smoothing window, in samples.
pub const MIN_WINDOW: usize = 5;

/// A uniformly sampled sequence of 3-vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series3 {
    values: Vec<[f64; 3]>,
    dt: f64,
}

impl Series3 {
    pub fn new(values: Vec<[f64; 3]>, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Param(format!("dt must be positive, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::TooShort { len: 0, min: 1 });
        }
        if let Some(i) = values.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::Invalid(format!("series entry {i} is not finite")));
        }
        Ok(Series3 { values, dt })
    }

    pub fn values(&self) -> &[[f64; 3]] {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Per-entry Euclidean norms.
    pub fn norms(&self) -> Vec<f64> {
        self.values.iter().map(norm).collect()
    }
}

pub(crate) fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Number of samples in the local window for a given span.
pub fn window_len(n: usize, span: f64) -> usize {
    let q = (span * n as f64).ceil() as usize;
    q.max(MIN_WINDOW).min(n)
}

/// First-degree local regression with tricube weights, each coordinate
/// independently.
///
/// Each output point is the value at that sample of a weighted line fitted
/// to the `window_len(n, span)` nearest samples. Windows are centered and
/// pushed inward at the ends. The tricube bandwidth is half a sample wider
/// than the farthest window member, so every member gets a positive weight.
pub fn loess_smooth(raw: &Series3, span: f64) -> Result<Series3> {
    if !(span > 0.0 && span <= 1.0) {
        return Err(Error::Param(format!("span must be in (0, 1], got {span}")));
    }
    let n = raw.len();
    if n < 2 {
        return Err(Error::TooShort { len: n, min: 2 });
    }
    let q = window_len(n, span);
    let mut weights = vec![0.0; q];
    let mut out = Vec::with_capacity(n);

    for i in 0..n {
        let lo = i.saturating_sub((q - 1) / 2).min(n - q);
        let hi = lo + q - 1;
        let h = (i - lo).max(hi - i) as f64 + 0.5;

        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (k, w) in weights.iter_mut().enumerate() {
            let d = (lo + k) as f64 - i as f64;
            let u = (d.abs() / h).powi(3);
            *w = (1.0 - u).powi(3);
            s0 += *w;
            s1 += *w * d;
            s2 += *w * d * d;
        }
        let det = s0 * s2 - s1 * s1;

        let mut fitted = [0.0; 3];
        for (c, f) in fitted.iter_mut().enumerate() {
            // Fit offsets from the centre value so flat windows stay exact.
            let base = raw.values[i][c];
            let (mut sy, mut sdy) = (0.0, 0.0);
            for (k, w) in weights.iter().enumerate() {
                let y = raw.values[lo + k][c] - base;
                let d = (lo + k) as f64 - i as f64;
                sy += w * y;
                sdy += w * d * y;
            }
            *f = base + (s2 * sy - s1 * sdy) / det;
        }
        out.push(fitted);
    }
    Series3::new(out, raw.dt)
}

/// Time derivative by central differences, one-sided at both ends.
pub fn derivative(s: &Series3) -> Result<Series3> {
    let n = s.len();
    if n < 2 {
        return Err(Error::TooShort { len: n, min: 2 });
    }
    let p = &s.values;
    let dt = s.dt;
    let diff = |a: &[f64; 3], b: &[f64; 3], scale: f64| {
        [(a[0] - b[0]) / scale, (a[1] - b[1]) / scale, (a[2] - b[2]) / scale]
    };
    let mut out = Vec::with_capacity(n);
    out.push(diff(&p[1], &p[0], dt));
    for i in 1..n - 1 {
        out.push(diff(&p[i + 1], &p[i - 1], 2.0 * dt));
    }
    out.push(diff(&p[n - 1], &p[n - 2], dt));
    Series3::new(out, dt)
}
