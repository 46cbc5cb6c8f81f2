//! Standardization and principal component analysis.
//!
//! Both are fitted on training rows only and then applied unchanged to
//! held-out rows.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_VARIANCE_TARGET: f64 = 0.95;

fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    if rows.len() < 2 {
        return Err(Error::TooShort { len: rows.len(), min: 2 });
    }
    let d = rows[0].len();
    if d == 0 {
        return Err(Error::Invalid("rows have no columns".into()));
    }
    for r in rows {
        if r.len() != d {
            return Err(Error::Dimension { expected: d, got: r.len() });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite value in feature rows".into()));
        }
    }
    Ok(d)
}

/// Column means and sample standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Columns with no spread; they standardize to zero.
    pub constant: Vec<bool>,
}

impl Scaler {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(x.iter()
            .enumerate()
            .map(|(j, v)| {
                if self.constant[j] {
                    0.0
                } else {
                    (v - self.means[j]) / self.stds[j]
                }
            })
            .collect())
    }
}

pub fn fit_scaler(rows: &[Vec<f64>]) -> Result<Scaler> {
    let d = check_rows(rows)?;
    let n = rows.len() as f64;
    let mut means = vec![0.0; d];
    for r in rows {
        for (m, v) in means.iter_mut().zip(r) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);

    let mut stds = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            stds[j] += (r[j] - means[j]).powi(2);
        }
    }
    stds.iter_mut().for_each(|s| *s = (*s / (n - 1.0)).sqrt());

    let constant = means
        .iter()
        .zip(&stds)
        .map(|(m, s)| *s <= 1e-12 * (1.0 + m.abs()))
        .collect();
    Ok(Scaler { means, stds, constant })
}

/// Retained principal axes of a data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// Column means of the fitting data; zero for standardized input.
    pub center: Vec<f64>,
    /// `k` orthonormal rows, one per retained component.
    pub basis: Vec<Vec<f64>>,
    /// Variance along each retained component, descending.
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// All covariance eigenvalues, descending.
    pub spectrum: Vec<f64>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Coordinates of an already standardized row in the retained basis.
    pub fn project(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: z.len() });
        }
        Ok(self
            .basis
            .iter()
            .map(|row| row.iter().zip(z).zip(&self.center).map(|((b, x), c)| b * (x - c)).sum())
            .collect())
    }

    /// Maps component coordinates back to the input space.
    pub fn reconstruct(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.k() {
            return Err(Error::Dimension { expected: self.k(), got: y.len() });
        }
        let mut out = self.center.clone();
        for (row, coef) in self.basis.iter().zip(y) {
            for (o, b) in out.iter_mut().zip(row) {
                *o += coef * b;
            }
        }
        Ok(out)
    }
}

/// Eigendecomposition of the sample covariance, keeping the fewest leading
/// components whose cumulative variance ratio reaches `variance_target`.
///
/// Each basis row is signed so its largest-magnitude entry is positive.
pub fn fit_pca(rows: &[Vec<f64>], variance_target: f64) -> Result<PcaModel> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::Param(format!(
            "variance target must be in (0, 1], got {variance_target}"
        )));
    }
    let d = check_rows(rows)?;
    let n = rows.len();

    let mut center = vec![0.0; d];
    for r in rows {
        for (c, v) in center.iter_mut().zip(r) {
            *c += v;
        }
    }
    center.iter_mut().for_each(|c| *c /= n as f64);

    let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - center[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let total: f64 = cov.trace();
    let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(total > 0.0) || scale == 0.0 {
        return Err(Error::Degenerate("all columns have zero variance".into()));
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let spectrum: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();

    let mut k = d;
    let mut cumulative = 0.0;
    for (i, lambda) in spectrum.iter().enumerate() {
        cumulative += lambda / total;
        if cumulative >= variance_target - 1e-12 {
            k = i + 1;
            break;
        }
    }

    let basis: Vec<Vec<f64>> = order[..k]
        .iter()
        .map(|&i| {
            let mut row: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let pivot = row
                .iter()
                .copied()
                .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
            if pivot < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
            }
            row
        })
        .collect();
    let explained_variance = spectrum[..k].to_vec();
    let explained_variance_ratio = explained_variance.iter().map(|l| l / total).collect();

    Ok(PcaModel {
        center,
        basis,
        explained_variance,
        explained_variance_ratio,
        spectrum,
    })
}

/// Standardizes `x` with `scaler`, then projects onto the PCA basis.
pub fn transform(model: &PcaModel, scaler: &Scaler, x: &[f64]) -> Result<Vec<f64>> {
    model.project(&scaler.transform(x)?)
}
