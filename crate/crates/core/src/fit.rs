//! Least-squares fit of the sub-threshold scaling ansatz `p_L = c (x / x_th)^(α e)`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent used for the distance: `d` for erasure-dominated data, `d + 1` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitForm {
    Erasure,
    NonErasure,
}

impl FitForm {
    fn exponent(self, d: usize) -> f64 {
        match self {
            FitForm::Erasure => d as f64,
            FitForm::NonErasure => d as f64 + 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub x: f64,
    pub d: usize,
    pub p_l: f64,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub c: f64,
    pub x_th: f64,
    pub alpha: f64,
    pub form: FitForm,
    /// Weighted sum of squared residuals in `ln p_L`.
    pub residual: f64,
}

impl FitResult {
    pub fn predict(&self, x: f64, d: usize) -> f64 {
        self.c * (x / self.x_th).powf(self.alpha * self.form.exponent(d))
    }
}

/// Solve a 3x3 system by Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-10 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Weighted least squares on `ln p_L = ln c + α e ln x − α e ln x_th`.
///
/// The model is linear in `(ln c, α, −α ln x_th)` with regressors `(1, e ln x, e)`.
pub fn fit_ansatz(points: &[FitPoint], form: FitForm) -> Result<FitResult> {
    let distinct: BTreeSet<(u64, usize)> = points.iter().map(|p| (p.x.to_bits(), p.d)).collect();
    if distinct.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 distinct (x, d) points, got {}", distinct.len())));
    }
    if let Some(p) = points.iter().find(|p| !(p.p_l > 0.0 && p.p_l < 0.5) || !(p.x > 0.0) || !(p.weight > 0.0)) {
        return Err(Error::Fit(format!("point {p:?} needs 0 < p_L < 0.5, x > 0 and a positive weight")));
    }
    let ds: BTreeSet<usize> = points.iter().map(|p| p.d).collect();
    if ds.len() < 2 {
        return Err(Error::Fit("a single distance cannot separate c from x_th".into()));
    }
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    let rows: Vec<([f64; 3], f64, f64)> = points
        .iter()
        .map(|p| {
            let e = form.exponent(p.d);
            ([1.0, e * p.x.ln(), e], p.p_l.ln(), p.weight)
        })
        .collect();
    for (r, y, w) in &rows {
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += w * r[i] * r[j];
            }
            atb[i] += w * r[i] * y;
        }
    }
    let [lnc, alpha, b] = solve3(ata, atb).ok_or_else(|| Error::Fit("design matrix is degenerate".into()))?;
    if alpha.abs() < f64::EPSILON {
        return Err(Error::Fit("fitted exponent is zero; x_th is undefined".into()));
    }
    let residual = rows.iter().map(|(r, y, w)| w * (lnc + alpha * r[1] + b * r[2] - y).powi(2)).sum();
    Ok(FitResult { c: lnc.exp(), x_th: (-b / alpha).exp(), alpha, form, residual })
}
