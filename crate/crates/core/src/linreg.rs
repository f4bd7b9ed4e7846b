//! Weighted least squares with heteroskedasticity-robust (HC0) inference.
//!
//! The normal equations are solved by a Cholesky factorisation that doubles
//! as the rank check: a pivot below `1e-10 * max diag(X'WX)` marks its
//! column as collinear with the columns before it.

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::stats;

const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WlsFit {
    pub coef: Vec<f64>,
    /// HC0 robust standard errors.
    pub se: Vec<f64>,
    /// Robust covariance, row-major `q x q`.
    pub cov: Vec<Vec<f64>>,
    pub p_values: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// Rows with strictly positive weight.
    pub n_used: usize,
    pub alpha: f64,
}

/// Lower-triangular Cholesky factor of a symmetric matrix.
struct Cholesky {
    l: Vec<Vec<f64>>,
}

impl Cholesky {
    fn factor(a: &[Vec<f64>]) -> Result<Self> {
        let q = a.len();
        let max_diag = (0..q).map(|i| a[i][i]).fold(0.0, f64::max);
        let tol = RANK_TOL * max_diag;
        let mut l = vec![vec![0.0; q]; q];
        let mut collinear = Vec::new();
        for j in 0..q {
            let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
            if !(d > tol) {
                collinear.push(j);
                continue;
            }
            let piv = d.sqrt();
            l[j][j] = piv;
            for i in j + 1..q {
                let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                l[i][j] = s / piv;
            }
        }
        if !collinear.is_empty() {
            return Err(Error::RankDeficient { columns: collinear });
        }
        Ok(Self { l })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let q = b.len();
        let l = &self.l;
        let mut z = vec![0.0; q];
        for i in 0..q {
            let s: f64 = (0..i).map(|k| l[i][k] * z[k]).sum();
            z[i] = (b[i] - s) / l[i][i];
        }
        let mut x = vec![0.0; q];
        for i in (0..q).rev() {
            let s: f64 = (i + 1..q).map(|k| l[k][i] * x[k]).sum();
            x[i] = (z[i] - s) / l[i][i];
        }
        x
    }

    fn inverse(&self) -> Vec<Vec<f64>> {
        let q = self.l.len();
        let mut inv = vec![vec![0.0; q]; q];
        for j in 0..q {
            let mut e = vec![0.0; q];
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..q {
                inv[i][j] = col[i];
            }
        }
        inv
    }
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, m, k) = (a.len(), b[0].len(), b.len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for t in 0..k {
            let ait = a[i][t];
            for j in 0..m {
                out[i][j] += ait * b[t][j];
            }
        }
    }
    out
}

/// Fits `response ~ design` by weighted least squares and returns HC0
/// robust inference with normal reference quantiles at level `alpha`.
pub fn wls(design: &Matrix, response: &[f64], weights: &[f64], alpha: f64) -> Result<WlsFit> {
    let n = design.nrows();
    let q = design.ncols();
    if response.len() != n || weights.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has {n} rows, response {}, weights {}",
            response.len(),
            weights.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1)")));
    }
    if q == 0 {
        return Err(Error::InvalidInput("design has no columns".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
    }
    if response.iter().any(|v| !v.is_finite()) || design.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("design or response contains non-finite values".into()));
    }
    let n_used = weights.iter().filter(|&&w| w > 0.0).count();
    if n_used == 0 {
        return Err(Error::ZeroWeights);
    }
    if n_used <= q {
        return Err(Error::InvalidInput(format!(
            "{n_used} weighted rows for {q} coefficients"
        )));
    }

    let mut xtwx = vec![vec![0.0; q]; q];
    let mut xtwy = vec![0.0; q];
    for i in 0..n {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let row = design.row(i);
        for a in 0..q {
            let wa = w * row[a];
            xtwy[a] += wa * response[i];
            for b in 0..=a {
                xtwx[a][b] += wa * row[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            xtwx[b][a] = xtwx[a][b];
        }
    }

    let chol = Cholesky::factor(&xtwx)?;
    let coef = chol.solve(&xtwy);
    let bread = chol.inverse();

    let mut meat = vec![vec![0.0; q]; q];
    for i in 0..n {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let row = design.row(i);
        let fitted: f64 = row.iter().zip(&coef).map(|(x, b)| x * b).sum();
        let u = response[i] - fitted;
        let s = w * w * u * u;
        for a in 0..q {
            for b in 0..=a {
                meat[a][b] += s * row[a] * row[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            meat[b][a] = meat[a][b];
        }
    }
    let mut cov = mat_mul(&mat_mul(&bread, &meat), &bread);
    for a in 0..q {
        for b in 0..a {
            let m = 0.5 * (cov[a][b] + cov[b][a]);
            cov[a][b] = m;
            cov[b][a] = m;
        }
    }

    let z_crit = stats::normal_quantile(1.0 - alpha / 2.0);
    let se: Vec<f64> = (0..q).map(|j| cov[j][j].max(0.0).sqrt()).collect();
    let p_values = coef
        .iter()
        .zip(&se)
        .map(|(&b, &s)| {
            if s > 0.0 {
                stats::two_sided_p(b / s)
            } else if b == 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let ci_low = coef.iter().zip(&se).map(|(b, s)| b - z_crit * s).collect();
    let ci_high = coef.iter().zip(&se).map(|(b, s)| b + z_crit * s).collect();
    Ok(WlsFit {
        coef,
        se,
        cov,
        p_values,
        ci_low,
        ci_high,
        n_used,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_has_zero_se() {
        let x = Matrix::from_fn(20, 1, |i, _| i as f64 + 1.0);
        let y: Vec<f64> = (0..20).map(|i| 2.0 * (i as f64 + 1.0)).collect();
        let fit = wls(&x, &y, &vec![1.0; 20], 0.05).unwrap();
        assert!((fit.coef[0] - 2.0).abs() < 1e-12);
        assert!(fit.se[0] < 1e-10);
    }

    #[test]
    fn intercept_only_is_mean() {
        let x = Matrix::from_fn(5, 1, |_, _| 1.0);
        let fit = wls(&x, &[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0; 5], 0.05).unwrap();
        assert!((fit.coef[0] - 3.0).abs() < 1e-12);
        // HC0: sum of squared residuals / n^2 = 10 / 25
        assert!((fit.se[0] - (10.0f64 / 25.0).sqrt()).abs() < 1e-12);
        assert!(fit.ci_low[0] < 3.0 && 3.0 < fit.ci_high[0]);
    }

    #[test]
    fn collinear_columns_are_named() {
        let x = Matrix::from_fn(10, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64 + 1.0,
        });
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        match wls(&x, &y, &[1.0; 10], 0.05) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec![2]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_weights_rejected() {
        let x = Matrix::from_fn(4, 1, |_, _| 1.0);
        assert!(matches!(
            wls(&x, &[1.0; 4], &[0.0; 4], 0.05),
            Err(Error::ZeroWeights)
        ));
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let x = Matrix::from_fn(6, 1, |_, _| 1.0);
        let y = [1.0, 2.0, 3.0, 100.0, 100.0, 100.0];
        let fit = wls(&x, &y, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0], 0.05).unwrap();
        assert!((fit.coef[0] - 2.0).abs() < 1e-12);
        assert_eq!(fit.n_used, 3);
    }
}
