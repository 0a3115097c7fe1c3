//! Small least-squares fits used for extrapolation and order estimates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Least-squares polynomial fit; returns coefficients a_0..a_degree and the
/// root-mean-square residual.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<(Vec<f64>, f64)> {
    if x.len() != y.len() || x.len() < degree + 1 {
        return Err(Error::InvalidParams(format!(
            "polynomial fit of degree {degree} needs at least {} points, got {}",
            degree + 1,
            x.len()
        )));
    }
    let a = DMatrix::from_fn(x.len(), degree + 1, |i, j| x[i].powi(j as i32));
    let b = DVector::from_column_slice(y);
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::InvalidParams(format!("polynomial fit failed: {e}")))?;
    let resid = (&a * &coef - &b).norm() / (x.len() as f64).sqrt();
    Ok((coef.iter().copied().collect(), resid))
}

/// Slope of log|y| against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    Ok(polyfit(&lx, &ly, 1)?.0[1])
}

/// Complex least squares y ≈ Σ_j coef_j · basis_j(x).
pub fn complex_lstsq(rows: &[Vec<Complex64>], y: &[Complex64]) -> Result<Vec<Complex64>> {
    let ncol = rows.first().map_or(0, Vec::len);
    if rows.len() < ncol || ncol == 0 {
        return Err(Error::InvalidParams("underdetermined complex fit".into()));
    }
    let a = DMatrix::from_fn(rows.len(), ncol, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(y);
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::InvalidParams(format!("complex fit failed: {e}")))?;
    Ok(coef.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_quadratic() {
        let x = [0.1, 0.2, 0.4, 0.8];
        let y: Vec<f64> = x.iter().map(|t| 1.0 - 2.0 * t + 0.5 * t * t).collect();
        let (c, r) = polyfit(&x, &y, 2).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] + 2.0).abs() < 1e-11 && (c[2] - 0.5).abs() < 1e-10);
        assert!(r < 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0];
        let y: Vec<f64> = x.iter().map(|t: &f64| 3.0 * t.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(polyfit(&[1.0], &[1.0], 1).is_err());
    }

    #[test]
    fn complex_fit() {
        let xs = [1.0, 2.0, 3.0, 5.0];
        let truth = [Complex64::new(1.0, -1.0), Complex64::new(0.0, 2.0)];
        let rows: Vec<Vec<Complex64>> = xs.iter().map(|&x| vec![Complex64::new(1.0, 0.0), Complex64::new(1.0 / x, 0.0)]).collect();
        let y: Vec<Complex64> = rows.iter().map(|r| r[0] * truth[0] + r[1] * truth[1]).collect();
        let c = complex_lstsq(&rows, &y).unwrap();
        assert!((c[0] - truth[0]).norm() < 1e-12 && (c[1] - truth[1]).norm() < 1e-12);
    }
}
