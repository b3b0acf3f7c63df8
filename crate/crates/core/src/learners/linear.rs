use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::check_xy;
use crate::error::{Error, Result};

/// Affine multi-output map `y = x W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// d × K
    pub weights: Array2<f64>,
    /// K
    pub intercept: Array1<f64>,
}

impl LinearModel {
    pub fn new(weights: Array2<f64>, intercept: Array1<f64>) -> Result<Self> {
        if weights.ncols() != intercept.len() {
            return Err(Error::DimensionMismatch { expected: weights.ncols(), got: intercept.len() });
        }
        if weights.iter().chain(intercept.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear model parameters".into()));
        }
        Ok(LinearModel { weights, intercept })
    }

    pub fn n_features(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), got: x.ncols() });
        }
        Ok(x.dot(&self.weights) + &self.intercept)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearOptions {
    pub fit_intercept: bool,
    /// Relative singular-value cutoff for rank detection.
    pub rank_tolerance: f64,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions { fit_intercept: true, rank_tolerance: 1e-10 }
    }
}

/// Ordinary least squares with an intercept.
pub fn lr_fit(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<LinearModel> {
    lr_fit_with(x, y, &LinearOptions::default())
}

/// Least squares via Householder QR. When the design is rank deficient the
/// minimum-norm solution from an SVD is returned instead. Every target
/// column is solved independently against the same factorization.
pub fn lr_fit_with(x: ArrayView2<f64>, y: ArrayView2<f64>, options: &LinearOptions) -> Result<LinearModel> {
    check_xy(x, y)?;
    let (n, d) = x.dim();
    let k = y.ncols();
    if n <= d {
        return Err(Error::invalid(format!("least squares needs more rows than features ({n} <= {d})")));
    }

    // Centering absorbs the intercept and improves conditioning.
    let (x_mean, y_mean) = if options.fit_intercept {
        (x.mean_axis(Axis(0)).expect("n > 0"), y.mean_axis(Axis(0)).expect("n > 0"))
    } else {
        (Array1::zeros(d), Array1::zeros(k))
    };
    let a = DMatrix::from_fn(n, d, |i, j| x[[i, j]] - x_mean[j]);
    let b = DMatrix::from_fn(n, k, |i, j| y[[i, j]] - y_mean[j]);

    let scale = (0..d).map(|j| a.column(j).norm()).fold(0.0, f64::max);
    let qr = a.clone().qr();
    let r = qr.r();
    let full_rank = scale > 0.0 && (0..d).all(|i| r[(i, i)].abs() > options.rank_tolerance * scale);

    let w = if full_rank {
        let qtb = qr.q().transpose() * &b;
        r.solve_upper_triangular(&qtb)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?
    } else {
        log::warn!("design matrix is rank deficient; using the minimum-norm solution");
        let svd = a.svd(true, true);
        let cutoff = options.rank_tolerance * svd.singular_values.max().max(f64::MIN_POSITIVE);
        svd.solve(&b, cutoff).map_err(|e| Error::Numerical(e.to_string()))?
    };

    let weights = Array2::from_shape_fn((d, k), |(i, j)| w[(i, j)]);
    let intercept = &y_mean - &x_mean.dot(&weights);
    LinearModel::new(weights, intercept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn hand_example_without_intercept() {
        let x = array![[1.0], [2.0], [3.0]];
        let y = array![[2.0], [4.0], [6.0]];
        let m = lr_fit_with(x.view(), y.view(), &LinearOptions { fit_intercept: false, ..Default::default() }).unwrap();
        assert!((m.weights[[0, 0]] - 2.0).abs() < 1e-12);
        assert_eq!(m.intercept[0], 0.0);
    }

    #[test]
    fn zero_targets_give_zero_model() {
        let x = array![[1.0, 0.5], [2.0, -1.0], [3.0, 4.0], [0.0, 1.0]];
        let y = Array2::zeros((4, 2));
        let m = lr_fit(x.view(), y.view()).unwrap();
        assert!(m.weights.iter().chain(m.intercept.iter()).all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn targets_decouple() {
        let x = array![[1.0, 0.5], [2.0, -1.0], [3.0, 4.0], [0.0, 1.0], [1.5, 2.0]];
        let y1 = array![1.0, -2.0, 0.5, 3.0, 1.0];
        let mut y = Array2::zeros((5, 2));
        y.column_mut(0).assign(&y1);
        y.column_mut(1).assign(&(&y1 * 3.0));
        let m = lr_fit(x.view(), y.view()).unwrap();
        for i in 0..2 {
            assert!((m.weights[[i, 1]] - 3.0 * m.weights[[i, 0]]).abs() < 1e-12);
        }
        assert!((m.intercept[1] - 3.0 * m.intercept[0]).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_gives_minimum_norm() {
        // Second column duplicates the first: the two weights share the slope.
        let x = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]];
        let y = array![[2.0], [4.0], [6.0], [8.0]];
        let m = lr_fit(x.view(), y.view()).unwrap();
        assert!((m.weights[[0, 0]] - 1.0).abs() < 1e-10);
        assert!((m.weights[[1, 0]] - 1.0).abs() < 1e-10);
        assert!(m.intercept[0].abs() < 1e-10);
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let x = array![[1.0, 0.5], [2.0, -1.0], [3.0, 4.0], [0.0, 1.0], [1.5, 2.0], [-1.0, 0.2]];
        let y = array![[1.0], [-2.0], [0.5], [3.0], [1.0], [0.0]];
        let m = lr_fit(x.view(), y.view()).unwrap();
        let res = &y - &m.predict(x.view()).unwrap();
        assert!(res.sum().abs() < 1e-12);
        assert!(x.t().dot(&res).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn affine_prediction() {
        let m = LinearModel::new(array![[2.0]], array![1.0]).unwrap();
        assert_eq!(m.predict(array![[3.0]].view()).unwrap()[[0, 0]], 7.0);
        assert!(m.predict(array![[3.0, 1.0]].view()).is_err());
    }
}
