use ndarray::{Array2, ArrayViewMut1, Axis};
use serde::{Deserialize, Serialize};

use super::frame::{Column, TimeSeriesFrame};
use crate::error::{Error, Result};

/// Per-column affine map to zero mean and unit population standard
/// deviation. Constant columns get a standard deviation of 1 so they map to
/// all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const DEGENERATE_STD: f64 = 1e-12;

impl Standardizer {
    pub fn fit(frame: &TimeSeriesFrame, columns: &[String]) -> Result<Self> {
        if frame.is_empty() {
            return Err(Error::Empty("cannot fit a standardizer on an empty frame".into()));
        }
        let mut mean = Vec::with_capacity(columns.len());
        let mut std = Vec::with_capacity(columns.len());
        for name in columns {
            let (m, s) = moments(frame.values(name)?);
            mean.push(m);
            std.push(s);
        }
        Ok(Standardizer {
            columns: columns.to_vec(),
            mean,
            std,
        })
    }

    /// Fits on the columns of a row-major matrix.
    pub fn fit_matrix(columns: &[String], x: &Array2<f64>) -> Result<Self> {
        if x.ncols() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                got: x.ncols(),
            });
        }
        if x.nrows() == 0 {
            return Err(Error::Empty("cannot fit a standardizer on zero rows".into()));
        }
        let (mean, std) = x
            .axis_iter(Axis(1))
            .map(|c| moments(&c.to_vec()))
            .unzip();
        Ok(Standardizer {
            columns: columns.to_vec(),
            mean,
            std,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Standardizes the fitted columns of `frame`, leaving others untouched.
    pub fn apply(&self, frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
        for name in &self.columns {
            if !frame.has_column(name) {
                return Err(Error::UnknownColumn(name.clone()));
            }
        }
        let columns = frame
            .columns()
            .iter()
            .map(|c| match self.columns.iter().position(|n| n == c.name()) {
                Some(j) => Column::new(
                    c.spec.clone(),
                    c.values.iter().map(|v| (v - self.mean[j]) / self.std[j]).collect(),
                ),
                None => c.clone(),
            })
            .collect();
        TimeSeriesFrame::new(frame.timestamps().to_vec(), frame.step_minutes(), columns)
    }

    /// In-place transform of a matrix whose columns follow `self.columns`.
    pub fn transform_matrix(&self, x: &mut Array2<f64>) -> Result<()> {
        self.check_width(x.ncols())?;
        for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(())
    }

    pub fn transform_row(&self, mut row: ArrayViewMut1<f64>) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - self.mean[j]) / self.std[j];
        }
    }

    pub fn inverse_matrix(&self, x: &mut Array2<f64>) -> Result<()> {
        self.check_width(x.ncols())?;
        for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            col.mapv_inplace(|v| v * s + m);
        }
        Ok(())
    }

    fn check_width(&self, ncols: usize) -> Result<()> {
        if ncols != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                got: ncols,
            });
        }
        Ok(())
    }
}

/// Mean and population standard deviation, with the degenerate substitute.
fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > DEGENERATE_STD * mean.abs().max(1.0) { std } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{ColumnSpec, FeatureGroup};
    use ndarray::array;
    use proptest::prelude::*;

    fn frame(cols: Vec<(&str, Vec<f64>)>) -> TimeSeriesFrame {
        let n = cols[0].1.len();
        let columns = cols
            .into_iter()
            .map(|(name, v)| Column::new(ColumnSpec::new(name, FeatureGroup::Weather, "-"), v))
            .collect();
        TimeSeriesFrame::new((0..n as i64).collect(), 1, columns).unwrap()
    }

    #[test]
    fn one_two_three() {
        let f = frame(vec![("a", vec![1.0, 2.0, 3.0])]);
        let s = Standardizer::fit(&f, &["a".into()]).unwrap();
        let g = s.apply(&f).unwrap();
        let v = g.values("a").unwrap();
        assert!((v[0] + 1.224744871391589).abs() < 1e-12);
        assert_eq!(v[1], 0.0);
        assert!((v[2] - 1.224744871391589).abs() < 1e-12);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let f = frame(vec![("a", vec![5.0, 5.0, 5.0])]);
        let s = Standardizer::fit(&f, &["a".into()]).unwrap();
        assert_eq!(s.std, vec![1.0]);
        assert_eq!(s.apply(&f).unwrap().values("a").unwrap(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn same_data_same_transform() {
        let f = frame(vec![("a", vec![1.0, 4.0, 9.0]), ("b", vec![0.0, 1.0, 0.0])]);
        let s = Standardizer::fit(&f, &["a".into()]).unwrap();
        assert_eq!(s.apply(&f).unwrap(), s.apply(&f.clone()).unwrap());
        // untouched column
        assert_eq!(s.apply(&f).unwrap().values("b").unwrap(), f.values("b").unwrap());
    }

    #[test]
    fn unknown_column() {
        let f = frame(vec![("a", vec![1.0, 2.0])]);
        assert!(matches!(Standardizer::fit(&f, &["zz".into()]), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn matrix_transform_matches_frame() {
        let x = array![[1.0, 10.0], [2.0, 20.0], [3.0, 60.0]];
        let names = vec!["a".to_string(), "b".to_string()];
        let s = Standardizer::fit_matrix(&names, &x).unwrap();
        let mut y = x.clone();
        s.transform_matrix(&mut y).unwrap();
        let f = frame(vec![("a", vec![1.0, 2.0, 3.0]), ("b", vec![10.0, 20.0, 60.0])]);
        let g = s.apply(&f).unwrap();
        assert_eq!(y.column(1).to_vec(), g.values("b").unwrap());
    }

    proptest! {
        #[test]
        fn standardized_moments_and_inverse(values in proptest::collection::vec(-1e3f64..1e3, 3..40)) {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let spread = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
            prop_assume!(spread > 1e-3);
            let names = vec!["a".to_string()];
            let x = Array2::from_shape_vec((values.len(), 1), values.clone()).unwrap();
            let s = Standardizer::fit_matrix(&names, &x).unwrap();
            let mut z = x.clone();
            s.transform_matrix(&mut z).unwrap();
            let zm = z.sum() / n;
            let zs = (z.mapv(|v| (v - zm).powi(2)).sum() / n).sqrt();
            prop_assert!(zm.abs() < 1e-9);
            prop_assert!((zs - 1.0).abs() < 1e-9);
            s.inverse_matrix(&mut z).unwrap();
            for (a, b) in z.iter().zip(x.iter()) {
                prop_assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
            }
        }
    }
}
