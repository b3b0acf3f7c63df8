use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::learners::Learner;

/// Model-specific importance of each learner input for each output, d × K.
///
/// * LR: mean |coefficient × feature value| over the rows of `x`.
/// * FFNN: mean |d output / d input| over the rows of `x`.
/// * RF: impurity decrease, shared by every output and summing to one.
pub fn native_importance(model: &Learner, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.n_features() {
        return Err(Error::DimensionMismatch { expected: model.n_features(), got: x.ncols() });
    }
    if x.nrows() == 0 {
        return Err(Error::Empty("importance rows".into()));
    }
    let (d, k) = (model.n_features(), model.n_outputs());
    let n = x.nrows() as f64;
    Ok(match model {
        Learner::Lr(m) => {
            let mean_abs_x = x.mapv(f64::abs).sum_axis(Axis(0)) / n;
            Array2::from_shape_fn((d, k), |(i, o)| m.weights[[i, o]].abs() * mean_abs_x[i])
        }
        Learner::Ffnn(m) => m.input_jacobian(x).mapv(f64::abs).sum_axis(Axis(0)) / n,
        Learner::Rf(m) => {
            let imp = m.feature_importance();
            Array2::from_shape_fn((d, k), |(i, _)| imp[i])
        }
    })
}

/// Indices of the `k` largest entries; ties go to the smaller index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Size of the intersection of the two top-k index sets.
pub fn rank_overlap(a: &[f64], b: &[f64], k: usize) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if k > a.len() {
        return Err(Error::invalid(format!("top_k {k} exceeds {} features", a.len())));
    }
    let ta = top_k(a, k);
    Ok(top_k(b, k).iter().filter(|i| ta.contains(i)).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{rf_fit, Activation, FfnnModel, ForestConfig, Layer, LinearModel};
    use ndarray::{array, Array1};

    #[test]
    fn zero_coefficient_means_zero_importance() {
        let m = Learner::Lr(LinearModel::new(array![[2.0], [0.0]], array![1.0]).unwrap());
        let x = array![[1.0, 5.0], [-3.0, 2.0]];
        let imp = native_importance(&m, x.view()).unwrap();
        assert_eq!(imp[[1, 0]], 0.0);
        assert_eq!(imp[[0, 0]], 4.0);
    }

    #[test]
    fn affine_network_jacobian_is_composed_weights() {
        let l1 = Layer { weights: array![[1.0, -2.0], [0.5, 3.0]], bias: Array1::zeros(2), activation: Activation::Identity };
        let l2 = Layer { weights: array![[2.0], [1.0]], bias: array![0.3], activation: Activation::Identity };
        let composed = l1.weights.dot(&l2.weights);
        let m = Learner::Ffnn(FfnnModel { layers: vec![l1, l2] });
        let x = array![[1.0, 2.0], [0.0, -1.0], [4.0, 4.0]];
        let imp = native_importance(&m, x.view()).unwrap();
        for i in 0..2 {
            assert!((imp[[i, 0]] - composed[[i, 0]].abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn forest_ignores_unused_feature() {
        let x = Array2::from_shape_fn((50, 2), |(i, j)| if j == 0 { i as f64 } else { 1.0 });
        let y = x.column(0).mapv(|v| (v * 0.3).sin()).insert_axis(Axis(1));
        let f = Learner::Rf(rf_fit(x.view(), y.view(), &ForestConfig { n_trees: 5, ..Default::default() }).unwrap());
        let imp = native_importance(&f, x.view()).unwrap();
        assert_eq!(imp[[1, 0]], 0.0);
        assert!((imp[[0, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(rank_overlap(&[3.0, 2.0, 1.0, 0.0], &[0.0, 1.0, 2.0, 3.0], 2).unwrap(), 0);
        assert_eq!(rank_overlap(&[1.0, 5.0, 2.0], &[1.0, 5.0, 2.0], 3).unwrap(), 3);
        assert_eq!(rank_overlap(&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0], 1).unwrap(), 0);
        assert_eq!(top_k(&[1.0, 1.0, 0.0], 1), vec![0]);
        assert!(rank_overlap(&[1.0], &[1.0, 2.0], 1).is_err());
        assert!(rank_overlap(&[1.0], &[1.0], 2).is_err());
    }
}
