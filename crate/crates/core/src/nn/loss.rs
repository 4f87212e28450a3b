use alloc::format;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::layer::softmax_in_place;

pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut p = logits.clone();
    let cols = p.cols();
    for i in 0..p.rows() {
        softmax_in_place(&mut p.as_mut_slice()[i * cols..(i + 1) * cols]);
    }
    p
}

/// Mean categorical cross entropy of `softmax(logits)` against class indices,
/// with the gradient w.r.t. the logits.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if labels.len() != logits.rows() {
        return Err(Error::dims("cross_entropy labels", logits.rows(), labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= logits.cols()) {
        return Err(Error::Input(format!(
            "label {bad} out of range for {} classes",
            logits.cols()
        )));
    }
    let batch = logits.rows() as f64;
    let mut grad = softmax_rows(logits);
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = libm::log(row.iter().map(|v| libm::exp(v - max)).sum::<f64>()) + max;
        loss += log_sum - row[label];
        grad[(i, label)] -= 1.0;
    }
    grad.scale(1.0 / batch);
    Ok((loss / batch, grad))
}

/// Mean squared error over all elements, with the gradient w.r.t. `pred`.
pub fn mse(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::dims(
            "mse",
            target.rows() * target.cols(),
            pred.rows() * pred.cols(),
        ));
    }
    let n = (pred.rows() * pred.cols()).max(1) as f64;
    let mut grad = pred.clone();
    let mut loss = 0.0;
    for (g, &t) in grad.as_mut_slice().iter_mut().zip(target.as_slice()) {
        let d = *g - t;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let (loss, _) = cross_entropy(&m(&[&[0.3; 4], &[-1.0; 4]]), &[0, 3]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((loss - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn confident_correct_logits_approach_zero() {
        let (loss, _) = cross_entropy(&m(&[&[60.0, 0.0, 0.0]]), &[0]).unwrap();
        assert!(loss >= 0.0 && loss < 1e-25);
    }

    #[test]
    fn two_class_closed_form() {
        let (loss, grad) = cross_entropy(&m(&[&[2.0, 0.0]]), &[0]).unwrap();
        let expected = (1.0 + (-2.0f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-15);
        assert!((loss - 0.126928).abs() < 1e-6);
        let p0 = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((grad[(0, 0)] - (p0 - 1.0)).abs() < 1e-15);
        assert!((grad[(0, 1)] - (1.0 - p0)).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let err = cross_entropy(&m(&[&[0.0, 0.0]]), &[2]).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn mse_examples() {
        let a = m(&[&[1.0, 3.0]]);
        assert_eq!(mse(&a, &a).unwrap().0, 0.0);
        assert_eq!(mse(&m(&[&[1.0, 1.0]]), &m(&[&[0.0, 0.0]])).unwrap().0, 1.0);
        let (loss, grad) = mse(&a, &m(&[&[0.0, 1.0]])).unwrap();
        assert_eq!(loss, 2.5);
        assert_eq!(grad.as_slice(), &[1.0, 2.0]);
        assert!(mse(&a, &Matrix::zeros(2, 1)).is_err());
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(v in proptest::collection::vec(-50.0f64..50.0, 12)) {
            let p = softmax_rows(&Matrix::from_vec(3, 4, v).unwrap());
            for row in p.row_iter() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn losses_are_non_negative(
            v in proptest::collection::vec(-20.0f64..20.0, 6),
            w in proptest::collection::vec(-20.0f64..20.0, 6),
            labels in proptest::collection::vec(0usize..3, 2),
        ) {
            let a = Matrix::from_vec(2, 3, v).unwrap();
            let b = Matrix::from_vec(2, 3, w).unwrap();
            prop_assert!(cross_entropy(&a, &labels).unwrap().0 >= 0.0);
            let (l, _) = mse(&a, &b).unwrap();
            prop_assert!(l >= 0.0);
            prop_assert_eq!(l == 0.0, a == b);
        }
    }
}
