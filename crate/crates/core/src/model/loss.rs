use crate::scalar::Scalar;

use super::matrix::Matrix;
use super::network::ModelError;

fn check<T: Scalar>(pred: &Matrix<T>, truth: &Matrix<T>) -> Result<(), ModelError> {
    if pred.rows() != truth.rows() || pred.cols() != truth.cols() {
        return Err(ModelError::ShapeMismatch(format!(
            "prediction {}x{} vs truth {}x{}",
            pred.rows(),
            pred.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    if pred.rows() == 0 || pred.cols() == 0 {
        return Err(ModelError::EmptyBatch);
    }
    Ok(())
}

/// Mean of |pred - truth| over every component of every sample.
pub fn mae_loss<T: Scalar>(pred: &Matrix<T>, truth: &Matrix<T>) -> Result<T, ModelError> {
    check(pred, truth)?;
    let total: T = pred
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(&p, &t)| (p - t).abs())
        .sum();
    Ok(total / T::from_usize_lossy(pred.as_slice().len()))
}

/// d(mae)/d(pred): sign(pred - truth) / component count, with sign(0) = 0.
pub fn mae_gradient<T: Scalar>(pred: &Matrix<T>, truth: &Matrix<T>) -> Result<Matrix<T>, ModelError> {
    check(pred, truth)?;
    let scale = T::from_usize_lossy(pred.as_slice().len()).recip();
    let data = pred
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(&p, &t)| {
            let d = p - t;
            if d > T::zero() {
                scale
            } else if d < T::zero() {
                -scale
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(Matrix::from_vec(pred.rows(), pred.cols(), data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[[f64; 2]]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn reference_values() {
        assert_eq!(mae_loss(&m(&[[1.0, 2.0]]), &m(&[[1.0, 2.0]])).unwrap(), 0.0);
        assert_eq!(mae_loss(&m(&[[0.0, 0.0]]), &m(&[[3.0, 4.0]])).unwrap(), 3.5);
        assert_eq!(
            mae_loss(&m(&[[0.0, 0.0], [1.0, 1.0]]), &m(&[[1.0, 0.0], [1.0, 3.0]])).unwrap(),
            0.75
        );
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            mae_loss(&m(&[[0.0, 0.0]]), &m(&[[0.0, 0.0], [0.0, 0.0]])),
            Err(ModelError::ShapeMismatch(_))
        ));
        let empty = Matrix::<f64>::zeros(0, 2);
        assert_eq!(mae_loss(&empty, &empty), Err(ModelError::EmptyBatch));
    }

    #[test]
    fn gradient_is_zero_at_exact_fit() {
        let g = mae_gradient(&m(&[[1.0, -2.0]]), &m(&[[1.0, -2.0]])).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
        let g = mae_gradient(&m(&[[2.0, -3.0]]), &m(&[[1.0, -2.0]])).unwrap();
        assert_eq!(g.as_slice(), &[0.5, -0.5]);
    }
}
