use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Mean squared error over every element, with its gradient with respect to `pred`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        let (pr, pc) = pred.shape();
        let (tr, tc) = target.shape();
        return Err(Error::dims("mse operand size", tr * tc, pr * pc));
    }
    let count = pred.as_slice().len();
    if count == 0 {
        return Err(Error::InsufficientData("mse of an empty matrix".into()));
    }
    let scale = 2.0 / count as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut sum = 0.0;
    for ((g, p), t) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(pred.as_slice())
        .zip(target.as_slice())
    {
        let diff = p - t;
        sum += diff * diff;
        *g = scale * diff;
    }
    Ok((sum / count as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_inputs_have_zero_loss() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(mse_loss(&a, &a).unwrap().0, 0.0);
    }

    #[test]
    fn unit_error_gives_unit_loss() {
        let p = Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap();
        let (loss, grad) = mse_loss(&p, &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = Matrix::from_vec(2, 3, vec![0.3, -1.2, 2.0, 0.7, 0.1, -0.4]).unwrap();
        let t = Matrix::from_vec(2, 3, vec![1.0, 0.5, -0.3, 0.2, 0.0, 0.9]).unwrap();
        let (_, grad) = mse_loss(&p, &t).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            let mut plus = p.clone();
            plus.as_mut_slice()[i] += h;
            let mut minus = p.clone();
            minus.as_mut_slice()[i] -= h;
            let fd = (mse_loss(&plus, &t).unwrap().0 - mse_loss(&minus, &t).unwrap().0) / (2.0 * h);
            assert!((fd - grad.as_slice()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn shape_mismatch_errors() {
        assert!(mse_loss(&Matrix::zeros(2, 2), &Matrix::zeros(1, 4)).is_err());
    }
}
