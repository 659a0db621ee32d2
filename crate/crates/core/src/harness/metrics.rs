use crate::matrix::{dot, DenseMatrix};

/// Slack beyond which a true constraint counts as violated.
pub const TOL_VIOL: f64 = 1e-9;

/// `|true_obj|` below this makes the relative objective undefined.
pub const TRUE_OBJ_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("relative objective undefined: true objective {true_obj} is numerically zero")]
pub struct MetricUndefinedError {
    pub true_obj: f64,
}

/// `(method_obj − true_obj) / true_obj`, sign preserved.
pub fn relative_objective(method_obj: f64, true_obj: f64) -> Result<f64, MetricUndefinedError> {
    if true_obj.abs() < TRUE_OBJ_FLOOR {
        return Err(MetricUndefinedError { true_obj });
    }
    Ok((method_obj - true_obj) / true_obj)
}

/// Mean positive part of `A x − b`, and the fraction of rows exceeding `b`
/// by more than [`TOL_VIOL`].
pub fn violation_metrics(a_true: &DenseMatrix, b: &[f64], x: &[f64]) -> (f64, f64) {
    assert_eq!(a_true.rows(), b.len(), "b length mismatch");
    assert_eq!(a_true.cols(), x.len(), "x length mismatch");
    let mut magnitude = 0.0;
    let mut violated = 0usize;
    for (row, &bi) in a_true.row_iter().zip(b) {
        let excess = dot(row, x) - bi;
        if excess > 0.0 {
            magnitude += excess;
        }
        if excess > TOL_VIOL {
            violated += 1;
        }
    }
    let m = b.len() as f64;
    (magnitude / m, violated as f64 / m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn relative_objective_examples() {
        assert_eq!(relative_objective(10.0, 10.0), Ok(0.0));
        assert!((relative_objective(12.0, 10.0).unwrap() - 0.2).abs() < 1e-15);
        assert!((relative_objective(8.0, 10.0).unwrap() + 0.2).abs() < 1e-15);
        assert!(relative_objective(1.0, 1e-13).is_err());
    }

    #[test]
    fn violation_examples() {
        let one = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert_eq!(violation_metrics(&one, &[2.0], &[3.0]), (1.0, 1.0));
        assert_eq!(violation_metrics(&one, &[2.0], &[1.0]), (0.0, 0.0));
        let two = DenseMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(violation_metrics(&two, &[2.0, 2.0], &[1.5]), (0.5, 0.5));
    }

    #[test]
    fn tiny_excess_adds_magnitude_but_not_count() {
        let one = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        let (mag, ratio) = violation_metrics(&one, &[1.0], &[1.0 + 1e-10]);
        assert!(mag > 0.0);
        assert_eq!(ratio, 0.0);
    }

    proptest! {
        #[test]
        fn metrics_stay_in_range(
            entries in proptest::collection::vec(-5.0f64..5.0, 12),
            b in proptest::collection::vec(-5.0f64..5.0, 4),
            x in proptest::collection::vec(0.0f64..3.0, 3),
        ) {
            let a = DenseMatrix::new(4, 3, entries).unwrap();
            let (mag, ratio) = violation_metrics(&a, &b, &x);
            prop_assert!(mag >= 0.0);
            prop_assert!((0.0..=1.0).contains(&ratio));
            prop_assert_eq!(mag == 0.0, a.mul_vec(&x).iter().zip(&b).all(|(l, r)| l <= r));
        }
    }
}
