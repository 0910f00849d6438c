use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZScoreError {
    #[error("need at least 2 values to normalize, got {0}")]
    TooShort(usize),
    #[error("values have zero variance; z-scores are undefined")]
    ZeroVariance,
    #[error("values contain NaN or infinity")]
    NonFinite,
}

/// Standardize to mean 0 and population standard deviation 1.
pub fn z_normalize<T: Scalar>(values: &[T]) -> Result<Vec<T>, ZScoreError> {
    if values.len() < 2 {
        return Err(ZScoreError::TooShort(values.len()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ZScoreError::NonFinite);
    }
    let n = T::from_usize(values.len()).expect("length fits scalar");
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let std = var.sqrt();
    if std <= T::epsilon() * mean.abs() || std == T::zero() {
        return Err(ZScoreError::ZeroVariance);
    }
    Ok(values.iter().map(|&v| (v - mean) / std).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mean_std(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
    }

    #[test]
    fn one_two_three() {
        let z = z_normalize(&[1.0f64, 2.0, 3.0]).unwrap();
        // population std of [1,2,3] is sqrt(2/3); 1/sqrt(2/3) = 1.2247448...
        let expected = [-1.224_744_871_391_589, 0.0, 1.224_744_871_391_589];
        for (a, b) in z.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(z_normalize(&[5.0, 5.0, 5.0]), Err(ZScoreError::ZeroVariance));
        assert_eq!(z_normalize(&[1.0]), Err(ZScoreError::TooShort(1)));
        assert_eq!(z_normalize::<f64>(&[]), Err(ZScoreError::TooShort(0)));
        assert_eq!(z_normalize(&[1.0, f64::NAN]), Err(ZScoreError::NonFinite));
    }

    #[test]
    fn works_for_f32() {
        let z = z_normalize(&[1.0f32, 2.0, 3.0]).unwrap();
        assert!((z[2] - 1.224_744_9).abs() < 1e-6);
    }

    fn nondegenerate() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3..1e3f64, 2..40)
            .prop_filter("nonzero variance", |v| mean_std(v).1 > 1e-3)
    }

    proptest! {
        #[test]
        fn standardized_and_order_preserving(v in nondegenerate()) {
            let z = z_normalize(&v).unwrap();
            let (m, s) = mean_std(&z);
            prop_assert!(m.abs() < 1e-9);
            prop_assert!((s - 1.0).abs() < 1e-9);
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if v[i] < v[j] {
                        prop_assert!(z[i] < z[j]);
                    }
                }
            }
        }

        #[test]
        fn idempotent(v in nondegenerate()) {
            let once = z_normalize(&v).unwrap();
            let twice = z_normalize(&once).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn affine_invariance(v in nondegenerate(), a in prop_oneof![-50.0..-0.1f64, 0.1..50.0f64], b in -100.0..100.0f64) {
            let base = z_normalize(&v).unwrap();
            let moved: Vec<f64> = v.iter().map(|x| a * x + b).collect();
            let z = z_normalize(&moved).unwrap();
            for (x, y) in base.iter().zip(&z) {
                prop_assert!((a.signum() * x - y).abs() < 1e-9);
            }
        }
    }
}
