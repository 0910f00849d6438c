use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("harmonic mean needs non-negative finite inputs, got {0} and {1}")]
    NegativeInput(f64, f64),
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("rank correlation needs at least 3 observations, got {0}")]
    TooShort(usize),
    #[error("rank correlation is undefined for a constant sequence")]
    Constant,
}

/// 2ps/(p+s), defined as 0 when either input is 0.
pub fn harmonic_mean<T: Scalar>(p: T, s: T) -> Result<T, StatsError> {
    if !(p >= T::zero() && s >= T::zero()) || !p.is_finite() || !s.is_finite() {
        return Err(StatsError::NegativeInput(p.as_f64(), s.as_f64()));
    }
    if p == T::zero() || s == T::zero() {
        return Ok(T::zero());
    }
    Ok(T::lit(2.0) * p * s / (p + s))
}

/// Largest sample size for which p-values come from full enumeration.
pub const EXACT_PERMUTATION_MAX_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
    pub exact: bool,
}

/// Ranks starting at 1, ties share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho with a two-sided p-value: exact by permutation up to
/// [`EXACT_PERMUTATION_MAX_N`] observations, Student t approximation above.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<Spearman, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 3 {
        return Err(StatsError::TooShort(n));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let nf = n as f64;
    let center = |r: &[f64]| {
        let m = r.iter().sum::<f64>() / nf;
        r.iter().map(|x| x - m).collect::<Vec<_>>()
    };
    let (ca, cb) = (center(&ra), center(&rb));
    let (sa, sb) = (
        ca.iter().map(|x| x * x).sum::<f64>().sqrt(),
        cb.iter().map(|x| x * x).sum::<f64>().sqrt(),
    );
    if sa == 0.0 || sb == 0.0 {
        return Err(StatsError::Constant);
    }
    let denom = sa * sb;
    let dot = |perm: &[usize]| perm.iter().enumerate().map(|(i, &j)| ca[i] * cb[j]).sum::<f64>();
    let identity: Vec<usize> = (0..n).collect();
    let rho = (dot(&identity) / denom).clamp(-1.0, 1.0);

    if n <= EXACT_PERMUTATION_MAX_N {
        let target = rho.abs() - 1e-12;
        let (mut hits, mut total) = (0u64, 0u64);
        for_each_permutation(n, |perm| {
            total += 1;
            if (dot(perm) / denom).abs() >= target {
                hits += 1;
            }
        });
        return Ok(Spearman {
            rho,
            p_value: hits as f64 / total as f64,
            n,
            exact: true,
        });
    }
    let df = nf - 2.0;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(Spearman {
        rho,
        p_value,
        n,
        exact: false,
    })
}

/// Visit every permutation of `0..n` (Heap's algorithm).
fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn harmonic_mean_basics() {
        assert_eq!(harmonic_mean(3.0, 3.0).unwrap(), 3.0);
        assert_eq!(harmonic_mean(0.0, 7.0).unwrap(), 0.0);
        assert!(harmonic_mean(-1.0, 2.0).is_err());
        assert!(harmonic_mean(f64::NAN, 2.0).is_err());
        assert!((harmonic_mean(4.5f32, 3.62).unwrap() - 4.012).abs() < 1e-3);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn perfect_correlations() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let up = spearman(&a, &a).unwrap();
        assert!((up.rho - 1.0).abs() < 1e-12);
        // exactly 2 of 120 orderings reach |rho| = 1
        assert!((up.p_value - 2.0 / 120.0).abs() < 1e-12);
        let rev: Vec<f64> = a.iter().rev().copied().collect();
        assert!((spearman(&a, &rev).unwrap().rho + 1.0).abs() < 1e-12);
    }

    #[test]
    fn error_cases() {
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::TooShort(2)));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0]), Err(StatsError::LengthMismatch(3, 1)));
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::Constant));
    }

    #[test]
    fn large_samples_use_t_approximation() {
        let a: Vec<f64> = (0..30).map(f64::from).collect();
        let b: Vec<f64> = a.iter().map(|x| (x * 7.0) % 30.0).collect();
        let s = spearman(&a, &b).unwrap();
        assert!(!s.exact);
        assert!((0.0..=1.0).contains(&s.p_value));
    }

    proptest! {
        #[test]
        fn harmonic_mean_bounds(p in 0.0f64..10.0, s in 0.0f64..10.0) {
            let h = harmonic_mean(p, s).unwrap();
            prop_assert!(h <= 2.0 * p.min(s) + 1e-12);
            prop_assert!(h <= (p * s).sqrt() + 1e-12);
            prop_assert_eq!(h, harmonic_mean(s, p).unwrap());
        }

        #[test]
        fn rho_is_bounded_and_symmetric(a in proptest::collection::vec(0u8..5, 6), b in proptest::collection::vec(0u8..5, 6)) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            if let (Ok(x), Ok(y)) = (spearman(&a, &b), spearman(&b, &a)) {
                prop_assert!((-1.0..=1.0).contains(&x.rho));
                prop_assert!((x.rho - y.rho).abs() < 1e-12);
                prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
            }
        }
    }
}
