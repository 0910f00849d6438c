//! Closed-form ridge regression, solved in whichever of the primal or dual
//! forms has the smaller system.
//!
//! Objective: `(1/n) * |y - Xw - b|^2 + lambda * |w|^2`, intercept unpenalized.
//! Scaling the data term by `1/n` makes the fit invariant to duplicating
//! every training row.

use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit<T> {
    /// One weight vector per target column.
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<T>,
}

/// Fit `targets[i][k] ~ rows[i] . w_k + b_k`.
///
/// Returns `None` if the normal equations are not positive definite
/// (only possible with `lambda == 0`).
pub fn fit<T: Scalar>(rows: &[Vec<T>], targets: &[Vec<T>], lambda: T) -> Option<RidgeFit<T>> {
    let n = rows.len();
    let d = rows.first()?.len();
    let k = targets.first()?.len();
    let nf = T::from_usize(n)?;

    let mut x_mean = vec![T::zero(); d];
    for row in rows {
        for (m, &v) in x_mean.iter_mut().zip(row) {
            *m = *m + v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m = *m / nf);
    let mut y_mean = vec![T::zero(); k];
    for t in targets {
        for (m, &v) in y_mean.iter_mut().zip(t) {
            *m = *m + v;
        }
    }
    y_mean.iter_mut().for_each(|m| *m = *m / nf);

    let xc: Vec<Vec<T>> = rows
        .iter()
        .map(|r| r.iter().zip(&x_mean).map(|(&v, &m)| v - m).collect())
        .collect();
    let yc: Vec<Vec<T>> = targets
        .iter()
        .map(|t| t.iter().zip(&y_mean).map(|(&v, &m)| v - m).collect())
        .collect();
    let ridge = nf * lambda;

    let weights: Vec<Vec<T>> = if n <= d {
        // dual: w = Xc^T (Xc Xc^T + n*lambda I)^-1 yc
        let mut gram = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in 0..=i {
                let g = dot(&xc[i], &xc[j]);
                gram[i][j] = g;
                gram[j][i] = g;
            }
            gram[i][i] = gram[i][i] + ridge;
        }
        let chol = cholesky(gram)?;
        (0..k)
            .map(|col| {
                let rhs: Vec<T> = yc.iter().map(|y| y[col]).collect();
                let alpha = chol_solve(&chol, &rhs);
                let mut w = vec![T::zero(); d];
                for (row, &a) in xc.iter().zip(&alpha) {
                    for (wj, &x) in w.iter_mut().zip(row) {
                        *wj = *wj + a * x;
                    }
                }
                w
            })
            .collect()
    } else {
        // primal: (Xc^T Xc + n*lambda I) w = Xc^T yc
        let mut cov = vec![vec![T::zero(); d]; d];
        for row in &xc {
            for a in 0..d {
                if row[a] == T::zero() {
                    continue;
                }
                for b in 0..=a {
                    cov[a][b] = cov[a][b] + row[a] * row[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                cov[b][a] = cov[a][b];
            }
            cov[a][a] = cov[a][a] + ridge;
        }
        let chol = cholesky(cov)?;
        (0..k)
            .map(|col| {
                let mut rhs = vec![T::zero(); d];
                for (row, y) in xc.iter().zip(&yc) {
                    for (r, &x) in rhs.iter_mut().zip(row) {
                        *r = *r + x * y[col];
                    }
                }
                chol_solve(&chol, &rhs)
            })
            .collect()
    };

    let bias = weights
        .iter()
        .zip(&y_mean)
        .map(|(w, &ym)| ym - dot(w, &x_mean))
        .collect();
    Some(RidgeFit { weights, bias })
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
fn cholesky<T: Scalar>(mut a: Vec<Vec<T>>) -> Option<Vec<Vec<T>>> {
    let n = a.len();
    for j in 0..n {
        let mut diag = a[j][j];
        for p in 0..j {
            diag = diag - a[j][p] * a[j][p];
        }
        if !(diag > T::zero()) {
            return None;
        }
        let diag = diag.sqrt();
        a[j][j] = diag;
        for i in (j + 1)..n {
            let mut v = a[i][j];
            for p in 0..j {
                v = v - a[i][p] * a[j][p];
            }
            a[i][j] = v / diag;
        }
        for item in a[j].iter_mut().skip(j + 1) {
            *item = T::zero();
        }
    }
    Some(a)
}

fn chol_solve<T: Scalar>(l: &[Vec<T>], b: &[T]) -> Vec<T> {
    let n = b.len();
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut v = b[i];
        for p in 0..i {
            v = v - l[i][p] * y[p];
        }
        y[i] = v / l[i][i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut v = y[i];
        for p in (i + 1)..n {
            v = v - l[p][i] * x[p];
        }
        x[i] = v / l[i][i];
    }
    x
}
