//! Non-negative least squares (Lawson–Hanson active set).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Minimizes `‖A x − b‖₂` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::Fit(format!("nnls: {m} rows but {} right-hand sides", b.len())));
    }
    let scale = a.amax().max(f64::MIN_POSITIVE) * b.amax().max(1.0);
    let tol = 10.0 * f64::EPSILON * scale * (m.max(n) as f64);
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else {
            return Ok(x);
        };
        passive[j] = true;

        for _ in 0..max_outer {
            let z = solve_passive(a, b, &passive)?;
            if (0..n).filter(|&k| passive[k]).all(|k| z[k] > 0.0) {
                x = z;
                break;
            }
            // step back to the boundary and drop the variables that hit it
            let mut alpha = f64::INFINITY;
            for k in (0..n).filter(|&k| passive[k] && z[k] <= 0.0) {
                alpha = alpha.min(x[k] / (x[k] - z[k]));
            }
            x += (z - &x) * alpha;
            for k in 0..n {
                if passive[k] && x[k] <= tol {
                    passive[k] = false;
                    x[k] = 0.0;
                }
            }
        }
    }
    Err(Error::Fit(format!("nnls did not converge in {max_outer} iterations")))
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> Result<DVector<f64>> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&k| passive[k]).collect();
    let sub = a.select_columns(&cols);
    let sol = sub.svd(true, true).solve(b, 1e-14).map_err(|e| Error::Fit(format!("nnls subproblem: {e}")))?;
    let mut z = DVector::zeros(passive.len());
    for (i, &k) in cols.iter().enumerate() {
        z[k] = sol[i];
    }
    Ok(z)
}
