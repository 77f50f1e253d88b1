//! Parameter identification from synthetic or measured records.

use nalgebra::{DMatrix, DVector};

use super::derivative;
use super::nnls::nnls;
use crate::constitutive::ExponentialTensileLaw;
use crate::error::{Error, Result};
use crate::kernels::PronySpectrum;

const MIN_B: f64 = 1e-12;
const MAX_ITERATIONS: usize = 100;
const PARAMETER_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFit {
    pub law: ExponentialTensileLaw,
    /// Regression estimate before refinement, `(B, C)`.
    pub initial: (f64, f64),
    /// `‖T_model − T_data‖₂` at the returned parameters.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `u(B, x) = (e^{Bx} − 1)/B` and `∂u/∂B`.
fn shape(b: f64, x: f64) -> (f64, f64) {
    let z = b * x;
    if z.abs() < 1e-3 {
        let u = x * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0);
        let du = x * x * (0.5 + z / 3.0 + z * z / 8.0);
        (u, du)
    } else {
        let u = z.exp_m1() / b;
        (u, (x * z.exp() - u) / b)
    }
}

fn residuals(b: f64, c: f64, x: &[f64], t: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.len(), x.iter().zip(t).map(|(&x, &t)| c * shape(b, x).0 - t))
}

/// Fits `T = (C/B)(e^{B(λ−1)} − 1)` to stress-extension samples.
///
/// Starts from the regression of finite-difference slopes `dT/dλ` on `T`
/// (slope = B·T + C) and refines with projected Gauss–Newton on the
/// stress residuals.
pub fn fit_exponential_law(stretch: &[f64], stress: &[f64]) -> Result<ExponentialFit> {
    let n = stretch.len();
    if n != stress.len() {
        return Err(Error::Fit(format!("{n} stretches but {} stresses", stress.len())));
    }
    if n < 3 {
        return Err(Error::Fit(format!("need at least 3 samples, got {n}")));
    }
    if stretch.iter().chain(stress).any(|v| !v.is_finite()) {
        return Err(Error::Fit("samples must be finite".into()));
    }
    if let Some(i) = stretch.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Fit(format!("extension must be strictly increasing (sample {})", i + 1)));
    }

    let slope = derivative(stretch, stress);
    let mean_t = stress.iter().sum::<f64>() / n as f64;
    let mean_s = slope.iter().sum::<f64>() / n as f64;
    let stt: f64 = stress.iter().map(|t| (t - mean_t).powi(2)).sum();
    let sts: f64 = stress.iter().zip(&slope).map(|(t, s)| (t - mean_t) * (s - mean_s)).sum();
    let scale = stress.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    if !(stt > (1e-12 * scale).powi(2) * n as f64) {
        return Err(Error::Fit("singular regression: stress is constant".into()));
    }
    let b0 = sts / stt;
    let c0 = mean_s - b0 * mean_t;
    let x: Vec<f64> = stretch.iter().map(|l| l - 1.0).collect();

    let mut b = b0.max(MIN_B);
    let mut c = if c0 > 0.0 { c0 } else { mean_s.abs().max(f64::MIN_POSITIVE) };
    let mut r = residuals(b, c, &x, stress);
    let mut cost = r.norm_squared();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let jac = DMatrix::from_fn(n, 2, |i, j| {
            let (u, du) = shape(b, x[i]);
            if j == 0 {
                c * du
            } else {
                u
            }
        });
        let Ok(step) = jac.clone().svd(true, true).solve(&(-&r), 1e-14) else {
            break;
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let nb = (b + lambda * step[0]).max(MIN_B);
            let nc = (c + lambda * step[1]).max(f64::MIN_POSITIVE);
            let nr = residuals(nb, nc, &x, stress);
            let ncost = nr.norm_squared();
            if ncost <= cost {
                accepted = Some((nb, nc, nr, ncost));
                break;
            }
            lambda *= 0.5;
        }
        let Some((nb, nc, nr, ncost)) = accepted else {
            converged = true;
            break;
        };
        let change = ((nb - b) / b.max(1e-300)).abs().max(((nc - c) / c).abs());
        (b, c, r, cost) = (nb, nc, nr, ncost);
        if change < PARAMETER_TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(ExponentialFit {
        law: ExponentialTensileLaw::new(b, c)?,
        initial: (b0, c0),
        residual_norm: cost.sqrt(),
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationFit {
    pub spectrum: PronySpectrum,
    /// Largest absolute deviation from the samples.
    pub max_error: f64,
}

fn check_relaxation_series(times: &[f64], values: &[f64]) -> Result<()> {
    if times.len() != values.len() {
        return Err(Error::Fit(format!("{} times but {} values", times.len(), values.len())));
    }
    if times.len() < 2 {
        return Err(Error::Fit("need at least 2 samples".into()));
    }
    if times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::Fit("samples must be finite".into()));
    }
    if times[0] != 0.0 || (values[0] - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "relaxation series must start at (0, 1), got ({}, {})",
            times[0], values[0]
        )));
    }
    if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Fit(format!("times must be strictly increasing (sample {})", i + 1)));
    }
    if let Some(i) = values.windows(2).position(|w| w[1] > w[0] + 1e-12) {
        return Err(Error::Domain(format!("relaxation series increases at sample {}", i + 1)));
    }
    Ok(())
}

/// Fits a Prony series with `n_terms` log-spaced frequencies spanning
/// `[1/t_max, 1/t_min]`, where `t_min` is the first positive time.
pub fn fit_relaxation_spectrum(times: &[f64], values: &[f64], n_terms: usize) -> Result<RelaxationFit> {
    check_relaxation_series(times, values)?;
    if n_terms == 0 {
        return Err(Error::invalid("n_terms", 0.0, "must be >= 1"));
    }
    let (t_min, t_max) = (times[1], times[times.len() - 1]);
    let frequencies: Vec<f64> = if n_terms == 1 || t_max == t_min {
        vec![1.0 / t_max]
    } else {
        let (lo, hi) = ((1.0 / t_max).ln(), (1.0 / t_min).ln());
        (0..n_terms).map(|k| (lo + (hi - lo) * k as f64 / (n_terms - 1) as f64).exp()).collect()
    };
    fit_relaxation_spectrum_with_frequencies(times, values, &frequencies)
}

/// Non-negative least squares for `K + Σ αₙ e^{−νₙ t}` at fixed `νₙ`.
pub fn fit_relaxation_spectrum_with_frequencies(
    times: &[f64],
    values: &[f64],
    frequencies: &[f64],
) -> Result<RelaxationFit> {
    check_relaxation_series(times, values)?;
    if frequencies.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Fit("frequencies must be finite and > 0".into()));
    }
    let a = DMatrix::from_fn(times.len(), frequencies.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            (-frequencies[j - 1] * times[i]).exp()
        }
    });
    let b = DVector::from_column_slice(values);
    let x = nnls(&a, &b)?;
    let spectrum = PronySpectrum::new(x[0], frequencies.iter().enumerate().map(|(j, &nu)| (x[j + 1], nu)))?;
    let max_error = times.iter().zip(values).map(|(&t, &v)| (spectrum.value(t) - v).abs()).fold(0.0, f64::max);
    Ok(RelaxationFit { spectrum, max_error })
}
