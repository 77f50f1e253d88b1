//! Special functions and quadrature used by the relaxation spectra.
//!
//! * `e1(x)`: exponential integral E₁(x) = ∫ₓ^∞ e⁻ᵘ/u du, x > 0
//! * `ein(x)`: entire exponential integral Ein(x) = ∫₀ˣ (1 − e⁻ᵘ)/u du,
//!   related by E₁(x) = Ein(x) − γ − ln x
//! * `integrate`: adaptive Gauss–Kronrod (7/15) quadrature on a finite interval
//!
//! E₁ uses the power series below x = 1 and a modified-Lentz continued
//! fraction above it.

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_SWITCH: f64 = 1.0;

/// Ein(x) = Σ_{k≥1} (−1)^{k+1} x^k / (k·k!).
///
/// Defined for all real x; evaluated by the series for |x| ≤ 1 and through
/// E₁ above that.
pub fn ein(x: f64) -> f64 {
    if x.abs() <= SERIES_SWITCH {
        ein_series(x)
    } else if x > 0.0 {
        EULER_GAMMA + x.ln() + e1_continued_fraction(x)
    } else {
        // negative arguments are not needed by the kernels; fall back to the
        // series, which still converges (slowly) for moderate |x|
        ein_series(x)
    }
}

fn ein_series(x: f64) -> f64 {
    let mut term = x; // x^k / k!
    let mut sum = x;
    let mut k = 1.0_f64;
    loop {
        k += 1.0;
        term *= -x / k;
        let contrib = term / k;
        sum += contrib;
        if contrib.abs() <= f64::EPSILON * 0.25 * sum.abs() || k > 200.0 {
            break;
        }
    }
    sum
}

/// Exponential integral E₁(x) for x > 0.
///
/// Returns `+inf` at x = 0 and an error for negative or NaN input.
pub fn e1(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("E1 requires x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(e1_unchecked(x))
}

pub(crate) fn e1_unchecked(x: f64) -> f64 {
    if x <= SERIES_SWITCH {
        -EULER_GAMMA - x.ln() + ein_series(x)
    } else {
        e1_continued_fraction(x)
    }
}

fn e1_continued_fraction(x: f64) -> f64 {
    if x > 745.0 {
        return 0.0;
    }
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() <= f64::EPSILON {
            break;
        }
    }
    h * (-x).exp()
}

// 15-point Kronrod abscissae and weights with the embedded 7-point Gauss
// weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Subdivides until the estimated error is below
/// `max(abs_tol, rel_tol·|I|)`; fails if that takes more than 4096
/// subintervals.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration limits must be finite: [{a}, {b}]")));
    }
    let mut intervals = vec![{
        let (v, e) = kronrod15(&f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..4096 {
        let total: f64 = intervals.iter().map(|s| s.2).sum();
        let err: f64 = intervals.iter().map(|s| s.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        // bisect the interval with the largest error estimate
        let (idx, _) = intervals.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).expect("non-empty");
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod15(&f, lo, mid);
        let (v2, e2) = kronrod15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    Err(Error::Domain(format!("adaptive quadrature on [{a}, {b}] did not converge")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn e1_reference_values() {
        // 30-digit reference values
        assert!(rel(e1(1.0).unwrap(), 0.219_383_934_395_520_3) < 1e-14);
        assert!(rel(e1(0.5).unwrap(), 0.559_773_594_776_160_8) < 1e-14);
        assert!(rel(e1(2.0).unwrap(), 0.048_900_510_708_061_12) < 1e-14);
        assert!(rel(e1(10.0).unwrap(), 4.156_968_929_685_324e-6) < 1e-13);
        assert!(rel(e1(1e-6).unwrap(), 13.238_295_893_062_49) < 1e-14);
    }

    #[test]
    fn e1_continuity_at_switch() {
        let below = e1_unchecked(1.0 - 1e-12);
        let above = e1_unchecked(1.0 + 1e-12);
        assert!(rel(below, above) < 1e-11);
    }

    #[test]
    fn e1_against_quadrature() {
        for &x in &[0.01, 0.3, 0.99, 1.01, 3.0, 25.0] {
            // ∫ₓ^∞ e^{-u}/u du with u = x + s/(1-s) mapped to [0,1)
            let q = integrate(
                |s: f64| {
                    if s >= 1.0 {
                        return 0.0;
                    }
                    let u = x + s / (1.0 - s);
                    (-u).exp() / u / ((1.0 - s) * (1.0 - s))
                },
                0.0,
                1.0,
                0.0,
                1e-13,
            )
            .unwrap();
            assert!(rel(e1(x).unwrap(), q) < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn ein_identity() {
        for &x in &[0.2, 1.0, 1.5, 7.0, 40.0] {
            let lhs = e1(x).unwrap();
            let rhs = ein(x) - EULER_GAMMA - x.ln();
            assert!((lhs - rhs).abs() < 1e-14 * (1.0 + x.ln().abs()), "x = {x}");
        }
    }

    #[test]
    fn e1_rejects_negative() {
        assert!(e1(-1.0).is_err());
        assert!(e1(f64::NAN).is_err());
        assert_eq!(e1(0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn quadrature_polynomial_and_exp() {
        let v = integrate(|x| x * x, 0.0, 3.0, 0.0, 1e-14).unwrap();
        assert!((v - 9.0).abs() < 1e-13);
        let v = integrate(f64::exp, 0.0, 1.0, 0.0, 1e-14).unwrap();
        assert!(rel(v, std::f64::consts::E - 1.0) < 1e-14);
    }
}
