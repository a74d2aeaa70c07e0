//! Standard normal helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `Phi(z)` through the complementary error function, accurate to a few
/// ulps in both tails.
pub fn cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `int_{-inf}^{z} Phi(t) dt = z Phi(z) + phi(z)`.
pub fn cdf_integral(z: f64) -> f64 {
    z * cdf(z) + pdf(z)
}

/// `Phi^{-1}(p)` for `0 < p < 1`: Acklam's rational approximation refined by
/// two Halley steps.
pub fn quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument {p} outside (0, 1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    for _ in 0..2 {
        // cdf(x) - p, evaluated through the smaller tail.
        let e = if x < 0.0 {
            cdf(x) - p
        } else {
            (1.0 - p) - 0.5 * libm::erfc(x * FRAC_1_SQRT_2)
        };
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Values from a 50-digit evaluation of 0.5*erfc(-z/sqrt 2).
        let cases = [
            (0.0, 0.5),
            (1.0, 0.841_344_746_068_542_9),
            (-1.0, 0.158_655_253_931_457_05),
            (-5.0, 2.866_515_718_791_939e-7),
            (-10.0, 7.619_853_024_160_527e-24),
            (2.5, 0.993_790_334_674_223_8),
        ];
        for (z, want) in cases {
            let got = cdf(z);
            assert!(
                ((got - want) / want).abs() < 1e-14,
                "Phi({z}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let x = quantile(p);
            assert!((cdf(x) - p).abs() < 1e-15, "p = {p}");
        }
        for p in [1e-10, 1e-6, 1.0 - 1e-6] {
            let x = quantile(p);
            assert!(((cdf(x) - p) / p.min(1.0 - p)).abs() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn cdf_integral_derivative() {
        for z in [-3.0, -0.5, 0.0, 1.2, 4.0] {
            let h = 1e-5;
            let d = (cdf_integral(z + h) - cdf_integral(z - h)) / (2.0 * h);
            assert!((d - cdf(z)).abs() < 1e-9);
        }
    }
}
