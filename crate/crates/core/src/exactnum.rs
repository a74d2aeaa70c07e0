//! Exact combinatorics and the hypergeometric distribution.
//!
//! Every probability and moment here is an exact [`BigRational`]; floats only
//! appear at the boundary, when a value is compared against a closed-form
//! exponential bound.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

/// Slack used when an exact quantity, converted to `f64`, is compared with a
/// bound that is itself evaluated in floating point.
pub const FLOAT_SLACK: f64 = 1e-12;

/// Below this argument [`psi`] and [`phi`] switch to their Taylor series.
pub const PHI_SERIES_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("hypergeometric draws {draws} exceed population {population}")]
    DrawsExceedPopulation { population: u64, draws: u64 },
    #[error("hypergeometric special count {special} exceeds population {population}")]
    SpecialExceedsPopulation { population: u64, special: u64 },
    #[error("argument out of range: {0}")]
    OutOfRange(String),
}

/// `C(n, k)`, zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        // acc * (n - i) is always divisible by (i + 1) at this point.
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Falling factorial `(n)_k = n (n-1) ... (n-k+1)`, zero when `k > n`.
pub fn falling_factorial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    product_range(n - k + 1, n)
}

/// Product of the integers in `lo..=hi`; one for an empty range.
fn product_range(lo: u64, hi: u64) -> BigUint {
    if lo > hi {
        return BigUint::one();
    }
    // Binary splitting keeps the operands balanced.
    if hi - lo < 16 {
        let mut acc = BigUint::one();
        for j in lo..=hi {
            acc *= j;
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    product_range(lo, mid) * product_range(mid + 1, hi)
}

/// `C(total - removed, k) / C(total, k)` computed with only
/// `min(removed, k)` factors on each side.
///
/// This is the probability that a uniform `k`-subset of `total` items avoids a
/// fixed set of `removed` items.
pub fn binomial_ratio(total: u64, removed: u64, k: u64) -> BigRational {
    assert!(removed <= total, "cannot remove {removed} of {total} items");
    if k > total {
        // Both binomials vanish; callers only reach this with invalid draws.
        return BigRational::zero();
    }
    if k > total - removed {
        return BigRational::zero();
    }
    let (num, den) = if k >= removed {
        // (total-removed)_k / (total)_k = (total-k)_removed / (total)_removed
        (
            product_range(total - k - removed + 1, total - k),
            product_range(total - removed + 1, total),
        )
    } else {
        (
            product_range(total - removed - k + 1, total - removed),
            product_range(total - k + 1, total),
        )
    };
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Round-to-nearest conversion of an exact rational.
pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        if x.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact rational value of a finite float.
pub fn from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `Hyp(N, m, n)`: the number of special balls among `m` draws without
/// replacement from an urn of `N` balls, `n` of which are special.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct HypergeometricParams {
    population: u64,
    draws: u64,
    special: u64,
}

impl HypergeometricParams {
    pub fn new(population: u64, draws: u64, special: u64) -> Result<Self, ExactError> {
        if draws > population {
            return Err(ExactError::DrawsExceedPopulation { population, draws });
        }
        if special > population {
            return Err(ExactError::SpecialExceedsPopulation {
                population,
                special,
            });
        }
        Ok(Self {
            population,
            draws,
            special,
        })
    }

    pub fn population(&self) -> u64 {
        self.population
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn special(&self) -> u64 {
        self.special
    }

    /// Parameters with the roles of draws and special balls exchanged; the
    /// law is invariant under this swap.
    pub fn swapped(&self) -> Self {
        Self {
            population: self.population,
            draws: self.special,
            special: self.draws,
        }
    }

    /// Smallest and largest values with positive probability.
    pub fn support(&self) -> (u64, u64) {
        let lo = (self.draws + self.special).saturating_sub(self.population);
        (lo, self.draws.min(self.special))
    }

    /// `gamma = E H = n m / N`.
    pub fn mean(&self) -> BigRational {
        if self.population == 0 {
            return BigRational::zero();
        }
        BigRational::new(
            BigInt::from(self.draws) * BigInt::from(self.special),
            BigInt::from(self.population),
        )
    }
}

/// `P[H = k] = C(n,k) C(N-n, m-k) / C(N,m)`.
pub fn hyp_pmf(params: &HypergeometricParams, k: u64) -> BigRational {
    let HypergeometricParams {
        population,
        draws,
        special,
    } = *params;
    if k > draws || k > special || draws - k > population - special {
        return BigRational::zero();
    }
    let num = binomial(special, k) * binomial(population - special, draws - k);
    BigRational::new(num.into(), binomial(population, draws).into())
}

/// The full pmf on `0..=min(m, n)`, sharing one denominator.
pub fn hyp_law(params: &HypergeometricParams) -> Vec<BigRational> {
    let top = params.draws.min(params.special);
    let den: BigInt = binomial(params.population, params.draws).into();
    (0..=top)
        .map(|k| {
            if params.draws - k > params.population - params.special {
                return BigRational::zero();
            }
            let num = binomial(params.special, k)
                * binomial(params.population - params.special, params.draws - k);
            BigRational::new(num.into(), den.clone())
        })
        .collect()
}

/// Exact raw moment `E H^j`.
pub fn hyp_moment(params: &HypergeometricParams, j: u32) -> BigRational {
    hyp_law(params)
        .into_iter()
        .enumerate()
        .fold(BigRational::zero(), |acc, (k, p)| {
            acc + p * BigRational::from_integer(BigInt::from(k).pow(j))
        })
}

/// `P[H = 0]` as the product `prod_{i<m} (1 - n/(N-i))`.
///
/// Whenever a factor would turn negative an earlier factor is exactly zero,
/// so the product is evaluated left to right and stops at the first zero.
pub fn hyp_zero_prob(params: &HypergeometricParams) -> BigRational {
    let mut acc = BigRational::one();
    for i in 0..params.draws {
        let remaining = params.population - i;
        if params.special >= remaining {
            debug_assert_eq!(
                params.special, remaining,
                "negative factor without a preceding zero factor"
            );
            return BigRational::zero();
        }
        acc *= BigRational::new(
            BigInt::from(remaining - params.special),
            BigInt::from(remaining),
        );
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `P[H >= gamma + t] <= exp(-t^2 / (2 gamma + t))`.
pub fn check_tail_bound(params: &HypergeometricParams, t: f64) -> Result<BoundReport, ExactError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(ExactError::OutOfRange(format!("tail offset t = {t}")));
    }
    let gamma = params.mean();
    let threshold = &gamma + from_f64(t);
    let tail = hyp_law(params)
        .into_iter()
        .enumerate()
        .filter(|(k, _)| int(*k as i64) >= threshold)
        .fold(BigRational::zero(), |acc, (_, p)| acc + p);
    let g = to_f64(&gamma);
    let lhs = to_f64(&tail);
    let rhs = (-t * t / (2.0 * g + t)).exp();
    Ok(BoundReport {
        lhs,
        rhs,
        holds: lhs <= rhs + FLOAT_SLACK,
    })
}

/// `E H^k <= 3^{k-1} (k! (gamma+1)^k + gamma^k + 1)`, the explicit constant
/// produced by exponential domination of `H - gamma - 1`.
pub fn check_moment_bound(
    params: &HypergeometricParams,
    k: u32,
) -> Result<BoundReport, ExactError> {
    if k == 0 {
        return Err(ExactError::OutOfRange("moment order k = 0".into()));
    }
    let g = to_f64(&params.mean());
    let lhs = to_f64(&hyp_moment(params, k));
    let k_fact: f64 = (1..=k).map(f64::from).product();
    let kf = k as i32;
    let rhs = 3f64.powi(kf - 1) * (k_fact * (g + 1.0).powi(kf) + g.powi(kf) + 1.0);
    Ok(BoundReport {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + FLOAT_SLACK),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma3Report {
    /// Exact `P[H = 0]`.
    pub p0: f64,
    /// `exp(-mn/(N-m-n+1))`, present only when `m + n - 1 < N`.
    pub lower: Option<f64>,
    /// `exp(-mn/N)`.
    pub upper: f64,
    pub holds: bool,
}

/// Both sandwiches: the one on `P[H = 0]` and the chain
/// `mn/N - m^2 n^2/(2N^2) <= 1 - e^{-mn/N} <= P[H > 0] <= mn/N`.
pub fn check_lemma3(params: &HypergeometricParams) -> Lemma3Report {
    let p0_exact = hyp_pmf(params, 0);
    let p0 = to_f64(&p0_exact);
    let p_pos = to_f64(&(BigRational::one() - &p0_exact));
    let (big_n, m, n) = (
        params.population as f64,
        params.draws as f64,
        params.special as f64,
    );
    let x = if params.population == 0 {
        0.0
    } else {
        m * n / big_n
    };
    let upper = (-x).exp();
    let lower = (params.draws + params.special < params.population + 1)
        .then(|| (-(m * n) / (big_n - m - n + 1.0)).exp());

    let one_minus = -(-x).exp_m1();
    let mut holds = p0 <= upper + FLOAT_SLACK;
    if let Some(lo) = lower {
        holds &= lo <= p0 + FLOAT_SLACK;
    }
    holds &= x - x * x / 2.0 <= one_minus + FLOAT_SLACK;
    holds &= one_minus <= p_pos + FLOAT_SLACK;
    holds &= p_pos <= x + FLOAT_SLACK;
    Lemma3Report {
        p0,
        lower,
        upper,
        holds,
    }
}

/// `psi(x) = 1 - e^{-x}(1 + x)`, accurate near zero.
pub fn psi(x: f64) -> f64 {
    if x < PHI_SERIES_THRESHOLD {
        psi_series(x)
    } else {
        -(-x).exp_m1() - x * (-x).exp()
    }
}

/// `sum_{k>=2} (-1)^k (k-1) x^k / k!`, truncated after the x^7 term.
pub(crate) fn psi_series(x: f64) -> f64 {
    let mut term = x; // x^k / k! for k = 1
    let mut acc = 0.0;
    for k in 2..=7u32 {
        term *= x / f64::from(k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * f64::from(k - 1) * term;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma4Report {
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
    pub holds: bool,
}

/// `min(x^2,1)/4 <= 1 - e^{-x}(1+x) <= min(x^2,2)/2`.
pub fn check_lemma4(x: f64) -> Result<Lemma4Report, ExactError> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(ExactError::OutOfRange(format!("lemma 4 argument x = {x}")));
    }
    let sq = x * x;
    let lower = sq.min(1.0) / 4.0;
    let upper = sq.min(2.0) / 2.0;
    let middle = psi(x);
    Ok(Lemma4Report {
        lower,
        middle,
        upper,
        holds: lower <= middle + FLOAT_SLACK && middle <= upper + FLOAT_SLACK,
    })
}

/// `phi(x) = e^{-x} (1 - e^{-x}(1+x))`, the limiting variance profile of the
/// isolated-vertex count.
pub fn phi(x: f64) -> f64 {
    (-x).exp() * psi(x)
}

/// `gcd` of two big integers; exposed for invariant tests on reduced
/// rationals.
pub fn big_gcd(a: &BigInt, b: &BigInt) -> BigInt {
    a.gcd(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(n: u64, m: u64, s: u64) -> HypergeometricParams {
        HypergeometricParams::new(n, m, s).unwrap()
    }

    fn pascal(n: u64, k: u64) -> u64 {
        let mut row = vec![1u64];
        for _ in 0..n {
            let mut next = vec![1u64; row.len() + 1];
            for i in 1..row.len() {
                next[i] = row[i - 1] + row[i];
            }
            row = next;
        }
        row.get(k as usize).copied().unwrap_or(0)
    }

    #[test]
    fn binomial_cases() {
        assert_eq!(binomial(5, 0), BigUint::one());
        assert_eq!(binomial(3, 5), BigUint::zero());
        assert_eq!(binomial(6, 2), BigUint::from(pascal(6, 2)));
        for n in 0..30 {
            for k in 0..=n + 2 {
                assert_eq!(binomial(n, k), BigUint::from(pascal(n, k)), "C({n},{k})");
            }
        }
    }

    #[test]
    fn falling_factorial_cases() {
        assert_eq!(falling_factorial(4, 0), BigUint::one());
        assert_eq!(falling_factorial(4, 2), BigUint::from(4u32 * 3));
        assert_eq!(falling_factorial(2, 3), BigUint::zero());
        let direct: u64 = (17..=20).product();
        assert_eq!(falling_factorial(20, 4), BigUint::from(direct));
    }

    #[test]
    fn binomial_ratio_matches_quotient() {
        for total in 0..25u64 {
            for removed in 0..=total {
                for k in 0..=total {
                    let expect = BigRational::new(
                        binomial(total - removed, k).into(),
                        binomial(total, k).into(),
                    );
                    assert_eq!(binomial_ratio(total, removed, k), expect);
                }
            }
        }
    }

    #[test]
    fn pmf_examples() {
        let p = hp(3, 1, 2);
        assert_eq!(hyp_pmf(&p, 1), ratio(2, 3));
        assert_eq!(hyp_pmf(&p, 0), ratio(1, 3));
        assert!(hyp_pmf(&hp(10, 3, 4), 4).is_zero());
        assert!(hyp_pmf(&hp(10, 3, 4), 7).is_zero());
    }

    #[test]
    fn moment_examples() {
        assert_eq!(hyp_moment(&hp(3, 1, 2), 1), ratio(2, 3));
        assert!(hyp_moment(&hp(9, 4, 0), 3).is_zero());
        // All 15 pairs from {1..6} with specials {1,2,3}.
        let mut second = 0i64;
        for a in 1..=6 {
            for b in a + 1..=6 {
                let h = (a <= 3) as i64 + (b <= 3) as i64;
                second += h * h;
            }
        }
        assert_eq!(hyp_moment(&hp(6, 2, 3), 2), ratio(second, 15));
    }

    #[test]
    fn zero_prob_examples() {
        assert_eq!(hyp_zero_prob(&hp(3, 1, 2)), ratio(1, 3));
        assert!(hyp_zero_prob(&hp(8, 0, 5)).is_one());
        assert!(hyp_zero_prob(&hp(6, 2, 5)).is_zero());
        assert!(hyp_pmf(&hp(6, 2, 5), 0).is_zero());
    }

    #[test]
    fn tail_bound_examples() {
        assert!(check_tail_bound(&hp(3, 1, 2), 1.0).unwrap().holds);
        let r = check_tail_bound(&hp(20, 4, 7), 5.0).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.holds);
        assert!(check_tail_bound(&hp(3, 1, 2), 0.0).is_err());
    }

    #[test]
    fn moment_bound_examples() {
        let r = check_moment_bound(&hp(3, 1, 2), 1).unwrap();
        assert!((r.lhs - 2.0 / 3.0).abs() < 1e-15 && r.holds);
        let r = check_moment_bound(&hp(12, 5, 0), 2).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.holds);
        assert!(check_moment_bound(&hp(20, 5, 6), 3).unwrap().holds);
    }

    #[test]
    fn lemma3_examples() {
        let r = check_lemma3(&hp(3, 1, 2));
        assert!((r.p0 - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.upper - (-2.0f64 / 3.0).exp()).abs() < 1e-15);
        assert!((r.lower.unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        assert!(r.holds);
        let r = check_lemma3(&hp(7, 0, 3));
        assert_eq!(r.p0, 1.0);
        assert!(r.holds);
        // m + n - 1 = N: no lower bound
        assert!(check_lemma3(&hp(6, 3, 4)).lower.is_none());
    }

    #[test]
    fn lemma4_examples() {
        let r = check_lemma4(0.0).unwrap();
        assert_eq!((r.lower, r.middle, r.upper), (0.0, 0.0, 0.0));
        let r = check_lemma4(1.0).unwrap();
        assert!((r.middle - (1.0 - 2.0 / std::f64::consts::E)).abs() < 1e-15);
        assert_eq!((r.lower, r.upper), (0.25, 0.5));
        assert!(r.holds);
        assert!(check_lemma4(-1.0).is_err());
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(0.0), 0.0);
        let e = std::f64::consts::E;
        assert!((phi(1.0) - (1.0 - 2.0 / e) / e).abs() < 1e-15);
        for x in [1e-3, 1e-5, 1e-7, 1e-9] {
            assert!((phi(x) / (x * x) - 0.5).abs() < 2.0 * x, "x = {x}");
        }
    }

    #[test]
    fn phi_branches_agree_at_switch() {
        let x = PHI_SERIES_THRESHOLD;
        let direct = -(-x).exp_m1() - x * (-x).exp();
        assert!((psi_series(x) - direct).abs() < 1e-13);
        let rel = (psi_series(x) - direct).abs() / direct;
        assert!(rel < 1e-7, "relative gap {rel}");
    }
}
