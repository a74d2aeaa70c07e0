//! Model-agnostic coupling machinery.
//!
//! The checkers here work on finite laws with exact rational probabilities,
//! so an identity either holds exactly or it does not. The estimators at the
//! bottom (Kolmogorov and Wasserstein distance to the standard normal) work on
//! floats.

use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::exactnum::int;
use crate::normal;

/// Minimum sample size accepted by [`empirical_kolmogorov`].
pub const MIN_KOLMOGOROV_SAMPLES: usize = 100;

/// Default DKW confidence level (the band holds with probability 0.95).
pub const DEFAULT_CONFIDENCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SteinError {
    #[error("probabilities must be positive and sum to one (sum = {0})")]
    BadLaw(String),
    #[error("stein pair parameter lambda must lie in (0, 1], got {0}")]
    BadLambda(String),
    #[error("two-point law with atoms {a} and {b} is not mean zero with a > 0 > b")]
    NotMeanZero { a: f64, b: f64 },
    #[error("size bias needs a positive mean")]
    ZeroMean,
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("samples are not sorted")]
    Unsorted,
    #[error("confidence must lie in (0, 1), got {0}")]
    BadConfidence(f64),
    #[error("recursion needs 0 < q < 1 and c > 0, got q = {q}, c = {c}")]
    BadRecursion { q: f64, c: f64 },
    #[error("kernel violates {condition} at state {state}: {detail}")]
    KernelViolation {
        condition: &'static str,
        state: usize,
        detail: String,
    },
    #[error("exhaustive enumeration too large: {0}")]
    Infeasible(String),
}

/// A polynomial with exact rational coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    coeffs: Vec<BigRational>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| int(c)).collect())
    }

    /// `x^k`.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![BigRational::zero(); k + 1];
        coeffs[k] = BigRational::one();
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// Degree, with the zero polynomial reported as degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        self.coeffs
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * x + c)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + crate::exactnum::to_f64(c))
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * int(k as i64))
                .collect(),
        )
    }
}

/// A finite law with exact probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw<T> {
    atoms: Vec<(T, BigRational)>,
}

impl<T> DiscreteLaw<T> {
    /// Checks that every probability is positive and that they sum to one.
    pub fn new(atoms: Vec<(T, BigRational)>) -> Result<Self, SteinError> {
        let total = atoms
            .iter()
            .fold(BigRational::zero(), |acc, (_, p)| acc + p);
        if atoms.iter().any(|(_, p)| !p.is_positive()) || !total.is_one() {
            return Err(SteinError::BadLaw(total.to_string()));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(T, BigRational)] {
        &self.atoms
    }

    pub fn expect<F: Fn(&T) -> BigRational>(&self, f: F) -> BigRational {
        self.atoms
            .iter()
            .fold(BigRational::zero(), |acc, (x, p)| acc + f(x) * p)
    }
}

impl DiscreteLaw<BigRational> {
    pub fn mean(&self) -> BigRational {
        self.expect(Clone::clone)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteinPairReport {
    pub exchangeable: bool,
    /// `E{W' | W} = (1 - lambda) W` on every atom.
    pub linear_regression: bool,
    /// Coupling identity with `G = (W' - W)/(2 lambda)` for `f = x, x^2, x^3`.
    pub coupling_identity: [bool; 3],
    pub is_stein_pair: bool,
}

/// Checks the λ-Stein pair property of an exact joint law of `(W, W')`.
pub fn check_stein_pair(
    pair_law: &DiscreteLaw<(BigRational, BigRational)>,
    lambda: &BigRational,
) -> Result<SteinPairReport, SteinError> {
    if !lambda.is_positive() || *lambda > BigRational::one() {
        return Err(SteinError::BadLambda(lambda.to_string()));
    }
    let mut joint: HashMap<(&BigRational, &BigRational), BigRational> = HashMap::new();
    for ((w, wp), p) in pair_law.atoms() {
        *joint.entry((w, wp)).or_insert_with(BigRational::zero) += p;
    }
    let exchangeable = joint
        .iter()
        .all(|((w, wp), p)| joint.get(&(*wp, *w)).is_some_and(|q| q == p));

    // sum over w' of p(w, w') (w' - (1 - lambda) w) must vanish for each w
    let keep = BigRational::one() - lambda;
    let mut residual: BTreeMap<&BigRational, BigRational> = BTreeMap::new();
    for ((w, wp), p) in pair_law.atoms() {
        *residual.entry(w).or_insert_with(BigRational::zero) += (wp - &keep * w) * p;
    }
    let linear_regression = residual.values().all(Zero::is_zero);

    let two_lambda = lambda * int(2);
    let mut coupling_identity = [false; 3];
    for (slot, k) in coupling_identity.iter_mut().zip(1..=3) {
        let f = Polynomial::monomial(k);
        let lhs = pair_law.expect(|(w, wp)| (wp - w) / &two_lambda * (f.eval(wp) - f.eval(w)));
        let rhs = pair_law.expect(|(w, _)| w * f.eval(w));
        *slot = lhs == rhs;
    }
    Ok(SteinPairReport {
        exchangeable,
        linear_regression,
        coupling_identity,
        is_stein_pair: exchangeable && linear_regression,
    })
}

/// The zero-bias law of a mean-zero two-point law: uniform between the atoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformLaw {
    pub lo: f64,
    pub hi: f64,
}

impl UniformLaw {
    /// `E[g'(U)] = (g(hi) - g(lo)) / (hi - lo)`.
    pub fn mean_of_derivative<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        (g(self.hi) - g(self.lo)) / (self.hi - self.lo)
    }

    /// `E[U^k]`.
    pub fn moment(&self, k: i32) -> f64 {
        (self.hi.powi(k + 1) - self.lo.powi(k + 1)) / (f64::from(k + 1) * (self.hi - self.lo))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPointZeroBias {
    pub law: UniformLaw,
    /// Variance `-ab` of the two-point law.
    pub variance: f64,
    /// Largest `|E[W f(W)] - variance E[f'(W*)]|` over `f = x^k`, `k <= 4`.
    pub max_identity_error: f64,
}

/// Zero-bias law of the two-point law on `{a, b}` with `P[a] = -b/(a-b)`.
pub fn zero_bias_two_point(a: f64, b: f64) -> Result<TwoPointZeroBias, SteinError> {
    if !(a > 0.0 && b < 0.0 && a.is_finite() && b.is_finite()) {
        return Err(SteinError::NotMeanZero { a, b });
    }
    let pa = -b / (a - b);
    let pb = a / (a - b);
    let variance = -a * b;
    let law = UniformLaw { lo: b, hi: a };
    let max_identity_error = (1..=4)
        .map(|k| {
            let f = |x: f64| x.powi(k);
            let lhs = pa * a * f(a) + pb * b * f(b);
            let rhs = variance * f64::from(k) * law.moment(k - 1);
            (lhs - rhs).abs() / lhs.abs().max(1.0)
        })
        .fold(0.0, f64::max);
    Ok(TwoPointZeroBias {
        law,
        variance,
        max_identity_error,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeBiasReport {
    pub mean: BigRational,
    /// `E[Y f(Y)] = mu E[f(Y^s)]` for `f = x, x^2`.
    pub moment_identities: bool,
    /// Same identity for every indicator `1{y <= t}` at the atoms.
    pub indicator_identities: bool,
    /// `W = Y - mu`, `W' = Y^s - mu`, `G = mu` satisfies the Stein coupling
    /// identity for `f = x, x^2, x^3`.
    pub stein_reduction: bool,
    pub holds: bool,
}

pub fn check_size_bias(
    law: &DiscreteLaw<BigRational>,
    coupled_law: &DiscreteLaw<BigRational>,
) -> Result<SizeBiasReport, SteinError> {
    let mean = law.mean();
    if !mean.is_positive() {
        return Err(SteinError::ZeroMean);
    }
    let tilt_matches = |f: &dyn Fn(&BigRational) -> BigRational| {
        law.expect(|y| y * f(y)) == &mean * coupled_law.expect(|y| f(y))
    };
    let moment_identities = (1..=2).all(|k| {
        let p = Polynomial::monomial(k);
        tilt_matches(&|y| p.eval(y))
    });
    let indicator_identities = law.atoms().iter().chain(coupled_law.atoms()).all(|(t, _)| {
        tilt_matches(&|y| {
            if y <= t {
                BigRational::one()
            } else {
                BigRational::zero()
            }
        })
    });
    let stein_reduction = (1..=3).all(|k| {
        let f = Polynomial::monomial(k);
        let lhs = &mean
            * (coupled_law.expect(|y| f.eval(&(y - &mean))) - law.expect(|y| f.eval(&(y - &mean))));
        let rhs = law.expect(|y| (y - &mean) * f.eval(&(y - &mean)));
        lhs == rhs
    });
    Ok(SizeBiasReport {
        mean,
        holds: moment_identities && indicator_identities && stein_reduction,
        moment_identities,
        indicator_identities,
        stein_reduction,
    })
}

// ---------------------------------------------------------------------------
// Distances to the standard normal

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KolmogorovEstimate {
    pub delta_hat: f64,
    pub dkw_band: f64,
}

/// Half-width of the DKW band holding with probability `1 - confidence`.
pub fn dkw_band(samples: usize, confidence: f64) -> f64 {
    ((2.0 / confidence).ln() / (2.0 * samples as f64)).sqrt()
}

/// `sup_z |F(z) - Phi(z)|` for a step CDF given as sorted `(value, mass)`
/// atoms; the sup is attained at a jump or its left limit.
pub fn kolmogorov_to_normal(atoms: &[(f64, f64)]) -> f64 {
    let mut sup = 0.0f64;
    let mut below = 0.0;
    let mut i = 0;
    while i < atoms.len() {
        let x = atoms[i].0;
        let mut mass = 0.0;
        while i < atoms.len() && atoms[i].0 == x {
            mass += atoms[i].1;
            i += 1;
        }
        let phi = normal::cdf(x);
        let at = below + mass;
        sup = sup.max((below - phi).abs()).max((at - phi).abs());
        below = at;
    }
    sup
}

/// Kolmogorov distance between the empirical CDF of sorted `samples` and
/// `Phi`, with the DKW band at level `confidence`.
pub fn empirical_kolmogorov(
    samples: &[f64],
    confidence: f64,
) -> Result<KolmogorovEstimate, SteinError> {
    if samples.len() < MIN_KOLMOGOROV_SAMPLES {
        return Err(SteinError::TooFewSamples {
            min: MIN_KOLMOGOROV_SAMPLES,
            got: samples.len(),
        });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(SteinError::BadConfidence(confidence));
    }
    if samples.windows(2).any(|w| {
        !matches!(
            w[0].partial_cmp(&w[1]),
            Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal)
        )
    }) {
        return Err(SteinError::Unsorted);
    }
    let k = samples.len() as f64;
    // Ties merge into one jump: walk groups and use counts, not masses, so
    // the cumulative value at a jump is exactly i/k.
    let mut sup = 0.0f64;
    let mut i = 0;
    while i < samples.len() {
        let x = samples[i];
        let start = i;
        while i < samples.len() && samples[i] == x {
            i += 1;
        }
        let phi = normal::cdf(x);
        sup = sup
            .max((start as f64 / k - phi).abs())
            .max((i as f64 / k - phi).abs());
    }
    Ok(KolmogorovEstimate {
        delta_hat: sup,
        dkw_band: dkw_band(samples.len(), confidence),
    })
}

/// Sorts, then runs [`empirical_kolmogorov`].
pub fn empirical_kolmogorov_unsorted(
    mut samples: Vec<f64>,
    confidence: f64,
) -> Result<KolmogorovEstimate, SteinError> {
    samples.sort_by(f64::total_cmp);
    empirical_kolmogorov(&samples, confidence)
}

/// `d_1` between a finite law on sorted `(value, mass)` atoms and `N(0,1)`,
/// computed as `int |F - Phi|` piece by piece.
pub fn wasserstein_to_normal(atoms: &[(f64, f64)]) -> f64 {
    if atoms.is_empty() {
        return f64::NAN;
    }
    let mut total = normal::cdf_integral(atoms[0].0);
    let mut level = 0.0;
    for (idx, &(x, mass)) in atoms.iter().enumerate() {
        level += mass;
        let Some(&(next, _)) = atoms.get(idx + 1) else {
            break;
        };
        if next > x {
            total += abs_gap_integral(level, x, next);
        }
    }
    let last = atoms[atoms.len() - 1].0;
    total + normal::cdf_integral(-last)
}

/// `int_a^b |c - Phi(z)| dz`.
fn abs_gap_integral(c: f64, a: f64, b: f64) -> f64 {
    let area = |lo: f64, hi: f64| normal::cdf_integral(hi) - normal::cdf_integral(lo);
    let above = |lo: f64, hi: f64| area(lo, hi) - c * (hi - lo);
    if c <= 0.0 {
        return area(a, b);
    }
    if c >= 1.0 {
        return (b - a) - area(a, b);
    }
    let root = normal::quantile(c);
    if root <= a {
        above(a, b).abs()
    } else if root >= b {
        (-above(a, b)).abs()
    } else {
        (-above(a, root)).abs() + above(root, b).abs()
    }
}

/// Empirical `d_1(W, Z)` from samples (sorted internally).
pub fn empirical_wasserstein(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let w = 1.0 / samples.len() as f64;
    let atoms: Vec<(f64, f64)> = samples.into_iter().map(|x| (x, w)).collect();
    wasserstein_to_normal(&atoms)
}

// ---------------------------------------------------------------------------
// Efron–Stein-type bound over (pi, Sigma)

#[derive(Debug, Clone, PartialEq)]
pub struct EfronSteinReport {
    pub var: BigRational,
    pub bound: BigRational,
    pub holds: bool,
}

/// Largest `N` for which the exhaustive check is attempted.
pub const EFRON_STEIN_MAX_N: usize = 4;
/// Largest number of auxiliary permutations.
pub const EFRON_STEIN_MAX_SIGMA: usize = 2;

/// Exact `Var h(pi, Sigma)` against
/// `1/2 sum_i E(h - h(pi, Sigma'_i))^2 + 1/2 sum_j E(h - h(pi tau_j, Sigma))^2`,
/// where `pi` and the `n_sigma` components of `Sigma` are uniform on `S_N`
/// and `tau_j` swaps `j` with a uniform element of `{j, ..., N}`.
///
/// Permutations are in one-line notation on `0..N`.
pub fn check_efron_stein<H>(
    h: H,
    big_n: usize,
    n_sigma: usize,
) -> Result<EfronSteinReport, SteinError>
where
    H: Fn(&[usize], &[&[usize]]) -> BigRational,
{
    if big_n == 0 || big_n > EFRON_STEIN_MAX_N || n_sigma > EFRON_STEIN_MAX_SIGMA {
        return Err(SteinError::Infeasible(format!(
            "N = {big_n}, n_sigma = {n_sigma} (limits {EFRON_STEIN_MAX_N}, {EFRON_STEIN_MAX_SIGMA})"
        )));
    }
    let perms: Vec<Vec<usize>> = (0..big_n).permutations(big_n).collect();
    let index: HashMap<&[usize], usize> = perms
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_slice(), i))
        .collect();
    let per = perms.len();
    let coords = n_sigma + 1;
    let n_states = per.pow(coords as u32);

    let decode = |mut s: usize| -> Vec<usize> {
        let mut c = vec![0; coords];
        for slot in c.iter_mut() {
            *slot = s % per;
            s /= per;
        }
        c
    };
    let encode = |c: &[usize]| c.iter().rev().fold(0, |acc, &x| acc * per + x);

    let values: Vec<BigRational> = (0..n_states)
        .map(|s| {
            let c = decode(s);
            let sigmas: Vec<&[usize]> = c[1..].iter().map(|&i| perms[i].as_slice()).collect();
            h(&perms[c[0]], &sigmas)
        })
        .collect();

    let states = int(n_states as i64);
    let mean = values.iter().fold(BigRational::zero(), |a, v| a + v) / &states;
    let var = values
        .iter()
        .fold(BigRational::zero(), |a, v| a + (v - &mean) * (v - &mean))
        / &states;

    // Resampling one sigma coordinate: average over all replacements.
    let mut resample = BigRational::zero();
    for s in 0..n_states {
        let c = decode(s);
        for i in 1..coords {
            let mut acc = BigRational::zero();
            for r in 0..per {
                let mut d = c.clone();
                d[i] = r;
                let diff = &values[s] - &values[encode(&d)];
                acc += &diff * &diff;
            }
            resample += acc / int(per as i64);
        }
    }
    resample /= &states;

    // Transpositions tau_j, j = 0..N-2 in zero-based labels.
    let mut transpose = BigRational::zero();
    for s in 0..n_states {
        let c = decode(s);
        for j in 0..big_n - 1 {
            let mut acc = BigRational::zero();
            for t in j..big_n {
                let mut p = perms[c[0]].clone();
                p.swap(j, t);
                let mut d = c.clone();
                d[0] = index[p.as_slice()];
                let diff = &values[s] - &values[encode(&d)];
                acc += &diff * &diff;
            }
            transpose += acc / int((big_n - j) as i64);
        }
    }
    transpose /= &states;

    let bound = (resample + transpose) / int(2);
    Ok(EfronSteinReport {
        holds: var <= bound,
        var,
        bound,
    })
}

// ---------------------------------------------------------------------------
// The inductive recursion device

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecursionSpec {
    q: f64,
    c: f64,
}

impl RecursionSpec {
    pub fn new(q: f64, c: f64) -> Result<Self, SteinError> {
        if !(q > 0.0 && q < 1.0 && c > 0.0 && c.is_finite()) {
            return Err(SteinError::BadRecursion { q, c });
        }
        Ok(Self { q, c })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `c / (1 - q)`, the uniform bound on every solution.
    pub fn limit(&self) -> f64 {
        self.c / (1.0 - self.q)
    }
}

/// Solution of `a_n = q a_{n-1} + c`, `a_1 = 1`:
/// `a_n = q^{n-1} + c (1 - q^{n-1}) / (1 - q)`.
pub fn recursion_closed_form(spec: &RecursionSpec, n: u32) -> f64 {
    assert!(n >= 1, "recursion is indexed from 1");
    let qn = spec.q.powi(n as i32 - 1);
    qn + spec.c * (1.0 - qn) / (1.0 - spec.q)
}

/// One outcome of the kernel at a state: with probability `prob` the weight
/// `X` takes value `weight` and the parameter moves to `successor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelStep {
    pub prob: f64,
    pub weight: f64,
    pub successor: usize,
}

/// A finite parameter space with the weighted transition `(X, Psi)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteKernel {
    pub smiley: Vec<bool>,
    pub steps: Vec<Vec<KernelStep>>,
    pub rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionSolution {
    pub a: Vec<f64>,
    pub sup: f64,
    pub sup_ok: bool,
    /// `a <= r` on the nice set, the part of the growth condition that
    /// involves the solution itself.
    pub a_below_rate: bool,
    pub iterations: usize,
}

const KERNEL_TOL: f64 = 1e-12;

impl FiniteKernel {
    /// Linear chain `0 <- 1 <- ... <- len-1` with `X = 1` off the base state,
    /// rates `r(k) = scale (2q)^{-k}`.
    pub fn chain(len: usize, q: f64, scale: f64) -> Self {
        let smiley = (0..len).map(|k| k > 0).collect();
        let steps = (0..len)
            .map(|k| {
                if k == 0 {
                    vec![KernelStep {
                        prob: 1.0,
                        weight: 0.0,
                        successor: 0,
                    }]
                } else {
                    vec![KernelStep {
                        prob: 1.0,
                        weight: 1.0,
                        successor: k - 1,
                    }]
                }
            })
            .collect();
        let rate = (0..len)
            .map(|k| scale * (2.0 * q).powi(-(k as i32)))
            .collect();
        Self {
            smiley,
            steps,
            rate,
        }
    }

    fn validate(&self, spec: &RecursionSpec) -> Result<(), SteinError> {
        let n = self.smiley.len();
        if self.steps.len() != n || self.rate.len() != n {
            return Err(SteinError::KernelViolation {
                condition: "shape",
                state: 0,
                detail: "smiley, steps and rate lengths differ".into(),
            });
        }
        for (state, steps) in self.steps.iter().enumerate() {
            let total: f64 = steps.iter().map(|s| s.prob).sum();
            if (total - 1.0).abs() > KERNEL_TOL
                || steps
                    .iter()
                    .any(|s| s.prob < 0.0 || s.weight < 0.0 || s.successor >= n)
            {
                return Err(SteinError::KernelViolation {
                    condition: "law",
                    state,
                    detail: format!("probabilities sum to {total} or entry out of range"),
                });
            }
            let ex: f64 = steps.iter().map(|s| s.prob * s.weight).sum();
            if self.smiley[state] && (ex - 1.0).abs() > KERNEL_TOL {
                return Err(SteinError::KernelViolation {
                    condition: "(A1)",
                    state,
                    detail: format!("E X = {ex} on the nice set"),
                });
            }
            if !self.smiley[state] && ex.abs() > KERNEL_TOL {
                return Err(SteinError::KernelViolation {
                    condition: "(A2)",
                    state,
                    detail: format!("E X = {ex} off the nice set"),
                });
            }
            if self.smiley[state] {
                let cap = self.rate[state] / (2.0 * spec.q);
                let worst = steps
                    .iter()
                    .filter(|s| s.prob > 0.0 && s.weight > 0.0)
                    .map(|s| self.rate[s.successor])
                    .fold(f64::NEG_INFINITY, f64::max);
                if worst > cap * (1.0 + KERNEL_TOL) {
                    return Err(SteinError::KernelViolation {
                        condition: "(A4)",
                        state,
                        detail: format!("max successor rate {worst} exceeds r/(2q) = {cap}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Fixed point of `a(theta) = q E_theta[X a(Psi)] + c`, iterated down from
/// `c/(1-q) + 1`. Refuses kernels that break (A1), (A2) or the rate growth
/// part of (A4).
pub fn recursion_bound_solve(
    kernel: &FiniteKernel,
    spec: &RecursionSpec,
) -> Result<RecursionSolution, SteinError> {
    kernel.validate(spec)?;
    let mut a = vec![spec.limit() + 1.0; kernel.smiley.len()];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let next: Vec<f64> = kernel
            .steps
            .iter()
            .map(|steps| {
                spec.q
                    * steps
                        .iter()
                        .map(|s| s.prob * s.weight * a[s.successor])
                        .sum::<f64>()
                    + spec.c
            })
            .collect();
        let delta = next
            .iter()
            .zip(&a)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        a = next;
        if delta < 1e-13 || iterations >= 1_000_000 {
            break;
        }
    }
    let sup = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a_below_rate = a
        .iter()
        .zip(&kernel.rate)
        .zip(&kernel.smiley)
        .all(|((x, r), &s)| !s || *x <= *r);
    Ok(RecursionSolution {
        sup_ok: sup <= spec.limit() + 1e-9,
        sup,
        a,
        a_below_rate,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::ratio;

    fn law<T>(atoms: Vec<(T, BigRational)>) -> DiscreteLaw<T> {
        DiscreteLaw::new(atoms).unwrap()
    }

    #[test]
    fn polynomial_basics() {
        let p = Polynomial::from_ints(&[1, -2, 3]);
        assert_eq!(p.eval(&int(2)), int(9));
        assert_eq!(p.derivative(), Polynomial::from_ints(&[-2, 6]));
        assert_eq!(Polynomial::monomial(3).degree(), 3);
        assert_eq!(Polynomial::from_ints(&[0, 0]).degree(), 0);
    }

    #[test]
    fn discrete_law_rejects_bad_mass() {
        assert!(DiscreteLaw::new(vec![(1, ratio(1, 2))]).is_err());
        assert!(DiscreteLaw::new(vec![(1, ratio(3, 2)), (2, ratio(-1, 2))]).is_err());
    }

    #[test]
    fn trivial_pair_is_not_stein() {
        let l = law(vec![
            ((int(1), int(1)), ratio(1, 2)),
            ((int(-1), int(-1)), ratio(1, 2)),
        ]);
        let r = check_stein_pair(&l, &ratio(1, 2)).unwrap();
        assert!(r.exchangeable && !r.linear_regression && !r.is_stein_pair);
        let zero = law(vec![((int(0), int(0)), int(1))]);
        assert!(check_stein_pair(&zero, &int(1)).unwrap().is_stein_pair);
        assert!(check_stein_pair(&zero, &int(0)).is_err());
    }

    #[test]
    fn independent_two_state_pair() {
        let mut atoms = vec![];
        for w in [-1, 1] {
            for wp in [-1, 1] {
                atoms.push(((int(w), int(wp)), ratio(1, 4)));
            }
        }
        let r = check_stein_pair(&law(atoms), &int(1)).unwrap();
        assert!(r.is_stein_pair);
        assert_eq!(r.coupling_identity, [true; 3]);
    }

    #[test]
    fn lazy_walk_pair() {
        // Stay with prob 3/4, flip otherwise: E{W'|W} = W/2.
        let mut atoms = vec![];
        for w in [-1i64, 1] {
            atoms.push(((int(w), int(w)), ratio(3, 8)));
            atoms.push(((int(w), int(-w)), ratio(1, 8)));
        }
        let r = check_stein_pair(&law(atoms), &ratio(1, 2)).unwrap();
        assert!(r.is_stein_pair);
        assert_eq!(r.coupling_identity, [true; 3]);
    }

    #[test]
    fn two_point_zero_bias() {
        let z = zero_bias_two_point(1.0, -1.0).unwrap();
        assert_eq!(z.law, UniformLaw { lo: -1.0, hi: 1.0 });
        assert!(z.max_identity_error < 1e-15);
        let alpha: f64 = 3.0;
        let z = zero_bias_two_point(alpha.sqrt(), -1.0 / alpha.sqrt()).unwrap();
        assert!((z.variance - 1.0).abs() < 1e-15);
        assert!(z.max_identity_error < 1e-14);
        // f = x^2/2: E[W^3]/2 = E[W*]
        let (a, b) = (alpha.sqrt(), -1.0 / alpha.sqrt());
        let ew3 = (-b / (a - b)) * a.powi(3) + (a / (a - b)) * b.powi(3);
        assert!((ew3 / 2.0 - z.law.moment(1)).abs() < 1e-14);
        assert!(zero_bias_two_point(1.0, 0.5).is_err());
    }

    #[test]
    fn size_bias_bernoulli_and_hypergeometric() {
        let bern = law(vec![(int(0), ratio(2, 3)), (int(1), ratio(1, 3))]);
        let point = law(vec![(int(1), int(1))]);
        assert!(check_size_bias(&bern, &point).unwrap().holds);
        let wrong = law(vec![(int(0), ratio(1, 2)), (int(1), ratio(1, 2))]);
        assert!(!check_size_bias(&bern, &wrong).unwrap().holds);

        let p = crate::exactnum::HypergeometricParams::new(3, 1, 2).unwrap();
        let pmf = crate::exactnum::hyp_law(&p);
        let gamma = p.mean();
        let base = law(pmf
            .iter()
            .enumerate()
            .filter(|(_, q)| !q.is_zero())
            .map(|(k, q)| (int(k as i64), q.clone()))
            .collect());
        let tilted = law(pmf
            .iter()
            .enumerate()
            .filter(|(k, q)| *k > 0 && !q.is_zero())
            .map(|(k, q)| (int(k as i64), q * int(k as i64) / &gamma))
            .collect());
        assert!(check_size_bias(&base, &tilted).unwrap().holds);
        let zero = law(vec![(int(0), int(1))]);
        assert!(check_size_bias(&zero, &zero).is_err());
    }

    #[test]
    fn size_bias_truncated_poisson() {
        // Poisson(2) conditioned on {0..10}: weights 2^k/k!.
        let weights: Vec<BigRational> = (0..=10)
            .scan(int(1), |w, k| {
                let out = w.clone();
                *w = &*w * int(2) / int(k + 1);
                Some(out)
            })
            .collect();
        let total = weights.iter().fold(BigRational::zero(), |a, b| a + b);
        let base = law(weights
            .iter()
            .enumerate()
            .map(|(k, w)| (int(k as i64), w / &total))
            .collect());
        let mean = base.mean();
        let tilted = law(base
            .atoms()
            .iter()
            .filter(|(k, _)| k.is_positive())
            .map(|(k, p)| (k.clone(), k * p / &mean))
            .collect());
        assert!(check_size_bias(&base, &tilted).unwrap().holds);
    }

    fn quantile_grid(k: usize) -> Vec<f64> {
        (1..=k)
            .map(|i| normal::quantile((i as f64 - 0.5) / k as f64))
            .collect()
    }

    #[test]
    fn kolmogorov_quantile_grid() {
        for k in [100, 1000, 12345] {
            let est = empirical_kolmogorov(&quantile_grid(k), DEFAULT_CONFIDENCE).unwrap();
            assert!((est.delta_hat - 0.5 / k as f64).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn kolmogorov_degenerate_and_errors() {
        let zeros = vec![0.0; 500];
        let est = empirical_kolmogorov(&zeros, 0.05).unwrap();
        assert!((est.delta_hat - 0.5).abs() < 1e-15);
        assert!(matches!(
            empirical_kolmogorov(&zeros[..10], 0.05),
            Err(SteinError::TooFewSamples { .. })
        ));
        let mut bad = quantile_grid(200);
        bad.swap(3, 100);
        assert_eq!(empirical_kolmogorov(&bad, 0.05), Err(SteinError::Unsorted));
        assert!((dkw_band(100_000, 0.05) - 0.004_294_9).abs() < 1e-6);
    }

    #[test]
    fn kolmogorov_agrees_with_dense_scan() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let gauss = Normal::new(0.05, 1.1).unwrap();
        let mut xs: Vec<f64> = (0..2000).map(|_| gauss.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let est = empirical_kolmogorov(&xs, 0.05).unwrap();
        // Reference: scan a dense grid plus every sample and its predecessor.
        let mut grid: Vec<f64> = (0..1_000_000)
            .map(|i| -8.0 + 16.0 * i as f64 / 1e6)
            .collect();
        for &x in &xs {
            grid.push(x);
            grid.push(x.next_down());
        }
        let k = xs.len() as f64;
        let scan = grid
            .iter()
            .map(|&z| {
                let f = xs.partition_point(|&x| x <= z) as f64 / k;
                (f - normal::cdf(z)).abs()
            })
            .fold(0.0, f64::max);
        assert!((scan - est.delta_hat).abs() < 1e-9);
    }

    #[test]
    fn wasserstein_two_point() {
        // int |F - Phi| for the symmetric law on {-1, 1}, by brute quadrature.
        let atoms = [(-1.0, 0.5), (1.0, 0.5)];
        let exact = wasserstein_to_normal(&atoms);
        let h = 1e-4;
        let quad: f64 = (0..200_000)
            .map(|i| {
                let z = -10.0 + (i as f64 + 0.5) * h;
                let f = if z < -1.0 {
                    0.0
                } else if z < 1.0 {
                    0.5
                } else {
                    1.0
                };
                (f - normal::cdf(z)).abs() * h
            })
            .sum();
        assert!((exact - quad).abs() < 1e-7, "{exact} vs {quad}");
        // normal quantiles of a large grid approach zero distance
        let d = empirical_wasserstein(quantile_grid(10_000));
        assert!(d < 1e-3);
    }

    #[test]
    fn efron_stein_examples() {
        let r = check_efron_stein(|_, _| int(7), 3, 1).unwrap();
        assert!(r.var.is_zero() && r.bound.is_zero() && r.holds);
        let r = check_efron_stein(|p, _| if p[0] == 0 { int(1) } else { int(0) }, 3, 0).unwrap();
        assert_eq!(r.var, ratio(2, 9));
        assert!(r.holds);
        assert!(check_efron_stein(|_, _| int(0), 5, 0).is_err());
    }

    #[test]
    fn efron_stein_uses_sigma() {
        let h = |p: &[usize], s: &[&[usize]]| int((p[0] + 2 * s[0][1] + s[1][0]) as i64);
        let r = check_efron_stein(h, 3, 2).unwrap();
        assert!(r.holds, "{} > {}", r.var, r.bound);
    }

    #[test]
    fn recursion_closed_form_examples() {
        let spec = RecursionSpec::new(0.5, 1.0).unwrap();
        assert_eq!(recursion_closed_form(&spec, 1), 1.0);
        assert!((recursion_closed_form(&spec, 4) - 1.875).abs() < 1e-15);
        assert!((recursion_closed_form(&spec, 200) - spec.limit()).abs() < 1e-14);
        assert_eq!(spec.limit(), 2.0);
        assert!(RecursionSpec::new(1.0, 1.0).is_err());
        assert!(RecursionSpec::new(0.5, 0.0).is_err());
    }

    #[test]
    fn chain_kernel_matches_closed_form() {
        let spec = RecursionSpec::new(0.5, 1.0).unwrap();
        let kernel = FiniteKernel::chain(30, spec.q(), 1e3);
        let sol = recursion_bound_solve(&kernel, &spec).unwrap();
        for (k, a) in sol.a.iter().enumerate() {
            let want = recursion_closed_form(&spec, k as u32 + 1);
            assert!((a - want).abs() < 1e-12, "state {k}: {a} vs {want}");
        }
        assert!(sol.sup_ok);
    }

    #[test]
    fn branching_kernel_bounded() {
        let spec = RecursionSpec::new(0.4, 0.7).unwrap();
        let n = 40;
        let smiley: Vec<bool> = (0..n).map(|k| k >= 2).collect();
        let steps = (0..n)
            .map(|k| {
                if k < 2 {
                    vec![KernelStep {
                        prob: 1.0,
                        weight: 0.0,
                        successor: k,
                    }]
                } else {
                    vec![
                        KernelStep {
                            prob: 0.5,
                            weight: 0.5,
                            successor: k - 1,
                        },
                        KernelStep {
                            prob: 0.5,
                            weight: 1.5,
                            successor: k - 2,
                        },
                    ]
                }
            })
            .collect();
        let rate = (0..n).map(|k| (1.2f64).powi(k as i32)).collect();
        let sol = recursion_bound_solve(
            &FiniteKernel {
                smiley,
                steps,
                rate,
            },
            &spec,
        )
        .unwrap();
        assert!(sol.sup_ok, "sup {} vs {}", sol.sup, spec.limit());
    }

    #[test]
    fn kernel_refusals() {
        let spec = RecursionSpec::new(0.5, 1.0).unwrap();
        // rates growing too slowly along the chain: r(k-1) > r(k)/(2q)
        let mut kernel = FiniteKernel::chain(10, 0.5, 1.0);
        kernel.rate = (0..10).map(|k| 10.0 - k as f64).collect();
        let err = recursion_bound_solve(&kernel, &spec).unwrap_err();
        assert!(
            matches!(
                err,
                SteinError::KernelViolation {
                    condition: "(A4)",
                    ..
                }
            ),
            "{err}"
        );

        let mut kernel = FiniteKernel::chain(10, 0.5, 1.0);
        kernel.steps[3][0].weight = 0.9;
        assert!(matches!(
            recursion_bound_solve(&kernel, &spec),
            Err(SteinError::KernelViolation {
                condition: "(A1)",
                ..
            })
        ));
        let mut kernel = FiniteKernel::chain(10, 0.5, 1.0);
        kernel.steps[0][0].weight = 1.0;
        assert!(matches!(
            recursion_bound_solve(&kernel, &spec),
            Err(SteinError::KernelViolation {
                condition: "(A2)",
                ..
            })
        ));
    }
}
