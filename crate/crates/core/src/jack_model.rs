//! Jack measure on partitions, Kerov's growth process, and the alpha-content.
//!
//! Boxes are `(row, col)` from `(0, 0)` at the top left. The content of
//! `(r, c)` is `alpha c - r`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exactnum::{from_f64, int, to_f64};
use crate::rng::{par_samples, SeedStream};
use crate::stein_core::{self, KolmogorovEstimate, Polynomial, SteinError};

/// Largest `n` for which all partitions are listed.
pub const MAX_ENUMERATION_N: u32 = 60;
/// Largest `n` for full-measure moment checks.
pub const MAX_MOMENT_N: u32 = 12;
/// Largest `n` for the exact zero-bias identity check.
pub const MAX_ZERO_BIAS_N: u32 = 8;
/// Tolerance for the zero-bias identity on the standardized scale.
pub const ZERO_BIAS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JackError {
    #[error("invalid partition: {0}")]
    BadPartition(String),
    #[error("invalid alpha: {0}")]
    BadAlpha(String),
    #[error("box ({row}, {col}) is outside the diagram")]
    OutsideDiagram { row: usize, col: usize },
    #[error("n = {n} outside the supported range {lo}..={hi}")]
    SizeOutOfRange { n: u32, lo: u32, hi: u32 },
    #[error("partition has size {got}, expected {want}")]
    WrongSize { got: u32, want: u32 },
    #[error("epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error(transparent)]
    Stein(#[from] SteinError),
}

/// A partition as its non-increasing positive parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    pub fn new(parts: Vec<u32>) -> Result<Self, JackError> {
        if parts.is_empty() {
            return Err(JackError::BadPartition("no parts".into()));
        }
        if parts.contains(&0) {
            return Err(JackError::BadPartition("parts must be positive".into()));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(JackError::BadPartition(
                "parts must be non-increasing".into(),
            ));
        }
        if parts
            .iter()
            .try_fold(0u32, |a, &p| a.checked_add(p))
            .is_none()
        {
            return Err(JackError::BadPartition("size overflows".into()));
        }
        Ok(Self { parts })
    }

    /// The one-row partition `(n)`.
    pub fn row(n: u32) -> Self {
        Self { parts: vec![n] }
    }

    /// The one-column partition `(1, ..., 1)`.
    pub fn column(n: u32) -> Self {
        Self {
            parts: vec![1; n as usize],
        }
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn size(&self) -> u32 {
        self.parts.iter().sum()
    }

    /// `lambda_1`.
    pub fn first_row(&self) -> u32 {
        self.parts[0]
    }

    /// `lambda'_1`, the number of parts.
    pub fn first_column(&self) -> u32 {
        self.parts.len() as u32
    }

    pub fn conjugate(&self) -> Self {
        Self {
            parts: conjugate_parts(&self.parts),
        }
    }

    pub fn contains(&self, (row, col): (usize, usize)) -> bool {
        self.parts.get(row).is_some_and(|&p| (col as u32) < p)
    }

    pub fn boxes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parts
            .iter()
            .enumerate()
            .flat_map(|(r, &p)| (0..p as usize).map(move |c| (r, c)))
    }

    /// Positions where a box can be added, top row first, ending with the
    /// new row.
    pub fn addable_corners(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (r, &p) in self.parts.iter().enumerate() {
            if r == 0 || self.parts[r - 1] > p {
                out.push((r, p as usize));
            }
        }
        out.push((self.parts.len(), 0));
        out
    }

    /// Adds a box at the end of `row`; the caller ensures it is addable.
    pub fn with_box(&self, row: usize) -> Self {
        let mut parts = self.parts.clone();
        if row == parts.len() {
            parts.push(1);
        } else {
            parts[row] += 1;
        }
        debug_assert!(parts.windows(2).all(|w| w[0] >= w[1]));
        Self { parts }
    }

    /// Sum of contents, as `alpha * col_sum - row_sum`.
    pub fn content_sum(&self) -> Content {
        self.boxes()
            .fold(Content::default(), |acc, b| acc + Content::of(b))
    }
}

fn conjugate_parts(parts: &[u32]) -> Vec<u32> {
    let width = parts.first().copied().unwrap_or(0);
    (0..width)
        .map(|c| parts.iter().take_while(|&&p| p > c).count() as u32)
        .collect()
}

impl FromStr for Partition {
    type Err = JackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|e| JackError::BadPartition(format!("{t:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(parts)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let joined: Vec<String> = self.parts.iter().map(u32::to_string).collect();
        f.write_str(&joined.join(","))
    }
}

/// An alpha-content `alpha * col - row`, kept symbolic in alpha.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Content {
    pub col: i64,
    pub row: i64,
}

impl Content {
    pub fn of((row, col): (usize, usize)) -> Self {
        Self {
            col: col as i64,
            row: row as i64,
        }
    }

    pub fn value(&self, alpha: &BigRational) -> BigRational {
        alpha * int(self.col) - int(self.row)
    }

    pub fn value_f64(&self, alpha: f64) -> f64 {
        alpha * self.col as f64 - self.row as f64
    }
}

impl std::ops::Add for Content {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            col: self.col + rhs.col,
            row: self.row + rhs.row,
        }
    }
}

/// Parses a positive rational: `"3/2"`, `"2"`, `"0.25"` or `"1e4"`, exactly.
pub fn parse_alpha(s: &str) -> Result<BigRational, JackError> {
    let bad = || JackError::BadAlpha(s.to_string());
    let t = s.trim();
    let value = if let Some((num, den)) = t.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        BigRational::new(num, den)
    } else {
        parse_decimal(t).ok_or_else(bad)?
    };
    if !value.is_positive() {
        return Err(bad());
    }
    Ok(value)
}

fn parse_decimal(t: &str) -> Option<BigRational> {
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (whole, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits_ok = |d: &str| d.bytes().all(|b| b.is_ascii_digit());
    let sign_free = whole.strip_prefix('+').unwrap_or(whole);
    if sign_free.is_empty() && frac.is_empty() || !digits_ok(sign_free) || !digits_ok(frac) {
        return None;
    }
    if exp.unsigned_abs() > 4096 {
        return None;
    }
    let digits: BigInt = format!("0{sign_free}{frac}").parse().ok()?;
    let shift = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let scale = num_traits::pow(ten, shift.unsigned_abs() as usize);
    Some(if shift >= 0 {
        BigRational::from_integer(digits * scale)
    } else {
        BigRational::new(digits, scale)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JackParams {
    n: u32,
    #[serde(serialize_with = "serialize_ratio")]
    alpha: BigRational,
    alpha_f64: f64,
}

fn serialize_ratio<S: serde::Serializer>(x: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

impl JackParams {
    pub fn new(n: u32, alpha: BigRational) -> Result<Self, JackError> {
        if n == 0 {
            return Err(JackError::SizeOutOfRange {
                n,
                lo: 1,
                hi: u32::MAX,
            });
        }
        if !alpha.is_positive() {
            return Err(JackError::BadAlpha(alpha.to_string()));
        }
        Ok(Self {
            n,
            alpha_f64: to_f64(&alpha),
            alpha,
        })
    }

    /// Uses the exact value of the float `alpha`.
    pub fn from_f64(n: u32, alpha: f64) -> Result<Self, JackError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(JackError::BadAlpha(alpha.to_string()));
        }
        Self::new(n, from_f64(alpha))
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn alpha(&self) -> &BigRational {
        &self.alpha
    }

    pub fn alpha_f64(&self) -> f64 {
        self.alpha_f64
    }

    /// `alpha C(n, 2)`, the variance of the content sum.
    pub fn variance(&self) -> BigRational {
        &self.alpha * int(i64::from(self.n) * (i64::from(self.n) - 1) / 2)
    }

    pub fn sigma(&self) -> f64 {
        let n = f64::from(self.n);
        (self.alpha_f64 * n * (n - 1.0) / 2.0).sqrt()
    }
}

/// `(arm, leg)` of a box.
pub fn arm_leg(p: &Partition, (row, col): (usize, usize)) -> Result<(u32, u32), JackError> {
    if !p.contains((row, col)) {
        return Err(JackError::OutsideDiagram { row, col });
    }
    let arm = p.parts[row] - col as u32 - 1;
    let leg = p.parts[row + 1..]
        .iter()
        .take_while(|&&q| q as usize > col)
        .count() as u32;
    Ok((arm, leg))
}

/// `prod (alpha a + l + shift)` over all boxes.
fn hook_product(p: &Partition, alpha: &BigRational, shift: &BigRational) -> BigRational {
    let conj = conjugate_parts(&p.parts);
    p.boxes().fold(BigRational::one(), |acc, (r, c)| {
        let a = p.parts[r] as usize - c - 1;
        let l = conj[c] as usize - r - 1;
        acc * (alpha * int(a as i64) + int(l as i64) + shift)
    })
}

/// `alpha^n n! / prod (alpha a + l + 1)(alpha a + l + alpha)`.
pub fn jack_probability(p: &Partition, alpha: &BigRational) -> BigRational {
    let n = p.size();
    let mut num = BigRational::one();
    for k in 1..=n {
        num = num * alpha * int(i64::from(k));
    }
    num / (hook_product(p, alpha, &BigRational::one()) * hook_product(p, alpha, alpha))
}

/// All partitions of `n`, in increasing lexicographic order of parts.
pub fn enumerate_partitions(n: u32) -> Result<Vec<Partition>, JackError> {
    if n == 0 || n > MAX_ENUMERATION_N {
        return Err(JackError::SizeOutOfRange {
            n,
            lo: 1,
            hi: MAX_ENUMERATION_N,
        });
    }
    fn fill(rest: u32, cap: u32, cur: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if rest == 0 {
            out.push(Partition { parts: cur.clone() });
            return;
        }
        for p in 1..=cap.min(rest) {
            cur.push(p);
            fill(rest - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    fill(n, n, &mut Vec::new(), &mut out);
    Ok(out)
}

/// `Y / sqrt(alpha C(n,2))`.
pub fn standardized_content(p: &Partition, alpha: f64) -> f64 {
    let n = f64::from(p.size());
    p.content_sum().value_f64(alpha) / (alpha * n * (n - 1.0) / 2.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corner {
    pub position: (usize, usize),
    pub content: Content,
    pub prob: BigRational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CornerDistribution {
    pub corners: Vec<Corner>,
}

impl CornerDistribution {
    pub fn total(&self) -> BigRational {
        self.corners
            .iter()
            .fold(BigRational::zero(), |a, c| a + &c.prob)
    }
}

/// Kerov transition probabilities from `p`, in the form
/// `c_{old}/c_{new} * psi'`, with `psi'` a product over the boxes in the new
/// box's column but not in its row.
pub fn kerov_transition_probs(p: &Partition, alpha: &BigRational) -> CornerDistribution {
    let one = BigRational::one();
    let c_old = hook_product(p, alpha, &one);
    let corners = p
        .addable_corners()
        .into_iter()
        .map(|(row, col)| {
            let next = p.with_box(row);
            let mut prob = &c_old / hook_product(&next, alpha, &one);
            let new_conj = conjugate_parts(&next.parts);
            let old_conj = conjugate_parts(&p.parts);
            for r in 0..row {
                let hook = |parts: &[u32], conj: &[u32], shift: &BigRational| {
                    let a = parts[r] as usize - col - 1;
                    let l = conj[col] as usize - r - 1;
                    alpha * int(a as i64) + int(l as i64) + shift
                };
                prob = prob * hook(&next.parts, &new_conj, &one)
                    / hook(&next.parts, &new_conj, alpha)
                    * hook(&p.parts, &old_conj, alpha)
                    / hook(&p.parts, &old_conj, &one);
            }
            Corner {
                position: (row, col),
                content: Content::of((row, col)),
                prob,
            }
        })
        .collect();
    CornerDistribution { corners }
}

/// The same probabilities from the boxes of `p` in the new box's row and
/// column only.
pub fn kerov_transition_probs_local(p: &Partition, alpha: &BigRational) -> CornerDistribution {
    let conj = conjugate_parts(&p.parts);
    let one = BigRational::one();
    let corners = p
        .addable_corners()
        .into_iter()
        .map(|(row, col)| {
            let mut prob = BigRational::one();
            for (c, &height) in conj.iter().enumerate().take(col) {
                let h = alpha * int(i64::from(p.parts[row]) - c as i64 - 1)
                    + int(i64::from(height) - row as i64 - 1);
                prob = prob * (&h + &one) / (&h + &one + alpha);
            }
            for r in 0..row {
                let h = alpha * int(i64::from(p.parts[r]) - col as i64 - 1)
                    + int(row as i64 - r as i64 - 1);
                prob = prob * (&h + alpha) / (&h + alpha + &one);
            }
            Corner {
                position: (row, col),
                content: Content::of((row, col)),
                prob,
            }
        })
        .collect();
    CornerDistribution { corners }
}

/// Law of Kerov's process at time `n`, composed step by step from `(1)`.
pub fn kerov_law(
    n: u32,
    alpha: &BigRational,
) -> Result<BTreeMap<Partition, BigRational>, JackError> {
    if n == 0 || n > MAX_ENUMERATION_N {
        return Err(JackError::SizeOutOfRange {
            n,
            lo: 1,
            hi: MAX_ENUMERATION_N,
        });
    }
    let mut law = BTreeMap::from([(Partition::row(1), BigRational::one())]);
    for _ in 1..n {
        let mut next: BTreeMap<Partition, BigRational> = BTreeMap::new();
        for (p, q) in &law {
            for c in kerov_transition_probs(p, alpha).corners {
                *next
                    .entry(p.with_box(c.position.0))
                    .or_insert_with(BigRational::zero) += q * &c.prob;
            }
        }
        law = next;
    }
    Ok(law)
}

/// Growth of a partition with float weights, tracking rows and columns.
#[derive(Debug, Clone)]
struct Diagram {
    parts: Vec<u32>,
    conj: Vec<u32>,
}

impl Diagram {
    fn unit() -> Self {
        Self {
            parts: vec![1],
            conj: vec![1],
        }
    }

    fn corners(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let rows = self.parts.len();
        (0..=rows).filter_map(move |r| {
            if r == rows {
                Some((r, 0))
            } else if r == 0 || self.parts[r - 1] > self.parts[r] {
                Some((r, self.parts[r] as usize))
            } else {
                None
            }
        })
    }

    fn corner_prob(&self, (row, col): (usize, usize), alpha: f64) -> f64 {
        let mut prob = 1.0;
        for c in 0..col {
            let h = alpha * (self.parts[row] as f64 - c as f64 - 1.0)
                + (self.conj[c] as f64 - row as f64 - 1.0);
            prob *= (h + 1.0) / (h + 1.0 + alpha);
        }
        for r in 0..row {
            let h =
                alpha * (self.parts[r] as f64 - col as f64 - 1.0) + (row as f64 - r as f64 - 1.0);
            prob *= (h + alpha) / (h + alpha + 1.0);
        }
        prob
    }

    fn weighted_corners(&self, alpha: f64) -> Vec<((usize, usize), f64)> {
        self.corners()
            .map(|b| (b, self.corner_prob(b, alpha)))
            .collect()
    }

    fn add(&mut self, (row, col): (usize, usize)) {
        if row == self.parts.len() {
            self.parts.push(1);
        } else {
            self.parts[row] += 1;
        }
        if col == self.conj.len() {
            self.conj.push(1);
        } else {
            self.conj[col] += 1;
        }
    }

    fn step<R: Rng + ?Sized>(&mut self, alpha: f64, rng: &mut R) -> (usize, usize) {
        let choice = pick(&self.weighted_corners(alpha), rng);
        self.add(choice);
        choice
    }
}

fn pick<T: Copy, R: Rng + ?Sized>(weighted: &[(T, f64)], rng: &mut R) -> T {
    let total: f64 = weighted.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for &(item, w) in weighted {
        if u < w {
            return item;
        }
        u -= w;
    }
    weighted
        .iter()
        .rev()
        .find(|(_, w)| *w > 0.0)
        .expect("positive weight")
        .0
}

#[derive(Debug, Clone, PartialEq)]
pub struct KerovPath {
    pub partition: Partition,
    /// Boxes in the order they were added, starting with `(0, 0)`.
    pub added: Vec<(usize, usize)>,
}

impl KerovPath {
    pub fn contents(&self) -> impl Iterator<Item = Content> + '_ {
        self.added.iter().map(|&b| Content::of(b))
    }
}

pub fn kerov_sample<R: Rng + ?Sized>(
    n: u32,
    alpha: f64,
    rng: &mut R,
) -> Result<KerovPath, JackError> {
    if n == 0 {
        return Err(JackError::SizeOutOfRange {
            n,
            lo: 1,
            hi: u32::MAX,
        });
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(JackError::BadAlpha(alpha.to_string()));
    }
    let mut d = Diagram::unit();
    let mut added = vec![(0, 0)];
    for _ in 1..n {
        added.push(d.step(alpha, rng));
    }
    Ok(KerovPath {
        partition: Partition { parts: d.parts },
        added,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TMoments {
    /// `E{c | Lambda}` on the content scale; zero exactly when `E{T | Lambda}` is.
    pub content_mean: BigRational,
    /// `E{T^2 | Lambda}`.
    pub second: BigRational,
}

/// Conditional moments of the next standardized content given a partition
/// of `n - 1`.
pub fn conditional_t_moments(
    p: &Partition,
    alpha: &BigRational,
    n: u32,
) -> Result<TMoments, JackError> {
    if p.size() + 1 != n {
        return Err(JackError::WrongSize {
            got: p.size(),
            want: n - 1,
        });
    }
    let params = JackParams::new(n, alpha.clone())?;
    let dist = kerov_transition_probs(p, alpha);
    let (m1, m2) =
        dist.corners
            .iter()
            .fold((BigRational::zero(), BigRational::zero()), |(a, b), c| {
                let v = c.content.value(alpha);
                (a + &c.prob * &v, b + &c.prob * &v * &v)
            });
    Ok(TMoments {
        content_mean: m1,
        second: m2 / params.variance(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroBiasPair {
    pub corners: CornerDistribution,
    /// `weights[i][j]` is the probability of `(T^dagger, T^ddagger)` sitting
    /// at corners `(i, j)`.
    pub weights: Vec<Vec<BigRational>>,
    /// `sum p_i p_j (t_i - t_j)^2`, which equals `4/n`.
    pub normalizer: BigRational,
}

pub fn zero_bias_pair_distribution(
    p: &Partition,
    alpha: &BigRational,
) -> Result<ZeroBiasPair, JackError> {
    let n = p.size() + 1;
    let params = JackParams::new(n, alpha.clone())?;
    let corners = kerov_transition_probs(p, alpha);
    let values: Vec<BigRational> = corners
        .corners
        .iter()
        .map(|c| c.content.value(alpha))
        .collect();
    let raw: Vec<Vec<BigRational>> = corners
        .corners
        .iter()
        .zip(&values)
        .map(|(ci, vi)| {
            corners
                .corners
                .iter()
                .zip(&values)
                .map(|(cj, vj)| &ci.prob * &cj.prob * (vi - vj) * (vi - vj))
                .collect()
        })
        .collect();
    let content_norm = raw.iter().flatten().fold(BigRational::zero(), |a, w| a + w);
    let weights = raw
        .into_iter()
        .map(|row| row.into_iter().map(|w| w / &content_norm).collect())
        .collect();
    Ok(ZeroBiasPair {
        corners,
        weights,
        normalizer: content_norm / params.variance(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JackCouplingSample {
    /// `V / sigma + T`, the standardized content at time `n`.
    pub w: f64,
    pub w_star: f64,
    pub v: Content,
    pub t: f64,
    pub t_star: f64,
    /// First row and column of the partition at time `n - 1`.
    pub lambda1: u32,
    pub lambda1_prime: u32,
}

impl JackCouplingSample {
    pub fn d(&self) -> f64 {
        self.t_star - self.t
    }
}

/// Runs Kerov to time `n - 1`, then draws the step to time `n` and,
/// independently given the same state, the zero-bias pair and `U`.
pub fn zero_bias_sample<R: Rng + ?Sized>(
    n: u32,
    alpha: f64,
    rng: &mut R,
) -> Result<JackCouplingSample, JackError> {
    if n < 2 {
        return Err(JackError::SizeOutOfRange {
            n,
            lo: 2,
            hi: u32::MAX,
        });
    }
    let path = kerov_sample(n - 1, alpha, rng)?;
    let mut d = Diagram {
        conj: conjugate_parts(path.partition.parts()),
        parts: path.partition.parts.clone(),
    };
    let v = path.partition.content_sum();
    let sigma = (alpha * f64::from(n) * f64::from(n - 1) / 2.0).sqrt();
    let weighted = d.weighted_corners(alpha);
    let mut pairs = Vec::with_capacity(weighted.len() * weighted.len());
    for &(bi, pi) in &weighted {
        for &(bj, pj) in &weighted {
            let gap = Content::of(bi).value_f64(alpha) - Content::of(bj).value_f64(alpha);
            pairs.push(((bi, bj), pi * pj * gap * gap));
        }
    }
    let (dagger, ddagger) = pick(&pairs, rng);
    let u: f64 = rng.random();
    let t_star = (u * Content::of(dagger).value_f64(alpha)
        + (1.0 - u) * Content::of(ddagger).value_f64(alpha))
        / sigma;
    let step = d.step(alpha, rng);
    let t = Content::of(step).value_f64(alpha) / sigma;
    let v_scaled = v.value_f64(alpha) / sigma;
    Ok(JackCouplingSample {
        w: v_scaled + t,
        w_star: v_scaled + t_star,
        v,
        t,
        t_star,
        lambda1: path.partition.first_row(),
        lambda1_prime: path.partition.first_column(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroBiasReport {
    /// `E[W f(W)]`.
    pub lhs: f64,
    /// `E[f'(W*)]`.
    pub rhs: f64,
    pub max_abs_err: f64,
    /// Exact equality monomial by monomial on the content scale.
    pub exact: bool,
}

fn check_n(n: u32, lo: u32, hi: u32) -> Result<(), JackError> {
    if n < lo || n > hi {
        return Err(JackError::SizeOutOfRange { n, lo, hi });
    }
    Ok(())
}

fn pow(x: &BigRational, k: usize) -> BigRational {
    (0..k).fold(BigRational::one(), |acc, _| acc * x)
}

/// Checks `E[W f(W)] = E[f'(W*)]` for a polynomial `f` of degree at most 5.
///
/// For `f = x^k` both sides reduce to `E[Y^{k+1}]` and
/// `k s^2 E[(V + c*)^{k-1}]` on the content scale, `s^2 = alpha C(n,2)`,
/// where `c*` mixes the pair with a uniform weight; the `U`-integral is
/// `((V+c1)^k - (V+c2)^k) / (k (c1 - c2))`.
pub fn check_zero_bias_identity(
    n: u32,
    alpha: &BigRational,
    f: &Polynomial,
) -> Result<ZeroBiasReport, JackError> {
    check_n(n, 2, MAX_ZERO_BIAS_N)?;
    if f.degree() > 5 {
        return Err(JackError::SizeOutOfRange {
            n: f.degree() as u32,
            lo: 0,
            hi: 5,
        });
    }
    let params = JackParams::new(n, alpha.clone())?;
    let s2 = params.variance();
    let sigma = params.sigma();

    let top = enumerate_partitions(n)?;
    let y_law: Vec<(BigRational, BigRational)> = top
        .iter()
        .map(|p| (p.content_sum().value(alpha), jack_probability(p, alpha)))
        .collect();
    let before = kerov_law(n - 1, alpha)?;
    // For each state at n-1: its probability, V, and the pair table.
    type Cells = Vec<(BigRational, BigRational, BigRational)>;
    let tables: Vec<(BigRational, BigRational, Cells)> = before
        .iter()
        .map(|(p, q)| {
            let pair = zero_bias_pair_distribution(p, alpha).expect("valid partition");
            let values: Vec<BigRational> = pair
                .corners
                .corners
                .iter()
                .map(|c| c.content.value(alpha))
                .collect();
            let mut cells = Vec::new();
            for (i, row) in pair.weights.iter().enumerate() {
                for (j, w) in row.iter().enumerate() {
                    if !w.is_zero() {
                        cells.push((w.clone(), values[i].clone(), values[j].clone()));
                    }
                }
            }
            (q.clone(), p.content_sum().value(alpha), cells)
        })
        .collect();

    let coeffs = f.coeffs();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut max_abs_err = 0.0f64;
    let mut exact = true;
    for (k, coeff) in coeffs.iter().enumerate() {
        let a = to_f64(coeff);
        let moment = y_law
            .iter()
            .fold(BigRational::zero(), |acc, (y, q)| acc + q * pow(y, k + 1));
        let zb = if k == 0 {
            BigRational::zero()
        } else {
            let kk = int(k as i64);
            let inner = tables
                .iter()
                .fold(BigRational::zero(), |acc, (q, v, cells)| {
                    let e = cells.iter().fold(BigRational::zero(), |acc, (w, c1, c2)| {
                        acc + w * (pow(&(v + c1), k) - pow(&(v + c2), k)) / (&kk * (c1 - c2))
                    });
                    acc + q * e
                });
            kk * &s2 * inner
        };
        exact &= moment == zb;
        let scale = sigma.powi(k as i32 + 1);
        let (l, r) = (to_f64(&moment) / scale, to_f64(&zb) / scale);
        max_abs_err = max_abs_err.max((l - r).abs());
        lhs += a * l;
        rhs += a * r;
    }
    Ok(ZeroBiasReport {
        lhs,
        rhs,
        max_abs_err,
        exact,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JackMomentsReport {
    pub ey: BigRational,
    pub ey2: BigRational,
    pub holds: bool,
}

/// Exact `E Y` and `E Y^2` by enumeration; they should be `0` and `alpha C(n,2)`.
pub fn check_jack_moments(n: u32, alpha: &BigRational) -> Result<JackMomentsReport, JackError> {
    check_n(n, 1, MAX_MOMENT_N)?;
    let params = JackParams::new(n, alpha.clone())?;
    let (ey, ey2) = enumerate_partitions(n)?.iter().fold(
        (BigRational::zero(), BigRational::zero()),
        |(a, b), p| {
            let q = jack_probability(p, alpha);
            let y = p.content_sum().value(alpha);
            (a + &q * &y, b + &q * &y * &y)
        },
    );
    Ok(JackMomentsReport {
        holds: ey.is_zero() && ey2 == params.variance(),
        ey,
        ey2,
    })
}

/// Exact law of `W` as sorted `(value, mass)` float atoms.
pub fn exact_w_law(params: &JackParams) -> Result<Vec<(f64, f64)>, JackError> {
    check_n(params.n, 2, MAX_MOMENT_N)?;
    let mut atoms: BTreeMap<(i64, i64), BigRational> = BTreeMap::new();
    for p in enumerate_partitions(params.n)? {
        let c = p.content_sum();
        *atoms
            .entry((c.col, c.row))
            .or_insert_with(BigRational::zero) += jack_probability(&p, &params.alpha);
    }
    let sigma = params.sigma();
    let mut out: Vec<(f64, f64)> = atoms
        .into_iter()
        .map(|((col, row), q)| {
            (
                Content { col, row }.value_f64(params.alpha_f64) / sigma,
                to_f64(&q),
            )
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

pub fn exact_kolmogorov(params: &JackParams) -> Result<f64, JackError> {
    Ok(stein_core::kolmogorov_to_normal(&exact_w_law(params)?))
}

pub fn exact_wasserstein(params: &JackParams) -> Result<f64, JackError> {
    Ok(stein_core::wasserstein_to_normal(&exact_w_law(params)?))
}

/// `P[lambda'_1 = n] = prod_{l < n} alpha/(alpha + l)`.
pub fn single_column_prob(n: u32, alpha: &BigRational) -> BigRational {
    (0..n).fold(BigRational::one(), |acc, l| {
        acc * alpha / (alpha + int(i64::from(l)))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleColumnReport {
    pub prob: BigRational,
    pub prob_f64: f64,
    /// `exp(-n^2 / alpha)`.
    pub lower: f64,
    pub holds: bool,
}

pub fn check_single_column(n: u32, alpha: &BigRational) -> SingleColumnReport {
    let prob = single_column_prob(n, alpha);
    let prob_f64 = to_f64(&prob);
    let nf = f64::from(n);
    let lower = (-nf * nf / to_f64(alpha)).exp();
    SingleColumnReport {
        holds: prob >= from_f64(lower),
        prob,
        prob_f64,
        lower,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JackRegion {
    /// `n / sqrt(alpha)`.
    pub r: f64,
    /// `(1/sqrt(n) + sqrt(alpha)/n)^{-1}`.
    pub r_alt: f64,
    pub in_smiley: bool,
}

/// Rate and membership of `n^{1+eps} < alpha < n^2 / 2^{1-eps}`.
pub fn rate_and_region(n: u32, alpha: f64, epsilon: f64) -> Result<JackRegion, JackError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(JackError::BadEpsilon(epsilon));
    }
    let nf = f64::from(n);
    Ok(JackRegion {
        r: nf / alpha.sqrt(),
        r_alt: 1.0 / (1.0 / nf.sqrt() + alpha.sqrt() / nf),
        in_smiley: nf.powf(1.0 + epsilon) < alpha && alpha < nf * nf / 2f64.powf(1.0 - epsilon),
    })
}

/// `sqrt(2/n) (2 + sqrt(2 + max(alpha, 1/alpha)/(n-1)))`.
pub fn wasserstein_bound(n: u32, alpha: f64) -> f64 {
    let nf = f64::from(n);
    (2.0 / nf).sqrt() * (2.0 + (2.0 + alpha.max(1.0 / alpha) / (nf - 1.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WassersteinReport {
    pub d1_hat: f64,
    /// Three times the mean-error bound `int sqrt(F(1-F)/k)` of the
    /// empirical distance, evaluated on the sample.
    pub mc_budget: f64,
    pub bound: f64,
    pub holds_within_mc: bool,
}

/// `int sqrt(F(1-F)/k)` for the empirical CDF of sorted samples.
pub fn empirical_d1_error(sorted: &[f64]) -> f64 {
    let k = sorted.len() as f64;
    sorted
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let f = (i + 1) as f64 / k;
            (f * (1.0 - f) / k).sqrt() * (w[1] - w[0])
        })
        .sum()
}

pub fn check_wasserstein_bound(
    n: u32,
    alpha: f64,
    seed: SeedStream,
    samples: usize,
) -> Result<WassersteinReport, JackError> {
    check_n(n, 2, u32::MAX)?;
    let mut w = sample_w(n, alpha, seed, samples)?;
    w.sort_by(f64::total_cmp);
    let mc_budget = 3.0 * empirical_d1_error(&w);
    let d1_hat = stein_core::empirical_wasserstein(w);
    let bound = wasserstein_bound(n, alpha);
    Ok(WassersteinReport {
        d1_hat,
        mc_budget,
        bound,
        holds_within_mc: d1_hat <= bound + mc_budget,
    })
}

/// `samples` independent draws of `W` at time `n`.
pub fn sample_w(
    n: u32,
    alpha: f64,
    seed: SeedStream,
    samples: usize,
) -> Result<Vec<f64>, JackError> {
    check_n(n, 2, u32::MAX)?;
    kerov_sample(1, alpha, &mut seed.rng())?;
    Ok(par_samples(seed, samples, |rng: &mut ChaCha8Rng| {
        let path = kerov_sample(n, alpha, rng).expect("checked above");
        standardized_content(&path.partition, alpha)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JackKolmogorov {
    pub estimate: KolmogorovEstimate,
    /// `delta_hat * n / sqrt(alpha)`.
    pub ratio: f64,
    /// `delta_hat * r_alt`.
    pub ratio_alt: f64,
}

pub fn kolmogorov_estimate(
    n: u32,
    alpha: f64,
    seed: SeedStream,
    samples: usize,
    confidence: f64,
) -> Result<JackKolmogorov, JackError> {
    let estimate =
        stein_core::empirical_kolmogorov_unsorted(sample_w(n, alpha, seed, samples)?, confidence)?;
    let nf = f64::from(n);
    let r_alt = 1.0 / (1.0 / nf.sqrt() + alpha.sqrt() / nf);
    Ok(JackKolmogorov {
        ratio: estimate.delta_hat * nf / alpha.sqrt(),
        ratio_alt: estimate.delta_hat * r_alt,
        estimate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationReport {
    /// `10 sqrt(alpha) / (n eps)`.
    pub d_bar: f64,
    /// Frequency of `lambda_1 > 2/eps` at time `n - 1`.
    pub f_complement_freq: f64,
    /// `4 e alpha / n^2`.
    pub f_complement_bound: f64,
    pub max_abs_d: f64,
    /// `|D| <= d_bar` on every sample inside `F`.
    pub d_bounded_on_f: bool,
}

pub fn truncation_diagnostics(
    n: u32,
    alpha: f64,
    epsilon: f64,
    seed: SeedStream,
    samples: usize,
) -> Result<TruncationReport, JackError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(JackError::BadEpsilon(epsilon));
    }
    check_n(n, 2, u32::MAX)?;
    zero_bias_sample(n, alpha, &mut seed.rng())?;
    let nf = f64::from(n);
    let d_bar = 10.0 * alpha.sqrt() / (nf * epsilon);
    let draws = par_samples(seed, samples, |rng: &mut ChaCha8Rng| {
        let s = zero_bias_sample(n, alpha, rng).expect("checked above");
        (f64::from(s.lambda1) <= 2.0 / epsilon, s.d().abs())
    });
    let outside = draws.iter().filter(|(inside, _)| !inside).count();
    Ok(TruncationReport {
        d_bar,
        f_complement_freq: outside as f64 / draws.len().max(1) as f64,
        f_complement_bound: 4.0 * std::f64::consts::E * alpha / (nf * nf),
        max_abs_d: draws.iter().map(|d| d.1).fold(0.0, f64::max),
        d_bounded_on_f: draws.iter().all(|&(inside, d)| !inside || d <= d_bar),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::ratio;
    use rand::SeedableRng;

    fn part(s: &str) -> Partition {
        s.parse().unwrap()
    }

    #[test]
    fn partition_parsing() {
        assert_eq!(part("4,2,1").parts(), &[4, 2, 1]);
        assert_eq!(part(" 3 , 3 ").to_string(), "3,3");
        for bad in ["", "1,2", "0", "2,,1", "a", "3,-1", "4294967295,1"] {
            assert!(bad.parse::<Partition>().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn alpha_parsing() {
        assert_eq!(parse_alpha("3/2").unwrap(), ratio(3, 2));
        assert_eq!(parse_alpha("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse_alpha("1e4").unwrap(), int(10_000));
        assert_eq!(parse_alpha("2.5e-1").unwrap(), ratio(1, 4));
        assert_eq!(parse_alpha("7").unwrap(), int(7));
        for bad in ["0", "-1", "1/0", "x", "", ".", "1e", "0/3", "1e99999"] {
            assert!(parse_alpha(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn arm_leg_examples() {
        let p = part("4,2,1");
        assert_eq!(arm_leg(&p, (0, 0)).unwrap(), (3, 2));
        assert_eq!(arm_leg(&p, (0, 3)).unwrap(), (0, 0));
        assert_eq!(arm_leg(&part("1"), (0, 0)).unwrap(), (0, 0));
        assert!(arm_leg(&p, (1, 2)).is_err());
    }

    #[test]
    fn jack_probability_small() {
        for alpha in [ratio(1, 2), int(1), int(3)] {
            assert_eq!(jack_probability(&part("1"), &alpha), int(1));
            let one = BigRational::one();
            assert_eq!(jack_probability(&part("2"), &alpha), &one / (&one + &alpha));
            assert_eq!(
                jack_probability(&part("1,1"), &alpha),
                &alpha / (&one + &alpha)
            );
        }
    }

    #[test]
    fn partition_counts() {
        // Euler's pentagonal recurrence as the oracle.
        let mut p = vec![1i64];
        for n in 1..=30i64 {
            let mut total = 0;
            for k in 1.. {
                let g1 = k * (3 * k - 1) / 2;
                if g1 > n {
                    break;
                }
                let sign = if k % 2 == 1 { 1 } else { -1 };
                total += sign * p[(n - g1) as usize];
                let g2 = k * (3 * k + 1) / 2;
                if g2 <= n {
                    total += sign * p[(n - g2) as usize];
                }
            }
            p.push(total);
        }
        for n in 1..=30u32 {
            let list = enumerate_partitions(n).unwrap();
            assert_eq!(list.len() as i64, p[n as usize], "n = {n}");
            assert!(list.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(enumerate_partitions(1).unwrap(), vec![part("1")]);
        assert!(enumerate_partitions(0).is_err());
        assert!(enumerate_partitions(61).is_err());
    }

    #[test]
    fn content_examples() {
        let a = int(5);
        assert_eq!(part("2").content_sum().value(&a), a);
        assert_eq!(part("1,1").content_sum().value(&a), int(-1));
        assert_eq!(part("4,2,1").content_sum(), Content { col: 7, row: 4 });
        assert_eq!(part("3,3,3").content_sum().value(&int(1)), int(0));
    }

    #[test]
    fn corners() {
        assert_eq!(part("1").addable_corners(), vec![(0, 1), (1, 0)]);
        assert_eq!(
            part("4,2,1").addable_corners(),
            vec![(0, 4), (1, 2), (2, 1), (3, 0)]
        );
        assert_eq!(part("5,4,3,2,1").addable_corners().len(), 6);
    }

    #[test]
    fn kerov_from_one_box() {
        let alpha = ratio(3, 2);
        let d = kerov_transition_probs(&part("1"), &alpha);
        let one = BigRational::one();
        assert_eq!(d.corners[0].prob, &one / (&one + &alpha));
        assert_eq!(d.corners[1].prob, &alpha / (&one + &alpha));
    }

    #[test]
    fn local_form_matches() {
        for alpha in [ratio(1, 3), int(1), ratio(7, 2)] {
            for n in 1..=7 {
                for p in enumerate_partitions(n).unwrap() {
                    let a = kerov_transition_probs(&p, &alpha);
                    let b = kerov_transition_probs_local(&p, &alpha);
                    assert_eq!(a, b, "{p}");
                    assert_eq!(a.total(), int(1));
                    let d = Diagram {
                        parts: p.parts.clone(),
                        conj: conjugate_parts(&p.parts),
                    };
                    let af = to_f64(&alpha);
                    for (c, (pos, w)) in a.corners.iter().zip(d.weighted_corners(af)) {
                        assert_eq!(c.position, pos);
                        assert!((to_f64(&c.prob) - w).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn conjugate_symmetry_at_one() {
        let one = int(1);
        for p in enumerate_partitions(7).unwrap() {
            let q = p.conjugate();
            assert_eq!(jack_probability(&p, &one), jack_probability(&q, &one));
            assert_eq!(p.content_sum().value(&one), -q.content_sum().value(&one));
        }
    }

    #[test]
    fn t_moments_small() {
        let m = conditional_t_moments(&part("1"), &int(4), 2).unwrap();
        assert!(m.content_mean.is_zero());
        assert_eq!(m.second, int(1));
        assert!(conditional_t_moments(&part("2"), &int(1), 2).is_err());
    }

    #[test]
    fn pair_table_from_one_box() {
        let z = zero_bias_pair_distribution(&part("1"), &int(2)).unwrap();
        assert_eq!(z.weights[0][1], ratio(1, 2));
        assert_eq!(z.weights[1][0], ratio(1, 2));
        assert!(z.weights[0][0].is_zero() && z.weights[1][1].is_zero());
        assert_eq!(z.normalizer, int(2));
    }

    #[test]
    fn zero_bias_examples() {
        let r = check_zero_bias_identity(2, &int(1), &Polynomial::monomial(1)).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-15 && (r.rhs - 1.0).abs() < 1e-15);
        let r = check_zero_bias_identity(3, &int(2), &Polynomial::monomial(2)).unwrap();
        assert!(r.exact && r.max_abs_err <= ZERO_BIAS_TOL);
        let r = check_zero_bias_identity(5, &ratio(1, 2), &Polynomial::monomial(3)).unwrap();
        assert!(r.exact && r.max_abs_err <= ZERO_BIAS_TOL);
        assert!(check_zero_bias_identity(9, &int(1), &Polynomial::monomial(1)).is_err());
    }

    #[test]
    fn jack_moment_examples() {
        let r = check_jack_moments(6, &int(3)).unwrap();
        assert_eq!((r.ey.clone(), r.ey2.clone()), (int(0), int(45)));
        let r = check_jack_moments(8, &ratio(1, 4)).unwrap();
        assert_eq!((r.ey.clone(), r.ey2.clone()), (int(0), int(7)));
        assert!(r.holds);
    }

    #[test]
    fn single_column() {
        let a = ratio(5, 3);
        assert_eq!(
            single_column_prob(2, &a),
            jack_probability(&part("1,1"), &a)
        );
        assert_eq!(single_column_prob(1, &a), int(1));
        let r = check_single_column(10, &int(10_000));
        assert!(r.holds && r.prob_f64 >= (-0.01f64).exp());
        let direct: f64 = (0..10).map(|l| 1.0 / (1.0 + f64::from(l) / 1e4)).product();
        assert!((r.prob_f64 - direct).abs() < 1e-12);
        for n in 1..=8 {
            assert_eq!(
                single_column_prob(n, &a),
                jack_probability(&Partition::column(n), &a)
            );
        }
    }

    #[test]
    fn region_examples() {
        let r = rate_and_region(4, 4.0, 0.5).unwrap();
        assert_eq!(r.r, 2.0);
        assert!(rate_and_region(10, 10f64.powf(1.5), 0.4).unwrap().in_smiley);
        for eps in [0.01, 0.3, 0.99] {
            assert!(!rate_and_region(10, 100.0, eps).unwrap().in_smiley);
        }
        assert!(rate_and_region(10, 50.0, 1.0).is_err());
    }

    #[test]
    fn wasserstein_bound_value() {
        assert!((wasserstein_bound(100, 1.0) - 0.4834).abs() < 1e-4);
    }

    #[test]
    fn sampler_determinism() {
        let a = kerov_sample(30, 2.5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = kerov_sample(30, 2.5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.partition.size(), 30);
        let s1 = zero_bias_sample(10, 3.0, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let s2 = zero_bias_sample(10, 3.0, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(s1, s2);
        assert!(zero_bias_sample(1, 3.0, &mut ChaCha8Rng::seed_from_u64(8)).is_err());
    }
}
