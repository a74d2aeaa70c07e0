//! Isolated vertices in the uniform random graph with `n` vertices and `m`
//! edges.
//!
//! Vertices are `0..n` and edge slots are `0..N`, `N = C(n, 2)`, enumerated
//! row-major: `{0,1}, {0,2}, ..., {0,n-1}, {1,2}, ...`. A graph is the first
//! `m` slots of a uniform permutation of the slots.

use std::collections::{BTreeSet, HashMap, HashSet};

use itertools::Itertools;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exactnum::{self, binomial_ratio, hyp_law, int, to_f64, HypergeometricParams};
use crate::rng::{par_samples, SeedStream};
use crate::stein_core::{self, KolmogorovEstimate, Polynomial, SteinError};

/// Largest number of `(edge set, vertex, candidate order)` states the
/// exhaustive checks will walk.
pub const EXHAUSTIVE_STATE_LIMIT: u64 = 50_000_000;

/// Largest number of edge sets enumerated for exact laws.
pub const EDGE_SET_LIMIT: u64 = 2_000_000;

/// Default ceiling reported against the mean and variance ratios.
pub const DEFAULT_RATIO_CEILING: f64 = 16.0;

const LEMMA6_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ErError {
    #[error("need n >= 3 and 0 < m < C(n,2), got n = {n}, m = {m}")]
    InvalidParams { n: u64, m: u64 },
    #[error("vertex pair ({v}, {w}) is not a pair of distinct vertices below {n}")]
    BadPair { v: u64, w: u64, n: u64 },
    #[error("vertex {v} out of range for n = {n}")]
    VertexOutOfRange { v: u64, n: u64 },
    #[error("slot {slot} out of range for N = {slots}")]
    SlotOutOfRange { slot: u64, slots: u64 },
    #[error("edge list is not {m} distinct slots")]
    BadEdgeList { m: u64 },
    #[error("not a permutation of 0..{0}")]
    NotAPermutation(u64),
    #[error("cannot relocate edges: m = {m} exceeds C(n-1,2) for n = {n}")]
    CannotRedistribute { n: u64, m: u64 },
    #[error("candidate stream ran out before all edges were relocated")]
    StreamExhausted,
    #[error("({n}, {m}) has zero variance")]
    Degenerate { n: u64, m: u64 },
    #[error("enumeration too large: {0}")]
    Infeasible(String),
    #[error("({n}, {m}) is outside the nice set")]
    NotInSmiley { n: u64, m: u64 },
    #[error("d = {d} exceeds min(n,m)/4 = {max}")]
    DOutOfRange { d: u64, max: f64 },
    #[error("thresholds must be positive")]
    BadThresholds,
    #[error(transparent)]
    Stein(#[from] SteinError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ErParams {
    n: u64,
    m: u64,
}

impl ErParams {
    pub fn new(n: u64, m: u64) -> Result<Self, ErError> {
        if n < 3 || m == 0 || m >= slot_count(n) {
            return Err(ErError::InvalidParams { n, m });
        }
        Ok(Self { n, m })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// `N = C(n, 2)`.
    pub fn slots(&self) -> u64 {
        slot_count(self.n)
    }

    /// Law of one vertex degree, `Hyp(N, m, n-1)`.
    pub fn degree_params(&self) -> HypergeometricParams {
        HypergeometricParams::new(self.slots(), self.m, self.n - 1).expect("m < N and n-1 < N")
    }
}

pub fn slot_count(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

fn row_start(v: u64, n: u64) -> u64 {
    v * (2 * n - v - 1) / 2
}

/// Slot of the unordered pair `{v, w}`.
pub fn edge_index(v: u64, w: u64, n: u64) -> Result<u64, ErError> {
    let (a, b) = if v < w { (v, w) } else { (w, v) };
    if a == b || b >= n {
        return Err(ErError::BadPair { v, w, n });
    }
    Ok(row_start(a, n) + (b - a - 1))
}

/// Inverse of [`edge_index`], returning the pair with the smaller vertex first.
pub fn slot_to_pair(slot: u64, n: u64) -> Result<(u64, u64), ErError> {
    let slots = slot_count(n);
    if slot >= slots {
        return Err(ErError::SlotOutOfRange { slot, slots });
    }
    Ok(pair_unchecked(slot, n))
}

fn pair_unchecked(slot: u64, n: u64) -> (u64, u64) {
    // Row v starts at v(2n - v - 1)/2; invert the quadratic, then fix rounding.
    let nf = n as f64;
    let disc = (2.0 * nf - 1.0).powi(2) - 8.0 * slot as f64;
    let mut v = (((2.0 * nf - 1.0) - disc.max(0.0).sqrt()) / 2.0)
        .floor()
        .max(0.0) as u64;
    v = v.min(n - 2);
    while v > 0 && row_start(v, n) > slot {
        v -= 1;
    }
    while v + 1 < n - 1 && row_start(v + 1, n) <= slot {
        v += 1;
    }
    (v, v + 1 + (slot - row_start(v, n)))
}

/// Slots not touching `v`, in increasing order.
pub fn non_incident_slots(n: u64, v: u64) -> Vec<u64> {
    (0..slot_count(n))
        .filter(|&s| {
            let (a, b) = pair_unchecked(s, n);
            a != v && b != v
        })
        .collect()
}

/// Fisher–Yates that only materializes the entries it has been asked for.
#[derive(Debug, Clone)]
pub struct LazyPermutation {
    len: u64,
    drawn: u64,
    moved: HashMap<u64, u64>,
}

impl LazyPermutation {
    pub fn new(len: u64) -> Self {
        Self {
            len,
            drawn: 0,
            moved: HashMap::new(),
        }
    }

    pub fn next_with<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<u64> {
        if self.drawn == self.len {
            return None;
        }
        let i = self.drawn;
        let j = rng.random_range(i..self.len);
        let at_j = self.moved.get(&j).copied().unwrap_or(j);
        let at_i = self.moved.remove(&i).unwrap_or(i);
        if j != i {
            self.moved.insert(j, at_i);
        }
        self.drawn += 1;
        Some(at_j)
    }

    /// Borrows `rng` as an iterator over the remaining entries.
    pub fn stream<'a, R: Rng + ?Sized>(
        &'a mut self,
        rng: &'a mut R,
    ) -> impl Iterator<Item = u64> + 'a {
        std::iter::from_fn(move || self.next_with(rng))
    }
}

/// A graph given by the `m`-prefix of the slot permutation. Only membership
/// of slots in the prefix is ever queried, so the tail is not stored.
#[derive(Debug, Clone)]
pub struct ErGraphState {
    params: ErParams,
    prefix: Vec<u64>,
    present: HashSet<u64>,
    incident: Vec<Vec<u64>>,
}

impl ErGraphState {
    pub fn from_edges(params: ErParams, prefix: Vec<u64>) -> Result<Self, ErError> {
        let slots = params.slots();
        if prefix.len() as u64 != params.m {
            return Err(ErError::BadEdgeList { m: params.m });
        }
        let mut present = HashSet::with_capacity(prefix.len());
        let mut incident = vec![Vec::new(); params.n as usize];
        for &s in &prefix {
            if s >= slots {
                return Err(ErError::SlotOutOfRange { slot: s, slots });
            }
            if !present.insert(s) {
                return Err(ErError::BadEdgeList { m: params.m });
            }
            let (a, b) = pair_unchecked(s, params.n);
            incident[a as usize].push(s);
            incident[b as usize].push(s);
        }
        Ok(Self {
            params,
            prefix,
            present,
            incident,
        })
    }

    /// Graph of a full permutation of `0..N` in one-line notation.
    pub fn from_permutation(params: ErParams, perm: &[u64]) -> Result<Self, ErError> {
        let slots = params.slots();
        let mut seen = vec![false; slots as usize];
        if perm.len() as u64 != slots
            || !perm
                .iter()
                .all(|&s| s < slots && !std::mem::replace(&mut seen[s as usize], true))
        {
            return Err(ErError::NotAPermutation(slots));
        }
        Self::from_edges(params, perm[..params.m as usize].to_vec())
    }

    pub fn params(&self) -> ErParams {
        self.params
    }

    pub fn edge_slots(&self) -> &[u64] {
        &self.prefix
    }

    pub fn has_edge(&self, slot: u64) -> bool {
        self.present.contains(&slot)
    }

    pub fn degree(&self, v: u64) -> u64 {
        self.incident[v as usize].len() as u64
    }

    pub fn degrees(&self) -> Vec<u64> {
        self.incident.iter().map(|e| e.len() as u64).collect()
    }

    pub fn isolated_count(&self) -> u64 {
        self.incident.iter().filter(|e| e.is_empty()).count() as u64
    }

    /// Neighbours of `v`, in edge order.
    pub fn neighbors(&self, v: u64) -> impl Iterator<Item = u64> + '_ {
        self.incident[v as usize].iter().map(move |&s| {
            let (a, b) = pair_unchecked(s, self.params.n);
            if a == v {
                b
            } else {
                a
            }
        })
    }
}

pub fn sample_graph<R: Rng + ?Sized>(params: ErParams, rng: &mut R) -> ErGraphState {
    let mut perm = LazyPermutation::new(params.slots());
    let prefix = perm.stream(rng).take(params.m as usize).collect();
    ErGraphState::from_edges(params, prefix).expect("distinct in-range slots")
}

pub fn isolated_count(graph: &ErGraphState) -> u64 {
    graph.isolated_count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RedistributionResult {
    pub vertex: u64,
    /// Degrees in the coupled graph; the entry for the removed vertex is 0
    /// and carries no meaning.
    pub coupled_degrees: Vec<u64>,
    pub relocated_slots: Vec<u64>,
    pub receiving_vertices: BTreeSet<u64>,
    pub lost_neighbors: BTreeSet<u64>,
    pub coupled_isolated: u64,
    pub b_v: i64,
}

/// Removes `v` and relocates its edges along `candidates`, skipping slots that
/// touch `v` or are already edges.
pub fn redistribute<I>(
    graph: &ErGraphState,
    v: u64,
    candidates: I,
) -> Result<RedistributionResult, ErError>
where
    I: IntoIterator<Item = u64>,
{
    let ErParams { n, m } = graph.params;
    if v >= n {
        return Err(ErError::VertexOutOfRange { v, n });
    }
    if m > slot_count(n - 1) {
        return Err(ErError::CannotRedistribute { n, m });
    }
    let slots = graph.params.slots();
    let mut coupled_degrees = graph.degrees();
    for w in graph.neighbors(v) {
        coupled_degrees[w as usize] -= 1;
    }
    coupled_degrees[v as usize] = 0;

    let need = graph.degree(v) as usize;
    let mut relocated_slots = Vec::with_capacity(need);
    let mut receiving_vertices = BTreeSet::new();
    let mut candidates = candidates.into_iter();
    while relocated_slots.len() < need {
        let slot = candidates.next().ok_or(ErError::StreamExhausted)?;
        if slot >= slots {
            return Err(ErError::SlotOutOfRange { slot, slots });
        }
        let (a, b) = pair_unchecked(slot, n);
        if a == v || b == v || graph.has_edge(slot) || relocated_slots.contains(&slot) {
            continue;
        }
        coupled_degrees[a as usize] += 1;
        coupled_degrees[b as usize] += 1;
        receiving_vertices.insert(a);
        receiving_vertices.insert(b);
        relocated_slots.push(slot);
    }
    let lost_neighbors = graph
        .neighbors(v)
        .filter(|w| !receiving_vertices.contains(w))
        .collect();
    let coupled_isolated = coupled_degrees
        .iter()
        .enumerate()
        .filter(|&(w, &d)| w as u64 != v && d == 0)
        .count() as u64;
    Ok(RedistributionResult {
        vertex: v,
        coupled_degrees,
        relocated_slots,
        receiving_vertices,
        lost_neighbors,
        coupled_isolated,
        b_v: graph.isolated_count() as i64 - coupled_isolated as i64,
    })
}

/// `I_v + sum_{N^v} I_w - sum_{M^v} I[d_w = 1]`. Panics if it disagrees with
/// the direct recount in `result`.
pub fn b_v_decomposition(graph: &ErGraphState, v: u64, result: &RedistributionResult) -> i64 {
    assert_eq!(result.vertex, v, "result belongs to another vertex");
    let isolated = |w: u64| i64::from(graph.degree(w) == 0);
    let value = isolated(v)
        + result
            .receiving_vertices
            .iter()
            .map(|&w| isolated(w))
            .sum::<i64>()
        - result
            .lost_neighbors
            .iter()
            .map(|&w| i64::from(graph.degree(w) == 1))
            .sum::<i64>();
    assert_eq!(
        value, result.b_v,
        "decomposition disagrees with the recount at v = {v}"
    );
    value
}

// ---------------------------------------------------------------------------
// Moments

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErMoments {
    pub mu: BigRational,
    pub sigma2: BigRational,
}

impl ErMoments {
    pub fn mu_f64(&self) -> f64 {
        to_f64(&self.mu)
    }

    pub fn sigma2_f64(&self) -> f64 {
        to_f64(&self.sigma2)
    }

    pub fn sigma_f64(&self) -> f64 {
        self.sigma2_f64().sqrt()
    }
}

/// Moments for any `n >= 2`, `0 <= m <= C(n,2)`.
pub fn moments_unchecked(n: u64, m: u64) -> ErMoments {
    let slots = slot_count(n);
    let nr = int(n as i64);
    let mu = &nr * binomial_ratio(slots, n - 1, m);
    let joint = binomial_ratio(slots, 2 * n - 3, m);
    let sigma2 = &mu + &nr * int(n as i64 - 1) * joint - &mu * &mu;
    ErMoments { mu, sigma2 }
}

pub fn exact_moments(params: ErParams) -> ErMoments {
    moments_unchecked(params.n, params.m)
}

/// `(n e^{-2m/n}, n phi(2m/n))`.
pub fn asymptotic_moments(params: ErParams) -> (f64, f64) {
    let n = params.n as f64;
    let x = 2.0 * params.m as f64 / n;
    (n * (-x).exp(), n * exactnum::phi(x))
}

/// `sigma^3 / (mu (1 + m^2/n^2))`, or 0 when the variance vanishes.
pub fn rate(params: ErParams) -> f64 {
    rate_from(params, &exact_moments(params))
}

fn rate_from(params: ErParams, moments: &ErMoments) -> f64 {
    if moments.sigma2.is_zero() {
        return 0.0;
    }
    let ratio = params.m as f64 / params.n as f64;
    moments.sigma2_f64().powf(1.5) / (moments.mu_f64() * (1.0 + ratio * ratio))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub n_bar: u64,
    pub m_bar: u64,
    pub c_bar: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            n_bar: 344,
            m_bar: 28,
            c_bar: 1.0,
        }
    }
}

impl Thresholds {
    pub fn new(n_bar: u64, m_bar: u64, c_bar: f64) -> Result<Self, ErError> {
        if n_bar == 0 || m_bar == 0 || !(c_bar > 0.0 && c_bar.is_finite()) {
            return Err(ErError::BadThresholds);
        }
        Ok(Self {
            n_bar,
            m_bar,
            c_bar,
        })
    }
}

pub fn smiley_membership(params: ErParams, thresholds: &Thresholds) -> bool {
    let n = params.n as f64;
    params.n >= thresholds.n_bar
        && params.m >= thresholds.m_bar
        && params.m as f64 <= thresholds.c_bar * n * n.sqrt()
}

/// `t(n,m) = min(n,m)/4`.
pub fn truncation_threshold(params: ErParams) -> f64 {
    params.n.min(params.m) as f64 / 4.0
}

pub fn exceeds_truncation(params: ErParams, degree: u64) -> bool {
    degree as f64 > truncation_threshold(params)
}

/// `4m/n + 2 log min(m, n)`.
pub fn underline_t(params: ErParams) -> f64 {
    4.0 * params.m as f64 / params.n as f64 + 2.0 * (params.n.min(params.m) as f64).ln()
}

pub fn check_underline_t(params: ErParams) -> bool {
    underline_t(params) <= truncation_threshold(params)
}

/// Exact `P[d_v > t(n,m)]`.
pub fn truncation_tail(params: ErParams) -> BigRational {
    let t = truncation_threshold(params);
    hyp_law(&params.degree_params())
        .into_iter()
        .enumerate()
        .filter(|&(k, _)| k as f64 > t)
        .fold(BigRational::zero(), |acc, (_, p)| acc + p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeCorrelationReport {
    pub joint: BigRational,
    pub product: BigRational,
    pub holds: bool,
    /// `sigma^2 <= min(mu, 2m)`.
    pub variance_bound: bool,
}

pub fn check_negative_correlation(params: ErParams) -> NegativeCorrelationReport {
    let slots = params.slots();
    let joint = binomial_ratio(slots, 2 * params.n - 3, params.m);
    let single = binomial_ratio(slots, params.n - 1, params.m);
    let product = &single * &single;
    let moments = exact_moments(params);
    let variance_bound = moments.sigma2 <= moments.mu && moments.sigma2 <= int(2 * params.m as i64);
    NegativeCorrelationReport {
        holds: joint <= product,
        joint,
        product,
        variance_bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma6Report {
    /// Whether `n >= 6` and `m <= n^2/4 - 3n/2`; the bounds are evaluated
    /// either way.
    pub applicable: bool,
    pub mu_over_n: f64,
    pub mu_lower: f64,
    pub mu_upper: f64,
    pub sigma2: f64,
    pub sigma2_lower: f64,
    pub sigma2_upper: f64,
    pub holds_mu: bool,
    pub holds_sigma: bool,
}

pub fn check_lemma6(params: ErParams) -> Lemma6Report {
    let (n, m) = (params.n as f64, params.m as f64);
    let applicable = params.n >= 6 && 4 * params.m + 6 * params.n <= params.n * params.n;
    let moments = exact_moments(params);
    let mu = moments.mu_f64();
    let sigma2 = moments.sigma2_f64();
    let x = 2.0 * m / n;
    let cube = m * (m + n) / (n * n * n);
    let mu_over_n = mu / n;
    let mu_lower = (-x - 8.0 * cube).exp();
    let mu_upper = (-x).exp();
    let sigma2_lower = mu * (1.0 - mu_over_n * (1.0 + x + 78.0 * cube));
    let sigma2_upper = mu * (1.0 - mu_over_n * (1.0 + x - 48.0 * cube));
    let within = |lo: f64, v: f64, hi: f64| {
        let slack = LEMMA6_SLACK * v.abs().max(1.0);
        lo - slack <= v && v <= hi + slack
    };
    Lemma6Report {
        applicable,
        mu_over_n,
        mu_lower,
        mu_upper,
        sigma2,
        sigma2_lower,
        sigma2_upper,
        holds_mu: within(mu_lower, mu_over_n, mu_upper),
        holds_sigma: within(sigma2_lower, sigma2, sigma2_upper),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma7Report {
    pub mu_rel_err: f64,
    /// `m/n^2 + m^2/n^3`.
    pub mu_scale: f64,
    pub sigma2_rel_err: f64,
    /// `1/m + m^2/n^3`.
    pub sigma2_scale: f64,
}

impl Lemma7Report {
    /// Smallest constant making both relative error bounds hold here.
    pub fn implied_constant(&self) -> f64 {
        (self.mu_rel_err / self.mu_scale).max(self.sigma2_rel_err / self.sigma2_scale)
    }
}

pub fn lemma7_errors(params: ErParams) -> Lemma7Report {
    let (n, m) = (params.n as f64, params.m as f64);
    let moments = exact_moments(params);
    let (mu_a, s_a) = asymptotic_moments(params);
    Lemma7Report {
        mu_rel_err: (moments.mu_f64() / mu_a - 1.0).abs(),
        mu_scale: m / (n * n) + m * m / (n * n * n),
        sigma2_rel_err: (moments.sigma2_f64() / s_a - 1.0).abs(),
        sigma2_scale: 1.0 / m + m * m / (n * n * n),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma9Report {
    pub mean_ratio: f64,
    pub var_ratio: f64,
    pub finite: bool,
    pub below_ceiling: bool,
}

/// `max(mu_{n,m}^2/mu_{n-1,m-d}^2, inverse)` and the same for the variance.
pub fn check_lemma9_ratios(
    params: ErParams,
    d: u64,
    thresholds: &Thresholds,
    ceiling: f64,
) -> Result<Lemma9Report, ErError> {
    if !smiley_membership(params, thresholds) {
        return Err(ErError::NotInSmiley {
            n: params.n,
            m: params.m,
        });
    }
    let max = truncation_threshold(params);
    if d as f64 > max {
        return Err(ErError::DOutOfRange { d, max });
    }
    let here = exact_moments(params);
    let there = moments_unchecked(params.n - 1, params.m - d);
    let sym = |a: &BigRational, b: &BigRational| {
        if a.is_zero() || b.is_zero() {
            return f64::INFINITY;
        }
        let r = a / b;
        to_f64(&r).max(to_f64(&r.recip()))
    };
    let squared = |a: &BigRational| a * a;
    let mean_ratio = sym(&squared(&here.mu), &squared(&there.mu));
    let var_ratio = sym(&here.sigma2, &there.sigma2);
    let finite = mean_ratio.is_finite() && var_ratio.is_finite();
    Ok(Lemma9Report {
        mean_ratio,
        var_ratio,
        finite,
        below_ceiling: finite && mean_ratio <= ceiling && var_ratio <= ceiling,
    })
}

// ---------------------------------------------------------------------------
// The coupling

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErCouplingSample {
    pub w: f64,
    pub w_prime: f64,
    pub g: f64,
    pub d: f64,
    pub chosen_vertex: u64,
    pub chosen_degree: u64,
}

impl ErCouplingSample {
    /// `(1 + 2 d_V)/sigma`, the absolute bound on `D`.
    pub fn d_bound(&self, sigma: f64) -> f64 {
        (1.0 + 2.0 * self.chosen_degree as f64) / sigma
    }
}

/// Draws coupling samples for fixed parameters with precomputed moments.
#[derive(Debug, Clone)]
pub struct ErSampler {
    params: ErParams,
    moments: ErMoments,
    mu: f64,
    sigma: f64,
}

impl ErSampler {
    pub fn new(params: ErParams) -> Result<Self, ErError> {
        let moments = exact_moments(params);
        if moments.sigma2.is_zero() {
            return Err(ErError::Degenerate {
                n: params.n,
                m: params.m,
            });
        }
        if params.m > slot_count(params.n - 1) {
            return Err(ErError::CannotRedistribute {
                n: params.n,
                m: params.m,
            });
        }
        Ok(Self {
            params,
            mu: moments.mu_f64(),
            sigma: moments.sigma_f64(),
            moments,
        })
    }

    pub fn params(&self) -> ErParams {
        self.params
    }

    pub fn moments(&self) -> &ErMoments {
        &self.moments
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn standardize(&self, y: u64) -> f64 {
        (y as f64 - self.mu) / self.sigma
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ErCouplingSample {
        let graph = sample_graph(self.params, rng);
        let v = rng.random_range(0..self.params.n);
        let mut stream = LazyPermutation::new(self.params.slots());
        let result = redistribute(&graph, v, stream.stream(rng)).expect("checked in new");
        let w = self.standardize(graph.isolated_count());
        let w_prime = self.standardize(result.coupled_isolated);
        let indicator = if graph.degree(v) == 0 { 1.0 } else { 0.0 };
        let n = self.params.n as f64;
        ErCouplingSample {
            w,
            w_prime,
            g: -(n / self.sigma) * (indicator - self.mu / n),
            d: w_prime - w,
            chosen_vertex: v,
            chosen_degree: graph.degree(v),
        }
    }

    /// `E(GD | pi, Sigma) = sigma^{-2} sum_v (I_v - mu/n) B_v` at a fresh
    /// `(pi, Sigma)`.
    pub fn conditional_gd<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let graph = sample_graph(self.params, rng);
        let n = self.params.n as f64;
        let mut total = 0.0;
        for v in 0..self.params.n {
            let mut stream = LazyPermutation::new(self.params.slots());
            let b = redistribute(&graph, v, stream.stream(rng))
                .expect("checked in new")
                .b_v;
            let indicator = if graph.degree(v) == 0 { 1.0 } else { 0.0 };
            total += (indicator - self.mu / n) * b as f64;
        }
        total / (self.sigma * self.sigma)
    }
}

pub fn coupling_sample<R: Rng + ?Sized>(
    params: ErParams,
    rng: &mut R,
) -> Result<ErCouplingSample, ErError> {
    Ok(ErSampler::new(params)?.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GdVarianceEstimate {
    pub variance: f64,
    /// Standard error of `variance`.
    pub std_error: f64,
    /// `sqrt(variance)`, an upper bound proxy for `E|E(1 - GD | W)|`.
    pub root: f64,
}

pub fn gd_conditional_variance_estimate(
    params: ErParams,
    seed: SeedStream,
    samples: usize,
) -> Result<GdVarianceEstimate, ErError> {
    let sampler = ErSampler::new(params)?;
    let values = par_samples(seed, samples, |rng: &mut ChaCha8Rng| {
        sampler.conditional_gd(rng)
    });
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let m2 = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
    let m4 = values.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / k;
    let variance = m2 * k / (k - 1.0);
    Ok(GdVarianceEstimate {
        variance,
        std_error: ((m4 - m2 * m2).max(0.0) / k).sqrt(),
        root: variance.sqrt(),
    })
}

pub fn kolmogorov_estimate(
    params: ErParams,
    seed: SeedStream,
    samples: usize,
    confidence: f64,
) -> Result<KolmogorovEstimate, ErError> {
    let sampler = ErSampler::new(params)?;
    let values = par_samples(seed, samples, |rng: &mut ChaCha8Rng| {
        sampler.standardize(sample_graph(params, rng).isolated_count())
    });
    Ok(stein_core::empirical_kolmogorov_unsorted(
        values, confidence,
    )?)
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration

/// Result of an exact check that is meaningless at zero variance.
#[derive(Debug, Clone, PartialEq)]
pub enum Exhaustive<T> {
    Degenerate,
    Checked(T),
}

impl<T> Exhaustive<T> {
    pub fn checked(self) -> Option<T> {
        match self {
            Self::Checked(t) => Some(t),
            Self::Degenerate => None,
        }
    }
}

fn edge_set_count(params: ErParams) -> Result<u64, ErError> {
    exactnum::binomial(params.slots(), params.m)
        .to_u64()
        .filter(|&c| c <= EDGE_SET_LIMIT)
        .ok_or_else(|| {
            ErError::Infeasible(format!("C({}, {}) edge sets", params.slots(), params.m))
        })
}

/// Calls `visit` on every graph with `m` edges.
pub fn for_each_graph<F: FnMut(&ErGraphState)>(
    params: ErParams,
    mut visit: F,
) -> Result<u64, ErError> {
    let count = edge_set_count(params)?;
    for subset in (0..params.slots()).combinations(params.m as usize) {
        visit(&ErGraphState::from_edges(params, subset).expect("combination of slots"));
    }
    Ok(count)
}

/// Exact law of the isolated-vertex count, indexed by value.
pub fn exact_isolated_law(params: ErParams) -> Result<Vec<BigRational>, ErError> {
    let mut counts = vec![0u64; params.n as usize + 1];
    let total = for_each_graph(params, |g| counts[g.isolated_count() as usize] += 1)?;
    Ok(counts
        .into_iter()
        .map(|c| BigRational::new(c.into(), total.into()))
        .collect())
}

/// Exact Kolmogorov distance of the standardized count to `N(0,1)`.
pub fn exact_kolmogorov(params: ErParams) -> Result<Exhaustive<f64>, ErError> {
    let moments = exact_moments(params);
    if moments.sigma2.is_zero() {
        return Ok(Exhaustive::Degenerate);
    }
    let (mu, sigma) = (moments.mu_f64(), moments.sigma_f64());
    let atoms: Vec<(f64, f64)> = exact_isolated_law(params)?
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_positive())
        .map(|(y, p)| ((y as f64 - mu) / sigma, to_f64(p)))
        .collect();
    Ok(Exhaustive::Checked(stein_core::kolmogorov_to_normal(
        &atoms,
    )))
}

fn orderings_per_vertex(params: ErParams) -> Result<Vec<Vec<Vec<u64>>>, ErError> {
    let free = slot_count(params.n - 1);
    let per = (1..=free).try_fold(1u64, |acc, k| acc.checked_mul(k));
    let states = per
        .and_then(|p| p.checked_mul(params.n))
        .and_then(|p| p.checked_mul(edge_set_count(params).ok()?));
    if states.is_none_or(|s| s > EXHAUSTIVE_STATE_LIMIT) {
        return Err(ErError::Infeasible(format!(
            "({}, {}) needs more than {EXHAUSTIVE_STATE_LIMIT} states",
            params.n, params.m
        )));
    }
    Ok((0..params.n)
        .map(|v| {
            let free = non_incident_slots(params.n, v);
            free.iter().copied().permutations(free.len()).collect()
        })
        .collect())
}

/// Joint law of `(I_V, Y, Y^V)` over uniform `(pi, sigma_V, V)`, as counts.
///
/// Algorithm 1 only reads the edge set of `pi` and the relative order in
/// which `sigma_V` visits the slots away from `V`, so it suffices to walk
/// edge sets, vertices, and orderings of those slots, all equally likely.
pub fn exhaustive_coupling_counts(
    params: ErParams,
) -> Result<HashMap<(bool, u64, u64), u64>, ErError> {
    if params.m > slot_count(params.n - 1) {
        return Err(ErError::CannotRedistribute {
            n: params.n,
            m: params.m,
        });
    }
    let orderings = orderings_per_vertex(params)?;
    let mut counts = HashMap::new();
    for_each_graph(params, |g| {
        let y = g.isolated_count();
        for v in 0..params.n {
            for order in &orderings[v as usize] {
                let r = redistribute(g, v, order.iter().copied()).expect("enough free slots");
                *counts
                    .entry((g.degree(v) == 0, y, r.coupled_isolated))
                    .or_insert(0) += 1;
            }
        }
    })?;
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonomialCheck {
    pub degree: usize,
    /// `E[G~ ((Y'-mu)^k - (Y-mu)^k)]` with `G~ = mu - n I_V`.
    pub lhs: BigRational,
    /// `E[(Y-mu)^{k+1}]`.
    pub rhs: BigRational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteinIdentityReport {
    pub terms: Vec<MonomialCheck>,
    /// `E[GD]`, exactly.
    pub gd_mean: BigRational,
    /// `E[G(f(W') - f(W))]`.
    pub lhs: f64,
    /// `E[W f(W)]`.
    pub rhs: f64,
    pub equal: bool,
    pub states: u64,
}

/// Largest polynomial degree accepted by [`check_stein_identity_exhaustive`].
pub const MAX_IDENTITY_DEGREE: usize = 4;

/// Checks `E[G(f(W') - f(W))] = E[W f(W)]` exactly by enumeration.
///
/// Monomial by monomial the identity is equivalent to the unscaled one in
/// `Y`-coordinates, which involves no square roots; `equal` compares those.
pub fn check_stein_identity_exhaustive(
    params: ErParams,
    f: &Polynomial,
) -> Result<Exhaustive<SteinIdentityReport>, ErError> {
    if f.degree() > MAX_IDENTITY_DEGREE {
        return Err(ErError::Infeasible(format!(
            "polynomial degree {} > {MAX_IDENTITY_DEGREE}",
            f.degree()
        )));
    }
    let moments = exact_moments(params);
    if moments.sigma2.is_zero() {
        return Ok(Exhaustive::Degenerate);
    }
    let counts = exhaustive_coupling_counts(params)?;
    let states: u64 = counts.values().sum();
    let total = int(states as i64);
    let mu = &moments.mu;
    let n = int(params.n as i64);
    let pow = |x: &BigRational, k: usize| (0..k).fold(BigRational::one(), |acc, _| acc * x);

    let terms: Vec<MonomialCheck> = (0..=f.degree().max(1))
        .map(|k| {
            let mut lhs = BigRational::zero();
            let mut rhs = BigRational::zero();
            for (&(iso, y, yp), &c) in &counts {
                let c = int(c as i64);
                let g = mu - if iso { n.clone() } else { BigRational::zero() };
                let dy = int(y as i64) - mu;
                let dyp = int(yp as i64) - mu;
                lhs += g * (pow(&dyp, k) - pow(&dy, k)) * &c;
                rhs += pow(&dy, k + 1) * c;
            }
            MonomialCheck {
                degree: k,
                lhs: lhs / &total,
                rhs: rhs / &total,
            }
        })
        .collect();

    let sigma = moments.sigma_f64();
    let scale = |k: usize| sigma.powi(k as i32 + 1);
    let coeffs = f.coeffs();
    let (lhs, rhs) =
        terms
            .iter()
            .filter(|t| t.degree < coeffs.len())
            .fold((0.0, 0.0), |(l, r), t| {
                let a = to_f64(&coeffs[t.degree]);
                (
                    l + a * to_f64(&t.lhs) / scale(t.degree),
                    r + a * to_f64(&t.rhs) / scale(t.degree),
                )
            });
    let gd_mean = &terms[1].lhs / &moments.sigma2;
    let equal = terms
        .iter()
        .filter(|t| t.degree < coeffs.len() && !coeffs[t.degree].is_zero())
        .all(|t| t.lhs == t.rhs);
    Ok(Exhaustive::Checked(SteinIdentityReport {
        terms,
        gd_mean,
        lhs,
        rhs,
        equal,
        states,
    }))
}

/// Exact `Var E(GD | pi, Sigma)`.
///
/// Given `pi` the terms `(I_v - mu/n) B_v` are independent across `v`, so
/// the conditional variance is a sum of per-vertex variances.
pub fn gd_conditional_variance_exact(params: ErParams) -> Result<Exhaustive<BigRational>, ErError> {
    let moments = exact_moments(params);
    if moments.sigma2.is_zero() {
        return Ok(Exhaustive::Degenerate);
    }
    if params.m > slot_count(params.n - 1) {
        return Err(ErError::CannotRedistribute {
            n: params.n,
            m: params.m,
        });
    }
    let orderings = orderings_per_vertex(params)?;
    let share = &moments.mu / int(params.n as i64);
    let mut sum_inner_var = BigRational::zero();
    let mut sum_mean = BigRational::zero();
    let mut sum_mean_sq = BigRational::zero();
    let graphs = for_each_graph(params, |g| {
        let mut mean = BigRational::zero();
        let mut var = BigRational::zero();
        for v in 0..params.n {
            let orders = &orderings[v as usize];
            let (s1, s2) = orders.iter().fold((0i64, 0i64), |(a, b), order| {
                let bv = redistribute(g, v, order.iter().copied())
                    .expect("enough free slots")
                    .b_v;
                (a + bv, b + bv * bv)
            });
            let k = int(orders.len() as i64);
            let c = if g.degree(v) == 0 {
                BigRational::one()
            } else {
                BigRational::zero()
            } - &share;
            let eb = int(s1) / &k;
            let eb2 = int(s2) / &k;
            var += &c * &c * (eb2 - &eb * &eb);
            mean += c * eb;
        }
        sum_inner_var += var;
        sum_mean_sq += &mean * &mean;
        sum_mean += mean;
    })?;
    let g = int(graphs as i64);
    let outer_mean = &sum_mean / &g;
    let var_s = sum_inner_var / &g + sum_mean_sq / &g - &outer_mean * &outer_mean;
    Ok(Exhaustive::Checked(
        var_s / (&moments.sigma2 * &moments.sigma2),
    ))
}
