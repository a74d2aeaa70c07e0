use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use thiserror::Error;

use steinkit::er_model::{self, ErParams, Thresholds};
use steinkit::exactnum::{self, int, ratio, to_f64, HypergeometricParams};
use steinkit::jack_model::{self, CornerDistribution, JackParams, Partition};
use steinkit::rng::SeedStream;
use steinkit::stein_core::{self, DiscreteLaw, FiniteKernel, Polynomial, RecursionSpec};

use crate::config::{self, AlphaSpec, ConfigError, ErPoint, JackPoint, RawSettings};
use crate::report::{Report, Row};

pub const DEFAULT_ER_GRID: &str = "400,0.5n;400,n;400,2n";
pub const DEFAULT_JACK_GRID: &str = "16,n^1.5;32,n^1.5;64,n^1.5";
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Largest `C(N, m)` for which the ER report adds the enumerated distance.
pub const ER_EXACT_LIMIT: u64 = 100_000;

const TASK_ER: u64 = 0;
const TASK_JACK: u64 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn params_error(e: impl ToString) -> CliError {
    CliError::Params(e.to_string())
}

fn domain(n: u64, m: u64) -> &'static str {
    let ratio = m as f64 / n as f64;
    if ratio < 0.25 {
        "left"
    } else if ratio > 4.0 {
        "right"
    } else {
        "central"
    }
}

pub fn er_report(settings: &RawSettings) -> Result<Report, CliError> {
    let grid = config::parse_er_grid(settings.get("grid").unwrap_or(DEFAULT_ER_GRID))?;
    let samples = settings.samples(DEFAULT_SAMPLES)?;
    let confidence = settings.confidence()?;
    let thresholds = settings.thresholds()?;
    let root = SeedStream::new(settings.seed()?).child(TASK_ER);
    let params: Vec<ErParams> = grid
        .iter()
        .map(|&ErPoint { n, m }| ErParams::new(n, m).map_err(params_error))
        .collect::<Result<_, _>>()?;

    let parts: Vec<Report> = params
        .par_iter()
        .enumerate()
        .map(|(i, &p)| er_point(p, &thresholds, root.child(i as u64), samples, confidence))
        .collect::<Result<_, _>>()?;
    let mut report = Report::default();
    let scaled: Vec<f64> = parts
        .iter()
        .flat_map(|r| r.rows.iter())
        .filter(|r| r.quantity == "delta_hat_times_r")
        .filter_map(|r| r.value.parse().ok())
        .collect();
    parts.into_iter().for_each(|p| report.extend(p));
    if let Some(max) = scaled.iter().copied().reduce(f64::max) {
        report.push(Row::new("er", "grid", "max_delta_hat_times_r", max));
    }
    Ok(report)
}

fn er_point(
    params: ErParams,
    thresholds: &Thresholds,
    seed: SeedStream,
    samples: usize,
    confidence: f64,
) -> Result<Report, CliError> {
    let (n, m) = (params.n(), params.m());
    let tag = format!("n={n};m={m}");
    let row = |q: &str, v: &dyn ToString| Row::new("er", tag.clone(), q, v.to_string());
    let mut out = Report::default();
    let moments = er_model::exact_moments(params);
    let (mu_asym, sigma2_asym) = er_model::asymptotic_moments(params);
    let r = er_model::rate(params);
    out.push(row("domain", &domain(n, m)));
    out.push(row("mu", &moments.mu));
    out.push(row("sigma2", &moments.sigma2));
    out.push(row("mu_f64", &moments.mu_f64()));
    out.push(row("sigma2_f64", &moments.sigma2_f64()));
    out.push(row("mu_asymptotic", &mu_asym));
    out.push(row("sigma2_asymptotic", &sigma2_asym));
    let errors = er_model::lemma7_errors(params);
    out.push(row("mu_rel_err", &errors.mu_rel_err));
    out.push(row("sigma2_rel_err", &errors.sigma2_rel_err));
    out.push(row("asymptotic_constant", &errors.implied_constant()));
    out.push(row("rate", &r));
    out.push(row(
        "in_smiley",
        &er_model::smiley_membership(params, thresholds),
    ));

    let nc = er_model::check_negative_correlation(params);
    out.check(
        row("negative_correlation", &to_f64(&nc.joint))
            .bound(to_f64(&nc.product))
            .holds(nc.holds),
    );
    let cap = moments.mu_f64().min(2.0 * m as f64);
    out.check(
        row("variance_bound", &moments.sigma2_f64())
            .bound(cap)
            .holds(nc.variance_bound),
    );
    let l6 = er_model::check_lemma6(params);
    if l6.applicable {
        out.check(
            row("mu_over_n_sandwich", &l6.mu_over_n)
                .bound(format!("[{},{}]", l6.mu_lower, l6.mu_upper))
                .holds(l6.holds_mu),
        );
        out.check(
            row("sigma2_sandwich", &l6.sigma2)
                .bound(format!("[{},{}]", l6.sigma2_lower, l6.sigma2_upper))
                .holds(l6.holds_sigma),
        );
    }

    match er_model::kolmogorov_estimate(params, seed, samples, confidence) {
        Ok(est) => {
            out.push(row("delta_hat", &est.delta_hat).bound(est.dkw_band));
            out.push(row("delta_hat_times_r", &(est.delta_hat * r)));
            let small = exactnum::binomial(params.slots(), m) <= ER_EXACT_LIMIT.into();
            if small {
                if let Some(exact) = er_model::exact_kolmogorov(params)
                    .map_err(params_error)?
                    .checked()
                {
                    out.push(
                        row("exact_delta", &exact)
                            .bound(est.dkw_band)
                            .holds((est.delta_hat - exact).abs() <= est.dkw_band),
                    );
                }
            }
        }
        Err(e) => out.push(row("delta_hat", &"skipped").bound(e)),
    }
    Ok(out)
}

fn alpha_label(a: &AlphaSpec) -> String {
    match a {
        AlphaSpec::Exact(x) => x.to_string(),
        AlphaSpec::Power(p) => format!("n^{p}"),
    }
}

pub fn jack_report(settings: &RawSettings) -> Result<Report, CliError> {
    let grid = config::parse_jack_grid(settings.get("grid").unwrap_or(DEFAULT_JACK_GRID))?;
    let samples = settings.samples(DEFAULT_SAMPLES)?;
    let confidence = settings.confidence()?;
    let epsilon = settings.epsilon()?;
    let root = SeedStream::new(settings.seed()?).child(TASK_JACK);
    let parts: Vec<Report> = grid
        .par_iter()
        .enumerate()
        .map(|(i, p)| jack_point(p, root.child(i as u64), samples, confidence, epsilon))
        .collect::<Result<_, _>>()?;
    let scaled: Vec<f64> = parts
        .iter()
        .flat_map(|r| r.rows.iter())
        .filter(|r| r.quantity == "delta_hat_times_r")
        .filter_map(|r| r.value.parse().ok())
        .collect();
    let mut report = Report::default();
    parts.into_iter().for_each(|p| report.extend(p));
    if let Some(max) = scaled.iter().copied().reduce(f64::max) {
        report.push(Row::new("jack", "grid", "max_delta_hat_times_r", max));
    }
    Ok(report)
}

/// Above this size the single-column probability is reported in floating
/// point only.
const EXACT_COLUMN_LIMIT: u32 = 500;

fn jack_point(
    point: &JackPoint,
    seed: SeedStream,
    samples: usize,
    confidence: f64,
    epsilon: f64,
) -> Result<Report, CliError> {
    let n = point.n;
    let alpha = point.alpha.value_f64(n);
    let tag = format!("n={n};alpha={}", alpha_label(&point.alpha));
    let row = |q: &str, v: &dyn ToString| Row::new("jack", tag.clone(), q, v.to_string());
    let mut out = Report::default();
    let region = jack_model::rate_and_region(n, alpha, epsilon).map_err(params_error)?;
    out.push(row("alpha", &alpha));
    out.push(row("rate", &region.r));
    out.push(row("rate_alt", &region.r_alt));
    out.push(row("in_smiley", &region.in_smiley));

    let est = jack_model::kolmogorov_estimate(n, alpha, seed.child(0), samples, confidence)
        .map_err(params_error)?;
    out.push(row("delta_hat", &est.estimate.delta_hat).bound(est.estimate.dkw_band));
    out.push(row("delta_hat_times_r", &est.ratio));
    out.push(row("delta_hat_times_r_alt", &est.ratio_alt));
    if n <= jack_model::MAX_MOMENT_N {
        let params = JackParams::new(n, point.alpha.value(n)).map_err(params_error)?;
        let exact = jack_model::exact_kolmogorov(&params).map_err(params_error)?;
        let band = est.estimate.dkw_band;
        out.push(
            row("exact_delta", &exact)
                .bound(band)
                .holds((est.estimate.delta_hat - exact).abs() <= band),
        );
    }

    let w = jack_model::check_wasserstein_bound(n, alpha, seed.child(1), samples)
        .map_err(params_error)?;
    out.push(
        row("d1_hat", &w.d1_hat)
            .bound(w.bound)
            .holds(w.holds_within_mc),
    );
    out.push(row("d1_mc_budget", &w.mc_budget));

    let nf = f64::from(n);
    let lower = (-nf * nf / alpha).exp();
    if n <= EXACT_COLUMN_LIMIT {
        let sc = jack_model::check_single_column(n, &point.alpha.value(n));
        out.check(
            row("single_column_prob", &sc.prob_f64)
                .bound(sc.lower)
                .holds(sc.holds),
        );
    } else {
        let p: f64 = (0..n).map(|l| alpha / (alpha + f64::from(l))).product();
        out.push(row("single_column_prob", &p).bound(lower));
    }
    out.push(row("degenerate", &(alpha > nf * nf)));

    let t = jack_model::truncation_diagnostics(n, alpha, epsilon, seed.child(2), samples)
        .map_err(params_error)?;
    out.push(
        row("f_complement_freq", &t.f_complement_freq)
            .bound(t.f_complement_bound)
            .holds(t.f_complement_freq <= t.f_complement_bound),
    );
    out.push(
        row("max_abs_d", &t.max_abs_d)
            .bound(t.d_bar)
            .holds(t.d_bounded_on_f),
    );
    Ok(out)
}

/// Transition law used by the verification suite; `fault` inflates the
/// first corner's weight.
fn kerov_weights(p: &Partition, alpha: &BigRational, fault: bool) -> CornerDistribution {
    let mut d = jack_model::kerov_transition_probs_local(p, alpha);
    if fault {
        d.corners[0].prob = &d.corners[0].prob * ratio(1001, 1000);
    }
    d
}

fn composed_law(n: u32, alpha: &BigRational, fault: bool) -> BTreeMap<Partition, BigRational> {
    let mut law = BTreeMap::from([(Partition::row(1), BigRational::one())]);
    for _ in 1..n {
        let mut next: BTreeMap<Partition, BigRational> = BTreeMap::new();
        for (p, q) in &law {
            for c in kerov_weights(p, alpha, fault).corners {
                *next
                    .entry(p.with_box(c.position.0))
                    .or_insert_with(BigRational::zero) += q * &c.prob;
            }
        }
        law = next;
    }
    law
}

type Check = (
    &'static str,
    &'static str,
    Box<dyn Fn() -> (bool, String) + Sync>,
);

fn alpha_grid() -> Vec<BigRational> {
    vec![ratio(1, 2), int(1), int(2), int(5)]
}

fn law_of(values: Vec<BigRational>) -> DiscreteLaw<BigRational> {
    let atoms = values
        .into_iter()
        .enumerate()
        .filter(|(_, p)| !p.is_zero())
        .map(|(k, p)| (int(k as i64), p))
        .collect();
    DiscreteLaw::new(atoms).expect("probability vector")
}

fn verify_checks(fault: bool) -> Vec<Check> {
    vec![
        (
            "jack",
            "jack-normalization",
            Box::new(|| {
                let ok = alpha_grid().iter().all(|a| {
                    (1..=8).all(|n| {
                        jack_model::enumerate_partitions(n)
                            .unwrap()
                            .iter()
                            .fold(BigRational::zero(), |s, p| {
                                s + jack_model::jack_probability(p, a)
                            })
                            .is_one()
                    })
                });
                (ok, "sum of Jack probabilities is 1 for n<=8".into())
            }),
        ),
        (
            "jack",
            "kerov-normalization",
            Box::new(move || {
                let mut worst = String::new();
                for a in alpha_grid() {
                    for n in 1..=7 {
                        for p in jack_model::enumerate_partitions(n).unwrap() {
                            let total = kerov_weights(&p, &a, fault).total();
                            if !total.is_one() && worst.is_empty() {
                                worst = format!("{p} alpha={a} total={total}");
                            }
                        }
                    }
                }
                let detail = format!("transition weights sum to 1 for |p|<=7 {worst}");
                (worst.is_empty(), detail.trim_end().to_string())
            }),
        ),
        (
            "jack",
            "kerov-consistency",
            Box::new(move || {
                let ok = alpha_grid().iter().all(|a| {
                    (1..=7).all(|n| {
                        let jack: BTreeMap<Partition, BigRational> =
                            jack_model::enumerate_partitions(n)
                                .unwrap()
                                .into_iter()
                                .map(|p| {
                                    let q = jack_model::jack_probability(&p, a);
                                    (p, q)
                                })
                                .collect();
                        composed_law(n, a, fault) == jack
                    })
                });
                (
                    ok,
                    "composed growth law equals the Jack law for n<=7".into(),
                )
            }),
        ),
        (
            "jack",
            "t-moments",
            Box::new(|| {
                let ok = alpha_grid().iter().all(|a| {
                    (2..=8).all(|n| {
                        jack_model::enumerate_partitions(n - 1)
                            .unwrap()
                            .iter()
                            .all(|p| {
                                let m = jack_model::conditional_t_moments(p, a, n).unwrap();
                                m.content_mean.is_zero() && m.second == ratio(2, i64::from(n))
                            })
                    })
                });
                (ok, "E[T|L]=0 and E[T^2|L]=2/n for n<=8".into())
            }),
        ),
        (
            "jack",
            "content-moments",
            Box::new(|| {
                let ok = alpha_grid()
                    .iter()
                    .all(|a| (1..=10).all(|n| jack_model::check_jack_moments(n, a).unwrap().holds));
                (ok, "EY=0, EY^2=alpha n(n-1)/2 for n<=10".into())
            }),
        ),
        (
            "jack",
            "zero-bias-identity",
            Box::new(|| {
                let mut worst = 0.0f64;
                for a in alpha_grid() {
                    for n in 2..=6 {
                        for k in 0..=5 {
                            let r = jack_model::check_zero_bias_identity(
                                n,
                                &a,
                                &Polynomial::monomial(k),
                            )
                            .unwrap();
                            worst = worst.max(r.max_abs_err);
                        }
                    }
                }
                (
                    worst <= jack_model::ZERO_BIAS_TOL,
                    format!("max error {worst:e} for n<=6, k<=5"),
                )
            }),
        ),
        (
            "er",
            "stein-identity",
            Box::new(|| {
                let params = ErParams::new(4, 2).unwrap();
                let ok = (1..=3).all(|k| {
                    er_model::check_stein_identity_exhaustive(params, &Polynomial::monomial(k))
                        .unwrap()
                        .checked()
                        .is_some_and(|r| r.equal)
                });
                (
                    ok,
                    "exact coupling identity at (4,2) for x, x^2, x^3".into(),
                )
            }),
        ),
        (
            "er",
            "moments-enumeration",
            Box::new(|| {
                let mut ok = true;
                for n in 3..=7u64 {
                    for m in 1..er_model::slot_count(n) {
                        let p = ErParams::new(n, m).unwrap();
                        let law = er_model::exact_isolated_law(p).unwrap();
                        let e1 = law
                            .iter()
                            .enumerate()
                            .fold(BigRational::zero(), |s, (y, q)| s + q * int(y as i64));
                        let e2 = law
                            .iter()
                            .enumerate()
                            .fold(BigRational::zero(), |s, (y, q)| s + q * int((y * y) as i64));
                        let mo = er_model::exact_moments(p);
                        ok &= mo.mu == e1 && mo.sigma2 == &e2 - &e1 * &e1;
                    }
                }
                (ok, "closed-form moments equal enumeration for n<=7".into())
            }),
        ),
        (
            "core",
            "hypergeometric-bounds",
            Box::new(|| {
                let mut ok = true;
                for big_n in 1..=30u64 {
                    for m in 0..=big_n {
                        for n in 0..=big_n {
                            let h = HypergeometricParams::new(big_n, m, n).unwrap();
                            ok &= [0.5, 1.0, 3.0]
                                .iter()
                                .all(|&t| exactnum::check_tail_bound(&h, t).unwrap().holds);
                            ok &=
                                (1..=4).all(|k| exactnum::check_moment_bound(&h, k).unwrap().holds);
                            ok &= exactnum::check_lemma3(&h).holds;
                        }
                    }
                }
                (
                    ok,
                    "tail, moment and zero-probability bounds for N<=30".into(),
                )
            }),
        ),
        (
            "core",
            "psi-bounds",
            Box::new(|| {
                let ok = (0..=900).all(|i| {
                    let x = 10f64.powf(-6.0 + f64::from(i) / 100.0);
                    exactnum::check_lemma4(x).unwrap().holds
                });
                (
                    ok,
                    "min(x^2,1)/4 <= psi(x) <= min(x^2,2)/2 on [1e-6, 1e3]".into(),
                )
            }),
        ),
        (
            "er",
            "negative-correlation",
            Box::new(|| {
                let ok = (3..=30u64).all(|n| {
                    (1..er_model::slot_count(n)).all(|m| {
                        let r = er_model::check_negative_correlation(ErParams::new(n, m).unwrap());
                        r.holds && r.variance_bound
                    })
                });
                (
                    ok,
                    "isolation events negatively correlated, sigma2 <= min(mu, 2m), n<=30".into(),
                )
            }),
        ),
        (
            "er",
            "moment-sandwich",
            Box::new(|| {
                let ok = (7..=60u64).all(|n| {
                    (1..=(n * n - 6 * n) / 4).all(|m| {
                        let r = er_model::check_lemma6(ErParams::new(n, m).unwrap());
                        r.holds_mu && r.holds_sigma
                    })
                });
                (ok, "mean and variance sandwiches for 7<=n<=60".into())
            }),
        ),
        (
            "core",
            "efron-stein",
            Box::new(|| {
                let c = stein_core::check_efron_stein(|_, _| int(1), 3, 1).unwrap();
                let i =
                    stein_core::check_efron_stein(|p, _| int(i64::from(p[0] == 0)), 3, 0).unwrap();
                let j = stein_core::check_efron_stein(|p, s| int((p[0] + s[0][0]) as i64), 4, 1)
                    .unwrap();
                (
                    c.holds && i.holds && i.var == ratio(2, 9) && j.holds,
                    "exhaustive variance bound for N<=4".into(),
                )
            }),
        ),
        (
            "core",
            "recursion",
            Box::new(|| {
                let spec = RecursionSpec::new(0.5, 1.0).unwrap();
                let closed = (2..=40).all(|n| {
                    let a = stein_core::recursion_closed_form(&spec, n);
                    (a - (0.5 * stein_core::recursion_closed_form(&spec, n - 1) + 1.0)).abs()
                        < 1e-14
                });
                let sol =
                    stein_core::recursion_bound_solve(&FiniteKernel::chain(50, 0.5, 1.0), &spec)
                        .unwrap();
                (
                    closed && sol.sup_ok,
                    format!("closed form and 50-state chain, sup {}", sol.sup),
                )
            }),
        ),
        (
            "core",
            "two-point-zero-bias",
            Box::new(|| {
                let r = stein_core::zero_bias_two_point(3f64.sqrt(), -1.0 / 3f64.sqrt()).unwrap();
                (
                    r.max_identity_error < 1e-12,
                    format!("identity error {:e}", r.max_identity_error),
                )
            }),
        ),
        (
            "core",
            "size-bias",
            Box::new(|| {
                let h = HypergeometricParams::new(10, 4, 3).unwrap();
                let tilted = exactnum::hyp_law(&HypergeometricParams::new(9, 3, 2).unwrap());
                let mut shifted = vec![BigRational::zero()];
                shifted.extend(tilted);
                let r =
                    stein_core::check_size_bias(&law_of(exactnum::hyp_law(&h)), &law_of(shifted))
                        .unwrap();
                (
                    r.holds,
                    "1 + Hyp(9,3,2) is the size-bias law of Hyp(10,4,3)".into(),
                )
            }),
        ),
        (
            "core",
            "stein-pair",
            Box::new(|| {
                let half = ratio(1, 4);
                let atoms = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
                    .into_iter()
                    .map(|(a, b)| ((int(a), int(b)), half.clone()))
                    .collect();
                let r = stein_core::check_stein_pair(&DiscreteLaw::new(atoms).unwrap(), &int(1))
                    .unwrap();
                (
                    r.is_stein_pair,
                    "independent symmetric signs form a 1-Stein pair".into(),
                )
            }),
        ),
    ]
}

pub fn verify(fault: bool) -> Report {
    let results: Vec<(&'static str, &'static str, bool, String)> = verify_checks(fault)
        .par_iter()
        .map(|(model, id, run)| {
            let (ok, detail) = run();
            (*model, *id, ok, detail)
        })
        .collect();
    let mut report = Report::default();
    for (model, id, ok, detail) in results {
        report.check(Row::new(model, id, "check", detail).holds(ok));
    }
    report
}

pub fn recursion(q: f64, c: f64, steps: u32, states: usize) -> Result<Report, CliError> {
    let spec = RecursionSpec::new(q, c).map_err(params_error)?;
    if steps == 0 || states == 0 {
        return Err(CliError::Params("steps and states must be positive".into()));
    }
    let tag = format!("q={q};c={c}");
    let mut out = Report::default();
    out.push(Row::new("core", tag.clone(), "limit", spec.limit()));
    for k in 1..=steps {
        out.push(Row::new(
            "core",
            tag.clone(),
            format!("a_{k}"),
            stein_core::recursion_closed_form(&spec, k),
        ));
    }
    let scale = (spec.limit() + 1.0) * (2.0 * q).max(1.0).powi(states as i32 - 1);
    let kernel = FiniteKernel::chain(states, q, scale);
    let sol = stein_core::recursion_bound_solve(&kernel, &spec).map_err(params_error)?;
    let chain = format!("{tag};states={states}");
    out.check(
        Row::new("core", chain.clone(), "chain_sup", sol.sup)
            .bound(spec.limit())
            .holds(sol.sup_ok),
    );
    out.check(Row::new("core", chain, "a_below_rate", sol.a_below_rate).holds(sol.a_below_rate));
    Ok(out)
}

pub fn hyp(
    population: u64,
    draws: u64,
    special: u64,
    offsets: &[f64],
    k: u32,
) -> Result<Report, CliError> {
    let h = HypergeometricParams::new(population, draws, special).map_err(params_error)?;
    let tag = format!("N={population};m={draws};n={special}");
    let row = |q: String, v: &dyn ToString| Row::new("core", tag.clone(), q, v.to_string());
    let mut out = Report::default();
    for (j, p) in exactnum::hyp_law(&h).iter().enumerate() {
        out.push(row(format!("pmf_{j}"), p));
    }
    out.push(row("mean".into(), &h.mean()));
    out.push(row(format!("moment_{k}"), &exactnum::hyp_moment(&h, k)));
    let l3 = exactnum::check_lemma3(&h);
    let lower = l3.lower.map_or("none".to_string(), |x| x.to_string());
    out.check(
        row("p0".into(), &l3.p0)
            .bound(format!("[{lower},{}]", l3.upper))
            .holds(l3.holds),
    );
    for &t in offsets {
        let b = exactnum::check_tail_bound(&h, t).map_err(params_error)?;
        out.check(
            row(format!("tail_t={t}"), &b.lhs)
                .bound(b.rhs)
                .holds(b.holds),
        );
    }
    let b = exactnum::check_moment_bound(&h, k).map_err(params_error)?;
    out.check(
        row(format!("moment_bound_{k}"), &b.lhs)
            .bound(b.rhs)
            .holds(b.holds),
    );
    Ok(out)
}
