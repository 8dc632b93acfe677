//! Monte Carlo validators for the random-matrix and concentration lemmas that
//! the recovery guarantees rest on.
//!
//! Every validator is a pure function of its parameters, trial count and
//! seed. Trial `t` draws from `derive_seed(seed, t, stream::AUX)`; per-trial
//! outputs are collected in trial order, so results do not depend on the
//! number of worker threads.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::{derive_seed, gaussian_matrix, rng_from_seed, stream, Seed};
use crate::error::{Error, Result};
use crate::stats::{
    binomial_sd, chi2_cdf, chi2_sf, contingency_chi2, ks_one_sample, ks_two_sample, normal_quantile,
    permutation_correlation_test, ranks, sphere_marginal_cdf, wilson_interval,
};

/// Significance level of every hypothesis test.
pub const TEST_LEVEL: f64 = 0.01;
/// Binomial standard deviations allowed above a one-sided tail bound.
pub const TAIL_SIGMAS: f64 = 3.0;

/// How a sub-check turns its statistic and threshold into a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// pass iff statistic ≤ threshold
    AtMost,
    /// pass iff statistic > threshold
    Above,
}

impl Rule {
    pub fn apply(self, statistic: f64, threshold: f64) -> bool {
        match self {
            Rule::AtMost => statistic <= threshold,
            Rule::Above => statistic > threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubCheck {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub rule: Rule,
    pub passed: bool,
    /// Reported but excluded from the overall verdict.
    pub informational: bool,
}

impl SubCheck {
    fn new(name: impl Into<String>, statistic: f64, threshold: f64, rule: Rule) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            rule,
            passed: rule.apply(statistic, threshold),
            informational: false,
        }
    }

    fn info(mut self) -> Self {
        self.informational = true;
        self
    }

    /// Empirical one-sided tail frequency against `bound + 3σ`, with the
    /// bound clamped to `[0, 1]` for σ and for the comparison.
    fn tail(name: impl Into<String>, hits: u64, trials: u64, bound: f64) -> Self {
        let b = bound.clamp(0.0, 1.0);
        let threshold = b + TAIL_SIGMAS * binomial_sd(b, trials);
        Self::new(name, hits as f64 / trials as f64, threshold, Rule::AtMost)
    }

    fn ks(name: impl Into<String>, p_value: f64, level: f64) -> Self {
        Self::new(name, p_value, level, Rule::Above)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationResult {
    pub lemma: String,
    pub params: String,
    pub trials: u64,
    pub seed: Seed,
    pub checks: Vec<SubCheck>,
    /// All non-informational sub-checks pass.
    pub passed: bool,
}

impl ValidationResult {
    fn new(lemma: &str, params: String, trials: u64, seed: Seed, checks: Vec<SubCheck>) -> Self {
        let passed = checks.iter().filter(|c| !c.informational).all(|c| c.passed);
        Self { lemma: lemma.to_string(), params, trials, seed, checks, passed }
    }
}

impl fmt::Display for ValidationResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let op = match c.rule {
                Rule::AtMost => "<=",
                Rule::Above => ">",
            };
            let verdict = match (c.passed, c.informational) {
                (_, true) => "info",
                (true, false) => "PASS",
                (false, false) => "FAIL",
            };
            writeln!(
                f,
                "{:<9} {:<34} {:<44} {:>12.5e} {:<2} {:<12.5e} {}",
                self.lemma, self.params, c.name, c.statistic, op, c.threshold, verdict
            )?;
        }
        Ok(())
    }
}

fn trial_rng(seed: Seed, trial: u64) -> rand_chacha::ChaCha20Rng {
    rng_from_seed(derive_seed(seed, trial, stream::AUX))
}

fn per_trial<T: Send>(trials: u64, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..trials).into_par_iter().map(f).collect()
}

fn gaussian_block(n: usize, k: usize, seed: Seed, trial: u64) -> DMatrix<f64> {
    gaussian_matrix(n, k, derive_seed(seed, trial, stream::MATRIX)).expect("positive dimensions").matrix().clone()
}

fn standard_normals(rng: &mut impl Rng, len: usize) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| StandardNormal.sample(rng)))
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::domain(msg()))
    }
}

fn require_trials(trials: u64) -> Result<()> {
    require(trials >= 1, || "at least one trial is required".into())
}

type SignDraw = (Vec<f64>, f64, f64, bool);

/// Off-diagonal signs of a row of an inverse Wishart matrix are i.i.d.
/// uniform on {−1, 1} and independent of the diagonal entry and of the
/// off-diagonal magnitudes.
pub fn validate_sign_rademacher(n: usize, k: usize, trials: u64, seed: Seed) -> Result<ValidationResult> {
    require(k >= 2 && n > k, || format!("need k >= 2 and n > k, got n = {n}, k = {k}"))?;
    require_trials(trials)?;
    // (off-diagonal signs, B11, |B12|, resampled)
    let draws: Vec<Option<SignDraw>> = per_trial(trials, |t| {
        let a = gaussian_block(n, k, seed, t);
        let b = a.tr_mul(&a).cholesky()?.inverse();
        let signs: Vec<f64> = (1..k).map(|j| b[(0, j)].signum()).collect();
        let diag_positive = (0..k).all(|i| b[(i, i)] > 0.0);
        Some((signs, b[(0, 0)], b[(0, 1)].abs(), diag_positive))
    });
    let singular = draws.iter().filter(|d| d.is_none()).count() as u64;
    if singular * 100 > trials {
        return Err(Error::Validation(format!("{singular} of {trials} sampled Gram matrices were singular")));
    }
    let draws: Vec<_> = draws.into_iter().flatten().collect();
    let m = draws.len() as u64;
    let mut checks = Vec::new();

    checks.push(SubCheck::new(
        "diagonal entries positive",
        draws.iter().filter(|d| !d.3).count() as f64,
        0.0,
        Rule::AtMost,
    ));
    // (a) balance, Bonferroni over the k−1 entries
    let z = normal_quantile(1.0 - TEST_LEVEL / (2.0 * (k - 1) as f64));
    for j in 0..k - 1 {
        let plus = draws.iter().filter(|d| d.0[j] > 0.0).count() as u64;
        let (lo, hi) = wilson_interval(plus, m, z);
        let dist = if (lo..=hi).contains(&0.5) { 0.0 } else { (0.5 - lo).abs().min((0.5 - hi).abs()) };
        checks.push(SubCheck::new(format!("P(sign B[1,{}] = +1) CI covers 1/2", j + 2), dist, 0.0, Rule::AtMost));
    }
    // (b) pairwise independence, Bonferroni over pairs
    let pairs = (k - 1) * (k - 2) / 2;
    for j in 0..k - 1 {
        for l in j + 1..k - 1 {
            let mut table = vec![vec![0u64; 2]; 2];
            for d in &draws {
                table[usize::from(d.0[j] > 0.0)][usize::from(d.0[l] > 0.0)] += 1;
            }
            let (_, p) = contingency_chi2(&table)?;
            checks.push(SubCheck::new(
                format!("signs B[1,{}], B[1,{}] independent", j + 2, l + 2),
                p,
                TEST_LEVEL / pairs as f64,
                Rule::Above,
            ));
        }
    }
    // (c) independence from the diagonal entry and from the magnitude
    let sign1: Vec<f64> = draws.iter().map(|d| d.0[0]).collect();
    let diag_ranks = ranks(&draws.iter().map(|d| d.1).collect::<Vec<_>>());
    let mag_ranks = ranks(&draws.iter().map(|d| d.2).collect::<Vec<_>>());
    let (_, p_diag) = permutation_correlation_test(&sign1, &diag_ranks, 999, derive_seed(seed, 0, stream::NOISE));
    let (_, p_mag) = permutation_correlation_test(&sign1, &mag_ranks, 999, derive_seed(seed, 1, stream::NOISE));
    checks.push(SubCheck::new("sign B[1,2] independent of B[1,1]", p_diag, TEST_LEVEL / 2.0, Rule::Above));
    checks.push(SubCheck::new("sign B[1,2] independent of |B[1,2]|", p_mag, TEST_LEVEL / 2.0, Rule::Above));
    checks.push(SubCheck::new("singular resamples", singular as f64, trials as f64 / 100.0, Rule::AtMost).info());

    Ok(ValidationResult::new("lemma2", format!("n={n} k={k}"), trials, seed, checks))
}

/// Tails of the extreme eigenvalues of `A^T A` for `A` with `N(0, 1/n)` entries.
pub fn validate_eigenvalue_tails(n: usize, k: usize, t: f64, trials: u64, seed: Seed) -> Result<ValidationResult> {
    require(t > 0.0 && t.is_finite(), || format!("t must be positive, got {t}"))?;
    require(k >= 1 && k < n, || format!("need 1 <= k < n, got n = {n}, k = {k}"))?;
    require_trials(trials)?;
    let r = (k as f64 / n as f64).sqrt();
    let upper = (1.0 + r + t).powi(2);
    let lower_base = 1.0 - r - t;
    let lower = lower_base.powi(2);
    let extremes: Vec<(f64, f64)> = per_trial(trials, |tr| {
        let a = gaussian_block(n, k, seed, tr);
        let ev = a.tr_mul(&a).symmetric_eigenvalues();
        (ev.max(), ev.min())
    });
    let bound = (-(n as f64) * t * t / 2.0).exp();
    let hi_hits = extremes.iter().filter(|e| e.0 >= upper).count() as u64;
    // (1 − √(k/n) − t)² is only a meaningful lower threshold while the base is positive
    let lo_hits = if lower_base > 0.0 { extremes.iter().filter(|e| e.1 <= lower).count() as u64 } else { 0 };
    let mut checks = vec![
        SubCheck::tail("P(lambda_max >= (1+sqrt(k/n)+t)^2)", hi_hits, trials, bound),
        SubCheck::tail("P(lambda_min <= (1-sqrt(k/n)-t)^2)", lo_hits, trials, bound),
    ];
    if k == 1 {
        // λ = ‖a‖² with nλ ~ χ²_n: compare against the exact tails
        let nf = n as f64;
        let exact_hi = chi2_sf(nf * upper, nf);
        let exact_lo = if lower_base > 0.0 { chi2_cdf(nf * lower, nf) } else { 0.0 };
        for (name, hits, exact) in
            [("upper tail matches chi2_n", hi_hits, exact_hi), ("lower tail matches chi2_n", lo_hits, exact_lo)]
        {
            let freq = hits as f64 / trials as f64;
            let tol = 4.0 * binomial_sd(exact, trials) + 1.0 / trials as f64;
            checks.push(SubCheck::new(name, (freq - exact).abs(), tol, Rule::AtMost));
        }
    }
    Ok(ValidationResult::new("lemma3", format!("n={n} k={k} t={t}"), trials, seed, checks))
}

/// `P(‖(C^T C)^{-1} S‖∞ > 1 + c√b) ≤ k p^{−1.28} + 2 e^{−nb(0.75√2−1)²/(4 ln p)}`
/// with `c = 4`, and with the tightened `c = 2.7` once `ln p / b ≥ 16.2`.
pub fn validate_projected_sign_supnorm(
    n: usize,
    p: usize,
    b: f64,
    trials: u64,
    seed: Seed,
) -> Result<ValidationResult> {
    require(p >= 1212, || format!("the lemma needs p >= 1212, got {p}"))?;
    require(b > 0.0 && b <= 1.0, || format!("b must lie in (0, 1], got {b}"))?;
    let ln_p = (p as f64).ln();
    require(ln_p / b >= 7.08, || format!("the proof needs ln(p)/b >= 7.08, got {:.4}", ln_p / b))?;
    let k = (n as f64 * b / (2.0 * ln_p)).floor() as usize;
    require(k >= 1, || format!("k = floor(nb/(2 ln p)) must be at least 1 (n = {n}, b = {b}, p = {p})"))?;
    require(k < n, || format!("k = {k} must be below n = {n}"))?;
    require_trials(trials)?;

    let norms: Vec<f64> = per_trial(trials, |t| {
        let c = gaussian_block(n, k, seed, t);
        let mut rng = trial_rng(seed, t);
        let s = DVector::from_iterator(k, (0..k).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }));
        match c.tr_mul(&c).cholesky() {
            Some(ch) => ch.solve(&s).amax(),
            None => f64::INFINITY,
        }
    });
    let cst = 0.75 * std::f64::consts::SQRT_2 - 1.0;
    let bound = k as f64 * (p as f64).powf(-1.28) + 2.0 * (-(n as f64) * b * cst * cst / (4.0 * ln_p)).exp();
    let count_above = |level: f64| norms.iter().filter(|&&v| v > level).count() as u64;
    let mut checks =
        vec![SubCheck::tail("P(|(C^T C)^-1 S|_inf > 1 + 4 sqrt b)", count_above(1.0 + 4.0 * b.sqrt()), trials, bound)];
    let largest = norms.iter().copied().fold(0.0, f64::max);
    checks.push(
        SubCheck::new("max |(C^T C)^-1 S|_inf vs 1 + 4 sqrt b", largest, 1.0 + 4.0 * b.sqrt(), Rule::AtMost).info(),
    );
    if ln_p / b >= 16.2 {
        checks.push(SubCheck::tail(
            "P(|(C^T C)^-1 S|_inf > 1 + 2.7 sqrt b)",
            count_above(1.0 + 2.7 * b.sqrt()),
            trials,
            bound,
        ));
    }
    if k == 1 {
        // scalar case: 1/‖c‖² > 1 + 4√b  ⟺  n‖c‖² < n/(1 + 4√b) with n‖c‖² ~ χ²_n
        let exact = chi2_cdf(n as f64 / (1.0 + 4.0 * b.sqrt()), n as f64);
        let freq = count_above(1.0 + 4.0 * b.sqrt()) as f64 / trials as f64;
        let tol = 4.0 * binomial_sd(exact, trials) + 1.0 / trials as f64;
        checks.push(SubCheck::new("k = 1 frequency matches chi2_n", (freq - exact).abs(), tol, Rule::AtMost));
    }
    Ok(ValidationResult::new("lemma4", format!("n={n} p={p} b={b} k={k}"), trials, seed, checks))
}

/// `C^+ w / ‖C^+ w‖` is uniform on the sphere when `w` is independent of `C`.
pub fn validate_rotation_invariance(n: usize, k: usize, trials: u64, seed: Seed) -> Result<ValidationResult> {
    require(k >= 2 && k < n, || format!("need 2 <= k < n, got n = {n}, k = {k}"))?;
    require_trials(trials)?;
    // a fixed w is trivially independent of C
    let w = DVector::from_fn(n, |i, _| if i % 3 == 0 { 1.0 } else { -0.5 });
    let directions: Vec<DVector<f64>> = per_trial(trials, |t| {
        let c = gaussian_block(n, k, seed, t);
        let z = c.tr_mul(&c).cholesky().map(|ch| ch.solve(&c.tr_mul(&w))).unwrap_or_else(|| DVector::zeros(k));
        let norm = z.norm();
        if norm > 0.0 {
            z / norm
        } else {
            z
        }
    });
    let first: Vec<f64> = directions.iter().map(|d| d[0]).collect();
    let ks = ks_one_sample(&first, |x| sphere_marginal_cdf(x, k))?;
    // a fixed random rotation leaves the law unchanged
    let mut rng = rng_from_seed(derive_seed(seed, 0, stream::NOISE));
    let g = DMatrix::from_fn(k, k, |_, _| StandardNormal.sample(&mut rng));
    let u = g.qr().q();
    let rotated: Vec<f64> = directions.iter().map(|d| u.row(0).dot(&d.transpose())).collect();
    let ks_rot = ks_one_sample(&rotated, |x| sphere_marginal_cdf(x, k))?;
    let ks_pair = ks_two_sample(&first, &rotated)?;
    let checks = vec![
        SubCheck::ks("KS first coordinate vs sphere marginal", ks.p_value, TEST_LEVEL),
        SubCheck::ks("KS rotated coordinate vs sphere marginal", ks_rot.p_value, TEST_LEVEL),
        SubCheck::ks("two-sample KS original vs rotated", ks_pair.p_value, TEST_LEVEL),
    ];
    Ok(ValidationResult::new("lemma5", format!("n={n} k={k}"), trials, seed, checks))
}

/// Choice of the fixed vector in [`validate_quadratic_chi2`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadraticVector {
    Ones,
    /// Fresh Rademacher vector per trial, independent of the matrix.
    Rademacher,
}

/// `n‖X‖² / (X^T B^{-1} X)` follows `χ²_{n−k+1}` for `B = A^T A`.
pub fn validate_quadratic_chi2(
    n: usize,
    k: usize,
    vector: QuadraticVector,
    trials: u64,
    seed: Seed,
) -> Result<ValidationResult> {
    require(k >= 1 && k < n, || format!("need 1 <= k < n, got n = {n}, k = {k}"))?;
    require_trials(trials)?;
    let stats: Vec<f64> = per_trial(trials, |t| {
        let a = gaussian_block(n, k, seed, t);
        let mut rng = trial_rng(seed, t);
        let x = match vector {
            QuadraticVector::Ones => DVector::from_element(k, 1.0),
            QuadraticVector::Rademacher => {
                DVector::from_iterator(k, (0..k).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }))
            }
        };
        // X^T B^{-1} X = ‖L^{-1} X‖² with B = L L^T; B^{-1} is never formed
        match a.tr_mul(&a).cholesky() {
            Some(ch) => {
                let y = ch.l().solve_lower_triangular(&x).expect("positive diagonal");
                n as f64 * x.norm_squared() / y.norm_squared()
            }
            None => f64::NAN,
        }
    });
    let dof = (n - k + 1) as f64;
    let ks = ks_one_sample(&stats, |s| chi2_cdf(s, dof))?;
    let mean = stats.iter().sum::<f64>() / trials as f64;
    let sd_mean = (2.0 * dof / trials as f64).sqrt();
    let mut checks = vec![
        SubCheck::ks(format!("KS vs chi2_{}", n - k + 1), ks.p_value, TEST_LEVEL),
        SubCheck::new("|mean - (n-k+1)| within 3 sd", (mean - dof).abs(), 3.0 * sd_mean, Rule::AtMost),
    ];
    if k == 1 {
        let mut rng = rng_from_seed(derive_seed(seed, 0, stream::NOISE));
        let direct: Vec<f64> = (0..trials).map(|_| standard_normals(&mut rng, n).norm_squared()).collect();
        checks.push(SubCheck::ks(
            "two-sample KS vs direct chi2_n",
            ks_two_sample(&stats, &direct)?.p_value,
            TEST_LEVEL,
        ));
    }
    let label = match vector {
        QuadraticVector::Ones => "ones",
        QuadraticVector::Rademacher => "rademacher",
    };
    Ok(ValidationResult::new("lemma6", format!("n={n} k={k} X={label}"), trials, seed, checks))
}

/// Constant in front of the upper χ² tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiUpperConstant {
    /// `1/√(2πkδ)`
    Printed,
    /// `1/(δ√(πk))`
    Corrected,
}

/// Parameter point of a concentration inequality.
#[derive(Debug, Clone, PartialEq)]
pub enum ConcentrationParams {
    /// `P(|x₁| > ε) ≤ 4e^{−kε²/2}` for `x` uniform on the sphere of `ℝ^k`.
    Sphere { k: usize, eps: f64 },
    /// `P(X > (1+δ)k) ≤ c e^{−(k/2)(δ − ln(1+δ))}`, `X ~ χ²_k`.
    ChiUpper { k: usize, delta: f64, constant: ChiUpperConstant },
    /// Lower χ² tail: the printed `e^{−k ln(1−δ)/2}` and the Chernoff bound `e^{(k/2)(δ + ln(1−δ))}`.
    ChiLower { k: usize, delta: f64 },
    /// `P(|Σ εᵢaᵢ| ≥ t‖a‖₂) ≤ e^{−t²/2}` for a Rademacher sequence.
    Rademacher { weights: Vec<f64>, t: f64 },
}

impl ConcentrationParams {
    pub fn lemma(&self) -> &'static str {
        match self {
            Self::Sphere { .. } => "lemma7",
            Self::ChiUpper { .. } => "lemma8",
            Self::ChiLower { .. } => "lemma9",
            Self::Rademacher { .. } => "lemma10",
        }
    }

    fn label(&self) -> String {
        match self {
            Self::Sphere { k, eps } => format!("k={k} eps={eps}"),
            Self::ChiUpper { k, delta, constant } => format!(
                "k={k} delta={delta} const={}",
                match constant {
                    ChiUpperConstant::Printed => "printed",
                    ChiUpperConstant::Corrected => "corrected",
                }
            ),
            Self::ChiLower { k, delta } => format!("k={k} delta={delta}"),
            Self::Rademacher { weights, t } => {
                let shape = if weights.iter().filter(|&&w| w != 0.0).count() == 1 {
                    "single".to_string()
                } else if weights.windows(2).all(|w| w[0] == w[1]) {
                    "flat".to_string()
                } else {
                    "mixed".to_string()
                };
                format!("k={} a={shape} t={t}", weights.len())
            }
        }
    }
}

/// Printed upper χ² tail bound, or the corrected one.
pub fn chi_upper_bound(k: usize, delta: f64, constant: ChiUpperConstant) -> f64 {
    let kf = k as f64;
    let c = match constant {
        ChiUpperConstant::Printed => 1.0 / (2.0 * std::f64::consts::PI * kf * delta).sqrt(),
        ChiUpperConstant::Corrected => 1.0 / (delta * (std::f64::consts::PI * kf).sqrt()),
    };
    c * (-0.5 * kf * (delta - delta.ln_1p())).exp()
}

pub fn validate_concentration(params: &ConcentrationParams, trials: u64, seed: Seed) -> Result<ValidationResult> {
    require_trials(trials)?;
    let checks = match params {
        ConcentrationParams::Sphere { k, eps } => {
            let (k, eps) = (*k, *eps);
            require(k >= 1 && eps > 0.0, || format!("need k >= 1 and eps > 0, got k = {k}, eps = {eps}"))?;
            let hits = per_trial(trials, |t| {
                let g = standard_normals(&mut trial_rng(seed, t), k);
                (g[0] / g.norm()).abs() > eps
            });
            let bound = 4.0 * (-(k as f64) * eps * eps / 2.0).exp();
            vec![SubCheck::tail("P(|x_1| > eps)", hits.iter().filter(|&&h| h).count() as u64, trials, bound)]
        }
        ConcentrationParams::ChiUpper { k, delta, constant } => {
            let (k, delta) = (*k, *delta);
            require(k >= 1 && delta > 0.0, || format!("need k >= 1 and delta > 0, got k = {k}, delta = {delta}"))?;
            let level = (1.0 + delta) * k as f64;
            let hits = per_trial(trials, |t| standard_normals(&mut trial_rng(seed, t), k).norm_squared() > level);
            let bound = chi_upper_bound(k, delta, *constant);
            let exact = chi2_sf(level, k as f64);
            vec![
                SubCheck::tail("P(X > (1+delta)k)", hits.iter().filter(|&&h| h).count() as u64, trials, bound),
                SubCheck::new("exact tail <= bound", exact, bound, Rule::AtMost).info(),
            ]
        }
        ConcentrationParams::ChiLower { k, delta } => {
            let (k, delta) = (*k, *delta);
            require(k >= 1 && delta > 0.0 && delta < 1.0, || {
                format!("need k >= 1 and 0 < delta < 1, got k = {k}, delta = {delta}")
            })?;
            let level = (1.0 - delta) * k as f64;
            let hits = per_trial(trials, |t| standard_normals(&mut trial_rng(seed, t), k).norm_squared() < level);
            let count = hits.iter().filter(|&&h| h).count() as u64;
            let kf = k as f64;
            let printed = (-kf * (1.0 - delta).ln() / 2.0).exp();
            let chernoff = (0.5 * kf * (delta + (1.0 - delta).ln())).exp();
            vec![
                SubCheck::tail("P(X < (1-delta)k) vs printed bound", count, trials, printed),
                SubCheck::tail("P(X < (1-delta)k) vs Chernoff bound", count, trials, chernoff),
                SubCheck::new("exact tail <= Chernoff bound", chi2_cdf(level, kf), chernoff, Rule::AtMost).info(),
            ]
        }
        ConcentrationParams::Rademacher { weights, t } => {
            let t = *t;
            let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
            require(!weights.is_empty() && norm > 0.0 && t > 0.0, || "need nonzero weights and t > 0".into())?;
            let level = t * norm;
            let hits = per_trial(trials, |tr| {
                let mut rng = trial_rng(seed, tr);
                let s: f64 = weights.iter().map(|w| if rng.random::<bool>() { *w } else { -*w }).sum();
                s.abs() >= level
            });
            let bound = (-t * t / 2.0).exp();
            vec![SubCheck::tail("P(|sum e_i a_i| >= t |a|)", hits.iter().filter(|&&h| h).count() as u64, trials, bound)]
        }
    };
    Ok(ValidationResult::new(params.lemma(), params.label(), trials, seed, checks))
}

/// One point of the default validation grid.
#[derive(Debug, Clone, PartialEq)]
pub enum GridPoint {
    SignRademacher { n: usize, k: usize },
    EigenvalueTails { n: usize, k: usize, t: f64 },
    ProjectedSignSupnorm { n: usize, p: usize, b: f64 },
    RotationInvariance { n: usize, k: usize },
    QuadraticChi2 { n: usize, k: usize, vector: QuadraticVector },
    Concentration(ConcentrationParams),
}

impl GridPoint {
    pub fn run(&self, trials: u64, seed: Seed) -> Result<ValidationResult> {
        match self {
            Self::SignRademacher { n, k } => validate_sign_rademacher(*n, *k, trials, seed),
            Self::EigenvalueTails { n, k, t } => validate_eigenvalue_tails(*n, *k, *t, trials, seed),
            Self::ProjectedSignSupnorm { n, p, b } => validate_projected_sign_supnorm(*n, *p, *b, trials, seed),
            Self::RotationInvariance { n, k } => validate_rotation_invariance(*n, *k, trials, seed),
            Self::QuadraticChi2 { n, k, vector } => validate_quadratic_chi2(*n, *k, *vector, trials, seed),
            Self::Concentration(c) => validate_concentration(c, trials, seed),
        }
    }
}

/// Default grid as `(point, trials)`.
pub fn default_grid() -> Vec<(GridPoint, u64)> {
    use ConcentrationParams as C;
    use GridPoint as G;
    let flat = |k: usize| vec![1.0; k];
    vec![
        (G::SignRademacher { n: 50, k: 2 }, 10_000),
        (G::SignRademacher { n: 30, k: 4 }, 10_000),
        (G::EigenvalueTails { n: 200, k: 20, t: 0.5 }, 10_000),
        (G::EigenvalueTails { n: 200, k: 20, t: 1e-3 }, 2_000),
        (G::EigenvalueTails { n: 50, k: 1, t: 0.2 }, 10_000),
        (G::ProjectedSignSupnorm { n: 2000, p: 2000, b: 0.5 }, 2_000),
        (G::ProjectedSignSupnorm { n: 2000, p: 32000, b: 0.64 }, 1_000),
        (G::ProjectedSignSupnorm { n: 20, p: 1212, b: 1.0 }, 10_000),
        (G::RotationInvariance { n: 50, k: 2 }, 2_000),
        (G::RotationInvariance { n: 20, k: 19 }, 2_000),
        (G::QuadraticChi2 { n: 100, k: 20, vector: QuadraticVector::Ones }, 2_000),
        (G::QuadraticChi2 { n: 100, k: 20, vector: QuadraticVector::Rademacher }, 2_000),
        (G::QuadraticChi2 { n: 50, k: 1, vector: QuadraticVector::Ones }, 2_000),
        (G::Concentration(C::Sphere { k: 50, eps: 0.5 }), 10_000),
        (G::Concentration(C::ChiUpper { k: 100, delta: 1.0, constant: ChiUpperConstant::Printed }), 10_000),
        (G::Concentration(C::ChiUpper { k: 50, delta: 0.5, constant: ChiUpperConstant::Corrected }), 10_000),
        (G::Concentration(C::ChiLower { k: 50, delta: 0.5 }), 10_000),
        (G::Concentration(C::Rademacher { weights: vec![1.0], t: 1.5 }), 10_000),
        (G::Concentration(C::Rademacher { weights: flat(100), t: 1.0 }), 10_000),
        (G::Concentration(C::Rademacher { weights: flat(100), t: 2.0 }), 10_000),
        (G::Concentration(C::Rademacher { weights: flat(100), t: 3.0 }), 10_000),
    ]
}

/// Runs every grid point; point `i` uses seed `derive_seed(seed, i, AUX)`.
pub fn run_default_grid(seed: Seed) -> Result<Vec<ValidationResult>> {
    default_grid()
        .iter()
        .enumerate()
        .map(|(i, (point, trials))| point.run(*trials, derive_seed(seed, i as u64, stream::AUX)))
        .collect()
}

#[derive(Serialize)]
struct ValidationRow<'a> {
    lemma: &'a str,
    params: &'a str,
    check: &'a str,
    statistic: f64,
    threshold: f64,
    rule: Rule,
    passed: bool,
    informational: bool,
    trials: u64,
    seed: Seed,
}

/// One CSV row per sub-check.
pub fn write_validation_csv(results: &[ValidationResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in results {
        for c in &r.checks {
            w.serialize(ValidationRow {
                lemma: &r.lemma,
                params: &r.params,
                check: &c.name,
                statistic: c.statistic,
                threshold: c.threshold,
                rule: c.rule,
                passed: c.passed,
                informational: c.informational,
                trials: r.trials,
                seed: r.seed,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
