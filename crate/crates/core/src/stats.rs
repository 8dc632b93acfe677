//! Distribution functions and hypothesis tests used by the validators and
//! the experiment harness.

use rand::seq::SliceRandom;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::{beta::beta_reg, erf::erfc, gamma};

use crate::ensemble::{rng_from_seed, Seed};
use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(prob: f64) -> f64 {
    Normal::standard().inverse_cdf(prob)
}

/// `P(χ²_dof ≤ x)` through the regularized lower incomplete gamma function.
pub fn chi2_cdf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma::gamma_lr(0.5 * dof, 0.5 * x)
}

/// `P(χ²_dof > x)`.
pub fn chi2_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma::gamma_ur(0.5 * dof, 0.5 * x)
}

/// CDF of the first coordinate of a uniform point on the unit sphere of `ℝ^k`
/// (`k ≥ 2`), using `z₁² ~ Beta(1/2, (k−1)/2)`.
pub fn sphere_marginal_cdf(t: f64, k: usize) -> f64 {
    assert!(k >= 2, "sphere marginal needs k >= 2");
    if t <= -1.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let mass = beta_reg(0.5, 0.5 * (k as f64 - 1.0), t * t);
    if t < 0.0 {
        0.5 * (1.0 - mass)
    } else {
        0.5 * (1.0 + mass)
    }
}

/// Kolmogorov distribution survival function `Q(λ) = 2 Σ (−1)^{j−1} e^{−2j²λ²}`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let s = effective_n.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::Validation("KS test needs at least one sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    });
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, n) })
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Validation("KS test needs two non-empty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, na * nb / (na + nb)) })
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// Standard deviation of a frequency over `trials` Bernoulli(`prob`) draws,
/// with `prob` clamped to `[0, 1]`.
pub fn binomial_sd(prob: f64, trials: u64) -> f64 {
    let b = prob.clamp(0.0, 1.0);
    (b * (1.0 - b) / trials as f64).sqrt()
}

/// Pearson χ² statistic and p-value for independence in an `r × c` table.
pub fn contingency_chi2(table: &[Vec<u64>]) -> Result<(f64, f64)> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 || table.iter().any(|r| r.len() != cols) {
        return Err(Error::Validation("contingency table must be at least 2 x 2 and rectangular".into()));
    }
    let total: u64 = table.iter().flatten().sum();
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..cols).map(|c| table.iter().map(|r| r[c]).sum::<u64>() as f64).collect();
    if row_sums.iter().chain(&col_sums).any(|&s| s == 0.0) {
        return Err(Error::Validation("contingency table has an empty row or column".into()));
    }
    let n = total as f64;
    let mut stat = 0.0;
    for (r, row) in table.iter().enumerate() {
        for (c, &obs) in row.iter().enumerate() {
            let expected = row_sums[r] * col_sums[c] / n;
            stat += (obs as f64 - expected).powi(2) / expected;
        }
    }
    let dof = ((rows - 1) * (cols - 1)) as f64;
    Ok((stat, chi2_sf(stat, dof)))
}

/// Cochran–Armitage test for a linear trend in proportions.
///
/// Returns the z statistic; positive values indicate proportions increasing
/// with `scores`.
pub fn cochran_armitage(successes: &[u64], trials: &[u64], scores: &[f64]) -> Result<f64> {
    if successes.len() != trials.len() || trials.len() != scores.len() || trials.len() < 2 {
        return Err(Error::Validation("trend test needs matching vectors of length >= 2".into()));
    }
    let n: f64 = trials.iter().map(|&t| t as f64).sum();
    let r: f64 = successes.iter().map(|&s| s as f64).sum();
    let pbar = r / n;
    let mut num = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for ((&s, &t), &x) in successes.iter().zip(trials).zip(scores) {
        num += x * (s as f64 - t as f64 * pbar);
        s1 += t as f64 * x * x;
        s2 += t as f64 * x;
    }
    let var = pbar * (1.0 - pbar) * (s1 - s2 * s2 / n);
    if !(var > 0.0) {
        return Err(Error::Validation("trend test has zero variance".into()));
    }
    Ok(num / var.sqrt())
}

pub fn pearson_correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Ranks starting at 1, ties broken by position.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut r = vec![0.0; values.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = (rank + 1) as f64;
    }
    r
}

/// Two-sided permutation p-value for `|corr(x, y)|`, with the add-one correction.
pub fn permutation_correlation_test(x: &[f64], y: &[f64], permutations: usize, seed: Seed) -> (f64, f64) {
    let observed = pearson_correlation(x, y);
    let mut rng = rng_from_seed(seed);
    let mut shuffled = y.to_vec();
    let mut exceed = 0usize;
    for _ in 0..permutations {
        shuffled.shuffle(&mut rng);
        if pearson_correlation(x, &shuffled).abs() >= observed.abs() {
            exceed += 1;
        }
    }
    (observed, (exceed + 1) as f64 / (permutations + 1) as f64)
}
