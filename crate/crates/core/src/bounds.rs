//! Closed-form sparsity thresholds, regularization levels and probability
//! lower bounds for exact, compressible and ℓ₂-consistent recovery.
//!
//! All logarithms are natural. Probability bounds keep only their explicit
//! terms and may be negative at small `n`.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::Serialize;

use crate::ensemble::best_k_term;
use crate::error::{Error, Result};

/// Ratio between the minimal magnitude and the regularization level.
pub const MAGNITUDE_FACTOR: f64 = 5.5;
/// Scale of the admissible tail sup-norm, `‖x₀ − x^k‖∞ ≤ 0.8 (1 − √α) Δ ε`.
pub const TAIL_FACTOR: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremBounds {
    pub theorem: u8,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub k: Option<usize>,
    /// `αβn / (2 ln p)`
    pub k_max: f64,
    pub k_max_int: usize,
    pub gamma: f64,
    pub t_min: f64,
    pub delta: Option<f64>,
    pub tail_inf_max: Option<f64>,
    pub l2_bound: Option<f64>,
    /// Explicit probability lower bound; may be negative.
    pub prob_lb: f64,
    /// `1 − ½e^{−0.7√ln n} − 1/(2√(π ln p))`, the leading terms, for theorems 1 and 2.
    pub prob_lb_leading: Option<f64>,
    /// Hypotheses that fail but leave the formulas computable.
    pub warnings: Vec<String>,
}

fn check_unit(name: &str, v: f64, allow_one: bool) -> Result<()> {
    let ok = if allow_one { (0.0..=1.0).contains(&v) } else { (0.0..1.0).contains(&v) };
    if !ok {
        let range = if allow_one { "[0, 1]" } else { "[0, 1)" };
        return Err(Error::domain(format!("{name} must lie in {range}, got {v}")));
    }
    Ok(())
}

fn check_common(n: usize, p: usize, alpha: f64, beta: f64, eps: f64, allow_beta_one: bool) -> Result<()> {
    if n < 1 {
        return Err(Error::domain("n must be at least 1"));
    }
    if p < 2 {
        return Err(Error::domain(format!("p must be at least 2, got {p}")));
    }
    check_unit("alpha", alpha, false)?;
    check_unit("beta", beta, allow_beta_one)?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::domain(format!("eps must be finite and non-negative, got {eps}")));
    }
    if beta < 1.0 {
        let needed = 1.0 / (2.0 * (1.0 - beta.sqrt()));
        if !((p as f64).ln() > needed) {
            return Err(Error::domain(format!(
                "p = {p} violates p > exp(1/(2(1 - sqrt(beta)))) = {:.6e} for beta = {beta}",
                needed.exp()
            )));
        }
    }
    Ok(())
}

/// `αβn / (2 ln p)`.
pub fn sparsity_limit(n: usize, p: usize, alpha: f64, beta: f64) -> f64 {
    alpha * beta * n as f64 / (2.0 * (p as f64).ln())
}

fn noise_scale(n: usize, p: usize) -> f64 {
    (2.0 * (p as f64).ln() / n as f64).sqrt()
}

/// `ε/√(1−α) · √(2 ln p / n)`.
fn base_gamma(n: usize, p: usize, alpha: f64, eps: f64) -> f64 {
    eps / (1.0 - alpha).sqrt() * noise_scale(n, p)
}

/// `2/√(1 + 2√α − 3α) · √(2 ln p / n)`.
pub fn delta_factor(n: usize, p: usize, alpha: f64) -> Result<f64> {
    let denom = 1.0 + 2.0 * alpha.sqrt() - 3.0 * alpha;
    if !(denom > 0.0) {
        return Err(Error::domain(format!(
            "1 + 2 sqrt(alpha) - 3 alpha must be positive, got {denom} at alpha = {alpha}"
        )));
    }
    Ok(2.0 / denom.sqrt() * noise_scale(n, p))
}

fn leading_probability(n: usize, p: usize) -> f64 {
    let ln_n = (n as f64).ln();
    let ln_p = (p as f64).ln();
    1.0 - 0.5 * (-0.7 * ln_n.sqrt()).exp() - 1.0 / (2.0 * (PI * ln_p).sqrt())
}

fn wishart_tail(n: usize, p: usize, alpha: f64) -> f64 {
    let c = 0.75 * std::f64::consts::SQRT_2 - 1.0;
    2.0 * (-(n as f64) * alpha * c * c / (4.0 * (p as f64).ln())).exp()
}

/// Full explicit lower bound for exact recovery evaluated at sparsity `k`.
///
/// The `β`-dependent term is `exp(n (3 − √β) ln β / 16)`; it vanishes as
/// `n → ∞` for every `β < 1`.
pub fn exact_recovery_probability(n: usize, p: usize, alpha: f64, beta: f64, k: usize) -> f64 {
    let nf = n as f64;
    let ln_n = nf.ln();
    let ln_p = (p as f64).ln();
    let gap = 1.0 - 2f64.powf(-0.125) - 1.0 / (2.0 * ln_p).sqrt();
    let extreme = (4.0 * nf.powf(-1.0 / 3.0)).max(8.0 * (-(2.0 * (2.0 * nf).ln()).sqrt()).exp());
    let beta_term = if beta == 0.0 { 0.0 } else { (nf * (3.0 - beta.sqrt()) * beta.ln() / 16.0).exp() };
    1.0 - 0.5 * (-0.7 * ln_n.sqrt()).exp()
        - (-0.5 * nf * gap * gap).exp()
        - extreme
        - k as f64 * (p as f64).powf(-1.28)
        - wishart_tail(n, p, alpha)
        - beta_term
        - 1.0 / (2.0 * (PI * ln_p).sqrt())
}

/// Exact support and sign recovery of strictly sparse signals.
pub fn theorem1_bounds(n: usize, p: usize, alpha: f64, beta: f64, eps: f64) -> Result<TheoremBounds> {
    check_common(n, p, alpha, beta, eps, false)?;
    let k_max = sparsity_limit(n, p, alpha, beta);
    let k_max_int = k_max.floor() as usize;
    let gamma = base_gamma(n, p, alpha, eps);
    Ok(TheoremBounds {
        theorem: 1,
        n,
        p,
        alpha,
        beta,
        eps,
        k: None,
        k_max,
        k_max_int,
        gamma,
        t_min: MAGNITUDE_FACTOR * gamma,
        delta: None,
        tail_inf_max: None,
        l2_bound: None,
        prob_lb: exact_recovery_probability(n, p, alpha, beta, k_max_int),
        prob_lb_leading: Some(leading_probability(n, p)),
        warnings: Vec::new(),
    })
}

/// Recovery of the best `k`-term support of a compressible signal.
pub fn theorem2_bounds(n: usize, p: usize, alpha: f64, beta: f64, eps: f64) -> Result<TheoremBounds> {
    check_common(n, p, alpha, beta, eps, false)?;
    let delta = delta_factor(n, p, alpha)?;
    let k_max = sparsity_limit(n, p, alpha, beta);
    let leading = leading_probability(n, p);
    Ok(TheoremBounds {
        theorem: 2,
        n,
        p,
        alpha,
        beta,
        eps,
        k: None,
        k_max,
        k_max_int: k_max.floor() as usize,
        gamma: delta * eps,
        t_min: MAGNITUDE_FACTOR * delta * eps,
        delta: Some(delta),
        tail_inf_max: Some(TAIL_FACTOR * (1.0 - alpha.sqrt()) * delta * eps),
        l2_bound: None,
        prob_lb: leading,
        prob_lb_leading: Some(leading),
        warnings: Vec::new(),
    })
}

/// `2 + √(α/(1−α))`, the ℓ₂ error factor of the Lasso solution.
pub fn l2_error_factor(alpha: f64) -> f64 {
    2.0 + (alpha / (1.0 - alpha)).sqrt()
}

/// Support inclusion and ℓ₂ consistency at sparsity `k`.
pub fn theorem3_bounds(n: usize, p: usize, alpha: f64, beta: f64, eps: f64, k: usize) -> Result<TheoremBounds> {
    check_common(n, p, alpha, beta, eps, false)?;
    let k_max = sparsity_limit(n, p, alpha, beta);
    if k as f64 > k_max {
        return Err(Error::domain(format!("k = {k} exceeds the sparsity limit {k_max:.4}")));
    }
    let slack = 1.0 - beta.sqrt() - (k as f64 / n as f64).sqrt();
    let mut warnings = Vec::new();
    if !(slack > 0.0) {
        warnings.push(format!(
            "sqrt(beta) + sqrt(k/n) = {:.6} is not below 1; the probability bound is evaluated but carries no guarantee",
            1.0 - slack
        ));
    }
    let gamma = base_gamma(n, p, alpha, eps);
    let prob = 1.0 - (-(n as f64) * slack * slack / 2.0).exp() - 1.0 / (2.0 * (PI * (p as f64).ln()).sqrt());
    Ok(TheoremBounds {
        theorem: 3,
        n,
        p,
        alpha,
        beta,
        eps,
        k: Some(k),
        k_max,
        k_max_int: k_max.floor() as usize,
        gamma,
        t_min: MAGNITUDE_FACTOR * gamma,
        delta: None,
        tail_inf_max: None,
        l2_bound: Some(l2_error_factor(alpha) * eps),
        prob_lb: prob,
        prob_lb_leading: None,
        warnings,
    })
}

/// Monte Carlo protocol constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolParams {
    /// `αβn / (2 ln p)`
    pub k_beta: f64,
    /// `ε/√(1−α) · √(2 ln p / n)`
    pub gamma0: f64,
    /// `5.5 γ₀`
    pub t: f64,
}

/// Accepts `β = 1`, where the sparsity threshold becomes `αn / (2 ln p)`.
pub fn experiment_params(n: usize, p: usize, alpha: f64, beta: f64, eps: f64) -> Result<ProtocolParams> {
    check_common(n, p, alpha, beta, eps, true)?;
    let gamma0 = base_gamma(n, p, alpha, eps);
    Ok(ProtocolParams { k_beta: sparsity_limit(n, p, alpha, beta), gamma0, t: MAGNITUDE_FACTOR * gamma0 })
}

/// Outcome of [`check_compressible_admissible`]. Margins are evaluated at
/// `eps_min`; a negative margin marks a violated condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// `‖w‖₂ + 4‖x₀ − x^k‖₂`
    pub eps_min: f64,
    /// Every `ε` in this interval satisfies the noise, magnitude and flatness conditions.
    pub eps_feasible: Option<(f64, f64)>,
    pub delta: f64,
    /// Smallest of the k largest magnitudes (`+∞` when k = 0).
    pub t: f64,
    pub tail_l2: f64,
    pub tail_inf: f64,
    /// `αβn/(2 ln p) − k`
    pub sparsity_margin: f64,
    /// `T − 5.5 Δ ε_min`
    pub magnitude_margin: f64,
    /// `0.8 (1 − √α) Δ ε_min − ‖x₀ − x^k‖∞`
    pub flatness_margin: f64,
}

/// Checks whether a compressible `x0` meets the sparsity, noise-budget,
/// magnitude and tail-flatness conditions for its best `k`-term support.
pub fn check_compressible_admissible(
    x0: &DVector<f64>,
    k: usize,
    w_norm: f64,
    alpha: f64,
    beta: f64,
    n: usize,
    p: usize,
) -> Result<AdmissibilityReport> {
    if k > x0.len() {
        return Err(Error::domain(format!("k = {k} exceeds the signal length {}", x0.len())));
    }
    if !(w_norm >= 0.0 && w_norm.is_finite()) {
        return Err(Error::domain(format!("noise norm must be non-negative, got {w_norm}")));
    }
    check_common(n, p, alpha, beta, 0.0, false)?;
    let delta = delta_factor(n, p, alpha)?;
    let head = best_k_term(x0, k);
    let tail = x0 - head.dense();
    let (tail_l2, tail_inf) = (tail.norm(), tail.amax());
    let t = head.min_magnitude().unwrap_or(f64::INFINITY);
    let eps_min = w_norm + 4.0 * tail_l2;
    let flat_scale = TAIL_FACTOR * (1.0 - alpha.sqrt()) * delta;

    let sparsity_margin = sparsity_limit(n, p, alpha, beta) - k as f64;
    let magnitude_margin = t - MAGNITUDE_FACTOR * delta * eps_min;
    let flatness_margin = flat_scale * eps_min - tail_inf;
    let ok = |margin: f64, scale: f64| margin >= -1e-12 * scale.abs().max(f64::MIN_POSITIVE);
    let admissible =
        ok(sparsity_margin, k as f64) && ok(magnitude_margin, t.min(f64::MAX)) && ok(flatness_margin, tail_inf);

    let lo = eps_min.max(tail_inf / flat_scale);
    let hi = t / (MAGNITUDE_FACTOR * delta);
    let eps_feasible = (lo <= hi).then_some((lo, hi));
    Ok(AdmissibilityReport {
        admissible,
        eps_min,
        eps_feasible,
        delta,
        t,
        tail_l2,
        tail_inf,
        sparsity_margin,
        magnitude_margin,
        flatness_margin,
    })
}
