//! Monte Carlo recovery sweeps: probability of sign recovery as a function of
//! the sparsity, of `γ/γ₀` or of `T/γ₀`, with Wilson intervals, CSV output and
//! a static SVG plot.
//!
//! Trial `t` draws its matrix, signal and noise from
//! `derive_seed(master_seed, t, stream)`. The seeds do not depend on the sweep
//! value, so every grid point of a trial sees the same matrix (common random
//! numbers) and the matrix is generated once per trial.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{experiment_params, l2_error_factor, sparsity_limit, ProtocolParams, MAGNITUDE_FACTOR};
use crate::certificate::{certify, classify_recovery, CertificateReport, ConditionSubset, RecoveryClass, RecoveryKind};
use crate::ensemble::{derive_seed, gaussian_matrix, sparse_signal, sphere_noise, stream, Seed, SensingMatrix};
use crate::error::{Error, Result};
use crate::lasso::{default_support_threshold, solve_homotopy};
use crate::stats::{cochran_armitage, wilson_interval, Z95};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Sparsity `k`.
    K,
    /// `γ/γ₀`.
    GammaRatio,
    /// `T/γ₀`.
    #[serde(rename = "T_ratio")]
    TRatio,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            Self::K => "k",
            Self::GammaRatio => "gamma_ratio",
            Self::TRatio => "T_ratio",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Evaluate the recovery conditions directly.
    #[default]
    Certificate,
    /// Solve the Lasso by homotopy and classify the support.
    Solver,
}

fn default_t_ratio() -> f64 {
    MAGNITUDE_FACTOR
}

fn default_gamma_ratio() -> f64 {
    1.0
}

/// Experiment parameters. `γ₀` is the regularization level derived from
/// `(n, p, α, ε)`; the signal magnitude `T` and the regularization `γ` are
/// set relative to it.
///
/// Per sweep value `v`:
/// - `k`: sparsity `v`, `T = t_ratio·γ₀`, `γ = gamma_ratio·γ₀` (or `T / gamma_divisor`);
/// - `gamma_ratio`: `γ = v·γ₀`, `T = t_ratio·γ₀`;
/// - `T_ratio`: `T = v·γ₀`, `γ = gamma_ratio·γ₀` (or `T / gamma_divisor`).
///
/// Outside a `k` sweep the sparsity is `k`, defaulting to `⌊αβn/(2 ln p)⌋`.
/// With `c1_only` the noise is zero in every trial while `γ₀` still uses `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub trials: u64,
    pub sweep: Sweep,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub condition_subset: ConditionSubset,
    pub master_seed: Seed,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_t_ratio", rename = "T_ratio")]
    pub t_ratio: f64,
    #[serde(default = "default_gamma_ratio")]
    pub gamma_ratio: f64,
    /// Sets `γ = T / gamma_divisor`, overriding `gamma_ratio`.
    #[serde(default)]
    pub gamma_divisor: Option<f64>,
    /// Draw one matrix for all trials instead of one per trial.
    #[serde(default)]
    pub shared_matrix: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<ProtocolParams> {
        let params = experiment_params(self.n, self.p, self.alpha, self.beta, self.eps)?;
        if !(self.eps > 0.0) {
            return Err(Error::domain(format!("eps must be positive to fix the scale of gamma_0, got {}", self.eps)));
        }
        if self.trials == 0 {
            return Err(Error::domain("trials must be at least 1"));
        }
        let grid = &self.sweep.grid;
        if grid.is_empty() {
            return Err(Error::domain("sweep grid is empty"));
        }
        if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("sweep grid must be finite and strictly increasing"));
        }
        match self.sweep.variable {
            SweepVariable::K => {
                if grid.iter().any(|&v| v < 0.0 || v.fract() != 0.0 || v > self.p as f64) {
                    return Err(Error::domain(format!("k grid values must be integers in [0, {}]", self.p)));
                }
            }
            SweepVariable::GammaRatio => {
                if grid[0] < 0.0 || (self.mode == Mode::Solver && grid[0] <= 0.0) {
                    return Err(Error::domain("gamma ratios must be non-negative (positive in solver mode)"));
                }
            }
            SweepVariable::TRatio => {
                if grid[0] <= 0.0 {
                    return Err(Error::domain("T ratios must be positive"));
                }
            }
        }
        if !(self.t_ratio > 0.0 && self.t_ratio.is_finite()) {
            return Err(Error::domain(format!("T_ratio must be positive, got {}", self.t_ratio)));
        }
        if !(self.gamma_ratio > 0.0 && self.gamma_ratio.is_finite()) {
            return Err(Error::domain(format!("gamma_ratio must be positive, got {}", self.gamma_ratio)));
        }
        if let Some(d) = self.gamma_divisor {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::domain(format!("gamma_divisor must be positive, got {d}")));
            }
        }
        if let Some(k) = self.k {
            if k > self.p {
                return Err(Error::domain(format!("k = {k} exceeds p = {}", self.p)));
            }
        }
        if self.mode == Mode::Solver && self.condition_subset == ConditionSubset::C1Only {
            return Err(Error::domain("solver mode supports the condition subsets both and c2_only"));
        }
        Ok(params)
    }

    fn fixed_k(&self, params: &ProtocolParams) -> usize {
        self.k.unwrap_or(params.k_beta.floor() as usize)
    }

    fn gamma_from(&self, t: f64, gamma0: f64) -> f64 {
        match self.gamma_divisor {
            Some(d) => t / d,
            None => self.gamma_ratio * gamma0,
        }
    }

    /// `(k, T, γ)` at a sweep value.
    pub fn point(&self, params: &ProtocolParams, value: f64) -> (usize, f64, f64) {
        let g0 = params.gamma0;
        match self.sweep.variable {
            SweepVariable::K => {
                let t = self.t_ratio * g0;
                (value as usize, t, self.gamma_from(t, g0))
            }
            SweepVariable::GammaRatio => (self.fixed_k(params), self.t_ratio * g0, value * g0),
            SweepVariable::TRatio => {
                let t = value * g0;
                (self.fixed_k(params), t, self.gamma_from(t, g0))
            }
        }
    }

    fn noise_radius(&self) -> f64 {
        if self.condition_subset == ConditionSubset::C1Only {
            0.0
        } else {
            self.eps
        }
    }

    fn matrix_for(&self, trial: u64) -> Result<SensingMatrix> {
        let index = if self.shared_matrix { 0 } else { trial };
        gaussian_matrix(self.n, self.p, derive_seed(self.master_seed, index, stream::MATRIX))
    }
}

/// Result of one trial at one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// `None` marks an anomaly (rank-deficient support or degenerate path).
    pub success: Option<bool>,
    pub k: usize,
    pub t: f64,
    pub gamma: f64,
    /// Certificate mode only.
    pub report: Option<CertificateReport>,
    /// Solver mode only.
    pub recovery: Option<RecoveryClass>,
    /// Solver mode only: `‖x̂ − x₀‖₂`.
    pub l2_error: Option<f64>,
    /// Solver mode only.
    pub unique: Option<bool>,
}

fn is_anomaly(e: &Error) -> bool {
    matches!(e, Error::RankDeficient { .. } | Error::Degenerate { .. })
}

fn evaluate(
    config: &ExperimentConfig,
    params: &ProtocolParams,
    a: &SensingMatrix,
    value: f64,
    trial: u64,
) -> Result<TrialOutcome> {
    let (k, t, gamma) = config.point(params, value);
    let x0 = sparse_signal(config.p, k, t, derive_seed(config.master_seed, trial, stream::SIGNAL))?;
    let w = sphere_noise(config.n, config.noise_radius(), derive_seed(config.master_seed, trial, stream::NOISE))?;
    let mut out =
        TrialOutcome { success: None, k, t, gamma, report: None, recovery: None, l2_error: None, unique: None };
    match config.mode {
        Mode::Certificate => match certify(a, &x0, &w, gamma, config.condition_subset, false) {
            Ok(report) => {
                out.success = Some(report.exact);
                out.report = Some(report);
            }
            Err(e) if is_anomaly(&e) => {}
            Err(e) => return Err(e),
        },
        Mode::Solver => {
            let y = a.apply_sparse(&x0) + &w;
            match solve_homotopy(a, &y, gamma) {
                Ok(sol) => {
                    let class = classify_recovery(&sol.x, &x0, default_support_threshold(&sol.x));
                    out.success = Some(match config.condition_subset {
                        ConditionSubset::C2Only => class.spurious.is_empty(),
                        _ => class.kind == RecoveryKind::ExactSign,
                    });
                    out.l2_error = Some((&sol.x - x0.dense()).norm());
                    out.unique = Some(sol.unique);
                    out.recovery = Some(class);
                }
                Err(e) if is_anomaly(&e) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// One trial at one sweep value.
pub fn run_trial(config: &ExperimentConfig, value: f64, trial: u64) -> Result<TrialOutcome> {
    let params = config.validate()?;
    let a = config.matrix_for(trial)?;
    evaluate(config, &params, &a, value, trial)
}

/// Every trial in `trials` at every grid value: `result[t][g]`.
pub fn run_trials(config: &ExperimentConfig, trials: Range<u64>) -> Result<Vec<Vec<TrialOutcome>>> {
    let params = config.validate()?;
    let shared = if config.shared_matrix { Some(config.matrix_for(0)?) } else { None };
    trials
        .into_par_iter()
        .map(|trial| {
            let owned;
            let a = match &shared {
                Some(a) => a,
                None => {
                    owned = config.matrix_for(trial)?;
                    &owned
                }
            };
            config.sweep.grid.iter().map(|&v| evaluate(config, &params, a, v, trial)).collect()
        })
        .collect()
}

/// Raw counts at one grid value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointCounts {
    pub value: f64,
    pub successes: u64,
    /// Trials with a verdict (anomalies excluded).
    pub trials: u64,
    pub anomalies: u64,
}

/// Counts over a sub-range of trial indices.
pub fn estimate_counts(config: &ExperimentConfig, trials: Range<u64>) -> Result<Vec<PointCounts>> {
    let outcomes = run_trials(config, trials)?;
    let mut counts: Vec<PointCounts> =
        config.sweep.grid.iter().map(|&value| PointCounts { value, successes: 0, trials: 0, anomalies: 0 }).collect();
    for row in &outcomes {
        for (c, o) in counts.iter_mut().zip(row) {
            match o.success {
                Some(s) => {
                    c.trials += 1;
                    c.successes += u64::from(s);
                }
                None => c.anomalies += 1,
            }
        }
    }
    Ok(counts)
}

/// Adds the counts of two runs over disjoint trial ranges of the same grid.
pub fn merge_counts(a: &[PointCounts], b: &[PointCounts]) -> Result<Vec<PointCounts>> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.value != y.value) {
        return Err(Error::domain("cannot merge counts over different grids"));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| PointCounts {
            value: x.value,
            successes: x.successes + y.successes,
            trials: x.trials + y.trials,
            anomalies: x.anomalies + y.anomalies,
        })
        .collect())
}

/// Success probability at one grid value with a 95% Wilson interval. One
/// CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbEstimate {
    pub sweep_var: SweepVariable,
    pub value: f64,
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub anomalies: u64,
}

impl ProbEstimate {
    /// With no valid trial the estimate is 0 with the interval `[0, 1]`.
    pub fn from_counts(sweep_var: SweepVariable, c: &PointCounts) -> Self {
        let p_hat = if c.trials == 0 { 0.0 } else { c.successes as f64 / c.trials as f64 };
        let (ci_low, ci_high) = wilson_interval(c.successes, c.trials, Z95);
        Self {
            sweep_var,
            value: c.value,
            trials: c.trials,
            successes: c.successes,
            p_hat,
            ci_low,
            ci_high,
            anomalies: c.anomalies,
        }
    }
}

pub fn estimate_probability(config: &ExperimentConfig) -> Result<Vec<ProbEstimate>> {
    let counts = estimate_counts(config, 0..config.trials)?;
    Ok(counts.iter().map(|c| ProbEstimate::from_counts(config.sweep.variable, c)).collect())
}

/// Cochran–Armitage z statistic of the estimates against their sweep values;
/// negative means decreasing.
pub fn trend_statistic(estimates: &[ProbEstimate]) -> Result<f64> {
    let s: Vec<u64> = estimates.iter().map(|e| e.successes).collect();
    let t: Vec<u64> = estimates.iter().map(|e| e.trials).collect();
    let x: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    cochran_armitage(&s, &t, &x)
}

/// Vertical reference line on a plot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Threshold {
    pub label: String,
    pub value: f64,
}

/// Sparsity thresholds `αβn/(2 ln p)` drawn on the sparsity sweep.
pub const THRESHOLD_BETAS: [f64; 4] = [0.7, 0.8, 0.9, 1.0];

/// Only the threshold formula is evaluated: the theorem's own domain
/// condition on `p` may fail for some `β` at small scale.
pub fn sparsity_thresholds(n: usize, p: usize, alpha: f64) -> Vec<Threshold> {
    THRESHOLD_BETAS
        .iter()
        .map(|&beta| Threshold { label: format!("beta={beta}"), value: sparsity_limit(n, p, alpha, beta) })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Result {
    pub estimates: Vec<ProbEstimate>,
    pub thresholds: Vec<Threshold>,
}

/// Exact recovery probability against `k`, with the sparsity thresholds.
pub fn run_fig1(config: &ExperimentConfig) -> Result<Fig1Result> {
    if config.sweep.variable != SweepVariable::K {
        return Err(Error::domain("the sparsity sweep needs sweep variable k"));
    }
    let estimates = estimate_probability(config)?;
    Ok(Fig1Result { estimates, thresholds: sparsity_thresholds(config.n, config.p, config.alpha) })
}

/// Probability of the sign condition against `γ/γ₀`, without noise.
pub fn run_fig2(config: &ExperimentConfig) -> Result<Vec<ProbEstimate>> {
    if config.sweep.variable != SweepVariable::GammaRatio {
        return Err(Error::domain("the regularization sweep needs sweep variable gamma_ratio"));
    }
    if config.condition_subset != ConditionSubset::C1Only {
        return Err(Error::domain("the regularization sweep checks c1_only"));
    }
    estimate_probability(config)
}

/// Probability of support inclusion against `T/γ₀`.
pub fn run_fig3(config: &ExperimentConfig) -> Result<Vec<ProbEstimate>> {
    if config.sweep.variable != SweepVariable::TRatio {
        return Err(Error::domain("the magnitude sweep needs sweep variable T_ratio"));
    }
    if config.condition_subset != ConditionSubset::C2Only {
        return Err(Error::domain("the magnitude sweep checks c2_only"));
    }
    estimate_probability(config)
}

/// ℓ₂ error bound `(2 + √(α/(1−α))) ε` for solver-mode outcomes.
pub fn l2_bound(config: &ExperimentConfig) -> f64 {
    l2_error_factor(config.alpha) * config.eps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Sparsity,
    Regularization,
    Magnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 1000 × 4000, 200 trials.
    Desk,
    /// 8000 × 32000, 1000 trials. Long running.
    Paper,
    /// 3000 × 36000, 1000 trials. Long running.
    PaperWide,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Self::Desk),
            "paper" => Ok(Self::Paper),
            "paper-wide" => Ok(Self::PaperWide),
            other => Err(Error::domain(format!("unknown preset {other:?} (expected desk, paper or paper-wide)"))),
        }
    }

    pub fn dims(self) -> (usize, usize, u64) {
        match self {
            Self::Desk => (1000, 4000, 200),
            Self::Paper => (8000, 32000, 1000),
            Self::PaperWide => (3000, 36000, 1000),
        }
    }
}

/// Sparsity grid: multiples of the `β = 1` threshold up to twice it, plus
/// half the `β = 0.7` threshold.
pub fn sparsity_grid(n: usize, p: usize, alpha: f64) -> Vec<f64> {
    let k1 = sparsity_limit(n, p, alpha, 1.0);
    let k07 = sparsity_limit(n, p, alpha, 0.7);
    let mut grid: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0].iter().map(|f| (f * k1).round()).collect();
    grid.push((0.5 * k07).round());
    grid.retain(|&k| k <= p as f64);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Configuration of a figure at a preset scale with `α = β = 0.8`, `ε = 1`.
pub fn preset_config(preset: Preset, figure: Figure, master_seed: Seed) -> Result<ExperimentConfig> {
    let (n, p, trials) = preset.dims();
    let (alpha, beta) = (0.8, 0.8);
    let (sweep, subset) = match figure {
        Figure::Sparsity => {
            (Sweep { variable: SweepVariable::K, grid: sparsity_grid(n, p, alpha) }, ConditionSubset::Both)
        }
        Figure::Regularization => (
            Sweep { variable: SweepVariable::GammaRatio, grid: vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0] },
            ConditionSubset::C1Only,
        ),
        Figure::Magnitude => (
            Sweep { variable: SweepVariable::TRatio, grid: vec![0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.5] },
            ConditionSubset::C2Only,
        ),
    };
    Ok(ExperimentConfig {
        n,
        p,
        alpha,
        beta,
        eps: 1.0,
        trials,
        sweep,
        mode: Mode::Certificate,
        condition_subset: subset,
        master_seed,
        k: None,
        t_ratio: MAGNITUDE_FACTOR,
        gamma_ratio: 1.0,
        gamma_divisor: None,
        shared_matrix: false,
    })
}

pub fn write_results(results: &[ProbEstimate], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(["sweep_var", "value", "trials", "successes", "p_hat", "ci_low", "ci_high", "anomalies"])?;
    for r in results {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ProbEstimate>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<ProbEstimate>, _>>()?;
    Ok(rows)
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 420.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the probability curve with its Wilson intervals and vertical
/// threshold lines as a standalone SVG document.
pub fn render_plot(results: &[ProbEstimate], thresholds: &[Threshold], title: &str) -> String {
    let xs = results.iter().map(|r| r.value).chain(thresholds.iter().map(|t| t.value));
    let (mut lo, mut hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    let span_x = PLOT_W - MARGIN_L - MARGIN_R;
    let span_y = PLOT_H - MARGIN_T - MARGIN_B;
    let sx = |v: f64| MARGIN_L + (v - lo) / (hi - lo) * span_x;
    let sy = |v: f64| MARGIN_T + (1.0 - v) * span_y;
    let x_label = results.first().map_or("value", |r| r.sweep_var.name());

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        PLOT_W / 2.0,
        xml_escape(title)
    );
    let (x0, x1, y0, y1) = (MARGIN_L, PLOT_W - MARGIN_R, MARGIN_T, PLOT_H - MARGIN_B);
    let _ = writeln!(
        s,
        r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#, x0 - 8.0, y + 4.0);
    }
    for i in 0..=5 {
        let v = lo + (hi - lo) * i as f64 / 5.0;
        let x = sx(v);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y1:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y1 + 20.0, format_tick(v));
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        PLOT_H - 8.0,
        xml_escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">probability</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    for t in thresholds {
        let x = sx(t.value);
        let _ = writeln!(
            s,
            r#"<line class="threshold" x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="firebrick" stroke-dasharray="6 4"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="firebrick" font-size="10">{}</text>"#,
            x + 3.0,
            y0 + 12.0,
            xml_escape(&t.label)
        );
    }
    for r in results {
        let x = sx(r.value);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="steelblue"/>"#,
            sy(r.ci_low),
            sy(r.ci_high)
        );
    }
    if !results.is_empty() {
        let points: Vec<String> = results.iter().map(|r| format!("{:.2},{:.2}", sx(r.value), sy(r.p_hat))).collect();
        let _ =
            writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, points.join(" "));
        for r in results {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(r.value), sy(r.p_hat));
        }
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 100.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

pub fn emit_plot(results: &[ProbEstimate], thresholds: &[Threshold], title: &str, path: &Path) -> Result<()> {
    std::fs::write(path, render_plot(results, thresholds, title))?;
    Ok(())
}
