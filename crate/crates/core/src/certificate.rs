//! Recovery certificates: the Fuchs (irrepresentable) value, the exact
//! recovery coefficient, the sign condition (C1) on the closed-form candidate
//! and the dual feasibility condition (C2), plus support classification.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::ensemble::{SensingMatrix, SignalSpec};
use crate::error::{Error, Result};
use crate::lasso::numerical_support;
use crate::linalg::SupportSystem;

/// Which of the two recovery conditions a check evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConditionSubset {
    #[default]
    Both,
    C1Only,
    C2Only,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C1Report {
    pub holds: bool,
    /// `min_{i∈I} sign(x₀[i]) · candidate[i]`; `+∞` for an empty support.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C2Report {
    pub holds: bool,
    /// `max_{j∉I} |⟨a_j, u⟩|`, zero when the complement is empty.
    pub max_correlation: f64,
    pub worst_index: Option<usize>,
    /// `γ − max_correlation`.
    pub margin: f64,
    pub u_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub fuchs_value: f64,
    pub erc_value: Option<f64>,
    pub c1: Option<C1Report>,
    pub c2: Option<C2Report>,
    /// Conjunction of the evaluated conditions.
    pub exact: bool,
    /// Closed-form candidate (dense, length p).
    pub candidate: DVector<f64>,
}

fn check_signal(a: &SensingMatrix, x0: &SignalSpec) -> Result<()> {
    if x0.dim() != a.ncols() {
        return Err(Error::Shape(format!("signal has dimension {} but A has {} columns", x0.dim(), a.ncols())));
    }
    Ok(())
}

fn check_noise(a: &SensingMatrix, w: &DVector<f64>) -> Result<()> {
    if w.len() != a.nrows() {
        return Err(Error::Shape(format!("noise has length {} but A has {} rows", w.len(), a.nrows())));
    }
    Ok(())
}

fn complement_max(values: &DVector<f64>, support: &[usize]) -> (f64, Option<usize>) {
    let mut in_support = vec![false; values.len()];
    for &i in support {
        in_support[i] = true;
    }
    let mut best = (0.0, None);
    for (j, v) in values.iter().enumerate() {
        if !in_support[j] && (best.1.is_none() || v.abs() > best.0) {
            best = (v.abs(), Some(j));
        }
    }
    best
}

/// `A_I (A_I^T A_I)^{-1} s` through a Cholesky solve.
pub fn d_vector(a: &SensingMatrix, support: &[usize], signs: &[f64]) -> Result<DVector<f64>> {
    if support.len() != signs.len() {
        return Err(Error::Shape(format!("{} support indices but {} signs", support.len(), signs.len())));
    }
    let sys = SupportSystem::new(a, support)?;
    Ok(sys.d_vector(&DVector::from_column_slice(signs)))
}

/// `max_{i∉I} |⟨a_i, d(x₀)⟩|`; zero when the support covers every column.
pub fn fuchs_value(a: &SensingMatrix, x0: &SignalSpec) -> Result<f64> {
    check_signal(a, x0)?;
    let d = d_vector(a, x0.support(), &x0.signs())?;
    Ok(complement_max(&a.correlate(&d), x0.support()).0)
}

/// `1 − max_{i∉I} ‖(A_I^T A_I)^{-1} A_I^T a_i‖₁`; one when the complement is empty.
pub fn erc_value(a: &SensingMatrix, support: &[usize]) -> Result<f64> {
    let sys = SupportSystem::new(a, support)?;
    Ok(erc_from_system(a, &sys))
}

fn erc_from_system(a: &SensingMatrix, sys: &SupportSystem) -> f64 {
    let p = a.ncols();
    if sys.k() == 0 {
        return 1.0;
    }
    let mut in_support = vec![false; p];
    for &i in sys.columns() {
        in_support[i] = true;
    }
    let cross = sys.submatrix().tr_mul(a.matrix());
    let mut worst = 0.0f64;
    for j in (0..p).filter(|&j| !in_support[j]) {
        let coeffs = sys.solve_gram(&cross.column(j).clone_owned());
        worst = worst.max(coeffs.lp_norm(1));
    }
    1.0 - worst
}

/// Least-squares coefficients of `y` on the columns of `A_I`.
pub fn restricted_solution(a: &SensingMatrix, support: &[usize], y: &DVector<f64>) -> Result<DVector<f64>> {
    check_noise(a, y)?;
    let sys = SupportSystem::new(a, support)?;
    Ok(sys.pinv_apply(y))
}

struct Prepared {
    sys: SupportSystem,
    signs: DVector<f64>,
    /// `(A_I^T A_I)^{-1} s`
    gram_signs: DVector<f64>,
    d: DVector<f64>,
    d_corr: DVector<f64>,
}

fn prepare(a: &SensingMatrix, x0: &SignalSpec) -> Result<Prepared> {
    check_signal(a, x0)?;
    let sys = SupportSystem::new(a, x0.support())?;
    let signs = DVector::from_vec(x0.signs());
    let gram_signs = sys.solve_gram(&signs);
    let d = sys.expand(&gram_signs);
    let d_corr = a.correlate(&d);
    Ok(Prepared { sys, signs, gram_signs, d, d_corr })
}

fn candidate_on_support(prep: &Prepared, x0: &SignalSpec, w: &DVector<f64>, gamma: f64) -> DVector<f64> {
    DVector::from_column_slice(x0.values()) + prep.sys.pinv_apply(w) - &prep.gram_signs * gamma
}

fn c1_from(prep: &Prepared, restricted: &DVector<f64>) -> C1Report {
    let margin = restricted.iter().zip(prep.signs.iter()).map(|(c, s)| s * c).fold(f64::INFINITY, f64::min);
    let holds = restricted.iter().zip(prep.signs.iter()).all(|(c, &s)| *c != 0.0 && c.signum() == s);
    C1Report { holds, margin }
}

fn c2_from(a: &SensingMatrix, prep: &Prepared, x0: &SignalSpec, w: &DVector<f64>, gamma: f64) -> C2Report {
    let u = &prep.d * gamma + prep.sys.project_orth(w);
    let (max_correlation, worst_index) = complement_max(&a.correlate(&u), x0.support());
    C2Report {
        holds: max_correlation <= gamma,
        max_correlation,
        worst_index,
        margin: gamma - max_correlation,
        u_norm: u.norm(),
    }
}

/// Condition (C1): the candidate `x̄₀ + A_I^+ w − γ (A_I^T A_I)^{-1} sign(x̄₀)`
/// has exactly the signs of `x̄₀`. A zero entry counts as a failure.
pub fn check_c1(a: &SensingMatrix, x0: &SignalSpec, w: &DVector<f64>, gamma: f64) -> Result<C1Report> {
    check_noise(a, w)?;
    let prep = prepare(a, x0)?;
    Ok(c1_from(&prep, &candidate_on_support(&prep, x0, w, gamma)))
}

/// Condition (C2): `|⟨a_j, γ d(x₀) + P_{V_I^⊥} w⟩| ≤ γ` for every `j ∉ I`.
pub fn check_c2(a: &SensingMatrix, x0: &SignalSpec, w: &DVector<f64>, gamma: f64) -> Result<C2Report> {
    check_noise(a, w)?;
    let prep = prepare(a, x0)?;
    Ok(c2_from(a, &prep, x0, w, gamma))
}

/// Evaluates the selected conditions; `with_erc` adds the exact recovery coefficient.
pub fn certify(
    a: &SensingMatrix,
    x0: &SignalSpec,
    w: &DVector<f64>,
    gamma: f64,
    subset: ConditionSubset,
    with_erc: bool,
) -> Result<CertificateReport> {
    check_noise(a, w)?;
    if !(gamma >= 0.0) {
        return Err(Error::domain(format!("gamma must be non-negative, got {gamma}")));
    }
    let prep = prepare(a, x0)?;
    let restricted = candidate_on_support(&prep, x0, w, gamma);
    let c1 = (subset != ConditionSubset::C2Only).then(|| c1_from(&prep, &restricted));
    let c2 = (subset != ConditionSubset::C1Only).then(|| c2_from(a, &prep, x0, w, gamma));
    let exact = c1.as_ref().is_none_or(|r| r.holds) && c2.as_ref().is_none_or(|r| r.holds);
    let mut candidate = DVector::zeros(a.ncols());
    for (&i, &v) in x0.support().iter().zip(restricted.iter()) {
        candidate[i] = v;
    }
    Ok(CertificateReport {
        fuchs_value: complement_max(&prep.d_corr, x0.support()).0,
        erc_value: with_erc.then(|| erc_from_system(a, &prep.sys)),
        c1,
        c2,
        exact,
        candidate,
    })
}

/// Both conditions and the ERC. When `exact` holds the candidate is the
/// unique Lasso solution.
pub fn certify_exact(a: &SensingMatrix, x0: &SignalSpec, w: &DVector<f64>, gamma: f64) -> Result<CertificateReport> {
    certify(a, x0, w, gamma, ConditionSubset::Both, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryKind {
    ExactSign,
    ExactSupport,
    Partial,
    Failure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryClass {
    pub kind: RecoveryKind,
    /// True support indices absent from the estimate.
    pub missing: Vec<usize>,
    /// Estimated support indices outside the true support.
    pub spurious: Vec<usize>,
    /// Shared indices whose signs disagree.
    pub sign_errors: Vec<usize>,
}

/// Compares the numerical support of `x_hat` at threshold `tau_supp` with `x0`.
pub fn classify_recovery(x_hat: &DVector<f64>, x0: &SignalSpec, tau_supp: f64) -> RecoveryClass {
    let est = numerical_support(x_hat, Some(tau_supp));
    let truth = x0.support();
    let missing: Vec<usize> = truth.iter().copied().filter(|i| est.binary_search(i).is_err()).collect();
    let spurious: Vec<usize> = est.iter().copied().filter(|i| truth.binary_search(i).is_err()).collect();
    let sign_errors: Vec<usize> = truth
        .iter()
        .zip(x0.values())
        .filter(|(i, v)| est.binary_search(i).is_ok() && x_hat[**i].signum() != v.signum())
        .map(|(&i, _)| i)
        .collect();
    let kind = match (missing.is_empty(), spurious.is_empty(), sign_errors.is_empty()) {
        (true, true, true) => RecoveryKind::ExactSign,
        (true, true, false) => RecoveryKind::ExactSupport,
        (false, true, true) => RecoveryKind::Partial,
        _ => RecoveryKind::Failure,
    };
    RecoveryClass { kind, missing, spurious, sign_errors }
}

/// One row of a per-trial certificate log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub k: usize,
    pub gamma: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub fuchs: f64,
    pub erc: Option<f64>,
    pub c1: Option<bool>,
    pub c2: Option<bool>,
    pub exact: bool,
    pub partial: Option<bool>,
    pub l2_error: Option<f64>,
}

pub fn write_trial_records(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON lines, one record per line.
pub fn write_trial_records_json(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}
