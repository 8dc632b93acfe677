//! The Lasso `min_x ½‖y − Ax‖² + γ‖x‖₁`: an exact homotopy solver, an
//! accelerated proximal-gradient solver for cross-checks, first-order
//! optimality checks and the closed-form candidate on a prescribed support.

mod homotopy;
mod proximal;

pub use homotopy::{homotopy_path, solve_homotopy, HomotopyPath, PathRow, Segment};
pub use proximal::{lipschitz_constant, solve_proximal};

use nalgebra::DVector;

use crate::ensemble::SensingMatrix;
use crate::error::{Error, Result};
use crate::linalg::SupportSystem;

/// Default relative threshold for the numerical support: an entry counts as
/// nonzero when `|x_i| > 1e-9 · max(1, ‖x‖∞)`.
pub const DEFAULT_SUPPORT_REL_TOL: f64 = 1e-9;

/// Support threshold `τ_supp` used by [`numerical_support`] when none is given.
pub fn default_support_threshold(x: &DVector<f64>) -> f64 {
    DEFAULT_SUPPORT_REL_TOL * x.amax().max(1.0)
}

/// Indices with `|x_i| > tau`, with `tau` defaulting to [`default_support_threshold`].
pub fn numerical_support(x: &DVector<f64>, tau: Option<f64>) -> Vec<usize> {
    let tau = tau.unwrap_or_else(|| default_support_threshold(x));
    x.iter().enumerate().filter(|(_, v)| v.abs() > tau).map(|(i, _)| i).collect()
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub gamma: f64,
    pub x: DVector<f64>,
    pub support: Vec<usize>,
    /// ±1 on `support`.
    pub signs: Vec<f64>,
    /// `⟨a_j, y − Ax⟩` for every column.
    pub correlations: DVector<f64>,
    /// Largest violation of the optimality conditions at `x`.
    pub kkt_violation: f64,
    /// The columns of the equicorrelation set are linearly independent, which
    /// makes the minimizer unique.
    pub unique: bool,
    /// False when an iterative solver stopped at its iteration cap.
    pub converged: bool,
    pub iterations: usize,
    pub path: Option<HomotopyPath>,
}

impl LassoSolution {
    pub(crate) fn assemble(
        a: &SensingMatrix,
        y: &DVector<f64>,
        gamma: f64,
        x: DVector<f64>,
        converged: bool,
        iterations: usize,
    ) -> Self {
        let support = numerical_support(&x, None);
        let signs = support.iter().map(|&i| x[i].signum()).collect();
        let kkt = check_kkt(a, y, &x, gamma, 0.0);
        let unique = equicorrelation_is_independent(a, &kkt.correlations, &support, gamma);
        Self {
            gamma,
            x,
            support,
            signs,
            correlations: kkt.correlations,
            kkt_violation: kkt.max_violation,
            unique,
            converged,
            iterations,
            path: None,
        }
    }

    pub fn objective(&self, a: &SensingMatrix, y: &DVector<f64>) -> f64 {
        objective(a, y, &self.x, self.gamma)
    }
}

pub fn objective(a: &SensingMatrix, y: &DVector<f64>, x: &DVector<f64>, gamma: f64) -> f64 {
    0.5 * (y - a.apply(x)).norm_squared() + gamma * x.lp_norm(1)
}

/// Columns whose correlation reaches `γ` up to a relative `1e-9`, merged with
/// the support, must have a positive definite Gram matrix.
fn equicorrelation_is_independent(a: &SensingMatrix, corr: &DVector<f64>, support: &[usize], gamma: f64) -> bool {
    let mut set: Vec<usize> = support.to_vec();
    for (j, c) in corr.iter().enumerate() {
        if c.abs() >= gamma * (1.0 - 1e-9) && !set.contains(&j) {
            set.push(j);
        }
    }
    set.sort_unstable();
    SupportSystem::new(a, &set).is_ok()
}

/// Result of [`check_kkt`].
#[derive(Debug, Clone)]
pub struct KktReport {
    pub optimal: bool,
    /// Per-index margin: `−|c_i − γ sign(x_i)|` on the support of `x`,
    /// `γ − |c_j|` off it. Optimality with slack `tol` means every margin is `≥ −tol`.
    pub margins: Vec<f64>,
    pub max_violation: f64,
    pub correlations: DVector<f64>,
}

/// Checks the first-order conditions
/// `A_I^T(y − Ax) = γ sign(x̄)` on `I = supp(x)` and `|⟨a_j, y − Ax⟩| ≤ γ` off it.
///
/// The support is the exact nonzero pattern of `x`.
pub fn check_kkt(a: &SensingMatrix, y: &DVector<f64>, x: &DVector<f64>, gamma: f64, tol: f64) -> KktReport {
    let correlations = a.correlate(&(y - a.apply(x)));
    let margins: Vec<f64> = x
        .iter()
        .zip(correlations.iter())
        .map(|(&xi, &c)| if xi != 0.0 { -(c - gamma * xi.signum()).abs() } else { gamma - c.abs() })
        .collect();
    let max_violation = margins.iter().fold(0.0f64, |m, &g| m.max(-g));
    KktReport { optimal: max_violation <= tol, margins, max_violation, correlations }
}

/// Closed-form Lasso candidate on a prescribed support and sign pattern:
/// `x̄ = A_I^+ y − γ (A_I^T A_I)^{-1} s`, zero elsewhere.
pub fn candidate_solution(
    a: &SensingMatrix,
    support: &[usize],
    signs: &[f64],
    y: &DVector<f64>,
    gamma: f64,
) -> Result<DVector<f64>> {
    if support.len() != signs.len() {
        return Err(Error::Shape(format!("{} support indices but {} signs", support.len(), signs.len())));
    }
    let sys = SupportSystem::new(a, support)?;
    let rhs = sys.restrict(y) - DVector::from_column_slice(signs) * gamma;
    let restricted = sys.solve_gram(&rhs);
    let mut x = DVector::zeros(a.ncols());
    for (&i, &v) in support.iter().zip(restricted.iter()) {
        x[i] = v;
    }
    Ok(x)
}

/// `f(γ) = ‖y − Ax(γ)‖₂ / γ` read off the piecewise-affine residual of a path.
pub fn residual_ratio(path: &HomotopyPath, gammas: &[f64]) -> Result<Vec<f64>> {
    gammas
        .iter()
        .map(|&g| {
            if !(g > 0.0) {
                return Err(Error::domain(format!("residual ratio needs gamma > 0, got {g}")));
            }
            Ok(path.residual_at(g)?.norm() / g)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{gaussian_matrix, ProblemInstance};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn orthonormal_matrix(n: usize, p: usize, seed: u64) -> SensingMatrix {
        let g = gaussian_matrix(n, p, seed).unwrap();
        let q = g.matrix().clone().qr().q();
        SensingMatrix::from_matrix(q.columns(0, p).into_owned()).unwrap()
    }

    #[test]
    fn zero_is_optimal_iff_gamma_dominates() {
        let inst = ProblemInstance::generate(20, 40, 3, 1.0, 0.1, 1).unwrap();
        let zero = DVector::zeros(40);
        let gmax = inst.a.correlate(&inst.y).amax();
        assert!(check_kkt(&inst.a, &inst.y, &zero, gmax, 0.0).optimal);
        assert!(check_kkt(&inst.a, &inst.y, &zero, 2.0 * gmax, 0.0).optimal);
        assert!(!check_kkt(&inst.a, &inst.y, &zero, 0.9 * gmax, 0.0).optimal);
    }

    #[test]
    fn candidate_scalar_case() {
        let a = SensingMatrix::from_matrix(DMatrix::from_column_slice(2, 1, &[0.6, 0.8])).unwrap();
        let y = DVector::from_vec(vec![0.6 * 3.0, 0.8 * 3.0]);
        let x = candidate_solution(&a, &[0], &[1.0], &y, 0.25).unwrap();
        assert_relative_eq!(x[0], 2.75, epsilon = 1e-14);
    }

    #[test]
    fn candidate_without_regularization_recovers_signal() {
        let inst = ProblemInstance::generate(30, 60, 4, 1.0, 0.0, 3).unwrap();
        let x = candidate_solution(&inst.a, inst.x0.support(), &inst.x0.signs(), &inst.y, 0.0).unwrap();
        assert_relative_eq!(x, inst.x0.dense(), epsilon = 1e-12);
    }

    #[test]
    fn candidate_rejects_bad_shapes_and_rank() {
        let a = gaussian_matrix(3, 5, 1).unwrap();
        let y = DVector::zeros(3);
        assert!(matches!(candidate_solution(&a, &[0, 1], &[1.0], &y, 1.0), Err(Error::Shape(_))));
        assert!(matches!(candidate_solution(&a, &[0, 1, 2, 3], &[1.0; 4], &y, 1.0), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn orthonormal_design_soft_thresholds() {
        let a = orthonormal_matrix(12, 8, 4);
        let y = DVector::from_fn(12, |i, _| ((i * 7 % 5) as f64) - 2.0);
        let gamma = 0.7;
        let sol = solve_homotopy(&a, &y, gamma).unwrap();
        let aty = a.correlate(&y);
        let soft = aty.map(|v| v.signum() * (v.abs() - gamma).max(0.0));
        assert_relative_eq!(sol.x, soft, epsilon = 1e-12);
    }

    #[test]
    fn numerical_support_threshold() {
        let x = DVector::from_vec(vec![1e-12, 2.0, 0.0, -3e-9]);
        assert_eq!(numerical_support(&x, None), vec![1, 3]);
        assert_eq!(numerical_support(&x, Some(0.0)), vec![0, 1, 3]);
    }
}
