use nalgebra::DVector;

use super::{check_kkt, LassoSolution};
use crate::ensemble::SensingMatrix;
use crate::error::{Error, Result};

/// Estimates `‖A‖₂²` by power iteration on `A^T A` to about 1% relative accuracy.
pub fn lipschitz_constant(a: &SensingMatrix) -> f64 {
    let p = a.ncols();
    if p == 0 || a.nrows() == 0 {
        return 0.0;
    }
    // deterministic start with no special alignment
    let mut v = DVector::from_fn(p, |i, _| 1.0 + ((i * 7919) % 97) as f64 / 97.0);
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..500 {
        let w = a.correlate(&a.apply(&v));
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        v = w / next;
        let done = (next - estimate).abs() <= 1e-3 * next;
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

fn soft_threshold(v: &DVector<f64>, level: f64) -> DVector<f64> {
    v.map(|x| x.signum() * (x.abs() - level).max(0.0))
}

/// Accelerated proximal gradient (FISTA) with backtracking on the step and an
/// adaptive restart whenever the objective increases.
///
/// Stops once the optimality violation is at most `tol` or after `max_iter`
/// iterations; `converged` on the result says which.
pub fn solve_proximal(
    a: &SensingMatrix,
    y: &DVector<f64>,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LassoSolution> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::domain(format!("gamma must be positive and finite, got {gamma}")));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tol must be positive, got {tol}")));
    }
    if y.len() != a.nrows() {
        return Err(Error::Shape(format!("y has length {} but A has {} rows", y.len(), a.nrows())));
    }
    let p = a.ncols();
    let smooth = |x: &DVector<f64>| 0.5 * (y - a.apply(x)).norm_squared();
    let total = |x: &DVector<f64>| smooth(x) + gamma * x.lp_norm(1);

    let mut lip = lipschitz_constant(a).max(f64::MIN_POSITIVE) * 1.01;
    let mut x = DVector::zeros(p);
    let mut f_x = total(&x);
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    let mut converged = check_kkt(a, y, &x, gamma, tol).optimal;

    while !converged && iterations < max_iter {
        iterations += 1;
        let rz = a.apply(&z) - y;
        let grad = a.correlate(&rz);
        let f_z = 0.5 * rz.norm_squared();
        let x_new = loop {
            let cand = soft_threshold(&(&z - &grad / lip), gamma / lip);
            let step = &cand - &z;
            let model = f_z + grad.dot(&step) + 0.5 * lip * step.norm_squared();
            if smooth(&cand) <= model * (1.0 + 1e-12) + 1e-300 {
                break cand;
            }
            lip *= 2.0;
        };
        let f_new = total(&x_new);
        if f_new > f_x && t > 1.0 {
            // restart momentum from the last accepted iterate
            t = 1.0;
            z = x.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &x_new + (&x_new - &x) * ((t - 1.0) / t_next);
        t = t_next;
        x = x_new;
        f_x = f_new;
        converged = check_kkt(a, y, &x, gamma, tol).optimal;
    }
    Ok(LassoSolution::assemble(a, y, gamma, x, converged, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{gaussian_matrix, ProblemInstance};
    use crate::lasso::solve_homotopy;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn scalar_soft_threshold() {
        let a = SensingMatrix::from_matrix(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let y = DVector::from_element(1, 2.0);
        let sol = solve_proximal(&a, &y, 0.5, 1e-12, 1000).unwrap();
        assert!(sol.converged);
        assert_relative_eq!(sol.x[0], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn zero_data_gives_zero() {
        let a = gaussian_matrix(10, 30, 2).unwrap();
        let sol = solve_proximal(&a, &DVector::zeros(10), 0.1, 1e-10, 100).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 0);
        assert!(sol.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn power_iteration_matches_spectral_norm() {
        let a = gaussian_matrix(40, 90, 3).unwrap();
        let exact = a.matrix().singular_values().max().powi(2);
        let est = lipschitz_constant(&a);
        assert!((est - exact).abs() <= 0.01 * exact, "{est} vs {exact}");
    }

    #[test]
    fn reports_non_convergence() {
        let inst = ProblemInstance::generate(64, 256, 8, 1.0, 0.5, 4).unwrap();
        let sol = solve_proximal(&inst.a, &inst.y, 0.05, 1e-14, 3).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 3);
    }

    #[test]
    fn agrees_with_homotopy() {
        let inst = ProblemInstance::generate(64, 256, 8, 1.0, 0.5, 21).unwrap();
        let gamma = 0.1;
        let h = solve_homotopy(&inst.a, &inst.y, gamma).unwrap();
        let f = solve_proximal(&inst.a, &inst.y, gamma, 1e-10, 100_000).unwrap();
        assert!(f.converged);
        assert!((&h.x - &f.x).amax() <= 1e-5);
    }
}
