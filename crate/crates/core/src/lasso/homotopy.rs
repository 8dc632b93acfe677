use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{numerical_support, LassoSolution};
use crate::ensemble::SensingMatrix;
use crate::error::{Error, Result};
use crate::linalg::UpdatableCholesky;

/// Events closer than this (relative to `‖A^T y‖∞`) are treated as simultaneous.
const EVENT_TIE: f64 = 1e-12;
/// Refactor the active Cholesky factor once its condition estimate passes this.
const REFACTOR_CONDITION: f64 = 1e8;

/// One CSV row per breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub gamma: f64,
    pub support_size: usize,
    pub objective: f64,
    pub residual_norm: f64,
}

/// Active set and signs on an open segment between two breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub support: Vec<usize>,
    pub signs: Vec<f64>,
}

/// Piecewise-affine regularization path `γ ↦ x(γ)`.
///
/// `breakpoints` increase from the lowest computed `γ` (zero for a full path)
/// to `γ_K = ‖A^T y‖∞`, where the solution vanishes.
#[derive(Debug, Clone)]
pub struct HomotopyPath {
    breakpoints: Vec<f64>,
    solutions: Vec<DVector<f64>>,
    residuals: Vec<DVector<f64>>,
    segments: Vec<Segment>,
    rows: Vec<PathRow>,
}

impl HomotopyPath {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn gamma_max(&self) -> f64 {
        *self.breakpoints.last().expect("path has at least one breakpoint")
    }

    pub fn gamma_min(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn solutions(&self) -> &[DVector<f64>] {
        &self.solutions
    }

    /// `segments()[t]` describes the open interval `(breakpoints[t], breakpoints[t+1])`.
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn rows(&self) -> &[PathRow] {
        &self.rows
    }

    fn locate(&self, gamma: f64) -> Result<Option<(usize, f64)>> {
        if gamma >= self.gamma_max() {
            return Ok(None);
        }
        if gamma < self.gamma_min() {
            return Err(Error::domain(format!(
                "gamma = {gamma} lies below the computed path (which stops at {})",
                self.gamma_min()
            )));
        }
        let t = self.breakpoints.partition_point(|&b| b <= gamma).saturating_sub(1);
        let (lo, hi) = (self.breakpoints[t], self.breakpoints[t + 1]);
        Ok(Some((t, (gamma - lo) / (hi - lo))))
    }

    fn interpolate(&self, values: &[DVector<f64>], gamma: f64) -> Result<DVector<f64>> {
        match self.locate(gamma)? {
            None => Ok(values.last().unwrap().clone()),
            Some((t, w)) => Ok(&values[t] * (1.0 - w) + &values[t + 1] * w),
        }
    }

    /// `x(γ)` by affine interpolation inside the containing segment.
    pub fn solution_at(&self, gamma: f64) -> Result<DVector<f64>> {
        self.interpolate(&self.solutions, gamma)
    }

    /// `y − Ax(γ)`, affine on each segment.
    pub fn residual_at(&self, gamma: f64) -> Result<DVector<f64>> {
        self.interpolate(&self.residuals, gamma)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact Lasso solution at `gamma` obtained by following the homotopy down
/// from `‖A^T y‖∞`.
pub fn solve_homotopy(a: &SensingMatrix, y: &DVector<f64>, gamma: f64) -> Result<LassoSolution> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::domain(format!("gamma must be positive and finite, got {gamma}")));
    }
    run(a, y, gamma, false)
}

/// Follows the path down to `gamma_min` (zero for the full path) and returns
/// the solution there together with every breakpoint.
pub fn homotopy_path(a: &SensingMatrix, y: &DVector<f64>, gamma_min: f64) -> Result<LassoSolution> {
    if !(gamma_min >= 0.0) || !gamma_min.is_finite() {
        return Err(Error::domain(format!("gamma_min must be non-negative, got {gamma_min}")));
    }
    run(a, y, gamma_min, true)
}

fn check_shapes(a: &SensingMatrix, y: &DVector<f64>) -> Result<()> {
    if y.len() != a.nrows() {
        return Err(Error::Shape(format!("y has length {} but A has {} rows", y.len(), a.nrows())));
    }
    Ok(())
}

struct Recorder {
    gammas: Vec<f64>,
    solutions: Vec<DVector<f64>>,
    residuals: Vec<DVector<f64>>,
    segments: Vec<Segment>,
}

impl Recorder {
    fn record(&mut self, gamma: f64, active: &[usize], x_active: &[f64], residual: DVector<f64>, p: usize) {
        let mut x = DVector::zeros(p);
        for (&j, &v) in active.iter().zip(x_active) {
            x[j] = v;
        }
        self.gammas.push(gamma);
        self.solutions.push(x);
        self.residuals.push(residual);
    }

    fn segment(&mut self, active: &[usize], signs: &[f64]) {
        let mut pairs: Vec<(usize, f64)> = active.iter().copied().zip(signs.iter().copied()).collect();
        pairs.sort_unstable_by_key(|&(j, _)| j);
        self.segments.push(Segment {
            support: pairs.iter().map(|&(j, _)| j).collect(),
            signs: pairs.iter().map(|&(_, s)| s).collect(),
        });
    }

    fn finish(mut self) -> HomotopyPath {
        self.gammas.reverse();
        self.solutions.reverse();
        self.residuals.reverse();
        self.segments.reverse();
        let rows = self
            .gammas
            .iter()
            .zip(&self.solutions)
            .zip(&self.residuals)
            .map(|((&gamma, x), r)| PathRow {
                gamma,
                support_size: numerical_support(x, None).len(),
                objective: 0.5 * r.norm_squared() + gamma * x.lp_norm(1),
                residual_norm: r.norm(),
            })
            .collect();
        HomotopyPath {
            breakpoints: self.gammas,
            solutions: self.solutions,
            residuals: self.residuals,
            segments: self.segments,
            rows,
        }
    }
}

enum Event {
    Add { j: usize, sign: f64 },
    Drop { q: usize },
    Stop,
}

struct ActiveSet<'a> {
    a: &'a SensingMatrix,
    y: &'a DVector<f64>,
    cols: Vec<usize>,
    signs: Vec<f64>,
    x: Vec<f64>,
    chol: UpdatableCholesky,
}

impl<'a> ActiveSet<'a> {
    fn residual(&self) -> DVector<f64> {
        let mut r = self.y.clone();
        for (&j, &v) in self.cols.iter().zip(&self.x) {
            r.axpy(-v, &self.a.column(j), 1.0);
        }
        r
    }

    fn combine(&self, coeffs: &[f64]) -> DVector<f64> {
        let mut v = DVector::zeros(self.a.nrows());
        for (&j, &c) in self.cols.iter().zip(coeffs) {
            v.axpy(c, &self.a.column(j), 1.0);
        }
        v
    }

    fn add(&mut self, j: usize, sign: f64, gamma: f64) -> Result<()> {
        let col = self.a.column(j);
        let cross: Vec<f64> = self.cols.iter().map(|&i| self.a.column(i).dot(&col)).collect();
        let diag = col.norm_squared();
        if self.chol.push(&cross, diag).is_err() {
            return Err(Error::Degenerate {
                gamma,
                reason: format!("column {j} is linearly dependent on the {} active columns", self.cols.len()),
            });
        }
        self.cols.push(j);
        self.signs.push(sign);
        self.x.push(0.0);
        Ok(())
    }

    fn drop(&mut self, q: usize) {
        self.chol.remove(q);
        self.cols.remove(q);
        self.signs.remove(q);
        self.x.remove(q);
    }

    fn refactor_if_needed(&mut self, gamma: f64) -> Result<()> {
        if self.chol.condition_estimate() <= REFACTOR_CONDITION {
            return Ok(());
        }
        let sub = self.a.select_columns(&self.cols);
        self.chol = UpdatableCholesky::refactor(&sub.tr_mul(&sub)).ok_or_else(|| Error::Degenerate {
            gamma,
            reason: format!("active Gram matrix of {} columns is singular", self.cols.len()),
        })?;
        Ok(())
    }

    /// Re-solves `x_J = G^{-1}(A_J^T y − γ s)` to stop drift; `fresh` is pinned to zero.
    fn polish(&mut self, gamma: f64, fresh: Option<usize>) {
        let rhs: Vec<f64> =
            self.cols.iter().zip(&self.signs).map(|(&j, &s)| self.a.column(j).dot(self.y) - gamma * s).collect();
        self.x = self.chol.solve(&rhs);
        if let Some(q) = fresh {
            self.x[q] = 0.0;
        }
    }
}

fn run(a: &SensingMatrix, y: &DVector<f64>, gamma_stop: f64, record_path: bool) -> Result<LassoSolution> {
    check_shapes(a, y)?;
    let (n, p) = (a.nrows(), a.ncols());
    let mut corr = a.correlate(y);
    let gamma_max = corr.amax();
    let mut recorder = record_path.then(|| Recorder {
        gammas: Vec::new(),
        solutions: Vec::new(),
        residuals: Vec::new(),
        segments: Vec::new(),
    });
    if let Some(rec) = recorder.as_mut() {
        rec.record(gamma_max, &[], &[], y.clone(), p);
    }

    let mut set =
        ActiveSet { a, y, cols: Vec::new(), signs: Vec::new(), x: Vec::new(), chol: UpdatableCholesky::new() };
    let mut gamma = gamma_max;
    let mut steps = 0usize;

    if gamma_stop < gamma_max && gamma_max > 0.0 {
        let first = corr.iamax();
        set.add(first, corr[first].signum(), gamma)?;
        let tie = EVENT_TIE * gamma_max;
        let max_steps = 20 * (n + p) + 100;
        let mut just_added = Some(first);
        // index and sign of the last dropped column; only its same-sign re-entry is suppressed
        let mut just_dropped: Option<(usize, f64)> = None;

        loop {
            steps += 1;
            if steps > max_steps {
                return Err(Error::Degenerate {
                    gamma,
                    reason: format!("no termination after {max_steps} path steps"),
                });
            }
            let dir = set.chol.solve(&set.signs);
            let b = a.correlate(&set.combine(&dir));

            let mut best_add: Option<(f64, usize, f64)> = None;
            for j in 0..p {
                if set.cols.contains(&j) {
                    continue;
                }
                for (sign, num, den) in [(1.0, gamma - corr[j], 1.0 - b[j]), (-1.0, gamma + corr[j], 1.0 + b[j])] {
                    if den <= 1e-15 || just_dropped == Some((j, sign)) {
                        continue;
                    }
                    let delta = (num / den).max(0.0);
                    if best_add.is_none_or(|(d, _, _)| delta < d) {
                        best_add = Some((delta, j, sign));
                    }
                }
            }
            let mut best_drop: Option<(f64, usize)> = None;
            for (q, (&xq, &dq)) in set.x.iter().zip(&dir).enumerate() {
                if Some(set.cols[q]) == just_added || dq == 0.0 {
                    continue;
                }
                let delta = -xq / dq;
                if delta > 0.0 && best_drop.is_none_or(|(d, _)| delta < d) {
                    best_drop = Some((delta, q));
                }
            }

            let to_stop = gamma - gamma_stop;
            let (delta, event) = match (best_add, best_drop) {
                (Some((da, _, _)), Some((dd, q))) if dd <= da + tie => (dd, Event::Drop { q }),
                (Some((da, j, sign)), _) => (da, Event::Add { j, sign }),
                (None, Some((dd, q))) => (dd, Event::Drop { q }),
                (None, None) => (f64::INFINITY, Event::Stop),
            };
            let (delta, event) = if delta >= to_stop - tie { (to_stop, Event::Stop) } else { (delta, event) };

            if let Some(rec) = recorder.as_mut() {
                rec.segment(&set.cols, &set.signs);
            }
            for (xq, dq) in set.x.iter_mut().zip(&dir) {
                *xq += delta * dq;
            }
            gamma = if matches!(event, Event::Stop) { gamma_stop } else { gamma - delta };

            just_added = None;
            just_dropped = None;
            let mut fresh = None;
            match event {
                Event::Stop => {
                    set.refactor_if_needed(gamma)?;
                    set.polish(gamma, None);
                }
                Event::Drop { q } => {
                    just_dropped = Some((set.cols[q], set.signs[q]));
                    set.drop(q);
                }
                Event::Add { j, sign } => {
                    set.add(j, sign, gamma)?;
                    just_added = Some(j);
                    fresh = Some(set.cols.len() - 1);
                }
            }
            let stopping = matches!(event, Event::Stop);
            if !stopping {
                set.refactor_if_needed(gamma)?;
                set.polish(gamma, fresh);
            }
            let residual = set.residual();
            corr = a.correlate(&residual);
            if let Some(rec) = recorder.as_mut() {
                rec.record(gamma, &set.cols, &set.x, residual, p);
            }
            if stopping {
                break;
            }
            if set.cols.is_empty() {
                return Err(Error::Degenerate { gamma, reason: "active set emptied below the top of the path".into() });
            }
        }
    }

    let mut x = DVector::zeros(p);
    for (&j, &v) in set.cols.iter().zip(&set.x) {
        x[j] = v;
    }
    let mut sol = LassoSolution::assemble(a, y, gamma_stop.max(0.0), x, true, steps);
    if gamma_stop >= gamma_max {
        sol.gamma = gamma_stop;
    }
    sol.path = recorder.map(Recorder::finish);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::ProblemInstance;
    use crate::lasso::{check_kkt, residual_ratio};
    use approx::assert_relative_eq;

    #[test]
    fn zero_above_the_top() {
        let inst = ProblemInstance::generate(20, 50, 3, 1.0, 0.5, 11).unwrap();
        let gmax = inst.a.correlate(&inst.y).amax();
        for g in [gmax, 1.5 * gmax] {
            let sol = solve_homotopy(&inst.a, &inst.y, g).unwrap();
            assert!(sol.x.iter().all(|&v| v == 0.0));
        }
        let sol = solve_homotopy(&inst.a, &inst.y, gmax * (1.0 - 1e-9)).unwrap();
        assert_eq!(sol.support.len(), 1);
    }

    #[test]
    fn path_invariants() {
        let inst = ProblemInstance::generate(30, 80, 5, 1.0, 0.3, 5).unwrap();
        let sol = homotopy_path(&inst.a, &inst.y, 0.0).unwrap();
        let path = sol.path.as_ref().unwrap();
        let bp = path.breakpoints();
        assert_eq!(bp[0], 0.0);
        assert!(bp.windows(2).all(|w| w[0] < w[1]));
        assert_relative_eq!(path.gamma_max(), inst.a.correlate(&inst.y).amax());
        assert!(path.solutions().last().unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(path.segments().len(), bp.len() - 1);

        for (t, seg) in path.segments().iter().enumerate() {
            let mid = 0.5 * (bp[t] + bp[t + 1]);
            let x = path.solution_at(mid).unwrap();
            let kkt = check_kkt(&inst.a, &inst.y, &x, mid, 1e-8);
            assert!(kkt.max_violation < 1e-8 * mid.max(1.0), "segment {t}: {}", kkt.max_violation);
            for (&j, &s) in seg.support.iter().zip(&seg.signs) {
                assert_eq!(x[j].signum(), s);
            }
        }
        for (t, &g) in bp.iter().enumerate().skip(1).take(bp.len() - 2) {
            let direct = solve_homotopy(&inst.a, &inst.y, g).unwrap();
            assert!((&direct.x - &path.solutions()[t]).amax() < 1e-8);
        }
    }

    #[test]
    fn residual_ratio_at_top_and_monotone() {
        let inst = ProblemInstance::generate(25, 60, 4, 1.0, 0.2, 9).unwrap();
        let sol = homotopy_path(&inst.a, &inst.y, 0.0).unwrap();
        let path = sol.path.unwrap();
        let gk = path.gamma_max();
        let f = residual_ratio(&path, &[gk]).unwrap();
        assert_relative_eq!(f[0], inst.y.norm() / gk, max_relative = 1e-14);

        let grid: Vec<f64> = (1..=200).map(|i| gk * i as f64 / 200.0).collect();
        let f = residual_ratio(&path, &grid).unwrap();
        assert!(f.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        assert!(residual_ratio(&path, &[0.0]).is_err());
    }

    #[test]
    fn dropped_column_can_reenter_with_the_opposite_sign() {
        // near n active columns a dropped column crosses to the other side
        let inst = ProblemInstance::generate(23, 25, 0, 1.0, 0.3, 6115443304598013311).unwrap();
        let top = inst.a.correlate(&inst.y).amax();
        let sol = homotopy_path(&inst.a, &inst.y, 1e-3 * top).unwrap();
        assert!(check_kkt(&inst.a, &inst.y, &sol.x, sol.gamma, 1e-8).optimal);
        let path = sol.path.unwrap();
        let flipped = path.segments().windows(3).any(|w| {
            w[0].support.iter().zip(&w[0].signs).any(|(j, s)| {
                !w[1].support.contains(j) && w[2].support.iter().zip(&w[2].signs).any(|(j2, s2)| j2 == j && s2 != s)
            })
        });
        assert!(flipped);
    }

    #[test]
    fn rejects_bad_inputs() {
        let inst = ProblemInstance::generate(10, 20, 2, 1.0, 0.1, 1).unwrap();
        assert!(matches!(solve_homotopy(&inst.a, &inst.y, 0.0), Err(Error::Domain(_))));
        assert!(matches!(solve_homotopy(&inst.a, &inst.y, f64::NAN), Err(Error::Domain(_))));
        let short = DVector::zeros(9);
        assert!(matches!(solve_homotopy(&inst.a, &short, 1.0), Err(Error::Shape(_))));
    }

    #[test]
    fn csv_export_one_row_per_breakpoint() {
        let inst = ProblemInstance::generate(15, 30, 2, 1.0, 0.1, 2).unwrap();
        let sol = homotopy_path(&inst.a, &inst.y, 0.0).unwrap();
        let path = sol.path.unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("path.csv");
        path.write_csv(&file).unwrap();
        let mut rdr = csv::Reader::from_path(&file).unwrap();
        let rows: Vec<PathRow> = rdr.deserialize().collect::<std::result::Result<_, _>>().unwrap();
        assert_eq!(rows.len(), path.breakpoints().len());
        assert_eq!(rows.last().unwrap().support_size, 0);
        assert_relative_eq!(rows.last().unwrap().residual_norm, inst.y.norm());
    }
}
