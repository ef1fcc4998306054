//! Intensity program: minimize ½λᵀAλ − bᵀλ subject to λ ≥ 0, Σλ ≤ 1 and
//! optional extra rows `row·λ ≤ rhs`.
//!
//! The solver is a dual active-set method (Goldfarb-Idnani): it starts at the
//! unconstrained minimizer and adds violated constraints one at a time while
//! keeping the multipliers of the working set nonnegative. Every iteration
//! re-solves the small equality-constrained system directly, which is cheap
//! for the handful of targets shrinkage uses. The final working set is
//! polished with one direct KKT solve.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::error::{MtsError, Result};
use crate::stats::{eig_sym_named, SymMatrix};

/// Identifies one inequality of the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ConstraintId {
    /// λ_k ≥ 0
    NonNegative(usize),
    /// Σλ ≤ 1
    SimplexSum,
    /// Caller-supplied row, by position.
    Extra(usize),
}

/// `row·λ ≤ rhs`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub row: Vec<f64>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(row: Vec<f64>, rhs: f64) -> Self {
        Self { row, rhs }
    }
}

#[derive(Debug, Clone)]
pub struct QpProblem {
    a: SymMatrix,
    b: DVector<f64>,
    extra: Vec<LinearConstraint>,
}

/// Eigenvalue tolerance for accepting `A` as PSD, relative to trace(A)/K.
const PSD_TOL: f64 = 1e-10;
/// Constraint violation (in normalized units) tolerated before a row is added.
const FEAS_TOL: f64 = 1e-13;

impl QpProblem {
    pub fn new(a: SymMatrix, b: DVector<f64>, extra: Vec<LinearConstraint>) -> Result<Self> {
        let k = b.len();
        if a.dim() != k {
            return Err(MtsError::DimensionMismatch {
                context: "QP matrix A".into(),
                expected: k,
                actual: a.dim(),
            });
        }
        for (i, c) in extra.iter().enumerate() {
            if c.row.len() != k {
                return Err(MtsError::DimensionMismatch {
                    context: format!("extra constraint {i}"),
                    expected: k,
                    actual: c.row.len(),
                });
            }
            if !c.rhs.is_finite() || c.row.iter().any(|v| !v.is_finite()) {
                return Err(MtsError::InvalidParameter(format!(
                    "extra constraint {i} has non-finite entries"
                )));
            }
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(MtsError::InvalidParameter("non-finite entry in A or b".into()));
        }
        if k > 0 {
            let eig = eig_sym_named(&a, "QP matrix A")?;
            let min = eig.eigenvalues[k - 1];
            let scale = (a.trace() / k as f64).abs();
            if min < -PSD_TOL * scale.max(f64::MIN_POSITIVE) {
                return Err(MtsError::NotPsd(min));
            }
        }
        Ok(Self { a, b, extra })
    }

    pub fn unconstrained_simplex(a: SymMatrix, b: DVector<f64>) -> Result<Self> {
        Self::new(a, b, Vec::new())
    }

    pub fn k(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &SymMatrix {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn extra(&self) -> &[LinearConstraint] {
        &self.extra
    }

    /// ½λᵀAλ − bᵀλ
    pub fn objective(&self, lambda: &DVector<f64>) -> Result<f64> {
        qp_objective(self, lambda)
    }

    /// All constraints as (id, g, h) meaning g·λ ≤ h, in index order.
    fn constraints(&self) -> Vec<(ConstraintId, DVector<f64>, f64)> {
        let k = self.k();
        let mut out = Vec::with_capacity(k + 1 + self.extra.len());
        for j in 0..k {
            let mut g = DVector::zeros(k);
            g[j] = -1.0;
            out.push((ConstraintId::NonNegative(j), g, 0.0));
        }
        out.push((ConstraintId::SimplexSum, DVector::from_element(k, 1.0), 1.0));
        for (i, c) in self.extra.iter().enumerate() {
            out.push((
                ConstraintId::Extra(i),
                DVector::from_column_slice(&c.row),
                c.rhs,
            ));
        }
        out
    }

    /// Largest violation of any constraint at `lambda` (0 when feasible).
    pub fn max_violation(&self, lambda: &DVector<f64>) -> f64 {
        self.constraints()
            .iter()
            .map(|(_, g, h)| (g.dot(lambda) - h).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, lambda: &DVector<f64>, tol: f64) -> bool {
        self.max_violation(lambda) <= tol
    }

    /// Ridge added before solving: nonzero only when A is singular or
    /// numerically ill-conditioned.
    pub fn ridge(&self) -> f64 {
        let k = self.k();
        if k == 0 {
            return 0.0;
        }
        let eig = match eig_sym_named(&self.a, "QP matrix A") {
            Ok(e) => e,
            Err(_) => return ridge_size(&self.a),
        };
        let max = eig.eigenvalues[0];
        let min = eig.eigenvalues[k - 1];
        if max <= 0.0 || min <= 1e-12 * max {
            ridge_size(&self.a)
        } else {
            0.0
        }
    }
}

fn ridge_size(a: &SymMatrix) -> f64 {
    let k = a.dim() as f64;
    1e-10 * (a.trace() / k).max(1.0)
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub lambda: DVector<f64>,
    pub objective: f64,
    /// Constraints tight at the optimum, in index order.
    pub active_set: Vec<ConstraintId>,
    /// Multipliers (≥ 0) matching `active_set`.
    pub multipliers: Vec<f64>,
    /// Ridge added to A before solving.
    pub ridge: f64,
}

/// ½λᵀAλ − bᵀλ
pub fn qp_objective(prob: &QpProblem, lambda: &DVector<f64>) -> Result<f64> {
    if lambda.len() != prob.k() {
        return Err(MtsError::DimensionMismatch {
            context: "intensity vector".into(),
            expected: prob.k(),
            actual: lambda.len(),
        });
    }
    Ok(0.5 * lambda.dot(&(prob.a.as_matrix() * lambda)) - prob.b.dot(lambda))
}

/// Largest KKT residual of `sol` for the (ridged) problem: stationarity,
/// primal feasibility, dual feasibility and complementary slackness.
pub fn kkt_residual(prob: &QpProblem, sol: &QpSolution) -> f64 {
    let k = prob.k();
    if k == 0 {
        return 0.0;
    }
    let cons = prob.constraints();
    let a = prob.a.as_matrix() + DMatrix::identity(k, k) * sol.ridge;
    let mut grad = &a * &sol.lambda - &prob.b;
    let mut worst: f64 = 0.0;
    for (id, u) in sol.active_set.iter().zip(&sol.multipliers) {
        let (_, g, h) = cons.iter().find(|(c, _, _)| c == id).expect("known id");
        grad += g * *u;
        worst = worst.max((-u).max(0.0));
        worst = worst.max((u * (g.dot(&sol.lambda) - h)).abs());
    }
    worst = worst.max(grad.amax());
    worst.max(prob.max_violation(&sol.lambda))
}

/// Exact solve of the intensity program.
pub fn solve(prob: &QpProblem) -> Result<QpSolution> {
    let k = prob.k();
    if k == 0 {
        return Ok(QpSolution {
            lambda: DVector::zeros(0),
            objective: 0.0,
            active_set: Vec::new(),
            multipliers: Vec::new(),
            ridge: 0.0,
        });
    }
    let ridge = prob.ridge();
    let a = prob.a.as_matrix() + DMatrix::identity(k, k) * ridge;
    let chol = Cholesky::new(a.clone())
        .ok_or_else(|| MtsError::Singular(" (QP matrix after ridge)".into()))?;

    // Normalized rows in ≥ form: n·λ ≥ c, with ‖n‖ = 1.
    let raw = prob.constraints();
    let mut normals = Vec::with_capacity(raw.len());
    let mut bounds = Vec::with_capacity(raw.len());
    let mut scales = Vec::with_capacity(raw.len());
    for (_, g, h) in &raw {
        let norm = g.norm();
        if norm == 0.0 {
            if *h < 0.0 {
                return Err(MtsError::Infeasible(vec![raw[normals.len()].0]));
            }
            normals.push(DVector::zeros(k));
            bounds.push(f64::NEG_INFINITY);
            scales.push(0.0);
            continue;
        }
        normals.push(-g / norm);
        bounds.push(-h / norm);
        scales.push(norm);
    }

    let mut x = chol.solve(&prob.b);
    let mut working: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let max_iter = 50 * (raw.len() + k) + 100;
    let mut iter = 0;

    loop {
        // Pick the most violated constraint; ties go to the lowest index.
        let mut pick: Option<(usize, f64)> = None;
        for j in 0..normals.len() {
            if working.contains(&j) || !bounds[j].is_finite() {
                continue;
            }
            let viol = bounds[j] - normals[j].dot(&x);
            if viol > FEAS_TOL && pick.map_or(true, |(_, v)| viol > v) {
                pick = Some((j, viol));
            }
        }
        let Some((p, _)) = pick else { break };
        let mut u_p = 0.0;

        loop {
            iter += 1;
            if iter > max_iter {
                return Err(MtsError::InvalidParameter(
                    "active-set iteration limit reached".into(),
                ));
            }
            let (z, r) = step_directions(&chol, &normals, &working, &normals[p]);
            let np = &normals[p];
            let curvature = np.dot(&z);
            let full_curv = np.dot(&chol.solve(np));

            // Dual step length: first working multiplier to hit zero.
            let mut t1 = f64::INFINITY;
            let mut block: Option<usize> = None;
            for (idx, &rj) in r.iter().enumerate() {
                if rj > 0.0 {
                    let t = u[idx] / rj;
                    if t < t1 || (t == t1 && block.map_or(true, |b| working[idx] < working[b])) {
                        t1 = t;
                        block = Some(idx);
                    }
                }
            }
            // Primal step length: makes constraint p tight.
            let t2 = if curvature > 1e-12 * full_curv {
                (bounds[p] - np.dot(&x)) / curvature
            } else {
                f64::INFINITY
            };

            if t1.is_infinite() && t2.is_infinite() {
                let mut ids: Vec<ConstraintId> =
                    working.iter().map(|&j| raw[j].0).chain([raw[p].0]).collect();
                ids.sort();
                return Err(MtsError::Infeasible(ids));
            }
            let t = t1.min(t2);
            if t2.is_finite() {
                x += &z * t;
            }
            for (ui, ri) in u.iter_mut().zip(r.iter()) {
                *ui -= t * ri;
            }
            u_p += t;
            if t2 <= t1 {
                working.push(p);
                u.push(u_p);
                break;
            }
            let b = block.expect("finite dual step has a blocking constraint");
            working.remove(b);
            u.remove(b);
        }
    }

    let (mut x, u) = polish(&a, &prob.b, &normals, &bounds, &working, &x, &u);
    for &j in &working {
        if let ConstraintId::NonNegative(i) = raw[j].0 {
            x[i] = 0.0;
        }
    }

    let mut pairs: Vec<(ConstraintId, f64)> = working
        .iter()
        .zip(&u)
        .map(|(&j, &uj)| (raw[j].0, uj / scales[j]))
        .collect();
    pairs.sort_by(|l, r| l.0.cmp(&r.0));
    let objective = 0.5 * x.dot(&(&a * &x)) - prob.b.dot(&x);
    Ok(QpSolution {
        lambda: x,
        objective,
        active_set: pairs.iter().map(|p| p.0).collect(),
        multipliers: pairs.iter().map(|p| p.1).collect(),
        ridge,
    })
}

/// Primal direction `z` and dual direction `r` for adding normal `np` to
/// the working set.
fn step_directions(
    chol: &Cholesky<f64, Dyn>,
    normals: &[DVector<f64>],
    working: &[usize],
    np: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let ainv_np = chol.solve(np);
    if working.is_empty() {
        return (ainv_np, DVector::zeros(0));
    }
    let k = np.len();
    let q = working.len();
    let n = DMatrix::from_fn(k, q, |i, c| normals[working[c]][i]);
    let ainv_n = chol.solve(&n);
    let m = n.transpose() * &ainv_n;
    let rhs = n.transpose() * &ainv_np;
    let r = m
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| m.lu().solve(&rhs))
        .unwrap_or_else(|| DVector::zeros(q));
    let z = ainv_np - ainv_n * &r;
    (z, r)
}

/// Re-solves the KKT system on the final working set; kept only if it is at
/// least as feasible and dual-feasible as the iterate.
fn polish(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    normals: &[DVector<f64>],
    bounds: &[f64],
    working: &[usize],
    x: &DVector<f64>,
    u: &[f64],
) -> (DVector<f64>, Vec<f64>) {
    let k = b.len();
    let q = working.len();
    let dim = k + q;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (k, k)).copy_from(a);
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, k).copy_from(b);
    for (c, &j) in working.iter().enumerate() {
        for i in 0..k {
            kkt[(i, k + c)] = -normals[j][i];
            kkt[(k + c, i)] = normals[j][i];
        }
        rhs[k + c] = bounds[j];
    }
    let Some(sol) = kkt.lu().solve(&rhs) else {
        return (x.clone(), u.to_vec());
    };
    let xp = sol.rows(0, k).into_owned();
    let up: Vec<f64> = sol.rows(k, q).iter().copied().collect();
    let violation = |v: &DVector<f64>| {
        normals
            .iter()
            .zip(bounds)
            .filter(|(_, c)| c.is_finite())
            .map(|(n, c)| (c - n.dot(v)).max(0.0))
            .fold(0.0, f64::max)
    };
    let ok = up.iter().all(|&m| m >= -1e-12)
        && xp.iter().all(|v| v.is_finite())
        && violation(&xp) <= violation(x).max(FEAS_TOL);
    if ok {
        (xp, up.into_iter().map(|m| m.max(0.0)).collect())
    } else {
        (x.clone(), u.to_vec())
    }
}

/// Exhaustive grid oracle over λ_k ∈ {0, 1/g, …, 1}. The last coordinate is
/// minimized over its grid exactly (the objective is convex along it), so
/// only g^(K−1) grid lines are enumerated.
pub fn brute_force_solve(prob: &QpProblem, grid_steps: usize) -> Result<QpSolution> {
    let k = prob.k();
    if k > 4 {
        return Err(MtsError::TooManyTargets(k));
    }
    if grid_steps < 1 {
        return Err(MtsError::InvalidParameter("grid_steps must be positive".into()));
    }
    if k == 0 {
        return solve(prob);
    }
    let g = grid_steps;
    let step = 1.0 / g as f64;
    let a = prob.a.as_matrix();
    let last = k - 1;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut idx = vec![0usize; last];
    let mut lambda = DVector::zeros(k);

    loop {
        let used: usize = idx.iter().sum();
        if used <= g {
            for (i, &v) in idx.iter().enumerate() {
                lambda[i] = v as f64 * step;
            }
            // Feasible integer range for the last coordinate.
            let mut lo = 0i64;
            let mut hi = (g - used) as i64;
            for c in &prob.extra {
                let partial: f64 = (0..last).map(|i| c.row[i] * lambda[i]).sum();
                let coef = c.row[last];
                let slack = c.rhs - partial;
                if coef.abs() < 1e-300 {
                    if slack < -1e-12 {
                        hi = -1;
                    }
                } else if coef > 0.0 {
                    hi = hi.min(((slack / coef + 1e-12) * g as f64).floor() as i64);
                } else {
                    lo = lo.max(((slack / coef - 1e-12) * g as f64).ceil() as i64);
                }
            }
            if lo <= hi {
                // Objective along the last coordinate: ½a t² + c t + const.
                lambda[last] = 0.0;
                let al = a[(last, last)];
                let cl: f64 = (0..last).map(|i| a[(last, i)] * lambda[i]).sum::<f64>() - prob.b[last];
                let candidates: Vec<i64> = if al > 0.0 {
                    let t = (-cl / al * g as f64).clamp(lo as f64, hi as f64);
                    vec![t.floor() as i64, t.ceil() as i64]
                } else {
                    vec![lo, hi]
                };
                for c in candidates {
                    let c = c.clamp(lo, hi);
                    lambda[last] = c as f64 * step;
                    let obj = qp_objective(prob, &lambda)?;
                    if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                        best = Some((obj, lambda.clone()));
                    }
                }
            }
        }
        // Odometer increment over the first K−1 coordinates.
        let mut pos = 0;
        loop {
            if pos == last {
                let (objective, lambda) = best.ok_or_else(|| {
                    MtsError::Infeasible(
                        (0..prob.extra.len()).map(ConstraintId::Extra).collect(),
                    )
                })?;
                return Ok(QpSolution {
                    lambda,
                    objective,
                    active_set: Vec::new(),
                    multipliers: Vec::new(),
                    ridge: 0.0,
                });
            }
            idx[pos] += 1;
            if idx[..=pos].iter().sum::<usize>() <= g {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_psd, rng};
    use rand::Rng;

    fn prob(a: &[f64], b: &[f64]) -> QpProblem {
        let k = b.len();
        QpProblem::new(
            SymMatrix::new(DMatrix::from_row_slice(k, k, a)),
            DVector::from_column_slice(b),
            Vec::new(),
        )
        .unwrap()
    }

    #[test]
    fn objective_examples() {
        let p = prob(&[2.0], &[1.0]);
        assert_eq!(p.objective(&DVector::from_vec(vec![0.0])).unwrap(), 0.0);
        assert_eq!(p.objective(&DVector::from_vec(vec![0.5])).unwrap(), -0.25);
        assert!(p.objective(&DVector::from_vec(vec![0.5, 0.1])).is_err());
    }

    #[test]
    fn objective_matches_double_sum() {
        let mut r = rng(1);
        let a = random_psd(&mut r, 3);
        let b = DVector::from_fn(3, |_, _| r.gen_range(-1.0..1.0));
        let p = QpProblem::unconstrained_simplex(a.clone(), b.clone()).unwrap();
        for i in 0..=4 {
            for j in 0..=(4 - i) {
                let l = DVector::from_vec(vec![i as f64 / 4.0, j as f64 / 4.0, 0.1]);
                let mut quad = 0.0;
                for s in 0..3 {
                    for t in 0..3 {
                        quad += l[s] * a[(s, t)] * l[t];
                    }
                }
                let lin: f64 = (0..3).map(|s| b[s] * l[s]).sum();
                let direct = 0.5 * quad - lin;
                assert!((p.objective(&l).unwrap() - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn separable_boundary_optimum() {
        let s = solve(&prob(&[2.0, 0.0, 0.0, 2.0], &[1.0, 1.0])).unwrap();
        assert!((s.lambda[0] - 0.5).abs() < 1e-14 && (s.lambda[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn scalar_cases() {
        assert_eq!(solve(&prob(&[1.0], &[-0.5])).unwrap().lambda[0], 0.0);
        let s = solve(&prob(&[1.0], &[5.0])).unwrap();
        assert_eq!(s.lambda[0], 1.0);
        assert_eq!(s.active_set, vec![ConstraintId::SimplexSum]);
        assert!((s.multipliers[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn empty_program() {
        let p = QpProblem::new(SymMatrix::new(DMatrix::zeros(0, 0)), DVector::zeros(0), vec![]).unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.lambda.len(), 0);
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn singular_matrix_gets_ridge() {
        let p = prob(&[0.0], &[1.0]);
        let s = solve(&p).unwrap();
        assert!(s.ridge > 0.0);
        assert_eq!(s.lambda[0], 1.0);
        let dup = prob(&[1.0, 1.0, 1.0, 1.0], &[0.3, 0.3]);
        let s = solve(&dup).unwrap();
        assert!((s.lambda.sum() - 0.3).abs() < 1e-8);
        assert!(kkt_residual(&dup, &s) <= 1e-8);
    }

    #[test]
    fn rejects_indefinite() {
        let err = QpProblem::new(
            SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])),
            DVector::zeros(2),
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, MtsError::NotPsd(_)));
    }

    #[test]
    fn extra_constraint_binds() {
        let p = QpProblem::new(
            SymMatrix::new(DMatrix::from_row_slice(1, 1, &[1e-3])),
            DVector::from_vec(vec![1.0]),
            vec![LinearConstraint::new(vec![0.2], 0.1)],
        )
        .unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.lambda[0], 0.5);
        assert_eq!(s.active_set, vec![ConstraintId::Extra(0)]);
    }

    #[test]
    fn infeasible_extras_are_reported() {
        let p = QpProblem::new(
            SymMatrix::identity(2),
            DVector::from_vec(vec![0.1, 0.1]),
            vec![LinearConstraint::new(vec![-1.0, -1.0], -2.0)],
        )
        .unwrap();
        match solve(&p) {
            Err(MtsError::Infeasible(ids)) => {
                assert!(ids.contains(&ConstraintId::Extra(0)));
                assert!(ids.contains(&ConstraintId::SimplexSum));
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn infeasible_start_is_handled() {
        // Origin violates the extra row; optimum lies on it.
        let p = QpProblem::new(
            SymMatrix::identity(2),
            DVector::zeros(2),
            vec![LinearConstraint::new(vec![-1.0, 0.0], -0.25)],
        )
        .unwrap();
        let s = solve(&p).unwrap();
        assert!((s.lambda[0] - 0.25).abs() < 1e-14);
        assert!(s.lambda[1].abs() < 1e-14);
    }

    #[test]
    fn brute_force_separable() {
        let p = prob(&[2.0, 0.0, 0.0, 2.0], &[1.0, 1.0]);
        let s = brute_force_solve(&p, 1000).unwrap();
        assert!((s.lambda[0] - 0.5).abs() <= 1e-3 && (s.lambda[1] - 0.5).abs() <= 1e-3);
        assert!(brute_force_solve(&prob(&[1.0; 25], &[0.0; 5]), 100).is_err());
    }

    #[test]
    fn brute_force_resolution_bound() {
        let mut r = rng(17);
        let g = 400;
        for _ in 0..50 {
            let a = random_psd(&mut r, 2);
            let b = DVector::from_fn(2, |_, _| r.gen_range(-0.5..2.0));
            let p = QpProblem::unconstrained_simplex(a, b).unwrap();
            let exact = solve(&p).unwrap();
            let grid = brute_force_solve(&p, g).unwrap();
            assert!(grid.objective >= exact.objective - 1e-9);
            let diff = (&grid.lambda - &exact.lambda).amax();
            assert!(diff <= 2.0 / g as f64, "diff {diff}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};
        use rand::{Rng, SeedableRng};

        fn random_problem(seed: u64, k: usize, extras: bool) -> QpProblem {
            let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = random_psd(&mut r, k);
            let b = DVector::from_fn(k, |_, _| r.gen_range(-1.0..3.0));
            let extra = if extras {
                vec![LinearConstraint::new(
                    (0..k).map(|_| r.gen_range(0.0..1.0)).collect(),
                    r.gen_range(0.1..1.0),
                )]
            } else {
                vec![]
            };
            QpProblem::new(a, b, extra).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(96))]

            #[test]
            fn solution_is_feasible_and_kkt(seed in any::<u64>(), k in 1usize..6, extras in any::<bool>()) {
                let p = random_problem(seed, k, extras);
                let s = solve(&p).unwrap();
                prop_assert!(s.lambda.iter().all(|&l| l >= -1e-12));
                prop_assert!(s.lambda.sum() <= 1.0 + 1e-12);
                prop_assert!(p.max_violation(&s.lambda) <= 1e-10);
                prop_assert!(kkt_residual(&p, &s) <= 1e-8);
            }

            #[test]
            fn scale_invariance(seed in any::<u64>(), k in 1usize..5, c in 0.01f64..100.0) {
                let p = random_problem(seed, k, false);
                let scaled = QpProblem::new(
                    SymMatrix::new(p.a().as_matrix() * c),
                    p.b() * c,
                    vec![],
                ).unwrap();
                let l1 = solve(&p).unwrap().lambda;
                let l2 = solve(&scaled).unwrap().lambda;
                prop_assert!((l1 - l2).amax() <= 1e-9);
            }

            #[test]
            fn nonpositive_b_gives_zero(seed in any::<u64>(), k in 1usize..6) {
                let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let a = random_psd(&mut r, k);
                let b = DVector::from_fn(k, |_, _| -r.gen_range(0.0..2.0));
                let p = QpProblem::unconstrained_simplex(a, b).unwrap();
                let s = solve(&p).unwrap();
                prop_assert!(s.lambda.iter().all(|&l| l == 0.0), "{:?}", s.lambda);
            }

            #[test]
            fn dominates_grid(seed in any::<u64>(), k in 1usize..4, extras in any::<bool>()) {
                let p = random_problem(seed, k, extras);
                let exact = solve(&p).unwrap();
                let grid = brute_force_solve(&p, 120).unwrap();
                prop_assert!(exact.objective <= grid.objective + 1e-9 * (1.0 + grid.objective.abs()));
            }
        }
    }
}
