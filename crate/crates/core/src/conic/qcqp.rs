//! Linear-objective programs with convex quadratic constraints and
//! per-coordinate norm bounds, lowered to SOCP form.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT, SolverStatus,
    SupportedConeT,
};
use nalgebra::{DMatrix, DVector};

use super::{SolveStatus, SolverOutcome, FEASIBILITY_TOL};
use crate::error::{GkgError, Result};

/// Affine expression coeffs·x + constant over the real decision vector.
#[derive(Debug, Clone)]
pub struct LinearExpr {
    pub coeffs: DVector<f64>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn new(coeffs: DVector<f64>, constant: f64) -> Self {
        Self { coeffs, constant }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.coeffs.dot(x) + self.constant
    }
}

/// xᵀ F x ≤ upper(x) with F symmetric PSD, stored either densely or as a
/// factor C with F = CᵀC (skips the eigendecomposition in the lowering).
#[derive(Debug, Clone)]
pub enum QuadRep {
    Dense(DMatrix<f64>),
    Factored(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct QuadraticConstraint {
    pub rep: QuadRep,
    pub upper: LinearExpr,
}

impl QuadraticConstraint {
    pub fn dense(form: DMatrix<f64>, upper: LinearExpr) -> Self {
        Self { rep: QuadRep::Dense(form), upper }
    }

    /// Constraint ‖c x‖² ≤ upper(x).
    pub fn factored(c: DMatrix<f64>, upper: LinearExpr) -> Self {
        Self { rep: QuadRep::Factored(c), upper }
    }

    pub fn ncols(&self) -> usize {
        match &self.rep {
            QuadRep::Dense(f) => f.ncols(),
            QuadRep::Factored(c) => c.ncols(),
        }
    }

    pub fn quad_value(&self, x: &DVector<f64>) -> f64 {
        match &self.rep {
            QuadRep::Dense(f) => (x.transpose() * f * x)[(0, 0)],
            QuadRep::Factored(c) => (c * x).norm_squared(),
        }
    }

    pub fn dense_form(&self) -> DMatrix<f64> {
        match &self.rep {
            QuadRep::Dense(f) => f.clone(),
            QuadRep::Factored(c) => c.transpose() * c,
        }
    }

    fn scale(&self) -> f64 {
        match &self.rep {
            QuadRep::Dense(f) => f.norm().max(1.0),
            QuadRep::Factored(c) => c.norm_squared().max(1.0),
        }
    }
}

/// ‖x[indices]‖₂ ≤ radius.
#[derive(Debug, Clone)]
pub struct NormBound {
    pub indices: Vec<usize>,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct ConvexQuadraticProgram {
    pub n: usize,
    /// Objective, maximized.
    pub maximize: LinearExpr,
    pub quadratic: Vec<QuadraticConstraint>,
    /// expr(x) ≤ 0 rows.
    pub linear: Vec<LinearExpr>,
    pub norm_bounds: Vec<NormBound>,
}

struct Triplets {
    rows: usize,
    entries: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

impl Triplets {
    fn new() -> Self {
        Self { rows: 0, entries: vec![], b: vec![], cones: vec![] }
    }

    fn push_row(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, b: f64) {
        for (c, v) in coeffs {
            if v != 0.0 {
                self.entries.push((self.rows, c, v));
            }
        }
        self.b.push(b);
        self.rows += 1;
    }

    fn into_csc(self, ncols: usize) -> (CscMatrix<f64>, Vec<f64>, Vec<SupportedConeT<f64>>) {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![vec![]; ncols];
        for (r, c, v) in self.entries {
            cols[c].push((r, v));
        }
        let mut colptr = vec![0usize];
        let mut rowval = vec![];
        let mut nzval = vec![];
        for col in cols.iter_mut() {
            col.sort_by_key(|e| e.0);
            for &(r, v) in col.iter() {
                rowval.push(r);
                nzval.push(v);
            }
            colptr.push(rowval.len());
        }
        (CscMatrix::new(self.rows, ncols, colptr, rowval, nzval), self.b, self.cones)
    }
}

/// PSD factorization F = CᵀC keeping eigendirections above tolerance.
/// Errors if F is asymmetric or indefinite beyond tolerance.
fn psd_factor(form: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = form.norm().max(1.0);
    if (form - form.transpose()).norm() > 1e-8 * scale {
        return Err(GkgError::Solver("quadratic form is not symmetric".into()));
    }
    let sym = (form + form.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = form.nrows();
    let mut rows = vec![];
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -1e-8 * scale {
            return Err(GkgError::Solver(format!("quadratic form has negative eigenvalue {lambda:.3e}")));
        }
        if lambda > 1e-12 * scale {
            let row: Vec<f64> = (0..n).map(|i| lambda.sqrt() * eig.eigenvectors[(i, j)]).collect();
            rows.push(row);
        }
    }
    Ok(DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]))
}

fn map_status(status: SolverStatus) -> SolveStatus {
    match status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::IterationLimit,
        _ => SolveStatus::NumericalFailure,
    }
}

/// Worst scaled violation of the original constraints at x.
fn max_residual(p: &ConvexQuadraticProgram, x: &DVector<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for qc in &p.quadratic {
        let q = qc.quad_value(x);
        let bound = qc.upper.eval(x);
        worst = worst.max((q - bound) / qc.scale());
    }
    for lc in &p.linear {
        let scale = lc.coeffs.norm().max(1.0);
        worst = worst.max(lc.eval(x) / scale);
    }
    for nb in &p.norm_bounds {
        let norm: f64 = nb.indices.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt();
        worst = worst.max(norm - nb.radius);
    }
    worst
}

pub fn solve_qcqp(p: &ConvexQuadraticProgram) -> Result<SolverOutcome<DVector<f64>>> {
    let n = p.n;
    if p.maximize.coeffs.len() != n {
        return Err(GkgError::Solver("objective dimension mismatch".into()));
    }
    let mut t = Triplets::new();

    for lc in &p.linear {
        if lc.coeffs.len() != n {
            return Err(GkgError::Solver("linear constraint dimension mismatch".into()));
        }
        // coeffs·x + constant <= 0  →  b − Ax ∈ R₊ with A = coeffs, b = −constant
        t.push_row(lc.coeffs.iter().cloned().enumerate(), -lc.constant);
        t.cones.push(NonnegativeConeT(1));
    }

    for qc in &p.quadratic {
        if qc.ncols() != n || qc.upper.coeffs.len() != n {
            return Err(GkgError::Solver("quadratic constraint dimension mismatch".into()));
        }
        let c = match &qc.rep {
            QuadRep::Dense(f) => psd_factor(f)?,
            QuadRep::Factored(f) => f.clone(),
        };
        let r = c.nrows();
        // ‖Cx‖² ≤ t(x)  ⇔  ‖(Cx, (t−1)/2)‖ ≤ (t+1)/2
        let u = &qc.upper;
        t.push_row(u.coeffs.iter().map(|&v| -v / 2.0).enumerate(), (u.constant + 1.0) / 2.0);
        for i in 0..r {
            t.push_row((0..n).map(|j| (j, -c[(i, j)])), 0.0);
        }
        t.push_row(u.coeffs.iter().map(|&v| -v / 2.0).enumerate(), (u.constant - 1.0) / 2.0);
        t.cones.push(SecondOrderConeT(r + 2));
    }

    for nb in &p.norm_bounds {
        t.push_row(std::iter::empty(), nb.radius);
        for &idx in &nb.indices {
            if idx >= n {
                return Err(GkgError::Solver("norm bound index out of range".into()));
            }
            t.push_row([(idx, -1.0)], 0.0);
        }
        t.cones.push(SecondOrderConeT(nb.indices.len() + 1));
    }

    let (a, b, cones) = t.into_csc(n);
    let pmat = CscMatrix::zeros((n, n));
    let q: Vec<f64> = p.maximize.coeffs.iter().map(|&v| -v).collect();
    let settings = DefaultSettings {
        verbose: false,
        tol_feas: 1e-8,
        tol_gap_abs: 1e-9,
        tol_gap_rel: 1e-7,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&pmat, &q, &a, &b, &cones, settings)
        .map_err(|e| GkgError::Solver(format!("clarabel setup: {e:?}")))?;
    solver.solve();

    let status = map_status(solver.solution.status);
    if status != SolveStatus::Optimal {
        return Ok(SolverOutcome::status_only(status));
    }
    let x = DVector::from_vec(solver.solution.x.clone());
    let residual = max_residual(p, &x);
    let objective = p.maximize.eval(&x);
    if residual > FEASIBILITY_TOL {
        return Ok(SolverOutcome {
            status: SolveStatus::NumericalFailure,
            solution: Some(x),
            objective: Some(objective),
            max_residual: residual,
        });
    }
    Ok(SolverOutcome {
        status: SolveStatus::Optimal,
        solution: Some(x),
        objective: Some(objective),
        max_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn e(n: usize, vals: &[(usize, f64)], c: f64) -> LinearExpr {
        let mut v = DVector::zeros(n);
        for &(i, val) in vals {
            v[i] = val;
        }
        LinearExpr::new(v, c)
    }

    #[test]
    fn scalar_box_optimum() {
        // maximize c s.t. c <= x, |x| <= 1, vars [x, c] → c* = 1
        let p = ConvexQuadraticProgram {
            n: 2,
            maximize: e(2, &[(1, 1.0)], 0.0),
            quadratic: vec![],
            linear: vec![e(2, &[(1, 1.0), (0, -1.0)], 0.0)],
            norm_bounds: vec![NormBound { indices: vec![0], radius: 1.0 }],
        };
        let out = solve_qcqp(&p).unwrap();
        assert!(out.is_optimal());
        let x = out.solution.unwrap();
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn linearized_parabola_at_one() {
        // maximize c s.t. c <= 2x − 1 (parabola x² linearized at x₀=1), |x| <= 1 → c* = 1
        let p = ConvexQuadraticProgram {
            n: 2,
            maximize: e(2, &[(1, 1.0)], 0.0),
            quadratic: vec![],
            linear: vec![e(2, &[(1, 1.0), (0, -2.0)], 1.0)],
            norm_bounds: vec![NormBound { indices: vec![0], radius: 1.0 }],
        };
        let out = solve_qcqp(&p).unwrap();
        assert!(out.is_optimal());
        assert_abs_diff_eq!(out.objective.unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn quadratic_ball_constraint() {
        // maximize x0 + x1 s.t. xᵀIx <= 1 → optimum √2 at (1/√2, 1/√2)
        let p = ConvexQuadraticProgram {
            n: 2,
            maximize: e(2, &[(0, 1.0), (1, 1.0)], 0.0),
            quadratic: vec![QuadraticConstraint::dense(DMatrix::identity(2, 2), e(2, &[], 1.0))],
            linear: vec![],
            norm_bounds: vec![],
        };
        let out = solve_qcqp(&p).unwrap();
        assert!(out.is_optimal());
        assert_abs_diff_eq!(out.objective.unwrap(), 2f64.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn random_qcqp_matches_grid_search() {
        // 4-dim box-constrained problem vs a dense grid oracle
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let n = 4;
        let obj: DVector<f64> = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        // random PSD form
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0f64));
        let form = &g * g.transpose();
        let bound = 2.0;
        let p = ConvexQuadraticProgram {
            n,
            maximize: LinearExpr::new(obj.clone(), 0.0),
            quadratic: vec![QuadraticConstraint::dense(form.clone(), e(n, &[], bound))],
            linear: vec![],
            norm_bounds: (0..n).map(|i| NormBound { indices: vec![i], radius: 1.0 }).collect(),
        };
        let out = solve_qcqp(&p).unwrap();
        assert!(out.is_optimal());

        let steps = 21;
        let mut best = f64::NEG_INFINITY;
        let mut idx = vec![0usize; n];
        loop {
            let x = DVector::from_fn(n, |i, _| -1.0 + 2.0 * idx[i] as f64 / (steps - 1) as f64);
            let q = (x.transpose() * &form * &x)[(0, 0)];
            if q <= bound {
                best = best.max(obj.dot(&x));
            }
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < steps {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == n {
                    break;
                }
            }
            if d == n {
                break;
            }
        }
        let solved = out.objective.unwrap();
        assert!(solved >= best - 1e-3, "solver {solved} below grid {best}");
    }

    #[test]
    fn infeasible_detected() {
        // x <= -2 and x >= 2
        let p = ConvexQuadraticProgram {
            n: 1,
            maximize: e(1, &[(0, 1.0)], 0.0),
            quadratic: vec![],
            linear: vec![e(1, &[(0, 1.0)], 2.0), e(1, &[(0, -1.0)], 2.0)],
            norm_bounds: vec![],
        };
        let out = solve_qcqp(&p).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_flagged() {
        let p = ConvexQuadraticProgram {
            n: 1,
            maximize: e(1, &[(0, 1.0)], 0.0),
            quadratic: vec![],
            linear: vec![],
            norm_bounds: vec![],
        };
        let out = solve_qcqp(&p).unwrap();
        assert_eq!(out.status, SolveStatus::Unbounded);
    }

    #[test]
    fn non_psd_form_rejected() {
        let mut form = DMatrix::identity(2, 2);
        form[(0, 0)] = -1.0;
        let p = ConvexQuadraticProgram {
            n: 2,
            maximize: e(2, &[(0, 1.0)], 0.0),
            quadratic: vec![QuadraticConstraint::dense(form, e(2, &[], 1.0))],
            linear: vec![],
            norm_bounds: vec![],
        };
        assert!(solve_qcqp(&p).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = ConvexQuadraticProgram {
            n: 3,
            maximize: e(2, &[(0, 1.0)], 0.0),
            quadratic: vec![],
            linear: vec![],
            norm_bounds: vec![],
        };
        assert!(solve_qcqp(&p).is_err());
    }

    #[test]
    fn deterministic_across_runs() {
        let p = ConvexQuadraticProgram {
            n: 2,
            maximize: e(2, &[(0, 1.0), (1, 0.5)], 0.0),
            quadratic: vec![QuadraticConstraint::dense(DMatrix::identity(2, 2), e(2, &[], 1.5))],
            linear: vec![],
            norm_bounds: vec![NormBound { indices: vec![0, 1], radius: 1.2 }],
        };
        let a = solve_qcqp(&p).unwrap();
        let b = solve_qcqp(&p).unwrap();
        assert_eq!(a.status, b.status);
        assert!((a.objective.unwrap() - b.objective.unwrap()).abs() < 1e-9);
    }
}
