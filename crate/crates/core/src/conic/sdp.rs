//! Trace-constrained semidefinite programs over a complex Hermitian matrix
//! variable, solved through the real embedding [Re −Im; Im Re].

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT, SolverStatus,
    SupportedConeT,
};
use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{SolveStatus, SolverOutcome, FEASIBILITY_TOL};
use crate::error::{GkgError, Result};

/// tr(A W) ≤ upper with A Hermitian (the trace is then real).
#[derive(Debug, Clone)]
pub struct TraceConstraint {
    pub matrix: DMatrix<Complex64>,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct SemidefiniteProgram {
    /// Complex dimension N of the matrix variable W ⪰ 0.
    pub dim: usize,
    /// Maximize tr(C W); `None` solves pure feasibility.
    pub maximize: Option<DMatrix<Complex64>>,
    pub constraints: Vec<TraceConstraint>,
}

fn check_hermitian(a: &DMatrix<Complex64>, dim: usize) -> Result<()> {
    if a.nrows() != dim || a.ncols() != dim {
        return Err(GkgError::Solver("constraint matrix dimension mismatch".into()));
    }
    let scale = a.norm().max(1.0);
    if (a - a.adjoint()).norm() > 1e-8 * scale {
        return Err(GkgError::Solver("constraint matrix is not Hermitian".into()));
    }
    Ok(())
}

/// Real embedding E(A) = [Re(A) −Im(A); Im(A) Re(A)], symmetric for Hermitian A.
fn embed(a: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut e = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            e[(i, j)] = a[(i, j)].re;
            e[(i, j + n)] = -a[(i, j)].im;
            e[(i + n, j)] = a[(i, j)].im;
            e[(i + n, j + n)] = a[(i, j)].re;
        }
    }
    // symmetrize away roundoff
    let et = e.transpose();
    (e + et) * 0.5
}

/// Hermitian part recovered from a symmetric 2N×2N matrix.
fn unembed(x: &DMatrix<f64>, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |i, j| {
        let re = (x[(i, j)] + x[(i + n, j + n)]) * 0.5;
        let im = (x[(i + n, j)] - x[(i, j + n)]) * 0.5;
        Complex64::new(re, im)
    })
}

/// Scaled upper-triangle column-major vectorization; preserves trace inner
/// products: svec(A)·svec(X) = tr(A X).
fn svec(a: &DMatrix<f64>) -> Vec<f64> {
    let m = a.nrows();
    let sqrt2 = 2f64.sqrt();
    let mut out = Vec::with_capacity(m * (m + 1) / 2);
    for col in 0..m {
        for row in 0..=col {
            if row == col {
                out.push(a[(row, col)]);
            } else {
                out.push(a[(row, col)] * sqrt2);
            }
        }
    }
    out
}

fn unsvec(v: &[f64], m: usize) -> DMatrix<f64> {
    let sqrt2 = 2f64.sqrt();
    let mut a = DMatrix::zeros(m, m);
    let mut idx = 0;
    for col in 0..m {
        for row in 0..=col {
            if row == col {
                a[(row, col)] = v[idx];
            } else {
                a[(row, col)] = v[idx] / sqrt2;
                a[(col, row)] = v[idx] / sqrt2;
            }
            idx += 1;
        }
    }
    a
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

/// Real part of tr(A W).
pub fn trace_inner(a: &DMatrix<Complex64>, w: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * w[(j, i)]).re;
        }
    }
    acc
}

fn max_residual(p: &SemidefiniteProgram, w: &DMatrix<Complex64>) -> f64 {
    let mut worst: f64 = 0.0;
    for tc in &p.constraints {
        let scale = tc.matrix.norm().max(1.0);
        worst = worst.max((trace_inner(&tc.matrix, w) - tc.upper) / scale);
    }
    // PSD violation of the Hermitian iterate
    let eig = w.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = w.norm().max(1.0);
    worst.max(-min / scale)
}

/// Swallows panic reports that originate inside clarabel; they are caught
/// and mapped to `NumericalFailure`, so the backtrace is just noise.
fn quiet_clarabel_panics() {
    static HOOK: std::sync::Once = std::sync::Once::new();
    HOOK.call_once(|| {
        let prev = std::panic::take_hook();
        std::panic::set_hook(Box::new(move |info| {
            if info.location().is_some_and(|l| l.file().contains("clarabel")) {
                return;
            }
            prev(info);
        }));
    });
}

pub fn solve_sdp(p: &SemidefiniteProgram) -> Result<SolverOutcome<DMatrix<Complex64>>> {
    let n = p.dim;
    let m = 2 * n;
    let nvars = m * (m + 1) / 2;
    if let Some(c) = &p.maximize {
        check_hermitian(c, n)?;
    }
    for tc in &p.constraints {
        check_hermitian(&tc.matrix, n)?;
    }

    // rows: one nonneg row per trace constraint, then the PSD triangle block
    let nrows = p.constraints.len() + nvars;
    let mut colptr = vec![0usize];
    let mut rowval: Vec<usize> = vec![];
    let mut nzval: Vec<f64> = vec![];
    // per-row normalization: the raw data can span many orders of magnitude
    // (noise floors vs power budgets), which stalls the interior point method
    let row_scale: Vec<f64> = p
        .constraints
        .iter()
        .map(|tc| {
            let s = tc.matrix.norm().max(tc.upper.abs());
            if s > 0.0 {
                1.0 / s
            } else {
                1.0
            }
        })
        .collect();
    // column-major assembly: column j holds constraint coefficients then −1 at
    // the PSD block row offset
    let svec_rows: Vec<Vec<f64>> = p.constraints.iter().map(|tc| svec(&embed(&tc.matrix))).collect();
    for j in 0..nvars {
        for (r, sv) in svec_rows.iter().enumerate() {
            if sv[j] != 0.0 {
                rowval.push(r);
                nzval.push(sv[j] * row_scale[r]);
            }
        }
        rowval.push(p.constraints.len() + j);
        nzval.push(-1.0);
        colptr.push(rowval.len());
    }
    let a = CscMatrix::new(nrows, nvars, colptr, rowval, nzval);
    let mut b = vec![0.0; nrows];
    for (r, tc) in p.constraints.iter().enumerate() {
        // tr(E(A) X) = 2 tr(A W)
        b[r] = 2.0 * tc.upper * row_scale[r];
    }
    let cones: Vec<SupportedConeT<f64>> = vec![
        NonnegativeConeT(p.constraints.len()),
        PSDTriangleConeT(m),
    ];
    let q: Vec<f64> = match &p.maximize {
        Some(c) => {
            let s = c.norm();
            let s = if s > 0.0 { 1.0 / s } else { 1.0 };
            svec(&embed(c)).iter().map(|&v| -v * s).collect()
        }
        None => vec![0.0; nvars],
    };
    let pmat = CscMatrix::zeros((nvars, nvars));
    let settings = DefaultSettings {
        verbose: std::env::var("GKG_SDP_VERBOSE").is_ok(),
        tol_feas: 1e-7,
        tol_gap_abs: 1e-8,
        tol_gap_rel: 1e-6,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&pmat, &q, &a, &b, &cones, settings)
        .map_err(|e| GkgError::Solver(format!("clarabel setup: {e:?}")))?;
    // Clarabel can panic in its LAPACK eigenvalue calls on badly conditioned
    // iterates; treat that like any other numerical failure
    quiet_clarabel_panics();
    if std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| solver.solve())).is_err() {
        return Ok(SolverOutcome::status_only(SolveStatus::NumericalFailure));
    }

    let status = map_status(solver.solution.status);
    if status != SolveStatus::Optimal {
        return Ok(SolverOutcome::status_only(status));
    }
    let x = unsvec(&solver.solution.x, m);
    let w = unembed(&x, n);
    let residual = max_residual(p, &w);
    let objective = p.maximize.as_ref().map(|c| trace_inner(c, &w));
    if residual > FEASIBILITY_TOL {
        return Ok(SolverOutcome {
            status: SolveStatus::NumericalFailure,
            solution: Some(w),
            objective,
            max_residual: residual,
        });
    }
    Ok(SolverOutcome { status: SolveStatus::Optimal, solution: Some(w), objective, max_residual: residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cmat(n: usize, f: impl Fn(usize, usize) -> Complex64) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |i, j| f(i, j))
    }

    fn ident(n: usize) -> DMatrix<Complex64> {
        DMatrix::identity(n, n)
    }

    #[test]
    fn embedding_roundtrips_trace() {
        // tr(E(A) E(W)) = 2 tr(A W) and unembed(embed(W)) = W
        let a = cmat(2, |i, j| {
            if i == j {
                Complex64::new(1.0 + i as f64, 0.0)
            } else if i < j {
                Complex64::new(0.3, 0.7)
            } else {
                Complex64::new(0.3, -0.7)
            }
        });
        let w = cmat(2, |i, j| {
            if i == j {
                Complex64::new(2.0 - i as f64 * 0.5, 0.0)
            } else if i < j {
                Complex64::new(-0.1, 0.4)
            } else {
                Complex64::new(-0.1, -0.4)
            }
        });
        let ea = embed(&a);
        let ew = embed(&w);
        let direct = trace_inner(&a, &w);
        let embedded = (0..4).map(|i| (0..4).map(|j| ea[(i, j)] * ew[(j, i)]).sum::<f64>()).sum::<f64>();
        assert_abs_diff_eq!(embedded, 2.0 * direct, epsilon = 1e-12);
        assert!((unembed(&ew, 2) - &w).norm() < 1e-12);
        // svec preserves the inner product
        let sa = svec(&ea);
        let sw = svec(&ew);
        let dot: f64 = sa.iter().zip(&sw).map(|(x, y)| x * y).sum();
        assert_abs_diff_eq!(dot, embedded, epsilon = 1e-10);
        assert!((unsvec(&sa, 4) - ea).norm() < 1e-12);
    }

    #[test]
    fn trace_cap_maximization() {
        // maximize tr(W) s.t. tr(W) <= 1, W ⪰ 0 (N=2) → optimum 1
        let p = SemidefiniteProgram {
            dim: 2,
            maximize: Some(ident(2)),
            constraints: vec![TraceConstraint { matrix: ident(2), upper: 1.0 }],
        };
        let out = solve_sdp(&p).unwrap();
        assert!(out.is_optimal());
        assert_abs_diff_eq!(out.objective.unwrap(), 1.0, epsilon = 1e-5);
    }

    #[test]
    fn coordinate_selector_forces_zero_diagonal() {
        // feasibility with tr(B₁W) <= 0, tr(W) <= 1: W₁₁ must be 0
        let mut b1 = DMatrix::zeros(2, 2);
        b1[(0, 0)] = Complex64::new(1.0, 0.0);
        let p = SemidefiniteProgram {
            dim: 2,
            maximize: Some(ident(2)),
            constraints: vec![
                TraceConstraint { matrix: b1, upper: 0.0 },
                TraceConstraint { matrix: ident(2), upper: 1.0 },
            ],
        };
        let out = solve_sdp(&p).unwrap();
        assert!(out.is_optimal());
        let w = out.solution.unwrap();
        assert!(w[(0, 0)].norm() < 1e-6, "W11 = {}", w[(0, 0)]);
        // PSD forces the off-diagonal to vanish with the diagonal
        assert!(w[(0, 1)].norm() < 1e-4);
    }

    #[test]
    fn rank_one_target_recovered() {
        // maximize tr(a aᴴ W) s.t. tr(W) <= 1 → W = a aᴴ/‖a‖², objective ‖a‖²
        // hand-solved 2×2: top eigenvalue of the objective matrix
        let a = nalgebra::DVector::from_vec(vec![Complex64::new(0.6, 0.3), Complex64::new(-0.2, 0.9)]);
        let c = cmat(2, |i, j| a[i] * a[j].conj());
        let p = SemidefiniteProgram {
            dim: 2,
            maximize: Some(c),
            constraints: vec![TraceConstraint { matrix: ident(2), upper: 1.0 }],
        };
        let out = solve_sdp(&p).unwrap();
        assert!(out.is_optimal());
        let norm2 = a.iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert_abs_diff_eq!(out.objective.unwrap(), norm2, epsilon = 1e-5);
    }

    #[test]
    fn infeasible_sdp_detected() {
        // tr(W) <= −1 with W ⪰ 0 is infeasible
        let p = SemidefiniteProgram {
            dim: 2,
            maximize: None,
            constraints: vec![TraceConstraint { matrix: ident(2), upper: -1.0 }],
        };
        let out = solve_sdp(&p).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_sdp_flagged() {
        let p = SemidefiniteProgram { dim: 2, maximize: Some(ident(2)), constraints: vec![] };
        let out = solve_sdp(&p).unwrap();
        assert_eq!(out.status, SolveStatus::Unbounded);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut a = ident(2);
        a[(0, 1)] = Complex64::new(1.0, 0.0);
        let p = SemidefiniteProgram {
            dim: 2,
            maximize: None,
            constraints: vec![TraceConstraint { matrix: a, upper: 1.0 }],
        };
        assert!(solve_sdp(&p).is_err());
    }

    #[test]
    fn deterministic_across_runs() {
        let p = SemidefiniteProgram {
            dim: 3,
            maximize: Some(ident(3)),
            constraints: vec![TraceConstraint { matrix: ident(3), upper: 2.0 }],
        };
        let a = solve_sdp(&p).unwrap();
        let b = solve_sdp(&p).unwrap();
        assert_eq!(a.status, b.status);
        assert!((a.objective.unwrap() - b.objective.unwrap()).abs() < 1e-9);
    }
}
