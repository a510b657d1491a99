//! Passive-RIS max-min-SNR beamforming via successive convex approximation.
//!
//! Each iteration replaces the signal quadratic vᴴΣ_ark v by its first-order
//! minorant at the current iterate and solves the resulting SOCP: maximize c
//! subject to c ≤ F_k(v)/σ_{n_k}², |vᴴd_{k,i}|² ≤ F_k(v)/SER_th and |v_i| ≤ 1.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{db_to_linear, ChannelSet, LinkBudget};
use crate::conic::{
    solve_qcqp, ConvexQuadraticProgram, LinearExpr, NormBound, QuadraticConstraint, SolveStatus,
};
use crate::error::{GkgError, Result};
use crate::seed::{self, label};
use crate::system::{
    build_derived_matrices, pris_noise_variances, ser_db, snr_pris, BeamformingVector,
    DerivedMatrices, PilotConfig, SerValue,
};

/// Slack on the recomputed SER threshold at the returned solution, in dB.
pub const SER_SLACK_DB: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    Zero,
    RandomFeasible,
    ScaledMatched,
}

#[derive(Debug, Clone)]
pub struct ScaSettings {
    pub max_iterations: usize,
    /// Relative objective-change threshold; convergence is declared after the
    /// change stays below it for two consecutive iterations.
    pub convergence_tol: f64,
    pub ser_th_db: f64,
    pub init_strategy: InitStrategy,
}

impl ScaSettings {
    pub fn new(ser_th_db: f64) -> Result<Self> {
        let s = Self {
            max_iterations: 50,
            convergence_tol: 1e-4,
            ser_th_db,
            init_strategy: InitStrategy::ScaledMatched,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.convergence_tol <= 0.0 {
            return Err(GkgError::Config("convergence_tol must be positive".into()));
        }
        if !self.ser_th_db.is_finite() {
            return Err(GkgError::Config("ser_th_db must be finite".into()));
        }
        if self.max_iterations == 0 {
            return Err(GkgError::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaStatus {
    Converged,
    /// Ran out of iterations; best feasible iterate returned.
    IterationLimit,
    /// No feasible subproblem found under any permitted initialization.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct ScaIteration {
    pub objective: f64,
    pub status: SolveStatus,
    pub max_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ScaTrace {
    pub iterations: Vec<ScaIteration>,
    pub status: ScaStatus,
    pub restarts: usize,
}

impl ScaTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,c,status,max_residual\n");
        for (t, it) in self.iterations.iter().enumerate() {
            out.push_str(&format!("{},{:.12e},{:?},{:.3e}\n", t, it.objective, it.status, it.max_residual));
        }
        out
    }
}

/// Real lifting x = [Re v; Im v; c] used by the subproblem.
fn lift_dim(n: usize) -> usize {
    2 * n + 1
}

fn unlift(x: &DVector<f64>, n: usize) -> (DVector<Complex64>, f64) {
    let v = DVector::from_fn(n, |i, _| Complex64::new(x[i], x[n + i]));
    (v, x[2 * n])
}

/// First-order minorant of vᴴ(a aᴴ)v at v_t over the lifted variables:
/// F(v) = 2Re(bᴴv) − |s|² with s = v_tᴴa, b = conj(s)·a.
///
/// Equals the quadratic exactly at v = v_t and never exceeds it elsewhere.
pub fn linearized_signal(v_t: &DVector<Complex64>, a: &DVector<Complex64>) -> LinearExpr {
    let n = a.len();
    let s: Complex64 = (0..n).map(|i| v_t[i].conj() * a[i]).sum();
    let mut coeffs = DVector::zeros(lift_dim(n));
    for i in 0..n {
        let b = s.conj() * a[i];
        coeffs[i] = 2.0 * b.re;
        coeffs[n + i] = 2.0 * b.im;
    }
    LinearExpr::new(coeffs, -s.norm_sqr())
}

/// Evaluate a lifted affine expression at a complex point with c = 0.
pub fn eval_at(expr: &LinearExpr, v: &DVector<Complex64>) -> f64 {
    let n = v.len();
    let x = DVector::from_fn(lift_dim(n), |i, _| {
        if i < n {
            v[i].re
        } else if i < 2 * n {
            v[i - n].im
        } else {
            0.0
        }
    });
    expr.eval(&x)
}

/// Rank-two real factor of the lifted |vᴴd|² form: rows for the real and
/// imaginary parts of dᴴv.
fn difference_factor(d: &DVector<Complex64>, dim: usize) -> DMatrix<f64> {
    let n = d.len();
    let mut c = DMatrix::zeros(2, dim);
    for i in 0..n {
        // Re(dᴴv) = Σ Re d_i Re v_i + Im d_i Im v_i
        c[(0, i)] = d[i].re;
        c[(0, n + i)] = d[i].im;
        // Im(dᴴv) = Σ Re d_i Im v_i − Im d_i Re v_i
        c[(1, i)] = -d[i].im;
        c[(1, n + i)] = d[i].re;
    }
    c
}

fn scale_expr(expr: &LinearExpr, factor: f64) -> LinearExpr {
    LinearExpr::new(&expr.coeffs * factor, expr.constant * factor)
}

/// One convexified subproblem at linearization point v_t.
///
/// Returns the next iterate, c_next = min_k F_k(v_next)/σ_{n_k}² and the
/// backend status.
pub fn sca_subproblem(
    v_t: &DVector<Complex64>,
    derived: &DerivedMatrices,
    noise_vars: &[f64],
    settings: &ScaSettings,
) -> Result<(Option<DVector<Complex64>>, Option<f64>, SolveStatus, f64)> {
    let n = derived.n_elements();
    let k_users = derived.n_users();
    if noise_vars.len() != k_users {
        return Err(GkgError::Contract("noise variance count != user count".into()));
    }
    if v_t.len() != n {
        return Err(GkgError::Contract("iterate dimension mismatch".into()));
    }
    let dim = lift_dim(n);
    let ser_lin = db_to_linear(settings.ser_th_db);

    let f_exprs: Vec<LinearExpr> =
        (0..k_users).map(|k| linearized_signal(v_t, &derived.a[k])).collect();

    let mut linear = Vec::with_capacity(k_users);
    for k in 0..k_users {
        // σ²c − F_k(v) ≤ 0
        let mut row = scale_expr(&f_exprs[k], -1.0);
        row.coeffs[2 * n] += noise_vars[k];
        linear.push(row);
    }

    let mut quadratic = Vec::with_capacity(k_users * (k_users - 1));
    for k in 0..k_users {
        for i in 0..k_users {
            if i == k {
                continue;
            }
            // |vᴴ(a_k − a_i)|² ≤ F_k(v)/SER_th
            quadratic.push(QuadraticConstraint::factored(
                difference_factor(&derived.d_vector(k, i), dim),
                scale_expr(&f_exprs[k], 1.0 / ser_lin),
            ));
        }
    }

    let norm_bounds =
        (0..n).map(|i| NormBound { indices: vec![i, n + i], radius: 1.0 }).collect();

    let mut objective = DVector::zeros(dim);
    objective[2 * n] = 1.0;
    let p = ConvexQuadraticProgram {
        n: dim,
        maximize: LinearExpr::new(objective, 0.0),
        quadratic,
        linear,
        norm_bounds,
    };
    let out = solve_qcqp(&p)?;
    if !out.is_optimal() {
        return Ok((None, None, out.status, out.max_residual));
    }
    let (v_next, _) = unlift(out.solution.as_ref().unwrap(), n);
    let c_next = (0..k_users)
        .map(|k| eval_at(&f_exprs[k], &v_next) / noise_vars[k])
        .fold(f64::INFINITY, f64::min);
    Ok((Some(v_next), Some(c_next), SolveStatus::Optimal, out.max_residual))
}

/// Matched-phase initialization projected onto the channel-alignment nullspace.
///
/// Phases follow UT 1's composite channel (the physical per-element phase is
/// exp(−j·arg(a_1,i)) under the conj(v) convention) at amplitude 1/√N, then the
/// vector is projected orthogonal to every difference direction a_k − a_i so
/// all aggregate channels coincide and the first subproblem is feasible for
/// any SER threshold.
fn scaled_matched_init(derived: &DerivedMatrices) -> DVector<Complex64> {
    let n = derived.n_elements();
    let scale = 1.0 / (n as f64).sqrt();
    let mut v = DVector::from_fn(n, |i, _| {
        let a = derived.a[0][i];
        if a.norm() > 0.0 {
            a / a.norm() * scale
        } else {
            Complex64::new(scale, 0.0)
        }
    });
    if derived.n_users() > 1 {
        v = project_alignment(derived, &v);
    }
    let peak = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if peak > 1.0 {
        v /= Complex64::new(peak, 0.0);
    }
    v
}

/// Project v orthogonal to span{a_k − a_1, k ≥ 2} (Gram-Schmidt on the
/// difference directions).
fn project_alignment(derived: &DerivedMatrices, v: &DVector<Complex64>) -> DVector<Complex64> {
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    for k in 1..derived.n_users() {
        let mut d = derived.d_vector(k, 0);
        for b in &basis {
            let coef = b.dotc(&d);
            d -= b * coef;
        }
        let norm = d.norm();
        if norm > 1e-12 {
            basis.push(d / Complex64::new(norm, 0.0));
        }
    }
    let mut out = v.clone();
    for b in &basis {
        let coef = b.dotc(&out);
        out -= b * coef;
    }
    out
}

fn random_feasible_init(derived: &DerivedMatrices, rng: &mut impl Rng) -> DVector<Complex64> {
    let n = derived.n_elements();
    let raw = DVector::from_fn(n, |_, _| {
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let amp = rng.gen_range(0.1..1.0f64);
        Complex64::from_polar(amp, phase)
    });
    if derived.n_users() > 1 {
        let projected = project_alignment(derived, &raw);
        let peak = projected.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if peak > 1e-9 {
            return if peak > 1.0 { projected / Complex64::new(peak, 0.0) } else { projected };
        }
    }
    raw
}

fn true_min_snr(v: &DVector<Complex64>, derived: &DerivedMatrices, noise_vars: &[f64]) -> f64 {
    (0..derived.n_users())
        .map(|k| snr_pris(v, derived, k, noise_vars[k]))
        .fold(f64::INFINITY, f64::min)
}

fn ser_feasible(v: &DVector<Complex64>, derived: &DerivedMatrices, ser_th_db: f64) -> Result<bool> {
    let k_users = derived.n_users();
    for k in 0..k_users {
        for i in 0..k_users {
            if i == k {
                continue;
            }
            match ser_db(v, k, i, derived)? {
                SerValue::Undefined => continue,
                s => {
                    if !s.meets_threshold(ser_th_db - SER_SLACK_DB) {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

const MAX_RESTARTS: usize = 5;

/// Algorithm 1: SCA loop for the passive RIS.
///
/// `seed` only feeds random-feasible (re)starts; the solve is otherwise
/// deterministic.
pub fn solve_pris(
    ch: &ChannelSet,
    pilot: &PilotConfig,
    link: &LinkBudget,
    node_noise_w: f64,
    settings: &ScaSettings,
    seed: u64,
) -> Result<(BeamformingVector, ScaTrace)> {
    settings.validate()?;
    let derived = build_derived_matrices(ch);
    let (noise_vars, _) = pris_noise_variances(ch, pilot, link, node_noise_w);
    let mut rng = seed::rng(seed, &[label::INIT]);

    let mut v = match settings.init_strategy {
        InitStrategy::Zero => DVector::zeros(ch.n_elements()),
        InitStrategy::RandomFeasible => random_feasible_init(&derived, &mut rng),
        InitStrategy::ScaledMatched => scaled_matched_init(&derived),
    };

    let mut iterations: Vec<ScaIteration> = Vec::new();
    let mut restarts = 0;
    let mut best: Option<(DVector<Complex64>, f64)> = None;
    let mut prev_c: Option<f64> = None;
    let mut small_changes = 0;
    let mut status = ScaStatus::IterationLimit;

    let mut t = 0;
    while t < settings.max_iterations {
        let (v_next, c_next, sub_status, residual) =
            sca_subproblem(&v, &derived, &noise_vars, settings)?;
        match sub_status {
            SolveStatus::Optimal => {
                let v_next = v_next.unwrap();
                let c_next = c_next.unwrap();
                iterations.push(ScaIteration { objective: c_next, status: sub_status, max_residual: residual });
                let snr = true_min_snr(&v_next, &derived, &noise_vars);
                if ser_feasible(&v_next, &derived, settings.ser_th_db)?
                    && best.as_ref().map_or(true, |(_, b)| snr > *b)
                {
                    best = Some((v_next.clone(), snr));
                }
                // stall: zero init can fixate on v = 0 with c = 0
                let stalled = c_next.abs() < 1e-12 && v_next.norm() < 1e-9;
                if stalled && restarts < MAX_RESTARTS {
                    restarts += 1;
                    v = random_feasible_init(&derived, &mut rng);
                    prev_c = None;
                    small_changes = 0;
                    t += 1;
                    continue;
                }
                if let Some(p) = prev_c {
                    let rel = (c_next - p).abs() / p.abs().max(1e-12);
                    if rel < settings.convergence_tol {
                        small_changes += 1;
                    } else {
                        small_changes = 0;
                    }
                    if small_changes >= 2 {
                        v = v_next;
                        status = ScaStatus::Converged;
                        break;
                    }
                }
                prev_c = Some(c_next);
                v = v_next;
            }
            SolveStatus::Infeasible => {
                iterations.push(ScaIteration { objective: f64::NAN, status: sub_status, max_residual: residual });
                if restarts < MAX_RESTARTS {
                    restarts += 1;
                    v = random_feasible_init(&derived, &mut rng);
                    prev_c = None;
                    small_changes = 0;
                } else {
                    status = ScaStatus::Infeasible;
                    break;
                }
            }
            other => {
                iterations.push(ScaIteration { objective: f64::NAN, status: other, max_residual: residual });
                if restarts < MAX_RESTARTS {
                    restarts += 1;
                    v = random_feasible_init(&derived, &mut rng);
                    prev_c = None;
                    small_changes = 0;
                } else {
                    status = ScaStatus::Infeasible;
                    break;
                }
            }
        }
        t += 1;
    }

    let (v_star, _) = match best {
        Some(pair) => pair,
        None => {
            if status != ScaStatus::Infeasible && ser_feasible(&v, &derived, settings.ser_th_db)? {
                (v.clone(), true_min_snr(&v, &derived, &noise_vars))
            } else {
                return Ok((
                    BeamformingVector::pris(DVector::zeros(ch.n_elements())),
                    ScaTrace { iterations, status: ScaStatus::Infeasible, restarts },
                ));
            }
        }
    };

    // clip roundoff past the box before handing the vector to reception
    let v_star = v_star.map(|c| if c.norm() > 1.0 { c / c.norm() } else { c });
    Ok((BeamformingVector::pris(v_star), ScaTrace { iterations, status, restarts }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_correlation_matrix, sample_channels, CorrelationMatrix, RisGeometry};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn cvec(parts: &[(f64, f64)]) -> DVector<Complex64> {
        DVector::from_iterator(parts.len(), parts.iter().map(|&(re, im)| Complex64::new(re, im)))
    }

    fn toy_channels(h_ar: DVector<Complex64>, h_kr: Vec<DVector<Complex64>>) -> ChannelSet {
        let h_er = h_ar.clone();
        ChannelSet { h_ar, h_kr, h_er }
    }

    fn unit_link(_n: usize) -> (PilotConfig, LinkBudget) {
        // the link budget only uses distances, not the element count
        let geo = RisGeometry::square(4, 1e9).unwrap();
        let mut link = LinkBudget::indoor(&geo, 50.0, 70.0).unwrap();
        link.kappa_ar = 1.0;
        link.kappa_kr = 1.0;
        link.kappa_er = 1.0;
        (PilotConfig { p_a: 1.0, q: 1 }, link)
    }

    #[test]
    fn linearization_tangent_at_point() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = DVector::from_fn(4, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let v = DVector::from_fn(4, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let expr = linearized_signal(&v, &a);
            let quad = v.dotc(&a).norm_sqr();
            assert_abs_diff_eq!(eval_at(&expr, &v), quad, epsilon = 1e-10 * quad.max(1.0));
        }
    }

    #[test]
    fn linearization_vanishes_at_zero_point() {
        let a = cvec(&[(1.0, 2.0), (0.5, -0.3)]);
        let expr = linearized_signal(&DVector::zeros(2), &a);
        assert_eq!(expr.constant, 0.0);
        assert_eq!(expr.coeffs.norm(), 0.0);
    }

    #[test]
    fn linearization_is_minorant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let a = DVector::from_fn(2, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let v_t = DVector::from_fn(2, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let expr = linearized_signal(&v_t, &a);
        for _ in 0..10_000 {
            let v = DVector::from_fn(2, |_, _| {
                Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
            });
            let quad = v.dotc(&a).norm_sqr();
            assert!(eval_at(&expr, &v) <= quad + 1e-9);
        }
    }

    #[test]
    fn single_user_single_element_aligns() {
        let ch = toy_channels(cvec(&[(0.8, -0.6)]), vec![cvec(&[(0.3, 0.4)])]);
        let (pilot, link) = unit_link(1);
        let settings = ScaSettings::new(10.0).unwrap();
        let (v, trace) = solve_pris(&ch, &pilot, &link, 1.0, &settings, 9).unwrap();
        assert_ne!(trace.status, ScaStatus::Infeasible);
        // |h_kr|²|h_ar|² at |v| = 1
        let expect = 0.25 * 1.0;
        let derived = build_derived_matrices(&ch);
        let got = snr_pris(&v.coefficients, &derived, 0, 1.0);
        assert_abs_diff_eq!(got, expect, epsilon = 1e-4);
        assert_abs_diff_eq!(v.coefficients[0].norm(), 1.0, epsilon = 1e-5);
    }

    #[test]
    fn identical_users_reach_full_amplitude() {
        let h_kr = cvec(&[(0.5, 0.1), (-0.2, 0.6), (0.3, -0.4), (0.7, 0.2)]);
        let ch = toy_channels(
            cvec(&[(0.9, 0.2), (0.1, -0.5), (-0.3, 0.3), (0.4, 0.6)]),
            vec![h_kr.clone(), h_kr],
        );
        let (pilot, link) = unit_link(4);
        let settings = ScaSettings::new(20.0).unwrap();
        let (v, trace) = solve_pris(&ch, &pilot, &link, 1e-2, &settings, 5).unwrap();
        assert_ne!(trace.status, ScaStatus::Infeasible);
        for c in v.coefficients.iter() {
            assert_abs_diff_eq!(c.norm(), 1.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn trace_is_monotone_and_feasible() {
        let geo = RisGeometry::square(4, 1e9).unwrap();
        let r = build_correlation_matrix(&geo).unwrap();
        let ch = sample_channels(&r, 2, 21).unwrap();
        let (pilot, link) = unit_link(4);
        let settings = ScaSettings::new(15.0).unwrap();
        let (v, trace) = solve_pris(&ch, &pilot, &link, 1e-3, &settings, 21).unwrap();
        assert_ne!(trace.status, ScaStatus::Infeasible);
        let mut prev = f64::NEG_INFINITY;
        for it in trace.iterations.iter().filter(|it| it.status == SolveStatus::Optimal) {
            assert!(it.objective >= prev - 1e-9, "objective dropped: {prev} -> {}", it.objective);
            prev = it.objective;
        }
        for c in v.coefficients.iter() {
            assert!(c.norm() <= 1.0 + 1e-6);
        }
        let derived = build_derived_matrices(&ch);
        assert!(ser_feasible(&v.coefficients, &derived, settings.ser_th_db).unwrap());
    }

    #[test]
    fn zero_init_escapes_stall() {
        let geo = RisGeometry::square(4, 1e9).unwrap();
        let r = build_correlation_matrix(&geo).unwrap();
        let ch = sample_channels(&r, 2, 33).unwrap();
        let (pilot, link) = unit_link(4);
        let mut settings = ScaSettings::new(15.0).unwrap();
        settings.init_strategy = InitStrategy::Zero;
        let (v, trace) = solve_pris(&ch, &pilot, &link, 1e-3, &settings, 33).unwrap();
        assert_ne!(trace.status, ScaStatus::Infeasible);
        assert!(v.coefficients.norm() > 1e-3, "stalled at zero");
    }

    #[test]
    fn matches_grid_oracle_n2_k2() {
        // 2 elements, 2 UTs: exhaustive amplitude x phase grid as the oracle
        let ch = toy_channels(
            cvec(&[(0.9, -0.1), (0.4, 0.7)]),
            vec![cvec(&[(1.0, 0.3), (-0.2, 0.5)]), cvec(&[(0.5, -0.6), (0.8, 0.2)])],
        );
        let (pilot, link) = unit_link(2);
        let ser_th_db = 10.0;
        let settings = ScaSettings::new(ser_th_db).unwrap();
        let (v, trace) = solve_pris(&ch, &pilot, &link, 1.0, &settings, 17).unwrap();
        assert_ne!(trace.status, ScaStatus::Infeasible);
        let derived = build_derived_matrices(&ch);
        let noise = vec![1.0, 1.0];
        let solved = true_min_snr(&v.coefficients, &derived, &noise);

        let amps = 8;
        let phases = 40;
        let mut best = 0.0f64;
        for a1 in 0..=amps {
            for p1 in 0..phases {
                for a2 in 0..=amps {
                    for p2 in 0..phases {
                        let v = cvec(&[(0.0, 0.0); 2]);
                        let mut v = v;
                        v[0] = Complex64::from_polar(
                            a1 as f64 / amps as f64,
                            p1 as f64 / phases as f64 * std::f64::consts::TAU,
                        );
                        v[1] = Complex64::from_polar(
                            a2 as f64 / amps as f64,
                            p2 as f64 / phases as f64 * std::f64::consts::TAU,
                        );
                        if !ser_feasible(&v, &derived, ser_th_db + SER_SLACK_DB).unwrap() {
                            continue;
                        }
                        best = best.max(true_min_snr(&v, &derived, &noise));
                    }
                }
            }
        }
        assert!(
            solved >= best * 0.95,
            "solver {solved} more than 5% below grid oracle {best}"
        );
    }

    #[test]
    fn overdetermined_system_flagged() {
        // K > N with a demanding SER threshold: alignment is impossible
        let ch = toy_channels(
            cvec(&[(1.0, 0.0)]),
            vec![cvec(&[(1.0, 0.0)]), cvec(&[(0.0, 1.0)]), cvec(&[(-1.0, 0.5)])],
        );
        let (pilot, link) = unit_link(1);
        let settings = ScaSettings::new(60.0).unwrap();
        let (v, trace) = solve_pris(&ch, &pilot, &link, 1.0, &settings, 2).unwrap();
        let derived = build_derived_matrices(&ch);
        let noise = vec![1.0; 3];
        let snr = true_min_snr(&v.coefficients, &derived, &noise);
        assert!(
            trace.status == ScaStatus::Infeasible || snr < 1e-6,
            "expected failure or near-zero SNR, got {snr} with {:?}",
            trace.status
        );
    }

    #[test]
    fn csv_trace_roundtrip() {
        let trace = ScaTrace {
            iterations: vec![ScaIteration {
                objective: 1.25,
                status: SolveStatus::Optimal,
                max_residual: 1e-9,
            }],
            status: ScaStatus::Converged,
            restarts: 0,
        };
        let csv = trace.to_csv();
        assert!(csv.starts_with("iteration,c,status,max_residual\n"));
        assert!(csv.contains("Optimal"));
    }

    #[test]
    fn settings_validation() {
        assert!(ScaSettings::new(f64::NAN).is_err());
        let mut s = ScaSettings::new(10.0).unwrap();
        s.convergence_tol = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let geo = RisGeometry::square(4, 1e9).unwrap();
        let r = build_correlation_matrix(&geo).unwrap();
        let ch = sample_channels(&r, 2, 77).unwrap();
        let (pilot, link) = unit_link(4);
        let settings = ScaSettings::new(15.0).unwrap();
        let (v1, _) = solve_pris(&ch, &pilot, &link, 1e-3, &settings, 4).unwrap();
        let (v2, _) = solve_pris(&ch, &pilot, &link, 1e-3, &settings, 4).unwrap();
        assert_eq!(v1.coefficients, v2.coefficients);
    }

    #[test]
    fn identity_correlation_smoke() {
        let r = CorrelationMatrix::identity(4);
        let ch = sample_channels(&r, 3, 5).unwrap();
        let (pilot, link) = unit_link(4);
        let settings = ScaSettings::new(5.0).unwrap();
        let (_, trace) = solve_pris(&ch, &pilot, &link, 1e-3, &settings, 5).unwrap();
        assert_ne!(trace.status, ScaStatus::Infeasible);
    }
}
