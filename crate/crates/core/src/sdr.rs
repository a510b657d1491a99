//! Active-RIS max-min-SINR beamforming: bisection over the SINR target c with
//! SDR feasibility checks and Gaussian randomization (Algorithm 2).
//!
//! Every bisection certificate is rank-one realizable: a step counts as
//! feasible only when the relaxed SDP is feasible and at least one randomized
//! candidate passes all original constraints, recomputed from the raw
//! channels, with min-SINR at or above the step target.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::StandardNormal;
use rand::Rng;

use crate::channel::{ChannelSet, LinkBudget};
use crate::conic::{solve_sdp, SemidefiniteProgram, SolveStatus, TraceConstraint};
use crate::error::{GkgError, Result};
use crate::sca::SER_SLACK_DB;
use crate::seed::{self, label};
use crate::system::{
    alpha_f, alpha_nk, build_derived_matrices, ser_db, snr_aris, ArisBudget, BeamformingVector,
    DerivedMatrices, PilotConfig, SerValue,
};

/// Element count above which the SDP is solved on the span of the composite
/// channel directions (and their noise-weighted variants) instead of the full
/// N-dimensional space. Candidates are still validated in full space.
pub const FULL_BASIS_MAX: usize = 16;

#[derive(Debug, Clone)]
pub struct BisectionSettings {
    /// Upper bound for c; derived from `init_c_max` when absent.
    pub c_max_init: Option<f64>,
    /// Termination width; default max(1e-3, 1e-3·c_max).
    pub epsilon: Option<f64>,
    pub max_steps: usize,
    pub gr_candidates: usize,
    /// Subspace directions per user when the reduced basis is active
    /// (1 = composite channels only, 2 = + UT-noise weighting,
    /// 3 = + AP-side weighting). Smaller is faster and more conservative.
    pub basis_per_user: usize,
}

impl Default for BisectionSettings {
    fn default() -> Self {
        Self {
            c_max_init: None,
            epsilon: None,
            max_steps: 40,
            gr_candidates: 1000,
            basis_per_user: 3,
        }
    }
}

impl BisectionSettings {
    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.c_max_init {
            if !(c > 0.0) {
                return Err(GkgError::Config("c_max_init must be positive".into()));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(GkgError::Config("epsilon must be positive".into()));
            }
        }
        if self.gr_candidates == 0 {
            return Err(GkgError::Config("gr_candidates must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(GkgError::Config("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdrStatus {
    Success,
    /// No c > 0 was certified by a rank-one candidate.
    NoFeasiblePoint,
}

#[derive(Debug, Clone)]
pub struct BisectionStep {
    pub c_mid: f64,
    pub feasible: bool,
    pub solver_status: SolveStatus,
    /// Top-two eigenvalue ratio of the relaxed W (None when the SDP was
    /// infeasible or rank one beyond measurement).
    pub rank_ratio: Option<f64>,
    pub feasible_candidates: usize,
}

#[derive(Debug, Clone)]
pub struct SdrResult {
    pub w_opt: BeamformingVector,
    /// Min-SINR at w_opt recomputed from raw channels.
    pub c_achieved: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub steps: Vec<BisectionStep>,
    pub status: SdrStatus,
}

impl SdrResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,c_mid,feasible,rank_ratio,feasible_candidates\n");
        for (i, s) in self.steps.iter().enumerate() {
            out.push_str(&format!(
                "{},{:.12e},{},{},{}\n",
                i,
                s.c_mid,
                s.feasible,
                s.rank_ratio.map_or(String::from(""), |r| format!("{r:.6e}")),
                s.feasible_candidates
            ));
        }
        out
    }

    /// Median top-two eigenvalue ratio over accepted steps.
    pub fn median_rank_ratio(&self) -> Option<f64> {
        let mut ratios: Vec<f64> =
            self.steps.iter().filter(|s| s.feasible).filter_map(|s| s.rank_ratio).collect();
        if ratios.is_empty() {
            return None;
        }
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(ratios[ratios.len() / 2])
    }
}

/// Problem data shared by the feasibility SDP and the candidate checks.
pub struct ArisContext<'a> {
    pub derived: &'a DerivedMatrices,
    pub pilot: &'a PilotConfig,
    pub link: &'a LinkBudget,
    pub budget: &'a ArisBudget,
    pub ser_th_db: f64,
    pub alpha_f: f64,
    pub alpha_nk: Vec<f64>,
}

impl<'a> ArisContext<'a> {
    pub fn new(
        derived: &'a DerivedMatrices,
        pilot: &'a PilotConfig,
        link: &'a LinkBudget,
        budget: &'a ArisBudget,
        ser_th_db: f64,
        node_noise_w: f64,
    ) -> Self {
        let af = alpha_f(pilot, link, budget.sigma_f2);
        let ank = vec![alpha_nk(pilot, link, node_noise_w); derived.n_users()];
        Self { derived, pilot, link, budget, ser_th_db, alpha_f: af, alpha_nk: ank }
    }

    fn power_limit(&self) -> f64 {
        self.budget.p_r_max / self.link.kappa_ar
    }

    fn power_used(&self, w: &DVector<Complex64>) -> f64 {
        let mut reflected = 0.0;
        for i in 0..w.len() {
            reflected += self.derived.ar_abs2[i] * w[i].norm_sqr();
        }
        self.pilot.p_a * reflected + self.budget.sigma_f2 * w.norm_squared() / self.link.kappa_ar
    }

    fn min_sinr(&self, w: &DVector<Complex64>) -> f64 {
        (0..self.derived.n_users())
            .map(|k| snr_aris(w, self.derived, k, self.alpha_f, self.alpha_nk[k]))
            .fold(f64::INFINITY, f64::min)
    }

    fn candidate_feasible(&self, w: &DVector<Complex64>) -> Result<bool> {
        let gain_ok = w.iter().all(|c| c.norm() <= self.budget.w_max * (1.0 + 1e-6));
        if !gain_ok {
            return Ok(false);
        }
        if self.power_used(w) > self.power_limit() * (1.0 + 1e-6) {
            return Ok(false);
        }
        let k_users = self.derived.n_users();
        for k in 0..k_users {
            for i in 0..k_users {
                if i == k {
                    continue;
                }
                match ser_db(w, k, i, self.derived)? {
                    SerValue::Undefined => continue,
                    s => {
                        if !s.meets_threshold(self.ser_th_db - SER_SLACK_DB) {
                            return Ok(false);
                        }
                    }
                }
            }
        }
        Ok(true)
    }
}

/// Orthonormal solve basis: full space for small N, otherwise the span of the
/// composite channel directions and their noise-weighted variants.
fn solve_basis(derived: &DerivedMatrices, per_user: usize) -> Vec<DVector<Complex64>> {
    let n = derived.n_elements();
    let per_user = per_user.clamp(1, 3);
    // below the reduced span size the full space is at least as cheap and exact
    if n <= FULL_BASIS_MAX.min(per_user * derived.n_users()) {
        return (0..n)
            .map(|i| DVector::from_fn(n, |j, _| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)))
            .collect();
    }
    let mut candidates: Vec<DVector<Complex64>> = Vec::new();
    for k in 0..derived.n_users() {
        candidates.push(derived.a[k].clone());
    }
    if per_user >= 2 {
        for k in 0..derived.n_users() {
            let a = &derived.a[k];
            candidates.push(DVector::from_fn(n, |i, _| a[i] * derived.kr_abs2[k][i]));
        }
    }
    if per_user >= 3 {
        for k in 0..derived.n_users() {
            let a = &derived.a[k];
            candidates.push(DVector::from_fn(n, |i, _| a[i] * derived.ar_abs2[i]));
        }
    }
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    for mut c in candidates {
        for b in &basis {
            let coef = b.dotc(&c);
            c -= b * coef;
        }
        let norm = c.norm();
        if norm > 1e-10 {
            basis.push(c / Complex64::new(norm, 0.0));
        }
    }
    basis
}

fn reduce_vector(basis: &[DVector<Complex64>], v: &DVector<Complex64>) -> DVector<Complex64> {
    DVector::from_fn(basis.len(), |j, _| basis[j].dotc(v))
}

fn outer(v: &DVector<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(v.len(), v.len(), |r, c| v[r] * v[c].conj())
}

/// VᴴMV for diagonal M given by `diag`.
fn reduce_diagonal(basis: &[DVector<Complex64>], diag: &DVector<f64>) -> DMatrix<Complex64> {
    let r = basis.len();
    DMatrix::from_fn(r, r, |p, q| {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..diag.len() {
            acc += basis[p][i].conj() * basis[q][i] * diag[i];
        }
        acc
    })
}

/// Relaxed feasibility problem at target c, solved on the given basis.
///
/// Returns the reduced solution matrix; all acceptance decisions happen on
/// full-space rank-one candidates.
pub fn sdr_feasibility(
    c: f64,
    ctx: &ArisContext,
    basis: &[DVector<Complex64>],
) -> Result<crate::conic::SolverOutcome<DMatrix<Complex64>>> {
    if c < 0.0 {
        return Err(GkgError::Domain("bisection target c must be non-negative".into()));
    }
    let r = basis.len();
    let k_users = ctx.derived.n_users();
    let ser_lin = crate::channel::db_to_linear(ctx.ser_th_db);
    let mut constraints = Vec::new();
    let mut objective = DMatrix::zeros(r, r);

    let a_red: Vec<DVector<Complex64>> =
        (0..k_users).map(|k| reduce_vector(basis, &ctx.derived.a[k])).collect();

    for k in 0..k_users {
        let signal = outer(&a_red[k]);
        objective += &signal;
        // c(α_F tr(Σ_krᴴΣ_kr W) + α_Nk) ≤ tr(Σ_ark W)
        let burden = reduce_diagonal(basis, &ctx.derived.kr_abs2[k]);
        constraints.push(TraceConstraint {
            matrix: burden * Complex64::new(c * ctx.alpha_f, 0.0) - &signal,
            upper: -c * ctx.alpha_nk[k],
        });
        // tr(D_{k,i} W) ≤ tr(Σ_ark W)/SER_th
        for i in 0..k_users {
            if i == k {
                continue;
            }
            let d = reduce_vector(basis, &ctx.derived.d_vector(k, i));
            constraints.push(TraceConstraint {
                matrix: outer(&d) - &signal * Complex64::new(1.0 / ser_lin, 0.0),
                upper: 0.0,
            });
        }
    }

    // P_a tr(Σ_arᴴΣ_ar W) + σ_F² tr(W)/κ_ar ≤ P_R^max/κ_ar
    let mut power = reduce_diagonal(basis, &ctx.derived.ar_abs2) * Complex64::new(ctx.pilot.p_a, 0.0);
    for i in 0..r {
        power[(i, i)] += Complex64::new(ctx.budget.sigma_f2 / ctx.link.kappa_ar, 0.0);
    }
    constraints.push(TraceConstraint { matrix: power, upper: ctx.power_limit() });

    // per-element |tr(B_i W)| ≤ w_max² (W_ii ≥ 0 by PSD, one side suffices)
    let n = ctx.derived.n_elements();
    for i in 0..n {
        let row = DVector::from_fn(r, |j, _| basis[j][i].conj());
        constraints.push(TraceConstraint {
            matrix: outer(&row),
            upper: ctx.budget.w_max * ctx.budget.w_max,
        });
    }

    // variable scaling W = w_max² W̃ keeps the PSD block near unit size;
    // scaling every matrix by w_max² leaves tr(A W) ≤ u invariant and the
    // reported objective equals the unscaled one
    let s = Complex64::new(ctx.budget.w_max * ctx.budget.w_max, 0.0);
    for tc in &mut constraints {
        tc.matrix *= s;
    }
    let p = SemidefiniteProgram { dim: r, maximize: Some(objective * s), constraints };
    let mut out = solve_sdp(&p)?;
    if let Some(w) = &mut out.solution {
        *w *= s;
    }
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix via its real embedding.
///
/// Returns pairs (λ, u); each complex eigenpair appears twice (u and ju) with
/// the same eigenvalue, which is harmless for sampling.
fn hermitian_eigen(m: &DMatrix<Complex64>) -> Vec<(f64, DVector<Complex64>)> {
    let r = m.nrows();
    let e = DMatrix::from_fn(2 * r, 2 * r, |i, j| {
        let (bi, bj) = (i % r, j % r);
        match (i < r, j < r) {
            (true, true) | (false, false) => m[(bi, bj)].re,
            (true, false) => -m[(bi, bj)].im,
            (false, true) => m[(bi, bj)].im,
        }
    });
    let eig = e.symmetric_eigen();
    let mut pairs: Vec<(f64, DVector<Complex64>)> = (0..2 * r)
        .map(|j| {
            let u = DVector::from_fn(r, |i, _| {
                Complex64::new(eig.eigenvectors[(i, j)], eig.eigenvectors[(r + i, j)])
            });
            (eig.eigenvalues[j], u)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    pairs
}

/// Top-two eigenvalue ratio of a Hermitian PSD matrix (deduplicating the
/// embedded pairs).
fn rank_ratio(m: &DMatrix<Complex64>) -> Option<f64> {
    let pairs = hermitian_eigen(m);
    if pairs.len() < 4 {
        return None;
    }
    let top = pairs[0].0.max(0.0);
    let second = pairs[2].0.max(0.0);
    if second <= 0.0 {
        return Some(f64::INFINITY);
    }
    Some(top / second)
}

/// Gaussian randomization over the relaxed solution.
///
/// Candidate 0 is the scaled principal eigenvector; the rest are w_max
/// max-normalized Gaussian samples z = UΣ^{1/2}ζ, all downscaled to the power
/// budget when needed. Returns the best feasible candidate by min-SINR at
/// target c together with the feasible-candidate count.
pub fn gaussian_randomization(
    w_relaxed: &DMatrix<Complex64>,
    c: f64,
    ctx: &ArisContext,
    basis: &[DVector<Complex64>],
    count: usize,
    seed: u64,
    step: u64,
) -> Result<(Option<(DVector<Complex64>, f64)>, usize)> {
    let pairs = hermitian_eigen(w_relaxed);
    let top = pairs.first().map_or(0.0, |p| p.0);
    if top <= 0.0 {
        return Ok((None, 0));
    }
    let scaled: Vec<(f64, DVector<Complex64>)> = pairs
        .into_iter()
        .filter(|(l, _)| *l > 1e-14 * top)
        .map(|(l, u)| (l, u))
        .collect();

    let lift = |reduced: &DVector<Complex64>| -> DVector<Complex64> {
        let n = ctx.derived.n_elements();
        let mut full = DVector::zeros(n);
        for (j, b) in basis.iter().enumerate() {
            full += b * reduced[j];
        }
        full
    };

    let mut rng = seed::rng(seed, &[label::GR, step]);
    let mut best: Option<(DVector<Complex64>, f64)> = None;
    let mut feasible_count = 0usize;

    for idx in 0..=count {
        let z_reduced = if idx == 0 {
            &scaled[0].1 * Complex64::new(scaled[0].0.sqrt(), 0.0)
        } else {
            let mut z = DVector::zeros(w_relaxed.nrows());
            for (l, u) in &scaled {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                // embedded pairs each carry half the eigenvalue mass
                let zeta = Complex64::new(re, im) * (l / 4.0).sqrt();
                z += u * zeta;
            }
            z
        };
        let z = lift(&z_reduced);
        let peak = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if peak <= 0.0 {
            continue;
        }
        let mut w = z * Complex64::new(ctx.budget.w_max / peak, 0.0);
        let used = ctx.power_used(&w);
        let limit = ctx.power_limit();
        if used > limit {
            w *= Complex64::new((limit / used).sqrt(), 0.0);
        }
        if !ctx.candidate_feasible(&w)? {
            continue;
        }
        let sinr = ctx.min_sinr(&w);
        if sinr < c * (1.0 - 1e-9) {
            continue;
        }
        feasible_count += 1;
        if best.as_ref().map_or(true, |(_, b)| sinr > *b) {
            best = Some((w, sinr));
        }
    }
    Ok((best, feasible_count))
}

/// Upper bound on the achievable min-SINR: every element at w_max, perfect
/// phase alignment, amplification noise ignored.
pub fn init_c_max(derived: &DerivedMatrices, budget: &ArisBudget, alpha_nk: &[f64]) -> f64 {
    (0..derived.n_users())
        .map(|k| {
            let aligned: f64 = derived.a[k].iter().map(|a| a.norm()).sum();
            (budget.w_max * aligned).powi(2) / alpha_nk[k]
        })
        .fold(f64::INFINITY, f64::min)
}

/// Algorithm 2: bisection over c with SDR feasibility and randomization.
pub fn solve_aris(
    ch: &ChannelSet,
    pilot: &PilotConfig,
    link: &LinkBudget,
    budget: &ArisBudget,
    settings: &BisectionSettings,
    ser_th_db: f64,
    node_noise_w: f64,
    seed: u64,
) -> Result<SdrResult> {
    settings.validate()?;
    budget.validate()?;
    let derived = build_derived_matrices(ch);
    let ctx = ArisContext::new(&derived, pilot, link, budget, ser_th_db, node_noise_w);
    let basis = solve_basis(&derived, settings.basis_per_user);

    let c_cap = settings.c_max_init.unwrap_or_else(|| init_c_max(&derived, budget, &ctx.alpha_nk));
    if !(c_cap.is_finite() && c_cap > 0.0) {
        return Err(GkgError::Degenerate("upper SINR bound is not positive".into()));
    }
    let mut c_min = 0.0f64;
    let mut c_max = c_cap;
    let mut witness: Option<(DVector<Complex64>, f64)> = None;
    let mut steps: Vec<BisectionStep> = Vec::new();

    for step in 0..settings.max_steps {
        // relative to the current upper bound, so an intentionally loose
        // initial cap does not stop the search before a witness exists
        let eps = settings.epsilon.unwrap_or_else(|| (1e-3 * c_max).max(1e-3));
        if witness.is_some() && c_max - c_min <= eps {
            break;
        }
        let c_mid = 0.5 * (c_min + c_max);
        let mut out = sdr_feasibility(c_mid, &ctx, &basis)?;
        if out.status == SolveStatus::NumericalFailure || out.status == SolveStatus::IterationLimit {
            // perturb the target slightly and retry once before giving up on
            // this midpoint
            out = sdr_feasibility(c_mid * (1.0 + 1e-6), &ctx, &basis)?;
        }
        match out.status {
            SolveStatus::Optimal => {
                let w_relaxed = out.solution.as_ref().unwrap();
                let ratio = rank_ratio(w_relaxed);
                let (cand, feasible_candidates) = gaussian_randomization(
                    w_relaxed,
                    c_mid,
                    &ctx,
                    &basis,
                    settings.gr_candidates,
                    seed,
                    step as u64,
                )?;
                match cand {
                    Some((w, sinr)) => {
                        steps.push(BisectionStep {
                            c_mid,
                            feasible: true,
                            solver_status: SolveStatus::Optimal,
                            rank_ratio: ratio,
                            feasible_candidates,
                        });
                        if witness.as_ref().map_or(true, |(_, b)| sinr > *b) {
                            witness = Some((w, sinr));
                        }
                        c_min = c_mid;
                    }
                    None => {
                        steps.push(BisectionStep {
                            c_mid,
                            feasible: false,
                            solver_status: SolveStatus::Optimal,
                            rank_ratio: ratio,
                            feasible_candidates: 0,
                        });
                        c_max = c_mid;
                    }
                }
            }
            status => {
                steps.push(BisectionStep {
                    c_mid,
                    feasible: false,
                    solver_status: status,
                    rank_ratio: None,
                    feasible_candidates: 0,
                });
                c_max = c_mid;
            }
        }
    }

    match witness {
        Some((w, sinr)) => Ok(SdrResult {
            w_opt: BeamformingVector::aris(w),
            c_achieved: sinr,
            c_min,
            c_max,
            steps,
            status: SdrStatus::Success,
        }),
        None => Ok(SdrResult {
            w_opt: BeamformingVector::aris(DVector::zeros(ch.n_elements())),
            c_achieved: 0.0,
            c_min,
            c_max,
            steps,
            status: SdrStatus::NoFeasiblePoint,
        }),
    }
}
