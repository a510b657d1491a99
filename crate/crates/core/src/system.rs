//! Pilot reception, normalization, effective noise variances, SER/SNR and the
//! derived quadratic-form matrices shared by both optimizers.
//!
//! Pilot despreading is modeled statistically: the length-Q pilot only enters
//! through the post-despreading noise variance, so reception adds a single
//! complex Gaussian of that variance instead of materializing Q symbols.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{ChannelSet, CorrelationMatrix, LinkBudget};
use crate::error::{GkgError, Result};
use crate::seed::{self, label};

/// Reported SER is clamped to this cap; an exact 0/0 is a distinct status.
pub const SER_CAP_DB: f64 = 300.0;

const BOX_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct PilotConfig {
    /// Alice transmit power, watts.
    pub p_a: f64,
    /// Pilot length Q (unit-energy pilot).
    pub q: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RisMode {
    Pris,
    Aris,
}

/// Active-RIS power budget and hardware limits.
#[derive(Debug, Clone, Copy)]
pub struct ArisBudget {
    /// Total RIS output power P_R^max, watts.
    pub p_r_max: f64,
    /// Per-element gain bound w_max (linear).
    pub w_max: f64,
    /// Amplification-noise variance σ_F², watts.
    pub sigma_f2: f64,
}

impl ArisBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_r_max >= 0.0 && self.p_r_max.is_finite()) {
            return Err(GkgError::Config("p_r_max must be finite and non-negative".into()));
        }
        if !(self.w_max >= 0.0 && self.w_max.is_finite()) {
            return Err(GkgError::Config("w_max must be finite and non-negative".into()));
        }
        if !(self.sigma_f2 >= 0.0 && self.sigma_f2.is_finite()) {
            return Err(GkgError::Config("sigma_f2 must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// RIS reflection coefficients in either mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingVector {
    pub coefficients: DVector<Complex64>,
    pub mode: RisMode,
}

impl BeamformingVector {
    pub fn pris(coefficients: DVector<Complex64>) -> Self {
        Self { coefficients, mode: RisMode::Pris }
    }

    pub fn aris(coefficients: DVector<Complex64>) -> Self {
        Self { coefficients, mode: RisMode::Aris }
    }

    pub fn zeros(n: usize, mode: RisMode) -> Self {
        Self { coefficients: DVector::zeros(n), mode }
    }

    pub fn n_elements(&self) -> usize {
        self.coefficients.len()
    }

    /// PRIS box feasibility |vᵢ| ≤ 1 within tolerance.
    pub fn pris_feasible(&self) -> bool {
        self.mode == RisMode::Pris
            && self.coefficients.iter().all(|c| c.norm() <= 1.0 + BOX_TOL)
    }

    /// ARIS feasibility: per-element gain and the P3 power constraint,
    /// recomputed from raw channels.
    pub fn aris_feasible(&self, ch: &ChannelSet, pilot: &PilotConfig, link: &LinkBudget, budget: &ArisBudget) -> bool {
        if self.mode != RisMode::Aris {
            return false;
        }
        let gain_ok = self
            .coefficients
            .iter()
            .all(|c| c.norm() <= budget.w_max * (1.0 + FEAS_TOL));
        gain_ok && aris_power_used(&self.coefficients, ch, pilot, link, budget)
            <= budget.p_r_max / link.kappa_ar * (1.0 + FEAS_TOL)
    }
}

/// Left side of the ARIS total-power constraint:
/// P_a wᴴ Σ_arᴴΣ_ar w + σ_F² wᴴw / κ_ar  (to compare against P_R^max/κ_ar).
pub fn aris_power_used(
    w: &DVector<Complex64>,
    ch: &ChannelSet,
    pilot: &PilotConfig,
    link: &LinkBudget,
    budget: &ArisBudget,
) -> f64 {
    let mut signal = 0.0;
    let mut norm2 = 0.0;
    for i in 0..w.len() {
        let wi2 = w[i].norm_sqr();
        signal += ch.h_ar[i].norm_sqr() * wi2;
        norm2 += wi2;
    }
    pilot.p_a * signal + budget.sigma_f2 * norm2 / link.kappa_ar
}

/// One node's channel observation after despreading and normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedSample {
    pub value: Complex64,
    pub signal_part: Complex64,
    pub noise_part: Complex64,
}

/// Samples for one probing round: K UTs then Eve.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRound {
    pub users: Vec<NormalizedSample>,
    pub eve: NormalizedSample,
}

/// PRIS effective noise variance σ_{n_k}² = σ̃_k² / (P_a Q κ_ar κ_kr).
pub fn effective_noise_variance_pris(kappa_ar: f64, kappa_kr: f64, pilot: &PilotConfig, node_noise_w: f64) -> f64 {
    node_noise_w / (pilot.p_a * pilot.q as f64 * kappa_ar * kappa_kr)
}

/// ARIS effective noise variance
/// σ_{z_k}² = (σ_F² κ_kr tr(ΨΨᴴR) + σ̃_k²) / (P_a Q κ_ar κ_kr).
pub fn effective_noise_variance_aris(
    w: &DVector<Complex64>,
    r: &CorrelationMatrix,
    kappa_ar: f64,
    kappa_kr: f64,
    pilot: &PilotConfig,
    node_noise_w: f64,
    sigma_f2: f64,
) -> f64 {
    let trace: f64 = (0..w.len()).map(|i| w[i].norm_sqr() * r.entries()[(i, i)]).sum();
    (sigma_f2 * kappa_kr * trace + node_noise_w) / (pilot.p_a * pilot.q as f64 * kappa_ar * kappa_kr)
}

/// Aggregate reflected channel xᴴ a with a = diag(h_krᴴ) h_ar.
///
/// `x` is the optimization-domain reflection vector; the physical coefficient
/// applied by element i is conj(x_i), so |xᴴ a|² matches the quadratic forms
/// the solvers maximize.
pub fn aggregate_channel(x: &DVector<Complex64>, h_kr: &DVector<Complex64>, h_ar: &DVector<Complex64>) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..x.len() {
        acc += x[i].conj() * h_kr[i].conj() * h_ar[i];
    }
    acc
}

fn draw_noise(variance: f64, rng: &mut impl Rng) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Noise seed context: one probing round within a trial.
#[derive(Debug, Clone, Copy)]
pub struct NoiseCtx {
    pub master: u64,
    pub trial: u64,
    pub round: u64,
}

fn receive(
    x: &DVector<Complex64>,
    phase: Complex64,
    ch: &ChannelSet,
    noise_vars: &[f64],
    eve_var: f64,
    ctx: NoiseCtx,
) -> ProbeRound {
    let users = ch
        .h_kr
        .iter()
        .zip(noise_vars)
        .enumerate()
        .map(|(k, (h_kr, &var))| {
            let signal = phase * aggregate_channel(x, h_kr, &ch.h_ar);
            let mut rng = seed::rng(ctx.master, &[label::NOISE, ctx.trial, ctx.round, k as u64 + 1]);
            let noise = draw_noise(var, &mut rng);
            NormalizedSample { value: signal + noise, signal_part: signal, noise_part: noise }
        })
        .collect();
    let eve_signal = phase * aggregate_channel(x, &ch.h_er, &ch.h_ar);
    let mut rng = seed::rng(ctx.master, &[label::NOISE, ctx.trial, ctx.round, ch.n_users() as u64 + 1]);
    let eve_noise = draw_noise(eve_var, &mut rng);
    ProbeRound {
        users,
        eve: NormalizedSample {
            value: eve_signal + eve_noise,
            signal_part: eve_signal,
            noise_part: eve_noise,
        },
    }
}

/// Per-node PRIS noise variances (UTs then Eve).
pub fn pris_noise_variances(ch: &ChannelSet, pilot: &PilotConfig, link: &LinkBudget, node_noise_w: f64) -> (Vec<f64>, f64) {
    let users = vec![effective_noise_variance_pris(link.kappa_ar, link.kappa_kr, pilot, node_noise_w); ch.n_users()];
    let eve = effective_noise_variance_pris(link.kappa_ar, link.kappa_er, pilot, node_noise_w);
    (users, eve)
}

/// Per-node ARIS noise variances (UTs then Eve).
pub fn aris_noise_variances(
    w: &DVector<Complex64>,
    r: &CorrelationMatrix,
    ch: &ChannelSet,
    pilot: &PilotConfig,
    link: &LinkBudget,
    node_noise_w: f64,
    sigma_f2: f64,
) -> (Vec<f64>, f64) {
    let users = vec![
        effective_noise_variance_aris(w, r, link.kappa_ar, link.kappa_kr, pilot, node_noise_w, sigma_f2);
        ch.n_users()
    ];
    let eve = effective_noise_variance_aris(w, r, link.kappa_ar, link.kappa_er, pilot, node_noise_w, sigma_f2);
    (users, eve)
}

/// PRIS pilot reception for every node including Eve.
///
/// `phase` rotates the whole reflection vector; pass 1 for plain probing and
/// e^{jφ} for static-environment key expansion rounds.
pub fn pris_receive(
    v: &BeamformingVector,
    ch: &ChannelSet,
    pilot: &PilotConfig,
    link: &LinkBudget,
    node_noise_w: f64,
    phase: Complex64,
    ctx: NoiseCtx,
) -> Result<ProbeRound> {
    if !v.pris_feasible() {
        return Err(GkgError::Contract("PRIS coefficients violate |v_i| <= 1".into()));
    }
    let (user_vars, eve_var) = pris_noise_variances(ch, pilot, link, node_noise_w);
    Ok(receive(&v.coefficients, phase, ch, &user_vars, eve_var, ctx))
}

/// ARIS pilot reception for every node including Eve.
pub fn aris_receive(
    w: &BeamformingVector,
    ch: &ChannelSet,
    r: &CorrelationMatrix,
    pilot: &PilotConfig,
    link: &LinkBudget,
    budget: &ArisBudget,
    node_noise_w: f64,
    phase: Complex64,
    ctx: NoiseCtx,
) -> Result<ProbeRound> {
    if !w.aris_feasible(ch, pilot, link, budget) {
        return Err(GkgError::Contract("ARIS coefficients violate gain or power budget".into()));
    }
    let (user_vars, eve_var) =
        aris_noise_variances(&w.coefficients, r, ch, pilot, link, node_noise_w, budget.sigma_f2);
    Ok(receive(&w.coefficients, phase, ch, &user_vars, eve_var, ctx))
}

/// Quadratic-form data shared by the SCA and SDR solvers.
///
/// Everything is rank one: with a_k = Σ_kr h_ar (elementwise conj(h_kr)∘h_ar),
/// Σ_ark = a_k a_kᴴ and D_{k,i} = (a_k − a_i)(a_k − a_i)ᴴ.
#[derive(Debug, Clone)]
pub struct DerivedMatrices {
    /// a_k = diag(h_krᴴ) h_ar per UT.
    pub a: Vec<DVector<Complex64>>,
    /// |h_kr,i|² diagonals (Σ_krᴴ Σ_kr) per UT.
    pub kr_abs2: Vec<DVector<f64>>,
    /// |h_ar,i|² diagonal (Σ_arᴴ Σ_ar).
    pub ar_abs2: DVector<f64>,
}

impl DerivedMatrices {
    pub fn n_users(&self) -> usize {
        self.a.len()
    }

    pub fn n_elements(&self) -> usize {
        self.ar_abs2.len()
    }

    /// Dense Σ_ark = a_k a_kᴴ.
    pub fn sigma_ark(&self, k: usize) -> DMatrix<Complex64> {
        let a = &self.a[k];
        DMatrix::from_fn(a.len(), a.len(), |i, j| a[i] * a[j].conj())
    }

    /// Difference direction a_k − a_i of D_{k,i}.
    pub fn d_vector(&self, k: usize, i: usize) -> DVector<Complex64> {
        &self.a[k] - &self.a[i]
    }

    /// Dense D_{k,i} = (a_k − a_i)(a_k − a_i)ᴴ.
    pub fn d_matrix(&self, k: usize, i: usize) -> DMatrix<Complex64> {
        let d = self.d_vector(k, i);
        DMatrix::from_fn(d.len(), d.len(), |r, c| d[r] * d[c].conj())
    }
}

pub fn build_derived_matrices(ch: &ChannelSet) -> DerivedMatrices {
    let n = ch.n_elements();
    let a = ch
        .h_kr
        .iter()
        .map(|h_kr| DVector::from_fn(n, |i, _| h_kr[i].conj() * ch.h_ar[i]))
        .collect();
    let kr_abs2 = ch
        .h_kr
        .iter()
        .map(|h_kr| DVector::from_fn(n, |i, _| h_kr[i].norm_sqr()))
        .collect();
    let ar_abs2 = DVector::from_fn(n, |i, _| ch.h_ar[i].norm_sqr());
    DerivedMatrices { a, kr_abs2, ar_abs2 }
}

/// SER between UT k and UT i under reflection vector x, in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SerValue {
    Db(f64),
    /// 0/0: zero signal and zero difference.
    Undefined,
}

impl SerValue {
    pub fn meets_threshold(&self, ser_th_db: f64) -> bool {
        match self {
            SerValue::Db(db) => *db >= ser_th_db,
            SerValue::Undefined => false,
        }
    }
}

pub fn ser_db(x: &DVector<Complex64>, k: usize, i: usize, derived: &DerivedMatrices) -> Result<SerValue> {
    if k == i {
        return Err(GkgError::Domain("SER requires k != i".into()));
    }
    let num = x.dotc(&self_projection(&derived.a[k], x));
    let num = num.re.max(0.0);
    let diff = derived.d_vector(k, i);
    let den = inner(x, &diff).norm_sqr();
    if den == 0.0 {
        if num == 0.0 {
            return Ok(SerValue::Undefined);
        }
        return Ok(SerValue::Db(SER_CAP_DB));
    }
    if num == 0.0 && den == 0.0 {
        return Ok(SerValue::Undefined);
    }
    Ok(SerValue::Db((10.0 * (num / den).log10()).min(SER_CAP_DB)))
}

fn inner(x: &DVector<Complex64>, a: &DVector<Complex64>) -> Complex64 {
    // xᴴ a
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..x.len() {
        acc += x[i].conj() * a[i];
    }
    acc
}

fn self_projection(a: &DVector<Complex64>, x: &DVector<Complex64>) -> DVector<Complex64> {
    // Σ_ark x = a (aᴴ x)
    let coef = inner(a, x);
    a.map(|ai| ai * coef)
}

/// |xᴴ a_k|², the quadratic form xᴴ Σ_ark x.
pub fn signal_power(x: &DVector<Complex64>, derived: &DerivedMatrices, k: usize) -> f64 {
    inner(x, &derived.a[k]).norm_sqr()
}

/// PRIS SNR of UT k: xᴴΣ_ark x / σ_{n_k}².
pub fn snr_pris(x: &DVector<Complex64>, derived: &DerivedMatrices, k: usize, noise_var: f64) -> f64 {
    signal_power(x, derived, k) / noise_var
}

/// ARIS SINR of UT k: xᴴΣ_ark x / (α_F xᴴ Σ_krᴴΣ_kr x + α_{N_k}).
pub fn snr_aris(
    x: &DVector<Complex64>,
    derived: &DerivedMatrices,
    k: usize,
    alpha_f: f64,
    alpha_nk: f64,
) -> f64 {
    let mut burden = 0.0;
    for i in 0..x.len() {
        burden += derived.kr_abs2[k][i] * x[i].norm_sqr();
    }
    signal_power(x, derived, k) / (alpha_f * burden + alpha_nk)
}

/// α_F = σ_F² / (P_a Q κ_ar).
pub fn alpha_f(pilot: &PilotConfig, link: &LinkBudget, sigma_f2: f64) -> f64 {
    sigma_f2 / (pilot.p_a * pilot.q as f64 * link.kappa_ar)
}

/// α_{N_k} = σ̃_k² / (P_a Q κ_ar κ_kr).
pub fn alpha_nk(pilot: &PilotConfig, link: &LinkBudget, node_noise_w: f64) -> f64 {
    node_noise_w / (pilot.p_a * pilot.q as f64 * link.kappa_ar * link.kappa_kr)
}
