//! One sweep point: shared problem data plus the per-trial pipeline
//! (sample channels, solve, probe, quantize).

use crate::config::ExperimentConfig;
use gkg_core::channel::{
    build_correlation_matrix, ChannelSampler, CorrelationMatrix, LinkBudget, RisGeometry,
};
use gkg_core::error::{GkgError, Result};
use gkg_core::metrics;
use gkg_core::quantizer::{expand_static, extract_features, quantize, KeyMaterial, QuantizerParams};
use gkg_core::sca::{solve_pris, ScaSettings, ScaStatus};
use gkg_core::sdr::{solve_aris, BisectionSettings, SdrStatus};
use gkg_core::channel::ChannelSet;
use gkg_core::seed;
use gkg_core::system::{
    alpha_f, alpha_nk, build_derived_matrices, pris_noise_variances,
    ser_db, snr_aris, snr_pris, ArisBudget, BeamformingVector, PilotConfig, RisMode,
    SerValue,
};
use num_complex::Complex64;

/// Immutable problem data for one sweep point and mode, shared by trials.
pub struct PointContext {
    pub cfg: ExperimentConfig,
    pub mode: RisMode,
    pub corr: CorrelationMatrix,
    pub sampler: ChannelSampler,
    pub link: LinkBudget,
    pub pilot: PilotConfig,
    pub budget: Option<ArisBudget>,
    pub node_noise_w: f64,
    /// Master seed for this point (derived from run seed and axis index).
    pub point_seed: u64,
}

impl PointContext {
    pub fn new(cfg: &ExperimentConfig, mode: RisMode, point_index: u64) -> Result<Self> {
        let geo = RisGeometry::square(cfg.n_elements, cfg.carrier_hz)?;
        let corr = build_correlation_matrix(&geo)?;
        let sampler = ChannelSampler::new(&corr)?;
        let link = LinkBudget::indoor(&geo, cfg.d_ar_m, cfg.d_kr_m)?;
        let (pilot, budget) = cfg.pilot_and_budget(mode);
        let point_seed = seed::derive(cfg.seed, &[point_index]);
        Ok(PointContext {
            cfg: cfg.clone(),
            mode,
            corr,
            sampler,
            link,
            pilot,
            budget,
            node_noise_w: cfg.node_noise_w(),
            point_seed,
        })
    }
}

/// Everything measured in one successful trial.
pub struct TrialOutput {
    /// Worst ordered-pair NSE over the UT samples of the first probing
    /// round, `None` when undefined (zero reference sample).
    pub worst_nse: Option<f64>,
    /// Quantized key material per UT.
    pub materials: Vec<KeyMaterial>,
    /// First-round samples for Eve diagnostics: (UT values, Eve value).
    pub eve_pair: (Vec<Complex64>, Complex64),
    /// Min pairwise SER at the solution, dB.
    pub min_ser_db: f64,
    /// Min per-UT SNR (PRIS) or SINR (ARIS) at the solution, dB.
    pub min_snr_db: f64,
}

/// Runs a single trial; `Ok(None)` records a solver failure.
pub fn run_trial(ctx: &PointContext, trial: u64) -> Result<Option<TrialOutput>> {
    let ch = ctx.sampler.sample(ctx.cfg.k_users, ctx.point_seed, trial)?;
    let x_star = match solve_beamformer(ctx, &ch, trial)? {
        Some(x) => x,
        None => return Ok(None),
    };

    let derived = build_derived_matrices(&ch);
    let mut min_ser = f64::INFINITY;
    for k in 0..ctx.cfg.k_users {
        for i in 0..ctx.cfg.k_users {
            if i == k {
                continue;
            }
            match ser_db(&x_star.coefficients, k, i, &derived)? {
                SerValue::Db(db) => min_ser = min_ser.min(db),
                SerValue::Undefined => min_ser = f64::NEG_INFINITY,
            }
        }
    }
    let min_snr_lin = match ctx.mode {
        RisMode::Pris => {
            let (vars, _) = pris_noise_variances(&ch, &ctx.pilot, &ctx.link, ctx.node_noise_w);
            (0..ctx.cfg.k_users)
                .map(|k| snr_pris(&x_star.coefficients, &derived, k, vars[k]))
                .fold(f64::INFINITY, f64::min)
        }
        RisMode::Aris => {
            let budget = ctx.budget.as_ref().expect("ARIS budget");
            let af = alpha_f(&ctx.pilot, &ctx.link, budget.sigma_f2);
            let ank = alpha_nk(&ctx.pilot, &ctx.link, ctx.node_noise_w);
            (0..ctx.cfg.k_users)
                .map(|k| snr_aris(&x_star.coefficients, &derived, k, af, ank))
                .fold(f64::INFINITY, f64::min)
        }
    };

    let rounds = expand_static(
        &x_star,
        &ch,
        &ctx.corr,
        &ctx.pilot,
        &ctx.link,
        ctx.budget.as_ref(),
        ctx.node_noise_w,
        ctx.cfg.expand_rounds,
        ctx.point_seed,
        trial,
    )?;
    let (user_blocks, _eve_block) = extract_features(&rounds)?;
    let mut materials = Vec::with_capacity(user_blocks.len());
    for block in &user_blocks {
        let params = QuantizerParams::fit(ctx.cfg.levels, ctx.cfg.nu, block)?;
        materials.push(quantize(block, &params)?);
    }

    let first = &rounds[0];
    let samples: Vec<Complex64> = first.users.iter().map(|s| s.value).collect();
    let worst_nse = metrics::worst_pair_nse(&samples).ok();
    Ok(Some(TrialOutput {
        worst_nse,
        materials,
        eve_pair: (samples, first.eve.value),
        min_ser_db: min_ser,
        min_snr_db: 10.0 * min_snr_lin.log10(),
    }))
}

/// Solves the configured beamformer; `Ok(None)` marks a failed trial.
pub fn solve_beamformer(
    ctx: &PointContext,
    ch: &ChannelSet,
    trial: u64,
) -> Result<Option<BeamformingVector>> {
    let solve_seed = seed::derive(ctx.point_seed, &[trial]);
    match ctx.mode {
        RisMode::Pris => {
            let settings = ScaSettings::new(ctx.cfg.ser_th_db)?;
            match solve_pris(ch, &ctx.pilot, &ctx.link, ctx.node_noise_w, &settings, solve_seed) {
                Ok((v, trace)) => {
                    if trace.status == ScaStatus::Infeasible {
                        Ok(None)
                    } else {
                        Ok(Some(v))
                    }
                }
                Err(GkgError::Solver(_)) | Err(GkgError::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            }
        }
        RisMode::Aris => {
            let budget = ctx.budget.as_ref().expect("ARIS budget");
            let settings = BisectionSettings {
                basis_per_user: ctx.cfg.aris_basis_per_user,
                ..Default::default()
            };
            match solve_aris(
                ch,
                &ctx.pilot,
                &ctx.link,
                budget,
                &settings,
                ctx.cfg.ser_th_db,
                ctx.node_noise_w,
                solve_seed,
            ) {
                Ok(res) if res.status == SdrStatus::Success => Ok(Some(res.w_opt)),
                Ok(_) => Ok(None),
                Err(GkgError::Solver(_)) | Err(GkgError::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            }
        }
    }
}
