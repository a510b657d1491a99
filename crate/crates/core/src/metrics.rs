//! Alignment and key-quality metrics: NSE/NMSE, KER, KGR and eavesdropper
//! diagnostics.

use num_complex::Complex64;


use crate::error::{GkgError, Result};
use crate::quantizer::KeyMaterial;

/// Normalized squared error |y_i − y_j|²/|y_i|².
pub fn nse(y_i: Complex64, y_j: Complex64) -> Result<f64> {
    if y_i.norm_sqr() == 0.0 {
        return Err(GkgError::Degenerate("NSE reference sample is zero".into()));
    }
    Ok((y_i - y_j).norm_sqr() / y_i.norm_sqr())
}

/// Max NSE over ordered node pairs in one trial.
pub fn worst_pair_nse(samples: &[Complex64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(GkgError::Domain("worst-pair NSE needs at least two nodes".into()));
    }
    let mut worst = 0.0f64;
    for i in 0..samples.len() {
        for j in 0..samples.len() {
            if i != j {
                worst = worst.max(nse(samples[i], samples[j])?);
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy)]
pub struct NmseResult {
    pub mean: f64,
    pub trials_used: usize,
    pub trials_excluded: usize,
    /// 95% normal-approximation half-width.
    pub ci_half_width: f64,
}

/// Mean of per-trial worst-pair NSE; trials with an undefined NSE are
/// excluded and counted.
pub fn nmse(trials: &[Vec<Complex64>]) -> Result<NmseResult> {
    if trials.is_empty() {
        return Err(GkgError::Domain("NMSE needs at least one trial".into()));
    }
    let values: Vec<Option<f64>> =
        trials.iter().map(|t| worst_pair_nse(t).ok()).collect();
    nmse_from_values(&values)
}

/// NMSE aggregation over precomputed per-trial values (None = undefined).
pub fn nmse_from_values(values: &[Option<f64>]) -> Result<NmseResult> {
    let used: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    let excluded = values.len() - used.len();
    if used.is_empty() {
        return Err(GkgError::Degenerate("all trials excluded from NMSE".into()));
    }
    let n = used.len() as f64;
    let mean = used.iter().sum::<f64>() / n;
    let ci_half_width = if used.len() > 1 {
        let var = used.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        1.96 * (var / n).sqrt()
    } else {
        0.0
    };
    Ok(NmseResult { mean, trials_used: used.len(), trials_excluded: excluded, ci_half_width })
}

#[derive(Debug, Clone)]
pub struct KerResult {
    /// Mean over unordered node pairs.
    pub mean: f64,
    pub worst_pair: f64,
    /// Bits compared per pair (common-mask features × bits per feature).
    pub compared_bits: usize,
    /// (node i, node j, error fraction, mismatched bits) per pair.
    pub pairs: Vec<(usize, usize, f64, usize)>,
}

/// Key error rate over the common kept mask.
pub fn ker(materials: &[KeyMaterial]) -> Result<KerResult> {
    if materials.len() < 2 {
        return Err(GkgError::Domain("KER needs at least two nodes".into()));
    }
    let features = materials[0].indices.len();
    let levels = materials[0].levels;
    if materials.iter().any(|m| m.indices.len() != features || m.levels != levels) {
        return Err(GkgError::Contract("mismatched key material shapes".into()));
    }
    let common: Vec<usize> = (0..features)
        .filter(|&f| materials.iter().all(|m| m.indices[f].is_some()))
        .collect();
    if common.is_empty() {
        return Err(GkgError::Degenerate(format!(
            "empty common mask across {} nodes ({} features)",
            materials.len(),
            features
        )));
    }
    let bits_per_feature = materials[0].bits_per_feature();
    let compared_bits = common.len() * bits_per_feature;
    let mut pairs = Vec::new();
    let mut worst = 0.0f64;
    let mut total = 0.0;
    for i in 0..materials.len() {
        for j in i + 1..materials.len() {
            let mut mismatched = 0usize;
            for &f in &common {
                let a = materials[i].feature_bits(f).unwrap();
                let b = materials[j].feature_bits(f).unwrap();
                mismatched += a.iter().zip(&b).filter(|(x, y)| x != y).count();
            }
            let frac = mismatched as f64 / compared_bits as f64;
            worst = worst.max(frac);
            total += frac;
            pairs.push((i, j, frac, mismatched));
        }
    }
    let mean = total / pairs.len() as f64;
    Ok(KerResult { mean, worst_pair: worst, compared_bits, pairs })
}

#[derive(Debug, Clone, Copy)]
pub struct KgrResult {
    /// Common-mask bits per channel feature.
    pub bits_per_feature: f64,
    /// Common-mask bits per probing round.
    pub bits_per_round: f64,
    pub discard_realized: f64,
}

/// Key generation rate from the common mask.
pub fn kgr(materials: &[KeyMaterial], probe_count: usize) -> Result<KgrResult> {
    if probe_count == 0 {
        return Err(GkgError::Domain("probe_count must be at least 1".into()));
    }
    if materials.is_empty() {
        return Err(GkgError::Domain("KGR needs at least one node".into()));
    }
    let features = materials[0].indices.len();
    let common = (0..features)
        .filter(|&f| materials.iter().all(|m| m.indices[f].is_some()))
        .count();
    let bits = common * materials[0].bits_per_feature();
    Ok(KgrResult {
        bits_per_feature: bits as f64 / features as f64,
        bits_per_round: bits as f64 / probe_count as f64,
        discard_realized: 1.0 - common as f64 / features as f64,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct EveTrialDiagnostics {
    pub max_legit_nse: f64,
    /// Min over legit nodes of NSE(legit, eve).
    pub min_eve_nse: f64,
}

pub fn eve_alignment_trial(legit: &[Complex64], eve: Complex64) -> Result<EveTrialDiagnostics> {
    let max_legit_nse = worst_pair_nse(legit)?;
    let mut min_eve = f64::INFINITY;
    for &y in legit {
        min_eve = min_eve.min(nse(y, eve)?);
    }
    Ok(EveTrialDiagnostics { max_legit_nse, min_eve_nse: min_eve })
}

#[derive(Debug, Clone, Copy)]
pub struct EveAggregate {
    pub mean_max_legit_nse: f64,
    pub mean_min_eve_nse: f64,
    /// Magnitude of the complex Pearson correlation between Eve's and the
    /// legit samples, pooled over trials and nodes.
    pub correlation: f64,
    pub trials: usize,
}

pub fn eve_alignment(trials: &[(Vec<Complex64>, Complex64)]) -> Result<EveAggregate> {
    if trials.is_empty() {
        return Err(GkgError::Domain("Eve diagnostics need at least one trial".into()));
    }
    let mut sum_legit = 0.0;
    let mut sum_eve = 0.0;
    for (legit, eve) in trials {
        let d = eve_alignment_trial(legit, *eve)?;
        sum_legit += d.max_legit_nse;
        sum_eve += d.min_eve_nse;
    }
    let n = trials.len() as f64;

    // pooled complex correlation (legit node sample, eve sample) pairs
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (legit, eve) in trials {
        for &y in legit {
            xs.push(y);
            ys.push(*eve);
        }
    }
    let m = xs.len() as f64;
    let mx: Complex64 = xs.iter().sum::<Complex64>() / m;
    let my: Complex64 = ys.iter().sum::<Complex64>() / m;
    let mut cov = Complex64::new(0.0, 0.0);
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        cov += (x - mx) * (y - my).conj();
        vx += (x - mx).norm_sqr();
        vy += (y - my).norm_sqr();
    }
    let correlation = if vx > 0.0 && vy > 0.0 { cov.norm() / (vx * vy).sqrt() } else { 0.0 };
    Ok(EveAggregate {
        mean_max_legit_nse: sum_legit / n,
        mean_min_eve_nse: sum_eve / n,
        correlation,
        trials: trials.len(),
    })
}
