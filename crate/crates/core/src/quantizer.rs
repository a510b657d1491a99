//! Guard-band CDF quantization of aligned channel samples into Gray-coded key
//! bits, plus static-environment key expansion by common phase rotation.

use std::io::{Read as _, Write as _};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::channel::{ChannelSet, CorrelationMatrix, LinkBudget};
use crate::error::{GkgError, Result};
use crate::seed::{self, label};
use crate::system::{
    aris_receive, pris_receive, ArisBudget, BeamformingVector, NoiseCtx, PilotConfig, ProbeRound,
    RisMode,
};

/// One node's normalized feature block: stacked real then imaginary parts of
/// the aligned samples, min-max normalized to [0, 1].
#[derive(Debug, Clone)]
pub struct FeatureBlock {
    pub features: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

impl FeatureBlock {
    /// Normalize with the block's own min/max.
    pub fn from_samples(samples: &[Complex64]) -> Result<Self> {
        let raw = stack(samples)?;
        let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self::normalize(raw, min, max)
    }

    /// Normalize with an externally agreed range.
    pub fn from_samples_with_range(samples: &[Complex64], min: f64, max: f64) -> Result<Self> {
        let raw = stack(samples)?;
        Self::normalize(raw, min, max)
    }

    fn normalize(raw: Vec<f64>, min: f64, max: f64) -> Result<Self> {
        if !(max > min) {
            return Err(GkgError::Degenerate("constant feature block: max == min".into()));
        }
        let span = max - min;
        let features = raw.iter().map(|v| ((v - min) / span).clamp(0.0, 1.0)).collect();
        Ok(Self { features, min, max })
    }

    /// Invert the normalization for feature index i.
    pub fn denormalize(&self, value: f64) -> f64 {
        self.min + value * (self.max - self.min)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

fn stack(samples: &[Complex64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(GkgError::Domain("feature extraction needs at least one sample".into()));
    }
    let mut raw = Vec::with_capacity(2 * samples.len());
    raw.extend(samples.iter().map(|s| s.re));
    raw.extend(samples.iter().map(|s| s.im));
    Ok(raw)
}

/// Per-node feature blocks for a probing sequence (UTs then Eve).
pub fn extract_features(rounds: &[ProbeRound]) -> Result<(Vec<FeatureBlock>, FeatureBlock)> {
    if rounds.is_empty() {
        return Err(GkgError::Domain("feature extraction needs at least one round".into()));
    }
    let k_users = rounds[0].users.len();
    if rounds.iter().any(|r| r.users.len() != k_users) {
        return Err(GkgError::Contract("inconsistent user count across rounds".into()));
    }
    let users = (0..k_users)
        .map(|k| {
            let samples: Vec<Complex64> = rounds.iter().map(|r| r.users[k].value).collect();
            FeatureBlock::from_samples(&samples)
        })
        .collect::<Result<Vec<_>>>()?;
    let eve_samples: Vec<Complex64> = rounds.iter().map(|r| r.eve.value).collect();
    Ok((users, FeatureBlock::from_samples(&eve_samples)?))
}

#[derive(Debug, Clone)]
pub struct QuantizerParams {
    pub levels: usize,
    pub discard_fraction: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl QuantizerParams {
    /// Fit the Gaussian model to a feature block.
    pub fn fit(levels: usize, discard_fraction: f64, block: &FeatureBlock) -> Result<Self> {
        validate_shape(levels, discard_fraction)?;
        let n = block.len() as f64;
        let mu = block.features.iter().sum::<f64>() / n;
        let var = block.features.iter().map(|f| (f - mu) * (f - mu)).sum::<f64>() / n;
        let sigma = var.sqrt();
        if !(sigma > 0.0) {
            return Err(GkgError::Degenerate("zero feature variance".into()));
        }
        Ok(Self { levels, discard_fraction, mu, sigma })
    }

    pub fn with_moments(levels: usize, discard_fraction: f64, mu: f64, sigma: f64) -> Result<Self> {
        validate_shape(levels, discard_fraction)?;
        if !(sigma > 0.0) {
            return Err(GkgError::Degenerate("sigma must be positive".into()));
        }
        Ok(Self { levels, discard_fraction, mu, sigma })
    }

    /// Guard half-width δ = ν/(2(L−1)).
    pub fn delta(&self) -> f64 {
        self.discard_fraction / (2.0 * (self.levels as f64 - 1.0))
    }

    pub fn bits_per_level(&self) -> usize {
        self.levels.trailing_zeros() as usize
    }

    /// Interval [lower, upper] for level l (1-based), clamped to [0, 1].
    pub fn interval(&self, l: usize) -> (f64, f64) {
        let levels = self.levels as f64;
        let delta = self.delta();
        let normal = Normal::new(self.mu, self.sigma).expect("validated sigma");
        let lower = if l == 1 {
            0.0
        } else {
            normal.inverse_cdf((l as f64 - 1.0) / levels + delta).clamp(0.0, 1.0)
        };
        let upper = if l == self.levels {
            1.0
        } else {
            normal.inverse_cdf(l as f64 / levels - delta).clamp(0.0, 1.0)
        };
        (lower, upper)
    }
}

fn validate_shape(levels: usize, discard_fraction: f64) -> Result<()> {
    if levels < 2 || !levels.is_power_of_two() {
        return Err(GkgError::Config("levels must be a power of two, at least 2".into()));
    }
    if !(0.0..1.0).contains(&discard_fraction) {
        return Err(GkgError::Config("discard fraction must be in [0, 1)".into()));
    }
    // δ < 1/(2L) keeps the intervals disjoint and ordered
    let delta = discard_fraction / (2.0 * (levels as f64 - 1.0));
    if delta >= 1.0 / (2.0 * levels as f64) {
        return Err(GkgError::Config("discard fraction too large for the level count".into()));
    }
    Ok(())
}

/// Reflected binary code of an interval index.
pub fn gray_code(index: usize) -> usize {
    index ^ (index >> 1)
}

/// One node's quantized key material.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    pub levels: usize,
    /// Quantization interval (0-based) per feature; None inside guard gaps.
    pub indices: Vec<Option<usize>>,
}

impl KeyMaterial {
    pub fn bits_per_feature(&self) -> usize {
        self.levels.trailing_zeros() as usize
    }

    pub fn kept_mask(&self) -> Vec<bool> {
        self.indices.iter().map(|i| i.is_some()).collect()
    }

    pub fn kept_count(&self) -> usize {
        self.indices.iter().filter(|i| i.is_some()).count()
    }

    pub fn bit_count(&self) -> usize {
        self.kept_count() * self.bits_per_feature()
    }

    /// Gray-coded bits of one kept feature, most significant first.
    pub fn feature_bits(&self, feature: usize) -> Option<Vec<u8>> {
        self.indices[feature].map(|idx| {
            let g = gray_code(idx);
            let m = self.bits_per_feature();
            (0..m).map(|b| ((g >> (m - 1 - b)) & 1) as u8).collect()
        })
    }

    /// Concatenated bits of all kept features.
    pub fn bits(&self) -> Vec<u8> {
        (0..self.indices.len()).filter_map(|f| self.feature_bits(f)).flatten().collect()
    }
}

/// Guard-band quantization of a feature block.
pub fn quantize(block: &FeatureBlock, params: &QuantizerParams) -> Result<KeyMaterial> {
    let intervals: Vec<(f64, f64)> = (1..=params.levels).map(|l| params.interval(l)).collect();
    for w in intervals.windows(2) {
        if w[0].1 > w[1].0 {
            return Err(GkgError::Degenerate("quantization intervals overlap".into()));
        }
    }
    let indices = block
        .features
        .iter()
        .map(|&f| {
            intervals
                .iter()
                .position(|&(lo, hi)| f >= lo && f <= hi)
        })
        .collect();
    Ok(KeyMaterial { levels: params.levels, indices })
}

/// Static-environment key expansion: `rounds` probing rounds, each rotating
/// the reflection pattern by a common random phase with fresh noise.
///
/// The noiseless signal part of round r equals e^{jφ_r} times the plain
/// signal part for every node, so pairwise alignment is preserved exactly.
#[allow(clippy::too_many_arguments)]
pub fn expand_static(
    x_star: &BeamformingVector,
    ch: &ChannelSet,
    corr: &CorrelationMatrix,
    pilot: &PilotConfig,
    link: &LinkBudget,
    budget: Option<&ArisBudget>,
    node_noise_w: f64,
    rounds: usize,
    master: u64,
    trial: u64,
) -> Result<Vec<ProbeRound>> {
    if rounds < 1 {
        return Err(GkgError::Domain("need at least one probing round".into()));
    }
    let mut out = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let mut rng = seed::rng(master, &[label::PHASE, trial, round as u64]);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let phase = Complex64::from_polar(1.0, phi);
        let ctx = NoiseCtx { master, trial, round: round as u64 };
        let probe = match x_star.mode {
            RisMode::Pris => pris_receive(x_star, ch, pilot, link, node_noise_w, phase, ctx)?,
            RisMode::Aris => {
                let budget = budget
                    .ok_or_else(|| GkgError::Contract("ARIS expansion needs a budget".into()))?;
                aris_receive(x_star, ch, corr, pilot, link, budget, node_noise_w, phase, ctx)?
            }
        };
        out.push(probe);
    }
    Ok(out)
}

/// Write a node's key bits: one ASCII header line, then the bits packed
/// most-significant-bit-first into bytes.
pub fn write_key_file(
    km: &KeyMaterial,
    node_id: u64,
    trial_id: u64,
    discard_fraction: f64,
    path: &Path,
) -> Result<()> {
    let bits = km.bits();
    let header = format!(
        "gkgkey v1 node={} trial={} levels={} nu={} bits={}\n",
        node_id,
        trial_id,
        km.levels,
        discard_fraction,
        bits.len()
    );
    let mut packed = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b != 0 {
            packed[i / 8] |= 1 << (7 - i % 8);
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(header.as_bytes())?;
    f.write_all(&packed)?;
    Ok(())
}

/// Read back a key file written by `write_key_file`: returns (node, trial,
/// levels, nu, bits).
pub fn read_key_file(path: &Path) -> Result<(u64, u64, usize, f64, Vec<u8>)> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    let nl = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| GkgError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, "missing header")))?;
    let header = std::str::from_utf8(&raw[..nl])
        .map_err(|_| GkgError::Contract("malformed key file header".into()))?;
    let mut fields = std::collections::HashMap::new();
    for tok in header.split_whitespace().skip(2) {
        if let Some((k, v)) = tok.split_once('=') {
            fields.insert(k.to_string(), v.to_string());
        }
    }
    let get = |k: &str| -> Result<String> {
        fields.get(k).cloned().ok_or_else(|| GkgError::Contract(format!("key file missing {k}")))
    };
    let node: u64 = get("node")?.parse().map_err(|_| GkgError::Contract("bad node id".into()))?;
    let trial: u64 = get("trial")?.parse().map_err(|_| GkgError::Contract("bad trial id".into()))?;
    let levels: usize = get("levels")?.parse().map_err(|_| GkgError::Contract("bad levels".into()))?;
    let nu: f64 = get("nu")?.parse().map_err(|_| GkgError::Contract("bad nu".into()))?;
    let n_bits: usize = get("bits")?.parse().map_err(|_| GkgError::Contract("bad bit count".into()))?;
    let packed = &raw[nl + 1..];
    let mut bits = Vec::with_capacity(n_bits);
    for i in 0..n_bits {
        let byte = packed
            .get(i / 8)
            .ok_or_else(|| GkgError::Contract("key file truncated".into()))?;
        bits.push((byte >> (7 - i % 8)) & 1);
    }
    Ok((node, trial, levels, nu, bits))
}

/// Noiseless max pairwise NSE of the signal parts in a round.
pub fn max_pairwise_signal_nse(round: &ProbeRound) -> Option<f64> {
    let k = round.users.len();
    let mut worst: Option<f64> = None;
    for i in 0..k {
        let yi = round.users[i].signal_part;
        if yi.norm() == 0.0 {
            continue;
        }
        for j in 0..k {
            if i == j {
                continue;
            }
            let nse = (yi - round.users[j].signal_part).norm_sqr() / yi.norm_sqr();
            worst = Some(worst.map_or(nse, |w| w.max(nse)));
        }
    }
    worst
}
