//! Randomness campaign: generates key bits through the full pipeline and
//! runs the SP 800-22 subset on them.

use crate::config::ExperimentConfig;
use crate::pipeline::{run_trial, PointContext};
use crate::sweep::mode_name;
use gkg_core::error::{GkgError, Result};
use gkg_core::nist::{nist_suite, NistReport, NistSettings};
use gkg_core::system::RisMode;
use rayon::prelude::*;
use std::path::Path;

pub struct CampaignOutcome {
    pub mode: RisMode,
    pub report: NistReport,
    /// Full streams assembled vs requested; short campaigns are partial.
    pub streams_built: usize,
    pub streams_requested: usize,
    pub trials_used: u64,
}

/// Accumulates node-0 key bits over trials (cfg.trials is the trial cap)
/// and slices them into `nist_streams` streams of `nist_stream_bits` bits.
pub fn run_campaign(cfg: &ExperimentConfig, mode: RisMode) -> Result<CampaignOutcome> {
    let ctx = PointContext::new(cfg, mode, 0)?;
    let needed = cfg.nist_streams * cfg.nist_stream_bits;
    let mut bits: Vec<u8> = Vec::with_capacity(needed);
    let mut trial = 0u64;
    const BATCH: u64 = 16;
    while bits.len() < needed && trial < cfg.trials {
        let upper = (trial + BATCH).min(cfg.trials);
        let outputs: Vec<_> =
            (trial..upper).into_par_iter().map(|t| run_trial(&ctx, t)).collect();
        for out in outputs {
            if let Some(o) = out? {
                bits.extend(o.materials[0].bits());
            }
        }
        trial = upper;
    }
    let full = (bits.len() / cfg.nist_stream_bits).min(cfg.nist_streams);
    if full == 0 {
        return Err(GkgError::Degenerate(format!(
            "accumulated {} bits, not enough for one {}-bit stream",
            bits.len(),
            cfg.nist_stream_bits
        )));
    }
    let streams: Vec<Vec<u8>> = (0..full)
        .map(|s| bits[s * cfg.nist_stream_bits..(s + 1) * cfg.nist_stream_bits].to_vec())
        .collect();
    let report = nist_suite(&streams, &NistSettings::default())?;
    Ok(CampaignOutcome {
        mode,
        report,
        streams_built: full,
        streams_requested: cfg.nist_streams,
        trials_used: trial,
    })
}

/// Runs the campaign for every configured mode and writes per-mode CSV and
/// table files into `out_dir`. Returns the rendered tables.
pub fn nist_campaign(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<CampaignOutcome>> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("config.echo"), cfg.echo())?;
    let mut outcomes = Vec::new();
    for mode in cfg.mode.ris_modes() {
        let outcome = run_campaign(cfg, mode)?;
        let name = mode_name(mode);
        std::fs::write(out_dir.join(format!("nist_{name}.csv")), outcome.report.to_csv())?;
        let mut table = outcome.report.table();
        if outcome.streams_built < outcome.streams_requested {
            table.push_str(&format!(
                "note: partial campaign, {} of {} requested streams assembled\n",
                outcome.streams_built, outcome.streams_requested
            ));
        }
        std::fs::write(out_dir.join(format!("nist_{name}.txt")), table)?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}
