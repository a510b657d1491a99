//! Sweep execution, aggregation and file outputs.

use crate::config::{ExperimentConfig, SweepAxis};
use crate::pipeline::{run_trial, PointContext, TrialOutput};
use gkg_core::error::{GkgError, Result};
use gkg_core::metrics::{self, NmseResult};
use gkg_core::system::RisMode;
use rayon::prelude::*;
use std::path::Path;
use std::time::Instant;

pub fn mode_name(mode: RisMode) -> &'static str {
    match mode {
        RisMode::Pris => "pris",
        RisMode::Aris => "aris",
    }
}

/// Aggregated results for one (sweep value, mode) cell.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis_value: f64,
    pub mode: RisMode,
    pub trials: u64,
    pub solved: u64,
    pub failure_rate: f64,
    pub nmse: Option<NmseResult>,
    pub ker_mean: f64,
    pub ker_worst: f64,
    pub kgr_bits_per_feature: f64,
    pub kgr_bits_per_round: f64,
    pub discard_realized: f64,
    pub mean_min_ser_db: f64,
    pub mean_min_snr_db: f64,
    /// Mean of per-trial min Eve NSE over mean max legit NSE (diagnostic).
    pub eve_nse_ratio: f64,
    pub eve_correlation: f64,
    pub wall_ms: u128,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

/// Runs every trial of one (point, mode) cell, in parallel over trials.
pub fn run_point(cfg: &ExperimentConfig, mode: RisMode, point_index: u64, axis_value: f64) -> Result<SweepRow> {
    let started = Instant::now();
    let ctx = PointContext::new(cfg, mode, point_index)?;
    let outputs: Vec<Result<Option<TrialOutput>>> =
        (0..cfg.trials).into_par_iter().map(|t| run_trial(&ctx, t)).collect();

    let mut ok: Vec<TrialOutput> = Vec::new();
    let mut failures = 0u64;
    for out in outputs {
        match out? {
            Some(o) => ok.push(o),
            None => failures += 1,
        }
    }
    let trials = cfg.trials;
    let failure_rate = failures as f64 / trials as f64;

    let nmse = if ok.is_empty() {
        None
    } else {
        let values: Vec<Option<f64>> = ok.iter().map(|o| o.worst_nse).collect();
        metrics::nmse_from_values(&values).ok()
    };

    let mut ker_sum = 0.0;
    let mut ker_worst = 0.0f64;
    let mut ker_n = 0usize;
    let mut kgr_f = 0.0;
    let mut kgr_r = 0.0;
    let mut discard = 0.0;
    let mut kgr_n = 0usize;
    for o in &ok {
        if let Ok(k) = metrics::ker(&o.materials) {
            ker_sum += k.mean;
            ker_worst = ker_worst.max(k.worst_pair);
            ker_n += 1;
        }
        if let Ok(g) = metrics::kgr(&o.materials, cfg.expand_rounds) {
            kgr_f += g.bits_per_feature;
            kgr_r += g.bits_per_round;
            discard += g.discard_realized;
            kgr_n += 1;
        }
    }
    let eve_trials: Vec<_> = ok.iter().map(|o| o.eve_pair.clone()).collect();
    let (eve_ratio, eve_corr) = match metrics::eve_alignment(&eve_trials) {
        Ok(e) if e.mean_max_legit_nse > 0.0 => {
            (e.mean_min_eve_nse / e.mean_max_legit_nse, e.correlation)
        }
        Ok(e) => (f64::INFINITY, e.correlation),
        Err(_) => (f64::NAN, f64::NAN),
    };

    let mean = |s: f64, n: usize| if n > 0 { s / n as f64 } else { f64::NAN };
    Ok(SweepRow {
        axis_value,
        mode,
        trials,
        solved: ok.len() as u64,
        failure_rate,
        nmse,
        ker_mean: mean(ker_sum, ker_n),
        ker_worst,
        kgr_bits_per_feature: mean(kgr_f, kgr_n),
        kgr_bits_per_round: mean(kgr_r, kgr_n),
        discard_realized: mean(discard, kgr_n),
        mean_min_ser_db: mean(ok.iter().map(|o| o.min_ser_db).sum(), ok.len()),
        mean_min_snr_db: mean(ok.iter().map(|o| o.min_snr_db).sum(), ok.len()),
        eve_nse_ratio: eve_ratio,
        eve_correlation: eve_corr,
        wall_ms: started.elapsed().as_millis(),
    })
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let mut rows = Vec::new();
    for (idx, (value, point)) in cfg.points()?.into_iter().enumerate() {
        for mode in cfg.mode.ris_modes() {
            rows.push(run_point(&point, mode, idx as u64, value)?);
        }
    }
    Ok(SweepResult { axis: cfg.sweep_axis, rows })
}

pub const SWEEP_CSV_HEADER: &str = "#schema=1\n\
    axis,value,mode,trials,solved,failure_rate,nmse_mean,nmse_ci95,nmse_excluded,\
    ker_mean,ker_worst,kgr_bits_per_feature,kgr_bits_per_round,discard_realized,\
    mean_min_ser_db,mean_min_snr_db,eve_nse_ratio,eve_correlation\n";

impl SweepResult {
    /// Deterministic CSV: no wall-time columns (those go to timing.csv).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        for r in &self.rows {
            let (nm, nc, nx) = match &r.nmse {
                Some(n) => (
                    format!("{:.10e}", n.mean),
                    format!("{:.10e}", n.ci_half_width),
                    n.trials_excluded.to_string(),
                ),
                None => (String::new(), String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{:.6},{nm},{nc},{nx},{:.8},{:.8},{:.6},{:.6},{:.6},{:.4},{:.4},{:.6},{:.6}\n",
                self.axis.as_str(),
                r.axis_value,
                mode_name(r.mode),
                r.trials,
                r.solved,
                r.failure_rate,
                r.ker_mean,
                r.ker_worst,
                r.kgr_bits_per_feature,
                r.kgr_bits_per_round,
                r.discard_realized,
                r.mean_min_ser_db,
                r.mean_min_snr_db,
                r.eve_nse_ratio,
                r.eve_correlation,
            ));
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("axis,value,mode,wall_ms\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.axis.as_str(),
                r.axis_value,
                mode_name(r.mode),
                r.wall_ms
            ));
        }
        out
    }

    pub fn max_failure_rate(&self) -> f64 {
        self.rows.iter().map(|r| r.failure_rate).fold(0.0, f64::max)
    }
}

/// Declarative chart description for one metric over the sweep axis.
fn plot_description(axis: SweepAxis, metric: &str, column: &str, y_scale: &str, modes: &[RisMode]) -> String {
    let series = modes.iter().map(|&m| mode_name(m)).collect::<Vec<_>>().join(",");
    format!(
        "chart = {metric}_vs_{axis}\ndata = sweep.csv\nx = value\nx_label = {axis}\n\
         y = {column}\ny_scale = {y_scale}\nseries_by = mode\nseries = {series}\n",
        axis = axis.as_str(),
    )
}

/// Writes sweep.csv, timing.csv, config.echo and one plot description per
/// metric into `out_dir`.
pub fn emit_outputs(cfg: &ExperimentConfig, result: &SweepResult, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("sweep.csv"), result.to_csv())?;
    std::fs::write(out_dir.join("timing.csv"), result.timing_csv())?;
    std::fs::write(out_dir.join("config.echo"), cfg.echo())?;
    let plots = out_dir.join("plots");
    std::fs::create_dir_all(&plots)?;
    let modes = cfg.mode.ris_modes();
    for (metric, column, scale) in [
        ("nmse", "nmse_mean", "log10"),
        ("ker", "ker_mean", "log10"),
        ("kgr", "kgr_bits_per_round", "linear"),
        ("eve", "eve_nse_ratio", "log10"),
    ] {
        std::fs::write(
            plots.join(format!("{metric}.plot")),
            plot_description(result.axis, metric, column, scale, &modes),
        )?;
    }
    Ok(())
}

/// Minimum sweep value (power, dBm) reaching KER <= 0.1 per (mode, L):
/// reruns the power sweep once per quantizer level list entry.
pub fn table1(cfg: &ExperimentConfig, out_dir: &Path) -> Result<String> {
    if cfg.sweep_axis != SweepAxis::PAvaDbm {
        return Err(GkgError::Config("table1 requires sweep_axis = p_ava_dbm".into()));
    }
    let mut csv = String::from("#schema=1\nmode,levels,min_p_ava_dbm_for_ker_1e-1\n");
    for &levels in &cfg.table1_levels {
        let mut cfg_l = cfg.clone();
        cfg_l.levels = levels;
        let result = run_sweep(&cfg_l)?;
        for mode in cfg.mode.ris_modes() {
            let min_power = result
                .rows
                .iter()
                .filter(|r| r.mode == mode && r.solved > 0 && r.ker_mean <= 0.1)
                .map(|r| r.axis_value)
                .fold(f64::INFINITY, f64::min);
            let cell = if min_power.is_finite() { format!("{min_power}") } else { String::new() };
            csv.push_str(&format!("{},{levels},{cell}\n", mode_name(mode)));
        }
    }
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("table1.csv"), &csv)?;
    std::fs::write(out_dir.join("config.echo"), cfg.echo())?;
    Ok(csv)
}
