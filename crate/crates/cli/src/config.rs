//! Flat key=value experiment configuration.
//!
//! Units are spelled out in key names (`p_ava_dbm`, `d_ar_m`). Lines
//! starting with `#` and blank lines are ignored. `echo()` writes every
//! resolved key back out so a run can be reproduced from its echo file.

use gkg_core::channel::{db_to_linear, dbm_to_watts, noise_power_dbm};
use gkg_core::error::{GkgError, Result};
use gkg_core::system::{ArisBudget, PilotConfig, RisMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Pris,
    Aris,
    Both,
}

impl Mode {
    pub fn ris_modes(&self) -> Vec<RisMode> {
        match self {
            Mode::Pris => vec![RisMode::Pris],
            Mode::Aris => vec![RisMode::Aris],
            Mode::Both => vec![RisMode::Pris, RisMode::Aris],
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            Mode::Pris => "pris",
            Mode::Aris => "aris",
            Mode::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    None,
    KUsers,
    NElements,
    PAvaDbm,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::KUsers => "k_users",
            SweepAxis::NElements => "n_elements",
            SweepAxis::PAvaDbm => "p_ava_dbm",
        }
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n_elements: usize,
    pub k_users: usize,
    /// Total available power; split P_a = P_R^max = P_ava/2 in ARIS mode,
    /// all of it at the AP in PRIS mode.
    pub p_ava_dbm: f64,
    pub ser_th_db: f64,
    /// Quantization levels L (power of two).
    pub levels: usize,
    /// Guard-band discard fraction.
    pub nu: f64,
    pub trials: u64,
    pub seed: u64,
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    pub d_ar_m: f64,
    pub d_kr_m: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub q_pilots: u32,
    /// Per-element gain cap: w_max² in dB.
    pub w_max_db: f64,
    /// ARIS SDP subspace size per user (1..3); larger is slower but
    /// tighter. 1 keeps only the composite channel directions.
    pub aris_basis_per_user: usize,
    /// Probing rounds per trial via static key expansion.
    pub expand_rounds: usize,
    /// Solver-failure rate above which the run exits with code 3.
    pub failure_threshold: f64,
    pub nist_streams: usize,
    pub nist_stream_bits: usize,
    pub table1_levels: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Both,
            n_elements: 16,
            k_users: 4,
            p_ava_dbm: 36.0,
            ser_th_db: 15.0,
            levels: 4,
            nu: 0.2,
            trials: 200,
            seed: 1,
            sweep_axis: SweepAxis::None,
            sweep_values: Vec::new(),
            d_ar_m: 50.0,
            d_kr_m: 70.0,
            carrier_hz: 1e9,
            bandwidth_hz: 1e6,
            noise_figure_db: 5.0,
            q_pilots: 200,
            w_max_db: 40.0,
            aris_basis_per_user: 1,
            expand_rounds: 1,
            failure_threshold: 0.5,
            nist_streams: 10,
            nist_stream_bits: 200,
            table1_levels: vec![2, 4, 8],
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| GkgError::Config(format!("bad value {value:?} for key {key}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_num(key, v.trim())).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| GkgError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "mode" => {
                    cfg.mode = match value {
                        "pris" => Mode::Pris,
                        "aris" => Mode::Aris,
                        "both" => Mode::Both,
                        _ => return Err(GkgError::Config(format!("unknown mode {value:?}"))),
                    }
                }
                "n_elements" => cfg.n_elements = parse_num(key, value)?,
                "k_users" => cfg.k_users = parse_num(key, value)?,
                "p_ava_dbm" => cfg.p_ava_dbm = parse_num(key, value)?,
                "ser_th_db" => cfg.ser_th_db = parse_num(key, value)?,
                "levels" => cfg.levels = parse_num(key, value)?,
                "nu" => cfg.nu = parse_num(key, value)?,
                "trials" => cfg.trials = parse_num(key, value)?,
                "seed" => cfg.seed = parse_num(key, value)?,
                "sweep_axis" => {
                    cfg.sweep_axis = match value {
                        "none" => SweepAxis::None,
                        "k_users" => SweepAxis::KUsers,
                        "n_elements" => SweepAxis::NElements,
                        "p_ava_dbm" => SweepAxis::PAvaDbm,
                        _ => return Err(GkgError::Config(format!("unknown sweep_axis {value:?}"))),
                    }
                }
                "sweep_values" => cfg.sweep_values = parse_list(key, value)?,
                "d_ar_m" => cfg.d_ar_m = parse_num(key, value)?,
                "d_kr_m" => cfg.d_kr_m = parse_num(key, value)?,
                "carrier_hz" => cfg.carrier_hz = parse_num(key, value)?,
                "bandwidth_hz" => cfg.bandwidth_hz = parse_num(key, value)?,
                "noise_figure_db" => cfg.noise_figure_db = parse_num(key, value)?,
                "q_pilots" => cfg.q_pilots = parse_num(key, value)?,
                "w_max_db" => cfg.w_max_db = parse_num(key, value)?,
                "aris_basis_per_user" => cfg.aris_basis_per_user = parse_num(key, value)?,
                "expand_rounds" => cfg.expand_rounds = parse_num(key, value)?,
                "failure_threshold" => cfg.failure_threshold = parse_num(key, value)?,
                "nist_streams" => cfg.nist_streams = parse_num(key, value)?,
                "nist_stream_bits" => cfg.nist_stream_bits = parse_num(key, value)?,
                "table1_levels" => cfg.table1_levels = parse_list(key, value)?,
                _ => return Err(GkgError::Config(format!("unknown key {key:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let check_point = |n: usize, k: usize, q: u32| -> Result<()> {
            if k < 2 {
                return Err(GkgError::Config("k_users must be at least 2".into()));
            }
            if (q as usize) < k {
                return Err(GkgError::Config(format!("q_pilots {q} must be >= k_users {k}")));
            }
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n || n == 0 {
                return Err(GkgError::Config(format!("n_elements {n} must be a positive square")));
            }
            Ok(())
        };
        for (_, p) in self.points()? {
            check_point(p.n_elements, p.k_users, p.q_pilots)?;
            if !p.levels.is_power_of_two() || p.levels < 2 {
                return Err(GkgError::Config("levels must be a power of two >= 2".into()));
            }
            if !(0.0..1.0).contains(&p.nu) {
                return Err(GkgError::Config("nu must be in [0, 1)".into()));
            }
            if p.trials == 0 {
                return Err(GkgError::Config("trials must be at least 1".into()));
            }
            if p.expand_rounds == 0 {
                return Err(GkgError::Config("expand_rounds must be at least 1".into()));
            }
        }
        if !(1..=3).contains(&self.aris_basis_per_user) {
            return Err(GkgError::Config("aris_basis_per_user must be 1, 2 or 3".into()));
        }
        if !(0.0..=1.0).contains(&self.failure_threshold) {
            return Err(GkgError::Config("failure_threshold must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// One resolved configuration per sweep value (the whole config when
    /// there is no sweep), paired with the axis value for reporting.
    pub fn points(&self) -> Result<Vec<(f64, ExperimentConfig)>> {
        match self.sweep_axis {
            SweepAxis::None => Ok(vec![(0.0, self.clone())]),
            axis => {
                if self.sweep_values.is_empty() {
                    return Err(GkgError::Config("sweep_values empty for a sweep run".into()));
                }
                Ok(self
                    .sweep_values
                    .iter()
                    .map(|&v| {
                        let mut p = self.clone();
                        match axis {
                            SweepAxis::KUsers => p.k_users = v as usize,
                            SweepAxis::NElements => p.n_elements = v as usize,
                            SweepAxis::PAvaDbm => p.p_ava_dbm = v,
                            SweepAxis::None => unreachable!(),
                        }
                        p.sweep_axis = SweepAxis::None;
                        p.sweep_values = Vec::new();
                        (v, p)
                    })
                    .collect())
            }
        }
    }

    /// Node (UT/Eve) thermal noise power in watts from BW and noise figure.
    pub fn node_noise_w(&self) -> f64 {
        dbm_to_watts(noise_power_dbm(self.bandwidth_hz, self.noise_figure_db))
    }

    /// AP pilot power and RIS budget for a mode, honoring the exact power
    /// split: PRIS spends all of P_ava at the AP; ARIS splits it in half.
    pub fn pilot_and_budget(&self, mode: RisMode) -> (PilotConfig, Option<ArisBudget>) {
        let p_ava_w = dbm_to_watts(self.p_ava_dbm);
        match mode {
            RisMode::Pris => (PilotConfig { p_a: p_ava_w, q: self.q_pilots }, None),
            RisMode::Aris => (
                PilotConfig { p_a: p_ava_w / 2.0, q: self.q_pilots },
                Some(ArisBudget {
                    p_r_max: p_ava_w / 2.0,
                    w_max: db_to_linear(self.w_max_db).sqrt(),
                    sigma_f2: self.node_noise_w(),
                }),
            ),
        }
    }

    /// Every resolved key, one `key = value` line each, fixed order.
    pub fn echo(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let ulist =
            |v: &[usize]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        format!(
            "mode = {}\nn_elements = {}\nk_users = {}\np_ava_dbm = {}\nser_th_db = {}\n\
             levels = {}\nnu = {}\ntrials = {}\nseed = {}\nsweep_axis = {}\n\
             sweep_values = {}\nd_ar_m = {}\nd_kr_m = {}\ncarrier_hz = {}\n\
             bandwidth_hz = {}\nnoise_figure_db = {}\nq_pilots = {}\nw_max_db = {}\n\
             aris_basis_per_user = {}\nexpand_rounds = {}\nfailure_threshold = {}\nnist_streams = {}\n\
             nist_stream_bits = {}\ntable1_levels = {}\n",
            self.mode.as_str(),
            self.n_elements,
            self.k_users,
            self.p_ava_dbm,
            self.ser_th_db,
            self.levels,
            self.nu,
            self.trials,
            self.seed,
            self.sweep_axis.as_str(),
            list(&self.sweep_values),
            self.d_ar_m,
            self.d_kr_m,
            self.carrier_hz,
            self.bandwidth_hz,
            self.noise_figure_db,
            self.q_pilots,
            self.w_max_db,
            self.aris_basis_per_user,
            self.expand_rounds,
            self.failure_threshold,
            self.nist_streams,
            self.nist_stream_bits,
            ulist(&self.table1_levels),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal_and_defaults() {
        let cfg = ExperimentConfig::parse("mode = pris\nn_elements = 36\n").unwrap();
        assert_eq!(cfg.mode, Mode::Pris);
        assert_eq!(cfg.n_elements, 36);
        assert_eq!(cfg.k_users, 4);
        assert_eq!(cfg.q_pilots, 200);
    }

    #[test]
    fn echo_round_trips() {
        let text = "mode = both\nn_elements = 16\nsweep_axis = k_users\nsweep_values = 2,4,8\nnu = 0.2\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let echoed = ExperimentConfig::parse(&cfg.echo()).unwrap();
        assert_eq!(cfg, echoed);
        assert_eq!(cfg.echo(), echoed.echo());
    }

    #[test]
    fn rejects_unknown_key_and_bad_values() {
        assert!(ExperimentConfig::parse("bogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("n_elements = 15\n").is_err());
        assert!(ExperimentConfig::parse("levels = 3\n").is_err());
        assert!(ExperimentConfig::parse("nu = 1.5\n").is_err());
        assert!(ExperimentConfig::parse("k_users = 300\n").is_err());
        assert!(ExperimentConfig::parse("no equals sign\n").is_err());
    }

    #[test]
    fn sweep_points_override_axis_field() {
        let cfg =
            ExperimentConfig::parse("sweep_axis = k_users\nsweep_values = 2,4\n").unwrap();
        let pts = cfg.points().unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].1.k_users, 2);
        assert_eq!(pts[1].1.k_users, 4);
        let none = ExperimentConfig::default().points().unwrap();
        assert_eq!(none.len(), 1);
    }

    #[test]
    fn sweep_axis_without_values_rejected() {
        assert!(ExperimentConfig::parse("sweep_axis = p_ava_dbm\n").is_err());
    }

    #[test]
    fn aris_power_split_exact() {
        let cfg = ExperimentConfig::default();
        let (pilot, budget) = cfg.pilot_and_budget(RisMode::Aris);
        let budget = budget.unwrap();
        let p_ava_w = dbm_to_watts(cfg.p_ava_dbm);
        assert_eq!(pilot.p_a + budget.p_r_max, p_ava_w);
        assert_eq!(pilot.p_a, budget.p_r_max);
        let (pilot, budget) = cfg.pilot_and_budget(RisMode::Pris);
        assert!(budget.is_none());
        assert_eq!(pilot.p_a, p_ava_w);
    }
}
