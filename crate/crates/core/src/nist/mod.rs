//! Nine-test subset of the NIST SP 800-22 statistical randomness suite.
//!
//! Tests: Frequency, Block Frequency, Cumulative Sums (forward/backward),
//! FFT, Runs, Longest Run of Ones, Binary Matrix Rank, Serial and
//! Approximate Entropy. A stream passes a test when its p-value exceeds
//! [`ALPHA`]. Streams shorter than a test's minimum are reported as
//! not-applicable, never silently passed.
//!
//! The Rank test nominally requires at least 38 matrices (38912 bits); on
//! shorter streams it runs with a reduced matrix count and the deviation is
//! flagged in the report. Cumulative Sums reports the minimum of the
//! forward and backward p-values as the stream's p-value (both exported);
//! Serial likewise reports the minimum of its two p-values.

use crate::error::{GkgError, Result};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

/// Significance level: a stream passes when p > ALPHA.
pub const ALPHA: f64 = 0.01;

/// Table row names, fixed order used by reports.
pub const TEST_NAMES: [&str; 9] = [
    "Approximate Entropy",
    "Block Frequency",
    "Cumulative Sums",
    "FFT",
    "Frequency",
    "Rank",
    "Runs",
    "Longest Run",
    "Serial",
];

/// Result of applying one test to one stream.
#[derive(Debug, Clone, PartialEq)]
pub enum TestOutcome {
    /// Test ran; `p_value` is the stream's representative p-value and
    /// `components` holds any sub-p-values (forward/backward, p1/p2).
    Applied {
        p_value: f64,
        components: Vec<(&'static str, f64)>,
        note: Option<String>,
    },
    /// Stream too short (or otherwise outside the test's domain).
    NotApplicable(String),
}

impl TestOutcome {
    fn applied(p: f64) -> Self {
        TestOutcome::Applied { p_value: p, components: Vec::new(), note: None }
    }

    /// Representative p-value, if the test ran.
    pub fn p_value(&self) -> Option<f64> {
        match self {
            TestOutcome::Applied { p_value, .. } => Some(*p_value),
            TestOutcome::NotApplicable(_) => None,
        }
    }

    /// True when the test ran and the stream passed at [`ALPHA`].
    pub fn passed(&self) -> bool {
        matches!(self, TestOutcome::Applied { p_value, .. } if *p_value > ALPHA)
    }
}

/// Parameters for the tests that take a block or pattern length.
#[derive(Debug, Clone)]
pub struct NistSettings {
    /// Block Frequency block length; `None` picks 128 when the stream has
    /// at least 1280 bits, 20 otherwise.
    pub block_frequency_m: Option<usize>,
    /// Serial pattern length.
    pub serial_m: usize,
    /// Approximate Entropy pattern length.
    pub apen_m: usize,
}

impl Default for NistSettings {
    fn default() -> Self {
        NistSettings { block_frequency_m: None, serial_m: 3, apen_m: 2 }
    }
}

/// Parses a string of '0'/'1' characters into a bit vector.
pub fn bits_from_str(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(GkgError::Config(format!("invalid bit character {c:?}"))),
        })
        .collect()
}

/// Parses a hex string into a bit vector, most significant bit first.
pub fn bits_from_hex(s: &str) -> Result<Vec<u8>> {
    let mut bits = Vec::with_capacity(s.len() * 4);
    for c in s.chars().filter(|c| !c.is_whitespace()) {
        let v = c
            .to_digit(16)
            .ok_or_else(|| GkgError::Config(format!("invalid hex character {c:?}")))?;
        for shift in (0..4).rev() {
            bits.push(((v >> shift) & 1) as u8);
        }
    }
    Ok(bits)
}

fn check_bits(bits: &[u8]) -> Result<()> {
    if bits.iter().any(|&b| b > 1) {
        return Err(GkgError::Contract("bitstream contains values other than 0/1".into()));
    }
    Ok(())
}

// -------------------------------------------------------------------------
// Test statistics. The `*_p` helpers compute p-values with no length
// gating so that oracle vectors shorter than the official minimums can be
// checked; the public test functions enforce the minimums.
// -------------------------------------------------------------------------

fn frequency_p(bits: &[u8]) -> f64 {
    let n = bits.len() as f64;
    let s: i64 = bits.iter().map(|&b| 2 * b as i64 - 1).sum();
    erfc((s as f64).abs() / n.sqrt() / std::f64::consts::SQRT_2)
}

fn block_frequency_p(bits: &[u8], m: usize) -> f64 {
    let n_blocks = bits.len() / m;
    let mut chi2 = 0.0;
    for b in 0..n_blocks {
        let ones: usize = bits[b * m..(b + 1) * m].iter().map(|&x| x as usize).sum();
        let pi = ones as f64 / m as f64;
        chi2 += (pi - 0.5).powi(2);
    }
    chi2 *= 4.0 * m as f64;
    gamma_ur(n_blocks as f64 / 2.0, chi2 / 2.0)
}

fn runs_p(bits: &[u8]) -> f64 {
    let n = bits.len() as f64;
    let pi = bits.iter().map(|&b| b as f64).sum::<f64>() / n;
    if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
        return 0.0;
    }
    let v: usize = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let num = (v as f64 - 2.0 * n * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * n).sqrt() * pi * (1.0 - pi);
    erfc(num / den)
}

/// Longest-run category tables: (block length M, lowest class bound, class
/// probabilities). Classes are longest run <= lo, steps of one, >= lo + K.
fn longest_run_table(n: usize) -> Option<(usize, usize, &'static [f64])> {
    const PI_8: [f64; 4] = [0.2148, 0.3672, 0.2305, 0.1875];
    const PI_128: [f64; 6] = [0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124];
    const PI_10000: [f64; 7] = [0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727];
    if n < 128 {
        None
    } else if n < 6272 {
        Some((8, 1, &PI_8))
    } else if n < 750_000 {
        Some((128, 4, &PI_128))
    } else {
        Some((10_000, 10, &PI_10000))
    }
}

fn longest_run_p(bits: &[u8], m: usize, lo: usize, pi: &[f64]) -> f64 {
    let k = pi.len() - 1;
    let n_blocks = bits.len() / m;
    let mut counts = vec![0usize; pi.len()];
    for b in 0..n_blocks {
        let mut longest = 0usize;
        let mut run = 0usize;
        for &bit in &bits[b * m..(b + 1) * m] {
            if bit == 1 {
                run += 1;
                longest = longest.max(run);
            } else {
                run = 0;
            }
        }
        let cat = longest.saturating_sub(lo).min(k);
        counts[cat] += 1;
    }
    let nb = n_blocks as f64;
    let chi2: f64 = counts
        .iter()
        .zip(pi)
        .map(|(&c, &p)| (c as f64 - nb * p).powi(2) / (nb * p))
        .sum();
    gamma_ur(k as f64 / 2.0, chi2 / 2.0)
}

/// Rank of a 32x32 binary matrix over GF(2); rows packed into u32.
fn gf2_rank32(rows: &mut [u32; 32]) -> usize {
    let mut rank = 0usize;
    for col in (0..32).rev() {
        let mask = 1u32 << col;
        if let Some(pivot) = (rank..32).find(|&r| rows[r] & mask != 0) {
            rows.swap(rank, pivot);
            let pivot_row = rows[rank];
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && *row & mask != 0 {
                    *row ^= pivot_row;
                }
            }
            rank += 1;
        }
    }
    rank
}

fn rank_p(bits: &[u8]) -> (f64, usize) {
    // asymptotic probabilities of rank 32, 31, <=30 for random 32x32 matrices
    const P_FULL: f64 = 0.2888;
    const P_M1: f64 = 0.5776;
    const P_REST: f64 = 0.1336;
    let n_mat = bits.len() / 1024;
    let mut counts = [0usize; 3];
    for mi in 0..n_mat {
        let mut rows = [0u32; 32];
        for (r, row) in rows.iter_mut().enumerate() {
            for c in 0..32 {
                *row = (*row << 1) | bits[mi * 1024 + r * 32 + c] as u32;
            }
        }
        let rk = gf2_rank32(&mut rows);
        let cat = match rk {
            32 => 0,
            31 => 1,
            _ => 2,
        };
        counts[cat] += 1;
    }
    let nm = n_mat as f64;
    let chi2 = (counts[0] as f64 - nm * P_FULL).powi(2) / (nm * P_FULL)
        + (counts[1] as f64 - nm * P_M1).powi(2) / (nm * P_M1)
        + (counts[2] as f64 - nm * P_REST).powi(2) / (nm * P_REST);
    ((-chi2 / 2.0).exp(), n_mat)
}

fn fft_p(bits: &[u8]) -> (f64, usize) {
    use rustfft::num_complex::Complex64;
    let n = bits.len();
    let mut planner = rustfft::FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex64> = bits
        .iter()
        .map(|&b| Complex64::new(2.0 * b as f64 - 1.0, 0.0))
        .collect();
    fft.process(&mut buf);
    let half = n / 2;
    let t = (n as f64 * (1.0 / 0.05f64).ln()).sqrt();
    let n1 = buf[..half].iter().filter(|c| c.norm() < t).count();
    let n0 = 0.95 * half as f64;
    let d = (n1 as f64 - n0) / (n as f64 * 0.95 * 0.05 / 4.0).sqrt();
    (erfc(d.abs() / std::f64::consts::SQRT_2), n1)
}

/// psi-squared statistic over overlapping m-bit patterns with wraparound.
fn psi_sq(bits: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len();
    let mut counts = vec![0u64; 1 << m];
    let mask = (1usize << m) - 1;
    let mut pat = 0usize;
    for i in 0..m - 1 {
        pat = (pat << 1) | bits[i] as usize;
    }
    for i in 0..n {
        pat = ((pat << 1) | bits[(i + m - 1) % n] as usize) & mask;
        counts[pat] += 1;
    }
    let sum_sq: f64 = counts.iter().map(|&c| (c as f64).powi(2)).sum();
    (1usize << m) as f64 / n as f64 * sum_sq - n as f64
}

fn serial_p(bits: &[u8], m: usize) -> (f64, f64) {
    let psi_m = psi_sq(bits, m);
    let psi_m1 = psi_sq(bits, m - 1);
    let psi_m2 = if m >= 2 { psi_sq(bits, m - 2) } else { 0.0 };
    let d1 = psi_m - psi_m1;
    let d2 = psi_m - 2.0 * psi_m1 + psi_m2;
    let p1 = gamma_ur(2f64.powi(m as i32 - 2), d1 / 2.0);
    let p2 = gamma_ur(2f64.powi(m as i32 - 3), d2 / 2.0);
    (p1, p2)
}

/// phi_m = sum over patterns of (c/n) ln(c/n), overlapping with wraparound.
fn apen_phi(bits: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len();
    let mut counts = vec![0u64; 1 << m];
    let mask = (1usize << m) - 1;
    let mut pat = 0usize;
    for i in 0..m - 1 {
        pat = (pat << 1) | bits[i] as usize;
    }
    for i in 0..n {
        pat = ((pat << 1) | bits[(i + m - 1) % n] as usize) & mask;
        counts[pat] += 1;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let f = c as f64 / n as f64;
            f * f.ln()
        })
        .sum()
}

fn apen_p(bits: &[u8], m: usize) -> f64 {
    let n = bits.len() as f64;
    let apen = apen_phi(bits, m) - apen_phi(bits, m + 1);
    let chi2 = 2.0 * n * (std::f64::consts::LN_2 - apen);
    gamma_ur(2f64.powi(m as i32 - 1), chi2 / 2.0)
}

fn cusum_z(bits: &[u8], backward: bool) -> i64 {
    let mut s = 0i64;
    let mut z = 0i64;
    let iter: Box<dyn Iterator<Item = &u8>> = if backward {
        Box::new(bits.iter().rev())
    } else {
        Box::new(bits.iter())
    };
    for &b in iter {
        s += 2 * b as i64 - 1;
        z = z.max(s.abs());
    }
    z
}

fn cusum_p_from_z(z: i64, n: usize) -> f64 {
    if z == 0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let phi = |x: f64| normal.cdf(x);
    let nf = n as f64;
    let zf = z as f64;
    let sn = nf.sqrt();
    let nz = nf / zf;
    let mut sum1 = 0.0;
    let k_lo = ((-nz + 1.0) / 4.0).ceil() as i64;
    let k_hi = ((nz - 1.0) / 4.0).floor() as i64;
    for k in k_lo..=k_hi {
        let k = k as f64;
        sum1 += phi((4.0 * k + 1.0) * zf / sn) - phi((4.0 * k - 1.0) * zf / sn);
    }
    let mut sum2 = 0.0;
    let k_lo = ((-nz - 3.0) / 4.0).ceil() as i64;
    for k in k_lo..=k_hi {
        let k = k as f64;
        sum2 += phi((4.0 * k + 3.0) * zf / sn) - phi((4.0 * k + 1.0) * zf / sn);
    }
    1.0 - sum1 + sum2
}

// -------------------------------------------------------------------------
// Public per-test entry points with length gating.
// -------------------------------------------------------------------------

/// Frequency (monobit) test. Requires n >= 100.
pub fn frequency(bits: &[u8]) -> TestOutcome {
    if bits.len() < 100 {
        return TestOutcome::NotApplicable(format!("need >= 100 bits, got {}", bits.len()));
    }
    TestOutcome::applied(frequency_p(bits))
}

/// Block Frequency test with block length `m`. Requires n >= 100 and at
/// least one full block.
pub fn block_frequency(bits: &[u8], m: usize) -> TestOutcome {
    if bits.len() < 100 || m == 0 || bits.len() < m {
        return TestOutcome::NotApplicable(format!(
            "need >= 100 bits and a full block, got n={} M={m}",
            bits.len()
        ));
    }
    TestOutcome::applied(block_frequency_p(bits, m))
}

/// Runs test. Requires n >= 100.
pub fn runs(bits: &[u8]) -> TestOutcome {
    if bits.len() < 100 {
        return TestOutcome::NotApplicable(format!("need >= 100 bits, got {}", bits.len()));
    }
    TestOutcome::applied(runs_p(bits))
}

/// Longest Run of Ones test; the block length is chosen from the stream
/// length per the standard tables. Requires n >= 128.
pub fn longest_run(bits: &[u8]) -> TestOutcome {
    match longest_run_table(bits.len()) {
        None => TestOutcome::NotApplicable(format!("need >= 128 bits, got {}", bits.len())),
        Some((m, lo, pi)) => TestOutcome::applied(longest_run_p(bits, m, lo, pi)),
    }
}

/// Binary Matrix Rank test over 32x32 matrices. Requires at least one
/// matrix (1024 bits); runs with fewer than the nominal 38 matrices are
/// flagged in the outcome note.
pub fn rank(bits: &[u8]) -> TestOutcome {
    if bits.len() < 1024 {
        return TestOutcome::NotApplicable(format!("need >= 1024 bits, got {}", bits.len()));
    }
    let (p, n_mat) = rank_p(bits);
    let note = (n_mat < 38).then(|| {
        format!("reduced matrix count: {n_mat} of the nominal 38 matrices")
    });
    TestOutcome::Applied { p_value: p, components: vec![("matrices", n_mat as f64)], note }
}

/// Discrete Fourier Transform (spectral) test. Requires n >= 100.
pub fn fft(bits: &[u8]) -> TestOutcome {
    if bits.len() < 100 {
        return TestOutcome::NotApplicable(format!("need >= 100 bits, got {}", bits.len()));
    }
    let (p, n1) = fft_p(bits);
    TestOutcome::Applied {
        p_value: p,
        components: vec![("below_threshold", n1 as f64)],
        note: None,
    }
}

/// Serial test with pattern length `m`; the stream p-value is the minimum
/// of the two standard p-values. Requires n >= 100 and 2 <= m < log2(n)-2.
pub fn serial(bits: &[u8], m: usize) -> TestOutcome {
    let n = bits.len();
    if n < 100 || m < 2 || (1usize << (m + 2)) > n {
        return TestOutcome::NotApplicable(format!(
            "need >= 100 bits and 2 <= m < log2(n)-2, got n={n} m={m}"
        ));
    }
    let (p1, p2) = serial_p(bits, m);
    TestOutcome::Applied {
        p_value: p1.min(p2),
        components: vec![("p1", p1), ("p2", p2)],
        note: None,
    }
}

/// Approximate Entropy test with pattern length `m`. Requires n >= 100 and
/// m + 1 well below log2(n).
pub fn approximate_entropy(bits: &[u8], m: usize) -> TestOutcome {
    let n = bits.len();
    if n < 100 || m == 0 || (1usize << (m + 3)) > n {
        return TestOutcome::NotApplicable(format!(
            "need >= 100 bits and small m, got n={n} m={m}"
        ));
    }
    TestOutcome::applied(apen_p(bits, m))
}

/// Cumulative Sums test; the stream p-value is the minimum of the forward
/// and backward p-values (both exported). Requires n >= 100.
pub fn cumulative_sums(bits: &[u8]) -> TestOutcome {
    let n = bits.len();
    if n < 100 {
        return TestOutcome::NotApplicable(format!("need >= 100 bits, got {n}"));
    }
    let pf = cusum_p_from_z(cusum_z(bits, false), n);
    let pb = cusum_p_from_z(cusum_z(bits, true), n);
    TestOutcome::Applied {
        p_value: pf.min(pb),
        components: vec![("forward", pf), ("backward", pb)],
        note: None,
    }
}

// -------------------------------------------------------------------------
// Suite
// -------------------------------------------------------------------------

/// Per-test results over a set of bitstreams.
#[derive(Debug, Clone)]
pub struct NistReport {
    /// Number of bitstreams examined.
    pub stream_count: usize,
    /// Length of each bitstream in bits.
    pub stream_len: usize,
    /// Per test (ordered as [`TEST_NAMES`]), per stream: representative
    /// p-value, or `None` when the test was not applicable.
    pub p_values: Vec<Vec<Option<f64>>>,
    /// Passing streams / applicable streams per test; `None` when no
    /// stream was applicable.
    pub pass_ratios: Vec<Option<f64>>,
    /// Deviations worth surfacing (e.g. reduced Rank matrix count).
    pub notes: Vec<String>,
}

impl NistReport {
    /// Pass ratio for a test by its [`TEST_NAMES`] row name.
    pub fn pass_ratio(&self, name: &str) -> Option<f64> {
        let idx = TEST_NAMES.iter().position(|&t| t == name)?;
        self.pass_ratios[idx]
    }

    /// CSV export: one row per (test, stream) with the p-value, empty when
    /// not applicable.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("#schema=1\ntest,stream,p_value\n");
        for (t, name) in TEST_NAMES.iter().enumerate() {
            for (s, p) in self.p_values[t].iter().enumerate() {
                match p {
                    Some(p) => out.push_str(&format!("{name},{s},{p:.6}\n")),
                    None => out.push_str(&format!("{name},{s},\n")),
                }
            }
        }
        out
    }

    /// Human-readable pass-ratio table, one row per test.
    pub fn table(&self) -> String {
        let mut out = format!(
            "NIST SP 800-22 subset: {} streams x {} bits, alpha = {ALPHA}\n",
            self.stream_count, self.stream_len
        );
        out.push_str(&format!("{:<22} {:>10} {:>12}\n", "Test", "Pass ratio", "Applicable"));
        for (t, name) in TEST_NAMES.iter().enumerate() {
            let applicable = self.p_values[t].iter().filter(|p| p.is_some()).count();
            match self.pass_ratios[t] {
                Some(r) => {
                    out.push_str(&format!("{name:<22} {r:>10.4} {applicable:>12}\n"))
                }
                None => out.push_str(&format!("{name:<22} {:>10} {applicable:>12}\n", "n/a")),
            }
        }
        for note in &self.notes {
            out.push_str(&format!("note: {note}\n"));
        }
        out
    }
}

/// Runs all nine tests over every stream. Streams must share one length.
pub fn nist_suite(streams: &[Vec<u8>], settings: &NistSettings) -> Result<NistReport> {
    if streams.is_empty() {
        return Err(GkgError::Contract("no bitstreams provided".into()));
    }
    let stream_len = streams[0].len();
    if streams.iter().any(|s| s.len() != stream_len) {
        return Err(GkgError::Contract("bitstreams have mixed lengths".into()));
    }
    for s in streams {
        check_bits(s)?;
    }
    let block_m = settings
        .block_frequency_m
        .unwrap_or(if stream_len >= 1280 { 128 } else { 20 });

    let mut p_values: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(streams.len()); 9];
    let mut notes: Vec<String> = Vec::new();
    for s in streams {
        let outcomes: [TestOutcome; 9] = [
            approximate_entropy(s, settings.apen_m),
            block_frequency(s, block_m),
            cumulative_sums(s),
            fft(s),
            frequency(s),
            rank(s),
            runs(s),
            longest_run(s),
            serial(s, settings.serial_m),
        ];
        for (t, o) in outcomes.into_iter().enumerate() {
            if let TestOutcome::Applied { note: Some(n), .. } = &o {
                let tagged = format!("{}: {n}", TEST_NAMES[t]);
                if !notes.contains(&tagged) {
                    notes.push(tagged);
                }
            }
            p_values[t].push(o.p_value());
        }
    }
    let pass_ratios = p_values
        .iter()
        .map(|ps| {
            let applicable: Vec<f64> = ps.iter().flatten().copied().collect();
            if applicable.is_empty() {
                None
            } else {
                let passed = applicable.iter().filter(|&&p| p > ALPHA).count();
                Some(passed as f64 / applicable.len() as f64)
            }
        })
        .collect();
    Ok(NistReport { stream_count: streams.len(), stream_len, p_values, pass_ratios, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    // first 100 bits of the binary expansion of pi, the published SP 800-22
    // reference vector for the 100-bit worked examples
    const PI_100: &str = "1100100100001111110110101010001000100001011010001100\
                          001000110100110001001100011001100010100010111000";

    fn pi_bits() -> Vec<u8> {
        bits_from_str(PI_100).unwrap()
    }

    #[test]
    fn frequency_reference_vector() {
        // frozen oracle: monobit p-value of the published 100-bit vector
        let p = frequency_p(&pi_bits());
        assert!((p - 0.109599).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn block_frequency_reference_vector() {
        let p = block_frequency_p(&pi_bits(), 10);
        assert!((p - 0.706438).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn block_frequency_toy() {
        let bits = bits_from_str("0110011010").unwrap();
        let p = block_frequency_p(&bits, 3);
        assert!((p - 0.801252).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn runs_reference_vector() {
        let p = runs_p(&pi_bits());
        assert!((p - 0.500798).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn runs_toy() {
        let bits = bits_from_str("1001101011").unwrap();
        let p = runs_p(&bits);
        assert!((p - 0.147232).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn cusum_reference_vector() {
        let bits = pi_bits();
        assert_eq!(cusum_z(&bits, false), 16);
        assert_eq!(cusum_z(&bits, true), 19);
        let pf = cusum_p_from_z(16, 100);
        let pb = cusum_p_from_z(19, 100);
        assert!((pf - 0.219194).abs() < 1e-6, "forward p = {pf}");
        assert!((pb - 0.114866).abs() < 1e-6, "backward p = {pb}");
    }

    #[test]
    fn cusum_toy() {
        let bits = bits_from_str("1011010111").unwrap();
        assert_eq!(cusum_z(&bits, false), 4);
        let p = cusum_p_from_z(4, 10);
        assert!((p - 0.411659).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn serial_reference_vector() {
        let (p1, p2) = serial_p(&pi_bits(), 3);
        assert!((p1 - 0.308441).abs() < 1e-6, "p1 = {p1}");
        assert!((p2 - 0.353455).abs() < 1e-6, "p2 = {p2}");
    }

    #[test]
    fn serial_toy() {
        let bits = bits_from_str("0011011101").unwrap();
        let (p1, p2) = serial_p(&bits, 3);
        assert!((p1 - 0.808792).abs() < 1e-6, "p1 = {p1}");
        assert!((p2 - 0.670320).abs() < 1e-6, "p2 = {p2}");
    }

    #[test]
    fn apen_reference_vector() {
        let p = apen_p(&pi_bits(), 2);
        assert!((p - 0.235301).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn apen_toy() {
        let bits = bits_from_str("0100110101").unwrap();
        let p = apen_p(&bits, 3);
        assert!((p - 0.261961).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn fft_reference_vector() {
        let (p, n1) = fft_p(&pi_bits());
        assert_eq!(n1, 48);
        assert!((p - 0.646355).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn fft_toy() {
        let bits = bits_from_str("1001010011").unwrap();
        let (p, n1) = fft_p(&bits);
        assert_eq!(n1, 5);
        assert!((p - 0.468160).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn longest_run_reference_vector() {
        let bits = bits_from_str(
            "11001100000101010110110001001100111000000000001001\
             00110101010001000100111101011010000000110101111100\
             1100111001101101100010110010",
        )
        .unwrap();
        assert_eq!(bits.len(), 128);
        let p = longest_run_p(&bits, 8, 1, &[0.2148, 0.3672, 0.2305, 0.1875]);
        assert!((p - 0.180598).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn rank_reference_vector() {
        // frozen oracle: first 1024 bits of pi form one 32x32 matrix of
        // GF(2) rank 30
        let bits = bits_from_hex(
            "c90fdaa22168c234c4c6628b80dc1cd129024e088a67cc74020bbea63b139b22\
             514a08798e3404ddef9519b3cd3a431b302b0a6df25f14374fe1356d6d51c245\
             e485b576625e7ec6f44c42e9a637ed6b0bff5cb6f406b7edee386bfb5a899fa5\
             ae9f24117c4b1fe649286651ece45b3dc2007cb8a163bf0598da48361c55d39a",
        )
        .unwrap();
        assert_eq!(bits.len(), 1024);
        let mut rows = [0u32; 32];
        for (r, row) in rows.iter_mut().enumerate() {
            for c in 0..32 {
                *row = (*row << 1) | bits[r * 32 + c] as u32;
            }
        }
        assert_eq!(gf2_rank32(&mut rows), 30);
        let (p, n_mat) = rank_p(&bits);
        assert_eq!(n_mat, 1);
        assert!((p - 0.039066).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn rank_identity_matrix_full_rank() {
        let mut rows = [0u32; 32];
        for (i, row) in rows.iter_mut().enumerate() {
            *row = 1 << i;
        }
        assert_eq!(gf2_rank32(&mut rows), 32);
        let mut zero = [0u32; 32];
        assert_eq!(gf2_rank32(&mut zero), 0);
    }

    #[test]
    fn all_zeros_stream_fails_frequency() {
        let bits = vec![0u8; 2000];
        let p = frequency(&bits).p_value().unwrap();
        assert!(p < 1e-10, "p = {p}");
        assert!(!frequency(&bits).passed());
    }

    #[test]
    fn alternating_stream_passes_frequency_fails_runs() {
        let bits: Vec<u8> = (0..2000).map(|i| (i % 2) as u8).collect();
        assert!(frequency(&bits).passed());
        let p = runs(&bits).p_value().unwrap();
        assert!(p < 1e-10, "runs p = {p}");
    }

    #[test]
    fn short_stream_reports_not_applicable() {
        let bits = vec![1u8, 0, 1, 1];
        assert!(matches!(frequency(&bits), TestOutcome::NotApplicable(_)));
        assert!(matches!(rank(&bits), TestOutcome::NotApplicable(_)));
        assert!(matches!(longest_run(&bits), TestOutcome::NotApplicable(_)));
        assert!(matches!(serial(&bits, 3), TestOutcome::NotApplicable(_)));
    }

    #[test]
    fn rank_reduced_count_flagged() {
        let bits: Vec<u8> = {
            let mut rng = seed::rng(11, &[seed::label::ORACLE, 1]);
            (0..2000).map(|_| rng.gen_range(0..2u8)).collect()
        };
        match rank(&bits) {
            TestOutcome::Applied { note, .. } => {
                assert!(note.expect("note").contains("reduced matrix count"))
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn suite_shapes_and_notes() {
        let mut rng = seed::rng(3, &[seed::label::ORACLE, 2]);
        let streams: Vec<Vec<u8>> =
            (0..4).map(|_| (0..2000).map(|_| rng.gen_range(0..2u8)).collect()).collect();
        let report = nist_suite(&streams, &NistSettings::default()).unwrap();
        assert_eq!(report.stream_count, 4);
        assert_eq!(report.stream_len, 2000);
        assert_eq!(report.p_values.len(), 9);
        assert!(report.p_values.iter().all(|ps| ps.len() == 4));
        assert!(report.notes.iter().any(|n| n.contains("reduced matrix count")));
        let table = report.table();
        for name in TEST_NAMES {
            assert!(table.contains(name), "missing row {name}");
        }
        let csv = report.to_csv();
        assert!(csv.starts_with("#schema=1\ntest,stream,p_value\n"));
    }

    #[test]
    fn suite_rejects_mixed_lengths() {
        let streams = vec![vec![0u8; 2000], vec![1u8; 1999]];
        assert!(nist_suite(&streams, &NistSettings::default()).is_err());
        assert!(nist_suite(&[], &NistSettings::default()).is_err());
    }

    #[test]
    fn control_pass_ratios_within_band() {
        // 1000 seeded pseudorandom streams: each test's pass ratio should
        // sit near 1 - alpha
        let streams: Vec<Vec<u8>> = (0..1000)
            .map(|i| {
                let mut rng = seed::rng(42, &[seed::label::ORACLE, i]);
                (0..2000).map(|_| rng.gen_range(0..2u8)).collect()
            })
            .collect();
        let report = nist_suite(&streams, &NistSettings::default()).unwrap();
        for (t, name) in TEST_NAMES.iter().enumerate() {
            let r = report.pass_ratios[t].expect("applicable");
            assert!((0.97..=1.0).contains(&r), "{name} pass ratio {r}");
        }
    }
}
