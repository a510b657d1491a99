//! Spatially correlated Rayleigh channels over a planar RIS.
//!
//! A square RIS of N elements at quarter-wavelength spacing induces the
//! isotropic-scattering sinc correlation between elements. Per-node channel
//! vectors are drawn as CN(0, R) via the eigendecomposition square root of R,
//! with negative eigenvalues clipped to zero.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{GkgError, Result};
use crate::seed::{self, label};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Eigenvalues of R below this (negative) threshold are a modeling error
/// rather than numerical noise.
const EIG_CLIP_TOL: f64 = 1e-8;

/// Planar RIS geometry: a square grid of elements.
#[derive(Debug, Clone)]
pub struct RisGeometry {
    pub n_elements: usize,
    pub element_width: f64,
    pub element_height: f64,
    pub wavelength: f64,
}

impl RisGeometry {
    /// Square RIS with quarter-wavelength element sizes at carrier `f_c` Hz.
    pub fn square(n_elements: usize, carrier_hz: f64) -> Result<Self> {
        let wavelength = SPEED_OF_LIGHT / carrier_hz;
        let geo = Self {
            n_elements,
            element_width: wavelength / 4.0,
            element_height: wavelength / 4.0,
            wavelength,
        };
        geo.side_len()?;
        Ok(geo)
    }

    /// Grid side length; errors if N is not a perfect square.
    pub fn side_len(&self) -> Result<usize> {
        let side = (self.n_elements as f64).sqrt().round() as usize;
        if side * side != self.n_elements || self.n_elements == 0 {
            return Err(GkgError::Config(format!(
                "square RIS requires a perfect-square element count, got {}",
                self.n_elements
            )));
        }
        Ok(side)
    }

    /// Element position (meters) in the RIS plane, row-major over the grid.
    pub fn element_position(&self, idx: usize) -> Result<(f64, f64)> {
        let side = self.side_len()?;
        let row = idx / side;
        let col = idx % side;
        Ok((col as f64 * self.element_width, row as f64 * self.element_height))
    }
}

/// Inter-element spatial correlation matrix R.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn identity(n: usize) -> Self {
        Self { entries: DMatrix::identity(n, n) }
    }

    pub fn from_entries(entries: DMatrix<f64>) -> Self {
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Real square-root factor L with L Lᵀ ≈ R, negative eigenvalues clipped.
    ///
    /// Errors if an eigenvalue is negative beyond the clipping tolerance.
    pub fn sqrt_factor(&self) -> Result<DMatrix<f64>> {
        let eig = self.entries.clone().symmetric_eigen();
        let n = self.dim();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -EIG_CLIP_TOL * (n as f64) {
            return Err(GkgError::Model(format!(
                "correlation matrix has negative eigenvalue {min:.3e} beyond clipping tolerance"
            )));
        }
        let sqrt_vals = DVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()));
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals))
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
    }
}

/// Isotropic-scattering correlation R_{m,n} = sinc(2 d_{m,n} / λ).
pub fn build_correlation_matrix(geometry: &RisGeometry) -> Result<CorrelationMatrix> {
    let n = geometry.n_elements;
    geometry.side_len()?;
    if geometry.wavelength <= 0.0 {
        return Err(GkgError::Config("wavelength must be positive".into()));
    }
    let positions: Vec<(f64, f64)> = (0..n)
        .map(|i| geometry.element_position(i))
        .collect::<Result<_>>()?;
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let (xi, yi) = positions[i];
            let (xj, yj) = positions[j];
            let dist = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
            let val = sinc(2.0 * dist / geometry.wavelength);
            r[(i, j)] = val;
            r[(j, i)] = val;
        }
    }
    Ok(CorrelationMatrix::from_entries(r))
}

/// Large-scale channel variance in dB at distance `d`:
/// σ²[dB] = G − 10 ζ log₁₀(d/d₀) + σ₀².
pub fn path_loss_variance_db(gain_dbi: f64, zeta: f64, d: f64, d0: f64, sigma0_db: f64) -> Result<f64> {
    if d0 <= 0.0 || d < d0 {
        return Err(GkgError::Domain(format!("distance {d} must satisfy d >= d0 > 0 (d0 = {d0})")));
    }
    Ok(gain_dbi - 10.0 * zeta * (d / d0).log10() + sigma0_db)
}

/// Thermal noise power: −174 dBm/Hz + 10 log₁₀(BW) + NF.
pub fn noise_power_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    assert!(bandwidth_hz > 0.0, "bandwidth must be positive");
    -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Large-scale link budget for the Alice/UT/Eve to RIS links.
#[derive(Debug, Clone)]
pub struct LinkBudget {
    pub sigma_ar_db: f64,
    pub sigma_kr_db: f64,
    pub sigma_er_db: f64,
    /// κ_ar = linear σ_ar² · d_H · d_V
    pub kappa_ar: f64,
    pub kappa_kr: f64,
    pub kappa_er: f64,
    pub d_ar: f64,
    pub d_kr: f64,
    pub antenna_gain_dbi: f64,
    pub pathloss_exponent: f64,
    pub sigma0_db: f64,
}

impl LinkBudget {
    /// Budget with the default indoor parameters (G = 4 dBi, ζ = 2,
    /// σ₀² = −30 dB at d₀ = 1 m); Eve shares the UT distance.
    pub fn indoor(geometry: &RisGeometry, d_ar: f64, d_kr: f64) -> Result<Self> {
        Self::new(geometry, d_ar, d_kr, d_kr, 4.0, 2.0, -30.0)
    }

    pub fn new(
        geometry: &RisGeometry,
        d_ar: f64,
        d_kr: f64,
        d_er: f64,
        antenna_gain_dbi: f64,
        pathloss_exponent: f64,
        sigma0_db: f64,
    ) -> Result<Self> {
        let area = geometry.element_width * geometry.element_height;
        let sigma_ar_db = path_loss_variance_db(antenna_gain_dbi, pathloss_exponent, d_ar, 1.0, sigma0_db)?;
        let sigma_kr_db = path_loss_variance_db(antenna_gain_dbi, pathloss_exponent, d_kr, 1.0, sigma0_db)?;
        let sigma_er_db = path_loss_variance_db(antenna_gain_dbi, pathloss_exponent, d_er, 1.0, sigma0_db)?;
        Ok(Self {
            sigma_ar_db,
            sigma_kr_db,
            sigma_er_db,
            kappa_ar: db_to_linear(sigma_ar_db) * area,
            kappa_kr: db_to_linear(sigma_kr_db) * area,
            kappa_er: db_to_linear(sigma_er_db) * area,
            d_ar,
            d_kr,
            antenna_gain_dbi,
            pathloss_exponent,
            sigma0_db,
        })
    }
}

/// Normalized channel draws for one probing instance: Alice→RIS, each UT→RIS
/// and Eve→RIS, each CN(0, R) and independent across nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h_ar: DVector<Complex64>,
    pub h_kr: Vec<DVector<Complex64>>,
    pub h_er: DVector<Complex64>,
}

impl ChannelSet {
    pub fn n_elements(&self) -> usize {
        self.h_ar.len()
    }

    pub fn n_users(&self) -> usize {
        self.h_kr.len()
    }
}

fn draw_cn01(n: usize, rng: &mut impl Rng) -> DVector<Complex64> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    DVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

fn correlate(factor: &DMatrix<f64>, white: &DVector<Complex64>) -> DVector<Complex64> {
    let n = factor.nrows();
    DVector::from_fn(n, |i, _| {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            acc += white[j] * factor[(i, j)];
        }
        acc
    })
}

/// Reusable sampler holding the square-root factor of R.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    factor: DMatrix<f64>,
}

impl ChannelSampler {
    pub fn new(r: &CorrelationMatrix) -> Result<Self> {
        Ok(Self { factor: r.sqrt_factor()? })
    }

    /// K + 2 independent CN(0, R) draws: node ids 0 (Alice), 1..=K (UTs),
    /// K+1 (Eve). Deterministic in (seed, trial).
    pub fn sample(&self, k_users: usize, seed: u64, trial: u64) -> Result<ChannelSet> {
        if k_users == 0 {
            return Err(GkgError::Config("at least one UT required".into()));
        }
        let n = self.factor.nrows();
        let mut draw = |node: u64| {
            let mut rng = seed::rng(seed, &[label::CHANNEL, trial, node]);
            correlate(&self.factor, &draw_cn01(n, &mut rng))
        };
        let h_ar = draw(0);
        let h_kr = (1..=k_users as u64).map(&mut draw).collect();
        let h_er = draw(k_users as u64 + 1);
        Ok(ChannelSet { h_ar, h_kr, h_er })
    }
}

/// One-shot correlated sampling; prefer [`ChannelSampler`] inside trial loops.
pub fn sample_channels(r: &CorrelationMatrix, k_users: usize, seed: u64) -> Result<ChannelSet> {
    ChannelSampler::new(r)?.sample(k_users, seed, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn geometry(n: usize) -> RisGeometry {
        RisGeometry::square(n, 1e9).unwrap()
    }

    #[test]
    fn single_element_correlation_is_unit() {
        let r = build_correlation_matrix(&geometry(1)).unwrap();
        assert_eq!(r.dim(), 1);
        assert_abs_diff_eq!(r.entries()[(0, 0)], 1.0);
    }

    #[test]
    fn half_wavelength_spacing_decorrelates() {
        // two elements spaced λ/2 → sinc(1) = 0
        let lambda = 0.3;
        let geo = RisGeometry {
            n_elements: 4,
            element_width: lambda / 2.0,
            element_height: lambda / 2.0,
            wavelength: lambda,
        };
        let r = build_correlation_matrix(&geo).unwrap();
        assert_abs_diff_eq!(r.entries()[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn quarter_wavelength_neighbor_correlation() {
        // adjacent at λ/4 → sinc(1/2) = 2/π
        let r = build_correlation_matrix(&geometry(4)).unwrap();
        assert_abs_diff_eq!(r.entries()[(0, 1)], 2.0 / std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn correlation_symmetric_unit_diagonal() {
        for n in [1, 4, 16, 36] {
            let r = build_correlation_matrix(&geometry(n)).unwrap();
            let e = r.entries();
            for i in 0..n {
                assert_eq!(e[(i, i)], 1.0);
                for j in 0..n {
                    assert_eq!(e[(i, j)], e[(j, i)]);
                }
            }
        }
    }

    #[test]
    fn non_square_count_rejected() {
        assert!(RisGeometry::square(7, 1e9).is_err());
    }

    #[test]
    fn clipping_perturbation_is_tiny_on_reference_geometries() {
        for n in [16, 64] {
            let r = build_correlation_matrix(&geometry(n)).unwrap();
            let factor = r.sqrt_factor().unwrap();
            let recon = &factor * factor.transpose();
            let diff = (recon - r.entries()).norm();
            assert!(diff < 1e-8, "clip perturbation {diff} for N={n}");
        }
    }

    #[test]
    fn path_loss_examples() {
        assert_abs_diff_eq!(path_loss_variance_db(4.0, 2.0, 1.0, 1.0, -30.0).unwrap(), -26.0);
        assert_abs_diff_eq!(
            path_loss_variance_db(4.0, 2.0, 50.0, 1.0, -30.0).unwrap(),
            4.0 - 30.0 - 20.0 * 50f64.log10(),
            epsilon = 1e-12
        );
        // ≈ −59.98 dB at 50 m, ≈ −62.90 dB at 70 m
        assert_abs_diff_eq!(path_loss_variance_db(4.0, 2.0, 50.0, 1.0, -30.0).unwrap(), -59.9794, epsilon = 1e-3);
        assert_abs_diff_eq!(path_loss_variance_db(4.0, 2.0, 70.0, 1.0, -30.0).unwrap(), -62.9018, epsilon = 1e-3);
    }

    #[test]
    fn path_loss_monotone_in_distance() {
        let mut last = f64::INFINITY;
        for d in [1.0, 2.0, 5.0, 20.0, 70.0, 200.0] {
            let v = path_loss_variance_db(4.0, 2.0, d, 1.0, -30.0).unwrap();
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn path_loss_rejects_below_reference() {
        assert!(path_loss_variance_db(4.0, 2.0, 0.5, 1.0, -30.0).is_err());
    }

    #[test]
    fn noise_power_examples() {
        assert_abs_diff_eq!(noise_power_dbm(1.0, 0.0), -174.0);
        assert_abs_diff_eq!(noise_power_dbm(1e6, 5.0), -109.0);
        assert_abs_diff_eq!(noise_power_dbm(1e6, 0.0), -114.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let r = build_correlation_matrix(&geometry(16)).unwrap();
        let a = sample_channels(&r, 3, 42).unwrap();
        let b = sample_channels(&r, 3, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_channels(&r, 3, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn identity_scalar_variance() {
        let r = CorrelationMatrix::identity(1);
        let sampler = ChannelSampler::new(&r).unwrap();
        let trials = 100_000;
        let mut acc = 0.0;
        for t in 0..trials {
            let ch = sampler.sample(1, 1, t).unwrap();
            acc += ch.h_ar[0].norm_sqr();
        }
        let var = acc / trials as f64;
        assert!((var - 1.0).abs() < 0.02, "empirical variance {var}");
    }

    #[test]
    fn empirical_covariance_matches_r() {
        let r = build_correlation_matrix(&geometry(16)).unwrap();
        let sampler = ChannelSampler::new(&r).unwrap();
        let trials = 100_000u64;
        let n = 16;
        let mut cov = DMatrix::<Complex64>::zeros(n, n);
        for t in 0..trials {
            let ch = sampler.sample(1, 5, t).unwrap();
            let h = &ch.h_ar;
            for i in 0..n {
                for j in 0..n {
                    cov[(i, j)] += h[i] * h[j].conj();
                }
            }
        }
        cov /= Complex64::new(trials as f64, 0.0);
        for i in 0..n {
            for j in 0..n {
                let err = (cov[(i, j)] - Complex64::new(r.entries()[(i, j)], 0.0)).norm();
                assert!(err < 0.02, "cov[{i},{j}] off by {err}");
            }
        }
    }

    #[test]
    fn cross_node_draws_independent() {
        let r = build_correlation_matrix(&geometry(4)).unwrap();
        let sampler = ChannelSampler::new(&r).unwrap();
        let trials = 100_000u64;
        let mut cross = DMatrix::<Complex64>::zeros(4, 4);
        for t in 0..trials {
            let ch = sampler.sample(2, 9, t).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    cross[(i, j)] += ch.h_kr[0][i] * ch.h_kr[1][j].conj();
                }
            }
        }
        cross /= Complex64::new(trials as f64, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                assert!(cross[(i, j)].norm() < 0.02);
            }
        }
    }
}
