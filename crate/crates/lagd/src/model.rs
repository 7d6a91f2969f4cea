//! Problem data for the multi-user MISO downlink: system dimensions and
//! powers, Rayleigh channel sampling, SINR / weighted-sum-rate evaluation,
//! the analytic sum-rate gradient, and the total-power projection.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::linalg::{dot_conj, CMatrix};

/// Relative slack tolerated on the power constraint after a projection.
pub const POWER_SLACK: f64 = 1e-12;

/// Problem dimensions, powers and user weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    num_users: usize,
    num_antennas: usize,
    noise_power: f64,
    total_power: f64,
    weights: Vec<f64>,
}

impl SystemConfig {
    pub fn new(
        num_users: usize,
        num_antennas: usize,
        noise_power: f64,
        total_power: f64,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if num_users == 0 || num_antennas == 0 {
            return Err(Error::Config(
                "need at least one user and one antenna".into(),
            ));
        }
        if !noise_power.is_finite() || noise_power <= 0.0 {
            return Err(Error::Config(format!(
                "noise power must be positive, got {noise_power}"
            )));
        }
        if !total_power.is_finite() || total_power <= 0.0 {
            return Err(Error::Config(format!(
                "total power must be positive, got {total_power}"
            )));
        }
        if weights.len() != num_users {
            return Err(Error::Config(format!(
                "{} weights for {} users",
                weights.len(),
                num_users
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::Config("user weights must be positive".into()));
        }
        Ok(Self {
            num_users,
            num_antennas,
            noise_power,
            total_power,
            weights,
        })
    }

    /// All users share unit priority.
    pub fn uniform(
        num_users: usize,
        num_antennas: usize,
        noise_power: f64,
        total_power: f64,
    ) -> Result<Self> {
        Self::new(
            num_users,
            num_antennas,
            noise_power,
            total_power,
            vec![1.0; num_users],
        )
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn total_power(&self) -> f64 {
        self.total_power
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Length of the real-stacked precoder/gradient vector, `2*N*M`.
    pub fn stacked_len(&self) -> usize {
        2 * self.num_users * self.num_antennas
    }
}

/// One channel realization: a length-`M` complex gain vector per user.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    channels: Vec<Vec<Complex64>>,
}

impl ChannelSet {
    pub fn new(channels: Vec<Vec<Complex64>>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Config("empty channel set".into()));
        }
        let m = channels[0].len();
        if m == 0 || channels.iter().any(|h| h.len() != m) {
            return Err(Error::Config(
                "channel vectors must share one nonzero length".into(),
            ));
        }
        if channels
            .iter()
            .flatten()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Config("channel entries must be finite".into()));
        }
        Ok(Self { channels })
    }

    pub fn num_users(&self) -> usize {
        self.channels.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.channels[0].len()
    }

    pub fn user(&self, i: usize) -> &[Complex64] {
        &self.channels[i]
    }

    pub fn users(&self) -> &[Vec<Complex64>] {
        &self.channels
    }
}

/// The transmit beamforming matrix; row `i` is the precoder for user `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    mat: CMatrix,
}

impl Precoder {
    pub fn from_matrix(mat: CMatrix) -> Self {
        Self { mat }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn num_users(&self) -> usize {
        self.mat.rows()
    }

    pub fn num_antennas(&self) -> usize {
        self.mat.cols()
    }

    pub fn user(&self, i: usize) -> &[Complex64] {
        self.mat.row(i)
    }

    /// Transmit power Tr(V V^H).
    pub fn power(&self) -> f64 {
        self.mat.frobenius_sq()
    }

    pub fn is_finite(&self) -> bool {
        self.mat.is_finite()
    }
}

/// Real-parameterized gradient of the weighted sum rate with respect to the
/// precoder, stored as one complex matrix D with Re(D) = dF/dRe(V) and
/// Im(D) = dF/dIm(V).
#[derive(Debug, Clone, PartialEq)]
pub struct WsrGradient {
    mat: CMatrix,
}

impl WsrGradient {
    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn to_real_stacked(&self) -> Vec<f64> {
        self.mat.to_real_stacked()
    }
}

/// SNR (dB) to transmit power under the fixed convention sigma^2 = 1.
pub fn snr_to_power(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

/// Draws one Rayleigh-fading channel set: every entry i.i.d. circularly
/// symmetric complex Gaussian with unit total variance.
pub fn sample_channel(config: &SystemConfig, rng: &mut impl Rng) -> ChannelSet {
    let scale = 0.5f64.sqrt();
    let channels = (0..config.num_users())
        .map(|_| {
            (0..config.num_antennas())
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re * scale, im * scale)
                })
                .collect()
        })
        .collect();
    ChannelSet { channels }
}

fn check_shapes(config: &SystemConfig, channels: &ChannelSet, precoder: &Precoder) -> Result<()> {
    let (n, m) = (config.num_users(), config.num_antennas());
    if channels.num_users() != n || channels.num_antennas() != m {
        return Err(Error::Dimension(format!(
            "channels are {}x{}, config wants {}x{}",
            channels.num_users(),
            channels.num_antennas(),
            n,
            m
        )));
    }
    if precoder.num_users() != n || precoder.num_antennas() != m {
        return Err(Error::Dimension(format!(
            "precoder is {}x{}, config wants {}x{}",
            precoder.num_users(),
            precoder.num_antennas(),
            n,
            m
        )));
    }
    Ok(())
}

/// Cross gains a[i][j] = h_i^H v_j for all user pairs.
pub(crate) fn cross_gains(channels: &ChannelSet, precoder: &Precoder) -> CMatrix {
    let n = channels.num_users();
    let mut a = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a.set(i, j, dot_conj(channels.user(i), precoder.user(j)));
        }
    }
    a
}

/// Per-user SINR: |h_i^H v_i|^2 over interference plus noise.
pub fn sinr(config: &SystemConfig, channels: &ChannelSet, precoder: &Precoder) -> Result<Vec<f64>> {
    check_shapes(config, channels, precoder)?;
    let n = config.num_users();
    let a = cross_gains(channels, precoder);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let signal = a.get(i, i).norm_sqr();
        let mut denom = config.noise_power();
        for j in 0..n {
            if j != i {
                denom += a.get(i, j).norm_sqr();
            }
        }
        out.push(signal / denom);
    }
    Ok(out)
}

/// Weighted sum rate in bits per channel use.
pub fn wsr(config: &SystemConfig, channels: &ChannelSet, precoder: &Precoder) -> Result<f64> {
    let rates = sinr(config, channels, precoder)?;
    Ok(rates
        .iter()
        .zip(config.weights())
        .map(|(s, w)| w * (1.0 + s).log2())
        .sum())
}

/// Analytic gradient of the weighted sum rate.
///
/// With a_ij = h_i^H v_j, T_i = sigma^2 + sum_j |a_ij|^2 and
/// S_i = T_i - |a_ii|^2, the Wirtinger conjugate derivative is
///
///   dF/dv_k* = (alpha_k / (ln2 T_k)) a_kk h_k
///            + sum_{i != k} (alpha_i / ln2)(1/T_i - 1/S_i) a_ik h_i
///
/// and the returned real-parameterized matrix is D = 2 dF/dv*.
pub fn wsr_gradient(
    config: &SystemConfig,
    channels: &ChannelSet,
    precoder: &Precoder,
) -> Result<WsrGradient> {
    check_shapes(config, channels, precoder)?;
    let (n, m) = (config.num_users(), config.num_antennas());
    let a = cross_gains(channels, precoder);

    let mut t = vec![config.noise_power(); n];
    let mut s = vec![config.noise_power(); n];
    for i in 0..n {
        for j in 0..n {
            let p = a.get(i, j).norm_sqr();
            t[i] += p;
            if j != i {
                s[i] += p;
            }
        }
    }

    let mut d = CMatrix::zeros(n, m);
    for k in 0..n {
        let mut row = vec![Complex64::ZERO; m];
        for i in 0..n {
            let coeff = if i == k {
                config.weights()[k] / (LN_2 * t[k])
            } else {
                config.weights()[i] / LN_2 * (1.0 / t[i] - 1.0 / s[i])
            };
            let scale = 2.0 * coeff * a.get(i, k);
            let h = channels.user(i);
            for (dst, hv) in row.iter_mut().zip(h) {
                *dst += scale * hv;
            }
        }
        for (c, v) in row.into_iter().enumerate() {
            d.set(k, c, v);
        }
    }
    Ok(WsrGradient { mat: d })
}

/// Whether a transmit power satisfies the budget, up to the documented
/// rounding slack. The projection and its backward pass must branch on the
/// same predicate.
pub fn power_feasible(config: &SystemConfig, power: f64) -> bool {
    power <= config.total_power() * (1.0 + POWER_SLACK)
}

/// Projection onto the total-power ball: identity when feasible, otherwise
/// a rescale onto the boundary Tr(V V^H) = P. Feasibility includes the
/// [`POWER_SLACK`] rounding band so re-projecting an already projected
/// precoder is a bit-for-bit no-op.
pub fn project_power(config: &SystemConfig, precoder: &Precoder) -> Precoder {
    let power = precoder.power();
    if power_feasible(config, power) {
        return precoder.clone();
    }
    Precoder {
        mat: precoder.mat.scale((config.total_power() / power).sqrt()),
    }
}

/// Random feasible precoder: i.i.d. unit-variance complex Gaussian entries,
/// then the power projection.
pub fn random_precoder(config: &SystemConfig, rng: &mut impl Rng) -> Precoder {
    let scale = 0.5f64.sqrt();
    let (n, m) = (config.num_users(), config.num_antennas());
    let mut mat = CMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            mat.set(i, j, Complex64::new(re * scale, im * scale));
        }
    }
    project_power(config, &Precoder { mat })
}
