//! Measurement-noise families: densities, location derivatives, sampling and
//! the SNR to variance mapping.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Degrees of freedom used for NSST noise when none is given.
pub const DEFAULT_NSST_NU: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Gaussian,
    Laplace,
    Nsst,
}

impl NoiseFamily {
    pub fn name(self) -> &'static str {
        match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Laplace => "laplace",
            NoiseFamily::Nsst => "nsst",
        }
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(NoiseFamily::Gaussian),
            "laplace" => Ok(NoiseFamily::Laplace),
            "nsst" => Ok(NoiseFamily::Nsst),
            _ => Err(Error::parse(s, "expected gaussian, laplace or nsst")),
        }
    }
}

/// Additive noise around the true edge length `d`.
///
/// * `Gaussian { theta }`: variance `theta`.
/// * `Laplace { theta }`: scale `theta`, variance `2 theta^2`.
/// * `Nsst { nu, b }`: `b * W + d` with `W` Student's t on `nu` degrees of
///   freedom, variance `b^2 nu / (nu - 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Gaussian { theta: f64 },
    Laplace { theta: f64 },
    Nsst { nu: u32, b: f64 },
}

impl NoiseModel {
    pub fn gaussian(theta: f64) -> Result<Self> {
        NoiseModel::Gaussian { theta }.validated()
    }

    pub fn laplace(theta: f64) -> Result<Self> {
        NoiseModel::Laplace { theta }.validated()
    }

    pub fn nsst(nu: u32, b: f64) -> Result<Self> {
        NoiseModel::Nsst { nu, b }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match self {
            NoiseModel::Gaussian { theta } | NoiseModel::Laplace { theta } if !ok(theta) => {
                Err(Error::invalid(format!("{} theta must be positive, got {theta}", self.family())))
            }
            NoiseModel::Nsst { b, .. } if !ok(b) => {
                Err(Error::invalid(format!("nsst b must be positive, got {b}")))
            }
            NoiseModel::Nsst { nu, .. } if nu < 3 => Err(Error::invalid(format!(
                "nsst nu must be at least 3 for finite variance, got {nu}"
            ))),
            _ => Ok(self),
        }
    }

    pub fn family(&self) -> NoiseFamily {
        match self {
            NoiseModel::Gaussian { .. } => NoiseFamily::Gaussian,
            NoiseModel::Laplace { .. } => NoiseFamily::Laplace,
            NoiseModel::Nsst { .. } => NoiseFamily::Nsst,
        }
    }

    /// Variance of the noise. Infinite for `Nsst` with `nu <= 2`.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { theta } => theta,
            NoiseModel::Laplace { theta } => 2.0 * theta * theta,
            NoiseModel::Nsst { nu, b } if nu > 2 => b * b * nu as f64 / (nu as f64 - 2.0),
            NoiseModel::Nsst { .. } => f64::INFINITY,
        }
    }

    /// Model of the given family whose variance equals `sigma2`.
    pub fn from_target_variance(family: NoiseFamily, sigma2: f64, nu: Option<u32>) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::invalid(format!("target variance must be positive, got {sigma2}")));
        }
        match family {
            NoiseFamily::Gaussian => NoiseModel::gaussian(sigma2),
            NoiseFamily::Laplace => NoiseModel::laplace((sigma2 / 2.0).sqrt()),
            NoiseFamily::Nsst => {
                let nu = nu.ok_or_else(|| Error::invalid("nsst noise requires nu"))?;
                if nu < 3 {
                    return Err(Error::invalid(format!("nsst nu must be at least 3, got {nu}")));
                }
                NoiseModel::nsst(nu, (sigma2 * (nu as f64 - 2.0) / nu as f64).sqrt())
            }
        }
    }

    /// Log density of a measurement `y` given the true length `d`.
    pub fn log_pdf(&self, y: f64, d: f64) -> f64 {
        let r = y - d;
        match *self {
            NoiseModel::Gaussian { theta } => -0.5 * (2.0 * PI * theta).ln() - r * r / (2.0 * theta),
            NoiseModel::Laplace { theta } => -(2.0 * theta).ln() - r.abs() / theta,
            NoiseModel::Nsst { nu, b } => -b.ln() + student_t_log_pdf(r / b, nu as f64),
        }
    }

    /// Derivative of [`log_pdf`](Self::log_pdf) with respect to `d`.
    ///
    /// The Laplace kink at `y == d` takes the value 0.
    pub fn dlogpdf_dd(&self, y: f64, d: f64) -> f64 {
        let r = y - d;
        match *self {
            NoiseModel::Gaussian { theta } => r / theta,
            NoiseModel::Laplace { theta } => {
                if r > 0.0 {
                    1.0 / theta
                } else if r < 0.0 {
                    -1.0 / theta
                } else {
                    0.0
                }
            }
            NoiseModel::Nsst { nu, b } => {
                let nu = nu as f64;
                let w = r / b;
                (nu + 1.0) / b * w / (nu + w * w)
            }
        }
    }

    /// One draw centered at `d`.
    pub fn sample<R: Rng + ?Sized>(&self, d: f64, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::Gaussian { theta } => {
                let z: f64 = rng.sample(StandardNormal);
                d + theta.sqrt() * z
            }
            NoiseModel::Laplace { theta } => {
                // Inverse CDF with u uniform on (-1/2, 1/2).
                let u: f64 = rng.random::<f64>() - 0.5;
                let tail = 1.0 - 2.0 * u.abs();
                if tail <= 0.0 {
                    return d;
                }
                d - theta * u.signum() * tail.ln()
            }
            NoiseModel::Nsst { nu, b } => d + b * sample_student_t(nu, rng),
        }
    }
}

/// Student's t draw as `Z / sqrt(chi2_nu / nu)`, with the chi-square built
/// from `nu` squared standard normals.
fn sample_student_t<R: Rng + ?Sized>(nu: u32, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let chi2: f64 = (0..nu)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            g * g
        })
        .sum();
    z / (chi2 / nu as f64).sqrt()
}

pub(crate) fn student_t_log_pdf(w: f64, nu: f64) -> f64 {
    libm::lgamma((nu + 1.0) / 2.0) - libm::lgamma(nu / 2.0) - 0.5 * (nu * PI).ln()
        - (nu + 1.0) / 2.0 * (w * w / nu).ln_1p()
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::Gaussian { theta } => write!(f, "gaussian:theta={theta}"),
            NoiseModel::Laplace { theta } => write!(f, "laplace:theta={theta}"),
            NoiseModel::Nsst { nu, b } => write!(f, "nsst:nu={nu},b={b}"),
        }
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    /// Parses `gaussian:theta=<f>`, `laplace:theta=<f>` or `nsst:nu=<int>,b=<f>`.
    fn from_str(s: &str) -> Result<Self> {
        let (family, params) = s
            .split_once(':')
            .ok_or_else(|| Error::parse(s, "expected <family>:<key>=<value>,..."))?;
        let family: NoiseFamily = family.parse()?;
        let mut theta = None;
        let mut nu = None;
        let mut b = None;
        for kv in params.split(',') {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| Error::parse(kv, "expected <key>=<value>"))?;
            let real = || {
                value
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(value, "not a number"))
            };
            match (family, key.trim()) {
                (NoiseFamily::Gaussian | NoiseFamily::Laplace, "theta") => theta = Some(real()?),
                (NoiseFamily::Nsst, "b") => b = Some(real()?),
                (NoiseFamily::Nsst, "nu") => {
                    nu = Some(
                        value
                            .trim()
                            .parse::<u32>()
                            .map_err(|_| Error::parse(value, "nu must be a positive integer"))?,
                    )
                }
                _ => return Err(Error::parse(key, format!("unknown parameter for {family}"))),
            }
        }
        let missing = |p: &str| Error::parse(s, format!("missing parameter {p}"));
        match family {
            NoiseFamily::Gaussian => NoiseModel::gaussian(theta.ok_or_else(|| missing("theta"))?),
            NoiseFamily::Laplace => NoiseModel::laplace(theta.ok_or_else(|| missing("theta"))?),
            NoiseFamily::Nsst => NoiseModel::nsst(
                nu.ok_or_else(|| missing("nu"))?,
                b.ok_or_else(|| missing("b"))?,
            ),
        }
    }
}

/// Signal-to-noise ratio in dB relative to a structure's mean edge length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrSpec {
    pub snr_db: f64,
    pub sigma_x: f64,
}

impl SnrSpec {
    pub fn new(snr_db: f64, sigma_x: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::invalid(format!("snr must be finite, got {snr_db}")));
        }
        if !(sigma_x.is_finite() && sigma_x > 0.0) {
            return Err(Error::invalid(format!("sigma_x must be positive, got {sigma_x}")));
        }
        Ok(Self { snr_db, sigma_x })
    }

    /// Noise variance achieving this SNR.
    pub fn sigma2(&self) -> f64 {
        snr_to_sigma2(self.snr_db, self.sigma_x)
    }
}

/// `sigma_x^2 * 10^(-snr_db / 10)`.
pub fn snr_to_sigma2(snr_db: f64, sigma_x: f64) -> f64 {
    sigma_x * sigma_x * 10f64.powf(-snr_db / 10.0)
}
