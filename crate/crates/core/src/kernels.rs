//! Univariate smoothing kernels and their moment constants.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::str::FromStr;

/// Smoothing kernel family. Both members integrate to one, are symmetric and
/// have finite second moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    /// Density value K(u).
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * PI).sqrt(),
            Kernel::Epanechnikov => {
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    0.75 * (1.0 - u * u)
                }
            }
        }
    }

    /// Scaled form K_h(x) = K(x/h)/h.
    #[inline]
    pub fn eval_scaled(self, x: f64, h: f64) -> f64 {
        self.eval(x / h) / h
    }

    /// Second moment mu2 = ∫ u² K(u) du.
    pub fn mu2(self) -> f64 {
        match self {
            Kernel::Gaussian => 1.0,
            Kernel::Epanechnikov => 0.2,
        }
    }

    /// Roughness R(K) = ∫ K²(u) du.
    pub fn roughness(self) -> f64 {
        match self {
            Kernel::Gaussian => 0.5 / PI.sqrt(),
            Kernel::Epanechnikov => 0.6,
        }
    }

    /// Half-width of the support (infinite for the gaussian).
    pub fn support_radius(self) -> f64 {
        match self {
            Kernel::Gaussian => f64::INFINITY,
            Kernel::Epanechnikov => 1.0,
        }
    }

    /// Second derivative K''(u) where it exists in closed form. The
    /// epanechnikov second derivative is discontinuous at the support edge,
    /// so callers fall back to finite differences there.
    pub fn second_derivative(self, u: f64) -> Option<f64> {
        match self {
            Kernel::Gaussian => Some((u * u - 1.0) * self.eval(u)),
            Kernel::Epanechnikov => None,
        }
    }

    /// d²/dx² K_h(x) = K''(x/h)/h³ when available in closed form.
    pub fn second_derivative_scaled(self, x: f64, h: f64) -> Option<f64> {
        self.second_derivative(x / h).map(|v| v / (h * h * h))
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Epanechnikov => "epanechnikov",
        }
    }
}

impl FromStr for Kernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Kernel::Gaussian),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            other => Err(format!("unknown kernel '{other}'")),
        }
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
