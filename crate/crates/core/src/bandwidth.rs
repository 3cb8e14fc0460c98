//! Data-driven bandwidth selection: Silverman's rule on the transformed
//! sample, a point-process rule-of-thumb, least-squares cross-validation,
//! the closed-form asymptotically optimal bandwidth, and the pilot used by
//! the bootstrap selector.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{relative_density_curve, TransformedSample};
use crate::kernels::Kernel;
use crate::numeric::{
    self, gradient_uniform, second_derivative_uniform, simpson, KahanSum,
};
use crate::transform::CovariateDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMethod {
    Silverman,
    Rt,
    Cv,
    Boot,
    AmiseOracle,
    MiseMc,
}

impl std::fmt::Display for BandwidthMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BandwidthMethod::Silverman => "silverman",
            BandwidthMethod::Rt => "rt",
            BandwidthMethod::Cv => "cv",
            BandwidthMethod::Boot => "boot",
            BandwidthMethod::AmiseOracle => "amise_oracle",
            BandwidthMethod::MiseMc => "mise_mc",
        };
        f.write_str(s)
    }
}

/// A selected bandwidth with method-specific diagnostics. `boundary_hit` is
/// raised whenever a grid-search minimiser lands on the search-interval
/// edge, signalling a score without an interior minimum.
#[derive(Debug, Clone, Serialize)]
pub struct BandwidthReport {
    pub method: BandwidthMethod,
    pub h: f64,
    pub boundary_hit: bool,
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<Vec<(f64, f64)>>,
}

impl BandwidthReport {
    pub(crate) fn new(method: BandwidthMethod, h: f64) -> Self {
        Self {
            method,
            h,
            boundary_hit: false,
            diagnostics: BTreeMap::new(),
            curve: None,
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

/// Poisson reciprocal moment `A(m) = E[(1/N) 1{N != 0}]` for `N ~ Poisson(m)`,
/// summed as `sum_{n>=1} exp(-m) m^n / (n n!)` in log space; truncated once a
/// term past the mode falls below `1e-14` of the partial sum.
pub fn poisson_reciprocal_moment(m: f64) -> Result<f64> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Poisson mean must be positive, got {m}"
        )));
    }
    let ln_m = m.ln();
    let mut ln_fact = 0.0;
    let mut sum = KahanSum::new();
    let mut n = 1u64;
    loop {
        let nf = n as f64;
        ln_fact += nf.ln();
        let term = (-m + nf * ln_m - ln_fact - nf.ln()).exp();
        sum.add(term);
        if nf > m && term < 1e-14 * sum.value() {
            break;
        }
        n += 1;
        if n > 100_000_000 {
            return Err(Error::Numeric(format!("reciprocal moment series for m = {m} did not converge")));
        }
    }
    Ok(sum.value())
}

/// Silverman's rule-of-thumb on the raw transformed values (unweighted):
/// `0.9 min(sd, IQR/1.34) n^(-1/5)`.
pub fn silverman(sample: &TransformedSample) -> Result<BandwidthReport> {
    if sample.len() < 2 {
        return Err(Error::InvalidData("Silverman's rule needs n >= 2".into()));
    }
    let h = numeric::silverman_bandwidth(sample.z())?;
    Ok(BandwidthReport::new(BandwidthMethod::Silverman, h)
        .with("n", sample.len() as f64)
        .with("sigma_hat", numeric::sample_sd(sample.z())))
}

/// The asymptotic mean integrated squared error at bandwidth `h` for expected
/// count `m`, reciprocal moment `a_m = A(m)` and curvature functional
/// `r_curv = R(rho'' g* / m)`.
pub fn amise(h: f64, m: f64, a_m: f64, r_curv: f64, kernel: Kernel) -> f64 {
    let one = 1.0 - (-m).exp();
    0.25 * h.powi(4) * r_curv * kernel.mu2().powi(2) * one * one
        + a_m / h * kernel.roughness()
}

pub(crate) fn h_from_amise(a_m: f64, m: f64, r_curv: f64, kernel: Kernel) -> Result<f64> {
    if !(r_curv > 0.0) || !r_curv.is_finite() {
        return Err(Error::Numeric("flat curvature functional".into()));
    }
    let one = 1.0 - (-m).exp();
    Ok((a_m * kernel.roughness() / (kernel.mu2().powi(2) * one * one * r_curv)).powf(0.2))
}

/// `R(rho'' g* / m)` by Simpson on the measure grid, restricted to the
/// region of non-negligible covariate mass so the `1/g*` powers cannot blow
/// up in empty regions.
pub(crate) fn curvature_functional(dist: &CovariateDistribution, integrand: &[f64]) -> f64 {
    let floor = dist.g_star_floor();
    let sq: Vec<f64> = integrand
        .iter()
        .zip(dist.g_star())
        .map(|(&r, &g)| if g > floor { r * r } else { 0.0 })
        .collect();
    simpson(&sq, dist.dz())
}

/// Point-process rule-of-thumb: fit a normal to the transformed values,
/// rebuild the intensity curvature `rho'' g*/m` from the fitted density and
/// the measure's `g*` derivatives, and plug into the optimal-bandwidth
/// closed form with `m = n` and `A(m) = 1/n` (or the exact series when
/// `exact_a` is set).
pub fn rule_of_thumb(
    sample: &TransformedSample,
    dist: &CovariateDistribution,
    kernel: Kernel,
    exact_a: bool,
) -> Result<BandwidthReport> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::InvalidData("rule-of-thumb needs n >= 2".into()));
    }
    let mu = numeric::mean(sample.z());
    let sigma = numeric::sample_sd(sample.z());
    if !(sigma > 0.0) {
        return Err(Error::InvalidData("degenerate spread in transformed values".into()));
    }

    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let f0 = |z: f64| {
        let u = (z - mu) / sigma;
        norm * (-0.5 * u * u).exp()
    };
    let f1 = |z: f64| {
        let u = (z - mu) / sigma;
        -u / sigma * f0(z)
    };
    let f2 = |z: f64| {
        let u = (z - mu) / sigma;
        (u * u - 1.0) / (sigma * sigma) * f0(z)
    };

    let g = dist.g_star();
    let dz = dist.dz();
    let gp = gradient_uniform(g, dz);
    let gpp = second_derivative_uniform(g, dz);
    let floor = dist.g_star_floor();
    // rho'' g*/m = f'' - 2 f' g*'/g* - f g*''/g* + 2 f (g*')^2 / g*^2
    let integrand: Vec<f64> = dist
        .z_grid()
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            if g[i] > floor {
                f2(z) - 2.0 * f1(z) * gp[i] / g[i] - f0(z) * gpp[i] / g[i]
                    + 2.0 * f0(z) * gp[i] * gp[i] / (g[i] * g[i])
            } else {
                0.0
            }
        })
        .collect();
    let r_curv = curvature_functional(dist, &integrand);

    let m = n as f64;
    let a_m = if exact_a {
        poisson_reciprocal_moment(m)?
    } else {
        1.0 / m
    };
    let h = h_from_amise(a_m, m, r_curv, kernel)?;
    Ok(BandwidthReport::new(BandwidthMethod::Rt, h)
        .with("n", m)
        .with("mu_hat", mu)
        .with("sigma_hat", sigma)
        .with("r_curvature", r_curv)
        .with("a_m", a_m))
}

/// Default search grid for cross-validation: 40 log-spaced points spanning
/// one decade either side of the Silverman bandwidth.
pub fn default_cv_grid(silverman_h: f64) -> Vec<f64> {
    numeric::logspace(silverman_h / 10.0, silverman_h * 10.0, 40)
}

/// Least-squares cross-validation:
/// `CV(h) = ∫ f_hat² - (2/n) sum_i f_hat_{-i}(Z_i)`, minimised over the
/// given grid. The leave-one-out estimate uses the `1/(n-1)` prefactor.
pub fn cv_bandwidth(
    sample: &TransformedSample,
    dist: &CovariateDistribution,
    kernel: Kernel,
    h_grid: &[f64],
) -> Result<BandwidthReport> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::InvalidData("cross-validation needs n >= 2".into()));
    }
    if h_grid.is_empty() || h_grid.windows(2).any(|w| w[1] <= w[0]) || !(h_grid[0] > 0.0) {
        return Err(Error::InvalidParameter(
            "bandwidth grid must be positive and increasing".into(),
        ));
    }
    let scores: Vec<f64> = h_grid
        .iter()
        .map(|&h| cv_score(sample, dist, kernel, h))
        .collect::<Result<_>>()?;
    let idx = numeric::argmin(&scores).ok_or_else(|| {
        Error::Numeric("cross-validation score is non-finite on the whole grid".into())
    })?;
    let boundary = idx == 0 || idx + 1 == h_grid.len();
    let mut report = BandwidthReport::new(BandwidthMethod::Cv, h_grid[idx]).with("n", n as f64);
    report.boundary_hit = boundary;
    report.curve = Some(h_grid.iter().cloned().zip(scores).collect());
    Ok(report)
}

/// The cross-validation score at a single bandwidth.
pub fn cv_score(
    sample: &TransformedSample,
    dist: &CovariateDistribution,
    kernel: Kernel,
    h: f64,
) -> Result<f64> {
    let n = sample.len();
    let curve = relative_density_curve(sample, dist, h, kernel)?;
    let sq: Vec<f64> = curve.iter().map(|&v| v * v).collect();
    let integral = simpson(&sq, dist.dz());

    let z = sample.z();
    let w = sample.weights();
    let self_term = kernel.eval_scaled(0.0, h);
    let radius = kernel.support_radius() * h;
    let mut loo = KahanSum::new();
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            let d = z[i] - z[j];
            if d.abs() < radius {
                s += w[j] * kernel.eval_scaled(d, h);
            }
        }
        let f_loo = dist.gstar_at(z[i]) * (s - w[i] * self_term) / (n as f64 - 1.0);
        loo.add(f_loo);
    }
    Ok(integral - 2.0 / n as f64 * loo.value())
}

/// The closed-form asymptotically optimal bandwidth for a known intensity
/// curve `rho`. `rho_second` may supply the analytic second derivative;
/// otherwise `rho` is finite-differenced on the measure grid.
pub fn h_amise_oracle<F>(
    rho: F,
    rho_second: Option<&dyn Fn(f64) -> f64>,
    dist: &CovariateDistribution,
    m: f64,
    kernel: Kernel,
) -> Result<BandwidthReport>
where
    F: Fn(f64) -> f64,
{
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("expected count must be positive, got {m}")));
    }
    let rho_pp: Vec<f64> = match rho_second {
        Some(f) => dist.z_grid().iter().map(|&z| f(z)).collect(),
        None => {
            let vals: Vec<f64> = dist.z_grid().iter().map(|&z| rho(z)).collect();
            second_derivative_uniform(&vals, dist.dz())
        }
    };
    let integrand: Vec<f64> = rho_pp
        .iter()
        .zip(dist.g_star())
        .map(|(&rpp, &g)| rpp * g / m)
        .collect();
    let r_curv = curvature_functional(dist, &integrand);
    let a_m = poisson_reciprocal_moment(m)?;
    let h = h_from_amise(a_m, m, r_curv, kernel)?;
    Ok(BandwidthReport::new(BandwidthMethod::AmiseOracle, h)
        .with("m", m)
        .with("a_m", a_m)
        .with("r_curvature", r_curv))
}

/// Pilot bandwidth for the bootstrap selector: the rule-of-thumb rescaled
/// from the `n^(-1/5)` rate to the `n^(-1/7)` pilot rate,
/// `b = n^(-2/35) h_rt`.
pub fn pilot_bandwidth(rt_h: f64, n: usize) -> f64 {
    rt_h * (n.max(1) as f64).powf(-2.0 / 35.0)
}
