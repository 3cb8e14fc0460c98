//! Smooth bootstrap for the transformed point process: a pilot-smoothed
//! world to resample from, closed-form bootstrap error expansions, their
//! Monte Carlo counterparts, and the bootstrap bandwidth selector.
//!
//! A world freezes `rho_b` (the weighted kernel estimate at a pilot
//! bandwidth `b`), its expected count `m_hat = ∫ rho_b g*`, and the
//! resampling density `f_tilde = rho_b g* / m_hat`. Resampling draws
//! `N* ~ Poisson(m_hat)` events i.i.d. from `f_tilde` by inverse CDF.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::bandwidth::{self, BandwidthMethod, BandwidthReport};
use crate::error::{Error, Result};
use crate::estimators::{relative_density_curve, rho_estimate, RhoEstimate, TransformedSample};
use crate::kernels::Kernel;
use crate::numeric::{self, cumtrapz, simpson, KahanSum};
use crate::transform::CovariateDistribution;

/// Frozen resampling world for the smooth bootstrap.
#[derive(Debug, Clone)]
pub struct BootstrapWorld {
    pilot_b: f64,
    kernel: Kernel,
    dist: CovariateDistribution,
    rho_b: RhoEstimate,
    rho_b_second: Vec<f64>,
    m_hat: f64,
    f_tilde: Vec<f64>,
    cdf: Vec<f64>,
    rng_seed: u64,
}

/// Build a world from a sample at pilot bandwidth `b`.
pub fn build_world(
    sample: &TransformedSample,
    dist: &CovariateDistribution,
    b: f64,
    kernel: Kernel,
    seed: u64,
) -> Result<BootstrapWorld> {
    if sample.is_empty() {
        return Err(Error::InvalidData("bootstrap world needs at least one event".into()));
    }
    let rho_b = rho_estimate(sample, dist, b, kernel)?;
    let m_hat = rho_b.m_hat;
    if !(m_hat > 0.0) {
        return Err(Error::Numeric(format!(
            "pilot-smoothed expected count is {m_hat}, must be positive"
        )));
    }
    let mut f_tilde: Vec<f64> = rho_b
        .rho
        .iter()
        .zip(dist.g_star())
        .map(|(&r, &g)| r * g / m_hat)
        .collect();
    // normalize exactly against its own Simpson integral
    let mass = simpson(&f_tilde, dist.dz());
    if !(mass > 0.0) {
        return Err(Error::Numeric("resampling density has no mass".into()));
    }
    for v in &mut f_tilde {
        *v /= mass;
    }
    let mut cdf = cumtrapz(&f_tilde, dist.dz());
    let end = *cdf.last().unwrap();
    for v in &mut cdf {
        *v /= end;
    }

    let rho_b_second = rho_second_curve(sample, dist, b, kernel, &rho_b);

    Ok(BootstrapWorld {
        pilot_b: b,
        kernel,
        dist: dist.clone(),
        rho_b,
        rho_b_second,
        m_hat,
        f_tilde,
        cdf,
        rng_seed: seed,
    })
}

/// Second derivative of the pilot estimate on the grid: the analytic kernel
/// second derivative where available (gaussian), otherwise the three-point
/// stencil applied to the gridded curve.
fn rho_second_curve(
    sample: &TransformedSample,
    dist: &CovariateDistribution,
    b: f64,
    kernel: Kernel,
    rho_b: &RhoEstimate,
) -> Vec<f64> {
    if kernel.second_derivative(0.0).is_some() {
        dist.z_grid()
            .iter()
            .map(|&z| {
                sample
                    .z()
                    .iter()
                    .zip(sample.weights())
                    .map(|(&zi, &wi)| {
                        wi * kernel.second_derivative_scaled(z - zi, b).expect("checked above")
                    })
                    .sum()
            })
            .collect()
    } else {
        numeric::second_derivative_uniform(&rho_b.rho, dist.dz())
    }
}

impl BootstrapWorld {
    pub fn pilot_b(&self) -> f64 {
        self.pilot_b
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn m_hat(&self) -> f64 {
        self.m_hat
    }

    pub fn f_tilde(&self) -> &[f64] {
        &self.f_tilde
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn dist(&self) -> &CovariateDistribution {
        &self.dist
    }

    pub fn rho_b(&self) -> &RhoEstimate {
        &self.rho_b
    }

    pub fn rho_b_second(&self) -> &[f64] {
        &self.rho_b_second
    }

    pub fn seed(&self) -> u64 {
        self.rng_seed
    }

    /// Draw one bootstrap sample. Each replicate index keys an independent
    /// RNG substream of the world seed, so replicates are reproducible and
    /// order-independent.
    pub fn resample(&self, replicate: u64) -> TransformedSample {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(replicate);
        let n_star = rand_distr::Poisson::new(self.m_hat)
            .expect("m_hat > 0 checked at build")
            .sample(&mut rng)
            .round() as usize;
        if n_star == 0 {
            return TransformedSample::empty();
        }
        let z0 = self.dist.z_min();
        let dz = self.dist.dz();
        let floor = self.dist.g_star_floor();
        let mut z = Vec::with_capacity(n_star);
        let mut w = Vec::with_capacity(n_star);
        for _ in 0..n_star {
            let u: f64 = rand::Rng::random(&mut rng);
            let zi = inverse_cdf(&self.cdf, z0, dz, u);
            // the resampling density vanishes wherever g* does, so the
            // floor only guards against interpolation dust at cell edges
            let g = self.dist.gstar_at(zi).max(floor);
            z.push(zi);
            w.push(1.0 / g);
        }
        TransformedSample::from_parts(z, w).expect("positive finite weights by construction")
    }
}

/// Invert a gridded CDF by linear interpolation within cells.
fn inverse_cdf(cdf: &[f64], z0: f64, dz: f64, u: f64) -> f64 {
    let n = cdf.len();
    let u = u.clamp(0.0, 1.0);
    // first index with cdf > u
    let hi = cdf.partition_point(|&c| c <= u);
    if hi == 0 {
        return z0;
    }
    if hi >= n {
        return z0 + dz * (n - 1) as f64;
    }
    let lo = hi - 1;
    let span = cdf[hi] - cdf[lo];
    let frac = if span > 0.0 { (u - cdf[lo]) / span } else { 0.0 };
    z0 + dz * (lo as f64 + frac)
}

/// Closed-form bootstrap mean integrated squared error at bandwidth `h`,
/// from the second-order expansion under the bootstrap distribution.
pub fn mise_star_closed_form(world: &BootstrapWorld, h: f64, kernel: Kernel) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
    }
    let m = world.m_hat;
    let dist = &world.dist;
    let dz = dist.dz();
    let em = (-m).exp();
    let one = 1.0 - em;

    let f_sq: Vec<f64> = world.f_tilde.iter().map(|&v| v * v).collect();
    let r_f = simpson(&f_sq, dz);

    let integrand: Vec<f64> = world
        .rho_b_second
        .iter()
        .zip(dist.g_star())
        .map(|(&rpp, &g)| rpp * g / m)
        .collect();
    let r_curv = bandwidth::curvature_functional(dist, &integrand);

    let cross: Vec<f64> = world
        .f_tilde
        .iter()
        .zip(&integrand)
        .map(|(&f, &c)| f * c)
        .collect();
    let cross_int = simpson(&cross, dz);

    let a_m = bandwidth::poisson_reciprocal_moment(m)?;
    Ok(em * em * r_f
        + 0.25 * h.powi(4) * r_curv * kernel.mu2().powi(2) * one * one
        - em * one * h * h * kernel.mu2() * cross_int
        + a_m / h * kernel.roughness())
}

/// The asymptotic part of `mise_star_closed_form` (the two terms that
/// survive as `m_hat` grows).
pub fn amise_star(world: &BootstrapWorld, h: f64, kernel: Kernel) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
    }
    let m = world.m_hat;
    let integrand: Vec<f64> = world
        .rho_b_second
        .iter()
        .zip(world.dist.g_star())
        .map(|(&rpp, &g)| rpp * g / m)
        .collect();
    let r_curv = bandwidth::curvature_functional(&world.dist, &integrand);
    let a_m = bandwidth::poisson_reciprocal_moment(m)?;
    Ok(bandwidth::amise(h, m, a_m, r_curv, kernel))
}

/// Monte Carlo estimate of the bootstrap MISE at `h`: the average over `b_reps`
/// resamples of `∫ (f_hat* - f_tilde)² dz`. Returns (estimate, standard error).
pub fn mise_star_monte_carlo(
    world: &BootstrapWorld,
    h: f64,
    kernel: Kernel,
    b_reps: usize,
) -> Result<(f64, f64)> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
    }
    if b_reps == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    let dz = world.dist.dz();
    let ises: Vec<f64> = (0..b_reps as u64)
        .into_par_iter()
        .map(|rep| {
            let resampled = world.resample(rep);
            let f_star = relative_density_curve(&resampled, &world.dist, h, kernel)
                .expect("bandwidth validated");
            let sq: Vec<f64> = f_star
                .iter()
                .zip(&world.f_tilde)
                .map(|(&a, &b)| (a - b) * (a - b))
                .collect();
            simpson(&sq, dz)
        })
        .collect();
    let mut acc = KahanSum::new();
    for &v in &ises {
        acc.add(v);
    }
    let mean = acc.value() / b_reps as f64;
    let mut var = KahanSum::new();
    for &v in &ises {
        var.add((v - mean) * (v - mean));
    }
    let se = if b_reps > 1 {
        (var.value() / ((b_reps - 1) as f64 * b_reps as f64)).sqrt()
    } else {
        f64::NAN
    };
    Ok((mean, se))
}

/// Bootstrap bandwidth selector: rule-of-thumb, rescale to the pilot rate,
/// freeze a world at the pilot, and evaluate the bootstrap-optimal closed
/// form with the exact reciprocal moment `A(m_hat)`.
pub fn h_boot(
    sample: &TransformedSample,
    dist: &CovariateDistribution,
    kernel: Kernel,
) -> Result<BandwidthReport> {
    if sample.len() < 2 {
        return Err(Error::InvalidData("bootstrap selector needs n >= 2".into()));
    }
    let rt = bandwidth::rule_of_thumb(sample, dist, kernel, false)?;
    let b = bandwidth::pilot_bandwidth(rt.h, sample.len());
    // no randomness is consumed: the selector is a closed-form plug-in
    let world = build_world(sample, dist, b, kernel, 0)?;
    let m = world.m_hat;
    let integrand: Vec<f64> = world
        .rho_b_second
        .iter()
        .zip(dist.g_star())
        .map(|(&rpp, &g)| rpp * g / m)
        .collect();
    let r_curv = bandwidth::curvature_functional(dist, &integrand);
    let a_m = bandwidth::poisson_reciprocal_moment(m)?;
    let h = bandwidth::h_from_amise(a_m, m, r_curv, kernel)?;
    let mut report = BandwidthReport::new(BandwidthMethod::Boot, h);
    report.diagnostics.insert("h_rt".into(), rt.h);
    report.diagnostics.insert("pilot_b".into(), b);
    report.diagnostics.insert("m_hat".into(), m);
    report.diagnostics.insert("r_curvature".into(), r_curv);
    report.diagnostics.insert("a_m".into(), a_m);
    Ok(report)
}
