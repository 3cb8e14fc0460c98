//! Simulation harness: log-linear intensity models on the unit square,
//! nonhomogeneous Poisson sampling by thinning, the relative integrated
//! squared error criterion, and the replicated benchmark runner.

pub mod benchmark;
pub mod grf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, PointPattern, RasterCovariate};

pub use benchmark::{run_benchmark, BenchmarkConfig, BenchmarkResult, BenchmarkRow, Selector};
pub use grf::{GrfMethod, GrfSpec};

/// The three benchmark models: a random-field covariate, the same covariate
/// observed with an error field, and a distance covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ModelId {
    M1,
    M2,
    M3,
}

impl TryFrom<u8> for ModelId {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(ModelId::M1),
            2 => Ok(ModelId::M2),
            3 => Ok(ModelId::M3),
            other => Err(format!("unknown model {other}, expected 1, 2 or 3")),
        }
    }
}

impl From<ModelId> for u8 {
    fn from(m: ModelId) -> u8 {
        match m {
            ModelId::M1 => 1,
            ModelId::M2 => 2,
            ModelId::M3 => 3,
        }
    }
}

/// A log-linear intensity `lambda(u) = exp(beta0 + beta1 Z(u))` rescaled to
/// a target expected count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub model: ModelId,
    pub beta0: f64,
    pub beta1: f64,
    pub target_m: f64,
}

impl ModelSpec {
    pub fn new(model: ModelId, target_m: f64) -> Result<Self> {
        if !(target_m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "target expected count must be positive, got {target_m}"
            )));
        }
        let (beta0, beta1) = match model {
            ModelId::M1 | ModelId::M2 => (6.0, 4.0),
            ModelId::M3 => (5.0, -3.0),
        };
        Ok(Self {
            model,
            beta0,
            beta1,
            target_m,
        })
    }
}

/// Evaluate the model intensity on the covariate grid and rescale so the
/// expected count over the window equals `target_m`.
pub fn model_intensity(spec: &ModelSpec, covariate: &RasterCovariate) -> Result<RasterCovariate> {
    let raw = covariate.map(|z| (spec.beta0 + spec.beta1 * z).exp())?;
    let total: f64 = raw.values().iter().sum::<f64>() * raw.cell_area();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Numeric(format!("intensity mass {total} is not usable")));
    }
    let scale = spec.target_m / total;
    raw.map(|v| v * scale)
}

/// Distance to a fixed reference polyline, rescaled into `[0, 1]`, sampled
/// on an `n x n` grid over the unit square.
pub fn distance_covariate(ncols: usize, nrows: usize) -> Result<RasterCovariate> {
    // a vertical stroke with a loop and a leg, well inside the unit square
    const SEGMENTS: [((f64, f64), (f64, f64)); 7] = [
        ((0.35, 0.20), (0.35, 0.80)),
        ((0.35, 0.80), (0.55, 0.80)),
        ((0.55, 0.80), (0.62, 0.72)),
        ((0.62, 0.72), (0.62, 0.60)),
        ((0.62, 0.60), (0.55, 0.52)),
        ((0.55, 0.52), (0.35, 0.52)),
        ((0.45, 0.52), (0.65, 0.20)),
    ];
    let dist_to_segment = |px: f64, py: f64, (a, b): ((f64, f64), (f64, f64))| {
        let (ax, ay) = a;
        let (bx, by) = b;
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        let t = (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0);
        let (cx, cy) = (ax + t * dx, ay + t * dy);
        (px - cx).hypot(py - cy)
    };
    let raw = RasterCovariate::from_fn(crate::geom::Window::unit_square(), ncols, nrows, |x, y| {
        SEGMENTS
            .iter()
            .map(|&s| dist_to_segment(x, y, s))
            .fold(f64::INFINITY, f64::min)
    })?;
    let max = raw.max_value();
    raw.map(|d| d / max)
}

/// Simulate a nonhomogeneous Poisson pattern from a gridded intensity by
/// thinning: dominate with the cell maximum, then accept proposals with
/// probability `lambda(u) / lambda_max`.
pub fn simulate_poisson(intensity: &RasterCovariate, seed: u64) -> Result<PointPattern> {
    if intensity.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidData("intensity must be non-negative".into()));
    }
    let window = *intensity.window();
    let lambda_max = intensity.max_value();
    if lambda_max == 0.0 {
        return PointPattern::new(Vec::new(), window);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dominating = lambda_max * window.area();
    let n_dom = rand_distr::Poisson::new(dominating)
        .map_err(|e| Error::Numeric(format!("Poisson({dominating}): {e}")))?
        .sample(&mut rng)
        .round() as usize;
    let mut points = Vec::new();
    for _ in 0..n_dom {
        let x = rng.random_range(window.xmin()..window.xmax());
        let y = rng.random_range(window.ymin()..window.ymax());
        let p = Point::new(x, y);
        let u: f64 = rng.random();
        // bilinear interpolation never exceeds the cell maximum, so the
        // dominating rate is valid
        if u * lambda_max < intensity.value_at_unchecked(p) {
            points.push(p);
        }
    }
    PointPattern::new(points, window)
}

/// Relative integrated squared error between an estimated and a true
/// intensity surface on a shared grid: `∫ ((est - truth)/truth)² du` by
/// midpoint quadrature.
pub fn ise_rel(estimate: &RasterCovariate, truth: &RasterCovariate) -> Result<f64> {
    if estimate.ncols() != truth.ncols()
        || estimate.nrows() != truth.nrows()
        || estimate.window() != truth.window()
    {
        return Err(Error::InvalidParameter("intensity grids do not match".into()));
    }
    ise_rel_values(estimate.values(), truth)
}

/// `ise_rel` against raw estimate values laid out on the truth's grid.
pub fn ise_rel_values(estimate: &[f64], truth: &RasterCovariate) -> Result<f64> {
    if estimate.len() != truth.values().len() {
        return Err(Error::InvalidParameter("intensity grids do not match".into()));
    }
    if truth.values().iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidData(
            "true intensity must be strictly positive for the relative error".into(),
        ));
    }
    let mut acc = crate::numeric::KahanSum::new();
    for (&e, &t) in estimate.iter().zip(truth.values()) {
        let r = (e - t) / t;
        acc.add(r * r);
    }
    Ok(acc.value() * truth.cell_area())
}
