//! Replicated benchmark of the intensity estimators and bandwidth
//! selectors: simulates patterns from the three models, scores each
//! selector by the relative integrated squared error of the induced
//! intensity surface, and reports the bandwidth bias against the Monte
//! Carlo optimal bandwidth found on the same replicates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth;
use crate::bootstrap;
use crate::error::{Error, Result};
use crate::estimators::{
    lambda_hat, relative_density_curve, rho_estimate, transform_sample, GuanEvaluator,
    TransformedSample,
};
use crate::geom::RasterCovariate;
use crate::kernels::Kernel;
use crate::numeric::{self, mean, mix_seed, sample_sd, simpson};
use crate::sim::{
    distance_covariate, ise_rel_values, model_intensity, simulate_poisson, GrfSpec, ModelId,
    ModelSpec,
};
use crate::transform::CovariateDistribution;

const TAG_GRF: u64 = 0x6772_6600;
const TAG_PATTERN: u64 = 0x7061_7400;

/// Log-spaced bandwidth search grid, relative to the covariate range.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct HGridSpec {
    pub rel_min: f64,
    pub rel_max: f64,
    pub count: usize,
}

impl Default for HGridSpec {
    fn default() -> Self {
        Self {
            rel_min: 5e-3,
            rel_max: 0.5,
            count: 40,
        }
    }
}

impl HGridSpec {
    pub fn absolute(&self, z_range: f64) -> Vec<f64> {
        numeric::logspace(self.rel_min * z_range, self.rel_max * z_range, self.count)
    }
}

/// Data-driven bandwidth selectors entering the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    Silverman,
    Rt,
    Boot,
    Cv,
}

impl Selector {
    pub fn name(self) -> &'static str {
        match self {
            Selector::Silverman => "silverman",
            Selector::Rt => "rt",
            Selector::Boot => "boot",
            Selector::Cv => "cv",
        }
    }

    /// Select a bandwidth; returns `(h, boundary_hit)`.
    fn select(
        self,
        sample: &TransformedSample,
        dist: &CovariateDistribution,
        kernel: Kernel,
    ) -> Result<(f64, bool)> {
        match self {
            Selector::Silverman => bandwidth::silverman(sample).map(|r| (r.h, false)),
            Selector::Rt => {
                bandwidth::rule_of_thumb(sample, dist, kernel, false).map(|r| (r.h, false))
            }
            Selector::Boot => bootstrap::h_boot(sample, dist, kernel).map(|r| (r.h, false)),
            Selector::Cv => {
                let silv = bandwidth::silverman(sample)?;
                let grid = bandwidth::default_cv_grid(silv.h);
                bandwidth::cv_bandwidth(sample, dist, kernel, &grid)
                    .map(|r| (r.h, r.boundary_hit))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub models: Vec<u8>,
    pub m_values: Vec<f64>,
    pub replicates: usize,
    pub selectors: Vec<Selector>,
    pub seed: u64,
    pub raster_size: usize,
    pub n_z: usize,
    pub h_grid: HGridSpec,
    pub kernel: Kernel,
    pub include_guan: bool,
    pub grf_sigma: f64,
    pub grf_range: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            models: vec![1],
            m_values: vec![50.0, 100.0],
            replicates: 100,
            selectors: vec![Selector::Silverman, Selector::Rt, Selector::Boot, Selector::Cv],
            seed: 1,
            raster_size: 128,
            n_z: 257,
            h_grid: HGridSpec::default(),
            kernel: Kernel::Gaussian,
            include_guan: false,
            grf_sigma: 0.1,
            grf_range: 0.1,
        }
    }
}

/// Aggregated scores for one `(model, m, selector)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub model: u8,
    pub m: f64,
    pub selector: String,
    /// mean of the relative integrated squared errors
    pub e1: f64,
    /// standard deviation of the relative integrated squared errors
    pub e2: f64,
    /// mean relative bandwidth bias against the Monte Carlo optimum
    pub e3: f64,
    /// Monte Carlo standard error of e1
    pub e1_se: f64,
    pub h_mean: f64,
    pub h_sd: f64,
    /// the Monte Carlo optimal bandwidth this row is scored against
    pub h_mise: f64,
    pub boundary_hits: usize,
    pub failures: usize,
    pub replicates_used: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkResult {
    pub config: BenchmarkConfig,
    pub rows: Vec<BenchmarkRow>,
}

const COLUMN_ORDER: [&str; 7] = [
    "h_mise",
    "silverman",
    "rt",
    "boot",
    "cv",
    "guan_mise",
    "guan_cv",
];

impl BenchmarkResult {
    pub fn row(&self, model: u8, m: f64, selector: &str) -> Option<&BenchmarkRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.m == m && r.selector == selector)
    }

    /// Wide-format CSV: one line per `(model, m, metric)` with a column per
    /// selector.
    pub fn to_csv(&self) -> String {
        let mut cells: Vec<(u8, f64)> = Vec::new();
        for r in &self.rows {
            if !cells.iter().any(|&(mo, m)| mo == r.model && m == r.m) {
                cells.push((r.model, r.m));
            }
        }
        let columns: Vec<&str> = COLUMN_ORDER
            .iter()
            .copied()
            .filter(|c| self.rows.iter().any(|r| r.selector == *c))
            .collect();
        let mut out = String::from("model,m,metric");
        for c in &columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (model, m) in cells {
            for metric in ["e1", "e2", "e3", "h_mean"] {
                out.push_str(&format!("{model},{m},{metric}"));
                for c in &columns {
                    out.push(',');
                    if let Some(r) = self.row(model, m, c) {
                        let v = match metric {
                            "e1" => r.e1,
                            "e2" => r.e2,
                            "e3" => r.e3,
                            _ => r.h_mean,
                        };
                        out.push_str(&format!("{v:.6}"));
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkResult> {
    if config.replicates < 2 {
        return Err(Error::InvalidParameter("benchmark needs at least 2 replicates".into()));
    }
    if config.models.is_empty() || config.m_values.is_empty() {
        return Err(Error::InvalidParameter("benchmark needs models and m values".into()));
    }
    if config.m_values.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::InvalidParameter("expected counts must be positive".into()));
    }
    let mut rows = Vec::new();
    for &model_raw in &config.models {
        let model = ModelId::try_from(model_raw).map_err(Error::InvalidParameter)?;
        let (z_obs, truth_cov) = build_covariates(model, config)?;
        let dist = CovariateDistribution::from_raster(&z_obs, config.n_z)?;
        for (m_index, &m) in config.m_values.iter().enumerate() {
            let spec = ModelSpec::new(model, m)?;
            let lambda_true = model_intensity(&spec, &truth_cov)?;
            rows.extend(bench_cell(
                config,
                &spec,
                m_index,
                &z_obs,
                &dist,
                &lambda_true,
            )?);
        }
    }
    Ok(BenchmarkResult {
        config: config.clone(),
        rows,
    })
}

/// The covariate handed to the estimators and the covariate generating the
/// truth. They differ only for model 2, where the truth uses the observed
/// field plus an independent error field.
fn build_covariates(
    model: ModelId,
    config: &BenchmarkConfig,
) -> Result<(RasterCovariate, RasterCovariate)> {
    match model {
        ModelId::M1 | ModelId::M2 => {
            let grf = GrfSpec::new(
                config.grf_sigma,
                config.grf_range,
                config.raster_size,
                config.raster_size,
                mix_seed(config.seed, &[TAG_GRF]),
            )?;
            let z1 = grf.realize(0)?;
            if model == ModelId::M1 {
                Ok((z1.clone(), z1))
            } else {
                let e1 = grf.realize(1)?;
                let sum: Vec<f64> = z1
                    .values()
                    .iter()
                    .zip(e1.values())
                    .map(|(&a, &b)| a + b)
                    .collect();
                let truth =
                    RasterCovariate::new(*z1.window(), z1.ncols(), z1.nrows(), sum)?;
                Ok((z1, truth))
            }
        }
        ModelId::M3 => {
            let dr = distance_covariate(config.raster_size, config.raster_size)?;
            Ok((dr.clone(), dr))
        }
    }
}

/// The density of transformed event values under the true model,
/// normalised on the measure grid. For models whose intensity is an
/// explicit function of the observed covariate this is `exp(beta1 z) g*`
/// renormalised; for model 2 (covariate observed with error) it is the
/// intensity-weighted smoothing of the observed cell values.
fn true_relative_density(
    spec: &ModelSpec,
    z_obs: &RasterCovariate,
    lambda_true: &RasterCovariate,
    dist: &CovariateDistribution,
) -> Vec<f64> {
    let mut f: Vec<f64> = match spec.model {
        ModelId::M1 | ModelId::M3 => dist
            .z_grid()
            .iter()
            .zip(dist.g_star())
            .map(|(&z, &g)| (spec.beta1 * z).exp() * g)
            .collect(),
        ModelId::M2 => {
            let sb = dist.smoothing_bandwidth();
            let norm = 1.0 / (sb * (2.0 * std::f64::consts::PI).sqrt());
            let mut pairs: Vec<(f64, f64)> = z_obs
                .values()
                .iter()
                .zip(lambda_true.values())
                .map(|(&z, &l)| (z, l))
                .collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let cell_area = z_obs.cell_area();
            dist.z_grid()
                .iter()
                .map(|&z| {
                    let lo = pairs.partition_point(|&(c, _)| c < z - 8.0 * sb);
                    let hi = pairs.partition_point(|&(c, _)| c <= z + 8.0 * sb);
                    let mut acc = 0.0;
                    for &(c, l) in &pairs[lo..hi] {
                        let t = (z - c) / sb;
                        acc += l * (-0.5 * t * t).exp();
                    }
                    acc * cell_area * norm
                })
                .collect()
        }
    };
    let mass = simpson(&f, dist.dz());
    if mass > 0.0 {
        for v in &mut f {
            *v /= mass;
        }
    }
    f
}

struct Outcome {
    h: f64,
    ise: f64,
    boundary: bool,
}

fn make_row(
    spec: &ModelSpec,
    selector: &str,
    h_mise: f64,
    outcomes: &[Outcome],
    failures: usize,
    oracle: bool,
) -> BenchmarkRow {
    let ises: Vec<f64> = outcomes.iter().map(|o| o.ise).collect();
    let hs: Vec<f64> = outcomes.iter().map(|o| o.h).collect();
    let used = outcomes.len();
    let e1 = mean(&ises);
    let e2 = sample_sd(&ises);
    let e3 = if oracle {
        0.0
    } else {
        mean(&hs.iter().map(|&h| (h - h_mise) / h_mise).collect::<Vec<f64>>())
    };
    BenchmarkRow {
        model: spec.model.into(),
        m: spec.target_m,
        selector: selector.to_string(),
        e1,
        e2,
        e3,
        e1_se: if used > 0 { e2 / (used as f64).sqrt() } else { f64::NAN },
        h_mean: mean(&hs),
        h_sd: sample_sd(&hs),
        h_mise,
        boundary_hits: outcomes.iter().filter(|o| o.boundary).count(),
        failures,
        replicates_used: used,
    }
}

fn bench_cell(
    config: &BenchmarkConfig,
    spec: &ModelSpec,
    m_index: usize,
    z_obs: &RasterCovariate,
    dist: &CovariateDistribution,
    lambda_true: &RasterCovariate,
) -> Result<Vec<BenchmarkRow>> {
    let kernel = config.kernel;
    let reps = config.replicates;
    let model_tag: u8 = spec.model.into();

    // simulate and transform every replicate; failures are excluded and
    // counted (mirrors the per-sample accounting of the study design)
    let samples: Vec<Result<TransformedSample>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let seed = mix_seed(
                config.seed,
                &[TAG_PATTERN, model_tag as u64, m_index as u64, rep as u64],
            );
            let pattern = simulate_poisson(lambda_true, seed)?;
            transform_sample(&pattern, z_obs, dist)
        })
        .collect();
    let valid: Vec<&TransformedSample> = samples.iter().filter_map(|s| s.as_ref().ok()).collect();
    let transform_failures = reps - valid.len();
    if valid.len() < 2 {
        return Err(Error::Numeric(format!(
            "model {model_tag} at m = {}: only {} usable replicates",
            spec.target_m,
            valid.len()
        )));
    }

    let f_true = true_relative_density(spec, z_obs, lambda_true, dist);
    let z_range = dist.z_max() - dist.z_min();
    let h_grid = config.h_grid.absolute(z_range);

    // Monte Carlo optimal bandwidth: minimise the averaged integrated
    // squared error of the relative-density estimate over the shared
    // replicates
    let mise_curve: Vec<f64> = h_grid
        .par_iter()
        .map(|&h| {
            let mut acc = numeric::KahanSum::new();
            for s in &valid {
                let curve = relative_density_curve(s, dist, h, kernel).expect("h > 0");
                let sq: Vec<f64> = curve
                    .iter()
                    .zip(&f_true)
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .collect();
                acc.add(simpson(&sq, dist.dz()));
            }
            acc.value() / valid.len() as f64
        })
        .collect();
    let mise_idx = numeric::argmin(&mise_curve)
        .ok_or_else(|| Error::Numeric("Monte Carlo MISE curve is non-finite".into()))?;
    let h_mise = h_grid[mise_idx];
    let oracle_boundary = mise_idx == 0 || mise_idx + 1 == h_grid.len();

    let score = |s: &TransformedSample, h: f64| -> Result<f64> {
        let rho = rho_estimate(s, dist, h, kernel)?;
        let lam = lambda_hat(&rho, z_obs);
        ise_rel_values(lam.raster.values(), lambda_true)
    };

    let mut rows = Vec::new();

    // oracle row: every replicate scored at the fixed optimal bandwidth
    let oracle_outcomes: Vec<Outcome> = valid
        .par_iter()
        .map(|s| {
            let ise = score(s, h_mise).expect("oracle bandwidth is positive");
            Outcome {
                h: h_mise,
                ise,
                boundary: oracle_boundary,
            }
        })
        .collect();
    rows.push(make_row(
        spec,
        "h_mise",
        h_mise,
        &oracle_outcomes,
        transform_failures,
        true,
    ));

    for &sel in &config.selectors {
        let results: Vec<Result<Outcome>> = valid
            .par_iter()
            .map(|s| {
                let (h, boundary) = sel.select(s, dist, kernel)?;
                let ise = score(s, h)?;
                Ok(Outcome { h, ise, boundary })
            })
            .collect();
        let outcomes: Vec<Outcome> = results.into_iter().filter_map(|r| r.ok()).collect();
        let failures = transform_failures + (valid.len() - outcomes.len());
        rows.push(make_row(spec, sel.name(), h_mise, &outcomes, failures, false));
    }

    if config.include_guan {
        let evaluator = GuanEvaluator::new(z_obs, h_grid.clone(), 2 * config.n_z, kernel)?;
        let guan_curve: Vec<f64> = (0..h_grid.len())
            .into_par_iter()
            .map(|hi| {
                let mut acc = numeric::KahanSum::new();
                for s in &valid {
                    let lam = evaluator.intensity(s.z(), hi, z_obs);
                    acc.add(ise_rel_values(&lam, lambda_true).expect("positive truth"));
                }
                acc.value() / valid.len() as f64
            })
            .collect();
        let g_idx = numeric::argmin(&guan_curve)
            .ok_or_else(|| Error::Numeric("Monte Carlo MISE curve for the covariate-distance estimator is non-finite".into()))?;
        let h_mise_guan = h_grid[g_idx];
        let g_boundary = g_idx == 0 || g_idx + 1 == h_grid.len();

        let guan_oracle: Vec<Outcome> = valid
            .par_iter()
            .map(|s| {
                let lam = evaluator.intensity(s.z(), g_idx, z_obs);
                Outcome {
                    h: h_mise_guan,
                    ise: ise_rel_values(&lam, lambda_true).expect("positive truth"),
                    boundary: g_boundary,
                }
            })
            .collect();
        rows.push(make_row(
            spec,
            "guan_mise",
            h_mise_guan,
            &guan_oracle,
            transform_failures,
            true,
        ));

        let guan_cv: Vec<Result<Outcome>> = valid
            .par_iter()
            .map(|s| {
                let (idx, boundary) = evaluator.select_cv(s.z(), z_obs)?;
                let lam = evaluator.intensity(s.z(), idx, z_obs);
                Ok(Outcome {
                    h: h_grid[idx],
                    ise: ise_rel_values(&lam, lambda_true)?,
                    boundary,
                })
            })
            .collect();
        let outcomes: Vec<Outcome> = guan_cv.into_iter().filter_map(|r| r.ok()).collect();
        let failures = transform_failures + (valid.len() - outcomes.len());
        rows.push(make_row(
            spec,
            "guan_cv",
            h_mise_guan,
            &outcomes,
            failures,
            false,
        ));
    }

    Ok(rows)
}
