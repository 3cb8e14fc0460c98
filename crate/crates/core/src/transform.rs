//! The covariate-space measure: spatial CDF of a covariate, its
//! area-weighted density `g*`, the non-normalised CDF `G*`, and the
//! expected-count functional `m = ∫ rho g*`.
//!
//! For a covariate Z on a window W, `G*(z)` is the area of `{u : Z(u) <= z}`
//! and `g*` its derivative, so `g*(z)` measures area per unit covariate
//! value and integrates to `|W|`. On a finite grid `g*` is reconstructed by
//! kernel smoothing of the cell values weighted by cell area.

use crate::error::{Error, Result};
use crate::geom::RasterCovariate;
use crate::numeric::{self, simpson, OutOfRange};

/// Relative floor under which `g*` is treated as negligible covariate mass.
pub const EPS_G_REL: f64 = 1e-6;

/// Discretized covariate-space measure on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateDistribution {
    z_grid: Vec<f64>,
    g_star: Vec<f64>,
    cap_g_star: Vec<f64>,
    g_star_max: f64,
    area: f64,
    smoothing_bandwidth: f64,
}

impl CovariateDistribution {
    /// Build the measure from a gridded covariate. `n_z` is the evaluation
    /// grid size (at least 64). The density smoothing bandwidth defaults to
    /// Silverman's rule on the cell values.
    pub fn from_raster(raster: &RasterCovariate, n_z: usize) -> Result<Self> {
        Self::from_raster_with_bandwidth(raster, n_z, None)
    }

    pub fn from_raster_with_bandwidth(
        raster: &RasterCovariate,
        n_z: usize,
        bandwidth: Option<f64>,
    ) -> Result<Self> {
        if n_z < 64 {
            return Err(Error::InvalidParameter(format!(
                "z grid needs at least 64 points, got {n_z}"
            )));
        }
        let mut cells = raster.values().to_vec();
        cells.sort_by(|a, b| a.partial_cmp(b).expect("finite raster"));
        let z_lo = cells[0];
        let z_hi = cells[cells.len() - 1];
        if !(z_hi > z_lo) {
            return Err(Error::InvalidData("covariate has zero gradient".into()));
        }
        let sb = match bandwidth {
            Some(b) if b > 0.0 => b,
            Some(b) => {
                return Err(Error::InvalidParameter(format!(
                    "smoothing bandwidth must be positive, got {b}"
                )))
            }
            None => numeric::silverman_bandwidth(&cells)?,
        };

        // pad by three bandwidths so kernels in downstream estimators keep
        // their mass inside the grid
        let z_grid = numeric::linspace(z_lo - 3.0 * sb, z_hi + 3.0 * sb, n_z);
        let cell_area = raster.cell_area();
        let area = raster.window().area();

        // g*: gaussian KDE of cell values weighted by cell area; cells more
        // than 8 bandwidths away contribute below 1e-15 and are skipped
        let norm = 1.0 / (sb * (2.0 * std::f64::consts::PI).sqrt());
        let g_star: Vec<f64> = z_grid
            .iter()
            .map(|&z| {
                let lo = cells.partition_point(|&c| c < z - 8.0 * sb);
                let hi = cells.partition_point(|&c| c <= z + 8.0 * sb);
                let mut acc = 0.0;
                for &c in &cells[lo..hi] {
                    let t = (z - c) / sb;
                    acc += (-0.5 * t * t).exp();
                }
                acc * cell_area * norm
            })
            .collect();

        // G*: exact area of {Z <= z} from the sorted cell values
        let cap_g_star: Vec<f64> = z_grid
            .iter()
            .map(|&z| cell_area * cells.partition_point(|&c| c <= z) as f64)
            .collect();

        Self::from_parts(z_grid, g_star, cap_g_star, area, sb)
    }

    /// Build the measure from an analytic density `g*` (area per covariate
    /// unit) on `[z_lo, z_hi]`. `G*` is its running integral.
    pub fn from_gstar_fn(
        z_lo: f64,
        z_hi: f64,
        n_z: usize,
        area: f64,
        gstar: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if n_z < 64 {
            return Err(Error::InvalidParameter("z grid needs at least 64 points".into()));
        }
        let z_grid = numeric::linspace(z_lo, z_hi, n_z);
        let dz = z_grid[1] - z_grid[0];
        let g_star: Vec<f64> = z_grid.iter().map(|&z| gstar(z)).collect();
        let mut cap = numeric::cumtrapz(&g_star, dz);
        let total = *cap.last().unwrap();
        if total > 0.0 {
            let scale = area / total;
            for v in &mut cap {
                *v *= scale;
            }
        }
        Self::from_parts(z_grid, g_star, cap, area, dz)
    }

    /// Assemble from precomputed pieces, enforcing the measure invariants.
    pub fn from_parts(
        z_grid: Vec<f64>,
        g_star: Vec<f64>,
        cap_g_star: Vec<f64>,
        area: f64,
        smoothing_bandwidth: f64,
    ) -> Result<Self> {
        if z_grid.len() < 2 || z_grid.len() != g_star.len() || z_grid.len() != cap_g_star.len() {
            return Err(Error::InvalidData("measure grids must share a length >= 2".into()));
        }
        if !z_grid.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidData("z grid must be strictly increasing".into()));
        }
        if g_star.iter().any(|&g| !(g >= 0.0)) {
            return Err(Error::InvalidData("g* must be non-negative".into()));
        }
        if cap_g_star.windows(2).any(|w| w[1] < w[0]) || cap_g_star[0] < 0.0 {
            return Err(Error::InvalidData("G* must be nondecreasing from >= 0".into()));
        }
        let end = *cap_g_star.last().unwrap();
        if (end - area).abs() > 1e-9 * area {
            return Err(Error::Numeric(format!(
                "G* ends at {end}, expected window area {area}"
            )));
        }
        let dz = z_grid[1] - z_grid[0];
        let mass = simpson(&g_star, dz);
        if (mass - area).abs() > 5e-3 * area {
            return Err(Error::Numeric(format!(
                "integral of g* is {mass}, expected window area {area} within 0.5%"
            )));
        }
        let g_star_max = g_star.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            z_grid,
            g_star,
            cap_g_star,
            g_star_max,
            area,
            smoothing_bandwidth,
        })
    }

    pub fn z_grid(&self) -> &[f64] {
        &self.z_grid
    }

    pub fn g_star(&self) -> &[f64] {
        &self.g_star
    }

    pub fn cap_g_star(&self) -> &[f64] {
        &self.cap_g_star
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn smoothing_bandwidth(&self) -> f64 {
        self.smoothing_bandwidth
    }

    pub fn z_min(&self) -> f64 {
        self.z_grid[0]
    }

    pub fn z_max(&self) -> f64 {
        *self.z_grid.last().unwrap()
    }

    pub fn dz(&self) -> f64 {
        self.z_grid[1] - self.z_grid[0]
    }

    pub fn len(&self) -> usize {
        self.z_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_grid.is_empty()
    }

    pub fn g_star_max(&self) -> f64 {
        self.g_star_max
    }

    /// Absolute floor under which events sit in negligible covariate mass.
    pub fn g_star_floor(&self) -> f64 {
        EPS_G_REL * self.g_star_max
    }

    /// `g*` linearly interpolated on the grid; zero outside the grid range.
    #[inline]
    pub fn gstar_at(&self, z: f64) -> f64 {
        numeric::interp_uniform(self.z_grid[0], self.dz(), &self.g_star, z, OutOfRange::Zero)
    }

    /// Simpson integral of `rho * g*` over the grid: the expected event
    /// count for a covariate-driven intensity `rho`.
    pub fn expected_count(&self, rho: &[f64]) -> Result<f64> {
        if rho.len() != self.z_grid.len() {
            return Err(Error::InvalidParameter(format!(
                "rho has {} values, grid has {}",
                rho.len(),
                self.z_grid.len()
            )));
        }
        if rho.iter().any(|&r| !r.is_finite()) {
            return Err(Error::InvalidData("rho must be finite on the grid".into()));
        }
        if rho.iter().any(|&r| r < 0.0) {
            return Err(Error::InvalidData("rho must be non-negative".into()));
        }
        let prod: Vec<f64> = rho.iter().zip(&self.g_star).map(|(r, g)| r * g).collect();
        Ok(simpson(&prod, self.dz()))
    }

    /// `expected_count` for an analytic intensity function.
    pub fn expected_count_fn(&self, rho: impl Fn(f64) -> f64) -> Result<f64> {
        let vals: Vec<f64> = self.z_grid.iter().map(|&z| rho(z)).collect();
        self.expected_count(&vals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{RasterCovariate, Window};
    use crate::numeric::cumtrapz;
    use approx::assert_relative_eq;

    fn raster_x(n: usize) -> RasterCovariate {
        RasterCovariate::from_fn(Window::unit_square(), n, n, |x, _| x).unwrap()
    }

    fn raster_xy(n: usize) -> RasterCovariate {
        RasterCovariate::from_fn(Window::unit_square(), n, n, |x, y| x + y).unwrap()
    }

    #[test]
    fn gstar_of_plane_x_is_flat() {
        // Z(u) = x on the unit square has g* = 1 on (0, 1)
        let dist = CovariateDistribution::from_raster(&raster_x(200), 257).unwrap();
        let mut worst: f64 = 0.0;
        for &z in dist.z_grid() {
            if z > 0.1 && z < 0.9 {
                worst = worst.max((dist.gstar_at(z) - 1.0).abs());
            }
        }
        assert!(worst < 0.02, "max |g* - 1| = {worst}");
    }

    #[test]
    fn gstar_of_plane_sum_is_triangular() {
        // Z(u) = x + y has the triangular density: z on (0,1), 2-z on (1,2)
        let dist = CovariateDistribution::from_raster(&raster_xy(200), 257).unwrap();
        let mut worst: f64 = 0.0;
        for &z in dist.z_grid() {
            if z > 0.05 && z < 1.95 && (z - 1.0).abs() > 0.12 {
                let truth = if z <= 1.0 { z } else { 2.0 - z };
                worst = worst.max((dist.gstar_at(z) - truth).abs());
            }
        }
        assert!(worst < 0.03, "max triangular error = {worst}");
    }

    #[test]
    fn cap_g_midrange() {
        let dist = CovariateDistribution::from_raster(&raster_x(200), 257).unwrap();
        // G*(0.5) is half the unit-square area
        let dz = dist.dz();
        let idx = ((0.5 - dist.z_min()) / dz).round() as usize;
        let z = dist.z_grid()[idx];
        assert!((z - 0.5).abs() < dz);
        assert_relative_eq!(dist.cap_g_star()[idx], 0.5, epsilon = 1e-3 + dz);
    }

    #[test]
    fn constant_raster_rejected() {
        let flat = RasterCovariate::from_fn(Window::unit_square(), 32, 32, |_, _| 2.5).unwrap();
        let err = CovariateDistribution::from_raster(&flat, 64).unwrap_err();
        assert!(err.to_string().contains("zero gradient"), "{err}");
    }

    #[test]
    fn gstar_mass_is_window_area() {
        for raster in [raster_x(150), raster_xy(150)] {
            let dist = CovariateDistribution::from_raster(&raster, 129).unwrap();
            let mass = simpson(dist.g_star(), dist.dz());
            assert!((mass - 1.0).abs() < 5e-3, "mass {mass}");
        }
        // non-unit window area
        let w = Window::new(0.0, 2.0, 0.0, 3.0).unwrap();
        let r = RasterCovariate::from_fn(w, 120, 120, |x, y| x * y + 0.3 * x).unwrap();
        let dist = CovariateDistribution::from_raster(&r, 129).unwrap();
        let mass = simpson(dist.g_star(), dist.dz());
        assert!((mass - 6.0).abs() < 0.03, "mass {mass}");
    }

    #[test]
    fn cap_g_tracks_running_integral_for_smooth_density() {
        let dist = CovariateDistribution::from_raster(&raster_xy(200), 257).unwrap();
        let running = cumtrapz(dist.g_star(), dist.dz());
        let worst = dist
            .cap_g_star()
            .iter()
            .zip(&running)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 0.01 * dist.area(), "max |G* - cumints| = {worst}");
    }

    #[test]
    fn gstar_at_interpolation_rules() {
        let dist = CovariateDistribution::from_raster(&raster_x(100), 101).unwrap();
        // grid node returns the stored value
        assert_eq!(dist.gstar_at(dist.z_grid()[40]), dist.g_star()[40]);
        // outside the range: zero
        assert_eq!(dist.gstar_at(dist.z_min() - 1.0), 0.0);
        assert_eq!(dist.gstar_at(dist.z_max() + 0.5), 0.0);
        // midpoint between nodes
        let mid = 0.5 * (dist.z_grid()[40] + dist.z_grid()[41]);
        assert_relative_eq!(
            dist.gstar_at(mid),
            0.5 * (dist.g_star()[40] + dist.g_star()[41]),
            epsilon = 1e-14
        );
    }

    #[test]
    fn expected_count_cases() {
        let dist = CovariateDistribution::from_raster(&raster_x(200), 257).unwrap();
        // constant rho: m = c * |W|
        let m = dist.expected_count_fn(|_| 3.0).unwrap();
        assert!((m - 3.0).abs() < 0.015, "m = {m}");
        // rho(z) = z with Z = x: ∫ z dz on (0,1) = 1/2
        let m = dist.expected_count_fn(|z| z.max(0.0)).unwrap();
        assert!((m - 0.5).abs() < 0.005, "m = {m}");
        // zero rho
        assert_eq!(dist.expected_count_fn(|_| 0.0).unwrap(), 0.0);
    }

    #[test]
    fn expected_count_rejects_negative_rho() {
        let dist = CovariateDistribution::from_raster(&raster_x(100), 65).unwrap();
        assert!(dist.expected_count_fn(|z| z - 10.0).is_err());
    }

    #[test]
    fn scale_equivariance_of_gstar() {
        // replacing Z by aZ + b maps g*(z) to g*((z-b)/a)/a
        let (a, b) = (2.5, -0.7);
        let base = raster_x(150);
        let scaled = base.map(|v| a * v + b).unwrap();
        let d0 = CovariateDistribution::from_raster(&base, 201).unwrap();
        let d1 = CovariateDistribution::from_raster(&scaled, 201).unwrap();
        let mut worst: f64 = 0.0;
        for &z in d0.z_grid() {
            if z > 0.1 && z < 0.9 {
                let want = d0.gstar_at(z) / a;
                let got = d1.gstar_at(a * z + b);
                worst = worst.max((got - want).abs());
            }
        }
        assert!(worst < 0.02 / a, "worst deviation {worst}");
    }

    #[test]
    fn analytic_constructor_flat_density() {
        let dist = CovariateDistribution::from_gstar_fn(0.0, 1.0, 101, 1.0, |_| 1.0).unwrap();
        assert_relative_eq!(dist.gstar_at(0.37), 1.0, epsilon = 1e-12);
        assert_relative_eq!(dist.cap_g_star().last().copied().unwrap(), 1.0, epsilon = 1e-12);
        let m = dist.expected_count_fn(|z| z).unwrap();
        assert_relative_eq!(m, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn small_grid_rejected() {
        let err = CovariateDistribution::from_raster(&raster_x(64), 32).unwrap_err();
        assert!(err.to_string().contains("64"), "{err}");
    }
}
