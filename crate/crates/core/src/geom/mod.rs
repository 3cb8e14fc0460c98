//! Observation windows, gridded covariates, point patterns, and covariate
//! evaluation at arbitrary locations.

pub mod io;

use crate::error::{Error, Result};

/// A planar location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned rectangular observation window with positive area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Window {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        if ![xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidData("window bounds must be finite".into()));
        }
        if xmax <= xmin || ymax <= ymin {
            return Err(Error::InvalidData(format!(
                "degenerate window [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        Ok(Self {
            xmin,
            xmax,
            ymin,
            ymax,
        })
    }

    pub fn unit_square() -> Self {
        Self {
            xmin: 0.0,
            xmax: 1.0,
            ymin: 0.0,
            ymax: 1.0,
        }
    }

    pub fn xmin(&self) -> f64 {
        self.xmin
    }

    pub fn xmax(&self) -> f64 {
        self.xmax
    }

    pub fn ymin(&self) -> f64 {
        self.ymin
    }

    pub fn ymax(&self) -> f64 {
        self.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Membership in the closed rectangle; boundary points count as inside.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }
}

/// A spatial covariate sampled on a regular grid over a window.
///
/// Values are row-major with row 0 at the top of the window (maximum y),
/// matching the ASCII grid file layout. Cell (row, col) is centred at
/// `x = xmin + (col + 0.5) * cell_width`, `y = ymax - (row + 0.5) * cell_height`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterCovariate {
    window: Window,
    ncols: usize,
    nrows: usize,
    values: Vec<f64>,
}

impl RasterCovariate {
    pub fn new(window: Window, ncols: usize, nrows: usize, values: Vec<f64>) -> Result<Self> {
        if ncols == 0 || nrows == 0 {
            return Err(Error::InvalidData("raster dimensions must be positive".into()));
        }
        if values.len() != ncols * nrows {
            return Err(Error::InvalidData(format!(
                "raster expects {} values, got {}",
                ncols * nrows,
                values.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "raster cell {idx} is not finite"
            )));
        }
        Ok(Self {
            window,
            ncols,
            nrows,
            values,
        })
    }

    /// Build a raster by sampling a function at cell centres.
    pub fn from_fn(
        window: Window,
        ncols: usize,
        nrows: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(ncols * nrows);
        let cw = window.width() / ncols as f64;
        let ch = window.height() / nrows as f64;
        for row in 0..nrows {
            let y = window.ymax() - (row as f64 + 0.5) * ch;
            for col in 0..ncols {
                let x = window.xmin() + (col as f64 + 0.5) * cw;
                values.push(f(x, y));
            }
        }
        Self::new(window, ncols, nrows, values)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_width(&self) -> f64 {
        self.window.width() / self.ncols as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.window.height() / self.nrows as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_width() * self.cell_height()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Point {
        Point::new(
            self.window.xmin() + (col as f64 + 0.5) * self.cell_width(),
            self.window.ymax() - (row as f64 + 0.5) * self.cell_height(),
        )
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// New raster on the same grid with transformed values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.window,
            self.ncols,
            self.nrows,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Bilinear interpolation between the four surrounding cell centres.
    /// Within the half-cell margin next to the window boundary the value is
    /// clamped to the nearest cell centre (constant extrapolation).
    pub fn value_at(&self, p: Point) -> Result<f64> {
        if !self.window.contains(p) {
            return Err(Error::InvalidParameter(format!(
                "point ({}, {}) lies outside the window",
                p.x, p.y
            )));
        }
        Ok(self.value_at_unchecked(p))
    }

    #[inline]
    pub(crate) fn value_at_unchecked(&self, p: Point) -> f64 {
        let gx = (p.x - self.window.xmin()) / self.cell_width() - 0.5;
        let gy = (self.window.ymax() - p.y) / self.cell_height() - 0.5;
        let (c0, tx) = Self::split(gx, self.ncols);
        let (r0, ty) = Self::split(gy, self.nrows);
        let c1 = (c0 + 1).min(self.ncols - 1);
        let r1 = (r0 + 1).min(self.nrows - 1);
        let v00 = self.get(r0, c0);
        let v01 = self.get(r0, c1);
        let v10 = self.get(r1, c0);
        let v11 = self.get(r1, c1);
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v01) + ty * ((1.0 - tx) * v10 + tx * v11)
    }

    #[inline]
    fn split(g: f64, n: usize) -> (usize, f64) {
        if n == 1 || g <= 0.0 {
            return (0, 0.0);
        }
        let max = (n - 1) as f64;
        if g >= max {
            return (n - 2, 1.0);
        }
        let i = g.floor() as usize;
        (i.min(n - 2), g - g.floor())
    }
}

/// An observed point pattern together with its window and, optionally, the
/// covariate value at each event.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    points: Vec<Point>,
    window: Window,
    z_values: Option<Vec<f64>>,
}

impl PointPattern {
    pub fn new(points: Vec<Point>, window: Window) -> Result<Self> {
        let offenders: Vec<String> = points
            .iter()
            .enumerate()
            .filter(|(_, p)| !window.contains(**p) || !p.x.is_finite() || !p.y.is_finite())
            .map(|(i, p)| format!("#{i} ({}, {})", p.x, p.y))
            .collect();
        if !offenders.is_empty() {
            return Err(Error::InvalidData(format!(
                "{} point(s) outside the window: {}",
                offenders.len(),
                offenders.join(", ")
            )));
        }
        Ok(Self {
            points,
            window,
            z_values: None,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Covariate value at each event, from the cache when present.
    pub fn covariate_values(&self, raster: &RasterCovariate) -> Result<Vec<f64>> {
        if let Some(z) = &self.z_values {
            return Ok(z.clone());
        }
        self.points.iter().map(|&p| raster.value_at(p)).collect()
    }

    /// Attach cached covariate values evaluated on `raster`.
    pub fn with_covariates(mut self, raster: &RasterCovariate) -> Result<Self> {
        let z = self
            .points
            .iter()
            .map(|&p| raster.value_at(p))
            .collect::<Result<Vec<f64>>>()?;
        self.z_values = Some(z);
        Ok(self)
    }

    pub fn cached_covariates(&self) -> Option<&[f64]> {
        self.z_values.as_deref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn plane_raster(ncols: usize, nrows: usize) -> RasterCovariate {
        RasterCovariate::from_fn(Window::unit_square(), ncols, nrows, |x, y| x + y).unwrap()
    }

    #[test]
    fn window_validation() {
        assert!(Window::new(0.0, 1.0, 0.0, 1.0).is_ok());
        assert!(Window::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(Window::new(0.0, 1.0, 2.0, 1.0).is_err());
        assert_relative_eq!(Window::new(0.0, 2.0, 0.0, 3.0).unwrap().area(), 6.0);
    }

    #[test]
    fn raster_validation() {
        let w = Window::unit_square();
        assert!(RasterCovariate::new(w, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).is_ok());
        assert!(RasterCovariate::new(w, 2, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(RasterCovariate::new(w, 0, 2, vec![]).is_err());
        assert!(RasterCovariate::new(w, 2, 2, vec![1.0, f64::NAN, 3.0, 4.0]).is_err());
    }

    #[test]
    fn cell_geometry() {
        let r = plane_raster(4, 2);
        assert_relative_eq!(r.cell_width(), 0.25);
        assert_relative_eq!(r.cell_height(), 0.5);
        let c = r.cell_center(0, 0);
        assert_relative_eq!(c.x, 0.125);
        assert_relative_eq!(c.y, 0.75); // row 0 is the top row
    }

    #[test]
    fn eval_at_cell_center_is_identity() {
        let r = plane_raster(8, 8);
        for row in 0..8 {
            for col in 0..8 {
                let c = r.cell_center(row, col);
                assert_relative_eq!(r.value_at(c).unwrap(), r.get(row, col), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn eval_midpoint_of_adjacent_centers() {
        let w = Window::unit_square();
        let r = RasterCovariate::new(w, 2, 1, vec![1.0, 3.0]).unwrap();
        let v = r.value_at(Point::new(0.5, 0.5)).unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn eval_outside_window_is_error() {
        let r = plane_raster(4, 4);
        assert!(r.value_at(Point::new(1.2, 0.5)).is_err());
        assert!(r.value_at(Point::new(0.5, -0.01)).is_err());
        // boundary itself is inside (closed window)
        assert!(r.value_at(Point::new(1.0, 1.0)).is_ok());
    }

    #[test]
    fn margin_clamps_to_nearest_center() {
        let w = Window::unit_square();
        let r = RasterCovariate::new(w, 2, 1, vec![1.0, 3.0]).unwrap();
        // left half-cell margin: constant at the first centre value
        assert_relative_eq!(r.value_at(Point::new(0.0, 0.5)).unwrap(), 1.0);
        assert_relative_eq!(r.value_at(Point::new(0.2, 0.5)).unwrap(), 1.0);
        assert_relative_eq!(r.value_at(Point::new(1.0, 0.5)).unwrap(), 3.0);
    }

    proptest! {
        // bilinear interpolation is exact for affine functions away from the
        // clamped half-cell margins
        #[test]
        fn reproduces_affine_functions(
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
            c in -5.0f64..5.0,
            px in 0.11f64..0.89,
            py in 0.11f64..0.89,
        ) {
            let w = Window::unit_square();
            let r = RasterCovariate::from_fn(w, 10, 10, |x, y| a * x + b * y + c).unwrap();
            let got = r.value_at(Point::new(px, py)).unwrap();
            let want = a * px + b * py + c;
            prop_assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn plane_recovered_to_machine_precision() {
        let r = plane_raster(50, 50);
        for &(x, y) in &[(0.3, 0.7), (0.5, 0.5), (0.011, 0.989), (0.123456, 0.654321)] {
            assert_relative_eq!(r.value_at(Point::new(x, y)).unwrap(), x + y, epsilon = 1e-12);
        }
    }

    #[test]
    fn pattern_rejects_outside_points() {
        let w = Window::unit_square();
        let err = PointPattern::new(vec![Point::new(1.5, 0.5)], w).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("outside"), "{msg}");
        assert!(msg.contains("1.5"), "offender coordinates listed: {msg}");
    }

    #[test]
    fn pattern_accepts_boundary_and_empty() {
        let w = Window::unit_square();
        assert!(PointPattern::new(vec![Point::new(1.0, 0.0)], w).is_ok());
        let empty = PointPattern::new(vec![], w).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn covariate_cache_roundtrip() {
        let r = plane_raster(20, 20);
        let pat = PointPattern::new(vec![Point::new(0.25, 0.5)], Window::unit_square())
            .unwrap()
            .with_covariates(&r)
            .unwrap();
        let z = pat.covariate_values(&r).unwrap();
        assert_eq!(z.len(), 1);
        assert_relative_eq!(z[0], 0.75, epsilon = 1e-12);
        assert_eq!(pat.cached_covariates().unwrap().len(), 1);
    }
}
