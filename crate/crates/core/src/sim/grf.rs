//! Stationary Gaussian random fields on the unit square with exponential
//! covariance `C(r) = sigma² exp(-r/s)`, sampled by circulant embedding on a
//! padded torus (dense Cholesky as a fallback for small grids).

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geom::{RasterCovariate, Window};
use crate::numeric::mix_seed;

/// Field specification: standard deviation `sigma`, correlation range
/// `range_s`, grid dimensions, and a base seed. Realisation `i` of a spec is
/// fully determined by `(seed, i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrfSpec {
    pub sigma: f64,
    pub range_s: f64,
    pub ncols: usize,
    pub nrows: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrfMethod {
    /// Embed the covariance on a torus `pad` times the grid size per axis.
    CirculantEmbedding { pad: usize },
    /// Dense factorisation of the full covariance matrix; quadratic memory,
    /// only sensible for grids up to 128 x 128.
    DenseCholesky,
}

impl GrfSpec {
    pub fn new(sigma: f64, range_s: f64, ncols: usize, nrows: usize, seed: u64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if !(range_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "correlation range must be positive, got {range_s}"
            )));
        }
        if ncols == 0 || nrows == 0 {
            return Err(Error::InvalidParameter("grid dimensions must be positive".into()));
        }
        if ncols > 512 || nrows > 512 {
            return Err(Error::InvalidParameter(
                "grids beyond 512 x 512 are not supported".into(),
            ));
        }
        Ok(Self {
            sigma,
            range_s,
            ncols,
            nrows,
            seed,
        })
    }

    /// Draw realisation `index` with the default doubled-grid embedding.
    pub fn realize(&self, index: u64) -> Result<RasterCovariate> {
        self.realize_with(index, GrfMethod::CirculantEmbedding { pad: 2 })
    }

    pub fn realize_with(&self, index: u64, method: GrfMethod) -> Result<RasterCovariate> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, &[0x67726600, index]));
        let values = match method {
            GrfMethod::CirculantEmbedding { pad } => self.sample_embedding(pad, &mut rng)?,
            GrfMethod::DenseCholesky => self.sample_cholesky(&mut rng)?,
        };
        RasterCovariate::new(Window::unit_square(), self.ncols, self.nrows, values)
    }

    fn covariance(&self, dx: f64, dy: f64) -> f64 {
        self.sigma * self.sigma * (-(dx.hypot(dy)) / self.range_s).exp()
    }

    fn sample_embedding(&self, pad: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        if pad < 2 {
            return Err(Error::InvalidParameter("embedding padding must be >= 2".into()));
        }
        let p = pad * self.nrows;
        let q = pad * self.ncols;
        let cell_w = 1.0 / self.ncols as f64;
        let cell_h = 1.0 / self.nrows as f64;

        // base of the block circulant: covariances at torus lags
        let mut base: Vec<Complex<f64>> = Vec::with_capacity(p * q);
        for row in 0..p {
            let dy = row.min(p - row) as f64 * cell_h;
            for col in 0..q {
                let dx = col.min(q - col) as f64 * cell_w;
                base.push(Complex::new(self.covariance(dx, dy), 0.0));
            }
        }
        fft2(&mut base, p, q, false);

        let max_eig = base.iter().map(|c| c.re).fold(0.0f64, f64::max);
        let min_eig = base.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min_eig < -1e-9 * max_eig {
            return Err(Error::Numeric(format!(
                "circulant embedding is not positive semidefinite (min eigenvalue {min_eig:.3e}); \
                 increase the padding factor"
            )));
        }

        let scale = 1.0 / ((p * q) as f64).sqrt();
        let mut spectrum: Vec<Complex<f64>> = base
            .iter()
            .map(|c| {
                let lam = c.re.max(0.0).sqrt();
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex::new(lam * re, lam * im)
            })
            .collect();
        fft2(&mut spectrum, p, q, true);

        let mut out = Vec::with_capacity(self.nrows * self.ncols);
        for row in 0..self.nrows {
            for col in 0..self.ncols {
                out.push(spectrum[row * q + col].re * scale);
            }
        }
        Ok(out)
    }

    fn sample_cholesky(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let n = self.nrows * self.ncols;
        if self.nrows > 128 || self.ncols > 128 {
            return Err(Error::InvalidParameter(
                "dense Cholesky fallback is limited to grids up to 128 x 128".into(),
            ));
        }
        let cell_w = 1.0 / self.ncols as f64;
        let cell_h = 1.0 / self.nrows as f64;
        let pos = |i: usize| {
            let row = i / self.ncols;
            let col = i % self.ncols;
            (col as f64 * cell_w, row as f64 * cell_h)
        };
        let jitter = 1e-10 * self.sigma * self.sigma;
        let cov = DMatrix::from_fn(n, n, |i, j| {
            let (xi, yi) = pos(i);
            let (xj, yj) = pos(j);
            self.covariance(xi - xj, yi - yj) + if i == j { jitter } else { 0.0 }
        });
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::Numeric("covariance matrix is not positive definite".into()))?;
        let eps = DMatrix::from_fn(n, 1, |_, _| StandardNormal.sample(rng));
        let field = chol.l() * eps;
        Ok(field.column(0).iter().cloned().collect())
    }
}

/// In-place 2-D FFT (unnormalised), rows then columns.
fn fft2(buf: &mut [Complex<f64>], nrows: usize, ncols: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(ncols)
    } else {
        planner.plan_fft_forward(ncols)
    };
    for row in 0..nrows {
        row_fft.process(&mut buf[row * ncols..(row + 1) * ncols]);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(nrows)
    } else {
        planner.plan_fft_forward(nrows)
    };
    let mut col = vec![Complex::default(); nrows];
    for c in 0..ncols {
        for r in 0..nrows {
            col[r] = buf[r * ncols + c];
        }
        col_fft.process(&mut col);
        for r in 0..nrows {
            buf[r * ncols + c] = col[r];
        }
    }
}
