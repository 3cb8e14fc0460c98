//! Shared numerical utilities: quadrature, grid interpolation, finite
//! differences, summary statistics and seed derivation.

use crate::error::{Error, Result};

/// Composite Simpson integral of regularly spaced samples.
///
/// An even sample count leaves a dangling panel; it is handled with a
/// trapezoid correction on the last interval.
pub fn simpson(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * dx * (values[0] + values[1]),
        _ => {
            let (core, tail) = if n % 2 == 1 {
                (values, None)
            } else {
                (&values[..n - 1], Some((values[n - 2], values[n - 1])))
            };
            let mut acc = KahanSum::new();
            acc.add(core[0]);
            acc.add(core[core.len() - 1]);
            for (i, &v) in core.iter().enumerate().skip(1).take(core.len() - 2) {
                acc.add(if i % 2 == 1 { 4.0 * v } else { 2.0 * v });
            }
            let mut total = acc.value() * dx / 3.0;
            if let Some((a, b)) = tail {
                total += 0.5 * dx * (a + b);
            }
            total
        }
    }
}

/// Cumulative trapezoid integral; output has the same length, starting at 0.
pub fn cumtrapz(values: &[f64], dx: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = KahanSum::new();
    out.push(0.0);
    for w in values.windows(2) {
        acc.add(0.5 * dx * (w[0] + w[1]));
        out.push(acc.value());
    }
    out
}

/// Kahan compensated accumulator for long Monte Carlo reductions.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut acc = KahanSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value() / xs.len() as f64
}

/// Sample standard deviation (n-1 denominator).
pub fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let mut acc = KahanSum::new();
    for &x in xs {
        acc.add((x - m) * (x - m));
    }
    (acc.value() / (n - 1) as f64).sqrt()
}

/// Linear-interpolation quantile on a sorted slice (R type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let t = pos - lo as f64;
            sorted[lo] * (1.0 - t) + sorted[hi] * t
        }
    }
}

/// Silverman's rule-of-thumb bandwidth on raw values:
/// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InvalidData(
            "bandwidth rule needs at least two values".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let sd = sample_sd(values);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = sd.min(iqr / 1.34);
    if !(spread > 0.0) {
        return Err(Error::InvalidData("zero spread in values".into()));
    }
    Ok(0.9 * spread * (values.len() as f64).powf(-0.2))
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (n - 1) as f64;
            (0..n).map(|i| a + i as f64 * step).collect()
        }
    }
}

/// `n` log-spaced points from `a` to `b` (both positive).
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}

/// Behaviour of grid interpolation outside the grid range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutOfRange {
    Zero,
    Clamp,
}

/// Linear interpolation of `vals` sampled on the uniform grid starting at
/// `z0` with spacing `dz`.
pub fn interp_uniform(z0: f64, dz: f64, vals: &[f64], z: f64, oob: OutOfRange) -> f64 {
    let n = vals.len();
    if n == 0 {
        return 0.0;
    }
    if n == 1 {
        return match oob {
            OutOfRange::Clamp => vals[0],
            OutOfRange::Zero => {
                if z == z0 {
                    vals[0]
                } else {
                    0.0
                }
            }
        };
    }
    let t = (z - z0) / dz;
    if t < 0.0 || t > (n - 1) as f64 {
        return match oob {
            OutOfRange::Zero => 0.0,
            OutOfRange::Clamp => {
                if t < 0.0 {
                    vals[0]
                } else {
                    vals[n - 1]
                }
            }
        };
    }
    let i = (t.floor() as usize).min(n - 2);
    let frac = t - i as f64;
    vals[i] * (1.0 - frac) + vals[i + 1] * frac
}

/// Central-difference first derivative on a uniform grid (one-sided at ends).
pub fn gradient_uniform(vals: &[f64], dx: f64) -> Vec<f64> {
    let n = vals.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut out = vec![0.0; n];
    out[0] = (vals[1] - vals[0]) / dx;
    out[n - 1] = (vals[n - 1] - vals[n - 2]) / dx;
    for i in 1..n - 1 {
        out[i] = (vals[i + 1] - vals[i - 1]) / (2.0 * dx);
    }
    out
}

/// Three-point-stencil second derivative on a uniform grid (zero at ends).
pub fn second_derivative_uniform(vals: &[f64], dx: f64) -> Vec<f64> {
    let n = vals.len();
    let mut out = vec![0.0; n];
    for i in 1..n.saturating_sub(1) {
        out[i] = (vals[i + 1] - 2.0 * vals[i] + vals[i - 1]) / (dx * dx);
    }
    out
}

/// Index of the smallest finite value, or `None` when every entry is
/// non-finite.
pub fn argmin(xs: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in xs.iter().enumerate() {
        if x.is_finite() && best.map_or(true, |(_, b)| x < b) {
            best = Some((i, x));
        }
    }
    best.map(|(i, _)| i)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and a tag path. Used to give every
/// replicate / subsystem an independent, reproducible RNG stream.
pub fn mix_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(base);
    for &t in tags {
        state = splitmix64(state ^ t.wrapping_mul(0xA24B_AED4_963E_E407));
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_exact_on_cubics() {
        // Simpson integrates cubics exactly on odd grids.
        let n = 101;
        let xs = linspace(0.0, 2.0, n);
        let dx = xs[1] - xs[0];
        let vals: Vec<f64> = xs.iter().map(|&x| 3.0 * x * x * x - x + 2.0).collect();
        // analytic: 3/4 x^4 - x^2/2 + 2x on [0,2] = 12 - 2 + 4 = 14
        assert_relative_eq!(simpson(&vals, dx), 14.0, epsilon = 1e-10);
    }

    #[test]
    fn simpson_even_count_trapezoid_tail() {
        let n = 100;
        let xs = linspace(0.0, 1.0, n);
        let dx = xs[1] - xs[0];
        let vals: Vec<f64> = xs.iter().map(|&x| x * x).collect();
        assert_relative_eq!(simpson(&vals, dx), 1.0 / 3.0, epsilon = 1e-4);
    }

    #[test]
    fn simpson_degenerate_lengths() {
        assert_eq!(simpson(&[], 0.1), 0.0);
        assert_eq!(simpson(&[5.0], 0.1), 0.0);
        assert_relative_eq!(simpson(&[1.0, 3.0], 0.5), 1.0);
    }

    #[test]
    fn cumtrapz_matches_analytic() {
        let xs = linspace(0.0, 1.0, 1001);
        let dx = xs[1] - xs[0];
        let vals: Vec<f64> = xs.iter().map(|&x| 2.0 * x).collect();
        let cum = cumtrapz(&vals, dx);
        assert_relative_eq!(cum[1000], 1.0, epsilon = 1e-12);
        assert_relative_eq!(cum[500], 0.25, epsilon = 1e-6);
    }

    #[test]
    fn kahan_handles_small_increments() {
        let mut acc = KahanSum::new();
        acc.add(1.0);
        for _ in 0..10_000_000 {
            acc.add(1e-16);
        }
        assert_relative_eq!(acc.value(), 1.0 + 1e-9, epsilon = 1e-12);
    }

    #[test]
    fn quantiles_type7() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_relative_eq!(quantile_sorted(&sorted, 0.5), 2.5);
        assert_relative_eq!(quantile_sorted(&sorted, 0.25), 1.75);
        assert_relative_eq!(quantile_sorted(&sorted, 0.0), 1.0);
        assert_relative_eq!(quantile_sorted(&sorted, 1.0), 4.0);
    }

    #[test]
    fn silverman_closed_form() {
        // sd = 1 forced by construction below with IQR/1.34 > 1
        let step = (99.0f64 / 83325.0).sqrt(); // sum (i - 49.5)^2 = 83325
        let values: Vec<f64> = (0..100).map(|i| (i as f64 - 49.5) * step).collect();
        let sd = sample_sd(&values);
        assert_relative_eq!(sd, 1.0, epsilon = 1e-12);
        let h = silverman_bandwidth(&values).unwrap();
        // IQR of the uniform-spaced sample: 50 * step = 1.7320.. > 1.34
        assert_relative_eq!(h, 0.9 * 100f64.powf(-0.2), epsilon = 1e-12);
    }

    #[test]
    fn silverman_rejects_degenerate() {
        assert!(silverman_bandwidth(&[1.0]).is_err());
        assert!(silverman_bandwidth(&[2.0, 2.0, 2.0]).is_err());
    }

    #[test]
    fn interp_policies() {
        let vals = [1.0, 2.0];
        assert_relative_eq!(interp_uniform(0.0, 1.0, &vals, 0.5, OutOfRange::Zero), 1.5);
        assert_eq!(interp_uniform(0.0, 1.0, &vals, -0.1, OutOfRange::Zero), 0.0);
        assert_eq!(interp_uniform(0.0, 1.0, &vals, 2.0, OutOfRange::Clamp), 2.0);
        assert_eq!(interp_uniform(0.0, 1.0, &vals, -5.0, OutOfRange::Clamp), 1.0);
    }

    #[test]
    fn derivatives_on_quadratic() {
        let xs = linspace(0.0, 1.0, 51);
        let dx = xs[1] - xs[0];
        let vals: Vec<f64> = xs.iter().map(|&x| x * x).collect();
        let d1 = gradient_uniform(&vals, dx);
        let d2 = second_derivative_uniform(&vals, dx);
        assert_relative_eq!(d1[25], 1.0, epsilon = 1e-10);
        assert_relative_eq!(d2[25], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn argmin_skips_nonfinite() {
        assert_eq!(argmin(&[f64::NAN, 3.0, 1.0, 2.0]), Some(2));
        assert_eq!(argmin(&[f64::NAN, f64::INFINITY]), None);
        assert_eq!(argmin(&[f64::NAN]), None);
    }

    #[test]
    fn mix_seed_distinguishes_paths() {
        let a = mix_seed(7, &[1, 2]);
        let b = mix_seed(7, &[2, 1]);
        let c = mix_seed(8, &[1, 2]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, mix_seed(7, &[1, 2]));
    }
}
