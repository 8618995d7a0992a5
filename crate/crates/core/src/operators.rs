//! Discrete gradient and divergence, the blur operator `K`, and kernel
//! generators.
//!
//! The gradient uses forward differences with a replicate (Neumann)
//! boundary, so the last difference along each axis is zero. `div` is the
//! exact negative adjoint of `grad`. Convolution is periodic and evaluated
//! directly in the spatial domain, which makes its adjoint exactly the
//! correlation with the same stencil.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// Certified bound on `||grad||^2` for the Neumann forward-difference pair.
pub const GRAD_SQ_NORM_BOUND: f64 = 8.0;
/// Looser bound from the triangle inequality, `(||Dx|| + ||Dy||)^2 <= 16`.
pub const GRAD_SQ_NORM_BOUND_LOOSE: f64 = 16.0;

/// `[gx; gy]` stacked into one vector of length `2 * rows * cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GradientField {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 2 * rows * cols {
            return Err(Error::ShapeMismatch {
                expected_rows: 2 * rows * cols,
                expected_cols: 1,
                rows: data.len(),
                cols: 1,
            });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; 2 * rows * cols],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn gx(&self) -> &[f64] {
        &self.data[..self.rows * self.cols]
    }

    pub fn gy(&self) -> &[f64] {
        &self.data[self.rows * self.cols..]
    }

    pub fn stacked(&self) -> &[f64] {
        &self.data
    }

    pub fn into_stacked(self) -> Vec<f64> {
        self.data
    }
}

/// Forward differences of a column-stacked `rows x cols` vector into `out`
/// (length `2 * rows * cols`).
pub fn grad_into(u: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    let n = rows * cols;
    debug_assert_eq!(u.len(), n);
    debug_assert_eq!(out.len(), 2 * n);
    let (gx, gy) = out.split_at_mut(n);
    for c in 0..cols {
        let base = c * rows;
        if c + 1 < cols {
            for r in 0..rows {
                gx[base + r] = u[base + rows + r] - u[base + r];
            }
        } else {
            gx[base..base + rows].fill(0.0);
        }
        for r in 0..rows - 1 {
            gy[base + r] = u[base + r + 1] - u[base + r];
        }
        gy[base + rows - 1] = 0.0;
    }
}

/// Divergence of a stacked field into `out`; satisfies
/// `<f, grad u> = -<div f, u>`.
pub fn div_into(f: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    let n = rows * cols;
    debug_assert_eq!(f.len(), 2 * n);
    debug_assert_eq!(out.len(), n);
    let (px, py) = f.split_at(n);
    for c in 0..cols {
        let base = c * rows;
        for r in 0..rows {
            let i = base + r;
            let mut d = 0.0;
            if c + 1 < cols {
                d += px[i];
            }
            if c > 0 {
                d -= px[i - rows];
            }
            if r + 1 < rows {
                d += py[i];
            }
            if r > 0 {
                d -= py[i - 1];
            }
            out[i] = d;
        }
    }
}

/// `grad^T f = -div f`, written into `out`.
pub fn grad_adjoint_into(f: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    div_into(f, rows, cols, out);
    out.iter_mut().for_each(|v| *v = -*v);
}

pub fn grad(u: &ImageGrid) -> GradientField {
    let (rows, cols) = u.shape();
    let mut data = vec![0.0; 2 * rows * cols];
    grad_into(u.data(), rows, cols, &mut data);
    GradientField { rows, cols, data }
}

pub fn div(f: &GradientField) -> Vec<f64> {
    let mut out = vec![0.0; f.rows * f.cols];
    div_into(&f.data, f.rows, f.cols, &mut out);
    out
}

pub fn grad_adjoint(f: &GradientField) -> Vec<f64> {
    let mut out = vec![0.0; f.rows * f.cols];
    grad_adjoint_into(&f.data, f.rows, f.cols, &mut out);
    out
}

/// A small odd-sized 2D stencil stored row-major, centered at
/// `(rows / 2, cols / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows % 2 == 0 || cols % 2 == 0 {
            return Err(Error::InvalidKernel(format!(
                "stencil must be odd-sized, got {rows}x{cols}"
            )));
        }
        if weights.len() != rows * cols {
            return Err(Error::InvalidKernel(format!(
                "expected {} weights, got {}",
                rows * cols,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidKernel("non-finite weight".into()));
        }
        Ok(Self {
            rows,
            cols,
            weights,
        })
    }

    pub fn delta() -> Self {
        Self {
            rows: 1,
            cols: 1,
            weights: vec![1.0],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Weight at offset `(dy, dx)` from the center.
    pub fn at(&self, dy: isize, dx: isize) -> f64 {
        let r = (dy + (self.rows / 2) as isize) as usize;
        let c = (dx + (self.cols / 2) as isize) as usize;
        self.weights[r * self.cols + c]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Compensated (Neumaier) sum of the weights.
    pub fn sum(&self) -> f64 {
        let (mut s, mut comp) = (0.0f64, 0.0f64);
        for &w in &self.weights {
            let t = s + w;
            comp += if s.abs() >= w.abs() { (s - t) + w } else { (w - t) + s };
            s = t;
        }
        s + comp
    }

    pub fn l1_norm(&self) -> f64 {
        let abs = Kernel {
            rows: self.rows,
            cols: self.cols,
            weights: self.weights.iter().map(|w| w.abs()).collect(),
        };
        abs.sum()
    }

    pub fn is_normalized_nonnegative(&self) -> bool {
        self.weights.iter().all(|&w| w >= 0.0) && (self.sum() - 1.0).abs() <= 1e-12
    }

    /// Parses rows of whitespace-separated decimals. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| Error::InvalidKernel(format!("bad number {tok:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidKernel("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Inverse of [`Kernel::parse`]; values use the shortest repr that
    /// round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for row in self.weights.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|w| format!("{w:?}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Uniform disc of radius `r` on a `(2r+1) x (2r+1)` grid: cells with
/// `dx^2 + dy^2 <= r^2` get equal weight summing to one.
pub fn disc_kernel(radius: usize) -> Result<Kernel> {
    if radius == 0 {
        return Err(Error::InvalidParameter("disc radius must be >= 1".into()));
    }
    let r = radius as isize;
    let size = 2 * radius + 1;
    let inside: Vec<bool> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| dx * dx + dy * dy <= r * r))
        .collect();
    let count = inside.iter().filter(|&&b| b).count() as f64;
    let weights = inside
        .iter()
        .map(|&b| if b { 1.0 / count } else { 0.0 })
        .collect();
    Kernel::new(size, size, weights)
}

/// Sampled isotropic Gaussian on a `size x size` grid, normalized to sum 1.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Kernel> {
    if size % 2 == 0 {
        return Err(Error::InvalidKernel(format!("size must be odd, got {size}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let h = (size / 2) as isize;
    let raw: Vec<f64> = (-h..=h)
        .flat_map(|dy| {
            (-h..=h).map(move |dx| (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp())
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Kernel::new(size, size, raw.into_iter().map(|w| w / total).collect())
}

/// The linear observation operator `K`.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearOp {
    Identity,
    PeriodicConvolution(Kernel),
}

impl LinearOp {
    pub fn convolution(kernel: Kernel) -> Self {
        LinearOp::PeriodicConvolution(kernel)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, LinearOp::Identity)
    }

    /// Fails when the stencil does not fit inside a `rows x cols` image.
    pub fn check_fits(&self, rows: usize, cols: usize) -> Result<()> {
        if let LinearOp::PeriodicConvolution(k) = self {
            let (kr, kc) = k.shape();
            if kr > rows || kc > cols {
                return Err(Error::KernelTooLarge {
                    kernel_rows: kr,
                    kernel_cols: kc,
                    rows,
                    cols,
                });
            }
        }
        Ok(())
    }

    /// Upper bound on `||K||^2`. For a convolution, Young's inequality gives
    /// `||K|| <= ||k||_1`, which is 1 for a normalized nonnegative kernel.
    pub fn sq_norm_bound(&self) -> f64 {
        match self {
            LinearOp::Identity => 1.0,
            LinearOp::PeriodicConvolution(k) if k.is_normalized_nonnegative() => 1.0,
            LinearOp::PeriodicConvolution(k) => k.l1_norm().powi(2) * (1.0 + 1e-12),
        }
    }

    pub fn apply_into(&self, u: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
        match self {
            LinearOp::Identity => out.copy_from_slice(u),
            LinearOp::PeriodicConvolution(k) => periodic_correlate(k, u, rows, cols, out, -1),
        }
    }

    pub fn apply_adjoint_into(&self, w: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
        match self {
            LinearOp::Identity => out.copy_from_slice(w),
            LinearOp::PeriodicConvolution(k) => periodic_correlate(k, w, rows, cols, out, 1),
        }
    }

    pub fn apply(&self, u: &ImageGrid) -> Result<Vec<f64>> {
        let (rows, cols) = u.shape();
        self.check_fits(rows, cols)?;
        let mut out = vec![0.0; rows * cols];
        self.apply_into(u.data(), rows, cols, &mut out);
        Ok(out)
    }

    pub fn apply_adjoint(&self, w: &ImageGrid) -> Result<Vec<f64>> {
        let (rows, cols) = w.shape();
        self.check_fits(rows, cols)?;
        let mut out = vec![0.0; rows * cols];
        self.apply_adjoint_into(w.data(), rows, cols, &mut out);
        Ok(out)
    }
}

/// `out[i, j] = sum_k k[dy, dx] * u[i + sign*dy, j + sign*dx]` with periodic
/// wrap. `sign = -1` is convolution, `sign = 1` its adjoint.
fn periodic_correlate(
    k: &Kernel,
    u: &[f64],
    rows: usize,
    cols: usize,
    out: &mut [f64],
    sign: isize,
) {
    out.fill(0.0);
    let (kr, kc) = k.shape();
    let (hr, hc) = ((kr / 2) as isize, (kc / 2) as isize);
    let (m, n) = (rows as isize, cols as isize);
    for dy in -hr..=hr {
        let shift_r = (sign * dy).rem_euclid(m) as usize;
        for dx in -hc..=hc {
            let w = k.at(dy, dx);
            if w == 0.0 {
                continue;
            }
            let shift_c = (sign * dx).rem_euclid(n) as usize;
            for c in 0..cols {
                let src_c = (c + shift_c) % cols;
                let dst = &mut out[c * rows..(c + 1) * rows];
                let src = &u[src_c * rows..(src_c + 1) * rows];
                let split = rows - shift_r;
                for (o, s) in dst[..split].iter_mut().zip(&src[shift_r..]) {
                    *o += w * s;
                }
                for (o, s) in dst[split..].iter_mut().zip(&src[..shift_r]) {
                    *o += w * s;
                }
            }
        }
    }
}

/// Certified bound on `||grad||^2` used to build the proximal constant.
pub fn grad_sq_norm_bound() -> f64 {
    GRAD_SQ_NORM_BOUND
}

pub fn op_sq_norm_bound(op: &LinearOp) -> f64 {
    op.sq_norm_bound()
}

fn deterministic_start(n: usize) -> Vec<f64> {
    // xorshift so the estimate is reproducible and not aligned with any
    // eigenvector
    let mut s: u64 = 0x9E37_79B9_7F4A_7C15;
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

fn power_iteration<F>(n: usize, iters: usize, mut apply_normal: F) -> f64
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut x = deterministic_start(n);
    let mut y = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..iters {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        apply_normal(&x, &mut y);
        estimate = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        std::mem::swap(&mut x, &mut y);
    }
    estimate
}

/// Power-iteration estimate of `||grad||^2` on a `rows x cols` grid. The
/// Rayleigh quotient never exceeds the true value.
pub fn estimate_grad_sq_norm(rows: usize, cols: usize, iters: usize) -> f64 {
    let n = rows * cols;
    let mut g = vec![0.0; 2 * n];
    power_iteration(n, iters, |x, y| {
        grad_into(x, rows, cols, &mut g);
        grad_adjoint_into(&g, rows, cols, y);
    })
}

/// Power-iteration estimate of `||K||^2` on a `rows x cols` grid.
pub fn estimate_op_sq_norm(op: &LinearOp, rows: usize, cols: usize, iters: usize) -> Result<f64> {
    op.check_fits(rows, cols)?;
    let n = rows * cols;
    let mut t = vec![0.0; n];
    Ok(power_iteration(n, iters, |x, y| {
        op.apply_into(x, rows, cols, &mut t);
        op.apply_adjoint_into(&t, rows, cols, y);
    }))
}
