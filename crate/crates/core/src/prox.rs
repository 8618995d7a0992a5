//! Closed-form minimizers for each block of the proximal ADMM iteration,
//! plus the variational characterization of the `l0` count.
//!
//! Conventions: `sign(0) = 0`; `h` and `x` are stacked `[gx; gy]` vectors of
//! length `2n` whose isotropic pairs are `(h[i], h[i + n])`.

use crate::image::clip_unit;
use crate::operators::{grad_adjoint_into, grad_into, LinearOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum TvNorm {
    /// `p = 1`, anisotropic.
    Anisotropic,
    /// `p = 2`, isotropic.
    Isotropic,
}

impl TvNorm {
    pub fn from_p(p: u8) -> Option<Self> {
        match p {
            1 => Some(TvNorm::Anisotropic),
            2 => Some(TvNorm::Isotropic),
            _ => None,
        }
    }

    pub fn p(self) -> u8 {
        match self {
            TvNorm::Anisotropic => 1,
            TvNorm::Isotropic => 2,
        }
    }
}

/// Shrinkage threshold `t = lambda / beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageParams {
    threshold: f64,
}

impl ShrinkageParams {
    pub fn new(threshold: f64) -> Option<Self> {
        (threshold >= 0.0 && threshold.is_finite()).then_some(Self { threshold })
    }

    pub fn from_penalty(lambda: f64, beta: f64) -> Option<Self> {
        Self::new(lambda / beta)
    }

    pub fn threshold(self) -> f64 {
        self.threshold
    }
}

#[inline]
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
pub fn soft_threshold(h: f64, t: f64) -> f64 {
    sign(h) * (h.abs() - t).max(0.0)
}

/// `||w||_0` and the unique minimizer `v* = 1 - sign(|w|)` of
/// `min <1, 1 - v>` over `0 <= v <= 1` with `v . |w| = 0`.
pub fn l0_mpec_oracle(w: &[f64]) -> (usize, Vec<f64>) {
    let v: Vec<f64> = w.iter().map(|&wi| 1.0 - sign(wi.abs())).collect();
    let count = w.iter().filter(|&&wi| wi != 0.0).count();
    (count, v)
}

/// Inputs to the `u` block. The multipliers and auxiliaries are the ones
/// from the previous iteration.
pub struct UBlock<'a> {
    pub rows: usize,
    pub cols: usize,
    pub u: &'a [f64],
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub xi: &'a [f64],
    pub zeta: &'a [f64],
    pub b: &'a [f64],
    pub op: &'a LinearOp,
    pub beta: f64,
    /// `L = mu + beta * ||grad||^2 + beta * ||K||^2` (bounds, not exact norms).
    pub lipschitz: f64,
}

/// Gradient of the smooth part of the `u` subproblem at `u^k`:
/// `grad^T xi + K^T zeta + beta grad^T (grad u - x) + beta K^T (K u - b - y)`.
pub fn u_block_gradient(blk: &UBlock<'_>) -> Vec<f64> {
    let (rows, cols) = (blk.rows, blk.cols);
    let n = rows * cols;
    let mut gu = vec![0.0; 2 * n];
    grad_into(blk.u, rows, cols, &mut gu);
    let dual_grad: Vec<f64> = gu
        .iter()
        .zip(blk.x)
        .zip(blk.xi)
        .map(|((g, x), xi)| xi + blk.beta * (g - x))
        .collect();
    let mut ku = vec![0.0; n];
    blk.op.apply_into(blk.u, rows, cols, &mut ku);
    let dual_fid: Vec<f64> = ku
        .iter()
        .zip(blk.b)
        .zip(blk.y)
        .zip(blk.zeta)
        .map(|(((k, b), y), z)| z + blk.beta * (k - b - y))
        .collect();
    let mut g = vec![0.0; n];
    grad_adjoint_into(&dual_grad, rows, cols, &mut g);
    let mut kt = vec![0.0; n];
    blk.op.apply_adjoint_into(&dual_fid, rows, cols, &mut kt);
    g.iter_mut().zip(&kt).for_each(|(a, b)| *a += b);
    g
}

/// `u^{k+1} = clip(u^k - g^k / L)`: the exact minimizer of the linearized
/// `u` subproblem, since its Hessian is `L * I`.
pub fn update_u(blk: &UBlock<'_>) -> Vec<f64> {
    let g = u_block_gradient(blk);
    blk.u
        .iter()
        .zip(&g)
        .map(|(u, g)| clip_unit(u - g / blk.lipschitz))
        .collect()
}

/// Minimizer over `[0,1]^n` of `1/2 sum s_i v_i^2 + <v, c>` with
/// `c = o . pi . |y| - 1 - mu v^k` and `s = beta o . y . y + mu`.
pub fn update_v(v: &[f64], y: &[f64], pi: &[f64], o: &[f64], beta: f64, mu: f64) -> Vec<f64> {
    v.iter()
        .zip(y)
        .zip(pi)
        .zip(o)
        .map(|(((&vk, &yi), &pii), &oi)| {
            let c = oi * pii * yi.abs() - 1.0 - mu * vk;
            let s = beta * oi * yi * yi + mu;
            clip_unit(-c / s)
        })
        .collect()
}

/// Proximal map of `t * ||.||_{p,1}`.
pub fn shrink_x(h: &[f64], params: ShrinkageParams, norm: TvNorm) -> Vec<f64> {
    let t = params.threshold();
    match norm {
        TvNorm::Anisotropic => h.iter().map(|&hi| soft_threshold(hi, t)).collect(),
        TvNorm::Isotropic => {
            let n = h.len() / 2;
            let mut out = h.to_vec();
            if t == 0.0 {
                return out;
            }
            for i in 0..n {
                let norm = h[i].hypot(h[i + n]);
                let scale = if norm == 0.0 {
                    0.0
                } else {
                    (1.0 - t / norm).max(0.0)
                };
                out[i] = scale * h[i];
                out[i + n] = scale * h[i + n];
            }
            out
        }
    }
}

/// Minimizer of `beta/2 (y - q)^2 + beta/2 (w |y| + pi/beta)^2`, per entry:
/// `sign(q) max(0, (|q| - pi w / beta) / (1 + w^2))`.
///
/// Requires `pi >= 0`, which the multiplier ascent preserves.
pub fn update_y(q: &[f64], w: &[f64], pi: &[f64], beta: f64) -> Vec<f64> {
    q.iter()
        .zip(w)
        .zip(pi)
        .map(|((&qi, &wi), &pii)| {
            sign(qi) * ((qi.abs() - pii * wi / beta) / (1.0 + wi * wi)).max(0.0)
        })
        .collect()
}

/// Proximal map of `||.||_1 / beta`, the `y` block of the `l1` baseline.
pub fn update_y_l1(q: &[f64], beta: f64) -> Vec<f64> {
    q.iter().map(|&qi| soft_threshold(qi, 1.0 / beta)).collect()
}
