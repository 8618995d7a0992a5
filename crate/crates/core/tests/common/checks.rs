//! Oracle comparisons shared by the module tests and the acceptance target.
//! Each check returns the worst error it saw so callers can report it.

use l0tv_core::operators::{estimate_grad_sq_norm, grad_adjoint_into, grad_into};
use l0tv_core::prox::{update_y_l1, UBlock};
use l0tv_core::{
    div, grad, l0_mpec_oracle, shrink_x, update_u, update_v, update_y, GradientField, ImageGrid,
    Kernel, LinearOp, ShrinkageParams, TvNorm,
};

use super::*;

fn random_kernel(rng: &mut Lcg, size: usize) -> Kernel {
    let w = rng.vec(size * size, -0.5, 1.0);
    Kernel::new(size, size, w).unwrap()
}

fn dense_op(op: &LinearOp, m: usize, n: usize) -> Dense {
    match op {
        LinearOp::Identity => Dense::identity(m * n),
        LinearOp::PeriodicConvolution(k) => dense_convolution(k, m, n),
    }
}

/// `update_u` against the box QP assembled from dense `grad` and `K`:
/// the augmented Lagrangian in `u` plus `1/2 ||u - u^k||_D^2` with
/// `D = L I - beta (G^T G + K^T K)`.
pub fn u_update_error(instances: usize, seed: u64) -> f64 {
    let mut rng = Lcg::new(seed);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let (m, n) = if i % 3 == 0 {
            (1 + rng.below(4) as usize, 1 + rng.below(4) as usize)
        } else {
            (3 + rng.below(2) as usize, 3 + rng.below(2) as usize)
        };
        let op = if i % 3 == 0 {
            LinearOp::Identity
        } else {
            LinearOp::convolution(random_kernel(&mut rng, 3))
        };
        let np = m * n;
        let u0 = rng.vec(np, 0.0, 1.0);
        let x = rng.vec(2 * np, -1.0, 1.0);
        let xi = rng.vec(2 * np, -2.0, 2.0);
        let y = rng.vec(np, -1.0, 1.0);
        let zeta = rng.vec(np, -2.0, 2.0);
        let b = rng.vec(np, 0.0, 1.0);
        let beta = 10f64.powf(rng.range(-1.0, 2.0));
        let mu = rng.range(0.01, 1.0);
        let lipschitz = mu + beta * 8.0 + beta * op.sq_norm_bound();

        let g = dense_gradient(m, n);
        let k = dense_op(&op, m, n);
        let (gg, kk) = (g.gram(), k.gram());
        let mut d = Dense::identity(np);
        d.a.iter_mut().for_each(|v| *v *= lipschitz);
        let mut h = Dense::zeros(np, np);
        for j in 0..np * np {
            d.a[j] -= beta * (gg.a[j] + kk.a[j]);
            h.a[j] = beta * (gg.a[j] + kk.a[j]) + d.a[j];
        }
        // linear term: G^T (xi - beta x) + K^T (zeta - beta (b + y)) - D u^k
        let gx: Vec<f64> = xi.iter().zip(&x).map(|(p, x)| p - beta * x).collect();
        let kz: Vec<f64> = zeta
            .iter()
            .zip(&b)
            .zip(&y)
            .map(|((z, b), y)| z - beta * (b + y))
            .collect();
        let du = d.mul_vec(&u0);
        let c: Vec<f64> = g
            .t_mul_vec(&gx)
            .iter()
            .zip(k.t_mul_vec(&kz))
            .zip(&du)
            .map(|((a, b), d)| a + b - d)
            .collect();
        let want = box_qp_coordinate_descent(&h, &c, &u0);

        let got = update_u(&UBlock {
            rows: m,
            cols: n,
            u: &u0,
            x: &x,
            y: &y,
            xi: &xi,
            zeta: &zeta,
            b: &b,
            op: &op,
            beta,
            lipschitz,
        });
        worst = worst.max(max_abs_diff(&got, &want));
    }
    worst
}

/// `update_v` against per-pixel golden search on
/// `(1 - v) + pi o v |y| + beta/2 (o v |y|)^2 + mu/2 (v - v^k)^2` over `[0, 1]`.
pub fn v_update_error(instances: usize, seed: u64) -> f64 {
    let mut rng = Lcg::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = 1 + rng.below(6) as usize;
        let vk = rng.vec(n, 0.0, 1.0);
        let y = rng.vec(n, -1.5, 1.5);
        let pi = rng.vec(n, 0.0, 5.0);
        let o: Vec<f64> = (0..n).map(|_| rng.below(4).min(1) as f64).collect();
        let beta = 10f64.powf(rng.range(-1.0, 2.0));
        let mu = rng.range(0.01, 1.0);
        let got = update_v(&vk, &y, &pi, &o, beta, mu);
        for i in 0..n {
            let f = |v: f64| {
                let r = o[i] * v * y[i].abs();
                (1.0 - v) + pi[i] * r + 0.5 * beta * r * r + 0.5 * mu * (v - vk[i]).powi(2)
            };
            worst = worst.max((got[i] - golden_min(f, 0.0, 1.0)).abs());
        }
    }
    worst
}

/// Anisotropic shrinkage against golden search on `t |x| + 1/2 (x - h)^2`.
pub fn shrink_l1_error(instances: usize, seed: u64) -> f64 {
    let mut rng = Lcg::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = 1 + rng.below(4) as usize;
        let h = rng.vec(2 * n, -3.0, 3.0);
        let t = rng.range(0.0, 2.0);
        let got = shrink_x(&h, ShrinkageParams::new(t).unwrap(), TvNorm::Anisotropic);
        for (g, &hi) in got.iter().zip(&h) {
            let f = |x: f64| t * x.abs() + 0.5 * (x - hi).powi(2);
            worst = worst.max((g - golden_min(f, -4.0, 4.0)).abs());
        }
    }
    worst
}

/// Isotropic shrinkage against a 2-D nested search on
/// `t ||(a, b)||_2 + 1/2 ||(a, b) - (h1, h2)||^2`.
pub fn shrink_l2_error(instances: usize, seed: u64) -> f64 {
    let mut rng = Lcg::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = 1 + rng.below(3) as usize;
        let h = rng.vec(2 * n, -3.0, 3.0);
        let t = rng.range(0.0, 2.0);
        let got = shrink_x(&h, ShrinkageParams::new(t).unwrap(), TvNorm::Isotropic);
        for i in 0..n {
            let f = |a: f64, b: f64| {
                t * a.hypot(b) + 0.5 * ((a - h[i]).powi(2) + (b - h[i + n]).powi(2))
            };
            let (a, b) = nested_min(f, -4.0, 4.0);
            worst = worst.max((got[i] - a).abs()).max((got[i + n] - b).abs());
        }
    }
    worst
}

/// `update_y` against grid-then-golden search on the subproblem written as
/// `beta/2 (y - q)^2 + pi w |y| + beta/2 (w y)^2`, scaled by `1/beta`.
pub fn y_update_error(instances: usize, seed: u64) -> f64 {
    let mut rng = Lcg::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = 1 + rng.below(6) as usize;
        let q = rng.vec(n, -2.0, 2.0);
        let w: Vec<f64> = (0..n)
            .map(|_| if rng.below(3) == 0 { rng.below(2) as f64 } else { rng.unit() })
            .collect();
        let pi = rng.vec(n, 0.0, 5.0);
        let beta = 10f64.powf(rng.range(-1.0, 2.0));
        let got = update_y(&q, &w, &pi, beta);
        for i in 0..n {
            let f = |y: f64| {
                0.5 * (y - q[i]).powi(2)
                    + pi[i] / beta * w[i] * y.abs()
                    + 0.5 * (w[i] * y).powi(2)
            };
            worst = worst.max((got[i] - grid_then_refine(f, -3.0, 3.0, 0.01)).abs());
        }
    }
    worst
}

/// The `l1` baseline's `y` block against golden search on
/// `|y| / beta + 1/2 (y - q)^2`.
pub fn y_l1_update_error(instances: usize, seed: u64) -> f64 {
    let mut rng = Lcg::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = 1 + rng.below(6) as usize;
        let q = rng.vec(n, -2.0, 2.0);
        let beta = 10f64.powf(rng.range(-1.0, 2.0));
        let got = update_y_l1(&q, beta);
        for i in 0..n {
            let f = |y: f64| y.abs() / beta + 0.5 * (y - q[i]).powi(2);
            worst = worst.max((got[i] - golden_min(f, -3.0, 3.0)).abs());
        }
    }
    worst
}

fn lemma1_case(w: &[f64]) -> Result<(), String> {
    let (min, argmins) = enumerate_l0_mpec(w);
    let (count, v) = l0_mpec_oracle(w);
    let nnz = w.iter().filter(|&&x| x != 0.0).count();
    let expected: Vec<f64> = w.iter().map(|&x| if x == 0.0 { 1.0 } else { 0.0 }).collect();
    if min != nnz as f64 {
        return Err(format!("w = {w:?}: minimum {min}, expected {nnz}"));
    }
    // the zero-residual pixels are exactly the ones where v* = 1
    if expected.iter().sum::<f64>() != (w.len() - nnz) as f64 {
        return Err(format!("w = {w:?}: <1, v*> differs from n - ||w||_0"));
    }
    if argmins != vec![expected.clone()] {
        return Err(format!("w = {w:?}: minimizers {argmins:?}"));
    }
    if count != nnz || v != expected {
        return Err(format!("w = {w:?}: library oracle gave ({count}, {v:?})"));
    }
    Ok(())
}

/// Lemma 1 on all of `{-1, 0, 1}^6` plus `random` random vectors.
/// Returns the number of cases checked.
pub fn lemma1(random: usize, seed: u64) -> Result<usize, String> {
    let mut cases = 0;
    for code in 0..729u32 {
        let mut c = code;
        let w: Vec<f64> = (0..6)
            .map(|_| {
                let d = c % 3;
                c /= 3;
                d as f64 - 1.0
            })
            .collect();
        lemma1_case(&w)?;
        cases += 1;
    }
    let mut rng = Lcg::new(seed);
    for _ in 0..random {
        let n = 1 + rng.below(10) as usize;
        let w: Vec<f64> = (0..n)
            .map(|_| if rng.below(5) < 2 { 0.0 } else { rng.range(-3.0, 3.0) })
            .collect();
        lemma1_case(&w)?;
        cases += 1;
    }
    Ok(cases)
}

/// `<f, grad u> + <div f, u>` over random pairs on grids up to 16x16.
pub fn adjoint_gap(pairs: usize, seed: u64) -> f64 {
    let mut rng = Lcg::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let (m, n) = (1 + rng.below(16) as usize, 1 + rng.below(16) as usize);
        let u = ImageGrid::new(m, n, rng.vec(m * n, -1.0, 1.0)).unwrap();
        let f = GradientField::new(m, n, rng.vec(2 * m * n, -1.0, 1.0)).unwrap();
        let lhs = dot(f.stacked(), grad(&u).stacked());
        let rhs = -dot(&div(&f), u.data());
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

/// Matrix-free gradient and its adjoint against the dense stencil matrix,
/// every grid up to `max x max`.
pub fn gradient_dense_error(max: usize, seed: u64) -> f64 {
    let mut rng = Lcg::new(seed);
    let mut worst: f64 = 0.0;
    for m in 1..=max {
        for n in 1..=max {
            let g = dense_gradient(m, n);
            let u = rng.vec(m * n, -1.0, 1.0);
            let f = rng.vec(2 * m * n, -1.0, 1.0);
            let mut gu = vec![0.0; 2 * m * n];
            grad_into(&u, m, n, &mut gu);
            let mut gtf = vec![0.0; m * n];
            grad_adjoint_into(&f, m, n, &mut gtf);
            worst = worst
                .max(max_abs_diff(&gu, &g.mul_vec(&u)))
                .max(max_abs_diff(&gtf, &g.t_mul_vec(&f)));
        }
    }
    worst
}

/// Convolution and its adjoint against the dense circulant matrix on 8x8.
pub fn convolution_dense_error(trials: usize, seed: u64) -> f64 {
    let mut rng = Lcg::new(seed);
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let kernel = match t % 4 {
            0 => l0tv_core::disc_kernel(3).unwrap(),
            1 => l0tv_core::gaussian_kernel(5, 1.3).unwrap(),
            _ => random_kernel(&mut rng, [3, 5, 7][t % 3]),
        };
        let (m, n) = (8, 8);
        let k = dense_convolution(&kernel, m, n);
        let op = LinearOp::convolution(kernel);
        let u = rng.vec(m * n, -1.0, 1.0);
        let w = rng.vec(m * n, -1.0, 1.0);
        let mut ku = vec![0.0; m * n];
        op.apply_into(&u, m, n, &mut ku);
        let mut ktw = vec![0.0; m * n];
        op.apply_adjoint_into(&w, m, n, &mut ktw);
        worst = worst
            .max(max_abs_diff(&ku, &k.mul_vec(&u)))
            .max(max_abs_diff(&ktw, &k.t_mul_vec(&w)));
    }
    worst
}

/// Largest power-iteration estimate of `||grad||^2` over square grids
/// from 8x8 through 64x64.
pub fn max_grad_norm_estimate() -> f64 {
    (8..=64)
        .step_by(8)
        .map(|s| estimate_grad_sq_norm(s, s, 500))
        .fold(0.0, f64::max)
}
