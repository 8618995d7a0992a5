//! Independent numerical oracles shared by the integration tests. Nothing
//! here calls into the closed-form updates it is used to check.

#![allow(dead_code)]

use l0tv_core::Kernel;

/// Small deterministic generator for test instances.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn vec(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| self.range(lo, hi)).collect()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Row-major dense matrix.
#[derive(Clone, Debug)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            a: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.cols + j] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| dot(&self.a[i * self.cols..(i + 1) * self.cols], x))
            .collect()
    }

    pub fn t_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j] += self.at(i, j) * y[i];
            }
        }
        out
    }

    /// `A^T A`
    pub fn gram(&self) -> Dense {
        let mut g = Dense::zeros(self.cols, self.cols);
        for i in 0..self.cols {
            for j in 0..self.cols {
                let mut s = 0.0;
                for r in 0..self.rows {
                    s += self.at(r, i) * self.at(r, j);
                }
                g.a[i * self.cols + j] = s;
            }
        }
        g
    }
}

/// Forward-difference gradient with zero last difference, built entry by
/// entry from the stencil. Column-major pixel order, rows `[Dx; Dy]`.
pub fn dense_gradient(m: usize, n: usize) -> Dense {
    let np = m * n;
    let idx = |r: usize, c: usize| c * m + r;
    let mut g = Dense::zeros(2 * np, np);
    for c in 0..n {
        for r in 0..m {
            let i = idx(r, c);
            if c + 1 < n {
                g.add_to(i, idx(r, c + 1), 1.0);
                g.add_to(i, i, -1.0);
            }
            if r + 1 < m {
                g.add_to(np + i, idx(r + 1, c), 1.0);
                g.add_to(np + i, i, -1.0);
            }
        }
    }
    g
}

/// Periodic convolution matrix: `(K u)[r, c] = sum k[dy, dx] u[r - dy, c - dx]`.
pub fn dense_convolution(kernel: &Kernel, m: usize, n: usize) -> Dense {
    let np = m * n;
    let (kr, kc) = kernel.shape();
    let (hr, hc) = ((kr / 2) as isize, (kc / 2) as isize);
    let mut k = Dense::zeros(np, np);
    for c in 0..n {
        for r in 0..m {
            for dy in -hr..=hr {
                for dx in -hc..=hc {
                    let w = kernel.weights()[((dy + hr) as usize) * kc + (dx + hc) as usize];
                    let sr = (r as isize - dy).rem_euclid(m as isize) as usize;
                    let sc = (c as isize - dx).rem_euclid(n as isize) as usize;
                    k.add_to(c * m + r, sc * m + sr, w);
                }
            }
        }
    }
    k
}

/// Golden-section search for the minimizer of a convex function on `[lo, hi]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo < 1e-13 {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
    }
    let mid = 0.5 * (lo + hi);
    // endpoints of the bracket can win for box-constrained problems
    [lo, mid, hi]
        .into_iter()
        .min_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap()
}

/// Grid search with spacing `step` on `[lo, hi]`, then golden refinement
/// inside the neighbouring cells.
pub fn grid_then_refine<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, step: f64) -> f64 {
    let cells = ((hi - lo) / step).ceil() as usize;
    let mut best = lo;
    let mut best_val = f(lo);
    for i in 0..=cells {
        let t = (lo + i as f64 * step).min(hi);
        let val = f(t);
        if val < best_val {
            best_val = val;
            best = t;
        }
    }
    golden_min(&f, (best - step).max(lo), (best + step).min(hi))
}

/// Minimizer over the plane of a jointly convex `f(a, b)` by nested golden
/// search (the partial minimum in `b` is convex in `a`).
pub fn nested_min<F: Fn(f64, f64) -> f64>(f: F, lo: f64, hi: f64) -> (f64, f64) {
    let inner = |a: f64| golden_min(|b| f(a, b), lo, hi);
    let a = golden_min(|a| f(a, inner(a)), lo, hi);
    (a, inner(a))
}

/// Projected coordinate descent on `1/2 u^T H u + c^T u` over `[0, 1]^n`.
pub fn box_qp_coordinate_descent(h: &Dense, c: &[f64], start: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut u = start.to_vec();
    for _ in 0..10_000 {
        let mut change: f64 = 0.0;
        for i in 0..n {
            let row = &h.a[i * n..(i + 1) * n];
            let g = dot(row, &u) + c[i];
            let new = (u[i] - g / row[i]).clamp(0.0, 1.0);
            change = change.max((new - u[i]).abs());
            u[i] = new;
        }
        if change < 1e-15 {
            break;
        }
    }
    u
}

/// Exhaustive minimization of `<1, 1 - v>` over binary `v` with
/// `v . |w| = 0`. Returns the minimum and every minimizer.
pub fn enumerate_l0_mpec(w: &[f64]) -> (f64, Vec<Vec<f64>>) {
    let n = w.len();
    let mut best = f64::INFINITY;
    let mut arg = Vec::new();
    for mask in 0u32..(1 << n) {
        let v: Vec<f64> = (0..n).map(|i| ((mask >> i) & 1) as f64).collect();
        if v.iter().zip(w).any(|(vi, wi)| vi * wi.abs() != 0.0) {
            continue;
        }
        let obj: f64 = v.iter().map(|vi| 1.0 - vi).sum();
        if obj < best {
            best = obj;
            arg = vec![v];
        } else if obj == best {
            arg.push(v);
        }
    }
    (best, arg)
}

pub mod checks;

/// Centre crop of the bundled 512x512 test photograph.
pub fn cameraman(size: usize) -> l0tv_core::ImageGrid {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/cameraman.pgm");
    let (img, _) = l0tv_core::io::read_image(&path).unwrap();
    img.center_crop(size, size)
}

/// Piecewise-constant test image: three flat regions.
pub fn blocks(size: usize) -> l0tv_core::ImageGrid {
    let mut data = Vec::with_capacity(size * size);
    for c in 0..size {
        for r in 0..size {
            let v = if r < size / 2 && c < size / 2 {
                0.8
            } else if r + c > size {
                0.25
            } else {
                0.55
            };
            data.push(v);
        }
    }
    l0tv_core::ImageGrid::new(size, size, data).unwrap()
}
