//! Restoration quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::ImageGrid;

/// Default threshold of the soft `l0` count, `20 / 255`.
pub const SNR0_EPS: f64 = 20.0 / 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SnrKind {
    /// Percentage of pixels within `eps` of the reference.
    Zero,
    /// `l1` ratio in dB.
    One,
    /// `l2` ratio in dB.
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snr {
    pub snr0: f64,
    pub snr1: f64,
    pub snr2: f64,
}

/// Number of entries with `|a - b| > eps`.
pub fn soft_l0(a: &[f64], b: &[f64], eps: f64) -> usize {
    a.iter().zip(b).filter(|(x, y)| (*x - *y).abs() > eps).count()
}

/// `10 log10(num / den)`; `+inf` when the denominator vanishes.
fn db_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (num / den).log10()
    }
}

pub fn snr(u: &ImageGrid, u0: &ImageGrid, which: SnrKind, eps: f64) -> Result<f64> {
    u.same_shape(u0)?;
    let n = u.len() as f64;
    let mean = u0.mean();
    let (a, r) = (u.data(), u0.data());
    Ok(match which {
        SnrKind::Zero => 100.0 * (n - soft_l0(r, a, eps) as f64) / n,
        SnrKind::One => {
            let num: f64 = r.iter().map(|v| (v - mean).abs()).sum();
            let den: f64 = a.iter().map(|v| (v - mean).abs()).sum();
            db_ratio(num, den)
        }
        SnrKind::Two => {
            let num: f64 = r.iter().map(|v| (v - mean).powi(2)).sum();
            let den: f64 = a.iter().map(|v| (v - mean).powi(2)).sum();
            db_ratio(num, den)
        }
    })
}

pub fn snr_all(u: &ImageGrid, u0: &ImageGrid) -> Result<Snr> {
    Ok(Snr {
        snr0: snr(u, u0, SnrKind::Zero, SNR0_EPS)?,
        snr1: snr(u, u0, SnrKind::One, SNR0_EPS)?,
        snr2: snr(u, u0, SnrKind::Two, SNR0_EPS)?,
    })
}

/// `10 log10(||u0 - mean(u0)||^2 / ||u - u0||^2)`: the `l2` ratio with the
/// reconstruction error in the denominator. Reported next to [`SnrKind::Two`],
/// whose denominator `||u - mean(u0)||^2` measures spread rather than error.
pub fn snr_error(u: &ImageGrid, u0: &ImageGrid) -> Result<f64> {
    u.same_shape(u0)?;
    let mean = u0.mean();
    let num: f64 = u0.data().iter().map(|v| (v - mean).powi(2)).sum();
    let den: f64 = u.data().iter().zip(u0.data()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(db_ratio(num, den))
}

/// `c = 1 - |b - u|`; white where the restoration agrees with the input.
pub fn residual_image(b: &ImageGrid, u: &ImageGrid) -> Result<ImageGrid> {
    b.same_shape(u)?;
    b.with_data(
        b.data()
            .iter()
            .zip(u.data())
            .map(|(x, y)| 1.0 - (x - y).abs())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(v: Vec<f64>) -> ImageGrid {
        ImageGrid::new(v.len(), 1, v).unwrap()
    }

    #[test]
    fn snr0_examples() {
        let u0 = grid(vec![0.1, 0.4, 0.8, 0.3]);
        assert_eq!(snr(&u0, &u0, SnrKind::Zero, SNR0_EPS).unwrap(), 100.0);
        let mut off = u0.clone();
        off.set(2, 0, 0.8 - 19.0 / 255.0);
        assert_eq!(snr(&off, &u0, SnrKind::Zero, SNR0_EPS).unwrap(), 100.0);
        off.set(2, 0, 0.8 - 21.0 / 255.0);
        assert_eq!(snr(&off, &u0, SnrKind::Zero, SNR0_EPS).unwrap(), 75.0);
    }

    #[test]
    fn degenerate_denominator_is_infinite() {
        let u0 = grid(vec![0.0, 1.0]);
        let u = grid(vec![0.5, 0.5]);
        assert_eq!(snr(&u, &u0, SnrKind::Two, SNR0_EPS).unwrap(), f64::INFINITY);
        assert_eq!(snr(&u, &u0, SnrKind::One, SNR0_EPS).unwrap(), f64::INFINITY);
    }

    #[test]
    fn snr2_matches_direct_formula() {
        let mut s = 17u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let u0 = ImageGrid::new(8, 8, (0..64).map(|_| rnd()).collect()).unwrap();
        let u = ImageGrid::new(8, 8, (0..64).map(|_| rnd()).collect()).unwrap();
        let mean = u0.data().iter().sum::<f64>() / 64.0;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..64 {
            num += (u0.data()[i] - mean) * (u0.data()[i] - mean);
            den += (u.data()[i] - mean) * (u.data()[i] - mean);
        }
        let direct = 10.0 * (num / den).log10();
        assert!((snr(&u, &u0, SnrKind::Two, SNR0_EPS).unwrap() - direct).abs() <= 1e-12);
    }

    #[test]
    fn shifted_pair_identity() {
        // shifting both images by c shifts the mean of u0 by c, so every
        // centered difference and hence SNR1/SNR2 are unchanged
        let u0 = grid(vec![0.1, 0.3, 0.2, 0.6]);
        let u = grid(vec![0.15, 0.25, 0.3, 0.5]);
        let c = 0.2;
        let shift = |g: &ImageGrid| g.with_data(g.data().iter().map(|v| v + c).collect()).unwrap();
        for kind in [SnrKind::One, SnrKind::Two] {
            let a = snr(&u, &u0, kind, SNR0_EPS).unwrap();
            let b = snr(&shift(&u), &shift(&u0), kind, SNR0_EPS).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn snr0_stays_in_range() {
        let u0 = grid(vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
        let u = grid(vec![1.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let v = snr(&u, &u0, SnrKind::Zero, SNR0_EPS).unwrap();
        assert!((0.0..=100.0).contains(&v));
    }

    #[test]
    fn error_snr_rewards_accuracy() {
        let u0 = grid(vec![0.0, 1.0]);
        assert_eq!(snr_error(&u0, &u0).unwrap(), f64::INFINITY);
        let near = grid(vec![0.05, 0.95]);
        let far = grid(vec![0.5, 0.5]);
        assert!((snr_error(&near, &u0).unwrap() - 10.0 * 100f64.log10()).abs() < 1e-12);
        assert!(snr_error(&far, &u0).unwrap() < snr_error(&near, &u0).unwrap());
    }

    #[test]
    fn residual_image_examples() {
        let b = grid(vec![0.2, 1.0, 0.7]);
        assert_eq!(residual_image(&b, &b).unwrap().data(), &[1.0; 3]);
        let u = grid(vec![0.2, 0.0, 0.7]);
        assert_eq!(residual_image(&b, &u).unwrap().data()[1], 0.0);
    }

    #[test]
    fn residual_mean_increases_as_u_approaches_b() {
        let b = grid((0..50).map(|i| (i as f64 * 0.37).fract()).collect());
        let noise: Vec<f64> = (0..50).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let mut prev = f64::NEG_INFINITY;
        for t in [1.0, 0.5, 0.25, 0.1, 0.01, 0.0] {
            let u = b.with_data(b.data().iter().zip(&noise).map(|(x, e)| x + t * e).collect()).unwrap();
            let m = residual_image(&b, &u).unwrap().mean();
            assert!(m > prev);
            prev = m;
        }
        assert_eq!(prev, 1.0);
    }
}
