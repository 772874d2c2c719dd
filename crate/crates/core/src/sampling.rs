//! Counter-based Gaussian streams and Brownian draws.
//!
//! The `k`-th draw of a stream is a pure function of `(seed, k)`: a SplitMix64
//! output word for counter `k` under a seed-derived key, mapped to the open
//! unit interval and pushed through the normal quantile. Any subset of
//! indices can therefore be generated in any order, on any number of
//! workers, with bit-identical results.

use crate::error::{Error, Result};
use crate::special::quantile;

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic, index-addressable source of standard normal draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    key: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            key: mix64(seed ^ 0x6a09_e667_f3bc_c909),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Raw 64-bit word for counter `index`.
    #[inline]
    pub fn word(&self, index: u64) -> u64 {
        mix64(
            self.key
                .wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA)),
        )
    }

    /// Uniform on the open interval (0, 1): the top 53 bits, centred in
    /// their cell, so 0 and 1 are never produced.
    #[inline]
    pub fn uniform(&self, index: u64) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.word(index) >> 11) as f64 + 0.5) * SCALE
    }

    #[inline]
    pub fn standard_normal(&self, index: u64) -> f64 {
        quantile(self.uniform(index))
    }
}

pub fn standard_normal(s: &RngStream, index: u64) -> f64 {
    s.standard_normal(index)
}

/// A sample of `B_T`, optionally with the increments over a uniform grid
/// that produced it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BrownianDraw {
    pub terminal_value: f64,
    /// Empty when only the terminal value was drawn.
    pub increments: Vec<f64>,
}

impl BrownianDraw {
    pub fn terminal(value: f64) -> Self {
        Self {
            terminal_value: value,
            increments: Vec::new(),
        }
    }

    pub fn has_increments(&self) -> bool {
        !self.increments.is_empty()
    }
}

/// `B_T = sqrt(T) * Z` with `Z` the stream's draw at `index`.
pub fn brownian_terminal(s: &RngStream, index: u64, horizon: f64) -> BrownianDraw {
    BrownianDraw::terminal(horizon.sqrt() * s.standard_normal(index))
}

/// First stream index used by path `index` on an `n_steps` grid.
pub(crate) fn path_offset(index: u64, n_steps: u64) -> Result<u64> {
    if n_steps == 0 {
        return Err(Error::BadStepCount);
    }
    index
        .checked_mul(n_steps)
        .and_then(|first| first.checked_add(n_steps - 1).map(|last| (first, last)))
        .filter(|&(_, last)| last <= i64::MAX as u64)
        .map(|(first, _)| first)
        .ok_or(Error::IndexOverflow { index, n_steps })
}

/// Increments `sqrt(T/n) Z_{index*n + k}` for `k = 0..n`, with the terminal
/// value set to their running sum. Distinct paths use disjoint index ranges.
pub fn brownian_increments(
    s: &RngStream,
    index: u64,
    horizon: f64,
    n_steps: u64,
) -> Result<BrownianDraw> {
    let mut draw = BrownianDraw::default();
    fill_increments(s, index, horizon, n_steps, &mut draw)?;
    Ok(draw)
}

/// Allocation-reusing form of [`brownian_increments`].
pub fn fill_increments(
    s: &RngStream,
    index: u64,
    horizon: f64,
    n_steps: u64,
    draw: &mut BrownianDraw,
) -> Result<()> {
    let first = path_offset(index, n_steps)?;
    let scale = (horizon / n_steps as f64).sqrt();
    draw.increments.clear();
    let mut sum = 0.0;
    for k in 0..n_steps {
        let dw = scale * s.standard_normal(first + k);
        sum += dw;
        draw.increments.push(dw);
    }
    draw.terminal_value = sum;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_cdf;

    fn moments(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
        // two-pass on a collected buffer keeps the reference simple
        let v: Vec<f64> = xs.collect();
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (mean, var, n)
    }

    #[test]
    fn draws_are_pure_functions_of_seed_and_index() {
        let a = RngStream::new(42);
        let b = RngStream::new(42);
        assert_eq!(
            a.standard_normal(7).to_bits(),
            b.standard_normal(7).to_bits()
        );
        assert_ne!(a.standard_normal(7), RngStream::new(43).standard_normal(7));
        assert_ne!(a.standard_normal(7), a.standard_normal(8));
    }

    #[test]
    fn uniform_stays_inside_open_interval() {
        let s = RngStream::new(0);
        for i in 0..100_000 {
            let u = s.uniform(i);
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn normal_mean_and_variance() {
        let s = RngStream::new(20_240_601);
        let (mean, var, n) = moments((0..1_000_000).map(|i| s.standard_normal(i)));
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.006, "var {var}");
    }

    #[test]
    fn kolmogorov_smirnov() {
        let s = RngStream::new(7);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|i| s.standard_normal(i)).collect();
        xs.sort_by(f64::total_cmp);
        let mut d: f64 = 0.0;
        for (i, x) in xs.iter().enumerate() {
            let f = normal_cdf(*x).unwrap();
            d = d
                .max((i as f64 + 1.0) / n as f64 - f)
                .max(f - i as f64 / n as f64);
        }
        assert!(d < 1.95 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn terminal_scaling() {
        let s = RngStream::new(3);
        assert_eq!(
            brownian_terminal(&s, 11, 1.0).terminal_value,
            s.standard_normal(11)
        );
        assert_eq!(
            brownian_terminal(&s, 11, 4.0).terminal_value,
            2.0 * s.standard_normal(11)
        );
        assert!(!brownian_terminal(&s, 11, 4.0).has_increments());
    }

    #[test]
    fn terminal_variance_scales_with_horizon() {
        let s = RngStream::new(99);
        let (_, var, _) =
            moments((0..1_000_000).map(|i| brownian_terminal(&s, i, 2.0).terminal_value));
        assert!((var - 2.0).abs() < 0.012, "var {var}");
    }

    #[test]
    fn single_step_increment_is_terminal_draw() {
        let s = RngStream::new(5);
        let d = brownian_increments(&s, 17, 2.5, 1).unwrap();
        assert_eq!(d.increments.len(), 1);
        assert_eq!(
            d.increments[0],
            brownian_terminal(&s, 17, 2.5).terminal_value
        );
    }

    #[test]
    fn increments_sum_to_terminal() {
        let s = RngStream::new(5);
        for idx in 0..50 {
            let d = brownian_increments(&s, idx, 3.0, 64).unwrap();
            let sum: f64 = d.increments.iter().sum();
            assert!((sum - d.terminal_value).abs() <= 1e-12 * 3f64.sqrt());
        }
    }

    #[test]
    fn paths_use_disjoint_index_ranges() {
        let s = RngStream::new(8);
        let a = brownian_increments(&s, 0, 1.0, 4).unwrap();
        let b = brownian_increments(&s, 1, 1.0, 4).unwrap();
        for (k, dw) in a.increments.iter().chain(&b.increments).enumerate() {
            assert_eq!(*dw, 0.5 * s.standard_normal(k as u64));
        }
    }

    #[test]
    fn fine_grid_terminal_variance() {
        let s = RngStream::new(1234);
        let mut draw = BrownianDraw::default();
        let (_, var, _) = moments((0..100_000).map(|i| {
            fill_increments(&s, i, 1.0, 256, &mut draw).unwrap();
            draw.terminal_value
        }));
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn increment_marginals() {
        let s = RngStream::new(77);
        let steps = 16;
        let mut draw = BrownianDraw::default();
        let mut incs = Vec::new();
        for i in 0..20_000 {
            fill_increments(&s, i, 2.0, steps, &mut draw).unwrap();
            incs.extend_from_slice(&draw.increments);
        }
        let (mean, var, n) = moments(incs.into_iter());
        let want = 2.0 / steps as f64;
        assert!(mean.abs() < 4.0 * (want / n as f64).sqrt());
        assert!((var - want).abs() < 4.0 * want * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn index_overflow_detected() {
        let s = RngStream::new(1);
        assert!(matches!(
            brownian_increments(&s, 1 << 62, 1.0, 4),
            Err(Error::IndexOverflow { .. })
        ));
        assert!(matches!(
            brownian_increments(&s, 0, 1.0, 0),
            Err(Error::BadStepCount)
        ));
        // last index exactly 2^63 - 1 is still fine
        assert_eq!(
            path_offset((1u64 << 63) / 2 - 1, 2).unwrap(),
            (1u64 << 63) - 2
        );
    }

    #[test]
    fn chunked_generation_is_bitwise_identical() {
        let s = RngStream::new(0xdead_beef);
        let n = 10_000u64;
        let whole: Vec<u64> = (0..n).map(|i| s.standard_normal(i).to_bits()).collect();
        for chunks in [1u64, 3, 7, 64] {
            let size = n.div_ceil(chunks);
            let mut pieces = Vec::new();
            for c in (0..chunks).rev() {
                let lo = (c * size).min(n);
                let hi = ((c + 1) * size).min(n);
                pieces.push((
                    lo,
                    (lo..hi)
                        .map(|i| s.standard_normal(i).to_bits())
                        .collect::<Vec<_>>(),
                ));
            }
            pieces.sort_by_key(|p| p.0);
            let joined: Vec<u64> = pieces.into_iter().flat_map(|p| p.1).collect();
            assert_eq!(joined, whole);
        }
    }
}
