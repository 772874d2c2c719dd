//! Deterministic Monte Carlo estimation.
//!
//! Samples are accumulated in fixed blocks of [`BLOCK`] consecutive indices
//! (Welford within a block), then blocks are combined by a pairwise tree
//! whose shape depends only on the number of blocks. Workers only decide
//! who computes which block, so the result is bitwise independent of the
//! worker count.

use serde::Serialize;
use std::str::FromStr;

use crate::closed_form::honest_optimal_allocation;
use crate::error::{Error, Result};
use crate::market::{Allocation, MarketParams};
use crate::samplers::{
    forward_euler_terminal, forward_insider_terminal_wealth, honest_terminal_wealth,
    skorokhod_unbiased_sample, WealthSample,
};
use crate::sampling::{brownian_terminal, fill_increments, BrownianDraw, RngStream};

/// Samples per leaf of the merge tree.
pub const BLOCK: u64 = 4096;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959964;

/// Running count, mean and sum of squared deviations, plus diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    count: u64,
    mean: f64,
    m2: f64,
    zeros: u64,
    clamps: u64,
}

impl Accumulator {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        if x == 0.0 {
            self.zeros += 1;
        }
    }

    #[inline]
    pub fn push_sample(&mut self, s: &WealthSample) {
        self.push(s.value);
        if s.clamped {
            self.clamps += 1;
        }
    }

    /// Chan-Golub-LeVeque combination of two disjoint accumulators.
    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let (na, nb, n) = (self.count as f64, other.count as f64, count as f64);
        let delta = other.mean - self.mean;
        Self {
            count,
            mean: self.mean + delta * (nb / n),
            m2: self.m2 + other.m2 + delta * delta * (na * nb / n),
            zeros: self.zeros + other.zeros,
            clamps: self.clamps + other.clamps,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn zeros(&self) -> u64 {
        self.zeros
    }

    pub fn clamps(&self) -> u64 {
        self.clamps
    }
}

fn merge_tree(leaves: &[Accumulator]) -> Accumulator {
    match leaves.len() {
        0 => Accumulator::default(),
        1 => leaves[0],
        len => {
            let (left, right) = leaves.split_at(len.div_ceil(2));
            merge_tree(left).merge(&merge_tree(right))
        }
    }
}

/// Reduces the index range `start..end` with the fixed block tree.
///
/// `leaf(lo, hi)` accumulates one block; blocks start at `start` and are
/// [`BLOCK`] long except possibly the last. With `workers > 1` contiguous
/// runs of blocks are computed on scoped threads. On failure the error of
/// the lowest failing block is returned.
pub fn tree_reduce<F>(start: u64, end: u64, workers: usize, leaf: F) -> Result<Accumulator>
where
    F: Fn(u64, u64) -> Result<Accumulator> + Sync,
{
    if workers == 0 {
        return Err(Error::BadWorkerCount);
    }
    let len = end.saturating_sub(start);
    let blocks = len.div_ceil(BLOCK);
    let bounds = |b: u64| (start + b * BLOCK, (start + (b + 1) * BLOCK).min(end));

    let results: Vec<Result<Accumulator>> = if workers == 1 || blocks <= 1 {
        (0..blocks)
            .map(|b| {
                let (lo, hi) = bounds(b);
                leaf(lo, hi)
            })
            .collect()
    } else {
        let per_worker = blocks.div_ceil(workers as u64);
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers as u64)
                .map(|w| {
                    let first = (w * per_worker).min(blocks);
                    let last = ((w + 1) * per_worker).min(blocks);
                    let leaf = &leaf;
                    scope.spawn(move || {
                        (first..last)
                            .map(|b| {
                                let (lo, hi) = bounds(b);
                                leaf(lo, hi)
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("estimator worker panicked"))
                .collect()
        })
    };

    let leaves = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(merge_tree(&leaves))
}

/// Which sampler an estimate runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trader {
    HonestFixed(Allocation),
    HonestOptimal,
    ForwardInsider,
    SkorokhodUnbiased,
    ForwardEuler { n_steps: u64 },
}

impl FromStr for Trader {
    type Err = Error;

    /// Accepts `honest-optimal`, `forward`, `skorokhod`, `euler:<steps>` and
    /// `honest-fixed:<M0>,<M1>`.
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownTrader(s.to_string());
        match s {
            "honest-optimal" | "honest" => return Ok(Trader::HonestOptimal),
            "forward" => return Ok(Trader::ForwardInsider),
            "skorokhod" => return Ok(Trader::SkorokhodUnbiased),
            _ => {}
        }
        if let Some(steps) = s.strip_prefix("euler:") {
            let n_steps = steps.parse().map_err(|_| unknown())?;
            return Ok(Trader::ForwardEuler { n_steps });
        }
        if let Some(split) = s.strip_prefix("honest-fixed:") {
            let (bond, stock) = split.split_once(',').ok_or_else(unknown)?;
            let bond = bond.trim().parse().map_err(|_| unknown())?;
            let stock = stock.trim().parse().map_err(|_| unknown())?;
            return Ok(Trader::HonestFixed(Allocation { bond, stock }));
        }
        Err(unknown())
    }
}

/// Result of one Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub n: u64,
    pub mean: f64,
    pub sample_stddev: f64,
    pub stderr: f64,
    pub ci95_halfwidth: f64,
    pub seed: u64,
    /// Fraction of samples that were exactly zero.
    pub zero_fraction: f64,
    /// Paths on which the Euler scheme clamped the stock leg.
    pub clamp_count: u64,
}

impl MCEstimate {
    pub fn from_accumulator(acc: &Accumulator, seed: u64) -> Self {
        let n = acc.count();
        let sd = acc.variance().sqrt();
        let stderr = sd / (n as f64).sqrt();
        Self {
            n,
            mean: acc.mean(),
            sample_stddev: sd,
            stderr,
            ci95_halfwidth: Z95 * stderr,
            seed,
            zero_fraction: acc.zeros() as f64 / n as f64,
            clamp_count: acc.clamps(),
        }
    }

    /// For estimators whose standard error is not a plain sample deviation
    /// over `n` (the factorized estimator); the deviation is backed out as
    /// `stderr * sqrt(n)`.
    pub fn from_parts(
        n: u64,
        mean: f64,
        stderr: f64,
        seed: u64,
        zero_fraction: f64,
        clamp_count: u64,
    ) -> Self {
        Self {
            n,
            mean,
            sample_stddev: stderr * (n as f64).sqrt(),
            stderr,
            ci95_halfwidth: Z95 * stderr,
            seed,
            zero_fraction,
            clamp_count,
        }
    }
}

/// Sample value at stream index `i` for one trader.
fn sample_at(
    trader: &Trader,
    p: &MarketParams,
    s: &RngStream,
    i: u64,
    scratch: &mut BrownianDraw,
) -> Result<WealthSample> {
    match trader {
        Trader::HonestFixed(a) => honest_terminal_wealth(p, a, &brownian_terminal(s, i, p.horizon)),
        Trader::HonestOptimal => {
            let a = honest_optimal_allocation(p);
            let mut w = honest_terminal_wealth(p, &a, &brownian_terminal(s, i, p.horizon))?;
            w.trader = crate::samplers::TraderKind::HonestOptimal;
            Ok(w)
        }
        Trader::ForwardInsider => {
            forward_insider_terminal_wealth(p, &brownian_terminal(s, i, p.horizon))
        }
        Trader::SkorokhodUnbiased => {
            skorokhod_unbiased_sample(p, &brownian_terminal(s, i, p.horizon))
        }
        Trader::ForwardEuler { n_steps } => {
            fill_increments(s, i, p.horizon, *n_steps, scratch)?;
            forward_euler_terminal(p, scratch)
        }
    }
}

/// Accumulates the trader's samples over stream indices `start..end`.
pub fn accumulate(
    trader: &Trader,
    p: &MarketParams,
    seed: u64,
    start: u64,
    end: u64,
    workers: usize,
) -> Result<Accumulator> {
    if let Trader::HonestFixed(a) = trader {
        Allocation::new(p, a.bond, a.stock)?;
    }
    if let Trader::ForwardEuler { n_steps: 0 } = trader {
        return Err(Error::BadStepCount);
    }
    let s = RngStream::new(seed);
    tree_reduce(start, end, workers, |lo, hi| {
        let mut acc = Accumulator::default();
        let mut scratch = BrownianDraw::default();
        for i in lo..hi {
            acc.push_sample(&sample_at(trader, p, &s, i, &mut scratch)?);
        }
        Ok(acc)
    })
}

/// Mean of the trader's terminal wealth over stream indices `0..n`.
///
/// `workers` is the number of threads; the result does not depend on it.
pub fn estimate_mean(
    trader: &Trader,
    p: &MarketParams,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<MCEstimate> {
    if n < 2 {
        return Err(Error::BadSampleCount(n));
    }
    let acc = accumulate(trader, p, seed, 0, n, workers)?;
    Ok(MCEstimate::from_accumulator(&acc, seed))
}

/// `(mean - reference) / stderr`. A zero-variance estimate scores 0 when it
/// hits the reference exactly and is an error otherwise.
pub fn z_score(est: &MCEstimate, reference: f64) -> Result<f64> {
    if est.stderr > 0.0 {
        Ok((est.mean - reference) / est.stderr)
    } else if est.mean == reference {
        Ok(0.0)
    } else {
        Err(Error::DegenerateEstimate {
            mean: est.mean,
            reference,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{forward_expected_wealth, honest_expected_wealth};
    use crate::market::validate_params;
    use proptest::prelude::*;

    fn params(m: f64, rho: f64, mu: f64, sigma: f64, t: f64) -> MarketParams {
        validate_params(m, rho, mu, sigma, t).unwrap()
    }

    fn bits(e: &MCEstimate) -> [u64; 6] {
        [
            e.n,
            e.mean.to_bits(),
            e.sample_stddev.to_bits(),
            e.stderr.to_bits(),
            e.zero_fraction.to_bits(),
            e.clamp_count,
        ]
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let p = params(1.0, 0.0, 0.5, 1.0, 1.0);
        for trader in [
            Trader::SkorokhodUnbiased,
            Trader::ForwardInsider,
            Trader::ForwardEuler { n_steps: 8 },
        ] {
            let one = estimate_mean(&trader, &p, 50_001, 42, 1).unwrap();
            let eight = estimate_mean(&trader, &p, 50_001, 42, 8).unwrap();
            let three = estimate_mean(&trader, &p, 50_001, 42, 3).unwrap();
            assert_eq!(bits(&one), bits(&eight));
            assert_eq!(bits(&one), bits(&three));
        }
    }

    #[test]
    fn halves_merge_to_whole() {
        let p = params(1.0, 0.02, 0.1, 0.3, 2.0);
        let n = 2 * BLOCK * 5;
        let t = Trader::SkorokhodUnbiased;
        let whole = accumulate(&t, &p, 7, 0, n, 1).unwrap();
        let left = accumulate(&t, &p, 7, 0, n / 2, 1).unwrap();
        let right = accumulate(&t, &p, 7, n / 2, n, 4).unwrap();
        let merged = left.merge(&right);
        assert_eq!(merged.mean().to_bits(), whole.mean().to_bits());
        assert_eq!(merged.variance().to_bits(), whole.variance().to_bits());
        assert_eq!(merged.zeros(), whole.zeros());
    }

    #[test]
    fn deterministic_honest_estimate() {
        let p = params(3.0, 0.05, 0.1, 0.2, 1.0);
        let a = Allocation::all_bond(&p);
        let est = estimate_mean(&Trader::HonestFixed(a), &p, 10_000, 1, 2).unwrap();
        assert_eq!(est.sample_stddev, 0.0);
        assert_eq!(est.mean, 3.0 * (0.05f64).exp());
        let cf = honest_expected_wealth(&p, &a).unwrap();
        assert_eq!(z_score(&est, cf).unwrap(), 0.0);
        assert_eq!(est.zero_fraction, 0.0);
    }

    #[test]
    fn forward_reference_point() {
        let p = params(1.0, 0.0, 0.5, 1.0, 1.0);
        let est = estimate_mean(&Trader::ForwardInsider, &p, 1_000_000, 2024, 1).unwrap();
        let cf = forward_expected_wealth(&p).unwrap();
        assert!(z_score(&est, cf).unwrap().abs() <= 3.0, "{est:?}");
        assert_eq!(est.zero_fraction, 0.0);
    }

    #[test]
    fn estimate_errors() {
        let p = params(1.0, 0.0, 0.5, 1.0, 1.0);
        assert_eq!(
            estimate_mean(&Trader::ForwardInsider, &p, 1, 0, 1),
            Err(Error::BadSampleCount(1))
        );
        assert_eq!(
            estimate_mean(&Trader::ForwardInsider, &p, 10, 0, 0),
            Err(Error::BadWorkerCount)
        );
        let bad = Trader::HonestFixed(Allocation {
            bond: 0.5,
            stock: 0.2,
        });
        assert!(matches!(
            estimate_mean(&bad, &p, 10, 0, 1),
            Err(Error::AllocationMismatch { .. })
        ));
        assert_eq!(
            estimate_mean(&Trader::ForwardEuler { n_steps: 0 }, &p, 10, 0, 1),
            Err(Error::BadStepCount)
        );
    }

    #[test]
    fn trader_names() {
        assert_eq!("forward".parse::<Trader>().unwrap(), Trader::ForwardInsider);
        assert_eq!(
            "skorokhod".parse::<Trader>().unwrap(),
            Trader::SkorokhodUnbiased
        );
        assert_eq!(
            "honest-optimal".parse::<Trader>().unwrap(),
            Trader::HonestOptimal
        );
        assert_eq!(
            "euler:64".parse::<Trader>().unwrap(),
            Trader::ForwardEuler { n_steps: 64 }
        );
        assert_eq!(
            "honest-fixed:0.25,0.75".parse::<Trader>().unwrap(),
            Trader::HonestFixed(Allocation {
                bond: 0.25,
                stock: 0.75
            })
        );
        assert!(matches!(
            "stratonovich".parse::<Trader>(),
            Err(Error::UnknownTrader(_))
        ));
        assert!(matches!(
            "euler:x".parse::<Trader>(),
            Err(Error::UnknownTrader(_))
        ));
    }

    #[test]
    fn z_score_examples() {
        let mut e = MCEstimate::from_parts(100, 1.0, 0.005, 0, 0.0, 0);
        assert_eq!(z_score(&e, 1.0).unwrap(), 0.0);
        e.mean = 1.01;
        assert!((z_score(&e, 1.0).unwrap() - 2.0).abs() < 1e-12);
        let flat = MCEstimate::from_parts(100, 1.0, 0.0, 0, 0.0, 0);
        assert_eq!(z_score(&flat, 1.0).unwrap(), 0.0);
        assert!(matches!(
            z_score(&flat, 1.5),
            Err(Error::DegenerateEstimate { .. })
        ));
    }

    #[test]
    fn zero_fraction_only_for_skorokhod() {
        let p = params(1.0, 0.0, 0.5, 1.0, 1.0);
        for t in [Trader::HonestOptimal, Trader::ForwardInsider] {
            assert_eq!(
                estimate_mean(&t, &p, 20_000, 3, 1).unwrap().zero_fraction,
                0.0
            );
        }
        assert!(
            estimate_mean(&Trader::SkorokhodUnbiased, &p, 20_000, 3, 1)
                .unwrap()
                .zero_fraction
                > 0.0
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn estimate_invariants(n in 2u64..20_000, seed in any::<u64>(), workers in 1usize..6) {
            let p = params(1.0, 0.03, 0.08, 0.4, 1.5);
            let e = estimate_mean(&Trader::SkorokhodUnbiased, &p, n, seed, workers).unwrap();
            let r = estimate_mean(&Trader::SkorokhodUnbiased, &p, n, seed, 1).unwrap();
            prop_assert_eq!(bits(&e), bits(&r));
            prop_assert!((e.stderr * (n as f64).sqrt() - e.sample_stddev).abs() <= 1e-12 * e.sample_stddev);
            if e.stderr > 0.0 {
                prop_assert!((e.ci95_halfwidth / e.stderr - Z95).abs() <= 1e-9);
            }
            prop_assert!((0.0..=1.0).contains(&e.zero_fraction));
        }

        #[test]
        fn accumulator_merge_matches_sequential(xs in prop::collection::vec(-1e3f64..1e3, 2..300), cut in 0usize..300) {
            let cut = cut.min(xs.len());
            let mut all = Accumulator::default();
            xs.iter().for_each(|x| all.push(*x));
            let (mut a, mut b) = (Accumulator::default(), Accumulator::default());
            xs[..cut].iter().for_each(|x| a.push(*x));
            xs[cut..].iter().for_each(|x| b.push(*x));
            let m = a.merge(&b);
            prop_assert_eq!(m.count(), all.count());
            prop_assert!((m.mean() - all.mean()).abs() <= 1e-9 * (1.0 + all.mean().abs()));
            prop_assert!((m.variance() - all.variance()).abs() <= 1e-9 * (1.0 + all.variance()));
        }
    }
}
