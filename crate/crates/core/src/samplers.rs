//! Pathwise terminal-wealth samplers.
//!
//! Each sampler maps one Brownian draw to one realization of `S(T)`; its mean
//! over `B_T ~ N(0, T)` reproduces the matching closed form. The boundary
//! `B_T == a` always routes to the bond leg.

use serde::Serialize;
use std::fmt;

use crate::closed_form::checked_exp;
use crate::error::{Error, Result};
use crate::market::{Allocation, MarketParams};
use crate::montecarlo::{tree_reduce, Accumulator, MCEstimate};
use crate::sampling::{BrownianDraw, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TraderKind {
    HonestFixed,
    HonestOptimal,
    ForwardInsider,
    SkorokhodUnbiased,
    ForwardEuler,
}

impl fmt::Display for TraderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraderKind::HonestFixed => "honest-fixed",
            TraderKind::HonestOptimal => "honest-optimal",
            TraderKind::ForwardInsider => "forward",
            TraderKind::SkorokhodUnbiased => "skorokhod",
            TraderKind::ForwardEuler => "forward-euler",
        })
    }
}

/// One realization of terminal wealth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WealthSample {
    pub value: f64,
    pub trader: TraderKind,
    pub b_t: f64,
    /// Set by the Euler scheme when the stock leg went negative and was
    /// clamped to zero.
    pub clamped: bool,
}

impl WealthSample {
    fn new(value: f64, trader: TraderKind, b_t: f64) -> Self {
        Self {
            value,
            trader,
            b_t,
            clamped: false,
        }
    }
}

/// `exp((mu - sigma^2/2) T + sigma b)`, the stock growth along the path.
#[inline]
fn stock_growth(p: &MarketParams, b_t: f64) -> Result<f64> {
    let s = p.volatility;
    checked_exp((p.stock_drift - 0.5 * s * s) * p.horizon + s * b_t)
}

/// Buy-and-hold with a fixed split: `M0 e^{rho T} + M1 exp((mu - sigma^2/2)T + sigma B_T)`.
pub fn honest_terminal_wealth(
    p: &MarketParams,
    a: &Allocation,
    b: &BrownianDraw,
) -> Result<WealthSample> {
    let bond = a.bond * checked_exp(p.bond_rate * p.horizon)?;
    // An empty stock leg contributes exactly nothing, whatever B_T is.
    let value = if a.stock == 0.0 {
        bond
    } else {
        bond + a.stock * stock_growth(p, b.terminal_value)?
    };
    Ok(WealthSample::new(
        value,
        TraderKind::HonestFixed,
        b.terminal_value,
    ))
}

/// Insider with the forward-integral stock leg: all wealth in the stock when
/// `B_T > a`, otherwise all in the bond.
pub fn forward_insider_terminal_wealth(p: &MarketParams, b: &BrownianDraw) -> Result<WealthSample> {
    let b_t = b.terminal_value;
    let m = p.total_wealth;
    let value = if b_t > p.indicator_threshold() {
        m * stock_growth(p, b_t)?
    } else {
        m * checked_exp(p.bond_rate * p.horizon)?
    };
    Ok(WealthSample::new(value, TraderKind::ForwardInsider, b_t))
}

/// Single-draw unbiased sample of the Skorokhod insider's wealth.
///
/// The Wick product of `1{B_T > a}` with the stochastic exponential
/// `exp(sigma B_T - sigma^2 T/2)` equals the indicator evaluated at the
/// translated path `B_T - sigma T` times that exponential. Hence
///
/// ```text
/// S = M 1{B_T <= a} e^{rho T} + M 1{B_T - sigma T > a} exp((mu - sigma^2/2) T + sigma B_T)
/// ```
///
/// The two indicators are not complementary: for `a < B_T <= a + sigma T`
/// the sample is exactly zero.
pub fn skorokhod_unbiased_sample(p: &MarketParams, b: &BrownianDraw) -> Result<WealthSample> {
    let b_t = b.terminal_value;
    let a = p.indicator_threshold();
    let m = p.total_wealth;
    let value = if b_t <= a {
        m * checked_exp(p.bond_rate * p.horizon)?
    } else if b_t - p.volatility * p.horizon > a {
        m * stock_growth(p, b_t)?
    } else {
        0.0
    };
    Ok(WealthSample::new(value, TraderKind::SkorokhodUnbiased, b_t))
}

/// Explicit Euler scheme for the forward equation with the anticipating
/// initial condition `S1(0) = M 1{B_T > a}`.
///
/// `B_T` is the sum of the increments. The stock leg is stepped as
/// `S1 <- S1 (1 + mu dt + sigma dB)`; a step that would make it negative
/// clamps it to zero for the rest of the path and sets `clamped`. The bond
/// leg uses its exact solution.
pub fn forward_euler_terminal(p: &MarketParams, b: &BrownianDraw) -> Result<WealthSample> {
    if !b.has_increments() {
        return Err(Error::MissingIncrements);
    }
    let b_t: f64 = b.increments.iter().sum();
    let m = p.total_wealth;
    if b_t <= p.indicator_threshold() {
        let value = m * checked_exp(p.bond_rate * p.horizon)?;
        return Ok(WealthSample::new(value, TraderKind::ForwardEuler, b_t));
    }

    let dt = p.horizon / b.increments.len() as f64;
    let drift = 1.0 + p.stock_drift * dt;
    let mut stock = m;
    let mut clamped = false;
    for dw in &b.increments {
        stock *= drift + p.volatility * dw;
        if stock < 0.0 {
            stock = 0.0;
            clamped = true;
            break;
        }
    }
    if !stock.is_finite() {
        return Err(Error::Overflow {
            exponent: f64::INFINITY,
        });
    }
    Ok(WealthSample {
        value: stock,
        trader: TraderKind::ForwardEuler,
        b_t,
        clamped,
    })
}

/// Estimates the Skorokhod expectation through the factorization
/// `E[S1(T)] = M P(B_T > a) E[exp((mu - sigma^2/2) T + sigma B_T)]`.
///
/// The probability is estimated from stream indices `0..n` and the
/// exponential moment from `n..2n`, so the two factors are independent. The
/// standard error comes from the delta method applied to
/// `M e^{rho T} (1 - p) + M p g`.
pub fn skorokhod_factorized_estimate(
    p: &MarketParams,
    s: &RngStream,
    n: u64,
    workers: usize,
) -> Result<MCEstimate> {
    if n < 2 {
        return Err(Error::BadSampleCount(n));
    }
    let a = p.indicator_threshold();
    let sqrt_t = p.horizon.sqrt();

    let hits = tree_reduce(0, n, workers, |lo, hi| {
        let mut acc = Accumulator::default();
        for i in lo..hi {
            let b_t = sqrt_t * s.standard_normal(i);
            acc.push(if b_t > a { 1.0 } else { 0.0 });
        }
        Ok(acc)
    })?;
    let growth = tree_reduce(n, 2 * n, workers, |lo, hi| {
        let mut acc = Accumulator::default();
        for i in lo..hi {
            acc.push(stock_growth(p, sqrt_t * s.standard_normal(i))?);
        }
        Ok(acc)
    })?;

    let m = p.total_wealth;
    let bond = checked_exp(p.bond_rate * p.horizon)?;
    let (p_hat, g_hat) = (hits.mean(), growth.mean());
    let mean = m * bond * (1.0 - p_hat) + m * p_hat * g_hat;

    let nf = n as f64;
    let d_p = m * (g_hat - bond);
    let d_g = m * p_hat;
    let variance = d_p * d_p * hits.variance() / nf + d_g * d_g * growth.variance() / nf;
    Ok(MCEstimate::from_parts(
        n,
        mean,
        variance.sqrt(),
        s.seed(),
        0.0,
        0,
    ))
}
