//! Closed-form expected terminal wealth for the three traders and the
//! regime-aware ordering checks.
//!
//! With `a` the indicator threshold, `x = a / sqrt(T)` and `s = sigma sqrt(T)`,
//! every expectation reduces to standard normal probabilities:
//!
//! ```text
//! honest     M0 e^{rho T} + M1 e^{mu T}
//! skorokhod  M Phi(x) e^{rho T} + M Phi(-x)    e^{mu T}
//! forward    M Phi(x) e^{rho T} + M Phi(s - x) e^{mu T}
//! ```
//!
//! The probabilities are evaluated as `Phi` rather than `(1 +- erf)/2` so that
//! tail terms keep their relative precision; the erf forms are provided
//! separately for cross-checking.

use serde::Serialize;
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::market::{Allocation, MarketParams, Regime};
use crate::special::{erf_raw, phi};

/// Largest exponent whose `exp` is finite in binary64.
pub const MAX_EXPONENT: f64 = 709.0;

/// Relative tolerance for the marginal-regime identity `sk == i`.
pub const MARGINAL_EQUALITY_TOL: f64 = 1e-12;

/// Relative rounding allowance when cross-checking the gaps against totals.
const ROUNDING_SLACK: f64 = 8.0 * f64::EPSILON;

pub(crate) fn checked_exp(exponent: f64) -> Result<f64> {
    if exponent > MAX_EXPONENT {
        return Err(Error::Overflow { exponent });
    }
    Ok(exponent.exp())
}

fn finite_wealth(value: f64, exponent: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow { exponent })
    }
}

/// `M0 e^{rho T} + M1 e^{mu T}`.
pub fn honest_expected_wealth(p: &MarketParams, a: &Allocation) -> Result<f64> {
    let bond = checked_exp(p.bond_rate * p.horizon)?;
    let stock = checked_exp(p.stock_drift * p.horizon)?;
    finite_wealth(a.bond * bond + a.stock * stock, p.stock_drift * p.horizon)
}

/// All stock when `mu > rho`, all bond otherwise. In the marginal regime the
/// split does not change the expectation; `(M, 0)` is the convention.
pub fn honest_optimal_allocation(p: &MarketParams) -> Allocation {
    match p.regime() {
        Regime::Bull => Allocation::all_stock(p),
        Regime::Bear | Regime::Marginal => Allocation::all_bond(p),
    }
}

/// Normal probabilities and growth factors shared by the insider formulas.
#[derive(Debug, Clone, Copy)]
struct Terms {
    /// `Phi(x)`: insider holds the bond.
    p_bond: f64,
    /// `Phi(-x)`: insider holds the stock.
    p_stock: f64,
    /// `Phi(s - x)`: stock probability tilted by the stock's own growth.
    p_tilted: f64,
    /// `Phi(x - s)`, the complement of `p_tilted`.
    p_tilted_c: f64,
    bond_growth: f64,
    stock_growth: f64,
}

impl Terms {
    /// `Phi(s - x) - Phi(-x)`, the normal mass of an interval of width `s`.
    /// Evaluated on whichever of the two mirror-image intervals lies further
    /// into the lower tail so the difference never cancels to zero.
    fn tilt_mass(&self) -> f64 {
        if self.p_stock <= self.p_bond {
            self.p_tilted - self.p_stock
        } else {
            self.p_bond - self.p_tilted_c
        }
    }

    fn new(p: &MarketParams, threshold: f64) -> Result<Self> {
        let sqrt_t = p.horizon.sqrt();
        let x = threshold / sqrt_t;
        let s = p.volatility * sqrt_t;
        Ok(Self {
            p_bond: phi(x),
            p_stock: phi(-x),
            p_tilted: phi(s - x),
            p_tilted_c: phi(x - s),
            bond_growth: checked_exp(p.bond_rate * p.horizon)?,
            stock_growth: checked_exp(p.stock_drift * p.horizon)?,
        })
    }
}

fn skorokhod_from(p: &MarketParams, t: &Terms) -> Result<f64> {
    let m = p.total_wealth;
    finite_wealth(
        m * t.p_bond * t.bond_growth + m * t.p_stock * t.stock_growth,
        p.stock_drift * p.horizon,
    )
}

fn forward_from(p: &MarketParams, t: &Terms) -> Result<f64> {
    let m = p.total_wealth;
    finite_wealth(
        m * t.p_bond * t.bond_growth + m * t.p_tilted * t.stock_growth,
        p.stock_drift * p.horizon,
    )
}

/// Expected terminal wealth of the insider whose stock leg solves the
/// Skorokhod equation.
pub fn skorokhod_expected_wealth(p: &MarketParams) -> Result<f64> {
    skorokhod_from(p, &Terms::new(p, p.indicator_threshold())?)
}

/// Expected terminal wealth of the insider whose stock leg solves the
/// forward (Russo-Vallois) equation.
pub fn forward_expected_wealth(p: &MarketParams) -> Result<f64> {
    forward_from(p, &Terms::new(p, p.indicator_threshold())?)
}

/// Arguments of the two error functions in the erf-form expressions:
/// `(sigma^2 + 2 rho - 2 mu) sqrt(T) / (2 sqrt(2) sigma)` for the bond leg and
/// `(sigma^2 - 2 rho + 2 mu) sqrt(T) / (2 sqrt(2) sigma)` for the forward stock
/// leg.
pub fn erf_arguments(p: &MarketParams) -> (f64, f64) {
    let (r, m, s) = (p.bond_rate, p.stock_drift, p.volatility);
    let scale = p.horizon.sqrt() / (2.0 * SQRT_2 * s);
    (
        (s * s + 2.0 * r - 2.0 * m) * scale,
        (s * s - 2.0 * r + 2.0 * m) * scale,
    )
}

/// Skorokhod expectation written with `erf`, term for term as
/// `(M/2){1 + erf(z)} e^{rho T} + (M/2){1 - erf(z)} e^{mu T}`.
pub fn skorokhod_expected_wealth_erf(p: &MarketParams) -> Result<f64> {
    let (z, _) = erf_arguments(p);
    let half = 0.5 * p.total_wealth;
    let bond = checked_exp(p.bond_rate * p.horizon)?;
    let stock = checked_exp(p.stock_drift * p.horizon)?;
    let e = erf_raw(z);
    finite_wealth(
        half * (1.0 + e) * bond + half * (1.0 - e) * stock,
        p.stock_drift * p.horizon,
    )
}

/// Forward expectation written with `erf`.
pub fn forward_expected_wealth_erf(p: &MarketParams) -> Result<f64> {
    let (z_bond, z_stock) = erf_arguments(p);
    let half = 0.5 * p.total_wealth;
    let bond = checked_exp(p.bond_rate * p.horizon)?;
    let stock = checked_exp(p.stock_drift * p.horizon)?;
    finite_wealth(
        half * (1.0 + erf_raw(z_bond)) * bond + half * (1.0 + erf_raw(z_stock)) * stock,
        p.stock_drift * p.horizon,
    )
}

/// The marginal-regime forward value `M (1 + erf(sigma sqrt(T) / (2 sqrt 2))) e^{rho T}`.
pub fn marginal_forward_wealth(p: &MarketParams) -> Result<f64> {
    let z = p.volatility * p.horizon.sqrt() / (2.0 * SQRT_2);
    let bond = checked_exp(p.bond_rate * p.horizon)?;
    finite_wealth(
        p.total_wealth * (1.0 + erf_raw(z)) * bond,
        p.bond_rate * p.horizon,
    )
}

/// Differences that the ordering results say are positive, evaluated
/// without subtracting the rounded totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingGaps {
    /// `E[S^i] - E[S^sk]` (zero in the marginal regime).
    pub honest_minus_skorokhod: f64,
    /// `E[S^rs] - E[S^i]`.
    pub forward_minus_honest: f64,
    /// `E[S^rs] - E[S^sk] = M e^{mu T} (Phi(s - x) - Phi(-x))`.
    pub forward_minus_skorokhod: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OrderingFlags {
    pub skorokhod_below_honest: bool,
    pub honest_below_forward: bool,
    pub skorokhod_equals_honest: bool,
}

impl OrderingFlags {
    /// Strict `sk < i < rs` away from the marginal case; `sk == i < rs` on it.
    pub fn satisfied(&self, regime: Regime) -> bool {
        match regime {
            Regime::Bull | Regime::Bear => self.skorokhod_below_honest && self.honest_below_forward,
            Regime::Marginal => self.skorokhod_equals_honest && self.honest_below_forward,
        }
    }
}

/// The three expectations for one parameter set, with the ordering verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormReport {
    pub params: MarketParams,
    pub regime: Regime,
    pub honest_allocation: Allocation,
    pub honest_optimal: f64,
    pub skorokhod: f64,
    pub forward: f64,
    pub erf_argument_bond: f64,
    pub erf_argument_stock: f64,
    pub gaps: OrderingGaps,
    pub ordering: OrderingFlags,
    pub ordering_satisfied: bool,
    pub outside_positive_hypothesis: bool,
}

/// Evaluates all three traders with the regime-optimal honest allocation.
pub fn compare_closed_form(p: &MarketParams) -> Result<ClosedFormReport> {
    report_with_threshold(p, p.indicator_threshold())
}

/// Same as [`compare_closed_form`] but with the insider threshold supplied by
/// the caller. Used by the verification harness to confirm that a corrupted
/// threshold is caught.
pub(crate) fn report_with_threshold(p: &MarketParams, threshold: f64) -> Result<ClosedFormReport> {
    let regime = p.regime();
    let t = Terms::new(p, threshold)?;
    let allocation = honest_optimal_allocation(p);
    let honest = honest_expected_wealth(p, &allocation)?;
    let skorokhod = skorokhod_from(p, &t)?;
    let forward = forward_from(p, &t)?;

    let m = p.total_wealth;
    let (r, mu, horizon) = (p.bond_rate, p.stock_drift, p.horizon);
    let honest_minus_skorokhod = match regime {
        Regime::Bull => m * t.p_bond * t.bond_growth * ((mu - r) * horizon).exp_m1(),
        Regime::Bear => m * t.p_stock * t.stock_growth * ((r - mu) * horizon).exp_m1(),
        Regime::Marginal => m * t.p_stock * (t.bond_growth - t.stock_growth),
    };
    let forward_minus_honest = match regime {
        Regime::Bull => m * (t.p_bond * t.bond_growth - t.p_tilted_c * t.stock_growth),
        Regime::Bear | Regime::Marginal => {
            m * (t.p_tilted * t.stock_growth - t.p_stock * t.bond_growth)
        }
    };
    let gaps = OrderingGaps {
        honest_minus_skorokhod,
        forward_minus_honest,
        forward_minus_skorokhod: m * t.stock_growth * t.tilt_mass(),
    };

    // Totals may differ from the gaps by rounding; they must not be inverted
    // by more than that.
    let slack = ROUNDING_SLACK * forward.max(honest);
    let ordering = OrderingFlags {
        skorokhod_below_honest: gaps.honest_minus_skorokhod > 0.0 && skorokhod <= honest + slack,
        honest_below_forward: gaps.forward_minus_honest > 0.0 && honest <= forward + slack,
        skorokhod_equals_honest: (skorokhod - honest).abs() <= MARGINAL_EQUALITY_TOL * honest,
    };
    let (erf_argument_bond, erf_argument_stock) = erf_arguments(p);

    Ok(ClosedFormReport {
        params: *p,
        regime,
        honest_allocation: allocation,
        honest_optimal: honest,
        skorokhod,
        forward,
        erf_argument_bond,
        erf_argument_stock,
        gaps,
        ordering,
        ordering_satisfied: ordering.satisfied(regime),
        outside_positive_hypothesis: p.outside_positive_hypothesis(),
    })
}
