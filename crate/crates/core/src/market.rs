//! Market parameters, the honest trader's allocation, and the regime label.
//!
//! The bond grows deterministically at rate `rho`; the stock is a geometric
//! Brownian motion with drift `mu` and volatility `sigma`. Everything
//! downstream is a function of the quintuple `(M, rho, mu, sigma, T)`.

use serde::Serialize;
use std::fmt;

use crate::error::{Error, Result};

/// The quintuple `(M, rho, mu, sigma, T)`.
///
/// Construct through [`MarketParams::new`]; fields are public for reading
/// but a value built by hand skips validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketParams {
    /// Total initial wealth `M`.
    #[serde(rename = "M")]
    pub total_wealth: f64,
    /// Bond rate `rho`.
    #[serde(rename = "rho")]
    pub bond_rate: f64,
    /// Stock appreciation rate `mu`.
    #[serde(rename = "mu")]
    pub stock_drift: f64,
    /// Stock volatility `sigma`.
    #[serde(rename = "sigma")]
    pub volatility: f64,
    /// Horizon `T`.
    #[serde(rename = "T")]
    pub horizon: f64,
}

fn finite(field: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NotFinite { field })
    }
}

fn positive(field: &'static str, v: f64) -> Result<f64> {
    if finite(field, v)? > 0.0 {
        Ok(v)
    } else {
        Err(Error::NonPositive { field })
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<f64> {
    if finite(field, v)? >= 0.0 {
        Ok(v)
    } else {
        Err(Error::NegativeRate { field })
    }
}

impl MarketParams {
    /// Validates and stores the five values exactly as given.
    ///
    /// Checks run in argument order, so the first offending field is the one
    /// reported.
    pub fn new(
        total_wealth: f64,
        bond_rate: f64,
        stock_drift: f64,
        volatility: f64,
        horizon: f64,
    ) -> Result<Self> {
        Ok(Self {
            total_wealth: positive("M", total_wealth)?,
            bond_rate: non_negative("rho", bond_rate)?,
            stock_drift: non_negative("mu", stock_drift)?,
            volatility: positive("sigma", volatility)?,
            horizon: positive("T", horizon)?,
        })
    }

    /// The threshold `a` with `{stock ends above bond} = {B_T > a}`:
    /// `a = (rho - mu + sigma^2/2) T / sigma`.
    pub fn indicator_threshold(&self) -> f64 {
        let s = self.volatility;
        (self.bond_rate - self.stock_drift + 0.5 * s * s) * self.horizon / s
    }

    /// Exact comparison of `mu` against `rho`.
    pub fn regime(&self) -> Regime {
        if self.stock_drift > self.bond_rate {
            Regime::Bull
        } else if self.bond_rate > self.stock_drift {
            Regime::Bear
        } else {
            Regime::Marginal
        }
    }

    /// True when `rho` or `mu` is exactly zero. The model is stated for
    /// strictly positive constants; zero rates are admitted for testing and
    /// flagged in reports.
    pub fn outside_positive_hypothesis(&self) -> bool {
        self.bond_rate == 0.0 || self.stock_drift == 0.0
    }

    /// Returns a copy with one field replaced by name, validated.
    /// Accepts `M`, `rho`, `mu`, `sigma`, `T`.
    pub fn with_field(&self, field: &str, value: f64) -> Result<Self> {
        let mut raw = [
            self.total_wealth,
            self.bond_rate,
            self.stock_drift,
            self.volatility,
            self.horizon,
        ];
        let slot = match field {
            "M" => 0,
            "rho" => 1,
            "mu" => 2,
            "sigma" => 3,
            "T" => 4,
            other => return Err(Error::UnknownField(other.to_string())),
        };
        raw[slot] = value;
        Self::new(raw[0], raw[1], raw[2], raw[3], raw[4])
    }
}

/// Free-function form of [`MarketParams::new`].
pub fn validate_params(m: f64, rho: f64, mu: f64, sigma: f64, t: f64) -> Result<MarketParams> {
    MarketParams::new(m, rho, mu, sigma, t)
}

pub fn indicator_threshold(p: &MarketParams) -> f64 {
    p.indicator_threshold()
}

pub fn classify_regime(p: &MarketParams) -> Regime {
    p.regime()
}

/// Which asset has the larger rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `mu > rho`
    Bull,
    /// `rho > mu`
    Bear,
    /// `mu == rho`
    Marginal,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Bull => "bull",
            Regime::Bear => "bear",
            Regime::Marginal => "marginal",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Split of the initial wealth between bond (`M0`) and stock (`M1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Allocation {
    pub bond: f64,
    pub stock: f64,
}

impl Allocation {
    /// Checks both legs are finite and non-negative and that they add up to
    /// `p.total_wealth` within 1e-12 relative.
    pub fn new(p: &MarketParams, bond: f64, stock: f64) -> Result<Self> {
        non_negative("M0", bond)?;
        non_negative("M1", stock)?;
        let total = p.total_wealth;
        if ((bond + stock) - total).abs() > 1e-12 * total {
            return Err(Error::AllocationMismatch { bond, stock, total });
        }
        Ok(Self { bond, stock })
    }

    pub fn all_bond(p: &MarketParams) -> Self {
        Self {
            bond: p.total_wealth,
            stock: 0.0,
        }
    }

    pub fn all_stock(p: &MarketParams) -> Self {
        Self {
            bond: 0.0,
            stock: p.total_wealth,
        }
    }
}
