//! Comparison rows, parameter sweeps and Euler convergence tables, with their
//! CSV and JSON encodings.

use serde::Serialize;
use std::fmt::Write as _;

use crate::closed_form::{compare_closed_form, forward_expected_wealth, ClosedFormReport};
use crate::error::{Error, Result};
use crate::market::{MarketParams, Regime};
use crate::montecarlo::{estimate_mean, z_score, MCEstimate, Trader};

/// Column order of the comparison CSV.
pub const COMPARISON_HEADER: [&str; 20] = [
    "M",
    "rho",
    "mu",
    "sigma",
    "T",
    "regime",
    "cf_honest",
    "cf_skorokhod",
    "cf_forward",
    "mc_honest",
    "mc_honest_se",
    "mc_sk",
    "mc_sk_se",
    "mc_rs",
    "mc_rs_se",
    "z_honest",
    "z_sk",
    "z_rs",
    "ordering_pass",
    "zero_fraction",
];

pub const CLOSED_FORM_HEADER: [&str; 13] = [
    "M",
    "rho",
    "mu",
    "sigma",
    "T",
    "regime",
    "cf_honest",
    "cf_skorokhod",
    "cf_forward",
    "gap_honest_minus_sk",
    "gap_forward_minus_honest",
    "ordering_pass",
    "outside_positive_hypothesis",
];

pub const CONVERGENCE_HEADER: [&str; 6] = [
    "n_steps",
    "mean",
    "stderr",
    "bias",
    "clamp_count",
    "cf_forward",
];

/// 17 significant digits, enough to round-trip any binary64.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Monte Carlo side of a comparison row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Simulated {
    pub honest: MCEstimate,
    pub skorokhod: MCEstimate,
    pub forward: MCEstimate,
    pub z_honest: f64,
    pub z_skorokhod: f64,
    pub z_forward: f64,
}

/// Closed forms, estimates and verdict for one parameter set. A row whose
/// evaluation failed (e.g. overflow during a sweep) keeps the parameter echo
/// and the error message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub params: MarketParams,
    pub regime: Regime,
    pub closed_form: Option<ClosedFormReport>,
    pub simulated: Option<Simulated>,
    pub error: Option<String>,
}

impl ComparisonRow {
    pub fn is_valid(&self) -> bool {
        self.error.is_none()
    }

    /// From the closed forms only; Monte Carlo noise never enters it.
    pub fn ordering_pass(&self) -> Option<bool> {
        self.closed_form.as_ref().map(|c| c.ordering_satisfied)
    }

    fn invalid(p: &MarketParams, e: &Error) -> Self {
        Self {
            params: *p,
            regime: p.regime(),
            closed_form: None,
            simulated: None,
            error: Some(e.to_string()),
        }
    }
}

/// Closed forms plus three estimators (honest-optimal, Skorokhod translation
/// sampler, forward sampler) on the same seeded stream.
pub fn run_compare(p: &MarketParams, n: u64, seed: u64, workers: usize) -> Result<ComparisonRow> {
    let cf = compare_closed_form(p)?;
    let honest = estimate_mean(&Trader::HonestOptimal, p, n, seed, workers)?;
    let skorokhod = estimate_mean(&Trader::SkorokhodUnbiased, p, n, seed, workers)?;
    let forward = estimate_mean(&Trader::ForwardInsider, p, n, seed, workers)?;
    let simulated = Simulated {
        z_honest: z_score(&honest, cf.honest_optimal)?,
        z_skorokhod: z_score(&skorokhod, cf.skorokhod)?,
        z_forward: z_score(&forward, cf.forward)?,
        honest,
        skorokhod,
        forward,
    };
    Ok(ComparisonRow {
        params: *p,
        regime: cf.regime,
        closed_form: Some(cf),
        simulated: Some(simulated),
        error: None,
    })
}

/// Parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepField {
    Rho,
    Mu,
    Sigma,
    Horizon,
}

impl SweepField {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rho" => Ok(Self::Rho),
            "mu" => Ok(Self::Mu),
            "sigma" => Ok(Self::Sigma),
            "T" | "t" => Ok(Self::Horizon),
            other => Err(Error::UnknownField(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Rho => "rho",
            Self::Mu => "mu",
            Self::Sigma => "sigma",
            Self::Horizon => "T",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: MarketParams,
    pub field: SweepField,
    pub grid: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
}

impl SweepSpec {
    /// Checks every grid value against the swept field's constraints.
    pub fn new(
        base: MarketParams,
        field: SweepField,
        grid: Vec<f64>,
        samples: u64,
        seed: u64,
    ) -> Result<Self> {
        if samples < 2 {
            return Err(Error::BadSampleCount(samples));
        }
        for v in &grid {
            base.with_field(field.name(), *v)?;
        }
        Ok(Self {
            base,
            field,
            grid,
            samples,
            seed,
        })
    }

    pub fn points(&self) -> impl Iterator<Item = MarketParams> + '_ {
        self.grid.iter().map(|v| {
            self.base
                .with_field(self.field.name(), *v)
                .expect("validated grid")
        })
    }
}

/// One row per grid point; point `k` uses seed `seed + k`. Overflow at a point
/// marks that row invalid and the sweep continues.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<Vec<ComparisonRow>> {
    spec.points()
        .enumerate()
        .map(|(k, p)| {
            match run_compare(&p, spec.samples, spec.seed.wrapping_add(k as u64), workers) {
                Ok(row) => Ok(row),
                Err(e @ Error::Overflow { .. }) => Ok(ComparisonRow::invalid(&p, &e)),
                Err(e) => Err(e),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n_steps: u64,
    pub estimate: MCEstimate,
    /// `|mean - forward closed form|`.
    pub bias: f64,
    pub closed_form: f64,
}

/// Euler scheme for the forward insider at each grid resolution.
pub fn run_convergence(
    p: &MarketParams,
    steps: &[u64],
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<ConvergenceRow>> {
    if n < 2 {
        return Err(Error::BadSampleCount(n));
    }
    if steps.contains(&0) {
        return Err(Error::BadStepCount);
    }
    let cf = forward_expected_wealth(p)?;
    steps
        .iter()
        .map(|&n_steps| {
            let estimate = estimate_mean(&Trader::ForwardEuler { n_steps }, p, n, seed, workers)?;
            Ok(ConvergenceRow {
                n_steps,
                bias: (estimate.mean - cf).abs(),
                estimate,
                closed_form: cf,
            })
        })
        .collect()
}

/// Flat record shared by the comparison CSV and JSON encodings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRecord {
    #[serde(rename = "M")]
    pub m: f64,
    pub rho: f64,
    pub mu: f64,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub regime: Regime,
    pub cf_honest: Option<f64>,
    pub cf_skorokhod: Option<f64>,
    pub cf_forward: Option<f64>,
    pub mc_honest: Option<f64>,
    pub mc_honest_se: Option<f64>,
    pub mc_sk: Option<f64>,
    pub mc_sk_se: Option<f64>,
    pub mc_rs: Option<f64>,
    pub mc_rs_se: Option<f64>,
    pub z_honest: Option<f64>,
    pub z_sk: Option<f64>,
    pub z_rs: Option<f64>,
    pub ordering_pass: Option<bool>,
    pub zero_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<&ComparisonRow> for ComparisonRecord {
    fn from(r: &ComparisonRow) -> Self {
        let p = &r.params;
        let cf = r.closed_form.as_ref();
        let mc = r.simulated.as_ref();
        Self {
            m: p.total_wealth,
            rho: p.bond_rate,
            mu: p.stock_drift,
            sigma: p.volatility,
            t: p.horizon,
            regime: r.regime,
            cf_honest: cf.map(|c| c.honest_optimal),
            cf_skorokhod: cf.map(|c| c.skorokhod),
            cf_forward: cf.map(|c| c.forward),
            mc_honest: mc.map(|m| m.honest.mean),
            mc_honest_se: mc.map(|m| m.honest.stderr),
            mc_sk: mc.map(|m| m.skorokhod.mean),
            mc_sk_se: mc.map(|m| m.skorokhod.stderr),
            mc_rs: mc.map(|m| m.forward.mean),
            mc_rs_se: mc.map(|m| m.forward.stderr),
            z_honest: mc.map(|m| m.z_honest),
            z_sk: mc.map(|m| m.z_skorokhod),
            z_rs: mc.map(|m| m.z_forward),
            ordering_pass: r.ordering_pass(),
            zero_fraction: mc.map(|m| m.skorokhod.zero_fraction),
            error: r.error.clone(),
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

fn write_line(out: &mut String, cells: &[String]) {
    out.push_str(&cells.join(","));
    out.push('\n');
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    out.push_str(&COMPARISON_HEADER.join(","));
    out.push('\n');
    for row in rows {
        let r = ComparisonRecord::from(row);
        let verdict = match r.ordering_pass {
            Some(b) => b.to_string(),
            None => "invalid".to_string(),
        };
        write_line(
            &mut out,
            &[
                fmt_real(r.m),
                fmt_real(r.rho),
                fmt_real(r.mu),
                fmt_real(r.sigma),
                fmt_real(r.t),
                r.regime.to_string(),
                cell(r.cf_honest),
                cell(r.cf_skorokhod),
                cell(r.cf_forward),
                cell(r.mc_honest),
                cell(r.mc_honest_se),
                cell(r.mc_sk),
                cell(r.mc_sk_se),
                cell(r.mc_rs),
                cell(r.mc_rs_se),
                cell(r.z_honest),
                cell(r.z_sk),
                cell(r.z_rs),
                verdict,
                cell(r.zero_fraction),
            ],
        );
    }
    out
}

pub fn closed_form_csv(reports: &[ClosedFormReport]) -> String {
    let mut out = String::new();
    out.push_str(&CLOSED_FORM_HEADER.join(","));
    out.push('\n');
    for c in reports {
        let p = &c.params;
        write_line(
            &mut out,
            &[
                fmt_real(p.total_wealth),
                fmt_real(p.bond_rate),
                fmt_real(p.stock_drift),
                fmt_real(p.volatility),
                fmt_real(p.horizon),
                c.regime.to_string(),
                fmt_real(c.honest_optimal),
                fmt_real(c.skorokhod),
                fmt_real(c.forward),
                fmt_real(c.gaps.honest_minus_skorokhod),
                fmt_real(c.gaps.forward_minus_honest),
                c.ordering_satisfied.to_string(),
                c.outside_positive_hypothesis.to_string(),
            ],
        );
    }
    out
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::new();
    out.push_str(&CONVERGENCE_HEADER.join(","));
    out.push('\n');
    for r in rows {
        write_line(
            &mut out,
            &[
                r.n_steps.to_string(),
                fmt_real(r.estimate.mean),
                fmt_real(r.estimate.stderr),
                fmt_real(r.bias),
                r.estimate.clamp_count.to_string(),
                fmt_real(r.closed_form),
            ],
        );
    }
    out
}

/// Run metadata attached to every JSON document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
}

impl Metadata {
    pub fn new(command: &str, seed: Option<u64>, samples: Option<u64>, timestamp: bool) -> Self {
        let timestamp_unix = timestamp.then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Self {
            tool: "insider",
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            samples,
            timestamp_unix,
        }
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    metadata: &'a Metadata,
    rows: T,
}

fn to_json<T: Serialize>(metadata: &Metadata, rows: T) -> String {
    let mut s = serde_json::to_string_pretty(&Document { metadata, rows })
        .expect("report values serialize");
    s.push('\n');
    s
}

pub fn comparison_json(rows: &[ComparisonRow], metadata: &Metadata) -> String {
    let records: Vec<ComparisonRecord> = rows.iter().map(ComparisonRecord::from).collect();
    to_json(metadata, records)
}

pub fn closed_form_json(reports: &[ClosedFormReport], metadata: &Metadata) -> String {
    to_json(metadata, reports)
}

pub fn convergence_json(rows: &[ConvergenceRow], metadata: &Metadata) -> String {
    #[derive(Serialize)]
    struct Flat {
        n_steps: u64,
        mean: f64,
        stderr: f64,
        bias: f64,
        clamp_count: u64,
        cf_forward: f64,
    }
    let flat: Vec<Flat> = rows
        .iter()
        .map(|r| Flat {
            n_steps: r.n_steps,
            mean: r.estimate.mean,
            stderr: r.estimate.stderr,
            bias: r.bias,
            clamp_count: r.estimate.clamp_count,
            cf_forward: r.closed_form,
        })
        .collect();
    to_json(metadata, flat)
}

/// Human-readable table of a comparison, used by the CLI on a terminal.
pub fn comparison_summary(row: &ComparisonRow) -> String {
    let mut s = String::new();
    let p = &row.params;
    let _ = writeln!(
        s,
        "M={} rho={} mu={} sigma={} T={} regime={}",
        p.total_wealth, p.bond_rate, p.stock_drift, p.volatility, p.horizon, row.regime
    );
    if let Some(e) = &row.error {
        let _ = writeln!(s, "invalid: {e}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::marginal_forward_wealth;
    use crate::market::validate_params;
    use crate::special::erf;

    fn params(m: f64, rho: f64, mu: f64, sigma: f64, t: f64) -> MarketParams {
        validate_params(m, rho, mu, sigma, t).unwrap()
    }

    #[test]
    fn real_formatting_round_trips() {
        for x in [
            0.1,
            1.0 / 3.0,
            1.8871429788350048,
            5e-324,
            1.7976931348623157e308,
            -2.5,
        ] {
            let s = fmt_real(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn compare_row_small_sample() {
        let p = params(1.0, 0.0, 0.5, 1.0, 1.0);
        let row = run_compare(&p, 20_000, 5, 1).unwrap();
        assert!(row.is_valid());
        assert_eq!(row.ordering_pass(), Some(true));
        let sim = row.simulated.as_ref().unwrap();
        assert!(sim.z_skorokhod.abs() < 5.0 && sim.z_forward.abs() < 5.0);
        let csv = comparison_csv(&[row]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), COMPARISON_HEADER.join(","));
        assert_eq!(lines.next().unwrap().split(',').count(), 20);
    }

    #[test]
    fn compare_validates_samples() {
        let p = params(1.0, 0.0, 0.5, 1.0, 1.0);
        assert_eq!(run_compare(&p, 1, 5, 1), Err(Error::BadSampleCount(1)));
    }

    #[test]
    fn marginal_sweep_over_sigma() {
        let base = params(1.0, 0.05, 0.05, 0.2, 1.0);
        let spec = SweepSpec::new(base, SweepField::Sigma, vec![0.1, 0.2, 0.4], 1000, 9).unwrap();
        let rows = run_sweep(&spec, 1).unwrap();
        let mut prev = 0.0;
        for row in &rows {
            let cf = row.closed_form.as_ref().unwrap();
            let ratio = cf.forward / cf.honest_optimal;
            let s = row.params.volatility;
            let want = 1.0 + erf(s / (2.0 * 2f64.sqrt())).unwrap();
            assert!((ratio - want).abs() < 1e-12);
            assert!(ratio > prev);
            prev = ratio;
            assert!((cf.forward - marginal_forward_wealth(&row.params).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_horizon_sweep() {
        let base = params(2.0, 0.05, 0.1, 0.2, 1.0);
        let spec = SweepSpec::new(base, SweepField::Horizon, vec![1e-300], 100, 1).unwrap();
        let row = &run_sweep(&spec, 1).unwrap()[0];
        let cf = row.closed_form.as_ref().unwrap();
        for v in [cf.honest_optimal, cf.skorokhod, cf.forward] {
            assert!((v - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn drift_sweep_crosses_regimes() {
        let base = params(1.0, 0.05, 0.05, 0.3, 2.0);
        let grid = vec![0.0, 0.02, 0.04, 0.05, 0.06, 0.1, 0.3];
        let spec = SweepSpec::new(base, SweepField::Mu, grid, 100, 1).unwrap();
        let rows = run_sweep(&spec, 1).unwrap();
        let regimes: Vec<Regime> = rows.iter().map(|r| r.regime).collect();
        assert!(regimes.contains(&Regime::Bear));
        assert!(regimes.contains(&Regime::Marginal));
        assert!(regimes.contains(&Regime::Bull));
        assert!(rows.iter().all(|r| r.ordering_pass() == Some(true)));
    }

    #[test]
    fn sweep_rejects_invalid_grid() {
        let base = params(1.0, 0.05, 0.05, 0.3, 2.0);
        assert!(SweepSpec::new(base, SweepField::Sigma, vec![0.1, 0.0], 100, 1).is_err());
        assert!(SweepSpec::new(base, SweepField::Rho, vec![-0.1], 100, 1).is_err());
        assert!(SweepField::parse("M").is_err());
    }

    #[test]
    fn overflow_marks_row_invalid() {
        let base = params(1.0, 0.05, 0.1, 0.3, 1.0);
        let spec =
            SweepSpec::new(base, SweepField::Horizon, vec![1.0, 8000.0, 2.0], 100, 1).unwrap();
        let rows = run_sweep(&spec, 1).unwrap();
        assert!(rows[0].is_valid() && rows[2].is_valid());
        assert!(!rows[1].is_valid());
        let csv = comparison_csv(&rows);
        let bad = csv.lines().nth(2).unwrap();
        assert!(bad.contains(",invalid,"));
        let json = comparison_json(&rows, &Metadata::new("sweep", Some(1), Some(100), false));
        assert!(json.contains("\"error\""));
    }

    #[test]
    fn sweep_seeds_advance_per_point() {
        let base = params(1.0, 0.0, 0.5, 1.0, 1.0);
        let spec = SweepSpec::new(base, SweepField::Sigma, vec![1.0, 1.0], 500, 40).unwrap();
        let rows = run_sweep(&spec, 1).unwrap();
        let a = rows[0].simulated.as_ref().unwrap();
        let b = rows[1].simulated.as_ref().unwrap();
        assert_eq!(a.forward.seed, 40);
        assert_eq!(b.forward.seed, 41);
        assert_ne!(a.forward.mean, b.forward.mean);
        let again = run_compare(&base, 500, 41, 1).unwrap();
        assert_eq!(again.simulated.unwrap().forward, b.forward);
    }

    #[test]
    fn convergence_single_step_is_reported() {
        let p = params(1.0, 0.0, 0.5, 1.0, 1.0);
        let rows = run_convergence(&p, &[1], 10_000, 3, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].bias.is_finite());
        assert!(run_convergence(&p, &[1], 1, 3, 1).is_err());
        assert!(run_convergence(&p, &[0], 10, 3, 1).is_err());
        let csv = convergence_csv(&rows);
        assert!(csv.starts_with("n_steps,mean,stderr,bias,clamp_count,cf_forward\n1,"));
    }

    #[test]
    fn json_without_timestamp_is_stable() {
        let p = params(1.0, 0.0, 0.5, 1.0, 1.0);
        let row = run_compare(&p, 1000, 2, 1).unwrap();
        let meta = Metadata::new("compare", Some(2), Some(1000), false);
        let a = comparison_json(std::slice::from_ref(&row), &meta);
        let b = comparison_json(&[run_compare(&p, 1000, 2, 3).unwrap()], &meta);
        assert_eq!(a, b);
        assert!(!a.contains("timestamp"));
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["rows"][0]["regime"], "bull");
        assert_eq!(v["metadata"]["seed"], 2);
        assert!(Metadata::new("compare", None, None, true)
            .timestamp_unix
            .is_some());
    }
}
