//! Statistical invariants of the estimators against the closed forms.

use insider_core::closed_form::forward_expected_wealth;
use insider_core::market::validate_params;
use insider_core::montecarlo::{estimate_mean, z_score, Trader};
use insider_core::report::{run_convergence, run_sweep, SweepField, SweepSpec};
use insider_core::samplers::skorokhod_factorized_estimate;
use insider_core::special::normal_cdf;
use insider_core::{compare_closed_form, Allocation, MarketParams, Regime, RngStream};

const N: u64 = 200_000;

fn grid() -> Vec<MarketParams> {
    [
        (1.0, 0.0, 0.5, 1.0, 1.0),
        (1.0, 0.02, 0.15, 0.25, 3.0),
        (5.0, 0.04, 0.06, 0.1, 0.5),
        (0.2, 0.0, 0.2, 0.8, 2.0),
        (1.0, 0.15, 0.05, 0.3, 1.0),
        (2.0, 0.05, 0.0, 0.6, 0.25),
        (1.0, 0.12, 0.1, 0.05, 6.0),
        (1.0, 0.03, 0.03, 0.4, 1.0),
        (4.0, 0.0, 0.0, 0.9, 2.0),
        (1.0, 0.1, 0.1, 0.15, 8.0),
        (0.5, 0.06, 0.4, 0.5, 1.5),
    ]
    .into_iter()
    .map(|(m, r, mu, s, t)| validate_params(m, r, mu, s, t).unwrap())
    .collect()
}

#[test]
fn grid_covers_every_regime() {
    let regimes: Vec<Regime> = grid().iter().map(MarketParams::regime).collect();
    for r in [Regime::Bull, Regime::Bear, Regime::Marginal] {
        assert!(regimes.contains(&r), "{r} missing");
    }
}

#[test]
fn estimators_are_unbiased_across_grid() {
    for (k, p) in grid().iter().enumerate() {
        let c = compare_closed_form(p).unwrap();
        let seed = 1_000 + k as u64;
        for (trader, cf) in [
            (Trader::HonestOptimal, c.honest_optimal),
            (Trader::SkorokhodUnbiased, c.skorokhod),
            (Trader::ForwardInsider, c.forward),
        ] {
            let est = estimate_mean(&trader, p, N, seed, 1).unwrap();
            let z = z_score(&est, cf).unwrap();
            assert!(z.abs() < 4.0, "{trader:?} at {p:?}: z = {z}");
        }
    }
}

#[test]
fn fixed_split_honest_trader_is_unbiased() {
    let p = validate_params(3.0, 0.05, 0.12, 0.3, 2.0).unwrap();
    let a = Allocation::new(&p, 1.0, 2.0).unwrap();
    let want = 1.0 * (0.05f64 * 2.0).exp() + 2.0 * (0.12f64 * 2.0).exp();
    let est = estimate_mean(&Trader::HonestFixed(a), &p, N, 77, 1).unwrap();
    assert!(z_score(&est, want).unwrap().abs() < 4.0);
}

#[test]
fn factorized_and_translation_skorokhod_agree() {
    for (k, p) in grid().iter().enumerate() {
        let seed = 5_000 + 2 * k as u64;
        let sk = estimate_mean(&Trader::SkorokhodUnbiased, p, N, seed, 1).unwrap();
        let fac = skorokhod_factorized_estimate(p, &RngStream::new(seed + 1), N, 1).unwrap();
        let combined = (sk.stderr.powi(2) + fac.stderr.powi(2)).sqrt();
        assert!(
            (sk.mean - fac.mean).abs() < 4.0 * combined,
            "{p:?}: {} vs {}",
            sk.mean,
            fac.mean
        );
        let cf = compare_closed_form(p).unwrap().skorokhod;
        assert!(z_score(&fac, cf).unwrap().abs() < 4.0);
    }
}

#[test]
fn dead_zone_mass_matches_normal_interval() {
    for p in grid() {
        let sqrt_t = p.horizon.sqrt();
        let a = p.indicator_threshold();
        let want = normal_cdf((a + p.volatility * p.horizon) / sqrt_t).unwrap()
            - normal_cdf(a / sqrt_t).unwrap();
        let est = estimate_mean(&Trader::SkorokhodUnbiased, &p, N, 31, 1).unwrap();
        let se = (want * (1.0 - want) / N as f64).sqrt().max(1.0 / N as f64);
        assert!(
            (est.zero_fraction - want).abs() < 4.0 * se,
            "{p:?}: {} vs {want}",
            est.zero_fraction
        );
    }
}

#[test]
fn euler_bias_shrinks_with_refinement() {
    let p = validate_params(1.0, 0.0, 0.5, 1.0, 1.0).unwrap();
    let rows = run_convergence(&p, &[2, 32], N, 9, 1).unwrap();
    let cf = forward_expected_wealth(&p).unwrap();
    assert_eq!(rows[0].closed_form, cf);
    // Coarse grid bias is far above noise; the fine grid is within noise.
    assert!(rows[0].bias > 10.0 * rows[0].estimate.stderr);
    assert!(rows[1].bias < rows[0].bias / 4.0);
    assert!(rows[1].bias < 4.0 * rows[1].estimate.stderr + 0.01);
}

#[test]
fn forward_mean_exceeds_honest_across_sweep() {
    let base = validate_params(1.0, 0.04, 0.04, 0.3, 1.0).unwrap();
    let spec = SweepSpec::new(base, SweepField::Mu, vec![0.0, 0.04, 0.08, 0.2], 20_000, 3).unwrap();
    for row in run_sweep(&spec, 2).unwrap() {
        let sim = row.simulated.as_ref().unwrap();
        assert!(sim.forward.mean > sim.honest.mean);
        assert_eq!(row.ordering_pass(), Some(true));
    }
}

#[test]
fn sweep_is_worker_invariant() {
    let base = validate_params(1.0, 0.0, 0.5, 1.0, 1.0).unwrap();
    let spec = SweepSpec::new(base, SweepField::Sigma, vec![0.5, 1.0, 2.0], 30_000, 12).unwrap();
    assert_eq!(run_sweep(&spec, 1).unwrap(), run_sweep(&spec, 5).unwrap());
}
