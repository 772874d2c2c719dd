pub mod closed_form;
pub mod config;
pub mod error;
pub mod market;
pub mod montecarlo;
pub mod report;
pub mod samplers;
pub mod sampling;
pub mod special;
pub mod verify;

pub use closed_form::{compare_closed_form, ClosedFormReport};
pub use error::{Error, Result};
pub use market::{Allocation, MarketParams, Regime};
pub use montecarlo::{estimate_mean, z_score, MCEstimate, Trader};
pub use report::{run_compare, run_convergence, run_sweep, ComparisonRow, SweepSpec};
pub use sampling::{BrownianDraw, RngStream};
pub use verify::{run_verify, VerifyOptions};
