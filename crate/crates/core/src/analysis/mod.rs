//! U-statistic risk estimation, generalization-gap measurement, stability
//! probes with theoretical coefficient formulas, sub-exponential tail
//! verification, and the explicit-constant PAC-Bayes bound calculator.

pub mod bound;
pub mod risk;
pub mod stability;
pub mod sweep;

pub use bound::{lambda_from_inputs, pacbayes_bound, BoundInputs, BoundReport};
pub use risk::{
    block_average, block_identity_gap, block_risk, block_risk_identity_check, empirical_risk_u,
    empirical_risk_u_minimax, expected_gap_over_q, generalization_gap, generalization_gap_minimax,
    population_risk_mc, population_risk_mc_minimax, u_statistic, McEstimate,
};
pub use stability::{
    stability_coefficients, stability_probe_sgd, stability_probe_sgda, tail_check,
    trajectory_stability_bound, ProbeOutcome, StabilityCase, StabilityCoefficients,
    StabilityExperiment, StabilityInputs, StabilityReport, StabilityTrial,
};
pub use sweep::{rate_sweep, GapReport, GapRow, SweepSpec};
