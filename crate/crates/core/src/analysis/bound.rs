//! Explicit-constant PAC-Bayes bound calculator.
//!
//! λ = min{ 1/(192e√2·(c₁+c₂·log(1/δ))·⌈log₂(n−1)⌉), √(n−1)/(16√K₁·M) },
//! main term (KL(Q‖P) + log(1/δ′) + 3)/λ, residual M·n^{−5/6}·(E_P[(Q/P)⁶])^{1/6}.
//! 1/λ equals the max of the two prefactor branches, so the max-form total
//! coincides with main + residual; both are reported.

use crate::analysis::stability::StabilityCoefficients;
use crate::error::{Error, Result};
use crate::report::Report;
use std::f64::consts::E;

/// Every input the bound was evaluated at, stored so the report re-derives
/// bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub kl: f64,
    pub renyi6: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub c1: f64,
    pub c2: f64,
    pub n: usize,
    pub m_bound: f64,
    pub k1: f64,
}

/// Output of [`pacbayes_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub lambda: f64,
    pub main_term: f64,
    pub residual_term: f64,
    pub total: f64,
    /// The two λ branches: coefficient branch and MGF branch.
    pub lambda_branch_coeff: f64,
    pub lambda_branch_mgf: f64,
    /// max-form prefactor = 1/λ; the max-form total equals main + residual.
    pub max_prefactor: f64,
    pub inputs: BoundInputs,
    pub notes: Vec<String>,
}

pub(crate) fn ceil_log2(m: usize) -> f64 {
    if m <= 1 {
        0.0
    } else {
        (m as f64).log2().ceil()
    }
}

/// λ from the stored inputs; the report invariant is that this recomputation
/// is bit-identical to the stored λ.
pub fn lambda_from_inputs(inputs: &BoundInputs) -> (f64, f64, f64) {
    let coeff_term = inputs.c1 + inputs.c2 * (1.0 / inputs.delta).ln();
    let log_factor = ceil_log2(inputs.n - 1);
    let denom = 192.0 * E * 2.0f64.sqrt() * coeff_term * log_factor;
    let branch_coeff = if denom > 0.0 { 1.0 / denom } else { f64::INFINITY };
    let branch_mgf = ((inputs.n - 1) as f64).sqrt() / (16.0 * inputs.k1.sqrt() * inputs.m_bound);
    (branch_coeff.min(branch_mgf), branch_coeff, branch_mgf)
}

/// Evaluate the bound. `delta` is the tail level of the stability assumption
/// (the derivation fixes δ = 1/n; any δ ∈ (0, 1/n] is allowed), `delta_prime`
/// the confidence of the final statement.
pub fn pacbayes_bound(
    kl: f64,
    renyi6: f64,
    delta: f64,
    delta_prime: f64,
    coeffs: &StabilityCoefficients,
    n: usize,
    m_bound: f64,
    k1: f64,
) -> Result<BoundReport> {
    if !(kl >= 0.0 && kl.is_finite()) {
        return Err(Error::InvalidParameter("kl must be finite and >= 0".into()));
    }
    if !(renyi6 >= 1.0 - 1e-12) {
        return Err(Error::InvalidParameter("renyi6 must be >= 1".into()));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("n must be >= 2".into()));
    }
    if !(delta > 0.0 && delta <= 1.0 / n as f64) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1/n] = (0, {}], got {delta}",
            1.0 / n as f64
        )));
    }
    if !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(Error::InvalidParameter("delta_prime must lie in (0, 1)".into()));
    }
    if !(m_bound > 0.0) {
        return Err(Error::InvalidParameter("M must be positive".into()));
    }
    if !(k1 > 0.0) {
        return Err(Error::InvalidParameter("K1 must be positive".into()));
    }

    let inputs = BoundInputs {
        kl,
        renyi6,
        delta,
        delta_prime,
        c1: coeffs.c1,
        c2: coeffs.c2,
        n,
        m_bound,
        k1,
    };
    let (lambda, branch_coeff, branch_mgf) = lambda_from_inputs(&inputs);
    let main_term = (kl + (1.0 / delta_prime).ln() + 3.0) / lambda;
    let residual_term = m_bound * (n as f64).powf(-5.0 / 6.0) * renyi6.powf(1.0 / 6.0);
    let notes = coeffs.notes.iter().map(|s| s.to_string()).collect();
    Ok(BoundReport {
        lambda,
        main_term,
        residual_term,
        total: main_term + residual_term,
        lambda_branch_coeff: branch_coeff,
        lambda_branch_mgf: branch_mgf,
        max_prefactor: 1.0 / lambda,
        inputs,
        notes,
    })
}

impl BoundReport {
    /// Re-derive λ, main, residual from the stored inputs; used by the
    /// internal-consistency invariant (must be bit-exact).
    pub fn rederive(&self) -> (f64, f64, f64) {
        let (lambda, _, _) = lambda_from_inputs(&self.inputs);
        let main = (self.inputs.kl + (1.0 / self.inputs.delta_prime).ln() + 3.0) / lambda;
        let residual = self.inputs.m_bound
            * (self.inputs.n as f64).powf(-5.0 / 6.0)
            * self.inputs.renyi6.powf(1.0 / 6.0);
        (lambda, main, residual)
    }

    pub fn to_report(&self, config_hash: &str) -> Report {
        let mut r = Report::new();
        r.push("record", "bound");
        r.push("config_hash", config_hash);
        r.push("kl", self.inputs.kl);
        r.push("renyi6", self.inputs.renyi6);
        r.push("delta", self.inputs.delta);
        r.push("delta_prime", self.inputs.delta_prime);
        r.push("c1", self.inputs.c1);
        r.push("c2", self.inputs.c2);
        r.push("n", self.inputs.n);
        r.push("m_bound", self.inputs.m_bound);
        r.push("k1", self.inputs.k1);
        r.push("lambda", self.lambda);
        r.push("lambda_branch_coeff", self.lambda_branch_coeff);
        r.push("lambda_branch_mgf", self.lambda_branch_mgf);
        r.push("max_prefactor", self.max_prefactor);
        r.push("main_term", self.main_term);
        r.push("residual_term", self.residual_term);
        r.push("total", self.total);
        for note in &self.notes {
            r.push("note", note);
        }
        r.csv_header = Some("term,value".into());
        r.csv_rows.push(format!("lambda,{}", self.lambda));
        r.csv_rows.push(format!("main,{}", self.main_term));
        r.csv_rows.push(format!("residual,{}", self.residual_term));
        r.csv_rows.push(format!("total,{}", self.total));
        r
    }

    pub fn from_report(r: &Report) -> Result<BoundReport> {
        let inputs = BoundInputs {
            kl: r.require_f64("kl")?,
            renyi6: r.require_f64("renyi6")?,
            delta: r.require_f64("delta")?,
            delta_prime: r.require_f64("delta_prime")?,
            c1: r.require_f64("c1")?,
            c2: r.require_f64("c2")?,
            n: r.require_usize("n")?,
            m_bound: r.require_f64("m_bound")?,
            k1: r.require_f64("k1")?,
        };
        Ok(BoundReport {
            lambda: r.require_f64("lambda")?,
            main_term: r.require_f64("main_term")?,
            residual_term: r.require_f64("residual_term")?,
            total: r.require_f64("total")?,
            lambda_branch_coeff: r.require_f64("lambda_branch_coeff")?,
            lambda_branch_mgf: r.require_f64("lambda_branch_mgf")?,
            max_prefactor: r.require_f64("max_prefactor")?,
            inputs,
            notes: vec![],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::stability::{StabilityCase, StabilityCoefficients, StabilityInputs};
    use approx::assert_abs_diff_eq;

    fn raw_coeffs(c1: f64, c2: f64) -> StabilityCoefficients {
        StabilityCoefficients {
            c1,
            c2,
            case: StabilityCase::SgdSmooth,
            inputs: StabilityInputs { lipschitz: 1.0, alpha: Some(1.0), eta: 0.1, t: 1, n: 101 },
            exp_factor: None,
            notes: vec![],
        }
    }

    #[test]
    fn lambda_worked_example() {
        // c1 + c2·log(1/δ) = 0.01 with c2 = 0, n = 101, M = 1, K1 = 1
        let coeffs = raw_coeffs(0.01, 0.0);
        let b = pacbayes_bound(0.0, 1.0, 1.0 / 101.0, 0.05, &coeffs, 101, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(b.lambda, 0.019355, epsilon = 1e-6);
        assert_abs_diff_eq!(b.lambda, 0.019_354_914_249_363_42, epsilon = 1e-12);
        assert!(b.lambda_branch_coeff < b.lambda_branch_mgf, "first branch must be active");
        assert_abs_diff_eq!(b.lambda_branch_mgf, 10.0 / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn main_term_at_kl_zero_and_delta_prime_e3() {
        let coeffs = raw_coeffs(0.01, 0.0);
        let b =
            pacbayes_bound(0.0, 1.0, 1.0 / 101.0, (-3.0f64).exp(), &coeffs, 101, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(b.main_term, 6.0 / b.lambda, epsilon = 1e-9);
    }

    #[test]
    fn residual_at_unit_moment() {
        let coeffs = raw_coeffs(0.01, 0.0);
        let m = 2.5;
        let b = pacbayes_bound(0.0, 1.0, 1.0 / 101.0, 0.05, &coeffs, 101, m, 1.0).unwrap();
        assert_abs_diff_eq!(b.residual_term, m * (101f64).powf(-5.0 / 6.0), epsilon = 1e-15);
    }

    #[test]
    fn rederivation_is_bit_exact_and_total_is_monotone() {
        let coeffs = raw_coeffs(0.3, 0.05);
        let b = pacbayes_bound(1.2, 3.7, 1.0 / 64.0, 0.02, &coeffs, 64, 5.0, 1.0).unwrap();
        let (lambda, main, residual) = b.rederive();
        assert_eq!(lambda, b.lambda);
        assert_eq!(main, b.main_term);
        assert_eq!(residual, b.residual_term);
        assert_eq!(b.max_prefactor, 1.0 / b.lambda);

        // strictly increasing in kl and in log(1/δ′)
        let b_kl = pacbayes_bound(1.3, 3.7, 1.0 / 64.0, 0.02, &coeffs, 64, 5.0, 1.0).unwrap();
        assert!(b_kl.total > b.total);
        let b_dp = pacbayes_bound(1.2, 3.7, 1.0 / 64.0, 0.01, &coeffs, 64, 5.0, 1.0).unwrap();
        assert!(b_dp.total > b.total);
    }

    #[test]
    fn zero_coefficients_fall_back_to_mgf_branch() {
        let coeffs = raw_coeffs(0.0, 0.0);
        let b = pacbayes_bound(0.0, 1.0, 1.0 / 50.0, 0.05, &coeffs, 50, 1.0, 1.0).unwrap();
        assert_eq!(b.lambda, b.lambda_branch_mgf);
        assert!(b.lambda_branch_coeff.is_infinite());
    }

    #[test]
    fn n_equal_two_has_zero_log_factor() {
        // ⌈log2(1)⌉ = 0 → coefficient branch infinite → MGF branch active
        let coeffs = raw_coeffs(0.5, 0.5);
        let b = pacbayes_bound(0.0, 1.0, 0.5, 0.05, &coeffs, 2, 1.0, 1.0).unwrap();
        assert_eq!(b.lambda, b.lambda_branch_mgf);
    }

    #[test]
    fn input_validation() {
        let coeffs = raw_coeffs(0.1, 0.1);
        assert!(pacbayes_bound(-1.0, 1.0, 0.01, 0.05, &coeffs, 50, 1.0, 1.0).is_err());
        assert!(pacbayes_bound(0.0, 0.5, 0.01, 0.05, &coeffs, 50, 1.0, 1.0).is_err());
        assert!(pacbayes_bound(0.0, 1.0, 0.5, 0.05, &coeffs, 50, 1.0, 1.0).is_err(), "delta > 1/n");
        assert!(pacbayes_bound(0.0, 1.0, 0.01, 1.5, &coeffs, 50, 1.0, 1.0).is_err());
        assert!(pacbayes_bound(0.0, 1.0, 0.01, 0.05, &coeffs, 50, 0.0, 1.0).is_err());
        assert!(pacbayes_bound(0.0, 1.0, 0.01, 0.05, &coeffs, 50, 1.0, 0.0).is_err());
    }

    #[test]
    fn report_round_trip_rederives() {
        let coeffs = raw_coeffs(0.3, 0.05);
        let b = pacbayes_bound(1.2, 3.7, 1.0 / 64.0, 0.02, &coeffs, 64, 5.0, 1.0).unwrap();
        let text = b.to_report("cafef00d").render();
        let parsed = Report::parse(&text).unwrap();
        let back = BoundReport::from_report(&parsed).unwrap();
        let (lambda, main, residual) = back.rederive();
        assert_eq!(lambda, back.lambda);
        assert_eq!(main, back.main_term);
        assert_eq!(residual, back.residual_term);
    }
}
