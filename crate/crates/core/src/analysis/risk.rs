//! U-statistic risk estimation, the permutation/block decomposition with its
//! exact-identity check, Monte Carlo population risk, and generalization-gap
//! measurement.

use crate::data::{Dataset, GeneratorSpec};
use crate::error::{Error, Result};
use crate::losses::{MinimaxLossModel, PairwiseLossModel};
use crate::rng::stream_rng;
use itertools::Itertools;
use ndarray::Array1;

/// Average of a pair kernel over all n(n−1) ordered pairs of distinct
/// 1-based indices — the order-two U-statistic.
pub fn u_statistic<K: Fn(usize, usize) -> f64>(n: usize, kernel: K) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("u_statistic needs n >= 2".into()));
    }
    let mut sum = 0.0;
    for i in 1..=n {
        for j in 1..=n {
            if i != j {
                sum += kernel(i, j);
            }
        }
    }
    Ok(sum / (n * (n - 1)) as f64)
}

/// Average of the kernel over the ⌊n/2⌋ disjoint pairs
/// (σ(i), σ(⌊n/2⌋+i)) carved out of one permutation σ (1-based entries).
pub fn block_average<K: Fn(usize, usize) -> f64>(n: usize, sigma: &[usize], kernel: K) -> Result<f64> {
    if sigma.len() != n {
        return Err(Error::LengthMismatch { left: sigma.len(), right: n });
    }
    let half = n / 2;
    let mut sum = 0.0;
    for i in 0..half {
        sum += kernel(sigma[i], sigma[half + i]);
    }
    Ok(sum / half as f64)
}

/// Enumerate all n! permutations, average the block estimates, and return
/// the absolute difference from the U-statistic. Exactly zero (up to fp
/// accumulation) for every kernel; restricted to n ≤ 8.
pub fn block_identity_gap<K: Fn(usize, usize) -> f64>(n: usize, kernel: K) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("block identity needs n >= 2".into()));
    }
    if n > 8 {
        return Err(Error::InvalidParameter(
            "block identity check enumerates n! permutations; n must be <= 8".into(),
        ));
    }
    let u = u_statistic(n, &kernel)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for sigma in (1..=n).permutations(n) {
        total += block_average(n, &sigma, &kernel)?;
        count += 1;
    }
    Ok((total / count as f64 - u).abs())
}

/// Eq.-style empirical risk: exact average of ℓ(w; z_i, z_j) over all
/// ordered pairs with i ≠ j.
pub fn empirical_risk_u<L: PairwiseLossModel + ?Sized>(
    w: &Array1<f64>,
    s: &Dataset,
    loss: &L,
) -> Result<f64> {
    loss.check_domain(w)?;
    u_statistic(s.len(), |i, j| loss.value(w, s.sample(i), s.sample(j)))
}

pub fn empirical_risk_u_minimax<L: MinimaxLossModel + ?Sized>(
    w: &Array1<f64>,
    v: &Array1<f64>,
    s: &Dataset,
    loss: &L,
) -> Result<f64> {
    loss.check_domain(w, v)?;
    u_statistic(s.len(), |i, j| loss.value(w, v, s.sample(i), s.sample(j)))
}

/// Block estimate of the empirical risk for one permutation σ.
pub fn block_risk<L: PairwiseLossModel + ?Sized>(
    w: &Array1<f64>,
    s: &Dataset,
    loss: &L,
    sigma: &[usize],
) -> Result<f64> {
    loss.check_domain(w)?;
    block_average(s.len(), sigma, |i, j| loss.value(w, s.sample(i), s.sample(j)))
}

/// max |permutation-averaged block estimate − empirical risk| (n ≤ 8).
pub fn block_risk_identity_check<L: PairwiseLossModel + ?Sized>(
    w: &Array1<f64>,
    s: &Dataset,
    loss: &L,
) -> Result<f64> {
    loss.check_domain(w)?;
    block_identity_gap(s.len(), |i, j| loss.value(w, s.sample(i), s.sample(j)))
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

fn mc_mean(values: &[f64]) -> McEstimate {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    McEstimate { estimate: mean, stderr: (var / m).sqrt() }
}

/// Population risk E_{z,z̃∼D}[ℓ(w, z, z̃)] by Monte Carlo over `m`
/// independent fresh pairs from the generator distribution.
pub fn population_risk_mc<L: PairwiseLossModel + ?Sized>(
    w: &Array1<f64>,
    generator: &GeneratorSpec,
    loss: &L,
    m: usize,
    seed: u64,
) -> Result<McEstimate> {
    if m < 2 {
        return Err(Error::InvalidParameter("population MC needs m >= 2".into()));
    }
    loss.check_domain(w)?;
    let mut rng = stream_rng(seed, "population", 0);
    let values: Vec<f64> = (0..m)
        .map(|_| {
            let z = generator.sample(&mut rng);
            let zt = generator.sample(&mut rng);
            loss.value(w, &z, &zt)
        })
        .collect();
    Ok(mc_mean(&values))
}

pub fn population_risk_mc_minimax<L: MinimaxLossModel + ?Sized>(
    w: &Array1<f64>,
    v: &Array1<f64>,
    generator: &GeneratorSpec,
    loss: &L,
    m: usize,
    seed: u64,
) -> Result<McEstimate> {
    if m < 2 {
        return Err(Error::InvalidParameter("population MC needs m >= 2".into()));
    }
    loss.check_domain(w, v)?;
    let mut rng = stream_rng(seed, "population", 0);
    let values: Vec<f64> = (0..m)
        .map(|_| {
            let z = generator.sample(&mut rng);
            let zt = generator.sample(&mut rng);
            loss.value(w, v, &z, &zt)
        })
        .collect();
    Ok(mc_mean(&values))
}

fn dataset_generator(s: &Dataset) -> Result<&GeneratorSpec> {
    s.provenance().map(|p| &p.spec).ok_or_else(|| {
        Error::ConfigError(
            "dataset has no generator provenance; population risk needs the generator".into(),
        )
    })
}

/// G(S, φ) = R(A(S;φ)) − R_S(A(S;φ)) at the final parameters of a run,
/// with the population term drawn fresh from the dataset's own generator.
pub fn generalization_gap<L: PairwiseLossModel + ?Sized>(
    final_w: &Array1<f64>,
    s: &Dataset,
    loss: &L,
    m: usize,
    seed: u64,
) -> Result<f64> {
    let generator = dataset_generator(s)?;
    let pop = population_risk_mc(final_w, generator, loss, m, seed)?;
    let emp = empirical_risk_u(final_w, s, loss)?;
    Ok(pop.estimate - emp)
}

pub fn generalization_gap_minimax<L: MinimaxLossModel + ?Sized>(
    final_w: &Array1<f64>,
    final_v: &Array1<f64>,
    s: &Dataset,
    loss: &L,
    m: usize,
    seed: u64,
) -> Result<f64> {
    let generator = dataset_generator(s)?;
    let pop = population_risk_mc_minimax(final_w, final_v, generator, loss, m, seed)?;
    let emp = empirical_risk_u_minimax(final_w, final_v, s, loss)?;
    Ok(pop.estimate - emp)
}

/// Monte Carlo estimate of E_{φ∼Q}[G(S, φ)] over trajectories drawn from the
/// configured scheme on a fixed S. Trials own disjoint seed streams, so the
/// rayon fan-out is order-independent.
pub fn expected_gap_over_q<L: PairwiseLossModel + Sync + ?Sized>(
    s: &Dataset,
    loss: &L,
    w1: &Array1<f64>,
    eta: f64,
    t: usize,
    scheme: &crate::sampling::SamplingScheme,
    n_trajectories: usize,
    m_pop: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_trajectories < 2 {
        return Err(Error::InvalidParameter("expected gap needs >= 2 trajectories".into()));
    }
    use rayon::prelude::*;
    let gaps: Result<Vec<f64>> = (0..n_trajectories as u64)
        .into_par_iter()
        .map(|trial| {
            let cfg = crate::optim::RunConfig::new(eta, t, scheme.clone(), seed).with_stream(trial);
            let run = crate::optim::sgd_run(s, loss, w1.clone(), &cfg)?;
            generalization_gap(&run.state.w, s, loss, m_pop, seed ^ (0x9e37_79b9 + trial))
        })
        .collect();
    Ok(mc_mean(&gaps?))
}
