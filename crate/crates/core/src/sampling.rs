//! Per-step pair-sampling distributions (uniform prior P, adaptive
//! posteriors Q), trajectory sampling, and the information quantities the
//! bound consumes: KL(Q‖P) along the path and the 6th-order density-ratio
//! moment E_P[(Q/P)⁶].
//!
//! Ordered pairs (i, j) and (j, i), i ≠ j, are distinct support points
//! throughout; indices are 1-based.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{MinimaxLossModel, PairwiseLossModel};
use ndarray::Array1;
use rand::Rng;
use std::fmt;
use std::fs;
use std::path::Path;

/// One sampled pair of distinct sample indices (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairIndex {
    pub i: usize,
    pub j: usize,
}

impl PairIndex {
    pub fn new(i: usize, j: usize, n: usize) -> Result<Self> {
        if i < 1 || i > n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        if j < 1 || j > n {
            return Err(Error::IndexOutOfRange { index: j, n });
        }
        if i == j {
            return Err(Error::InvalidParameter(format!("pair indices must differ, got ({i},{i})")));
        }
        Ok(PairIndex { i, j })
    }
}

impl fmt::Display for PairIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

/// The full sampling hyperparameter φ = (φ₁,…,φ_T).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    n: usize,
    steps: Vec<PairIndex>,
}

impl Trajectory {
    pub fn new(n: usize, steps: Vec<PairIndex>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidParameter("trajectory needs T >= 1 steps".into()));
        }
        for p in &steps {
            PairIndex::new(p.i, p.j, n)?;
        }
        Ok(Trajectory { n, steps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.steps.len()
    }

    pub fn steps(&self) -> &[PairIndex] {
        &self.steps
    }
}

/// Number of steps whose pair touches index k (1-based).
pub fn occupancy(traj: &Trajectory, k: usize) -> Result<usize> {
    if k < 1 || k > traj.n {
        return Err(Error::IndexOutOfRange { index: k, n: traj.n });
    }
    Ok(traj.steps.iter().filter(|p| p.i == k || p.j == k).count())
}

/// max over k ∈ [n] of the occupancy; the quantity the per-trajectory
/// stability bounds are built from.
pub fn max_occupancy(traj: &Trajectory) -> usize {
    let mut counts = vec![0usize; traj.n + 1];
    for p in &traj.steps {
        counts[p.i] += 1;
        counts[p.j] += 1;
    }
    counts.into_iter().max().unwrap_or(0)
}

/// Per-index occupancy bound 2t/n + log(n/δ) + 2√((t/n)·log(n/δ)), i.e. the
/// Chernoff tail Z ≤ μ + log(1/δ') + √(2μ·log(1/δ')) at μ = 2t/n and
/// δ' = δ/n, before the union step over the n indices.
pub fn chernoff_occupancy_bound(t: usize, n: usize, delta: f64) -> Result<f64> {
    if t < 1 {
        return Err(Error::InvalidParameter("t must be >= 1".into()));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("n must be >= 2".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter("delta must lie in (0, 1)".into()));
    }
    let tn = t as f64 / n as f64;
    let log_term = (n as f64 / delta).ln();
    Ok(2.0 * tn + log_term + 2.0 * (tn * log_term).sqrt())
}

/// A categorical distribution over ordered pairs (i, j), i ≠ j.
///
/// The uniform prior is kept symbolic so its mass sums to 1 exactly and
/// KL/moment computations against it short-circuit to their rational values.
#[derive(Debug, Clone, PartialEq)]
pub enum StepDistribution {
    Uniform { n: usize },
    Table { n: usize, probs: Vec<f64>, cum: Vec<f64> },
}

/// Flat index of the ordered pair (i, j) in the canonical enumeration
/// (i ascending, then j ascending skipping the diagonal).
pub fn pair_to_flat(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i != j && 1 <= i && i <= n && 1 <= j && j <= n);
    (i - 1) * (n - 1) + (j - 1) - usize::from(j > i)
}

/// Inverse of [`pair_to_flat`].
pub fn flat_to_pair(flat: usize, n: usize) -> PairIndex {
    let i = flat / (n - 1) + 1;
    let p = flat % (n - 1);
    let j = if p + 1 < i { p + 1 } else { p + 2 };
    PairIndex { i, j }
}

impl StepDistribution {
    /// Uniform distribution over the n(n−1) ordered pairs.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("uniform prior needs n >= 2".into()));
        }
        Ok(StepDistribution::Uniform { n })
    }

    /// Distribution from unnormalized nonnegative weights in canonical order.
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self> {
        let m = n * (n - 1);
        if weights.len() != m {
            return Err(Error::LengthMismatch { left: weights.len(), right: m });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter("weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("weights must have positive total mass".into()));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut cum = Vec::with_capacity(m);
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cum.push(acc);
        }
        Ok(StepDistribution::Table { n, probs, cum })
    }

    pub fn n(&self) -> usize {
        match self {
            StepDistribution::Uniform { n } => *n,
            StepDistribution::Table { n, .. } => *n,
        }
    }

    pub fn support_size(&self) -> usize {
        let n = self.n();
        n * (n - 1)
    }

    /// Probability of the ordered pair (i, j); 0 on the diagonal.
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match self {
            StepDistribution::Uniform { n } => 1.0 / (n * (n - 1)) as f64,
            StepDistribution::Table { n, probs, .. } => probs[pair_to_flat(i, j, *n)],
        }
    }

    fn prob_flat(&self, flat: usize) -> f64 {
        match self {
            StepDistribution::Uniform { n } => 1.0 / (n * (n - 1)) as f64,
            StepDistribution::Table { probs, .. } => probs[flat],
        }
    }

    /// Total mass. Exactly 1 for the uniform prior (m · 1/m by construction).
    pub fn total_mass(&self) -> f64 {
        match self {
            StepDistribution::Uniform { .. } => 1.0,
            StepDistribution::Table { probs, .. } => probs.iter().sum(),
        }
    }

    pub fn sample_pair<R: Rng>(&self, rng: &mut R) -> PairIndex {
        match self {
            StepDistribution::Uniform { n } => {
                let flat = rng.gen_range(0..n * (n - 1));
                flat_to_pair(flat, *n)
            }
            StepDistribution::Table { n, cum, .. } => {
                let u: f64 = rng.gen();
                let target = u * cum[cum.len() - 1];
                let flat = cum.partition_point(|c| *c <= target).min(cum.len() - 1);
                flat_to_pair(flat, *n)
            }
        }
    }
}

/// Families of per-step posteriors Q.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeKind {
    UniformPrior,
    /// score(i,j) = ℓ(state; z_i, z_j) (absolute value for signed losses).
    LossProportional,
    /// score(i,j) = ‖∇ℓ(state; z_i, z_j)‖₂ (joint norm for minimax).
    GradNormProportional,
    /// Fixed table of unnormalized weights, canonical pair order.
    CustomTable(Vec<f64>),
}

impl SchemeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::UniformPrior => "uniform-prior",
            SchemeKind::LossProportional => "loss-proportional",
            SchemeKind::GradNormProportional => "gradnorm-proportional",
            SchemeKind::CustomTable(_) => "custom-table",
        }
    }
}

/// A pair-sampling scheme: the posterior family, the uniform mixing fraction
/// ε ∈ (0, 1] that guarantees absolute continuity w.r.t. the uniform prior,
/// and how often adaptive scores are recomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingScheme {
    pub kind: SchemeKind,
    pub epsilon: f64,
    pub refresh_period: usize,
}

impl SamplingScheme {
    pub fn new(kind: SchemeKind, epsilon: f64, refresh_period: usize) -> Result<Self> {
        if !matches!(kind, SchemeKind::UniformPrior) && !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1], got {epsilon}"
            )));
        }
        if refresh_period < 1 {
            return Err(Error::InvalidParameter("refresh_period must be >= 1".into()));
        }
        Ok(SamplingScheme { kind, epsilon, refresh_period })
    }

    pub fn uniform() -> Self {
        SamplingScheme { kind: SchemeKind::UniformPrior, epsilon: 1.0, refresh_period: 1 }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, SchemeKind::UniformPrior)
    }
}

/// Mix nonnegative scores with the uniform prior:
/// p ∝ (1−ε)·score/Σscore + ε/(n(n−1)). All-zero scores fall back to the
/// uniform prior; ε = 1 is exactly the uniform prior.
pub fn distribution_from_scores(n: usize, scores: &[f64], epsilon: f64) -> Result<StepDistribution> {
    let m = n * (n - 1);
    if scores.len() != m {
        return Err(Error::LengthMismatch { left: scores.len(), right: m });
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter("epsilon must lie in [0, 1]".into()));
    }
    let total: f64 = scores.iter().sum();
    if epsilon == 1.0 || total <= 0.0 {
        return StepDistribution::uniform(n);
    }
    let unif = 1.0 / m as f64;
    let weights: Vec<f64> = scores
        .iter()
        .map(|s| (1.0 - epsilon) * s / total + epsilon * unif)
        .collect();
    StepDistribution::from_weights(n, weights)
}

fn joint_grad_norm(gw: &Array1<f64>, gv: &Array1<f64>) -> f64 {
    (gw.iter().map(|x| x * x).sum::<f64>() + gv.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// Posterior step distribution for a pairwise (SGD) state.
pub fn adaptive_step<L: PairwiseLossModel + ?Sized>(
    scheme: &SamplingScheme,
    w: &Array1<f64>,
    s: &Dataset,
    loss: &L,
) -> Result<StepDistribution> {
    let n = s.len();
    match &scheme.kind {
        SchemeKind::UniformPrior => StepDistribution::uniform(n),
        SchemeKind::CustomTable(weights) => {
            let table = StepDistribution::from_weights(n, weights.clone())?;
            match table {
                StepDistribution::Table { probs, .. } => {
                    distribution_from_scores(n, &probs, scheme.epsilon)
                }
                u => Ok(u),
            }
        }
        SchemeKind::LossProportional | SchemeKind::GradNormProportional => {
            loss.check_domain(w)?;
            let mut scores = Vec::with_capacity(n * (n - 1));
            for i in 1..=n {
                for j in 1..=n {
                    if i == j {
                        continue;
                    }
                    let (zi, zj) = (s.sample(i), s.sample(j));
                    let score = match scheme.kind {
                        SchemeKind::LossProportional => loss.value(w, zi, zj).abs(),
                        _ => {
                            let g = loss.grad_w(w, zi, zj);
                            g.iter().map(|x| x * x).sum::<f64>().sqrt()
                        }
                    };
                    scores.push(score);
                }
            }
            distribution_from_scores(n, &scores, scheme.epsilon)
        }
    }
}

/// Posterior step distribution for a minimax (SGDA) state.
pub fn adaptive_step_minimax<L: MinimaxLossModel + ?Sized>(
    scheme: &SamplingScheme,
    w: &Array1<f64>,
    v: &Array1<f64>,
    s: &Dataset,
    loss: &L,
) -> Result<StepDistribution> {
    let n = s.len();
    match &scheme.kind {
        SchemeKind::UniformPrior => StepDistribution::uniform(n),
        SchemeKind::CustomTable(weights) => {
            let table = StepDistribution::from_weights(n, weights.clone())?;
            match table {
                StepDistribution::Table { probs, .. } => {
                    distribution_from_scores(n, &probs, scheme.epsilon)
                }
                u => Ok(u),
            }
        }
        SchemeKind::LossProportional | SchemeKind::GradNormProportional => {
            loss.check_domain(w, v)?;
            let mut scores = Vec::with_capacity(n * (n - 1));
            for i in 1..=n {
                for j in 1..=n {
                    if i == j {
                        continue;
                    }
                    let (zi, zj) = (s.sample(i), s.sample(j));
                    let score = match scheme.kind {
                        SchemeKind::LossProportional => loss.value(w, v, zi, zj).abs(),
                        _ => joint_grad_norm(&loss.grad_w(w, v, zi, zj), &loss.grad_v(w, v, zi, zj)),
                    };
                    scores.push(score);
                }
            }
            distribution_from_scores(n, &scores, scheme.epsilon)
        }
    }
}

/// Draw a T-step trajectory, one independent draw per step ("with
/// replacement"), deterministic given the RNG stream.
pub fn sample_trajectory<R: Rng>(
    per_step: &[StepDistribution],
    rng: &mut R,
) -> Result<Trajectory> {
    if per_step.is_empty() {
        return Err(Error::InvalidParameter("T must be >= 1".into()));
    }
    let n = per_step[0].n();
    let steps = per_step.iter().map(|dist| dist.sample_pair(rng)).collect();
    Trajectory::new(n, steps)
}

/// Uniform-prior trajectory of length t.
pub fn sample_uniform_trajectory<R: Rng>(n: usize, t: usize, rng: &mut R) -> Result<Trajectory> {
    if t < 1 {
        return Err(Error::InvalidParameter("T must be >= 1".into()));
    }
    let dist = StepDistribution::uniform(n)?;
    let steps = (0..t).map(|_| dist.sample_pair(rng)).collect();
    Trajectory::new(n, steps)
}

/// KL(Q‖P) = Σ Q log(Q/P) over the pair support, with 0·log 0 = 0.
pub fn kl_step(q: &StepDistribution, p: &StepDistribution) -> Result<f64> {
    if q.n() != p.n() {
        return Err(Error::LengthMismatch { left: q.n(), right: p.n() });
    }
    if let (StepDistribution::Uniform { .. }, StepDistribution::Uniform { .. }) = (q, p) {
        return Ok(0.0);
    }
    let n = q.n();
    let mut kl = 0.0;
    for flat in 0..q.support_size() {
        let qx = q.prob_flat(flat);
        if qx == 0.0 {
            continue;
        }
        let px = p.prob_flat(flat);
        if px == 0.0 {
            let pair = flat_to_pair(flat, n);
            return Err(Error::AbsoluteContinuity { i: pair.i, j: pair.j, q: qx });
        }
        kl += qx * (qx / px).ln();
    }
    // fp rounding can leave a tiny negative residue when Q ≈ P
    Ok(kl.max(0.0))
}

/// Chain rule for the product structure Φ = ∏ₜ Φₜ: the trajectory KL is the
/// sum of per-step KLs (adaptive Q evaluated along the realized path).
pub fn kl_trajectory(q_steps: &[StepDistribution], p_steps: &[StepDistribution]) -> Result<f64> {
    if q_steps.len() != p_steps.len() {
        return Err(Error::LengthMismatch { left: q_steps.len(), right: p_steps.len() });
    }
    let mut total = 0.0;
    for (q, p) in q_steps.iter().zip(p_steps) {
        total += kl_step(q, p)?;
    }
    Ok(total)
}

/// E_P[(Q/P)⁶] with its overflow marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Renyi6 {
    pub value: f64,
    pub overflow: bool,
}

/// Single-step 6th-order density-ratio moment Σ Q(x)⁶ / P(x)⁵ (≥ 1).
pub fn renyi6_step(q: &StepDistribution, p: &StepDistribution) -> Result<f64> {
    if q.n() != p.n() {
        return Err(Error::LengthMismatch { left: q.n(), right: p.n() });
    }
    if let (StepDistribution::Uniform { .. }, StepDistribution::Uniform { .. }) = (q, p) {
        return Ok(1.0);
    }
    let n = q.n();
    let mut moment = 0.0;
    for flat in 0..q.support_size() {
        let qx = q.prob_flat(flat);
        if qx == 0.0 {
            continue;
        }
        let px = p.prob_flat(flat);
        if px == 0.0 {
            let pair = flat_to_pair(flat, n);
            return Err(Error::AbsoluteContinuity { i: pair.i, j: pair.j, q: qx });
        }
        let ratio = qx / px;
        moment += px * ratio.powi(6);
    }
    Ok(moment.max(1.0 - 1e-15))
}

/// E_{φ∼P}[(Q(φ)/P(φ))⁶] = ∏ₜ Σ Qₜ(x)⁶/Pₜ(x)⁵ over the product structure.
/// Overflow is reported as +∞ with the flag set rather than as an error.
pub fn renyi_moment6(q_steps: &[StepDistribution], p_steps: &[StepDistribution]) -> Result<Renyi6> {
    if q_steps.len() != p_steps.len() {
        return Err(Error::LengthMismatch { left: q_steps.len(), right: p_steps.len() });
    }
    let mut value = 1.0f64;
    for (q, p) in q_steps.iter().zip(p_steps) {
        value *= renyi6_step(q, p)?;
        if value.is_infinite() {
            return Ok(Renyi6 { value: f64::INFINITY, overflow: true });
        }
    }
    Ok(Renyi6 { value, overflow: false })
}

/// Load a custom pair table: lines `i j weight` (1-based, unnormalized),
/// `#` comments allowed; missing pairs get weight 0.
pub fn load_pair_table(path: &Path, n: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let malformed = |reason: String| Error::MalformedFile {
        path: path.display().to_string(),
        reason,
    };
    let mut weights = vec![0.0; n * (n - 1)];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(malformed(format!("line {}: expected `i j weight`", lineno + 1)));
        }
        let i: usize = fields[0].parse().map_err(|_| malformed(format!("line {}: bad i", lineno + 1)))?;
        let j: usize = fields[1].parse().map_err(|_| malformed(format!("line {}: bad j", lineno + 1)))?;
        let w: f64 = fields[2].parse().map_err(|_| malformed(format!("line {}: bad weight", lineno + 1)))?;
        let pair = PairIndex::new(i, j, n)?;
        if !(w.is_finite() && w >= 0.0) {
            return Err(malformed(format!("line {}: weight must be finite and >= 0", lineno + 1)));
        }
        weights[pair_to_flat(pair.i, pair.j, n)] = w;
    }
    Ok(weights)
}
