//! Pairwise SGD and pairwise SGDA engines with fixed step sizes, full
//! trajectory recording for downstream analysis, and the (T, η) recipes.
//!
//! The engines have no projection step: feasibility is established up front
//! by the step budget ‖w₁‖₂ + T·η·L ≤ R_w (a config error if violated) and
//! re-asserted on every finished run via ‖w_T − w₁‖₂ ≤ T·η·L.
//! The output parameter is the last iterate.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{MinimaxLossModel, PairwiseLossModel};
use crate::report::{decode_vec, encode_vec, Report};
use crate::rng::stream_rng;
use crate::sampling::{
    adaptive_step, adaptive_step_minimax, kl_step, renyi6_step, PairIndex, Renyi6, SamplingScheme,
    StepDistribution, Trajectory,
};
use ndarray::Array1;
use std::path::Path;

/// Iterate of pairwise SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState {
    pub w: Array1<f64>,
    /// Iterations completed.
    pub t: usize,
    pub eta: f64,
}

/// Iterate of pairwise SGDA.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdaState {
    pub w: Array1<f64>,
    pub v: Array1<f64>,
    pub t: usize,
    pub eta: f64,
}

/// w ← w − η∇ℓ(w; z_i, z_j).
pub fn sgd_step<L: PairwiseLossModel + ?Sized>(
    mut state: SgdState,
    pair: PairIndex,
    s: &Dataset,
    loss: &L,
) -> SgdState {
    let g = loss.grad_w(&state.w, s.sample(pair.i), s.sample(pair.j));
    state.w.scaled_add(-state.eta, &g);
    state.t += 1;
    state
}

/// Simultaneous two-block update with both gradients taken at (wₜ, vₜ):
/// w ← w − η∇_w ℓ, v ← v + η∇_v ℓ.
pub fn sgda_step<L: MinimaxLossModel + ?Sized>(
    mut state: SgdaState,
    pair: PairIndex,
    s: &Dataset,
    loss: &L,
) -> SgdaState {
    let (zi, zj) = (s.sample(pair.i), s.sample(pair.j));
    let gw = loss.grad_w(&state.w, &state.v, zi, zj);
    let gv = loss.grad_v(&state.w, &state.v, zi, zj);
    state.w.scaled_add(-state.eta, &gw);
    state.v.scaled_add(state.eta, &gv);
    state.t += 1;
    state
}

/// Run configuration shared by both engines.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub eta: f64,
    pub t: usize,
    pub scheme: SamplingScheme,
    /// Root seed; the trajectory stream is `(seed, "trajectory", stream)`.
    pub seed: u64,
    pub stream: u64,
    pub config_hash: String,
    pub record_snapshots: bool,
}

impl RunConfig {
    pub fn new(eta: f64, t: usize, scheme: SamplingScheme, seed: u64) -> Self {
        RunConfig {
            eta,
            t,
            scheme,
            seed,
            stream: 0,
            config_hash: String::new(),
            record_snapshots: false,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = hash.into();
        self
    }

    fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::ConfigError("T must be >= 1".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::ConfigError("eta must be positive and finite".into()));
        }
        Ok(())
    }
}

fn norm2(x: &Array1<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_budget(label: &str, start_norm: f64, t: usize, eta: f64, l: f64, radius: f64) -> Result<()> {
    let reach = start_norm + t as f64 * eta * l;
    if reach > radius * (1.0 + 1e-12) {
        return Err(Error::ConfigError(format!(
            "step budget violated for {label}: ‖start‖ + T·η·L = {reach} > {radius}; \
             shrink T·η or enlarge the domain radius"
        )));
    }
    Ok(())
}

/// A finished run: everything needed to replay it bit-exactly and to feed
/// the bound calculator (path KL and 6th-moment against the uniform prior).
#[derive(Debug, Clone)]
pub struct SgdRun {
    pub state: SgdState,
    pub trajectory: Trajectory,
    /// (1/T) Σ_{k=1..T} w^{(k)}, for diagnostics; the output parameter is
    /// `state.w` (the last iterate).
    pub averaged_w: Array1<f64>,
    pub w1: Array1<f64>,
    pub kl_path: f64,
    pub renyi6_path: Renyi6,
    pub seed: u64,
    pub stream: u64,
    pub config_hash: String,
    pub snapshots: Option<Vec<Array1<f64>>>,
}

/// Execute T SGD steps, sampling each φₜ from the scheme (adaptive scores
/// recomputed every `refresh_period` steps) and accumulating path KL and
/// density-ratio moment against the uniform prior.
pub fn sgd_run<L: PairwiseLossModel + ?Sized>(
    s: &Dataset,
    loss: &L,
    w1: Array1<f64>,
    cfg: &RunConfig,
) -> Result<SgdRun> {
    cfg.validate()?;
    loss.check_domain(&w1)?;
    let consts = loss.constants();
    check_budget("sgd", norm2(&w1), cfg.t, cfg.eta, consts.lipschitz, consts.domain_radius)?;

    let n = s.len();
    let prior = StepDistribution::uniform(n)?;
    let mut rng = stream_rng(cfg.seed, "trajectory", cfg.stream);
    let mut state = SgdState { w: w1.clone(), t: 0, eta: cfg.eta };
    let mut steps = Vec::with_capacity(cfg.t);
    let mut averaged = Array1::<f64>::zeros(w1.len());
    let mut snapshots = cfg.record_snapshots.then(Vec::new);
    let mut kl_path = 0.0;
    let mut renyi = 1.0f64;
    let mut current: Option<StepDistribution> = None;

    for step_idx in 0..cfg.t {
        if cfg.scheme.is_uniform() {
            if current.is_none() {
                current = Some(prior.clone());
            }
        } else if step_idx % cfg.scheme.refresh_period == 0 {
            current = Some(adaptive_step(&cfg.scheme, &state.w, s, loss)?);
        }
        let dist = current.as_ref().expect("distribution initialized");
        kl_path += kl_step(dist, &prior)?;
        renyi *= renyi6_step(dist, &prior)?;
        let pair = dist.sample_pair(&mut rng);
        steps.push(pair);
        state = sgd_step(state, pair, s, loss);
        averaged += &state.w;
        if let Some(snaps) = snapshots.as_mut() {
            snaps.push(state.w.clone());
        }
    }
    averaged /= cfg.t as f64;

    let drift = norm2(&(&state.w - &w1));
    let budget = cfg.t as f64 * cfg.eta * consts.lipschitz;
    if drift > budget * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::DomainViolation(format!(
            "run drifted {drift}, beyond the certified budget {budget}"
        )));
    }

    Ok(SgdRun {
        state,
        trajectory: Trajectory::new(n, steps)?,
        averaged_w: averaged,
        w1,
        kl_path,
        renyi6_path: Renyi6 { value: renyi, overflow: renyi.is_infinite() },
        seed: cfg.seed,
        stream: cfg.stream,
        config_hash: cfg.config_hash.clone(),
        snapshots,
    })
}

/// Re-apply a recorded trajectory (bypassing sampling); reproduces the
/// original final state bit-exactly.
pub fn replay_sgd<L: PairwiseLossModel + ?Sized>(
    s: &Dataset,
    loss: &L,
    w1: Array1<f64>,
    eta: f64,
    trajectory: &Trajectory,
) -> Result<SgdState> {
    loss.check_domain(&w1)?;
    let mut state = SgdState { w: w1, t: 0, eta };
    for pair in trajectory.steps() {
        state = sgd_step(state, *pair, s, loss);
    }
    Ok(state)
}

/// A finished SGDA run.
#[derive(Debug, Clone)]
pub struct SgdaRun {
    pub state: SgdaState,
    pub trajectory: Trajectory,
    pub averaged_w: Array1<f64>,
    pub averaged_v: Array1<f64>,
    pub w1: Array1<f64>,
    pub v1: Array1<f64>,
    pub kl_path: f64,
    pub renyi6_path: Renyi6,
    pub seed: u64,
    pub stream: u64,
    pub config_hash: String,
}

/// SGDA analogue of [`sgd_run`] with the simultaneous two-block update.
pub fn sgda_run<L: MinimaxLossModel + ?Sized>(
    s: &Dataset,
    loss: &L,
    w1: Array1<f64>,
    v1: Array1<f64>,
    cfg: &RunConfig,
) -> Result<SgdaRun> {
    cfg.validate()?;
    loss.check_domain(&w1, &v1)?;
    let consts = loss.constants();
    check_budget("sgda w-block", norm2(&w1), cfg.t, cfg.eta, consts.lipschitz, consts.domain_radius_w)?;
    check_budget("sgda v-block", norm2(&v1), cfg.t, cfg.eta, consts.lipschitz, consts.domain_radius_v)?;

    let n = s.len();
    let prior = StepDistribution::uniform(n)?;
    let mut rng = stream_rng(cfg.seed, "trajectory", cfg.stream);
    let mut state = SgdaState { w: w1.clone(), v: v1.clone(), t: 0, eta: cfg.eta };
    let mut steps = Vec::with_capacity(cfg.t);
    let mut averaged_w = Array1::<f64>::zeros(w1.len());
    let mut averaged_v = Array1::<f64>::zeros(v1.len());
    let mut kl_path = 0.0;
    let mut renyi = 1.0f64;
    let mut current: Option<StepDistribution> = None;

    for step_idx in 0..cfg.t {
        if cfg.scheme.is_uniform() {
            if current.is_none() {
                current = Some(prior.clone());
            }
        } else if step_idx % cfg.scheme.refresh_period == 0 {
            current = Some(adaptive_step_minimax(&cfg.scheme, &state.w, &state.v, s, loss)?);
        }
        let dist = current.as_ref().expect("distribution initialized");
        kl_path += kl_step(dist, &prior)?;
        renyi *= renyi6_step(dist, &prior)?;
        let pair = dist.sample_pair(&mut rng);
        steps.push(pair);
        state = sgda_step(state, pair, s, loss);
        averaged_w += &state.w;
        averaged_v += &state.v;
    }
    averaged_w /= cfg.t as f64;
    averaged_v /= cfg.t as f64;

    let drift_w = norm2(&(&state.w - &w1));
    let drift_v = norm2(&(&state.v - &v1));
    let budget = cfg.t as f64 * cfg.eta * consts.lipschitz;
    if drift_w.max(drift_v) > budget * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::DomainViolation(format!(
            "run drifted ({drift_w}, {drift_v}), beyond the certified budget {budget}"
        )));
    }

    Ok(SgdaRun {
        state,
        trajectory: Trajectory::new(n, steps)?,
        averaged_w,
        averaged_v,
        w1,
        v1,
        kl_path,
        renyi6_path: Renyi6 { value: renyi, overflow: renyi.is_infinite() },
        seed: cfg.seed,
        stream: cfg.stream,
        config_hash: cfg.config_hash.clone(),
    })
}

pub fn replay_sgda<L: MinimaxLossModel + ?Sized>(
    s: &Dataset,
    loss: &L,
    w1: Array1<f64>,
    v1: Array1<f64>,
    eta: f64,
    trajectory: &Trajectory,
) -> Result<SgdaState> {
    loss.check_domain(&w1, &v1)?;
    let mut state = SgdaState { w: w1, v: v1, t: 0, eta };
    for pair in trajectory.steps() {
        state = sgda_step(state, *pair, s, loss);
    }
    Ok(state)
}

/// Replay a recorded trajectory while re-deriving the step distribution the
/// scheme used at each refresh, and accumulate KL(Q‖P) and E_P[(Q/P)⁶] along
/// the path. The state evolves deterministically from the recorded pairs, so
/// this reproduces the run's path information without storing distributions.
pub fn replay_path_information_sgd<L: PairwiseLossModel + ?Sized>(
    s: &Dataset,
    loss: &L,
    w1: Array1<f64>,
    eta: f64,
    scheme: &SamplingScheme,
    trajectory: &Trajectory,
) -> Result<(f64, Renyi6)> {
    loss.check_domain(&w1)?;
    let prior = StepDistribution::uniform(s.len())?;
    let mut state = SgdState { w: w1, t: 0, eta };
    let mut kl = 0.0;
    let mut renyi = 1.0f64;
    let mut current: Option<StepDistribution> = None;
    for (step_idx, pair) in trajectory.steps().iter().enumerate() {
        if scheme.is_uniform() {
            if current.is_none() {
                current = Some(prior.clone());
            }
        } else if step_idx % scheme.refresh_period == 0 {
            current = Some(adaptive_step(scheme, &state.w, s, loss)?);
        }
        let dist = current.as_ref().expect("distribution initialized");
        kl += kl_step(dist, &prior)?;
        renyi *= renyi6_step(dist, &prior)?;
        state = sgd_step(state, *pair, s, loss);
    }
    Ok((kl, Renyi6 { value: renyi, overflow: renyi.is_infinite() }))
}

/// SGDA analogue of [`replay_path_information_sgd`].
pub fn replay_path_information_sgda<L: MinimaxLossModel + ?Sized>(
    s: &Dataset,
    loss: &L,
    w1: Array1<f64>,
    v1: Array1<f64>,
    eta: f64,
    scheme: &SamplingScheme,
    trajectory: &Trajectory,
) -> Result<(f64, Renyi6)> {
    loss.check_domain(&w1, &v1)?;
    let prior = StepDistribution::uniform(s.len())?;
    let mut state = SgdaState { w: w1, v: v1, t: 0, eta };
    let mut kl = 0.0;
    let mut renyi = 1.0f64;
    let mut current: Option<StepDistribution> = None;
    for (step_idx, pair) in trajectory.steps().iter().enumerate() {
        if scheme.is_uniform() {
            if current.is_none() {
                current = Some(prior.clone());
            }
        } else if step_idx % scheme.refresh_period == 0 {
            current = Some(adaptive_step_minimax(scheme, &state.w, &state.v, s, loss)?);
        }
        let dist = current.as_ref().expect("distribution initialized");
        kl += kl_step(dist, &prior)?;
        renyi *= renyi6_step(dist, &prior)?;
        state = sgda_step(state, *pair, s, loss);
    }
    Ok((kl, Renyi6 { value: renyi, overflow: renyi.is_infinite() }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Sgd,
    Sgda,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Sgd => "sgd",
            Algorithm::Sgda => "sgda",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Algorithm::Sgd),
            "sgda" => Ok(Algorithm::Sgda),
            other => Err(Error::InvalidParameter(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothnessCase {
    Smooth,
    NonSmooth,
}

impl SmoothnessCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            SmoothnessCase::Smooth => "smooth",
            SmoothnessCase::NonSmooth => "nonsmooth",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(SmoothnessCase::Smooth),
            "nonsmooth" => Ok(SmoothnessCase::NonSmooth),
            other => Err(Error::InvalidParameter(format!("unknown case `{other}`"))),
        }
    }
}

/// The (T, η) recipes behind the summary rates: smooth → T = ⌈c·n⌉,
/// η = c/√T; non-smooth → T = ⌈c·n²⌉, η = c·T^{−3/4}. `scale_c` exposes the
/// constants the asymptotic orders hide (default 1). Both algorithms use the
/// same orders.
pub fn recipe(
    _algorithm: Algorithm,
    case: SmoothnessCase,
    n: usize,
    scale_c: f64,
) -> Result<(usize, f64)> {
    if n < 2 {
        return Err(Error::InvalidParameter("recipe needs n >= 2".into()));
    }
    if !(scale_c > 0.0 && scale_c.is_finite()) {
        return Err(Error::InvalidParameter("scale_c must be positive".into()));
    }
    let n = n as f64;
    match case {
        SmoothnessCase::Smooth => {
            let t = (scale_c * n).ceil() as usize;
            Ok((t, scale_c / (t as f64).sqrt()))
        }
        SmoothnessCase::NonSmooth => {
            let t = (scale_c * n * n).ceil() as usize;
            Ok((t, scale_c * (t as f64).powf(-0.75)))
        }
    }
}

/// RunRecord file: `key = value` header plus one `t i j` line per step.
pub fn save_run_record_sgd(run: &SgdRun, s: &Dataset, path: &Path) -> Result<()> {
    let mut r = Report::new();
    r.push("record", "run");
    r.push("algorithm", "sgd");
    r.push("config_hash", &run.config_hash);
    r.push("seed", run.seed);
    r.push("stream", run.stream);
    r.push("n", s.len());
    r.push("d", s.dim());
    r.push("t", run.state.t);
    r.push("eta", run.state.eta);
    r.push("kl_path", run.kl_path);
    r.push("renyi6_path", run.renyi6_path.value);
    r.push("renyi6_overflow", run.renyi6_path.overflow);
    r.push("w1", encode_vec(&run.w1));
    r.push("final_w", encode_vec(&run.state.w));
    r.push("averaged_w", encode_vec(&run.averaged_w));
    r.csv_header = Some("t i j".into());
    for (k, pair) in run.trajectory.steps().iter().enumerate() {
        r.csv_rows.push(format!("{} {} {}", k + 1, pair.i, pair.j));
    }
    r.save(path)
}

/// Loaded run record, sufficient to replay and audit.
#[derive(Debug, Clone)]
pub struct RunRecordFile {
    pub algorithm: Algorithm,
    pub config_hash: String,
    pub seed: u64,
    pub stream: u64,
    pub n: usize,
    pub d: usize,
    pub eta: f64,
    pub kl_path: f64,
    pub renyi6_path: f64,
    pub w1: Array1<f64>,
    pub v1: Option<Array1<f64>>,
    pub final_w: Array1<f64>,
    pub final_v: Option<Array1<f64>>,
    pub trajectory: Trajectory,
}

pub fn save_run_record_sgda(run: &SgdaRun, s: &Dataset, path: &Path) -> Result<()> {
    let mut r = Report::new();
    r.push("record", "run");
    r.push("algorithm", "sgda");
    r.push("config_hash", &run.config_hash);
    r.push("seed", run.seed);
    r.push("stream", run.stream);
    r.push("n", s.len());
    r.push("d", s.dim());
    r.push("t", run.state.t);
    r.push("eta", run.state.eta);
    r.push("kl_path", run.kl_path);
    r.push("renyi6_path", run.renyi6_path.value);
    r.push("renyi6_overflow", run.renyi6_path.overflow);
    r.push("w1", encode_vec(&run.w1));
    r.push("v1", encode_vec(&run.v1));
    r.push("final_w", encode_vec(&run.state.w));
    r.push("final_v", encode_vec(&run.state.v));
    r.push("averaged_w", encode_vec(&run.averaged_w));
    r.push("averaged_v", encode_vec(&run.averaged_v));
    r.csv_header = Some("t i j".into());
    for (k, pair) in run.trajectory.steps().iter().enumerate() {
        r.csv_rows.push(format!("{} {} {}", k + 1, pair.i, pair.j));
    }
    r.save(path)
}

pub fn load_run_record(path: &Path) -> Result<RunRecordFile> {
    let r = Report::load(path)?;
    let malformed = |reason: String| Error::MalformedFile {
        path: path.display().to_string(),
        reason,
    };
    if r.get("record") != Some("run") {
        return Err(malformed("not a run record".into()));
    }
    let algorithm = Algorithm::parse(r.require("algorithm")?)?;
    let n = r.require_usize("n")?;
    let t = r.require_usize("t")?;
    let mut steps = Vec::with_capacity(t);
    for row in &r.csv_rows {
        let fields: Vec<&str> = row.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(malformed(format!("bad trajectory row `{row}`")));
        }
        let i: usize = fields[1].parse().map_err(|_| malformed("bad i".into()))?;
        let j: usize = fields[2].parse().map_err(|_| malformed("bad j".into()))?;
        steps.push(PairIndex::new(i, j, n)?);
    }
    if steps.len() != t {
        return Err(malformed(format!("expected {t} steps, found {}", steps.len())));
    }
    Ok(RunRecordFile {
        algorithm,
        config_hash: r.require("config_hash")?.to_string(),
        seed: r.require("seed")?.parse().map_err(|_| malformed("bad seed".into()))?,
        stream: r.require("stream")?.parse().map_err(|_| malformed("bad stream".into()))?,
        n,
        d: r.require_usize("d")?,
        eta: r.require_f64("eta")?,
        kl_path: r.require_f64("kl_path")?,
        renyi6_path: r.require_f64("renyi6_path")?,
        w1: decode_vec(r.require("w1")?)?,
        v1: r.get("v1").map(decode_vec).transpose()?,
        final_w: decode_vec(r.require("final_w")?)?,
        final_v: r.get("final_v").map(decode_vec).transpose()?,
        trajectory: Trajectory::new(n, steps)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, SyntheticKind};
    use crate::losses::{BilinearSaddle, PairwiseHinge, PairwiseSquared};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn scalar_pair_dataset() -> Dataset {
        // two samples with half-differences Δx = ±1, Δy = ±1
        let s1 = crate::data::Sample::new(array![1.0], 1.0);
        let s2 = crate::data::Sample::new(array![-1.0], -1.0);
        Dataset::new(vec![s1, s2], 1.5, None).unwrap()
    }

    #[test]
    fn sgd_step_zero_gradient_is_fixed_point() {
        let s = scalar_pair_dataset();
        let loss = PairwiseHinge::new(1.5, 4.0).unwrap();
        // margin = w·Δx·sign(Δy) = 2 ≥ 1 → flat region
        let state = SgdState { w: array![2.0], t: 0, eta: 0.1 };
        let next = sgd_step(state.clone(), PairIndex::new(1, 2, 2).unwrap(), &s, &loss);
        assert_eq!(next.w, state.w);
        assert_eq!(next.t, 1);
    }

    #[test]
    fn sgd_step_squared_loss_hand_example() {
        let s = scalar_pair_dataset();
        let loss = PairwiseSquared::new(1.5, 1.5, 2.0).unwrap();
        let state = SgdState { w: array![0.0], t: 0, eta: 0.1 };
        let next = sgd_step(state, PairIndex::new(1, 2, 2).unwrap(), &s, &loss);
        // gradient = (w·Δx − Δy)·Δx = −1, so w' = 0 − 0.1·(−1) = 0.1
        assert_abs_diff_eq!(next.w[0], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn sgd_repeated_pair_contracts_toward_pair_minimizer() {
        // 1-d squared pair loss: w_{k+1} − w* = (1 − η Δx²)(w_k − w*), w* = Δy/Δx
        let s = scalar_pair_dataset();
        let loss = PairwiseSquared::new(1.5, 1.5, 4.0).unwrap();
        let eta = 0.5; // η ≤ 2/α = 2/Δx² = 2
        let w_opt = 1.0;
        let mut state = SgdState { w: array![0.0], t: 0, eta };
        let mut prev_gap = (state.w[0] - w_opt).abs();
        for _ in 0..2 {
            state = sgd_step(state, PairIndex::new(1, 2, 2).unwrap(), &s, &loss);
            let gap = (state.w[0] - w_opt).abs();
            assert!(gap <= prev_gap + 1e-15, "must contract: {gap} > {prev_gap}");
            // closed-form recursion check
            assert_abs_diff_eq!(gap, prev_gap * (1.0 - eta).abs(), epsilon = 1e-12);
            prev_gap = gap;
        }
    }

    #[test]
    fn sgd_run_rejects_t_zero_and_matches_single_step() {
        let s = make_synthetic(SyntheticKind::GaussLinear, 8, 2, 0.1, 3).unwrap();
        let loss = crate::losses::PairwiseLogistic::new(s.feature_bound(), 5.0).unwrap();
        let bad = RunConfig::new(0.05, 0, SamplingScheme::uniform(), 7);
        assert!(matches!(sgd_run(&s, &loss, Array1::zeros(2), &bad), Err(Error::ConfigError(_))));

        let cfg = RunConfig::new(0.05, 1, SamplingScheme::uniform(), 7);
        let run = sgd_run(&s, &loss, Array1::zeros(2), &cfg).unwrap();
        assert_eq!(run.trajectory.t(), 1);
        let manual = sgd_step(
            SgdState { w: Array1::zeros(2), t: 0, eta: 0.05 },
            run.trajectory.steps()[0],
            &s,
            &loss,
        );
        assert_eq!(run.state.w, manual.w);
    }

    #[test]
    fn sgd_run_is_deterministic_and_replayable() {
        let s = make_synthetic(SyntheticKind::GaussLinear, 16, 3, 0.1, 5).unwrap();
        let loss = crate::losses::PairwiseLogistic::new(s.feature_bound(), 40.0).unwrap();
        let cfg = RunConfig::new(0.05, 60, SamplingScheme::uniform(), 11).with_stream(2);
        let a = sgd_run(&s, &loss, Array1::zeros(3), &cfg).unwrap();
        let b = sgd_run(&s, &loss, Array1::zeros(3), &cfg).unwrap();
        assert_eq!(a.state.w, b.state.w, "same config+seed must be bit-exact");
        assert_eq!(a.trajectory, b.trajectory);

        let replayed = replay_sgd(&s, &loss, Array1::zeros(3), 0.05, &a.trajectory).unwrap();
        assert_eq!(replayed.w, a.state.w, "replay from the record must be bit-exact");
        assert_eq!(a.kl_path, 0.0, "uniform scheme accumulates zero KL");
        assert_eq!(a.renyi6_path.value, 1.0);
    }

    #[test]
    fn sgd_run_enforces_step_budget() {
        let s = make_synthetic(SyntheticKind::GaussLinear, 8, 2, 0.1, 3).unwrap();
        // R_w too small for T·η·L
        let loss = crate::losses::PairwiseLogistic::new(s.feature_bound(), 0.5).unwrap();
        let cfg = RunConfig::new(0.1, 100, SamplingScheme::uniform(), 7);
        assert!(matches!(
            sgd_run(&s, &loss, Array1::zeros(2), &cfg),
            Err(Error::ConfigError(_))
        ));
    }

    #[test]
    fn sgda_step_pure_bilinear_hand_example_and_norm_identity() {
        let s = scalar_pair_dataset();
        let loss = BilinearSaddle::new(1.5, 4.0, 4.0, 0.0).unwrap();
        // with Δx = ±1 the loss on either ordered pair is exactly w·v
        let state = SgdaState { w: array![1.0], v: array![0.0], t: 0, eta: 0.1 };
        let next = sgda_step(state, PairIndex::new(1, 2, 2).unwrap(), &s, &loss);
        assert_abs_diff_eq!(next.w[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(next.v[0], 0.1, epsilon = 1e-15);

        // ‖(w', v')‖² = (1 + η²)·‖(w, v)‖² exactly at every step
        let mut state = SgdaState { w: array![0.7], v: array![-0.3], t: 0, eta: 0.1 };
        for k in 0..20 {
            let before = state.w[0].powi(2) + state.v[0].powi(2);
            let pair = if k % 2 == 0 { PairIndex::new(1, 2, 2) } else { PairIndex::new(2, 1, 2) };
            state = sgda_step(state, pair.unwrap(), &s, &loss);
            let after = state.w[0].powi(2) + state.v[0].powi(2);
            assert_abs_diff_eq!(after, (1.0 + 0.01) * before, epsilon = 1e-14);
        }
    }

    #[test]
    fn sgda_zero_gradient_fixed_point() {
        let s = scalar_pair_dataset();
        let loss = BilinearSaddle::new(1.5, 4.0, 4.0, 0.0).unwrap();
        let state = SgdaState { w: array![0.0], v: array![0.0], t: 0, eta: 0.1 };
        let next = sgda_step(state, PairIndex::new(1, 2, 2).unwrap(), &s, &loss);
        assert_eq!(next.w, array![0.0]);
        assert_eq!(next.v, array![0.0]);
    }

    #[test]
    fn sgda_run_deterministic_and_single_step_composition() {
        let s = make_synthetic(SyntheticKind::GaussBilinearSaddle, 10, 2, 0.0, 9).unwrap();
        let loss = BilinearSaddle::new(s.feature_bound(), 1.0, 1.0, 0.2).unwrap();
        let cfg = RunConfig::new(0.01, 30, SamplingScheme::uniform(), 13);
        let a = sgda_run(&s, &loss, Array1::zeros(2), Array1::zeros(2), &cfg).unwrap();
        let b = sgda_run(&s, &loss, Array1::zeros(2), Array1::zeros(2), &cfg).unwrap();
        assert_eq!(a.state.w, b.state.w);
        assert_eq!(a.state.v, b.state.v);

        let cfg1 = RunConfig::new(0.01, 1, SamplingScheme::uniform(), 13);
        let one = sgda_run(&s, &loss, Array1::zeros(2), Array1::zeros(2), &cfg1).unwrap();
        let manual = sgda_step(
            SgdaState { w: Array1::zeros(2), v: Array1::zeros(2), t: 0, eta: 0.01 },
            one.trajectory.steps()[0],
            &s,
            &loss,
        );
        assert_eq!(one.state.w, manual.w);
        assert_eq!(one.state.v, manual.v);
    }

    #[test]
    fn sgda_regularized_saddle_distance_decreases() {
        // saddle of the regularized empirical objective is the origin
        let s = make_synthetic(SyntheticKind::GaussBilinearSaddle, 12, 2, 0.0, 21).unwrap();
        let loss = BilinearSaddle::new(s.feature_bound(), 2.0, 2.0, 0.5).unwrap();
        let w1 = array![0.5, -0.3];
        let v1 = array![-0.4, 0.2];
        let start = f64::sqrt(w1.dot(&w1) + v1.dot(&v1));
        // each step contracts the squared norm by (1−ημ)² + η²‖φ‖⁴ < 1;
        // T is capped by the (conservative) step budget
        let cfg = RunConfig::new(0.02, 15, SamplingScheme::uniform(), 3);
        let run = sgda_run(&s, &loss, w1, v1, &cfg).unwrap();
        let end = (run.state.w.dot(&run.state.w) + run.state.v.dot(&run.state.v)).sqrt();
        assert!(end < start, "distance to the saddle must shrink: {end} >= {start}");
    }

    #[test]
    fn recipe_matches_summary_table() {
        assert_eq!(recipe(Algorithm::Sgd, SmoothnessCase::Smooth, 100, 1.0).unwrap(), (100, 0.1));
        let (t, eta) = recipe(Algorithm::Sgd, SmoothnessCase::NonSmooth, 100, 1.0).unwrap();
        assert_eq!(t, 10_000);
        assert_abs_diff_eq!(eta, 1e-3, epsilon = 1e-15);

        // c = 2 doubles T and rescales η consistently
        let (t2, eta2) = recipe(Algorithm::Sgd, SmoothnessCase::Smooth, 100, 2.0).unwrap();
        assert_eq!(t2, 200);
        assert_abs_diff_eq!(eta2, 2.0 / (200f64).sqrt(), epsilon = 1e-15);
        assert!(recipe(Algorithm::Sgd, SmoothnessCase::Smooth, 1, 1.0).is_err());
        assert!(recipe(Algorithm::Sgd, SmoothnessCase::Smooth, 10, 0.0).is_err());
    }

    #[test]
    fn run_record_round_trips_and_replays() {
        let s = make_synthetic(SyntheticKind::GaussLinear, 12, 2, 0.1, 5).unwrap();
        let loss = crate::losses::PairwiseLogistic::new(s.feature_bound(), 30.0).unwrap();
        let cfg = RunConfig::new(0.05, 40, SamplingScheme::uniform(), 11).with_hash("deadbeef");
        let run = sgd_run(&s, &loss, Array1::zeros(2), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.txt");
        save_run_record_sgd(&run, &s, &path).unwrap();
        let rec = load_run_record(&path).unwrap();
        assert_eq!(rec.trajectory, run.trajectory);
        assert_eq!(rec.final_w, run.state.w);
        assert_eq!(rec.config_hash, "deadbeef");
        let replayed = replay_sgd(&s, &loss, rec.w1.clone(), rec.eta, &rec.trajectory).unwrap();
        assert_eq!(replayed.w, rec.final_w, "record must suffice to replay bit-exactly");
    }
}
