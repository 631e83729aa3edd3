//! Generalization-rate sweep: run the (T, η) recipe across a grid of sample
//! sizes, estimate the expected gap magnitude per n, and fit the log-log
//! slope against the Õ(1/√n) summary rate.

use crate::data::{make_synthetic, SyntheticKind};
use crate::error::{Error, Result};
use crate::losses::{BilinearSaddle, PairwiseHinge, PairwiseLogistic, PairwiseLossModel};
use crate::optim::{recipe, sgd_run, sgda_run, Algorithm, RunConfig, SmoothnessCase};
use crate::report::Report;
use crate::rng::stream_rng;
use crate::sampling::SamplingScheme;
use ndarray::Array1;
use rand::Rng;
use rayon::prelude::*;

/// Configuration of one rate sweep.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub algorithm: Algorithm,
    pub case: SmoothnessCase,
    pub kind: SyntheticKind,
    pub d: usize,
    pub noise: f64,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub scale_c: f64,
    /// Monte Carlo pairs per population-risk estimate.
    pub m_pop: usize,
}

/// Per-n row of a [`GapReport`].
#[derive(Debug, Clone, Copy)]
pub struct GapRow {
    pub n: usize,
    pub t: usize,
    pub eta: f64,
    pub mean_abs_gap: f64,
    pub stderr_abs: f64,
    pub mean_gap: f64,
    pub stderr: f64,
}

/// Output of [`rate_sweep`].
#[derive(Debug, Clone)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    /// Fitted slope of log(mean |gap|) vs log n; None when degenerate.
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    /// All-zero gaps short-circuit the fit.
    pub degenerate: bool,
    pub algorithm: Algorithm,
    pub case: SmoothnessCase,
    pub replicates: usize,
    pub scale_c: f64,
    pub seed: u64,
    pub config_hash: String,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    (mean, (var / m).sqrt())
}

/// One replicate: fresh dataset, one run of the recipe, one gap estimate.
fn sweep_trial(spec: &SweepSpec, n: usize, t: usize, eta: f64, seed: u64, trial: u64) -> Result<f64> {
    let data_seed: u64 = stream_rng(seed, "sweep-data", trial).gen();
    let s = make_synthetic(spec.kind, n, spec.d, spec.noise, data_seed)?;
    let r_x = s.feature_bound();
    let gap_seed: u64 = stream_rng(seed, "sweep-gap", trial).gen();
    match spec.algorithm {
        Algorithm::Sgd => {
            // margin losses have L = R_x independent of R_w, so the step
            // budget fixes the domain radius directly
            let r_w = t as f64 * eta * r_x + 1.0;
            let run_one = |loss: &dyn PairwiseLossModel| -> Result<Array1<f64>> {
                let cfg = RunConfig::new(eta, t, SamplingScheme::uniform(), seed).with_stream(trial);
                Ok(run_dyn(&s, loss, Array1::zeros(spec.d), &cfg)?)
            };
            match spec.case {
                SmoothnessCase::Smooth => {
                    let loss = PairwiseLogistic::new(r_x, r_w)?;
                    let alpha = loss.constants().smoothness.unwrap();
                    if eta > 2.0 / alpha {
                        return Err(Error::ConfigError(format!(
                            "smooth recipe produced eta = {eta} > 2/alpha = {}; lower scale_c",
                            2.0 / alpha
                        )));
                    }
                    let w = run_one(&loss)?;
                    crate::analysis::risk::generalization_gap(&w, &s, &loss, spec.m_pop, gap_seed)
                }
                SmoothnessCase::NonSmooth => {
                    let loss = PairwiseHinge::new(r_x, r_w)?;
                    let w = run_one(&loss)?;
                    crate::analysis::risk::generalization_gap(&w, &s, &loss, spec.m_pop, gap_seed)
                }
            }
        }
        Algorithm::Sgda => {
            // L grows with the radii; solve the budget fixed point
            // R ≥ T·η·√2·R·(R_x² + μ) requires T·η·√2·(R_x²+μ) < 1
            let mu = 0.2;
            let growth = t as f64 * eta * std::f64::consts::SQRT_2 * (r_x * r_x + mu);
            if growth >= 1.0 {
                return Err(Error::ConfigError(format!(
                    "sgda step budget unsatisfiable: T·η·√2·(R_x²+μ) = {growth} >= 1; lower scale_c"
                )));
            }
            let radius = 1.0;
            let loss = BilinearSaddle::new(r_x, radius, radius, mu)?;
            let cfg = RunConfig::new(eta, t, SamplingScheme::uniform(), seed).with_stream(trial);
            let run = sgda_run(&s, &loss, Array1::zeros(spec.d), Array1::zeros(spec.d), &cfg)?;
            crate::analysis::risk::generalization_gap_minimax(
                &run.state.w,
                &run.state.v,
                &s,
                &loss,
                spec.m_pop,
                gap_seed,
            )
        }
    }
}

fn run_dyn(
    s: &crate::data::Dataset,
    loss: &dyn PairwiseLossModel,
    w1: Array1<f64>,
    cfg: &RunConfig,
) -> Result<Array1<f64>> {
    struct Dyn<'a>(&'a dyn PairwiseLossModel);
    impl PairwiseLossModel for Dyn<'_> {
        fn value(&self, w: &Array1<f64>, z: &crate::data::Sample, zt: &crate::data::Sample) -> f64 {
            self.0.value(w, z, zt)
        }
        fn grad_w(&self, w: &Array1<f64>, z: &crate::data::Sample, zt: &crate::data::Sample) -> Array1<f64> {
            self.0.grad_w(w, z, zt)
        }
        fn constants(&self) -> &crate::losses::LossConstants {
            self.0.constants()
        }
        fn sample_probe_pair(&self, d: usize, rng: &mut rand_chacha::ChaCha12Rng) -> (crate::data::Sample, crate::data::Sample) {
            self.0.sample_probe_pair(d, rng)
        }
    }
    Ok(sgd_run(s, &Dyn(loss), w1, cfg)?.state.w)
}

/// Least-squares fit of y on x; returns (slope, slope stderr).
fn fit_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / k;
    let ybar = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let dof = (xs.len().saturating_sub(2)).max(1) as f64;
    let stderr = (ss_res / dof / sxx).sqrt();
    (slope, stderr)
}

/// Run the sweep. Trials fan out over (n, replicate) with per-trial seed
/// streams, so the result is independent of scheduling.
pub fn rate_sweep(spec: &SweepSpec, seed: u64, config_hash: &str) -> Result<GapReport> {
    if spec.n_grid.len() < 3 {
        return Err(Error::InvalidParameter("rate sweep needs >= 3 grid points".into()));
    }
    if !spec.n_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter("n_grid must be strictly ascending".into()));
    }
    if spec.replicates < 2 {
        return Err(Error::InvalidParameter("rate sweep needs >= 2 replicates".into()));
    }

    let mut rows = Vec::with_capacity(spec.n_grid.len());
    for (gi, &n) in spec.n_grid.iter().enumerate() {
        let (t, eta) = recipe(spec.algorithm, spec.case, n, spec.scale_c)?;
        let gaps: Result<Vec<f64>> = (0..spec.replicates as u64)
            .into_par_iter()
            .map(|rep| {
                let trial = (gi as u64) << 32 | rep;
                sweep_trial(spec, n, t, eta, seed, trial)
            })
            .collect();
        let gaps = gaps?;
        let abs: Vec<f64> = gaps.iter().map(|g| g.abs()).collect();
        let (mean_abs_gap, stderr_abs) = mean_stderr(&abs);
        let (mean_gap, stderr) = mean_stderr(&gaps);
        rows.push(GapRow { n, t, eta, mean_abs_gap, stderr_abs, mean_gap, stderr });
    }

    let degenerate = rows.iter().any(|r| r.mean_abs_gap <= 0.0);
    let (slope, slope_stderr) = if degenerate {
        (None, None)
    } else {
        let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.mean_abs_gap.ln()).collect();
        let (s, e) = fit_slope(&xs, &ys);
        (Some(s), Some(e))
    };

    Ok(GapReport {
        rows,
        slope,
        slope_stderr,
        degenerate,
        algorithm: spec.algorithm,
        case: spec.case,
        replicates: spec.replicates,
        scale_c: spec.scale_c,
        seed,
        config_hash: config_hash.to_string(),
    })
}

impl GapReport {
    pub fn to_report(&self) -> Report {
        let mut r = Report::new();
        r.push("record", "gap-sweep");
        r.push("config_hash", &self.config_hash);
        r.push("algorithm", self.algorithm.as_str());
        r.push("case", self.case.as_str());
        r.push("replicates", self.replicates);
        r.push("scale_c", self.scale_c);
        r.push("seed", self.seed);
        r.push("degenerate", self.degenerate);
        if let Some(s) = self.slope {
            r.push("slope", s);
        }
        if let Some(e) = self.slope_stderr {
            r.push("slope_stderr", e);
        }
        r.csv_header = Some("n,T,eta,mean_abs_gap,stderr_abs,mean_gap,stderr".into());
        for row in &self.rows {
            r.csv_rows.push(format!(
                "{},{},{},{},{},{},{}",
                row.n, row.t, row.eta, row.mean_abs_gap, row.stderr_abs, row.mean_gap, row.stderr
            ));
        }
        r
    }
}
