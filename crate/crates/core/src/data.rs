//! Datasets, synthetic generators, and the neighboring-dataset construction.
//!
//! A [`Dataset`] is an ordered list of i.i.d. samples together with a recorded
//! feature-norm bound `R_x`. Neighboring datasets (identical except at one
//! position) are the elementary object of every stability probe.

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

/// One sample z = (x, y). Labels are stored as reals even for binary tasks
/// (±1 encoding), so one sample type serves regression and AUC losses.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Array1<f64>,
    pub label: f64,
}

impl Sample {
    pub fn new(features: Array1<f64>, label: f64) -> Self {
        Sample { features, label }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn feature_norm(&self) -> f64 {
        self.features.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Synthetic data families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// x ~ N(0, I_d) clipped to ‖x‖₂ ≤ 3√d, y = ⟨x, w*⟩ + noise·ε.
    GaussLinear,
    /// x ~ N(0, I_d)/(3√d) clipped to ‖x‖₂ ≤ 1, y = ⟨x, w*⟩ + noise·ε.
    /// Small feature radius keeps minimax smoothness constants O(1).
    GaussBilinearSaddle,
    /// Binary ±1 labels with 10% positives; features shifted by label·w*
    /// with isotropic spread `noise`, clipped to ‖x‖₂ ≤ 3√d.
    ImbalancedAuc,
}

impl SyntheticKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SyntheticKind::GaussLinear => "gauss-linear",
            SyntheticKind::GaussBilinearSaddle => "gauss-bilinear-saddle",
            SyntheticKind::ImbalancedAuc => "imbalanced-auc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gauss-linear" => Ok(SyntheticKind::GaussLinear),
            "gauss-bilinear-saddle" => Ok(SyntheticKind::GaussBilinearSaddle),
            "imbalanced-auc" => Ok(SyntheticKind::ImbalancedAuc),
            other => Err(Error::InvalidParameter(format!(
                "unknown synthetic kind `{other}`"
            ))),
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The sampling distribution D behind a synthetic dataset: everything needed
/// to draw fresh examples, minus the per-dataset seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: SyntheticKind,
    pub d: usize,
    pub noise: f64,
}

impl GeneratorSpec {
    pub fn new(kind: SyntheticKind, d: usize, noise: f64) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidParameter("d must be >= 1".into()));
        }
        if !(noise >= 0.0) {
            return Err(Error::InvalidParameter("noise must be >= 0".into()));
        }
        Ok(GeneratorSpec { kind, d, noise })
    }

    /// Feature-norm bound recorded on datasets from this generator.
    pub fn feature_bound(&self) -> f64 {
        match self.kind {
            SyntheticKind::GaussLinear | SyntheticKind::ImbalancedAuc => {
                3.0 * (self.d as f64).sqrt()
            }
            SyntheticKind::GaussBilinearSaddle => 1.0,
        }
    }

    /// The fixed hidden direction w* = (1,…,1)/√d shared by all datasets of
    /// a family and by the population sampler.
    pub fn hidden_direction(&self) -> Array1<f64> {
        Array1::from_elem(self.d, 1.0 / (self.d as f64).sqrt())
    }

    /// Draw one fresh sample from D.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Sample {
        let d = self.d;
        let r_x = self.feature_bound();
        let w_star = self.hidden_direction();
        match self.kind {
            SyntheticKind::GaussLinear => {
                let x = clip_to_ball(gaussian_vec(rng, d), r_x);
                let eps: f64 = rng.sample(StandardNormal);
                let y = x.dot(&w_star) + self.noise * eps;
                Sample::new(x, y)
            }
            SyntheticKind::GaussBilinearSaddle => {
                let scale = 1.0 / (3.0 * (d as f64).sqrt());
                let x = clip_to_ball(gaussian_vec(rng, d) * scale, r_x);
                let eps: f64 = rng.sample(StandardNormal);
                let y = x.dot(&w_star) + self.noise * eps;
                Sample::new(x, y)
            }
            SyntheticKind::ImbalancedAuc => {
                let label = if rng.gen::<f64>() < 0.10 { 1.0 } else { -1.0 };
                let x = clip_to_ball(&w_star * label + gaussian_vec(rng, d) * self.noise, r_x);
                Sample::new(x, label)
            }
        }
    }
}

fn gaussian_vec<R: Rng>(rng: &mut R, d: usize) -> Array1<f64> {
    Array1::from_iter((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

fn clip_to_ball(x: Array1<f64>, radius: f64) -> Array1<f64> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > radius {
        x * (radius / norm)
    } else {
        x
    }
}

/// Generator provenance recorded on synthetic datasets, so population-risk
/// estimation can draw fresh pairs from the same D.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub spec: GeneratorSpec,
    pub n: usize,
    pub seed: u64,
}

/// An ordered list of i.i.d. samples with a recorded feature-norm bound.
///
/// Immutable after construction; positions are 1-based in all public
/// index-taking operations to match report conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_bound: f64,
    provenance: Option<Provenance>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, feature_bound: f64, provenance: Option<Provenance>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "dataset needs n >= 2 samples, got {}",
                samples.len()
            )));
        }
        let d = samples[0].dim();
        for (idx, s) in samples.iter().enumerate() {
            if s.dim() != d {
                return Err(Error::InvalidParameter(format!(
                    "sample {} has dimension {}, expected {d}",
                    idx + 1,
                    s.dim()
                )));
            }
            if !s.features.iter().all(|x| x.is_finite()) || !s.label.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "sample {} has non-finite entries",
                    idx + 1
                )));
            }
            if s.feature_norm() > feature_bound * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!(
                    "sample {} violates feature bound: {} > {}",
                    idx + 1,
                    s.feature_norm(),
                    feature_bound
                )));
            }
        }
        Ok(Dataset { samples, feature_bound, provenance })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn feature_bound(&self) -> f64 {
        self.feature_bound
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// 1-based access, matching the paper-style index set [n].
    pub fn sample(&self, k: usize) -> &Sample {
        &self.samples[k - 1]
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }
}

/// Replacement of the k-th sample (1-based).
#[derive(Debug, Clone)]
pub struct NeighborSpec {
    pub index: usize,
    pub replacement: Sample,
}

/// Deterministic synthetic dataset.
pub fn make_synthetic(
    kind: SyntheticKind,
    n: usize,
    d: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidParameter("n must be >= 2".into()));
    }
    let spec = GeneratorSpec::new(kind, d, noise)?;
    let mut rng = stream_rng(seed, "dataset", 0);
    let samples: Vec<Sample> = (0..n).map(|_| spec.sample(&mut rng)).collect();
    let feature_bound = spec.feature_bound();
    Dataset::new(samples, feature_bound, Some(Provenance { spec, n, seed }))
}

/// Dataset equal to `s` except position `spec.index` (1-based) holds
/// `spec.replacement`. `s` is unchanged.
pub fn neighbor(s: &Dataset, spec: &NeighborSpec) -> Result<Dataset> {
    let n = s.len();
    if spec.index < 1 || spec.index > n {
        return Err(Error::IndexOutOfRange { index: spec.index, n });
    }
    if spec.replacement.dim() != s.dim() {
        return Err(Error::InvalidParameter(format!(
            "replacement dimension {} != dataset dimension {}",
            spec.replacement.dim(),
            s.dim()
        )));
    }
    if spec.replacement.feature_norm() > s.feature_bound() * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(
            "replacement violates the dataset feature bound".into(),
        ));
    }
    let mut samples = s.samples.clone();
    samples[spec.index - 1] = spec.replacement.clone();
    Dataset::new(samples, s.feature_bound, s.provenance.clone())
}

/// Plain-text dataset format:
/// line 1: `n d R_x`; optional `# provenance <kind> <n> <d> <noise> <seed>`;
/// then n lines `label x_1 … x_d`. All floats are shortest round-trip
/// decimal, so save→load is bit-exact.
pub fn save_dataset(s: &Dataset, path: &Path) -> Result<()> {
    let mut body = String::new();
    body.push_str(&format!("{} {} {}\n", s.len(), s.dim(), s.feature_bound()));
    if let Some(p) = &s.provenance {
        body.push_str(&format!(
            "# provenance {} {} {} {} {}\n",
            p.spec.kind, p.n, p.spec.d, p.spec.noise, p.seed
        ));
    }
    for sample in &s.samples {
        body.push_str(&format!("{}", sample.label));
        for x in sample.features.iter() {
            body.push_str(&format!(" {x}"));
        }
        body.push('\n');
    }
    atomic_write(path, body.as_bytes())
}

/// Write via temp file + rename so readers never observe a partial file.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io { path: path.display().to_string(), source: e };
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(bytes).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let malformed = |reason: &str| Error::MalformedFile {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };

    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| malformed("empty file"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 3 {
        return Err(malformed("header must be `n d R_x`"));
    }
    let n: usize = head[0].parse().map_err(|_| malformed("bad n in header"))?;
    let d: usize = head[1].parse().map_err(|_| malformed("bad d in header"))?;
    let r_x: f64 = head[2].parse().map_err(|_| malformed("bad R_x in header"))?;

    let mut provenance = None;
    let mut samples = Vec::with_capacity(n);
    for line in lines {
        if let Some(rest) = line.strip_prefix('#') {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.len() == 6 && fields[0] == "provenance" {
                let kind = SyntheticKind::parse(fields[1])
                    .map_err(|_| malformed("bad provenance kind"))?;
                let pn: usize = fields[2].parse().map_err(|_| malformed("bad provenance n"))?;
                let pd: usize = fields[3].parse().map_err(|_| malformed("bad provenance d"))?;
                let noise: f64 = fields[4].parse().map_err(|_| malformed("bad provenance noise"))?;
                let seed: u64 = fields[5].parse().map_err(|_| malformed("bad provenance seed"))?;
                provenance = Some(Provenance {
                    spec: GeneratorSpec::new(kind, pd, noise)?,
                    n: pn,
                    seed,
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != d + 1 {
            return Err(malformed(&format!(
                "sample line has {} fields, expected {}",
                fields.len(),
                d + 1
            )));
        }
        let label: f64 = fields[0].parse().map_err(|_| malformed("bad label"))?;
        let features: Result<Vec<f64>> = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| malformed("bad feature value")))
            .collect();
        samples.push(Sample::new(Array1::from(features?), label));
    }
    if samples.len() != n {
        return Err(malformed(&format!(
            "expected {n} samples, found {}",
            samples.len()
        )));
    }
    Dataset::new(samples, r_x, provenance)
}
