//! Flat, typed key-value experiment configuration.
//!
//! The schema is exhaustive: unknown keys are errors with a line diagnostic,
//! and every value is type-checked at parse time. See the README for the
//! full key reference. Configs hash to a stable id embedded in every output.

use anyhow::{anyhow, bail, Context, Result};
use ndarray::Array1;
use pairlearn::data::{load_dataset, make_synthetic, Dataset, SyntheticKind};
use pairlearn::losses::{
    AnyPairwiseLoss, BilinearSaddle, PairwiseHinge, PairwiseLogistic, PairwiseLossModel,
    PairwiseSquared,
};
use pairlearn::optim::{recipe, Algorithm, SmoothnessCase};
use pairlearn::report::config_hash;
use pairlearn::sampling::{load_pair_table, SamplingScheme, SchemeKind};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// (key, type, description) table of every legal config key.
pub const SCHEMA: &[(&str, &str, &str)] = &[
    ("seed", "u64", "root seed; all random streams derive from it"),
    ("out_dir", "path", "output directory (the --out flag overrides)"),
    ("dataset.kind", "enum", "gauss-linear | gauss-bilinear-saddle | imbalanced-auc | file"),
    ("dataset.n", "usize", "sample count (n >= 2)"),
    ("dataset.d", "usize", "feature dimension (d >= 1)"),
    ("dataset.noise", "f64", "generator noise level (>= 0)"),
    ("dataset.seed", "u64", "dataset stream seed (defaults to root seed)"),
    ("dataset.path", "path", "dataset file (kind = file input, gen-data output)"),
    ("loss.name", "enum", "logistic | hinge | squared | bilinear-saddle"),
    ("loss.r_w", "auto|f64", "parameter domain radius; auto solves the step budget"),
    ("loss.r_v", "f64", "second-block radius (bilinear-saddle only)"),
    ("loss.r_y", "f64", "label half-difference bound (squared only)"),
    ("loss.mu", "f64", "regularization of the bilinear saddle (>= 0)"),
    ("algorithm.kind", "enum", "sgd | sgda"),
    ("algorithm.case", "enum", "smooth | nonsmooth"),
    ("algorithm.recipe", "enum", "explicit | auto (auto sets T, eta from scale_c)"),
    ("algorithm.t", "usize", "iteration count (recipe = explicit)"),
    ("algorithm.eta", "f64", "fixed step size (recipe = explicit)"),
    ("algorithm.scale_c", "f64", "recipe scale constant (recipe = auto)"),
    ("sampling.scheme", "enum", "uniform | loss-proportional | gradnorm-proportional | custom-table"),
    ("sampling.epsilon", "f64", "uniform mixing fraction in (0, 1]"),
    ("sampling.refresh_period", "usize", "steps between adaptive score refreshes (>= 1)"),
    ("sampling.table_path", "path", "custom-table weight file `i j weight`"),
    ("analysis.delta", "auto|f64", "stability tail level; auto = 1/n"),
    ("analysis.delta_prime", "f64", "bound confidence level in (0, 1)"),
    ("analysis.k1", "f64", "sub-Gaussian MGF constant K1 (> 0)"),
    ("analysis.m_probe", "usize", "probe pairs per stability trial (>= 100)"),
    ("analysis.n_trajectories", "usize", "Monte Carlo trajectories (>= 1000 for stability)"),
    ("analysis.m_pop", "usize", "Monte Carlo pairs per population-risk estimate"),
    ("analysis.n_grid", "usize list", "comma-separated ascending n grid for sweeps"),
    ("analysis.replicates", "usize", "replicates per grid point (>= 2)"),
    ("analysis.certify_probes", "usize", "Monte Carlo probes for constant certification"),
    ("analysis.override_c1", "f64", "demonstration override of c1 (stability subcommand)"),
    ("analysis.override_c2", "f64", "demonstration override of c2 (stability subcommand)"),
];

/// Parsed but unresolved configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    entries: BTreeMap<String, String>,
    hash: String,
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let known: Vec<&str> = SCHEMA.iter().map(|(k, _, _)| *k).collect();
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                anyhow!("{origin}:{}: expected `key = value`, got `{raw}`", lineno + 1)
            })?;
            let key = key.trim();
            let value = value.trim();
            if !known.contains(&key) {
                bail!("{origin}:{}: unknown key `{key}` (see the config reference)", lineno + 1);
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                bail!("{origin}:{}: duplicate key `{key}`", lineno + 1);
            }
        }
        let hash = config_hash(&entries);
        Ok(ExperimentConfig { entries, hash })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Stable id of the canonicalized entries (seed overrides included).
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn override_seed(&mut self, seed: u64) {
        self.entries.insert("seed".into(), seed.to_string());
        self.hash = config_hash(&self.entries);
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| anyhow!("config is missing required key `{key}`"))
    }

    fn parse_typed<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse::<T>().map_err(|_| anyhow!("config key `{key}` = `{raw}` is not a valid {what}"))
    }

    fn parse_typed_or<T: std::str::FromStr>(&self, key: &str, what: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => {
                raw.parse::<T>().map_err(|_| anyhow!("config key `{key}` = `{raw}` is not a valid {what}"))
            }
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.parse_typed("seed", "u64")
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out_dir").unwrap_or("out"))
    }

    pub fn dataset_seed(&self) -> Result<u64> {
        match self.get("dataset.seed") {
            Some(_) => self.parse_typed("dataset.seed", "u64"),
            None => self.seed(),
        }
    }

    pub fn dataset_path(&self) -> Option<PathBuf> {
        self.get("dataset.path").map(PathBuf::from)
    }

    /// Build or load the dataset.
    pub fn dataset(&self) -> Result<Dataset> {
        let kind = self.require("dataset.kind")?;
        if kind == "file" {
            let path = self
                .dataset_path()
                .ok_or_else(|| anyhow!("dataset.kind = file requires dataset.path"))?;
            return Ok(load_dataset(&path)?);
        }
        let kind = SyntheticKind::parse(kind)?;
        let n: usize = self.parse_typed("dataset.n", "usize")?;
        let d: usize = self.parse_typed("dataset.d", "usize")?;
        let noise: f64 = self.parse_typed_or("dataset.noise", "f64", 0.0)?;
        Ok(make_synthetic(kind, n, d, noise, self.dataset_seed()?)?)
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        Ok(Algorithm::parse(self.require("algorithm.kind")?)?)
    }

    pub fn case(&self) -> Result<SmoothnessCase> {
        Ok(SmoothnessCase::parse(self.require("algorithm.case")?)?)
    }

    /// (T, η): explicit keys or the recipe.
    pub fn schedule(&self, n: usize) -> Result<(usize, f64)> {
        match self.get("algorithm.recipe").unwrap_or("explicit") {
            "explicit" => {
                let t: usize = self.parse_typed("algorithm.t", "usize")?;
                let eta: f64 = self.parse_typed("algorithm.eta", "f64")?;
                Ok((t, eta))
            }
            "auto" => {
                let c: f64 = self.parse_typed_or("algorithm.scale_c", "f64", 1.0)?;
                Ok(recipe(self.algorithm()?, self.case()?, n, c)?)
            }
            other => bail!("algorithm.recipe must be explicit or auto, got `{other}`"),
        }
    }

    pub fn scale_c(&self) -> Result<f64> {
        self.parse_typed_or("algorithm.scale_c", "f64", 1.0)
    }

    pub fn sampling_scheme(&self, n: usize) -> Result<SamplingScheme> {
        let epsilon: f64 = self.parse_typed_or("sampling.epsilon", "f64", 0.1)?;
        let refresh: usize = self.parse_typed_or("sampling.refresh_period", "usize", 1)?;
        let kind = match self.get("sampling.scheme").unwrap_or("uniform") {
            "uniform" | "uniform-prior" => SchemeKind::UniformPrior,
            "loss-proportional" => SchemeKind::LossProportional,
            "gradnorm-proportional" => SchemeKind::GradNormProportional,
            "custom-table" => {
                let path = self
                    .get("sampling.table_path")
                    .ok_or_else(|| anyhow!("custom-table scheme requires sampling.table_path"))?;
                SchemeKind::CustomTable(load_pair_table(Path::new(path), n)?)
            }
            other => bail!("unknown sampling.scheme `{other}`"),
        };
        Ok(SamplingScheme::new(kind, epsilon, refresh)?)
    }

    /// δ for the stability tail; `auto` (default) resolves to 1/n.
    pub fn delta(&self, n: usize) -> Result<f64> {
        match self.get("analysis.delta").unwrap_or("auto") {
            "auto" => Ok(1.0 / n as f64),
            raw => raw
                .parse::<f64>()
                .map_err(|_| anyhow!("analysis.delta must be `auto` or a float, got `{raw}`")),
        }
    }

    pub fn delta_prime(&self) -> Result<f64> {
        self.parse_typed_or("analysis.delta_prime", "f64", 0.05)
    }

    pub fn k1(&self) -> Result<f64> {
        self.parse_typed_or("analysis.k1", "f64", 1.0)
    }

    pub fn m_probe(&self) -> Result<usize> {
        self.parse_typed_or("analysis.m_probe", "usize", 200)
    }

    pub fn n_trajectories(&self) -> Result<usize> {
        self.parse_typed_or("analysis.n_trajectories", "usize", 2000)
    }

    pub fn m_pop(&self) -> Result<usize> {
        self.parse_typed_or("analysis.m_pop", "usize", 20_000)
    }

    pub fn replicates(&self) -> Result<usize> {
        self.parse_typed_or("analysis.replicates", "usize", 20)
    }

    pub fn certify_probes(&self) -> Result<usize> {
        self.parse_typed_or("analysis.certify_probes", "usize", 1000)
    }

    pub fn coefficient_overrides(&self) -> Result<(Option<f64>, Option<f64>)> {
        let c1 = match self.get("analysis.override_c1") {
            Some(_) => Some(self.parse_typed("analysis.override_c1", "f64")?),
            None => None,
        };
        let c2 = match self.get("analysis.override_c2") {
            Some(_) => Some(self.parse_typed("analysis.override_c2", "f64")?),
            None => None,
        };
        Ok((c1, c2))
    }

    pub fn n_grid(&self) -> Result<Vec<usize>> {
        let raw = self.require("analysis.n_grid")?;
        let grid: std::result::Result<Vec<usize>, _> =
            raw.split(',').map(|p| p.trim().parse::<usize>()).collect();
        grid.map_err(|_| anyhow!("analysis.n_grid must be comma-separated integers, got `{raw}`"))
    }

    /// Resolve the pairwise loss against a dataset and schedule, enforcing
    /// the smooth-case/loss consistency and solving `r_w = auto` from the
    /// step budget (margin losses: R_w = T·η·L + 1 with L = R_x; squared:
    /// the linear fixed point, feasible only when T·η·R_x² < 1).
    pub fn pairwise_loss(&self, data: &Dataset, t: usize, eta: f64) -> Result<AnyPairwiseLoss> {
        let name = self.require("loss.name")?;
        let case = self.case()?;
        let r_x = data.feature_bound();
        let budget = t as f64 * eta;
        let r_w_raw = self.get("loss.r_w").unwrap_or("auto");
        let explicit_r_w = match r_w_raw {
            "auto" => None,
            raw => Some(
                raw.parse::<f64>()
                    .map_err(|_| anyhow!("loss.r_w must be `auto` or a float, got `{raw}`"))?,
            ),
        };
        let loss = match name {
            "logistic" => {
                let r_w = explicit_r_w.unwrap_or(budget * r_x + 1.0);
                AnyPairwiseLoss::Logistic(PairwiseLogistic::new(r_x, r_w)?)
            }
            "hinge" => {
                let r_w = explicit_r_w.unwrap_or(budget * r_x + 1.0);
                AnyPairwiseLoss::Hinge(PairwiseHinge::new(r_x, r_w)?)
            }
            "squared" => {
                let r_y: f64 = self.parse_typed_or("loss.r_y", "f64", 1.0)?;
                let r_w = match explicit_r_w {
                    Some(r) => r,
                    None => {
                        let shrink = 1.0 - budget * r_x * r_x;
                        if shrink <= 0.0 {
                            bail!(
                                "loss.r_w = auto is infeasible for the squared loss: \
                                 T·η·R_x² = {} >= 1",
                                budget * r_x * r_x
                            );
                        }
                        (budget * r_y * r_x + 1.0) / shrink
                    }
                };
                AnyPairwiseLoss::Squared(PairwiseSquared::new(r_x, r_y, r_w)?)
            }
            "bilinear-saddle" => bail!("loss.name = bilinear-saddle needs algorithm.kind = sgda"),
            other => bail!("unknown loss.name `{other}`"),
        };
        if case == SmoothnessCase::Smooth && !loss.constants().smooth {
            bail!("algorithm.case = smooth requires a smooth loss, but `{name}` is not");
        }
        if case == SmoothnessCase::Smooth {
            let alpha = loss.constants().smoothness.unwrap();
            if eta > 2.0 / alpha {
                bail!(
                    "smooth-case analysis requires eta <= 2/alpha = {}, got {eta}; \
                     lower eta or scale_c",
                    2.0 / alpha
                );
            }
        }
        Ok(loss)
    }

    pub fn minimax_loss(&self, data: &Dataset) -> Result<BilinearSaddle> {
        let name = self.require("loss.name")?;
        if name != "bilinear-saddle" {
            bail!("algorithm.kind = sgda requires loss.name = bilinear-saddle, got `{name}`");
        }
        let r_x = data.feature_bound();
        let r_w = match self.get("loss.r_w").unwrap_or("auto") {
            "auto" => 1.0,
            raw => raw
                .parse::<f64>()
                .map_err(|_| anyhow!("loss.r_w must be `auto` or a float, got `{raw}`"))?,
        };
        let r_v: f64 = self.parse_typed_or("loss.r_v", "f64", r_w)?;
        let mu: f64 = self.parse_typed_or("loss.mu", "f64", 0.2)?;
        Ok(BilinearSaddle::new(r_x, r_w, r_v, mu)?)
    }

    /// Fresh zero initial point in the dataset's dimension.
    pub fn initial_point(&self, data: &Dataset) -> Array1<f64> {
        Array1::zeros(data.dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = "\
seed = 42
dataset.kind = gauss-linear
dataset.n = 16
dataset.d = 2
dataset.noise = 0.2
loss.name = logistic
algorithm.kind = sgd
algorithm.case = smooth
algorithm.recipe = explicit
algorithm.t = 10
algorithm.eta = 0.05
";

    #[test]
    fn parses_and_resolves_smoke_config() {
        let cfg = ExperimentConfig::parse(SMOKE, "smoke").unwrap();
        assert_eq!(cfg.seed().unwrap(), 42);
        let data = cfg.dataset().unwrap();
        assert_eq!(data.len(), 16);
        let (t, eta) = cfg.schedule(data.len()).unwrap();
        assert_eq!((t, eta), (10, 0.05));
        let loss = cfg.pairwise_loss(&data, t, eta).unwrap();
        assert!(loss.constants().smooth);
        assert_eq!(cfg.delta(16).unwrap(), 1.0 / 16.0);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys_with_line_numbers() {
        let err = ExperimentConfig::parse("seed = 1\nbogus.key = 2\n", "test").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("test:2"), "{msg}");
        assert!(msg.contains("bogus.key"), "{msg}");

        let err = ExperimentConfig::parse("seed = 1\nseed = 2\n", "test").unwrap_err();
        assert!(format!("{err}").contains("duplicate"));
    }

    #[test]
    fn rejects_type_errors_and_inconsistent_combinations() {
        let cfg = ExperimentConfig::parse("seed = notanumber\n", "t").unwrap();
        assert!(cfg.seed().is_err());

        let text = SMOKE.replace("loss.name = logistic", "loss.name = hinge");
        let cfg = ExperimentConfig::parse(&text, "t").unwrap();
        let data = cfg.dataset().unwrap();
        let err = cfg.pairwise_loss(&data, 10, 0.05).unwrap_err();
        assert!(format!("{err}").contains("smooth"), "{err}");
    }

    #[test]
    fn seed_override_changes_hash() {
        let mut cfg = ExperimentConfig::parse(SMOKE, "t").unwrap();
        let h1 = cfg.hash().to_string();
        cfg.override_seed(7);
        assert_ne!(h1, cfg.hash());
        assert_eq!(cfg.seed().unwrap(), 7);
    }
}
