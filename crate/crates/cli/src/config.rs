use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sdna::data::{
    generate_synthetic, load_libsvm, normalize_columns, RawDataset, SyntheticConfig, TargetKind,
};
use sdna::erm::{ErmProblem, ErmSolverKind, GramStrategy};
use sdna::LossKind;

use crate::exit::ConfigError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic(SyntheticConfig),
    File {
        path: PathBuf,
        /// Feature count; inferred from the largest index when absent.
        #[serde(default)]
        dim: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    /// Rescale every example to unit norm after loading.
    pub normalize: bool,
    pub loss: LossKind,
    /// Defaults to `1/n`.
    pub lambda: Option<f64>,
    pub solvers: Vec<ErmSolverKind>,
    pub taus: Vec<usize>,
    pub seeds: Vec<u64>,
    pub epochs: f64,
    pub checkpoint_epochs: f64,
    pub eps: Option<f64>,
    pub gram: GramStrategy,
    pub out_dir: Option<PathBuf>,
    /// Timed blocks per epoch-timing cell; the median is reported.
    pub timing_reps: usize,
    /// Epochs in each timed block.
    pub timing_epochs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Synthetic(SyntheticConfig {
                d: 128,
                n: 256,
                seed: 1,
                density: 1.0,
                label_noise: 0.1,
                target: TargetKind::Regression,
            }),
            normalize: false,
            loss: LossKind::Quadratic,
            lambda: None,
            solvers: vec![ErmSolverKind::Sdna, ErmSolverKind::Sdca],
            taus: vec![1, 8, 64],
            seeds: vec![1],
            epochs: 20.0,
            checkpoint_epochs: 0.25,
            eps: None,
            gram: GramStrategy::OnTheFly,
            out_dir: None,
            timing_reps: 5,
            timing_epochs: 3,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub taus: Vec<usize>,
    pub solvers: Vec<ErmSolverKind>,
    pub epochs: Option<f64>,
    pub eps: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| ConfigError(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seeds = vec![seed];
        }
        if !o.taus.is_empty() {
            self.taus = o.taus.clone();
        }
        if !o.solvers.is_empty() {
            self.solvers = o.solvers.clone();
        }
        if let Some(e) = o.epochs {
            self.epochs = e;
        }
        if o.eps.is_some() {
            self.eps = o.eps;
        }
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError(m.to_string()));
        if self.seeds.is_empty() {
            return fail("seeds must not be empty");
        }
        if self.taus.is_empty() {
            return fail("taus must not be empty");
        }
        if self.solvers.is_empty() {
            return fail("solvers must not be empty");
        }
        if !(self.epochs >= 0.0 && self.epochs.is_finite()) {
            return fail("epochs must be a non-negative number");
        }
        if !(self.checkpoint_epochs > 0.0 && self.checkpoint_epochs.is_finite()) {
            return fail("checkpoint_epochs must be positive");
        }
        if self.eps.is_some_and(|e| !(e > 0.0)) {
            return fail("eps must be positive");
        }
        if self.lambda.is_some_and(|l| !(l > 0.0 && l.is_finite())) {
            return fail("lambda must be positive");
        }
        if self.timing_reps == 0 || self.timing_epochs == 0 {
            return fail("timing_reps and timing_epochs must be positive");
        }
        Ok(())
    }

    pub fn load_data(&self) -> Result<RawDataset, sdna::Error> {
        let data = match &self.dataset {
            DatasetSource::Synthetic(cfg) => generate_synthetic(cfg)?,
            DatasetSource::File { path, dim } => load_libsvm(path, *dim)?,
        };
        if self.normalize {
            normalize_columns(&data)
        } else {
            Ok(data)
        }
    }

    /// Loads the data and checks the taus against its size.
    pub fn build_problem(&self) -> anyhow::Result<ErmProblem> {
        let data = self.load_data().map_err(|e| ConfigError(e.to_string()))?;
        let n = data.n();
        if let Some(&t) = self.taus.iter().find(|&&t| t == 0 || t > n) {
            return Err(ConfigError(format!("tau {t} is outside [1, {n}]")).into());
        }
        let lambda = self.lambda.unwrap_or(1.0 / n as f64);
        ErmProblem::new(data, self.loss, lambda, self.gram)
            .map_err(|e| ConfigError(e.to_string()).into())
    }
}
