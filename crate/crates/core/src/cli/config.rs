use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hpo::{BoOptions, SearchSpace, DEFAULT_XI};
use crate::models::{EmbeddingSource, ModelConfig};
use crate::training::TrainOptions;

pub const DATA_DIR_ENV: &str = "DEL_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub train: PathBuf,
    #[serde(default)]
    pub dev: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
}

fn default_val_fraction() -> f64 {
    0.1
}

fn default_min_count() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommitteeSection {
    pub k: usize,
    pub base_seed: u64,
}

impl Default for CommitteeSection {
    fn default() -> Self {
        CommitteeSection { k: 1, base_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HpoSection {
    pub space: SearchSpace,
    pub n_iter: usize,
    pub n_init: usize,
    pub seed: u64,
    pub xi: f64,
    pub restarts: usize,
}

impl Default for HpoSection {
    fn default() -> Self {
        let bo = BoOptions::default();
        HpoSection {
            space: SearchSpace::default_utrs(),
            n_iter: bo.n_iter,
            n_init: bo.n_init,
            seed: bo.seed,
            xi: DEFAULT_XI,
            restarts: bo.restarts,
        }
    }
}

impl HpoSection {
    pub fn bo_options(&self) -> BoOptions {
        BoOptions {
            n_iter: self.n_iter,
            n_init: self.n_init,
            seed: self.seed,
            xi: self.xi,
            restarts: self.restarts,
        }
    }
}

/// Everything a `train`, `prepare` or `hpo` run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainOptions,
    #[serde(default)]
    pub committee: CommitteeSection,
    #[serde(default)]
    pub hpo: HpoSection,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// Resolves a dataset path: as given if it exists, else under `DEL_DATA_DIR`.
pub fn resolve_path(path: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(root) => {
            let joined = Path::new(&root).join(path);
            if joined.exists() {
                joined
            } else {
                path.to_path_buf()
            }
        }
        None => path.to_path_buf(),
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} file {} does not exist", path.display())))
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Applies a `--seed` override to every seed in the config.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.model.seed = s;
            self.train.seed = s;
            self.committee.base_seed = s;
            self.hpo.seed = s;
        }
        self
    }

    /// Resolves data paths and checks every input exists and every section
    /// is well formed, before any work starts.
    pub fn resolve_and_validate(mut self) -> Result<Self> {
        self.data.train = resolve_path(&self.data.train);
        require_file(&self.data.train, "train")?;
        for (p, what) in [(&mut self.data.dev, "dev"), (&mut self.data.test, "test")] {
            if let Some(p) = p {
                *p = resolve_path(p);
                require_file(p, what)?;
            }
        }
        if let EmbeddingSource::File { path } = &mut self.model.embeddings {
            *path = resolve_path(path);
            require_file(path, "embedding")?;
        }
        if !(self.data.val_fraction > 0.0 && self.data.val_fraction < 1.0) {
            return Err(Error::Config(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.data.val_fraction
            )));
        }
        if self.data.min_count == 0 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        if self.committee.k == 0 {
            return Err(Error::Config("committee.k must be at least 1".into()));
        }
        if self.train.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        self.model.validate()?;
        self.hpo.space.validate()?;
        Ok(self)
    }

    pub fn out_dir(&self, flag: Option<&Path>) -> Result<PathBuf> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.out_dir.clone())
            .ok_or_else(|| Error::Config("no output directory: pass --out or set out_dir".into()))
    }
}
