//! Run configuration: one TOML file with `[data]`, `[model]` and `[train]`
//! sections. Relative paths are resolved against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use hdgcn::data::DEFAULT_WINDOW;
use hdgcn::model::{HdgcnConfig, Task, TransitionMode};
use hdgcn::optim::TrainConfig;
use hdgcn::{Activation, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; every command currently runs single-threaded.
    pub threads: usize,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Node task: graph file with labels and split masks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<PathBuf>,
    /// Graph task: `<class>\t<tokens>` corpora.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_corpus: Option<PathBuf>,
    /// Word vectors; one-hot token features when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    pub embedding_dim: usize,
    pub window: usize,
}

/// Architecture settings; input width and class count come from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub order: usize,
    pub layers: usize,
    pub hidden: usize,
    pub forward_key_dim: usize,
    pub backward_key_dim: usize,
    pub supernodes: usize,
    pub activation: Activation,
    pub mode: TransitionMode,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub eval_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Node,
            seed: 0,
            output_dir: PathBuf::from("out"),
            threads: 1,
            data: DataSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            graph: None,
            train_corpus: None,
            val_corpus: None,
            test_corpus: None,
            embeddings: None,
            embedding_dim: HdgcnConfig::default().input_dim,
            window: DEFAULT_WINDOW,
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = HdgcnConfig::default();
        ModelSection {
            order: m.order,
            layers: m.layers,
            hidden: m.hidden,
            forward_key_dim: m.forward_key_dim,
            backward_key_dim: m.backward_key_dim,
            supernodes: m.supernodes,
            activation: m.activation,
            mode: m.mode,
            dropout: m.dropout,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            lr: t.lr,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            batch_size: t.batch_size,
            eval_every: t.eval_every,
        }
    }
}

impl ModelSection {
    pub fn to_config(&self, task: Task, input_dim: usize, num_classes: usize) -> HdgcnConfig {
        HdgcnConfig {
            order: self.order,
            layers: self.layers,
            input_dim,
            hidden: self.hidden,
            forward_key_dim: self.forward_key_dim,
            backward_key_dim: self.backward_key_dim,
            supernodes: self.supernodes,
            activation: self.activation,
            mode: self.mode,
            num_classes,
            task,
            dropout: self.dropout,
        }
    }
}

impl RunConfig {
    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            lr: t.lr,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            seed: self.seed,
            batch_size: t.batch_size,
            eval_every: t.eval_every,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    /// Reads `path` and makes every relative path absolute with respect to
    /// the directory containing it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        let d = &mut self.data;
        for p in [
            &mut d.graph,
            &mut d.train_corpus,
            &mut d.val_corpus,
            &mut d.test_corpus,
            &mut d.embeddings,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Checks settings and that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        if self.data.window < 2 {
            return Err(Error::Config(format!(
                "window must be >= 2, got {}",
                self.data.window
            )));
        }
        self.train_config().validate()?;
        self.model.to_config(self.task, 1, 1).validate()?;
        let required: Vec<(&str, &Option<PathBuf>)> = match self.task {
            Task::Node => vec![("data.graph", &self.data.graph)],
            Task::Graph => vec![("data.train_corpus", &self.data.train_corpus)],
        };
        for (key, p) in required {
            if p.is_none() {
                return Err(Error::Config(format!(
                    "`{key}` is required for the {:?} task",
                    self.task
                )));
            }
        }
        let d = &self.data;
        for p in [
            &d.graph,
            &d.train_corpus,
            &d.val_corpus,
            &d.test_corpus,
            &d.embeddings,
        ]
        .into_iter()
        .flatten()
        {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "input file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }
}
