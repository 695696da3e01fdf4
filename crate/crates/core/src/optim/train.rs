use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{GraphExample, NodeDataset};
use crate::error::{Error, Result};
use crate::graph::Split;
use crate::model::{HdgcnModel, Task};
use crate::param::ParamSet;
use crate::tape::Tape;

use super::{AdaBeliefConfig, AdaBeliefState, Metrics};

/// Training-loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Graphs per optimiser step (graph task only).
    pub batch_size: usize,
    /// Validation cadence in epochs.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let opt = AdaBeliefConfig::default();
        TrainConfig {
            epochs: 200,
            lr: opt.lr,
            beta1: opt.beta1,
            beta2: opt.beta2,
            eps: opt.eps,
            seed: 0,
            batch_size: 32,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn optimizer(&self) -> AdaBeliefConfig {
        AdaBeliefConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be >= 1".into()));
        }
        self.optimizer().validate()
    }
}

/// Supervision handed to [`train`].
#[derive(Debug, Clone, Copy)]
pub enum TrainData<'a> {
    Node(&'a NodeDataset),
    Graph {
        train: &'a [GraphExample],
        val: &'a [GraphExample],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were restored into the model.
    pub best_epoch: usize,
    pub best_val_acc: Option<f64>,
}

impl TrainOutcome {
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_acc\n");
        for r in &self.history {
            let val = r.val_acc.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.epoch, r.train_loss, r.train_acc, val
            ));
        }
        out
    }
}

/// Full-batch training for node tasks, shuffled minibatches for graph tasks.
///
/// On return the model holds the parameters of the epoch with the best
/// validation accuracy (earliest on ties), or of the last epoch when there
/// is no validation data.
pub fn train(
    model: &mut HdgcnModel,
    data: TrainData<'_>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let task = model.config().task;
    match (task, &data) {
        (Task::Node, TrainData::Node(_)) | (Task::Graph, TrainData::Graph { .. }) => {}
        _ => {
            return Err(Error::Config(format!(
                "model task {task:?} does not match the dataset"
            )))
        }
    }
    let mut opt = AdaBeliefState::new(&model.params, cfg.optimizer());
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ParamSet)> = None;

    let (train_nodes, train_labels) = match data {
        TrainData::Node(ds) => ds.split(Split::Train),
        TrainData::Graph { .. } => (Vec::new(), Vec::new()),
    };
    let has_val = match data {
        TrainData::Node(ds) => !ds.graph.split_nodes(Split::Val).is_empty(),
        TrainData::Graph { train, val } => {
            if train.is_empty() {
                return Err(Error::Data("training corpus is empty".into()));
            }
            !val.is_empty()
        }
    };
    if let TrainData::Node(_) = data {
        if train_nodes.is_empty() {
            return Err(Error::Data("train split is empty".into()));
        }
    }

    for epoch in 1..=cfg.epochs {
        let (train_loss, train_acc) = match data {
            TrainData::Node(ds) => {
                let mut tape = Tape::new();
                let pass = model.network.forward(
                    &mut tape,
                    &model.params,
                    &ds.input,
                    Some(&mut dropout_rng),
                )?;
                let logits = tape.select_rows(pass.logits, &train_nodes)?;
                let loss = tape.cross_entropy(logits, &train_labels)?;
                let pred = tape.value(logits).argmax_rows();
                let acc = super::metrics::accuracy(&pred, &train_labels);
                let loss_value = tape.value(loss)[(0, 0)];
                tape.backward_into(loss, &mut model.params)?;
                opt.step(&mut model.params)?;
                (loss_value, acc)
            }
            TrainData::Graph { train, .. } => {
                let mut idx: Vec<usize> = (0..train.len()).collect();
                idx.shuffle(&mut order_rng);
                let mut loss_sum = 0.0;
                let mut hits = 0;
                for batch in idx.chunks(cfg.batch_size) {
                    let mut tape = Tape::new();
                    let mut total = None;
                    for &i in batch {
                        let ex = &train[i];
                        let pass = model.network.forward(
                            &mut tape,
                            &model.params,
                            &ex.input,
                            Some(&mut dropout_rng),
                        )?;
                        if tape.value(pass.logits).argmax_rows()[0] == ex.label {
                            hits += 1;
                        }
                        let l = tape.cross_entropy(pass.logits, &[ex.label])?;
                        total = Some(match total {
                            None => l,
                            Some(t) => tape.add(t, l)?,
                        });
                    }
                    let total = total.expect("chunks are non-empty");
                    loss_sum += tape.value(total)[(0, 0)];
                    let loss = tape.scale(total, 1.0 / batch.len() as f64);
                    tape.backward_into(loss, &mut model.params)?;
                    opt.step(&mut model.params)?;
                }
                (
                    loss_sum / train.len() as f64,
                    hits as f64 / train.len() as f64,
                )
            }
        };

        let val_acc = if has_val && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            let acc = match data {
                TrainData::Node(ds) => evaluate_nodes(model, ds, Split::Val)?.accuracy,
                TrainData::Graph { val, .. } => evaluate_graphs(model, val)?.accuracy,
            };
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, epoch, model.params.clone()));
            }
            Some(acc)
        } else {
            None
        };
        log::debug!(
            "epoch {epoch}: loss {train_loss:.6} train_acc {train_acc:.4} val_acc {val_acc:?}"
        );
        history.push(EpochRecord {
            epoch,
            train_loss,
            train_acc,
            val_acc,
        });
    }

    let (best_epoch, best_val_acc) = match best {
        Some((acc, epoch, params)) => {
            model.params = params;
            (epoch, Some(acc))
        }
        None => (cfg.epochs, None),
    };
    model.params.zero_grads();
    Ok(TrainOutcome {
        history,
        best_epoch,
        best_val_acc,
    })
}

/// Scores of the model on the nodes of `split`.
pub fn evaluate_nodes(model: &HdgcnModel, ds: &NodeDataset, split: Split) -> Result<Metrics> {
    let (nodes, labels) = ds.split(split);
    let out = model.predict(&ds.input)?;
    let pred = out.logits.select_rows(&nodes).argmax_rows();
    Ok(Metrics::compute(&pred, &labels, model.config().num_classes))
}

/// Scores of the model over a set of graphs.
pub fn evaluate_graphs(model: &HdgcnModel, examples: &[GraphExample]) -> Result<Metrics> {
    let mut pred = Vec::with_capacity(examples.len());
    for ex in examples {
        pred.push(model.predict(&ex.input)?.logits.argmax_rows()[0]);
    }
    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
    Ok(Metrics::compute(&pred, &labels, model.config().num_classes))
}
