use std::fs;
use std::path::{Path, PathBuf};

use hdgcn::data::{
    load_node_dataset, load_text_corpus, load_word_vectors, FeatureSource, GraphExample,
    NodeDataset, Vocab, WordVectors,
};
use hdgcn::graph::{
    feature_alignment_steps, read_graph, AlignmentOutcome, GraphInput, Split, TransitionRegime,
    DENSE_GUARD,
};
use hdgcn::model::{Checkpoint, HdgcnModel, Task};
use hdgcn::mvcattn::{dynamic_adjacency_row, effective_dynamic_adjacency, matrix_to_csv};
use hdgcn::optim::{evaluate_graphs, evaluate_nodes, train, Metrics, TrainData, TrainOutcome};
use hdgcn::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// How node features were produced, stored in the checkpoint so that
/// evaluation rebuilds identical inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSpec {
    /// Features come from the graph file itself.
    File,
    OneHot {
        vocab: Vec<String>,
    },
    Embeddings {
        path: PathBuf,
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub features: FeatureSpec,
    pub window: usize,
    pub seed: u64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub best_epoch: usize,
    pub train: Metrics,
    pub val: Option<Metrics>,
    pub test: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub test: Metrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationReport {
    pub steps_with_transition: Option<usize>,
    pub steps_without: Option<usize>,
    pub gap: Option<i64>,
}

enum Loaded {
    Node(NodeDataset),
    Graph {
        train: Vec<GraphExample>,
        val: Vec<GraphExample>,
        test: Vec<GraphExample>,
        num_classes: usize,
        input_dim: usize,
    },
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn load_vectors(spec: &FeatureSpec) -> Result<Option<WordVectors>> {
    match spec {
        FeatureSpec::Embeddings { path, dim } => Ok(Some(load_word_vectors(path, *dim)?)),
        _ => Ok(None),
    }
}

fn corpus_examples(
    path: &Path,
    window: usize,
    spec: &FeatureSpec,
    vocab: Option<&Vocab>,
    vectors: Option<&WordVectors>,
) -> Result<Vec<GraphExample>> {
    let corpus = load_text_corpus(path, window)?;
    let source = match (spec, vocab, vectors) {
        (FeatureSpec::OneHot { .. }, Some(v), _) => FeatureSource::OneHot(v),
        (FeatureSpec::Embeddings { .. }, _, Some(w)) => FeatureSource::Embeddings(w),
        _ => {
            return Err(Error::Config(
                "feature source does not match the graph task".into(),
            ))
        }
    };
    let (examples, oov) = corpus.examples(source)?;
    if oov > 0 {
        log::warn!("{}: {oov} tokens used the shared OOV row", path.display());
    }
    Ok(examples)
}

fn load_for_training(cfg: &RunConfig) -> Result<(Loaded, FeatureSpec)> {
    match cfg.task {
        Task::Node => {
            let path = cfg.data.graph.as_ref().expect("validated");
            Ok((Loaded::Node(load_node_dataset(path)?), FeatureSpec::File))
        }
        Task::Graph => {
            let train_path = cfg.data.train_corpus.as_ref().expect("validated");
            let window = cfg.data.window;
            let spec = match &cfg.data.embeddings {
                Some(p) => FeatureSpec::Embeddings {
                    path: p.clone(),
                    dim: cfg.data.embedding_dim,
                },
                None => FeatureSpec::OneHot {
                    vocab: load_text_corpus(train_path, window)?.vocab().tokens(),
                },
            };
            let vocab = match &spec {
                FeatureSpec::OneHot { vocab } => Some(Vocab::from_tokens(vocab)?),
                _ => None,
            };
            let vectors = load_vectors(&spec)?;
            let load = |p: &Option<PathBuf>| -> Result<Vec<GraphExample>> {
                match p {
                    Some(p) => corpus_examples(p, window, &spec, vocab.as_ref(), vectors.as_ref()),
                    None => Ok(Vec::new()),
                }
            };
            let train = load(&cfg.data.train_corpus)?;
            let val = load(&cfg.data.val_corpus)?;
            let test = load(&cfg.data.test_corpus)?;
            let num_classes = train
                .iter()
                .chain(&val)
                .chain(&test)
                .map(|e| e.label + 1)
                .max()
                .unwrap_or(0);
            let input_dim = match &spec {
                FeatureSpec::OneHot { vocab } => vocab.len(),
                FeatureSpec::Embeddings { dim, .. } => *dim,
                FeatureSpec::File => unreachable!(),
            };
            Ok((
                Loaded::Graph {
                    train,
                    val,
                    test,
                    num_classes,
                    input_dim,
                },
                spec,
            ))
        }
    }
}

fn optional(m: Metrics) -> Option<Metrics> {
    (m.count > 0).then_some(m)
}

/// Result of [`cmd_train`].
#[derive(Debug)]
pub struct TrainRun {
    pub outcome: TrainOutcome,
    pub metrics: TrainMetrics,
    pub output_dir: PathBuf,
}

/// Trains from a validated run config and writes `config.toml`,
/// `history.csv`, `history.json`, `checkpoint.json` and `metrics.json`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainRun> {
    cfg.validate()?;
    let (loaded, spec) = load_for_training(cfg)?;
    let tcfg = cfg.train_config();
    let (mut model, outcome, metrics) = match &loaded {
        Loaded::Node(ds) => {
            let mcfg = cfg
                .model
                .to_config(Task::Node, ds.feature_width(), ds.num_classes);
            let mut model = HdgcnModel::new(mcfg, cfg.seed)?;
            let outcome = train(&mut model, TrainData::Node(ds), &tcfg)?;
            let metrics = TrainMetrics {
                best_epoch: outcome.best_epoch,
                train: evaluate_nodes(&model, ds, Split::Train)?,
                val: optional(evaluate_nodes(&model, ds, Split::Val)?),
                test: optional(evaluate_nodes(&model, ds, Split::Test)?),
            };
            (model, outcome, metrics)
        }
        Loaded::Graph {
            train: tr,
            val,
            test,
            num_classes,
            input_dim,
        } => {
            let mcfg = cfg.model.to_config(Task::Graph, *input_dim, *num_classes);
            let mut model = HdgcnModel::new(mcfg, cfg.seed)?;
            let outcome = train(&mut model, TrainData::Graph { train: tr, val }, &tcfg)?;
            let metrics = TrainMetrics {
                best_epoch: outcome.best_epoch,
                train: evaluate_graphs(&model, tr)?,
                val: optional(evaluate_graphs(&model, val)?),
                test: optional(evaluate_graphs(&model, test)?),
            };
            (model, outcome, metrics)
        }
    };
    model.params.zero_grads();
    let meta = CheckpointMeta {
        features: spec,
        window: cfg.data.window,
        seed: cfg.seed,
        best_epoch: outcome.best_epoch,
    };
    let ckpt = Checkpoint::from_model(&model, serde_json::to_value(&meta).expect("serialisable"));

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    write(dir, "config.toml", &cfg.to_toml())?;
    write(dir, "history.csv", &outcome.history_csv())?;
    write(dir, "history.json", &to_json(&outcome.history))?;
    ckpt.save(dir.join("checkpoint.json"))?;
    write(dir, "metrics.json", &to_json(&metrics))?;
    Ok(TrainRun {
        outcome,
        metrics,
        output_dir: dir.clone(),
    })
}

fn load_checkpoint(path: &Path) -> Result<(HdgcnModel, CheckpointMeta)> {
    if !path.is_file() {
        return Err(Error::Usage(format!(
            "checkpoint {} does not exist",
            path.display()
        )));
    }
    let ckpt = Checkpoint::load(path)?;
    let meta: CheckpointMeta = serde_json::from_value(ckpt.metadata.clone())
        .map_err(|e| Error::Corrupt(format!("checkpoint metadata: {e}")))?;
    Ok((ckpt.to_model()?, meta))
}

/// Evaluation inputs: the test split of a graph file, or every document of a corpus.
enum EvalSet {
    Node(NodeDataset),
    Graph(Vec<GraphExample>),
}

fn load_eval_set(model: &HdgcnModel, meta: &CheckpointMeta, dataset: &Path) -> Result<EvalSet> {
    if !dataset.is_file() {
        return Err(Error::Usage(format!(
            "dataset {} does not exist",
            dataset.display()
        )));
    }
    match model.config().task {
        Task::Node => Ok(EvalSet::Node(load_node_dataset(dataset)?)),
        Task::Graph => {
            let vocab = match &meta.features {
                FeatureSpec::OneHot { vocab } => Some(Vocab::from_tokens(vocab)?),
                _ => None,
            };
            let vectors = load_vectors(&meta.features)?;
            Ok(EvalSet::Graph(corpus_examples(
                dataset,
                meta.window,
                &meta.features,
                vocab.as_ref(),
                vectors.as_ref(),
            )?))
        }
    }
}

fn check_width(model: &HdgcnModel, input: &GraphInput) -> Result<()> {
    let want = model.config().input_dim;
    if input.features.cols() != want {
        return Err(Error::Dimension {
            op: "dataset features vs checkpoint",
            left: input.features.shape(),
            right: (input.n(), want),
        });
    }
    Ok(())
}

/// Test-split metrics of a checkpoint; writes `eval.json` when `output` is set.
pub fn cmd_eval(checkpoint: &Path, dataset: &Path, output: Option<&Path>) -> Result<EvalMetrics> {
    let (model, meta) = load_checkpoint(checkpoint)?;
    let test = match load_eval_set(&model, &meta, dataset)? {
        EvalSet::Node(ds) => {
            check_width(&model, &ds.input)?;
            if ds.graph.split_nodes(Split::Test).is_empty() {
                return Err(Error::Data("dataset has no test split".into()));
            }
            evaluate_nodes(&model, &ds, Split::Test)?
        }
        EvalSet::Graph(examples) => {
            for ex in &examples {
                check_width(&model, &ex.input)?;
            }
            evaluate_graphs(&model, &examples)?
        }
    };
    let metrics = EvalMetrics { test };
    if let Some(dir) = output {
        fs::create_dir_all(dir)?;
        write(dir, "eval.json", &to_json(&metrics))?;
    }
    Ok(metrics)
}

/// Writes attention traces of every dynamic unit for one selected node
/// (node task) or document (graph task). Returns the files written.
pub fn cmd_inspect(
    checkpoint: &Path,
    dataset: &Path,
    select: usize,
    output: &Path,
) -> Result<Vec<PathBuf>> {
    let (model, meta) = load_checkpoint(checkpoint)?;
    let (input, node) = match load_eval_set(&model, &meta, dataset)? {
        EvalSet::Node(ds) => {
            if select >= ds.n() {
                return Err(Error::Usage(format!(
                    "node {select} out of range for {} nodes",
                    ds.n()
                )));
            }
            (ds.input, Some(select))
        }
        EvalSet::Graph(mut examples) => {
            if select >= examples.len() {
                return Err(Error::Usage(format!(
                    "document {select} out of range for {} documents",
                    examples.len()
                )));
            }
            (examples.swap_remove(select).input, None)
        }
    };
    check_width(&model, &input)?;
    let out = model.predict(&input)?;
    if out.traces.is_empty() {
        return Err(Error::Usage(
            "model has no attention units to inspect".into(),
        ));
    }
    let units = model.config().units();
    fs::create_dir_all(output)?;
    let mut written = Vec::new();
    for (idx, trace) in out.traces.iter().enumerate() {
        let stem = format!("trace_l{}_k{}", idx / units, trace.order);
        written.push(write(output, &format!("{stem}.json"), &trace.to_json())?);
        written.push(write(
            output,
            &format!("{stem}_af.csv"),
            &matrix_to_csv(&trace.a_f),
        )?);
        written.push(write(
            output,
            &format!("{stem}_ab.csv"),
            &matrix_to_csv(&trace.a_b),
        )?);
        if let Some(v) = node {
            let row = dynamic_adjacency_row(trace, v)?;
            written.push(write(
                output,
                &format!("{stem}_ad_node{v}.csv"),
                &matrix_to_csv(&row),
            )?);
        }
        if trace.nodes() <= DENSE_GUARD {
            let ad = effective_dynamic_adjacency(trace)?;
            written.push(write(
                output,
                &format!("{stem}_ad.csv"),
                &matrix_to_csv(&ad),
            )?);
        }
    }
    Ok(written)
}

/// Steps until two nodes' features align with and without the probability
/// transition. Writes `propagation.json` when `output` is set.
pub fn cmd_propagate(
    graph: &Path,
    src: usize,
    dst: usize,
    threshold: f64,
    max_steps: usize,
    output: Option<&Path>,
) -> Result<PropagationReport> {
    if !graph.is_file() {
        return Err(Error::Usage(format!(
            "graph {} does not exist",
            graph.display()
        )));
    }
    let g = read_graph(graph)?;
    let features = g.feature_matrix();
    let run = |regime| {
        feature_alignment_steps(
            &g.adjacency,
            &features,
            src,
            dst,
            regime,
            threshold,
            max_steps,
        )
    };
    let with = run(TransitionRegime::WithTransition)?;
    let without = run(TransitionRegime::WithoutTransition)?;
    let gap = match (with, without) {
        (AlignmentOutcome::Converged(a), AlignmentOutcome::Converged(b)) => {
            Some(b as i64 - a as i64)
        }
        _ => None,
    };
    let report = PropagationReport {
        steps_with_transition: with.steps(),
        steps_without: without.steps(),
        gap,
    };
    if let Some(dir) = output {
        fs::create_dir_all(dir)?;
        write(dir, "propagation.json", &to_json(&report))?;
    }
    Ok(report)
}

pub fn report_json<T: Serialize>(value: &T) -> String {
    to_json(value)
}
