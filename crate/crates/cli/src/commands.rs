//! Implementations of the four subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use hetgfl::graph::{make_split, SplitSpec};
use hetgfl::model::{self, ModelConfig};
use hetgfl::train::{report_on_mask, TrainConfig};
use hetgfl::{load_dataset, Checkpoint, HeteroGraph, MetricsReport, Split, Tape};

use crate::manifest::{fingerprint, DerivedSeeds, KMeansManifest, RunManifest};
use crate::{ClusterArgs, EvalArgs, ExportArgs, SplitSel, SynthArgs, TrainArgs};

/// Usage errors exit 2, runtime failures exit 1.
pub enum CliError {
    Usage(String),
    Runtime(hetgfl::Error),
}

impl From<hetgfl::Error> for CliError {
    fn from(e: hetgfl::Error) -> Self {
        CliError::Runtime(e)
    }
}

pub type CliResult = Result<(), CliError>;

fn load_graph(data: &Path) -> Result<HeteroGraph, CliError> {
    Ok(load_dataset(data)?)
}

/// Dataset splits resolve in file order of precedence: an on-disk
/// `split.tsv` wins; otherwise a stratified split is drawn from the
/// derived split seed.
fn ensure_split(graph: &mut HeteroGraph, fractions: (f64, f64, f64), seed: u64) -> CliResult {
    if !graph.masks().is_unset() {
        log::info!("using split.tsv from the dataset directory");
        return Ok(());
    }
    let spec = SplitSpec::new(fractions.0, fractions.1, fractions.2, seed)?;
    let masks = make_split(graph, &spec)?;
    graph.set_masks(masks)?;
    Ok(())
}

#[derive(Serialize)]
struct SplitMetrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    train: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    val: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    all: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    paper_literal_f1: Option<BTreeMap<String, serde_json::Value>>,
}

pub fn cmd_train(args: &TrainArgs) -> CliResult {
    let mut graph = load_graph(&args.data)?;
    let seeds = DerivedSeeds::from(args.seed);
    ensure_split(&mut graph, args.split_mode.fractions(), seeds.split)?;

    let mut ablations = hetgfl::Ablations::default();
    for a in &args.ablate {
        ablations.set(a).map_err(CliError::Usage)?;
    }
    let model_config = ModelConfig {
        n_layers: args.layers,
        dims: vec![args.dim; args.layers + 1],
        edge_dim: args.edge_dim,
        agg: args.agg,
        beta: args.beta,
        leaky_slope: args.leaky_slope,
        loss: args.loss,
        ablations,
        weight_decay: args.weight_decay,
        unsquared_penalty: args.unsquared_penalty,
        seed: seeds.init,
    };
    model_config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    fs::create_dir_all(&args.out).map_err(hetgfl::Error::from)?;
    let history_path = args.out.join("history.jsonl");
    let train_config = TrainConfig {
        lr: args.lr,
        max_epochs: args.epochs,
        patience: args.patience,
        seed: args.seed,
        log_path: Some(history_path.clone()),
        ..TrainConfig::default()
    };
    train_config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let (params, history) = hetgfl::train(&graph, &model_config, &train_config)?;
    log::info!(
        "trained {} epochs, best validation epoch {}",
        history.epochs.len(),
        history.epochs[history.best_epoch].epoch
    );

    let mut tape = Tape::new();
    let pass = model::forward(&mut tape, &graph, &params, &model_config)?;
    let probs = tape.values(pass.probs);
    let metrics = SplitMetrics {
        train: None,
        val: Some(report_on_mask(probs, &graph, &graph.masks().val, args.loss)?),
        test: Some(report_on_mask(probs, &graph, &graph.masks().test, args.loss)?),
        all: None,
        paper_literal_f1: None,
    };
    let metrics_json = serde_json::to_value(&metrics).map_err(hetgfl::Error::from)?;

    let checkpoint_path = args.out.join("checkpoint.json");
    Checkpoint::new(model_config.clone(), params).save(&checkpoint_path)?;
    let metrics_path = args.out.join("metrics.json");
    fs::write(
        &metrics_path,
        serde_json::to_string_pretty(&metrics_json).map_err(hetgfl::Error::from)?,
    )
    .map_err(hetgfl::Error::from)?;
    // persist the resolved split so eval can reproduce it
    let split_path = args.out.join("split.tsv");
    hetgfl::save_split(&graph, &split_path)?;

    let manifest = RunManifest {
        command: "train".into(),
        dataset_dir: args.data.display().to_string(),
        dataset_fingerprint: fingerprint(&args.data)?,
        seed: args.seed,
        derived_seeds: seeds,
        model_config: Some(model_config),
        train_config: Some(TrainConfig {
            log_path: None,
            ..train_config
        }),
        kmeans: None,
        artifacts: artifact_map(&[
            ("checkpoint", &checkpoint_path),
            ("history", &history_path),
            ("metrics", &metrics_path),
            ("split", &split_path),
        ]),
        metrics: metrics_json.clone(),
    };
    manifest.write(&args.out.join("manifest.json"))?;

    println!(
        "{}",
        serde_json::to_string_pretty(&metrics_json).map_err(hetgfl::Error::from)?
    );
    Ok(())
}

fn artifact_map(entries: &[(&str, &PathBuf)]) -> BTreeMap<String, String> {
    entries
        .iter()
        .map(|(k, p)| (k.to_string(), p.display().to_string()))
        .collect()
}

fn load_checkpoint_for(graph: &HeteroGraph, path: &Path) -> Result<Checkpoint, CliError> {
    let ckpt = Checkpoint::load(path)?;
    ckpt.params.meta.check_graph(graph)?;
    Ok(ckpt)
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult {
    let graph = load_graph(&args.data)?;
    let ckpt = load_checkpoint_for(&graph, &args.checkpoint)?;

    let mut tape = Tape::new();
    let pass = model::forward(&mut tape, &graph, &ckpt.params, &ckpt.config)?;
    let probs = tape.values(pass.probs);

    let all_labeled: Vec<bool> = graph.labels().iter().map(|l| !l.is_empty()).collect();
    let selected: Vec<(&str, Vec<bool>)> = match args.split {
        SplitSel::All => {
            let mut v = vec![("all", all_labeled)];
            if !graph.masks().is_unset() {
                v.push(("train", graph.mask_of(Split::Train).to_vec()));
                v.push(("val", graph.mask_of(Split::Val).to_vec()));
                v.push(("test", graph.mask_of(Split::Test).to_vec()));
            }
            v
        }
        sel => {
            if graph.masks().is_unset() {
                return Err(CliError::Runtime(hetgfl::Error::Split(
                    "dataset has no split.tsv; only --split all is available".into(),
                )));
            }
            let (name, split) = match sel {
                SplitSel::Train => ("train", Split::Train),
                SplitSel::Val => ("val", Split::Val),
                SplitSel::Test => ("test", Split::Test),
                SplitSel::All => unreachable!(),
            };
            vec![(name, graph.mask_of(split).to_vec())]
        }
    };

    let mut out = SplitMetrics {
        train: None,
        val: None,
        test: None,
        all: None,
        paper_literal_f1: args.paper_literal_f1.then(BTreeMap::new),
    };
    for (name, mask) in &selected {
        let report = report_on_mask(probs, &graph, mask, ckpt.config.loss)?;
        if let Some(literal) = out.paper_literal_f1.as_mut() {
            literal.insert((*name).to_string(), literal_f1_json(&graph, probs, mask, &ckpt)?);
        }
        match *name {
            "train" => out.train = Some(report),
            "val" => out.val = Some(report),
            "test" => out.test = Some(report),
            _ => out.all = Some(report),
        }
    }

    let json = serde_json::to_string_pretty(&out).map_err(hetgfl::Error::from)?;
    if let Some(path) = &args.out {
        fs::write(path, &json).map_err(hetgfl::Error::from)?;
    }
    println!("{json}");
    Ok(())
}

fn literal_f1_json(
    graph: &HeteroGraph,
    probs: &[f64],
    mask: &[bool],
    ckpt: &Checkpoint,
) -> Result<serde_json::Value, CliError> {
    use hetgfl::model::Predictions;
    use hetgfl::ConfusionTally;
    let n = graph.n_nodes();
    let c = graph.n_classes();
    let idx: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    let tally = match model::predict(probs, n, c, ckpt.config.loss) {
        Predictions::SingleLabel(pred) => {
            let truth: Vec<usize> = idx.iter().map(|&i| graph.labels()[i][0]).collect();
            let pred: Vec<usize> = idx.iter().map(|&i| pred[i]).collect();
            ConfusionTally::from_single_label(&truth, &pred)?
        }
        Predictions::MultiLabel(pred) => {
            let y = graph.label_matrix();
            let mut truth = Vec::new();
            let mut p = Vec::new();
            for &i in &idx {
                truth.extend(y[i * c..(i + 1) * c].iter().map(|&v| v != 0.0));
                p.extend_from_slice(&pred[i * c..(i + 1) * c]);
            }
            ConfusionTally::from_indicator(&truth, &p, c)?
        }
    };
    Ok(serde_json::json!({
        "micro_f1": tally.micro_f1_paper_literal(),
        "macro_f1": tally.macro_f1_paper_literal(),
    }))
}

pub fn cmd_cluster(args: &ClusterArgs) -> CliResult {
    let graph = load_graph(&args.data)?;
    let ckpt = load_checkpoint_for(&graph, &args.checkpoint)?;
    let seeds = DerivedSeeds::from(args.seed);
    let kmeans_seed = args.kmeans_seed.unwrap_or(seeds.kmeans);

    let k = args.k.unwrap_or_else(|| graph.n_classes());
    if k != graph.n_classes() {
        log::warn!(
            "clustering with k = {k}, overriding the dataset's {} classes",
            graph.n_classes()
        );
        eprintln!(
            "warning: k = {k} overrides the dataset's {} classes",
            graph.n_classes()
        );
    }

    let mut tape = Tape::new();
    let pass = model::forward(&mut tape, &graph, &ckpt.params, &ckpt.config)?;
    let reps = if args.raw_representation {
        tape.values(pass.h_last)
    } else {
        tape.values(pass.embeddings)
    };
    let n = graph.n_nodes();
    let d = reps.len() / n;
    let result = hetgfl::kmeans(reps, n, d, k, kmeans_seed, args.max_iter, 1e-6)?;

    // evaluate against ground truth on labeled nodes (primary class)
    let labeled: Vec<usize> = (0..n).filter(|&i| !graph.labels()[i].is_empty()).collect();
    let truth: Vec<usize> = labeled.iter().map(|&i| graph.labels()[i][0]).collect();
    let pred: Vec<usize> = labeled.iter().map(|&i| result.assignments[i]).collect();
    let report = MetricsReport::clustering(&truth, &pred)?;
    let metrics_json = serde_json::to_value(&report).map_err(hetgfl::Error::from)?;

    fs::create_dir_all(&args.out).map_err(hetgfl::Error::from)?;
    let assign_path = args.out.join("assignments.tsv");
    let mut f = fs::File::create(&assign_path).map_err(hetgfl::Error::from)?;
    for (i, a) in result.assignments.iter().enumerate() {
        writeln!(f, "{i}\t{a}").map_err(hetgfl::Error::from)?;
    }
    let metrics_path = args.out.join("cluster_metrics.json");
    fs::write(
        &metrics_path,
        serde_json::to_string_pretty(&metrics_json).map_err(hetgfl::Error::from)?,
    )
    .map_err(hetgfl::Error::from)?;

    let manifest = RunManifest {
        command: "cluster".into(),
        dataset_dir: args.data.display().to_string(),
        dataset_fingerprint: fingerprint(&args.data)?,
        seed: args.seed,
        derived_seeds: seeds,
        model_config: Some(ckpt.config.clone()),
        train_config: None,
        kmeans: Some(KMeansManifest {
            k,
            seed: kmeans_seed,
            representation: if args.raw_representation {
                "raw".into()
            } else {
                "normalized".into()
            },
        }),
        artifacts: artifact_map(&[("assignments", &assign_path), ("metrics", &metrics_path)]),
        metrics: metrics_json.clone(),
    };
    manifest.write(&args.out.join("manifest.json"))?;

    println!(
        "{}",
        serde_json::to_string_pretty(&metrics_json).map_err(hetgfl::Error::from)?
    );
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult {
    let graph = hetgfl::synth_planted(
        args.nodes,
        args.node_types,
        args.edge_types,
        args.classes,
        args.homophily,
        args.seed,
    )?;
    hetgfl::save_dataset(&graph, &args.out)?;
    log::info!(
        "wrote {} nodes, {} edges to {}",
        graph.n_nodes(),
        graph.n_edges(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_export_embeddings(args: &ExportArgs) -> CliResult {
    let graph = load_graph(&args.data)?;
    let ckpt = load_checkpoint_for(&graph, &args.checkpoint)?;

    let mut tape = Tape::new();
    let pass = model::forward(&mut tape, &graph, &ckpt.params, &ckpt.config)?;
    let emb = tape.values(pass.embeddings);
    let n = graph.n_nodes();
    let d = emb.len() / n;

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(hetgfl::Error::from)?;
        }
    }
    let file = fs::File::create(&args.out).map_err(hetgfl::Error::from)?;
    let mut w = std::io::BufWriter::new(file);
    for i in 0..n {
        write!(w, "{i}").map_err(hetgfl::Error::from)?;
        for v in &emb[i * d..(i + 1) * d] {
            // nine significant digits survive the text round trip
            write!(w, "\t{v:.8e}").map_err(hetgfl::Error::from)?;
        }
        writeln!(w).map_err(hetgfl::Error::from)?;
    }
    w.flush().map_err(hetgfl::Error::from)?;
    log::info!("wrote {n} embedding rows of width {d}");
    Ok(())
}
