//! On-disk dataset format.
//!
//! A dataset directory holds UTF-8, LF-terminated, tab-separated files:
//!
//! - `node.tsv`  — `node_id <TAB> node_type [<TAB> comma-separated floats]`
//! - `edge.tsv`  — `src <TAB> dst <TAB> edge_type` (one undirected edge per line)
//! - `label.tsv` — `node_id <TAB> comma-separated class ids`
//! - `split.tsv` — `node_id <TAB> {train|val|test}` (optional)
//!
//! All ids are 0-based integers; node ids must be exactly `0..n`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{GraphParts, HeteroGraph, Split};
use crate::error::{Error, Result};

fn read_lines(dir: &Path, name: &str) -> Result<Vec<(usize, String)>> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(Error::MissingFile { path });
    }
    let text = fs::read_to_string(&path)?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn malformed(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Malformed {
        file: file.into(),
        line,
        msg: msg.into(),
    }
}

fn parse_id(file: &str, line: usize, field: &str, what: &str) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|_| malformed(file, line, format!("invalid {what} `{field}`")))
}

fn check_node(file: &str, line: usize, id: usize, n: usize) -> Result<usize> {
    if id >= n {
        Err(Error::DanglingNode {
            file: file.into(),
            line,
            id,
            n,
        })
    } else {
        Ok(id)
    }
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<HeteroGraph> {
    let dir = dir.as_ref();

    // node.tsv
    let mut rows: Vec<(usize, usize, Option<Vec<f64>>, usize)> = Vec::new();
    for (lineno, line) in read_lines(dir, "node.tsv")? {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(malformed(
                "node.tsv",
                lineno,
                format!("expected 2 or 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        let id = parse_id("node.tsv", lineno, fields[0], "node id")?;
        let ty = parse_id("node.tsv", lineno, fields[1], "node type")?;
        let feats = match fields.get(2) {
            Some(f) if !f.trim().is_empty() => {
                let vals: Result<Vec<f64>> = f
                    .split(',')
                    .map(|v| {
                        v.trim().parse::<f64>().map_err(|_| {
                            malformed("node.tsv", lineno, format!("invalid float `{v}`"))
                        })
                    })
                    .collect();
                Some(vals?)
            }
            _ => None,
        };
        rows.push((id, ty, feats, lineno));
    }
    let n = rows.len();
    let mut node_type = vec![usize::MAX; n];
    let mut features: Vec<Option<Vec<f64>>> = vec![None; n];
    for (id, ty, feats, lineno) in rows {
        if id >= n {
            return Err(malformed(
                "node.tsv",
                lineno,
                format!("node id {id} not contiguous in 0..{n}"),
            ));
        }
        if node_type[id] != usize::MAX {
            return Err(Error::DuplicateNode {
                file: "node.tsv".into(),
                line: lineno,
                id,
            });
        }
        node_type[id] = ty;
        features[id] = feats;
    }

    // edge.tsv
    let mut edges = Vec::new();
    for (lineno, line) in read_lines(dir, "edge.tsv")? {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(malformed(
                "edge.tsv",
                lineno,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        let u = check_node(
            "edge.tsv",
            lineno,
            parse_id("edge.tsv", lineno, fields[0], "source id")?,
            n,
        )?;
        let v = check_node(
            "edge.tsv",
            lineno,
            parse_id("edge.tsv", lineno, fields[1], "target id")?,
            n,
        )?;
        let t = parse_id("edge.tsv", lineno, fields[2], "edge type")?;
        edges.push((u, v, t));
    }

    // label.tsv
    let mut labels = Vec::new();
    for (lineno, line) in read_lines(dir, "label.tsv")? {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(malformed(
                "label.tsv",
                lineno,
                format!("expected 2 tab-separated fields, got {}", fields.len()),
            ));
        }
        let id = check_node(
            "label.tsv",
            lineno,
            parse_id("label.tsv", lineno, fields[0], "node id")?,
            n,
        )?;
        let classes: Result<Vec<usize>> = fields[1]
            .split(',')
            .map(|c| parse_id("label.tsv", lineno, c, "class id"))
            .collect();
        labels.push((id, classes?));
    }

    // split.tsv (optional)
    let split = if dir.join("split.tsv").is_file() {
        Some(load_split(dir.join("split.tsv"), n)?)
    } else {
        None
    };

    HeteroGraph::from_parts(GraphParts {
        node_type,
        features,
        edges,
        labels,
        split,
    })
}

/// Reads a standalone split file (`node_id <TAB> {train|val|test}`).
pub fn load_split(path: impl AsRef<Path>, n: usize) -> Result<Vec<(usize, Split)>> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "split.tsv".into());
    let text = fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for (lineno, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
    {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(malformed(
                &name,
                lineno,
                format!("expected 2 tab-separated fields, got {}", fields.len()),
            ));
        }
        let id = check_node(&name, lineno, parse_id(&name, lineno, fields[0], "node id")?, n)?;
        let s = match fields[1].trim() {
            "train" => Split::Train,
            "val" => Split::Val,
            "test" => Split::Test,
            other => return Err(malformed(&name, lineno, format!("unknown split `{other}`"))),
        };
        entries.push((id, s));
    }
    Ok(entries)
}

/// Writes the graph's split masks as a standalone split file.
pub fn save_split(graph: &HeteroGraph, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for i in 0..graph.n_nodes() {
        let s = if graph.masks().train[i] {
            Some(Split::Train)
        } else if graph.masks().val[i] {
            Some(Split::Val)
        } else if graph.masks().test[i] {
            Some(Split::Test)
        } else {
            None
        };
        if let Some(s) = s {
            writeln!(f, "{i}\t{}", s.as_str())?;
        }
    }
    Ok(())
}

/// Writes a graph back out in the dataset format. `load_dataset` of the
/// result reproduces the in-memory graph exactly.
pub fn save_dataset(graph: &HeteroGraph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let mut node = fs::File::create(dir.join("node.tsv"))?;
    for i in 0..graph.n_nodes() {
        let t = graph.node_type()[i];
        let tf = &graph.features()[t];
        if tf.explicit {
            let row = tf.nodes.binary_search(&i).expect("node in its type list");
            let feats: Vec<String> = tf.data[row * tf.dim..(row + 1) * tf.dim]
                .iter()
                .map(|v| format!("{v}"))
                .collect();
            writeln!(node, "{i}\t{t}\t{}", feats.join(","))?;
        } else {
            writeln!(node, "{i}\t{t}")?;
        }
    }

    let mut edge = fs::File::create(dir.join("edge.tsv"))?;
    for &(u, v, t) in graph.edges() {
        writeln!(edge, "{u}\t{v}\t{t}")?;
    }

    let mut label = fs::File::create(dir.join("label.tsv"))?;
    for (i, ls) in graph.labels().iter().enumerate() {
        if !ls.is_empty() {
            let cs: Vec<String> = ls.iter().map(|c| c.to_string()).collect();
            writeln!(label, "{i}\t{}", cs.join(","))?;
        }
    }

    if !graph.masks().is_unset() {
        save_split(graph, dir.join("split.tsv"))?;
    }
    Ok(())
}
