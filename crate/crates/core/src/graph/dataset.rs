use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Features, Graph, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Task {
    Classification { num_classes: usize },
    Regression,
}

/// A list of graphs with a fold index per graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    graphs: Vec<Graph>,
    folds: Vec<usize>,
    task: Task,
}

impl Dataset {
    pub fn new(graphs: Vec<Graph>, folds: Vec<usize>, task: Task) -> Result<Self> {
        if graphs.len() != folds.len() {
            return Err(Error::invalid(format!(
                "{} fold assignments for {} graphs",
                folds.len(),
                graphs.len()
            )));
        }
        for (i, g) in graphs.iter().enumerate() {
            match (task, g.label()) {
                (_, None) => {}
                (Task::Classification { num_classes }, Some(Label::Class(c))) if c < num_classes => {}
                (Task::Regression, Some(Label::Real(_))) => {}
                (_, Some(l)) => {
                    return Err(Error::Validation(format!(
                        "graph {i}: label {l:?} does not fit task {task:?}"
                    )))
                }
            }
        }
        Ok(Self { graphs, folds, task })
    }

    /// Assigns `k` folds stratified by class (round-robin within each class,
    /// in graph order), or round-robin for regression.
    pub fn stratified(graphs: Vec<Graph>, task: Task, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("need at least one fold"));
        }
        let mut per_class: std::collections::BTreeMap<usize, usize> = Default::default();
        let mut next = 0;
        let folds = graphs
            .iter()
            .map(|g| match g.label() {
                Some(Label::Class(c)) => {
                    let slot = per_class.entry(c).or_default();
                    *slot += 1;
                    (*slot - 1) % k
                }
                _ => {
                    next += 1;
                    (next - 1) % k
                }
            })
            .collect();
        Self::new(graphs, folds, task)
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn folds(&self) -> &[usize] {
        &self.folds
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn num_folds(&self) -> usize {
        self.folds.iter().max().map_or(0, |m| m + 1)
    }

    /// Indices of the graphs assigned to `fold`.
    pub fn fold_members(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    /// Indices of the graphs in any of `folds`.
    pub fn members_of(&self, folds: &[usize]) -> Vec<usize> {
        (0..self.len()).filter(|&i| folds.contains(&self.folds[i])).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    task: Task,
    graphs: Vec<GraphRecord>,
    folds: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    n: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    e: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<f64>,
}

fn rows_of(f: &Features) -> Vec<Vec<f64>> {
    (0..f.rows()).map(|i| f.row(i).to_vec()).collect()
}

/// Serializes a dataset to its JSON document.
pub fn dataset_to_json(ds: &Dataset) -> Result<String> {
    let file = DatasetFile {
        task: ds.task,
        graphs: ds
            .graphs
            .iter()
            .map(|g| GraphRecord {
                n: g.n_nodes(),
                edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
                x: g.node_features().map(rows_of),
                e: g.edge_features().map(rows_of),
                y: g.label().map(|l| match l {
                    Label::Class(c) => c as f64,
                    Label::Real(r) => r,
                }),
            })
            .collect(),
        folds: ds.folds.clone(),
    };
    Ok(serde_json::to_string(&file)?)
}

/// Parses a dataset JSON document. `origin` only labels error messages.
pub fn dataset_from_json(text: &str, origin: &Path) -> Result<Dataset> {
    let file: DatasetFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut graphs = Vec::with_capacity(file.graphs.len());
    for (i, rec) in file.graphs.into_iter().enumerate() {
        let ctx = |e: Error| match e {
            Error::Validation(m) => Error::Validation(format!("graph {i}: {m}")),
            Error::InvalidArgument(m) => Error::Validation(format!("graph {i}: {m}")),
            other => other,
        };
        let edges: Vec<_> = rec.edges.iter().map(|e| (e[0], e[1])).collect();
        let mut g = Graph::new(rec.n, &edges).map_err(ctx)?;
        if let Some(x) = rec.x {
            g = g.with_node_features(Features::from_rows(&x).map_err(ctx)?).map_err(ctx)?;
        }
        if let Some(e) = rec.e {
            // edge rows follow the file's edge order, which may not be sorted
            let feats = Features::from_rows(&e).map_err(ctx)?;
            if feats.rows() != edges.len() {
                return Err(ctx(Error::invalid("edge feature count differs from edge count")));
            }
            let dim = feats.dim();
            let mut data = vec![0.0; feats.as_slice().len()];
            for (row, &(u, v)) in edges.iter().enumerate() {
                let id = g.edge_id(u, v).expect("edge exists");
                data[id * dim..(id + 1) * dim].copy_from_slice(feats.row(row));
            }
            g = g.with_edge_features(Features::new(dim, data)?).map_err(ctx)?;
        }
        if let Some(y) = rec.y {
            let label = match file.task {
                Task::Classification { .. } => {
                    if y < 0.0 || y.fract() != 0.0 {
                        return Err(Error::Validation(format!(
                            "graph {i}: class label {y} is not a non-negative integer"
                        )));
                    }
                    Label::Class(y as usize)
                }
                Task::Regression => Label::Real(y),
            };
            g = g.with_label(label);
        }
        graphs.push(g);
    }
    Dataset::new(graphs, file.folds, file.task).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::Validation(m),
        other => other,
    })
}

/// Writes `ds` to `path` as one JSON document.
pub fn save_graphs(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = dataset_to_json(ds)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a dataset written by [`save_graphs`].
pub fn load_graphs(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    dataset_from_json(&text, path)
}
