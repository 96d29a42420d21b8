//! Simple undirected graphs with optional node and edge features.

mod dataset;
mod generators;

pub use dataset::{dataset_from_json, dataset_to_json, load_graphs, save_graphs, Dataset, Task};
pub use generators::{
    disjoint_union, make_csl, make_csl_dataset, make_csl_dataset_with_seed, make_cycle, make_path,
    make_three_paths, random_relabel, CSL_NODES, CSL_SKIPS,
};

use crate::error::{Error, Result};

/// A dense row-major feature table, one row per node or edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            if !data.is_empty() {
                return Err(Error::invalid("zero-width features must be empty"));
            }
        } else if !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "feature data length {} is not a multiple of width {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("ragged feature rows"));
        }
        Ok(Self {
            dim,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Graph-level target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Class(usize),
    Real(f64),
}

/// An immutable simple undirected graph without isolated nodes.
///
/// Edges are stored once as `(u, v)` with `u < v`; edge ids index both the
/// edge list and the optional edge feature table, so both traversal
/// directions of an edge share one feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    // sorted neighbor lists and the edge id of each incidence
    adjacency: Vec<Vec<usize>>,
    incident: Vec<Vec<usize>>,
    node_features: Option<Features>,
    edge_features: Option<Features>,
    label: Option<Label>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicate edges, out-of-range
    /// endpoints and isolated nodes.
    pub fn new(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Validation("graph has no nodes".into()));
        }
        let mut norm = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) out of range for {n_nodes} nodes"
                )));
            }
            if u == v {
                return Err(Error::Validation(format!("self-loop at node {u}")));
            }
            norm.push((u.min(v), u.max(v)));
        }
        let mut sorted = norm.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }

        let mut pairs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_nodes];
        for (id, &(u, v)) in norm.iter().enumerate() {
            pairs[u].push((v, id));
            pairs[v].push((u, id));
        }
        if let Some(iso) = pairs.iter().position(Vec::is_empty) {
            return Err(Error::Validation(format!("node {iso} is isolated")));
        }
        let mut adjacency = Vec::with_capacity(n_nodes);
        let mut incident = Vec::with_capacity(n_nodes);
        for mut p in pairs {
            p.sort_unstable();
            adjacency.push(p.iter().map(|x| x.0).collect());
            incident.push(p.iter().map(|x| x.1).collect());
        }
        Ok(Self {
            n_nodes,
            edges: norm,
            adjacency,
            incident,
            node_features: None,
            edge_features: None,
            label: None,
        })
    }

    pub fn with_node_features(mut self, features: Features) -> Result<Self> {
        if features.rows() != self.n_nodes {
            return Err(Error::invalid(format!(
                "{} node feature rows for {} nodes",
                features.rows(),
                self.n_nodes
            )));
        }
        self.node_features = Some(features);
        Ok(self)
    }

    pub fn with_edge_features(mut self, features: Features) -> Result<Self> {
        if features.rows() != self.edges.len() {
            return Err(Error::invalid(format!(
                "{} edge feature rows for {} edges",
                features.rows(),
                self.edges.len()
            )));
        }
        self.edge_features = Some(features);
        Ok(self)
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` pairs with `u < v`, indexed by edge id.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    /// Edge ids parallel to [`neighbors`](Self::neighbors).
    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn is_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn edge_id(&self, u: usize, v: usize) -> Option<usize> {
        self.adjacency[u]
            .binary_search(&v)
            .ok()
            .map(|i| self.incident[u][i])
    }

    pub fn node_features(&self) -> Option<&Features> {
        self.node_features.as_ref()
    }

    pub fn edge_features(&self) -> Option<&Features> {
        self.edge_features.as_ref()
    }

    pub fn label(&self) -> Option<Label> {
        self.label
    }

    /// Node features as fed to a model: the stored table, or a constant
    /// scalar 1.0 per node for unlabeled graphs.
    pub fn model_node_features(&self) -> Features {
        self.node_features.clone().unwrap_or_else(|| Features {
            dim: 1,
            data: vec![1.0; self.n_nodes],
        })
    }

    /// Number of connected components.
    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.n_nodes];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.n_nodes {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &u in &self.adjacency[v] {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        count
    }

    /// Returns the graph with node `v` renamed to `perm[v]`. Edge ids are
    /// renumbered by the new sorted edge order and edge features follow.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n_nodes {
            return Err(Error::invalid("permutation length differs from node count"));
        }
        let mut check = vec![false; self.n_nodes];
        for &p in perm {
            if p >= self.n_nodes || std::mem::replace(&mut check[p], true) {
                return Err(Error::invalid("not a permutation"));
            }
        }
        let mut mapped: Vec<(usize, usize, usize)> = self
            .edges
            .iter()
            .enumerate()
            .map(|(id, &(u, v))| {
                let (a, b) = (perm[u], perm[v]);
                (a.min(b), a.max(b), id)
            })
            .collect();
        mapped.sort_unstable();
        let edges: Vec<(usize, usize)> = mapped.iter().map(|&(a, b, _)| (a, b)).collect();
        let mut g = Graph::new(self.n_nodes, &edges)?;
        if let Some(f) = &self.node_features {
            let mut data = vec![0.0; f.data.len()];
            for v in 0..self.n_nodes {
                data[perm[v] * f.dim..(perm[v] + 1) * f.dim].copy_from_slice(f.row(v));
            }
            g.node_features = Some(Features { dim: f.dim, data });
        }
        if let Some(f) = &self.edge_features {
            let data = mapped.iter().flat_map(|&(_, _, id)| f.row(id).to_vec()).collect();
            g.edge_features = Some(Features { dim: f.dim, data });
        }
        g.label = self.label;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_self_loops_duplicates_and_isolated_nodes() {
        assert!(matches!(Graph::new(2, &[(0, 0), (0, 1)]), Err(Error::Validation(_))));
        assert!(matches!(Graph::new(2, &[(0, 1), (1, 0)]), Err(Error::Validation(_))));
        assert!(matches!(Graph::new(3, &[(0, 1)]), Err(Error::Validation(_))));
        assert!(matches!(Graph::new(2, &[(0, 2)]), Err(Error::Validation(_))));
        assert!(Graph::new(2, &[(1, 0)]).is_ok());
    }

    #[test]
    fn adjacency_is_sorted_and_symmetric() {
        let g = Graph::new(4, &[(3, 0), (0, 1), (2, 0), (1, 2)]).unwrap();
        assert_eq!(g.neighbors(0), &[1, 2, 3]);
        for u in 0..4 {
            for &v in g.neighbors(u) {
                assert!(g.is_edge(v, u));
                assert_eq!(g.edge_id(u, v), g.edge_id(v, u));
            }
        }
        assert!(!g.is_edge(1, 3));
        assert_eq!(g.edges()[g.edge_id(3, 0).unwrap()], (0, 3));
    }

    #[test]
    fn relabel_moves_features_with_nodes_and_edges() {
        let g = Graph::new(3, &[(0, 1), (1, 2)])
            .unwrap()
            .with_node_features(Features::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap())
            .unwrap()
            .with_edge_features(Features::from_rows(&[vec![10.0], vec![12.0]]).unwrap())
            .unwrap();
        let h = g.relabel(&[2, 0, 1]).unwrap();
        assert_eq!(h.node_features().unwrap().row(2), &[0.0]);
        assert_eq!(h.node_features().unwrap().row(0), &[1.0]);
        // old edge (0,1) is now (0,2), old (1,2) is now (0,1)
        let e = h.edge_features().unwrap();
        assert_eq!(e.row(h.edge_id(0, 2).unwrap()), &[10.0]);
        assert_eq!(e.row(h.edge_id(0, 1).unwrap()), &[12.0]);
    }

    #[test]
    fn unlabeled_graphs_get_constant_features() {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        let f = g.model_node_features();
        assert_eq!(f.dim(), 1);
        assert_eq!(f.as_slice(), &[1.0, 1.0]);
    }
}
