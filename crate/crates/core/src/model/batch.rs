use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::Tensor;
use crate::walker::{sample_walks, WalkSet, WalkStrategy};
use crate::walkfeat::{for_each_structural_bit, Encodings};

/// Several graphs concatenated with node and edge offsets, together with
/// one walk set per graph and the precomputed structural bits of every walk
/// row. Walks never cross graph boundaries.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub(crate) n_nodes: usize,
    pub(crate) graph_of_node: Vec<usize>,
    pub(crate) nodes_per_graph: Vec<usize>,
    /// `[n_nodes, d_V]`
    pub(crate) node_features: Tensor,
    /// `[n_edges, d_E]`, absent when `d_E = 0`.
    pub(crate) edge_features: Option<Tensor>,
    /// Global node id of every walk row, walk-major.
    pub(crate) row_node: Vec<u32>,
    /// Global edge id entering every walk row (`u32::MAX` for row 0).
    pub(crate) row_edge: Vec<u32>,
    /// Structural columns set in every walk row (compressed rows).
    pub(crate) bit_offsets: Vec<u32>,
    pub(crate) bit_columns: Vec<u16>,
    pub(crate) num_walks: usize,
    pub(crate) ell: usize,
    pub(crate) window: usize,
}

pub(crate) const NO_EDGE: u32 = u32::MAX;

impl GraphBatch {
    /// Samples one walk set per graph (seed `seeds[i]` for graph `i`) and
    /// assembles the batch.
    pub fn sample(
        graphs: &[&Graph],
        strategy: WalkStrategy,
        p_star: f64,
        ell: usize,
        seeds: &[u64],
        window: usize,
        encodings: Encodings,
    ) -> Result<Self> {
        if graphs.len() != seeds.len() {
            return Err(Error::invalid("one walk seed per graph required"));
        }
        let walks = graphs
            .iter()
            .zip(seeds)
            .map(|(g, &seed)| sample_walks(g, strategy, p_star, ell, seed))
            .collect::<Result<Vec<_>>>()?;
        Self::from_walks(graphs, &walks, window, encodings)
    }

    /// Assembles a batch from given walk sets (node ids local to each graph).
    pub fn from_walks(graphs: &[&Graph], walks: &[WalkSet], window: usize, encodings: Encodings) -> Result<Self> {
        if graphs.is_empty() || graphs.len() != walks.len() {
            return Err(Error::invalid("need one walk set per graph and at least one graph"));
        }
        let ell = walks[0].ell();
        if walks.iter().any(|w| w.ell() != ell) {
            return Err(Error::invalid("all walk sets of a batch need the same length"));
        }
        if ell < window {
            return Err(Error::invalid(format!(
                "walks with {} rows are shorter than the receptive field {}",
                ell + 1,
                window + 1
            )));
        }
        let node_dim = graphs[0].model_node_features().dim();
        let edge_dim = graphs[0].edge_features().map_or(0, |f| f.dim());
        let mut node_feats = Vec::new();
        let mut edge_feats = Vec::new();
        let mut graph_of_node = Vec::new();
        let mut nodes_per_graph = Vec::with_capacity(graphs.len());
        let mut row_node = Vec::new();
        let mut row_edge = Vec::new();
        let mut bit_offsets = vec![0u32];
        let mut bit_columns = Vec::new();
        let (mut node_off, mut edge_off, mut num_walks) = (0usize, 0usize, 0usize);
        for (gi, (g, ws)) in graphs.iter().zip(walks).enumerate() {
            let nf = g.model_node_features();
            if nf.dim() != node_dim {
                return Err(Error::invalid("graphs in a batch differ in node feature width"));
            }
            if g.edge_features().map_or(0, |f| f.dim()) != edge_dim {
                return Err(Error::invalid("graphs in a batch differ in edge feature width"));
            }
            node_feats.extend_from_slice(nf.as_slice());
            if let Some(e) = g.edge_features() {
                edge_feats.extend_from_slice(e.as_slice());
            }
            graph_of_node.extend(std::iter::repeat_n(gi, g.n_nodes()));
            nodes_per_graph.push(g.n_nodes());
            for walk in ws.iter() {
                for i in 0..walk.len() {
                    row_node.push((walk[i] + node_off) as u32);
                    row_edge.push(if i == 0 {
                        NO_EDGE
                    } else {
                        let id = g
                            .edge_id(walk[i - 1], walk[i])
                            .ok_or_else(|| Error::invalid("walk uses a non-edge"))?;
                        (id + edge_off) as u32
                    });
                    for_each_structural_bit(g, walk, i, window, encodings, |c| bit_columns.push(c as u16));
                    bit_offsets.push(bit_columns.len() as u32);
                }
            }
            num_walks += ws.num_walks();
            node_off += g.n_nodes();
            edge_off += g.n_edges();
        }
        Ok(Self {
            n_nodes: node_off,
            graph_of_node,
            nodes_per_graph,
            node_features: Tensor::from_vec(&[node_off, node_dim], node_feats)?,
            edge_features: if edge_dim > 0 {
                Some(Tensor::from_vec(&[edge_off, edge_dim], edge_feats)?)
            } else {
                None
            },
            row_node,
            row_edge,
            bit_offsets,
            bit_columns,
            num_walks,
            ell,
            window,
        })
    }

    pub fn n_graphs(&self) -> usize {
        self.nodes_per_graph.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn num_walks(&self) -> usize {
        self.num_walks
    }

    /// Steps per walk.
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Global node at row `i` of walk `w`.
    pub fn node_at(&self, w: usize, i: usize) -> usize {
        self.row_node[w * (self.ell + 1) + i] as usize
    }

    pub(crate) fn row_bits(&self, r: usize) -> &[u16] {
        &self.bit_columns[self.bit_offsets[r] as usize..self.bit_offsets[r + 1] as usize]
    }
}
