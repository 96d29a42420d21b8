//! Walk feature matrices.
//!
//! For a walk `(v_0, …, v_ℓ)` row `i` of its feature matrix is the
//! concatenation of
//!
//! * the node embedding `f(v_i)` (width `d`),
//! * the embedding of the incoming edge `g(v_{i-1} v_i)`, zero in row 0
//!   (width `d'`),
//! * the identity bits `v_i = v_{i-j}` for `j = 1..=s`,
//! * the adjacency bits `v_i v_{i-j-1} ∈ E` for `j = 1..s`,
//!
//! where bits referring to positions before the start of the walk are zero.
//! A walk with `ℓ` steps therefore yields `ℓ + 1` rows. Disabled encodings
//! drop their block, shrinking the width.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Features, Graph};
use crate::walker::WalkSet;

/// Which structural blocks are present in the walk features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Encodings {
    pub identity: bool,
    pub adjacency: bool,
}

impl Encodings {
    pub const BOTH: Encodings = Encodings {
        identity: true,
        adjacency: true,
    };
    pub const NONE: Encodings = Encodings {
        identity: false,
        adjacency: false,
    };
    pub const IDENTITY: Encodings = Encodings {
        identity: true,
        adjacency: false,
    };
    pub const ADJACENCY: Encodings = Encodings {
        identity: false,
        adjacency: true,
    };

    /// All four settings in ablation order: none, identity, adjacency, both.
    pub const ALL: [Encodings; 4] = [Self::NONE, Self::IDENTITY, Self::ADJACENCY, Self::BOTH];

    /// Width of the structural part for window size `s`.
    pub fn structural_width(self, s: usize) -> usize {
        let id = if self.identity { s } else { 0 };
        let adj = if self.adjacency { s.saturating_sub(1) } else { 0 };
        id + adj
    }

    pub fn label(self) -> &'static str {
        match (self.identity, self.adjacency) {
            (false, false) => "none",
            (true, false) => "identity",
            (false, true) => "adjacency",
            (true, true) => "both",
        }
    }
}

/// Total row width `d + d' + [s] + [s - 1]`.
pub fn feature_width(d: usize, d_edge: usize, s: usize, encodings: Encodings) -> usize {
    d + d_edge + encodings.structural_width(s)
}

/// Calls `emit(col)` for every set structural bit of row `i` of `walk`.
///
/// Columns are numbered within the structural block: identity bit `j` is
/// column `j - 1`, adjacency bit `j` follows the identity block (when
/// enabled) at offset `j - 1`. Works for any `s >= 1`, odd or even.
#[inline]
pub fn for_each_structural_bit(
    g: &Graph,
    walk: &[usize],
    i: usize,
    s: usize,
    encodings: Encodings,
    mut emit: impl FnMut(usize),
) {
    let v = walk[i];
    if encodings.identity {
        for j in 1..=s.min(i) {
            if walk[i - j] == v {
                emit(j - 1);
            }
        }
    }
    if encodings.adjacency {
        let base = if encodings.identity { s } else { 0 };
        for j in 1..s {
            if j + 1 > i {
                break;
            }
            if g.is_edge(v, walk[i - j - 1]) {
                emit(base + j - 1);
            }
        }
    }
}

/// Per-row lists of set structural columns for every row of a walk set,
/// in compressed row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuralBits {
    offsets: Vec<u32>,
    columns: Vec<u16>,
    width: usize,
}

impl StructuralBits {
    pub fn compute(g: &Graph, ws: &WalkSet, s: usize, encodings: Encodings) -> Self {
        let rows = ws.num_walks() * (ws.ell() + 1);
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut columns = Vec::new();
        offsets.push(0);
        for walk in ws.iter() {
            for i in 0..walk.len() {
                for_each_structural_bit(g, walk, i, s, encodings, |c| columns.push(c as u16));
                offsets.push(columns.len() as u32);
            }
        }
        Self {
            offsets,
            columns,
            width: encodings.structural_width(s),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Set columns of flat row `r` (walk-major).
    #[inline]
    pub fn row(&self, r: usize) -> &[u16] {
        &self.columns[self.offsets[r] as usize..self.offsets[r + 1] as usize]
    }
}

/// The `m × L × d_X` walk feature tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkFeatureTensor {
    data: Vec<f64>,
    walks: usize,
    rows: usize,
    d: usize,
    d_edge: usize,
    s: usize,
    encodings: Encodings,
}

impl WalkFeatureTensor {
    pub fn shape(&self) -> [usize; 3] {
        [self.walks, self.rows, self.width()]
    }

    pub fn width(&self) -> usize {
        feature_width(self.d, self.d_edge, self.s, self.encodings)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn d_edge(&self) -> usize {
        self.d_edge
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn encodings(&self) -> Encodings {
        self.encodings
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Row `i` of walk `w`.
    pub fn row(&self, w: usize, i: usize) -> &[f64] {
        let width = self.width();
        let start = (w * self.rows + i) * width;
        &self.data[start..start + width]
    }

    /// The structural block of row `i` of walk `w`.
    pub fn structural(&self, w: usize, i: usize) -> &[f64] {
        &self.row(w, i)[self.d + self.d_edge..]
    }

    /// The `s + 1` rows feeding one CNN output position: walk `w`, rows
    /// `center - s/2 ..= center + s/2`.
    pub fn window_rows(&self, walk_idx: usize, center_pos: usize) -> Result<&[f64]> {
        let half = self.s / 2;
        if walk_idx >= self.walks {
            return Err(Error::invalid(format!("walk index {walk_idx} out of range")));
        }
        if center_pos < half || center_pos + half >= self.rows {
            return Err(Error::invalid(format!(
                "center {center_pos} outside [{half}, {}]",
                self.rows as isize - 1 - half as isize
            )));
        }
        let width = self.width();
        let start = (walk_idx * self.rows + center_pos - half) * width;
        Ok(&self.data[start..start + (self.s + 1) * width])
    }
}

/// Assembles the walk feature tensor.
///
/// `edge_emb` may be `None` for `d' = 0`. The window size must be even so
/// that every CNN output has an exact center.
pub fn build_features(
    g: &Graph,
    ws: &WalkSet,
    node_emb: &Features,
    edge_emb: Option<&Features>,
    s: usize,
    encodings: Encodings,
) -> Result<WalkFeatureTensor> {
    if !s.is_multiple_of(2) {
        return Err(Error::invalid(format!("window size s = {s} must be even")));
    }
    if node_emb.rows() != g.n_nodes() {
        return Err(Error::invalid(format!(
            "{} node embeddings for {} nodes",
            node_emb.rows(),
            g.n_nodes()
        )));
    }
    let d = node_emb.dim();
    let d_edge = edge_emb.map_or(0, Features::dim);
    if let Some(e) = edge_emb {
        if e.rows() != g.n_edges() {
            return Err(Error::invalid(format!(
                "{} edge embeddings for {} edges",
                e.rows(),
                g.n_edges()
            )));
        }
    }
    let width = feature_width(d, d_edge, s, encodings);
    let rows = ws.ell() + 1;
    let mut data = vec![0.0; ws.num_walks() * rows * width];
    for (w, walk) in ws.iter().enumerate() {
        for i in 0..rows {
            let out = &mut data[(w * rows + i) * width..(w * rows + i + 1) * width];
            out[..d].copy_from_slice(node_emb.row(walk[i]));
            if let (Some(e), true) = (edge_emb, i > 0) {
                let id = g
                    .edge_id(walk[i - 1], walk[i])
                    .ok_or_else(|| Error::invalid("walk uses a non-edge"))?;
                out[d..d + d_edge].copy_from_slice(e.row(id));
            }
            let block = &mut out[d + d_edge..];
            for_each_structural_bit(g, walk, i, s, encodings, |c| block[c] = 1.0);
        }
    }
    Ok(WalkFeatureTensor {
        data,
        walks: ws.num_walks(),
        rows,
        d,
        d_edge,
        s,
        encodings,
    })
}
