//! Communication graphs and mixing matrices.
//!
//! A [`Graph`] is an undirected, connected set of nodes. [`metropolis_weights`]
//! turns it into a symmetric doubly stochastic [`MixingMatrix`], and
//! [`spectral_stats`] exposes the quantities the convergence certificate
//! consumes: the extreme nonzero eigenvalues of `I - W` and its PSD square
//! root.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues of `I - W` below this are treated as the consensus mode.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-9;

/// Row sums of a mixing matrix must match one to this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Line,
    Cycle,
    Random,
    Complete,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 4] = [
        TopologyKind::Line,
        TopologyKind::Cycle,
        TopologyKind::Random,
        TopologyKind::Complete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TopologyKind::Line => "line",
            TopologyKind::Cycle => "cycle",
            TopologyKind::Random => "random",
            TopologyKind::Complete => "complete",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(TopologyKind::Line),
            "cycle" => Ok(TopologyKind::Cycle),
            "random" => Ok(TopologyKind::Random),
            "complete" => Ok(TopologyKind::Complete),
            other => Err(Error::InvalidParameter(format!("unknown topology kind `{other}`"))),
        }
    }
}

/// Undirected simple graph. Edges are stored once, as `(i, j)` with `i < j`,
/// in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an edge list, normalizing orientation and order.
    /// Rejects self-loops, duplicates, out-of-range endpoints and
    /// disconnected inputs.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
        }
        let graph = Self::from_sorted(n, set);
        if !graph.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        Ok(graph)
    }

    fn from_sorted(n: usize, edges: BTreeSet<(usize, usize)>) -> Self {
        let edges: Vec<_> = edges.into_iter().collect();
        let mut degrees = vec![0; n];
        for &(a, b) in &edges {
            degrees[a] += 1;
            degrees[b] += 1;
        }
        Graph { n, edges, degrees }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        // union-find keeps this independent of the BFS used in tests
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        let mut components = self.n;
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                components -= 1;
            }
        }
        components == 1
    }

    /// Graph Laplacian `diag(d) - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut lap = DMatrix::zeros(self.n, self.n);
        for &(a, b) in &self.edges {
            lap[(a, b)] = -1.0;
            lap[(b, a)] = -1.0;
        }
        for (i, &d) in self.degrees.iter().enumerate() {
            lap[(i, i)] = d as f64;
        }
        lap
    }
}

/// Number of edges a random topology targets: `round(tau * n(n-1)/2)`,
/// capped at the complete graph.
pub fn random_edge_target(n: usize, tau: f64) -> usize {
    let max_edges = n * n.saturating_sub(1) / 2;
    let target = (tau * max_edges as f64).round() as usize;
    target.min(max_edges)
}

/// Builds a topology of the given kind.
///
/// `tau` and `seed` only matter for [`TopologyKind::Random`], which draws a
/// uniformly random spanning tree (Prüfer decoding) and then adds distinct
/// random non-tree edges until `round(tau * n(n-1)/2)` edges exist.
pub fn build_topology(kind: TopologyKind, n: usize, tau: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidParameter("node count must be at least 1".into()));
    }
    let mut edges = BTreeSet::new();
    match kind {
        TopologyKind::Line => {
            edges.extend((1..n).map(|i| (i - 1, i)));
        }
        TopologyKind::Cycle => {
            edges.extend((1..n).map(|i| (i - 1, i)));
            if n > 2 {
                edges.insert((0, n - 1));
            }
        }
        TopologyKind::Complete => {
            for i in 0..n {
                edges.extend((i + 1..n).map(|j| (i, j)));
            }
        }
        TopologyKind::Random => {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "connectivity ratio must lie in (0, 1], got {tau}"
                )));
            }
            let target = random_edge_target(n, tau);
            if target < n - 1 {
                return Err(Error::EdgeBudget {
                    nodes: n,
                    budget: target,
                    required: n - 1,
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            edges = random_spanning_tree(n, &mut rng);
            let mut extra: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|e| !edges.contains(e))
                .collect();
            extra.shuffle(&mut rng);
            edges.extend(extra.into_iter().take(target - (n - 1)));
        }
    }
    Ok(Graph::from_sorted(n, edges))
}

fn random_spanning_tree(n: usize, rng: &mut impl Rng) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    if n < 2 {
        return edges;
    }
    if n == 2 {
        edges.insert((0, 1));
        return edges;
    }
    let code: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> = (0..n).filter(|&v| degree[v] == 1).map(Reverse).collect();
    for &c in &code {
        let Reverse(leaf) = leaves.pop().expect("Prüfer decoding always has a leaf");
        edges.insert((leaf.min(c), leaf.max(c)));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.push(Reverse(c));
        }
    }
    let Reverse(a) = leaves.pop().expect("two leaves remain");
    let Reverse(b) = leaves.pop().expect("two leaves remain");
    edges.insert((a.min(b), a.max(b)));
    edges
}

/// Symmetric doubly stochastic weight matrix `W`.
///
/// Alongside the dense matrix it keeps, per row, the nonzero entries in
/// increasing column order; every neighbour average walks that list so
/// results do not depend on evaluation strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    weights: DMatrix<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl MixingMatrix {
    /// Validates an explicit weight matrix: square, exactly symmetric,
    /// nonnegative, rows summing to one.
    pub fn from_dense(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        if n == 0 || weights.ncols() != n {
            return Err(Error::InvalidMixing("weights must be a nonempty square matrix".into()));
        }
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidMixing(format!("entry ({i}, {j}) = {w}")));
                }
                if w != weights[(j, i)] {
                    return Err(Error::NotSymmetric);
                }
                sum += w;
            }
            if (sum - 1.0).abs() >= ROW_SUM_TOL {
                return Err(Error::InvalidMixing(format!("row {i} sums to {sum}")));
            }
        }
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| weights[(i, j)] != 0.0)
                    .map(|j| (j, weights[(i, j)]))
                    .collect()
            })
            .collect();
        Ok(MixingMatrix { weights, rows })
    }

    pub fn node_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Nonzero entries of row `i`, including the diagonal.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Number of ordered pairs `(i, j)`, `i != j`, with `w_ij > 0`; one
    /// message per pair is sent in each neighbour exchange.
    pub fn directed_links(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().filter(|&&(j, _)| j != i).count())
            .sum()
    }

    /// `I - W` as a dense matrix.
    pub fn laplacian(&self) -> DMatrix<f64> {
        DMatrix::identity(self.node_count(), self.node_count()) - &self.weights
    }

    /// Eigenvalues of `W` in ascending order.
    pub fn eigenvalues(&self) -> DVector<f64> {
        let mut values: Vec<f64> = SymmetricEigen::new(self.weights.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        values.sort_by(f64::total_cmp);
        DVector::from_vec(values)
    }
}

/// Metropolis–Hastings weights: `w_ij = 1 / (1 + max(d_i, d_j))` on edges and
/// `w_ii = 1 - sum_{j != i} w_ij`.
pub fn metropolis_weights(graph: &Graph) -> MixingMatrix {
    let n = graph.node_count();
    let deg = graph.degrees();
    let mut w = DMatrix::zeros(n, n);
    for &(a, b) in graph.edges() {
        let value = 1.0 / (1.0 + deg[a].max(deg[b]) as f64);
        w[(a, b)] = value;
        w[(b, a)] = value;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    MixingMatrix::from_dense(w).expect("Metropolis weights are always a valid mixing matrix")
}

/// Spectrum of `I - W` and its PSD square root.
#[derive(Debug, Clone)]
pub struct SpectralStats {
    /// Eigenvalues of `I - W`, ascending.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors, one column per entry of `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub lambda_max: f64,
    /// Smallest eigenvalue above [`ZERO_EIGENVALUE_TOL`]; `None` for a single
    /// node, where `I - W` vanishes.
    pub lambda_hat_min: Option<f64>,
    /// `(I - W)^{1/2}`.
    pub sqrt_laplacian: DMatrix<f64>,
}

impl SpectralStats {
    pub fn node_count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Moore–Penrose pseudo-inverse of `(I - W)^{1/2}`.
    pub fn sqrt_laplacian_pinv(&self) -> DMatrix<f64> {
        let scaled: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|&l| if l > ZERO_EIGENVALUE_TOL { 1.0 / l.sqrt() } else { 0.0 })
            .collect();
        assemble(&self.eigenvectors, &scaled)
    }

    pub fn spectral_gap(&self) -> Result<f64> {
        self.lambda_hat_min
            .ok_or_else(|| Error::InvalidParameter("a single-node network has no nonzero eigenvalue of I - W".into()))
    }
}

fn assemble(vectors: &DMatrix<f64>, values: &[f64]) -> DMatrix<f64> {
    let n = vectors.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &value) in values.iter().enumerate() {
        if value == 0.0 {
            continue;
        }
        let v = vectors.column(k);
        for i in 0..n {
            let vi = value * v[i];
            for j in 0..n {
                out[(i, j)] += vi * v[j];
            }
        }
    }
    // symmetrize away rounding so downstream quadratic forms stay symmetric
    let t = out.transpose();
    (out + t) * 0.5
}

pub fn spectral_stats(mixing: &MixingMatrix) -> Result<SpectralStats> {
    let eig = SymmetricEigen::new(mixing.laplacian());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(order.len(), order.iter().map(|&k| eig.eigenvalues[k]));
    let eigenvectors = eig.eigenvectors.select_columns(&order);

    let zero_modes = eigenvalues.iter().filter(|&&l| l < ZERO_EIGENVALUE_TOL).count();
    if zero_modes != 1 {
        return Err(Error::Disconnected { zero_modes });
    }
    let lambda_max = eigenvalues[eigenvalues.len() - 1];
    let lambda_hat_min = eigenvalues.iter().copied().find(|&l| l >= ZERO_EIGENVALUE_TOL);
    let roots: Vec<f64> = eigenvalues
        .iter()
        .map(|&l| if l > ZERO_EIGENVALUE_TOL { l.sqrt() } else { 0.0 })
        .collect();
    let sqrt_laplacian = assemble(&eigenvectors, &roots);
    Ok(SpectralStats {
        eigenvalues,
        eigenvectors,
        lambda_max,
        lambda_hat_min,
        sqrt_laplacian,
    })
}

/// JSON form of a topology: `{"n", "edges", "weights"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub weights: Vec<Vec<f64>>,
}

impl NetworkDocument {
    pub fn new(graph: &Graph, mixing: &MixingMatrix) -> Self {
        let w = mixing.weights();
        NetworkDocument {
            n: graph.node_count(),
            edges: graph.edges().iter().map(|&(a, b)| [a, b]).collect(),
            weights: (0..w.nrows())
                .map(|i| (0..w.ncols()).map(|j| w[(i, j)]).collect())
                .collect(),
        }
    }

    /// Rebuilds and cross-validates the graph and its weights; the sparsity
    /// pattern of `weights` must match `edges`.
    pub fn into_parts(self) -> Result<(Graph, MixingMatrix)> {
        let graph = Graph::from_edges(self.n, self.edges.iter().map(|e| (e[0], e[1])))?;
        if self.weights.len() != self.n || self.weights.iter().any(|r| r.len() != self.n) {
            return Err(Error::InvalidMixing(format!("weights must be {0}x{0}", self.n)));
        }
        let dense = DMatrix::from_fn(self.n, self.n, |i, j| self.weights[i][j]);
        let mixing = MixingMatrix::from_dense(dense)?;
        let adjacency: BTreeSet<_> = graph.edges().iter().copied().collect();
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                let linked = adjacency.contains(&(i.min(j), i.max(j)));
                if linked != (mixing.weights()[(i, j)] > 0.0) {
                    return Err(Error::InvalidMixing(format!(
                        "weight ({i}, {j}) disagrees with the edge list"
                    )));
                }
            }
        }
        Ok((graph, mixing))
    }
}
