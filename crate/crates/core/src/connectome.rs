//! Weighted brain-network graphs: ingestion, validation, Laplacian assembly,
//! scan projection, and synthetic fixture generation.
//!
//! A connectome is an undirected weighted graph whose nodes carry a region
//! label in `1..=region_count` and a positive volume. Node ids must be
//! exactly `0..M-1`; all node-indexed quantities (fields, scans) are indexed
//! by id regardless of the order records appear in on disk.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::NodeField;

#[derive(Debug, Error)]
pub enum ConnectomeError {
    #[error("io error for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("node ids must be exactly 0..{expected}, got id {got} (record {record})")]
    BadNodeId { expected: u32, got: u32, record: usize },
    #[error("duplicate node id {id}")]
    DuplicateNodeId { id: u32 },
    #[error("node {id}: region {region} outside 1..={region_count}")]
    BadRegion { id: u32, region: u32, region_count: u32 },
    #[error("region {region} has no nodes")]
    EmptyRegion { region: u32 },
    #[error("node {id}: volume {volume} must be positive and finite")]
    BadVolume { id: u32, volume: f64 },
    #[error("edge record {record}: self loop at node {node}")]
    SelfLoop { record: usize, node: u32 },
    #[error("edge record {record}: endpoint {node} is not a node id")]
    BadEndpoint { record: usize, node: u32 },
    #[error("edge record {record}: weight {weight} must be positive and finite")]
    BadWeight { record: usize, weight: f64 },
    #[error("duplicate edge between {i} and {j}")]
    DuplicateEdge { i: u32, j: u32 },
    #[error("scan row {row}: {reason}")]
    BadScanRow { row: usize, reason: String },
    #[error("scan is missing node {id}")]
    ScanMissingNode { id: u32 },
    #[error("scan value {value} at node {id} outside [0,1] (expected already-scaled data)")]
    ScanOutOfRange { id: u32, value: f64 },
    #[error("scan length {got} does not match node count {expected}")]
    ScanLength { got: usize, expected: usize },
    #[error("thresholding at fraction {fraction} removes every edge")]
    EmptyThreshold { fraction: f64 },
    #[error("fraction {0} outside [0,1]")]
    BadFraction(f64),
    #[error("synthetic generator: {0}")]
    Synthetic(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: u32,
    pub region: u32,
    pub volume: f64,
    /// Optional spatial position; carried through untouched, never used by
    /// the numerics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: u32,
    pub j: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connectome {
    pub region_count: u32,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl Connectome {
    pub fn new(region_count: u32, nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, ConnectomeError> {
        let c = Connectome { region_count, nodes, edges };
        c.validate()?;
        Ok(c)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Region label of each node, indexed by node id.
    pub fn regions_by_id(&self) -> Vec<u32> {
        let mut r = vec![0u32; self.nodes.len()];
        for n in &self.nodes {
            r[n.id as usize] = n.region;
        }
        r
    }

    /// Volume of each node, indexed by node id.
    pub fn volumes_by_id(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.nodes.len()];
        for n in &self.nodes {
            v[n.id as usize] = n.volume;
        }
        v
    }

    pub fn validate(&self) -> Result<(), ConnectomeError> {
        let m = self.nodes.len() as u32;
        let mut seen = vec![false; m as usize];
        for (record, n) in self.nodes.iter().enumerate() {
            if n.id >= m {
                return Err(ConnectomeError::BadNodeId { expected: m, got: n.id, record });
            }
            if seen[n.id as usize] {
                return Err(ConnectomeError::DuplicateNodeId { id: n.id });
            }
            seen[n.id as usize] = true;
            if n.region == 0 || n.region > self.region_count {
                return Err(ConnectomeError::BadRegion {
                    id: n.id,
                    region: n.region,
                    region_count: self.region_count,
                });
            }
            if !(n.volume.is_finite() && n.volume > 0.0) {
                return Err(ConnectomeError::BadVolume { id: n.id, volume: n.volume });
            }
        }
        let mut region_seen = vec![false; self.region_count as usize + 1];
        for n in &self.nodes {
            region_seen[n.region as usize] = true;
        }
        for r in 1..=self.region_count {
            if !region_seen[r as usize] {
                return Err(ConnectomeError::EmptyRegion { region: r });
            }
        }
        let mut pairs = HashSet::new();
        for (record, e) in self.edges.iter().enumerate() {
            if e.i == e.j {
                return Err(ConnectomeError::SelfLoop { record, node: e.i });
            }
            for node in [e.i, e.j] {
                if node >= m {
                    return Err(ConnectomeError::BadEndpoint { record, node });
                }
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(ConnectomeError::BadWeight { record, weight: e.weight });
            }
            let key = (e.i.min(e.j), e.i.max(e.j));
            if !pairs.insert(key) {
                return Err(ConnectomeError::DuplicateEdge { i: key.0, j: key.1 });
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConnectomeError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConnectomeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let c: Connectome = serde_json::from_str(&text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ConnectomeError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("connectome serializes");
        std::fs::write(path, text).map_err(|source| ConnectomeError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Keep only edges with weight >= fraction * max_weight.
    pub fn threshold_connectogram(&self, fraction: f64) -> Result<Connectome, ConnectomeError> {
        if !(0.0..=1.0).contains(&fraction) || fraction.is_nan() {
            return Err(ConnectomeError::BadFraction(fraction));
        }
        let max_w = self.edges.iter().map(|e| e.weight).fold(0.0f64, f64::max);
        let cutoff = fraction * max_w;
        let edges: Vec<Edge> = self.edges.iter().filter(|e| e.weight >= cutoff).cloned().collect();
        if edges.is_empty() {
            return Err(ConnectomeError::EmptyThreshold { fraction });
        }
        Ok(Connectome { region_count: self.region_count, nodes: self.nodes.clone(), edges })
    }

    pub fn laplacian(&self) -> Laplacian {
        Laplacian::from_connectome(self)
    }

    pub fn is_connected(&self) -> bool {
        let m = self.nodes.len();
        if m == 0 {
            return false;
        }
        let mut adj = vec![Vec::new(); m];
        for e in &self.edges {
            adj[e.i as usize].push(e.j as usize);
            adj[e.j as usize].push(e.i as usize);
        }
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == m
    }
}

/// Graph Laplacian L = D - W in adjacency form.
///
/// `matvec` evaluates (Lx)_i = sum_j w_ij (x_i - x_j), which vanishes
/// identically on constant vectors: mass conservation then holds to solver
/// round-off rather than assembly round-off.
#[derive(Debug, Clone)]
pub struct Laplacian {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<f64>,
    degree: Vec<f64>,
}

impl Laplacian {
    pub fn from_connectome(c: &Connectome) -> Self {
        let n = c.nodes.len();
        let mut neigh: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for e in &c.edges {
            neigh[e.i as usize].push((e.j, e.weight));
            neigh[e.j as usize].push((e.i, e.weight));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        let mut degree = Vec::with_capacity(n);
        row_ptr.push(0);
        for list in neigh.iter_mut() {
            list.sort_unstable_by_key(|(j, _)| *j);
            let mut d = 0.0;
            for (j, w) in list.iter() {
                cols.push(*j);
                weights.push(*w);
                d += w;
            }
            degree.push(d);
            row_ptr.push(cols.len());
        }
        Laplacian { n, row_ptr, cols, weights, degree }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Weighted degree (diagonal of L).
    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        for i in 0..self.n {
            let xi = x[i];
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.weights[k] * (xi - x[self.cols[k] as usize]);
            }
            out[i] = acc;
        }
    }

    /// Neighbors of node i as (column, weight) pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k], self.weights[k]))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            m[(i, i)] = self.degree[i];
            for (j, w) in self.row(i) {
                m[(i, j as usize)] = -w;
            }
        }
        m
    }
}

/// Affine rescale of a raw scan onto [0,1]; a constant scan maps to 0.5
/// everywhere. Values already spanning [0,1] still get rescaled: projection
/// is not idempotent by design.
pub fn project_scan(raw: &[f64]) -> NodeField {
    let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if !(range > 0.0) || !range.is_finite() {
        return NodeField::from_vec(vec![0.5; raw.len()]);
    }
    NodeField::from_vec(raw.iter().map(|x| (x - min) / range).collect())
}

/// Calibration outlier mask: node k is kept unless scan2[k] < scan1[k]*(1-tol).
/// Returns true for kept nodes. tol = 0 excludes any decrease; tol = 1 keeps
/// every node with nonnegative scan2.
pub fn filter_outlier_nodes(scan1: &NodeField, scan2: &NodeField, tol: f64) -> Vec<bool> {
    assert_eq!(scan1.len(), scan2.len());
    scan1
        .iter()
        .zip(scan2.iter())
        .map(|(&a, &b)| !(b < a * (1.0 - tol)))
        .collect()
}

/// Scan CSV: header `node_id,value`, one row per node, any row order.
pub fn load_scan_csv(path: impl AsRef<Path>, num_nodes: usize) -> Result<Vec<f64>, ConnectomeError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConnectomeError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut values = vec![f64::NAN; num_nodes];
    let mut filled = vec![false; num_nodes];
    let mut rows = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if idx == 0 && line.starts_with("node_id") {
            continue;
        }
        let mut parts = line.split(',');
        let id: u32 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| ConnectomeError::BadScanRow { row: idx + 1, reason: format!("bad node id in {line:?}") })?;
        let value: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| ConnectomeError::BadScanRow { row: idx + 1, reason: format!("bad value in {line:?}") })?;
        if parts.next().is_some() {
            return Err(ConnectomeError::BadScanRow { row: idx + 1, reason: "too many columns".into() });
        }
        if id as usize >= num_nodes {
            return Err(ConnectomeError::BadScanRow { row: idx + 1, reason: format!("node id {id} out of range") });
        }
        if filled[id as usize] {
            return Err(ConnectomeError::BadScanRow { row: idx + 1, reason: format!("duplicate node id {id}") });
        }
        if !value.is_finite() {
            return Err(ConnectomeError::BadScanRow { row: idx + 1, reason: format!("non-finite value {value}") });
        }
        filled[id as usize] = true;
        values[id as usize] = value;
        rows += 1;
    }
    if rows != num_nodes {
        if let Some(id) = filled.iter().position(|f| !f) {
            return Err(ConnectomeError::ScanMissingNode { id: id as u32 });
        }
        return Err(ConnectomeError::ScanLength { got: rows, expected: num_nodes });
    }
    Ok(values)
}

pub fn save_scan_csv(path: impl AsRef<Path>, values: &[f64]) -> Result<(), ConnectomeError> {
    let path = path.as_ref();
    let mut text = String::from("node_id,value\n");
    for (id, v) in values.iter().enumerate() {
        let _ = writeln!(text, "{id},{v}");
    }
    std::fs::write(path, text).map_err(|source| ConnectomeError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Check an already-scaled scan and wrap it as a field.
pub fn ingest_scaled_scan(values: Vec<f64>) -> Result<NodeField, ConnectomeError> {
    for (id, &v) in values.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(ConnectomeError::ScanOutOfRange { id: id as u32, value: v });
        }
    }
    Ok(NodeField::from_vec(values))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub regions: u32,
    pub nodes_per_region: u32,
    /// Probability of an edge between two nodes of the same region.
    pub intra_density: f64,
    /// Probability of an edge between nodes of different regions.
    pub inter_density: f64,
    /// Multiplies every sampled weight.
    pub weight_scale: f64,
    pub volume_range: (f64, f64),
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            regions: 7,
            nodes_per_region: 6,
            intra_density: 0.6,
            inter_density: 0.15,
            weight_scale: 1.0,
            volume_range: (0.5, 2.0),
        }
    }
}

/// Random connected connectome. Edge weights follow the count-over-length
/// convention: an integer fiber count in 1..=9 divided by a length in
/// [5, 50), times `weight_scale`. Resamples whole graphs until connected.
pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<Connectome, ConnectomeError> {
    if cfg.regions == 0 || cfg.nodes_per_region == 0 {
        return Err(ConnectomeError::Synthetic("need at least one region and one node per region".into()));
    }
    if !(0.0..=1.0).contains(&cfg.intra_density) || !(0.0..=1.0).contains(&cfg.inter_density) {
        return Err(ConnectomeError::Synthetic("densities must lie in [0,1]".into()));
    }
    let (vlo, vhi) = cfg.volume_range;
    if !(vlo > 0.0 && vhi > vlo && vhi.is_finite()) {
        return Err(ConnectomeError::Synthetic(format!("bad volume range ({vlo}, {vhi})")));
    }
    if !(cfg.weight_scale > 0.0 && cfg.weight_scale.is_finite()) {
        return Err(ConnectomeError::Synthetic(format!("bad weight scale {}", cfg.weight_scale)));
    }
    let m = (cfg.regions * cfg.nodes_per_region) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _attempt in 0..200 {
        let mut nodes = Vec::with_capacity(m);
        for id in 0..m as u32 {
            let region = id / cfg.nodes_per_region + 1;
            let volume = rng.gen_range(vlo..vhi);
            nodes.push(Node { id, region, volume, pos: None });
        }
        let mut edges = Vec::new();
        for i in 0..m as u32 {
            for j in (i + 1)..m as u32 {
                let same = nodes[i as usize].region == nodes[j as usize].region;
                let p = if same { cfg.intra_density } else { cfg.inter_density };
                if rng.gen_range(0.0..1.0) < p {
                    let count = rng.gen_range(1..=9) as f64;
                    let length = rng.gen_range(5.0..50.0);
                    edges.push(Edge { i, j, weight: cfg.weight_scale * count / length });
                }
            }
        }
        let c = Connectome { region_count: cfg.regions, nodes, edges };
        if c.is_connected() {
            c.validate()?;
            return Ok(c);
        }
    }
    Err(ConnectomeError::Synthetic(
        "no connected graph in 200 attempts; raise densities".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_node(w: f64) -> Connectome {
        Connectome::new(
            1,
            vec![
                Node { id: 0, region: 1, volume: 1.0, pos: None },
                Node { id: 1, region: 1, volume: 1.0, pos: None },
            ],
            vec![Edge { i: 0, j: 1, weight: w }],
        )
        .unwrap()
    }

    #[test]
    fn two_node_laplacian_entries() {
        let l = two_node(0.7).laplacian();
        let d = l.to_dense();
        assert_abs_diff_eq!(d[(0, 0)], 0.7, epsilon = 0.0);
        assert_abs_diff_eq!(d[(0, 1)], -0.7, epsilon = 0.0);
        assert_abs_diff_eq!(d[(1, 0)], -0.7, epsilon = 0.0);
        assert_abs_diff_eq!(d[(1, 1)], 0.7, epsilon = 0.0);
    }

    #[test]
    fn path_graph_laplacian() {
        let c = Connectome::new(
            1,
            (0..3).map(|id| Node { id, region: 1, volume: 1.0, pos: None }).collect(),
            vec![
                Edge { i: 0, j: 1, weight: 1.0 },
                Edge { i: 1, j: 2, weight: 1.0 },
            ],
        )
        .unwrap();
        let d = c.laplacian().to_dense();
        let expect = [[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(d[(i, j)], expect[i][j], epsilon = 0.0);
            }
        }
    }

    #[test]
    fn laplacian_kills_constants_exactly() {
        let c = generate_synthetic(&SyntheticConfig::default(), 42).unwrap();
        let l = c.laplacian();
        let x = vec![0.731; l.n()];
        let mut out = vec![1.0; l.n()];
        l.matvec(&x, &mut out);
        for v in out {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn laplacian_psd_and_symmetric() {
        // Spectral oracle: dense symmetric eigendecomposition.
        let c = generate_synthetic(
            &SyntheticConfig { regions: 4, nodes_per_region: 5, ..SyntheticConfig::default() },
            7,
        )
        .unwrap();
        let d = c.laplacian().to_dense();
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                assert_abs_diff_eq!(d[(i, j)], d[(j, i)], epsilon = 0.0);
            }
        }
        let eig = d.clone().symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(vals[0] >= -1e-10, "smallest eigenvalue {}", vals[0]);
        assert!(vals[0].abs() <= 1e-10);
        // Connected graph: second eigenvalue strictly positive.
        assert!(vals[1] > 1e-8, "fiedler value {}", vals[1]);
    }

    #[test]
    fn row_sums_vanish() {
        let c = generate_synthetic(&SyntheticConfig::default(), 3).unwrap();
        let d = c.laplacian().to_dense();
        for i in 0..d.nrows() {
            let s: f64 = (0..d.ncols()).map(|j| d[(i, j)]).sum();
            assert!(s.abs() <= 1e-12);
        }
    }

    #[test]
    fn permutation_equivariance() {
        // Relabeling nodes permutes the Laplacian: L' = P L P^T.
        let c = generate_synthetic(
            &SyntheticConfig { regions: 2, nodes_per_region: 4, ..SyntheticConfig::default() },
            11,
        )
        .unwrap();
        let m = c.num_nodes() as u32;
        // perm[old] = new
        let perm: Vec<u32> = (0..m).map(|i| (i * 3 + 1) % m).collect();
        let nodes: Vec<Node> = c
            .nodes
            .iter()
            .map(|n| Node { id: perm[n.id as usize], ..n.clone() })
            .collect();
        let edges: Vec<Edge> = c
            .edges
            .iter()
            .map(|e| Edge { i: perm[e.i as usize], j: perm[e.j as usize], weight: e.weight })
            .collect();
        let cp = Connectome::new(c.region_count, nodes, edges).unwrap();
        let l = c.laplacian().to_dense();
        let lp = cp.laplacian().to_dense();
        // Off-diagonals are single weights (exact); diagonal degrees are sums
        // whose accumulation order changes under the permutation, so allow ulps.
        for i in 0..m as usize {
            for j in 0..m as usize {
                let (a, b) = (lp[(perm[i] as usize, perm[j] as usize)], l[(i, j)]);
                if i == j {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-13 * b.abs().max(1.0));
                } else {
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn rescale_examples() {
        let f = project_scan(&[2.0, 5.0, 8.0]);
        assert_eq!(f.as_slice(), &[0.0, 0.5, 1.0]);
        let g = project_scan(&[3.3, 3.3, 3.3]);
        assert_eq!(g.as_slice(), &[0.5, 0.5, 0.5]);
        // Not idempotent: [0.2, 0.8] stretches to [0, 1].
        let h = project_scan(&[0.2, 0.8]);
        assert_eq!(h.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn rescale_affine_invariance() {
        let raw = [13.0, -2.0, 7.5, 0.25, 9.0];
        let shifted: Vec<f64> = raw.iter().map(|x| 3.5 * x - 11.0).collect();
        let a = project_scan(&raw);
        let b = project_scan(&shifted);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn outlier_mask_examples() {
        let s1 = NodeField::from_vec(vec![0.5, 0.5, 0.5]);
        let s2 = NodeField::from_vec(vec![0.44, 0.46, 0.5]);
        // 0.44 < 0.45 excluded; 0.46 kept; equal kept.
        assert_eq!(filter_outlier_nodes(&s1, &s2, 0.10), vec![false, true, true]);
        // tol = 0: any strict decrease excluded.
        assert_eq!(filter_outlier_nodes(&s1, &s2, 0.0), vec![false, false, true]);
        // tol = 1: cutoff is zero, everything nonnegative kept.
        assert_eq!(filter_outlier_nodes(&s1, &s2, 1.0), vec![true, true, true]);
    }

    #[test]
    fn threshold_examples() {
        let mut c = two_node(1.0);
        c.nodes.push(Node { id: 2, region: 1, volume: 1.0, pos: None });
        c.nodes.push(Node { id: 3, region: 1, volume: 1.0, pos: None });
        c.edges = vec![
            Edge { i: 0, j: 1, weight: 1.0 },
            Edge { i: 1, j: 2, weight: 5.0 },
            Edge { i: 2, j: 3, weight: 10.0 },
        ];
        c.validate().unwrap();
        let half = c.threshold_connectogram(0.5).unwrap();
        let kept: Vec<f64> = half.edges.iter().map(|e| e.weight).collect();
        assert_eq!(kept, vec![5.0, 10.0]);
        assert_eq!(c.threshold_connectogram(0.0).unwrap().edges.len(), 3);
        assert_eq!(c.threshold_connectogram(1.0).unwrap().edges.len(), 1);
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        let n = |id| Node { id, region: 1, volume: 1.0, pos: None };
        let base = vec![n(0), n(1)];
        let self_loop = Connectome::new(1, base.clone(), vec![Edge { i: 1, j: 1, weight: 1.0 }]);
        assert!(matches!(self_loop, Err(ConnectomeError::SelfLoop { node: 1, .. })));
        let dup = Connectome::new(
            1,
            base.clone(),
            vec![Edge { i: 0, j: 1, weight: 1.0 }, Edge { i: 1, j: 0, weight: 2.0 }],
        );
        assert!(matches!(dup, Err(ConnectomeError::DuplicateEdge { i: 0, j: 1 })));
        let neg = Connectome::new(1, base.clone(), vec![Edge { i: 0, j: 1, weight: -0.5 }]);
        assert!(matches!(neg, Err(ConnectomeError::BadWeight { .. })));
        let gap = Connectome::new(3, base.clone(), vec![]);
        assert!(matches!(gap, Err(ConnectomeError::BadRegion { .. }) | Err(ConnectomeError::EmptyRegion { .. })));
        let bad_id = Connectome::new(1, vec![n(0), n(2)], vec![]);
        assert!(matches!(bad_id, Err(ConnectomeError::BadNodeId { got: 2, .. })));
    }

    #[test]
    fn json_round_trip() {
        let c = generate_synthetic(&SyntheticConfig::default(), 5).unwrap();
        let dir = std::env::temp_dir().join(format!("fkuq-conn-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("graph.json");
        c.save(&path).unwrap();
        let back = Connectome::load(&path).unwrap();
        assert_eq!(c, back);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn scan_round_trip_and_errors() {
        let dir = std::env::temp_dir().join(format!("fkuq-scan-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("scan.csv");
        let vals = vec![0.25, 0.5, 0.125];
        save_scan_csv(&path, &vals).unwrap();
        assert_eq!(load_scan_csv(&path, 3).unwrap(), vals);
        assert!(matches!(load_scan_csv(&path, 4), Err(ConnectomeError::ScanMissingNode { id: 3 })));
        assert!(ingest_scaled_scan(vec![0.1, 1.2]).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn synthetic_is_deterministic_and_connected() {
        let cfg = SyntheticConfig::default();
        let a = generate_synthetic(&cfg, 99).unwrap();
        let b = generate_synthetic(&cfg, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.is_connected());
        assert_eq!(a.num_nodes(), 42);
        let c = generate_synthetic(&cfg, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_densities_are_extremes() {
        let cfg = SyntheticConfig {
            regions: 2,
            nodes_per_region: 3,
            intra_density: 1.0,
            inter_density: 1.0,
            ..SyntheticConfig::default()
        };
        let c = generate_synthetic(&cfg, 1).unwrap();
        assert_eq!(c.edges.len(), 15); // complete graph on 6 nodes
    }
}
