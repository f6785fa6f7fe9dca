//! Communication graphs for decentralized runs.
//!
//! Six built-in shapes (random, star, cycle, ring k-NN, complete bipartite,
//! complete) plus user-supplied edge lists. Every [`Graph`] is undirected,
//! simple and connected; construction fails otherwise.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on rejection rounds for the Erdős–Rényi generator.
pub const MAX_RANDOM_RETRIES: usize = 1000;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("invalid topology parameters: {0}")]
    InvalidParams(String),
    #[error("graph on {m} nodes is not connected")]
    Disconnected { m: usize },
    #[error("random graph still disconnected after {retries} retries (m={m}, p={p})")]
    RetriesExhausted { m: usize, p: f64, retries: usize },
    #[error("edge list: {0}")]
    EdgeList(String),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    Random,
    Star,
    Cycle,
    #[serde(rename = "knng")]
    KNng,
    Bipartite,
    Complete,
    Custom,
}

impl TopologyKind {
    /// The six shapes used in the experiments, in display order.
    pub const BUILT_IN: [TopologyKind; 6] = [
        TopologyKind::Random,
        TopologyKind::Star,
        TopologyKind::Cycle,
        TopologyKind::KNng,
        TopologyKind::Bipartite,
        TopologyKind::Complete,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Random => "random",
            TopologyKind::Star => "star",
            TopologyKind::Cycle => "cycle",
            TopologyKind::KNng => "knng",
            TopologyKind::Bipartite => "bipartite",
            TopologyKind::Complete => "complete",
            TopologyKind::Custom => "custom",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TopologyKind {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "random" | "erdos-renyi" => Ok(TopologyKind::Random),
            "star" => Ok(TopologyKind::Star),
            "cycle" | "ring" => Ok(TopologyKind::Cycle),
            "knng" | "k-nng" => Ok(TopologyKind::KNng),
            "bipartite" => Ok(TopologyKind::Bipartite),
            "complete" => Ok(TopologyKind::Complete),
            "custom" => Ok(TopologyKind::Custom),
            other => Err(TopologyError::InvalidParams(format!(
                "unknown topology `{other}`"
            ))),
        }
    }
}

/// Shape parameters. Unset fields fall back to [`TopologyParams::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopologyParams {
    /// Edge probability for `Random`.
    pub p: Option<f64>,
    /// Ring neighbors per side for `KNng`.
    pub k: Option<usize>,
    /// Partition sizes for `Bipartite`; must sum to `m`.
    pub partition: Option<(usize, usize)>,
}

/// Concrete parameters after defaulting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub p: f64,
    pub k: usize,
    pub partition: (usize, usize),
}

impl TopologyParams {
    /// Defaults: `p = 0.3`, `k = min(2, m-1)`, partition `(m/2, m - m/2)`.
    pub fn resolve(&self, m: usize) -> ResolvedParams {
        ResolvedParams {
            p: self.p.unwrap_or(0.3),
            k: self.k.unwrap_or_else(|| 2.min(m.saturating_sub(1)).max(1)),
            partition: self.partition.unwrap_or((m / 2, m - m / 2)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    m: usize,
    /// Normalized `(i, l)` with `i < l`, sorted.
    edges: Vec<(usize, usize)>,
    kind: TopologyKind,
}

impl Graph {
    /// Builds a graph from an arbitrary edge collection, normalizing and
    /// deduplicating pairs. Rejects self-loops, out-of-range nodes and
    /// disconnected results.
    pub fn from_edges<I>(m: usize, edges: I, kind: TopologyKind) -> Result<Self, TopologyError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if m == 0 {
            return Err(TopologyError::InvalidParams("m must be positive".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= m || b >= m {
                return Err(TopologyError::InvalidParams(format!(
                    "edge ({a},{b}) out of range for m={m}"
                )));
            }
            if a == b {
                return Err(TopologyError::InvalidParams(format!(
                    "self-loop at node {a}"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let g = Graph {
            m,
            edges: set.into_iter().collect(),
            kind,
        };
        if !is_connected(&g) {
            return Err(TopologyError::Disconnected { m });
        }
        Ok(g)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.m];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for row in &mut adj {
            row.sort_unstable();
        }
        adj
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    /// Parses the edge-list text format: first line `m`, then one
    /// whitespace-separated `i l` pair per line (0-indexed). Blank lines and
    /// `#` comments are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self, TopologyError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| TopologyError::EdgeList("empty file".into()))?;
        let m: usize = header
            .parse()
            .map_err(|_| TopologyError::EdgeList(format!("bad node count `{header}`")))?;
        let mut edges = Vec::new();
        for (lineno, line) in lines {
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize, TopologyError> {
                tok.and_then(|t| t.parse().ok()).ok_or_else(|| {
                    TopologyError::EdgeList(format!("line {}: expected `i l`", lineno + 1))
                })
            };
            let a = parse(parts.next())?;
            let b = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(TopologyError::EdgeList(format!(
                    "line {}: trailing tokens",
                    lineno + 1
                )));
            }
            edges.push((a, b));
        }
        Graph::from_edges(m, edges, TopologyKind::Custom)
    }

    pub fn load_edge_list(path: &Path) -> Result<Self, TopologyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TopologyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_edge_list(&text)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.m);
        for (a, b) in &self.edges {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }
}

/// Breadth-first reachability from node 0.
pub fn is_connected(g: &Graph) -> bool {
    if g.m == 0 {
        return false;
    }
    let adj = g.adjacency();
    let mut seen = vec![false; g.m];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == g.m
}

/// Builds one of the built-in shapes. `Random` draws Erdős–Rényi graphs from
/// a single seeded stream, redrawing until connected.
pub fn build_graph(
    kind: TopologyKind,
    m: usize,
    params: &TopologyParams,
    seed: u64,
) -> Result<Graph, TopologyError> {
    if m < 2 {
        return Err(TopologyError::InvalidParams(format!(
            "need m >= 2, got {m}"
        )));
    }
    let rp = params.resolve(m);
    let edges: Vec<(usize, usize)> = match kind {
        TopologyKind::Random => return build_random(m, rp.p, seed),
        TopologyKind::Star => (1..m).map(|i| (0, i)).collect(),
        TopologyKind::Cycle => (0..m).map(|i| (i, (i + 1) % m)).collect(),
        TopologyKind::KNng => {
            let k = rp.k;
            if k == 0 || k >= m {
                return Err(TopologyError::InvalidParams(format!(
                    "knng needs 1 <= k < m, got k={k}, m={m}"
                )));
            }
            (0..m)
                .flat_map(|i| (1..=k).map(move |s| (i, (i + s) % m)))
                .filter(|(a, b)| a != b)
                .collect()
        }
        TopologyKind::Bipartite => {
            let (a, b) = rp.partition;
            if a == 0 || b == 0 || a + b != m {
                return Err(TopologyError::InvalidParams(format!(
                    "bipartite partition ({a},{b}) must be nonempty and sum to m={m}"
                )));
            }
            (0..a).flat_map(|i| (a..m).map(move |j| (i, j))).collect()
        }
        TopologyKind::Complete => (0..m)
            .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
            .collect(),
        TopologyKind::Custom => {
            return Err(TopologyError::InvalidParams(
                "custom graphs come from an edge-list file".into(),
            ))
        }
    };
    Graph::from_edges(m, edges, kind)
}

fn build_random(m: usize, p: f64, seed: u64) -> Result<Graph, TopologyError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(TopologyError::InvalidParams(format!(
            "edge probability must lie in (0,1], got {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_RANDOM_RETRIES {
        let mut edges = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        match Graph::from_edges(m, edges, TopologyKind::Random) {
            Ok(g) => return Ok(g),
            Err(TopologyError::Disconnected { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(TopologyError::RetriesExhausted {
        m,
        p,
        retries: MAX_RANDOM_RETRIES,
    })
}
