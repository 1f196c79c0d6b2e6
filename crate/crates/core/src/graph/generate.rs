use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GraphError, MeshGraph, NodeId};
use crate::rng::{derive_seed, Purpose};

/// Retries for `random-connected` before giving up.
pub const MAX_CONNECT_ATTEMPTS: u64 = 64;

/// A graph family plus its size parameters.
///
/// Textual form is `kind(arg,...)`: `path(n)`, `star(n)`, `cbt(n)`,
/// `grid(w,h)`, `rand(n,q)` and `expander(D,width)`. The long names
/// `complete-binary-tree`, `random-connected` and `layered-expander` are
/// accepted as aliases.
#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorSpec {
    Path(usize),
    Star(usize),
    /// Heap-ordered complete binary tree: node `i` has children `2i+1`, `2i+2`.
    CompleteBinaryTree(usize),
    Grid(usize, usize),
    /// G(n, q) conditioned on connectivity by resampling.
    RandomConnected(usize, f64),
    /// Hub node 0 followed by `depth` layers of `width` nodes. Each node links
    /// to one uniformly chosen node of the previous layer, and every other
    /// pair of consecutive-layer nodes is linked with probability
    /// `min(1, 2/width)`. The hub's eccentricity is exactly `depth`.
    LayeredExpander { depth: usize, width: usize },
}

impl GeneratorSpec {
    pub fn node_count(&self) -> usize {
        match *self {
            Self::Path(n) | Self::Star(n) | Self::CompleteBinaryTree(n) => n,
            Self::RandomConnected(n, _) => n,
            Self::Grid(w, h) => w * h,
            Self::LayeredExpander { depth, width } => 1 + depth * width,
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Path(n) => write!(f, "path({n})"),
            Self::Star(n) => write!(f, "star({n})"),
            Self::CompleteBinaryTree(n) => write!(f, "cbt({n})"),
            Self::Grid(w, h) => write!(f, "grid({w},{h})"),
            Self::RandomConnected(n, q) => write!(f, "rand({n},{q})"),
            Self::LayeredExpander { depth, width } => write!(f, "expander({depth},{width})"),
        }
    }
}

impl FromStr for GeneratorSpec {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::BadSpec(s.to_string());
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let kind = &s[..open];
        let args: Vec<&str> = inner.split(',').map(str::trim).collect();
        let int = |i: usize| -> Result<usize, GraphError> {
            args.get(i).and_then(|a| a.parse().ok()).ok_or_else(bad)
        };
        let arity = |k: usize| -> Result<(), GraphError> {
            if args.len() == k {
                Ok(())
            } else {
                Err(bad())
            }
        };
        let spec = match kind {
            "path" => {
                arity(1)?;
                Self::Path(int(0)?)
            }
            "star" => {
                arity(1)?;
                Self::Star(int(0)?)
            }
            "cbt" | "complete-binary-tree" => {
                arity(1)?;
                Self::CompleteBinaryTree(int(0)?)
            }
            "grid" => {
                arity(2)?;
                Self::Grid(int(0)?, int(1)?)
            }
            "rand" | "random-connected" => {
                arity(2)?;
                let q: f64 = args[1].parse().map_err(|_| bad())?;
                Self::RandomConnected(int(0)?, q)
            }
            "expander" | "layered-expander" => {
                arity(2)?;
                Self::LayeredExpander {
                    depth: int(0)?,
                    width: int(1)?,
                }
            }
            _ => return Err(bad()),
        };
        if spec.node_count() == 0 {
            return Err(bad());
        }
        Ok(spec)
    }
}

fn rng_for(seed: u64, attempt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&[seed, Purpose::Generator as u64, attempt]))
}

/// Generates a connected graph. Deterministic in `(spec, seed)`.
pub fn generate_graph(spec: &GeneratorSpec, seed: u64) -> Result<MeshGraph, GraphError> {
    let infeasible = |reason: &str| GraphError::Infeasible {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let n = spec.node_count();
    if n == 0 {
        return Err(infeasible("no nodes"));
    }
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    match *spec {
        GeneratorSpec::Path(n) => edges.extend((1..n).map(|i| (i - 1, i))),
        GeneratorSpec::Star(n) => edges.extend((1..n).map(|i| (0, i))),
        GeneratorSpec::CompleteBinaryTree(n) => edges.extend((1..n).map(|i| ((i - 1) / 2, i))),
        GeneratorSpec::Grid(w, h) => {
            for r in 0..h {
                for c in 0..w {
                    let v = r * w + c;
                    if c + 1 < w {
                        edges.push((v, v + 1));
                    }
                    if r + 1 < h {
                        edges.push((v, v + w));
                    }
                }
            }
        }
        GeneratorSpec::RandomConnected(n, q) => {
            if !(0.0..=1.0).contains(&q) {
                return Err(infeasible("edge probability must lie in [0, 1]"));
            }
            for attempt in 0..MAX_CONNECT_ATTEMPTS {
                let mut rng = rng_for(seed, attempt);
                edges.clear();
                for u in 0..n {
                    for v in u + 1..n {
                        if rng.gen_bool(q) {
                            edges.push((u, v));
                        }
                    }
                }
                match MeshGraph::from_edges(n, &edges) {
                    Ok(g) => return Ok(g),
                    Err(GraphError::Disconnected { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            return Err(infeasible(&format!(
                "still disconnected after {MAX_CONNECT_ATTEMPTS} attempts"
            )));
        }
        GeneratorSpec::LayeredExpander { depth, width } => {
            if width == 0 && depth > 0 {
                return Err(infeasible("width must be positive"));
            }
            let mut rng = rng_for(seed, 0);
            let q = (2.0 / width.max(1) as f64).min(1.0);
            let layer = |l: usize| -> std::ops::Range<NodeId> {
                if l == 0 {
                    0..1
                } else {
                    1 + (l - 1) * width..1 + l * width
                }
            };
            for l in 1..=depth {
                let prev = layer(l - 1);
                for v in layer(l) {
                    let anchor = rng.gen_range(prev.clone());
                    for u in prev.clone() {
                        if u == anchor || rng.gen_bool(q) {
                            edges.push((u, v));
                        }
                    }
                }
            }
        }
    }
    MeshGraph::from_edges(n, &edges)
}
