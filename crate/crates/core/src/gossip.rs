//! Synchronous push-pull epidemic dissemination.
//!
//! Each round every node contacts `fanout` distinct neighbours chosen
//! uniformly at random; both ends of a contact merge each other's known
//! item sets as they stood at the start of the round. Items are identified
//! by digest and tracked per node in a bitset.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

use crate::crypto::Digest;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("edge ({0}, {1}) names a node outside 0..{2}")]
    OutOfRange(NodeId, NodeId, usize),
    #[error("fanout must be at least 1")]
    ZeroFanout,
}

/// Undirected contact graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    adjacency: Vec<Vec<NodeId>>,
    fanout: usize,
}

impl Topology {
    pub fn from_edges(nodes: usize, edges: &[(NodeId, NodeId)], fanout: usize) -> Result<Self, TopologyError> {
        if fanout == 0 {
            return Err(TopologyError::ZeroFanout);
        }
        let mut sets = vec![BTreeSet::new(); nodes];
        for &(u, v) in edges {
            if u == v {
                return Err(TopologyError::SelfLoop(u));
            }
            if u >= nodes || v >= nodes {
                return Err(TopologyError::OutOfRange(u, v, nodes));
            }
            sets[u].insert(v);
            sets[v].insert(u);
        }
        Ok(Topology {
            adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            fanout,
        })
    }

    pub fn complete(nodes: usize, fanout: usize) -> Self {
        let edges: Vec<_> = (0..nodes).flat_map(|u| (u + 1..nodes).map(move |v| (u, v))).collect();
        Topology::from_edges(nodes, &edges, fanout.max(1)).expect("complete graph is well formed")
    }

    pub fn ring(nodes: usize, fanout: usize) -> Self {
        let edges: Vec<_> = if nodes < 2 {
            Vec::new()
        } else {
            (0..nodes)
                .map(|u| (u, (u + 1) % nodes))
                .filter(|(u, v)| u != v)
                .collect()
        };
        Topology::from_edges(nodes, &edges, fanout.max(1)).expect("ring is well formed")
    }

    /// Erdős–Rényi graph: each pair is joined with probability `p`.
    pub fn random<R: Rng + ?Sized>(nodes: usize, p: f64, fanout: usize, rng: &mut R) -> Self {
        let mut edges = Vec::new();
        for u in 0..nodes {
            for v in u + 1..nodes {
                if rng.gen_bool(p.clamp(0.0, 1.0)) {
                    edges.push((u, v));
                }
            }
        }
        Topology::from_edges(nodes, &edges, fanout.max(1)).expect("random graph is well formed")
    }

    /// Random graphs drawn until one is connected.
    pub fn random_connected<R: Rng + ?Sized>(nodes: usize, p: f64, fanout: usize, rng: &mut R) -> Self {
        loop {
            let t = Topology::random(nodes, p, fanout, rng);
            if t.partition_check().len() <= 1 {
                return t;
            }
        }
    }

    /// Parses a `u v` edge list with `#` comments. The node count is one
    /// past the largest id mentioned, or `min_nodes` if that is larger.
    pub fn parse_edge_list(text: &str, min_nodes: usize, fanout: usize) -> Result<Self, TopologyError> {
        let mut edges = Vec::new();
        let mut nodes = min_nodes;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| TopologyError::Parse { line: i + 1, message };
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(err(format!("expected `u v`, found `{line}`")));
            }
            let u: NodeId = parts[0]
                .parse()
                .map_err(|_| err(format!("bad node id `{}`", parts[0])))?;
            let v: NodeId = parts[1]
                .parse()
                .map_err(|_| err(format!("bad node id `{}`", parts[1])))?;
            if u == v {
                return Err(err(format!("self-loop at node {u}")));
            }
            nodes = nodes.max(u + 1).max(v + 1);
            edges.push((u, v));
        }
        Topology::from_edges(nodes, &edges, fanout)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn fanout(&self) -> usize {
        self.fanout
    }

    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.adjacency[u]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn partition_check(&self) -> Vec<Vec<NodeId>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut components = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            let mut comp = Vec::new();
            while let Some(u) = queue.pop_front() {
                comp.push(u);
                for &v in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ItemKind {
    Manifest,
    BoardHead,
    RevocationNotice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Item {
    pub kind: ItemKind,
    pub digest: Digest,
}

/// What each node knows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GossipState {
    items: Vec<Item>,
    index: HashMap<Digest, usize>,
    known: Vec<Vec<u64>>,
    receive_only: BTreeSet<NodeId>,
    round: u64,
}

impl GossipState {
    pub fn new(nodes: usize) -> Self {
        GossipState {
            items: Vec::new(),
            index: HashMap::new(),
            known: vec![Vec::new(); nodes],
            receive_only: BTreeSet::new(),
            round: 0,
        }
    }

    /// Marks `node` as an observer: it learns from contacts but never
    /// passes anything on.
    pub fn set_receive_only(&mut self, node: NodeId) {
        self.receive_only.insert(node);
    }

    pub fn round_count(&self) -> u64 {
        self.round
    }

    pub fn node_count(&self) -> usize {
        self.known.len()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    /// Makes `node` aware of `item`. Returns false if it already was.
    pub fn inject(&mut self, node: NodeId, item: Item) -> bool {
        let slot = match self.index.get(&item.digest) {
            Some(&s) => s,
            None => {
                let s = self.items.len();
                self.items.push(item);
                self.index.insert(item.digest, s);
                let words = s / 64 + 1;
                for set in &mut self.known {
                    set.resize(words, 0);
                }
                s
            }
        };
        let (w, b) = (slot / 64, 1u64 << (slot % 64));
        let fresh = self.known[node][w] & b == 0;
        self.known[node][w] |= b;
        fresh
    }

    pub fn knows(&self, node: NodeId, digest: &Digest) -> bool {
        match self.index.get(digest) {
            Some(&s) => self.known[node].get(s / 64).is_some_and(|w| w & (1 << (s % 64)) != 0),
            None => false,
        }
    }

    pub fn nodes_knowing(&self, digest: &Digest) -> usize {
        (0..self.node_count()).filter(|&u| self.knows(u, digest)).count()
    }

    /// True iff every node knows the item.
    pub fn converged(&self, digest: &Digest) -> bool {
        self.node_count() > 0 && (0..self.node_count()).all(|u| self.knows(u, digest))
    }

    pub fn converged_among(&self, digest: &Digest, nodes: &[NodeId]) -> bool {
        nodes.iter().all(|&u| self.knows(u, digest))
    }

    /// One synchronous push-pull round.
    pub fn round<R: Rng + ?Sized>(&mut self, topology: &Topology, rng: &mut R) {
        debug_assert_eq!(topology.node_count(), self.node_count());
        let snapshot = self.known.clone();
        for u in 0..self.node_count() {
            let neighbors = topology.neighbors(u);
            if neighbors.is_empty() {
                continue;
            }
            let picks = topology.fanout().min(neighbors.len());
            for i in sample(rng, neighbors.len(), picks) {
                let v = neighbors[i];
                if !self.receive_only.contains(&v) {
                    merge(&mut self.known[u], &snapshot[v]);
                }
                if !self.receive_only.contains(&u) {
                    merge(&mut self.known[v], &snapshot[u]);
                }
            }
        }
        self.round += 1;
    }
}

fn merge(into: &mut [u64], from: &[u64]) {
    for (a, b) in into.iter_mut().zip(from) {
        *a |= *b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::sha256;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn item(tag: &[u8]) -> Item {
        Item {
            kind: ItemKind::Manifest,
            digest: sha256(&[tag]),
        }
    }

    #[test]
    fn lone_node_is_unchanged() {
        let topo = Topology::complete(1, 1);
        let mut s = GossipState::new(1);
        s.inject(0, item(b"m"));
        let before = s.known.clone();
        s.round(&topo, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(s.known, before);
        assert!(s.converged(&item(b"m").digest));
    }

    #[test]
    fn pair_exchanges_in_one_round() {
        let topo = Topology::complete(2, 1);
        let mut s = GossipState::new(2);
        s.inject(0, item(b"m"));
        s.round(&topo, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(s.knows(1, &item(b"m").digest));
    }

    #[test]
    fn convergence_predicate() {
        let mut s = GossipState::new(3);
        let m = item(b"m");
        assert!(!s.converged(&m.digest));
        s.inject(1, m);
        assert!(!s.converged(&m.digest));
        s.inject(0, m);
        s.inject(2, m);
        assert!(s.converged(&m.digest));
    }

    #[test]
    fn observer_never_forwards() {
        // 0 - 1 - 2 where 1 only listens.
        let topo = Topology::from_edges(3, &[(0, 1), (1, 2)], 2).unwrap();
        let mut s = GossipState::new(3);
        s.set_receive_only(1);
        let m = item(b"m");
        s.inject(0, m);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            s.round(&topo, &mut rng);
        }
        assert!(s.knows(1, &m.digest));
        assert!(!s.knows(2, &m.digest));
    }

    #[test]
    fn components() {
        assert_eq!(Topology::complete(5, 1).partition_check().len(), 1);
        let triangles = Topology::from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)], 1).unwrap();
        assert_eq!(triangles.partition_check(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn edge_list_parsing() {
        let t = Topology::parse_edge_list("# ring\n0 1\n1 2 # tail\n\n2 0\n", 4, 1).unwrap();
        assert_eq!(t.node_count(), 4);
        assert_eq!(t.edge_count(), 3);
        assert_eq!(t.partition_check().len(), 2);
        assert!(matches!(
            Topology::parse_edge_list("0 1\n2\n", 0, 1),
            Err(TopologyError::Parse { line: 2, .. })
        ));
        assert!(Topology::parse_edge_list("1 1\n", 0, 1).is_err());
    }
}
