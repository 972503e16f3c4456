//! Directed acyclic graphs, completed partially directed graphs (Markov
//! equivalence classes) and a general mixed edge set for reporting.
//!
//! Graphs hold at most 32 nodes; parent and neighbour sets are bitmasks.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_NODES: usize = 32;

fn bits(mask: u32) -> impl Iterator<Item = usize> {
    (0..MAX_NODES).filter(move |i| mask & (1 << i) != 0)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dag {
    nodes: Vec<String>,
    /// Bit `i` of `parents[j]` is set when `i → j`.
    parents: Vec<u32>,
}

impl Dag {
    pub fn empty(nodes: Vec<String>) -> Self {
        assert!(nodes.len() <= MAX_NODES, "at most {MAX_NODES} nodes");
        let p = nodes.len();
        Dag {
            nodes,
            parents: vec![0; p],
        }
    }

    pub fn from_edges(nodes: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut dag = Dag::empty(nodes);
        for &(a, b) in edges {
            if a == b || a >= dag.len() || b >= dag.len() {
                return Err(Error::InvalidGraph(format!("bad edge {a} -> {b}")));
            }
            dag.parents[b] |= 1 << a;
        }
        if !dag.is_acyclic() {
            return Err(Error::InvalidGraph("graph has a directed cycle".into()));
        }
        Ok(dag)
    }

    pub(crate) fn from_parents(nodes: Vec<String>, parents: Vec<u32>) -> Self {
        debug_assert_eq!(nodes.len(), parents.len());
        Dag { nodes, parents }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn parents(&self, j: usize) -> u32 {
        self.parents[j]
    }

    pub(crate) fn parent_masks(&self) -> &[u32] {
        &self.parents
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.parents[b] & (1 << a) != 0
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        self.parents[b] |= 1 << a;
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.parents[b] &= !(1 << a);
    }

    /// Edges in lexicographic (from, to) order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for a in 0..self.len() {
            for b in 0..self.len() {
                if self.has_edge(a, b) {
                    e.push((a, b));
                }
            }
        }
        e
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(|m| m.count_ones() as usize).sum()
    }

    /// Whether a directed path leads from `from` to `to`.
    pub fn has_path(&self, from: usize, to: usize) -> bool {
        let p = self.len();
        let mut children = vec![0u32; p];
        for (j, &m) in self.parents.iter().enumerate() {
            for i in bits(m) {
                children[i] |= 1 << j;
            }
        }
        let mut seen = 1u32 << from;
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            for c in bits(children[v] & !seen) {
                seen |= 1 << c;
                stack.push(c);
            }
        }
        false
    }

    /// Kahn's algorithm, smallest index first.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let p = self.len();
        let mut remaining = self.parents.clone();
        let mut placed = 0u32;
        let mut order = Vec::with_capacity(p);
        while order.len() < p {
            let next = (0..p).find(|&j| placed & (1 << j) == 0 && remaining[j] & !placed == 0)?;
            placed |= 1 << next;
            order.push(next);
            for r in remaining.iter_mut() {
                *r &= !(1 << next);
            }
        }
        Some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.parents.iter().enumerate().all(|(j, m)| m & (1 << j) == 0) && self.topological_order().is_some()
    }
}

/// A partially directed graph; produced by [`cpdag_of`] and the
/// equivalence-class search it is a completed PDAG (CPDAG).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cpdag {
    nodes: Vec<String>,
    /// Bit `i` of `directed[j]` is set when `i → j`.
    directed: Vec<u32>,
    /// Symmetric neighbour masks of undirected edges.
    undirected: Vec<u32>,
}

impl Cpdag {
    pub fn empty(nodes: Vec<String>) -> Self {
        assert!(nodes.len() <= MAX_NODES, "at most {MAX_NODES} nodes");
        let p = nodes.len();
        Cpdag {
            nodes,
            directed: vec![0; p],
            undirected: vec![0; p],
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn has_directed(&self, a: usize, b: usize) -> bool {
        self.directed[b] & (1 << a) != 0
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        self.undirected[a] & (1 << b) != 0
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_directed(a, b) || self.has_directed(b, a) || self.has_undirected(a, b)
    }

    /// Directed parents of `j`.
    pub fn parents(&self, j: usize) -> u32 {
        self.directed[j]
    }

    /// Undirected neighbours of `j`.
    pub fn neighbours(&self, j: usize) -> u32 {
        self.undirected[j]
    }

    /// All nodes adjacent to `j` by any edge.
    pub fn adjacents(&self, j: usize) -> u32 {
        let children: u32 = (0..self.len())
            .filter(|&c| self.has_directed(j, c))
            .fold(0, |m, c| m | (1 << c));
        self.directed[j] | self.undirected[j] | children
    }

    pub fn add_directed(&mut self, a: usize, b: usize) {
        self.remove_edge(a, b);
        self.directed[b] |= 1 << a;
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) {
        self.remove_edge(a, b);
        self.undirected[a] |= 1 << b;
        self.undirected[b] |= 1 << a;
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.directed[b] &= !(1 << a);
        self.directed[a] &= !(1 << b);
        self.undirected[a] &= !(1 << b);
        self.undirected[b] &= !(1 << a);
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for a in 0..self.len() {
            for b in 0..self.len() {
                if self.has_directed(a, b) {
                    e.push((a, b));
                }
            }
        }
        e
    }

    /// Undirected edges as (smaller, larger) index pairs.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for a in 0..self.len() {
            for b in a + 1..self.len() {
                if self.has_undirected(a, b) {
                    e.push((a, b));
                }
            }
        }
        e
    }

    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        let mut s: BTreeSet<(usize, usize)> = self.undirected_edges().into_iter().collect();
        for (a, b) in self.directed_edges() {
            s.insert((a.min(b), a.max(b)));
        }
        s
    }

    /// Whether applying the orientation rules changes nothing.
    pub fn is_meek_fixpoint(&self) -> bool {
        let mut g = self.clone();
        !apply_meek_rules(&mut g)
    }
}

fn meek_orients(g: &Cpdag, a: usize, b: usize) -> bool {
    let p = g.len();
    // R1: c → a, c not adjacent to b
    if bits(g.directed[a]).any(|c| c != b && !g.adjacent(c, b)) {
        return true;
    }
    // R2: a → c → b
    if (0..p).any(|c| g.has_directed(a, c) && g.has_directed(c, b)) {
        return true;
    }
    // R3: a -- c → b, a -- d → b, c and d not adjacent
    let cands: Vec<usize> = bits(g.undirected[a] & g.directed[b]).collect();
    for (i, &c) in cands.iter().enumerate() {
        for &d in &cands[i + 1..] {
            if !g.adjacent(c, d) {
                return true;
            }
        }
    }
    // R4: a -- d → c → b, a adjacent to c, d not adjacent to b
    for d in bits(g.undirected[a]) {
        if d == b || g.adjacent(d, b) {
            continue;
        }
        for c in 0..p {
            if c != a && c != b && g.has_directed(d, c) && g.has_directed(c, b) && g.adjacent(a, c) {
                return true;
            }
        }
    }
    false
}

/// Applies Meek's rules R1–R4 until nothing changes. Returns whether any
/// edge was oriented.
pub(crate) fn apply_meek_rules(g: &mut Cpdag) -> bool {
    let mut changed_any = false;
    loop {
        let mut changed = false;
        for a in 0..g.len() {
            for b in 0..g.len() {
                if a != b && g.has_undirected(a, b) && meek_orients(g, a, b) {
                    g.add_directed(a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            return changed_any;
        }
        changed_any = true;
    }
}

/// The equivalence class of a DAG: its skeleton with the v-structures
/// oriented, closed under Meek's rules.
pub fn cpdag_of(dag: &Dag) -> Cpdag {
    let p = dag.len();
    let mut g = Cpdag::empty(dag.nodes().to_vec());
    for (a, b) in dag.edges() {
        g.add_undirected(a, b);
    }
    let adjacent = |a: usize, c: usize| dag.has_edge(a, c) || dag.has_edge(c, a);
    for b in 0..p {
        let pa: Vec<usize> = bits(dag.parents(b)).collect();
        for (i, &a) in pa.iter().enumerate() {
            for &c in &pa[i + 1..] {
                if !adjacent(a, c) {
                    g.add_directed(a, b);
                    g.add_directed(c, b);
                }
            }
        }
    }
    apply_meek_rules(&mut g);
    g
}

/// A DAG in the class described by a partially directed graph (Dor and
/// Tarsi): repeatedly remove a sink whose undirected neighbours are adjacent
/// to all of its other neighbours, orienting those edges into it.
pub fn consistent_extension(g: &Cpdag) -> Result<Dag> {
    let p = g.len();
    let mut dag = Dag::empty(g.nodes().to_vec());
    for (a, b) in g.directed_edges() {
        dag.add_edge(a, b);
    }
    let mut alive: u32 = if p == 32 { u32::MAX } else { (1u32 << p) - 1 };
    while alive != 0 {
        let pick = bits(alive).find(|&x| {
            let has_child = bits(alive).any(|c| g.has_directed(x, c));
            if has_child {
                return false;
            }
            let adj = g.adjacents(x) & alive;
            bits(g.undirected[x] & alive).all(|y| {
                let others = adj & !(1 << y);
                bits(others).all(|z| g.adjacent(y, z))
            })
        });
        let Some(x) = pick else {
            return Err(Error::InvalidGraph("partially directed graph admits no consistent extension".into()));
        };
        for y in bits(g.undirected[x] & alive) {
            dag.add_edge(y, x);
        }
        alive &= !(1 << x);
    }
    debug_assert!(dag.is_acyclic());
    Ok(dag)
}

/// Edge set of any method's output, possibly cyclic, for reporting and
/// consensus. Undirected pairs are stored as (smaller, larger).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MixedGraph {
    pub nodes: Vec<String>,
    pub directed: BTreeSet<(usize, usize)>,
    pub undirected: BTreeSet<(usize, usize)>,
}

impl MixedGraph {
    pub fn new(nodes: Vec<String>) -> Self {
        MixedGraph {
            nodes,
            ..Default::default()
        }
    }

    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        let mut s = self.undirected.clone();
        for &(a, b) in &self.directed {
            s.insert((a.min(b), a.max(b)));
        }
        s
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    /// Drops every edge for which `forbidden(a, b)` holds (checked in both
    /// orientations).
    pub fn retain_edges(&mut self, forbidden: impl Fn(&str, &str) -> bool) {
        let nodes = &self.nodes;
        let bad = |&(a, b): &(usize, usize)| forbidden(&nodes[a], &nodes[b]) || forbidden(&nodes[b], &nodes[a]);
        self.directed.retain(|e| !bad(e));
        self.undirected.retain(|e| !bad(e));
    }

    /// Re-indexes onto a superset of nodes, adding the missing ones as
    /// isolated nodes.
    pub fn embed(&self, nodes: &[String]) -> Result<MixedGraph> {
        let map: Vec<usize> = self
            .nodes
            .iter()
            .map(|n| {
                nodes
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::InvalidGraph(format!("node {n} missing from target set")))
            })
            .collect::<Result<_>>()?;
        let mut g = MixedGraph::new(nodes.to_vec());
        g.directed = self.directed.iter().map(|&(a, b)| (map[a], map[b])).collect();
        g.undirected = self
            .undirected
            .iter()
            .map(|&(a, b)| (map[a].min(map[b]), map[a].max(map[b])))
            .collect();
        Ok(g)
    }

    /// Graphviz DOT: `a -> b;` for directed and `a -> b [dir=none];` for
    /// undirected edges.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph {} {{", dot_id(name));
        for n in &self.nodes {
            let _ = writeln!(out, "  {};", dot_id(n));
        }
        for &(a, b) in &self.directed {
            let _ = writeln!(out, "  {} -> {};", dot_id(&self.nodes[a]), dot_id(&self.nodes[b]));
        }
        for &(a, b) in &self.undirected {
            let _ = writeln!(out, "  {} -> {} [dir=none];", dot_id(&self.nodes[a]), dot_id(&self.nodes[b]));
        }
        out.push_str("}\n");
        out
    }
}

fn dot_id(s: &str) -> String {
    let plain = s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if plain {
        s.to_string()
    } else {
        format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

impl From<&Dag> for MixedGraph {
    fn from(d: &Dag) -> Self {
        MixedGraph {
            nodes: d.nodes().to_vec(),
            directed: d.edges().into_iter().collect(),
            undirected: BTreeSet::new(),
        }
    }
}

impl From<&Cpdag> for MixedGraph {
    fn from(g: &Cpdag) -> Self {
        MixedGraph {
            nodes: g.nodes().to_vec(),
            directed: g.directed_edges().into_iter().collect(),
            undirected: g.undirected_edges().into_iter().collect(),
        }
    }
}

/// JSON adjacency form with node names on the edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<String>,
    pub directed: Vec<[String; 2]>,
    pub undirected: Vec<[String; 2]>,
}

impl From<&MixedGraph> for GraphJson {
    fn from(g: &MixedGraph) -> Self {
        let name = |&(a, b): &(usize, usize)| [g.nodes[a].clone(), g.nodes[b].clone()];
        GraphJson {
            nodes: g.nodes.clone(),
            directed: g.directed.iter().map(name).collect(),
            undirected: g.undirected.iter().map(name).collect(),
        }
    }
}

impl Serialize for MixedGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphJson::from(self).serialize(s)
    }
}

pub fn node_names(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}
