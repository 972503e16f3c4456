//! Per-edge vote tallies across structure-discovery methods.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MixedGraph;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeVotes {
    pub supporting: BTreeSet<String>,
    pub opposing: BTreeSet<String>,
    pub undirected: BTreeSet<String>,
}

impl EdgeVotes {
    /// Methods with any edge between the two nodes.
    pub fn presence(&self) -> usize {
        self.supporting
            .iter()
            .chain(&self.opposing)
            .chain(&self.undirected)
            .collect::<BTreeSet<_>>()
            .len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusGraph {
    pub nodes: Vec<String>,
    pub methods: Vec<String>,
    /// Keyed by ordered (from, to) node index; every pair with any vote
    /// appears in both orders.
    #[serde(with = "vote_list")]
    pub edge_votes: BTreeMap<(usize, usize), EdgeVotes>,
}

impl ConsensusGraph {
    pub fn total_methods(&self) -> usize {
        self.methods.len()
    }

    pub fn votes(&self, from: usize, to: usize) -> Option<&EdgeVotes> {
        self.edge_votes.get(&(from, to))
    }

    /// Pairs (smaller index first) asserted in any form by more than half of
    /// the methods.
    pub fn majority_skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edge_votes
            .iter()
            .filter(|((a, b), v)| a < b && 2 * v.presence() > self.total_methods())
            .map(|(&k, _)| k)
            .collect()
    }

    /// The majority skeleton, each edge oriented when strictly more methods
    /// support one direction than the other.
    pub fn majority_graph(&self) -> MixedGraph {
        let mut g = MixedGraph::new(self.nodes.clone());
        for (a, b) in self.majority_skeleton() {
            let v = &self.edge_votes[&(a, b)];
            match v.supporting.len().cmp(&v.opposing.len()) {
                std::cmp::Ordering::Greater => g.directed.insert((a, b)),
                std::cmp::Ordering::Less => g.directed.insert((b, a)),
                std::cmp::Ordering::Equal => g.undirected.insert((a, b)),
            };
        }
        g
    }

    /// DOT of the majority graph with `support/oppose/undirected` labels.
    pub fn to_dot(&self, name: &str) -> String {
        let g = self.majority_graph();
        let mut out = format!("digraph \"{name}\" {{\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  \"{n}\";");
        }
        let label = |a: usize, b: usize| {
            let v = &self.edge_votes[&(a, b)];
            format!("{}/{}/{}", v.supporting.len(), v.opposing.len(), v.undirected.len())
        };
        for &(a, b) in &g.directed {
            let _ = writeln!(out, "  \"{}\" -> \"{}\" [label=\"{}\"];", self.nodes[a], self.nodes[b], label(a, b));
        }
        for &(a, b) in &g.undirected {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [dir=none, label=\"{}\"];",
                self.nodes[a],
                self.nodes[b],
                label(a, b)
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Tallies votes of named method graphs over one node set.
pub fn consensus(graphs: &[(String, MixedGraph)]) -> Result<ConsensusGraph> {
    let Some((_, first)) = graphs.first() else {
        return Err(Error::Config("consensus needs at least one graph".into()));
    };
    let nodes = first.nodes.clone();
    let mut methods = BTreeSet::new();
    let mut edge_votes: BTreeMap<(usize, usize), EdgeVotes> = BTreeMap::new();
    for (method, g) in graphs {
        if g.nodes != nodes {
            return Err(Error::InvalidGraph(format!("method {method} uses a different node set")));
        }
        if !methods.insert(method.clone()) {
            return Err(Error::Config(format!("method {method} supplied twice")));
        }
        for &(a, b) in &g.directed {
            edge_votes.entry((a, b)).or_default().supporting.insert(method.clone());
            edge_votes.entry((b, a)).or_default().opposing.insert(method.clone());
        }
        for &(a, b) in &g.undirected {
            edge_votes.entry((a, b)).or_default().undirected.insert(method.clone());
            edge_votes.entry((b, a)).or_default().undirected.insert(method.clone());
        }
    }
    Ok(ConsensusGraph {
        nodes,
        methods: methods.into_iter().collect(),
        edge_votes,
    })
}

mod vote_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        from: usize,
        to: usize,
        #[serde(flatten)]
        votes: EdgeVotes,
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<(usize, usize), EdgeVotes>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let list: Vec<Entry> = m
            .iter()
            .map(|(&(from, to), v)| Entry {
                from,
                to,
                votes: v.clone(),
            })
            .collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<(usize, usize), EdgeVotes>, D::Error> {
        let list = Vec::<Entry>::deserialize(d)?;
        Ok(list.into_iter().map(|e| ((e.from, e.to), e.votes)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::node_names;

    fn graph(directed: &[(usize, usize)], undirected: &[(usize, usize)]) -> MixedGraph {
        let mut g = MixedGraph::new(node_names(&["A", "B", "C"]));
        g.directed.extend(directed.iter().copied());
        g.undirected.extend(undirected.iter().copied());
        g
    }

    fn sizes(v: &EdgeVotes) -> (usize, usize, usize) {
        (v.supporting.len(), v.opposing.len(), v.undirected.len())
    }

    #[test]
    fn five_directed_one_undirected() {
        let mut gs: Vec<(String, MixedGraph)> = (0..5).map(|i| (format!("m{i}"), graph(&[(0, 1)], &[]))).collect();
        gs.push(("m5".into(), graph(&[], &[(0, 1)])));
        let c = consensus(&gs).unwrap();
        assert_eq!(sizes(c.votes(0, 1).unwrap()), (5, 0, 1));
        assert_eq!(sizes(c.votes(1, 0).unwrap()), (0, 5, 1));
        assert_eq!(c.majority_graph().directed.iter().copied().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn opposite_directions() {
        let c = consensus(&[("hc".into(), graph(&[(0, 1)], &[])), ("cam".into(), graph(&[(1, 0)], &[]))]).unwrap();
        assert_eq!(sizes(c.votes(0, 1).unwrap()), (1, 1, 0));
        assert_eq!(c.majority_graph().undirected.len(), 1);
    }

    #[test]
    fn empty_graph_has_no_votes() {
        let c = consensus(&[("hc".into(), graph(&[], &[]))]).unwrap();
        assert!(c.edge_votes.is_empty());
        assert_eq!(c.total_methods(), 1);
    }

    #[test]
    fn mismatched_nodes_rejected() {
        let other = MixedGraph::new(node_names(&["A", "B"]));
        assert!(consensus(&[("a".into(), graph(&[], &[])), ("b".into(), other)]).is_err());
        assert!(consensus(&[]).is_err());
    }

    #[test]
    fn order_of_methods_irrelevant() {
        let gs = vec![
            ("hc".to_string(), graph(&[(0, 1), (1, 2)], &[])),
            ("fges".to_string(), graph(&[], &[(0, 1)])),
            ("gc".to_string(), graph(&[(2, 1)], &[])),
        ];
        let mut rev = gs.clone();
        rev.reverse();
        let a = consensus(&gs).unwrap();
        let b = consensus(&rev).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let back: ConsensusGraph = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn vote_counts_bounded_by_methods() {
        let gs = vec![
            ("a".to_string(), graph(&[(0, 1)], &[(1, 2)])),
            ("b".to_string(), graph(&[(1, 0)], &[])),
        ];
        let c = consensus(&gs).unwrap();
        for v in c.edge_votes.values() {
            assert!(v.supporting.len() + v.opposing.len() + v.undirected.len() <= c.total_methods());
        }
        assert_eq!(c.majority_skeleton().into_iter().collect::<Vec<_>>(), vec![(0, 1)]);
    }
}
