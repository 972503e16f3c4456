//! Pairwise kernel-causality graph. Edges are decided pair by pair, so the
//! result may contain cycles.

use super::Dataset;
use crate::association::{generalized_corr_pair, Direction};
use crate::error::Result;
use crate::graph::MixedGraph;
use crate::record_io::{ParameterName, ParameterTable, Position};

pub fn gc_graph_data(data: &Dataset) -> MixedGraph {
    let mut g = MixedGraph::new(data.names().to_vec());
    for a in 0..data.p() {
        for b in a + 1..data.p() {
            match generalized_corr_pair(data.column(a), data.column(b)) {
                Ok(pair) => match pair.direction {
                    Direction::XcausesY => {
                        g.directed.insert((a, b));
                    }
                    Direction::YcausesX => {
                        g.directed.insert((b, a));
                    }
                    Direction::Undecided => {}
                },
                Err(e) => log::warn!("skipping pair {}/{}: {e}", data.names()[a], data.names()[b]),
            }
        }
    }
    g
}

/// Kernel-causality graph over all ten parameters of one position.
pub fn gc_graph(table: &ParameterTable, position: Position) -> Result<MixedGraph> {
    let data = Dataset::from_table(table, position, &ParameterName::ALL)?;
    Ok(gc_graph_data(&data))
}
