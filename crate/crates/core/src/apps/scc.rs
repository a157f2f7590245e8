//! Decremental strongly-connected components on top of a directed
//! decomposition: the maintained clusters are exactly the SCCs of the
//! maintained graph, so queries are cluster lookups. A recompute-based
//! validator cross-checks against Tarjan on demand.

use std::collections::BTreeSet;

use crate::decomp::{ClusterId, DecompConfig, DecompositionState, StageReport};
use crate::graph::{DynGraph, UpdateEvent, VertexId};
use crate::oracle;
use crate::{Error, Result};

pub struct SccView {
    state: DecompositionState,
}

impl SccView {
    pub fn initialize(graph: DynGraph, cfg: DecompConfig) -> Result<Self> {
        Ok(Self {
            state: DecompositionState::initialize(graph, cfg)?,
        })
    }

    pub fn state(&self) -> &DecompositionState {
        &self.state
    }

    pub fn update(&mut self, ev: UpdateEvent) -> Result<StageReport> {
        self.state.update(Some(ev))
    }

    /// The SCC of `v` as a cluster handle.
    pub fn scc_of(&self, v: VertexId) -> Result<ClusterId> {
        self.state.query_cluster(v)
    }

    /// All SCCs, ordered by smallest member.
    pub fn scc_all(&self) -> Vec<BTreeSet<VertexId>> {
        let mut parts = self.state.query_partition();
        parts.sort_by_key(|p| *p.iter().next().expect("nonempty cluster"));
        parts
    }

    /// Recompute-based validation: clusters must equal Tarjan components of
    /// the maintained graph.
    pub fn validate_against_tarjan(&self) -> Result<()> {
        let want: Vec<BTreeSet<VertexId>> = oracle::tarjan_scc(self.state.graph().view(), None)
            .into_iter()
            .map(|c| c.into_iter().collect())
            .collect();
        let got = self.scc_all();
        if want != got {
            return Err(Error::Validation(format!(
                "cluster partition diverged from Tarjan SCCs: {} vs {} components",
                got.len(),
                want.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeId;
    use crate::ratio::ratio;

    fn directed_clique(k: usize) -> DynGraph {
        let mut g = DynGraph::with_vertices(k);
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    g.add_edge(VertexId(i as u32), VertexId(j as u32)).unwrap();
                }
            }
        }
        g
    }

    #[test]
    fn strongly_connected_clique_is_one_scc() {
        let view = SccView::initialize(directed_clique(6), DecompConfig::default()).unwrap();
        assert_eq!(view.scc_all().len(), 1);
        view.validate_against_tarjan().unwrap();
    }

    #[test]
    fn barbell_cut_splits_sccs() {
        let mut g = directed_clique(6);
        for _ in 0..6 {
            g.add_vertex();
        }
        for i in 6..12u32 {
            for j in 6..12u32 {
                if i != j {
                    g.add_edge(VertexId(i), VertexId(j)).unwrap();
                }
            }
        }
        g.add_edge(VertexId(0), VertexId(6)).unwrap();
        g.add_edge(VertexId(6), VertexId(0)).unwrap();
        let cfg = DecompConfig {
            phi: ratio(1, 4),
            ..DecompConfig::default()
        };
        let view = SccView::initialize(g, cfg).unwrap();
        assert_eq!(view.scc_all().len(), 2);
        view.validate_against_tarjan().unwrap();
        assert_ne!(
            view.scc_of(VertexId(0)).unwrap(),
            view.scc_of(VertexId(6)).unwrap()
        );
    }

    #[test]
    fn dag_of_singletons() {
        // 0 -> 1 -> 2, no cycles: three singleton SCCs
        let mut g = DynGraph::with_vertices(3);
        g.add_edge(VertexId(0), VertexId(1)).unwrap();
        g.add_edge(VertexId(1), VertexId(2)).unwrap();
        let cfg = DecompConfig {
            phi: ratio(1, 2),
            ..DecompConfig::default()
        };
        let view = SccView::initialize(g, cfg).unwrap();
        assert_eq!(view.scc_all().len(), 3);
        view.validate_against_tarjan().unwrap();
    }

    #[test]
    fn deletions_track_tarjan() {
        let g = directed_clique(5);
        let cfg = DecompConfig {
            phi: ratio(1, 4),
            seed: 5,
            ..DecompConfig::default()
        };
        let mut view = SccView::initialize(g, cfg).unwrap();
        let victims: Vec<EdgeId> = view.state().graph().live_edge_ids().collect();
        for e in victims {
            if !view.state().graph().is_alive(e) && !view.state().engine_retired(e) {
                continue;
            }
            view.update(UpdateEvent::DeleteEdge(e)).unwrap();
            view.validate_against_tarjan().unwrap();
        }
    }
}
