//! Undirected convention on top of the directed engine: every undirected
//! edge is an anti-parallel pair of directed edges (a self-loop is its own
//! partner). Updates arrive pair-closed and the record log is closed under
//! pairing: when one direction of a pair enters the record set, the other
//! direction's record follows.

use std::collections::HashSet;

use crate::decomp::{DecompConfig, DecompositionState, RecordOrigin, StageReport};
use crate::graph::{DynGraph, EdgeId, UpdateEvent, VertexId};
use crate::{Error, Result};

/// Builds the paired directed graph for the adapter.
pub struct UndirectedGraphBuilder {
    graph: DynGraph,
    partner: Vec<EdgeId>,
    pairs: u64,
}

impl UndirectedGraphBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            graph: DynGraph::with_vertices(n),
            partner: Vec::new(),
            pairs: 0,
        }
    }

    pub fn add_vertex(&mut self) -> VertexId {
        self.graph.add_vertex()
    }

    /// Adds an undirected edge as an anti-parallel pair; an undirected
    /// self-loop is a single self-partnered loop.
    pub fn add_pair(&mut self, u: VertexId, v: VertexId) -> Result<(EdgeId, EdgeId)> {
        if u == v {
            let e = self.graph.insert_self_loop(u)?;
            debug_assert_eq!(e.index(), self.partner.len());
            self.partner.push(e);
            self.pairs += 1;
            return Ok((e, e));
        }
        let e1 = self.graph.add_edge(u, v)?;
        let e2 = self.graph.add_edge(v, u)?;
        debug_assert_eq!(e1.index() + 1, e2.index());
        self.partner.push(e2);
        self.partner.push(e1);
        self.pairs += 1;
        Ok((e1, e2))
    }

    pub fn pair_count(&self) -> u64 {
        self.pairs
    }
}

pub struct UndirectedAdapter {
    state: DecompositionState,
    partner: Vec<EdgeId>,
    /// edges that already have a record (for closure)
    recorded: HashSet<EdgeId>,
    /// adversarially deleted edges: gone from the real graph, not merely
    /// from the maintained one
    really_deleted: HashSet<EdgeId>,
    closure_scan: usize,
    initial_pairs: u64,
}

impl UndirectedAdapter {
    pub fn initialize(builder: UndirectedGraphBuilder, cfg: DecompConfig) -> Result<Self> {
        let UndirectedGraphBuilder {
            graph,
            partner,
            pairs,
        } = builder;
        let state = DecompositionState::initialize(graph, cfg)?;
        let mut adapter = Self {
            state,
            partner,
            recorded: HashSet::new(),
            really_deleted: HashSet::new(),
            closure_scan: 0,
            initial_pairs: pairs,
        };
        adapter.enforce_closure();
        Ok(adapter)
    }

    pub fn state(&self) -> &DecompositionState {
        &self.state
    }

    pub(crate) fn state_mut(&mut self) -> &mut DecompositionState {
        &mut self.state
    }

    pub fn initial_pairs(&self) -> u64 {
        self.initial_pairs
    }

    pub fn partner(&self, e: EdgeId) -> Result<EdgeId> {
        self.partner
            .get(e.index())
            .copied()
            .ok_or(Error::UnknownEdge(e.0))
    }

    pub fn really_deleted(&self, e: EdgeId) -> bool {
        self.really_deleted.contains(&e)
    }

    /// An edge is real while it is alive in the maintained graph or parked
    /// in the record set without having been adversarially deleted.
    pub fn is_real(&self, e: EdgeId) -> bool {
        if self.really_deleted.contains(&e) {
            return false;
        }
        self.state.graph().is_alive(e) || self.state.engine_retired(e)
    }

    /// Deletes both partners as two directed updates within one stage.
    pub fn delete_pair(&mut self, e: EdgeId) -> Result<Vec<StageReport>> {
        let p = self.partner(e)?;
        if self.really_deleted.contains(&e) {
            return Err(Error::UnknownEdge(e.0));
        }
        let mut reports = Vec::new();
        reports.push(self.state.update(Some(UpdateEvent::DeleteEdge(e)))?);
        self.really_deleted.insert(e);
        if p != e {
            reports.push(self.state.update(Some(UpdateEvent::DeleteEdge(p)))?);
            self.really_deleted.insert(p);
        }
        self.enforce_closure();
        Ok(reports)
    }

    /// Inserts one undirected (self-partnered) loop.
    pub fn insert_loop(&mut self, v: VertexId) -> Result<(EdgeId, StageReport)> {
        let report = self.state.update(Some(UpdateEvent::InsertSelfLoop(v)))?;
        let id = EdgeId(self.state.graph().edge_id_bound() as u32 - 1);
        debug_assert!(self.state.graph().is_loop(id));
        debug_assert_eq!(id.index(), self.partner.len());
        self.partner.push(id);
        self.enforce_closure();
        Ok((id, report))
    }

    /// Splits `v`; the moved set must be closed under pairing.
    pub fn split_vertex(
        &mut self,
        v: VertexId,
        moved: &std::collections::BTreeSet<EdgeId>,
    ) -> Result<StageReport> {
        for &e in moved {
            let p = self.partner(e)?;
            if p != e && !moved.contains(&p) {
                return Err(Error::Precondition(format!(
                    "moved set must be pair-closed: {e} moved without {p}"
                )));
            }
        }
        let report = self.state.update(Some(UpdateEvent::SplitVertex {
            v,
            moved: moved.clone(),
        }))?;
        self.enforce_closure();
        Ok(report)
    }

    /// Raw access for composite stages (hierarchy split propagation); the
    /// caller must finish with [`settle_and_closure`](Self::settle_and_closure).
    pub(crate) fn apply_raw(&mut self, ev: UpdateEvent) -> Result<()> {
        self.state.apply_update(ev)
    }

    /// Materializes an anti-parallel pair between `u` and `v` and consumes
    /// one loop at each end: the loop-to-edge conversion. Degrees are
    /// restored exactly, so witnesses stay intact. No settle is run.
    pub(crate) fn convert_loops_to_pair(
        &mut self,
        u: VertexId,
        v: VertexId,
        loop_u: EdgeId,
        loop_v: EdgeId,
    ) -> Result<(EdgeId, EdgeId)> {
        if !self.state.graph().is_loop(loop_u) || !self.state.graph().is_loop(loop_v) {
            return Err(Error::Precondition("conversion consumes self-loops".into()));
        }
        let e1 = self.state.insert_edge_internal(u, v)?;
        let e2 = self.state.insert_edge_internal(v, u)?;
        debug_assert_eq!(e1.index(), self.partner.len());
        self.partner.push(e2);
        self.partner.push(e1);
        self.state.apply_update(UpdateEvent::DeleteEdge(loop_u))?;
        self.state.apply_update(UpdateEvent::DeleteEdge(loop_v))?;
        self.really_deleted.insert(loop_u);
        self.really_deleted.insert(loop_v);
        Ok((e1, e2))
    }

    pub(crate) fn settle_and_closure(&mut self) -> Result<()> {
        self.state.settle()?;
        self.enforce_closure();
        Ok(())
    }

    /// Record closure: when one direction of a pair has a record, its
    /// partner gets one too.
    fn enforce_closure(&mut self) {
        loop {
            let records = self.state.records();
            if self.closure_scan >= records.len() {
                break;
            }
            let mut missing: Vec<EdgeId> = Vec::new();
            for rec in &records[self.closure_scan..] {
                self.recorded.insert(rec.edge);
            }
            for rec in &records[self.closure_scan..] {
                if rec.origin == RecordOrigin::Closure {
                    continue;
                }
                let p = match self.partner(rec.edge) {
                    Ok(p) => p,
                    Err(_) => continue,
                };
                if p != rec.edge && !self.recorded.contains(&p) {
                    missing.push(p);
                    self.recorded.insert(p);
                }
            }
            self.closure_scan = records.len();
            for p in missing {
                let (t, h) = self
                    .state
                    .graph()
                    .endpoints_raw(p)
                    .expect("partner edge exists");
                self.state.push_closure_record(p, t, h);
            }
        }
    }
}
